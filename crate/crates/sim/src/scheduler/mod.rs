//! Stage placement onto resource timelines under precedence, contact-window
//! and deadline constraints.
//!
//! The placement rule is greedy earliest-finish in topological order: for
//! each stage, scan candidate nodes (filtered by affinity and the amounts
//! the resource view shows) and candidate windows, pick the placement that
//! finishes soonest, ties broken by lower node load then lower node id.
//! Stages allocate their full demand; a task that cannot finish before its
//! deadline fails atomically with no reservations retained.

pub mod brute;
pub mod timeline;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::awareness::ResourceView;
use crate::cluster::{Registry, ResourceKind};
use crate::orbital::{NodeRef, Regime, WindowProvider};
use crate::task::{PlacementAffinity, StageKind, StageSpec, TaskSpec};

pub use timeline::{Excluded, Reservation, ResourceDim, StackedLedger, Timeline};

const REL_EPS: f64 = 1e-9;
const MIN_ALLOC: f64 = 1e-12;

fn eps_for(scale: f64) -> f64 {
    REL_EPS * scale.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    InsufficientResources,
    NoWindow,
    DeadlineInfeasible,
    Preempted,
    StaleViewConflict,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureReason::InsufficientResources => "insufficient_resources",
            FailureReason::NoWindow => "no_window",
            FailureReason::DeadlineInfeasible => "deadline_infeasible",
            FailureReason::Preempted => "preempted",
            FailureReason::StaleViewConflict => "stale_view_conflict",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SchedulerError {
    #[error("priority 4 tasks are planned asynchronously, not on a cycle")]
    EmergencyHasNoCycle,
    #[error("invalid priority {0}")]
    InvalidPriority(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Planning cycle per regular priority tier, seconds.
    pub cycle_p1_s: f64,
    pub cycle_p2_s: f64,
    pub cycle_p3_s: f64,
    /// Cap on scanned placement candidates per stage; 0 means unlimited.
    pub max_node_candidates: usize,
    /// Up to this many preemption candidates the victim search is an
    /// exhaustive minimal-count search; beyond it a greedy fallback runs.
    pub exhaustive_victim_limit: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            cycle_p1_s: 600.0,
            cycle_p2_s: 180.0,
            cycle_p3_s: 60.0,
            max_node_candidates: 0,
            exhaustive_victim_limit: 10,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.cycle_p3_s < self.cycle_p2_s && self.cycle_p2_s < self.cycle_p1_s) {
            return Err("planning cycles must satisfy cycle(p3) < cycle(p2) < cycle(p1)".into());
        }
        Ok(())
    }
}

/// Replanning period for a regular priority tier.
pub fn planning_cycle(priority: u8, config: &SchedulerConfig) -> Result<f64, SchedulerError> {
    match priority {
        1 => Ok(config.cycle_p1_s),
        2 => Ok(config.cycle_p2_s),
        3 => Ok(config.cycle_p3_s),
        4 => Err(SchedulerError::EmergencyHasNoCycle),
        p => Err(SchedulerError::InvalidPriority(p)),
    }
}

/// Per-(task type, regime) execution efficiency multiplier on compute
/// throughput; absent entries mean 1.0.
#[derive(Debug, Clone, Default)]
pub struct EfficiencyMap {
    factors: BTreeMap<(String, Regime), f64>,
}

impl EfficiencyMap {
    pub fn insert(&mut self, task_type: &str, regime: Regime, factor: f64) {
        self.factors.insert((task_type.to_string(), regime), factor);
    }

    pub fn factor(&self, task_type: &str, regime: Regime) -> f64 {
        self.factors
            .get(&(task_type.to_string(), regime))
            .copied()
            .unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    Node(u32),
    Link { from: NodeRef, to: NodeRef },
}

impl Placement {
    /// Node where the stage output materializes (transfers: the receiving
    /// side; ground destinations have none).
    pub fn materialization_node(&self) -> Option<u32> {
        match self {
            Placement::Node(n) => Some(*n),
            Placement::Link {
                to: NodeRef::Sat(n),
                ..
            } => Some(*n),
            Placement::Link { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservedAmount {
    pub dim: ResourceDim,
    pub amount: f64,
    /// Availability the planner saw on this dimension when it placed the
    /// stage; execution failures compare truth against this.
    pub view_avail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub task_id: u32,
    pub stage_index: u32,
    pub priority: u8,
    pub placement: Placement,
    pub amounts: Vec<ReservedAmount>,
    pub start_s: f64,
    pub end_s: f64,
    pub planned_at_s: f64,
    /// State timestamp of the node view the plan was made against.
    pub view_state_ts_s: f64,
    /// Bounds of the contact window containing a transfer entry.
    pub window_bounds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Plan {
    pub entries: Vec<ScheduleEntry>,
    pub placed_tasks: Vec<u32>,
    pub failures: Vec<(u32, FailureReason)>,
}

/// Completed-stage progress carried by terminated or re-planned tasks:
/// stage index -> node where its output is materialized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskProgress {
    pub completed: BTreeMap<u32, u32>,
}

/// Immutable inputs shared by one planning pass.
pub struct PlanInputs<'a> {
    pub view: &'a ResourceView,
    pub registry: &'a Registry,
    pub efficiency: &'a EfficiencyMap,
    pub config: &'a SchedulerConfig,
    pub t_now: f64,
    /// Believed-capacity adjustments on top of the view, used to evaluate
    /// the effect of preempting running stages.
    pub view_adjust: BTreeMap<(u32, ResourceKind), f64>,
}

impl<'a> PlanInputs<'a> {
    pub fn new(
        view: &'a ResourceView,
        registry: &'a Registry,
        efficiency: &'a EfficiencyMap,
        config: &'a SchedulerConfig,
        t_now: f64,
    ) -> Self {
        Self {
            view,
            registry,
            efficiency,
            config,
            t_now,
            view_adjust: BTreeMap::new(),
        }
    }

    fn believed(&self, node: u32, kind: ResourceKind) -> Option<f64> {
        let base = self.view.value(node, kind)?.value;
        let adjust = self.view_adjust.get(&(node, kind)).copied().unwrap_or(0.0);
        Some(base + adjust)
    }

    fn view_state_ts(&self, node: u32) -> f64 {
        self.view
            .node(node)
            .map(|n| n.latest_state_ts_s)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

struct Candidate {
    finish_s: f64,
    load: i64,
    order_key: u32,
    entry: ScheduleEntry,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.finish_s, self.load, self.order_key) < (other.finish_s, other.load, other.order_key)
    }
}

/// Tracks why a stage found no placement; precedence:
/// deadline-infeasible > no-window (transfers) > insufficient resources.
#[derive(Default)]
struct FailureTracker {
    saw_late: bool,
    saw_window: bool,
    is_transfer: bool,
}

impl FailureTracker {
    fn reason(&self) -> FailureReason {
        if self.saw_late {
            FailureReason::DeadlineInfeasible
        } else if self.is_transfer && !self.saw_window {
            FailureReason::NoWindow
        } else {
            FailureReason::InsufficientResources
        }
    }
}

/// Largest constant allocation `a` from `start` with `a <= free` throughout
/// `[start, start + work / (a * rate))`; returns (allocation, duration).
fn sustained_alloc(
    ledger: &StackedLedger,
    dim: &ResourceDim,
    believed_cap: f64,
    start: f64,
    work: f64,
    rate: f64,
) -> Option<(f64, f64)> {
    let mut alloc = ledger.free_at(dim, believed_cap, start);
    loop {
        if alloc <= MIN_ALLOC {
            return None;
        }
        let duration = work / (alloc * rate);
        let min_free = ledger.min_free_over(dim, believed_cap, start, start + duration);
        if min_free + eps_for(alloc) >= alloc {
            return Some((alloc, duration));
        }
        alloc = min_free;
    }
}

/// Node dimensions a stage occupies; NaN marks the flexible compute amount.
fn stage_node_dims(stage: &StageSpec, node: u32) -> Vec<(ResourceDim, f64)> {
    let mut dims = Vec::new();
    if stage.compute_demand_gb > 0.0 {
        dims.push((ResourceDim::node(node, ResourceKind::Compute), f64::NAN));
    }
    let storage = stage.input_volume_gb + stage.output_volume_gb;
    if storage > 0.0 {
        dims.push((ResourceDim::node(node, ResourceKind::Storage), storage));
    }
    if stage.kind == StageKind::Sensing {
        dims.push((ResourceDim::node(node, ResourceKind::SensorSlots), 1.0));
    }
    dims
}

#[allow(clippy::too_many_arguments)]
fn eval_node_candidate(
    node: u32,
    stage: &StageSpec,
    task: &TaskSpec,
    ready: f64,
    inputs: &PlanInputs,
    ledger: &StackedLedger,
    tracker: &mut FailureTracker,
    best: &Option<Candidate>,
) -> Option<Candidate> {
    let descriptor = inputs.registry.descriptor(node)?;
    let eff = inputs.efficiency.factor(&task.task_type, descriptor.regime);
    let dims = stage_node_dims(stage, node);
    // Every required dimension must be present in the view.
    let mut believed = Vec::with_capacity(dims.len());
    for (dim, _) in &dims {
        let ResourceDim::Node { kind, .. } = dim else {
            unreachable!()
        };
        believed.push(inputs.believed(node, *kind)?);
    }
    let compute_dim = ResourceDim::node(node, ResourceKind::Compute);
    let compute_believed = dims
        .iter()
        .position(|(d, _)| *d == compute_dim)
        .map(|i| believed[i]);
    let min_duration = if stage.compute_demand_gb > 0.0 {
        let cap = compute_believed.unwrap_or(0.0);
        if cap <= MIN_ALLOC {
            return None;
        }
        stage.compute_demand_gb / (cap * eff)
    } else {
        stage.fixed_duration_s
    };

    let all_dims: Vec<ResourceDim> = dims.iter().map(|(d, _)| *d).collect();
    let mut starts = vec![ready];
    starts.extend(ledger.release_points(&all_dims, ready, task.deadline_s));

    let mut local_best: Option<Candidate> = None;
    for &s in &starts {
        if let Some(b) = best {
            if s >= b.finish_s {
                break;
            }
        }
        if let Some(b) = &local_best {
            if s >= b.finish_s {
                break;
            }
        }
        if s + min_duration > task.deadline_s {
            tracker.saw_late = true;
            break;
        }
        let (duration, compute_alloc, compute_avail) = if stage.compute_demand_gb > 0.0 {
            match sustained_alloc(
                ledger,
                &compute_dim,
                compute_believed.unwrap(),
                s,
                stage.compute_demand_gb,
                eff,
            ) {
                Some((alloc, duration)) => (duration, alloc, alloc),
                None => continue,
            }
        } else {
            (stage.fixed_duration_s, 0.0, 0.0)
        };
        let finish = s + duration;
        if finish > task.deadline_s {
            tracker.saw_late = true;
            continue;
        }
        let mut feasible = true;
        let mut amounts = Vec::with_capacity(dims.len());
        for ((dim, amount), cap) in dims.iter().zip(&believed) {
            if amount.is_nan() {
                amounts.push(ReservedAmount {
                    dim: *dim,
                    amount: compute_alloc,
                    view_avail: compute_avail,
                });
                continue;
            }
            let avail = ledger.min_free_over(dim, *cap, s, finish);
            if avail + eps_for(*amount) < *amount {
                feasible = false;
                break;
            }
            amounts.push(ReservedAmount {
                dim: *dim,
                amount: *amount,
                view_avail: avail,
            });
        }
        if !feasible {
            continue;
        }
        // Load as the view reports it. Fresh views spread work by truth;
        // stale views converge on seemingly idle nodes, which is exactly
        // where awareness delay turns into execution failures. The ledger
        // stays out of this: it gates feasibility above, not the tie-break.
        let mut load = 0i64;
        for ((dim, _), cap) in dims.iter().zip(&believed) {
            let ResourceDim::Node { kind, .. } = dim else {
                unreachable!()
            };
            let bound = descriptor.bound(*kind).max(1e-12);
            load += ((bound - cap).max(0.0) / bound * 1024.0) as i64;
        }
        let candidate = Candidate {
            finish_s: finish,
            load,
            order_key: node,
            entry: ScheduleEntry {
                task_id: task.task_id,
                stage_index: stage.stage_id,
                priority: task.priority,
                placement: Placement::Node(node),
                amounts,
                start_s: s,
                end_s: finish,
                planned_at_s: inputs.t_now,
                view_state_ts_s: inputs.view_state_ts(node),
                window_bounds: None,
            },
        };
        if local_best
            .as_ref()
            .map(|b| candidate.better_than(b))
            .unwrap_or(true)
        {
            local_best = Some(candidate);
        }
    }
    local_best
}

#[allow(clippy::too_many_arguments)]
fn eval_transfer_candidate(
    src: NodeRef,
    dst: NodeRef,
    order_key: u32,
    stage: &StageSpec,
    task: &TaskSpec,
    ready: f64,
    inputs: &PlanInputs,
    provider: &mut WindowProvider,
    ledger: &StackedLedger,
    tracker: &mut FailureTracker,
    best: &Option<Candidate>,
) -> Option<Candidate> {
    let dim = ResourceDim::link(src, dst);
    let volume_bits = stage.transfer_demand_gb * 8e9;
    let mut local_best: Option<Candidate> = None;
    let windows: Vec<(f64, f64, f64)> = provider
        .windows(src, dst)
        .iter()
        .filter(|w| w.end_s > ready && w.start_s < task.deadline_s)
        .map(|w| (w.start_s, w.end_s, w.capacity_bps))
        .collect();
    for (w_start, w_end, w_cap) in windows {
        tracker.saw_window = true;
        let s0 = ready.max(w_start);
        let min_duration = volume_bits / w_cap;
        if s0 + min_duration > task.deadline_s {
            tracker.saw_late = true;
            continue;
        }
        if s0 + min_duration > w_end {
            continue;
        }
        let mut starts = vec![s0];
        starts.extend(
            ledger
                .release_points(&[dim], s0, w_end)
                .into_iter()
                .filter(|&t| t < w_end),
        );
        for &s in &starts {
            if let Some(b) = best {
                if s >= b.finish_s {
                    break;
                }
            }
            if let Some(b) = &local_best {
                if s >= b.finish_s {
                    break;
                }
            }
            let Some((alloc, duration)) = sustained_alloc(ledger, &dim, w_cap, s, volume_bits, 1.0)
            else {
                continue;
            };
            let prop = provider.prop_delay_s(src, dst, s);
            let finish = s + duration + prop;
            if finish > w_end {
                continue;
            }
            if finish > task.deadline_s {
                tracker.saw_late = true;
                continue;
            }
            let load = ledger.contention(&[dim], s, finish);
            let candidate = Candidate {
                finish_s: finish,
                load,
                order_key,
                entry: ScheduleEntry {
                    task_id: task.task_id,
                    stage_index: stage.stage_id,
                    priority: task.priority,
                    placement: Placement::Link { from: src, to: dst },
                    amounts: vec![ReservedAmount {
                        dim,
                        amount: alloc,
                        view_avail: alloc,
                    }],
                    start_s: s,
                    end_s: finish,
                    planned_at_s: inputs.t_now,
                    view_state_ts_s: inputs.t_now,
                    window_bounds: Some((w_start, w_end)),
                },
            };
            if local_best
                .as_ref()
                .map(|b| candidate.better_than(b))
                .unwrap_or(true)
            {
                local_best = Some(candidate);
            }
        }
    }
    local_best
}

fn affinity_ok(
    affinity: PlacementAffinity,
    descriptor: &crate::cluster::CapabilityDescriptor,
) -> bool {
    match affinity {
        PlacementAffinity::Any => true,
        PlacementAffinity::RequiresSensor => descriptor.sensor_slots > 0,
        PlacementAffinity::RequiresGroundReachability => true,
    }
}

/// Deterministic candidate subset when a cap is configured: a stride walk
/// over the id-ordered list, offset by the task id.
fn capped_candidates(all: Vec<u32>, cap: usize, task_id: u32) -> Vec<u32> {
    if cap == 0 || all.len() <= cap {
        return all;
    }
    let stride = all.len().div_ceil(cap);
    let offset = task_id as usize % stride;
    all.into_iter().skip(offset).step_by(stride).collect()
}

fn commit_entry_reservations(timeline: &mut Timeline, entry: &ScheduleEntry) {
    for a in &entry.amounts {
        timeline.insert(
            a.dim,
            Reservation {
                task_id: entry.task_id,
                stage_index: entry.stage_index,
                priority: entry.priority,
                start_s: entry.start_s,
                end_s: entry.end_s,
                amount: a.amount,
            },
        );
    }
}

/// Greedy earliest-finish placement of every incomplete stage of a task.
/// Fails atomically: on any stage failure no reservations are retained.
pub fn place_dag(
    task: &TaskSpec,
    progress: &TaskProgress,
    inputs: &PlanInputs,
    provider: &mut WindowProvider,
    base: &Timeline,
    excluded: &Excluded,
) -> Result<Vec<ScheduleEntry>, FailureReason> {
    let order = task
        .topo_order()
        .map_err(|_| FailureReason::InsufficientResources)?;
    if inputs.t_now > task.deadline_s {
        return Err(FailureReason::DeadlineInfeasible);
    }
    let mut overlay = Timeline::new();
    let mut entries: Vec<ScheduleEntry> = Vec::new();
    // stage -> (finish time, output node) for stages resolved in this pass.
    let mut placed: BTreeMap<u32, (f64, Option<u32>)> = BTreeMap::new();

    for &idx in &order {
        let stage = &task.stages[idx];
        if let Some(&node) = progress.completed.get(&stage.stage_id) {
            placed.insert(stage.stage_id, (inputs.t_now, Some(node)));
            continue;
        }
        let preds = task.predecessors(idx);
        let mut ready = inputs.t_now.max(task.arrival_s);
        let mut input_location: Option<u32> = None;
        for &p in &preds {
            let pid = task.stages[p].stage_id;
            let (end, node) = placed
                .get(&pid)
                .copied()
                .expect("predecessors placed in topological order");
            ready = ready.max(end);
            if let Some(n) = node {
                match input_location {
                    None => input_location = Some(n),
                    Some(existing) if existing == n => {}
                    // Inputs scattered across nodes cannot be co-located.
                    Some(_) => return Err(FailureReason::InsufficientResources),
                }
            }
        }

        let mut tracker = FailureTracker {
            is_transfer: stage.kind.is_transfer(),
            ..Default::default()
        };
        let ledger = StackedLedger {
            base,
            overlay: &overlay,
            excluded,
        };
        let mut best: Option<Candidate> = None;

        if stage.kind.is_transfer() {
            let src_node = input_location.ok_or(FailureReason::NoWindow)?;
            let src = NodeRef::Sat(src_node);
            let destinations: Vec<NodeRef> = match stage.kind {
                StageKind::Distribution => provider
                    .stations()
                    .iter()
                    .map(|g| NodeRef::Ground(g.id))
                    .collect(),
                _ => capped_candidates(
                    provider
                        .plan()
                        .sat_neighbors(src_node)
                        .iter()
                        .copied()
                        .filter(|&n| inputs.registry.schedulable(n))
                        .collect(),
                    inputs.config.max_node_candidates,
                    task.task_id,
                )
                .into_iter()
                .map(NodeRef::Sat)
                .collect(),
            };
            for dst in destinations {
                let order_key = match dst {
                    NodeRef::Sat(n) | NodeRef::Ground(n) => n,
                };
                let candidate = eval_transfer_candidate(
                    src,
                    dst,
                    order_key,
                    stage,
                    task,
                    ready,
                    inputs,
                    provider,
                    &ledger,
                    &mut tracker,
                    &best,
                );
                if let Some(c) = candidate {
                    if best.as_ref().map(|b| c.better_than(b)).unwrap_or(true) {
                        best = Some(c);
                    }
                }
            }
        } else {
            let candidates: Vec<u32> = match input_location {
                Some(n) => vec![n],
                None => capped_candidates(
                    inputs
                        .registry
                        .descriptors()
                        .filter(|d| {
                            inputs.registry.schedulable(d.node_id)
                                && affinity_ok(stage.affinity, d)
                        })
                        .map(|d| d.node_id)
                        .collect(),
                    inputs.config.max_node_candidates,
                    task.task_id,
                ),
            };
            for node in candidates {
                let candidate = eval_node_candidate(
                    node,
                    stage,
                    task,
                    ready,
                    inputs,
                    &ledger,
                    &mut tracker,
                    &best,
                );
                if let Some(c) = candidate {
                    if best.as_ref().map(|b| c.better_than(b)).unwrap_or(true) {
                        best = Some(c);
                    }
                }
            }
        }

        match best {
            Some(c) => {
                placed.insert(
                    stage.stage_id,
                    (c.finish_s, c.entry.placement.materialization_node()),
                );
                commit_entry_reservations(&mut overlay, &c.entry);
                entries.push(c.entry);
            }
            None => {
                if std::env::var_os("CNSC_DEBUG_PLACE").is_some() {
                    eprintln!(
                        "place_dag: task={} stage={} kind={:?} t={} reason={} late={} window={}",
                        task.task_id,
                        stage.stage_id,
                        stage.kind,
                        inputs.t_now,
                        tracker.reason(),
                        tracker.saw_late,
                        tracker.saw_window
                    );
                }
                return Err(tracker.reason());
            }
        }
    }
    Ok(entries)
}

fn plan_order(tasks: &mut [(&TaskSpec, TaskProgress)]) {
    tasks.sort_by(|(a, _), (b, _)| {
        b.priority
            .cmp(&a.priority)
            .then(a.deadline_s.total_cmp(&b.deadline_s))
            .then(a.arrival_s.total_cmp(&b.arrival_s))
            .then(a.task_id.cmp(&b.task_id))
    });
}

/// Periodic pass over pending regular tasks: deterministic order, greedy
/// placement, reservations committed for every placed task.
pub fn plan_periodic(
    tasks: Vec<(&TaskSpec, TaskProgress)>,
    inputs: &PlanInputs,
    provider: &mut WindowProvider,
    timeline: &mut Timeline,
) -> Plan {
    let mut tasks = tasks;
    plan_order(&mut tasks);
    let mut plan = Plan::default();
    let excluded = Excluded::new();
    for (task, progress) in tasks {
        match place_dag(task, &progress, inputs, provider, timeline, &excluded) {
            Ok(entries) => {
                for e in &entries {
                    commit_entry_reservations(timeline, e);
                }
                plan.placed_tasks.push(task.task_id);
                plan.entries.extend(entries);
            }
            Err(reason) => plan.failures.push((task.task_id, reason)),
        }
    }
    plan
}

/// Re-plans terminated tasks: only incomplete stages are placed, completed
/// stages' outputs count as materialized at their recorded nodes.
pub fn replan_terminated(
    tasks: Vec<(&TaskSpec, TaskProgress)>,
    inputs: &PlanInputs,
    provider: &mut WindowProvider,
    timeline: &mut Timeline,
) -> Plan {
    plan_periodic(tasks, inputs, provider, timeline)
}

/// A stage currently executing on ground truth, eligible as a preemption
/// victim.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStage {
    pub task_id: u32,
    pub stage_index: u32,
    pub priority: u8,
    pub node: u32,
    pub amounts: Vec<(ResourceKind, f64)>,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Victim {
    pub task_id: u32,
    pub stage_index: u32,
    pub was_running: bool,
}

#[derive(Debug, Clone)]
pub struct EmergencyOutcome {
    pub entries: Vec<ScheduleEntry>,
    pub victims: Vec<Victim>,
}

#[derive(Debug, Clone)]
struct VictimCandidate {
    task_id: u32,
    stage_index: u32,
    priority: u8,
    running: Option<usize>,
}

fn try_with_victims(
    task: &TaskSpec,
    progress: &TaskProgress,
    inputs: &PlanInputs,
    provider: &mut WindowProvider,
    timeline: &Timeline,
    running: &[RunningStage],
    victims: &[&VictimCandidate],
) -> Option<Vec<ScheduleEntry>> {
    let mut excluded = Excluded::new();
    let mut adjusted = PlanInputs {
        view: inputs.view,
        registry: inputs.registry,
        efficiency: inputs.efficiency,
        config: inputs.config,
        t_now: inputs.t_now,
        view_adjust: inputs.view_adjust.clone(),
    };
    for v in victims {
        excluded.insert((v.task_id, v.stage_index));
        if let Some(r) = v.running {
            // Killing a running stage hands its amounts back to the node.
            let stage = &running[r];
            for &(kind, amount) in &stage.amounts {
                *adjusted.view_adjust.entry((stage.node, kind)).or_default() += amount;
            }
        }
    }
    place_dag(task, progress, &adjusted, provider, timeline, &excluded).ok()
}

/// Event-triggered emergency placement. If the task does not fit as-is,
/// preempts a minimal set of lower-priority reservations (pending or
/// running): exhaustive minimal-count search on small candidate sets, a
/// greedy shrink beyond. Priority-4 reservations are never displaced.
pub fn plan_emergency(
    task: &TaskSpec,
    progress: &TaskProgress,
    inputs: &PlanInputs,
    provider: &mut WindowProvider,
    timeline: &mut Timeline,
    running: &[RunningStage],
) -> Result<EmergencyOutcome, FailureReason> {
    debug_assert_eq!(task.priority, 4);
    let excluded = Excluded::new();
    match place_dag(task, progress, inputs, provider, timeline, &excluded) {
        Ok(entries) => {
            for e in &entries {
                commit_entry_reservations(timeline, e);
            }
            return Ok(EmergencyOutcome {
                entries,
                victims: Vec::new(),
            });
        }
        Err(FailureReason::DeadlineInfeasible) if inputs.t_now > task.deadline_s => {
            return Err(FailureReason::DeadlineInfeasible)
        }
        // No contact window at all: displacing other tasks cannot open one.
        Err(FailureReason::NoWindow) => return Err(FailureReason::NoWindow),
        Err(_) => {}
    }

    let mut candidates: Vec<VictimCandidate> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (_, r) in timeline.iter() {
        if r.priority < 4 && r.end_s > inputs.t_now && seen.insert((r.task_id, r.stage_index)) {
            candidates.push(VictimCandidate {
                task_id: r.task_id,
                stage_index: r.stage_index,
                priority: r.priority,
                running: None,
            });
        }
    }
    for (i, r) in running.iter().enumerate() {
        if r.priority < 4 && r.end_s > inputs.t_now && seen.insert((r.task_id, r.stage_index)) {
            candidates.push(VictimCandidate {
                task_id: r.task_id,
                stage_index: r.stage_index,
                priority: r.priority,
                running: Some(i),
            });
        }
    }
    candidates.sort_by_key(|c| (c.priority, c.task_id, c.stage_index));

    let chosen: Option<(Vec<&VictimCandidate>, Vec<ScheduleEntry>)> =
        if candidates.len() <= inputs.config.exhaustive_victim_limit {
            let n = candidates.len();
            let mut found = None;
            'outer: for size in 1..=n {
                for mask in 0u32..(1u32 << n) {
                    if (mask.count_ones() as usize) != size {
                        continue;
                    }
                    let set: Vec<&VictimCandidate> = (0..n)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| &candidates[i])
                        .collect();
                    if let Some(entries) =
                        try_with_victims(task, progress, inputs, provider, timeline, running, &set)
                    {
                        found = Some((set, entries));
                        break 'outer;
                    }
                }
            }
            found
        } else {
            let all: Vec<&VictimCandidate> = candidates.iter().collect();
            if try_with_victims(task, progress, inputs, provider, timeline, running, &all).is_none()
            {
                None
            } else {
                let mut kept: Vec<&VictimCandidate> = all.clone();
                let mut i = 0;
                while i < kept.len() {
                    let mut trial = kept.clone();
                    trial.remove(i);
                    if try_with_victims(
                        task, progress, inputs, provider, timeline, running, &trial,
                    )
                    .is_some()
                    {
                        kept = trial;
                    } else {
                        i += 1;
                    }
                }
                let entries =
                    try_with_victims(task, progress, inputs, provider, timeline, running, &kept)
                        .expect("kept set remains feasible");
                Some((kept, entries))
            }
        };

    let Some((victims, entries)) = chosen else {
        return Err(FailureReason::InsufficientResources);
    };
    for v in &victims {
        timeline.remove_task(v.task_id);
    }
    for e in &entries {
        commit_entry_reservations(timeline, e);
    }
    Ok(EmergencyOutcome {
        entries,
        victims: victims
            .into_iter()
            .map(|v| Victim {
                task_id: v.task_id,
                stage_index: v.stage_index,
                was_running: v.running.is_some(),
            })
            .collect(),
    })
}

/// One scheduling proposal competing for commitment.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub task_id: u32,
    pub priority: u8,
    /// Creation order, the arbitration tie-break.
    pub seq: u64,
    pub entries: Vec<ScheduleEntry>,
}

fn proposal_fits(proposal: &Proposal, inputs: &PlanInputs, timeline: &Timeline) -> bool {
    let mut trial = Timeline::new();
    let excluded = Excluded::new();
    for e in &proposal.entries {
        for a in &e.amounts {
            let believed = match a.dim {
                ResourceDim::Node { node, kind } => match inputs.believed(node, kind) {
                    Some(v) => v,
                    None => return false,
                },
                // Link entries were planned against their window capacity,
                // recorded as the availability seen.
                ResourceDim::Link { .. } => a.view_avail.max(a.amount),
            };
            let ledger = StackedLedger {
                base: timeline,
                overlay: &trial,
                excluded: &excluded,
            };
            let free = ledger.min_free_over(&a.dim, believed, e.start_s, e.end_s);
            if free + eps_for(a.amount) < a.amount {
                return false;
            }
        }
        for a in &e.amounts {
            trial.insert(
                a.dim,
                Reservation {
                    task_id: e.task_id,
                    stage_index: e.stage_index,
                    priority: e.priority,
                    start_s: e.start_s,
                    end_s: e.end_s,
                    amount: a.amount,
                },
            );
        }
    }
    true
}

/// Admits proposals in (priority desc, seq asc) order; a proposal that
/// conflicts with already-admitted reservations is rejected whole.
pub fn arbitrate(
    mut proposals: Vec<Proposal>,
    inputs: &PlanInputs,
    timeline: &mut Timeline,
) -> (Vec<Proposal>, Vec<Proposal>) {
    proposals.sort_by(|a, b| b.priority.cmp(&a.priority).then(a.seq.cmp(&b.seq)));
    let mut admitted = Vec::new();
    let mut rejected = Vec::new();
    for p in proposals {
        if proposal_fits(&p, inputs, timeline) {
            for e in &p.entries {
                commit_entry_reservations(timeline, e);
            }
            admitted.push(p);
        } else {
            rejected.push(p);
        }
    }
    (admitted, rejected)
}

/// Post-hoc feasibility audits shared by the test suites.
pub mod audit {
    use super::*;

    /// Capacity: per instant and dimension, committed reservations plus the
    /// new batch never exceed the amounts the planning view showed.
    pub fn verify_capacity(
        view: &ResourceView,
        prior: &Timeline,
        batch: &[ScheduleEntry],
    ) -> Result<(), String> {
        let mut dims: BTreeMap<ResourceDim, Vec<(f64, f64, f64)>> = BTreeMap::new();
        for (dim, r) in prior.iter() {
            dims.entry(*dim)
                .or_default()
                .push((r.start_s, r.end_s, r.amount));
        }
        let mut link_caps: BTreeMap<ResourceDim, f64> = BTreeMap::new();
        for e in batch {
            for a in &e.amounts {
                dims.entry(a.dim)
                    .or_default()
                    .push((e.start_s, e.end_s, a.amount));
                if let ResourceDim::Link { .. } = a.dim {
                    let cap = link_caps.entry(a.dim).or_insert(0.0);
                    *cap = cap.max(a.view_avail.max(a.amount));
                }
            }
        }
        for (dim, spans) in &dims {
            let believed = match dim {
                ResourceDim::Node { node, kind } => match view.value(*node, *kind) {
                    Some(v) => v.value,
                    None => continue,
                },
                ResourceDim::Link { .. } => match link_caps.get(dim) {
                    Some(c) => *c,
                    None => continue,
                },
            };
            let mut boundaries: Vec<f64> = spans.iter().map(|s| s.0).collect();
            boundaries.sort_by(|a, b| a.total_cmp(b));
            boundaries.dedup();
            for &t in &boundaries {
                let used: f64 = spans
                    .iter()
                    .filter(|(s, e, _)| *s <= t && t < *e)
                    .map(|(_, _, a)| a)
                    .sum();
                if used > believed + eps_for(believed) {
                    return Err(format!(
                        "dimension {dim:?}: {used} reserved at t={t} exceeds believed {believed}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Precedence: every stage entry starts no earlier than the max end of
    /// its predecessors (completed stages count as already ended).
    pub fn verify_precedence(
        task: &TaskSpec,
        progress: &TaskProgress,
        entries: &[ScheduleEntry],
    ) -> Result<(), String> {
        let by_stage: BTreeMap<u32, &ScheduleEntry> = entries
            .iter()
            .filter(|e| e.task_id == task.task_id)
            .map(|e| (e.stage_index, e))
            .collect();
        for &(a, b) in &task.edges {
            let Some(eb) = by_stage.get(&b) else {
                continue;
            };
            if progress.completed.contains_key(&a) {
                continue;
            }
            let Some(ea) = by_stage.get(&a) else {
                return Err(format!(
                    "task {}: stage {b} placed without predecessor {a}",
                    task.task_id
                ));
            };
            if eb.start_s + eps_for(eb.start_s) < ea.end_s {
                return Err(format!(
                    "task {}: stage {b} starts {} before predecessor {a} ends {}",
                    task.task_id, eb.start_s, ea.end_s
                ));
            }
        }
        Ok(())
    }

    /// Transfer entries must sit inside the single contact window they were
    /// planned for.
    pub fn verify_window_containment(entries: &[ScheduleEntry]) -> Result<(), String> {
        for e in entries {
            if let Placement::Link { .. } = e.placement {
                let Some((ws, we)) = e.window_bounds else {
                    return Err(format!(
                        "task {} stage {}: transfer entry without window bounds",
                        e.task_id, e.stage_index
                    ));
                };
                if e.start_s + eps_for(ws) < ws || e.end_s > we + eps_for(we) {
                    return Err(format!(
                        "task {} stage {}: transfer [{}, {}) outside window [{}, {})",
                        e.task_id, e.stage_index, e.start_s, e.end_s, ws, we
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn verify_deadline(task: &TaskSpec, entries: &[ScheduleEntry]) -> Result<(), String> {
        for e in entries.iter().filter(|e| e.task_id == task.task_id) {
            if e.end_s > task.deadline_s + eps_for(task.deadline_s) {
                return Err(format!(
                    "task {} stage {} ends {} after deadline {}",
                    task.task_id, e.stage_index, e.end_s, task.deadline_s
                ));
            }
        }
        Ok(())
    }
}
