//! Exhaustive planner for tiny scheduling instances, the optimality oracle
//! the greedy placement is audited against. Kept deliberately independent
//! of the placement code: availability is recomputed from first principles
//! over plain rectangles.

use thiserror::Error;

pub const MAX_TINY_TASKS: usize = 3;
pub const MAX_TINY_NODES: usize = 3;
pub const MAX_TINY_WINDOWS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TinyWindow {
    pub a: u32,
    pub b: u32,
    pub start_s: f64,
    pub end_s: f64,
    pub capacity_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyTaskSpec {
    pub task_id: u32,
    pub priority: u8,
    pub arrival_s: f64,
    pub deadline_s: f64,
    pub compute_demand_gb: f64,
    /// When set, a transfer of this volume must follow the compute stage,
    /// leaving from the node the compute stage ran on.
    pub transfer_volume_gb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    /// Compute capacity per node, indexed by node id.
    pub node_compute_gbps: Vec<f64>,
    pub windows: Vec<TinyWindow>,
    pub tasks: Vec<TinyTaskSpec>,
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance exceeds oracle bounds ({0})")]
    InstanceTooLarge(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum OracleResource {
    Node(u32),
    Window(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePlacement {
    pub task_id: u32,
    resource: OracleResource,
    pub start_s: f64,
    pub end_s: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OraclePlan {
    /// Total priority weight of the tasks placed.
    pub value: u32,
    pub placements: Vec<OraclePlacement>,
    pub completed_tasks: Vec<u32>,
    pub failed_tasks: Vec<u32>,
}

fn free_at(cap: f64, entries: &[OraclePlacement], res: OracleResource, t: f64) -> f64 {
    let used: f64 = entries
        .iter()
        .filter(|e| e.resource == res && e.start_s <= t && t < e.end_s)
        .map(|e| e.amount)
        .sum();
    cap - used
}

fn min_free_over(
    cap: f64,
    entries: &[OraclePlacement],
    res: OracleResource,
    a: f64,
    b: f64,
) -> f64 {
    let mut boundaries = vec![a];
    for e in entries.iter().filter(|e| e.resource == res) {
        if e.start_s > a && e.start_s < b {
            boundaries.push(e.start_s);
        }
    }
    boundaries
        .iter()
        .map(|&t| free_at(cap, entries, res, t))
        .fold(f64::INFINITY, f64::min)
}

/// Largest sustainable constant amount from `start` for `work` units; the
/// same fixed-point rule the rest of the system uses, rebuilt here.
fn sustain(
    cap: f64,
    entries: &[OraclePlacement],
    res: OracleResource,
    start: f64,
    work: f64,
) -> Option<(f64, f64)> {
    let mut alloc = free_at(cap, entries, res, start);
    loop {
        if alloc <= 1e-12 {
            return None;
        }
        let duration = work / alloc;
        let min_free = min_free_over(cap, entries, res, start, start + duration);
        if min_free + 1e-9 * alloc.max(1.0) >= alloc {
            return Some((alloc, duration));
        }
        alloc = min_free;
    }
}

fn candidate_starts(
    entries: &[OraclePlacement],
    res: OracleResource,
    ready: f64,
    limit: f64,
) -> Vec<f64> {
    let mut starts = vec![ready];
    for e in entries.iter().filter(|e| e.resource == res) {
        if e.end_s > ready && e.end_s < limit {
            starts.push(e.end_s);
        }
    }
    starts.sort_by(|x, y| x.total_cmp(y));
    starts.dedup();
    starts
}

/// All complete placements of one task given what is already on the board:
/// compute options, each extended by every feasible transfer leg.
fn task_options(
    instance: &TinyInstance,
    prop_delay: &impl Fn(u32, u32, f64) -> f64,
    entries: &[OraclePlacement],
    task: &TinyTaskSpec,
) -> Vec<Vec<OraclePlacement>> {
    let mut options = Vec::new();
    for (node, &cap) in instance.node_compute_gbps.iter().enumerate() {
        let node = node as u32;
        let res = OracleResource::Node(node);
        for s in candidate_starts(entries, res, task.arrival_s, task.deadline_s) {
            let Some((alloc, duration)) = sustain(cap, entries, res, s, task.compute_demand_gb)
            else {
                continue;
            };
            let finish = s + duration;
            if finish > task.deadline_s {
                continue;
            }
            let compute = OraclePlacement {
                task_id: task.task_id,
                resource: res,
                start_s: s,
                end_s: finish,
                amount: alloc,
            };
            match task.transfer_volume_gb {
                None => options.push(vec![compute]),
                Some(volume) => {
                    let bits = volume * 8e9;
                    for (wi, w) in instance.windows.iter().enumerate() {
                        if w.a != node && w.b != node {
                            continue;
                        }
                        let dst = if w.a == node { w.b } else { w.a };
                        let res_w = OracleResource::Window(wi);
                        let ready = finish.max(w.start_s);
                        if ready >= w.end_s {
                            continue;
                        }
                        let mut with_compute = entries.to_vec();
                        with_compute.push(compute.clone());
                        for ts in candidate_starts(&with_compute, res_w, ready, w.end_s) {
                            let Some((walloc, wdur)) =
                                sustain(w.capacity_bps, &with_compute, res_w, ts, bits)
                            else {
                                continue;
                            };
                            let tfinish = ts + wdur + prop_delay(node, dst, ts);
                            if tfinish > w.end_s || tfinish > task.deadline_s {
                                continue;
                            }
                            options.push(vec![
                                compute.clone(),
                                OraclePlacement {
                                    task_id: task.task_id,
                                    resource: res_w,
                                    start_s: ts,
                                    end_s: tfinish,
                                    amount: walloc,
                                },
                            ]);
                        }
                    }
                }
            }
        }
    }
    options
}

fn search(
    instance: &TinyInstance,
    prop_delay: &impl Fn(u32, u32, f64) -> f64,
    remaining: &mut Vec<usize>,
    entries: &mut Vec<OraclePlacement>,
    placed: &mut Vec<u32>,
    best: &mut OraclePlan,
) {
    if remaining.is_empty() {
        let value: u32 = placed
            .iter()
            .map(|id| {
                instance
                    .tasks
                    .iter()
                    .find(|t| t.task_id == *id)
                    .unwrap()
                    .priority as u32
            })
            .sum();
        if value > best.value || (best.placements.is_empty() && best.completed_tasks.is_empty()) {
            *best = OraclePlan {
                value,
                placements: entries.clone(),
                completed_tasks: placed.clone(),
                failed_tasks: instance
                    .tasks
                    .iter()
                    .map(|t| t.task_id)
                    .filter(|id| !placed.contains(id))
                    .collect(),
            };
        }
        return;
    }
    for i in 0..remaining.len() {
        let task_idx = remaining.remove(i);
        let task = &instance.tasks[task_idx];
        for option in task_options(instance, prop_delay, entries, task) {
            let n = option.len();
            entries.extend(option);
            placed.push(task.task_id);
            search(instance, prop_delay, remaining, entries, placed, best);
            placed.pop();
            entries.truncate(entries.len() - n);
        }
        // Skip branch: the task fails in this plan.
        search(instance, prop_delay, remaining, entries, placed, best);
        remaining.insert(i, task_idx);
    }
}

/// Exhaustive enumeration over placements and start slots, maximizing the
/// priority-weighted completion. Test oracle only.
pub fn brute_force_plan(
    instance: &TinyInstance,
    prop_delay: impl Fn(u32, u32, f64) -> f64,
) -> Result<OraclePlan, OracleError> {
    if instance.tasks.len() > MAX_TINY_TASKS {
        return Err(OracleError::InstanceTooLarge("tasks"));
    }
    if instance.node_compute_gbps.len() > MAX_TINY_NODES {
        return Err(OracleError::InstanceTooLarge("nodes"));
    }
    if instance.windows.len() > MAX_TINY_WINDOWS {
        return Err(OracleError::InstanceTooLarge("windows"));
    }
    let mut best = OraclePlan {
        failed_tasks: instance.tasks.iter().map(|t| t.task_id).collect(),
        ..Default::default()
    };
    let mut remaining: Vec<usize> = (0..instance.tasks.len()).collect();
    search(
        instance,
        &prop_delay,
        &mut remaining,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut best,
    );
    Ok(best)
}
