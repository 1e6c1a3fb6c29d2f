//! The two awareness planes that feed the control center's resource view:
//! the adaptive multi-domain plane (nodes report to MEO/GEO anchors on
//! volatility-driven cadences, anchors relay to the ground) and the uniform
//! heartbeat baseline (every node reports straight to a ground station on
//! one fixed period, deferring through contact gaps).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ResourceKind;
use crate::geom::Vec3;
use crate::orbital::{NodeRef, WindowProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AwarenessMode {
    Yuheng,
    Baseline,
}

impl std::fmt::Display for AwarenessMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AwarenessMode::Yuheng => write!(f, "yuheng"),
            AwarenessMode::Baseline => write!(f, "baseline"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AwarenessError {
    #[error("domain partitioning requires at least one anchor")]
    NoAnchors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AwarenessDomain {
    pub anchor_id: u32,
    pub members: Vec<u32>,
}

/// Assigns every node to the nearest anchor (slant distance at the sampled
/// instant), ties broken by the lowest anchor id. Anchors belong to their
/// own domain.
pub fn partition_domains(
    nodes: &[(u32, Vec3)],
    anchors: &[(u32, Vec3)],
) -> Result<Vec<AwarenessDomain>, AwarenessError> {
    partition_domains_linked(nodes, anchors, |_, _| true)
}

/// Domain partition that accounts for link conditions: only anchors for
/// which `linked(node, anchor)` holds are considered, falling back to the
/// nearest anchor overall for nodes with no usable anchor link.
pub fn partition_domains_linked(
    nodes: &[(u32, Vec3)],
    anchors: &[(u32, Vec3)],
    linked: impl Fn(u32, u32) -> bool,
) -> Result<Vec<AwarenessDomain>, AwarenessError> {
    if anchors.is_empty() {
        return Err(AwarenessError::NoAnchors);
    }
    let mut anchors_sorted: Vec<&(u32, Vec3)> = anchors.iter().collect();
    anchors_sorted.sort_by_key(|(id, _)| *id);
    let mut domains: BTreeMap<u32, Vec<u32>> = anchors_sorted
        .iter()
        .map(|(id, _)| (*id, vec![*id]))
        .collect();
    for &(node, pos) in nodes {
        if domains.contains_key(&node) {
            continue;
        }
        let mut best: Option<(f64, u32)> = None;
        let mut best_any: Option<(f64, u32)> = None;
        for &&(anchor, apos) in &anchors_sorted {
            let d = pos.distance(apos);
            if best_any.map(|(bd, _)| d < bd).unwrap_or(true) {
                best_any = Some((d, anchor));
            }
            if linked(node, anchor) && best.map(|(bd, _)| d < bd).unwrap_or(true) {
                best = Some((d, anchor));
            }
        }
        let (_, anchor) = best.or(best_any).unwrap();
        domains.get_mut(&anchor).unwrap().push(node);
    }
    Ok(domains
        .into_iter()
        .map(|(anchor_id, members)| AwarenessDomain { anchor_id, members })
        .collect())
}

/// node -> anchor lookup built from a partition.
#[derive(Debug, Clone, Default)]
pub struct DomainAssignment {
    pub anchor_of: BTreeMap<u32, u32>,
}

impl DomainAssignment {
    pub fn from_domains(domains: &[AwarenessDomain]) -> Self {
        let mut anchor_of = BTreeMap::new();
        for d in domains {
            for &m in &d.members {
                anchor_of.insert(m, d.anchor_id);
            }
            anchor_of.insert(d.anchor_id, d.anchor_id);
        }
        Self { anchor_of }
    }

    pub fn is_anchor(&self, node: u32) -> bool {
        self.anchor_of.get(&node) == Some(&node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolatilityClass {
    Rapid,
    Moderate,
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilityThresholds {
    /// Normalized variation per second at or above which a resource is rapid.
    pub rapid_per_s: f64,
    /// Threshold for moderate; anything below is stable.
    pub moderate_per_s: f64,
}

impl Default for VolatilityThresholds {
    fn default() -> Self {
        Self {
            rapid_per_s: 0.01,
            moderate_per_s: 0.001,
        }
    }
}

/// Normalized variation rate of a value history: total |delta| relative to
/// capacity per second of history span.
pub fn variation_rate(history: &[(f64, f64)], capacity: f64) -> f64 {
    if history.len() < 2 || capacity <= 0.0 {
        return 0.0;
    }
    let span = history[history.len() - 1].0 - history[0].0;
    if span <= 0.0 {
        return 0.0;
    }
    let total: f64 = history
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).abs() / capacity)
        .sum();
    total / span
}

pub fn classify_volatility(
    history: &[(f64, f64)],
    capacity: f64,
    thresholds: &VolatilityThresholds,
) -> VolatilityClass {
    let v = variation_rate(history, capacity);
    if v >= thresholds.rapid_per_s {
        VolatilityClass::Rapid
    } else if v >= thresholds.moderate_per_s {
        VolatilityClass::Moderate
    } else {
        VolatilityClass::Stable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMode {
    Periodic,
    EventDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPolicy {
    pub mode: ReportMode,
    pub interval_s: f64,
    /// Relative change fraction that triggers an event-driven emission.
    pub event_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportingPolicy {
    pub rapid: ClassPolicy,
    pub moderate: ClassPolicy,
    pub stable: ClassPolicy,
}

impl Default for ReportingPolicy {
    fn default() -> Self {
        Self {
            rapid: ClassPolicy {
                mode: ReportMode::Periodic,
                interval_s: 10.0,
                event_threshold: 0.1,
            },
            moderate: ClassPolicy {
                mode: ReportMode::Periodic,
                interval_s: 60.0,
                event_threshold: 0.1,
            },
            stable: ClassPolicy {
                mode: ReportMode::Periodic,
                interval_s: 300.0,
                event_threshold: 0.1,
            },
        }
    }
}

impl ReportingPolicy {
    pub fn class(&self, class: VolatilityClass) -> &ClassPolicy {
        match class {
            VolatilityClass::Rapid => &self.rapid,
            VolatilityClass::Moderate => &self.moderate,
            VolatilityClass::Stable => &self.stable,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rapid.interval_s < self.moderate.interval_s
            && self.moderate.interval_s < self.stable.interval_s)
        {
            return Err("reporting intervals must satisfy rapid < moderate < stable".into());
        }
        for (name, c) in [
            ("rapid", &self.rapid),
            ("moderate", &self.moderate),
            ("stable", &self.stable),
        ] {
            if !(c.event_threshold > 0.0 && c.event_threshold <= 1.0) {
                return Err(format!("{name}.event_threshold must lie in (0, 1]"));
            }
            if c.interval_s <= 0.0 {
                return Err(format!("{name}.interval_s must be positive"));
            }
        }
        Ok(())
    }
}

pub fn reporting_interval(class: VolatilityClass, policy: &ReportingPolicy) -> f64 {
    policy.class(class).interval_s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSizing {
    pub header_bytes: u64,
    pub entry_bytes: u64,
}

impl Default for ReportSizing {
    fn default() -> Self {
        Self {
            header_bytes: 256,
            entry_bytes: 64,
        }
    }
}

impl ReportSizing {
    pub fn size_bytes(&self, entries: usize) -> u64 {
        self.header_bytes + self.entry_bytes * entries as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceReport {
    pub node_id: u32,
    pub generation_s: f64,
    /// (resource, value, state timestamp).
    pub payload: Vec<(ResourceKind, f64, f64)>,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewEntry {
    pub value: f64,
    pub state_ts_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeView {
    pub resources: BTreeMap<ResourceKind, ViewEntry>,
    pub receipt_s: f64,
    /// Freshest state timestamp across the node's resources.
    pub latest_state_ts_s: f64,
}

/// The control center's timestamped last-known resource state per node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResourceView {
    pub nodes: BTreeMap<u32, NodeView>,
}

impl ResourceView {
    pub fn node(&self, id: u32) -> Option<&NodeView> {
        self.nodes.get(&id)
    }

    pub fn value(&self, id: u32, resource: ResourceKind) -> Option<ViewEntry> {
        self.nodes
            .get(&id)
            .and_then(|n| n.resources.get(&resource).copied())
    }
}

/// Applies a delivered report: per-resource entries update only when the
/// incoming state timestamp is newer, so deliveries can arrive in any order.
pub fn merge_report(view: &mut ResourceView, report: &ResourceReport, receipt_s: f64) {
    debug_assert!(receipt_s >= report.generation_s);
    let node = view.nodes.entry(report.node_id).or_default();
    let mut applied = false;
    for &(resource, value, state_ts) in &report.payload {
        let entry = node.resources.entry(resource).or_insert(ViewEntry {
            value,
            state_ts_s: f64::NEG_INFINITY,
        });
        if state_ts > entry.state_ts_s {
            *entry = ViewEntry {
                value,
                state_ts_s: state_ts,
            };
            applied = true;
        }
        node.latest_state_ts_s = node.latest_state_ts_s.max(state_ts);
    }
    if applied {
        node.receipt_s = node.receipt_s.max(receipt_s);
    }
}

/// Per-node view staleness at `t`: the age of the freshest known state, or
/// age since scenario start for nodes that never reported. Returns the
/// per-node delays and their mean across the given nodes.
pub fn view_staleness(
    view: &ResourceView,
    nodes: &[u32],
    t: f64,
    scenario_start_s: f64,
) -> (Vec<(u32, f64)>, f64) {
    let mut delays = Vec::with_capacity(nodes.len());
    let mut sum = 0.0;
    for &n in nodes {
        let delay = match view.nodes.get(&n) {
            Some(v) if !v.resources.is_empty() => t - v.latest_state_ts_s,
            _ => t - scenario_start_s,
        };
        delays.push((n, delay));
        sum += delay;
    }
    let mean = if nodes.is_empty() {
        0.0
    } else {
        sum / nodes.len() as f64
    };
    (delays, mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteHop {
    pub from: NodeRef,
    pub to: NodeRef,
    pub depart_s: f64,
    pub arrive_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRoute {
    pub hops: Vec<RouteHop>,
    pub delivery_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RouteFailure {
    #[error("no route to the ground within the horizon")]
    NoRoute,
}

fn transmit_time_s(size_bytes: u64, capacity_bps: f64) -> f64 {
    size_bytes as f64 * 8.0 / capacity_bps
}

/// Earliest ground delivery from `from` starting no earlier than `t_ready`:
/// scans every station's next window, ties broken by station id order.
fn best_ground_hop(
    from: NodeRef,
    t_ready: f64,
    size_bytes: u64,
    provider: &mut WindowProvider,
) -> Option<RouteHop> {
    let station_ids: Vec<u32> = provider.stations().iter().map(|g| g.id).collect();
    let horizon = provider.plan().horizon_s;
    let mut best: Option<RouteHop> = None;
    for gid in station_ids {
        let ground = NodeRef::Ground(gid);
        let Some(w) = provider.next_window(from, ground, t_ready) else {
            continue;
        };
        let depart = t_ready.max(w.start_s);
        if depart >= horizon || depart >= w.end_s {
            continue;
        }
        let capacity = w.capacity_bps;
        let arrive = depart + transmit_time_s(size_bytes, capacity)
            + provider.prop_delay_s(from, ground, depart);
        if best.as_ref().map(|b| arrive < b.arrive_s).unwrap_or(true) {
            best = Some(RouteHop {
                from,
                to: ground,
                depart_s: depart,
                arrive_s: arrive,
            });
        }
    }
    best
}

/// Plans the delivery route for one report without contention: the adaptive
/// plane relays through the node's domain anchor, the baseline goes straight
/// to a ground station and defers through gaps. Queueing at shared ground
/// resources is layered on by the engine.
pub fn plan_report_route(
    node_id: u32,
    t: f64,
    mode: AwarenessMode,
    provider: &mut WindowProvider,
    domains: &DomainAssignment,
    size_bytes: u64,
) -> Result<ReportRoute, RouteFailure> {
    let node = NodeRef::Sat(node_id);
    match mode {
        AwarenessMode::Baseline => {
            let hop = best_ground_hop(node, t, size_bytes, provider).ok_or(RouteFailure::NoRoute)?;
            Ok(ReportRoute {
                delivery_s: hop.arrive_s,
                hops: vec![hop],
            })
        }
        AwarenessMode::Yuheng => {
            let anchor = domains.anchor_of.get(&node_id).copied().unwrap_or(node_id);
            if anchor == node_id {
                let hop =
                    best_ground_hop(node, t, size_bytes, provider).ok_or(RouteFailure::NoRoute)?;
                return Ok(ReportRoute {
                    delivery_s: hop.arrive_s,
                    hops: vec![hop],
                });
            }
            let anchor_ref = NodeRef::Sat(anchor);
            let horizon = provider.plan().horizon_s;
            let w = provider
                .next_window(node, anchor_ref, t)
                .ok_or(RouteFailure::NoRoute)?;
            let depart = t.max(w.start_s);
            if depart >= horizon || depart >= w.end_s {
                return Err(RouteFailure::NoRoute);
            }
            let capacity = w.capacity_bps;
            let arrive_anchor = depart + transmit_time_s(size_bytes, capacity)
                + provider.prop_delay_s(node, anchor_ref, depart);
            let uplink = RouteHop {
                from: node,
                to: anchor_ref,
                depart_s: depart,
                arrive_s: arrive_anchor,
            };
            let down = best_ground_hop(anchor_ref, arrive_anchor, size_bytes, provider)
                .ok_or(RouteFailure::NoRoute)?;
            Ok(ReportRoute {
                delivery_s: down.arrive_s,
                hops: vec![uplink, down],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::SPEED_OF_LIGHT_KM_S;
    use crate::orbital::{
        contact_plan, generate_constellation, index_plan, CapacityConfig, ContactWindow,
        CrossRegimeWindows, GroundStationSpec, LinkClass, OrbitShellSpec, Regime,
        GEO_ALTITUDE_KM,
    };
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_anchor_takes_every_node() {
        let nodes: Vec<(u32, Vec3)> = (0..10)
            .map(|i| (i, Vec3::new(7000.0 + i as f64, 0.0, 0.0)))
            .collect();
        let anchors = vec![(99, Vec3::new(0.0, 42_164.0, 0.0))];
        let domains = partition_domains(&nodes, &anchors).unwrap();
        assert_eq!(domains.len(), 1);
        assert_eq!(domains[0].anchor_id, 99);
        assert_eq!(domains[0].members.len(), 11); // anchor joins its own domain
    }

    #[test]
    fn equidistant_node_goes_to_lower_anchor_id() {
        let nodes = vec![(1, Vec3::new(0.0, 0.0, 7000.0))];
        let anchors = vec![
            (12, Vec3::new(20_000.0, 0.0, 0.0)),
            (7, Vec3::new(-20_000.0, 0.0, 0.0)),
        ];
        let domains = partition_domains(&nodes, &anchors).unwrap();
        let seven = domains.iter().find(|d| d.anchor_id == 7).unwrap();
        assert!(seven.members.contains(&1));
    }

    #[test]
    fn no_anchors_is_an_error() {
        assert_eq!(
            partition_domains(&[(0, Vec3::default())], &[]),
            Err(AwarenessError::NoAnchors)
        );
    }

    /// Oracle: exhaustive nearest-anchor scan.
    #[test]
    fn partition_matches_brute_force_on_random_nodes() {
        let mut rng = StdRng::seed_from_u64(21);
        let rand_pos = |rng: &mut StdRng| {
            Vec3::new(
                rng.gen_range(-42_000.0..42_000.0),
                rng.gen_range(-42_000.0..42_000.0),
                rng.gen_range(-42_000.0..42_000.0),
            )
        };
        let nodes: Vec<(u32, Vec3)> = (0..500).map(|i| (i, rand_pos(&mut rng))).collect();
        let anchors: Vec<(u32, Vec3)> =
            (1000..1005).map(|i| (i, rand_pos(&mut rng))).collect();
        let domains = partition_domains(&nodes, &anchors).unwrap();
        let assignment = DomainAssignment::from_domains(&domains);
        for &(node, pos) in &nodes {
            let mut best = (f64::INFINITY, 0u32);
            for &(a, apos) in &anchors {
                let d = pos.distance(apos);
                if d < best.0 || (d == best.0 && a < best.1) {
                    best = (d, a);
                }
            }
            assert_eq!(assignment.anchor_of[&node], best.1);
        }
    }

    #[test]
    fn constant_history_is_stable() {
        let history: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(
            classify_volatility(&history, 5.0, &VolatilityThresholds::default()),
            VolatilityClass::Stable
        );
        // Single sample is stable by definition.
        assert_eq!(
            classify_volatility(&[(0.0, 1.0)], 5.0, &VolatilityThresholds::default()),
            VolatilityClass::Stable
        );
    }

    #[test]
    fn alternating_full_swing_is_rapid() {
        let history: Vec<(f64, f64)> = (0..20)
            .map(|i| (i as f64, if i % 2 == 0 { 0.0 } else { 5.0 }))
            .collect();
        assert_eq!(
            classify_volatility(&history, 5.0, &VolatilityThresholds::default()),
            VolatilityClass::Rapid
        );
    }

    /// Oracle: recompute the variation rate directly.
    #[test]
    fn classification_matches_direct_threshold_evaluation() {
        let thresholds = VolatilityThresholds::default();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(2..30);
            let capacity = rng.gen_range(1.0..10.0);
            let history: Vec<(f64, f64)> = (0..n)
                .map(|i| (i as f64 * rng.gen_range(0.5..5.0), rng.gen_range(0.0..capacity)))
                .collect();
            let mut sorted = history.clone();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let span = sorted[sorted.len() - 1].0 - sorted[0].0;
            let total: f64 = sorted
                .windows(2)
                .map(|w| (w[1].1 - w[0].1).abs() / capacity)
                .sum();
            let v = if span > 0.0 { total / span } else { 0.0 };
            let expected = if v >= thresholds.rapid_per_s {
                VolatilityClass::Rapid
            } else if v >= thresholds.moderate_per_s {
                VolatilityClass::Moderate
            } else {
                VolatilityClass::Stable
            };
            assert_eq!(classify_volatility(&sorted, capacity, &thresholds), expected);
        }
    }

    #[test]
    fn default_intervals_are_ordered() {
        let policy = ReportingPolicy::default();
        policy.validate().unwrap();
        assert_eq!(reporting_interval(VolatilityClass::Rapid, &policy), 10.0);
        assert_eq!(reporting_interval(VolatilityClass::Moderate, &policy), 60.0);
        assert_eq!(reporting_interval(VolatilityClass::Stable, &policy), 300.0);
        assert!(
            reporting_interval(VolatilityClass::Rapid, &policy)
                < reporting_interval(VolatilityClass::Stable, &policy)
        );
    }

    #[test]
    fn bad_policies_fail_validation() {
        let mut policy = ReportingPolicy::default();
        policy.stable.interval_s = 5.0;
        assert!(policy.validate().is_err());
        let mut policy = ReportingPolicy::default();
        policy.rapid.event_threshold = 0.0;
        assert!(policy.validate().is_err());
    }

    fn report(node: u32, generation: f64, value: f64) -> ResourceReport {
        ResourceReport {
            node_id: node,
            generation_s: generation,
            payload: vec![(ResourceKind::Compute, value, generation)],
            size_bytes: ReportSizing::default().size_bytes(1),
        }
    }

    #[test]
    fn merge_into_empty_view_copies_entries() {
        let mut view = ResourceView::default();
        merge_report(&mut view, &report(3, 10.0, 4.5), 12.0);
        let entry = view.value(3, ResourceKind::Compute).unwrap();
        assert_eq!(entry.value, 4.5);
        assert_eq!(entry.state_ts_s, 10.0);
        assert_eq!(view.node(3).unwrap().receipt_s, 12.0);
    }

    #[test]
    fn stale_report_after_fresh_one_is_ignored() {
        let mut view = ResourceView::default();
        merge_report(&mut view, &report(3, 20.0, 9.9), 21.0);
        merge_report(&mut view, &report(3, 10.0, 1.1), 22.0);
        let entry = view.value(3, ResourceKind::Compute).unwrap();
        assert_eq!(entry.value, 9.9);
        assert_eq!(entry.state_ts_s, 20.0);
    }

    /// Oracle: per-resource max-state-timestamp selection over the full set.
    #[test]
    fn merge_order_independence_on_random_interleavings() {
        let mut rng = StdRng::seed_from_u64(8);
        let reports: Vec<ResourceReport> = (0..100)
            .map(|i| {
                let node = rng.gen_range(0..5);
                let generation = rng.gen_range(0.0..1000.0);
                ResourceReport {
                    node_id: node,
                    generation_s: generation,
                    payload: vec![
                        (ResourceKind::Compute, rng.gen_range(0.0..5.0), generation),
                        (
                            ResourceKind::Storage,
                            rng.gen_range(0.0..100.0),
                            generation - i as f64 * 1e-3,
                        ),
                    ],
                    size_bytes: 384,
                }
            })
            .collect();
        // Expected view: for each (node, resource) the entry with max state_ts.
        let mut expected: BTreeMap<(u32, ResourceKind), ViewEntry> = BTreeMap::new();
        for r in &reports {
            for &(res, value, ts) in &r.payload {
                let e = expected.entry((r.node_id, res)).or_insert(ViewEntry {
                    value,
                    state_ts_s: f64::NEG_INFINITY,
                });
                if ts > e.state_ts_s {
                    *e = ViewEntry {
                        value,
                        state_ts_s: ts,
                    };
                }
            }
        }
        for trial in 0..20 {
            let mut order: Vec<usize> = (0..reports.len()).collect();
            let mut rng = StdRng::seed_from_u64(trial);
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let mut view = ResourceView::default();
            for &i in &order {
                merge_report(&mut view, &reports[i], 2000.0 + i as f64);
            }
            for (&(node, res), want) in &expected {
                let got = view.value(node, res).unwrap();
                assert_eq!(got.value, want.value);
                assert_eq!(got.state_ts_s, want.state_ts_s);
            }
        }
    }

    #[test]
    fn staleness_of_fresh_view_is_zero() {
        let mut view = ResourceView::default();
        merge_report(&mut view, &report(0, 100.0, 1.0), 100.0);
        merge_report(&mut view, &report(1, 100.0, 1.0), 100.0);
        let (_, mean) = view_staleness(&view, &[0, 1], 100.0, 0.0);
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn staleness_averages_over_nodes() {
        let mut view = ResourceView::default();
        merge_report(&mut view, &report(0, 52.0, 1.0), 52.0);
        merge_report(&mut view, &report(1, 100.0, 1.0), 100.0);
        let (delays, mean) = view_staleness(&view, &[0, 1], 100.0, 0.0);
        assert_eq!(delays[0].1, 48.0);
        assert_eq!(mean, 24.0);
    }

    #[test]
    fn unreported_node_counts_from_scenario_start() {
        let view = ResourceView::default();
        let (delays, mean) = view_staleness(&view, &[7], 500.0, 0.0);
        assert_eq!(delays[0].1, 500.0);
        assert_eq!(mean, 500.0);
    }

    fn geo_provider() -> WindowProvider {
        let shells = [OrbitShellSpec {
            regime: Regime::Geo,
            altitude_km: GEO_ALTITUDE_KM,
            inclination_deg: 0.0,
            plane_count: 1,
            sats_per_plane: 1,
            phasing_offset_deg: 0.0,
            epoch_s: 0.0,
        }];
        let sats = generate_constellation(&shells).unwrap();
        // Station at the sub-satellite point: the satellite stays at zenith.
        let stations = vec![GroundStationSpec {
            id: 0,
            latitude_deg: 0.0,
            longitude_deg: 0.0,
            min_elevation_deg: 10.0,
        }];
        let plan = contact_plan(
            &sats,
            &stations,
            7200.0,
            10.0,
            &CapacityConfig::default(),
            CrossRegimeWindows::Eager,
        );
        WindowProvider::new(plan, sats, stations)
    }

    /// Oracle: size/rate + distance/c arithmetic.
    #[test]
    fn geo_downlink_delivery_matches_arithmetic() {
        let mut provider = geo_provider();
        let domains = DomainAssignment::from_domains(&[AwarenessDomain {
            anchor_id: 0,
            members: vec![0],
        }]);
        let route = plan_report_route(
            0,
            100.0,
            AwarenessMode::Yuheng,
            &mut provider,
            &domains,
            1000,
        )
        .unwrap();
        let transmit = 8000.0 / 1e9;
        let slant = GEO_ALTITUDE_KM / SPEED_OF_LIGHT_KM_S;
        let expected = 100.0 + transmit + slant;
        assert!(
            (route.delivery_s - expected).abs() < 1e-6,
            "got {} want {}",
            route.delivery_s,
            expected
        );
        assert_eq!(route.hops.len(), 1);
    }

    fn synthetic_provider() -> (WindowProvider, DomainAssignment) {
        // Sat 0: LEO node. Sat 1: MEO anchor. One station.
        let shells = [
            OrbitShellSpec {
                regime: Regime::Leo,
                altitude_km: 550.0,
                inclination_deg: 53.0,
                plane_count: 1,
                sats_per_plane: 1,
                phasing_offset_deg: 0.0,
                epoch_s: 0.0,
            },
            OrbitShellSpec {
                regime: Regime::Meo,
                altitude_km: 10_000.0,
                inclination_deg: 45.0,
                plane_count: 1,
                sats_per_plane: 1,
                phasing_offset_deg: 0.0,
                epoch_s: 0.0,
            },
        ];
        let sats = generate_constellation(&shells).unwrap();
        let stations = vec![GroundStationSpec {
            id: 0,
            latitude_deg: 0.0,
            longitude_deg: 0.0,
            min_elevation_deg: 10.0,
        }];
        let windows = vec![
            // Baseline path: the node's ground window opens at t = 300.
            ContactWindow {
                endpoint_a: NodeRef::Sat(0),
                endpoint_b: NodeRef::Ground(0),
                start_s: 300.0,
                end_s: 600.0,
                class: LinkClass::Ground,
                capacity_bps: 1e9,
            },
            // Relay path: node-anchor and anchor-ground are open from t = 0.
            ContactWindow {
                endpoint_a: NodeRef::Sat(0),
                endpoint_b: NodeRef::Sat(1),
                start_s: 0.0,
                end_s: 3600.0,
                class: LinkClass::MicrowaveIsl,
                capacity_bps: 100e3,
            },
            ContactWindow {
                endpoint_a: NodeRef::Sat(1),
                endpoint_b: NodeRef::Ground(0),
                start_s: 0.0,
                end_s: 3600.0,
                class: LinkClass::Ground,
                capacity_bps: 1e9,
            },
        ];
        let plan = index_plan(
            windows,
            3600.0,
            10.0,
            CapacityConfig::default(),
            CrossRegimeWindows::Eager,
        );
        let provider = WindowProvider::new(plan, sats, stations);
        let domains = DomainAssignment::from_domains(&[AwarenessDomain {
            anchor_id: 1,
            members: vec![0, 1],
        }]);
        (provider, domains)
    }

    #[test]
    fn baseline_defers_to_next_ground_window() {
        let (mut provider, domains) = synthetic_provider();
        let route = plan_report_route(
            0,
            0.0,
            AwarenessMode::Baseline,
            &mut provider,
            &domains,
            448,
        )
        .unwrap();
        assert!(route.delivery_s >= 300.0);
    }

    /// Both route computations on the same constructed scenario: the relay
    /// must beat the deferred direct downlink.
    #[test]
    fn relay_beats_deferred_baseline() {
        let (mut provider, domains) = synthetic_provider();
        let relay = plan_report_route(
            0,
            0.0,
            AwarenessMode::Yuheng,
            &mut provider,
            &domains,
            448,
        )
        .unwrap();
        let baseline = plan_report_route(
            0,
            0.0,
            AwarenessMode::Baseline,
            &mut provider,
            &domains,
            448,
        )
        .unwrap();
        assert_eq!(relay.hops.len(), 2);
        assert!(relay.delivery_s < baseline.delivery_s);
    }

    #[test]
    fn unreachable_node_has_no_route() {
        let (mut provider, domains) = synthetic_provider();
        // After the last ground window closes, the baseline cannot deliver.
        let result = plan_report_route(
            0,
            700.0,
            AwarenessMode::Baseline,
            &mut provider,
            &domains,
            448,
        );
        assert_eq!(result, Err(RouteFailure::NoRoute));
    }
}
