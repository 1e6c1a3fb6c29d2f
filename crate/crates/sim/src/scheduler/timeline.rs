//! Per-resource reservation ledgers and the availability queries behind
//! placement.
//!
//! The timeline holds reservations the control center has committed but not
//! yet dispatched. Node-resource reservations leave the ledger when their
//! stage starts executing: from that point the only evidence of the
//! consumption is the node's own reporting, which is exactly the staleness
//! the experiment measures. Link reservations stay until the transfer
//! terminates because the control center owns the contact plan outright.

use std::collections::{BTreeMap, BTreeSet};

use crate::cluster::ResourceKind;
use crate::orbital::{canonical_pair, NodeRef};

/// One reservable dimension: a node resource or a directed-pair link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResourceDim {
    Node { node: u32, kind: ResourceKind },
    Link { a: NodeRef, b: NodeRef },
}

impl ResourceDim {
    pub fn node(node: u32, kind: ResourceKind) -> Self {
        ResourceDim::Node { node, kind }
    }

    pub fn link(x: NodeRef, y: NodeRef) -> Self {
        let (a, b) = canonical_pair(x, y);
        ResourceDim::Link { a, b }
    }

    pub fn is_node(&self) -> bool {
        matches!(self, ResourceDim::Node { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reservation {
    pub task_id: u32,
    pub stage_index: u32,
    pub priority: u8,
    pub start_s: f64,
    pub end_s: f64,
    pub amount: f64,
}

impl Reservation {
    fn overlaps(&self, a: f64, b: f64) -> bool {
        self.start_s < b && a < self.end_s
    }
}

/// Reservation ledger across all dimensions.
#[derive(Debug, Clone, Default)]
pub struct Timeline {
    dims: BTreeMap<ResourceDim, Vec<Reservation>>,
    node_load: BTreeMap<u32, i64>,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dim: ResourceDim, r: Reservation) {
        if let ResourceDim::Node { node, .. } = dim {
            *self.node_load.entry(node).or_default() += 1;
        }
        let list = self.dims.entry(dim).or_default();
        let pos = list
            .binary_search_by(|x| {
                x.start_s
                    .total_cmp(&r.start_s)
                    .then(x.task_id.cmp(&r.task_id))
                    .then(x.stage_index.cmp(&r.stage_index))
            })
            .unwrap_or_else(|p| p);
        list.insert(pos, r);
    }

    /// Removes every reservation of a stage on dimensions matching `keep`.
    pub fn remove_stage_where(
        &mut self,
        task_id: u32,
        stage_index: u32,
        mut filter: impl FnMut(&ResourceDim) -> bool,
    ) {
        for (dim, list) in self.dims.iter_mut() {
            if !filter(dim) {
                continue;
            }
            let before = list.len();
            list.retain(|r| !(r.task_id == task_id && r.stage_index == stage_index));
            if let ResourceDim::Node { node, .. } = dim {
                let removed = (before - list.len()) as i64;
                if removed > 0 {
                    *self.node_load.get_mut(node).unwrap() -= removed;
                }
            }
        }
    }

    pub fn remove_stage(&mut self, task_id: u32, stage_index: u32) {
        self.remove_stage_where(task_id, stage_index, |_| true);
    }

    pub fn remove_task(&mut self, task_id: u32) {
        for (dim, list) in self.dims.iter_mut() {
            let before = list.len();
            list.retain(|r| r.task_id != task_id);
            if let ResourceDim::Node { node, .. } = dim {
                let removed = (before - list.len()) as i64;
                if removed > 0 {
                    *self.node_load.get_mut(node).unwrap() -= removed;
                }
            }
        }
    }

    pub fn reservations(&self, dim: &ResourceDim) -> &[Reservation] {
        self.dims.get(dim).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ResourceDim, &Reservation)> {
        self.dims
            .iter()
            .flat_map(|(dim, list)| list.iter().map(move |r| (dim, r)))
    }

    /// Number of node-dimension reservations on a node (placement tie-break).
    pub fn node_load(&self, node: u32) -> i64 {
        self.node_load.get(&node).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.dims.values().all(|v| v.is_empty())
    }
}

/// Victim exclusion set used when evaluating preemption candidates.
pub type Excluded = BTreeSet<(u32, u32)>;

/// Read view over the committed ledger plus an in-progress overlay, with an
/// optional exclusion set.
pub struct StackedLedger<'a> {
    pub base: &'a Timeline,
    pub overlay: &'a Timeline,
    pub excluded: &'a Excluded,
}

impl<'a> StackedLedger<'a> {
    fn for_each_overlapping(
        &self,
        dim: &ResourceDim,
        a: f64,
        b: f64,
        mut f: impl FnMut(&Reservation),
    ) {
        for source in [self.base, self.overlay] {
            for r in source.reservations(dim) {
                if r.start_s >= b {
                    break;
                }
                if r.overlaps(a, b) && !self.excluded.contains(&(r.task_id, r.stage_index)) {
                    f(r);
                }
            }
        }
    }

    /// Free amount at one instant, given the capacity the planner believes.
    pub fn free_at(&self, dim: &ResourceDim, believed_capacity: f64, t: f64) -> f64 {
        let mut used = 0.0;
        for source in [self.base, self.overlay] {
            for r in source.reservations(dim) {
                if r.start_s > t {
                    break;
                }
                if t < r.end_s && !self.excluded.contains(&(r.task_id, r.stage_index)) {
                    used += r.amount;
                }
            }
        }
        believed_capacity - used
    }

    /// Minimum free amount over [a, b).
    pub fn min_free_over(&self, dim: &ResourceDim, believed_capacity: f64, a: f64, b: f64) -> f64 {
        let mut boundaries = vec![a];
        self.for_each_overlapping(dim, a, b, |r| {
            if r.start_s > a && r.start_s < b {
                boundaries.push(r.start_s);
            }
        });
        boundaries.sort_by(|x, y| x.total_cmp(y));
        boundaries.dedup();
        let mut min_free = f64::INFINITY;
        for &t in &boundaries {
            min_free = min_free.min(self.free_at(dim, believed_capacity, t));
        }
        min_free
    }

    /// Candidate start times on a node after `t`: release points of its
    /// reservations across the given dimensions.
    pub fn release_points(&self, dims: &[ResourceDim], t: f64, deadline: f64) -> Vec<f64> {
        let mut points = Vec::new();
        for dim in dims {
            for source in [self.base, self.overlay] {
                for r in source.reservations(dim) {
                    if r.end_s > t
                        && r.end_s < deadline
                        && !self.excluded.contains(&(r.task_id, r.stage_index))
                    {
                        points.push(r.end_s);
                    }
                }
            }
        }
        points.sort_by(|x, y| x.total_cmp(y));
        points.dedup();
        points
    }

    pub fn node_load(&self, node: u32) -> i64 {
        self.base.node_load(node) + self.overlay.node_load(node)
    }

    /// Contention load: reservations overlapping `[a, b)` on the given
    /// dimensions (the resources a candidate placement would occupy).
    pub fn contention(&self, dims: &[ResourceDim], a: f64, b: f64) -> i64 {
        let mut count = 0;
        for dim in dims {
            self.for_each_overlapping(dim, a, b, |_| count += 1);
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(task: u32, start: f64, end: f64, amount: f64) -> Reservation {
        Reservation {
            task_id: task,
            stage_index: 0,
            priority: 2,
            start_s: start,
            end_s: end,
            amount,
        }
    }

    #[test]
    fn free_profile_reflects_overlaps() {
        let mut tl = Timeline::new();
        let dim = ResourceDim::node(0, ResourceKind::Compute);
        tl.insert(dim, res(1, 10.0, 20.0, 2.0));
        tl.insert(dim, res(2, 15.0, 30.0, 1.5));
        let overlay = Timeline::new();
        let excluded = Excluded::new();
        let ledger = StackedLedger {
            base: &tl,
            overlay: &overlay,
            excluded: &excluded,
        };
        assert_eq!(ledger.free_at(&dim, 5.0, 5.0), 5.0);
        assert_eq!(ledger.free_at(&dim, 5.0, 12.0), 3.0);
        assert_eq!(ledger.free_at(&dim, 5.0, 17.0), 1.5);
        assert_eq!(ledger.free_at(&dim, 5.0, 25.0), 3.5);
        assert_eq!(ledger.min_free_over(&dim, 5.0, 0.0, 40.0), 1.5);
        assert_eq!(ledger.min_free_over(&dim, 5.0, 21.0, 40.0), 3.5);
    }

    #[test]
    fn exclusions_hide_reservations() {
        let mut tl = Timeline::new();
        let dim = ResourceDim::node(3, ResourceKind::SensorSlots);
        tl.insert(dim, res(9, 0.0, 100.0, 1.0));
        let overlay = Timeline::new();
        let mut excluded = Excluded::new();
        excluded.insert((9, 0));
        let ledger = StackedLedger {
            base: &tl,
            overlay: &overlay,
            excluded: &excluded,
        };
        assert_eq!(ledger.free_at(&dim, 1.0, 50.0), 1.0);
    }

    #[test]
    fn removal_updates_load() {
        let mut tl = Timeline::new();
        tl.insert(ResourceDim::node(1, ResourceKind::Compute), res(5, 0.0, 10.0, 1.0));
        tl.insert(ResourceDim::node(1, ResourceKind::Storage), res(5, 0.0, 10.0, 2.0));
        assert_eq!(tl.node_load(1), 2);
        tl.remove_stage_where(5, 0, |d| d.is_node());
        assert_eq!(tl.node_load(1), 0);
        assert!(tl.is_empty());
    }

    #[test]
    fn release_points_come_sorted_and_deduped() {
        let mut tl = Timeline::new();
        let dim = ResourceDim::node(0, ResourceKind::Compute);
        tl.insert(dim, res(1, 0.0, 30.0, 1.0));
        tl.insert(dim, res(2, 5.0, 20.0, 1.0));
        tl.insert(dim, res(3, 6.0, 20.0, 1.0));
        let overlay = Timeline::new();
        let excluded = Excluded::new();
        let ledger = StackedLedger {
            base: &tl,
            overlay: &overlay,
            excluded: &excluded,
        };
        assert_eq!(ledger.release_points(&[dim], 0.0, 100.0), vec![20.0, 30.0]);
    }
}
