//! Event queue of the discrete-event core.
//!
//! Events are processed in (time, kind rank, sequence) order. The kind rank
//! releases resources before new demands claim them: window transitions
//! first, then report deliveries, stage completions, stage starts, planning
//! ticks and task arrivals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cluster::ResourceKind;

#[derive(Debug, Clone, PartialEq)]
pub enum EventPayload {
    WindowOpen { window: u32 },
    WindowClose { window: u32 },
    /// Delivery of a report bundle to the control center.
    ReportDeliver { bundle: u32 },
    StageComplete { task: u32, stage: u32, generation: u32 },
    StageStart { task: u32, stage: u32, generation: u32 },
    /// Periodic planning tick; `tiers` holds every priority tier due at
    /// this instant (coincident ticks arbitrate against one snapshot).
    PlanTick { tiers: Vec<u8> },
    TaskArrival { task: u32 },
    /// Reporting timer for one node-resource stream (the uniform-heartbeat
    /// plane runs one stream per node).
    ReportEmit { node: u32, resource: ResourceKind },
    /// Re-attempt of an interrupted emergency task after a short backoff.
    EmergencyRetry { task: u32 },
    /// An anchor ships its buffered reports downward.
    AnchorFlush { anchor: u32 },
    DomainRepartition,
    StalenessSample,
}

impl EventPayload {
    fn rank(&self) -> u8 {
        match self {
            EventPayload::WindowOpen { .. } => 0,
            EventPayload::WindowClose { .. } => 1,
            EventPayload::ReportDeliver { .. } => 2,
            EventPayload::StageComplete { .. } => 3,
            EventPayload::StageStart { .. } => 4,
            EventPayload::PlanTick { .. } => 5,
            EventPayload::TaskArrival { .. } => 6,
            EventPayload::ReportEmit { .. } => 7,
            EventPayload::EmergencyRetry { .. } => 8,
            EventPayload::AnchorFlush { .. } => 9,
            EventPayload::DomainRepartition => 10,
            EventPayload::StalenessSample => 11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimEvent {
    pub time_s: f64,
    pub seq: u64,
    pub payload: EventPayload,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we pop the minimum.
        other
            .time_s
            .total_cmp(&self.time_s)
            .then(other.payload.rank().cmp(&self.payload.rank()))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time_s: f64, payload: EventPayload) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent {
            time_s,
            seq,
            payload,
        });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_rank_seq_order() {
        let mut q = EventQueue::new();
        q.push(10.0, EventPayload::TaskArrival { task: 1 });
        q.push(10.0, EventPayload::WindowOpen { window: 0 });
        q.push(
            10.0,
            EventPayload::StageComplete {
                task: 0,
                stage: 0,
                generation: 0,
            },
        );
        q.push(5.0, EventPayload::StalenessSample);
        q.push(10.0, EventPayload::TaskArrival { task: 2 });

        assert_eq!(q.pop().unwrap().payload, EventPayload::StalenessSample);
        assert_eq!(
            q.pop().unwrap().payload,
            EventPayload::WindowOpen { window: 0 }
        );
        assert!(matches!(
            q.pop().unwrap().payload,
            EventPayload::StageComplete { .. }
        ));
        assert_eq!(q.pop().unwrap().payload, EventPayload::TaskArrival { task: 1 });
        assert_eq!(q.pop().unwrap().payload, EventPayload::TaskArrival { task: 2 });
        assert!(q.pop().is_none());
    }
}
