//! Append-only run record: event log, per-task lifecycle, awareness log and
//! staleness samples. Metrics are recomputed from here exactly.

use serde::{Deserialize, Serialize};

use crate::awareness::AwarenessMode;
use crate::scheduler::FailureReason;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// Every event and awareness row retained (desk-scale runs).
    Full,
    /// Only task records, staleness samples and counters (large runs).
    Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub t_s: f64,
    pub kind: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskOutcome {
    Completed,
    Failed(FailureReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task_id: u32,
    pub task_type: String,
    pub priority: u8,
    pub arrival_s: f64,
    pub deadline_s: f64,
    pub outcome: TaskOutcome,
    /// Completion instant for completed tasks.
    pub finished_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AwarenessRecord {
    pub t_send_s: f64,
    pub node_id: u32,
    pub mode: AwarenessMode,
    /// Pipe-separated hop list, e.g. `S3|S120|G0`.
    pub route_hops: String,
    /// Negative when the report was dropped.
    pub t_deliver_s: f64,
    pub dropped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StalenessSample {
    pub t_s: f64,
    pub delay_sum_s: f64,
    pub node_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AwarenessCounters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Per-node-resource conservation totals at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservationTotals {
    pub consumed: f64,
    pub released: f64,
    pub held_terminal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRow {
    pub task_id: u32,
    pub stage_id: u32,
    /// Node id, or `A>B` endpoints for transfer entries.
    pub node: String,
    pub resource: String,
    pub amount: f64,
    pub start_s: f64,
    pub end_s: f64,
    pub status: &'static str,
    pub fail_reason: String,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub level: TraceLevel,
    pub events: Vec<TraceEvent>,
    pub task_records: Vec<TaskRecord>,
    pub awareness_log: Vec<AwarenessRecord>,
    pub staleness: Vec<StalenessSample>,
    pub counters: AwarenessCounters,
    pub plan_log: Vec<PlanRow>,
    pub conservation: ConservationTotals,
    pub horizon_s: f64,
}

impl Trace {
    pub fn new(level: TraceLevel, horizon_s: f64) -> Self {
        Self {
            level,
            events: Vec::new(),
            task_records: Vec::new(),
            awareness_log: Vec::new(),
            staleness: Vec::new(),
            counters: AwarenessCounters::default(),
            plan_log: Vec::new(),
            conservation: ConservationTotals::default(),
            horizon_s,
        }
    }

    pub fn log_event(&mut self, t_s: f64, kind: &'static str, detail: String) {
        if self.level == TraceLevel::Full {
            self.events.push(TraceEvent { t_s, kind, detail });
        }
    }

    pub fn export_events_csv(&self) -> String {
        let mut out = String::from("t_s,kind,detail\n");
        for e in &self.events {
            out.push_str(&format!("{},{},{}\n", e.t_s, e.kind, e.detail));
        }
        out
    }

    pub fn export_awareness_csv(&self) -> String {
        let mut out = String::from("t_send,node_id,mode,route_hops,t_deliver,dropped\n");
        for r in &self.awareness_log {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.t_send_s,
                r.node_id,
                r.mode,
                r.route_hops,
                if r.dropped { -1.0 } else { r.t_deliver_s },
                r.dropped as u8
            ));
        }
        out
    }

    pub fn export_plan_csv(&self) -> String {
        let mut out =
            String::from("task_id,stage_id,node_id,resource,amount,start_s,end_s,status,fail_reason\n");
        for r in &self.plan_log {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.task_id,
                r.stage_id,
                r.node,
                r.resource,
                r.amount,
                r.start_s,
                r.end_s,
                r.status,
                r.fail_reason
            ));
        }
        out
    }
}
