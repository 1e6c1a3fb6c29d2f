//! The three evaluation metrics computed from run traces, plus CSV export.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::awareness::AwarenessMode;
use crate::engine::trace::{TaskOutcome, TaskRecord, Trace};
use crate::scheduler::FailureReason;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("task {0} is not terminal")]
    NonTerminalTask(u32),
    #[error("trace has no staleness samples")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub weighted_completion_ratio: f64,
    pub mean_awareness_delay_s: f64,
    pub awareness_failure_ratio: f64,
    /// Completed / total per priority 1..=4.
    pub per_priority_completed: [u32; 4],
    pub per_priority_total: [u32; 4],
    pub placed: u32,
    pub completed: u32,
    pub failed: u32,
    pub failed_by_reason: BTreeMap<FailureReason, u32>,
}

/// Priority-weighted completed share; the empty workload counts as 1.0.
pub fn weighted_completion_ratio(records: &[TaskRecord]) -> Result<f64, MetricsError> {
    let mut total = 0u64;
    let mut done = 0u64;
    for r in records {
        match r.outcome {
            TaskOutcome::Completed => done += r.priority as u64,
            TaskOutcome::Failed(_) => {}
        }
        total += r.priority as u64;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(done as f64 / total as f64)
}

/// Mean staleness over every (sample instant, node) pair in the trace.
pub fn mean_awareness_delay(trace: &Trace) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut count = 0u64;
    for s in &trace.staleness {
        sum += s.delay_sum_s;
        count += s.node_count as u64;
    }
    if count == 0 {
        return Err(MetricsError::NoSamples);
    }
    Ok(sum / count as f64)
}

/// Share of failed tasks whose failure is attributed to a stale view;
/// zero when nothing failed.
pub fn awareness_failure_ratio(records: &[TaskRecord]) -> f64 {
    let mut failed = 0u64;
    let mut stale = 0u64;
    for r in records {
        if let TaskOutcome::Failed(reason) = r.outcome {
            failed += 1;
            if reason == FailureReason::StaleViewConflict {
                stale += 1;
            }
        }
    }
    if failed == 0 {
        0.0
    } else {
        stale as f64 / failed as f64
    }
}

pub fn build_report(trace: &Trace) -> Result<MetricsReport, MetricsError> {
    let records = &trace.task_records;
    let mut per_total = [0u32; 4];
    let mut per_done = [0u32; 4];
    let mut failed_by_reason: BTreeMap<FailureReason, u32> = BTreeMap::new();
    let mut completed = 0;
    let mut failed = 0;
    for r in records {
        let p = (r.priority as usize).saturating_sub(1).min(3);
        per_total[p] += 1;
        match r.outcome {
            TaskOutcome::Completed => {
                per_done[p] += 1;
                completed += 1;
            }
            TaskOutcome::Failed(reason) => {
                failed += 1;
                *failed_by_reason.entry(reason).or_default() += 1;
            }
        }
    }
    let mean_delay = if trace.staleness.is_empty() {
        0.0
    } else {
        mean_awareness_delay(trace)?
    };
    Ok(MetricsReport {
        weighted_completion_ratio: weighted_completion_ratio(records)?,
        mean_awareness_delay_s: mean_delay,
        awareness_failure_ratio: awareness_failure_ratio(records),
        per_priority_completed: per_done,
        per_priority_total: per_total,
        placed: completed + failed,
        completed,
        failed,
        failed_by_reason,
    })
}

/// One aggregated sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub network_size: u32,
    pub task_count: u32,
    pub mode: AwarenessMode,
    pub seed: u64,
    pub report: MetricsReport,
}

pub const METRICS_CSV_HEADER: &str =
    "network_size,task_count,mode,seed,wcr,mean_delay_s,afr,completed,failed_stale,failed_other";

pub fn metrics_csv_row(row: &SweepRow) -> String {
    let failed_stale = row
        .report
        .failed_by_reason
        .get(&FailureReason::StaleViewConflict)
        .copied()
        .unwrap_or(0);
    let failed_other = row.report.failed - failed_stale;
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        row.network_size,
        row.task_count,
        row.mode,
        row.seed,
        row.report.weighted_completion_ratio,
        row.report.mean_awareness_delay_s,
        row.report.awareness_failure_ratio,
        row.report.completed,
        failed_stale,
        failed_other
    )
}

/// Rows sorted by (mode, network size, task count, seed) for stable output.
pub fn export_metrics_csv(rows: &mut Vec<SweepRow>) -> String {
    rows.sort_by(|a, b| {
        a.mode
            .to_string()
            .cmp(&b.mode.to_string())
            .then(a.network_size.cmp(&b.network_size))
            .then(a.task_count.cmp(&b.task_count))
            .then(a.seed.cmp(&b.seed))
    });
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for row in rows.iter() {
        out.push_str(&metrics_csv_row(row));
        out.push('\n');
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Vec<(u32, u32, String, u64, f64, f64, f64)> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].to_string(),
                f[3].parse().unwrap(),
                f[4].parse().unwrap(),
                f[5].parse().unwrap(),
                f[6].parse().unwrap(),
            )
        })
        .collect()
}

/// Human-scan companion: per-mode means across a sweep.
pub fn summary_text(rows: &[SweepRow]) -> String {
    let mut by_mode: BTreeMap<String, (f64, f64, f64, u32)> = BTreeMap::new();
    for r in rows {
        let e = by_mode.entry(r.mode.to_string()).or_insert((0.0, 0.0, 0.0, 0));
        e.0 += r.report.weighted_completion_ratio;
        e.1 += r.report.mean_awareness_delay_s;
        e.2 += r.report.awareness_failure_ratio;
        e.3 += 1;
    }
    let mut out = String::from("mode means across scenarios\n");
    for (mode, (wcr, delay, afr, n)) in by_mode {
        let n_f = n as f64;
        out.push_str(&format!(
            "{mode}: scenarios={n} wcr={:.4} mean_delay_s={:.2} afr={:.4}\n",
            wcr / n_f,
            delay / n_f,
            afr / n_f
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::trace::{StalenessSample, TraceLevel};

    fn record(id: u32, priority: u8, outcome: TaskOutcome) -> TaskRecord {
        TaskRecord {
            task_id: id,
            task_type: "fusion".into(),
            priority,
            arrival_s: 0.0,
            deadline_s: 100.0,
            outcome,
            finished_s: None,
        }
    }

    #[test]
    fn all_completed_gives_one() {
        let records = vec![
            record(0, 1, TaskOutcome::Completed),
            record(1, 4, TaskOutcome::Completed),
        ];
        assert_eq!(weighted_completion_ratio(&records).unwrap(), 1.0);
    }

    #[test]
    fn empty_workload_is_one_by_convention() {
        assert_eq!(weighted_completion_ratio(&[]).unwrap(), 1.0);
    }

    #[test]
    fn only_the_emergency_completed_gives_point_four() {
        let records = vec![
            record(0, 1, TaskOutcome::Failed(FailureReason::NoWindow)),
            record(1, 2, TaskOutcome::Failed(FailureReason::NoWindow)),
            record(2, 3, TaskOutcome::Failed(FailureReason::NoWindow)),
            record(3, 4, TaskOutcome::Completed),
        ];
        assert!((weighted_completion_ratio(&records).unwrap() - 0.4).abs() < 1e-12);
    }

    /// Oracle: independent summation from raw records.
    #[test]
    fn ratio_matches_recomputation_on_random_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        for _ in 0..100 {
            let records: Vec<TaskRecord> = (0..rng.gen_range(1..50))
                .map(|i| {
                    let priority = rng.gen_range(1..=4);
                    let outcome = if rng.gen_bool(0.5) {
                        TaskOutcome::Completed
                    } else {
                        TaskOutcome::Failed(FailureReason::StaleViewConflict)
                    };
                    record(i, priority, outcome)
                })
                .collect();
            let expected: f64 = {
                let done: u64 = records
                    .iter()
                    .filter(|r| r.outcome == TaskOutcome::Completed)
                    .map(|r| r.priority as u64)
                    .sum();
                let total: u64 = records.iter().map(|r| r.priority as u64).sum();
                done as f64 / total as f64
            };
            assert_eq!(weighted_completion_ratio(&records).unwrap(), expected);
            let stale = records
                .iter()
                .filter(|r| {
                    matches!(
                        r.outcome,
                        TaskOutcome::Failed(FailureReason::StaleViewConflict)
                    )
                })
                .count();
            let failed = records
                .iter()
                .filter(|r| matches!(r.outcome, TaskOutcome::Failed(_)))
                .count();
            let expected_afr = if failed == 0 {
                0.0
            } else {
                stale as f64 / failed as f64
            };
            assert_eq!(awareness_failure_ratio(&records), expected_afr);
        }
    }

    fn trace_with_samples(samples: Vec<StalenessSample>) -> Trace {
        let mut t = Trace::new(TraceLevel::Full, 1000.0);
        t.staleness = samples;
        t
    }

    #[test]
    fn fresh_samples_give_zero_delay() {
        let trace = trace_with_samples(vec![StalenessSample {
            t_s: 10.0,
            delay_sum_s: 0.0,
            node_count: 5,
        }]);
        assert_eq!(mean_awareness_delay(&trace).unwrap(), 0.0);
    }

    #[test]
    fn two_samples_average() {
        let trace = trace_with_samples(vec![
            StalenessSample {
                t_s: 10.0,
                delay_sum_s: 10.0,
                node_count: 1,
            },
            StalenessSample {
                t_s: 20.0,
                delay_sum_s: 20.0,
                node_count: 1,
            },
        ]);
        assert_eq!(mean_awareness_delay(&trace).unwrap(), 15.0);
    }

    #[test]
    fn no_samples_is_an_error() {
        let trace = trace_with_samples(vec![]);
        assert_eq!(mean_awareness_delay(&trace), Err(MetricsError::NoSamples));
    }

    #[test]
    fn no_failures_gives_zero_afr() {
        assert_eq!(awareness_failure_ratio(&[record(0, 2, TaskOutcome::Completed)]), 0.0);
    }

    #[test]
    fn eighty_two_of_hundred_failed() {
        let mut records = Vec::new();
        for i in 0..82 {
            records.push(record(i, 1, TaskOutcome::Failed(FailureReason::StaleViewConflict)));
        }
        for i in 82..100 {
            records.push(record(i, 1, TaskOutcome::Failed(FailureReason::NoWindow)));
        }
        assert!((awareness_failure_ratio(&records) - 0.82).abs() < 1e-12);
    }

    fn dummy_report(wcr: f64) -> MetricsReport {
        MetricsReport {
            weighted_completion_ratio: wcr,
            mean_awareness_delay_s: 1.0,
            awareness_failure_ratio: 0.5,
            per_priority_completed: [0; 4],
            per_priority_total: [0; 4],
            placed: 0,
            completed: 0,
            failed: 0,
            failed_by_reason: BTreeMap::new(),
        }
    }

    #[test]
    fn export_sorts_and_round_trips() {
        let mut rows = vec![
            SweepRow {
                network_size: 300,
                task_count: 100,
                mode: AwarenessMode::Yuheng,
                seed: 2,
                report: dummy_report(0.75),
            },
            SweepRow {
                network_size: 60,
                task_count: 100,
                mode: AwarenessMode::Yuheng,
                seed: 1,
                report: dummy_report(0.5),
            },
            SweepRow {
                network_size: 60,
                task_count: 50,
                mode: AwarenessMode::Baseline,
                seed: 1,
                report: dummy_report(0.25),
            },
        ];
        let csv = export_metrics_csv(&mut rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], METRICS_CSV_HEADER);
        assert!(lines[1].starts_with("60,50,baseline,1,"));
        assert!(lines[2].starts_with("60,100,yuheng,1,"));
        assert!(lines[3].starts_with("300,100,yuheng,2,"));
        let parsed = parse_metrics_csv(&csv);
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[1].4, 0.5);
    }
}
