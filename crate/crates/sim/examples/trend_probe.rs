use cnsc_sim::awareness::AwarenessMode;
use cnsc_sim::config::fig5_desk;
use cnsc_sim::engine::run;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let size: u32 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(60);
    let tasks: u32 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100);
    let sweep = fig5_desk();
    for mode in [AwarenessMode::Yuheng, AwarenessMode::Baseline] {
        let cfg = sweep.cell(size, tasks, mode, 1);
        let t0 = Instant::now();
        let out = run(&cfg).expect("runs");
        let m = &out.metrics;
        println!(
            "size={size} tasks={tasks} mode={mode}: wcr={:.3} delay={:.1}s afr={:.3} completed={} failed={:?} [sent={} dropped={}] wall={:.1}s",
            m.weighted_completion_ratio,
            m.mean_awareness_delay_s,
            m.awareness_failure_ratio,
            m.completed,
            m.failed_by_reason,
            out.trace.counters.sent,
            out.trace.counters.dropped,
            t0.elapsed().as_secs_f64()
        );
    }
}
