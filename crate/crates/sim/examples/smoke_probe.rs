use cnsc_sim::config::smoke_config;
use cnsc_sim::engine::run;

fn main() {
    let cfg = smoke_config();
    let out = run(&cfg).expect("smoke runs");
    println!("tasks: {:?}", out.trace.task_records);
    println!("metrics wcr={} delay={} afr={}", out.metrics.weighted_completion_ratio, out.metrics.mean_awareness_delay_s, out.metrics.awareness_failure_ratio);
    println!("counters: {:?}", out.trace.counters);
    println!("events: {}", out.trace.events.len());
    for e in out.trace.events.iter().take(60) {
        println!("  {:>9.3} {} {}", e.t_s, e.kind, e.detail);
    }
}
