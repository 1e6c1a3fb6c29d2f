use cnsc_sim::awareness::AwarenessMode;
use cnsc_sim::config::fig5_desk;
use cnsc_sim::engine::run;
use std::collections::BTreeMap;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let sweep = fig5_desk();
    let seeds = [1u64, 2, 3];
    let task_counts = [100u32, 400];
    let mut agg: BTreeMap<(String, u32), (f64, f64, f64, u32)> = BTreeMap::new();
    for &size in &[60u32, 150, 300, 600] {
        for &tasks in &task_counts {
            for mode in [AwarenessMode::Yuheng, AwarenessMode::Baseline] {
                for &seed in &seeds {
                    let cfg = sweep.cell(size, tasks, mode, seed);
                    let out = run(&cfg).expect("runs");
                    let e = agg.entry((mode.to_string(), size)).or_insert((0.0, 0.0, 0.0, 0));
                    e.0 += out.metrics.weighted_completion_ratio;
                    e.1 += out.metrics.mean_awareness_delay_s;
                    e.2 += out.metrics.awareness_failure_ratio;
                    e.3 += 1;
                }
            }
        }
    }
    println!("mode,size,wcr,delay,afr  (means over {} runs/cell)", seeds.len() * task_counts.len());
    for ((mode, size), (w, d, a, n)) in &agg {
        println!(
            "{mode},{size}: wcr={:.3} delay={:.0} afr={:.3}",
            w / *n as f64,
            d / *n as f64,
            a / *n as f64
        );
    }
    println!("wall: {:.0}s", t0.elapsed().as_secs_f64());
}
