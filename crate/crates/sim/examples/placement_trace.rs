use cnsc_sim::awareness::AwarenessMode;
use cnsc_sim::config::fig5_desk;
use cnsc_sim::engine::run;

fn main() {
    let sweep = fig5_desk();
    let cfg = sweep.cell(600, 400, AwarenessMode::Baseline, 1);
    let out = run(&cfg).expect("runs");
    // Reconstruct: for each sensing placement row, was its start equal to
    // its planning instant? Requires planned_at — not in plan rows. Use
    // start vs nearest tick: p3 ticks at 60k, p2 180k, p1 600k.
    let mut future_starts = 0;
    let mut immediate = 0;
    for r in out.trace.plan_log.iter().filter(|r| r.status == "planned" && r.resource == "sensor_slots") {
        let s = r.start_s;
        let on_tick = (s / 60.0).fract().abs() < 1e-9;
        if on_tick { immediate += 1; } else { future_starts += 1; }
    }
    println!("sensing starts on a tick boundary: {immediate}, off-tick (future/emergency): {future_starts}");
    // How many sensing placements per planning batch (start time cluster)?
    let mut by_start = std::collections::BTreeMap::new();
    for r in out.trace.plan_log.iter().filter(|r| r.status == "planned" && r.resource == "sensor_slots") {
        *by_start.entry((r.start_s * 1000.0) as u64).or_insert(0u32) += 1;
    }
    let multi: Vec<_> = by_start.iter().filter(|(_, c)| **c > 1).take(10).collect();
    println!("start instants with >1 sensing: {:?}", multi);
    let dist: Vec<_> = by_start.values().copied().collect();
    println!("total distinct start instants: {} placements {}", dist.len(), dist.iter().sum::<u32>());
}
