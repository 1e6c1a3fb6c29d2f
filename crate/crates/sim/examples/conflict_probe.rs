use cnsc_sim::awareness::AwarenessMode;
use cnsc_sim::config::fig5_desk;
use cnsc_sim::engine::run;

fn main() {
    let sweep = fig5_desk();
    let cfg = sweep.cell(60, 400, AwarenessMode::Baseline, 1);
    let out = run(&cfg).expect("runs");
    let mut counts = std::collections::BTreeMap::new();
    for e in &out.trace.events {
        *counts.entry(e.kind).or_insert(0u32) += 1;
    }
    println!("event counts: {counts:?}");
    // How often was the same node's sensor targeted while busy?
    let starts: Vec<_> = out.trace.events.iter().filter(|e| e.kind == "stage_start" && e.detail.contains("stage=0")).collect();
    println!("sensing starts: {}", starts.len());
    for e in out.trace.events.iter().filter(|e| e.kind == "execution_failure").take(5) {
        println!("  {} {}", e.t_s, e.detail);
    }
    // Where do sensing stages land? Count per node from plan log.
    let mut per_node = std::collections::BTreeMap::new();
    for r in out.trace.plan_log.iter().filter(|r| r.stage_id == 0 && r.status == "planned" && r.resource == "sensor_slots") {
        *per_node.entry(r.node.clone()).or_insert(0u32) += 1;
    }
    println!("sensing placements per node: {per_node:?}");
}
