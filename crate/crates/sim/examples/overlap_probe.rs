use cnsc_sim::awareness::AwarenessMode;
use cnsc_sim::config::fig5_desk;
use cnsc_sim::engine::run;

fn main() {
    let sweep = fig5_desk();
    let cfg = sweep.cell(600, 400, AwarenessMode::Baseline, 1);
    let out = run(&cfg).expect("runs");
    // All sensing placements: (node, start, end, task)
    let mut sensings: Vec<(String, f64, f64, u32)> = out
        .trace
        .plan_log
        .iter()
        .filter(|r| r.status == "planned" && r.resource == "sensor_slots")
        .map(|r| (r.node.clone(), r.start_s, r.end_s, r.task_id))
        .collect();
    sensings.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    println!("total sensing placements: {}", sensings.len());
    let mut overlaps = 0;
    for w in sensings.windows(2) {
        if w[0].0 == w[1].0 && w[1].1 < w[0].2 {
            overlaps += 1;
            if overlaps <= 5 {
                println!("overlap on node {}: [{:.0},{:.0}) task {} vs [{:.0},{:.0}) task {}", w[0].0, w[0].1, w[0].2, w[0].3, w[1].1, w[1].2, w[1].3);
            }
        }
    }
    println!("same-node overlapping sensing pairs: {overlaps}");
    // Distribution of placements per node
    let mut per_node = std::collections::BTreeMap::new();
    for (n, _, _, _) in &sensings {
        *per_node.entry(n.clone()).or_insert(0u32) += 1;
    }
    let mut counts: Vec<_> = per_node.into_iter().collect();
    counts.sort_by_key(|(_, c)| std::cmp::Reverse(*c));
    println!("top sensing nodes: {:?}", &counts[..counts.len().min(10)]);
}
