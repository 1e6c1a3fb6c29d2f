use cnsc_sim::awareness::AwarenessMode;
use cnsc_sim::config::fig5_desk;
use cnsc_sim::engine::run;

fn main() {
    let sweep = fig5_desk();
    let cfg = sweep.cell(60, 400, AwarenessMode::Yuheng, 1);
    let out = run(&cfg).expect("runs");
    // Reconstruct final staleness per node from the awareness log.
    let horizon = out.trace.horizon_s;
    let mut last_gen = std::collections::BTreeMap::new();
    let mut delivered_per_node = std::collections::BTreeMap::new();
    for r in &out.trace.awareness_log {
        if !r.dropped && r.t_deliver_s <= horizon {
            let e = last_gen.entry(r.node_id).or_insert(0.0f64);
            *e = e.max(r.t_send_s);
            *delivered_per_node.entry(r.node_id).or_insert(0u32) += 1;
        }
    }
    let mut worst: Vec<(u32, f64)> = (0..60)
        .map(|n| (n, horizon - last_gen.get(&n).copied().unwrap_or(0.0)))
        .collect();
    worst.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("worst final staleness: {:?}", &worst[..10]);
    println!("deliveries for worst nodes: {:?}", worst[..5].iter().map(|(n, _)| (*n, delivered_per_node.get(n).copied().unwrap_or(0))).collect::<Vec<_>>());
    println!("mean delay metric: {:.1}", out.metrics.mean_awareness_delay_s);
}
