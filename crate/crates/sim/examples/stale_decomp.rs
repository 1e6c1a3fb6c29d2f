use cnsc_sim::awareness::AwarenessMode;
use cnsc_sim::config::fig5_desk;
use cnsc_sim::engine::run;

fn main() {
    for size in [60u32, 150] {
        let sweep = fig5_desk();
        let cfg = sweep.cell(size, 400, AwarenessMode::Yuheng, 1);
        let out = run(&cfg).expect("runs");
        let horizon = out.trace.horizon_s;
        let n = size as usize;
        // deliveries per node sorted by generation time
        let mut gens: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n]; // (deliver, gen)
        for r in &out.trace.awareness_log {
            if !r.dropped {
                gens[r.node_id as usize].push((r.t_deliver_s, r.t_send_s));
            }
        }
        // replay: staleness sampled every 10s
        let mut avg: Vec<(u32, f64)> = Vec::new();
        for (i, list) in gens.iter_mut().enumerate() {
            list.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut best_gen: f64 = 0.0;
            let mut idx = 0;
            let mut sum = 0.0;
            let mut count = 0;
            let mut t = 10.0;
            while t < horizon {
                while idx < list.len() && list[idx].0 <= t {
                    best_gen = best_gen.max(list[idx].1);
                    idx += 1;
                }
                sum += t - best_gen;
                count += 1;
                t += 10.0;
            }
            avg.push((i as u32, sum / count as f64));
        }
        let total: f64 = avg.iter().map(|(_, v)| v).sum::<f64>() / n as f64;
        avg.sort_by(|a, b| b.1.total_cmp(&a.1));
        println!("size {size}: replay mean {total:.1} vs metric {:.1}; worst nodes {:?}", out.metrics.mean_awareness_delay_s, &avg[..8]);
    }
}
