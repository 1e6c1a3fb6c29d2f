//! Task specifications as stage DAGs, the demand knowledge base mapping
//! quality targets to per-stage resource consumption, and workload
//! generation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Sensing,
    Processing,
    Transmission,
    Fusion,
    Distribution,
}

impl StageKind {
    /// Transmission and distribution stages move data over links.
    pub fn is_transfer(self) -> bool {
        matches!(self, StageKind::Transmission | StageKind::Distribution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementAffinity {
    Any,
    /// Must run on a sensor-equipped node.
    RequiresSensor,
    /// Output must reach a ground station.
    RequiresGroundReachability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub stage_id: u32,
    pub kind: StageKind,
    pub input_volume_gb: f64,
    pub output_volume_gb: f64,
    /// GB of data to process (zero for transfer stages).
    pub compute_demand_gb: f64,
    /// GB of data to move (zero for compute stages).
    pub transfer_demand_gb: f64,
    /// Instrument time for sensing stages, zero otherwise.
    pub fixed_duration_s: f64,
    pub affinity: PlacementAffinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_id: u32,
    pub task_type: String,
    /// 1..=3 regular, 4 emergency.
    pub priority: u8,
    pub arrival_s: f64,
    pub deadline_s: f64,
    pub quality_target: f64,
    pub stages: Vec<StageSpec>,
    pub edges: Vec<(u32, u32)>,
}

impl TaskSpec {
    pub fn is_emergency(&self) -> bool {
        self.priority == 4
    }

    /// Topological order of stage indices; errors if the DAG has a cycle.
    pub fn topo_order(&self) -> Result<Vec<usize>, TaskError> {
        let n = self.stages.len();
        let mut indegree = vec![0usize; n];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            succ[a as usize].push(b as usize);
            indegree[b as usize] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        ready.sort_unstable();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &s in &succ[i] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(s);
                }
            }
            ready.sort_unstable();
        }
        if order.len() != n {
            return Err(TaskError::CyclicDag(self.task_id));
        }
        Ok(order)
    }

    pub fn predecessors(&self, stage: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, b)| b as usize == stage)
            .map(|&(a, _)| a as usize)
            .collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("task {0}: stage DAG has a cycle")]
    CyclicDag(u32),
    #[error("unknown task type {0:?}")]
    UnknownType(String),
    #[error("quality {0} outside [0, 1]")]
    QualityOutOfRange(f64),
}

/// One calibration point of a stage demand curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub quality: f64,
    pub factor: f64,
    pub performance_mean: f64,
    pub performance_spread: f64,
}

/// Demand scaling as a function of the quality target, one curve per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandCurve {
    pub points: Vec<CurvePoint>,
}

impl DemandCurve {
    pub fn factor_at(&self, quality: f64) -> f64 {
        let pts = &self.points;
        if quality <= pts[0].quality {
            return pts[0].factor;
        }
        if quality >= pts[pts.len() - 1].quality {
            return pts[pts.len() - 1].factor;
        }
        for w in pts.windows(2) {
            if quality <= w[1].quality {
                let f = (quality - w[0].quality) / (w[1].quality - w[0].quality);
                return w[0].factor + f * (w[1].factor - w[0].factor);
            }
        }
        pts[pts.len() - 1].factor
    }

    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[0].factor <= w[1].factor)
            && self
                .points
                .windows(2)
                .all(|w| w[0].quality < w[1].quality)
    }
}

/// Template of one pipeline stage at quality 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTemplate {
    pub kind: StageKind,
    pub input_gb: f64,
    pub output_gb: f64,
    pub compute_gb: f64,
    pub transfer_gb: f64,
    pub fixed_duration_s: f64,
    pub affinity: PlacementAffinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTypeEntry {
    pub stages: Vec<StageTemplate>,
    pub curves: Vec<DemandCurve>,
    pub samples: u64,
}

/// Empirical mapping from quality targets to per-stage resource consumption.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub entries: BTreeMap<String, TaskTypeEntry>,
    /// EWMA weight used by calibration.
    pub alpha: f64,
}

pub const FUSION_TASK_TYPE: &str = "fusion";

/// Pipeline volume parameters for the default fusion task type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionPipelineParams {
    /// Raw product captured by sensing, GB.
    pub raw_gb: f64,
    /// Compressed product leaving preprocessing, GB.
    pub preprocessed_gb: f64,
    /// Final distributed product, GB.
    pub product_gb: f64,
    /// Instrument time for the sensing stage, seconds.
    pub sensing_duration_s: f64,
}

impl Default for FusionPipelineParams {
    fn default() -> Self {
        Self {
            raw_gb: 5.0,
            preprocessed_gb: 0.5,
            product_gb: 0.02,
            sensing_duration_s: 300.0,
        }
    }
}

fn default_curve() -> DemandCurve {
    DemandCurve {
        points: [0.0, 0.5, 0.75, 1.0]
            .iter()
            .zip([0.25, 0.6, 0.8, 1.0])
            .map(|(&quality, factor)| CurvePoint {
                quality,
                factor,
                performance_mean: quality,
                performance_spread: 0.05,
            })
            .collect(),
    }
}

impl KnowledgeBase {
    /// Knowledge base holding the five-stage multi-source fusion pipeline:
    /// sensing, preprocessing, transmission, fusion, distribution.
    pub fn with_default_fusion(params: FusionPipelineParams) -> Self {
        let p = params;
        let stages = vec![
            StageTemplate {
                kind: StageKind::Sensing,
                input_gb: 0.0,
                output_gb: p.raw_gb,
                compute_gb: 0.0,
                transfer_gb: 0.0,
                fixed_duration_s: p.sensing_duration_s,
                affinity: PlacementAffinity::RequiresSensor,
            },
            StageTemplate {
                kind: StageKind::Processing,
                input_gb: p.raw_gb,
                output_gb: p.preprocessed_gb,
                compute_gb: p.raw_gb,
                transfer_gb: 0.0,
                fixed_duration_s: 0.0,
                affinity: PlacementAffinity::Any,
            },
            StageTemplate {
                kind: StageKind::Transmission,
                input_gb: p.preprocessed_gb,
                output_gb: p.preprocessed_gb,
                compute_gb: 0.0,
                transfer_gb: p.preprocessed_gb,
                fixed_duration_s: 0.0,
                affinity: PlacementAffinity::Any,
            },
            StageTemplate {
                kind: StageKind::Fusion,
                // Two source streams are fused, so the compute demand is
                // twice the preprocessed volume.
                input_gb: p.preprocessed_gb,
                output_gb: p.product_gb,
                compute_gb: 2.0 * p.preprocessed_gb,
                transfer_gb: 0.0,
                fixed_duration_s: 0.0,
                affinity: PlacementAffinity::Any,
            },
            StageTemplate {
                kind: StageKind::Distribution,
                input_gb: p.product_gb,
                output_gb: p.product_gb,
                compute_gb: 0.0,
                transfer_gb: p.product_gb,
                fixed_duration_s: 0.0,
                affinity: PlacementAffinity::RequiresGroundReachability,
            },
        ];
        let curves = vec![default_curve(); stages.len()];
        let mut entries = BTreeMap::new();
        entries.insert(
            FUSION_TASK_TYPE.to_string(),
            TaskTypeEntry {
                stages,
                curves,
                samples: 0,
            },
        );
        Self {
            entries,
            alpha: 0.2,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("knowledge base serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageDemands {
    pub input_gb: f64,
    pub output_gb: f64,
    pub compute_gb: f64,
    pub transfer_gb: f64,
    pub fixed_duration_s: f64,
}

/// Absolute per-stage demands at a quality target: the stage templates
/// scaled by the piecewise-linear curve factor.
pub fn query_demands(
    kb: &KnowledgeBase,
    task_type: &str,
    quality: f64,
) -> Result<Vec<StageDemands>, TaskError> {
    if !(0.0..=1.0).contains(&quality) {
        return Err(TaskError::QualityOutOfRange(quality));
    }
    let entry = kb
        .entries
        .get(task_type)
        .ok_or_else(|| TaskError::UnknownType(task_type.to_string()))?;
    Ok(entry
        .stages
        .iter()
        .zip(&entry.curves)
        .map(|(s, curve)| {
            let f = curve.factor_at(quality);
            StageDemands {
                input_gb: s.input_gb * f,
                output_gb: s.output_gb * f,
                compute_gb: s.compute_gb * f,
                transfer_gb: s.transfer_gb * f,
                fixed_duration_s: s.fixed_duration_s,
            }
        })
        .collect())
}

/// Builds the five-stage fusion chain DAG with demands scaled by quality.
pub fn build_fusion_task(
    task_id: u32,
    priority: u8,
    arrival_s: f64,
    deadline_s: f64,
    quality: f64,
    kb: &KnowledgeBase,
) -> Result<TaskSpec, TaskError> {
    let entry = kb
        .entries
        .get(FUSION_TASK_TYPE)
        .ok_or_else(|| TaskError::UnknownType(FUSION_TASK_TYPE.to_string()))?;
    let demands = query_demands(kb, FUSION_TASK_TYPE, quality)?;
    let stages: Vec<StageSpec> = entry
        .stages
        .iter()
        .zip(&demands)
        .enumerate()
        .map(|(i, (t, d))| StageSpec {
            stage_id: i as u32,
            kind: t.kind,
            input_volume_gb: d.input_gb,
            output_volume_gb: d.output_gb,
            compute_demand_gb: d.compute_gb,
            transfer_demand_gb: d.transfer_gb,
            fixed_duration_s: d.fixed_duration_s,
            affinity: t.affinity,
        })
        .collect();
    let edges = (0..stages.len() as u32 - 1).map(|i| (i, i + 1)).collect();
    Ok(TaskSpec {
        task_id,
        task_type: FUSION_TASK_TYPE.to_string(),
        priority,
        arrival_s,
        deadline_s,
        quality_target: quality,
        stages,
        edges,
    })
}

/// Runtime observation fed back into the knowledge base.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFeedback {
    pub task_type: String,
    pub stage_index: usize,
    pub achieved_quality: f64,
    /// Realized consumption relative to the stage template.
    pub realized_factor: f64,
}

/// Pool-adjacent-violators pass enforcing a non-decreasing factor sequence.
fn isotonic_non_decreasing(values: &mut [f64]) {
    let n = values.len();
    let mut level: Vec<f64> = Vec::with_capacity(n);
    let mut weight: Vec<f64> = Vec::with_capacity(n);
    for &v in values.iter() {
        level.push(v);
        weight.push(1.0);
        while level.len() > 1 && level[level.len() - 2] > level[level.len() - 1] {
            let (lv, lw) = (level.pop().unwrap(), weight.pop().unwrap());
            let k = level.len() - 1;
            let merged_w = weight[k] + lw;
            level[k] = (level[k] * weight[k] + lv * lw) / merged_w;
            weight[k] = merged_w;
        }
    }
    let mut out = Vec::with_capacity(n);
    for (lv, lw) in level.iter().zip(&weight) {
        for _ in 0..(*lw as usize) {
            out.push(*lv);
        }
    }
    values.copy_from_slice(&out);
}

/// Folds execution feedback into the curves: EWMA update of the nearest
/// quality point, then an isotonic pass to keep curves monotone.
pub fn calibrate(kb: &mut KnowledgeBase, feedback: &[StageFeedback]) {
    let alpha = kb.alpha;
    for fb in feedback {
        let Some(entry) = kb.entries.get_mut(&fb.task_type) else {
            continue;
        };
        let Some(curve) = entry.curves.get_mut(fb.stage_index) else {
            continue;
        };
        let nearest = curve
            .points
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.quality - fb.achieved_quality)
                    .abs()
                    .total_cmp(&(b.quality - fb.achieved_quality).abs())
            })
            .map(|(i, _)| i)
            .unwrap();
        let p = &mut curve.points[nearest];
        p.factor = (1.0 - alpha) * p.factor + alpha * fb.realized_factor;
        let mut factors: Vec<f64> = curve.points.iter().map(|p| p.factor).collect();
        isotonic_non_decreasing(&mut factors);
        for (p, f) in curve.points.iter_mut().zip(factors) {
            p.factor = f;
        }
        entry.samples += 1;
    }
}

/// Deterministic workload: arrivals uniform over the window, priorities
/// drawn from the mix, priority-4 tasks on the emergency deadline.
#[allow(clippy::too_many_arguments)]
pub fn generate_workload(
    count: u32,
    priority_mix: [f64; 4],
    arrival_window_s: f64,
    seed: u64,
    quality: f64,
    regular_deadline_s: f64,
    emergency_deadline_s: f64,
    kb: &KnowledgeBase,
) -> Result<Vec<TaskSpec>, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = priority_mix.iter().sum();
    let mut tasks = Vec::with_capacity(count as usize);
    for task_id in 0..count {
        let arrival = rng.gen_range(0.0..arrival_window_s.max(f64::MIN_POSITIVE));
        let draw: f64 = rng.gen_range(0.0..total);
        let mut acc = 0.0;
        let mut priority = 4u8;
        for (i, w) in priority_mix.iter().enumerate() {
            acc += w;
            if draw < acc {
                priority = i as u8 + 1;
                break;
            }
        }
        let deadline = arrival
            + if priority == 4 {
                emergency_deadline_s
            } else {
                regular_deadline_s
            };
        tasks.push(build_fusion_task(
            task_id, priority, arrival, deadline, quality, kb,
        )?);
    }
    Ok(tasks)
}

pub fn export_workload_csv(tasks: &[TaskSpec]) -> String {
    let mut out = String::from("task_id,type,priority,arrival_s,deadline_s,quality\n");
    for t in tasks {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.task_id, t.task_type, t.priority, t.arrival_s, t.deadline_s, t.quality_target
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::with_default_fusion(FusionPipelineParams::default())
    }

    #[test]
    fn fusion_chain_volumes_at_full_quality() {
        let task = build_fusion_task(0, 2, 0.0, 3600.0, 1.0, &kb()).unwrap();
        assert_eq!(task.stages.len(), 5);
        assert_eq!(task.edges.len(), 4);
        assert!((task.stages[0].output_volume_gb - 5.0).abs() < 1e-12);
        assert!((task.stages[1].input_volume_gb - 5.0).abs() < 1e-12);
        assert!((task.stages[2].transfer_demand_gb - 0.5).abs() < 1e-12);
        assert!((task.stages[3].output_volume_gb - 0.02).abs() < 1e-12);
        assert!((task.stages[4].transfer_demand_gb - 0.02).abs() < 1e-12);
    }

    #[test]
    fn transfer_stages_have_no_compute_and_vice_versa() {
        let task = build_fusion_task(0, 1, 0.0, 3600.0, 0.8, &kb()).unwrap();
        for s in &task.stages {
            if s.kind.is_transfer() {
                assert_eq!(s.compute_demand_gb, 0.0);
            } else {
                assert_eq!(s.transfer_demand_gb, 0.0);
            }
        }
    }

    #[test]
    fn lower_quality_never_demands_more() {
        let base = kb();
        let half = query_demands(&base, FUSION_TASK_TYPE, 0.5).unwrap();
        let full = query_demands(&base, FUSION_TASK_TYPE, 1.0).unwrap();
        for (h, f) in half.iter().zip(&full) {
            assert!(h.compute_gb <= f.compute_gb);
            assert!(h.transfer_gb <= f.transfer_gb);
            assert!(h.output_gb <= f.output_gb);
        }
    }

    #[test]
    fn volume_consistency_along_chain_edges() {
        let task = build_fusion_task(0, 3, 0.0, 3600.0, 0.7, &kb()).unwrap();
        for &(a, b) in &task.edges {
            assert!(
                (task.stages[a as usize].output_volume_gb
                    - task.stages[b as usize].input_volume_gb)
                    .abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn generated_dag_is_acyclic_and_cycle_is_detected() {
        let mut task = build_fusion_task(0, 2, 0.0, 3600.0, 1.0, &kb()).unwrap();
        assert_eq!(task.topo_order().unwrap(), vec![0, 1, 2, 3, 4]);
        task.edges.push((4, 0));
        assert_eq!(task.topo_order(), Err(TaskError::CyclicDag(0)));
    }

    #[test]
    fn query_is_exact_at_curve_points() {
        let base = kb();
        let entry = &base.entries[FUSION_TASK_TYPE];
        for pt in &entry.curves[1].points {
            let d = query_demands(&base, FUSION_TASK_TYPE, pt.quality).unwrap();
            assert!((d[1].compute_gb - 5.0 * pt.factor).abs() < 1e-12);
        }
    }

    #[test]
    fn query_interpolates_linearly_between_points() {
        let curve = DemandCurve {
            points: vec![
                CurvePoint {
                    quality: 0.2,
                    factor: 0.4,
                    performance_mean: 0.2,
                    performance_spread: 0.0,
                },
                CurvePoint {
                    quality: 0.6,
                    factor: 0.8,
                    performance_mean: 0.6,
                    performance_spread: 0.0,
                },
            ],
        };
        assert!((curve.factor_at(0.4) - 0.6).abs() < 1e-12);
    }

    /// Oracle: an independently written interpolation.
    #[test]
    fn random_queries_match_reference_interpolation() {
        use rand::SeedableRng;
        let base = kb();
        let entry = &base.entries[FUSION_TASK_TYPE];
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let q: f64 = rng.gen_range(0.0..=1.0);
            let got = query_demands(&base, FUSION_TASK_TYPE, q).unwrap();
            for (stage, (tmpl, curve)) in entry.stages.iter().zip(&entry.curves).enumerate() {
                // Reference: scan for the bracketing points and lerp.
                let pts = &curve.points;
                let f = if q <= pts[0].quality {
                    pts[0].factor
                } else {
                    let mut f = pts[pts.len() - 1].factor;
                    for w in pts.windows(2) {
                        if q > w[0].quality && q <= w[1].quality {
                            let alpha = (q - w[0].quality) / (w[1].quality - w[0].quality);
                            f = w[0].factor * (1.0 - alpha) + w[1].factor * alpha;
                            break;
                        }
                    }
                    f
                };
                assert!((got[stage].compute_gb - tmpl.compute_gb * f).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn query_rejects_bad_inputs() {
        let base = kb();
        assert!(matches!(
            query_demands(&base, "unknown", 0.5),
            Err(TaskError::UnknownType(_))
        ));
        assert!(matches!(
            query_demands(&base, FUSION_TASK_TYPE, 1.5),
            Err(TaskError::QualityOutOfRange(_))
        ));
    }

    #[test]
    fn calibrate_is_fixed_point_on_matching_feedback() {
        let mut base = kb();
        let before = base.entries[FUSION_TASK_TYPE].curves[1].clone();
        let fb: Vec<StageFeedback> = before
            .points
            .iter()
            .map(|p| StageFeedback {
                task_type: FUSION_TASK_TYPE.into(),
                stage_index: 1,
                achieved_quality: p.quality,
                realized_factor: p.factor,
            })
            .collect();
        calibrate(&mut base, &fb);
        let after = &base.entries[FUSION_TASK_TYPE].curves[1];
        for (a, b) in before.points.iter().zip(&after.points) {
            assert!((a.factor - b.factor).abs() < 1e-12);
        }
        assert_eq!(base.entries[FUSION_TASK_TYPE].samples, fb.len() as u64);
    }

    #[test]
    fn ewma_moves_point_by_expected_fraction() {
        let mut base = kb();
        let before = base.entries[FUSION_TASK_TYPE].curves[3].points[3].factor;
        calibrate(
            &mut base,
            &[StageFeedback {
                task_type: FUSION_TASK_TYPE.into(),
                stage_index: 3,
                achieved_quality: 1.0,
                realized_factor: before * 1.2,
            }],
        );
        let after = base.entries[FUSION_TASK_TYPE].curves[3].points[3].factor;
        assert!((after - before * 1.04).abs() < 1e-12);
    }

    /// Oracle: brute-force isotonic regression via repeated averaging of
    /// violating prefixes.
    #[test]
    fn adversarial_feedback_keeps_curves_monotone() {
        use rand::SeedableRng;
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        let mut base = kb();
        for _ in 0..500 {
            let fb = StageFeedback {
                task_type: FUSION_TASK_TYPE.into(),
                stage_index: rng.gen_range(0..5),
                achieved_quality: rng.gen_range(0.0..=1.0),
                realized_factor: rng.gen_range(0.0..3.0),
            };
            calibrate(&mut base, &[fb]);
            for curve in &base.entries[FUSION_TASK_TYPE].curves {
                assert!(curve.is_monotone());
            }
        }
    }

    #[test]
    fn pava_matches_reference_on_random_sequences() {
        use rand::SeedableRng;
        fn reference(vals: &[f64]) -> Vec<f64> {
            // O(n^2) reference: repeatedly merge adjacent violating blocks.
            let mut blocks: Vec<(f64, f64)> = vals.iter().map(|&v| (v, 1.0)).collect();
            loop {
                let mut merged = false;
                let mut i = 0;
                while i + 1 < blocks.len() {
                    if blocks[i].0 > blocks[i + 1].0 {
                        let (v1, w1) = blocks[i];
                        let (v2, w2) = blocks.remove(i + 1);
                        blocks[i] = ((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2);
                        merged = true;
                        if i > 0 {
                            i -= 1;
                        }
                    } else {
                        i += 1;
                    }
                }
                if !merged {
                    break;
                }
            }
            let mut out = Vec::new();
            for (v, w) in blocks {
                for _ in 0..w as usize {
                    out.push(v);
                }
            }
            out
        }
        let mut rng = rand::rngs::StdRng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.gen_range(1..10);
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let mut got = vals.clone();
            isotonic_non_decreasing(&mut got);
            let expected = reference(&vals);
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-9, "{vals:?}: {got:?} vs {expected:?}");
            }
        }
    }

    #[test]
    fn workload_count_zero_is_empty() {
        let tasks = generate_workload(
            0,
            [0.25; 4],
            10800.0,
            1,
            1.0,
            3600.0,
            600.0,
            &kb(),
        )
        .unwrap();
        assert!(tasks.is_empty());
    }

    #[test]
    fn workload_priorities_follow_the_mix() {
        let tasks = generate_workload(
            4000,
            [0.25; 4],
            10800.0,
            42,
            1.0,
            3600.0,
            600.0,
            &kb(),
        )
        .unwrap();
        let mut counts = [0u32; 4];
        for t in &tasks {
            counts[t.priority as usize - 1] += 1;
            assert!(t.arrival_s >= 0.0 && t.arrival_s < 10800.0);
            assert!(t.deadline_s > t.arrival_s);
            assert_eq!(t.is_emergency(), t.priority == 4);
        }
        // 3 sigma of a Binomial(4000, 0.25).
        let sigma = (4000.0_f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!(
                (c as f64 - 1000.0).abs() < 3.0 * sigma,
                "priority count {c} outside 3 sigma"
            );
        }
    }

    #[test]
    fn workload_is_deterministic_per_seed() {
        let mk = || {
            generate_workload(50, [0.3, 0.3, 0.3, 0.1], 3600.0, 9, 1.0, 3600.0, 600.0, &kb())
                .unwrap()
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn knowledge_base_round_trips_through_toml() {
        let base = kb();
        let text = base.to_toml();
        let parsed = KnowledgeBase::from_toml(&text).unwrap();
        assert_eq!(base, parsed);
    }
}
