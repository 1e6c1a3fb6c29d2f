//! Scenario configuration: one human-readable TOML file per scenario with
//! every default explicit, plus sweep specifications and the shipped
//! presets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::awareness::{AwarenessMode, ReportSizing, ReportingPolicy, VolatilityThresholds};
use crate::cluster::DistributionPolicy;
use crate::engine::trace::TraceLevel;
use crate::orbital::{
    CapacityConfig, CrossRegimeWindows, GroundStationSpec, OrbitShellSpec, Regime, GEO_ALTITUDE_KM,
};
use crate::scheduler::SchedulerConfig;
use crate::task::FusionPipelineParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config validation failed:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeConfig {
    /// Total cluster processing throughput, GB/s, split across satellites.
    pub total_gbps: f64,
    pub policy: DistributionPolicy,
    pub storage_gb_per_node: f64,
    /// Fraction of satellites carrying a sensing payload (every k-th id).
    pub sensor_fraction: f64,
    pub sensor_slots: u32,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            total_gbps: 300.0,
            policy: DistributionPolicy::Uniform,
            storage_gb_per_node: 100.0,
            sensor_fraction: 0.1,
            sensor_slots: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub count: u32,
    /// Weights for priorities 1..=4.
    pub priority_mix: [f64; 4],
    pub arrival_window_s: f64,
    pub quality: f64,
    pub regular_deadline_s: f64,
    pub emergency_deadline_s: f64,
    pub pipeline: FusionPipelineParams,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            count: 100,
            priority_mix: [0.3, 0.3, 0.3, 0.1],
            arrival_window_s: 5400.0,
            quality: 1.0,
            regular_deadline_s: 5400.0,
            emergency_deadline_s: 900.0,
            pipeline: FusionPipelineParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwarenessConfig {
    pub policy: ReportingPolicy,
    pub thresholds: VolatilityThresholds,
    pub sizing: ReportSizing,
    /// Uniform node-status period of the heartbeat baseline.
    pub baseline_heartbeat_s: f64,
    pub repartition_interval_s: f64,
    /// Anchors ship buffered reports at this cadence.
    pub anchor_flush_interval_s: f64,
    /// Ground antenna dwell per telemetry contact; one contact at a time
    /// per station.
    pub station_contact_dwell_s: f64,
    /// Anchors relay over provisioned control feeds instead of contending
    /// for the shared telemetry antennas.
    pub anchor_dedicated_feed: bool,
    /// Let the heartbeat baseline relay over ISLs (sensitivity option).
    pub baseline_isl_relay: bool,
}

impl Default for AwarenessConfig {
    fn default() -> Self {
        Self {
            policy: ReportingPolicy::default(),
            thresholds: VolatilityThresholds::default(),
            sizing: ReportSizing::default(),
            baseline_heartbeat_s: 10.0,
            repartition_interval_s: 30.0,
            anchor_flush_interval_s: 5.0,
            station_contact_dwell_s: 30.0,
            anchor_dedicated_feed: true,
            baseline_isl_relay: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Random-walk step as a fraction of capacity per sample.
    pub amplitude: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            amplitude: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub staleness_sample_s: f64,
    pub contact_step_s: f64,
    pub cross_regime_windows: CrossRegimeWindows,
    pub trace_level: TraceLevel,
    pub noise: NoiseConfig,
    /// Consecutive missed expected reports before a node counts degraded.
    pub degraded_missed_reports: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            staleness_sample_s: 10.0,
            contact_step_s: 10.0,
            cross_regime_windows: CrossRegimeWindows::Eager,
            trace_level: TraceLevel::Full,
            noise: NoiseConfig::default(),
            degraded_missed_reports: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyRule {
    pub task_type: String,
    pub regime: Regime,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Mandatory; every stochastic choice derives from it.
    pub seed: u64,
    pub horizon_s: f64,
    pub mode: AwarenessMode,
    pub shells: Vec<OrbitShellSpec>,
    pub ground_stations: Vec<GroundStationSpec>,
    pub capacity: CapacityConfig,
    pub compute: ComputeConfig,
    pub workload: WorkloadConfig,
    pub awareness: AwarenessConfig,
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub efficiency: Vec<EfficiencyRule>,
    pub engine: EngineConfig,
}

/// Mid-latitude station set spread in longitude.
pub fn default_ground_stations() -> Vec<GroundStationSpec> {
    let sites = [
        (40.4, -104.7),
        (37.9, 22.9),
        (-23.7, 133.9),
        (19.6, -155.5),
        (46.8, 7.5),
        (-33.0, 18.5),
        (35.7, 139.4),
        (28.5, -80.6),
        (-35.4, 148.9),
    ];
    sites
        .iter()
        .enumerate()
        .map(|(i, &(latitude_deg, longitude_deg))| GroundStationSpec {
            id: i as u32,
            latitude_deg,
            longitude_deg,
            min_elevation_deg: 10.0,
        })
        .collect()
}

/// Starlink-like LEO shell at 550 km / 53 degrees.
pub fn leo_shell(plane_count: u32, sats_per_plane: u32) -> OrbitShellSpec {
    OrbitShellSpec {
        regime: Regime::Leo,
        altitude_km: 550.0,
        inclination_deg: 53.0,
        plane_count,
        sats_per_plane,
        phasing_offset_deg: 5.0,
        epoch_s: 0.0,
    }
}

/// TSN-like MEO shell at 10,000 km / 45 degrees.
pub fn meo_shell(plane_count: u32, sats_per_plane: u32) -> OrbitShellSpec {
    OrbitShellSpec {
        regime: Regime::Meo,
        altitude_km: 10_000.0,
        inclination_deg: 45.0,
        plane_count,
        sats_per_plane,
        phasing_offset_deg: 7.0,
        epoch_s: 0.0,
    }
}

pub fn geo_shell(count: u32) -> OrbitShellSpec {
    OrbitShellSpec {
        regime: Regime::Geo,
        altitude_km: GEO_ALTITUDE_KM,
        inclination_deg: 0.0,
        plane_count: 1,
        sats_per_plane: count,
        phasing_offset_deg: 0.0,
        epoch_s: 0.0,
    }
}

/// Largest divisor of `n` no greater than `limit` (at least 1).
fn best_divisor(n: u32, limit: u32) -> u32 {
    (1..=limit.max(1)).rev().find(|d| n % d == 0).unwrap_or(1)
}

/// Derives the shell set for a total network size with a 90/8/2
/// LEO/MEO/GEO split and near-square Walker layouts.
pub fn derive_shells(network_size: u32) -> Vec<OrbitShellSpec> {
    assert!(network_size >= 10, "network size too small to split");
    let geo = ((network_size as f64) * 0.02).round().max(1.0) as u32;
    let meo = ((network_size as f64) * 0.08).round().max(1.0) as u32;
    let leo = network_size - geo - meo;
    let leo_planes = best_divisor(leo, ((leo as f64).sqrt() * 1.2).floor() as u32);
    let meo_planes = best_divisor(meo, (meo as f64).sqrt().floor().max(1.0) as u32);
    vec![
        leo_shell(leo_planes, leo / leo_planes),
        meo_shell(meo_planes, meo / meo_planes),
        geo_shell(geo),
    ]
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            horizon_s: 10_800.0,
            mode: AwarenessMode::Yuheng,
            shells: derive_shells(60),
            ground_stations: default_ground_stations(),
            capacity: CapacityConfig::default(),
            compute: ComputeConfig::default(),
            workload: WorkloadConfig::default(),
            awareness: AwarenessConfig::default(),
            scheduler: SchedulerConfig::default(),
            efficiency: Vec::new(),
            engine: EngineConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn network_size(&self) -> u32 {
        self.shells
            .iter()
            .map(|s| s.plane_count * s.sats_per_plane)
            .sum()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        if self.horizon_s <= 0.0 {
            errors.push("horizon_s: must be positive".to_string());
        }
        if self.shells.is_empty() {
            errors.push("shells: at least one orbit shell required".to_string());
        }
        for (i, s) in self.shells.iter().enumerate() {
            if s.altitude_km <= 0.0 {
                errors.push(format!("shells[{i}].altitude_km: must be positive"));
            }
            if s.plane_count < 1 || s.sats_per_plane < 1 {
                errors.push(format!("shells[{i}]: needs at least one plane and one satellite"));
            }
        }
        for (i, g) in self.ground_stations.iter().enumerate() {
            if g.latitude_deg.abs() > 90.0 {
                errors.push(format!("ground_stations[{i}].latitude_deg: outside [-90, 90]"));
            }
            if !(0.0..90.0).contains(&g.min_elevation_deg) {
                errors.push(format!("ground_stations[{i}].min_elevation_deg: outside [0, 90)"));
            }
        }
        if self.compute.total_gbps <= 0.0 {
            errors.push("compute.total_gbps: must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.compute.sensor_fraction) {
            errors.push("compute.sensor_fraction: outside [0, 1]".to_string());
        }
        if self.workload.priority_mix.iter().sum::<f64>() <= 0.0 {
            errors.push("workload.priority_mix: weights must sum to a positive value".to_string());
        }
        if !(0.0..=1.0).contains(&self.workload.quality) {
            errors.push("workload.quality: outside [0, 1]".to_string());
        }
        if self.workload.arrival_window_s <= 0.0 {
            errors.push("workload.arrival_window_s: must be positive".to_string());
        }
        if let Err(e) = self.awareness.policy.validate() {
            errors.push(format!("awareness.policy: {e}"));
        }
        if self.awareness.baseline_heartbeat_s <= 0.0 {
            errors.push("awareness.baseline_heartbeat_s: must be positive".to_string());
        }
        if let Err(e) = self.scheduler.validate() {
            errors.push(format!("scheduler: {e}"));
        }
        if self.engine.staleness_sample_s <= 0.0 {
            errors.push("engine.staleness_sample_s: must be positive".to_string());
        }
        if self.engine.contact_step_s <= 0.0 {
            errors.push("engine.contact_step_s: must be positive".to_string());
        }
        for (i, r) in self.efficiency.iter().enumerate() {
            if r.factor <= 0.0 {
                errors.push(format!("efficiency[{i}].factor: must be positive"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub network_sizes: Vec<u32>,
    pub task_counts: Vec<u32>,
    pub modes: Vec<AwarenessMode>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &size in &self.network_sizes {
            for &tasks in &self.task_counts {
                for &mode in &self.modes {
                    for &seed in &self.seeds {
                        out.push(self.cell(size, tasks, mode, seed));
                    }
                }
            }
        }
        out
    }

    pub fn cell(&self, size: u32, tasks: u32, mode: AwarenessMode, seed: u64) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        cfg.shells = derive_shells(size);
        cfg.workload.count = tasks;
        cfg.mode = mode;
        cfg.seed = seed;
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        if self.network_sizes.is_empty()
            || self.task_counts.is_empty()
            || self.modes.is_empty()
            || self.seeds.is_empty()
        {
            errors.push("sweep axes must all be non-empty".to_string());
        }
        if !errors.is_empty() {
            return Err(ConfigError::Invalid(errors));
        }
        self.base.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("sweep serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let spec: SweepSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Shipped scenario and sweep presets.
pub enum Preset {
    Scenario(ScenarioConfig),
    Sweep(SweepSpec),
}

/// Two co-located GEO satellites over one station, one task: the golden
/// end-to-end scenario.
pub fn smoke_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        seed: 7,
        horizon_s: 3600.0,
        mode: AwarenessMode::Yuheng,
        shells: vec![geo_shell(1), geo_shell(1)],
        ground_stations: vec![GroundStationSpec {
            id: 0,
            latitude_deg: 0.0,
            longitude_deg: 0.0,
            min_elevation_deg: 10.0,
        }],
        ..Default::default()
    };
    cfg.compute.total_gbps = 10.0;
    cfg.compute.sensor_fraction = 1.0;
    cfg.workload.count = 1;
    cfg.workload.priority_mix = [0.0, 1.0, 0.0, 0.0];
    cfg.workload.arrival_window_s = 600.0;
    cfg
}

fn desk_base(mode_horizon_s: f64) -> ScenarioConfig {
    ScenarioConfig {
        horizon_s: mode_horizon_s,
        ..Default::default()
    }
}

/// Completion-versus-scale sweep at desk scale: sizes 60..600, task counts
/// 50..400, both awareness planes, five seeds, fixed 300 GB/s total.
pub fn fig5_desk() -> SweepSpec {
    SweepSpec {
        base: desk_base(10_800.0),
        network_sizes: vec![60, 150, 300, 600],
        task_counts: vec![50, 100, 200, 400],
        modes: vec![AwarenessMode::Yuheng, AwarenessMode::Baseline],
        seeds: vec![1, 2, 3, 4, 5],
    }
}

/// Awareness-delay sweep: the size axis at the maximum task count.
pub fn fig6_desk() -> SweepSpec {
    SweepSpec {
        task_counts: vec![400],
        ..fig5_desk()
    }
}

/// Paper-scale single point: 6,000 satellites, 4,000 tasks, 3,000 GB/s.
pub fn full_scale() -> SweepSpec {
    let mut base = desk_base(21_600.0);
    base.compute.total_gbps = 3000.0;
    base.workload.arrival_window_s = 10_800.0;
    base.engine.cross_regime_windows = CrossRegimeWindows::Lazy;
    base.engine.trace_level = TraceLevel::Summary;
    base.scheduler.max_node_candidates = 512;
    base.awareness.anchor_flush_interval_s = 10.0;
    SweepSpec {
        base,
        network_sizes: vec![6000],
        task_counts: vec![4000],
        modes: vec![AwarenessMode::Yuheng, AwarenessMode::Baseline],
        seeds: vec![1],
    }
}

pub fn preset(name: &str) -> Result<Preset, ConfigError> {
    match name {
        "smoke" => Ok(Preset::Scenario(smoke_config())),
        "fig5-desk" => Ok(Preset::Sweep(fig5_desk())),
        "fig6-desk" => Ok(Preset::Sweep(fig6_desk())),
        "full-scale" => Ok(Preset::Sweep(full_scale())),
        other => Err(ConfigError::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml();
        let parsed = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, parsed);
        // parse -> serialize -> parse is identity
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn missing_seed_is_named_in_the_error() {
        let text = "horizon_s = 100.0";
        let err = ScenarioConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn invalid_fields_are_reported_with_paths() {
        let mut cfg = ScenarioConfig::default();
        cfg.compute.total_gbps = -1.0;
        cfg.workload.quality = 2.0;
        let err = cfg.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("compute.total_gbps"));
        assert!(msg.contains("workload.quality"));
    }

    #[test]
    fn derived_shells_match_split_and_count() {
        for size in [60u32, 150, 300, 600, 6000] {
            let shells = derive_shells(size);
            let total: u32 = shells.iter().map(|s| s.plane_count * s.sats_per_plane).sum();
            assert_eq!(total, size);
            assert_eq!(shells[0].regime, Regime::Leo);
            assert_eq!(shells[1].regime, Regime::Meo);
            assert_eq!(shells[2].regime, Regime::Geo);
            let leo = (shells[0].plane_count * shells[0].sats_per_plane) as f64;
            assert!((leo / size as f64 - 0.9).abs() < 0.03, "size {size}");
        }
    }

    #[test]
    fn fig5_preset_has_160_cells() {
        let sweep = fig5_desk();
        assert_eq!(sweep.cells().len(), 160);
    }

    #[test]
    fn fig6_preset_fixes_task_count() {
        let sweep = fig6_desk();
        assert_eq!(sweep.cells().len(), 40);
        assert!(sweep.cells().iter().all(|c| c.workload.count == 400));
    }

    #[test]
    fn sweep_cell_scales_only_intended_fields() {
        let sweep = fig5_desk();
        let cell = sweep.cell(150, 200, AwarenessMode::Baseline, 9);
        assert_eq!(cell.network_size(), 150);
        assert_eq!(cell.workload.count, 200);
        assert_eq!(cell.mode, AwarenessMode::Baseline);
        assert_eq!(cell.seed, 9);
        // Total compute stays fixed across the size axis.
        assert_eq!(cell.compute.total_gbps, sweep.base.compute.total_gbps);
    }

    #[test]
    fn smoke_preset_is_two_colocated_geos() {
        let cfg = smoke_config();
        cfg.validate().unwrap();
        assert_eq!(cfg.network_size(), 2);
        assert_eq!(cfg.workload.count, 1);
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(
            preset("fig7-desk"),
            Err(ConfigError::UnknownPreset(_))
        ));
    }
}
