//! Seeded synthetic sweeps for the `synth` command.

use std::fmt::Write as _;

use camloc_core::geodesy::geo_distance_m;
use camloc_core::pipeline::{run_pipeline, PipelineContext};
use camloc_core::stats::Percentiles;
use camloc_core::synth::{
    evaluate_errors, generate_scene, render_bundles, sensor_sweep, IntersectionConfig, Range, SceneConfig,
    SensorSweepConfig, SyntheticScene, TrialEstimate,
};
use serde::{Deserialize, Serialize};

use crate::error::AppResult;
use crate::schema::{Versioned, VERSION};

/// Seed offset between a scene and its rendered bundles.
pub const BUNDLE_SEED_XOR: u64 = 0xb0b;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionOverrides {
    pub street_width_m: [f64; 2],
    pub min_width_difference_m: f64,
    pub distance_m: [f64; 2],
    pub min_visible: usize,
}

/// Scene ranges as `[min, max]`; omitted fields keep their defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneOverrides {
    #[serde(default)]
    pub focal_px: Option<[f64; 2]>,
    #[serde(default)]
    pub camera_height_m: Option<[f64; 2]>,
    #[serde(default)]
    pub car_distance_m: Option<[f64; 2]>,
    #[serde(default)]
    pub anchor_lat: Option<[f64; 2]>,
    #[serde(default)]
    pub anchor_lon: Option<[f64; 2]>,
    #[serde(default)]
    pub ref_count: Option<usize>,
    #[serde(default)]
    pub intersection: Option<IntersectionOverrides>,
}

fn range(r: [f64; 2]) -> Range {
    Range::new(r[0], r[1])
}

impl SceneOverrides {
    pub fn apply(&self, base: SceneConfig) -> SceneConfig {
        let mut c = base;
        if let Some(r) = self.focal_px {
            c.focal_px = range(r);
        }
        if let Some(r) = self.camera_height_m {
            c.camera_height_m = range(r);
        }
        if let Some(r) = self.car_distance_m {
            c.car_distance_m = range(r);
        }
        if let Some(r) = self.anchor_lat {
            c.anchor_lat = range(r);
        }
        if let Some(r) = self.anchor_lon {
            c.anchor_lon = range(r);
        }
        if let Some(n) = self.ref_count {
            c.ref_count = n;
        }
        if let Some(i) = self.intersection {
            c.intersection = Some(IntersectionConfig {
                street_width_m: range(i.street_width_m),
                min_width_difference_m: i.min_width_difference_m,
                distance_m: range(i.distance_m),
                min_visible: i.min_visible,
            });
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorOverrides {
    pub trials: usize,
    pub noise_px: f64,
}

/// Scenario file for `camloc synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub scenes: usize,
    #[serde(default = "default_annotators")]
    pub annotators: usize,
    /// Endpoint noise levels, pixels.
    pub sigma_px: Vec<f64>,
    #[serde(default)]
    pub scene: SceneOverrides,
    #[serde(default)]
    pub sensors: Option<SensorOverrides>,
}

fn default_annotators() -> usize {
    10
}

impl Versioned for SweepConfig {
    fn version(&self) -> u32 {
        self.version
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercentilesDoc {
    pub p50: f64,
    pub p80: f64,
    pub p90: f64,
    pub p95: f64,
    pub p100: f64,
}

impl From<Percentiles> for PercentilesDoc {
    fn from(p: Percentiles) -> Self {
        Self {
            p50: p.p50,
            p80: p.p80,
            p90: p.p90,
            p95: p.p95,
            p100: p.p100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub sigma_px: f64,
    pub trials: usize,
    /// Trials where the pipeline returned an error.
    pub failures: usize,
    pub position_m: Option<PercentilesDoc>,
    pub height_m: Option<PercentilesDoc>,
    /// Closest absolute candidate to the truth, over trials with candidates.
    pub absolute_m: Option<PercentilesDoc>,
    pub absolute_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorsReport {
    pub trials: usize,
    pub noise_px: f64,
    /// Relative errors.
    pub scale: PercentilesDoc,
    pub clinometer: PercentilesDoc,
    pub radar: PercentilesDoc,
    pub radar_mean: f64,
    pub failures: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepReport {
    pub version: u32,
    pub seed: u64,
    pub annotators: usize,
    pub runs: Vec<RunReport>,
    pub sensors: Option<SensorsReport>,
}

impl Versioned for SweepReport {
    fn version(&self) -> u32 {
        self.version
    }
}

/// Scenes `seed..seed + count` under `cfg`.
pub fn scenes(seed: u64, count: usize, cfg: &SceneConfig) -> AppResult<Vec<SyntheticScene>> {
    (0..count as u64).map(|i| Ok(generate_scene(seed + i, cfg)?)).collect()
}

/// Pipeline errors for one noise level.
pub fn run_level(scenes: &[SyntheticScene], annotators: usize, sigma_px: f64) -> AppResult<RunReport> {
    let mut estimates = Vec::with_capacity(scenes.len());
    let mut kept = Vec::with_capacity(scenes.len());
    let mut failures = 0;
    for s in scenes {
        let bundles = render_bundles(s, annotators, sigma_px, s.seed ^ BUNDLE_SEED_XOR)?;
        let ctx = PipelineContext {
            street_bearing_deg: Some(s.street_bearing_deg),
            ..PipelineContext::default()
        };
        match run_pipeline(&bundles, &s.car_dims, &ctx) {
            Ok(r) => {
                let geo = r
                    .candidates
                    .iter()
                    .map(|c| c.geo)
                    .min_by(|a, b| geo_distance_m(*a, s.camera_geo).total_cmp(&geo_distance_m(*b, s.camera_geo)));
                estimates.push(TrialEstimate {
                    position: r.camera_position,
                    geo,
                });
                kept.push(s.clone());
            }
            Err(_) => failures += 1,
        }
    }
    let mut report = RunReport {
        sigma_px,
        trials: scenes.len(),
        failures,
        position_m: None,
        height_m: None,
        absolute_m: None,
        absolute_trials: 0,
    };
    if !estimates.is_empty() {
        let e = evaluate_errors(&estimates, &kept)?;
        report.position_m = Some(e.position.into());
        report.height_m = Some(e.height.into());
        report.absolute_m = e.absolute.map(PercentilesDoc::from);
        report.absolute_trials = e.absolute_errors_m.len();
    }
    Ok(report)
}

pub fn run_sweep(cfg: &SweepConfig) -> AppResult<SweepReport> {
    let scene_cfg = cfg.scene.apply(SceneConfig::default());
    scene_cfg.validate()?;
    let all = scenes(cfg.seed, cfg.scenes, &scene_cfg)?;
    let runs = cfg
        .sigma_px
        .iter()
        .map(|&s| run_level(&all, cfg.annotators, s))
        .collect::<AppResult<Vec<_>>>()?;
    let sensors = match cfg.sensors {
        Some(o) => {
            let sc = SensorSweepConfig {
                scene: scene_cfg,
                trials: o.trials,
                noise_px: o.noise_px,
                ..SensorSweepConfig::default()
            };
            let r = sensor_sweep(cfg.seed, &sc)?;
            Some(SensorsReport {
                trials: o.trials,
                noise_px: o.noise_px,
                scale: r.scale.into(),
                clinometer: r.clinometer.into(),
                radar: r.radar.into(),
                radar_mean: r.radar_mean,
                failures: r.failures,
                skipped: r.skipped,
            })
        }
        None => None,
    };
    Ok(SweepReport {
        version: VERSION,
        seed: cfg.seed,
        annotators: cfg.annotators,
        runs,
        sensors,
    })
}

fn row(out: &mut String, label: &str, p: Option<&PercentilesDoc>) {
    match p {
        Some(p) => {
            let _ = writeln!(
                out,
                "  {label:<12} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                p.p50, p.p80, p.p90, p.p95, p.p100
            );
        }
        None => {
            let _ = writeln!(out, "  {label:<12} {:>9}", "-");
        }
    }
}

/// Plain-text percentile table.
pub fn table(r: &SweepReport) -> String {
    let mut out = String::new();
    let header = format!("  {:<12} {:>9} {:>9} {:>9} {:>9} {:>9}", "", "p50", "p80", "p90", "p95", "p100");
    for run in &r.runs {
        let _ = writeln!(
            out,
            "sigma {} px, {} trials, {} failures, {} absolute",
            run.sigma_px, run.trials, run.failures, run.absolute_trials
        );
        let _ = writeln!(out, "{header}");
        row(&mut out, "position m", run.position_m.as_ref());
        row(&mut out, "height m", run.height_m.as_ref());
        row(&mut out, "absolute m", run.absolute_m.as_ref());
    }
    if let Some(s) = &r.sensors {
        let _ = writeln!(
            out,
            "sensors, {} trials at {} px, {} failures, {} skipped (relative error)",
            s.trials, s.noise_px, s.failures, s.skipped
        );
        let _ = writeln!(out, "{header}");
        row(&mut out, "scale", Some(&s.scale));
        row(&mut out, "clinometer", Some(&s.clinometer));
        row(&mut out, "radar", Some(&s.radar));
    }
    out
}
