#![allow(dead_code)]

use camloc_core::extrinsics::CarDimensions;
use camloc_core::geodesy::geo_distance_m;
use camloc_core::pipeline::{run_pipeline, PipelineContext, PipelineResult};
use camloc_core::synth::{generate_scene, render_bundles, Range, SceneConfig, SyntheticScene};

/// Anchors within ±0.01° of the equator keep the flat-earth cos(lat) mismatch
/// between scene and solver below 1e-7 m.
pub fn near_equator() -> SceneConfig {
    SceneConfig {
        anchor_lat: Range::new(-0.01, 0.01),
        anchor_lon: Range::new(-0.01, 0.01),
        ..SceneConfig::default()
    }
}

pub fn scene(seed: u64, cfg: &SceneConfig) -> SyntheticScene {
    generate_scene(seed, cfg).expect("scene")
}

pub fn run(scene: &SyntheticScene, annotators: usize, sigma: f64, ctx: &PipelineContext) -> PipelineResult {
    let bundles = render_bundles(scene, annotators, sigma, scene.seed ^ 0xb0b).expect("bundles");
    run_pipeline(&bundles, &scene.car_dims, ctx).expect("pipeline")
}

pub fn dims(scene: &SyntheticScene) -> CarDimensions {
    scene.car_dims
}

pub fn best_geo_error(result: &PipelineResult, scene: &SyntheticScene) -> f64 {
    result
        .candidates
        .iter()
        .map(|c| geo_distance_m(c.geo, scene.camera_geo))
        .fold(f64::INFINITY, f64::min)
}
