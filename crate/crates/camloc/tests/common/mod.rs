#![allow(dead_code)]

use std::path::Path;

use camloc::schema::serialize_bundle;
use camloc_core::annotation::AnnotationBundle;
use camloc_core::geometry::{PixelPoint, WorldPoint};
use camloc_core::synth::{generate_scene, render_bundles, IntersectionConfig, Range, SceneConfig, SyntheticScene};
use serde_json::{json, Value};

/// Near-equator anchors keep the flat-earth mismatch below a millimeter.
pub fn scene(seed: u64) -> SyntheticScene {
    let cfg = SceneConfig {
        anchor_lat: Range::new(-0.01, 0.01),
        anchor_lon: Range::new(-0.01, 0.01),
        intersection: Some(IntersectionConfig::default()),
        ..SceneConfig::default()
    };
    generate_scene(seed, &cfg).unwrap()
}

pub fn bundles(s: &SyntheticScene, annotators: usize) -> Vec<AnnotationBundle> {
    render_bundles(s, annotators, 0.0, s.seed ^ 0xb0b).unwrap()
}

pub fn write_bundles(dir: &Path, bundles: &[AnnotationBundle]) {
    for (i, b) in bundles.iter().enumerate() {
        std::fs::write(dir.join(format!("bundle-{i:02}.json")), serialize_bundle(b)).unwrap();
    }
}

pub fn bundle_docs(bundles: &[AnnotationBundle]) -> Vec<Value> {
    bundles
        .iter()
        .map(|b| serde_json::from_str(&serialize_bundle(b)).unwrap())
        .collect()
}

pub fn px(s: &SyntheticScene, x: f64, y: f64, z: f64) -> [f64; 2] {
    let p: PixelPoint = s.project(WorldPoint::new(x, y, z)).unwrap();
    [p.u, p.v]
}

fn geo_json(g: camloc_core::geodesy::GeoCoordinate) -> Value {
    json!({"lat": g.lat, "lon": g.lon})
}

pub fn refs_doc(s: &SyntheticScene) -> Value {
    let refs: Vec<Value> = s
        .refs
        .iter()
        .map(|&r| json!({"pixel": px(s, r.x, r.y, r.z), "geo": geo_json(s.world_to_geo(r).unwrap())}))
        .collect();
    json!({"version": 1, "refs": refs})
}

pub fn map_doc(s: &SyntheticScene) -> Value {
    let i = s.intersection.as_ref().unwrap();
    let corners: Vec<Value> = i.corner_geos.iter().map(|&g| geo_json(g)).collect();
    json!({
        "version": 1,
        "intersections": [{"id": "scene", "corners": corners, "street_bearing_deg": s.street_bearing_deg}]
    })
}

/// Scale, height and speed requests along the car's front-left edge.
pub fn scale_points(s: &SyntheticScene) -> Value {
    json!({"version": 1, "from": px(s, 0.0, 0.0, 0.0), "to": px(s, s.car_dims.length_m, 0.0, 0.0)})
}

pub fn height_points(s: &SyntheticScene) -> Value {
    json!({"version": 1, "base": px(s, 0.0, 0.0, 0.0), "top": px(s, 0.0, 0.0, s.car_dims.height_m)})
}

/// 0.5 m per frame at 30 fps: 54 km/h.
pub fn speed_points(s: &SyntheticScene) -> Value {
    let track: Vec<Value> = (0..4)
        .map(|i| json!({"pixel": px(s, i as f64, 0.0, 0.0), "frame": 2 * i}))
        .collect();
    json!({"version": 1, "fps": 30.0, "track": track})
}
