//! One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

use std::process::ExitCode;
use std::time::Instant;

use camloc::schema::{parse_bundle, serialize_bundle};
use camloc::sweep::{scenes, BUNDLE_SEED_XOR};
use camloc_core::context::{intersection_candidates_ranked, IntersectionContext, TOP_MAPPINGS};
use camloc_core::extrinsics::largest_cluster;
use camloc_core::geodesy::{circle_intersection, flat_earth_offset, geo_distance_m, CandidateLocation, GeoCoordinate};
use camloc_core::geometry::{nearest_rotation, PixelPoint, Rotation, WorldPoint};
use camloc_core::nalgebra::{Matrix3, Vector3};
use camloc_core::pipeline::{run_pipeline, AbsoluteSource, PipelineContext};
use camloc_core::sensors::speed_kmh;
use camloc_core::stats::{percentile, Percentiles, LEVELS};
use camloc_core::synth::{
    generate_scene, render_bundles, render_edgelets, sensor_sweep, IntersectionConfig, Range, SceneConfig,
    SensorSweepConfig,
};
use camloc_core::vanishing::{
    estimate_vp, orthocenter_image_center, ransac_vps, LineSegment2D, RansacConfig, VanishingPoint, VanishingTriple,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type Outcome = Result<String, String>;
type Suite = (&'static str, fn() -> Result<(), String>);
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn noise_free_round_trip() -> Outcome {
    let start = Instant::now();
    let cfg = SceneConfig::default();
    let (mut pos, mut f, mut rot) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..1000 {
        let s = generate_scene(seed, &cfg).map_err(|e| format!("scene {seed}: {e}"))?;
        let b = render_bundles(&s, 3, 0.0, seed).map_err(|e| format!("bundles {seed}: {e}"))?;
        let r = run_pipeline(&b, &s.car_dims, &PipelineContext::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        pos = pos.max(r.camera_position.distance(s.camera_position()));
        f = f
            .max((r.intrinsics.fx - s.intrinsics.fx).abs() / s.intrinsics.fx)
            .max((r.intrinsics.fy - s.intrinsics.fy).abs() / s.intrinsics.fy);
        rot = rot.max(r.pose.rotation.angle_to(&s.pose.rotation));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        pos < 1e-6 && f < 1e-6 && rot < 1e-6 && secs < 10.0,
        format!("1000 scenes: max position {pos:.2e} m, max f rel {f:.2e}, max rotation {rot:.2e} rad, {secs:.2} s"),
    )
}

/// Per-trial errors at σ = 1 px; a trial without a located candidate
/// scores an infinite absolute error.
struct Sweep {
    failures: usize,
    position: Vec<f64>,
    height: Vec<f64>,
    absolute: Vec<f64>,
}

fn noisy_sweep() -> Result<Sweep, String> {
    let all = scenes(0, 200, &SceneConfig::default()).map_err(|e| e.to_string())?;
    let mut out = Sweep {
        failures: 0,
        position: Vec::new(),
        height: Vec::new(),
        absolute: Vec::new(),
    };
    for s in &all {
        let b = render_bundles(s, 10, 1.0, s.seed ^ BUNDLE_SEED_XOR).map_err(|e| e.to_string())?;
        let ctx = PipelineContext {
            street_bearing_deg: Some(s.street_bearing_deg),
            ..PipelineContext::default()
        };
        let Ok(r) = run_pipeline(&b, &s.car_dims, &ctx) else {
            out.failures += 1;
            out.absolute.push(f64::INFINITY);
            continue;
        };
        let truth = s.camera_position();
        out.position.push(r.camera_position.distance(truth));
        out.height.push((r.camera_position.z - truth.z).abs());
        let located = r.absolute_source == Some(AbsoluteSource::TwoRefs);
        out.absolute.push(if located { best(&r.candidates, s.camera_geo) } else { f64::INFINITY });
    }
    Ok(out)
}

fn best(candidates: &[CandidateLocation], truth: GeoCoordinate) -> f64 {
    candidates.iter().map(|c| geo_distance_m(c.geo, truth)).fold(f64::INFINITY, f64::min)
}

fn noisy_relative(r: &Sweep) -> Outcome {
    let p = Percentiles::of(&r.position).map_err(|e| e.to_string())?;
    check(
        r.failures == 0 && p.p95 <= 10.0 && p.p80 <= 5.0,
        format!("200 scenes, {} failures: position p80 {:.2} m, p95 {:.2} m", r.failures, p.p80, p.p95),
    )
}

fn height(r: &Sweep) -> Outcome {
    let h = Percentiles::of(&r.height).map_err(|e| e.to_string())?;
    check(
        r.failures == 0 && h.p80 <= 1.0 && h.p95 <= 3.0,
        format!("height p80 {:.2} m, p95 {:.2} m", h.p80, h.p95),
    )
}

fn two_refs(r: &Sweep) -> Outcome {
    let a = Percentiles::of(&r.absolute).map_err(|e| e.to_string())?;
    let located = r.absolute.iter().filter(|e| e.is_finite()).count();
    check(
        a.p95 <= 12.0,
        format!("{located}/{} trials located, misses scored as infinite: p80 {:.2} m, p95 {:.2} m", r.absolute.len(), a.p80, a.p95),
    )
}

fn intersections() -> Outcome {
    let cfg = SceneConfig {
        intersection: Some(IntersectionConfig::default()),
        ..SceneConfig::default()
    };
    let mut errors = Vec::new();
    let mut seed = 0;
    while errors.len() < 50 {
        let s = generate_scene(seed, &cfg).map_err(|e| e.to_string())?;
        seed += 1;
        let mut b = render_bundles(&s, 10, 1.0, s.seed ^ BUNDLE_SEED_XOR).map_err(|e| e.to_string())?;
        b.iter_mut().for_each(|b| b.refs = None);
        let err = match run_pipeline(&b, &s.car_dims, &PipelineContext::default()) {
            Ok(r) if r.absolute_source == Some(AbsoluteSource::Intersection) => best(&r.candidates, s.camera_geo),
            _ => f64::INFINITY,
        };
        errors.push(err);
    }
    let within10 = errors.iter().filter(|&&e| e <= 10.0).count();
    let p = Percentiles::of(&errors).map_err(|e| e.to_string())?;
    check(
        within10 >= 40 && p.p100 <= 15.0,
        format!("50 trials: {within10} within 10 m, p80 {:.2} m, p100 {:.2} m", p.p80, p.p100),
    )
}

fn square_counts() -> Result<Vec<usize>, String> {
    let ic = IntersectionConfig {
        street_width_m: Range::new(15.0, 15.0),
        min_width_difference_m: 0.0,
        min_visible: 4,
        ..IntersectionConfig::default()
    };
    let cfg = SceneConfig {
        anchor_lat: Range::new(-0.01, 0.01),
        anchor_lon: Range::new(-0.01, 0.01),
        intersection: Some(ic),
        ..SceneConfig::default()
    };
    let s = generate_scene(0, &cfg).map_err(|e| e.to_string())?;
    let si = s.intersection.clone().ok_or("no intersection")?;
    let n = si.corner_geos.len();
    let start = si.visible[0];
    let mut counts = Vec::new();
    for k in 1..=4 {
        let ctx = IntersectionContext {
            corner_geos: (0..n).map(|i| si.corner_geos[(start + i) % n]).collect(),
            corner_pixels: si.visible[..k].iter().map(|&i| s.project(si.corners_world[i]).unwrap()).collect(),
            street_bearing_deg: Some(s.street_bearing_deg),
        };
        let r = intersection_candidates_ranked(&ctx, &s.intrinsics, &s.pose).map_err(|e| e.to_string())?;
        counts.push(r.candidates.len());
    }
    Ok(counts)
}

fn exact_arithmetic() -> Outcome {
    let origin = GeoCoordinate::new(0.0, 0.0).map_err(|e| e.to_string())?;
    let offset = flat_earth_offset(origin, 111_111.0, 0.0) == (1.0, 0.0);
    let s50 = 50f64.sqrt();
    let circle = circle_intersection(10.0, s50, s50).map_err(|e| e.to_string())? == [(5.0, 5.0), (5.0, -5.0)];
    let radar = speed_kmh(0.5, 30.0, 1) == 54.0;
    let vp = |u, v| VanishingPoint::from_pixel(PixelPoint::new(u, v));
    let t = VanishingTriple::new(vp(0.0, 0.0), vp(4.0, 0.0), vp(0.0, 3.0)).map_err(|e| e.to_string())?;
    let ortho = orthocenter_image_center(&t).map_err(|e| e.to_string())? == PixelPoint::new(0.0, 0.0);
    let counts = square_counts()?;
    let want = vec![16, TOP_MAPPINGS, TOP_MAPPINGS, TOP_MAPPINGS];
    check(
        offset && circle && radar && ortho && counts == want,
        format!("offset {offset}, circle {circle}, radar {radar}, orthocenter {ortho}, square counts {counts:?}"),
    )
}

fn run_property<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn world_point(r: f64) -> impl Strategy<Value = WorldPoint> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| WorldPoint::new(x, y, z))
}

fn so3() -> Result<(), String> {
    let m = prop::array::uniform9(-10.0f64..10.0).prop_map(|a| Matrix3::from_row_slice(&a));
    run_property(256, m, |m| {
        prop_assume!(m.svd(false, false).singular_values.min() > 1e-3);
        let r = nearest_rotation(&m).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let rm = r.matrix();
        prop_assert!((rm * rm.transpose() - Matrix3::identity()).norm() < 1e-9);
        prop_assert!((rm.determinant() - 1.0).abs() < 1e-9);
        Ok(())
    })?;
    let axis = (-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0).prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize());
    run_property(256, (axis.clone(), axis, -3.0f64..3.0, -3.0f64..3.0), |(a, b, t, u)| {
        let r = Rotation::from_axis_angle(a, t).compose(&Rotation::from_axis_angle(b, u));
        let rm = r.matrix();
        prop_assert!((rm * rm.transpose() - Matrix3::identity()).norm() < 1e-9);
        prop_assert!((rm.determinant() - 1.0).abs() < 1e-9);
        Ok(())
    })
}

fn vp_invariance() -> Result<(), String> {
    let segs = (
        (-2000.0f64..2000.0, -2000.0f64..2000.0),
        prop::collection::vec((0.0f64..1280.0, 0.0f64..720.0, 50.0f64..400.0, 0.0f64..1.0), 2..8),
    )
        .prop_filter_map("needs two segments", |(vp, raw)| {
            let v = PixelPoint::new(vp.0, vp.1);
            let segs: Vec<LineSegment2D> = raw
                .iter()
                .filter_map(|&(u, w, len, jitter)| {
                    let p = PixelPoint::new(u, w);
                    let d = p.distance(v);
                    let q = PixelPoint::new(p.u + len * (v.u - p.u) / d + jitter, p.v + len * (v.v - p.v) / d - jitter);
                    (d >= 10.0).then(|| LineSegment2D::new(p, q).ok()).flatten()
                })
                .collect();
            (segs.len() >= 2).then_some(segs)
        })
        .prop_flat_map(|segs| {
            let order = Just((0..segs.len()).collect::<Vec<usize>>()).prop_shuffle();
            (Just(segs), order)
        });
    run_property(256, segs, |(segs, order)| {
        let Ok(base) = estimate_vp(&segs) else { return Ok(()) };
        let permuted: Vec<LineSegment2D> = order
            .iter()
            .enumerate()
            .map(|(i, &j)| if i % 2 == 0 { segs[j].reversed() } else { segs[j] })
            .collect();
        let other = estimate_vp(&permuted).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let (a, b) = (base.homogeneous(), other.homogeneous());
        prop_assert!((a - b).norm() < 1e-9 || (a + b).norm() < 1e-9);
        Ok(())
    })
}

fn clustering_invariance() -> Result<(), String> {
    let pts = prop::collection::vec(world_point(30.0), 1..30).prop_flat_map(|pts| {
        let order = Just((0..pts.len()).collect::<Vec<usize>>()).prop_shuffle();
        (Just(pts), order)
    });
    run_property(256, pts, |(pts, order)| {
        let a = largest_cluster(&pts, 5.0).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let permuted: Vec<WorldPoint> = order.iter().map(|&i| pts[i]).collect();
        let b = largest_cluster(&permuted, 5.0).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(a.members.len(), b.members.len());
        let mut am = a.members.clone();
        let mut bm: Vec<usize> = b.members.iter().map(|&j| order[j]).collect();
        am.sort_unstable();
        bm.sort_unstable();
        if am == bm {
            prop_assert_eq!(a.centroid, b.centroid);
        } else {
            // equally large and equally tight clusters tie
            prop_assert!((a.variance - b.variance).abs() < 1e-9);
        }
        Ok(())
    })
}

fn bundle_round_trip() -> Result<(), String> {
    run_property(48, (0u64..10_000, 0.0f64..3.0, any::<bool>()), |(seed, sigma, with_intersection)| {
        let cfg = SceneConfig {
            intersection: with_intersection.then(IntersectionConfig::default),
            ..SceneConfig::default()
        };
        let s = generate_scene(seed, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for b in render_bundles(&s, 2, sigma, seed).map_err(|e| TestCaseError::fail(e.to_string()))? {
            let text = serialize_bundle(&b);
            let back = parse_bundle(text.as_bytes()).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(&back, &b);
            prop_assert_eq!(serialize_bundle(&back), text);
        }
        Ok(())
    })
}

fn ransac_determinism() -> Result<(), String> {
    run_property(16, (0u64..500, any::<u64>()), |(scene_seed, seed)| {
        let s = generate_scene(scene_seed, &SceneConfig::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let e = render_edgelets(&s, 120, 1.0, 0.2, scene_seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let o = s.project(WorldPoint::ORIGIN).unwrap();
        let ends = s.axis_endpoints();
        let hints = [0, 1, 2].map(|i| LineSegment2D::new(o, s.project(ends[i]).unwrap()).unwrap());
        let cfg = RansacConfig {
            iterations: 200,
            ..RansacConfig::default()
        };
        prop_assert_eq!(ransac_vps(&e, &hints, &cfg, seed), ransac_vps(&e, &hints, &cfg, seed));
        Ok(())
    })
}

fn brute_percentile(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    s.iter()
        .enumerate()
        .find(|&(i, _)| (i + 1) as f64 * 100.0 >= p * n as f64)
        .map_or(s[n - 1], |(_, &v)| v)
}

fn percentile_brute_force() -> Result<(), String> {
    run_property(256, (prop::collection::vec(-1e6f64..1e6, 1..200), 0.0f64..=100.0), |(values, p)| {
        prop_assert_eq!(percentile(&values, p).unwrap(), brute_percentile(&values, p));
        let all = Percentiles::of(&values).unwrap().as_array();
        for (level, got) in LEVELS.iter().zip(all) {
            prop_assert_eq!(got, brute_percentile(&values, *level));
        }
        Ok(())
    })
}

fn property_suites() -> Outcome {
    let suites: [Suite; 6] = [
        ("so3", so3),
        ("vp invariance", vp_invariance),
        ("clustering", clustering_invariance),
        ("parse/serialize", bundle_round_trip),
        ("ransac seed", ransac_determinism),
        ("percentiles", percentile_brute_force),
    ];
    let mut failed = Vec::new();
    for (name, run) in suites {
        if let Err(e) = run() {
            failed.push(format!("{name}: {e}"));
        }
    }
    check(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} suites, seeded runner", suites.len())
        } else {
            failed.join("; ")
        },
    )
}

fn sensors() -> Outcome {
    let r = sensor_sweep(0, &SensorSweepConfig::default()).map_err(|e| e.to_string())?;
    let pct = |x: f64| 100.0 * x;
    check(
        r.failures == 0 && r.scale.p100 <= 0.20 && r.clinometer.p100 <= 0.30 && r.radar.p100 <= 0.15 && r.radar.p80 <= 0.10,
        format!(
            "{} scale, {} clinometer, {} radar trials: scale p100 {:.1}%, clinometer p100 {:.1}%, radar p80 {:.1}% p100 {:.1}%",
            r.scale_errors.len(),
            r.clinometer_errors.len(),
            r.radar_errors.len(),
            pct(r.scale.p100),
            pct(r.clinometer.p100),
            pct(r.radar.p80),
            pct(r.radar.p100)
        ),
    )
}

fn main() -> ExitCode {
    let sweep = noisy_sweep();
    let sweep = &sweep;
    let from_sweep = |f: fn(&Sweep) -> Outcome| move || sweep.as_ref().map_err(Clone::clone).and_then(f);
    let criteria: Vec<Criterion<'_>> = vec![
        ("noise-free round trip", Box::new(noise_free_round_trip)),
        ("noisy relative envelope", Box::new(from_sweep(noisy_relative))),
        ("height envelope", Box::new(from_sweep(height))),
        ("absolute with two refs", Box::new(from_sweep(two_refs))),
        ("intersection candidates", Box::new(intersections)),
        ("exact arithmetic", Box::new(exact_arithmetic)),
        ("property suites", Box::new(property_suites)),
        ("virtual sensors", Box::new(sensors)),
    ];
    let mut failures = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
