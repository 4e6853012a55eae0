mod common;

use camloc_core::annotation::validate_bundle;
use camloc_core::extrinsics::relative_pose_candidates;
use camloc_core::geometry::{Axis, WorldPoint};
use camloc_core::pipeline::{run_pipeline, AbsoluteSource, PipelineContext};
use camloc_core::synth::{generate_scene, render_bundles, SceneConfig};
use camloc_core::vanishing::{estimate_vp, orthocenter_image_center, solve_intrinsics, VanishingTriple};
use camloc_core::Error;

use common::{best_geo_error, near_equator, run, scene};

#[test]
fn noise_free_pipeline_recovers_the_scene() {
    let cfg = SceneConfig::default();
    for seed in 0..100 {
        let s = scene(seed, &cfg);
        let r = run(&s, 3, 0.0, &PipelineContext::default());
        assert!(r.camera_position.distance(s.camera_position()) < 1e-6, "seed {seed}");
        assert!((r.intrinsics.fx - s.intrinsics.fx).abs() / s.intrinsics.fx < 1e-6);
        assert!((r.intrinsics.fy - s.intrinsics.fy).abs() / s.intrinsics.fy < 1e-6);
        assert!(r.pose.rotation.angle_to(&s.pose.rotation) < 1e-6);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }
}

#[test]
fn orthocenter_recovers_principal_point() {
    let cfg = SceneConfig::default();
    for seed in 0..50 {
        let s = scene(seed, &cfg);
        let t = VanishingTriple::new(
            s.vanishing_point(Axis::X).unwrap(),
            s.vanishing_point(Axis::Y).unwrap(),
            s.vanishing_point(Axis::Z).unwrap(),
        )
        .unwrap();
        let c = orthocenter_image_center(&t).unwrap();
        assert!((c.u - s.intrinsics.cx).abs() < 1e-6 && (c.v - s.intrinsics.cy).abs() < 1e-6);
        let fit = solve_intrinsics(&t).unwrap();
        assert!(fit.residual < 1e-9);
    }
}

#[test]
fn length_and_width_give_the_same_translation() {
    let cfg = SceneConfig::default();
    for seed in 0..50 {
        let s = scene(seed, &cfg);
        let b = render_bundles(&s, 1, 0.0, seed).unwrap();
        let c = relative_pose_candidates(&b[0], &s.car_dims).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].source_axis, c[1].source_axis), (Axis::X, Axis::Y));
        let (t0, t1) = (c[0].pose.translation.to_vector(), c[1].pose.translation.to_vector());
        assert!((t0 - t1).norm() < 1e-9, "seed {seed}");
        assert!((t0 - s.pose.translation.to_vector()).norm() < 1e-9);
    }
}

#[test]
fn noise_free_estimate_vp_hits_true_points() {
    let s = scene(4, &SceneConfig::default());
    let b = render_bundles(&s, 1, 0.0, 4).unwrap();
    for axis in Axis::ALL {
        let est = estimate_vp(b[0].parallel_sets.get(axis)).unwrap().pixel().unwrap();
        let truth = s.vanishing_point(axis).unwrap().pixel().unwrap();
        assert!(est.distance(truth) < 1e-6 * truth.distance(Default::default()).max(1.0));
    }
}

#[test]
fn two_refs_give_one_exact_location() {
    let cfg = near_equator();
    for seed in 0..50 {
        let s = scene(seed, &cfg);
        let r = run(&s, 5, 0.0, &PipelineContext::default());
        assert_eq!(r.absolute_source, Some(AbsoluteSource::TwoRefs));
        assert_eq!(r.candidates.len(), 1);
        assert!(best_geo_error(&r, &s) < 1e-6, "seed {seed}: {}", best_geo_error(&r, &s));
        assert!((r.candidates[0].height_m - s.camera_height_m).abs() < 1e-6);
    }
}

#[test]
fn one_ref_gives_four_candidates_one_exact() {
    let cfg = SceneConfig {
        ref_count: 1,
        ..near_equator()
    };
    for seed in 0..30 {
        let s = scene(seed, &cfg);
        let ctx = PipelineContext {
            street_bearing_deg: Some(s.street_bearing_deg),
            ..PipelineContext::default()
        };
        let r = run(&s, 5, 0.0, &ctx);
        assert_eq!(r.absolute_source, Some(AbsoluteSource::OneRef));
        assert_eq!(r.candidates.len(), 4);
        assert!(best_geo_error(&r, &s) < 1e-6, "seed {seed}");
    }
}

#[test]
fn one_ref_without_bearing_is_reported() {
    let cfg = SceneConfig {
        ref_count: 1,
        ..near_equator()
    };
    let s = scene(2, &cfg);
    let r = run(&s, 3, 0.0, &PipelineContext::default());
    assert!(r.candidates.is_empty());
    assert_eq!(r.absolute_source, None);
    assert!(r.warnings.iter().any(|w| w.contains("street_bearing_deg")));
}

#[test]
fn spam_bundle_is_skipped_with_one_warning() {
    let cfg = SceneConfig::default();
    for (seed, sigma) in (0..20).map(|seed| (seed, if seed % 2 == 0 { 0.0 } else { 1.0 })) {
        let s = scene(seed, &cfg);
        let mut bundles = render_bundles(&s, 10, sigma, seed).unwrap();
        let honest: Vec<_> = bundles[1..].to_vec();
        // a perpendicular segment in the height set
        let spam = &mut bundles[0];
        let z = &mut spam.parallel_sets.z;
        let (a, b) = (z[0].a, z[0].b);
        let mid = camloc_core::geometry::PixelPoint::new(0.5 * (a.u + b.u), 0.5 * (a.v + b.v));
        let half = camloc_core::geometry::PixelPoint::new(mid.u + (b.v - a.v) / 2.0, mid.v - (b.u - a.u) / 2.0);
        z[1] = camloc_core::vanishing::LineSegment2D::new(mid, half).unwrap();
        assert!(!validate_bundle(spam).is_valid());

        let with = run_pipeline(&bundles, &s.car_dims, &PipelineContext::default()).unwrap();
        let without = run_pipeline(&honest, &s.car_dims, &PipelineContext::default()).unwrap();
        // honest σ = 1 px bundles may add their own per-annotator warnings
        assert_eq!(with.warnings.len(), without.warnings.len() + 1, "{:?}", with.warnings);
        assert!(with.warnings[0].starts_with("annotator-0: skipped"));
        assert_eq!(&with.warnings[1..], &without.warnings[..]);
        if sigma == 0.0 {
            assert_eq!(with.warnings.len(), 1);
        }
        assert_eq!(with.pose, without.pose);
        assert_eq!(with.intrinsics, without.intrinsics);
        assert_eq!(with.camera_position, without.camera_position);
        assert_eq!(with.candidates, without.candidates);
        assert_eq!(with.quality.valid_bundles, 9);
    }
}

#[test]
fn all_spam_is_an_error() {
    let s = scene(1, &SceneConfig::default());
    let mut bundles = render_bundles(&s, 2, 0.0, 1).unwrap();
    for b in &mut bundles {
        let x0 = b.parallel_sets.x[0];
        b.parallel_sets.y = vec![x0, x0.reversed()];
        b.parallel_sets.y[1] = camloc_core::vanishing::LineSegment2D::new(
            x0.a,
            camloc_core::geometry::PixelPoint::new(x0.a.u - (x0.b.v - x0.a.v), x0.a.v + (x0.b.u - x0.a.u)),
        )
        .unwrap();
    }
    assert_eq!(
        run_pipeline(&bundles, &s.car_dims, &PipelineContext::default()).unwrap_err(),
        Error::AllBundlesInvalid
    );
}

#[test]
fn noisy_bundles_pass_validation() {
    let cfg = SceneConfig::default();
    for seed in 0..50 {
        let s = scene(seed, &cfg);
        for b in render_bundles(&s, 10, 1.0, seed).unwrap() {
            let report = validate_bundle(&b);
            assert!(report.is_valid(), "seed {seed}: {:?}", report.flags);
        }
    }
}

#[test]
fn bundles_share_image_id_but_differ() {
    let s = scene(5, &SceneConfig::default());
    let b = render_bundles(&s, 4, 1.0, 5).unwrap();
    assert!(b.iter().all(|x| x.image_id == b[0].image_id));
    assert_ne!(b[0].car_axes, b[1].car_axes);
    assert_ne!(b[0].annotator_id, b[1].annotator_id);
}

#[test]
fn pipeline_is_bit_stable() {
    let cfg = SceneConfig::default();
    for seed in [0, 17, 99] {
        let a = run(&generate_scene(seed, &cfg).unwrap(), 10, 1.0, &PipelineContext::default());
        let b = run(&generate_scene(seed, &cfg).unwrap(), 10, 1.0, &PipelineContext::default());
        assert_eq!(a, b);
    }
}

#[test]
fn scene_invariants_hold_for_1000_seeds() {
    let cfg = SceneConfig::default();
    let (w, h) = (f64::from(cfg.image_size.width), f64::from(cfg.image_size.height));
    for seed in 0..1000 {
        let s = scene(seed, &cfg);
        for p in s.car_corners() {
            let c = s.pose.world_to_camera(p);
            assert!(c.z > 0.0, "seed {seed}: car corner behind the camera");
            let px = s.project(p).unwrap();
            assert!(px.u > -1.5 * w && px.u < 2.5 * w && px.v > -1.5 * h && px.v < 2.5 * h);
        }
        assert!((s.camera_position().z - s.camera_height_m).abs() < 1e-9);
        assert!(s.camera_position().z >= cfg.camera_height_m.min - 1e-9);
        assert!(s.camera_position().z <= cfg.camera_height_m.max + 1e-9);
    }
}

#[test]
fn median_error_grows_with_noise() {
    let cfg = SceneConfig::default();
    let mut medians = Vec::new();
    for sigma in [0.0, 0.5, 1.0, 2.0] {
        let errs: Vec<f64> = (0..200)
            .map(|seed| {
                let s = scene(seed, &cfg);
                let r = run(&s, 10, sigma, &PipelineContext::default());
                r.camera_position.distance(s.camera_position())
            })
            .collect();
        medians.push(camloc_core::stats::median(&errs).unwrap());
    }
    assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{medians:?}");
}

#[test]
fn world_origin_is_the_annotated_corner() {
    let s = scene(8, &SceneConfig::default());
    let r = run(&s, 3, 0.0, &PipelineContext::default());
    let o = camloc_core::geometry::project_to_pixel(&r.intrinsics, &r.pose, WorldPoint::ORIGIN).unwrap();
    assert!(o.pixel.distance(s.project(WorldPoint::ORIGIN).unwrap()) < 1e-6);
}
