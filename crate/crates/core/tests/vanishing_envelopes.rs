use camloc_core::geometry::{Axis, Intrinsics, PixelPoint, Rotation, WorldPoint};
use camloc_core::stats::Percentiles;
use camloc_core::synth::{generate_scene, render_edgelets, SceneConfig, SyntheticScene};
use camloc_core::vanishing::{
    estimate_vp, orthocenter_image_center, ransac_vps, solve_intrinsics, Edgelet, LineSegment2D, RansacConfig,
    VanishingPoint, VanishingTriple,
};
use camloc_core::Error;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn hints(s: &SyntheticScene) -> [LineSegment2D; 3] {
    let o = s.project(WorldPoint::ORIGIN).unwrap();
    let ends = s.axis_endpoints();
    [0, 1, 2].map(|i| LineSegment2D::new(o, s.project(ends[i]).unwrap()).unwrap())
}

/// Angle between the viewing rays of two vanishing points, degrees.
fn ray_angle_deg(k: &Intrinsics, a: &VanishingPoint, b: &VanishingPoint) -> f64 {
    let ki = k.inverse_matrix();
    let da = (ki * a.homogeneous()).normalize();
    let db = (ki * b.homogeneous()).normalize();
    da.cross(&db).norm().atan2(da.dot(&db).abs()).to_degrees()
}

fn triple_from(k: &Intrinsics, dirs: [Vector3<f64>; 3]) -> VanishingTriple {
    let [a, b, c] = dirs.map(|d| VanishingPoint::from_homogeneous(k.matrix() * d).unwrap());
    VanishingTriple::new(a, b, c).unwrap()
}

// Every image line through a point is the projection of some world line with
// the corresponding direction, so segments are drawn directly through the
// vanishing point: 6 segments of 300–600 px, vanishing point inside the image.
#[test]
fn estimate_vp_half_pixel_envelope() {
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut errs = Vec::new();
    for seed in 0..500 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = PixelPoint::new(rng.gen_range(0.0..1280.0), rng.gen_range(0.0..720.0));
        let mut segs = Vec::new();
        while segs.len() < 6 {
            let p = PixelPoint::new(rng.gen_range(0.0..1280.0), rng.gen_range(0.0..720.0));
            let d = p.distance(v);
            if d < 1.0 {
                continue;
            }
            let len = rng.gen_range(300.0..600.0);
            let sgn = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let q = PixelPoint::new(p.u + sgn * len * (v.u - p.u) / d, p.v + sgn * len * (v.v - p.v) / d);
            if !(0.0..=1280.0).contains(&q.u) || !(0.0..=720.0).contains(&q.v) {
                continue;
            }
            let mut jitter = |x: PixelPoint| PixelPoint::new(x.u + noise.sample(&mut rng), x.v + noise.sample(&mut rng));
            let (a, b) = (jitter(p), jitter(q));
            segs.push(LineSegment2D::new(a, b).unwrap());
        }
        let est = estimate_vp(&segs).unwrap().pixel().unwrap();
        errs.push(est.distance(v));
    }
    let p = Percentiles::of(&errs).unwrap();
    assert!(p.p95 <= 2.0, "{p:?}");
}

#[test]
fn ransac_noise_free_is_exact() {
    let cfg = SceneConfig::default();
    for seed in 0..200 {
        let s = generate_scene(seed, &cfg).unwrap();
        let e = render_edgelets(&s, 300, 0.0, 0.0, seed).unwrap();
        let t = ransac_vps(&e, &hints(&s), &RansacConfig::default(), seed).unwrap();
        for axis in Axis::ALL {
            let truth = s.vanishing_point(axis).unwrap().pixel().unwrap();
            let got = t.get(axis).pixel().unwrap();
            assert!(got.distance(truth) < 1e-6, "seed {seed} {axis:?}: {}", got.distance(truth));
        }
    }
}

// 30% outliers and 1° direction noise. Pixel error at vanishing points
// thousands of pixels away is not a meaningful scale, so the envelope is on
// the angle between true and recovered viewing rays.
#[test]
fn ransac_noisy_ray_envelope() {
    let cfg = SceneConfig::default();
    let mut worst = Vec::new();
    for seed in 0..200 {
        let s = generate_scene(seed, &cfg).unwrap();
        let e = render_edgelets(&s, 300, 1.0, 0.3, seed).unwrap();
        let t = ransac_vps(&e, &hints(&s), &RansacConfig::default(), seed).unwrap();
        let w = Axis::ALL
            .iter()
            .map(|&a| ray_angle_deg(&s.intrinsics, &s.vanishing_point(a).unwrap(), t.get(a)))
            .fold(0.0, f64::max);
        worst.push(w);
    }
    let within = worst.iter().filter(|&&w| w <= 4.0).count();
    assert!(within >= 180, "{within}/200, {:?}", Percentiles::of(&worst).unwrap());
}

#[test]
fn ransac_is_seed_deterministic() {
    let s = generate_scene(3, &SceneConfig::default()).unwrap();
    let e = render_edgelets(&s, 200, 1.0, 0.3, 3).unwrap();
    let a = ransac_vps(&e, &hints(&s), &RansacConfig::default(), 42).unwrap();
    let b = ransac_vps(&e, &hints(&s), &RansacConfig::default(), 42).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ransac_reports_unsupported_axes() {
    let s = generate_scene(3, &SceneConfig::default()).unwrap();
    let vx = s.vanishing_point(Axis::X).unwrap().pixel().unwrap();
    let e: Vec<Edgelet> = (0..5)
        .map(|i| {
            let c = PixelPoint::new(100.0 + 150.0 * i as f64, 200.0 + 70.0 * i as f64);
            Edgelet::new(c, [vx.u - c.u, vx.v - c.v], 1.0).unwrap()
        })
        .collect();
    match ransac_vps(&e, &hints(&s), &RansacConfig::default(), 1) {
        Err(Error::InsufficientInliers(axes)) => assert_eq!(axes, vec![Axis::Y, Axis::Z]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn intrinsics_oracle_square_pixels() {
    let k = Intrinsics::new(1000.0, 1000.0, 640.0, 360.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 50 {
        let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let r = Rotation::from_axis_angle(axis.normalize(), rng.gen_range(0.0..std::f64::consts::PI));
        let m = r.matrix();
        let dirs = [m.column(0).into_owned(), m.column(1).into_owned(), m.column(2).into_owned()];
        // all three points finite and not absurdly far
        if dirs.iter().any(|d| d.z.abs() < 0.2) {
            continue;
        }
        let fit = solve_intrinsics(&triple_from(&k, dirs)).unwrap();
        let got = fit.intrinsics;
        assert!((got.fx - 1000.0).abs() < 1e-6 * 1000.0 && (got.fy - 1000.0).abs() < 1e-6 * 1000.0);
        assert!((got.cx - 640.0).abs() < 1e-6 && (got.cy - 360.0).abs() < 1e-6);
        checked += 1;
    }
}

// With the image center pinned at the orthocenter, an fx ≠ fy camera yields a
// triangle that a square-pixel camera explains exactly, so the aspect ratio
// cannot be recovered from one orthogonal triple.
#[test]
fn unequal_focals_are_not_identifiable() {
    let k = Intrinsics::new(1200.0, 900.0, 640.0, 360.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut witnesses = 0;
    for _ in 0..200 {
        let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let r = Rotation::from_axis_angle(axis.normalize(), rng.gen_range(0.0..std::f64::consts::PI));
        let m = r.matrix();
        let dirs = [m.column(0).into_owned(), m.column(1).into_owned(), m.column(2).into_owned()];
        if dirs.iter().any(|d| d.z.abs() < 0.2) {
            continue;
        }
        if let Ok(fit) = solve_intrinsics(&triple_from(&k, dirs)) {
            assert!(fit.residual < 1e-9, "{}", fit.residual);
            assert!((fit.intrinsics.fx - fit.intrinsics.fy).abs() < 1e-6 * fit.intrinsics.fx);
            witnesses += 1;
        }
    }
    assert!(witnesses > 20);
}

#[test]
fn obtuse_triple_has_no_focal() {
    // (0,0), (100,0), (40,10) has an obtuse angle at (40,10)
    let t = VanishingTriple::new(
        VanishingPoint::from_pixel(PixelPoint::new(0.0, 0.0)),
        VanishingPoint::from_pixel(PixelPoint::new(100.0, 0.0)),
        VanishingPoint::from_pixel(PixelPoint::new(40.0, 10.0)),
    )
    .unwrap();
    assert!(matches!(solve_intrinsics(&t), Err(Error::NonPositiveFocal { .. })));
}

// An acute triangle is always the orthogonal triple of some square-pixel
// camera, so non-orthogonal axes are only exposed through the camera they
// imply: here a principal point hundreds of pixels off and a short focal.
#[test]
fn sixty_degree_axes_imply_a_different_camera() {
    let k = Intrinsics::new(1000.0, 1000.0, 640.0, 360.0).unwrap();
    let c = 1.0 / 3.0f64.sqrt();
    let base = [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.5, 0.75f64.sqrt(), 0.0),
        Vector3::new(0.5, c / 2.0, (1.0 - 0.25 - c * c / 4.0).sqrt()),
    ];
    let tilt = Rotation::from_axis_angle(Vector3::new(1.0, -1.0, 0.0).normalize(), 0.9);
    let dirs = base.map(|d| tilt.matrix() * d);
    for i in 0..3 {
        for j in i + 1..3 {
            assert!((dirs[i].dot(&dirs[j]) - 0.5).abs() < 1e-12);
        }
    }
    let fit = solve_intrinsics(&triple_from(&k, dirs)).unwrap();
    assert!(fit.residual < 1e-9);
    let got = fit.intrinsics;
    assert!(PixelPoint::new(got.cx, got.cy).distance(PixelPoint::new(640.0, 360.0)) > 100.0);
    assert!((got.fx - 1000.0).abs() > 100.0);
}

#[test]
fn obtuse_sixty_degree_layout_has_no_focal() {
    // the same 60° directions seen with one of them nearly along the optical axis
    let k = Intrinsics::new(1000.0, 1000.0, 640.0, 360.0).unwrap();
    let c = 1.0 / 3.0f64.sqrt();
    let base = [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.5, 0.75f64.sqrt(), 0.0),
        Vector3::new(0.5, c / 2.0, (1.0 - 0.25 - c * c / 4.0).sqrt()),
    ];
    let mut rejected = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for _ in 0..200 {
        let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let r = Rotation::from_axis_angle(axis.normalize(), rng.gen_range(0.0..std::f64::consts::PI));
        let dirs = base.map(|d| r.matrix() * d);
        if dirs.iter().any(|d| d.z.abs() < 0.2) {
            continue;
        }
        if let Err(Error::NonPositiveFocal { .. }) = solve_intrinsics(&triple_from(&k, dirs)) {
            rejected += 1;
        }
    }
    assert!(rejected > 0);
}

#[test]
fn orthocenter_scales_with_the_triple() {
    let pts = [(100.0, 50.0), (900.0, 80.0), (450.0, 1900.0)];
    let make = |s: f64| {
        let [a, b, c] = pts.map(|(u, v)| VanishingPoint::from_pixel(PixelPoint::new(s * u, s * v)));
        VanishingTriple::new(a, b, c).unwrap()
    };
    let base = orthocenter_image_center(&make(1.0)).unwrap();
    for s in [0.5, 2.0, 3.7] {
        let h = orthocenter_image_center(&make(s)).unwrap();
        assert!((h.u - s * base.u).abs() < 1e-9 * s * 1000.0 && (h.v - s * base.v).abs() < 1e-9 * s * 1000.0);
    }
}
