//! Small float helpers on top of `libm`.

use libm::{atan2, cos, fmod, sin};

/// Sine and cosine of an angle in degrees, exact at multiples of 90°.
pub fn sincos_deg(deg: f64) -> (f64, f64) {
    let mut a = fmod(deg, 360.0);
    if a < 0.0 {
        a += 360.0;
    }
    // quadrant reduction keeps sin(90°) == 1 and cos(90°) == 0 bit-exact
    let quadrant = libm::floor((a + 45.0) / 90.0);
    let r = (a - quadrant * 90.0).to_radians();
    let (s, c) = (sin(r), cos(r));
    match (quadrant as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

pub fn sin_deg(deg: f64) -> f64 {
    sincos_deg(deg).0
}

pub fn cos_deg(deg: f64) -> f64 {
    sincos_deg(deg).1
}

pub fn atan2_deg(y: f64, x: f64) -> f64 {
    atan2(y, x).to_degrees()
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn normalize_deg(deg: f64) -> f64 {
    let mut a = fmod(deg, 360.0);
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}
