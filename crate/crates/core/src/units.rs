//! Unit conversions and the separation thresholds shared across the crate.

pub const FEET_TO_METERS: f64 = 0.3048;

/// Feet per minute to meters per second.
pub const FPM_TO_MPS: f64 = FEET_TO_METERS / 60.0;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Horizontal NMAC radius: 500 ft.
pub const NMAC_HORIZONTAL_M: f64 = 500.0 * FEET_TO_METERS;

/// Vertical NMAC half-height: 100 ft.
pub const NMAC_VERTICAL_M: f64 = 100.0 * FEET_TO_METERS;

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_180(deg: f64) -> f64 {
    let w = wrap_360(deg);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}
