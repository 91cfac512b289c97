//! Aircraft states, relative geometry and the pinhole camera model.
//!
//! World frame is local east-north-up in meters. Headings are compass
//! degrees (0 = north, clockwise positive), pitch is nose-up positive and
//! roll is right-wing-down positive. The camera looks along the body
//! x-axis; image x grows to the right and image y grows downward.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{wrap_180, wrap_360};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("degenerate bounding box (width {0})")]
    DegenerateBox(f64),
    #[error("invalid aircraft extents: {0}")]
    InvalidClass(String),
}

/// Kinematic state of one aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AircraftState {
    pub east: f64,
    pub north: f64,
    pub up: f64,
    /// Compass heading in degrees, `[0, 360)`.
    pub heading: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Horizontal speed along `heading`, m/s.
    pub ground_speed: f64,
    pub vertical_rate: f64,
}

impl AircraftState {
    /// Level, unaccelerated state at a position.
    pub fn level(east: f64, north: f64, up: f64, heading: f64, ground_speed: f64) -> Self {
        Self {
            east,
            north,
            up,
            heading: wrap_360(heading),
            pitch: 0.0,
            roll: 0.0,
            ground_speed: ground_speed.max(0.0),
            vertical_rate: 0.0,
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.east, self.north, self.up]
    }

    pub fn velocity(&self) -> [f64; 3] {
        let h = self.heading.to_radians();
        [
            self.ground_speed * h.sin(),
            self.ground_speed * h.cos(),
            self.vertical_rate,
        ]
    }

    /// Body axes (forward, right, up) expressed in the world frame.
    fn body_axes(&self) -> [[f64; 3]; 3] {
        let (sh, ch) = self.heading.to_radians().sin_cos();
        let (sp, cp) = self.pitch.to_radians().sin_cos();
        let (sr, cr) = self.roll.to_radians().sin_cos();

        let f0 = [sh, ch, 0.0];
        let r0 = [ch, -sh, 0.0];
        let u0 = [0.0, 0.0, 1.0];

        // pitch about the right axis
        let f1 = lin(cp, f0, sp, u0);
        let u1 = lin(-sp, f0, cp, u0);
        // roll about the forward axis
        let r2 = lin(cr, r0, -sr, u1);
        let u2 = lin(sr, r0, cr, u1);
        [f1, r2, u2]
    }
}

fn lin(a: f64, x: [f64; 3], b: f64, y: [f64; 3]) -> [f64; 3] {
    [a * x[0] + b * y[0], a * x[1] + b * y[1], a * x[2] + b * y[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Intruder position and motion relative to the ownship.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RelativeGeometry {
    pub horizontal_range: f64,
    /// Intruder altitude minus ownship altitude.
    pub vertical_offset: f64,
    /// Degrees from the ownship heading, right positive, `(-180, 180]`.
    pub bearing: f64,
    /// Degrees above the reference horizontal plane.
    pub elevation: f64,
    /// Positive when the horizontal range is shrinking.
    pub horizontal_closing_speed: f64,
}

impl RelativeGeometry {
    pub fn slant_range(&self) -> f64 {
        self.horizontal_range.hypot(self.vertical_offset)
    }
}

/// Relative geometry in the ownship's level (heading-aligned) frame.
pub fn relative_geometry(ownship: &AircraftState, intruder: &AircraftState) -> RelativeGeometry {
    let d = sub(intruder.position(), ownship.position());
    let range = d[0].hypot(d[1]);
    let bearing = if range > 0.0 {
        wrap_180(d[0].atan2(d[1]).to_degrees() - ownship.heading)
    } else {
        0.0
    };
    let elevation = if range > 0.0 || d[2] != 0.0 {
        d[2].atan2(range).to_degrees()
    } else {
        0.0
    };
    RelativeGeometry {
        horizontal_range: range,
        vertical_offset: d[2],
        bearing,
        elevation,
        horizontal_closing_speed: closing_speed(ownship, intruder, d, range),
    }
}

/// Like [`relative_geometry`], but bearing and elevation are measured in the
/// attitude-rotated camera frame. Range, vertical offset and closing speed
/// are unchanged.
pub fn camera_geometry(ownship: &AircraftState, intruder: &AircraftState) -> RelativeGeometry {
    let d = sub(intruder.position(), ownship.position());
    let range = d[0].hypot(d[1]);
    let [f, r, u] = ownship.body_axes();
    let (x, y, z) = (dot(d, f), dot(d, r), dot(d, u));
    let lateral = x.hypot(y);
    RelativeGeometry {
        horizontal_range: range,
        vertical_offset: d[2],
        bearing: if lateral > 0.0 { wrap_180(y.atan2(x).to_degrees()) } else { 0.0 },
        elevation: if lateral > 0.0 || z != 0.0 { z.atan2(lateral).to_degrees() } else { 0.0 },
        horizontal_closing_speed: closing_speed(ownship, intruder, d, range),
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn closing_speed(own: &AircraftState, int: &AircraftState, d: [f64; 3], range: f64) -> f64 {
    if range == 0.0 {
        return 0.0;
    }
    let v = sub(int.velocity(), own.velocity());
    -(d[0] * v[0] + d[1] * v[1]) / range
}

/// Forward-looking pinhole camera fixed to the ownship body x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct CameraModel {
    /// Horizontal field of view, degrees.
    pub hfov: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraModel {
    // The capture intrinsics of the reference imagery are unknown; these are placeholders.
    fn default() -> Self {
        Self { hfov: 60.0, width: 1280, height: 720 }
    }
}

impl CameraModel {
    pub fn new(hfov: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let cam = Self { hfov, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.hfov > 0.0 && self.hfov < 180.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "horizontal fov {} outside (0, 180)",
                self.hfov
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidCamera(format!(
                "image size {}x{} must be positive",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn tan_half_hfov(&self) -> f64 {
        (self.hfov.to_radians() / 2.0).tan()
    }

    pub fn tan_half_vfov(&self) -> f64 {
        self.tan_half_hfov() * f64::from(self.height) / f64::from(self.width)
    }

    /// Vertical field of view in degrees, from the aspect ratio.
    pub fn vfov(&self) -> f64 {
        2.0 * self.tan_half_vfov().atan().to_degrees()
    }
}

// Allows the exact frustum edge to count as in view despite rounding.
const EDGE_EPS: f64 = 1e-12;

/// Direction cosines of a bearing/elevation pair: (forward, right, up).
fn direction(rel: &RelativeGeometry) -> (f64, f64, f64) {
    let (sb, cb) = rel.bearing.to_radians().sin_cos();
    let (se, ce) = rel.elevation.to_radians().sin_cos();
    (ce * cb, ce * sb, se)
}

/// Center-point visibility test against the pinhole frustum.
///
/// `rel` must carry camera-frame angles (see [`camera_geometry`]); for a
/// wings-level ownship the two frames coincide.
pub fn in_field_of_view(cam: &CameraModel, rel: &RelativeGeometry) -> bool {
    let (x, y, z) = direction(rel);
    if x <= 0.0 {
        return false;
    }
    (y / x).abs() <= cam.tan_half_hfov() * (1.0 + EDGE_EPS)
        && (z / x).abs() <= cam.tan_half_vfov() * (1.0 + EDGE_EPS)
}

/// Normalized image-space box in YOLO convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundingBox {
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
    pub class_id: u32,
    pub confidence: f64,
}

impl BoundingBox {
    pub fn ground_truth(center_x: f64, center_y: f64, width: f64, height: f64) -> Self {
        Self { center_x, center_y, width, height, class_id: 0, confidence: 1.0 }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    /// `(x_min, y_min, x_max, y_max)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.center_x - self.width / 2.0,
            self.center_y - self.height / 2.0,
            self.center_x + self.width / 2.0,
            self.center_y + self.height / 2.0,
        )
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::ground_truth((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    /// The box intersected with the unit image square.
    pub fn clipped(&self) -> Self {
        let (x0, y0, x1, y1) = self.corners();
        let c = |v: f64| v.clamp(0.0, 1.0);
        let mut b = Self::from_corners(c(x0), c(y0), c(x1), c(y1));
        b.class_id = self.class_id;
        b.confidence = self.confidence;
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AircraftKind {
    CessnaSkyhawk,
    Boeing737,
    KingAirC90,
}

impl AircraftKind {
    pub const ALL: [AircraftKind; 3] = [Self::CessnaSkyhawk, Self::Boeing737, Self::KingAirC90];

    /// Published real-world extents of each type.
    pub fn class(self) -> AircraftClass {
        let (wingspan, length, height) = match self {
            Self::CessnaSkyhawk => (11.0, 8.28, 2.72),
            Self::Boeing737 => (35.8, 39.5, 12.5),
            Self::KingAirC90 => (15.3, 10.8, 4.3),
        };
        AircraftClass { kind: self, wingspan, length, height }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CessnaSkyhawk => "CessnaSkyhawk",
            Self::Boeing737 => "Boeing737",
            Self::KingAirC90 => "KingAirC90",
        }
    }
}

impl fmt::Display for AircraftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physical extents used to size projected boxes, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AircraftClass {
    pub kind: AircraftKind,
    pub wingspan: f64,
    pub length: f64,
    pub height: f64,
}

impl AircraftClass {
    pub fn new(kind: AircraftKind, wingspan: f64, length: f64, height: f64) -> Result<Self, GeometryError> {
        if !(wingspan > 0.0 && length > 0.0 && height > 0.0) {
            return Err(GeometryError::InvalidClass(format!(
                "{kind}: wingspan {wingspan}, length {length}, height {height}"
            )));
        }
        Ok(Self { kind, wingspan, length, height })
    }
}

/// Projects the intruder into the ownship camera.
///
/// Returns the unclipped box: the center is always inside the image, the
/// extent may run past an edge. Use [`BoundingBox::clipped`] for labels.
pub fn project_to_image(
    cam: &CameraModel,
    ownship: &AircraftState,
    intruder: &AircraftState,
    class: &AircraftClass,
) -> Option<BoundingBox> {
    let rel = camera_geometry(ownship, intruder);
    if !in_field_of_view(cam, &rel) {
        return None;
    }
    let (x, y, z) = direction(&rel);
    let u = (y / x) / cam.tan_half_hfov();
    let v = (z / x) / cam.tan_half_vfov();
    let center_x = (0.5 + u / 2.0).clamp(0.0, 1.0);
    let center_y = (0.5 - v / 2.0).clamp(0.0, 1.0);

    let dist = rel.slant_range();
    let width = 2.0 * (class.wingspan / 2.0 / dist).atan() / cam.hfov.to_radians();
    let height = 2.0 * (class.height / 2.0 / dist).atan() / cam.vfov().to_radians();
    Some(BoundingBox::ground_truth(center_x, center_y, width, height))
}

/// Camera-frame direction (unnormalized, forward component 1) and slant distance.
fn invert_box(
    cam: &CameraModel,
    bbox: &BoundingBox,
    class: &AircraftClass,
) -> Result<([f64; 3], f64), GeometryError> {
    if !(bbox.width > 0.0) {
        return Err(GeometryError::DegenerateBox(bbox.width));
    }
    let half_angle = bbox.width * cam.hfov.to_radians() / 2.0;
    if half_angle >= std::f64::consts::FRAC_PI_2 {
        return Err(GeometryError::DegenerateBox(bbox.width));
    }
    let dist = class.wingspan / (2.0 * half_angle.tan());
    let y = (2.0 * bbox.center_x - 1.0) * cam.tan_half_hfov();
    let z = (1.0 - 2.0 * bbox.center_y) * cam.tan_half_vfov();
    Ok(([1.0, y, z], dist))
}

/// Inverts [`project_to_image`] assuming a wings-level camera.
///
/// Bearing and elevation are camera-frame angles; the closing speed is left
/// at zero for the caller to fill by differencing.
pub fn estimate_state_from_box(
    cam: &CameraModel,
    bbox: &BoundingBox,
    assumed_class: &AircraftClass,
) -> Result<RelativeGeometry, GeometryError> {
    let ([x, y, z], dist) = invert_box(cam, bbox, assumed_class)?;
    let lateral = x.hypot(y);
    let elevation = z.atan2(lateral);
    Ok(RelativeGeometry {
        horizontal_range: dist * elevation.cos(),
        vertical_offset: dist * elevation.sin(),
        bearing: y.atan2(x).to_degrees(),
        elevation: elevation.to_degrees(),
        horizontal_closing_speed: 0.0,
    })
}

/// Inverts [`project_to_image`] using the ownship attitude, giving geometry
/// in the level frame (comparable with [`relative_geometry`]).
pub fn estimate_relative_from_box(
    cam: &CameraModel,
    bbox: &BoundingBox,
    assumed_class: &AircraftClass,
    ownship: &AircraftState,
) -> Result<RelativeGeometry, GeometryError> {
    let ([x, y, z], dist) = invert_box(cam, bbox, assumed_class)?;
    let norm = (x * x + y * y + z * z).sqrt();
    let [f, r, u] = ownship.body_axes();
    let s = dist / norm;
    let d = [
        s * (x * f[0] + y * r[0] + z * u[0]),
        s * (x * f[1] + y * r[1] + z * u[1]),
        s * (x * f[2] + y * r[2] + z * u[2]),
    ];
    let range = d[0].hypot(d[1]);
    Ok(RelativeGeometry {
        horizontal_range: range,
        vertical_offset: d[2],
        bearing: if range > 0.0 { wrap_180(d[0].atan2(d[1]).to_degrees() - ownship.heading) } else { 0.0 },
        elevation: d[2].atan2(range).to_degrees(),
        horizontal_closing_speed: 0.0,
    })
}

/// Places an intruder at a slant distance along the camera ray through an
/// image point given as fractions of the image width/height.
pub fn point_along_image_ray(
    cam: &CameraModel,
    ownship: &AircraftState,
    image_x: f64,
    image_y: f64,
    slant_distance: f64,
) -> [f64; 3] {
    let y = (2.0 * image_x - 1.0) * cam.tan_half_hfov();
    let z = (1.0 - 2.0 * image_y) * cam.tan_half_vfov();
    let norm = (1.0 + y * y + z * z).sqrt();
    let [f, r, u] = ownship.body_axes();
    let s = slant_distance / norm;
    let p = ownship.position();
    [
        p[0] + s * (f[0] + y * r[0] + z * u[0]),
        p[1] + s * (f[1] + y * r[1] + z * u[1]),
        p[2] + s * (f[2] + y * r[2] + z * u[2]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn own() -> AircraftState {
        AircraftState::level(0.0, 0.0, 0.0, 0.0, 60.0)
    }

    fn at(east: f64, north: f64, up: f64) -> AircraftState {
        AircraftState::level(east, north, up, 0.0, 0.0)
    }

    #[test]
    fn axis_aligned_geometry() {
        let rel = relative_geometry(&own(), &at(0.0, 1000.0, 100.0));
        assert!((rel.horizontal_range - 1000.0).abs() < 1e-12);
        assert!((rel.vertical_offset - 100.0).abs() < 1e-12);
        assert!(rel.bearing.abs() < 1e-12);

        let rel = relative_geometry(&own(), &at(1000.0, 0.0, 0.0));
        assert!((rel.bearing - 90.0).abs() < 1e-12);
    }

    #[test]
    fn head_on_closing_speed() {
        let a = AircraftState::level(0.0, 0.0, 0.0, 0.0, 60.0);
        let b = AircraftState::level(0.0, 4800.0, 0.0, 180.0, 60.0);
        // relative velocity (0, -120) against relative position (0, 4800)
        let rel = relative_geometry(&a, &b);
        assert!((rel.horizontal_closing_speed - 120.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_positions() {
        let rel = relative_geometry(&AircraftState::level(5.0, 5.0, 5.0, 123.0, 60.0), &at(5.0, 5.0, 5.0));
        assert_eq!(rel.horizontal_range, 0.0);
        assert_eq!(rel.bearing, 0.0);
        assert_eq!(rel.horizontal_closing_speed, 0.0);
    }

    #[test]
    fn field_of_view_edges() {
        let cam = CameraModel::default();
        let mk = |bearing: f64, elevation: f64| RelativeGeometry {
            horizontal_range: 500.0,
            vertical_offset: 0.0,
            bearing,
            elevation,
            horizontal_closing_speed: 0.0,
        };
        assert!(in_field_of_view(&cam, &mk(0.0, 0.0)));
        assert!(in_field_of_view(&cam, &mk(30.0, 0.0)));
        assert!(!in_field_of_view(&cam, &mk(31.0, 0.0)));
        assert!(!in_field_of_view(&cam, &mk(180.0, 0.0)));
        assert!(!in_field_of_view(&cam, &mk(0.0, cam.vfov() / 2.0 + 0.5)));
    }

    #[test]
    fn projection_center_and_edge() {
        let cam = CameraModel::default();
        let class = AircraftKind::CessnaSkyhawk.class();
        let b = project_to_image(&cam, &own(), &at(0.0, 400.0, 0.0), &class).unwrap();
        assert!((b.center_x - 0.5).abs() < 1e-12 && (b.center_y - 0.5).abs() < 1e-12);
        assert_eq!(b.confidence, 1.0);

        let edge = 400.0 * 30f64.to_radians().tan();
        let b = project_to_image(&cam, &own(), &at(edge, 400.0, 0.0), &class).unwrap();
        assert!((b.center_x - 1.0).abs() < 1e-9);

        assert!(project_to_image(&cam, &own(), &at(0.0, -400.0, 0.0), &class).is_none());
    }

    #[test]
    fn projected_width_matches_angular_size() {
        let cam = CameraModel::default();
        let class = AircraftKind::CessnaSkyhawk.class();
        let b = project_to_image(&cam, &own(), &at(0.0, 400.0, 0.0), &class).unwrap();
        // 2·atan(5.5/400) / (π/3)
        assert!((b.width - 0.026_259_4).abs() < 1e-6, "{}", b.width);
    }

    #[test]
    fn estimate_closed_forms() {
        let cam = CameraModel::default();
        let class = AircraftKind::CessnaSkyhawk.class();
        let rel = estimate_state_from_box(&cam, &BoundingBox::ground_truth(0.5, 0.5, 1.0, 0.5), &class).unwrap();
        assert!(rel.bearing.abs() < 1e-12 && rel.elevation.abs() < 1e-12);
        // 11 / (2·tan 30°)
        assert!((rel.horizontal_range - 9.526_279_4).abs() < 1e-6);

        let err = estimate_state_from_box(&cam, &BoundingBox::ground_truth(0.5, 0.5, 0.0, 0.1), &class);
        assert_eq!(err, Err(GeometryError::DegenerateBox(0.0)));
    }

    #[test]
    fn attitude_moves_the_image_point() {
        let cam = CameraModel::default();
        let class = AircraftKind::KingAirC90.class();
        let mut o = own();
        o.pitch = 10.0;
        // nose up: a co-altitude target appears below center
        let b = project_to_image(&cam, &o, &at(0.0, 500.0, 0.0), &class).unwrap();
        assert!(b.center_y > 0.5);
        o.pitch = 0.0;
        o.roll = 20.0;
        // right wing down: a target up-right rotates toward the vertical centerline
        let target = at(100.0, 500.0, 60.0);
        let level = project_to_image(&cam, &own(), &target, &class).unwrap();
        let rolled = project_to_image(&cam, &o, &target, &class).unwrap();
        assert!(rolled.center_x < level.center_x);
    }

    #[test]
    fn image_ray_lands_on_its_pixel() {
        let cam = CameraModel::default();
        let mut o = AircraftState::level(10.0, -20.0, 300.0, 77.0, 60.0);
        o.pitch = -7.0;
        o.roll = 25.0;
        let p = point_along_image_ray(&cam, &o, 0.2, 0.9, 640.0);
        let int = at(p[0], p[1], p[2]);
        let b = project_to_image(&cam, &o, &int, &AircraftKind::Boeing737.class()).unwrap();
        assert!((b.center_x - 0.2).abs() < 1e-9 && (b.center_y - 0.9).abs() < 1e-9);
        assert!((relative_geometry(&o, &int).slant_range() - 640.0).abs() < 1e-9);
    }

    #[test]
    fn clipping_keeps_box_inside() {
        let b = BoundingBox::ground_truth(0.98, 0.5, 0.1, 0.2).clipped();
        let (x0, _, x1, _) = b.corners();
        assert!((x0 - 0.93).abs() < 1e-12 && (x1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::new(180.0, 10, 10).is_err());
        assert!(CameraModel::new(60.0, 0, 10).is_err());
        assert!((CameraModel::default().vfov() - 35.983_4).abs() < 1e-3);
    }
}
