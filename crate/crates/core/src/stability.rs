//! Support polygons and stability margins.
//!
//! The margin of a reference point is its signed distance to the nearest
//! support polygon edge, positive inside. Three reference points are
//! supported: the center of pressure (the reward used for training), the
//! projected center of mass and the linear-inverted-pendulum capture point.

use serde::{Deserialize, Serialize};

use crate::control::to_global;
use crate::error::{Error, Result};
use crate::observation::RobotState;

/// Points closer than this are treated as the same vertex.
pub const VERTEX_EPS: f64 = 1e-9;
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Convex hull of the contact points, counter-clockwise, at least three
/// vertices and no collinear ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPolygon {
    vertices: Vec<[f64; 2]>,
}

#[inline]
fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl SupportPolygon {
    /// Convex hull by monotone chain. Returns `None` for fewer than three
    /// distinct points or collinear input.
    pub fn from_points(points: &[[f64; 2]]) -> Option<Self> {
        let mut pts: Vec<[f64; 2]> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts.dedup_by(|a, b| (a[0] - b[0]).hypot(a[1] - b[1]) <= VERTEX_EPS);
        if pts.len() < 3 {
            return None;
        }

        let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
                Box::new(pts.iter())
            } else {
                Box::new(pts.iter().rev())
            };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                    hull.pop();
                }
                hull.push(p);
            }
            // The last point of each chain starts the next one.
            hull.pop();
        }
        if hull.len() < 3 {
            return None;
        }
        let poly = SupportPolygon { vertices: hull };
        (poly.area() > VERTEX_EPS * VERTEX_EPS).then_some(poly)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
            .sum::<f64>()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let a = self.area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let w = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
        }
        [cx / (6.0 * a), cy / (6.0 * a)]
    }

    /// Signed distance from `point` to the boundary, positive strictly inside.
    pub fn margin(&self, point: [f64; 2]) -> f64 {
        let mut inside = true;
        let mut nearest = f64::INFINITY;
        for (a, b) in self.edges() {
            if cross(a, b, point) <= 0.0 {
                inside = false;
            }
            nearest = nearest.min(segment_distance(point, a, b));
        }
        if inside {
            nearest
        } else {
            -nearest
        }
    }
}

/// Euclidean distance from `p` to the segment `ab`.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

pub fn support_polygon(contact_points: &[[f64; 2]]) -> Option<SupportPolygon> {
    SupportPolygon::from_points(contact_points)
}

/// Signed margin of `point`; a missing polygon is an error here.
pub fn point_polygon_margin(point: [f64; 2], polygon: Option<&SupportPolygon>) -> Result<f64> {
    polygon.map(|p| p.margin(point)).ok_or(Error::Degenerate)
}

/// Vertical-force-weighted mean of contact positions, over contacts pushing
/// on the ground. `None` when no contact carries positive vertical force.
pub fn center_of_pressure(contacts: &[([f64; 3], [f64; 3])]) -> Option<[f64; 2]> {
    let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
    for (p, f) in contacts {
        let fz = f[2];
        if fz > 0.0 && fz.is_finite() {
            sx += p[0] * fz;
            sy += p[1] * fz;
            total += fz;
        }
    }
    (total > 0.0).then(|| [sx / total, sy / total])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityKind {
    Cop,
    Com,
    CapturePoint,
}

impl std::str::FromStr for StabilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cop" => Ok(StabilityKind::Cop),
            "com" => Ok(StabilityKind::Com),
            "cp" | "capture_point" => Ok(StabilityKind::CapturePoint),
            other => Err(Error::InvalidArgument(format!("unknown stability kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub margin: f64,
    pub point: [f64; 2],
    pub kind: StabilityKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityConfig {
    /// Reward when the reference point leaves the support polygon.
    pub outside_penalty: f64,
    pub gravity: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            outside_penalty: -1.0,
            gravity: STANDARD_GRAVITY,
        }
    }
}

/// Polygon over the feet flagged in contact.
pub fn contact_polygon(state: &RobotState) -> Option<SupportPolygon> {
    let pts: Vec<[f64; 2]> = state
        .foot_positions
        .iter()
        .zip(&state.foot_contact)
        .filter(|(_, &c)| c)
        .map(|(p, _)| [p[0], p[1]])
        .collect();
    SupportPolygon::from_points(&pts)
}

/// CoP over all feet carrying positive vertical force.
pub fn state_cop(state: &RobotState) -> Option<[f64; 2]> {
    let contacts: Vec<([f64; 3], [f64; 3])> = state
        .foot_positions
        .iter()
        .copied()
        .zip(state.foot_forces.iter().copied())
        .collect();
    center_of_pressure(&contacts)
}

/// Margin as a reward: the margin inside, the penalty outside, 0 when the
/// polygon is degenerate or the point is undefined.
fn margin_reward(polygon: Option<SupportPolygon>, point: Option<[f64; 2]>, config: &StabilityConfig) -> f64 {
    match (polygon, point) {
        (Some(poly), Some(p)) => {
            let m = poly.margin(p);
            if m < 0.0 {
                config.outside_penalty
            } else {
                m
            }
        }
        _ => 0.0,
    }
}

pub fn stability_reward_cop(state: &RobotState, config: &StabilityConfig) -> f64 {
    margin_reward(contact_polygon(state), state_cop(state), config)
}

/// Static margin of the base origin, used as the CoM estimate.
pub fn static_margin_com(state: &RobotState, config: &StabilityConfig) -> f64 {
    let com = [state.base_position[0], state.base_position[1]];
    margin_reward(contact_polygon(state), Some(com), config)
}

/// Linear-inverted-pendulum capture point `com + v sqrt(z / g)`.
pub fn capture_point(com_xy: [f64; 2], v_xy: [f64; 2], pendulum_height: f64, gravity: f64) -> Result<[f64; 2]> {
    if !(pendulum_height > 0.0) {
        return Err(Error::Domain(format!(
            "pendulum height must be positive, got {pendulum_height}"
        )));
    }
    if !(gravity > 0.0) {
        return Err(Error::Domain(format!("gravity must be positive, got {gravity}")));
    }
    let k = (pendulum_height / gravity).sqrt();
    Ok([com_xy[0] + v_xy[0] * k, com_xy[1] + v_xy[1] * k])
}

/// Capture point of the state; `ground_height` is the terrain height under
/// the base.
pub fn state_capture_point(state: &RobotState, ground_height: f64, config: &StabilityConfig) -> Result<[f64; 2]> {
    let com = [state.base_position[0], state.base_position[1]];
    let v = to_global([state.base_lin_vel[0], state.base_lin_vel[1]], state.base_yaw);
    capture_point(com, v, state.base_position[2] - ground_height, config.gravity)
}

pub fn dynamic_margin_cp(state: &RobotState, ground_height: f64, config: &StabilityConfig) -> Result<f64> {
    let cp = state_capture_point(state, ground_height, config)?;
    Ok(margin_reward(contact_polygon(state), Some(cp), config))
}

/// Raw signed margin for any reference point kind, `None` when the polygon
/// is degenerate or the point undefined.
pub fn evaluate(
    state: &RobotState,
    kind: StabilityKind,
    ground_height: f64,
    config: &StabilityConfig,
) -> Result<Option<StabilityResult>> {
    let point = match kind {
        StabilityKind::Cop => state_cop(state),
        StabilityKind::Com => Some([state.base_position[0], state.base_position[1]]),
        StabilityKind::CapturePoint => Some(state_capture_point(state, ground_height, config)?),
    };
    Ok(match (contact_polygon(state), point) {
        (Some(poly), Some(point)) => Some(StabilityResult {
            margin: poly.margin(point),
            point,
            kind,
        }),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> SupportPolygon {
        SupportPolygon::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn stance(feet: [[f64; 2]; 4], forces: [f64; 4]) -> RobotState {
        RobotState {
            base_position: [0.0, 0.0, 0.35],
            foot_positions: feet.map(|p| [p[0], p[1], 0.0]),
            foot_forces: forces.map(|f| [0.0, 0.0, f]),
            foot_contact: forces.map(|f| f > 0.0),
            ..Default::default()
        }
    }

    const RECT: [[f64; 2]; 4] = [[0.2, -0.15], [0.2, 0.15], [-0.2, -0.15], [-0.2, 0.15]];

    #[test]
    fn rectangle_hull() {
        let p = SupportPolygon::from_points(&RECT).unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert!(p.area() > 0.0);
        assert!((p.area() - 0.12).abs() < 1e-12);
    }

    #[test]
    fn interior_point_dropped() {
        let p = SupportPolygon::from_points(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.5, 0.5]]).unwrap();
        assert_eq!(p.vertices().len(), 3);
        assert!(!p.vertices().contains(&[0.5, 0.5]));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(SupportPolygon::from_points(&[]).is_none());
        assert!(SupportPolygon::from_points(&[[0.0, 0.0], [1.0, 0.0]]).is_none());
        assert!(SupportPolygon::from_points(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_none());
        assert!(SupportPolygon::from_points(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).is_none());
        assert!(matches!(point_polygon_margin([0.0, 0.0], None), Err(Error::Degenerate)));
    }

    #[test]
    fn collinear_points_not_kept() {
        let p = SupportPolygon::from_points(&[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(p.vertices().len(), 4);
    }

    #[test]
    fn unit_square_margins() {
        let sq = square();
        assert_eq!(sq.margin([0.5, 0.5]), 0.5);
        assert_eq!(sq.margin([0.25, 0.5]), 0.25);
        assert_eq!(sq.margin([1.5, 0.5]), -0.5);
        assert_eq!(sq.margin([1.0, 0.5]), 0.0);
        assert!((sq.margin([2.0, 2.0]) + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cop_examples() {
        assert_eq!(center_of_pressure(&[([0.3, -0.2, 0.0], [0.0, 0.0, 5.0])]), Some([0.3, -0.2]));
        let two = [([0.0, 0.0, 0.0], [0.0, 0.0, 20.0]), ([1.0, 0.0, 0.0], [0.0, 0.0, 20.0])];
        assert_eq!(center_of_pressure(&two), Some([0.5, 0.0]));
        let skew = [([0.0, 0.0, 0.0], [0.0, 0.0, 10.0]), ([1.0, 0.0, 0.0], [0.0, 0.0, 30.0])];
        assert_eq!(center_of_pressure(&skew), Some([0.75, 0.0]));
        assert_eq!(center_of_pressure(&[([1.0, 1.0, 0.0], [3.0, 0.0, -2.0])]), None);
        assert_eq!(center_of_pressure(&[]), None);
    }

    #[test]
    fn cop_reward_cases() {
        let cfg = StabilityConfig::default();
        let centered = stance(RECT, [10.0; 4]);
        assert!((stability_reward_cop(&centered, &cfg) - 0.15).abs() < 1e-15);

        let flight = stance(RECT, [0.0; 4]);
        assert_eq!(stability_reward_cop(&flight, &cfg), 0.0);

        // Only two feet flagged in contact: degenerate polygon.
        let mut two = stance(RECT, [10.0; 4]);
        two.foot_contact = [true, false, false, true];
        assert_eq!(stability_reward_cop(&two, &cfg), 0.0);

        // A foot outside the stance triangle carries most of the load.
        let mut caught = stance([[0.2, -0.15], [0.2, 0.15], [-0.2, 0.0], [1.0, 0.0]], [1.0, 1.0, 1.0, 50.0]);
        caught.foot_contact = [true, true, true, false];
        assert_eq!(stability_reward_cop(&caught, &cfg), -1.0);
    }

    #[test]
    fn com_margin_cases() {
        let cfg = StabilityConfig::default();
        let mut s = stance(RECT, [10.0; 4]);
        assert!((static_margin_com(&s, &cfg) - 0.15).abs() < 1e-15);
        s.base_position = [0.2, 0.0, 0.35];
        assert_eq!(static_margin_com(&s, &cfg), 0.0);
        s.base_position = [0.5, 0.0, 0.35];
        assert_eq!(static_margin_com(&s, &cfg), -1.0);
    }

    #[test]
    fn capture_point_examples() {
        let cp = capture_point([0.1, 0.2], [0.0, 0.0], 0.35, 9.81).unwrap();
        assert_eq!(cp, [0.1, 0.2]);
        let cp = capture_point([0.0, 0.0], [1.0, 0.0], 0.35, 9.81).unwrap();
        assert!((cp[0] - 0.188_885_890_723_942).abs() < 1e-9);
        let cp2 = capture_point([0.0, 0.0], [2.0, 0.0], 0.35, 9.81).unwrap();
        assert!((cp2[0] - 2.0 * cp[0]).abs() < 1e-15);
        assert!(matches!(capture_point([0.0; 2], [1.0, 0.0], 0.0, 9.81), Err(Error::Domain(_))));
    }

    #[test]
    fn capture_point_uses_world_velocity() {
        let cfg = StabilityConfig::default();
        let mut s = stance(RECT, [10.0; 4]);
        s.base_yaw = std::f64::consts::FRAC_PI_2;
        s.base_lin_vel = [1.0, 0.0, 0.0];
        let cp = state_capture_point(&s, 0.0, &cfg).unwrap();
        assert!(cp[0].abs() < 1e-12 && (cp[1] - (0.35f64 / 9.81).sqrt()).abs() < 1e-12);
        let r = evaluate(&s, StabilityKind::CapturePoint, 0.0, &cfg).unwrap().unwrap();
        assert!(r.margin < 0.0);
        assert_eq!(dynamic_margin_cp(&s, 0.0, &cfg).unwrap(), -1.0);
    }
}
