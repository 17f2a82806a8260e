//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use locokernel::control::{Leg, LegGeometry};
use locokernel::harness::{EpisodeStatus, LogMeta, RandomizedParams, StepRecord, TrajectoryLog};
use locokernel::terrain::{AtomicKind, TerrainSpec};
use locokernel::control::CommandSample;
use nalgebra::{Matrix4, Rotation3, Translation3, Vector3};

pub const W: f64 = 10.0;
pub const SIGMA: f64 = 0.1;

/// Gaussian bump written out from its definition.
pub fn gaussian(foot: [f64; 2], cell: [f64; 2]) -> f64 {
    let dx = foot[0] - cell[0];
    let dy = foot[1] - cell[1];
    W * (-(dx * dx + dy * dy) / (2.0 * SIGMA * SIGMA)).exp()
}

fn orient(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Hull vertices by testing every ordered pair as a candidate edge: `(i, j)`
/// is a hull edge when every other point lies strictly to its left.
pub fn brute_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut verts: Vec<[f64; 2]> = Vec::new();
    for (i, &a) in points.iter().enumerate() {
        for (j, &b) in points.iter().enumerate() {
            if i == j || a == b {
                continue;
            }
            let all_left = points
                .iter()
                .enumerate()
                .filter(|&(k, &p)| k != i && k != j && p != a && p != b)
                .all(|(_, &p)| orient(a, b, p) > 0.0);
            if all_left {
                for v in [a, b] {
                    if !verts.contains(&v) {
                        verts.push(v);
                    }
                }
            }
        }
    }
    verts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    verts
}

/// Even-odd ray casting.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance to a segment by sampling it densely, then repeatedly resampling
/// around the best sample. The distance along a segment is convex, so the
/// bracket always holds the minimum.
pub fn sampled_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    const SAMPLES: usize = 400;
    let dist = |t: f64| {
        let x = a[0] + t * (b[0] - a[0]);
        let y = a[1] + t * (b[1] - a[1]);
        (x - p[0]).hypot(y - p[1])
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = f64::INFINITY;
    for _ in 0..5 {
        let step = (hi - lo) / SAMPLES as f64;
        let mut best_t = lo;
        for k in 0..=SAMPLES {
            let t = lo + step * k as f64;
            let d = dist(t);
            if d < best {
                best = d;
                best_t = t;
            }
        }
        lo = (best_t - step).max(0.0);
        hi = (best_t + step).min(1.0);
    }
    best
}

/// Signed margin: positive inside, from sampled edge distances and ray casting.
pub fn sampled_margin(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let d = (0..n)
        .map(|i| sampled_segment_distance(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min);
    if point_in_polygon(p, poly) {
        d
    } else {
        -d
    }
}

/// Foot position from a chain of homogeneous transforms.
pub fn fk_chain(geom: &LegGeometry, leg: Leg, q: [f64; 3]) -> [f64; 3] {
    let sx = if leg.is_front() { 1.0 } else { -1.0 };
    let sy = if leg.is_left() { 1.0 } else { -1.0 };
    let hip = Vector3::new(sx * geom.hip_offset[0].abs(), sy * geom.hip_offset[1].abs(), geom.hip_offset[2]);
    let rot = |axis: Vector3<f64>, angle: f64| -> Matrix4<f64> {
        Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).to_homogeneous()
    };
    let trans = |x: f64, y: f64, z: f64| -> Matrix4<f64> { Translation3::new(x, y, z).to_homogeneous() };
    let t = trans(hip.x, hip.y, hip.z)
        * rot(Vector3::x(), q[0])
        * trans(0.0, sy * geom.abduction_offset, 0.0)
        * rot(Vector3::y(), q[1])
        * trans(0.0, 0.0, -geom.thigh)
        * rot(Vector3::y(), q[2])
        * trans(0.0, 0.0, -geom.calf);
    let p = t * nalgebra::Vector4::new(0.0, 0.0, 0.0, 1.0);
    [p.x, p.y, p.z]
}

/// A log whose base moves in a straight line from the origin to
/// `(distance, 0)`, optionally with base contact at step `contact_at`.
pub fn straight_log(speed: f64, duration: f64, distance: f64, contact_at: Option<usize>, status: EpisodeStatus) -> TrajectoryLog {
    let dt = 0.02;
    let n = (duration / dt).round() as usize;
    let steps = (0..n)
        .map(|k| {
            let frac = (k + 1) as f64 / n as f64;
            StepRecord {
                t: (k + 1) as f64 * dt,
                base_position: [distance * frac, 0.0, 0.28],
                v_local: [distance / duration, 0.0, 0.0],
                command: [speed, 0.0, 0.0],
                base_contact: contact_at == Some(k),
                ..Default::default()
            }
        })
        .collect();
    TrajectoryLog {
        meta: LogMeta {
            terrain: TerrainSpec::new(AtomicKind::Smooth, 0, 0),
            command: CommandSample::forward(speed),
            dt,
            seed: 0,
            duration,
            spawn: [0.0, 0.0, 0.28],
            policy: "oracle".into(),
            params: RandomizedParams::nominal(),
            status,
        },
        steps,
    }
}
