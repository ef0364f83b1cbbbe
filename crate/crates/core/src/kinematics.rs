//! Six-joint serial arm carrying the panel.
//!
//! Forward kinematics uses the standard Denavit-Hartenberg convention
//! `Rz(θ) · Tz(d) · Tx(a) · Rx(α)`. The alignment solver only constrains the
//! panel normal (a direction, two degrees of freedom), so it descends the
//! scalar angle between normal and sun instead of solving full pose IK; the
//! redundant joints simply stay near the starting configuration.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::Vec3;

pub const JOINTS: usize = 6;

const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("DH row {row} has a non-finite entry")]
    NonFinite { row: usize },
    #[error("joint {joint} limits [{min}, {max}] are not increasing")]
    Limits { joint: usize, min: f64, max: f64 },
    #[error("panel_axis must have unit norm, got {0}")]
    PanelAxis(f64),
}

/// One Denavit-Hartenberg row: link length, twist, offset and joint-angle offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

impl DhRow {
    pub const fn new(a: f64, alpha: f64, d: f64, theta_offset: f64) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
        }
    }

    fn transform(&self, q: f64) -> Matrix4<f64> {
        let (st, ct) = (q + self.theta_offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        Matrix4::new(
            ct, -st * ca, st * sa, self.a * ct, //
            st, ct * ca, -ct * sa, self.a * st, //
            0.0, sa, ca, self.d, //
            0.0, 0.0, 0.0, 1.0,
        )
    }
}

/// Joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState(pub [f64; JOINTS]);

impl JointState {
    pub fn zeros() -> Self {
        Self([0.0; JOINTS])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArmModel", into = "RawArmModel")]
pub struct ArmModel {
    rows: [DhRow; JOINTS],
    joint_limits: [(f64, f64); JOINTS],
    panel_axis: Vec3,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArmModel {
    rows: [DhRow; JOINTS],
    joint_limits: [(f64, f64); JOINTS],
    panel_axis: [f64; 3],
}

impl TryFrom<RawArmModel> for ArmModel {
    type Error = KinematicsError;
    fn try_from(raw: RawArmModel) -> Result<Self, Self::Error> {
        ArmModel::new(raw.rows, raw.joint_limits, Vector3::from(raw.panel_axis))
    }
}

impl From<ArmModel> for RawArmModel {
    fn from(m: ArmModel) -> Self {
        RawArmModel {
            rows: m.rows,
            joint_limits: m.joint_limits,
            panel_axis: m.panel_axis.into(),
        }
    }
}

impl Default for ArmModel {
    /// Generic 6R desk arm; a stand-in geometry, not a measured robot.
    fn default() -> Self {
        let rows = [
            DhRow::new(0.0, FRAC_PI_2, 0.10, 0.0),
            DhRow::new(0.25, 0.0, 0.0, 0.0),
            DhRow::new(0.05, FRAC_PI_2, 0.0, 0.0),
            DhRow::new(0.0, -FRAC_PI_2, 0.20, 0.0),
            DhRow::new(0.0, FRAC_PI_2, 0.0, 0.0),
            DhRow::new(0.0, 0.0, 0.08, 0.0),
        ];
        let mut joint_limits = [(-PI, PI); JOINTS];
        joint_limits[1] = (-FRAC_PI_2, FRAC_PI_2);
        Self {
            rows,
            joint_limits,
            panel_axis: Vector3::z(),
        }
    }
}

impl ArmModel {
    pub fn new(
        rows: [DhRow; JOINTS],
        joint_limits: [(f64, f64); JOINTS],
        panel_axis: Vec3,
    ) -> Result<Self, KinematicsError> {
        for (row, r) in rows.iter().enumerate() {
            if ![r.a, r.alpha, r.d, r.theta_offset].iter().all(|v| v.is_finite()) {
                return Err(KinematicsError::NonFinite { row });
            }
        }
        for (joint, &(min, max)) in joint_limits.iter().enumerate() {
            if !(min < max) {
                return Err(KinematicsError::Limits { joint, min, max });
            }
        }
        let norm = panel_axis.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(KinematicsError::PanelAxis(norm));
        }
        Ok(Self {
            rows,
            joint_limits,
            panel_axis,
        })
    }

    pub fn rows(&self) -> &[DhRow; JOINTS] {
        &self.rows
    }

    pub fn joint_limits(&self) -> &[(f64, f64); JOINTS] {
        &self.joint_limits
    }

    pub fn panel_axis(&self) -> Vec3 {
        self.panel_axis
    }

    pub fn clamp(&self, q: JointState) -> JointState {
        let mut out = q.0;
        for (v, &(lo, hi)) in out.iter_mut().zip(&self.joint_limits) {
            *v = v.clamp(lo, hi);
        }
        JointState(out)
    }

    pub fn within_limits(&self, q: &JointState) -> bool {
        q.0.iter()
            .zip(&self.joint_limits)
            .all(|(v, &(lo, hi))| (lo..=hi).contains(v))
    }

    /// Maps each joint angle to `[-1, 1]` across its limit range.
    pub fn normalized(&self, q: &JointState) -> [f64; JOINTS] {
        let mut out = [0.0; JOINTS];
        for (i, (v, &(lo, hi))) in q.0.iter().zip(&self.joint_limits).enumerate() {
            out[i] = (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        }
        out
    }
}

pub fn forward_kinematics(m: &ArmModel, q: &JointState) -> Pose {
    let t = m
        .rows
        .iter()
        .zip(q.0.iter())
        .fold(Matrix4::identity(), |acc, (row, &qi)| acc * row.transform(qi));
    Pose {
        rotation: t.fixed_view::<3, 3>(0, 0).into_owned(),
        translation: t.fixed_view::<3, 1>(0, 3).into_owned(),
    }
}

pub fn panel_normal(m: &ArmModel, q: &JointState) -> Vec3 {
    forward_kinematics(m, q).rotation * m.panel_axis
}

/// Angle between two unit vectors, in `[0, π]`.
///
/// Equal to `acos(clamp(n·s, -1, 1))`; evaluated through `atan2` so that
/// small angles keep full precision for the finite-difference Jacobian.
pub fn alignment_error(n: &Vec3, s: &Vec3) -> f64 {
    n.cross(s).norm().atan2(n.dot(s))
}

/// Central-difference gradient of the alignment error with respect to the joints.
pub fn numeric_jacobian(m: &ArmModel, q: &JointState, s: &Vec3) -> [f64; JOINTS] {
    let mut grad = [0.0; JOINTS];
    for (j, g) in grad.iter_mut().enumerate() {
        let mut plus = *q;
        let mut minus = *q;
        plus.0[j] += JACOBIAN_STEP;
        minus.0[j] -= JACOBIAN_STEP;
        let ep = alignment_error(&panel_normal(m, &plus), s);
        let em = alignment_error(&panel_normal(m, &minus), s);
        *g = (ep - em) / (2.0 * JACOBIAN_STEP);
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentSolution {
    pub joints: JointState,
    pub error_rad: f64,
    pub iterations: usize,
}

/// Damped descent of the panel-to-sun angle starting from `q0`.
///
/// Each iteration proposes the Gauss-Newton root step `-e·g / (|g|² + λ)`.
/// A step is accepted only if the clamped candidate lowers the error; a
/// rejection multiplies λ, an acceptance relaxes it. Returns the first iterate
/// within `tol_rad`, otherwise the best iterate seen.
///
/// Joints pinned at their limits can trap the descent above `tol_rad`. In
/// that case the remaining iterations go to descents from a fixed set of
/// non-singular restart poses; `max_iters` bounds all descents together.
pub fn solve_alignment(
    m: &ArmModel,
    q0: &JointState,
    s: &Vec3,
    tol_rad: f64,
    max_iters: usize,
) -> AlignmentSolution {
    let mut best = descend(m, m.clamp(*q0), s, tol_rad, max_iters);
    let mut used = best.iterations;
    for k in 0..RESTARTS {
        if best.error_rad <= tol_rad || used >= max_iters {
            break;
        }
        let sol = descend(m, m.clamp(restart_pose(k)), s, tol_rad, max_iters - used);
        used += sol.iterations;
        if sol.error_rad < best.error_rad {
            best = sol;
        }
    }
    best.iterations = used;
    best
}

const RESTARTS: usize = 8;

/// Base yaw spread over the circle, shoulder alternating, wrist bent away
/// from the singular straight pose.
fn restart_pose(k: usize) -> JointState {
    let base = -PI + PI * (k as f64 + 0.5) / 4.0;
    let shoulder = if k % 2 == 0 { 0.4 } else { -0.4 };
    JointState([base, shoulder, 0.6, 0.0, 0.9, 0.0])
}

fn descend(m: &ArmModel, start: JointState, s: &Vec3, tol_rad: f64, max_iters: usize) -> AlignmentSolution {
    let mut q = start;
    let mut err = alignment_error(&panel_normal(m, &q), s);
    let mut lambda = 1e-3;
    let mut iterations = 0;

    while err > tol_rad && iterations < max_iters {
        iterations += 1;
        let grad = numeric_jacobian(m, &q, s);
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 < 1e-20 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let scale = err / (g2 + lambda);
            let mut cand = q;
            for (c, g) in cand.0.iter_mut().zip(&grad) {
                *c -= scale * g;
            }
            let cand = m.clamp(cand);
            let cand_err = alignment_error(&panel_normal(m, &cand), s);
            if cand_err < err {
                q = cand;
                err = cand_err;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                break;
            }
            lambda = lambda * 4.0 + 1e-6;
        }
        if !accepted {
            break;
        }
    }

    AlignmentSolution {
        joints: q,
        error_rad: err,
        iterations,
    }
}
