//! Serial-chain forward kinematics and a damped-least-squares IK solver.
//!
//! Every joint is revolute. A joint's fixed `origin` transform is applied
//! first, then the rotation about its local `axis`.

use nalgebra::{DMatrix, DVector, Unit, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::model::Pose;

pub const PLANAR3_FIXTURE: &str = include_str!("../fixtures/planar3.json");
pub const ARM6_FIXTURE: &str = include_str!("../fixtures/arm6.json");

/// World-frame axis and origin of one joint.
type JointFrame = (Vector3<f64>, Vector3<f64>);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("joint {joint}: axis norm {norm} is not 1")]
    Axis { joint: String, norm: f64 },
    #[error("joint {joint}: limits [{min}, {max}] are empty")]
    Limits { joint: String, min: f64, max: f64 },
    #[error("home has {actual} values, chain has {expected} joints")]
    Home { expected: usize, actual: usize },
    #[error("home value {value} for joint {joint} is outside its limits")]
    HomeOutOfLimits { joint: String, value: f64 },
    #[error("expected {expected} joint values, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("chain file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainJoint {
    pub name: String,
    /// Fixed transform from the previous joint frame.
    pub origin: Pose,
    /// Rotation axis in the joint's own frame.
    pub axis: [f64; 3],
    /// `[min, max]` in radians; absent for continuous joints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
}

impl ChainJoint {
    pub fn clamp(&self, q: f64) -> f64 {
        match self.limits {
            Some([lo, hi]) => q.clamp(lo, hi),
            None => q,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainFile {
    id: String,
    joints: Vec<ChainJoint>,
    #[serde(default)]
    tool: Option<Pose>,
    #[serde(default)]
    home: Option<Vec<f64>>,
}

/// An immutable serial chain. Construct through [`KinematicChain::new`] or
/// [`KinematicChain::from_json`] so the invariants are checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainFile", into = "ChainFile")]
pub struct KinematicChain {
    id: String,
    joints: Vec<ChainJoint>,
    tool: Pose,
    home: Vec<f64>,
}

impl TryFrom<ChainFile> for KinematicChain {
    type Error = ChainError;

    fn try_from(f: ChainFile) -> Result<Self, Self::Error> {
        KinematicChain::new(f.id, f.joints, f.tool.unwrap_or_default(), f.home)
    }
}

impl From<KinematicChain> for ChainFile {
    fn from(c: KinematicChain) -> Self {
        ChainFile {
            id: c.id,
            joints: c.joints,
            tool: Some(c.tool),
            home: Some(c.home),
        }
    }
}

impl KinematicChain {
    pub fn new(
        id: impl Into<String>,
        joints: Vec<ChainJoint>,
        tool: Pose,
        home: Option<Vec<f64>>,
    ) -> Result<Self, ChainError> {
        for j in &joints {
            let norm = Vector3::from(j.axis).norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(ChainError::Axis {
                    joint: j.name.clone(),
                    norm,
                });
            }
            if let Some([min, max]) = j.limits
                && !(min < max) {
                    return Err(ChainError::Limits {
                        joint: j.name.clone(),
                        min,
                        max,
                    });
                }
        }
        let home = home.unwrap_or_else(|| joints.iter().map(|j| j.clamp(0.0)).collect());
        if home.len() != joints.len() {
            return Err(ChainError::Home {
                expected: joints.len(),
                actual: home.len(),
            });
        }
        for (j, &v) in joints.iter().zip(&home) {
            if j.clamp(v) != v {
                return Err(ChainError::HomeOutOfLimits {
                    joint: j.name.clone(),
                    value: v,
                });
            }
        }
        Ok(Self {
            id: id.into(),
            joints,
            tool,
            home,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ChainError> {
        serde_json::from_str(text).map_err(|e| ChainError::Parse(e.to_string()))
    }

    /// The bundled three-link planar chain.
    pub fn planar3() -> Self {
        Self::from_json(PLANAR3_FIXTURE).expect("bundled fixture")
    }

    /// The bundled six-joint arm.
    pub fn arm6() -> Self {
        Self::from_json(ARM6_FIXTURE).expect("bundled fixture")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn joints(&self) -> &[ChainJoint] {
        &self.joints
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn home(&self) -> &[f64] {
        &self.home
    }

    pub fn tool(&self) -> &Pose {
        &self.tool
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = j.clamp(*v);
        }
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && q.iter().zip(&self.joints).all(|(&v, j)| j.clamp(v) == v)
    }

    fn check_len(&self, q: &[f64]) -> Result<(), ChainError> {
        if q.len() != self.dof() {
            return Err(ChainError::Dimension {
                expected: self.dof(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    /// Walks the chain, returning the end-effector transform and, per joint,
    /// the world-frame axis and origin.
    fn walk(&self, q: &[f64]) -> (Iso, Vec<JointFrame>) {
        let mut t = Iso::identity();
        let mut frames = Vec::with_capacity(self.dof());
        for (joint, &angle) in self.joints.iter().zip(q) {
            t = t.then(&Iso::from_pose(&joint.origin));
            let axis = Unit::new_unchecked(Vector3::from(joint.axis));
            frames.push((t.rot * axis.into_inner(), t.pos));
            t.rot *= UnitQuaternion::from_axis_angle(&axis, angle);
        }
        (t.then(&Iso::from_pose(&self.tool)), frames)
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose, ChainError> {
        self.check_len(q)?;
        Ok(self.walk(q).0.to_pose())
    }

    /// Geometric Jacobian: rows 0..3 linear velocity, rows 3..6 angular
    /// velocity of the end effector, both in the base frame.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>, ChainError> {
        self.check_len(q)?;
        let (end, frames) = self.walk(q);
        let mut jac = DMatrix::zeros(6, self.dof());
        for (i, (axis, origin)) in frames.iter().enumerate() {
            let lin = axis.cross(&(end.pos - origin));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(axis);
        }
        Ok(jac)
    }
}

#[derive(Debug, Clone, Copy)]
struct Iso {
    pos: Vector3<f64>,
    rot: UnitQuaternion<f64>,
}

impl Iso {
    fn identity() -> Self {
        Self {
            pos: Vector3::zeros(),
            rot: UnitQuaternion::identity(),
        }
    }

    fn from_pose(p: &Pose) -> Self {
        Self {
            pos: p.translation(),
            rot: p.rotation(),
        }
    }

    fn then(&self, next: &Iso) -> Iso {
        Iso {
            pos: self.pos + self.rot * next.pos,
            rot: self.rot * next.rot,
        }
    }

    fn to_pose(self) -> Pose {
        Pose::from_parts(self.pos, self.rot)
    }
}

/// Rotation vector taking `from` onto `to`, expressed in the base frame,
/// with angle in `[0, pi]`.
pub fn rotation_error(to: &UnitQuaternion<f64>, from: &UnitQuaternion<f64>) -> Vector3<f64> {
    let mut q = (to * from.inverse()).into_inner();
    if q.w < 0.0 {
        q = -q;
    }
    let v = q.imag();
    let s = v.norm();
    if s < 1e-12 {
        return 2.0 * v;
    }
    v * (2.0 * s.atan2(q.w) / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkSettings {
    /// Damping factor lambda.
    pub damping: f64,
    pub max_iterations: usize,
    /// Meters.
    pub position_tolerance: f64,
    /// Radians.
    pub orientation_tolerance: f64,
    /// Weight of the orientation rows; 0 solves for position only.
    pub orientation_weight: f64,
}

impl Default for IkSettings {
    fn default() -> Self {
        Self {
            damping: 0.1,
            max_iterations: 50,
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
            orientation_weight: 0.5,
        }
    }
}

impl IkSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.damping > 0.0) {
            return Err(format!("damping must be > 0, got {}", self.damping));
        }
        if self.max_iterations < 1 {
            return Err("max_iterations must be >= 1".into());
        }
        if !(self.position_tolerance > 0.0) || !(self.orientation_tolerance > 0.0) {
            return Err("tolerances must be > 0".into());
        }
        if !(self.orientation_weight >= 0.0) {
            return Err("orientation_weight must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkResidual {
    /// Meters.
    pub position: f64,
    /// Radians; zero when orientation is ignored.
    pub orientation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: Vec<f64>,
    pub converged: bool,
    pub residual: IkResidual,
    pub iterations: usize,
}

/// One damped-least-squares update `J^T (J J^T + lambda^2 I)^-1 e`.
pub fn dls_step(jacobian: &DMatrix<f64>, error: &Vector6<f64>, damping: f64) -> DVector<f64> {
    let rows = jacobian.nrows();
    let jjt = jacobian * jacobian.transpose() + DMatrix::identity(rows, rows) * (damping * damping);
    let e = DVector::from_column_slice(error.as_slice());
    // With tiny damping the system can be numerically singular; fall back
    // to a pseudo-inverse solve.
    let y = match jjt.clone().cholesky() {
        Some(c) => c.solve(&e),
        None => jjt
            .svd(true, true)
            .solve(&e, 1e-12)
            .expect("SVD was computed with U and V"),
    };
    jacobian.transpose() * y
}

struct Evaluated {
    error: Vector6<f64>,
    residual: IkResidual,
}

fn evaluate(chain: &KinematicChain, q: &[f64], target: &Pose, w: f64) -> Evaluated {
    let current = chain.walk(q).0;
    let dp = target.translation() - current.pos;
    let dr = if w > 0.0 {
        rotation_error(&target.rotation(), &current.rot)
    } else {
        Vector3::zeros()
    };
    let mut error = Vector6::zeros();
    error.fixed_rows_mut::<3>(0).copy_from(&dp);
    error.fixed_rows_mut::<3>(3).copy_from(&(dr * w));
    Evaluated {
        error,
        residual: IkResidual {
            position: dp.norm(),
            orientation: dr.norm(),
        },
    }
}

/// Solves for joint angles reaching `target`, starting from `seed`.
///
/// Returns the best configuration seen. Failing to converge is reported in
/// the result, not as an error.
pub fn solve_ik(
    chain: &KinematicChain,
    target: &Pose,
    seed: &[f64],
    settings: &IkSettings,
) -> Result<IkSolution, ChainError> {
    chain.check_len(seed)?;
    let w = settings.orientation_weight;
    let converged = |r: &IkResidual| {
        r.position < settings.position_tolerance && (w == 0.0 || r.orientation < settings.orientation_tolerance)
    };

    let mut q = seed.to_vec();
    chain.clamp(&mut q);
    let mut eval = evaluate(chain, &q, target, w);
    let mut best = (q.clone(), eval.residual, eval.error.norm());
    let mut iterations = 0;
    while !converged(&eval.residual) && iterations < settings.max_iterations {
        let mut jac = chain.jacobian(&q)?;
        for mut row in jac.rows_mut(3, 3).row_iter_mut() {
            row *= w;
        }
        let dq = dls_step(&jac, &eval.error, settings.damping);
        for (v, d) in q.iter_mut().zip(dq.iter()) {
            *v += d;
        }
        chain.clamp(&mut q);
        iterations += 1;
        eval = evaluate(chain, &q, target, w);
        let cost = eval.error.norm();
        if converged(&eval.residual) || cost < best.2 {
            best = (q.clone(), eval.residual, cost);
        }
    }
    let (q, residual, _) = best;
    Ok(IkSolution {
        converged: converged(&residual),
        q,
        residual,
        iterations,
    })
}
