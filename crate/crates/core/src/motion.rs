//! Rigid poses, trajectory sampling, and the built-in motion programs.
//!
//! Poses act on column vectors as `x' = R x + t`. 2D scenes are embedded in
//! the z = 0 plane: their rotations are about the z axis and translations
//! have zero z component, so grid cell centers stay in-plane.

use std::sync::Arc;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{CogenError, Result};

/// Tolerance for orthonormality, determinant, and inversion checks.
pub const POSE_TOL: f64 = 1e-9;

/// A rigid transformation: orthonormal rotation plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Build a pose, checking `R^T R = I` and `det R = +1` within
    /// [`POSE_TOL`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = Self { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let gram = self.rotation.transpose() * self.rotation;
        let dev = (gram - Matrix3::identity()).abs().max();
        if !dev.is_finite() || dev > POSE_TOL {
            return Err(CogenError::InvalidPose(format!(
                "rotation is not orthonormal (max deviation {dev:.3e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > POSE_TOL {
            return Err(CogenError::InvalidPose(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(CogenError::InvalidPose("translation is not finite".into()));
        }
        Ok(())
    }

    /// Pure translation.
    pub fn translation(t: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation: t }
    }

    /// Counter-clockwise rotation by `angle` about the z axis through the
    /// origin (the 2D rotation convention).
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation by `angle` about the x axis through the origin.
    pub fn rotation_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation about an arbitrary fixed point: `x' = R (x - c) + c`.
    pub fn rotation_about(rotation: Matrix3<f64>, center: Vector3<f64>) -> Self {
        Self { rotation, translation: center - rotation * center }
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// `self` after `other`: `(self ∘ other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }
}

/// A pose-valued function of normalized time `t` in `[0, 1]`.
pub type MotionFn = Arc<dyn Fn(f64) -> Pose + Send + Sync>;

/// The two bodies' motions with respect to a common frame of reference.
#[derive(Clone)]
pub struct MotionPair {
    pub body1: MotionFn,
    pub body2: MotionFn,
}

impl MotionPair {
    pub fn new(body1: MotionFn, body2: MotionFn) -> Self {
        Self { body1, body2 }
    }

    /// Sample the relative motion at `timesteps` midpoints.
    pub fn sample(&self, timesteps: usize) -> Result<Trajectory> {
        sample_relative_motion(self.body1.as_ref(), self.body2.as_ref(), timesteps)
    }
}

/// Midpoint-sampled relative poses of the two bodies.
///
/// `poses_12[k]` maps body-2 frame points into the body-1 frame at
/// `t_k = (k + 1/2) / K`; `poses_21[k]` is its inverse.
#[derive(Debug, Clone)]
pub struct Trajectory {
    timesteps: usize,
    delta: f64,
    poses_12: Vec<Pose>,
    poses_21: Vec<Pose>,
}

impl Trajectory {
    /// Build a trajectory from explicit pose legs. The lists must have the
    /// same nonzero length and be elementwise inverses.
    pub fn from_legs(poses_12: Vec<Pose>, poses_21: Vec<Pose>) -> Result<Self> {
        if poses_12.is_empty() || poses_12.len() != poses_21.len() {
            return Err(CogenError::Config(
                "trajectory legs must be non-empty and equally long".into(),
            ));
        }
        for (k, (a, b)) in poses_12.iter().zip(&poses_21).enumerate() {
            a.validate()?;
            b.validate()?;
            let round = a.compose(b);
            let dev = (round.rotation - Matrix3::identity())
                .abs()
                .max()
                .max(round.translation.norm());
            if dev > POSE_TOL {
                return Err(CogenError::InvalidPose(format!(
                    "legs are not inverses at step {k} (deviation {dev:.3e})"
                )));
            }
        }
        let timesteps = poses_12.len();
        Ok(Self { timesteps, delta: 1.0 / timesteps as f64, poses_12, poses_21 })
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    /// Timestep width `delta = 1 / K` in normalized time.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn poses_12(&self) -> &[Pose] {
        &self.poses_12
    }

    pub fn poses_21(&self) -> &[Pose] {
        &self.poses_21
    }

    /// Sample time of step `k`.
    pub fn time(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.delta
    }
}

/// Sample `tau_12(t_k) = tau_1(t_k)^-1 tau_2(t_k)` and its inverse at the
/// midpoint times `t_k = (k + 1/2) / K`. Every pose returned by the motion
/// functions is validated.
pub fn sample_relative_motion(
    motion1: &(dyn Fn(f64) -> Pose + Send + Sync),
    motion2: &(dyn Fn(f64) -> Pose + Send + Sync),
    timesteps: usize,
) -> Result<Trajectory> {
    if timesteps == 0 {
        return Err(CogenError::Config("trajectory needs at least one timestep".into()));
    }
    let delta = 1.0 / timesteps as f64;
    let mut poses_12 = Vec::with_capacity(timesteps);
    let mut poses_21 = Vec::with_capacity(timesteps);
    for k in 0..timesteps {
        let t = (k as f64 + 0.5) * delta;
        let p1 = motion1(t);
        let p2 = motion2(t);
        p1.validate().map_err(|e| annotate(e, 1, t))?;
        p2.validate().map_err(|e| annotate(e, 2, t))?;
        let rel = p1.inverse().compose(&p2);
        poses_21.push(rel.inverse());
        poses_12.push(rel);
    }
    Ok(Trajectory { timesteps, delta, poses_12, poses_21 })
}

fn annotate(err: CogenError, body: usize, t: f64) -> CogenError {
    match err {
        CogenError::InvalidPose(msg) => {
            CogenError::InvalidPose(format!("motion of body {body} at t = {t}: {msg}"))
        }
        other => other,
    }
}

/// Vertical center position of the 2D follower as a function of the cam
/// angle: `3L/4 + (L/8) cos(2 theta)`.
pub fn follower_height(length: f64, theta_cam: f64) -> f64 {
    0.75 * length + 0.125 * length * (2.0 * theta_cam).cos()
}

/// The built-in motion programs.
///
/// The 3D cam/follower and screw rotation matrices are taken verbatim from
/// their printed `[[cos, sin], [-sin, cos]]` form and applied as active
/// maps under this library's `x' = R x + t` convention.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinMotion {
    /// Both squares spin about their own centers, one full turn each in
    /// opposite directions: `theta_1 = 2 pi t`, `theta_2 = -2 pi t`.
    CounterRotation {
        center1: Vector3<f64>,
        center2: Vector3<f64>,
    },
    /// Cam rotates one full turn about the origin while the follower
    /// translates vertically with [`follower_height`].
    CamFollower2d { length: f64 },
    /// Cam rotates about z (`theta_C = 2 pi t`) and the follower rocks
    /// about x with `theta_F = |sin(theta_C)| / 2`.
    CamFollower3d,
    /// Body 1 (the bolt) turns `phi = 8 pi t` about z with coupled
    /// translation `-(L / 10 pi) phi` along z; body 2 (the nut) is
    /// stationary. Pitch `L / 5`, four full turns.
    Screw { length: f64 },
}

impl BuiltinMotion {
    pub fn build(&self) -> MotionPair {
        match self {
            BuiltinMotion::CounterRotation { center1, center2 } => {
                let (c1, c2) = (*center1, *center2);
                MotionPair::new(
                    Arc::new(move |t| {
                        Pose::rotation_about(Pose::rotation_z(2.0 * std::f64::consts::PI * t).rotation, c1)
                    }),
                    Arc::new(move |t| {
                        Pose::rotation_about(Pose::rotation_z(-2.0 * std::f64::consts::PI * t).rotation, c2)
                    }),
                )
            }
            BuiltinMotion::CamFollower2d { length } => {
                let length = *length;
                MotionPair::new(
                    Arc::new(|t| Pose::rotation_z(2.0 * std::f64::consts::PI * t)),
                    Arc::new(move |t| {
                        let theta = 2.0 * std::f64::consts::PI * t;
                        let dy = follower_height(length, theta) - follower_height(length, 0.0);
                        Pose::translation(Vector3::new(0.0, dy, 0.0))
                    }),
                )
            }
            BuiltinMotion::CamFollower3d => MotionPair::new(
                Arc::new(|t| {
                    let theta = 2.0 * std::f64::consts::PI * t;
                    let (s, c) = theta.sin_cos();
                    // printed cam matrix, applied as an active map
                    let r = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
                    Pose { rotation: r, translation: Vector3::zeros() }
                }),
                Arc::new(|t| {
                    let theta_c = 2.0 * std::f64::consts::PI * t;
                    let theta_f = 0.5 * theta_c.sin().abs();
                    let (s, c) = theta_f.sin_cos();
                    // printed follower matrix, applied as an active map
                    let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c);
                    Pose { rotation: r, translation: Vector3::zeros() }
                }),
            ),
            BuiltinMotion::Screw { length } => {
                let coeff = -length / (10.0 * std::f64::consts::PI);
                MotionPair::new(
                    Arc::new(move |t| {
                        let phi = 8.0 * std::f64::consts::PI * t;
                        let (s, c) = phi.sin_cos();
                        // printed screw matrix, applied as an active map
                        let r = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
                        Pose { rotation: r, translation: Vector3::new(0.0, 0.0, coeff * phi) }
                    }),
                    Arc::new(|_| Pose::identity()),
                )
            }
        }
    }
}

/// A timed pose sample for piecewise motion interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub time: f64,
    pub pose: Pose,
}

/// Piecewise-linear keyframe motion. Translations interpolate linearly;
/// rotations interpolate on the rotation group along the axis-angle of the
/// relative rotation between consecutive frames. Times must be strictly
/// increasing within `[0, 1]`; evaluation clamps outside the keyframe span.
pub fn keyframe_motion(frames: Vec<Keyframe>) -> Result<MotionFn> {
    if frames.is_empty() {
        return Err(CogenError::Config("keyframe motion needs at least one frame".into()));
    }
    for (i, f) in frames.iter().enumerate() {
        if !(0.0..=1.0).contains(&f.time) {
            return Err(CogenError::Config(format!(
                "keyframe {i} time {} lies outside [0, 1]",
                f.time
            )));
        }
        if i > 0 && !(f.time > frames[i - 1].time) {
            return Err(CogenError::Config(format!(
                "keyframe times must be strictly increasing, frame {i} has t = {}",
                f.time
            )));
        }
        f.pose
            .validate()
            .map_err(|e| CogenError::Config(format!("keyframe {i}: {e}")))?;
    }
    let quats: Vec<UnitQuaternion<f64>> = frames
        .iter()
        .map(|f| UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(f.pose.rotation)))
        .collect();
    for i in 1..quats.len() {
        let angle = quats[i - 1].angle_to(&quats[i]);
        if angle > std::f64::consts::PI - 1e-6 {
            return Err(CogenError::Config(format!(
                "rotation step between keyframes {} and {} is a half turn; the interpolation axis is ambiguous",
                i - 1,
                i
            )));
        }
    }
    Ok(Arc::new(move |t| {
        if t <= frames[0].time || frames.len() == 1 {
            return frames[0].pose;
        }
        if t >= frames.last().unwrap().time {
            return frames.last().unwrap().pose;
        }
        let hi = frames.partition_point(|f| f.time <= t);
        let (a, b) = (&frames[hi - 1], &frames[hi]);
        let s = (t - a.time) / (b.time - a.time);
        let q = quats[hi - 1].slerp(&quats[hi], s);
        Pose {
            rotation: q.to_rotation_matrix().into_inner(),
            translation: a.pose.translation.lerp(&b.pose.translation, s),
        }
    }))
}
