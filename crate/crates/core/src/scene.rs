//! Scene configuration: the JSON schema, validation with JSON-pointer
//! error paths, and construction of grids, fields, and motion programs.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CogenError, Result};
use crate::geometry::{rasterize, DensityField, Grid, ShapeSpec};
use crate::motion::{keyframe_motion, BuiltinMotion, Keyframe, MotionPair, Pose, Trajectory};
use crate::optimizer::OptimizerConfig;

pub const DEFAULT_SUPERSAMPLE: u32 = 8;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A validated scene: two bodies with their design domains and initial
/// shapes, the motion program, and run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub dim: usize,
    pub grid1: Grid,
    pub grid2: Grid,
    pub shape1: ShapeSpec,
    pub shape2: ShapeSpec,
    pub motion: MotionConfig,
    pub timesteps: usize,
    /// One or more volume-ratio values to run.
    pub gammas: Vec<f64>,
    pub optimizer: OptimizerConfig,
    pub output_dir: PathBuf,
    pub cache_path: Option<PathBuf>,
    pub supersample: u32,
}

/// The motion program of a scene.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionConfig {
    Builtin(BuiltinMotion),
    Keyframes { body1: Vec<Keyframe>, body2: Vec<Keyframe> },
}

impl SceneConfig {
    /// Parse and validate a scene file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CogenError::Config(format!("cannot read scene file {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    /// Parse and validate a scene from JSON text. Errors name the offending
    /// field by its JSON pointer.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: SceneFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer: String = e
                .path()
                .iter()
                .map(|seg| format!("/{seg}"))
                .collect::<Vec<_>>()
                .join("");
            let pointer = if pointer.is_empty() { "/".to_string() } else { pointer };
            CogenError::Config(format!("{pointer}: {}", e.inner()))
        })?;
        file.validate()
    }

    /// Serialize back to the scene JSON schema. Parsing the output yields an
    /// equal configuration.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&SceneFile::from_config(self)).expect("scene serializes")
    }

    /// The two bodies' pose programs.
    pub fn motion_pair(&self) -> Result<MotionPair> {
        match &self.motion {
            MotionConfig::Builtin(b) => Ok(b.build()),
            MotionConfig::Keyframes { body1, body2 } => Ok(MotionPair::new(
                keyframe_motion(body1.clone())?,
                keyframe_motion(body2.clone())?,
            )),
        }
    }

    /// Midpoint-sampled relative trajectory at the scene's timestep count.
    pub fn trajectory(&self) -> Result<Trajectory> {
        self.motion_pair()?.sample(self.timesteps)
    }

    /// Rasterize both initial designs onto their grids.
    pub fn initial_fields(&self) -> (DensityField, DensityField) {
        (
            rasterize(&self.shape1, &self.grid1, self.supersample),
            rasterize(&self.shape2, &self.grid2, self.supersample),
        )
    }
}

// ---------------------------------------------------------------------------
// file schema

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    dimension: usize,
    body1: BodyFile,
    body2: BodyFile,
    motion: MotionFile,
    timesteps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cache_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    supersample: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyFile {
    domain: DomainFile,
    shape: ShapeFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    origin: Vec<f64>,
    dims: Vec<usize>,
    spacing: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum ShapeFile {
    Box { min: Vec<f64>, max: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Cylinder { point: Vec<f64>, axis: Vec<f64>, radius: f64, half_length: f64 },
    Union(Vec<ShapeFile>),
    Intersection(Vec<ShapeFile>),
    Difference(Box<ShapeFile>, Box<ShapeFile>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum MotionFile {
    Builtin(BuiltinFile),
    Keyframes { body1: Vec<KeyframeFile>, body2: Vec<KeyframeFile> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
enum BuiltinFile {
    CounterRotation { center1: Vec<f64>, center2: Vec<f64> },
    #[serde(rename = "cam_follower_2d")]
    CamFollower2d { length: f64 },
    #[serde(rename = "cam_follower_3d")]
    CamFollower3d,
    Screw { length: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyframeFile {
    t: f64,
    /// Row-major d x d rotation matrix.
    rotation: Vec<Vec<f64>>,
    translation: Vec<f64>,
}

fn fail(pointer: &str, msg: impl std::fmt::Display) -> CogenError {
    CogenError::Config(format!("{pointer}: {msg}"))
}

/// Lift a d-component vector to the internal 3D representation (z = 0).
fn lift_vector(v: &[f64], dim: usize, pointer: &str) -> Result<Vector3<f64>> {
    if v.len() != dim {
        return Err(fail(pointer, format!("expected {dim} components, got {}", v.len())));
    }
    Ok(match dim {
        2 => Vector3::new(v[0], v[1], 0.0),
        _ => Vector3::new(v[0], v[1], v[2]),
    })
}

impl SceneFile {
    fn validate(self) -> Result<SceneConfig> {
        let dim = self.dimension;
        if dim != 2 && dim != 3 {
            return Err(fail("/dimension", format!("must be 2 or 3, got {dim}")));
        }
        if self.timesteps == 0 {
            return Err(fail("/timesteps", "must be at least 1"));
        }
        let grid1 = self.body1.domain.build(dim, "/body1/domain")?;
        let grid2 = self.body2.domain.build(dim, "/body2/domain")?;
        let shape1 = self.body1.shape.build(dim, "/body1/shape")?;
        let shape2 = self.body2.shape.build(dim, "/body2/shape")?;
        shape1.validate(dim).map_err(|e| fail("/body1/shape", e))?;
        shape2.validate(dim).map_err(|e| fail("/body2/shape", e))?;
        let motion = self.motion.build(dim)?;

        let gammas = match (self.gamma, &self.gammas) {
            (Some(_), Some(_)) => {
                return Err(fail("/gamma", "provide either gamma or gammas, not both"));
            }
            (Some(g), None) => vec![g],
            (None, Some(list)) if !list.is_empty() => list.clone(),
            (None, Some(_)) => return Err(fail("/gammas", "must not be empty")),
            (None, None) => vec![0.5],
        };
        for (i, g) in gammas.iter().enumerate() {
            if !(0.0..=1.0).contains(g) {
                return Err(fail(&format!("/gammas/{i}"), format!("gamma {g} lies outside [0, 1]")));
            }
        }

        let mut optimizer = self
            .optimizer
            .map(|o| o.apply(OptimizerConfig::default()))
            .unwrap_or_default();
        optimizer.gamma = gammas[0];
        optimizer.validate().map_err(|e| fail("/optimizer", e))?;

        let supersample = self.supersample.unwrap_or(DEFAULT_SUPERSAMPLE);
        if supersample == 0 {
            return Err(fail("/supersample", "must be at least 1"));
        }

        Ok(SceneConfig {
            dim,
            grid1,
            grid2,
            shape1,
            shape2,
            motion,
            timesteps: self.timesteps,
            gammas,
            optimizer,
            output_dir: PathBuf::from(self.output_dir.unwrap_or_else(|| "out".into())),
            cache_path: self.cache_path.map(PathBuf::from),
            supersample,
        })
    }

    fn from_config(config: &SceneConfig) -> Self {
        let dim = config.dim;
        let drop = |v: Vector3<f64>| -> Vec<f64> {
            if dim == 2 {
                vec![v.x, v.y]
            } else {
                vec![v.x, v.y, v.z]
            }
        };
        let domain_of = |grid: &Grid| DomainFile {
            origin: if dim == 2 {
                vec![grid.origin().x, grid.origin().y]
            } else {
                drop(grid.origin())
            },
            dims: grid.dims()[..dim].to_vec(),
            spacing: grid.spacing(),
        };
        let motion = match &config.motion {
            MotionConfig::Builtin(b) => MotionFile::Builtin(match b {
                BuiltinMotion::CounterRotation { center1, center2 } => BuiltinFile::CounterRotation {
                    center1: drop(*center1),
                    center2: drop(*center2),
                },
                BuiltinMotion::CamFollower2d { length } => {
                    BuiltinFile::CamFollower2d { length: *length }
                }
                BuiltinMotion::CamFollower3d => BuiltinFile::CamFollower3d,
                BuiltinMotion::Screw { length } => BuiltinFile::Screw { length: *length },
            }),
            MotionConfig::Keyframes { body1, body2 } => MotionFile::Keyframes {
                body1: body1.iter().map(|k| KeyframeFile::from_keyframe(k, dim)).collect(),
                body2: body2.iter().map(|k| KeyframeFile::from_keyframe(k, dim)).collect(),
            },
        };
        SceneFile {
            dimension: dim,
            body1: BodyFile {
                domain: domain_of(&config.grid1),
                shape: ShapeFile::from_shape(&config.shape1, dim),
            },
            body2: BodyFile {
                domain: domain_of(&config.grid2),
                shape: ShapeFile::from_shape(&config.shape2, dim),
            },
            motion,
            timesteps: config.timesteps,
            gamma: if config.gammas.len() == 1 { Some(config.gammas[0]) } else { None },
            gammas: if config.gammas.len() == 1 { None } else { Some(config.gammas.clone()) },
            optimizer: Some(OptimizerFile::from_config(&config.optimizer)),
            output_dir: Some(config.output_dir.display().to_string()),
            cache_path: config.cache_path.as_ref().map(|p| p.display().to_string()),
            supersample: Some(config.supersample),
        }
    }
}

impl DomainFile {
    fn build(&self, dim: usize, pointer: &str) -> Result<Grid> {
        if self.origin.len() != dim {
            return Err(fail(
                &format!("{pointer}/origin"),
                format!("expected {dim} components, got {}", self.origin.len()),
            ));
        }
        if self.dims.len() != dim {
            return Err(fail(
                &format!("{pointer}/dims"),
                format!("expected {dim} counts, got {}", self.dims.len()),
            ));
        }
        let grid = if dim == 2 {
            Grid::new_2d(
                [self.origin[0], self.origin[1]],
                self.spacing,
                [self.dims[0], self.dims[1]],
            )
        } else {
            Grid::new_3d(
                [self.origin[0], self.origin[1], self.origin[2]],
                self.spacing,
                [self.dims[0], self.dims[1], self.dims[2]],
            )
        };
        grid.map_err(|e| fail(pointer, e))
    }
}

impl ShapeFile {
    fn build(&self, dim: usize, pointer: &str) -> Result<ShapeSpec> {
        match self {
            ShapeFile::Box { min, max } => {
                let lo = lift_vector(min, dim, &format!("{pointer}/box/min"))?;
                let hi = lift_vector(max, dim, &format!("{pointer}/box/max"))?;
                Ok(if dim == 2 {
                    ShapeSpec::box_2d([lo.x, lo.y], [hi.x, hi.y])
                } else {
                    ShapeSpec::Box { min: lo, max: hi }
                })
            }
            ShapeFile::Ball { center, radius } => {
                let c = lift_vector(center, dim, &format!("{pointer}/ball/center"))?;
                Ok(ShapeSpec::Ball { center: c, radius: *radius })
            }
            ShapeFile::Cylinder { point, axis, radius, half_length } => {
                if dim == 2 {
                    return Err(fail(
                        &format!("{pointer}/cylinder"),
                        "cylinder is only available in 3D scenes",
                    ));
                }
                Ok(ShapeSpec::Cylinder {
                    point: lift_vector(point, dim, &format!("{pointer}/cylinder/point"))?,
                    axis: lift_vector(axis, dim, &format!("{pointer}/cylinder/axis"))?,
                    radius: *radius,
                    half_length: *half_length,
                })
            }
            ShapeFile::Union(parts) => Ok(ShapeSpec::Union(
                parts
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.build(dim, &format!("{pointer}/union/{i}")))
                    .collect::<Result<_>>()?,
            )),
            ShapeFile::Intersection(parts) => Ok(ShapeSpec::Intersection(
                parts
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.build(dim, &format!("{pointer}/intersection/{i}")))
                    .collect::<Result<_>>()?,
            )),
            ShapeFile::Difference(a, b) => Ok(ShapeSpec::Difference(
                Box::new(a.build(dim, &format!("{pointer}/difference/0"))?),
                Box::new(b.build(dim, &format!("{pointer}/difference/1"))?),
            )),
        }
    }

    fn from_shape(shape: &ShapeSpec, dim: usize) -> Self {
        let drop = |v: &Vector3<f64>| -> Vec<f64> {
            if dim == 2 {
                vec![v.x, v.y]
            } else {
                vec![v.x, v.y, v.z]
            }
        };
        match shape {
            ShapeSpec::Box { min, max } => ShapeFile::Box { min: drop(min), max: drop(max) },
            ShapeSpec::Ball { center, radius } => {
                ShapeFile::Ball { center: drop(center), radius: *radius }
            }
            ShapeSpec::Cylinder { point, axis, radius, half_length } => ShapeFile::Cylinder {
                point: drop(point),
                axis: drop(axis),
                radius: *radius,
                half_length: *half_length,
            },
            ShapeSpec::Union(parts) => {
                ShapeFile::Union(parts.iter().map(|s| Self::from_shape(s, dim)).collect())
            }
            ShapeSpec::Intersection(parts) => {
                ShapeFile::Intersection(parts.iter().map(|s| Self::from_shape(s, dim)).collect())
            }
            ShapeSpec::Difference(a, b) => ShapeFile::Difference(
                Box::new(Self::from_shape(a, dim)),
                Box::new(Self::from_shape(b, dim)),
            ),
        }
    }
}

impl MotionFile {
    fn build(&self, dim: usize) -> Result<MotionConfig> {
        match self {
            MotionFile::Builtin(b) => {
                let builtin = match b {
                    BuiltinFile::CounterRotation { center1, center2 } => {
                        if dim != 2 {
                            return Err(fail(
                                "/motion/builtin",
                                "counter_rotation is a 2D motion",
                            ));
                        }
                        BuiltinMotion::CounterRotation {
                            center1: lift_vector(center1, dim, "/motion/builtin/center1")?,
                            center2: lift_vector(center2, dim, "/motion/builtin/center2")?,
                        }
                    }
                    BuiltinFile::CamFollower2d { length } => {
                        if dim != 2 {
                            return Err(fail("/motion/builtin", "cam_follower_2d is a 2D motion"));
                        }
                        require_positive(*length, "/motion/builtin/length")?;
                        BuiltinMotion::CamFollower2d { length: *length }
                    }
                    BuiltinFile::CamFollower3d => {
                        if dim != 3 {
                            return Err(fail("/motion/builtin", "cam_follower_3d is a 3D motion"));
                        }
                        BuiltinMotion::CamFollower3d
                    }
                    BuiltinFile::Screw { length } => {
                        if dim != 3 {
                            return Err(fail("/motion/builtin", "screw is a 3D motion"));
                        }
                        require_positive(*length, "/motion/builtin/length")?;
                        BuiltinMotion::Screw { length: *length }
                    }
                };
                Ok(MotionConfig::Builtin(builtin))
            }
            MotionFile::Keyframes { body1, body2 } => {
                let parse = |frames: &[KeyframeFile], body: &str| -> Result<Vec<Keyframe>> {
                    frames
                        .iter()
                        .enumerate()
                        .map(|(i, f)| {
                            f.build(dim, &format!("/motion/keyframes/{body}/{i}"))
                        })
                        .collect()
                };
                let frames1 = parse(body1, "body1")?;
                let frames2 = parse(body2, "body2")?;
                // surface interpolation problems (ordering, invalid poses) now
                keyframe_motion(frames1.clone())
                    .map_err(|e| fail("/motion/keyframes/body1", e))?;
                keyframe_motion(frames2.clone())
                    .map_err(|e| fail("/motion/keyframes/body2", e))?;
                Ok(MotionConfig::Keyframes { body1: frames1, body2: frames2 })
            }
        }
    }
}

fn require_positive(v: f64, pointer: &str) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(fail(pointer, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

impl KeyframeFile {
    fn build(&self, dim: usize, pointer: &str) -> Result<Keyframe> {
        if self.rotation.len() != dim || self.rotation.iter().any(|row| row.len() != dim) {
            return Err(fail(
                &format!("{pointer}/rotation"),
                format!("expected a {dim}x{dim} matrix"),
            ));
        }
        let r = &self.rotation;
        let rotation = if dim == 2 {
            Matrix3::new(r[0][0], r[0][1], 0.0, r[1][0], r[1][1], 0.0, 0.0, 0.0, 1.0)
        } else {
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            )
        };
        let translation = lift_vector(&self.translation, dim, &format!("{pointer}/translation"))?;
        let pose =
            Pose::new(rotation, translation).map_err(|e| fail(&format!("{pointer}/rotation"), e))?;
        Ok(Keyframe { time: self.t, pose })
    }

    fn from_keyframe(frame: &Keyframe, dim: usize) -> Self {
        let r = frame.pose.rotation;
        let rotation = (0..dim)
            .map(|i| (0..dim).map(|j| r[(i, j)]).collect())
            .collect();
        let translation = if dim == 2 {
            vec![frame.pose.translation.x, frame.pose.translation.y]
        } else {
            vec![frame.pose.translation.x, frame.pose.translation.y, frame.pose.translation.z]
        };
        KeyframeFile { t: frame.time, rotation, translation }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    move_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty_growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty_max_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outer_interval: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multiplier_init: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    collision_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ratio_tol: Option<f64>,
}

impl OptimizerFile {
    fn apply(self, mut config: OptimizerConfig) -> OptimizerConfig {
        if let Some(v) = self.max_iters {
            config.max_iters = v;
        }
        if self.delta_tol.is_some() {
            config.delta_tol = self.delta_tol;
        }
        if let Some(v) = self.move_limit {
            config.move_limit = v;
        }
        if self.step.is_some() {
            config.step = self.step;
        }
        if self.penalty_init.is_some() {
            config.penalty_init = self.penalty_init;
        }
        if let Some(v) = self.penalty_growth {
            config.penalty_growth = v;
        }
        if let Some(v) = self.penalty_max_factor {
            config.penalty_max_factor = v;
        }
        if let Some(v) = self.outer_interval {
            config.outer_interval = v;
        }
        if let Some(v) = self.multiplier_init {
            config.multiplier_init = v;
        }
        if self.collision_tol.is_some() {
            config.collision_tol = self.collision_tol;
        }
        if self.ratio_tol.is_some() {
            config.ratio_tol = self.ratio_tol;
        }
        config
    }

    fn from_config(config: &OptimizerConfig) -> Self {
        OptimizerFile {
            max_iters: Some(config.max_iters),
            delta_tol: config.delta_tol,
            move_limit: Some(config.move_limit),
            step: config.step,
            penalty_init: config.penalty_init,
            penalty_growth: Some(config.penalty_growth),
            penalty_max_factor: Some(config.penalty_max_factor),
            outer_interval: Some(config.outer_interval),
            multiplier_init: Some(config.multiplier_init),
            collision_tol: config.collision_tol,
            ratio_tol: config.ratio_tol,
        }
    }
}
