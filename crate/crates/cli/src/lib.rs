//! The `cogen` command-line interface.
//!
//! Subcommands cover the whole pipeline: `precompute` builds and caches the
//! correlation matrices, `optimize` runs the co-generation loop for a single
//! volume ratio, `gamma-sweep` tabulates a ratio family, `unsweep`/`sweep`
//! compute the one-way results, `metrics` evaluates distance and
//! periodicity on saved fields, `oracle-check` compares the matrix measures
//! against direct quadrature, and `export` converts saved fields.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure,
//! 4 oracle mismatch.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use cogen_core::analysis::{contact_fraction, min_distance_series, periodicity_score};
use cogen_core::collision::{global_measure, sweep, unsweep};
use cogen_core::correlation::{content_hash, CorrelationMatrix};
use cogen_core::error::CogenError;
use cogen_core::export::{
    read_field_raw, write_convergence_csv, write_distance_csv, write_field_raw, write_gamma_csv,
    write_pgm, write_vtk,
};
use cogen_core::geometry::{mask_measure, Grid};
use cogen_core::motion::Trajectory;
use cogen_core::optimizer::{cogenerate, gamma_sweep, OptimizerConfig};
use cogen_core::scene::{SceneConfig, DEFAULT_THRESHOLD};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ORACLE_MISMATCH: i32 = 4;

#[derive(Parser)]
#[command(
    name = "cogen",
    about = "Co-generation of collision-free solid pairs under prescribed relative motion",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SceneArg {
    /// Scene configuration file (JSON).
    #[arg(long)]
    scene: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble both correlation matrices and write them to the cache.
    Precompute {
        #[command(flatten)]
        scene: SceneArg,
        /// Cache directory; defaults to the scene's cache_path or
        /// <output_dir>/cache.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Run the co-generation loop for a single volume ratio.
    Optimize {
        #[command(flatten)]
        scene: SceneArg,
        /// Volume ratio; defaults to the scene's first gamma.
        #[arg(long)]
        gamma: Option<f64>,
        /// Output directory; defaults to the scene's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the loop for a list of ratios and tabulate the results.
    GammaSweep {
        #[command(flatten)]
        scene: SceneArg,
        /// Ratios as `start:end:step` or a comma-separated list; defaults to
        /// the scene's gamma list.
        #[arg(long)]
        gammas: Option<String>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Maximal shape of one body against the other's initial design.
    Unsweep {
        #[command(flatten)]
        scene: SceneArg,
        /// Which body to compute (the other is the obstacle).
        #[arg(long, default_value_t = 2)]
        body: u8,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Region of one body's domain ever touched by the other's initial
    /// design.
    Sweep {
        #[command(flatten)]
        scene: SceneArg,
        #[arg(long, default_value_t = 2)]
        body: u8,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Distance series and optional periodicity score on saved fields.
    Metrics {
        #[command(flatten)]
        scene: SceneArg,
        /// Body-1 density container (COGF1).
        #[arg(long)]
        rho1: PathBuf,
        /// Body-2 density container (COGF1).
        #[arg(long)]
        rho2: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Contact tolerance; defaults to one cell diagonal.
        #[arg(long)]
        contact_tol: Option<f64>,
        /// Axis (x, y, or z) for the periodicity score.
        #[arg(long)]
        axis: Option<char>,
        /// Shift in cells for the periodicity score.
        #[arg(long)]
        period: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Compare the matrix collision measures against direct quadrature on
    /// the initial designs; nonzero exit if they disagree.
    OracleCheck {
        #[command(flatten)]
        scene: SceneArg,
        /// Stratified samples per cell axis.
        #[arg(long, default_value_t = 8)]
        samples: u32,
        /// Maximum relative disagreement.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Convert a saved field container to another format.
    Export {
        /// Input density container (COGF1).
        #[arg(long)]
        input: PathBuf,
        /// One of pgm, vtk, raw.
        #[arg(long)]
        format: String,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Run the CLI on explicit arguments and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/usage text
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &CogenError) -> i32 {
    match err {
        CogenError::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn dispatch(command: Command) -> Result<i32, CogenError> {
    match command {
        Command::Precompute { scene, cache } => precompute(&scene.scene, cache),
        Command::Optimize { scene, gamma, output_dir } => optimize(&scene.scene, gamma, output_dir),
        Command::GammaSweep { scene, gammas, output_dir } => {
            run_gamma_sweep(&scene.scene, gammas, output_dir)
        }
        Command::Unsweep { scene, body, threshold, output_dir } => {
            one_way(&scene.scene, body, threshold, output_dir, false)
        }
        Command::Sweep { scene, body, threshold, output_dir } => {
            one_way(&scene.scene, body, threshold, output_dir, true)
        }
        Command::Metrics {
            scene,
            rho1,
            rho2,
            threshold,
            contact_tol,
            axis,
            period,
            output_dir,
        } => metrics(&scene.scene, &rho1, &rho2, threshold, contact_tol, axis, period, output_dir),
        Command::OracleCheck { scene, samples, tol } => oracle_check(&scene.scene, samples, tol),
        Command::Export { input, format, output } => export(&input, &format, &output),
    }
}

fn cache_dir(scene: &SceneConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| scene.cache_path.clone())
        .unwrap_or_else(|| scene.output_dir.join("cache"))
}

fn cache_files(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("w12.cogw"), dir.join("w21.cogw"))
}

/// Load both correlation matrices from the cache when present and fresh;
/// assemble (and cache, if a directory is known) otherwise.
fn load_or_assemble(
    scene: &SceneConfig,
    trajectory: &Trajectory,
) -> Result<(CorrelationMatrix, CorrelationMatrix), CogenError> {
    let dir = cache_dir(scene, None);
    let (p12, p21) = cache_files(&dir);
    let h12 = content_hash(&scene.grid1, &scene.grid2, trajectory.poses_12());
    let h21 = content_hash(&scene.grid2, &scene.grid1, trajectory.poses_21());
    if p12.is_file() && p21.is_file() {
        let (w12, stored12) = CorrelationMatrix::read_cache(&p12)?;
        let (w21, stored21) = CorrelationMatrix::read_cache(&p21)?;
        validate_cache(&w12, &scene.grid1, &scene.grid2, trajectory, stored12, h12, &p12)?;
        validate_cache(&w21, &scene.grid2, &scene.grid1, trajectory, stored21, h21, &p21)?;
        eprintln!("loaded correlation caches from {}", dir.display());
        return Ok((w12, w21));
    }
    let w12 = CorrelationMatrix::assemble(&scene.grid1, &scene.grid2, trajectory.poses_12())?;
    let w21 = CorrelationMatrix::assemble(&scene.grid2, &scene.grid1, trajectory.poses_21())?;
    Ok((w12, w21))
}

fn validate_cache(
    w: &CorrelationMatrix,
    stationary: &Grid,
    moving: &Grid,
    trajectory: &Trajectory,
    stored_hash: [u8; 32],
    expected_hash: [u8; 32],
    path: &Path,
) -> Result<(), CogenError> {
    let fail = |reason: String| CogenError::Format {
        path: path.display().to_string(),
        reason,
    };
    if w.dim() != stationary.dim() {
        return Err(fail(format!("cache is {}D but the scene is {}D", w.dim(), stationary.dim())));
    }
    if w.rows() != stationary.len() || w.cols() != moving.len() {
        return Err(fail(format!(
            "cache shape {}x{} does not match the scene grids {}x{}",
            w.rows(),
            w.cols(),
            stationary.len(),
            moving.len()
        )));
    }
    if w.timesteps() != trajectory.timesteps() {
        return Err(fail(format!(
            "cache was built for K = {} but the scene uses K = {}",
            w.timesteps(),
            trajectory.timesteps()
        )));
    }
    if (w.delta() - trajectory.delta()).abs() > 1e-15 {
        return Err(fail("cache timestep width does not match the scene".into()));
    }
    if stored_hash != expected_hash {
        return Err(fail("stale cache: the grids or motion changed since it was written".into()));
    }
    Ok(())
}

fn precompute(scene_path: &Path, cache: Option<PathBuf>) -> Result<i32, CogenError> {
    let scene = SceneConfig::from_file(scene_path)?;
    let trajectory = scene.trajectory()?;
    let dir = cache_dir(&scene, cache);
    std::fs::create_dir_all(&dir)?;
    let (p12, p21) = cache_files(&dir);

    let w12 = CorrelationMatrix::assemble(&scene.grid1, &scene.grid2, trajectory.poses_12())?;
    w12.write_cache(&p12, &content_hash(&scene.grid1, &scene.grid2, trajectory.poses_12()))?;
    println!(
        "wrote {} ({} entries, {} x {}, K = {})",
        p12.display(),
        w12.nnz(),
        w12.rows(),
        w12.cols(),
        w12.timesteps()
    );
    let w21 = CorrelationMatrix::assemble(&scene.grid2, &scene.grid1, trajectory.poses_21())?;
    w21.write_cache(&p21, &content_hash(&scene.grid2, &scene.grid1, trajectory.poses_21()))?;
    println!(
        "wrote {} ({} entries, {} x {}, K = {})",
        p21.display(),
        w21.nnz(),
        w21.rows(),
        w21.cols(),
        w21.timesteps()
    );
    Ok(EXIT_OK)
}

fn check_finite(values: &[f64], what: &str) -> Result<(), CogenError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CogenError::Numerical(format!("{what} contains non-finite values")));
    }
    Ok(())
}

fn optimize(
    scene_path: &Path,
    gamma: Option<f64>,
    output_dir: Option<PathBuf>,
) -> Result<i32, CogenError> {
    let scene = SceneConfig::from_file(scene_path)?;
    let out = output_dir.unwrap_or_else(|| scene.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    let trajectory = scene.trajectory()?;
    let (w12, w21) = load_or_assemble(&scene, &trajectory)?;
    let (rho1, rho2) = scene.initial_fields();
    let config = OptimizerConfig {
        gamma: gamma.unwrap_or(scene.optimizer.gamma),
        ..scene.optimizer.clone()
    };
    config.validate()?;
    let result = cogenerate(&rho1, &rho2, &w12, &w21, &config, None)?;
    check_finite(result.rho1.values(), "body-1 densities")?;
    check_finite(result.rho2.values(), "body-2 densities")?;

    write_field_raw(&result.rho1, &out.join("rho1.bin"))?;
    write_field_raw(&result.rho2, &out.join("rho2.bin"))?;
    write_convergence_csv(&result.history, &out.join("convergence.csv"))?;
    let (v1, v2) = result.thresholded_measures();
    if result.no_op {
        println!("warning: the initial designs never collide; nothing to optimize");
    }
    println!(
        "gamma {}: {} iterations, converged = {}, thresholded measures {} + {} = {}",
        config.gamma,
        result.history.len(),
        result.converged,
        v1,
        v2,
        v1 + v2
    );
    if result.repaired_cells > 0 {
        println!("repaired {} boundary cells after thresholding", result.repaired_cells);
    }
    if result.grown_cells > 0 {
        println!("grew {} cells back to a maximal pair", result.grown_cells);
    }
    println!("wrote rho1.bin, rho2.bin, convergence.csv under {}", out.display());
    Ok(EXIT_OK)
}

fn parse_gamma_list(text: &str) -> Result<Vec<f64>, CogenError> {
    let bad = |msg: String| CogenError::Config(msg);
    let parse_one = |s: &str| -> Result<f64, CogenError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("cannot parse gamma value {s:?}")))
    };
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("range syntax is start:end:step, got {text:?}")));
        }
        let (start, end, step) = (parse_one(parts[0])?, parse_one(parts[1])?, parse_one(parts[2])?);
        if !(step > 0.0) {
            return Err(bad(format!("gamma step must be positive, got {step}")));
        }
        let count = ((end - start) / step + 1.5).floor() as usize;
        (0..count).map(|i| (start + i as f64 * step).min(end)).collect()
    } else {
        text.split(',').map(parse_one).collect::<Result<_, _>>()?
    };
    for g in &values {
        if !(0.0..=1.0).contains(g) {
            return Err(bad(format!("gamma {g} lies outside [0, 1]")));
        }
    }
    if values.is_empty() {
        return Err(bad("empty gamma list".into()));
    }
    Ok(values)
}

fn run_gamma_sweep(
    scene_path: &Path,
    gammas: Option<String>,
    output_dir: Option<PathBuf>,
) -> Result<i32, CogenError> {
    let scene = SceneConfig::from_file(scene_path)?;
    let out = output_dir.unwrap_or_else(|| scene.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    let list = match gammas {
        Some(text) => parse_gamma_list(&text)?,
        None => scene.gammas.clone(),
    };
    let trajectory = scene.trajectory()?;
    // matrices are shape independent: assembled once, reused for every gamma
    let (w12, w21) = load_or_assemble(&scene, &trajectory)?;
    let (rho1, rho2) = scene.initial_fields();
    let (rows, _) = gamma_sweep(&rho1, &rho2, &w12, &w21, &scene.optimizer, &list, None)?;
    write_gamma_csv(&rows, &out.join("gamma_sweep.csv"))?;
    for row in &rows {
        println!("gamma {}: v1 = {}, v2 = {}, sum = {}", row.gamma, row.v1, row.v2, row.sum);
    }
    println!("wrote gamma_sweep.csv under {}", out.display());
    Ok(EXIT_OK)
}

fn one_way(
    scene_path: &Path,
    body: u8,
    threshold: f64,
    output_dir: Option<PathBuf>,
    swept: bool,
) -> Result<i32, CogenError> {
    if body != 1 && body != 2 {
        return Err(CogenError::Config(format!("body must be 1 or 2, got {body}")));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CogenError::Config(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let scene = SceneConfig::from_file(scene_path)?;
    let out = output_dir.unwrap_or_else(|| scene.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    let trajectory = scene.trajectory()?;
    let (rho1, rho2) = scene.initial_fields();
    // legs map the target body's points into the obstacle's frame
    let (obstacle, leg, target) = if body == 2 {
        (&rho1, trajectory.poses_12(), &scene.grid2)
    } else {
        (&rho2, trajectory.poses_21(), &scene.grid1)
    };
    let op = if swept { "sweep" } else { "unsweep" };
    let field = if swept {
        sweep(obstacle, leg, target, threshold)
    } else {
        unsweep(obstacle, leg, target, threshold)
    };
    let path = out.join(format!("{op}_body{body}.bin"));
    write_field_raw(&field, &path)?;
    println!(
        "{op} of body {body}: kept measure {} of {}",
        mask_measure(target, &field.threshold(0.5)),
        target.cell_measure() * target.len() as f64
    );
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn metrics(
    scene_path: &Path,
    rho1_path: &Path,
    rho2_path: &Path,
    threshold: f64,
    contact_tol: Option<f64>,
    axis: Option<char>,
    period: Option<usize>,
    output_dir: Option<PathBuf>,
) -> Result<i32, CogenError> {
    let scene = SceneConfig::from_file(scene_path)?;
    let out = output_dir.unwrap_or_else(|| scene.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    let rho1 = read_field_raw(rho1_path)?;
    let rho2 = read_field_raw(rho2_path)?;
    if rho1.grid() != &scene.grid1 || rho2.grid() != &scene.grid2 {
        return Err(CogenError::Dimension(
            "saved fields do not live on the scene's grids".into(),
        ));
    }
    let trajectory = scene.trajectory()?;
    let series = min_distance_series(&rho1, &rho2, &trajectory, threshold)?;
    let tol = contact_tol
        .unwrap_or_else(|| (scene.dim as f64).sqrt() * scene.grid1.spacing());
    let fraction = contact_fraction(&series, tol);
    write_distance_csv(&series.values, &trajectory, &out.join("distance.csv"))?;
    println!(
        "distance: mean = {}, min = {}, contact fraction = {} at tolerance {}",
        series.mean, series.min, fraction, tol
    );
    if let (Some(axis), Some(period)) = (axis, period) {
        let axis_index = match axis {
            'x' => 0,
            'y' => 1,
            'z' => 2,
            other => {
                return Err(CogenError::Config(format!("axis must be x, y, or z, got {other}")))
            }
        };
        let score = periodicity_score(&rho1, axis_index, period)?;
        println!("body-1 periodicity along {axis} at shift {period}: {score}");
    }
    println!("wrote distance.csv under {}", out.display());
    Ok(EXIT_OK)
}

fn oracle_check(scene_path: &Path, samples: u32, tol: f64) -> Result<i32, CogenError> {
    use cogen_core::analysis::oracle_global_measure;
    let scene = SceneConfig::from_file(scene_path)?;
    let trajectory = scene.trajectory()?;
    let (w12, w21) = load_or_assemble(&scene, &trajectory)?;
    let (rho1, rho2) = scene.initial_fields();

    let matrix_g21 = global_measure(&rho1, &rho2, &w12)?;
    let matrix_g12 = global_measure(&rho2, &rho1, &w21)?;
    let quad_g21 =
        oracle_global_measure(&scene.shape1, &scene.shape2, &trajectory, samples, &scene.grid1);
    // the reversed-role quadrature swaps shapes and legs
    let reversed = reversed_trajectory(&trajectory);
    let quad_g12 =
        oracle_global_measure(&scene.shape2, &scene.shape1, &reversed, samples, &scene.grid2);

    let rel = |a: f64, b: f64| {
        let scale = a.abs().max(b.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    };
    let e21 = rel(matrix_g21, quad_g21);
    let e12 = rel(matrix_g12, quad_g12);
    println!("g21: matrix = {matrix_g21}, quadrature = {quad_g21}, relative error = {e21}");
    println!("g12: matrix = {matrix_g12}, quadrature = {quad_g12}, relative error = {e12}");
    if e21 > tol || e12 > tol {
        eprintln!("oracle mismatch: relative error exceeds {tol}");
        return Ok(EXIT_ORACLE_MISMATCH);
    }
    Ok(EXIT_OK)
}

/// Swap the two legs so body 2 plays the stationary role.
fn reversed_trajectory(trajectory: &Trajectory) -> Trajectory {
    // Re-sampling from swapped pose lists keeps the midpoint times.
    Trajectory::from_legs(trajectory.poses_21().to_vec(), trajectory.poses_12().to_vec())
        .expect("legs are consistent")
}

fn export(input: &Path, format: &str, output: &Path) -> Result<i32, CogenError> {
    let field = read_field_raw(input)?;
    match format {
        "pgm" => write_pgm(&field, output)?,
        "vtk" => write_vtk(&field, output)?,
        "raw" => write_field_raw(&field, output)?,
        other => {
            return Err(CogenError::Config(format!(
                "format must be pgm, vtk, or raw, got {other:?}"
            )))
        }
    }
    println!("wrote {}", output.display());
    Ok(EXIT_OK)
}
