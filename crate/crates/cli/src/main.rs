//! `semigen`: solve single instances, run the synthetic benchmark, run hybrid
//! RANSAC on correspondence files and generate synthetic scenes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use semigen::bench::{run_benchmark, BenchConfig, PoseErrors};
use semigen::geometry::max_relative_residual;
use semigen::io::{write_atomic, CorrespondenceFile};
use semigen::ransac::{lo_cost, run_ransac, InlierMasks, RansacConfig};
use semigen::synth::{generate_noisy_scene, generate_scene, minimal_sample, Motion, SceneConfig};
use semigen::template::{build_template, default_action_variable, random_fp_system, TemplateSet};
use semigen::{Backend, Error, PoseWithFocal, SolverId, SolverOptions};

#[derive(Parser)]
#[command(name = "semigen", version, about = "Semi-generalized pose with unknown focal length")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory of solver templates; SEMIGEN_TEMPLATE_DIR takes precedence.
    #[arg(long, global = true)]
    template_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one minimal instance and print every candidate pose.
    Solve(SolveArgs),
    /// Run the synthetic noise benchmark and write CSV and metadata files.
    Bench(BenchArgs),
    /// Run hybrid RANSAC on a correspondence file.
    Ransac(RansacArgs),
    /// Generate a synthetic correspondence file.
    Gen(GenArgs),
    /// Build a solver template from a random prime field instance.
    Templategen(TemplategenArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_solver)]
    solver: SolverId,
    #[arg(long, default_value = "auto", value_parser = parse_backend)]
    backend: Backend,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated motions.
    #[arg(long, value_delimiter = ',', default_value = "random,forward,sideways", value_parser = parse_motion)]
    motions: Vec<Motion>,
    /// Comma-separated 3D noise levels in percent of depth.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2", value_parser = parse_sigma)]
    sigma3d: Vec<f64>,
    /// Image noise in pixels.
    #[arg(long, default_value_t = 2.0, value_parser = parse_sigma)]
    sigma2d: f64,
    /// Comma-separated solvers.
    #[arg(long, value_delimiter = ',', default_value = "h13f,h32f,h51f5,dlt-ap", value_parser = parse_solver)]
    solvers: Vec<SolverId>,
    /// Scenes per motion.
    #[arg(long, default_value_t = 5000)]
    scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "auto", value_parser = parse_backend)]
    backend: Backend,
    /// Output directory for bench.csv and bench_meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct RansacArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated solvers, sampled with equal probability.
    #[arg(long, value_delimiter = ',', default_value = "h13f,h32f,h51f5", value_parser = parse_solver)]
    solvers: Vec<SolverId>,
    /// Inlier threshold in pixels for both reprojection and Sampson errors.
    #[arg(long, default_value_t = 2.0)]
    threshold_px: f64,
    #[arg(long, value_enum, default_value = "on")]
    lo: Toggle,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = RansacConfig::default().max_iterations)]
    max_iterations: usize,
    #[arg(long, default_value_t = RansacConfig::default().confidence)]
    confidence: f64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "random", value_parser = parse_motion)]
    motion: Motion,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scene index within the seed's sequence.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value_t = 0.0, value_parser = parse_sigma)]
    sigma3d: f64,
    #[arg(long, default_value_t = 0.0, value_parser = parse_sigma)]
    sigma2d: f64,
    /// Fraction of matches replaced by random image points.
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    #[arg(long, default_value_t = SceneConfig::default().matches_2d2d_per_cam)]
    matches_2d2d_per_cam: usize,
    #[arg(long, default_value_t = SceneConfig::default().matches_2d3d)]
    matches_2d3d: usize,
    /// Emit only the minimal sample of this solver.
    #[arg(long, value_parser = parse_solver)]
    minimal: Option<SolverId>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TemplategenArgs {
    #[arg(long, value_parser = parse_solver)]
    problem: SolverId,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Largest Macaulay expansion degree tried.
    #[arg(long, default_value_t = 12)]
    max_degree: u32,
}

fn parse_solver(s: &str) -> Result<SolverId, String> {
    SolverId::from_str(s).map_err(|e| e.to_string())
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    Backend::from_str(s).map_err(|e| e.to_string())
}

fn parse_motion(s: &str) -> Result<Motion, String> {
    Motion::from_str(s).map_err(|e| e.to_string())
}

fn parse_sigma(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("'{s}' is not a finite nonnegative number")),
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Malformed input or usage.
    Input(anyhow::Error),
    /// Valid input without a solution: degenerate data or no usable solver.
    NoSolution(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(inner) if inner.is_degeneracy() || matches!(inner, Error::Config(_)) => Failure::NoSolution(e),
            _ => Failure::Input(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Serialize)]
struct PoseJson {
    #[serde(rename = "R")]
    rotation: [f64; 9],
    t: [f64; 3],
    f: f64,
}

impl From<&PoseWithFocal> for PoseJson {
    fn from(p: &PoseWithFocal) -> Self {
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                rotation[3 * r + c] = p.rotation[(r, c)];
            }
        }
        Self {
            rotation,
            t: p.translation.into(),
            f: p.focal,
        }
    }
}

#[derive(Serialize)]
struct SolutionJson {
    #[serde(flatten)]
    pose: PoseJson,
    max_relative_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth_error: Option<PoseErrors>,
}

#[derive(Serialize)]
struct SolveOutput {
    solver: &'static str,
    backend: Backend,
    solutions: Vec<SolutionJson>,
}

/// Writes to standard output; a closed pipe on the reading side is not an
/// error.
fn write_stdout(text: &str) -> anyhow::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    write_stdout(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn solver_options(backend: Backend, template_dir: Option<&Path>) -> anyhow::Result<SolverOptions> {
    let mut opts = SolverOptions::with_backend(backend);
    if let Some(dir) = TemplateSet::search_dir(template_dir).filter(|d| d.is_dir()) {
        let set = TemplateSet::load_dir(&dir).with_context(|| format!("loading templates from {}", dir.display()))?;
        opts.templates = Some(Arc::new(set));
    }
    Ok(opts)
}

fn cmd_solve(args: SolveArgs, template_dir: Option<&Path>) -> CmdResult {
    let file = CorrespondenceFile::load(&args.input)?;
    let corrs = file.correspondences()?;
    let opts = solver_options(args.backend, template_dir)?;
    let poses = semigen::solve(args.solver, &corrs, &opts)?;
    let truth = file.ground_truth_pose();
    let solutions: Vec<SolutionJson> = poses
        .iter()
        .map(|p| SolutionJson {
            pose: p.into(),
            max_relative_residual: max_relative_residual(&corrs, p),
            ground_truth_error: truth.as_ref().map(|g| PoseErrors::between(p, g)),
        })
        .collect();
    let empty = solutions.is_empty();
    print_json(&SolveOutput {
        solver: args.solver.name(),
        backend: args.backend,
        solutions,
    })?;
    if empty {
        return Err(Failure::NoSolution(anyhow!("the solver returned no real solution")));
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs, template_dir: Option<&Path>) -> CmdResult {
    if args.scenes == 0 {
        return Err(Failure::Input(anyhow!("--scenes must be positive")));
    }
    let config = BenchConfig {
        scene: SceneConfig {
            num_scenes: args.scenes,
            noise_2d_px: args.sigma2d,
            seed: args.seed,
            ..SceneConfig::default()
        },
        motions: args.motions,
        sigma3d_pct: args.sigma3d,
        solvers: args.solvers,
    };
    let opts = solver_options(args.backend, template_dir)?;
    let report = run_benchmark(&config, &opts)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_atomic(&args.out.join("bench.csv"), report.to_csv().as_bytes())?;
    let meta = serde_json::to_string_pretty(&config).map_err(anyhow::Error::from)?;
    write_atomic(&args.out.join("bench_meta.json"), (meta + "\n").as_bytes())?;
    eprintln!("wrote {} rows to {}", report.rows().len(), args.out.join("bench.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct RansacOutput {
    pose: PoseJson,
    solver: &'static str,
    score: f64,
    iterations: usize,
    num_inliers_2d2d: usize,
    num_inliers_2d3d: usize,
    inliers_2d2d: Vec<bool>,
    inliers_2d3d: Vec<bool>,
    /// Combined squared reprojection and Sampson cost over the inliers.
    final_cost: f64,
    lo_calls: usize,
    confidence: f64,
    max_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth_error: Option<PoseErrors>,
}

fn cmd_ransac(args: RansacArgs, template_dir: Option<&Path>) -> CmdResult {
    let file = CorrespondenceFile::load(&args.input)?;
    let corrs = file.correspondences()?;
    if !(args.threshold_px.is_finite() && args.threshold_px > 0.0) {
        return Err(Failure::Input(anyhow!("--threshold-px must be positive")));
    }
    if args.solvers.is_empty() {
        return Err(Failure::Input(anyhow!("--solvers must name at least one solver")));
    }
    let config = RansacConfig {
        max_iterations: args.max_iterations,
        confidence: args.confidence,
        reproj_px: args.threshold_px,
        sampson_px: args.threshold_px,
        solver_weights: RansacConfig::uniform_weights(&args.solvers),
        lo_enabled: matches!(args.lo, Toggle::On),
        seed: args.seed,
        ..RansacConfig::default()
    };
    config.validate().map_err(|e| Failure::Input(e.into()))?;
    let opts = solver_options(Backend::Auto, template_dir)?;
    let result = run_ransac(&corrs, &config, &opts)?;
    let masks = InlierMasks {
        twod: result.inliers_2d2d.clone(),
        threed: result.inliers_2d3d.clone(),
    };
    print_json(&RansacOutput {
        pose: (&result.pose).into(),
        solver: result.solver.name(),
        score: result.score,
        iterations: result.iterations,
        num_inliers_2d2d: masks.twod.iter().filter(|b| **b).count(),
        num_inliers_2d3d: masks.threed.iter().filter(|b| **b).count(),
        final_cost: lo_cost(&result.pose, &corrs, &masks),
        inliers_2d2d: masks.twod,
        inliers_2d3d: masks.threed,
        lo_calls: result.lo.len(),
        confidence: result.confidence,
        max_iterations: result.max_iterations,
        ground_truth_error: file.ground_truth_pose().map(|g| PoseErrors::between(&result.pose, &g)),
    })?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> CmdResult {
    if !(0.0..1.0).contains(&args.outliers) {
        return Err(Failure::Input(anyhow!("--outliers must lie in [0, 1)")));
    }
    let config = SceneConfig {
        motion: args.motion,
        seed: args.seed,
        noise_3d_pct: args.sigma3d,
        noise_2d_px: args.sigma2d,
        outlier_ratio: args.outliers,
        matches_2d2d_per_cam: args.matches_2d2d_per_cam,
        matches_2d3d: args.matches_2d3d,
        ..SceneConfig::default()
    };
    config.validate().map_err(|e| Failure::Input(e.into()))?;
    let mut scene = if args.sigma3d > 0.0 || args.sigma2d > 0.0 || args.outliers > 0.0 {
        generate_noisy_scene(&config, args.index)?
    } else {
        generate_scene(&config, args.index)?
    };
    if let Some(id) = args.minimal {
        scene.noisy = minimal_sample(&scene, id, true).ok_or_else(|| {
            Failure::Input(anyhow!(
                "the scene has too few matches for a {} sample ({})",
                id.name(),
                id.requirement().describe()
            ))
        })?;
    }
    let text = CorrespondenceFile::from_scene(&scene).to_json() + "\n";
    match args.out {
        Some(path) => write_atomic(&path, text.as_bytes())?,
        None => write_stdout(&text)?,
    }
    Ok(())
}

fn cmd_templategen(args: TemplategenArgs) -> CmdResult {
    if args.problem == SolverId::DltAp {
        return Err(Failure::Input(anyhow!("dlt-ap is linear and has no template")));
    }
    let eqs = random_fp_system(args.problem, args.seed)?;
    let template = build_template(
        args.problem,
        &eqs,
        default_action_variable(args.problem),
        args.max_degree,
        args.seed,
    )?;
    let (rows, cols) = template.size();
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join(format!("{}.json", args.problem.name()));
    let text = serde_json::to_string_pretty(&template).map_err(anyhow::Error::from)? + "\n";
    write_atomic(&path, text.as_bytes())?;
    eprintln!(
        "wrote {} ({rows}x{cols}, {} solutions)",
        path.display(),
        template.num_solutions
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Input(anyhow!("--jobs must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Input(e.into()))?;
    }
    let template_dir = cli.template_dir.as_deref();
    match cli.command {
        Command::Solve(a) => cmd_solve(a, template_dir),
        Command::Bench(a) => cmd_bench(a, template_dir),
        Command::Ransac(a) => cmd_ransac(a, template_dir),
        Command::Gen(a) => cmd_gen(a),
        Command::Templategen(a) => cmd_templategen(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::NoSolution(e)) => {
            eprintln!("no solution: {e:#}");
            ExitCode::from(2)
        }
    }
}

