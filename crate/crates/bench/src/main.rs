use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use recipgm::covest::TimeSeries;
use recipgm::solver::{maxent_solve, solve, spectrum, SolverConfig};
use recipgm::synthgen::{generate_model_with, matrix_to_doc, sample, GeneratorConfig, GroundTruthModel};
use recipgm_bench::emit::{emit, Format};
use recipgm_bench::grid::{cross_validate, grid_search, split_series, training_sigma, Axis, GridOptions, GridSpec};
use recipgm_bench::metrics::{spectral_error, theta_grid};
use recipgm_bench::EstimateDoc;
use serde::{Deserialize, Serialize};

/// Identification of latent-variable graphical models for reciprocal
/// processes.
#[derive(Parser)]
#[command(name = "recipgm", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a model from a CSV time series.
    Identify(IdentifyArgs),
    /// Generate a ground-truth model and sample from it.
    Synth(SynthArgs),
    /// Grid search with cross-validation.
    Grid(GridArgs),
    /// Maximum-entropy banded extension without regularization.
    Maxent(MaxentArgs),
    /// Evaluate spectra of a model over a frequency grid.
    Spectrum(SpectrumArgs),
}

/// Settings shared by the estimation commands. Flags override the config
/// file, which overrides the defaults.
#[derive(Args, Clone)]
struct SolverArgs {
    /// JSON file with optional `solver` and `grid` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda_s: Option<f64>,
    #[arg(long)]
    lambda_l: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Period N of the reciprocal model.
    #[arg(long = "period")]
    period: Option<usize>,
    /// Order n (bandwidth).
    #[arg(long = "order")]
    order: Option<usize>,
}

#[derive(Args)]
struct IdentifyArgs {
    /// CSV with one row per time step.
    #[arg(long)]
    data: PathBuf,
    /// Use only the first T rows.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    m: usize,
    /// Number of latent variables.
    #[arg(long, default_value_t = 1)]
    latent: usize,
    #[arg(long = "order", default_value_t = 8)]
    order: usize,
    #[arg(long = "period", default_value_t = 30)]
    period: usize,
    #[arg(long, default_value_t = 0.05)]
    density: f64,
    #[arg(long, default_value_t = 1500)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seed of the sampling noise; defaults to `seed + 1000`.
    #[arg(long)]
    noise_seed: Option<u64>,
    /// JSON file with a generator configuration.
    #[arg(long)]
    generator: Option<PathBuf>,
    /// Use the 20-variable benchmark generator settings.
    #[arg(long, conflicts_with = "generator")]
    benchmark: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth model JSON, enabling support and spectral scores.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// `min:max` range of λ_S.
    #[arg(long, value_parser = parse_range)]
    lambda_s_range: Option<(f64, f64)>,
    #[arg(long)]
    lambda_s_count: Option<usize>,
    #[arg(long, value_parser = parse_range)]
    lambda_l_range: Option<(f64, f64)>,
    #[arg(long)]
    lambda_l_count: Option<usize>,
    /// Comma-separated penalty growth factors.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Keep per-iteration residual traces for every cell.
    #[arg(long)]
    traces: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct MaxentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "period", default_value_t = 30)]
    period: usize,
    #[arg(long = "order", default_value_t = 8)]
    order: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Estimate JSON written by `identify`.
    #[arg(long)]
    estimate: Option<PathBuf>,
    /// Ground-truth model JSON written by `synth`.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct ConfigFile {
    solver: Option<SolverConfig>,
    grid: Option<GridSpec>,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    NotConverged(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected min:max, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

impl SolverArgs {
    fn load(&self) -> std::result::Result<(SolverConfig, GridSpec), Failure> {
        let file: ConfigFile = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", p.display()))
                    .map_err(Failure::Usage)?
            }
            None => ConfigFile::default(),
        };
        let mut solver = file.solver.unwrap_or_default();
        let mut grid = file.grid.unwrap_or_default();
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut solver.lambda_s, self.lambda_s);
        set(&mut solver.lambda_l, self.lambda_l);
        set(&mut solver.alpha, self.alpha);
        set(&mut solver.rho_max, self.rho_max);
        set(&mut solver.eps_abs, self.eps_abs);
        set(&mut solver.eps_rel, self.eps_rel);
        if let Some(v) = self.max_outer {
            solver.max_outer = v;
        }
        if let Some(a) = self.alpha {
            grid.alphas = vec![a];
        }
        if let Some(n) = self.period {
            grid.period = n;
        }
        if let Some(n) = self.order {
            grid.order = n;
        }
        solver.validate().map_err(usage)?;
        Ok((solver, grid))
    }
}

fn read_series(path: &Path) -> std::result::Result<TimeSeries, Failure> {
    Ok(TimeSeries::from_csv_path(path)?)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Outcome {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn identify(args: IdentifyArgs) -> Outcome {
    let (config, grid) = args.solver.load()?;
    let mut series = read_series(&args.data)?;
    if let Some(t) = args.samples {
        series = series.slice(0, t.min(series.len()))?;
    }
    let (sigma, loading) = training_sigma(&series, grid.order, grid.period)?;
    let est = solve(&sigma, &config)?;
    create_dir(&args.out)?;
    EstimateDoc::new(&est, &config).save(&args.out.join("estimate.json"))?;

    let mut w = csv::Writer::from_path(args.out.join("trace.csv"))?;
    w.write_record(["iteration", "rho", "primal", "eps_primal", "dual", "eps_dual"])?;
    for t in &est.diagnostics.trace {
        let r = &t.residuals;
        w.write_record([t.iteration as f64, t.rho, r.primal, r.eps_primal, r.dual, r.eps_dual].map(|v| v.to_string()))?;
    }
    w.flush()?;

    let d = &est.diagnostics;
    println!(
        "{} pairs, {} latent, {} iterations, {:.2}s{}",
        est.support.num_upper_pairs(),
        est.latent_count,
        d.iterations,
        d.wall_time_secs,
        if loading > 0.0 { format!(", Σ̂ loaded by {loading:.2e}") } else { String::new() }
    );
    if !d.converged {
        return Err(Failure::NotConverged(format!("stopping rule not met after {} iterations", d.iterations)));
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Outcome {
    let gen = match &args.generator {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(Failure::Usage)?
        }
        None if args.benchmark => GeneratorConfig::benchmark(),
        None => GeneratorConfig::default(),
    };
    let model = generate_model_with(args.m, args.latent, args.order, args.period, args.density, args.seed, &gen)
        .map_err(usage)?;
    let y = sample(&model, args.samples, args.noise_seed.unwrap_or(args.seed + 1000))?;
    create_dir(&args.out)?;
    model.save(&args.out.join("model.json"))?;
    let path = args.out.join("samples.csv");
    let f = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    y.write_csv(std::io::BufWriter::new(f))?;
    println!(
        "{} pairs, {} latent, {} samples written to {}",
        model.support.num_upper_pairs(),
        model.l,
        y.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Selection<'a> {
    index: Option<usize>,
    cell: Option<&'a recipgm_bench::CellRecord>,
}

fn grid(args: GridArgs) -> Outcome {
    let (config, mut spec) = args.solver.load()?;
    if let Some((a, b)) = args.lambda_s_range {
        spec.lambda_s = Axis::new(a, b, spec.lambda_s.count);
    }
    if let Some(c) = args.lambda_s_count {
        spec.lambda_s.count = c;
    }
    if let Some((a, b)) = args.lambda_l_range {
        spec.lambda_l = Axis::new(a, b, spec.lambda_l.count);
    }
    if let Some(c) = args.lambda_l_count {
        spec.lambda_l.count = c;
    }
    if let Some(a) = args.alphas {
        spec.alphas = a;
    }
    if let Some(t) = args.train {
        spec.train = t;
    }
    if let Some(t) = args.test {
        spec.test = t;
    }
    spec.validate().map_err(usage)?;

    let series = read_series(&args.data)?;
    let truth = args.truth.as_deref().map(GroundTruthModel::load).transpose()?;
    let split = split_series(&series, &spec)?;
    let opts = GridOptions {
        workers: args.workers,
        keep_traces: args.traces,
        ..Default::default()
    };
    let mut report = grid_search(&split.sigma, &spec, &config, truth.as_ref(), &opts)?;
    let best = match &split.test {
        Some(test) => cross_validate(&mut report, test, spec.order, spec.period)?,
        None => {
            log::warn!("no validation samples; skipping cross-validation");
            None
        }
    };
    let files = emit(&report, &args.out, args.format)?;
    let selection = Selection {
        index: best,
        cell: best.map(|i| &report.cells[i]),
    };
    write_json(&selection, &args.out.join("selected.json"))?;
    write_json(&spec, &args.out.join("grid.json"))?;

    let converged = report.cells.iter().filter(|c| c.converged).count();
    println!("{} cells, {converged} converged, {} files in {}", report.len(), files.len() + 2, args.out.display());
    if let Some(c) = selection.cell {
        println!(
            "selected λ_S = {}, λ_L = {}, α = {}: {} pairs, {} latent",
            c.lambda_s,
            c.lambda_l,
            c.alpha,
            c.pairs.unwrap_or(0),
            c.latent_count.unwrap_or(0)
        );
        if !c.converged {
            return Err(Failure::NotConverged("selected cell did not converge".into()));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MaxentDoc {
    m: usize,
    n: usize,
    period: usize,
    x_lags: Vec<Vec<Vec<f64>>>,
    /// `‖P_ℬ(X⁻¹) − Σ̂‖ / ‖Σ̂‖`
    moment_gap: f64,
}

fn maxent(args: MaxentArgs) -> Outcome {
    let series = read_series(&args.data)?;
    let (sigma, _) = training_sigma(&series, args.order, args.period)?;
    let x = maxent_solve(&sigma)?;
    let back = x.inverse()?.project_banded(args.order)?;
    let gap = (&*back - &*sigma).norm() / sigma.norm();
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_json(
        &MaxentDoc {
            m: x.m(),
            n: x.bandwidth(),
            period: x.period(),
            x_lags: x.lags().iter().map(matrix_to_doc).collect(),
            moment_gap: gap,
        },
        &args.out,
    )?;
    println!("moment gap {gap:.3e}");
    Ok(())
}

fn spectrum_cmd(args: SpectrumArgs) -> Outcome {
    let estimate = args.estimate.as_deref().map(EstimateDoc::load).transpose()?;
    let truth = args.truth.as_deref().map(GroundTruthModel::load).transpose()?;
    let x = match (&estimate, &truth) {
        (Some(e), _) => e.concentration()?,
        (None, Some(t)) => t.concentration(),
        (None, None) => return Err(usage("give --estimate, --truth or both")),
    };
    if args.points == 0 {
        return Err(usage("--points must be positive"));
    }
    let theta = theta_grid(args.points);
    let phi = spectrum(&x, &theta)?;
    let err = match (&estimate, &truth) {
        (Some(_), Some(t)) => Some(spectral_error(&x, &t.concentration(), &theta)?),
        _ => None,
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut w = csv::Writer::from_path(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let mut header = vec!["theta", "trace", "frobenius"];
    if err.is_some() {
        header.push("relative_error");
    }
    w.write_record(&header)?;
    for (i, (t, p)) in theta.iter().zip(&phi).enumerate() {
        let mut row = vec![t.to_string(), p.trace().re.to_string(), p.norm().to_string()];
        if let Some(e) = &err {
            row.push(e.curve[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    if let Some(e) = err {
        println!("mean relative spectral error {:.4}", e.mean);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Identify(a) => identify(a),
        Command::Synth(a) => synth(a),
        Command::Grid(a) => grid(a),
        Command::Maxent(a) => maxent(a),
        Command::Spectrum(a) => spectrum_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
