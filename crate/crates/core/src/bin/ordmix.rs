//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when the library reports an error, 2 for
//! invalid flags or configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use ordmix::datagen::{self, GenConfig};
use ordmix::dataio::{self, DataConfig, ModelFile};
use ordmix::gradcheck::{self, GradcheckConfig};
use ordmix::training::{self, cross_validate, run_experiment, Grid, Method, SelectionMetric, TrainSpec};
use ordmix::window::{build_windows, build_windows_with};
use ordmix::{EvalReport, OrdinalScale};

#[derive(Parser)]
#[command(
    name = "ordmix",
    version,
    about = "Persistence-gated mixture of experts for ordinal time series"
)]
struct Cli {
    /// Worker threads for cross-validation and repeats.
    #[arg(long, global = true, env = "ORDMIX_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic series CSV.
    Generate(GenerateArgs),
    /// Window a series and summarize the resulting patterns.
    Windows(WindowsArgs),
    /// Select hyperparameters by cross-validation and fit one model.
    Train(TrainArgs),
    /// Score a saved model on a series.
    Evaluate(EvaluateArgs),
    /// Run every configured method over every split and write reports.
    Experiment(ExperimentArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Write per-pattern predictions of a saved model.
    Trace(TraceArgs),
}

#[derive(Args)]
struct ScaleArgs {
    /// Named scale: rvr or cloud_height.
    #[arg(long)]
    scale: Option<String>,
    /// Comma-separated ascending cut-points for raw values.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Number of classes when the file holds label ranks.
    #[arg(long)]
    classes: Option<usize>,
}

impl ScaleArgs {
    fn resolve(&self) -> Result<OrdinalScale, CliError> {
        DataConfig {
            files: Vec::new(),
            synthetic: None,
            blocks: 1,
            scale: self.scale.clone(),
            thresholds: self.thresholds.clone(),
            num_classes: self.classes,
            test_fraction: 0.3,
        }
        .ordinal_scale()
        .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Destination CSV.
    #[arg(long)]
    out: PathBuf,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of hourly steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Number of ordinal classes.
    #[arg(long)]
    classes: Option<usize>,
    /// Features per step (at least 2).
    #[arg(long)]
    features: Option<usize>,
    /// Probability that the label stays put.
    #[arg(long)]
    persistence: Option<f64>,
    /// Separation of the switch signal in the features.
    #[arg(long)]
    strength: Option<f64>,
    /// Probability that a step is dropped.
    #[arg(long)]
    gap: Option<f64>,
    /// Comma-separated stationary class probabilities.
    #[arg(long, value_delimiter = ',')]
    marginals: Option<Vec<f64>>,
    /// Also print the Monte-Carlo Bayes accuracy.
    #[arg(long)]
    bayes: bool,
}

#[derive(Args)]
struct WindowsArgs {
    /// Series CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    scale: ScaleArgs,
    /// Lagged steps in each window.
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// Forecast horizon in steps.
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Write the standardized patterns as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Hidden-unit grid.
    #[arg(long = "m", value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Iteration grid.
    #[arg(long, value_delimiter = ',')]
    iter: Option<Vec<usize>>,
    /// L2 strength grid.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Contiguous cross-validation folds.
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    /// amae, mmae, acc, gms or loss.
    #[arg(long, default_value = "amae")]
    selection_metric: String,
}

impl GridArgs {
    fn grid(&self) -> Grid {
        let d = Grid::default();
        Grid {
            m: self.m.clone().unwrap_or(d.m),
            iter: self.iter.clone().unwrap_or(d.iter),
            lambda: self.lambda.clone().unwrap_or(d.lambda),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training series CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    scale: ScaleArgs,
    /// Persist, POM, NNPOM, ITME, STME or STMEIC.
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 1)]
    delta: usize,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Seed for initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    /// Model JSON destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model JSON written by train.
    #[arg(long)]
    model: PathBuf,
    /// Series CSV to score.
    #[arg(long)]
    data: PathBuf,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Run configuration TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.csv and table.txt.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated methods replacing the configured list.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    /// Overrides the configured repeat count.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Perturb the analytic gradients; the check must then fail.
    #[arg(long, hide = true)]
    corrupt: bool,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<ordmix::Error> for CliError {
    fn from(e: ordmix::Error) -> Self {
        match e {
            ordmix::Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Domain(other.into()),
        }
    }
}

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    s.parse().map_err(|e: ordmix::Error| usage(format!("--method: {e}")))
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<GenConfig>(&text).map_err(|e| usage(format!("{}: {}", path.display(), e.message())))?
        }
        None => GenConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.steps {
        cfg.num_steps = v;
    }
    if let Some(v) = args.classes {
        cfg.num_classes = v;
    }
    if let Some(v) = args.features {
        cfg.feature_dim = v;
    }
    if let Some(v) = args.persistence {
        cfg.base_persistence = v;
    }
    if let Some(v) = args.strength {
        cfg.switch_signal_strength = v;
    }
    if let Some(v) = args.gap {
        cfg.gap_probability = v;
    }
    if let Some(v) = args.marginals {
        cfg.class_marginals = v;
    }
    cfg.switch_rates()?;
    let series = datagen::generate(&cfg)?;
    ensure_parent(&args.out)?;
    dataio::write_series(&args.out, &series, None)?;
    println!("wrote {} records to {}", series.len(), args.out.display());
    if args.bayes {
        println!("bayes accuracy (k=1): {:.4}", datagen::oracle_bayes_accuracy(&cfg)?);
    }
    Ok(())
}

fn windows(args: WindowsArgs) -> CliResult {
    let scale = args.scale.resolve()?;
    if args.horizon == 0 {
        return Err(usage("--horizon must be at least 1"));
    }
    let series = dataio::read_series(&args.data, Some(&scale))?;
    let ds = build_windows(&series, args.delta, args.horizon, &scale)?;
    println!("patterns: {}", ds.len());
    println!("input dimension: {}", ds.input_dim());
    println!("class distribution: {:?}", ds.class_distribution());
    println!("persistence rate: {:.4}", ds.persistence_rate());
    if let Some(out) = args.out {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["origin_t".to_string(), "current_label".into(), "target".into()];
        header.extend((1..=ds.input_dim()).map(|i| format!("z{i}")));
        w.write_record(&header).context("encoding patterns")?;
        for p in &ds.patterns {
            let mut row = vec![
                p.origin_t.to_string(),
                p.current_label.rank().to_string(),
                p.target.rank().to_string(),
            ];
            row.extend(p.z.iter().map(f64::to_string));
            w.write_record(&row).context("encoding patterns")?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("encoding patterns: {e}"))?;
        ensure_parent(&out)?;
        dataio::write_atomic(&out, &bytes)?;
    }
    Ok(())
}

fn train(args: TrainArgs) -> CliResult {
    let scale = args.scale.resolve()?;
    let method = parse_method(&args.method)?;
    let selection_metric: SelectionMetric = args.grid.selection_metric.parse()?;
    let spec = TrainSpec {
        method,
        grid: args.grid.grid(),
        repeats: 1,
        seed: args.seed,
        cv_folds: args.grid.cv_folds,
        selection_metric,
    };
    spec.validate()?;
    if args.horizon == 0 {
        return Err(usage("--horizon must be at least 1"));
    }
    let series = dataio::read_series(&args.data, Some(&scale))?;
    let ds = build_windows(&series, args.delta, args.horizon, &scale)?;
    let model = if method.is_trained() {
        let cv = cross_validate(&ds, &spec)?;
        for (h, s) in &cv.scores {
            println!("cv {h}: {s:.6}");
        }
        println!("chosen: {}", cv.chosen);
        let mut m = training::fit(method, &ds, &cv.chosen, spec.seed)?;
        m.warnings.extend(cv.warnings);
        m
    } else {
        training::train_persist()
    };
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    ensure_parent(&args.out)?;
    dataio::write_model(&args.out, &ModelFile::new(model, &ds))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!("Acc   {:.2}", r.acc);
    println!("AMAE  {:.4}", r.amae);
    println!("MMAE  {:.4}", r.mmae);
    println!("GM    {:.2}", r.gms);
    for (q, n) in r.n_per_class.iter().enumerate() {
        println!(
            "C{}: n={n} mae={:.4} sensitivity={:.2}",
            q + 1,
            r.per_class_mae[q],
            r.per_class_sensitivity[q]
        );
    }
    if r.has_missing_classes() {
        println!("classes absent from the data: {:?}", r.missing_classes);
    }
}

fn load_model_windows(model: &Path, data: &Path) -> Result<(ModelFile, ordmix::WindowedDataset), CliError> {
    let mf = dataio::read_model(model)?;
    let series = dataio::read_series(data, Some(&mf.scale))?;
    let ds =
        build_windows_with(&series, mf.delta, mf.horizon, &mf.scale, &mf.standardization).map_err(|e| match e {
            ordmix::Error::DimensionMismatch { .. } => {
                CliError::Domain(anyhow!("{} does not match the model's inputs: {e}", data.display()))
            }
            other => other.into(),
        })?;
    Ok((mf, ds))
}

fn evaluate(args: EvaluateArgs) -> CliResult {
    let (mf, ds) = load_model_windows(&args.model, &args.data)?;
    let truth: Vec<_> = ds.targets().collect();
    let pred = mf.model.predict_all(&ds)?;
    let report = EvalReport::from_labels(&truth, &pred, ds.num_classes())?;
    print_report(&report);
    if let Some(out) = args.out {
        ensure_parent(&out)?;
        let bytes = serde_json::to_vec_pretty(&report).context("encoding report")?;
        dataio::write_atomic(&out, &bytes)?;
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> CliResult {
    let mut cfg = dataio::read_run_config(&args.config).map_err(|e| match e {
        ordmix::Error::Parse { .. } => usage(e.to_string()),
        other => other.into(),
    })?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = args.repeats {
        cfg.repeats = v;
    }
    if let Some(names) = &args.method {
        cfg.methods = names.iter().map(|n| parse_method(n)).collect::<Result<_, _>>()?;
    }
    cfg.validate()?;

    let splits = cfg.data.splits(&cfg.base_dir, cfg.delta, cfg.horizon)?;
    let mut reports = Vec::new();
    for &method in &cfg.methods {
        let report = run_experiment(&splits, &cfg.spec(method))?;
        for s in &report.splits {
            for w in &s.warnings {
                eprintln!("warning: {method} split {}: {w}", s.split);
            }
        }
        reports.push(report);
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let title = format!("Δ={}, k={}", cfg.delta, cfg.horizon);
    let table = dataio::render_table(&title, &reports);
    dataio::write_report(&reports, &args.out.join("report.csv"))?;
    dataio::write_atomic(&args.out.join("table.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn gradcheck_cmd(args: GradcheckArgs) -> CliResult {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let cfg = GradcheckConfig {
        trials: args.trials,
        seed: args.seed,
        corrupt: args.corrupt,
        ..GradcheckConfig::default()
    };
    let report = gradcheck::run(&cfg)?;
    println!("components checked: {}", report.components);
    println!("worst absolute error: {:.3e}", report.worst_absolute);
    println!(
        "worst relative error above the absolute floor: {:.3e}{}",
        report.worst_relative,
        report.worst_block.map(|b| format!(" ({b})")).unwrap_or_default()
    );
    if report.passed() {
        println!("all gradients within tolerance");
        Ok(())
    } else {
        Err(CliError::Domain(anyhow!(
            "{} components out of tolerance in: {}",
            report.failures.len(),
            report.failing_blocks().join(", ")
        )))
    }
}

fn trace(args: TraceArgs) -> CliResult {
    let (mf, ds) = load_model_windows(&args.model, &args.data)?;
    let bytes = dataio::trace_csv(&mf.model, &ds).map_err(|e| match e {
        ordmix::Error::DimensionMismatch { .. } => CliError::Domain(anyhow!("model and data disagree: {e}")),
        other => other.into(),
    })?;
    ensure_parent(&args.out)?;
    dataio::write_atomic(&args.out, &bytes)?;
    println!("wrote {} rows to {}", ds.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    if cli.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Domain(anyhow!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Generate(a) => generate(a),
        Command::Windows(a) => windows(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Trace(a) => trace(a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
