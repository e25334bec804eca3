use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use jsrt_core::bench::{
    ablation, parse_lambda_grid, run_cv, shrinkage_analysis, BenchError, BenchMethod, DatasetSpec, RunSpec,
};
use jsrt_core::synthetic::standard_suite;
use jsrt_core::{fit, load_csv, load_model, save_model, InductionConfig, JsConfig, Method, TargetColumn};

/// Fit, apply and benchmark James-Stein regression trees.
#[derive(Parser)]
#[command(name = "jsrt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a tree on a CSV file and save it as JSON.
    Fit(FitArgs),
    /// Predict every row of a CSV file with a saved model.
    Predict(PredictArgs),
    /// Repeated k-fold comparison of methods.
    Bench(BenchArgs),
    /// Correlate P-JSRT shrink weight with its MSE reduction over CART.
    Shrinkage(ReportArgs),
    /// Sweep λ for C-JSRT and CP-JSRT.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Target column, by header name or 0-based index.
    #[arg(long)]
    target: TargetColumn,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
    #[arg(long, default_value = "CART")]
    method: Method,
    #[arg(long, default_value_t = 20)]
    min_split: usize,
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    /// Construction-stage λ for C-JSRT and CP-JSRT.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Accepted for symmetry with `bench`; fitting is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with a header naming the model's feature columns.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpecArgs {
    /// RunSpec JSON file. Flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// CSV dataset; repeat for several.
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Target column for every `--data` file.
    #[arg(long)]
    target: Option<TargetColumn>,
    #[arg(long)]
    no_header: bool,
    /// Add the bundled synthetic datasets.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_split: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Fit folds on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Comma-separated, e.g. `CART,P-JSRT,KNNRT`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// `start:end:step` or a comma-separated list.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidSpec(_) | BenchError::SchemaVersionMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Data(other.into()),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl SpecArgs {
    fn build(&self) -> Result<RunSpec, Failure> {
        let mut spec = match &self.spec {
            Some(path) => RunSpec::load(path)?,
            None => RunSpec::default(),
        };
        if !self.data.is_empty() {
            let target = self
                .target
                .clone()
                .ok_or_else(|| usage("--data needs --target"))?;
            for path in &self.data {
                spec.datasets.push(DatasetSpec::csv(path, target.clone(), !self.no_header));
            }
        }
        if self.synthetic {
            spec.datasets.extend(standard_suite().into_iter().map(DatasetSpec::synthetic));
        }
        if spec.datasets.is_empty() {
            return Err(usage("no datasets: pass --spec, --data or --synthetic"));
        }
        set(&mut spec.k, self.k);
        set(&mut spec.repeats, self.repeats);
        set(&mut spec.seed, self.seed);
        set(&mut spec.min_split, self.min_split);
        set(&mut spec.min_leaf, self.min_leaf);
        if self.serial {
            spec.parallel = false;
        }
        Ok(spec)
    }
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

fn parse_methods(text: &str) -> Result<Vec<BenchMethod>, Failure> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse().map_err(usage))
        .collect()
}

fn write_report(path: Option<&Path>, json: &str) -> Result<(), Failure> {
    if let Some(path) = path {
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("report written to {}", path.display());
    }
    Ok(())
}

fn run_fit(args: FitArgs) -> Result<(), Failure> {
    if !(args.lambda >= 0.0 && args.lambda.is_finite()) {
        return Err(usage("--lambda must be finite and >= 0"));
    }
    let data = load_csv(&args.data, &args.target, !args.no_header)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let config = InductionConfig {
        min_split: args.min_split,
        min_leaf: args.min_leaf,
        method: args.method,
        js: args.method.uses_js().then(|| JsConfig::with_lambda(args.lambda)),
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let model = fit(&data, &config).context("fitting")?;
    save_model(&model, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "{} tree with {} leaves on {} rows written to {}",
        args.method,
        model.n_leaves(),
        data.n_samples(),
        args.out.display()
    );
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), Failure> {
    let model = load_model(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let file = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .context("reading header")?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let columns: Vec<usize> = model
        .feature_names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| anyhow!("feature column `{name}` not found in {}", args.data.display()))
        })
        .collect::<Result<_, _>>()?;

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(&mut out);
    writer.write_record(["prediction"]).context("writing output")?;
    let mut x = vec![0.0; columns.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.context("reading CSV")?;
        for (slot, &c) in x.iter_mut().zip(&columns) {
            let cell = record.get(c).unwrap_or("").trim();
            *slot = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| anyhow!("row {}: `{}` is not a number in column `{}`", row + 1, cell, headers[c]))?;
        }
        let y = model.predict(&x).context("predicting")?;
        writer.write_record([y.to_string()]).context("writing output")?;
    }
    writer.flush().context("writing output")?;
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    let mut spec = args.spec.build()?;
    if let Some(m) = &args.methods {
        spec.methods = parse_methods(m)?;
    }
    set(&mut spec.lambda, args.lambda);
    set(&mut spec.knn_k, args.knn_k);
    let report = run_cv(&spec)?;
    print!("{}", report.render());
    write_report(args.report.as_deref(), &report.to_json())
}

fn run_shrinkage(args: ReportArgs) -> Result<(), Failure> {
    let spec = args.spec.build()?;
    let report = shrinkage_analysis(&spec)?;
    print!("{}", report.render());
    write_report(args.report.as_deref(), &report.to_json())
}

fn run_ablate(args: AblateArgs) -> Result<(), Failure> {
    let mut spec = args.spec.build()?;
    if let Some(grid) = &args.lambda_grid {
        spec.lambda_grid = parse_lambda_grid(grid).map_err(usage)?;
    } else if spec.lambda_grid.is_empty() {
        spec.lambda_grid = parse_lambda_grid("1:50:5").map_err(usage)?;
    }
    if !spec.methods.iter().any(|m| matches!(m, BenchMethod::CJsrt | BenchMethod::CpJsrt)) {
        spec.methods = BenchMethod::ALL[..4].to_vec();
    }
    let report = ablation(&spec)?;
    print!("{}", report.render());
    write_report(args.report.as_deref(), &report.to_json())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Bench(a) => run_bench(a),
        Command::Shrinkage(a) => run_shrinkage(a),
        Command::Ablate(a) => run_ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
