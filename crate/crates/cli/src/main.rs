mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qforecast::harness::{
    compare, feasible_windows, make_plan, random_search, run_backtest, SearchResult,
};
use qforecast::metrics::{calibration_of, mql, quantile_losses};
use qforecast::newsvendor::{verify_optimum, Demand, NewsvendorSpec, Normal, Uniform};
use qforecast::panel::{ingest_csv, panel_paths, write_csv, SynthOptions};
use qforecast::{Actuals, ForecastSet, Panel, QuantileSet, SplitSpec};

use config::RunConfig;

/// Errors caused by how the tool was invoked rather than by the run itself.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(Usage(format!("{e:#}")))
}

/// Quantile forecasting toolkit: ingestion, rolling backtests, random
/// search, model comparison and the newsvendor calculator.
#[derive(Parser)]
#[command(name = "qforecast", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "QFORECAST_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate long CSV input (or generate a synthetic panel) and write it
    /// in canonical form.
    Ingest(IngestArgs),
    /// Rolling-origin backtest; writes forecasts.csv, metrics.csv and manifest.json.
    Backtest(RunArgs),
    /// Random hyperparameter search; writes leaderboard.csv and best_config.txt.
    Search(SearchArgs),
    /// Compare forecast runs; writes report.csv and the QL, CL and difference tables.
    Compare(CompareArgs),
    /// Optimal stocking quantile for unit economics given as p=.. v=.. g=.. B=..
    Newsvendor(NewsvendorArgs),
}

#[derive(Args)]
struct Overwrite {
    /// Replace existing output files instead of failing.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct IngestArgs {
    /// Long `unique_id,ds,y` file.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    series: Option<PathBuf>,
    /// Long `unique_id,ds,dow` file.
    #[arg(long)]
    exog: Option<PathBuf>,
    /// `unique_id,center,family` file.
    #[arg(long)]
    statics: Option<PathBuf>,
    /// Generate a synthetic demand panel of SERIES x DAYS instead of reading files.
    #[arg(long, value_name = "SERIES,DAYS", value_parser = parse_pair)]
    synthetic: Option<(usize, usize)>,
    /// Seed of the synthetic panel.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overwrite: Overwrite,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected SERIES,DAYS")?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated quantile levels.
    #[arg(long)]
    quantiles: Option<String>,
    #[command(flatten)]
    overwrite: Overwrite,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of sampled configurations (overrides the config).
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Panel directory with the actuals.
    #[arg(long)]
    data: PathBuf,
    /// NAME=PATH, where PATH is a forecasts CSV or a backtest output directory.
    #[arg(long = "run", required = true, value_parser = parse_run)]
    runs: Vec<(String, PathBuf)>,
    /// Run the differences are taken against (default: the last run).
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overwrite: Overwrite,
}

fn parse_run(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected NAME=PATH")?;
    if name.is_empty() {
        return Err("empty run name".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyDemand {
    Uniform,
    Normal,
}

#[derive(Args)]
struct NewsvendorArgs {
    /// Unit economics as KEY=VALUE: p (price), v (cost), g (salvage), B (shortage penalty, default 0).
    #[arg(required = true, value_name = "KEY=VALUE")]
    terms: Vec<String>,
    /// Check the closed form against a grid search of expected profit.
    #[arg(long)]
    verify: Option<VerifyDemand>,
    #[arg(long, default_value_t = 10_001)]
    grid: usize,
    /// Uniform demand bounds.
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    /// Normal demand parameters.
    #[arg(long, default_value_t = 100.0)]
    mean: f64,
    #[arg(long, default_value_t = 20.0)]
    sd: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage(anyhow!("--jobs must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Backtest(a) => backtest(a),
        Command::Search(a) => search(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Newsvendor(a) => newsvendor(a),
    }
}

/// Creates `dir` and refuses to replace any of `files` unless allowed.
fn prepare_out(dir: &Path, files: &[&str], overwrite: bool) -> Result<()> {
    if !overwrite {
        if let Some(f) = files.iter().find(|f| dir.join(f).exists()) {
            return Err(usage(anyhow!(
                "{} already exists (pass --overwrite to replace it)",
                dir.join(f).display()
            )));
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_panel(dir: &Path) -> Result<Panel> {
    let (series, exog, statics) = panel_paths(dir);
    let exog = exog.exists().then_some(exog);
    let statics = statics.exists().then_some(statics);
    ingest_csv(&series, exog.as_deref(), statics.as_deref()).with_context(|| format!("loading panel from {}", dir.display()))
}

fn ingest(a: IngestArgs) -> Result<ExitCode> {
    let panel = match (a.synthetic, &a.series) {
        (Some((n_series, n_days)), _) => SynthOptions::new(n_series, n_days, a.seed).generate()?,
        (None, Some(series)) => ingest_csv(series, a.exog.as_deref(), a.statics.as_deref())?,
        (None, None) => unreachable!("clap requires --series or --synthetic"),
    };
    prepare_out(&a.out, &["series.csv", "exog.csv", "statics.csv"], a.overwrite.overwrite)?;
    let written = write_csv(&panel, &a.out)?;
    println!(
        "{} series, {} to {}, fingerprint {}",
        panel.len(),
        panel.start_date(),
        panel.end_date(),
        panel.fingerprint()
    );
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// The config file with command-line overrides applied.
fn resolve(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&a.config).map_err(usage)?;
    if let Some(out) = &a.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(m) = &a.model {
        cfg.set("model", m).map_err(usage)?;
    }
    if let Some(q) = &a.quantiles {
        cfg.set("quantiles", q).map_err(usage)?;
    }
    cfg.opts.neural.validate().map_err(|e| usage(e.into()))?;
    Ok(cfg)
}

fn split_of(cfg: &RunConfig, panel: &Panel) -> Result<SplitSpec> {
    SplitSpec::trailing(panel, cfg.val_days, cfg.test_days).context("splitting the panel")
}

const BACKTEST_FILES: [&str; 4] = ["forecasts.csv", "metrics.csv", "manifest.json", "config.txt"];

fn backtest(a: RunArgs) -> Result<ExitCode> {
    let cfg = resolve(&a)?;
    prepare_out(&cfg.out, &BACKTEST_FILES, a.overwrite.overwrite)?;
    let panel = load_panel(&cfg.data)?;
    let split = split_of(&cfg, &panel)?;
    let n_windows = cfg
        .n_windows
        .unwrap_or_else(|| feasible_windows(split.test_span_days(), cfg.horizon, cfg.stride));
    let mut plan = make_plan(&panel, &split, cfg.horizon, cfg.stride, n_windows).map_err(|e| usage(e.into()))?;
    plan.retrain = cfg.retrain;
    plan.ensemble_size = cfg.ensemble_size;
    plan.earlystop_windows = cfg.earlystop_windows;
    plan.earlystop_length = cfg.earlystop_length;
    plan.seed = cfg.seed;
    plan.shared_instance_seeds = cfg.shared_instance_seeds;
    plan.validate().map_err(|e| usage(e.into()))?;
    eprintln!(
        "backtest {} over {} series: {} windows from {}",
        cfg.model,
        panel.len(),
        plan.n_windows(),
        plan.origins[0]
    );

    let result = run_backtest(&panel, &plan, cfg.model, &cfg.opts, &cfg.quantiles)?;
    let out = &cfg.out;
    std::fs::write(out.join("config.txt"), cfg.to_text())?;
    result.forecasts.write_csv_path(&out.join("forecasts.csv"))?;
    result.manifest.write_json(&out.join("manifest.json"))?;
    if !result.forecasts.is_empty() {
        let actuals = Actuals::for_forecasts(&panel, &result.forecasts)?;
        write_metrics(&out.join("metrics.csv"), &actuals, &result.forecasts)?;
        println!("MQL {:.6}", mql(&actuals, &result.forecasts)?);
    }
    println!("wrote {}", out.display());
    let m = &result.manifest;
    if m.n_failed > 0 {
        for w in m.windows.iter().filter(|w| w.error.is_some()) {
            eprintln!("window {} (origin {}) failed: {}", w.index, w.origin, w.error.as_deref().unwrap_or(""));
        }
        eprintln!("{} of {} windows failed", m.n_failed, m.windows.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

/// `metric,percentile,value` rows: QL and CL per quantile, then the MQL.
fn write_metrics(path: &Path, actuals: &Actuals, fc: &ForecastSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "percentile", "value"])?;
    for (qi, &q) in fc.quantiles().as_slice().iter().enumerate() {
        let losses = quantile_losses(actuals, fc, qi)?;
        let ql = losses.iter().sum::<f64>() / losses.len() as f64;
        let label = QuantileSet::label(q);
        w.write_record(["ql", &label, &ql.to_string()])?;
        w.write_record(["cl", &label, &calibration_of(actuals, fc, qi)?.to_string()])?;
    }
    w.write_record(["mql", "all", &mql(actuals, fc)?.to_string()])?;
    w.flush()?;
    Ok(())
}

const SEARCH_FILES: [&str; 2] = ["leaderboard.csv", "best_config.txt"];

fn search(a: SearchArgs) -> Result<ExitCode> {
    let mut cfg = resolve(&a.run)?;
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    if cfg.budget == 0 {
        return Err(usage(anyhow!("budget: must be at least 1")));
    }
    if !cfg.model.is_neural() {
        return Err(usage(anyhow!("model: '{}' has no hyperparameters to search", cfg.model)));
    }
    prepare_out(&cfg.out, &SEARCH_FILES, a.run.overwrite.overwrite)?;
    let panel = load_panel(&cfg.data)?;
    let split = split_of(&cfg, &panel)?;
    eprintln!("search {} with budget {} over {} series", cfg.model, cfg.budget, panel.len());
    let result = random_search(
        &panel,
        &split,
        cfg.model,
        &cfg.opts,
        &cfg.space,
        cfg.budget,
        cfg.horizon,
        &cfg.quantiles,
        cfg.seed,
    )?;
    write_leaderboard(&cfg.out.join("leaderboard.csv"), &result)?;
    let mut best = cfg.clone();
    best.opts.neural = result.best.clone();
    std::fs::write(cfg.out.join("best_config.txt"), best.to_text())?;
    println!("best validation MQL {:.6}", result.best_score);
    println!("wrote {}", cfg.out.display());
    if !result.best_score.is_finite() {
        eprintln!("every trial failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_leaderboard(path: &Path, result: &SearchResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "rank",
        "trial",
        "score",
        "cell_type",
        "dilations",
        "state_hsize",
        "add_nl_layer",
        "input_size_multiplier",
        "learning_rate",
        "lr_decay",
        "lr_scheduler_step_size",
        "batch_size",
        "n_iterations",
        "early_stopping_patience",
        "gradient_clipping_threshold",
        "noise_std",
        "error",
    ])?;
    for (rank, t) in result.ranked().into_iter().enumerate() {
        let o = &t.opts;
        w.write_record([
            (rank + 1).to_string(),
            t.index.to_string(),
            t.score.to_string(),
            o.cell_type.to_string(),
            qforecast::drnn::format_dilations(&o.dilations),
            o.state_hsize.to_string(),
            o.add_nl_layer.to_string(),
            o.input_size_multiplier.to_string(),
            o.train.learning_rate.to_string(),
            o.train.lr_decay.to_string(),
            o.train.lr_scheduler_step_size.to_string(),
            o.train.batch_size.to_string(),
            o.train.n_iterations.to_string(),
            o.train.early_stopping_patience.to_string(),
            o.train.gradient_clipping_threshold.to_string(),
            o.train.noise_std.to_string(),
            t.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<ExitCode> {
    let reference = a.reference.clone().unwrap_or_else(|| a.runs.last().expect("required").0.clone());
    if !a.runs.iter().any(|(n, _)| *n == reference) {
        return Err(usage(anyhow!("reference: '{reference}' is not among the runs")));
    }
    prepare_out(
        &a.out,
        &["report.csv", "ql_table.csv", "cl_table.csv", "diff_table.csv"],
        a.overwrite.overwrite,
    )?;
    let panel = load_panel(&a.data)?;
    let runs: Vec<(String, ForecastSet)> = a
        .runs
        .iter()
        .map(|(name, path)| {
            let file = if path.is_dir() { path.join("forecasts.csv") } else { path.clone() };
            let set = ForecastSet::read_csv_path(&file).with_context(|| format!("reading run '{name}'"))?;
            Ok((name.clone(), set))
        })
        .collect::<Result<_>>()?;
    let actuals = Actuals::for_forecasts(&panel, &runs[0].1)?;
    let report = compare(&runs, &actuals, &reference)?;
    report.write_csvs(&a.out)?;
    print!("{}", report.render());
    println!("wrote {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn newsvendor(a: NewsvendorArgs) -> Result<ExitCode> {
    let (mut p, mut v, mut g, mut b) = (None, None, None, Some(0.0));
    for term in &a.terms {
        let (k, val) = term
            .split_once('=')
            .ok_or_else(|| usage(anyhow!("expected KEY=VALUE, found '{term}'")))?;
        let x: f64 = val
            .parse()
            .map_err(|_| usage(anyhow!("{k}: cannot parse '{val}' as a number")))?;
        match k {
            "p" => p = Some(x),
            "v" => v = Some(x),
            "g" => g = Some(x),
            "B" | "b" => b = Some(x),
            _ => return Err(usage(anyhow!("unknown term '{k}' (expected p, v, g or B)"))),
        }
    }
    let need = |name: &str, x: Option<f64>| x.ok_or_else(|| usage(anyhow!("missing {name}=VALUE")));
    let spec = NewsvendorSpec::new(need("p", p)?, need("v", v)?, need("g", g)?, need("B", b)?)
        .map_err(|e| usage(e.into()))?;
    println!(
        "p = {}, v = {}, g = {}, B = {}",
        spec.price(),
        spec.cost(),
        spec.salvage(),
        spec.shortage_penalty()
    );
    println!("q* = {}", spec.optimal_quantile());
    if let Some(kind) = a.verify {
        let demand: Box<dyn Demand> = match kind {
            VerifyDemand::Uniform => {
                if !(a.hi > a.lo) {
                    bail!(Usage(format!("uniform demand needs lo < hi, got [{}, {}]", a.lo, a.hi)));
                }
                println!("demand ~ Uniform({}, {})", a.lo, a.hi);
                Box::new(Uniform { lo: a.lo, hi: a.hi })
            }
            VerifyDemand::Normal => {
                println!("demand ~ Normal({}, {})", a.mean, a.sd);
                Box::new(Normal::new(a.mean, a.sd).map_err(|e| usage(e.into()))?)
            }
        };
        let ver = verify_optimum(&spec, demand.as_ref(), a.grid).map_err(|e| usage(e.into()))?;
        println!("closed-form stock = {}", ver.closed_form_stock);
        println!("grid argmax stock = {}", ver.argmax_stock);
        println!("gap = {} (grid step {})", ver.gap, ver.grid_step);
    }
    Ok(ExitCode::SUCCESS)
}
