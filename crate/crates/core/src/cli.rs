//! Command-line front end: `select`, `curve` and `stats`.
//!
//! Every run resolves a [`RunConfig`] (defaults, then an optional JSON config
//! file, then explicit flags), echoes it to `config.echo.json` and writes
//! machine-readable outputs into the output directory. Exit code 1 means an
//! I/O failure, 2 a validation failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv, minmax_normalize, partition_by_class, Dataset, LabelColumn};
use crate::error::{Error, Result};
use crate::evaluation::{curve_for_ranking, EvalConfig, EvaluationCurve, Metric};
use crate::selector::{select, SelectionTrace};
use crate::separability::{SeparabilityParams, Variant};
use crate::stats::{f_critical_value, friedman, load_score_table, nemenyi_cd, nemenyi_q, rank_rows};

/// Balancing-parameter values swept by `--grid`.
pub const GRID_VALUES: [f64; 9] = [0.0100, 0.0178, 0.0316, 0.0562, 0.1000, 0.1778, 0.3162, 0.5623, 1.0000];

pub const THREADS_ENV: &str = "SEPSELECT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sepselect", version, about = "Separability-driven feature selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank features by greedy separability gain.
    Select(RunArgs),
    /// Evaluate a ranking with kNN accuracy and/or k-means NMI curves.
    Curve(RunArgs),
    /// Friedman test and Nemenyi critical difference over a score table.
    Stats(StatsArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON run configuration; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Label column: header name, or `#index` (0-based).
    #[arg(long)]
    pub label: Option<String>,
    /// The input has no header row.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, overrides_with = "no_normalize")]
    pub normalize: bool,
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// full | no-dir-within | no-dir-between | distance-only
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// knn | nmi (repeatable)
    #[arg(long = "metric")]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_top: Option<usize>,
    /// Sweep the 9 x 9 (alpha, beta) grid and keep the best cell per metric.
    #[arg(long)]
    pub grid: bool,
    /// Also write `mask.csv` with the selected linear (pixel) indices.
    #[arg(long)]
    pub mask: bool,
    /// Ranking CSV for `curve` (defaults to `<out>/ranking.csv`).
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CSV: header of algorithm names, one row per dataset.
    #[arg(long)]
    pub scores: PathBuf,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Lower scores are better (e.g. error rates).
    #[arg(long)]
    pub lower_is_better: bool,
    /// Nemenyi q_alpha; looked up from the built-in table when omitted.
    #[arg(long)]
    pub q: Option<f64>,
    /// Write `stats.json` here in addition to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved configuration of a `select` or `curve` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub label: String,
    pub has_header: bool,
    pub normalize: bool,
    pub alpha: f64,
    pub beta: f64,
    pub variant: Variant,
    pub k: usize,
    pub metrics: Vec<Metric>,
    pub knn_k: usize,
    pub folds: usize,
    pub seed: u64,
    pub max_top: usize,
    pub grid: bool,
    pub mask: bool,
    pub ranking: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eval = EvalConfig::default();
        RunConfig {
            input: PathBuf::new(),
            label: String::new(),
            has_header: true,
            normalize: true,
            alpha: 1.0,
            beta: 1.0,
            variant: Variant::Full,
            k: 150,
            metrics: vec![Metric::Knn],
            knn_k: eval.knn_k,
            folds: eval.folds,
            seed: eval.seed,
            max_top: eval.max_top,
            grid: false,
            mask: false,
            ranking: None,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Defaults, overlaid by `args.config` (if any), overlaid by explicit flags.
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &args.input {
            cfg.input = v.clone();
        }
        if let Some(v) = &args.label {
            cfg.label = v.clone();
        }
        if args.no_header {
            cfg.has_header = false;
        }
        if args.normalize {
            cfg.normalize = true;
        }
        if args.no_normalize {
            cfg.normalize = false;
        }
        if let Some(v) = args.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = args.beta {
            cfg.beta = v;
        }
        if let Some(v) = &args.variant {
            cfg.variant = v.parse()?;
        }
        if let Some(v) = args.k {
            cfg.k = v;
        }
        if !args.metrics.is_empty() {
            cfg.metrics = args
                .metrics
                .iter()
                .map(|m| m.parse())
                .collect::<Result<Vec<Metric>>>()?;
        }
        if let Some(v) = args.knn_k {
            cfg.knn_k = v;
        }
        if let Some(v) = args.folds {
            cfg.folds = v;
        }
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.max_top {
            cfg.max_top = v;
        }
        if args.grid {
            cfg.grid = true;
        }
        if args.mask {
            cfg.mask = true;
        }
        if let Some(v) = &args.ranking {
            cfg.ranking = Some(v.clone());
        }
        if let Some(v) = &args.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::InvalidArgument("--input is required".into()));
        }
        if self.label.is_empty() {
            return Err(Error::InvalidArgument("--label is required".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidArgument("at least one metric is required".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        self.params()?.validate()?;
        self.eval_config().validate()
    }

    pub fn params(&self) -> Result<SeparabilityParams> {
        SeparabilityParams::new(self.alpha, self.beta, self.variant)
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            knn_k: self.knn_k,
            folds: self.folds,
            seed: self.seed,
            max_top: self.max_top,
            ..EvalConfig::default()
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let label: LabelColumn = self.label.parse()?;
        let d = load_csv(&self.input, &label, self.has_header)?;
        Ok(if self.normalize { minmax_normalize(&d) } else { d })
    }

    fn ranking_path(&self) -> PathBuf {
        self.ranking.clone().unwrap_or_else(|| self.out.join("ranking.csv"))
    }
}

#[derive(Serialize)]
struct TraceFile<'a> {
    params: &'a SeparabilityParams,
    k: usize,
    steps: Vec<TraceStepRecord<'a>>,
}

#[derive(Serialize)]
struct TraceStepRecord<'a> {
    rank: usize,
    feature_index: usize,
    feature_name: &'a str,
    gain: f64,
    theta_dis: f64,
    theta_dir: f64,
    lambda_dis: f64,
    lambda_dir: f64,
    sep: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub metric: Metric,
    pub max: f64,
    pub ave: f64,
}

impl From<&EvaluationCurve> for CurveSummary {
    fn from(c: &EvaluationCurve) -> Self {
        CurveSummary {
            metric: c.metric,
            max: c.max_value,
            ave: c.ave_value,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub summaries: Vec<CurveSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridBest {
    pub metric: Metric,
    pub alpha: f64,
    pub beta: f64,
    pub max: f64,
    pub ave: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridReport {
    pub variant: Variant,
    pub k: usize,
    pub cells: Vec<GridCell>,
    pub best: Vec<GridBest>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_trace(dir: &Path, d: &Dataset, trace: &SelectionTrace, mask: bool) -> Result<()> {
    let names = d.feature_names();
    let steps = trace
        .steps
        .iter()
        .enumerate()
        .map(|(r, s)| TraceStepRecord {
            rank: r + 1,
            feature_index: s.feature,
            feature_name: &names[s.feature],
            gain: s.gain,
            theta_dis: s.score_after.theta_dis,
            theta_dir: s.score_after.theta_dir,
            lambda_dis: s.score_after.lambda_dis,
            lambda_dir: s.score_after.lambda_dir,
            sep: s.score_after.sep,
        })
        .collect();
    write_json(
        &dir.join("trace.json"),
        &TraceFile {
            params: &trace.params,
            k: trace.k,
            steps,
        },
    )?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_io = |e: csv::Error| Error::Csv {
        path: dir.join("ranking.csv"),
        source: e,
    };
    w.write_record(["rank", "feature_index", "feature_name", "gain"])
        .map_err(csv_io)?;
    for (r, s) in trace.steps.iter().enumerate() {
        w.write_record([
            (r + 1).to_string(),
            s.feature.to_string(),
            names[s.feature].clone(),
            s.gain.to_string(),
        ])
        .map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(dir, e.into_error()))?;
    write_file(&dir.join("ranking.csv"), &bytes)?;

    if mask {
        let mut idx = trace.features();
        idx.sort_unstable();
        let mut text = String::from("pixel_index\n");
        for i in idx {
            text.push_str(&format!("{i}\n"));
        }
        write_file(&dir.join("mask.csv"), text.as_bytes())?;
    }
    Ok(())
}

fn write_curve(dir: &Path, curve: &EvaluationCurve) -> Result<()> {
    let mut text = String::from("t,value\n");
    for (t, v) in curve.values.iter().enumerate() {
        text.push_str(&format!("{},{}\n", t + 1, v));
    }
    write_file(&dir.join(format!("curve_{}.csv", curve.metric)), text.as_bytes())?;
    if !curve.fold_std.is_empty() {
        let mut text = String::from("t,fold_std\n");
        for (t, v) in curve.fold_std.iter().enumerate() {
            text.push_str(&format!("{},{}\n", t + 1, v));
        }
        write_file(
            &dir.join(format!("curve_{}_folds.csv", curve.metric)),
            text.as_bytes(),
        )?;
    }
    Ok(())
}

/// Reads the `feature_index` column of a ranking CSV.
pub fn read_ranking(path: &Path) -> Result<Vec<usize>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let col = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .position(|h| h == "feature_index")
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no feature_index column", path.display())))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let cell = &rec[col];
        out.push(cell.parse().map_err(|_| Error::Parse {
            row: rec.position().map_or(0, |p| p.line() as usize),
            column: "feature_index".into(),
            value: cell.to_string(),
        })?);
    }
    if out.is_empty() {
        return Err(Error::Empty(path.display().to_string()));
    }
    Ok(out)
}

fn better(a: &CurveSummary, b: &CurveSummary) -> bool {
    a.max > b.max || (a.max == b.max && a.ave > b.ave)
}

/// Selection (or a grid of selections) and its output files.
/// Per metric: (summary, alpha, beta, trace, curve).
type BestCell = (CurveSummary, f64, f64, SelectionTrace, EvaluationCurve);

pub fn cmd_select(cfg: &RunConfig) -> Result<SelectionTrace> {
    let d = cfg.load_dataset()?;
    if cfg.k > d.m() {
        return Err(Error::InvalidK { k: cfg.k, m: d.m() });
    }
    let part = partition_by_class(&d);
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join("config.echo.json"), cfg)?;

    if !cfg.grid {
        let trace = select(&d, &part, cfg.k, &cfg.params()?)?;
        write_trace(&cfg.out, &d, &trace, cfg.mask)?;
        return Ok(trace);
    }

    let eval = cfg.eval_config();
    let mut cells = Vec::with_capacity(GRID_VALUES.len() * GRID_VALUES.len());
    let mut best: Vec<Option<BestCell>> = vec![None; cfg.metrics.len()];
    for &alpha in &GRID_VALUES {
        for &beta in &GRID_VALUES {
            let params = SeparabilityParams::new(alpha, beta, cfg.variant)?;
            let trace = select(&d, &part, cfg.k, &params)?;
            let mut summaries = Vec::with_capacity(cfg.metrics.len());
            for (slot, &metric) in best.iter_mut().zip(&cfg.metrics) {
                let curve = curve_for_ranking(&d, &trace.features(), metric, &eval)?;
                let summary = CurveSummary::from(&curve);
                log::info!(
                    "alpha={alpha} beta={beta} {metric}: max={:.4} ave={:.4}",
                    summary.max,
                    summary.ave
                );
                if slot.as_ref().is_none_or(|(b, ..)| better(&summary, b)) {
                    *slot = Some((summary.clone(), alpha, beta, trace.clone(), curve));
                }
                summaries.push(summary);
            }
            cells.push(GridCell {
                alpha,
                beta,
                summaries,
            });
        }
    }

    let mut best: Vec<_> = best.into_iter().map(|b| b.expect("grid is non-empty")).collect();
    write_json(
        &cfg.out.join("grid.json"),
        &GridReport {
            variant: cfg.variant,
            k: cfg.k,
            cells,
            best: best
                .iter()
                .map(|(s, alpha, beta, ..)| GridBest {
                    metric: s.metric,
                    alpha: *alpha,
                    beta: *beta,
                    max: s.max,
                    ave: s.ave,
                })
                .collect(),
        },
    )?;
    for (_, _, _, _, curve) in &best {
        write_curve(&cfg.out, curve)?;
    }
    write_json(
        &cfg.out.join("summary.json"),
        &best.iter().map(|(s, ..)| s.clone()).collect::<Vec<_>>(),
    )?;
    let trace = best.swap_remove(0).3;
    write_trace(&cfg.out, &d, &trace, cfg.mask)?;
    Ok(trace)
}

/// Curves for an existing ranking.
pub fn cmd_curve(cfg: &RunConfig) -> Result<Vec<EvaluationCurve>> {
    let d = cfg.load_dataset()?;
    let ranking = read_ranking(&cfg.ranking_path())?;
    if let Some(&bad) = ranking.iter().find(|&&j| j >= d.m()) {
        return Err(Error::FeatureOutOfRange { index: bad, m: d.m() });
    }
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join("config.echo.json"), cfg)?;
    let eval = cfg.eval_config();
    let mut curves = Vec::with_capacity(cfg.metrics.len());
    for &metric in &cfg.metrics {
        let curve = curve_for_ranking(&d, &ranking, metric, &eval)?;
        write_curve(&cfg.out, &curve)?;
        curves.push(curve);
    }
    write_json(
        &cfg.out.join("summary.json"),
        &curves.iter().map(CurveSummary::from).collect::<Vec<_>>(),
    )?;
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub algorithms: Vec<String>,
    pub n_datasets: usize,
    pub avg_ranks: Vec<f64>,
    pub chi2: f64,
    pub f_stat: Option<f64>,
    pub dof: (usize, usize),
    pub level: f64,
    pub critical_value: f64,
    pub significant: Option<bool>,
    pub q_alpha: f64,
    pub cd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn cmd_stats(args: &StatsArgs) -> Result<StatsReport> {
    let table = load_score_table(&args.scores)?;
    let ranks = rank_rows(&table.scores, !args.lower_is_better)?;
    let s = ranks.n_algorithms();
    let n = ranks.n_datasets();
    let dof = (s - 1, (s - 1) * (n - 1));
    let critical_value = f_critical_value(args.alpha, dof)?;
    let q_alpha = match args.q {
        Some(q) => q,
        None => nemenyi_q(args.alpha, s).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no tabulated q for alpha={} and s={s}; pass --q",
                args.alpha
            ))
        })?,
    };
    let cd = nemenyi_cd(s, n, q_alpha)?;
    let sum_sq: f64 = ranks.avg_ranks.iter().map(|r| r * r).sum();
    let (sf, nf) = (s as f64, n as f64);
    let chi2_raw = (12.0 * nf / (sf * (sf + 1.0)) * (sum_sq - sf * (sf + 1.0) * (sf + 1.0) / 4.0)).max(0.0);
    let report = match friedman(&ranks, Some(critical_value)) {
        Ok(f) => StatsReport {
            algorithms: table.algorithms,
            n_datasets: n,
            avg_ranks: ranks.avg_ranks,
            chi2: f.chi2,
            f_stat: Some(f.f_stat),
            dof,
            level: args.alpha,
            critical_value,
            significant: f.significant,
            q_alpha,
            cd,
            error: None,
        },
        Err(e @ Error::DegenerateFriedman(_)) => StatsReport {
            algorithms: table.algorithms,
            n_datasets: n,
            avg_ranks: ranks.avg_ranks,
            chi2: chi2_raw,
            f_stat: None,
            dof,
            level: args.alpha,
            critical_value,
            significant: None,
            q_alpha,
            cd,
            error: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    };
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_json(&dir.join("stats.json"), &report)?;
    }
    Ok(report)
}

/// Configures the global thread pool from `SEPSELECT_THREADS`, if set.
pub fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={raw:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot configure thread pool: {e}")))
}

pub fn run(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    match cli.command {
        Command::Select(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let trace = cmd_select(&cfg)?;
            log::info!("selected {} features into {}", trace.len(), cfg.out.display());
        }
        Command::Curve(args) => {
            let cfg = RunConfig::resolve(&args)?;
            for c in cmd_curve(&cfg)? {
                log::info!("{}: max={:.4} ave={:.4}", c.metric, c.max_value, c.ave_value);
            }
        }
        Command::Stats(args) => {
            let report = cmd_stats(&args)?;
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

/// Process exit code for an error: 1 for I/O, 2 for everything else.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        1
    } else {
        2
    }
}
