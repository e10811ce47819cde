//! `admg-augment` command line: augment, train, eval and bench.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 unparsable input, 3 invalid
//! input, 4 augmentation node cap exceeded, 5 learner failure. Output files
//! are written to a temporary file next to the destination and renamed into
//! place, so a failed command never leaves a partial file behind.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::admg::{Admg, GraphFile};
use crate::augment::{fill_prob_tree, AugmentConfig, AugmentError, AugmentedDataset, Theta, DEFAULT_NODE_CAP};
use crate::data::{DataError, Dataset};
use crate::gbrt::{config_grid, default_grid, fit_with_cv, CvResult, GbrtConfig, GbrtError, ModelFile};
use crate::kernels::{bandwidth_plan, BandwidthPlan, DegeneratePolicy, KernelError, KernelKind, DEFAULT_GAMMA};
use crate::risk::{combine_training_set, RiskError, DEFAULT_LAMBDA};
use crate::synth::{run_benchmark, BenchmarkConfig, LinearSem, SynthError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    NodeCap(String),
    #[error("{0}")]
    Learner(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Invalid(_) => 3,
            CliError::NodeCap(_) => 4,
            CliError::Learner(_) => 5,
        }
    }
}

fn data_error(path: &Path, e: DataError) -> CliError {
    let p = path.display();
    match e {
        DataError::Parse { line, message } => CliError::Parse(format!("{p}:{line}: {message}")),
        DataError::Csv(e) => match e.position() {
            Some(pos) => CliError::Parse(format!("{p}:{}: {e}", pos.line())),
            None => CliError::Parse(format!("{p}: {e}")),
        },
        DataError::Io(e) => CliError::Io(format!("{p}: {e}")),
        other => CliError::Invalid(format!("{p}: {other}")),
    }
}

fn kernel_error(e: KernelError) -> CliError {
    CliError::Invalid(e.to_string())
}

fn augment_error(e: AugmentError) -> CliError {
    match e {
        AugmentError::NodeCapExceeded { .. } => CliError::NodeCap(e.to_string()),
        other => CliError::Invalid(other.to_string()),
    }
}

fn risk_error(e: RiskError) -> CliError {
    CliError::Invalid(e.to_string())
}

fn gbrt_error(e: GbrtError) -> CliError {
    CliError::Learner(e.to_string())
}

fn synth_error(path: &Path, e: SynthError) -> CliError {
    match e {
        SynthError::Parse(p) => CliError::Parse(format!("{}:{}: {}", path.display(), p.line, p.message)),
        SynthError::InvalidSem(m) => CliError::Invalid(format!("{}: {m}", path.display())),
        SynthError::InvalidConfig(m) => CliError::Invalid(m),
        SynthError::Data(e) => data_error(path, e),
        SynthError::Kernel(e) => kernel_error(e),
        SynthError::Augment(e) => augment_error(e),
        SynthError::Risk(e) => risk_error(e),
        SynthError::Gbrt(e) => gbrt_error(e),
    }
}

#[derive(Debug, Parser)]
#[command(name = "admg-augment", version, about = "Causal-graph data augmentation for tabular regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the weighted augmented dataset for a CSV and a graph.
    Augment(AugmentArgs),
    /// Fit a boosted tree model on the original plus augmented data.
    Train(TrainArgs),
    /// Print the test MSE of a saved model on a CSV.
    Eval(EvalArgs),
    /// Run the augmented-vs-plain benchmark on data simulated from a SEM file.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Clone)]
pub struct KernelArgs {
    /// Multiplier applied to the rule-of-thumb bandwidths.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Pruning threshold on node weights, or `auto` for 1e-3/n.
    #[arg(long, default_value = "auto")]
    pub theta: Theta,
    /// Abort when the probability tree holds more live nodes than this.
    #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
    pub node_cap: usize,
    /// Use bandwidth gamma for constant columns instead of failing.
    #[arg(long)]
    pub constant_column_fallback: bool,
}

impl KernelArgs {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(CliError::Invalid(format!("--gamma must be positive, got {}", self.gamma)));
        }
        if let Theta::Fixed(t) = self.theta {
            if !(0.0..1.0).contains(&t) {
                return Err(CliError::Invalid(format!("--theta must lie in [0, 1), got {t}")));
            }
        }
        Ok(())
    }

    fn policy(&self) -> DegeneratePolicy {
        if self.constant_column_fallback {
            DegeneratePolicy::UnitBandwidth
        } else {
            DegeneratePolicy::Error
        }
    }

    fn augment_config(&self) -> AugmentConfig {
        AugmentConfig { theta: self.theta, node_cap: self.node_cap, renormalize: false }
    }
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    /// Target column (recorded only; augmentation covers every column).
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated discrete columns, added to any `discrete:` line in the graph file.
    #[arg(long, value_delimiter = ',')]
    pub discrete: Vec<String>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Augmented CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Run report; defaults to `<out>.report.txt`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write the source row index of every column.
    #[arg(long)]
    pub sources: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Graph file; may be omitted when --lambda is 0.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub target: String,
    /// Weight of the augmented risk in the training objective.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',')]
    pub discrete: Vec<String>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Hyper-parameter grid, e.g. `K=10,50;rho=1,10`; also accepts M (max leaves) and lr.
    #[arg(long, default_value = "K=10,50,250,1250;rho=1,10,100,1000")]
    pub grid: String,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Seed for the cross-validation folds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file (JSON) to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV with the validation MSE of every grid cell.
    #[arg(long)]
    pub cv_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Target column; defaults to the one stored in the model.
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// SEM specification file.
    #[arg(long)]
    pub sem: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Rows simulated once and split per cell.
    #[arg(long, default_value_t = 400)]
    pub n_total: usize,
    /// Train fractions: `0.1,0.5` or `start:stop:step` (inclusive).
    #[arg(long, default_value = "0.1")]
    pub fractions: String,
    /// Repetitions per fraction.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value = "K=10,50,250,1250;rho=1,10,100,1000")]
    pub grid: String,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Long-format CSV (fraction, method, seed, mse).
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregate CSV; defaults to `<out stem>.aggregate.csv`.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
}

/// Parses `K=10,50;rho=1,10[;M=64][;lr=0.3]`.
pub fn parse_grid(spec: &str) -> Result<Vec<GbrtConfig>, CliError> {
    let bad = |m: String| CliError::Parse(format!("--grid: {m}"));
    let mut rounds: Option<Vec<usize>> = None;
    let mut rhos: Option<Vec<f64>> = None;
    let mut base = GbrtConfig::default();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part.split_once('=').ok_or_else(|| bad(format!("expected key=values, got `{part}`")))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(bad(format!("no values for `{}`", key.trim())));
        }
        let reals = || {
            values
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("`{v}` is not a number"))))
                .collect::<Result<Vec<f64>, _>>()
        };
        let single = |what: &str| {
            if values.len() == 1 {
                Ok(values[0])
            } else {
                Err(bad(format!("{what} takes a single value")))
            }
        };
        match key.trim() {
            "K" => {
                rounds = Some(
                    values
                        .iter()
                        .map(|v| v.parse::<usize>().map_err(|_| bad(format!("`{v}` is not a round count"))))
                        .collect::<Result<_, _>>()?,
                )
            }
            "rho" => rhos = Some(reals()?),
            "M" => base.max_leaves = single("M")?.parse().map_err(|_| bad("M must be an integer".into()))?,
            "lr" => base.learning_rate = single("lr")?.parse().map_err(|_| bad("lr must be a number".into()))?,
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    let defaults = default_grid();
    let rounds = rounds.unwrap_or_else(|| {
        let mut k: Vec<usize> = defaults.iter().map(|c| c.rounds).collect();
        k.dedup();
        k
    });
    let rhos = rhos.unwrap_or_else(|| defaults.iter().take(4).map(|c| c.l2_reg).collect());
    let grid = config_grid(&base, &rounds, &rhos);
    for c in &grid {
        c.validate().map_err(|e| CliError::Invalid(format!("--grid: {e}")))?;
    }
    Ok(grid)
}

/// Parses `0.1,0.5` or an inclusive range `start:stop:step`.
pub fn parse_fractions(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Parse(format!("--fractions: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
    let parts: Vec<&str> = spec.split(':').collect();
    let out = match parts.as_slice() {
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(bad("range needs start <= stop and a positive step".into()));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // round away the accumulated binary noise (0.15000000000000002 -> 0.15)
            (0..count).map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10).collect()
        }
        _ => return Err(bad(format!("cannot parse `{spec}`"))),
    };
    Ok(out)
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush().map_err(io)?;
    }
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_dataset(path: &Path, discrete: &[String], target: Option<&str>) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut data = Dataset::read_csv(BufReader::new(file)).map_err(|e| data_error(path, e))?;
    if data.n_rows() == 0 {
        return Err(CliError::Invalid(format!("{}: no data rows", path.display())));
    }
    data = data.with_discrete(discrete).map_err(|e| data_error(path, e))?;
    if let Some(t) = target {
        data = data.with_target(t).map_err(|e| data_error(path, e))?;
    }
    Ok(data)
}

fn read_graph(path: &Path) -> Result<GraphFile, CliError> {
    let text = read_text(path)?;
    let file =
        Admg::parse(&text).map_err(|e| CliError::Parse(format!("{}:{}: {}", path.display(), e.line, e.message)))?;
    file.graph.validate().map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(file)
}

struct Augmentation {
    plan: BandwidthPlan,
    aug: AugmentedDataset,
    theta: f64,
}

fn augment_dataset(data: &Dataset, graph: &Admg, kernel: &KernelArgs) -> Result<Augmentation, CliError> {
    let plan = bandwidth_plan(data, kernel.gamma, kernel.policy()).map_err(kernel_error)?;
    let config = kernel.augment_config();
    let aug = fill_prob_tree(data, graph, &plan, &config).map_err(augment_error)?;
    Ok(Augmentation { theta: config.theta.resolve(data.n_rows()), plan, aug })
}

fn report_text(data: &Dataset, graph: &Admg, kernel: &KernelArgs, result: &Augmentation) -> String {
    let mut s = String::new();
    let aug = &result.aug;
    let order: Vec<&str> = aug.topo_columns().iter().map(|&c| data.names()[c].as_str()).collect();
    let _ = writeln!(s, "rows: {}", data.n_rows());
    let _ = writeln!(s, "columns: {}", data.n_columns());
    let _ = writeln!(s, "edges: {} directed, {} bidirected", graph.directed_edges().count(), graph.bidirected_edges().count());
    let _ = writeln!(s, "order: {}", order.join(", "));
    let _ = writeln!(s, "gamma: {:e}", kernel.gamma);
    let _ = writeln!(s, "theta: {:e}", result.theta);
    let _ = writeln!(s, "bandwidths:");
    for (name, k) in data.names().iter().zip(result.plan.kernels()) {
        match k.kind {
            KernelKind::Gaussian => {
                let _ = writeln!(s, "  {name}: gaussian h={:.16e}", k.bandwidth);
            }
            KernelKind::Identity => {
                let _ = writeln!(s, "  {name}: identity");
            }
        }
    }
    let _ = writeln!(s, "live_nodes: {}", aug.live_nodes());
    let _ = writeln!(s, "samples: {}", aug.len());
    let _ = writeln!(s, "total_weight: {:.16e}", aug.total_weight());
    if aug.is_empty() {
        let _ = writeln!(s, "note: zero surviving samples at this threshold");
    }
    s
}

fn merged_discrete(graph_file: &GraphFile, extra: &[String]) -> Vec<String> {
    let mut out = graph_file.discrete.clone();
    for d in extra {
        if !out.contains(d) {
            out.push(d.clone());
        }
    }
    out
}

pub fn cmd_augment(args: &AugmentArgs) -> Result<(), CliError> {
    args.kernel.validate()?;
    let graph_file = read_graph(&args.graph)?;
    let discrete = merged_discrete(&graph_file, &args.discrete);
    let data = read_dataset(&args.data, &discrete, args.target.as_deref())?;
    let start = Instant::now();
    let result = augment_dataset(&data, &graph_file.graph, &args.kernel)?;
    eprintln!(
        "augment: {} samples from {} live nodes in {:.3} s",
        result.aug.len(),
        result.aug.live_nodes(),
        start.elapsed().as_secs_f64()
    );
    let report = report_text(&data, &graph_file.graph, &args.kernel, &result);
    let out_err = |e: DataError| data_error(&args.out, e);
    write_atomic(&args.out, |w| result.aug.write_csv(w, args.sources).map_err(out_err))?;
    let report_path = args.report.clone().unwrap_or_else(|| suffixed(&args.out, ".report.txt"));
    write_atomic(&report_path, |w| {
        w.write_all(report.as_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", report_path.display())))
    })?;
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn check_lambda(lambda: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("--lambda must lie in [0, 1], got {lambda}")))
    }
}

fn write_cv_log(w: &mut dyn Write, cv: &CvResult) -> std::io::Result<()> {
    let folds = cv.cells.first().map_or(0, |c| c.fold_mse.len());
    let mut header = String::from("K,rho,max_leaves,learning_rate");
    for f in 0..folds {
        let _ = write!(header, ",fold{f}_mse");
    }
    header.push_str(",mean_mse,selected");
    writeln!(w, "{header}")?;
    for (i, cell) in cv.cells.iter().enumerate() {
        let c = &cell.config;
        write!(w, "{},{},{},{}", c.rounds, c.l2_reg, c.max_leaves, c.learning_rate)?;
        for m in &cell.fold_mse {
            write!(w, ",{m:.16e}")?;
        }
        writeln!(w, ",{:.16e},{}", cell.mean_mse, u8::from(i == cv.best_index))?;
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    check_lambda(args.lambda)?;
    args.kernel.validate()?;
    let grid = parse_grid(&args.grid)?;
    let graph_file = match &args.graph {
        Some(p) => Some(read_graph(p)?),
        None if args.lambda == 0.0 => None,
        None => return Err(CliError::Invalid("--graph is required unless --lambda is 0".into())),
    };
    let discrete = match &graph_file {
        Some(g) => merged_discrete(g, &args.discrete),
        None => args.discrete.clone(),
    };
    let data = read_dataset(&args.data, &discrete, Some(&args.target))?;
    let start = Instant::now();
    let aug = match &graph_file {
        Some(g) if args.lambda > 0.0 => Some(augment_dataset(&data, &g.graph, &args.kernel)?.aug),
        _ => None,
    };
    let samples = combine_training_set(&data, aug.as_ref(), args.lambda).map_err(risk_error)?;
    let (model, cv) = fit_with_cv(&samples, &grid, args.folds, args.seed).map_err(gbrt_error)?;
    eprintln!(
        "train: {} weighted samples, selected K={} rho={} in {:.3} s",
        samples.len(),
        cv.best().rounds,
        cv.best().l2_reg,
        start.elapsed().as_secs_f64()
    );
    let features = data.feature_columns().iter().map(|&c| data.names()[c].clone()).collect();
    let file = ModelFile::new(features, args.target.clone(), *cv.best(), model);
    let json = file.to_json().map_err(gbrt_error)?;
    if let Some(log) = &args.cv_log {
        write_atomic(log, |w| write_cv_log(w, &cv).map_err(|e| CliError::Io(format!("{}: {e}", log.display()))))?;
    }
    write_atomic(&args.out, |w| {
        w.write_all(json.as_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))
    })
}

/// Mean squared error of the saved model on the CSV.
pub fn evaluate(args: &EvalArgs) -> Result<f64, CliError> {
    let text = read_text(&args.model)?;
    let file = ModelFile::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", args.model.display())))?;
    let target = args.target.as_deref().unwrap_or(&file.target);
    let data = read_dataset(&args.data, &[], Some(target))?;
    let columns = file
        .feature_names
        .iter()
        .map(|n| data.column_index(n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| data_error(&args.data, e))?;
    let t = data.column_index(target).map_err(|e| data_error(&args.data, e))?;
    let mut x = vec![0.0; columns.len()];
    let mut total = 0.0;
    for r in 0..data.n_rows() {
        for (xi, &c) in x.iter_mut().zip(&columns) {
            *xi = data.value(r, c);
        }
        let e = data.value(r, t) - file.model.predict(&x).map_err(gbrt_error)?;
        total += e * e;
    }
    Ok(total / data.n_rows() as f64)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let mse = evaluate(args)?;
    println!("{mse:.16e}");
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    check_lambda(args.lambda)?;
    args.kernel.validate()?;
    let grid = parse_grid(&args.grid)?;
    let fractions = parse_fractions(&args.fractions)?;
    let sem = LinearSem::parse(&read_text(&args.sem)?).map_err(|e| synth_error(&args.sem, e))?;
    let config = BenchmarkConfig {
        target: args.target.clone(),
        n_total: args.n_total,
        fractions,
        seeds: args.seeds,
        master_seed: args.seed,
        grid,
        folds: args.folds,
        lambda: args.lambda,
        gamma: args.kernel.gamma,
        theta: args.kernel.theta,
        node_cap: args.kernel.node_cap,
        degenerate: args.kernel.policy(),
        jobs: args.jobs,
    };
    let start = Instant::now();
    let report = run_benchmark(&sem, &config).map_err(|e| synth_error(&args.sem, e))?;
    eprintln!("bench: {} cells in {:.3} s", report.cells.len(), start.elapsed().as_secs_f64());
    for s in &report.summaries {
        eprintln!(
            "fraction {}: baseline {:.6} ± {:.6}, proposed {:.6} ± {:.6}, relative {:+.3}% ± {:.3}",
            s.fraction, s.baseline_mean, s.baseline_se, s.proposed_mean, s.proposed_se, s.relative_mean, s.relative_se
        );
    }
    let aggregate = args.aggregate.clone().unwrap_or_else(|| args.out.with_extension("aggregate.csv"));
    write_atomic(&args.out, |w| report.write_long_csv(w).map_err(|e| data_error(&args.out, e)))?;
    write_atomic(&aggregate, |w| report.write_aggregate_csv(w).map_err(|e| data_error(&aggregate, e)))?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Augment(a) => cmd_augment(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec() {
        let g = parse_grid("K=10,50;rho=1,10").unwrap();
        let pairs: Vec<(usize, f64)> = g.iter().map(|c| (c.rounds, c.l2_reg)).collect();
        assert_eq!(pairs, vec![(10, 1.0), (10, 10.0), (50, 1.0), (50, 10.0)]);
        assert_eq!(parse_grid("K=10,50,250,1250;rho=1,10,100,1000").unwrap(), default_grid());
        assert_eq!(parse_grid("").unwrap(), default_grid());
        let g = parse_grid("K=5;rho=0;M=8;lr=1").unwrap();
        assert_eq!(g, vec![GbrtConfig { rounds: 5, l2_reg: 0.0, max_leaves: 8, learning_rate: 1.0, min_child_weight: 0.0 }]);
        assert!(matches!(parse_grid("K=a"), Err(CliError::Parse(_))));
        assert!(matches!(parse_grid("Q=1"), Err(CliError::Parse(_))));
        assert!(matches!(parse_grid("K=0"), Err(CliError::Invalid(_))));
    }

    #[test]
    fn fraction_spec() {
        assert_eq!(parse_fractions("0.1,0.5").unwrap(), vec![0.1, 0.5]);
        let sweep = parse_fractions("0.1:0.85:0.05").unwrap();
        assert_eq!(sweep.len(), 16);
        assert_eq!(sweep[1], 0.15);
        assert_eq!(*sweep.last().unwrap(), 0.85);
        assert!(parse_fractions("0.5:0.1:0.1").is_err());
    }

    #[test]
    fn bench_aggregate_path() {
        assert_eq!(Path::new("out/long.csv").with_extension("aggregate.csv"), Path::new("out/long.aggregate.csv"));
    }
}
