//! Linear structural equation models with latent confounders, and the
//! train/test benchmark that compares augmented and plain training on data
//! drawn from them.
//!
//! SEM files extend the graph format:
//!
//! ```text
//! vertices: Y, X1, X2
//! coef Y -> X1 = 1.0      # adds the edge
//! Y -> X2                 # plain edge, coefficient 1
//! conf X1 <-> X2 = 0.5    # shared N(0,1) latent scaled by 0.5 on both sides
//! noise X2 = 0.3          # default 1
//! quantize Y = [0.0]      # Y becomes the number of thresholds it exceeds
//! ```
//!
//! Quantization happens as soon as a vertex is generated, so children see the
//! coded value.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::admg::{parse_edge, split_names, strip_comment, Admg, EdgeLine, ParseError};
use crate::augment::{fill_prob_tree, AugmentConfig, AugmentError, Theta, DEFAULT_NODE_CAP};
use crate::data::{DataError, Dataset};
use crate::gbrt::{default_grid, fit_with_cv, GbrtConfig, GbrtError, GbrtModel};
use crate::kernels::{bandwidth_plan, DegeneratePolicy, KernelError, DEFAULT_GAMMA};
use crate::risk::{combine_training_set, Predictor, RiskError, DEFAULT_LAMBDA};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("line {}: {}", .0.line, .0.message)]
    Parse(#[from] ParseError),
    #[error("invalid SEM: {0}")]
    InvalidSem(String),
    #[error("invalid benchmark configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Gbrt(#[from] GbrtError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSem {
    graph: Admg,
    coefficients: BTreeMap<(usize, usize), f64>,
    confounding: BTreeMap<(usize, usize), f64>,
    noise: Vec<f64>,
    quantizers: Vec<Option<Vec<f64>>>,
}

impl LinearSem {
    /// Every edge of `graph` starts with weight 1 and every vertex with unit noise.
    pub fn new(graph: Admg) -> Self {
        let coefficients = graph.directed_edges().map(|e| (e, 1.0)).collect();
        let confounding = graph.bidirected_edges().map(|e| (e, 1.0)).collect();
        let d = graph.len();
        Self { graph, coefficients, confounding, noise: vec![1.0; d], quantizers: vec![None; d] }
    }

    pub fn graph(&self) -> &Admg {
        &self.graph
    }

    fn id(&self, name: &str) -> Result<usize, SynthError> {
        self.graph.vertex_id(name).ok_or_else(|| SynthError::InvalidSem(format!("unknown vertex `{name}`")))
    }

    pub fn set_coefficient(&mut self, from: &str, to: &str, value: f64) -> Result<(), SynthError> {
        let (a, b) = (self.id(from)?, self.id(to)?);
        self.graph.add_directed_ids(a, b).map_err(|e| SynthError::InvalidSem(e.to_string()))?;
        self.coefficients.insert((a, b), value);
        Ok(())
    }

    pub fn set_confounding(&mut self, a: &str, b: &str, value: f64) -> Result<(), SynthError> {
        let (a, b) = (self.id(a)?, self.id(b)?);
        self.graph.add_bidirected_ids(a, b).map_err(|e| SynthError::InvalidSem(e.to_string()))?;
        self.confounding.insert((a.min(b), a.max(b)), value);
        Ok(())
    }

    pub fn set_noise(&mut self, vertex: &str, scale: f64) -> Result<(), SynthError> {
        let v = self.id(vertex)?;
        self.noise[v] = scale;
        Ok(())
    }

    /// Codes the vertex as the number of `thresholds` its value exceeds.
    pub fn set_quantizer(&mut self, vertex: &str, thresholds: Vec<f64>) -> Result<(), SynthError> {
        let v = self.id(vertex)?;
        self.quantizers[v] = Some(thresholds);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.graph.validate().map_err(|e| SynthError::InvalidSem(e.to_string()))?;
        let names = self.graph.vertices();
        for (&(a, b), v) in &self.coefficients {
            if !v.is_finite() {
                return Err(SynthError::InvalidSem(format!("coefficient {} -> {} is not finite", names[a], names[b])));
            }
        }
        for (&(a, b), v) in &self.confounding {
            if !v.is_finite() {
                return Err(SynthError::InvalidSem(format!("confounding {} <-> {} is not finite", names[a], names[b])));
            }
        }
        for (v, &s) in self.noise.iter().enumerate() {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(SynthError::InvalidSem(format!("noise of `{}` must be finite and nonnegative", names[v])));
            }
        }
        for (v, q) in self.quantizers.iter().enumerate() {
            if let Some(t) = q {
                if t.is_empty() || t.iter().any(|x| !x.is_finite()) || t.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(SynthError::InvalidSem(format!(
                        "thresholds of `{}` must be finite and strictly increasing",
                        names[v]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut sem: Option<LinearSem> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |m: String| SynthError::Parse(ParseError::new(line_no, m));
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("vertices:") {
                if sem.is_some() {
                    return Err(err("duplicate `vertices:` header".into()));
                }
                let graph = Admg::new(split_names(rest)).map_err(|e| err(e.to_string()))?;
                if graph.is_empty() {
                    return Err(err("empty vertex list".into()));
                }
                sem = Some(LinearSem::new(graph));
                continue;
            }
            let s = sem.as_mut().ok_or_else(|| err("expected `vertices:` header first".into()))?;
            let located = |e: SynthError| match e {
                SynthError::InvalidSem(m) => err(m),
                other => other,
            };
            if line.starts_with("discrete:") {
                return Err(err("SEM files mark discrete vertices with `quantize`".into()));
            }
            if let Some(rest) = line.strip_prefix("coef ") {
                let (edge, value) = split_assignment(rest).ok_or_else(|| err(format!("malformed line `{line}`")))?;
                match parse_edge(edge) {
                    Some(EdgeLine::Directed(a, b)) => s.set_coefficient(a, b, parse_real(value, line_no)?).map_err(located)?,
                    _ => return Err(err(format!("expected `coef a -> b = value`, got `{line}`"))),
                }
            } else if let Some(rest) = line.strip_prefix("conf ") {
                let (edge, value) = split_assignment(rest).ok_or_else(|| err(format!("malformed line `{line}`")))?;
                match parse_edge(edge) {
                    Some(EdgeLine::Bidirected(a, b)) => s.set_confounding(a, b, parse_real(value, line_no)?).map_err(located)?,
                    _ => return Err(err(format!("expected `conf a <-> b = value`, got `{line}`"))),
                }
            } else if let Some(rest) = line.strip_prefix("noise ") {
                let (name, value) = split_assignment(rest).ok_or_else(|| err(format!("malformed line `{line}`")))?;
                s.set_noise(name, parse_real(value, line_no)?).map_err(located)?;
            } else if let Some(rest) = line.strip_prefix("quantize ") {
                let (name, value) = split_assignment(rest).ok_or_else(|| err(format!("malformed line `{line}`")))?;
                let inner = value
                    .strip_prefix('[')
                    .and_then(|v| v.strip_suffix(']'))
                    .ok_or_else(|| err(format!("expected `[t1, t2, ...]`, got `{value}`")))?;
                let thresholds = inner
                    .split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| parse_real(t, line_no))
                    .collect::<Result<Vec<_>, _>>()?;
                s.set_quantizer(name, thresholds).map_err(located)?;
            } else {
                match parse_edge(line) {
                    Some(EdgeLine::Directed(a, b)) => s.set_coefficient(a, b, 1.0).map_err(located)?,
                    Some(EdgeLine::Bidirected(a, b)) => s.set_confounding(a, b, 1.0).map_err(located)?,
                    None => return Err(err(format!("malformed line `{line}`"))),
                }
            }
        }
        let sem = sem.ok_or_else(|| SynthError::Parse(ParseError::new(1, "missing `vertices:` header")))?;
        sem.validate()?;
        Ok(sem)
    }
}

fn split_assignment(s: &str) -> Option<(&str, &str)> {
    let (lhs, rhs) = s.split_once('=')?;
    let (lhs, rhs) = (lhs.trim(), rhs.trim());
    (!lhs.is_empty() && !rhs.is_empty()).then_some((lhs, rhs))
}

fn parse_real(s: &str, line: usize) -> Result<f64, SynthError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| SynthError::Parse(ParseError::new(line, format!("`{s}` is not a finite number"))))
}

/// Draws `n` rows by ancestral sampling. Columns follow the vertex declaration order.
pub fn sample_sem(sem: &LinearSem, n: usize, seed: u64) -> Result<Dataset, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(sem, n, &mut rng)
}

fn sample_with(sem: &LinearSem, n: usize, rng: &mut impl Rng) -> Result<Dataset, SynthError> {
    sem.validate()?;
    let topo = sem.graph.validate().map_err(|e| SynthError::InvalidSem(e.to_string()))?;
    let d = sem.graph.len();
    let mut parents: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    for (&(a, b), &c) in &sem.coefficients {
        parents[b].push((a, c));
    }
    let pairs: Vec<((usize, usize), f64)> = sem.confounding.iter().map(|(&k, &v)| (k, v)).collect();
    let mut columns = vec![Vec::with_capacity(n); d];
    let mut value = vec![0.0; d];
    let mut latent = vec![0.0; pairs.len()];
    for _ in 0..n {
        for l in latent.iter_mut() {
            *l = rng.sample(StandardNormal);
        }
        for &v in topo.order() {
            let eps: f64 = rng.sample(StandardNormal);
            let mut x = sem.noise[v] * eps;
            for &(p, c) in &parents[v] {
                x += c * value[p];
            }
            for (((a, b), s), l) in pairs.iter().zip(&latent) {
                if *a == v || *b == v {
                    x += s * l;
                }
            }
            if let Some(t) = &sem.quantizers[v] {
                x = t.iter().filter(|&&t| x > t).count() as f64;
            }
            value[v] = x;
        }
        for (col, &x) in columns.iter_mut().zip(&value) {
            col.push(x);
        }
    }
    let mut data = Dataset::from_columns(sem.graph.vertices().to_vec(), columns)?;
    let discrete: Vec<&str> = (0..d)
        .filter(|&v| sem.quantizers[v].is_some())
        .map(|v| sem.graph.vertices()[v].as_str())
        .collect();
    data = data.with_discrete(&discrete)?;
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub target: String,
    pub n_total: usize,
    pub fractions: Vec<f64>,
    pub seeds: usize,
    pub master_seed: u64,
    pub grid: Vec<GbrtConfig>,
    pub folds: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub theta: Theta,
    pub node_cap: usize,
    pub degenerate: DegeneratePolicy,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
}

impl BenchmarkConfig {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            n_total: 400,
            fractions: vec![0.1],
            seeds: 20,
            master_seed: 0,
            grid: default_grid(),
            folds: 3,
            lambda: DEFAULT_LAMBDA,
            gamma: DEFAULT_GAMMA,
            theta: Theta::Auto,
            node_cap: DEFAULT_NODE_CAP,
            degenerate: DegeneratePolicy::Error,
            jobs: None,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.fractions.is_empty() || self.fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return bad("fractions must be nonempty and lie in (0, 1)".into());
        }
        if self.seeds == 0 {
            return bad("need at least one seed".into());
        }
        if self.n_total < 2 {
            return bad("n_total must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub fraction: f64,
    pub seed: usize,
    pub n_train: usize,
    pub augmented_samples: usize,
    pub baseline_mse: f64,
    pub proposed_mse: f64,
}

impl CellResult {
    /// Percentage change of the proposed test MSE relative to the baseline.
    pub fn relative_improvement(&self) -> f64 {
        relative_improvement(self.proposed_mse, self.baseline_mse)
    }
}

pub fn relative_improvement(proposed: f64, baseline: f64) -> f64 {
    (proposed - baseline) / baseline * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionSummary {
    pub fraction: f64,
    pub seeds: usize,
    pub baseline_mean: f64,
    pub baseline_se: f64,
    pub proposed_mean: f64,
    pub proposed_se: f64,
    pub relative_mean: f64,
    pub relative_se: f64,
}

/// Mean and standard error (sample sd over sqrt n; 0 for a single value).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub cells: Vec<CellResult>,
    pub summaries: Vec<FractionSummary>,
}

impl BenchmarkReport {
    fn from_cells(cells: Vec<CellResult>, fractions: &[f64]) -> Self {
        let summaries = fractions
            .iter()
            .map(|&fraction| {
                let rows: Vec<&CellResult> = cells.iter().filter(|c| c.fraction == fraction).collect();
                let base: Vec<f64> = rows.iter().map(|c| c.baseline_mse).collect();
                let prop: Vec<f64> = rows.iter().map(|c| c.proposed_mse).collect();
                let rel: Vec<f64> = rows.iter().map(|c| c.relative_improvement()).collect();
                let (baseline_mean, baseline_se) = mean_and_se(&base);
                let (proposed_mean, proposed_se) = mean_and_se(&prop);
                let (relative_mean, relative_se) = mean_and_se(&rel);
                FractionSummary {
                    fraction,
                    seeds: rows.len(),
                    baseline_mean,
                    baseline_se,
                    proposed_mean,
                    proposed_se,
                    relative_mean,
                    relative_se,
                }
            })
            .collect();
        Self { cells, summaries }
    }

    /// `fraction,method,seed,mse`, baseline row before proposed row per cell.
    pub fn write_long_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fraction", "method", "seed", "mse"])?;
        for c in &self.cells {
            for (method, mse) in [("baseline", c.baseline_mse), ("proposed", c.proposed_mse)] {
                w.write_record([c.fraction.to_string(), method.to_string(), c.seed.to_string(), format!("{mse:.16e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "fraction",
            "seeds",
            "baseline_mean",
            "baseline_se",
            "proposed_mean",
            "proposed_se",
            "rel_improvement_mean",
            "rel_improvement_se",
        ])?;
        for s in &self.summaries {
            let mut row = vec![s.fraction.to_string(), s.seeds.to_string()];
            for v in [s.baseline_mean, s.baseline_se, s.proposed_mean, s.proposed_se, s.relative_mean, s.relative_se] {
                row.push(format!("{v:.16e}"));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn test_mse(model: &GbrtModel, data: &Dataset) -> Result<f64, SynthError> {
    let mut total = 0.0;
    for r in 0..data.n_rows() {
        let (x, y) = data.features_and_target(r)?;
        let e = y - Predictor::predict(model, &x);
        total += e * e;
    }
    Ok(total / data.n_rows() as f64)
}

fn run_cell(
    sem: &LinearSem,
    full: &Dataset,
    config: &BenchmarkConfig,
    fraction: f64,
    seed: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CellResult, SynthError> {
    let n = full.n_rows();
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let (train_idx, test_idx) = idx.split_at_mut(n_train);
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train = full.select_rows(train_idx);
    let test = full.select_rows(test_idx);
    let cv_seed = rng.next_u64();

    let baseline_set = combine_training_set(&train, None, 0.0)?;
    let (proposed_set, augmented_samples) = if config.lambda > 0.0 {
        let plan = bandwidth_plan(&train, config.gamma, config.degenerate)?;
        let aug_config = AugmentConfig { theta: config.theta, node_cap: config.node_cap, renormalize: false };
        let aug = fill_prob_tree(&train, &sem.graph, &plan, &aug_config)?;
        (combine_training_set(&train, Some(&aug), config.lambda)?, aug.len())
    } else {
        (baseline_set.clone(), 0)
    };
    let (baseline, _) = fit_with_cv(&baseline_set, &config.grid, config.folds, cv_seed)?;
    let (proposed, _) = fit_with_cv(&proposed_set, &config.grid, config.folds, cv_seed)?;
    Ok(CellResult {
        fraction,
        seed,
        n_train,
        augmented_samples,
        baseline_mse: test_mse(&baseline, &test)?,
        proposed_mse: test_mse(&proposed, &test)?,
    })
}

/// Samples `n_total` rows once from `master_seed`, then for every
/// (fraction, seed) cell splits, augments the train part, fits both learners
/// with a shared CV seed and scores them on the test part.
pub fn run_benchmark(sem: &LinearSem, config: &BenchmarkConfig) -> Result<BenchmarkReport, SynthError> {
    config.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(config.master_seed);
    let full = sample_with(sem, config.n_total, &mut master)?.with_target(&config.target)?;
    let cells: Vec<(usize, f64, usize)> = config
        .fractions
        .iter()
        .enumerate()
        .flat_map(|(fi, &f)| (0..config.seeds).map(move |s| (fi * config.seeds + s, f, s)))
        .collect();
    let run = |&(id, fraction, seed): &(usize, f64, usize)| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
        rng.set_stream(1 + id as u64);
        run_cell(sem, &full, config, fraction, seed, &mut rng)
    };
    let results: Vec<Result<CellResult, SynthError>> = match config.jobs {
        Some(1) => cells.iter().map(run).collect(),
        jobs => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
            pool.install(|| cells.par_iter().map(run).collect())
        }
    };
    let cells = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(BenchmarkReport::from_cells(cells, &config.fractions))
}
