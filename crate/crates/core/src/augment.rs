//! Probability-tree expansion of the augmented sample set.
//!
//! Each augmented sample is an index tuple `i = (i_1, …, i_D)`: the value of
//! the variable at topological position `j` is copied from source row `i_j`.
//! Its weight is a product of conditional resampling weights, one per depth,
//! where the weight of picking row `k` at depth `j` is the kernel similarity
//! of row `k`'s pillow values to the pillow values already chosen, normalized
//! over all rows (zero when every similarity is zero).
//!
//! The tree is expanded depth-first in lexicographic child order. A node
//! whose weight is below `theta` is abandoned together with its subtree; since
//! edge weights at one node are nonnegative and sum to 0 or 1, node weights
//! never increase with depth and no surviving leaf is lost. Zero-weight nodes
//! are never kept. Worst-case cost is `O(n^D)`.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::admg::{Admg, AdmgError};
use crate::data::{ColumnKind, DataError, Dataset};
use crate::kernels::{log_product_kernel, BandwidthPlan, KernelError};

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// Enumeration guard for [`brute_force_weights`].
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Graph(#[from] AdmgError),
    #[error("graph and data disagree: {0}")]
    GraphDataMismatch(String),
    #[error("bandwidth plan does not match the data: {0}")]
    PlanGraphMismatch(String),
    #[error("pruning threshold must lie in [0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("more than {cap} live tree nodes after pruning; raise the node cap or the threshold")]
    NodeCapExceeded { cap: usize },
    #[error("{n}^{d} index tuples exceed the enumeration limit")]
    TooLarge { n: usize, d: usize },
    #[error("dataset has no rows")]
    EmptyData,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Pruning threshold, either fixed or `1e-3 / n` resolved against the data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Theta {
    #[default]
    Auto,
    Fixed(f64),
}

impl Theta {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Theta::Auto => 1e-3 / n.max(1) as f64,
            Theta::Fixed(t) => t,
        }
    }
}

impl std::str::FromStr for Theta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Theta::Auto);
        }
        s.parse::<f64>().map(Theta::Fixed).map_err(|_| format!("expected `auto` or a number, got `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub theta: Theta,
    pub node_cap: usize,
    /// Rescale surviving weights to sum to one. Off by default.
    pub renormalize: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { theta: Theta::Auto, node_cap: DEFAULT_NODE_CAP, renormalize: false }
    }
}

impl AugmentConfig {
    pub fn with_theta(theta: f64) -> Self {
        Self { theta: Theta::Fixed(theta), ..Self::default() }
    }
}

/// Weighted augmented samples in lexicographic order of their index tuples
/// (tuples taken in topological order). Per-sample vectors are stored in
/// dataset column order.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
    target: Option<usize>,
    topo_columns: Vec<usize>,
    sources: Vec<u32>,
    values: Vec<f64>,
    weights: Vec<f64>,
    live_nodes: usize,
    theta: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    /// Source row per column.
    pub sources: &'a [u32],
    /// Copied value per column.
    pub values: &'a [f64],
    pub weight: f64,
}

impl AugmentedDataset {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }

    /// Dataset columns in the topological order used for expansion.
    pub fn topo_columns(&self) -> &[usize] {
        &self.topo_columns
    }

    /// Tree nodes (all depths) that survived pruning.
    pub fn live_nodes(&self) -> usize {
        self.live_nodes
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        let d = self.names.len();
        Sample {
            sources: &self.sources[i * d..(i + 1) * d],
            values: &self.values[i * d..(i + 1) * d],
            weight: self.weights[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Sample<'_>> {
        (0..self.len()).map(|i| self.sample(i))
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Map from source tuple (column order) to weight.
    pub fn weight_map(&self) -> BTreeMap<Vec<usize>, f64> {
        self.iter().map(|s| (s.sources.iter().map(|&r| r as usize).collect(), s.weight)).collect()
    }

    /// Original headers, then `__weight`, then optionally `__src_<col>`.
    pub fn write_csv<W: Write>(&self, writer: W, with_sources: bool) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.names.clone();
        header.push("__weight".into());
        if with_sources {
            header.extend(self.names.iter().map(|n| format!("__src_{n}")));
        }
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for s in self.iter() {
            rec.clear();
            rec.extend(s.values.iter().map(f64::to_string));
            rec.push(format!("{:.16e}", s.weight));
            if with_sources {
                rec.extend(s.sources.iter().map(u32::to_string));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn total_weight(aug: &AugmentedDataset) -> f64 {
    aug.total_weight()
}

/// Normalized resampling weights over the `n` rows for one query: row `i`
/// gets `K(query - Z_i^pillow) / sum_k K(query - Z_k^pillow)`. Uniform for an
/// empty pillow, all zero when no row has positive similarity.
pub fn conditional_weight_row(
    data: &Dataset,
    plan: &BandwidthPlan,
    pillow: &[usize],
    query: &[f64],
) -> Result<Vec<f64>, KernelError> {
    let n = data.n_rows();
    let mut logs = Vec::with_capacity(n);
    let mut row = vec![0.0; pillow.len()];
    for i in 0..n {
        for (slot, &c) in row.iter_mut().zip(pillow) {
            *slot = data.value(i, c);
        }
        logs.push(log_product_kernel(plan, pillow, query, &row)?);
    }
    normalize_log_weights(&mut logs, pillow.is_empty());
    Ok(logs)
}

/// In-place log-sum-exp normalization. Returns `false` when every entry is `-inf`.
fn normalize_log_weights(logs: &mut [f64], uniform: bool) -> bool {
    let n = logs.len();
    if uniform {
        logs.fill(1.0 / n as f64);
        return true;
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        logs.fill(0.0);
        return false;
    }
    let mut sum = 0.0;
    for v in logs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logs.iter_mut() {
        *v /= sum;
    }
    true
}

/// Graph positions resolved against dataset columns.
struct Layout {
    /// Dataset column at each topological position.
    topo_columns: Vec<usize>,
    /// Per position: `(pillow position, pillow column)` pairs.
    pillows: Vec<Vec<(usize, usize)>>,
}

fn layout(data: &Dataset, graph: &Admg, plan: &BandwidthPlan) -> Result<Layout, AugmentError> {
    if data.n_rows() == 0 {
        return Err(AugmentError::EmptyData);
    }
    if graph.len() != data.n_columns() {
        return Err(AugmentError::GraphDataMismatch(format!(
            "graph has {} vertices, data has {} columns",
            graph.len(),
            data.n_columns()
        )));
    }
    if plan.len() != data.n_columns() {
        return Err(AugmentError::PlanGraphMismatch(format!(
            "plan covers {} columns, data has {}",
            plan.len(),
            data.n_columns()
        )));
    }
    let topo = graph.validate()?;
    let topo_columns = topo
        .order()
        .iter()
        .map(|&v| {
            let name = &graph.vertices()[v];
            data.column_index(name)
                .map_err(|_| AugmentError::GraphDataMismatch(format!("vertex `{name}` is not a data column")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mp = graph.markov_pillow(&topo);
    let pillows = mp.iter().map(|p| p.iter().map(|&pos| (pos, topo_columns[pos])).collect()).collect();
    Ok(Layout { topo_columns, pillows })
}

struct Expander<'a> {
    data: &'a Dataset,
    layout: Layout,
    n: usize,
    /// Per column used in some pillow: `n x n` log kernel factors, `[query_row * n + row]`.
    log_factors: Vec<Option<Vec<f64>>>,
    theta: f64,
    node_cap: usize,
    live: usize,
    prefix: Vec<usize>,
    scratch: Vec<Vec<f64>>,
    sources: Vec<u32>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> Expander<'a> {
    fn new(data: &'a Dataset, layout: Layout, plan: &BandwidthPlan, config: &AugmentConfig) -> Result<Self, AugmentError> {
        let n = data.n_rows();
        let d = data.n_columns();
        let mut log_factors = vec![None; d];
        for &(_, c) in layout.pillows.iter().flatten() {
            if log_factors[c].is_some() {
                continue;
            }
            let kernel = plan.get(c)?;
            let col = data.column(c);
            let mut table = Vec::with_capacity(n * n);
            for &q in col {
                table.extend(col.iter().map(|&z| kernel.log_factor(q, z)));
            }
            log_factors[c] = Some(table);
        }
        Ok(Self {
            data,
            layout,
            n,
            log_factors,
            theta: config.theta.resolve(n),
            node_cap: config.node_cap,
            live: 0,
            prefix: vec![0; d],
            scratch: vec![Vec::with_capacity(n); d],
            sources: Vec::new(),
            values: Vec::new(),
            weights: Vec::new(),
        })
    }

    /// Edge weights out of the current node at `depth` into `out`.
    fn edge_weights(&self, depth: usize, out: &mut Vec<f64>) {
        out.clear();
        let pillow = &self.layout.pillows[depth];
        out.resize(self.n, 0.0);
        for &(pos, col) in pillow {
            let table = self.log_factors[col].as_ref().expect("pillow column cached");
            let base = self.prefix[pos] * self.n;
            for (acc, &lf) in out.iter_mut().zip(&table[base..base + self.n]) {
                *acc += lf;
            }
        }
        normalize_log_weights(out, pillow.is_empty());
    }

    fn expand(&mut self, depth: usize, weight: f64) -> Result<(), AugmentError> {
        let mut edges = std::mem::take(&mut self.scratch[depth]);
        self.edge_weights(depth, &mut edges);
        let last = depth + 1 == self.layout.pillows.len();
        for (k, &e) in edges.iter().enumerate() {
            let w = e * weight;
            if !(w > 0.0 && w >= self.theta) {
                continue;
            }
            self.live += 1;
            if self.live > self.node_cap {
                return Err(AugmentError::NodeCapExceeded { cap: self.node_cap });
            }
            self.prefix[depth] = k;
            if last {
                self.emit(w);
            } else {
                self.expand(depth + 1, w)?;
            }
        }
        self.scratch[depth] = edges;
        Ok(())
    }

    fn emit(&mut self, weight: f64) {
        let d = self.prefix.len();
        let start = self.sources.len();
        self.sources.resize(start + d, 0);
        self.values.resize(start + d, 0.0);
        for (pos, &col) in self.layout.topo_columns.iter().enumerate() {
            let row = self.prefix[pos];
            self.sources[start + col] = row as u32;
            self.values[start + col] = self.data.value(row, col);
        }
        self.weights.push(weight);
    }
}

/// Expands the pruned probability tree and returns the surviving leaves.
pub fn fill_prob_tree(
    data: &Dataset,
    graph: &Admg,
    plan: &BandwidthPlan,
    config: &AugmentConfig,
) -> Result<AugmentedDataset, AugmentError> {
    let layout = layout(data, graph, plan)?;
    let theta = config.theta.resolve(data.n_rows());
    if !(0.0..1.0).contains(&theta) {
        return Err(AugmentError::InvalidTheta(theta));
    }
    if data.n_rows() > u32::MAX as usize {
        return Err(AugmentError::TooLarge { n: data.n_rows(), d: data.n_columns() });
    }
    let topo_columns = layout.topo_columns.clone();
    let mut ex = Expander::new(data, layout, plan, config)?;
    ex.expand(0, 1.0)?;
    let mut weights = ex.weights;
    if config.renormalize {
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
    }
    Ok(AugmentedDataset {
        names: data.names().to_vec(),
        kinds: data.kinds().to_vec(),
        target: data.target(),
        topo_columns,
        sources: ex.sources,
        values: ex.values,
        weights,
        live_nodes: ex.live,
        theta,
    })
}

/// Every tuple's weight by direct evaluation of the product formula, with
/// linear-space kernels and no tree or pruning. Keys are source rows in
/// column order; zero weights are included.
pub fn brute_force_weights(
    data: &Dataset,
    graph: &Admg,
    plan: &BandwidthPlan,
) -> Result<BTreeMap<Vec<usize>, f64>, AugmentError> {
    let layout = layout(data, graph, plan)?;
    let (n, d) = (data.n_rows(), data.n_columns());
    if (n as u128).checked_pow(d as u32).is_none_or(|total| total > BRUTE_FORCE_LIMIT) {
        return Err(AugmentError::TooLarge { n, d });
    }
    let kernel_at = |pos: usize, query: &[usize], row: usize| -> Result<f64, KernelError> {
        let mut k = 1.0;
        for &(p, c) in &layout.pillows[pos] {
            k *= plan.get(c)?.factor(data.value(query[p], c), data.value(row, c));
        }
        Ok(k)
    };
    let mut out = BTreeMap::new();
    let mut tuple = vec![0usize; d];
    loop {
        let mut weight = 1.0;
        for pos in 0..d {
            let num = kernel_at(pos, &tuple, tuple[pos])?;
            let mut den = 0.0;
            for k in 0..n {
                den += kernel_at(pos, &tuple, k)?;
            }
            weight *= if den == 0.0 { 0.0 } else { num / den };
        }
        let mut key = vec![0; d];
        for (pos, &col) in layout.topo_columns.iter().enumerate() {
            key[col] = tuple[pos];
        }
        out.insert(key, weight);

        // odometer over topological positions, last position fastest
        let mut pos = d;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < n {
                break;
            }
            tuple[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ColumnKernel;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_pillow_weights_are_uniform() {
        let ds = Dataset::from_rows(names(&["a"]), &[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(1.0)]);
        assert_eq!(conditional_weight_row(&ds, &plan, &[], &[]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn identity_weights_normalize_over_matches() {
        let ds = Dataset::from_rows(names(&["a"]), &[vec![1.0], vec![2.0], vec![1.0]]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::identity()]);
        assert_eq!(conditional_weight_row(&ds, &plan, &[0], &[1.0]).unwrap(), vec![0.5, 0.0, 0.5]);
        assert_eq!(conditional_weight_row(&ds, &plan, &[0], &[7.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn tiny_bandwidths_do_not_underflow() {
        let ds = Dataset::from_rows(names(&["a"]), &[vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(1e-4)]);
        let w = conditional_weight_row(&ds, &plan, &[0], &[0.9]).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn edgeless_graph_gives_all_tuples_uniformly() {
        let ds = Dataset::from_rows(names(&["a", "b"]), &[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]).unwrap();
        let g = Admg::new(["a", "b"]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(1.0); 2]);
        let aug = fill_prob_tree(&ds, &g, &plan, &AugmentConfig::with_theta(0.0)).unwrap();
        assert_eq!(aug.len(), 9);
        assert!(aug.weights().iter().all(|&w| (w - 1.0 / 9.0).abs() < 1e-15));
        let brute = brute_force_weights(&ds, &g, &plan).unwrap();
        assert!(brute.values().all(|&w| (w - 1.0 / 9.0).abs() < 1e-15));
        // lexicographic order and provenance
        let s = aug.sample(5);
        assert_eq!(s.sources, &[1, 2]);
        assert_eq!(s.values, &[2.0, 5.0]);
    }

    #[test]
    fn single_row_has_unit_weight() {
        let ds = Dataset::from_rows(names(&["a", "b", "c"]), &[vec![0.5, 1.0, -2.0]]).unwrap();
        let mut g = Admg::new(["a", "b", "c"]).unwrap();
        g.add_directed("a", "b").unwrap();
        g.add_bidirected("b", "c").unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(0.3); 3]);
        let brute = brute_force_weights(&ds, &g, &plan).unwrap();
        assert_eq!(brute.into_iter().collect::<Vec<_>>(), vec![(vec![0, 0, 0], 1.0)]);
        let aug = fill_prob_tree(&ds, &g, &plan, &AugmentConfig::with_theta(0.0)).unwrap();
        assert_eq!(aug.weights(), &[1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = Dataset::from_rows(names(&["a", "b"]), &[vec![0.0, 1.0]]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::identity(); 2]);
        let g = Admg::new(["a", "c"]).unwrap();
        assert!(matches!(
            fill_prob_tree(&ds, &g, &plan, &AugmentConfig::default()),
            Err(AugmentError::GraphDataMismatch(_))
        ));
        let g = Admg::new(["a", "b"]).unwrap();
        let short = BandwidthPlan::new(vec![ColumnKernel::identity()]);
        assert!(matches!(
            fill_prob_tree(&ds, &g, &short, &AugmentConfig::default()),
            Err(AugmentError::PlanGraphMismatch(_))
        ));
        assert!(matches!(
            fill_prob_tree(&ds, &g, &plan, &AugmentConfig::with_theta(1.0)),
            Err(AugmentError::InvalidTheta(_))
        ));
    }

    #[test]
    fn node_cap_is_enforced() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let ds = Dataset::from_rows(names(&["a", "b"]), &rows).unwrap();
        let g = Admg::new(["a", "b"]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(1.0); 2]);
        let config = AugmentConfig { theta: Theta::Fixed(0.0), node_cap: 50, renormalize: false };
        assert!(matches!(fill_prob_tree(&ds, &g, &plan, &config), Err(AugmentError::NodeCapExceeded { cap: 50 })));
        let config = AugmentConfig { node_cap: 110, ..config };
        assert_eq!(fill_prob_tree(&ds, &g, &plan, &config).unwrap().live_nodes(), 110);
    }

    #[test]
    fn near_one_threshold_prunes_everything() {
        let ds = Dataset::from_rows(names(&["a"]), &[vec![0.0], vec![1.0]]).unwrap();
        let g = Admg::new(["a"]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(1.0)]);
        let aug = fill_prob_tree(&ds, &g, &plan, &AugmentConfig::with_theta(0.999)).unwrap();
        assert!(aug.is_empty());
        assert_eq!(aug.total_weight(), 0.0);
    }

    #[test]
    fn renormalization_is_opt_in() {
        let ds = Dataset::from_rows(names(&["a", "b"]), &[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]])
            .unwrap()
            .with_discrete(&["a", "b"])
            .unwrap();
        let mut g = Admg::new(["a", "b"]).unwrap();
        g.add_directed("a", "b").unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::identity(); 2]);
        let config = AugmentConfig::with_theta(0.2);
        let raw = fill_prob_tree(&ds, &g, &plan, &config).unwrap();
        // a=0 branch: 1/3; a=1 branches: 1/3 * 1/2 = 1/6 < 0.2, pruned
        assert_eq!(raw.len(), 1);
        assert!((raw.total_weight() - 1.0 / 3.0).abs() < 1e-15);
        let norm = fill_prob_tree(&ds, &g, &plan, &AugmentConfig { renormalize: true, ..config }).unwrap();
        assert_eq!(norm.weights(), &[1.0]);
    }

    #[test]
    fn edge_weights_sum_to_zero_or_one() {
        // mixed identity/gaussian pillow with an unmatched stratum
        let rows = vec![
            vec![0.0, 0.3, 1.0],
            vec![1.0, -0.2, 2.0],
            vec![0.0, 1.7, 0.5],
            vec![2.0, 0.1, -1.0],
        ];
        let ds = Dataset::from_rows(names(&["a", "b", "c"]), &rows).unwrap();
        let mut g = Admg::new(["a", "b", "c"]).unwrap();
        g.add_directed("a", "c").unwrap();
        g.add_bidirected("b", "c").unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::identity(), ColumnKernel::gaussian(0.5), ColumnKernel::gaussian(0.5)]);
        let layout = layout(&ds, &g, &plan).unwrap();
        let mut ex = Expander::new(&ds, layout, &plan, &AugmentConfig::with_theta(0.0)).unwrap();
        let mut buf = Vec::new();
        for i0 in 0..4 {
            for i1 in 0..4 {
                ex.prefix[0] = i0;
                ex.prefix[1] = i1;
                for depth in 0..3 {
                    ex.edge_weights(depth, &mut buf);
                    let s: f64 = buf.iter().sum();
                    assert!(buf.iter().all(|&w| w >= 0.0));
                    assert!(s.abs() < 1e-12 || (s - 1.0).abs() < 1e-12, "{s}");
                }
            }
        }
    }

    #[test]
    fn csv_output_layout() {
        let ds = Dataset::from_rows(names(&["a", "b"]), &[vec![0.1, 1.0], vec![0.2, 2.0]]).unwrap();
        let g = Admg::new(["a", "b"]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(1.0); 2]);
        let aug = fill_prob_tree(&ds, &g, &plan, &AugmentConfig::with_theta(0.0)).unwrap();
        let mut out = Vec::new();
        aug.write_csv(&mut out, true).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,b,__weight,__src_a,__src_b"));
        assert_eq!(lines.next(), Some("0.1,1,2.5000000000000000e-1,0,0"));
        assert_eq!(lines.count(), 3);
    }
}
