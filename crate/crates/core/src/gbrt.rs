//! Instance-weighted gradient boosted regression trees.
//!
//! Squared loss with the halved gradient convention `g = f - y`, `h = 1`;
//! every statistic is multiplied by the sample weight. Trees are grown
//! best-first up to `max_leaves` leaves with exact greedy split search over
//! midpoints of adjacent distinct feature values, and leaf values are
//! `-G / (H + rho)`. Samples go left iff `x[feature] < threshold`.
//!
//! Before fitting, zero-weight samples are dropped and identical
//! `(features, target)` samples are merged by summing their weights, in a
//! canonical order. A sample with weight `2w` therefore fits exactly like two
//! copies with weight `w`.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::{Predictor, WeightedLossSample};

#[derive(Debug, Error)]
pub enum GbrtError {
    #[error("no sample has positive weight")]
    NoPositiveWeight,
    #[error("invalid configuration: {0}")]
    DegenerateConfig(String),
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sample weights and values must be finite and weights nonnegative")]
    InvalidSample,
    #[error("cross-validation needs at least {needed} positively weighted samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("empty hyper-parameter grid")]
    EmptyGrid,
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrtConfig {
    pub max_leaves: usize,
    pub rounds: usize,
    pub l2_reg: f64,
    pub learning_rate: f64,
    pub min_child_weight: f64,
}

impl Default for GbrtConfig {
    fn default() -> Self {
        Self { max_leaves: 64, rounds: 50, l2_reg: 1.0, learning_rate: 0.3, min_child_weight: 0.0 }
    }
}

impl GbrtConfig {
    pub fn validate(&self) -> Result<(), GbrtError> {
        let bad = |m: &str| Err(GbrtError::DegenerateConfig(m.to_string()));
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if self.rounds < 1 {
            return bad("rounds must be at least 1");
        }
        if self.l2_reg.is_nan() || self.l2_reg < 0.0 {
            return bad("l2_reg must be nonnegative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.min_child_weight.is_nan() || self.min_child_weight < 0.0 {
            return bad("min_child_weight must be nonnegative");
        }
        Ok(())
    }

    /// Configs that share everything but the number of rounds can be
    /// evaluated from one fit.
    fn same_except_rounds(&self, other: &Self) -> bool {
        self.max_leaves == other.max_leaves
            && self.l2_reg.to_bits() == other.l2_reg.to_bits()
            && self.learning_rate.to_bits() == other.learning_rate.to_bits()
            && self.min_child_weight.to_bits() == other.min_child_weight.to_bits()
    }
}

/// Cartesian grid, rounds varying slowest, in declaration order.
pub fn config_grid(base: &GbrtConfig, rounds: &[usize], l2: &[f64]) -> Vec<GbrtConfig> {
    rounds
        .iter()
        .flat_map(|&k| l2.iter().map(move |&rho| GbrtConfig { rounds: k, l2_reg: rho, ..*base }))
        .collect()
}

/// `M = 64`, `K ∈ {10, 50, 250, 1250}`, `ρ ∈ {1, 10, 100, 1000}`.
pub fn default_grid() -> Vec<GbrtConfig> {
    config_grid(&GbrtConfig::default(), &[10, 50, 250, 1250], &[1.0, 10.0, 100.0, 1000.0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_values().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrtModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl GbrtModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, GbrtError> {
        if x.len() != self.n_features {
            return Err(GbrtError::DimensionMismatch { expected: self.n_features, found: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    #[inline]
    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = self.base_score;
        for t in &self.trees {
            acc += self.learning_rate * t.eval(x);
        }
        acc
    }

    /// The first `k` trees.
    pub fn truncated(&self, k: usize) -> Self {
        Self { trees: self.trees[..k.min(self.trees.len())].to_vec(), ..self.clone() }
    }

    /// `sum_k (rho/2) ||w_k||^2` over the effective (shrunken) leaf values.
    pub fn l2_penalty(&self, rho: f64) -> f64 {
        let sq: f64 = self
            .trees
            .iter()
            .flat_map(Tree::leaf_values)
            .map(|v| {
                let w = self.learning_rate * v;
                w * w
            })
            .sum();
        0.5 * rho * sq
    }
}

impl Predictor for GbrtModel {
    fn predict(&self, features: &[f64]) -> f64 {
        self.predict_unchecked(features)
    }

    fn penalty(&self, rho: f64) -> f64 {
        self.l2_penalty(rho)
    }
}

/// On-disk model: the ensemble plus the column names it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub feature_names: Vec<String>,
    pub target: String,
    pub config: GbrtConfig,
    pub model: GbrtModel,
}

impl ModelFile {
    pub const FORMAT: &'static str = "admg-augment-gbrt/1";

    pub fn new(feature_names: Vec<String>, target: String, config: GbrtConfig, model: GbrtModel) -> Self {
        Self { format: Self::FORMAT.to_string(), feature_names, target, config, model }
    }

    pub fn to_json(&self) -> Result<String, GbrtError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, GbrtError> {
        let file: Self = serde_json::from_str(text)?;
        if file.format != Self::FORMAT {
            return Err(GbrtError::DegenerateConfig(format!("unsupported model format `{}`", file.format)));
        }
        if file.feature_names.len() != file.model.n_features {
            return Err(GbrtError::DimensionMismatch { expected: file.model.n_features, found: file.feature_names.len() });
        }
        for tree in &file.model.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, left, right, .. } = *node {
                    if feature >= file.model.n_features || left >= tree.nodes.len() || right >= tree.nodes.len() {
                        return Err(GbrtError::DegenerateConfig("tree node out of range".into()));
                    }
                }
            }
        }
        Ok(file)
    }
}

/// Column-major training matrix after dropping zero weights and merging duplicates.
struct TrainingSet {
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    weight: Vec<f64>,
}

fn cmp_samples(a: &WeightedLossSample, b: &WeightedLossSample) -> Ordering {
    a.features
        .iter()
        .zip(&b.features)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.target.total_cmp(&b.target))
}

/// Validates, drops zero weights, sorts canonically and merges identical
/// `(features, target)` samples by summing their weights.
pub fn merge_samples(samples: &[WeightedLossSample]) -> Result<Vec<WeightedLossSample>, GbrtError> {
    let n_features = samples.first().map_or(0, |s| s.features.len());
    for s in samples {
        if s.features.len() != n_features {
            return Err(GbrtError::DimensionMismatch { expected: n_features, found: s.features.len() });
        }
        if !(s.weight >= 0.0 && s.weight.is_finite() && s.target.is_finite())
            || s.features.iter().any(|v| !v.is_finite())
        {
            return Err(GbrtError::InvalidSample);
        }
    }
    let mut kept: Vec<&WeightedLossSample> = samples.iter().filter(|s| s.weight > 0.0).collect();
    if kept.is_empty() {
        return Err(GbrtError::NoPositiveWeight);
    }
    kept.sort_by(|a, b| cmp_samples(a, b));
    let mut out: Vec<WeightedLossSample> = Vec::with_capacity(kept.len());
    for s in kept {
        match out.last_mut() {
            Some(prev) if cmp_samples(prev, s).is_eq() => prev.weight += s.weight,
            _ => out.push(s.clone()),
        }
    }
    Ok(out)
}

impl TrainingSet {
    fn build(samples: &[WeightedLossSample]) -> Result<(Self, usize), GbrtError> {
        let merged = merge_samples(samples)?;
        let n_features = merged[0].features.len();
        let mut columns = vec![Vec::with_capacity(merged.len()); n_features];
        for s in &merged {
            for (col, &v) in columns.iter_mut().zip(&s.features) {
                col.push(v);
            }
        }
        let target = merged.iter().map(|s| s.target).collect();
        let weight = merged.iter().map(|s| s.weight).collect();
        Ok((Self { columns, target, weight }, n_features))
    }

    fn len(&self) -> usize {
        self.target.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Leaf {
    node: usize,
    /// Per feature, the leaf's sample indices sorted by that feature.
    lists: Vec<Vec<u32>>,
    grad: f64,
    hess: f64,
    split: Option<SplitChoice>,
    order: usize,
}

struct Grower<'a> {
    columns: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a GbrtConfig,
    go_left: Vec<bool>,
}

fn split_threshold(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) * 0.5;
    if mid > a && mid <= b {
        mid
    } else {
        b
    }
}

impl Grower<'_> {
    fn make_leaf(&self, node: usize, lists: Vec<Vec<u32>>, order: usize, want_split: bool) -> Leaf {
        let (mut grad, mut hess) = (0.0, 0.0);
        for &i in &lists[0] {
            grad += self.grad[i as usize];
            hess += self.hess[i as usize];
        }
        let split = if want_split { self.best_split(&lists, grad, hess) } else { None };
        Leaf { node, lists, grad, hess, split, order }
    }

    fn best_split(&self, lists: &[Vec<u32>], grad: f64, hess: f64) -> Option<SplitChoice> {
        let rho = self.config.l2_reg;
        let mcw = self.config.min_child_weight;
        let parent = grad * grad / (hess + rho);
        let mut best: Option<SplitChoice> = None;
        let mut best_gain = 0.0;
        for (feature, list) in lists.iter().enumerate() {
            let xs = &self.columns[feature];
            let (mut gl, mut hl) = (0.0, 0.0);
            for pair in list.windows(2) {
                let (i, next) = (pair[0] as usize, pair[1] as usize);
                gl += self.grad[i];
                hl += self.hess[i];
                let (a, b) = (xs[i], xs[next]);
                if b <= a {
                    continue;
                }
                let (gr, hr) = (grad - gl, hess - hl);
                if hl < mcw || hr < mcw || hr <= 0.0 {
                    continue;
                }
                let gain = gl * gl / (hl + rho) + gr * gr / (hr + rho) - parent;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(SplitChoice { feature, threshold: split_threshold(a, b), gain });
                }
            }
        }
        best
    }

    /// Grows one tree; returns it with `(samples, leaf value)` per leaf.
    fn grow(&mut self, root_lists: Vec<Vec<u32>>) -> (Tree, Vec<(Vec<u32>, f64)>) {
        let max_leaves = self.config.max_leaves;
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut leaves = vec![self.make_leaf(0, root_lists, 0, true)];
        let mut next_order = 1;
        while leaves.len() < max_leaves {
            let pick = leaves
                .iter()
                .enumerate()
                .filter_map(|(k, l)| l.split.map(|s| (k, s.gain, l.order)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
            let Some((k, _, _)) = pick else { break };
            let leaf = leaves.swap_remove(k);
            let split = leaf.split.expect("picked leaf has a split");
            let xs = &self.columns[split.feature];
            for &i in &leaf.lists[0] {
                self.go_left[i as usize] = xs[i as usize] < split.threshold;
            }
            let mut left_lists = Vec::with_capacity(leaf.lists.len());
            let mut right_lists = Vec::with_capacity(leaf.lists.len());
            for list in leaf.lists {
                let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&i| self.go_left[i as usize]);
                left_lists.push(l);
                right_lists.push(r);
            }
            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[leaf.node] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
            let want_split = leaves.len() + 2 < max_leaves;
            leaves.push(self.make_leaf(left, left_lists, next_order, want_split));
            leaves.push(self.make_leaf(right, right_lists, next_order + 1, want_split));
            next_order += 2;
        }
        let rho = self.config.l2_reg;
        let mut assignments = Vec::with_capacity(leaves.len());
        for mut leaf in leaves {
            let value = -leaf.grad / (leaf.hess + rho);
            nodes[leaf.node] = Node::Leaf { value };
            assignments.push((std::mem::take(&mut leaf.lists[0]), value));
        }
        (Tree { nodes }, assignments)
    }
}

/// Fits `config.rounds` boosting rounds on the weighted samples.
pub fn fit(samples: &[WeightedLossSample], config: &GbrtConfig) -> Result<GbrtModel, GbrtError> {
    config.validate()?;
    let (set, n_features) = TrainingSet::build(samples)?;
    let n = set.len();
    let total_w: f64 = set.weight.iter().sum();
    let base_score = set.target.iter().zip(&set.weight).map(|(y, w)| y * w).sum::<f64>() / total_w;

    let presorted: Vec<Vec<u32>> = set
        .columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut pred = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.rounds);
    let mut go_left = vec![false; n];
    for _ in 0..config.rounds {
        for i in 0..n {
            grad[i] = set.weight[i] * (pred[i] - set.target[i]);
        }
        let mut grower = Grower { columns: &set.columns, grad: &grad, hess: &set.weight, config, go_left };
        let root_lists = if n_features == 0 { vec![(0..n as u32).collect()] } else { presorted.clone() };
        let (tree, assignments) = grower.grow(root_lists);
        go_left = grower.go_left;
        for (rows, value) in assignments {
            for i in rows {
                pred[i as usize] += config.learning_rate * value;
            }
        }
        trees.push(tree);
    }
    Ok(GbrtModel { base_score, learning_rate: config.learning_rate, n_features, trees })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub config: GbrtConfig,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_index: usize,
    pub cells: Vec<CvCell>,
}

impl CvResult {
    pub fn best(&self) -> &GbrtConfig {
        &self.cells[self.best_index].config
    }
}

/// Fold label per positively weighted sample: samples are ranked by weight
/// and each consecutive block of `folds` gets a seeded random permutation of
/// the labels, so every fold carries about the same weight and count.
pub fn weight_stratified_folds(weights: &[f64], folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![0; weights.len()];
    let mut perm: Vec<usize> = (0..folds).collect();
    for block in order.chunks(folds) {
        perm.shuffle(&mut rng);
        for (&i, &f) in block.iter().zip(&perm) {
            labels[i] = f;
        }
    }
    labels
}

/// Selects the grid entry with the lowest mean weighted validation MSE over
/// `folds` weight-stratified folds; ties go to the earliest entry. Folds are
/// drawn over the merged samples, see [`merge_samples`].
pub fn grid_search_cv(
    samples: &[WeightedLossSample],
    grid: &[GbrtConfig],
    folds: usize,
    seed: u64,
) -> Result<CvResult, GbrtError> {
    if grid.is_empty() {
        return Err(GbrtError::EmptyGrid);
    }
    for c in grid {
        c.validate()?;
    }
    if folds < 2 {
        return Err(GbrtError::DegenerateConfig("need at least 2 folds".into()));
    }
    // copies of one sample must not straddle a fold boundary
    let positive = merge_samples(samples)?;
    if positive.len() < folds {
        return Err(GbrtError::TooFewSamples { needed: folds, found: positive.len() });
    }
    let weights: Vec<f64> = positive.iter().map(|s| s.weight).collect();
    let labels = weight_stratified_folds(&weights, folds, seed);
    let split = |f: usize| -> (Vec<WeightedLossSample>, Vec<&WeightedLossSample>) {
        let mut train = Vec::new();
        let mut valid = Vec::new();
        for (s, &l) in positive.iter().zip(&labels) {
            if l == f {
                valid.push(s);
            } else {
                train.push(s.clone());
            }
        }
        (train, valid)
    };
    let fold_sets: Vec<_> = (0..folds).map(split).collect();

    let mut fold_mse = vec![vec![f64::NAN; folds]; grid.len()];
    let mut done = vec![false; grid.len()];
    for g in 0..grid.len() {
        if done[g] {
            continue;
        }
        let group: Vec<usize> = (g..grid.len()).filter(|&k| !done[k] && grid[k].same_except_rounds(&grid[g])).collect();
        let max_rounds = group.iter().map(|&k| grid[k].rounds).max().expect("nonempty group");
        let fit_config = GbrtConfig { rounds: max_rounds, ..grid[g] };
        for (f, (train, valid)) in fold_sets.iter().enumerate() {
            let model = fit(train, &fit_config)?;
            let staged = staged_mse(&model, valid);
            for &k in &group {
                fold_mse[k][f] = staged[grid[k].rounds - 1];
            }
        }
        for &k in &group {
            done[k] = true;
        }
    }

    let cells: Vec<CvCell> = grid
        .iter()
        .zip(fold_mse)
        .map(|(config, fold_mse)| {
            let mean_mse = fold_mse.iter().sum::<f64>() / folds as f64;
            CvCell { config: *config, fold_mse, mean_mse }
        })
        .collect();
    let mut best_index = 0;
    for (k, cell) in cells.iter().enumerate() {
        if cell.mean_mse < cells[best_index].mean_mse {
            best_index = k;
        }
    }
    Ok(CvResult { best_index, cells })
}

/// Weighted validation MSE after each boosting round.
fn staged_mse(model: &GbrtModel, valid: &[&WeightedLossSample]) -> Vec<f64> {
    let mut pred = vec![model.base_score; valid.len()];
    let total: f64 = valid.iter().map(|s| s.weight).sum();
    model
        .trees
        .iter()
        .map(|tree| {
            let mut num = 0.0;
            for (p, s) in pred.iter_mut().zip(valid) {
                *p += model.learning_rate * tree.eval(&s.features);
                let r = s.target - *p;
                num += s.weight * r * r;
            }
            num / total
        })
        .collect()
}

/// Grid search, then a final fit of the winner on all samples.
pub fn fit_with_cv(
    samples: &[WeightedLossSample],
    grid: &[GbrtConfig],
    folds: usize,
    seed: u64,
) -> Result<(GbrtModel, CvResult), GbrtError> {
    let cv = grid_search_cv(samples, grid, folds, seed)?;
    let model = fit(samples, cv.best())?;
    Ok((model, cv))
}
