//! Weighted risk estimators and the λ-combined training objective.

use thiserror::Error;

use crate::augment::AugmentedDataset;
use crate::data::{DataError, Dataset};

/// The λ used when none is given.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("no rows to evaluate")]
    EmptyData,
    #[error("lambda must lie in [0, 1], got {0}")]
    LambdaOutOfRange(f64),
    #[error("augmented data has {aug} columns, dataset has {data}")]
    ColumnMismatch { aug: usize, data: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Anything that maps a feature vector to a real prediction.
pub trait Predictor {
    fn predict(&self, features: &[f64]) -> f64;

    /// Regularization term `Ω(f)` at strength `rho`; zero unless overridden.
    fn penalty(&self, _rho: f64) -> f64 {
        0.0
    }
}

impl<F: Fn(&[f64]) -> f64> Predictor for F {
    fn predict(&self, features: &[f64]) -> f64 {
        self(features)
    }
}

pub trait Loss {
    fn loss(&self, target: f64, prediction: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredLoss;

impl Loss for SquaredLoss {
    #[inline]
    fn loss(&self, target: f64, prediction: f64) -> f64 {
        let r = target - prediction;
        r * r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLossSample {
    pub features: Vec<f64>,
    pub target: f64,
    pub weight: f64,
}

fn check_lambda(lambda: f64) -> Result<(), RiskError> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(RiskError::LambdaOutOfRange(lambda))
    }
}

/// Mean squared error over the rows of `data`.
pub fn empirical_risk(model: &impl Predictor, data: &Dataset) -> Result<f64, RiskError> {
    empirical_risk_with(model, data, &SquaredLoss)
}

pub fn empirical_risk_with(model: &impl Predictor, data: &Dataset, loss: &impl Loss) -> Result<f64, RiskError> {
    let n = data.n_rows();
    if n == 0 {
        return Err(RiskError::EmptyData);
    }
    let target = data.require_target()?;
    let features = data.feature_columns();
    let mut x = vec![0.0; features.len()];
    let mut total = 0.0;
    for r in 0..n {
        for (slot, &c) in x.iter_mut().zip(&features) {
            *slot = data.value(r, c);
        }
        total += loss.loss(data.value(r, target), model.predict(&x));
    }
    Ok(total / n as f64)
}

/// `sum_i w_i * loss_i` over the augmented samples, without dividing by the
/// total weight.
pub fn augmented_risk(model: &impl Predictor, aug: &AugmentedDataset) -> Result<f64, RiskError> {
    augmented_risk_with(model, aug, &SquaredLoss)
}

pub fn augmented_risk_with(model: &impl Predictor, aug: &AugmentedDataset, loss: &impl Loss) -> Result<f64, RiskError> {
    let target = aug.target().ok_or(DataError::MissingTarget)?;
    let features: Vec<usize> = (0..aug.names().len()).filter(|&c| c != target).collect();
    let mut x = vec![0.0; features.len()];
    let mut total = 0.0;
    for s in aug.iter() {
        for (slot, &c) in x.iter_mut().zip(&features) {
            *slot = s.values[c];
        }
        total += s.weight * loss.loss(s.values[target], model.predict(&x));
    }
    Ok(total)
}

/// `(1 - λ) R_emp + λ R_aug + Ω`, with `Ω` applied once.
pub fn combined_objective(
    model: &impl Predictor,
    data: &Dataset,
    aug: &AugmentedDataset,
    lambda: f64,
    rho: f64,
) -> Result<f64, RiskError> {
    check_lambda(lambda)?;
    let emp = empirical_risk(model, data)?;
    let augr = augmented_risk(model, aug)?;
    Ok((1.0 - lambda) * emp + lambda * augr + model.penalty(rho))
}

/// Weighted training set for the combined objective: every original row with
/// weight `(1 - λ)/n`, then every augmented sample with weight `λ w_i`.
/// Zero-weight entries are dropped, so `λ = 0` yields exactly the baseline set.
pub fn combine_training_set(
    data: &Dataset,
    aug: Option<&AugmentedDataset>,
    lambda: f64,
) -> Result<Vec<WeightedLossSample>, RiskError> {
    check_lambda(lambda)?;
    let n = data.n_rows();
    if n == 0 {
        return Err(RiskError::EmptyData);
    }
    let target = data.require_target()?;
    let features = data.feature_columns();
    let mut out = Vec::new();
    let w_orig = (1.0 - lambda) / n as f64;
    if w_orig > 0.0 {
        for r in 0..n {
            out.push(WeightedLossSample {
                features: features.iter().map(|&c| data.value(r, c)).collect(),
                target: data.value(r, target),
                weight: w_orig,
            });
        }
    }
    if let Some(aug) = aug.filter(|_| lambda > 0.0) {
        if aug.names().len() != data.n_columns() {
            return Err(RiskError::ColumnMismatch { aug: aug.names().len(), data: data.n_columns() });
        }
        for s in aug.iter() {
            let weight = lambda * s.weight;
            if weight > 0.0 {
                out.push(WeightedLossSample {
                    features: features.iter().map(|&c| s.values[c]).collect(),
                    target: s.values[target],
                    weight,
                });
            }
        }
    }
    Ok(out)
}

/// Weighted mean loss `sum w l / sum w`; `None` when the total weight is zero.
pub fn weighted_mean_loss(model: &impl Predictor, samples: &[WeightedLossSample]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for s in samples {
        num += s.weight * SquaredLoss.loss(s.target, model.predict(&s.features));
        den += s.weight;
    }
    (den > 0.0).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admg::Admg;
    use crate::augment::{fill_prob_tree, AugmentConfig};
    use crate::kernels::{BandwidthPlan, ColumnKernel};

    fn xy(rows: &[(f64, f64)]) -> Dataset {
        let rows: Vec<Vec<f64>> = rows.iter().map(|&(x, y)| vec![x, y]).collect();
        Dataset::from_rows(vec!["x".into(), "y".into()], &rows).unwrap().with_target("y").unwrap()
    }

    fn stump(x: &[f64]) -> f64 {
        if x[0] < 1.5 {
            0.5
        } else {
            2.0
        }
    }

    #[test]
    fn empirical_risk_examples() {
        let ds = xy(&[(0.0, 1.0), (1.0, 2.0)]);
        assert_eq!(empirical_risk(&|x: &[f64]| x[0] + 1.0, &ds).unwrap(), 0.0);
        let ds = xy(&[(0.0, 1.0), (0.0, -1.0)]);
        assert_eq!(empirical_risk(&|_: &[f64]| 0.0, &ds).unwrap(), 1.0);
        // stump residuals: 1-0.5, 0-0.5, 3-2 -> (0.25 + 0.25 + 1) / 3
        let ds = xy(&[(0.0, 1.0), (1.0, 0.0), (2.0, 3.0)]);
        assert!((empirical_risk(&stump, &ds).unwrap() - 0.5).abs() < 1e-15);
        let empty = xy(&[]);
        assert!(matches!(empirical_risk(&stump, &empty), Err(RiskError::EmptyData)));
    }

    fn edgeless_aug(ds: &Dataset) -> AugmentedDataset {
        let g = Admg::new(["x", "y"]).unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(1.0); 2]);
        fill_prob_tree(ds, &g, &plan, &AugmentConfig::with_theta(0.0)).unwrap()
    }

    #[test]
    fn augmented_risk_on_edgeless_graph() {
        // tuples (x_i, y_j), each weight 1/4; constant model 1
        let ds = xy(&[(0.0, 3.0), (5.0, -1.0)]);
        let aug = edgeless_aug(&ds);
        let r = augmented_risk(&|_: &[f64]| 1.0, &aug).unwrap();
        let hand = 0.25 * (4.0 + 4.0 + 4.0 + 4.0);
        assert!((r - hand).abs() < 1e-15);
        // a predictor that depends on x still sees every (x, y) pairing
        let r = augmented_risk(&|x: &[f64]| x[0], &aug).unwrap();
        let hand = 0.25 * ((3.0f64 - 0.0).powi(2) + (-1.0f64 - 0.0).powi(2) + (3.0f64 - 5.0).powi(2) + (-1.0f64 - 5.0).powi(2));
        assert!((r - hand).abs() < 1e-12);
    }

    #[test]
    fn augmented_risk_trivial_cases() {
        let ds = xy(&[(0.0, 2.0)]);
        let aug = edgeless_aug(&ds);
        assert_eq!(augmented_risk(&|_: &[f64]| 0.0, &aug).unwrap(), 4.0);
        let two = xy(&[(0.0, 2.0), (1.0, 5.0)]);
        let empty = fill_prob_tree(
            &two,
            &Admg::new(["x", "y"]).unwrap(),
            &BandwidthPlan::new(vec![ColumnKernel::gaussian(1.0); 2]),
            &AugmentConfig::with_theta(0.9),
        )
        .unwrap();
        assert!(empty.is_empty());
        assert_eq!(augmented_risk(&|_: &[f64]| 0.0, &empty).unwrap(), 0.0);
    }

    #[test]
    fn objective_endpoints_and_affinity() {
        let ds = xy(&[(0.0, 1.0), (1.0, 0.0), (2.0, 3.0)]);
        let aug = edgeless_aug(&ds);
        let emp = empirical_risk(&stump, &ds).unwrap();
        let augr = augmented_risk(&stump, &aug).unwrap();
        assert_eq!(combined_objective(&stump, &ds, &aug, 0.0, 1.0).unwrap(), emp);
        assert_eq!(combined_objective(&stump, &ds, &aug, 1.0, 1.0).unwrap(), augr);
        let lo = combined_objective(&stump, &ds, &aug, 0.0, 1.0).unwrap();
        let hi = combined_objective(&stump, &ds, &aug, 1.0, 1.0).unwrap();
        for lam in [0.25, 0.5, 0.75] {
            let mid = combined_objective(&stump, &ds, &aug, lam, 1.0).unwrap();
            assert!((mid - ((1.0 - lam) * lo + lam * hi)).abs() < 1e-12);
        }
        assert!(matches!(combined_objective(&stump, &ds, &aug, 1.5, 1.0), Err(RiskError::LambdaOutOfRange(_))));
    }

    #[test]
    fn diagonal_augmentation_reproduces_empirical_risk() {
        // complete bidirected graph + identity kernels + distinct values: only diagonal tuples survive
        let rows = [(0.0, 1.0), (1.0, 0.0), (2.0, 3.0)];
        let ds = xy(&rows).with_discrete(&["x", "y"]).unwrap();
        let mut g = Admg::new(["x", "y"]).unwrap();
        g.add_bidirected("x", "y").unwrap();
        let plan = BandwidthPlan::new(vec![ColumnKernel::identity(); 2]);
        let aug = fill_prob_tree(&ds, &g, &plan, &AugmentConfig::with_theta(0.0)).unwrap();
        assert_eq!(aug.len(), 3);
        assert_eq!(augmented_risk(&stump, &aug).unwrap(), empirical_risk(&stump, &ds).unwrap());
    }

    #[test]
    fn combined_training_set_weights() {
        let ds = xy(&[(0.0, 1.0), (1.0, 0.0)]);
        let aug = edgeless_aug(&ds);
        let set = combine_training_set(&ds, Some(&aug), 0.5).unwrap();
        assert_eq!(set.len(), 6);
        assert_eq!(set[0].weight, 0.25);
        assert_eq!(set[2].weight, 0.125);
        let total: f64 = set.iter().map(|s| s.weight).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(combine_training_set(&ds, Some(&aug), 0.0).unwrap(), combine_training_set(&ds, None, 0.0).unwrap());
        assert_eq!(combine_training_set(&ds, Some(&aug), 1.0).unwrap().len(), 4);
    }
}
