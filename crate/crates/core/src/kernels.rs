//! Product kernels over Markov-pillow coordinates and per-variable bandwidths.
//!
//! Continuous variables use a Gaussian factor with a Silverman rule-of-thumb
//! bandwidth scaled by a temperature `gamma`; discrete variables use the
//! identity kernel `1{x = y}` with bandwidth 1. Factors are combined in log
//! space so that long pillows with tiny bandwidths do not underflow.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ColumnKind, Dataset};

/// Bandwidth temperature used when none is given.
pub const DEFAULT_GAMMA: f64 = 1e-3;

const IQR_TO_SIGMA: f64 = 1.349;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("column `{0}` is constant; its rule-of-thumb bandwidth is zero")]
    DegenerateColumn(String),
    #[error("bandwidth needs at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("no kernel for column {0}")]
    MissingBandwidth(usize),
    #[error("bandwidth temperature must be positive and finite, got {0}")]
    InvalidGamma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Gaussian,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnKernel {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl ColumnKernel {
    pub fn gaussian(bandwidth: f64) -> Self {
        Self { kind: KernelKind::Gaussian, bandwidth }
    }

    pub fn identity() -> Self {
        Self { kind: KernelKind::Identity, bandwidth: 1.0 }
    }

    /// `ln((1/h) K((x - y)/h))`; `-inf` for an identity mismatch.
    #[inline]
    pub fn log_factor(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => {
                let u = (x - y) / self.bandwidth;
                -0.5 * u * u - self.bandwidth.ln() - 0.5 * (2.0 * PI).ln()
            }
            KernelKind::Identity => {
                if x == y {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `(1/h) K((x - y)/h)` evaluated directly in linear space.
    pub fn factor(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => {
                let u = (x - y) / self.bandwidth;
                (-0.5 * u * u).exp() / ((2.0 * PI).sqrt() * self.bandwidth)
            }
            KernelKind::Identity => f64::from(u8::from(x == y)),
        }
    }
}

/// What to do with a constant continuous column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    #[default]
    Error,
    /// Use `h = gamma`, i.e. a unit rule-of-thumb bandwidth.
    UnitBandwidth,
}

/// One kernel per dataset column, in table order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPlan {
    kernels: Vec<ColumnKernel>,
}

impl BandwidthPlan {
    pub fn new(kernels: Vec<ColumnKernel>) -> Self {
        Self { kernels }
    }

    pub fn kernels(&self) -> &[ColumnKernel] {
        &self.kernels
    }

    pub fn get(&self, column: usize) -> Result<&ColumnKernel, KernelError> {
        self.kernels.get(column).ok_or(KernelError::MissingBandwidth(column))
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

/// Linear-interpolation ("type 7") sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb `(4/3)^(1/5) * min(sd, IQR/1.349) * n^(-1/5)`,
/// with the unbiased standard deviation and type-7 quartiles.
pub fn silverman_bandwidth(column: &[f64]) -> Result<f64, KernelError> {
    let n = column.len();
    if n < 2 {
        return Err(KernelError::TooFewValues(n));
    }
    let nf = n as f64;
    let mean = column.iter().sum::<f64>() / nf;
    let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = sd.min(iqr / IQR_TO_SIGMA);
    if spread.is_nan() || spread <= 0.0 {
        return Err(KernelError::DegenerateColumn(String::new()));
    }
    Ok((4.0f64 / 3.0).powf(0.2) * spread * nf.powf(-0.2))
}

/// Gaussian kernels with `gamma * silverman` on continuous columns, identity
/// kernels on discrete ones.
pub fn bandwidth_plan(data: &Dataset, gamma: f64, policy: DegeneratePolicy) -> Result<BandwidthPlan, KernelError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(KernelError::InvalidGamma(gamma));
    }
    let kernels = (0..data.n_columns())
        .map(|c| match data.kind(c) {
            ColumnKind::Discrete => Ok(ColumnKernel::identity()),
            ColumnKind::Continuous => match silverman_bandwidth(data.column(c)) {
                Ok(h) => Ok(ColumnKernel::gaussian(gamma * h)),
                Err(KernelError::DegenerateColumn(_)) if policy == DegeneratePolicy::UnitBandwidth => {
                    Ok(ColumnKernel::gaussian(gamma))
                }
                Err(KernelError::DegenerateColumn(_)) => Err(KernelError::DegenerateColumn(data.names()[c].clone())),
                Err(e) => Err(e),
            },
        })
        .collect::<Result<_, _>>()?;
    Ok(BandwidthPlan { kernels })
}

/// `ln K(x - y)` for the product kernel over `pillow` (column indices);
/// `x` and `y` are indexed like `pillow`. Empty pillow gives 0.
pub fn log_product_kernel(plan: &BandwidthPlan, pillow: &[usize], x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    let mut acc = 0.0;
    for (k, &c) in pillow.iter().enumerate() {
        acc += plan.get(c)?.log_factor(x[k], y[k]);
    }
    Ok(acc)
}

pub fn product_kernel_value(plan: &BandwidthPlan, pillow: &[usize], x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    log_product_kernel(plan, pillow, x, y).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // (4/3)^0.2 * (2/1.349) * 5^-0.2, evaluated independently with numpy
    const SILVERMAN_0_TO_4: f64 = 1.1381822079685024;

    #[test]
    fn silverman_reference_value() {
        let h = silverman_bandwidth(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((h - SILVERMAN_0_TO_4).abs() < 1e-12, "{h}");
    }

    #[test]
    fn silverman_uses_sd_when_smaller() {
        // two clusters: IQR/1.349 exceeds sd
        let x = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let sd = (x.iter().map(|v| (v - 5.0f64).powi(2)).sum::<f64>() / 5.0).sqrt();
        let h = silverman_bandwidth(&x).unwrap();
        let expect = (4.0f64 / 3.0).powf(0.2) * sd.min(10.0 / 1.349) * 6f64.powf(-0.2);
        assert!((h - expect).abs() < 1e-12);
    }

    #[test]
    fn silverman_rejects_degenerate_input() {
        assert!(matches!(silverman_bandwidth(&[5.0, 5.0, 5.0]), Err(KernelError::DegenerateColumn(_))));
        assert_eq!(silverman_bandwidth(&[1.0]), Err(KernelError::TooFewValues(1)));
    }

    fn column_dataset(xs: &[f64]) -> Dataset {
        Dataset::from_columns(vec!["x".into()], vec![xs.to_vec()]).unwrap()
    }

    #[test]
    fn plan_scales_with_gamma() {
        let ds = column_dataset(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let p1 = bandwidth_plan(&ds, 1.0, DegeneratePolicy::Error).unwrap();
        assert!((p1.get(0).unwrap().bandwidth - SILVERMAN_0_TO_4).abs() < 1e-12);
        let p2 = bandwidth_plan(&ds, DEFAULT_GAMMA, DegeneratePolicy::Error).unwrap();
        assert!((p2.get(0).unwrap().bandwidth - SILVERMAN_0_TO_4 * 1e-3).abs() < 1e-15);
        assert_eq!(p2.get(0).unwrap().kind, KernelKind::Gaussian);
        assert_eq!(bandwidth_plan(&ds, 0.0, DegeneratePolicy::Error), Err(KernelError::InvalidGamma(0.0)));
    }

    #[test]
    fn plan_degenerate_policy() {
        let ds = column_dataset(&[5.0, 5.0, 5.0]);
        assert_eq!(
            bandwidth_plan(&ds, 0.5, DegeneratePolicy::Error),
            Err(KernelError::DegenerateColumn("x".into()))
        );
        let p = bandwidth_plan(&ds, 0.5, DegeneratePolicy::UnitBandwidth).unwrap();
        assert_eq!(p.get(0).unwrap().bandwidth, 0.5);
    }

    #[test]
    fn discrete_columns_get_identity_kernels() {
        let ds = Dataset::from_rows(vec!["a".into(), "b".into()], &[vec![0.0, 1.0], vec![1.0, 1.0]])
            .unwrap()
            .with_discrete(&["a", "b"])
            .unwrap();
        let p = bandwidth_plan(&ds, 1e-3, DegeneratePolicy::Error).unwrap();
        assert!(p.kernels().iter().all(|k| *k == ColumnKernel::identity()));
    }

    #[test]
    fn product_kernel_examples() {
        let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(1.0), ColumnKernel::identity(), ColumnKernel::identity()]);
        assert_eq!(product_kernel_value(&plan, &[], &[], &[]).unwrap(), 1.0);
        let v = product_kernel_value(&plan, &[0], &[0.3], &[0.3]).unwrap();
        assert!((v - 0.3989422804014327).abs() < 1e-15);
        assert_eq!(product_kernel_value(&plan, &[1, 2], &[1.0, 2.0], &[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(product_kernel_value(&plan, &[1, 2], &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(product_kernel_value(&plan, &[7], &[0.0], &[0.0]), Err(KernelError::MissingBandwidth(7)));
    }

    #[test]
    fn gaussian_factor_integrates_to_one() {
        for h in [0.05, 0.7, 3.0] {
            let k = ColumnKernel::gaussian(h);
            // composite Simpson over +-12 bandwidths
            let (a, b, m) = (-12.0 * h, 12.0 * h, 20_000usize);
            let step = (b - a) / m as f64;
            let mut s = k.factor(a, 0.0) + k.factor(b, 0.0);
            for i in 1..m {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * k.factor(a + i as f64 * step, 0.0);
            }
            let integral = s * step / 3.0;
            assert!((integral - 1.0).abs() < 1e-6, "h={h}: {integral}");
        }
    }

    #[test]
    fn log_and_linear_factors_agree() {
        let k = ColumnKernel::gaussian(0.4);
        for (x, y) in [(0.0, 0.0), (0.1, -0.3), (2.0, 1.0)] {
            assert!((k.log_factor(x, y).exp() - k.factor(x, y)).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn plan_scales_exactly_with_powers_of_two(
            xs in proptest::collection::vec(-1e3f64..1e3, 2..40),
            exp in -8i32..8,
        ) {
            let ds = column_dataset(&xs);
            let c = 2f64.powi(exp);
            let base = bandwidth_plan(&ds, 1.0, DegeneratePolicy::Error);
            let scaled = bandwidth_plan(&ds.scaled(c), 1.0, DegeneratePolicy::Error);
            match (base, scaled) {
                (Ok(b), Ok(s)) => prop_assert_eq!(s.get(0).unwrap().bandwidth, c * b.get(0).unwrap().bandwidth),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }

        #[test]
        fn plan_scales_with_any_factor(xs in proptest::collection::vec(-1e3f64..1e3, 3..40), c in 0.01f64..100.0) {
            let ds = column_dataset(&xs);
            if let Ok(b) = bandwidth_plan(&ds, 1.0, DegeneratePolicy::Error) {
                let s = bandwidth_plan(&ds.scaled(c), 1.0, DegeneratePolicy::Error).unwrap();
                let (hb, hs) = (b.get(0).unwrap().bandwidth, s.get(0).unwrap().bandwidth);
                prop_assert!((hs - c * hb).abs() <= 1e-9 * c * hb);
            }
        }

        #[test]
        fn product_kernel_is_symmetric_and_nonnegative(
            x in proptest::collection::vec(-5f64..5.0, 3),
            y in proptest::collection::vec(-5f64..5.0, 3),
            h in 0.1f64..3.0,
        ) {
            let plan = BandwidthPlan::new(vec![ColumnKernel::gaussian(h), ColumnKernel::gaussian(2.0 * h), ColumnKernel::identity()]);
            let pillow = [0, 1];
            let a = product_kernel_value(&plan, &pillow, &x, &y).unwrap();
            let b = product_kernel_value(&plan, &pillow, &y, &x).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a >= 0.0);
            prop_assert!(log_product_kernel(&plan, &pillow, &x, &y).unwrap().is_finite());
            let xi = [x[2].round()];
            let yi = [y[2].round()];
            let v = product_kernel_value(&plan, &[2], &xi, &yi).unwrap();
            prop_assert!(v == 0.0 || v == 1.0);
        }
    }
}
