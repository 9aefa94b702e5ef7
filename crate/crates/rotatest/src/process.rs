//! The rotated empirical process and its Kolmogorov-Smirnov statistic.
//!
//! The indicator class is indexed by a covariate threshold `x0` and an
//! outcome threshold `z0`:
//!
//! ```text
//! psi_{x0,z0}(x, z) = 1{x <= x0} [ 1{z <= z0} - 2^-m z0 ]
//! ```
//!
//! For a subgroup with rotation `U`, weights `l` and probabilities `p`, the
//! rotated process evaluates to
//!
//! ```text
//! (1/sqrt n) sum_{j : X_j <= x0} [ w_j(z_j) - sum_z p_z w_j(z) ],
//! w_j = U (l . v_{z0}),   v_{z0}(z) = 1{z <= z0} - 2^-m z0
//! ```
//!
//! where a vector covariate enters the indicator componentwise (every
//! coordinate at most `x0`). The KS statistic maximizes the absolute value
//! over the covariate grid `{2k/G : k = 1..G}` and `z0 in 1..2^m - 1`
//! (`z0 = 2^m` makes `v` vanish identically, and `x0 = 0` indexes the
//! empty set).

use nalgebra::DVector;

use crate::error::Result;
use crate::model::ModelSpec;
use crate::rotation::{build_reference_basis, RotationBundle};
use crate::sample::TrialSample;

/// Maximum of the rotated process with its (first) maximizing index pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KSResult {
    pub ks: f64,
    pub argmax_x0: f64,
    pub argmax_z0: usize,
}

/// The covariate grid `{2k/points : k = 1..points}`: excludes 0, includes 2.
pub fn covariate_grid(points: usize) -> Vec<f64> {
    assert!(points >= 1);
    (1..=points)
        .map(|k| 2.0 * k as f64 / points as f64)
        .collect()
}

/// The fitted-and-rotated process of one sample, with every per-subgroup
/// quantity (U, l, p) computed once.
#[derive(Clone, Debug)]
pub struct RotatedProcess {
    m: usize,
    n: usize,
    /// Largest covariate per subgroup; drives the `{x <= x0}` indicator.
    x_max: Vec<f64>,
    /// `contrib[z0 - 1][j]`: subgroup j's centred term for threshold z0.
    contrib: Vec<Vec<f64>>,
    degenerate_groups: u64,
}

impl RotatedProcess {
    pub fn new(model: &ModelSpec, sample: &TrialSample, theta_hat: f64) -> Result<Self> {
        let m = sample.m();
        let n = sample.n();
        let dim = 1usize << m;
        let basis = build_reference_basis(m);
        let q = (dim as f64).recip();

        let mut x_max = Vec::with_capacity(n);
        let mut contrib = vec![vec![0.0; n]; dim];
        let mut degenerate_groups = 0u64;
        for j in 0..n {
            let bundle =
                RotationBundle::build(model, sample.subgroup_covariates(j), theta_hat, &basis)?;
            degenerate_groups += u64::from(bundle.degenerate);
            x_max.push(sample.max_covariate(j));
            let z_j = sample.subgroup_code(j);
            for (z0, row) in (1..=dim).zip(contrib.iter_mut()) {
                let v = DVector::from_fn(dim, |z, _| f64::from(z < z0) - q * z0 as f64);
                let w = &bundle.u * bundle.ell.component_mul(&v);
                row[j] = w[z_j - 1] - bundle.probs.dot(&w);
            }
        }
        Ok(Self {
            m,
            n,
            x_max,
            contrib,
            degenerate_groups,
        })
    }

    pub fn group_size(&self) -> usize {
        self.m
    }

    pub fn subgroups(&self) -> usize {
        self.n
    }

    /// Subgroups whose outcome probabilities were flagged degenerate.
    pub fn degenerate_groups(&self) -> u64 {
        self.degenerate_groups
    }

    /// Value of the rotated process at `(x0, z0)`, `z0 in 1..=2^m`.
    pub fn value(&self, x0: f64, z0: usize) -> f64 {
        assert!((1..=1 << self.m).contains(&z0));
        let inv_sqrt_n = (self.n as f64).sqrt().recip();
        let terms = &self.contrib[z0 - 1];
        let sum: f64 = self
            .x_max
            .iter()
            .zip(terms)
            .filter(|(&x, _)| x <= x0)
            .map(|(_, &c)| c)
            .sum();
        inv_sqrt_n * sum
    }

    /// Maximize `|value|` over the grid and `z0 in 1..2^m - 1`. Ties keep
    /// the first maximizer in scan order (z0 outer, x0 ascending).
    pub fn ks(&self, grid_points: usize) -> KSResult {
        let dim = 1usize << self.m;
        let grid = covariate_grid(grid_points);
        let inv_sqrt_n = (self.n as f64).sqrt().recip();

        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.x_max[a].total_cmp(&self.x_max[b]));
        let sorted_x: Vec<f64> = order.iter().map(|&j| self.x_max[j]).collect();

        let mut best = KSResult {
            ks: -1.0,
            argmax_x0: grid[0],
            argmax_z0: 1,
        };
        for z0 in 1..dim {
            let terms = &self.contrib[z0 - 1];
            let mut prefix = Vec::with_capacity(self.n + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &j in &order {
                acc += terms[j];
                prefix.push(acc);
            }
            for &x0 in &grid {
                let count = sorted_x.partition_point(|&x| x <= x0);
                let value = (inv_sqrt_n * prefix[count]).abs();
                if value > best.ks {
                    best = KSResult {
                        ks: value,
                        argmax_x0: x0,
                        argmax_z0: z0,
                    };
                }
            }
        }
        best.ks = best.ks.max(0.0);
        best
    }
}

/// One-off evaluation of the rotated process; builds all per-subgroup
/// bundles, so prefer [`RotatedProcess`] when scanning many `(x0, z0)`.
pub fn rotated_process_value(
    sample: &TrialSample,
    model: &ModelSpec,
    theta_hat: f64,
    x0: f64,
    z0: usize,
) -> Result<f64> {
    Ok(RotatedProcess::new(model, sample, theta_hat)?.value(x0, z0))
}

/// KS statistic of the sample under the fitted model.
pub fn ks_statistic(
    sample: &TrialSample,
    model: &ModelSpec,
    theta_hat: f64,
    grid_points: usize,
) -> Result<KSResult> {
    Ok(RotatedProcess::new(model, sample, theta_hat)?.ks(grid_points))
}
