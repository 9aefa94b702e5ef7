//! Grouped Bernoulli trial data and the lexicographic outcome encoding.
//!
//! A sample holds `n` subgroups of `m` trials each. Outcome 0 is a
//! "failure" and occurs with the model's failure probability; outcome 1 is
//! a "success". The joint outcome of a subgroup is encoded as an integer
//! `z` in `1..=2^m` by reading the outcome vector as a binary number:
//! `(0,0,0) -> 1`, `(0,0,1) -> 2`, ..., `(1,1,1) -> 8` when `m = 3`.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::ModelSpec;

/// `n` subgroups of `m` Bernoulli outcomes with their covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSample {
    m: usize,
    n: usize,
    covariates: Vec<f64>,
    outcomes: Vec<u8>,
}

impl TrialSample {
    /// Assemble a sample from row-major per-trial data. `covariates` and
    /// `outcomes` both have length `n * m`, subgroup-major.
    pub fn from_parts(m: usize, covariates: Vec<f64>, outcomes: Vec<u8>) -> Self {
        assert!(m >= 1, "subgroups must contain at least one trial");
        assert_eq!(covariates.len(), outcomes.len());
        assert_eq!(covariates.len() % m, 0, "trial count must be divisible by m");
        assert!(outcomes.iter().all(|&y| y <= 1), "outcomes must be 0 or 1");
        let n = covariates.len() / m;
        Self {
            m,
            n,
            covariates,
            outcomes,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_trials(&self) -> usize {
        self.n * self.m
    }

    /// Covariates of subgroup `j`, length `m`.
    pub fn subgroup_covariates(&self, j: usize) -> &[f64] {
        &self.covariates[j * self.m..(j + 1) * self.m]
    }

    /// Outcomes of subgroup `j`, length `m`.
    pub fn subgroup_outcomes(&self, j: usize) -> &[u8] {
        &self.outcomes[j * self.m..(j + 1) * self.m]
    }

    /// Lexicographic code of subgroup `j`, in `1..=2^m`.
    pub fn subgroup_code(&self, j: usize) -> usize {
        encode_lex(self.subgroup_outcomes(j))
    }

    /// Largest covariate within subgroup `j`; the subgroup enters the
    /// indicator set `{x <= x0}` exactly when this is at most `x0`.
    pub fn max_covariate(&self, j: usize) -> f64 {
        self.subgroup_covariates(j)
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    /// Iterate over all `n * m` trials as `(covariate, outcome)` pairs.
    pub fn trials(&self) -> impl Iterator<Item = (f64, u8)> + '_ {
        self.covariates
            .iter()
            .copied()
            .zip(self.outcomes.iter().copied())
    }

    /// Reorder subgroups according to `order` (a permutation of `0..n`).
    pub fn permuted_subgroups(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n);
        let mut covariates = Vec::with_capacity(self.covariates.len());
        let mut outcomes = Vec::with_capacity(self.outcomes.len());
        for &j in order {
            covariates.extend_from_slice(self.subgroup_covariates(j));
            outcomes.extend_from_slice(self.subgroup_outcomes(j));
        }
        Self::from_parts(self.m, covariates, outcomes)
    }

    /// Write the sample as CSV with columns `subgroup,trial,covariate,outcome`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "subgroup,trial,covariate,outcome")?;
        for j in 0..self.n {
            for i in 0..self.m {
                writeln!(
                    w,
                    "{},{},{},{}",
                    j + 1,
                    i + 1,
                    self.covariates[j * self.m + i],
                    self.outcomes[j * self.m + i]
                )?;
            }
        }
        Ok(())
    }
}

/// Draw a sample of `n` subgroups of `m` trials from `model` at `theta`:
/// covariates i.i.d. uniform on `[0, 2]`, outcome 0 with the model's
/// failure probability, independently per trial.
///
/// Within each subgroup the trials are stored in ascending covariate
/// order. Trials are exchangeable, so this is only a storage convention,
/// but it makes the lexicographic outcome code slice subgroups in
/// covariate order: the high bit of `z` is the outcome of the smallest
/// covariate. The rotated process reads covariate structure through the
/// outcome thresholds this way, which matters for group sizes above one.
pub fn generate_sample(
    model: &ModelSpec,
    theta: f64,
    n: usize,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrialSample> {
    let total = n * m;
    let mut covariates = Vec::with_capacity(total);
    let mut outcomes = Vec::with_capacity(total);
    let mut subgroup: Vec<(f64, u8)> = Vec::with_capacity(m);
    for _ in 0..n {
        subgroup.clear();
        for _ in 0..m {
            let x: f64 = rng.random_range(0.0..2.0);
            let (p, _) = model.evaluate(x, theta)?;
            let u: f64 = rng.random();
            subgroup.push((x, u8::from(u >= p)));
        }
        subgroup.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(x, y) in &subgroup {
            covariates.push(x);
            outcomes.push(y);
        }
    }
    Ok(TrialSample::from_parts(m, covariates, outcomes))
}

/// Lexicographic code of an outcome vector: `z = 1 + sum_i y_i 2^{m-1-i}`.
pub fn encode_lex(y: &[u8]) -> usize {
    let mut z = 0usize;
    for &yi in y {
        debug_assert!(yi <= 1);
        z = (z << 1) | yi as usize;
    }
    z + 1
}

/// Outcome vector corresponding to code `z` in `1..=2^m`.
pub fn decode_lex(z: usize, m: usize) -> Vec<u8> {
    assert!((1..=1 << m).contains(&z), "z out of range for group size");
    let bits = z - 1;
    (0..m).map(|i| ((bits >> (m - 1 - i)) & 1) as u8).collect()
}
