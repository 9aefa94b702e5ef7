//! Parametric failure-probability models.
//!
//! A model maps a covariate `x` in `[0, 2]` and a scalar parameter `theta`
//! to the probability of failure (outcome 0) of a single Bernoulli trial,
//! together with the derivative of that probability in `theta`. Four
//! built-in families ship; any user-supplied pair of maps satisfying the
//! same interface can be registered through [`ModelSpec::new`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Probabilities are clipped into `[PROB_CLIP, 1 - PROB_CLIP]` so that
/// log-likelihoods and likelihood-ratio weights stay finite. Where the clip
/// is active the returned derivative is zero, matching the derivative of
/// the clipped map.
pub const PROB_CLIP: f64 = 1e-10;

type ProbFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A parametric failure-probability family `(x, theta) -> p` with its
/// theta-derivative, the true parameter used for data generation, and the
/// closed interval searched by maximum likelihood.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    param_count: usize,
    theta0: f64,
    theta_interval: (f64, f64),
    failure_prob: ProbFn,
    failure_prob_dtheta: ProbFn,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("param_count", &self.param_count)
            .field("theta0", &self.theta0)
            .field("theta_interval", &self.theta_interval)
            .finish()
    }
}

impl ModelSpec {
    /// Register a scalar-parameter model from its failure probability and
    /// the derivative of that probability in theta.
    pub fn new<P, D>(
        name: impl Into<String>,
        theta0: f64,
        theta_interval: (f64, f64),
        failure_prob: P,
        failure_prob_dtheta: D,
    ) -> Self
    where
        P: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        assert!(
            theta_interval.0 < theta_interval.1,
            "theta interval must be non-degenerate"
        );
        Self {
            name: name.into(),
            param_count: 1,
            theta0,
            theta_interval,
            failure_prob: Arc::new(failure_prob),
            failure_prob_dtheta: Arc::new(failure_prob_dtheta),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of free parameters K (1 for every built-in family).
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// The data-generating parameter value.
    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// Closed interval searched by maximum likelihood.
    pub fn theta_interval(&self) -> (f64, f64) {
        self.theta_interval
    }

    /// Failure probability `p_{x,theta}(0)` and its theta-derivative,
    /// clipped into `[PROB_CLIP, 1 - PROB_CLIP]`.
    ///
    /// A non-finite value from either map signals an invalid parameter
    /// (for instance the beta family with theta small enough that the
    /// probability exceeds one before clipping can only be reached through
    /// non-finite intermediate values at the boundary).
    pub fn evaluate(&self, x: f64, theta: f64) -> Result<(f64, f64)> {
        let p = (self.failure_prob)(x, theta);
        let dp = (self.failure_prob_dtheta)(x, theta);
        if !p.is_finite() || !dp.is_finite() {
            return Err(Error::ModelEvaluation {
                model: self.name.clone(),
                x,
                theta,
            });
        }
        if p < PROB_CLIP {
            Ok((PROB_CLIP, 0.0))
        } else if p > 1.0 - PROB_CLIP {
            Ok((1.0 - PROB_CLIP, 0.0))
        } else {
            Ok((p, dp))
        }
    }

    /// Logistic failure probability `1 / (1 + e^{theta x})`, theta0 = 1.
    pub fn logistic() -> Self {
        Self::new(
            "logistic",
            1.0,
            (-5.0, 5.0),
            |x, theta| 1.0 / (1.0 + (theta * x).exp()),
            |x, theta| {
                // -x e^{tx} / (1 + e^{tx})^2 written as -x p (1-p) so the
                // expression stays finite when the exponential overflows.
                let p = 1.0 / (1.0 + (theta * x).exp());
                -x * p * (1.0 - p)
            },
        )
    }

    /// Rescaled exponential distribution function
    /// `0.2 + 0.8 (1 - e^{-theta x})`, theta0 = 0.3.
    pub fn exponential() -> Self {
        Self::new(
            "exponential",
            0.3,
            (0.01, 5.0),
            |x, theta| 0.2 + 0.8 * (1.0 - (-theta * x).exp()),
            |x, theta| 0.8 * x * (-theta * x).exp(),
        )
    }

    /// Modified normal density `1.5/sqrt(2 pi) e^{-2(x-theta)^2} + 0.2`,
    /// theta0 = 1.
    pub fn normal() -> Self {
        const SCALE: f64 = 1.5 / 2.5066282746310002; // 1.5 / sqrt(2 pi)
        Self::new(
            "normal",
            1.0,
            (-2.0, 4.0),
            |x, theta| SCALE * (-2.0 * (x - theta) * (x - theta)).exp() + 0.2,
            |x, theta| 4.0 * (x - theta) * SCALE * (-2.0 * (x - theta) * (x - theta)).exp(),
        )
    }

    /// Positively skewed beta density
    /// `0.2 + 2 (x/2)^{1/2} (1 - x/2)^{theta - 1}`, theta0 = 2.5.
    ///
    /// The lower end of the search interval sits above 1 because smaller
    /// exponents push the probability past one over much of the covariate
    /// range.
    pub fn beta() -> Self {
        Self::new(
            "beta",
            2.5,
            (1.1, 10.0),
            |x, theta| {
                let u = x / 2.0;
                0.2 + 2.0 * u.sqrt() * (1.0 - u).powf(theta - 1.0)
            },
            |x, theta| {
                let u = x / 2.0;
                if u >= 1.0 {
                    // (1-u)^{theta-1} ln(1-u) -> 0 as u -> 1 for theta > 1;
                    // the naive product would be 0 * -inf = NaN.
                    0.0
                } else {
                    2.0 * u.sqrt() * (1.0 - u).powf(theta - 1.0) * (1.0 - u).ln()
                }
            },
        )
    }

    /// Look up a built-in family by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "logistic" => Some(Self::logistic()),
            "exponential" => Some(Self::exponential()),
            "normal" => Some(Self::normal()),
            "beta" => Some(Self::beta()),
            _ => None,
        }
    }

    /// The four built-in families in their canonical order
    /// (Model 1 through Model 4).
    pub fn all_builtin() -> Vec<Self> {
        vec![
            Self::logistic(),
            Self::exponential(),
            Self::normal(),
            Self::beta(),
        ]
    }
}

/// Free-function form of [`ModelSpec::evaluate`].
pub fn evaluate_model(model: &ModelSpec, x: f64, theta: f64) -> Result<(f64, f64)> {
    model.evaluate(x, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logistic_at_zero_is_half() {
        let (p, _) = ModelSpec::logistic().evaluate(0.0, 1.0).unwrap();
        assert_relative_eq!(p, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn exponential_at_zero_is_point_two() {
        let (p, _) = ModelSpec::exponential().evaluate(0.0, 0.3).unwrap();
        assert_relative_eq!(p, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn logistic_at_two() {
        // 1 / (1 + e^2)
        let (p, _) = ModelSpec::logistic().evaluate(2.0, 1.0).unwrap();
        assert_relative_eq!(p, 0.119_202_922_022_117_56, epsilon = 1e-15);
    }

    #[test]
    fn normal_at_mode() {
        // 1.5/sqrt(2 pi) + 0.2
        let (p, _) = ModelSpec::normal().evaluate(1.0, 1.0).unwrap();
        assert_relative_eq!(p, 0.798_413_420_602_149, epsilon = 1e-15);
    }

    #[test]
    fn beta_at_half() {
        // 0.2 + 2 (1/4)^{1/2} (3/4)^{3/2}
        let (p, _) = ModelSpec::beta().evaluate(0.5, 2.5).unwrap();
        assert_relative_eq!(p, 0.849_519_052_838_329, epsilon = 1e-15);
    }

    #[test]
    fn logistic_decreasing_exponential_increasing() {
        let logistic = ModelSpec::logistic();
        let exponential = ModelSpec::exponential();
        let mut prev_l = f64::INFINITY;
        let mut prev_e = f64::NEG_INFINITY;
        for k in 0..=100 {
            let x = 2.0 * k as f64 / 100.0;
            let (pl, _) = logistic.evaluate(x, 1.0).unwrap();
            let (pe, _) = exponential.evaluate(x, 0.3).unwrap();
            assert!(pl < prev_l, "logistic must decrease in x");
            assert!(pe > prev_e, "exponential must increase in x");
            prev_l = pl;
            prev_e = pe;
        }
    }

    #[test]
    fn derivative_signs_on_open_interval() {
        let logistic = ModelSpec::logistic();
        let exponential = ModelSpec::exponential();
        for k in 1..=100 {
            let x = 2.0 * k as f64 / 100.0;
            for theta in [0.2, 1.0, 3.0] {
                assert!(logistic.evaluate(x, theta).unwrap().1 < 0.0);
            }
            for theta in [0.05, 0.3, 2.0] {
                assert!(exponential.evaluate(x, theta).unwrap().1 > 0.0);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        const STEP: f64 = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for model in ModelSpec::all_builtin() {
            let (lo, hi) = model.theta_interval();
            for _ in 0..100 {
                let x: f64 = rng.random_range(0.0..2.0);
                let theta: f64 = rng.random_range(lo + STEP..hi - STEP);
                let (_, dp) = model.evaluate(x, theta).unwrap();
                let (p_plus, _) = model.evaluate(x, theta + STEP).unwrap();
                let (p_minus, _) = model.evaluate(x, theta - STEP).unwrap();
                let fd = (p_plus - p_minus) / (2.0 * STEP);
                assert!(
                    (fd - dp).abs() <= 1e-5 * dp.abs() + 1e-9,
                    "{}: fd={fd} dp={dp} at x={x} theta={theta}",
                    model.name()
                );
            }
        }
    }

    #[test]
    fn clipping_kicks_in_for_beta_above_one() {
        // theta = 1.2 puts the raw probability above 1 around x = 1.
        let (p, dp) = ModelSpec::beta().evaluate(1.0, 1.2).unwrap();
        assert_relative_eq!(p, 1.0 - PROB_CLIP, epsilon = 1e-15);
        assert_eq!(dp, 0.0);
    }

    #[test]
    fn beta_is_finite_at_the_right_edge() {
        let (p, dp) = ModelSpec::beta().evaluate(2.0, 2.5).unwrap();
        assert_relative_eq!(p, 0.2, epsilon = 1e-15);
        assert_eq!(dp, 0.0);
    }

    #[test]
    fn non_finite_evaluation_is_an_error() {
        let bad = ModelSpec::new("bad", 0.0, (-1.0, 1.0), |_, _| f64::NAN, |_, _| 0.0);
        assert!(matches!(
            bad.evaluate(1.0, 0.0),
            Err(Error::ModelEvaluation { .. })
        ));
    }

    #[test]
    fn builtin_lookup_by_name() {
        for name in ["logistic", "exponential", "normal", "beta"] {
            assert_eq!(ModelSpec::builtin(name).unwrap().name(), name);
        }
        assert!(ModelSpec::builtin("cauchy").is_none());
    }

    #[test]
    fn builtin_probabilities_stay_clipped_over_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in ModelSpec::all_builtin() {
            let (lo, hi) = model.theta_interval();
            for _ in 0..200 {
                let x: f64 = rng.random_range(0.0..=2.0);
                let theta: f64 = rng.random_range(lo..hi);
                let (p, _) = model.evaluate(x, theta).unwrap();
                assert!((PROB_CLIP..=1.0 - PROB_CLIP).contains(&p));
            }
        }
    }
}
