//! Maximum-likelihood estimation of the scalar model parameter.
//!
//! The Bernoulli log-likelihood is maximized over the model's closed
//! parameter interval with a coarse scan followed by bounded Brent
//! refinement (golden section with parabolic interpolation). No second
//! derivative is required from the model, and the coarse scan guards
//! against multimodal likelihoods under the bump-shaped families.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sample::TrialSample;

/// Absolute tolerance on the maximizer.
const XATOL: f64 = 1e-8;
/// Iteration cap for the refinement stage.
const MAX_ITER: usize = 10_000;
/// Intervals in the coarse bracketing scan.
const COARSE_INTERVALS: usize = 64;
/// A maximizer within this distance of an interval endpoint is flagged.
const BOUNDARY_TOL: f64 = 1e-6;

/// Outcome of a likelihood fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub theta_hat: f64,
    pub loglik: f64,
    pub converged: bool,
    pub at_boundary: bool,
}

/// Bernoulli log-likelihood over all `n * m` trials:
/// `sum (1-y) ln p(x, theta) + y ln(1 - p(x, theta))` with clipped `p`.
pub fn log_likelihood(model: &ModelSpec, sample: &TrialSample, theta: f64) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in sample.trials() {
        let (p, _) = model.evaluate(x, theta)?;
        total += if y == 0 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total)
}

/// Derivative of the log-likelihood in theta, from the model's own
/// derivative map: `sum (1-y) p'/p - y p'/(1-p)`.
pub fn score(model: &ModelSpec, sample: &TrialSample, theta: f64) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in sample.trials() {
        let (p, dp) = model.evaluate(x, theta)?;
        total += if y == 0 { dp / p } else { -dp / (1.0 - p) };
    }
    Ok(total)
}

/// Maximize the log-likelihood over the model's parameter interval.
///
/// `at_boundary` is set when the maximizer lands within [`BOUNDARY_TOL`] of
/// an interval endpoint (for instance when every outcome is a failure and
/// the likelihood is monotone). Such fits are returned, not rejected.
pub fn fit_mle(model: &ModelSpec, sample: &TrialSample) -> Result<FitResult> {
    fit_mle_capped(model, sample, MAX_ITER)
}

pub(crate) fn fit_mle_capped(
    model: &ModelSpec,
    sample: &TrialSample,
    max_iter: usize,
) -> Result<FitResult> {
    assert!(sample.n() > 0, "cannot fit an empty sample");
    let (lo, hi) = model.theta_interval();
    let width = hi - lo;

    let mut best_i = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=COARSE_INTERVALS {
        let theta = lo + width * i as f64 / COARSE_INTERVALS as f64;
        let v = log_likelihood(model, sample, theta)?;
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = lo + width * best_i.saturating_sub(1) as f64 / COARSE_INTERVALS as f64;
    let b = lo + width * (best_i + 1).min(COARSE_INTERVALS) as f64 / COARSE_INTERVALS as f64;

    let outcome = brent_max(|theta| log_likelihood(model, sample, theta), a, b, max_iter)?;
    let at_bound = |theta: f64| (theta - lo).abs() <= BOUNDARY_TOL || (hi - theta).abs() <= BOUNDARY_TOL;
    match outcome {
        BrentOutcome::Converged { x, fx } => Ok(FitResult {
            theta_hat: x,
            loglik: fx,
            converged: true,
            at_boundary: at_bound(x),
        }),
        BrentOutcome::IterationCap { x, fx } => Err(Error::Estimation {
            max_iter,
            best: FitResult {
                theta_hat: x,
                loglik: fx,
                converged: false,
                at_boundary: at_bound(x),
            },
        }),
    }
}

enum BrentOutcome {
    Converged { x: f64, fx: f64 },
    IterationCap { x: f64, fx: f64 },
}

/// Bounded scalar maximization by golden section with successive parabolic
/// interpolation, to absolute tolerance [`XATOL`] on the maximizer.
fn brent_max<F>(mut f: F, lo: f64, hi: f64, max_iter: usize) -> Result<BrentOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    // Minimize the negated objective.
    let mut g = |x: f64| f(x).map(|v| -v);
    let sqrt_eps = f64::EPSILON.sqrt();
    let golden_mean = 0.5 * (3.0 - 5.0_f64.sqrt());

    let (mut a, mut b) = (lo, hi);
    let mut xf = a + golden_mean * (b - a);
    let (mut fulc, mut nfc) = (xf, xf);
    let mut fx = g(xf)?;
    let (mut ffulc, mut fnfc) = (fx, fx);
    let mut rat = 0.0_f64;
    let mut e = 0.0_f64;
    let mut evals = 1usize;

    loop {
        let xm = 0.5 * (a + b);
        let tol1 = sqrt_eps * xf.abs() + XATOL / 3.0;
        let tol2 = 2.0 * tol1;
        if (xf - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(BrentOutcome::Converged { x: xf, fx: -fx });
        }
        if evals >= max_iter {
            return Ok(BrentOutcome::IterationCap { x: xf, fx: -fx });
        }

        let mut golden = true;
        if e.abs() > tol1 {
            // Try a parabolic step through the three best points.
            golden = false;
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                rat = p / q;
                let x = xf + rat;
                if (x - a) < tol2 || (b - x) < tol2 {
                    rat = tol1 * (xm - xf).signum();
                }
            } else {
                golden = true;
            }
        }
        if golden {
            e = if xf >= xm { a - xf } else { b - xf };
            rat = golden_mean * e;
        }

        let x = xf + rat.signum() * rat.abs().max(tol1);
        let fu = g(x)?;
        evals += 1;

        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            fulc = nfc;
            ffulc = fnfc;
            nfc = xf;
            fnfc = fx;
            xf = x;
            fx = fu;
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                fulc = nfc;
                ffulc = fnfc;
                nfc = x;
                fnfc = fu;
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                fulc = x;
                ffulc = fu;
            }
        }
    }
}
