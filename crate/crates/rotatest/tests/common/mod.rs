//! Shared helpers for the integration suites.

use nalgebra::DVector;
use rotatest::model::ModelSpec;
use rotatest::rotation::{build_reference_basis, RotationBundle};
use rotatest::sample::TrialSample;

/// Direct-summation KS oracle: `O(grid * 2^m * n)` with every per-subgroup
/// quantity rebuilt inside the innermost loop. Slow on purpose; it shares
/// no scan structure with the production path.
pub fn naive_ks(model: &ModelSpec, sample: &TrialSample, theta: f64, grid_points: usize) -> f64 {
    let m = sample.m();
    let dim = 1usize << m;
    let n = sample.n();
    let basis = build_reference_basis(m);
    let q = (dim as f64).recip();
    let mut best = 0.0_f64;
    for z0 in 1..dim {
        for k in 1..=grid_points {
            let x0 = 2.0 * k as f64 / grid_points as f64;
            let mut total = 0.0;
            for j in 0..n {
                if sample.max_covariate(j) <= x0 {
                    let bundle =
                        RotationBundle::build(model, sample.subgroup_covariates(j), theta, &basis)
                            .expect("oracle bundle");
                    let v =
                        DVector::from_fn(dim, |z, _| f64::from(z < z0) - q * z0 as f64);
                    let w = &bundle.u * bundle.ell.component_mul(&v);
                    total += w[sample.subgroup_code(j) - 1] - bundle.probs.dot(&w);
                }
            }
            best = best.max((total / (n as f64).sqrt()).abs());
        }
    }
    best
}
