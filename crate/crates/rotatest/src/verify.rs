//! Invariant verification over random cases.
//!
//! Every identity the rotation construction promises is exact up to
//! floating point, so the suite draws random (model, group size, covariate
//! vector, theta) cases and measures worst-case residuals:
//!
//! - orthonormality of the weighted score matrix (`O_A^T O_A = I`),
//! - the rotation mapping (`U L (B|Z_B) = (A|Z_A)`),
//! - unitarity under the fitted measure (`U^T D_P U = D_P`),
//! - score centering (`1^T D_P M = 0`),
//! - probabilities summing to one,
//! - the m = 1 closed form acting like the constructed rotation on the
//!   weighted basis directions,
//! - the rotated indicator class staying centred under the fitted measure.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::rng::RngFactory;
use crate::rotation::{
    build_reference_basis, build_u, build_u_m1_closed_form, complete_orthonormal,
    group_probabilities, information_matrix, normalized_score_matrix, weights,
};

/// Cases drawing a singular information matrix are redrawn at most this
/// many times.
const MAX_REDRAWS: u32 = 10;

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Bound for the matrix identities.
    pub identity: f64,
    /// Bound for the probability sum.
    pub prob_sum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-10,
            prob_sum: 1e-12,
        }
    }
}

/// Worst-case absolute residuals of one case (or the max over a suite).
#[derive(Clone, Copy, Debug, Default)]
pub struct Residuals {
    pub score_orthonormality: f64,
    pub rotation_map: f64,
    pub unitarity: f64,
    pub score_centering: f64,
    pub prob_sum: f64,
    pub closed_form: f64,
    pub process_centring: f64,
}

impl Residuals {
    pub fn within(&self, tol: &Tolerances) -> bool {
        self.score_orthonormality < tol.identity
            && self.rotation_map < tol.identity
            && self.unitarity < tol.identity
            && self.score_centering < tol.identity
            && self.prob_sum < tol.prob_sum
            && self.closed_form < tol.identity
            && self.process_centring < tol.identity
    }

    fn merge_max(&mut self, other: &Residuals) {
        self.score_orthonormality = self.score_orthonormality.max(other.score_orthonormality);
        self.rotation_map = self.rotation_map.max(other.rotation_map);
        self.unitarity = self.unitarity.max(other.unitarity);
        self.score_centering = self.score_centering.max(other.score_centering);
        self.prob_sum = self.prob_sum.max(other.prob_sum);
        self.closed_form = self.closed_form.max(other.closed_form);
        self.process_centring = self.process_centring.max(other.process_centring);
    }
}

/// One case that exceeded a tolerance, with enough context to replay it.
#[derive(Clone, Debug)]
pub struct CaseReport {
    pub case_index: u32,
    pub attempt: u32,
    pub model: String,
    pub m: usize,
    pub theta: f64,
    pub x_vec: Vec<f64>,
    pub residuals: Residuals,
}

#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub cases_run: usize,
    pub redraws: usize,
    pub max_residuals: Residuals,
    pub tolerances: Tolerances,
    pub failures: Vec<CaseReport>,
}

impl VerifyOutcome {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Residuals of the rotation identities for one subgroup.
pub fn case_residuals(model: &ModelSpec, x_vec: &[f64], theta: f64) -> Result<Residuals> {
    let m = x_vec.len();
    let dim = 1usize << m;
    let basis = build_reference_basis(m);

    let gp = group_probabilities(model, x_vec, theta)?;
    let scores = DMatrix::from_fn(dim, 1, |z, _| gp.dprobs[z] / gp.probs[z]);
    let gamma = information_matrix(&scores, &gp.probs)?;
    let ell = weights(&gp.probs);
    let u = build_u(&gp.probs, &scores, &gamma, &basis)?;

    let sqrt_p: Vec<f64> = gp.probs.iter().map(|p| p.sqrt()).collect();
    let a = normalized_score_matrix(&scores, &gamma)?;
    let mut o_a = a.clone();
    for (r, &sp) in sqrt_p.iter().enumerate() {
        for c in 0..o_a.ncols() {
            o_a[(r, c)] *= sp;
        }
    }
    let score_orthonormality = max_abs(&(o_a.transpose() * &o_a - DMatrix::identity(2, 2)));

    // U L (B|Z_B) = (A|Z_A), with (B|Z_B) = 2^{m/2} O_Q and
    // (A|Z_A) = D_P^{-1/2} O_P for this module's own completions.
    let o_p = complete_orthonormal(&o_a);
    let l = DMatrix::from_diagonal(&ell);
    let full_b = basis.o_q() * (dim as f64).sqrt();
    let lhs = &u * l * full_b;
    let mut rhs = o_p;
    for (r, &sp) in sqrt_p.iter().enumerate() {
        for c in 0..dim {
            rhs[(r, c)] /= sp;
        }
    }
    let rotation_map = max_abs(&(lhs - rhs));

    let d_p = DMatrix::from_diagonal(&gp.probs);
    let unitarity = max_abs(&(u.transpose() * &d_p * &u - &d_p));
    let score_centering = (gp.probs.transpose() * &scores).amax();
    let prob_sum = (gp.probs.sum() - 1.0).abs();

    let closed_form = if m == 1 {
        let u_cf = build_u_m1_closed_form(gp.probs[0], gp.dprobs[0]);
        let b1 = DVector::from_vec(vec![-1.0, 1.0]);
        let lb0 = ell.clone();
        let lb1 = ell.component_mul(&b1);
        let d0 = (&u * &lb0 - &u_cf * &lb0).amax();
        let d1 = (&u * &lb1 - &u_cf * &lb1).amax();
        d0.max(d1)
    } else {
        0.0
    };

    // The indicator class is centred under Q, so <p, U(l v_z0)> = 0.
    let q = (dim as f64).recip();
    let mut process_centring = 0.0_f64;
    for z0 in 1..dim {
        let v = DVector::from_fn(dim, |z, _| f64::from(z < z0) - q * z0 as f64);
        let w = &u * ell.component_mul(&v);
        process_centring = process_centring.max(gp.probs.dot(&w).abs());
    }

    Ok(Residuals {
        score_orthonormality,
        rotation_map,
        unitarity,
        score_centering,
        prob_sum,
        closed_form,
        process_centring,
    })
}

/// Run the suite over `cases` random cases cycling through the models and
/// group sizes, with theta drawn near each model's true value.
pub fn run_invariant_suite(
    cases: usize,
    factory: &RngFactory,
    models: &[ModelSpec],
) -> Result<VerifyOutcome> {
    assert!(!models.is_empty());
    let tolerances = Tolerances::default();
    let mut max_residuals = Residuals::default();
    let mut failures = Vec::new();
    let mut redraws = 0usize;

    for case in 0..cases {
        let model = &models[case % models.len()];
        let m = (case / models.len()) % 3 + 1;
        let mut attempt = 0u32;
        let report = loop {
            let mut rng = factory.verification(case as u32, attempt);
            let (lo, hi) = model.theta_interval();
            let theta = (model.theta0() + rng.random_range(-0.25..0.25)).clamp(lo, hi);
            let x_vec: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0)).collect();
            match case_residuals(model, &x_vec, theta) {
                Ok(residuals) => {
                    break CaseReport {
                        case_index: case as u32,
                        attempt,
                        model: model.name().to_string(),
                        m,
                        theta,
                        x_vec,
                        residuals,
                    }
                }
                Err(Error::SingularInformation { .. }) if attempt < MAX_REDRAWS => {
                    attempt += 1;
                    redraws += 1;
                }
                Err(e) => return Err(e),
            }
        };
        max_residuals.merge_max(&report.residuals);
        if !report.residuals.within(&tolerances) {
            failures.push(report);
        }
    }

    Ok(VerifyOutcome {
        cases_run: cases,
        redraws,
        max_residuals,
        tolerances,
        failures,
    })
}
