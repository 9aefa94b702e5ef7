//! Rotation of the fitted empirical process to the uniform reference
//! measure.
//!
//! For a subgroup with outcome probabilities `p` (a vector over the 2^m
//! elementary events) and score matrix `M` with entries `(dp_z/dtheta_k)/p_z`,
//! the information matrix is `Gamma = M^T D_P M` with `D_P = diag(p)`. The
//! normalized scores `A = (1 | M Gamma^{-1/2})` have `D_P`-orthonormal
//! columns, and the rotation
//!
//! ```text
//! U = D_P^{-1/2} O_P O_Q^T D_P^{1/2}
//! ```
//!
//! maps the weighted reference directions `l b_k` onto the score directions
//! `a_k`, where `l_z = sqrt(2^-m / p_z)` is the likelihood-ratio weight,
//! `O_P` completes `D_P^{1/2} A` to an orthogonal matrix and `O_Q` plays the
//! same role for the reference basis under `D_Q = 2^-m I`. `U` is unitary
//! with respect to the inner product weighted by `D_P`, which is what makes
//! the rotated process asymptotically free of the covariates and of the
//! estimated parameter.
//!
//! Both square roots come from spectral decompositions with the principal
//! (positive) branch; completions use Gram-Schmidt over canonical basis
//! vectors in fixed index order so runs are reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sample::{decode_lex, TrialSample};

/// Information matrices with an eigenvalue at or below this floor raise
/// [`Error::SingularInformation`] instead of being silently regularized.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;
/// Completion candidates whose residual after projection is shorter than
/// this are skipped as near-dependent.
const COMPLETION_SKIP: f64 = 1e-8;
/// A subgroup is flagged degenerate when one elementary event carries
/// essentially all the mass.
const DEGENERACY_GAP: f64 = 1e-8;

/// Outcome probabilities of one subgroup and their theta-derivatives.
#[derive(Clone, Debug)]
pub struct GroupProbs {
    /// `p_z` for `z = 1..=2^m`, in lexicographic order.
    pub probs: DVector<f64>,
    /// `dp_z/dtheta`, same order.
    pub dprobs: DVector<f64>,
    /// Set when all mass sits on a single elementary event after clipping.
    pub degenerate: bool,
}

/// Per-subgroup probability vector, score matrix, information matrix,
/// weight vector and rotation matrix.
#[derive(Clone, Debug)]
pub struct RotationBundle {
    pub m: usize,
    pub param_count: usize,
    pub probs: DVector<f64>,
    pub scores: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub ell: DVector<f64>,
    pub u: DMatrix<f64>,
    pub degenerate: bool,
}

/// The reference-measure basis `B = (1 | b_1)` together with the completed
/// orthogonal matrix `O_Q = D_Q^{1/2} (B | Z_B)`.
#[derive(Clone, Debug)]
pub struct ReferenceBasis {
    m: usize,
    b: DMatrix<f64>,
    o_q: DMatrix<f64>,
}

impl ReferenceBasis {
    pub fn group_size(&self) -> usize {
        self.m
    }

    /// Dimension `2^m`.
    pub fn dim(&self) -> usize {
        1 << self.m
    }

    /// The specified columns of `B` (all ones, then `b_1`).
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn o_q(&self) -> &DMatrix<f64> {
        &self.o_q
    }
}

/// Build the reference basis for subgroups of size `m` in `{1, 2, 3}`.
///
/// The second columns are fixed vectors orthonormal to `1` under
/// `D_Q = 2^-m I`; the rest of `O_Q` is completed deterministically.
pub fn build_reference_basis(m: usize) -> ReferenceBasis {
    let b1: Vec<f64> = match m {
        1 => vec![-1.0, 1.0],
        2 => {
            let s = 2.0_f64.sqrt();
            vec![-s, 0.0, 0.0, s]
        }
        3 => {
            let s = 3.0_f64.sqrt().recip();
            [-3.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 3.0]
                .iter()
                .map(|v| v * s)
                .collect()
        }
        _ => panic!("reference basis is defined for group sizes 1, 2 and 3"),
    };
    let dim = 1 << m;
    let mut b = DMatrix::zeros(dim, 2);
    for z in 0..dim {
        b[(z, 0)] = 1.0;
        b[(z, 1)] = b1[z];
    }
    let scale = (dim as f64).sqrt().recip(); // D_Q^{1/2} = 2^{-m/2} I
    let o_q = complete_orthonormal(&(&b * scale));
    ReferenceBasis { m, b, o_q }
}

/// Joint outcome probabilities of a subgroup: for each code `z`,
/// `p_z = prod_i p(x_i)^{1-y_i} (1-p(x_i))^{y_i}` with `(y_1..y_m)` the
/// decoded outcome vector, plus the derivative by the product rule.
pub fn group_probabilities(model: &ModelSpec, x_vec: &[f64], theta: f64) -> Result<GroupProbs> {
    let m = x_vec.len();
    let dim = 1 << m;
    let trial: Vec<(f64, f64)> = x_vec
        .iter()
        .map(|&x| model.evaluate(x, theta))
        .collect::<Result<_>>()?;
    let mut probs = DVector::zeros(dim);
    let mut dprobs = DVector::zeros(dim);
    for z in 1..=dim {
        let y = decode_lex(z, m);
        let mut p_z = 1.0;
        let mut logderiv = 0.0; // d/dtheta log p_z
        for (i, &yi) in y.iter().enumerate() {
            let (p, dp) = trial[i];
            if yi == 0 {
                p_z *= p;
                logderiv += dp / p;
            } else {
                p_z *= 1.0 - p;
                logderiv -= dp / (1.0 - p);
            }
        }
        probs[z - 1] = p_z;
        dprobs[z - 1] = p_z * logderiv;
    }
    let degenerate = probs.iter().any(|&p| p >= 1.0 - DEGENERACY_GAP);
    Ok(GroupProbs {
        probs,
        dprobs,
        degenerate,
    })
}

/// Likelihood-ratio weights `l_z = sqrt(2^-m / p_z)` carrying functions
/// between the fitted measure and the uniform reference measure.
pub fn weights(probs: &DVector<f64>) -> DVector<f64> {
    let q = (probs.len() as f64).recip();
    probs.map(|p| (q / p).sqrt())
}

/// Information matrix `Gamma = M^T D_P M` for one subgroup.
///
/// Errors with [`Error::SingularInformation`] when the smallest eigenvalue
/// is at or below [`EIGENVALUE_FLOOR`]; the rotation is undefined for such
/// a subgroup.
pub fn information_matrix(scores: &DMatrix<f64>, probs: &DVector<f64>) -> Result<DMatrix<f64>> {
    assert_eq!(scores.nrows(), probs.len());
    let mut weighted = scores.clone();
    for (r, &p) in probs.iter().enumerate() {
        for c in 0..weighted.ncols() {
            weighted[(r, c)] *= p;
        }
    }
    let gamma = scores.transpose() * weighted;
    let min_eig = SymmetricEigen::new(gamma.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig <= EIGENVALUE_FLOOR {
        return Err(Error::SingularInformation {
            min_eigenvalue: min_eig,
        });
    }
    Ok(gamma)
}

/// Whole-sample information `sum_j Gamma^{(j)}`, reported for diagnostics.
/// Per-subgroup matrices are what the rotation itself normalizes by.
pub fn total_information(model: &ModelSpec, sample: &TrialSample, theta: f64) -> Result<DMatrix<f64>> {
    let k = model.param_count();
    let mut total = DMatrix::zeros(k, k);
    for j in 0..sample.n() {
        let gp = group_probabilities(model, sample.subgroup_covariates(j), theta)?;
        let dim = gp.probs.len();
        let scores = DMatrix::from_fn(dim, 1, |z, _| gp.dprobs[z] / gp.probs[z]);
        for (r, &p) in gp.probs.iter().enumerate() {
            total[(0, 0)] += scores[(r, 0)] * scores[(r, 0)] * p;
        }
    }
    Ok(total)
}

/// Normalized score matrix `A = (1 | M Gamma^{-1/2})`, the principal square
/// root coming from the spectral decomposition of `Gamma`.
pub fn normalized_score_matrix(
    scores: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let eigen = SymmetricEigen::new(gamma.clone());
    let min_eig = eigen.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig <= EIGENVALUE_FLOOR {
        return Err(Error::SingularInformation {
            min_eigenvalue: min_eig,
        });
    }
    let inv_sqrt_vals = DMatrix::from_diagonal(&eigen.eigenvalues.map(|v| v.sqrt().recip()));
    let gamma_inv_sqrt = &eigen.eigenvectors * inv_sqrt_vals * eigen.eigenvectors.transpose();
    let normalized = scores * gamma_inv_sqrt;
    let dim = scores.nrows();
    let mut a = DMatrix::zeros(dim, normalized.ncols() + 1);
    for r in 0..dim {
        a[(r, 0)] = 1.0;
        for c in 0..normalized.ncols() {
            a[(r, c + 1)] = normalized[(r, c)];
        }
    }
    Ok(a)
}

/// Complete a matrix with orthonormal columns to a square orthogonal matrix
/// by Gram-Schmidt over canonical basis vectors in index order.
pub fn complete_orthonormal(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = cols.nrows();
    assert!(cols.ncols() <= dim);
    let mut basis: Vec<DVector<f64>> = cols.column_iter().map(|c| c.into_owned()).collect();
    for threshold in [COMPLETION_SKIP, 1e-14] {
        for index in 0..dim {
            if basis.len() == dim {
                break;
            }
            let mut v = DVector::zeros(dim);
            v[index] = 1.0;
            // Two projection passes keep the result orthogonal to working
            // precision.
            for _ in 0..2 {
                for u in &basis {
                    let d = u.dot(&v);
                    v.axpy(-d, u, 1.0);
                }
            }
            let norm = v.norm();
            if norm < threshold {
                continue;
            }
            basis.push(v / norm);
        }
        if basis.len() == dim {
            break;
        }
    }
    assert_eq!(basis.len(), dim, "completion failed; input columns not orthonormal");
    DMatrix::from_columns(&basis)
}

/// The rotation `U = D_P^{-1/2} O_P O_Q^T D_P^{1/2}`.
///
/// Requires `K + 1 <= 2^m`; with more parameters than that, not all of them
/// can be identified from subgroups of size `m` and the rotation is
/// undefined.
pub fn build_u(
    probs: &DVector<f64>,
    scores: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    basis: &ReferenceBasis,
) -> Result<DMatrix<f64>> {
    let dim = probs.len();
    let k = scores.ncols();
    assert_eq!(scores.nrows(), dim);
    assert_eq!(basis.dim(), dim, "basis group size must match the subgroup");
    if k + 1 > dim {
        return Err(Error::Identifiability {
            params: k,
            group_size: basis.group_size(),
        });
    }
    let a = normalized_score_matrix(scores, gamma)?;
    let sqrt_p: Vec<f64> = probs.iter().map(|p| p.sqrt()).collect();
    let mut o_a = a;
    for (r, &sp) in sqrt_p.iter().enumerate() {
        for c in 0..o_a.ncols() {
            o_a[(r, c)] *= sp;
        }
    }
    let o_p = complete_orthonormal(&o_a);
    let mut u = o_p * basis.o_q().transpose();
    for r in 0..dim {
        for c in 0..dim {
            u[(r, c)] *= sqrt_p[c] / sqrt_p[r];
        }
    }
    Ok(u)
}

/// Closed form of the 2x2 rotation for `m = 1`, one parameter:
///
/// ```text
/// U = 1/sqrt(2) [ sqrt(p0)(1 -+ s)  sqrt(p1)(1 +- s) ]
///               [ sqrt(p0)(1 +- t)  sqrt(p1)(1 -+ t) ]
/// ```
///
/// with `s = sqrt(p1/p0)`, `t = sqrt(p0/p1)`, the upper sign for
/// `dp0 > 0` and the lower for `dp0 < 0` (`dp0 = 0` counts as positive).
pub fn build_u_m1_closed_form(p0: f64, dp0: f64) -> DMatrix<f64> {
    assert!(p0 > 0.0 && p0 < 1.0);
    let p1 = 1.0 - p0;
    let s = (p1 / p0).sqrt();
    let t = (p0 / p1).sqrt();
    let sgn = if dp0 >= 0.0 { 1.0 } else { -1.0 };
    let c = 0.5_f64.sqrt();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c * p0.sqrt() * (1.0 - sgn * s),
            c * p1.sqrt() * (1.0 + sgn * s),
            c * p0.sqrt() * (1.0 + sgn * t),
            c * p1.sqrt() * (1.0 - sgn * t),
        ],
    )
}

impl RotationBundle {
    /// Assemble the full bundle for one subgroup at the fitted parameter.
    pub fn build(
        model: &ModelSpec,
        x_vec: &[f64],
        theta: f64,
        basis: &ReferenceBasis,
    ) -> Result<Self> {
        let m = x_vec.len();
        assert_eq!(basis.group_size(), m);
        let gp = group_probabilities(model, x_vec, theta)?;
        let dim = gp.probs.len();
        let scores = DMatrix::from_fn(dim, 1, |z, _| gp.dprobs[z] / gp.probs[z]);
        let gamma = information_matrix(&scores, &gp.probs)?;
        let ell = weights(&gp.probs);
        let u = build_u(&gp.probs, &scores, &gamma, basis)?;
        Ok(Self {
            m,
            param_count: model.param_count(),
            probs: gp.probs,
            scores,
            gamma,
            ell,
            u,
            degenerate: gp.degenerate,
        })
    }

    /// JSON dump of the bundle for cross-implementation comparison.
    pub fn dump_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump {
            m: usize,
            param_count: usize,
            probs: Vec<f64>,
            scores: Vec<Vec<f64>>,
            gamma: Vec<Vec<f64>>,
            ell: Vec<f64>,
            u: Vec<Vec<f64>>,
        }
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
                .collect()
        };
        let dump = Dump {
            m: self.m,
            param_count: self.param_count,
            probs: self.probs.iter().copied().collect(),
            scores: rows(&self.scores),
            gamma: rows(&self.gamma),
            ell: self.ell.iter().copied().collect(),
            u: rows(&self.u),
        };
        serde_json::to_string_pretty(&dump).expect("bundle serialization cannot fail")
    }
}

/// Outcome of the sign-consistency diagnostic comparing two scalar models
/// over a covariate grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignConsistency {
    /// `sign(dp0)` agrees at every grid point: the models share score
    /// directions and their rotated processes match in distribution.
    AllSame,
    /// Signs disagree everywhere; flipping one parameter's sign reduces
    /// this to the matching case, so the conclusion is the same.
    AllOpposite,
    /// Signs agree at some points and differ at others; no matching
    /// guarantee holds.
    Mixed,
}

/// Compare `sign(dp0)` of two models across a covariate grid (`dp0 = 0`
/// counts as positive).
pub fn sign_consistency(
    model1: &ModelSpec,
    theta1: f64,
    model2: &ModelSpec,
    theta2: f64,
    x_grid: &[f64],
) -> Result<SignConsistency> {
    assert!(!x_grid.is_empty());
    let mut all_same = true;
    let mut all_opposite = true;
    for &x in x_grid {
        let s1 = model1.evaluate(x, theta1)?.1 >= 0.0;
        let s2 = model2.evaluate(x, theta2)?.1 >= 0.0;
        if s1 == s2 {
            all_opposite = false;
        } else {
            all_same = false;
        }
    }
    Ok(if all_same {
        SignConsistency::AllSame
    } else if all_opposite {
        SignConsistency::AllOpposite
    } else {
        SignConsistency::Mixed
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::covariate_grid;
    use approx::assert_relative_eq;

    fn constant_model(p: f64) -> ModelSpec {
        ModelSpec::new("const", 0.0, (-1.0, 1.0), move |_, _| p, |_, _| 0.0)
    }

    /// Model whose failure probability equals the covariate; handy for
    /// pinning subgroup probabilities exactly.
    fn identity_model() -> ModelSpec {
        ModelSpec::new("ident", 0.0, (-1.0, 1.0), |x, _| x, |_, _| 0.0)
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
    }

    #[test]
    fn symmetric_pair_gives_uniform_probabilities() {
        let gp = group_probabilities(&constant_model(0.5), &[1.0, 1.0], 0.0).unwrap();
        for z in 0..4 {
            assert_relative_eq!(gp.probs[z], 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_trial_probabilities() {
        let gp = group_probabilities(&constant_model(0.3), &[1.0], 0.0).unwrap();
        assert_relative_eq!(gp.probs[0], 0.3, epsilon = 1e-15);
        assert_relative_eq!(gp.probs[1], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn pair_probabilities_in_lexicographic_order() {
        let gp = group_probabilities(&identity_model(), &[0.2, 0.6], 0.0).unwrap();
        let expected = [0.12, 0.08, 0.48, 0.32];
        for (z, e) in expected.iter().enumerate() {
            assert_relative_eq!(gp.probs[z], *e, epsilon = 1e-15);
        }
        assert_relative_eq!(gp.probs.sum(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn derivatives_sum_to_zero_and_match_finite_differences() {
        let model = ModelSpec::logistic();
        let x = [0.7, 1.3];
        let gp = group_probabilities(&model, &x, 1.0).unwrap();
        assert!(gp.dprobs.sum().abs() < 1e-14);
        let h = 1e-6;
        let plus = group_probabilities(&model, &x, 1.0 + h).unwrap();
        let minus = group_probabilities(&model, &x, 1.0 - h).unwrap();
        for z in 0..4 {
            let fd = (plus.probs[z] - minus.probs[z]) / (2.0 * h);
            assert_relative_eq!(gp.dprobs[z], fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn information_matrix_hand_value() {
        // m=1, p = (1/4, 3/4), scores (s/p0, -s/p1): Gamma = s^2 (1/p0 + 1/p1)
        // = 16/3 s^2.
        let s = 0.3;
        let probs = DVector::from_vec(vec![0.25, 0.75]);
        let scores = DMatrix::from_column_slice(2, 1, &[s / 0.25, -s / 0.75]);
        let gamma = information_matrix(&scores, &probs).unwrap();
        assert_relative_eq!(gamma[(0, 0)], 16.0 / 3.0 * s * s, epsilon = 1e-14);
    }

    #[test]
    fn zero_scores_are_singular() {
        let probs = DVector::from_vec(vec![0.25, 0.25, 0.25, 0.25]);
        let scores = DMatrix::zeros(4, 1);
        assert!(matches!(
            information_matrix(&scores, &probs),
            Err(Error::SingularInformation { .. })
        ));
    }

    #[test]
    fn information_matches_finite_difference_oracle() {
        let model = ModelSpec::logistic();
        let x = [0.4, 1.7];
        let theta = 1.0;
        let gp = group_probabilities(&model, &x, theta).unwrap();
        let scores = DMatrix::from_fn(4, 1, |z, _| gp.dprobs[z] / gp.probs[z]);
        let gamma = information_matrix(&scores, &gp.probs).unwrap();

        let h = 1e-6;
        let plus = group_probabilities(&model, &x, theta + h).unwrap();
        let minus = group_probabilities(&model, &x, theta - h).unwrap();
        let oracle: f64 = (0..4)
            .map(|z| {
                let dp = (plus.probs[z] - minus.probs[z]) / (2.0 * h);
                dp * dp / gp.probs[z]
            })
            .sum();
        assert_relative_eq!(gamma[(0, 0)], oracle, epsilon = 1e-6);
    }

    #[test]
    fn reference_basis_m1_is_the_hadamard_rotation() {
        let basis = build_reference_basis(1);
        let c = 0.5_f64.sqrt();
        let expected = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        assert!(max_abs(&(basis.o_q() - expected)) < 1e-14);
    }

    #[test]
    fn reference_basis_is_orthonormal_under_q() {
        for m in 1..=3 {
            let basis = build_reference_basis(m);
            let dim = basis.dim();
            // O_Q^T O_Q = I
            let gram = basis.o_q().transpose() * basis.o_q();
            assert!(max_abs(&(gram - DMatrix::identity(dim, dim))) < 1e-12);
            // B^T D_Q B = I_2, first column all ones
            let d_q = DMatrix::identity(dim, dim) / dim as f64;
            let gram_b = basis.b().transpose() * d_q * basis.b();
            assert!(max_abs(&(gram_b - DMatrix::identity(2, 2))) < 1e-14);
            for z in 0..dim {
                assert_eq!(basis.b()[(z, 0)], 1.0);
            }
        }
    }

    #[test]
    fn b1_entries_sum_to_zero_for_m3() {
        let basis = build_reference_basis(3);
        let sum: f64 = (0..8).map(|z| basis.b()[(z, 1)]).sum();
        assert!(sum.abs() < 1e-14);
    }

    #[test]
    fn swap_rotation_at_symmetric_probabilities() {
        // p = (1/2, 1/2) with dp0 > 0 gives the swap matrix.
        let probs = DVector::from_vec(vec![0.5, 0.5]);
        let dp0 = 0.1;
        let scores = DMatrix::from_column_slice(2, 1, &[dp0 / 0.5, -dp0 / 0.5]);
        let gamma = information_matrix(&scores, &probs).unwrap();
        let basis = build_reference_basis(1);
        let u = build_u(&probs, &scores, &gamma, &basis).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(max_abs(&(u - expected)) < 1e-12);
    }

    #[test]
    fn closed_form_signs() {
        let up = build_u_m1_closed_form(0.5, 1.0);
        let expected_up = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(max_abs(&(up - expected_up)) < 1e-15);
        let down = build_u_m1_closed_form(0.5, -1.0);
        assert!(max_abs(&(down - DMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn closed_form_maps_weighted_basis_to_scores() {
        // U (l b_0) = 1 and U (l b_1) = a_1 = (+-sqrt(p1/p0), -+sqrt(p0/p1)).
        for (p0, dp0) in [(0.3, 0.7), (0.8, -0.2), (0.5, 0.0)] {
            let p1: f64 = 1.0 - p0;
            let u = build_u_m1_closed_form(p0, dp0);
            let ell = DVector::from_vec(vec![(0.5 / p0).sqrt(), (0.5 / p1).sqrt()]);
            let lb0 = ell.clone();
            let lb1 = DVector::from_vec(vec![-ell[0], ell[1]]);
            let sgn = if dp0 >= 0.0 { 1.0 } else { -1.0 };
            let a1 = DVector::from_vec(vec![sgn * (p1 / p0).sqrt(), -sgn * (p0 / p1).sqrt()]);
            assert!((&u * lb0 - DVector::from_element(2, 1.0)).amax() < 1e-14);
            assert!((&u * lb1 - a1).amax() < 1e-14);
        }
    }

    #[test]
    fn closed_form_agrees_with_construction_for_m1() {
        // 2x2 leaves no room for arbitrary completion, so the matrices must
        // agree entrywise, not just in their action on l b_0 and l b_1.
        let basis = build_reference_basis(1);
        for (p0, dp0) in [(0.2, 0.4), (0.65, -1.3), (0.9, 0.05)] {
            let p1 = 1.0 - p0;
            let probs = DVector::from_vec(vec![p0, p1]);
            let scores = DMatrix::from_column_slice(2, 1, &[dp0 / p0, -dp0 / p1]);
            let gamma = information_matrix(&scores, &probs).unwrap();
            let constructed = build_u(&probs, &scores, &gamma, &basis).unwrap();
            let closed = build_u_m1_closed_form(p0, dp0);
            assert!(
                max_abs(&(constructed - closed)) < 1e-12,
                "p0={p0} dp0={dp0}"
            );
        }
    }

    #[test]
    fn bundle_identities_for_all_group_sizes() {
        for m in 1..=3 {
            let basis = build_reference_basis(m);
            let x_vec: Vec<f64> = (0..m).map(|i| 0.3 + 0.55 * i as f64).collect();
            let bundle = RotationBundle::build(&ModelSpec::logistic(), &x_vec, 1.0, &basis).unwrap();
            let dim = 1 << m;

            // U (l * 1) = 1
            let one = DVector::from_element(dim, 1.0);
            let mapped = &bundle.u * bundle.ell.component_mul(&one);
            assert!((mapped - one).amax() < 1e-12, "m={m}");

            // U^T D_P U = D_P
            let d_p = DMatrix::from_diagonal(&bundle.probs);
            let residual = bundle.u.transpose() * &d_p * &bundle.u - &d_p;
            assert!(max_abs(&residual) < 1e-12, "m={m}");

            // 1^T D_P M = 0
            let centering = (bundle.probs.transpose() * &bundle.scores).amax();
            assert!(centering < 1e-12, "m={m}");

            // O_A^T O_A = I
            let a = normalized_score_matrix(&bundle.scores, &bundle.gamma).unwrap();
            let mut o_a = a;
            for (r, p) in bundle.probs.iter().enumerate() {
                for c in 0..o_a.ncols() {
                    o_a[(r, c)] *= p.sqrt();
                }
            }
            let gram = o_a.transpose() * &o_a;
            assert!(max_abs(&(gram - DMatrix::identity(2, 2))) < 1e-12, "m={m}");
        }
    }

    #[test]
    fn too_many_parameters_cannot_be_identified() {
        let probs = DVector::from_vec(vec![0.4, 0.6]);
        let scores = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.5, -0.2]);
        let gamma = DMatrix::identity(2, 2);
        let basis = build_reference_basis(1);
        assert!(matches!(
            build_u(&probs, &scores, &gamma, &basis),
            Err(Error::Identifiability { params: 2, group_size: 1 })
        ));
    }

    #[test]
    fn sign_consistency_matches_the_model_pairs() {
        let grid = covariate_grid(100);
        let logistic = ModelSpec::logistic();
        let exponential = ModelSpec::exponential();
        let normal = ModelSpec::normal();
        let beta = ModelSpec::beta();
        assert_eq!(
            sign_consistency(&logistic, 1.0, &exponential, 0.3, &grid).unwrap(),
            SignConsistency::AllOpposite
        );
        assert_eq!(
            sign_consistency(&normal, 1.0, &beta, 2.5, &grid).unwrap(),
            SignConsistency::Mixed
        );
        assert_eq!(
            sign_consistency(&logistic, 1.0, &logistic, 1.0, &grid).unwrap(),
            SignConsistency::AllSame
        );
    }

    #[test]
    fn degenerate_subgroup_is_flagged() {
        let gp = group_probabilities(&constant_model(1.0), &[1.0], 0.0).unwrap();
        assert!(gp.degenerate);
        let ok = group_probabilities(&constant_model(0.4), &[1.0], 0.0).unwrap();
        assert!(!ok.degenerate);
    }

    #[test]
    fn bundle_dump_round_trips_through_json() {
        let basis = build_reference_basis(2);
        let bundle =
            RotationBundle::build(&ModelSpec::logistic(), &[0.5, 1.5], 1.0, &basis).unwrap();
        let json = bundle.dump_json();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["m"], 2);
        assert_eq!(parsed["probs"].as_array().unwrap().len(), 4);
        assert_eq!(parsed["u"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn total_information_is_positive() {
        let model = ModelSpec::logistic();
        let mut rng = crate::rng::RngFactory::new(9).replication(0, 2, 0, 0);
        let sample = crate::sample::generate_sample(&model, 1.0, 48, 2, &mut rng).unwrap();
        let total = total_information(&model, &sample, 1.0).unwrap();
        assert!(total[(0, 0)] > 0.0);
    }
}
