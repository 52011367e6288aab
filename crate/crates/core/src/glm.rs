//! Weighted logistic regression by composite likelihood: damped Newton
//! fitting, sandwich covariance, per-coefficient Wald inference, and
//! g-computation marginal response rates with delta-method errors.
//!
//! Weights are per observation but constant within a (cohort, arm) block;
//! target rows always carry weight one. Weights are frozen before fitting,
//! so the score carries no weight-parameter term.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expfam::{expit, softplus};
use crate::linalg::{symmetric_eigenvalues, symmetric_sqrt, Cholesky, Matrix};
use crate::special;

const SCORE_TOL: f64 = 1e-10;
// Below this score norm the iterate is deep inside the concave basin: take
// full Newton steps without the objective safeguard, whose finite-precision
// plateau would otherwise stall the final digits.
const PURE_NEWTON_TOL: f64 = 1e-4;
const MAX_NEWTON_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;
const SEPARATION_BOUND: f64 = 30.0;

/// One observation of the weighted logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub y: u8,
    /// Covariate vector including the leading intercept term.
    pub x: Vec<f64>,
    pub weight: f64,
}

/// One cohort-by-arm block of raw data from which design rows are built.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortBlock {
    pub cohort: String,
    pub arm: String,
    pub is_target: bool,
    pub outcomes: Vec<u8>,
    /// Per-subject covariate vectors; empty when the model is covariate-free,
    /// otherwise one vector per outcome.
    pub covariates: Vec<Vec<f64>>,
}

/// Maps arm labels onto treatment-indicator columns: the control arm has all
/// indicators zero, treatment arm k sets column `1 + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreatmentCoding {
    pub control: String,
    /// Sorted non-control arm labels, in indicator-column order.
    pub treatments: Vec<String>,
}

impl TreatmentCoding {
    /// All arms, control first.
    pub fn arms(&self) -> Vec<&String> {
        core::iter::once(&self.control).chain(self.treatments.iter()).collect()
    }

    /// Indicator-column values for an arm; errors on an unknown label.
    pub fn indicator_settings(&self, arm: &str) -> Result<Vec<f64>> {
        if arm == self.control {
            return Ok(vec![0.0; self.treatments.len()]);
        }
        match self.treatments.iter().position(|t| t == arm) {
            Some(k) => {
                let mut v = vec![0.0; self.treatments.len()];
                v[k] = 1.0;
                Ok(v)
            }
            None => Err(Error::data(format!("unknown arm label '{arm}'"))),
        }
    }

    /// Design column of a treatment arm's indicator; errors on the control
    /// arm (it has no column) and on unknown labels.
    pub fn indicator_column(&self, arm: &str) -> Result<usize> {
        if arm == self.control {
            return Err(Error::config(format!(
                "arm '{arm}' is the control arm and has no indicator column"
            )));
        }
        self.treatments
            .iter()
            .position(|t| t == arm)
            .map(|k| 1 + k)
            .ok_or_else(|| Error::data(format!("unknown arm label '{arm}'")))
    }
}

/// Design rows plus the metadata needed for marginalization.
#[derive(Debug, Clone)]
pub struct GlmData {
    pub rows: Vec<DesignRow>,
    pub coding: TreatmentCoding,
    /// Indices of the target cohort's rows within `rows`.
    pub target_rows: Vec<usize>,
    /// Design column names: intercept, treatment indicators, covariates.
    pub column_names: Vec<String>,
}

impl GlmData {
    pub fn target_design(&self) -> Vec<&DesignRow> {
        self.target_rows.iter().map(|&i| &self.rows[i]).collect()
    }
}

/// Builds design rows from cohort blocks: intercept, one indicator per
/// non-control arm (sorted), then covariates. Reference blocks take their
/// weight from `reference_weights` keyed by (cohort, arm).
pub fn build_design(
    blocks: &[CohortBlock],
    covariate_names: &[String],
    control_arm: &str,
    reference_weights: &BTreeMap<(String, String), f64>,
) -> Result<GlmData> {
    if blocks.is_empty() {
        return Err(Error::data("no cohort blocks"));
    }
    let covariate_dim = covariate_names.len();
    let mut arms: Vec<String> = Vec::new();
    for b in blocks {
        if !arms.contains(&b.arm) {
            arms.push(b.arm.clone());
        }
    }
    arms.sort_unstable();
    if !arms.iter().any(|a| a == control_arm) {
        return Err(Error::data(format!(
            "control arm '{control_arm}' not present in the data"
        )));
    }
    let treatments: Vec<String> = arms.iter().filter(|a| *a != control_arm).cloned().collect();
    let coding = TreatmentCoding {
        control: String::from(control_arm),
        treatments,
    };

    let mut column_names = vec![String::from("intercept")];
    for t in &coding.treatments {
        column_names.push(format!("arm_{t}"));
    }
    column_names.extend_from_slice(covariate_names);

    let mut rows = Vec::new();
    let mut target_rows = Vec::new();
    let mut saw_target = false;
    for b in blocks {
        if covariate_dim > 0 && b.covariates.len() != b.outcomes.len() {
            return Err(Error::data(format!(
                "cohort '{}' arm '{}': {} outcomes but {} covariate rows",
                b.cohort,
                b.arm,
                b.outcomes.len(),
                b.covariates.len()
            )));
        }
        let weight = if b.is_target {
            saw_target = true;
            1.0
        } else {
            *reference_weights
                .get(&(b.cohort.clone(), b.arm.clone()))
                .ok_or_else(|| {
                    Error::data(format!(
                        "no weight provided for reference cohort '{}' arm '{}'",
                        b.cohort, b.arm
                    ))
                })?
        };
        if !(weight.is_finite() && (0.0..=1.0).contains(&weight)) {
            return Err(Error::data(format!(
                "weight for cohort '{}' arm '{}' must lie in [0, 1], got {weight}",
                b.cohort, b.arm
            )));
        }
        let indicators = coding.indicator_settings(&b.arm)?;
        for (i, &y) in b.outcomes.iter().enumerate() {
            if y > 1 {
                return Err(Error::data(format!(
                    "cohort '{}' arm '{}': outcome {} is not binary",
                    b.cohort, b.arm, i
                )));
            }
            let mut x = Vec::with_capacity(1 + indicators.len() + covariate_dim);
            x.push(1.0);
            x.extend_from_slice(&indicators);
            if covariate_dim > 0 {
                let cov = &b.covariates[i];
                if cov.len() != covariate_dim {
                    return Err(Error::data(format!(
                        "cohort '{}' arm '{}': covariate row {} has {} entries, expected {covariate_dim}",
                        b.cohort, b.arm, i, cov.len()
                    )));
                }
                x.extend_from_slice(cov);
            }
            if b.is_target {
                target_rows.push(rows.len());
            }
            rows.push(DesignRow {
                y,
                x,
                weight,
            });
        }
    }
    if !saw_target {
        return Err(Error::data("no target cohort block"));
    }
    Ok(GlmData {
        rows,
        coding,
        target_rows,
        column_names,
    })
}

/// Converged weighted logistic fit with sandwich covariance.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// ∞-norm of the weighted score at the returned coefficients.
    pub max_score_norm: f64,
    /// Weighted curvature H = Σ w_i x_i S(x_i'η) x_i'.
    pub h: Matrix,
    /// Score variability J = Σ w_i² x_i S(x_i'η) x_i'.
    pub j: Matrix,
    /// H^-1 J H^-1; absent when the fit did not converge.
    pub sandwich: Option<Matrix>,
}

impl GlmFit {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn require_sandwich(&self) -> Result<&Matrix> {
        if !self.converged {
            return Err(Error::numerical(format!(
                "fit did not converge ({} iterations, score norm {:e}); inference unavailable",
                self.iterations, self.max_score_norm
            )));
        }
        self.sandwich
            .as_ref()
            .ok_or_else(|| Error::numerical("sandwich covariance unavailable"))
    }
}

fn check_rows(rows: &[DesignRow]) -> Result<usize> {
    let first = rows
        .first()
        .ok_or_else(|| Error::data("no design rows"))?;
    let p = first.x.len();
    if p == 0 {
        return Err(Error::data("design rows must have at least one column"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.x.len() != p {
            return Err(Error::data(format!(
                "design row {i} has {} columns, expected {p}",
                r.x.len()
            )));
        }
        if r.y > 1 {
            return Err(Error::data(format!("design row {i}: outcome is not binary")));
        }
        if !(r.weight.is_finite() && (0.0..=1.0).contains(&r.weight)) {
            return Err(Error::data(format!(
                "design row {i}: weight must lie in [0, 1], got {}",
                r.weight
            )));
        }
    }
    Ok(p)
}

/// Weighted log-likelihood Σ w_i [y_i x_i'η - ln(1 + exp(x_i'η))], Kahan
/// compensated so the step-halving comparison resolves gains near the
/// optimum instead of summation noise.
fn objective(rows: &[DesignRow], beta: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut comp = 0.0;
    for r in rows {
        if r.weight == 0.0 {
            continue;
        }
        let eta: f64 = r.x.iter().zip(beta).map(|(x, b)| x * b).sum();
        let term = r.weight * (r.y as f64 * eta - softplus(eta)) - comp;
        let t = acc + term;
        comp = (t - acc) - term;
        acc = t;
    }
    acc
}

/// Weighted score and curvature at `beta`. The score sums residual terms of
/// both signs, so it is accumulated with Kahan compensation to keep its
/// floor well below the convergence tolerance.
fn score_and_curvature(rows: &[DesignRow], beta: &[f64]) -> (Vec<f64>, Matrix) {
    let p = beta.len();
    let mut score = vec![0.0; p];
    let mut comp = vec![0.0; p];
    let mut h = Matrix::zeros(p, p);
    for r in rows {
        if r.weight == 0.0 {
            continue;
        }
        let eta: f64 = r.x.iter().zip(beta).map(|(x, b)| x * b).sum();
        let mu = expit(eta);
        let resid = r.weight * (r.y as f64 - mu);
        let curve = r.weight * mu * (1.0 - mu);
        for a in 0..p {
            let term = resid * r.x[a] - comp[a];
            let t = score[a] + term;
            comp[a] = (t - score[a]) - term;
            score[a] = t;
            for b in a..p {
                h[(a, b)] += curve * r.x[a] * r.x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    (score, h)
}

/// H and J at `beta`: H carries weights w_i, J carries w_i².
pub fn sandwich_matrices(rows: &[DesignRow], beta: &[f64]) -> Result<(Matrix, Matrix)> {
    let p = check_rows(rows)?;
    if beta.len() != p {
        return Err(Error::data("coefficient length does not match design"));
    }
    let mut h = Matrix::zeros(p, p);
    let mut j = Matrix::zeros(p, p);
    for r in rows {
        if r.weight == 0.0 {
            continue;
        }
        let eta: f64 = r.x.iter().zip(beta).map(|(x, b)| x * b).sum();
        let s = expit(eta);
        let s = s * (1.0 - s);
        let wh = r.weight * s;
        let wj = r.weight * r.weight * s;
        for a in 0..p {
            for b in a..p {
                let xab = r.x[a] * r.x[b];
                h[(a, b)] += wh * xab;
                j[(a, b)] += wj * xab;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
            j[(a, b)] = j[(b, a)];
        }
    }
    Ok((h, j))
}

/// Sandwich covariance H^-1 J H^-1 at `beta`.
pub fn sandwich_covariance(rows: &[DesignRow], beta: &[f64]) -> Result<Matrix> {
    let (h, j) = sandwich_matrices(rows, beta)?;
    let h_inv = Cholesky::new(&h)?.inverse();
    Ok(h_inv.mul(&j).mul(&h_inv))
}

/// Maximizes the weighted logistic composite likelihood by damped Newton
/// iterations: converged when the score ∞-norm drops below 1e-10, with up to
/// 30 step-halvings per iteration and at most 100 iterations. Coefficients
/// beyond magnitude 30 abort with a separation diagnostic.
pub fn fit_weighted_logistic(rows: &[DesignRow]) -> Result<GlmFit> {
    let p = check_rows(rows)?;
    if !rows.iter().any(|r| r.weight > 0.0) {
        return Err(Error::data("all design rows have zero weight"));
    }

    let mut beta = vec![0.0; p];
    let mut obj = objective(rows, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let mut score_norm;

    loop {
        let (score, h) = score_and_curvature(rows, &beta);
        score_norm = score.iter().fold(0.0f64, |m, s| m.max(libm::fabs(*s)));
        if score_norm < SCORE_TOL {
            converged = true;
            break;
        }
        if iterations >= MAX_NEWTON_ITER {
            break;
        }
        iterations += 1;

        let delta = Cholesky::new(&h)
            .map_err(|_| {
                Error::numerical(
                    "singular weighted curvature: design is rank-deficient on rows with positive weight",
                )
            })?
            .solve(&score);

        if score_norm < PURE_NEWTON_TOL {
            for (b, d) in beta.iter_mut().zip(&delta) {
                *b += d;
            }
        } else {
            // Step halving guards against overshoot far from the optimum.
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let cand: Vec<f64> = beta
                    .iter()
                    .zip(&delta)
                    .map(|(b, d)| b + step * d)
                    .collect();
                let cand_obj = objective(rows, &cand);
                if cand_obj >= obj {
                    beta = cand;
                    obj = cand_obj;
                    accepted = true;
                    break;
                }
                step /= 2.0;
            }
            if !accepted {
                break; // stalled: report non-convergence below
            }
        }
        if beta.iter().any(|b| libm::fabs(*b) > SEPARATION_BOUND) {
            return Err(Error::numerical(format!(
                "coefficient magnitude exceeded {SEPARATION_BOUND} during iteration; data are likely separated"
            )));
        }
    }

    let (h, j) = sandwich_matrices(rows, &beta)?;
    let sandwich = if converged {
        let h_inv = Cholesky::new(&h)?.inverse();
        Some(h_inv.mul(&j).mul(&h_inv))
    } else {
        None
    };
    Ok(GlmFit {
        coefficients: beta,
        iterations,
        converged,
        max_score_norm: score_norm,
        h,
        j,
        sandwich,
    })
}

/// Wald estimate, interval, and two-sided p-value for one coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefEstimate {
    pub estimate: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub p_value: f64,
}

/// Per-coefficient Wald inference from the sandwich covariance.
pub fn coef_inference(fit: &GlmFit, level: f64) -> Result<Vec<CoefEstimate>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let cov = fit.require_sandwich()?;
    let z = special::normal_quantile((1.0 + level) / 2.0);
    Ok(fit
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, &est)| {
            let se = libm::sqrt(cov[(k, k)]);
            let p_value = if se == 0.0 {
                if est == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                2.0 * special::normal_sf(libm::fabs(est / se))
            };
            CoefEstimate {
                estimate: est,
                se,
                ci: (est - z * se, est + z * se),
                p_value,
            }
        })
        .collect())
}

/// Standardized response rate of one arm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArmRate {
    pub arm: String,
    pub rate: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

/// Difference of standardized rates, arm minus control.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateContrast {
    pub arm: String,
    pub control: String,
    pub estimate: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub p_value: f64,
}

/// G-computation output: per-arm standardized rates and contrasts versus the
/// control arm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarginalResult {
    pub rates: Vec<ArmRate>,
    pub contrasts: Vec<RateContrast>,
}

/// Standardizes model predictions over the target covariate rows: each arm's
/// rate averages expit(x_i(a)'η̂) with the treatment indicators forced to arm
/// `a`; variances come from the delta method against the sandwich covariance.
pub fn gcomp_marginals(
    fit: &GlmFit,
    target_rows: &[&DesignRow],
    coding: &TreatmentCoding,
    level: f64,
) -> Result<MarginalResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if target_rows.is_empty() {
        return Err(Error::data("no target rows to standardize over"));
    }
    let cov = fit.require_sandwich()?;
    let p = fit.dim();
    let n_ind = coding.treatments.len();
    if p < 1 + n_ind {
        return Err(Error::data(
            "design has fewer columns than the treatment coding requires",
        ));
    }
    for (i, r) in target_rows.iter().enumerate() {
        if r.x.len() != p {
            return Err(Error::data(format!(
                "target row {i} has {} columns, expected {p}",
                r.x.len()
            )));
        }
    }
    let z = special::normal_quantile((1.0 + level) / 2.0);
    let m = target_rows.len() as f64;

    let mut rates = Vec::new();
    let mut grads: Vec<Vec<f64>> = Vec::new();
    for arm in coding.arms() {
        let settings = coding.indicator_settings(arm)?;
        let mut rate = 0.0;
        let mut grad = vec![0.0; p];
        let mut xa = vec![0.0; p];
        for row in target_rows {
            xa.copy_from_slice(&row.x);
            xa[1..=n_ind].copy_from_slice(&settings);
            let eta: f64 = xa.iter().zip(&fit.coefficients).map(|(x, b)| x * b).sum();
            let mu = expit(eta);
            rate += mu;
            let s = mu * (1.0 - mu);
            for k in 0..p {
                grad[k] += s * xa[k];
            }
        }
        rate /= m;
        for g in grad.iter_mut() {
            *g /= m;
        }
        let se = libm::sqrt(cov.quadratic_form(&grad));
        rates.push(ArmRate {
            arm: arm.clone(),
            rate,
            se,
            ci: (rate - z * se, rate + z * se),
        });
        grads.push(grad);
    }

    let mut contrasts = Vec::new();
    for (k, arm) in coding.treatments.iter().enumerate() {
        let idx = 1 + k; // control occupies slot 0 in `rates`
        let estimate = rates[idx].rate - rates[0].rate;
        let diff_grad: Vec<f64> = grads[idx]
            .iter()
            .zip(&grads[0])
            .map(|(a, b)| a - b)
            .collect();
        let se = libm::sqrt(cov.quadratic_form(&diff_grad));
        let p_value = if se == 0.0 {
            if estimate == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            2.0 * special::normal_sf(libm::fabs(estimate / se))
        };
        contrasts.push(RateContrast {
            arm: arm.clone(),
            control: coding.control.clone(),
            estimate,
            se,
            ci: (estimate - z * se, estimate + z * se),
            p_value,
        });
    }
    Ok(MarginalResult { rates, contrasts })
}

/// Eigenvalues λ_j governing the composite likelihood ratio statistic for the
/// coefficient subvector `psi_idx`: the spectrum of
/// (H^{ψψ})^{1/2} (G^{ψψ})^{-1} (H^{ψψ})^{1/2}, where H^{ψψ} and G^{ψψ} are
/// the ψ-blocks of H^{-1} and G^{-1}.
pub fn clrt_eigenvalues(h: &Matrix, j: &Matrix, psi_idx: &[usize]) -> Result<Vec<f64>> {
    if psi_idx.is_empty() {
        return Err(Error::config("parameter index set must not be empty"));
    }
    let h_inv = Cholesky::new(h)?.inverse();
    // G^-1 = (H J^-1 H)^-1 = H^-1 J H^-1.
    let g_inv = h_inv.mul(j).mul(&h_inv);
    let h_psi = h_inv.submatrix(psi_idx);
    let g_psi = g_inv.submatrix(psi_idx);
    let g_psi_inv = Cholesky::new(&g_psi)?.inverse();
    let h_sqrt = symmetric_sqrt(&h_psi)?;
    symmetric_eigenvalues(&h_sqrt.mul(&g_psi_inv).mul(&h_sqrt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn intercept_rows(blocks: &[(usize, usize, f64)]) -> Vec<DesignRow> {
        let mut rows = Vec::new();
        for &(s, n, w) in blocks {
            for i in 0..n {
                rows.push(DesignRow {
                    y: (i < s) as u8,
                    x: vec![1.0],
                    weight: w,
                });
            }
        }
        rows
    }

    #[test]
    fn intercept_only_closed_form() {
        let rows = intercept_rows(&[(60, 300, 1.0)]);
        let fit = fit_weighted_logistic(&rows).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - (-1.3862943611198906)).abs() < 1e-9);
        assert!(fit.max_score_norm < 1e-10);
    }

    #[test]
    fn intercept_only_sandwich_example() {
        // Target 60/300 plus reference 160/800 at weight 0.8.
        let mut rows = intercept_rows(&[(60, 300, 1.0)]);
        rows.extend(intercept_rows(&[(160, 800, 0.8)]));
        let fit = fit_weighted_logistic(&rows).unwrap();
        assert!((fit.coefficients[0] - (-1.3862943611198906)).abs() < 1e-9);
        let var = fit.sandwich.as_ref().unwrap()[(0, 0)];
        let expected = 129.92 / (150.4 * 150.4);
        assert!((var - expected).abs() < 1e-9);
        assert!((var - 0.005743).abs() < 1e-6);
        // Chains with the scalar path: Var(b0) = Var(p̂)/(p(1-p))².
        let scalar_var = 1.4703485740153916e-4;
        assert!((var - scalar_var / (0.16 * 0.16)).abs() < 1e-9);
    }

    #[test]
    fn sandwich_collapses_at_unit_weights() {
        let mut rows = intercept_rows(&[(60, 300, 1.0)]);
        rows.extend(intercept_rows(&[(160, 800, 1.0)]));
        let fit = fit_weighted_logistic(&rows).unwrap();
        for a in 0..fit.dim() {
            for b in 0..fit.dim() {
                assert!((fit.h[(a, b)] - fit.j[(a, b)]).abs() < 1e-12);
            }
        }
        let h_inv = Cholesky::new(&fit.h).unwrap().inverse();
        let cov = fit.sandwich.as_ref().unwrap();
        assert!((cov[(0, 0)] - h_inv[(0, 0)]).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_references_match_target_only() {
        let target_only = fit_weighted_logistic(&intercept_rows(&[(60, 300, 1.0)])).unwrap();
        let mut rows = intercept_rows(&[(60, 300, 1.0)]);
        rows.extend(intercept_rows(&[(160, 800, 0.0)]));
        let with_zeros = fit_weighted_logistic(&rows).unwrap();
        assert!((target_only.coefficients[0] - with_zeros.coefficients[0]).abs() < 1e-12);
        let a = target_only.sandwich.as_ref().unwrap()[(0, 0)];
        let b = with_zeros.sandwich.as_ref().unwrap()[(0, 0)];
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn singular_design_is_rejected() {
        // Duplicated column.
        let rows: Vec<DesignRow> = (0..40)
            .map(|i| DesignRow {
                y: (i % 3 == 0) as u8,
                x: vec![1.0, 2.0],
                weight: 1.0,
            })
            .collect();
        let err = fit_weighted_logistic(&rows).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn separation_is_diagnosed() {
        // A covariate that perfectly separates the outcome; the small-|x|
        // rows keep the score alive while the coefficient diverges.
        let mut rows = Vec::new();
        for i in 1..=200 {
            let x = 0.2 + 0.8 * (i % 5) as f64 / 5.0;
            rows.push(DesignRow {
                y: 1,
                x: vec![1.0, x],
                weight: 1.0,
            });
            rows.push(DesignRow {
                y: 0,
                x: vec![1.0, -x],
                weight: 1.0,
            });
        }
        let err = fit_weighted_logistic(&rows).unwrap_err();
        match err {
            Error::Numerical(msg) => assert!(msg.contains("separated")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    fn table_blocks() -> Vec<CohortBlock> {
        let margins = [
            ("study2", "placebo", 29usize, 2usize, true),
            ("study2", "low", 55, 25, true),
            ("study2", "high", 66, 35, true),
            ("study1", "placebo", 61, 7, false),
            ("study1", "low", 125, 46, false),
            ("study1", "high", 114, 72, false),
        ];
        margins
            .iter()
            .map(|&(cohort, arm, n, s, is_target)| CohortBlock {
                cohort: cohort.to_string(),
                arm: arm.to_string(),
                is_target,
                outcomes: (0..n).map(|i| (i < s) as u8).collect(),
                covariates: Vec::new(),
            })
            .collect()
    }

    fn weights_map(w: f64) -> BTreeMap<(String, String), f64> {
        ["placebo", "low", "high"]
            .iter()
            .map(|arm| (("study1".to_string(), arm.to_string()), w))
            .collect()
    }

    #[test]
    fn gcomp_covariate_free_returns_crude_rates() {
        let data = build_design(&table_blocks(), &[], "placebo", &weights_map(0.0)).unwrap();
        let fit = fit_weighted_logistic(&data.rows).unwrap();
        let marg = gcomp_marginals(&fit, &data.target_design(), &data.coding, 0.95).unwrap();
        // No borrowing and no covariates: rates are the crude target rates.
        let by_arm: BTreeMap<_, _> = marg.rates.iter().map(|r| (r.arm.as_str(), r.rate)).collect();
        assert!((by_arm["placebo"] - 2.0 / 29.0).abs() < 1e-9);
        assert!((by_arm["low"] - 25.0 / 55.0).abs() < 1e-9);
        assert!((by_arm["high"] - 35.0 / 66.0).abs() < 1e-9);
        // Matches the published crude-rate rounding.
        assert!((by_arm["placebo"] - 0.069).abs() < 5e-4);
        assert!((by_arm["low"] - 0.455).abs() < 5e-4);
        assert!((by_arm["high"] - 0.530).abs() < 5e-4);
        for c in &marg.contrasts {
            assert_eq!(c.control, "placebo");
        }
    }

    #[test]
    fn gcomp_intercept_only_has_equal_rates() {
        let rows = intercept_rows(&[(60, 300, 1.0)]);
        let fit = fit_weighted_logistic(&rows).unwrap();
        let coding = TreatmentCoding {
            control: "placebo".to_string(),
            treatments: Vec::new(),
        };
        let refs: Vec<&DesignRow> = rows.iter().collect();
        let marg = gcomp_marginals(&fit, &refs, &coding, 0.95).unwrap();
        assert_eq!(marg.rates.len(), 1);
        assert!((marg.rates[0].rate - 0.2).abs() < 1e-10);
        assert!(marg.contrasts.is_empty());
    }

    #[test]
    fn delta_method_matches_binomial_chain() {
        // Intercept-only: Var(rate) = (p(1-p))² Var(b0).
        let mut rows = intercept_rows(&[(60, 300, 1.0)]);
        rows.extend(intercept_rows(&[(160, 800, 0.8)]));
        let fit = fit_weighted_logistic(&rows).unwrap();
        let coding = TreatmentCoding {
            control: "all".to_string(),
            treatments: Vec::new(),
        };
        let target: Vec<&DesignRow> = rows[..300].iter().collect();
        let marg = gcomp_marginals(&fit, &target, &coding, 0.95).unwrap();
        let var_b0 = fit.sandwich.as_ref().unwrap()[(0, 0)];
        let p = marg.rates[0].rate;
        let expected = (p * (1.0 - p)) * (p * (1.0 - p)) * var_b0;
        assert!((marg.rates[0].se * marg.rates[0].se - expected).abs() < 1e-10);
    }

    #[test]
    fn coef_inference_interval_example() {
        let mut rows = intercept_rows(&[(60, 300, 1.0)]);
        rows.extend(intercept_rows(&[(160, 800, 0.8)]));
        let fit = fit_weighted_logistic(&rows).unwrap();
        let inf = coef_inference(&fit, 0.95).unwrap();
        let se = libm::sqrt(129.92 / (150.4 * 150.4));
        assert!((inf[0].ci.0 - (-1.3862943611198906 - 1.959963984540054 * se)).abs() < 1e-7);
        assert!((inf[0].ci.1 - (-1.3862943611198906 + 1.959963984540054 * se)).abs() < 1e-7);
        assert!(inf[0].p_value < 1e-10);
    }

    #[test]
    fn clrt_eigenvalues_collapse_at_unit_weights() {
        let data = build_design(&table_blocks(), &[], "placebo", &weights_map(1.0)).unwrap();
        let fit = fit_weighted_logistic(&data.rows).unwrap();
        let lambdas = clrt_eigenvalues(&fit.h, &fit.j, &[1, 2]).unwrap();
        assert_eq!(lambdas.len(), 2);
        for l in lambdas {
            assert!((l - 1.0).abs() < 1e-9, "lambda = {l}");
        }
    }

    #[test]
    fn clrt_eigenvalues_scalar_matches_h_over_j() {
        let mut rows = intercept_rows(&[(60, 300, 1.0)]);
        rows.extend(intercept_rows(&[(160, 800, 0.8)]));
        let fit = fit_weighted_logistic(&rows).unwrap();
        let lambdas = clrt_eigenvalues(&fit.h, &fit.j, &[0]).unwrap();
        let expected = fit.h[(0, 0)] / fit.j[(0, 0)];
        assert!((lambdas[0] - expected).abs() < 1e-10);
    }

    #[test]
    fn build_design_validates() {
        let blocks = table_blocks();
        assert!(build_design(&blocks, &[], "nope", &weights_map(0.5)).is_err());
        let empty: BTreeMap<(String, String), f64> = BTreeMap::new();
        assert!(build_design(&blocks, &[], "placebo", &empty).is_err());
        let data = build_design(&blocks, &[], "placebo", &weights_map(0.5)).unwrap();
        assert_eq!(data.column_names, vec!["intercept", "arm_high", "arm_low"]);
        assert_eq!(data.target_rows.len(), 150);
        assert!(data
            .target_rows
            .iter()
            .all(|&i| data.rows[i].weight == 1.0));
    }
}
