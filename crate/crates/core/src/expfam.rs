//! Weighted (composite) likelihood estimation and sandwich inference for
//! one-dimensional exponential families.
//!
//! Every reference cohort's log-likelihood enters the objective multiplied by
//! its borrowing weight; the target cohort always carries weight one. The
//! weighted maximizer is available in closed form through the mean map, and
//! the sandwich matrices H (weighted curvature) and J (score variability)
//! give the Godambe information G = H J^-1 H.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special;
use crate::weights::OutcomeSample;

/// A one-dimensional exponential family f(y|θ) = h(y) exp(θ T(y) - A(θ)).
pub trait ExponentialFamily {
    /// Sufficient statistic T(y).
    fn sufficient(&self, y: f64) -> f64;
    /// Log-partition A(θ).
    fn log_partition(&self, theta: f64) -> f64;
    /// Mean map μ(θ) = A'(θ).
    fn mean(&self, theta: f64) -> f64;
    /// Inverse of the mean map.
    fn mean_inverse(&self, mu: f64) -> f64;
    /// Variance function Var(T) expressed through the mean.
    fn variance(&self, mu: f64) -> f64;
    /// Open interval of interior mean values; estimates outside are flagged
    /// as boundary cases.
    fn mean_domain(&self) -> (f64, f64);
}

/// Bernoulli family: T(y) = y, A(θ) = ln(1 + e^θ), μ(θ) = expit(θ).
#[derive(Debug, Clone, Copy, Default)]
pub struct Bernoulli;

/// Numerically stable ln(1 + e^x).
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Numerically stable logistic function.
pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl ExponentialFamily for Bernoulli {
    fn sufficient(&self, y: f64) -> f64 {
        y
    }

    fn log_partition(&self, theta: f64) -> f64 {
        softplus(theta)
    }

    fn mean(&self, theta: f64) -> f64 {
        expit(theta)
    }

    fn mean_inverse(&self, mu: f64) -> f64 {
        libm::log(mu / (1.0 - mu))
    }

    fn variance(&self, mu: f64) -> f64 {
        mu * (1.0 - mu)
    }

    fn mean_domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// One cohort with its borrowing weight.
#[derive(Debug, Clone)]
pub struct WeightedCohort {
    pub sample: OutcomeSample,
    pub weight: f64,
    pub is_target: bool,
}

/// A validated collection of cohorts: exactly one target with weight one,
/// all weights in [0, 1].
#[derive(Debug, Clone)]
pub struct WeightedCohorts {
    cohorts: Vec<WeightedCohort>,
}

impl WeightedCohorts {
    pub fn new(cohorts: Vec<WeightedCohort>) -> Result<Self> {
        let n_targets = cohorts.iter().filter(|c| c.is_target).count();
        if n_targets != 1 {
            return Err(Error::data(format!(
                "exactly one target cohort required, found {n_targets}"
            )));
        }
        for c in &cohorts {
            if !(c.weight.is_finite() && (0.0..=1.0).contains(&c.weight)) {
                return Err(Error::data(format!(
                    "cohort weight must lie in [0, 1], got {}",
                    c.weight
                )));
            }
            if c.is_target && c.weight != 1.0 {
                return Err(Error::data("target cohort must carry weight 1"));
            }
        }
        Ok(WeightedCohorts { cohorts })
    }

    /// Target cohort plus (reference sample, weight) pairs.
    pub fn target_with_references(
        target: OutcomeSample,
        references: Vec<(OutcomeSample, f64)>,
    ) -> Result<Self> {
        let mut cohorts = vec![WeightedCohort {
            sample: target,
            weight: 1.0,
            is_target: true,
        }];
        cohorts.extend(references.into_iter().map(|(sample, weight)| WeightedCohort {
            sample,
            weight,
            is_target: false,
        }));
        WeightedCohorts::new(cohorts)
    }

    pub fn iter(&self) -> impl Iterator<Item = &WeightedCohort> {
        self.cohorts.iter()
    }

    pub fn target(&self) -> &WeightedCohort {
        self.cohorts
            .iter()
            .find(|c| c.is_target)
            .expect("validated at construction")
    }

    /// Σ w_k n_k.
    pub fn weighted_n(&self) -> f64 {
        self.cohorts
            .iter()
            .map(|c| c.weight * c.sample.n() as f64)
            .sum()
    }

    /// Σ w_k² n_k.
    fn weighted_n_squared(&self) -> f64 {
        self.cohorts
            .iter()
            .map(|c| c.weight * c.weight * c.sample.n() as f64)
            .sum()
    }

    /// Σ w_k Σ_i T(Y_ik).
    fn weighted_sufficient<F: ExponentialFamily>(&self, family: &F) -> f64 {
        self.cohorts
            .iter()
            .map(|c| {
                let s: f64 = c
                    .sample
                    .values()
                    .iter()
                    .map(|&y| family.sufficient(y as f64))
                    .sum();
                c.weight * s
            })
            .sum()
    }
}

/// Sandwich information at the composite maximizer, on the mean scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Information {
    /// Weighted curvature H = (Σ w_k n_k) / V(μ̂).
    pub h: f64,
    /// Score variability J = (Σ w_k² n_k) / V(μ̂).
    pub j: f64,
    /// Godambe information G = H²/J.
    pub g: f64,
    /// Var(μ̂) = J/H² = G^-1.
    pub variance: f64,
}

/// Composite maximum-likelihood fit of a one-dimensional family.
#[derive(Debug, Clone)]
pub struct CompositeFit {
    /// Natural-parameter estimate (±∞ at a boundary).
    pub theta_hat: f64,
    /// Mean-scale estimate, e.g. the response probability for Bernoulli.
    pub mu_hat: f64,
    /// Σ w_k n_k, the weighted-information denominator.
    pub weighted_n: f64,
    /// Whether μ̂ sits on the boundary of the mean domain; no variance or
    /// test is available there.
    pub boundary: bool,
    pub information: Option<Information>,
}

impl CompositeFit {
    pub fn se(&self) -> Option<f64> {
        self.information.map(|i| libm::sqrt(i.variance))
    }
}

/// Godambe information of a weighted cohort collection at mean value `mu`.
pub fn godambe_information<F: ExponentialFamily>(
    cohorts: &WeightedCohorts,
    mu: f64,
    family: &F,
) -> Result<Information> {
    let (lo, hi) = family.mean_domain();
    if !(mu > lo && mu < hi) {
        return Err(Error::numerical(format!(
            "information undefined at boundary mean estimate {mu}"
        )));
    }
    let v = family.variance(mu);
    let h = cohorts.weighted_n() / v;
    let j = cohorts.weighted_n_squared() / v;
    Ok(Information {
        h,
        j,
        g: h * h / j,
        variance: j / (h * h),
    })
}

/// Closed-form composite MLE: μ̂ is the weighted average of per-observation
/// sufficient statistics, θ̂ its inverse image under the mean map.
pub fn composite_mle<F: ExponentialFamily>(
    cohorts: &WeightedCohorts,
    family: &F,
) -> Result<CompositeFit> {
    let weighted_n = cohorts.weighted_n();
    if weighted_n <= 0.0 {
        return Err(Error::data("total weighted sample size must be positive"));
    }
    let mu_hat = cohorts.weighted_sufficient(family) / weighted_n;
    let (lo, hi) = family.mean_domain();
    let boundary = !(mu_hat > lo && mu_hat < hi);
    let information = if boundary {
        None
    } else {
        Some(godambe_information(cohorts, mu_hat, family)?)
    };
    Ok(CompositeFit {
        theta_hat: family.mean_inverse(mu_hat),
        mu_hat,
        weighted_n,
        boundary,
        information,
    })
}

/// Wald confidence interval on the mean scale.
pub fn wald_ci(fit: &CompositeFit, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let info = fit
        .information
        .ok_or_else(|| Error::numerical("variance undefined for a boundary estimate"))?;
    let z = special::normal_quantile((1.0 + level) / 2.0);
    let half = z * libm::sqrt(info.variance);
    Ok((fit.mu_hat - half, fit.mu_hat + half))
}

/// Which reference distribution produced a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum TestMethod {
    ClrtSatterthwaite,
    Wald,
}

/// Outcome of a composite likelihood ratio or Wald test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    /// Raw statistic: W for the ratio test, W_d for Wald.
    pub statistic: f64,
    /// Satterthwaite-scaled statistic (equals `statistic` for Wald).
    pub scaled_statistic: f64,
    /// Eigenvalues λ_j entering the Satterthwaite adjustment (empty for Wald).
    pub lambdas: Vec<f64>,
    /// Degrees of freedom of the reference chi-square.
    pub nu: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

/// Moment-matched chi-square scaling of a statistic distributed as
/// Σ λ_j Z_j²: returns (ν, scaled statistic) with ν = (Σλ)²/Σλ² and the
/// statistic multiplied by ν/(q λ̄).
pub fn satterthwaite(statistic: f64, lambdas: &[f64]) -> Result<(f64, f64)> {
    if lambdas.is_empty() {
        return Err(Error::numerical("Satterthwaite adjustment needs eigenvalues"));
    }
    let sum: f64 = lambdas.iter().sum();
    let sum_sq: f64 = lambdas.iter().map(|l| l * l).sum();
    if !(sum > 0.0 && sum_sq > 0.0) {
        return Err(Error::numerical(
            "Satterthwaite adjustment needs positive eigenvalues",
        ));
    }
    let nu = sum * sum / sum_sq;
    // ν W / (q λ̄) simplifies to W Σλ / Σλ².
    Ok((nu, statistic * sum / sum_sq))
}

/// Composite likelihood ratio test of H0: μ = psi0 (mean scale) with the
/// Satterthwaite adjustment. For the scalar parameter the single eigenvalue
/// is H/J, so the scaled statistic is W J/H against chi-square(1).
pub fn clrt<F: ExponentialFamily>(
    cohorts: &WeightedCohorts,
    family: &F,
    psi0: f64,
) -> Result<TestResult> {
    let (lo, hi) = family.mean_domain();
    if !(psi0 > lo && psi0 < hi) {
        return Err(Error::config(format!(
            "null value must lie inside the mean domain ({lo}, {hi}), got {psi0}"
        )));
    }
    let fit = composite_mle(cohorts, family)?;
    let info = fit
        .information
        .ok_or_else(|| Error::numerical("likelihood ratio test undefined at a boundary estimate"))?;

    let theta0 = family.mean_inverse(psi0);
    let objective = |theta: f64| -> f64 {
        cohorts
            .iter()
            .map(|c| {
                let s: f64 = c
                    .sample
                    .values()
                    .iter()
                    .map(|&y| family.sufficient(y as f64))
                    .sum();
                c.weight * (theta * s - c.sample.n() as f64 * family.log_partition(theta))
            })
            .sum()
    };
    let w = 2.0 * (objective(fit.theta_hat) - objective(theta0));
    if w < -1e-9 {
        return Err(Error::numerical(format!(
            "likelihood ratio statistic is negative ({w:e}); estimate is not the maximizer"
        )));
    }
    let w = w.max(0.0);

    let lambda = info.h / info.j;
    let (nu, scaled) = satterthwaite(w, &[lambda])?;
    Ok(TestResult {
        statistic: w,
        scaled_statistic: scaled,
        lambdas: vec![lambda],
        nu,
        p_value: special::chi_square_sf(scaled, nu),
        method: TestMethod::ClrtSatterthwaite,
    })
}

/// Wald test of H0: μ = psi0 using the Godambe variance:
/// W_d = (μ̂ - psi0)² / Var(μ̂) against chi-square(1).
pub fn wald_test(fit: &CompositeFit, psi0: f64) -> Result<TestResult> {
    let info = fit
        .information
        .ok_or_else(|| Error::numerical("Wald test undefined at a boundary estimate"))?;
    if !(info.variance > 0.0 && info.variance.is_finite()) {
        return Err(Error::numerical("Wald test requires a positive variance"));
    }
    let diff = fit.mu_hat - psi0;
    let w_d = diff * diff / info.variance;
    Ok(TestResult {
        statistic: w_d,
        scaled_statistic: w_d,
        lambdas: Vec::new(),
        nu: 1.0,
        p_value: special::chi_square_sf(w_d, 1.0),
        method: TestMethod::Wald,
    })
}
