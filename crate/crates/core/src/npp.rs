//! Normalized power prior posterior for a binomial target/reference pair.
//!
//! The reference likelihood enters raised to a power w with its own uniform
//! prior on [w_min, w_max]; the normalizing constant of the powered
//! reference likelihood is divided out so the joint posterior is proper.
//! With a uniform prior on p, the conditional posterior of p given w is
//! Beta(s_t + w s_r + 1, f_t + w f_r + 1), and the marginal density of w is
//! proportional to B(s_t + w s_r + 1, f_t + w f_r + 1) / B(w s_r + 1, w f_r + 1).
//!
//! All summaries integrate the w axis by the trapezoid rule on a uniform
//! grid and use exact Beta conditionals in p, so results are deterministic.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special;

/// Successes out of trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct BinomialCounts {
    pub successes: u64,
    pub trials: u64,
}

impl BinomialCounts {
    pub fn new(successes: u64, trials: u64) -> Result<Self> {
        if successes > trials {
            return Err(Error::data(format!(
                "successes {successes} exceed trials {trials}"
            )));
        }
        Ok(BinomialCounts { successes, trials })
    }

    pub fn failures(&self) -> u64 {
        self.trials - self.successes
    }
}

/// Quadrature settings for the power-prior posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default)
)]
pub struct NppConfig {
    /// Support of the uniform prior on the borrowing power.
    pub w_min: f64,
    pub w_max: f64,
    /// Grid points on the w axis (at least 101 unless the support is a
    /// single point).
    pub w_grid: usize,
    /// Level of the equal-tailed credible interval.
    pub level: f64,
}

impl Default for NppConfig {
    fn default() -> Self {
        NppConfig {
            w_min: 0.0,
            w_max: 0.8,
            w_grid: 2001,
            level: 0.95,
        }
    }
}

impl NppConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_min.is_finite()
            && self.w_max.is_finite()
            && 0.0 <= self.w_min
            && self.w_min <= self.w_max
            && self.w_max <= 1.0)
        {
            return Err(Error::config(format!(
                "weight support must satisfy 0 <= w_min <= w_max <= 1, got [{}, {}]",
                self.w_min, self.w_max
            )));
        }
        if self.w_min < self.w_max && self.w_grid < 101 {
            return Err(Error::config(format!(
                "weight grid needs at least 101 points, got {}",
                self.w_grid
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config(format!(
                "credible level must lie in (0, 1), got {}",
                self.level
            )));
        }
        Ok(())
    }
}

/// Posterior summaries.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NppResult {
    /// Marginal posterior mean of p.
    pub p_mean: f64,
    /// Marginal posterior mean of the borrowing power w.
    pub w_mean: f64,
    /// Equal-tailed credible interval for p.
    pub credible: (f64, f64),
    pub level: f64,
    /// P(p <= p0 | data).
    pub prob_le_null: f64,
    /// P(p >= p0 | data).
    pub prob_ge_null: f64,
}

/// Discretized joint posterior: grid weights for w and the Beta conditional
/// parameters of p given each grid point.
#[derive(Debug, Clone)]
pub struct NppPosterior {
    ws: Vec<f64>,
    masses: Vec<f64>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl NppPosterior {
    pub fn compute(
        target: &BinomialCounts,
        reference: &BinomialCounts,
        config: &NppConfig,
    ) -> Result<Self> {
        config.validate()?;
        let st = target.successes as f64;
        let ft = target.failures() as f64;
        let sr = reference.successes as f64;
        let fr = reference.failures() as f64;

        // Degenerate support collapses to the conditional power prior with a
        // fixed exponent.
        let ws: Vec<f64> = if config.w_min == config.w_max {
            alloc::vec![config.w_min]
        } else {
            let m = config.w_grid;
            let step = (config.w_max - config.w_min) / (m - 1) as f64;
            (0..m).map(|i| config.w_min + step * i as f64).collect()
        };

        let mut log_density = Vec::with_capacity(ws.len());
        let mut alphas = Vec::with_capacity(ws.len());
        let mut betas = Vec::with_capacity(ws.len());
        for &w in &ws {
            let a = st + w * sr + 1.0;
            let b = ft + w * fr + 1.0;
            log_density
                .push(special::ln_beta(a, b) - special::ln_beta(w * sr + 1.0, w * fr + 1.0));
            alphas.push(a);
            betas.push(b);
        }
        let max = log_density.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut masses: Vec<f64> = log_density.iter().map(|&l| libm::exp(l - max)).collect();
        if masses.len() > 1 {
            // trapezoid end-point halving
            masses[0] *= 0.5;
            let last = masses.len() - 1;
            masses[last] *= 0.5;
        }
        let total: f64 = masses.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::numerical("power-prior marginal density vanished"));
        }
        for m in masses.iter_mut() {
            *m /= total;
        }
        Ok(NppPosterior {
            ws,
            masses,
            alphas,
            betas,
        })
    }

    /// Normalized grid masses; they sum to one.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn p_mean(&self) -> f64 {
        self.masses
            .iter()
            .zip(self.alphas.iter().zip(&self.betas))
            .map(|(m, (a, b))| m * a / (a + b))
            .sum()
    }

    pub fn w_mean(&self) -> f64 {
        self.masses.iter().zip(&self.ws).map(|(m, w)| m * w).sum()
    }

    /// Marginal posterior CDF of p: a mixture of Beta CDFs.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        self.masses
            .iter()
            .zip(self.alphas.iter().zip(&self.betas))
            .map(|(m, (&a, &b))| m * special::reg_inc_beta(a, b, x))
            .sum()
    }

    /// Quantile of the marginal posterior of p by bisection.
    pub fn quantile(&self, q: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&q));
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn summarize(&self, p0: f64, level: f64) -> Result<NppResult> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::config(format!(
                "null value must lie in [0, 1], got {p0}"
            )));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::config(format!(
                "credible level must lie in (0, 1), got {level}"
            )));
        }
        let tail = (1.0 - level) / 2.0;
        let prob_le_null = self.cdf(p0);
        Ok(NppResult {
            p_mean: self.p_mean(),
            w_mean: self.w_mean(),
            credible: (self.quantile(tail), self.quantile(1.0 - tail)),
            level,
            prob_le_null,
            prob_ge_null: 1.0 - prob_le_null,
        })
    }
}

/// Full posterior summary: mean of p and w, equal-tailed credible interval,
/// and both one-sided posterior probabilities against `p0`.
pub fn npp_posterior(
    target: &BinomialCounts,
    reference: &BinomialCounts,
    config: &NppConfig,
    p0: f64,
) -> Result<NppResult> {
    NppPosterior::compute(target, reference, config)?.summarize(p0, config.level)
}
