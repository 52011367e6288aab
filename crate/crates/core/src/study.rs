//! Deterministic dataset construction, sweep experiments over the reference
//! cohort, effective sample size, and tipping-point scans.
//!
//! Nothing here draws random numbers: cohorts are built by rounding the
//! requested sample average to a count, so identical configurations produce
//! identical tables.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expfam::{clrt, composite_mle, Bernoulli, WeightedCohorts};
use crate::glm::{
    build_design, coef_inference, fit_weighted_logistic, CohortBlock,
};
use crate::npp::{BinomialCounts, NppConfig, NppPosterior};
use crate::weights::{
    mean_difference, welch_pvalue, AsymmetricWeight, Dissimilarity, OutcomeSample, PValueWeight,
    SymmetricWeight,
};

fn round_half_even(x: f64) -> f64 {
    let f = libm::floor(x);
    let d = x - f;
    if d > 0.5 {
        f + 1.0
    } else if d < 0.5 || (f as i64) % 2 == 0 {
        f
    } else {
        f + 1.0
    }
}

/// Builds the deterministic cohort with the requested sample average:
/// round-half-to-even(n * mean) ones followed by zeros. The achieved mean is
/// within 0.5/n of the request.
pub fn construct_binary_cohort(n: usize, mean: f64) -> Result<OutcomeSample> {
    if n == 0 {
        return Err(Error::data("cohort size must be at least 1"));
    }
    if !(0.0..=1.0).contains(&mean) {
        return Err(Error::data(format!(
            "cohort mean must lie in [0, 1], got {mean}"
        )));
    }
    let ones = round_half_even(n as f64 * mean) as usize;
    OutcomeSample::from_counts(ones.min(n), n)
}

/// Which reference-cohort property a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "axis", rename_all = "snake_case")
)]
pub enum ReferenceAxis {
    /// Vary the reference mean over tau = reference mean - target mean in
    /// [tau_min, tau_max] at a fixed reference size.
    Mean {
        reference_n: usize,
        tau_min: f64,
        tau_max: f64,
    },
    /// Vary the reference size over [n_min, n_max] at a fixed reference mean.
    Size {
        reference_mean: f64,
        n_min: usize,
        n_max: usize,
    },
}

/// Weight methods evaluated in a sweep; field names match the output table
/// columns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields, default)
)]
pub struct SweepMethods {
    pub w1: Option<SymmetricWeight>,
    pub w2: Option<AsymmetricWeight>,
    pub w3: Option<PValueWeight>,
    pub npp: Option<NppConfig>,
}

/// Configuration of a sweep experiment.
/// (`deny_unknown_fields` does not combine with the flattened axis.)
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepConfig {
    pub target_n: usize,
    pub target_mean: f64,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub axis: ReferenceAxis,
    /// Grid resolution, at least 2.
    pub points: usize,
    pub methods: SweepMethods,
    /// Null value for the ratio test; defaults to the achieved target mean.
    pub p0: Option<f64>,
}

/// Weight, estimate, and ratio-test p-value for one frequentist method.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodCell {
    pub weight: f64,
    pub estimate: f64,
    pub p_value: f64,
}

/// Power-prior posterior summaries for one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NppCell {
    /// Marginal posterior mean of the borrowing power.
    pub weight: f64,
    /// Marginal posterior mean of p.
    pub estimate: f64,
    /// P(p <= p0 | data).
    pub prob_le_null: f64,
}

/// One grid point of a sweep. `skipped` marks grid points whose requested
/// reference mean left [0, 1].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    /// Grid value: tau for mean sweeps, the reference size for size sweeps.
    pub axis: f64,
    pub skipped: bool,
    pub w1: Option<MethodCell>,
    pub w2: Option<MethodCell>,
    pub w3: Option<MethodCell>,
    pub npp: Option<NppCell>,
}

fn method_cell(
    target: &OutcomeSample,
    reference: &OutcomeSample,
    weight: f64,
    p0: f64,
) -> Result<MethodCell> {
    let cohorts = WeightedCohorts::target_with_references(
        target.clone(),
        alloc::vec![(reference.clone(), weight)],
    )?;
    let fit = composite_mle(&cohorts, &Bernoulli)?;
    let test = clrt(&cohorts, &Bernoulli, p0)?;
    Ok(MethodCell {
        weight,
        estimate: fit.mu_hat,
        p_value: test.p_value,
    })
}

fn sweep_row(
    axis: f64,
    target: &OutcomeSample,
    reference: &OutcomeSample,
    methods: &SweepMethods,
    p0: f64,
) -> Result<SweepRow> {
    let tau_hat = mean_difference(target, reference);
    let w1 = match &methods.w1 {
        Some(spec) => Some(method_cell(target, reference, spec.eval(tau_hat)?, p0)?),
        None => None,
    };
    let w2 = match &methods.w2 {
        Some(spec) => Some(method_cell(target, reference, spec.eval(tau_hat)?, p0)?),
        None => None,
    };
    let w3 = match &methods.w3 {
        Some(spec) => {
            let d: Dissimilarity = welch_pvalue(target, reference)?;
            let w = spec.eval(d.p_value.expect("welch always sets a p-value"))?;
            Some(method_cell(target, reference, w, p0)?)
        }
        None => None,
    };
    let npp = match &methods.npp {
        Some(config) => {
            let t = BinomialCounts::new(target.successes() as u64, target.n() as u64)?;
            let r = BinomialCounts::new(reference.successes() as u64, reference.n() as u64)?;
            let post = NppPosterior::compute(&t, &r, config)?;
            Some(NppCell {
                weight: post.w_mean(),
                estimate: post.p_mean(),
                prob_le_null: post.cdf(p0),
            })
        }
        None => None,
    };
    Ok(SweepRow {
        axis,
        skipped: false,
        w1,
        w2,
        w3,
        npp,
    })
}

fn validate_sweep(config: &SweepConfig) -> Result<()> {
    if config.points < 2 {
        return Err(Error::config(format!(
            "sweep needs at least 2 grid points, got {}",
            config.points
        )));
    }
    if let Some(spec) = &config.methods.w1 {
        spec.validate()?;
    }
    if let Some(spec) = &config.methods.w2 {
        spec.validate()?;
    }
    if let Some(spec) = &config.methods.w3 {
        spec.validate()?;
    }
    if let Some(npp) = &config.methods.npp {
        npp.validate()?;
    }
    Ok(())
}

/// Tau grid, mirror-exact when the range is symmetric so downstream
/// skew-symmetry holds to rounding error.
fn tau_grid(tau_min: f64, tau_max: f64, points: usize) -> Vec<f64> {
    let mut grid = alloc::vec![0.0; points];
    let step = (tau_max - tau_min) / (points - 1) as f64;
    if tau_min == -tau_max {
        for i in 0..points / 2 {
            let t = tau_min + step * i as f64;
            grid[i] = t;
            grid[points - 1 - i] = -t;
        }
        // middle entry of an odd grid is exactly zero
    } else {
        for (i, g) in grid.iter_mut().enumerate() {
            *g = tau_min + step * i as f64;
        }
    }
    grid
}

/// Sweeps the reference sample average at fixed reference size: one row per
/// grid value of tau = reference mean - target mean.
pub fn sweep_reference_mean(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    validate_sweep(config)?;
    let ReferenceAxis::Mean {
        reference_n,
        tau_min,
        tau_max,
    } = config.axis
    else {
        return Err(Error::config("sweep_reference_mean requires a mean axis"));
    };
    if tau_min >= tau_max {
        return Err(Error::config(format!(
            "tau range must satisfy tau_min < tau_max, got [{tau_min}, {tau_max}]"
        )));
    }
    let target = construct_binary_cohort(config.target_n, config.target_mean)?;
    let p0 = config.p0.unwrap_or_else(|| target.mean());

    let mut rows = Vec::with_capacity(config.points);
    for tau in tau_grid(tau_min, tau_max, config.points) {
        let reference_mean = config.target_mean + tau;
        if !(0.0..=1.0).contains(&reference_mean) {
            rows.push(SweepRow {
                axis: tau,
                skipped: true,
                w1: None,
                w2: None,
                w3: None,
                npp: None,
            });
            continue;
        }
        let reference = construct_binary_cohort(reference_n, reference_mean)?;
        rows.push(sweep_row(tau, &target, &reference, &config.methods, p0)?);
    }
    Ok(rows)
}

/// Sweeps the reference size at a fixed reference sample average: one row per
/// grid size.
pub fn sweep_reference_size(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    validate_sweep(config)?;
    let ReferenceAxis::Size {
        reference_mean,
        n_min,
        n_max,
    } = config.axis
    else {
        return Err(Error::config("sweep_reference_size requires a size axis"));
    };
    if n_min == 0 || n_min >= n_max {
        return Err(Error::config(format!(
            "size range must satisfy 1 <= n_min < n_max, got [{n_min}, {n_max}]"
        )));
    }
    if !(0.0..=1.0).contains(&reference_mean) {
        return Err(Error::config(format!(
            "reference mean must lie in [0, 1], got {reference_mean}"
        )));
    }
    let target = construct_binary_cohort(config.target_n, config.target_mean)?;
    let p0 = config.p0.unwrap_or_else(|| target.mean());

    let span = (n_max - n_min) as f64;
    let mut rows = Vec::with_capacity(config.points);
    for i in 0..config.points {
        let n = n_min + round_half_even(span * i as f64 / (config.points - 1) as f64) as usize;
        let reference = construct_binary_cohort(n, reference_mean)?;
        rows.push(sweep_row(n as f64, &target, &reference, &config.methods, p0)?);
    }
    Ok(rows)
}

/// Effective sample size with an anomaly flag for the negative case
/// (combined variance above the target-only variance).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ess {
    pub value: f64,
    pub anomalous: bool,
}

/// ESS = n_target (var_target_only / var_combined - 1): the number of target
/// subjects the borrowed information is worth.
pub fn ess(var_target_only: f64, var_combined: f64, n_target: usize) -> Result<Ess> {
    if !(var_target_only > 0.0 && var_target_only.is_finite()) {
        return Err(Error::data(format!(
            "target-only variance must be positive, got {var_target_only}"
        )));
    }
    if !(var_combined > 0.0 && var_combined.is_finite()) {
        return Err(Error::data(format!(
            "combined variance must be positive, got {var_combined}"
        )));
    }
    let value = n_target as f64 * (var_target_only / var_combined - 1.0);
    Ok(Ess {
        value,
        anomalous: value < 0.0,
    })
}

/// Width of the region where the curve stays above
/// `min + fraction * (max - min)`, with linear interpolation at the two
/// crossings around the global maximum. Used to compare peak sharpness
/// across sweep tables.
pub fn width_at_fraction(xs: &[f64], ys: &[f64], fraction: f64) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::data("width needs two aligned samples at minimum"));
    }
    if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
        return Err(Error::config(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut peak = 0;
    for (i, &y) in ys.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::data("curve values must be finite"));
        }
        lo = lo.min(y);
        if y > hi {
            hi = y;
            peak = i;
        }
    }
    if hi <= lo {
        return Err(Error::data("curve is constant; width undefined"));
    }
    let threshold = lo + fraction * (hi - lo);

    let mut i = peak;
    while i > 0 && ys[i - 1] >= threshold {
        i -= 1;
    }
    let left = if i == 0 {
        xs[0]
    } else {
        let t = (threshold - ys[i - 1]) / (ys[i] - ys[i - 1]);
        xs[i - 1] + t * (xs[i] - xs[i - 1])
    };

    let mut k = peak;
    while k + 1 < ys.len() && ys[k + 1] >= threshold {
        k += 1;
    }
    let right = if k + 1 == ys.len() {
        xs[xs.len() - 1]
    } else {
        let t = (threshold - ys[k + 1]) / (ys[k] - ys[k + 1]);
        xs[k + 1] - t * (xs[k + 1] - xs[k])
    };
    Ok(right - left)
}

/// The refit performed at each tipping-scan grid weight.
#[derive(Debug, Clone)]
pub enum TippingModel {
    /// Scalar binomial path: composite ratio test of the target mean against
    /// `p0` while the single reference cohort's weight moves along the grid.
    Binomial {
        target: OutcomeSample,
        reference: OutcomeSample,
        p0: f64,
    },
    /// Regression path: Wald test of one treatment arm's coefficient while
    /// every reference block's weight moves along the grid.
    Logistic {
        blocks: Vec<CohortBlock>,
        covariate_names: Vec<String>,
        control_arm: String,
        test_arm: String,
    },
}

/// How the grid weight maps onto reference arms in the regression path.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "mode", rename_all = "snake_case")
)]
pub enum TippingWeightMode {
    /// Every reference arm takes the grid weight itself.
    Uniform,
    /// Each reference arm takes its base weight scaled by the grid value.
    PerArmScale { base: BTreeMap<String, f64> },
}

/// One grid point of a tipping scan; `p_value` is absent when the refit
/// failed (the scan continues past failures).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TippingRow {
    pub weight: f64,
    pub p_value: Option<f64>,
    pub reject: Option<bool>,
}

/// Scan outcome: per-weight decisions and the grid intervals where the
/// decision flipped.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TippingReport {
    pub alpha: f64,
    pub rows: Vec<TippingRow>,
    /// Consecutive grid weights between which the reject/accept decision
    /// changed; empty when the conclusion is stable.
    pub flips: Vec<(f64, f64)>,
}

fn reference_weights_at(
    blocks: &[CohortBlock],
    mode: &TippingWeightMode,
    weight: f64,
) -> Result<BTreeMap<(String, String), f64>> {
    let mut reference_weights = BTreeMap::new();
    for b in blocks.iter().filter(|b| !b.is_target) {
        let w = match mode {
            TippingWeightMode::Uniform => weight,
            TippingWeightMode::PerArmScale { base } => {
                let base_w = base.get(&b.arm).ok_or_else(|| {
                    Error::config(format!("no base weight for arm '{}'", b.arm))
                })?;
                base_w * weight
            }
        };
        reference_weights.insert((b.cohort.clone(), b.arm.clone()), w);
    }
    Ok(reference_weights)
}

/// Setup mistakes (bad labels, bad weights) abort the scan; only the refit
/// itself is allowed to fail per row.
fn validate_tipping_setup(model: &TippingModel, mode: &TippingWeightMode) -> Result<()> {
    if let TippingWeightMode::PerArmScale { base } = mode {
        if !matches!(model, TippingModel::Logistic { .. }) {
            return Err(Error::config(
                "per-arm scaling applies only to the regression path",
            ));
        }
        for (arm, w) in base {
            if !(w.is_finite() && (0.0..=1.0).contains(w)) {
                return Err(Error::config(format!(
                    "base weight for arm '{arm}' must lie in [0, 1], got {w}"
                )));
            }
        }
    }
    if let TippingModel::Logistic {
        blocks,
        covariate_names,
        control_arm,
        test_arm,
    } = model
    {
        let weights = reference_weights_at(blocks, mode, 0.0)?;
        let data = build_design(blocks, covariate_names, control_arm, &weights)?;
        data.coding.indicator_column(test_arm)?;
    }
    Ok(())
}

fn tipping_pvalue(model: &TippingModel, mode: &TippingWeightMode, weight: f64) -> Result<f64> {
    match model {
        TippingModel::Binomial {
            target,
            reference,
            p0,
        } => {
            let cohorts = WeightedCohorts::target_with_references(
                target.clone(),
                alloc::vec![(reference.clone(), weight)],
            )?;
            Ok(clrt(&cohorts, &Bernoulli, *p0)?.p_value)
        }
        TippingModel::Logistic {
            blocks,
            covariate_names,
            control_arm,
            test_arm,
        } => {
            let reference_weights = reference_weights_at(blocks, mode, weight)?;
            let data = build_design(blocks, covariate_names, control_arm, &reference_weights)?;
            let column = data.coding.indicator_column(test_arm)?;
            let fit = fit_weighted_logistic(&data.rows)?;
            let inference = coef_inference(&fit, 0.95)?;
            Ok(inference[column].p_value)
        }
    }
}

/// Refits the model at every grid weight and reports where the accept/reject
/// decision at `alpha` flips. Failed refits mark their row and the scan
/// continues.
pub fn tipping_scan(
    model: &TippingModel,
    grid: &[f64],
    mode: &TippingWeightMode,
    alpha: f64,
) -> Result<TippingReport> {
    if grid.is_empty() {
        return Err(Error::config("tipping grid must not be empty"));
    }
    if grid.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::config("tipping grid weights must lie in [0, 1]"));
    }
    if grid.windows(2).any(|p| p[0] > p[1]) {
        return Err(Error::config("tipping grid must be sorted ascending"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!(
            "significance level must lie in (0, 1), got {alpha}"
        )));
    }
    validate_tipping_setup(model, mode)?;

    let mut rows = Vec::with_capacity(grid.len());
    for &weight in grid {
        match tipping_pvalue(model, mode, weight) {
            Ok(p) => rows.push(TippingRow {
                weight,
                p_value: Some(p),
                reject: Some(p < alpha),
            }),
            Err(Error::Config(msg)) => return Err(Error::Config(msg)),
            Err(_) => rows.push(TippingRow {
                weight,
                p_value: None,
                reject: None,
            }),
        }
    }

    let mut flips = Vec::new();
    let mut last: Option<(f64, bool)> = None;
    for row in &rows {
        if let Some(reject) = row.reject {
            if let Some((w_prev, prev)) = last {
                if prev != reject {
                    flips.push((w_prev, row.weight));
                }
            }
            last = Some((row.weight, reject));
        }
    }
    Ok(TippingReport { alpha, rows, flips })
}
