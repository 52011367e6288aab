//! Dissimilarity statistics between target and reference outcome samples and
//! the bounded weight functions that map them to borrowing weights.
//!
//! All three weight functions keep the weight inside a configured band
//! `[a, b] ⊆ [0, 1]`: full attenuation never drops below `a`, and no degree
//! of agreement borrows more than `b`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special;

/// A sample of binary outcomes from one cohort arm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSample {
    values: Vec<u8>,
}

impl OutcomeSample {
    /// Validates that the sample is non-empty and strictly 0/1.
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::data("outcome sample must not be empty"));
        }
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            return Err(Error::data(format!(
                "outcome sample value at index {pos} is not binary"
            )));
        }
        Ok(OutcomeSample { values })
    }

    /// `successes` ones followed by zeros, `n` observations total.
    pub fn from_counts(successes: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::data("outcome sample must not be empty"));
        }
        if successes > n {
            return Err(Error::data(format!(
                "success count {successes} exceeds sample size {n}"
            )));
        }
        let mut values = alloc::vec![1u8; successes];
        values.resize(n, 0);
        Ok(OutcomeSample { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn successes(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }

    pub fn mean(&self) -> f64 {
        self.successes() as f64 / self.n() as f64
    }

    /// Unbiased sample variance (n-1 denominator); for binary data this is
    /// `p(1-p) n/(n-1)`. Requires n >= 2.
    pub fn variance(&self) -> Result<f64> {
        let n = self.n();
        if n < 2 {
            return Err(Error::data(
                "variance requires at least two observations",
            ));
        }
        let p = self.mean();
        Ok(p * (1.0 - p) * n as f64 / (n - 1) as f64)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }
}

/// Dissimilarity between two samples: `tau` is the difference in sample means
/// (or a test statistic) and `p_value` is present when a test was run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissimilarity {
    pub tau: f64,
    pub p_value: Option<f64>,
}

/// Difference in sample means, reference minus target.
pub fn mean_difference(target: &OutcomeSample, reference: &OutcomeSample) -> f64 {
    reference.mean() - target.mean()
}

/// Welch's unequal-variance t-test of equal means, two-sided, with
/// Satterthwaite degrees of freedom. The statistic (reference minus target)
/// is stored in `tau`.
///
/// Conventions for degenerate samples: zero variance in both samples yields
/// p = 1 when the means are equal and p = 0 otherwise.
pub fn welch_pvalue(target: &OutcomeSample, reference: &OutcomeSample) -> Result<Dissimilarity> {
    if target.n() < 2 || reference.n() < 2 {
        return Err(Error::data(
            "Welch's test requires at least two observations per sample",
        ));
    }
    let (mt, mr) = (target.mean(), reference.mean());
    let (vt, vr) = (target.variance()?, reference.variance()?);
    let (nt, nr) = (target.n() as f64, reference.n() as f64);
    let term_t = vt / nt;
    let term_r = vr / nr;
    let se2 = term_t + term_r;
    if se2 == 0.0 {
        return Ok(if mr == mt {
            Dissimilarity {
                tau: 0.0,
                p_value: Some(1.0),
            }
        } else {
            Dissimilarity {
                tau: libm::copysign(f64::INFINITY, mr - mt),
                p_value: Some(0.0),
            }
        });
    }
    let t = (mr - mt) / libm::sqrt(se2);
    let df = se2 * se2 / (term_t * term_t / (nt - 1.0) + term_r * term_r / (nr - 1.0));
    Ok(Dissimilarity {
        tau: t,
        p_value: Some(special::student_t_two_sided(t, df)),
    })
}

fn check_band(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::config(format!(
            "weight band must satisfy 0 <= a < b <= 1, got a={a}, b={b}"
        )));
    }
    Ok(())
}

/// Smooth bisquare descent: (1 - u^2)^2.
fn bisquare(u: f64) -> f64 {
    let v = 1.0 - u * u;
    v * v
}

/// Symmetric plateau weight: `b` for |tau| < c_low, bisquare descent on
/// [c_low, c_upp], `a` beyond c_upp.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct SymmetricWeight {
    pub a: f64,
    pub b: f64,
    pub c_low: f64,
    pub c_upp: f64,
}

impl SymmetricWeight {
    pub fn new(a: f64, b: f64, c_low: f64, c_upp: f64) -> Result<Self> {
        let spec = SymmetricWeight { a, b, c_low, c_upp };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_band(self.a, self.b)?;
        if !(self.c_low.is_finite() && self.c_upp.is_finite() && self.c_low < self.c_upp) {
            return Err(Error::config(format!(
                "thresholds must satisfy c_low < c_upp, got c_low={}, c_upp={}",
                self.c_low, self.c_upp
            )));
        }
        Ok(())
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        self.validate()?;
        let t = libm::fabs(tau);
        Ok(if t < self.c_low {
            self.b
        } else if t <= self.c_upp {
            self.a + (self.b - self.a) * bisquare((t - self.c_low) / (self.c_upp - self.c_low))
        } else {
            self.a
        })
    }
}

/// Denominator used by the ascending branch of [`AsymmetricWeight`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum AscendingBranch {
    /// Denominator `c_low - g_low`: the weight rises from `a` at `g_low` to
    /// `b` at `c_low`, keeping the function continuous.
    #[default]
    Continuous,
    /// Denominator `c_upp - c_low`, shared with the descending branch. The
    /// function then jumps at `g_low`.
    FixedWidth,
}

/// Asymmetric plateau weight: `a` below g_low, ascent to `b` on
/// (g_low, c_low], plateau `b` on [c_low, c_upp], bisquare descent to `a`
/// on (c_upp, g_upp], `a` beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct AsymmetricWeight {
    pub a: f64,
    pub b: f64,
    pub g_low: f64,
    pub c_low: f64,
    pub c_upp: f64,
    pub g_upp: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub ascending: AscendingBranch,
}

impl AsymmetricWeight {
    pub fn new(a: f64, b: f64, g_low: f64, c_low: f64, c_upp: f64, g_upp: f64) -> Result<Self> {
        let spec = AsymmetricWeight {
            a,
            b,
            g_low,
            c_low,
            c_upp,
            g_upp,
            ascending: AscendingBranch::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_band(self.a, self.b)?;
        let ordered = self.g_low.is_finite()
            && self.g_upp.is_finite()
            && self.c_low.is_finite()
            && self.c_upp.is_finite()
            && self.g_low < self.c_low
            && self.c_low <= self.c_upp
            && self.c_upp < self.g_upp;
        if !ordered {
            return Err(Error::config(format!(
                "thresholds must satisfy g_low < c_low <= c_upp < g_upp, got g_low={}, c_low={}, c_upp={}, g_upp={}",
                self.g_low, self.c_low, self.c_upp, self.g_upp
            )));
        }
        Ok(())
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        self.validate()?;
        let span = self.b - self.a;
        Ok(if tau < self.g_low {
            self.a
        } else if tau < self.c_low {
            let denom = match self.ascending {
                AscendingBranch::Continuous => self.g_low - self.c_low,
                AscendingBranch::FixedWidth => self.c_upp - self.c_low,
            };
            self.a + span * bisquare((tau - self.c_low) / denom)
        } else if tau <= self.c_upp {
            self.b
        } else if tau <= self.g_upp {
            self.a + span * bisquare((tau - self.c_upp) / (self.g_upp - self.c_upp))
        } else {
            self.a
        })
    }
}

/// Orientation of the p-value weight map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum PValueOrientation {
    /// Weight increases with the p-value: congruent samples borrow the most.
    #[default]
    FigureConsistent,
    /// Weight decreases with the p-value.
    AsWritten,
}

/// Smooth p-value-driven weight, bounded in `[a, b]`.
///
/// In the `FigureConsistent` orientation the weight is
/// `a + (b-a) exp(c/(1-p) * ln p)`, rising from `a` at p = 0 to
/// `a + (b-a) e^{-c}` at p = 1; `AsWritten` swaps the roles of `p` and
/// `1 - p`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct PValueWeight {
    pub a: f64,
    pub b: f64,
    pub shape_c: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub orientation: PValueOrientation,
}

impl PValueWeight {
    pub fn new(a: f64, b: f64, shape_c: f64) -> Result<Self> {
        let spec = PValueWeight {
            a,
            b,
            shape_c,
            orientation: PValueOrientation::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_band(self.a, self.b)?;
        if !(self.shape_c.is_finite() && self.shape_c > 0.0) {
            return Err(Error::config(format!(
                "shape parameter must be positive, got {}",
                self.shape_c
            )));
        }
        Ok(())
    }

    pub fn eval(&self, p_value: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0..=1.0).contains(&p_value) {
            return Err(Error::data(format!(
                "p-value must lie in [0, 1], got {p_value}"
            )));
        }
        let span = self.b - self.a;
        let at_limit = self.a + span * libm::exp(-self.shape_c);
        Ok(match self.orientation {
            PValueOrientation::FigureConsistent => {
                if p_value == 0.0 {
                    self.a
                } else if p_value == 1.0 {
                    at_limit
                } else {
                    self.a
                        + span
                            * libm::exp(self.shape_c / (1.0 - p_value) * libm::log(p_value))
                }
            }
            PValueOrientation::AsWritten => {
                if p_value == 0.0 {
                    at_limit
                } else if p_value == 1.0 {
                    self.a
                } else {
                    self.a
                        + span * libm::exp(self.shape_c / p_value * libm::log1p(-p_value))
                }
            }
        })
    }
}

/// One of the three bounded weight functions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind")
)]
pub enum WeightSpec {
    #[cfg_attr(feature = "serde", serde(rename = "w1"))]
    Symmetric(SymmetricWeight),
    #[cfg_attr(feature = "serde", serde(rename = "w2"))]
    Asymmetric(AsymmetricWeight),
    #[cfg_attr(feature = "serde", serde(rename = "w3"))]
    PValue(PValueWeight),
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::Symmetric(s) => s.validate(),
            WeightSpec::Asymmetric(s) => s.validate(),
            WeightSpec::PValue(s) => s.validate(),
        }
    }

    /// Lower bound of the weight band.
    pub fn lower(&self) -> f64 {
        match self {
            WeightSpec::Symmetric(s) => s.a,
            WeightSpec::Asymmetric(s) => s.a,
            WeightSpec::PValue(s) => s.a,
        }
    }

    /// Upper bound of the weight band.
    pub fn upper(&self) -> f64 {
        match self {
            WeightSpec::Symmetric(s) => s.b,
            WeightSpec::Asymmetric(s) => s.b,
            WeightSpec::PValue(s) => s.b,
        }
    }

    /// Whether evaluation consumes a p-value rather than a mean difference.
    pub fn wants_p_value(&self) -> bool {
        matches!(self, WeightSpec::PValue(_))
    }

    /// Evaluates the weight from a dissimilarity summary. The tau-based
    /// kinds read `tau`; the p-value kind requires `p_value`.
    pub fn eval(&self, dissimilarity: &Dissimilarity) -> Result<f64> {
        match self {
            WeightSpec::Symmetric(s) => s.eval(dissimilarity.tau),
            WeightSpec::Asymmetric(s) => s.eval(dissimilarity.tau),
            WeightSpec::PValue(s) => {
                let p = dissimilarity.p_value.ok_or_else(|| {
                    Error::data("p-value weight requires a dissimilarity with a p-value")
                })?;
                s.eval(p)
            }
        }
    }

    /// Computes the dissimilarity this spec consumes and evaluates it.
    pub fn eval_samples(&self, target: &OutcomeSample, reference: &OutcomeSample) -> Result<f64> {
        let d = self.dissimilarity(target, reference)?;
        self.eval(&d)
    }

    fn dissimilarity(
        &self,
        target: &OutcomeSample,
        reference: &OutcomeSample,
    ) -> Result<Dissimilarity> {
        if self.wants_p_value() {
            welch_pvalue(target, reference)
        } else {
            Ok(Dissimilarity {
                tau: mean_difference(target, reference),
                p_value: None,
            })
        }
    }
}

/// Per-arm outcome samples, keyed by arm label.
pub type ArmSamples = BTreeMap<String, OutcomeSample>;

/// How a single weight (or one weight per arm) is derived in a multi-arm
/// trial.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "option", rename_all = "snake_case")
)]
pub enum MultiArmOption {
    /// One weight per arm from that arm's own dissimilarity.
    Separate,
    /// A single weight from the between-cohort difference of the
    /// treatment-vs-control effect, applied to every arm.
    TreatmentDifference { treatment: String, control: String },
    /// A single weight from the summed per-arm dissimilarities, applied to
    /// every arm.
    Overall,
}

fn matched_arms<'a>(
    target: &'a ArmSamples,
    reference: &'a ArmSamples,
) -> Result<Vec<&'a String>> {
    for arm in target.keys() {
        if !reference.contains_key(arm) {
            return Err(Error::data(format!("arm '{arm}' missing from reference cohort")));
        }
    }
    for arm in reference.keys() {
        if !target.contains_key(arm) {
            return Err(Error::data(format!("arm '{arm}' missing from target cohort")));
        }
    }
    if target.is_empty() {
        return Err(Error::data("no arms to weight"));
    }
    Ok(target.keys().collect())
}

fn arm_pair<'a>(samples: &'a ArmSamples, arm: &str) -> Result<&'a OutcomeSample> {
    samples
        .get(arm)
        .ok_or_else(|| Error::data(format!("arm '{arm}' not present in cohort")))
}

/// Welch-type z term var/n for one sample.
fn variance_term(s: &OutcomeSample) -> Result<f64> {
    Ok(s.variance()? / s.n() as f64)
}

/// Two-sided p-value for equality of the treatment-vs-control difference
/// across cohorts (normal reference for the four-sample Welch statistic,
/// Satterthwaite degrees of freedom).
fn treatment_difference_pvalue(
    tt: &OutcomeSample,
    tc: &OutcomeSample,
    rt: &OutcomeSample,
    rc: &OutcomeSample,
    diff: f64,
) -> Result<f64> {
    let terms = [
        variance_term(tt)?,
        variance_term(tc)?,
        variance_term(rt)?,
        variance_term(rc)?,
    ];
    let ns = [tt.n(), tc.n(), rt.n(), rc.n()];
    let se2: f64 = terms.iter().sum();
    if se2 == 0.0 {
        return Ok(if diff == 0.0 { 1.0 } else { 0.0 });
    }
    let t = diff / libm::sqrt(se2);
    let df = se2 * se2
        / terms
            .iter()
            .zip(ns)
            .map(|(v, n)| v * v / (n as f64 - 1.0))
            .sum::<f64>();
    Ok(special::student_t_two_sided(t, df))
}

/// Joint two-sided p-value that every arm's means agree across cohorts:
/// the sum of squared per-arm z statistics referred to chi-square with one
/// degree of freedom per arm (large-sample approximation).
fn overall_pvalue(target: &ArmSamples, reference: &ArmSamples) -> Result<f64> {
    let mut stat = 0.0;
    let mut q = 0.0;
    for (arm, t) in target {
        let r = arm_pair(reference, arm)?;
        let se2 = variance_term(t)? + variance_term(r)?;
        let diff = r.mean() - t.mean();
        if se2 == 0.0 {
            if diff != 0.0 {
                return Ok(0.0);
            }
            continue;
        }
        stat += diff * diff / se2;
        q += 1.0;
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    Ok(special::chi_square_sf(stat, q))
}

/// Multi-arm borrowing weights. `Separate` yields one weight per arm;
/// the other options derive a single pooled dissimilarity and assign the
/// same weight to every arm.
pub fn multiarm_weights(
    target: &ArmSamples,
    reference: &ArmSamples,
    option: &MultiArmOption,
    spec: &WeightSpec,
) -> Result<BTreeMap<String, f64>> {
    spec.validate()?;
    let arms = matched_arms(target, reference)?;
    match option {
        MultiArmOption::Separate => {
            let mut out = BTreeMap::new();
            for arm in arms {
                let w = spec.eval_samples(&target[arm], &reference[arm])?;
                out.insert(arm.clone(), w);
            }
            Ok(out)
        }
        MultiArmOption::TreatmentDifference { treatment, control } => {
            let tt = arm_pair(target, treatment)?;
            let tc = arm_pair(target, control)?;
            let rt = arm_pair(reference, treatment)?;
            let rc = arm_pair(reference, control)?;
            let diff = (tt.mean() - tc.mean()) - (rt.mean() - rc.mean());
            let tau = libm::fabs(diff);
            let d = if spec.wants_p_value() {
                Dissimilarity {
                    tau,
                    p_value: Some(treatment_difference_pvalue(tt, tc, rt, rc, diff)?),
                }
            } else {
                Dissimilarity { tau, p_value: None }
            };
            let w = spec.eval(&d)?;
            Ok(arms.into_iter().map(|arm| (arm.clone(), w)).collect())
        }
        MultiArmOption::Overall => {
            let tau = arms
                .iter()
                .map(|arm| libm::fabs(target[*arm].mean() - reference[*arm].mean()))
                .sum();
            let d = if spec.wants_p_value() {
                Dissimilarity {
                    tau,
                    p_value: Some(overall_pvalue(target, reference)?),
                }
            } else {
                Dissimilarity { tau, p_value: None }
            };
            let w = spec.eval(&d)?;
            Ok(arms.into_iter().map(|arm| (arm.clone(), w)).collect())
        }
    }
}

/// Separate-weights variant with a distinct spec per arm, e.g. different
/// maximum borrowing for treatment and control arms.
pub fn separate_arm_weights(
    target: &ArmSamples,
    reference: &ArmSamples,
    specs: &BTreeMap<String, WeightSpec>,
) -> Result<BTreeMap<String, f64>> {
    let arms = matched_arms(target, reference)?;
    let mut out = BTreeMap::new();
    for arm in arms {
        let spec = specs
            .get(arm)
            .ok_or_else(|| Error::config(format!("no weight spec for arm '{arm}'")))?;
        out.insert(arm.clone(), spec.eval_samples(&target[arm], &reference[arm])?);
    }
    Ok(out)
}
