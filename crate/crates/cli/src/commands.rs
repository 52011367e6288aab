//! Subcommand implementations: each resolves its inputs from the config and
//! dataset, runs the corresponding library path, and produces a result
//! document plus an optional CSV table.

use std::collections::BTreeMap;

use clborrow_core::expfam::{
    clrt, composite_mle, wald_ci, wald_test, Bernoulli, CompositeFit, TestResult,
    WeightedCohorts,
};
use clborrow_core::glm::{
    build_design, coef_inference, fit_weighted_logistic, gcomp_marginals, GlmData,
};
use clborrow_core::npp::{npp_posterior, BinomialCounts, NppResult};
use clborrow_core::study::{
    ess, sweep_reference_mean, sweep_reference_size, tipping_scan, Ess, ReferenceAxis,
    SweepConfig, SweepMethods, SweepRow, TippingModel, TippingReport,
};
use clborrow_core::weights::{
    mean_difference, multiarm_weights, separate_arm_weights, welch_pvalue, MultiArmOption,
    OutcomeSample,
};
use serde::Serialize;

use crate::config::{RunConfig, TippingPath};
use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::output::{render_json, sweep_csv, tipping_csv, tool_info, Document, SCHEMA_VERSION};

pub struct CommandOutput {
    pub json: String,
    pub table: Option<String>,
}

fn document<T: Serialize>(command: &str, config: &RunConfig, result: T) -> String {
    render_json(&Document {
        schema_version: SCHEMA_VERSION,
        tool: tool_info(),
        command,
        config,
        result,
    })
}

fn require_dataset<'a>(dataset: Option<&'a Dataset>, command: &str) -> CliResult<&'a Dataset> {
    dataset.ok_or_else(|| CliError::config(format!("'{command}' requires --data")))
}

/// Target sample plus one sample per reference cohort for the scalar
/// (single-arm) subcommands.
struct ScalarSelection {
    arm: String,
    target_cohort: String,
    target: OutcomeSample,
    references: Vec<(String, OutcomeSample)>,
}

fn select_scalar(dataset: &Dataset, config: &RunConfig) -> CliResult<ScalarSelection> {
    let target_cohort = config
        .target_cohort
        .clone()
        .ok_or_else(|| CliError::config("config must name target_cohort"))?;
    let target_arms = dataset.arm_samples(&target_cohort)?;
    let arm = match &config.arm {
        Some(arm) => arm.clone(),
        None if target_arms.len() == 1 => target_arms.keys().next().unwrap().clone(),
        None => {
            return Err(CliError::config(format!(
                "dataset has arms {:?}; config must name the arm to analyze",
                target_arms.keys().collect::<Vec<_>>()
            )));
        }
    };
    let target = target_arms
        .get(&arm)
        .ok_or_else(|| {
            CliError::data(format!(
                "arm '{arm}' not present in target cohort '{target_cohort}'"
            ))
        })?
        .clone();
    let mut references = Vec::new();
    for cohort in dataset.cohorts() {
        if cohort == target_cohort {
            continue;
        }
        let arms = dataset.arm_samples(&cohort)?;
        let sample = arms.get(&arm).ok_or_else(|| {
            CliError::data(format!("arm '{arm}' not present in reference cohort '{cohort}'"))
        })?;
        references.push((cohort, sample.clone()));
    }
    Ok(ScalarSelection {
        arm,
        target_cohort,
        target,
        references,
    })
}

/// Borrowing weight for one reference sample: the configured fixed weight or
/// the configured weight function.
fn scalar_weight(
    config: &RunConfig,
    target: &OutcomeSample,
    reference: &OutcomeSample,
) -> CliResult<f64> {
    if let Some(w) = config.fixed_weight {
        return Ok(w);
    }
    let spec = config.weight.as_ref().ok_or_else(|| {
        CliError::config("config must provide either 'weight' or 'fixed_weight'")
    })?;
    Ok(spec.eval_samples(target, reference)?)
}

#[derive(Debug, Serialize)]
struct CountsOut {
    cohort: String,
    successes: usize,
    trials: usize,
    mean: f64,
}

fn counts_out(cohort: &str, sample: &OutcomeSample) -> CountsOut {
    CountsOut {
        cohort: cohort.to_string(),
        successes: sample.successes(),
        trials: sample.n(),
        mean: sample.mean(),
    }
}

#[derive(Debug, Serialize)]
struct ReferenceOut {
    #[serde(flatten)]
    counts: CountsOut,
    weight: f64,
    tau: f64,
    welch_p_value: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TestOut {
    statistic: f64,
    scaled_statistic: f64,
    nu: f64,
    p_value: f64,
}

impl From<TestResult> for TestOut {
    fn from(t: TestResult) -> Self {
        TestOut {
            statistic: t.statistic,
            scaled_statistic: t.scaled_statistic,
            nu: t.nu,
            p_value: t.p_value,
        }
    }
}

#[derive(Debug, Serialize)]
struct FitReport {
    arm: String,
    target: CountsOut,
    references: Vec<ReferenceOut>,
    /// The single reference's weight, when there is exactly one.
    weight: Option<f64>,
    p_hat: f64,
    theta_hat: f64,
    boundary: bool,
    weighted_n: f64,
    h: Option<f64>,
    j: Option<f64>,
    g: Option<f64>,
    variance: Option<f64>,
    se: Option<f64>,
    level: f64,
    ci: Option<(f64, f64)>,
    p0: f64,
    clrt: Option<TestOut>,
    wald: Option<TestOut>,
    ess: Option<Ess>,
}

fn scalar_fit_pieces(
    config: &RunConfig,
    selection: &ScalarSelection,
) -> CliResult<(Vec<ReferenceOut>, WeightedCohorts, CompositeFit)> {
    let mut refs_out = Vec::new();
    let mut weighted = Vec::new();
    for (cohort, sample) in &selection.references {
        let weight = scalar_weight(config, &selection.target, sample)?;
        let welch = welch_pvalue(&selection.target, sample)
            .ok()
            .and_then(|d| d.p_value);
        refs_out.push(ReferenceOut {
            counts: counts_out(cohort, sample),
            weight,
            tau: mean_difference(&selection.target, sample),
            welch_p_value: welch,
        });
        weighted.push((sample.clone(), weight));
    }
    let cohorts = WeightedCohorts::target_with_references(selection.target.clone(), weighted)?;
    let fit = composite_mle(&cohorts, &Bernoulli)?;
    Ok((refs_out, cohorts, fit))
}

pub fn run_fit(config: &RunConfig, dataset: Option<&Dataset>) -> CliResult<CommandOutput> {
    let dataset = require_dataset(dataset, "fit")?;
    let selection = select_scalar(dataset, config)?;
    let (references, cohorts, fit) = scalar_fit_pieces(config, &selection)?;
    let p0 = config.p0.unwrap_or_else(|| selection.target.mean());

    let (ci, clrt_out, wald_out, ess_out) = if fit.boundary {
        (None, None, None, None)
    } else {
        let ci = wald_ci(&fit, config.level)?;
        let ratio_test = clrt(&cohorts, &Bernoulli, p0)?;
        let wald = wald_test(&fit, p0)?;
        let solo =
            WeightedCohorts::target_with_references(selection.target.clone(), Vec::new())?;
        let solo_fit = composite_mle(&solo, &Bernoulli)?;
        let ess_out = match (solo_fit.information, fit.information) {
            (Some(solo_info), Some(info)) => Some(ess(
                solo_info.variance,
                info.variance,
                selection.target.n(),
            )?),
            _ => None,
        };
        (Some(ci), Some(ratio_test.into()), Some(wald.into()), ess_out)
    };

    let info = fit.information;
    let report = FitReport {
        arm: selection.arm.clone(),
        target: counts_out(&selection.target_cohort, &selection.target),
        weight: match references.as_slice() {
            [only] => Some(only.weight),
            _ => None,
        },
        references,
        p_hat: fit.mu_hat,
        theta_hat: fit.theta_hat,
        boundary: fit.boundary,
        weighted_n: fit.weighted_n,
        h: info.map(|i| i.h),
        j: info.map(|i| i.j),
        g: info.map(|i| i.g),
        variance: info.map(|i| i.variance),
        se: fit.se(),
        level: config.level,
        ci,
        p0,
        clrt: clrt_out,
        wald: wald_out,
        ess: ess_out,
    };
    Ok(CommandOutput {
        json: document("fit", config, report),
        table: None,
    })
}

#[derive(Debug, Serialize)]
struct EssReport {
    mode: &'static str,
    n_target: usize,
    var_target_only: f64,
    var_combined: f64,
    ess: Ess,
}

pub fn run_ess(config: &RunConfig, dataset: Option<&Dataset>) -> CliResult<CommandOutput> {
    let section = config.ess.clone().unwrap_or_default();
    let report = match (
        section.n_target,
        section.var_target_only,
        section.var_combined,
    ) {
        (Some(n), Some(var_t), Some(var_c)) => EssReport {
            mode: "formula",
            n_target: n,
            var_target_only: var_t,
            var_combined: var_c,
            ess: ess(var_t, var_c, n)?,
        },
        (None, None, None) => {
            let dataset = require_dataset(dataset, "ess (without explicit variances)")?;
            let selection = select_scalar(dataset, config)?;
            let (_, _, fit) = scalar_fit_pieces(config, &selection)?;
            let solo =
                WeightedCohorts::target_with_references(selection.target.clone(), Vec::new())?;
            let solo_fit = composite_mle(&solo, &Bernoulli)?;
            let info = fit.information.ok_or_else(|| {
                CliError::Numerical("combined estimate sits on the boundary".into())
            })?;
            let solo_info = solo_fit.information.ok_or_else(|| {
                CliError::Numerical("target-only estimate sits on the boundary".into())
            })?;
            EssReport {
                mode: "binomial",
                n_target: selection.target.n(),
                var_target_only: solo_info.variance,
                var_combined: info.variance,
                ess: ess(solo_info.variance, info.variance, selection.target.n())?,
            }
        }
        _ => {
            return Err(CliError::config(
                "ess section must provide all of n_target, var_target_only, var_combined, or none of them",
            ));
        }
    };
    Ok(CommandOutput {
        json: document("ess", config, report),
        table: None,
    })
}

#[derive(Debug, Serialize)]
struct NppReport {
    target: BinomialCounts,
    reference: BinomialCounts,
    p0: f64,
    #[serde(flatten)]
    result: NppResult,
}

pub fn run_npp(config: &RunConfig, dataset: Option<&Dataset>) -> CliResult<CommandOutput> {
    let section = &config.npp;
    let (target, reference, default_p0) = match (&section.target, &section.reference) {
        (Some(t), Some(r)) => {
            let target = BinomialCounts::new(t.successes, t.trials)?;
            let reference = BinomialCounts::new(r.successes, r.trials)?;
            let p0 = t.successes as f64 / t.trials as f64;
            (target, reference, p0)
        }
        (None, None) => {
            let dataset = require_dataset(dataset, "npp (without explicit counts)")?;
            let selection = select_scalar(dataset, config)?;
            let [(_, reference)] = selection.references.as_slice() else {
                return Err(CliError::config(
                    "npp requires exactly one reference cohort in the dataset",
                ));
            };
            (
                BinomialCounts::new(
                    selection.target.successes() as u64,
                    selection.target.n() as u64,
                )?,
                BinomialCounts::new(reference.successes() as u64, reference.n() as u64)?,
                selection.target.mean(),
            )
        }
        _ => {
            return Err(CliError::config(
                "npp section must provide both target and reference counts, or neither",
            ));
        }
    };
    let p0 = config.p0.unwrap_or(default_p0);
    let result = npp_posterior(&target, &reference, &section.config, p0)?;
    let report = NppReport {
        target,
        reference,
        p0,
        result,
    };
    Ok(CommandOutput {
        json: document("npp", config, report),
        table: None,
    })
}

#[derive(Debug, Serialize)]
struct CoefOut {
    name: String,
    estimate: f64,
    se: f64,
    ci: (f64, f64),
    p_value: f64,
}

#[derive(Debug, Serialize)]
struct GlmDiagnostics {
    iterations: usize,
    converged: bool,
    max_score_norm: f64,
}

#[derive(Debug, Serialize)]
struct GlmReport {
    control_arm: String,
    /// Borrowing weights per reference cohort and arm.
    weights: BTreeMap<String, BTreeMap<String, f64>>,
    columns: Vec<String>,
    coefficients: Vec<CoefOut>,
    marginals: clborrow_core::glm::MarginalResult,
    level: f64,
    diagnostics: GlmDiagnostics,
}

/// Per-reference-cohort, per-arm weights for the regression path.
fn glm_weights(
    config: &RunConfig,
    dataset: &Dataset,
    target_cohort: &str,
) -> CliResult<BTreeMap<String, BTreeMap<String, f64>>> {
    let target_arms = dataset.arm_samples(target_cohort)?;
    let mut out = BTreeMap::new();
    for cohort in dataset.cohorts() {
        if cohort == target_cohort {
            continue;
        }
        let reference_arms = dataset.arm_samples(&cohort)?;
        let weights = if let Some(fixed) = &config.fixed_weights {
            let mut map = BTreeMap::new();
            for arm in reference_arms.keys() {
                let w = fixed.get(arm).ok_or_else(|| {
                    CliError::config(format!("fixed_weights has no entry for arm '{arm}'"))
                })?;
                map.insert(arm.clone(), *w);
            }
            map
        } else if let Some(specs) = &config.arm_weights {
            separate_arm_weights(&target_arms, &reference_arms, specs)?
        } else if let Some(spec) = &config.weight {
            let option = config
                .multiarm
                .clone()
                .unwrap_or(MultiArmOption::Separate);
            multiarm_weights(&target_arms, &reference_arms, &option, spec)?
        } else {
            return Err(CliError::config(
                "config must provide 'weight', 'arm_weights', or 'fixed_weights' for glm",
            ));
        };
        out.insert(cohort, weights);
    }
    Ok(out)
}

fn glm_data(
    dataset: &Dataset,
    target_cohort: &str,
    control_arm: &str,
    weights: &BTreeMap<String, BTreeMap<String, f64>>,
) -> CliResult<GlmData> {
    let blocks = dataset.blocks(target_cohort)?;
    let mut flat = BTreeMap::new();
    for (cohort, arms) in weights {
        for (arm, w) in arms {
            flat.insert((cohort.clone(), arm.clone()), *w);
        }
    }
    Ok(build_design(
        &blocks,
        &dataset.covariate_names,
        control_arm,
        &flat,
    )?)
}

pub fn run_glm(config: &RunConfig, dataset: Option<&Dataset>) -> CliResult<CommandOutput> {
    let dataset = require_dataset(dataset, "glm")?;
    let target_cohort = config
        .target_cohort
        .clone()
        .ok_or_else(|| CliError::config("config must name target_cohort"))?;
    let control_arm = config
        .control_arm
        .clone()
        .ok_or_else(|| CliError::config("config must name control_arm"))?;

    let weights = glm_weights(config, dataset, &target_cohort)?;
    let data = glm_data(dataset, &target_cohort, &control_arm, &weights)?;
    let fit = fit_weighted_logistic(&data.rows)?;
    let inference = coef_inference(&fit, config.level)?;
    let marginals = gcomp_marginals(&fit, &data.target_design(), &data.coding, config.level)?;

    let report = GlmReport {
        control_arm,
        weights,
        columns: data.column_names.clone(),
        coefficients: data
            .column_names
            .iter()
            .zip(&inference)
            .map(|(name, c)| CoefOut {
                name: name.clone(),
                estimate: c.estimate,
                se: c.se,
                ci: c.ci,
                p_value: c.p_value,
            })
            .collect(),
        marginals,
        level: config.level,
        diagnostics: GlmDiagnostics {
            iterations: fit.iterations,
            converged: fit.converged,
            max_score_norm: fit.max_score_norm,
        },
    };
    Ok(CommandOutput {
        json: document("glm", config, report),
        table: None,
    })
}

#[derive(Debug, Serialize)]
struct SweepReport {
    axis: &'static str,
    p0: f64,
    rows: Vec<SweepRow>,
}

fn sweep_config(config: &RunConfig, axis: ReferenceAxis) -> SweepConfig {
    let section = &config.sweep;
    SweepConfig {
        target_n: section.target_n,
        target_mean: section.target_mean,
        axis,
        points: section.points,
        methods: SweepMethods {
            w1: Some(section.w1),
            w2: Some(section.w2),
            w3: Some(section.w3),
            npp: Some(section.npp),
        },
        p0: section.p0.or(config.p0),
    }
}

fn sweep_output(
    command: &str,
    axis_name: &'static str,
    config: &RunConfig,
    rows: Vec<SweepRow>,
) -> CommandOutput {
    let p0 = config.sweep.p0.or(config.p0).unwrap_or_else(|| {
        clborrow_core::study::construct_binary_cohort(
            config.sweep.target_n,
            config.sweep.target_mean,
        )
        .map(|s| s.mean())
        .unwrap_or(config.sweep.target_mean)
    });
    let table = sweep_csv(axis_name, &rows);
    let report = SweepReport {
        axis: axis_name,
        p0,
        rows,
    };
    CommandOutput {
        json: document(command, config, report),
        table: Some(table),
    }
}

pub fn run_sweep_mean(config: &RunConfig, _dataset: Option<&Dataset>) -> CliResult<CommandOutput> {
    let section = &config.sweep;
    let core_config = sweep_config(
        config,
        ReferenceAxis::Mean {
            reference_n: section.reference_n,
            tau_min: section.tau_min,
            tau_max: section.tau_max,
        },
    );
    let rows = sweep_reference_mean(&core_config)?;
    Ok(sweep_output("sweep-mean", "tau", config, rows))
}

pub fn run_sweep_size(config: &RunConfig, _dataset: Option<&Dataset>) -> CliResult<CommandOutput> {
    let section = &config.sweep;
    let core_config = sweep_config(
        config,
        ReferenceAxis::Size {
            reference_mean: section.reference_mean,
            n_min: section.n_min,
            n_max: section.n_max,
        },
    );
    let rows = sweep_reference_size(&core_config)?;
    Ok(sweep_output("sweep-size", "n_k", config, rows))
}

#[derive(Debug, Serialize)]
struct TippingOut {
    path: &'static str,
    test_arm: Option<String>,
    #[serde(flatten)]
    report: TippingReport,
}

pub fn run_tipping(config: &RunConfig, dataset: Option<&Dataset>) -> CliResult<CommandOutput> {
    let dataset = require_dataset(dataset, "tipping")?;
    let section = &config.tipping;
    let grid = section.grid();
    let (report, path, test_arm) = match section.path {
        TippingPath::Binomial => {
            let selection = select_scalar(dataset, config)?;
            let [(_, reference)] = selection.references.as_slice() else {
                return Err(CliError::config(
                    "binomial tipping requires exactly one reference cohort",
                ));
            };
            let p0 = config.p0.unwrap_or_else(|| selection.target.mean());
            let model = TippingModel::Binomial {
                target: selection.target.clone(),
                reference: reference.clone(),
                p0,
            };
            (
                tipping_scan(&model, &grid, &section.weight_mode(), config.alpha)?,
                "binomial",
                None,
            )
        }
        TippingPath::Glm => {
            let target_cohort = config
                .target_cohort
                .clone()
                .ok_or_else(|| CliError::config("config must name target_cohort"))?;
            let control_arm = config
                .control_arm
                .clone()
                .ok_or_else(|| CliError::config("config must name control_arm"))?;
            let test_arm = section
                .test_arm
                .clone()
                .ok_or_else(|| CliError::config("tipping.test_arm is required on the glm path"))?;
            let model = TippingModel::Logistic {
                blocks: dataset.blocks(&target_cohort)?,
                covariate_names: dataset.covariate_names.clone(),
                control_arm,
                test_arm: test_arm.clone(),
            };
            (
                tipping_scan(&model, &grid, &section.weight_mode(), config.alpha)?,
                "glm",
                Some(test_arm),
            )
        }
    };
    let table = tipping_csv(&report);
    let out = TippingOut {
        path,
        test_arm,
        report,
    };
    Ok(CommandOutput {
        json: document("tipping", config, out),
        table: Some(table),
    })
}
