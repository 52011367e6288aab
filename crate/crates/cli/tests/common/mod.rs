//! Shared fixtures and independent oracles for the integration and
//! acceptance suites.

#![allow(dead_code)]
// Matrix-style index loops keep the oracle code close to its formulas.
#![allow(clippy::needless_range_loop)]

use std::path::Path;
use std::process::Output;

use clborrow_core::glm::CohortBlock;

/// Crude response counts of a three-arm target/reference study pair:
/// (cohort, arm, n, successes, is_target).
pub const STUDY_MARGINS: [(&str, &str, usize, usize, bool); 6] = [
    ("study2", "placebo", 29, 2, true),
    ("study2", "low", 55, 25, true),
    ("study2", "high", 66, 35, true),
    ("study1", "placebo", 61, 7, false),
    ("study1", "low", 125, 46, false),
    ("study1", "high", 114, 72, false),
];

/// Covariate-free blocks realizing the study margins exactly.
pub fn margin_blocks() -> Vec<CohortBlock> {
    STUDY_MARGINS
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

/// One synthetic subject row of the covariate-bearing dataset.
pub struct AdRow {
    pub cohort: &'static str,
    pub arm: &'static str,
    pub y: u8,
    pub base: f64,
    pub severe: f64,
    pub is_target: bool,
}

/// Deterministic two-study dataset with BASE and SEVERE covariates.
///
/// Outcomes follow a single logistic model shared by both cohorts
/// (intercept -1.2, low-dose 1.9, high-dose 2.5, BASE -0.05, SEVERE -0.4);
/// cohort differences in crude rates come from shifted covariate
/// distributions. Responses are thresholded against a golden-ratio
/// low-discrepancy sequence, so the data are fully reproducible without
/// randomness and the realized crude rates resemble the study margins.
pub fn ad_rows() -> Vec<AdRow> {
    const ARMS: [(&str, f64, f64); 3] = [("placebo", 0.0, 0.0), ("low", 1.0, 0.0), ("high", 0.0, 1.0)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut rows = Vec::new();
    let mut global_index = 0usize;
    for (cohort, sizes, base0, severe_mod, is_target) in [
        ("study2", [29usize, 55, 66], 16.0, 5usize, true),
        ("study1", [61, 125, 114], 20.0, 2, false),
    ] {
        for (k, &(arm, z_low, z_high)) in ARMS.iter().enumerate() {
            for i in 0..sizes[k] {
                let base = base0 + 2.0 * (i % 9) as f64;
                let severe = if i % severe_mod == 0 { 1.0 } else { 0.0 };
                let eta = -1.2 + 1.9 * z_low + 2.5 * z_high - 0.05 * base - 0.4 * severe;
                let p = 1.0 / (1.0 + (-eta).exp());
                let u = (global_index as f64 * phi).fract();
                rows.push(AdRow {
                    cohort,
                    arm,
                    y: (u < p) as u8,
                    base,
                    severe,
                    is_target,
                });
                global_index += 1;
            }
        }
    }
    rows
}

pub fn ad_blocks() -> Vec<CohortBlock> {
    let mut blocks: Vec<CohortBlock> = Vec::new();
    for row in ad_rows() {
        match blocks
            .iter_mut()
            .find(|b| b.cohort == row.cohort && b.arm == row.arm)
        {
            Some(b) => {
                b.outcomes.push(row.y);
                b.covariates.push(vec![row.base, row.severe]);
            }
            None => blocks.push(CohortBlock {
                cohort: row.cohort.to_string(),
                arm: row.arm.to_string(),
                is_target: row.is_target,
                outcomes: vec![row.y],
                covariates: vec![vec![row.base, row.severe]],
            }),
        }
    }
    blocks
}

pub fn ad_csv() -> String {
    let mut out = String::from("cohort,arm,y,BASE,SEVERE\n");
    for row in ad_rows() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.cohort, row.arm, row.y, row.base, row.severe
        ));
    }
    out
}

/// Covariate-free CSV realizing the study margins.
pub fn margins_csv() -> String {
    let mut out = String::from("cohort,arm,y\n");
    for (cohort, arm, n, s, _) in STUDY_MARGINS {
        for i in 0..n {
            out.push_str(&format!("{cohort},{arm},{}\n", (i < s) as u8));
        }
    }
    out
}

/// Runs the built binary with the given arguments.
pub fn run_clborrow<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    std::process::Command::new(env!("CARGO_BIN_EXE_clborrow"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).expect("test file writes");
}

/// Independent IRLS logistic oracle (Gauss-Jordan normal equations), shared
/// by the reduction-oracle checks. Returns coefficients and (X'WX)^-1.
pub fn irls_logistic(xs: &[Vec<f64>], ys: &[u8]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = xs.len();
    let p = xs[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..200 {
        let mut xtwx = vec![vec![0.0; p]; p];
        let mut grad = vec![0.0; p];
        for i in 0..n {
            let eta: f64 = xs[i].iter().zip(&beta).map(|(x, b)| x * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            let w = mu * (1.0 - mu);
            for a in 0..p {
                grad[a] += (ys[i] as f64 - mu) * xs[i][a];
                for b in 0..p {
                    xtwx[a][b] += w * xs[i][a] * xs[i][b];
                }
            }
        }
        let delta = gauss_solve(&xtwx, &grad);
        let mut max_step = 0.0f64;
        for a in 0..p {
            beta[a] += delta[a];
            max_step = max_step.max(delta[a].abs());
        }
        if max_step < 1e-13 {
            break;
        }
    }
    let mut xtwx = vec![vec![0.0; p]; p];
    for i in 0..n {
        let eta: f64 = xs[i].iter().zip(&beta).map(|(x, b)| x * b).sum();
        let mu = 1.0 / (1.0 + (-eta).exp());
        let w = mu * (1.0 - mu);
        for a in 0..p {
            for b in 0..p {
                xtwx[a][b] += w * xs[i][a] * xs[i][b];
            }
        }
    }
    let mut inv = vec![vec![0.0; p]; p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let col = gauss_solve(&xtwx, &e);
        for i in 0..p {
            inv[i][j] = col[i];
        }
    }
    (beta, inv)
}

pub fn gauss_solve(m: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let p = rhs.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .zip(rhs)
        .map(|(row, &r)| {
            let mut v = row.clone();
            v.push(r);
            v
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 1e-12, "oracle system is singular");
        for j in col..=p {
            a[col][j] /= d;
        }
        for i in 0..p {
            if i != col {
                let f = a[i][col];
                for j in col..=p {
                    a[i][j] -= f * a[col][j];
                }
            }
        }
    }
    a.iter().map(|row| row[p]).collect()
}
