//! Dataset ingestion and serialization: CSV with header
//! `cohort,arm,y,<covariate...>` and strictly binary outcomes.

use std::collections::BTreeMap;
use std::path::Path;

use clborrow_core::glm::CohortBlock;
use clborrow_core::weights::{ArmSamples, OutcomeSample};

use crate::error::{CliError, CliResult};

type BlockContents = (Vec<u8>, Vec<Vec<f64>>);

#[derive(Debug, Clone, PartialEq)]
pub struct DataRow {
    pub cohort: String,
    pub arm: String,
    pub y: u8,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariate_names: Vec<String>,
    pub rows: Vec<DataRow>,
}

impl Dataset {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::data(format!("cannot read dataset '{}': {e}", path.display()))
        })?;
        Self::from_csv(&text)
    }

    pub fn from_csv(text: &str) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| CliError::data(format!("cannot read CSV header: {e}")))?
            .clone();
        let columns: Vec<String> = header.iter().map(str::to_string).collect();
        if columns.len() < 3 || columns[0] != "cohort" || columns[1] != "arm" || columns[2] != "y"
        {
            return Err(CliError::data(format!(
                "header must start with 'cohort,arm,y', got '{}'",
                columns.join(",")
            )));
        }
        for (i, name) in columns.iter().enumerate() {
            if columns[..i].contains(name) {
                return Err(CliError::data(format!("duplicate column '{name}' in header")));
            }
        }
        let covariate_names: Vec<String> = columns[3..].to_vec();

        let mut rows = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let line = idx + 2; // 1-based, after the header
            let record =
                record.map_err(|e| CliError::data(format!("cannot parse CSV row {line}: {e}")))?;
            if record.len() != columns.len() {
                return Err(CliError::data(format!(
                    "row {line} has {} fields, expected {}",
                    record.len(),
                    columns.len()
                )));
            }
            let y = match record[2].trim() {
                "0" => 0u8,
                "1" => 1u8,
                other => {
                    return Err(CliError::data(format!(
                        "row {line}, column 'y': expected 0 or 1, got '{other}'"
                    )));
                }
            };
            let mut covariates = Vec::with_capacity(covariate_names.len());
            for (k, name) in covariate_names.iter().enumerate() {
                let raw = record[3 + k].trim();
                let value: f64 = raw.parse().map_err(|_| {
                    CliError::data(format!(
                        "row {line}, column '{name}': cannot parse '{raw}' as a number"
                    ))
                })?;
                if !value.is_finite() {
                    return Err(CliError::data(format!(
                        "row {line}, column '{name}': value must be finite"
                    )));
                }
                covariates.push(value);
            }
            rows.push(DataRow {
                cohort: record[0].to_string(),
                arm: record[1].to_string(),
                y,
                covariates,
            });
        }
        if rows.is_empty() {
            return Err(CliError::data("dataset has a header but no data rows"));
        }
        Ok(Dataset {
            covariate_names,
            rows,
        })
    }

    /// Inverse of `from_csv`; part of the format contract, exercised by the
    /// round-trip tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cohort,arm,y");
        for name in &self.covariate_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.cohort);
            out.push(',');
            out.push_str(&row.arm);
            out.push(',');
            out.push_str(if row.y == 1 { "1" } else { "0" });
            for v in &row.covariates {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn cohorts(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for row in &self.rows {
            if !seen.contains(&row.cohort) {
                seen.push(row.cohort.clone());
            }
        }
        seen.sort_unstable();
        seen
    }

    /// Per-arm outcome samples of one cohort.
    pub fn arm_samples(&self, cohort: &str) -> CliResult<ArmSamples> {
        let mut grouped: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        for row in self.rows.iter().filter(|r| r.cohort == cohort) {
            grouped.entry(row.arm.clone()).or_default().push(row.y);
        }
        if grouped.is_empty() {
            return Err(CliError::data(format!(
                "cohort '{cohort}' not present in the dataset"
            )));
        }
        grouped
            .into_iter()
            .map(|(arm, values)| Ok((arm, OutcomeSample::new(values)?)))
            .collect()
    }

    /// Cohort-by-arm blocks for the regression path, sorted by (cohort, arm).
    pub fn blocks(&self, target_cohort: &str) -> CliResult<Vec<CohortBlock>> {
        if !self.rows.iter().any(|r| r.cohort == target_cohort) {
            return Err(CliError::data(format!(
                "target cohort '{target_cohort}' not present in the dataset"
            )));
        }
        let mut grouped: BTreeMap<(String, String), BlockContents> = BTreeMap::new();
        for row in &self.rows {
            let entry = grouped
                .entry((row.cohort.clone(), row.arm.clone()))
                .or_default();
            entry.0.push(row.y);
            entry.1.push(row.covariates.clone());
        }
        Ok(grouped
            .into_iter()
            .map(|((cohort, arm), (outcomes, covariates))| CohortBlock {
                is_target: cohort == target_cohort,
                cohort,
                arm,
                outcomes,
                covariates: if self.covariate_names.is_empty() {
                    Vec::new()
                } else {
                    covariates
                },
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "cohort,arm,y,base\nstudy2,placebo,1,17.5\nstudy2,placebo,0,20\nstudy1,placebo,0,22\n";

    #[test]
    fn parses_and_round_trips() {
        let d = Dataset::from_csv(SMALL).unwrap();
        assert_eq!(d.covariate_names, vec!["base"]);
        assert_eq!(d.rows.len(), 3);
        assert_eq!(d.rows[0].y, 1);
        assert_eq!(d.rows[0].covariates, vec![17.5]);
        let text = d.to_csv();
        let back = Dataset::from_csv(&text).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(Dataset::from_csv("a,b,c\n1,2,3\n").is_err());
        let err = Dataset::from_csv("cohort,arm,y,base,base\ns,a,1,1,2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate column 'base'"));
    }

    #[test]
    fn rejects_empty_data_section() {
        let err = Dataset::from_csv("cohort,arm,y\n").unwrap_err();
        assert!(err.to_string().contains("no data rows"));
    }

    #[test]
    fn rejects_non_binary_outcome_naming_the_row() {
        let err = Dataset::from_csv("cohort,arm,y\ns,a,1\ns,a,2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3") && msg.contains("'2'"), "{msg}");
    }

    #[test]
    fn rejects_unparseable_covariate_with_coordinates() {
        let err = Dataset::from_csv("cohort,arm,y,base\ns,a,1,oops\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("'base'"), "{msg}");
    }

    proptest::proptest! {
        #[test]
        fn csv_round_trips_for_arbitrary_datasets(
            dim in 0usize..3,
            raw in proptest::collection::vec(
                ("[a-z][a-z0-9_]{0,7}", "[a-z][a-z0-9_]{0,7}", 0u8..=1,
                 proptest::collection::vec(-1.0e6..1.0e6f64, 3)),
                1..40,
            ),
        ) {
            let covariate_names: Vec<String> =
                (0..dim).map(|k| format!("c{k}")).collect();
            let rows: Vec<DataRow> = raw
                .into_iter()
                .map(|(cohort, arm, y, values)| DataRow {
                    cohort,
                    arm,
                    y,
                    covariates: values[..dim].to_vec(),
                })
                .collect();
            let dataset = Dataset { covariate_names, rows };
            let back = Dataset::from_csv(&dataset.to_csv()).unwrap();
            proptest::prop_assert_eq!(dataset, back);
        }
    }

    #[test]
    fn groups_blocks_and_samples() {
        let d = Dataset::from_csv(SMALL).unwrap();
        let samples = d.arm_samples("study2").unwrap();
        assert_eq!(samples["placebo"].n(), 2);
        assert_eq!(samples["placebo"].successes(), 1);
        let blocks = d.blocks("study2").unwrap();
        assert_eq!(blocks.len(), 2);
        assert!(blocks.iter().any(|b| b.is_target && b.cohort == "study2"));
        assert!(d.arm_samples("nope").is_err());
        assert!(d.blocks("nope").is_err());
    }
}
