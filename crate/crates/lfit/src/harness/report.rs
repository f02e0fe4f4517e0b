//! Experiment reports and plot-data emission.
//!
//! `report.csv` is deterministic given the config and seed: it carries the
//! accuracy results and chosen localization parameters, one row per
//! (test dataset, method) attempt. Wall times are real measurements and
//! therefore live in a separate `timings.csv`, outside the determinism
//! contract.

use crate::error::{Error, Result};
use crate::harness::config::Method;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Chosen localization parameters for one (test, method) run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChosenLambda {
    pub alpha: Option<f64>,
    pub local_components: Option<usize>,
    pub initial_components: Option<usize>,
}

/// Result of one (test, method) attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Ok {
        srmse: f64,
        /// Per-parameter RMSE, ordered like the table's parameter columns.
        rmse: Vec<f64>,
        chosen: ChosenLambda,
    },
    Failed { reason: String },
}

/// One report row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub test_idx: usize,
    pub method: Method,
    pub outcome: RowOutcome,
    /// Measured wall time; written to `timings.csv` only.
    pub wall_time_ms: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub model: String,
    pub n_sims: usize,
    pub n_summaries: usize,
    pub param_names: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn param_dim(&self) -> usize {
        self.param_names.len()
    }

    /// Writes the deterministic report CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# model={}", self.model)?;
        writeln!(out, "# n_sims={}", self.n_sims)?;
        writeln!(out, "# n_summaries={}", self.n_summaries)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "test_idx".to_string(),
            "method".to_string(),
            "status".to_string(),
            "error".to_string(),
            "srmse".to_string(),
            "chosen_alpha".to_string(),
            "chosen_local_components".to_string(),
            "chosen_initial_components".to_string(),
        ];
        for name in &self.param_names {
            header.push(format!("rmse_{name}"));
        }
        w.write_record(&header).map_err(csv_err)?;

        for row in &self.rows {
            let mut record = vec![row.test_idx.to_string(), row.method.name().to_string()];
            match &row.outcome {
                RowOutcome::Ok { srmse, rmse, chosen } => {
                    record.push("ok".into());
                    record.push(String::new());
                    record.push(srmse.to_string());
                    record.push(chosen.alpha.map(|a| a.to_string()).unwrap_or_default());
                    record.push(
                        chosen
                            .local_components
                            .map(|k| k.to_string())
                            .unwrap_or_default(),
                    );
                    record.push(
                        chosen
                            .initial_components
                            .map(|k| k.to_string())
                            .unwrap_or_default(),
                    );
                    for v in rmse {
                        record.push(v.to_string());
                    }
                }
                RowOutcome::Failed { reason } => {
                    record.push("failed".into());
                    record.push(reason.clone());
                    for _ in 0..4 + self.param_dim() {
                        record.push(String::new());
                    }
                }
            }
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes wall times, one row per attempt.
    pub fn write_timings_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["test_idx", "method", "wall_time_ms"])
            .map_err(csv_err)?;
        for row in &self.rows {
            w.write_record([
                row.test_idx.to_string(),
                row.method.name().to_string(),
                format!("{:.3}", row.wall_time_ms),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a report back from `report.csv` (timings are not recoverable
    /// and come back as zero).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut model = String::from("unknown");
        let mut n_sims = 0usize;
        let mut n_summaries = 0usize;
        let mut body = String::new();
        for line in reader.lines() {
            let line = line?;
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.trim().split_once('=') {
                    match key.trim() {
                        "model" => model = value.trim().to_string(),
                        "n_sims" => {
                            n_sims = value.trim().parse().map_err(|_| {
                                Error::Format(format!("{display}: bad n_sims"))
                            })?
                        }
                        "n_summaries" => {
                            n_summaries = value.trim().parse().map_err(|_| {
                                Error::Format(format!("{display}: bad n_summaries"))
                            })?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }

        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Format(format!("{display}: {e}")))?
            .clone();
        let param_names: Vec<String> = headers
            .iter()
            .filter_map(|h| h.strip_prefix("rmse_"))
            .map(str::to_string)
            .collect();
        if param_names.is_empty() {
            return Err(Error::Format(format!(
                "{display}: header has no rmse_ columns"
            )));
        }
        let d = param_names.len();

        let mut rows = Vec::new();
        for (row_no, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Format(format!("{display}: {e}")))?;
            let field = |i: usize| record.get(i).unwrap_or("").to_string();
            let test_idx: usize = field(0).parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: row_no + 2,
                msg: "bad test_idx".into(),
            })?;
            let method: Method = field(1).parse()?;
            let outcome = match field(2).as_str() {
                "ok" => {
                    let srmse: f64 = field(4).parse().map_err(|_| Error::Parse {
                        path: display.clone(),
                        line: row_no + 2,
                        msg: "bad srmse".into(),
                    })?;
                    let parse_opt = |s: String| -> Option<f64> { s.parse().ok() };
                    let chosen = ChosenLambda {
                        alpha: parse_opt(field(5)),
                        local_components: field(6).parse().ok(),
                        initial_components: field(7).parse().ok(),
                    };
                    let mut rmse = Vec::with_capacity(d);
                    for j in 0..d {
                        rmse.push(field(8 + j).parse().map_err(|_| Error::Parse {
                            path: display.clone(),
                            line: row_no + 2,
                            msg: format!("bad rmse in column {}", 9 + j),
                        })?);
                    }
                    RowOutcome::Ok { srmse, rmse, chosen }
                }
                "failed" => RowOutcome::Failed { reason: field(3) },
                other => {
                    return Err(Error::Parse {
                        path: display.clone(),
                        line: row_no + 2,
                        msg: format!("unknown status '{other}'"),
                    })
                }
            };
            rows.push(ReportRow {
                test_idx,
                method,
                outcome,
                wall_time_ms: 0.0,
            });
        }
        Ok(Self {
            model,
            n_sims,
            n_summaries,
            param_names,
            rows,
        })
    }

    fn srmse_of(&self, test_idx: usize, method: Method) -> Option<f64> {
        self.rows.iter().find_map(|r| match &r.outcome {
            RowOutcome::Ok { srmse, .. } if r.test_idx == test_idx && r.method == method => {
                Some(*srmse)
            }
            _ => None,
        })
    }

    fn methods_present(&self) -> Vec<Method> {
        let mut present = Vec::new();
        for m in Method::ALL {
            if self.rows.iter().any(|r| r.method == m) {
                present.push(m);
            }
        }
        present
    }

    fn test_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.rows.iter().map(|r| r.test_idx).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv write failed: {e}"))
}

/// Linear-interpolation quantile of a sample (R type 7).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The local-vs-global pairs reported in `relative_srmse.csv`.
const RATIO_PAIRS: [(Method, Method); 5] = [
    (Method::LocalReg, Method::Reg),
    (Method::LocalRegOpt, Method::Reg),
    (Method::PlsOpt, Method::Pls),
    (Method::LocalPls, Method::Pls),
    (Method::LocalPlsOpt, Method::Pls),
];

/// Writes the three plot-data CSVs into `out_dir`:
///
/// * `srmse_by_method.csv` — per (test, method) SRMSE, long format,
/// * `relative_srmse.csv` — per local/global pair, median and 5%/95%
///   quantiles of the per-test SRMSE ratios,
/// * `chosen_lambda.csv` — per method, averages of the localization
///   parameters actually used.
pub fn emit_plot_data(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    if report.rows.is_empty() {
        return Err(Error::InvalidArgument("report has no rows".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    // Long-format SRMSE values.
    let path = out_dir.join("srmse_by_method.csv");
    {
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        w.write_record(["test_idx", "method", "srmse"]).map_err(csv_err)?;
        for row in &report.rows {
            if let RowOutcome::Ok { srmse, .. } = &row.outcome {
                w.write_record([
                    row.test_idx.to_string(),
                    row.method.name().to_string(),
                    srmse.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }
    written.push(path);

    // Paired ratios, aggregated over test datasets.
    let path = out_dir.join("relative_srmse.csv");
    {
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        w.write_record([
            "pair",
            "n_sims",
            "n_summaries",
            "n_tests",
            "median",
            "q05",
            "q95",
        ])
        .map_err(csv_err)?;
        let present = report.methods_present();
        for (local, global) in RATIO_PAIRS {
            if !present.contains(&local) || !present.contains(&global) {
                continue;
            }
            let mut ratios = Vec::new();
            for test_idx in report.test_indices() {
                if let (Some(l), Some(g)) =
                    (report.srmse_of(test_idx, local), report.srmse_of(test_idx, global))
                {
                    if g > 0.0 {
                        ratios.push(l / g);
                    }
                }
            }
            if ratios.is_empty() {
                continue;
            }
            w.write_record([
                format!("{}/{}", local.name(), global.name()),
                report.n_sims.to_string(),
                report.n_summaries.to_string(),
                ratios.len().to_string(),
                quantile(&ratios, 0.5).to_string(),
                quantile(&ratios, 0.05).to_string(),
                quantile(&ratios, 0.95).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    written.push(path);

    // Average localization parameters per method.
    let path = out_dir.join("chosen_lambda.csv");
    {
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        w.write_record([
            "method",
            "n_rows",
            "mean_alpha",
            "mean_local_components",
            "mean_initial_components",
        ])
        .map_err(csv_err)?;
        for method in report.methods_present() {
            let mut alphas = Vec::new();
            let mut locals = Vec::new();
            let mut initials = Vec::new();
            let mut n_rows = 0usize;
            for row in &report.rows {
                if row.method != method {
                    continue;
                }
                if let RowOutcome::Ok { chosen, .. } = &row.outcome {
                    n_rows += 1;
                    if let Some(a) = chosen.alpha {
                        alphas.push(a);
                    }
                    if let Some(k) = chosen.local_components {
                        locals.push(k as f64);
                    }
                    if let Some(k) = chosen.initial_components {
                        initials.push(k as f64);
                    }
                }
            }
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    String::new()
                } else {
                    (v.iter().sum::<f64>() / v.len() as f64).to_string()
                }
            };
            w.write_record([
                method.name().to_string(),
                n_rows.to_string(),
                mean(&alphas),
                mean(&locals),
                mean(&initials),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    written.push(path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn ok_row(test_idx: usize, method: Method, srmse: f64) -> ReportRow {
        ReportRow {
            test_idx,
            method,
            outcome: RowOutcome::Ok {
                srmse,
                rmse: vec![srmse / 2.0, srmse / 2.0],
                chosen: ChosenLambda {
                    alpha: Some(0.1),
                    local_components: None,
                    initial_components: None,
                },
            },
            wall_time_ms: 1.0,
        }
    }

    fn sample_report() -> ExperimentReport {
        ExperimentReport {
            model: "gk".into(),
            n_sims: 1000,
            n_summaries: 25,
            param_names: vec!["A".into(), "B".into()],
            rows: vec![
                ok_row(0, Method::Reg, 2.0),
                ok_row(0, Method::LocalRegOpt, 1.0),
                ok_row(1, Method::Reg, 2.0),
                ok_row(1, Method::LocalRegOpt, 2.0),
                ok_row(2, Method::Reg, 1.0),
                ok_row(2, Method::LocalRegOpt, 4.0),
                ReportRow {
                    test_idx: 3,
                    method: Method::Reg,
                    outcome: RowOutcome::Failed {
                        reason: "simulation failure, with a comma".into(),
                    },
                    wall_time_ms: 0.5,
                },
            ],
        }
    }

    #[test]
    fn report_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let report = sample_report();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let back = ExperimentReport::read_csv(&path).unwrap();
        // Wall times are not part of the CSV; compare everything else.
        assert_eq!(back.model, report.model);
        assert_eq!(back.n_sims, report.n_sims);
        assert_eq!(back.n_summaries, report.n_summaries);
        assert_eq!(back.param_names, report.param_names);
        assert_eq!(back.rows.len(), report.rows.len());
        for (a, b) in back.rows.iter().zip(&report.rows) {
            assert_eq!(a.test_idx, b.test_idx);
            assert_eq!(a.method, b.method);
            assert_eq!(a.outcome, b.outcome);
        }
    }

    #[test]
    fn report_schema_is_frozen() {
        let mut buf = Vec::new();
        sample_report().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().nth(3).unwrap();
        assert_eq!(
            header,
            "test_idx,method,status,error,srmse,chosen_alpha,chosen_local_components,\
             chosen_initial_components,rmse_A,rmse_B"
        );
    }

    #[test]
    fn quantile_basics() {
        assert_eq!(quantile(&[0.5, 1.0, 2.0], 0.5), 1.0);
        assert_eq!(quantile(&[1.0], 0.95), 1.0);
        assert_eq!(quantile(&[0.0, 1.0], 0.5), 0.5);
    }

    #[test]
    fn plot_data_files_have_frozen_schemas() {
        let dir = tempdir().unwrap();
        let report = sample_report();
        let files = emit_plot_data(&report, dir.path()).unwrap();
        assert_eq!(files.len(), 3);

        let srmse = std::fs::read_to_string(&files[0]).unwrap();
        assert!(srmse.starts_with("test_idx,method,srmse"));
        assert_eq!(srmse.lines().count(), 7); // 6 ok rows + header

        let relative = std::fs::read_to_string(&files[1]).unwrap();
        assert!(relative.starts_with("pair,n_sims,n_summaries,n_tests,median,q05,q95"));
        // Median of {1/2, 1, 4} is 1.
        let row = relative.lines().nth(1).unwrap();
        assert!(row.starts_with("localRegopt/Reg,1000,25,3,1,"));

        let lambda = std::fs::read_to_string(&files[2]).unwrap();
        assert!(lambda.starts_with(
            "method,n_rows,mean_alpha,mean_local_components,mean_initial_components"
        ));
    }

    #[test]
    fn single_method_report_yields_header_only_ratios() {
        let dir = tempdir().unwrap();
        let report = ExperimentReport {
            model: "toy".into(),
            n_sims: 100,
            n_summaries: 1,
            param_names: vec!["theta".into()],
            rows: vec![ReportRow {
                test_idx: 0,
                method: Method::Reg,
                outcome: RowOutcome::Ok {
                    srmse: 1.0,
                    rmse: vec![1.0],
                    chosen: ChosenLambda::default(),
                },
                wall_time_ms: 1.0,
            }],
        };
        emit_plot_data(&report, dir.path()).unwrap();
        let relative = std::fs::read_to_string(dir.path().join("relative_srmse.csv")).unwrap();
        assert_eq!(relative.lines().count(), 1); // header only
    }
}
