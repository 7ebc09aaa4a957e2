//! Report serialization: per-experiment CSV schemas and the full JSON form.
//!
//! CSV schemas are part of the stable surface. One file holds the
//! measurement rows, a second the summary table:
//!
//! - cross-explain, pc-cross: `trial,projection,mean_vertex_error,param_magnitude,residual_norm`
//! - angle-curve: `components,smallest_angle`
//! - error-vs-params: `components,projection,mean_vertex_error,param_magnitude,residual_norm`
//! - measure-check: `epsilon,samples,det_lhs,det_rhs,det_rel_error,analytic,mc,mc_rel_stderr,ratio,lower_bound,unbounded`
//! - summary (all experiments): `group,metric,mean,stddev,count`
//!
//! Unavailable optional values serialize as empty CSV fields (`null` in
//! JSON). The JSON file carries the complete report — config echo, rows,
//! and summary — and deserializes back to an identical structure. All
//! writers are deterministic: same report, same bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::{ExperimentId, ExperimentReport, ReportRow};

/// Column names of the row CSV for the given experiment.
pub fn csv_headers(id: ExperimentId) -> &'static [&'static str] {
    match id {
        ExperimentId::CrossExplain | ExperimentId::PcCross => &[
            "trial",
            "projection",
            "mean_vertex_error",
            "param_magnitude",
            "residual_norm",
        ],
        ExperimentId::AngleCurve => &["components", "smallest_angle"],
        ExperimentId::ErrorVsParams => &[
            "components",
            "projection",
            "mean_vertex_error",
            "param_magnitude",
            "residual_norm",
        ],
        ExperimentId::MeasureCheck => &[
            "epsilon",
            "samples",
            "det_lhs",
            "det_rhs",
            "det_rel_error",
            "analytic",
            "mc",
            "mc_rel_stderr",
            "ratio",
            "lower_bound",
            "unbounded",
        ],
    }
}

/// Column names of the summary CSV (same for every experiment).
pub const SUMMARY_HEADERS: [&str; 5] = ["group", "metric", "mean", "stddev", "count"];

// Shortest round-trippable decimal, scientific notation where shorter —
// the same rendering serde_json uses, so CSV and JSON agree byte-for-byte.
fn float(v: f64) -> String {
    ryu::Buffer::new().format(v).to_string()
}

fn option(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn record_for(id: ExperimentId, row: &ReportRow) -> Result<Vec<String>> {
    let mismatch = || Error::InvalidValue {
        what: "report row",
        reason: format!("row kind does not belong to the {} schema", id.slug()),
    };
    match (id, row) {
        (
            ExperimentId::CrossExplain | ExperimentId::PcCross,
            ReportRow::Trial {
                trial,
                projection,
                mean_vertex_error,
                param_magnitude,
                residual_norm,
            },
        ) => Ok(vec![
            trial.to_string(),
            projection.label().to_string(),
            float(*mean_vertex_error),
            float(*param_magnitude),
            float(*residual_norm),
        ]),
        (
            ExperimentId::AngleCurve,
            ReportRow::AnglePoint {
                components,
                smallest_angle,
            },
        ) => Ok(vec![components.to_string(), float(*smallest_angle)]),
        (
            ExperimentId::ErrorVsParams,
            ReportRow::ParamSweep {
                components,
                projection,
                mean_vertex_error,
                param_magnitude,
                residual_norm,
            },
        ) => Ok(vec![
            components.to_string(),
            projection.label().to_string(),
            float(*mean_vertex_error),
            float(*param_magnitude),
            float(*residual_norm),
        ]),
        (
            ExperimentId::MeasureCheck,
            ReportRow::Measure {
                epsilon,
                samples,
                det_lhs,
                det_rhs,
                det_rel_error,
                analytic,
                mc,
                mc_rel_stderr,
                ratio,
                lower_bound,
                unbounded,
            },
        ) => Ok(vec![
            float(*epsilon),
            samples.to_string(),
            float(*det_lhs),
            float(*det_rhs),
            float(*det_rel_error),
            option(*analytic),
            option(*mc),
            option(*mc_rel_stderr),
            option(*ratio),
            option(*lower_bound),
            unbounded.to_string(),
        ]),
        _ => Err(mismatch()),
    }
}

/// Writes the measurement rows as CSV with the experiment's schema.
pub fn write_rows_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let id = report.experiment_id();
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(csv_headers(id)).map_err(csv_error)?;
    for row in &report.rows {
        csv.write_record(record_for(id, row)?).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes the summary table as CSV.
pub fn write_summary_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(SUMMARY_HEADERS).map_err(csv_error)?;
    for entry in &report.summary {
        csv.write_record([
            entry.group.clone(),
            entry.metric.clone(),
            float(entry.mean),
            float(entry.stddev),
            entry.count.to_string(),
        ])
        .map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

/// The row CSV as a string.
pub fn rows_csv_string(report: &ExperimentReport) -> Result<String> {
    let mut buf = Vec::new();
    write_rows_csv(report, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// The summary CSV as a string.
pub fn summary_csv_string(report: &ExperimentReport) -> Result<String> {
    let mut buf = Vec::new();
    write_summary_csv(report, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// The full report as pretty-printed JSON (ends with a newline).
pub fn json_string(report: &ExperimentReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    text.push('\n');
    text
}

/// Parses a report back from its JSON form.
pub fn report_from_json(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| Error::InvalidValue {
        what: "report JSON",
        reason: e.to_string(),
    })
}

/// Writes `<slug>-rows.csv`, `<slug>-summary.csv`, and `<slug>.json` into
/// `dir` (atomically, write-temp-then-rename), returning the paths.
pub fn save_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let slug = report.experiment_id().slug();
    let targets = [
        (format!("{slug}-rows.csv"), rows_csv_string(report)?),
        (format!("{slug}-summary.csv"), summary_csv_string(report)?),
        (format!("{slug}.json"), json_string(report)),
    ];
    let mut paths = Vec::with_capacity(targets.len());
    for (name, content) in targets {
        let path = dir.join(name);
        let mut temp = tempfile::NamedTempFile::new_in(dir)?;
        temp.write_all(content.as_bytes())?;
        temp.flush()?;
        temp.persist(&path).map_err(|e| Error::Io(e.error))?;
        paths.push(path);
    }
    Ok(paths)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidValue {
            what: "csv output",
            reason: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{
        run_angle_curve, run_cross_explain, run_measure_check, ExperimentConfig, MetricSummary,
    };
    use crate::subspace::DEFAULT_RANK_TOL;
    use crate::synthetic::SyntheticSpec;

    fn tiny_model() -> crate::model::ShapeModel {
        SyntheticSpec::new(10, 2, 2, vec![0.4, 1.0], 3)
            .generate()
            .unwrap()
    }

    #[test]
    fn csv_headers_are_stable() {
        assert_eq!(
            csv_headers(ExperimentId::CrossExplain),
            &[
                "trial",
                "projection",
                "mean_vertex_error",
                "param_magnitude",
                "residual_norm"
            ]
        );
        assert_eq!(
            csv_headers(ExperimentId::PcCross),
            csv_headers(ExperimentId::CrossExplain)
        );
        assert_eq!(
            csv_headers(ExperimentId::AngleCurve),
            &["components", "smallest_angle"]
        );
        assert_eq!(
            csv_headers(ExperimentId::ErrorVsParams),
            &[
                "components",
                "projection",
                "mean_vertex_error",
                "param_magnitude",
                "residual_norm"
            ]
        );
        assert_eq!(
            csv_headers(ExperimentId::MeasureCheck),
            &[
                "epsilon",
                "samples",
                "det_lhs",
                "det_rhs",
                "det_rel_error",
                "analytic",
                "mc",
                "mc_rel_stderr",
                "ratio",
                "lower_bound",
                "unbounded"
            ]
        );
        assert_eq!(
            SUMMARY_HEADERS,
            ["group", "metric", "mean", "stddev", "count"]
        );
    }

    #[test]
    fn angle_curve_csv_has_exact_known_content() {
        // Prescribed angles double as the expected file content: the
        // canonical construction reproduces them beyond CSV precision.
        let model = SyntheticSpec::new(10, 2, 2, vec![std::f64::consts::FRAC_PI_2; 2], 3)
            .generate()
            .unwrap();
        let report = run_angle_curve(&model, DEFAULT_RANK_TOL).unwrap();
        let text = rows_csv_string(&report).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("components,smallest_angle"));
        for (j, line) in lines.enumerate() {
            let (components, angle) = line.split_once(',').unwrap();
            assert_eq!(components, (j + 1).to_string());
            let angle: f64 = angle.parse().unwrap();
            assert!((angle - std::f64::consts::FRAC_PI_2).abs() <= 1e-10);
        }
    }

    #[test]
    fn trial_csv_round_trips_through_parsing() {
        let report = run_cross_explain(&tiny_model(), 3, 5, DEFAULT_RANK_TOL).unwrap();
        let text = rows_csv_string(&report).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let parsed: Vec<csv::StringRecord> = reader
            .records()
            .collect::<std::result::Result<_, _>>()
            .unwrap();
        assert_eq!(parsed.len(), report.rows.len());

        // Spot-check the first row against the in-memory values.
        let ReportRow::Trial {
            trial,
            projection,
            mean_vertex_error,
            ..
        } = &report.rows[0]
        else {
            panic!("expected trial rows");
        };
        assert_eq!(&parsed[0][0], trial.to_string().as_str());
        assert_eq!(&parsed[0][1], projection.label());
        let parsed_error: f64 = parsed[0][2].parse().unwrap();
        assert_eq!(
            parsed_error, *mean_vertex_error,
            "float text must round-trip"
        );
    }

    #[test]
    fn measure_csv_serializes_missing_values_as_empty_fields() {
        let report = ExperimentReport {
            config: ExperimentConfig {
                experiment: ExperimentId::MeasureCheck,
                model_name: "t".into(),
                synthetic: None,
                trials: None,
                seed: Some(1),
                epsilon: Some(1.0),
                samples: Some(1000),
                pc_active: None,
                rank_tol: 1e-10,
            },
            rows: vec![ReportRow::Measure {
                epsilon: 1.0,
                samples: 1000,
                det_lhs: 1e-15,
                det_rhs: 2e-15,
                det_rel_error: 0.5,
                analytic: None,
                mc: None,
                mc_rel_stderr: None,
                ratio: None,
                lower_bound: None,
                unbounded: true,
            }],
            summary: vec![],
        };
        let text = rows_csv_string(&report).unwrap();
        let data_line = text.lines().nth(1).unwrap();
        assert_eq!(data_line, "1.0,1000,1e-15,2e-15,0.5,,,,,,true");
    }

    #[test]
    fn summary_csv_lists_group_metric_rows() {
        let report = ExperimentReport {
            config: ExperimentConfig {
                experiment: ExperimentId::AngleCurve,
                model_name: "t".into(),
                synthetic: None,
                trials: None,
                seed: None,
                epsilon: None,
                samples: None,
                pc_active: None,
                rank_tol: 1e-10,
            },
            rows: vec![ReportRow::AnglePoint {
                components: 1,
                smallest_angle: 0.25,
            }],
            summary: vec![MetricSummary {
                group: "all".into(),
                metric: "smallest_angle".into(),
                mean: 0.25,
                stddev: 0.0,
                count: 1,
            }],
        };
        let text = summary_csv_string(&report).unwrap();
        assert_eq!(
            text,
            "group,metric,mean,stddev,count\nall,smallest_angle,0.25,0.0,1\n"
        );
    }

    #[test]
    fn json_round_trips_the_full_report() {
        let report = run_measure_check(&tiny_model(), 1.0, 2_000, 7, DEFAULT_RANK_TOL).unwrap();
        let text = json_string(&report);
        let parsed = report_from_json(&text).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn serialization_is_deterministic() {
        let report = run_cross_explain(&tiny_model(), 2, 9, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(
            rows_csv_string(&report).unwrap(),
            rows_csv_string(&report).unwrap()
        );
        assert_eq!(json_string(&report), json_string(&report));
    }

    #[test]
    fn save_report_writes_three_files() {
        let report = run_angle_curve(&tiny_model(), DEFAULT_RANK_TOL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = save_report(&report, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                "angle-curve-rows.csv",
                "angle-curve-summary.csv",
                "angle-curve.json"
            ]
        );
        for path in &paths {
            assert!(std::fs::metadata(path).unwrap().len() > 0);
        }
        // Re-saving over the same directory is byte-stable.
        let before = std::fs::read(&paths[0]).unwrap();
        save_report(&report, dir.path()).unwrap();
        assert_eq!(std::fs::read(&paths[0]).unwrap(), before);
    }

    #[test]
    fn mismatched_row_kind_is_rejected() {
        let mut report = run_angle_curve(&tiny_model(), DEFAULT_RANK_TOL).unwrap();
        report.config.experiment = ExperimentId::MeasureCheck;
        assert!(rows_csv_string(&report).is_err());
    }
}
