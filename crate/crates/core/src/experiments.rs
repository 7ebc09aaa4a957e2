//! Scripted experiments over a model, emitting tabular reports.
//!
//! Each run produces an [`ExperimentReport`]: the echoed configuration
//! (enough to regenerate the rows bit-for-bit when the model came from a
//! [`SyntheticSpec`]), one row per measurement, and per-group summary
//! statistics. Trials use per-index derived seeds, so row order and content
//! are deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BasisSide, Selection, ShapeModel};
use crate::projection::{param_magnitude, project};
use crate::subspace::{determinant_identity_check, mc_measure_estimate, smallest_angle_curve};
use crate::synthetic::{derive_seed, first_pc_latents, sample_latents, SyntheticSpec};

/// The five scripted experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    /// Full-latent shapes explained by each block alone and by both.
    CrossExplain,
    /// Leading-component shapes of one block projected onto the other.
    PcCross,
    /// Smallest principal angle versus component count.
    AngleCurve,
    /// Reconstruction error versus components kept, same meshes throughout.
    ErrorVsParams,
    /// Determinant identity and Monte Carlo measure amplification.
    MeasureCheck,
}

impl ExperimentId {
    /// Stable kebab-case name, used in file names and CLI arguments.
    pub fn slug(self) -> &'static str {
        match self {
            ExperimentId::CrossExplain => "cross-explain",
            ExperimentId::PcCross => "pc-cross",
            ExperimentId::AngleCurve => "angle-curve",
            ExperimentId::ErrorVsParams => "error-vs-params",
            ExperimentId::MeasureCheck => "measure-check",
        }
    }
}

/// Full parameter echo for one experiment run. Fields that an experiment
/// does not use stay `None` and are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Name of the model the run used.
    pub model_name: String,
    /// Recipe of the model when it was generated synthetically; present
    /// if and only if the report can be regenerated from the config alone.
    pub synthetic: Option<SyntheticSpec>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    /// Ball radius for the measure check.
    pub epsilon: Option<f64>,
    /// Monte Carlo sample count for the measure check.
    pub samples: Option<u64>,
    /// Leading components varied by the pc-cross experiment.
    pub pc_active: Option<usize>,
    /// Rank tolerance threaded through every orthonormalization.
    pub rank_tol: f64,
}

/// Defaults for unset config fields.
const DEFAULT_TRIALS: u64 = 100;
const DEFAULT_EPSILON: f64 = 1.0;
const DEFAULT_SAMPLES: u64 = 100_000;
const DEFAULT_PC_ACTIVE: usize = 2;

/// One report measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportRow {
    /// One projection of one trial shape.
    Trial {
        trial: u64,
        /// Block(s) the shape was projected onto. For pc-cross rows the
        /// source block is the opposite one.
        projection: Selection,
        /// Mean per-vertex error in mm.
        mean_vertex_error: f64,
        /// Norm of the recovered coefficients.
        param_magnitude: f64,
        /// l2 residual over all coordinates.
        residual_norm: f64,
    },
    /// Smallest principal angle between j-component prefixes.
    AnglePoint {
        components: usize,
        smallest_angle: f64,
    },
    /// Mean metrics over all trials at one component count.
    ParamSweep {
        components: usize,
        projection: Selection,
        mean_vertex_error: f64,
        param_magnitude: f64,
        residual_norm: f64,
    },
    /// Determinant identity plus analytic and Monte Carlo measures.
    Measure {
        epsilon: f64,
        samples: u64,
        det_lhs: f64,
        det_rhs: f64,
        det_rel_error: f64,
        /// None when the amplification is unbounded.
        analytic: Option<f64>,
        mc: Option<f64>,
        mc_rel_stderr: Option<f64>,
        /// mc / analytic.
        ratio: Option<f64>,
        /// μ₀ / sin θ₁.
        lower_bound: Option<f64>,
        unbounded: bool,
    },
}

/// Mean and sample standard deviation of one metric over one row group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Projection label, or "all" for ungrouped experiments.
    pub group: String,
    pub metric: String,
    pub mean: f64,
    pub stddev: f64,
    pub count: u64,
}

/// Config echo, measurement rows, and summary statistics for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<MetricSummary>,
}

impl ExperimentReport {
    pub fn experiment_id(&self) -> ExperimentId {
        self.config.experiment
    }
}

/// Explains full-latent shapes with each block alone and with both blocks.
pub fn run_cross_explain(
    model: &ShapeModel,
    trials: u64,
    seed: u64,
    rank_tol: f64,
) -> Result<ExperimentReport> {
    run_on_model(
        &ExperimentConfig {
            experiment: ExperimentId::CrossExplain,
            model_name: model.name().to_string(),
            synthetic: None,
            trials: Some(trials),
            seed: Some(seed),
            epsilon: None,
            samples: None,
            pc_active: None,
            rank_tol,
        },
        model,
    )
}

/// Projects leading-component shapes of each block onto the opposite block.
pub fn run_pc_cross(
    model: &ShapeModel,
    trials: u64,
    seed: u64,
    rank_tol: f64,
) -> Result<ExperimentReport> {
    run_on_model(
        &ExperimentConfig {
            experiment: ExperimentId::PcCross,
            model_name: model.name().to_string(),
            synthetic: None,
            trials: Some(trials),
            seed: Some(seed),
            epsilon: None,
            samples: None,
            pc_active: Some(DEFAULT_PC_ACTIVE),
            rank_tol,
        },
        model,
    )
}

/// Tabulates the smallest principal angle for every component-count prefix.
pub fn run_angle_curve(model: &ShapeModel, rank_tol: f64) -> Result<ExperimentReport> {
    run_on_model(
        &ExperimentConfig {
            experiment: ExperimentId::AngleCurve,
            model_name: model.name().to_string(),
            synthetic: None,
            trials: None,
            seed: None,
            epsilon: None,
            samples: None,
            pc_active: None,
            rank_tol,
        },
        model,
    )
}

/// Reconstructs the same sampled meshes at every component count.
pub fn run_error_vs_params(
    model: &ShapeModel,
    trials: u64,
    seed: u64,
    rank_tol: f64,
) -> Result<ExperimentReport> {
    run_on_model(
        &ExperimentConfig {
            experiment: ExperimentId::ErrorVsParams,
            model_name: model.name().to_string(),
            synthetic: None,
            trials: Some(trials),
            seed: Some(seed),
            epsilon: None,
            samples: None,
            pc_active: None,
            rank_tol,
        },
        model,
    )
}

/// Runs the determinant identity check and the Monte Carlo measure
/// estimate.
pub fn run_measure_check(
    model: &ShapeModel,
    epsilon: f64,
    samples: u64,
    seed: u64,
    rank_tol: f64,
) -> Result<ExperimentReport> {
    run_on_model(
        &ExperimentConfig {
            experiment: ExperimentId::MeasureCheck,
            model_name: model.name().to_string(),
            synthetic: None,
            trials: None,
            seed: Some(seed),
            epsilon: Some(epsilon),
            samples: Some(samples),
            pc_active: None,
            rank_tol,
        },
        model,
    )
}

/// Regenerates a report from a self-contained config (one that embeds the
/// synthetic model recipe).
pub fn run_from_config(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let spec = config.synthetic.as_ref().ok_or(Error::InvalidValue {
        what: "experiment config",
        reason: "no synthetic model recipe embedded; rerun against the model file instead".into(),
    })?;
    let model = spec.generate()?;
    run_on_model(config, &model)
}

/// Runs the configured experiment against an already-built model, echoing
/// `config` into the report unchanged.
pub fn run_on_model(config: &ExperimentConfig, model: &ShapeModel) -> Result<ExperimentReport> {
    let trials = config.trials.unwrap_or(DEFAULT_TRIALS);
    if config.trials == Some(0) {
        return Err(Error::Range {
            what: "trials",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let seed = config.seed.unwrap_or(0);
    let tol = config.rank_tol;

    let rows = match config.experiment {
        ExperimentId::CrossExplain => cross_explain_rows(model, trials, seed, tol)?,
        ExperimentId::PcCross => pc_cross_rows(
            model,
            trials,
            seed,
            config.pc_active.unwrap_or(DEFAULT_PC_ACTIVE),
            tol,
        )?,
        ExperimentId::AngleCurve => angle_curve_rows(model, tol)?,
        ExperimentId::ErrorVsParams => error_vs_params_rows(model, trials, seed, tol)?,
        ExperimentId::MeasureCheck => measure_rows(
            model,
            config.epsilon.unwrap_or(DEFAULT_EPSILON),
            config.samples.unwrap_or(DEFAULT_SAMPLES),
            seed,
            tol,
        )?,
    };
    let summary = summarize(&rows);
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        summary,
    })
}

const PROJECTIONS: [Selection; 3] = [Selection::Identity, Selection::Expression, Selection::Full];

fn trial_row(
    model: &ShapeModel,
    shape: &crate::model::FaceShape,
    trial: u64,
    which: Selection,
    tol: f64,
) -> Result<ReportRow> {
    let result = project(model, shape, which, tol)?;
    Ok(ReportRow::Trial {
        trial,
        projection: which,
        mean_vertex_error: result.mean_vertex_error,
        param_magnitude: param_magnitude(&result.latents),
        residual_norm: result.residual_norm,
    })
}

fn cross_explain_rows(
    model: &ShapeModel,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::with_capacity(trials as usize * PROJECTIONS.len());
    for trial in 0..trials {
        let latents = sample_latents(model, Selection::Full, 1, derive_seed(seed, trial))?
            .pop()
            .expect("one sample requested");
        let shape = model.synthesize(&latents)?;
        for which in PROJECTIONS {
            rows.push(trial_row(model, &shape, trial, which, tol)?);
        }
    }
    Ok(rows)
}

fn pc_cross_rows(
    model: &ShapeModel,
    trials: u64,
    seed: u64,
    pc_active: usize,
    tol: f64,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::with_capacity(trials as usize * 2);
    for trial in 0..trials {
        for (offset, source) in [BasisSide::Identity, BasisSide::Expression]
            .into_iter()
            .enumerate()
        {
            let latents = first_pc_latents(
                model,
                source,
                pc_active,
                derive_seed(seed, 2 * trial + offset as u64),
            )?;
            let shape = model.synthesize(&latents)?;
            let target = match source {
                BasisSide::Identity => Selection::Expression,
                BasisSide::Expression => Selection::Identity,
            };
            rows.push(trial_row(model, &shape, trial, target, tol)?);
        }
    }
    Ok(rows)
}

fn angle_curve_rows(model: &ShapeModel, tol: f64) -> Result<Vec<ReportRow>> {
    let max = model.id_count().min(model.exp_count());
    Ok(smallest_angle_curve(model, max, tol)?
        .into_iter()
        .map(|(components, smallest_angle)| ReportRow::AnglePoint {
            components,
            smallest_angle,
        })
        .collect())
}

fn error_vs_params_rows(
    model: &ShapeModel,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<Vec<ReportRow>> {
    // The same meshes are reconstructed at every component count.
    let latents = sample_latents(model, Selection::Full, trials as usize, seed)?;
    let shapes = latents
        .iter()
        .map(|l| model.synthesize(l))
        .collect::<Result<Vec<_>>>()?;

    let sweep_max = model.id_count().min(model.exp_count());
    let mut rows = Vec::with_capacity(sweep_max * PROJECTIONS.len());
    for j in 1..=sweep_max {
        for which in PROJECTIONS {
            // Single-block sweeps restrict that block; the full sweep
            // restricts both blocks to j simultaneously.
            let restricted = match which {
                Selection::Identity => model.restrict(BasisSide::Identity, j)?,
                Selection::Expression => model.restrict(BasisSide::Expression, j)?,
                Selection::Full => model
                    .restrict(BasisSide::Identity, j)?
                    .restrict(BasisSide::Expression, j)?,
            };
            let mut sums = [0.0_f64; 3];
            for shape in &shapes {
                let result = project(&restricted, shape, which, tol)?;
                sums[0] += result.mean_vertex_error;
                sums[1] += param_magnitude(&result.latents);
                sums[2] += result.residual_norm;
            }
            let n = shapes.len() as f64;
            rows.push(ReportRow::ParamSweep {
                components: j,
                projection: which,
                mean_vertex_error: sums[0] / n,
                param_magnitude: sums[1] / n,
                residual_norm: sums[2] / n,
            });
        }
    }
    Ok(rows)
}

fn measure_rows(
    model: &ShapeModel,
    epsilon: f64,
    samples: u64,
    seed: u64,
    tol: f64,
) -> Result<Vec<ReportRow>> {
    let det = determinant_identity_check(model, tol)?;
    let est = mc_measure_estimate(model, epsilon, samples, seed, tol)?;
    let finite = |v: f64| v.is_finite().then_some(v);
    let ratio = match (est.mc_alpha_measure, finite(est.analytic_alpha_measure)) {
        (Some(mc), Some(analytic)) if analytic > 0.0 => Some(mc / analytic),
        _ => None,
    };
    Ok(vec![ReportRow::Measure {
        epsilon,
        samples,
        det_lhs: det.lhs,
        det_rhs: det.rhs,
        det_rel_error: det.rel_error,
        analytic: finite(est.analytic_alpha_measure),
        mc: est.mc_alpha_measure,
        mc_rel_stderr: est.mc_rel_stderr,
        ratio,
        lower_bound: finite(est.lower_bound),
        unbounded: est.unbounded,
    }])
}

/// Groups rows by projection label (or "all") and reports mean/stddev per
/// metric in a fixed order.
fn summarize(rows: &[ReportRow]) -> Vec<MetricSummary> {
    let mut out = Vec::new();
    let mut push = |group: &str, metric: &str, values: &[f64]| {
        if values.is_empty() {
            return;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stddev = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        out.push(MetricSummary {
            group: group.to_string(),
            metric: metric.to_string(),
            mean,
            stddev,
            count: values.len() as u64,
        });
    };

    for which in PROJECTIONS {
        let mut metrics: [Vec<f64>; 3] = Default::default();
        for row in rows {
            let (projection, mve, mag, res) = match row {
                ReportRow::Trial {
                    projection,
                    mean_vertex_error,
                    param_magnitude,
                    residual_norm,
                    ..
                }
                | ReportRow::ParamSweep {
                    projection,
                    mean_vertex_error,
                    param_magnitude,
                    residual_norm,
                    ..
                } => (
                    *projection,
                    *mean_vertex_error,
                    *param_magnitude,
                    *residual_norm,
                ),
                _ => continue,
            };
            if projection == which {
                metrics[0].push(mve);
                metrics[1].push(mag);
                metrics[2].push(res);
            }
        }
        push(which.label(), "mean_vertex_error", &metrics[0]);
        push(which.label(), "param_magnitude", &metrics[1]);
        push(which.label(), "residual_norm", &metrics[2]);
    }

    let angles: Vec<f64> = rows
        .iter()
        .filter_map(|row| match row {
            ReportRow::AnglePoint { smallest_angle, .. } => Some(*smallest_angle),
            _ => None,
        })
        .collect();
    push("all", "smallest_angle", &angles);

    let mut det_errors = Vec::new();
    let mut ratios = Vec::new();
    for row in rows {
        if let ReportRow::Measure {
            det_rel_error,
            ratio,
            ..
        } = row
        {
            det_errors.push(*det_rel_error);
            if let Some(r) = ratio {
                ratios.push(*r);
            }
        }
    }
    push("all", "det_rel_error", &det_errors);
    push("all", "mc_ratio", &ratios);

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FaceShape;
    use crate::projection::mean_vertex_error;
    use crate::subspace::DEFAULT_RANK_TOL;

    const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

    fn orthogonal_spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec::new(30, 2, 2, vec![FRAC_PI_2; 2], seed)
    }

    fn near_parallel_spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec::new(30, 2, 2, vec![0.05, 0.08], seed)
    }

    fn trial_metric(report: &ExperimentReport, which: Selection) -> Vec<f64> {
        report
            .rows
            .iter()
            .filter_map(|row| match row {
                ReportRow::Trial {
                    projection,
                    mean_vertex_error,
                    ..
                } if *projection == which => Some(*mean_vertex_error),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn cross_explain_full_rows_are_in_support() {
        let model = orthogonal_spec(1).generate().unwrap();
        let report = run_cross_explain(&model, 10, 3, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(report.rows.len(), 30);
        for error in trial_metric(&report, Selection::Full) {
            assert!(error <= 1e-9, "full-projection error {error}");
        }
    }

    #[test]
    fn cross_explain_matches_direct_projection_on_the_same_seeds() {
        let model = near_parallel_spec(2).generate().unwrap();
        let seed = 17;
        let report = run_cross_explain(&model, 5, seed, DEFAULT_RANK_TOL).unwrap();

        for trial in 0..5_u64 {
            let latents = sample_latents(&model, Selection::Full, 1, derive_seed(seed, trial))
                .unwrap()
                .pop()
                .unwrap();
            let shape = model.synthesize(&latents).unwrap();
            let direct = project(&model, &shape, Selection::Full, DEFAULT_RANK_TOL).unwrap();
            let row_error = trial_metric(&report, Selection::Full)[trial as usize];
            assert!((direct.mean_vertex_error - row_error).abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_only_error_matches_the_orthogonal_closed_form() {
        // With orthogonal subspaces the identity-only residual is exactly
        // the expression deformation, so each row's error must equal a
        // closed-form recomputation.
        let model = orthogonal_spec(4).generate().unwrap();
        let seed = 29;
        let report = run_cross_explain(&model, 8, seed, DEFAULT_RANK_TOL).unwrap();
        let id_errors = trial_metric(&report, Selection::Identity);

        for trial in 0..8_u64 {
            let latents = sample_latents(&model, Selection::Full, 1, derive_seed(seed, trial))
                .unwrap()
                .pop()
                .unwrap();
            let shape = model.synthesize(&latents).unwrap();
            let identity_part = crate::model::LatentVector::identity_only(
                latents.id_coeffs().clone(),
                model.exp_count(),
            )
            .unwrap();
            let without_expression = model.synthesize(&identity_part).unwrap();
            let expected = mean_vertex_error(&shape, &without_expression).unwrap();
            let got = id_errors[trial as usize];
            assert!(
                (got - expected).abs() <= 1e-10,
                "trial {trial}: {got} vs closed form {expected}"
            );
        }
    }

    #[test]
    fn near_parallel_cross_explanation_beats_the_orthogonal_control() {
        // Identical spectra and seeds; only the prescribed angles differ.
        let trials = 20;
        let seed = 7;
        let parallel = near_parallel_spec(11).generate().unwrap();
        let control = orthogonal_spec(11).generate().unwrap();

        let mean_id_error = |model: &ShapeModel| {
            let report = run_cross_explain(model, trials, seed, DEFAULT_RANK_TOL).unwrap();
            report
                .summary
                .iter()
                .find(|s| s.group == "identity" && s.metric == "mean_vertex_error")
                .unwrap()
                .mean
        };
        let near = mean_id_error(&parallel);
        let ortho = mean_id_error(&control);
        assert!(
            near < 0.1 * ortho,
            "near-parallel {near} not below 10% of orthogonal {ortho}"
        );
    }

    #[test]
    fn pc_cross_on_orthogonal_model_reconstructs_only_the_mean() {
        let model = orthogonal_spec(6).generate().unwrap();
        let seed = 5;
        let report = run_pc_cross(&model, 6, seed, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(report.rows.len(), 12);

        for (i, row) in report.rows.iter().enumerate() {
            let ReportRow::Trial {
                trial,
                projection,
                mean_vertex_error: row_error,
                param_magnitude: magnitude,
                ..
            } = row
            else {
                panic!("expected trial rows");
            };
            // Cross-projection onto an orthogonal block recovers nothing.
            assert!(*magnitude <= 1e-9, "row {i} magnitude {magnitude}");

            // The error equals the deformation magnitude per vertex.
            let source = match projection {
                Selection::Expression => BasisSide::Identity,
                Selection::Identity => BasisSide::Expression,
                Selection::Full => panic!("pc-cross never projects onto both"),
            };
            let offset = match source {
                BasisSide::Identity => 0,
                BasisSide::Expression => 1,
            };
            let latents =
                first_pc_latents(&model, source, 2, derive_seed(seed, 2 * trial + offset)).unwrap();
            let shape = model.synthesize(&latents).unwrap();
            let mean_shape = FaceShape::new(model.mean().clone()).unwrap();
            let expected = mean_vertex_error(&shape, &mean_shape).unwrap();
            assert!(
                (row_error - expected).abs() <= 1e-10,
                "row {i}: {row_error} vs deformation size {expected}"
            );
        }
    }

    #[test]
    fn pc_cross_near_parallel_beats_the_orthogonal_control() {
        let trials = 12;
        let seed = 3;
        let near = run_pc_cross(
            &near_parallel_spec(21).generate().unwrap(),
            trials,
            seed,
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        let ortho = run_pc_cross(
            &orthogonal_spec(21).generate().unwrap(),
            trials,
            seed,
            DEFAULT_RANK_TOL,
        )
        .unwrap();

        let mean_error = |report: &ExperimentReport, which: Selection| {
            let values = trial_metric(report, which);
            values.iter().sum::<f64>() / values.len() as f64
        };
        for which in [Selection::Identity, Selection::Expression] {
            let a = mean_error(&near, which);
            let b = mean_error(&ortho, which);
            assert!(
                a < b,
                "{}: {a} not strictly below control {b}",
                which.label()
            );
        }
    }

    #[test]
    fn angle_curve_rows_match_the_subspace_function() {
        let model = SyntheticSpec::new(30, 3, 3, vec![1.2, 0.8, 0.3], 9)
            .generate()
            .unwrap();
        let report = run_angle_curve(&model, DEFAULT_RANK_TOL).unwrap();
        let expected = smallest_angle_curve(&model, 3, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(report.rows.len(), expected.len());
        for (row, (j, angle)) in report.rows.iter().zip(expected) {
            assert_eq!(
                row,
                &ReportRow::AnglePoint {
                    components: j,
                    smallest_angle: angle
                }
            );
        }
    }

    #[test]
    fn error_vs_params_is_monotone_and_nested() {
        let model = SyntheticSpec::new(30, 3, 3, vec![0.5, 0.9, 1.3], 15)
            .generate()
            .unwrap();
        let report = run_error_vs_params(&model, 12, 8, DEFAULT_RANK_TOL).unwrap();

        let sweep = |which: Selection| -> Vec<(usize, f64)> {
            report
                .rows
                .iter()
                .filter_map(|row| match row {
                    ReportRow::ParamSweep {
                        components,
                        projection,
                        mean_vertex_error,
                        ..
                    } if *projection == which => Some((*components, *mean_vertex_error)),
                    _ => None,
                })
                .collect()
        };

        for which in PROJECTIONS {
            let curve = sweep(which);
            assert_eq!(curve.len(), 3);
            for w in curve.windows(2) {
                assert!(
                    w[1].1 <= w[0].1 + 1e-12,
                    "{} curve not non-increasing: {w:?}",
                    which.label()
                );
            }
        }

        let full = sweep(Selection::Full);
        for which in [Selection::Identity, Selection::Expression] {
            for (a, b) in full.iter().zip(sweep(which)) {
                assert!(
                    a.1 <= b.1 + 1e-12,
                    "full curve above {} at {a:?}",
                    which.label()
                );
            }
        }
        // At the full component count the meshes are in-support.
        assert!(full[2].1 <= 1e-9);
    }

    #[test]
    fn measure_check_orthogonal_ratio_is_one() {
        let model = orthogonal_spec(2).generate().unwrap();
        let report = run_measure_check(&model, 1.0, 20_000, 5, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(report.rows.len(), 1);
        let ReportRow::Measure {
            ratio,
            det_lhs,
            det_rhs,
            unbounded,
            ..
        } = &report.rows[0]
        else {
            panic!("expected a measure row");
        };
        assert!(!unbounded);
        assert!((det_lhs - 1.0).abs() <= 1e-10);
        assert!((det_rhs - 1.0).abs() <= 1e-10);
        let ratio = ratio.unwrap();
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn measure_check_matches_the_prescribed_angle_oracle() {
        let model = SyntheticSpec::new(20, 2, 2, vec![0.3, 0.7], 13)
            .generate()
            .unwrap();
        let report = run_measure_check(&model, 1.0, 50_000, 19, DEFAULT_RANK_TOL).unwrap();
        let ReportRow::Measure {
            det_rel_error,
            analytic,
            mc,
            ..
        } = &report.rows[0]
        else {
            panic!("expected a measure row");
        };
        assert!(*det_rel_error <= 1e-8);

        let mu0 = crate::subspace::ball_volume(4, 1.0);
        let expected = mu0 / (0.3_f64.sin() * 0.7_f64.sin());
        let analytic = analytic.unwrap();
        assert!((analytic - expected).abs() <= 1e-9 * expected);
        let mc = mc.unwrap();
        assert!(
            (mc - expected).abs() <= 0.05 * expected,
            "mc {mc} vs {expected}"
        );
    }

    #[test]
    fn reports_regenerate_bit_exactly_from_their_config() {
        for experiment in [
            ExperimentId::CrossExplain,
            ExperimentId::PcCross,
            ExperimentId::AngleCurve,
            ExperimentId::ErrorVsParams,
            ExperimentId::MeasureCheck,
        ] {
            let config = ExperimentConfig {
                experiment,
                model_name: "regen".to_string(),
                synthetic: Some(SyntheticSpec::new(20, 2, 2, vec![0.4, 1.0], 23)),
                trials: Some(4),
                seed: Some(31),
                epsilon: Some(0.5),
                samples: Some(2_000),
                pc_active: Some(2),
                rank_tol: 1e-10,
            };
            let first = run_from_config(&config).unwrap();
            let second = run_from_config(&first.config).unwrap();
            assert_eq!(
                first, second,
                "{experiment:?} did not regenerate bit-exactly"
            );
            // Byte-level equality of the serialized form, which is what
            // lands on disk.
            assert_eq!(
                serde_json::to_string(&first).unwrap(),
                serde_json::to_string(&second).unwrap()
            );
        }
    }

    #[test]
    fn config_without_a_recipe_cannot_regenerate() {
        let config = ExperimentConfig {
            experiment: ExperimentId::AngleCurve,
            model_name: "from-file".to_string(),
            synthetic: None,
            trials: None,
            seed: None,
            epsilon: None,
            samples: None,
            pc_active: None,
            rank_tol: 1e-10,
        };
        assert!(matches!(
            run_from_config(&config),
            Err(Error::InvalidValue { .. })
        ));
    }

    #[test]
    fn zero_trials_are_rejected() {
        let model = orthogonal_spec(1).generate().unwrap();
        assert!(matches!(
            run_cross_explain(&model, 0, 0, DEFAULT_RANK_TOL),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn summaries_group_by_projection() {
        let model = orthogonal_spec(8).generate().unwrap();
        let report = run_cross_explain(&model, 5, 2, DEFAULT_RANK_TOL).unwrap();
        for group in ["identity", "expression", "full"] {
            for metric in ["mean_vertex_error", "param_magnitude", "residual_norm"] {
                let entry = report
                    .summary
                    .iter()
                    .find(|s| s.group == group && s.metric == metric)
                    .unwrap_or_else(|| panic!("missing summary {group}/{metric}"));
                assert_eq!(entry.count, 5);
                assert!(entry.mean.is_finite());
                assert!(entry.stddev.is_finite());
            }
        }
    }
}
