//! Quantifies identity-expression ambiguity in linear 3D morphable models.
//!
//! A linear 3DMM represents a face shape as a mean plus linear combinations
//! of identity and expression blendshapes. When the identity and expression
//! subspaces are nearly parallel, recovering latent coefficients from a
//! shape becomes ill-conditioned: an ε-ball of shape noise maps to a latent
//! set whose volume grows by ∏ 1/sin θᵢ over the principal angles θᵢ
//! between the two subspaces. This crate provides:
//!
//! - the model representation and shape synthesis ([`model`]),
//! - principal angles, the determinant identity, and measure-amplification
//!   estimates ([`subspace`]),
//! - full and restricted least-squares latent recovery ([`projection`]),
//! - synthetic ground-truth models with prescribed principal angles
//!   ([`synthetic`]),
//! - scripted experiments with CSV/JSON reports ([`experiments`], [`report`]),
//! - a self-describing binary model container ([`container`]).

pub mod container;
pub mod error;
pub mod experiments;
pub mod model;
pub mod projection;
pub mod report;
pub mod subspace;
pub mod synthetic;

pub use error::Error;
pub use experiments::{
    run_angle_curve, run_cross_explain, run_error_vs_params, run_from_config, run_measure_check,
    run_on_model, run_pc_cross, ExperimentConfig, ExperimentId, ExperimentReport, MetricSummary,
    ReportRow,
};
pub use model::{BasisSide, FaceShape, LatentVector, Selection, ShapeModel};
pub use projection::{mean_vertex_error, param_magnitude, project, ProjectionResult};
pub use report::{json_string, report_from_json, rows_csv_string, save_report, summary_csv_string};
pub use subspace::{
    amplification, determinant_identity_check, mc_measure_estimate, orthonormalize,
    principal_angles, smallest_angle_curve, DeterminantIdentity, MeasureEstimate, OrthonormalBasis,
    PrincipalAngleSet, DEFAULT_RANK_TOL,
};
pub use synthetic::{derive_seed, first_pc_latents, sample_latents, SyntheticSpec};
