//! `idexp` — command-line front end for the identity-expression ambiguity
//! toolkit: generate synthetic models with known subspace geometry, inspect
//! model files, recover latent coefficients for shapes, and run the
//! scripted experiments.
//!
//! All randomness flows from `--seed` (default 0); identical invocations
//! produce identical bytes. Exit codes: 0 success, 2 usage error, 1
//! runtime error with a single-line diagnostic on stderr.

use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use idexp_core::container::{load_model, load_shape, save_model};
use idexp_core::{
    json_string, orthonormalize, principal_angles, project, rows_csv_string, run_on_model,
    save_report, BasisSide, ExperimentConfig, ExperimentId, Selection, ShapeModel, SyntheticSpec,
    DEFAULT_RANK_TOL,
};
use nalgebra::DMatrix;

#[derive(Parser)]
#[command(
    name = "idexp",
    version,
    about = "Identity-expression subspace analysis for linear 3D morphable models"
)]
struct Cli {
    /// Rank tolerance for subspace decompositions.
    #[arg(long, global = true, default_value_t = DEFAULT_RANK_TOL)]
    tolerance: f64,

    /// Output format for tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Base seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, ValueEnum)]
enum Which {
    /// Identity block only.
    Id,
    /// Expression block only.
    Exp,
    /// Both blocks jointly.
    Full,
}

impl From<Which> for Selection {
    fn from(which: Which) -> Self {
        match which {
            Which::Id => Selection::Identity,
            Which::Exp => Selection::Expression,
            Which::Full => Selection::Full,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum ExperimentKind {
    /// Project full-model shapes onto each block separately.
    CrossExplain,
    /// Project leading-component shapes of one block onto the other.
    PcCross,
    /// Smallest principal angle as a function of component count.
    AngleCurve,
    /// Reconstruction error under truncated models.
    ErrorVsParams,
    /// Analytic vs Monte Carlo latent-measure amplification.
    Measure,
}

impl From<ExperimentKind> for ExperimentId {
    fn from(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::CrossExplain => ExperimentId::CrossExplain,
            ExperimentKind::PcCross => ExperimentId::PcCross,
            ExperimentKind::AngleCurve => ExperimentId::AngleCurve,
            ExperimentKind::ErrorVsParams => ExperimentId::ErrorVsParams,
            ExperimentKind::Measure => ExperimentId::MeasureCheck,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic model file from flags or a spec file.
    Gen {
        /// JSON spec file (alternative to the dimension flags; carries its
        /// own seed).
        #[arg(long, conflicts_with_all = ["n", "m", "k", "angles"])]
        config: Option<PathBuf>,

        /// Ambient coordinate count (3 per vertex).
        #[arg(long, required_unless_present = "config")]
        n: Option<usize>,

        /// Identity components.
        #[arg(long, required_unless_present = "config")]
        m: Option<usize>,

        /// Expression components.
        #[arg(long, required_unless_present = "config")]
        k: Option<usize>,

        /// Comma-separated principal angles (radians) to build in; omit for
        /// random subspace orientation.
        #[arg(long, value_delimiter = ',')]
        angles: Option<Vec<f64>>,

        /// Destination model file.
        #[arg(long)]
        out: PathBuf,
    },

    /// Print dimensions, spectra, and rank diagnostics of a model file.
    Info {
        /// Model file.
        model: PathBuf,
    },

    /// Smallest principal angle vs component count (CSV or JSON).
    Angles {
        /// Model file.
        model: PathBuf,
    },

    /// Recover latent coefficients for a shape file (JSON on stdout).
    Project {
        /// Model file.
        model: PathBuf,

        /// Shape file (a container holding one mean block).
        shape: PathBuf,

        /// Coefficient block(s) allowed to explain the shape.
        #[arg(long, value_enum)]
        which: Which,
    },

    /// Run a scripted experiment on a model file.
    Experiment {
        /// Which experiment to run.
        #[arg(value_enum)]
        kind: ExperimentKind,

        /// Model file.
        model: PathBuf,

        /// Trials (sampled shapes); experiment-specific default.
        #[arg(long)]
        trials: Option<u64>,

        /// Ball radius for the measure experiment.
        #[arg(long)]
        epsilon: Option<f64>,

        /// Monte Carlo sample count for the measure experiment.
        #[arg(long)]
        samples: Option<u64>,

        /// Directory for the report files (rows CSV, summary CSV, JSON);
        /// without it the rows go to stdout in the chosen format.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    // Die quietly on a closed pipe (`idexp … | head`) like other Unix
    // tools instead of panicking in println!.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            config,
            n,
            m,
            k,
            angles,
            out,
        } => {
            let spec = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading spec file {}", path.display()))?;
                    serde_json::from_str::<SyntheticSpec>(&text)
                        .with_context(|| format!("parsing spec file {}", path.display()))?
                }
                None => {
                    let n = n.expect("clap enforces --n without --config");
                    ensure!(
                        n % 3 == 0,
                        "coordinate count {n} is not divisible by 3 (three coordinates per vertex)"
                    );
                    SyntheticSpec {
                        vertex_count: n / 3,
                        id_count: m.expect("clap enforces --m without --config"),
                        exp_count: k.expect("clap enforces --k without --config"),
                        angles,
                        id_stddev: None,
                        exp_stddev: None,
                        seed: cli.seed,
                    }
                }
            };
            let model = spec.generate()?;
            save_model(&model, &out)
                .with_context(|| format!("writing model file {}", out.display()))?;
            println!("{}", out.display());
        }

        Command::Info { model } => {
            let model = load_model(&model)
                .with_context(|| format!("reading model file {}", model.display()))?;
            print_info(&model, cli.tolerance, cli.format)?;
        }

        Command::Angles { model } => {
            let model = load_model(&model)
                .with_context(|| format!("reading model file {}", model.display()))?;
            let config = ExperimentConfig {
                experiment: ExperimentId::AngleCurve,
                model_name: model.name().to_string(),
                synthetic: None,
                trials: None,
                seed: None,
                epsilon: None,
                samples: None,
                pc_active: None,
                rank_tol: cli.tolerance,
            };
            let report = run_on_model(&config, &model)?;
            match cli.format {
                Format::Csv => print!("{}", rows_csv_string(&report)?),
                Format::Json => print!("{}", json_string(&report)),
            }
        }

        Command::Project {
            model,
            shape,
            which,
        } => {
            let model = load_model(&model)
                .with_context(|| format!("reading model file {}", model.display()))?;
            let shape = load_shape(&shape)
                .with_context(|| format!("reading shape file {}", shape.display()))?;
            let result = project(&model, &shape, which.into(), cli.tolerance)?;
            let doc = serde_json::json!({
                "which": Selection::from(which).label(),
                "id_coeffs": result.latents.id_coeffs().iter().copied().collect::<Vec<f64>>(),
                "exp_coeffs": result.latents.exp_coeffs().iter().copied().collect::<Vec<f64>>(),
                "param_magnitude": result.param_magnitude,
                "residual_norm": result.residual_norm,
                "mean_vertex_error": result.mean_vertex_error,
                "reconstruction": result.reconstruction.coords().iter().copied().collect::<Vec<f64>>(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }

        Command::Experiment {
            kind,
            model,
            trials,
            epsilon,
            samples,
            out,
        } => {
            let model = load_model(&model)
                .with_context(|| format!("reading model file {}", model.display()))?;
            let config = ExperimentConfig {
                experiment: kind.into(),
                model_name: model.name().to_string(),
                synthetic: None,
                trials,
                seed: Some(cli.seed),
                epsilon,
                samples,
                pc_active: None,
                rank_tol: cli.tolerance,
            };
            let report = run_on_model(&config, &model)?;
            match out {
                Some(dir) => {
                    let paths = save_report(&report, &dir)
                        .with_context(|| format!("writing reports to {}", dir.display()))?;
                    for path in paths {
                        println!("{}", path.display());
                    }
                }
                None => match cli.format {
                    Format::Csv => print!("{}", rows_csv_string(&report)?),
                    Format::Json => print!("{}", json_string(&report)),
                },
            }
        }
    }
    Ok(())
}

fn print_info(model: &ShapeModel, tolerance: f64, format: Format) -> Result<()> {
    let (m, k) = (model.id_count(), model.exp_count());
    let id = orthonormalize(&model.scaled_basis(BasisSide::Identity), tolerance)?;
    let exp = orthonormalize(&model.scaled_basis(BasisSide::Expression), tolerance)?;
    let mut stacked = DMatrix::zeros(model.ambient_dim(), m + k);
    stacked
        .columns_mut(0, m)
        .copy_from(&model.scaled_basis(BasisSide::Identity));
    stacked
        .columns_mut(m, k)
        .copy_from(&model.scaled_basis(BasisSide::Expression));
    let combined = orthonormalize(&stacked, tolerance)?;
    let angles = principal_angles(&id, &exp)?;

    let stddevs = |v: &nalgebra::DVector<f64>| -> Vec<f64> { v.iter().copied().collect() };
    let id_stddev = stddevs(model.id_stddev());
    let exp_stddev = stddevs(model.exp_stddev());

    if format == Format::Json {
        let doc = serde_json::json!({
            "name": model.name(),
            "vertex_count": model.vertex_count(),
            "ambient_dim": model.ambient_dim(),
            "id_count": m,
            "exp_count": k,
            "id_rank": id.rank(),
            "exp_rank": exp.rank(),
            "combined_rank": combined.rank(),
            "id_stddev": id_stddev,
            "exp_stddev": exp_stddev,
            "principal_angles": angles.angles(),
            "smallest_angle": angles.smallest(),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }

    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("name: {}", model.name());
    println!(
        "vertices: {} ({} coordinates)",
        model.vertex_count(),
        model.ambient_dim()
    );
    println!("identity components: {m} (rank {})", id.rank());
    println!("expression components: {k} (rank {})", exp.rank());
    println!("combined rank: {} of {}", combined.rank(), m + k);
    println!("identity stddev (mm): {}", join(&id_stddev));
    println!("expression stddev (mm): {}", join(&exp_stddev));
    println!("principal angles (rad): {}", join(angles.angles()));
    println!("smallest angle (rad): {}", angles.smallest());
    Ok(())
}
