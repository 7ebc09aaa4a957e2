//! Least-squares recovery of latent coefficients from a shape.
//!
//! Projection works against the stddev-scaled basis of the selected
//! block(s): the basis is orthonormalized, the coefficients solve
//! (QᵀB)α = Qᵀ(f − μ), and the result carries the reconstruction and its
//! residual. No regularization — conditioning problems are the object of
//! study here, not something to paper over.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{BasisSide, FaceShape, LatentVector, Selection, ShapeModel};
use crate::subspace::orthonormalize;

/// Outcome of projecting a shape onto a model's selected subspace.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Recovered coefficients; inactive blocks are zero.
    pub latents: LatentVector,
    /// μ plus the selected basis applied to the recovered coefficients.
    pub reconstruction: FaceShape,
    /// ‖shape − reconstruction‖₂ over all coordinates.
    pub residual_norm: f64,
    /// Mean per-vertex Euclidean distance between shape and reconstruction.
    pub mean_vertex_error: f64,
    /// Norm-over-count of the recovered coefficients (see [`param_magnitude`]).
    pub param_magnitude: f64,
}

/// Projects `shape` onto the span of the selected block(s) about the mean,
/// returning the least-squares latent coefficients.
///
/// A rank-deficient selected basis is an error — with no regularization the
/// coefficients would not be identifiable.
pub fn project(
    model: &ShapeModel,
    shape: &FaceShape,
    which: Selection,
    tol: f64,
) -> Result<ProjectionResult> {
    let n = model.ambient_dim();
    if shape.len() != n {
        return Err(Error::Dimension {
            what: "shape coordinate count",
            expected: n,
            actual: shape.len(),
        });
    }

    let basis = match which {
        Selection::Identity => model.scaled_basis(BasisSide::Identity),
        Selection::Expression => model.scaled_basis(BasisSide::Expression),
        Selection::Full => {
            let (m, k) = (model.id_count(), model.exp_count());
            let mut stacked = DMatrix::zeros(n, m + k);
            stacked
                .columns_mut(0, m)
                .copy_from(&model.scaled_basis(BasisSide::Identity));
            stacked
                .columns_mut(m, k)
                .copy_from(&model.scaled_basis(BasisSide::Expression));
            stacked
        }
    };
    if basis.ncols() == 0 {
        return Err(Error::DegenerateSubspace(format!(
            "model has no {} components to project onto",
            which.label()
        )));
    }

    let q = orthonormalize(&basis, tol)?;
    if q.rank_deficient() {
        return Err(Error::DegenerateSubspace(format!(
            "selected {} basis has rank {} < {} columns",
            which.label(),
            q.rank(),
            basis.ncols()
        )));
    }

    let centered = shape.coords() - model.mean();
    let small = q.q().transpose() * &basis;
    let rhs = q.q().transpose() * &centered;
    let alpha = small.lu().solve(&rhs).ok_or_else(|| {
        Error::DegenerateSubspace(format!(
            "change of basis for the {} block is singular",
            which.label()
        ))
    })?;

    let (m, k) = (model.id_count(), model.exp_count());
    let latents = match which {
        Selection::Identity => LatentVector::identity_only(alpha, k)?,
        Selection::Expression => LatentVector::expression_only(alpha, m)?,
        Selection::Full => {
            LatentVector::full(alpha.rows(0, m).into_owned(), alpha.rows(m, k).into_owned())?
        }
    };

    let reconstruction = model.synthesize(&latents)?;
    let residual_norm = (shape.coords() - reconstruction.coords()).norm();
    let mean_vertex_error = mean_vertex_error(shape, &reconstruction)?;
    let param_magnitude = param_magnitude(&latents);
    Ok(ProjectionResult {
        latents,
        reconstruction,
        residual_norm,
        mean_vertex_error,
        param_magnitude,
    })
}

/// Mean over vertices of the per-vertex Euclidean distance between two
/// shapes with interleaved (x, y, z) coordinates.
pub fn mean_vertex_error(a: &FaceShape, b: &FaceShape) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            what: "shape coordinate count",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if !a.len().is_multiple_of(3) {
        return Err(Error::Dimension {
            what: "coordinate count divisible by 3",
            expected: a.len() / 3 * 3,
            actual: a.len(),
        });
    }
    let vertices = a.len() / 3;
    let mut total = 0.0;
    for v in 0..vertices {
        let mut sq = 0.0;
        for c in 0..3 {
            let d = a.coords()[3 * v + c] - b.coords()[3 * v + c];
            sq += d * d;
        }
        total += sq.sqrt();
    }
    Ok(total / vertices as f64)
}

/// Euclidean norm of the active latent coefficients divided by their
/// count. Under the model's standard-normal prior this reads as an
/// (im)probability proxy: restricted fits that contort a single block to
/// explain foreign deformation show up as inflated magnitude.
pub fn param_magnitude(latents: &LatentVector) -> f64 {
    let active = latents.active_coeffs();
    active.norm() / active.len() as f64
}
