//! Linear 3D morphable model: mean shape plus identity and expression bases.
//!
//! A shape is synthesized as `μ + M_id·diag(σ_id)·α_id + M_exp·diag(σ_exp)·α_exp`.
//! Basis columns are stored unit-scaled; per-component standard deviations are
//! kept separately so that latent coefficients live in standard-normal
//! ("z-score") coordinates and coefficient magnitude doubles as a prior
//! probability proxy.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the two basis blocks of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSide {
    Identity,
    Expression,
}

/// Which coefficient block(s) are active in synthesis or projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Identity,
    Expression,
    Full,
}

impl Selection {
    /// Whether this selection activates the given basis block.
    pub fn includes(self, side: BasisSide) -> bool {
        matches!(
            (self, side),
            (Selection::Full, _)
                | (Selection::Identity, BasisSide::Identity)
                | (Selection::Expression, BasisSide::Expression)
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Selection::Identity => "identity",
            Selection::Expression => "expression",
            Selection::Full => "full",
        }
    }
}

impl From<BasisSide> for Selection {
    fn from(side: BasisSide) -> Self {
        match side {
            BasisSide::Identity => Selection::Identity,
            BasisSide::Expression => Selection::Expression,
        }
    }
}

/// A flattened 3D vertex-coordinate vector in millimeters (x, y, z per vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceShape {
    coords: DVector<f64>,
}

impl FaceShape {
    /// Wraps a coordinate vector, rejecting non-finite entries.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue {
                what: "shape coordinates",
                reason: "non-finite entry".into(),
            });
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.len() == 0
    }
}

/// Identity and/or expression coefficients in stddev-scaled coordinates.
///
/// The inactive block (per `which`) is all zero by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    id_coeffs: DVector<f64>,
    exp_coeffs: DVector<f64>,
    which: Selection,
}

impl LatentVector {
    /// Latents with both blocks active.
    pub fn full(id_coeffs: DVector<f64>, exp_coeffs: DVector<f64>) -> Result<Self> {
        Self::validate_finite(&id_coeffs)?;
        Self::validate_finite(&exp_coeffs)?;
        Ok(Self {
            id_coeffs,
            exp_coeffs,
            which: Selection::Full,
        })
    }

    /// Identity-only latents; the expression block is zero of length `k`.
    pub fn identity_only(id_coeffs: DVector<f64>, k: usize) -> Result<Self> {
        Self::validate_finite(&id_coeffs)?;
        Ok(Self {
            id_coeffs,
            exp_coeffs: DVector::zeros(k),
            which: Selection::Identity,
        })
    }

    /// Expression-only latents; the identity block is zero of length `m`.
    pub fn expression_only(exp_coeffs: DVector<f64>, m: usize) -> Result<Self> {
        Self::validate_finite(&exp_coeffs)?;
        Ok(Self {
            id_coeffs: DVector::zeros(m),
            exp_coeffs,
            which: Selection::Expression,
        })
    }

    fn validate_finite(v: &DVector<f64>) -> Result<()> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidValue {
                what: "latent coefficients",
                reason: "non-finite entry".into(),
            });
        }
        Ok(())
    }

    pub fn id_coeffs(&self) -> &DVector<f64> {
        &self.id_coeffs
    }

    pub fn exp_coeffs(&self) -> &DVector<f64> {
        &self.exp_coeffs
    }

    pub fn which(&self) -> Selection {
        self.which
    }

    /// Coefficients of the active block(s), identity first.
    pub fn active_coeffs(&self) -> DVector<f64> {
        match self.which {
            Selection::Identity => self.id_coeffs.clone(),
            Selection::Expression => self.exp_coeffs.clone(),
            Selection::Full => {
                let mut stacked = DVector::zeros(self.id_coeffs.len() + self.exp_coeffs.len());
                stacked
                    .rows_mut(0, self.id_coeffs.len())
                    .copy_from(&self.id_coeffs);
                stacked
                    .rows_mut(self.id_coeffs.len(), self.exp_coeffs.len())
                    .copy_from(&self.exp_coeffs);
                stacked
            }
        }
    }
}

/// A linear 3DMM: mean shape, identity/expression bases, and per-component
/// standard deviations.
///
/// Immutable after construction; all operations are pure functions and safe
/// to call concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeModel {
    name: String,
    mean: DVector<f64>,
    id_basis: DMatrix<f64>,
    exp_basis: DMatrix<f64>,
    id_stddev: DVector<f64>,
    exp_stddev: DVector<f64>,
}

impl ShapeModel {
    /// Builds a model, validating every structural invariant:
    /// `n ≥ m + k ≥ 1`, `n` divisible by 3, strictly positive finite
    /// stddevs, finite basis entries with nonzero column norms.
    pub fn new(
        name: impl Into<String>,
        mean: DVector<f64>,
        id_basis: DMatrix<f64>,
        exp_basis: DMatrix<f64>,
        id_stddev: DVector<f64>,
        exp_stddev: DVector<f64>,
    ) -> Result<Self> {
        let n = mean.len();
        let m = id_basis.ncols();
        let k = exp_basis.ncols();

        if !n.is_multiple_of(3) {
            return Err(Error::InvalidValue {
                what: "ambient dimension",
                reason: format!("{n} is not divisible by 3"),
            });
        }
        if m + k < 1 {
            return Err(Error::Range {
                what: "total basis size m + k",
                value: 0,
                min: 1,
                max: n,
            });
        }
        if n < m + k {
            return Err(Error::Dimension {
                what: "ambient dimension n (must be >= m + k)",
                expected: m + k,
                actual: n,
            });
        }
        if id_basis.nrows() != n {
            return Err(Error::Dimension {
                what: "identity basis rows",
                expected: n,
                actual: id_basis.nrows(),
            });
        }
        if exp_basis.nrows() != n {
            return Err(Error::Dimension {
                what: "expression basis rows",
                expected: n,
                actual: exp_basis.nrows(),
            });
        }
        if id_stddev.len() != m {
            return Err(Error::Dimension {
                what: "identity stddev length",
                expected: m,
                actual: id_stddev.len(),
            });
        }
        if exp_stddev.len() != k {
            return Err(Error::Dimension {
                what: "expression stddev length",
                expected: k,
                actual: exp_stddev.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue {
                what: "mean shape",
                reason: "non-finite entry".into(),
            });
        }
        for (label, stddev) in [("identity", &id_stddev), ("expression", &exp_stddev)] {
            if stddev.iter().any(|&s| !s.is_finite() || s <= 0.0) {
                return Err(Error::InvalidValue {
                    what: "stddev vector",
                    reason: format!("{label} stddev has a non-positive or non-finite entry"),
                });
            }
        }
        for (label, basis) in [("identity", &id_basis), ("expression", &exp_basis)] {
            if basis.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidValue {
                    what: "basis matrix",
                    reason: format!("{label} basis has a non-finite entry"),
                });
            }
            for j in 0..basis.ncols() {
                if basis.column(j).norm() == 0.0 {
                    return Err(Error::InvalidValue {
                        what: "basis matrix",
                        reason: format!("{label} basis column {j} is all zero"),
                    });
                }
            }
        }

        Ok(Self {
            name: name.into(),
            mean,
            id_basis,
            exp_basis,
            id_stddev,
            exp_stddev,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ambient dimension `n` (3 × vertex count).
    pub fn ambient_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.mean.len() / 3
    }

    /// Number of identity components `m`.
    pub fn id_count(&self) -> usize {
        self.id_basis.ncols()
    }

    /// Number of expression components `k`.
    pub fn exp_count(&self) -> usize {
        self.exp_basis.ncols()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn id_basis(&self) -> &DMatrix<f64> {
        &self.id_basis
    }

    pub fn exp_basis(&self) -> &DMatrix<f64> {
        &self.exp_basis
    }

    pub fn id_stddev(&self) -> &DVector<f64> {
        &self.id_stddev
    }

    pub fn exp_stddev(&self) -> &DVector<f64> {
        &self.exp_stddev
    }

    pub fn basis(&self, side: BasisSide) -> &DMatrix<f64> {
        match side {
            BasisSide::Identity => &self.id_basis,
            BasisSide::Expression => &self.exp_basis,
        }
    }

    pub fn stddev(&self, side: BasisSide) -> &DVector<f64> {
        match side {
            BasisSide::Identity => &self.id_stddev,
            BasisSide::Expression => &self.exp_stddev,
        }
    }

    /// The basis with each column scaled by its stddev, i.e. the linear map
    /// from z-score coefficients to millimeter deformations.
    pub fn scaled_basis(&self, side: BasisSide) -> DMatrix<f64> {
        let basis = self.basis(side);
        let stddev = self.stddev(side);
        let mut scaled = basis.clone();
        for j in 0..scaled.ncols() {
            scaled.column_mut(j).scale_mut(stddev[j]);
        }
        scaled
    }

    /// Synthesizes `μ + M_id·diag(σ_id)·α_id + M_exp·diag(σ_exp)·α_exp`.
    pub fn synthesize(&self, latents: &LatentVector) -> Result<FaceShape> {
        if latents.id_coeffs.len() != self.id_count() {
            return Err(Error::Dimension {
                what: "identity coefficients",
                expected: self.id_count(),
                actual: latents.id_coeffs.len(),
            });
        }
        if latents.exp_coeffs.len() != self.exp_count() {
            return Err(Error::Dimension {
                what: "expression coefficients",
                expected: self.exp_count(),
                actual: latents.exp_coeffs.len(),
            });
        }

        let mut shape = self.mean.clone();
        shape += &self.id_basis * latents.id_coeffs.component_mul(&self.id_stddev);
        shape += &self.exp_basis * latents.exp_coeffs.component_mul(&self.exp_stddev);
        FaceShape::new(shape)
    }

    /// Returns a model keeping only the leading `n_components` columns of the
    /// chosen basis (columns are assumed ordered by decreasing variance, as
    /// PCA produces them). The other basis is carried over unchanged.
    pub fn restrict(&self, side: BasisSide, n_components: usize) -> Result<ShapeModel> {
        let size = self.basis(side).ncols();
        if n_components < 1 || n_components > size {
            return Err(Error::Range {
                what: "n_components",
                value: n_components,
                min: 1,
                max: size,
            });
        }

        let truncate = |basis: &DMatrix<f64>, stddev: &DVector<f64>| {
            (
                basis.columns(0, n_components).into_owned(),
                stddev.rows(0, n_components).into_owned(),
            )
        };

        let (id_basis, id_stddev, exp_basis, exp_stddev) = match side {
            BasisSide::Identity => {
                let (b, s) = truncate(&self.id_basis, &self.id_stddev);
                (b, s, self.exp_basis.clone(), self.exp_stddev.clone())
            }
            BasisSide::Expression => {
                let (b, s) = truncate(&self.exp_basis, &self.exp_stddev);
                (self.id_basis.clone(), self.id_stddev.clone(), b, s)
            }
        };

        Ok(ShapeModel {
            name: self.name.clone(),
            mean: self.mean.clone(),
            id_basis,
            exp_basis,
            id_stddev,
            exp_stddev,
        })
    }
}
