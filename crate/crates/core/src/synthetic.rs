//! Synthetic models with prescribed principal angles, for controlled
//! experiments with known ground truth.
//!
//! The construction starts from the canonical pair of subspaces realizing a
//! given angle set — identity column i is eᵢ, expression column i is
//! cos θᵢ·eᵢ + sin θᵢ·e_{m+i} — and then applies one random ambient
//! rotation and a random mean, which leaves every principal angle intact.
//! Without prescribed angles, both bases come from orthonormalized Gaussian
//! matrices, whose distribution is rotation invariant.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BasisSide, LatentVector, Selection, ShapeModel};
use crate::subspace::orthonormalize;

/// Recipe for a synthetic model: dimensions, optional prescribed principal
/// angles, stddev spectra, and the seed controlling all random draws.
///
/// Serialized into experiment configs so a report can be regenerated
/// bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Number of vertices (ambient dimension is 3 × this).
    pub vertex_count: usize,
    /// Identity components m.
    pub id_count: usize,
    /// Expression components k.
    pub exp_count: usize,
    /// Prescribed principal angles in radians, one per canonical pair;
    /// length min(m, k), each in (0, π/2]. `None` draws both bases from
    /// rotationally invariant random matrices instead.
    pub angles: Option<Vec<f64>>,
    /// Per-component standard deviations for the identity block; defaults
    /// to a geometric decay from 10 mm to 0.1 mm.
    pub id_stddev: Option<Vec<f64>>,
    /// Same for the expression block.
    pub exp_stddev: Option<Vec<f64>>,
    /// Seed for the ambient rotation (or random bases) and the random mean.
    pub seed: u64,
}

impl SyntheticSpec {
    /// A prescribed-angle spec with the default stddev spectra.
    pub fn new(
        vertex_count: usize,
        id_count: usize,
        exp_count: usize,
        angles: Vec<f64>,
        seed: u64,
    ) -> Self {
        Self {
            vertex_count,
            id_count,
            exp_count,
            angles: Some(angles),
            id_stddev: None,
            exp_stddev: None,
            seed,
        }
    }

    /// A spec with random (rotationally invariant) subspaces and the
    /// default stddev spectra.
    pub fn random(vertex_count: usize, id_count: usize, exp_count: usize, seed: u64) -> Self {
        Self {
            vertex_count,
            id_count,
            exp_count,
            angles: None,
            id_stddev: None,
            exp_stddev: None,
            seed,
        }
    }

    /// Geometric decay from 10 mm down to 0.1 mm over `count` components; a
    /// single component gets 10.
    pub fn default_stddev(count: usize) -> Vec<f64> {
        let (first, last) = (10.0_f64, 0.1_f64);
        if count == 1 {
            return vec![first];
        }
        let ratio = (last / first).powf(1.0 / (count as f64 - 1.0));
        (0..count).map(|i| first * ratio.powi(i as i32)).collect()
    }

    fn validate(&self) -> Result<()> {
        let n = 3 * self.vertex_count;
        let (m, k) = (self.id_count, self.exp_count);
        if m == 0 || k == 0 {
            return Err(Error::Range {
                what: "component counts (both blocks must be nonempty)",
                value: m.min(k),
                min: 1,
                max: usize::MAX,
            });
        }
        // The canonical construction spends one fresh axis per expression
        // column (paired columns reuse the identity axes for their cosine
        // part), so exactly m + k dimensions are touched.
        if n < m + k {
            return Err(Error::Dimension {
                what: "ambient dimension 3 * vertex_count (needs >= m + k)",
                expected: m + k,
                actual: n,
            });
        }
        if let Some(angles) = &self.angles {
            if angles.len() != m.min(k) {
                return Err(Error::Dimension {
                    what: "prescribed angle count (must be min(m, k))",
                    expected: m.min(k),
                    actual: angles.len(),
                });
            }
            const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
            if angles
                .iter()
                .any(|a| !a.is_finite() || *a <= 0.0 || *a > HALF_PI + 1e-12)
            {
                return Err(Error::InvalidValue {
                    what: "prescribed angles",
                    reason: "each angle must lie in (0, pi/2]".into(),
                });
            }
        }
        for (label, stddev, count) in [
            ("id_stddev", &self.id_stddev, m),
            ("exp_stddev", &self.exp_stddev, k),
        ] {
            if let Some(values) = stddev {
                if values.len() != count {
                    return Err(Error::Dimension {
                        what: "stddev length",
                        expected: count,
                        actual: values.len(),
                    });
                }
                if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::InvalidValue {
                        what: "stddev spectrum",
                        reason: format!("{label} must be positive and finite"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Builds the model. Deterministic in the spec (same spec, same bytes).
    pub fn generate(&self) -> Result<ShapeModel> {
        self.validate()?;
        let n = 3 * self.vertex_count;
        let (m, k) = (self.id_count, self.exp_count);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let (id, exp) = match &self.angles {
            Some(angles) => {
                let paired = m.min(k);
                // Canonical pair: identity on the first m axes; each paired
                // expression column tilted by its angle into a fresh axis;
                // the remaining expression columns on further fresh axes,
                // orthogonal to everything else.
                let mut id = DMatrix::zeros(n, m);
                for i in 0..m {
                    id[(i, i)] = 1.0;
                }
                let mut exp = DMatrix::zeros(n, k);
                for i in 0..paired {
                    exp[(i, i)] = angles[i].cos();
                    exp[(m + i, i)] = angles[i].sin();
                }
                for i in paired..k {
                    exp[(m + i, i)] = 1.0;
                }
                let gaussian = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let rotation = gaussian.qr().q();
                (&rotation * id, &rotation * exp)
            }
            None => {
                let draw = |rng: &mut ChaCha8Rng, cols: usize| {
                    DMatrix::from_fn(n, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
                };
                let id = orthonormalize(&draw(&mut rng, m), 1e-10)?;
                let exp = orthonormalize(&draw(&mut rng, k), 1e-10)?;
                (id.q().clone(), exp.q().clone())
            }
        };
        let mean = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));

        let id_stddev = self
            .id_stddev
            .clone()
            .unwrap_or_else(|| Self::default_stddev(m));
        let exp_stddev = self
            .exp_stddev
            .clone()
            .unwrap_or_else(|| Self::default_stddev(k));

        ShapeModel::new(
            format!("synthetic-{}", self.seed),
            mean,
            id,
            exp,
            DVector::from_vec(id_stddev),
            DVector::from_vec(exp_stddev),
        )
    }
}

/// Draws `count` latent vectors with independent standard-normal
/// coefficients in the active block(s); inactive blocks are zero.
/// Deterministic in the seed.
pub fn sample_latents(
    model: &ShapeModel,
    which: Selection,
    count: usize,
    seed: u64,
) -> Result<Vec<LatentVector>> {
    if count < 1 {
        return Err(Error::Range {
            what: "sample count",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, k) = (model.id_count(), model.exp_count());
    let mut draws = Vec::with_capacity(count);
    for _ in 0..count {
        let mut id = DVector::zeros(m);
        let mut exp = DVector::zeros(k);
        if which.includes(BasisSide::Identity) {
            id.apply(|v| *v = rng.sample(StandardNormal));
        }
        if which.includes(BasisSide::Expression) {
            exp.apply(|v| *v = rng.sample(StandardNormal));
        }
        let latents = match which {
            Selection::Identity => LatentVector::identity_only(id, k),
            Selection::Expression => LatentVector::expression_only(exp, m),
            Selection::Full => LatentVector::full(id, exp),
        };
        draws.push(latents.expect("finite normal draws"));
    }
    Ok(draws)
}

/// A latent vector with standard-normal values in the first `n_active`
/// coefficients of one block and zeros everywhere else.
pub fn first_pc_latents(
    model: &ShapeModel,
    which: BasisSide,
    n_active: usize,
    seed: u64,
) -> Result<LatentVector> {
    let block = match which {
        BasisSide::Identity => model.id_count(),
        BasisSide::Expression => model.exp_count(),
    };
    if n_active < 1 || n_active > block {
        return Err(Error::Range {
            what: "active leading components",
            value: n_active,
            min: 1,
            max: block,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = DVector::zeros(block);
    for i in 0..n_active {
        coeffs[i] = rng.sample(StandardNormal);
    }
    match which {
        BasisSide::Identity => LatentVector::identity_only(coeffs, model.exp_count()),
        BasisSide::Expression => LatentVector::expression_only(coeffs, model.id_count()),
    }
}

/// Derives a per-trial seed from a base seed and trial index, so trials get
/// decorrelated substreams while the whole run stays reproducible.
///
/// SplitMix64 finalizer over `base + index`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
