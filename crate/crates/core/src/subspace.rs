//! Principal angles between the identity and expression subspaces, and the
//! measure-amplification quantities they determine.
//!
//! The central fact: with both bases orthonormal and `Q` any orthonormal
//! basis of the combined span, `|det(QᵀM)| = ∏ sin θᵢ` over the principal
//! angles θᵢ, so an ε-ball of shape noise maps to a latent set of measure
//! `μ₀ ∏ 1/sin θᵢ` where μ₀ is the ε-ball volume in dimension m + k.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BasisSide, ShapeModel};

/// Default rank tolerance, relative to the largest singular value.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Below this angle (radians) the arccos formulation loses precision and
/// angles are recomputed from the sine-based SVD.
const SINE_REFINEMENT_THRESHOLD: f64 = 1e-4;

/// Sines below this are treated as an effectively intersecting pair of
/// subspaces: the amplification is reported as unbounded.
const SINE_FLOOR: f64 = 1e-14;

/// Condition-number estimate above which the latent change of basis is
/// treated as singular.
const CONDITION_LIMIT: f64 = 1e12;

/// Number of sample batches used for the Monte Carlo standard error.
const MC_BATCHES: u64 = 10;

/// A matrix with orthonormal columns spanning a detected-rank subspace.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    q: DMatrix<f64>,
    source_rank: usize,
    rank_deficient: bool,
}

impl OrthonormalBasis {
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn ambient_dim(&self) -> usize {
        self.q.nrows()
    }

    /// Numerical rank detected during construction (= number of columns).
    pub fn rank(&self) -> usize {
        self.source_rank
    }

    /// True when the input had fewer independent directions than columns.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }
}

/// Orthonormalizes the columns of `basis`, preserving the column space.
///
/// Rank is detected with singular values below `tol` times the largest
/// treated as zero; rank-deficient inputs return a basis of the detected
/// rank with the deficiency flagged.
pub fn orthonormalize(basis: &DMatrix<f64>, tol: f64) -> Result<OrthonormalBasis> {
    let (n, p) = basis.shape();
    if p == 0 || n == 0 {
        return Err(Error::DegenerateSubspace("empty basis matrix".into()));
    }
    if p > n {
        return Err(Error::Dimension {
            what: "basis columns (must be <= rows)",
            expected: n,
            actual: p,
        });
    }
    if basis.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue {
            what: "basis matrix",
            reason: "non-finite entry".into(),
        });
    }

    let svd = basis.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd computed with u");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.max();
    if sigma_max <= 0.0 {
        return Err(Error::DegenerateSubspace("all-zero basis matrix".into()));
    }
    let rank = sigma.iter().filter(|&&s| s > tol * sigma_max).count();
    // svd() sorts singular values descending, so the leading columns of U
    // span the numerically significant directions.
    let q = u.columns(0, rank).into_owned();
    Ok(OrthonormalBasis {
        q,
        source_rank: rank,
        rank_deficient: rank < p,
    })
}

/// Principal angles θ₁ ≤ … ≤ θ_p between two subspaces, with their sines
/// and the log amplification factor Σ −ln sin θᵢ.
#[derive(Debug, Clone, Serialize)]
pub struct PrincipalAngleSet {
    angles: Vec<f64>,
    sines: Vec<f64>,
    log_amplification: f64,
}

impl PrincipalAngleSet {
    /// Builds a set from angles already in radians; they are sorted and must
    /// lie in [0, π/2].
    pub fn from_angles(mut angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Range {
                what: "angle count",
                value: 0,
                min: 1,
                max: usize::MAX,
            });
        }
        const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
        if angles
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0 || *a > HALF_PI + 1e-12)
        {
            return Err(Error::InvalidValue {
                what: "principal angles",
                reason: "angle outside [0, pi/2]".into(),
            });
        }
        angles.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
        for a in &mut angles {
            *a = a.min(HALF_PI);
        }
        let sines: Vec<f64> = angles.iter().map(|a| a.sin().clamp(0.0, 1.0)).collect();
        let log_amplification = sines
            .iter()
            .map(|&s| if s > 0.0 { -s.ln() } else { f64::INFINITY })
            .sum();
        Ok(Self {
            angles,
            sines,
            log_amplification,
        })
    }

    /// Angles in radians, ascending.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn sines(&self) -> &[f64] {
        &self.sines
    }

    /// Σ −ln sin θᵢ; +∞ when some angle is 0.
    pub fn log_amplification(&self) -> f64 {
        self.log_amplification
    }

    /// The smallest principal angle θ₁.
    pub fn smallest(&self) -> f64 {
        self.angles[0]
    }

    /// ∏ sin θᵢ.
    pub fn sine_product(&self) -> f64 {
        self.sines.iter().product()
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Principal angles between the spans of two orthonormal bases.
///
/// Returns `min(rank(u), rank(v))` angles: θᵢ = arccos σᵢ for the singular
/// values σᵢ of `uᵀv` clipped to [0, 1], with angles below 1e-4 recomputed
/// from the sine-based SVD of `v − u(uᵀv)` where arccos is ill-conditioned.
/// Deterministic for fixed inputs.
pub fn principal_angles(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<PrincipalAngleSet> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(Error::Dimension {
            what: "ambient dimension of the two subspaces",
            expected: u.ambient_dim(),
            actual: v.ambient_dim(),
        });
    }
    let p = u.rank().min(v.rank());

    let cross = u.q().transpose() * v.q();
    let svd = cross.clone().svd(false, false);
    // Descending cosines give ascending angles.
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .take(p)
        .map(|&s| s.clamp(0.0, 1.0).acos())
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));

    if angles
        .first()
        .is_some_and(|&a| a < SINE_REFINEMENT_THRESHOLD)
    {
        // sin θᵢ are the ascending singular values of (I − uuᵀ)v.
        let residual = v.q() - u.q() * &cross;
        let mut sines: Vec<f64> = residual
            .svd(false, false)
            .singular_values
            .iter()
            .map(|&s| s.clamp(0.0, 1.0))
            .collect();
        sines.sort_by(|a, b| a.partial_cmp(b).expect("finite sines"));
        for (angle, &sine) in angles.iter_mut().zip(sines.iter()) {
            if *angle < SINE_REFINEMENT_THRESHOLD {
                *angle = sine.asin();
            }
        }
        angles.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
    }

    PrincipalAngleSet::from_angles(angles)
}

/// Smallest principal angle between the spans of the first `j` identity and
/// first `j` expression basis columns, for j = 1..=max_components.
pub fn smallest_angle_curve(
    model: &ShapeModel,
    max_components: usize,
    tol: f64,
) -> Result<Vec<(usize, f64)>> {
    let limit = model.id_count().min(model.exp_count());
    if max_components < 1 || max_components > limit {
        return Err(Error::Range {
            what: "max_components",
            value: max_components,
            min: 1,
            max: limit,
        });
    }
    let mut curve = Vec::with_capacity(max_components);
    for j in 1..=max_components {
        let u = orthonormalize(&model.id_basis().columns(0, j).into_owned(), tol)?;
        let v = orthonormalize(&model.exp_basis().columns(0, j).into_owned(), tol)?;
        let angles = principal_angles(&u, &v)?;
        curve.push((j, angles.smallest()));
    }
    Ok(curve)
}

/// Volume of the d-ball of the given radius: π^(d/2) / Γ(d/2 + 1) · r^d.
///
/// Γ at integer and half-integer arguments is evaluated exactly by the
/// recurrence Γ(x+1) = xΓ(x) from Γ(1) = 1 and Γ(1/2) = √π.
pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    assert!(dim >= 1, "ball volume needs dim >= 1");
    assert!(radius > 0.0 && radius.is_finite());
    // Γ(dim/2 + 1), tracked as twice the argument to stay integral.
    let twice_arg = dim + 2;
    let (mut x, mut gamma) = if twice_arg.is_multiple_of(2) {
        (1.0_f64, 1.0_f64)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    while 2.0 * x + 1.0 < twice_arg as f64 {
        gamma *= x;
        x += 1.0;
    }
    let d = dim as f64;
    std::f64::consts::PI.powf(d / 2.0) / gamma * radius.powi(dim as i32)
}

/// Analytic and Monte Carlo measures of the latent set reached from an
/// ε-ball of shape noise.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureEstimate {
    /// Ball radius in shape-space units.
    pub epsilon: f64,
    /// Latent dimension m + k.
    pub dim: usize,
    /// Volume μ₀ of the ε-ball in dimension m + k.
    pub ball_measure_mu0: f64,
    /// Σ −ln sin θᵢ (equivalently −ln |det QᵀM|).
    pub log_amplification: f64,
    /// μ₀ ∏ 1/sin θᵢ; +∞ when flagged unbounded.
    pub analytic_alpha_measure: f64,
    /// μ₀ / sin θ₁, the smallest-angle lower bound.
    pub lower_bound: f64,
    /// Monte Carlo estimate from the covariance-determinant ratio of the
    /// image and source point clouds; `None` for analytic-only results or
    /// when flagged unbounded.
    pub mc_alpha_measure: Option<f64>,
    /// Relative standard error of the Monte Carlo estimate over sample
    /// batches.
    pub mc_rel_stderr: Option<f64>,
    /// Number of Monte Carlo samples (0 for analytic-only results).
    pub samples: u64,
    /// PRNG seed used for sampling.
    pub seed: Option<u64>,
    /// True when a sine fell below 1e-14 or the change of basis was
    /// numerically singular.
    pub unbounded: bool,
}

/// Analytic measure amplification from a set of principal angles:
/// `μ₀ · ∏ 1/sin θᵢ` with μ₀ the ε-ball volume in dimension m + k.
///
/// Sines below 1e-14 flag the result unbounded (measure +∞, no error).
pub fn amplification(
    angles: &PrincipalAngleSet,
    epsilon: f64,
    m: usize,
    k: usize,
) -> Result<MeasureEstimate> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidValue {
            what: "epsilon",
            reason: format!("{epsilon} is not a positive finite radius"),
        });
    }
    let expected = m.min(k);
    if angles.len() != expected {
        return Err(Error::Dimension {
            what: "principal angle count (must be min(m, k))",
            expected,
            actual: angles.len(),
        });
    }

    let dim = m + k;
    let mu0 = ball_volume(dim, epsilon);
    let unbounded = angles.sines().iter().any(|&s| s < SINE_FLOOR);
    let analytic = if unbounded {
        f64::INFINITY
    } else {
        (mu0.ln() + angles.log_amplification()).exp()
    };
    let sin_smallest = angles.sines()[0];
    let lower_bound = if sin_smallest < SINE_FLOOR {
        f64::INFINITY
    } else {
        mu0 / sin_smallest
    };

    Ok(MeasureEstimate {
        epsilon,
        dim,
        ball_measure_mu0: mu0,
        log_amplification: angles.log_amplification(),
        analytic_alpha_measure: analytic,
        lower_bound,
        mc_alpha_measure: None,
        mc_rel_stderr: None,
        samples: 0,
        seed: None,
        unbounded,
    })
}

/// Orthonormalized model bases together with the combined-span basis `Q`
/// (identity columns first) and the change-of-basis matrix `A = QᵀM`.
struct CombinedBasis {
    id: OrthonormalBasis,
    exp: OrthonormalBasis,
    change_of_basis: DMatrix<f64>,
}

/// Builds Q = [M_id | Q_exp] with Q_exp spanning the part of the expression
/// subspace orthogonal to the identity subspace, and A = Qᵀ[M_id | M_exp].
fn combined_basis(model: &ShapeModel, tol: f64) -> Result<CombinedBasis> {
    let m = model.id_count();
    let k = model.exp_count();
    if m == 0 || k == 0 {
        return Err(Error::DegenerateSubspace(
            "both identity and expression bases must be nonempty".into(),
        ));
    }
    let id = orthonormalize(model.basis(BasisSide::Identity), tol)?;
    let exp = orthonormalize(model.basis(BasisSide::Expression), tol)?;
    if id.rank() < m {
        return Err(Error::DegenerateSubspace(format!(
            "identity basis has rank {} < {m}",
            id.rank()
        )));
    }
    if exp.rank() < k {
        return Err(Error::DegenerateSubspace(format!(
            "expression basis has rank {} < {k}",
            exp.rank()
        )));
    }

    // Project the expression basis out of the identity span; a second pass
    // removes the reintroduced components below the first pass's rounding.
    let project_out = |mat: &DMatrix<f64>| mat - id.q() * (id.q().transpose() * mat);
    let complement = project_out(exp.q());
    let first = orthonormalize(&complement, tol).map_err(|_| {
        Error::DegenerateSubspace("identity and expression subspaces intersect".into())
    })?;
    if first.rank() < k {
        return Err(Error::DegenerateSubspace(format!(
            "combined basis has rank {} < {}",
            m + first.rank(),
            m + k
        )));
    }
    let q_exp = orthonormalize(&project_out(first.q()), tol)?;

    let n = model.ambient_dim();
    let mut q = DMatrix::zeros(n, m + k);
    q.columns_mut(0, m).copy_from(id.q());
    q.columns_mut(m, k).copy_from(q_exp.q());

    let mut stacked = DMatrix::zeros(n, m + k);
    stacked.columns_mut(0, m).copy_from(id.q());
    stacked.columns_mut(m, k).copy_from(exp.q());

    let change_of_basis = q.transpose() * stacked;
    Ok(CombinedBasis {
        id,
        exp,
        change_of_basis,
    })
}

/// Both sides of the determinant identity `|det(QᵀM)| = ∏ sin θᵢ`.
#[derive(Debug, Clone, Serialize)]
pub struct DeterminantIdentity {
    /// |det(QᵀM)| from the explicit combined-span basis.
    pub lhs: f64,
    /// ∏ sin θᵢ from the principal angles.
    pub rhs: f64,
    /// |lhs − rhs| / rhs.
    pub rel_error: f64,
}

/// Verifies the determinant identity on a model: the combined-span basis is
/// constructed with the orthonormalized identity columns first, and the
/// resulting |det(QᵀM)| is compared to the product of principal-angle sines.
pub fn determinant_identity_check(model: &ShapeModel, tol: f64) -> Result<DeterminantIdentity> {
    let combined = combined_basis(model, tol)?;
    let lhs = combined.change_of_basis.determinant().abs();
    let angles = principal_angles(&combined.id, &combined.exp)?;
    let rhs = angles.sine_product();
    let rel_error = (lhs - rhs).abs() / rhs;
    Ok(DeterminantIdentity {
        lhs,
        rhs,
        rel_error,
    })
}

/// Monte Carlo estimate of the latent-set measure: samples the ε-ball in
/// latent-ambient coordinates, maps each point through (QᵀM)⁻¹, and
/// estimates the image volume as μ₀ times the square root of the
/// covariance-determinant ratio between the image and source clouds.
///
/// The direct-determinant route μ₀/|det QᵀM| is folded into
/// `analytic_alpha_measure` as a cross check. Sampling is sequential and
/// deterministic in `seed` (ChaCha8 with a 64-bit seed); the standard error
/// comes from splitting the samples into 10 equal batches.
pub fn mc_measure_estimate(
    model: &ShapeModel,
    epsilon: f64,
    samples: u64,
    seed: u64,
    tol: f64,
) -> Result<MeasureEstimate> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidValue {
            what: "epsilon",
            reason: format!("{epsilon} is not a positive finite radius"),
        });
    }
    if samples < 1000 {
        return Err(Error::Range {
            what: "samples",
            value: samples as usize,
            min: 1000,
            max: usize::MAX,
        });
    }

    let combined = combined_basis(model, tol)?;
    let a = &combined.change_of_basis;
    let dim = a.nrows();
    let mu0 = ball_volume(dim, epsilon);
    let angles = principal_angles(&combined.id, &combined.exp)?;
    let sin_smallest = angles.sines()[0];
    let lower_bound = if sin_smallest < SINE_FLOOR {
        f64::INFINITY
    } else {
        mu0 / sin_smallest
    };

    let sigma = a.clone().svd(false, false).singular_values;
    let condition = sigma.max() / sigma.min();
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Ok(MeasureEstimate {
            epsilon,
            dim,
            ball_measure_mu0: mu0,
            log_amplification: f64::INFINITY,
            analytic_alpha_measure: f64::INFINITY,
            lower_bound,
            mc_alpha_measure: None,
            mc_rel_stderr: None,
            samples,
            seed: Some(seed),
            unbounded: true,
        });
    }

    let det_a = a.determinant().abs();
    let lu = a.clone().lu();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let batches = MC_BATCHES.min(samples) as usize;
    let mut acc = vec![CloudAccumulator::new(dim); batches];
    let mut point = DVector::zeros(dim);
    for i in 0..samples {
        sample_in_ball(&mut rng, epsilon, &mut point);
        let image = lu.solve(&point).expect("full-rank change of basis");
        let batch = ((i as u128 * batches as u128) / samples as u128) as usize;
        acc[batch].push(&point, &image);
    }

    let mut pooled = CloudAccumulator::new(dim);
    let mut batch_ratios = Vec::with_capacity(batches);
    for batch in &acc {
        batch_ratios.push(batch.volume_ratio());
        pooled.merge(batch);
    }
    let mc = mu0 * pooled.volume_ratio();
    let batch_mean = batch_ratios.iter().sum::<f64>() / batches as f64;
    let batch_var = batch_ratios
        .iter()
        .map(|r| (r - batch_mean).powi(2))
        .sum::<f64>()
        / (batches as f64 - 1.0);
    let stderr = mu0 * (batch_var / batches as f64).sqrt();
    let mc_rel_stderr = if mc > 0.0 { stderr / mc } else { f64::INFINITY };

    Ok(MeasureEstimate {
        epsilon,
        dim,
        ball_measure_mu0: mu0,
        log_amplification: -det_a.ln(),
        analytic_alpha_measure: mu0 / det_a,
        lower_bound,
        mc_alpha_measure: Some(mc),
        mc_rel_stderr: Some(mc_rel_stderr),
        samples,
        seed: Some(seed),
        unbounded: false,
    })
}

/// Draws a point uniformly from the ε-ball: a normalized Gaussian direction
/// scaled by ε·U^(1/d).
fn sample_in_ball(rng: &mut ChaCha8Rng, epsilon: f64, out: &mut DVector<f64>) {
    let dim = out.len();
    loop {
        for value in out.iter_mut() {
            *value = rng.sample(StandardNormal);
        }
        let norm = out.norm();
        if norm > 0.0 {
            let u: f64 = rng.random();
            let radius = epsilon * u.powf(1.0 / dim as f64);
            out.scale_mut(radius / norm);
            return;
        }
    }
}

/// Running first and second moments of paired source/image point clouds.
#[derive(Clone)]
struct CloudAccumulator {
    count: u64,
    src_sum: DVector<f64>,
    img_sum: DVector<f64>,
    src_outer: DMatrix<f64>,
    img_outer: DMatrix<f64>,
}

impl CloudAccumulator {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            src_sum: DVector::zeros(dim),
            img_sum: DVector::zeros(dim),
            src_outer: DMatrix::zeros(dim, dim),
            img_outer: DMatrix::zeros(dim, dim),
        }
    }

    fn push(&mut self, src: &DVector<f64>, img: &DVector<f64>) {
        self.count += 1;
        self.src_sum += src;
        self.img_sum += img;
        self.src_outer.ger(1.0, src, src, 1.0);
        self.img_outer.ger(1.0, img, img, 1.0);
    }

    fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.src_sum += &other.src_sum;
        self.img_sum += &other.img_sum;
        self.src_outer += &other.src_outer;
        self.img_outer += &other.img_outer;
    }

    /// sqrt(det Cov_image / det Cov_source), the volume scale of the map.
    fn volume_ratio(&self) -> f64 {
        let n = self.count as f64;
        let cov = |sum: &DVector<f64>, outer: &DMatrix<f64>| {
            let mean = sum / n;
            let mut cov = outer / n;
            cov.ger(-1.0, &mean, &mean, 1.0);
            cov
        };
        let det_src = cov(&self.src_sum, &self.src_outer).determinant();
        let det_img = cov(&self.img_sum, &self.img_outer).determinant();
        (det_img / det_src).sqrt()
    }
}
