//! Moment-based decomposition of the growth-curve error covariance.
//!
//! The estimator runs in five steps:
//!
//! 1. off-diagonal `Σ_R` from the pooled spatial moment `Σ̂_1`,
//! 2. `Σ_T` from the cross-region temporal moments of the `K` strongest pairs,
//! 3. `κ` and `Σ_ζ` from per-subject temporal moments projected on the
//!    annihilator vectors of each growth basis,
//! 4. diagonal `Σ_R` from `Σ̂_1` and `κ̂`,
//! 5. assembly of `Σ̂^(r)` (see [`crate::model::assemble_region_covariance`]).
//!
//! Every step is exposed on its own so the pipeline can be checked piece by
//! piece.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{center_responses, build_growth_basis, CenteredResponses, CovarianceComponents, GrowthBasis, GrowthCurveDataset};

/// Pairs whose `|[Σ̂_R]_{r1,r2}|` falls below this fraction of the median
/// absolute off-diagonal entry are not used as denominators.
pub const PAIR_FLOOR_RELATIVE: f64 = 1e-3;
/// Lower bound of the pair floor, relative to the largest absolute
/// off-diagonal entry.
pub const PAIR_FLOOR_MIN: f64 = 1e-12;
/// Floor for the estimated region variances `[Σ̂_R]_{r,r}`, relative to the
/// average raw variance `tr(Σ̂_1)/R`.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Eigenvalue floor of the temporal estimate relative to its mean eigenvalue.
pub const TEMPORAL_EIGEN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOptions {
    /// Number of region pairs used for `Σ̂_T`. Defaults to `min(R, R(R-1)/2)`.
    pub n_pairs: Option<usize>,
    /// Relative variance floor; see [`VARIANCE_FLOOR`].
    pub variance_floor: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            n_pairs: None,
            variance_floor: VARIANCE_FLOOR,
        }
    }
}

/// Pooled spatial moment `Σ̂_1 = (N T)⁻¹ Σ_i Σ_t y̌_{i,·,t} y̌_{i,·,t}ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSpatialMoments {
    pub sigma1: DMatrix<f64>,
    /// `Σ̂_{1,i}`, only filled by [`spatial_moments_per_subject`].
    pub per_subject: Option<Vec<DMatrix<f64>>>,
}

/// Centered responses stacked as an `N T × R` matrix (row `i T + t`).
fn stacked(centered: &CenteredResponses) -> DMatrix<f64> {
    let (n, r, t) = (centered.n_subjects, centered.n_regions, centered.n_times);
    let mut y = DMatrix::zeros(n * t, r);
    for i in 0..n {
        y.view_mut((i * t, 0), (t, r)).copy_from(&centered.subject_block(i));
    }
    y
}

pub fn spatial_moments(centered: &CenteredResponses) -> PooledSpatialMoments {
    let y = stacked(centered);
    let mut sigma1 = y.tr_mul(&y);
    sigma1 /= (centered.n_subjects * centered.n_times) as f64;
    linalg::symmetrize(&mut sigma1);
    PooledSpatialMoments {
        sigma1,
        per_subject: None,
    }
}

/// Same as [`spatial_moments`] but also keeps every `Σ̂_{1,i}`.
pub fn spatial_moments_per_subject(centered: &CenteredResponses) -> PooledSpatialMoments {
    let t = centered.n_times as f64;
    let per: Vec<DMatrix<f64>> = (0..centered.n_subjects)
        .map(|i| {
            let v = centered.subject_block(i);
            let mut m = v.tr_mul(&v);
            m /= t;
            linalg::symmetrize(&mut m);
            m
        })
        .collect();
    let mut sigma1 = DMatrix::zeros(centered.n_regions, centered.n_regions);
    for m in &per {
        sigma1 += m;
    }
    sigma1 /= centered.n_subjects as f64;
    PooledSpatialMoments {
        sigma1,
        per_subject: Some(per),
    }
}

/// Step 1: `[Σ̂_R]_{r1,r2} = [Σ̂_1]_{r1,r2}` for `r1 ≠ r2`. The returned
/// matrix has a zero diagonal; the diagonal is filled in by
/// [`estimate_spatial_diag`].
pub fn estimate_spatial_offdiag(centered: &CenteredResponses) -> Result<(PooledSpatialMoments, DMatrix<f64>)> {
    if centered.n_subjects < 2 {
        return Err(Error::TooFewSubjects(centered.n_subjects));
    }
    let moments = spatial_moments(centered);
    if !linalg::is_finite(&moments.sigma1) {
        return Err(Error::NonFinite { component: "spatial moment" });
    }
    let mut offdiag = moments.sigma1.clone();
    offdiag.fill_diagonal(0.0);
    Ok((moments, offdiag))
}

/// The `K` region pairs with the largest absolute off-diagonal estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    /// `(r1, r2)` with `r1 < r2`, ordered by decreasing `|value|`.
    pub pairs: Vec<(usize, usize)>,
    /// `[Σ̂_R]_{r1,r2}` for each pair (signed).
    pub values: Vec<f64>,
    /// Pairs with `|value|` below this are dropped by [`estimate_temporal`].
    pub floor: f64,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn select_top_pairs(offdiag: &DMatrix<f64>, k: usize) -> Result<PairSet> {
    let r = offdiag.nrows();
    let available = r * r.saturating_sub(1) / 2;
    if k > available {
        return Err(Error::TooManyPairs {
            requested: k,
            available,
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("at least one region pair is required".into()));
    }
    let mut all: Vec<(usize, usize, f64)> = Vec::with_capacity(available);
    for r1 in 0..r {
        for r2 in (r1 + 1)..r {
            all.push((r1, r2, offdiag[(r1, r2)]));
        }
    }
    let mut magnitudes: Vec<f64> = all.iter().map(|p| p.2.abs()).collect();
    magnitudes.sort_unstable_by(f64::total_cmp);
    let mid = magnitudes.len() / 2;
    let median = if magnitudes.len() % 2 == 1 {
        magnitudes[mid]
    } else {
        0.5 * (magnitudes[mid - 1] + magnitudes[mid])
    };
    let largest = magnitudes.last().copied().unwrap_or(0.0);
    let floor = (PAIR_FLOOR_RELATIVE * median).max(PAIR_FLOOR_MIN * largest);

    // stable: equal magnitudes stay in lexicographic order
    all.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()));
    all.truncate(k);
    Ok(PairSet {
        pairs: all.iter().map(|p| (p.0, p.1)).collect(),
        values: all.iter().map(|p| p.2).collect(),
        floor,
    })
}

/// `Σ̂_{2,r1,r2} = N⁻¹ Σ_i y̌_{i,r1,·} y̌_{i,r2,·}ᵀ` (not symmetric in general).
pub fn cross_region_moment(centered: &CenteredResponses, r1: usize, r2: usize) -> DMatrix<f64> {
    let t = centered.n_times;
    let mut m = DMatrix::zeros(t, t);
    for i in 0..centered.n_subjects {
        let a = centered.series(i, r1);
        let b = centered.series(i, r2);
        for col in 0..t {
            for row in 0..t {
                m[(row, col)] += a[row] * b[col];
            }
        }
    }
    m /= centered.n_subjects as f64;
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEstimate {
    /// Pair-averaged, symmetrized `Σ̂_T` (not trace normalized).
    pub sigma_t: DMatrix<f64>,
    pub used_pairs: usize,
    pub dropped_pairs: Vec<(usize, usize)>,
}

/// Step 2: `Σ̂_T = K⁻¹ Σ_{(r1,r2) ∈ S} Σ̂_{2,r1,r2} / [Σ̂_R]_{r1,r2}`, symmetrized.
pub fn estimate_temporal(centered: &CenteredResponses, pairs: &PairSet) -> Result<TemporalEstimate> {
    let t = centered.n_times;
    let mut acc = DMatrix::zeros(t, t);
    let mut used = 0usize;
    let mut dropped = Vec::new();
    for (&(r1, r2), &value) in pairs.pairs.iter().zip(&pairs.values) {
        if !(value.abs() >= pairs.floor && value != 0.0) {
            dropped.push((r1, r2));
            continue;
        }
        let m = cross_region_moment(centered, r1, r2);
        acc += m / value;
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoUsablePairs { floor: pairs.floor });
    }
    acc /= used as f64;
    linalg::symmetrize(&mut acc);
    if !linalg::is_finite(&acc) {
        return Err(Error::NonFinite { component: "temporal estimate" });
    }
    Ok(TemporalEstimate {
        sigma_t: acc,
        used_pairs: used,
        dropped_pairs: dropped,
    })
}

/// Per-subject temporal moments `Σ̂_{3,i} = R⁻¹ Σ_r y̌_{i,r,·} y̌_{i,r,·}ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMoments {
    pub sigma3: Vec<DMatrix<f64>>,
}

pub fn temporal_moments(centered: &CenteredResponses) -> TemporalMoments {
    let r = centered.n_regions as f64;
    let sigma3 = (0..centered.n_subjects)
        .map(|i| {
            let v = centered.subject_block(i);
            let mut m = v * v.transpose();
            m /= r;
            linalg::symmetrize(&mut m);
            m
        })
        .collect();
    TemporalMoments { sigma3 }
}

/// Null and dual vectors of each growth basis: `u_iᵀ G_i = 0` with
/// `‖u_i‖ = 1`, and `v_{i,j}ᵀ G_i = e_jᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnihilatorVectors {
    pub u: Vec<DVector<f64>>,
    pub v1: Vec<DVector<f64>>,
    pub v2: Vec<DVector<f64>>,
}

/// Orthonormalizes the columns of `[G | I_T]` in order (modified Gram-Schmidt
/// with one re-orthogonalization pass), skipping dependent columns. The last
/// vector spans part of `null(Gᵀ)`.
fn null_vector(g: &DMatrix<f64>) -> Option<DVector<f64>> {
    let t = g.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(t);
    let candidates = g
        .column_iter()
        .map(|c| c.into_owned())
        .chain((0..t).map(|k| {
            let mut e = DVector::zeros(t);
            e[k] = 1.0;
            e
        }));
    for cand in candidates {
        if basis.len() == t {
            break;
        }
        let norm0 = cand.norm();
        let mut v = cand;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-10 * norm0.max(1.0) {
            basis.push(v / norm);
        }
    }
    if basis.len() < 3 {
        return None;
    }
    basis.pop()
}

pub fn compute_annihilators(basis: &GrowthBasis) -> Result<AnnihilatorVectors> {
    let t = basis.n_times();
    if t < 3 {
        return Err(Error::TooFewTimePoints {
            required: 3,
            actual: t,
        });
    }
    let n = basis.n_subjects();
    let mut out = AnnihilatorVectors {
        u: Vec::with_capacity(n),
        v1: Vec::with_capacity(n),
        v2: Vec::with_capacity(n),
    };
    for (i, g) in basis.iter().enumerate() {
        let gram = g.tr_mul(g);
        let det = gram[(0, 0)] * gram[(1, 1)] - gram[(0, 1)] * gram[(1, 0)];
        let scale = gram[(0, 0)] * gram[(1, 1)];
        if !(det > 1e-12 * scale) {
            return Err(Error::RankDeficientBasis { subject: i });
        }
        let u = null_vector(g).ok_or(Error::RankDeficientBasis { subject: i })?;
        let inv_col1 = nalgebra::Vector2::new(gram[(1, 1)], -gram[(1, 0)]) / det;
        let inv_col2 = nalgebra::Vector2::new(-gram[(0, 1)], gram[(0, 0)]) / det;
        out.v1.push(g * inv_col1);
        out.v2.push(g * inv_col2);
        out.u.push(u);
    }
    Ok(out)
}

fn quad(a: &DVector<f64>, m: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    (m * b).dot(a)
}

/// Step 3a: `κ̂ = Σ_i u_iᵀ Σ̂_{3,i} u_i / Σ_i u_iᵀ Σ̂_T u_i`.
pub fn estimate_kappa(moments: &TemporalMoments, sigma_t: &DMatrix<f64>, ann: &AnnihilatorVectors) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (s3, u) in moments.sigma3.iter().zip(&ann.u) {
        num += quad(u, s3, u);
        den += quad(u, sigma_t, u);
    }
    if !(den > 0.0) {
        return Err(Error::NonPositiveKappaDenominator(den));
    }
    let kappa = num / den;
    if !kappa.is_finite() {
        return Err(Error::NonFinite { component: "kappa" });
    }
    Ok(kappa)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaEstimate {
    /// Symmetrized moment estimate before PSD repair.
    pub raw: DMatrix<f64>,
    pub sigma_zeta: DMatrix<f64>,
    /// Eigenvalues that were raised to zero.
    pub clamped: usize,
}

/// Step 3b: `[Σ̂_ζ]_{j1,j2} = N⁻¹ Σ_i (v_{i,j1}ᵀ Σ̂_{3,i} v_{i,j2} − κ̂ v_{i,j1}ᵀ Σ̂_T v_{i,j2})`,
/// symmetrized and projected onto the PSD cone.
pub fn estimate_zeta(
    moments: &TemporalMoments,
    sigma_t: &DMatrix<f64>,
    kappa: f64,
    ann: &AnnihilatorVectors,
) -> Result<ZetaEstimate> {
    if !kappa.is_finite() {
        return Err(Error::NonFinite { component: "kappa" });
    }
    let n = moments.sigma3.len();
    let mut raw = DMatrix::zeros(2, 2);
    for i in 0..n {
        let v = [&ann.v1[i], &ann.v2[i]];
        let s3 = &moments.sigma3[i];
        for j1 in 0..2 {
            for j2 in 0..2 {
                raw[(j1, j2)] += quad(v[j1], s3, v[j2]) - kappa * quad(v[j1], sigma_t, v[j2]);
            }
        }
    }
    raw /= n as f64;
    linalg::symmetrize(&mut raw);
    if !linalg::is_finite(&raw) {
        return Err(Error::NonFinite { component: "sigma_zeta" });
    }
    let repaired = linalg::repair_psd(&raw, 0.0);
    Ok(ZetaEstimate {
        raw,
        sigma_zeta: repaired.matrix,
        clamped: repaired.clamped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDiagonal {
    pub values: Vec<f64>,
    /// Regions whose estimate was raised to the floor.
    pub floored: Vec<usize>,
}

/// Step 4: `[Σ̂_R]_{r,r} = [Σ̂_1]_{r,r} − (tr(Σ̂_1)/R − κ̂)`, floored.
pub fn estimate_spatial_diag(moments: &PooledSpatialMoments, kappa: f64, floor: f64) -> SpatialDiagonal {
    let r = moments.sigma1.nrows();
    let shift = moments.sigma1.trace() / r as f64 - kappa;
    let mut floored = Vec::new();
    let values = (0..r)
        .map(|k| {
            let v = moments.sigma1[(k, k)] - shift;
            if v < floor {
                floored.push(k);
                floor
            } else {
                v
            }
        })
        .collect();
    SpatialDiagonal { values, floored }
}

/// Everything the estimator adjusted or discarded along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationDiagnostics {
    pub pairs: PairSet,
    pub dropped_pairs: Vec<(usize, usize)>,
    /// Eigenvalues of `Σ̂_T` raised to the floor before steps 3–4.
    pub temporal_clamped: usize,
    pub zeta_clamped: usize,
    pub raw_zeta: DMatrix<f64>,
    pub floored_regions: Vec<usize>,
    /// Factor `T / tr(Σ̂_T)` applied to `Σ̂_T` (and divided out of `Σ̂_R`, `κ̂`).
    pub trace_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub components: CovarianceComponents,
    pub diagnostics: EstimationDiagnostics,
}

/// Runs steps 1–4 and returns the components needed to assemble `Σ̂^(r)`.
///
/// `Σ̂_T` is rescaled to trace `T` at the end; `Σ̂_R` and `κ̂` are divided by
/// the same factor so that every `[Σ̂_R]_{r,r} Σ̂_T` is unchanged.
pub fn estimate_all(dataset: &GrowthCurveDataset, options: &EstimatorOptions) -> Result<CovarianceEstimate> {
    dataset.validate_for_estimation()?;
    let basis = build_growth_basis(dataset)?;
    let centered = center_responses(dataset)?;
    estimate_from_centered(&centered, &basis, options)
}

pub fn estimate_from_centered(
    centered: &CenteredResponses,
    basis: &GrowthBasis,
    options: &EstimatorOptions,
) -> Result<CovarianceEstimate> {
    let r = centered.n_regions;
    let t = centered.n_times;

    let (spatial, offdiag) = estimate_spatial_offdiag(centered).map_err(|e| e.at_step("step 1 (spatial off-diagonal)"))?;

    let k = options.n_pairs.unwrap_or_else(|| r.min(r * r.saturating_sub(1) / 2));
    let pairs = select_top_pairs(&offdiag, k).map_err(|e| e.at_step("step 2 (pair selection)"))?;
    let temporal = estimate_temporal(centered, &pairs).map_err(|e| e.at_step("step 2 (temporal)"))?;

    let mean_eigen = temporal.sigma_t.trace() / t as f64;
    let repaired_t = linalg::repair_psd(&temporal.sigma_t, TEMPORAL_EIGEN_FLOOR * mean_eigen.abs().max(f64::MIN_POSITIVE));
    let sigma_t_raw = repaired_t.matrix;

    let moments = temporal_moments(centered);
    let ann = compute_annihilators(basis).map_err(|e| e.at_step("step 3 (annihilators)"))?;
    let kappa_raw = estimate_kappa(&moments, &sigma_t_raw, &ann).map_err(|e| e.at_step("step 3 (kappa)"))?;
    let zeta = estimate_zeta(&moments, &sigma_t_raw, kappa_raw, &ann).map_err(|e| e.at_step("step 3 (zeta)"))?;

    let mean_variance = spatial.sigma1.trace() / r as f64;
    let diag = estimate_spatial_diag(&spatial, kappa_raw, options.variance_floor * mean_variance.max(f64::MIN_POSITIVE));

    let trace = sigma_t_raw.trace();
    if !(trace > 0.0) {
        return Err(Error::NonFinite { component: "temporal trace" }.at_step("step 2 (temporal)"));
    }
    let scale = t as f64 / trace;
    let mut sigma_t = sigma_t_raw * scale;
    linalg::symmetrize(&mut sigma_t);
    let mut sigma_r = offdiag;
    for (k, v) in diag.values.iter().enumerate() {
        sigma_r[(k, k)] = *v;
    }
    sigma_r /= scale;
    let kappa = kappa_raw / scale;

    let components = CovarianceComponents::with_kappa(sigma_r, sigma_t, zeta.sigma_zeta, kappa)
        .map_err(|e| e.at_step("step 5 (assembly)"))?;
    Ok(CovarianceEstimate {
        components,
        diagnostics: EstimationDiagnostics {
            dropped_pairs: temporal.dropped_pairs,
            pairs,
            temporal_clamped: repaired_t.clamped,
            zeta_clamped: zeta.clamped,
            raw_zeta: zeta.raw,
            floored_regions: diag.floored,
            trace_scale: scale,
        },
    })
}
