//! Synthetic growth-curve data with known covariance components and sparse
//! coefficients.

pub mod graph;

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CoefficientMatrix, CovarianceComponents, Dims, GrowthCurveDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemporalKind {
    /// `0.4^{|t1−t2|}`.
    Autoregressive,
    /// `1/(|t1−t2|+1)` up to lag 3, zero beyond.
    MovingAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpatialKind {
    Hub,
    SmallWorld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorFamily {
    Gaussian,
    /// Rademacher sign times Uniform[0.5, 1.5], scaled to unit variance.
    SubGaussian,
}

/// Rewiring probability of the small-world graph.
pub const REWIRE_PROBABILITY: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_subjects: usize,
    pub n_times: usize,
    pub n_regions: usize,
    pub n_static: usize,
    pub n_dynamic: usize,
    pub temporal: TemporalKind,
    pub spatial: SpatialKind,
    /// Fraction of nonzero entries among the tested coefficients `η`.
    pub omega: f64,
    /// Value of every nonzero `η` entry.
    pub signal: f64,
    /// Fraction of nonzero entries among the `ξ` coefficients.
    pub xi_sparsity: f64,
    pub xi_value: f64,
    pub error_family: ErrorFamily,
    pub seed: u64,
}

impl SimulationConfig {
    /// The reference design: `p = 10`, `q = 2`, `ω = 0.05`, nonzero
    /// coefficients `0.5`, 5% nonzero `ξ`, Gaussian errors.
    pub fn reference(n_subjects: usize, n_times: usize, n_regions: usize, temporal: TemporalKind, spatial: SpatialKind) -> Self {
        Self {
            n_subjects,
            n_times,
            n_regions,
            n_static: 10,
            n_dynamic: 2,
            temporal,
            spatial,
            omega: 0.05,
            signal: 0.5,
            xi_sparsity: 0.05,
            xi_value: 0.5,
            error_family: ErrorFamily::Gaussian,
            seed: 0,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n_subjects: self.n_subjects,
            n_regions: self.n_regions,
            n_times: self.n_times,
            n_static: self.n_static,
            n_dynamic: self.n_dynamic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.n_times == 0 || self.n_regions == 0 {
            return Err(Error::InvalidArgument("simulation dimensions must be positive".into()));
        }
        for (name, v) in [("omega", self.omega), ("xi_sparsity", self.xi_sparsity)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(alloc::format!("{name} = {v} is not in [0, 1]")));
            }
        }
        if self.spatial == SpatialKind::Hub && !self.n_regions.is_multiple_of(graph::HUB_GROUP_SIZE) {
            return Err(Error::InvalidArgument(alloc::format!(
                "hub design needs R divisible by {}, got {}",
                graph::HUB_GROUP_SIZE,
                self.n_regions
            )));
        }
        Ok(())
    }

    /// Generator for stream `stream` of this configuration's seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Temporal covariance scaled to trace `T`. The variance profile
/// `u_T = (1, 2, 3, 4, 1, 2, …)` is applied as `Σ″ = Σ′ ⊙ u_T u_Tᵀ`.
pub fn make_temporal(kind: TemporalKind, n_times: usize) -> DMatrix<f64> {
    let base = |a: usize, b: usize| -> f64 {
        let lag = a.abs_diff(b);
        match kind {
            TemporalKind::Autoregressive => 0.4f64.powi(lag as i32),
            TemporalKind::MovingAverage if lag <= 3 => 1.0 / (lag as f64 + 1.0),
            TemporalKind::MovingAverage => 0.0,
        }
    };
    let u = |a: usize| (a % 4 + 1) as f64;
    let raw = DMatrix::from_fn(n_times, n_times, |a, b| base(a, b) * u(a) * u(b));
    let scale = n_times as f64 / raw.trace();
    raw * scale
}

/// Off-diagonal precision weight: Uniform on `[−0.6, −0.2] ∪ [0.2, 0.6]`.
fn precision_weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let magnitude = rng.random_range(0.2..=0.6);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Spatial covariance from a sparse precision matrix.
///
/// Returns `(Σ_R, Ω″_R)` where `Ω″ = (Ω′ + δ I)/(1 + δ)` with
/// `δ = max(0.05, 0.05 − λ_min(Ω′))` and `Σ_R ∝ Ω″⁻¹` scaled to trace `R`.
pub fn make_spatial<R: Rng + ?Sized>(kind: SpatialKind, n_regions: usize, rng: &mut R) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let edges = match kind {
        SpatialKind::Hub => graph::hub_edges(n_regions)?,
        SpatialKind::SmallWorld => graph::small_world_edges(n_regions, REWIRE_PROBABILITY, rng)?,
    };
    let mut omega = DMatrix::identity(n_regions, n_regions);
    for (a, b) in edges {
        let w = precision_weight(rng);
        omega[(a, b)] = w;
        omega[(b, a)] = w;
    }
    let delta = (0.05f64).max(0.05 - linalg::min_eigenvalue(&omega));
    let mut shifted = omega;
    for k in 0..n_regions {
        shifted[(k, k)] += delta;
    }
    shifted /= 1.0 + delta;
    let mut sigma = Cholesky::new(shifted.clone())
        .ok_or_else(|| Error::InvalidArgument("shifted precision matrix is not positive definite".into()))?
        .inverse();
    linalg::symmetrize(&mut sigma);
    let scale = n_regions as f64 / sigma.trace();
    Ok((sigma * scale, shifted))
}

/// Random-effect covariance `T⁻¹ [[6, 3], [3, 9]]`.
pub fn reference_zeta(n_times: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[6.0, 3.0, 3.0, 9.0]) / n_times as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub components: CovarianceComponents,
    pub coefficients: CoefficientMatrix,
    /// `true` where `[η_r]_j = 0`; `R × (2p + 2)`.
    pub null_mask: DMatrix<bool>,
    /// `Ω″_R`, the precision matrix before inversion.
    pub precision_r: DMatrix<f64>,
}

impl GroundTruth {
    pub fn n_nonnull(&self) -> usize {
        self.null_mask.iter().filter(|&&null| !null).count()
    }
}

/// Places `round(fraction · rows · cols)` copies of `value` uniformly without
/// replacement over a `rows × cols` grid (`cols` = regions).
fn sparse_grid<R: Rng + ?Sized>(rows: usize, cols: usize, fraction: f64, value: f64, rng: &mut R) -> DMatrix<f64> {
    let cells = rows * cols;
    let k = ((fraction * cells as f64).round() as usize).min(cells);
    let mut out = DMatrix::zeros(rows, cols);
    for idx in sample(rng, cells, k).into_iter() {
        out[(idx % rows, idx / rows)] = value;
    }
    out
}

/// Draws the fixed part of a simulated study: `Σ_T`, `Σ_R`, `Σ_ζ` and sparse
/// coefficients.
pub fn draw_truth<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R) -> Result<GroundTruth> {
    config.validate()?;
    let dims = config.dims();
    let sigma_t = make_temporal(config.temporal, config.n_times);
    let (sigma_r, precision_r) = make_spatial(config.spatial, config.n_regions, rng)?;
    let components = CovarianceComponents::new(sigma_r, sigma_t, reference_zeta(config.n_times))?;

    let n_tested = dims.n_tested();
    let eta = sparse_grid(n_tested, config.n_regions, config.omega, config.signal, rng);
    let xi = sparse_grid(config.n_dynamic, config.n_regions, config.xi_sparsity, config.xi_value, rng);
    let mut beta = DMatrix::zeros(dims.n_coefficients(), config.n_regions);
    beta.view_mut((0, 0), (n_tested, config.n_regions)).copy_from(&eta);
    beta.view_mut((n_tested, 0), (config.n_dynamic, config.n_regions)).copy_from(&xi);
    let null_mask = DMatrix::from_fn(config.n_regions, n_tested, |r, j| eta[(j, r)] == 0.0);
    Ok(GroundTruth {
        components,
        coefficients: CoefficientMatrix::new(config.n_static, beta)?,
        null_mask,
        precision_r,
    })
}

/// Matrix-normal sampler with the square roots of the truth precomputed.
#[derive(Debug, Clone)]
pub struct DatasetSampler {
    dims: Dims,
    family: ErrorFamily,
    root_r: DMatrix<f64>,
    root_t: DMatrix<f64>,
    root_zeta: DMatrix<f64>,
    /// `B = (β^(1), …, β^(R))`, `d × R`.
    beta: DMatrix<f64>,
}

const SUB_GAUSSIAN_SCALE: f64 = 0.960_768_922_830_522_8; // 1 / sqrt(13/12)

impl DatasetSampler {
    pub fn new(config: &SimulationConfig, truth: &GroundTruth) -> Result<Self> {
        let dims = config.dims();
        let c = &truth.components;
        if c.n_regions() != dims.n_regions || c.n_times() != dims.n_times {
            return Err(Error::InvalidArgument("ground truth does not match the configuration".into()));
        }
        let root = |m: &DMatrix<f64>, name: &'static str| {
            linalg::sym_sqrt(m).ok_or(Error::NotPositiveDefinite { region: 0, subject: 0 }).map_err(|e| e.at_step(name))
        };
        Ok(Self {
            dims,
            family: config.error_family,
            root_r: root(&c.sigma_r, "spatial square root")?,
            root_t: root(&c.sigma_t, "temporal square root")?,
            root_zeta: root(&c.sigma_zeta, "random-effect square root")?,
            beta: truth.coefficients.matrix().clone(),
        })
    }

    fn innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            ErrorFamily::Gaussian => StandardNormal.sample(rng),
            ErrorFamily::SubGaussian => {
                let m: f64 = rng.random_range(0.5..1.5);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * m * SUB_GAUSSIAN_SCALE
            }
        }
    }

    /// Draws covariates, random effects and errors for every subject.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GrowthCurveDataset> {
        let Dims {
            n_subjects: n,
            n_times: t_len,
            n_static: p,
            n_dynamic: q,
            ..
        } = self.dims;
        let times: Vec<f64> = (0..n * t_len).map(|_| rng.random::<f64>()).collect();
        let statics: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
        let dynamics: Vec<f64> = (0..n * t_len * q).map(|_| StandardNormal.sample(rng)).collect();
        let skeleton = GrowthCurveDataset::new(self.dims, alloc::vec![0.0; n * self.dims.n_regions * t_len], times, statics, dynamics)?;
        let responses = self.responses_for(&skeleton, rng);
        skeleton.with_responses(responses)
    }

    /// Fresh responses (random effects and errors) for the covariates of
    /// `design_source`, which must match this sampler's dimensions.
    pub fn responses_for<R: Rng + ?Sized>(&self, design_source: &GrowthCurveDataset, rng: &mut R) -> Vec<f64> {
        let Dims {
            n_subjects: n,
            n_regions: r_len,
            n_times: t_len,
            n_static: p,
            n_dynamic: q,
        } = self.dims;
        assert_eq!(design_source.dims(), self.dims, "covariates do not match the sampler");
        let d = self.dims.n_coefficients();
        let mut responses = Vec::with_capacity(n * r_len * t_len);
        let mut xi = DMatrix::zeros(t_len, d);
        let mut z = DMatrix::zeros(r_len, t_len);
        for i in 0..n {
            let g = design_source.times_of(i);
            let x = design_source.static_of(i);
            for t in 0..t_len {
                let zt = design_source.dynamic_of(i, t);
                xi[(t, 0)] = 1.0;
                xi[(t, 1)] = g[t];
                for k in 0..p {
                    xi[(t, 2 + k)] = x[k];
                    xi[(t, 2 + p + k)] = g[t] * x[k];
                }
                for k in 0..q {
                    xi[(t, 2 + 2 * p + k)] = zt[k];
                }
            }
            for v in z.iter_mut() {
                *v = self.innovation(rng);
            }
            // R × T error with row covariance Σ_R and column covariance Σ_T
            let err = &self.root_r * &z * &self.root_t;
            let mean = &xi * &self.beta; // T × R
            for r in 0..r_len {
                let (w0, w1) = (self.innovation(rng), self.innovation(rng));
                let zeta0 = self.root_zeta[(0, 0)] * w0 + self.root_zeta[(0, 1)] * w1;
                let zeta1 = self.root_zeta[(1, 0)] * w0 + self.root_zeta[(1, 1)] * w1;
                for t in 0..t_len {
                    responses.push(mean[(t, r)] + zeta0 + zeta1 * g[t] + err[(r, t)]);
                }
            }
        }
        responses
    }
}

pub fn sample_dataset<R: Rng + ?Sized>(config: &SimulationConfig, truth: &GroundTruth, rng: &mut R) -> Result<GrowthCurveDataset> {
    DatasetSampler::new(config, truth)?.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autoregressive_four_points() {
        let s = make_temporal(TemporalKind::Autoregressive, 4);
        assert!((s.trace() - 4.0).abs() < 1e-12);
        assert!((s[(0, 1)] - 0.4 * 2.0 * 4.0 / 30.0).abs() < 1e-12);
        assert!((s[(0, 1)] - 0.1067).abs() < 1e-4);
        assert!((s[(3, 3)] - 16.0 * 4.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn moving_average_four_points() {
        let s = make_temporal(TemporalKind::MovingAverage, 4);
        // Σ″_{1,4} = (1/4)·1·4 = 1 and tr Σ″ = 30
        assert!((s[(0, 3)] - 4.0 / 30.0).abs() < 1e-12);
        assert!((s.trace() - 4.0).abs() < 1e-12);
        let s8 = make_temporal(TemporalKind::MovingAverage, 8);
        assert_eq!(s8[(0, 4)], 0.0);
        assert!((s8.trace() - 8.0).abs() < 1e-12);
        assert!(linalg::min_eigenvalue(&s8) > 0.0);
    }

    #[test]
    fn sub_gaussian_scale_is_unit_variance() {
        assert!((SUB_GAUSSIAN_SCALE - (12.0f64 / 13.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hub_precision_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (sigma, omega) = make_spatial(SpatialKind::Hub, 5, &mut rng).unwrap();
        assert!((sigma.trace() - 5.0).abs() < 1e-10);
        let mut nonzero = 0;
        for a in 0..5 {
            for b in (a + 1)..5 {
                if omega[(a, b)] != 0.0 {
                    nonzero += 1;
                    assert_eq!(a, 0);
                    assert_eq!(omega[(a, b)], omega[(b, a)]);
                }
            }
        }
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn truth_sparsity_counts() {
        let mut cfg = SimulationConfig::reference(20, 4, 50, TemporalKind::Autoregressive, SpatialKind::Hub);
        cfg.seed = 11;
        let truth = draw_truth(&cfg, &mut cfg.rng(0)).unwrap();
        // round(0.05 · 22 · 50) = 55
        assert_eq!(truth.n_nonnull(), 55);
        assert_eq!(truth.null_mask.iter().filter(|&&n| n).count(), 1100 - 55);
        let xi_nonzero = (0..50).flat_map(|r| truth.coefficients.xi(r).to_vec()).filter(|&v| v != 0.0).count();
        assert_eq!(xi_nonzero, 5);
    }
}
