//! Data containers of the growth curve model and the pieces assembled from
//! them: the fixed-effect design, the per-subject growth basis and the
//! block-diagonal per-region covariance.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DMatrixView, DVector, Dyn};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg;

/// Sizes shared by every array of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n_subjects: usize,
    pub n_regions: usize,
    pub n_times: usize,
    /// Time-invariant covariates per subject (`p`).
    pub n_static: usize,
    /// Time-varying covariates per observation (`q`).
    pub n_dynamic: usize,
}

impl Dims {
    /// Number of fixed effects per region, `2p + q + 2`.
    pub fn n_coefficients(&self) -> usize {
        2 * self.n_static + self.n_dynamic + 2
    }

    /// Size of the tested block `η_r`, `2p + 2`.
    pub fn n_tested(&self) -> usize {
        2 * self.n_static + 2
    }

    /// Total number of tested hypotheses, `(2p + 2) R`.
    pub fn n_hypotheses(&self) -> usize {
        self.n_tested() * self.n_regions
    }
}

/// Balanced longitudinal multi-response data.
///
/// Storage is flat and subject-major: responses are indexed `(i, r, t)`,
/// time values `(i, t)`, static covariates `(i, k)` and dynamic covariates
/// `(i, t, k)`, each with the last index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCurveDataset {
    dims: Dims,
    responses: Vec<f64>,
    time_values: Vec<f64>,
    static_covariates: Vec<f64>,
    dynamic_covariates: Vec<f64>,
}

fn check_len(array: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            array,
            expected,
            actual,
        });
    }
    Ok(())
}

impl GrowthCurveDataset {
    pub fn new(
        dims: Dims,
        responses: Vec<f64>,
        time_values: Vec<f64>,
        static_covariates: Vec<f64>,
        dynamic_covariates: Vec<f64>,
    ) -> Result<Self> {
        let Dims {
            n_subjects: n,
            n_regions: r,
            n_times: t,
            n_static: p,
            n_dynamic: q,
        } = dims;
        if n == 0 || r == 0 || t == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "subjects, regions and time points must be positive (N={n}, R={r}, T={t})"
            )));
        }
        check_len("responses", n * r * t, responses.len())?;
        check_len("time_values", n * t, time_values.len())?;
        check_len("static_covariates", n * p, static_covariates.len())?;
        check_len("dynamic_covariates", n * t * q, dynamic_covariates.len())?;
        let arrays: [(&'static str, &[f64]); 4] = [
            ("responses", &responses),
            ("time_values", &time_values),
            ("static_covariates", &static_covariates),
            ("dynamic_covariates", &dynamic_covariates),
        ];
        for (name, values) in arrays {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { component: name });
            }
        }
        Ok(Self {
            dims,
            responses,
            time_values,
            static_covariates,
            dynamic_covariates,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_subjects(&self) -> usize {
        self.dims.n_subjects
    }

    pub fn n_regions(&self) -> usize {
        self.dims.n_regions
    }

    pub fn n_times(&self) -> usize {
        self.dims.n_times
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn time_values(&self) -> &[f64] {
        &self.time_values
    }

    pub fn static_covariates(&self) -> &[f64] {
        &self.static_covariates
    }

    pub fn dynamic_covariates(&self) -> &[f64] {
        &self.dynamic_covariates
    }

    #[inline]
    pub fn response(&self, i: usize, r: usize, t: usize) -> f64 {
        let d = &self.dims;
        self.responses[(i * d.n_regions + r) * d.n_times + t]
    }

    pub fn times_of(&self, i: usize) -> &[f64] {
        let t = self.dims.n_times;
        &self.time_values[i * t..(i + 1) * t]
    }

    pub fn static_of(&self, i: usize) -> &[f64] {
        let p = self.dims.n_static;
        &self.static_covariates[i * p..(i + 1) * p]
    }

    pub fn dynamic_of(&self, i: usize, t: usize) -> &[f64] {
        let q = self.dims.n_dynamic;
        let base = (i * self.dims.n_times + t) * q;
        &self.dynamic_covariates[base..base + q]
    }

    /// Responses of subject `i` as a `T × R` view (column `r` is region `r`).
    pub fn subject_block(&self, i: usize) -> DMatrixView<'_, f64> {
        let (r, t) = (self.dims.n_regions, self.dims.n_times);
        DMatrixView::from_slice(&self.responses[i * r * t..(i + 1) * r * t], t, r)
    }

    /// Stacked response vector `y_r` of length `N T`, subject-major.
    pub fn region_vector(&self, r: usize) -> DVector<f64> {
        let d = &self.dims;
        DVector::from_iterator(
            d.n_subjects * d.n_times,
            (0..d.n_subjects).flat_map(|i| (0..d.n_times).map(move |t| (i, t)))
                .map(|(i, t)| self.response(i, r, t)),
        )
    }

    /// Same covariates, new responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        check_len("responses", self.responses.len(), responses.len())?;
        let mut out = self.clone();
        out.responses = responses;
        Ok(out)
    }

    /// Checks the requirements of the covariance estimator: at least three
    /// time points and non-constant time values for every subject.
    pub fn validate_for_estimation(&self) -> Result<()> {
        if self.dims.n_times < 3 {
            return Err(Error::TooFewTimePoints {
                required: 3,
                actual: self.dims.n_times,
            });
        }
        if self.dims.n_subjects < 2 {
            return Err(Error::TooFewSubjects(self.dims.n_subjects));
        }
        for i in 0..self.dims.n_subjects {
            if basis_is_degenerate(self.times_of(i)) {
                return Err(Error::RankDeficientBasis { subject: i });
            }
        }
        Ok(())
    }
}

/// `true` when `[1, g]` does not have full column rank.
fn basis_is_degenerate(g: &[f64]) -> bool {
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let spread: f64 = g.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale: f64 = g.iter().map(|v| v * v).sum::<f64>() + 1.0;
    g.len() < 2 || spread <= 1e-12 * scale
}

/// The stacked fixed-effect design `X` (`N T × (2p + q + 2)`).
///
/// Row `i T + t` is `(1, g, x, g·x, z)` for subject `i` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    dims: Dims,
    rows: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_columns(&self) -> usize {
        self.rows.ncols()
    }

    /// `X_i`, the `T` rows of subject `i`.
    pub fn subject_block(&self, i: usize) -> DMatrixView<'_, f64, nalgebra::U1, Dyn> {
        let t = self.dims.n_times;
        self.rows.rows(i * t, t)
    }
}

pub fn build_design(dataset: &GrowthCurveDataset) -> DesignMatrix {
    let dims = dataset.dims();
    let (n, t_len, p, q) = (dims.n_subjects, dims.n_times, dims.n_static, dims.n_dynamic);
    let mut rows = DMatrix::zeros(n * t_len, dims.n_coefficients());
    for i in 0..n {
        let x = dataset.static_of(i);
        for t in 0..t_len {
            let row = i * t_len + t;
            let g = dataset.times_of(i)[t];
            rows[(row, 0)] = 1.0;
            rows[(row, 1)] = g;
            for k in 0..p {
                rows[(row, 2 + k)] = x[k];
                rows[(row, 2 + p + k)] = g * x[k];
            }
            for (k, z) in dataset.dynamic_of(i, t).iter().enumerate().take(q) {
                rows[(row, 2 + 2 * p + k)] = *z;
            }
        }
    }
    DesignMatrix { dims, rows }
}

/// Per-subject growth bases `G_i = [1, g_i]`, the diagonal blocks of `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthBasis {
    per_subject: Vec<DMatrix<f64>>,
}

impl GrowthBasis {
    pub fn n_subjects(&self) -> usize {
        self.per_subject.len()
    }

    pub fn n_times(&self) -> usize {
        self.per_subject.first().map_or(0, |g| g.nrows())
    }

    pub fn subject(&self, i: usize) -> &DMatrix<f64> {
        &self.per_subject[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.per_subject.iter()
    }

    /// The block-diagonal `N T × 2 N` matrix `G`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, t) = (self.n_subjects(), self.n_times());
        let mut g = DMatrix::zeros(n * t, 2 * n);
        for (i, gi) in self.per_subject.iter().enumerate() {
            g.view_mut((i * t, 2 * i), (t, 2)).copy_from(gi);
        }
        g
    }
}

pub fn build_growth_basis(dataset: &GrowthCurveDataset) -> Result<GrowthBasis> {
    let t = dataset.n_times();
    let mut per_subject = Vec::with_capacity(dataset.n_subjects());
    for i in 0..dataset.n_subjects() {
        let g = dataset.times_of(i);
        if basis_is_degenerate(g) {
            return Err(Error::RankDeficientBasis { subject: i });
        }
        let mut gi = DMatrix::from_element(t, 2, 1.0);
        gi.column_mut(1).copy_from_slice(g);
        per_subject.push(gi);
    }
    Ok(GrowthBasis { per_subject })
}

/// The estimated (or true) pieces of the error law: spatial `Σ_R`, temporal
/// `Σ_T` with `tr Σ_T = T`, random-effect `Σ_ζ` and `κ = tr(Σ_R) / R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceComponents {
    pub sigma_r: DMatrix<f64>,
    pub sigma_t: DMatrix<f64>,
    pub sigma_zeta: DMatrix<f64>,
    pub kappa: f64,
}

impl CovarianceComponents {
    /// Builds components with `κ = tr(Σ_R) / R`.
    pub fn new(sigma_r: DMatrix<f64>, sigma_t: DMatrix<f64>, sigma_zeta: DMatrix<f64>) -> Result<Self> {
        let kappa = sigma_r.trace() / sigma_r.nrows().max(1) as f64;
        Self::with_kappa(sigma_r, sigma_t, sigma_zeta, kappa)
    }

    pub fn with_kappa(
        sigma_r: DMatrix<f64>,
        sigma_t: DMatrix<f64>,
        sigma_zeta: DMatrix<f64>,
        kappa: f64,
    ) -> Result<Self> {
        let named: [(&'static str, &DMatrix<f64>); 3] =
            [("sigma_r", &sigma_r), ("sigma_t", &sigma_t), ("sigma_zeta", &sigma_zeta)];
        for (name, m) in named {
            if !m.is_square() {
                return Err(Error::DimensionMismatch {
                    array: name,
                    expected: m.nrows(),
                    actual: m.ncols(),
                });
            }
            if !linalg::is_finite(m) {
                return Err(Error::NonFinite { component: name });
            }
            let scale = linalg::max_abs(m).max(1.0);
            if linalg::max_abs_diff(m, &m.transpose()) > 1e-12 * scale {
                return Err(Error::InvalidArgument(alloc::format!("{name} is not symmetric")));
            }
        }
        if sigma_zeta.nrows() != 2 {
            return Err(Error::DimensionMismatch {
                array: "sigma_zeta",
                expected: 2,
                actual: sigma_zeta.nrows(),
            });
        }
        let t = sigma_t.nrows() as f64;
        if (sigma_t.trace() - t).abs() > 1e-8 * t.max(1.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "temporal covariance trace {} differs from T = {t}",
                sigma_t.trace()
            )));
        }
        if !kappa.is_finite() {
            return Err(Error::NonFinite { component: "kappa" });
        }
        Ok(Self {
            sigma_r,
            sigma_t,
            sigma_zeta,
            kappa,
        })
    }

    pub fn n_regions(&self) -> usize {
        self.sigma_r.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.sigma_t.nrows()
    }
}

/// Block-diagonal covariance `Σ^(r)` of `G ζ_r + ε_r`, one `T × T` block per
/// subject: `G_i Σ_ζ G_iᵀ + [Σ_R]_{r,r} Σ_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCovariance {
    pub region: usize,
    pub blocks: Vec<DMatrix<f64>>,
}

impl RegionCovariance {
    pub fn cholesky(&self, i: usize) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.blocks[i].clone()).ok_or(Error::NotPositiveDefinite {
            region: self.region,
            subject: i,
        })
    }

    pub fn inverse_blocks(&self) -> Result<Vec<DMatrix<f64>>> {
        (0..self.blocks.len())
            .map(|i| self.cholesky(i).map(|c| c.inverse()))
            .collect()
    }

    pub fn log_det(&self) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.blocks.len() {
            let c = self.cholesky(i)?;
            total += c.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum::<f64>();
        }
        Ok(total)
    }

    /// The full `N T × N T` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.blocks.len();
        let t = self.blocks.first().map_or(0, |b| b.nrows());
        let mut out = DMatrix::zeros(n * t, n * t);
        for (i, b) in self.blocks.iter().enumerate() {
            out.view_mut((i * t, i * t), (t, t)).copy_from(b);
        }
        out
    }
}

/// Writes `G_i Σ_ζ G_iᵀ + s Σ_T` into `out`.
pub(crate) fn fill_block(out: &mut DMatrix<f64>, g: &[f64], zeta: &DMatrix<f64>, s: f64, sigma_t: &DMatrix<f64>) {
    let (z00, z01, z11) = (zeta[(0, 0)], 0.5 * (zeta[(0, 1)] + zeta[(1, 0)]), zeta[(1, 1)]);
    let t_len = g.len();
    for b in 0..t_len {
        for a in b..t_len {
            let v = z00 + z01 * (g[a] + g[b]) + z11 * g[a] * g[b] + s * sigma_t[(a, b)];
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
}

pub fn assemble_region_covariance(
    components: &CovarianceComponents,
    basis: &GrowthBasis,
    r: usize,
) -> Result<RegionCovariance> {
    if r >= components.n_regions() {
        return Err(Error::InvalidArgument(alloc::format!(
            "region {r} out of range for {} regions",
            components.n_regions()
        )));
    }
    if basis.n_times() != components.n_times() {
        return Err(Error::DimensionMismatch {
            array: "sigma_t",
            expected: basis.n_times(),
            actual: components.n_times(),
        });
    }
    let s = components.sigma_r[(r, r)];
    if !s.is_finite() {
        return Err(Error::NonFinite { component: "sigma_r" });
    }
    if !linalg::is_finite(&components.sigma_t) {
        return Err(Error::NonFinite { component: "sigma_t" });
    }
    if !linalg::is_finite(&components.sigma_zeta) {
        return Err(Error::NonFinite { component: "sigma_zeta" });
    }
    let t = basis.n_times();
    let blocks = basis
        .iter()
        .map(|gi| {
            let mut b = DMatrix::zeros(t, t);
            fill_block(&mut b, gi.column(1).as_slice(), &components.sigma_zeta, s, &components.sigma_t);
            b
        })
        .collect();
    Ok(RegionCovariance { region: r, blocks })
}

/// Responses centered by the cross-subject mean at each `(r, t)`, in the
/// dataset's `(i, r, t)` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredResponses {
    pub n_subjects: usize,
    pub n_regions: usize,
    pub n_times: usize,
    pub values: Vec<f64>,
}

impl CenteredResponses {
    /// `T × R` view of subject `i`.
    pub fn subject_block(&self, i: usize) -> DMatrixView<'_, f64> {
        let len = self.n_regions * self.n_times;
        DMatrixView::from_slice(&self.values[i * len..(i + 1) * len], self.n_times, self.n_regions)
    }

    /// Time series of subject `i` in region `r`.
    pub fn series(&self, i: usize, r: usize) -> &[f64] {
        let base = (i * self.n_regions + r) * self.n_times;
        &self.values[base..base + self.n_times]
    }
}

pub fn center_responses(dataset: &GrowthCurveDataset) -> Result<CenteredResponses> {
    let dims = dataset.dims();
    let n = dims.n_subjects;
    if n < 2 {
        return Err(Error::TooFewSubjects(n));
    }
    let cell = dims.n_regions * dims.n_times;
    let mut mean = alloc::vec![0.0; cell];
    for chunk in dataset.responses().chunks_exact(cell) {
        for (m, v) in mean.iter_mut().zip(chunk) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let values = dataset
        .responses()
        .chunks_exact(cell)
        .flat_map(|chunk| chunk.iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    Ok(CenteredResponses {
        n_subjects: n,
        n_regions: dims.n_regions,
        n_times: dims.n_times,
        values,
    })
}

/// Fixed effects `β^(r)` stored column-wise (`(2p + q + 2) × R`).
///
/// Rows `0..2p+2` hold `η_r = (μ_0, μ_1, γ_0, γ_1)`, the remaining `q` rows
/// hold `ξ_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    n_static: usize,
    values: DMatrix<f64>,
}

impl CoefficientMatrix {
    pub fn new(n_static: usize, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 * n_static + 2 {
            return Err(Error::DimensionMismatch {
                array: "coefficients",
                expected: 2 * n_static + 2,
                actual: values.nrows(),
            });
        }
        Ok(Self { n_static, values })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            n_static: dims.n_static,
            values: DMatrix::zeros(dims.n_coefficients(), dims.n_regions),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }

    pub fn n_regions(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_tested(&self) -> usize {
        2 * self.n_static + 2
    }

    pub fn region(&self, r: usize) -> DVector<f64> {
        self.values.column(r).into_owned()
    }

    pub fn eta(&self, r: usize) -> &[f64] {
        let d = self.values.nrows();
        &self.values.as_slice()[r * d..r * d + self.n_tested()]
    }

    pub fn xi(&self, r: usize) -> &[f64] {
        let d = self.values.nrows();
        &self.values.as_slice()[r * d + self.n_tested()..(r + 1) * d]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dataset(dims: Dims, g: Vec<f64>, x: Vec<f64>, z: Vec<f64>) -> GrowthCurveDataset {
        let y = vec![0.0; dims.n_subjects * dims.n_regions * dims.n_times];
        GrowthCurveDataset::new(dims, y, g, x, z).unwrap()
    }

    fn dims(n: usize, r: usize, t: usize, p: usize, q: usize) -> Dims {
        Dims {
            n_subjects: n,
            n_regions: r,
            n_times: t,
            n_static: p,
            n_dynamic: q,
        }
    }

    #[test]
    fn design_single_row() {
        let ds = dataset(dims(1, 1, 1, 1, 1), vec![0.5], vec![2.0], vec![3.0]);
        let x = build_design(&ds);
        assert_eq!(x.matrix().as_slice().len(), 5);
        let row: Vec<f64> = x.matrix().row(0).iter().copied().collect();
        assert_eq!(row, vec![1.0, 0.5, 2.0, 1.0, 3.0]);
    }

    #[test]
    fn design_intercept_and_time_only() {
        let ds = dataset(dims(1, 1, 2, 0, 0), vec![0.0, 1.0], vec![], vec![]);
        let x = build_design(&ds);
        assert_eq!(x.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]));
    }

    #[test]
    fn design_two_subjects() {
        let ds = dataset(dims(2, 1, 2, 1, 0), vec![0.0, 1.0, 0.0, 2.0], vec![1.0, -1.0], vec![]);
        let x = build_design(&ds);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 1.0, 0.0, //
                1.0, 1.0, 1.0, 1.0, //
                1.0, 0.0, -1.0, 0.0, //
                1.0, 2.0, -1.0, -2.0,
            ],
        );
        assert_eq!(x.matrix(), &expected);
        assert_eq!(x.subject_block(1).row(1)[3], -2.0);
    }

    #[test]
    fn dataset_rejects_bad_lengths() {
        let err = GrowthCurveDataset::new(dims(2, 1, 3, 1, 0), vec![0.0; 6], vec![0.0; 5], vec![0.0; 2], vec![])
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { array: "time_values", .. }));
        let err = GrowthCurveDataset::new(dims(2, 1, 3, 1, 1), vec![0.0; 6], vec![0.0; 6], vec![0.0; 2], vec![0.0; 5])
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { array: "dynamic_covariates", .. }));
    }

    #[test]
    fn growth_basis_definition() {
        let ds = dataset(dims(1, 1, 3, 0, 0), vec![0.0, 1.0, 2.0], vec![], vec![]);
        let b = build_growth_basis(&ds).unwrap();
        assert_eq!(b.subject(0), &DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]));

        let g = vec![0.1, 0.2, 0.3, 0.4];
        let ds = dataset(dims(1, 1, 4, 0, 0), g.clone(), vec![], vec![]);
        let b = build_growth_basis(&ds).unwrap();
        assert_eq!(b.subject(0).column(1).as_slice(), g.as_slice());
        assert!(b.subject(0).column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn growth_basis_rejects_constant_times() {
        let ds = dataset(dims(2, 1, 3, 0, 0), vec![0.0, 1.0, 2.0, 5.0, 5.0, 5.0], vec![], vec![]);
        assert_eq!(build_growth_basis(&ds).unwrap_err(), Error::RankDeficientBasis { subject: 1 });
        assert_eq!(ds.validate_for_estimation().unwrap_err(), Error::RankDeficientBasis { subject: 1 });
    }

    #[test]
    fn identity_region_covariance() {
        let ds = dataset(dims(2, 1, 3, 0, 0), vec![0.0, 0.5, 1.0, 0.2, 0.4, 0.9], vec![], vec![]);
        let basis = build_growth_basis(&ds).unwrap();
        let comps =
            CovarianceComponents::new(DMatrix::identity(1, 1), DMatrix::identity(3, 3), DMatrix::zeros(2, 2)).unwrap();
        let cov = assemble_region_covariance(&comps, &basis, 0).unwrap();
        for b in &cov.blocks {
            assert_eq!(b, &DMatrix::identity(3, 3));
        }
    }

    #[test]
    fn intercept_variance_block() {
        let ds = dataset(dims(1, 1, 2, 0, 0), vec![0.0, 1.0], vec![], vec![]);
        let basis = build_growth_basis(&ds).unwrap();
        let zeta = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let comps = CovarianceComponents::new(DMatrix::identity(1, 1), DMatrix::identity(2, 2), zeta).unwrap();
        let cov = assemble_region_covariance(&comps, &basis, 0).unwrap();
        assert_eq!(cov.blocks[0], DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        assert!((cov.log_det().unwrap() - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_component_is_reported() {
        let ds = dataset(dims(1, 1, 2, 0, 0), vec![0.0, 1.0], vec![], vec![]);
        let basis = build_growth_basis(&ds).unwrap();
        let mut comps =
            CovarianceComponents::new(DMatrix::identity(1, 1), DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        comps.sigma_zeta[(0, 0)] = f64::NAN;
        assert_eq!(
            assemble_region_covariance(&comps, &basis, 0).unwrap_err(),
            Error::NonFinite { component: "sigma_zeta" }
        );
    }

    #[test]
    fn centering_examples() {
        let ds = GrowthCurveDataset::new(dims(2, 1, 1, 0, 0), vec![1.0, 3.0], vec![0.0, 0.0], vec![], vec![]).unwrap();
        assert_eq!(center_responses(&ds).unwrap().values, vec![-1.0, 1.0]);
        let ds =
            GrowthCurveDataset::new(dims(3, 1, 1, 0, 0), vec![0.0, 1.0, 5.0], vec![0.0; 3], vec![], vec![]).unwrap();
        assert_eq!(center_responses(&ds).unwrap().values, vec![-2.0, -1.0, 3.0]);
        let ds = GrowthCurveDataset::new(dims(3, 2, 1, 0, 0), vec![4.0; 6], vec![0.0; 3], vec![], vec![]).unwrap();
        assert!(center_responses(&ds).unwrap().values.iter().all(|&v| v == 0.0));
        let ds = GrowthCurveDataset::new(dims(1, 1, 1, 0, 0), vec![1.0], vec![0.0], vec![], vec![]).unwrap();
        assert_eq!(center_responses(&ds).unwrap_err(), Error::TooFewSubjects(1));
    }

    #[test]
    fn trace_of_temporal_component_is_enforced() {
        let err = CovarianceComponents::new(DMatrix::identity(2, 2), DMatrix::identity(3, 3) * 2.0, DMatrix::zeros(2, 2));
        assert!(err.is_err());
    }

    #[test]
    fn coefficient_partition() {
        let d = dims(1, 2, 3, 1, 2);
        let mut c = CoefficientMatrix::zeros(d);
        c.matrix_mut()[(4, 1)] = 7.0;
        assert_eq!(c.eta(1).len(), 4);
        assert_eq!(c.xi(1), &[7.0, 0.0]);
    }
}
