//! Per-region generalized least squares with block-diagonal `Σ̂^(r)`.
//!
//! `Σ̂^(r)` is never formed as an `N T × N T` matrix. Each subject block is
//! factored (`B = L Lᵀ`), `[X_i | y_i]` is whitened by `L⁻¹` and the
//! normal equations are accumulated from the whitened rows.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{fill_block, CoefficientMatrix, CovarianceComponents, DesignMatrix, GrowthCurveDataset};
use crate::par::map_indices;

/// Normal matrices whose Jacobi-scaled condition number exceeds this are
/// rejected as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: CoefficientMatrix,
    /// `diag({Xᵀ (Σ̂^(r))⁻¹ X}⁻¹)`, one column per region.
    pub precision_diagonals: DMatrix<f64>,
    /// `J_{r,j}` for the tested block, `R × (2p + 2)`.
    pub statistics: DMatrix<f64>,
}

impl FitResult {
    pub fn n_regions(&self) -> usize {
        self.statistics.nrows()
    }

    pub fn standard_error(&self, r: usize, j: usize) -> f64 {
        self.precision_diagonals[(j, r)].sqrt()
    }
}

/// `J_{r,j} = β̂_j / sqrt(v_j)` over the first `n_tested` coefficients.
pub fn test_statistics(coefficients: &CoefficientMatrix, precision_diagonals: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n_tested = coefficients.n_tested();
    let regions = coefficients.n_regions();
    let mut out = DMatrix::zeros(regions, n_tested);
    for r in 0..regions {
        for j in 0..n_tested {
            let v = precision_diagonals[(j, r)];
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ZeroVariance {
                    region: r,
                    coefficient: j,
                });
            }
            out[(r, j)] = coefficients.matrix()[(j, r)] / v.sqrt();
        }
    }
    Ok(out)
}

fn check_shapes(design: &DesignMatrix, components: &CovarianceComponents) -> Result<()> {
    let dims = design.dims();
    if components.n_regions() != dims.n_regions {
        return Err(Error::DimensionMismatch {
            array: "sigma_r",
            expected: dims.n_regions,
            actual: components.n_regions(),
        });
    }
    if components.n_times() != dims.n_times {
        return Err(Error::DimensionMismatch {
            array: "sigma_t",
            expected: dims.n_times,
            actual: components.n_times(),
        });
    }
    if design.n_columns() > dims.n_subjects * dims.n_times {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} coefficients exceed {} observations per region",
            design.n_columns(),
            dims.n_subjects * dims.n_times
        )));
    }
    Ok(())
}

/// Factor of one subject block of region `r`.
fn block_factor(
    dataset_times: &[f64],
    components: &CovarianceComponents,
    r: usize,
    i: usize,
    scratch: &mut DMatrix<f64>,
) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    fill_block(scratch, dataset_times, &components.sigma_zeta, components.sigma_r[(r, r)], &components.sigma_t);
    Cholesky::new(scratch.clone()).ok_or(Error::NotPositiveDefinite { region: r, subject: i })
}

/// Inverts the normal matrix after checking its scaled condition number.
fn invert_normal(normal: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let d = normal.nrows();
    let scale: Vec<f64> = (0..d).map(|j| normal[(j, j)]).collect();
    if scale.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::SingularNormalEquations {
            region: r,
            condition: f64::INFINITY,
        });
    }
    let scaled = DMatrix::from_fn(d, d, |a, b| normal[(a, b)] / (scale[a] * scale[b]).sqrt());
    let eig = scaled.symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularNormalEquations { region: r, condition });
    }
    let chol = Cholesky::new(normal.clone()).ok_or(Error::SingularNormalEquations { region: r, condition })?;
    let mut inv = chol.inverse();
    crate::linalg::symmetrize(&mut inv);
    Ok(inv)
}

/// Fits region `r`; returns `β̂^(r)` and the diagonal of its covariance.
fn fit_region(
    dataset: &GrowthCurveDataset,
    design: &DesignMatrix,
    components: &CovarianceComponents,
    r: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let t = dataset.n_times();
    let d = design.n_columns();
    let mut scratch = DMatrix::zeros(t, t);
    let mut work = DMatrix::zeros(t, d + 1);
    let mut normal = DMatrix::zeros(d + 1, d + 1);
    for i in 0..dataset.n_subjects() {
        let chol = block_factor(dataset.times_of(i), components, r, i, &mut scratch)?;
        work.view_mut((0, 0), (t, d)).copy_from(&design.subject_block(i));
        for k in 0..t {
            work[(k, d)] = dataset.response(i, r, k);
        }
        chol.l_dirty().solve_lower_triangular_mut(&mut work);
        normal.gemm_tr(1.0, &work, &work, 1.0);
    }
    let xtx = normal.view((0, 0), (d, d)).into_owned();
    let xty = normal.view((0, d), (d, 1)).into_owned();
    let inv = invert_normal(&xtx, r)?;
    let beta = &inv * xty;
    Ok((beta.column(0).into_owned(), inv.diagonal()))
}

/// `β̂^(r) = {Xᵀ (Σ̂^(r))⁻¹ X}⁻¹ Xᵀ (Σ̂^(r))⁻¹ y_r` for every region, plus the
/// `J` statistics of the tested block.
pub fn gls_fit(dataset: &GrowthCurveDataset, design: &DesignMatrix, components: &CovarianceComponents) -> Result<FitResult> {
    check_shapes(design, components)?;
    let dims = dataset.dims();
    if design.dims() != dims {
        return Err(Error::InvalidArgument("design was built from a different dataset".into()));
    }
    let fits = map_indices(dims.n_regions, |r| fit_region(dataset, design, components, r));
    assemble(dims.n_static, dims.n_coefficients(), fits)
}

fn assemble(
    n_static: usize,
    d: usize,
    fits: Vec<Result<(DVector<f64>, DVector<f64>)>>,
) -> Result<FitResult> {
    let regions = fits.len();
    let mut beta = DMatrix::zeros(d, regions);
    let mut var = DMatrix::zeros(d, regions);
    for (r, fit) in fits.into_iter().enumerate() {
        let (b, v) = fit?;
        beta.set_column(r, &b);
        var.set_column(r, &v);
    }
    let coefficients = CoefficientMatrix::new(n_static, beta)?;
    let statistics = test_statistics(&coefficients, &var)?;
    Ok(FitResult {
        coefficients,
        precision_diagonals: var,
        statistics,
    })
}

/// GLS projections for a fixed design and covariance, reusable across many
/// response draws: `β̂^(r) = A_r y_r` with `A_r = {Xᵀ Σ⁻¹ X}⁻¹ Xᵀ Σ⁻¹`.
#[derive(Debug, Clone)]
pub struct PreparedGls {
    n_static: usize,
    n_subjects: usize,
    n_times: usize,
    projections: Vec<DMatrix<f64>>,
    precision_diagonals: DMatrix<f64>,
}

impl PreparedGls {
    pub fn new(dataset: &GrowthCurveDataset, design: &DesignMatrix, components: &CovarianceComponents) -> Result<Self> {
        check_shapes(design, components)?;
        let dims = dataset.dims();
        let (n, t, d) = (dims.n_subjects, dims.n_times, design.n_columns());
        let prepared = map_indices(dims.n_regions, |r| -> Result<(DMatrix<f64>, DVector<f64>)> {
            let mut scratch = DMatrix::zeros(t, t);
            // (Σ^(r))⁻¹ X, transposed: d × N T
            let mut weighted = DMatrix::zeros(d, n * t);
            let mut normal = DMatrix::zeros(d, d);
            for i in 0..n {
                let chol = block_factor(dataset.times_of(i), components, r, i, &mut scratch)?;
                let xi = design.subject_block(i).into_owned();
                let ci = chol.solve(&xi);
                normal.gemm_tr(1.0, &xi, &ci, 1.0);
                weighted.view_mut((0, i * t), (d, t)).copy_from(&ci.transpose());
            }
            crate::linalg::symmetrize(&mut normal);
            let inv = invert_normal(&normal, r)?;
            Ok((&inv * weighted, inv.diagonal()))
        });
        let mut projections = Vec::with_capacity(dims.n_regions);
        let mut var = DMatrix::zeros(d, dims.n_regions);
        for (r, p) in prepared.into_iter().enumerate() {
            let (a, v) = p?;
            projections.push(a);
            var.set_column(r, &v);
        }
        Ok(Self {
            n_static: dims.n_static,
            n_subjects: n,
            n_times: t,
            projections,
            precision_diagonals: var,
        })
    }

    pub fn precision_diagonals(&self) -> &DMatrix<f64> {
        &self.precision_diagonals
    }

    /// Fits new responses laid out like [`GrowthCurveDataset::responses`].
    pub fn fit(&self, responses: &[f64]) -> Result<FitResult> {
        let (n, t) = (self.n_subjects, self.n_times);
        let regions = self.projections.len();
        if responses.len() != n * regions * t {
            return Err(Error::DimensionMismatch {
                array: "responses",
                expected: n * regions * t,
                actual: responses.len(),
            });
        }
        let d = self.precision_diagonals.nrows();
        let mut beta = DMatrix::zeros(d, regions);
        let mut y = DVector::zeros(n * t);
        for (r, a) in self.projections.iter().enumerate() {
            for i in 0..n {
                let base = (i * regions + r) * t;
                y.rows_mut(i * t, t).copy_from_slice(&responses[base..base + t]);
            }
            beta.set_column(r, &(a * &y));
        }
        let coefficients = CoefficientMatrix::new(self.n_static, beta)?;
        let statistics = test_statistics(&coefficients, &self.precision_diagonals)?;
        Ok(FitResult {
            coefficients,
            precision_diagonals: self.precision_diagonals.clone(),
            statistics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_design, Dims};
    use alloc::vec;

    #[test]
    fn statistic_arithmetic() {
        let coef = CoefficientMatrix::new(0, DMatrix::from_row_slice(2, 1, &[0.5, 0.0])).unwrap();
        let var = DMatrix::from_row_slice(2, 1, &[0.25, 1.0]);
        let j = test_statistics(&coef, &var).unwrap();
        assert_eq!(j[(0, 0)], 1.0);
        assert_eq!(j[(0, 1)], 0.0);
        let bad = DMatrix::from_row_slice(2, 1, &[0.25, 0.0]);
        assert_eq!(
            test_statistics(&coef, &bad).unwrap_err(),
            Error::ZeroVariance {
                region: 0,
                coefficient: 1
            }
        );
    }

    #[test]
    fn singular_design_is_rejected() {
        // p = 1 with x identical across subjects duplicates the intercept column
        let dims = Dims {
            n_subjects: 3,
            n_regions: 1,
            n_times: 3,
            n_static: 1,
            n_dynamic: 0,
        };
        let g = vec![0.0, 0.5, 1.0, 0.1, 0.4, 0.9, 0.0, 0.3, 0.8];
        let ds = GrowthCurveDataset::new(dims, vec![1.0; 9], g, vec![2.0; 3], vec![]).unwrap();
        let x = build_design(&ds);
        let comps =
            CovarianceComponents::new(DMatrix::identity(1, 1), DMatrix::identity(3, 3), DMatrix::zeros(2, 2)).unwrap();
        let err = gls_fit(&ds, &x, &comps).unwrap_err();
        assert!(matches!(err, Error::SingularNormalEquations { region: 0, .. }));
    }
}
