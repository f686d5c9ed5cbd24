//! Small dense helpers shared by the estimators and the simulator.

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Outcome of [`repair_psd`].
#[derive(Debug, Clone)]
pub struct PsdRepair {
    pub matrix: DMatrix<f64>,
    /// Number of eigenvalues raised to the floor.
    pub clamped: usize,
}

/// Clamps the eigenvalues of a symmetric matrix from below at `floor`.
///
/// Eigenvalues within a relative `1e-12` of the floor count as already
/// satisfying it, and a matrix that needs no clamping is returned unchanged,
/// so repairing twice gives exactly the first result.
pub fn repair_psd(m: &DMatrix<f64>, floor: f64) -> PsdRepair {
    let eig = m.clone().symmetric_eigen();
    let scale = eig
        .eigenvalues
        .iter()
        .fold(floor.abs(), |acc, v| acc.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let clamped = eig.eigenvalues.iter().filter(|&&v| v < floor - tol).count();
    if clamped == 0 {
        return PsdRepair {
            matrix: m.clone(),
            clamped,
        };
    }
    let values = eig.eigenvalues.map(|v| v.max(floor));
    let vecs = &eig.eigenvectors;
    let mut out = vecs * DMatrix::from_diagonal(&values) * vecs.transpose();
    symmetrize(&mut out);
    PsdRepair {
        matrix: out,
        clamped,
    }
}

/// Symmetric positive semi-definite square root via eigendecomposition.
///
/// Returns `None` when an eigenvalue is negative beyond round-off.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale.max(1.0)) {
        return None;
    }
    let roots: DVector<f64> = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let vecs = &eig.eigenvectors;
    let mut out = vecs * DMatrix::from_diagonal(&roots) * vecs.transpose();
    symmetrize(&mut out);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repair_clamps_negative_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let r = repair_psd(&m, 0.0);
        assert_eq!(r.clamped, 1);
        // eigenvalues 3 and -1 -> 3 and 0: (3/2) * ones
        for v in r.matrix.iter() {
            assert!((v - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn repair_is_idempotent_on_output() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 3.0, 0.5, 3.0, 2.0, -1.0, 0.5, -1.0, -0.5]);
        let once = repair_psd(&m, 0.0);
        let twice = repair_psd(&once.matrix, 0.0);
        assert_eq!(twice.clamped, 0);
        assert_eq!(once.matrix, twice.matrix);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = sym_sqrt(&m).unwrap();
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-12);
        assert!(sym_sqrt(&DMatrix::from_row_slice(1, 1, &[-1.0])).is_none());
    }
}
