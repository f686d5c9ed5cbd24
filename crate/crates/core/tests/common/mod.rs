//! Naive dense reference implementations: scalar loops over `(i, r, t)`, the
//! full `N T × N T` covariance, explicit inverses.
#![allow(dead_code)]

use gcm_core::model::{Dims, GrowthCurveDataset};
use gcm_core::CovarianceComponents;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn assert_mat_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64, what: &str) {
    assert_eq!(a.shape(), b.shape(), "{what}: shape");
    for (k, (x, y)) in a.iter().zip(b.iter()).enumerate() {
        assert!(close(*x, *y, tol), "{what}: entry {k}: {x} vs {y}");
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random SPD matrix `A Aᵀ + 0.5 I`.
pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| normal(rng));
    let mut m = &a * a.transpose();
    for k in 0..n {
        m[(k, k)] += 0.5;
    }
    (&m + m.transpose()) * 0.5
}

pub fn random_components(r: usize, t: usize, rng: &mut ChaCha8Rng) -> CovarianceComponents {
    let sigma_r = random_spd(r, rng);
    let st = random_spd(t, rng);
    let sigma_t = &st * (t as f64 / st.trace());
    let sigma_zeta = random_spd(2, rng) * 0.5;
    CovarianceComponents::new(sigma_r, sigma_t, sigma_zeta).unwrap()
}

/// Dataset with a shared factor across regions so that the off-diagonal
/// spatial moments are clearly nonzero.
pub fn random_dataset(dims: Dims, rng: &mut ChaCha8Rng) -> GrowthCurveDataset {
    let Dims {
        n_subjects: n,
        n_regions: r,
        n_times: t,
        n_static: p,
        n_dynamic: q,
    } = dims;
    let loadings: Vec<f64> = (0..r).map(|_| 0.5 + rng.random::<f64>()).collect();
    let mut y = Vec::with_capacity(n * r * t);
    for _ in 0..n {
        let common: Vec<f64> = (0..t).map(|_| normal(rng)).collect();
        for &l in &loadings {
            for &c in &common {
                y.push(l * c + 0.5 * normal(rng));
            }
        }
    }
    let times: Vec<f64> = (0..n * t).map(|_| rng.random::<f64>()).collect();
    let statics: Vec<f64> = (0..n * p).map(|_| normal(rng)).collect();
    let dynamics: Vec<f64> = (0..n * t * q).map(|_| normal(rng)).collect();
    GrowthCurveDataset::new(dims, y, times, statics, dynamics).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `y̌[i][r][t]`.
pub fn naive_centered(ds: &GrowthCurveDataset) -> Vec<Vec<Vec<f64>>> {
    let (n, r, t) = (ds.n_subjects(), ds.n_regions(), ds.n_times());
    let mut out = vec![vec![vec![0.0; t]; r]; n];
    for rr in 0..r {
        for tt in 0..t {
            let mut mean = 0.0;
            for i in 0..n {
                mean += ds.response(i, rr, tt);
            }
            mean /= n as f64;
            for i in 0..n {
                out[i][rr][tt] = ds.response(i, rr, tt) - mean;
            }
        }
    }
    out
}

pub fn naive_sigma1(y: &[Vec<Vec<f64>>]) -> DMatrix<f64> {
    let (n, r, t) = (y.len(), y[0].len(), y[0][0].len());
    let mut s = DMatrix::zeros(r, r);
    for yi in y {
        for a in 0..r {
            for b in 0..r {
                let mut acc = 0.0;
                for tt in 0..t {
                    acc += yi[a][tt] * yi[b][tt];
                }
                s[(a, b)] += acc / t as f64;
            }
        }
    }
    s / n as f64
}

pub fn naive_sigma2(y: &[Vec<Vec<f64>>], r1: usize, r2: usize) -> DMatrix<f64> {
    let (n, t) = (y.len(), y[0][0].len());
    let mut s = DMatrix::zeros(t, t);
    for yi in y {
        for a in 0..t {
            for b in 0..t {
                s[(a, b)] += yi[r1][a] * yi[r2][b];
            }
        }
    }
    s / n as f64
}

pub fn naive_sigma3(y: &[Vec<Vec<f64>>], i: usize) -> DMatrix<f64> {
    let (r, t) = (y[0].len(), y[0][0].len());
    let mut s = DMatrix::zeros(t, t);
    for rr in 0..r {
        for a in 0..t {
            for b in 0..t {
                s[(a, b)] += y[i][rr][a] * y[i][rr][b];
            }
        }
    }
    s / r as f64
}

/// All pairs `r1 < r2` ordered by decreasing `|[Σ̂_1]_{r1,r2}|`, first `k`.
pub fn naive_top_pairs(s1: &DMatrix<f64>, k: usize) -> Vec<(usize, usize)> {
    let r = s1.nrows();
    let mut all = Vec::new();
    for a in 0..r {
        for b in (a + 1)..r {
            all.push((a, b));
        }
    }
    all.sort_by(|x, y| s1[*y].abs().partial_cmp(&s1[*x].abs()).unwrap());
    all.truncate(k);
    all
}

pub fn naive_temporal(y: &[Vec<Vec<f64>>], s1: &DMatrix<f64>, pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let t = y[0][0].len();
    let mut s = DMatrix::zeros(t, t);
    for &(a, b) in pairs {
        s += naive_sigma2(y, a, b) / s1[(a, b)];
    }
    s /= pairs.len() as f64;
    (&s + s.transpose()) * 0.5
}

pub fn basis_of(ds: &GrowthCurveDataset, i: usize) -> DMatrix<f64> {
    let g = ds.times_of(i);
    DMatrix::from_fn(g.len(), 2, |t, c| if c == 0 { 1.0 } else { g[t] })
}

/// For `T = 3`: the normalized cross product of the two basis columns.
pub fn naive_u(g: &DMatrix<f64>) -> DVector<f64> {
    assert_eq!(g.nrows(), 3);
    let a = g.column(0);
    let b = g.column(1);
    let c = DVector::from_vec(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]);
    let n = c.norm();
    c / n
}

/// Minimum-norm duals: rows of the Moore-Penrose inverse of `G`.
pub fn naive_v(g: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let pinv = g.clone().pseudo_inverse(1e-14).unwrap();
    (pinv.row(0).transpose(), pinv.row(1).transpose())
}

pub fn naive_kappa(ds: &GrowthCurveDataset, y: &[Vec<Vec<f64>>], sigma_t: &DMatrix<f64>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..ds.n_subjects() {
        let u = naive_u(&basis_of(ds, i));
        num += (u.transpose() * naive_sigma3(y, i) * &u)[(0, 0)];
        den += (u.transpose() * sigma_t * &u)[(0, 0)];
    }
    num / den
}

pub fn naive_zeta(ds: &GrowthCurveDataset, y: &[Vec<Vec<f64>>], sigma_t: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    let n = ds.n_subjects();
    let mut z = DMatrix::zeros(2, 2);
    for i in 0..n {
        let (v1, v2) = naive_v(&basis_of(ds, i));
        let v = [v1, v2];
        let s3 = naive_sigma3(y, i);
        for a in 0..2 {
            for b in 0..2 {
                z[(a, b)] += (v[a].transpose() * &s3 * &v[b])[(0, 0)] - kappa * (v[a].transpose() * sigma_t * &v[b])[(0, 0)];
            }
        }
    }
    z /= n as f64;
    (&z + z.transpose()) * 0.5
}

pub fn naive_diag(s1: &DMatrix<f64>, kappa: f64) -> Vec<f64> {
    let r = s1.nrows();
    let shift = s1.trace() / r as f64 - kappa;
    (0..r).map(|k| s1[(k, k)] - shift).collect()
}

/// Design matrix built row by row from its definition.
pub fn naive_design(ds: &GrowthCurveDataset) -> DMatrix<f64> {
    let d = ds.dims();
    let (n, t, p, q) = (d.n_subjects, d.n_times, d.n_static, d.n_dynamic);
    let cols = 2 + 2 * p + q;
    let mut x = DMatrix::zeros(n * t, cols);
    for i in 0..n {
        for tt in 0..t {
            let row = i * t + tt;
            let g = ds.times_of(i)[tt];
            x[(row, 0)] = 1.0;
            x[(row, 1)] = g;
            for k in 0..p {
                x[(row, 2 + k)] = ds.static_of(i)[k];
                x[(row, 2 + p + k)] = g * ds.static_of(i)[k];
            }
            for k in 0..q {
                x[(row, 2 + 2 * p + k)] = ds.dynamic_of(i, tt)[k];
            }
        }
    }
    x
}

/// `Σ^(r) = G (I_N ⊗ Σ_ζ) Gᵀ + diag(σ_rr Σ_T, …)` as one dense matrix.
pub fn naive_region_covariance(ds: &GrowthCurveDataset, c: &CovarianceComponents, r: usize) -> DMatrix<f64> {
    let (n, t) = (ds.n_subjects(), ds.n_times());
    let mut g = DMatrix::zeros(n * t, 2 * n);
    for i in 0..n {
        for tt in 0..t {
            g[(i * t + tt, 2 * i)] = 1.0;
            g[(i * t + tt, 2 * i + 1)] = ds.times_of(i)[tt];
        }
    }
    let kron = DMatrix::<f64>::identity(n, n).kronecker(&c.sigma_zeta);
    let mut s = &g * kron * g.transpose();
    for i in 0..n {
        for a in 0..t {
            for b in 0..t {
                s[(i * t + a, i * t + b)] += c.sigma_r[(r, r)] * c.sigma_t[(a, b)];
            }
        }
    }
    s
}

/// Dense GLS: returns `(β̂, diag{(Xᵀ Σ⁻¹ X)⁻¹})`, both `d × R`.
pub fn naive_gls(ds: &GrowthCurveDataset, c: &CovarianceComponents) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = naive_design(ds);
    let (n, r_len, t) = (ds.n_subjects(), ds.n_regions(), ds.n_times());
    let d = x.ncols();
    let mut beta = DMatrix::zeros(d, r_len);
    let mut var = DMatrix::zeros(d, r_len);
    for r in 0..r_len {
        let s_inv = naive_region_covariance(ds, c, r).try_inverse().unwrap();
        let mut y = DVector::zeros(n * t);
        for i in 0..n {
            for tt in 0..t {
                y[i * t + tt] = ds.response(i, r, tt);
            }
        }
        let m_inv = (x.transpose() * &s_inv * &x).try_inverse().unwrap();
        let b = &m_inv * x.transpose() * &s_inv * y;
        beta.set_column(r, &b);
        var.set_column(r, &m_inv.diagonal());
    }
    (beta, var)
}

fn worst_slice(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn worst_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    worst_slice(a.as_slice(), b.as_slice())
}

/// Largest scaled discrepancy between the library and the naive versions of
/// every estimation step and of the GLS solve, on one random instance with
/// `N ≤ 4`, `R ≤ 3`, `T = 3`.
pub fn oracle_discrepancy(seed: u64) -> f64 {
    use gcm_core::estimation::*;
    use gcm_core::model::{build_design, build_growth_basis, center_responses};

    let mut g = rng(seed);
    let dims = Dims {
        n_subjects: g.random_range(2..=4),
        n_regions: g.random_range(2..=3),
        n_times: 3,
        n_static: 1,
        n_dynamic: 1,
    };
    let ds = random_dataset(dims, &mut g);
    let y = naive_centered(&ds);
    let centered = center_responses(&ds).unwrap();
    let basis = build_growth_basis(&ds).unwrap();
    let mut worst = 0.0f64;

    let (moments, offdiag) = estimate_spatial_offdiag(&centered).unwrap();
    let s1 = naive_sigma1(&y);
    worst = worst.max(worst_mat(&moments.sigma1, &s1));
    let mut s1_off = s1.clone();
    s1_off.fill_diagonal(0.0);
    worst = worst.max(worst_mat(&offdiag, &s1_off));

    let r = dims.n_regions;
    let k = r.min(r * (r - 1) / 2);
    let pairs = select_top_pairs(&offdiag, k).unwrap();
    assert_eq!(pairs.pairs, naive_top_pairs(&s1, k));
    let temporal = estimate_temporal(&centered, &pairs).unwrap();
    worst = worst.max(worst_mat(&temporal.sigma_t, &naive_temporal(&y, &s1, &pairs.pairs)));

    let tm = temporal_moments(&centered);
    for i in 0..dims.n_subjects {
        worst = worst.max(worst_mat(&tm.sigma3[i], &naive_sigma3(&y, i)));
    }
    let ann = compute_annihilators(&basis).unwrap();
    for i in 0..dims.n_subjects {
        let gi = basis_of(&ds, i);
        let u = naive_u(&gi);
        let sign = if u.dot(&ann.u[i]) < 0.0 { -1.0 } else { 1.0 };
        worst = worst.max(worst_slice((ann.u[i].clone() * sign).as_slice(), u.as_slice()));
        let (v1, v2) = naive_v(&gi);
        worst = worst.max(worst_slice(ann.v1[i].as_slice(), v1.as_slice()));
        worst = worst.max(worst_slice(ann.v2[i].as_slice(), v2.as_slice()));
    }

    // steps 3–4 are compared on a fixed positive-definite Σ_T so that the
    // κ denominator is bounded away from zero
    let sigma_t = random_components(r, 3, &mut g).sigma_t;
    let kappa = estimate_kappa(&tm, &sigma_t, &ann).unwrap();
    worst = worst.max((kappa - naive_kappa(&ds, &y, &sigma_t)).abs() / kappa.abs().max(1.0));
    let zeta = estimate_zeta(&tm, &sigma_t, kappa, &ann).unwrap();
    worst = worst.max(worst_mat(&zeta.raw, &naive_zeta(&ds, &y, &sigma_t, kappa)));
    let diag = estimate_spatial_diag(&moments, kappa, f64::NEG_INFINITY);
    for (a, b) in diag.values.iter().zip(naive_diag(&s1, kappa)) {
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }

    let comps = random_components(r, 3, &mut g);
    let design = build_design(&ds);
    worst = worst.max(worst_mat(design.matrix(), &naive_design(&ds)));
    let fit = gcm_core::gls_fit(&ds, &design, &comps).unwrap();
    let (beta, var) = naive_gls(&ds, &comps);
    worst = worst.max(worst_mat(fit.coefficients.matrix(), &beta));
    worst = worst.max(worst_mat(&fit.precision_diagonals, &var));
    worst
}
