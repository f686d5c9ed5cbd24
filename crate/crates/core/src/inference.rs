//! Simultaneous inference on the tested coefficient block: a max-statistic
//! global test calibrated by its Gumbel limit, and a multiple test that
//! controls the estimated false discovery proportion.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Upper tail `1 − Φ(x)` of the standard normal.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Smallest `τ ∈ [lo, hi]` with `accept(τ)`, for a predicate that is
/// monotone (false then true). Returns `None` when `accept(hi)` is false.
fn first_accepted(mut lo: f64, mut hi: f64, accept: impl Fn(f64) -> bool) -> Option<f64> {
    if !accept(hi) {
        return None;
    }
    if accept(lo) {
        return Some(lo);
    }
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return Some(hi);
        }
        if accept(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// `q_α = −log π − 2 log log (1 − α)⁻¹`.
pub fn gumbel_quantile(alpha: f64) -> f64 {
    -PI.ln() - 2.0 * (-(1.0 - alpha).ln()).ln()
}

/// Limiting null CDF of `J − 2 log p̃ + log log p̃`.
pub fn gumbel_cdf(phi: f64) -> f64 {
    (-(1.0 / PI.sqrt()) * (-phi / 2.0).exp()).exp()
}

fn check_level(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("level {alpha} is not in (0, 1)")));
    }
    Ok(())
}

fn check_count(p_tilde: usize) -> Result<()> {
    if (p_tilde as f64) <= core::f64::consts::E {
        return Err(Error::InvalidArgument(alloc::format!(
            "{p_tilde} hypotheses are too few (log log p̃ undefined)"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTestReport {
    /// `J = max J²_{r,j}`.
    pub statistic: f64,
    /// Position `(r, j)` of the maximum.
    pub argmax: (usize, usize),
    pub threshold: f64,
    pub q_alpha: f64,
    pub p_tilde: usize,
    pub alpha: f64,
    pub reject: bool,
    /// `1 − exp{−π^{−1/2} exp(−φ/2)}` at `φ = J − 2 log p̃ + log log p̃`.
    /// Asymptotic; reported for convenience.
    pub approx_p_value: f64,
}

/// Rejects `H_0: all tested coefficients are zero` when
/// `J ≥ 2 log p̃ − log log p̃ + q_α`.
pub fn global_test(stats: &DMatrix<f64>, alpha: f64) -> Result<GlobalTestReport> {
    check_level(alpha)?;
    let p_tilde = stats.len();
    check_count(p_tilde)?;
    let mut statistic = f64::NEG_INFINITY;
    let mut argmax = (0, 0);
    for r in 0..stats.nrows() {
        for j in 0..stats.ncols() {
            let sq = stats[(r, j)] * stats[(r, j)];
            if sq > statistic {
                statistic = sq;
                argmax = (r, j);
            }
        }
    }
    let lp = (p_tilde as f64).ln();
    let centering = 2.0 * lp - lp.ln();
    let q_alpha = gumbel_quantile(alpha);
    let threshold = centering + q_alpha;
    Ok(GlobalTestReport {
        statistic,
        argmax,
        threshold,
        q_alpha,
        p_tilde,
        alpha,
        reject: statistic >= threshold,
        approx_p_value: 1.0 - gumbel_cdf(statistic - centering),
    })
}

/// `FDP̂(τ) = 2{1 − Φ(τ)} p̃ / max(#{|J| > τ}, 1)`.
pub fn fdp_hat(tau: f64, stats: &DMatrix<f64>) -> f64 {
    let count = stats.iter().filter(|v| v.abs() > tau).count();
    fdp_with_count(tau, stats.len(), count)
}

fn fdp_with_count(tau: f64, p_tilde: usize, count: usize) -> f64 {
    2.0 * normal_sf(tau) * p_tilde as f64 / count.max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipleTestReport {
    pub alpha: f64,
    pub tau_hat: f64,
    /// Upper end of the search range, `t_p̃ = (2 log p̃ − 2 log log p̃)^{1/2}`.
    pub t_cap: f64,
    /// No `τ ≤ t_p̃` met the level; `τ̂ = (2 log p̃)^{1/2}`.
    pub fallback_used: bool,
    /// `FDP̂(τ̂)`.
    pub fdp_at_tau: f64,
    /// `(r, j)` with `|J_{r,j}| ≥ τ̂`, row-major order.
    pub rejections: Vec<(usize, usize)>,
    /// `FDP̂` at every breakpoint of the search range.
    pub fdp_curve: Vec<(f64, f64)>,
}

/// Computes `τ̂ = inf{0 ≤ τ ≤ t_p̃ : FDP̂(τ) ≤ α}` and rejects `|J_{r,j}| ≥ τ̂`.
///
/// `#{|J| > τ}` is constant on each interval between consecutive observed
/// `|J|` values, so within an interval `FDP̂` is continuous and decreasing and
/// the first feasible point is found by bisection.
pub fn multiple_test(stats: &DMatrix<f64>, alpha: f64) -> Result<MultipleTestReport> {
    check_level(alpha)?;
    let p_tilde = stats.len();
    check_count(p_tilde)?;
    let lp = (p_tilde as f64).ln();
    let t_cap = (2.0 * lp - 2.0 * lp.ln()).sqrt();

    let mut abs: Vec<f64> = stats.iter().map(|v| v.abs()).collect();
    abs.sort_unstable_by(f64::total_cmp);
    let above = |tau: f64| abs.len() - abs.partition_point(|&v| v <= tau);

    let mut points: Vec<f64> = Vec::with_capacity(abs.len() + 2);
    points.push(0.0);
    points.extend(abs.iter().copied().filter(|&v| v > 0.0 && v < t_cap));
    points.push(t_cap);
    points.dedup();

    let fdp_curve: Vec<(f64, f64)> = points
        .iter()
        .map(|&tau| (tau, fdp_with_count(tau, p_tilde, above(tau))))
        .collect();

    let mut tau_hat = None;
    for w in points.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let count = above(lo);
        let feasible = |tau: f64| fdp_with_count(tau, p_tilde, count) <= alpha;
        if let Some(tau) = first_accepted(lo, hi, feasible) {
            // `hi` itself belongs to the next interval
            if tau < hi {
                tau_hat = Some(tau);
                break;
            }
        }
    }
    if tau_hat.is_none() && fdp_with_count(t_cap, p_tilde, above(t_cap)) <= alpha {
        tau_hat = Some(t_cap);
    }

    let (tau_hat, fallback_used) = match tau_hat {
        Some(t) => (t, false),
        None => ((2.0 * lp).sqrt(), true),
    };
    let mut rejections = Vec::new();
    for r in 0..stats.nrows() {
        for j in 0..stats.ncols() {
            if stats[(r, j)].abs() >= tau_hat {
                rejections.push((r, j));
            }
        }
    }
    Ok(MultipleTestReport {
        alpha,
        tau_hat,
        t_cap,
        fallback_used,
        fdp_at_tau: fdp_with_count(tau_hat, p_tilde, above(tau_hat)),
        rejections,
        fdp_curve,
    })
}
