//! Monte-Carlo replication studies: covariance and coefficient bias, size and
//! power of the global test, empirical FDR and power of the multiple test.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::estimation::{estimate_all, EstimatorOptions};
use crate::gls::gls_fit;
use crate::inference::{global_test, multiple_test};
use crate::model::{build_design, fill_block, CovarianceComponents, GrowthCurveDataset};
use crate::par::map_indices;
use crate::simulation::{draw_truth, DatasetSampler, GroundTruth, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StudyKind {
    Bias,
    Global,
    Fdr,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Bias => "bias",
            StudyKind::Global => "global",
            StudyKind::Fdr => "fdr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub n_reps: usize,
    pub alpha_global: f64,
    pub alpha_fdr: f64,
    pub estimator: EstimatorOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            n_reps: 200,
            alpha_global: 0.05,
            alpha_fdr: 0.1,
            estimator: EstimatorOptions::default(),
        }
    }
}

/// Signal used by the power cell of the global study.
pub const GLOBAL_POWER_SIGNAL: f64 = 0.2;

/// Everything measured on one simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub global_reject: bool,
    /// Realized false discovery proportion of the multiple test.
    pub fdp: f64,
    /// Fraction of nonzero `η` entries rejected; `NaN` when there are none.
    pub power: f64,
    pub n_rejections: usize,
    pub fallback_used: bool,
    /// `Σ (β̂ − β)` and `Σ (β̂ − β)²` over the tested block.
    pub coef_bias_sum: f64,
    pub coef_bias_sq_sum: f64,
    pub coef_count: usize,
    /// `β̂ − β` over the tested block, `R × (2p + 2)`.
    pub coef_errors: DMatrix<f64>,
    /// Same sums over all within-block entries of every `Σ̂^(r)`.
    pub cov_bias_sum: f64,
    pub cov_bias_sq_sum: f64,
    pub cov_count: usize,
    /// `max_r ‖Σ̂^(r) − Σ^(r)‖_max`.
    pub cov_max_error: f64,
}

/// Covariance error sums between estimated and true components, using each
/// subject's own time points.
fn covariance_errors(dataset: &GrowthCurveDataset, est: &CovarianceComponents, truth: &CovarianceComponents) -> (f64, f64, usize, f64) {
    let t = dataset.n_times();
    let mut a = DMatrix::zeros(t, t);
    let mut b = DMatrix::zeros(t, t);
    let mut sum = Kahan::default();
    let mut sq = Kahan::default();
    let mut max = 0.0f64;
    for r in 0..dataset.n_regions() {
        for i in 0..dataset.n_subjects() {
            let g = dataset.times_of(i);
            fill_block(&mut a, g, &est.sigma_zeta, est.sigma_r[(r, r)], &est.sigma_t);
            fill_block(&mut b, g, &truth.sigma_zeta, truth.sigma_r[(r, r)], &truth.sigma_t);
            for (x, y) in a.iter().zip(b.iter()) {
                let e = x - y;
                sum.add(e);
                sq.add(e * e);
                max = max.max(e.abs());
            }
        }
    }
    (sum.value(), sq.value(), dataset.n_regions() * dataset.n_subjects() * t * t, max)
}

/// Runs estimation, GLS and both tests on one dataset and scores them
/// against the truth.
pub fn evaluate_replication(
    dataset: &GrowthCurveDataset,
    truth: &GroundTruth,
    options: &StudyOptions,
) -> Result<ReplicationOutcome> {
    let estimate = estimate_all(dataset, &options.estimator)?;
    let design = build_design(dataset);
    let fit = gls_fit(dataset, &design, &estimate.components)?;
    let global = global_test(&fit.statistics, options.alpha_global)?;
    let multiple = multiple_test(&fit.statistics, options.alpha_fdr)?;

    let mut false_rej = 0usize;
    let mut true_rej = 0usize;
    for &(r, j) in &multiple.rejections {
        if truth.null_mask[(r, j)] {
            false_rej += 1;
        } else {
            true_rej += 1;
        }
    }
    let n_nonnull = truth.n_nonnull();
    let n_rej = multiple.rejections.len();

    let n_tested = truth.coefficients.n_tested();
    let mut cb = Kahan::default();
    let mut cb2 = Kahan::default();
    let est_beta = fit.coefficients.matrix();
    let true_beta = truth.coefficients.matrix();
    let coef_errors = DMatrix::from_fn(est_beta.ncols(), n_tested, |r, j| est_beta[(j, r)] - true_beta[(j, r)]);
    for &e in coef_errors.iter() {
        cb.add(e);
        cb2.add(e * e);
    }
    let (cov_sum, cov_sq, cov_count, cov_max) = covariance_errors(dataset, &estimate.components, &truth.components);

    Ok(ReplicationOutcome {
        global_reject: global.reject,
        fdp: false_rej as f64 / n_rej.max(1) as f64,
        power: if n_nonnull == 0 {
            f64::NAN
        } else {
            true_rej as f64 / n_nonnull as f64
        },
        n_rejections: n_rej,
        fallback_used: multiple.fallback_used,
        coef_bias_sum: cb.value(),
        coef_bias_sq_sum: cb2.value(),
        coef_count: n_tested * est_beta.ncols(),
        coef_errors,
        cov_bias_sum: cov_sum,
        cov_bias_sq_sum: cov_sq,
        cov_count,
        cov_max_error: cov_max,
    })
}

/// Draws replication `rep` (generator stream `rep + 1`) and evaluates it.
pub fn run_replication(
    config: &SimulationConfig,
    truth: &GroundTruth,
    sampler: &DatasetSampler,
    rep: usize,
    options: &StudyOptions,
) -> Result<ReplicationOutcome> {
    let mut rng = config.rng(rep as u64 + 1);
    let dataset = sampler.sample(&mut rng)?;
    evaluate_replication(&dataset, truth, options)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Mean and standard deviation from pooled sums.
fn mean_sd(sum: f64, sq: f64, count: usize) -> (f64, f64) {
    if count == 0 {
        return (f64::NAN, f64::NAN);
    }
    let n = count as f64;
    let mean = sum / n;
    let var = if count > 1 { ((sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Standard deviation of every coefficient error over replications, averaged
/// over coefficients. `NaN` with fewer than two replications.
fn per_coefficient_se(outcomes: &[&ReplicationOutcome]) -> f64 {
    let Some(first) = outcomes.first() else {
        return f64::NAN;
    };
    if outcomes.len() < 2 {
        return f64::NAN;
    }
    let cells = first.coef_errors.len();
    let mut total = Kahan::default();
    for k in 0..cells {
        let mut s = Kahan::default();
        let mut s2 = Kahan::default();
        for o in outcomes {
            let e = o.coef_errors.as_slice()[k];
            s.add(e);
            s2.add(e * e);
        }
        total.add(mean_sd(s.value(), s2.value(), outcomes.len()).1);
    }
    total.value() / cells as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n_reps: usize,
    pub n_failed: usize,
    pub rejection_rate: f64,
    pub mean_fdp: f64,
    pub mean_power: f64,
    pub fallback_rate: f64,
    pub coef_bias_mean: f64,
    /// Standard deviation of `β̂ − β` pooled over coefficients and replications.
    pub coef_bias_sd: f64,
    /// Monte-Carlo standard error of each `β̂^(r)_j` (its standard deviation
    /// over replications), averaged over `(r, j)`.
    pub coef_se: f64,
    pub cov_bias_mean: f64,
    pub cov_bias_sd: f64,
    pub mean_cov_max_error: f64,
}

/// Aggregates outcomes in replication order; failed replications are
/// counted and skipped.
pub fn summarize(outcomes: &[Option<ReplicationOutcome>]) -> CellSummary {
    let ok: Vec<&ReplicationOutcome> = outcomes.iter().flatten().collect();
    let m = ok.len();
    let mut rej = 0usize;
    let mut fallback = 0usize;
    let (mut fdp, mut power, mut cmax) = (Kahan::default(), Kahan::default(), Kahan::default());
    let (mut cb, mut cb2, mut vb, mut vb2) = (Kahan::default(), Kahan::default(), Kahan::default(), Kahan::default());
    let (mut cn, mut vn, mut pn) = (0usize, 0usize, 0usize);
    for o in &ok {
        rej += o.global_reject as usize;
        fallback += o.fallback_used as usize;
        fdp.add(o.fdp);
        if o.power.is_finite() {
            power.add(o.power);
            pn += 1;
        }
        cmax.add(o.cov_max_error);
        cb.add(o.coef_bias_sum);
        cb2.add(o.coef_bias_sq_sum);
        cn += o.coef_count;
        vb.add(o.cov_bias_sum);
        vb2.add(o.cov_bias_sq_sum);
        vn += o.cov_count;
    }
    let per = |x: f64, n: usize| if n == 0 { f64::NAN } else { x / n as f64 };
    let (coef_bias_mean, coef_bias_sd) = mean_sd(cb.value(), cb2.value(), cn);
    let coef_se = per_coefficient_se(&ok);
    let (cov_bias_mean, cov_bias_sd) = mean_sd(vb.value(), vb2.value(), vn);
    CellSummary {
        n_reps: outcomes.len(),
        n_failed: outcomes.len() - m,
        rejection_rate: per(rej as f64, m),
        mean_fdp: per(fdp.value(), m),
        mean_power: per(power.value(), pn),
        fallback_rate: per(fallback as f64, m),
        coef_bias_mean,
        coef_bias_sd,
        coef_se,
        cov_bias_mean,
        cov_bias_sd,
        mean_cov_max_error: per(cmax.value(), m),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub label: String,
    pub config: SimulationConfig,
    pub outcomes: Vec<Option<ReplicationOutcome>>,
    /// First failure, if any replication failed.
    pub first_error: Option<Error>,
    pub summary: CellSummary,
}

/// Runs `options.n_reps` replications of one configuration.
pub fn run_cell(label: &str, config: &SimulationConfig, options: &StudyOptions) -> Result<StudyCell> {
    if options.n_reps == 0 {
        return Err(Error::InvalidArgument("a study needs at least one replication".into()));
    }
    let truth = draw_truth(config, &mut config.rng(0))?;
    let sampler = DatasetSampler::new(config, &truth)?;
    let results = map_indices(options.n_reps, |rep| run_replication(config, &truth, &sampler, rep, options));
    let mut first_error = None;
    let outcomes: Vec<Option<ReplicationOutcome>> = results
        .into_iter()
        .map(|r| match r {
            Ok(o) => Some(o),
            Err(e) => {
                first_error.get_or_insert(e);
                None
            }
        })
        .collect();
    if outcomes.iter().all(Option::is_none) {
        return Err(first_error.unwrap_or_else(|| Error::InvalidArgument("no replications".into())));
    }
    let summary = summarize(&outcomes);
    Ok(StudyCell {
        label: label.into(),
        config: config.clone(),
        outcomes,
        first_error,
        summary,
    })
}

/// Configurations making up a study of `kind` around `config`: the size and
/// power cells for the global test, `config` itself otherwise.
pub fn study_cells(config: &SimulationConfig, kind: StudyKind) -> Vec<(&'static str, SimulationConfig)> {
    match kind {
        StudyKind::Global => {
            let mut size = config.clone();
            size.omega = 0.0;
            let mut power = config.clone();
            power.signal = GLOBAL_POWER_SIGNAL;
            power.xi_value = GLOBAL_POWER_SIGNAL;
            alloc::vec![("size", size), ("power", power)]
        }
        StudyKind::Bias => alloc::vec![("bias", config.clone())],
        StudyKind::Fdr => alloc::vec![("fdr", config.clone())],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub cells: Vec<StudyCell>,
}

pub fn run_replication_study(config: &SimulationConfig, kind: StudyKind, options: &StudyOptions) -> Result<StudyReport> {
    let cells = study_cells(config, kind)
        .into_iter()
        .map(|(label, cfg)| run_cell(label, &cfg, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport { kind, cells })
}
