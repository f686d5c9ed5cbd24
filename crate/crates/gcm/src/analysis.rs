//! Real-data analysis: ingestion, covariance decomposition, GLS fit and both
//! tests, gathered into one report.

use gcm_core::estimation::EstimatorOptions;
use gcm_core::model::build_design;
use gcm_core::{estimate_all, global_test, gls_fit, multiple_test};
use serde::Serialize;

use crate::config::{config_hash, hex_digest, AnalysisConfig};
use crate::error::{AppError, AppResult};
use crate::ingest::{read_panel, standardize, ColumnNames, ColumnScaling, Panel};
use crate::report::{matrix_csv, num, rows_of, to_json, Provenance, Table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSummary {
    pub n_subjects: usize,
    pub n_times: usize,
    pub n_regions: usize,
    pub n_static: usize,
    pub n_dynamic: usize,
    /// Number of tested coefficients `(2p + 2) R`.
    pub n_hypotheses: usize,
    pub standardized: bool,
    pub scaling: Vec<ColumnScaling>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentsReport {
    pub sigma_r: Vec<Vec<f64>>,
    pub sigma_t: Vec<Vec<f64>>,
    pub sigma_zeta: Vec<Vec<f64>>,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub region: String,
    pub coefficient: String,
    pub estimate: f64,
    pub standard_error: f64,
    /// `J_{r,j}`; absent for the untested dynamic-covariate block.
    pub statistic: Option<f64>,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalBlock {
    pub statistic: f64,
    pub argmax_region: String,
    pub argmax_coefficient: String,
    pub threshold: f64,
    pub q_alpha: f64,
    pub p_tilde: usize,
    pub alpha: f64,
    pub decision: &'static str,
    /// From the Gumbel limit; approximate.
    pub approx_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub region: String,
    pub coefficient: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultipleBlock {
    pub alpha: f64,
    pub tau_hat: f64,
    pub t_cap: f64,
    pub fallback_used: bool,
    pub fdp_at_tau: f64,
    pub n_rejections: usize,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub n_pairs: usize,
    pub pairs: Vec<(String, String)>,
    pub dropped_pairs: Vec<(String, String)>,
    pub temporal_eigenvalues_clamped: usize,
    pub zeta_eigenvalues_clamped: usize,
    pub raw_sigma_zeta: Vec<Vec<f64>>,
    pub floored_regions: Vec<String>,
    pub trace_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    pub config: AnalysisConfig,
    pub data: DataSummary,
    pub components: ComponentsReport,
    pub coefficients: Vec<CoefficientRow>,
    pub global_test: GlobalBlock,
    pub multiple_test: MultipleBlock,
    pub diagnostics: Diagnostics,
}

/// Names of the design columns `(1, g, x, g·x, z)`.
pub fn coefficient_names(names: &ColumnNames) -> Vec<String> {
    let mut out = vec!["intercept".to_string(), names.time.clone()];
    out.extend(names.statics.iter().cloned());
    out.extend(names.statics.iter().map(|s| format!("{}:{s}", names.time)));
    out.extend(names.dynamics.iter().cloned());
    out
}

/// Runs the full analysis on in-memory input bytes.
pub fn analyze_bytes(config: &AnalysisConfig, input: &[u8]) -> AppResult<(Panel, AnalysisReport)> {
    let mut panel = read_panel(input, &config.mapping)?;
    if config.standardize {
        standardize(&mut panel)?;
    }
    let ds = &panel.dataset;
    let dims = ds.dims();
    let options = EstimatorOptions {
        n_pairs: config.n_pairs,
        ..EstimatorOptions::default()
    };
    let estimate = estimate_all(ds, &options)?;
    let design = build_design(ds);
    let fit = gls_fit(ds, &design, &estimate.components)?;
    let global = global_test(&fit.statistics, config.alpha_global)?;
    let multiple = multiple_test(&fit.statistics, config.alpha_fdr)?;

    let regions = &panel.names.responses;
    let coefs = coefficient_names(&panel.names);
    let n_tested = dims.n_tested();
    let mut coefficients = Vec::with_capacity(dims.n_regions * coefs.len());
    for (r, region) in regions.iter().enumerate() {
        for (j, coef) in coefs.iter().enumerate() {
            let tested = j < n_tested;
            let statistic = tested.then(|| fit.statistics[(r, j)]);
            coefficients.push(CoefficientRow {
                region: region.clone(),
                coefficient: coef.clone(),
                estimate: fit.coefficients.matrix()[(j, r)],
                standard_error: fit.standard_error(r, j),
                statistic,
                rejected: statistic.is_some_and(|s| s.abs() >= multiple.tau_hat),
            });
        }
    }
    let pair = |&(a, b): &(usize, usize)| (regions[a].clone(), regions[b].clone());
    let diag = &estimate.diagnostics;
    let c = &estimate.components;
    let report = AnalysisReport {
        provenance: Provenance::new(config.seed, config_hash(config), Some(hex_digest(input))),
        config: config.clone(),
        data: DataSummary {
            n_subjects: dims.n_subjects,
            n_times: dims.n_times,
            n_regions: dims.n_regions,
            n_static: dims.n_static,
            n_dynamic: dims.n_dynamic,
            n_hypotheses: dims.n_hypotheses(),
            standardized: config.standardize,
            scaling: panel.scaling.clone(),
        },
        components: ComponentsReport {
            sigma_r: rows_of(&c.sigma_r),
            sigma_t: rows_of(&c.sigma_t),
            sigma_zeta: rows_of(&c.sigma_zeta),
            kappa: c.kappa,
        },
        coefficients,
        global_test: GlobalBlock {
            statistic: global.statistic,
            argmax_region: regions[global.argmax.0].clone(),
            argmax_coefficient: coefs[global.argmax.1].clone(),
            threshold: global.threshold,
            q_alpha: global.q_alpha,
            p_tilde: global.p_tilde,
            alpha: global.alpha,
            decision: if global.reject { "reject" } else { "fail to reject" },
            approx_p_value: global.approx_p_value,
        },
        multiple_test: MultipleBlock {
            alpha: multiple.alpha,
            tau_hat: multiple.tau_hat,
            t_cap: multiple.t_cap,
            fallback_used: multiple.fallback_used,
            fdp_at_tau: multiple.fdp_at_tau,
            n_rejections: multiple.rejections.len(),
            rejections: multiple
                .rejections
                .iter()
                .map(|&(r, j)| Rejection {
                    region: regions[r].clone(),
                    coefficient: coefs[j].clone(),
                })
                .collect(),
        },
        diagnostics: Diagnostics {
            n_pairs: diag.pairs.len(),
            pairs: diag.pairs.pairs.iter().map(pair).collect(),
            dropped_pairs: diag.dropped_pairs.iter().map(pair).collect(),
            temporal_eigenvalues_clamped: diag.temporal_clamped,
            zeta_eigenvalues_clamped: diag.zeta_clamped,
            raw_sigma_zeta: rows_of(&diag.raw_zeta),
            floored_regions: diag.floored_regions.iter().map(|&r| regions[r].clone()).collect(),
            trace_scale: diag.trace_scale,
        },
    };
    Ok((panel, report))
}

pub fn analyze(config: &AnalysisConfig) -> AppResult<(Panel, AnalysisReport)> {
    let bytes = std::fs::read(&config.input).map_err(|e| AppError::io(&config.input, e))?;
    analyze_bytes(config, &bytes)
}

/// Renders every output file of an analysis, keyed by file name.
pub fn render(panel: &Panel, report: &AnalysisReport) -> Vec<(String, String)> {
    let p = &report.provenance;
    let mut coefs = Table::new(p, ["region", "coefficient", "estimate", "standard_error", "statistic", "rejected"]);
    for row in &report.coefficients {
        coefs.push([
            row.region.clone(),
            row.coefficient.clone(),
            num(row.estimate),
            num(row.standard_error),
            row.statistic.map(num).unwrap_or_default(),
            row.rejected.to_string(),
        ]);
    }
    let mut rejections = Table::new(p, ["region", "coefficient"]);
    for r in &report.multiple_test.rejections {
        rejections.push([&r.region, &r.coefficient]);
    }
    let to_mat = |rows: &[Vec<f64>]| {
        let n = rows.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j])
    };
    let t_labels: Vec<String> = (1..=panel.dataset.n_times()).map(|t| format!("t{t}")).collect();
    let z_labels = vec!["zeta0".to_string(), "zeta1".to_string()];
    vec![
        ("report.json".into(), to_json(report)),
        ("coefficients.csv".into(), coefs.finish()),
        ("rejections.csv".into(), rejections.finish()),
        ("sigma_r.csv".into(), matrix_csv(p, &panel.names.responses, &to_mat(&report.components.sigma_r))),
        ("sigma_t.csv".into(), matrix_csv(p, &t_labels, &to_mat(&report.components.sigma_t))),
        ("sigma_zeta.csv".into(), matrix_csv(p, &z_labels, &to_mat(&report.components.sigma_zeta))),
        ("summary.txt".into(), summary_text(report)),
    ]
}

pub fn summary_text(report: &AnalysisReport) -> String {
    let d = &report.data;
    let g = &report.global_test;
    let m = &report.multiple_test;
    let mut s = String::new();
    s += &format!("gcm {} analysis\n", report.provenance.version);
    s += &format!(
        "data: N={} subjects, T={} time points, R={} regions, p={}, q={}\n",
        d.n_subjects, d.n_times, d.n_regions, d.n_static, d.n_dynamic
    );
    s += &format!(
        "covariates {}\n",
        if d.standardized { "standardized to mean 0, sd 1" } else { "used as read" }
    );
    s += &format!("kappa = {:.6}\n", report.components.kappa);
    s += &format!(
        "global test (alpha = {}): J = {:.4} at {}/{}, threshold {:.4} -> {} (approx. p = {:.3e})\n",
        g.alpha, g.statistic, g.argmax_region, g.argmax_coefficient, g.threshold, g.decision, g.approx_p_value
    );
    s += &format!(
        "multiple test (alpha = {}): tau = {:.4}{}, {} of {} coefficients rejected\n",
        m.alpha,
        m.tau_hat,
        if m.fallback_used { " (fallback)" } else { "" },
        m.n_rejections,
        d.n_hypotheses
    );
    for r in &m.rejections {
        s += &format!("  {} / {}\n", r.region, r.coefficient);
    }
    let diag = &report.diagnostics;
    s += &format!(
        "diagnostics: {} pairs ({} dropped), {} temporal and {} random-effect eigenvalues clamped, {} regions floored\n",
        diag.n_pairs,
        diag.dropped_pairs.len(),
        diag.temporal_eigenvalues_clamped,
        diag.zeta_eigenvalues_clamped,
        diag.floored_regions.len()
    );
    s
}
