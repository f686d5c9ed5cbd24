//! Named replication studies laid out like the published tables.

use gcm_core::simulation::{SimulationConfig, SpatialKind};
use gcm_core::study::{run_cell, study_cells, CellSummary, StudyKind, StudyOptions};
use serde::Serialize;

use crate::config::{config_hash, SimulationSettings};
use crate::error::{AppError, AppResult};
use crate::report::{num, to_json, Provenance, Table};

pub const PRESETS: [&str; 5] = ["table1-T4", "table2-T4", "table2-T8", "table3-T4", "smoke"];

const REGIONS: [usize; 2] = [50, 100];
const SUBJECTS: [usize; 2] = [100, 200];
const OMEGAS: [f64; 2] = [0.03, 0.05];
const SPATIAL: [SpatialKind; 2] = [SpatialKind::Hub, SpatialKind::SmallWorld];

fn spatial_label(s: SpatialKind) -> &'static str {
    match s {
        SpatialKind::Hub => "hub",
        SpatialKind::SmallWorld => "small",
    }
}

/// One configuration of a preset and where it sits in the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetCell {
    pub regions: usize,
    pub subjects: usize,
    pub column: String,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub kind: StudyKind,
    pub default_reps: usize,
    pub cells: Vec<PresetCell>,
}

/// Expands a preset around `base`, which supplies the temporal structure,
/// error family, seed and every other setting a preset does not vary.
pub fn preset(name: &str, base: &SimulationConfig) -> AppResult<Preset> {
    let with = |r: usize, n: usize, t: usize, omega: f64, s: SpatialKind| {
        let mut c = base.clone();
        c.n_regions = r;
        c.n_subjects = n;
        c.n_times = t;
        c.omega = omega;
        c.spatial = s;
        c
    };
    let grid = |t: usize, vary_omega: bool| {
        let omegas: &[f64] = if vary_omega { &OMEGAS } else { &[0.05] };
        let mut cells = Vec::new();
        for r in REGIONS {
            for n in SUBJECTS {
                for &omega in omegas {
                    for s in SPATIAL {
                        let column = if vary_omega {
                            format!("omega={omega}/{}", spatial_label(s))
                        } else {
                            spatial_label(s).to_string()
                        };
                        cells.push(PresetCell {
                            regions: r,
                            subjects: n,
                            column,
                            config: with(r, n, t, omega, s),
                        });
                    }
                }
            }
        }
        cells
    };
    let (name, kind, default_reps, cells) = match name {
        "table1-T4" => ("table1-T4", StudyKind::Bias, 200, grid(4, true)),
        "table2-T4" => ("table2-T4", StudyKind::Global, 2000, grid(4, false)),
        "table2-T8" => ("table2-T8", StudyKind::Global, 2000, grid(8, false)),
        "table3-T4" => ("table3-T4", StudyKind::Fdr, 200, grid(4, true)),
        "smoke" => (
            "smoke",
            StudyKind::Fdr,
            1,
            vec![PresetCell {
                regions: 50,
                subjects: 100,
                column: "hub".into(),
                config: with(50, 100, 4, 0.05, SpatialKind::Hub),
            }],
        ),
        other => {
            return Err(AppError::Usage(format!(
                "unknown preset '{other}'; valid presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(Preset {
        name,
        kind,
        default_reps,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub n_reps: usize,
    pub n_failed: usize,
    pub rejection_rate: f64,
    pub mean_fdp: f64,
    pub mean_power: f64,
    pub fallback_rate: f64,
    pub coef_bias_mean: f64,
    pub coef_bias_sd: f64,
    pub coef_se: f64,
    pub cov_bias_mean: f64,
    pub cov_bias_sd: f64,
    pub mean_cov_max_error: f64,
}

impl From<&CellSummary> for SummaryRecord {
    fn from(s: &CellSummary) -> Self {
        Self {
            n_reps: s.n_reps,
            n_failed: s.n_failed,
            rejection_rate: s.rejection_rate,
            mean_fdp: s.mean_fdp,
            mean_power: s.mean_power,
            fallback_rate: s.fallback_rate,
            coef_bias_mean: s.coef_bias_mean,
            coef_bias_sd: s.coef_bias_sd,
            coef_se: s.coef_se,
            cov_bias_mean: s.cov_bias_mean,
            cov_bias_sd: s.cov_bias_sd,
            mean_cov_max_error: s.mean_cov_max_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub regions: usize,
    pub subjects: usize,
    /// Table column, e.g. `omega=0.05/hub`.
    pub column: String,
    /// `size`, `power`, `bias` or `fdr`.
    pub cell: String,
    pub config: SimulationSettings,
    pub summary: SummaryRecord,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyOptionsRecord {
    pub reps: usize,
    pub alpha_global: f64,
    pub alpha_fdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyOutput {
    pub provenance: Provenance,
    pub preset: String,
    pub kind: &'static str,
    pub options: StudyOptionsRecord,
    pub base: SimulationSettings,
    pub cells: Vec<CellRecord>,
}

#[derive(Serialize)]
struct HashInput<'a> {
    preset: &'a str,
    options: &'a StudyOptionsRecord,
    base: &'a SimulationSettings,
}

/// Runs every cell of a preset in table order.
pub fn run_preset(preset: &Preset, base: &SimulationConfig, options: &StudyOptions) -> AppResult<StudyOutput> {
    let opts = StudyOptionsRecord {
        reps: options.n_reps,
        alpha_global: options.alpha_global,
        alpha_fdr: options.alpha_fdr,
    };
    let base_settings = SimulationSettings::from(base);
    let hash = config_hash(&HashInput {
        preset: preset.name,
        options: &opts,
        base: &base_settings,
    });
    let mut cells = Vec::new();
    for pc in &preset.cells {
        for (label, cfg) in study_cells(&pc.config, preset.kind) {
            let cell = run_cell(label, &cfg, options)?;
            cells.push(CellRecord {
                regions: pc.regions,
                subjects: pc.subjects,
                column: pc.column.clone(),
                cell: label.into(),
                config: SimulationSettings::from(&cfg),
                summary: SummaryRecord::from(&cell.summary),
                first_error: cell.first_error.map(|e| e.to_string()),
            });
        }
    }
    Ok(StudyOutput {
        provenance: Provenance::new(base.seed, hash, None),
        preset: preset.name.into(),
        kind: preset.kind.name(),
        options: opts,
        base: base_settings,
        cells,
    })
}

type Metric = (&'static str, &'static str, fn(&SummaryRecord) -> f64);

/// Rows (or column groups) of the pivoted table: label, the study cell it
/// reads from and the value, in percent where the published tables use
/// percentages.
fn layout_metrics(kind: StudyKind) -> &'static [Metric] {
    match kind {
        StudyKind::Bias => &[
            ("covariance bias", "bias", |s| s.cov_bias_mean),
            ("covariance SE", "bias", |s| s.cov_bias_sd),
            ("coefficient bias", "bias", |s| s.coef_bias_mean),
            ("coefficient SE", "bias", |s| s.coef_se),
        ],
        StudyKind::Global => &[
            ("empirical size (%)", "size", |s| 100.0 * s.rejection_rate),
            ("empirical power (%)", "power", |s| 100.0 * s.rejection_rate),
        ],
        StudyKind::Fdr => &[
            ("empirical FDR (%)", "fdr", |s| 100.0 * s.mean_fdp),
            ("empirical power (%)", "fdr", |s| 100.0 * s.mean_power),
        ],
    }
}

/// Renders `study.json`, the tidy `cells.csv` and the pivoted `table.csv`.
pub fn render(output: &StudyOutput, kind: StudyKind) -> Vec<(String, String)> {
    let p = &output.provenance;
    let header = [
        "R", "N", "T", "temporal", "spatial", "omega", "signal", "cell", "n_reps", "n_failed", "rejection_rate", "mean_fdp",
        "mean_power", "fallback_rate", "coef_bias_mean", "coef_bias_sd", "coef_se", "cov_bias_mean", "cov_bias_sd",
        "mean_cov_max_error",
    ];
    let mut tidy = Table::new(p, header);
    for c in &output.cells {
        let s = &c.summary;
        tidy.push([
            c.regions.to_string(),
            c.subjects.to_string(),
            c.config.n_times.to_string(),
            c.config.temporal.label().into(),
            c.config.spatial.label().into(),
            c.config.omega.to_string(),
            c.config.signal.to_string(),
            c.cell.clone(),
            s.n_reps.to_string(),
            s.n_failed.to_string(),
            num(s.rejection_rate),
            num(s.mean_fdp),
            num(s.mean_power),
            num(s.fallback_rate),
            num(s.coef_bias_mean),
            num(s.coef_bias_sd),
            num(s.coef_se),
            num(s.cov_bias_mean),
            num(s.cov_bias_sd),
            num(s.mean_cov_max_error),
        ]);
    }

    // Global studies put size and power side by side; the other kinds stack
    // the metrics as rows.
    let metrics = layout_metrics(kind);
    let mut columns: Vec<String> = Vec::new();
    for c in &output.cells {
        if !columns.contains(&c.column) {
            columns.push(c.column.clone());
        }
    }
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for c in &output.cells {
        if !rows.contains(&(c.regions, c.subjects)) {
            rows.push((c.regions, c.subjects));
        }
    }
    let lookup = |r: usize, n: usize, col: &str, cell: &str| {
        output
            .cells
            .iter()
            .find(|c| c.regions == r && c.subjects == n && c.column == col && c.cell == cell)
            .map(|c| &c.summary)
    };
    let table = if kind == StudyKind::Global {
        let mut head = vec!["R".to_string(), "N".to_string()];
        for (metric, _, _) in metrics {
            head.extend(columns.iter().map(|c| format!("{metric} {c}")));
        }
        let mut t = Table::new(p, head.iter().map(String::as_str));
        for &(r, n) in &rows {
            let mut line = vec![r.to_string(), n.to_string()];
            for (_, cell, value) in metrics {
                line.extend(columns.iter().map(|col| lookup(r, n, col, cell).map_or(String::new(), |s| num(value(s)))));
            }
            t.push(line);
        }
        t
    } else {
        let head: Vec<&str> = ["R", "N", "metric"].into_iter().chain(columns.iter().map(String::as_str)).collect();
        let mut t = Table::new(p, head);
        for (metric, cell, value) in metrics {
            for &(r, n) in &rows {
                let mut line = vec![r.to_string(), n.to_string(), metric.to_string()];
                line.extend(columns.iter().map(|col| lookup(r, n, col, cell).map_or(String::new(), |s| num(value(s)))));
                t.push(line);
            }
        }
        t
    };
    vec![
        ("study.json".into(), to_json(output)),
        ("cells.csv".into(), tidy.finish()),
        ("table.csv".into(), table.finish()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use gcm_core::simulation::TemporalKind;

    fn base() -> SimulationConfig {
        SimulationConfig::reference(200, 4, 50, TemporalKind::Autoregressive, SpatialKind::Hub)
    }

    #[test]
    fn preset_shapes() {
        let t2 = preset("table2-T4", &base()).unwrap();
        assert_eq!(t2.cells.len(), 8);
        assert!(t2.cells.iter().all(|c| c.config.n_times == 4 && c.config.omega == 0.05));
        assert_eq!(preset("table2-T8", &base()).unwrap().cells[0].config.n_times, 8);
        assert_eq!(preset("table1-T4", &base()).unwrap().cells.len(), 16);
        assert_eq!(preset("table3-T4", &base()).unwrap().kind, StudyKind::Fdr);
    }

    #[test]
    fn unknown_preset_lists_valid_ones() {
        let err = preset("table9", &base()).unwrap_err().to_string();
        for p in PRESETS {
            assert!(err.contains(p), "{err}");
        }
    }
}
