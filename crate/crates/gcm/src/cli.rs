//! `gcm fit | simulate | study`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gcm_core::simulation::{draw_truth, sample_dataset};
use gcm_core::study::StudyOptions;
use serde::Serialize;

use crate::analysis::{analyze, coefficient_names, render as render_analysis};
use crate::config::{check_level, config_hash, simulation_config, AnalysisConfig, DEFAULT_ALPHA_FDR, DEFAULT_ALPHA_GLOBAL, FileConfig, SimulationSettings};
use crate::error::{AppError, AppResult, ExitCode};
use crate::ingest::{generic_ids, write_panel, ColumnNames};
use crate::presets::{preset, render as render_study, run_preset, PRESETS};
use crate::report::{rows_of, to_json, write_outputs, Provenance};

#[derive(Debug, Parser)]
#[command(name = "gcm", version, about = "Multi-response growth curve models: estimation, testing and simulation studies")]
pub struct Cli {
    /// Cap on worker threads for data-parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a long-format CSV panel.
    Fit(FitArgs),
    /// Generate one synthetic panel and its ground truth.
    Simulate(SimulateArgs),
    /// Run a replication study preset.
    Study(StudyArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// TOML file of flat key-value settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha_global: Option<f64>,
    #[arg(long)]
    pub alpha_fdr: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use covariates as read instead of scaling them to mean 0, sd 1.
    #[arg(long)]
    pub no_standardize: bool,
    /// Number of region pairs for the temporal estimate.
    #[arg(long)]
    pub pairs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// One of table1-T4, table2-T4, table2-T8, table3-T4, smoke.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replications per cell (default depends on the preset).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha_global: Option<f64>,
    #[arg(long)]
    pub alpha_fdr: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const DEFAULT_OUT: &str = "gcm-out";

fn load(path: &Option<PathBuf>) -> AppResult<FileConfig> {
    path.as_deref().map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
}

fn out_dir(flag: Option<PathBuf>, file: &FileConfig) -> PathBuf {
    flag.or_else(|| file.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into())
}

/// Runs `work` on a pool of `threads` workers, or on the global pool.
fn with_threads<T: Send>(threads: Option<usize>, work: impl FnOnce() -> T + Send) -> AppResult<T> {
    match threads {
        None => Ok(work()),
        Some(0) => Err(AppError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| AppError::Usage(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(work))
        }
    }
}

fn fit(args: FitArgs, threads: Option<usize>) -> AppResult<Vec<PathBuf>> {
    let mut file = load(&args.config)?;
    file.input = args.input.or(file.input);
    file.alpha_global = args.alpha_global.or(file.alpha_global);
    file.alpha_fdr = args.alpha_fdr.or(file.alpha_fdr);
    file.n_pairs = args.pairs.or(file.n_pairs);
    if args.no_standardize {
        file.standardize = Some(false);
    }
    let config = AnalysisConfig::from_file(&file)?;
    let out = out_dir(args.out, &file);
    let (panel, report) = with_threads(threads.or(file.threads), || analyze(&config))??;
    write_outputs(&out, &render_analysis(&panel, &report))
}

#[derive(Serialize)]
struct TruthReport {
    provenance: Provenance,
    config: SimulationSettings,
    sigma_r: Vec<Vec<f64>>,
    sigma_t: Vec<Vec<f64>>,
    sigma_zeta: Vec<Vec<f64>>,
    precision_r: Vec<Vec<f64>>,
    coefficient_names: Vec<String>,
    /// `β`, one row per region.
    coefficients: Vec<Vec<f64>>,
    nonnull: Vec<(String, String)>,
}

fn simulate(args: SimulateArgs) -> AppResult<Vec<PathBuf>> {
    let file = load(&args.config)?;
    let mut config = simulation_config(&file);
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let truth = draw_truth(&config, &mut config.rng(0))?;
    let dataset = sample_dataset(&config, &truth, &mut config.rng(1))?;
    let names = ColumnNames::generic(dataset.dims());
    let ids = generic_ids(dataset.n_subjects());
    let mut csv = Vec::new();
    write_panel(&mut csv, &dataset, &ids, &names)?;

    let settings = SimulationSettings::from(&config);
    let coefs = coefficient_names(&names);
    let nonnull = truth
        .null_mask
        .iter()
        .enumerate()
        .filter(|(_, &null)| !null)
        .map(|(k, _)| {
            let (r, j) = (k % config.n_regions, k / config.n_regions);
            (names.responses[r].clone(), coefs[j].clone())
        })
        .collect();
    let c = &truth.components;
    let report = TruthReport {
        provenance: Provenance::new(config.seed, config_hash(&settings), None),
        config: settings,
        sigma_r: rows_of(&c.sigma_r),
        sigma_t: rows_of(&c.sigma_t),
        sigma_zeta: rows_of(&c.sigma_zeta),
        precision_r: rows_of(&truth.precision_r),
        coefficient_names: coefs,
        coefficients: rows_of(&truth.coefficients.matrix().transpose()),
        nonnull,
    };
    let out = out_dir(args.out, &file);
    let data = String::from_utf8(csv).expect("utf-8 panel");
    write_outputs(&out, &[("data.csv".into(), data), ("truth.json".into(), to_json(&report))])
}

fn study(args: StudyArgs, threads: Option<usize>) -> AppResult<Vec<PathBuf>> {
    let file = load(&args.config)?;
    let name = args
        .preset
        .or_else(|| file.preset.clone())
        .ok_or_else(|| AppError::Usage(format!("no preset given; valid presets: {}", PRESETS.join(", "))))?;
    let mut base = simulation_config(&file);
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    let preset = preset(&name, &base)?;
    let options = StudyOptions {
        n_reps: args.reps.or(file.reps).unwrap_or(preset.default_reps),
        alpha_global: check_level("alpha_global", args.alpha_global.or(file.alpha_global).unwrap_or(DEFAULT_ALPHA_GLOBAL))?,
        alpha_fdr: check_level("alpha_fdr", args.alpha_fdr.or(file.alpha_fdr).unwrap_or(DEFAULT_ALPHA_FDR))?,
        ..StudyOptions::default()
    };
    if options.n_reps == 0 {
        return Err(AppError::Usage("--reps must be at least 1".into()));
    }
    let output = with_threads(threads.or(file.threads), || run_preset(&preset, &base, &options))??;
    let out = out_dir(args.out, &file);
    write_outputs(&out, &render_study(&output, preset.kind))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Fit(a) => fit(a, cli.threads),
        Command::Simulate(a) => simulate(a),
        Command::Study(a) => study(a, cli.threads),
    };
    match result {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::Ok as i32
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as i32
        }
    }
}
