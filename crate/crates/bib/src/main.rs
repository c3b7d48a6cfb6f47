//! `bib` — sequential-estimation experiments from the command line.
//!
//! Subcommands: simulate, sweep, analyze, fittail, reproduce. Every command
//! is a pure function of (config, seed): repeated invocations produce
//! byte-identical outputs.

use anyhow::{anyhow, bail, Context, Result};
use bib_inference::analysis::{
    active_rest_series, burst_change_contingency, rest_periods, reset_intervals,
};
use bib_inference::experiment::{run_replica, sweep, RunConfig, SweepConfig};
use bib_inference::inference::Mode;
use bib_inference::io::{
    parse_config, read_durations, read_trace, write_durations, write_sweep, write_trace,
    AnalysisReport, CcdfPoint, FittailReport, SweepOverrides,
};
use bib_inference::tailfit::{model_ccdf, select_model, DurationSample, TailFitResult};
use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bib", version, about = "Discounted Bayesian / BIB inference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one replica and write its post-burn-in trace CSV.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Output trace CSV.
        #[arg(long)]
        out: PathBuf,
        /// Replica index to simulate.
        #[arg(long, default_value_t = 0)]
        replica: usize,
    },
    /// Replica-averaged split-RMSE summary over a (mode, beta) grid.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Output summary CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rest periods, reset intervals, burst-change association from a trace.
    Analyze {
        /// Trace CSV produced by `simulate`.
        #[arg(long)]
        trace: PathBuf,
        /// Number of equal bins for the contingency table.
        #[arg(long, default_value_t = 100)]
        n_intervals: usize,
        /// Threshold beta for the active/rest split.
        #[arg(long)]
        beta: f64,
        /// Output report JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// TP-vs-EP model selection on a duration list.
    Fittail {
        /// Single-column CSV of positive integer durations.
        #[arg(long)]
        durations: PathBuf,
        /// Output selection JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a whole figure pipeline at desk scale.
    Reproduce {
        /// One of: fig3, fig6, fig8, fig9, fig10.
        #[arg(long)]
        figure: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplier on replica count and analyzed steps.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Output directory for all intermediate and summary files.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &CommonOpts) -> Result<(RunConfig, SweepOverrides)> {
    let (mut run, sweep) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            parse_config(&text)?
        }
        None => (RunConfig::default(), SweepOverrides::default()),
    };
    if let Some(seed) = common.seed {
        run.seed = seed;
    }
    Ok((run, sweep))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("creating {}", path.display())
    })?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            out,
            replica,
        } => {
            let (cfg, _) = load_config(&common)?;
            let trace = run_replica(&cfg, replica)?;
            write_trace(create(&out)?, &trace)?;
            Ok(())
        }
        Command::Sweep { common, out } => {
            let (run_cfg, overrides) = load_config(&common)?;
            let cfg = overrides.into_sweep(run_cfg);
            let rows = sweep(&cfg)?;
            write_sweep(create(&out)?, &rows)?;
            Ok(())
        }
        Command::Analyze {
            trace,
            n_intervals,
            beta,
            out,
        } => {
            let file = File::open(&trace)
                .with_context(|| format!("opening trace {}", trace.display()))?;
            let trace = read_trace(BufReader::new(file))?;
            let report = analyze_trace(&trace, n_intervals, beta)?;
            serde_json::to_writer_pretty(create(&out)?, &report)?;
            Ok(())
        }
        Command::Fittail { durations, out } => {
            let file = File::open(&durations)
                .with_context(|| format!("opening durations {}", durations.display()))?;
            let values = read_durations(BufReader::new(file))?;
            let report = fittail_report(values)?;
            serde_json::to_writer_pretty(create(&out)?, &report)?;
            Ok(())
        }
        Command::Reproduce {
            figure,
            seed,
            scale,
            out_dir,
        } => reproduce(&figure, seed, scale, &out_dir),
    }
}

fn analyze_trace(
    trace: &bib_inference::analysis::Trace,
    n_intervals: usize,
    beta: f64,
) -> Result<AnalysisReport> {
    let series = active_rest_series(trace, beta)?;
    let active: usize = series.iter().map(|&b| b as usize).sum();
    Ok(AnalysisReport {
        rest_periods: rest_periods(&series),
        reset_intervals: reset_intervals(trace),
        contingency: burst_change_contingency(trace, n_intervals, beta)?,
        active_fraction: active as f64 / series.len() as f64,
        n_steps: trace.records.len(),
        n_changes: trace.change_times.len(),
    })
}

fn fittail_report(values: Vec<u64>) -> Result<FittailReport> {
    let sample = DurationSample::new(values)?;
    let selection = select_model(&sample)?;
    let ccdf_tp = ccdf_points(&selection.tp_at_tp_range, sample.values())?;
    let ccdf_ep = ccdf_points(&selection.ep_at_ep_range, sample.values())?;
    Ok(FittailReport {
        selection,
        ccdf_tp,
        ccdf_ep,
    })
}

fn ccdf_points(fit: &TailFitResult, sorted: &[u64]) -> Result<Vec<CcdfPoint>> {
    let in_range: Vec<u64> = sorted
        .iter()
        .copied()
        .filter(|&t| t >= fit.tau_min && t <= fit.tau_max)
        .collect();
    let m = in_range.len() as f64;
    let mut distinct = in_range.clone();
    distinct.dedup();
    distinct
        .iter()
        .map(|&tau| {
            let ge = in_range.iter().filter(|&&t| t >= tau).count() as f64;
            Ok(CcdfPoint {
                tau,
                model: model_ccdf(fit, tau)?,
                empirical: ge / m,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Figure pipelines
// ---------------------------------------------------------------------------

const BURNIN: u64 = 10_000;

fn scaled(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).round() as usize).max(1)
}

fn scaled_steps(base_analysis: u64, scale: f64) -> u64 {
    // Floor at 30k analyzed steps: environment changes arrive at rate 1e-3,
    // and the split-RMSE summary needs several complete inter-change
    // intervals per replica to be meaningful.
    BURNIN + (((base_analysis as f64) * scale).round() as u64).max(30_000)
}

fn reproduce(figure: &str, seed: u64, scale: f64, out_dir: &Path) -> Result<()> {
    if scale <= 0.0 {
        bail!("scale must be positive, got {scale}");
    }
    std::fs::create_dir_all(out_dir)?;
    match figure {
        "fig3" => reproduce_fig3(seed, scale, out_dir),
        "fig6" => reproduce_durations(
            seed,
            scale,
            out_dir,
            &[(Mode::Bib, 0.05), (Mode::Bib, 0.1)],
            DurationKind::RestPeriods,
        ),
        "fig8" => reproduce_durations(
            seed,
            scale,
            out_dir,
            &[(Mode::Bayes, 0.01), (Mode::Bayes, 0.05), (Mode::Bayes, 0.1)],
            DurationKind::ResetIntervals,
        ),
        "fig9" => reproduce_durations(
            seed,
            scale,
            out_dir,
            &[(Mode::Bib, 0.01), (Mode::Bib, 0.05), (Mode::Bib, 0.1)],
            DurationKind::ResetIntervals,
        ),
        "fig10" => reproduce_fig10(seed, scale, out_dir),
        other => Err(anyhow!(
            "unknown figure id '{other}' (valid: fig3, fig6, fig8, fig9, fig10)"
        )),
    }
}

/// Trade-off sweep: beta from 0.05 to 0.25 in steps of 0.005, both modes.
fn reproduce_fig3(seed: u64, scale: f64, out_dir: &Path) -> Result<()> {
    let cfg = SweepConfig {
        base: RunConfig {
            steps: scaled_steps(100_000, scale),
            burnin: BURNIN,
            seed,
            replicas: scaled(10, scale),
            ..RunConfig::default()
        },
        ..SweepConfig::default()
    };
    let rows = sweep(&cfg)?;
    write_sweep(create(&out_dir.join("fig3_sweep.csv"))?, &rows)?;
    Ok(())
}

#[derive(Clone, Copy)]
enum DurationKind {
    RestPeriods,
    ResetIntervals,
}

fn durations_of(
    trace: &bib_inference::analysis::Trace,
    kind: DurationKind,
    beta: f64,
) -> Result<Vec<u64>> {
    Ok(match kind {
        DurationKind::RestPeriods => rest_periods(&active_rest_series(trace, beta)?),
        DurationKind::ResetIntervals => reset_intervals(trace),
    })
}

/// Per-(mode, beta) duration CCDFs with model fits, one replica per cell plus
/// pooled duration files.
fn reproduce_durations(
    seed: u64,
    scale: f64,
    out_dir: &Path,
    cells: &[(Mode, f64)],
    kind: DurationKind,
) -> Result<()> {
    for &(mode, beta) in cells {
        let cfg = RunConfig {
            inference: bib_inference::inference::InferenceConfig {
                mode,
                beta,
                ..Default::default()
            },
            steps: scaled_steps(50_000, scale),
            burnin: BURNIN,
            seed,
            replicas: 1,
            ..RunConfig::default()
        };
        let trace = run_replica(&cfg, 0)?;
        let durations = durations_of(&trace, kind, beta)?;
        let stem = format!("{mode}_beta{beta}");
        write_durations(create(&out_dir.join(format!("{stem}_durations.csv")))?, &durations)?;
        match fittail_report(durations) {
            Ok(report) => {
                serde_json::to_writer_pretty(
                    create(&out_dir.join(format!("{stem}_fit.json")))?,
                    &report,
                )?;
            }
            Err(e) => eprintln!("warning: {stem}: fit skipped ({e})"),
        }
    }
    Ok(())
}

/// Selection counts per (mode, beta) across replicas.
fn reproduce_fig10(seed: u64, scale: f64, out_dir: &Path) -> Result<()> {
    let replicas = scaled(100, scale);
    let mut out = create(&out_dir.join("fig10_selection_counts.csv"))?;
    use std::io::Write;
    writeln!(out, "mode,beta,tp,ep,failed,replicas")?;
    for mode in [Mode::Bayes, Mode::Bib] {
        for beta in [0.01, 0.05, 0.1] {
            let cfg = RunConfig {
                inference: bib_inference::inference::InferenceConfig {
                    mode,
                    beta,
                    ..Default::default()
                },
                steps: scaled_steps(50_000, scale),
                burnin: BURNIN,
                seed,
                replicas,
                ..RunConfig::default()
            };
            let (mut tp, mut ep, mut failed) = (0usize, 0usize, 0usize);
            for r in 0..replicas {
                let trace = run_replica(&cfg, r)?;
                let durations = reset_intervals(&trace);
                match DurationSample::new(durations).and_then(|s| select_model(&s)) {
                    Ok(sel) => match sel.winner {
                        bib_inference::tailfit::TailModel::Tp => tp += 1,
                        bib_inference::tailfit::TailModel::Ep => ep += 1,
                    },
                    Err(_) => failed += 1,
                }
            }
            writeln!(out, "{mode},{beta},{tp},{ep},{failed},{replicas}")?;
        }
    }
    out.flush()?;
    Ok(())
}
