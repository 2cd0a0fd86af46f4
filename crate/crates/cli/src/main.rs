//! Command-line surface for the GSEMO diversity-optimization harness.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gsemo::classifier::segment_phases;
use gsemo::harness::{
    lemma_suite, run_trial, run_trial_traced, scaling_study, ExperimentConfig, LemmaSuiteConfig,
    RunMode, RunResult, TrialSpec,
};
use gsemo::trace::{read_trace, TraceLevel, TraceWriter};

const EXIT_TRUNCATED: u8 = 2;
const EXIT_EXCESS_TRUNCATION: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

const EXIT_HELP: &str = "Exit codes:
  0   success
  2   run truncated at the iteration cap before reaching the optimum
  3   more than 1% of scaling trials truncated (they are excluded from the fit)
  64  usage error: invalid flags or values
  65  unreadable or malformed data file

Only GSEMO_OUT_DIR may be set via the environment (output directory);
everything else is a flag, so a command line fully describes a run.";

#[derive(Parser)]
#[command(
    name = "gsemo",
    version,
    about = "Diversity-optimizing GSEMO on OneMinMax: seeded runs, scaling studies, lemma verification",
    after_help = EXIT_HELP
)]
struct Cli {
    /// Worker threads for batched trials (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded trial; write a trace and a result summary.
    Run(RunArgs),
    /// Measure hitting times across problem sizes and fit the log-log slope.
    Scale(ScaleArgs),
    /// Check the replacement lemmas and bound table against the exact oracle.
    Verify(VerifyArgs),
    /// Segment a recorded trace into phases and summarize them.
    Phases(PhasesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Init {
    Random,
    AlmostBalanced,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    States,
    Full,
}

impl From<LevelArg> for TraceLevel {
    fn from(l: LevelArg) -> TraceLevel {
        match l {
            LevelArg::States => TraceLevel::States,
            LevelArg::Full => TraceLevel::Full,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Problem size (must be odd for --init almost-balanced).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Initial population: a random individual (full run) or the second-best
    /// almost balanced population (last stage).
    #[arg(long, value_enum, default_value_t = Init::Random)]
    init: Init,
    /// Iteration cap (default: 10^7 for last-stage, 10^8 for full runs).
    #[arg(long)]
    max_iters: Option<u64>,
    /// Write a JSONL trace to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LevelArg::States)]
    trace_level: LevelArg,
    /// Directory for the result summary.
    #[arg(long, env = "GSEMO_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ScaleArgs {
    /// Problem sizes, comma separated (at least two distinct values).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::LastStage)]
    mode: ModeArg,
    /// Iteration cap (default: 10^7 for last-stage, 10^8 for full runs).
    #[arg(long)]
    max_iters: Option<u64>,
    /// Directory for results.csv, scaling.tsv, fit.toml and config.toml.
    #[arg(long, env = "GSEMO_OUT_DIR")]
    out: Option<PathBuf>,
    /// Load the whole experiment from a TOML config instead of flags.
    #[arg(long, conflicts_with_all = ["n", "trials", "seed", "mode", "max_iters"])]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    LastStage,
    FullRun,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> RunMode {
        match m {
            ModeArg::LastStage => RunMode::LastStage,
            ModeArg::FullRun => RunMode::FullRun,
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem size, odd, between 5 and 13 (the enumeration bound).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Slack constant replacing the asymptotic factors: 1 -+ slack/n.
    #[arg(long, default_value_t = 16.0)]
    slack: f64,
    /// Monte Carlo iterations for the one-step cross-check (0 = off).
    #[arg(long, default_value_t = 0)]
    mc: u64,
    /// Write the full per-row report as JSONL.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PhasesArgs {
    /// A states- or full-level trace file.
    #[arg(long)]
    trace: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    gsemo::init_threads(cli.jobs);
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Scale(args) => cmd_scale(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Phases(args) => cmd_phases(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("gsemo: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn usage_error(msg: &str) -> anyhow::Result<u8> {
    eprintln!("gsemo: {msg}");
    eprintln!("run 'gsemo <command> --help' for usage");
    Ok(EXIT_USAGE)
}

fn default_max_iters(mode: RunMode) -> u64 {
    match mode {
        RunMode::LastStage => 10_000_000,
        RunMode::FullRun => 100_000_000,
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<u8> {
    if args.n == 0 {
        return usage_error("n must be positive");
    }
    let mode = match args.init {
        Init::Random => RunMode::FullRun,
        Init::AlmostBalanced => {
            if args.n % 2 == 0 {
                return usage_error("n must be odd for --init almost-balanced");
            }
            if args.n < 3 {
                return usage_error("n must be at least 3 for --init almost-balanced");
            }
            RunMode::LastStage
        }
    };
    let spec = TrialSpec {
        n: args.n,
        seed: args.seed,
        mode,
        max_iters: args.max_iters.unwrap_or_else(|| default_max_iters(mode)),
    };
    let result = match &args.trace {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut writer = TraceWriter::create(path, args.trace_level.into())
                .with_context(|| format!("creating trace file {}", path.display()))?;
            let result = run_trial_traced(&spec, &mut writer)?;
            writer.finish()?;
            result
        }
        None => run_trial(&spec),
    };

    fs::create_dir_all(&args.out)?;
    let summary_path = args.out.join("result.csv");
    let mut summary = fs::File::create(&summary_path)
        .with_context(|| format!("creating {}", summary_path.display()))?;
    writeln!(summary, "{}", RunResult::CSV_HEADER)?;
    writeln!(summary, "{}", result.csv_row())?;

    println!(
        "n={} seed={} mode={}: {}",
        result.n,
        result.seed,
        result.mode.as_str(),
        if result.truncated {
            format!("truncated after {} iterations", result.iterations)
        } else {
            format!("optimal diversity after {} iterations", result.iterations)
        }
    );
    if let Some(cover) = result.iterations_to_cover {
        println!("  front covered at iteration {cover}");
    }
    println!(
        "  final diversity {} | phases {} | acceptance: {} replaced, {} inserted, {} rejected",
        result.final_diversity,
        result.phases.len(),
        result.acceptance.replaced_same_fitness,
        result.acceptance.inserted_new_fitness,
        result.acceptance.rejected_diversity + result.acceptance.rejected_dominated,
    );
    println!("  summary written to {}", summary_path.display());

    Ok(if result.truncated { EXIT_TRUNCATED } else { 0 })
}

fn cmd_scale(args: ScaleArgs) -> anyhow::Result<u8> {
    let cfg = match &args.config {
        Some(path) => match ExperimentConfig::from_toml_file(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("gsemo: cannot read config {}: {e}", path.display());
                return Ok(EXIT_DATA);
            }
        },
        None => {
            let mode: RunMode = args.mode.into();
            ExperimentConfig {
                n_list: args.n.clone(),
                trials: args.trials,
                mode,
                max_iters: args.max_iters.unwrap_or_else(|| default_max_iters(mode)),
                seed: args.seed,
                trace: TraceLevel::Silent,
                out_dir: args.out.clone(),
            }
        }
    };
    let out_dir = match cfg.out_dir.clone().or_else(|| args.out.clone()) {
        Some(d) => d,
        None => return usage_error("--out is required (or out_dir in the config)"),
    };
    {
        let mut distinct = cfg.n_list.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 {
            return usage_error("scaling needs at least two distinct problem sizes");
        }
    }
    if let Err(e) = cfg.validate() {
        return usage_error(&e.to_string());
    }

    let study = scaling_study(&cfg)?;
    study.write_files(&cfg, &out_dir)?;

    println!("{:>6} {:>10} {:>12} {:>12} {:>10}", "n", "trials", "mean", "median", "truncated");
    for row in &study.rows {
        println!(
            "{:>6} {:>10} {:>12.1} {:>12.1} {:>10}",
            row.n, row.completed, row.mean, row.median, row.truncated
        );
    }
    println!(
        "log-log slope of mean {} vs n: {:.4} (intercept {:.4})",
        study.metric, study.slope, study.intercept
    );
    println!("files written to {}", out_dir.display());

    let total = cfg.n_list.len() * cfg.trials;
    if study.truncated_total > 0 {
        eprintln!(
            "warning: {} of {} trials truncated at max_iters = {} and excluded",
            study.truncated_total, total, cfg.max_iters
        );
    }
    Ok(if study.truncated_total * 100 > total {
        EXIT_EXCESS_TRUNCATION
    } else {
        0
    })
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<u8> {
    if args.n % 2 == 0 || !(5..=13).contains(&args.n) {
        return usage_error("verify needs odd n between 5 and 13 (enumeration bound)");
    }
    if args.samples == 0 {
        return usage_error("samples must be positive");
    }
    let cfg = LemmaSuiteConfig {
        n: args.n,
        samples: args.samples,
        seed: args.seed,
        slack: args.slack,
        mc_iterations: args.mc,
    };
    let report = lemma_suite(&cfg)?;

    println!(
        "n={} samples={} ({} synthetic, {} harvested)",
        report.n, report.samples, report.synthetic, report.harvested
    );
    println!(
        "exact checks: {} valid-set shapes, {} structural sweeps, {} hard failures",
        report.shape_checks,
        report.structure_checks,
        report.hard_failures.len()
    );
    for failure in &report.hard_failures {
        eprintln!("HARD FAILURE: {}\npopulation:\n{}", failure.what, failure.population);
    }

    // Per-row-class advisory summary of the bound table.
    let mut by_row: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for entry in &report.table {
        let slot = by_row.entry(entry.row.row.to_string()).or_default();
        slot.0 += 1;
        if !entry.row.ok() {
            slot.1 += 1;
        }
    }
    println!("bound table (advisory, slack = {}):", cfg.slack);
    for (row, (total, bad)) in &by_row {
        let verdict = if *bad == 0 { "pass" } else { "advisory-fail" };
        println!("  {row:<10} {total:>6} rows  {bad:>4} outside bounds  [{verdict}]");
    }
    for entry in report.bound_violations() {
        eprintln!(
            "bound violation: population {} index {} row {} p={:.3e} not in [{:.3e}, {:.3e}]\n{}",
            entry.population,
            entry.row.index,
            entry.row.row,
            entry.row.replace_prob,
            entry.row.replace_lower,
            entry.row.replace_upper,
            report.populations[entry.population]
        );
    }

    if let Some(mc) = &report.mc {
        let worst = mc
            .rows
            .iter()
            .filter(|r| r.sigma > 0.0)
            .map(|r| ((r.observed as f64 - r.expected).abs() / r.sigma * 100.0) as u64)
            .max()
            .unwrap_or(0) as f64
            / 100.0;
        println!(
            "monte carlo: {} iterations, worst deviation {:.2} sigma, {}",
            mc.iterations,
            worst,
            if mc.ok() { "pass" } else { "FAIL" }
        );
    }

    if let Some(path) = &args.report {
        write_verify_report(path, &report)?;
        println!("report written to {}", path.display());
    }

    Ok(if report.exact_checks_pass() { 0 } else { 1 })
}

fn write_verify_report(
    path: &PathBuf,
    report: &gsemo::harness::LemmaSuiteReport,
) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = fs::File::create(path)?;
    for (id, snapshot) in report.populations.iter().enumerate() {
        let record = serde_json::json!({
            "kind": "population",
            "id": id,
            "snapshot": snapshot,
        });
        writeln!(out, "{record}")?;
    }
    for entry in &report.table {
        let record = serde_json::json!({
            "kind": "bound",
            "population": entry.population,
            "index": entry.row.index,
            "class": entry.row.row.to_string(),
            "replace_prob": entry.row.replace_prob,
            "replace_exact": entry.row.replace_exact,
            "lower": entry.row.replace_lower,
            "upper": entry.row.replace_upper,
            "improve_prob": entry.row.improve_prob,
            "improve_lower": entry.row.improve_lower,
            "verdict": if entry.row.ok() { "pass" } else { "advisory-fail" },
        });
        writeln!(out, "{record}")?;
    }
    for failure in &report.hard_failures {
        let record = serde_json::json!({
            "kind": "hard-failure",
            "what": failure.what,
            "population": failure.population,
        });
        writeln!(out, "{record}")?;
    }
    Ok(())
}

fn cmd_phases(args: PhasesArgs) -> anyhow::Result<u8> {
    let (header, records) = match read_trace(&args.trace) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("gsemo: cannot read trace {}: {e}", args.trace.display());
            return Ok(EXIT_DATA);
        }
    };
    let phases = match segment_phases(&records) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("gsemo: malformed trace {}: {e}", args.trace.display());
            return Ok(EXIT_DATA);
        }
    };

    println!(
        "trace: n={} seed={} mode={} ({} iteration records)",
        header.n,
        header.seed,
        header.mode,
        records.iter().filter(|r| !r.final_snapshot).count()
    );

    // Phase-length histogram over power-of-two buckets.
    let mut buckets: BTreeMap<u32, usize> = BTreeMap::new();
    for p in &phases {
        let len = p.end_iter - p.start_iter + 1;
        buckets
            .entry(64 - u64::leading_zeros(len.max(1)))
            .and_modify(|c| *c += 1)
            .or_insert(1);
    }
    println!("phases: {}", phases.len());
    for (bits, count) in &buckets {
        let lo = 1u64 << (bits - 1);
        let hi = (1u64 << bits) - 1;
        println!("  length {lo:>8}..={hi:<8} : {count}");
    }

    let mut occupancy = [0u64; 3];
    for r in records.iter().filter(|r| !r.final_snapshot) {
        if let Some(state) = r.state {
            occupancy[state.index()] += 1;
        }
    }
    let total: u64 = occupancy.iter().sum();
    if total > 0 {
        println!(
            "state occupancy: state1 {:.4}, state2 {:.4}, state3 {:.4} (over {} almost balanced iterations)",
            occupancy[0] as f64 / total as f64,
            occupancy[1] as f64 / total as f64,
            occupancy[2] as f64 / total as f64,
            total
        );
    } else {
        println!("state occupancy: no almost balanced iterations recorded");
    }

    let optimal_phases = phases.iter().filter(|p| p.ended_optimal).count();
    println!(
        "phases ended optimal: {} of {} ({:.4})",
        optimal_phases,
        phases.len(),
        optimal_phases as f64 / phases.len() as f64
    );
    Ok(0)
}
