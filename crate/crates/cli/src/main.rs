//! `simulate`: Monte Carlo sweeps and single-link solves from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bdris_core::experiment::{
    aggregate, format_real, run_sweep, write_csv, write_summary_csv, ExperimentConfig, SweepKind, TrialResult,
    WORKERS_ENV,
};
use bdris_core::metrics::{GainMode, RisArchitecture};
use bdris_core::phase::PhaseTrace;
use bdris_core::power::PowerRule;
use bdris_core::solver::{solve_architecture, OuterIterate};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "simulate",
    version,
    about = "Spectral-efficiency sweeps for a BD-RIS assisted underlay link",
    after_help = format!("Set {WORKERS_ENV}=N to cap the number of worker threads.")
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the ST power cap (dBm), one file per interference threshold.
    PowerSweep(SweepArgs),
    /// Sweep the number of surface elements.
    ElementSweep(SweepArgs),
    /// Sweep the interference threshold (W), one file per power level.
    IthSweep(SweepArgs),
    /// Solve one channel draw and dump the full optimizer trace as JSON.
    Single(SingleArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; fields not given keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    arch: Option<ArchArg>,
    #[arg(long, value_enum)]
    gain_mode: Option<GainArg>,
    #[arg(long, value_enum)]
    power_rule: Option<RuleArg>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV. With several series the series value is appended to the
    /// stem; a `_summary` file with per-point means is written alongside.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SingleArgs {
    #[command(flatten)]
    common: Common,
    /// Trial index whose channel draw is solved.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// ST power cap in dBm (default: the config's `p_s_dbm`).
    #[arg(long)]
    p_max_dbm: Option<f64>,
    /// Interference threshold in watts (default: first of `i_th_list`).
    #[arg(long)]
    i_th: Option<f64>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Bd,
    D,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum GainArg {
    Feed,
    LiteralNorm,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Kkt,
    Boundary,
}

/// Reads `path` over the defaults of its sweep kind. With `expected` set, a
/// file describing a different sweep is rejected.
fn load_config(path: Option<&Path>, expected: Option<SweepKind>) -> Result<ExperimentConfig> {
    let fallback = expected.unwrap_or(SweepKind::PowerSweep);
    let Some(path) = path else {
        return Ok(ExperimentConfig::defaults_for(fallback));
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let kind = match value.get("sweep") {
        Some(sweep) => {
            serde_json::from_value(sweep.clone()).with_context(|| format!("{}: unknown sweep kind", path.display()))?
        }
        None => fallback,
    };
    if let Some(expected) = expected.filter(|e| *e != kind) {
        bail!(
            "{} describes a {kind:?} but the subcommand runs a {expected:?}",
            path.display()
        );
    }
    // Omitted grids follow the defaults of the file's own sweep.
    let mut merged = serde_json::to_value(ExperimentConfig::defaults_for(kind))?;
    merge(&mut merged, value);
    serde_json::from_value(merged).with_context(|| format!("{}: invalid config", path.display()))
}

/// Overlay `patch` onto `base`, recursing into objects.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_common(cfg: &mut ExperimentConfig, common: &Common) {
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(arch) = common.arch {
        cfg.fixed.architectures = match arch {
            ArchArg::Bd => vec![RisArchitecture::Bd],
            ArchArg::D => vec![RisArchitecture::D],
            ArchArg::Both => vec![RisArchitecture::Bd, RisArchitecture::D],
        };
    }
    if let Some(g) = common.gain_mode {
        cfg.fixed.gain_mode = match g {
            GainArg::Feed => GainMode::FeedVector,
            GainArg::LiteralNorm => GainMode::LiteralNorm,
        };
    }
    if let Some(r) = common.power_rule {
        cfg.fixed.power_rule = match r {
            RuleArg::Kkt => PowerRule::KktWaterFilling,
            RuleArg::Boundary => PowerRule::BoundaryOptimal,
        };
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    let ext = path
        .extension()
        .map_or_else(|| "csv".into(), |e| e.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn default_out(kind: SweepKind) -> PathBuf {
    PathBuf::from(match kind {
        SweepKind::PowerSweep => "power_sweep.csv",
        SweepKind::ElementSweep => "element_sweep.csv",
        SweepKind::IthSweep => "ith_sweep.csv",
    })
}

fn run_sweep_command(kind: SweepKind, args: &SweepArgs) -> Result<()> {
    let mut cfg = load_config(args.common.config.as_deref(), Some(kind))?;
    apply_common(&mut cfg, &args.common);
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()?;

    let rows = run_sweep(&cfg)?;
    let out = args.out.clone().unwrap_or_else(|| default_out(kind));
    let series = cfg.series_values();
    for &value in &series {
        let subset: Vec<TrialResult> = rows.iter().filter(|r| r.series_value == value).copied().collect();
        let path = if series.len() == 1 {
            out.clone()
        } else {
            with_suffix(&out, &format!("_{}{}", kind.series_tag(), format_real(value)))
        };
        let summary = aggregate(&subset)?;
        write_csv(&subset, &path)?;
        write_summary_csv(&summary, &with_suffix(&path, "_summary"))?;
        println!("{} = {}  ->  {}", kind.series_tag(), format_real(value), path.display());
        for s in &summary {
            println!(
                "  {:>10}  {:<2}  mean {:.6}  ± {:.6}",
                format_real(s.sweep_value),
                s.architecture.label(),
                s.mean_se,
                s.stderr_se
            );
        }
    }
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} of {} solves hit max_outer", rows.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct SingleDump<'a> {
    architecture: RisArchitecture,
    master_seed: u64,
    trial: u64,
    p_max_w: f64,
    i_th_w: f64,
    se_bits: f64,
    p_s_w: f64,
    interference_w: f64,
    converged: bool,
    se_trace: &'a [f64],
    outer: &'a [OuterIterate],
    phase: &'a [PhaseTrace],
    /// Rows of `Φ` as `[re, im]` pairs.
    phi: Vec<Vec<[f64; 2]>>,
}

fn run_single(args: &SingleArgs) -> Result<()> {
    let mut cfg = load_config(args.common.config.as_deref(), None)?;
    apply_common(&mut cfg, &args.common);
    // Recast as a one-point power sweep.
    let default_i_th = match cfg.sweep {
        SweepKind::IthSweep => cfg.sweep_values.first().copied(),
        _ => cfg.fixed.i_th_list.first().copied(),
    };
    if cfg.sweep == SweepKind::ElementSweep {
        let m = cfg.sweep_values.first().copied().unwrap_or(cfg.fixed.m as f64) as usize;
        (cfg.fixed.mx, cfg.fixed.my) = bdris_core::experiment::element_shape(m);
        cfg.fixed.m = m;
    }
    cfg.sweep = SweepKind::PowerSweep;
    cfg.sweep_values = vec![args.p_max_dbm.unwrap_or(cfg.fixed.p_s_dbm)];
    cfg.fixed.i_th_list = args.i_th.or(default_i_th).into_iter().collect();
    cfg.validate()?;
    let i_th = cfg.series_values()[0];
    let (budget, model) = cfg.scenario(i_th, cfg.sweep_values[0]);
    let chan = model.draw(cfg.master_seed, args.trial)?;
    let opts = cfg.solver_options();

    let mut dumps = Vec::new();
    for arch in cfg.architectures() {
        let report = solve_architecture(arch, &chan, &budget, &opts)?;
        let phi = report
            .phi_star
            .phi
            .row_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        dumps.push(serde_json::to_value(SingleDump {
            architecture: arch,
            master_seed: cfg.master_seed,
            trial: args.trial,
            p_max_w: budget.p_max,
            i_th_w: budget.i_th,
            se_bits: report.spectral_efficiency(),
            p_s_w: report.p_s_star,
            interference_w: report.interference_final,
            converged: report.converged,
            se_trace: &report.se_trace,
            outer: &report.iterates,
            phase: &report.phase_traces,
            phi,
        })?);
    }
    let text = serde_json::to_string_pretty(&dumps)?;
    match &args.out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::PowerSweep(a) => run_sweep_command(SweepKind::PowerSweep, a),
        Command::ElementSweep(a) => run_sweep_command(SweepKind::ElementSweep, a),
        Command::IthSweep(a) => run_sweep_command(SweepKind::IthSweep, a),
        Command::Single(a) => run_single(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
