use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use gkp_forge::circuit::{forward, CircuitParams};
use gkp_forge::fock::{density, Basis, FockVector, QuadratureGrid};
use gkp_forge::gkp::{
    build_target, squeezing_db, twirled_error_probability, GkpTargetSpec, LogicalLabel, StateFile,
    TwirledModel,
};
use gkp_forge::logical::{ec_batch, ec_csv, EcConfig};
use gkp_forge::metrics::{error_probability, ErrorProbabilityConfig, QualityReport};
use gkp_forge::optimizer::{
    auto_cutoff, cutoff_for_tail, default_blocks, format_g12, optimize, select_cutoff,
    validate_leakage, OptimizerConfig, METRIC_CUTOFF_TAIL,
};

const THRESHOLD_DELTA: f64 = 0.32;

#[derive(Parser, Debug)]
#[command(name = "gkp-forge", version, about = "Synthesize and certify finite-energy GKP states")]
struct Cli {
    /// Worker threads; 1 gives bit-identical reruns.
    #[arg(long, global = true, env = "GKP_FORGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
enum Command {
    /// Build a target state and its position density.
    Target(TargetArgs),
    /// Optimize a block circuit toward a target state.
    Optimize(OptimizeArgs),
    /// Error probabilities of target, twirled and generated states over a list of deltas.
    Sweep(SweepArgs),
    /// Cutoff selected for each delta.
    Cutoff(CutoffArgs),
    /// Twirled error probability as a function of delta.
    Threshold(ThresholdArgs),
    /// Batch of momentum error-correction rounds.
    EcDemo(EcDemoArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
enum CutoffArg {
    Auto,
    Fixed(usize),
}

impl FromStr for CutoffArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(CutoffArg::Auto);
        }
        s.parse()
            .map(CutoffArg::Fixed)
            .map_err(|_| format!("expected `auto` or a positive integer, got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
struct Deltas(Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
struct Seeds(Vec<u64>);

fn parse_label(s: &str) -> std::result::Result<LogicalLabel, String> {
    s.parse().map_err(|e: gkp_forge::Error| e.to_string())
}

/// Comma-separated values or `start..end:step`.
fn parse_deltas(s: &str) -> std::result::Result<Vec<f64>, String> {
    if let Some((range, step)) = s.split_once(':') {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| format!("bad range `{s}`; use start..end:step"))?;
        let (a, b, step): (f64, f64, f64) = (
            a.parse().map_err(|_| format!("bad number `{a}`"))?,
            b.parse().map_err(|_| format!("bad number `{b}`"))?,
            step.parse().map_err(|_| format!("bad number `{step}`"))?,
        );
        if !(step > 0.0) || b < a {
            return Err(format!("empty range `{s}`"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + step * i as f64).collect());
    }
    let v: Vec<f64> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| format!("bad number `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    if v.is_empty() {
        return Err("delta list is empty".into());
    }
    Ok(v)
}

/// `a..b` (inclusive) or a comma-separated list.
fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.parse().map_err(|_| format!("bad seed `{a}`"))?;
        let b: u64 = b.parse().map_err(|_| format!("bad seed `{b}`"))?;
        if b < a {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad seed `{t}`")))
        .collect()
}

fn delta_list(s: &str) -> std::result::Result<Deltas, String> {
    parse_deltas(s).map(Deltas)
}

fn seed_list(s: &str) -> std::result::Result<Seeds, String> {
    parse_seeds(s).map(Seeds)
}

#[derive(Args, Debug, Clone, Serialize)]
struct TargetArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value = "0", value_parser = parse_label)]
    mu: LogicalLabel,
    #[arg(long, default_value = "auto")]
    cutoff: CutoffArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OptimizeArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value = "0", value_parser = parse_label)]
    mu: LogicalLabel,
    #[arg(long, default_value = "auto")]
    blocks: String,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "auto")]
    cutoff: CutoffArg,
    /// Adam iterations per trial.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SweepArgs {
    #[arg(long, value_parser = delta_list)]
    deltas: Deltas,
    /// Optimized parameter files; each is matched to the delta it was built for.
    #[arg(long, value_delimiter = ',')]
    params: Vec<PathBuf>,
    #[arg(long, default_value = "0", value_parser = parse_label)]
    mu: LogicalLabel,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CutoffArgs {
    #[arg(long, value_parser = delta_list)]
    deltas: Deltas,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 0.05)]
    from: f64,
    #[arg(long, default_value_t = 0.6)]
    to: f64,
    #[arg(long, default_value_t = 0.005)]
    step: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EcDemoArgs {
    #[arg(long, default_value = "1..100", value_parser = seed_list)]
    seeds: Seeds,
    #[arg(long, default_value_t = 0.3)]
    delta: f64,
    /// Cutoff of both modes.
    #[arg(long, default_value_t = 36)]
    cutoff: usize,
    /// Data state (JSON state file); defaults to the target |0>.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ReplayArgs {
    manifest: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    command: String,
    args: Vec<String>,
    config: serde_json::Value,
    seeds: Vec<u64>,
    version: String,
    threads: usize,
    inputs: Vec<String>,
    outputs: Vec<String>,
    wallclock: f64,
}

/// Files produced by a command, written together once everything succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, String)>,
    inputs: Vec<PathBuf>,
    seeds: Vec<u64>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, contents: String) {
        self.files.push((path, contents));
    }
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn resolve_cutoff(arg: CutoffArg, mu: LogicalLabel, delta: f64) -> Result<usize> {
    Ok(match arg {
        CutoffArg::Auto => auto_cutoff(mu, delta)?,
        CutoffArg::Fixed(n) => n,
    })
}

fn cmd_target(a: &TargetArgs, out: &mut Outputs) -> Result<()> {
    let cutoff = resolve_cutoff(a.cutoff, a.mu, a.delta)?;
    let spec = GkpTargetSpec::new(a.mu, a.delta, cutoff)?;
    let target = build_target(&spec)?;
    if target.leakage > spec.max_leakage {
        return Err(gkp_forge::Error::CutoffTooSmall {
            cutoff,
            delta: a.delta,
            leakage: target.leakage,
            allowed: spec.max_leakage,
            required: gkp_forge::gkp::required_cutoff(a.mu, a.delta, spec.max_leakage)?,
        }
        .into());
    }
    let file = StateFile::new(&spec, target.state.clone());
    out.add(a.out.clone(), file.to_json()?);
    out.add(sibling(&a.out, ".density.csv"), density_csv(&target.state)?);
    log::info!("target {} at delta {} with cutoff {cutoff}, leakage {:.3e}", a.mu, a.delta, target.leakage);
    Ok(())
}

fn density_csv(state: &FockVector) -> Result<String> {
    let grid = QuadratureGrid::for_cutoff(state.cutoff())?;
    let rho = density(state, &grid, Basis::Position);
    let mut s = String::from("q,density\n");
    for (q, r) in grid.points().iter().zip(rho) {
        writeln!(s, "{},{}", format_g12(*q), format_g12(r))?;
    }
    Ok(s)
}

fn cmd_optimize(a: &OptimizeArgs, out: &mut Outputs) -> Result<()> {
    let blocks = match a.blocks.as_str() {
        "auto" => default_blocks(a.delta),
        n => n.parse().with_context(|| format!("--blocks expects `auto` or an integer, got `{n}`"))?,
    };
    let cutoff = match a.cutoff {
        CutoffArg::Auto => auto_cutoff(a.mu, a.delta)?,
        CutoffArg::Fixed(n) => n,
    };
    let spec = GkpTargetSpec::new(a.mu, a.delta, cutoff)?.with_max_leakage(1.0);
    let target = build_target(&spec)?;
    let mut cfg = OptimizerConfig::for_delta(a.delta);
    cfg.rng_seed = a.seed;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(i) = a.iters {
        cfg.max_iters = i;
    }
    if let Some(s) = a.step_size {
        cfg.step_size = s;
    }
    out.seeds = (0..cfg.trials).map(|t| gkp_forge::optimizer::trial_seed(a.seed, t)).collect();

    let rec = optimize(&target.state, a.delta, blocks, &cfg)?;
    let state = forward(&rec.best_params)?;
    let padded = target.state.resized(state.cutoff())?.normalized()?;
    let leak = validate_leakage(&rec.best_params, 30)?;
    let report = QualityReport::evaluate(
        &state,
        &padded,
        a.delta,
        1.0 - leak.retained,
        &ErrorProbabilityConfig::default(),
    )?;
    if !leak.passed {
        log::warn!("retained probability {:.5} at margin 30 is below the leakage threshold", leak.retained);
    }

    let mut trace = String::from("trial,iteration,infidelity\n");
    for h in &rec.per_trial_history {
        for (it, inf) in &h.trace {
            writeln!(trace, "{},{it},{}", h.trial, format_g12(*inf))?;
        }
    }
    let summary = serde_json::json!({
        "quality": report,
        "target_cutoff": cutoff,
        "target_leakage": target.leakage,
        "objective_fidelity": rec.best_fidelity,
        "best_trial": rec.best_trial,
        "leakage": leak,
        "optimizer": cfg,
        "blocks": blocks,
        "wallclock": rec.wallclock,
    });
    out.add(a.out.clone(), rec.best_params.to_json()?);
    out.add(sibling(&a.out, ".trace.csv"), trace);
    out.add(sibling(&a.out, ".report.json"), serde_json::to_string_pretty(&summary)?);
    println!(
        "fidelity {} p_error {} retained {}",
        format_g12(report.fidelity),
        format_g12(report.p_error),
        format_g12(leak.retained)
    );
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, out: &mut Outputs) -> Result<()> {
    if a.deltas.0.is_empty() {
        bail!("--deltas must list at least one value");
    }
    let params: Vec<CircuitParams> = a
        .params
        .iter()
        .map(|p| {
            out.inputs.push(p.clone());
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(CircuitParams::from_json(&text)?)
        })
        .collect::<Result<_>>()?;
    let cfg = ErrorProbabilityConfig::default();
    let mut s = String::from(
        "kind,delta,squeezing_db,p_error_target,p_error_twirled,p_error_generated,infidelity\n",
    );
    for &delta in &a.deltas.0 {
        let cutoff = match cutoff_for_tail(a.mu, delta, METRIC_CUTOFF_TAIL) {
            Ok(n) => n,
            Err(e) => {
                log::warn!("{e}; using the default automatic cutoff");
                auto_cutoff(a.mu, delta)?
            }
        };
        let target = build_target(&GkpTargetSpec::new(a.mu, delta, cutoff)?.with_max_leakage(1.0))?.state;
        let p_target = error_probability(&target, &cfg)?;
        let p_twirled = twirled_error_probability(&TwirledModel::new(delta)?);
        let (mut p_gen, mut inf) = (String::new(), String::new());
        if let Some(p) = params.iter().find(|p| (p.target_delta - delta).abs() < 1e-9) {
            let state = forward(p)?;
            let t = build_target(&GkpTargetSpec::new(a.mu, delta, p.cutoff)?.with_max_leakage(1.0))?.state;
            p_gen = format_g12(error_probability(&state, &cfg)?);
            inf = format_g12(1.0 - gkp_forge::metrics::fidelity(&state, &t));
        }
        writeln!(
            s,
            "point,{},{},{},{},{p_gen},{inf}",
            format_g12(delta),
            format_g12(squeezing_db(delta)),
            format_g12(p_target),
            format_g12(p_twirled)
        )?;
    }
    let p_th = twirled_error_probability(&TwirledModel::new(THRESHOLD_DELTA)?);
    writeln!(
        s,
        "threshold,{},{},,{},,",
        format_g12(THRESHOLD_DELTA),
        format_g12(squeezing_db(THRESHOLD_DELTA)),
        format_g12(p_th)
    )?;
    out.add(a.out.clone(), s);
    Ok(())
}

fn cmd_cutoff(a: &CutoffArgs, out: &mut Outputs) -> Result<()> {
    let mut s = String::from("delta,cutoff\n");
    for &d in &a.deltas.0 {
        writeln!(s, "{},{}", format_g12(d), select_cutoff(d)?)?;
    }
    out.add(a.out.clone(), s);
    Ok(())
}

fn cmd_threshold(a: &ThresholdArgs, out: &mut Outputs) -> Result<()> {
    let deltas = parse_deltas(&format!("{}..{}:{}", a.from, a.to, a.step)).map_err(anyhow::Error::msg)?;
    let mut s = String::from("delta,squeezing_db,p_error_twirled\n");
    for d in deltas {
        let p = twirled_error_probability(&TwirledModel::new(d)?);
        writeln!(s, "{},{},{}", format_g12(d), format_g12(squeezing_db(d)), format_g12(p))?;
    }
    out.add(a.out.clone(), s);
    Ok(())
}

fn cmd_ec_demo(a: &EcDemoArgs, out: &mut Outputs) -> Result<()> {
    let spec = GkpTargetSpec::new(LogicalLabel::Zero, a.delta, a.cutoff)?.with_max_leakage(1.0);
    let ancilla = build_target(&spec)?.state.normalized()?;
    let data = match &a.data {
        Some(p) => {
            out.inputs.push(p.clone());
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let file = StateFile::from_json(&text)?;
            file.amplitudes.resized(a.cutoff)?.normalized()?
        }
        None => ancilla.clone(),
    };
    out.seeds = a.seeds.0.clone();
    let rows = ec_batch(&data, &ancilla, &a.seeds.0, (a.cutoff, a.cutoff), &EcConfig::default())?;
    out.add(a.out.clone(), ec_csv(&rows));
    Ok(())
}

fn run(command: &Command, out: &mut Outputs) -> Result<()> {
    match command {
        Command::Target(a) => cmd_target(a, out),
        Command::Optimize(a) => cmd_optimize(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Cutoff(a) => cmd_cutoff(a, out),
        Command::Threshold(a) => cmd_threshold(a, out),
        Command::EcDemo(a) => cmd_ec_demo(a, out),
        Command::Replay(_) => bail!("a manifest cannot replay another replay"),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Target(_) => "target",
        Command::Optimize(_) => "optimize",
        Command::Sweep(_) => "sweep",
        Command::Cutoff(_) => "cutoff",
        Command::Threshold(_) => "threshold",
        Command::EcDemo(_) => "ec-demo",
        Command::Replay(_) => "replay",
    }
}

fn primary_output(c: &Command) -> Option<&Path> {
    Some(match c {
        Command::Target(a) => &a.out,
        Command::Optimize(a) => &a.out,
        Command::Sweep(a) => &a.out,
        Command::Cutoff(a) => &a.out,
        Command::Threshold(a) => &a.out,
        Command::EcDemo(a) => &a.out,
        Command::Replay(_) => return None,
    })
}

fn execute(cli: Cli, args: Vec<String>) -> Result<()> {
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let (command, args) = match cli.command {
        Command::Replay(r) => {
            let text = fs::read_to_string(&r.manifest)
                .with_context(|| format!("reading {}", r.manifest.display()))?;
            let m: Manifest = serde_json::from_str(&text)?;
            let mut argv = vec!["gkp-forge".to_string()];
            argv.extend(m.args.iter().cloned());
            let inner = Cli::try_parse_from(&argv)?;
            if matches!(inner.command, Command::Replay(_)) {
                bail!("manifest records a replay");
            }
            (inner.command, m.args)
        }
        c => (c, args),
    };

    let start = Instant::now();
    let mut out = Outputs::default();
    pool.install(|| run(&command, &mut out))?;
    let wallclock = start.elapsed().as_secs_f64();

    let manifest_path = sibling(primary_output(&command).expect("non-replay command"), ".manifest.json");
    let manifest = Manifest {
        command: command_name(&command).into(),
        args,
        config: serde_json::to_value(&command)?,
        seeds: out.seeds.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        threads: pool.current_num_threads(),
        inputs: out.inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: out.files.iter().map(|(p, _)| p.display().to_string()).collect(),
        wallclock,
    };
    out.add(manifest_path, serde_json::to_string_pretty(&manifest)?);
    for (path, contents) in &out.files {
        write_atomic(path, contents)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match execute(cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
