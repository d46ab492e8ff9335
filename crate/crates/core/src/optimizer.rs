//! Multi-start Adam optimization of block circuits, cutoff selection and leakage checks.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, GateSet, WindowModel, WindowWorkspace, MAX_SQUEEZE};
use crate::error::{Error, Result};
use crate::fock::FockVector;
use crate::gkp::{FockProfile, LogicalLabel};

/// Successive-cutoff fidelity that counts as converged.
pub const CUTOFF_FIDELITY: f64 = 0.999;
/// Number of consecutive increments that must stay converged.
pub const CUTOFF_RUN: usize = 6;
/// Largest cutoff `select_cutoff` will consider.
pub const SELECT_CUTOFF_CAP: usize = 400;
/// Largest cutoff `auto_cutoff` will consider.
pub const AUTO_CUTOFF_CAP: usize = 600;
/// Truncation tail accepted by `auto_cutoff`.
pub const AUTO_CUTOFF_TAIL: f64 = 1e-3;
/// Truncation tail used when a target only feeds a metric and must not bias it.
pub const METRIC_CUTOFF_TAIL: f64 = 1e-4;
/// Retained probability required by the leakage check.
pub const LEAKAGE_THRESHOLD: f64 = 0.996;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamScale {
    pub c: f64,
    pub d: f64,
    pub k: f64,
    pub r: f64,
}

impl ParamScale {
    pub const fn new(c: f64, d: f64, k: f64, r: f64) -> Self {
        Self { c, d, k, r }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.c, self.d, self.k, self.r]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub trials: usize,
    pub max_iters: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Half-widths of the uniform initial distribution.
    pub init_scale: ParamScale,
    /// Per-parameter multipliers of `step_size`.
    pub step_scale: ParamScale,
    /// Step size at `max_iters` relative to the initial one; decays geometrically.
    pub final_step_fraction: f64,
    pub rng_seed: u64,
    pub early_stop_infidelity: f64,
    /// Stop a trial when the best infidelity improved by less than
    /// `plateau_tolerance` over this many iterations.
    pub plateau_window: usize,
    pub plateau_tolerance: f64,
    /// Levels added above the target cutoff in the returned parameters, so that
    /// `forward` reproduces the optimized state without boundary effects.
    /// `None` uses [`default_guard_levels`].
    pub guard_levels: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            max_iters: 2000,
            step_size: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_scale: ParamScale::new(0.3, 0.3, 0.1, 0.3),
            step_scale: ParamScale::new(1.0, 1.0, 1.0, 1.0),
            final_step_fraction: 1.0,
            rng_seed: 0,
            early_stop_infidelity: 1e-3,
            plateau_window: 200,
            plateau_tolerance: 1e-6,
            guard_levels: None,
        }
    }
}

impl OptimizerConfig {
    /// Tuned defaults for `delta`: long decaying descents, no plateau stop, and
    /// Kerr steps shrunk as `delta^4` because the Kerr phase grows as `n^2`.
    pub fn for_delta(delta: f64) -> Self {
        let k = (delta / 0.3).powi(4).min(1.0);
        let max_iters = if delta >= 0.2 { 40_000 } else { 8_000 };
        Self {
            trials: default_trials(delta),
            max_iters,
            init_scale: ParamScale::new(0.3, 0.3, 0.1 * k, 0.3),
            step_scale: ParamScale::new(1.0, 1.0, k, 1.0),
            final_step_fraction: if delta >= 0.2 { 0.05 } else { 0.1 },
            plateau_window: max_iters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Configuration(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if self.init_scale.as_array().iter().any(|s| !(*s >= 0.0)) {
            return bad("init_scale components must be non-negative");
        }
        if self.step_scale.as_array().iter().any(|s| !(*s >= 0.0)) {
            return bad("step_scale components must be non-negative");
        }
        if !(self.final_step_fraction > 0.0 && self.final_step_fraction <= 1.0) {
            return bad("final_step_fraction must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Random restarts used by default at this `delta`.
pub fn default_trials(delta: f64) -> usize {
    if delta >= 0.2 {
        10
    } else {
        30
    }
}

/// Guard band above a target cutoff; squeezing near level `n` spreads over
/// roughly `n/2` levels, so the band grows with the cutoff.
pub fn default_guard_levels(cutoff: usize) -> usize {
    (cutoff / 2).max(20)
}

/// Circuit depth used by default at this `delta`.
pub fn default_blocks(delta: f64) -> usize {
    if delta >= 0.25 {
        15
    } else if delta >= 0.15 {
        30
    } else {
        60
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHistory {
    pub trial: usize,
    pub seed: u64,
    /// `(iteration, best infidelity so far)`.
    pub trace: Vec<(usize, f64)>,
    pub best_fidelity: f64,
    pub iterations: usize,
    pub aborted: bool,
}

impl TrialHistory {
    /// CSV with columns `iteration,infidelity`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,infidelity\n");
        for (it, inf) in &self.trace {
            out.push_str(&format!("{it},{}\n", format_g12(*inf)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    pub best_params: CircuitParams,
    pub best_fidelity: f64,
    pub best_trial: usize,
    pub per_trial_history: Vec<TrialHistory>,
    pub wallclock: f64,
}

struct TrialResult {
    history: TrialHistory,
    theta: Vec<f64>,
}

/// Runs `cfg.trials` independent Adam descents on `1 - F` and keeps the best.
pub fn optimize(
    target: &FockVector,
    target_delta: f64,
    blocks: usize,
    cfg: &OptimizerConfig,
) -> Result<OptimizationRecord> {
    optimize_staged(std::slice::from_ref(target), target_delta, blocks, cfg)
}

/// Like [`optimize`], but every trial first descends on each of the earlier
/// `stages` in turn, warm-starting from the previous result, and is scored on
/// the last one. Each stage gets the full `cfg.max_iters` budget.
pub fn optimize_staged(
    stages: &[FockVector],
    target_delta: f64,
    blocks: usize,
    cfg: &OptimizerConfig,
) -> Result<OptimizationRecord> {
    cfg.validate()?;
    if blocks == 0 {
        return Err(Error::InvalidParameter("blocks must be at least 1".into()));
    }
    let Some(target) = stages.last() else {
        return Err(Error::InvalidParameter("at least one optimization target is required".into()));
    };
    for s in stages {
        s.ensure_normalized("optimization target")?;
        s.check_dim(target.cutoff())?;
    }
    let start = Instant::now();
    let window = target.cutoff();
    let model = WindowModel::new(window)?;

    let results: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(&model, stages, blocks, cfg, t))
        .collect::<Result<_>>()?;

    let best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.history.best_fidelity.is_finite())
        .max_by(|(ia, a), (ib, b)| {
            a.history
                .best_fidelity
                .total_cmp(&b.history.best_fidelity)
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidParameter("every optimization trial diverged".into()))?;

    let sim = window + cfg.guard_levels.unwrap_or_else(|| default_guard_levels(window));
    let mut best_params = CircuitParams::zeros(target_delta, sim, blocks)?;
    best_params.seed = results[best].history.seed;
    best_params.set_vector(&results[best].theta);
    let best_fidelity = results[best].history.best_fidelity;
    let per_trial_history = results.into_iter().map(|r| r.history).collect();
    Ok(OptimizationRecord {
        best_params,
        best_fidelity,
        best_trial: best,
        per_trial_history,
        wallclock: start.elapsed().as_secs_f64(),
    })
}

/// Seed of trial `t`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    seed ^ t as u64
}

fn run_trial(
    model: &WindowModel,
    stages: &[FockVector],
    blocks: usize,
    cfg: &OptimizerConfig,
    t: usize,
) -> Result<TrialResult> {
    let seed = trial_seed(cfg.rng_seed, t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = cfg.init_scale.as_array();
    let mut theta: Vec<f64> = (0..4 * blocks)
        .map(|j| {
            let s = scale[j % 4];
            if s > 0.0 {
                rng.gen_range(-s..=s)
            } else {
                0.0
            }
        })
        .collect();
    let (last, warmup) = stages.split_last().expect("at least one stage");
    for (k, target) in warmup.iter().enumerate() {
        let r = descend(model, target, theta, cfg, t, seed)?;
        if r.history.aborted {
            log::warn!("trial {t}: warm-up stage {k} diverged");
        }
        theta = r.theta;
    }
    descend(model, last, theta, cfg, t, seed)
}

/// One Adam descent from `theta`; the returned parameters are the best seen.
fn descend(
    model: &WindowModel,
    target: &FockVector,
    mut theta: Vec<f64>,
    cfg: &OptimizerConfig,
    t: usize,
    seed: u64,
) -> Result<TrialResult> {
    let base_rate = cfg.step_scale.as_array().map(|s| s * cfg.step_size);
    let decay = cfg.final_step_fraction.powf(1.0 / cfg.max_iters.max(1) as f64);
    let mut rate = base_rate;
    let n = theta.len();
    let mut grad = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut ws = WindowWorkspace::default();
    let mut best_theta = theta.clone();
    let mut best_inf = f64::INFINITY;
    let mut trace = Vec::new();
    let mut aborted = false;
    let mut last_improvement = (0usize, f64::INFINITY);
    let mut iterations = 0;

    for it in 0..=cfg.max_iters {
        let f = model.fidelity_and_gradient(&theta, target, &mut ws, &mut grad)?;
        if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            log::warn!("trial {t} (seed {seed}) diverged at iteration {it}; aborting");
            aborted = true;
            break;
        }
        iterations = it;
        let inf = 1.0 - f;
        if inf < best_inf {
            best_inf = inf;
            best_theta.copy_from_slice(&theta);
        }
        trace.push((it, best_inf));
        if best_inf <= cfg.early_stop_infidelity || it == cfg.max_iters {
            break;
        }
        if last_improvement.1 - best_inf > cfg.plateau_tolerance {
            last_improvement = (it, best_inf);
        } else if it - last_improvement.0 >= cfg.plateau_window {
            break;
        }

        if decay != 1.0 {
            let f = decay.powi(it as i32);
            rate = base_rate.map(|r| r * f);
        }
        let step = (it + 1) as i32;
        let bc1 = 1.0 - cfg.beta1.powi(step);
        let bc2 = 1.0 - cfg.beta2.powi(step);
        for j in 0..n {
            // loss is 1 - F
            let g = -grad[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            let mh = m[j] / bc1;
            let vh = v[j] / bc2;
            theta[j] -= rate[j % 4] * mh / (vh.sqrt() + cfg.epsilon);
            if j % 4 == 3 {
                theta[j] = theta[j].clamp(-MAX_SQUEEZE, MAX_SQUEEZE);
            }
        }
    }
    log::debug!("trial {t}: best infidelity {best_inf:.6} after {iterations} iterations");

    Ok(TrialResult {
        history: TrialHistory {
            trial: t,
            seed,
            trace,
            best_fidelity: 1.0 - best_inf,
            iterations,
            aborted,
        },
        theta: best_theta,
    })
}

fn check_cutoff_delta(delta: f64) -> Result<()> {
    if !(0.05..=0.5).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "cutoff selection supports 0.05 <= delta <= 0.5 (got {delta})"
        )));
    }
    Ok(())
}

/// Smallest `m` with `F(target_m, target_{m+1}) > 0.999` for six consecutive values of `m`.
pub fn select_cutoff(delta: f64) -> Result<usize> {
    check_cutoff_delta(delta)?;
    let profile = FockProfile::compute(LogicalLabel::Zero, delta, SELECT_CUTOFF_CAP + CUTOFF_RUN + 1)?;
    (1..=SELECT_CUTOFF_CAP)
        .find(|&m| (m..m + CUTOFF_RUN).all(|k| profile.successive_fidelity(k) > CUTOFF_FIDELITY))
        .ok_or(Error::CutoffSearchExhausted {
            delta,
            cap: SELECT_CUTOFF_CAP,
        })
}

/// At least `select_cutoff`, and large enough that truncation drops at most 0.1% of the norm.
pub fn auto_cutoff(mu: LogicalLabel, delta: f64) -> Result<usize> {
    cutoff_for_tail(mu, delta, AUTO_CUTOFF_TAIL)
}

/// At least `select_cutoff`, and large enough that the truncated tail is at most `tail`.
pub fn cutoff_for_tail(mu: LogicalLabel, delta: f64, tail: f64) -> Result<usize> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::InvalidParameter(format!("tail must lie in (0, 1) (got {tail})")));
    }
    let base = select_cutoff(delta)?;
    let profile = FockProfile::compute(mu, delta, AUTO_CUTOFF_CAP)?;
    (base..=AUTO_CUTOFF_CAP)
        .find(|&m| profile.tail(m) <= tail)
        .ok_or(Error::CutoffSearchExhausted {
            delta,
            cap: AUTO_CUTOFF_CAP,
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub cutoff: usize,
    pub margin: usize,
    pub retained: f64,
    pub passed: bool,
}

/// Re-runs the circuit at `cutoff + margin` and measures the probability left in the original window.
pub fn validate_leakage(params: &CircuitParams, margin: usize) -> Result<LeakageReport> {
    params.validate()?;
    if margin < 10 {
        return Err(Error::InvalidParameter(format!("margin must be at least 10 (got {margin})")));
    }
    let big = GateSet::new(params.cutoff + margin)?.forward(&params.to_vector())?;
    let retained: f64 = big.amplitudes()[..params.cutoff]
        .iter()
        .map(|a| a.norm_sqr())
        .sum();
    Ok(LeakageReport {
        cutoff: params.cutoff,
        margin,
        retained,
        passed: retained >= LEAKAGE_THRESHOLD,
    })
}

/// `%.12g`-style formatting.
pub fn format_g12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').expect("exponent");
        format!("{}e{}", trim_zeros(mant), e)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
