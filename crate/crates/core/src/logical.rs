//! Encoded gates on grid states and a single round of momentum error correction.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    default_extent, gate, hermite_functions, tensor_with_cap, DenseOperator, FockVector,
    GateKind, QuadratureGrid, DEFAULT_TENSOR_CAP,
};
use crate::metrics::{error_probability, ErrorProbabilityConfig};
use crate::optimizer::format_g12;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Parameters realising the encoded phase gate `p -> p + s q` as
/// `R(theta)`, then `S(r)`, then `R(theta - pi/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGateDecomposition {
    pub s: f64,
    pub r: f64,
    pub theta: f64,
}

pub fn phase_gate_params(s: f64) -> Result<PhaseGateDecomposition> {
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!("phase-gate parameter must be finite (got {s})")));
    }
    let r = (0.5 * s).asinh();
    // cos(theta) = 1/sqrt(1 + e^{2r}) > 0
    let theta = r.exp().atan();
    Ok(PhaseGateDecomposition { s, r, theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LogicalGate {
    /// `X(sqrt(pi))`
    XBar,
    /// `Z(sqrt(pi))`
    ZBar,
    /// Quarter-period rotation, `q -> p`.
    Fourier,
    /// `R(theta)` for an arbitrary angle.
    Rotation(f64),
    /// Shear `p -> p + s q`.
    SBar(f64),
}

/// Applies an encoded gate; the state keeps its cutoff.
pub fn apply_logical(state: &FockVector, g: LogicalGate) -> Result<FockVector> {
    let n = state.cutoff();
    match g {
        LogicalGate::XBar => gate(GateKind::X, n)?.apply(SQRT_PI, state),
        LogicalGate::ZBar => gate(GateKind::Z, n)?.apply(SQRT_PI, state),
        LogicalGate::Fourier => gate(GateKind::R, n)?.apply(FRAC_PI_2, state),
        LogicalGate::Rotation(theta) => gate(GateKind::R, n)?.apply(theta, state),
        LogicalGate::SBar(s) => {
            let d = phase_gate_params(s)?;
            let rot = gate(GateKind::R, n)?;
            let sq = gate(GateKind::S, n)?;
            let a = rot.apply(d.theta, state)?;
            let b = sq.apply(d.r, &a)?;
            rot.apply(d.theta - FRAC_PI_2, &b)
        }
    }
}

/// Folds `x` into `(-sqrt(pi)/2, sqrt(pi)/2]`.
pub fn fold_centered(x: f64) -> f64 {
    let mut y = x - SQRT_PI * (x / SQRT_PI).round();
    if y <= -SQRT_PI / 2.0 {
        y += SQRT_PI;
    } else if y > SQRT_PI / 2.0 {
        y -= SQRT_PI;
    }
    y
}

/// Displacement applied after measuring momentum `p`: `-p mod sqrt(pi)`, centered.
pub fn correction_for(p: f64) -> f64 {
    fold_centered(-p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcConfig {
    /// Width of the homodyne cell.
    pub grid_spacing: f64,
    /// Momentum extent of the homodyne grid; `None` uses the ancilla's default extent.
    pub extent: Option<f64>,
    pub tensor_cap: usize,
    pub error: ErrorProbabilityConfig,
}

impl Default for EcConfig {
    fn default() -> Self {
        Self {
            grid_spacing: 0.01,
            extent: None,
            tensor_cap: DEFAULT_TENSOR_CAP,
            error: ErrorProbabilityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ECOutcome {
    pub p_sample: f64,
    pub correction: f64,
    pub post_state: FockVector,
    pub p_error_before: f64,
    pub p_error_after: f64,
}

/// One round of momentum correction: the coupling `exp(i p1 q2)` adds the data
/// momentum to the ancilla, mode 2 is measured in momentum, mode 1 is displaced back.
pub fn ec_round(
    data: &FockVector,
    ancilla: &FockVector,
    rng_seed: u64,
    cutoffs: (usize, usize),
    cfg: &EcConfig,
) -> Result<ECOutcome> {
    let data = fit(data, cutoffs.0, "data")?;
    let ancilla = fit(ancilla, cutoffs.1, "ancilla")?;
    let p_error_before = error_probability(&data, &cfg.error)?;
    let (p_sample, conditional) = measure_coupled_momentum(&data, &ancilla, rng_seed, cfg)?;
    let correction = correction_for(p_sample);
    let post_state = gate(GateKind::Z, cutoffs.0)?.apply(correction, &conditional)?;
    let p_error_after = error_probability(&post_state, &cfg.error)?;
    Ok(ECOutcome {
        p_sample,
        correction,
        post_state,
        p_error_before,
        p_error_after,
    })
}

/// Position correction: Fourier on both inputs, a momentum round, then the inverse Fourier.
pub fn ec_round_position(
    data: &FockVector,
    ancilla: &FockVector,
    rng_seed: u64,
    cutoffs: (usize, usize),
    cfg: &EcConfig,
) -> Result<ECOutcome> {
    let data = fit(data, cutoffs.0, "data")?;
    let ancilla = fit(ancilla, cutoffs.1, "ancilla")?;
    let fd = apply_logical(&data, LogicalGate::Fourier)?;
    let fa = apply_logical(&ancilla, LogicalGate::Fourier)?;
    let mut out = ec_round(&fd, &fa, rng_seed, cutoffs, cfg)?;
    out.post_state = apply_logical(&out.post_state, LogicalGate::Rotation(-FRAC_PI_2))?;
    out.p_error_before = error_probability(&data, &cfg.error)?;
    out.p_error_after = error_probability(&out.post_state, &cfg.error)?;
    Ok(out)
}

fn fit(state: &FockVector, cutoff: usize, what: &str) -> Result<FockVector> {
    let v = state.resized(cutoff)?;
    v.ensure_normalized(what)?;
    Ok(v)
}

fn to_matrix(op: &DenseOperator) -> DMatrix<Complex64> {
    let n = op.dim();
    DMatrix::from_fn(n, n, |i, j| op.get(i, j))
}

/// Joint state after `exp(i p1 q2)` as an `n1 x n2` matrix.
pub fn coupled_state(data: &FockVector, ancilla: &FockVector, cap: usize) -> Result<DMatrix<Complex64>> {
    let (n1, n2) = (data.cutoff(), ancilla.cutoff());
    let joint = tensor_with_cap(data, ancilla, cap)?;
    let psi = DMatrix::from_row_slice(n1, n2, joint.amplitudes());

    // X is generated by -p, Z by q
    let gp = gate(GateKind::X, n1)?;
    let gq = gate(GateKind::Z, n2)?;
    let vp = to_matrix(gp.eigenvectors());
    let vq = to_matrix(gq.eigenvectors());
    let mu: Vec<f64> = gp.eigenvalues().iter().map(|l| -l).collect();
    let nu = gq.eigenvalues();

    let mut c = vp.adjoint() * psi * vq.map(|z| z.conj());
    for i in 0..n1 {
        for j in 0..n2 {
            c[(i, j)] *= Complex64::from_polar(1.0, mu[i] * nu[j]);
        }
    }
    Ok(vp * c * vq.transpose())
}

/// Samples the mode-2 momentum of the coupled state and returns it with the
/// renormalized conditional state of mode 1.
fn measure_coupled_momentum(
    data: &FockVector,
    ancilla: &FockVector,
    rng_seed: u64,
    cfg: &EcConfig,
) -> Result<(f64, FockVector)> {
    if !(cfg.grid_spacing > 0.0) {
        return Err(Error::Configuration("grid_spacing must be positive".into()));
    }
    let psi = coupled_state(data, ancilla, cfg.tensor_cap)?;
    let (n1, n2) = (data.cutoff(), ancilla.cutoff());
    let extent = cfg.extent.unwrap_or_else(|| default_extent(n1.max(n2)));
    let grid = QuadratureGrid::new(extent, cfg.grid_spacing)?;

    let conditional_at = |p: f64, herm: &mut [f64]| -> Vec<Complex64> {
        hermite_functions(p, herm);
        let phi: Vec<Complex64> = herm
            .iter()
            .enumerate()
            .map(|(j, &h)| minus_i_pow(j) * h)
            .collect();
        (0..n1)
            .map(|i| (0..n2).map(|j| psi[(i, j)] * phi[j]).sum())
            .collect()
    };

    let density: Vec<f64> = grid
        .points()
        .par_iter()
        .map_init(
            || vec![0.0; n2],
            |herm, &p| conditional_at(p, herm).iter().map(|z| z.norm_sqr()).sum(),
        )
        .collect();
    let integral = grid.trapezoid(&density);
    if (integral - 1.0).abs() > 1e-4 {
        return Err(Error::GridResolution { integral });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let u: f64 = rng.gen::<f64>() * density.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut index = density.len() - 1;
    for (k, d) in density.iter().enumerate() {
        acc += d;
        if acc > u {
            index = k;
            break;
        }
    }
    let p = grid.points()[index];
    let mut herm = vec![0.0; n2];
    let cond = FockVector::new(conditional_at(p, &mut herm))?.normalized()?;
    Ok((p, cond))
}

fn minus_i_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Integrated mode-2 momentum density of the coupled state.
pub fn coupled_momentum_norm(data: &FockVector, ancilla: &FockVector, cfg: &EcConfig) -> Result<f64> {
    let psi = coupled_state(data, ancilla, cfg.tensor_cap)?;
    let (n1, n2) = (data.cutoff(), ancilla.cutoff());
    let extent = cfg.extent.unwrap_or_else(|| default_extent(n1.max(n2)));
    let grid = QuadratureGrid::new(extent, cfg.grid_spacing)?;
    let mut herm = vec![0.0; n2];
    let density: Vec<f64> = grid
        .points()
        .iter()
        .map(|&p| {
            hermite_functions(p, &mut herm);
            (0..n1)
                .map(|i| {
                    (0..n2)
                        .map(|j| psi[(i, j)] * minus_i_pow(j) * herm[j])
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum()
        })
        .collect();
    Ok(grid.trapezoid(&density))
}

/// Runs one round per seed; rows come back in seed order.
pub fn ec_batch(
    data: &FockVector,
    ancilla: &FockVector,
    seeds: &[u64],
    cutoffs: (usize, usize),
    cfg: &EcConfig,
) -> Result<Vec<(u64, ECOutcome)>> {
    seeds
        .par_iter()
        .map(|&s| ec_round(data, ancilla, s, cutoffs, cfg).map(|o| (s, o)))
        .collect()
}

/// CSV with columns `seed,p_sample,correction,p_err_before,p_err_after`.
pub fn ec_csv(rows: &[(u64, ECOutcome)]) -> String {
    let mut out = String::from("seed,p_sample,correction,p_err_before,p_err_after\n");
    for (seed, o) in rows {
        out.push_str(&format!(
            "{seed},{},{},{},{}\n",
            format_g12(o.p_sample),
            format_g12(o.correction),
            format_g12(o.p_error_before),
            format_g12(o.p_error_after)
        ));
    }
    out
}
