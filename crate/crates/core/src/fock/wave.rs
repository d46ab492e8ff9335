//! Position and momentum wavefunctions of Fock-basis states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::FockVector;
use crate::error::{Error, Result};

const PI_QUARTER_LN: f64 = 0.286_182_471_462_350_4; // ln(pi) / 4
const RESCALE_ABOVE: f64 = 1e150;

/// Uniform grid symmetric about zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    points: Vec<f64>,
    spacing: f64,
    extent: f64,
}

impl QuadratureGrid {
    /// Grid on `[-extent, extent]` with spacing at most `max_spacing`.
    pub fn new(extent: f64, max_spacing: f64) -> Result<Self> {
        if !(extent > 0.0 && extent.is_finite()) || !(max_spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid needs extent > 0 and spacing > 0 (got {extent}, {max_spacing})"
            )));
        }
        let half = (extent / max_spacing).ceil() as usize;
        let spacing = extent / half as f64;
        let points = (0..=2 * half)
            .map(|i| (i as f64 - half as f64) * spacing)
            .collect();
        Ok(Self {
            points,
            spacing,
            extent,
        })
    }

    /// Default grid for states truncated at `cutoff`: extent `sqrt(2 cutoff) + 5`, spacing 0.02.
    pub fn for_cutoff(cutoff: usize) -> Result<Self> {
        Self::new(default_extent(cutoff), 0.02)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Trapezoid rule over the grid.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        let n = values.len();
        if n < 2 {
            return 0.0;
        }
        let inner: f64 = values[1..n - 1].iter().sum();
        self.spacing * (inner + 0.5 * (values[0] + values[n - 1]))
    }
}

/// Classical turning point of `|cutoff>` plus a margin for the Gaussian tail.
pub fn default_extent(cutoff: usize) -> f64 {
    (2.0 * cutoff as f64).sqrt() + 5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Position,
    Momentum,
}

/// Orthonormal Hermite functions `h_0(x) .. h_{len-1}(x)` written into `out`.
///
/// Runs the normalized three-term recurrence on a rescaled copy and applies
/// `exp(-x^2/2) pi^{-1/4}` at the end, so neither large `n` nor large `|x|`
/// overflows; values that are truly below the double range come out as zero.
pub fn hermite_functions(x: f64, out: &mut [f64]) {
    let len = out.len();
    if len == 0 {
        return;
    }
    let base = -0.5 * x * x - PI_QUARTER_LN;
    let mut log_scale = 0.0f64;
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    out[0] = base.exp();
    for n in 1..len {
        let nf = n as f64;
        let next = x * (2.0 / nf).sqrt() * cur - ((nf - 1.0) / nf).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            prev /= RESCALE_ABOVE;
            cur /= RESCALE_ABOVE;
            log_scale += RESCALE_ABOVE.ln();
        }
        out[n] = cur * (base + log_scale).exp();
    }
}

/// Single-point wavefunction; `hermite` is scratch of length `cutoff`.
pub fn wavefunction_at(state: &FockVector, x: f64, basis: Basis, hermite: &mut [f64]) -> Complex64 {
    let amps = state.amplitudes();
    let h = &mut hermite[..amps.len()];
    hermite_functions(x, h);
    match basis {
        Basis::Position => amps.iter().zip(h.iter()).map(|(a, &hn)| a * hn).sum(),
        Basis::Momentum => {
            // <p|n> = (-i)^n h_n(p)
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, (a, &hn)) in amps.iter().zip(h.iter()).enumerate() {
                let t = a * hn;
                acc += match n % 4 {
                    0 => t,
                    1 => Complex64::new(t.im, -t.re),
                    2 => -t,
                    _ => Complex64::new(-t.im, t.re),
                };
            }
            acc
        }
    }
}

/// `psi(x) = sum_n amplitude_n h_n(x)` on every grid point.
pub fn wavefunction(state: &FockVector, grid: &QuadratureGrid, basis: Basis) -> Vec<Complex64> {
    let mut scratch = vec![0.0; state.cutoff()];
    grid.points()
        .iter()
        .map(|&x| wavefunction_at(state, x, basis, &mut scratch))
        .collect()
}

/// `|psi(x)|^2` on every grid point.
pub fn density(state: &FockVector, grid: &QuadratureGrid, basis: Basis) -> Vec<f64> {
    wavefunction(state, grid, basis)
        .into_iter()
        .map(|z| z.norm_sqr())
        .collect()
}
