//! Approximate square-lattice GKP states, the twirled model and squeezing conversions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fock::{hermite_functions, FockVector};
use crate::quadrature::GaussLegendre;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Largest fraction of the norm that may be lost to truncation by default.
pub const DEFAULT_MAX_LEAKAGE: f64 = 0.005;

/// Upper limit for the number-state dimension used by cutoff searches.
pub const CUTOFF_SEARCH_CAP: usize = 1200;

/// Envelope weights below `exp(-ENVELOPE_LOG_CUT)` are dropped from the lattice sum.
const ENVELOPE_LOG_CUT: f64 = 41.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalLabel {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "H")]
    H,
}

impl fmt::Display for LogicalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogicalLabel::Zero => "0",
            LogicalLabel::One => "1",
            LogicalLabel::H => "H",
        })
    }
}

impl FromStr for LogicalLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(LogicalLabel::Zero),
            "1" => Ok(LogicalLabel::One),
            "H" | "h" => Ok(LogicalLabel::H),
            other => Err(Error::InvalidParameter(format!(
                "logical label must be 0, 1 or H (got `{other}`)"
            ))),
        }
    }
}

/// `-10 log10(delta^2)`.
pub fn squeezing_db(delta: f64) -> f64 {
    -20.0 * delta.log10()
}

pub fn delta_from_db(s_db: f64) -> f64 {
    10f64.powf(-s_db / 20.0)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1] (got {delta})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkpTargetSpec {
    pub mu: LogicalLabel,
    pub delta: f64,
    pub cutoff: usize,
    #[serde(default = "default_max_leakage")]
    pub max_leakage: f64,
}

fn default_max_leakage() -> f64 {
    DEFAULT_MAX_LEAKAGE
}

impl GkpTargetSpec {
    pub fn new(mu: LogicalLabel, delta: f64, cutoff: usize) -> Result<Self> {
        check_delta(delta)?;
        if cutoff == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self {
            mu,
            delta,
            cutoff,
            max_leakage: DEFAULT_MAX_LEAKAGE,
        })
    }

    pub fn with_max_leakage(mut self, max_leakage: f64) -> Self {
        self.max_leakage = max_leakage;
        self
    }
}

/// The analytic state as a normalized sum of Gaussian peaks of width `delta`:
/// `psi(x) = sum_j w_j g(x - x_j)` with `g` the unit-norm Gaussian.
#[derive(Debug, Clone)]
pub struct GkpWavefunction {
    delta: f64,
    centers: Vec<f64>,
    weights: Vec<Complex64>,
}

impl GkpWavefunction {
    pub fn new(mu: LogicalLabel, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let wf = match mu {
            LogicalLabel::Zero => Self::lattice(0, delta),
            LogicalLabel::One => Self::lattice(1, delta),
            LogicalLabel::H => {
                let zero = Self::lattice(0, delta);
                let one = Self::lattice(1, delta);
                let a = Complex64::from_polar(1.0, -PI / 8.0);
                let b = Complex64::from_polar(1.0, PI / 8.0);
                let mut centers = zero.centers;
                let mut weights: Vec<_> = zero.weights.iter().map(|w| w * a).collect();
                centers.extend(one.centers);
                weights.extend(one.weights.iter().map(|w| w * b));
                Self {
                    delta,
                    centers,
                    weights,
                }
            }
        };
        Ok(wf.normalized())
    }

    fn lattice(parity: i64, delta: f64) -> Self {
        let x_max = (2.0 * ENVELOPE_LOG_CUT).sqrt() / delta;
        let s_max = (x_max / (2.0 * SQRT_PI)).ceil() as i64 + 1;
        let mut centers = Vec::new();
        let mut weights = Vec::new();
        for s in -s_max..=s_max {
            let x = (2 * s + parity) as f64 * SQRT_PI;
            if x.abs() > x_max {
                continue;
            }
            centers.push(x);
            weights.push(Complex64::new((-0.5 * delta * delta * x * x).exp(), 0.0));
        }
        Self {
            delta,
            centers,
            weights,
        }
        .normalized()
    }

    fn norm_sqr(&self) -> f64 {
        let inv = 1.0 / (4.0 * self.delta * self.delta);
        let mut acc = 0.0;
        for (xj, wj) in self.centers.iter().zip(&self.weights) {
            for (xk, wk) in self.centers.iter().zip(&self.weights) {
                let d = xj - xk;
                acc += (wj.conj() * wk).re * (-d * d * inv).exp();
            }
        }
        acc
    }

    fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        for w in &mut self.weights {
            *w /= n;
        }
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn position(&self, x: f64) -> Complex64 {
        let d2 = self.delta * self.delta;
        let pref = (PI * d2).powf(-0.25);
        let reach = 12.0 * self.delta;
        let mut acc = Complex64::new(0.0, 0.0);
        for (xj, wj) in self.centers.iter().zip(&self.weights) {
            let u = x - xj;
            if u.abs() <= reach {
                acc += wj * (pref * (-0.5 * u * u / d2).exp());
            }
        }
        acc
    }

    /// Momentum wavefunction, `<p|psi> = (2 pi)^{-1/2} int e^{-ipx} psi(x) dx`.
    pub fn momentum(&self, p: f64) -> Complex64 {
        let d2 = self.delta * self.delta;
        let env = (d2 / PI).powf(0.25) * (-0.5 * p * p * d2).exp();
        let mut acc = Complex64::new(0.0, 0.0);
        for (xj, wj) in self.centers.iter().zip(&self.weights) {
            acc += wj * Complex64::from_polar(1.0, -p * xj);
        }
        acc * env
    }

    /// Number-basis coefficients `<n|psi>` for `n < dim`.
    pub fn fock_coefficients(&self, dim: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        if dim == 0 {
            return out;
        }
        // h_n with n < dim is negligible beyond its turning point plus ten
        let reach = (2.0 * dim as f64 + 1.0).sqrt() + 10.0;
        let h = (self.delta / 5.0).min(0.02);
        let half = (reach / h).ceil() as i64;
        let mut herm = vec![0.0; dim];
        for i in -half..=half {
            let x = i as f64 * h;
            let psi = self.position(x);
            if psi.norm_sqr() == 0.0 {
                continue;
            }
            hermite_functions(x, &mut herm);
            for (c, &hn) in out.iter_mut().zip(&herm) {
                *c += psi * hn;
            }
        }
        for c in &mut out {
            *c *= h;
        }
        out
    }
}

/// Number-basis coefficients of a target state, normalized against the
/// analytic state so that truncation loss is visible.
#[derive(Debug, Clone)]
pub struct FockProfile {
    mu: LogicalLabel,
    delta: f64,
    coefficients: Vec<Complex64>,
    partial: Vec<f64>,
}

impl FockProfile {
    pub fn compute(mu: LogicalLabel, delta: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let coefficients = GkpWavefunction::new(mu, delta)?.fock_coefficients(dim);
        let mut partial = Vec::with_capacity(dim + 1);
        let mut s = 0.0;
        partial.push(0.0);
        for c in &coefficients {
            s += c.norm_sqr();
            partial.push(s);
        }
        Ok(Self {
            mu,
            delta,
            coefficients,
            partial,
        })
    }

    pub fn mu(&self) -> LogicalLabel {
        self.mu
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Probability held by `|0> .. |m-1>`.
    pub fn retained(&self, m: usize) -> f64 {
        self.partial[m.min(self.dim())]
    }

    /// Norm lost when truncating at `m`.
    pub fn tail(&self, m: usize) -> f64 {
        (1.0 - self.retained(m)).max(0.0)
    }

    /// `F(target at m, target at m+1)`.
    pub fn successive_fidelity(&self, m: usize) -> f64 {
        let next = self.retained(m + 1);
        if next == 0.0 {
            return 1.0;
        }
        self.retained(m) / next
    }

    /// Renormalized truncation to dimension `m`.
    pub fn truncated(&self, m: usize) -> Result<FockVector> {
        if m == 0 || m > self.dim() {
            return Err(Error::InvalidParameter(format!(
                "truncation {m} outside 1..={}",
                self.dim()
            )));
        }
        FockVector::new(self.coefficients[..m].to_vec())?.normalized()
    }

    /// Smallest `m` whose tail is at most `max_tail`.
    pub fn smallest_cutoff_with_tail(&self, max_tail: f64) -> Option<usize> {
        (1..=self.dim()).find(|&m| self.tail(m) <= max_tail)
    }
}

/// Target state together with the norm lost to truncation.
#[derive(Debug, Clone)]
pub struct TargetState {
    pub state: FockVector,
    pub leakage: f64,
}

/// Smallest cutoff keeping the truncated norm within `max_leakage`.
pub fn required_cutoff(mu: LogicalLabel, delta: f64, max_leakage: f64) -> Result<usize> {
    let mut dim = 64;
    loop {
        let profile = FockProfile::compute(mu, delta, dim)?;
        if let Some(m) = profile.smallest_cutoff_with_tail(max_leakage) {
            return Ok(m);
        }
        if dim >= CUTOFF_SEARCH_CAP {
            return Err(Error::CutoffSearchExhausted {
                delta,
                cap: CUTOFF_SEARCH_CAP,
            });
        }
        dim = (dim * 2).min(CUTOFF_SEARCH_CAP);
    }
}

pub fn build_target(spec: &GkpTargetSpec) -> Result<TargetState> {
    check_delta(spec.delta)?;
    let profile = FockProfile::compute(spec.mu, spec.delta, spec.cutoff)?;
    let leakage = profile.tail(spec.cutoff);
    if leakage > spec.max_leakage {
        let required = required_cutoff(spec.mu, spec.delta, spec.max_leakage)
            .unwrap_or(CUTOFF_SEARCH_CAP);
        return Err(Error::CutoffTooSmall {
            cutoff: spec.cutoff,
            delta: spec.delta,
            leakage,
            allowed: spec.max_leakage,
            required,
        });
    }
    Ok(TargetState {
        state: profile.truncated(spec.cutoff)?,
        leakage,
    })
}

/// The normalized approximate GKP state truncated at `spec.cutoff`.
pub fn target_state(spec: &GkpTargetSpec) -> Result<FockVector> {
    build_target(spec).map(|t| t.state)
}

/// Number-basis coefficients of the squeezed vacuum whose position width is `delta`.
pub fn squeezed_vacuum(delta: f64, cutoff: usize) -> Result<FockVector> {
    check_delta(delta)?;
    let rho = -delta.ln();
    let t = -rho.tanh();
    let mut amps = vec![Complex64::new(0.0, 0.0); cutoff.max(1)];
    let mut c = 1.0 / rho.cosh().sqrt();
    for m in 0..cutoff.div_ceil(2) {
        amps[2 * m] = Complex64::new(c, 0.0);
        let mf = m as f64;
        // c_{2m+2} / c_{2m} = t sqrt((2m+1)(2m+2)) / (2 (m+1))
        c *= t * ((2.0 * mf + 1.0) * (2.0 * mf + 2.0)).sqrt() / (2.0 * (mf + 1.0));
    }
    FockVector::new(amps)
}

/// Infinite-energy periodic state with Gaussian peaks of width `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwirledModel {
    pub delta: f64,
}

impl TwirledModel {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive (got {delta})"
            )));
        }
        Ok(Self { delta })
    }

    /// `1 - erf(sqrt(pi) / (6 delta))^2`.
    pub fn error_probability(&self) -> f64 {
        let e = erf(SQRT_PI / (6.0 * self.delta));
        1.0 - e * e
    }

    /// Same quantity from quadrature of the periodic density over one cell.
    pub fn error_probability_quadrature(&self) -> f64 {
        let rule = GaussLegendre::new(48);
        let sigma2 = 0.5 * self.delta * self.delta;
        let norm = 1.0 / (2.0 * PI * sigma2).sqrt();
        let period = 2.0 * SQRT_PI;
        let images = (8.0 * self.delta / period).ceil() as i64 + 1;
        let density = |u: f64| -> f64 {
            (-images..=images)
                .map(|s| {
                    let d = u - s as f64 * period;
                    norm * (-d * d / (2.0 * sigma2)).exp()
                })
                .sum()
        };
        let a = SQRT_PI / 6.0;
        let inside = rule.integrate_composite(-a, a, 8, density);
        let cell = rule.integrate_composite(-SQRT_PI, SQRT_PI, 48, density);
        let p = inside / cell;
        1.0 - p * p
    }
}

pub fn twirled_error_probability(model: &TwirledModel) -> f64 {
    model.error_probability()
}

/// Interchange format for target states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub delta: f64,
    pub mu: LogicalLabel,
    pub cutoff: usize,
    pub amplitudes: FockVector,
}

impl StateFile {
    pub fn new(spec: &GkpTargetSpec, state: FockVector) -> Self {
        Self {
            delta: spec.delta,
            mu: spec.mu,
            cutoff: state.cutoff(),
            amplitudes: state,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self =
            serde_json::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        if file.amplitudes.cutoff() != file.cutoff {
            return Err(Error::DimensionMismatch {
                expected: file.cutoff,
                actual: file.amplitudes.cutoff(),
            });
        }
        Ok(file)
    }
}
