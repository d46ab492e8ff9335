//! Fidelity, overlaps with shifted ideal grid states and the shift-error probability.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{default_extent, wavefunction_at, Basis, FockVector};
use crate::gkp::squeezing_db;
use crate::quadrature::GaussLegendre;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Largest change allowed when the node count is doubled.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorProbabilityConfig {
    /// Half-width of the correctable square in both shift coordinates.
    pub bound: f64,
    /// Gauss-Legendre nodes per axis for the coarse pass.
    pub quad_nodes: usize,
    /// Lattice terms `|s| <= s_max` in the overlap sum; `None` derives it from the extent.
    pub lattice_halfwidth: Option<usize>,
    /// Position extent the state is assumed to live in; `None` uses the default for its cutoff.
    pub extent: Option<f64>,
}

impl Default for ErrorProbabilityConfig {
    fn default() -> Self {
        Self {
            bound: SQRT_PI / 6.0,
            quad_nodes: 64,
            lattice_halfwidth: None,
            extent: None,
        }
    }
}

impl ErrorProbabilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bound > 0.0 && self.bound <= SQRT_PI / 2.0) {
            return Err(Error::Configuration(format!(
                "bound must lie in (0, sqrt(pi)/2] (got {})",
                self.bound
            )));
        }
        if self.quad_nodes < 16 {
            return Err(Error::Configuration(format!(
                "quad_nodes must be at least 16 (got {})",
                self.quad_nodes
            )));
        }
        Ok(())
    }

    fn extent_for(&self, cutoff: usize) -> f64 {
        self.extent.unwrap_or_else(|| default_extent(cutoff))
    }

    /// Number of lattice terms on each side needed to cover the extent.
    pub fn lattice_terms(&self, cutoff: usize) -> Result<usize> {
        let extent = self.extent_for(cutoff);
        let needed = ((extent + SQRT_PI) / (2.0 * SQRT_PI)).ceil() as usize;
        match self.lattice_halfwidth {
            None => Ok(needed),
            Some(s) if s >= needed => Ok(s),
            Some(s) => Err(Error::Configuration(format!(
                "lattice half-width {s} leaves part of the extent {extent:.3} uncovered; \
                 need at least {needed}"
            ))),
        }
    }
}

/// `|<a|b>|^2`; the shorter vector is zero-padded.
pub fn fidelity(a: &FockVector, b: &FockVector) -> f64 {
    a.inner(b).norm_sqr()
}

/// Reduce `(u, v)` to the cell `(-sqrt(pi), sqrt(pi)] x (-sqrt(pi)/2, sqrt(pi)/2]`,
/// returning the reduced point and the phase picked up along the way.
pub fn fold_to_cell(u: f64, v: f64) -> (f64, f64, Complex64) {
    let period_u = 2.0 * SQRT_PI;
    let ku = ((u + SQRT_PI) / period_u).ceil() - 1.0;
    let mut uu = u - ku * period_u;
    let mut ku = ku;
    if uu <= -SQRT_PI {
        uu += period_u;
        ku -= 1.0;
    }
    let kv = ((v + SQRT_PI / 2.0) / SQRT_PI).ceil() - 1.0;
    let mut vv = v - kv * SQRT_PI;
    if vv <= -SQRT_PI / 2.0 {
        vv += SQRT_PI;
    }
    // <u + 2 sqrt(pi) k, v| = e^{-i 2 sqrt(pi) k v} <u, v|
    let phase = Complex64::from_polar(1.0, -period_u * ku * vv);
    (uu, vv, phase)
}

/// Position wavefunction sampled at the lattice `2 s sqrt(pi) + u`, `|s| <= s_max`.
struct LatticeSamples {
    values: Vec<Complex64>,
    s_max: i64,
}

impl LatticeSamples {
    fn new(state: &FockVector, u: f64, s_max: usize, scratch: &mut [f64]) -> Self {
        let s_max = s_max as i64;
        let values = (-s_max..=s_max)
            .map(|s| {
                let x = 2.0 * SQRT_PI * s as f64 + u;
                wavefunction_at(state, x, Basis::Position, scratch)
            })
            .collect();
        Self { values, s_max }
    }

    fn overlap(&self, v: f64) -> Complex64 {
        let pref = PI.powf(-0.25);
        let step = Complex64::from_polar(1.0, 2.0 * SQRT_PI * v);
        let mut phase = Complex64::from_polar(1.0, -2.0 * SQRT_PI * v * self.s_max as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for psi in &self.values {
            acc += phase * psi;
            phase *= step;
        }
        acc * pref
    }

    fn marginal(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `<u, v|psi> = pi^{-1/4} sum_s e^{i 2 s sqrt(pi) v} psi(2 s sqrt(pi) + u)`.
pub fn zak_overlap(state: &FockVector, u: f64, v: f64, cfg: &ErrorProbabilityConfig) -> Result<Complex64> {
    let s_max = cfg.lattice_terms(state.cutoff())?;
    let (uu, vv, phase) = fold_to_cell(u, v);
    let mut scratch = vec![0.0; state.cutoff()];
    Ok(phase * LatticeSamples::new(state, uu, s_max, &mut scratch).overlap(vv))
}

/// `int dv |<u, v|psi>|^2` over a full period of `v`, i.e. `sum_s |psi(u + 2 s sqrt(pi))|^2`.
pub fn shift_marginal(state: &FockVector, u: f64, cfg: &ErrorProbabilityConfig) -> Result<f64> {
    let s_max = cfg.lattice_terms(state.cutoff())?;
    let (uu, _, _) = fold_to_cell(u, 0.0);
    let mut scratch = vec![0.0; state.cutoff()];
    Ok(LatticeSamples::new(state, uu, s_max, &mut scratch).marginal())
}

/// `int int |<u, v|psi>|^2` over `[u0, u1] x [v0, v1]` (inside one cell) with a
/// composite Gauss-Legendre rule of `panels` sub-intervals per axis.
pub fn overlap_integral(
    state: &FockVector,
    (u0, u1): (f64, f64),
    (v0, v1): (f64, f64),
    nodes: usize,
    panels: usize,
    cfg: &ErrorProbabilityConfig,
) -> Result<f64> {
    let s_max = cfg.lattice_terms(state.cutoff())?;
    let rule = GaussLegendre::new(nodes);
    let (us, uw) = panel_nodes(&rule, u0, u1, panels);
    let (vs, vw) = panel_nodes(&rule, v0, v1, panels);
    let rows: Vec<f64> = us
        .par_iter()
        .map_init(
            || vec![0.0; state.cutoff()],
            |scratch, &u| {
                let samples = LatticeSamples::new(state, u, s_max, scratch);
                vs.iter()
                    .zip(&vw)
                    .map(|(&v, &w)| w * samples.overlap(v).norm_sqr())
                    .sum::<f64>()
            },
        )
        .collect();
    Ok(rows.iter().zip(&uw).map(|(r, w)| r * w).sum())
}

fn panel_nodes(rule: &GaussLegendre, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * rule.len());
    let mut ws = Vec::with_capacity(panels * rule.len());
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let (x, w) = rule.on_interval(lo, lo + h);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

/// Integral of `|<u, v|psi>|^2` over the whole cell; 1 for any state supported inside the extent.
pub fn cell_completeness(state: &FockVector, cfg: &ErrorProbabilityConfig) -> Result<f64> {
    overlap_integral(
        state,
        (-SQRT_PI, SQRT_PI),
        (-SQRT_PI / 2.0, SQRT_PI / 2.0),
        cfg.quad_nodes,
        8,
        cfg,
    )
}

/// Probability that the shift error falls outside the correctable square.
pub fn error_probability(state: &FockVector, cfg: &ErrorProbabilityConfig) -> Result<f64> {
    error_probability_about(state, (0.0, 0.0), cfg)
}

/// [`error_probability`] with the shifts measured from `(u0, v0)` instead of the
/// origin. `(sqrt(pi), 0)` scores a state against the logical one.
pub fn error_probability_about(
    state: &FockVector,
    (u0, v0): (f64, f64),
    cfg: &ErrorProbabilityConfig,
) -> Result<f64> {
    cfg.validate()?;
    state.ensure_normalized("error_probability input")?;
    if !(u0.is_finite() && v0.is_finite()) {
        return Err(Error::InvalidParameter("reference shift must be finite".into()));
    }
    let a = cfg.bound;
    let (u, v) = ((u0 - a, u0 + a), (v0 - a, v0 + a));
    let coarse = overlap_integral(state, u, v, cfg.quad_nodes, 1, cfg)?;
    let fine = overlap_integral(state, u, v, 2 * cfg.quad_nodes, 1, cfg)?;
    if (coarse - fine).abs() >= CONVERGENCE_TOLERANCE {
        return Err(Error::NotConverged {
            coarse_nodes: cfg.quad_nodes,
            fine_nodes: 2 * cfg.quad_nodes,
            coarse,
            fine,
        });
    }
    Ok((1.0 - fine).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub fidelity: f64,
    pub p_error: f64,
    pub squeezing_db: f64,
    pub leakage: f64,
    pub delta: f64,
}

impl QualityReport {
    /// Scores `state` against `target`; `leakage` is supplied by the caller.
    pub fn evaluate(
        state: &FockVector,
        target: &FockVector,
        delta: f64,
        leakage: f64,
        cfg: &ErrorProbabilityConfig,
    ) -> Result<Self> {
        Ok(Self {
            fidelity: fidelity(state, target).min(1.0),
            p_error: error_probability(state, cfg)?,
            squeezing_db: squeezing_db(delta),
            leakage,
            delta,
        })
    }

    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gkp::{target_state, GkpTargetSpec, LogicalLabel, TwirledModel};

    fn target(mu: LogicalLabel, delta: f64, cutoff: usize) -> FockVector {
        target_state(&GkpTargetSpec::new(mu, delta, cutoff).unwrap()).unwrap()
    }

    #[test]
    fn fidelity_basics() {
        let a = FockVector::number(0, 4).unwrap();
        let b = FockVector::number(1, 4).unwrap();
        assert_eq!(fidelity(&a, &b), 0.0);
        assert!((fidelity(&a, &a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn folding_lands_in_cell_and_preserves_overlap() {
        let state = target(LogicalLabel::Zero, 0.4, 40);
        let cfg = ErrorProbabilityConfig::default();
        for (u, v) in [(0.3, 0.2), (-1.0, 0.7), (1.5, -0.5)] {
            let base = zak_overlap(&state, u, v, &cfg).unwrap();
            for (ku, kv) in [(1.0, 0.0), (-1.0, 2.0), (2.0, -1.0)] {
                let uu = u + 2.0 * SQRT_PI * ku;
                let vv = v + SQRT_PI * kv;
                let (fu, fv, _) = fold_to_cell(uu, vv);
                assert!(fu > -SQRT_PI && fu <= SQRT_PI);
                assert!(fv > -SQRT_PI / 2.0 && fv <= SQRT_PI / 2.0);
                let shifted = zak_overlap(&state, uu, vv, &cfg).unwrap();
                let expected = base * Complex64::from_polar(1.0, -2.0 * SQRT_PI * ku * v);
                assert!((shifted - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_overlap_at_origin_is_real_positive() {
        let z = zak_overlap(&FockVector::vacuum(10).unwrap(), 0.0, 0.0, &Default::default()).unwrap();
        assert!(z.re > 0.0 && z.im.abs() < 1e-15);
    }

    #[test]
    fn completeness_over_cell() {
        let cfg = ErrorProbabilityConfig::default();
        for state in [
            FockVector::vacuum(20).unwrap(),
            target(LogicalLabel::H, 0.3, 80),
            FockVector::number(37, 150).unwrap(),
        ] {
            let c = cell_completeness(&state, &cfg).unwrap();
            assert!((c - 1.0).abs() < 1e-4, "completeness {c}");
        }
    }

    #[test]
    fn peaked_shift_distribution() {
        let state = target(LogicalLabel::Zero, 0.15, 140);
        let cfg = ErrorProbabilityConfig::default();
        let z0 = zak_overlap(&state, 0.0, 0.0, &cfg).unwrap().norm_sqr();
        let z1 = zak_overlap(&state, SQRT_PI / 3.0, 0.0, &cfg).unwrap().norm_sqr();
        assert!(z0 > 100.0 * z1);
    }

    #[test]
    fn wrong_logical_state_is_mostly_error() {
        let state = target(LogicalLabel::One, 0.15, 140);
        let p = error_probability(&state, &Default::default()).unwrap();
        assert!(p > 0.9, "{p}");
    }

    #[test]
    fn logical_one_scored_about_its_own_lattice() {
        let cfg = ErrorProbabilityConfig::default();
        let zero = error_probability(&target(LogicalLabel::Zero, 0.25, 80), &cfg).unwrap();
        let one = target(LogicalLabel::One, 0.25, 80);
        let about = error_probability_about(&one, (SQRT_PI, 0.0), &cfg).unwrap();
        assert!((about - zero).abs() < 0.01, "{about} vs {zero}");
        assert_eq!(
            error_probability_about(&one, (0.0, 0.0), &cfg).unwrap(),
            error_probability(&one, &cfg).unwrap()
        );
    }

    #[test]
    fn target_matches_twirled_model_near_threshold() {
        let state = target(LogicalLabel::Zero, 0.32, 60);
        let p = error_probability(&state, &Default::default()).unwrap();
        assert!((p - 0.347).abs() < 0.005, "{p}");
        let tw = TwirledModel::new(0.32).unwrap().error_probability();
        assert!((p - tw).abs() < 0.01);
    }

    #[test]
    fn global_phase_invariance() {
        let state = target(LogicalLabel::H, 0.3, 80);
        let rotated = state.scaled(Complex64::from_polar(1.0, 1.234));
        let cfg = ErrorProbabilityConfig::default();
        let a = error_probability(&state, &cfg).unwrap();
        let b = error_probability(&rotated, &cfg).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn v_integral_matches_marginal() {
        let state = target(LogicalLabel::Zero, 0.25, 100);
        let cfg = ErrorProbabilityConfig::default();
        let rule = GaussLegendre::new(64);
        for u in [0.0, 0.2, -0.7] {
            let num = rule.integrate_composite(-SQRT_PI / 2.0, SQRT_PI / 2.0, 4, |v| {
                zak_overlap(&state, u, v, &cfg).unwrap().norm_sqr()
            });
            let marg = shift_marginal(&state, u, &cfg).unwrap();
            assert!((num - marg).abs() < 1e-4 * marg.max(1e-3), "u={u}: {num} vs {marg}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let state = FockVector::vacuum(30).unwrap();
        let mut cfg = ErrorProbabilityConfig { quad_nodes: 8, ..Default::default() };
        assert!(matches!(error_probability(&state, &cfg), Err(Error::Configuration(_))));
        cfg.quad_nodes = 64;
        cfg.bound = 2.0;
        assert!(error_probability(&state, &cfg).is_err());
        cfg.bound = SQRT_PI / 6.0;
        cfg.lattice_halfwidth = Some(1);
        assert!(matches!(zak_overlap(&state, 0.0, 0.0, &cfg), Err(Error::Configuration(_))));
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let state = FockVector::vacuum(5).unwrap().scaled(Complex64::new(2.0, 0.0));
        assert!(error_probability(&state, &Default::default()).is_err());
    }
}
