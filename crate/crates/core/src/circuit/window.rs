//! The block circuit restricted to a fixed Fock window.
//!
//! Each gate is represented by its exact matrix elements between the lowest
//! `n` number states, so amplitude a gate sends above the window is dropped
//! rather than folded back by a truncated generator. The map is a contraction
//! and the fidelity it reports cannot be inflated by boundary effects.

use num_complex::Complex64;

use super::{check_theta, BLOCK_GATES};
use crate::error::{Error, Result};
use crate::fock::{FockVector, GateKind};

/// Rows kept beyond the window so that `G U` is exact on it.
const EXTRA_ROWS: usize = 2;

/// `<m|D(alpha)|n>` for real `alpha`, `m < rows`, `n < cols`, row-major.
pub fn displacement_matrix(alpha: f64, rows: usize, cols: usize) -> Vec<f64> {
    let sq = sqrt_table(rows.max(cols));
    let mut d = vec![0.0; rows * cols];
    if rows == 0 || cols == 0 {
        return d;
    }
    d[0] = (-0.5 * alpha * alpha).exp();
    for m in 1..rows {
        d[m * cols] = alpha / sq[m] * d[(m - 1) * cols];
    }
    // D a^dag = (a^dag - alpha) D
    for n in 1..cols {
        let inv = 1.0 / sq[n];
        d[n] = -alpha * d[n - 1] * inv;
        for m in 1..rows {
            d[m * cols + n] = (sq[m] * d[(m - 1) * cols + n - 1] - alpha * d[m * cols + n - 1]) * inv;
        }
    }
    d
}

/// `<m|S(r)|n>` with `S(r) = exp(r (a^2 - a^dag^2) / 2)`, row-major.
pub fn squeeze_matrix(r: f64, rows: usize, cols: usize) -> Vec<f64> {
    let sq = sqrt_table(rows.max(cols) + 1);
    let mut s = vec![0.0; rows * cols];
    if rows == 0 || cols == 0 {
        return s;
    }
    let (ch, sh, t) = (r.cosh(), r.sinh(), r.tanh());
    s[0] = 1.0 / ch.sqrt();
    for m in (2..rows).step_by(2) {
        s[m * cols] = -t * sq[m - 1] / sq[m] * s[(m - 2) * cols];
    }
    for n in (2..cols).step_by(2) {
        s[n] = t * sq[n - 1] / sq[n] * s[n - 2];
    }
    // S a = (a cosh r + a^dag sinh r) S
    for n in 1..cols {
        for m in 0..rows - 1 {
            let below = if m > 0 { s[(m - 1) * cols + n] } else { 0.0 };
            s[(m + 1) * cols + n] = (sq[n] * s[m * cols + n - 1] - sh * sq[m] * below) / (ch * sq[m + 1]);
        }
    }
    s
}

fn sqrt_table(n: usize) -> Vec<f64> {
    (0..=n).map(|k| (k as f64).sqrt()).collect()
}

/// Split-complex vector.
#[derive(Debug, Clone, Default)]
struct Cvec {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Cvec {
    fn zeros(n: usize) -> Self {
        Self { re: vec![0.0; n], im: vec![0.0; n] }
    }

    fn get(&self, k: usize) -> Complex64 {
        Complex64::new(self.re[k], self.im[k])
    }

    fn set(&mut self, k: usize, z: Complex64) {
        self.re[k] = z.re;
        self.im[k] = z.im;
    }

    /// Multiplies entry `k` by `i^(sign * k)`.
    fn quarter_phase(&mut self, sign: i32) {
        for k in 0..self.re.len() {
            let (a, b) = (self.re[k], self.im[k]);
            let (a, b) = match (sign * k as i32).rem_euclid(4) {
                0 => (a, b),
                1 => (-b, a),
                2 => (-a, -b),
                _ => (b, -a),
            };
            self.re[k] = a;
            self.im[k] = b;
        }
    }
}

/// `y = M x` for a row-major `rows x cols` real matrix.
fn matvec(m: &[f64], rows: usize, cols: usize, x: &Cvec, y: &mut Cvec) {
    for i in 0..rows {
        let row = &m[i * cols..(i + 1) * cols];
        let (mut a, mut b) = (0.0, 0.0);
        for ((w, xr), xi) in row.iter().zip(&x.re[..cols]).zip(&x.im[..cols]) {
            a += w * xr;
            b += w * xi;
        }
        y.re[i] = a;
        y.im[i] = b;
    }
}

/// `y = M[..rows, ..]^T x`.
fn matvec_t(m: &[f64], rows: usize, cols: usize, x: &Cvec, y: &mut Cvec) {
    y.re[..cols].fill(0.0);
    y.im[..cols].fill(0.0);
    for i in 0..rows {
        let row = &m[i * cols..(i + 1) * cols];
        let (xr, xi) = (x.re[i], x.im[i]);
        for (j, w) in row.iter().enumerate() {
            y.re[j] += w * xr;
            y.im[j] += w * xi;
        }
    }
}

/// Buffers reused across gradient evaluations.
#[derive(Debug, Clone, Default)]
pub struct WindowWorkspace {
    mats: Vec<Vec<f64>>,
    phi: Vec<Cvec>,
    psi: Cvec,
    chi: Cvec,
    tmp: Cvec,
}

/// Block circuit on the lowest `cutoff` Fock levels.
#[derive(Debug, Clone)]
pub struct WindowModel {
    n: usize,
    sq: Vec<f64>,
}

impl WindowModel {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidDimension(cutoff));
        }
        Ok(Self {
            n: cutoff,
            sq: sqrt_table(cutoff + EXTRA_ROWS + 1),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    fn ext(&self) -> usize {
        self.n + EXTRA_ROWS
    }

    fn build(&self, kind: GateKind, theta: f64, mat: &mut Vec<f64>) {
        let (rows, cols) = (self.ext(), self.n);
        *mat = match kind {
            GateKind::X | GateKind::Z => displacement_matrix(theta / std::f64::consts::SQRT_2, rows, cols),
            GateKind::S => squeeze_matrix(theta, rows, cols),
            _ => Vec::new(),
        };
    }

    /// `phi = U psi` on `ext` rows.
    fn apply(&self, kind: GateKind, theta: f64, mat: &[f64], psi: &Cvec, phi: &mut Cvec, tmp: &mut Cvec) {
        let (rows, cols) = (self.ext(), self.n);
        match kind {
            GateKind::X | GateKind::S => matvec(mat, rows, cols, psi, phi),
            GateKind::Z => {
                // D(i b) = i^{m-n} D(b)
                tmp.re[..cols].copy_from_slice(&psi.re[..cols]);
                tmp.im[..cols].copy_from_slice(&psi.im[..cols]);
                tmp.quarter_phase(-1);
                matvec(mat, rows, cols, tmp, phi);
                phi.quarter_phase(1);
            }
            GateKind::K => {
                for m in 0..cols {
                    let f = (m * m) as f64;
                    phi.set(m, psi.get(m) * Complex64::from_polar(1.0, theta * f));
                }
                for m in cols..rows {
                    phi.set(m, Complex64::new(0.0, 0.0));
                }
            }
            _ => unreachable!("block gates are X, Z, K, S"),
        }
    }

    /// `out = U^dag chi` restricted to the window.
    fn apply_adjoint(&self, kind: GateKind, theta: f64, mat: &[f64], chi: &Cvec, out: &mut Cvec) {
        let n = self.n;
        match kind {
            GateKind::X | GateKind::S => matvec_t(mat, n, n, chi, out),
            GateKind::Z => {
                let mut c = chi.clone();
                c.quarter_phase(-1);
                matvec_t(mat, n, n, &c, out);
                out.quarter_phase(1);
            }
            GateKind::K => {
                for m in 0..n {
                    let f = (m * m) as f64;
                    out.set(m, chi.get(m) * Complex64::from_polar(1.0, -theta * f));
                }
            }
            _ => unreachable!("block gates are X, Z, K, S"),
        }
    }

    /// `(G phi)[m]` for a window row `m`.
    fn generator_row(&self, kind: GateKind, phi: &Cvec, m: usize) -> Complex64 {
        let sq = &self.sq;
        let up = |k: usize| phi.get(m + k);
        let down = |k: usize| if m >= k { phi.get(m - k) } else { Complex64::new(0.0, 0.0) };
        let i = Complex64::new(0.0, 1.0);
        match kind {
            // -p
            GateKind::X => i * (up(1) * sq[m + 1] - down(1) * sq[m]) / std::f64::consts::SQRT_2,
            GateKind::Z => (up(1) * sq[m + 1] + down(1) * sq[m]) / std::f64::consts::SQRT_2,
            GateKind::K => phi.get(m) * (m * m) as f64,
            GateKind::S => {
                let lower = if m >= 2 { down(2) * (sq[m] * sq[m - 1]) } else { Complex64::new(0.0, 0.0) };
                -i * (up(2) * (sq[m + 1] * sq[m + 2]) - lower) * 0.5
            }
            _ => unreachable!("block gates are X, Z, K, S"),
        }
    }

    fn prepare(&self, ws: &mut WindowWorkspace, gates: usize) {
        let ext = self.ext();
        if ws.phi.len() < gates || ws.psi.re.len() != ext {
            ws.mats = vec![Vec::new(); gates];
            ws.phi = vec![Cvec::zeros(ext); gates];
            ws.psi = Cvec::zeros(ext);
            ws.chi = Cvec::zeros(ext);
            ws.tmp = Cvec::zeros(ext);
        }
    }

    /// Output of the circuit on the window; its norm is the probability kept inside.
    pub fn forward(&self, theta: &[f64]) -> Result<FockVector> {
        check_theta(theta)?;
        let mut ws = WindowWorkspace::default();
        self.prepare(&mut ws, 1);
        let ext = self.ext();
        let mut psi = Cvec::zeros(ext);
        psi.re[0] = 1.0;
        let mut phi = Cvec::zeros(ext);
        let mut mat = Vec::new();
        for (j, &t) in theta.iter().enumerate() {
            let kind = BLOCK_GATES[j % 4];
            self.build(kind, t, &mut mat);
            self.apply(kind, t, &mat, &psi, &mut phi, &mut ws.tmp);
            std::mem::swap(&mut psi, &mut phi);
        }
        FockVector::new((0..self.n).map(|k| psi.get(k)).collect())
    }

    /// `|<target|psi>|^2` on the window and its gradient.
    pub fn fidelity_and_gradient(
        &self,
        theta: &[f64],
        target: &FockVector,
        ws: &mut WindowWorkspace,
        grad: &mut [f64],
    ) -> Result<f64> {
        check_theta(theta)?;
        target.check_dim(self.n)?;
        if grad.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                actual: grad.len(),
            });
        }
        let n = self.n;
        self.prepare(ws, theta.len());
        let WindowWorkspace { mats, phi, psi, chi, tmp } = ws;

        psi.re.fill(0.0);
        psi.im.fill(0.0);
        psi.re[0] = 1.0;
        for (j, &t) in theta.iter().enumerate() {
            let kind = BLOCK_GATES[j % 4];
            self.build(kind, t, &mut mats[j]);
            self.apply(kind, t, &mats[j], psi, &mut phi[j], tmp);
            psi.re[..n].copy_from_slice(&phi[j].re[..n]);
            psi.im[..n].copy_from_slice(&phi[j].im[..n]);
        }
        let amp: Complex64 = target
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(k, t)| t.conj() * psi.get(k))
            .sum();

        for (k, t) in target.amplitudes().iter().enumerate() {
            chi.set(k, *t);
        }
        let i = Complex64::new(0.0, 1.0);
        for j in (0..theta.len()).rev() {
            let kind = BLOCK_GATES[j % 4];
            let mut s = Complex64::new(0.0, 0.0);
            for m in 0..n {
                s += chi.get(m).conj() * self.generator_row(kind, &phi[j], m);
            }
            grad[j] = 2.0 * (amp.conj() * i * s).re;
            if j > 0 {
                self.apply_adjoint(kind, theta[j], &mats[j], chi, tmp);
                std::mem::swap(chi, tmp);
            }
        }
        Ok(amp.norm_sqr())
    }
}
