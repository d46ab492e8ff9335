//! Gates of the form `U(theta) = exp(i theta G)` with a fixed Hermitian
//! generator `G`, truncated to the working Fock space and diagonalized once.
//!
//! Every dense generator used here is unitarily similar to a real symmetric
//! matrix through a diagonal phase, `G = D M D^dag`. Diagonalizing `M`
//! gives `G = (D O) diag(lambda) (D O)^dag` with `O` real orthogonal, so
//! applying a gate costs two real matrix-vector products per component.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::DenseOperator;
use super::state::FockVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    /// Position displacement `X(c) = exp(-i c p)`.
    X,
    /// Momentum displacement `Z(d) = exp(i d q)`.
    Z,
    /// Squeezing `S(r) = exp(i r (qp + pq) / 2)`.
    S,
    /// Rotation `R(theta) = exp(i theta (q^2 + p^2) / 2)`.
    R,
    /// Kerr gate `K(k) = exp(i k n^2)`.
    K,
    /// Kerr gate in the form `K_LB(kappa) = exp(i kappa (q^2 + p^2)^2)`.
    #[serde(rename = "K_LB")]
    KLb,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [
        GateKind::X,
        GateKind::Z,
        GateKind::S,
        GateKind::R,
        GateKind::K,
        GateKind::KLb,
    ];

    pub fn is_diagonal(self) -> bool {
        matches!(self, GateKind::R | GateKind::K | GateKind::KLb)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::X => "X",
            GateKind::Z => "Z",
            GateKind::S => "S",
            GateKind::R => "R",
            GateKind::K => "K",
            GateKind::KLb => "K_LB",
        };
        f.write_str(s)
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" => Ok(GateKind::X),
            "Z" => Ok(GateKind::Z),
            "S" => Ok(GateKind::S),
            "R" => Ok(GateKind::R),
            "K" => Ok(GateKind::K),
            "K_LB" | "KLB" => Ok(GateKind::KLb),
            other => Err(Error::UnsupportedGate(other.to_string())),
        }
    }
}

/// Complex vector stored as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SplitVec {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SplitVec {
    pub fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn from_amplitudes(a: &[Complex64]) -> Self {
        Self {
            re: a.iter().map(|z| z.re).collect(),
            im: a.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_amplitudes(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }

    pub fn copy_from(&mut self, other: &SplitVec) {
        self.re.copy_from_slice(&other.re);
        self.im.copy_from_slice(&other.im);
    }

    #[inline]
    pub fn get(&self, k: usize) -> Complex64 {
        Complex64::new(self.re[k], self.im[k])
    }

    #[inline]
    pub fn set(&mut self, k: usize, z: Complex64) {
        self.re[k] = z.re;
        self.im[k] = z.im;
    }
}

/// Real orthogonal eigenbasis, kept in both orientations so that both
/// `O x` and `O^T x` are row-wise dot products.
#[derive(Debug, Clone)]
struct RealBasis {
    rows: Vec<f64>,
    cols: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GateCache {
    kind: GateKind,
    cutoff: usize,
    generator: DenseOperator,
    eigenvalues: Vec<f64>,
    eigenvectors: DenseOperator,
    phase: Vec<Complex64>,
    basis: Option<RealBasis>,
}

/// Eigendecomposition of `kind`'s generator at the given cutoff.
pub fn gate(kind: GateKind, cutoff: usize) -> Result<GateCache> {
    GateCache::new(kind, cutoff)
}

impl GateCache {
    pub fn new(kind: GateKind, cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let n = cutoff;
        let diagonal = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { (0..n).map(|k| f(k as f64)).collect() };
        let (phase, real_generator): (Vec<Complex64>, Option<DMatrix<f64>>) = match kind {
            GateKind::X => {
                // -p = D (-q) D^dag with D = diag(i^n)
                let phase = (0..n).map(|k| Complex64::i().powu(k as u32)).collect();
                (phase, Some(tridiagonal_position(n, -1.0)))
            }
            GateKind::Z => (vec![Complex64::new(1.0, 0.0); n], Some(tridiagonal_position(n, 1.0))),
            GateKind::S => {
                // (qp + pq)/2 = i (a^dag^2 - a^2)/2 = D (a^2 + a^dag^2)/2 D^dag, D = diag(e^{i pi n/4})
                let phase = (0..n)
                    .map(|k| Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * k as f64))
                    .collect();
                let mut m = DMatrix::<f64>::zeros(n, n);
                for k in 0..n.saturating_sub(2) {
                    let v = (((k + 1) * (k + 2)) as f64).sqrt() / 2.0;
                    m[(k, k + 2)] = v;
                    m[(k + 2, k)] = v;
                }
                (phase, Some(m))
            }
            GateKind::R | GateKind::K | GateKind::KLb => (vec![Complex64::new(1.0, 0.0); n], None),
        };

        let generator = match &real_generator {
            Some(m) => DenseOperator::from_fn(n, |i, j| phase[i] * m[(i, j)] * phase[j].conj())?,
            None => DenseOperator::zeros(n)?,
        };
        let (eigenvalues, basis) = match real_generator {
            Some(m) => {
                let (values, vectors) = sorted_symmetric_eigen(m);
                let mut rows = vec![0.0; n * n];
                let mut cols = vec![0.0; n * n];
                for i in 0..n {
                    for k in 0..n {
                        rows[i * n + k] = vectors[(i, k)];
                        cols[k * n + i] = vectors[(i, k)];
                    }
                }
                (values, Some(RealBasis { rows, cols }))
            }
            None => {
                let values = match kind {
                    GateKind::R => diagonal(&|k| k + 0.5),
                    GateKind::K => diagonal(&|k| k * k),
                    _ => diagonal(&|k| (2.0 * k + 1.0).powi(2)),
                };
                (values, None)
            }
        };

        let eigenvectors = match &basis {
            Some(b) => DenseOperator::from_fn(n, |i, k| phase[i] * b.rows[i * n + k])?,
            None => DenseOperator::identity(n)?,
        };
        let generator = match &basis {
            Some(_) => generator,
            None => DenseOperator::from_diagonal(
                &eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)).collect::<Vec<_>>(),
            )?,
        };

        Ok(Self {
            kind,
            cutoff,
            generator,
            eigenvalues,
            eigenvectors,
            phase,
            basis,
        })
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn generator(&self) -> &DenseOperator {
        &self.generator
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DenseOperator {
        &self.eigenvectors
    }

    /// `V diag(exp(i theta lambda)) V^dag`.
    pub fn unitary(&self, theta: f64) -> DenseOperator {
        let n = self.cutoff;
        let v = &self.eigenvectors;
        let phases: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, theta * l))
            .collect();
        DenseOperator::from_fn(n, |i, j| {
            (0..n)
                .map(|k| v.get(i, k) * phases[k] * v.get(j, k).conj())
                .sum()
        })
        .expect("cutoff > 0")
    }

    /// Applies `U(theta)` to `state`. At `theta == 0` the input is returned unchanged.
    pub fn apply(&self, theta: f64, state: &FockVector) -> Result<FockVector> {
        state.check_dim(self.cutoff)?;
        if theta == 0.0 {
            return Ok(state.clone());
        }
        let mut x = SplitVec::from_amplitudes(state.amplitudes());
        let mut scratch = SplitVec::zeros(self.cutoff);
        self.apply_split(theta, &mut x, &mut scratch);
        FockVector::new(x.to_amplitudes())
    }

    /// In-place `x <- U(theta) x`.
    pub(crate) fn apply_split(&self, theta: f64, x: &mut SplitVec, scratch: &mut SplitVec) {
        self.to_eigen(x, scratch);
        self.phase_in_place(theta, x);
        self.from_eigen(x, scratch);
    }

    /// In-place `x <- V^dag x`.
    pub(crate) fn to_eigen(&self, x: &mut SplitVec, scratch: &mut SplitVec) {
        if let Some(b) = &self.basis {
            let n = self.cutoff;
            for k in 0..n {
                scratch.set(k, x.get(k) * self.phase[k].conj());
            }
            matvec2(&b.cols, n, &scratch.re, &scratch.im, &mut x.re, &mut x.im);
        }
    }

    /// In-place `y <- V y`.
    pub(crate) fn from_eigen(&self, y: &mut SplitVec, scratch: &mut SplitVec) {
        if let Some(b) = &self.basis {
            let n = self.cutoff;
            matvec2(&b.rows, n, &y.re, &y.im, &mut scratch.re, &mut scratch.im);
            for k in 0..n {
                y.set(k, scratch.get(k) * self.phase[k]);
            }
        }
    }

    /// `y_k <- exp(i theta lambda_k) y_k`.
    pub(crate) fn phase_in_place(&self, theta: f64, y: &mut SplitVec) {
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let (s, c) = (theta * l).sin_cos();
            let (re, im) = (y.re[k], y.im[k]);
            y.re[k] = re * c - im * s;
            y.im[k] = re * s + im * c;
        }
    }
}

fn tridiagonal_position(n: usize, sign: f64) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n.saturating_sub(1) {
        let v = sign * ((k + 1) as f64 / 2.0).sqrt();
        m[(k, k + 1)] = v;
        m[(k + 1, k)] = v;
    }
    m
}

fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        // fix the sign so the largest component is positive
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    (values, vectors)
}

#[cfg(test)]
fn reconstruct(v: &DenseOperator, values: &[f64]) -> Result<DenseOperator> {
    let n = v.dim();
    DenseOperator::from_fn(n, |i, j| {
        (0..n)
            .map(|k| v.get(i, k) * values[k] * v.get(j, k).conj())
            .sum()
    })
}

/// `y = M x` for a real row-major `n x n` matrix and a complex vector in split form.
#[inline]
pub(crate) fn matvec2(m: &[f64], n: usize, xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]) {
    for (i, row) in m.chunks_exact(n).enumerate() {
        let (r, im) = dot2(row, xr, xi);
        yr[i] = r;
        yi[i] = im;
    }
}

#[inline]
fn dot2(row: &[f64], xr: &[f64], xi: &[f64]) -> (f64, f64) {
    let mut ar = [0.0f64; 4];
    let mut ai = [0.0f64; 4];
    let chunks = row.len() / 4;
    for c in 0..chunks {
        let o = c * 4;
        let m = &row[o..o + 4];
        let r = &xr[o..o + 4];
        let i = &xi[o..o + 4];
        for l in 0..4 {
            ar[l] += m[l] * r[l];
            ai[l] += m[l] * i[l];
        }
    }
    let mut sr = (ar[0] + ar[2]) + (ar[1] + ar[3]);
    let mut si = (ai[0] + ai[2]) + (ai[1] + ai[3]);
    for o in chunks * 4..row.len() {
        sr += row[o] * xr[o];
        si += row[o] * xi[o];
    }
    (sr, si)
}
