use num_complex::Complex64;

use super::state::FockVector;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self {
            dim,
            entries: vec![ZERO; dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..dim {
                m.entries[i * dim + j] = f(i, j);
            }
        }
        Ok(m)
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, d) in diag.iter().enumerate() {
            m.entries[i * diag.len() + i] = *d;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        let n = self.dim;
        let mut out = Self::zeros(n)?;
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.entries[k * n..(k + 1) * n];
                let dst = &mut out.entries[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, state: &FockVector) -> Result<FockVector> {
        state.check_dim(self.dim)?;
        let x = state.amplitudes();
        let out = self
            .entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        FockVector::new(out)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_dim(other)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()).is_ok_and(|d| d < tol)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let Ok(prod) = self.dagger().matmul(self) else {
            return false;
        };
        let eye = Self::identity(self.dim).expect("dim > 0");
        prod.max_abs_diff(&eye).is_ok_and(|d| d < tol)
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        Ok(())
    }
}

/// Ladder operator `a` with `<n-1|a|n> = sqrt(n)`.
pub fn annihilation(cutoff: usize) -> Result<DenseOperator> {
    let mut a = DenseOperator::zeros(cutoff)?;
    for n in 1..cutoff {
        a.set(n - 1, n, Complex64::new((n as f64).sqrt(), 0.0));
    }
    Ok(a)
}

pub fn creation(cutoff: usize) -> Result<DenseOperator> {
    Ok(annihilation(cutoff)?.dagger())
}

/// `q = (a + a^dag) / sqrt(2)`.
pub fn position(cutoff: usize) -> Result<DenseOperator> {
    let a = annihilation(cutoff)?;
    Ok(a.add(&a.dagger())?
        .scale(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)))
}

/// `p = (a - a^dag) / (i sqrt(2))`.
pub fn momentum(cutoff: usize) -> Result<DenseOperator> {
    let a = annihilation(cutoff)?;
    Ok(a.sub(&a.dagger())?
        .scale(Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2)))
}

pub fn number(cutoff: usize) -> Result<DenseOperator> {
    let diag: Vec<_> = (0..cutoff)
        .map(|n| Complex64::new(n as f64, 0.0))
        .collect();
    DenseOperator::from_diagonal(&diag)
}
