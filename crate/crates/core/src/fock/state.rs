use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::DenseOperator;
use crate::error::{Error, Result};

/// Tolerance used when a state is required to be normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Complex amplitudes over the number states `|0>, ..., |cutoff-1>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
}

impl TryFrom<Vec<Complex64>> for FockVector {
    type Error = Error;

    fn try_from(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::new(amplitudes)
    }
}

impl From<FockVector> for Vec<Complex64> {
    fn from(v: FockVector) -> Self {
        v.amplitudes
    }
}

impl FockVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self { amplitudes })
    }

    pub fn zeros(cutoff: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); cutoff])
    }

    /// The number state `|n>` in a space of dimension `cutoff`.
    pub fn number(n: usize, cutoff: usize) -> Result<Self> {
        if n >= cutoff {
            return Err(Error::InvalidParameter(format!(
                "number state |{n}> does not fit in cutoff {cutoff}"
            )));
        }
        let mut v = Self::zeros(cutoff)?;
        v.amplitudes[n] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        Self::number(0, cutoff)
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < NORM_TOLERANCE
    }

    pub fn ensure_normalized(&self, what: &str) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{what} must be normalized (norm = {:.12})",
                self.norm()
            )))
        }
    }

    /// Returns a unit-norm copy. Fails on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// `<self|other>`, zero-padding the shorter vector.
    pub fn inner(&self, other: &FockVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Copy embedded in (or cut down to) dimension `cutoff`.
    pub fn resized(&self, cutoff: usize) -> Result<Self> {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); cutoff];
        let n = cutoff.min(self.cutoff());
        amplitudes[..n].copy_from_slice(&self.amplitudes[..n]);
        Self::new(amplitudes)
    }

    /// `<self|op|self>`.
    pub fn expectation(&self, op: &DenseOperator) -> Result<Complex64> {
        let applied = op.apply(self)?;
        Ok(self.inner(&applied))
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.cutoff() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.cutoff(),
            });
        }
        Ok(())
    }
}
