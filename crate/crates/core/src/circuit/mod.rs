//! The repeated block `X(c) Z(d) K(k) S(r)` acting on vacuum, with adjoint gradients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{gate, FockVector, GateCache, GateKind, SplitVec};

mod window;
pub use window::{displacement_matrix, squeeze_matrix, WindowModel, WindowWorkspace};

/// Squeezing magnitude allowed in a block.
pub const MAX_SQUEEZE: f64 = 3.0;

/// Gate kinds of one block, in the order they act.
pub const BLOCK_GATES: [GateKind; 4] = [GateKind::X, GateKind::Z, GateKind::K, GateKind::S];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockParams {
    pub c: f64,
    pub d: f64,
    pub k: f64,
    pub r: f64,
}

impl BlockParams {
    pub fn new(c: f64, d: f64, k: f64, r: f64) -> Self {
        Self { c, d, k, r }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.c, self.d, self.k, self.r]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    fn is_finite(&self) -> bool {
        self.as_array().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    #[serde(rename = "delta")]
    pub target_delta: f64,
    pub cutoff: usize,
    pub seed: u64,
    pub blocks: Vec<BlockParams>,
    /// Free-form provenance, e.g. a gate-ordering convention of imported parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

impl CircuitParams {
    pub fn new(target_delta: f64, cutoff: usize, seed: u64, blocks: Vec<BlockParams>) -> Result<Self> {
        let p = Self {
            target_delta,
            cutoff,
            seed,
            blocks,
            convention: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// All-zero parameters for `blocks` blocks.
    pub fn zeros(target_delta: f64, cutoff: usize, blocks: usize) -> Result<Self> {
        Self::new(target_delta, cutoff, 0, vec![BlockParams::default(); blocks])
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidParameter("a circuit needs at least one block".into()));
        }
        if self.cutoff == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(i) = self.blocks.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("block {i} has non-finite parameters")));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        4 * self.blocks.len()
    }

    /// Flattened `(c, d, k, r)` per block.
    pub fn to_vector(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.as_array()).collect()
    }

    pub fn set_vector(&mut self, theta: &[f64]) {
        for (b, chunk) in self.blocks.iter_mut().zip(theta.chunks_exact(4)) {
            *b = BlockParams::from_slice(chunk);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Cached gates used by the block circuit at one cutoff.
#[derive(Debug, Clone)]
pub struct GateSet {
    cutoff: usize,
    gates: [GateCache; 4],
}

/// Reusable buffers for gradient evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    state: SplitVec,
    scratch: SplitVec,
    eigen_states: Vec<SplitVec>,
}

impl Workspace {
    pub fn new(cutoff: usize, blocks: usize) -> Self {
        Self {
            state: SplitVec::zeros(cutoff),
            scratch: SplitVec::zeros(cutoff),
            eigen_states: (0..4 * blocks).map(|_| SplitVec::zeros(cutoff)).collect(),
        }
    }
}

impl GateSet {
    pub fn new(cutoff: usize) -> Result<Self> {
        Ok(Self {
            cutoff,
            gates: [
                gate(BLOCK_GATES[0], cutoff)?,
                gate(BLOCK_GATES[1], cutoff)?,
                gate(BLOCK_GATES[2], cutoff)?,
                gate(BLOCK_GATES[3], cutoff)?,
            ],
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// State produced from vacuum by the flattened parameters `theta`.
    pub fn forward(&self, theta: &[f64]) -> Result<FockVector> {
        check_theta(theta)?;
        let mut x = vacuum_split(self.cutoff);
        let mut scratch = SplitVec::zeros(self.cutoff);
        for (j, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                self.gates[j % 4].apply_split(t, &mut x, &mut scratch);
            }
        }
        FockVector::new(x.to_amplitudes())
    }

    /// Fidelity with `target` and its gradient with respect to `theta`, written into `grad`.
    pub fn fidelity_and_gradient(
        &self,
        theta: &[f64],
        target: &FockVector,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> Result<f64> {
        check_theta(theta)?;
        target.check_dim(self.cutoff)?;
        if grad.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                actual: grad.len(),
            });
        }
        if ws.eigen_states.len() < theta.len() || ws.state.re.len() != self.cutoff {
            *ws = Workspace::new(self.cutoff, theta.len() / 4);
        }
        let n = self.cutoff;

        // forward pass, keeping V_j^dag psi_j for every gate
        let x = &mut ws.state;
        *x = vacuum_split(n);
        for (j, &t) in theta.iter().enumerate() {
            let g = &self.gates[j % 4];
            g.to_eigen(x, &mut ws.scratch);
            g.phase_in_place(t, x);
            ws.eigen_states[j].copy_from(x);
            g.from_eigen(x, &mut ws.scratch);
        }

        let amp: Complex64 = target
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(k, t)| t.conj() * x.get(k))
            .sum();

        // backward pass: chi_L = |t>, chi_{j-1} = U_j^dag chi_j
        let chi = &mut ws.state;
        *chi = SplitVec::from_amplitudes(target.amplitudes());
        for j in (0..theta.len()).rev() {
            let g = &self.gates[j % 4];
            g.to_eigen(chi, &mut ws.scratch);
            let y = &ws.eigen_states[j];
            let mut s = Complex64::new(0.0, 0.0);
            for (k, &l) in g.eigenvalues().iter().enumerate() {
                s += chi.get(k).conj() * y.get(k) * l;
            }
            // dA/dtheta_j = i s, dF = 2 Re(conj(A) dA)
            grad[j] = 2.0 * (amp.conj() * Complex64::new(0.0, 1.0) * s).re;
            if j > 0 {
                g.phase_in_place(-theta[j], chi);
                g.from_eigen(chi, &mut ws.scratch);
                    }
        }
        Ok(amp.norm_sqr())
    }
}

fn vacuum_split(n: usize) -> SplitVec {
    let mut x = SplitVec::zeros(n);
    x.re[0] = 1.0;
    x
}

fn check_theta(theta: &[f64]) -> Result<()> {
    if theta.is_empty() || !theta.len().is_multiple_of(4) {
        return Err(Error::InvalidParameter(format!(
            "expected four parameters per block, got {}",
            theta.len()
        )));
    }
    Ok(())
}

/// Runs the circuit from vacuum.
pub fn forward(params: &CircuitParams) -> Result<FockVector> {
    params.validate()?;
    GateSet::new(params.cutoff)?.forward(&params.to_vector())
}

/// Gradient of `|<target|forward(params)>|^2` in flattened `(c, d, k, r)` order.
pub fn fidelity_gradient(params: &CircuitParams, target: &FockVector) -> Result<Vec<f64>> {
    params.validate()?;
    target.ensure_normalized("target")?;
    let gates = GateSet::new(params.cutoff)?;
    let theta = params.to_vector();
    let mut ws = Workspace::new(params.cutoff, params.blocks.len());
    let mut grad = vec![0.0; theta.len()];
    gates.fidelity_and_gradient(&theta, target, &mut ws, &mut grad)?;
    Ok(grad)
}
