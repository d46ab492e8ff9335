//! Truncated Fock-space substrate: states, dense operators, gates with cached
//! eigendecompositions, wavefunctions and two-mode products.

mod gate;
mod operator;
mod state;
mod tensor;
mod wave;

pub use gate::{gate, GateCache, GateKind};
pub(crate) use gate::SplitVec;
pub use operator::{annihilation, creation, momentum, number, position, DenseOperator};
pub use state::{FockVector, NORM_TOLERANCE};
pub use tensor::{tensor, tensor_op, tensor_op_with_cap, tensor_with_cap, DEFAULT_TENSOR_CAP};
pub use wave::{
    default_extent, density, hermite_functions, wavefunction, wavefunction_at, Basis,
    QuadratureGrid,
};
