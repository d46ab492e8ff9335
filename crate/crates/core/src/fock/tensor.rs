use super::operator::DenseOperator;
use super::state::FockVector;
use crate::error::{Error, Result};

/// Default bound on the composite dimension of two-mode objects.
pub const DEFAULT_TENSOR_CAP: usize = 4096;

fn check_cap(requested: usize, cap: usize) -> Result<()> {
    if requested > cap {
        return Err(Error::ResourceLimit { requested, cap });
    }
    Ok(())
}

/// `a (x) b` with mode 1 as the slow index.
pub fn tensor(a: &FockVector, b: &FockVector) -> Result<FockVector> {
    tensor_with_cap(a, b, DEFAULT_TENSOR_CAP)
}

pub fn tensor_with_cap(a: &FockVector, b: &FockVector, cap: usize) -> Result<FockVector> {
    check_cap(a.cutoff() * b.cutoff(), cap)?;
    let out = a
        .amplitudes()
        .iter()
        .flat_map(|x| b.amplitudes().iter().map(move |y| x * y))
        .collect();
    FockVector::new(out)
}

pub fn tensor_op(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    tensor_op_with_cap(a, b, DEFAULT_TENSOR_CAP)
}

pub fn tensor_op_with_cap(a: &DenseOperator, b: &DenseOperator, cap: usize) -> Result<DenseOperator> {
    let (na, nb) = (a.dim(), b.dim());
    check_cap(na * nb, cap)?;
    DenseOperator::from_fn(na * nb, |i, j| {
        a.get(i / nb, j / nb) * b.get(i % nb, j % nb)
    })
}
