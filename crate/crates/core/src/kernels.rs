//! Kernel functions and Gram matrices.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, squared_norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(-gamma * |x - x'|^2)`
    Rbf { gamma: f64 },
    /// `<x, x'>`
    Linear,
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let k = KernelSpec::Rbf { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(Error::InvalidParameter(
                alloc::format!("RBF gamma must be positive and finite, got {gamma}"),
            )),
            _ => Ok(()),
        }
    }

    #[inline]
    fn eval_parts(&self, sq_x: f64, sq_z: f64, inner: f64) -> f64 {
        match *self {
            KernelSpec::Rbf { gamma } => {
                let d2 = (sq_x + sq_z - 2.0 * inner).max(0.0);
                libm::exp(-gamma * d2)
            }
            KernelSpec::Linear => inner,
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel arguments",
            expected: x.len(),
            found: z.len(),
        });
    }
    Ok(match *spec {
        KernelSpec::Rbf { gamma } => {
            let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            libm::exp(-gamma * d2)
        }
        KernelSpec::Linear => dot(x, z),
    })
}

fn row_norms(x: &Matrix) -> Vec<f64> {
    x.row_iter().map(squared_norm).collect()
}

/// Symmetric Gram matrix over the rows of `x`.
pub fn gram(spec: &KernelSpec, x: &Matrix) -> Result<Matrix> {
    spec.validate()?;
    if x.rows() == 0 {
        return Err(Error::EmptyInput("gram"));
    }
    let n = x.rows();
    let norms = row_norms(x);
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = spec.eval_parts(norms[i], norms[j], dot(x.row(i), x.row(j)));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] = match spec {
            KernelSpec::Rbf { .. } => 1.0,
            KernelSpec::Linear => norms[i],
        };
    }
    Ok(k)
}

/// Cross Gram: entry `(i, j)` is `k(x_i, z_j)`.
pub fn gram_cross(spec: &KernelSpec, x: &Matrix, z: &Matrix) -> Result<Matrix> {
    spec.validate()?;
    if x.cols() != z.cols() {
        return Err(Error::DimensionMismatch {
            context: "cross gram",
            expected: x.cols(),
            found: z.cols(),
        });
    }
    let nx = row_norms(x);
    let nz = row_norms(z);
    let mut k = Matrix::zeros(x.rows(), z.rows());
    for i in 0..x.rows() {
        let xi = x.row(i);
        for (j, out) in k.row_mut(i).iter_mut().enumerate() {
            *out = spec.eval_parts(nx[i], nz[j], dot(xi, z.row(j)));
        }
    }
    Ok(k)
}
