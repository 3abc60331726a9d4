//! Least-squares SVM in dual form, one-vs-all multiclass, and closed-form
//! leave-one-out predictions.
//!
//! Training solves the augmented system
//!
//! ```text
//! [ 0   1^T       ] [b]   [0]
//! [ 1   K + I/C   ] [a] = [y]
//! ```
//!
//! by block elimination: with `H = K + I/C`, `u = H^-1 1` and `v = H^-1 y`,
//! the solution is `b = 1^T v / 1^T u` and `a = v - b u`. One Cholesky
//! factorization of `H` serves every right-hand side, so all one-vs-all
//! problems over the same inputs share it.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::sorted_unique;
use crate::kernels::{gram, gram_cross, KernelSpec};
use crate::linalg::{Cholesky, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Weight of the squared training errors.
    pub c: f64,
    pub kernel: KernelSpec,
}

impl HyperParams {
    pub fn new(c: f64, kernel: KernelSpec) -> Result<Self> {
        let hp = HyperParams { c, kernel };
        hp.validate()?;
        Ok(hp)
    }

    pub fn rbf(c: f64, gamma: f64) -> Result<Self> {
        Self::new(c, KernelSpec::Rbf { gamma })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "C must be positive and finite, got {}",
                self.c
            )));
        }
        self.kernel.validate()
    }

    /// The RBF width, or `None` for the linear kernel.
    pub fn gamma(&self) -> Option<f64> {
        match self.kernel {
            KernelSpec::Rbf { gamma } => Some(gamma),
            KernelSpec::Linear => None,
        }
    }
}

/// Factorization of `K + I/C` over one training set.
#[derive(Debug, Clone)]
pub struct LssvmSystem {
    chol: Cholesky,
    ones_solution: Vec<f64>,
    ones_sum: f64,
}

impl LssvmSystem {
    pub fn new(gram: &Matrix, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("C must be positive, got {c}")));
        }
        if gram.rows() == 0 {
            return Err(Error::EmptyInput("LS-SVM training"));
        }
        let mut h = gram.clone();
        h.add_diagonal(1.0 / c);
        let chol = Cholesky::factor_with_jitter(&h)?;
        let ones_solution = chol.solve(&vec![1.0; gram.rows()]);
        let ones_sum: f64 = ones_solution.iter().sum();
        if !(ones_sum > 0.0) || !ones_sum.is_finite() {
            return Err(Error::Singular);
        }
        Ok(LssvmSystem {
            chol,
            ones_solution,
            ones_sum,
        })
    }

    pub fn len(&self) -> usize {
        self.chol.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dual coefficients and bias for targets `y`.
    pub fn solve(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let v = self.chol.solve(y);
        let bias = v.iter().sum::<f64>() / self.ones_sum;
        let alpha = v
            .iter()
            .zip(&self.ones_solution)
            .map(|(vi, ui)| vi - bias * ui)
            .collect();
        (alpha, bias)
    }

    /// Diagonal of the dual block of the inverse augmented matrix:
    /// `(H^-1)_ii - u_i^2 / 1^T u`.
    pub fn loo_diagonal(&self) -> Vec<f64> {
        self.chol
            .inverse_diagonal()
            .iter()
            .zip(&self.ones_solution)
            .map(|(d, u)| d - u * u / self.ones_sum)
            .collect()
    }

    /// Leave-one-out predictions `y_i - a_i / D_ii` for targets `y`.
    pub fn loo_predictions(&self, y: &[f64], diagonal: &[f64]) -> Vec<f64> {
        let (alpha, _) = self.solve(y);
        y.iter()
            .zip(&alpha)
            .zip(diagonal)
            .map(|((yi, ai), di)| yi - ai / di)
            .collect()
    }
}

fn check_training(x: &Matrix, n_targets: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("LS-SVM training"));
    }
    if n_targets != x.rows() {
        return Err(Error::DimensionMismatch {
            context: "LS-SVM targets",
            expected: x.rows(),
            found: n_targets,
        });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("LS-SVM training inputs"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLssvm {
    pub hp: HyperParams,
    pub inputs: Matrix,
    pub targets: Vec<f64>,
    pub alpha: Vec<f64>,
    pub bias: f64,
}

pub fn train_binary(x: &Matrix, y: &[f64], hp: &HyperParams) -> Result<BinaryLssvm> {
    hp.validate()?;
    check_training(x, y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LS-SVM targets"));
    }
    let system = LssvmSystem::new(&gram(&hp.kernel, x)?, hp.c)?;
    let (alpha, bias) = system.solve(y);
    Ok(BinaryLssvm {
        hp: *hp,
        inputs: x.clone(),
        targets: y.to_vec(),
        alpha,
        bias,
    })
}

impl BinaryLssvm {
    pub fn predict_scores(&self, z: &Matrix) -> Result<Vec<f64>> {
        if z.rows() == 0 {
            return Ok(Vec::new());
        }
        let k = gram_cross(&self.hp.kernel, z, &self.inputs)?;
        k.mul_vec(&self.alpha)
            .map(|s| s.into_iter().map(|v| v + self.bias).collect())
    }

    /// Closed-form leave-one-out predictions on the training inputs.
    pub fn loo_scores(&self) -> Result<Vec<f64>> {
        if self.inputs.rows() < 2 {
            return Err(Error::TooFewSamples {
                context: "leave-one-out",
                needed: 2,
                found: self.inputs.rows(),
            });
        }
        let system = LssvmSystem::new(&gram(&self.hp.kernel, &self.inputs)?, self.hp.c)?;
        Ok(system.loo_predictions(&self.targets, &system.loo_diagonal()))
    }
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `+1` where the label equals `classes[g]`, `-1` elsewhere; one column per class.
pub fn one_vs_all_targets(labels: &[u32], classes: &[u32]) -> Vec<Vec<f64>> {
    classes
        .iter()
        .map(|&c| labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect())
        .collect()
}

/// One binary LS-SVM per class over shared inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaModel {
    pub hp: HyperParams,
    pub classes: Vec<u32>,
    pub inputs: Matrix,
    /// N × G dual coefficients, column g for class `classes[g]`.
    pub alpha: Matrix,
    pub bias: Vec<f64>,
}

pub fn train_ova(x: &Matrix, labels: &[u32], hp: &HyperParams) -> Result<OvaModel> {
    let classes = sorted_unique(labels);
    if classes.len() < 2 {
        return Err(Error::TooFewClasses { found: classes.len() });
    }
    train_ova_with_classes(x, labels, &classes, hp)
}

/// Like [`train_ova`] with an explicit class list. Classes absent from
/// `labels` are trained on all-negative targets.
pub fn train_ova_with_classes(x: &Matrix, labels: &[u32], classes: &[u32], hp: &HyperParams) -> Result<OvaModel> {
    hp.validate()?;
    check_training(x, labels.len())?;
    let targets = one_vs_all_targets(labels, classes);
    let system = LssvmSystem::new(&gram(&hp.kernel, x)?, hp.c)?;
    Ok(fit_ova_targets(&system, x, classes, &targets, hp))
}

pub(crate) fn fit_ova_targets(
    system: &LssvmSystem,
    x: &Matrix,
    classes: &[u32],
    targets: &[Vec<f64>],
    hp: &HyperParams,
) -> OvaModel {
    let n = x.rows();
    let mut alpha = Matrix::zeros(n, classes.len());
    let mut bias = Vec::with_capacity(classes.len());
    for (g, y) in targets.iter().enumerate() {
        let (a, b) = system.solve(y);
        for (i, v) in a.into_iter().enumerate() {
            alpha[(i, g)] = v;
        }
        bias.push(b);
    }
    OvaModel {
        hp: *hp,
        classes: classes.to_vec(),
        inputs: x.clone(),
        alpha,
        bias,
    }
}

impl OvaModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    /// N × G score matrix.
    pub fn predict_scores(&self, z: &Matrix) -> Result<Matrix> {
        if z.rows() == 0 {
            return Ok(Matrix::empty(self.n_classes()));
        }
        let k = gram_cross(&self.hp.kernel, z, &self.inputs)?;
        let mut s = k.matmul(&self.alpha)?;
        for i in 0..s.rows() {
            for (v, b) in s.row_mut(i).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(s)
    }

    pub fn predict_labels(&self, z: &Matrix) -> Result<Vec<u32>> {
        Ok(labels_from_scores(&self.predict_scores(z)?, &self.classes))
    }

    /// The class-`g` binary machine.
    pub fn binary(&self, g: usize, labels: &[u32]) -> BinaryLssvm {
        let c = self.classes[g];
        BinaryLssvm {
            hp: self.hp,
            inputs: self.inputs.clone(),
            targets: labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect(),
            alpha: self.alpha.column(g),
            bias: self.bias[g],
        }
    }
}

pub fn labels_from_scores(scores: &Matrix, classes: &[u32]) -> Vec<u32> {
    scores.row_iter().map(|r| classes[argmax(r)]).collect()
}
