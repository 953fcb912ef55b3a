//! Dense complex-matrix layer: channel application, Choi matrices,
//! complete-positivity checks and the matrix-level semigroup composition test.
//!
//! Superoperators use column-stacking vectorization: the operator X maps to
//! the vector with `X[i, j]` at position `i + j d`, so `M[(a + b d), (i + j d)]`
//! is `Φ(|i⟩⟨j|)[a, b]`. Choi matrices are `Σ_ij Φ(|i⟩⟨j|) ⊗ |i⟩⟨j|`, the
//! channel acting on the first tensor factor.

mod jacobi;
mod matrix;

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use jacobi::{hermitian_eigen, HermitianEigen};
pub use matrix::ComplexMatrix;

use crate::channelcore::{ChannelSpec, EvalError, MixtureSpec};
use crate::mubgen::WeylSet;

/// Hermiticity tolerance for [`psd_check`] input.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default PSD tolerance on the minimum eigenvalue.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (max |A - A†| = {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("not a density matrix: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self, MatrixError> {
        let defect = m.hermiticity_defect();
        if defect > 1e-12 {
            return Err(MatrixError::InvalidState(format!("not Hermitian ({defect:e})")));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(MatrixError::InvalidState(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigen(&m).values[0];
        if min < -1e-10 {
            return Err(MatrixError::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityMatrix(m))
    }

    /// |ψ⟩⟨ψ| for a normalized (or normalizable) vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self, MatrixError> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&v, &v))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(ComplexMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

fn check_dims(weyl: &WeylSet, spec: &MixtureSpec, x: &ComplexMatrix) -> Result<(), MatrixError> {
    let d = weyl.dimension();
    for found in [spec.dimension, x.dim()] {
        if found != d {
            return Err(MatrixError::DimensionMismatch { expected: d, found });
        }
    }
    Ok(())
}

/// (1/(d−1)) Σ_{k=1}^{d−1} U_α^k X U_α^{k†}
fn dephasing_twirl(weyl: &WeylSet, alpha: usize, x: &ComplexMatrix) -> ComplexMatrix {
    let d = weyl.dimension();
    let mut acc = ComplexMatrix::zeros(d);
    for k in 1..d {
        acc.add_scaled(Complex64::new(1.0, 0.0), &x.conjugate_by(weyl.power(alpha, k)));
    }
    acc.scale_real(1.0 / (d as f64 - 1.0))
}

fn apply_single(weyl: &WeylSet, channel: &ChannelSpec, p: f64, x: &ComplexMatrix) -> ComplexMatrix {
    let mut out = x.scale_real(1.0 - p);
    if p != 0.0 {
        out.add_scaled(Complex64::new(p, 0.0), &dephasing_twirl(weyl, channel.basis, x));
    }
    out
}

/// Applies the mixture at time `t` to an arbitrary operator.
pub fn apply_to_operator(
    weyl: &WeylSet,
    spec: &MixtureSpec,
    t: f64,
    x: &ComplexMatrix,
) -> Result<ComplexMatrix, MatrixError> {
    check_dims(weyl, spec, x)?;
    let ps = spec
        .components
        .iter()
        .map(|c| c.channel.p.eval(t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(apply_with_probabilities(weyl, spec, &ps, x))
}

fn apply_with_probabilities(
    weyl: &WeylSet,
    spec: &MixtureSpec,
    ps: &[f64],
    x: &ComplexMatrix,
) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(x.dim());
    for (c, &p) in spec.components.iter().zip(ps) {
        out.add_scaled(Complex64::new(c.weight, 0.0), &apply_single(weyl, &c.channel, p, x));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub matrix: ComplexMatrix,
    /// Whether the output is still a valid density matrix (fails only when
    /// some p(t) is outside [0, 1]).
    pub is_state: bool,
}

pub fn apply_channel(
    weyl: &WeylSet,
    spec: &MixtureSpec,
    t: f64,
    rho: &DensityMatrix,
) -> Result<ChannelOutput, MatrixError> {
    let matrix = apply_to_operator(weyl, spec, t, rho.matrix())?;
    let is_state = DensityMatrix::new(matrix.clone()).is_ok();
    Ok(ChannelOutput { matrix, is_state })
}

/// Superoperator of an arbitrary linear map on d×d matrices.
pub fn superoperator_of(d: usize, map: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            let col = i + j * d;
            let image = map(&ComplexMatrix::unit(d, i, j)).vec_col();
            for (row, z) in image.into_iter().enumerate() {
                m[(row, col)] = z;
            }
        }
    }
    m
}

/// Choi matrix of an arbitrary linear map on d×d matrices.
pub fn choi_of(d: usize, map: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ChoiMatrix {
    let mut c = ComplexMatrix::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            let image = map(&ComplexMatrix::unit(d, i, j));
            for a in 0..d {
                for b in 0..d {
                    c[(a * d + i, b * d + j)] = image[(a, b)];
                }
            }
        }
    }
    ChoiMatrix { d, matrix: c }
}

pub fn superoperator(weyl: &WeylSet, spec: &MixtureSpec, t: f64) -> Result<ComplexMatrix, MatrixError> {
    let d = weyl.dimension();
    check_dims(weyl, spec, &ComplexMatrix::zeros(d))?;
    let ps = spec
        .components
        .iter()
        .map(|c| c.channel.p.eval(t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(superoperator_of(d, |x| apply_with_probabilities(weyl, spec, &ps, x)))
}

#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    d: usize,
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn system_dimension(&self) -> usize {
        self.d
    }

    /// Trace over the output (first) factor; the identity for trace-preserving maps.
    pub fn partial_trace_output(&self) -> ComplexMatrix {
        let d = self.d;
        ComplexMatrix::from_fn(d, |i, j| (0..d).map(|a| self.matrix[(a * d + i, a * d + j)]).sum())
    }

    pub fn trace_preservation_defect(&self) -> f64 {
        (&self.partial_trace_output() - &ComplexMatrix::identity(self.d)).max_abs()
    }
}

pub fn choi(weyl: &WeylSet, spec: &MixtureSpec, t: f64) -> Result<ChoiMatrix, MatrixError> {
    let d = weyl.dimension();
    check_dims(weyl, spec, &ComplexMatrix::zeros(d))?;
    let ps = spec
        .components
        .iter()
        .map(|c| c.channel.p.eval(t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(choi_of(d, |x| apply_with_probabilities(weyl, spec, &ps, x)))
}

/// The map that is diagonal on `{𝟙, U_β^m}` with eigenvalue `mu[β − 1]` on
/// every `U_β^m` (m = 1..d−1) and 1 on the identity.
pub fn map_from_spectrum<'a>(
    weyl: &'a WeylSet,
    mu: &'a [f64],
) -> impl Fn(&ComplexMatrix) -> ComplexMatrix + 'a {
    move |x: &ComplexMatrix| {
        let d = weyl.dimension();
        let inv_d = 1.0 / d as f64;
        let mut out = ComplexMatrix::identity(d).scale(x.trace() * inv_d);
        for beta in weyl.labels() {
            for m in 1..d {
                let u = weyl.power(beta, m);
                let coeff = u.adjoint().matmul(x).trace() * (mu[beta - 1] * inv_d);
                out.add_scaled(coeff, u);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdVerdict {
    pub psd: bool,
    pub min_eigenvalue: f64,
}

pub fn psd_check(m: &ComplexMatrix, tol: f64) -> Result<PsdVerdict, MatrixError> {
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(MatrixError::NotHermitian { defect });
    }
    let min_eigenvalue = hermitian_eigen(m).values.first().copied().unwrap_or(0.0);
    Ok(PsdVerdict {
        psd: min_eigenvalue >= -tol,
        min_eigenvalue,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositionCheck {
    pub pass: bool,
    /// max |M(s) M(t) − M(s + t)|
    pub deviation: f64,
}

pub fn compose_check(
    weyl: &WeylSet,
    spec: &MixtureSpec,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<CompositionCheck, MatrixError> {
    let ms = superoperator(weyl, spec, s)?;
    let mt = superoperator(weyl, spec, t)?;
    let mst = superoperator(weyl, spec, s + t)?;
    let deviation = (&ms.matmul(&mt) - &mst).max_abs();
    Ok(CompositionCheck {
        pass: deviation <= tol,
        deviation,
    })
}

/// `row,col,re,im` at 17 significant digits.
pub fn matrix_csv(m: &ComplexMatrix) -> String {
    let mut out = String::from("row,col,re,im\n");
    let n = m.dim();
    for r in 0..n {
        for c in 0..n {
            let z = m[(r, c)];
            let _ = writeln!(out, "{r},{c},{:.16e},{:.16e}", z.re, z.im);
        }
    }
    out
}
