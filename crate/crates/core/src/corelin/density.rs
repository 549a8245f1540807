use nalgebra::DMatrix;
use num_complex::Complex64;

use super::state::PureState;
use super::{OPERATOR_TOL, PSD_TOL};
use crate::error::{Error, Result};

/// Hermitian, positive semidefinite, trace-one matrix.
///
/// [`DensityOperator::new`] checks Hermiticity and the trace; positivity is
/// checked on demand by [`DensityOperator::check_psd`] because it needs an
/// eigendecomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensity(format!(
                "matrix is {}x{}, expected a non-empty square matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > OPERATOR_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (max |ρ - ρ†| = {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > OPERATOR_TOL {
            return Err(Error::InvalidDensity(format!("trace is {tr}, expected 1")));
        }
        Ok(DensityOperator { matrix })
    }

    /// Wraps a matrix known to satisfy the invariants by construction.
    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        DensityOperator { matrix }
    }

    pub fn pure(state: &PureState) -> Self {
        let a = state.amplitudes();
        let dim = a.len();
        DensityOperator {
            matrix: DMatrix::from_fn(dim, dim, |r, c| a[r] * a[c].conj()),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator {
            matrix: DMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Fails if any eigenvalue is below -1e-8.
    pub fn check_psd(&self) -> Result<f64> {
        let min = self.min_eigenvalue();
        if min < PSD_TOL {
            return Err(Error::InvalidDensity(format!("minimum eigenvalue {min:e}")));
        }
        Ok(min)
    }

    pub fn max_abs_diff(&self, other: &DensityOperator) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Conjugation `U ρ U†`.
    pub fn conjugate_by(&self, unitary: &DMatrix<Complex64>) -> Result<Self> {
        if unitary.nrows() != self.dim() || unitary.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: unitary.nrows(),
            });
        }
        Ok(DensityOperator {
            matrix: unitary * &self.matrix * unitary.adjoint(),
        })
    }
}

fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Matrices whose imaginary parts are all exactly zero take the real
/// symmetric path, which is several times faster.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut values: Vec<f64> = if m.iter().all(|z| z.im == 0.0) {
        m.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
    } else {
        m.clone().symmetric_eigenvalues().iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    values
}

/// `½ ‖a − b‖₁` via the eigenvalues of the Hermitian difference.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let diff = &a.matrix - &b.matrix;
    let sum: f64 = hermitian_eigenvalues(&diff).iter().map(|v| v.abs()).sum();
    Ok((0.5 * sum).clamp(0.0, 1.0))
}

/// `√(1 − |⟨a|b⟩|²)` for unit vectors.
pub fn trace_distance_pure(a: &PureState, b: &PureState) -> Result<f64> {
    let overlap = a.inner(b)?.norm_sqr();
    Ok((1.0 - overlap).max(0.0).sqrt())
}

/// `Tr_E |ψ⟩⟨ψ|` where `E` is `traced`; kept qubits stay in ascending order.
pub fn partial_trace(state: &PureState, traced: &[usize]) -> Result<DensityOperator> {
    let q = state.num_qubits();
    let mut is_traced = vec![false; q];
    for &t in traced {
        if t >= q {
            return Err(Error::QubitOutOfRange {
                index: t,
                num_qubits: q,
            });
        }
        if std::mem::replace(&mut is_traced[t], true) {
            return Err(Error::DuplicateQubit(t));
        }
    }
    let kept: Vec<usize> = (0..q).filter(|&k| !is_traced[k]).collect();
    let env: Vec<usize> = (0..q).filter(|&k| is_traced[k]).collect();
    let compress = |index: usize, qubits: &[usize]| -> usize {
        qubits
            .iter()
            .fold(0usize, |acc, &k| (acc << 1) | ((index >> (q - 1 - k)) & 1))
    };
    let kept_dim = 1usize << kept.len();
    let env_dim = 1usize << env.len();
    let mut psi = DMatrix::<Complex64>::zeros(kept_dim, env_dim);
    for (index, amp) in state.amplitudes().iter().enumerate() {
        psi[(compress(index, &kept), compress(index, &env))] = *amp;
    }
    Ok(DensityOperator::from_matrix_unchecked(&psi * psi.adjoint()))
}
