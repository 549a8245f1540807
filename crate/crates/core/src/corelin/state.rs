use num_complex::Complex64;

use super::density::DensityOperator;
use super::NORM_TOL;
use crate::error::{Error, Result};

/// Amplitude vector over `num_qubits` qubits.
///
/// States built through the checked constructors have unit norm. Sums of
/// branches (as in the purification arguments) can be built with
/// [`PureState::unnormalized`]; such states carry `normalized == false`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
    normalized: bool,
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "amplitude vector length {len} is not a power of two"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

impl PureState {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0).expect("index 0 is always valid")
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(PureState {
            num_qubits,
            amplitudes,
            normalized: true,
        })
    }

    /// Checked constructor: the squared norm must be 1 within `NORM_TOL`.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = qubits_for_len(amplitudes.len())?;
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(PureState {
            num_qubits,
            amplitudes,
            normalized: true,
        })
    }

    /// Builds a state without enforcing the norm invariant.
    pub fn unnormalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = qubits_for_len(amplitudes.len())?;
        Ok(PureState {
            num_qubits,
            amplitudes,
            normalized: false,
        })
    }

    pub(crate) fn from_parts(amplitudes: Vec<Complex64>, normalized: bool) -> Self {
        let num_qubits = amplitudes.len().trailing_zeros() as usize;
        debug_assert_eq!(1usize << num_qubits, amplitudes.len());
        PureState {
            num_qubits,
            amplitudes,
            normalized,
        }
    }

    /// Wraps amplitudes that are unit-norm by construction.
    pub(crate) fn from_parts_normalized(amplitudes: Vec<Complex64>) -> Self {
        Self::from_parts(amplitudes, true)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm and sets the flag.
    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        for a in &mut self.amplitudes {
            *a /= n;
        }
        self.normalized = true;
        Ok(self)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &PureState) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `self ⊗ other`, with `self` on the leading (most significant) qubits.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        PureState::from_parts(amplitudes, self.normalized && other.normalized)
    }

    /// `self^{⊗copies}`.
    pub fn tensor_power(&self, copies: usize) -> PureState {
        let mut acc = PureState::from_parts(vec![Complex64::new(1.0, 0.0)], true);
        for _ in 0..copies {
            acc = acc.tensor(self);
        }
        acc.normalized = self.normalized;
        acc
    }

    /// `|self><self|` as a density operator (trace = squared norm).
    pub fn projector(&self) -> DensityOperator {
        DensityOperator::pure(self)
    }
}

impl std::ops::Add for &PureState {
    type Output = PureState;

    fn add(self, rhs: &PureState) -> PureState {
        assert_eq!(self.dim(), rhs.dim(), "adding states of different dimension");
        let amps = self
            .amplitudes
            .iter()
            .zip(&rhs.amplitudes)
            .map(|(a, b)| a + b)
            .collect();
        PureState::from_parts(amps, false)
    }
}
