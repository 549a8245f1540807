use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::state::PureState;
use super::OPERATOR_TOL;
use crate::error::{Error, Result};

/// The operator a [`UnitaryLayer`] applies to its target sub-register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    /// `H` on every target qubit.
    HadamardAll,
    /// `|x> -> N^{-1/2} Σ_y ω_N^{xy} |y>` with `N = 2^width` and `x, y` read
    /// as integers (first target qubit most significant).
    Qft,
    /// `|x> -> ω_m^{e(x)} |x>`, `e` indexed by the sub-register value.
    PhaseDiagonal { exponents: Vec<u64>, modulus: u64 },
    /// Register permutation `R_π`: the targets are split into `perm.len()`
    /// blocks of `block_qubits` qubits and output block `k` receives input
    /// block `perm[k]`, i.e. `R_π |a_0,...,a_{t-1}> = |a_{π(0)},...,a_{π(t-1)}>`.
    Permutation { perm: Vec<usize>, block_qubits: usize },
    /// Explicit row-major `2^w x 2^w` matrix.
    Custom { entries: Vec<Complex64> },
}

/// A unitary acting on an ordered list of target qubits (identity elsewhere).
/// The first target is the most significant bit of the sub-register index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryLayer {
    #[serde(flatten)]
    pub kind: LayerKind,
    pub targets: Vec<usize>,
}

/// `ω_m^k = exp(2πi k / m)`, exact at multiples of a quarter turn.
pub fn root_of_unity(k: u64, modulus: u64) -> Complex64 {
    let k = k % modulus;
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if (4 * k) % modulus == 0 {
        return match 4 * k / modulus {
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, TAU * k as f64 / modulus as f64)
}

impl UnitaryLayer {
    pub fn hadamard_all(targets: Vec<usize>) -> Self {
        UnitaryLayer {
            kind: LayerKind::HadamardAll,
            targets,
        }
    }

    pub fn qft(targets: Vec<usize>) -> Self {
        UnitaryLayer {
            kind: LayerKind::Qft,
            targets,
        }
    }

    pub fn phase_diagonal(targets: Vec<usize>, exponents: Vec<u64>, modulus: u64) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::InvalidParameter("phase modulus must be positive".into()));
        }
        let layer = UnitaryLayer {
            kind: LayerKind::PhaseDiagonal { exponents, modulus },
            targets,
        };
        layer.check_parameters()?;
        Ok(layer)
    }

    pub fn permutation(targets: Vec<usize>, perm: Vec<usize>, block_qubits: usize) -> Result<Self> {
        let layer = UnitaryLayer {
            kind: LayerKind::Permutation { perm, block_qubits },
            targets,
        };
        layer.check_parameters()?;
        Ok(layer)
    }

    /// Wraps an explicit matrix; fails unless it is unitary within 1e-10.
    pub fn custom(targets: Vec<usize>, matrix: &DMatrix<Complex64>) -> Result<Self> {
        let dim = 1usize << targets.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: matrix.nrows(),
            });
        }
        let entries = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .map(|(r, c)| matrix[(r, c)])
            .collect();
        let layer = UnitaryLayer {
            kind: LayerKind::Custom { entries },
            targets,
        };
        layer.check_unitary()?;
        Ok(layer)
    }

    /// Identity on the given targets (a diagonal layer with zero phases).
    pub fn identity(targets: Vec<usize>) -> Self {
        let dim = 1usize << targets.len();
        UnitaryLayer {
            kind: LayerKind::PhaseDiagonal {
                exponents: vec![0; dim],
                modulus: 1,
            },
            targets,
        }
    }

    pub fn width(&self) -> usize {
        self.targets.len()
    }

    fn check_parameters(&self) -> Result<()> {
        let dim = 1usize << self.width();
        match &self.kind {
            LayerKind::PhaseDiagonal { exponents, .. } if exponents.len() != dim => {
                Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: exponents.len(),
                })
            }
            LayerKind::Permutation { perm, block_qubits } => {
                if perm.len() * block_qubits != self.width() {
                    return Err(Error::InvalidParameter(format!(
                        "permutation of {} blocks of {} qubits does not cover {} targets",
                        perm.len(),
                        block_qubits,
                        self.width()
                    )));
                }
                let mut seen = vec![false; perm.len()];
                for &p in perm {
                    if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                        return Err(Error::InvalidParameter(format!(
                            "{perm:?} is not a permutation"
                        )));
                    }
                }
                Ok(())
            }
            LayerKind::Custom { entries } if entries.len() != dim * dim => {
                Err(Error::DimensionMismatch {
                    expected: dim * dim,
                    actual: entries.len(),
                })
            }
            _ => Ok(()),
        }
    }

    /// Checks targets are distinct and inside a `num_qubits` register.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let mut seen = vec![false; num_qubits];
        for &q in &self.targets {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        self.check_parameters()
    }

    /// The `2^w x 2^w` matrix on the target sub-register.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.width();
        let mut m = DMatrix::zeros(dim, dim);
        let mut column = vec![Complex64::new(0.0, 0.0); dim];
        for c in 0..dim {
            column.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            column[c] = Complex64::new(1.0, 0.0);
            self.kernel(&mut column, &mut FftPlanner::new());
            for (r, a) in column.iter().enumerate() {
                m[(r, c)] = *a;
            }
        }
        m
    }

    /// Max entrywise deviation of `U†U` from the identity; errors above 1e-10.
    pub fn check_unitary(&self) -> Result<f64> {
        self.check_parameters()?;
        let m = self.matrix();
        let prod = m.adjoint() * &m;
        let dev = (0..prod.nrows())
            .flat_map(|r| (0..prod.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| {
                let id = if r == c { 1.0 } else { 0.0 };
                (prod[(r, c)] - Complex64::new(id, 0.0)).norm()
            })
            .fold(0.0, f64::max);
        if dev > OPERATOR_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(dev)
    }

    /// Transpose in the computational basis (same targets).
    pub fn transpose(&self) -> UnitaryLayer {
        match &self.kind {
            // symmetric kernels
            LayerKind::HadamardAll | LayerKind::Qft | LayerKind::PhaseDiagonal { .. } => self.clone(),
            _ => {
                let m = self.matrix().transpose();
                let dim = m.nrows();
                let entries = (0..dim)
                    .flat_map(|r| (0..dim).map(move |c| (r, c)))
                    .map(|(r, c)| m[(r, c)])
                    .collect();
                UnitaryLayer {
                    kind: LayerKind::Custom { entries },
                    targets: self.targets.clone(),
                }
            }
        }
    }

    /// Applies the operator to one gathered sub-register vector in place.
    fn kernel(&self, buf: &mut [Complex64], planner: &mut FftPlanner<f64>) {
        let dim = buf.len();
        match &self.kind {
            LayerKind::HadamardAll => {
                let mut h = 1;
                while h < dim {
                    for start in (0..dim).step_by(2 * h) {
                        for j in start..start + h {
                            let (a, b) = (buf[j], buf[j + h]);
                            buf[j] = a + b;
                            buf[j + h] = a - b;
                        }
                    }
                    h *= 2;
                }
                let s = (dim as f64).sqrt().recip();
                buf.iter_mut().for_each(|a| *a *= s);
            }
            LayerKind::Qft => {
                if dim > 1 {
                    // rustfft's inverse transform uses the e^{+2πi xy/N} kernel
                    planner.plan_fft_inverse(dim).process(buf);
                }
                let s = (dim as f64).sqrt().recip();
                buf.iter_mut().for_each(|a| *a *= s);
            }
            LayerKind::PhaseDiagonal { exponents, modulus } => {
                for (a, &e) in buf.iter_mut().zip(exponents) {
                    *a *= root_of_unity(e, *modulus);
                }
            }
            LayerKind::Permutation { perm, block_qubits } => {
                let t = perm.len();
                let bq = *block_qubits;
                let mask = (1usize << bq) - 1;
                let src = buf.to_vec();
                for (input, amp) in src.into_iter().enumerate() {
                    // block k of the input occupies bits [(t-1-k)*bq, (t-k)*bq)
                    let block = |v: usize, k: usize| (v >> ((t - 1 - k) * bq)) & mask;
                    let mut output = 0usize;
                    for k in 0..t {
                        output = (output << bq) | block(input, perm[k]);
                    }
                    buf[output] = amp;
                }
            }
            LayerKind::Custom { entries } => {
                let src = buf.to_vec();
                for (r, out) in buf.iter_mut().enumerate() {
                    *out = entries[r * dim..(r + 1) * dim]
                        .iter()
                        .zip(&src)
                        .map(|(m, v)| m * v)
                        .sum();
                }
            }
        }
    }
}

/// Applies `layer` to a raw amplitude vector over `num_qubits` qubits.
pub fn apply_layer_in_place(
    amplitudes: &mut [Complex64],
    num_qubits: usize,
    layer: &UnitaryLayer,
) -> Result<()> {
    if amplitudes.len() != 1usize << num_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << num_qubits,
            actual: amplitudes.len(),
        });
    }
    layer.validate(num_qubits)?;
    let w = layer.width();
    let sub_dim = 1usize << w;
    let target_offsets: Vec<usize> = (0..sub_dim)
        .map(|s| {
            layer
                .targets
                .iter()
                .enumerate()
                .filter(|(k, _)| (s >> (w - 1 - k)) & 1 == 1)
                .map(|(_, &q)| 1usize << (num_qubits - 1 - q))
                .sum()
        })
        .collect();
    let target_mask: usize = target_offsets[sub_dim - 1];
    let mut planner = FftPlanner::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); sub_dim];
    for base in 0..amplitudes.len() {
        if base & target_mask != 0 {
            continue;
        }
        for (b, &off) in buf.iter_mut().zip(&target_offsets) {
            *b = amplitudes[base | off];
        }
        layer.kernel(&mut buf, &mut planner);
        for (b, &off) in buf.iter().zip(&target_offsets) {
            amplitudes[base | off] = *b;
        }
    }
    Ok(())
}

/// Returns `U · state`, `U` acting as `layer` on its targets.
pub fn apply_layer(state: &PureState, layer: &UnitaryLayer) -> Result<PureState> {
    let mut amps = state.amplitudes().to_vec();
    apply_layer_in_place(&mut amps, state.num_qubits(), layer)?;
    Ok(PureState::from_parts(amps, state.is_normalized()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amps(v: &[(f64, f64)]) -> Vec<Complex64> {
        v.iter().map(|&(r, i)| Complex64::new(r, i)).collect()
    }

    fn assert_close(a: &[Complex64], b: &[Complex64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() <= tol, "{a:?} != {b:?}");
        }
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_layer(&PureState::zero(1), &UnitaryLayer::hadamard_all(vec![0])).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(s.amplitudes(), &amps(&[(h, 0.0), (h, 0.0)]), 1e-15);
    }

    #[test]
    fn identity_permutation_is_identity() {
        let s = PureState::from_amplitudes(amps(&[(0.5, 0.0), (0.0, 0.5), (-0.5, 0.0), (0.0, -0.5)]))
            .unwrap();
        let layer = UnitaryLayer::permutation(vec![0, 1], vec![0, 1], 1).unwrap();
        assert_eq!(apply_layer(&s, &layer).unwrap(), s);
    }

    #[test]
    fn phase_diagonal_and_example() {
        // f(x) = x0·x1 on the uniform 2-qubit state
        let s = PureState::from_amplitudes(vec![Complex64::new(0.5, 0.0); 4]).unwrap();
        let layer = UnitaryLayer::phase_diagonal(vec![0, 1], vec![0, 0, 0, 1], 2).unwrap();
        let out = apply_layer(&s, &layer).unwrap();
        assert_close(
            out.amplitudes(),
            &amps(&[(0.5, 0.0), (0.5, 0.0), (0.5, 0.0), (-0.5, 0.0)]),
            0.0,
        );
    }

    #[test]
    fn swap_permutation_moves_blocks() {
        // |01> -> |10> under the block swap
        let s = PureState::basis(2, 0b01).unwrap();
        let layer = UnitaryLayer::permutation(vec![0, 1], vec![1, 0], 1).unwrap();
        assert_eq!(apply_layer(&s, &layer).unwrap(), PureState::basis(2, 0b10).unwrap());
        // 3 blocks of 1 qubit, π = (1,2,0): |a0 a1 a2> -> |a1 a2 a0>
        let s = PureState::basis(3, 0b100).unwrap();
        let layer = UnitaryLayer::permutation(vec![0, 1, 2], vec![1, 2, 0], 1).unwrap();
        assert_eq!(apply_layer(&s, &layer).unwrap(), PureState::basis(3, 0b001).unwrap());
    }

    #[test]
    fn sub_register_targets_respect_order() {
        // X-like behaviour via a custom matrix on qubit 2 of 3
        let x = DMatrix::from_row_slice(
            2,
            2,
            &amps(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]),
        );
        let layer = UnitaryLayer::custom(vec![2], &x).unwrap();
        let s = apply_layer(&PureState::basis(3, 0b100).unwrap(), &layer).unwrap();
        assert_eq!(s, PureState::basis(3, 0b101).unwrap());
        // reversed target order on a 2-qubit permutation of basis labels
        let s = apply_layer(
            &PureState::basis(3, 0b010).unwrap(),
            &UnitaryLayer::permutation(vec![1, 2], vec![1, 0], 1).unwrap(),
        )
        .unwrap();
        assert_eq!(s, PureState::basis(3, 0b001).unwrap());
    }

    #[test]
    fn qft_matches_direct_kernel() {
        let n = 3;
        let dim = 1usize << n;
        let layer = UnitaryLayer::qft((0..n).collect());
        let m = layer.matrix();
        for x in 0..dim {
            for y in 0..dim {
                let expected = root_of_unity((x * y) as u64, dim as u64) / (dim as f64).sqrt();
                assert!((m[(y, x)] - expected).norm() < 1e-14);
            }
        }
        layer.check_unitary().unwrap();
    }

    #[test]
    fn errors_name_offending_qubit() {
        let layer = UnitaryLayer::hadamard_all(vec![0, 3]);
        match apply_layer(&PureState::zero(2), &layer) {
            Err(Error::QubitOutOfRange { index, num_qubits }) => {
                assert_eq!((index, num_qubits), (3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            UnitaryLayer::hadamard_all(vec![1, 1]).validate(2),
            Err(Error::DuplicateQubit(1))
        ));
        assert!(UnitaryLayer::permutation(vec![0, 1], vec![0, 0], 1).is_err());
        assert!(UnitaryLayer::phase_diagonal(vec![0], vec![0, 1, 1], 2).is_err());
    }

    #[test]
    fn custom_rejects_non_unitary() {
        let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(UnitaryLayer::custom(vec![0], &m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn roots_of_unity_are_exact_on_quarter_turns() {
        assert_eq!(root_of_unity(1, 4), Complex64::new(0.0, 1.0));
        assert_eq!(root_of_unity(2, 4), Complex64::new(-1.0, 0.0));
        assert_eq!(root_of_unity(3, 4), Complex64::new(0.0, -1.0));
        assert_eq!(root_of_unity(5, 2), Complex64::new(-1.0, 0.0));
        assert!((root_of_unity(1, 8) - Complex64::from_polar(1.0, TAU / 8.0)).norm() < 1e-15);
    }

    #[test]
    fn layer_json_round_trip() {
        let layer = UnitaryLayer::phase_diagonal(vec![1, 2], vec![0, 1, 2, 3], 4).unwrap();
        let json = serde_json::to_string(&layer).unwrap();
        assert!(json.contains("\"kind\":\"phase_diagonal\""));
        let back: UnitaryLayer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, layer);
    }
}
