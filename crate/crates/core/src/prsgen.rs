//! Phase-type PRS generators as unitaries.
//!
//! A generator is `PRS_f = U_f ∘ T` where `T` is `H^{⊗n}` (binary phase) or
//! the `N = 2^n` quantum Fourier transform (general phase) and
//! `U_f |x> = ω_m^{f(x)} |x>` with `m = 2` or `m = N`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits::dot_parity;
use crate::boolfn::{BooleanFunction, PrfKey};
use crate::budget::Budget;
use crate::corelin::{apply_layer_in_place, root_of_unity, PureState, UnitaryLayer};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrsKind {
    BinaryPhase,
    GeneralPhase,
}

impl PrsKind {
    /// Range modulus of the phase function on `n` qubits.
    pub fn modulus(self, n: usize) -> u64 {
        match self {
            PrsKind::BinaryPhase => 2,
            PrsKind::GeneralPhase => 1u64 << n,
        }
    }

    /// `H^{⊗w}` or `QFT` on the given qubits.
    pub fn transform(self, targets: Vec<usize>) -> UnitaryLayer {
        match self {
            PrsKind::BinaryPhase => UnitaryLayer::hadamard_all(targets),
            PrsKind::GeneralPhase => UnitaryLayer::qft(targets),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrsKind::BinaryPhase => "binary",
            PrsKind::GeneralPhase => "general",
        }
    }
}

impl std::str::FromStr for PrsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "binary_phase" => Ok(PrsKind::BinaryPhase),
            "general" | "general_phase" => Ok(PrsKind::GeneralPhase),
            _ => Err(Error::Config(format!("unknown PRS kind {s:?} (binary|general)"))),
        }
    }
}

/// `PRS_f` on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PrsGenerator {
    kind: PrsKind,
    function: BooleanFunction,
}

impl PrsGenerator {
    pub fn new(kind: PrsKind, function: BooleanFunction) -> Result<Self> {
        let n = function.input_bits();
        if function.range_modulus() != kind.modulus(n) {
            return Err(Error::InvalidParameter(format!(
                "{} phase on {n} qubits needs modulus {}, function has {}",
                kind.name(),
                kind.modulus(n),
                function.range_modulus()
            )));
        }
        Ok(PrsGenerator { kind, function })
    }

    /// Materializes the key's truth table.
    pub fn from_key(kind: PrsKind, n: usize, key: &PrfKey) -> Result<Self> {
        Self::new(kind, key.materialize(n, kind.modulus(n))?)
    }

    pub fn kind(&self) -> PrsKind {
        self.kind
    }

    pub fn num_qubits(&self) -> usize {
        self.function.input_bits()
    }

    pub fn function(&self) -> &BooleanFunction {
        &self.function
    }

    /// `2^{-n/2} Σ_x ω_m^{f(x)} |x>`, evaluated from the formula.
    pub fn prepare(&self, budget: &Budget) -> Result<PureState> {
        let n = self.num_qubits();
        budget.check_bytes(format!("{n}-qubit state"), (1u128 << n) * 16)?;
        let m = self.function.range_modulus();
        let scale = ((1u64 << n) as f64).sqrt().recip();
        let amps: Vec<Complex64> = self
            .function
            .table()
            .iter()
            .map(|&v| root_of_unity(v, m) * scale)
            .collect();
        Ok(PureState::from_parts_normalized(amps))
    }

    /// `[T, U_f]` acting on qubits `offset..offset + n`.
    pub fn layers(&self, offset: usize) -> [UnitaryLayer; 2] {
        let targets: Vec<usize> = (offset..offset + self.num_qubits()).collect();
        let phase = UnitaryLayer {
            kind: crate::corelin::LayerKind::PhaseDiagonal {
                exponents: self.function.table().to_vec(),
                modulus: self.function.range_modulus(),
            },
            targets: targets.clone(),
        };
        [self.kind.transform(targets), phase]
    }

    /// `PRS_f · input` for an `n`-qubit input.
    pub fn apply_to_state(&self, input: &PureState) -> Result<PureState> {
        if input.num_qubits() != self.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits(),
                actual: input.num_qubits(),
            });
        }
        self.apply_on(input, 0)
    }

    /// `PRS_f` on the sub-register starting at `offset`, identity elsewhere.
    pub fn apply_on(&self, state: &PureState, offset: usize) -> Result<PureState> {
        let mut amps = state.amplitudes().to_vec();
        for layer in self.layers(offset) {
            apply_layer_in_place(&mut amps, state.num_qubits(), &layer)?;
        }
        Ok(PureState::from_parts(amps, state.is_normalized()))
    }
}

/// `U_x = Σ_y ω^{x·y} |y><y|`: `(-1)^{x·y}` with the bitwise inner product
/// for binary phase, `ω_N^{xy}` with the integer product for general phase.
pub fn phase_shift_unitary(kind: PrsKind, n: usize, x: u64) -> Result<UnitaryLayer> {
    if n < 64 && x >> n != 0 {
        return Err(Error::InvalidParameter(format!("x = {x} does not fit in {n} bits")));
    }
    let dim = 1u64 << n;
    let exponents: Vec<u64> = (0..dim)
        .map(|y| match kind {
            PrsKind::BinaryPhase => dot_parity(x, y),
            PrsKind::GeneralPhase => ((u128::from(x) * u128::from(y)) % u128::from(dim)) as u64,
        })
        .collect();
    UnitaryLayer::phase_diagonal((0..n).collect(), exponents, kind.modulus(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corelin::apply_layer;

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    fn close(a: &PureState, b: &[Complex64], tol: f64) -> bool {
        a.amplitudes().iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn prepare_examples() {
        let b = Budget::default();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let g = PrsGenerator::new(PrsKind::BinaryPhase, BooleanFunction::constant(1, 2, 0).unwrap()).unwrap();
        assert!(close(&g.prepare(&b).unwrap(), &real(&[h, h]), 1e-15));

        let f = BooleanFunction::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        let g = PrsGenerator::new(PrsKind::BinaryPhase, f).unwrap();
        assert!(close(&g.prepare(&b).unwrap(), &real(&[0.5, -0.5, -0.5, 0.5]), 1e-15));

        let f = BooleanFunction::new(1, 2, vec![0, 1]).unwrap();
        let g = PrsGenerator::new(PrsKind::GeneralPhase, f).unwrap();
        assert!(close(&g.prepare(&b).unwrap(), &real(&[h, -h]), 1e-15));
    }

    #[test]
    fn modulus_must_match_kind() {
        let f = BooleanFunction::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        assert!(PrsGenerator::new(PrsKind::GeneralPhase, f).is_err());
    }

    #[test]
    fn circuit_on_zero_equals_prepare() {
        let b = Budget::default();
        for kind in [PrsKind::BinaryPhase, PrsKind::GeneralPhase] {
            let f = BooleanFunction::from_fn(3, kind.modulus(3), |x| x * x + 3).unwrap();
            let g = PrsGenerator::new(kind, f).unwrap();
            let via_circuit = g.apply_to_state(&PureState::zero(3)).unwrap();
            assert!(via_circuit.max_abs_diff(&g.prepare(&b).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn binary_basis_input_example() {
        let g = PrsGenerator::new(PrsKind::BinaryPhase, BooleanFunction::constant(2, 2, 0).unwrap()).unwrap();
        let out = g.apply_to_state(&PureState::basis(2, 0b10).unwrap()).unwrap();
        assert!(close(&out, &real(&[0.5, 0.5, -0.5, -0.5]), 1e-15));
        assert!(g.apply_to_state(&PureState::zero(3)).is_err());
    }

    #[test]
    fn phase_shift_examples() {
        let id = phase_shift_unitary(PrsKind::BinaryPhase, 2, 0).unwrap();
        assert_eq!(id.matrix(), nalgebra::DMatrix::identity(4, 4));
        let u = phase_shift_unitary(PrsKind::BinaryPhase, 1, 1).unwrap().matrix();
        assert_eq!(u[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(u[(1, 1)], Complex64::new(-1.0, 0.0));
        let u = phase_shift_unitary(PrsKind::GeneralPhase, 2, 0b01).unwrap().matrix();
        let diag: Vec<Complex64> = (0..4).map(|k| u[(k, k)]).collect();
        assert_eq!(
            diag,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, -1.0)
            ]
        );
    }

    #[test]
    fn basis_action_factors_through_phase_shift() {
        // PRS_f |x> = U_x PRS_f |0> for a couple of functions
        let b = Budget::default();
        for kind in [PrsKind::BinaryPhase, PrsKind::GeneralPhase] {
            let f = BooleanFunction::from_fn(2, kind.modulus(2), |x| (5 * x + 1) % 7).unwrap();
            let g = PrsGenerator::new(kind, f).unwrap();
            let zero = g.prepare(&b).unwrap();
            for x in 0..4 {
                let lhs = g.apply_to_state(&PureState::basis(2, x as usize).unwrap()).unwrap();
                let rhs = apply_layer(&zero, &phase_shift_unitary(kind, 2, x).unwrap()).unwrap();
                assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
            }
        }
    }
}
