//! Expansion constructions as declarative circuits over PRS blocks.
//!
//! Qubit 0 is the most significant bit, so a block at offset `o` and width
//! `n` acts on bits `q-o-n .. q-o` of the basis index.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits::dot_parity;
use crate::boolfn::{BooleanFunction, PrfKey};
use crate::budget::Budget;
use crate::corelin::{apply_layer_in_place, PureState, UnitaryLayer};
use crate::error::{Error, Result};
use crate::prsgen::{PrsGenerator, PrsKind};

/// A block's keyed function: an explicit truth table or a PRF key that is
/// materialized on evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionRef {
    Table(BooleanFunction),
    Key(PrfKey),
}

impl FunctionRef {
    pub fn materialize(&self, kind: PrsKind, width: usize) -> Result<BooleanFunction> {
        let f = match self {
            FunctionRef::Table(f) => f.clone(),
            FunctionRef::Key(k) => k.materialize(width, kind.modulus(width))?,
        };
        if f.input_bits() != width {
            return Err(Error::DimensionMismatch { expected: width, actual: f.input_bits() });
        }
        Ok(f)
    }

    fn check(&self, kind: PrsKind, width: usize) -> Result<()> {
        match self {
            FunctionRef::Table(_) => self.materialize(kind, width).and_then(|f| PrsGenerator::new(kind, f)).map(drop),
            FunctionRef::Key(_) => Ok(()),
        }
    }
}

impl From<BooleanFunction> for FunctionRef {
    fn from(f: BooleanFunction) -> Self {
        FunctionRef::Table(f)
    }
}

impl From<PrfKey> for FunctionRef {
    fn from(k: PrfKey) -> Self {
        FunctionRef::Key(k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub function: FunctionRef,
    pub kind: PrsKind,
    pub offset: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionSpec {
    pub total_qubits: usize,
    pub blocks: Vec<Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_layer: Option<UnitaryLayer>,
}

impl ConstructionSpec {
    pub fn validate(&self) -> Result<()> {
        let q = self.total_qubits;
        let width = self.blocks.first().map(|b| b.width);
        for b in &self.blocks {
            if b.width == 0 || b.offset + b.width > q {
                return Err(Error::InvalidParameter(format!(
                    "block at offset {} with width {} does not fit in {q} qubits",
                    b.offset, b.width
                )));
            }
            if Some(b.width) != width {
                return Err(Error::InvalidParameter("block widths differ".into()));
            }
            b.function.check(b.kind, b.width)?;
        }
        if let Some(layer) = &self.final_layer {
            layer.validate(q)?;
        }
        Ok(())
    }

    pub fn block_width(&self) -> Option<usize> {
        self.blocks.first().map(|b| b.width)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ConstructionSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn final_layer(kind: PrsKind, q: usize, include: bool) -> Option<UnitaryLayer> {
    include.then(|| kind.transform((0..q).collect()))
}

fn block(function: FunctionRef, kind: PrsKind, offset: usize, width: usize) -> Block {
    Block { function, kind, offset, width }
}

/// Two blocks with the same function at offsets 0 and `i`, on `n + i` qubits.
pub fn construction1(
    f: impl Into<FunctionRef>,
    n: usize,
    i: usize,
    kind: PrsKind,
    include_final_layer: bool,
) -> Result<ConstructionSpec> {
    if i < 1 || i >= n {
        return Err(Error::InvalidParameter(format!("need 1 <= i < n, got n={n}, i={i}")));
    }
    let f = f.into();
    let q = n + i;
    let spec = ConstructionSpec {
        total_qubits: q,
        blocks: vec![block(f.clone(), kind, 0, n), block(f, kind, i, n)],
        final_layer: final_layer(kind, q, include_final_layer),
    };
    spec.validate()?;
    Ok(spec)
}

/// Blocks `f1` at 0 and `f2` at `n`, then `f3` straddling them at `n/2`; `2n` qubits.
pub fn construction2(
    f1: impl Into<FunctionRef>,
    f2: impl Into<FunctionRef>,
    f3: impl Into<FunctionRef>,
    n: usize,
    kind: PrsKind,
    include_final_layer: bool,
) -> Result<ConstructionSpec> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("block width must be even and positive, got {n}")));
    }
    let q = 2 * n;
    let spec = ConstructionSpec {
        total_qubits: q,
        blocks: vec![
            block(f1.into(), kind, 0, n),
            block(f2.into(), kind, n, n),
            block(f3.into(), kind, n / 2, n),
        ],
        final_layer: final_layer(kind, q, include_final_layer),
    };
    spec.validate()?;
    Ok(spec)
}

/// Stairs: block `j` at offset `j·n/2` for `j = 0..ℓ`, on `(n/2)(ℓ+1)` qubits.
pub fn construction3(
    fs: Vec<FunctionRef>,
    n: usize,
    kind: PrsKind,
    include_final_layer: bool,
) -> Result<ConstructionSpec> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("block width must be even and positive, got {n}")));
    }
    if fs.is_empty() {
        return Err(Error::InvalidParameter("need at least one block".into()));
    }
    let q = n / 2 * (fs.len() + 1);
    let spec = ConstructionSpec {
        total_qubits: q,
        blocks: fs
            .into_iter()
            .enumerate()
            .map(|(j, f)| block(f, kind, j * n / 2, n))
            .collect(),
        final_layer: final_layer(kind, q, include_final_layer),
    };
    spec.validate()?;
    Ok(spec)
}

/// Runs the circuit on `|0…0>`.
pub fn evaluate(spec: &ConstructionSpec, budget: &Budget) -> Result<PureState> {
    spec.validate()?;
    let q = spec.total_qubits;
    budget.check_bytes(format!("{q}-qubit state"), (1u128 << q) * 16)?;
    let mut state = PureState::zero(q);
    for b in &spec.blocks {
        let gen = PrsGenerator::new(b.kind, b.function.materialize(b.kind, b.width)?)?;
        state = gen.apply_on(&state, b.offset)?;
    }
    if let Some(layer) = &spec.final_layer {
        let mut amps = state.into_amplitudes();
        apply_layer_in_place(&mut amps, q, layer)?;
        state = PureState::from_parts(amps, true);
    }
    Ok(state)
}

/// Binary-phase construction 1 from its explicit amplitude sum
/// `2^{-n} Σ_{x''} (-1)^{f(x'x'') + y·(x''0^i) + f(y)}` on `|x'>|y>`, followed
/// by a directly summed `H^{⊗(n+i)}` when requested.
pub fn closed_form_construction1(
    f: &BooleanFunction,
    n: usize,
    i: usize,
    with_final_layer: bool,
    budget: &Budget,
) -> Result<PureState> {
    if f.range_modulus() != 2 {
        return Err(Error::Unsupported("closed form is for binary phase only".into()));
    }
    if f.input_bits() != n || i < 1 || i >= n {
        return Err(Error::InvalidParameter(format!(
            "need a function on n={n} bits and 1 <= i < n, got {} bits, i={i}",
            f.input_bits()
        )));
    }
    let q = n + i;
    let dim = 1usize << q;
    budget.check_bytes(format!("{q}-qubit state"), dim as u128 * 16)?;
    if with_final_layer {
        budget.check_count("direct Hadamard sum", (dim as u128) * (dim as u128))?;
    }
    let sign = |e: u64| if e & 1 == 0 { 1.0 } else { -1.0 };
    let scale = ((1u64 << n) as f64).recip();
    let mut pre = vec![0.0f64; dim];
    for xp in 0..1u64 << i {
        for y in 0..1u64 << n {
            let s: f64 = (0..1u64 << (n - i))
                .map(|xpp| {
                    let x = (xp << (n - i)) | xpp;
                    sign(f.eval(x) + dot_parity(y, xpp << i) + f.eval(y))
                })
                .sum();
            pre[((xp << n) | y) as usize] = s * scale;
        }
    }
    let amps: Vec<Complex64> = if with_final_layer {
        let h = (dim as f64).sqrt().recip();
        (0..dim as u64)
            .map(|z| {
                let s: f64 = pre
                    .iter()
                    .enumerate()
                    .map(|(w, &a)| sign(dot_parity(z, w as u64)) * a)
                    .sum();
                Complex64::new(s * h, 0.0)
            })
            .collect()
    } else {
        pre.into_iter().map(|a| Complex64::new(a, 0.0)).collect()
    };
    Ok(PureState::from_parts(amps, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::enumerate_all;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_fn(n: usize) -> BooleanFunction {
        BooleanFunction::constant(n, 2, 0).unwrap()
    }

    #[test]
    fn construction_shapes() {
        let c = construction1(zero_fn(2), 2, 1, PrsKind::BinaryPhase, true).unwrap();
        assert_eq!(c.total_qubits, 3);
        assert_eq!(c.blocks.iter().map(|b| b.offset).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(c.blocks[0].function, c.blocks[1].function);
        assert!(construction1(zero_fn(2), 2, 2, PrsKind::BinaryPhase, true).is_err());
        assert!(construction1(zero_fn(2), 2, 0, PrsKind::BinaryPhase, true).is_err());

        let c = construction2(zero_fn(2), zero_fn(2), zero_fn(2), 2, PrsKind::BinaryPhase, false).unwrap();
        assert_eq!(c.total_qubits, 4);
        assert_eq!(c.blocks.iter().map(|b| b.offset).collect::<Vec<_>>(), vec![0, 2, 1]);
        assert!(construction2(zero_fn(3), zero_fn(3), zero_fn(3), 3, PrsKind::BinaryPhase, false).is_err());

        let c = construction3(vec![zero_fn(2).into(); 3], 2, PrsKind::BinaryPhase, false).unwrap();
        assert_eq!(c.total_qubits, 4);
        assert_eq!(c.blocks.iter().map(|b| b.offset).collect::<Vec<_>>(), vec![0, 1, 2]);
        for n in [2, 4] {
            for l in 1..=5 {
                let c = construction3(vec![zero_fn(n).into(); l], n, PrsKind::BinaryPhase, false).unwrap();
                assert_eq!(c.total_qubits, n / 2 * (l + 1));
            }
        }
    }

    #[test]
    fn wrong_modulus_rejected() {
        let f = zero_fn(2);
        assert!(construction1(f, 2, 1, PrsKind::GeneralPhase, true).is_err());
    }

    #[test]
    fn construction1_zero_function_amplitudes() {
        let b = Budget::default();
        let c = construction1(zero_fn(2), 2, 1, PrsKind::BinaryPhase, false).unwrap();
        let s = evaluate(&c, &b).unwrap();
        let expected = [0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
        let s = evaluate(&construction1(zero_fn(2), 2, 1, PrsKind::BinaryPhase, true).unwrap(), &b).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [h, 0.0, h, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn empty_and_single_block() {
        let b = Budget::default();
        let empty = ConstructionSpec { total_qubits: 2, blocks: vec![], final_layer: None };
        assert_eq!(evaluate(&empty, &b).unwrap(), PureState::zero(2));

        let f = BooleanFunction::from_fn(3, 8, |x| 3 * x + 1).unwrap();
        let single = ConstructionSpec {
            total_qubits: 3,
            blocks: vec![block(f.clone().into(), PrsKind::GeneralPhase, 0, 3)],
            final_layer: None,
        };
        let gen = PrsGenerator::new(PrsKind::GeneralPhase, f).unwrap();
        let lhs = evaluate(&single, &b).unwrap();
        assert!(lhs.max_abs_diff(&gen.prepare(&b).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn construction2_zero_functions_matches_dense_product() {
        // all-zero phases: H on {0,1}, H on {2,3} then H on {1,2}; build the
        // operator as explicit Kronecker products and compare
        let b = Budget::default();
        let spec = construction2(zero_fn(2), zero_fn(2), zero_fn(2), 2, PrsKind::BinaryPhase, false).unwrap();
        let out = evaluate(&spec, &b).unwrap();
        let h1 = nalgebra::DMatrix::from_fn(2, 2, |r, c| {
            Complex64::new(if r & c == 1 { -1.0 } else { 1.0 } * std::f64::consts::FRAC_1_SQRT_2, 0.0)
        });
        let id = nalgebra::DMatrix::<Complex64>::identity(2, 2);
        let kron = |ms: [&nalgebra::DMatrix<Complex64>; 4]| {
            ms[1..].iter().fold(ms[0].clone(), |acc, m| acc.kronecker(m))
        };
        let layer1 = kron([&h1, &h1, &h1, &h1]);
        let layer2 = kron([&id, &h1, &h1, &id]);
        let mut zero = nalgebra::DVector::<Complex64>::zeros(16);
        zero[0] = Complex64::new(1.0, 0.0);
        let expected = layer2 * layer1 * zero;
        for (a, e) in out.amplitudes().iter().zip(expected.iter()) {
            assert!((a - e).norm() < 1e-14);
        }
    }

    #[test]
    fn closed_form_matches_circuit_small() {
        let b = Budget::default();
        for f in enumerate_all(2, 2, &b).unwrap() {
            for fin in [false, true] {
                let spec = construction1(f.clone(), 2, 1, PrsKind::BinaryPhase, fin).unwrap();
                let circuit = evaluate(&spec, &b).unwrap();
                let closed = closed_form_construction1(&f, 2, 1, fin, &b).unwrap();
                assert!(circuit.max_abs_diff(&closed).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_is_normalized() {
        let b = Budget::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = BooleanFunction::sample_uniform(4, 2, &mut rng).unwrap();
            let s = closed_form_construction1(&f, 4, 2, true, &b).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let key = PrfKey::new((0..16).collect(), "a").unwrap();
        let spec = construction1(key, 3, 1, PrsKind::GeneralPhase, true).unwrap();
        let back = ConstructionSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec);
        let b = Budget::default();
        assert_eq!(evaluate(&back, &b).unwrap(), evaluate(&spec, &b).unwrap());
        let bad = spec.to_json().unwrap().replace("\"offset\": 1", "\"offset\": 3");
        assert!(ConstructionSpec::from_json(&bad).is_err());
    }
}
