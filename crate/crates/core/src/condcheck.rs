//! Executable check of the generalization condition for a PRS generator and
//! a candidate witness `(U_x, V, W)`:
//!
//! * cond-1: `G_k |x> = U_x G_k |0>` for every key `k` and input `x`;
//! * cond-2: `Σ_x |x> ⊗ U_xᵀ |y> = scale · V|y> ⊗ W|y>` for every `y`.
//!
//! `scale` is explicit because the two sides of cond-2 differ in norm by
//! `√N` for the natural witnesses.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::{enumerate_all, BooleanFunction, PrfKey};
use crate::budget::Budget;
use crate::corelin::{apply_layer, PureState, UnitaryLayer, OPERATOR_TOL};
use crate::error::{Error, Result};
use crate::moments::FunctionSpace;
use crate::prsgen::{phase_shift_unitary, PrsGenerator, PrsKind};

/// Largest register for which cond-2 is checked (the left side lives on `2n` qubits).
pub const MAX_COND2_QUBITS: usize = 6;

/// Anything that maps basis inputs to states; third-party generators plug
/// in here.
pub trait StateGenerator {
    fn num_qubits(&self) -> usize;
    fn apply_to_basis(&self, x: u64) -> Result<PureState>;
}

impl StateGenerator for PrsGenerator {
    fn num_qubits(&self) -> usize {
        PrsGenerator::num_qubits(self)
    }

    fn apply_to_basis(&self, x: u64) -> Result<PureState> {
        self.apply_to_state(&PureState::basis(self.num_qubits(), x as usize)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionWitness {
    pub u_family: BTreeMap<u64, UnitaryLayer>,
    pub v: UnitaryLayer,
    pub w: UnitaryLayer,
    pub scale: f64,
}

impl ConditionWitness {
    fn from_phase_shifts(kind: PrsKind, n: usize) -> Result<Self> {
        let u_family = (0..1u64 << n)
            .map(|x| Ok((x, phase_shift_unitary(kind, n, x)?)))
            .collect::<Result<_>>()?;
        Ok(ConditionWitness {
            u_family,
            v: kind.transform((0..n).collect()),
            w: UnitaryLayer::identity((0..n).collect()),
            scale: ((1u64 << n) as f64).sqrt(),
        })
    }

    /// `U_x = diag((-1)^{x·y})`, `V = H^{⊗n}`, `W = I`, `scale = √N`.
    pub fn binary(n: usize) -> Result<Self> {
        Self::from_phase_shifts(PrsKind::BinaryPhase, n)
    }

    /// `U_x = diag(ω_N^{xy})`, `V = QFT`, `W = I`, `scale = √N`.
    pub fn general(n: usize) -> Result<Self> {
        Self::from_phase_shifts(PrsKind::GeneralPhase, n)
    }

    pub fn for_kind(kind: PrsKind, n: usize) -> Result<Self> {
        Self::from_phase_shifts(kind, n)
    }

    /// Every `U_x` present, of width `n`, and unitary.
    pub fn validate(&self, n: usize) -> Result<()> {
        for x in 0..1u64 << n {
            let u = self.u_family.get(&x).ok_or(Error::MissingWitness(x as usize))?;
            u.validate(n)?;
            let dev = u.check_unitary()?;
            if dev > OPERATOR_TOL {
                return Err(Error::NotUnitary(dev));
            }
        }
        self.v.validate(n)?;
        self.w.validate(n)?;
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<u64>,
    /// Worst generator index and, for phase PRS, its hex truth table (cond-1 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: u8,
    pub n: usize,
    pub passed: bool,
    pub checked: u64,
    pub max_deviation: f64,
    pub failures: Vec<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl ConditionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The truth tables of a function space for generators of the given kind.
pub fn functions_for(kind: PrsKind, n: usize, space: FunctionSpace, budget: &Budget) -> Result<Vec<BooleanFunction>> {
    let m = kind.modulus(n);
    match space {
        FunctionSpace::Exhaustive => Ok(enumerate_all(n, m, budget)?.collect()),
        FunctionSpace::UniformSample { count, seed } => {
            budget.check_count("sampled functions", u128::from(count))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| BooleanFunction::sample_uniform(n, m, &mut rng)).collect()
        }
        FunctionSpace::PrfKeys { count, seed } => {
            budget.check_count("PRF keys", u128::from(count))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| PrfKey::random(&mut rng, "cond").materialize(n, m)).collect()
        }
    }
}

/// cond-1 over `count` generators built by `factory`, every `x`, max
/// amplitude deviation against `1e-10`. Failures are reported per `x` with
/// the worst deviation over generators.
pub fn check_cond1<G, F>(factory: F, count: u64, witness: &ConditionWitness, n: usize) -> Result<ConditionReport>
where
    G: StateGenerator,
    F: Fn(u64) -> Result<G> + Sync,
{
    witness.validate(n)?;
    let per_generator: Vec<Result<Vec<(f64, Option<u64>)>>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let gen = factory(k)?;
            if gen.num_qubits() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: gen.num_qubits() });
            }
            let zero = gen.apply_to_basis(0)?;
            (0..1u64 << n)
                .map(|x| {
                    let lhs = gen.apply_to_basis(x)?;
                    let rhs = apply_layer(&zero, &witness.u_family[&x])?;
                    Ok((lhs.max_abs_diff(&rhs)?, Some(k)))
                })
                .collect()
        })
        .collect();
    let mut worst: Vec<(f64, Option<u64>)> = vec![(0.0, None); 1 << n];
    for gen in per_generator {
        for (x, (dev, label)) in gen?.into_iter().enumerate() {
            if dev > worst[x].0 {
                worst[x] = (dev, label);
            }
        }
    }
    Ok(summarize(1, n, count << n, None, worst, |x, (dev, k)| Failure {
        x: Some(x),
        y: None,
        generator: k,
        function: None,
        max_deviation: dev,
    }))
}

/// cond-1 for the phase PRS of `kind` over a function space.
pub fn check_cond1_prs(
    kind: PrsKind,
    n: usize,
    space: FunctionSpace,
    witness: &ConditionWitness,
    budget: &Budget,
) -> Result<ConditionReport> {
    let fs = functions_for(kind, n, space, budget)?;
    let mut report = check_cond1(|k| PrsGenerator::new(kind, fs[k as usize].clone()), fs.len() as u64, witness, n)?;
    for f in &mut report.failures {
        f.function = f.generator.map(|k| fs[k as usize].to_hex());
    }
    Ok(report)
}

/// cond-2 for every basis `y`.
pub fn check_cond2(witness: &ConditionWitness, n: usize) -> Result<ConditionReport> {
    if n > MAX_COND2_QUBITS {
        return Err(Error::InvalidParameter(format!("cond-2 limited to n <= {MAX_COND2_QUBITS}")));
    }
    witness.validate(n)?;
    let transposed: Vec<UnitaryLayer> = (0..1u64 << n).map(|x| witness.u_family[&x].transpose()).collect();
    let dim = 1usize << n;
    let devs: Vec<Result<(f64, Option<u64>)>> = (0..dim as u64)
        .into_par_iter()
        .map(|y| {
            let basis = PureState::basis(n, y as usize)?;
            let mut lhs = Vec::with_capacity(dim * dim);
            for u in &transposed {
                lhs.extend_from_slice(apply_layer(&basis, u)?.amplitudes());
            }
            let rhs = apply_layer(&basis, &witness.v)?.tensor(&apply_layer(&basis, &witness.w)?);
            let dev = lhs
                .iter()
                .zip(rhs.amplitudes())
                .map(|(a, b)| (a - b * witness.scale).norm())
                .fold(0.0, f64::max);
            Ok((dev, None))
        })
        .collect();
    let devs = devs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(summarize(2, n, dim as u64, Some(witness.scale), devs, |y, (dev, _)| Failure {
        x: None,
        y: Some(y),
        generator: None,
        function: None,
        max_deviation: dev,
    }))
}

fn summarize(
    condition: u8,
    n: usize,
    checked: u64,
    scale: Option<f64>,
    devs: Vec<(f64, Option<u64>)>,
    to_failure: impl Fn(u64, (f64, Option<u64>)) -> Failure,
) -> ConditionReport {
    let max_deviation = devs.iter().map(|d| d.0).fold(0.0, f64::max);
    let failures: Vec<Failure> = devs
        .into_iter()
        .enumerate()
        .filter(|(_, d)| d.0 > OPERATOR_TOL)
        .map(|(i, d)| to_failure(i as u64, d))
        .collect();
    ConditionReport {
        condition,
        n,
        passed: failures.is_empty(),
        checked,
        max_deviation,
        failures,
        scale,
    }
}
