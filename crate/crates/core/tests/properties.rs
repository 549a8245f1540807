mod common;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::sample::subsequence;

use prs_lab::boolfn::{enumerate_all, BooleanFunction};
use prs_lab::combinatorics::{perm_state_norm_sq, perm_state_norm_sq_by_classes, TupleClass};
use prs_lab::corelin::{
    apply_layer, partial_trace, trace_distance, trace_distance_pure, DensityOperator, PureState, UnitaryLayer,
};
use prs_lab::prsgen::{PrsGenerator, PrsKind};
use prs_lab::Budget;

use common::{random_state, random_unitary, rng};

const QUBITS: usize = 4;

fn norm_kept(state: &PureState, layer: &UnitaryLayer) -> f64 {
    (apply_layer(state, layer).unwrap().norm_sqr() - 1.0).abs()
}

fn targets() -> impl Strategy<Value = Vec<usize>> {
    subsequence((0..QUBITS).collect::<Vec<_>>(), 1..=QUBITS).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hadamard_preserves_norm(seed in any::<u64>(), t in targets()) {
        let s = random_state(&mut rng(seed), QUBITS);
        prop_assert!(norm_kept(&s, &UnitaryLayer::hadamard_all(t)) < 1e-12);
    }

    #[test]
    fn qft_preserves_norm(seed in any::<u64>(), t in targets()) {
        let s = random_state(&mut rng(seed), QUBITS);
        prop_assert!(norm_kept(&s, &UnitaryLayer::qft(t)) < 1e-12);
    }

    #[test]
    fn phase_preserves_norm(seed in any::<u64>(), t in targets(), log_m in 0u32..5) {
        let mut r = rng(seed);
        let s = random_state(&mut r, QUBITS);
        let m = 1u64 << log_m;
        let exps = (0..1u64 << t.len()).map(|x| (x * 7 + seed) % m).collect();
        let layer = UnitaryLayer::phase_diagonal(t, exps, m).unwrap();
        prop_assert!(norm_kept(&s, &layer) < 1e-12);
    }

    #[test]
    fn permutation_preserves_norm(seed in any::<u64>(), perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let s = random_state(&mut rng(seed), QUBITS);
        let layer = UnitaryLayer::permutation((0..QUBITS).collect(), perm, 1).unwrap();
        prop_assert!(norm_kept(&s, &layer) < 1e-12);
    }

    #[test]
    fn custom_preserves_norm(seed in any::<u64>(), t in subsequence(vec![0usize, 1, 2, 3], 1..=2)) {
        let mut r = rng(seed);
        let s = random_state(&mut r, QUBITS);
        let u = random_unitary(&mut r, 1 << t.len());
        let layer = UnitaryLayer::custom(t, &u).unwrap();
        prop_assert!(norm_kept(&s, &layer) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Tr_E of `(I ⊗ A)|χ>` is unchanged for an isometry `A` on E
    /// (a unitary on E plus a fresh ancilla).
    #[test]
    fn purification_invariance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let chi = random_state(&mut r, 4);
        let before = partial_trace(&chi, &[2, 3]).unwrap();
        let widened = chi.tensor(&PureState::zero(1));
        let a = UnitaryLayer::custom(vec![2, 3, 4], &random_unitary(&mut r, 8)).unwrap();
        let after = partial_trace(&apply_layer(&widened, &a).unwrap(), &[2, 3, 4]).unwrap();
        prop_assert!(before.max_abs_diff(&after).unwrap() < 1e-10);
    }

    /// `Σ_x U|x>|x> = Σ_x |x> Uᵀ|x>`.
    #[test]
    fn transpose_flip(seed in any::<u64>(), q in 1usize..=4) {
        let u = random_unitary(&mut rng(seed), 1 << q);
        let dim = 1usize << q;
        let layer = UnitaryLayer::custom((0..q).collect(), &u).unwrap();
        let tr = layer.transpose();
        let mut lhs = vec![Complex64::new(0.0, 0.0); dim * dim];
        let mut rhs = lhs.clone();
        for x in 0..dim {
            let bx = PureState::basis(q, x).unwrap();
            let ux = apply_layer(&bx, &layer).unwrap();
            let utx = apply_layer(&bx, &tr).unwrap();
            for y in 0..dim {
                lhs[y * dim + x] += ux.amplitudes()[y];
                rhs[x * dim + y] += utx.amplitudes()[y];
            }
        }
        let dev = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-12);
    }

    #[test]
    fn trace_distance_triangle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho: Vec<DensityOperator> = (0..3)
            .map(|_| partial_trace(&random_state(&mut r, 4), &[3]).unwrap())
            .collect();
        let d = |a: usize, b: usize| trace_distance(&rho[a], &rho[b]).unwrap();
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-10);
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 0) < 1e-12);
    }

    #[test]
    fn partial_trace_contracts(seed in any::<u64>(), traced in subsequence(vec![0usize, 1, 2], 1..=2)) {
        let mut r = rng(seed);
        let (a, b) = (random_state(&mut r, 3), random_state(&mut r, 3));
        let full = trace_distance(&DensityOperator::pure(&a), &DensityOperator::pure(&b)).unwrap();
        prop_assert!((full - trace_distance_pure(&a, &b).unwrap()).abs() < 1e-10);
        let reduced = trace_distance(&partial_trace(&a, &traced).unwrap(), &partial_trace(&b, &traced).unwrap()).unwrap();
        prop_assert!(reduced <= full + 1e-10);
    }

    #[test]
    fn prepared_magnitudes_are_flat(seed in any::<u64>(), n in 1usize..=5, general in any::<bool>()) {
        let kind = if general { PrsKind::GeneralPhase } else { PrsKind::BinaryPhase };
        let f = BooleanFunction::sample_uniform(n, kind.modulus(n), &mut rng(seed)).unwrap();
        let s = PrsGenerator::new(kind, f).unwrap().prepare(&Budget::default()).unwrap();
        let expected = ((1u64 << n) as f64).sqrt().recip();
        for a in s.amplitudes() {
            prop_assert!((a.norm() - expected).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn set_state_norm_two_paths(elements in prop::collection::vec(0u64..4, 1..=6)) {
        let by_perm = perm_state_norm_sq(&elements).unwrap();
        let by_class = perm_state_norm_sq_by_classes(&elements);
        prop_assert_eq!(by_perm, num_rational::BigRational::from_integer(by_class.into()));
        let c = TupleClass::new(elements.clone());
        prop_assert_eq!(c.unique_indices.len(), c.class_sizes().iter().filter(|&&s| s == 1).count());
    }
}

#[test]
fn delta_identity_over_all_functions() {
    let b = Budget::default();
    for n in 1..=3 {
        let fs: Vec<BooleanFunction> = enumerate_all(n, 2, &b).unwrap().collect();
        assert_eq!(fs.len() as u128, 1u128 << (1u32 << n));
        for x in 0..1u64 << n {
            for y in 0..1u64 << n {
                let s: i64 = fs.iter().map(|f| if (f.eval(x) + f.eval(y)) % 2 == 0 { 1 } else { -1 }).sum();
                assert_eq!(s, if x == y { fs.len() as i64 } else { 0 });
            }
        }
    }
}

#[test]
fn custom_layer_rejects_non_unitary() {
    let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
    assert!(UnitaryLayer::custom(vec![0], &m).is_err());
}
