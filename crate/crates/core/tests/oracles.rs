//! Cross-checks against independently computed values and between code paths.

mod common;

use prs_lab::boolfn::enumerate_all;
use prs_lab::combinatorics::census;
use prs_lab::condcheck::{check_cond1_prs, ConditionWitness};
use prs_lab::corelin::DensityOperator;
use prs_lab::expand::{closed_form_construction1, construction1, construction2, construction3, evaluate, FunctionRef};
use prs_lab::moments::*;
use prs_lab::prsgen::{PrsGenerator, PrsKind};
use prs_lab::Budget;

use common::{random_unitary, rng};

fn exhaustive(source: Source, n: usize, i: usize, t: usize) -> MomentSpec {
    MomentSpec::new(source, n, i, t, PrsKind::BinaryPhase, FunctionSpace::Exhaustive)
}

// Distances computed by a separate dense numpy implementation (explicit
// Kronecker-product circuits, explicit symmetric projector, eigvalsh).
const PLAIN_N3_T2: f64 = 7.0 / 36.0;
const C1_N3_I1_T2: f64 = 0.5973056010028402;

#[test]
fn pinned_distances() {
    let b = Budget::default();
    let plain = compare_to_haar(&exhaustive(Source::PlainPrs, 3, 0, 2), Method::BruteForce, &b).unwrap();
    assert!((plain.haar_distance - PLAIN_N3_T2).abs() < 1e-12, "{}", plain.haar_distance);
    for method in [Method::BruteForce, Method::DeltaPairing] {
        let r = compare_to_haar(&exhaustive(Source::Construction1, 3, 1, 2), method, &b).unwrap();
        assert!((r.haar_distance - C1_N3_I1_T2).abs() < 1e-12, "{method:?}: {}", r.haar_distance);
    }
}

#[test]
fn exhaustive_distance_reproducible_bitwise() {
    let b = Budget::default();
    let s = exhaustive(Source::PlainPrs, 3, 0, 2);
    let a = compare_to_haar(&s, Method::BruteForce, &b).unwrap();
    let c = compare_to_haar(&s, Method::BruteForce, &b).unwrap();
    assert_eq!(a.haar_distance.to_bits(), c.haar_distance.to_bits());
    assert_eq!(a.moment.matrix(), c.moment.matrix());
}

#[test]
fn methods_agree_on_spot_checks_at_n4() {
    let b = Budget::default();
    for s in [exhaustive(Source::PlainPrs, 4, 0, 2), exhaustive(Source::Construction1, 4, 1, 1), exhaustive(Source::Construction1, 4, 3, 1)] {
        let brute = ensemble_moment_bruteforce(&s, &b).unwrap();
        let delta = ensemble_moment_deltapair(&s, &b).unwrap();
        assert!(brute.max_abs_diff(&delta).unwrap() < 1e-12, "{s:?}");
    }
}

#[test]
fn methods_agree_without_final_layer() {
    let b = Budget::default();
    let mut s = exhaustive(Source::Construction1, 3, 1, 2);
    s.final_layer = false;
    let brute = ensemble_moment_bruteforce(&s, &b).unwrap();
    let delta = ensemble_moment_deltapair(&s, &b).unwrap();
    assert!(brute.max_abs_diff(&delta).unwrap() < 1e-12);
}

#[test]
fn moments_are_density_operators() {
    let b = Budget::default();
    let m = ensemble_moment_deltapair(&exhaustive(Source::Construction1, 3, 2, 2), &b).unwrap();
    assert!((m.trace().re - 1.0).abs() < 1e-12);
    assert!(m.check_psd().is_ok());
    assert!(DensityOperator::new(m.into_matrix()).is_ok());
}

#[test]
fn distance_invariant_under_fixed_unitary() {
    let b = Budget::default();
    let mut r = rng(17);
    for (s, t) in [(exhaustive(Source::Construction1, 2, 1, 2), 2), (exhaustive(Source::PlainPrs, 3, 0, 2), 2), (exhaustive(Source::PlainPrs, 2, 0, 3), 3)] {
        let d = s.local_dim().unwrap();
        let m = ensemble_moment_bruteforce(&s, &b).unwrap();
        let u = random_unitary(&mut r, d);
        let before = haar_distance(&m, d, t, &b).unwrap();
        let after = haar_distance(&conjugate_moment(&m, &u, t).unwrap(), d, t, &b).unwrap();
        assert!((before - after).abs() < 1e-10, "{before} vs {after}");
    }
}

#[test]
fn construction1_distance_non_increasing_in_n() {
    let b = Budget::default();
    let d: Vec<f64> = [3, 4, 5]
        .iter()
        .map(|&n| compare_to_haar(&exhaustive(Source::Construction1, n, 1, 2), Method::DeltaPairing, &b).unwrap().haar_distance)
        .collect();
    assert!(d[1] <= d[0] + 1e-10 && d[2] <= d[1] + 1e-10, "{d:?}");
}

#[test]
fn closed_form_matches_circuit_all_small_functions() {
    let b = Budget::default();
    for (n, i) in [(2, 1), (3, 1), (3, 2)] {
        for f in enumerate_all(n, 2, &b).unwrap() {
            let c = evaluate(&construction1(f.clone(), n, i, PrsKind::BinaryPhase, true).unwrap(), &b).unwrap();
            let closed = closed_form_construction1(&f, n, i, true, &b).unwrap();
            assert!(c.max_abs_diff(&closed).unwrap() < 1e-12);
        }
    }
}

#[test]
fn single_block_construction_reduces_to_plain() {
    let b = Budget::default();
    let f = prs_lab::boolfn::BooleanFunction::from_fn(4, 2, |x| (x * 5 + 3) % 2).unwrap();
    let spec = construction3(vec![FunctionRef::from(f.clone())], 4, PrsKind::BinaryPhase, false).unwrap();
    let plain = PrsGenerator::new(PrsKind::BinaryPhase, f).unwrap().prepare(&b).unwrap();
    assert!(evaluate(&spec, &b).unwrap().max_abs_diff(&plain).unwrap() < 1e-12);
}

#[test]
fn other_constructions_produce_valid_moments() {
    let b = Budget::default();
    let mut s = MomentSpec::new(Source::Construction2, 2, 0, 2, PrsKind::BinaryPhase, FunctionSpace::UniformSample { count: 32, seed: 3 });
    let r = compare_to_haar(&s, Method::MonteCarlo, &b).unwrap();
    assert!((0.0..=1.0).contains(&r.haar_distance));
    s.key_reuse = true;
    s.function_space = FunctionSpace::Exhaustive;
    assert!(compare_to_haar(&s, Method::BruteForce, &b).is_ok());
    let s = MomentSpec::new(Source::Construction3, 2, 3, 1, PrsKind::GeneralPhase, FunctionSpace::PrfKeys { count: 8, seed: 1 });
    let m = ensemble_moment_bruteforce(&s, &b).unwrap();
    assert!((m.trace().re - 1.0).abs() < 1e-12);
    let spec = construction2(
        prs_lab::boolfn::PrfKey::new(vec![1; 16], "a").unwrap(),
        prs_lab::boolfn::PrfKey::new(vec![2; 16], "b").unwrap(),
        prs_lab::boolfn::PrfKey::new(vec![3; 16], "c").unwrap(),
        4,
        PrsKind::GeneralPhase,
        true,
    )
    .unwrap();
    assert!((evaluate(&spec, &b).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn cond1_realized_tightly() {
    let b = Budget::default();
    for n in 1..=3 {
        let r = check_cond1_prs(PrsKind::BinaryPhase, n, FunctionSpace::Exhaustive, &ConditionWitness::binary(n).unwrap(), &b).unwrap();
        assert!(r.max_deviation < 1e-12);
        let r = check_cond1_prs(
            PrsKind::GeneralPhase,
            n,
            FunctionSpace::UniformSample { count: 64, seed: 8 },
            &ConditionWitness::general(n).unwrap(),
            &b,
        )
        .unwrap();
        assert!(r.max_deviation < 1e-12);
    }
}

#[test]
fn good_census_at_n4() {
    let c = census(4, 1, 2, &Budget::default()).unwrap();
    assert_eq!(c.good_members, 496);
    assert_eq!(c.good_members, c.good_direct);
    assert_eq!(num_bigint::BigUint::from(c.g_members), c.g_expected);
    assert_eq!(c.dist_members, c.dist_expected);
    // the split multiset is not always 2t distinct strings
    assert_eq!(c.split_collisions, 80);
    assert_eq!(c.ambiguous, 12);
    assert!(num_rational::BigRational::from_integer(c.good_members.into()) >= c.good_bound);
}

#[test]
fn haar_monte_carlo_larger() {
    let b = Budget::default();
    let mc = haar_moment_monte_carlo(3, 2, 50_000, 11, &b).unwrap();
    let exact = haar_moment(3, 2, &b).unwrap();
    assert!(prs_lab::corelin::trace_distance(&mc, &exact).unwrap() < 2e-2);
}
