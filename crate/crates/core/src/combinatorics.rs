//! Exact counting objects: distinct tuples, permutation set-states, the Dist
//! and Good predicates, and the recombination map on Good tuples.
//!
//! Bit strings are `u64` values with an explicit width; bit 0 is the leftmost.

use std::collections::{BTreeSet, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::{concat, factorial, permutations, prefix, suffix, to_bitstring};
use crate::budget::Budget;
use crate::error::{Error, Result};

pub const MAX_PERM_T: usize = 8;

/// A tuple together with its collision structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TupleClass {
    pub t: usize,
    pub elements: Vec<u64>,
    /// Positions whose element occurs exactly once.
    pub unique_indices: Vec<usize>,
    /// Number of distinct elements.
    pub distinct_count: usize,
}

impl TupleClass {
    pub fn new(elements: Vec<u64>) -> Self {
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for &e in &elements {
            *counts.entry(e).or_default() += 1;
        }
        let unique_indices = (0..elements.len()).filter(|&j| counts[&elements[j]] == 1).collect();
        TupleClass {
            t: elements.len(),
            distinct_count: counts.len(),
            unique_indices,
            elements,
        }
    }

    pub fn is_distinct(&self) -> bool {
        self.distinct_count == self.t
    }

    /// Sizes of the equal-element classes, largest first.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for &e in &self.elements {
            *counts.entry(e).or_default() += 1;
        }
        let mut sizes: Vec<usize> = counts.into_values().collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

/// `2^n (2^n - 1) ... (2^n - t + 1)`.
pub fn dist_count(n: usize, t: usize) -> BigUint {
    let space = BigUint::from(1u8) << n;
    let mut acc = BigUint::from(1u8);
    for j in 0..t {
        let j = BigUint::from(j);
        if j >= space {
            return BigUint::from(0u8);
        }
        acc *= &space - j;
    }
    acc
}

/// `2^{nt} (1 - t^2 / 2^n) = 2^{nt} - t^2 2^{n(t-1)}`; may be negative.
pub fn dist_lower_bound(n: usize, t: usize) -> BigInt {
    if t == 0 {
        return BigInt::from(1);
    }
    let full = BigInt::from(1) << (n * t);
    full - (BigInt::from(t * t) << (n * (t - 1)))
}

/// Exact count plus a check against the lower bound.
pub fn dist_count_checked(n: usize, t: usize) -> Result<BigUint> {
    let count = dist_count(n, t);
    let bound = dist_lower_bound(n, t);
    if BigInt::from(count.clone()) < bound {
        return Err(Error::InvariantViolated(format!(
            "distinct-tuple count {count} below bound {bound} at n={n}, t={t}"
        )));
    }
    Ok(count)
}

/// `‖(1/√t!) Σ_π R_π |a_1 … a_t>‖²` by enumerating all `t!` permutations and
/// grouping by image. Checked against `(t - k + 1)!`.
pub fn perm_state_norm_sq(elements: &[u64]) -> Result<BigRational> {
    let t = elements.len();
    if t > MAX_PERM_T {
        return Err(Error::InvalidParameter(format!(
            "permutation enumeration limited to t <= {MAX_PERM_T}, got {t}"
        )));
    }
    let mut images: HashMap<Vec<u64>, u64> = HashMap::new();
    for pi in permutations(t) {
        let image: Vec<u64> = pi.iter().map(|&k| elements[k]).collect();
        *images.entry(image).or_default() += 1;
    }
    let sum: u128 = images.values().map(|&c| u128::from(c) * u128::from(c)).sum();
    let norm = BigRational::new(BigInt::from(sum), BigInt::from(factorial(t as u64)));
    let k = TupleClass::new(elements.to_vec()).distinct_count;
    let bound = BigInt::from(factorial((t - k + 1) as u64));
    if norm > BigRational::from_integer(bound.clone()) {
        return Err(Error::InvariantViolated(format!(
            "set-state norm^2 {norm} exceeds ({t}-{k}+1)! = {bound}"
        )));
    }
    Ok(norm)
}

/// Same norm from the class sizes: `Π |S_j|!`.
pub fn perm_state_norm_sq_by_classes(elements: &[u64]) -> BigUint {
    TupleClass::new(elements.to_vec())
        .class_sizes()
        .into_iter()
        .map(|s| BigUint::from(factorial(s as u64)))
        .product()
}

/// Same norm from an explicit state vector over `t` registers of `width` bits.
pub fn perm_state_norm_sq_dense(elements: &[u64], width: usize) -> Result<f64> {
    let t = elements.len();
    if t > MAX_PERM_T || width * t > 20 {
        return Err(Error::InvalidParameter(format!("dense set-state too large: t={t}, width={width}")));
    }
    let mut v = vec![0.0f64; 1 << (width * t)];
    let amp = (factorial(t as u64) as f64).sqrt().recip();
    for pi in permutations(t) {
        let idx = pi.iter().fold(0u64, |acc, &k| concat(acc, elements[k], width));
        v[idx as usize] += amp;
    }
    Ok(v.iter().map(|a| a * a).sum())
}

fn check_shapes(name: &str, v: &[u64], t: usize, width: usize) -> Result<()> {
    if v.len() != t {
        return Err(Error::DimensionMismatch { expected: t, actual: v.len() });
    }
    if let Some(&bad) = v.iter().find(|&&x| width < 64 && x >> width != 0) {
        return Err(Error::InvalidParameter(format!("{name} entry {bad} does not fit in {width} bits")));
    }
    Ok(())
}

/// `x'' ∘ y_>` has `2t` pairwise distinct `(n-i)`-bit entries, `y_>` being the
/// last `n - i` bits of each `y_j`.
pub fn in_dist_set(xp: &[u64], xpp: &[u64], y: &[u64], n: usize, i: usize) -> Result<bool> {
    if i > n {
        return Err(Error::InvalidParameter(format!("i={i} exceeds n={n}")));
    }
    let t = y.len();
    check_shapes("x'", xp, t, i)?;
    check_shapes("x''", xpp, t, n - i)?;
    check_shapes("y", y, t, n)?;
    let mut seen = BTreeSet::new();
    Ok(xpp
        .iter()
        .copied()
        .chain(y.iter().map(|&yj| suffix(yj, n - i)))
        .all(|e| seen.insert(e)))
}

fn check_good_params(n: usize, i: usize) -> Result<()> {
    if n < 2 * i {
        return Err(Error::InvalidParameter(format!(
            "Good set needs n >= 2i, got n={n}, i={i}"
        )));
    }
    Ok(())
}

/// `y_j` lies in `G_j`: its last `n-2i` bits differ from its first `n-2i` bits.
pub fn in_g(y: u64, n: usize, i: usize) -> bool {
    let w = n - 2 * i;
    suffix(y, w) != prefix(y, n, w)
}

/// The `y'_j` (first `n-i` bits) are pairwise distinct and every `y_j ∈ G_j`.
pub fn in_good_set(xp: &[u64], y: &[u64], n: usize, i: usize) -> Result<bool> {
    check_good_params(n, i)?;
    let t = y.len();
    check_shapes("x'", xp, t, i)?;
    check_shapes("y", y, t, n)?;
    let mut seen = BTreeSet::new();
    Ok(y.iter().all(|&yj| in_g(yj, n, i) && seen.insert(prefix(yj, n, n - i))))
}

/// Result of recombining a Good tuple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Recombination {
    /// The `2t` strings `x'_j y'_j` and `y_j`, sorted (a multiset).
    pub split: Vec<u64>,
    /// Matched `(x'_j y'_j, y_j)` pairs.
    pub pairs: Vec<(u64, u64)>,
    /// The `t` strings `x'_j y_j`, sorted.
    pub recombined: Vec<u64>,
}

/// The multiset `{x'_j y'_j} ⊎ {y_j}` of `n`-bit strings, sorted.
pub fn split_multiset(xp: &[u64], y: &[u64], n: usize, i: usize) -> Vec<u64> {
    let mut out: Vec<u64> = xp
        .iter()
        .zip(y)
        .map(|(&x, &yj)| concat(x, prefix(yj, n, n - i), n - i))
        .chain(y.iter().copied())
        .collect();
    out.sort_unstable();
    out
}

/// The multiset `{x'_j y_j}` of `(n+i)`-bit strings, sorted.
pub fn joined_multiset(xp: &[u64], y: &[u64], n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = xp.iter().zip(y).map(|(&x, &yj)| concat(x, yj, n)).collect();
    out.sort_unstable();
    out
}

fn matchings(items: &[u64], used: &mut [bool], n: usize, i: usize, acc: &mut Vec<(u64, u64)>, out: &mut Vec<Vec<(u64, u64)>>) {
    let Some(first) = used.iter().position(|u| !u) else {
        out.push(acc.clone());
        return;
    };
    used[first] = true;
    let a = items[first];
    let mut tried = BTreeSet::new();
    for k in first + 1..items.len() {
        if used[k] || !tried.insert(items[k]) {
            continue;
        }
        let b = items[k];
        used[k] = true;
        let mut orientations = vec![(a, b)];
        if a != b {
            orientations.push((b, a));
        }
        for (u, v) in orientations {
            if suffix(u, n - i) == prefix(v, n, n - i) {
                acc.push((u, v));
                matchings(items, used, n, i, acc, out);
                acc.pop();
            }
        }
        used[k] = false;
    }
    used[first] = false;
}

/// Recovers `{x'_j y_j}` from the split multiset alone: every pairing of the
/// `2t` strings into `(u, v)` with `suffix_{n-i}(u) = prefix_{n-i}(v)` yields a
/// candidate `{prefix_i(u) v}`; candidates outside Good are discarded and
/// more than one survivor is reported as ambiguous.
pub fn recombine(xp: &[u64], y: &[u64], n: usize, i: usize) -> Result<Recombination> {
    if !in_good_set(xp, y, n, i)? {
        return Err(Error::NotGood(format!(
            "x'={:?}, y={:?}",
            xp.iter().map(|&x| to_bitstring(x, i)).collect::<Vec<_>>(),
            y.iter().map(|&v| to_bitstring(v, n)).collect::<Vec<_>>()
        )));
    }
    let split = split_multiset(xp, y, n, i);
    let mut all = Vec::new();
    matchings(&split, &mut vec![false; split.len()], n, i, &mut Vec::new(), &mut all);
    let mut survivors: Vec<(Vec<u64>, Vec<(u64, u64)>)> = Vec::new();
    for pairs in all {
        let mut joined: Vec<u64> = pairs.iter().map(|&(u, v)| concat(prefix(u, n, i), v, n)).collect();
        joined.sort_unstable();
        if survivors.iter().any(|(j, _)| *j == joined) {
            continue;
        }
        let cxp: Vec<u64> = joined.iter().map(|&z| z >> n).collect();
        let cy: Vec<u64> = joined.iter().map(|&z| suffix(z, n)).collect();
        if in_good_set(&cxp, &cy, n, i)? {
            survivors.push((joined, pairs));
        }
    }
    match survivors.len() {
        0 => Err(Error::Unmatched),
        1 => {
            let (recombined, mut pairs) = survivors.pop().unwrap();
            pairs.sort_unstable();
            Ok(Recombination { split, pairs, recombined })
        }
        k => Err(Error::AmbiguousRecombination(k)),
    }
}

/// Exhaustive census over `(x', y)` (and `x''` for Dist) at one `(n, i, t)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Census {
    pub n: usize,
    pub i: usize,
    pub t: usize,
    /// Members of Dist among all `(x', x'', y)`.
    pub dist_members: BigUint,
    /// `2^{2it} · dist_count(n-i, 2t)`.
    pub dist_expected: BigUint,
    pub good_members: u64,
    /// Good count from an independent string-based predicate.
    pub good_direct: u64,
    /// `|G|^t` by scan and `(2^n - 2^{2i})^t` by formula.
    pub g_members: u64,
    pub g_expected: BigUint,
    /// `2^{(i+n)t} (1 - (t² + t) / 2^{n-i})`.
    pub good_bound: BigRational,
    /// Good members whose split multiset has fewer than `2t` distinct strings.
    pub split_collisions: u64,
    pub round_trip_ok: u64,
    /// Good members that share their split multiset with another Good member.
    pub ambiguous: u64,
    pub recombine_failures_other: u64,
    pub non_good_rejected: u64,
    pub non_good_total: u64,
}

impl Census {
    pub fn total(&self) -> u64 {
        1u64 << ((self.i + self.n) * self.t)
    }

    pub fn slack(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.good_members)) - &self.good_bound
    }
}

fn decode_tuple(mut idx: u64, width: usize, t: usize) -> Vec<u64> {
    let mut out = vec![0; t];
    for slot in out.iter_mut().rev() {
        *slot = suffix(idx, width);
        idx >>= width;
    }
    out
}

fn good_by_strings(y: &[u64], n: usize, i: usize) -> bool {
    let strs: Vec<String> = y.iter().map(|&v| to_bitstring(v, n)).collect();
    let w = n - 2 * i;
    let heads: BTreeSet<&str> = strs.iter().map(|s| &s[..n - i]).collect();
    heads.len() == strs.len() && strs.iter().all(|s| s[s.len() - w..] != s[..w])
}

#[derive(Default)]
struct Tally {
    good: u64,
    good_direct: u64,
    collisions: u64,
    round_trip: u64,
    ambiguous: u64,
    other: u64,
    rejected: u64,
    non_good: u64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.good += o.good;
        self.good_direct += o.good_direct;
        self.collisions += o.collisions;
        self.round_trip += o.round_trip;
        self.ambiguous += o.ambiguous;
        self.other += o.other;
        self.rejected += o.rejected;
        self.non_good += o.non_good;
        self
    }
}

pub fn census(n: usize, i: usize, t: usize, budget: &Budget) -> Result<Census> {
    check_good_params(n, i)?;
    let good_bits = (i + n) * t;
    let dist_bits = (i + (n - i) + n) * t;
    if dist_bits >= 64 {
        return Err(Error::InvalidParameter(format!("census space 2^{dist_bits} too large")));
    }
    budget.check_count("Dist census tuples", 1u128 << dist_bits)?;

    let tally = (0..1u64 << good_bits)
        .into_par_iter()
        .map(|idx| {
            let xp = decode_tuple(idx >> (n * t), i, t);
            let y = decode_tuple(suffix(idx, n * t), n, t);
            let mut tl = Tally::default();
            let good = in_good_set(&xp, &y, n, i).expect("validated shapes");
            tl.good_direct = u64::from(good_by_strings(&y, n, i));
            if good {
                tl.good = 1;
                let split = split_multiset(&xp, &y, n, i);
                if split.windows(2).any(|w| w[0] == w[1]) {
                    tl.collisions = 1;
                }
                match recombine(&xp, &y, n, i) {
                    Ok(r) if r.recombined == joined_multiset(&xp, &y, n) => tl.round_trip = 1,
                    Err(Error::AmbiguousRecombination(_)) => tl.ambiguous = 1,
                    _ => tl.other = 1,
                }
            } else {
                tl.non_good = 1;
                if matches!(recombine(&xp, &y, n, i), Err(Error::NotGood(_))) {
                    tl.rejected = 1;
                }
            }
            tl
        })
        .reduce(Tally::default, Tally::merge);

    let dist_members: u64 = (0..1u64 << dist_bits)
        .into_par_iter()
        .filter(|&idx| {
            let y = decode_tuple(suffix(idx, n * t), n, t);
            let xpp = decode_tuple(suffix(idx >> (n * t), (n - i) * t), n - i, t);
            let xp = decode_tuple(idx >> ((2 * n - i) * t), i, t);
            in_dist_set(&xp, &xpp, &y, n, i).expect("validated shapes")
        })
        .count() as u64;

    let g_members = (0..1u64 << (n * t))
        .into_par_iter()
        .filter(|&idx| decode_tuple(idx, n, t).iter().all(|&y| in_g(y, n, i)))
        .count() as u64;

    let total = BigInt::from(1) << good_bits;
    let good_bound = BigRational::from_integer(total.clone())
        - BigRational::new(total * BigInt::from(t * t + t), BigInt::from(1) << (n - i));

    Ok(Census {
        n,
        i,
        t,
        dist_members: BigUint::from(dist_members),
        dist_expected: (BigUint::from(1u8) << (2 * i * t)) * dist_count(n - i, 2 * t),
        good_members: tally.good,
        good_direct: tally.good_direct,
        g_members,
        g_expected: ((BigUint::from(1u8) << n) - (BigUint::from(1u8) << (2 * i))).pow(t as u32),
        good_bound,
        split_collisions: tally.collisions,
        round_trip_ok: tally.round_trip,
        ambiguous: tally.ambiguous,
        recombine_failures_other: tally.other,
        non_good_rejected: tally.rejected,
        non_good_total: tally.non_good,
    })
}

/// One census row: `n, i, t, dist, good, bound, slack`.
pub fn write_census_csv<W: std::io::Write>(rows: &[Census], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "i", "t", "dist", "good", "bound", "slack", "split_collisions", "ambiguous"])?;
    for c in rows {
        w.write_record([
            c.n.to_string(),
            c.i.to_string(),
            c.t.to_string(),
            c.dist_members.to_string(),
            c.good_members.to_string(),
            c.good_bound.to_string(),
            c.slack().to_string(),
            c.split_collisions.to_string(),
            c.ambiguous.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of the counting-lemma sweep.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LemmaReport {
    pub dist_cases: usize,
    pub dist_failures: Vec<String>,
    pub perm_cases: usize,
    pub perm_failures: Vec<String>,
    pub dense_checks: usize,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.dist_failures.is_empty() && self.perm_failures.is_empty()
    }
}

/// Distinct-count bound for `n, t ≤ max_n`, and set-state norms for every tuple
/// over a `t`-letter alphabet (hence every multiset shape) for `t ≤ max_t`,
/// with dense cross-checks at `t ≤ 4`.
pub fn lemma_suite(max_n: usize, max_t: usize) -> Result<LemmaReport> {
    if max_t > MAX_PERM_T {
        return Err(Error::InvalidParameter(format!("max_t must be <= {MAX_PERM_T}")));
    }
    let mut report = LemmaReport::default();
    for n in 1..=max_n {
        for t in 1..=max_n {
            report.dist_cases += 1;
            if let Err(e) = dist_count_checked(n, t) {
                report.dist_failures.push(e.to_string());
            }
        }
    }
    for t in 1..=max_t {
        let width = (usize::BITS - (t - 1).leading_zeros()).max(1) as usize;
        for idx in 0..(t as u64).pow(t as u32) {
            let mut rest = idx;
            let elements: Vec<u64> = (0..t)
                .map(|_| {
                    let d = rest % t as u64;
                    rest /= t as u64;
                    d
                })
                .collect();
            report.perm_cases += 1;
            let norm = match perm_state_norm_sq(&elements) {
                Ok(v) => v,
                Err(e) => {
                    report.perm_failures.push(e.to_string());
                    continue;
                }
            };
            let classes = BigRational::from_integer(perm_state_norm_sq_by_classes(&elements).into());
            if norm != classes {
                report.perm_failures.push(format!("{elements:?}: enumeration {norm} != classes {classes}"));
            }
            let class = TupleClass::new(elements.clone());
            if class.distinct_count == 1 && norm != BigRational::from_integer(factorial(t as u64).into()) {
                report.perm_failures.push(format!("{elements:?}: all-equal tuple norm {norm} != {t}!"));
            }
            if t <= 4 {
                report.dense_checks += 1;
                let dense = perm_state_norm_sq_dense(&elements, width)?;
                let exact = norm.to_f64().unwrap_or(f64::NAN);
                if (dense - exact).abs() > 1e-12 {
                    report.perm_failures.push(format!("{elements:?}: dense {dense} != exact {norm}"));
                }
            }
        }
    }
    Ok(report)
}
