//! t-copy moments `E[|ψ⟩⟨ψ|^{⊗t}]` of PRS ensembles, the Haar moment, and
//! trace distances between them.
//!
//! Two exact paths exist for binary-phase ensembles over all functions:
//! brute-force averaging, and delta pairing, which uses
//! `E_f[(-1)^{f·a}] = [a = 0]` to group basis tuples by the XOR of their
//! indicator vectors instead of enumerating `f`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{binomial, concat, dot_parity};
use crate::boolfn::{function_space_size, BooleanFunction, PrfKey};
use crate::budget::{saturating_pow, Budget};
use crate::corelin::{symmetric_projector, trace_distance, DensityOperator, PureState, SymmetricBasis};
use crate::error::{Error, Result};
use crate::expand::{construction1, construction2, construction3, evaluate, FunctionRef};
use crate::prsgen::{PrsGenerator, PrsKind};

/// Fixed number of reduction chunks; chunk boundaries never depend on the
/// thread count, so sums are reproducible.
const REDUCTION_CHUNKS: u64 = 64;

/// Symmetric-subspace trace mass below which the compressed distance is used.
const LEAK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    PlainPrs,
    Construction1,
    Construction2,
    Construction3,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::PlainPrs => "plain",
            Source::Construction1 => "construction1",
            Source::Construction2 => "construction2",
            Source::Construction3 => "construction3",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" | "plain_prs" => Ok(Source::PlainPrs),
            "construction1" | "c1" => Ok(Source::Construction1),
            "construction2" | "c2" => Ok(Source::Construction2),
            "construction3" | "c3" => Ok(Source::Construction3),
            _ => Err(Error::Config(format!(
                "unknown source {s:?} (plain|construction1|construction2|construction3)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FunctionSpace {
    Exhaustive,
    PrfKeys { count: u64, seed: u64 },
    UniformSample { count: u64, seed: u64 },
}

impl FunctionSpace {
    pub fn seed(&self) -> Option<u64> {
        match *self {
            FunctionSpace::Exhaustive => None,
            FunctionSpace::PrfKeys { seed, .. } | FunctionSpace::UniformSample { seed, .. } => Some(seed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FunctionSpace::Exhaustive => "exhaustive",
            FunctionSpace::PrfKeys { .. } => "prf",
            FunctionSpace::UniformSample { .. } => "uniform",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BruteForce,
    DeltaPairing,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BruteForce => "brute_force",
            Method::DeltaPairing => "delta_pairing",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute_force" | "bruteforce" | "brute" => Ok(Method::BruteForce),
            "delta_pairing" | "deltapair" | "delta" => Ok(Method::DeltaPairing),
            "monte_carlo" | "montecarlo" | "mc" => Ok(Method::MonteCarlo),
            _ => Err(Error::Config(format!("unknown method {s:?} (brute_force|delta_pairing|monte_carlo)"))),
        }
    }
}

fn default_true() -> bool {
    true
}

/// An ensemble and number of copies. `i` is the number of added qubits for
/// construction 1 and the number of stairs blocks `ℓ` for construction 3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub source: Source,
    pub n: usize,
    #[serde(default)]
    pub i: usize,
    pub t: usize,
    pub kind: PrsKind,
    pub function_space: FunctionSpace,
    #[serde(default = "default_true")]
    pub final_layer: bool,
    /// Use one function for every block of constructions 2 and 3.
    #[serde(default)]
    pub key_reuse: bool,
}

impl MomentSpec {
    pub fn new(source: Source, n: usize, i: usize, t: usize, kind: PrsKind, function_space: FunctionSpace) -> Self {
        MomentSpec {
            source,
            n,
            i,
            t,
            kind,
            function_space,
            final_layer: true,
            key_reuse: false,
        }
    }

    pub fn output_qubits(&self) -> Result<usize> {
        let n = self.n;
        let even = || {
            if n == 0 || n % 2 != 0 {
                Err(Error::InvalidParameter(format!("block width must be even and positive, got {n}")))
            } else {
                Ok(())
            }
        };
        match self.source {
            Source::PlainPrs => Ok(n),
            Source::Construction1 => {
                if self.i < 1 || self.i >= n {
                    return Err(Error::InvalidParameter(format!("need 1 <= i < n, got n={n}, i={}", self.i)));
                }
                Ok(n + self.i)
            }
            Source::Construction2 => even().map(|_| 2 * n),
            Source::Construction3 => {
                even()?;
                if self.i < 1 {
                    return Err(Error::InvalidParameter("construction 3 needs at least one block".into()));
                }
                Ok(n / 2 * (self.i + 1))
            }
        }
    }

    /// Local dimension `D = 2^q`.
    pub fn local_dim(&self) -> Result<usize> {
        let q = self.output_qubits()?;
        if q >= 32 {
            return Err(Error::InvalidParameter(format!("{q} output qubits is out of range")));
        }
        Ok(1 << q)
    }

    /// `D^t`, checked against the budget as a dense matrix side.
    pub fn moment_dim(&self, budget: &Budget) -> Result<usize> {
        if self.t == 0 {
            return Err(Error::InvalidParameter("need at least one copy".into()));
        }
        let dim = saturating_pow(self.local_dim()? as u128, self.t as u128);
        budget.check_matrix(format!("{}-copy moment of a {}-qubit ensemble", self.t, self.output_qubits()?), dim)?;
        Ok(dim as usize)
    }

    /// Independent functions per ensemble member.
    pub fn functions_per_member(&self) -> usize {
        match self.source {
            Source::PlainPrs | Source::Construction1 => 1,
            _ if self.key_reuse => 1,
            Source::Construction2 => 3,
            Source::Construction3 => self.i,
        }
    }

    pub fn seed(&self) -> u64 {
        self.function_space.seed().unwrap_or(0)
    }

    pub fn validate(&self, budget: &Budget) -> Result<()> {
        self.moment_dim(budget)?;
        if self.n > 20 {
            return Err(Error::InvalidParameter(format!("block width {} too large", self.n)));
        }
        match self.function_space {
            FunctionSpace::PrfKeys { count: 0, .. } | FunctionSpace::UniformSample { count: 0, .. } => {
                Err(Error::InvalidParameter("sample count must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// The member state for one choice of block functions.
    pub fn member_state(&self, fs: Vec<FunctionRef>, budget: &Budget) -> Result<PureState> {
        let (n, kind, fin) = (self.n, self.kind, self.final_layer);
        let fs = if self.key_reuse {
            vec![fs[0].clone(); self.blocks()]
        } else {
            fs
        };
        let spec = match self.source {
            Source::PlainPrs => {
                let f = fs[0].materialize(kind, n)?;
                return PrsGenerator::new(kind, f)?.prepare(budget);
            }
            Source::Construction1 => construction1(fs[0].clone(), n, self.i, kind, fin)?,
            Source::Construction2 => {
                let mut it = fs.into_iter();
                let (a, b, c) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                construction2(a, b, c, n, kind, fin)?
            }
            Source::Construction3 => construction3(fs, n, kind, fin)?,
        };
        evaluate(&spec, budget)
    }

    fn blocks(&self) -> usize {
        match self.source {
            Source::PlainPrs => 1,
            Source::Construction1 => 2,
            Source::Construction2 => 3,
            Source::Construction3 => self.i,
        }
    }
}

/// Indexable ensemble members; sampled members are drawn once, up front.
enum Members {
    Exhaustive { space: u128, per_member: usize },
    Tables(Vec<Vec<BooleanFunction>>),
    Keys(Vec<Vec<PrfKey>>),
}

struct Ensemble<'a> {
    spec: &'a MomentSpec,
    members: Members,
    len: u64,
}

impl<'a> Ensemble<'a> {
    fn new(spec: &'a MomentSpec, budget: &Budget) -> Result<Self> {
        spec.validate(budget)?;
        let k = spec.functions_per_member();
        let modulus = spec.kind.modulus(spec.n);
        let (members, len) = match spec.function_space {
            FunctionSpace::Exhaustive => {
                let space = function_space_size(spec.n, modulus);
                let total = saturating_pow(space, k as u128);
                budget.check_count(format!("ensemble of {k} function(s) on {} bits", spec.n), total)?;
                (Members::Exhaustive { space, per_member: k }, total as u64)
            }
            FunctionSpace::UniformSample { count, seed } => {
                budget.check_bytes(
                    "sampled truth tables",
                    u128::from(count) * k as u128 * (8u128 << spec.n),
                )?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let tables = (0..count)
                    .map(|_| {
                        (0..k)
                            .map(|_| BooleanFunction::sample_uniform(spec.n, modulus, &mut rng))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                (Members::Tables(tables), count)
            }
            FunctionSpace::PrfKeys { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let keys = (0..count)
                    .map(|_| (0..k).map(|j| PrfKey::random(&mut rng, format!("block{j}"))).collect())
                    .collect();
                (Members::Keys(keys), count)
            }
        };
        Ok(Ensemble { spec, members, len })
    }

    fn functions(&self, idx: u64) -> Result<Vec<FunctionRef>> {
        Ok(match &self.members {
            Members::Exhaustive { space, per_member } => {
                let mut rest = u128::from(idx);
                let mut out = vec![FunctionRef::Table(BooleanFunction::constant(self.spec.n, 2, 0)?); *per_member];
                for slot in out.iter_mut().rev() {
                    *slot = BooleanFunction::from_index(self.spec.n, self.spec.kind.modulus(self.spec.n), rest % space)?.into();
                    rest /= space;
                }
                out
            }
            Members::Tables(t) => t[idx as usize].iter().cloned().map(FunctionRef::from).collect(),
            Members::Keys(k) => k[idx as usize].iter().cloned().map(FunctionRef::from).collect(),
        })
    }

    fn state(&self, idx: u64, budget: &Budget) -> Result<PureState> {
        self.spec.member_state(self.functions(idx)?, budget)
    }
}

/// `Σ_idx f(idx)` over `0..len`, reduced over fixed chunks in index order.
fn ordered_matrix_sum<F>(len: u64, dim: usize, budget: &Budget, f: F) -> Result<DMatrix<Complex64>>
where
    F: Fn(u64, &mut DMatrix<Complex64>) -> Result<()> + Sync,
{
    let chunk = len.div_ceil(REDUCTION_CHUNKS).max(1);
    let n_chunks = len.div_ceil(chunk);
    let wave = (rayon::current_num_threads() as u64).clamp(1, REDUCTION_CHUNKS);
    budget.check_bytes(
        "partial moment sums",
        (u128::from(wave) + 1) * (dim as u128) * (dim as u128) * 16,
    )?;
    let mut total = DMatrix::zeros(dim, dim);
    let mut first = 0;
    while first < n_chunks {
        let last = (first + wave).min(n_chunks);
        let parts: Vec<Result<DMatrix<Complex64>>> = (first..last)
            .into_par_iter()
            .map(|c| {
                let mut acc = DMatrix::zeros(dim, dim);
                for idx in c * chunk..((c + 1) * chunk).min(len) {
                    f(idx, &mut acc)?;
                }
                Ok(acc)
            })
            .collect();
        for p in parts {
            total += p?;
        }
        first = last;
    }
    Ok(total)
}

fn add_outer_power(acc: &mut DMatrix<Complex64>, amplitudes: &[Complex64], t: usize) {
    let mut v = amplitudes.to_vec();
    for _ in 1..t {
        v = v.iter().flat_map(|&a| amplitudes.iter().map(move |&b| a * b)).collect();
    }
    let v = DVector::from_vec(v);
    acc.gerc(Complex64::new(1.0, 0.0), &v, &v, Complex64::new(1.0, 0.0));
}

/// Average of `|ψ⟩⟨ψ|^{⊗t}` over the spec's function space (exact for the
/// exhaustive space, empirical for sampled ones).
pub fn ensemble_moment_bruteforce(spec: &MomentSpec, budget: &Budget) -> Result<DensityOperator> {
    let ensemble = Ensemble::new(spec, budget)?;
    let dim = spec.moment_dim(budget)?;
    let sum = ordered_matrix_sum(ensemble.len, dim, budget, |idx, acc| {
        add_outer_power(acc, ensemble.state(idx, budget)?.amplitudes(), spec.t);
        Ok(())
    })?;
    Ok(DensityOperator::from_matrix_unchecked(sum / Complex64::new(ensemble.len as f64, 0.0)))
}

/// One copy's contribution: the basis index it lands on, the function
/// inputs whose phases it picks up, and its fixed sign.
struct CopyTerm {
    basis: u64,
    inputs: [u64; 2],
    arity: usize,
    sign: u64,
}

fn copy_terms(spec: &MomentSpec) -> Vec<CopyTerm> {
    let (n, i) = (spec.n, spec.i);
    match spec.source {
        Source::PlainPrs => (0..1u64 << n)
            .map(|x| CopyTerm { basis: x, inputs: [x, 0], arity: 1, sign: 0 })
            .collect(),
        _ => {
            // |x'>|y> with phase f(x'x'') + f(y) + y·(x''0^i)
            let mut out = Vec::with_capacity(1 << (2 * n));
            for xp in 0..1u64 << i {
                for xpp in 0..1u64 << (n - i) {
                    for y in 0..1u64 << n {
                        out.push(CopyTerm {
                            basis: concat(xp, y, n),
                            inputs: [concat(xp, xpp, n - i), y],
                            arity: 2,
                            sign: dot_parity(y, xpp << i),
                        });
                    }
                }
            }
            out
        }
    }
}

/// In-place unnormalized Walsh–Hadamard transform.
fn fwht(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

fn transpose_in_place(m: &mut [f64], dim: usize) {
    for r in 0..dim {
        for c in r + 1..dim {
            m.swap(r * dim + c, c * dim + r);
        }
    }
}

/// Exact all-functions average for binary-phase plain PRS and construction 1,
/// without enumerating functions.
///
/// Every `t`-tuple of per-copy terms carries the phase `(-1)^{f·a}` where `a`
/// is the XOR of the indicator vectors of its function inputs. Averaging over
/// all `f` keeps exactly the pairs of tuples with equal `a`, so the moment is
/// `c² Σ_a v_a v_aᵀ` with `v_a` the signed sum of basis kets in bucket `a`.
/// Accumulation is in integers; the final Hadamard layer, if any, is applied
/// to rows and columns afterwards.
pub fn ensemble_moment_deltapair(spec: &MomentSpec, budget: &Budget) -> Result<DensityOperator> {
    if spec.kind != PrsKind::BinaryPhase {
        return Err(Error::Unsupported("delta pairing needs binary phase".into()));
    }
    if !matches!(spec.source, Source::PlainPrs | Source::Construction1) {
        return Err(Error::Unsupported(format!("delta pairing does not cover {}", spec.source.name())));
    }
    if spec.function_space != FunctionSpace::Exhaustive {
        return Err(Error::Unsupported("delta pairing computes the all-functions average only".into()));
    }
    if spec.n > 7 {
        return Err(Error::Unsupported("XOR keys are packed into 128 bits (n <= 7)".into()));
    }
    let dim = spec.moment_dim(budget)?;
    let (n, t) = (spec.n, spec.t);
    let q = spec.output_qubits()?;
    let terms = copy_terms(spec);
    let tuples = saturating_pow(terms.len() as u128, t as u128);
    budget.check_bytes(format!("{tuples} grouped tuples"), tuples.saturating_mul(32))?;
    budget.check_bytes("integer moment accumulator", (dim as u128) * (dim as u128) * 16)?;
    let tuples = tuples as u64;
    let per = terms.len() as u64;

    // (xor key, basis index, sign); the key is the length-2^n indicator
    // string of odd-multiplicity inputs
    let mut entries: Vec<(u128, u64, bool)> = (0..tuples)
        .into_par_iter()
        .map(|mut idx| {
            let (mut key, mut basis, mut sign) = (0u128, 0u64, 0u64);
            let mut picks = [0usize; 16];
            for slot in picks[..t].iter_mut().rev() {
                *slot = (idx % per) as usize;
                idx /= per;
            }
            for &p in &picks[..t] {
                let term = &terms[p];
                for &x in &term.inputs[..term.arity] {
                    key ^= 1u128 << x;
                }
                basis = concat(basis, term.basis, q);
                sign ^= term.sign;
            }
            (key, basis, sign == 1)
        })
        .collect();
    entries.par_sort_unstable_by_key(|e| (e.0, e.1));

    // collapse to per-bucket sparse vectors with integer coefficients
    let mut coeffs: Vec<(u64, i64)> = Vec::new();
    let mut buckets: Vec<std::ops::Range<usize>> = Vec::new();
    let mut k = 0;
    while k < entries.len() {
        let key = entries[k].0;
        let start = coeffs.len();
        while k < entries.len() && entries[k].0 == key {
            let basis = entries[k].1;
            let mut c = 0i64;
            while k < entries.len() && entries[k].0 == key && entries[k].1 == basis {
                c += if entries[k].2 { -1 } else { 1 };
                k += 1;
            }
            if c != 0 {
                coeffs.push((basis, c));
            }
        }
        buckets.push(start..coeffs.len());
    }
    drop(entries);

    const ROWS_PER_TASK: usize = 16;
    let mut acc = vec![0i64; dim * dim];
    acc.par_chunks_mut(ROWS_PER_TASK * dim).enumerate().for_each(|(task, rows)| {
        let lo = (task * ROWS_PER_TASK) as u64;
        let hi = lo + (rows.len() / dim) as u64;
        for range in &buckets {
            let bucket = &coeffs[range.clone()];
            let a = bucket.partition_point(|e| e.0 < lo);
            let b = bucket.partition_point(|e| e.0 < hi);
            for &(r, cr) in &bucket[a..b] {
                let row = &mut rows[(r - lo) as usize * dim..][..dim];
                for &(c, cc) in bucket {
                    row[c as usize] += cr * cc;
                }
            }
        }
    });

    // per-copy amplitude 2^{-n/2} (plain) or 2^{-n} (construction 1)
    let log_scale = match spec.source {
        Source::PlainPrs => n * t,
        _ => 2 * n * t,
    };
    let scale = 0.5f64.powi(log_scale as i32);
    let mut m: Vec<f64> = acc.into_par_iter().map(|v| v as f64 * scale).collect();
    if spec.source == Source::Construction1 && spec.final_layer {
        // H^{⊗qt} M H^{⊗qt}; M is symmetric so transform rows, transpose, repeat
        let norm = (dim as f64).recip();
        m.par_chunks_mut(dim).for_each(fwht);
        transpose_in_place(&mut m, dim);
        m.par_chunks_mut(dim).for_each(|row| {
            fwht(row);
            row.iter_mut().for_each(|v| *v *= norm);
        });
    }
    let matrix = DMatrix::from_fn(dim, dim, |r, c| Complex64::new(m[r * dim + c], 0.0));
    Ok(DensityOperator::from_matrix_unchecked(matrix))
}

/// `Π_sym / C(D + t - 1, t)`.
pub fn haar_moment(local_dim: usize, t: usize, budget: &Budget) -> Result<DensityOperator> {
    let proj = symmetric_projector(local_dim, t, budget)?;
    let d_sym = binomial((local_dim + t - 1) as u64, t as u64) as f64;
    Ok(DensityOperator::from_matrix_unchecked(proj / Complex64::new(d_sym, 0.0)))
}

/// Empirical Haar moment from normalized complex-Gaussian vectors.
pub fn haar_moment_monte_carlo(
    local_dim: usize,
    t: usize,
    samples: u64,
    seed: u64,
    budget: &Budget,
) -> Result<DensityOperator> {
    if samples == 0 || local_dim == 0 || t == 0 {
        return Err(Error::InvalidParameter("need positive samples, dimension and copies".into()));
    }
    let dim = saturating_pow(local_dim as u128, t as u128);
    budget.check_matrix(format!("{t}-copy moment on dimension {local_dim}"), dim)?;
    let dim = dim as usize;
    let sum = ordered_matrix_sum(samples, dim, budget, |idx, acc| {
        // one stream per sample keeps results independent of chunking
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx);
        let mut amps: Vec<Complex64> = (0..local_dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        add_outer_power(acc, &amps, t);
        Ok(())
    })?;
    Ok(DensityOperator::from_matrix_unchecked(sum / Complex64::new(samples as f64, 0.0)))
}

/// Trace distance from the Haar moment, computed inside the symmetric
/// subspace when the moment is supported there (falls back to the full space
/// otherwise).
pub fn haar_distance(moment: &DensityOperator, local_dim: usize, t: usize, budget: &Budget) -> Result<f64> {
    let basis = SymmetricBasis::new(local_dim, t, budget)?;
    if moment.dim() as u128 != saturating_pow(local_dim as u128, t as u128) {
        return Err(Error::DimensionMismatch { expected: local_dim.pow(t as u32), actual: moment.dim() });
    }
    let compressed = basis.compress(moment.matrix())?;
    let leak = 1.0 - compressed.trace().re;
    if leak.abs() > LEAK_TOL {
        return trace_distance(moment, &haar_moment(local_dim, t, budget)?);
    }
    let d_sym = basis.dim() as f64;
    let shifted = compressed - DMatrix::identity(basis.dim(), basis.dim()) * Complex64::new(d_sym.recip(), 0.0);
    let sum: f64 = crate::corelin::hermitian_eigenvalues(&shifted).iter().map(|v| v.abs()).sum();
    Ok((0.5 * (sum + leak.abs())).clamp(0.0, 1.0))
}

/// `(U^{⊗t}) M (U^{⊗t})†`.
pub fn conjugate_moment(moment: &DensityOperator, unitary: &DMatrix<Complex64>, t: usize) -> Result<DensityOperator> {
    let full = (1..t).fold(unitary.clone(), |acc, _| acc.kronecker(unitary));
    moment.conjugate_by(&full)
}

#[derive(Clone, Debug)]
pub struct MomentReport {
    pub spec: MomentSpec,
    pub method: Method,
    pub moment: DensityOperator,
    pub haar_distance: f64,
    pub runtime_ms: u64,
    pub seed: u64,
}

#[derive(Serialize)]
struct MomentSummary {
    dim: usize,
    trace: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    entries: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    spec: &'a MomentSpec,
    method: Method,
    moment: MomentSummary,
    haar_distance: f64,
    runtime_ms: u64,
    seed: u64,
}

impl MomentReport {
    /// JSON with the moment summarized by dimension and trace; row-major
    /// `[re, im]` entries are included on request.
    pub fn to_json(&self, include_entries: bool) -> Result<String> {
        let m = self.moment.matrix();
        let entries = include_entries.then(|| {
            (0..m.nrows())
                .flat_map(|r| (0..m.ncols()).map(move |c| [m[(r, c)].re, m[(r, c)].im]))
                .collect()
        });
        let json = ReportJson {
            spec: &self.spec,
            method: self.method,
            moment: MomentSummary {
                dim: self.moment.dim(),
                trace: self.moment.trace().re,
                entries,
            },
            haar_distance: self.haar_distance,
            runtime_ms: self.runtime_ms,
            seed: self.seed,
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }
}

/// The moment by the chosen method and its distance from the Haar moment.
/// `MonteCarlo` averages over a sampled function space.
pub fn compare_to_haar(spec: &MomentSpec, method: Method, budget: &Budget) -> Result<MomentReport> {
    let start = Instant::now();
    let moment = match method {
        Method::BruteForce => ensemble_moment_bruteforce(spec, budget)?,
        Method::DeltaPairing => ensemble_moment_deltapair(spec, budget)?,
        Method::MonteCarlo => {
            if spec.function_space == FunctionSpace::Exhaustive {
                return Err(Error::InvalidParameter("monte_carlo needs a sampled function space".into()));
            }
            ensemble_moment_bruteforce(spec, budget)?
        }
    };
    let haar_distance = haar_distance(&moment, spec.local_dim()?, spec.t, budget)?;
    Ok(MomentReport {
        spec: spec.clone(),
        method,
        moment,
        haar_distance,
        runtime_ms: start.elapsed().as_millis() as u64,
        seed: spec.seed(),
    })
}

/// Haar distance of a sampled ensemble with a batch-means standard error.
#[derive(Clone, Debug, Serialize)]
pub struct BatchEstimate {
    pub distance: f64,
    pub batch_distances: Vec<f64>,
    /// `sd(batch distances) / √batches`.
    pub standard_error: f64,
}

/// Splits the members of a sampled function space into `batches`
/// consecutive equal batches; the pooled estimate is the full ensemble.
pub fn batched_haar_distance(spec: &MomentSpec, batches: u64, budget: &Budget) -> Result<BatchEstimate> {
    if spec.function_space == FunctionSpace::Exhaustive {
        return Err(Error::InvalidParameter("batching needs a sampled function space".into()));
    }
    let ensemble = Ensemble::new(spec, budget)?;
    let count = ensemble.len;
    if batches < 2 || count % batches != 0 {
        return Err(Error::InvalidParameter(format!(
            "{count} samples do not split into {batches} batches"
        )));
    }
    let per = count / batches;
    let dim = spec.moment_dim(budget)?;
    let local = spec.local_dim()?;
    let mut pooled = DMatrix::zeros(dim, dim);
    let mut batch_distances = Vec::with_capacity(batches as usize);
    for b in 0..batches {
        let sum = ordered_matrix_sum(per, dim, budget, |idx, acc| {
            add_outer_power(acc, ensemble.state(b * per + idx, budget)?.amplitudes(), spec.t);
            Ok(())
        })?;
        let m = DensityOperator::from_matrix_unchecked(&sum / Complex64::new(per as f64, 0.0));
        batch_distances.push(haar_distance(&m, local, spec.t, budget)?);
        pooled += sum;
    }
    let pooled = DensityOperator::from_matrix_unchecked(pooled / Complex64::new(count as f64, 0.0));
    let distance = haar_distance(&pooled, local, spec.t, budget)?;
    let mean = batch_distances.iter().sum::<f64>() / batches as f64;
    let var = batch_distances.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(BatchEstimate {
        distance,
        batch_distances,
        standard_error: (var / batches as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(source: Source, n: usize, i: usize, t: usize) -> MomentSpec {
        MomentSpec::new(source, n, i, t, PrsKind::BinaryPhase, FunctionSpace::Exhaustive)
    }

    fn max_diff(a: &DensityOperator, b: &DensityOperator) -> f64 {
        a.max_abs_diff(b).unwrap()
    }

    #[test]
    fn plain_first_moment_is_maximally_mixed() {
        let b = Budget::default();
        let s = spec(Source::PlainPrs, 2, 0, 1);
        let mixed = DensityOperator::maximally_mixed(4);
        assert!(max_diff(&ensemble_moment_bruteforce(&s, &b).unwrap(), &mixed) < 1e-15);
        assert!(max_diff(&ensemble_moment_deltapair(&s, &b).unwrap(), &mixed) < 1e-15);
        let r = compare_to_haar(&s, Method::DeltaPairing, &b).unwrap();
        assert!(r.haar_distance < 1e-12);
    }

    #[test]
    fn methods_agree_construction1_small() {
        let b = Budget::default();
        for fin in [false, true] {
            for t in [1, 2] {
                let mut s = spec(Source::Construction1, 2, 1, t);
                s.final_layer = fin;
                let brute = ensemble_moment_bruteforce(&s, &b).unwrap();
                let delta = ensemble_moment_deltapair(&s, &b).unwrap();
                assert!(max_diff(&brute, &delta) < 1e-12, "t={t} final={fin}");
            }
        }
    }

    #[test]
    fn deltapair_rejects_unsupported() {
        let b = Budget::default();
        let mut s = spec(Source::Construction2, 2, 0, 1);
        assert!(matches!(ensemble_moment_deltapair(&s, &b), Err(Error::Unsupported(_))));
        s.source = Source::PlainPrs;
        s.kind = PrsKind::GeneralPhase;
        assert!(matches!(ensemble_moment_deltapair(&s, &b), Err(Error::Unsupported(_))));
        s.kind = PrsKind::BinaryPhase;
        s.function_space = FunctionSpace::UniformSample { count: 3, seed: 1 };
        assert!(matches!(ensemble_moment_deltapair(&s, &b), Err(Error::Unsupported(_))));
    }

    #[test]
    fn single_member_is_rank_one() {
        let b = Budget::default();
        let s = MomentSpec::new(
            Source::Construction1,
            3,
            1,
            2,
            PrsKind::BinaryPhase,
            FunctionSpace::UniformSample { count: 1, seed: 9 },
        );
        let m = ensemble_moment_bruteforce(&s, &b).unwrap();
        let eig = m.eigenvalues();
        assert!((eig.last().unwrap() - 1.0).abs() < 1e-10);
        assert!(eig[..eig.len() - 1].iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn haar_moment_basics() {
        let b = Budget::default();
        assert!(max_diff(&haar_moment(2, 1, &b).unwrap(), &DensityOperator::maximally_mixed(2)) < 1e-15);
        for (d, t) in [(2, 2), (3, 2), (2, 3), (4, 2)] {
            let h = haar_moment(d, t, &b).unwrap();
            assert!((h.trace().re - 1.0).abs() < 1e-12);
            assert!(haar_distance(&h, d, t, &b).unwrap() < 1e-12);
        }
        assert!(haar_moment(2, 40, &b).is_err());
    }

    #[test]
    fn monte_carlo_haar_converges() {
        let b = Budget::default();
        let mc = haar_moment_monte_carlo(2, 2, 20_000, 5, &b).unwrap();
        let exact = haar_moment(2, 2, &b).unwrap();
        assert!(trace_distance(&mc, &exact).unwrap() < 2e-2);
    }

    #[test]
    fn compressed_distance_matches_full() {
        let b = Budget::default();
        for s in [
            spec(Source::PlainPrs, 2, 0, 2),
            spec(Source::Construction1, 2, 1, 2),
            MomentSpec::new(Source::PlainPrs, 2, 0, 2, PrsKind::GeneralPhase, FunctionSpace::UniformSample { count: 7, seed: 2 }),
        ] {
            let m = ensemble_moment_bruteforce(&s, &b).unwrap();
            let d = s.local_dim().unwrap();
            let full = trace_distance(&m, &haar_moment(d, 2, &b).unwrap()).unwrap();
            assert!((full - haar_distance(&m, d, 2, &b).unwrap()).abs() < 1e-10);
        }
        // not supported on the symmetric subspace: falls back to the full space
        let mixed = DensityOperator::maximally_mixed(4);
        let full = trace_distance(&mixed, &haar_moment(2, 2, &b).unwrap()).unwrap();
        assert!((haar_distance(&mixed, 2, 2, &b).unwrap() - full).abs() < 1e-12);
    }

    #[test]
    fn bruteforce_independent_of_thread_count() {
        let s = MomentSpec::new(
            Source::Construction1,
            3,
            1,
            2,
            PrsKind::BinaryPhase,
            FunctionSpace::PrfKeys { count: 100, seed: 4 },
        );
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble_moment_bruteforce(&s, &Budget::default()).unwrap())
        };
        assert_eq!(run(1).matrix(), run(4).matrix());
    }

    #[test]
    fn batches_pool_to_full_ensemble() {
        let b = Budget::default();
        let s = MomentSpec::new(Source::PlainPrs, 2, 0, 2, PrsKind::BinaryPhase, FunctionSpace::PrfKeys { count: 64, seed: 1 });
        let est = batched_haar_distance(&s, 4, &b).unwrap();
        let direct = compare_to_haar(&s, Method::MonteCarlo, &b).unwrap().haar_distance;
        assert!((est.distance - direct).abs() < 1e-12);
        assert_eq!(est.batch_distances.len(), 4);
        assert!(batched_haar_distance(&s, 5, &b).is_err());
    }

    #[test]
    fn report_json_shape() {
        let b = Budget::default();
        let r = compare_to_haar(&spec(Source::PlainPrs, 1, 0, 1), Method::BruteForce, &b).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json(true).unwrap()).unwrap();
        assert_eq!(v["method"], "brute_force");
        assert_eq!(v["moment"]["dim"], 2);
        assert_eq!(v["moment"]["entries"].as_array().unwrap().len(), 4);
        assert_eq!(v["spec"]["function_space"]["type"], "exhaustive");
        assert!(compare_to_haar(&spec(Source::PlainPrs, 1, 0, 1), Method::MonteCarlo, &b).is_err());
    }
}
