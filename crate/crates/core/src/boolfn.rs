//! Truth tables `f: {0,1}^n -> Z_m`, exhaustive enumeration of function
//! spaces, uniform sampling, and a hash-based toy PRF.
//!
//! The toy PRF is a stand-in for a quantum-secure PRF: it is deterministic
//! and well mixed but carries no security claim.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::{saturating_pow, Budget};
use crate::error::{Error, Result};

/// Default PRF key length in bytes.
pub const KEY_BYTES: usize = 16;

/// Largest input width for which a PRF truth table is materialized.
pub const MAX_MATERIALIZE_BITS: usize = 20;

const PRF_DOMAIN: &[u8] = b"prs-lab/toy-prf/v1";

/// Truth table of `f: {0,1}^n -> Z_m` with `m` a power of two.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct BooleanFunction {
    input_bits: usize,
    range_modulus: u64,
    table: Vec<u64>,
}

fn check_modulus(m: u64) -> Result<u32> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "range modulus must be a power of two >= 2, got {m}"
        )));
    }
    Ok(m.trailing_zeros())
}

fn check_input_bits(n: usize) -> Result<()> {
    if n > 30 {
        return Err(Error::InvalidParameter(format!("{n} input bits is too many for a truth table")));
    }
    Ok(())
}

impl BooleanFunction {
    pub fn new(input_bits: usize, range_modulus: u64, table: Vec<u64>) -> Result<Self> {
        check_modulus(range_modulus)?;
        check_input_bits(input_bits)?;
        if table.len() != 1usize << input_bits {
            return Err(Error::DimensionMismatch {
                expected: 1usize << input_bits,
                actual: table.len(),
            });
        }
        if let Some((x, v)) = table.iter().enumerate().find(|(_, &v)| v >= range_modulus) {
            return Err(Error::InvalidParameter(format!(
                "f({x}) = {v} is not a residue mod {range_modulus}"
            )));
        }
        Ok(BooleanFunction {
            input_bits,
            range_modulus,
            table,
        })
    }

    pub fn constant(input_bits: usize, range_modulus: u64, value: u64) -> Result<Self> {
        check_input_bits(input_bits)?;
        Self::new(input_bits, range_modulus, vec![value; 1usize << input_bits])
    }

    pub fn from_fn(input_bits: usize, range_modulus: u64, f: impl Fn(u64) -> u64) -> Result<Self> {
        check_input_bits(input_bits)?;
        Self::new(
            input_bits,
            range_modulus,
            (0..1u64 << input_bits).map(|x| f(x) % range_modulus).collect(),
        )
    }

    /// The `index`-th function in lexicographic table order (entry 0 is the
    /// most significant digit).
    pub fn from_index(input_bits: usize, range_modulus: u64, index: u128) -> Result<Self> {
        check_modulus(range_modulus)?;
        check_input_bits(input_bits)?;
        let len = 1usize << input_bits;
        let count = saturating_pow(u128::from(range_modulus), len as u128);
        if index >= count {
            return Err(Error::InvalidParameter(format!(
                "function index {index} out of range (space has {count} functions)"
            )));
        }
        let mut table = vec![0; len];
        let mut rest = index;
        for slot in table.iter_mut().rev() {
            *slot = (rest % u128::from(range_modulus)) as u64;
            rest /= u128::from(range_modulus);
        }
        Ok(BooleanFunction {
            input_bits,
            range_modulus,
            table,
        })
    }

    pub fn sample_uniform<R: Rng + ?Sized>(
        input_bits: usize,
        range_modulus: u64,
        rng: &mut R,
    ) -> Result<Self> {
        check_modulus(range_modulus)?;
        check_input_bits(input_bits)?;
        let table = (0..1usize << input_bits)
            .map(|_| rng.random_range(0..range_modulus))
            .collect();
        Ok(BooleanFunction {
            input_bits,
            range_modulus,
            table,
        })
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn range_modulus(&self) -> u64 {
        self.range_modulus
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        self.table[x as usize]
    }

    /// Entries bit-packed MSB-first with `log2(m)` bits each, zero-padded to
    /// whole hex digits.
    pub fn to_hex(&self) -> String {
        let width = self.range_modulus.trailing_zeros() as usize;
        let mut bits: Vec<u8> = Vec::with_capacity(self.table.len() * width);
        for &v in &self.table {
            for k in (0..width).rev() {
                bits.push(((v >> k) & 1) as u8);
            }
        }
        while bits.len() % 4 != 0 {
            bits.push(0);
        }
        bits.chunks(4)
            .map(|c| {
                let nibble = c.iter().fold(0u8, |acc, &b| (acc << 1) | b);
                char::from_digit(u32::from(nibble), 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(input_bits: usize, range_modulus: u64, hex: &str) -> Result<Self> {
        let width = check_modulus(range_modulus)? as usize;
        check_input_bits(input_bits)?;
        let len = 1usize << input_bits;
        let expected_digits = (len * width).div_ceil(4);
        if hex.len() != expected_digits {
            return Err(Error::InvalidParameter(format!(
                "truth table hex has {} digits, expected {expected_digits}",
                hex.len()
            )));
        }
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for c in hex.chars() {
            let d = c
                .to_digit(16)
                .ok_or_else(|| Error::InvalidParameter(format!("invalid hex digit {c:?}")))?;
            for k in (0..4).rev() {
                bits.push(u64::from((d >> k) & 1));
            }
        }
        let table = bits
            .chunks(width)
            .take(len)
            .map(|c| c.iter().fold(0u64, |acc, &b| (acc << 1) | b))
            .collect();
        Self::new(input_bits, range_modulus, table)
    }
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    input_bits: usize,
    range_modulus: u64,
    table: String,
}

impl From<BooleanFunction> for TableRepr {
    fn from(f: BooleanFunction) -> Self {
        TableRepr {
            input_bits: f.input_bits,
            range_modulus: f.range_modulus,
            table: f.to_hex(),
        }
    }
}

impl TryFrom<TableRepr> for BooleanFunction {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        BooleanFunction::from_hex(r.input_bits, r.range_modulus, &r.table)
    }
}

/// Number of functions `{0,1}^n -> Z_m`, saturating.
pub fn function_space_size(input_bits: usize, range_modulus: u64) -> u128 {
    saturating_pow(u128::from(range_modulus), 1u128 << input_bits.min(127))
}

/// Iterator over every function in lexicographic table order.
#[derive(Clone, Debug)]
pub struct FunctionEnumeration {
    input_bits: usize,
    range_modulus: u64,
    next: u128,
    count: u128,
}

impl Iterator for FunctionEnumeration {
    type Item = BooleanFunction;

    fn next(&mut self) -> Option<BooleanFunction> {
        if self.next >= self.count {
            return None;
        }
        let f = BooleanFunction::from_index(self.input_bits, self.range_modulus, self.next)
            .expect("index checked against count");
        self.next += 1;
        Some(f)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for FunctionEnumeration {}

/// All `m^(2^n)` functions, each exactly once.
pub fn enumerate_all(input_bits: usize, range_modulus: u64, budget: &Budget) -> Result<FunctionEnumeration> {
    check_modulus(range_modulus)?;
    check_input_bits(input_bits)?;
    let count = function_space_size(input_bits, range_modulus);
    budget.check_count(
        format!("function space {{0,1}}^{input_bits} -> Z_{range_modulus}"),
        count,
    )?;
    Ok(FunctionEnumeration {
        input_bits,
        range_modulus,
        next: 0,
        count,
    })
}

/// Length-`2^n` bit vector; the binary function `f` viewed as `f·e_i = f(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndicatorVector {
    len: usize,
    words: Vec<u64>,
}

impl IndicatorVector {
    pub fn zero(len: usize) -> Self {
        IndicatorVector {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// `e_x` in a space of `2^n` coordinates.
    pub fn indicator(input_bits: usize, x: u64) -> Self {
        let mut v = Self::zero(1usize << input_bits);
        v.flip(x as usize);
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "coordinate {i} out of range");
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &IndicatorVector) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Parity of `self · other`.
    pub fn dot(&self, other: &IndicatorVector) -> u64 {
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        u64::from(ones & 1)
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect()
    }
}

impl std::ops::BitXor for &IndicatorVector {
    type Output = IndicatorVector;

    fn bitxor(self, rhs: &IndicatorVector) -> IndicatorVector {
        let mut out = self.clone();
        out.xor_assign(rhs);
        out
    }
}

/// The binary truth table as a length-`2^n` bit vector.
pub fn as_indicator_vector(f: &BooleanFunction) -> Result<IndicatorVector> {
    if f.range_modulus != 2 {
        return Err(Error::InvalidParameter(format!(
            "indicator vectors need a binary function, modulus is {}",
            f.range_modulus
        )));
    }
    let mut v = IndicatorVector::zero(f.table.len());
    for (i, &bit) in f.table.iter().enumerate() {
        if bit == 1 {
            v.flip(i);
        }
    }
    Ok(v)
}

/// Key of the toy PRF together with the construction label it is bound to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrfKey {
    #[serde(with = "hex::serde")]
    key_bytes: Vec<u8>,
    label: String,
}

impl PrfKey {
    pub fn new(key_bytes: Vec<u8>, label: impl Into<String>) -> Result<Self> {
        Self::with_length(key_bytes, label, KEY_BYTES)
    }

    pub fn with_length(key_bytes: Vec<u8>, label: impl Into<String>, expected_len: usize) -> Result<Self> {
        if key_bytes.len() != expected_len {
            return Err(Error::InvalidParameter(format!(
                "PRF key has {} bytes, expected {expected_len}",
                key_bytes.len()
            )));
        }
        Ok(PrfKey {
            key_bytes,
            label: label.into(),
        })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, label: impl Into<String>) -> Self {
        let mut key_bytes = vec![0u8; KEY_BYTES];
        rng.fill(key_bytes.as_mut_slice());
        PrfKey {
            key_bytes,
            label: label.into(),
        }
    }

    pub fn key_bytes(&self) -> &[u8] {
        &self.key_bytes
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Same key bytes under another label (independent PRF instance).
    pub fn relabel(&self, label: impl Into<String>) -> Self {
        PrfKey {
            key_bytes: self.key_bytes.clone(),
            label: label.into(),
        }
    }

    /// Full truth table, `n <= 20`.
    pub fn materialize(&self, input_bits: usize, range_modulus: u64) -> Result<BooleanFunction> {
        if input_bits > MAX_MATERIALIZE_BITS {
            return Err(Error::InvalidParameter(format!(
                "PRF tables are materialized for n <= {MAX_MATERIALIZE_BITS}, got {input_bits}"
            )));
        }
        check_modulus(range_modulus)?;
        let table = (0..1u64 << input_bits)
            .map(|x| hash_eval(self, input_bits, range_modulus, x))
            .collect();
        BooleanFunction::new(input_bits, range_modulus, table)
    }
}

fn hash_eval(key: &PrfKey, input_bits: usize, range_modulus: u64, x: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(PRF_DOMAIN);
    h.update((key.label.len() as u32).to_be_bytes());
    h.update(key.label.as_bytes());
    h.update((key.key_bytes.len() as u32).to_be_bytes());
    h.update(&key.key_bytes);
    h.update((input_bits as u32).to_be_bytes());
    h.update(range_modulus.to_be_bytes());
    h.update(x.to_be_bytes());
    let digest = h.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(head) % range_modulus
}

/// `PRF_k(x) mod m`: SHA-256 over (domain label ‖ construction label ‖ key ‖
/// n ‖ m ‖ x), first eight bytes big-endian, reduced mod `m`.
pub fn prf_eval(key: &PrfKey, input_bits: usize, range_modulus: u64, x: u64) -> Result<u64> {
    check_modulus(range_modulus)?;
    if input_bits < 64 && x >> input_bits != 0 {
        return Err(Error::InvalidParameter(format!(
            "input {x} does not fit in {input_bits} bits"
        )));
    }
    Ok(hash_eval(key, input_bits, range_modulus, x))
}
