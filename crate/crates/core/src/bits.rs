//! Bit-string helpers under the crate-wide convention: a width-`w` string
//! stored in a `u64` has its first (leftmost) bit at position `w - 1`.

/// Bit `k` (0 = leftmost) of a width-`width` string.
#[inline]
pub fn bit(value: u64, width: usize, k: usize) -> u64 {
    (value >> (width - 1 - k)) & 1
}

/// The first `len` bits of a width-`width` string.
#[inline]
pub fn prefix(value: u64, width: usize, len: usize) -> u64 {
    debug_assert!(len <= width);
    if len == 0 {
        0
    } else {
        value >> (width - len)
    }
}

/// The last `len` bits.
#[inline]
pub fn suffix(value: u64, len: usize) -> u64 {
    if len == 0 {
        0
    } else if len >= 64 {
        value
    } else {
        value & ((1u64 << len) - 1)
    }
}

/// Concatenation `a || b` where `b` has width `b_width`.
#[inline]
pub fn concat(a: u64, b: u64, b_width: usize) -> u64 {
    (a << b_width) | b
}

/// Parity of the bitwise inner product `a . b`.
#[inline]
pub fn dot_parity(a: u64, b: u64) -> u64 {
    u64::from((a & b).count_ones() & 1)
}

/// Renders a width-`width` string as `0`/`1` characters.
pub fn to_bitstring(value: u64, width: usize) -> String {
    (0..width)
        .map(|k| if bit(value, width, k) == 1 { '1' } else { '0' })
        .collect()
}

/// Parses a `0`/`1` string; its length is the width.
pub fn parse_bitstring(s: &str) -> Option<(u64, usize)> {
    if s.len() > 64 {
        return None;
    }
    let mut v = 0u64;
    for c in s.chars() {
        v = (v << 1)
            | match c {
                '0' => 0,
                '1' => 1,
                _ => return None,
            };
    }
    Some((v, s.len()))
}

/// All permutations of `0..t` in lexicographic order.
pub fn permutations(t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..t).collect();
    loop {
        out.push(current.clone());
        // next lexicographic permutation
        let Some(k) = (0..t.saturating_sub(1)).rev().find(|&k| current[k] < current[k + 1]) else {
            break;
        };
        let l = (k + 1..t).rev().find(|&l| current[k] < current[l]).unwrap();
        current.swap(k, l);
        current[k + 1..].reverse();
    }
    out
}

pub fn factorial(n: u64) -> u128 {
    (1..=u128::from(n)).product()
}

/// Binomial coefficient, exact for the small arguments used here.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * u128::from(n - j) / u128::from(j + 1);
    }
    acc
}
