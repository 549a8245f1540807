use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bits::{binomial, factorial, permutations};
use crate::budget::{saturating_pow, Budget};
use crate::error::{Error, Result};

fn digits(mut index: usize, local_dim: usize, copies: usize) -> Vec<usize> {
    let mut d = vec![0; copies];
    for slot in d.iter_mut().rev() {
        *slot = index % local_dim;
        index /= local_dim;
    }
    d
}

fn undigits(d: &[usize], local_dim: usize) -> usize {
    d.iter().fold(0, |acc, &x| acc * local_dim + x)
}

fn check_size(local_dim: usize, copies: usize, budget: &Budget) -> Result<usize> {
    if local_dim == 0 || copies == 0 {
        return Err(Error::InvalidParameter(
            "local dimension and number of copies must be at least 1".into(),
        ));
    }
    let dim = saturating_pow(local_dim as u128, copies as u128);
    budget.check_matrix(format!("operator on ({local_dim})^{copies}"), dim)?;
    Ok(dim as usize)
}

/// `R_π` on `(C^D)^{⊗t}`: `R_π |a_0,...,a_{t-1}> = |a_{π(0)},...,a_{π(t-1)}>`.
pub fn permutation_operator(
    local_dim: usize,
    perm: &[usize],
    budget: &Budget,
) -> Result<DMatrix<Complex64>> {
    let t = perm.len();
    let dim = check_size(local_dim, t, budget)?;
    let mut m = DMatrix::zeros(dim, dim);
    for input in 0..dim {
        let a = digits(input, local_dim, t);
        let out: Vec<usize> = perm.iter().map(|&p| a[p]).collect();
        m[(undigits(&out, local_dim), input)] = Complex64::new(1.0, 0.0);
    }
    Ok(m)
}

/// `Π_sym = (1/t!) Σ_π R_π` on `(C^D)^{⊗t}` (unnormalized projector).
pub fn symmetric_projector(
    local_dim: usize,
    copies: usize,
    budget: &Budget,
) -> Result<DMatrix<Complex64>> {
    let dim = check_size(local_dim, copies, budget)?;
    let perms = permutations(copies);
    let weight = 1.0 / factorial(copies as u64) as f64;
    let mut m = DMatrix::zeros(dim, dim);
    for input in 0..dim {
        let a = digits(input, local_dim, copies);
        for p in &perms {
            let out: Vec<usize> = p.iter().map(|&k| a[k]).collect();
            m[(undigits(&out, local_dim), input)] += Complex64::new(weight, 0.0);
        }
    }
    Ok(m)
}

/// Orthonormal basis of the symmetric subspace of `(C^D)^{⊗t}`.
///
/// Basis vector `k` is the normalized uniform superposition over the distinct
/// orderings of the `k`-th non-decreasing digit tuple.
#[derive(Clone, Debug)]
pub struct SymmetricBasis {
    local_dim: usize,
    copies: usize,
    /// Full-space indices of the orderings of each basis vector.
    orbits: Vec<Vec<usize>>,
}

impl SymmetricBasis {
    pub fn new(local_dim: usize, copies: usize, budget: &Budget) -> Result<Self> {
        let dim = saturating_pow(local_dim as u128, copies as u128);
        if local_dim == 0 || copies == 0 {
            return Err(Error::InvalidParameter(
                "local dimension and number of copies must be at least 1".into(),
            ));
        }
        budget.check_bytes(
            format!("symmetric basis of ({local_dim})^{copies}"),
            dim.saturating_mul(8),
        )?;
        let dim = dim as usize;
        let mut orbit_of = std::collections::BTreeMap::<Vec<usize>, Vec<usize>>::new();
        for index in 0..dim {
            let mut key = digits(index, local_dim, copies);
            key.sort_unstable();
            orbit_of.entry(key).or_default().push(index);
        }
        let orbits: Vec<Vec<usize>> = orbit_of.into_values().collect();
        debug_assert_eq!(
            orbits.len() as u128,
            binomial((local_dim + copies - 1) as u64, copies as u64)
        );
        Ok(SymmetricBasis {
            local_dim,
            copies,
            orbits,
        })
    }

    /// `C(D + t − 1, t)`.
    pub fn dim(&self) -> usize {
        self.orbits.len()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    /// `B† M B` for the isometry `B` whose columns are the basis vectors.
    pub fn compress(&self, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let full = saturating_pow(self.local_dim as u128, self.copies as u128) as usize;
        if m.nrows() != full || m.ncols() != full {
            return Err(Error::DimensionMismatch {
                expected: full,
                actual: m.nrows(),
            });
        }
        let d = self.dim();
        let scale: Vec<f64> = self.orbits.iter().map(|o| (o.len() as f64).sqrt().recip()).collect();
        let mut out = DMatrix::zeros(d, d);
        for (a, oa) in self.orbits.iter().enumerate() {
            for (b, ob) in self.orbits.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &i in oa {
                    for &j in ob {
                        acc += m[(i, j)];
                    }
                }
                out[(a, b)] = acc * (scale[a] * scale[b]);
            }
        }
        Ok(out)
    }
}
