use crate::error::{Error, Result};

/// Environment variable overriding the default memory budget (in MiB).
pub const BUDGET_ENV: &str = "PRS_LAB_BUDGET_MIB";

pub const DEFAULT_BUDGET_MIB: u64 = 2048;

/// Largest function space (or tuple space) any routine will enumerate.
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 1 << 20;

/// Resource limits shared by every routine that allocates exponentially
/// sized buffers or walks exponentially large spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub bytes: u128,
    pub enumeration_limit: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Self::from_mib(DEFAULT_BUDGET_MIB)
    }
}

impl Budget {
    pub fn from_mib(mib: u64) -> Self {
        Budget {
            bytes: u128::from(mib) << 20,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }

    /// Default budget, overridden by `PRS_LAB_BUDGET_MIB` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => {
                let mib = v.trim().parse::<u64>().map_err(|_| {
                    Error::Config(format!("{BUDGET_ENV} must be a whole number of MiB, got {v:?}"))
                })?;
                Ok(Self::from_mib(mib))
            }
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn with_enumeration_limit(mut self, limit: u128) -> Self {
        self.enumeration_limit = limit;
        self
    }

    pub fn check_bytes(&self, what: impl Into<String>, required: u128) -> Result<()> {
        if required > self.bytes {
            return Err(Error::BudgetExceeded {
                what: what.into(),
                required,
                available: self.bytes,
            });
        }
        Ok(())
    }

    /// Checks a dense `dim x dim` complex matrix.
    pub fn check_matrix(&self, what: impl Into<String>, dim: u128) -> Result<()> {
        self.check_bytes(what, dim.saturating_mul(dim).saturating_mul(16))
    }

    pub fn check_count(&self, what: impl Into<String>, count: u128) -> Result<()> {
        if count > self.enumeration_limit {
            return Err(Error::EnumerationBudget {
                what: what.into(),
                count,
                limit: self.enumeration_limit,
            });
        }
        Ok(())
    }
}

/// `base^exp`, saturating at `u128::MAX`.
pub fn saturating_pow(base: u128, exp: u128) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
        if acc == u128::MAX {
            break;
        }
    }
    acc
}
