//! Exact simulation and verification harness for phase-type pseudorandom
//! quantum states (PRS) and their length-expansion constructions.
//!
//! The crate is organised bottom-up:
//!
//! - [`corelin`]: dense complex linear algebra over qubit registers (states,
//!   density operators, unitary layers, partial trace, trace distance,
//!   symmetric-subspace projectors).
//! - [`boolfn`]: truth tables, exhaustive enumeration of function spaces and a
//!   hash-based toy PRF.
//! - [`prsgen`]: binary- and general-phase PRS generators viewed as unitaries.
//! - [`expand`]: declarative wirings of PRS blocks (two-block, three-block and
//!   stairs expansions) and a closed-form oracle for the two-block expansion.
//! - [`moments`]: exact and sampled t-copy ensemble moments, the Haar moment
//!   and trace-distance reports.
//! - [`combinatorics`]: the counting objects of the security argument
//!   (distinct tuples, permutation set-states, the Good set, recombination).
//! - [`condcheck`]: executable checks of the generalization condition.
//! - [`cli`]: the experiment runner behind the `prs-lab` binary.
//!
//! Bit convention used everywhere: qubit 0 is the most significant bit of a
//! basis-state label, and a bit string of width `w` stored in an integer has
//! its first bit at position `w - 1`.

pub mod bits;
pub mod boolfn;
pub mod budget;
pub mod cli;
pub mod combinatorics;
pub mod condcheck;
pub mod corelin;
pub mod error;
pub mod expand;
pub mod moments;
pub mod prsgen;

pub use budget::Budget;
pub use error::{Error, Result};
