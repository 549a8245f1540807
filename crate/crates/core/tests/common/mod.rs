#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use prs_lab::corelin::PureState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_state(rng: &mut impl Rng, qubits: usize) -> PureState {
    let amps = (0..1usize << qubits).map(|_| gaussian(rng)).collect();
    PureState::unnormalized(amps).unwrap().normalize().unwrap()
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(rng: &mut impl Rng, dim: usize) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    m.qr().q()
}
