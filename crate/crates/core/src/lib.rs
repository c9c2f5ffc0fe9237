//! Quantum-inspired machine learning stack: a brute-force statevector
//! oracle for shallow circuits, closed-form circuit outputs, quantum
//! activation kernels for a from-scratch CNN, and Chebyshev polynomial
//! networks for continuous-function regression.

#[macro_use]
pub(crate) mod par;

pub mod activations;
pub mod closedform;
pub mod data;
pub mod error;
pub mod nn;
pub mod qcpn;
pub mod sim;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    use rand::SeedableRng;

    pub type TestRng = rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> TestRng {
        TestRng::seed_from_u64(seed)
    }
}
