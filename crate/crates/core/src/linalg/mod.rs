//! Dense matrices and a small reverse-mode tape.

mod tape;
mod tensor;

pub use tape::{grad_check, Gradients, Tape, Var};
pub use tensor::{matmul, sigmoid, sigmoid_scalar, softmax_rows, Tensor2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian matrix with standard deviation `std`.
pub fn random_tensor<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Tensor2 {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        })
        .collect();
    Tensor2::new(rows, cols, data).expect("length matches by construction")
}
