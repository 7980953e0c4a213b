//! Shared fixtures for the criterion benchmarks: small but realistically
//! shaped models and batches, built once per benchmark.

use regraft_core::models::{build_mlp, krr_fit, Activation, DenseNet, KernelRidge, MlpSpec};
use regraft_core::rng::{gaussian_tensor, rng_from_seed};
use regraft_core::tensor::Tensor2;

pub fn mlp(input: usize, hidden: usize, seed: u64) -> DenseNet {
    build_mlp(
        &MlpSpec {
            input_dim: input,
            hidden: vec![hidden],
            activation: Activation::Tanh,
        },
        seed,
    )
    .unwrap()
}

pub fn batch(n: usize, d: usize, seed: u64) -> Tensor2 {
    gaussian_tensor(&mut rng_from_seed(seed), n, d).unwrap()
}

/// Kernel model fit on `n` gaussian rows, for predict-path benchmarks.
pub fn krr(n: usize, d: usize) -> KernelRidge {
    let x = batch(n, d, 1);
    let y = batch(n, 1, 2);
    krr_fit(&x, &y, 1.0, 1e-3).unwrap()
}
