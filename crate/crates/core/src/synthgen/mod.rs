//! Synthetic-data strategies: seeded samplers, the generation loss they all
//! score against, direct batch optimization, and adversarial generator
//! rounds.

mod direct;
mod generator;
mod genloss;
mod sampler;

pub use direct::{
    de_optimize, direct_optimize, DeParams, DeResult, DirectResult, OptimMethod, OptimTrace,
    OptimizeSpec,
};
pub use generator::generator_round;
pub use genloss::{
    gen_loss, gen_loss_grad, gen_loss_rows, gen_loss_value, Discrepancy, GenLossEval,
    GenLossSpec, InputPenalty, OutputPenalty, YRandPolicy,
};
pub use sampler::{sample, sample_stream, DomainConstraints, SamplerKind, SamplerSpec};
