pub mod cli;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod sampler;
pub mod systems;
