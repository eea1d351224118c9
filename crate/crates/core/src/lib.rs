pub mod bench;
pub mod cli;
pub mod flow;
pub mod mae;
pub mod mask;
pub mod ppm;
pub mod rng;
pub(crate) mod sample;
pub mod tensor;
