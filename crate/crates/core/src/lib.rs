pub mod domain;
pub mod error;
pub mod io;
pub mod sampler;
pub mod surrogate;
pub mod metrics;
pub mod benchmarks;
pub mod controller;
