//! Simulation engine and algorithm library for approximate consensus
//! in dynamic rooted networks: averaging algorithms, their amortized
//! versions (including the linear-time amortized midpoint), the
//! quantized variant, and the graph machinery (products, rooted and
//! nonsplit predicates, adversarial schedules) needed to exercise the
//! round bounds at desk scale.

pub mod algorithms;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod graph;
pub mod suites;
pub mod value;

pub use error::Error;
pub use graph::CommunicationGraph;
pub use value::{Rational, Scalar, F64};
