//! Conditional randomization tests for exposure-mapping specifications
//! under network interference.

pub mod assignment;
pub mod engine;
pub mod error;
pub mod exposure;
pub mod focal;
pub mod graph;
pub mod rng;
pub mod sim;
pub mod stats;

pub use assignment::{Assignment, Mechanism};
pub use engine::{run_test, Instance, PValueRule, TestResult, TestSpec};
pub use error::{Error, Result};
pub use exposure::{Coarsening, Exposure, ExposureValue, HypothesisPair, OrderRule};
pub use focal::{FocalDesign, FocalMethod};
pub use graph::Network;
pub use stats::Statistic;
