//! Strongly Morita equivalent unital inclusions of finite-dimensional
//! C*-algebras, realized as concrete matrix algebras.

pub mod error;
pub mod exec;
pub mod fdalg;
pub mod numlin;

pub use error::{Error, Result};
pub mod condexp;
pub mod report;
pub mod bimodule;
pub mod morita;
pub mod towers;
pub mod paragroup;
pub mod scenario;
pub mod pipeline;
