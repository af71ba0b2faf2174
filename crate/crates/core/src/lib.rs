// `!(a < b)` is used deliberately so that NaN fails the guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod criteria;
pub mod descent;
pub mod error;
pub mod gallery;
pub mod linalg;
pub mod map_model;
pub mod mountain_pass;
pub mod oracle;
pub mod report;
pub mod sampling;
pub mod variational;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use map_model::{Condition, MapUnderTest};
pub use variational::{TargetFunctional, Weight};
