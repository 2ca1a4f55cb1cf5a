// NaN must fail range checks, so `!(a <= b)` is deliberate throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::should_implement_trait, clippy::type_complexity)]

pub mod error;
pub mod facefit;
pub mod fixture;
pub mod geom;
pub mod jitterfit;
pub mod matchfit;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod segeval;
pub mod splinefit;

pub use error::{Error, Result};
