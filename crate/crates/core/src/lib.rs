//! Feedback stabilization of finite-dimensional linear systems from weak
//! observability constants.

pub mod cli;
pub mod error;
pub mod feedback;
pub mod gramian;
pub mod numerics;
pub mod observability;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::Mat;
