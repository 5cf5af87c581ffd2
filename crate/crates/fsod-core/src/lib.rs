//! Building blocks for few-shot object detection experiments: composable
//! query-support attention operators, cross-scale alignment with gradient
//! verification, object-preserving augmentation, support-patch extraction,
//! episodic task sampling and a detection-metrics engine.
//!
//! Everything runs on the CPU in double precision and is deterministic given
//! explicit seeds. No training loop is included; the attention modules are
//! forward operators (plus an analytic backward pass for the attention core)
//! meant for verification and experimentation at small scale.

pub mod aaf;
pub mod augment;
pub mod episodes;
pub mod error;
pub mod eval;
pub mod features;
mod init;
pub mod pixel;
pub mod support;
pub mod xqsa;

pub use error::{Error, Result};
