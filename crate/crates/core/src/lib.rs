//! Margin-maximizing first-order methods for linearly separable binary
//! classification with the exponential loss.
//!
//! - [`dataset`]: labelled point sets, synthetic families, CSV I/O.
//! - [`margin`]: log-space loss, normalized gradient, margins, centripetal
//!   velocity.
//! - [`optimizers`]: GD, NGD, progressive rescaling GD, trajectories.
//! - [`reference`]: exact / dual / NGD max-margin solutions and the toy
//!   closed-form dynamics.
//! - [`analysis`]: rate fits, cylinder sampling, vector fields.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod margin;
pub mod optimizers;
pub mod reference;

pub use dataset::{Dataset, Family, SyntheticSpec};
pub use error::{MarginError, Result};
pub use margin::Weight;
pub use reference::MaxMarginSolution;
