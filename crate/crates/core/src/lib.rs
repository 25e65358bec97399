//! Wave and diffusion problems in 1D media whose coefficients repeat with a
//! fast period.  The crate computes the effective (homogenized) constants and
//! the first-order corrector of such a medium, integrates both the
//! fine-scale and the constant-coefficient limit equations with finite
//! differences, and measures how quickly the fine solution approaches the
//! coarse one as the scale ratio shrinks.
//!
//! The modules mirror that pipeline:
//!
//! * [`field`]    — periodic coefficient profiles and their cell averages
//! * [`cell`]     — effective constants, corrector table, two-scale reconstruction
//! * [`fine`]     — explicit solvers on the fully resolved grid
//! * [`homog`]    — solvers (and closed forms) for the homogenized equations
//! * [`converge`] — error norms, rate fits, and the scale-ratio sweep
//! * [`io`]       — plain-text CSV emission shared by the tools above

pub mod cell;
pub mod converge;
pub mod error;
pub mod field;
pub mod fine;
pub mod homog;
pub mod io;

pub use error::{Error, Result};
