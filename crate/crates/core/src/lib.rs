//! Exact and extreme-value statistics of the largest signal-to-interference
//! ratio among `L` independent κ-μ shadowed branches.

pub mod error;
pub mod evt;
pub mod fading;
pub mod metrics;
pub mod montecarlo;
pub mod presets;
pub mod quad;
pub mod roots;
pub mod sirdist;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use evt::FrechetParams;
pub use fading::{FadingParams, Scenario};
pub use montecarlo::{McEstimate, RandomStream, DEFAULT_SEED};
pub use sirdist::SeriesWorkspace;
pub use specfun::SeriesControl;
