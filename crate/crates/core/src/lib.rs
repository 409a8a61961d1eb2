//! Random walks on the hierarchical group: step laws, radial laws, number
//! variance of visited balls, fluctuation covariances of the point-count
//! process and their scaling limits, and Monte Carlo simulation.

pub mod error;
pub mod fluct;
pub mod hiergroup;
pub mod numbervar;
pub mod par;
pub mod radial;
pub mod simulate;
pub mod stepdist;

pub use error::{Error, Result};
pub use hiergroup::{GroupElement, Radius};
pub use par::Execution;
pub use stepdist::{Family, StepLaw};
