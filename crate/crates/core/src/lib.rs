//! Motion planning for planar manipulators with configuration-space distance
//! fields and one-step MPPI.

pub mod audit;
pub mod baselines;
pub mod benchmark;
pub mod cdf;
pub mod episode;
pub mod error;
pub mod io;
pub mod kdtree;
pub mod mppi;
pub mod params;
pub mod planner;
pub mod robot;

pub use benchmark::{Method, MetricsReport, TrialSpec};
pub use cdf::{CdfField, ContactSet};
pub use episode::{PlanResult, PlanStatus, PlannerRng};
pub use error::{Error, Result};
pub use params::Hyperparameters;
pub use planner::{configuration, AngleCostParams, MppiParams};
pub use robot::{Configuration, Scene};
