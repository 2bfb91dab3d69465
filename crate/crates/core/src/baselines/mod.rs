//! Comparison planners: memoryless random sampling, long-horizon MPPI with a
//! composite cost, and a CDF-constrained QP.

pub mod horizon;
pub mod linear;
pub mod qp;
pub mod random;

pub use horizon::{horizon_mppi_plan, HorizonMppiParams};
pub use linear::linear_path_collides;
pub use qp::{qp_plan, qp_step, QpParams};
pub use random::random_sampling_plan;
