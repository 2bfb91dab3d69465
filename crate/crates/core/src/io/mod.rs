//! Files and figures: run configuration, trajectory CSV, SVG plots.

pub mod config;
pub mod plot;
pub mod trajectory;

pub use config::{RunConfig, RunRequest};
pub use plot::{render_config_space, Figure, Overlay, PlotOptions};
pub use trajectory::{read_trajectory_csv, write_trajectory_csv, TrajectoryRow};
