//! Experiment driver for the PIMA simulator: traffic sweeps over schedulers
//! and seeds, figure presets, CSV tables, plot scripts, and the oracle
//! calibration report.

pub mod calibrate;
pub mod error;
pub mod output;
pub mod presets;
pub mod sweep;

pub use calibrate::{run_calibration, CheckReport};
pub use error::{ExpError, ExpResult};
pub use output::{emit_plot_script, to_csv};
pub use presets::{preset, Figure};
pub use sweep::{run_sweep, SweepSpec};
