//! Monte Carlo and analytic post-processing.
//!
//! Every Monte Carlo routine takes a root seed. Trial `i` of cell `c` draws
//! from its own ChaCha stream derived from `(root, c, i)`, so results do not
//! depend on how trials are scheduled across threads.

mod detection;
mod leakage;
mod pad;
mod report;
mod stats;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use detection::{estimate_detection, DetectionEstimate};
pub use leakage::{
    leakage_sweep, GeometricModel, LeakageReport, LeakageSweep, SweepDiagnostics, SweepGrid,
};
pub use pad::{
    cross_student_accuracy, pad_samples, pad_uniformity_test, PadSample, UniformityReport,
};
pub use report::{write_estimates_csv, write_summary_json, EstimateRow};
pub use stats::{chi_square_sf, mean_and_half_width, wilson_interval, Interval};

/// Random source for trial `trial` of cell `cell` under `root`.
pub fn trial_rng(root: u64, cell: u32, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream((u64::from(cell) << 32) | u64::from(trial));
    rng
}
