//! Static and evolutionary solvers on sampled environments, and the
//! independent oracles used to check them.

mod delta;
mod fk;
mod graph;
mod metric;
mod sweep;
mod time;

use std::io::Write;
use std::path::Path;

pub use delta::{brute_force_delta, solve_delta, solve_delta_on, DeltaOptions, DeltaProblemResult};
pub use fk::{feynman_kac_metric, hitting_laplace_1d, FkEstimate, FkOptions};
pub use graph::graph_metric;
pub use metric::{metric_box, probe_directions, solve_metric, source_set, MetricOptions, MetricSolution};
pub use time::{scaled_potential, solve_time_dependent, TimeDependentResult};

use crate::error::{Error, Result};

/// Residual history as `iteration,residual` CSV.
pub fn write_history_csv(path: &Path, history: &[f64]) -> Result<()> {
    let mut out = String::from("iteration,residual\n");
    for (i, r) in history.iter().enumerate() {
        out.push_str(&format!("{},{:e}\n", i + 1, r));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
