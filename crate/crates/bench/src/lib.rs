//! Shared fixtures for the benchmarks.

use qot_core::analytics::{select_params, SelectionConfig};
use qot_core::protocols::rot::RotConfig;
use qot_core::{ParamTableRow, SystemParams};

/// The default row at `mu` and an error-free session configuration for it.
pub fn fixture(mu: f64) -> (RotConfig, ParamTableRow) {
    let row = *select_params(mu, &SelectionConfig::default())
        .expect("valid mu")
        .row()
        .expect("feasible mu");
    let system = SystemParams::ideal_for_mu(mu, 0.8).expect("valid mu");
    let config = RotConfig::new(system, row.n_pulses, 0.95 * row.a, 0.005, row.l_obt).expect("valid config");
    (config, row)
}
