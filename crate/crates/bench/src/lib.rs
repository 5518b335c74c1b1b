//! Fixtures shared by the benchmarks.

use bumpsim::harness::ExperimentConfig;
use bumpsim::{ConfigurationName, HornConfiguration, VehicleState, Wall};

/// Vehicle pressing its upper horn 5 mm into the wall at the default tilt.
pub fn pressing_state(cfg: &HornConfiguration) -> VehicleState {
    let tip = cfg.horns[0].attach_body;
    VehicleState {
        theta: 0.26,
        vx: 0.3,
        q: -0.5,
        ..VehicleState::at_rest(-tip.0 + 0.005, 1.0)
    }
}

pub fn wall() -> Wall {
    Wall::default()
}

/// Single-bump touch-and-go run.
pub fn short_run(name: ConfigurationName) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::touch_and_go(name, 0);
    cfg.touch_and_go.n_bumps = 1;
    cfg
}
