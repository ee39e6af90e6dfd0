use std::time::Instant;

use subac::integrator::{simulate, SimConfig};
use subac::spectral::Field;

fn main() {
    let config = SimConfig {
        horizon: 10.0,
        dt: 1e-3,
        store_states: false,
        ..SimConfig::default()
    };
    let x0 = Field::unit_mode(config.modes, 1);
    let start = Instant::now();
    let traj = simulate(&config, &x0).expect("simulation");
    let secs = start.elapsed().as_secs_f64();
    println!(
        "{} steps in {secs:.3}s ({:.2} µs/step), final ‖X‖_H = {:.4}",
        config.steps(),
        secs * 1e6 / config.steps() as f64,
        traj.h_norm.last().unwrap()
    );
}
