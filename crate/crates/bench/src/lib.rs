//! Shared fixtures for the benchmarks.

use bsturing_core::driver::{make_initial_condition, SimConfig};
use bsturing_core::fem::{assemble_operators, CoupledSystemOperators};
use bsturing_core::mesh::{generate_ball_mesh, BulkSurfaceMesh};
use bsturing_core::timestep::SystemState;

pub struct Fixture {
    pub cfg: SimConfig,
    pub mesh: BulkSurfaceMesh,
    pub ops: CoupledSystemOperators,
    pub state: SystemState,
}

/// Default problem with a seeded perturbation on the ball mesh at `level`.
pub fn fixture(level: usize, d_bulk: f64, d_surf: f64) -> Fixture {
    let cfg = SimConfig {
        level,
        ..SimConfig::reference(d_bulk, d_surf)
    };
    let steady = cfg.validate().expect("valid config");
    let mesh = generate_ball_mesh(level).expect("mesh");
    let ops = assemble_operators(&mesh).expect("assembly");
    let state = make_initial_condition(
        mesh.n_vertices(),
        mesh.n_surface(),
        &steady,
        cfg.epsilon_ic,
        cfg.seed,
    );
    Fixture {
        cfg,
        mesh,
        ops,
        state,
    }
}
