//! Wave propagation on stationary axisymmetric backgrounds and the forward
//! observables of the one-dimensional restriction.

pub mod forward;
pub mod grid;
pub mod solver;

pub use forward::{
    bump_data, dn_operator, echo_experiment, lambda_pm, travel_time, DnSetup, DnTrace, EchoPoint, EchoSetup, LambdaPair,
    LinePath, Path,
};
pub use grid::{CellKind, Grid2D, GridSpec};
pub use solver::{
    run_simulation, BoundaryData, Energies, EnergyReport, OuterLayer, Profile, SimConfig, Simulation, Wall,
    WaveState,
};
