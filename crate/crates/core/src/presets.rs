//! Standard setups: the limb-bud parameter set with its Gaussian bump in
//! the initial cell density, and the default truth/measurement meshes.

use crate::error::Result;
use crate::grid::{PhysicalParams, SimulationGrid};
use crate::pde::SolverOptions;
use crate::sensitivity::Sensitivity;
use crate::synth;
use crate::pde::StateTrajectory;

pub const MYERSCOUGH_T_FINAL: f64 = 0.25;
pub const MYERSCOUGH_C0: f64 = 0.5;

/// u₀(x) = 1 + exp(-55 (x - 0.5)²)
pub fn myerscough_u0(x: f64) -> f64 {
    1.0 + (-55.0 * (x - 0.5) * (x - 0.5)).exp()
}

pub fn myerscough_c0(_x: f64) -> f64 {
    MYERSCOUGH_C0
}

/// Default truth mesh: 201 nodes x 2000 steps.
pub fn fine_grid(t_final: f64) -> Result<SimulationGrid> {
    SimulationGrid::unit(201, t_final, 2000)
}

/// Default measurement/inversion mesh: 51 nodes x 250 steps.
pub fn measurement_grid(t_final: f64) -> Result<SimulationGrid> {
    SimulationGrid::unit(51, t_final, 250)
}

/// Internal steps per output interval for truth runs on the fine mesh.
pub const TRUTH_SUBSTEPS: usize = 8;
/// Internal steps per output interval for inversion runs. The output mesh
/// fixes where data live; the integrator may step below it.
pub const INVERSION_SUBSTEPS: usize = 10;

/// Parameters, meshes and initial data of one experiment.
#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub params: PhysicalParams,
    pub fine: SimulationGrid,
    pub measurement: SimulationGrid,
    pub truth_solver: SolverOptions,
    pub inversion_solver: SolverOptions,
}

impl Scenario {
    pub fn myerscough() -> Self {
        Self {
            params: PhysicalParams::myerscough(),
            fine: fine_grid(MYERSCOUGH_T_FINAL).expect("valid preset grid"),
            measurement: measurement_grid(MYERSCOUGH_T_FINAL).expect("valid preset grid"),
            truth_solver: SolverOptions { min_substeps: TRUTH_SUBSTEPS, ..Default::default() },
            inversion_solver: SolverOptions { min_substeps: INVERSION_SUBSTEPS, ..Default::default() },
        }
    }

    /// Fine-mesh truth for `a`, restricted to the measurement mesh.
    pub fn measurements<S: Sensitivity + ?Sized>(&self, a: &S) -> Result<StateTrajectory> {
        synth::synthesize_with(
            a,
            &self.params,
            &self.fine,
            &self.measurement,
            myerscough_u0,
            myerscough_c0,
            &self.truth_solver,
        )
    }

    pub fn u0_on(&self, grid: &SimulationGrid) -> Vec<f64> {
        grid.sample(myerscough_u0)
    }

    pub fn c0_on(&self, grid: &SimulationGrid) -> Vec<f64> {
        grid.sample(myerscough_c0)
    }
}
