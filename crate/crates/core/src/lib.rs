//! Numerical toolkit for abstract control systems `ẋ = Ax − Bσ(B*x + d)` with
//! saturated feedback on `L²(0,1)` grids and on `ℝᵐ`.

pub mod error;
pub mod feedback;
pub mod grid;
pub mod linalg;
pub mod lyapunov;
pub mod oracles;
pub mod quadrature;
pub mod sampling;
pub mod stability;
pub mod systems;

pub use error::{Error, Result};
pub use feedback::FeedbackMap;
pub use grid::{FiniteVector, GridFunction, State};
pub use lyapunov::{DiniEstimate, DiniOptions, LyapunovSpec};
pub use oracles::CounterexampleProfile;
pub use stability::{SimulationOptions, StabilityReport, Verdict};
pub use systems::{
    Alignment, Disturbance, GeneratorSpec, InputOperator, Scheme, SolverOptions, Substep, SystemSpec, Trajectory,
};
