//! Discrete-time Gaussian-state simulator of a measurement-feedback coherent Ising machine.

pub mod crystal;
pub mod error;
pub mod gaussian;
pub mod integrate;
pub mod ising;
pub mod machine;
pub mod noise;
pub mod reference;
pub mod sampling;

pub use error::{CimError, Result};
pub use gaussian::{GaussianMode, HomodyneOutcome, JointGaussianState, ModeSelector};
pub use ising::{IsingProblem, Level, LevelSet, SpinConfiguration};
pub use machine::{derive_params, linear_threshold, Machine, MachineParams, MachineState, Mode, UserParams};
pub use sampling::{run_ensemble, run_trajectory, EnsembleConfig, SamplingReport};
