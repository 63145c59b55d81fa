mod analysis;
mod config;
pub mod io;
mod report;
mod sweep;
mod verify;

pub use analysis::{cell_average, compare_to_darcy, fit_rate, zero_extend, CoarseField, RateFit, ZERO_EXTENSION_TOL};
pub use config::{
    CarreauSection, DomainSection, ForcingName, ForcingSection, HoleName, HoleSection, InitialName, ModelName,
    SolverSection, SweepConfig, SweepSection,
};
pub use sweep::{
    monotone_with_tolerance, run_sweep, scaled_average, Check, DarcyRecord, EnergyRecord, EpsilonRecord, NamedRate,
    PermeabilityRecord, RemainderDecay, SweepArtifacts, SweepReport, ENERGY_SLACK_TOL, SCHEMA_VERSION,
};
pub use report::{darcy_csv, norms_csv, permeability_csv, rates_csv, write_report};
pub use verify::{run_verify, VerifyReport};
