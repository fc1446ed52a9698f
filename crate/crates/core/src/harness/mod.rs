//! Configuration, initial data, run drivers, sweeps and output.

mod config;
mod identities;
mod output;
mod runs;
mod sampling;
mod sweeps;

pub use config::{parse_pairs, SimConfig, Tier};
pub use identities::{check_identities, IdentityCheck};
pub use output::{write_summary, TidyWriter};
pub use runs::{
    base_grid, kinetic_options, micro_options, run, run_micro, run_transport, run_vlasov, sample_request, spatial_marginal,
    Abort, FluidSummary, MicroRun, RunRecord, Schedule, TransportRun, VlasovRun, VlasovSettings, GRAVITY,
};
pub use sampling::{
    clip_relative_velocities, randomized_halton, sample_initial, Family, InitialData, InitialSpec, SampleRequest,
    MAX_CLIPPED_FRACTION,
};
pub use sweeps::{
    compare_hydro, compare_meanfield, sweep_hydrodynamic, sweep_meanfield, w2_between, HydroReport, HydroRow,
    MeanFieldReport, MeanFieldRow, LAYER_WIDTH,
};
