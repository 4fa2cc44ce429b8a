//! Wave-packet dynamics in the lattice and in the effective Dirac picture.

mod coarse;
mod klein;
mod packet;
mod propagate;
mod slater;
mod state;

pub use coarse::{coarse_grain, CoarseBand};
pub use klein::{barrier_top, run_klein_scenario, run_klein_sweep, KleinMetrics, KleinRun, KleinScenario};
pub use packet::{
    band_populations, bloch_packet, prepare_bloch_packet, prepare_dirac_packet, WavePacketSpec,
    MIN_BAND_PURITY, MIN_POINTS_PER_PERIOD,
};
pub use propagate::{
    propagate_dirac, propagate_schrodinger, schrodinger_energy, write_trajectory, PropagationOptions,
    Snapshot, Trajectory,
};
pub use slater::{slater_oracle, BandOperator, Envelope, SlaterReport};
pub use state::{Observables, SlowPotential, WaveState};
