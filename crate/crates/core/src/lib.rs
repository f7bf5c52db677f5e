//! Asymptotic key-rate analysis for twin-field QKD with discrete-phase-randomized
//! sources.
//!
//! The pipeline for a single channel point is:
//!
//! 1. [`channel::observed_stats`] produces the gains and error rates an honest
//!    relay would announce.
//! 2. [`eve_bound::max_holevo`] builds the decoy linear program over the
//!    approximated photon-number yields (using the tail distributions and
//!    fidelity bounds from [`photon_stats`]) and solves it with [`lp`].
//! 3. [`key_rate::secret_key_rate`] assembles the final rate, which
//!    [`param_opt`] maximizes over the signal and decoy intensities and
//!    [`scan`] sweeps across channel loss.
//!
//! [`protocol_mc`] runs the protocol trial by trial and serves as an
//! independent check on the analytic channel model.

pub mod channel;
pub mod error;
pub mod eve_bound;
pub mod key_rate;
pub mod lp;
pub mod param_opt;
pub mod params;
pub mod photon_stats;
pub mod protocol_mc;
pub mod scan;

pub use channel::{ChannelParams, ObservedStats};
pub use error::{Error, Result};
pub use eve_bound::{EveBound, YieldVector};
pub use key_rate::{binary_entropy, plob_bound, secret_key_rate, RatePoint};
pub use lp::{LinearProgram, LpError, LpSolution, LpStatus};
pub use param_opt::{optimize_intensities, OptimizedPoint, SearchSpec};
pub use params::ProtocolParams;
pub use photon_stats::{FidelityTable, Intensity, PhaseCount, TailDistribution};
pub use protocol_mc::{run_trials, McEstimate};
pub use scan::{run_scan, RunConfig, ScanRow};
