//! RIS-assisted multi-user hybrid beamforming with discrete phase shifts.

pub mod analog;
pub mod baselines;
pub mod channel;
pub mod codebook;
pub mod config;
pub mod digital;
pub mod error;
pub mod geometry;
pub mod los;
pub mod par;
pub mod srm;
pub mod sweep;

pub use channel::{assemble_f, q_of_theta, user_rates, CMatrix, ChannelTensor, PhaseIndexMatrix};
pub use config::SystemConfig;
pub use digital::{algorithm1, water_filling, zf_precoder, ZfSolution};
pub use error::{Error, Result};
pub use geometry::{build_geometry, DistanceMode, GeometrySolution};
pub use srm::{run_srm, SrmOptions, SrmTrace};
