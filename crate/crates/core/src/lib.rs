//! Discrete-time quantum walks on two coupled concentric rings and on Moire
//! ring overlays.
//!
//! * [`ring`]: geometry, junction schedule, coin and the one-step unitary
//! * [`spectrum`]: eigenphase bands over Bloch momenta, AB shift, group velocity
//! * [`blockmatrix`]: momentum-tagged 4x4 boxes, grid layouts, column swaps, audits
//! * [`evolve`]: time evolution and probability distributions
//! * [`linalg`]: unitary eigendecomposition and phase utilities

pub mod blockmatrix;
pub mod error;
pub mod evolve;
pub mod linalg;
pub mod ring;
pub mod spectrum;

pub use error::{Error, Result};
pub use ring::{
    bloch_step_matrix, build_coin, build_step_operator, junction_schedule, CoinAngles, Component, JunctionMode,
    JunctionSchedule, MagneticConfig, RingPairConfig, StepOperator,
};
