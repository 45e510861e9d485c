//! Phase-gate superreplication toolkit.
//!
//! * [`qmat`]: dense complex matrices, states and qubit-register helpers.
//! * [`gates`]: phase, Toffoli and controlled-phase gates, the 1→2 replication
//!   circuits, twirling, baselines and the optimal cloner.
//! * [`superrep`]: the general N→M construction and its fidelity.
//! * [`choi`]: Choi matrices, gate and process fidelities.
//! * [`optics`]: linear-optics model of the postselected Toffoli.
//! * [`tomo`]: simulated process tomography with maximum-likelihood
//!   reconstruction and Monte Carlo error bars.

pub mod choi;
pub mod error;
pub mod gates;
pub mod optics;
pub mod qmat;
pub mod superrep;
pub mod tomo;

pub use error::{Error, Result};
