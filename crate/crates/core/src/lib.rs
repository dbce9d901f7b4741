//! Cycle-stepped model of a JESD204B Subclass 1 link.
//!
//! The transmitter ([`tx`]) emits CGS, ILAS and payload four octets per lane
//! per link clock; [`codec`] carries those characters over an 8b/10b line;
//! the receiver ([`rx`]) aligns, deskews and releases the lanes on an
//! LMFC boundary. [`sim`] wires everything together with an impairment
//! channel and measures sync time and latency.

pub mod codec;
pub mod config;
pub mod ilas;
pub mod io;
pub mod payload;
pub mod rx;
pub mod scrambler;
pub mod sim;
pub mod tx;

pub use codec::{Char, RunningDisparity, Symbol10};
pub use config::{ConfigErrors, ConstraintViolation, LinkConfig};
pub use ilas::{ChecksumRule, IlasConfig, IlasPolicy, IlasSettings};
pub use rx::{Receiver, RxFsm, RxOutput};
pub use tx::TxModel;
