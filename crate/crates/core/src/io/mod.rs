//! File formats used by the command line front end.

pub mod capture;
pub mod config_file;
pub mod samples;

pub use capture::{decode_capture, CaptureData, CaptureError, CaptureFile, CaptureFormat, DecodeOutcome};
pub use config_file::{load_config, parse_config, ConfigFileError};
pub use samples::{SampleTable, CSV_HEADER};
