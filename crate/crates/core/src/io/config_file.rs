//! JSON configuration files.
//!
//! Link parameters sit at the top level (`{"L":2,"F":4,"K":32}` is a complete
//! file); the optional `ilas`, `channel`, `payload`, `sysref`, `run` and
//! `lane_map` keys carry the rest of a [`SimSetup`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigErrors, LinkConfig};
use crate::ilas::IlasSettings;
use crate::payload::PayloadSpec;
use crate::sim::{ChannelSpec, RunSpec, SimConfigError, SimSetup, SysrefSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: IoMessage },
    #[error("parse error at line {line}, column {column}{}: {message}", key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse {
        line: usize,
        column: usize,
        key: Option<String>,
        message: String,
    },
    #[error(transparent)]
    Constraint(#[from] ConfigErrors),
    #[error("{0}")]
    Invalid(String),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its text.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct IoMessage(pub String);

impl From<SimConfigError> for ConfigFileError {
    fn from(e: SimConfigError) -> Self {
        match e {
            SimConfigError::Config(c) => ConfigFileError::Constraint(c),
            SimConfigError::Invalid(m) => ConfigFileError::Invalid(m),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    links: Option<u32>,
    #[serde(rename = "L")]
    lanes: u32,
    #[serde(rename = "F")]
    octets_per_frame: u32,
    #[serde(rename = "K")]
    frames_per_multiframe: u32,
    scrambling: Option<bool>,
    buffer_depth: Option<u32>,
    cgs_threshold: Option<u32>,
    stability_cycles: Option<u32>,
    error_threshold: Option<u32>,
    error_window: Option<u32>,
    release_offset: Option<u32>,
    #[serde(default)]
    ilas: IlasSettings,
    #[serde(default)]
    channel: ChannelSpec,
    #[serde(default)]
    payload: PayloadSpec,
    #[serde(default)]
    sysref: SysrefSpec,
    #[serde(default)]
    run: RunSpec,
    lane_map: Option<Vec<usize>>,
}

impl FileConfig {
    fn into_setup(self) -> SimSetup {
        let mut link = LinkConfig::new(self.lanes, self.octets_per_frame, self.frames_per_multiframe);
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { link.$f = v; })* };
        }
        set!(
            links,
            scrambling,
            buffer_depth,
            cgs_threshold,
            stability_cycles,
            error_threshold,
            error_window,
            release_offset
        );
        SimSetup {
            link,
            ilas: self.ilas,
            channel: self.channel,
            payload: self.payload,
            sysref: self.sysref,
            run: self.run,
            lane_map: self.lane_map,
        }
    }
}

/// The flat file layout, for echoing a setup back out.
#[derive(Serialize)]
struct EffectiveConfig<'a> {
    #[serde(flatten)]
    link: &'a LinkConfig,
    ilas: &'a IlasSettings,
    channel: &'a ChannelSpec,
    payload: &'a PayloadSpec,
    sysref: &'a SysrefSpec,
    run: &'a RunSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    lane_map: &'a Option<Vec<usize>>,
}

fn effective(setup: &SimSetup) -> EffectiveConfig<'_> {
    EffectiveConfig {
        link: &setup.link,
        ilas: &setup.ilas,
        channel: &setup.channel,
        payload: &setup.payload,
        sysref: &setup.sysref,
        run: &setup.run,
        lane_map: &setup.lane_map,
    }
}

/// Pretty JSON in the file layout, with every default filled in.
pub fn to_json(setup: &SimSetup) -> String {
    serde_json::to_string_pretty(&effective(setup)).expect("setup serializes")
}

/// Single-line variant used in capture headers.
pub fn to_json_compact(setup: &SimSetup) -> String {
    serde_json::to_string(&effective(setup)).expect("setup serializes")
}

fn unknown_key(message: &str) -> Option<String> {
    let rest = message
        .strip_prefix("unknown field `")
        .or_else(|| message.strip_prefix("missing field `"))?;
    rest.split('`').next().map(str::to_string)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SimSetup, ConfigFileError> {
    let file: FileConfig = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        // serde_json appends " at line N column M"; keep just the reason
        let reason = message.split(" at line ").next().unwrap_or(&message).to_string();
        ConfigFileError::Parse {
            line: e.line(),
            column: e.column(),
            key: unknown_key(&reason),
            message: reason,
        }
    })?;
    let setup = file.into_setup();
    setup.validate()?;
    Ok(setup)
}

pub fn load_config(path: &Path) -> Result<SimSetup, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigFileError::Io {
        path: path.display().to_string(),
        source: IoMessage(e.to_string()),
    })?;
    parse_config(&text)
}
