//! Static link parameters.
//!
//! A [`LinkConfig`] is the full set of compile-time style knobs of the
//! receiver: lane count, frame geometry, scrambling, elastic buffer depth and
//! the thresholds used by the link state machine. It is plain data; call
//! [`LinkConfig::validate`] before handing it to the transmitter, receiver or
//! harness.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Maximum number of independent links in one simulation.
pub const MAX_LINKS: u32 = 4;
/// Maximum lanes per link supported by the lane datapath.
pub const MAX_LANES: u32 = 32;
/// Octets delivered per lane per link clock cycle (32-bit datapath).
pub const OCTETS_PER_CYCLE: u32 = 4;

pub const DEFAULT_CGS_THRESHOLD: u32 = 4;
pub const DEFAULT_STABILITY_CYCLES: u32 = 16;
pub const DEFAULT_ERROR_THRESHOLD: u32 = 4;
pub const DEFAULT_ERROR_WINDOW: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Number of independent links sharing one SYSREF.
    pub links: u32,
    /// Lanes per link (L).
    #[serde(rename = "L")]
    pub lanes: u32,
    /// Octets per frame (F).
    #[serde(rename = "F")]
    pub octets_per_frame: u32,
    /// Frames per multiframe (K).
    #[serde(rename = "K")]
    pub frames_per_multiframe: u32,
    pub scrambling: bool,
    /// Elastic buffer capacity per lane, in octets.
    pub buffer_depth: u32,
    /// Consecutive clean K28.5 octets needed before a lane reports CGS.
    pub cgs_threshold: u32,
    /// Cycles all lanes must hold CGS before SYNC is released.
    pub stability_cycles: u32,
    /// Decode errors tolerated per window; one more forces a resync.
    pub error_threshold: u32,
    /// Length of the sliding error window in cycles.
    pub error_window: u32,
    /// LMFC phase (octets) at which the elastic buffers are released.
    pub release_offset: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self::new(2, 4, 32)
    }
}

impl LinkConfig {
    /// A single-link configuration with every optional knob at its default.
    pub fn new(lanes: u32, octets_per_frame: u32, frames_per_multiframe: u32) -> Self {
        LinkConfig {
            links: 1,
            lanes,
            octets_per_frame,
            frames_per_multiframe,
            scrambling: false,
            buffer_depth: 2 * octets_per_frame * frames_per_multiframe,
            cgs_threshold: DEFAULT_CGS_THRESHOLD,
            stability_cycles: DEFAULT_STABILITY_CYCLES,
            error_threshold: DEFAULT_ERROR_THRESHOLD,
            error_window: DEFAULT_ERROR_WINDOW,
            release_offset: 0,
        }
    }

    pub fn with_scrambling(mut self, on: bool) -> Self {
        self.scrambling = on;
        self
    }

    /// Octets per lane per multiframe (F·K).
    pub fn multiframe_octets(&self) -> u32 {
        self.octets_per_frame * self.frames_per_multiframe
    }

    /// Link clock cycles per multiframe.
    pub fn multiframe_cycles(&self) -> u32 {
        self.multiframe_octets() / OCTETS_PER_CYCLE
    }

    /// Link clock cycles per frame.
    pub fn frame_cycles(&self) -> u32 {
        self.octets_per_frame / OCTETS_PER_CYCLE
    }

    /// Length of the initial lane alignment sequence per lane, in octets.
    pub fn ilas_octets(&self) -> u32 {
        4 * self.multiframe_octets()
    }

    /// Largest lane-to-lane skew (octets) the elastic buffers absorb for any
    /// LMFC phase relationship.
    pub fn skew_tolerance(&self) -> u32 {
        self.buffer_depth.saturating_sub(self.multiframe_octets())
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<LinkConfig, ConfigErrors> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, rule: &'static str, actual: u64, allowed: &str| {
            if !ok {
                errs.push(ConstraintViolation {
                    rule,
                    actual,
                    allowed: allowed.to_string(),
                });
            }
        };

        let f = self.octets_per_frame;
        let k = self.frames_per_multiframe;
        let fk = u64::from(f) * u64::from(k);

        check(
            (1..=MAX_LINKS).contains(&self.links),
            "links-range",
            self.links.into(),
            "1..=4",
        );
        check(
            (1..=MAX_LANES).contains(&self.lanes),
            "L-range",
            self.lanes.into(),
            "1..=32",
        );
        check((4..=32).contains(&f), "F-range", f.into(), "4..=32");
        check(f.is_multiple_of(4), "F-multiple-of-4", f.into(), "multiple of 4");
        check((1..=32).contains(&k), "K-range", k.into(), "1..=32");
        check((17..=1024).contains(&fk), "FK-range", fk, "17..=1024");
        check(fk % 4 == 0, "FK-multiple-of-4", fk, "multiple of 4");
        check(
            u64::from(self.buffer_depth) * 2 >= fk,
            "buffer-depth-min",
            self.buffer_depth.into(),
            &format!(">= F*K/2 = {}", fk / 2),
        );
        check(
            self.buffer_depth.is_multiple_of(4),
            "buffer-depth-multiple-of-4",
            self.buffer_depth.into(),
            "multiple of 4",
        );
        check(
            u64::from(self.release_offset) < fk,
            "release-offset-range",
            self.release_offset.into(),
            &format!("< F*K = {fk}"),
        );
        check(
            self.release_offset.is_multiple_of(4),
            "release-offset-multiple-of-4",
            self.release_offset.into(),
            "multiple of 4",
        );
        check(
            self.cgs_threshold >= 1,
            "cgs-threshold-min",
            self.cgs_threshold.into(),
            ">= 1",
        );
        check(
            self.error_window >= 1,
            "error-window-min",
            self.error_window.into(),
            ">= 1",
        );

        if errs.is_empty() {
            Ok(*self)
        } else {
            Err(ConfigErrors(errs))
        }
    }
}

/// One violated constraint: which rule, the offending value, what is allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintViolation {
    pub rule: &'static str,
    pub actual: u64,
    pub allowed: String,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: got {}, allowed {}", self.rule, self.actual, self.allowed)
    }
}

/// Every violation found by [`LinkConfig::validate`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid link configuration: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ConfigErrors(pub Vec<ConstraintViolation>);

impl ConfigErrors {
    pub fn has_rule(&self, rule: &str) -> bool {
        self.0.iter().any(|v| v.rule == rule)
    }
}
