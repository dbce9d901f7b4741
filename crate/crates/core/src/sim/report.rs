//! Run results.

use serde::Serialize;

use crate::rx::ErrorCounts;
use crate::sim::channel::FlipCounts;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinkReport {
    pub link: u32,
    /// SYNC deassert to SYNCED, in frame clocks.
    pub sync_frames_from_sync_deassert: Option<f64>,
    pub sync_frames_from_phy_ready: Option<f64>,
    pub sync_frames_from_reset: Option<f64>,
    pub sync_octets_from_sync_deassert: Option<u64>,
    pub release_cycle: Option<u64>,
    pub release_lmfc_phase: Option<u32>,
    /// TX data start to first valid output, final data phase.
    pub total_latency_octets: Option<u64>,
    /// First data octet into the receiver to that word becoming releasable,
    /// on the latest lane.
    pub pipeline_delay_cycles: Option<u64>,
    pub compared_octets: u64,
    pub mismatched_octets: u64,
    /// Compared and mismatched octets of the last data phase only.
    pub final_compared_octets: u64,
    pub final_mismatched_octets: u64,
    pub valid_cycles: u64,
    pub resync_count: u32,
    pub faults: Vec<String>,
    pub error_counts: ErrorCounts,
    pub flips: FlipCounts,
    pub sysref_misaligned: bool,
    pub final_state: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimReport {
    pub cycles: u64,
    pub sync_frames_from_sync_deassert: Option<f64>,
    pub sync_frames_from_phy_ready: Option<f64>,
    pub sync_frames_from_reset: Option<f64>,
    pub release_lmfc_phase: Option<u32>,
    pub total_latency_octets: Option<u64>,
    pub pipeline_delay_cycles: Option<u64>,
    /// Every compared octet matched, and at least one was compared.
    pub payload_match: bool,
    /// Same, restricted to the last data phase of every link.
    pub final_payload_match: bool,
    pub compared_octets: u64,
    pub mismatched_octets: u64,
    pub error_counts: ErrorCounts,
    pub flips: FlipCounts,
    pub resync_count: u32,
    pub sysref_misaligned: bool,
    pub links: Vec<LinkReport>,
}

fn worst<T: PartialOrd + Copy>(v: impl Iterator<Item = Option<T>>) -> Option<T> {
    let mut out: Option<T> = None;
    for x in v {
        let x = x?;
        out = Some(match out {
            Some(o) if o >= x => o,
            _ => x,
        });
    }
    out
}

impl SimReport {
    pub fn from_links(cycles: u64, links: Vec<LinkReport>) -> Self {
        let mut counts = ErrorCounts::default();
        let mut flips = FlipCounts::default();
        for l in &links {
            let e = &l.error_counts;
            counts.not_in_table += e.not_in_table;
            counts.disparity += e.disparity;
            counts.unexpected_control += e.unexpected_control;
            counts.marker_mismatch += e.marker_mismatch;
            counts.config_mismatch += e.config_mismatch;
            counts.buffer_overflow += e.buffer_overflow;
            counts.buffer_underflow += e.buffer_underflow;
            counts.error_threshold += e.error_threshold;
            counts.ilas_timeout += e.ilas_timeout;
            flips.flagged += l.flips.flagged;
            flips.miscoded += l.flips.miscoded;
            flips.ignored += l.flips.ignored;
        }
        let compared: u64 = links.iter().map(|l| l.compared_octets).sum();
        let mismatched: u64 = links.iter().map(|l| l.mismatched_octets).sum();
        SimReport {
            cycles,
            sync_frames_from_sync_deassert: worst(links.iter().map(|l| l.sync_frames_from_sync_deassert)),
            sync_frames_from_phy_ready: worst(links.iter().map(|l| l.sync_frames_from_phy_ready)),
            sync_frames_from_reset: worst(links.iter().map(|l| l.sync_frames_from_reset)),
            release_lmfc_phase: links.first().and_then(|l| l.release_lmfc_phase),
            total_latency_octets: worst(links.iter().map(|l| l.total_latency_octets)),
            pipeline_delay_cycles: worst(links.iter().map(|l| l.pipeline_delay_cycles)),
            payload_match: compared > 0 && mismatched == 0,
            final_payload_match: links
                .iter()
                .all(|l| l.final_compared_octets > 0 && l.final_mismatched_octets == 0),
            compared_octets: compared,
            mismatched_octets: mismatched,
            error_counts: counts,
            flips,
            resync_count: links.iter().map(|l| l.resync_count).sum(),
            sysref_misaligned: links.iter().any(|l| l.sysref_misaligned),
            links,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
