//! SYSREF-locked local multiframe clock.

use serde::Serialize;

use crate::config::OCTETS_PER_CYCLE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LmfcCounter {
    /// Octet position within the multiframe of the current cycle.
    pub phase: u32,
    pub locked: bool,
    /// Sticky: a SYSREF edge arrived while locked at a nonzero phase.
    pub sysref_misaligned: bool,
    period: u32,
    last_sysref: bool,
}

/// Result of one LMFC step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmfcTick {
    pub phase: u32,
    /// This cycle starts a multiframe.
    pub boundary: bool,
    /// A SYSREF rising edge was seen this cycle.
    pub edge: bool,
}

impl LmfcCounter {
    /// `period` is F·K octets.
    pub fn new(period: u32) -> Self {
        LmfcCounter {
            phase: 0,
            locked: false,
            sysref_misaligned: false,
            period,
            last_sysref: false,
        }
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn step(&mut self, sysref: bool) -> LmfcTick {
        let edge = sysref && !self.last_sysref;
        self.last_sysref = sysref;
        let next = (self.phase + OCTETS_PER_CYCLE) % self.period;
        if edge {
            if self.locked && next != 0 {
                self.sysref_misaligned = true;
            }
            self.phase = 0;
            self.locked = true;
        } else {
            self.phase = next;
        }
        LmfcTick {
            phase: self.phase,
            boundary: self.locked && self.phase == 0,
            edge,
        }
    }
}
