//! ILAS link-configuration octets.
//!
//! The second multiframe of the initial lane alignment sequence carries 14
//! octets describing the link. This module packs and unpacks that image,
//! computes the FCHK checksum, and decides whether a received image is
//! acceptable for a given [`LinkConfig`].
//!
//! Octet layout (bit 7 is the MSB):
//!
//! | octet | content                               |
//! |-------|---------------------------------------|
//! | 0     | DID                                   |
//! | 1     | ADJCNT\[7:4\] BID\[3:0\]              |
//! | 2     | ADJDIR\[6\] PHADJ\[5\] LID\[4:0\]     |
//! | 3     | SCR\[7\] L-1\[4:0\]                   |
//! | 4     | F-1                                   |
//! | 5     | K-1\[4:0\]                            |
//! | 6     | M-1                                   |
//! | 7     | CS\[7:6\] N-1\[4:0\]                  |
//! | 8     | SUBCLASSV\[7:5\] N'-1\[4:0\]          |
//! | 9     | JESDV\[7:5\] S-1\[4:0\]               |
//! | 10    | HD\[7\] CF\[4:0\]                     |
//! | 11    | RES1                                  |
//! | 12    | RES2                                  |
//! | 13    | FCHK                                  |

use serde::{Deserialize, Serialize};

use crate::config::LinkConfig;

pub const ILAS_CONFIG_OCTETS: usize = 14;

/// Which bytes the FCHK checksum sums over. Vendors disagree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecksumRule {
    /// Sum of octets 0..=12 (the image with FCHK zeroed), mod 256.
    #[default]
    OctetSum,
    /// Sum of the individual encoded field values, mod 256.
    FieldSum,
}

/// Which received fields must agree with the local configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IlasPolicy {
    /// L, F, K and SCR must match. FCHK is not checked.
    #[default]
    Minimal,
    /// Every field must match the expected image and FCHK must be correct.
    Strict,
}

/// The link-configuration fields, stored exactly as encoded on the wire.
///
/// Count-like fields (`l`, `f`, `k`, `m`, `n`, `nprime`, `s`) hold the value
/// minus one; use the accessor methods for the actual counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IlasConfig {
    pub did: u8,
    pub bid: u8,
    pub adjcnt: u8,
    pub adjdir: u8,
    pub phadj: u8,
    pub lid: u8,
    pub scr: u8,
    pub l: u8,
    pub f: u8,
    pub k: u8,
    pub m: u8,
    pub cs: u8,
    pub n: u8,
    pub subclassv: u8,
    pub nprime: u8,
    pub jesdv: u8,
    pub s: u8,
    pub hd: u8,
    pub cf: u8,
    pub res1: u8,
    pub res2: u8,
    pub fchk: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum IlasError {
    #[error("field {field} value {value} does not fit in {bits} bits")]
    FieldOverflow {
        field: &'static str,
        value: u8,
        bits: u32,
    },
}

/// Mod-256 sum of `bytes`.
pub fn compute_fchk(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0u8, |acc, &b| acc.wrapping_add(b))
}

impl IlasConfig {
    pub fn lanes(&self) -> u32 {
        u32::from(self.l) + 1
    }

    pub fn octets_per_frame(&self) -> u32 {
        u32::from(self.f) + 1
    }

    pub fn frames_per_multiframe(&self) -> u32 {
        u32::from(self.k) + 1
    }

    pub fn converters(&self) -> u32 {
        u32::from(self.m) + 1
    }

    pub fn converter_resolution(&self) -> u32 {
        u32::from(self.n) + 1
    }

    pub fn bits_per_sample(&self) -> u32 {
        u32::from(self.nprime) + 1
    }

    pub fn samples_per_frame(&self) -> u32 {
        u32::from(self.s) + 1
    }

    pub fn scrambling(&self) -> bool {
        self.scr != 0
    }

    /// (name, value, width in bits) for every field except FCHK.
    fn fields(&self) -> [(&'static str, u8, u32); 21] {
        [
            ("DID", self.did, 8),
            ("BID", self.bid, 4),
            ("ADJCNT", self.adjcnt, 4),
            ("ADJDIR", self.adjdir, 1),
            ("PHADJ", self.phadj, 1),
            ("LID", self.lid, 5),
            ("SCR", self.scr, 1),
            ("L", self.l, 5),
            ("F", self.f, 8),
            ("K", self.k, 5),
            ("M", self.m, 8),
            ("CS", self.cs, 2),
            ("N", self.n, 5),
            ("SUBCLASSV", self.subclassv, 3),
            ("NP", self.nprime, 5),
            ("JESDV", self.jesdv, 3),
            ("S", self.s, 5),
            ("HD", self.hd, 1),
            ("CF", self.cf, 5),
            ("RES1", self.res1, 8),
            ("RES2", self.res2, 8),
        ]
    }

    /// Checksum of this configuration under `rule`. Ignores `self.fchk`.
    pub fn checksum(&self, rule: ChecksumRule) -> u8 {
        match rule {
            ChecksumRule::OctetSum => compute_fchk(&self.image_without_fchk()[..13]),
            ChecksumRule::FieldSum => {
                let sum: Vec<u8> = self
                    .fields()
                    .iter()
                    .filter(|(name, _, _)| !name.starts_with("RES"))
                    .map(|&(_, v, _)| v)
                    .collect();
                compute_fchk(&sum)
            }
        }
    }

    /// Copy of `self` with FCHK set to the checksum under `rule`.
    pub fn sealed(mut self, rule: ChecksumRule) -> Self {
        self.fchk = self.checksum(rule);
        self
    }

    fn image_without_fchk(&self) -> [u8; ILAS_CONFIG_OCTETS] {
        [
            self.did,
            (self.adjcnt & 0xf) << 4 | (self.bid & 0xf),
            (self.adjdir & 1) << 6 | (self.phadj & 1) << 5 | (self.lid & 0x1f),
            (self.scr & 1) << 7 | (self.l & 0x1f),
            self.f,
            self.k & 0x1f,
            self.m,
            (self.cs & 3) << 6 | (self.n & 0x1f),
            (self.subclassv & 7) << 5 | (self.nprime & 0x1f),
            (self.jesdv & 7) << 5 | (self.s & 0x1f),
            (self.hd & 1) << 7 | (self.cf & 0x1f),
            self.res1,
            self.res2,
            0,
        ]
    }

    /// Packs into the 14-octet wire image with FCHK recomputed under `rule`.
    pub fn pack(&self, rule: ChecksumRule) -> Result<[u8; ILAS_CONFIG_OCTETS], IlasError> {
        for (field, value, bits) in self.fields() {
            if bits < 8 && value >> bits != 0 {
                return Err(IlasError::FieldOverflow { field, value, bits });
            }
        }
        let mut image = self.image_without_fchk();
        image[13] = self.checksum(rule);
        Ok(image)
    }

    /// Extracts every field; the flag reports whether octet 13 matches the
    /// checksum recomputed from the other fields under `rule`.
    pub fn unpack(octets: &[u8; ILAS_CONFIG_OCTETS], rule: ChecksumRule) -> (IlasConfig, bool) {
        let o = octets;
        let ic = IlasConfig {
            did: o[0],
            adjcnt: o[1] >> 4,
            bid: o[1] & 0xf,
            adjdir: (o[2] >> 6) & 1,
            phadj: (o[2] >> 5) & 1,
            lid: o[2] & 0x1f,
            scr: o[3] >> 7,
            l: o[3] & 0x1f,
            f: o[4],
            k: o[5] & 0x1f,
            m: o[6],
            cs: o[7] >> 6,
            n: o[7] & 0x1f,
            subclassv: o[8] >> 5,
            nprime: o[8] & 0x1f,
            jesdv: o[9] >> 5,
            s: o[9] & 0x1f,
            hd: o[10] >> 7,
            cf: o[10] & 0x1f,
            res1: o[11],
            res2: o[12],
            fchk: o[13],
        };
        let ok = match rule {
            // Bits outside defined fields are not covered by a field sum, so
            // the octet rule sums the raw image.
            ChecksumRule::OctetSum => compute_fchk(&o[..13]) == o[13],
            ChecksumRule::FieldSum => ic.checksum(rule) == o[13],
        };
        (ic, ok)
    }
}

/// How the ILAS configuration is generated by the transmitter and checked by
/// the receiver. Counts here are actual values, not wire encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IlasSettings {
    pub policy: IlasPolicy,
    pub checksum: ChecksumRule,
    pub did: u8,
    pub bid: u8,
    /// Converters per device; `None` derives it from L and F.
    pub m: Option<u32>,
    pub n: u32,
    pub nprime: u32,
    /// Samples per converter per frame; `None` derives it from L and F.
    pub s: Option<u32>,
    pub cs: u8,
    pub cf: u8,
    pub subclassv: u8,
    pub jesdv: u8,
}

impl Default for IlasSettings {
    fn default() -> Self {
        IlasSettings {
            policy: IlasPolicy::Minimal,
            checksum: ChecksumRule::OctetSum,
            did: 0,
            bid: 0,
            m: None,
            n: 16,
            nprime: 16,
            s: None,
            cs: 0,
            cf: 0,
            subclassv: 1,
            jesdv: 1,
        }
    }
}

impl IlasSettings {
    /// Converters and samples-per-frame. By default every 16-bit sample slot
    /// of a frame is its own converter, folding into S when M would overflow
    /// its 8-bit field.
    fn converter_layout(&self, cfg: &LinkConfig) -> (u32, u32) {
        let slots = (cfg.lanes * cfg.octets_per_frame * 8 / self.nprime.max(1)).max(1);
        match (self.m, self.s) {
            (Some(m), Some(s)) => (m, s),
            (Some(m), None) => (m, (slots / m.max(1)).max(1)),
            (None, Some(s)) => ((slots / s.max(1)).max(1), s),
            (None, None) => {
                let s = slots.div_ceil(256);
                (slots / s, s)
            }
        }
    }

    /// The configuration image lane `lane` transmits (and the receiver
    /// expects), FCHK sealed.
    pub fn expected_for_lane(&self, cfg: &LinkConfig, lane: u32) -> IlasConfig {
        let (m, s) = self.converter_layout(cfg);
        let minus_one = |v: u32| v.saturating_sub(1).min(255) as u8;
        IlasConfig {
            did: self.did,
            bid: self.bid,
            lid: lane as u8,
            scr: cfg.scrambling as u8,
            l: minus_one(cfg.lanes),
            f: minus_one(cfg.octets_per_frame),
            k: minus_one(cfg.frames_per_multiframe),
            m: minus_one(m),
            cs: self.cs,
            n: minus_one(self.n),
            subclassv: self.subclassv,
            nprime: minus_one(self.nprime),
            jesdv: self.jesdv,
            s: minus_one(s),
            hd: u8::from(cfg.octets_per_frame <= 2),
            cf: self.cf,
            ..IlasConfig::default()
        }
        .sealed(self.checksum)
    }

    /// Field names in `received` that violate the policy. Empty means accept.
    pub fn mismatches(
        &self,
        received: &IlasConfig,
        checksum_ok: bool,
        expected: &IlasConfig,
    ) -> Vec<&'static str> {
        let mut bad = Vec::new();
        match self.policy {
            IlasPolicy::Minimal => {
                let pairs = [
                    ("L", received.l, expected.l),
                    ("F", received.f, expected.f),
                    ("K", received.k, expected.k),
                    ("SCR", received.scr, expected.scr),
                ];
                bad.extend(pairs.iter().filter(|(_, a, b)| a != b).map(|(n, _, _)| *n));
            }
            IlasPolicy::Strict => {
                bad.extend(
                    received
                        .fields()
                        .iter()
                        .zip(expected.fields().iter())
                        .filter(|(a, b)| a.1 != b.1)
                        .map(|(a, _)| a.0),
                );
                if !checksum_ok {
                    bad.push("FCHK");
                }
            }
        }
        bad
    }
}
