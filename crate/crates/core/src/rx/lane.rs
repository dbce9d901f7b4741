//! Per-lane datapath: octet alignment, CGS monitor, ILAS capture,
//! descrambling and the elastic buffer.

use serde::Serialize;

use crate::codec::Char;
use crate::config::LinkConfig;
use crate::ilas::{IlasConfig, IlasSettings, ILAS_CONFIG_OCTETS};
use crate::rx::elastic::LaneBuffer;
use crate::scrambler::{descramble_word32, pack_word, ScramblerState};
use crate::tx::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LanePhase {
    /// Counting commas.
    Cgs,
    /// SYNC released; waiting for the first /R/.
    AwaitIlas,
    Ilas,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LaneFault {
    #[error("marker mismatch at ILAS octet {position}: expected {expected}, got {got}")]
    MarkerMismatch {
        position: u32,
        expected: String,
        got: String,
    },
    #[error("ILAS configuration mismatch in {fields:?}")]
    ConfigMismatch { fields: Vec<&'static str> },
    #[error("control character {octet:#04x} in data phase")]
    UnexpectedControl { octet: u8 },
}

/// What the lane expects at ILAS octet `pos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Marker(Char),
    Config(usize),
    Filler,
}

fn slot(fk: u32, pos: u32) -> Slot {
    let (mf, q) = (pos / fk, pos % fk);
    match q {
        0 => Slot::Marker(Char::K28_0),
        _ if q == fk - 1 => Slot::Marker(Char::K28_3),
        1 if mf == 1 => Slot::Marker(Char::K28_4),
        _ if mf == 1 && (2..2 + ILAS_CONFIG_OCTETS as u32).contains(&q) => Slot::Config(q as usize - 2),
        _ => Slot::Filler,
    }
}

#[derive(Debug, Clone)]
pub struct LaneState {
    index: u32,
    fk: u32,
    scrambling: bool,
    prev: Option<Word>,
    pub rotation: u8,
    rotation_latched: bool,
    rotation_locked: bool,
    pub cgs_run: u32,
    pub phase: LanePhase,
    ilas_pos: u32,
    config_image: [u8; ILAS_CONFIG_OCTETS],
    pub ilas_config: Option<IlasConfig>,
    pub ilas_ok: bool,
    descrambler: ScramblerState,
    pub elastic: LaneBuffer,
}

impl LaneState {
    pub fn new(cfg: &LinkConfig, index: u32) -> Self {
        LaneState {
            index,
            fk: cfg.multiframe_octets(),
            scrambling: cfg.scrambling,
            prev: None,
            rotation: 0,
            rotation_latched: false,
            rotation_locked: false,
            cgs_run: 0,
            phase: LanePhase::Cgs,
            ilas_pos: 0,
            config_image: [0; ILAS_CONFIG_OCTETS],
            ilas_config: None,
            ilas_ok: false,
            descrambler: ScramblerState::default(),
            elastic: LaneBuffer::new(cfg.buffer_depth),
        }
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn rotation_locked(&self) -> bool {
        self.rotation_locked
    }

    /// Clears everything but the input register.
    pub fn clear(&mut self) {
        self.rotation = 0;
        self.rotation_latched = false;
        self.rotation_locked = false;
        self.cgs_run = 0;
        self.phase = LanePhase::Cgs;
        self.ilas_pos = 0;
        self.config_image = [0; ILAS_CONFIG_OCTETS];
        self.ilas_config = None;
        self.ilas_ok = false;
        self.descrambler = ScramblerState::default();
        self.elastic.clear();
    }

    /// Like `clear`, but the latched rotation survives. Used after link-level
    /// faults, which say nothing about the symbol boundary.
    pub fn clear_keep_rotation(&mut self) {
        let (rotation, latched) = (self.rotation, self.rotation_latched);
        self.clear();
        self.rotation = rotation;
        self.rotation_latched = latched;
    }

    /// Rotates the raw word stream so the K28.5 run starts at octet 0.
    /// Output lags input by one cycle. Returns the new rotation when it was
    /// (re)latched this cycle.
    pub fn align(&mut self, word: &Word) -> (Option<Word>, Option<u8>) {
        let mut latched = None;
        if !self.rotation_locked {
            for i in 0..4 {
                if !word[i].is_clean_comma() {
                    continue;
                }
                let pred = if i == 0 {
                    self.prev.map(|p| p[3])
                } else {
                    Some(word[i - 1])
                };
                let onset = match pred {
                    None => i == 0 && !self.rotation_latched,
                    Some(p) => {
                        !p.is_clean_comma()
                            && (!self.rotation_latched || (!p.is_error() && !p.is_control))
                    }
                };
                if onset {
                    latched = Some(i as u8);
                }
            }
            if let Some(r) = latched {
                self.rotation = r;
                self.rotation_latched = true;
            }
        }
        let out = self.prev.map(|prev| {
            let r = self.rotation as usize;
            std::array::from_fn(|i| if r + i < 4 { prev[r + i] } else { word[r + i - 4] })
        });
        self.prev = Some(*word);
        (out, latched)
    }

    /// Feeds one aligned word to the comma counter. Returns true on the
    /// cycle the rotation locks.
    pub fn cgs_update(&mut self, aligned: &Word, threshold: u32) -> bool {
        for c in aligned {
            if c.is_clean_comma() {
                self.cgs_run = self.cgs_run.saturating_add(1);
            } else {
                self.cgs_run = 0;
            }
        }
        if self.cgs_run >= threshold && self.rotation_latched && !self.rotation_locked {
            self.rotation_locked = true;
            return true;
        }
        false
    }

    pub fn cgs_achieved(&self, threshold: u32) -> bool {
        self.cgs_run >= threshold && self.rotation_locked
    }

    /// Called when SYNC is released.
    pub fn arm_ilas(&mut self) {
        self.phase = LanePhase::AwaitIlas;
        self.ilas_pos = 0;
    }

    /// ILAS capture and data phase. Returns the descrambled data word once
    /// the lane is in its data phase.
    pub fn receive(
        &mut self,
        aligned: &Word,
        settings: &IlasSettings,
        expected: &IlasConfig,
    ) -> Result<LaneStep, LaneFault> {
        match self.phase {
            LanePhase::Cgs => Ok(LaneStep::Idle),
            LanePhase::AwaitIlas => {
                let first = aligned
                    .iter()
                    .position(|c| !c.is_error() && !c.is_clean_comma());
                match first {
                    None => Ok(LaneStep::Idle),
                    Some(0) if aligned[0] == Char::K28_0 => {
                        self.phase = LanePhase::Ilas;
                        self.ilas_pos = 0;
                        self.capture(aligned, settings, expected)?;
                        Ok(LaneStep::IlasStart)
                    }
                    Some(i) => Err(LaneFault::MarkerMismatch {
                        position: i as u32,
                        expected: format!("{} at word octet 0", Char::K28_0),
                        got: aligned[i].to_string(),
                    }),
                }
            }
            LanePhase::Ilas => {
                self.capture(aligned, settings, expected)?;
                if self.ilas_pos == 4 * self.fk {
                    self.phase = LanePhase::Data;
                    self.ilas_ok = true;
                    self.descrambler = ScramblerState::default();
                    Ok(LaneStep::IlasDone)
                } else {
                    Ok(LaneStep::Idle)
                }
            }
            LanePhase::Data => {
                if let Some(c) = aligned.iter().find(|c| c.is_control) {
                    return Err(LaneFault::UnexpectedControl { octet: c.octet });
                }
                let mut word = pack_word(aligned.map(|c| c.octet));
                if self.scrambling {
                    word = descramble_word32(&mut self.descrambler, word);
                }
                Ok(LaneStep::Data(word))
            }
        }
    }

    fn capture(
        &mut self,
        aligned: &Word,
        settings: &IlasSettings,
        expected: &IlasConfig,
    ) -> Result<(), LaneFault> {
        for &c in aligned {
            let pos = self.ilas_pos;
            match slot(self.fk, pos) {
                Slot::Marker(m) => {
                    if c.without_flags() != m || c.is_error() {
                        return Err(LaneFault::MarkerMismatch {
                            position: pos,
                            expected: m.to_string(),
                            got: c.to_string(),
                        });
                    }
                }
                Slot::Config(_) | Slot::Filler if c.is_control => {
                    return Err(LaneFault::MarkerMismatch {
                        position: pos,
                        expected: "data".into(),
                        got: c.to_string(),
                    });
                }
                Slot::Config(i) => {
                    self.config_image[i] = c.octet;
                    if i == ILAS_CONFIG_OCTETS - 1 {
                        let (ic, ok) = IlasConfig::unpack(&self.config_image, settings.checksum);
                        self.ilas_config = Some(ic);
                        let fields = settings.mismatches(&ic, ok, expected);
                        if !fields.is_empty() {
                            return Err(LaneFault::ConfigMismatch { fields });
                        }
                    }
                }
                Slot::Filler => {}
            }
            self.ilas_pos += 1;
        }
        Ok(())
    }
}

/// Outcome of [`LaneState::receive`] for one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneStep {
    Idle,
    IlasStart,
    IlasDone,
    Data(u32),
}
