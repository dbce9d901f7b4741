//! Golden Subclass 1 transmitter.
//!
//! Emits K28.5 while the receiver requests sync, starts the ILAS on the
//! first LMFC boundary after the request clears, then streams payload.

use serde::Serialize;

use crate::codec::Char;
use crate::config::{LinkConfig, MAX_LANES};
use crate::ilas::{IlasConfig, IlasSettings, ILAS_CONFIG_OCTETS};
use crate::payload::{channels_per_link, LaneMap, PayloadGen, PayloadSpec};
use crate::scrambler::{pack_word, scramble_word32, unpack_word, ScramblerState};

pub type Word = [Char; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TxPhase {
    Cgs,
    Ilas,
    Data,
}

/// Octet `pos` (0..4·F·K) of one lane's ILAS.
fn ilas_char(fk: usize, pos: usize, image: &[u8; ILAS_CONFIG_OCTETS]) -> Char {
    let (mf, q) = (pos / fk, pos % fk);
    match q {
        0 => Char::K28_0,
        _ if q == fk - 1 => Char::K28_3,
        1 if mf == 1 => Char::K28_4,
        _ if mf == 1 && (2..2 + ILAS_CONFIG_OCTETS).contains(&q) => Char::data(image[q - 2]),
        _ => Char::data(pos as u8),
    }
}

/// One lane's ILAS for the given configuration image.
pub fn build_ilas_lane(cfg: &LinkConfig, image: &IlasConfig, rule: crate::ilas::ChecksumRule) -> Vec<Char> {
    let packed = image.pack(rule).expect("ILAS image fields in range");
    let fk = cfg.multiframe_octets() as usize;
    (0..4 * fk).map(|p| ilas_char(fk, p, &packed)).collect()
}

/// ILAS for every lane of a link.
pub fn build_ilas(cfg: &LinkConfig, settings: &IlasSettings) -> Vec<Vec<Char>> {
    (0..cfg.lanes)
        .map(|lane| build_ilas_lane(cfg, &settings.expected_for_lane(cfg, lane), settings.checksum))
        .collect()
}

/// Where one data phase began: TX cycle and index of its first sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DataEpoch {
    pub cycle: u64,
    pub first_sample: u64,
}

#[derive(Debug, Clone)]
pub struct TxModel {
    cfg: LinkConfig,
    ilas: Vec<Vec<Char>>,
    map: LaneMap,
    phase: TxPhase,
    ilas_pos: usize,
    payload: PayloadGen,
    scramblers: Vec<ScramblerState>,
    cycle: u64,
    epochs: Vec<DataEpoch>,
    words: Vec<u32>,
    out: Vec<Word>,
}

impl TxModel {
    pub fn new(cfg: &LinkConfig, settings: &IlasSettings, payload: &PayloadSpec, map: LaneMap) -> Self {
        assert_eq!(map.lanes(), cfg.lanes as usize, "lane map size");
        assert!(cfg.lanes <= MAX_LANES);
        let l = cfg.lanes as usize;
        TxModel {
            cfg: *cfg,
            ilas: build_ilas(cfg, settings),
            map,
            phase: TxPhase::Cgs,
            ilas_pos: 0,
            payload: PayloadGen::new(payload, channels_per_link(cfg)),
            scramblers: vec![ScramblerState::default(); l],
            cycle: 0,
            epochs: Vec::new(),
            words: vec![0; l],
            out: vec![[Char::K28_5; 4]; l],
        }
    }

    pub fn phase(&self) -> TxPhase {
        self.phase
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn epochs(&self) -> &[DataEpoch] {
        &self.epochs
    }

    pub fn ilas(&self) -> &[Vec<Char>] {
        &self.ilas
    }

    /// One link clock. `sync_request` is the receiver's SYNC as seen this
    /// cycle; `lmfc_boundary` marks the first cycle of a multiframe.
    pub fn step(&mut self, sync_request: bool, lmfc_boundary: bool) -> &[Word] {
        if sync_request {
            self.phase = TxPhase::Cgs;
        } else if self.phase == TxPhase::Cgs && lmfc_boundary {
            self.phase = TxPhase::Ilas;
            self.ilas_pos = 0;
        }

        match self.phase {
            TxPhase::Cgs => self.out.iter_mut().for_each(|w| *w = [Char::K28_5; 4]),
            TxPhase::Ilas => {
                let p = self.ilas_pos;
                for (w, seq) in self.out.iter_mut().zip(&self.ilas) {
                    w.copy_from_slice(&seq[p..p + 4]);
                }
                self.ilas_pos += 4;
                if self.ilas_pos == self.ilas[0].len() {
                    self.phase = TxPhase::Data;
                    self.epochs.push(DataEpoch {
                        cycle: self.cycle + 1,
                        first_sample: self.payload.index(),
                    });
                    self.scramblers.iter_mut().for_each(|s| *s = ScramblerState::default());
                }
            }
            TxPhase::Data => {
                self.payload.next_words(&self.map, &mut self.words);
                for (lane, w) in self.out.iter_mut().enumerate() {
                    let mut word = self.words[lane];
                    if self.cfg.scrambling {
                        word = scramble_word32(&mut self.scramblers[lane], word);
                    }
                    *w = unpack_word(word).map(Char::data);
                }
            }
        }
        self.cycle += 1;
        &self.out
    }
}

/// Inverse of the payload path for one lane word: the octets as a word.
pub fn word_of(chars: &Word) -> u32 {
    pack_word(chars.map(|c| c.octet))
}
