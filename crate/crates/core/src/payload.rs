//! Deterministic 16-bit sample sources and the sample-to-lane mapping.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::LinkConfig;

pub const DEFAULT_SINE_FREQ_HZ: f64 = 5.0e6;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 80.0e6;
pub const DEFAULT_SINE_AMPLITUDE: f64 = 30000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayloadSpec {
    /// Sample `i` carries `start + i` (mod 2^16).
    Ramp {
        #[serde(default)]
        start: u16,
    },
    /// Quantized sine; every converter channel sees the same waveform.
    Sine {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_freq")]
        freq_hz: f64,
        #[serde(default = "default_rate")]
        sample_rate_hz: f64,
    },
    /// Uniform samples from a seeded ChaCha8 stream, one word per sample.
    Random {
        #[serde(default)]
        seed: u64,
    },
}

fn default_amplitude() -> f64 {
    DEFAULT_SINE_AMPLITUDE
}
fn default_freq() -> f64 {
    DEFAULT_SINE_FREQ_HZ
}
fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

impl Default for PayloadSpec {
    fn default() -> Self {
        PayloadSpec::Random { seed: 0 }
    }
}

impl PayloadSpec {
    pub fn sine() -> Self {
        PayloadSpec::Sine {
            amplitude: DEFAULT_SINE_AMPLITUDE,
            freq_hz: DEFAULT_SINE_FREQ_HZ,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

/// Converter channels per link: the 16-bit sample slots in one frame.
pub fn channels_per_link(cfg: &LinkConfig) -> u32 {
    cfg.lanes * cfg.octets_per_frame / 2
}

/// Value of sample `i` of a sine payload with `channels` interleaved
/// converters. Sample `i` belongs to channel `i % channels` at time
/// `i / channels`.
pub fn sine_sample(i: u64, channels: u32, amplitude: f64, freq_hz: f64, sample_rate_hz: f64) -> u16 {
    let t = (i / u64::from(channels.max(1))) as f64;
    let v = (amplitude * (std::f64::consts::TAU * freq_hz * t / sample_rate_hz).sin()).round();
    (v.clamp(-32768.0, 32767.0) as i16) as u16
}

/// Sequential sample source with random access via [`PayloadGen::seek`].
#[derive(Debug, Clone)]
pub struct PayloadGen {
    spec: PayloadSpec,
    channels: u32,
    index: u64,
    rng: Option<ChaCha8Rng>,
}

impl PayloadGen {
    pub fn new(spec: &PayloadSpec, channels: u32) -> Self {
        let rng = match spec {
            PayloadSpec::Random { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        PayloadGen {
            spec: spec.clone(),
            channels,
            index: 0,
            rng,
        }
    }

    /// Index of the next sample.
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn seek(&mut self, index: u64) {
        self.index = index;
        if let Some(rng) = &mut self.rng {
            // one 32-bit word per sample
            rng.set_word_pos(u128::from(index));
        }
    }

    pub fn next_sample(&mut self) -> u16 {
        let i = self.index;
        self.index += 1;
        match &self.spec {
            PayloadSpec::Ramp { start } => start.wrapping_add(i as u16),
            PayloadSpec::Sine {
                amplitude,
                freq_hz,
                sample_rate_hz,
            } => sine_sample(i, self.channels, *amplitude, *freq_hz, *sample_rate_hz),
            PayloadSpec::Random { .. } => {
                self.rng.as_mut().map(|r| r.next_u32() as u16).unwrap_or(0)
            }
        }
    }

    /// Fills one cycle of lane words (`2 * lanes` samples).
    pub fn next_words(&mut self, map: &LaneMap, words: &mut [u32]) {
        let l = map.lanes();
        let mut samples = [0u16; 2 * crate::config::MAX_LANES as usize];
        for s in samples.iter_mut().take(2 * l) {
            *s = self.next_sample();
        }
        map.pack(&samples[..2 * l], words);
    }
}

/// Round-robin assignment of samples to lanes. Within a cycle, sample `j`
/// (of `2L`) goes to lane `order[j % L]` as half `j / L` of its word, most
/// significant octet first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneMap {
    order: Vec<usize>,
}

impl LaneMap {
    pub fn identity(lanes: u32) -> Self {
        LaneMap {
            order: (0..lanes as usize).collect(),
        }
    }

    /// `order` must be a permutation of `0..order.len()`.
    pub fn from_order(order: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; order.len()];
        for &o in &order {
            if o >= order.len() || std::mem::replace(&mut seen[o], true) {
                return None;
            }
        }
        Some(LaneMap { order })
    }

    pub fn lanes(&self) -> usize {
        self.order.len()
    }

    pub fn pack(&self, samples: &[u16], words: &mut [u32]) {
        let l = self.lanes();
        for (pos, &lane) in self.order.iter().enumerate() {
            words[lane] = u32::from(samples[pos]) << 16 | u32::from(samples[pos + l]);
        }
    }

    pub fn unpack(&self, words: &[u32], samples: &mut [u16]) {
        let l = self.lanes();
        for (pos, &lane) in self.order.iter().enumerate() {
            samples[pos] = (words[lane] >> 16) as u16;
            samples[pos + l] = words[lane] as u16;
        }
    }
}
