//! Impairment channel: 8b/10b encode, per-lane skew, bit flips, decode.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::codec::{Char, Decoder, Encoder, Symbol10};
use crate::tx::Word;

/// One explicit bit flip. `bit` counts line bits on the lane's channel
/// output, skew fill included, in transmission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipPosition {
    #[serde(default)]
    pub link: u32,
    pub lane: u32,
    pub bit: u64,
}

/// A run of `length` symbols starting at output symbol `symbol`, each
/// driven to all zeros (every set bit flipped).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Burst {
    #[serde(default)]
    pub link: u32,
    pub lane: u32,
    pub symbol: u64,
    pub length: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSpec {
    /// Delay per lane in octets; missing lanes get zero.
    pub skew: Vec<u32>,
    /// Probability of a flip per line bit.
    pub bit_error_rate: f64,
    pub error_positions: Vec<FlipPosition>,
    pub bursts: Vec<Burst>,
    pub rng_seed: u64,
}

impl ChannelSpec {
    pub fn skew_of(&self, lane: u32) -> u32 {
        self.skew.get(lane as usize).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipClass {
    /// Decoder raised not-in-table or disparity on the hit symbol.
    Flagged,
    /// Hit symbol decoded cleanly to a different character.
    Miscoded,
    /// Landed on skew fill before the lane carried any traffic.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlipRecord {
    pub cycle: u64,
    pub lane: u32,
    pub bit: u64,
    pub class: FlipClass,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlipCounts {
    pub flagged: u64,
    pub miscoded: u64,
    pub ignored: u64,
}

#[derive(Debug, Clone)]
struct LaneChannel {
    enc: Encoder,
    dec: Decoder,
    /// Symbols in flight; `None` marks skew fill.
    fifo: VecDeque<(Symbol10, Option<Char>)>,
    out_symbols: u64,
    explicit: VecDeque<u64>,
    bursts: Vec<(u64, u64)>,
    rng: Option<(ChaCha8Rng, Geometric)>,
    next_random: Option<u64>,
}

impl LaneChannel {
    fn next_flip(&mut self) -> Option<u64> {
        let explicit = self.explicit.front().copied();
        match (explicit, self.next_random) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn consume_flip(&mut self, bit: u64) {
        if self.explicit.front() == Some(&bit) {
            self.explicit.pop_front();
        }
        if self.next_random == Some(bit) {
            self.next_random = self.rng.as_mut().map(|(rng, g)| bit + 1 + g.sample(rng));
        }
    }
}

#[derive(Debug, Clone)]
pub struct Channel {
    lanes: Vec<LaneChannel>,
    out: Vec<Word>,
    flips: Vec<FlipRecord>,
    counts: FlipCounts,
    record: bool,
    symbols: Vec<Vec<Symbol10>>,
    chars: Vec<Vec<Char>>,
    cycle: u64,
}

impl Channel {
    /// Channel for link `link` with `lanes` lanes. The settings are assumed
    /// checked by the harness.
    pub fn new(spec: &ChannelSpec, link: u32, lanes: u32, record: bool) -> Self {
        let lanes = (0..lanes)
            .map(|lane| {
                let skew = spec.skew_of(lane) as usize;
                let mut explicit: Vec<u64> = spec
                    .error_positions
                    .iter()
                    .filter(|p| p.link == link && p.lane == lane)
                    .map(|p| p.bit)
                    .collect();
                explicit.sort_unstable();
                explicit.dedup();
                let bursts = spec
                    .bursts
                    .iter()
                    .filter(|b| b.link == link && b.lane == lane)
                    .map(|b| (b.symbol, b.symbol + u64::from(b.length)))
                    .collect();
                let mut rng = None;
                let mut next_random = None;
                if spec.bit_error_rate > 0.0 {
                    let mut r = ChaCha8Rng::seed_from_u64(spec.rng_seed);
                    r.set_stream(u64::from(link) << 32 | u64::from(lane));
                    let g = Geometric::new(spec.bit_error_rate).expect("rate in (0, 1]");
                    next_random = Some(g.sample(&mut r));
                    rng = Some((r, g));
                }
                LaneChannel {
                    enc: Encoder::new(),
                    dec: Decoder::new(),
                    fifo: std::iter::repeat_n((Symbol10(0), None), skew).collect(),
                    out_symbols: 0,
                    explicit: explicit.into(),
                    bursts,
                    rng,
                    next_random,
                }
            })
            .collect::<Vec<_>>();
        let n = lanes.len();
        Channel {
            lanes,
            out: vec![[Char::INVALID; 4]; n],
            flips: Vec::new(),
            counts: FlipCounts::default(),
            record,
            symbols: vec![Vec::new(); if record { n } else { 0 }],
            chars: vec![Vec::new(); if record { n } else { 0 }],
            cycle: 0,
        }
    }

    pub fn flips(&self) -> &[FlipRecord] {
        &self.flips
    }

    pub fn flip_counts(&self) -> FlipCounts {
        self.counts
    }

    /// Recorded channel output symbols, per lane.
    pub fn recorded_symbols(&self) -> &[Vec<Symbol10>] {
        &self.symbols
    }

    /// Recorded decoded characters, per lane.
    pub fn recorded_chars(&self) -> &[Vec<Char>] {
        &self.chars
    }

    pub fn step(&mut self, input: &[Word]) -> &[Word] {
        for (lane_idx, (lc, word)) in self.lanes.iter_mut().zip(input).enumerate() {
            for &c in word {
                let s = lc.enc.encode(c).expect("transmitter emits link control codes only");
                lc.fifo.push_back((s, Some(c)));
            }
            for slot in 0..4 {
                let (mut sym, orig) = lc.fifo.pop_front().expect("fifo holds at least one word");
                let idx = lc.out_symbols;
                lc.out_symbols += 1;
                let mut hit_bits: Vec<u64> = Vec::new();
                if lc.bursts.iter().any(|&(a, b)| (a..b).contains(&idx)) {
                    for i in 0..10 {
                        if sym.bit(i) {
                            hit_bits.push(idx * 10 + i as u64);
                        }
                    }
                    sym = Symbol10(0);
                }
                while let Some(bit) = lc.next_flip() {
                    if bit >= (idx + 1) * 10 {
                        break;
                    }
                    lc.consume_flip(bit);
                    if bit < idx * 10 {
                        continue;
                    }
                    sym = Symbol10(sym.0 ^ (1 << (9 - (bit - idx * 10))));
                    hit_bits.push(bit);
                }
                let decoded = lc.dec.decode(sym);
                if !hit_bits.is_empty() {
                    let class = match orig {
                        None => FlipClass::Ignored,
                        Some(_) if decoded.is_error() => FlipClass::Flagged,
                        Some(o) if decoded.without_flags() != o => FlipClass::Miscoded,
                        Some(_) => FlipClass::Flagged,
                    };
                    for bit in hit_bits {
                        match class {
                            FlipClass::Flagged => self.counts.flagged += 1,
                            FlipClass::Miscoded => self.counts.miscoded += 1,
                            FlipClass::Ignored => self.counts.ignored += 1,
                        }
                        self.flips.push(FlipRecord {
                            cycle: self.cycle,
                            lane: lane_idx as u32,
                            bit,
                            class,
                        });
                    }
                }
                if self.record {
                    self.symbols[lane_idx].push(sym);
                    self.chars[lane_idx].push(decoded);
                }
                self.out[lane_idx][slot] = decoded;
            }
        }
        self.cycle += 1;
        &self.out
    }
}

/// Uniform random skews in `0..=max` octets for `lanes` lanes.
pub fn random_skews(rng: &mut impl Rng, lanes: u32, max: u32) -> Vec<u32> {
    (0..lanes).map(|_| rng.random_range(0..=max)).collect()
}
