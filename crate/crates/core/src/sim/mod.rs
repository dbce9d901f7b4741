//! End-to-end harness: transmitter, impairment channel and receiver stepped
//! in lockstep under one shared SYSREF.

pub mod channel;
pub mod report;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::Char;
use crate::config::{ConfigErrors, LinkConfig, OCTETS_PER_CYCLE};
use crate::ilas::IlasSettings;
use crate::payload::{channels_per_link, LaneMap, PayloadGen, PayloadSpec};
use crate::rx::lmfc::LmfcCounter;
use crate::rx::{Receiver, RxEvent, RxEventKind, RxFsm};
use crate::tx::{TxModel, Word};

pub use channel::{Burst, Channel, ChannelSpec, FlipClass, FlipCounts, FlipPosition, FlipRecord};
pub use report::{LinkReport, SimReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SysrefMode {
    #[default]
    Periodic,
    OneShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SysrefSpec {
    pub mode: SysrefMode,
    /// Defaults to four multiframes.
    pub period_cycles: Option<u64>,
    pub first_edge_cycle: u64,
    /// Extra delay of SYSREF at the receiver only. Nonzero values shift the
    /// receiver's LMFC against the transmitter's.
    pub rx_delay_cycles: u64,
}

impl Default for SysrefSpec {
    fn default() -> Self {
        SysrefSpec {
            mode: SysrefMode::Periodic,
            period_cycles: None,
            first_edge_cycle: 4,
            rx_delay_cycles: 0,
        }
    }
}

impl SysrefSpec {
    pub fn period(&self, cfg: &LinkConfig) -> u64 {
        self.period_cycles
            .unwrap_or(4 * u64::from(cfg.multiframe_cycles()))
    }

    /// SYSREF level at the transmitter in `cycle` (single-cycle pulses).
    pub fn level(&self, cfg: &LinkConfig, cycle: u64) -> bool {
        if cycle < self.first_edge_cycle {
            return false;
        }
        let t = cycle - self.first_edge_cycle;
        match self.mode {
            SysrefMode::OneShot => t == 0,
            SysrefMode::Periodic => t.is_multiple_of(self.period(cfg)),
        }
    }

    pub fn rx_level(&self, cfg: &LinkConfig, cycle: u64) -> bool {
        cycle >= self.rx_delay_cycles && self.level(cfg, cycle - self.rx_delay_cycles)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub cycles: u64,
    /// First cycle with the PHY reporting ready.
    pub phy_ready_cycle: u64,
    /// Stop once every link has produced this many valid cycles in its
    /// current data phase.
    pub stop_after_valid: Option<u64>,
    /// Allowed resyncs for a run to count as passing.
    pub max_resyncs: u32,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            cycles: 20_000,
            phy_ready_cycle: 0,
            stop_after_valid: None,
            max_resyncs: 0,
        }
    }
}

/// Everything one simulation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub link: LinkConfig,
    pub ilas: IlasSettings,
    pub channel: ChannelSpec,
    pub payload: PayloadSpec,
    pub sysref: SysrefSpec,
    pub run: RunSpec,
    /// Sample-to-lane order; identity when absent.
    pub lane_map: Option<Vec<usize>>,
}

impl SimSetup {
    pub fn new(link: LinkConfig) -> Self {
        SimSetup {
            link,
            ilas: IlasSettings::default(),
            channel: ChannelSpec::default(),
            payload: PayloadSpec::default(),
            sysref: SysrefSpec::default(),
            run: RunSpec::default(),
            lane_map: None,
        }
    }

    pub fn lane_map(&self) -> LaneMap {
        match &self.lane_map {
            Some(order) => LaneMap::from_order(order.clone()).expect("checked lane map"),
            None => LaneMap::identity(self.link.lanes),
        }
    }

    pub fn validate(&self) -> Result<(), SimConfigError> {
        let cfg = self.link.validate()?;
        let bad = |m: String| Err(SimConfigError::Invalid(m));
        if self.channel.skew.len() > cfg.lanes as usize {
            return bad(format!("skew lists {} lanes, link has {}", self.channel.skew.len(), cfg.lanes));
        }
        let ber = self.channel.bit_error_rate;
        if !(0.0..=1.0).contains(&ber) {
            return bad(format!("bit_error_rate {ber} outside [0, 1]"));
        }
        if ber > 0.0 && !self.channel.error_positions.is_empty() {
            return bad("bit_error_rate and error_positions are mutually exclusive".into());
        }
        let lane_ok = |link: u32, lane: u32| link < cfg.links && lane < cfg.lanes;
        if let Some(p) = self.channel.error_positions.iter().find(|p| !lane_ok(p.link, p.lane)) {
            return bad(format!("error position on missing lane {}.{}", p.link, p.lane));
        }
        if let Some(b) = self.channel.bursts.iter().find(|b| !lane_ok(b.link, b.lane)) {
            return bad(format!("burst on missing lane {}.{}", b.link, b.lane));
        }
        if let Some(order) = &self.lane_map {
            if order.len() != cfg.lanes as usize || LaneMap::from_order(order.clone()).is_none() {
                return bad("lane_map must be a permutation of the lanes".into());
            }
        }
        if self.sysref.period(&cfg) == 0 {
            return bad("sysref period must be positive".into());
        }
        if let PayloadSpec::Sine { sample_rate_hz, .. } = self.payload {
            if sample_rate_hz.is_nan() || sample_rate_hz <= 0.0 {
                return bad("sample_rate_hz must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimConfigError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error("invalid simulation setup: {0}")]
    Invalid(String),
}

/// What to keep besides the report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Collect {
    pub events: bool,
    /// Received samples of the final data phase, per link.
    pub samples: bool,
    /// Channel output per lane (symbols and decoded characters).
    pub capture: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SimOutcome {
    pub report: SimReport,
    pub events: Vec<String>,
    pub samples: Vec<Vec<u16>>,
    /// Per link, per lane.
    pub capture: Vec<CaptureLanes>,
}

#[derive(Debug, Clone, Default)]
pub struct CaptureLanes {
    pub symbols: Vec<Vec<crate::codec::Symbol10>>,
    pub chars: Vec<Vec<Char>>,
}

/// Receiver-side bookkeeping shared by live runs and capture replay.
#[derive(Debug, Clone)]
struct RxTracker {
    link: u32,
    multi: bool,
    frame_cycles: f64,
    phy_ready_cycle: u64,
    deassert: Option<u64>,
    first_sync: Option<(u64, u64)>,
    release: Option<(u64, u32)>,
    first_write: Vec<Option<u64>>,
    release_first_write: Vec<Option<u64>>,
    faults: Vec<String>,
    valid_cycles: u64,
    epoch_valid: u64,
    was_valid: bool,
    samples: Vec<u16>,
    scratch: Vec<u16>,
}

impl RxTracker {
    fn new(cfg: &LinkConfig, link: u32, phy_ready_cycle: u64) -> Self {
        RxTracker {
            link,
            multi: cfg.links > 1,
            frame_cycles: f64::from(cfg.octets_per_frame) / f64::from(OCTETS_PER_CYCLE),
            phy_ready_cycle,
            deassert: None,
            first_sync: None,
            release: None,
            first_write: vec![None; cfg.lanes as usize],
            release_first_write: vec![None; cfg.lanes as usize],
            faults: Vec::new(),
            valid_cycles: 0,
            epoch_valid: 0,
            was_valid: false,
            samples: Vec::new(),
            scratch: vec![0; 2 * cfg.lanes as usize],
        }
    }

    fn absorb(&mut self, rx: &mut Receiver, log: Option<&mut Vec<String>>) {
        let mut lines = Vec::new();
        for e in rx.drain_events() {
            self.note(&e);
            if log.is_some() {
                lines.push(self.line(&e));
            }
        }
        if let Some(log) = log {
            log.extend(lines);
        }
    }

    fn line(&self, e: &RxEvent) -> String {
        if self.multi {
            let s = e.to_string();
            match s.find(" detail=") {
                Some(i) => format!("{} detail=link{}:{}", &s[..i], self.link, &s[i + 8..]),
                None => s,
            }
        } else {
            e.to_string()
        }
    }

    fn note(&mut self, e: &RxEvent) {
        match &e.kind {
            RxEventKind::State { to: RxFsm::Ilas, .. } => self.deassert = Some(e.cycle),
            RxEventKind::State { to: RxFsm::Synced, .. } => {
                if self.first_sync.is_none() {
                    self.first_sync = Some((self.deassert.unwrap_or(e.cycle), e.cycle));
                }
            }
            RxEventKind::FirstWrite => {
                if let Some(l) = e.lane {
                    self.first_write[l as usize] = Some(e.cycle);
                }
            }
            RxEventKind::Release { lmfc_phase } => {
                self.release = Some((e.cycle, *lmfc_phase));
                self.release_first_write = self.first_write.clone();
            }
            RxEventKind::Fault(k) => {
                self.faults.push(k.name().to_string());
                self.first_write.iter_mut().for_each(|f| *f = None);
            }
            _ => {}
        }
    }

    fn link_report(&self, rx: &Receiver) -> LinkReport {
        let frames = |from: u64, to: u64| (to - from) as f64 / self.frame_cycles;
        let st = self.first_sync;
        LinkReport {
            link: self.link,
            sync_frames_from_sync_deassert: st.map(|(d, s)| frames(d, s)),
            sync_frames_from_phy_ready: st.map(|(_, s)| frames(self.phy_ready_cycle.min(s), s)),
            sync_frames_from_reset: st.map(|(_, s)| frames(0, s)),
            sync_octets_from_sync_deassert: st.map(|(d, s)| (s - d) * u64::from(OCTETS_PER_CYCLE)),
            release_cycle: self.release.map(|r| r.0),
            release_lmfc_phase: self.release.map(|r| r.1),
            valid_cycles: self.valid_cycles,
            resync_count: rx.resync_count(),
            faults: self.faults.clone(),
            error_counts: rx.error_counts(),
            sysref_misaligned: rx.lmfc().sysref_misaligned,
            final_state: rx.fsm().to_string(),
            ..LinkReport::default()
        }
    }
}

struct LinkChain {
    tx: TxModel,
    channel: Channel,
    rx: Receiver,
    reference: PayloadGen,
    map: LaneMap,
    tracker: RxTracker,
    expected: Vec<u32>,
    compared: u64,
    mismatched: u64,
    final_compared: u64,
    final_mismatched: u64,
    epoch: Option<crate::tx::DataEpoch>,
    skews: Vec<u32>,
    flips_logged: usize,
}

/// Runs one simulation.
pub fn run_simulation(setup: &SimSetup, collect: Collect) -> Result<SimOutcome, SimConfigError> {
    setup.validate()?;
    let cfg = setup.link;
    let l = cfg.lanes as usize;
    let mut links: Vec<LinkChain> = (0..cfg.links)
        .map(|k| LinkChain {
            tx: TxModel::new(&cfg, &setup.ilas, &setup.payload, setup.lane_map()),
            channel: Channel::new(&setup.channel, k, cfg.lanes, collect.capture),
            rx: Receiver::new(&cfg, &setup.ilas),
            reference: PayloadGen::new(&setup.payload, channels_per_link(&cfg)),
            map: setup.lane_map(),
            tracker: RxTracker::new(&cfg, k, setup.run.phy_ready_cycle),
            expected: vec![0; l],
            compared: 0,
            mismatched: 0,
            final_compared: 0,
            final_mismatched: 0,
            epoch: None,
            skews: (0..cfg.lanes).map(|i| setup.channel.skew_of(i)).collect(),
            flips_logged: 0,
        })
        .collect();
    let mut tx_lmfc = LmfcCounter::new(cfg.multiframe_octets());
    let mut events = Vec::new();
    let mut cycles = 0;

    for cycle in 0..setup.run.cycles {
        cycles = cycle + 1;
        let tick = tx_lmfc.step(setup.sysref.level(&cfg, cycle));
        let sysref_rx = setup.sysref.rx_level(&cfg, cycle);
        let phy_ready = cycle >= setup.run.phy_ready_cycle;

        for lc in links.iter_mut() {
            let sync_request = lc.rx.sync_request();
            let tx_out = lc.tx.step(sync_request, tick.boundary);
            let line = lc.channel.step(tx_out);
            let out = lc.rx.step(line, sysref_rx, phy_ready);
            let (valid, words) = (out.valid, &out.words);
            if valid && !lc.tracker.was_valid {
                lc.epoch = lc.tx.epochs().last().copied();
                if let Some(ep) = lc.epoch {
                    lc.reference.seek(ep.first_sample);
                }
                lc.final_compared = 0;
                lc.final_mismatched = 0;
                lc.tracker.epoch_valid = 0;
                lc.tracker.samples.clear();
            }
            if valid {
                lc.tracker.valid_cycles += 1;
                lc.tracker.epoch_valid += 1;
                lc.reference.next_words(&lc.map, &mut lc.expected);
                let bad: u32 = words
                    .iter()
                    .zip(&lc.expected)
                    .map(|(a, b)| {
                        let x = a ^ b;
                        (0..4).filter(|i| x >> (8 * i) & 0xff != 0).count() as u32
                    })
                    .sum();
                let n = 4 * l as u64;
                lc.compared += n;
                lc.final_compared += n;
                lc.mismatched += u64::from(bad);
                lc.final_mismatched += u64::from(bad);
                if collect.samples {
                    lc.map.unpack(words, &mut lc.tracker.scratch);
                    lc.tracker.samples.extend_from_slice(&lc.tracker.scratch);
                }
            }
            lc.tracker.was_valid = valid;
            lc.tracker.absorb(&mut lc.rx, collect.events.then_some(&mut events));
        }
        if collect.events {
            for lc in links.iter_mut() {
                let new = &lc.channel.flips()[lc.flips_logged..];
                lc.flips_logged += new.len();
                for f in new {
                    let lane = if cfg.links > 1 {
                        format!("{}", lc.tracker.link * cfg.lanes + f.lane)
                    } else {
                        f.lane.to_string()
                    };
                    events.push(format!(
                        "cycle={cycle} lane={lane} event=bit_flip detail=bit={},class={}",
                        f.bit,
                        serde_json::to_value(f.class).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
                    ));
                }
            }
        }
        if let Some(n) = setup.run.stop_after_valid {
            if links.iter().all(|lc| lc.tracker.was_valid && lc.tracker.epoch_valid >= n) {
                break;
            }
        }
    }

    let mut reports = Vec::new();
    let mut samples = Vec::new();
    let mut capture = Vec::new();
    for lc in links {
        let mut r = lc.tracker.link_report(&lc.rx);
        r.compared_octets = lc.compared;
        r.mismatched_octets = lc.mismatched;
        r.final_compared_octets = lc.final_compared;
        r.final_mismatched_octets = lc.final_mismatched;
        r.flips = lc.channel.flip_counts();
        if let (Some(ep), Some((rel, _))) = (lc.epoch, lc.tracker.release) {
            r.total_latency_octets = Some((rel - ep.cycle) * u64::from(OCTETS_PER_CYCLE));
            // latest lane: its first data octet entered the receiver in
            // cycle (4·d + skew) / 4
            let (lane, skew) = lc
                .skews
                .iter()
                .enumerate()
                .max_by_key(|&(i, s)| (*s, std::cmp::Reverse(i)))
                .map(|(i, s)| (i, u64::from(*s)))
                .unwrap_or((0, 0));
            let arrival = (ep.cycle * u64::from(OCTETS_PER_CYCLE) + skew) / u64::from(OCTETS_PER_CYCLE);
            r.pipeline_delay_cycles = lc.tracker.release_first_write[lane].map(|w| w + 1 - arrival);
        }
        reports.push(r);
        samples.push(lc.tracker.samples);
        if collect.capture {
            capture.push(CaptureLanes {
                symbols: lc.channel.recorded_symbols().to_vec(),
                chars: lc.channel.recorded_chars().to_vec(),
            });
        }
    }
    Ok(SimOutcome {
        report: SimReport::from_links(cycles, reports),
        events,
        samples,
        capture,
    })
}

/// Result of replaying captured lane traffic through the receiver.
#[derive(Debug, Clone, Default)]
pub struct ReplayOutcome {
    pub report: SimReport,
    pub events: Vec<String>,
    /// Per link, samples of the final data phase.
    pub samples: Vec<Vec<u16>>,
}

/// Feeds captured characters (per link, per lane) to fresh receivers with
/// the SYSREF and PHY timing of `setup`.
pub fn replay(setup: &SimSetup, lanes: &[Vec<Vec<Char>>]) -> Result<ReplayOutcome, SimConfigError> {
    setup.validate()?;
    let cfg = setup.link;
    if lanes.len() != cfg.links as usize || lanes.iter().any(|k| k.len() != cfg.lanes as usize) {
        return Err(SimConfigError::Invalid("capture lane count does not match the link".into()));
    }
    let map = setup.lane_map();
    let cycles = lanes
        .iter()
        .flatten()
        .map(|v| v.len() / 4)
        .min()
        .unwrap_or(0) as u64;
    let mut rxs: Vec<(Receiver, RxTracker)> = (0..cfg.links)
        .map(|k| (Receiver::new(&cfg, &setup.ilas), RxTracker::new(&cfg, k, setup.run.phy_ready_cycle)))
        .collect();
    let mut events = Vec::new();
    let mut words: Vec<Word> = vec![[Char::INVALID; 4]; cfg.lanes as usize];
    for cycle in 0..cycles {
        let sysref = setup.sysref.rx_level(&cfg, cycle);
        let phy_ready = cycle >= setup.run.phy_ready_cycle;
        let c = cycle as usize * 4;
        for (k, (rx, tr)) in rxs.iter_mut().enumerate() {
            for (lane, w) in words.iter_mut().enumerate() {
                w.copy_from_slice(&lanes[k][lane][c..c + 4]);
            }
            let out = rx.step(&words, sysref, phy_ready);
            if out.valid && !tr.was_valid {
                tr.samples.clear();
                tr.epoch_valid = 0;
            }
            if out.valid {
                tr.valid_cycles += 1;
                tr.epoch_valid += 1;
                map.unpack(&out.words, &mut tr.scratch);
                tr.samples.extend_from_slice(&tr.scratch);
            }
            tr.was_valid = out.valid;
            tr.absorb(rx, Some(&mut events));
        }
    }
    let mut reports = Vec::new();
    let mut samples = Vec::new();
    for (rx, tr) in rxs {
        reports.push(tr.link_report(&rx));
        samples.push(tr.samples);
    }
    Ok(ReplayOutcome {
        report: SimReport::from_links(cycles, reports),
        events,
        samples,
    })
}

/// Outcome of a latency-determinism sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyVerdict {
    pub pass: bool,
    /// Distinct total latencies observed, in octets, sorted.
    pub latencies: Vec<u64>,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: u32,
    pub skews: Vec<u32>,
    pub first_edge_cycle: u64,
    pub total_latency_octets: Option<u64>,
    pub pipeline_delay_cycles: Option<u64>,
    pub payload_match: bool,
}

/// Runs `trials` simulations with per-lane skews uniform in `0..=max_skew`
/// octets and SYSREF first edges spread over whole SYSREF periods, keeping
/// SYSREF phase against the transmitter fixed. Passes iff every trial
/// synchronizes and all report the same total latency.
pub fn measure_latency_determinism(base: &SimSetup, trials: u32, max_skew: u32, seed: u64) -> LatencyVerdict {
    let cfg = base.link;
    let period = base.sysref.period(&cfg);
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::from(t));
            let mut setup = base.clone();
            setup.channel.skew = channel::random_skews(&mut rng, cfg.lanes, max_skew);
            setup.sysref.first_edge_cycle = base.sysref.first_edge_cycle + period * rng.random_range(0..4);
            if setup.run.stop_after_valid.is_none() {
                setup.run.stop_after_valid = Some(u64::from(cfg.multiframe_cycles()));
            }
            let report = run_simulation(&setup, Collect::default())
                .map(|o| o.report)
                .unwrap_or_default();
            TrialResult {
                trial: t,
                skews: setup.channel.skew.clone(),
                first_edge_cycle: setup.sysref.first_edge_cycle,
                total_latency_octets: report.total_latency_octets,
                pipeline_delay_cycles: report.pipeline_delay_cycles,
                payload_match: report.payload_match,
            }
        })
        .collect();
    let mut latencies: Vec<u64> = results.iter().filter_map(|r| r.total_latency_octets).collect();
    latencies.sort_unstable();
    latencies.dedup();
    let all_synced = results.iter().all(|r| r.total_latency_octets.is_some());
    LatencyVerdict {
        pass: all_synced && latencies.len() <= 1,
        latencies,
        trials: results,
    }
}
