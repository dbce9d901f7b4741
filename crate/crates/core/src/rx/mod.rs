//! The receiver: per-lane datapaths under one link FSM, a SYSREF-locked
//! LMFC and a release controller that starts all elastic buffers together.

pub mod elastic;
pub mod lane;
pub mod lmfc;

use std::fmt;

use serde::Serialize;

use crate::config::{LinkConfig, OCTETS_PER_CYCLE};
use crate::ilas::{IlasConfig, IlasSettings};
use crate::tx::Word;

pub use elastic::{BufferError, LaneBuffer};
pub use lane::{LaneFault, LanePhase, LaneState, LaneStep};
pub use lmfc::{LmfcCounter, LmfcTick};

/// Consecutive `phy_ready` cycles needed to leave WAIT_FOR_PHY.
pub const PHY_READY_CYCLES: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RxFsm {
    Reset,
    WaitForPhy,
    Cgs,
    Ilas,
    Synced,
}

impl fmt::Display for RxFsm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RxFsm::Reset => "RESET",
            RxFsm::WaitForPhy => "WAIT_FOR_PHY",
            RxFsm::Cgs => "CGS",
            RxFsm::Ilas => "ILAS",
            RxFsm::Synced => "SYNCED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RxLinkState {
    pub fsm: RxFsm,
    pub stability_counter: u32,
    /// Decode errors inside the current sliding window.
    pub error_counter: u32,
    /// Active-low SYNC; `false` requests CGS.
    pub sync_n: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    ErrorThreshold { errors: u32 },
    Lane { lane: u32, fault: LaneFault },
    BufferOverflow { lane: u32 },
    BufferUnderflow { lane: u32 },
    IlasTimeout,
}

impl FaultKind {
    pub fn name(&self) -> &'static str {
        match self {
            FaultKind::ErrorThreshold { .. } => "error_threshold",
            FaultKind::Lane {
                fault: LaneFault::MarkerMismatch { .. },
                ..
            } => "marker_mismatch",
            FaultKind::Lane {
                fault: LaneFault::ConfigMismatch { .. },
                ..
            } => "config_mismatch",
            FaultKind::Lane {
                fault: LaneFault::UnexpectedControl { .. },
                ..
            } => "unexpected_control",
            FaultKind::BufferOverflow { .. } => "buffer_overflow",
            FaultKind::BufferUnderflow { .. } => "buffer_underflow",
            FaultKind::IlasTimeout => "ilas_timeout",
        }
    }

    pub fn lane(&self) -> Option<u32> {
        match self {
            FaultKind::Lane { lane, .. }
            | FaultKind::BufferOverflow { lane }
            | FaultKind::BufferUnderflow { lane } => Some(*lane),
            _ => None,
        }
    }

    fn detail(&self) -> String {
        match self {
            FaultKind::ErrorThreshold { errors } => format!("errors={errors}"),
            FaultKind::Lane { fault, .. } => fault.to_string().replace(' ', "_"),
            _ => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RxEventKind {
    State { from: RxFsm, to: RxFsm },
    Rotation { rotation: u8 },
    CgsLock,
    IlasStart,
    IlasDone,
    FirstWrite,
    Release { lmfc_phase: u32 },
    SysrefEdge { misaligned: bool },
    Fault(FaultKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RxEvent {
    pub cycle: u64,
    pub lane: Option<u32>,
    pub kind: RxEventKind,
}

impl fmt::Display for RxEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lane = self.lane.map_or("-".to_string(), |l| l.to_string());
        let (name, detail) = match &self.kind {
            RxEventKind::State { from, to } => ("state", format!("{from}->{to}")),
            RxEventKind::Rotation { rotation } => ("rotation", rotation.to_string()),
            RxEventKind::CgsLock => ("cgs_lock", String::new()),
            RxEventKind::IlasStart => ("ilas_start", String::new()),
            RxEventKind::IlasDone => ("ilas_done", String::new()),
            RxEventKind::FirstWrite => ("first_write", String::new()),
            RxEventKind::Release { lmfc_phase } => ("release", format!("lmfc_phase={lmfc_phase}")),
            RxEventKind::SysrefEdge { misaligned } => {
                ("sysref", if *misaligned { "misaligned" } else { "aligned" }.to_string())
            }
            RxEventKind::Fault(k) => ("fault", format!("{}:{}", k.name(), k.detail())),
        };
        write!(f, "cycle={} lane={} event={} detail={}", self.cycle, lane, name, detail)
    }
}

/// Per-class decode error totals over the whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ErrorCounts {
    pub not_in_table: u64,
    pub disparity: u64,
    pub unexpected_control: u64,
    pub marker_mismatch: u64,
    pub config_mismatch: u64,
    pub buffer_overflow: u64,
    pub buffer_underflow: u64,
    pub error_threshold: u64,
    pub ilas_timeout: u64,
}

impl ErrorCounts {
    fn count_fault(&mut self, k: &FaultKind) {
        let slot = match k {
            FaultKind::ErrorThreshold { .. } => &mut self.error_threshold,
            FaultKind::Lane {
                fault: LaneFault::MarkerMismatch { .. },
                ..
            } => &mut self.marker_mismatch,
            FaultKind::Lane {
                fault: LaneFault::ConfigMismatch { .. },
                ..
            } => &mut self.config_mismatch,
            FaultKind::Lane {
                fault: LaneFault::UnexpectedControl { .. },
                ..
            } => &mut self.unexpected_control,
            FaultKind::BufferOverflow { .. } => &mut self.buffer_overflow,
            FaultKind::BufferUnderflow { .. } => &mut self.buffer_underflow,
            FaultKind::IlasTimeout => &mut self.ilas_timeout,
        };
        *slot += 1;
    }
}

/// One cycle of receiver output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RxOutput {
    pub words: Vec<u32>,
    pub valid: bool,
    pub lane_errors: Vec<bool>,
}

/// Sliding count of decode errors over the last `len` cycles.
#[derive(Debug, Clone)]
struct ErrorWindow {
    ring: Vec<u32>,
    pos: usize,
    sum: u32,
}

impl ErrorWindow {
    fn new(len: u32) -> Self {
        ErrorWindow {
            ring: vec![0; len.max(1) as usize],
            pos: 0,
            sum: 0,
        }
    }

    fn push(&mut self, n: u32) -> u32 {
        self.sum = self.sum - self.ring[self.pos] + n;
        self.ring[self.pos] = n;
        self.pos = (self.pos + 1) % self.ring.len();
        self.sum
    }

    fn clear(&mut self) {
        self.ring.iter_mut().for_each(|v| *v = 0);
        self.pos = 0;
        self.sum = 0;
    }
}

#[derive(Debug, Clone)]
pub struct Receiver {
    cfg: LinkConfig,
    settings: IlasSettings,
    expected: Vec<IlasConfig>,
    state: RxLinkState,
    lmfc: LmfcCounter,
    lanes: Vec<LaneState>,
    phy_count: u32,
    released: bool,
    cycle: u64,
    ilas_entry: u64,
    ilas_timeout: u64,
    window: ErrorWindow,
    counts: ErrorCounts,
    resync_count: u32,
    first_write: Vec<bool>,
    pending: Vec<Option<u32>>,
    aligned: Vec<Option<Word>>,
    events: Vec<RxEvent>,
    out: RxOutput,
}

impl Receiver {
    pub fn new(cfg: &LinkConfig, settings: &IlasSettings) -> Self {
        let l = cfg.lanes as usize;
        Receiver {
            cfg: *cfg,
            settings: *settings,
            expected: (0..cfg.lanes).map(|i| settings.expected_for_lane(cfg, i)).collect(),
            state: RxLinkState {
                fsm: RxFsm::Reset,
                stability_counter: 0,
                error_counter: 0,
                sync_n: false,
            },
            lmfc: LmfcCounter::new(cfg.multiframe_octets()),
            lanes: (0..cfg.lanes).map(|i| LaneState::new(cfg, i)).collect(),
            phy_count: 0,
            released: false,
            cycle: 0,
            ilas_entry: 0,
            ilas_timeout: u64::from((6 * cfg.multiframe_octets() + cfg.buffer_depth) / OCTETS_PER_CYCLE),
            window: ErrorWindow::new(cfg.error_window),
            counts: ErrorCounts::default(),
            resync_count: 0,
            first_write: vec![false; l],
            pending: vec![None; l],
            aligned: vec![None; l],
            events: Vec::new(),
            out: RxOutput {
                words: vec![0; l],
                valid: false,
                lane_errors: vec![false; l],
            },
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn state(&self) -> RxLinkState {
        self.state
    }

    pub fn fsm(&self) -> RxFsm {
        self.state.fsm
    }

    /// True while SYNC is asserted (active low on the wire).
    pub fn sync_request(&self) -> bool {
        !self.state.sync_n
    }

    pub fn lmfc(&self) -> &LmfcCounter {
        &self.lmfc
    }

    pub fn lanes(&self) -> &[LaneState] {
        &self.lanes
    }

    pub fn released(&self) -> bool {
        self.released
    }

    pub fn resync_count(&self) -> u32 {
        self.resync_count
    }

    pub fn error_counts(&self) -> ErrorCounts {
        self.counts
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Events since the last call.
    pub fn drain_events(&mut self) -> std::vec::Drain<'_, RxEvent> {
        self.events.drain(..)
    }

    pub fn output(&self) -> &RxOutput {
        &self.out
    }

    fn event(&mut self, lane: Option<u32>, kind: RxEventKind) {
        self.events.push(RxEvent {
            cycle: self.cycle,
            lane,
            kind,
        });
    }

    fn goto(&mut self, to: RxFsm) {
        let from = self.state.fsm;
        self.state.fsm = to;
        self.state.sync_n = matches!(to, RxFsm::Ilas | RxFsm::Synced);
        self.event(None, RxEventKind::State { from, to });
    }

    fn fault(&mut self, kind: FaultKind) {
        self.counts.count_fault(&kind);
        let keep_rotation = !matches!(kind, FaultKind::Lane { .. } | FaultKind::IlasTimeout);
        self.event(kind.lane(), RxEventKind::Fault(kind));
        if keep_rotation {
            self.lanes.iter_mut().for_each(LaneState::clear_keep_rotation);
        } else {
            self.lanes.iter_mut().for_each(LaneState::clear);
        }
        self.released = false;
        self.window.clear();
        self.state.stability_counter = 0;
        self.state.error_counter = 0;
        self.first_write.iter_mut().for_each(|f| *f = false);
        self.resync_count += 1;
        self.goto(RxFsm::Cgs);
    }

    /// One link clock: four characters per lane, the SYSREF level and the
    /// PHY readiness flag.
    pub fn step(&mut self, input: &[Word], sysref: bool, phy_ready: bool) -> &RxOutput {
        assert_eq!(input.len(), self.lanes.len(), "one word per lane");
        let threshold = self.cfg.cgs_threshold;
        self.out.valid = false;

        let tick = self.lmfc.step(sysref);
        if tick.edge {
            let misaligned = self.lmfc.sysref_misaligned;
            self.event(None, RxEventKind::SysrefEdge { misaligned });
        }

        let mut cycle_errors = 0u32;
        for (lane, w) in input.iter().enumerate() {
            let mut any = false;
            for c in w {
                self.counts.not_in_table += u64::from(c.not_in_table);
                self.counts.disparity += u64::from(c.disparity_error);
                if c.is_error() {
                    cycle_errors += 1;
                    any = true;
                }
            }
            self.out.lane_errors[lane] = any;
        }

        let mut aligned = std::mem::take(&mut self.aligned);
        for i in 0..self.lanes.len() {
            let (a, latched) = self.lanes[i].align(&input[i]);
            aligned[i] = a;
            if let Some(r) = latched {
                self.event(Some(i as u32), RxEventKind::Rotation { rotation: r });
            }
        }

        match self.state.fsm {
            RxFsm::Reset => self.goto(RxFsm::WaitForPhy),
            RxFsm::WaitForPhy => {
                self.phy_count = if phy_ready { self.phy_count + 1 } else { 0 };
                if self.phy_count >= PHY_READY_CYCLES {
                    self.goto(RxFsm::Cgs);
                }
            }
            RxFsm::Cgs => self.cgs_cycle(&aligned, threshold, tick),
            RxFsm::Ilas | RxFsm::Synced => self.link_cycle(&aligned, cycle_errors, tick),
        }
        self.aligned = aligned;
        self.cycle += 1;
        &self.out
    }

    fn cgs_cycle(&mut self, aligned: &[Option<Word>], threshold: u32, tick: LmfcTick) {
        for (i, a) in aligned.iter().enumerate() {
            if let Some(w) = a {
                if self.lanes[i].cgs_update(w, threshold) {
                    self.event(Some(i as u32), RxEventKind::CgsLock);
                }
            }
        }
        if self.lanes.iter().all(|l| l.cgs_achieved(threshold)) {
            self.state.stability_counter = self.state.stability_counter.saturating_add(1);
        } else {
            self.state.stability_counter = 0;
        }
        if self.state.stability_counter >= self.cfg.stability_cycles && tick.boundary {
            self.lanes.iter_mut().for_each(LaneState::arm_ilas);
            self.ilas_entry = self.cycle;
            self.goto(RxFsm::Ilas);
        }
    }

    // indexed: the body needs `self` mutably
    #[allow(clippy::needless_range_loop)]
    fn link_cycle(&mut self, aligned: &[Option<Word>], cycle_errors: u32, tick: LmfcTick) {
        let errors = self.window.push(cycle_errors);
        self.state.error_counter = errors;
        if errors > self.cfg.error_threshold {
            return self.fault(FaultKind::ErrorThreshold { errors });
        }

        for i in 0..self.lanes.len() {
            self.pending[i] = None;
            let Some(w) = aligned[i] else { continue };
            let step = self.lanes[i].receive(&w, &self.settings, &self.expected[i]);
            match step {
                Ok(LaneStep::Idle) => {}
                Ok(LaneStep::IlasStart) => self.event(Some(i as u32), RxEventKind::IlasStart),
                Ok(LaneStep::IlasDone) => self.event(Some(i as u32), RxEventKind::IlasDone),
                Ok(LaneStep::Data(word)) => self.pending[i] = Some(word),
                Err(fault) => {
                    return self.fault(FaultKind::Lane {
                        lane: i as u32,
                        fault,
                    })
                }
            }
        }

        // release decision sees the fill before this cycle's writes
        if !self.released
            && self.lanes.iter().all(|l| !l.elastic.is_empty())
            && tick.phase == self.cfg.release_offset
        {
            self.released = true;
            self.event(None, RxEventKind::Release { lmfc_phase: tick.phase });
        }
        if self.released {
            for i in 0..self.lanes.len() {
                match self.lanes[i].elastic.pop() {
                    Ok(w) => self.out.words[i] = w,
                    Err(_) => return self.fault(FaultKind::BufferUnderflow { lane: i as u32 }),
                }
            }
            self.out.valid = true;
        }
        for i in 0..self.lanes.len() {
            if let Some(word) = self.pending[i] {
                if self.lanes[i].elastic.push(word).is_err() {
                    self.out.valid = false;
                    return self.fault(FaultKind::BufferOverflow { lane: i as u32 });
                }
                if !self.first_write[i] {
                    self.first_write[i] = true;
                    self.event(Some(i as u32), RxEventKind::FirstWrite);
                }
            }
        }

        if self.state.fsm == RxFsm::Ilas {
            if self.lanes.iter().all(|l| l.phase == LanePhase::Data) {
                self.goto(RxFsm::Synced);
            } else if self.cycle - self.ilas_entry > self.ilas_timeout {
                self.fault(FaultKind::IlasTimeout);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Char;

    fn rx() -> Receiver {
        Receiver::new(&LinkConfig::new(2, 4, 32), &IlasSettings::default())
    }

    #[test]
    fn reset_requests_sync() {
        let r = rx();
        assert_eq!(r.fsm(), RxFsm::Reset);
        assert!(r.sync_request());
        assert!(!r.state().sync_n);
    }

    #[test]
    fn instances_are_identical() {
        let mut a = rx();
        let mut b = rx();
        let input = [[Char::K28_5; 4]; 2];
        for c in 0..200 {
            let oa = a.step(&input, c % 128 == 3, true).clone();
            let ob = b.step(&input, c % 128 == 3, true).clone();
            assert_eq!(oa, ob);
            assert_eq!(a.state(), b.state());
        }
    }

    #[test]
    fn reset_then_wait_for_phy() {
        let mut r = rx();
        let input = [[Char::K28_5; 4]; 2];
        r.step(&input, false, false);
        assert_eq!(r.fsm(), RxFsm::WaitForPhy);
        for _ in 0..10 {
            r.step(&input, false, false);
        }
        assert_eq!(r.fsm(), RxFsm::WaitForPhy);
        for _ in 0..PHY_READY_CYCLES {
            r.step(&input, false, true);
        }
        assert_eq!(r.fsm(), RxFsm::Cgs);
    }

    #[test]
    fn holds_in_cgs_without_sysref() {
        let mut r = rx();
        let input = [[Char::K28_5; 4]; 2];
        for _ in 0..1000 {
            r.step(&input, false, true);
        }
        assert_eq!(r.fsm(), RxFsm::Cgs);
        assert!(r.sync_request());
        assert!(!r.lmfc().locked);
    }

    #[test]
    fn leaves_cgs_on_lmfc_boundary() {
        let mut r = rx();
        let input = [[Char::K28_5; 4]; 2];
        let mut left = None;
        for c in 0..200u64 {
            r.step(&input, c == 10, true);
            if r.fsm() == RxFsm::Ilas {
                left = Some(c);
                break;
            }
        }
        let c = left.expect("left CGS");
        assert_eq!((c - 10) % 32, 0);
        assert!(!r.sync_request());
    }

    #[test]
    fn error_window() {
        let mut w = ErrorWindow::new(3);
        assert_eq!(w.push(2), 2);
        assert_eq!(w.push(1), 3);
        assert_eq!(w.push(0), 3);
        assert_eq!(w.push(0), 1);
        assert_eq!(w.push(0), 0);
    }

    #[test]
    fn event_line_format() {
        let e = RxEvent {
            cycle: 42,
            lane: Some(1),
            kind: RxEventKind::Rotation { rotation: 3 },
        };
        assert_eq!(e.to_string(), "cycle=42 lane=1 event=rotation detail=3");
        let e = RxEvent {
            cycle: 7,
            lane: None,
            kind: RxEventKind::State {
                from: RxFsm::Cgs,
                to: RxFsm::Ilas,
            },
        };
        assert_eq!(e.to_string(), "cycle=7 lane=- event=state detail=CGS->ILAS");
    }
}
