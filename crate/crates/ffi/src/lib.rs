//! C ABI over the `jesd204b` link model.
//!
//! Every function returns a [`JesdStatus`]. On failure a message is kept per
//! thread and can be read with [`jesd_last_error`]. Strings handed out by the
//! library are owned by the caller and released with [`jesd_string_free`].
//! Receivers are opaque handles released with [`jesd_receiver_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jesd204b::codec::{decode_symbol, encode_char, Char, CodecError, RunningDisparity, Symbol10};
use jesd204b::ilas::{ChecksumRule, IlasConfig, ILAS_CONFIG_OCTETS};
use jesd204b::io::{config_file, parse_config, ConfigFileError};
use jesd204b::rx::{Receiver, RxFsm};
use jesd204b::scrambler::{descramble_word32, scramble_word32, ScramblerState};
use jesd204b::sim::{run_simulation, Collect, SimConfigError};
use jesd204b::tx::{word_of, Word};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JesdStatus {
    Ok = 0,
    /// A required pointer was null.
    Null = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// Malformed JSON or an unknown key.
    Parse = 3,
    /// The link configuration breaks a constraint.
    Constraint = 4,
    /// Not one of the five link control codes.
    InvalidControl = 5,
    /// An ILAS field does not fit its wire width.
    FieldOverflow = 6,
    /// An output buffer is too small, or an input has the wrong length.
    BufferTooSmall = 7,
    /// The simulation setup is inconsistent.
    Sim = 8,
    /// An argument is out of range.
    Invalid = 9,
    /// Internal panic; the handle involved should be dropped.
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: JesdStatus, msg: impl Into<String>) -> JesdStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`JesdStatus::Panic`] and clearing the
/// error message on success.
fn guard(f: impl FnOnce() -> JesdStatus) -> JesdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(JesdStatus::Ok) => {
            set_error("");
            JesdStatus::Ok
        }
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(JesdStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, JesdStatus> {
    if s.is_null() {
        return Err(fail(JesdStatus::Null, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(JesdStatus::Utf8, e.to_string()))
}

fn config_status(e: ConfigFileError) -> JesdStatus {
    let status = match &e {
        ConfigFileError::Parse { .. } | ConfigFileError::Io { .. } => JesdStatus::Parse,
        ConfigFileError::Constraint(_) => JesdStatus::Constraint,
        ConfigFileError::Invalid(_) => JesdStatus::Sim,
    };
    fail(status, e.to_string())
}

unsafe fn give_string(out: *mut *mut c_char, s: String) -> JesdStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            JesdStatus::Ok
        }
        Err(e) => fail(JesdStatus::Utf8, e.to_string()),
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn jesd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn jesd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a JSON configuration. When `effective` is non-null it
/// receives the configuration with every default filled in.
///
/// # Safety
/// `json` must be a NUL-terminated string; `effective` null or writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_config_validate(json: *const c_char, effective: *mut *mut c_char) -> JesdStatus {
    guard(|| {
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_config(text) {
            Ok(setup) if !effective.is_null() => give_string(effective, config_file::to_json(&setup)),
            Ok(_) => JesdStatus::Ok,
            Err(e) => config_status(e),
        }
    })
}

/// A decoded character with its flags.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JesdChar {
    pub octet: u8,
    pub is_control: bool,
    pub not_in_table: bool,
    pub disparity_error: bool,
}

impl From<Char> for JesdChar {
    fn from(c: Char) -> Self {
        JesdChar {
            octet: c.octet,
            is_control: c.is_control,
            not_in_table: c.not_in_table,
            disparity_error: c.disparity_error,
        }
    }
}

impl From<JesdChar> for Char {
    fn from(c: JesdChar) -> Self {
        Char {
            octet: c.octet,
            is_control: c.is_control,
            not_in_table: c.not_in_table,
            disparity_error: c.disparity_error,
        }
    }
}

fn rd_of(positive: bool) -> RunningDisparity {
    if positive {
        RunningDisparity::Positive
    } else {
        RunningDisparity::Negative
    }
}

/// Encodes one character. Running disparity is passed as `rd_positive`
/// (false = RD-) and the next value is written to `rd_out`. The symbol is
/// ten bits, bit 9 transmitted first.
///
/// # Safety
/// `symbol` and `rd_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_encode_char(
    c: JesdChar,
    rd_positive: bool,
    symbol: *mut u16,
    rd_out: *mut bool,
) -> JesdStatus {
    guard(|| {
        if symbol.is_null() || rd_out.is_null() {
            return fail(JesdStatus::Null, "null output pointer");
        }
        match encode_char(c.into(), rd_of(rd_positive)) {
            Ok((s, rd)) => {
                *symbol = s.bits();
                *rd_out = rd == RunningDisparity::Positive;
                JesdStatus::Ok
            }
            Err(e @ CodecError::InvalidControlCode(_)) => fail(JesdStatus::InvalidControl, e.to_string()),
            Err(e) => fail(JesdStatus::Invalid, e.to_string()),
        }
    })
}

/// Decodes one ten-bit symbol. Errors are reported in the character flags,
/// not the status.
///
/// # Safety
/// `out` and `rd_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_decode_symbol(
    symbol: u16,
    rd_positive: bool,
    out: *mut JesdChar,
    rd_out: *mut bool,
) -> JesdStatus {
    guard(|| {
        if out.is_null() || rd_out.is_null() {
            return fail(JesdStatus::Null, "null output pointer");
        }
        if symbol > Symbol10::MASK {
            return fail(JesdStatus::Invalid, format!("symbol {symbol:#x} wider than ten bits"));
        }
        let (c, rd) = decode_symbol(Symbol10(symbol), rd_of(rd_positive));
        *out = c.into();
        *rd_out = rd == RunningDisparity::Positive;
        JesdStatus::Ok
    })
}

unsafe fn word32(
    state: *mut u16,
    word: u32,
    out: *mut u32,
    f: fn(&mut ScramblerState, u32) -> u32,
) -> JesdStatus {
    guard(|| {
        if state.is_null() || out.is_null() {
            return fail(JesdStatus::Null, "null pointer");
        }
        if *state > 0x7fff {
            return fail(JesdStatus::Invalid, "scrambler state wider than 15 bits");
        }
        let mut s = ScramblerState::new(*state);
        *out = f(&mut s, word);
        *state = s.bits();
        JesdStatus::Ok
    })
}

/// Scrambles four octets (octet 0 in bits 31..24). `state` holds the last 15
/// line bits, most recent in bit 0; all ones after reset.
///
/// # Safety
/// `state` must be readable and writable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_scramble_word32(state: *mut u16, word: u32, out: *mut u32) -> JesdStatus {
    word32(state, word, out, scramble_word32)
}

/// Inverse of [`jesd_scramble_word32`].
///
/// # Safety
/// As for [`jesd_scramble_word32`].
#[no_mangle]
pub unsafe extern "C" fn jesd_descramble_word32(state: *mut u16, word: u32, out: *mut u32) -> JesdStatus {
    word32(state, word, out, descramble_word32)
}

/// ILAS configuration fields as carried on the wire (counts minus one).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JesdIlasConfig {
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

macro_rules! convert_ilas {
    ($from:ident, $to:ident, $($f:ident),*) => {
        impl From<$from> for $to {
            fn from(c: $from) -> Self {
                $to { $($f: c.$f),* }
            }
        }
    };
}

convert_ilas!(JesdIlasConfig, IlasConfig, did, bid, adjcnt, adjdir, phadj, lid, scr, l, f, k, m, cs, n, subclassv, nprime, jesdv, s, hd, cf, res1, res2, fchk);
convert_ilas!(IlasConfig, JesdIlasConfig, did, bid, adjcnt, adjdir, phadj, lid, scr, l, f, k, m, cs, n, subclassv, nprime, jesdv, s, hd, cf, res1, res2, fchk);

/// Length of a packed ILAS configuration.
pub const JESD_ILAS_CONFIG_OCTETS: usize = 14;
const _: () = assert!(JESD_ILAS_CONFIG_OCTETS == ILAS_CONFIG_OCTETS);

/// `rule`: 0 sums octets 0..12, 1 sums the field values.
fn checksum_rule(rule: u32) -> Result<ChecksumRule, JesdStatus> {
    match rule {
        0 => Ok(ChecksumRule::OctetSum),
        1 => Ok(ChecksumRule::FieldSum),
        _ => Err(fail(JesdStatus::Invalid, format!("unknown checksum rule {rule}"))),
    }
}

/// Packs `cfg` into 14 octets with FCHK recomputed under `rule`.
///
/// # Safety
/// `cfg` readable; `out` writable for `out_len` octets.
#[no_mangle]
pub unsafe extern "C" fn jesd_ilas_pack(
    cfg: *const JesdIlasConfig,
    rule: u32,
    out: *mut u8,
    out_len: usize,
) -> JesdStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(JesdStatus::Null, "null pointer");
        }
        if out_len < ILAS_CONFIG_OCTETS {
            return fail(JesdStatus::BufferTooSmall, format!("need {ILAS_CONFIG_OCTETS} octets"));
        }
        let rule = match checksum_rule(rule) {
            Ok(r) => r,
            Err(s) => return s,
        };
        match IlasConfig::from(*cfg).pack(rule) {
            Ok(image) => {
                ptr::copy_nonoverlapping(image.as_ptr(), out, ILAS_CONFIG_OCTETS);
                JesdStatus::Ok
            }
            Err(e) => fail(JesdStatus::FieldOverflow, e.to_string()),
        }
    })
}

/// Unpacks 14 octets. `checksum_ok` reports whether FCHK matches under `rule`.
///
/// # Safety
/// `octets` readable for `len` octets; `out` and `checksum_ok` writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_ilas_unpack(
    octets: *const u8,
    len: usize,
    rule: u32,
    out: *mut JesdIlasConfig,
    checksum_ok: *mut bool,
) -> JesdStatus {
    guard(|| {
        if octets.is_null() || out.is_null() || checksum_ok.is_null() {
            return fail(JesdStatus::Null, "null pointer");
        }
        if len != ILAS_CONFIG_OCTETS {
            return fail(JesdStatus::BufferTooSmall, format!("expected {ILAS_CONFIG_OCTETS} octets, got {len}"));
        }
        let rule = match checksum_rule(rule) {
            Ok(r) => r,
            Err(s) => return s,
        };
        let mut image = [0u8; ILAS_CONFIG_OCTETS];
        ptr::copy_nonoverlapping(octets, image.as_mut_ptr(), ILAS_CONFIG_OCTETS);
        let (ic, ok) = IlasConfig::unpack(&image, rule);
        *out = ic.into();
        *checksum_ok = ok;
        JesdStatus::Ok
    })
}

/// Opaque receiver handle.
pub struct JesdReceiver {
    rx: Receiver,
    words: Vec<Word>,
}

/// Creates a receiver from a JSON configuration (same format as the command
/// line; only the link and `ilas` keys matter).
///
/// # Safety
/// `json` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_receiver_new(json: *const c_char, out: *mut *mut JesdReceiver) -> JesdStatus {
    guard(|| {
        if out.is_null() {
            return fail(JesdStatus::Null, "null output pointer");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let setup = match parse_config(text) {
            Ok(s) => s,
            Err(e) => return config_status(e),
        };
        let rx = Receiver::new(&setup.link, &setup.ilas);
        let words = vec![[Char::INVALID; 4]; setup.link.lanes as usize];
        *out = Box::into_raw(Box::new(JesdReceiver { rx, words }));
        JesdStatus::Ok
    })
}

/// Releases a receiver. Null is ignored.
///
/// # Safety
/// `rx` must come from [`jesd_receiver_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn jesd_receiver_free(rx: *mut JesdReceiver) {
    if !rx.is_null() {
        drop(Box::from_raw(rx));
    }
}

/// Advances one link clock. `chars` holds four characters per lane, lane 0
/// first (`n_chars` = 4 * L). `words` receives one 32-bit word per lane
/// (octet 0 in bits 31..24) and `valid` whether they carry payload.
///
/// # Safety
/// `rx` a live handle; `chars` readable for `n_chars`; `words` writable for
/// `n_words`; `valid` writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_receiver_step(
    rx: *mut JesdReceiver,
    chars: *const JesdChar,
    n_chars: usize,
    sysref: bool,
    phy_ready: bool,
    words: *mut u32,
    n_words: usize,
    valid: *mut bool,
) -> JesdStatus {
    guard(|| {
        if rx.is_null() || chars.is_null() || words.is_null() || valid.is_null() {
            return fail(JesdStatus::Null, "null pointer");
        }
        let h = &mut *rx;
        let lanes = h.words.len();
        if n_chars != 4 * lanes || n_words < lanes {
            return fail(
                JesdStatus::BufferTooSmall,
                format!("{lanes} lanes need {} chars and {lanes} words", 4 * lanes),
            );
        }
        let input = std::slice::from_raw_parts(chars, n_chars);
        for (w, c) in h.words.iter_mut().zip(input.chunks_exact(4)) {
            *w = std::array::from_fn(|i| c[i].into());
        }
        let out = h.rx.step(&h.words, sysref, phy_ready);
        let dst = std::slice::from_raw_parts_mut(words, lanes);
        dst.copy_from_slice(&out.words);
        *valid = out.valid;
        JesdStatus::Ok
    })
}

/// Link state codes of [`JesdRxState::fsm`].
pub const JESD_FSM_RESET: u32 = 0;
pub const JESD_FSM_WAIT_FOR_PHY: u32 = 1;
pub const JESD_FSM_CGS: u32 = 2;
pub const JESD_FSM_ILAS: u32 = 3;
pub const JESD_FSM_SYNCED: u32 = 4;

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JesdRxState {
    pub fsm: u32,
    /// Active low: false requests CGS from the transmitter.
    pub sync_n: bool,
    pub released: bool,
    pub lmfc_locked: bool,
    pub lmfc_phase: u32,
    pub resync_count: u32,
    pub cycle: u64,
}

/// Snapshot of the receiver's link state.
///
/// # Safety
/// `rx` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_receiver_state(rx: *const JesdReceiver, out: *mut JesdRxState) -> JesdStatus {
    guard(|| {
        if rx.is_null() || out.is_null() {
            return fail(JesdStatus::Null, "null pointer");
        }
        let r = &(*rx).rx;
        let st = r.state();
        *out = JesdRxState {
            fsm: match st.fsm {
                RxFsm::Reset => JESD_FSM_RESET,
                RxFsm::WaitForPhy => JESD_FSM_WAIT_FOR_PHY,
                RxFsm::Cgs => JESD_FSM_CGS,
                RxFsm::Ilas => JESD_FSM_ILAS,
                RxFsm::Synced => JESD_FSM_SYNCED,
            },
            sync_n: st.sync_n,
            released: r.released(),
            lmfc_locked: r.lmfc().locked,
            lmfc_phase: r.lmfc().phase,
            resync_count: r.resync_count(),
            cycle: r.cycle(),
        };
        JesdStatus::Ok
    })
}

/// Packs four characters into a 32-bit word, octet 0 in bits 31..24.
///
/// # Safety
/// `chars` readable for four elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_word_of(chars: *const JesdChar, out: *mut u32) -> JesdStatus {
    guard(|| {
        if chars.is_null() || out.is_null() {
            return fail(JesdStatus::Null, "null pointer");
        }
        let c = std::slice::from_raw_parts(chars, 4);
        let w: Word = std::array::from_fn(|i| c[i].into());
        *out = word_of(&w);
        JesdStatus::Ok
    })
}

/// Runs a full simulation from a JSON configuration and writes the JSON
/// report to `report`.
///
/// # Safety
/// `json` NUL-terminated; `report` writable.
#[no_mangle]
pub unsafe extern "C" fn jesd_simulate(json: *const c_char, report: *mut *mut c_char) -> JesdStatus {
    guard(|| {
        if report.is_null() {
            return fail(JesdStatus::Null, "null output pointer");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let setup = match parse_config(text) {
            Ok(s) => s,
            Err(e) => return config_status(e),
        };
        match run_simulation(&setup, Collect::default()) {
            Ok(out) => give_string(report, out.report.to_json()),
            Err(e @ SimConfigError::Config(_)) => fail(JesdStatus::Constraint, e.to_string()),
            Err(e) => fail(JesdStatus::Sim, e.to_string()),
        }
    })
}
