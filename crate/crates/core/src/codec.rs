//! 8b/10b line code.
//!
//! Stands in for the transceiver: encodes octets with running disparity,
//! decodes 10-bit symbols into [`Char`]s carrying error flags, and finds
//! symbol boundaries in a raw bitstream by comma search.
//!
//! A [`Symbol10`] keeps its bits in transmission order: bit 9 is `a` (sent
//! first) and bit 0 is `j`.

use std::fmt;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("K{}.{} is not a valid control character", .0 & 0x1f, .0 >> 5)]
    InvalidControlCode(u8),
    #[error("no comma found in the first {0} bits")]
    NoCommaFound(usize),
}

/// One decoded octet plus its control flag and decoder error flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Char {
    pub octet: u8,
    pub is_control: bool,
    pub not_in_table: bool,
    pub disparity_error: bool,
}

impl Char {
    pub const K28_0: Char = Char::control(0x1c);
    pub const K28_3: Char = Char::control(0x7c);
    pub const K28_4: Char = Char::control(0x9c);
    pub const K28_5: Char = Char::control(0xbc);
    pub const K28_7: Char = Char::control(0xfc);

    /// What a decoder reports for a code group outside the table.
    pub const INVALID: Char = Char {
        octet: 0,
        is_control: false,
        not_in_table: true,
        disparity_error: false,
    };

    pub const fn data(octet: u8) -> Char {
        Char {
            octet,
            is_control: false,
            not_in_table: false,
            disparity_error: false,
        }
    }

    pub const fn control(octet: u8) -> Char {
        Char {
            octet,
            is_control: true,
            not_in_table: false,
            disparity_error: false,
        }
    }

    pub fn is_error(&self) -> bool {
        self.not_in_table || self.disparity_error
    }

    /// A K28.5 with no decode error.
    pub fn is_clean_comma(&self) -> bool {
        self.is_control && self.octet == 0xbc && !self.is_error()
    }

    /// The same character with error flags cleared.
    pub fn without_flags(&self) -> Char {
        Char {
            octet: self.octet,
            is_control: self.is_control,
            not_in_table: false,
            disparity_error: false,
        }
    }
}

impl fmt::Display for Char {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.is_control { 'K' } else { 'D' };
        write!(f, "{kind}{}.{}", self.octet & 0x1f, self.octet >> 5)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum RunningDisparity {
    #[default]
    Negative,
    Positive,
}

impl RunningDisparity {
    fn flip(self) -> Self {
        match self {
            RunningDisparity::Negative => RunningDisparity::Positive,
            RunningDisparity::Positive => RunningDisparity::Negative,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// A 10-bit code group, `a` in bit 9.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol10(pub u16);

impl Symbol10 {
    pub const MASK: u16 = 0x3ff;

    pub fn bits(self) -> u16 {
        self.0 & Self::MASK
    }

    /// Bit `i` in transmission order (0 = `a`).
    pub fn bit(self, i: usize) -> bool {
        (self.0 >> (9 - i)) & 1 != 0
    }

    pub fn ones(self) -> u32 {
        self.bits().count_ones()
    }

    /// Ones minus zeros.
    pub fn disparity(self) -> i32 {
        2 * self.ones() as i32 - 10
    }
}

impl fmt::Display for Symbol10 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:010b}", self.bits())
    }
}

// 5b/6b codes, abcdei, indexed by EDCBA: (RD-, RD+).
const CODE_6B: [(u8, u8); 32] = [
    (0b100111, 0b011000),
    (0b011101, 0b100010),
    (0b101101, 0b010010),
    (0b110001, 0b110001),
    (0b110101, 0b001010),
    (0b101001, 0b101001),
    (0b011001, 0b011001),
    (0b111000, 0b000111),
    (0b111001, 0b000110),
    (0b100101, 0b100101),
    (0b010101, 0b010101),
    (0b110100, 0b110100),
    (0b001101, 0b001101),
    (0b101100, 0b101100),
    (0b011100, 0b011100),
    (0b010111, 0b101000),
    (0b011011, 0b100100),
    (0b100011, 0b100011),
    (0b010011, 0b010011),
    (0b110010, 0b110010),
    (0b001011, 0b001011),
    (0b101010, 0b101010),
    (0b011010, 0b011010),
    (0b111010, 0b000101),
    (0b110011, 0b001100),
    (0b100110, 0b100110),
    (0b010110, 0b010110),
    (0b110110, 0b001001),
    (0b001110, 0b001110),
    (0b101110, 0b010001),
    (0b011110, 0b100001),
    (0b101011, 0b010100),
];
const CODE_6B_K28: (u8, u8) = (0b001111, 0b110000);

// 3b/4b data codes, fghj, indexed by HGF: (RD-, RD+). Entry 7 is P7.
const CODE_4B_DATA: [(u8, u8); 8] = [
    (0b1011, 0b0100),
    (0b1001, 0b1001),
    (0b0101, 0b0101),
    (0b1100, 0b0011),
    (0b1101, 0b0010),
    (0b1010, 0b1010),
    (0b0110, 0b0110),
    (0b1110, 0b0001),
];
const CODE_4B_A7: (u8, u8) = (0b0111, 0b1000);
const CODE_4B_CONTROL: [(u8, u8); 8] = [
    (0b1011, 0b0100),
    (0b0110, 0b1001),
    (0b1010, 0b0101),
    (0b1100, 0b0011),
    (0b1101, 0b0010),
    (0b0101, 0b1010),
    (0b1001, 0b0110),
    (0b0111, 0b1000),
];

/// Control characters a transmitter may emit on a JESD204B lane.
pub const LINK_CONTROL_CODES: [u8; 5] = [0x1c, 0x7c, 0x9c, 0xbc, 0xfc];

/// Every control character of the code: K28.0..K28.7 plus K23/27/29/30.7.
fn is_code_control(octet: u8) -> bool {
    let x = octet & 0x1f;
    let y = octet >> 5;
    x == 28 || (y == 7 && matches!(x, 23 | 27 | 29 | 30))
}

fn pick(pair: (u8, u8), rd: RunningDisparity) -> u8 {
    match rd {
        RunningDisparity::Negative => pair.0,
        RunningDisparity::Positive => pair.1,
    }
}

/// Table encoder; assumes `c` is a data character or any code control.
fn encode_raw(c: Char, rd: RunningDisparity) -> (Symbol10, RunningDisparity) {
    let x = (c.octet & 0x1f) as usize;
    let y = (c.octet >> 5) as usize;

    let six = if c.is_control && x == 28 {
        pick(CODE_6B_K28, rd)
    } else {
        pick(CODE_6B[x], rd)
    };
    let rd6 = if six.count_ones() != 3 { rd.flip() } else { rd };

    let four_pair = if c.is_control {
        if x == 28 {
            CODE_4B_CONTROL[y]
        } else {
            CODE_4B_A7
        }
    } else if y == 7
        && match rd6 {
            RunningDisparity::Negative => matches!(x, 17 | 18 | 20),
            RunningDisparity::Positive => matches!(x, 11 | 13 | 14),
        }
    {
        CODE_4B_A7
    } else {
        CODE_4B_DATA[y]
    };
    let four = pick(four_pair, rd6);
    let rd_out = if four.count_ones() != 2 { rd6.flip() } else { rd6 };

    (Symbol10(u16::from(six) << 4 | u16::from(four)), rd_out)
}

struct Tables {
    /// [rd][control][octet] -> (symbol, rd_out)
    encode: Vec<(Symbol10, RunningDisparity)>,
    /// [rd][symbol] -> decode result
    decode: Vec<(Char, RunningDisparity)>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let rds = [RunningDisparity::Negative, RunningDisparity::Positive];
        let mut encode = vec![(Symbol10(0), RunningDisparity::Negative); 2 * 2 * 256];
        // valid[rd][symbol] = decoded char and resulting rd
        let mut valid: Vec<Option<(Char, RunningDisparity)>> = vec![None; 2 * 1024];
        for rd in rds {
            for control in [false, true] {
                for octet in 0..=255u8 {
                    if control && !is_code_control(octet) {
                        continue;
                    }
                    let c = Char {
                        octet,
                        is_control: control,
                        ..Char::default()
                    };
                    let (sym, rd_out) = encode_raw(c, rd);
                    encode[rd.index() * 512 + usize::from(control) * 256 + usize::from(octet)] =
                        (sym, rd_out);
                    let slot = &mut valid[rd.index() * 1024 + usize::from(sym.bits())];
                    debug_assert!(slot.is_none(), "code group {sym} produced twice");
                    *slot = Some((c, rd_out));
                }
            }
        }
        let mut decode = vec![(Char::INVALID, RunningDisparity::Negative); 2 * 1024];
        for rd in rds {
            for bits in 0..1024usize {
                let here = valid[rd.index() * 1024 + bits];
                let other = valid[rd.flip().index() * 1024 + bits];
                decode[rd.index() * 1024 + bits] = match (here, other) {
                    (Some(hit), _) => hit,
                    (None, Some((c, rd_out))) => (
                        Char {
                            disparity_error: true,
                            ..c
                        },
                        rd_out,
                    ),
                    (None, None) => {
                        let ones = (bits as u16).count_ones();
                        let rd_out = match ones {
                            0..=4 => RunningDisparity::Negative,
                            5 => rd,
                            _ => RunningDisparity::Positive,
                        };
                        (Char::INVALID, rd_out)
                    }
                };
            }
        }
        Tables { encode, decode }
    })
}

/// Encodes one character. Control characters are limited to
/// [`LINK_CONTROL_CODES`].
pub fn encode_char(c: Char, rd: RunningDisparity) -> Result<(Symbol10, RunningDisparity), CodecError> {
    if c.is_control && !LINK_CONTROL_CODES.contains(&c.octet) {
        return Err(CodecError::InvalidControlCode(c.octet));
    }
    Ok(encode_unchecked(c, rd))
}

#[inline]
fn encode_unchecked(c: Char, rd: RunningDisparity) -> (Symbol10, RunningDisparity) {
    tables().encode[rd.index() * 512 + usize::from(c.is_control) * 256 + usize::from(c.octet)]
}

/// Decodes one code group. Never fails: out-of-table groups and disparity
/// violations are reported through the flags on the returned [`Char`].
#[inline]
pub fn decode_symbol(s: Symbol10, rd: RunningDisparity) -> (Char, RunningDisparity) {
    tables().decode[rd.index() * 1024 + usize::from(s.bits())]
}

/// Per-lane encoder holding the running disparity.
#[derive(Debug, Clone, Default)]
pub struct Encoder {
    rd: RunningDisparity,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn disparity(&self) -> RunningDisparity {
        self.rd
    }

    pub fn encode(&mut self, c: Char) -> Result<Symbol10, CodecError> {
        let (s, rd) = encode_char(c, self.rd)?;
        self.rd = rd;
        Ok(s)
    }
}

/// Per-lane decoder holding the running disparity.
#[derive(Debug, Clone, Default)]
pub struct Decoder {
    rd: RunningDisparity,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decode(&mut self, s: Symbol10) -> Char {
        let (c, rd) = decode_symbol(s, self.rd);
        self.rd = rd;
        c
    }
}

const COMMA_POSITIVE: [bool; 7] = [false, false, true, true, true, true, true];
const COMMA_NEGATIVE: [bool; 7] = [true, true, false, false, false, false, false];

/// Flattens code groups into a bitstream in transmission order.
pub fn serialize(symbols: &[Symbol10]) -> Vec<bool> {
    symbols
        .iter()
        .flat_map(|&s| (0..10).map(move |i| s.bit(i)))
        .collect()
}

/// Regroups `bits` into code groups starting at `offset`; a trailing partial
/// group is dropped.
pub fn deserialize(bits: &[bool], offset: usize) -> Vec<Symbol10> {
    bits.get(offset..)
        .unwrap_or(&[])
        .chunks_exact(10)
        .map(|chunk| Symbol10(chunk.iter().fold(0u16, |acc, &b| acc << 1 | u16::from(b))))
        .collect()
}

/// Locks symbol alignment on the first comma within the first
/// `2 * 10 * search_window` bits. Returns the bit offset (0..10) of the symbol
/// grid and the regrouped symbols from that offset on.
pub fn bit_align(bits: &[bool], search_window: usize) -> Result<(usize, Vec<Symbol10>), CodecError> {
    let limit = bits.len().min(2 * 10 * search_window);
    let found = (0..limit.saturating_sub(6)).find(|&i| {
        let w = &bits[i..i + 7];
        w == COMMA_POSITIVE || w == COMMA_NEGATIVE
    });
    match found {
        Some(pos) => {
            let offset = pos % 10;
            Ok((offset, deserialize(bits, offset)))
        }
        None => Err(CodecError::NoCommaFound(limit)),
    }
}
