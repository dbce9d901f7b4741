//! Text capture files: per-lane streams as seen at the receiver input.
//!
//! ```text
//! # jesd204b capture
//! # format: symbol10
//! # links: 1
//! # lanes: 2
//! # seed: 7
//! # config: {"links":1,"L":2,...}
//! 0011111010
//! 1100000101
//! ...
//! ```
//!
//! Body lines run in symbol-time order, then link, then lane. `symbol10`
//! lines hold ten bits in transmission order (a first). `octet_flag` lines
//! hold two hex digits, a space and `K` or `D`, optionally followed by an
//! error token made of `n` (not in table) and/or `d` (disparity error).

use std::fmt::Write as _;
use std::str::FromStr;

use crate::codec::{bit_align, serialize, Char, Decoder, Symbol10};
use crate::io::config_file::{parse_config, to_json_compact, ConfigFileError};
use crate::sim::{replay, ReplayOutcome, SimConfigError, SimSetup};

pub const MAGIC: &str = "# jesd204b capture";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureFormat {
    #[default]
    Symbol10,
    OctetFlag,
}

impl CaptureFormat {
    pub fn name(self) -> &'static str {
        match self {
            CaptureFormat::Symbol10 => "symbol10",
            CaptureFormat::OctetFlag => "octet_flag",
        }
    }
}

impl FromStr for CaptureFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "symbol10" => Ok(CaptureFormat::Symbol10),
            "octet_flag" => Ok(CaptureFormat::OctetFlag),
            _ => Err(format!("unknown capture format `{s}`")),
        }
    }
}

/// Per link, per lane.
pub type LaneStreams<T> = Vec<Vec<Vec<T>>>;

/// Per link, per lane streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaptureData {
    Symbol10(LaneStreams<Symbol10>),
    OctetFlag(LaneStreams<Char>),
}

impl CaptureData {
    pub fn format(&self) -> CaptureFormat {
        match self {
            CaptureData::Symbol10(_) => CaptureFormat::Symbol10,
            CaptureData::OctetFlag(_) => CaptureFormat::OctetFlag,
        }
    }

    /// Length of the shortest lane, in symbols.
    pub fn symbols(&self) -> usize {
        fn shortest<T>(v: &[Vec<Vec<T>>]) -> usize {
            v.iter().flatten().map(Vec::len).min().unwrap_or(0)
        }
        match self {
            CaptureData::Symbol10(v) => shortest(v),
            CaptureData::OctetFlag(v) => shortest(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureFile {
    pub setup: SimSetup,
    pub seed: u64,
    pub data: CaptureData,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CaptureError {
    #[error("not a capture file (missing `{MAGIC}` header)")]
    NotACapture,
    #[error("capture header: {0}")]
    Header(String),
    #[error("capture header config: {0}")]
    Config(#[from] ConfigFileError),
    #[error("capture line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("lane {lane} of link {link}: no comma found in the first {bits} bits")]
    NoComma { link: usize, lane: usize, bits: usize },
    #[error(transparent)]
    Setup(#[from] SimConfigError),
    #[error("no synchronization achieved within {cycles} captured cycles")]
    NoSyncAchieved { cycles: u64 },
}

fn char_token(c: Char) -> String {
    let mut s = format!("{:02x} {}", c.octet, if c.is_control { 'K' } else { 'D' });
    if c.is_error() {
        s.push(' ');
        if c.not_in_table {
            s.push('n');
        }
        if c.disparity_error {
            s.push('d');
        }
    }
    s
}

fn parse_char(line: &str) -> Result<Char, String> {
    let mut parts = line.split(' ');
    let (hex, kind) = (parts.next().unwrap_or(""), parts.next());
    if hex.len() != 2 {
        return Err(format!("expected two hex digits, got `{hex}`"));
    }
    let octet = u8::from_str_radix(hex, 16).map_err(|_| format!("bad hex octet `{hex}`"))?;
    let is_control = match kind {
        Some("K") => true,
        Some("D") => false,
        _ => return Err("expected K or D after the octet".into()),
    };
    let mut c = Char {
        octet,
        is_control,
        ..Char::default()
    };
    if let Some(flags) = parts.next() {
        if flags.is_empty() {
            return Err("empty error token".into());
        }
        for f in flags.chars() {
            match f {
                'n' if !c.not_in_table => c.not_in_table = true,
                'd' if !c.disparity_error => c.disparity_error = true,
                _ => return Err(format!("bad error token `{flags}`")),
            }
        }
    }
    if parts.next().is_some() {
        return Err("trailing fields".into());
    }
    Ok(c)
}

fn parse_symbol(line: &str) -> Result<Symbol10, String> {
    if line.len() != 10 || !line.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(format!("expected ten binary digits, got `{line}`"));
    }
    Ok(Symbol10(u16::from_str_radix(line, 2).expect("checked digits")))
}

impl CaptureFile {
    pub fn format(&self) -> CaptureFormat {
        self.data.format()
    }

    pub fn to_text(&self) -> String {
        let cfg = &self.setup.link;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "# format: {}", self.format().name());
        let _ = writeln!(out, "# links: {}", cfg.links);
        let _ = writeln!(out, "# lanes: {}", cfg.lanes);
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# config: {}", to_json_compact(&self.setup));
        let n = self.data.symbols();
        for t in 0..n {
            match &self.data {
                CaptureData::Symbol10(links) => {
                    for s in links.iter().flatten().map(|lane| lane[t]) {
                        let _ = writeln!(out, "{:010b}", s.bits());
                    }
                }
                CaptureData::OctetFlag(links) => {
                    for c in links.iter().flatten().map(|lane| lane[t]) {
                        out.push_str(&char_token(c));
                        out.push('\n');
                    }
                }
            }
        }
        out
    }

    /// Parses a capture. A trailing partial row (fewer lines than lanes) is
    /// dropped, so a file cut anywhere still reads.
    pub fn parse(text: &str) -> Result<CaptureFile, CaptureError> {
        let mut lines = text.lines().enumerate().peekable();
        match lines.next() {
            Some((_, l)) if l.trim_end() == MAGIC => {}
            _ => return Err(CaptureError::NotACapture),
        }
        let mut format = None;
        let mut links = None;
        let mut lanes = None;
        let mut seed = None;
        let mut setup = None;
        while let Some((_, l)) = lines.peek() {
            let Some(rest) = l.strip_prefix('#') else { break };
            let (key, value) = rest
                .trim()
                .split_once(':')
                .ok_or_else(|| CaptureError::Header(format!("malformed line `{l}`")))?;
            let value = value.trim();
            let num = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| CaptureError::Header(format!("`{key}` is not a number: `{v}`")))
            };
            match key.trim() {
                "format" => format = Some(value.parse::<CaptureFormat>().map_err(CaptureError::Header)?),
                "links" => links = Some(num(value)?),
                "lanes" => lanes = Some(num(value)?),
                "seed" => seed = Some(num(value)?),
                "config" => setup = Some(parse_config(value)?),
                other => return Err(CaptureError::Header(format!("unknown key `{other}`"))),
            }
            lines.next();
        }
        let missing = |k: &str| CaptureError::Header(format!("missing `{k}`"));
        let format = format.ok_or_else(|| missing("format"))?;
        let setup = setup.ok_or_else(|| missing("config"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;
        let cfg = setup.link;
        if links != Some(u64::from(cfg.links)) || lanes != Some(u64::from(cfg.lanes)) {
            return Err(CaptureError::Header(format!(
                "links/lanes {links:?}/{lanes:?} disagree with the config ({}/{})",
                cfg.links, cfg.lanes
            )));
        }
        let (nl, nk) = (cfg.lanes as usize, cfg.links as usize);
        let body: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
        let rows = body.len() / (nl * nk);
        let body = &body[..rows * nl * nk];
        let line_err = |i: usize, message: String| CaptureError::Line { line: i + 1, message };
        let data = match format {
            CaptureFormat::Symbol10 => {
                let mut v = vec![vec![Vec::with_capacity(rows); nl]; nk];
                for (j, &(i, l)) in body.iter().enumerate() {
                    let s = parse_symbol(l.trim()).map_err(|m| line_err(i, m))?;
                    v[j / nl % nk][j % nl].push(s);
                }
                CaptureData::Symbol10(v)
            }
            CaptureFormat::OctetFlag => {
                let mut v = vec![vec![Vec::with_capacity(rows); nl]; nk];
                for (j, &(i, l)) in body.iter().enumerate() {
                    let c = parse_char(l.trim()).map_err(|m| line_err(i, m))?;
                    v[j / nl % nk][j % nl].push(c);
                }
                CaptureData::OctetFlag(v)
            }
        };
        Ok(CaptureFile { setup, seed, data })
    }

    /// Decoded characters per link and lane. Symbol captures go through bit
    /// alignment and a fresh decoder per lane.
    pub fn chars(&self) -> Result<(LaneStreams<Char>, Vec<Vec<usize>>), CaptureError> {
        match &self.data {
            CaptureData::OctetFlag(v) => {
                let offsets = v.iter().map(|k| vec![0; k.len()]).collect();
                Ok((v.clone(), offsets))
            }
            CaptureData::Symbol10(v) => {
                let mut chars = Vec::new();
                let mut offsets = Vec::new();
                for (link, lanes) in v.iter().enumerate() {
                    let mut lc = Vec::new();
                    let mut lo = Vec::new();
                    for (lane, symbols) in lanes.iter().enumerate() {
                        let bits = serialize(symbols);
                        let (offset, grid) = bit_align(&bits, symbols.len())
                            .map_err(|_| CaptureError::NoComma { link, lane, bits: bits.len() })?;
                        let mut dec = Decoder::new();
                        lc.push(grid.into_iter().map(|s| dec.decode(s)).collect());
                        lo.push(offset);
                    }
                    chars.push(lc);
                    offsets.push(lo);
                }
                Ok((chars, offsets))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub replay: ReplayOutcome,
    /// Bit offset of the symbol grid per link and lane.
    pub bit_offsets: Vec<Vec<usize>>,
}

/// Runs fresh receivers over a capture as if it were arriving live.
pub fn decode_capture(capture: &CaptureFile) -> Result<DecodeOutcome, CaptureError> {
    let (chars, bit_offsets) = capture.chars()?;
    let replay = replay(&capture.setup, &chars)?;
    if replay.report.links.iter().any(|l| l.valid_cycles == 0) {
        return Err(CaptureError::NoSyncAchieved {
            cycles: replay.report.cycles,
        });
    }
    Ok(DecodeOutcome { replay, bit_offsets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LinkConfig;

    fn tiny(format: CaptureFormat) -> CaptureFile {
        let setup = SimSetup::new(LinkConfig::new(2, 4, 8));
        let data = match format {
            CaptureFormat::Symbol10 => CaptureData::Symbol10(vec![vec![
                vec![Symbol10(0b0011111010), Symbol10(0)],
                vec![Symbol10(0b1100000101), Symbol10(0x3ff)],
            ]]),
            CaptureFormat::OctetFlag => CaptureData::OctetFlag(vec![vec![
                vec![Char::K28_5, Char::INVALID],
                vec![
                    Char::data(0x5a),
                    Char {
                        disparity_error: true,
                        not_in_table: true,
                        ..Char::K28_0
                    },
                ],
            ]]),
        };
        CaptureFile { setup, seed: 9, data }
    }

    #[test]
    fn text_round_trip() {
        for f in [CaptureFormat::Symbol10, CaptureFormat::OctetFlag] {
            let c = tiny(f);
            let text = c.to_text();
            assert_eq!(CaptureFile::parse(&text).unwrap(), c);
        }
    }

    #[test]
    fn octet_flag_lines() {
        let text = tiny(CaptureFormat::OctetFlag).to_text();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["bc K", "5a D", "00 D n", "1c K nd"]);
        assert_eq!(parse_char("1c K dn").unwrap(), parse_char("1c K nd").unwrap());
        assert!(parse_char("1c X").is_err());
        assert!(parse_char("1c K x").is_err());
        assert!(parse_char("1c K nn").is_err());
        assert!(parse_char("1 K").is_err());
    }

    #[test]
    fn symbol_lines_in_transmission_order() {
        let text = tiny(CaptureFormat::Symbol10).to_text();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["0011111010", "1100000101", "0000000000", "1111111111"]);
        assert!(parse_symbol("001111101").is_err());
        assert!(parse_symbol("00111110102").is_err());
    }

    #[test]
    fn partial_row_dropped() {
        let mut text = tiny(CaptureFormat::Symbol10).to_text();
        text.push_str("0011111010\n");
        let c = CaptureFile::parse(&text).unwrap();
        assert_eq!(c.data.symbols(), 2);
    }

    #[test]
    fn header_checks() {
        assert_eq!(CaptureFile::parse("0011111010\n"), Err(CaptureError::NotACapture));
        let text = tiny(CaptureFormat::Symbol10).to_text().replace("# lanes: 2", "# lanes: 3");
        assert!(matches!(CaptureFile::parse(&text), Err(CaptureError::Header(_))));
        let text = tiny(CaptureFormat::Symbol10).to_text().replace("\"F\":4", "\"F\":3");
        assert!(matches!(CaptureFile::parse(&text), Err(CaptureError::Config(_))));
        let text = tiny(CaptureFormat::Symbol10).to_text().replace("1100000101", "11000001x1");
        assert!(matches!(CaptureFile::parse(&text), Err(CaptureError::Line { line: 8, .. })));
    }
}
