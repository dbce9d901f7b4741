//! Sample tables as CSV.
//!
//! Columns are fixed: `sample_index,channel,value`. With M = L*F/2 channels
//! per link, received sample i of link k lands on channel k*M + i%M at index
//! i/M. Rows are ordered by index, then channel. Values are unsigned 16-bit
//! words as carried on the lanes.

use std::fmt::Write as _;

use crate::config::LinkConfig;
use crate::payload::channels_per_link;

pub const CSV_HEADER: &str = "sample_index,channel,value";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleTable {
    pub channels: u32,
    /// Per channel; all the same length.
    pub columns: Vec<Vec<u16>>,
}

impl SampleTable {
    /// Builds a dense table from per-link sample streams. Trailing samples
    /// that do not fill a whole row on every link are dropped.
    pub fn from_links(cfg: &LinkConfig, links: &[Vec<u16>]) -> SampleTable {
        let m = channels_per_link(cfg) as usize;
        let rows = links.iter().map(|s| s.len() / m).min().unwrap_or(0);
        let mut columns = Vec::with_capacity(m * links.len());
        for s in links {
            for ch in 0..m {
                columns.push((0..rows).map(|r| s[r * m + ch]).collect());
            }
        }
        SampleTable {
            channels: columns.len() as u32,
            columns,
        }
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * self.rows() * self.columns.len() + 32);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in 0..self.rows() {
            for (ch, col) in self.columns.iter().enumerate() {
                let _ = writeln!(out, "{r},{ch},{}", col[r]);
            }
        }
        out
    }

    /// Reads a table written by [`SampleTable::to_csv`]; rows must be dense
    /// and in order.
    pub fn from_csv(text: &str) -> Result<SampleTable, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(format!("expected header `{CSV_HEADER}`"));
        }
        let mut cells = Vec::new();
        for (i, l) in lines.enumerate() {
            let f: Vec<&str> = l.trim().split(',').collect();
            let parsed = match f.as_slice() {
                [a, b, c] => a
                    .parse::<usize>()
                    .ok()
                    .zip(b.parse::<usize>().ok())
                    .zip(c.parse::<u16>().ok())
                    .map(|((a, b), c)| (a, b, c)),
                _ => None,
            };
            cells.push(parsed.ok_or_else(|| format!("line {}: malformed row `{l}`", i + 2))?);
        }
        let channels = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        let mut columns = vec![Vec::new(); channels];
        for (j, &(idx, ch, v)) in cells.iter().enumerate() {
            if idx != j / channels || ch != j % channels {
                return Err(format!("line {}: row out of order", j + 2));
            }
            columns[ch].push(v);
        }
        if columns.iter().any(|c| c.len() != columns[0].len()) {
            return Err("incomplete last row".into());
        }
        Ok(SampleTable {
            channels: channels as u32,
            columns,
        })
    }
}
