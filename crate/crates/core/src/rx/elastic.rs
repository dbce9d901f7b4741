//! Per-lane elastic buffer: a circular FIFO of 32-bit lane words.

use crate::config::OCTETS_PER_CYCLE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum BufferError {
    #[error("elastic buffer overflow")]
    Overflow,
    #[error("elastic buffer underflow")]
    Underflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneBuffer {
    store: Vec<u32>,
    write: usize,
    read: usize,
    fill: usize,
}

impl LaneBuffer {
    /// Capacity in octets, rounded down to whole words.
    pub fn new(depth_octets: u32) -> Self {
        let words = (depth_octets / OCTETS_PER_CYCLE).max(1) as usize;
        LaneBuffer {
            store: vec![0; words],
            write: 0,
            read: 0,
            fill: 0,
        }
    }

    pub fn capacity_octets(&self) -> u32 {
        self.store.len() as u32 * OCTETS_PER_CYCLE
    }

    pub fn fill_words(&self) -> usize {
        self.fill
    }

    pub fn fill_octets(&self) -> u32 {
        self.fill as u32 * OCTETS_PER_CYCLE
    }

    pub fn is_empty(&self) -> bool {
        self.fill == 0
    }

    pub fn push(&mut self, word: u32) -> Result<(), BufferError> {
        if self.fill == self.store.len() {
            return Err(BufferError::Overflow);
        }
        self.store[self.write] = word;
        self.write = (self.write + 1) % self.store.len();
        self.fill += 1;
        Ok(())
    }

    pub fn pop(&mut self) -> Result<u32, BufferError> {
        if self.fill == 0 {
            return Err(BufferError::Underflow);
        }
        let w = self.store[self.read];
        self.read = (self.read + 1) % self.store.len();
        self.fill -= 1;
        Ok(w)
    }

    pub fn clear(&mut self) {
        self.write = 0;
        self.read = 0;
        self.fill = 0;
    }
}
