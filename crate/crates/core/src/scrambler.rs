//! Self-synchronizing scrambler, `1 + x^14 + x^15`.
//!
//! Each output bit is `in[n] ^ s[n-14] ^ s[n-15]` where `s` is the scrambled
//! sequence: the scrambler feeds back its own output, the descrambler feeds
//! forward what it received. The register taps sit at indices 13 and 14 of
//! a 15-stage history, which is where the `x^14 + x^13 + 1` form of the
//! polynomial comes from.
//!
//! Bits are processed MSB-first within each octet, earliest octet first. A
//! 32-bit word packs four octets big-endian, so bit 31 is the oldest.

/// Stages of the shift register.
pub const STATE_BITS: u32 = 15;
const STATE_MASK: u32 = (1 << STATE_BITS) - 1;

/// The last 15 scrambled bits; bit 0 is the most recent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScramblerState(u16);

impl Default for ScramblerState {
    /// All ones, the value both ends load at data-phase entry.
    fn default() -> Self {
        ScramblerState(STATE_MASK as u16)
    }
}

impl ScramblerState {
    pub fn new(bits: u16) -> Self {
        ScramblerState(bits & STATE_MASK as u16)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    #[inline]
    fn feedback(self) -> bool {
        (self.0 >> 13 ^ self.0 >> 14) & 1 != 0
    }

    #[inline]
    fn push(&mut self, bit: bool) {
        self.0 = ((self.0 << 1) | u16::from(bit)) & STATE_MASK as u16;
    }
}

/// Bit-serial scrambler.
pub fn scramble_serial(state: &mut ScramblerState, data: &[bool]) -> Vec<bool> {
    data.iter()
        .map(|&d| {
            let out = d ^ state.feedback();
            state.push(out);
            out
        })
        .collect()
}

/// Bit-serial descrambler.
pub fn descramble_serial(state: &mut ScramblerState, scrambled: &[bool]) -> Vec<bool> {
    scrambled
        .iter()
        .map(|&s| {
            let out = s ^ state.feedback();
            state.push(s);
            out
        })
        .collect()
}

/// Packs four octets into a word, octet 0 in the top byte.
pub fn pack_word(octets: [u8; 4]) -> u32 {
    u32::from_be_bytes(octets)
}

pub fn unpack_word(word: u32) -> [u8; 4] {
    word.to_be_bytes()
}

/// Word-parallel descrambler, equal to 32 serial steps.
#[inline]
pub fn descramble_word32(state: &mut ScramblerState, word: u32) -> u32 {
    // history above the word: bit p+14 of `line` is 14 bits earlier than bit p
    let line = u64::from(state.0) << 32 | u64::from(word);
    let out = word ^ (line >> 14) as u32 ^ (line >> 15) as u32;
    state.0 = (word & STATE_MASK) as u16;
    out
}

/// Word-parallel scrambler, equal to 32 serial steps.
#[inline]
pub fn scramble_word32(state: &mut ScramblerState, word: u32) -> u32 {
    // The recurrence reaches back at least 14 bits, so each pass fixes 14
    // more output bits from the top; three passes cover all 32.
    let history = u64::from(state.0) << 32;
    let mut out = word;
    for _ in 0..3 {
        let line = history | u64::from(out);
        out = word ^ (line >> 14) as u32 ^ (line >> 15) as u32;
    }
    state.0 = (out & STATE_MASK) as u16;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference built directly on the recurrence over an explicit history
    /// vector, independent of `ScramblerState`.
    fn oracle(history: &[bool], input: &[bool], scramble: bool) -> Vec<bool> {
        let mut line: Vec<bool> = history.to_vec();
        let base = line.len();
        let mut out = Vec::new();
        for (i, &b) in input.iter().enumerate() {
            let n = base + i;
            let o = b ^ line[n - 14] ^ line[n - 15];
            line.push(if scramble { o } else { b });
            out.push(o);
        }
        out
    }

    /// The state as a history vector, oldest first.
    fn history_of(state: ScramblerState) -> Vec<bool> {
        (0..15).rev().map(|i| state.0 >> i & 1 != 0).collect()
    }

    fn word_bits(w: u32) -> Vec<bool> {
        (0..32).rev().map(|i| w >> i & 1 != 0).collect()
    }

    fn bits_word(b: &[bool]) -> u32 {
        b.iter().fold(0, |acc, &x| acc << 1 | u32::from(x))
    }

    #[test]
    fn zero_fixed_point() {
        let mut s = ScramblerState::new(0);
        assert!(scramble_serial(&mut s, &[false; 64]).iter().all(|&b| !b));
        let mut s = ScramblerState::new(0);
        assert!(descramble_serial(&mut s, &[false; 64]).iter().all(|&b| !b));
        let mut s = ScramblerState::new(0);
        assert_eq!(descramble_word32(&mut s, 0), 0);
        assert_eq!(scramble_word32(&mut s, 0), 0);
    }

    #[test]
    fn impulse_response() {
        let mut input = vec![false; 64];
        input[0] = true;
        let mut s = ScramblerState::new(0);
        let out = scramble_serial(&mut s, &input);
        let expected = oracle(&[false; 15], &input, true);
        assert_eq!(out, expected);
        let ones: Vec<usize> = out.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        assert_eq!(&ones[..4], &[0, 14, 15, 28]);
    }

    #[test]
    fn serial_matches_recurrence() {
        let input: Vec<bool> = (0..200).map(|i| (i * 7 + i / 3) % 5 < 2).collect();
        let start = ScramblerState::new(0x5a3c);
        let mut s = start;
        assert_eq!(scramble_serial(&mut s, &input), oracle(&history_of(start), &input, true));
        let mut s = start;
        assert_eq!(
            descramble_serial(&mut s, &input),
            oracle(&history_of(start), &input, false)
        );
    }

    #[test]
    fn descramblers_converge() {
        let input: Vec<bool> = (0..100).map(|i| (i * 13) % 7 < 3).collect();
        let mut a = ScramblerState::new(0);
        let mut b = ScramblerState::new(0x7fff);
        let oa = descramble_serial(&mut a, &input);
        let ob = descramble_serial(&mut b, &input);
        assert_eq!(oa[15..], ob[15..]);
        assert_eq!(a, b);
    }

    #[test]
    fn single_flip_corrupts_three_bits() {
        let data: Vec<bool> = (0..96).map(|i| (i * 5) % 3 == 0).collect();
        let mut tx = ScramblerState::default();
        let mut line = scramble_serial(&mut tx, &data);
        line[40] = !line[40];
        let mut rx = ScramblerState::default();
        let out = descramble_serial(&mut rx, &line);
        let wrong: Vec<usize> = (0..96).filter(|&i| out[i] != data[i]).collect();
        assert_eq!(wrong, vec![40, 54, 55]);
    }

    #[test]
    fn exhaustive_state_sweep_on_fixed_word() {
        let word = 0xdead_beef;
        for bits in 0..(1u16 << STATE_BITS) {
            let start = ScramblerState::new(bits);
            let mut serial = start;
            let expect = bits_word(&descramble_serial(&mut serial, &word_bits(word)));
            let mut par = start;
            assert_eq!(descramble_word32(&mut par, word), expect);
            assert_eq!(par, serial);

            let mut serial = start;
            let expect = bits_word(&scramble_serial(&mut serial, &word_bits(word)));
            let mut par = start;
            assert_eq!(scramble_word32(&mut par, word), expect);
            assert_eq!(par, serial);
        }
    }

    proptest! {
        #[test]
        fn parallel_equals_serial(bits in 0u16..0x8000, word in any::<u32>()) {
            let start = ScramblerState::new(bits);
            let mut serial = start;
            let expect = bits_word(&descramble_serial(&mut serial, &word_bits(word)));
            let mut par = start;
            prop_assert_eq!(descramble_word32(&mut par, word), expect);
            prop_assert_eq!(par, serial);
        }

        #[test]
        fn round_trip_from_any_states(tx in 0u16..0x8000, rx in 0u16..0x8000, data in proptest::collection::vec(any::<bool>(), 64)) {
            let mut t = ScramblerState::new(tx);
            let line = scramble_serial(&mut t, &data);
            let mut r = ScramblerState::new(rx);
            let back = descramble_serial(&mut r, &line);
            prop_assert_eq!(&back[15..], &data[15..]);
            if tx == rx {
                prop_assert_eq!(back, data);
            }
        }
    }
}
