//! Acceptance criteria 1-8. Each test prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use jesd204b::codec::{decode_symbol, encode_char, Char, RunningDisparity, LINK_CONTROL_CODES};
use jesd204b::config::LinkConfig;
use jesd204b::payload::PayloadSpec;
use jesd204b::scrambler::{descramble_word32, ScramblerState};
use jesd204b::sim::{measure_latency_determinism, run_simulation, Burst, Collect, SimSetup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = fn(bool) -> Result<String, String>;

fn verdict(n: u32, name: &str, result: Result<String, String>) {
    match &result {
        Ok(detail) => println!("criterion {n} [{name}]: PASS ({detail})"),
        Err(detail) => println!("criterion {n} [{name}]: FAIL ({detail})"),
    }
    if let Err(e) = result {
        panic!("criterion {n} failed: {e}");
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    if t < limit {
        Ok(t)
    } else {
        Err(format!("took {t:?}, limit {limit:?}"))
    }
}

fn hardware(scrambling: bool) -> LinkConfig {
    LinkConfig::new(2, 4, 32).with_scrambling(scrambling)
}

// 1 ---------------------------------------------------------------------

fn codec_check() -> Result<String, String> {
    let start = Instant::now();
    let mut cases = 0;
    for rd in [RunningDisparity::Negative, RunningDisparity::Positive] {
        let chars = (0..=255u8)
            .map(Char::data)
            .chain(LINK_CONTROL_CODES.iter().map(|&k| Char::control(k)));
        for c in chars {
            let (sym, rd_out) = encode_char(c, rd).map_err(|e| e.to_string())?;
            let (back, rd_dec) = decode_symbol(sym, rd);
            if back != c || rd_dec != rd_out {
                return Err(format!("{c} at {rd:?} decoded to {back}"));
            }
            cases += 1;
        }
    }
    if cases != 2 * (256 + 5) {
        return Err(format!("{cases} cases"));
    }

    // cumulative disparity counted independently from the code bits
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rd = RunningDisparity::Negative;
    let mut cum: i64 = -1;
    for i in 0..1_000_000u32 {
        let c = if i % 97 == 0 {
            Char::control(LINK_CONTROL_CODES[rng.random_range(0..5)])
        } else {
            Char::data(rng.random())
        };
        let (sym, next) = encode_char(c, rd).map_err(|e| e.to_string())?;
        let ones = i64::from(sym.0.count_ones());
        cum += ones - (10 - ones);
        if cum != -1 && cum != 1 {
            return Err(format!("cumulative disparity {cum} after {i} octets"));
        }
        rd = next;
    }
    let t = within(Duration::from_secs(5), start)?;
    Ok(format!("{cases} round trips, 1e6 octets disparity bounded, {t:.2?}"))
}

#[test]
fn criterion_1_codec() {
    verdict(1, "codec correctness", codec_check());
}

// 2 ---------------------------------------------------------------------

/// Bit-serial descrambler on an explicit history vector, oldest first.
fn serial_oracle(state: u16, word: u32) -> (u32, u16) {
    let mut hist: Vec<bool> = (0..15).rev().map(|i| state >> i & 1 != 0).collect();
    let mut out = 0u32;
    for k in (0..32).rev() {
        let b = word >> k & 1 != 0;
        let n = hist.len();
        let o = b ^ hist[n - 14] ^ hist[n - 15];
        hist.push(b);
        out = out << 1 | u32::from(o);
    }
    let n = hist.len();
    let next = hist[n - 15..].iter().fold(0u16, |a, &b| a << 1 | u16::from(b));
    (out, next)
}

fn scrambler_check() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100_000 {
        let state: u16 = rng.random_range(0..0x8000);
        let word: u32 = rng.random();
        let mut s = ScramblerState::new(state);
        let got = descramble_word32(&mut s, word);
        let (want, next) = serial_oracle(state, word);
        if got != want || s.bits() != next {
            return Err(format!("state {state:#06x} word {word:#010x}"));
        }
    }
    let word = 0x1234_abcd;
    let states = 1u32 << 15;
    for state in 0..states as u16 {
        let mut s = ScramblerState::new(state);
        let got = descramble_word32(&mut s, word);
        if (got, s.bits()) != serial_oracle(state, word) {
            return Err(format!("sweep state {state:#06x}"));
        }
    }
    let t = within(Duration::from_secs(10), start)?;
    Ok(format!("1e5 random pairs, {states}-state sweep, {t:.2?}"))
}

#[test]
fn criterion_2_scrambler() {
    verdict(2, "scrambler equivalence", scrambler_check());
}

// 3 ---------------------------------------------------------------------

const LONG_RUN_CYCLES: u64 = 10_000_000;

fn exactness_check(scrambling: bool) -> Result<String, String> {
    let start = Instant::now();
    let mut setup = SimSetup::new(hardware(scrambling));
    setup.payload = PayloadSpec::Random { seed: 3 };
    setup.run.cycles = LONG_RUN_CYCLES;
    let r = run_simulation(&setup, Collect::default()).map_err(|e| e.to_string())?.report;
    if r.cycles < LONG_RUN_CYCLES {
        return Err(format!("ran {} cycles", r.cycles));
    }
    if r.compared_octets < 1_000_000 {
        return Err(format!("only {} octets compared", r.compared_octets));
    }
    if !r.payload_match || r.mismatched_octets != 0 {
        return Err(format!("{} mismatched octets", r.mismatched_octets));
    }
    if r.resync_count != 0 {
        return Err(format!("{} resyncs", r.resync_count));
    }
    let t = within(Duration::from_secs(120), start)?;
    Ok(format!(
        "scrambling={scrambling}, {} cycles, {} octets exact, 0 resyncs, {t:.1?}",
        r.cycles, r.compared_octets
    ))
}

#[test]
fn criterion_3_end_to_end_exactness() {
    verdict(3, "end-to-end exactness", exactness_check(true));
}

// 4 ---------------------------------------------------------------------

fn latency_check(scrambling: bool) -> Result<String, String> {
    let cfg = hardware(scrambling);
    let fk = cfg.multiframe_octets();
    let mut base = SimSetup::new(cfg);
    base.payload = PayloadSpec::Random { seed: 4 };
    base.run.cycles = 4000;
    let v = measure_latency_determinism(&base, 24, fk / 2, 40);
    if !v.pass {
        return Err(format!("latencies {:?}", v.latencies));
    }
    if v.trials.iter().any(|t| !t.payload_match) {
        return Err("payload mismatch in a trial".into());
    }
    // negative control: receiver SYSREF shifted by three quarters of a multiframe
    let mut shifted = base.clone();
    shifted.sysref.rx_delay_cycles = u64::from(3 * cfg.multiframe_cycles() / 4);
    let n = measure_latency_determinism(&shifted, 24, fk / 2, 41);
    if !n.pass || n.latencies == v.latencies {
        return Err(format!("control latencies {:?} vs {:?}", n.latencies, v.latencies));
    }
    Ok(format!(
        "scrambling={scrambling}, 24 trials at {} octets, shifted SYSREF gives {} octets",
        v.latencies[0], n.latencies[0]
    ))
}

#[test]
fn criterion_4_deterministic_latency() {
    verdict(4, "deterministic latency", latency_check(true));
}

// 5 ---------------------------------------------------------------------

fn sync_time_check(scrambling: bool) -> Result<String, String> {
    let cfg = hardware(scrambling);
    let fk = u64::from(cfg.multiframe_octets());
    let bound = 4 * fk + 2 * fk;
    let results: Vec<Result<u64, String>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let mut setup = SimSetup::new(cfg);
            setup.payload = PayloadSpec::Random { seed };
            setup.channel.skew = (0..cfg.lanes).map(|_| rng.random_range(0..=fk as u32 / 2)).collect();
            setup.sysref.first_edge_cycle = rng.random_range(0..64);
            setup.run.phy_ready_cycle = rng.random_range(0..32);
            setup.run.cycles = 3000;
            setup.run.stop_after_valid = Some(64);
            let r = run_simulation(&setup, Collect::default()).map_err(|e| e.to_string())?.report;
            let octets = r.links[0]
                .sync_octets_from_sync_deassert
                .ok_or(format!("seed {seed} never synced"))?;
            if octets > bound {
                return Err(format!("seed {seed}: {octets} octets > {bound}"));
            }
            if !r.payload_match {
                return Err(format!("seed {seed}: payload mismatch"));
            }
            Ok(octets)
        })
        .collect();
    let octets: Vec<u64> = results.into_iter().collect::<Result<_, _>>()?;
    let worst = octets.iter().max().copied().unwrap_or(0);
    Ok(format!(
        "scrambling={scrambling}, 100 seeds, worst {worst} octets ({:.1} frames), bound {bound}",
        worst as f64 / f64::from(cfg.octets_per_frame)
    ))
}

#[test]
fn criterion_5_sync_time_bound() {
    verdict(5, "sync-time bound", sync_time_check(true));
}

// 6 ---------------------------------------------------------------------

fn random_config(rng: &mut impl Rng, scrambling: bool) -> LinkConfig {
    loop {
        let l = [1, 2, 3, 4][rng.random_range(0..4)];
        let f = [4, 8, 12, 16, 32][rng.random_range(0..5)];
        let k = rng.random_range(1..=32);
        let cfg = LinkConfig::new(l, f, k).with_scrambling(scrambling);
        if cfg.validate().is_ok() {
            return cfg;
        }
    }
}

fn pipeline_check(scrambling: bool) -> Result<String, String> {
    let results: Vec<Result<(String, u64), String>> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
            let cfg = random_config(&mut rng, scrambling);
            let fk = cfg.multiframe_octets();
            let mut setup = SimSetup::new(cfg);
            setup.payload = PayloadSpec::Random { seed };
            setup.channel.skew = (0..cfg.lanes).map(|_| rng.random_range(0..=fk / 2)).collect();
            setup.sysref.first_edge_cycle = rng.random_range(0..64);
            setup.run.cycles = 20 * u64::from(cfg.multiframe_cycles()) + 2000;
            setup.run.stop_after_valid = Some(16);
            let r = run_simulation(&setup, Collect::default()).map_err(|e| e.to_string())?.report;
            let d = r
                .pipeline_delay_cycles
                .ok_or(format!("seed {seed} L{} F{} K{} never released", cfg.lanes, cfg.octets_per_frame, cfg.frames_per_multiframe))?;
            if !r.payload_match {
                return Err(format!("seed {seed}: payload mismatch"));
            }
            Ok((format!("L{}F{}K{}", cfg.lanes, cfg.octets_per_frame, cfg.frames_per_multiframe), d))
        })
        .collect();
    let runs: Vec<(String, u64)> = results.into_iter().collect::<Result<_, _>>()?;
    let mut delays: Vec<u64> = runs.iter().map(|r| r.1).collect();
    delays.sort_unstable();
    delays.dedup();
    let mut configs: Vec<&str> = runs.iter().map(|r| r.0.as_str()).collect();
    configs.sort_unstable();
    configs.dedup();
    if delays.len() != 1 {
        return Err(format!("pipeline delays {delays:?}"));
    }
    Ok(format!(
        "scrambling={scrambling}, 50 runs over {} configurations, delay {} cycles",
        configs.len(),
        delays[0]
    ))
}

#[test]
fn criterion_6_startup_latency_constancy() {
    verdict(6, "startup-latency constancy", pipeline_check(true));
}

// 7 ---------------------------------------------------------------------

fn recovery_check(scrambling: bool) -> Result<String, String> {
    let cfg = hardware(scrambling);
    let results: Vec<Result<u64, String>> = (0..25u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
            let mut setup = SimSetup::new(cfg);
            setup.payload = PayloadSpec::Random { seed };
            setup.channel.skew = (0..cfg.lanes).map(|_| rng.random_range(0..=16)).collect();
            // a burst well above the error threshold, in the data phase
            let length = rng.random_range(2 * cfg.error_threshold..=4 * cfg.error_threshold);
            setup.channel.bursts.push(Burst {
                link: 0,
                lane: rng.random_range(0..cfg.lanes),
                symbol: 4 * rng.random_range(1000..2000),
                length,
            });
            setup.run.cycles = 5000;
            let r = run_simulation(&setup, Collect::default()).map_err(|e| e.to_string())?.report;
            if r.resync_count != 1 {
                return Err(format!("seed {seed}: {} resyncs", r.resync_count));
            }
            if r.links[0].final_state != "SYNCED" {
                return Err(format!("seed {seed}: ended in {}", r.links[0].final_state));
            }
            if !r.final_payload_match {
                return Err(format!(
                    "seed {seed}: {} of {} post-resync octets wrong",
                    r.links[0].final_mismatched_octets, r.links[0].final_compared_octets
                ));
            }
            Ok(r.links[0].final_compared_octets)
        })
        .collect();
    let octets: Vec<u64> = results.into_iter().collect::<Result<_, _>>()?;
    Ok(format!(
        "scrambling={scrambling}, 25 seeds, one resync each, {} post-resync octets exact",
        octets.iter().sum::<u64>()
    ))
}

#[test]
fn criterion_7_fault_recovery() {
    verdict(7, "fault recovery", recovery_check(true));
}

// 8 ---------------------------------------------------------------------

#[test]
fn criterion_8_scrambling_toggle() {
    let mut failures = Vec::new();
    let mut passed = Vec::new();
    for scrambling in [false, true] {
        let checks: [(u32, Check); 5] = [
            (3, exactness_check),
            (4, latency_check),
            (5, sync_time_check),
            (6, pipeline_check),
            (7, recovery_check),
        ];
        for (n, check) in checks {
            match check(scrambling) {
                Ok(_) => passed.push(format!("{n}/{}", if scrambling { "on" } else { "off" })),
                Err(e) => failures.push(format!("criterion {n} scrambling={scrambling}: {e}")),
            }
        }
    }
    let result = if failures.is_empty() {
        Ok(format!("criteria 3-7 pass with scrambling off and on: {}", passed.join(" ")))
    } else {
        Err(failures.join("; "))
    };
    verdict(8, "scrambling toggle", result);
}
