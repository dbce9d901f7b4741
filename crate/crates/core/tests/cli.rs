use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jesd204b::io::SampleTable;
use jesd204b::payload::{sine_sample, PayloadGen, PayloadSpec};

struct Dir(PathBuf);

impl Dir {
    fn new(name: &str) -> Dir {
        let p = std::env::temp_dir().join(format!("jesd204b-cli-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&p);
        fs::create_dir_all(&p).unwrap();
        Dir(p)
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for Dir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jesd204b")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const HW: &str = r#"{"L":2,"F":4,"K":32,"scrambling":true,"run":{"cycles":2500}}"#;

#[test]
fn simulate_clean_run() {
    let d = Dir::new("clean");
    let cfg = d.file("c.json", HW);
    let report = d.path("r.json");
    let samples = d.path("s.csv");
    let o = cli(&["simulate", "--config", s(&cfg), "--report", s(&report), "--dump-samples", s(&samples)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("effective config"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["payload_match"], true);
    assert_eq!(r["resync_count"], 0);
    let table = SampleTable::from_csv(&fs::read_to_string(&samples).unwrap()).unwrap();
    assert_eq!(table.channels, 4);
    assert!(table.rows() > 100);
}

#[test]
fn simulate_overflow_exits_one() {
    let d = Dir::new("overflow");
    let cfg = d.file("c.json", r#"{"L":2,"F":4,"K":32,"channel":{"skew":[0,400]},"run":{"cycles":2000}}"#);
    let o = cli(&["simulate", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["error_counts"]["buffer_overflow"].as_u64().unwrap() > 0);
    assert!(stderr(&o).contains("buffer_overflow"));
}

#[test]
fn same_seed_same_files() {
    let d = Dir::new("determinism");
    let cfg = d.file(
        "c.json",
        r#"{"L":2,"F":4,"K":32,"channel":{"bit_error_rate":1e-5},"run":{"cycles":3000,"max_resyncs":5}}"#,
    );
    let mut reports = Vec::new();
    let mut logs = Vec::new();
    let mut captures = Vec::new();
    for i in 0..2 {
        let (r, e, c) = (d.path(&format!("r{i}")), d.path(&format!("e{i}")), d.path(&format!("c{i}")));
        cli(&["simulate", "--config", s(&cfg), "--seed", "9", "--report", s(&r), "--event-log", s(&e)]);
        let o = cli(&["gen", "--config", s(&cfg), "--seed", "9", "--output", s(&c)]);
        assert_eq!(code(&o), 0);
        reports.push(fs::read(r).unwrap());
        logs.push(fs::read(e).unwrap());
        captures.push(fs::read(c).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(logs[0], logs[1]);
    assert_eq!(captures[0], captures[1]);
    assert!(!logs[0].is_empty());
}

#[test]
fn config_errors_exit_two() {
    let d = Dir::new("config");
    let unknown = d.file("u.json", r#"{"L":2,"F":4,"K":32,"buffer_dept":64}"#);
    let o = cli(&["simulate", "--config", s(&unknown)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("buffer_dept"));

    let bad_f = d.file("f.json", r#"{"L":2,"F":3,"K":32}"#);
    let o = cli(&["simulate", "--config", s(&bad_f)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("F-multiple-of-4"));

    let wide = d.file("l.json", r#"{"L":5,"F":4,"K":32}"#);
    assert_eq!(code(&cli(&["gen", "--config", s(&wide)])), 2);

    assert_eq!(code(&cli(&["simulate", "--config", s(&d.path("missing.json"))])), 2);
    assert_eq!(code(&cli(&["simulate"])), 2);
    assert_eq!(code(&cli(&["gen", "--config", s(&unknown), "--format", "hex"])), 2);
}

fn gen_decode(d: &Dir, config: &str, format: &str) -> (Output, PathBuf, PathBuf) {
    let cfg = d.file(&format!("{format}.json"), config);
    let cap = d.path(&format!("{format}.cap"));
    let o = cli(&["gen", "--config", s(&cfg), "--format", format, "--output", s(&cap)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = d.path(&format!("{format}.csv"));
    let report = d.path(&format!("{format}.report.json"));
    let o = cli(&["decode", s(&cap), "--output", s(&csv), "--report", s(&report)]);
    (o, csv, report)
}

fn assert_matches_generator(csv: &Path, payload: &PayloadSpec, channels: u32) {
    let t = SampleTable::from_csv(&fs::read_to_string(csv).unwrap()).unwrap();
    assert_eq!(t.channels, channels);
    assert!(t.rows() > 100);
    let mut g = PayloadGen::new(payload, channels);
    for r in 0..t.rows() {
        for ch in 0..channels as usize {
            assert_eq!(t.columns[ch][r], g.next_sample(), "row {r} channel {ch}");
        }
    }
}

#[test]
fn gen_then_decode_round_trips() {
    let d = Dir::new("roundtrip");
    for format in ["symbol10", "octet-flag"] {
        let (o, csv, report) = gen_decode(&d, HW, format);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_matches_generator(&csv, &PayloadSpec::default(), 4);
        let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
        assert_eq!(r["reference_match"], true);
    }
}

#[test]
fn gen_with_skew_still_decodes() {
    let d = Dir::new("skew");
    let cfg = r#"{"L":4,"F":8,"K":16,"scrambling":true,"channel":{"skew":[0,17,63,5]},
        "payload":{"kind":"ramp","start":100},"run":{"cycles":3000}}"#;
    let (o, csv, _) = gen_decode(&d, cfg, "symbol10");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_matches_generator(&csv, &PayloadSpec::Ramp { start: 100 }, 16);
}

#[test]
fn truncated_capture_has_no_sync() {
    let d = Dir::new("truncated");
    let cfg = d.file("c.json", HW);
    let cap = d.path("c.cap");
    cli(&["gen", "--config", s(&cfg), "--output", s(&cap)]);
    let text = fs::read_to_string(&cap).unwrap();
    // keep the header and 150 symbols per lane: CGS and part of the ILAS
    let cut: Vec<&str> = text.lines().take(6 + 2 * 150).collect();
    let short = d.file("short.cap", &(cut.join("\n") + "\n"));
    let o = cli(&["decode", s(&short)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no synchronization"), "{}", stderr(&o));
}

#[test]
fn sine_capture_decodes_to_sine_table() {
    let d = Dir::new("sine");
    let cfg = r#"{"L":2,"F":4,"K":32,"scrambling":true,"payload":{"kind":"sine"},"run":{"cycles":2500}}"#;
    let (o, csv, _) = gen_decode(&d, cfg, "symbol10");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = SampleTable::from_csv(&fs::read_to_string(csv).unwrap()).unwrap();
    for r in 0..t.rows() {
        for ch in 0..4 {
            let i = (r * 4 + ch) as u64;
            assert_eq!(t.columns[ch][r], sine_sample(i, 4, 30000.0, 5e6, 80e6));
        }
    }
    // 80 MSPS at 5 MHz: period of 16 samples per channel
    assert_eq!(t.columns[0][3], t.columns[0][19]);
    assert_ne!(t.columns[0][3], t.columns[0][11]);
}

#[test]
fn decode_with_wrong_config_fails() {
    let d = Dir::new("wrongcfg");
    let cfg = d.file("c.json", HW);
    let cap = d.path("c.cap");
    cli(&["gen", "--config", s(&cfg), "--output", s(&cap)]);
    let other = d.file("o.json", r#"{"L":2,"F":8,"K":16,"scrambling":true}"#);
    let o = cli(&["decode", s(&cap), "--config", s(&other)]);
    assert_ne!(code(&o), 0);
    let garbage = d.file("g.cap", "hello\n");
    assert_eq!(code(&cli(&["decode", s(&garbage)])), 2);
}

#[test]
fn sweep_reports_single_latency() {
    let d = Dir::new("sweep");
    let cfg = d.file("c.json", HW);
    let report = d.path("v.json");
    let o = cli(&["sweep", "--config", s(&cfg), "--trials", "6", "--report", s(&report)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["trials"].as_array().unwrap().len(), 6);
}

#[test]
fn help_documents_csv_schema() {
    let o = cli(&["simulate", "--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("sample_index,channel,value"));
    assert!(text.contains("--dump-samples"));
    assert!(String::from_utf8_lossy(&cli(&["--help"]).stdout).contains("sweep"));
}
