use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use jesd204b::io::{config_file, decode_capture, load_config, CaptureData, CaptureFile, CaptureFormat, SampleTable};
use jesd204b::payload::{channels_per_link, PayloadGen, PayloadSpec};
use jesd204b::sim::{measure_latency_determinism, run_simulation, Collect, SimReport, SimSetup};

/// Lanes per link accepted on the command line.
const CLI_MAX_LANES: u32 = 4;

const CSV_HELP: &str = "Sample CSV columns (fixed order): sample_index,channel,value. \
With M = L*F/2 channels per link, sample i of link k is channel k*M + i%M at index i/M. \
Rows are ordered by sample_index, then channel; value is the raw 16-bit word.";

const EXIT_HELP: &str = "Exit status: 0 success, 1 protocol failure (payload mismatch, fault, \
no sync), 2 usage or configuration error.";

#[derive(Parser)]
#[command(name = "jesd204b", version, about = "JESD204B Subclass 1 link model", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run transmitter, channel and receiver and compare the payload.
    #[command(after_help = format!("{CSV_HELP}\n\n{EXIT_HELP}"))]
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write received samples of the final data phase as CSV.
        #[arg(long, value_name = "PATH")]
        dump_samples: Option<PathBuf>,
        /// Write the event log.
        #[arg(long, value_name = "PATH")]
        event_log: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Replay a capture file through fresh receivers.
    #[command(after_help = format!("{CSV_HELP}\n\n{EXIT_HELP}"))]
    Decode {
        /// Capture written by `gen` (or by hand).
        capture: PathBuf,
        /// Use this configuration instead of the one in the capture header.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Decoded samples as CSV (stdout when absent).
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
        /// Write the JSON decode report.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        /// Write the event log.
        #[arg(long, value_name = "PATH")]
        event_log: Option<PathBuf>,
    },
    /// Write the receiver-input streams of a simulated link to a capture file.
    #[command(after_help = EXIT_HELP)]
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "symbol10")]
        format: FormatArg,
        /// Capture path (stdout when absent).
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Latency-determinism trials with random lane skews.
    #[command(after_help = EXIT_HELP)]
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        trials: u32,
        /// Largest lane skew in octets; half a multiframe when absent.
        #[arg(long)]
        max_skew: Option<u32>,
        /// Write the JSON verdict here instead of stdout.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the channel seed and a random payload's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the run length in link clock cycles.
    #[arg(long)]
    cycles: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Symbol10,
    OctetFlag,
}

impl From<FormatArg> for CaptureFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Symbol10 => CaptureFormat::Symbol10,
            FormatArg::OctetFlag => CaptureFormat::OctetFlag,
        }
    }
}

/// A failed command and the exit status it maps to.
enum Failure {
    Usage(String),
    Protocol(String),
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn write_out(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_cli_limits(setup: &SimSetup) -> CmdResult {
    if setup.link.lanes > CLI_MAX_LANES {
        return Err(usage(format!(
            "L={} exceeds the command line limit of {CLI_MAX_LANES} lanes per link",
            setup.link.lanes
        )));
    }
    Ok(())
}

fn load(common: &Common) -> Result<SimSetup, Failure> {
    let mut setup = load_config(&common.config).map_err(usage)?;
    if let Some(seed) = common.seed {
        setup.channel.rng_seed = seed;
        if let PayloadSpec::Random { seed: s } = &mut setup.payload {
            *s = seed;
        }
    }
    if let Some(c) = common.cycles {
        setup.run.cycles = c;
    }
    setup.validate().map_err(usage)?;
    check_cli_limits(&setup)?;
    eprintln!("effective config:\n{}", config_file::to_json(&setup));
    Ok(setup)
}

fn write_events(path: Option<&Path>, events: &[String]) -> CmdResult {
    if let Some(p) = path {
        let mut text = events.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        write_out(Some(p), &text)?;
    }
    Ok(())
}

fn simulate(common: &Common, dump: Option<&Path>, events: Option<&Path>, report: Option<&Path>) -> CmdResult {
    let setup = load(common)?;
    let collect = Collect {
        events: events.is_some(),
        samples: dump.is_some(),
        capture: false,
    };
    let out = run_simulation(&setup, collect).map_err(usage)?;
    write_out(report, &(out.report.to_json() + "\n"))?;
    write_events(events, &out.events)?;
    if let Some(p) = dump {
        write_out(Some(p), &SampleTable::from_links(&setup.link, &out.samples).to_csv())?;
    }
    verdict(&setup, &out.report)
}

/// With no resyncs allowed every compared octet must match; with an
/// allowance only the data phase after the last resync is judged.
fn verdict(setup: &SimSetup, r: &SimReport) -> CmdResult {
    let allowed = setup.run.max_resyncs;
    if r.resync_count > allowed {
        let mut faults: BTreeMap<&str, usize> = BTreeMap::new();
        for f in r.links.iter().flat_map(|l| &l.faults) {
            *faults.entry(f.as_str()).or_default() += 1;
        }
        let faults: Vec<String> = faults.iter().map(|(f, n)| format!("{f} x{n}")).collect();
        return Err(Failure::Protocol(format!(
            "{} resyncs (allowed {allowed}): {}",
            r.resync_count,
            faults.join(", ")
        )));
    }
    let ok = if allowed == 0 {
        r.payload_match
    } else {
        r.final_payload_match
    };
    if !ok {
        return Err(Failure::Protocol(if r.compared_octets == 0 {
            "no payload received".to_string()
        } else {
            format!("{} of {} octets mismatched", r.mismatched_octets, r.compared_octets)
        }));
    }
    eprintln!(
        "ok: {} octets matched, sync {} frames after SYNC deassert",
        r.compared_octets,
        r.sync_frames_from_sync_deassert.map_or("-".into(), |f| f.to_string())
    );
    Ok(())
}

fn gen(common: &Common, format: CaptureFormat, output: Option<&Path>) -> CmdResult {
    let setup = load(common)?;
    let out = run_simulation(
        &setup,
        Collect {
            capture: true,
            ..Collect::default()
        },
    )
    .map_err(usage)?;
    let data = match format {
        CaptureFormat::Symbol10 => CaptureData::Symbol10(out.capture.into_iter().map(|c| c.symbols).collect()),
        CaptureFormat::OctetFlag => CaptureData::OctetFlag(out.capture.into_iter().map(|c| c.chars).collect()),
    };
    let capture = CaptureFile {
        seed: setup.channel.rng_seed,
        setup,
        data,
    };
    write_out(output, &capture.to_text())
}

#[derive(Serialize)]
struct DecodeReport<'a> {
    bit_offsets: &'a [Vec<usize>],
    /// Decoded samples against the configured generator from sample 0;
    /// absent when the capture saw a resync.
    reference_match: Option<bool>,
    report: &'a SimReport,
}

fn reference_match(setup: &SimSetup, samples: &[Vec<u16>], report: &SimReport) -> Option<bool> {
    if report.resync_count != 0 {
        return None;
    }
    let channels = channels_per_link(&setup.link);
    Some(samples.iter().all(|s| {
        let mut g = PayloadGen::new(&setup.payload, channels);
        !s.is_empty() && s.iter().all(|&v| v == g.next_sample())
    }))
}

fn decode(
    capture: &Path,
    config: Option<&Path>,
    output: Option<&Path>,
    report: Option<&Path>,
    events: Option<&Path>,
) -> CmdResult {
    let text = fs::read_to_string(capture).map_err(|e| usage(format!("{}: {e}", capture.display())))?;
    let mut file = CaptureFile::parse(&text).map_err(usage)?;
    if let Some(p) = config {
        file.setup = load_config(p).map_err(usage)?;
    }
    check_cli_limits(&file.setup)?;
    let out = match decode_capture(&file) {
        Ok(o) => o,
        Err(e @ jesd204b::io::CaptureError::NoSyncAchieved { .. }) => return Err(Failure::Protocol(e.to_string())),
        Err(e) => return Err(usage(e)),
    };
    let r = &out.replay.report;
    let matched = reference_match(&file.setup, &out.replay.samples, r);
    let summary = DecodeReport {
        bit_offsets: &out.bit_offsets,
        reference_match: matched,
        report: r,
    };
    if let Some(p) = report {
        let json = serde_json::to_string_pretty(&summary).expect("report serializes");
        write_out(Some(p), &(json + "\n"))?;
    }
    write_events(events, &out.replay.events)?;
    write_out(output, &SampleTable::from_links(&file.setup.link, &out.replay.samples).to_csv())?;
    if matched == Some(false) {
        return Err(Failure::Protocol("decoded samples differ from the configured payload".into()));
    }
    if r.resync_count > 0 {
        return Err(Failure::Protocol(format!("{} resyncs during the capture", r.resync_count)));
    }
    Ok(())
}

fn sweep(common: &Common, trials: u32, max_skew: Option<u32>, report: Option<&Path>) -> CmdResult {
    let setup = load(common)?;
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let max_skew = max_skew.unwrap_or(setup.link.multiframe_octets() / 2);
    let v = measure_latency_determinism(&setup, trials, max_skew, setup.channel.rng_seed);
    let json = serde_json::to_string_pretty(&v).expect("verdict serializes");
    write_out(report, &(json + "\n"))?;
    if v.pass {
        eprintln!("pass: {trials} trials, latency {} octets", v.latencies[0]);
        Ok(())
    } else {
        Err(Failure::Protocol(format!("latencies differ across trials: {:?}", v.latencies)))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            common,
            dump_samples,
            event_log,
            report,
        } => simulate(common, dump_samples.as_deref(), event_log.as_deref(), report.as_deref()),
        Command::Decode {
            capture,
            config,
            output,
            report,
            event_log,
        } => decode(
            capture,
            config.as_deref(),
            output.as_deref(),
            report.as_deref(),
            event_log.as_deref(),
        ),
        Command::Gen { common, format, output } => gen(common, (*format).into(), output.as_deref()),
        Command::Sweep {
            common,
            trials,
            max_skew,
            report,
        } => sweep(common, *trials, *max_skew, report.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Protocol(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
