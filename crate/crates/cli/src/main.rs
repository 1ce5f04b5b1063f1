//! `spatialsep`: dataset generation, separation and evaluation for
//! two-microphone angular-region separation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 i/o or file format error,
//! 4 contract violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spatialsep::bench::{
    calibrated_mcwf, offset_label, run_enhancement_bench, run_steering_bench,
    run_suppression_bench, steering_report, BenchRoom,
};
use spatialsep::config::GlobalConfig;
use spatialsep::dataset::{evaluate_manifest, synth_dataset};
use spatialsep::geometry::{sample_scene, RoomSpec};
use spatialsep::metrics::{directivity_sweep, polar_svg, EvalReport, ReportKind, ReportRow};
use spatialsep::rir::make_rir_matrix;
use spatialsep::separator::{
    separate_streaming, steer, IdentitySeparator, IpdSeparator, Separator,
};
use spatialsep::{wav, Error, Result};

/// Radial floor of the polar plots in dB.
const PLOT_FLOOR_DB: f64 = -40.0;

#[derive(Debug, Parser)]
#[command(
    name = "spatialsep",
    version,
    about = "Two-microphone angular-region separation workbench"
)]
struct Cli {
    /// TOML configuration; every key is optional and unknown keys are rejected.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Global seed (overrides the configuration). Bench seeds are offset by it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 0 uses one per core (overrides the configuration).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the 4×2 room responses of one scene and write them as WAVs.
    GenRir {
        /// Room description to simulate; a scene is sampled from the seed when absent.
        #[arg(long, value_name = "FILE")]
        room: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Generate mixtures, ground truths and a JSON-lines manifest.
    SynthDataset {
        #[arg(long)]
        count: usize,
        /// Output directory [default: <output_dir>/dataset].
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Separate a two-channel WAV into a mono WAV of the same length.
    Separate {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[command(flatten)]
        choice: SeparatorArgs,
        /// Steering offset in samples (microphone 1 delay) [default: from the configuration].
        #[arg(long, allow_hyphen_values = true)]
        offset: Option<f64>,
        /// Streaming chunk size in samples.
        #[arg(long, default_value_t = 160)]
        chunk: usize,
    },
    /// Run a bench or score a generated dataset; writes CSV and JSON (and SVG for steering).
    Evaluate {
        #[arg(
            long,
            value_enum,
            conflicts_with = "manifest",
            required_unless_present = "manifest"
        )]
        bench: Option<BenchKind>,
        /// Dataset manifest to score against its ground truths.
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        choice: SeparatorArgs,
        /// Report directory [default: <output_dir>/reports].
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Sweep a lone loudspeaker around the array and plot the separator gain.
    Directivity {
        #[command(flatten)]
        choice: SeparatorArgs,
        /// Steering offset in samples.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset: f64,
        /// Report directory [default: <output_dir>/reports].
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SeparatorArgs {
    #[arg(long, value_enum, default_value_t = SeparatorKind::Ipd)]
    separator: SeparatorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SeparatorKind {
    /// Microphone 0 passed through.
    Identity,
    /// Delay-contrast phase-difference mask.
    Ipd,
    /// Multichannel Wiener filter calibrated in the bench room.
    Mcwf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchKind {
    /// BSS-SDR with the target at 0° and interference around the array.
    Enhancement,
    /// Suppression of a lone loudspeaker per angle.
    Suppression,
    /// Directivity sweeps at each configured steering offset.
    Steering,
}

impl BenchKind {
    fn name(self) -> &'static str {
        match self {
            BenchKind::Enhancement => "enhancement",
            BenchKind::Suppression => "suppression",
            BenchKind::Steering => "steering",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => GlobalConfig::load(path)?,
        None => GlobalConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    config.bench.seeds = config
        .bench
        .seeds
        .iter()
        .map(|s| s.wrapping_add(config.seed))
        .collect();
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {} workers: {e}", config.workers)))?;
    pool.install(|| dispatch(cli.command, &config))
}

fn dispatch(command: Command, config: &GlobalConfig) -> Result<()> {
    match command {
        Command::GenRir { room, out } => gen_rir(config, room.as_deref(), &out),
        Command::SynthDataset { count, out } => {
            let out = out.unwrap_or_else(|| config.output_dir.join("dataset"));
            let manifest = synth_dataset(config, count, &out, config.workers)?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Separate {
            input,
            output,
            choice,
            offset,
            chunk,
        } => separate(config, &input, &output, choice.separator, offset, chunk),
        Command::Evaluate {
            bench,
            manifest,
            choice,
            out,
        } => {
            let out = out.unwrap_or_else(|| config.output_dir.join("reports"));
            let separator = build_separator(config, choice.separator, None)?;
            match (bench, manifest) {
                (_, Some(manifest)) => {
                    let report = evaluate_manifest(
                        separator.as_ref(),
                        &manifest,
                        config.bench.sdr_filter_taps,
                    )?;
                    emit(&report, &out, &format!("dataset_{}", separator.name()))
                }
                (Some(kind), None) => evaluate_bench(config, separator.as_ref(), kind, &out),
                (None, None) => Err(Error::config("evaluate needs --bench or --manifest")),
            }
        }
        Command::Directivity {
            choice,
            offset,
            out,
        } => {
            let out = out.unwrap_or_else(|| config.output_dir.join("reports"));
            let separator = build_separator(config, choice.separator, None)?;
            let steered = separator.steered(offset)?;
            let points = directivity_sweep(steered.as_ref(), &config.bench.sweep_config())?;
            let label = offset_label(offset);
            let mut report = EvalReport::new(ReportKind::Directivity, separator.name());
            for p in &points {
                report.rows.push(ReportRow::from_values(
                    p.angle_deg,
                    label.clone(),
                    vec![p.gain_db],
                ));
            }
            let stem = format!(
                "directivity_{}_{}",
                separator.name(),
                offset_file_tag(offset)
            );
            emit(&report, &out, &stem)?;
            let title = format!("{} {label}", separator.name());
            write_text(
                &out.join(format!("{stem}.svg")),
                &polar_svg(&points, &title, PLOT_FLOOR_DB),
            )
        }
    }
}

/// Builds the chosen separator; `offset` overrides the configured steering of
/// the IPD separator and is ignored by the others.
fn build_separator(
    config: &GlobalConfig,
    kind: SeparatorKind,
    offset: Option<f64>,
) -> Result<Box<dyn Separator>> {
    Ok(match kind {
        SeparatorKind::Identity => Box::new(IdentitySeparator),
        SeparatorKind::Ipd => {
            let base = config.separator.to_config(config.rir.sample_rate)?;
            let sep = match offset {
                Some(k) => steer(&base, k)?,
                None => base,
            };
            Box::new(IpdSeparator::new(sep)?)
        }
        SeparatorKind::Mcwf => {
            let room = BenchRoom::new(&config.bench)?;
            Box::new(calibrated_mcwf(&room, &config.bench, config.seed)?)
        }
    })
}

fn gen_rir(config: &GlobalConfig, room: Option<&Path>, out: &Path) -> Result<()> {
    let room = match room {
        Some(path) => RoomSpec::load(path)?,
        None => sample_scene(&config.geometry, config.seed)?,
    };
    let matrix = make_rir_matrix(&room, &config.rir)?;
    create_dir(out)?;
    let entries = matrix.export(&room, out)?;
    room.save(&out.join("room.json"))?;
    let text = serde_json::to_string_pretty(&entries).expect("manifest serialises");
    write_text(&out.join("rirs.json"), &text)?;
    println!("{} responses written to {}", entries.len(), out.display());
    Ok(())
}

fn separate(
    config: &GlobalConfig,
    input: &Path,
    output: &Path,
    kind: SeparatorKind,
    offset: Option<f64>,
    chunk: usize,
) -> Result<()> {
    let audio = wav::read(input)?;
    if audio.channels.len() != 2 {
        return Err(Error::contract(format!(
            "{} has {} channels, expected 2",
            input.display(),
            audio.channels.len()
        )));
    }
    if audio.sample_rate != config.rir.sample_rate {
        return Err(Error::contract(format!(
            "{} is sampled at {} Hz, expected {} Hz",
            input.display(),
            audio.sample_rate,
            config.rir.sample_rate
        )));
    }
    let (y0, y1) = (&audio.channels[0], &audio.channels[1]);
    let sep = build_separator(config, kind, offset)?;
    let out = match offset {
        // Separators without native steering delay the whole of microphone 1.
        Some(k) if k != 0.0 && kind != SeparatorKind::Ipd => sep.steered(k)?.separate(y0, y1)?,
        _ => separate_streaming(sep.as_ref(), y0, y1, chunk)?,
    };
    wav::write_mono_f32(output, &out, audio.sample_rate)
}

fn evaluate_bench(
    config: &GlobalConfig,
    separator: &dyn Separator,
    kind: BenchKind,
    out: &Path,
) -> Result<()> {
    let stem = format!("{}_{}", kind.name(), separator.name());
    match kind {
        BenchKind::Enhancement => emit(
            &run_enhancement_bench(separator, &config.bench)?,
            out,
            &stem,
        ),
        BenchKind::Suppression => emit(
            &run_suppression_bench(separator, &config.bench)?,
            out,
            &stem,
        ),
        BenchKind::Steering => {
            let sweeps =
                run_steering_bench(separator, &config.bench.steering_offsets, &config.bench)?;
            emit(
                &steering_report(separator, &sweeps, &config.bench),
                out,
                &stem,
            )?;
            for s in &sweeps {
                let title = format!("{} {}", separator.name(), offset_label(s.offset));
                let path = out.join(format!("{stem}_{}.svg", offset_file_tag(s.offset)));
                write_text(&path, &polar_svg(&s.points, &title, PLOT_FLOOR_DB))?;
            }
            Ok(())
        }
    }
}

/// `offset+4`, `offset-2`, `offset0`: a file-name friendly offset tag.
fn offset_file_tag(offset: f64) -> String {
    if offset == 0.0 {
        "offset0".into()
    } else {
        format!("offset{offset:+}")
    }
}

/// Writes `<stem>.csv` and `<stem>.json` and prints the per-condition summary.
fn emit(report: &EvalReport, out: &Path, stem: &str) -> Result<()> {
    create_dir(out)?;
    report.write_csv(&out.join(format!("{stem}.csv")))?;
    report.write_json(&out.join(format!("{stem}.json")))?;
    println!("{stem}");
    for s in report.summary() {
        println!(
            "  {:<14} mean {:8.3} dB  min {:8.3} dB  max {:8.3} dB",
            s.condition, s.mean_db, s.min_db, s.max_db
        );
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
