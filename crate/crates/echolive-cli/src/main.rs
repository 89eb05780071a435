//! Command-line interface: enroll users, verify liveness, synthesize
//! corpora, calibrate thresholds, beamform array recordings, and export
//! contour features.
//!
//! Exit codes: `verify` exits 0 for Live, 1 for Attack, >= 2 on errors;
//! `enroll` exits 3 on enrollment-quality failures; everything else exits
//! 2 on I/O or parse failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use echolive_core::audio::{read_wav, write_wav, WavEncoding};
use echolive_core::beamform::{delay_and_sum, scan_directions, ArrayGeometry, SteeringDirection};
use echolive_core::config::{ConfigOverlay, FeatureMode, RunConfig};
use echolive_core::matching::{calibrate_threshold, far_frr};
use echolive_core::pipeline::{
    enroll_text_dependent, enroll_text_independent, features_from_files, score_corpus,
    split_scores, verify_text_dependent, verify_text_independent, UtteranceFeatures,
};
use echolive_core::profile::{ProfileMode, UserProfile};
use echolive_core::sim::{generate_corpus, CorpusParams};

#[derive(Parser)]
#[command(name = "echolive", version, about = "Voice liveness detection from ultrasonic Doppler probes")]
struct Cli {
    /// TOML config file; flags override it, it overrides defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed for simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Sample rate in Hz.
    #[arg(long, global = true)]
    sample_rate: Option<f64>,

    /// Probe tone frequency in Hz.
    #[arg(long, global = true)]
    f0: Option<f64>,

    /// Contours used for scoring: energy|frequency|combined.
    #[arg(long, global = true)]
    feature_mode: Option<FeatureMode>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a user profile from enrollment recordings.
    Enroll(EnrollArgs),
    /// Score a recording against an enrolled profile.
    Verify(VerifyArgs),
    /// Generate a synthetic live/replay corpus.
    Simulate(SimulateArgs),
    /// Sweep thresholds over a corpus and report FAR/FRR/EER.
    Calibrate(CalibrateArgs),
    /// Delay-and-sum beamform a multichannel recording.
    Beamform(BeamformArgs),
    /// Extract the 11 contour features of one recording as JSON.
    ExportContours(ExportArgs),
    /// Write a probe-tone WAV.
    Probe(ProbeArgs),
}

#[derive(Args)]
struct EnrollArgs {
    /// Profile store directory.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    user: String,
    /// text-dependent or text-independent.
    #[arg(long, default_value = "text-dependent")]
    mode: String,
    /// Passphrase key for text-dependent templates.
    #[arg(long, default_value = "default")]
    passphrase: String,
    /// Minimum enrollment trials (text-dependent).
    #[arg(long, default_value_t = 3)]
    min_trials: usize,
    /// Alignments are tab-separated with a header row.
    #[arg(long)]
    tsv: bool,
    /// Enrollment WAVs; each needs `<stem>.align.csv` beside it.
    #[arg(required = true)]
    wavs: Vec<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    user: String,
    /// Passphrase key; defaults to the profile's only template.
    #[arg(long)]
    passphrase: Option<String>,
    #[arg(long)]
    tsv: bool,
    wav: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    users: usize,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Playback and mimicry attacks per user.
    #[arg(long, default_value_t = 1)]
    attacks: usize,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Corpus root containing manifest.csv.
    #[arg(long)]
    corpus: PathBuf,
    /// Write the (threshold, FAR, FRR) table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the calibrated threshold back into every user profile in the
    /// store.
    #[arg(long)]
    update_profiles: Option<PathBuf>,
}

#[derive(Args)]
struct BeamformArgs {
    /// Geometry JSON; defaults to the 7-mic circular array.
    #[arg(long)]
    geometry: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    azimuth: f64,
    #[arg(long, default_value_t = 0.0)]
    elevation: f64,
    /// Grid-search azimuth (5 degree steps) at the given elevation.
    #[arg(long)]
    scan: bool,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tsv: bool,
    wav: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    #[arg(long, default_value_t = 0.9)]
    amplitude: f64,
    /// Write 16-bit PCM instead of 32-bit float.
    #[arg(long)]
    pcm16: bool,
    output: PathBuf,
}

fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => Some(
            ConfigOverlay::load(path).with_context(|| format!("loading {}", path.display()))?,
        ),
        None => None,
    };
    let flags = ConfigOverlay {
        seed: cli.seed,
        sample_rate: cli.sample_rate,
        probe_f0: cli.f0,
        feature_mode: cli.feature_mode,
        ..Default::default()
    };
    Ok(RunConfig::resolve(file.as_ref(), &flags))
}

fn alignment_for(wav: &Path) -> PathBuf {
    wav.with_extension("align.csv")
}

fn load_features(
    wav: &Path,
    tsv: bool,
    cfg: &RunConfig,
) -> anyhow::Result<UtteranceFeatures> {
    let align = alignment_for(wav);
    let (features, warnings) = features_from_files(wav, &align, tsv, cfg)
        .with_context(|| format!("processing {}", wav.display()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(features)
}

fn cmd_enroll(cli: &Cli, args: &EnrollArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(cli)?;
    let store = args.store.clone().unwrap_or_else(|| cfg.profile_store.clone());
    let mode = match args.mode.as_str() {
        "text-dependent" => ProfileMode::TextDependent,
        "text-independent" => ProfileMode::TextIndependent,
        other => bail!("unknown mode '{other}' (text-dependent|text-independent)"),
    };

    if mode == ProfileMode::TextDependent && args.wavs.len() < args.min_trials {
        eprintln!(
            "error: {} trials provided but {} required",
            args.wavs.len(),
            args.min_trials
        );
        return Ok(3);
    }

    let mut trials = Vec::new();
    for wav in &args.wavs {
        trials.push(load_features(wav, args.tsv, &cfg)?);
    }

    let mut profile = UserProfile::new(&args.user, mode, cfg.threshold);
    match mode {
        ProfileMode::TextDependent => {
            let template = match enroll_text_dependent(&trials) {
                Ok(t) => t,
                Err(e @ echolive_core::Error::Enrollment(_)) => {
                    eprintln!("error: {e}");
                    return Ok(3);
                }
                Err(e) => return Err(e.into()),
            };
            println!(
                "enrolled user={} passphrase={:?} phonemes={} trials={}",
                args.user,
                args.passphrase,
                template.phoneme_labels.len(),
                template.trial_count
            );
            profile.passphrase_templates.insert(args.passphrase.clone(), template);
        }
        ProfileMode::TextIndependent => {
            let (templates, excluded) = enroll_text_independent(&trials)?;
            if templates.is_empty() {
                eprintln!("error: no phoneme occurred at least twice");
                return Ok(3);
            }
            for label in &excluded {
                println!("warning: phoneme '{label}' occurred once; excluded from templates");
            }
            println!("enrolled user={} phonemes={}", args.user, templates.len());
            for (label, t) in &templates {
                println!("  phoneme={label} weight={:.6} trials={}", t.weight, t.trial_count);
            }
            profile.phoneme_templates = templates;
        }
    }
    profile.save(&store)?;
    Ok(0)
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(cli)?;
    let store = args.store.clone().unwrap_or_else(|| cfg.profile_store.clone());
    let profile = UserProfile::load(&store, &args.user)
        .with_context(|| format!("loading profile for '{}'", args.user))?;
    let features = load_features(&args.wav, args.tsv, &cfg)?;

    let (decision, coverage) = match profile.mode {
        ProfileMode::TextDependent => {
            let template = match &args.passphrase {
                Some(p) => profile
                    .passphrase_templates
                    .get(p)
                    .ok_or_else(|| anyhow!("no passphrase template '{p}'"))?,
                None => {
                    if profile.passphrase_templates.len() != 1 {
                        bail!(
                            "profile has {} passphrase templates; pass --passphrase",
                            profile.passphrase_templates.len()
                        );
                    }
                    profile.passphrase_templates.values().next().unwrap()
                }
            };
            let d = verify_text_dependent(&features, template, cfg.feature_mode, profile.threshold)?;
            (d, 1.0)
        }
        ProfileMode::TextIndependent => verify_text_independent(
            &features,
            &profile.phoneme_templates,
            cfg.feature_mode,
            profile.threshold,
        )?,
    };

    println!(
        "score={:.6} threshold={:.6} verdict={} mode={} coverage={:.3}",
        decision.score, decision.threshold, decision.verdict, decision.feature_mode, coverage
    );
    Ok(match decision.verdict {
        echolive_core::Verdict::Live => 0,
        echolive_core::Verdict::Attack => 1,
    })
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(cli)?;
    let params = CorpusParams {
        n_users: args.users,
        n_trials: args.trials,
        n_attacks: args.attacks,
        seed: cfg.seed,
        sample_rate: cfg.sample_rate,
        ..Default::default()
    };
    let entries = generate_corpus(&args.out, &params)?;
    println!("wrote {} scenes under {}", entries.len(), args.out.display());
    Ok(0)
}

fn cmd_calibrate(cli: &Cli, args: &CalibrateArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(cli)?;
    let trials = score_corpus(&args.corpus, &cfg)?;
    let (genuine, attack) = split_scores(&trials, cfg.feature_mode)?;
    let (threshold, eer) = calibrate_threshold(&genuine, &attack)?;

    let mut candidates: Vec<f64> = genuine.iter().chain(&attack).cloned().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut table = String::from("threshold,far,frr\n");
    for t in candidates {
        let (far, frr) = far_frr(&genuine, &attack, t);
        table.push_str(&format!("{t:.6},{far:.6},{frr:.6}\n"));
    }
    match &args.out {
        Some(path) => std::fs::write(path, table)?,
        None => print!("{table}"),
    }
    println!("eer={eer:.3} threshold={threshold:.6} mode={}", cfg.feature_mode);

    if let Some(store) = &args.update_profiles {
        let mut updated = 0;
        for entry in std::fs::read_dir(store)? {
            let path = entry?.path();
            if path.extension().map_or(false, |e| e == "json") {
                let user = path.file_stem().unwrap().to_string_lossy().to_string();
                let mut profile = UserProfile::load(store, &user)?;
                profile.threshold = threshold;
                profile.save(store)?;
                updated += 1;
            }
        }
        println!("updated {updated} profiles in {}", store.display());
    }
    Ok(0)
}

fn cmd_beamform(cli: &Cli, args: &BeamformArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(cli)?;
    let _ = cfg;
    let geometry = match &args.geometry {
        Some(path) => ArrayGeometry::load(path)?,
        None => ArrayGeometry::default(),
    };
    let (audio, warn) = read_wav(&args.input)?;
    if let Some(w) = warn {
        eprintln!("warning: {w}");
    }
    let direction = if args.scan {
        let (best, power) = scan_directions(&audio, &geometry, 5.0, &[args.elevation])?;
        println!(
            "scan: azimuth={} elevation={} power={power:.6e}",
            best.azimuth_deg, best.elevation_deg
        );
        best
    } else {
        SteeringDirection::new(args.azimuth, args.elevation)?
    };
    let mono = delay_and_sum(&audio, &geometry, &direction)?;
    write_wav(&args.output, &mono, WavEncoding::Float32)?;
    println!("wrote {}", args.output.display());
    Ok(0)
}

fn cmd_export_contours(cli: &Cli, args: &ExportArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(cli)?;
    let features = load_features(&args.wav, args.tsv, &cfg)?;
    let json = features.contours.to_json()?;
    match &args.out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(0)
}

fn cmd_probe(cli: &Cli, args: &ProbeArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(cli)?;
    let buffer = echolive_core::audio::generate_probe(
        cfg.sample_rate,
        cfg.probe_f0,
        args.duration,
        args.amplitude,
    )?;
    let encoding = if args.pcm16 { WavEncoding::Pcm16 } else { WavEncoding::Float32 };
    write_wav(&args.output, &buffer, encoding)?;
    println!("wrote {} ({} samples at {} Hz)", args.output.display(), buffer.len(), cfg.sample_rate);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Enroll(args) => cmd_enroll(&cli, args),
        Command::Verify(args) => cmd_verify(&cli, args),
        Command::Simulate(args) => cmd_simulate(&cli, args),
        Command::Calibrate(args) => cmd_calibrate(&cli, args),
        Command::Beamform(args) => cmd_beamform(&cli, args),
        Command::ExportContours(args) => cmd_export_contours(&cli, args),
        Command::Probe(args) => cmd_probe(&cli, args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
