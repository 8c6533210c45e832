//! The `skytrack` command line.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use skytrack_core::backend::{OracleConfig, OracleService};
use skytrack_core::eval::{ground_truth_of, miou, run_detection_eval, EvalError};
use skytrack_core::orchestrator::{FrameSource, MissionError};
use skytrack_core::protocol::{decode, encode, WireError};
use skytrack_core::synth::{random_scene, SynthSpec};
use skytrack_core::TrackerKind;

use crate::clock::{AnyClock, Timing};
use crate::config::{ConfigFile, LinkSection, MissionSection, NoiseSection, Settings, SEED_ENV};
use crate::dataset::{self, sard_tasks, DatasetError, SardDataset, SardImage, Strictness};
use crate::mission::{self, BackendTarget};
use crate::net::{FrameHandler, NetError, Proxy, Server, TcpBackend};
use crate::report::{self, RunManifest};
use crate::sweep::par_sweep;
use crate::{overlay, pngio};

#[derive(Debug, Parser)]
#[command(
    name = "skytrack",
    version,
    about = "Semantic search-and-track harness: detection service, edge tracker loop, evaluation"
)]
pub struct Cli {
    /// Print errors as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json: bool,

    /// Seed for every stochastic component.
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,

    /// TOML file with defaults for the flags below; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the wire protocol over TCP.
    Serve(ServeArgs),
    /// Run a mission over a sequence directory.
    Track(TrackArgs),
    /// Detection metrics over an annotated image set.
    Eval(EvalArgs),
    /// Re-initialization threshold sweep over sequences.
    Sweep(SweepArgs),
    /// Generate a synthetic sequence or annotated image set.
    Synth(SynthArgs),
    /// Check golden protocol fixtures, optionally against a running service.
    ProtocolCheck(ProtocolCheckArgs),
}

#[derive(Debug, Args, Default)]
pub struct NoiseFlags {
    #[arg(long = "noise.miss-rate")]
    pub miss_rate: Option<f64>,
    /// Mean number of spurious proposals per frame.
    #[arg(long = "noise.spurious-rate")]
    pub spurious_rate: Option<f64>,
    /// Standard deviation of box-corner jitter, pixels.
    #[arg(long = "noise.jitter-sigma")]
    pub jitter_sigma: Option<f64>,
    #[arg(long = "noise.verify-flip-rate")]
    pub verify_flip_rate: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct MissionFlags {
    #[arg(long, value_parser = parse_tracker)]
    pub tracker: Option<TrackerKind>,
    /// Re-initialization confidence threshold.
    #[arg(long = "t-c")]
    pub t_c: Option<f64>,
    /// Crop margin around proposals, pixels.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Uplink bandwidth, bits per second.
    #[arg(long = "link.bandwidth")]
    pub bandwidth: Option<f64>,
    /// One-way latency, seconds.
    #[arg(long = "link.latency")]
    pub latency: Option<f64>,
    /// Downlink bandwidth when it differs from the uplink.
    #[arg(long = "link.downlink-bandwidth")]
    pub downlink_bandwidth: Option<f64>,
    /// How edge compute is charged to the timeline.
    #[arg(long, value_enum)]
    pub timing: Option<Timing>,
}

fn parse_tracker(s: &str) -> Result<TrackerKind, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ServeMode {
    Oracle,
    Proxy,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 7878)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, value_enum, default_value_t = ServeMode::Oracle)]
    pub mode: ServeMode,
    /// Per-frame person annotations (oracle mode), indexed by frame_index.
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,
    /// Where proxy mode forwards requests.
    #[arg(long, value_name = "HOST:PORT")]
    pub upstream: Option<String>,
    #[arg(long = "margin")]
    pub margin: Option<f64>,
    #[command(flatten)]
    pub noise: NoiseFlags,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    pub sequence: PathBuf,
    #[arg(long, default_value = "out/track")]
    pub out: PathBuf,
    /// Detection service address; the in-process oracle when omitted.
    #[arg(long, value_name = "HOST:PORT")]
    pub backend: Option<String>,
    /// Sleep for the simulated link time on every exchange.
    #[arg(long)]
    pub pace: bool,
    #[arg(long)]
    pub no_overlays: bool,
    #[command(flatten)]
    pub mission: MissionFlags,
    #[command(flatten)]
    pub noise: NoiseFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Annotation file; image paths resolve against its directory.
    pub annotations: PathBuf,
    #[arg(long, default_value = "out/eval")]
    pub out: PathBuf,
    /// Accept injured labels on any pose and unknown fields, with warnings.
    #[arg(long)]
    pub lenient: bool,
    #[arg(long)]
    pub margin: Option<f64>,
    #[command(flatten)]
    pub noise: NoiseFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(required = true)]
    pub sequences: Vec<PathBuf>,
    #[arg(long, default_value = "out/sweep")]
    pub out: PathBuf,
    #[command(flatten)]
    pub mission: MissionFlags,
    #[command(flatten)]
    pub noise: NoiseFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Target moving 2 px per frame, 60 frames.
    Linear,
    /// Linear, with the target covered for frames 30 to 39.
    Occlusion,
    /// Motionless target.
    Static,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Linear)]
    pub preset: Preset,
    /// Full scene description as JSON, instead of a preset.
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Write an annotated still-image set of this many images instead of a sequence.
    #[arg(long, value_name = "N")]
    pub images: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ProtocolCheckArgs {
    #[arg(long, default_value = "fixtures/protocol")]
    pub fixtures: PathBuf,
    /// Also send every `<name>_request.bin` to this service and compare the
    /// reply with `<name>_response.bin`.
    #[arg(long, value_name = "HOST:PORT")]
    pub addr: Option<String>,
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DATASET: i32 = 3;
    pub const PROTOCOL: i32 = 4;
    pub const BIND: i32 = 5;
}

/// A flag or config value that cannot be used.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn classify(err: &anyhow::Error) -> (&'static str, i32) {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return ("usage", exit::USAGE);
        }
        if cause.is::<DatasetError>() {
            return ("dataset", exit::DATASET);
        }
        if let Some(n) = cause.downcast_ref::<NetError>() {
            return match n {
                NetError::BindFailure { .. } => ("bind_failure", exit::BIND),
                _ => ("transport", exit::PROTOCOL),
            };
        }
        if cause.is::<WireError>() {
            return ("protocol", exit::PROTOCOL);
        }
        if let Some(m) = cause.downcast_ref::<MissionError>() {
            if matches!(m, MissionError::Protocol { .. } | MissionError::Transport { .. }) {
                return ("protocol", exit::PROTOCOL);
            }
            if let MissionError::Source { .. } = m {
                return ("dataset", exit::DATASET);
            }
        }
        if let Some(EvalError::SweepNotApplicable(_)) = cause.downcast_ref::<EvalError>() {
            return ("usage", exit::USAGE);
        }
        if let Some(EvalError::Mission { source, .. }) = cause.downcast_ref::<EvalError>() {
            if matches!(source, MissionError::Protocol { .. } | MissionError::Transport { .. }) {
                return ("protocol", exit::PROTOCOL);
            }
        }
    }
    ("error", exit::FAILURE)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            let (kind, code) = classify(&e);
            if json {
                let body =
                    serde_json::json!({ "error": { "kind": kind, "message": format!("{e:#}"), "exit_code": code } });
                eprintln!("{body}");
            } else {
                eprintln!("error: {e:#}");
            }
            code
        }
    }
}

fn settings(
    cli_seed: Option<u64>,
    config: &Option<PathBuf>,
    mission: &MissionFlags,
    noise: &NoiseFlags,
) -> anyhow::Result<Settings> {
    let file = match config {
        Some(p) => ConfigFile::load(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        seed: cli_seed,
        timing: mission.timing,
        mission: MissionSection { tracker: mission.tracker, t_c: mission.t_c, margin: mission.margin },
        link: LinkSection {
            bandwidth: mission.bandwidth,
            latency: mission.latency,
            downlink_bandwidth: mission.downlink_bandwidth,
        },
        noise: NoiseSection {
            miss_rate: noise.miss_rate,
            spurious_rate: noise.spurious_rate,
            jitter_sigma: noise.jitter_sigma,
            verify_flip_rate: noise.verify_flip_rate,
        },
    };
    let s = file.overlay(&flags).resolve();
    let usage = |m: String| anyhow::Error::new(UsageError(m));
    s.link.validate().map_err(|e| usage(e.into()))?;
    s.noise.validate().map_err(|e| usage(e.to_string()))?;
    if !(0.0..=1.0).contains(&s.t_c) {
        return Err(usage(format!("t_c {} outside [0, 1]", s.t_c)));
    }
    if !(s.margin >= 0.0 && s.margin.is_finite()) {
        return Err(usage(format!("margin {} must be non-negative", s.margin)));
    }
    Ok(s)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Serve(a) => {
            let mission = MissionFlags { margin: a.margin, ..Default::default() };
            cmd_serve(a, &settings(cli.seed, &cli.config, &mission, &a.noise)?)
        }
        Command::Track(a) => cmd_track(a, &settings(cli.seed, &cli.config, &a.mission, &a.noise)?),
        Command::Eval(a) => {
            let mission = MissionFlags { margin: a.margin, ..Default::default() };
            cmd_eval(a, &settings(cli.seed, &cli.config, &mission, &a.noise)?)
        }
        Command::Sweep(a) => cmd_sweep(a, &settings(cli.seed, &cli.config, &a.mission, &a.noise)?),
        Command::Synth(a) => cmd_synth(a, cli.seed.unwrap_or(0)),
        Command::ProtocolCheck(a) => cmd_protocol_check(a),
    }
}

fn oracle_config(s: &Settings) -> OracleConfig {
    OracleConfig { noise: s.noise.clone(), margin: s.margin, ..OracleConfig::default() }
}

fn cmd_serve(a: &ServeArgs, s: &Settings) -> anyhow::Result<()> {
    let handler: Arc<dyn FrameHandler> = match a.mode {
        ServeMode::Oracle => {
            let Some(path) = &a.annotations else {
                return Err(UsageError("oracle mode needs --annotations".into()).into());
            };
            let (images, warnings) = dataset::load_sard_annotations(path, Strictness::Strict)
                .with_context(|| "bad annotations".to_string())?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            let annotations = images.into_iter().map(|i| i.persons).collect();
            Arc::new(OracleService::new(annotations, oracle_config(s))?)
        }
        ServeMode::Proxy => {
            let Some(upstream) = &a.upstream else {
                return Err(UsageError("proxy mode needs --upstream".into()).into());
            };
            Arc::new(Proxy { upstream: upstream.clone() })
        }
    };
    let server = Server::bind(&format!("{}:{}", a.host, a.port), handler)?;
    println!("listening on {}", server.local_addr()?);
    std::io::stdout().flush()?;
    server.serve()?;
    Ok(())
}

fn cmd_track(a: &TrackArgs, s: &Settings) -> anyhow::Result<()> {
    let seq = dataset::load_sequence(&a.sequence)?;
    let cfg = mission::mission_config(s, seq.query.clone());
    let target = match &a.backend {
        Some(addr) => BackendTarget::Remote(addr.clone()),
        None => BackendTarget::InProcess,
    };
    let log = mission::track(&seq, &cfg, &target, AnyClock::new(s.timing), a.pace)?;
    let result = miou(&log, &ground_truth_of(&seq))?;

    let mut m = RunManifest::new("track", s);
    m.inputs.insert("sequence".into(), seq.dir.display().to_string());
    if let Some(addr) = &a.backend {
        m.inputs.insert("backend".into(), addr.clone());
    }
    let log_json = mission::mission_log_json(&log);
    m.emit(&a.out, "mission_log.json", &log_json)?;
    m.emit(&a.out, "summary.csv", report::track_csv(&seq.name, s.t_c, &result).as_bytes())?;
    m.emit(&a.out, "summary.json", &report::write_json(&result))?;
    if !a.no_overlays {
        std::fs::create_dir_all(a.out.join("overlays"))?;
        for (i, rec) in log.records.iter().enumerate() {
            let frame = seq.shared_frame(i)?;
            let rel = format!("overlays/{i:08}.png");
            pngio::save_rgb(&a.out.join(&rel), &overlay::render(&frame, rec, seq.ground_truth(i)))?;
            m.record(&a.out, &rel)?;
        }
    }
    m.finish(&a.out)?;

    let tb = result.mean_t_b.map(|t| format!("{:.1} ms", t * 1000.0)).unwrap_or_else(|| "-".into());
    println!("sequence        {}", seq.name);
    println!("tracker         {}  t_c={}", s.tracker, s.t_c);
    println!("frames          {}", log.summary.frames_total);
    println!("backend_calls   {}", log.summary.backend_calls);
    println!("reacquisitions  {}", log.summary.reacquisitions);
    println!("mIoU            {:.3}", result.miou);
    println!("FPS             {:.3}", result.fps);
    println!("FPS_Edge        {:.3}", result.fps_edge);
    println!("t_b             {tb}");
    println!("log_sha256      {}", mission::sha256_hex(&log_json));
    Ok(())
}

fn cmd_eval(a: &EvalArgs, s: &Settings) -> anyhow::Result<()> {
    let strictness = if a.lenient { Strictness::Lenient } else { Strictness::Strict };
    let (data, warnings) = SardDataset::open(&a.annotations, strictness)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let result = run_detection_eval(&sard_tasks(), &data, &oracle_config(s))?;
    let mut m = RunManifest::new("eval", s);
    m.inputs.insert("annotations".into(), a.annotations.display().to_string());
    m.emit(&a.out, "detection.csv", report::detection_csv(&result).as_bytes())?;
    m.emit(&a.out, "detection.json", &report::write_json(&result))?;
    m.finish(&a.out)?;
    println!("{:<18} {:>8}", "task", "AP");
    for t in &result.tasks {
        println!("{:<18} {:>8.4}", t.task, t.ap);
    }
    println!("{:<18} {:>8.4}", "mAP", result.map);
    println!("{:<18} {:>8.4}", "recall", result.recall);
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, s: &Settings) -> anyhow::Result<()> {
    let seqs = a.sequences.iter().map(|d| dataset::load_sequence(d)).collect::<Result<Vec<_>, _>>()?;
    let set =
        seqs.iter().map(|q| Ok((q, mission::sequence_annotations(q)?))).collect::<Result<Vec<_>, DatasetError>>()?;
    if seqs.iter().any(|q| q.query != seqs[0].query) {
        bail!("sweep sequences must share one query");
    }
    let cfg = mission::mission_config(s, seqs[0].query.clone());
    let result = par_sweep(&set, &cfg, s.timing)?;
    let mut m = RunManifest::new("sweep", s);
    for (i, d) in a.sequences.iter().enumerate() {
        m.inputs.insert(format!("sequence_{i}"), d.display().to_string());
    }
    m.emit(&a.out, "sweep.csv", report::sweep_csv(&result).as_bytes())?;
    m.emit(&a.out, "sweep.json", &report::write_json(&result))?;
    m.finish(&a.out)?;
    println!("{:>5} {:>7} {:>9} {:>9}", "t_c", "mIoU", "FPS", "FPS_Edge");
    for r in &result.rows {
        println!("{:>5.2} {:>7.3} {:>9.3} {:>9.3}", r.t_c, r.miou, r.fps, r.fps_edge);
    }
    println!("t_c_opt {:.2}", result.t_c_opt);
    Ok(())
}

fn cmd_synth(a: &SynthArgs, seed: u64) -> anyhow::Result<()> {
    if let Some(n) = a.images {
        return synth_images(&a.out, n, seed);
    }
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| p.display().to_string())?;
            serde_json::from_str(&text).with_context(|| p.display().to_string())?
        }
        None => {
            let name = a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "synth".into());
            match a.preset {
                Preset::Linear => SynthSpec::linear(&name, 60, seed),
                Preset::Occlusion => SynthSpec::occlusion(&name, seed),
                Preset::Static => SynthSpec::stationary(&name, 20, seed),
            }
        }
    };
    if let Some(f) = a.frames {
        spec.frames = f;
    }
    let seq = dataset::synth_sequence(&a.out, &spec)?;
    println!("wrote {} frames to {}", seq.len(), a.out.display());
    Ok(())
}

fn synth_images(out: &Path, n: u64, seed: u64) -> anyhow::Result<()> {
    std::fs::create_dir_all(out.join("images"))?;
    let mut images = Vec::new();
    for i in 0..n {
        let scene = random_scene(seed, i, 160, 120, 6);
        let rel = format!("images/{i:06}.png");
        pngio::save_gray(&out.join(&rel), &scene.frame)?;
        images.push(SardImage { image: rel, width: Some(160), height: Some(120), persons: scene.persons });
    }
    dataset::write_sard_annotations(&out.join("annotations.json"), &images)?;
    println!("wrote {n} images to {}", out.display());
    Ok(())
}

fn cmd_protocol_check(a: &ProtocolCheckArgs) -> anyhow::Result<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.fixtures)
        .with_context(|| a.fixtures.display().to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .bin fixtures in {}", a.fixtures.display());
    }
    let mut failures = 0;
    for f in &files {
        let bytes = std::fs::read(f)?;
        let verdict = match decode(&bytes) {
            Ok(msg) if encode(&msg)? == bytes => "ok".to_string(),
            Ok(_) => "re-encoding differs".to_string(),
            Err(e) => format!("decode failed: {e}"),
        };
        if verdict != "ok" {
            failures += 1;
        }
        println!("{:<40} {verdict}", f.file_name().unwrap_or_default().to_string_lossy());
    }
    if let Some(addr) = &a.addr {
        let mut client = TcpBackend::connect(addr)?;
        for f in files.iter().filter(|f| f.to_string_lossy().ends_with("_request.bin")) {
            let expected_path = PathBuf::from(f.to_string_lossy().replace("_request.bin", "_response.bin"));
            let Ok(expected) = std::fs::read(&expected_path) else { continue };
            let request = std::fs::read(f)?;
            use skytrack_core::orchestrator::DetectionBackend;
            let reply = client.exchange(&request)?;
            let verdict = if reply == expected { "ok" } else { "reply differs" };
            if reply != expected {
                failures += 1;
            }
            println!("{:<40} {verdict} (live)", f.file_name().unwrap_or_default().to_string_lossy());
        }
    }
    if failures > 0 {
        return Err(anyhow::Error::new(WireError::BadPayload(format!("{failures} fixture check(s) failed"))));
    }
    Ok(())
}
