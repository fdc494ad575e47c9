use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Receiver;
use std::thread;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use mipilot::bench::{benchmark, ThroughputReport};
use mipilot::format::{read_model, read_session, write_model, write_session, Session};
use mipilot::link::{ElevonSink, QuadSink, Sink, UdpReceiver, UdpSender};
use mipilot::runtime::{decision_line, parse_sample_line, run_stream, DecisionBus, Pacing, StreamOptions};
use mipilot::train::train_parallel;
use mipilot_core::comlink::{decode, CommandMap, FrameEncoder};
use mipilot_core::filter::BandSpec;
use mipilot_core::stream::{Decision, PipelineConfig};
use mipilot_core::svm::KernelSpec;
use mipilot_core::synth::{generate_session, validate_session, SessionLayout, SynthSpec, SOURCE_FILTER_ORDER};
use mipilot_core::training::{evaluate, Classifier, Confusion, Mode, TrainConfig, TrainedModel, TRAIN_C_CAP};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_MIXING_SEED: u64 = 0x5EED;
const SEED_ENV: &str = "MIPILOT_SEED";

#[derive(Parser)]
#[command(
    name = "mipilot",
    version,
    about = "Motor-imagery EEG classification and command link"
)]
struct Cli {
    /// TOML file with per-subcommand defaults; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session file.
    Gen(GenArgs),
    /// Fit CSP and a classifier on a session.
    Train(TrainArgs),
    /// Score a model on a session.
    Eval(EvalArgs),
    /// Classify a sample stream and drive a command sink.
    Stream(StreamArgs),
    /// Measure streaming throughput.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, Deserialize, ValueEnum, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum ModeArg {
    TwoClass,
    FourClass,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::TwoClass => Mode::TwoClass,
            ModeArg::FourClass => Mode::FourClass,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, ValueEnum, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum SinkArg {
    None,
    Elevon,
    Quad,
}

#[derive(Args, Default)]
struct GenArgs {
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Number of task classes, 1 to 4.
    #[arg(long)]
    classes: Option<usize>,
    /// Trials per class.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    trial_seconds: Option<f64>,
    /// Rest after each trial; 0 disables rest segments.
    #[arg(long)]
    rest_seconds: Option<f64>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Variance ratio of the active source; higher is easier.
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Source band as LOW-HIGH in Hz.
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the mixing matrix; keep it fixed across train and test sessions.
    #[arg(long)]
    mixing_seed: Option<u64>,
}

#[derive(Args, Default)]
struct TrainArgs {
    #[arg(long)]
    session: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Defaults to the number of classes in the session.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// CSP filter pairs.
    #[arg(long)]
    m: Option<usize>,
    /// Polynomial kernel degree (four-class mode).
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    c_cap: Option<f64>,
    /// Band-pass as LOW-HIGH in Hz.
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    /// Window length in samples; defaults to one second.
    #[arg(long)]
    window: Option<usize>,
    /// Training window stride in samples; defaults to half a window.
    #[arg(long)]
    stride: Option<usize>,
    /// Filter causally instead of forward-backward.
    #[arg(long)]
    causal: bool,
}

#[derive(Args, Default)]
struct EvalArgs {
    #[arg(long)]
    session: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Window stride in samples; defaults to half a window.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    causal: bool,
}

#[derive(Args, Default)]
struct StreamArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Replay this session file; without it samples are read from stdin.
    #[arg(long)]
    session: Option<PathBuf>,
    /// Pace the replay at the sample rate.
    #[arg(long)]
    realtime: bool,
    #[arg(long)]
    stride: Option<usize>,
    /// Odd majority-vote window over decisions.
    #[arg(long)]
    smoothing: Option<usize>,
    #[arg(long, value_enum)]
    sink: Option<SinkArg>,
    /// Carry frames over UDP to this address.
    #[arg(long, value_name = "ADDR")]
    udp: Option<String>,
    /// Write decision lines here instead of stdout.
    #[arg(long)]
    decisions_out: Option<PathBuf>,
    /// Write sink lines here instead of stdout.
    #[arg(long)]
    sink_log: Option<PathBuf>,
    /// Print only the summary line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Default)]
struct BenchArgs {
    /// Benchmark this model; otherwise one is trained on synthetic data.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Seconds of signal to stream.
    #[arg(long)]
    seconds: Option<f64>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    realtime: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    gen: GenConfig,
    #[serde(default)]
    train: TrainFileConfig,
    #[serde(default)]
    eval: EvalConfig,
    #[serde(default)]
    stream: StreamConfig,
    #[serde(default)]
    bench: BenchConfig,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct GenConfig {
    out: Option<PathBuf>,
    classes: Option<usize>,
    trials: Option<usize>,
    trial_seconds: Option<f64>,
    rest_seconds: Option<f64>,
    channels: Option<usize>,
    sample_rate: Option<f64>,
    ratio: Option<f64>,
    noise: Option<f64>,
    band: Option<String>,
    seed: Option<u64>,
    mixing_seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct TrainFileConfig {
    session: Option<PathBuf>,
    out: Option<PathBuf>,
    mode: Option<ModeArg>,
    m: Option<usize>,
    degree: Option<u32>,
    c_cap: Option<f64>,
    band: Option<String>,
    order: Option<usize>,
    window: Option<usize>,
    stride: Option<usize>,
    causal: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct EvalConfig {
    session: Option<PathBuf>,
    model: Option<PathBuf>,
    stride: Option<usize>,
    causal: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct StreamConfig {
    model: Option<PathBuf>,
    session: Option<PathBuf>,
    realtime: Option<bool>,
    stride: Option<usize>,
    smoothing: Option<usize>,
    sink: Option<SinkArg>,
    udp: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct BenchConfig {
    model: Option<PathBuf>,
    mode: Option<ModeArg>,
    seconds: Option<f64>,
    channels: Option<usize>,
    sample_rate: Option<f64>,
    window: Option<usize>,
    stride: Option<usize>,
    realtime: Option<bool>,
    seed: Option<u64>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Flag, then config file, then `MIPILOT_SEED`, then the built-in default.
fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing --{flag} (or `{flag}` in the config file)"))
}

fn parse_band(text: &str, order: usize) -> Result<BandSpec> {
    let (lo, hi) = text
        .split_once('-')
        .ok_or_else(|| anyhow!("invalid spec: band `{text}` must look like LOW-HIGH"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .with_context(|| format!("invalid spec: band `{text}`"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .with_context(|| format!("invalid spec: band `{text}`"))?;
    BandSpec::new(lo, hi, order).map_err(|e| anyhow!("invalid spec: band `{text}`: {e}"))
}

fn load_session(path: &Path) -> Result<Session> {
    read_session(path).with_context(|| format!("reading session {}", path.display()))
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    read_model(path).with_context(|| format!("reading model {}", path.display()))
}

fn cmd_gen(a: GenArgs, c: GenConfig) -> Result<()> {
    let out = required(a.out.or(c.out), "out")?;
    let classes = a.classes.or(c.classes).unwrap_or(2);
    let trials = a.trials.or(c.trials).unwrap_or(20);
    let trial_s = a.trial_seconds.or(c.trial_seconds).unwrap_or(4.0);
    let rest_s = a.rest_seconds.or(c.rest_seconds).unwrap_or(2.0);
    let channels = a.channels.or(c.channels).unwrap_or(14);
    let sample_rate = a.sample_rate.or(c.sample_rate).unwrap_or(128.0);
    let ratio = a.ratio.or(c.ratio).unwrap_or(4.0);
    let seed = resolve_seed(a.seed, c.seed)?;
    let mixing_seed = a.mixing_seed.or(c.mixing_seed).unwrap_or(DEFAULT_MIXING_SEED);

    let mut spec = SynthSpec::motor_imagery(channels, classes, ratio, sample_rate, mixing_seed, seed)?;
    if let Some(band) = a.band.or(c.band) {
        spec = spec.with_source_band(parse_band(&band, SOURCE_FILTER_ORDER)?)?;
    }
    if let Some(noise) = a.noise.or(c.noise) {
        let profiles = spec.class_profiles().clone();
        let band = *spec.source_band();
        spec = SynthSpec::new(sample_rate, spec.mixing().clone(), profiles, noise, seed)?.with_source_band(band)?;
    }
    let layout = SessionLayout {
        trials_per_class: trials,
        trial_s,
        rest_s,
    };
    let trials = generate_session(&spec, &layout)?;
    validate_session(&trials)?;
    let session = Session::new(trials).ok_or_else(|| anyhow!("invalid spec: session would be empty"))?;
    write_session(&out, &session).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "labelled={} rest={} channels={} sample_rate={} seed={}",
        session.labelled(),
        session.trials.len() - session.labelled(),
        session.channels,
        session.sample_rate,
        seed
    );
    Ok(())
}

fn print_confusion(conf: &Confusion, classes: &[mipilot_core::signal::ClassId]) {
    print!("{:>9}", "true\\pred");
    for c in classes {
        print!("{:>8}", c.get());
    }
    println!("{:>10}", "recall");
    for &t in classes {
        print!("{:>9}", t.get());
        for &p in classes {
            print!("{:>8}", conf.counts[t.get() as usize - 1][p.get() as usize - 1]);
        }
        println!("{:>10.4}", conf.class_accuracy(t).unwrap_or(0.0));
    }
    for &c in classes {
        println!("acc_{}={:.6}", c, conf.class_accuracy(c).unwrap_or(0.0));
    }
    println!("acc={:.6}", conf.accuracy());
}

fn cmd_train(a: TrainArgs, c: TrainFileConfig) -> Result<()> {
    let session_path = required(a.session.or(c.session), "session")?;
    let out = required(a.out.or(c.out), "out")?;
    let session = load_session(&session_path)?;
    let found = mipilot_core::training::labelled_classes(&session.trials).len();
    let mode: Mode = match a.mode.or(c.mode) {
        Some(m) => m.into(),
        None => match found {
            2 => Mode::TwoClass,
            4 => Mode::FourClass,
            n => bail!(
                "{}: session has {n} classes; two_class needs 2 and four_class needs 4",
                session_path.display()
            ),
        },
    };
    if found != mode.class_count() {
        bail!(
            "{}: mode {} needs exactly {} classes, session has {}",
            session_path.display(),
            mode.name(),
            mode.class_count(),
            found
        );
    }
    let mut cfg = TrainConfig::new(mode, session.sample_rate);
    let order = a.order.or(c.order).unwrap_or(cfg.band.filter_order);
    if let Some(b) = a.band.or(c.band) {
        cfg.band = parse_band(&b, order)?;
    } else {
        cfg.band = BandSpec::new(cfg.band.low_hz, cfg.band.high_hz, order)?;
    }
    cfg.m = a.m.or(c.m).unwrap_or(cfg.m);
    if let Some(w) = a.window.or(c.window) {
        cfg.window_len = w;
        cfg.window_stride = (w / 2).max(1);
    }
    cfg.window_stride = a.stride.or(c.stride).unwrap_or(cfg.window_stride);
    cfg.zero_phase = !(a.causal || c.causal.unwrap_or(false));
    cfg.kernel = KernelSpec::new(a.degree.or(c.degree).unwrap_or(cfg.kernel.degree()))?;
    cfg.c_cap = a.c_cap.or(c.c_cap).unwrap_or(TRAIN_C_CAP);

    let model =
        train_parallel(&session.trials, &cfg).with_context(|| format!("training on {}", session_path.display()))?;
    write_model(&out, &model).with_context(|| format!("writing {}", out.display()))?;
    let conf = evaluate(&model, &session.trials, cfg.zero_phase, cfg.window_stride)?;
    println!(
        "mode={} channels={} m={} window={}",
        mode.name(),
        model.channels(),
        cfg.m,
        cfg.window_len
    );
    if let Classifier::Svm(svm) = &model.classifier {
        println!("support_vectors={}", svm.support_vector_count());
    }
    print_confusion(&conf, &model.classifier.classes());
    Ok(())
}

fn check_session_fits(model: &TrainedModel, session: &Session, path: &Path) -> Result<()> {
    if session.channels != model.channels() {
        bail!(
            "{}: model mismatch: model expects {} channels, session has {}",
            path.display(),
            model.channels(),
            session.channels
        );
    }
    if session.sample_rate != model.sample_rate {
        bail!(
            "{}: model mismatch: model sample rate {} Hz, session {} Hz",
            path.display(),
            model.sample_rate,
            session.sample_rate
        );
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs, c: EvalConfig) -> Result<()> {
    let session_path = required(a.session.or(c.session), "session")?;
    let model = load_model(&required(a.model.or(c.model), "model")?)?;
    let session = load_session(&session_path)?;
    check_session_fits(&model, &session, &session_path)?;
    let stride = a.stride.or(c.stride).unwrap_or((model.window_len / 2).max(1));
    let zero_phase = !(a.causal || c.causal.unwrap_or(false));
    let conf = evaluate(&model, &session.trials, zero_phase, stride)
        .with_context(|| format!("evaluating {}", session_path.display()))?;
    println!("windows={}", conf.total());
    print_confusion(&conf, &model.classifier.classes());
    Ok(())
}

fn command_map(model: &TrainedModel) -> CommandMap {
    match model.mode() {
        Mode::TwoClass => {
            let c = model.classifier.classes();
            CommandMap::two_class(c[0], c[1])
        }
        Mode::FourClass => CommandMap::four_class(),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write + Send>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout()),
    })
}

fn make_sink(kind: SinkArg) -> Option<Box<dyn Sink + Send>> {
    match kind {
        SinkArg::None => None,
        SinkArg::Elevon => Some(Box::new(ElevonSink::default())),
        SinkArg::Quad => Some(Box::new(QuadSink::default())),
    }
}

/// Encodes decisions into frames and hands them to the sink, directly or via
/// a datagram socket.
fn command_loop(
    rx: Receiver<Decision>,
    map: CommandMap,
    sink: Option<Box<dyn Sink + Send>>,
    udp: Option<String>,
    mut log: Box<dyn Write + Send>,
) -> Result<()> {
    let mut encoder = FrameEncoder::new();
    match udp {
        None => {
            let Some(mut sink) = sink else {
                for _ in rx {}
                return Ok(());
            };
            for d in rx {
                let frame = decode(&encoder.encode(&d, &map)?)?;
                if let Some(line) = sink
                    .deliver(&frame)
                    .with_context(|| format!("sink rejected frame seq={} at t={}", frame.seq, d.timestamp))?
                {
                    writeln!(log, "{line}")?;
                }
            }
        }
        Some(addr) => {
            let receiver = match sink {
                Some(sink) => Some((
                    UdpReceiver::bind(&addr).with_context(|| format!("binding {addr}"))?,
                    sink,
                )),
                None => None,
            };
            // Port 0 lets the receiver pick a free port.
            let target = match &receiver {
                Some((r, _)) => r.local_addr().with_context(|| format!("binding {addr}"))?.to_string(),
                None => addr.clone(),
            };
            let tx = UdpSender::connect(&target).with_context(|| format!("resolving {target}"))?;
            let done = AtomicBool::new(false);
            thread::scope(|s| -> Result<()> {
                let far_end = receiver.map(|(mut rx_sock, mut sink)| {
                    let done = &done;
                    let log = &mut log;
                    s.spawn(move || -> Result<()> {
                        loop {
                            match rx_sock.recv(Duration::from_millis(100))? {
                                Some(frame) => {
                                    if let Some(line) = sink
                                        .deliver(&frame)
                                        .with_context(|| format!("sink rejected frame seq={}", frame.seq))?
                                    {
                                        writeln!(log, "{line}")?;
                                    }
                                }
                                None if done.load(Ordering::Acquire) => return Ok(()),
                                None => {}
                            }
                        }
                    })
                });
                let mut result = Ok(());
                for d in rx {
                    if far_end.as_ref().is_some_and(|h| h.is_finished()) {
                        break;
                    }
                    if let Err(e) = encoder
                        .encode(&d, &map)
                        .map_err(anyhow::Error::from)
                        .and_then(|f| Ok(tx.send(&f)?))
                    {
                        result = Err(e);
                        break;
                    }
                }
                done.store(true, Ordering::Release);
                if let Some(h) = far_end {
                    h.join().expect("sink thread panicked")?;
                }
                result
            })?;
        }
    }
    log.flush()?;
    Ok(())
}

fn cmd_stream(a: StreamArgs, c: StreamConfig) -> Result<()> {
    let model = load_model(&required(a.model.or(c.model), "model")?)?;
    let mut cfg = PipelineConfig::for_model(&model);
    cfg.stride = a.stride.or(c.stride).unwrap_or(cfg.stride);
    cfg.smoothing = a.smoothing.or(c.smoothing).unwrap_or(cfg.smoothing);
    cfg.validate()?;
    let realtime = a.realtime || c.realtime.unwrap_or(false);
    let opts = StreamOptions {
        pacing: if realtime { Pacing::Realtime } else { Pacing::MaxSpeed },
        ..StreamOptions::default()
    };
    let sink_kind = a.sink.or(c.sink).unwrap_or(SinkArg::None);
    let udp = a.udp.or(c.udp);
    let map = command_map(&model);

    let mut bus = DecisionBus::new();
    let decisions = (!a.quiet).then(|| bus.subscribe());
    let commands = bus.subscribe_required();
    let mut decision_out = output(a.decisions_out.as_deref())?;
    let sink_out = output(a.sink_log.as_deref())?;
    let sink = make_sink(sink_kind);

    let session = match a.session.or(c.session) {
        Some(p) => {
            let s = load_session(&p)?;
            check_session_fits(&model, &s, &p)?;
            Some(s)
        }
        None => None,
    };
    let channels = model.channels();

    let (stats, printer, commander) = thread::scope(|s| {
        let printer = decisions.map(|rx| {
            s.spawn(move || -> io::Result<()> {
                for d in rx {
                    writeln!(decision_out, "{}", decision_line(&d))?;
                }
                decision_out.flush()
            })
        });
        let commander = s.spawn(move || command_loop(commands, map, sink, udp, sink_out));
        let stats = match &session {
            Some(sess) => {
                let src = sess
                    .trials
                    .iter()
                    .flat_map(|t| (0..t.len()).map(move |i| Ok(t.sample_at(i))));
                run_stream(src, &model, cfg, opts, bus)
            }
            None => {
                let src = io::BufReader::new(io::stdin())
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
                    .map(move |(n, l)| {
                        let l = l.map_err(|e| format!("stdin line {}: {e}", n + 1))?;
                        parse_sample_line(&l, channels).map_err(|e| format!("stdin line {}: {e}", n + 1))
                    });
                run_stream(src, &model, cfg, opts, bus)
            }
        };
        (
            stats,
            printer.map(|h| h.join().expect("printer panicked")),
            commander.join().expect("command thread panicked"),
        )
    });
    commander?;
    let stats = stats?;
    if let Some(p) = printer {
        p?;
    }
    println!(
        "rate={:.3},steady_rate={:.3},decisions={},holds={},samples={},wall_s={:.6}",
        stats.decisions_per_second(),
        stats.steady_rate(),
        stats.decisions,
        stats.holds,
        stats.samples,
        stats.wall.as_secs_f64()
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs, c: BenchConfig) -> Result<()> {
    let seconds = a.seconds.or(c.seconds).unwrap_or(10.0);
    let seed = resolve_seed(a.seed, c.seed)?;
    let realtime = a.realtime || c.realtime.unwrap_or(false);
    let (model, spec) = match a.model.or(c.model) {
        Some(p) => {
            let model = load_model(&p)?;
            let classes = model.classifier.classes().len();
            let spec = SynthSpec::motor_imagery(
                model.channels(),
                classes,
                4.0,
                model.sample_rate,
                DEFAULT_MIXING_SEED,
                seed,
            )?;
            (model, spec)
        }
        None => {
            let mode: Mode = a.mode.or(c.mode).unwrap_or(ModeArg::TwoClass).into();
            let channels = a.channels.or(c.channels).unwrap_or(14);
            let sample_rate = a.sample_rate.or(c.sample_rate).unwrap_or(128.0);
            let spec = SynthSpec::motor_imagery(
                channels,
                mode.class_count(),
                4.0,
                sample_rate,
                DEFAULT_MIXING_SEED,
                seed,
            )?;
            let layout = SessionLayout {
                trials_per_class: 10,
                trial_s: 4.0,
                rest_s: 0.0,
            };
            let mut cfg = TrainConfig::new(mode, sample_rate);
            if let Some(w) = a.window.or(c.window) {
                cfg.window_len = w;
                cfg.window_stride = (w / 2).max(1);
            }
            let model = train_parallel(&generate_session(&spec, &layout)?, &cfg)?;
            (model, spec)
        }
    };
    let mut cfg = PipelineConfig::for_model(&model);
    cfg.stride = a.stride.or(c.stride).unwrap_or(1);

    // Stream data from the next seed so it differs from any training data.
    let spec = spec.clone().with_seed(spec.seed().wrapping_add(1));
    let classes = spec.classes();
    let chunk_s = 5.0f64.min(seconds);
    let n_chunks = (seconds / chunk_s).ceil() as usize;
    let trials = (0..n_chunks)
        .map(|i| mipilot_core::synth::generate_trial(&spec, classes[i % classes.len()], chunk_s, i as u64))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let opts = StreamOptions {
        pacing: if realtime { Pacing::Realtime } else { Pacing::MaxSpeed },
        ..StreamOptions::default()
    };
    let report: ThroughputReport = benchmark(&model, cfg, &trials, opts)?;
    println!(
        "mode={} channels={} window={} stride={}",
        model.mode().name(),
        model.channels(),
        cfg.window_len,
        cfg.stride
    );
    if let Classifier::Svm(svm) = &model.classifier {
        println!("support_vectors={}", svm.support_vector_count());
    }
    println!("{report}");
    println!("{}", report.metrics_line());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(a) => cmd_gen(a, cfg.gen),
        Command::Train(a) => cmd_train(a, cfg.train),
        Command::Eval(a) => cmd_eval(a, cfg.eval),
        Command::Stream(a) => cmd_stream(a, cfg.stream),
        Command::Bench(a) => cmd_bench(a, cfg.bench),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // Output piped into something like `head` that closed early.
        Err(e)
            if e.chain().any(|c| {
                c.downcast_ref::<io::Error>()
                    .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
            }) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
