//! `dnncov`: generate data, train, profile, measure coverage, attack, diff.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, missing input file,
//! missing output directory), 2 data or format error.

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

mod inspect;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand};
use dnncov::attacks::{attack_suite, AttackConfig, AttackMethod};
use dnncov::dataset::{make_synthetic_dataset, SyntheticKind};
use dnncov::io::{self, FormatError, TraceWriter};
use dnncov::nn::{accuracy, train_sgd, Activation, TrainConfig};
use dnncov::profiler::profile_sharded;
use dnncov::{ActivationTrace, CoverageConfig, CoverageReport, CoverageState, Dataset, Model, NeuronProfile};
use tempfile::NamedTempFile;

#[derive(Parser)]
#[command(name = "dnncov", version, about = "Multi-granularity coverage for feed-forward networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-class dataset (blobs or moons).
    GenData(GenDataArgs),
    /// Train an MLP with mini-batch SGD.
    Train(TrainArgs),
    /// Record per-neuron [low, high] bounds over a training set.
    Profile(ProfileArgs),
    /// Measure coverage of a test suite and write a report.
    Cover(CoverArgs),
    /// Build an adversarial suite with FGSM or BIM.
    Attack(AttackArgs),
    /// Per-criterion deltas between two bound reports.
    Diff(DiffArgs),
    /// Pretty-print any dnncov artifact.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value = "blobs")]
    kind: SyntheticKind,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the last `--test-fraction` of the records here; `--out`
    /// then receives the rest.
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25, requires = "test_out")]
    test_fraction: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Start from this model instead of a fresh initialisation.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Hidden layer widths for a fresh model.
    #[arg(long, value_delimiter = ',', default_value = "16,16", conflicts_with = "init")]
    hidden: Vec<usize>,
    #[arg(long, default_value = "relu", conflicts_with = "init")]
    activation: Activation,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// Seeds both the initialisation and the batch shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    shards: u32,
}

#[derive(Args)]
struct CoverArgs {
    /// Required unless --trace-in supplies the activations.
    #[arg(long, required_unless_present = "trace_in")]
    model: Option<PathBuf>,
    #[arg(long)]
    profile: PathBuf,
    /// Test suite; repeat to cover the concatenation.
    #[arg(long, required_unless_present = "trace_in", conflicts_with = "trace_in")]
    data: Vec<PathBuf>,
    /// Read activations from a trace stream instead of running the model.
    #[arg(long)]
    trace_in: Option<PathBuf>,
    #[arg(long, default_value_t = CoverageConfig::default().k_sections)]
    k_sections: u32,
    #[arg(long, default_value_t = CoverageConfig::default().top_k)]
    top_k: u32,
    #[arg(long, default_value_t = CoverageConfig::default().nc_threshold)]
    nc_threshold: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    shards: u32,
    /// Also write the computed activations as a trace stream.
    #[arg(long, conflicts_with = "trace_in")]
    trace_out: Option<PathBuf>,
    /// Also write the raw coverage state.
    #[arg(long)]
    state_out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "fgsm")]
    method: AttackMethod,
    #[arg(long, default_value_t = AttackConfig::default().epsilon)]
    epsilon: f32,
    #[arg(long, default_value_t = AttackConfig::default().alpha)]
    alpha: f32,
    #[arg(long, default_value_t = AttackConfig::default().iterations)]
    iterations: u32,
    #[arg(long, default_value_t = AttackConfig::default().clip_min, allow_negative_numbers = true)]
    clip_min: f32,
    #[arg(long, default_value_t = AttackConfig::default().clip_max, allow_negative_numbers = true)]
    clip_max: f32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    extended: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    path: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Profile(a) => profile(a),
        Command::Cover(a) => cover(a),
        Command::Attack(a) => attack(a),
        Command::Diff(a) => diff(a),
        Command::Inspect(a) => inspect::run(&a.path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::Data(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

// ---------------------------------------------------------------------------
// Paths

fn check_input(path: &Path) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("input file {} does not exist", path.display())))
    }
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn check_output(path: &Path) -> Outcome {
    if path.is_dir() {
        return Err(Failure::Usage(format!("output path {} is a directory", path.display())));
    }
    let dir = parent_dir(path);
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("output directory {} does not exist", dir.display())))
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| data_err(path, e))
}

/// Writes through a temp file in the target directory and renames it into
/// place, so a failure never leaves a partial file at `path`.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<&mut File>) -> Result<(), FormatError>) -> Outcome {
    let mut tmp = NamedTempFile::new_in(parent_dir(path)).map_err(|e| data_err(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(|e| data_err(path, e))?;
        w.flush().map_err(|e| data_err(path, e))?;
    }
    tmp.persist(path).map_err(|e| data_err(path, e.error))?;
    Ok(())
}

pub(crate) fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    io::read_dataset(&mut open(path)?).map_err(|e| data_err(path, e))
}

pub(crate) fn load_model(path: &Path) -> Result<Model, Failure> {
    io::read_model(&mut open(path)?).map_err(|e| data_err(path, e))
}

pub(crate) fn load_profile(path: &Path) -> Result<NeuronProfile, Failure> {
    io::read_profile(&mut open(path)?).map_err(|e| data_err(path, e))
}

pub(crate) fn load_report(path: &Path) -> Result<CoverageReport, Failure> {
    io::read_report(&mut open(path)?).map_err(|e| data_err(path, e))
}

// ---------------------------------------------------------------------------
// Subcommands

fn gen_data(a: GenDataArgs) -> Outcome {
    check_output(&a.out)?;
    if let Some(t) = &a.test_out {
        check_output(t)?;
        if !(0.0..=1.0).contains(&a.test_fraction) {
            return Err(Failure::Usage(format!("--test-fraction must lie in [0, 1], got {}", a.test_fraction)));
        }
    }
    let data = make_synthetic_dataset(a.kind, a.n, a.seed).map_err(|e| Failure::Data(e.to_string()))?;
    match &a.test_out {
        None => {
            write_atomic(&a.out, |w| io::write_dataset(w, &data))?;
            say!("records\t{}", data.len());
        }
        Some(test_out) => {
            let test_count = (a.n as f64 * a.test_fraction).round() as usize;
            let (train, test) = data.split_tail(test_count);
            write_atomic(&a.out, |w| io::write_dataset(w, &train))?;
            write_atomic(test_out, |w| io::write_dataset(w, &test))?;
            say!("train_records\t{}", train.len());
            say!("test_records\t{}", test.len());
        }
    }
    Ok(())
}

fn train(a: TrainArgs) -> Outcome {
    check_input(&a.data)?;
    if let Some(init) = &a.init {
        check_input(init)?;
    }
    check_output(&a.out)?;
    let data = load_dataset(&a.data)?;
    let model = match &a.init {
        Some(p) => load_model(p)?,
        None => Model::init(data.input_size(), &a.hidden, data.num_classes() as usize, a.activation, a.seed)
            .map_err(|e| Failure::Usage(e.to_string()))?,
    };
    let cfg = TrainConfig { epochs: a.epochs, lr: a.lr, batch_size: a.batch_size, seed: a.seed };
    let (trained, report) = train_sgd(&model, &data, &cfg).map_err(|e| Failure::Data(e.to_string()))?;
    write_atomic(&a.out, |w| io::write_model(w, &trained))?;
    let final_loss = report.epoch_losses.last().copied().unwrap_or(report.initial_loss);
    say!("initial_loss\t{:.6}", report.initial_loss);
    say!("final_loss\t{final_loss:.6}");
    say!("train_accuracy\t{:.4}", report.final_accuracy);
    say!("model_id\t{}", trained.model_id());
    Ok(())
}

fn profile(a: ProfileArgs) -> Outcome {
    check_input(&a.model)?;
    check_input(&a.data)?;
    check_output(&a.out)?;
    let model = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let p = profile_sharded(&model, &data, a.shards as usize).map_err(|e| data_err(&a.data, e))?;
    write_atomic(&a.out, |w| io::write_profile(w, &p))?;
    say!("neurons\t{}", p.neuron_count());
    say!("inputs\t{}", p.count());
    Ok(())
}

/// Feeds `n` traces into copies of `empty`, split into `shards` contiguous
/// chunks run on their own threads, then merges the chunks in order.
fn accumulate<F>(
    empty: &CoverageState,
    n: usize,
    shards: usize,
    keep: bool,
    trace: F,
) -> Result<(CoverageState, Vec<ActivationTrace>), Failure>
where
    F: Fn(usize) -> Result<ActivationTrace, Failure> + Sync,
{
    let run = |start: usize, end: usize| -> Result<(CoverageState, Vec<ActivationTrace>), Failure> {
        let mut state = empty.clone();
        let mut kept = Vec::new();
        for i in start..end {
            let t = trace(i)?;
            state.update(&t).map_err(|e| Failure::Data(e.to_string()))?;
            if keep {
                kept.push(t);
            }
        }
        Ok((state, kept))
    };
    let shards = shards.clamp(1, n.max(1));
    let chunk = n.div_ceil(shards).max(1);
    let parts = if shards == 1 {
        vec![run(0, n)]
    } else {
        thread::scope(|s| {
            let run = &run;
            let handles: Vec<_> =
                (0..n).step_by(chunk).map(|start| s.spawn(move || run(start, (start + chunk).min(n)))).collect();
            handles.into_iter().map(|h| h.join().expect("coverage worker panicked")).collect::<Vec<_>>()
        })
    };
    let mut total = empty.clone();
    let mut traces = Vec::new();
    for part in parts {
        let (state, kept) = part?;
        total.merge_from(&state).map_err(|e| Failure::Data(e.to_string()))?;
        traces.extend(kept);
    }
    Ok((total, traces))
}

fn print_report(report: &CoverageReport) {
    for (name, value) in report.criteria() {
        if name == "TKNP" {
            say!("{name}\t{}", report.tknp);
        } else {
            say!("{name}\t{value:.4}");
        }
    }
}

fn cover(a: CoverArgs) -> Outcome {
    check_input(&a.profile)?;
    for p in a.model.iter().chain(&a.data).chain(&a.trace_in) {
        check_input(p)?;
    }
    for p in std::iter::once(&a.out).chain(&a.trace_out).chain(&a.state_out) {
        check_output(p)?;
    }
    let config = CoverageConfig { k_sections: a.k_sections, top_k: a.top_k, nc_threshold: a.nc_threshold };
    let profile = load_profile(&a.profile)?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let bind = |e: dnncov::coverage::CoverageError| match e {
        dnncov::coverage::CoverageError::Config(m) => Failure::Usage(m),
        other => Failure::Data(other.to_string()),
    };
    let empty = match &model {
        Some(m) => CoverageState::new(m, &profile, config).map_err(bind)?,
        None => CoverageState::from_profile(&profile, config).map_err(bind)?,
    };
    let shards = a.shards as usize;

    let state = if let Some(path) = &a.trace_in {
        let (header, traces) = io::read_traces(open(path)?).map_err(|e| data_err(path, e))?;
        if header.model_id != profile.model_id() {
            return Err(data_err(
                path,
                format!(
                    "trace stream model_id {} does not match profile model_id {}",
                    header.model_id,
                    profile.model_id()
                ),
            ));
        }
        let (state, _) = accumulate(&empty, traces.len(), shards, false, |i| Ok(traces[i].clone()))?;
        state
    } else {
        let model = model.as_ref().expect("clap requires --model without --trace-in");
        let sets = a.data.iter().map(|p| load_dataset(p)).collect::<Result<Vec<_>, _>>()?;
        let suite = if sets.len() == 1 {
            sets.into_iter().next().expect("one dataset")
        } else {
            Dataset::concat(&sets.iter().collect::<Vec<_>>()).map_err(|e| Failure::Data(e.to_string()))?
        };
        let keep = a.trace_out.is_some();
        let (state, traces) = accumulate(&empty, suite.len(), shards, keep, |i| {
            model.capture(suite.id(i), suite.input(i)).map_err(|e| Failure::Data(format!("record {i}: {e}")))
        })?;
        if let Some(path) = &a.trace_out {
            write_atomic(path, |w| {
                let header = io::TraceHeader {
                    model_id: model.model_id(),
                    layer_sizes: model.layer_sizes().iter().map(|&s| s as u32).collect(),
                    count: traces.len() as u64,
                };
                let mut tw = TraceWriter::new(w, header)?;
                for t in &traces {
                    tw.write(t)?;
                }
                tw.finish().map(drop)
            })?;
        }
        state
    };

    let report = state.report();
    write_atomic(&a.out, |w| io::write_report(w, &report))?;
    if let Some(path) = &a.state_out {
        write_atomic(path, |w| io::write_state(w, &state))?;
    }
    print_report(&report);
    Ok(())
}

fn attack(a: AttackArgs) -> Outcome {
    check_input(&a.model)?;
    check_input(&a.data)?;
    check_output(&a.out)?;
    let cfg = AttackConfig {
        epsilon: a.epsilon,
        alpha: a.alpha,
        iterations: a.iterations,
        clip_min: a.clip_min,
        clip_max: a.clip_max,
    };
    cfg.validate(a.method).map_err(|e| Failure::Usage(e.to_string()))?;
    let model = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let adv = attack_suite(&model, &data, a.method, &cfg).map_err(|e| data_err(&a.data, e))?;
    let clean_acc = accuracy(&model, &data).map_err(|e| data_err(&a.data, e))?;
    let adv_acc = accuracy(&model, &adv).map_err(|e| data_err(&a.data, e))?;
    write_atomic(&a.out, |w| io::write_dataset(w, &adv))?;
    say!("records\t{}", adv.len());
    say!("clean_accuracy\t{clean_acc:.4}");
    say!("adversarial_accuracy\t{adv_acc:.4}");
    Ok(())
}

fn diff(a: DiffArgs) -> Outcome {
    check_input(&a.base)?;
    check_input(&a.extended)?;
    let base = load_report(&a.base)?;
    let extended = load_report(&a.extended)?;
    let delta = dnncov::coverage::diff(&base, &extended).map_err(|e| Failure::Data(e.to_string()))?;
    say!("criterion\tbase\textended\tdelta");
    let rows = base.criteria().into_iter().zip(extended.criteria()).zip(delta.criteria());
    for (((name, b), (_, e)), (_, d)) in rows {
        if name == "TKNP" {
            say!("{name}\t{}\t{}\t{:+}", base.tknp, extended.tknp, delta.tknp);
        } else {
            say!("{name}\t{b:.4}\t{e:.4}\t{d:+.4}");
        }
    }
    say!("inputs\t{}\t{}\t{:+}", base.inputs_seen, extended.inputs_seen, delta.inputs_seen);
    Ok(())
}
