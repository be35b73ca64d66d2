//! Command-line front end: assembler toolchain, VM runner, training,
//! classification, bearing monitoring and geometry sweeps.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/file error,
//! 3 assertion or comparison failure.

use clap::{Args, Parser, Subcommand};
use hdc::algos::bearing::{
    bearing_encode, bearing_monitor, bearing_program, bearing_stream, calibrate_bearing,
    BearingParams, DEFAULT_HALF_LIFE_HOURS,
};
use hdc::algos::emg::{emg_encode, emg_program, emg_stream, EmgParams};
use hdc::algos::lang::{fit_length, lang_encode, lang_program, lang_stream, to_symbols, LangParams};
use hdc::algos::{run_program, train_prototypes, App, Bundling};
use hdc::am::AssociativeMemory;
use hdc::asm::{assemble, disassemble, Program};
use hdc::datasets::{
    load_emg_csv, load_ims_bearing, load_text_corpus, synth_bearing, synth_emg, synth_lang,
    BearingRecording, EmgRecording, TextCorpus,
};
use hdc::encoder::DatapathConfig;
use hdc::hv::{Geometry, HyperVector};
use hdc::seeds::SeedConfig;
use hdc::vm::{InputStream, Machine, Status};
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_ASSERT: u8 = 3;

struct CliError {
    code: u8,
    msg: String,
}

type CliResult<T = ()> = Result<T, CliError>;

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError { code: EXIT_DATA, msg: e.to_string() }
}

fn usage_err(msg: impl Into<String>) -> CliError {
    CliError { code: EXIT_USAGE, msg: msg.into() }
}

fn assert_err(msg: impl Into<String>) -> CliError {
    CliError { code: EXIT_ASSERT, msg: msg.into() }
}

#[derive(Parser)]
#[command(name = "hdc", version, about = "Binary-spatter-code accelerator model toolchain")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Hypervector dimension D.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Vector fold K (parts per hypervector).
    #[arg(long, global = true)]
    fold: Option<usize>,
    /// Associative-memory rows (last row is the search register).
    #[arg(long, global = true)]
    am_rows: Option<usize>,
    /// Seed-constants file (key=value); HDC_SEED_FILE overrides the default path.
    #[arg(long, global = true)]
    seed_file: Option<PathBuf>,
    /// key=value config file; precedence: flags > config > defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Suppress nondeterministic output (accepted for compatibility;
    /// all emitted artifacts are already deterministic).
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a program text file into a binary program image.
    Asm { input: PathBuf, output: PathBuf },
    /// Disassemble a binary program image to stdout.
    Disasm { input: PathBuf },
    /// Print the generated microcode of an application (lang|emg|bearing).
    Gen { app: String },
    /// Execute a binary program and report the outcome as JSON.
    Run {
        program: PathBuf,
        /// Raw input stream: one byte per sample, low 7 bits used.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Associative-memory image to preload.
        #[arg(long)]
        am_image: Option<PathBuf>,
        /// Write an instruction trace CSV to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000_000)]
        max_cycles: u64,
    },
    /// Train class prototypes and write an associative-memory image.
    Train {
        /// Application: lang | emg | bearing.
        app: String,
        /// Dataset path, or "synth" for the built-in generator.
        dataset: String,
        /// Output associative-memory image.
        output: PathBuf,
        #[command(flatten)]
        data: DataOpts,
    },
    /// Classify a test set against a trained memory image.
    Classify {
        app: String,
        dataset: String,
        am_image: PathBuf,
        /// Execution path: vm (generated microcode) or reference.
        #[arg(long, default_value = "vm")]
        via: String,
        /// Run both paths and fail (exit 3) on any decision mismatch.
        #[arg(long)]
        compare: bool,
        /// CSV output path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Normalization factor for bearing streams (from `train bearing`).
        #[arg(long)]
        norm_factor: Option<f64>,
        #[command(flatten)]
        data: DataOpts,
    },
    /// Monitor a bearing vibration stream and emit a distance-trend CSV.
    BearingMonitor {
        /// IMS-format directory, or "synth" for the drift generator.
        dataset: String,
        /// Raw-file column to monitor (IMS datasets).
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Calibration window length in hours.
        #[arg(long, default_value_t = 24.0)]
        calibrate_hours: f64,
        /// EMA half-life in hours.
        #[arg(long, default_value_t = DEFAULT_HALF_LIFE_HOURS)]
        half_life: f64,
        /// Alarm threshold on the filtered distance
        /// (default: calibration mean + 5 standard deviations).
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Synthetic generator: record count.
        #[arg(long, default_value_t = 288)]
        records: usize,
        /// Synthetic generator: drift onset in hours.
        #[arg(long, default_value_t = 36.0)]
        drift_at: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Sweep dimensions and folds; report accuracy and cycles per item.
    Bench {
        app: String,
        #[arg(long, default_value = "512,2048,8192", value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value = "1,2,4", value_delimiter = ',')]
        folds: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Shared dataset/split options for train and classify.
#[derive(Args, Clone)]
struct DataOpts {
    /// Generator / sampling seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Synthetic classes (lang: languages, emg: gestures).
    #[arg(long, default_value_t = 4)]
    classes: usize,
    /// Synthetic training items per class.
    #[arg(long, default_value_t = 100)]
    synth_train: usize,
    /// Synthetic test items per class.
    #[arg(long, default_value_t = 50)]
    synth_test: usize,
    /// Sentence length for synthetic text.
    #[arg(long, default_value_t = 100)]
    sentence_len: usize,
    /// n-gram order for text classification.
    #[arg(long, default_value_t = 4)]
    ngram: usize,
    /// Real corpora: every n-th item per class goes to the test set.
    #[arg(long, default_value_t = 5)]
    test_every: usize,
    /// Calibration window in hours (bearing training).
    #[arg(long, default_value_t = 24.0)]
    calibrate_hours: f64,
    /// Raw-file column (IMS bearing datasets).
    #[arg(long, default_value_t = 0)]
    channel: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version output is a success, not a usage error.
            use clap::error::ErrorKind::*;
            let _ = e.print();
            return match e.kind() {
                DisplayHelp | DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

// -------------------------------------------------------------- config

struct Resolved {
    geometry: Geometry,
    seeds: SeedConfig,
}

fn resolve(opts: &GlobalOpts) -> CliResult<Resolved> {
    let mut dim = 2048usize;
    let mut fold = 1usize;
    let mut am_rows = 32usize;
    let mut seed_file: Option<PathBuf> = None;

    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path).map_err(data_err)?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| data_err(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let parse_usize = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| data_err(format!("{}:{}: bad value '{v}'", path.display(), i + 1)))
            };
            match key {
                "dim" => dim = parse_usize(value)?,
                "fold" => fold = parse_usize(value)?,
                "am_rows" => am_rows = parse_usize(value)?,
                "seed_file" => seed_file = Some(PathBuf::from(value)),
                other => {
                    return Err(data_err(format!(
                        "{}:{}: unknown config key '{other}'",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
    }

    let geometry = Geometry::new(
        opts.dim.unwrap_or(dim),
        opts.fold.unwrap_or(fold),
        opts.am_rows.unwrap_or(am_rows),
    )
    .map_err(|e| usage_err(e.to_string()))?;

    let seed_path = opts
        .seed_file
        .clone()
        .or_else(|| std::env::var_os("HDC_SEED_FILE").map(PathBuf::from))
        .or(seed_file);
    let seeds = match seed_path {
        Some(p) => SeedConfig::load(&p).map_err(data_err)?,
        None => SeedConfig::default(),
    };
    Ok(Resolved { geometry, seeds })
}

fn datapath(r: &Resolved) -> CliResult<DatapathConfig> {
    DatapathConfig::new(r.geometry, r.seeds.clone()).map_err(data_err)
}

fn parse_app(s: &str) -> CliResult<App> {
    App::parse(s).ok_or_else(|| usage_err(format!("unknown application '{s}' (lang|emg|bearing)")))
}

fn write_output(path: &Option<PathBuf>, content: &str) -> CliResult {
    match path {
        Some(p) => std::fs::write(p, content).map_err(data_err),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// ------------------------------------------------------------ dispatch

fn dispatch(cli: Cli) -> CliResult {
    let global = cli.global;
    match cli.command {
        Command::Asm { input, output } => cmd_asm(&input, &output),
        Command::Disasm { input } => cmd_disasm(&input),
        Command::Gen { app } => cmd_gen(&global, &app),
        Command::Run { program, input, am_image, trace, max_cycles } => {
            cmd_run(&global, &program, input, am_image, trace, max_cycles)
        }
        Command::Train { app, dataset, output, data } => {
            cmd_train(&global, &app, &dataset, &output, &data)
        }
        Command::Classify { app, dataset, am_image, via, compare, out, norm_factor, data } => {
            cmd_classify(&global, &app, &dataset, &am_image, &via, compare, &out, norm_factor, &data)
        }
        Command::BearingMonitor {
            dataset,
            channel,
            calibrate_hours,
            half_life,
            threshold,
            out,
            records,
            drift_at,
            seed,
        } => cmd_bearing_monitor(
            &global,
            &dataset,
            channel,
            calibrate_hours,
            half_life,
            threshold,
            &out,
            records,
            drift_at,
            seed,
        ),
        Command::Bench { app, dims, folds, seed, out } => {
            cmd_bench(&global, &app, &dims, &folds, seed, &out)
        }
    }
}

fn cmd_asm(input: &Path, output: &Path) -> CliResult {
    let text = std::fs::read_to_string(input).map_err(data_err)?;
    let program = assemble(&text).map_err(data_err)?;
    let mut bytes = Vec::new();
    program.write_binary(&mut bytes).map_err(data_err)?;
    std::fs::write(output, bytes).map_err(data_err)?;
    eprintln!("{} instructions -> {}", program.len(), output.display());
    Ok(())
}

fn cmd_disasm(input: &Path) -> CliResult {
    let bytes = std::fs::read(input).map_err(data_err)?;
    let program = Program::read_binary(&bytes[..]).map_err(data_err)?;
    print!("{}", disassemble(&program).map_err(data_err)?);
    Ok(())
}

fn cmd_gen(global: &GlobalOpts, app: &str) -> CliResult {
    let r = resolve(global)?;
    let app = parse_app(app)?;
    let text = hdc::algos::generate_program(app, r.geometry).map_err(data_err)?;
    print!("{text}");
    Ok(())
}

fn cmd_run(
    global: &GlobalOpts,
    program: &Path,
    input: Option<PathBuf>,
    am_image: Option<PathBuf>,
    trace: Option<PathBuf>,
    max_cycles: u64,
) -> CliResult {
    let r = resolve(global)?;
    let bytes = std::fs::read(program).map_err(data_err)?;
    let program = Program::read_binary(&bytes[..]).map_err(data_err)?;
    let mut machine = Machine::new(datapath(&r)?, &program);

    if let Some(path) = am_image {
        let bytes = std::fs::read(&path).map_err(data_err)?;
        let am = AssociativeMemory::load(&bytes[..]).map_err(data_err)?;
        if am.geometry() != r.geometry {
            return Err(data_err(format!(
                "memory image geometry {:?} does not match configured {:?}",
                am.geometry(),
                r.geometry
            )));
        }
        for addr in 0..r.geometry.search_row() {
            for part in 0..r.geometry.k {
                let v = am.read(addr, part).map_err(data_err)?.clone();
                machine.host_write(addr, part, v).map_err(data_err)?;
            }
        }
    }

    let samples: Vec<u8> = match input {
        Some(path) => std::fs::read(&path)
            .map_err(data_err)?
            .into_iter()
            .map(|b| b & 0x7f)
            .collect(),
        None => Vec::new(),
    };
    let mut stream = InputStream::new(samples).map_err(data_err)?;

    if trace.is_some() {
        machine.enable_trace();
    }
    let status = machine.run(&mut stream, max_cycles).map_err(|e| assert_err(e.to_string()))?;
    if let Some(path) = trace {
        std::fs::write(&path, machine.trace_csv()).map_err(data_err)?;
    }

    let report = json!({
        "status": match status {
            Status::Halted => "halted",
            Status::Interrupted => "interrupted",
            Status::Running => "running",
        },
        "cycles": machine.cycles,
        "interrupts": machine.interrupts.iter().map(|i| json!({
            "cycle": i.cycle,
            "pc": i.pc,
            "index": i.search.index,
            "distance": i.search.distance,
        })).collect::<Vec<_>>(),
        "search": machine.last_search.map(|s| json!({
            "index": s.index,
            "distance": s.distance,
        })),
        "stream_remaining": stream.remaining(),
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(data_err)?);
    Ok(())
}

// ------------------------------------------------------------ datasets

enum LoadedData {
    Lang { train: Vec<(usize, Vec<u8>)>, test: Vec<(usize, Vec<u8>)>, classes: usize },
    Emg { train: Vec<(usize, Vec<Vec<u8>>)>, test: Vec<(usize, Vec<Vec<u8>>)>, classes: usize },
    Bearing { records: Vec<(f64, Vec<f64>)> },
}

fn corpus_to_symbols(corpus: &TextCorpus) -> CliResult<Vec<(usize, Vec<u8>)>> {
    corpus
        .sentences
        .iter()
        .map(|(l, s)| Ok((*l, to_symbols(s).map_err(data_err)?)))
        .collect()
}

fn split_per_class<T: Clone>(items: &[(usize, T)], test_every: usize) -> (Vec<(usize, T)>, Vec<(usize, T)>) {
    let classes = items.iter().map(|(c, _)| c + 1).max().unwrap_or(0);
    let mut per = vec![0usize; classes];
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, item) in items {
        let i = per[*c];
        per[*c] += 1;
        if test_every > 0 && i % test_every == test_every - 1 {
            test.push((*c, item.clone()));
        } else {
            train.push((*c, item.clone()));
        }
    }
    (train, test)
}

fn load_data(app: App, dataset: &str, data: &DataOpts) -> CliResult<LoadedData> {
    match app {
        App::Lang => {
            let (train, test, classes) = if dataset == "synth" {
                let corpus = synth_lang(
                    data.classes,
                    data.synth_train + data.synth_test,
                    data.sentence_len,
                    data.seed,
                );
                let items = corpus_to_symbols(&corpus)?;
                let mut per = vec![0usize; data.classes];
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (c, s) in items {
                    per[c] += 1;
                    if per[c] <= data.synth_train {
                        train.push((c, s));
                    } else {
                        test.push((c, s));
                    }
                }
                (train, test, data.classes)
            } else {
                let corpus = load_text_corpus(Path::new(dataset)).map_err(data_err)?;
                let classes = corpus.labels.len();
                let items = corpus_to_symbols(&corpus)?;
                let (train, test) = split_per_class(&items, data.test_every);
                (train, test, classes)
            };
            // The microcode consumes a fixed number of symbols per
            // sentence; normalize every item to that length so the VM
            // and reference paths see identical streams.
            let fit = |v: Vec<(usize, Vec<u8>)>| -> Vec<(usize, Vec<u8>)> {
                v.into_iter().map(|(c, s)| (c, fit_length(&s, data.sentence_len))).collect()
            };
            Ok(LoadedData::Lang { train: fit(train), test: fit(test), classes })
        }
        App::Emg => {
            let (rec, classes) = if dataset == "synth" {
                let rec: EmgRecording =
                    synth_emg(data.classes, data.synth_train + data.synth_test, data.seed);
                (rec, data.classes)
            } else {
                let rec = load_emg_csv(Path::new(dataset)).map_err(data_err)?;
                let classes = rec.windows.iter().map(|(c, _)| c + 1).max().unwrap_or(0);
                (rec, classes)
            };
            let (train, test) = if dataset == "synth" {
                let mut per = vec![0usize; classes];
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (c, w) in rec.windows {
                    per[c] += 1;
                    if per[c] <= data.synth_train {
                        train.push((c, w));
                    } else {
                        test.push((c, w));
                    }
                }
                (train, test)
            } else {
                split_per_class(&rec.windows, data.test_every)
            };
            Ok(LoadedData::Emg { train, test, classes })
        }
        App::Bearing => {
            let rec: BearingRecording = if dataset == "synth" {
                synth_bearing(288, 36.0, data.seed)
            } else {
                load_ims_bearing(Path::new(dataset), data.channel).map_err(data_err)?
            };
            Ok(LoadedData::Bearing { records: rec.records })
        }
    }
}

// ------------------------------------------------------ train/classify

fn write_am_image(
    geometry: Geometry,
    prototypes: &[Vec<HyperVector>],
    output: &Path,
) -> CliResult {
    let mut am = AssociativeMemory::new(geometry);
    for (addr, parts) in prototypes.iter().enumerate() {
        for (part, v) in parts.iter().enumerate() {
            am.write(addr, part, v.clone()).map_err(data_err)?;
        }
    }
    let mut bytes = Vec::new();
    am.dump(&mut bytes).map_err(data_err)?;
    std::fs::write(output, bytes).map_err(data_err)?;
    Ok(())
}

/// Order-preserving parallel map over items.
fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let chunk = items.len().div_ceil(workers).max(1);
    let chunks: Vec<Vec<T>> = {
        let mut chunks = Vec::new();
        let mut it = items.into_iter();
        loop {
            let c: Vec<T> = it.by_ref().take(chunk).collect();
            if c.is_empty() {
                break;
            }
            chunks.push(c);
        }
        chunks
    };
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|c| scope.spawn(move || c.into_iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn cmd_train(
    global: &GlobalOpts,
    app: &str,
    dataset: &str,
    output: &Path,
    data: &DataOpts,
) -> CliResult {
    let r = resolve(global)?;
    let cfg = datapath(&r)?;
    let app = parse_app(app)?;
    match load_data(app, dataset, data)? {
        LoadedData::Lang { train, classes, .. } => {
            let n = data.ngram;
            let enc = par_map(train, |(c, sym)| {
                lang_encode(&sym, n, &cfg, Bundling::FullPrecision).map(|v| (c, v))
            });
            let enc: Result<Vec<_>, _> = enc.into_iter().collect();
            let protos = train_prototypes(&enc.map_err(data_err)?).map_err(data_err)?;
            write_am_image(r.geometry, &protos, output)?;
            eprintln!("{classes} language prototypes -> {}", output.display());
        }
        LoadedData::Emg { train, classes, .. } => {
            let enc = par_map(train, |(c, w)| {
                emg_encode(&w, &cfg, Bundling::FullPrecision).map(|v| (c, v))
            });
            let enc: Result<Vec<_>, _> = enc.into_iter().collect();
            let protos = train_prototypes(&enc.map_err(data_err)?).map_err(data_err)?;
            write_am_image(r.geometry, &protos, output)?;
            eprintln!("{classes} gesture prototypes -> {}", output.display());
        }
        LoadedData::Bearing { records } => {
            let calib: Vec<Vec<f64>> = records
                .iter()
                .filter(|(h, _)| *h <= data.calibrate_hours)
                .map(|(_, s)| s.clone())
                .collect();
            let model = calibrate_bearing(&calib, &cfg, data.seed).map_err(data_err)?;
            let complement: Vec<HyperVector> =
                model.reference_vector.iter().map(|v| v.complement()).collect();
            let protos = vec![model.reference_vector.clone(), complement];
            write_am_image(r.geometry, &protos, output)?;
            println!(
                "{}",
                json!({
                    "norm_factor": model.norm_factor,
                    "calibration_records": calib.len(),
                    "image": output.display().to_string(),
                })
            );
        }
    }
    Ok(())
}

struct Row {
    item: usize,
    truth: usize,
    pred: usize,
    distance: usize,
    cycles: u64,
}

fn nearest_prototype(parts: &[HyperVector], protos: &[Vec<HyperVector>]) -> CliResult<(usize, usize)> {
    let mut best = (usize::MAX, usize::MAX);
    for (i, p) in protos.iter().enumerate() {
        let mut d = 0;
        for (a, b) in p.iter().zip(parts) {
            d += a.hamming(b).map_err(data_err)?;
        }
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

fn load_prototype_rows(
    image: &Path,
    geometry: Geometry,
    classes: usize,
) -> CliResult<Vec<Vec<HyperVector>>> {
    let bytes = std::fs::read(image).map_err(data_err)?;
    let am = AssociativeMemory::load(&bytes[..]).map_err(data_err)?;
    if am.geometry() != geometry {
        return Err(data_err(format!(
            "memory image geometry {:?} does not match configured {:?}",
            am.geometry(),
            geometry
        )));
    }
    (0..classes)
        .map(|addr| {
            (0..geometry.k)
                .map(|part| Ok(am.read(addr, part).map_err(data_err)?.clone()))
                .collect()
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_classify(
    global: &GlobalOpts,
    app: &str,
    dataset: &str,
    am_image: &Path,
    via: &str,
    compare: bool,
    out: &Option<PathBuf>,
    norm_factor: Option<f64>,
    data: &DataOpts,
) -> CliResult {
    if !matches!(via, "vm" | "reference") {
        return Err(usage_err(format!("--via must be vm or reference, got '{via}'")));
    }
    let r = resolve(global)?;
    let cfg = datapath(&r)?;
    let app = parse_app(app)?;
    let k = r.geometry.k;

    // Test items as (truth, VM input stream, reference encoding thunk input).
    enum Item {
        Lang(Vec<u8>),
        Emg(Vec<Vec<u8>>),
        Bearing(Vec<f64>),
    }
    let (items, classes): (Vec<(usize, Item)>, usize) = match load_data(app, dataset, data)? {
        LoadedData::Lang { test, classes, .. } => {
            (test.into_iter().map(|(c, s)| (c, Item::Lang(s))).collect(), classes)
        }
        LoadedData::Emg { test, classes, .. } => {
            (test.into_iter().map(|(c, w)| (c, Item::Emg(w))).collect(), classes)
        }
        LoadedData::Bearing { records } => {
            // Without labels, bearing classification checks that records
            // match the healthy reference (class 0) vs its complement.
            (records.into_iter().map(|(_, s)| (0, Item::Bearing(s))).collect(), 2)
        }
    };
    if items.is_empty() {
        return Err(data_err("test set is empty"));
    }
    let protos = load_prototype_rows(am_image, r.geometry, classes)?;

    let bearing_norm = || -> CliResult<f64> {
        norm_factor.ok_or_else(|| usage_err("bearing classification requires --norm-factor"))
    };

    let program_text = match app {
        App::Lang => lang_program(
            &LangParams { classes, n: data.ngram, ..LangParams::default() },
            r.geometry,
        )
        .map_err(data_err)?,
        App::Emg => {
            emg_program(&EmgParams { classes, ..EmgParams::default() }, r.geometry)
                .map_err(data_err)?
        }
        App::Bearing => bearing_program(&BearingParams::default(), r.geometry).map_err(data_err)?,
    };
    let program = assemble(&program_text).map_err(data_err)?;

    let run_vm = |item: &Item| -> CliResult<(usize, usize, u64)> {
        let samples = match item {
            Item::Lang(sym) => lang_stream(sym, k),
            Item::Emg(w) => emg_stream(w, k),
            Item::Bearing(s) => bearing_stream(s, bearing_norm()?, k).map_err(data_err)?,
        };
        let machine =
            run_program(&cfg, &program, &protos, samples, 100_000_000).map_err(data_err)?;
        let s = machine
            .last_search
            .ok_or_else(|| data_err("program halted without a search result"))?;
        Ok((s.index, s.distance, machine.cycles))
    };
    let run_reference = |item: &Item| -> CliResult<(usize, usize, u64)> {
        let parts = match item {
            Item::Lang(sym) => {
                lang_encode(sym, data.ngram, &cfg, Bundling::FullPrecision).map_err(data_err)?
            }
            Item::Emg(w) => emg_encode(w, &cfg, Bundling::FullPrecision).map_err(data_err)?,
            Item::Bearing(s) => {
                bearing_encode(s, bearing_norm()?, &cfg, Bundling::FullPrecision).map_err(data_err)?
            }
        };
        let (pred, distance) = nearest_prototype(&parts, &protos)?;
        Ok((pred, distance, 0))
    };

    let rows: Vec<CliResult<Row>> = par_map(
        items.into_iter().enumerate().collect::<Vec<_>>(),
        |(i, (truth, item))| -> CliResult<Row> {
            let (pred, distance, cycles) = match via {
                "reference" => run_reference(&item)?,
                _ => run_vm(&item)?,
            };
            if compare {
                let (vm, _, _) = run_vm(&item)?;
                let (rf, _, _) = run_reference(&item)?;
                if vm != rf {
                    return Err(assert_err(format!(
                        "item {i}: vm decision {vm} != reference decision {rf}"
                    )));
                }
            }
            Ok(Row { item: i, truth, pred, distance, cycles })
        },
    );
    let rows: Vec<Row> = rows.into_iter().collect::<Result<_, _>>()?;

    let mut csv = String::from("item,truth,pred,distance,cycles\n");
    let mut correct = 0usize;
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.item, row.truth, row.pred, row.distance, row.cycles
        );
        if row.truth == row.pred {
            correct += 1;
        }
    }
    write_output(out, &csv)?;
    eprintln!(
        "accuracy: {}/{} = {:.2}%",
        correct,
        rows.len(),
        100.0 * correct as f64 / rows.len() as f64
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bearing_monitor(
    global: &GlobalOpts,
    dataset: &str,
    channel: usize,
    calibrate_hours: f64,
    half_life: f64,
    threshold: Option<f64>,
    out: &Option<PathBuf>,
    records: usize,
    drift_at: f64,
    seed: u64,
) -> CliResult {
    let r = resolve(global)?;
    let cfg = datapath(&r)?;
    let rec: BearingRecording = if dataset == "synth" {
        synth_bearing(records, drift_at, seed)
    } else {
        load_ims_bearing(Path::new(dataset), channel).map_err(data_err)?
    };

    let calib: Vec<Vec<f64>> = rec
        .records
        .iter()
        .filter(|(h, _)| *h <= calibrate_hours)
        .map(|(_, s)| s.clone())
        .collect();
    let mut model = calibrate_bearing(&calib, &cfg, seed).map_err(data_err)?;
    model.half_life_hours = half_life;

    // Threshold default: raw-distance statistics over the calibration
    // window, mean + 5 standard deviations.
    let threshold = match threshold {
        Some(t) => t,
        None => {
            let dists: Vec<f64> = calib
                .iter()
                .map(|s| {
                    let parts = bearing_encode(s, model.norm_factor, &cfg, Bundling::FullPrecision)
                        .map_err(data_err)?;
                    Ok(hdc::algos::bearing::distance_to_reference(&model, &parts)
                        .map_err(data_err)? as f64)
                })
                .collect::<CliResult<_>>()?;
            let mean = dists.iter().sum::<f64>() / dists.len() as f64;
            let var =
                dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dists.len() as f64;
            mean + 5.0 * var.sqrt()
        }
    };

    let points = bearing_monitor(&rec.records, &model, &cfg, threshold).map_err(data_err)?;
    let mut csv = String::from("timestamp,raw_distance,ema_distance,alarm\n");
    for p in &points {
        let _ = writeln!(csv, "{:.4},{},{:.2},{}", p.hours, p.raw_distance, p.ema_distance, p.alarm as u8);
    }
    write_output(out, &csv)?;
    let first_alarm = points.iter().find(|p| p.alarm).map(|p| p.hours);
    eprintln!(
        "threshold {threshold:.1}, first alarm: {}",
        first_alarm.map_or("none".into(), |h| format!("{h:.2} h"))
    );
    Ok(())
}

fn cmd_bench(
    global: &GlobalOpts,
    app: &str,
    dims: &[usize],
    folds: &[usize],
    seed: u64,
    out: &Option<PathBuf>,
) -> CliResult {
    let r = resolve(global)?;
    let app = parse_app(app)?;
    let mut csv = String::from("app,dim,fold,accuracy,cycles_per_item\n");
    for &d in dims {
        for &k in folds {
            let geometry =
                Geometry::new(d, k, r.geometry.am_rows).map_err(|e| usage_err(e.to_string()))?;
            let cfg = DatapathConfig::new(geometry, r.seeds.clone()).map_err(data_err)?;
            let (accuracy, cycles) = bench_point(app, &cfg, seed)?;
            let _ = writeln!(csv, "{app},{d},{k},{accuracy:.4},{cycles}");
        }
    }
    write_output(out, &csv)?;
    Ok(())
}

/// One sweep point: accuracy via the reference encoders over a small
/// synthetic set, cycles via one VM classification (cycle counts are
/// input-length dependent only).
fn bench_point(app: App, cfg: &DatapathConfig, seed: u64) -> CliResult<(f64, u64)> {
    let k = cfg.geometry.k;
    let encode_set = |items: Vec<(usize, Vec<HyperVector>)>| items;
    match app {
        App::Lang => {
            let corpus = synth_lang(4, 55, 100, seed);
            let items = corpus_to_symbols(&corpus)?;
            let mut per = vec![0usize; 4];
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (c, s) in items {
                per[c] += 1;
                let s = fit_length(&s, 100);
                if per[c] <= 30 {
                    train.push((c, s));
                } else {
                    test.push((c, s));
                }
            }
            let enc: CliResult<Vec<_>> = train
                .iter()
                .map(|(c, s)| {
                    Ok((*c, lang_encode(s, 4, cfg, Bundling::FullPrecision).map_err(data_err)?))
                })
                .collect();
            let protos = train_prototypes(&encode_set(enc?)).map_err(data_err)?;
            let mut correct = 0;
            for (c, s) in &test {
                let parts = lang_encode(s, 4, cfg, Bundling::FullPrecision).map_err(data_err)?;
                if nearest_prototype(&parts, &protos)?.0 == *c {
                    correct += 1;
                }
            }
            let p = LangParams { classes: 4, ..LangParams::default() };
            let program = assemble(&lang_program(&p, cfg.geometry).map_err(data_err)?)
                .map_err(data_err)?;
            let machine = run_program(cfg, &program, &protos, lang_stream(&test[0].1, k), 10_000_000)
                .map_err(data_err)?;
            Ok((correct as f64 / test.len() as f64, machine.cycles))
        }
        App::Emg => {
            let rec = synth_emg(5, 40, seed);
            let (train, test) = split_per_class(&rec.windows, 2);
            let enc: CliResult<Vec<_>> = train
                .iter()
                .map(|(c, w)| {
                    Ok((*c, emg_encode(w, cfg, Bundling::FullPrecision).map_err(data_err)?))
                })
                .collect();
            let protos = train_prototypes(&enc?).map_err(data_err)?;
            let mut correct = 0;
            for (c, w) in &test {
                let parts = emg_encode(w, cfg, Bundling::FullPrecision).map_err(data_err)?;
                if nearest_prototype(&parts, &protos)?.0 == *c {
                    correct += 1;
                }
            }
            let program = assemble(
                &emg_program(&EmgParams::default(), cfg.geometry).map_err(data_err)?,
            )
            .map_err(data_err)?;
            let machine = run_program(cfg, &program, &protos, emg_stream(&test[0].1, k), 10_000_000)
                .map_err(data_err)?;
            Ok((correct as f64 / test.len() as f64, machine.cycles))
        }
        App::Bearing => {
            // Two-class synthetic check: healthy vs drifted vibration.
            let healthy = synth_bearing(130, f64::INFINITY, seed);
            let faulty = synth_bearing(130, 0.0, seed ^ 0xbead);
            let calib: Vec<Vec<f64>> =
                healthy.records.iter().take(100).map(|(_, s)| s.clone()).collect();
            let model = calibrate_bearing(&calib, cfg, seed).map_err(data_err)?;
            let encode = |s: &[f64]| {
                bearing_encode(s, model.norm_factor, cfg, Bundling::FullPrecision).map_err(data_err)
            };
            let mut acc: Vec<(usize, Vec<HyperVector>)> = Vec::new();
            for (_, s) in healthy.records.iter().take(20) {
                acc.push((0, encode(s)?));
            }
            for (_, s) in faulty.records.iter().take(20) {
                acc.push((1, encode(s)?));
            }
            let protos = train_prototypes(&acc).map_err(data_err)?;
            let mut correct = 0;
            let mut total = 0;
            for (truth, rec) in [(0usize, &healthy), (1, &faulty)] {
                for (_, s) in rec.records.iter().skip(100).take(25) {
                    total += 1;
                    if nearest_prototype(&encode(s)?, &protos)?.0 == truth {
                        correct += 1;
                    }
                }
            }
            let program = assemble(
                &bearing_program(&BearingParams::default(), cfg.geometry).map_err(data_err)?,
            )
            .map_err(data_err)?;
            let stream =
                bearing_stream(&healthy.records[101].1, model.norm_factor, k).map_err(data_err)?;
            let machine = run_program(cfg, &program, &protos, stream, 10_000_000).map_err(data_err)?;
            Ok((correct as f64 / total as f64, machine.cycles))
        }
    }
}
