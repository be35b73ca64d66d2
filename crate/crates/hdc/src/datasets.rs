//! Corpus loaders and deterministic synthetic generators for the
//! three evaluation workloads.

use crate::algos::bearing::MEASUREMENT_SAMPLES;
use crate::algos::emg::{CHANNELS, WINDOW_STEPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("no data files found in {0}")]
    EmptyDirectory(PathBuf),
    #[error("bad filename timestamp '{0}': expected yyyy.mm.dd.hh.mm.ss")]
    BadTimestamp(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------- text

/// Labeled sentences over the 27-symbol alphabet.
#[derive(Debug, Clone)]
pub struct TextCorpus {
    pub labels: Vec<String>,
    /// (label index, cleaned sentence)
    pub sentences: Vec<(usize, String)>,
}

impl TextCorpus {
    /// Deterministic per-label round-robin split: every `1/test_frac`-th
    /// sentence of each label goes to the test set.
    pub fn split(&self, test_every: usize) -> (TextCorpus, TextCorpus) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut per_label = vec![0usize; self.labels.len()];
        for &(label, ref s) in &self.sentences {
            let i = per_label[label];
            per_label[label] += 1;
            if test_every > 0 && i % test_every == test_every - 1 {
                test.push((label, s.clone()));
            } else {
                train.push((label, s.clone()));
            }
        }
        (
            TextCorpus { labels: self.labels.clone(), sentences: train },
            TextCorpus { labels: self.labels.clone(), sentences: test },
        )
    }
}

/// Cleaning rule: lowercase, anything outside a-z becomes a space,
/// space runs collapse, ends trimmed.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_space = true;
    for c in raw.chars() {
        let c = c.to_ascii_lowercase();
        let c = if c.is_ascii_lowercase() { c } else { ' ' };
        if c == ' ' {
            if !last_space {
                out.push(' ');
            }
            last_space = true;
        } else {
            out.push(c);
            last_space = false;
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Loads a directory of per-language line files (one sentence per
/// line; the file stem is the label), cleaning each line.
pub fn load_text_corpus(dir: &Path) -> Result<TextCorpus, DatasetError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().map_or(true, |e| e == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(DatasetError::EmptyDirectory(dir.to_path_buf()));
    }
    let mut labels = Vec::new();
    let mut sentences = Vec::new();
    for path in files {
        let label = labels.len();
        labels.push(path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
        let content = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        for line in content.lines() {
            let cleaned = clean_text(line);
            if !cleaned.is_empty() {
                sentences.push((label, cleaned));
            }
        }
    }
    Ok(TextCorpus { labels, sentences })
}

/// Synthetic corpus: per-language symbol-bigram Markov chains with
/// language-specific preferred successors, strong enough to be
/// chi-square distinguishable and separable by the n-gram encoder.
pub fn synth_lang(
    languages: usize,
    sentences_per_language: usize,
    sentence_len: usize,
    seed: u64,
) -> TextCorpus {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz ";
    let labels = (0..languages).map(|l| format!("synth{l:02}")).collect();
    let mut sentences = Vec::new();
    for lang in 0..languages {
        // Language model: per symbol, three preferred successors that
        // soak up most of the probability mass.
        let mut model_rng = ChaCha12Rng::seed_from_u64(seed ^ (lang as u64).wrapping_mul(0x9e37_79b9));
        let preferred: Vec<[usize; 3]> = (0..27)
            .map(|_| {
                [
                    model_rng.gen_range(0..27),
                    model_rng.gen_range(0..27),
                    model_rng.gen_range(0..27),
                ]
            })
            .collect();
        for s in 0..sentences_per_language {
            let mut rng =
                ChaCha12Rng::seed_from_u64(seed ^ ((lang * 131_071 + s + 1) as u64) << 8);
            let mut sym = rng.gen_range(0..27usize);
            let mut text = String::with_capacity(sentence_len);
            for _ in 0..sentence_len {
                text.push(ALPHABET[sym] as char);
                sym = if rng.gen_bool(0.85) {
                    preferred[sym][rng.gen_range(0..3)]
                } else {
                    rng.gen_range(0..27)
                };
            }
            sentences.push((lang, clean_text(&text)));
        }
    }
    TextCorpus { labels, sentences }
}

// ----------------------------------------------------------------- emg

/// Labeled 5x64 gesture windows with values in [0, 127].
#[derive(Debug, Clone)]
pub struct EmgRecording {
    /// (gesture label, 5 time steps x 64 channels)
    pub windows: Vec<(usize, Vec<Vec<u8>>)>,
}

/// CSV interchange format: 64 value columns plus a trailing label
/// column, one row per 100 ms sample; five consecutive rows form one
/// window and must share a label.
pub fn load_emg_csv(path: &Path) -> Result<EmgRecording, DatasetError> {
    let content = std::fs::read_to_string(path).map_err(io_err(path))?;
    let parse = |line: usize, msg: String| DatasetError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows: Vec<(Vec<u8>, usize)> = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != CHANNELS + 1 {
            return Err(parse(i + 1, format!("expected {} columns, got {}", CHANNELS + 1, fields.len())));
        }
        let mut values = Vec::with_capacity(CHANNELS);
        for f in &fields[..CHANNELS] {
            let v: i64 = f.parse().map_err(|_| parse(i + 1, format!("bad value '{f}'")))?;
            if !(0..=127).contains(&v) {
                return Err(parse(i + 1, format!("value {v} outside [0,127]")));
            }
            values.push(v as u8);
        }
        let label: usize = fields[CHANNELS]
            .parse()
            .map_err(|_| parse(i + 1, format!("bad label '{}'", fields[CHANNELS])))?;
        rows.push((values, label));
    }
    if rows.len() % WINDOW_STEPS != 0 {
        return Err(parse(0, format!("{} rows is not a multiple of {WINDOW_STEPS}", rows.len())));
    }
    let mut windows = Vec::new();
    for (w, chunk) in rows.chunks(WINDOW_STEPS).enumerate() {
        let label = chunk[0].1;
        if chunk.iter().any(|(_, l)| *l != label) {
            return Err(parse(w * WINDOW_STEPS + 1, "window rows have mixed labels".into()));
        }
        windows.push((label, chunk.iter().map(|(v, _)| v.clone()).collect()));
    }
    Ok(EmgRecording { windows })
}

/// Writes the CSV interchange format (the round-trip partner of
/// `load_emg_csv`).
pub fn write_emg_csv(rec: &EmgRecording, path: &Path) -> Result<(), DatasetError> {
    let mut out = String::new();
    for (label, window) in &rec.windows {
        for step in window {
            for v in step {
                out.push_str(&v.to_string());
                out.push(',');
            }
            out.push_str(&label.to_string());
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Synthetic gestures: per-gesture fixed channel means plus bounded
/// noise.
pub fn synth_emg(gestures: usize, windows_per_gesture: usize, seed: u64) -> EmgRecording {
    let mut windows = Vec::new();
    for g in 0..gestures {
        let mut model_rng = ChaCha12Rng::seed_from_u64(seed ^ (g as u64).wrapping_mul(0x6a09_e667));
        let means: Vec<i32> = (0..CHANNELS).map(|_| model_rng.gen_range(15..113)).collect();
        for w in 0..windows_per_gesture {
            let mut rng =
                ChaCha12Rng::seed_from_u64(seed ^ ((g * 65_537 + w + 1) as u64) << 16);
            let window = (0..WINDOW_STEPS)
                .map(|_| {
                    means
                        .iter()
                        .map(|&m| (m + rng.gen_range(-6..=6)).clamp(0, 127) as u8)
                        .collect()
                })
                .collect();
            windows.push((g, window));
        }
    }
    EmgRecording { windows }
}

// ------------------------------------------------------------- bearing

/// Timestamped vibration records of one bearing channel.
#[derive(Debug, Clone)]
pub struct BearingRecording {
    /// (hours since the first record, raw samples)
    pub records: Vec<(f64, Vec<f64>)>,
}

/// Days since an arbitrary epoch for a civil date (standard
/// days-from-civil calculation).
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe
}

/// Parses an IMS-style filename timestamp `yyyy.mm.dd.hh.mm.ss` to
/// absolute hours.
pub fn parse_ims_timestamp(name: &str) -> Result<f64, DatasetError> {
    let parts: Vec<i64> = name.split('.').filter_map(|p| p.parse().ok()).collect();
    if parts.len() != 6 {
        return Err(DatasetError::BadTimestamp(name.to_string()));
    }
    let (y, mo, d, h, mi, s) = (parts[0], parts[1], parts[2], parts[3], parts[4], parts[5]);
    if !(1..=12).contains(&mo) || !(1..=31).contains(&d) || h >= 24 || mi >= 60 || s >= 60 {
        return Err(DatasetError::BadTimestamp(name.to_string()));
    }
    let days = days_from_civil(y, mo, d);
    Ok(days as f64 * 24.0 + h as f64 + mi as f64 / 60.0 + s as f64 / 3600.0)
}

/// Loads an IMS-format directory: one whitespace-separated ASCII file
/// per record, filename = timestamp, one column per channel. Only the
/// requested channel column is kept; hours are rebased to the first
/// record.
pub fn load_ims_bearing(dir: &Path, channel: usize) -> Result<BearingRecording, DatasetError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(DatasetError::EmptyDirectory(dir.to_path_buf()));
    }
    let mut records = Vec::new();
    for path in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        let hours = parse_ims_timestamp(&name)?;
        let content = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut samples = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let field = fields.get(channel).ok_or_else(|| DatasetError::Parse {
                path: path.clone(),
                line: i + 1,
                msg: format!("missing channel column {channel} ({} present)", fields.len()),
            })?;
            let v: f64 = field.parse().map_err(|_| DatasetError::Parse {
                path: path.clone(),
                line: i + 1,
                msg: format!("bad sample '{field}'"),
            })?;
            samples.push(v);
        }
        records.push((hours, samples));
    }
    let t0 = records[0].0;
    for r in &mut records {
        r.0 -= t0;
    }
    Ok(BearingRecording { records })
}

/// Synthetic vibration stream: 10-minute record spacing, Gaussian
/// amplitude with a standard-deviation step (drift) injected at
/// `drift_at_hours`.
pub fn synth_bearing(
    records: usize,
    drift_at_hours: f64,
    seed: u64,
) -> BearingRecording {
    let pre_sigma = 1.0;
    let post_sigma = 2.5;
    let mut out = Vec::with_capacity(records);
    for i in 0..records {
        let hours = i as f64 / 6.0;
        let sigma = if hours < drift_at_hours { pre_sigma } else { post_sigma };
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ ((i as u64 + 1) << 20));
        let samples = (0..MEASUREMENT_SAMPLES)
            .map(|_| {
                // Box-Muller transform.
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen();
                sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        out.push((hours, samples));
    }
    BearingRecording { records: out }
}
