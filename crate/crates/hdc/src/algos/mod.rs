//! Reference encoders, microcode generators and trainers for the
//! three always-on workloads: text language identification (LANG),
//! EMG gesture recognition (EMG) and ball-bearing condition
//! monitoring (BEARING).

pub mod bearing;
pub mod emg;
pub mod lang;

use crate::am::AmError;
use crate::asm::{assemble, AsmError, Program};
use crate::encoder::{BundleCounterBank, DatapathConfig, EncoderError};
use crate::hv::{Geometry, HvError, HyperVector};
use crate::vm::{InputStream, Machine, VmError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error("symbol {0} outside the 27-symbol alphabet")]
    BadSymbol(u8),
    #[error("n-gram size {0} unsupported (expected 2..=5)")]
    BadNgram(usize),
    #[error("window shape {rows}x{cols} (expected {want_rows}x{want_cols})")]
    BadWindowShape { rows: usize, cols: usize, want_rows: usize, want_cols: usize },
    #[error("sample value {0} outside [0,127]")]
    SampleRange(u8),
    #[error("class {0} has no training examples")]
    EmptyClass(usize),
    #[error("no training examples at all")]
    NoExamples,
    #[error("need at least {need} calibration windows, got {got}")]
    InsufficientCalibration { need: usize, got: usize },
    #[error("bearing model not calibrated")]
    Uncalibrated,
    #[error("timestamps not strictly increasing at index {0}")]
    NonMonotoneTime(usize),
    #[error("class count {classes} does not fit the memory map (max {max})")]
    TooManyClasses { classes: usize, max: usize },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Hv(#[from] HvError),
    #[error(transparent)]
    Am(#[from] AmError),
    #[error(transparent)]
    Vm(#[from] VmError),
    #[error(transparent)]
    Asm(#[from] AsmError),
}

/// Bundling semantics for the reference encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bundling {
    /// Ideal full-precision per-bit majority, ties resolve to 1.
    #[default]
    FullPrecision,
    /// The datapath's 5-bit saturating counters, bit-exact against the
    /// VM.
    Hardware,
}

/// Majority accumulator with selectable semantics.
pub enum Accumulator {
    Full(Vec<i32>),
    Hw(BundleCounterBank),
}

impl Accumulator {
    pub fn new(width: usize, bundling: Bundling) -> Self {
        match bundling {
            Bundling::FullPrecision => Accumulator::Full(vec![0; width]),
            Bundling::Hardware => Accumulator::Hw(BundleCounterBank::new(width)),
        }
    }

    pub fn accumulate(&mut self, v: &HyperVector) -> Result<(), AlgoError> {
        match self {
            Accumulator::Full(counts) => {
                if v.width() != counts.len() {
                    return Err(HvError::WidthMismatch(v.width(), counts.len()).into());
                }
                for (i, c) in counts.iter_mut().enumerate() {
                    *c += if v.get(i) { 1 } else { -1 };
                }
            }
            Accumulator::Hw(bank) => bank.accumulate(v)?,
        }
        Ok(())
    }

    pub fn threshold(&self) -> HyperVector {
        match self {
            Accumulator::Full(counts) => {
                let mut out = HyperVector::zeros(counts.len());
                for (i, &c) in counts.iter().enumerate() {
                    if c >= 0 {
                        out.set(i, true);
                    }
                }
                out
            }
            Accumulator::Hw(bank) => bank.threshold(),
        }
    }

    pub fn reset(&mut self) {
        match self {
            Accumulator::Full(counts) => counts.fill(0),
            Accumulator::Hw(bank) => bank.reset(),
        }
    }
}

/// Full-precision majority bundle of per-class encodings. Each
/// encoding is a list of K parts; the prototype for a class is the
/// per-part majority (ties to 1) over its examples.
pub fn train_prototypes(
    encodings: &[(usize, Vec<HyperVector>)],
) -> Result<Vec<Vec<HyperVector>>, AlgoError> {
    let (_, first) = encodings.first().ok_or(AlgoError::NoExamples)?;
    let k = first.len();
    let width = first[0].width();
    let classes = encodings.iter().map(|(c, _)| c + 1).max().unwrap();
    let mut acc: Vec<Vec<Accumulator>> = (0..classes)
        .map(|_| (0..k).map(|_| Accumulator::new(width, Bundling::FullPrecision)).collect())
        .collect();
    let mut seen = vec![false; classes];
    for (class, parts) in encodings {
        seen[*class] = true;
        for (part, v) in parts.iter().enumerate() {
            acc[*class][part].accumulate(v)?;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(AlgoError::EmptyClass(missing));
    }
    Ok(acc
        .into_iter()
        .map(|parts| parts.into_iter().map(|a| a.threshold()).collect())
        .collect())
}

/// Exponential moving average over an irregularly sampled series:
/// y_i = a*x_i + (1-a)*y_{i-1} with a = 1 - 2^(-dt/half_life) and
/// y_0 = x_0. Times and half-life share one unit (hours here).
pub fn ema_filter(series: &[(f64, f64)], half_life: f64) -> Result<Vec<f64>, AlgoError> {
    let mut out = Vec::with_capacity(series.len());
    for (i, &(t, x)) in series.iter().enumerate() {
        if i == 0 {
            out.push(x);
            continue;
        }
        let dt = t - series[i - 1].0;
        if dt <= 0.0 {
            return Err(AlgoError::NonMonotoneTime(i));
        }
        let alpha = 1.0 - 2f64.powf(-dt / half_life);
        out.push(alpha * x + (1.0 - alpha) * out[i - 1]);
    }
    Ok(out)
}

/// The three shipped applications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum App {
    Lang,
    Emg,
    Bearing,
}

impl App {
    pub fn parse(s: &str) -> Option<App> {
        match s.to_ascii_lowercase().as_str() {
            "lang" => Some(App::Lang),
            "emg" => Some(App::Emg),
            "bearing" => Some(App::Bearing),
            _ => None,
        }
    }
}

impl std::fmt::Display for App {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            App::Lang => "lang",
            App::Emg => "emg",
            App::Bearing => "bearing",
        })
    }
}

/// Generates the assembly text of an application's microcode for a
/// geometry, using each application's default parameters.
pub fn generate_program(app: App, geometry: Geometry) -> Result<String, AlgoError> {
    geometry.validate().map_err(EncoderError::from)?;
    match app {
        App::Lang => lang::lang_program(&lang::LangParams::default(), geometry),
        App::Emg => emg::emg_program(&emg::EmgParams::default(), geometry),
        App::Bearing => bearing::bearing_program(&bearing::BearingParams::default(), geometry),
    }
}

/// Runs an assembled application program on one input stream with the
/// given prototypes loaded, returning the machine for inspection.
pub fn run_program(
    cfg: &DatapathConfig,
    program: &Program,
    prototypes: &[Vec<HyperVector>],
    samples: Vec<u8>,
    cycle_limit: u64,
) -> Result<Machine, AlgoError> {
    let mut machine = Machine::new(cfg.clone(), program);
    machine.load_prototypes(prototypes)?;
    let mut stream = InputStream::new(samples)?;
    machine.run(&mut stream, cycle_limit)?;
    Ok(machine)
}

/// Repeats a per-part sample sequence K times — folded programs
/// re-consume the input once per vector part.
pub fn fold_stream(samples: &[u8], k: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * k);
    for _ in 0..k {
        out.extend_from_slice(samples);
    }
    out
}

/// Assembles generated text, wrapping assembler errors.
pub fn assemble_app(text: &str) -> Result<Program, AlgoError> {
    Ok(assemble(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_majority_with_tie_to_one() {
        let width = 64;
        let mut acc = Accumulator::new(width, Bundling::FullPrecision);
        acc.accumulate(&HyperVector::ones(width)).unwrap();
        acc.accumulate(&HyperVector::zeros(width)).unwrap();
        // Tie: 1 up, 1 down -> 1.
        assert_eq!(acc.threshold(), HyperVector::ones(width));
        acc.accumulate(&HyperVector::zeros(width)).unwrap();
        assert_eq!(acc.threshold(), HyperVector::zeros(width));
    }

    #[test]
    fn prototype_of_single_example_is_the_example() {
        let v = HyperVector::random(256, 7);
        let protos = train_prototypes(&[(0, vec![v.clone()])]).unwrap();
        assert_eq!(protos, vec![vec![v]]);
    }

    #[test]
    fn duplicated_examples_do_not_change_the_prototype() {
        let v = HyperVector::random(256, 8);
        let w = HyperVector::random(256, 9);
        let once = train_prototypes(&[(0, vec![v.clone()]), (1, vec![w.clone()])]).unwrap();
        let thrice = train_prototypes(&[
            (0, vec![v.clone()]),
            (0, vec![v.clone()]),
            (0, vec![v]),
            (1, vec![w]),
        ])
        .unwrap();
        assert_eq!(once, thrice);
    }

    #[test]
    fn empty_class_is_an_error() {
        let v = HyperVector::random(256, 10);
        assert!(matches!(
            train_prototypes(&[(1, vec![v])]),
            Err(AlgoError::EmptyClass(0))
        ));
    }

    #[test]
    fn prototypes_separate_synthetic_classes() {
        // 3 classes, each a noisy cloud around a random center: the
        // prototype must be nearer its own members than other classes'.
        let width = 2048;
        let centers: Vec<HyperVector> =
            (0..3).map(|c| HyperVector::random(width, 900 + c)).collect();
        let mut data = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for i in 0..9 {
                let noise_mask = HyperVector::random(width, 5000 + (c * 100 + i) as u64)
                    .and(&HyperVector::random(width, 6000 + (c * 100 + i) as u64))
                    .unwrap()
                    .and(&HyperVector::random(width, 7000 + (c * 100 + i) as u64))
                    .unwrap();
                data.push((c, vec![center.bind(&noise_mask).unwrap()]));
            }
        }
        let protos = train_prototypes(&data).unwrap();
        for (c, parts) in &data {
            let own = protos[*c][0].hamming(&parts[0]).unwrap();
            for (o, proto) in protos.iter().enumerate() {
                if o != *c {
                    assert!(own < proto[0].hamming(&parts[0]).unwrap());
                }
            }
        }
    }

    #[test]
    fn ema_constant_series_is_itself() {
        let series: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.5)).collect();
        for y in ema_filter(&series, 5.0).unwrap() {
            assert!((y - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ema_unit_step_reaches_half_at_one_half_life() {
        // x jumps 0 -> 1 at t=1; after exactly one half-life the
        // response is 50 %.
        let series = vec![(0.0, 0.0), (5.0, 1.0)];
        let y = ema_filter(&series, 5.0).unwrap();
        assert!((y[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ema_impulse_matches_closed_form() {
        // Impulse at t=1, then zeros at unit spacing: y_i decays by
        // 2^(-1/hl) per step after the impulse response a = 1-2^(-1/hl).
        let hl = 5.0;
        let mut series = vec![(0.0, 0.0), (1.0, 1.0)];
        for i in 2..30 {
            series.push((i as f64, 0.0));
        }
        let y = ema_filter(&series, hl).unwrap();
        let a = 1.0 - 2f64.powf(-1.0 / hl);
        for (i, &yi) in y.iter().enumerate().skip(1) {
            let expect = a * 2f64.powf(-((i - 1) as f64) / hl);
            assert!((yi - expect).abs() < 1e-12, "i={i} y={yi} expect={expect}");
        }
    }

    #[test]
    fn ema_rejects_non_monotone_time() {
        let series = vec![(0.0, 1.0), (1.0, 1.0), (1.0, 1.0)];
        assert!(matches!(ema_filter(&series, 5.0), Err(AlgoError::NonMonotoneTime(2))));
    }

    #[test]
    fn generated_programs_assemble_for_all_folds() {
        for app in [App::Lang, App::Emg, App::Bearing] {
            for k in [1, 2, 4] {
                let g = Geometry::new(2048, k, 32).unwrap();
                let text = generate_program(app, g).unwrap();
                let program = assemble_app(&text).unwrap();
                assert!(!program.is_empty(), "{app} k={k}");
            }
        }
    }
}
