//! Ball-bearing condition monitoring from raw vibration samples.
//!
//! Each measurement is five 250-sample windows at 125 ms spacing.
//! Samples are normalized by a calibrated 99 %-quantile amplitude,
//! clamped, quantized to 7 bits and mapped through the item memory;
//! the mapped vectors are bundled into the measurement vector V_M.
//! Monitoring tracks the Hamming distance of each V_M to a calibration
//! vector V_M* (the bundle of 100 randomly chosen measurement vectors
//! from the first 24 operating hours), smoothed by an EMA with a
//! five-hour half-life.

use super::{Accumulator, AlgoError, Bundling};
use crate::encoder::{im_map, part_permutation, part_selector_bits, DatapathConfig};
use crate::hv::{Geometry, HyperVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub const WINDOW_SAMPLES: usize = 250;
pub const WINDOWS_PER_MEASUREMENT: usize = 5;
pub const MEASUREMENT_SAMPLES: usize = WINDOW_SAMPLES * WINDOWS_PER_MEASUREMENT;
pub const CALIBRATION_VECTORS: usize = 100;
pub const DEFAULT_HALF_LIFE_HOURS: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct BearingParams {
    pub classes: usize,
    pub sim_threshold: u16,
    pub index_threshold: u8,
}

impl Default for BearingParams {
    fn default() -> Self {
        BearingParams { classes: 2, sim_threshold: 400, index_threshold: 0 }
    }
}

/// Calibrated monitoring model.
#[derive(Debug, Clone)]
pub struct BearingModel {
    /// 99 %-quantile amplitude of the calibration data.
    pub norm_factor: f64,
    /// V_M*: per-part bundle of 100 random calibration measurements.
    pub reference_vector: Vec<HyperVector>,
    pub half_life_hours: f64,
}

/// Normalize, clamp and quantize one raw sample to 7 bits.
pub fn quantize(x: f64, norm_factor: f64) -> u8 {
    let a = (x.abs() / norm_factor * 127.0).round();
    a.clamp(0.0, 127.0) as u8
}

/// Extracts the five 250-sample windows of one measurement. Records
/// exactly 1250 samples long are taken contiguously; longer records
/// (e.g. 20480 samples of a 1-second 20 kHz recording) are sampled at
/// 125 ms spacing.
pub fn measurement_windows(record: &[f64]) -> Result<Vec<&[f64]>, AlgoError> {
    let stride = if record.len() == MEASUREMENT_SAMPLES {
        WINDOW_SAMPLES
    } else {
        record.len() / WINDOWS_PER_MEASUREMENT
    };
    if stride < WINDOW_SAMPLES {
        return Err(AlgoError::BadWindowShape {
            rows: WINDOWS_PER_MEASUREMENT,
            cols: record.len() / WINDOWS_PER_MEASUREMENT,
            want_rows: WINDOWS_PER_MEASUREMENT,
            want_cols: WINDOW_SAMPLES,
        });
    }
    Ok((0..WINDOWS_PER_MEASUREMENT)
        .map(|w| &record[w * stride..w * stride + WINDOW_SAMPLES])
        .collect())
}

/// Quantized sample stream of one measurement (1250 values).
pub fn quantize_measurement(record: &[f64], norm_factor: f64) -> Result<Vec<u8>, AlgoError> {
    let windows = measurement_windows(record)?;
    Ok(windows.iter().flat_map(|w| w.iter().map(|&x| quantize(x, norm_factor))).collect())
}

/// Reference measurement encoder, one vector per geometry part.
///
/// `FullPrecision` bundles each 250-sample window with the ideal
/// majority and then combines the five window vectors the same way;
/// `Hardware` accumulates all 1250 mapped vectors in one pass through
/// the saturating counters, exactly as the 9-word microcode does.
pub fn bearing_encode(
    record: &[f64],
    norm_factor: f64,
    cfg: &DatapathConfig,
    bundling: Bundling,
) -> Result<Vec<HyperVector>, AlgoError> {
    if norm_factor <= 0.0 {
        return Err(AlgoError::Uncalibrated);
    }
    let quantized = quantize_measurement(record, norm_factor)?;
    let k = cfg.geometry.k;
    let width = cfg.geometry.width();
    let mut parts = Vec::with_capacity(k);
    for h in 0..k {
        let pp = part_permutation(h, k, &cfg.mixer)?;
        let map = |q: u8| -> Result<HyperVector, AlgoError> {
            Ok(pp.apply(&im_map(q as u64, 7, &cfg.mixer, &cfg.mixer.seed_vector)?)?)
        };
        let part = match bundling {
            Bundling::FullPrecision => {
                let mut outer = Accumulator::new(width, Bundling::FullPrecision);
                for window in quantized.chunks(WINDOW_SAMPLES) {
                    let mut inner = Accumulator::new(width, Bundling::FullPrecision);
                    for &q in window {
                        inner.accumulate(&map(q)?)?;
                    }
                    outer.accumulate(&inner.threshold())?;
                }
                outer.threshold()
            }
            Bundling::Hardware => {
                let mut acc = Accumulator::new(width, Bundling::Hardware);
                for &q in &quantized {
                    acc.accumulate(&map(q)?)?;
                }
                acc.threshold()
            }
        };
        parts.push(part);
    }
    Ok(parts)
}

/// Calibration over the first operating hours: the normalization
/// factor is the 99 % amplitude quantile, and V_M* bundles 100
/// seeded-randomly chosen calibration measurements at full precision.
pub fn calibrate_bearing(
    records: &[Vec<f64>],
    cfg: &DatapathConfig,
    seed: u64,
) -> Result<BearingModel, AlgoError> {
    if records.len() < CALIBRATION_VECTORS {
        return Err(AlgoError::InsufficientCalibration {
            need: CALIBRATION_VECTORS,
            got: records.len(),
        });
    }
    let mut amplitudes: Vec<f64> = records.iter().flatten().map(|x| x.abs()).collect();
    amplitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((amplitudes.len() as f64) * 0.99).floor() as usize;
    let norm_factor = amplitudes[idx.min(amplitudes.len() - 1)].max(f64::MIN_POSITIVE);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let width = cfg.geometry.width();
    let mut acc: Vec<Accumulator> =
        (0..cfg.geometry.k).map(|_| Accumulator::new(width, Bundling::FullPrecision)).collect();
    for _ in 0..CALIBRATION_VECTORS {
        let record = &records[rng.gen_range(0..records.len())];
        let parts = bearing_encode(record, norm_factor, cfg, Bundling::FullPrecision)?;
        for (h, v) in parts.iter().enumerate() {
            acc[h].accumulate(v)?;
        }
    }
    Ok(BearingModel {
        norm_factor,
        reference_vector: acc.iter().map(|a| a.threshold()).collect(),
        half_life_hours: DEFAULT_HALF_LIFE_HOURS,
    })
}

/// Total Hamming distance of a measurement encoding to V_M*.
pub fn distance_to_reference(
    model: &BearingModel,
    parts: &[HyperVector],
) -> Result<usize, AlgoError> {
    let mut d = 0;
    for (v, r) in parts.iter().zip(&model.reference_vector) {
        d += v.hamming(r)?;
    }
    Ok(d)
}

/// One monitor output row.
#[derive(Debug, Clone, Copy)]
pub struct MonitorPoint {
    pub hours: f64,
    pub raw_distance: usize,
    pub ema_distance: f64,
    pub alarm: bool,
}

/// Runs the monitor over timestamped records: per-measurement distance
/// to V_M*, EMA-filtered, with an alarm when the filtered distance
/// exceeds `threshold`.
pub fn bearing_monitor(
    records: &[(f64, Vec<f64>)],
    model: &BearingModel,
    cfg: &DatapathConfig,
    threshold: f64,
) -> Result<Vec<MonitorPoint>, AlgoError> {
    let mut series = Vec::with_capacity(records.len());
    for (hours, record) in records {
        let parts = bearing_encode(record, model.norm_factor, cfg, Bundling::FullPrecision)?;
        series.push((*hours, distance_to_reference(model, &parts)? as f64));
    }
    let ema = ema_series(&series, model.half_life_hours)?;
    Ok(series
        .iter()
        .zip(ema)
        .map(|(&(hours, raw), ema_distance)| MonitorPoint {
            hours,
            raw_distance: raw as usize,
            ema_distance,
            alarm: ema_distance > threshold,
        })
        .collect())
}

fn ema_series(series: &[(f64, f64)], half_life: f64) -> Result<Vec<f64>, AlgoError> {
    super::ema_filter(series, half_life)
}

/// Microcode for one measurement classification: 9 words at fold 1,
/// 12513 cycles.
pub fn bearing_program(p: &BearingParams, geometry: Geometry) -> Result<String, AlgoError> {
    if p.classes >= geometry.am_rows - 1 {
        return Err(AlgoError::TooManyClasses { classes: p.classes, max: geometry.am_rows - 2 });
    }
    let search = geometry.search_row();
    let mut s = String::new();
    let sample_body = |s: &mut String, outer: usize, inner: usize| {
        s.push_str(&format!("hw.loop{outer} {WINDOWS_PER_MEASUREMENT}, w_end\n"));
        s.push_str(&format!("hw.loop{inner} {WINDOW_SAMPLES}, w_end\n"));
        s.push_str("  mix.ext 7\n");
        if geometry.k > 1 {
            s.push_str(&format!("  mix.part {}\n", part_selector_bits(geometry.k)));
        }
        s.push_str("  seed_vec -> bundle -> enc_reg\n");
        s.push_str("w_end:\n");
        s.push_str(&format!("thresh -> mem[{search}]\n"));
    };
    if geometry.k == 1 {
        s.push_str("seed_vec -> bndrst -> enc_reg\n");
        sample_body(&mut s, 0, 1);
    } else {
        s.push_str("pc.clear\n");
        s.push_str(&format!("hw.loop0 {}, part_end\n", geometry.k));
        s.push_str("seed_vec -> bndrst -> enc_reg\n");
        sample_body(&mut s, 1, 2);
        s.push_str("pc.inc\n");
        s.push_str("part_end:\n");
    }
    s.push_str(&format!("am_search {}\n", p.classes));
    s.push_str(&format!("intr {}, {}\n", p.sim_threshold, p.index_threshold));
    s.push_str("halt\n");
    Ok(s)
}

/// Input stream for one measurement: quantized samples, repeated per
/// part.
pub fn bearing_stream(record: &[f64], norm_factor: f64, k: usize) -> Result<Vec<u8>, AlgoError> {
    let q = quantize_measurement(record, norm_factor)?;
    Ok(super::fold_stream(&q, k))
}
