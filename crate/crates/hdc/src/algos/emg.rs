//! EMG gesture recognition: 64 channels, 5 temporal samples per
//! classified window.
//!
//! Per time step every channel value is mapped through the similarity
//! manipulator (continuous item memory) and bound to a per-channel
//! label vector generated by iterating the mixer's pi0 from the seed.
//! The 64 bound vectors are bundled; the five bundled time-step
//! vectors combine into a 5-gram by permute-and-bind, which is the
//! search vector.

use super::{Accumulator, AlgoError, Bundling};
use crate::encoder::{manipulate, part_permutation, part_selector_bits, DatapathConfig};
use crate::hv::{Geometry, HyperVector};

pub const CHANNELS: usize = 64;
pub const WINDOW_STEPS: usize = 5;

#[derive(Debug, Clone)]
pub struct EmgParams {
    pub classes: usize,
    pub sim_threshold: u16,
    pub index_threshold: u8,
}

impl Default for EmgParams {
    fn default() -> Self {
        EmgParams { classes: 5, sim_threshold: 400, index_threshold: 4 }
    }
}

fn check_window(window: &[Vec<u8>]) -> Result<(), AlgoError> {
    if window.len() != WINDOW_STEPS || window.iter().any(|r| r.len() != CHANNELS) {
        return Err(AlgoError::BadWindowShape {
            rows: window.len(),
            cols: window.first().map_or(0, |r| r.len()),
            want_rows: WINDOW_STEPS,
            want_cols: CHANNELS,
        });
    }
    if let Some(&bad) = window.iter().flatten().find(|&&v| v > 127) {
        return Err(AlgoError::SampleRange(bad));
    }
    Ok(())
}

/// Reference window encoder: one vector per geometry part. `window`
/// is 5 time steps of 64 channel values in [0, 127].
pub fn emg_encode(
    window: &[Vec<u8>],
    cfg: &DatapathConfig,
    bundling: Bundling,
) -> Result<Vec<HyperVector>, AlgoError> {
    check_window(window)?;
    let k = cfg.geometry.k;
    let width = cfg.geometry.width();
    let mut parts = Vec::with_capacity(k);
    for h in 0..k {
        let pp = part_permutation(h, k, &cfg.mixer)?;
        let label0 = pp.apply(&cfg.mixer.seed_vector)?;
        let mut g = HyperVector::zeros(width);
        let mut acc = Accumulator::new(width, bundling);
        for step in window {
            let mut label = label0.clone();
            acc.reset();
            for &value in step {
                let bound = manipulate(&cfg.mixer.seed_vector, value, &cfg.manipulator)?
                    .bind(&label)?;
                acc.accumulate(&bound)?;
                label = cfg.mixer.pi0.apply(&label)?;
            }
            g = cfg.mixer.pi0.apply(&g)?.bind(&acc.threshold())?;
        }
        parts.push(g);
    }
    Ok(parts)
}

/// Microcode for one window classification: 10 words at fold 1, 669
/// cycles per 500 ms window.
pub fn emg_program(p: &EmgParams, geometry: Geometry) -> Result<String, AlgoError> {
    if p.classes >= geometry.am_rows - 2 {
        return Err(AlgoError::TooManyClasses { classes: p.classes, max: geometry.am_rows - 3 });
    }
    let search = geometry.search_row();
    let mut s = String::new();
    let channel_loop = |s: &mut String, level: usize| {
        s.push_str(&format!("hw.loop{level} {CHANNELS}, c_end\n"));
        s.push_str("  seed_vec -> man.ext -> bind_enc -> enc_reg\n");
        s.push_str("  mem[30] -> mix0 -> bundle -> mem[30]\n");
        s.push_str("c_end:\n");
        s.push_str("thresh -> bndrst -> enc_reg\n");
        s.push_str(&format!("mem[{search}] -> mix0 -> bind_enc -> mem[{search}]\n"));
    };
    if geometry.k == 1 {
        s.push_str(&format!("hw.loop0 {WINDOW_STEPS}, t_end\n"));
        s.push_str("seed_vec -> mem[30]\n");
        channel_loop(&mut s, 1);
        s.push_str("t_end:\n");
    } else {
        s.push_str("pc.clear\n");
        s.push_str(&format!("hw.loop0 {}, part_end\n", geometry.k));
        s.push_str(&format!("hw.loop1 {WINDOW_STEPS}, t_end\n"));
        s.push_str("seed_vec -> enc_reg\n");
        s.push_str(&format!("mix.part {}\n", part_selector_bits(geometry.k)));
        s.push_str("enc_reg -> mem[30]\n");
        channel_loop(&mut s, 2);
        s.push_str("t_end:\n");
        s.push_str("pc.inc\n");
        s.push_str("part_end:\n");
    }
    s.push_str(&format!("am_search {}\n", p.classes));
    s.push_str(&format!("intr {}, {}\n", p.sim_threshold, p.index_threshold));
    s.push_str("halt\n");
    Ok(s)
}

/// Input stream for one window: time-major, channel-minor, repeated
/// once per part.
pub fn emg_stream(window: &[Vec<u8>], k: usize) -> Vec<u8> {
    let flat: Vec<u8> = window.iter().flatten().copied().collect();
    super::fold_stream(&flat, k)
}
