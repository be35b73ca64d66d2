//! The HD-Encoder datapath: mixing stage, similarity manipulator and
//! per-bit encoder units with 5-bit saturating bundle counters.

use crate::hv::{Geometry, HvError, HyperVector, Permutation};
use crate::seeds::SeedConfig;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncoderError {
    #[error(transparent)]
    Hv(#[from] HvError),
    #[error("mixer permutations commute for the given seeds")]
    CommutingPermutations,
    #[error("value {0} out of range for {1} bits")]
    ValueOutOfRange(u64, u32),
    #[error("part index {0} out of range for fold {1}")]
    PartOutOfRange(usize, usize),
    #[error("counter plane {0} out of range")]
    PlaneOutOfRange(usize),
    #[error("unknown encoder opcode {0}")]
    UnknownOpcode(u8),
}

/// Mixing stage: the two hardwired permutations, their inverses and the
/// hardwired seed vector S.
#[derive(Debug, Clone)]
pub struct MixerConfig {
    pub pi0: Permutation,
    pub pi1: Permutation,
    pub pi0_inv: Permutation,
    pub pi1_inv: Permutation,
    pub seed_vector: HyperVector,
}

impl MixerConfig {
    /// Builds the mixer for a datapath width. Rejects seed combinations
    /// whose permutations commute, since quasi-orthogonality of the
    /// rematerialized item vectors depends on non-commutation.
    pub fn new(width: usize, seeds: &SeedConfig) -> Result<Self, EncoderError> {
        let pi0 = Permutation::random(width, seeds.pi0);
        let pi1 = Permutation::random(width, seeds.pi1);
        if pi0.then(&pi1) == pi1.then(&pi0) {
            return Err(EncoderError::CommutingPermutations);
        }
        let pi0_inv = pi0.inverse();
        let pi1_inv = pi1.inverse();
        let seed_vector = HyperVector::random(width, seeds.s);
        Ok(MixerConfig { pi0, pi1, pi0_inv, pi1_inv, seed_vector })
    }

    pub fn width(&self) -> usize {
        self.pi0.width()
    }
}

/// Similarity manipulator: 128-bit unary stage, spread factor and the
/// hardwired spread permutation.
#[derive(Debug, Clone)]
pub struct ManipulatorConfig {
    pub spread_perm: Permutation,
    pub spread_factor: usize,
}

pub const UNARY_WIDTH: usize = 128;

impl ManipulatorConfig {
    pub fn new(width: usize, seeds: &SeedConfig) -> Result<Self, EncoderError> {
        if width % UNARY_WIDTH != 0 {
            return Err(EncoderError::Hv(HvError::InvalidGeometry(format!(
                "width {width} not a multiple of {UNARY_WIDTH}"
            ))));
        }
        Ok(ManipulatorConfig {
            spread_perm: Permutation::random(width, seeds.spread),
            spread_factor: width / UNARY_WIDTH,
        })
    }

    pub fn width(&self) -> usize {
        self.spread_perm.width()
    }
}

/// One mixing cycle: pi0 (select 0) or pi1 (select 1), or the matching
/// inverse when `invert` is set.
pub fn mix_step(
    v: &HyperVector,
    select: bool,
    invert: bool,
    cfg: &MixerConfig,
) -> Result<HyperVector, EncoderError> {
    let p = match (select, invert) {
        (false, false) => &cfg.pi0,
        (true, false) => &cfg.pi1,
        (false, true) => &cfg.pi0_inv,
        (true, true) => &cfg.pi1_inv,
    };
    Ok(p.apply(v)?)
}

/// Item-memory rematerialization: `nbits` mix steps applied to `start`,
/// consuming the bits of `w` LSB-first (pi0 for 0, pi1 for 1). Runs in
/// exactly `nbits` steps.
pub fn im_map(
    w: u64,
    nbits: u32,
    cfg: &MixerConfig,
    start: &HyperVector,
) -> Result<HyperVector, EncoderError> {
    if nbits < 64 && w >= 1u64 << nbits {
        return Err(EncoderError::ValueOutOfRange(w, nbits));
    }
    let mut v = start.clone();
    for k in 0..nbits {
        v = mix_step(&v, (w >> k) & 1 != 0, false, cfg)?;
    }
    Ok(v)
}

/// O(1) channel-label recursion: the next label is pi0 applied to the
/// previous one; the label for channel 0 is S by convention.
pub fn channel_label_next(
    prev: &HyperVector,
    cfg: &MixerConfig,
) -> Result<HyperVector, EncoderError> {
    Ok(cfg.pi0.apply(prev)?)
}

/// Per-part permutation for vector fold K: ceil(log2(K)) mix
/// permutations selected by the bits of the part index, LSB-first.
/// Identity for K = 1.
pub fn part_permutation(
    h: usize,
    k: usize,
    cfg: &MixerConfig,
) -> Result<Permutation, EncoderError> {
    if h >= k {
        return Err(EncoderError::PartOutOfRange(h, k));
    }
    let nbits = part_selector_bits(k);
    let mut p = Permutation::identity(cfg.width());
    for b in 0..nbits {
        let sel = (h >> b) & 1 != 0;
        p = p.then(if sel { &cfg.pi1 } else { &cfg.pi0 });
    }
    Ok(p)
}

/// Number of selector bits needed to give every part a unique
/// permutation: ceil(log2(k)), zero for k = 1.
pub fn part_selector_bits(k: usize) -> u32 {
    if k <= 1 {
        0
    } else {
        usize::BITS - (k - 1).leading_zeros()
    }
}

/// Thermometer code: `w` ones in the low positions of a 128-bit field.
fn thermometer(w: u8) -> HyperVector {
    let mut v = HyperVector::zeros(UNARY_WIDTH);
    for i in 0..(w as usize).min(UNARY_WIDTH) {
        v.set(i, true);
    }
    v
}

/// Builds the manipulator's flip mask for input word `w`: thermometer
/// code, spread to the datapath width by repeating each unary bit
/// `spread_factor` times, then the hardwired spread permutation.
pub fn manipulate_mask(w: u8, cfg: &ManipulatorConfig) -> Result<HyperVector, EncoderError> {
    if w > 127 {
        return Err(EncoderError::ValueOutOfRange(w as u64, 7));
    }
    let unary = thermometer(w);
    let mut spread = HyperVector::zeros(cfg.width());
    for i in 0..UNARY_WIDTH {
        if unary.get(i) {
            for j in 0..cfg.spread_factor {
                spread.set(i * cfg.spread_factor + j, true);
            }
        }
    }
    Ok(cfg.spread_perm.apply(&spread)?)
}

/// Similarity manipulation: flips exactly `w * spread_factor` bits of
/// the input vector.
pub fn manipulate(
    v: &HyperVector,
    w: u8,
    cfg: &ManipulatorConfig,
) -> Result<HyperVector, EncoderError> {
    let mask = manipulate_mask(w, cfg)?;
    Ok(v.bind(&mask)?)
}

/// Multi-cycle equal-probability variant: the single-cycle mask is
/// remixed through the mixing stage with the same input word before the
/// final XOR, randomizing the flip positions. The flip count stays
/// `w * spread_factor`.
pub fn manipulate_uniform(
    v: &HyperVector,
    w: u8,
    mixer: &MixerConfig,
    cfg: &ManipulatorConfig,
) -> Result<HyperVector, EncoderError> {
    let mask = manipulate_mask(w, cfg)?;
    let remixed = im_map(w as u64, 7, mixer, &mask)?;
    Ok(v.bind(&remixed)?)
}

/// Encoder-unit operation selected by the NISC OP field.
///
/// Operand `a` is the pipeline output of the preceding stages; operand
/// `b` is the current output register. Encoding 0b110 thresholds the
/// bundle counters (handled in the VM, where the counter bank lives);
/// 0b111 is reserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderOpCode {
    PassA = 0b000,
    Xor = 0b001,
    And = 0b010,
    Or = 0b011,
    NotA = 0b100,
    PassB = 0b101,
    ThreshCounters = 0b110,
}

impl EncoderOpCode {
    pub fn from_bits(bits: u8) -> Result<Self, EncoderError> {
        Ok(match bits {
            0b000 => EncoderOpCode::PassA,
            0b001 => EncoderOpCode::Xor,
            0b010 => EncoderOpCode::And,
            0b011 => EncoderOpCode::Or,
            0b100 => EncoderOpCode::NotA,
            0b101 => EncoderOpCode::PassB,
            0b110 => EncoderOpCode::ThreshCounters,
            other => return Err(EncoderError::UnknownOpcode(other)),
        })
    }
}

/// Bitwise encoder-unit operations. `ThreshCounters` is not a bitwise
/// function of (a, b) and is rejected here.
pub fn encoder_op(
    op: EncoderOpCode,
    a: &HyperVector,
    b: &HyperVector,
) -> Result<HyperVector, EncoderError> {
    Ok(match op {
        EncoderOpCode::PassA => a.clone(),
        EncoderOpCode::Xor => a.bind(b)?,
        EncoderOpCode::And => a.and(b)?,
        EncoderOpCode::Or => a.or(b)?,
        EncoderOpCode::NotA => a.complement(),
        EncoderOpCode::PassB => b.clone(),
        EncoderOpCode::ThreshCounters => {
            return Err(EncoderError::UnknownOpcode(op as u8))
        }
    })
}

pub const COUNTER_MAX: u8 = 31;
pub const COUNTER_RESET: u8 = 16;
pub const COUNTER_PLANES: usize = 5;

/// One saturating bidirectional 5-bit counter per vector dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleCounterBank {
    counters: Vec<u8>,
}

impl BundleCounterBank {
    pub fn new(width: usize) -> Self {
        BundleCounterBank { counters: vec![COUNTER_RESET; width] }
    }

    pub fn width(&self) -> usize {
        self.counters.len()
    }

    pub fn reset(&mut self) {
        self.counters.fill(COUNTER_RESET);
    }

    pub fn get(&self, i: usize) -> u8 {
        self.counters[i]
    }

    /// Increment (saturating at 31) where v is 1, decrement (saturating
    /// at 0) where v is 0.
    pub fn accumulate(&mut self, v: &HyperVector) -> Result<(), EncoderError> {
        if v.width() != self.counters.len() {
            return Err(HvError::WidthMismatch(v.width(), self.counters.len()).into());
        }
        for (i, c) in self.counters.iter_mut().enumerate() {
            if v.get(i) {
                *c = (*c + 1).min(COUNTER_MAX);
            } else {
                *c = c.saturating_sub(1);
            }
        }
        Ok(())
    }

    /// Bit i of the result is 1 iff counter i >= 16. A counter exactly
    /// at the reset value yields 1.
    pub fn threshold(&self) -> HyperVector {
        let mut out = HyperVector::zeros(self.counters.len());
        for (i, &c) in self.counters.iter().enumerate() {
            if c >= COUNTER_RESET {
                out.set(i, true);
            }
        }
        out
    }

    /// Bit-serial eviction: returns bit `plane` (LSB = plane 0) of every
    /// counter as one vector. One invocation models one eviction cycle.
    pub fn evict_plane(&self, plane: usize) -> Result<HyperVector, EncoderError> {
        if plane >= COUNTER_PLANES {
            return Err(EncoderError::PlaneOutOfRange(plane));
        }
        let mut out = HyperVector::zeros(self.counters.len());
        for (i, &c) in self.counters.iter().enumerate() {
            if (c >> plane) & 1 != 0 {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    /// Inverse of `evict_plane`.
    pub fn load_plane(&mut self, plane: usize, v: &HyperVector) -> Result<(), EncoderError> {
        if plane >= COUNTER_PLANES {
            return Err(EncoderError::PlaneOutOfRange(plane));
        }
        if v.width() != self.counters.len() {
            return Err(HvError::WidthMismatch(v.width(), self.counters.len()).into());
        }
        for (i, c) in self.counters.iter_mut().enumerate() {
            if v.get(i) {
                *c |= 1 << plane;
            } else {
                *c &= !(1 << plane);
            }
        }
        Ok(())
    }
}

/// Output register plus bundle counters: the mutable encoder state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderState {
    pub output_register: HyperVector,
    pub counters: BundleCounterBank,
}

impl EncoderState {
    pub fn new(width: usize) -> Self {
        EncoderState {
            output_register: HyperVector::zeros(width),
            counters: BundleCounterBank::new(width),
        }
    }
}

/// Full datapath configuration for one geometry: mixer, manipulator and
/// the geometry itself. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct DatapathConfig {
    pub geometry: Geometry,
    pub mixer: MixerConfig,
    pub manipulator: ManipulatorConfig,
    pub seeds: SeedConfig,
}

impl DatapathConfig {
    pub fn new(geometry: Geometry, seeds: SeedConfig) -> Result<Self, EncoderError> {
        geometry.validate()?;
        let width = geometry.width();
        Ok(DatapathConfig {
            geometry,
            mixer: MixerConfig::new(width, &seeds)?,
            manipulator: ManipulatorConfig::new(width, &seeds)?,
            seeds,
        })
    }
}
