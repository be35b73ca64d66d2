//! Dimension-parametric bit-vector and permutation kernel.
//!
//! Everything else in the crate is built on three types: [`Geometry`]
//! (dimensionality and fold parameters), [`HyperVector`] (one vector
//! subpart, packed into machine words) and [`Permutation`] (a bijection
//! on bit positions).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HvError {
    #[error("width mismatch: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("empty input sequence")]
    EmptyInput,
}

/// Dimensionality parameters shared by the whole datapath.
///
/// `d` is the full HD dimensionality, `k` the vector fold. The datapath
/// processes one `d/k`-bit subpart per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub d: usize,
    pub k: usize,
    pub am_rows: usize,
}

impl Geometry {
    pub fn new(d: usize, k: usize, am_rows: usize) -> Result<Self, HvError> {
        let g = Geometry { d, k, am_rows };
        g.validate()?;
        Ok(g)
    }

    /// Default geometry: 32 x 2048-bit AM, fold 1.
    pub fn default_2048() -> Self {
        Geometry { d: 2048, k: 1, am_rows: 32 }
    }

    pub fn validate(&self) -> Result<(), HvError> {
        if self.k == 0 || self.d == 0 {
            return Err(HvError::InvalidGeometry("d and k must be nonzero".into()));
        }
        if self.d % self.k != 0 {
            return Err(HvError::InvalidGeometry(format!(
                "d = {} not divisible by k = {}",
                self.d, self.k
            )));
        }
        if (self.d / self.k) % 128 != 0 {
            return Err(HvError::InvalidGeometry(format!(
                "datapath width {} is not a multiple of 128",
                self.d / self.k
            )));
        }
        if self.am_rows < 2 {
            return Err(HvError::InvalidGeometry("am_rows must be at least 2".into()));
        }
        Ok(())
    }

    /// Datapath width in bits (one vector subpart).
    pub fn width(&self) -> usize {
        self.d / self.k
    }

    /// Index of the AM row that acts as the search vector.
    pub fn search_row(&self) -> usize {
        self.am_rows - 1
    }
}

/// One vector subpart: a fixed-width bit vector packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HyperVector {
    width: usize,
    words: Vec<u64>,
}

fn word_count(width: usize) -> usize {
    (width + 63) / 64
}

impl HyperVector {
    pub fn zeros(width: usize) -> Self {
        HyperVector { width, words: vec![0; word_count(width)] }
    }

    pub fn ones(width: usize) -> Self {
        let mut v = HyperVector { width, words: vec![!0u64; word_count(width)] };
        v.mask_tail();
        v
    }

    /// Deterministic pseudo-random vector; identical seed gives an
    /// identical vector for a given width.
    pub fn random(width: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut v = HyperVector {
            width,
            words: (0..word_count(width)).map(|_| rng.gen::<u64>()).collect(),
        };
        v.mask_tail();
        v
    }

    fn mask_tail(&mut self) {
        let rem = self.width % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.width);
        (self.words[i >> 6] >> (i & 63)) & 1 != 0
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.width);
        if bit {
            self.words[i >> 6] |= 1u64 << (i & 63);
        } else {
            self.words[i >> 6] &= !(1u64 << (i & 63));
        }
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut v = HyperVector {
            width: self.width,
            words: self.words.iter().map(|w| !w).collect(),
        };
        v.mask_tail();
        v
    }

    fn check_width(&self, other: &Self) -> Result<(), HvError> {
        if self.width != other.width {
            return Err(HvError::WidthMismatch(self.width, other.width));
        }
        Ok(())
    }

    /// Bitwise XOR: the BSC binding operator.
    pub fn bind(&self, other: &Self) -> Result<Self, HvError> {
        self.check_width(other)?;
        Ok(HyperVector {
            width: self.width,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        })
    }

    pub fn and(&self, other: &Self) -> Result<Self, HvError> {
        self.check_width(other)?;
        Ok(HyperVector {
            width: self.width,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        })
    }

    pub fn or(&self, other: &Self) -> Result<Self, HvError> {
        self.check_width(other)?;
        Ok(HyperVector {
            width: self.width,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        })
    }

    /// Hamming distance: popcount of the XOR.
    pub fn hamming(&self, other: &Self) -> Result<usize, HvError> {
        self.check_width(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Serialize to bytes, bit 0 = LSB of the first byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = (self.width + 7) / 8;
        let mut out = vec![0u8; nbytes];
        for (i, b) in out.iter_mut().enumerate() {
            let word = self.words[i / 8];
            *b = (word >> ((i % 8) * 8)) as u8;
        }
        out
    }

    pub fn from_bytes(width: usize, bytes: &[u8]) -> Result<Self, HvError> {
        if bytes.len() != (width + 7) / 8 {
            return Err(HvError::WidthMismatch(width, bytes.len() * 8));
        }
        let mut v = HyperVector::zeros(width);
        for (i, b) in bytes.iter().enumerate() {
            v.words[i / 8] |= (*b as u64) << ((i % 8) * 8);
        }
        v.mask_tail();
        Ok(v)
    }
}

/// A bijection on bit positions of a `width`-bit vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<u32>,
}

impl Permutation {
    pub fn identity(width: usize) -> Self {
        Permutation { map: (0..width as u32).collect() }
    }

    /// Uniform random bijection via seeded shuffle; deterministic per seed.
    pub fn random(width: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut map: Vec<u32> = (0..width as u32).collect();
        map.shuffle(&mut rng);
        Permutation { map }
    }

    pub fn width(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[u32] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i as u32 == m)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m as usize] = i as u32;
        }
        Permutation { map: inv }
    }

    /// Sequential composition: the returned permutation applies `self`
    /// first, then `other`.
    pub fn then(&self, other: &Permutation) -> Self {
        assert_eq!(self.width(), other.width());
        Permutation { map: self.map.iter().map(|&m| other.map[m as usize]).collect() }
    }

    /// out[map[i]] = v[i]; popcount is preserved.
    pub fn apply(&self, v: &HyperVector) -> Result<HyperVector, HvError> {
        if v.width() != self.width() {
            return Err(HvError::WidthMismatch(v.width(), self.width()));
        }
        let mut out = HyperVector::zeros(v.width());
        for (i, &m) in self.map.iter().enumerate() {
            if v.get(i) {
                out.set(m as usize, true);
            }
        }
        Ok(out)
    }
}

/// Arbitrary-precision per-bit majority vote. Exact ties (even input
/// counts only) are broken by seeded coin flips, never by iteration
/// order. This is the oracle the counter-based bundler is tested
/// against.
pub fn majority_bundle_reference(
    vs: &[HyperVector],
    tie_seed: u64,
) -> Result<HyperVector, HvError> {
    let first = vs.first().ok_or(HvError::EmptyInput)?;
    let width = first.width();
    for v in vs {
        first.check_width(v)?;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(tie_seed);
    let mut out = HyperVector::zeros(width);
    for i in 0..width {
        let ones = vs.iter().filter(|v| v.get(i)).count();
        let zeros = vs.len() - ones;
        let bit = match ones.cmp(&zeros) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => rng.gen::<bool>(),
        };
        out.set(i, bit);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_vector_is_deterministic() {
        let a = HyperVector::random(128, 42);
        let b = HyperVector::random(128, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn random_vectors_are_quasi_orthogonal() {
        // Monte-Carlo oracle: 1000 seed pairs, normalized distance
        // within [0.44, 0.56] and popcount within [896, 1152].
        for s in 0..1000u64 {
            let a = HyperVector::random(2048, 2 * s);
            let b = HyperVector::random(2048, 2 * s + 1);
            let d = a.hamming(&b).unwrap() as f64 / 2048.0;
            assert!((0.44..=0.56).contains(&d), "seed pair {s}: distance {d}");
            let p = a.popcount();
            assert!((896..=1152).contains(&p), "seed {s}: popcount {p}");
        }
    }

    #[test]
    fn bind_identities() {
        let v = HyperVector::random(256, 7);
        let z = HyperVector::zeros(256);
        assert_eq!(v.bind(&v).unwrap(), z);
        assert_eq!(v.bind(&z).unwrap(), v);
        let b = HyperVector::random(256, 8);
        let a = HyperVector::random(256, 9);
        assert_eq!(a.bind(&b).unwrap().bind(&b).unwrap(), a);
    }

    #[test]
    fn bind_width_mismatch() {
        let a = HyperVector::random(128, 1);
        let b = HyperVector::random(256, 1);
        assert!(matches!(a.bind(&b), Err(HvError::WidthMismatch(128, 256))));
    }

    #[test]
    fn permute_identities() {
        let v = HyperVector::random(512, 3);
        let id = Permutation::identity(512);
        assert_eq!(id.apply(&v).unwrap(), v);
        let p = Permutation::random(512, 11);
        let pv = p.apply(&v).unwrap();
        assert_eq!(p.inverse().apply(&pv).unwrap(), v);
        assert_eq!(pv.popcount(), v.popcount());
    }

    #[test]
    fn permutation_is_deterministic_and_invertible() {
        let p = Permutation::random(2048, 5);
        let q = Permutation::random(2048, 5);
        assert_eq!(p, q);
        assert!(p.then(&p.inverse()).is_identity());
        assert!(p.inverse().inverse().then(&p.inverse()).is_identity());
    }

    #[test]
    fn default_permutations_do_not_commute() {
        let seeds = crate::seeds::SeedConfig::default();
        let p0 = Permutation::random(2048, seeds.pi0);
        let p1 = Permutation::random(2048, seeds.pi1);
        assert_ne!(p0.then(&p1), p1.then(&p0));
    }

    #[test]
    fn hamming_basics() {
        let v = HyperVector::random(2048, 10);
        assert_eq!(v.hamming(&v).unwrap(), 0);
        assert_eq!(v.hamming(&v.complement()).unwrap(), 2048);
    }

    #[test]
    fn hamming_binomial_statistics() {
        // Binomial(2048, 0.5) has mean 1024 and std ~22.6; check both
        // over a 1000-pair Monte-Carlo sample.
        let n = 1000;
        let dists: Vec<f64> = (0..n)
            .map(|s| {
                let a = HyperVector::random(2048, 3000 + 2 * s);
                let b = HyperVector::random(2048, 3001 + 2 * s);
                a.hamming(&b).unwrap() as f64
            })
            .collect();
        let mean = dists.iter().sum::<f64>() / n as f64;
        let var = dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!((mean - 1024.0).abs() < 5.0, "mean {mean}");
        assert!((std - 22.6).abs() < 4.0, "std {std}");
    }

    #[test]
    fn majority_bundle_trivial_cases() {
        let v = HyperVector::random(256, 1);
        let a = HyperVector::random(256, 2);
        let b = HyperVector::random(256, 3);
        let vs = vec![v.clone(), v.clone(), v.clone()];
        assert_eq!(majority_bundle_reference(&vs, 0).unwrap(), v);
        let vs = vec![a.clone(), a.clone(), b];
        assert_eq!(majority_bundle_reference(&vs, 0).unwrap(), a);
        assert_eq!(majority_bundle_reference(&[], 0), Err(HvError::EmptyInput));
    }

    #[test]
    fn bundle_is_closer_than_random() {
        // hamming(bundle(a,b,c), a) < hamming(d, a) for independent
        // random d; Monte-Carlo over 1000 trials.
        let mut closer = 0;
        for t in 0..1000u64 {
            let a = HyperVector::random(2048, 4 * t);
            let b = HyperVector::random(2048, 4 * t + 1);
            let c = HyperVector::random(2048, 4 * t + 2);
            let d = HyperVector::random(2048, 4 * t + 3);
            let m = majority_bundle_reference(&[a.clone(), b, c], t).unwrap();
            if m.hamming(&a).unwrap() < d.hamming(&a).unwrap() {
                closer += 1;
            }
        }
        assert!(closer == 1000, "only {closer}/1000 bundles closer than random");
    }

    #[test]
    fn geometry_constraints() {
        assert!(Geometry::new(2048, 1, 32).is_ok());
        assert!(Geometry::new(2048, 3, 32).is_err()); // d % k != 0
        assert!(Geometry::new(192, 3, 32).is_err()); // width not multiple of 128
        assert!(Geometry::new(2048, 1, 1).is_err()); // am_rows < 2
        assert_eq!(Geometry::new(2048, 4, 32).unwrap().width(), 512);
    }

    #[test]
    fn byte_round_trip() {
        let v = HyperVector::random(2048, 77);
        let bytes = v.to_bytes();
        assert_eq!(HyperVector::from_bytes(2048, &bytes).unwrap(), v);
    }
}
