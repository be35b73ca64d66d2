//! Default seeds for the datapath's "hardwired" randomness, plus the
//! key=value constants-file format that pins them for reproducible runs.
//!
//! The silicon design hardwires the seed vector S, the mixer
//! permutations and the manipulator's spread permutation at synthesis
//! time. The software model derives them from 64-bit seeds instead;
//! changing a seed changes every test vector downstream, so the
//! defaults are versioned here and can be overridden by a constants
//! file (see `HDC_SEED_FILE` in the CLI).

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeedFileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {0}: expected key=value")]
    Syntax(usize),
    #[error("line {0}: unknown key '{1}'")]
    UnknownKey(usize, String),
    #[error("line {0}: invalid integer")]
    BadValue(usize),
}

/// Seeds for every hardwired random structure in the datapath.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedConfig {
    /// Seed HD-vector S.
    pub s: u64,
    /// Mixer permutation pi0.
    pub pi0: u64,
    /// Mixer permutation pi1.
    pub pi1: u64,
    /// Similarity-manipulator spread permutation.
    pub spread: u64,
    /// Tie breaking in the reference bundler.
    pub tie: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        // Version 1 defaults. Do not change without regenerating every
        // frozen test vector.
        SeedConfig {
            s: 0x5eed_0001_cafe_0001,
            pi0: 0x5eed_0002_cafe_0002,
            pi1: 0x5eed_0003_cafe_0003,
            spread: 0x5eed_0004_cafe_0004,
            tie: 0x5eed_0005_cafe_0005,
        }
    }
}

impl SeedConfig {
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed_s={}", self.s);
        let _ = writeln!(out, "seed_pi0={}", self.pi0);
        let _ = writeln!(out, "seed_pi1={}", self.pi1);
        let _ = writeln!(out, "seed_spread={}", self.spread);
        let _ = writeln!(out, "seed_tie={}", self.tie);
        out
    }

    pub fn parse(text: &str) -> Result<Self, SeedFileError> {
        let mut cfg = SeedConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or(SeedFileError::Syntax(lineno + 1))?;
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|_| SeedFileError::BadValue(lineno + 1))?;
            match key.trim() {
                "seed_s" => cfg.s = value,
                "seed_pi0" => cfg.pi0 = value,
                "seed_pi1" => cfg.pi1 = value,
                "seed_spread" => cfg.spread = value,
                "seed_tie" => cfg.tie = value,
                other => {
                    return Err(SeedFileError::UnknownKey(lineno + 1, other.to_string()))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SeedFileError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = SeedConfig::default();
        assert_eq!(SeedConfig::parse(&cfg.to_file_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(SeedConfig::parse("seed_s"), Err(SeedFileError::Syntax(1))));
        assert!(matches!(
            SeedConfig::parse("seed_q=1"),
            Err(SeedFileError::UnknownKey(1, _))
        ));
        assert!(matches!(
            SeedConfig::parse("seed_s=abc"),
            Err(SeedFileError::BadValue(1))
        ));
    }

    #[test]
    fn comments_and_partial_overrides() {
        let cfg = SeedConfig::parse("# comment\nseed_s=99\n").unwrap();
        assert_eq!(cfg.s, 99);
        assert_eq!(cfg.pi0, SeedConfig::default().pi0);
    }
}
