//! Associative memory: hypervector storage, register-file duty,
//! row-sequential Hamming search and the threshold-gated interrupt
//! predicate.

use crate::hv::{Geometry, HvError, HyperVector};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmError {
    #[error("row {0} out of range (am_rows = {1})")]
    RowOutOfRange(usize, usize),
    #[error("part {0} out of range (k = {1})")]
    PartOutOfRange(usize, usize),
    #[error("max_index {0} out of range (must be in 1..={1})")]
    MaxIndexOutOfRange(usize, usize),
    #[error(transparent)]
    Hv(#[from] HvError),
    #[error("image header mismatch: {0}")]
    ImageHeader(String),
    #[error("image truncated")]
    ImageTruncated,
}

/// Most-similar-entry result of an associative lookup: row index and
/// the Hamming distance accumulated over all K vector parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchResult {
    pub index: usize,
    pub distance: usize,
}

/// am_rows x K matrix of vector subparts. The highest row is the search
/// slot; memory initializes to all-zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociativeMemory {
    geometry: Geometry,
    rows: Vec<Vec<HyperVector>>,
}

impl AssociativeMemory {
    pub fn new(geometry: Geometry) -> Self {
        let width = geometry.width();
        let rows = (0..geometry.am_rows)
            .map(|_| (0..geometry.k).map(|_| HyperVector::zeros(width)).collect())
            .collect();
        AssociativeMemory { geometry, rows }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    fn check(&self, addr: usize, part: usize) -> Result<(), AmError> {
        if addr >= self.geometry.am_rows {
            return Err(AmError::RowOutOfRange(addr, self.geometry.am_rows));
        }
        if part >= self.geometry.k {
            return Err(AmError::PartOutOfRange(part, self.geometry.k));
        }
        Ok(())
    }

    pub fn write(&mut self, addr: usize, part: usize, v: HyperVector) -> Result<(), AmError> {
        self.check(addr, part)?;
        if v.width() != self.geometry.width() {
            return Err(HvError::WidthMismatch(v.width(), self.geometry.width()).into());
        }
        self.rows[addr][part] = v;
        Ok(())
    }

    pub fn read(&self, addr: usize, part: usize) -> Result<&HyperVector, AmError> {
        self.check(addr, part)?;
        Ok(&self.rows[addr][part])
    }

    /// Row-sequential lookup: compares the search slot against rows
    /// [0, max_index), accumulating per-part distances, and returns the
    /// minimum. Ties go to the lowest index.
    pub fn associative_search(&self, max_index: usize) -> Result<SearchResult, AmError> {
        if max_index < 1 || max_index > self.geometry.am_rows - 1 {
            return Err(AmError::MaxIndexOutOfRange(max_index, self.geometry.am_rows - 1));
        }
        let search = &self.rows[self.geometry.search_row()];
        let mut best = SearchResult { index: 0, distance: usize::MAX };
        for (r, row) in self.rows.iter().enumerate().take(max_index) {
            let mut dist = 0;
            for (part, sub) in row.iter().enumerate() {
                dist += sub.hamming(&search[part])?;
            }
            if dist < best.distance {
                best = SearchResult { index: r, distance: dist };
            }
        }
        Ok(best)
    }

    /// Binary memory image: header (d, k, am_rows as little-endian
    /// 32-bit), then rows in row-major, part-minor order, bit 0 = LSB
    /// of the first byte.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.geometry.d as u32).to_le_bytes())?;
        out.write_all(&(self.geometry.k as u32).to_le_bytes())?;
        out.write_all(&(self.geometry.am_rows as u32).to_le_bytes())?;
        for row in &self.rows {
            for part in row {
                out.write_all(&part.to_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self, AmError> {
        let mut header = [0u8; 12];
        input.read_exact(&mut header).map_err(|_| AmError::ImageTruncated)?;
        let d = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let k = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let am_rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let geometry = Geometry::new(d, k, am_rows)
            .map_err(|e| AmError::ImageHeader(e.to_string()))?;
        let width = geometry.width();
        let nbytes = width / 8;
        let mut am = AssociativeMemory::new(geometry);
        let mut buf = vec![0u8; nbytes];
        for r in 0..am_rows {
            for part in 0..k {
                input.read_exact(&mut buf).map_err(|_| AmError::ImageTruncated)?;
                am.rows[r][part] = HyperVector::from_bytes(width, &buf)?;
            }
        }
        Ok(am)
    }
}

/// Interrupt condition of the INTR instruction: both thresholds are
/// inclusive.
pub fn interrupt_eval(result: SearchResult, sim_threshold: usize, index_threshold: usize) -> bool {
    result.distance <= sim_threshold && result.index <= index_threshold
}
