//! Text language identification over a 27-symbol alphabet (a-z plus
//! space) using permute-and-bind n-grams.
//!
//! Per character the running n-gram is updated recursively through a
//! FIFO of aged character vectors:
//!
//! ```text
//! G_t = pi0(G_{t-1}) xor cv_t xor pi0^n(cv_{t-n})
//! ```
//!
//! and every updated G_t (warm-up partials included, plus the initial
//! zero register) is bundled into the sentence vector. The microcode
//! and the reference encoder share this exact constituent set so that
//! their outputs are bit-identical whenever the bundle is short enough
//! for the 5-bit counters to be exact.

use super::{Accumulator, AlgoError, Bundling};
use crate::encoder::{im_map, part_permutation, part_selector_bits};
use crate::encoder::DatapathConfig;
use crate::hv::{Geometry, HyperVector};

pub const ALPHABET: usize = 27;
pub const SYMBOL_BITS: u8 = 5;

/// a-z map to 0..=25, space to 26. Everything else is rejected;
/// upstream cleaning is the datasets module's job.
pub fn symbol_index(c: char) -> Option<u8> {
    match c {
        'a'..='z' => Some(c as u8 - b'a'),
        ' ' => Some(26),
        _ => None,
    }
}

pub fn to_symbols(text: &str) -> Result<Vec<u8>, AlgoError> {
    text.chars()
        .map(|c| symbol_index(c).ok_or(AlgoError::BadSymbol(c as u8)))
        .collect()
}

/// Normalizes a symbol sequence to the fixed sentence length the
/// microcode loop consumes: longer input is truncated, shorter input
/// cycles from its own start (an empty input becomes all spaces).
pub fn fit_length(symbols: &[u8], len: usize) -> Vec<u8> {
    if symbols.is_empty() {
        return vec![26; len];
    }
    symbols.iter().copied().cycle().take(len).collect()
}

#[derive(Debug, Clone)]
pub struct LangParams {
    /// n-gram size; 2..=5 fit the memory map.
    pub n: usize,
    /// Characters consumed per classification.
    pub sentence_len: usize,
    /// Number of language prototypes searched.
    pub classes: usize,
    pub sim_threshold: u16,
    pub index_threshold: u8,
}

impl Default for LangParams {
    fn default() -> Self {
        // n = 4 keeps the per-character loop at its tightest; n = 5 is
        // the accuracy setting and costs one extra word and cycle.
        LangParams { n: 4, sentence_len: 100, classes: 21, sim_threshold: 400, index_threshold: 2 }
    }
}

fn check_params(p: &LangParams) -> Result<(usize, usize), AlgoError> {
    if !(2..=5).contains(&p.n) {
        return Err(AlgoError::BadNgram(p.n));
    }
    // Slot map: FIFO head at 31-n .. tail at 30, partial at 30-n;
    // prototypes live below the partial slot.
    let partial = 30 - p.n;
    let head = 31 - p.n;
    if p.classes > partial {
        return Err(AlgoError::TooManyClasses { classes: p.classes, max: partial });
    }
    Ok((head, partial))
}

/// Reference sentence encoder: one vector per geometry part. Symbols
/// are alphabet indices in [0, 26].
pub fn lang_encode(
    symbols: &[u8],
    n: usize,
    cfg: &DatapathConfig,
    bundling: Bundling,
) -> Result<Vec<HyperVector>, AlgoError> {
    if !(2..=5).contains(&n) {
        return Err(AlgoError::BadNgram(n));
    }
    if let Some(&bad) = symbols.iter().find(|&&s| s as usize >= ALPHABET) {
        return Err(AlgoError::BadSymbol(bad));
    }
    let k = cfg.geometry.k;
    let width = cfg.geometry.width();
    let mut parts = Vec::with_capacity(k);
    for h in 0..k {
        let pp = part_permutation(h, k, &cfg.mixer)?;
        let mut fifo = vec![HyperVector::zeros(width); n];
        let mut g = HyperVector::zeros(width);
        let mut acc = Accumulator::new(width, bundling);
        acc.accumulate(&g)?;
        for &sym in symbols {
            let cancel = cfg.mixer.pi0.apply(&fifo[n - 1])?;
            let partial = cfg.mixer.pi0.apply(&g)?.bind(&cancel)?;
            for i in (1..n).rev() {
                fifo[i] = cfg.mixer.pi0.apply(&fifo[i - 1])?;
            }
            let cv = pp.apply(&im_map(sym as u64, SYMBOL_BITS as u32, &cfg.mixer, &cfg.mixer.seed_vector)?)?;
            fifo[0] = cv.clone();
            g = partial.bind(&cv)?;
            acc.accumulate(&g)?;
        }
        parts.push(acc.threshold());
    }
    Ok(parts)
}

/// Microcode for one sentence classification. At fold 1 the loop body
/// is 9 words (15 cycles per character at n = 4); folded variants wrap
/// it in a part loop driven by the part-index counter.
pub fn lang_program(p: &LangParams, geometry: Geometry) -> Result<String, AlgoError> {
    let (head, partial) = check_params(p)?;
    let mut s = String::new();
    let body = |s: &mut String, geometry: Geometry| {
        // Bundle the previous n-gram while fetching the aged FIFO tail.
        s.push_str("  mem[30] -> mix0 -> bundle -> enc_reg\n");
        s.push_str(&format!("  mem[{partial}] -> mix0 -> bind_enc -> mem[{partial}]\n"));
        for j in (head..30).rev() {
            s.push_str(&format!("  mem[{j}] -> mix0 -> mem[{}]\n", j + 1));
        }
        s.push_str("  seed_vec -> enc_reg\n");
        s.push_str(&format!("  mix.ext {SYMBOL_BITS}\n"));
        if geometry.k > 1 {
            s.push_str(&format!("  mix.part {}\n", part_selector_bits(geometry.k)));
        }
        s.push_str(&format!("  enc_reg -> mem[{head}]\n"));
        s.push_str(&format!("  mem[{partial}] -> bind_enc -> mem[{partial}]\n"));
    };
    if geometry.k == 1 {
        s.push_str(&format!("hw.loop0 {}, char_end\n", p.sentence_len));
        body(&mut s, geometry);
        s.push_str("char_end:\n");
        s.push_str("enc_reg -> bundle -> enc_reg\n");
        s.push_str(&format!("thresh -> mem[{}]\n", geometry.search_row()));
    } else {
        s.push_str("pc.clear\n");
        s.push_str(&format!("hw.loop0 {}, part_end\n", geometry.k));
        s.push_str("zero_vec -> bndrst -> enc_reg\n");
        s.push_str(&format!("hw.loop1 {}, char_end\n", p.sentence_len));
        body(&mut s, geometry);
        s.push_str("char_end:\n");
        s.push_str("enc_reg -> bundle -> enc_reg\n");
        s.push_str(&format!("thresh -> mem[{}]\n", geometry.search_row()));
        s.push_str("pc.inc\n");
        s.push_str("part_end:\n");
    }
    s.push_str(&format!("am_search {}\n", p.classes));
    s.push_str(&format!("intr {}, {}\n", p.sim_threshold, p.index_threshold));
    s.push_str("halt\n");
    Ok(s)
}

/// Input stream for one sentence: symbol indices, repeated once per
/// part for folded geometries.
pub fn lang_stream(symbols: &[u8], k: usize) -> Vec<u8> {
    super::fold_stream(symbols, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble;
    use crate::seeds::SeedConfig;
    use crate::vm::{InputStream, Machine};

    #[test]
    fn fit_length_cycles_and_truncates() {
        assert_eq!(fit_length(&[1, 2, 3], 7), vec![1, 2, 3, 1, 2, 3, 1]);
        assert_eq!(fit_length(&[1, 2, 3], 2), vec![1, 2]);
        assert_eq!(fit_length(&[], 3), vec![26, 26, 26]);
    }

    fn cfg(k: usize) -> DatapathConfig {
        DatapathConfig::new(Geometry::new(2048, k, 32).unwrap(), SeedConfig::default()).unwrap()
    }

    fn run_vm(symbols: &[u8], p: &LangParams, cfg: &DatapathConfig) -> Machine {
        let mut params = p.clone();
        params.sentence_len = symbols.len();
        let text = lang_program(&params, cfg.geometry).unwrap();
        let program = assemble(&text).unwrap();
        let mut m = Machine::new(cfg.clone(), &program);
        let mut stream = InputStream::new(lang_stream(symbols, cfg.geometry.k)).unwrap();
        m.run(&mut stream, 1_000_000).unwrap();
        m
    }

    #[test]
    fn symbol_mapping() {
        assert_eq!(symbol_index('a'), Some(0));
        assert_eq!(symbol_index('z'), Some(25));
        assert_eq!(symbol_index(' '), Some(26));
        assert_eq!(symbol_index('A'), None);
        assert!(matches!(to_symbols("a!b"), Err(AlgoError::BadSymbol(_))));
    }

    #[test]
    fn constant_sentence_collapses_to_its_ngram() {
        // 100 identical characters: from t = n on every n-gram is the
        // same vector X, which then dominates the majority bundle.
        let cfg = cfg(1);
        let symbols = vec![0u8; 100];
        let out = lang_encode(&symbols, 4, &cfg, Bundling::FullPrecision).unwrap();
        let cv = im_map(0, 5, &cfg.mixer, &cfg.mixer.seed_vector).unwrap();
        let mut x = HyperVector::zeros(2048);
        for j in 0..4 {
            let mut aged = cv.clone();
            for _ in 0..j {
                aged = cfg.mixer.pi0.apply(&aged).unwrap();
            }
            x = x.bind(&aged).unwrap();
        }
        assert_eq!(out[0], x);
    }

    #[test]
    fn single_symbol_sentence_is_its_partial_ngram() {
        // Constituents {0, G_1}: agreement keeps 0-bits, the single
        // disagreeing bit ties to 1 — i.e. the result is G_1 itself.
        let cfg = cfg(1);
        let out = lang_encode(&[7], 4, &cfg, Bundling::FullPrecision).unwrap();
        let cv = im_map(7, 5, &cfg.mixer, &cfg.mixer.seed_vector).unwrap();
        assert_eq!(out[0], cv);
    }

    #[test]
    fn vm_matches_reference_exactly_on_short_sentence() {
        // 20 symbols: 21 bundle constituents, within the exactness
        // range of the 5-bit counters, so the VM output must equal the
        // full-precision reference bit for bit.
        let cfg = cfg(1);
        let symbols: Vec<u8> = (0..20u32).map(|i| ((i * 7 + 3) % 27) as u8).collect();
        let reference = lang_encode(&symbols, 4, &cfg, Bundling::FullPrecision).unwrap();
        let hw = lang_encode(&symbols, 4, &cfg, Bundling::Hardware).unwrap();
        let m = run_vm(&symbols, &LangParams::default(), &cfg);
        assert_eq!(m.am.read(31, 0).unwrap(), &reference[0]);
        assert_eq!(hw[0], reference[0]);
    }

    #[test]
    fn vm_matches_hardware_reference_on_long_sentence() {
        let cfg = cfg(1);
        let symbols: Vec<u8> = (0..100u32).map(|i| ((i * 11 + 5) % 27) as u8).collect();
        let hw = lang_encode(&symbols, 4, &cfg, Bundling::Hardware).unwrap();
        let m = run_vm(&symbols, &LangParams::default(), &cfg);
        assert_eq!(m.am.read(31, 0).unwrap(), &hw[0]);
    }

    #[test]
    fn vm_matches_hardware_reference_folded() {
        for k in [2, 4] {
            let cfg = cfg(k);
            let symbols: Vec<u8> = (0..60u32).map(|i| ((i * 5 + 1) % 27) as u8).collect();
            let hw = lang_encode(&symbols, 4, &cfg, Bundling::Hardware).unwrap();
            let m = run_vm(&symbols, &LangParams::default(), &cfg);
            for h in 0..k {
                assert_eq!(m.am.read(31, h).unwrap(), &hw[h], "k={k} part={h}");
            }
        }
    }

    #[test]
    fn ngram_five_is_supported() {
        let cfg = cfg(1);
        let symbols: Vec<u8> = (0..30u32).map(|i| ((i * 3 + 2) % 27) as u8).collect();
        let hw = lang_encode(&symbols, 5, &cfg, Bundling::Hardware).unwrap();
        let params = LangParams { n: 5, ..LangParams::default() };
        let m = run_vm(&symbols, &params, &cfg);
        assert_eq!(m.am.read(31, 0).unwrap(), &hw[0]);
    }

    #[test]
    fn program_word_and_cycle_budget() {
        let cfg = cfg(1);
        let text = lang_program(&LangParams::default(), cfg.geometry).unwrap();
        let program = assemble(&text).unwrap();
        assert!(program.len() <= 16, "{} words", program.len());
        let symbols: Vec<u8> = (0..100).map(|i| (i % 27) as u8).collect();
        let m = run_vm(&symbols, &LangParams::default(), &cfg);
        let per_char = (m.cycles as f64 - 27.0) / 100.0;
        assert!((12.0..=16.0).contains(&per_char), "per-char {per_char}");
        assert!((1260..=1540).contains(&(m.cycles as usize)), "{}", m.cycles);
    }
}
