//! End-to-end acceptance suite. Each test prints exactly one
//! `[accept NN] name: PASS|SKIP` line (run with `--nocapture` to see
//! them); a failure panics with the offending detail.
//!
//! Real-world datasets are optional: the language corpus is looked up
//! at `$HDC_LANG_CORPUS` (or `data/lang`), the gesture CSV at
//! `$HDC_EMG_DATASET` (or `data/emg.csv`), and the IMS vibration set
//! at `$HDC_IMS_DIR` (or `data/ims`). Absent datasets downgrade the
//! affected check to SKIP or to its synthetic substitute.

use hdc::algos::bearing::{
    bearing_encode, bearing_monitor, bearing_program, bearing_stream, calibrate_bearing,
    BearingParams,
};
use hdc::algos::emg::{emg_encode, emg_program, emg_stream, EmgParams};
use hdc::algos::lang::{fit_length, lang_encode, lang_program, lang_stream, to_symbols, LangParams};
use hdc::algos::{generate_program, run_program, train_prototypes, App, Bundling};
use hdc::am::AssociativeMemory;
use hdc::asm::{assemble, disassemble};
use hdc::datasets::{load_emg_csv, load_ims_bearing, load_text_corpus, synth_bearing, synth_emg, synth_lang};
use hdc::encoder::{im_map, manipulate, BundleCounterBank, DatapathConfig};
use hdc::hv::{majority_bundle_reference, Geometry, HyperVector};
use hdc::isa::{decode, encode, Instruction};
use hdc::seeds::SeedConfig;
use std::path::PathBuf;

fn pass(id: u32, name: &str) {
    println!("[accept {id:02}] {name}: PASS");
}

fn pass_note(id: u32, name: &str, note: &str) {
    println!("[accept {id:02}] {name}: PASS ({note})");
}

fn skip(id: u32, name: &str, why: &str) {
    println!("[accept {id:02}] {name}: SKIP ({why})");
}

fn fail(id: u32, name: &str, why: &str) -> ! {
    println!("[accept {id:02}] {name}: FAIL ({why})");
    panic!("[accept {id:02}] {name}: {why}");
}

fn cfg(d: usize, k: usize) -> DatapathConfig {
    DatapathConfig::new(Geometry::new(d, k, 32).unwrap(), SeedConfig::default()).unwrap()
}

fn optional_path(env: &str, fallback: &str) -> Option<PathBuf> {
    let p = std::env::var_os(env)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(fallback));
    p.exists().then_some(p)
}

fn total_distance(a: &[HyperVector], b: &[HyperVector]) -> usize {
    a.iter().zip(b).map(|(x, y)| x.hamming(y).unwrap()).sum()
}

fn nearest(parts: &[HyperVector], protos: &[Vec<HyperVector>]) -> usize {
    protos
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| total_distance(p, parts))
        .unwrap()
        .0
}

// --------------------------------------------------------------- 1

#[test]
fn accept_01_toolchain_round_trip() {
    const ID: u32 = 1;
    const NAME: &str = "toolchain round-trip";

    // Exhaustive macro-word space: every decodable word re-encodes to
    // itself bit for bit.
    let mut valid = 0u64;
    for low in 0..(1u32 << 25) {
        let word = (1 << 25) | low;
        if let Ok(instr) = decode(word) {
            valid += 1;
            if encode(&instr).unwrap() != word {
                fail(ID, NAME, &format!("macro word {word:#x} did not round-trip"));
            }
        }
    }
    if valid == 0 {
        fail(ID, NAME, "no valid macro words");
    }

    // 1e5 random decodable pipeline words.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
    let mut checked = 0u32;
    while checked < 100_000 {
        let word = rng.gen::<u32>() & ((1 << 25) - 1);
        if let Ok(instr) = decode(word) {
            checked += 1;
            if encode(&instr).unwrap() != word {
                fail(ID, NAME, &format!("pipeline word {word:#x} did not round-trip"));
            }
            if !matches!(instr, Instruction::Nisc(_)) {
                fail(ID, NAME, "bit 25 clear decoded as a macro instruction");
            }
        }
    }

    // Shipped programs assemble/disassemble stably at every fold.
    for app in [App::Lang, App::Emg, App::Bearing] {
        for k in [1usize, 2, 4] {
            let g = Geometry::new(2048, k, 32).unwrap();
            let text = generate_program(app, g).unwrap();
            let p1 = assemble(&text).unwrap();
            let p2 = assemble(&disassemble(&p1).unwrap()).unwrap();
            if p1.words != p2.words {
                fail(ID, NAME, &format!("{app} fold {k} assembly round-trip changed words"));
            }
            let mut bin = Vec::new();
            p1.write_binary(&mut bin).unwrap();
            let p3 = hdc::asm::Program::read_binary(&bin[..]).unwrap();
            if p1.words != p3.words {
                fail(ID, NAME, &format!("{app} fold {k} binary round-trip changed words"));
            }
        }
    }
    pass(ID, NAME);
}

// --------------------------------------------------------------- 2

fn manipulator_exactness(width: usize) -> Result<(), String> {
    let cfg = DatapathConfig::new(
        Geometry::new(width, 1, 32).unwrap(),
        SeedConfig::default(),
    )
    .unwrap();
    let v = HyperVector::random(width, 99);
    for w in 0u8..=127 {
        let m = manipulate(&v, w, &cfg.manipulator).unwrap();
        let got = v.hamming(&m).unwrap();
        let want = w as usize * (width / 128);
        if got != want {
            return Err(format!("width {width}, w {w}: flipped {got}, expected {want}"));
        }
    }
    Ok(())
}

#[test]
fn accept_02_manipulator_exactness() {
    const ID: u32 = 2;
    const NAME: &str = "similarity-manipulator exactness";
    for width in [128usize, 2048] {
        if let Err(e) = manipulator_exactness(width) {
            fail(ID, NAME, &e);
        }
    }
    pass(ID, NAME);
}

// --------------------------------------------------------------- 3

#[test]
fn accept_03_item_memory_quasi_orthogonality() {
    const ID: u32 = 3;
    const NAME: &str = "item-memory quasi-orthogonality";
    let cfg = cfg(2048, 1);
    let vectors: Vec<HyperVector> = (0..128u64)
        .map(|w| im_map(w, 7, &cfg.mixer, &cfg.mixer.seed_vector).unwrap())
        .collect();
    let mut sum = 0.0;
    let mut pairs = 0u32;
    for i in 0..vectors.len() {
        for j in (i + 1)..vectors.len() {
            let d = vectors[i].hamming(&vectors[j]).unwrap() as f64 / 2048.0;
            if !(0.42..=0.58).contains(&d) {
                fail(ID, NAME, &format!("pair ({i},{j}) normalized distance {d:.4}"));
            }
            sum += d;
            pairs += 1;
        }
    }
    let mean = sum / pairs as f64;
    if !(0.48..=0.52).contains(&mean) {
        fail(ID, NAME, &format!("mean normalized distance {mean:.4}"));
    }
    pass(ID, NAME);
}

// --------------------------------------------------------------- 4

fn bundler_fidelity(width: usize, seed: u64) -> Result<(), String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    for len in (1..=31usize).step_by(2) {
        for trial in 0..100 {
            let vs: Vec<HyperVector> =
                (0..len).map(|_| HyperVector::random(width, rng.gen())).collect();
            let mut bank = BundleCounterBank::new(width);
            for v in &vs {
                bank.accumulate(v).map_err(|e| e.to_string())?;
            }
            let oracle = majority_bundle_reference(&vs, 0).map_err(|e| e.to_string())?;
            if bank.threshold() != oracle {
                return Err(format!("width {width}, length {len}, trial {trial}: mismatch"));
            }
        }
    }
    Ok(())
}

#[test]
fn accept_04_bundler_fidelity() {
    const ID: u32 = 4;
    const NAME: &str = "counter-bundler fidelity";
    if let Err(e) = bundler_fidelity(512, 4) {
        fail(ID, NAME, &e);
    }
    pass(ID, NAME);
}

// --------------------------------------------------------------- 5

/// VM microcode decisions vs reference-encoder decisions on 200
/// synthetic items per application; returns the mismatch count.
fn vm_vs_reference(k: usize, seed: u64) -> Result<(), String> {
    let cfg = cfg(2048, k);
    let geometry = cfg.geometry;
    let width = geometry.width();
    let check =
        |app_name: &str, protos: &[Vec<HyperVector>], items: Vec<(Vec<u8>, Vec<HyperVector>)>,
         program_text: String|
         -> Result<(), String> {
            let program = assemble(&program_text).map_err(|e| e.to_string())?;
            for (i, (stream, reference_parts)) in items.into_iter().enumerate() {
                let machine = run_program(&cfg, &program, protos, stream, 100_000_000)
                    .map_err(|e| e.to_string())?;
                let vm_pred = machine.last_search.ok_or("no search result")?.index;
                let ref_pred = nearest(&reference_parts, protos);
                if vm_pred != ref_pred {
                    return Err(format!(
                        "{app_name} fold {k} item {i}: vm {vm_pred} != reference {ref_pred}"
                    ));
                }
            }
            Ok(())
        };

    // Text: 4 languages, 10 training + 50 test sentences each.
    {
        let corpus = synth_lang(4, 60, 100, seed);
        let mut per = vec![0usize; 4];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (c, s) in &corpus.sentences {
            let sym = fit_length(&to_symbols(s).unwrap(), 100);
            per[*c] += 1;
            if per[*c] <= 10 {
                train.push((*c, lang_encode(&sym, 4, &cfg, Bundling::FullPrecision).unwrap()));
            } else {
                test.push(sym);
            }
        }
        let protos = train_prototypes(&train).unwrap();
        let items = test
            .into_iter()
            .map(|sym| {
                let parts = lang_encode(&sym, 4, &cfg, Bundling::FullPrecision).unwrap();
                (lang_stream(&sym, k), parts)
            })
            .collect();
        let p = LangParams { classes: 4, ..LangParams::default() };
        check("text", &protos, items, lang_program(&p, geometry).unwrap())?;
    }

    // Gestures: 5 classes, 8 training + 40 test windows each.
    {
        let rec = synth_emg(5, 48, seed);
        let mut per = vec![0usize; 5];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (c, w) in &rec.windows {
            per[*c] += 1;
            if per[*c] <= 8 {
                train.push((*c, emg_encode(w, &cfg, Bundling::FullPrecision).unwrap()));
            } else {
                test.push(w.clone());
            }
        }
        let protos = train_prototypes(&train).unwrap();
        let items = test
            .into_iter()
            .map(|w| {
                let parts = emg_encode(&w, &cfg, Bundling::FullPrecision).unwrap();
                (emg_stream(&w, k), parts)
            })
            .collect();
        check("gesture", &protos, items, emg_program(&EmgParams::default(), geometry).unwrap())?;
    }

    // Vibration: healthy reference vs complement, 100 healthy + 100
    // drifted test records.
    {
        let healthy = synth_bearing(200, f64::INFINITY, seed);
        let faulty = synth_bearing(100, 0.0, seed ^ 0x0bad);
        let calib: Vec<Vec<f64>> =
            healthy.records.iter().take(100).map(|(_, s)| s.clone()).collect();
        let model = calibrate_bearing(&calib, &cfg, seed).unwrap();
        let complement: Vec<HyperVector> =
            model.reference_vector.iter().map(|v| v.complement()).collect();
        let protos = vec![model.reference_vector.clone(), complement];
        let _ = width;
        let items = healthy.records[100..]
            .iter()
            .chain(faulty.records.iter())
            .map(|(_, s)| {
                let parts = bearing_encode(s, model.norm_factor, &cfg, Bundling::FullPrecision)
                    .unwrap();
                (bearing_stream(s, model.norm_factor, k).unwrap(), parts)
            })
            .collect();
        check(
            "vibration",
            &protos,
            items,
            bearing_program(&BearingParams::default(), geometry).unwrap(),
        )?;
    }
    Ok(())
}

#[test]
fn accept_05_vm_vs_reference_decisions() {
    const ID: u32 = 5;
    const NAME: &str = "vm-vs-reference decision equivalence";
    if let Err(e) = vm_vs_reference(1, 0x55) {
        fail(ID, NAME, &e);
    }
    pass(ID, NAME);
}

// --------------------------------------------------------------- 6

#[test]
fn accept_06_cycle_counts() {
    const ID: u32 = 6;
    const NAME: &str = "cycle-count reproduction";
    let cfg = cfg(2048, 1);
    let g = cfg.geometry;
    let width = g.width();
    let zero_protos = |classes: usize| vec![vec![HyperVector::zeros(width)]; classes];

    // Gesture window.
    let program = assemble(&emg_program(&EmgParams::default(), g).unwrap()).unwrap();
    let window: Vec<Vec<u8>> = vec![vec![30u8; 64]; 5];
    let m = run_program(&cfg, &program, &zero_protos(5), emg_stream(&window, 1), 1_000_000).unwrap();
    let emg_cycles = m.cycles as f64;
    if !(678.0 * 0.95..=678.0 * 1.05).contains(&emg_cycles) {
        fail(ID, NAME, &format!("gesture window took {emg_cycles} cycles, want 678 +/- 5%"));
    }

    // Vibration measurement.
    let program = assemble(&bearing_program(&BearingParams::default(), g).unwrap()).unwrap();
    let m = run_program(&cfg, &program, &zero_protos(2), vec![1u8; 1250], 1_000_000).unwrap();
    let brg_cycles = m.cycles as f64;
    if !(12513.0 * 0.95..=12513.0 * 1.05).contains(&brg_cycles) {
        fail(ID, NAME, &format!("measurement took {brg_cycles} cycles, want 12513 +/- 5%"));
    }

    // 100-character sentence.
    let program = assemble(&lang_program(&LangParams::default(), g).unwrap()).unwrap();
    let sym: Vec<u8> = (0..100u32).map(|i| (i % 27) as u8).collect();
    let m = run_program(&cfg, &program, &zero_protos(21), lang_stream(&sym, 1), 1_000_000).unwrap();
    let sentence = m.cycles as f64;
    let per_char = sentence / 100.0;
    if !(12.0..=16.0).contains(&per_char) {
        fail(ID, NAME, &format!("{per_char} cycles/character, want 14 +/- 2"));
    }
    if !(1400.0 * 0.90..=1400.0 * 1.10).contains(&sentence) {
        fail(ID, NAME, &format!("sentence took {sentence} cycles, want 1400 +/- 10%"));
    }
    pass_note(
        ID,
        NAME,
        &format!("gesture {emg_cycles}, vibration {brg_cycles}, sentence {sentence}"),
    );
}

// --------------------------------------------------------------- 7

#[test]
fn accept_07_instruction_budgets() {
    const ID: u32 = 7;
    const NAME: &str = "instruction budgets";
    let g = Geometry::default_2048();
    let lens = [
        ("text n=4", assemble(&lang_program(&LangParams::default(), g).unwrap()).unwrap().len(), 16),
        (
            "text n=5",
            assemble(&lang_program(&LangParams { n: 5, ..LangParams::default() }, g).unwrap())
                .unwrap()
                .len(),
            16,
        ),
        ("gesture", assemble(&emg_program(&EmgParams::default(), g).unwrap()).unwrap().len(), 14),
        (
            "vibration",
            assemble(&bearing_program(&BearingParams::default(), g).unwrap()).unwrap().len(),
            11,
        ),
    ];
    for (name, len, budget) in lens {
        if len > budget {
            fail(ID, NAME, &format!("{name}: {len} words exceeds budget {budget}"));
        }
    }
    pass_note(
        ID,
        NAME,
        &format!("text {}/{} gesture {} vibration {} words", lens[0].1, lens[1].1, lens[2].1, lens[3].1),
    );
}

// --------------------------------------------------------------- 8

#[test]
fn accept_08_text_accuracy_full_scale() {
    const ID: u32 = 8;
    const NAME: &str = "text accuracy, full corpus";
    let Some(dir) = optional_path("HDC_LANG_CORPUS", "data/lang") else {
        skip(ID, NAME, "corpus not on disk");
        return;
    };
    let corpus = load_text_corpus(&dir).unwrap();
    let cfg = cfg(8192, 1);
    let (train, test) = corpus.split(5);
    let encode = |s: &str| {
        let sym = fit_length(&to_symbols(s).unwrap(), 100);
        lang_encode(&sym, 5, &cfg, Bundling::FullPrecision).unwrap()
    };
    let enc: Vec<(usize, Vec<HyperVector>)> =
        train.sentences.iter().map(|(c, s)| (*c, encode(s))).collect();
    let protos = train_prototypes(&enc).unwrap();
    let mut correct = 0usize;
    for (c, s) in &test.sentences {
        if nearest(&encode(s), &protos) == *c {
            correct += 1;
        }
    }
    let acc = correct as f64 / test.sentences.len() as f64;
    if acc < 0.93 {
        fail(ID, NAME, &format!("accuracy {acc:.4} below 0.93"));
    }
    pass_note(ID, NAME, &format!("accuracy {acc:.4}"));
}

// --------------------------------------------------------------- 9

#[test]
fn accept_09_text_accuracy_synthetic() {
    const ID: u32 = 9;
    const NAME: &str = "text accuracy, synthetic corpus";
    let cfg = cfg(2048, 1);
    let corpus = synth_lang(4, 350, 100, 0x1a6);
    let mut per = vec![0usize; 4];
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, s) in &corpus.sentences {
        let sym = fit_length(&to_symbols(s).unwrap(), 100);
        per[*c] += 1;
        if per[*c] <= 100 {
            train.push((*c, lang_encode(&sym, 4, &cfg, Bundling::FullPrecision).unwrap()));
        } else {
            test.push((*c, sym));
        }
    }
    assert_eq!(test.len(), 1000);
    let protos = train_prototypes(&train).unwrap();
    let mut correct = 0usize;
    for (c, sym) in &test {
        let parts = lang_encode(sym, 4, &cfg, Bundling::FullPrecision).unwrap();
        if nearest(&parts, &protos) == *c {
            correct += 1;
        }
    }
    let acc = correct as f64 / test.len() as f64;
    if acc < 0.95 {
        fail(ID, NAME, &format!("accuracy {acc:.4} below 0.95"));
    }
    pass_note(ID, NAME, &format!("accuracy {acc:.4} on 1000 sentences"));
}

// --------------------------------------------------------------- 10

#[test]
fn accept_10_gesture_accuracy() {
    const ID: u32 = 10;
    const NAME: &str = "gesture accuracy";
    if let Some(path) = optional_path("HDC_EMG_DATASET", "data/emg.csv") {
        let rec = load_emg_csv(&path).unwrap();
        let cfg = cfg(8192, 1);
        let classes = rec.windows.iter().map(|(c, _)| c + 1).max().unwrap();
        let mut per = vec![0usize; classes];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (c, w) in &rec.windows {
            let i = per[*c];
            per[*c] += 1;
            let enc = emg_encode(w, &cfg, Bundling::FullPrecision).unwrap();
            if i % 5 == 4 {
                test.push((*c, enc));
            } else {
                train.push((*c, enc));
            }
        }
        let protos = train_prototypes(&train).unwrap();
        let correct = test.iter().filter(|(c, e)| nearest(e, &protos) == *c).count();
        let acc = correct as f64 / test.len() as f64;
        if acc < 0.94 {
            fail(ID, NAME, &format!("real-data accuracy {acc:.4} below 0.94"));
        }
        pass_note(ID, NAME, &format!("real-data accuracy {acc:.4}"));
    } else {
        // Synthetic substitute: separable gestures at desk scale.
        let cfg = cfg(2048, 1);
        let rec = synth_emg(5, 100, 0xE9);
        let mut per = vec![0usize; 5];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (c, w) in &rec.windows {
            per[*c] += 1;
            let enc = emg_encode(w, &cfg, Bundling::FullPrecision).unwrap();
            if per[*c] <= 40 {
                train.push((*c, enc));
            } else {
                test.push((*c, enc));
            }
        }
        let protos = train_prototypes(&train).unwrap();
        let correct = test.iter().filter(|(c, e)| nearest(e, &protos) == *c).count();
        let acc = correct as f64 / test.len() as f64;
        if acc < 0.98 {
            fail(ID, NAME, &format!("synthetic accuracy {acc:.4} below 0.98"));
        }
        pass_note(ID, NAME, &format!("synthetic substitute, accuracy {acc:.4}; real dataset absent"));
    }
}

// --------------------------------------------------------------- 11

#[test]
fn accept_11_bearing_drift_trend() {
    const ID: u32 = 11;
    const NAME: &str = "vibration drift trend";
    let cfg = cfg(2048, 1);

    // Synthetic drift: 30 h at 10-minute spacing, drift at hour 20.
    let drift_at = 20.0;
    let rec = synth_bearing(180, drift_at, 0xB3);
    let calib: Vec<Vec<f64>> = rec.records.iter().take(100).map(|(_, s)| s.clone()).collect();
    let model = calibrate_bearing(&calib, &cfg, 0xB3).unwrap();
    // Threshold chosen after the fact from pre-drift statistics; the
    // monitor output itself does not depend on it except for alarms.
    let points = bearing_monitor(&rec.records, &model, &cfg, f64::MAX).unwrap();
    let pre: Vec<f64> =
        points.iter().filter(|p| p.hours < drift_at).map(|p| p.ema_distance).collect();
    let post: Vec<f64> =
        points.iter().filter(|p| p.hours >= drift_at).map(|p| p.ema_distance).collect();
    let mean = pre.iter().sum::<f64>() / pre.len() as f64;
    let sd = (pre.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / pre.len() as f64).sqrt();
    let threshold = mean + 5.0 * sd;
    let post_max = post.iter().cloned().fold(f64::MIN, f64::max);
    if post_max <= threshold {
        fail(ID, NAME, &format!("post-drift max {post_max:.1} within 5 sd of pre-drift mean"));
    }
    let alarmed = bearing_monitor(&rec.records, &model, &cfg, threshold).unwrap();
    if let Some(p) = alarmed.iter().find(|p| p.alarm && p.hours < drift_at) {
        fail(ID, NAME, &format!("false alarm at {:.2} h, before drift", p.hours));
    }
    if !alarmed.iter().any(|p| p.alarm) {
        fail(ID, NAME, "no alarm after drift");
    }

    // Optional real-data part: third bearing of the first IMS set.
    let ims_note = match optional_path("HDC_IMS_DIR", "data/ims") {
        Some(dir) => {
            let rec = load_ims_bearing(&dir, 4).unwrap();
            let calib: Vec<Vec<f64>> = rec
                .records
                .iter()
                .filter(|(h, _)| *h <= 24.0)
                .map(|(_, s)| s.clone())
                .collect();
            let model = calibrate_bearing(&calib, &cfg, 0xB3).unwrap();
            let points = bearing_monitor(&rec.records, &model, &cfg, f64::MAX).unwrap();
            let base: Vec<f64> =
                points.iter().filter(|p| p.hours <= 24.0).map(|p| p.ema_distance).collect();
            let base_mean = base.iter().sum::<f64>() / base.len() as f64;
            let end = points.last().unwrap().hours;
            let tail_max = points
                .iter()
                .filter(|p| p.hours >= end * 0.9)
                .map(|p| p.ema_distance)
                .fold(f64::MIN, f64::max);
            if tail_max < 3.0 * base_mean {
                fail(
                    ID,
                    NAME,
                    &format!("IMS tail max {tail_max:.1} below 3x baseline {base_mean:.1}"),
                );
            }
            format!("IMS tail/baseline {:.1}x", tail_max / base_mean)
        }
        None => "IMS data absent: SKIP".to_string(),
    };
    pass_note(ID, NAME, &format!("synthetic trend ok; {ims_note}"));
}

// --------------------------------------------------------------- 12

#[test]
fn accept_12_fold_invariance() {
    const ID: u32 = 12;
    const NAME: &str = "fold invariance";
    for k in [1usize, 2, 4] {
        let part_width = 2048 / k;
        if let Err(e) = manipulator_exactness(part_width) {
            fail(ID, NAME, &format!("fold {k}: {e}"));
        }
        if let Err(e) = bundler_fidelity(part_width, 12 + k as u64) {
            fail(ID, NAME, &format!("fold {k}: {e}"));
        }
    }
    for k in [2usize, 4] {
        if let Err(e) = vm_vs_reference(k, 0x55) {
            fail(ID, NAME, &e);
        }
    }

    // Folded associative search equals the flat-vector brute force.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0xF01D);
    for k in [1usize, 2, 4] {
        let g = Geometry::new(2048, k, 32).unwrap();
        let width = g.width();
        let mut am = AssociativeMemory::new(g);
        let rows: Vec<Vec<HyperVector>> = (0..32)
            .map(|_| (0..k).map(|_| HyperVector::random(width, rng.gen())).collect())
            .collect();
        for (addr, parts) in rows.iter().enumerate() {
            for (part, v) in parts.iter().enumerate() {
                am.write(addr, part, v.clone()).unwrap();
            }
        }
        let flat = |parts: &[HyperVector]| -> HyperVector {
            let mut out = HyperVector::zeros(2048);
            for (h, p) in parts.iter().enumerate() {
                for i in 0..width {
                    out.set(h * width + i, p.get(i));
                }
            }
            out
        };
        let query = flat(&rows[31]);
        let result = am.associative_search(31).unwrap();
        let oracle = (0..31)
            .map(|i| (i, flat(&rows[i]).hamming(&query).unwrap()))
            .min_by_key(|&(i, d)| (d, i))
            .unwrap();
        if (result.index, result.distance) != oracle {
            fail(
                ID,
                NAME,
                &format!("fold {k}: search {:?} != flat oracle {:?}", result, oracle),
            );
        }
    }
    pass(ID, NAME);
}
