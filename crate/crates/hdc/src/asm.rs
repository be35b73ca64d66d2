//! Textual assembler and disassembler for the microcode ISA.
//!
//! One instruction per line, `#` comments, `label:` definitions. NISC
//! instructions are written as datapath arrow chains:
//!
//! ```text
//! mem[12] -> mix0 -> bind_enc -> mem[11]
//! seed_vec -> man.ext -> bind_enc -> bundle
//! thresh -> mem[31]
//! ```
//!
//! The first token selects the encoder input (`zero_vec`, `seed_vec`,
//! `enc_reg`, `mem[N]`, or `thresh` for the counter-threshold op);
//! later tokens enable stages (`man.ext`, `man.reg`, `mix0`, `mix1`,
//! `mix0.inv`, `mix1.inv`), pick the encoder-unit op (`bind_enc`,
//! `and_enc`, `or_enc`, `not_a`, `pass_enc`), set flags (`bundle`,
//! `bndrst`) or name the write-back destination (`mem[N]`; `enc_reg`
//! is implicit and always written).
//!
//! CISC mnemonics: `hw.loopN iters, label`, `am_search n`,
//! `mix.ext nbits`, `mix.imm value, nbits`, `mix.part nbits`,
//! `intr sim, idx`, `pc.clear|pc.inc|pc.dec`, `evict plane, mem[N]`,
//! `load_plane plane, mem[N]`, `jmp label`, `halt`.

use crate::encoder::EncoderOpCode;
use crate::isa::{
    decode, encode, CiscInstruction, EncSelect, Instruction, IsaError, MixSource,
    NiscInstruction, PartCounterAction, MAX_LOOP_DEPTH, MAX_PROGRAM_WORDS,
};
use std::collections::HashMap;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: undefined label '{label}'")]
    UndefinedLabel { line: usize, label: String },
    #[error("line {line}: duplicate label '{label}'")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: hardware loop nesting exceeds {MAX_LOOP_DEPTH}")]
    LoopOverflow { line: usize },
    #[error("line {line}: loops are not well-nested")]
    BadNesting { line: usize },
    #[error("line {line}: {source}")]
    Encoding { line: usize, source: IsaError },
    #[error("program exceeds {MAX_PROGRAM_WORDS} words")]
    TooLong,
    #[error("empty program")]
    Empty,
    #[error("word {index} ({word:#09x}) does not decode: {source}")]
    Undecodable { index: usize, word: u32, source: IsaError },
    #[error("bad program file: {0}")]
    BadFile(String),
    #[error("io: {0}")]
    Io(String),
}

/// An assembled program: encoded words plus a source map for
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub words: Vec<u32>,
    /// 1-based source line per word; zeros when synthesized from binary.
    pub source_map: Vec<usize>,
}

impl Program {
    pub fn from_words(words: Vec<u32>) -> Result<Self, AsmError> {
        if words.len() > MAX_PROGRAM_WORDS {
            return Err(AsmError::TooLong);
        }
        for (index, &word) in words.iter().enumerate() {
            decode(word).map_err(|source| AsmError::Undecodable { index, word, source })?;
        }
        let source_map = vec![0; words.len()];
        Ok(Program { words, source_map })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn instruction(&self, pc: usize) -> Instruction {
        decode(self.words[pc]).expect("program words are pre-validated")
    }

    /// Binary format: magic "HDCP", version byte, word count (16-bit
    /// LE), then words zero-padded to 32-bit LE.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"HDCP")?;
        out.write_all(&[1u8])?;
        out.write_all(&(self.words.len() as u16).to_le_bytes())?;
        for w in &self.words {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, AsmError> {
        let mut header = [0u8; 7];
        input
            .read_exact(&mut header)
            .map_err(|e| AsmError::BadFile(e.to_string()))?;
        if &header[0..4] != b"HDCP" {
            return Err(AsmError::BadFile("missing HDCP magic".into()));
        }
        if header[4] != 1 {
            return Err(AsmError::BadFile(format!("unsupported version {}", header[4])));
        }
        let count = u16::from_le_bytes([header[5], header[6]]) as usize;
        let mut words = Vec::with_capacity(count);
        for _ in 0..count {
            let mut buf = [0u8; 4];
            input.read_exact(&mut buf).map_err(|_| AsmError::BadFile("truncated".into()))?;
            words.push(u32::from_le_bytes(buf));
        }
        Program::from_words(words)
    }
}

fn parse_mem(token: &str) -> Option<u8> {
    let inner = token.strip_prefix("mem[")?.strip_suffix(']')?;
    inner.trim().parse().ok()
}

fn parse_uint(s: &str, line: usize, what: &str) -> Result<u32, AsmError> {
    s.trim().parse().map_err(|_| AsmError::Syntax {
        line,
        msg: format!("expected integer for {what}, got '{}'", s.trim()),
    })
}

fn parse_nisc(line_no: usize, text: &str) -> Result<NiscInstruction, AsmError> {
    let mut n = NiscInstruction::default();
    let mut tokens = text.split("->").map(str::trim);
    let src = tokens.next().unwrap_or("");
    match src {
        "zero_vec" => n.encsel = EncSelect::Zeros,
        "seed_vec" => n.encsel = EncSelect::Seed,
        "enc_reg" => n.encsel = EncSelect::EncReg,
        "thresh" => {
            n.encsel = EncSelect::Zeros;
            n.op = EncoderOpCode::ThreshCounters;
        }
        other => {
            if let Some(r) = parse_mem(other) {
                n.encsel = EncSelect::AmRead;
                n.ridx = r;
            } else {
                return Err(AsmError::Syntax {
                    line: line_no,
                    msg: format!("unknown encoder source '{other}'"),
                });
            }
        }
    }
    for tok in tokens {
        match tok {
            "man.ext" => {
                n.smen = true;
                n.smsel = false;
            }
            "man.reg" => {
                n.smen = true;
                n.smsel = true;
            }
            "mix" | "mix0" => n.mxen = true,
            "mix1" => {
                n.mxen = true;
                n.mxsel = true;
            }
            "mix0.inv" => {
                n.mxen = true;
                n.mxinv = true;
            }
            "mix1.inv" => {
                n.mxen = true;
                n.mxsel = true;
                n.mxinv = true;
            }
            "bind_enc" => n.op = EncoderOpCode::Xor,
            "and_enc" => n.op = EncoderOpCode::And,
            "or_enc" => n.op = EncoderOpCode::Or,
            "not_a" => n.op = EncoderOpCode::NotA,
            "pass_enc" => n.op = EncoderOpCode::PassB,
            "bundle" => n.bnden = true,
            "bndrst" => n.bndrst = true,
            "enc_reg" => {} // output register is always written
            other => {
                if let Some(w) = parse_mem(other) {
                    n.wben = true;
                    n.widx = w;
                } else {
                    return Err(AsmError::Syntax {
                        line: line_no,
                        msg: format!("unknown datapath token '{other}'"),
                    });
                }
            }
        }
    }
    Ok(n)
}

enum PendingOperand {
    None,
    Label(String),
}

/// Assembles source text into a program; labels resolve to 10-bit
/// addresses, loop nesting is checked against the 3-frame hardware
/// limit.
pub fn assemble(text: &str) -> Result<Program, AsmError> {
    // First pass: strip comments/labels, collect label addresses.
    let mut labels: HashMap<String, u16> = HashMap::new();
    let mut lines: Vec<(usize, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut line = match raw.split_once('#') {
            Some((before, _)) => before.trim().to_string(),
            None => raw.trim().to_string(),
        };
        while let Some(colon) = line.find(':') {
            let (label, rest) = line.split_at(colon);
            let label = label.trim();
            if label.is_empty()
                || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
            {
                return Err(AsmError::Syntax {
                    line: line_no,
                    msg: format!("bad label '{label}'"),
                });
            }
            if labels.insert(label.to_string(), lines.len() as u16).is_some() {
                return Err(AsmError::DuplicateLabel { line: line_no, label: label.into() });
            }
            line = rest[1..].trim().to_string();
        }
        if !line.is_empty() {
            lines.push((line_no, line));
        }
    }
    if lines.is_empty() {
        return Err(AsmError::Empty);
    }
    if lines.len() > MAX_PROGRAM_WORDS {
        return Err(AsmError::TooLong);
    }

    let resolve = |name: &str, line: usize| -> Result<u16, AsmError> {
        if let Ok(addr) = name.trim().parse::<u16>() {
            return Ok(addr);
        }
        labels
            .get(name.trim())
            .copied()
            .ok_or_else(|| AsmError::UndefinedLabel { line, label: name.trim().into() })
    };

    // Second pass: parse instructions.
    let mut words = Vec::new();
    let mut source_map = Vec::new();
    let mut loop_ends: Vec<(usize, u16)> = Vec::new(); // (line, end address)
    for (addr, (line_no, line)) in lines.iter().enumerate() {
        let line_no = *line_no;
        let (mnemonic, rest) = match line.split_once(char::is_whitespace) {
            Some((m, r)) => (m, r.trim()),
            None => (line.as_str(), ""),
        };
        let mut operand = PendingOperand::None;
        let instr: Instruction = match mnemonic {
            "halt" => Instruction::Cisc(CiscInstruction::Halt),
            "jmp" => {
                operand = PendingOperand::Label(rest.to_string());
                Instruction::Cisc(CiscInstruction::Jmp { target: 0 })
            }
            "am_search" => Instruction::Cisc(CiscInstruction::AmSearch {
                max_index: parse_uint(rest, line_no, "max_index")? as u8,
            }),
            "intr" => {
                let (a, b) = rest.split_once(',').ok_or_else(|| AsmError::Syntax {
                    line: line_no,
                    msg: "intr takes 'sim, idx'".into(),
                })?;
                Instruction::Cisc(CiscInstruction::Intr {
                    sim_threshold: parse_uint(a, line_no, "sim threshold")? as u16,
                    index_threshold: parse_uint(b, line_no, "index threshold")? as u8,
                })
            }
            "mix.ext" => Instruction::Cisc(CiscInstruction::Mix {
                source: MixSource::External,
                value: 0,
                nbits: parse_uint(rest, line_no, "nbits")? as u8,
            }),
            "mix.part" => Instruction::Cisc(CiscInstruction::Mix {
                source: MixSource::PartCounter,
                value: 0,
                nbits: parse_uint(rest, line_no, "nbits")? as u8,
            }),
            "mix.imm" => {
                let (a, b) = rest.split_once(',').ok_or_else(|| AsmError::Syntax {
                    line: line_no,
                    msg: "mix.imm takes 'value, nbits'".into(),
                })?;
                Instruction::Cisc(CiscInstruction::Mix {
                    source: MixSource::Immediate,
                    value: parse_uint(a, line_no, "value")? as u8,
                    nbits: parse_uint(b, line_no, "nbits")? as u8,
                })
            }
            "pc.clear" => {
                Instruction::Cisc(CiscInstruction::PartCounter { action: PartCounterAction::Clear })
            }
            "pc.inc" => {
                Instruction::Cisc(CiscInstruction::PartCounter { action: PartCounterAction::Inc })
            }
            "pc.dec" => {
                Instruction::Cisc(CiscInstruction::PartCounter { action: PartCounterAction::Dec })
            }
            "evict" | "load_plane" => {
                let (a, b) = rest.split_once(',').ok_or_else(|| AsmError::Syntax {
                    line: line_no,
                    msg: format!("{mnemonic} takes 'plane, mem[N]'"),
                })?;
                let plane = parse_uint(a, line_no, "plane")? as u8;
                let slot = parse_mem(b.trim()).ok_or_else(|| AsmError::Syntax {
                    line: line_no,
                    msg: format!("expected mem[N], got '{}'", b.trim()),
                })?;
                if mnemonic == "evict" {
                    Instruction::Cisc(CiscInstruction::EvictPlane { plane, widx: slot })
                } else {
                    Instruction::Cisc(CiscInstruction::LoadPlane { plane, ridx: slot })
                }
            }
            m if m.starts_with("hw.loop") => {
                let (a, b) = rest.split_once(',').ok_or_else(|| AsmError::Syntax {
                    line: line_no,
                    msg: "hw.loop takes 'iterations, end_label'".into(),
                })?;
                let iterations = parse_uint(a, line_no, "iterations")? as u16;
                operand = PendingOperand::Label(b.to_string());
                Instruction::Cisc(CiscInstruction::LoopStart { iterations, end_address: 0 })
            }
            _ => Instruction::Nisc(parse_nisc(line_no, line)?),
        };
        let instr = match (instr, operand) {
            (Instruction::Cisc(CiscInstruction::Jmp { .. }), PendingOperand::Label(l)) => {
                Instruction::Cisc(CiscInstruction::Jmp { target: resolve(&l, line_no)? })
            }
            (
                Instruction::Cisc(CiscInstruction::LoopStart { iterations, .. }),
                PendingOperand::Label(l),
            ) => {
                let end_address = resolve(&l, line_no)?;
                if end_address as usize <= addr {
                    return Err(AsmError::Encoding {
                        line: line_no,
                        source: IsaError::LoopEndBeforeStart {
                            at: addr as u32,
                            end: end_address as u32,
                        },
                    });
                }
                Instruction::Cisc(CiscInstruction::LoopStart { iterations, end_address })
            }
            (i, _) => i,
        };
        // Loop-structure bookkeeping: frames pop when the current
        // address reaches their end.
        while loop_ends.last().map_or(false, |&(_, end)| end as usize == addr) {
            loop_ends.pop();
        }
        if let Instruction::Cisc(CiscInstruction::LoopStart { end_address, .. }) = instr {
            if let Some(&(_, outer_end)) = loop_ends.last() {
                if end_address > outer_end {
                    return Err(AsmError::BadNesting { line: line_no });
                }
            }
            loop_ends.push((line_no, end_address));
            if loop_ends.len() > MAX_LOOP_DEPTH {
                return Err(AsmError::LoopOverflow { line: line_no });
            }
        }
        let word = encode(&instr)
            .map_err(|source| AsmError::Encoding { line: line_no, source })?;
        words.push(word);
        source_map.push(line_no);
    }
    Ok(Program { words, source_map })
}

/// Canonical mnemonic for one instruction; addresses are emitted
/// numerically.
pub fn format_instruction(instr: &Instruction) -> String {
    match instr {
        Instruction::Nisc(n) => {
            let mut parts: Vec<String> = Vec::new();
            if n.op == EncoderOpCode::ThreshCounters {
                parts.push("thresh".into());
            } else {
                parts.push(match n.encsel {
                    EncSelect::Zeros => "zero_vec".into(),
                    EncSelect::Seed => "seed_vec".into(),
                    EncSelect::EncReg => "enc_reg".into(),
                    EncSelect::AmRead => format!("mem[{}]", n.ridx),
                });
            }
            if n.smen {
                parts.push(if n.smsel { "man.reg".into() } else { "man.ext".into() });
            }
            if n.mxen {
                let mix = match (n.mxsel, n.mxinv) {
                    (false, false) => "mix0",
                    (true, false) => "mix1",
                    (false, true) => "mix0.inv",
                    (true, true) => "mix1.inv",
                };
                parts.push(mix.into());
            }
            match n.op {
                EncoderOpCode::PassA | EncoderOpCode::ThreshCounters => {}
                EncoderOpCode::Xor => parts.push("bind_enc".into()),
                EncoderOpCode::And => parts.push("and_enc".into()),
                EncoderOpCode::Or => parts.push("or_enc".into()),
                EncoderOpCode::NotA => parts.push("not_a".into()),
                EncoderOpCode::PassB => parts.push("pass_enc".into()),
            }
            if n.bnden {
                parts.push("bundle".into());
            }
            if n.bndrst {
                parts.push("bndrst".into());
            }
            if n.wben {
                parts.push(format!("mem[{}]", n.widx));
            } else {
                parts.push("enc_reg".into());
            }
            parts.join(" -> ")
        }
        Instruction::Cisc(c) => match c {
            CiscInstruction::AmSearch { max_index } => format!("am_search {max_index}"),
            CiscInstruction::Mix { source, value, nbits } => match source {
                MixSource::External => format!("mix.ext {nbits}"),
                MixSource::PartCounter => format!("mix.part {nbits}"),
                MixSource::Immediate => format!("mix.imm {value}, {nbits}"),
            },
            CiscInstruction::Intr { sim_threshold, index_threshold } => {
                format!("intr {sim_threshold}, {index_threshold}")
            }
            CiscInstruction::LoopStart { iterations, end_address } => {
                format!("hw.loop0 {iterations}, {end_address}")
            }
            CiscInstruction::Jmp { target } => format!("jmp {target}"),
            CiscInstruction::PartCounter { action } => match action {
                PartCounterAction::Clear => "pc.clear".into(),
                PartCounterAction::Inc => "pc.inc".into(),
                PartCounterAction::Dec => "pc.dec".into(),
            },
            CiscInstruction::EvictPlane { plane, widx } => format!("evict {plane}, mem[{widx}]"),
            CiscInstruction::LoadPlane { plane, ridx } => {
                format!("load_plane {plane}, mem[{ridx}]")
            }
            CiscInstruction::Halt => "halt".into(),
        },
    }
}

/// Disassembles a program to canonical text that reassembles to the
/// identical words.
pub fn disassemble(program: &Program) -> Result<String, AsmError> {
    let mut out = String::new();
    for (index, &word) in program.words.iter().enumerate() {
        let instr =
            decode(word).map_err(|source| AsmError::Undecodable { index, word, source })?;
        out.push_str(&format_instruction(&instr));
        out.push('\n');
    }
    Ok(out)
}
