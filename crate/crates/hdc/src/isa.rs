//! The 26-bit microcode ISA: instruction types and binary
//! encode/decode.
//!
//! Word layout (bit 25 = MSB):
//!
//! ```text
//! NISC (bit 25 = 0):
//!   [25:23] ENCSEL  [22] SMEN  [21] SMSEL  [20] MXEN  [19] MXINV
//!   [18] MXSEL  [17:15] OP  [14] BNDEN  [13] BNDRST  [12] WBEN
//!   [11:6] RIDX  [5:0] WIDX
//! CISC (bit 25 = 1), opcode in [24:21]:
//!   0 AM_SEARCH  max_index[5:0]
//!   1 MIX        source[20:19] value[18:12] nbits[11:9]
//!   2 INTR       sim[20:9] idx[5:0]
//!   3 LOOP       iterations[20:11] end[9:0]
//!   4 JMP        target[9:0]
//!   5 PCNT       action[1:0]
//!   6 EVICT      plane[8:6] widx[5:0]
//!   7 LOAD       plane[8:6] ridx[5:0]
//!   8 HALT
//!   9-15 reserved
//! ```
//!
//! ENCSEL has four defined sources, so its MSB is always zero for a
//! valid NISC instruction; that bit doubles as the NISC/CISC select.
//! Decoding is strict: reserved opcodes and nonzero bits in unused
//! positions are rejected, which makes encode and decode exact
//! inverses on the valid space.

use crate::encoder::EncoderOpCode;
use thiserror::Error;

pub const WORD_BITS: u32 = 26;
pub const WORD_MASK: u32 = (1 << WORD_BITS) - 1;
/// 10-bit config-memory addresses bound program size.
pub const MAX_PROGRAM_WORDS: usize = 1024;
pub const MAX_LOOP_DEPTH: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IsaError {
    #[error("field {field} value {value} exceeds {bits} bits")]
    FieldOverflow { field: &'static str, value: u32, bits: u32 },
    #[error("word {0:#x} exceeds 26 bits")]
    WordOutOfRange(u32),
    #[error("reserved CISC opcode {0}")]
    ReservedOpcode(u8),
    #[error("reserved encoder opcode {0}")]
    ReservedEncoderOp(u8),
    #[error("reserved field bits set in word {0:#09x}")]
    ReservedBits(u32),
    #[error("loop end address {end} not beyond loop instruction at {at}")]
    LoopEndBeforeStart { at: u32, end: u32 },
}

/// Encoder input-stage source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncSelect {
    Zeros = 0,
    Seed = 1,
    AmRead = 2,
    EncReg = 3,
}

impl EncSelect {
    pub fn from_bits(bits: u8) -> Option<Self> {
        Some(match bits {
            0 => EncSelect::Zeros,
            1 => EncSelect::Seed,
            2 => EncSelect::AmRead,
            3 => EncSelect::EncReg,
            _ => return None,
        })
    }
}

/// One NISC word: direct drive of the datapath multiplexers and AM
/// address lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NiscInstruction {
    pub encsel: EncSelect,
    pub smen: bool,
    pub smsel: bool,
    pub mxen: bool,
    pub mxinv: bool,
    pub mxsel: bool,
    pub op: EncoderOpCode,
    pub bnden: bool,
    pub bndrst: bool,
    pub wben: bool,
    pub ridx: u8,
    pub widx: u8,
}

impl Default for NiscInstruction {
    fn default() -> Self {
        NiscInstruction {
            encsel: EncSelect::Zeros,
            smen: false,
            smsel: false,
            mxen: false,
            mxinv: false,
            mxsel: false,
            op: EncoderOpCode::PassA,
            bnden: false,
            bndrst: false,
            wben: false,
            ridx: 0,
            widx: 0,
        }
    }
}

/// Operand source of the MIX instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixSource {
    Immediate = 0,
    PartCounter = 1,
    External = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartCounterAction {
    Clear = 0,
    Inc = 1,
    Dec = 2,
}

/// Multicycle macro operations plus host-interaction and code-size
/// helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiscInstruction {
    AmSearch { max_index: u8 },
    Mix { source: MixSource, value: u8, nbits: u8 },
    Intr { sim_threshold: u16, index_threshold: u8 },
    LoopStart { iterations: u16, end_address: u16 },
    Jmp { target: u16 },
    PartCounter { action: PartCounterAction },
    EvictPlane { plane: u8, widx: u8 },
    LoadPlane { plane: u8, ridx: u8 },
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instruction {
    Nisc(NiscInstruction),
    Cisc(CiscInstruction),
}

fn check(field: &'static str, value: u32, bits: u32) -> Result<u32, IsaError> {
    if value >= 1 << bits {
        Err(IsaError::FieldOverflow { field, value, bits })
    } else {
        Ok(value)
    }
}

pub fn encode(instr: &Instruction) -> Result<u32, IsaError> {
    match instr {
        Instruction::Nisc(n) => {
            let mut w = 0u32;
            w |= (n.encsel as u32) << 23;
            w |= (n.smen as u32) << 22;
            w |= (n.smsel as u32) << 21;
            w |= (n.mxen as u32) << 20;
            w |= (n.mxinv as u32) << 19;
            w |= (n.mxsel as u32) << 18;
            w |= (n.op as u32) << 15;
            w |= (n.bnden as u32) << 14;
            w |= (n.bndrst as u32) << 13;
            w |= (n.wben as u32) << 12;
            w |= check("ridx", n.ridx as u32, 6)? << 6;
            w |= check("widx", n.widx as u32, 6)?;
            Ok(w)
        }
        Instruction::Cisc(c) => {
            let (opcode, operands) = match *c {
                CiscInstruction::AmSearch { max_index } => {
                    (0u32, check("max_index", max_index as u32, 6)?)
                }
                CiscInstruction::Mix { source, value, nbits } => (
                    1,
                    ((source as u32) << 19)
                        | (check("value", value as u32, 7)? << 12)
                        | (check("nbits", nbits as u32, 3)? << 9),
                ),
                CiscInstruction::Intr { sim_threshold, index_threshold } => (
                    2,
                    (check("sim_threshold", sim_threshold as u32, 12)? << 9)
                        | check("index_threshold", index_threshold as u32, 6)?,
                ),
                CiscInstruction::LoopStart { iterations, end_address } => (
                    3,
                    (check("iterations", iterations as u32, 10)? << 11)
                        | check("end_address", end_address as u32, 10)?,
                ),
                CiscInstruction::Jmp { target } => (4, check("target", target as u32, 10)?),
                CiscInstruction::PartCounter { action } => (5, action as u32),
                CiscInstruction::EvictPlane { plane, widx } => (
                    6,
                    (check("plane", plane as u32, 3)? << 6) | check("widx", widx as u32, 6)?,
                ),
                CiscInstruction::LoadPlane { plane, ridx } => (
                    7,
                    (check("plane", plane as u32, 3)? << 6) | check("ridx", ridx as u32, 6)?,
                ),
                CiscInstruction::Halt => (8, 0),
            };
            Ok((1 << 25) | (opcode << 21) | operands)
        }
    }
}

pub fn decode(word: u32) -> Result<Instruction, IsaError> {
    if word > WORD_MASK {
        return Err(IsaError::WordOutOfRange(word));
    }
    if word & (1 << 25) == 0 {
        let op_bits = ((word >> 15) & 0x7) as u8;
        let op = EncoderOpCode::from_bits(op_bits)
            .map_err(|_| IsaError::ReservedEncoderOp(op_bits))?;
        Ok(Instruction::Nisc(NiscInstruction {
            encsel: EncSelect::from_bits(((word >> 23) & 0x3) as u8).unwrap(),
            smen: word & (1 << 22) != 0,
            smsel: word & (1 << 21) != 0,
            mxen: word & (1 << 20) != 0,
            mxinv: word & (1 << 19) != 0,
            mxsel: word & (1 << 18) != 0,
            op,
            bnden: word & (1 << 14) != 0,
            bndrst: word & (1 << 13) != 0,
            wben: word & (1 << 12) != 0,
            ridx: ((word >> 6) & 0x3f) as u8,
            widx: (word & 0x3f) as u8,
        }))
    } else {
        let opcode = ((word >> 21) & 0xf) as u8;
        let payload = word & 0x1f_ffff;
        let strict = |used_mask: u32, instr: CiscInstruction| {
            if payload & !used_mask != 0 {
                Err(IsaError::ReservedBits(word))
            } else {
                Ok(Instruction::Cisc(instr))
            }
        };
        match opcode {
            0 => strict(0x3f, CiscInstruction::AmSearch { max_index: (payload & 0x3f) as u8 }),
            1 => {
                let source = match (payload >> 19) & 0x3 {
                    0 => MixSource::Immediate,
                    1 => MixSource::PartCounter,
                    2 => MixSource::External,
                    _ => return Err(IsaError::ReservedBits(word)),
                };
                strict(
                    (0x3 << 19) | (0x7f << 12) | (0x7 << 9),
                    CiscInstruction::Mix {
                        source,
                        value: ((payload >> 12) & 0x7f) as u8,
                        nbits: ((payload >> 9) & 0x7) as u8,
                    },
                )
            }
            2 => strict(
                (0xfff << 9) | 0x3f,
                CiscInstruction::Intr {
                    sim_threshold: ((payload >> 9) & 0xfff) as u16,
                    index_threshold: (payload & 0x3f) as u8,
                },
            ),
            3 => strict(
                (0x3ff << 11) | 0x3ff,
                CiscInstruction::LoopStart {
                    iterations: ((payload >> 11) & 0x3ff) as u16,
                    end_address: (payload & 0x3ff) as u16,
                },
            ),
            4 => strict(0x3ff, CiscInstruction::Jmp { target: (payload & 0x3ff) as u16 }),
            5 => {
                let action = match payload & 0x3 {
                    0 => PartCounterAction::Clear,
                    1 => PartCounterAction::Inc,
                    2 => PartCounterAction::Dec,
                    _ => return Err(IsaError::ReservedBits(word)),
                };
                strict(0x3, CiscInstruction::PartCounter { action })
            }
            6 => strict(
                (0x7 << 6) | 0x3f,
                CiscInstruction::EvictPlane {
                    plane: ((payload >> 6) & 0x7) as u8,
                    widx: (payload & 0x3f) as u8,
                },
            ),
            7 => strict(
                (0x7 << 6) | 0x3f,
                CiscInstruction::LoadPlane {
                    plane: ((payload >> 6) & 0x7) as u8,
                    ridx: (payload & 0x3f) as u8,
                },
            ),
            8 => strict(0, CiscInstruction::Halt),
            other => Err(IsaError::ReservedOpcode(other)),
        }
    }
}
