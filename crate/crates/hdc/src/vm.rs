//! Cycle-accurate virtual machine for the microcode ISA.
//!
//! Costs per instruction: every datapath (NISC) word takes 1 cycle;
//! `mix` takes nbits + 2; `am_search n` takes (n + 2) * K for K vector
//! parts per row; `halt` is free; every other control word takes 1.

use crate::am::{interrupt_eval, AmError, AssociativeMemory, SearchResult};
use crate::asm::{format_instruction, Program};
use crate::encoder::{
    encoder_op, manipulate, mix_step, DatapathConfig, EncoderError, EncoderOpCode, EncoderState,
};
use crate::hv::{HvError, HyperVector};
use crate::isa::{
    CiscInstruction, EncSelect, Instruction, MixSource, NiscInstruction, PartCounterAction,
    MAX_LOOP_DEPTH,
};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VmError {
    #[error("input stream underrun at pc {pc}")]
    StreamUnderrun { pc: usize },
    #[error("hardware loop overflow at pc {pc}: depth limit is {MAX_LOOP_DEPTH}")]
    LoopOverflow { pc: usize },
    #[error("cycle limit of {0} exceeded before halt")]
    CycleLimit(u64),
    #[error("program counter {0} outside program")]
    PcOutOfRange(usize),
    #[error("host writes to the search row (row {0}) are not allowed")]
    SearchRowWrite(usize),
    #[error("sample {0} does not fit in 7 bits")]
    SampleOutOfRange(u8),
    #[error(transparent)]
    Am(#[from] AmError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Hv(#[from] HvError),
}

/// 7-bit input samples consumed by `man.ext` and `mix.ext`.
#[derive(Debug, Clone)]
pub struct InputStream {
    samples: Vec<u8>,
    pos: usize,
}

impl InputStream {
    pub fn new(samples: Vec<u8>) -> Result<Self, VmError> {
        if let Some(&bad) = samples.iter().find(|&&s| s > 127) {
            return Err(VmError::SampleOutOfRange(bad));
        }
        Ok(InputStream { samples, pos: 0 })
    }

    pub fn empty() -> Self {
        InputStream { samples: Vec::new(), pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.samples.len() - self.pos
    }

    fn next(&mut self, pc: usize) -> Result<u8, VmError> {
        let s = *self.samples.get(self.pos).ok_or(VmError::StreamUnderrun { pc })?;
        self.pos += 1;
        Ok(s)
    }
}

/// What to do when an `intr` condition fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterruptMode {
    /// Record the interrupt and keep running.
    #[default]
    AutoAck,
    /// Stop; the host must call `ack_interrupt` before resuming.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterruptRecord {
    pub cycle: u64,
    pub pc: usize,
    pub search: SearchResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Halted,
    /// Blocked on an unacknowledged interrupt (Block mode only).
    Interrupted,
}

#[derive(Debug, Clone, Copy)]
struct LoopFrame {
    start_pc: usize,
    end_pc: usize,
    remaining: u16,
}

#[derive(Debug, Clone)]
struct TraceRow {
    cycle: u64,
    pc: usize,
    mnemonic: String,
    part_counter: usize,
}

/// The machine: program, associative memory, encoder state and control
/// registers.
pub struct Machine {
    config: DatapathConfig,
    decoded: Vec<Instruction>,
    pub am: AssociativeMemory,
    pub enc: EncoderState,
    pub part_counter: usize,
    pub pc: usize,
    pub cycles: u64,
    pub last_search: Option<SearchResult>,
    pub interrupts: Vec<InterruptRecord>,
    /// Operand for `man.reg` (internal similarity-manipulation word).
    pub operand_register: u8,
    pub interrupt_mode: InterruptMode,
    status: Status,
    loop_stack: Vec<LoopFrame>,
    trace: Option<Vec<TraceRow>>,
}

impl Machine {
    pub fn new(config: DatapathConfig, program: &Program) -> Self {
        let width = config.geometry.width();
        let decoded = (0..program.len()).map(|i| program.instruction(i)).collect();
        Machine {
            am: AssociativeMemory::new(config.geometry),
            enc: EncoderState::new(width),
            config,
            decoded,
            part_counter: 0,
            pc: 0,
            cycles: 0,
            last_search: None,
            interrupts: Vec::new(),
            operand_register: 64,
            interrupt_mode: InterruptMode::AutoAck,
            status: Status::Running,
            loop_stack: Vec::new(),
            trace: None,
        }
    }

    pub fn config(&self) -> &DatapathConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("cycle,pc,mnemonic,part_counter\n");
        if let Some(rows) = &self.trace {
            for r in rows {
                let _ = writeln!(out, "{},{},\"{}\",{}", r.cycle, r.pc, r.mnemonic, r.part_counter);
            }
        }
        out
    }

    /// Restarts execution, keeping the associative memory contents.
    pub fn reset_execution(&mut self) {
        let width = self.config.geometry.width();
        self.enc = EncoderState::new(width);
        self.part_counter = 0;
        self.pc = 0;
        self.cycles = 0;
        self.last_search = None;
        self.interrupts.clear();
        self.status = Status::Running;
        self.loop_stack.clear();
        if let Some(t) = &mut self.trace {
            t.clear();
        }
    }

    /// Host-side prototype install. The search row is owned by the
    /// datapath and rejected here.
    pub fn host_write(&mut self, addr: usize, part: usize, v: HyperVector) -> Result<(), VmError> {
        if addr == self.config.geometry.search_row() {
            return Err(VmError::SearchRowWrite(addr));
        }
        self.am.write(addr, part, v)?;
        Ok(())
    }

    /// Installs one prototype per row starting at row 0; each prototype
    /// is a list of K parts.
    pub fn load_prototypes(&mut self, prototypes: &[Vec<HyperVector>]) -> Result<(), VmError> {
        for (row, parts) in prototypes.iter().enumerate() {
            for (part, v) in parts.iter().enumerate() {
                self.host_write(row, part, v.clone())?;
            }
        }
        Ok(())
    }

    pub fn ack_interrupt(&mut self) -> Option<InterruptRecord> {
        if self.status == Status::Interrupted {
            self.status = Status::Running;
        }
        self.interrupts.last().copied()
    }

    fn exec_nisc(&mut self, n: &NiscInstruction, stream: &mut InputStream) -> Result<(), VmError> {
        let width = self.config.geometry.width();
        let old_reg = self.enc.output_register.clone();
        let input = match n.encsel {
            EncSelect::Zeros => HyperVector::zeros(width),
            EncSelect::Seed => self.config.mixer.seed_vector.clone(),
            EncSelect::AmRead => self.am.read(n.ridx as usize, self.part_counter)?.clone(),
            EncSelect::EncReg => old_reg.clone(),
        };
        let mut pipe = input;
        if n.smen {
            let w = if n.smsel { self.operand_register } else { stream.next(self.pc)? };
            pipe = manipulate(&pipe, w, &self.config.manipulator)?;
        }
        if n.mxen {
            pipe = mix_step(&pipe, n.mxsel, n.mxinv, &self.config.mixer)?;
        }
        let result = if n.op == EncoderOpCode::ThreshCounters {
            self.enc.counters.threshold()
        } else {
            encoder_op(n.op, &pipe, &old_reg)?
        };
        if n.bndrst {
            self.enc.counters.reset();
        }
        if n.bnden {
            // The bundler taps the register ahead of the write-back,
            // so it accumulates the value from before this cycle.
            self.enc.counters.accumulate(&old_reg)?;
        }
        self.enc.output_register = result.clone();
        if n.wben {
            self.am.write(n.widx as usize, self.part_counter, result)?;
        }
        Ok(())
    }

    /// Executes one instruction. Returns the new status.
    pub fn step(&mut self, stream: &mut InputStream) -> Result<Status, VmError> {
        match self.status {
            Status::Running => {}
            s => return Ok(s),
        }
        let pc = self.pc;
        let instr = self.decoded.get(pc).ok_or(VmError::PcOutOfRange(pc))?.clone();
        if let Some(rows) = &mut self.trace {
            rows.push(TraceRow {
                cycle: self.cycles,
                pc,
                mnemonic: format_instruction(&instr),
                part_counter: self.part_counter,
            });
        }
        let mut next_pc = pc + 1;
        let cost: u64 = match &instr {
            Instruction::Nisc(n) => {
                self.exec_nisc(n, stream)?;
                1
            }
            Instruction::Cisc(c) => match c {
                CiscInstruction::Halt => {
                    self.status = Status::Halted;
                    0
                }
                CiscInstruction::Jmp { target } => {
                    next_pc = *target as usize;
                    1
                }
                CiscInstruction::AmSearch { max_index } => {
                    let result = self.am.associative_search(*max_index as usize)?;
                    self.last_search = Some(result);
                    (*max_index as u64 + 2) * self.config.geometry.k as u64
                }
                CiscInstruction::Intr { sim_threshold, index_threshold } => {
                    if let Some(search) = self.last_search {
                        if interrupt_eval(search, *sim_threshold as usize, *index_threshold as usize)
                        {
                            self.interrupts.push(InterruptRecord {
                                cycle: self.cycles,
                                pc,
                                search,
                            });
                            if self.interrupt_mode == InterruptMode::Block {
                                self.status = Status::Interrupted;
                            }
                        }
                    }
                    1
                }
                CiscInstruction::Mix { source, value, nbits } => {
                    let w = match source {
                        MixSource::Immediate => *value,
                        MixSource::PartCounter => self.part_counter as u8,
                        MixSource::External => stream.next(pc)?,
                    };
                    let mut v = self.enc.output_register.clone();
                    for b in 0..*nbits {
                        v = mix_step(&v, (w >> b) & 1 != 0, false, &self.config.mixer)?;
                    }
                    self.enc.output_register = v;
                    *nbits as u64 + 2
                }
                CiscInstruction::LoopStart { iterations, end_address } => {
                    if *iterations == 0 {
                        next_pc = *end_address as usize;
                    } else {
                        if self.loop_stack.len() >= MAX_LOOP_DEPTH {
                            return Err(VmError::LoopOverflow { pc });
                        }
                        self.loop_stack.push(LoopFrame {
                            start_pc: pc + 1,
                            end_pc: *end_address as usize,
                            remaining: *iterations,
                        });
                    }
                    1
                }
                CiscInstruction::PartCounter { action } => {
                    let k = self.config.geometry.k;
                    self.part_counter = match action {
                        PartCounterAction::Clear => 0,
                        PartCounterAction::Inc => (self.part_counter + 1) % k,
                        PartCounterAction::Dec => (self.part_counter + k - 1) % k,
                    };
                    1
                }
                CiscInstruction::EvictPlane { plane, widx } => {
                    let v = self.enc.counters.evict_plane(*plane as usize)?;
                    self.am.write(*widx as usize, self.part_counter, v)?;
                    1
                }
                CiscInstruction::LoadPlane { plane, ridx } => {
                    let v = self.am.read(*ridx as usize, self.part_counter)?.clone();
                    self.enc.counters.load_plane(*plane as usize, &v)?;
                    1
                }
            },
        };
        self.cycles += cost;
        // Loop-end detection fires on the program counter reaching a
        // frame's end address; frames sharing one end address pop in
        // cascade.
        while let Some(frame) = self.loop_stack.last_mut() {
            if frame.end_pc != next_pc {
                break;
            }
            frame.remaining -= 1;
            if frame.remaining > 0 {
                next_pc = frame.start_pc;
                break;
            }
            self.loop_stack.pop();
        }
        self.pc = next_pc;
        Ok(self.status)
    }

    /// Runs until halt, an unacknowledged interrupt in Block mode, or
    /// the cycle limit.
    pub fn run(&mut self, stream: &mut InputStream, cycle_limit: u64) -> Result<Status, VmError> {
        loop {
            match self.step(stream)? {
                Status::Running => {
                    if self.cycles > cycle_limit {
                        return Err(VmError::CycleLimit(cycle_limit));
                    }
                }
                done => return Ok(done),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble;
    use crate::hv::Geometry;
    use crate::seeds::SeedConfig;

    fn machine(text: &str) -> Machine {
        machine_with(text, Geometry::default_2048())
    }

    fn machine_with(text: &str, geometry: Geometry) -> Machine {
        let config = DatapathConfig::new(geometry, SeedConfig::default()).unwrap();
        Machine::new(config, &assemble(text).unwrap())
    }

    #[test]
    fn halt_costs_nothing() {
        let mut m = machine("halt\n");
        let st = m.run(&mut InputStream::empty(), 10).unwrap();
        assert_eq!(st, Status::Halted);
        assert_eq!(m.cycles, 0);
    }

    #[test]
    fn cycle_accounting() {
        // 1 (nisc) + 5 (mix, 3 + 2) + 4 (search, (2 + 2) * 1) + 1 (intr) + 0 (halt)
        let mut m = machine("seed_vec -> enc_reg\nmix.imm 5, 3\nam_search 2\nintr 0, 0\nhalt\n");
        m.run(&mut InputStream::empty(), 100).unwrap();
        assert_eq!(m.cycles, 11);
    }

    #[test]
    fn cycle_limit_is_an_error() {
        let mut m = machine("top:\nenc_reg -> enc_reg\njmp top\n");
        match m.run(&mut InputStream::empty(), 50) {
            Err(VmError::CycleLimit(50)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn falling_off_the_end_is_an_error() {
        let mut m = machine("enc_reg -> enc_reg\n");
        assert!(matches!(
            m.run(&mut InputStream::empty(), 10),
            Err(VmError::PcOutOfRange(1))
        ));
    }

    #[test]
    fn seed_load_and_bundle_uses_previous_register_value() {
        // Load S, then bundle while overwriting the register with
        // zeros: the counters must have accumulated S, so a single
        // threshold reproduces S exactly (ties at the reset value
        // resolve to 1 only where S is 1: 16 + 1 = 17 vs 16 - 1 = 15).
        let mut m = machine("seed_vec -> enc_reg\nzero_vec -> bundle -> enc_reg\nthresh -> mem[30]\nhalt\n");
        m.run(&mut InputStream::empty(), 100).unwrap();
        let s = m.config.mixer.seed_vector.clone();
        assert_eq!(m.am.read(30, 0).unwrap(), &s);
    }

    #[test]
    fn same_row_read_sees_pre_write_value() {
        // mem[3] starts as zeros; writing the seed into mem[3] while
        // reading mem[3] must observe the old zeros: with bind_enc the
        // register keeps the prior register value unchanged.
        let text = "seed_vec -> mem[3]\nmem[3] -> bind_enc -> mem[3]\nhalt\n";
        let mut m = machine(text);
        // After instr 0: reg = S, mem[3] = S. After instr 1 the read
        // returns S (pre-write), result = S xor S = 0.
        m.run(&mut InputStream::empty(), 10).unwrap();
        assert_eq!(m.enc.output_register.popcount(), 0);
        assert_eq!(m.am.read(3, 0).unwrap().popcount(), 0);
    }

    #[test]
    fn loop_iteration_counts_and_cycles() {
        let mut m = machine("hw.loop0 5, end\nenc_reg -> enc_reg\nend:\nhalt\n");
        m.run(&mut InputStream::empty(), 100).unwrap();
        assert_eq!(m.cycles, 1 + 5);
    }

    #[test]
    fn nested_loops_with_shared_end_cascade() {
        let text = "\
hw.loop0 3, end
hw.loop1 4, end
enc_reg -> enc_reg
end:
halt
";
        let mut m = machine(text);
        m.run(&mut InputStream::empty(), 100).unwrap();
        // loop0 once, loop1 three times, body 3 * 4 = 12 times.
        assert_eq!(m.cycles, 1 + 3 + 12);
        assert_eq!(m.status(), Status::Halted);
    }

    #[test]
    fn zero_iteration_loop_skips_body() {
        let mut m = machine("hw.loop0 0, end\nseed_vec -> enc_reg\nend:\nhalt\n");
        m.run(&mut InputStream::empty(), 10).unwrap();
        assert_eq!(m.enc.output_register.popcount(), 0);
        assert_eq!(m.cycles, 1);
    }

    #[test]
    fn runtime_loop_depth_overflow() {
        // Statically legal (self-jump re-enters the same loop start
        // without closing it) but exceeds the stack at runtime.
        let text = "top:\nhw.loop0 10, end\njmp top\nend:\nhalt\n";
        let mut m = machine(text);
        assert!(matches!(
            m.run(&mut InputStream::empty(), 1000),
            Err(VmError::LoopOverflow { .. })
        ));
    }

    #[test]
    fn stream_underrun() {
        let mut m = machine("mix.ext 7\nhalt\n");
        assert!(matches!(
            m.run(&mut InputStream::empty(), 10),
            Err(VmError::StreamUnderrun { pc: 0 })
        ));
    }

    #[test]
    fn mix_ext_matches_item_memory_map() {
        use crate::encoder::im_map;
        let mut m = machine("seed_vec -> enc_reg\nmix.ext 7\nhalt\n");
        let mut stream = InputStream::new(vec![93]).unwrap();
        m.run(&mut stream, 100).unwrap();
        let expect = im_map(93, 7, &m.config.mixer, &m.config.mixer.seed_vector).unwrap();
        assert_eq!(m.enc.output_register, expect);
        assert_eq!(m.cycles, 1 + 9);
    }

    #[test]
    fn manipulator_register_operand_defaults_to_half_flip() {
        let mut m = machine("seed_vec -> man.reg -> enc_reg\nhalt\n");
        m.run(&mut InputStream::empty(), 10).unwrap();
        let s = &m.config.mixer.seed_vector;
        let sf = m.config.manipulator.spread_factor;
        assert_eq!(m.enc.output_register.hamming(s).unwrap(), 64 * sf);
    }

    #[test]
    fn manipulator_external_operand_consumes_stream() {
        let mut m = machine("seed_vec -> man.ext -> enc_reg\nhalt\n");
        let mut stream = InputStream::new(vec![10]).unwrap();
        m.run(&mut stream, 10).unwrap();
        let s = &m.config.mixer.seed_vector;
        let sf = m.config.manipulator.spread_factor;
        assert_eq!(m.enc.output_register.hamming(s).unwrap(), 10 * sf);
        assert_eq!(stream.remaining(), 0);
    }

    #[test]
    fn search_and_interrupt_auto_ack() {
        let text = "\
seed_vec -> mem[31]
am_search 2
intr 2048, 1
halt
";
        let mut m = machine(text);
        // Row 0 planted far, row 1 exactly the seed.
        let far = m.config.mixer.seed_vector.complement();
        m.host_write(0, 0, far).unwrap();
        m.host_write(1, 0, m.config.mixer.seed_vector.clone()).unwrap();
        m.run(&mut InputStream::empty(), 100).unwrap();
        let s = m.last_search.unwrap();
        assert_eq!(s.index, 1);
        assert_eq!(s.distance, 0);
        assert_eq!(m.interrupts.len(), 1);
        assert_eq!(m.status(), Status::Halted);
    }

    #[test]
    fn interrupt_block_mode_requires_ack() {
        let text = "seed_vec -> mem[31]\nam_search 1\nintr 2048, 63\nhalt\n";
        let mut m = machine(text);
        m.interrupt_mode = InterruptMode::Block;
        m.host_write(0, 0, m.config.mixer.seed_vector.clone()).unwrap();
        let st = m.run(&mut InputStream::empty(), 100).unwrap();
        assert_eq!(st, Status::Interrupted);
        let rec = m.ack_interrupt().unwrap();
        assert_eq!(rec.search.index, 0);
        let st = m.run(&mut InputStream::empty(), 100).unwrap();
        assert_eq!(st, Status::Halted);
    }

    #[test]
    fn host_cannot_write_search_row() {
        let mut m = machine("halt\n");
        let v = HyperVector::zeros(2048);
        assert!(matches!(m.host_write(31, 0, v), Err(VmError::SearchRowWrite(31))));
    }

    #[test]
    fn part_counter_wraps_within_geometry() {
        let g = Geometry::new(2048, 4, 32).unwrap();
        let text = "pc.inc\npc.inc\npc.inc\npc.inc\nhalt\n";
        let mut m = machine_with(text, g);
        m.run(&mut InputStream::empty(), 10).unwrap();
        assert_eq!(m.part_counter, 0);
    }

    #[test]
    fn evict_and_load_round_trip_through_memory() {
        let text = "\
seed_vec -> enc_reg
zero_vec -> bundle -> enc_reg
evict 0, mem[5]
evict 1, mem[6]
evict 2, mem[7]
evict 3, mem[8]
evict 4, mem[9]
seed_vec -> bndrst -> enc_reg
load_plane 0, mem[5]
load_plane 1, mem[6]
load_plane 2, mem[7]
load_plane 3, mem[8]
load_plane 4, mem[9]
thresh -> mem[10]
halt
";
        let mut m = machine(text);
        m.run(&mut InputStream::empty(), 100).unwrap();
        let s = m.config.mixer.seed_vector.clone();
        assert_eq!(m.am.read(10, 0).unwrap(), &s);
    }

    #[test]
    fn trace_records_every_step() {
        let mut m = machine("seed_vec -> enc_reg\nmix.imm 1, 1\nhalt\n");
        m.enable_trace();
        m.run(&mut InputStream::empty(), 10).unwrap();
        let csv = m.trace_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "cycle,pc,mnemonic,part_counter");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].contains("seed_vec"));
        assert!(lines[2].contains("mix.imm 1, 1"));
    }
}
