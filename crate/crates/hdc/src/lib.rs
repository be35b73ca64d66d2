//! Software model of a programmable hyperdimensional-computing
//! accelerator built on binary spatter codes: packed hypervectors, a
//! rematerializing item memory, a counter-based bundler, an
//! associative memory, a 26-bit microcode ISA with assembler, and a
//! cycle-counting virtual machine, plus reference encoders and
//! dataset tooling for three always-on sensing workloads.

pub mod algos;
pub mod am;
pub mod datasets;
pub mod asm;
pub mod encoder;
pub mod hv;
pub mod isa;
pub mod seeds;
pub mod vm;
