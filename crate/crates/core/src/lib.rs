//! Vulnerability detection over raw x86-64 machine code.

pub mod cfg;
pub mod dataset;
pub mod decoder;
pub mod elf;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod representation;
pub mod tokenizer;
pub mod train;
