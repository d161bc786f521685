//! Shared helpers for integration tests: compiling the bundled C programs
//! and an objdump-based reference disassembler.

#![allow(dead_code)]

pub mod templates;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

pub const OPT_LEVELS: [&str; 4] = ["-O0", "-O1", "-O2", "-O3"];

pub fn c_sources() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/c");
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "c"))
        .collect();
    v.sort();
    v
}

pub fn compiler() -> String {
    std::env::var("MACHVULN_CC").unwrap_or_else(|_| "cc".into())
}

/// Compiles every bundled program at -O0..-O3 once per test process.
pub fn corpus() -> &'static [PathBuf] {
    static CORPUS: OnceLock<(tempfile::TempDir, Vec<PathBuf>)> = OnceLock::new();
    let (_, bins) = CORPUS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut bins = Vec::new();
        for src in c_sources() {
            for opt in OPT_LEVELS {
                let out = dir
                    .path()
                    .join(format!("{}{}", src.file_stem().unwrap().to_string_lossy(), opt));
                let status = Command::new(compiler())
                    .arg(opt)
                    .arg("-o")
                    .arg(&out)
                    .arg(&src)
                    .arg("-lm")
                    .status()
                    .expect("C compiler available");
                assert!(status.success(), "compiling {}", src.display());
                bins.push(out);
            }
        }
        (dir, bins)
    });
    bins
}

/// Instruction start addresses reported by `objdump -d`.
pub fn objdump_starts(bin: &Path) -> BTreeSet<u64> {
    let out = Command::new("objdump")
        .args(["-d", "-w", "--no-show-raw-insn"])
        .arg(bin)
        .output()
        .expect("objdump available");
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut starts = BTreeSet::new();
    for line in text.lines() {
        let Some((addr, rest)) = line.split_once(":\t") else {
            continue;
        };
        if rest.trim().is_empty() {
            continue;
        }
        if let Ok(a) = u64::from_str_radix(addr.trim(), 16) {
            starts.insert(a);
        }
    }
    starts
}

use machvuln_core::model::{ModelConfig, ModelKind};
use machvuln_core::representation::{build_graph, build_sequential, GraphFunction, ProgramTensor, RepresentationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Toy dimensions used by the gradient checks: embed_dim 8, 2 functions,
/// 4 blocks of 4 instructions.
pub fn toy_repr() -> RepresentationConfig {
    RepresentationConfig {
        n_seq: 8,
        m_seq: 2,
        n_blk: 4,
        p: 2,
    }
}

pub fn toy_config(kind: ModelKind, vocab: usize) -> ModelConfig {
    let base = match kind {
        ModelKind::Sequential => ModelConfig::hybrid(vocab),
        ModelKind::Graph => ModelConfig::graph(2, vocab),
    };
    ModelConfig {
        heads: 2,
        ffn_hidden: vec![8, 4],
        topk_ratio: 0.5,
        dropout: 0.0,
        ..base.scaled(8)
    }
}

/// A random program over token ids `3..vocab`. When `marker` is set, that
/// token is planted at several random positions.
pub fn random_program(
    kind: ModelKind,
    repr: &RepresentationConfig,
    vocab: u32,
    marker: Option<u32>,
    rng: &mut ChaCha8Rng,
) -> ProgramTensor {
    let token = |rng: &mut ChaCha8Rng| rng.gen_range(3..vocab);
    match kind {
        ModelKind::Sequential => {
            let funcs: Vec<Vec<u32>> = (0..rng.gen_range(1..=repr.m_seq))
                .map(|_| {
                    let mut f: Vec<u32> = (0..rng.gen_range(2..=repr.n_seq)).map(|_| token(rng)).collect();
                    if let Some(m) = marker {
                        for _ in 0..3 {
                            let i = rng.gen_range(0..f.len());
                            f[i] = m;
                        }
                    }
                    f
                })
                .collect();
            ProgramTensor::Seq(build_sequential(&funcs, repr))
        }
        ModelKind::Graph => {
            let funcs: Vec<GraphFunction> = (0..rng.gen_range(1..=repr.p))
                .map(|_| {
                    let nb = rng.gen_range(1..=repr.n_blk);
                    let mut blocks: Vec<Vec<u32>> = (0..nb)
                        .map(|_| (0..rng.gen_range(1..=repr.n_blk)).map(|_| token(rng)).collect())
                        .collect();
                    if let Some(m) = marker {
                        for _ in 0..2 {
                            let b = rng.gen_range(0..nb);
                            let i = rng.gen_range(0..blocks[b].len());
                            blocks[b][i] = m;
                        }
                    }
                    let mut edges = std::collections::BTreeSet::new();
                    for b in 0..nb {
                        if b + 1 < nb {
                            edges.insert((b, b + 1));
                        }
                        if rng.gen_bool(0.3) {
                            edges.insert((b, rng.gen_range(0..nb)));
                        }
                    }
                    GraphFunction { blocks, edges }
                })
                .collect();
            ProgramTensor::Graph(build_graph(&funcs, repr))
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

use machvuln_core::cfg::find_leaders;
use machvuln_core::decoder::BranchKind;
use machvuln_core::pipeline::AnalyzedFunction;

/// Violations of the partition, leader-target and out-degree invariants.
pub fn cfg_violations(f: &AnalyzedFunction) -> Vec<String> {
    let cfg = &f.cfg;
    let leaders = find_leaders(&f.instructions);
    let mut bad = Vec::new();

    let flat: Vec<_> = cfg.blocks.iter().flat_map(|b| b.instructions.iter().cloned()).collect();
    if flat != f.instructions {
        bad.push(format!("{}: blocks do not partition the instructions", f.name));
    }
    let starts: BTreeSet<usize> = cfg.blocks.iter().map(|b| b.start_offset).collect();
    if starts != leaders {
        bad.push(format!("{}: block starts differ from leaders", f.name));
    }
    for (i, b) in cfg.blocks.iter().enumerate() {
        if b.index != i {
            bad.push(format!("{}: block {i} has index {}", f.name, b.index));
        }
        for w in b.instructions.windows(2) {
            if w[0].offset + w[0].len() != w[1].offset {
                bad.push(format!("{}: gap inside block {i}", f.name));
            }
            if w[0].branch_kind != BranchKind::None {
                bad.push(format!("{}: branch inside block {i}", f.name));
            }
        }
        let out = cfg.edges.iter().filter(|(s, _)| *s == i).count();
        let max = match b.terminator().branch_kind {
            BranchKind::JumpConditional => 2,
            BranchKind::Ret | BranchKind::Indirect => 0,
            BranchKind::JumpUnconditional | BranchKind::Call | BranchKind::None => 1,
        };
        if out > max {
            bad.push(format!("{}: block {i} has out-degree {out}", f.name));
        }
    }
    for &(s, t) in &cfg.edges {
        if s >= cfg.blocks.len() || t >= cfg.blocks.len() {
            bad.push(format!("{}: edge ({s}, {t}) out of range", f.name));
        } else if !leaders.contains(&cfg.blocks[t].start_offset) {
            bad.push(format!("{}: edge target {t} is not a leader", f.name));
        }
    }
    bad
}

/// `(agreeing, total)` instruction starts over every function of the corpus,
/// against objdump.
pub fn decoder_agreement() -> (usize, usize) {
    let mut total = 0usize;
    let mut agree = 0usize;
    for bin in corpus() {
        let reference = objdump_starts(bin);
        let image = machvuln_core::elf::load_binary(bin).unwrap();
        for f in image.all_functions().unwrap() {
            let end = f.address + f.bytes.len() as u64;
            let ours: BTreeSet<u64> = machvuln_core::decoder::decode_linear(&f.bytes, 0, f.bytes.len())
                .iter()
                .map(|i| f.address + i.offset as u64)
                .collect();
            let theirs: Vec<u64> = reference.range(f.address..end).copied().collect();
            total += theirs.len();
            agree += theirs.iter().filter(|a| ours.contains(a)).count();
        }
    }
    (agree, total)
}
