//! Composition of the stages: binary → functions → instructions → CFGs →
//! token ids → tensors, and the dataset build that runs it over a corpus.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{build_cfg, FunctionCfg};
use crate::dataset::store::{Sample, SampleRecord, SampleStore, SampleWriter};
use crate::dataset::{
    check_leakage, compile_corpus, downsample, split_sources, write_jsonl, BinaryEntry, CompileOptions, DatasetError,
    Label, LabeledSource, Split, VulnClass,
};
use crate::decoder::{decode_linear, DecodedInstruction};
use crate::elf::{load_binary, ElfError, FunctionBytes};
use crate::model::ModelKind;
use crate::par::Execution;
use crate::representation::{build_graph, build_sequential, GraphFunction, ProgramTensor, RepresentationConfig};
use crate::tokenizer::{tokenize, Token, VocabError, Vocabulary};
use crate::train::LabeledSet;

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const META_FILE: &str = "dataset.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Elf(#[from] ElfError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("{0}")]
    Invalid(String),
}

/// One user function, decoded and partitioned into blocks.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyzedFunction {
    pub name: String,
    pub address: u64,
    #[serde(skip)]
    pub bytes: Vec<u8>,
    pub instructions: Vec<DecodedInstruction>,
    pub cfg: FunctionCfg,
}

impl AnalyzedFunction {
    pub fn tokens(&self) -> impl Iterator<Item = Token> + '_ {
        self.instructions.iter().filter_map(tokenize)
    }
}

/// Loads `path` and analyzes each user function in address order.
pub fn analyze_binary(path: &Path) -> Result<Vec<AnalyzedFunction>, ElfError> {
    Ok(analyze_functions(load_binary(path)?.extract_functions()?))
}

pub fn analyze_functions(functions: Vec<FunctionBytes>) -> Vec<AnalyzedFunction> {
    functions
        .into_iter()
        .map(|f| {
            let instructions = decode_linear(&f.bytes, 0, f.bytes.len());
            let cfg = build_cfg(&instructions);
            AnalyzedFunction {
                name: f.name,
                address: f.address,
                bytes: f.bytes,
                instructions,
                cfg,
            }
        })
        .collect()
}

/// Both tensor forms of one analyzed program.
pub fn encode_program(functions: &[AnalyzedFunction], vocab: &Vocabulary, repr: &RepresentationConfig) -> Sample {
    let seq: Vec<Vec<u32>> = functions
        .iter()
        .map(|f| f.instructions.iter().map(|i| vocab.encode_instruction(i)).collect())
        .collect();
    let graph: Vec<GraphFunction> = functions.iter().map(|f| GraphFunction::from_cfg(&f.cfg, vocab)).collect();
    Sample {
        seq: build_sequential(&seq, repr),
        graph: build_graph(&graph, repr),
    }
}

pub fn to_program_tensor(sample: Sample, kind: ModelKind) -> ProgramTensor {
    match kind {
        ModelKind::Sequential => ProgramTensor::Seq(sample.seq),
        ModelKind::Graph => ProgramTensor::Graph(sample.graph),
    }
}

/// Analyzes a single binary and encodes it for a model of `kind`. Also
/// returns the function names in tensor slot order.
pub fn program_tensor(
    path: &Path,
    vocab: &Vocabulary,
    repr: &RepresentationConfig,
    kind: ModelKind,
) -> Result<(ProgramTensor, Vec<String>), ElfError> {
    let funcs = analyze_binary(path)?;
    let limit = match kind {
        ModelKind::Sequential => repr.m_seq,
        ModelKind::Graph => repr.p,
    };
    let names = funcs.iter().take(limit).map(|f| f.name.clone()).collect();
    Ok((to_program_tensor(encode_program(&funcs, vocab, repr), kind), names))
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub out_dir: PathBuf,
    pub repr: RepresentationConfig,
    pub times_compiled: usize,
    pub compiler: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
    pub execution: Execution,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub vulnerable: usize,
    pub safe: usize,
}

/// `dataset.json`: everything needed to interpret the sample store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub version: String,
    pub representation: RepresentationConfig,
    pub vocab_size: usize,
    pub seed: u64,
    pub times_compiled: usize,
    pub compiler: PathBuf,
    pub classes: Vec<VulnClass>,
    pub counts: BTreeMap<String, SplitCounts>,
    pub compile_failures: usize,
    pub analysis_failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnalysisFailure {
    binary: PathBuf,
    source_id: String,
    error: String,
}

/// Split → compile → balance → analyze → vocabulary (train split only) →
/// encode → write. Outputs land in `opts.out_dir`:
/// `sources.jsonl`, `binaries.jsonl`, `failures.jsonl`, `vocab.tsv`,
/// `samples.jsonl`, `samples.bin` and `dataset.json`.
pub fn build_dataset(sources: &[LabeledSource], opts: &BuildOptions) -> Result<DatasetMeta, PipelineError> {
    opts.repr.validate().map_err(|e| PipelineError::Invalid(e.to_string()))?;
    let out = &opts.out_dir;
    std::fs::create_dir_all(out).map_err(|source| DatasetError::Io {
        path: out.clone(),
        source,
    })?;

    let manifest = split_sources(sources, opts.seed)?;
    write_jsonl(&out.join("sources.jsonl"), &manifest)?;
    log::info!("{} sources after balancing", manifest.len());

    let compiled = compile_corpus(
        &manifest,
        &CompileOptions {
            compiler: opts.compiler.clone(),
            times_compiled: opts.times_compiled,
            out_dir: out.join("bin"),
            seed: opts.seed,
            workers: opts.workers,
        },
    )?;
    write_jsonl(&out.join("failures.jsonl"), &compiled.failures)?;

    let mut by_class: BTreeMap<VulnClass, Vec<BinaryEntry>> = BTreeMap::new();
    for b in compiled.binaries {
        by_class.entry(b.class).or_default().push(b);
    }
    let binaries: Vec<BinaryEntry> = if by_class.len() > 1 {
        downsample(&by_class, opts.seed).into_values().flatten().collect()
    } else {
        by_class.into_values().flatten().collect()
    };
    check_leakage(&binaries).map_err(PipelineError::Invalid)?;
    write_jsonl(&out.join("binaries.jsonl"), &binaries)?;
    log::info!("{} binaries compiled", binaries.len());

    let analyzed = opts.execution.map(&binaries, |_, b| analyze_binary(&b.path));
    let mut kept = Vec::new();
    let mut analysis_failures = Vec::new();
    for (b, a) in binaries.iter().zip(analyzed) {
        match a {
            Ok(funcs) => kept.push((b, funcs)),
            Err(e) => {
                log::warn!("skipping {}: {e}", b.path.display());
                analysis_failures.push(AnalysisFailure {
                    binary: b.path.clone(),
                    source_id: b.source_id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    if !analysis_failures.is_empty() {
        write_jsonl(&out.join("analysis_failures.jsonl"), &analysis_failures)?;
    }

    let vocab = Vocabulary::build(
        kept.iter()
            .filter(|(b, _)| b.split == Split::Train)
            .flat_map(|(_, funcs)| funcs.iter().flat_map(|f| f.tokens())),
    );
    let vocab_path = out.join(VOCAB_FILE);
    vocab.save(&vocab_path).map_err(|source| DatasetError::Io {
        path: vocab_path,
        source,
    })?;
    log::info!("vocabulary: {} entries", vocab.size());

    let samples = opts
        .execution
        .map(&kept, |_, (_, funcs)| encode_program(funcs, &vocab, &opts.repr));
    let mut writer = SampleWriter::create(out)?;
    let mut counts: BTreeMap<String, SplitCounts> = BTreeMap::new();
    for ((b, _), sample) in kept.iter().zip(&samples) {
        let c = counts.entry(b.split.as_str().to_owned()).or_default();
        match b.label {
            Label::Vulnerable => c.vulnerable += 1,
            Label::Safe => c.safe += 1,
        }
        let id = b
            .path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| b.source_id.clone());
        writer.push(
            SampleRecord {
                id,
                label: b.label,
                class: b.class,
                split: b.split,
                source_id: b.source_id.clone(),
                binary: b.path.clone(),
                shape: opts.repr,
                offset: 0,
            },
            sample,
        )?;
    }
    writer.finish()?;

    let mut classes: Vec<VulnClass> = binaries.iter().map(|b| b.class).collect();
    classes.sort();
    classes.dedup();
    let meta = DatasetMeta {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        representation: opts.repr,
        vocab_size: vocab.size(),
        seed: opts.seed,
        times_compiled: opts.times_compiled,
        compiler: crate::dataset::resolve_compiler(opts.compiler.as_deref()),
        classes,
        counts,
        compile_failures: compiled.failures.len(),
        analysis_failures: analysis_failures.len(),
    };
    let meta_path = out.join(META_FILE);
    std::fs::write(&meta_path, serde_json::to_vec_pretty(&meta).expect("plain data")).map_err(|source| {
        DatasetError::Io {
            path: meta_path,
            source,
        }
    })?;
    Ok(meta)
}

/// A built dataset directory.
pub struct Dataset {
    pub dir: PathBuf,
    pub meta: DatasetMeta,
    pub vocab: Vocabulary,
    pub store: SampleStore,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self, PipelineError> {
        let meta_path = dir.join(META_FILE);
        let raw = std::fs::read(&meta_path).map_err(|source| DatasetError::Io {
            path: meta_path.clone(),
            source,
        })?;
        let meta: DatasetMeta = serde_json::from_slice(&raw).map_err(|e| DatasetError::Manifest {
            path: meta_path,
            line: 1,
            detail: e.to_string(),
        })?;
        Ok(Self {
            dir: dir.to_owned(),
            vocab: Vocabulary::load(dir.join(VOCAB_FILE))?,
            store: SampleStore::open(dir)?,
            meta,
        })
    }

    /// Samples of `split` (and `class`, when given) in store order.
    pub fn load_split(
        &self,
        split: Split,
        kind: ModelKind,
        class: Option<VulnClass>,
    ) -> Result<(LabeledSet, Vec<SampleRecord>), PipelineError> {
        let mut set = LabeledSet::default();
        let mut records = Vec::new();
        for (r, s) in self.store.read_all()? {
            if r.split != split || class.is_some_and(|c| c != r.class) {
                continue;
            }
            set.push(to_program_tensor(s, kind), r.label.target());
            records.push(r);
        }
        Ok((set, records))
    }
}
