use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context as _};
use serde::Serialize;
use serde_json::{json, Value};

use machvuln_core::decoder::BranchKind;
use machvuln_core::dataset::synth::{generate_corpus, SynthOptions};
use machvuln_core::dataset::{read_jsonl, LabeledSource, Split};
use machvuln_core::elf::load_binary;
use machvuln_core::model::{Model, ModelConfig, ModelKind};
use machvuln_core::pipeline::{self, analyze_functions, AnalyzedFunction, BuildOptions, Dataset};
use machvuln_core::representation::RepresentationConfig;
use machvuln_core::tokenizer::{tokenize, Token, Vocabulary};
use machvuln_core::train::{evaluate, render_table, TrainConfig};

use crate::config::{overlay, FileConfig};
use crate::{BuildArgs, DecodeArgs, EvalArgs, InputError, InspectArgs, ModelArg, ReprArgs, TrainArgs};

pub struct Context {
    pub file: FileConfig,
    pub seed: Option<u64>,
    pub config_path: Option<PathBuf>,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.or(self.file.seed).unwrap_or(0)
    }

    /// Writes the reproducibility record `path`.
    fn record(&self, path: &Path, command: &str, resolved: Value) -> anyhow::Result<()> {
        let rec = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "seed": self.seed(),
            "config_file": self.config_path,
            "config": resolved,
            "unix_time": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        });
        write_json(path, &rec)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

/// Prints `text` or writes it to `output`; a run record goes beside the file.
fn emit(ctx: &Context, output: Option<&Path>, text: &str, command: &str, resolved: Value) -> anyhow::Result<()> {
    match output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            let mut rec = p.as_os_str().to_owned();
            rec.push(".run.json");
            ctx.record(Path::new(&rec), command, resolved)
        }
    }
}

fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.exists() {
        bail!(InputError(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

#[derive(Serialize)]
struct InstrDump {
    offset: usize,
    address: u64,
    bytes: String,
    token: Option<String>,
    branch: BranchKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<i64>,
}

#[derive(Serialize)]
struct BlockDump {
    index: usize,
    start: usize,
    end: usize,
    instructions: usize,
}

#[derive(Serialize)]
struct FunctionDump {
    name: String,
    address: u64,
    size: usize,
    instructions: Vec<InstrDump>,
    blocks: Vec<BlockDump>,
    edges: Vec<(usize, usize)>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn dump_function(f: &AnalyzedFunction) -> FunctionDump {
    FunctionDump {
        name: f.name.clone(),
        address: f.address,
        size: f.bytes.len(),
        instructions: f
            .instructions
            .iter()
            .map(|i| InstrDump {
                offset: i.offset,
                address: f.address + i.offset as u64,
                bytes: hex(&f.bytes[i.offset..i.offset + i.len()]),
                token: tokenize(i).map(|t| t.to_string()),
                branch: i.branch_kind,
                target: i.rel_target,
            })
            .collect(),
        blocks: f
            .cfg
            .blocks
            .iter()
            .map(|b| BlockDump {
                index: b.index,
                start: b.start_offset,
                end: b.end_offset,
                instructions: b.instructions.len(),
            })
            .collect(),
        edges: f.cfg.edges.iter().copied().collect(),
    }
}

fn render_dump(funcs: &[FunctionDump]) -> String {
    let mut out = String::new();
    for f in funcs {
        let _ = writeln!(
            out,
            "function {} @ {:#x}: {} bytes, {} instructions, {} basic blocks",
            f.name,
            f.address,
            f.size,
            f.instructions.len(),
            f.blocks.len()
        );
        let mut instrs = f.instructions.iter().peekable();
        for b in &f.blocks {
            let _ = writeln!(out, "  block {} [{:#x}, {:#x})", b.index, b.start, b.end);
            while let Some(i) = instrs.next_if(|i| i.offset < b.end) {
                let token = i.token.as_deref().unwrap_or("INVALID");
                let _ = write!(out, "    {:#010x}  {:<32} {token}", i.address, i.bytes);
                if i.branch != BranchKind::None {
                    let _ = write!(out, "  ; {}", serde_json::to_value(i.branch).unwrap_or_default().as_str().unwrap_or(""));
                    if let Some(t) = i.target {
                        let _ = write!(out, " -> {t:#x}");
                    }
                }
                out.push('\n');
            }
        }
        let edges: Vec<String> = f.edges.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        let _ = writeln!(out, "  edges: {}\n", if edges.is_empty() { "(none)".into() } else { edges.join(" ") });
    }
    out
}

pub fn decode(ctx: &Context, args: DecodeArgs) -> anyhow::Result<()> {
    let image = load_binary(&args.binary)?;
    let funcs = if args.all_functions {
        image.all_functions()?
    } else {
        image.extract_functions()?
    };
    let dumps: Vec<FunctionDump> = analyze_functions(funcs).iter().map(dump_function).collect();
    let text = if args.json {
        let mut s = serde_json::to_string_pretty(&json!({ "binary": args.binary, "functions": dumps }))?;
        s.push('\n');
        s
    } else {
        render_dump(&dumps)
    };
    let resolved = json!({ "binary": args.binary, "all_functions": args.all_functions, "json": args.json });
    emit(ctx, args.output.as_deref(), &text, "decode", resolved)
}

fn resolve_repr(ctx: &Context, flags: &ReprArgs) -> anyhow::Result<RepresentationConfig> {
    let mut r = overlay(RepresentationConfig::default(), ctx.file.representation.as_ref(), "representation")?;
    r.n_seq = flags.n_seq.unwrap_or(r.n_seq);
    r.m_seq = flags.m_seq.unwrap_or(r.m_seq);
    r.n_blk = flags.n_blk.unwrap_or(r.n_blk);
    r.p = flags.p.unwrap_or(r.p);
    r.validate().map_err(|e| InputError(e.to_string()))?;
    Ok(r)
}

/// Reads a labeled-source manifest; relative paths are taken relative to
/// the manifest's directory.
fn read_manifest(path: &Path) -> anyhow::Result<Vec<LabeledSource>> {
    require_file(path, "manifest")?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rows: Vec<LabeledSource> = read_jsonl(path)?;
    for r in &mut rows {
        if r.path.is_relative() {
            r.path = base.join(&r.path);
        }
        require_file(&r.path, "source")?;
    }
    Ok(rows)
}

pub fn build_dataset(ctx: &Context, args: BuildArgs) -> anyhow::Result<()> {
    let seed = ctx.seed();
    let repr = resolve_repr(ctx, &args.repr)?;
    let sources = match (&args.manifest, args.synthetic) {
        (_, Some(class)) => {
            let dir = args.out.join("src");
            log::info!("generating {} synthetic {class} programs in {}", args.count, dir.display());
            generate_corpus(
                &dir,
                &SynthOptions {
                    class,
                    count: args.count,
                    vulnerable_fraction: 0.5,
                    seed,
                },
            )?
        }
        (Some(m), None) => read_manifest(m)?,
        (None, None) => bail!(InputError("either --manifest or --synthetic is required".into())),
    };
    let opts = BuildOptions {
        out_dir: args.out.clone(),
        repr,
        times_compiled: args.times_compiled.or(ctx.file.times_compiled).unwrap_or(2),
        compiler: args.compiler.or_else(|| ctx.file.compiler.clone()),
        seed,
        workers: args
            .workers
            .or(ctx.file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        execution: args.execution.into(),
    };
    let meta = pipeline::build_dataset(&sources, &opts)?;
    for (split, c) in &meta.counts {
        println!("{split:<5}  {:>6} vulnerable  {:>6} safe", c.vulnerable, c.safe);
    }
    println!("vocabulary: {} ids; written to {}", meta.vocab_size, args.out.display());
    let resolved = json!({
        "representation": repr,
        "times_compiled": opts.times_compiled,
        "compiler": meta.compiler,
        "workers": opts.workers,
        "synthetic": args.synthetic,
        "count": args.synthetic.map(|_| args.count),
        "manifest": args.manifest,
    });
    ctx.record(&args.out.join("run.json"), "build-dataset", resolved)
}

fn model_name(cfg: &ModelConfig) -> String {
    match cfg.kind {
        ModelKind::Graph => format!("gcn-{}", cfg.gcn_layers),
        ModelKind::Sequential if cfg.seq_kernels.len() > 1 => "hybrid".into(),
        ModelKind::Sequential => format!("seq-k{}", cfg.seq_kernels.first().copied().unwrap_or(0)),
    }
}

fn vocab_json(v: &Vocabulary) -> Value {
    v.tokens().iter().map(|t| Value::String(t.to_string())).collect()
}

fn vocab_from_meta(meta: &Value) -> anyhow::Result<Vocabulary> {
    let Some(list) = meta.get("vocab").and_then(Value::as_array) else {
        bail!(InputError("checkpoint carries no vocabulary".into()));
    };
    let tokens = list
        .iter()
        .map(|t| t.as_str().and_then(Token::parse_hex))
        .collect::<Option<Vec<Token>>>()
        .ok_or_else(|| InputError("checkpoint vocabulary is malformed".into()))?;
    Ok(Vocabulary::build(tokens))
}

fn resolve_model(ctx: &Context, args: &TrainArgs, vocab_size: usize) -> anyhow::Result<ModelConfig> {
    let mut cfg = match args.model {
        ModelArg::Sequential => ModelConfig::sequential(7, vocab_size),
        ModelArg::Hybrid => ModelConfig::hybrid(vocab_size),
        ModelArg::Graph => ModelConfig::graph(2, vocab_size),
    };
    if let Some(w) = ctx.file.width {
        cfg = cfg.scaled(w);
    }
    let kind = cfg.kind;
    cfg = overlay(cfg, ctx.file.model.as_ref(), "model")?;
    cfg.kind = kind;
    cfg.vocab_size = vocab_size;
    if let Some(k) = args.kernel {
        cfg.seq_kernels = vec![k];
    }
    if let Some(l) = args.gcn_layers {
        cfg.gcn_layers = l;
    }
    if let Some(w) = args.width {
        cfg = cfg.scaled(w);
    }
    cfg.validate().map_err(|e| InputError(e.to_string()))?;
    Ok(cfg)
}

pub fn train(ctx: &Context, args: TrainArgs) -> anyhow::Result<()> {
    let ds = Dataset::open(&args.dataset)?;
    let cfg = resolve_model(ctx, &args, ds.meta.vocab_size)?;
    let mut tc = overlay(TrainConfig::default(), ctx.file.train.as_ref(), "train")?;
    tc.seed = ctx.seed();
    tc.max_epochs = args.epochs.unwrap_or(tc.max_epochs);
    tc.learning_rate = args.lr.unwrap_or(tc.learning_rate);
    tc.batch_size = args.batch_size.or(tc.batch_size);
    tc.patience = args.patience.unwrap_or(tc.patience);
    if let Some(e) = args.execution {
        tc.execution = e.into();
    }
    tc.validate().map_err(|e| InputError(e.to_string()))?;

    let (train_set, _) = ds.load_split(Split::Train, cfg.kind, args.class)?;
    let (val_set, _) = ds.load_split(Split::Val, cfg.kind, args.class)?;
    if train_set.is_empty() {
        bail!(InputError(format!("{} has no training samples", args.dataset.display())));
    }
    let name = model_name(&cfg);
    log::info!(
        "training {name} on {} samples ({} validation)",
        train_set.len(),
        val_set.len()
    );
    let mut model = Model::new(cfg.clone(), ds.meta.representation, tc.seed)?;
    let history = machvuln_core::train::train(&mut model, &tc, &train_set, Some(&val_set))?;

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let meta = json!({
        "name": name,
        "class": args.class,
        "dataset": args.dataset,
        "train": tc,
        "best_epoch": history.best_epoch,
        "vocab": vocab_json(&ds.vocab),
    });
    model.save(args.out.join("model.ckpt"), &meta)?;
    write_json(&args.out.join("history.json"), &history)?;
    if let Some(last) = history.epochs.last() {
        println!(
            "{name}: {} epochs, best epoch {:?}, last train loss {:.4}, best val loss {:?}",
            history.epochs.len(),
            history.best_epoch,
            last.train_loss,
            history.best_val_loss
        );
    }
    let resolved = json!({
        "dataset": args.dataset,
        "representation": ds.meta.representation,
        "model": cfg,
        "train": tc,
        "class": args.class,
    });
    ctx.record(&args.out.join("run.json"), "train", resolved)
}

fn load_checkpoint(path: &Path) -> anyhow::Result<(Model, Value)> {
    require_file(path, "checkpoint")?;
    Model::load(path).with_context(|| format!("loading {}", path.display()))
}

pub fn eval(ctx: &Context, args: EvalArgs) -> anyhow::Result<()> {
    let (model, meta) = load_checkpoint(&args.checkpoint)?;
    let ds = Dataset::open(&args.dataset)?;
    if model.repr != ds.meta.representation {
        bail!(InputError(format!(
            "checkpoint shape {:?} does not match dataset shape {:?}",
            model.repr, ds.meta.representation
        )));
    }
    if vocab_from_meta(&meta)? != ds.vocab {
        bail!(InputError("checkpoint was trained on a different vocabulary".into()));
    }
    let class = args
        .class
        .or_else(|| meta.get("class").and_then(|c| serde_json::from_value(c.clone()).ok()));
    let threshold = args
        .threshold
        .or_else(|| meta.pointer("/train/threshold").and_then(Value::as_f64))
        .unwrap_or(0.5);
    let (set, _) = ds.load_split(args.split, model.kind(), class)?;
    if set.is_empty() {
        bail!(InputError(format!("split {} is empty", args.split.as_str())));
    }
    let report = evaluate(&model, &set, threshold, Default::default())?;
    let name = meta.get("name").and_then(Value::as_str).unwrap_or("model").to_owned();
    let class_label = class.map_or("all".to_owned(), |c| c.to_string());
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{}", render_table(&[(name.as_str(), class_label.as_str(), &report)]));
        println!("{} samples, split {}", set.len(), args.split.as_str());
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_json(&out.join("metrics.json"), &report)?;
        let resolved = json!({
            "checkpoint": args.checkpoint,
            "dataset": args.dataset,
            "split": args.split.as_str(),
            "class": class,
            "threshold": threshold,
        });
        ctx.record(&out.join("run.json"), "eval", resolved)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FunctionScore {
    name: String,
    slot: usize,
    score: f64,
}

pub fn inspect_attention(ctx: &Context, args: InspectArgs) -> anyhow::Result<()> {
    let (model, meta) = load_checkpoint(&args.checkpoint)?;
    let vocab = vocab_from_meta(&meta)?;
    let (x, names) = pipeline::program_tensor(&args.binary, &vocab, &model.repr, model.kind())?;
    let pred = model.predict(&x)?;
    let mut scores: Vec<FunctionScore> = pred
        .functions
        .iter()
        .zip(pred.function_importance())
        .map(|(&slot, score)| FunctionScore {
            name: names.get(slot).cloned().unwrap_or_else(|| format!("<slot {slot}>")),
            slot,
            score,
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.slot.cmp(&b.slot)));
    let text = if args.json {
        let mut s = serde_json::to_string_pretty(&json!({
            "binary": args.binary,
            "probability": pred.probability,
            "functions": scores,
        }))?;
        s.push('\n');
        s
    } else {
        let mut s = format!("{}: P(vulnerable) = {:.4}\n", args.binary.display(), pred.probability);
        for f in &scores {
            let _ = writeln!(s, "  {:.6}  {}", f.score, f.name);
        }
        s
    };
    let resolved = json!({ "checkpoint": args.checkpoint, "binary": args.binary });
    emit(ctx, args.output.as_deref(), &text, "inspect-attention", resolved)
}
