//! Labeled source corpora: violation grouping, balanced splits, compilation
//! under randomized optimization flags, and class-size downsampling.

mod compile;
pub mod store;
pub mod synth;

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compile::{compile_corpus, resolve_compiler, CompileFailure, CompileOptions, CompileOutcome, CC_ENV, FLAGS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnClass {
    NullDeref,
    ArrayBound,
    IntOverflow,
}

impl VulnClass {
    pub const ALL: [VulnClass; 3] = [VulnClass::NullDeref, VulnClass::ArrayBound, VulnClass::IntOverflow];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnClass::NullDeref => "null_deref",
            VulnClass::ArrayBound => "array_bound",
            VulnClass::IntOverflow => "int_overflow",
        }
    }
}

impl std::fmt::Display for VulnClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VulnClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VulnClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown vulnerability class {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Vulnerable,
    Safe,
}

impl Label {
    pub fn target(self) -> f64 {
        match self {
            Label::Vulnerable => 1.0,
            Label::Safe => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown split {s:?} (expected train, val or test)"))
    }
}

/// A labeled source file before splitting. Either `class` is given or it is
/// derived from the verifier `violations`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSource {
    pub path: PathBuf,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<VulnClass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

/// One row of a source manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub id: String,
    pub path: PathBuf,
    pub class: VulnClass,
    pub label: Label,
    pub split: Split,
}

/// One row of a binary manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryEntry {
    pub path: PathBuf,
    pub source_id: String,
    pub opt_flag: String,
    pub class: VulnClass,
    pub label: Label,
    pub split: Split,
    /// Compiler invocation, verbatim.
    pub command: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("C compiler not found: {0}")]
    CompilerNotFound(String),
    #[error("times_compiled must be between 1 and {max}, got {got}")]
    TimesCompiled { got: usize, max: usize },
    #[error("{path}: line {line}: {detail}")]
    Manifest { path: PathBuf, line: usize, detail: String },
    #[error("source {0} has neither a class nor recognizable violations")]
    Unclassified(PathBuf),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Why a violation list was not mapped to one of the three classes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rejected: {reason}")]
pub struct Rejected {
    pub reason: String,
}

fn classify_one(raw: &str) -> Result<VulnClass, Rejected> {
    let s = raw.to_ascii_lowercase();
    let word = |w: &str| s.split(|c: char| !c.is_ascii_alphanumeric()).any(|t| t == w);
    if s.contains("bound") {
        return Ok(VulnClass::ArrayBound);
    }
    if s.contains("overflow") && (word("add") || word("sub") || word("mul")) {
        return Ok(VulnClass::IntOverflow);
    }
    if s.contains("null") && (s.contains("deref") || s.contains("pointer")) {
        return Ok(VulnClass::NullDeref);
    }
    Err(Rejected {
        reason: format!("{raw:?} is not a null dereference, array bound or ADD/SUB/MUL overflow"),
    })
}

/// Maps verifier violation strings to one vulnerability class: bound
/// variants collapse to `array_bound`, ADD/SUB/MUL overflows to
/// `int_overflow`, null dereferences to `null_deref`.
pub fn group_violations<S: AsRef<str>>(raw: &[S]) -> Result<VulnClass, Rejected> {
    let mut found: Option<VulnClass> = None;
    for r in raw {
        let c = classify_one(r.as_ref())?;
        match found {
            Some(prev) if prev != c => {
                return Err(Rejected {
                    reason: format!("violations span two classes ({prev} and {c})"),
                })
            }
            _ => found = Some(c),
        }
    }
    found.ok_or_else(|| Rejected {
        reason: "no violations".into(),
    })
}

/// Stable identifier of a source: its file stem.
pub fn source_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// `(train, val, test)` sizes for `n` items: 80/10/10 with rounding.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n as f64 * 0.8).round() as usize;
    let val = ((n as f64 * 0.1).round() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Balances labels by downsampling the majority label, shuffles with
/// `seed`, then assigns 80/10/10 splits. Labels are interleaved before
/// cutting so every split stays as close to 50/50 as its size allows.
pub fn make_splits(sources: &[LabeledSource], class: VulnClass, seed: u64) -> Vec<SourceEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_label: BTreeMap<Label, Vec<&LabeledSource>> = BTreeMap::new();
    for s in sources {
        by_label.entry(s.label).or_default().push(s);
    }
    let mut vuln = by_label.remove(&Label::Vulnerable).unwrap_or_default();
    let mut safe = by_label.remove(&Label::Safe).unwrap_or_default();
    vuln.shuffle(&mut rng);
    safe.shuffle(&mut rng);
    let keep = vuln.len().min(safe.len());
    vuln.truncate(keep);
    safe.truncate(keep);

    let mut pairs: Vec<(&LabeledSource, &LabeledSource)> = vuln.into_iter().zip(safe).collect();
    pairs.shuffle(&mut rng);
    let ordered: Vec<&LabeledSource> = pairs
        .into_iter()
        .flat_map(|(v, s)| if rng_coin(&mut rng) { [v, s] } else { [s, v] })
        .collect();

    let (train, val, _) = split_sizes(ordered.len());
    ordered
        .into_iter()
        .enumerate()
        .map(|(i, s)| SourceEntry {
            id: source_id(&s.path),
            path: s.path.clone(),
            class,
            label: s.label,
            split: if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            },
        })
        .collect()
}

fn rng_coin(rng: &mut ChaCha8Rng) -> bool {
    rand::Rng::gen_bool(rng, 0.5)
}

/// Resolves each source's class (explicit or from its violations) and
/// splits every class subset separately.
pub fn split_sources(sources: &[LabeledSource], seed: u64) -> Result<Vec<SourceEntry>, DatasetError> {
    let mut by_class: BTreeMap<VulnClass, Vec<LabeledSource>> = BTreeMap::new();
    for s in sources {
        let class = match s.class {
            Some(c) => c,
            None => group_violations(&s.violations).map_err(|_| DatasetError::Unclassified(s.path.clone()))?,
        };
        by_class.entry(class).or_default().push(s.clone());
    }
    Ok(by_class
        .into_iter()
        .flat_map(|(class, srcs)| make_splits(&srcs, class, seed))
        .collect())
}

/// Per-class seeded subsampling at source granularity until every class has
/// the same number of binaries (the smallest achievable common size).
pub fn downsample(manifests: &BTreeMap<VulnClass, Vec<BinaryEntry>>, seed: u64) -> BTreeMap<VulnClass, Vec<BinaryEntry>> {
    let counts: BTreeMap<VulnClass, Vec<(String, usize)>> = manifests
        .iter()
        .map(|(c, rows)| {
            let mut per: BTreeMap<&str, usize> = BTreeMap::new();
            for r in rows {
                *per.entry(&r.source_id).or_default() += 1;
            }
            (*c, per.into_iter().map(|(k, v)| (k.to_owned(), v)).collect())
        })
        .collect();
    let keep = select_sources(&counts, seed);
    manifests
        .iter()
        .map(|(c, rows)| {
            let k = &keep[c];
            (*c, rows.iter().filter(|r| k.contains_key(&r.source_id)).cloned().collect())
        })
        .collect()
}

/// Chooses, per class, a seeded random subset of sources whose binary
/// counts sum to a common target.
pub fn select_sources(
    counts: &BTreeMap<VulnClass, Vec<(String, usize)>>,
    seed: u64,
) -> BTreeMap<VulnClass, HashMap<String, usize>> {
    let orders: BTreeMap<VulnClass, Vec<&(String, usize)>> = counts
        .iter()
        .map(|(c, v)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (*c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut o: Vec<&(String, usize)> = v.iter().collect();
            o.shuffle(&mut rng);
            (*c, o)
        })
        .collect();
    let mut target = counts
        .values()
        .map(|v| v.iter().map(|(_, n)| n).sum::<usize>())
        .min()
        .unwrap_or(0);
    loop {
        let picked: BTreeMap<VulnClass, (HashMap<String, usize>, usize)> = orders
            .iter()
            .map(|(c, order)| {
                let mut total = 0;
                let mut keep = HashMap::new();
                for (id, n) in order {
                    if total + n <= target {
                        total += n;
                        keep.insert(id.clone(), *n);
                    }
                }
                (*c, (keep, total))
            })
            .collect();
        let reached = picked.values().map(|(_, t)| *t).min().unwrap_or(0);
        if reached == target {
            return picked.into_iter().map(|(c, (k, _))| (c, k)).collect();
        }
        target = reached;
    }
}

/// The leakage invariant: every source's binaries share one split.
pub fn check_leakage(rows: &[BinaryEntry]) -> Result<(), String> {
    let mut seen: HashMap<&str, Split> = HashMap::new();
    for r in rows {
        match seen.insert(&r.source_id, r.split) {
            Some(prev) if prev != r.split => {
                return Err(format!(
                    "source {} appears in both {} and {}",
                    r.source_id,
                    prev.as_str(),
                    r.split.as_str()
                ))
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let f = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| DatasetError::Manifest {
            path: path.to_owned(),
            line: i + 1,
            detail: e.to_string(),
        })?);
    }
    Ok(rows)
}
