use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BinaryEntry, DatasetError, SourceEntry};

/// The optimization flag pool.
pub const FLAGS: [&str; 6] = ["-O0", "-O1", "-O2", "-O3", "-Os", "-Ofast"];

/// Environment variable naming the C compiler.
pub const CC_ENV: &str = "MACHVULN_CC";

#[derive(Debug, Clone)]
pub struct CompileOptions {
    /// Explicit compiler; falls back to `$MACHVULN_CC`, then `cc`.
    pub compiler: Option<PathBuf>,
    pub times_compiled: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Concurrent compiler processes.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileFailure {
    pub source_id: String,
    pub opt_flag: String,
    pub command: String,
    pub stderr: String,
}

#[derive(Debug, Clone, Default)]
pub struct CompileOutcome {
    /// Binaries of every source whose compilations all succeeded.
    pub binaries: Vec<BinaryEntry>,
    pub failures: Vec<CompileFailure>,
}

pub fn resolve_compiler(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CC_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cc"))
}

fn check_compiler(cc: &Path) -> Result<(), DatasetError> {
    match Command::new(cc).arg("--version").output() {
        Ok(out) if out.status.success() => Ok(()),
        Ok(out) => Err(DatasetError::CompilerNotFound(format!(
            "{} --version exited with {}",
            cc.display(),
            out.status
        ))),
        Err(e) => Err(DatasetError::CompilerNotFound(format!("{}: {e}", cc.display()))),
    }
}

/// Flags for one source: `times` distinct draws from [`FLAGS`].
pub fn draw_flags(seed: u64, index: usize, times: usize) -> Vec<&'static str> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut pool = FLAGS.to_vec();
    pool.shuffle(&mut rng);
    pool.truncate(times);
    pool
}

fn quote(p: &Path) -> String {
    let s = p.display().to_string();
    if s.contains(char::is_whitespace) {
        format!("'{s}'")
    } else {
        s
    }
}

/// Compiles every source `times_compiled` times with distinct flags.
/// A source with any failed compilation is dropped entirely and its
/// failures are reported.
pub fn compile_corpus(manifest: &[SourceEntry], opts: &CompileOptions) -> Result<CompileOutcome, DatasetError> {
    if !(1..=FLAGS.len()).contains(&opts.times_compiled) {
        return Err(DatasetError::TimesCompiled {
            got: opts.times_compiled,
            max: FLAGS.len(),
        });
    }
    let cc = resolve_compiler(opts.compiler.as_deref());
    check_compiler(&cc)?;
    std::fs::create_dir_all(&opts.out_dir).map_err(|source| DatasetError::Io {
        path: opts.out_dir.clone(),
        source,
    })?;

    let jobs: Vec<(usize, &SourceEntry, &'static str)> = manifest
        .iter()
        .enumerate()
        .flat_map(|(i, s)| draw_flags(opts.seed, i, opts.times_compiled).into_iter().map(move |f| (i, s, f)))
        .collect();
    let results: Mutex<Vec<Option<Result<BinaryEntry, CompileFailure>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..opts.workers.max(1) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(_, src, flag)) = jobs.get(j) else {
                    break;
                };
                let r = compile_one(&cc, src, flag, &opts.out_dir);
                results.lock().expect("no panics while holding the lock")[j] = Some(r);
            });
        }
    });

    let results = results.into_inner().expect("workers finished");
    let mut outcome = CompileOutcome::default();
    let mut failed = vec![false; manifest.len()];
    for ((i, _, _), r) in jobs.iter().zip(&results) {
        if let Some(Err(f)) = r {
            failed[*i] = true;
            log::warn!("compilation failed: {} ({})", f.source_id, f.opt_flag);
            outcome.failures.push(f.clone());
        }
    }
    for ((i, _, _), r) in jobs.iter().zip(results) {
        if let Some(Ok(b)) = r {
            if !failed[*i] {
                outcome.binaries.push(b);
            }
        }
    }
    Ok(outcome)
}

fn compile_one(cc: &Path, src: &SourceEntry, flag: &str, out_dir: &Path) -> Result<BinaryEntry, CompileFailure> {
    let out = out_dir.join(format!("{}{}", src.id, flag));
    let command = format!("{} {flag} -o {} {}", quote(cc), quote(&out), quote(&src.path));
    let failure = |stderr: String| CompileFailure {
        source_id: src.id.clone(),
        opt_flag: flag.to_owned(),
        command: command.clone(),
        stderr,
    };
    let result = Command::new(cc).arg(flag).arg("-o").arg(&out).arg(&src.path).output();
    match result {
        Ok(o) if o.status.success() => Ok(BinaryEntry {
            path: out,
            source_id: src.id.clone(),
            opt_flag: flag.to_owned(),
            class: src.class,
            label: src.label,
            split: src.split,
            command,
        }),
        Ok(o) => Err(failure(String::from_utf8_lossy(&o.stderr).into_owned())),
        Err(e) => Err(failure(e.to_string())),
    }
}
