//! ELF64 loading and function enumeration.
//!
//! Parsing is delegated to `goblin`; this module only checks the machine
//! type, keeps executable sections, and slices function bodies out of them
//! using the symbol table.

use std::path::{Path, PathBuf};

use goblin::elf::{header, section_header, sym, Elf};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ElfError {
    #[error("{0}: not an ELF file")]
    NotElf(PathBuf),
    #[error("{path}: unsupported architecture ({detail})")]
    WrongArchitecture { path: PathBuf, detail: String },
    #[error("{path}: malformed ELF: {detail}")]
    MalformedElf { path: PathBuf, detail: String },
    #[error("{0}: no function symbols (stripped binary?)")]
    StrippedBinary(PathBuf),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Func,
    Object,
    Other,
}

#[derive(Debug, Clone, Serialize)]
pub struct CodeSection {
    pub name: String,
    pub address: u64,
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

impl CodeSection {
    pub fn contains(&self, address: u64, size: u64) -> bool {
        address >= self.address && address + size <= self.address + self.bytes.len() as u64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Symbol {
    pub name: String,
    pub address: u64,
    pub size: u64,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct BinaryImage {
    pub path: PathBuf,
    pub code_sections: Vec<CodeSection>,
    pub symbols: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionBytes {
    pub name: String,
    pub address: u64,
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

/// Compiler and C-runtime scaffolding present in every gcc-linked binary.
pub const SCAFFOLDING: &[&str] = &[
    "_start",
    "_init",
    "_fini",
    "deregister_tm_clones",
    "register_tm_clones",
    "__do_global_dtors_aux",
    "frame_dummy",
    "__libc_csu_init",
    "__libc_csu_fini",
    "_dl_relocate_static_pie",
    "__x86.get_pc_thunk.bx",
    "__stack_chk_fail_local",
];

pub fn is_scaffolding(name: &str, section: &str) -> bool {
    SCAFFOLDING.contains(&name) || section.starts_with(".plt") || section == ".init" || section == ".fini"
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<BinaryImage, ElfError> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|source| ElfError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_binary(path, &data)
}

pub fn parse_binary(path: &Path, data: &[u8]) -> Result<BinaryImage, ElfError> {
    if data.len() < 4 || &data[..4] != header::ELFMAG {
        return Err(ElfError::NotElf(path.to_owned()));
    }
    let malformed = |detail: String| ElfError::MalformedElf {
        path: path.to_owned(),
        detail,
    };
    if data.len() < header::SIZEOF_IDENT {
        return Err(malformed("truncated identification header".into()));
    }
    let class = data[header::EI_CLASS];
    let endian = data[header::EI_DATA];
    if class != header::ELFCLASS64 || endian != header::ELFDATA2LSB {
        return Err(ElfError::WrongArchitecture {
            path: path.to_owned(),
            detail: format!("class {class}, data encoding {endian}; need ELF64 little-endian"),
        });
    }
    let elf = Elf::parse(data).map_err(|e| malformed(e.to_string()))?;
    if elf.header.e_machine != header::EM_X86_64 {
        return Err(ElfError::WrongArchitecture {
            path: path.to_owned(),
            detail: format!("machine {}", header::machine_to_str(elf.header.e_machine)),
        });
    }

    let mut code_sections = Vec::new();
    for sh in &elf.section_headers {
        let exec = sh.sh_flags & section_header::SHF_EXECINSTR as u64 != 0;
        if !exec || sh.sh_type == section_header::SHT_NOBITS {
            continue;
        }
        let name = elf.shdr_strtab.get_at(sh.sh_name).unwrap_or("").to_owned();
        let range = sh
            .file_range()
            .ok_or_else(|| malformed(format!("section {name} has no file range")))?;
        let bytes = data
            .get(range)
            .ok_or_else(|| malformed(format!("section {name} extends past end of file")))?
            .to_vec();
        code_sections.push(CodeSection {
            name,
            address: sh.sh_addr,
            bytes,
        });
    }
    code_sections.sort_by_key(|s| s.address);
    for pair in code_sections.windows(2) {
        if pair[0].address + pair[0].bytes.len() as u64 > pair[1].address {
            return Err(malformed(format!(
                "sections {} and {} overlap",
                pair[0].name, pair[1].name
            )));
        }
    }

    let symbols = elf
        .syms
        .iter()
        .filter(|s| s.st_shndx != section_header::SHN_UNDEF as usize)
        .map(|s| Symbol {
            name: elf.strtab.get_at(s.st_name).unwrap_or("").to_owned(),
            address: s.st_value,
            size: s.st_size,
            kind: match s.st_type() {
                sym::STT_FUNC => SymbolKind::Func,
                sym::STT_OBJECT => SymbolKind::Object,
                _ => SymbolKind::Other,
            },
        })
        .collect();

    Ok(BinaryImage {
        path: path.to_owned(),
        code_sections,
        symbols,
    })
}

impl BinaryImage {
    pub fn section_of(&self, address: u64, size: u64) -> Option<&CodeSection> {
        self.code_sections.iter().find(|s| s.contains(address, size))
    }

    /// Every sized FUNC symbol inside an executable section, by address.
    /// Aliases (same address) are collapsed to the first name.
    pub fn all_functions(&self) -> Result<Vec<FunctionBytes>, ElfError> {
        self.functions_where(|_, _| true)
    }

    /// User functions: like [`all_functions`](Self::all_functions) with
    /// runtime scaffolding removed.
    pub fn extract_functions(&self) -> Result<Vec<FunctionBytes>, ElfError> {
        self.functions_where(|name, section| !is_scaffolding(name, section))
    }

    fn functions_where(
        &self,
        keep: impl Fn(&str, &str) -> bool,
    ) -> Result<Vec<FunctionBytes>, ElfError> {
        if !self.symbols.iter().any(|s| s.kind == SymbolKind::Func) {
            return Err(ElfError::StrippedBinary(self.path.clone()));
        }
        let mut funcs: Vec<FunctionBytes> = Vec::new();
        let mut syms: Vec<&Symbol> = self
            .symbols
            .iter()
            .filter(|s| s.kind == SymbolKind::Func && s.size > 0)
            .collect();
        syms.sort_by(|a, b| a.address.cmp(&b.address).then_with(|| a.name.cmp(&b.name)));
        for s in syms {
            let Some(section) = self.section_of(s.address, s.size) else {
                continue;
            };
            if !keep(&s.name, &section.name) {
                continue;
            }
            if let Some(prev) = funcs.last() {
                if s.address < prev.address + prev.bytes.len() as u64 {
                    continue;
                }
            }
            let lo = (s.address - section.address) as usize;
            funcs.push(FunctionBytes {
                name: s.name.clone(),
                address: s.address,
                bytes: section.bytes[lo..lo + s.size as usize].to_vec(),
            });
        }
        Ok(funcs)
    }
}

/// Shorthand for `image.extract_functions()`.
pub fn extract_functions(image: &BinaryImage) -> Result<Vec<FunctionBytes>, ElfError> {
    image.extract_functions()
}
