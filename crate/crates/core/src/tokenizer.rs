//! Instruction tokens with operand bytes removed, and the vocabulary that
//! maps them to integer ids.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::decoder::{DecodedInstruction, Encoding};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const INVALID: u32 = 2;
pub const RESERVED: u32 = 3;

/// Lead byte that stands in for every VEX/EVEX-encoded instruction.
pub const VEX_FAMILY: u8 = 0xC4;

/// Prefix, REX, opcode, ModR/M and SIB bytes of one instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(Vec<u8>);

impl Token {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Token(bytes)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn parse_hex(s: &str) -> Option<Self> {
        if s.is_empty() || s.len() % 2 != 0 {
            return None;
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
            .collect::<Option<Vec<_>>>()
            .map(Token)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02X}")?;
        }
        Ok(())
    }
}

/// Token of a decoded instruction; `None` for the INVALID pseudo-instruction.
pub fn tokenize(instr: &DecodedInstruction) -> Option<Token> {
    match instr.encoding {
        Encoding::Invalid => None,
        Encoding::Vex => Some(Token(vec![VEX_FAMILY])),
        Encoding::Legacy => {
            let mut bytes = Vec::with_capacity(10);
            bytes.extend_from_slice(&instr.legacy_prefixes);
            bytes.extend(instr.rex);
            bytes.extend_from_slice(&instr.opcode);
            bytes.extend(instr.modrm);
            bytes.extend(instr.sib);
            Some(Token(bytes))
        }
    }
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<Token, u32>,
    tokens: Vec<Token>,
}

impl Vocabulary {
    /// Ids are handed out in first-seen order starting after the reserved ids.
    pub fn build<I: IntoIterator<Item = Token>>(stream: I) -> Self {
        let mut vocab = Vocabulary::default();
        for tok in stream {
            vocab.insert(tok);
        }
        vocab
    }

    pub fn insert(&mut self, tok: Token) -> u32 {
        if let Some(&id) = self.ids.get(&tok) {
            return id;
        }
        let id = RESERVED + self.tokens.len() as u32;
        self.ids.insert(tok.clone(), id);
        self.tokens.push(tok);
        id
    }

    /// Entry count including the reserved ids.
    pub fn size(&self) -> usize {
        RESERVED as usize + self.tokens.len()
    }

    pub fn encode(&self, tok: &Token) -> u32 {
        self.ids.get(tok).copied().unwrap_or(UNK)
    }

    pub fn encode_instruction(&self, instr: &DecodedInstruction) -> u32 {
        match tokenize(instr) {
            Some(t) => self.encode(&t),
            None => INVALID,
        }
    }

    /// Non-reserved tokens in id order.
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> Option<&Token> {
        id.checked_sub(RESERVED)
            .and_then(|i| self.tokens.get(i as usize))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(w, "{t}\t{}", RESERVED as usize + i)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, VocabError> {
        let mut vocab = Vocabulary::default();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let err = |detail: &str| VocabError::Parse {
                line: n + 1,
                detail: detail.to_owned(),
            };
            let (hex, id) = line.split_once('\t').ok_or_else(|| err("missing tab"))?;
            let tok = Token::parse_hex(hex).ok_or_else(|| err("bad hex token"))?;
            let id: u32 = id.trim().parse().map_err(|_| err("bad id"))?;
            if id != RESERVED + vocab.tokens.len() as u32 || vocab.ids.contains_key(&tok) {
                return Err(err("ids must be unique and consecutive from 3"));
            }
            vocab.insert(tok);
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(io::BufReader::new(f))
    }
}
