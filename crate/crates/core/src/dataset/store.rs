//! On-disk samples: a JSONL index plus a sidecar of little-endian `i32`
//! arrays. See `docs/sample-format.md` for the byte layout.

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{read_jsonl, write_jsonl, DatasetError, Label, Split, VulnClass};
use crate::representation::{GraphTensor, RepresentationConfig, SeqTensor};

pub const INDEX_FILE: &str = "samples.jsonl";
pub const DATA_FILE: &str = "samples.bin";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub label: Label,
    pub class: VulnClass,
    pub split: Split,
    pub source_id: String,
    pub binary: PathBuf,
    pub shape: RepresentationConfig,
    /// Byte offset of this record's arrays in the sidecar.
    pub offset: u64,
}

/// Bytes one record occupies in the sidecar.
pub fn record_bytes(shape: &RepresentationConfig) -> u64 {
    4 * (shape.seq_len() + 2 * shape.graph_len()) as u64
}

/// A decoded sample, both representations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub seq: SeqTensor,
    pub graph: GraphTensor,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    }
}

pub struct SampleWriter {
    dir: PathBuf,
    data: BufWriter<File>,
    offset: u64,
    records: Vec<SampleRecord>,
}

impl SampleWriter {
    pub fn create(dir: &Path) -> Result<Self, DatasetError> {
        let path = dir.join(DATA_FILE);
        let data = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        Ok(Self {
            dir: dir.to_owned(),
            data,
            offset: 0,
            records: Vec::new(),
        })
    }

    /// Appends `sample`; `record.offset` and `record.shape` are filled in.
    pub fn push(&mut self, mut record: SampleRecord, sample: &Sample) -> Result<(), DatasetError> {
        let path = self.dir.join(DATA_FILE);
        let (n_seq, m_seq) = sample.seq.0.dim();
        let (p, n_blk, _) = sample.graph.features.dim();
        record.shape = RepresentationConfig { n_seq, m_seq, n_blk, p };
        record.offset = self.offset;
        let ints = sample
            .seq
            .0
            .iter()
            .chain(sample.graph.features.iter())
            .map(|&v| v as i32)
            .chain(sample.graph.adjacency.iter().map(|&v| v as i32));
        for v in ints {
            self.data.write_all(&v.to_le_bytes()).map_err(io_err(&path))?;
        }
        self.offset += record_bytes(&record.shape);
        self.records.push(record);
        Ok(())
    }

    pub fn finish(mut self) -> Result<Vec<SampleRecord>, DatasetError> {
        let path = self.dir.join(DATA_FILE);
        self.data.flush().map_err(io_err(&path))?;
        write_jsonl(&self.dir.join(INDEX_FILE), &self.records)?;
        Ok(self.records)
    }
}

pub struct SampleStore {
    data_path: PathBuf,
    pub records: Vec<SampleRecord>,
}

impl SampleStore {
    pub fn open(dir: &Path) -> Result<Self, DatasetError> {
        Ok(Self {
            data_path: dir.join(DATA_FILE),
            records: read_jsonl(&dir.join(INDEX_FILE))?,
        })
    }

    pub fn read(&self, record: &SampleRecord) -> Result<Sample, DatasetError> {
        let path = &self.data_path;
        let mut f = File::open(path).map_err(io_err(path))?;
        f.seek(SeekFrom::Start(record.offset)).map_err(io_err(path))?;
        let mut buf = vec![0u8; record_bytes(&record.shape) as usize];
        f.read_exact(&mut buf).map_err(io_err(path))?;
        decode_record(&buf, &record.shape).map_err(|detail| DatasetError::Manifest {
            path: path.clone(),
            line: 0,
            detail: format!("sample {}: {detail}", record.id),
        })
    }

    /// Every record, decoded, in index order.
    pub fn read_all(&self) -> Result<Vec<(SampleRecord, Sample)>, DatasetError> {
        let path = &self.data_path;
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(io_err(path))?;
        self.records
            .iter()
            .map(|r| {
                let lo = r.offset as usize;
                let hi = lo + record_bytes(&r.shape) as usize;
                let chunk = bytes.get(lo..hi).ok_or_else(|| DatasetError::Manifest {
                    path: path.clone(),
                    line: 0,
                    detail: format!("sample {} runs past the end of the sidecar", r.id),
                })?;
                let s = decode_record(chunk, &r.shape).map_err(|detail| DatasetError::Manifest {
                    path: path.clone(),
                    line: 0,
                    detail,
                })?;
                Ok((r.clone(), s))
            })
            .collect()
    }
}

fn decode_record(buf: &[u8], shape: &RepresentationConfig) -> Result<Sample, String> {
    let ints: Vec<i32> = buf
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let (sl, gl) = (shape.seq_len(), shape.graph_len());
    if ints.len() != sl + 2 * gl {
        return Err(format!("expected {} integers, found {}", sl + 2 * gl, ints.len()));
    }
    let id = |v: i32| u32::try_from(v).map_err(|_| format!("negative token id {v}"));
    let seq = ints[..sl].iter().map(|&v| id(v)).collect::<Result<Vec<_>, _>>()?;
    let feat = ints[sl..sl + gl].iter().map(|&v| id(v)).collect::<Result<Vec<_>, _>>()?;
    let adj = ints[sl + gl..]
        .iter()
        .map(|&v| match v {
            0 | 1 => Ok(v as u8),
            _ => Err(format!("adjacency entry {v} is not 0/1")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let g = (shape.p, shape.n_blk, shape.n_blk);
    Ok(Sample {
        seq: SeqTensor(Array2::from_shape_vec((shape.n_seq, shape.m_seq), seq).map_err(|e| e.to_string())?),
        graph: GraphTensor {
            features: Array3::from_shape_vec(g, feat).map_err(|e| e.to_string())?,
            adjacency: Array3::from_shape_vec(g, adj).map_err(|e| e.to_string())?,
        },
    })
}
