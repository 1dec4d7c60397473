//! Embedding matrices, query batches, prefix views, and the on-disk formats.
//!
//! Binary matrix layout (little-endian):
//!
//! ```text
//! magic    b"PGSV"            4 bytes
//! version  u32 = 1            4 bytes
//! n_rows   u64                8 bytes
//! dim      u32                4 bytes
//! reserved u32 = 0            4 bytes
//! ids      n_rows x u64
//! data     n_rows x dim x f32, row-major
//! ```
//!
//! An optional JSON-lines sidecar `<path>.meta.jsonl` holds one
//! `{"id": <u64>, "text": <string>}` record per row.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PGSV";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: u64 = 24;

/// Immutable corpus of dense f32 vectors with stable 64-bit document ids.
///
/// Rows are stored row-major. Construction validates shape, finiteness, and
/// id uniqueness; after that the matrix never changes, so it is safe to share
/// across search workers.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<u64>,
    data: Vec<f32>,
    index_of: HashMap<u64, usize>,
}

impl EmbeddingMatrix {
    /// Build a matrix from raw parts. `data` is `ids.len() * dim` floats,
    /// row-major.
    pub fn new(dim: usize, ids: Vec<u64>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        if data.len() != ids.len() * dim {
            return Err(Error::ShapeMismatch {
                data_len: data.len(),
                n_rows: ids.len(),
                dim,
            });
        }
        for (i, x) in data.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    row: i / dim,
                    col: i % dim,
                });
            }
        }
        let mut index_of = HashMap::with_capacity(ids.len());
        for (row, &id) in ids.iter().enumerate() {
            if index_of.insert(id, row).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(Self {
            dim,
            ids,
            data,
            index_of,
        })
    }

    /// Convenience constructor from per-row vectors.
    pub fn from_rows(ids: Vec<u64>, rows: Vec<Vec<f32>>) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::ShapeMismatch {
                    data_len: r.len(),
                    n_rows: rows.len(),
                    dim,
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, ids, data)
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    /// Row index for a document id, if present.
    #[inline]
    pub fn row_index(&self, id: u64) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    /// Zero-copy view of the first `d` coordinates of every row.
    pub fn prefix_view(&self, d: usize) -> Result<PrefixView<'_>> {
        if d == 0 || d > self.dim {
            return Err(Error::DimOutOfRange { d, dim: self.dim });
        }
        Ok(PrefixView { mat: self, d })
    }

    /// Serialize to the binary format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_rows() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for id in &self.ids {
            w.write_all(&id.to_le_bytes())?;
        }
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    /// Deserialize from the binary format. `known_len`, when available,
    /// lets truncation be detected before any allocation.
    pub fn read_from<R: Read>(mut r: R, known_len: Option<u64>) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(map_eof)?;
        if magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let n_rows = read_u64(&mut r)?;
        let dim = read_u32(&mut r)?;
        let _reserved = read_u32(&mut r)?;
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        let payload = n_rows
            .checked_mul(8)
            .and_then(|b| n_rows.checked_mul(dim as u64)?.checked_mul(4)?.checked_add(b))
            .ok_or(Error::ShapeMismatch {
                data_len: usize::MAX,
                n_rows: n_rows as usize,
                dim: dim as usize,
            })?;
        if let Some(len) = known_len {
            let expected = HEADER_LEN + payload;
            if len < expected {
                return Err(Error::Truncated {
                    expected,
                    found: len,
                });
            }
            if len > expected {
                return Err(Error::TrailingBytes {
                    extra: len - expected,
                });
            }
        }
        let n = n_rows as usize;
        let d = dim as usize;
        let mut ids = Vec::with_capacity(n);
        let mut buf8 = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf8).map_err(map_eof)?;
            ids.push(u64::from_le_bytes(buf8));
        }
        let mut bytes = vec![0u8; n * d * 4];
        r.read_exact(&mut bytes).map_err(map_eof)?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if known_len.is_none() {
            let mut probe = [0u8; 1];
            if r.read(&mut probe)? != 0 {
                return Err(Error::TrailingBytes { extra: 1 });
            }
        }
        Self::new(d, ids, data)
    }

    /// Serialized bytes of the binary format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN as usize + self.ids.len() * 8 + self.data.len() * 4);
        self.write_to(&mut out).expect("vec write cannot fail");
        out
    }

    /// Hex-encoded content fingerprint (first 16 hex chars of SHA-256 over
    /// the serialized form).
    pub fn content_hash(&self) -> String {
        short_sha256(&self.to_bytes())
    }
}

fn map_eof(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Truncated {
            expected: 0,
            found: 0,
        }
    } else {
        Error::Io(e)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(map_eof)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(map_eof)?;
    Ok(u64::from_le_bytes(b))
}

fn short_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

/// Load a matrix from a file, checking the declared size against the file
/// length before reading the payload.
pub fn load_matrix<P: AsRef<Path>>(path: P) -> Result<EmbeddingMatrix> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    EmbeddingMatrix::read_from(BufReader::new(file), Some(len))
}

/// Save a matrix in the binary format.
pub fn save_matrix<P: AsRef<Path>>(m: &EmbeddingMatrix, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    m.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Restriction of a matrix to its first `d` columns. Rows and ids keep
/// their order; nothing is copied until `to_owned`.
#[derive(Debug, Clone, Copy)]
pub struct PrefixView<'a> {
    mat: &'a EmbeddingMatrix,
    d: usize,
}

impl<'a> PrefixView<'a> {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_rows(&self) -> usize {
        self.mat.n_rows()
    }

    pub fn ids(&self) -> &'a [u64] {
        self.mat.ids()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.mat.row(i)[..self.d]
    }

    /// Narrow the view further. `prefix_view(m, d1)` of `prefix_view(m, d2)`
    /// with `d1 <= d2` equals `prefix_view(m, d1)`.
    pub fn prefix(&self, d: usize) -> Result<PrefixView<'a>> {
        if d == 0 || d > self.d {
            return Err(Error::DimOutOfRange { d, dim: self.d });
        }
        Ok(PrefixView { mat: self.mat, d })
    }

    /// Materialize the view as an owned matrix.
    pub fn to_owned_matrix(&self) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(self.n_rows() * self.d);
        for i in 0..self.n_rows() {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix::new(self.d, self.mat.ids().to_vec(), data)
            .expect("view of a valid matrix is valid")
    }
}

/// A batch of query vectors, optionally paired with ground-truth document
/// ids (one per query).
#[derive(Debug, Clone)]
pub struct QueryBatch {
    dim: usize,
    data: Vec<f32>,
    ground_truth: Option<Vec<u64>>,
}

impl QueryBatch {
    pub fn new(dim: usize, data: Vec<f32>, ground_truth: Option<Vec<u64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                data_len: data.len(),
                n_rows: data.len() / dim,
                dim,
            });
        }
        for (i, x) in data.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    row: i / dim,
                    col: i % dim,
                });
            }
        }
        let n = data.len() / dim;
        if let Some(truth) = &ground_truth {
            if truth.len() != n {
                return Err(Error::LengthMismatch {
                    left: truth.len(),
                    right: n,
                });
            }
        }
        Ok(Self {
            dim,
            data,
            ground_truth,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f32>>, ground_truth: Option<Vec<u64>>) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::ShapeMismatch {
                    data_len: r.len(),
                    n_rows: rows.len(),
                    dim,
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data, ground_truth)
    }

    /// Reinterpret a stored matrix as a query batch; matrix ids are taken to
    /// be query indexes and dropped.
    pub fn from_matrix(m: EmbeddingMatrix) -> Self {
        Self {
            dim: m.dim,
            data: m.data,
            ground_truth: None,
        }
    }

    /// Store as a matrix whose ids are the query indexes `0..n`.
    pub fn to_matrix(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            self.dim,
            (0..self.n_queries() as u64).collect(),
            self.data.clone(),
        )
        .expect("valid batch is a valid matrix")
    }

    pub fn n_queries(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, q: usize) -> &[f32] {
        &self.data[q * self.dim..(q + 1) * self.dim]
    }

    pub fn ground_truth(&self) -> Option<&[u64]> {
        self.ground_truth.as_deref()
    }

    pub fn set_ground_truth(&mut self, truth: Vec<u64>) -> Result<()> {
        if truth.len() != self.n_queries() {
            return Err(Error::LengthMismatch {
                left: truth.len(),
                right: self.n_queries(),
            });
        }
        self.ground_truth = Some(truth);
        Ok(())
    }

    /// Check that every ground-truth id exists in `corpus`.
    pub fn validate_truth_against(&self, corpus: &EmbeddingMatrix) -> Result<()> {
        let truth = self.ground_truth.as_ref().ok_or(Error::MissingTruth)?;
        for &id in truth {
            if corpus.row_index(id).is_none() {
                return Err(Error::UnknownId(id));
            }
        }
        Ok(())
    }

    /// Content fingerprint covering vectors and, when present, ground truth.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::with_capacity(16 + self.data.len() * 4);
        bytes.extend_from_slice(b"PGSQ");
        bytes.extend_from_slice(&(self.n_queries() as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for x in &self.data {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        match &self.ground_truth {
            None => bytes.push(0),
            Some(truth) => {
                bytes.push(1);
                for id in truth {
                    bytes.extend_from_slice(&id.to_le_bytes());
                }
            }
        }
        short_sha256(&bytes)
    }
}

/// One sidecar record pairing a document id with its source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub id: u64,
    pub text: String,
}

/// Path of the meta sidecar for a matrix file.
pub fn meta_sidecar_path<P: AsRef<Path>>(matrix_path: P) -> std::path::PathBuf {
    let mut s = matrix_path.as_ref().as_os_str().to_os_string();
    s.push(".meta.jsonl");
    std::path::PathBuf::from(s)
}

/// Write one JSON record per row to `<path>.meta.jsonl`.
pub fn save_meta_sidecar<P: AsRef<Path>>(matrix_path: P, records: &[MetaRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(meta_sidecar_path(matrix_path))?);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read the meta sidecar next to a matrix file, if it exists.
pub fn load_meta_sidecar<P: AsRef<Path>>(matrix_path: P) -> Result<Option<Vec<MetaRecord>>> {
    let path = meta_sidecar_path(matrix_path);
    if !path.exists() {
        return Ok(None);
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MetaRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(Some(out))
}

/// Import a CSV of `id,f1,f2,...` lines into a matrix. Dimensionality comes
/// from the first record; `normalize` rescales each row to unit L2 norm.
pub fn import_csv<R: Read>(reader: R, normalize: bool) -> Result<EmbeddingMatrix> {
    let reader = BufReader::new(reader);
    let mut ids = Vec::new();
    let mut data: Vec<f32> = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let id: u64 = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected unsigned integer id".into(),
            })?;
        let start = data.len();
        for f in fields {
            let x: f32 = f.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad float {f:?}"),
            })?;
            data.push(x);
        }
        let row_dim = data.len() - start;
        match dim {
            None => {
                if row_dim == 0 {
                    return Err(Error::ZeroDim);
                }
                dim = Some(row_dim);
            }
            Some(d) if d != row_dim => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("row has {row_dim} values, expected {d}"),
                });
            }
            _ => {}
        }
        if normalize {
            let row = &mut data[start..];
            let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNorm);
            }
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
        ids.push(id);
    }
    let dim = dim.ok_or(Error::ZeroDim)?;
    EmbeddingMatrix::new(dim, ids, data)
}

/// Write a ground-truth CSV (`query_index,truth_doc_id` with a header row).
pub fn save_truth_csv<P: AsRef<Path>>(path: P, truth: &[u64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "query_index,truth_doc_id")?;
    for (i, id) in truth.iter().enumerate() {
        writeln!(w, "{i},{id}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a ground-truth CSV. The header row is optional; rows must cover
/// query indexes `0..n` exactly once, in order.
pub fn load_truth_csv<P: AsRef<Path>>(path: P) -> Result<Vec<u64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (i == 0 && trimmed.starts_with("query_index")) {
            continue;
        }
        let mut fields = trimmed.split(',');
        let idx: usize = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected query index".into(),
            })?;
        let id: u64 = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected truth doc id".into(),
            })?;
        if idx != out.len() {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("query index {idx} out of order, expected {}", out.len()),
            });
        }
        out.push(id);
    }
    Ok(out)
}
