//! CPEB: a little-endian container for embedding datasets.
//!
//! ```text
//! magic     4 bytes  "CPEB"
//! version   u16      1
//! n         u32      rows
//! dim       u32      embedding width E
//! classes   u32      K
//! flags     u8       bit0 = labels present
//! name      u32 byte length + UTF-8
//! classes   K x (u32 byte length + UTF-8)
//! features  n*E f32, row-major
//! labels    n i32      (only when bit0 is set)
//! splits    n u8       0 = train, 1 = test
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::dataset::{EmbeddingDataset, Split};
use crate::error::{CpealError, Result};

pub const CPEB_MAGIC: &[u8; 4] = b"CPEB";
pub const CPEB_VERSION: u16 = 1;

const FLAG_LABELS: u8 = 0b0000_0001;

/// Serializes a validated dataset. Invalid datasets are rejected before any
/// byte is written.
pub fn write_dataset<W: Write>(ds: &EmbeddingDataset, mut out: W) -> Result<()> {
    ds.validate()?;
    let mut buf = Vec::with_capacity(64 + ds.len() * (ds.dim() * 4 + 5));
    buf.extend_from_slice(CPEB_MAGIC);
    buf.extend_from_slice(&CPEB_VERSION.to_le_bytes());
    put_u32(&mut buf, ds.len(), "row count")?;
    put_u32(&mut buf, ds.dim(), "dimension")?;
    put_u32(&mut buf, ds.num_classes(), "class count")?;
    buf.push(FLAG_LABELS);
    put_str(&mut buf, &ds.name)?;
    for name in &ds.class_names {
        put_str(&mut buf, name)?;
    }
    for row in ds.features.rows() {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for &y in &ds.labels {
        buf.extend_from_slice(&(y as i32).to_le_bytes());
    }
    buf.extend(ds.splits.iter().map(|s| s.tag()));
    out.write_all(&buf)?;
    Ok(())
}

pub fn save_dataset(ds: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::new();
    write_dataset(ds, &mut bytes)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    let file = fs::File::open(path)?;
    read_dataset(io::BufReader::new(file))
}

pub fn read_dataset<R: Read>(mut input: R) -> Result<EmbeddingDataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    if cur.take(4)? != CPEB_MAGIC {
        return Err(CpealError::Format("bad magic, expected \"CPEB\"".into()));
    }
    let version = u16::from_le_bytes(cur.array()?);
    if version != CPEB_VERSION {
        return Err(CpealError::Format(format!(
            "unsupported version {version}, expected {CPEB_VERSION}"
        )));
    }
    let n = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let k = cur.u32()? as usize;
    let flags = cur.take(1)?[0];
    if flags & !FLAG_LABELS != 0 {
        return Err(CpealError::Format(format!("unknown flag bits {flags:#04x}")));
    }
    if flags & FLAG_LABELS == 0 {
        return Err(CpealError::validation(
            "dataset carries no labels; the simulated oracle needs them",
        ));
    }
    let name = cur.string()?;
    let class_names = (0..k).map(|_| cur.string()).collect::<Result<Vec<_>>>()?;

    let n_feat = n
        .checked_mul(dim)
        .ok_or_else(|| CpealError::Format("n x E overflows".into()))?;
    let feat_bytes = cur.take(n_feat.checked_mul(4).ok_or_else(|| {
        CpealError::Format("feature payload size overflows".into())
    })?)?;
    let values: Vec<f32> = feat_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let features = Array2::from_shape_vec((n, dim), values)
        .map_err(|e| CpealError::Format(e.to_string()))?;

    let mut labels = Vec::with_capacity(n);
    for (i, c) in cur.take(n * 4)?.chunks_exact(4).enumerate() {
        let y = i32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        if y < 0 || y as usize >= k {
            return Err(CpealError::validation(format!(
                "label {y} at row {i} is outside [0, {k})"
            )));
        }
        labels.push(y as u32);
    }
    let splits = cur
        .take(n)?
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            Split::from_tag(t)
                .ok_or_else(|| CpealError::validation(format!("split tag {t} at row {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if cur.pos != bytes.len() {
        return Err(CpealError::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }

    EmbeddingDataset::new(name, class_names, features, labels, splits)
}

fn put_u32(buf: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| CpealError::validation(format!("{what} {v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    put_u32(buf, s.len(), "string length")?;
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CpealError::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                format!(
                    "truncated CPEB payload: need {len} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            ))),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let s = self.take(N)?;
        let mut a = [0u8; N];
        a.copy_from_slice(s);
        Ok(a)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|e| CpealError::Format(e.to_string()))
    }
}
