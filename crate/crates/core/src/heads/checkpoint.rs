//! Debug dumps of head parameters, little-endian like CPEB.
//!
//! `"CPHD"`, u16 version 1, u8 kind (0 prompt, 1 LoRA), then:
//! - prompt: u32 K, u32 ctx, u32 E, f64 logit scale, u8 pooling (0 sum,
//!   1 mean), K*E class tokens, K*ctx*E context values;
//! - LoRA: u32 E, u32 K, u32 r, f64 scale, E*K frozen W, E*r A, r*K B.
//!
//! All tensors are f64, row-major.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};

use super::{ContextPooling, Head, LoraHead, PromptHead};
use crate::error::{CpealError, Result};

const MAGIC: &[u8; 4] = b"CPHD";
const VERSION: u16 = 1;

pub fn write_head<W: Write>(head: &Head, mut out: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let push_u32 = |buf: &mut Vec<u8>, v: usize| buf.extend_from_slice(&(v as u32).to_le_bytes());
    let push_all = |buf: &mut Vec<u8>, vals: &mut dyn Iterator<Item = &f64>| {
        for v in vals {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    };
    match head {
        Head::Prompt(h) => {
            buf.push(0);
            push_u32(&mut buf, h.num_classes());
            push_u32(&mut buf, h.context_len());
            push_u32(&mut buf, h.dim());
            buf.extend_from_slice(&h.logit_scale().to_le_bytes());
            buf.push(match h.pooling() {
                ContextPooling::Sum => 0,
                ContextPooling::Mean => 1,
            });
            push_all(&mut buf, &mut h.class_tokens().iter());
            push_all(&mut buf, &mut h.context().iter());
        }
        Head::Lora(h) => {
            buf.push(1);
            push_u32(&mut buf, h.dim());
            push_u32(&mut buf, h.num_classes());
            push_u32(&mut buf, h.rank());
            buf.extend_from_slice(&h.scale().to_le_bytes());
            let (a, b) = h.factors();
            push_all(&mut buf, &mut h.frozen().iter());
            push_all(&mut buf, &mut a.iter());
            push_all(&mut buf, &mut b.iter());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_head<R: Read>(mut input: R) -> Result<Head> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        if pos + len > bytes.len() {
            return Err(CpealError::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "truncated head checkpoint",
            )));
        }
        let s = &bytes[pos..pos + len];
        pos += len;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(CpealError::Format("bad checkpoint magic".into()));
    }
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(CpealError::Format(format!("unsupported checkpoint version {version}")));
    }
    let kind = take(1)?[0];
    let mut u32s = [0usize; 3];
    for v in u32s.iter_mut() {
        *v = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    }
    let scale = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let pooling = if kind == 0 {
        match take(1)?[0] {
            0 => ContextPooling::Sum,
            1 => ContextPooling::Mean,
            other => return Err(CpealError::Format(format!("unknown pooling {other}"))),
        }
    } else {
        ContextPooling::Sum
    };
    let mut floats = |count: usize| -> Result<Vec<f64>> {
        Ok(take(count * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let shape_err = |e: ndarray::ShapeError| CpealError::Format(e.to_string());
    let head = match kind {
        0 => {
            let [k, ctx, e] = u32s;
            let tokens = Array2::from_shape_vec((k, e), floats(k * e)?).map_err(shape_err)?;
            let context =
                Array3::from_shape_vec((k, ctx, e), floats(k * ctx * e)?).map_err(shape_err)?;
            Head::Prompt(PromptHead::from_parts(tokens, context, scale)?.with_pooling(pooling))
        }
        1 => {
            let [e, k, r] = u32s;
            let w = Array2::from_shape_vec((e, k), floats(e * k)?).map_err(shape_err)?;
            let a = Array2::from_shape_vec((e, r), floats(e * r)?).map_err(shape_err)?;
            let b = Array2::from_shape_vec((r, k), floats(r * k)?).map_err(shape_err)?;
            Head::Lora(LoraHead::from_parts(w, a, b, scale)?)
        }
        other => return Err(CpealError::Format(format!("unknown head kind {other}"))),
    };
    Ok(head)
}

pub fn save_head(head: &Head, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::new();
    write_head(head, &mut bytes)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_head(path: impl AsRef<Path>) -> Result<Head> {
    read_head(io::BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::{init_lora_head, init_prompt_head, random_orthonormal_projection};

    #[test]
    fn round_trips_both_kinds() {
        for head in [
            Head::Prompt(init_prompt_head(3, 5, 1).unwrap()),
            Head::Lora(init_lora_head(random_orthonormal_projection(5, 3, 2), 2, 3).unwrap()),
        ] {
            let mut bytes = Vec::new();
            write_head(&head, &mut bytes).unwrap();
            assert_eq!(read_head(bytes.as_slice()).unwrap(), head);
            assert!(read_head(&bytes[..bytes.len() - 1]).is_err());
        }
    }
}
