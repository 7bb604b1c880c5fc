//! Parameter checkpoints: one line of JSON naming every tensor and its shape,
//! a newline, then the values as little-endian `f64` in the same order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::param::{ParamTensor, Parameterized};

pub const FORMAT: &str = "bee-params/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub tensors: Vec<TensorEntry>,
}

pub fn write_params<W: Write>(mut out: W, params: &[&ParamTensor]) -> Result<()> {
    let header = CheckpointHeader {
        format: FORMAT.to_string(),
        tensors: params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.shape(),
            })
            .collect(),
    };
    let line = serde_json::to_string(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    for p in params {
        for v in p.value.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads values into `params`, which must match the stored names and shapes.
pub fn read_params<R: Read>(input: R, params: &mut [&mut ParamTensor]) -> Result<()> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| NnError::Checkpoint(format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(NnError::Checkpoint(format!("unsupported format `{}`", header.format)));
    }
    if header.tensors.len() != params.len() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint holds {} tensors, model has {}",
            header.tensors.len(),
            params.len()
        )));
    }
    for (entry, p) in header.tensors.iter().zip(params.iter()) {
        if entry.name != p.name || entry.shape != p.shape() {
            return Err(NnError::Checkpoint(format!(
                "tensor mismatch: stored `{}` {:?}, model `{}` {:?}",
                entry.name,
                entry.shape,
                p.name,
                p.shape()
            )));
        }
    }
    let mut buf = [0u8; 8];
    let mut offset = line.len();
    for p in params.iter_mut() {
        for v in p.value.iter_mut() {
            reader
                .read_exact(&mut buf)
                .map_err(|e| NnError::Checkpoint(format!("truncated at byte {offset}: {e}")))?;
            *v = f64::from_le_bytes(buf);
            offset += 8;
        }
    }
    Ok(())
}

pub fn save<M: Parameterized + ?Sized>(path: impl AsRef<Path>, model: &M) -> Result<()> {
    write_params(BufWriter::new(File::create(path)?), &model.params())
}

pub fn load<M: Parameterized + ?Sized>(path: impl AsRef<Path>, model: &mut M) -> Result<()> {
    read_params(File::open(path)?, &mut model.params_mut())
}
