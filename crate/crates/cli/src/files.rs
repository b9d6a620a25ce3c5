//! Matrix and vector file loading.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use csem::codec::MAGIC;
use csem::{CompressedMatrix, DenseMatrix};

pub enum Loaded {
    Compressed(CompressedMatrix),
    Dense(DenseMatrix),
}

impl Loaded {
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        match self {
            Loaded::Compressed(c) => Ok(csem::codec::decode(c)?),
            Loaded::Dense(m) => Ok(m.clone()),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Loaded::Compressed(c) => (c.rows, c.cols),
            Loaded::Dense(m) => m.dims(),
        }
    }
}

/// Reads a CSEM container, a JSON compressed export, or a JSON dense matrix.
pub fn load_matrix(path: &Path) -> Result<Loaded> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(&MAGIC) {
        let c = CompressedMatrix::from_bytes(&bytes)
            .with_context(|| format!("decoding container {}", path.display()))?;
        return Ok(Loaded::Compressed(c));
    }
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is neither a CSEM container nor JSON", path.display()))?;
    if value.get("weights").is_some() {
        let c: CompressedMatrix = serde_json::from_value(value)?;
        c.validate()?;
        Ok(Loaded::Compressed(c))
    } else {
        #[derive(serde::Deserialize)]
        struct Raw {
            rows: usize,
            cols: usize,
            entries: Vec<i32>,
        }
        let raw: Raw = serde_json::from_value(value)
            .with_context(|| format!("{} is not a dense matrix dump", path.display()))?;
        Ok(Loaded::Dense(DenseMatrix::new(
            raw.rows,
            raw.cols,
            raw.entries,
        )?))
    }
}

/// A JSON integer array, or integers separated by commas and/or whitespace.
pub fn load_vector(path: &Path) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_vector(&text).with_context(|| format!("parsing vector {}", path.display()))
}

pub fn parse_vector(text: &str) -> Result<Vec<i64>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<i64>()
                .with_context(|| format!("bad integer {t:?}"))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("empty vector");
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_formats() {
        assert_eq!(parse_vector("[1, -2, 3]").unwrap(), vec![1, -2, 3]);
        assert_eq!(parse_vector("1,2\n3 4").unwrap(), vec![1, 2, 3, 4]);
        assert!(parse_vector("1 x").is_err());
        assert!(parse_vector("  ").is_err());
    }
}
