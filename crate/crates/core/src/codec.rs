//! Six-array compressed format and its binary container.
//!
//! The format keeps three value/pointer array pairs:
//!
//! | pair | values | pointers |
//! |------|--------|----------|
//! | Weights | distinct nonzero weights of each column, ascending, column by column | `wp[j]`: end of column `j`'s group |
//! | CSE | per term `[widx_i, widx_j, r₁, …, r_z]` | `cp[k]`: end of record `k` |
//! | Singles | weight index of every remainder entry, row-major | `sp[r]`: singles in rows `0..=r` |
//!
//! Every pointer array stores end offsets, so its last element is the length
//! of its value array and there is no leading zero. Columns of weight indices
//! are recovered from `wp` by binary search.
//!
//! Container layout (all little-endian): `b"CSEM"`, `u16` version, `u32` M,
//! `u32` N, then `weights, wp, cse, cp, singles, sp`, each as a `u32`
//! element count followed by 32-bit elements (weights signed).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cse::{CseSet, CseTerm};
use crate::error::{Error, Result};
use crate::matrix::{row_span, DenseMatrix};

pub const MAGIC: [u8; 4] = *b"CSEM";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<i32>,
    pub wp: Vec<u32>,
    pub cse: Vec<u32>,
    pub cp: Vec<u32>,
    pub singles: Vec<u32>,
    pub sp: Vec<u32>,
}

/// Storage cost of a compressed matrix, in array elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageReport {
    pub s_weights: usize,
    pub s_cse: usize,
    pub s_singles: usize,
    pub s_total: usize,
    pub s_csr: usize,
    pub gain: usize,
    pub n_cse: usize,
}

fn to_u32(v: usize, what: &'static str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Overflow(what))
}

impl CompressedMatrix {
    pub fn n_cse(&self) -> usize {
        self.cp.len()
    }

    /// Half-open range of record `k` in `cse`.
    pub fn record_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = if k == 0 { 0 } else { self.cp[k - 1] as usize };
        start..self.cp[k] as usize
    }

    pub fn record(&self, k: usize) -> &[u32] {
        &self.cse[self.record_range(k)]
    }

    /// Column owning weight slot `widx`.
    pub fn column_of(&self, widx: usize) -> Result<usize> {
        if widx >= self.weights.len() {
            return Err(Error::Format(format!(
                "weight index {widx} out of range ({} weights)",
                self.weights.len()
            )));
        }
        Ok(self.wp.partition_point(|&end| end as usize <= widx))
    }

    /// `Σ (z − 1)` over the stored records.
    pub fn gain(&self) -> usize {
        (0..self.n_cse())
            .map(|k| self.record_range(k).len().saturating_sub(3))
            .sum()
    }

    /// Nonzero count of the represented matrix.
    pub fn nnz(&self) -> usize {
        let occurrences: usize = (0..self.n_cse())
            .map(|k| self.record_range(k).len().saturating_sub(2))
            .sum();
        2 * occurrences + self.singles.len()
    }

    /// Checks every structural invariant of the format.
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Format(format!(
                "dimensions must be positive, got {}x{}",
                self.rows, self.cols
            )));
        }
        check_pointers("wp", &self.wp, self.cols, self.weights.len())?;
        check_pointers("sp", &self.sp, self.rows, self.singles.len())?;
        check_pointers("cp", &self.cp, self.cp.len(), self.cse.len())?;

        let mut start = 0;
        for (j, &end) in self.wp.iter().enumerate() {
            let mut group = self.weights[start..end as usize].to_vec();
            if group.contains(&0) {
                return Err(Error::Format(format!("column {j} stores a zero weight")));
            }
            group.sort_unstable();
            if group.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Format(format!("column {j} repeats a weight")));
            }
            start = end as usize;
        }

        for k in 0..self.n_cse() {
            let rec = self.record(k);
            if rec.len() < 4 {
                return Err(Error::Format(format!(
                    "CSE record {k} has length {}, expected at least 4",
                    rec.len()
                )));
            }
            let ci = self.column_of(rec[0] as usize)?;
            let cj = self.column_of(rec[1] as usize)?;
            if ci == cj {
                return Err(Error::Format(format!(
                    "CSE record {k} uses two weights of column {ci}"
                )));
            }
            if let Some(&r) = rec[2..].iter().find(|&&r| r as usize >= self.rows) {
                return Err(Error::Format(format!("CSE record {k} names row {r}")));
            }
        }
        if let Some(&w) = self
            .singles
            .iter()
            .find(|&&w| w as usize >= self.weights.len())
        {
            return Err(Error::Format(format!("single references weight {w}")));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(
            14 + 4 * (6 + self.weights.len() + self.wp.len() + self.cse.len())
                + 4 * (self.cp.len() + self.singles.len() + self.sp.len()),
        );
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&to_u32(self.rows, "row count")?.to_le_bytes());
        out.extend_from_slice(&to_u32(self.cols, "column count")?.to_le_bytes());
        out.extend_from_slice(&to_u32(self.weights.len(), "array length")?.to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for arr in [&self.wp, &self.cse, &self.cp, &self.singles, &self.sp] {
            out.extend_from_slice(&to_u32(arr.len(), "array length")?.to_le_bytes());
            for v in arr.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses and validates a container; trailing bytes are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let weights = cur.array()?.into_iter().map(|v| v as i32).collect();
        let wp = cur.array()?;
        let cse = cur.array()?;
        let cp = cur.array()?;
        let singles = cur.array()?;
        let sp = cur.array()?;
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after container",
                bytes.len() - cur.pos
            )));
        }
        let c = Self {
            rows,
            cols,
            weights,
            wp,
            cse,
            cp,
            singles,
            sp,
        };
        c.validate()?;
        Ok(c)
    }
}

fn check_pointers(name: &str, ptr: &[u32], expected_len: usize, target_len: usize) -> Result<()> {
    if ptr.len() != expected_len {
        return Err(Error::Format(format!(
            "{name} has {} entries, expected {expected_len}",
            ptr.len()
        )));
    }
    if ptr.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Format(format!("{name} is not non-decreasing")));
    }
    let last = ptr.last().map_or(0, |&v| v as usize);
    if last != target_len {
        return Err(Error::Format(format!(
            "{name} ends at {last} but its array holds {target_len} elements"
        )));
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: n - remaining,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn array(&mut self) -> Result<Vec<u32>> {
        let count = self.u32()? as usize;
        let raw = self.take(count.saturating_mul(4))?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn serialize<W: Write>(c: &CompressedMatrix, sink: &mut W) -> std::io::Result<()> {
    let bytes = c
        .to_bytes()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    sink.write_all(&bytes)
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Decode(#[from] Error),
}

pub fn deserialize<R: Read>(source: &mut R) -> std::result::Result<CompressedMatrix, ReadError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    Ok(CompressedMatrix::from_bytes(&bytes)?)
}

/// Builds the six arrays from an extraction result. `commons` and
/// `remainder` must cover disjoint cells.
pub fn encode(
    remainder: &DenseMatrix,
    commons: &CseSet,
    original_dims: (usize, usize),
) -> Result<CompressedMatrix> {
    let (rows, cols) = original_dims;
    if remainder.dims() != original_dims {
        return Err(Error::Consistency(format!(
            "remainder is {}x{}, original is {rows}x{cols}",
            remainder.rows(),
            remainder.cols()
        )));
    }
    commons
        .validate()
        .map_err(|e| Error::Consistency(e.to_string()))?;

    let mut groups: Vec<Vec<i32>> = vec![Vec::new(); cols];
    for r in 0..rows {
        for (c, &v) in remainder.row(r).iter().enumerate() {
            if v != 0 {
                groups[c].push(v);
            }
        }
    }
    for t in commons.terms() {
        if t.col_j >= cols {
            return Err(Error::Consistency(format!(
                "term column {} out of range",
                t.col_j
            )));
        }
        for &r in &t.occ_rows {
            if r >= rows {
                return Err(Error::Consistency(format!("term row {r} out of range")));
            }
            for c in [t.col_i, t.col_j] {
                if remainder.get(r, c) != 0 {
                    return Err(Error::Consistency(format!(
                        "cell ({r}, {c}) is both a CSE occurrence and a single"
                    )));
                }
            }
        }
        groups[t.col_i].push(t.w_i);
        groups[t.col_j].push(t.w_j);
    }

    let mut weights = Vec::new();
    let mut wp = Vec::with_capacity(cols);
    for g in &mut groups {
        g.sort_unstable();
        g.dedup();
        weights.extend_from_slice(g);
        wp.push(to_u32(weights.len(), "weights length")?);
    }

    let index_of = |col: usize, value: i32| -> Result<u32> {
        let start = if col == 0 { 0 } else { wp[col - 1] as usize };
        let group = &weights[start..wp[col] as usize];
        group
            .binary_search(&value)
            .map(|k| (start + k) as u32)
            .map_err(|_| Error::Consistency(format!("weight {value} missing from column {col}")))
    };

    let mut cse = Vec::new();
    let mut cp = Vec::with_capacity(commons.len());
    for t in commons.terms() {
        cse.push(index_of(t.col_i, t.w_i)?);
        cse.push(index_of(t.col_j, t.w_j)?);
        for &r in &t.occ_rows {
            cse.push(r as u32);
        }
        cp.push(to_u32(cse.len(), "cse length")?);
    }

    let mut singles = Vec::new();
    let mut sp = Vec::with_capacity(rows);
    for r in 0..rows {
        for (c, &v) in remainder.row(r).iter().enumerate() {
            if v != 0 {
                singles.push(index_of(c, v)?);
            }
        }
        sp.push(to_u32(singles.len(), "singles length")?);
    }

    Ok(CompressedMatrix {
        rows,
        cols,
        weights,
        wp,
        cse,
        cp,
        singles,
        sp,
    })
}

/// Rebuilds the dense matrix; fails on overlapping writes or malformed arrays.
pub fn decode(c: &CompressedMatrix) -> Result<DenseMatrix> {
    c.validate()?;
    let mut m = DenseMatrix::zeros(c.rows, c.cols)?;
    let write = |m: &mut DenseMatrix, r: usize, widx: usize| -> Result<()> {
        let col = c.column_of(widx)?;
        if m.get(r, col) != 0 {
            return Err(Error::OverlappingCoverage { row: r, col });
        }
        m.set(r, col, c.weights[widx]);
        Ok(())
    };
    for k in 0..c.n_cse() {
        let rec = c.record(k);
        for &r in &rec[2..] {
            write(&mut m, r as usize, rec[0] as usize)?;
            write(&mut m, r as usize, rec[1] as usize)?;
        }
    }
    let sp: Vec<usize> = c.sp.iter().map(|&v| v as usize).collect();
    for r in 0..c.rows {
        for idx in row_span(&sp, r) {
            write(&mut m, r, c.singles[idx] as usize)?;
        }
    }
    Ok(m)
}

/// Recovers the CSE set stored in a compressed matrix.
pub fn decode_commons(c: &CompressedMatrix) -> Result<CseSet> {
    c.validate()?;
    let mut terms = Vec::with_capacity(c.n_cse());
    for k in 0..c.n_cse() {
        let rec = c.record(k);
        let (a, b) = (rec[0] as usize, rec[1] as usize);
        let (ca, cb) = (c.column_of(a)?, c.column_of(b)?);
        let ((col_i, w_i), (col_j, w_j)) = if ca < cb {
            ((ca, c.weights[a]), (cb, c.weights[b]))
        } else {
            ((cb, c.weights[b]), (ca, c.weights[a]))
        };
        terms.push(CseTerm {
            col_i,
            col_j,
            w_i,
            w_j,
            occ_rows: rec[2..].iter().map(|&r| r as usize).collect(),
        });
    }
    Ok(CseSet::from_terms(terms))
}

/// Measured array sizes next to the CSR cost `2E + M` of the original.
pub fn storage_report(c: &CompressedMatrix, e_original: usize) -> StorageReport {
    let s_weights = c.weights.len() + c.wp.len();
    let s_cse = c.cse.len() + c.cp.len();
    let s_singles = c.singles.len() + c.sp.len();
    StorageReport {
        s_weights,
        s_cse,
        s_singles,
        s_total: s_weights + s_cse + s_singles,
        s_csr: 2 * e_original + c.rows,
        gain: c.gain(),
        n_cse: c.n_cse(),
    }
}

/// True when the compressed form is predicted to beat CSR:
/// `α > (U + 1)/M + (2·|CSE| − gain)/(M·N)`, evaluated after scaling both
/// sides by `M·N` so integer-valued thresholds compare exactly.
pub fn crossover_predicate(
    alpha: f64,
    unique: usize,
    rows: usize,
    cols: usize,
    n_cse: usize,
    gain: usize,
) -> bool {
    let cells = (rows * cols) as f64;
    let threshold = ((unique + 1) * cols) as f64 + 2.0 * n_cse as f64 - gain as f64;
    alpha * cells > threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> DenseMatrix {
        DenseMatrix::from_rows(&[[2, 0, 1, 0], [2, 0, 1, 0], [0, 3, 0, 5], [2, 0, 0, 5]]).unwrap()
    }

    fn worked_commons() -> CseSet {
        CseSet::from_terms([CseTerm {
            col_i: 0,
            col_j: 2,
            w_i: 2,
            w_j: 1,
            occ_rows: vec![0, 1],
        }])
    }

    fn worked_compressed() -> CompressedMatrix {
        let rem = crate::cse::eliminate_commons(&worked(), &worked_commons()).unwrap();
        encode(&rem, &worked_commons(), (4, 4)).unwrap()
    }

    #[test]
    fn encode_worked_example() {
        let c = worked_compressed();
        assert_eq!(c.weights, vec![2, 3, 1, 5]);
        assert_eq!(c.wp, vec![1, 2, 3, 4]);
        assert_eq!(c.cse, vec![0, 2, 0, 1]);
        assert_eq!(c.cp, vec![4]);
        assert_eq!(c.singles, vec![1, 3, 0, 3]);
        assert_eq!(c.sp, vec![0, 0, 2, 4]);
        assert_eq!(decode(&c).unwrap(), worked());
        assert_eq!(decode_commons(&c).unwrap(), worked_commons());
    }

    #[test]
    fn first_record_spans_four_slots() {
        // two weights, rows 0 and 3, next record starts at 4
        let m = DenseMatrix::from_rows(&[[1, 0, 0, 3], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 3]])
            .unwrap();
        let (_, terms) = crate::cse::pair_gain(&m, 0, 3);
        let set = CseSet::from_terms(terms);
        let rem = crate::cse::eliminate_commons(&m, &set).unwrap();
        let c = encode(&rem, &set, (4, 4)).unwrap();
        assert_eq!(c.cp[0], 4);
        assert_eq!((c.cse[2], c.cse[3]), (0, 3));
    }

    #[test]
    fn empty_encoding() {
        let z = DenseMatrix::zeros(3, 5).unwrap();
        let c = encode(&z, &CseSet::new(), (3, 5)).unwrap();
        assert!(
            c.weights.is_empty() && c.cse.is_empty() && c.cp.is_empty() && c.singles.is_empty()
        );
        assert_eq!(c.wp, vec![0; 5]);
        assert_eq!(c.sp, vec![0; 3]);
        assert_eq!(decode(&c).unwrap(), z);
        assert_eq!(storage_report(&c, 0).s_total, 5 + 3);
    }

    #[test]
    fn storage_worked_example() {
        let r = storage_report(&worked_compressed(), 8);
        assert_eq!(r.s_total, 21);
        assert_eq!(r.s_csr, 20);
        assert_eq!((r.gain, r.n_cse), (1, 1));
        assert_eq!(r.s_cse, r.gain + 4 * r.n_cse);
        assert_eq!(r.s_singles, 8 - 2 * (r.gain + r.n_cse) + 4);
    }

    #[test]
    fn crossover_examples() {
        assert!(!crossover_predicate(0.1, 99, 1000, 1000, 0, 0));
        assert!(crossover_predicate(0.5, 2, 1000, 1000, 0, 0));
        assert!(crossover_predicate(0.101, 99, 1000, 1000, 0, 0));
    }

    #[test]
    fn encode_rejects_overlap() {
        let commons = worked_commons();
        let err = encode(&worked(), &commons, (4, 4)).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
        let err = encode(&worked(), &CseSet::new(), (4, 5)).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
    }

    #[test]
    fn decode_rejects_overlapping_writes() {
        let mut c = worked_compressed();
        // single in row 1 re-targets column 0, already written by the record
        c.singles = vec![0, 1, 3, 0, 3];
        c.sp = vec![0, 1, 3, 5];
        assert_eq!(
            decode(&c).unwrap_err(),
            Error::OverlappingCoverage { row: 1, col: 0 }
        );
    }

    #[test]
    fn decode_rejects_bad_records() {
        let mut c = worked_compressed();
        c.cse = vec![0, 2, 0];
        c.cp = vec![3];
        assert!(matches!(decode(&c), Err(Error::Format(_))));

        let mut c = worked_compressed();
        c.cse[1] = 9;
        assert!(matches!(decode(&c), Err(Error::Format(_))));

        let mut c = worked_compressed();
        c.wp = vec![2, 2, 3, 4];
        c.weights = vec![2, 3, 1, 5];
        // record now pairs two weights of column 0
        c.cse = vec![0, 1, 0, 1];
        assert!(matches!(decode(&c), Err(Error::Format(_))));
    }

    #[test]
    fn bytes_roundtrip() {
        let c = worked_compressed();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"CSEM");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(CompressedMatrix::from_bytes(&bytes).unwrap(), c);

        let mut sink = Vec::new();
        serialize(&c, &mut sink).unwrap();
        assert_eq!(sink, bytes);
        assert_eq!(deserialize(&mut sink.as_slice()).unwrap(), c);

        let empty = encode(&DenseMatrix::zeros(2, 2).unwrap(), &CseSet::new(), (2, 2)).unwrap();
        let b = empty.to_bytes().unwrap();
        assert_eq!(CompressedMatrix::from_bytes(&b).unwrap(), empty);
    }

    #[test]
    fn container_layout_is_fixed() {
        let c = worked_compressed();
        let b = c.to_bytes().unwrap();
        let mut expected = b"CSEM".to_vec();
        expected.extend([1, 0]);
        for v in [4u32, 4] {
            expected.extend(v.to_le_bytes());
        }
        let arrays: [&[u32]; 6] = [
            &[2, 3, 1, 5],
            &[1, 2, 3, 4],
            &[0, 2, 0, 1],
            &[4],
            &[1, 3, 0, 3],
            &[0, 0, 2, 4],
        ];
        for a in arrays {
            expected.extend((a.len() as u32).to_le_bytes());
            for v in a {
                expected.extend(v.to_le_bytes());
            }
        }
        assert_eq!(b, expected);
    }

    #[test]
    fn corrupted_containers() {
        let b = worked_compressed().to_bytes().unwrap();

        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(
            CompressedMatrix::from_bytes(&bad),
            Err(Error::BadMagic(_))
        ));

        let mut bad = b.clone();
        bad[4] = 2;
        assert_eq!(
            CompressedMatrix::from_bytes(&bad),
            Err(Error::UnsupportedVersion(2))
        );

        // weights length field claims far more elements than remain
        let mut bad = b.clone();
        bad[14..18].copy_from_slice(&1_000_000u32.to_le_bytes());
        assert!(matches!(
            CompressedMatrix::from_bytes(&bad),
            Err(Error::Truncated { .. })
        ));

        assert!(matches!(
            CompressedMatrix::from_bytes(&b[..b.len() - 1]),
            Err(Error::Truncated { .. })
        ));

        let mut bad = b.clone();
        bad.push(0);
        assert!(matches!(
            CompressedMatrix::from_bytes(&bad),
            Err(Error::Format(_))
        ));

        // structurally invalid: sp no longer ends at the singles length
        let mut bad = b;
        let n = bad.len();
        bad[n - 4..].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(
            CompressedMatrix::from_bytes(&bad),
            Err(Error::Format(_))
        ));
    }
}
