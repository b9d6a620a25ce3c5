//! Matrix–vector kernels with exact operation counters.
//!
//! Every accumulation into the zero-initialized output counts as one
//! addition, so a kernel touching `E` nonzeros one at a time performs `E`
//! additions. Arithmetic is checked; overflow is reported as an error.

use serde::{Deserialize, Serialize};

use crate::codec::CompressedMatrix;
use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, DenseMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpStats {
    pub additions: u64,
    pub multiplications: u64,
}

#[inline]
fn mul(w: i32, x: i64) -> Result<i64> {
    (w as i64)
        .checked_mul(x)
        .ok_or(Error::Overflow("multiplication"))
}

#[inline]
fn add(acc: &mut i64, x: i64) -> Result<()> {
    *acc = acc.checked_add(x).ok_or(Error::Overflow("addition"))?;
    Ok(())
}

fn check_len(expected: usize, v: &[i64]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

fn row_slot(y: &mut [i64], r: u32) -> Result<&mut i64> {
    let rows = y.len();
    y.get_mut(r as usize)
        .ok_or_else(|| Error::Format(format!("row {r} out of range ({rows} rows)")))
}

/// Multiply-accumulate over the nonzero entries, row by row.
pub fn mm_dense(m: &DenseMatrix, v: &[i64]) -> Result<(Vec<i64>, OpStats)> {
    check_len(m.cols(), v)?;
    let mut y = vec![0i64; m.rows()];
    let mut ops = OpStats::default();
    for (r, yr) in y.iter_mut().enumerate() {
        for (&t, &x) in m.row(r).iter().zip(v) {
            if t == 0 {
                continue;
            }
            add(yr, mul(t, x)?)?;
            ops.multiplications += 1;
            ops.additions += 1;
        }
    }
    Ok((y, ops))
}

pub fn mm_csr(m: &CsrMatrix, v: &[i64]) -> Result<(Vec<i64>, OpStats)> {
    check_len(m.cols(), v)?;
    let mut y = vec![0i64; m.rows()];
    let mut ops = OpStats::default();
    for (r, yr) in y.iter_mut().enumerate() {
        for k in m.row_range(r) {
            add(yr, mul(m.values()[k], v[m.col_index()[k]])?)?;
        }
        let n = m.row_range(r).len() as u64;
        ops.multiplications += n;
        ops.additions += n;
    }
    Ok((y, ops))
}

/// Executes straight from the six arrays in three phases: one product per
/// weight slot, one addition per CSE record plus one per occurrence, and one
/// addition per single. Totals are `len(weights)` multiplications and
/// `E − gain` additions.
pub fn mm_compressed(c: &CompressedMatrix, v: &[i64]) -> Result<(Vec<i64>, OpStats)> {
    check_len(c.cols, v)?;
    if c.wp.len() != c.cols || c.sp.len() != c.rows {
        return Err(Error::Format(
            "pointer arrays do not match dimensions".into(),
        ));
    }
    let mut ops = OpStats::default();

    let mut products = Vec::with_capacity(c.weights.len());
    let mut start = 0usize;
    for (col, &end) in c.wp.iter().enumerate() {
        let end = end as usize;
        if end < start || end > c.weights.len() {
            return Err(Error::Format(format!("wp[{col}] = {end} is out of order")));
        }
        for &w in &c.weights[start..end] {
            products.push(mul(w, v[col])?);
        }
        start = end;
    }
    ops.multiplications = products.len() as u64;
    let product = |idx: u32| -> Result<i64> {
        products
            .get(idx as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("weight index {idx} out of range")))
    };

    let mut y = vec![0i64; c.rows];

    let mut start = 0usize;
    for &end in &c.cp {
        let end = end as usize;
        let rec = c
            .cse
            .get(start..end)
            .ok_or_else(|| Error::Format("cp points outside the cse array".into()))?;
        if rec.len() < 4 {
            return Err(Error::Format(format!(
                "CSE record of length {} (minimum is 4)",
                rec.len()
            )));
        }
        let mut s = product(rec[0])?;
        add(&mut s, product(rec[1])?)?;
        ops.additions += 1;
        for &r in &rec[2..] {
            add(row_slot(&mut y, r)?, s)?;
        }
        ops.additions += (rec.len() - 2) as u64;
        start = end;
    }

    let mut start = 0usize;
    for (r, &end) in c.sp.iter().enumerate() {
        let end = end as usize;
        let entries = c
            .singles
            .get(start..end)
            .ok_or_else(|| Error::Format("sp points outside the singles array".into()))?;
        for &idx in entries {
            add(&mut y[r], product(idx)?)?;
        }
        ops.additions += entries.len() as u64;
        start = end;
    }

    Ok((y, ops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode;
    use crate::cse::{eliminate_commons, CseSet, CseTerm};
    use crate::matrix::{generate_dense, to_csr, GenSpec};

    fn worked() -> DenseMatrix {
        DenseMatrix::from_rows(&[[2, 0, 1, 0], [2, 0, 1, 0], [0, 3, 0, 5], [2, 0, 0, 5]]).unwrap()
    }

    fn worked_compressed() -> CompressedMatrix {
        let set = CseSet::from_terms([CseTerm {
            col_i: 0,
            col_j: 2,
            w_i: 2,
            w_j: 1,
            occ_rows: vec![0, 1],
        }]);
        let rem = eliminate_commons(&worked(), &set).unwrap();
        encode(&rem, &set, (4, 4)).unwrap()
    }

    #[test]
    fn dense_examples() {
        let (y, ops) = mm_dense(&worked(), &[1, 1, 1, 1]).unwrap();
        assert_eq!(y, vec![3, 3, 8, 7]);
        assert_eq!(
            ops,
            OpStats {
                additions: 8,
                multiplications: 8
            }
        );

        let (y, ops) = mm_dense(&DenseMatrix::zeros(3, 2).unwrap(), &[4, 5]).unwrap();
        assert_eq!(y, vec![0, 0, 0]);
        assert_eq!(ops, OpStats::default());

        let m = generate_dense(&GenSpec::new(100, 100, 0.25, 2, 5)).unwrap();
        let (_, ops) = mm_dense(&m, &[1; 100]).unwrap();
        assert_eq!(ops.additions, 2500);
    }

    #[test]
    fn csr_examples() {
        let (y, ops) = mm_csr(&to_csr(&worked()), &[1, 1, 1, 1]).unwrap();
        assert_eq!(y, vec![3, 3, 8, 7]);
        assert_eq!(ops.additions, 8);

        let m = generate_dense(&GenSpec::new(100, 100, 0.5, 2, 5)).unwrap();
        let (_, ops) = mm_csr(&to_csr(&m), &[1; 100]).unwrap();
        assert_eq!(
            ops,
            OpStats {
                additions: 5000,
                multiplications: 5000
            }
        );

        let empty = to_csr(&DenseMatrix::zeros(2, 3).unwrap());
        let (y, ops) = mm_csr(&empty, &[1, 2, 3]).unwrap();
        assert_eq!((y, ops), (vec![0, 0], OpStats::default()));
    }

    #[test]
    fn compressed_worked_example() {
        let (y, ops) = mm_compressed(&worked_compressed(), &[1, 1, 1, 1]).unwrap();
        assert_eq!(y, vec![3, 3, 8, 7]);
        assert_eq!(
            ops,
            OpStats {
                additions: 7,
                multiplications: 4
            }
        );
    }

    #[test]
    fn compressed_without_cses() {
        let m = generate_dense(&GenSpec::new(30, 20, 0.4, 3, 8)).unwrap();
        let c = encode(&m, &CseSet::new(), m.dims()).unwrap();
        let v: Vec<i64> = (0..20).map(|i| i - 7).collect();
        let (y, ops) = mm_compressed(&c, &v).unwrap();
        assert_eq!(y, mm_dense(&m, &v).unwrap().0);
        assert_eq!(ops.additions, m.nnz() as u64);
        assert!(ops.multiplications <= m.nnz() as u64);
        assert_eq!(ops.multiplications, c.weights.len() as u64);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            mm_dense(&worked(), &[1, 1, 1]),
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 3
            })
        ));
        assert!(mm_csr(&to_csr(&worked()), &[1; 5]).is_err());
        assert!(mm_compressed(&worked_compressed(), &[1; 2]).is_err());
    }

    #[test]
    fn malformed_record() {
        let mut c = worked_compressed();
        c.cse.truncate(3);
        c.cp = vec![3];
        assert!(matches!(mm_compressed(&c, &[1; 4]), Err(Error::Format(_))));
    }

    #[test]
    fn overflow_is_an_error() {
        let m = DenseMatrix::from_rows(&[[i32::MAX, i32::MAX]]).unwrap();
        assert_eq!(
            mm_dense(&m, &[i64::MAX / 2, 1]).unwrap_err(),
            Error::Overflow("multiplication")
        );
        assert_eq!(
            mm_dense(
                &m,
                &[i64::MAX / (i32::MAX as i64), i64::MAX / (i32::MAX as i64)]
            )
            .unwrap_err(),
            Error::Overflow("addition")
        );
    }
}
