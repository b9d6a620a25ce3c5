//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use csem::DenseMatrix;
use rand::Rng;

/// Pair gain by direct counting over the dense matrix.
pub fn brute_pair_gain(m: &DenseMatrix, i: usize, j: usize) -> usize {
    let mut counts: HashMap<(i32, i32), usize> = HashMap::new();
    for r in 0..m.rows() {
        let (a, b) = (m.get(r, i), m.get(r, j));
        if a != 0 && b != 0 {
            *counts.entry((a, b)).or_default() += 1;
        }
    }
    counts.values().map(|&z| z - 1).sum()
}

/// Every way to split `cols` into disjoint pairs, leaving one column out when
/// the count is odd.
pub fn all_pairings(cols: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if cols.len() < 2 {
        return vec![vec![]];
    }
    if cols.len() % 2 == 1 {
        let mut out = Vec::new();
        for skip in 0..cols.len() {
            let rest: Vec<usize> = cols
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &c)| c)
                .collect();
            out.extend(all_pairings(&rest));
        }
        return out;
    }
    let first = cols[0];
    let mut out = Vec::new();
    for k in 1..cols.len() {
        let rest: Vec<usize> = cols[1..]
            .iter()
            .enumerate()
            .filter(|&(idx, _)| idx + 1 != k)
            .map(|(_, &c)| c)
            .collect();
        for mut tail in all_pairings(&rest) {
            tail.push((first, cols[k]));
            out.push(tail);
        }
    }
    out
}

/// Best single-pairing gain by exhaustive enumeration.
pub fn exhaustive_best_gain(m: &DenseMatrix) -> usize {
    let cols: Vec<usize> = (0..m.cols()).collect();
    all_pairings(&cols)
        .iter()
        .map(|p| p.iter().map(|&(i, j)| brute_pair_gain(m, i, j)).sum())
        .max()
        .unwrap_or(0)
}

/// Random matrix with entries drawn from `alphabet` (zero allowed) at the
/// given density.
pub fn random_matrix<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    density: f64,
    alphabet: &[i32],
) -> DenseMatrix {
    let entries = (0..rows * cols)
        .map(|_| {
            if rng.gen_bool(density) {
                alphabet[rng.gen_range(0..alphabet.len())]
            } else {
                0
            }
        })
        .collect();
    DenseMatrix::new(rows, cols, entries).unwrap()
}

/// Matrix-vector product with no zero skipping and no counting.
pub fn naive_product(m: &DenseMatrix, v: &[i64]) -> Vec<i64> {
    (0..m.rows())
        .map(|r| m.row(r).iter().zip(v).map(|(&t, &x)| t as i64 * x).sum())
        .collect()
}
