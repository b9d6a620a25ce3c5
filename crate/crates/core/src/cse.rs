//! Randomized search for two-term common subexpressions over column pairs.
//!
//! An iteration pairs the columns at random, scores every pair, then runs a
//! number of swap attempts that exchange one column between two pairs and
//! keep the exchange when the total gain does not drop. The repeated value
//! pairs of the final pairing are removed from the matrix before the next
//! iteration starts.
//!
//! The gain of a column pair `(i, j)` is `Σ (z − 1)` over the distinct value
//! pairs `(t[r][i], t[r][j])` (both nonzero) occurring `z` times. Groups with
//! `z = 1` contribute nothing, so the gain equals the number of rows where
//! both columns are nonzero minus the number of distinct value pairs.
//!
//! Random draws come from one ChaCha8 stream seeded by [`ExtractConfig::seed`],
//! in this order: per iteration one shuffle of the column indices, then per
//! attempt two slot indices and one exchange bit.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Disjoint column pairs plus at most one leftover column (odd `N`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub pairs: Vec<(usize, usize)>,
    pub unpaired: Option<usize>,
}

impl Pairing {
    /// Pairs consecutive entries of `order`; an odd tail is left unpaired.
    pub fn from_order(order: &[usize]) -> Self {
        let pairs = order.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        let unpaired = if order.len() % 2 == 1 {
            order.last().copied()
        } else {
            None
        };
        Self { pairs, unpaired }
    }

    /// Number of exchange slots: every pair, plus the leftover column when
    /// present (so it can be swapped into a pair).
    pub fn slots(&self) -> usize {
        self.pairs.len() + usize::from(self.unpaired.is_some())
    }

    pub fn validate(&self, n_cols: usize) -> Result<()> {
        let mut seen = vec![false; n_cols];
        let cols = self
            .pairs
            .iter()
            .flat_map(|&(i, j)| [i, j])
            .chain(self.unpaired);
        for c in cols {
            if c >= n_cols || seen[c] {
                return Err(Error::DegenerateInput(format!(
                    "column {c} is out of range or repeated in the pairing"
                )));
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::DegenerateInput(
                "pairing does not cover every column".into(),
            ));
        }
        Ok(())
    }

    /// Exchanges one column between slots `a` and `b` (distinct).
    ///
    /// With `lo < hi` and pair `lo = (x, y)`: if `hi = (u, w)` is a pair, `y`
    /// trades places with `u` (`flip = false`) or `w` (`flip = true`). If
    /// `hi` is the leftover slot `u`, then `u` replaces `y` (`flip = false`)
    /// or `x` (`flip = true`), and the replaced column becomes the leftover.
    pub fn exchanged(&self, a: usize, b: usize, flip: bool) -> Self {
        debug_assert_ne!(a, b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut next = self.clone();
        let (x, y) = next.pairs[lo];
        if hi < next.pairs.len() {
            let (u, w) = next.pairs[hi];
            if flip {
                next.pairs[lo] = (x, w);
                next.pairs[hi] = (u, y);
            } else {
                next.pairs[lo] = (x, u);
                next.pairs[hi] = (y, w);
            }
        } else {
            let u = next
                .unpaired
                .expect("leftover slot without a leftover column");
            if flip {
                next.pairs[lo] = (u, y);
                next.unpaired = Some(x);
            } else {
                next.pairs[lo] = (x, u);
                next.unpaired = Some(y);
            }
        }
        next
    }

    /// Columns held by slot `s` (the second is `None` for the leftover slot).
    fn slot_columns(&self, s: usize) -> (usize, Option<usize>) {
        match self.pairs.get(s) {
            Some(&(i, j)) => (i, Some(j)),
            None => (self.unpaired.expect("slot out of range"), None),
        }
    }
}

/// One repeated two-term sum `w_i·v[col_i] + w_j·v[col_j]` and the rows
/// where it occurs. `col_i < col_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CseTerm {
    pub col_i: usize,
    pub col_j: usize,
    pub w_i: i32,
    pub w_j: i32,
    pub occ_rows: Vec<usize>,
}

impl CseTerm {
    /// Occurrence count `z`.
    pub fn occurrences(&self) -> usize {
        self.occ_rows.len()
    }

    /// Additions saved by reusing the sum: `z − 1`.
    pub fn gain(&self) -> usize {
        self.occ_rows.len().saturating_sub(1)
    }

    fn key(&self) -> (usize, usize, i32, i32) {
        (self.col_i, self.col_j, self.w_i, self.w_j)
    }

    pub fn validate(&self) -> Result<()> {
        if self.col_i >= self.col_j {
            return Err(Error::CorruptedSet(format!(
                "term columns ({}, {}) are not strictly ordered",
                self.col_i, self.col_j
            )));
        }
        if self.w_i == 0 || self.w_j == 0 {
            return Err(Error::CorruptedSet("term has a zero weight".into()));
        }
        if self.occ_rows.len() < 2 {
            return Err(Error::CorruptedSet(
                "term occurs fewer than two times".into(),
            ));
        }
        if self.occ_rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::CorruptedSet(
                "occurrence rows are not strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Extracted terms in canonical order `(col_i, col_j, w_i, w_j)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CseSet {
    terms: Vec<CseTerm>,
    total_gain: usize,
}

impl CseSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Canonicalizes `terms`. Terms sharing columns and weights (found in
    /// different iterations) are the same sum and are merged into one.
    pub fn from_terms<I: IntoIterator<Item = CseTerm>>(terms: I) -> Self {
        let mut merged: BTreeMap<(usize, usize, i32, i32), Vec<usize>> = BTreeMap::new();
        for t in terms {
            merged.entry(t.key()).or_default().extend(t.occ_rows);
        }
        let terms: Vec<CseTerm> = merged
            .into_iter()
            .map(|((col_i, col_j, w_i, w_j), mut occ_rows)| {
                occ_rows.sort_unstable();
                CseTerm {
                    col_i,
                    col_j,
                    w_i,
                    w_j,
                    occ_rows,
                }
            })
            .collect();
        let total_gain = terms.iter().map(CseTerm::gain).sum();
        Self { terms, total_gain }
    }

    pub fn terms(&self) -> &[CseTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_gain(&self) -> usize {
        self.total_gain
    }

    /// Sum of occurrence counts, `gain + |CSE|`.
    pub fn total_occurrences(&self) -> usize {
        self.terms.iter().map(CseTerm::occurrences).sum()
    }

    /// Checks every term and that no matrix cell is claimed twice.
    pub fn validate(&self) -> Result<()> {
        let mut cells = std::collections::HashSet::new();
        for t in &self.terms {
            t.validate()?;
            for &r in &t.occ_rows {
                for c in [t.col_i, t.col_j] {
                    if !cells.insert((r, c)) {
                        return Err(Error::CorruptedSet(format!(
                            "cell ({r}, {c}) claimed by two terms"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub iterations: usize,
    pub attempts: usize,
    pub seed: u64,
    /// Stop after the first iteration whose pairing yields zero gain.
    pub early_stop: bool,
}

impl ExtractConfig {
    pub fn new(iterations: usize, attempts: usize, seed: u64) -> Self {
        Self {
            iterations,
            attempts,
            seed,
            early_stop: false,
        }
    }

    pub fn with_early_stop(mut self, early_stop: bool) -> Self {
        self.early_stop = early_stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::DegenerateInput(
                "iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self::new(100, 500, 0)
    }
}

/// Gain history of one iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub initial_gain: usize,
    /// Current gain after each attempt.
    pub attempt_gains: Vec<usize>,
    pub accepted: usize,
    /// Gain eliminated at the end of the iteration.
    pub final_gain: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractTrace {
    pub iterations: Vec<IterationTrace>,
}

pub fn pair_columns_random<R: Rng + ?Sized>(n_cols: usize, rng: &mut R) -> Result<Pairing> {
    if n_cols < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least two columns to pair, got {n_cols}"
        )));
    }
    let mut order: Vec<usize> = (0..n_cols).collect();
    order.shuffle(rng);
    Ok(Pairing::from_order(&order))
}

#[inline]
fn pack(a: i32, b: i32) -> u64 {
    ((a as u32 as u64) << 32) | (b as u32 as u64)
}

/// Gain of two columns given as slices, using `scratch` for grouping.
fn columns_gain(a: &[i32], b: &[i32], scratch: &mut Vec<u64>) -> usize {
    scratch.clear();
    scratch.extend(
        a.iter()
            .zip(b)
            .filter(|(&x, &y)| x != 0 && y != 0)
            .map(|(&x, &y)| pack(x, y)),
    );
    if scratch.len() < 2 {
        return 0;
    }
    scratch.sort_unstable();
    let distinct = 1 + scratch.windows(2).filter(|w| w[0] != w[1]).count();
    scratch.len() - distinct
}

/// Repeated value pairs of columns `i` and `j`, oriented so `col_i < col_j`.
fn columns_terms(i: usize, j: usize, a: &[i32], b: &[i32]) -> Vec<CseTerm> {
    let (i, j, a, b) = if i < j { (i, j, a, b) } else { (j, i, b, a) };
    let mut hits: Vec<(i32, i32, usize)> = a
        .iter()
        .zip(b)
        .enumerate()
        .filter(|(_, (&x, &y))| x != 0 && y != 0)
        .map(|(r, (&x, &y))| (x, y, r))
        .collect();
    hits.sort_unstable();
    hits.chunk_by(|p, q| p.0 == q.0 && p.1 == q.1)
        .filter(|g| g.len() >= 2)
        .map(|g| CseTerm {
            col_i: i,
            col_j: j,
            w_i: g[0].0,
            w_j: g[0].1,
            occ_rows: g.iter().map(|h| h.2).collect(),
        })
        .collect()
}

/// Gain and terms of one column pair.
pub fn pair_gain(m: &DenseMatrix, i: usize, j: usize) -> (usize, Vec<CseTerm>) {
    assert!(
        i != j && i < m.cols() && j < m.cols(),
        "invalid column pair ({i}, {j})"
    );
    let terms = columns_terms(i, j, &m.column(i), &m.column(j));
    let gain = terms.iter().map(CseTerm::gain).sum();
    (gain, terms)
}

/// Total gain of a pairing and every term it exposes.
pub fn pairing_gain(m: &DenseMatrix, p: &Pairing) -> (usize, CseSet) {
    let cm = ColumnMajor::from_dense(m);
    let terms: Vec<CseTerm> = p
        .pairs
        .iter()
        .flat_map(|&(i, j)| columns_terms(i, j, cm.col(i), cm.col(j)))
        .collect();
    let commons = CseSet::from_terms(terms);
    (commons.total_gain(), commons)
}

/// One random exchange between two slots of `p`; keeps it iff the total gain
/// does not drop. Only the two touched slots are re-scored.
pub fn attempt_swap<R: Rng + ?Sized>(
    m: &DenseMatrix,
    p: &Pairing,
    current_gain: usize,
    rng: &mut R,
) -> (Pairing, usize, bool) {
    let cm = ColumnMajor::from_dense(m);
    let mut scratch = Vec::new();
    let slots = p.slots();
    if slots < 2 {
        return (p.clone(), current_gain, false);
    }
    let (a, b, flip) = draw_exchange(slots, rng);
    let next = p.exchanged(a, b, flip);
    let before = cm.slot_gain(p, a, &mut scratch) + cm.slot_gain(p, b, &mut scratch);
    let after = cm.slot_gain(&next, a, &mut scratch) + cm.slot_gain(&next, b, &mut scratch);
    if after >= before {
        (next, current_gain + after - before, true)
    } else {
        (p.clone(), current_gain, false)
    }
}

fn draw_exchange<R: Rng + ?Sized>(slots: usize, rng: &mut R) -> (usize, usize, bool) {
    let a = rng.gen_range(0..slots);
    let mut b = rng.gen_range(0..slots - 1);
    if b >= a {
        b += 1;
    }
    (a, b, rng.gen_bool(0.5))
}

/// Zeroes both cells of every occurrence of every term.
pub fn eliminate_commons(m: &DenseMatrix, commons: &CseSet) -> Result<DenseMatrix> {
    let mut out = m.clone();
    for t in commons.terms() {
        for &r in &t.occ_rows {
            for (c, w) in [(t.col_i, t.w_i), (t.col_j, t.w_j)] {
                if r >= out.rows() || c >= out.cols() {
                    return Err(Error::CorruptedSet(format!("cell ({r}, {c}) out of range")));
                }
                let cur = out.get(r, c);
                if cur == 0 {
                    return Err(Error::CorruptedSet(format!(
                        "cell ({r}, {c}) is already zero"
                    )));
                }
                if cur != w {
                    return Err(Error::CorruptedSet(format!(
                        "cell ({r}, {c}) holds {cur}, term expects {w}"
                    )));
                }
                out.set(r, c, 0);
            }
        }
    }
    Ok(out)
}

/// Runs the full search and returns the extracted terms with the remainder.
pub fn extract(m: &DenseMatrix, cfg: &ExtractConfig) -> Result<(CseSet, DenseMatrix)> {
    extract_traced(m, cfg).map(|(set, rem, _)| (set, rem))
}

/// [`extract`] that also records the gain history of every iteration.
pub fn extract_traced(
    m: &DenseMatrix,
    cfg: &ExtractConfig,
) -> Result<(CseSet, DenseMatrix, ExtractTrace)> {
    cfg.validate()?;
    let mut trace = ExtractTrace::default();
    if m.cols() < 2 {
        return Ok((CseSet::new(), m.clone(), trace));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cm = ColumnMajor::from_dense(m);
    let mut scratch = Vec::new();
    let mut found = Vec::new();

    for _ in 0..cfg.iterations {
        let mut pairing = pair_columns_random(cm.cols, &mut rng)?;
        let slots = pairing.slots();
        let mut slot_gain: Vec<usize> = (0..slots)
            .map(|s| cm.slot_gain(&pairing, s, &mut scratch))
            .collect();
        let mut gain: usize = slot_gain.iter().sum();
        let mut it = IterationTrace {
            initial_gain: gain,
            attempt_gains: Vec::with_capacity(cfg.attempts),
            ..Default::default()
        };

        if slots >= 2 {
            for _ in 0..cfg.attempts {
                let (a, b, flip) = draw_exchange(slots, &mut rng);
                let next = pairing.exchanged(a, b, flip);
                let ga = cm.slot_gain(&next, a, &mut scratch);
                let gb = cm.slot_gain(&next, b, &mut scratch);
                if ga + gb >= slot_gain[a] + slot_gain[b] {
                    gain = gain + ga + gb - slot_gain[a] - slot_gain[b];
                    slot_gain[a] = ga;
                    slot_gain[b] = gb;
                    pairing = next;
                    it.accepted += 1;
                }
                it.attempt_gains.push(gain);
            }
        }

        it.final_gain = gain;
        trace.iterations.push(it);
        if gain == 0 {
            if cfg.early_stop {
                break;
            }
            continue;
        }
        for &(i, j) in &pairing.pairs {
            let terms = columns_terms(i, j, cm.col(i), cm.col(j));
            for t in &terms {
                for &r in &t.occ_rows {
                    cm.clear(r, t.col_i);
                    cm.clear(r, t.col_j);
                }
            }
            found.extend(terms);
        }
    }

    let remainder = DenseMatrix::from_column_major(cm.rows, cm.cols, &cm.data);
    Ok((CseSet::from_terms(found), remainder, trace))
}

/// Column-major working copy used by the search.
struct ColumnMajor {
    rows: usize,
    cols: usize,
    data: Vec<i32>,
}

impl ColumnMajor {
    fn from_dense(m: &DenseMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.to_column_major(),
        }
    }

    #[inline]
    fn col(&self, c: usize) -> &[i32] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    fn clear(&mut self, r: usize, c: usize) {
        self.data[c * self.rows + r] = 0;
    }

    fn slot_gain(&self, p: &Pairing, s: usize, scratch: &mut Vec<u64>) -> usize {
        match p.slot_columns(s) {
            (i, Some(j)) => columns_gain(self.col(i), self.col(j), scratch),
            (_, None) => 0,
        }
    }
}
