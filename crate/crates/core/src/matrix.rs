//! Dense and CSR matrices, plus the pruned/quantized experiment-matrix generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of signed integer weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<i32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DegenerateInput(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or(Error::Overflow("matrix dimensions"))?;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: entries.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.set(i, i, 1);
        }
        Ok(m)
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[i32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, entries)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[i32] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.entries[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: i32) {
        self.entries[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[i32] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<i32> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Number of nonzero entries (E).
    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0).count()
    }

    /// Number of distinct nonzero values across the whole matrix (U).
    pub fn unique_nonzero(&self) -> usize {
        let mut values: Vec<i32> = self.entries.iter().copied().filter(|&v| v != 0).collect();
        values.sort_unstable();
        values.dedup();
        values.len()
    }

    /// Column-major copy of the entries.
    pub(crate) fn to_column_major(&self) -> Vec<i32> {
        let mut out = vec![0; self.entries.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.get(r, c);
            }
        }
        out
    }

    pub(crate) fn from_column_major(rows: usize, cols: usize, data: &[i32]) -> Self {
        let mut entries = vec![0; rows * cols];
        for c in 0..cols {
            for r in 0..rows {
                entries[r * cols + c] = data[c * rows + r];
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }
}

/// Non-zero ratio `E / (M·N)`.
pub fn nonzero_ratio(m: &DenseMatrix) -> f64 {
    m.nnz() as f64 / (m.rows() * m.cols()) as f64
}

/// CSR with the cumulative row-count convention: `row_ptr[r]` is the number
/// of nonzeros in rows `0..=r`, so `row_ptr` has one entry per row and its
/// last element is the nonzero count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsrMatrix {
    cols: usize,
    values: Vec<i32>,
    col_index: Vec<usize>,
    row_ptr: Vec<usize>,
}

impl CsrMatrix {
    pub fn new(
        cols: usize,
        values: Vec<i32>,
        col_index: Vec<usize>,
        row_ptr: Vec<usize>,
    ) -> Result<Self> {
        if values.len() != col_index.len() {
            return Err(Error::Format(format!(
                "values ({}) and col_index ({}) differ in length",
                values.len(),
                col_index.len()
            )));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("row_ptr is not non-decreasing".into()));
        }
        if row_ptr.last().copied().unwrap_or(0) != values.len() {
            return Err(Error::Format(
                "last row_ptr entry must equal the nonzero count".into(),
            ));
        }
        if let Some(&c) = col_index.iter().find(|&&c| c >= cols) {
            return Err(Error::Format(format!("column index {c} out of range")));
        }
        Ok(Self {
            cols,
            values,
            col_index,
            row_ptr,
        })
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn col_index(&self) -> &[usize] {
        &self.col_index
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    /// Half-open range of entries belonging to `row`.
    #[inline]
    pub fn row_range(&self, row: usize) -> std::ops::Range<usize> {
        row_span(&self.row_ptr, row)
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        let mut m = DenseMatrix::zeros(self.rows(), self.cols)?;
        for r in 0..self.rows() {
            for k in self.row_range(r) {
                m.set(r, self.col_index[k], self.values[k]);
            }
        }
        Ok(m)
    }
}

/// Entry range of `row` under the cumulative-count pointer convention shared
/// by CSR `row_ptr` and the compressed `sp` array.
#[inline]
pub(crate) fn row_span(ptr: &[usize], row: usize) -> std::ops::Range<usize> {
    let start = if row == 0 { 0 } else { ptr[row - 1] };
    start..ptr[row]
}

pub fn to_csr(m: &DenseMatrix) -> CsrMatrix {
    let mut values = Vec::new();
    let mut col_index = Vec::new();
    let mut row_ptr = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        for (c, &v) in m.row(r).iter().enumerate() {
            if v != 0 {
                values.push(v);
                col_index.push(c);
            }
        }
        row_ptr.push(values.len());
    }
    CsrMatrix {
        cols: m.cols(),
        values,
        col_index,
        row_ptr,
    }
}

pub fn from_csr(m: &CsrMatrix) -> Result<DenseMatrix> {
    m.to_dense()
}

/// CSR storage cost in array elements: `2E + M`.
pub fn csr_storage_size(m: &CsrMatrix) -> usize {
    2 * m.nnz() + m.rows()
}

/// Alphabet produced by [`generate_dense`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMode {
    /// `U` nonzero quantization levels spanning the surviving magnitudes.
    #[default]
    Nonzero,
    /// Zero counts as one of the `U` values: survivors are quantized into
    /// `U − 1` levels and replaced by their level code `1..U`. `U = 2` gives
    /// a 0/1 matrix.
    ZeroCounted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub rows: usize,
    pub cols: usize,
    pub target_alpha: f64,
    pub unique_values: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: LevelMode,
}

impl GenSpec {
    pub fn new(
        rows: usize,
        cols: usize,
        target_alpha: f64,
        unique_values: usize,
        seed: u64,
    ) -> Self {
        Self {
            rows,
            cols,
            target_alpha,
            unique_values,
            seed,
            mode: LevelMode::Nonzero,
        }
    }

    pub fn with_mode(mut self, mode: LevelMode) -> Self {
        self.mode = mode;
        self
    }

    /// Nonzero count the generator will produce, `round(α·M·N)`.
    pub fn target_nnz(&self) -> usize {
        (self.target_alpha * (self.rows * self.cols) as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::DegenerateInput(format!(
                "dimensions must be positive, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.target_alpha > 0.0 && self.target_alpha <= 1.0) {
            return Err(Error::DegenerateInput(format!(
                "alpha must lie in (0, 1], got {}",
                self.target_alpha
            )));
        }
        if self.target_alpha * ((self.rows * self.cols) as f64) < 1.0 {
            return Err(Error::DegenerateInput(format!(
                "alpha {} leaves no nonzero entry in a {}x{} matrix",
                self.target_alpha, self.rows, self.cols
            )));
        }
        let min_levels = match self.mode {
            LevelMode::Nonzero => 1,
            LevelMode::ZeroCounted => 2,
        };
        if self.unique_values < min_levels {
            return Err(Error::DegenerateInput(format!(
                "U must be at least {min_levels} in {:?} mode, got {}",
                self.mode, self.unique_values
            )));
        }
        Ok(())
    }
}

/// Upper bound (inclusive) of the raw magnitudes drawn before pruning.
const RAW_MAX: i32 = 1 << 20;

/// Draws uniform raw magnitudes, prunes the smallest until `round(α·M·N)`
/// survive (ties keep the earlier row-major position) and quantizes the
/// survivors linearly.
pub fn generate_dense(spec: &GenSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let total = spec.rows * spec.cols;
    let keep = spec.target_nnz().min(total);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw: Vec<i32> = (0..total).map(|_| rng.gen_range(1..=RAW_MAX)).collect();

    let mut order: Vec<usize> = (0..total).collect();
    order.sort_unstable_by(|&a, &b| raw[b].cmp(&raw[a]).then(a.cmp(&b)));
    let mut survivors: Vec<usize> = order[..keep].to_vec();
    survivors.sort_unstable();

    let magnitudes: Vec<i32> = survivors.iter().map(|&i| raw[i]).collect();
    let quantized = match spec.mode {
        LevelMode::Nonzero => quantize_linear(&magnitudes, spec.unique_values),
        LevelMode::ZeroCounted => {
            let grid = LevelGrid::new(&magnitudes, spec.unique_values - 1);
            magnitudes
                .iter()
                .map(|&v| grid.nearest_index(v) as i32 + 1)
                .collect()
        }
    };

    let mut entries = vec![0; total];
    for (&pos, &q) in survivors.iter().zip(&quantized) {
        entries[pos] = q;
    }
    DenseMatrix::new(spec.rows, spec.cols, entries)
}

/// `levels` equally spaced points over `[min, max]`. With one level, the
/// single point sits at the midpoint.
struct LevelGrid {
    min: i64,
    max: i64,
    levels: usize,
}

impl LevelGrid {
    fn new(values: &[i32], levels: usize) -> Self {
        let min = values.iter().copied().min().unwrap_or(0) as i64;
        let max = values.iter().copied().max().unwrap_or(0) as i64;
        Self { min, max, levels }
    }

    fn span(&self) -> i64 {
        self.max - self.min
    }

    /// Nearest level; ties go to the lower level.
    fn nearest_index(&self, v: i32) -> usize {
        if self.levels <= 1 || self.span() == 0 {
            return 0;
        }
        let num = (v as i64 - self.min) * (self.levels as i64 - 1);
        let den = self.span();
        let k = num / den;
        let rem = num % den;
        let k = if 2 * rem > den { k + 1 } else { k };
        k as usize
    }

    fn exact_level(&self, k: usize) -> f64 {
        if self.levels <= 1 || self.span() == 0 {
            return (self.min + self.max) as f64 / 2.0;
        }
        self.min as f64 + k as f64 * self.step()
    }

    fn step(&self) -> f64 {
        if self.levels <= 1 {
            self.span() as f64
        } else {
            self.span() as f64 / (self.levels - 1) as f64
        }
    }

    /// Integer value of level `k`; a level rounding to zero is moved up one step.
    fn value(&self, k: usize) -> i32 {
        let exact = self.exact_level(k);
        let v = exact.round() as i32;
        if v != 0 {
            return v;
        }
        match (exact + self.step()).round() as i32 {
            0 => 1,
            shifted => shifted,
        }
    }
}

/// Maps every value to the nearest of `levels` equally spaced points over
/// `[min, max]` of the input. Outputs are never zero.
pub fn quantize_linear(values: &[i32], levels: usize) -> Vec<i32> {
    let levels = levels.max(1);
    let grid = LevelGrid::new(values, levels);
    let table: Vec<i32> = (0..levels).map(|k| grid.value(k)).collect();
    values
        .iter()
        .map(|&v| table[grid.nearest_index(v)])
        .collect()
}
