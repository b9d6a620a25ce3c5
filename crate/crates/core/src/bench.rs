//! Experiment grid: generate → extract → encode → multiply, one row per
//! `(dims, α, U, repetition)`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{crossover_predicate, encode, storage_report};
use crate::cse::{extract, ExtractConfig};
use crate::error::{Error, Result};
use crate::kernels::{mm_compressed, mm_csr, mm_dense};
use crate::matrix::{generate_dense, to_csr, GenSpec, LevelMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dims: Vec<(usize, usize)>,
    pub alphas: Vec<f64>,
    pub uniques: Vec<usize>,
    pub extract: ExtractConfig,
    pub repetitions: usize,
    pub mode: LevelMode,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.alphas.is_empty() || self.uniques.is_empty() {
            return Err(Error::DegenerateInput(
                "dims, alpha and U lists must be nonempty".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::DegenerateInput(
                "repetitions must be at least 1".into(),
            ));
        }
        self.extract.validate()
    }

    /// Cells in output order: dims, then α, then U, then repetition.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &(rows, cols) in &self.dims {
            for &alpha in &self.alphas {
                for &unique in &self.uniques {
                    for rep in 0..self.repetitions {
                        out.push(Cell {
                            rows,
                            cols,
                            alpha,
                            unique,
                            rep,
                            seed: self.extract.seed.wrapping_add(rep as u64),
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rows: usize,
    pub cols: usize,
    pub alpha: f64,
    pub unique: usize,
    pub rep: usize,
    /// Generator seed; extraction uses a seed derived from it.
    pub seed: u64,
}

/// One CSV row. Column order is the serialized field order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub rows: usize,
    pub cols: usize,
    pub alpha: f64,
    pub unique: usize,
    pub rep: usize,
    pub seed: u64,
    pub e: usize,
    pub gain: usize,
    pub n_cse: usize,
    pub adds_baseline: u64,
    pub adds_csr: u64,
    pub adds_cse: u64,
    pub mults_cse: u64,
    pub s_weights: usize,
    pub s_cse: usize,
    pub s_singles: usize,
    pub s_csr: usize,
    pub s_total: usize,
    pub ratio_vs_dense: f64,
    pub ratio_vs_csr: f64,
    pub crossover: bool,
    pub extract_seconds: Option<f64>,
    pub encode_seconds: Option<f64>,
    pub multiply_seconds: Option<f64>,
    pub error: String,
}

/// SplitMix64 finalizer, used to decorrelate the extraction seed from the
/// generator seed.
pub fn mix_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one cell. Failures are recorded in `error` instead of aborting.
pub fn run_cell(cell: &Cell, spec: &ExperimentSpec, timing: bool) -> BenchRow {
    let mut row = BenchRow {
        rows: cell.rows,
        cols: cell.cols,
        alpha: cell.alpha,
        unique: cell.unique,
        rep: cell.rep,
        seed: cell.seed,
        ..Default::default()
    };
    if let Err(e) = fill_row(&mut row, cell, spec, timing) {
        row.error = e.to_string();
    }
    row
}

fn fill_row(row: &mut BenchRow, cell: &Cell, spec: &ExperimentSpec, timing: bool) -> Result<()> {
    let gen =
        GenSpec::new(cell.rows, cell.cols, cell.alpha, cell.unique, cell.seed).with_mode(spec.mode);
    let m = generate_dense(&gen)?;
    row.e = m.nnz();

    let cfg = ExtractConfig {
        seed: mix_seed(cell.seed),
        ..spec.extract
    };
    let t = Instant::now();
    let (commons, remainder) = extract(&m, &cfg)?;
    let extract_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let c = encode(&remainder, &commons, m.dims())?;
    let encode_s = t.elapsed().as_secs_f64();

    let v: Vec<i64> = (1..=cell.cols as i64).collect();
    let (y_dense, ops_dense) = mm_dense(&m, &v)?;
    let (y_csr, ops_csr) = mm_csr(&to_csr(&m), &v)?;
    let t = Instant::now();
    let (y_cse, ops_cse) = mm_compressed(&c, &v)?;
    let multiply_s = t.elapsed().as_secs_f64();
    if y_dense != y_csr || y_dense != y_cse {
        return Err(Error::Format("kernel outputs disagree".into()));
    }

    let report = storage_report(&c, row.e);
    let cells = (cell.rows * cell.cols) as f64;
    row.gain = commons.total_gain();
    row.n_cse = commons.len();
    row.adds_baseline = ops_dense.additions;
    row.adds_csr = ops_csr.additions;
    row.adds_cse = ops_cse.additions;
    row.mults_cse = ops_cse.multiplications;
    row.s_weights = report.s_weights;
    row.s_cse = report.s_cse;
    row.s_singles = report.s_singles;
    row.s_csr = report.s_csr;
    row.s_total = report.s_total;
    row.ratio_vs_dense = report.s_total as f64 / cells;
    row.ratio_vs_csr = report.s_total as f64 / report.s_csr as f64;
    row.crossover = crossover_predicate(
        row.e as f64 / cells,
        m.unique_nonzero(),
        cell.rows,
        cell.cols,
        row.n_cse,
        row.gain,
    );
    if timing {
        row.extract_seconds = Some(extract_s);
        row.encode_seconds = Some(encode_s);
        row.multiply_seconds = Some(multiply_s);
    }
    Ok(())
}

/// Runs every cell, in parallel when asked; rows come back in cell order.
pub fn run_grid(spec: &ExperimentSpec, parallel: bool, timing: bool) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let cells = spec.cells();
    let rows = if parallel {
        cells
            .par_iter()
            .map(|c| run_cell(c, spec, timing))
            .collect()
    } else {
        cells.iter().map(|c| run_cell(c, spec, timing)).collect()
    };
    Ok(rows)
}

/// Analytic storage for a CSE-free compression with every value in every
/// column, against CSR and the dense baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rows: usize,
    pub cols: usize,
    pub alpha: f64,
    pub unique: usize,
    pub e: usize,
    pub s_dense: usize,
    pub s_csr: usize,
    pub s_total: usize,
    pub crossover: bool,
}

pub fn storage_sweep(rows: usize, cols: usize, alphas: &[f64], uniques: &[usize]) -> Vec<SweepRow> {
    let mut out = Vec::with_capacity(alphas.len() * uniques.len());
    for &unique in uniques {
        for &alpha in alphas {
            let e = (alpha * (rows * cols) as f64).round() as usize;
            out.push(SweepRow {
                rows,
                cols,
                alpha,
                unique,
                e,
                s_dense: rows * cols,
                s_csr: 2 * e + rows,
                s_total: cols * (unique + 1) + e + rows,
                crossover: crossover_predicate(alpha, unique, rows, cols, 0, 0),
            });
        }
    }
    out
}
