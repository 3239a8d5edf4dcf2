//! Compressed sparse row matrices and a deterministic triplet accumulator.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn row_mut(&mut self, i: usize) -> (&[usize], &mut [f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &mut self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`. Rows are independent, so the parallel split does not
    /// change the result.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn total_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    /// Largest absolute entry of `A - Aᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        CsrMatrix::linear_combination(&[(1.0, self), (-1.0, &t)])
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `Σ cₖ Aₖ` over matrices of equal shape and arbitrary patterns.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let (_, first) = terms[0];
        let (n_rows, n_cols) = (first.n_rows, first.n_cols);
        let mut b = TripletBuilder::new(n_rows, n_cols);
        for i in 0..n_rows {
            for &(c, m) in terms {
                assert_eq!((m.n_rows, m.n_cols), (n_rows, n_cols));
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    b.push(i, j, c * v);
                }
            }
        }
        b.build()
    }

    /// Replaces row `i` by the `i`-th identity row, keeping the pattern.
    pub fn set_identity_row(&mut self, i: usize) {
        let (cols, vals) = self.row_mut(i);
        let mut has_diag = false;
        for (&j, v) in cols.iter().zip(vals.iter_mut()) {
            if j == i {
                *v = 1.0;
                has_diag = true;
            } else {
                *v = 0.0;
            }
        }
        assert!(has_diag, "row {i} has no diagonal entry in its pattern");
    }

    /// Zeroes column entries `a_ij` for rows outside `skip` and returns the
    /// removed contribution `Σ_j a_ij g_j` per row.
    pub fn eliminate_columns(&mut self, mask: &[bool], values: &[f64], skip: &[bool]) -> Vec<f64> {
        let mut moved = vec![0.0; self.n_rows];
        for (i, m) in moved.iter_mut().enumerate() {
            if skip[i] {
                continue;
            }
            let (cols, vals) = self.row_mut(i);
            for (&j, v) in cols.iter().zip(vals.iter_mut()) {
                if mask[j] {
                    *m += *v * values[j];
                    *v = 0.0;
                }
            }
        }
        moved
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Coordinate text dump, one `row col value` triple per line.
    pub fn write_coo<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(out, "{i} {j} {v}")?;
            }
        }
        Ok(())
    }

    pub fn write_coo_file(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.write_coo(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Accumulates `(row, col, value)` contributions.
///
/// Duplicates are summed in insertion order, so the assembled values depend
/// only on the order of `push` calls.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
    compacted: Vec<usize>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        TripletBuilder {
            n_cols,
            rows: vec![Vec::new(); n_rows],
            compacted: vec![0; n_rows],
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j < self.n_cols);
        let row = &mut self.rows[i];
        row.push((j, v));
        if row.len() > 64 && row.len() > 4 * self.compacted[i] {
            compact(row);
            self.compacted[i] = row.len();
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        let n_rows = self.rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in &mut self.rows {
            compact(row);
            for &(j, v) in row.iter() {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Stable sort by column, then sum runs left to right.
fn compact(row: &mut Vec<(usize, f64)>) {
    row.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for &(j, v) in row.iter() {
        match out.last_mut() {
            Some((lj, lv)) if *lj == j => *lv += v,
            _ => out.push((j, v)),
        }
    }
    *row = out;
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_rows_sort() {
        let mut b = TripletBuilder::new(2, 3);
        b.push(0, 2, 1.0);
        b.push(0, 0, 2.0);
        b.push(0, 2, 0.5);
        b.push(1, 1, -1.0);
        let m = b.build();
        assert_eq!(m.row(0).0, &[0, 2]);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![6.5, -2.0]);
    }

    #[test]
    fn compaction_keeps_insertion_order_sums() {
        let mut a = TripletBuilder::new(1, 4);
        let mut reference = [0.0f64; 4];
        for k in 0..10_000 {
            let j = (k * 7) % 4;
            let v = 1.0 / (k as f64 + 1.0);
            a.push(0, j, v);
            reference[j] += v;
        }
        let m = a.build();
        for j in 0..4 {
            assert_eq!(m.get(0, j), reference[j]);
        }
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let mut a = TripletBuilder::new(2, 2);
        a.push(0, 0, 1.0);
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 1, 2.0);
        b.push(1, 1, 3.0);
        let (a, b) = (a.build(), b.build());
        let c = CsrMatrix::linear_combination(&[(2.0, &a), (-1.0, &b)]);
        assert_eq!(c.to_dense(), vec![vec![2.0, -2.0], vec![0.0, -3.0]]);
        assert_eq!(c.transpose().to_dense(), vec![vec![2.0, 0.0], vec![-2.0, -3.0]]);
        assert_eq!(c.asymmetry(), 2.0);
    }

    #[test]
    fn identity_row_and_elimination() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, 4.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, 1.0);
        b.push(1, 1, 4.0);
        let mut m = b.build();
        m.set_identity_row(1);
        let moved = m.eliminate_columns(&[false, true], &[0.0, 2.0], &[false, true]);
        assert_eq!(moved, vec![2.0, 0.0]);
        assert_eq!(m.to_dense(), vec![vec![4.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn coo_dump() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(1, 0, 0.25);
        let mut out = Vec::new();
        b.build().write_coo(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1 0 0.25\n");
    }
}
