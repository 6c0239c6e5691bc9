//! Compressed sparse row storage.
//!
//! [`CsrMatrix`] carries shift operators and the per-order parameter
//! matrices of edge-varying filters. [`Pattern`] is the value-free structure
//! and [`SupportMask`] the particular pattern of `I + S` that bounds where
//! edge-varying parameters may live.

use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::linalg::DenseMatrix;

/// Sparsity structure in CSR layout, without values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// Validates and wraps raw CSR index arrays.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 {
            return Err(dims(format!(
                "row_ptr has length {} for {n_rows} rows",
                row_ptr.len()
            )));
        }
        if *row_ptr.last().unwrap() != col_idx.len() {
            return Err(dims("row_ptr does not end at nnz"));
        }
        for i in 0..n_rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(dims(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.iter().any(|&c| c >= n_cols) {
                return Err(dims(format!("column index out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(dims(format!("columns not strictly increasing in row {i}")));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
        })
    }

    /// Pattern from an iterator of `(row, col)` positions (duplicates merged).
    pub fn from_positions(
        n_rows: usize,
        n_cols: usize,
        positions: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
        for (i, j) in positions {
            if i >= n_rows || j >= n_cols {
                return Err(dims(format!(
                    "position ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            rows[i].push(j);
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
        })
    }

    pub fn diagonal(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    #[inline]
    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Range of storage positions belonging to row `i`.
    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn row_cols(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_range(i)]
    }

    /// Storage position of `(i, j)`, if present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_range(i);
        self.col_idx[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n_rows && self.position(i, j).is_some()
    }

    /// Iterates `(row, col)` in storage order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row_cols(i).iter().map(move |&j| (i, j)))
    }

    /// Row index of every storage position.
    pub fn row_of_positions(&self) -> Vec<usize> {
        let mut rows = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            rows.extend(std::iter::repeat_n(i, self.row_range(i).len()));
        }
        rows
    }

    /// First stored position that is not in `other`, if any.
    pub fn first_outside(&self, other: &Pattern) -> Option<(usize, usize)> {
        self.positions().find(|&(i, j)| !other.contains(i, j))
    }

    /// Keeps only positions for which `keep(row, col)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for i in 0..self.n_rows {
            col_idx.extend(self.row_cols(i).iter().copied().filter(|&j| keep(i, j)));
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
        }
    }
}

/// Support of `I + S`: every diagonal position plus the stored entries of `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask(Pattern);

impl SupportMask {
    pub fn from_shift(shift: &CsrMatrix) -> Self {
        let n = shift.n_rows();
        let positions = shift
            .pattern()
            .positions()
            .chain((0..n).map(|i| (i, i)))
            .collect::<Vec<_>>();
        Self(
            Pattern::from_positions(n, shift.n_cols(), positions)
                .expect("shift positions are in range"),
        )
    }

    pub fn pattern(&self) -> &Pattern {
        &self.0
    }

    pub fn into_pattern(self) -> Pattern {
        self.0
    }
}

impl Deref for SupportMask {
    type Target = Pattern;

    fn deref(&self) -> &Pattern {
        &self.0
    }
}

/// Real-valued sparse matrix in CSR layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pattern: Pattern,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(pattern: Pattern, values: Vec<f64>) -> Result<Self> {
        if pattern.nnz() != values.len() {
            return Err(dims(format!(
                "{} values for a pattern with {} entries",
                values.len(),
                pattern.nnz()
            )));
        }
        Ok(Self { pattern, values })
    }

    /// Validates raw CSR arrays.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::new(Pattern::new(n_rows, n_cols, row_ptr, col_idx)?, values)
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(dims(format!(
                    "triplet ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            *map.entry((i, j)).or_insert(0.0) += v;
        }
        let pattern = Pattern::from_positions(n_rows, n_cols, map.keys().copied())?;
        // BTreeMap iterates in (row, col) order, which is CSR storage order.
        Ok(Self {
            pattern,
            values: map.into_values().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            pattern: Pattern::diagonal(n),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            pattern: Pattern::diagonal(diag.len()),
            values: diag.to_vec(),
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            pattern: Pattern {
                n_rows,
                n_cols,
                row_ptr: vec![0; n_rows + 1],
                col_idx: Vec::new(),
            },
            values: Vec::new(),
        }
    }

    /// Keeps entries with `|v| > drop_tol`.
    pub fn from_dense(m: &DenseMatrix, drop_tol: f64) -> Self {
        let trip = (0..m.rows()).flat_map(|i| {
            (0..m.cols()).filter_map(move |j| {
                let v = m[(i, j)];
                (v.abs() > drop_tol).then_some((i, j, v))
            })
        });
        Self::from_triplets(m.rows(), m.cols(), trip.collect::<Vec<_>>()).expect("in range")
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    #[inline]
    pub fn row_ptr(&self) -> &[usize] {
        &self.pattern.row_ptr
    }

    #[inline]
    pub fn col_idx(&self) -> &[usize] {
        &self.pattern.col_idx
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_square(&self) -> bool {
        self.n_rows() == self.n_cols()
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Iterates `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row_range(i);
        self.pattern.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// Iterates `(row, col, value)` in storage order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pattern
            .positions()
            .zip(self.values.iter().copied())
            .map(|((i, j), v)| (i, j, v))
    }

    /// Diagonal entries (zero where not stored).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows().min(self.n_cols()))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Number of stored off-diagonal entries. This is the `M` used in
    /// parameter counts: an undirected edge contributes two.
    pub fn off_diagonal_nnz(&self) -> usize {
        self.pattern.positions().filter(|(i, j)| i != j).count()
    }

    /// Stored entries per row (the degree used for node selection).
    pub fn row_nnz(&self) -> Vec<usize> {
        (0..self.n_rows())
            .map(|i| self.pattern.row_range(i).len())
            .collect()
    }

    /// `y = S x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols() {
            return Err(dims(format!(
                "spmv with {} columns and vector of length {}",
                self.n_cols(),
                x.len()
            )));
        }
        let mut y = vec![0.0; self.n_rows()];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *yi = acc;
        }
        Ok(y)
    }

    /// `Y = S X`. Each column is accumulated in the same order as [`spmv`](Self::spmv).
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n_cols() {
            return Err(dims(format!(
                "spmm with {} columns and a {}x{} operand",
                self.n_cols(),
                x.rows(),
                x.cols()
            )));
        }
        let f = x.cols();
        let mut out = DenseMatrix::zeros(self.n_rows(), f);
        for i in 0..self.n_rows() {
            let out_row = out.row_mut(i);
            for (j, v) in self.row(i) {
                for (o, &xv) in out_row.iter_mut().zip(x.row(j)) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// `Y = Sᵀ X`.
    pub fn spmm_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n_rows() {
            return Err(dims(format!(
                "transposed spmm with {} rows and a {}x{} operand",
                self.n_rows(),
                x.rows(),
                x.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.n_cols(), x.cols());
        for i in 0..self.n_rows() {
            for (j, v) in self.row(i) {
                let src = x.row(i).to_vec();
                for (o, xv) in out.row_mut(j).iter_mut().zip(src) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// Sparse-sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols() != other.n_rows() {
            return Err(dims(format!(
                "sparse product {}x{} by {}x{}",
                self.n_rows(),
                self.n_cols(),
                other.n_rows(),
                other.n_cols()
            )));
        }
        let mut trip = Vec::new();
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for i in 0..self.n_rows() {
            acc.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    *acc.entry(j).or_insert(0.0) += a * b;
                }
            }
            trip.extend(acc.iter().map(|(&j, &v)| (i, j, v)));
        }
        CsrMatrix::from_triplets(self.n_rows(), other.n_cols(), trip)
    }

    pub fn transpose(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(
            self.n_cols(),
            self.n_rows(),
            self.triplets()
                .map(|(i, j, v)| (j, i, v))
                .collect::<Vec<_>>(),
        )
        .expect("in range")
    }

    pub fn scale(&self, alpha: f64) -> CsrMatrix {
        Self {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Entrywise sum; the result pattern is the union.
    pub fn add(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_rows() != other.n_rows() || self.n_cols() != other.n_cols() {
            return Err(dims("sparse add of different shapes"));
        }
        CsrMatrix::from_triplets(
            self.n_rows(),
            self.n_cols(),
            self.triplets().chain(other.triplets()).collect::<Vec<_>>(),
        )
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n_rows(), self.n_cols());
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Largest `|S_ij - S_ji|`, `INFINITY` for non-square input.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - self.get(j, i)).abs());
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    /// Fails with `SupportViolation` when a stored entry is outside `allowed`.
    pub fn check_support(&self, allowed: &Pattern, order: usize) -> Result<()> {
        match self.pattern.first_outside(allowed) {
            Some((row, col)) => Err(Error::SupportViolation { order, row, col }),
            None => Ok(()),
        }
    }

    /// Bytes of the CSR arrays (little endian), used for content hashing.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend((self.n_rows() as u64).to_le_bytes());
        out.extend((self.n_cols() as u64).to_le_bytes());
        for &p in self.row_ptr() {
            out.extend((p as u64).to_le_bytes());
        }
        for &c in self.col_idx() {
            out.extend((c as u64).to_le_bytes());
        }
        for &v in &self.values {
            out.extend(v.to_le_bytes());
        }
        out
    }
}
