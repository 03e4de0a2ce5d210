use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Compressed sparse row adjacency between two node types.
///
/// Rows index source-type nodes and columns destination-type nodes for a
/// stored edge type; a propagation operator is the normalized transpose
/// (rows = receiving type).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdjacency {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseAdjacency {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_offsets: vec![0; rows + 1], col_indices: Vec::new(), values: Vec::new() }
    }

    /// Builds from raw CSR arrays, checking every structural invariant.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 || row_offsets[0] != 0 {
            return Err(Error::Shape(format!("row_offsets length {} for {rows} rows", row_offsets.len())));
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != col_indices.len() {
            return Err(Error::Shape("col_indices/values/offsets lengths disagree".into()));
        }
        for r in 0..rows {
            let (a, b) = (row_offsets[r], row_offsets[r + 1]);
            if a > b {
                return Err(Error::Shape(format!("row_offsets not monotone at row {r}")));
            }
            let idx = &col_indices[a..b];
            if idx.iter().any(|&c| c >= cols) {
                return Err(Error::Shape(format!("column index out of range in row {r}")));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Shape(format!("column indices not strictly increasing in row {r}")));
            }
        }
        Ok(Self { rows, cols, row_offsets, col_indices, values })
    }

    /// Builds from `(row, col, value)` triplets in any order. Repeated
    /// coordinates are merged by summing their values.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(Error::Shape(format!("entry ({r}, {c}) outside {rows}x{cols}")));
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_offsets[r + 1] += 1;
            col_indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self { rows, cols, row_offsets, col_indices, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (idx, vals) = self.row(r);
            idx.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Scales every nonempty row to sum to one. Empty rows stay empty.
    pub fn row_normalize(&self) -> Result<Self> {
        let mut values = self.values.clone();
        for r in 0..self.rows {
            let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let row = &mut values[a..b];
            if let Some(&value) = row.iter().find(|v| **v < 0.0 || v.is_nan()) {
                return Err(Error::NegativeWeight { row: r, value });
            }
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self { values, ..self.clone() })
    }

    /// Transpose, with each output row sorted. Values are carried over
    /// unchanged.
    pub fn transpose(&self) -> Self {
        let mut row_offsets = vec![0usize; self.cols + 1];
        for &c in &self.col_indices {
            row_offsets[c + 1] += 1;
        }
        for c in 0..self.cols {
            row_offsets[c + 1] += row_offsets[c];
        }
        let mut next = row_offsets.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each output row fills sorted.
        for (r, c, v) in self.iter() {
            let slot = next[c];
            col_indices[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        Self { rows: self.cols, cols: self.rows, row_offsets, col_indices, values }
    }

    /// Number of stored entries per column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.cols];
        for &c in &self.col_indices {
            counts[c] += 1;
        }
        counts
    }

    /// Sparse × dense product `self · x`.
    pub fn spmm(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} adjacency by {}x{} matrix",
                self.rows,
                self.cols,
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = Array2::<f64>::zeros((self.rows, x.ncols()));
        for (r, mut out_row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                out_row.scaled_add(v, &x.row(c));
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.iter() {
            d[[r, c]] = v;
        }
        d
    }
}

/// Standalone form of [`SparseAdjacency::transpose`].
pub fn reverse_adjacency(a: &SparseAdjacency) -> SparseAdjacency {
    a.transpose()
}

/// Standalone form of [`SparseAdjacency::row_normalize`].
pub fn row_normalize(a: &SparseAdjacency) -> Result<SparseAdjacency> {
    a.row_normalize()
}
