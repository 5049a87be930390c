//! Compressed sparse row matrices and the graph-operator algebra built on them.
//!
//! Every constructor and every operation returns a matrix whose columns are
//! strictly increasing within each row. Sparsity patterns are structural:
//! an entry produced by arithmetic stays in the pattern even when its value
//! cancels to zero, so operators built from the same inputs always share a
//! pattern and their value arrays line up index for index.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicate coordinates are merged by summation.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::dim(
                    "from_triplets",
                    format!("entry ({r}, {c}) outside {n_rows}x{n_cols}"),
                ));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n_rows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            // stable sort keeps summation order equal to input order
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sparse pattern of the nonzero entries of a dense matrix.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(m.n_rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.n_rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: m.n_rows(),
            n_cols: m.n_cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Checks the CSR invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::dim("csr invariant", msg));
        if self.row_ptr.len() != self.n_rows + 1 {
            return bad(format!(
                "row_ptr has {} entries for {} rows",
                self.row_ptr.len(),
                self.n_rows
            ));
        }
        if self.row_ptr[0] != 0 {
            return bad("row_ptr[0] != 0".into());
        }
        if self.col_idx.len() != self.values.len()
            || self.row_ptr[self.n_rows] != self.col_idx.len()
        {
            return bad("row_ptr / col_idx / values lengths disagree".into());
        }
        for i in 0..self.n_rows {
            if self.row_ptr[i] > self.row_ptr[i + 1] {
                return bad(format!("row_ptr decreases at row {i}"));
            }
            let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return bad(format!("row {i} columns not strictly increasing"));
                }
            }
            if let Some(&c) = cols.last() {
                if c >= self.n_cols {
                    return bad(format!("row {i} has column {c} >= {}", self.n_cols));
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Position of `(i, j)` in the value array, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let s = self.row_ptr[i];
        self.col_idx[s..self.row_ptr[i + 1]]
            .binary_search(&j)
            .ok()
            .map(|p| s + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<SparseMatrix> {
        if values.len() != self.nnz() {
            return Err(Error::dim(
                "with_values",
                format!("{} values for {} stored entries", values.len(), self.nnz()),
            ));
        }
        Ok(SparseMatrix {
            values,
            ..self.clone()
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out.set(i, c, v);
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = i;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        self.same_pattern(&t)
            && self
                .values
                .iter()
                .zip(&t.values)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Structural inner product `Σ self_ij · other_ij` over the entries of
    /// `other`; entries of `other` outside `self`'s pattern contribute zero.
    pub fn pattern_dot(&self, other: &SparseMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                "pattern_dot",
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        let mut acc = 0.0;
        for i in 0..other.n_rows {
            let (ocols, ovals) = other.row(i);
            let (scols, svals) = self.row(i);
            let mut p = 0;
            for (&c, &v) in ocols.iter().zip(ovals) {
                while p < scols.len() && scols[p] < c {
                    p += 1;
                }
                if p < scols.len() && scols[p] == c {
                    acc += svals[p] * v;
                }
            }
        }
        Ok(acc)
    }

    /// Values on this matrix's pattern of the dense product `left · rightᵀ`,
    /// i.e. entry `(i, j)` is `Σ_c left[i, c] · right[j, c]`.
    pub fn sampled_product(&self, left: &DenseMatrix, right: &DenseMatrix) -> Result<Vec<f64>> {
        if left.n_rows() != self.n_rows
            || right.n_rows() != self.n_cols
            || left.n_cols() != right.n_cols()
        {
            return Err(Error::dim(
                "sampled_product",
                format!(
                    "pattern {:?}, left {:?}, right {:?}",
                    self.shape(),
                    left.shape(),
                    right.shape()
                ),
            ));
        }
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let l = left.row(i);
            for &c in self.row(i).0 {
                out.push(crate::dense::dot(l, right.row(c)));
            }
        }
        Ok(out)
    }
}

/// `A + I`: adds one to every diagonal entry, inserting it when absent.
pub fn add_self_loops(a: &SparseMatrix) -> Result<SparseMatrix> {
    if !a.is_square() {
        return Err(Error::dim(
            "add_self_loops",
            format!("{:?} is not square", a.shape()),
        ));
    }
    let n = a.n_rows;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(a.nnz() + n);
    let mut values = Vec::with_capacity(a.nnz() + n);
    row_ptr.push(0);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let mut placed = false;
        for (&c, &v) in cols.iter().zip(vals) {
            if !placed && c >= i {
                if c == i {
                    col_idx.push(c);
                    values.push(v + 1.0);
                    placed = true;
                    continue;
                }
                col_idx.push(i);
                values.push(1.0);
                placed = true;
            }
            col_idx.push(c);
            values.push(v);
        }
        if !placed {
            col_idx.push(i);
            values.push(1.0);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseMatrix {
        n_rows: n,
        n_cols: n,
        row_ptr,
        col_idx,
        values,
    })
}

fn positive_row_sums(a: &SparseMatrix, op: &'static str) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::dim(op, format!("{:?} is not square", a.shape())));
    }
    let sums = a.row_sums();
    if let Some((row, &sum)) = sums
        .iter()
        .enumerate()
        .find(|(_, &s)| s.is_nan() || s <= 0.0)
    {
        return Err(Error::DegenerateDegree { op, row, sum });
    }
    Ok(sums)
}

/// `D^{-1/2} · A · D^{-1/2}` with `D` the diagonal of weighted row sums.
pub fn sym_normalize(a: &SparseMatrix) -> Result<SparseMatrix> {
    let inv_sqrt: Vec<f64> = positive_row_sums(a, "sym_normalize")?
        .into_iter()
        .map(|d| 1.0 / d.sqrt())
        .collect();
    let mut out = a.clone();
    for i in 0..a.n_rows {
        for p in a.row_ptr[i]..a.row_ptr[i + 1] {
            out.values[p] = inv_sqrt[i] * a.values[p] * inv_sqrt[a.col_idx[p]];
        }
    }
    Ok(out)
}

/// `D^{-1} · A`: every row rescaled to sum to one.
pub fn row_normalize(a: &SparseMatrix) -> Result<SparseMatrix> {
    let sums = positive_row_sums(a, "row_normalize")?;
    let mut out = a.clone();
    for (i, d) in sums.into_iter().enumerate() {
        for v in &mut out.values[a.row_ptr[i]..a.row_ptr[i + 1]] {
            *v /= d;
        }
    }
    Ok(out)
}

/// Sparse-dense product `S · H`.
pub fn spmm(s: &SparseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    if s.n_cols != h.n_rows() {
        return Err(Error::dim(
            "spmm",
            format!("{:?} x {:?}", s.shape(), h.shape()),
        ));
    }
    let m = h.n_cols();
    let mut out = DenseMatrix::zeros(s.n_rows, m);
    for i in 0..s.n_rows {
        let (cols, vals) = s.row(i);
        let out_row = out.row_mut(i);
        for (&c, &v) in cols.iter().zip(vals) {
            for (o, &x) in out_row.iter_mut().zip(h.row(c)) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

/// `Sᵀ · H` without materializing the transpose.
pub fn spmm_t(s: &SparseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    if s.n_rows != h.n_rows() {
        return Err(Error::dim(
            "spmm_t",
            format!("{:?}ᵀ x {:?}", s.shape(), h.shape()),
        ));
    }
    let m = h.n_cols();
    let mut out = DenseMatrix::zeros(s.n_cols, m);
    for i in 0..s.n_rows {
        let (cols, vals) = s.row(i);
        let h_row = h.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            for (o, &x) in out.row_mut(c).iter_mut().zip(h_row) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

/// Sparse-sparse product with a dense per-row accumulator.
pub fn sp_sp_matmul(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    if a.n_cols != b.n_rows {
        return Err(Error::dim(
            "sp_sp_matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let n_cols = b.n_cols;
    let mut acc = vec![0.0; n_cols];
    let mut seen = vec![usize::MAX; n_cols];
    let mut touched: Vec<usize> = Vec::new();

    let mut row_ptr = Vec::with_capacity(a.n_rows + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..a.n_rows {
        touched.clear();
        let (acols, avals) = a.row(i);
        for (&k, &av) in acols.iter().zip(avals) {
            let (bcols, bvals) = b.row(k);
            for (&j, &bv) in bcols.iter().zip(bvals) {
                if seen[j] != i {
                    seen[j] = i;
                    acc[j] = 0.0;
                    touched.push(j);
                }
                acc[j] += av * bv;
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            col_idx.push(j);
            values.push(acc[j]);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseMatrix {
        n_rows: a.n_rows,
        n_cols,
        row_ptr,
        col_idx,
        values,
    })
}

/// `Σ_k w_k · A_k` over the structural union of the patterns.
pub fn weighted_sum(mats: &[&SparseMatrix], weights: &[f64]) -> Result<SparseMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::Argument("weighted_sum of an empty list".into()))?;
    if mats.len() != weights.len() {
        return Err(Error::Argument(format!(
            "weighted_sum: {} matrices but {} weights",
            mats.len(),
            weights.len()
        )));
    }
    if let Some(m) = mats.iter().find(|m| m.shape() != first.shape()) {
        return Err(Error::Argument(format!(
            "weighted_sum: shapes {:?} and {:?} differ",
            first.shape(),
            m.shape()
        )));
    }
    let (n_rows, n_cols) = first.shape();
    let mut acc = vec![0.0; n_cols];
    let mut seen = vec![usize::MAX; n_cols];
    let mut touched: Vec<usize> = Vec::new();
    let mut row_ptr = Vec::with_capacity(n_rows + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..n_rows {
        touched.clear();
        for (m, &w) in mats.iter().zip(weights) {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if seen[j] != i {
                    seen[j] = i;
                    acc[j] = 0.0;
                    touched.push(j);
                }
                acc[j] += w * v;
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            col_idx.push(j);
            values.push(acc[j]);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseMatrix {
        n_rows,
        n_cols,
        row_ptr,
        col_idx,
        values,
    })
}
