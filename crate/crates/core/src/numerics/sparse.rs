use super::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix.
///
/// Column indices are sorted and unique within each row, so iteration order
/// (and therefore every floating point reduction over a row) is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("entry ({r}, {c}) is not finite")));
            }
        }
        // Stable sort keeps duplicate summation order equal to input order.
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from raw CSR arrays, validating structure.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return Err(Error::invalid("row_ptr must have rows+1 entries starting at 0"));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("row_ptr must be non-decreasing"));
        }
        let nnz = row_ptr[rows];
        if col_idx.len() != nnz || values.len() != nnz {
            return Err(Error::invalid("col_idx/values length must equal row_ptr[rows]"));
        }
        for r in 0..rows {
            let cs = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "row {r}: column indices must be strictly increasing"
                )));
            }
            if cs.last().is_some_and(|&c| c >= cols) {
                return Err(Error::invalid(format!("row {r}: column index out of range")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value"));
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
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
    pub fn nnz(&self) -> usize {
        self.values.len()
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

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Number of stored entries in row `r`.
    #[inline]
    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cs, vs) = self.row(r);
        cs.binary_search(&c).map_or(0.0, |k| vs[k])
    }

    /// Iterates stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cs, vs) = self.row(r);
            cs.iter().zip(vs).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            d.set(r, c, v);
        }
        d
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Visiting source rows in increasing order leaves each output row sorted.
        for (r, c, v) in self.triplets() {
            let k = next[c];
            col_idx[k] = r;
            values[k] = v;
            next[c] += 1;
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Exact (bitwise) symmetry check.
    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn has_diagonal(&self) -> bool {
        (0..self.rows.min(self.cols)).any(|r| self.row(r).0.binary_search(&r).is_ok())
    }

    /// Sparse-dense product `self · d`.
    pub fn spmm(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != d.rows() {
            return Err(Error::invalid(format!(
                "spmm shape mismatch: {}x{} sparse times {}x{} dense",
                self.rows,
                self.cols,
                d.rows(),
                d.cols()
            )));
        }
        Ok(self.spmm_unchecked(d))
    }

    pub(crate) fn spmm_unchecked(&self, d: &DenseMatrix) -> DenseMatrix {
        let m = d.cols();
        let mut out = DenseMatrix::zeros(self.rows, m);
        for r in 0..self.rows {
            let (cs, vs) = self.row(r);
            let out_row = out.row_mut(r);
            for (&c, &v) in cs.iter().zip(vs) {
                for (o, &x) in out_row.iter_mut().zip(d.row(c)) {
                    *o += v * x;
                }
            }
        }
        out
    }

    /// Sparse matrix-vector product.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::invalid(format!(
                "spmv shape mismatch: {} columns, vector of length {}",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                let (cs, vs) = self.row(r);
                cs.iter().zip(vs).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect())
    }

    fn require_square(&self, op: &str) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::invalid(format!(
                "{op} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Symmetric degree normalization `D^{-1/2} (A [+ I]) D^{-1/2}`.
    ///
    /// Degrees are taken after the optional self-loops are added. Rows with
    /// zero degree stay empty.
    pub fn sym_normalize(&self, add_self_loops: bool) -> Result<Self> {
        self.require_square("sym_normalize")?;
        if !self.is_symmetric() {
            return Err(Error::invalid("sym_normalize needs a symmetric matrix"));
        }
        let base = if add_self_loops {
            let n = self.rows;
            Self::from_triplets(n, n, self.triplets().chain((0..n).map(|i| (i, i, 1.0))))?
        } else {
            self.clone()
        };
        let deg = base.row_sums();
        let mut out = base;
        for r in 0..out.rows {
            let span = out.row_ptr[r]..out.row_ptr[r + 1];
            for k in span {
                let c = out.col_idx[k];
                let dd = deg[r] * deg[c];
                out.values[k] = if dd > 0.0 { out.values[k] / dd.sqrt() } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Row-stochastic normalization `D^{-1} A`. Zero rows stay zero.
    pub fn row_normalize(&self) -> Result<Self> {
        self.require_square("row_normalize")?;
        if self.values.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("row_normalize needs non-negative entries"));
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            let span = out.row_ptr[r]..out.row_ptr[r + 1];
            let sum: f64 = out.values[span.clone()].iter().sum();
            if sum > 0.0 {
                for v in &mut out.values[span] {
                    *v /= sum;
                }
            }
        }
        Ok(out)
    }
}
