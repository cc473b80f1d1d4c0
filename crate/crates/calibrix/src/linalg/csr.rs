use crate::Real;

use super::SolverError;

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Debug, Clone)]
pub struct TripletBuilder<T> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(rows: usize, cols: usize, cap: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.rows && col < self.cols);
        self.entries.push((row, col, value));
    }

    /// Builds a CSR matrix with sorted columns. Explicit zeros are kept so
    /// that matrices built from the same index stream share one pattern.
    pub fn build(mut self) -> CsrMatrix<T> {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..self.rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        (0..self.rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn matvec_transpose(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows, "transposed matvec dimension");
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (j, v) in self.row(i) {
                out[j] += v * yi;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.cols, self.rows, self.nnz());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Linear combination `Σ cᵢ Mᵢ` of matrices sharing one sparsity pattern.
    pub fn combine(terms: &[(T, &Self)]) -> Self {
        let (_, first) = terms.first().expect("at least one term");
        let mut out = (*first).clone();
        out.values.iter_mut().for_each(|v| *v = T::zero());
        for (c, m) in terms {
            assert!(out.same_pattern(m), "combine requires a shared pattern");
            for (o, &v) in out.values.iter_mut().zip(&m.values) {
                *o += *c * v;
            }
        }
        out
    }

    /// Extracts the block `rows × cols`, renumbered by position in the index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.cols];
        for (k, &j) in cols.iter().enumerate() {
            col_map[j] = k;
        }
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for (ri, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                let cj = col_map[j];
                if cj != usize::MAX {
                    b.push(ri, cj, v);
                }
            }
        }
        b.build()
    }

    /// Appends one dense-or-sparse row given as `(col, value)` pairs.
    pub fn push_row(&mut self, entries: &[(usize, T)]) {
        let mut sorted = entries.to_vec();
        sorted.sort_unstable_by_key(|e| e.0);
        for (j, v) in sorted {
            assert!(j < self.cols);
            self.col_idx.push(j);
            self.values.push(v);
        }
        self.rows += 1;
        self.row_ptr.push(self.values.len());
    }

    /// Product `A Aᵀ`.
    pub fn mul_self_transpose(&self) -> Self {
        let at = self.transpose();
        let mut acc = vec![T::zero(); self.rows];
        let mut marker = vec![usize::MAX; self.rows];
        let mut b = TripletBuilder::new(self.rows, self.rows);
        let mut touched = Vec::new();
        for i in 0..self.rows {
            touched.clear();
            for (j, v) in self.row(i) {
                for (k, w) in at.row(j) {
                    if marker[k] != i {
                        marker[k] = i;
                        acc[k] = T::zero();
                        touched.push(k);
                    }
                    acc[k] += v * w;
                }
            }
            for &k in &touched {
                b.push(i, k, acc[k]);
            }
        }
        b.build()
    }

    /// Adds `s` to every diagonal entry, inserting missing ones.
    pub fn add_diagonal(&self, s: T) -> Result<Self, SolverError> {
        if self.rows != self.cols {
            return Err(SolverError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut b = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz() + self.rows);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                b.push(i, j, v);
            }
            b.push(i, i, s);
        }
        Ok(b.build())
    }

    /// Column indices per row; used as the adjacency of a symmetric pattern.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.rows)
            .map(|i| self.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.cols]; self.rows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix<f64> {
        let mut b = TripletBuilder::new(2, 3);
        b.push(0, 2, 1.0);
        b.push(0, 0, 2.0);
        b.push(1, 1, 3.0);
        b.push(0, 0, 0.5);
        b.build()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = sample();
        assert_eq!(m.get(0, 0), 2.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn transpose_matvec_agrees() {
        let m = sample();
        let y = [1.0, -2.0];
        assert_eq!(m.matvec_transpose(&y), m.transpose().matvec(&y));
    }

    #[test]
    fn self_transpose_product() {
        let m = sample();
        let p = m.mul_self_transpose();
        assert_eq!(p.get(0, 0), 2.5 * 2.5 + 1.0);
        assert_eq!(p.get(1, 1), 9.0);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn push_row_extends() {
        let mut m = sample();
        m.push_row(&[(2, 4.0), (0, 1.0)]);
        assert_eq!(m.rows(), 3);
        assert_eq!(m.get(2, 0), 1.0);
        assert_eq!(m.get(2, 2), 4.0);
    }
}
