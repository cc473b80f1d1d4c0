use crate::Real;

use super::{CsrMatrix, SolverError};

/// Symmetric matrix in skyline (variable band) storage of the upper triangle.
///
/// Column `j` stores rows `first[j]..=j` contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct SkylineMatrix<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<T>,
}

/// `A = L D Lᵀ` factor sharing the skyline profile of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdlFactor<T> {
    profile: SkylineMatrix<T>,
    diag: Vec<T>,
}

impl<T: Real> SkylineMatrix<T> {
    /// Builds the profile from the upper triangle of a symmetric CSR matrix.
    pub fn from_csr(a: &CsrMatrix<T>) -> Result<Self, SolverError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(SolverError::NotSquare {
                rows: n,
                cols: a.cols(),
            });
        }
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, _) in a.row(i) {
                if j >= i {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for j in 0..n {
            start.push(start[j] + (j - first[j] + 1));
        }
        let mut values = vec![T::zero(); start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j >= i {
                    values[start[j] + (i - first[j])] = v;
                }
            }
        }
        Ok(Self {
            first,
            start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored entries, the profile size.
    pub fn profile_len(&self) -> usize {
        self.values.len()
    }

    fn column(&self, j: usize) -> &[T] {
        &self.values[self.start[j]..self.start[j + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if i < self.first[j] {
            T::zero()
        } else {
            self.column(j)[i - self.first[j]]
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y = vec![T::zero(); n];
        for j in 0..n {
            let f = self.first[j];
            let col = self.column(j);
            for (k, &a) in col.iter().enumerate() {
                let i = f + k;
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Crout `LDLᵀ` factorization without pivoting.
    pub fn factor(&self) -> Result<LdlFactor<T>, SolverError> {
        let n = self.dim();
        let mut work = self.clone();
        let mut diag = vec![T::zero(); n];
        let mut max_pivot = T::zero();
        let mut min_pivot = T::infinity();
        let first = &self.first;
        for j in 0..n {
            let fj = first[j];
            let sj = work.start[j];
            for i in fj..j {
                let fi = first[i].max(fj);
                if fi < i {
                    let si = work.start[i];
                    let (left, right) = work.values.split_at_mut(sj);
                    let col_i = &left[si + (fi - first[i])..si + (i - first[i])];
                    let col_j = &right[(fi - fj)..(i - fj)];
                    let s = super::dot(col_i, col_j);
                    right[i - fj] -= s;
                }
            }
            let mut d = work.values[sj + (j - fj)];
            let a_jj = d;
            for i in fj..j {
                let g = work.values[sj + (i - fj)];
                let l = g / diag[i];
                work.values[sj + (i - fj)] = l;
                d -= g * l;
            }
            let tiny = T::epsilon() * T::lit(64.0) * a_jj.abs().max(max_pivot);
            if !(d > tiny) || !d.is_finite() {
                let condition = if d > T::zero() {
                    (max_pivot / d).to_f64_lossy()
                } else {
                    f64::INFINITY
                };
                return Err(SolverError::Singular {
                    row: j,
                    pivot: d.to_f64_lossy(),
                    condition,
                });
            }
            work.values[sj + (j - fj)] = T::one();
            diag[j] = d;
            max_pivot = max_pivot.max(d);
            min_pivot = min_pivot.min(d);
        }
        Ok(LdlFactor {
            profile: work,
            diag,
        })
    }
}

impl<T: Real> LdlFactor<T> {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Ratio of the largest to the smallest pivot, a cheap conditioning proxy.
    pub fn condition_estimate(&self) -> f64 {
        let (lo, hi) = self
            .diag
            .iter()
            .fold((T::infinity(), T::zero()), |(lo, hi), &d| {
                (lo.min(d), hi.max(d))
            });
        (hi / lo).to_f64_lossy()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, SolverError> {
        let n = self.dim();
        if b.len() != n {
            return Err(SolverError::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        let p = &self.profile;
        let mut z = b.to_vec();
        for j in 0..n {
            let fj = p.first[j];
            let col = p.column(j);
            let s = super::dot(&col[..j - fj], &z[fj..j]);
            z[j] -= s;
        }
        for (zj, &d) in z.iter_mut().zip(&self.diag) {
            *zj /= d;
        }
        for j in (0..n).rev() {
            let fj = p.first[j];
            let xj = z[j];
            let col = p.column(j);
            for (zi, &l) in z[fj..j].iter_mut().zip(&col[..j - fj]) {
                *zi -= l * xj;
            }
        }
        Ok(z)
    }
}
