//! Sparse storage, bandwidth-reducing ordering and the skyline LDLᵀ solver.

mod csr;
mod dense;
mod ordering;
mod skyline;

pub use csr::{CsrMatrix, TripletBuilder};
pub use dense::DenseMatrix;
pub use ordering::reverse_cuthill_mckee;
pub use skyline::{LdlFactor, SkylineMatrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("matrix is singular or indefinite: pivot {pivot:e} at row {row}, condition estimate {condition:e}")]
    Singular {
        row: usize,
        pivot: f64,
        condition: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

pub(crate) fn dot<T: crate::Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: crate::Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration from a fixed start vector.
pub fn power_iteration<T: crate::Real>(
    n: usize,
    apply: impl Fn(&[T]) -> Vec<T>,
    max_iter: usize,
    tol: T,
) -> T {
    if n == 0 {
        return T::zero();
    }
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.1) * T::lit((i % 7) as f64))
        .collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = T::zero();
    for _ in 0..max_iter {
        let w = apply(&v);
        let next = norm(&w);
        if next.is_zero() {
            return T::zero();
        }
        v = w.into_iter().map(|x| x / next).collect();
        if (next - lambda).abs() <= tol * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_finds_the_top_eigenvalue() {
        let d = [1.0, 5.0, 2.0, 0.5];
        let l = power_iteration(
            4,
            |v: &[f64]| v.iter().zip(&d).map(|(x, d)| x * d).collect(),
            1000,
            1e-12,
        );
        assert!((l - 5.0).abs() < 1e-8);
    }
}
