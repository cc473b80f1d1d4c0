use std::ops::{Add, Mul, Sub};

use crate::Real;

/// Symmetric second-order tensor in 3D, stored as a full 3×3 array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor3<T>(pub [[T; 3]; 3]);

impl<T: Real> Tensor3<T> {
    pub fn zero() -> Self {
        Self([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diagonal([T::one(); 3])
    }

    pub fn diagonal(d: [T; 3]) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, v) in d.into_iter().enumerate() {
            m[i][i] = v;
        }
        Self(m)
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Deviatoric part `A − (tr A / 3) I`.
    pub fn dev(&self) -> Self {
        let m = self.trace() / T::lit(3.0);
        let mut out = *self;
        for i in 0..3 {
            out.0[i][i] -= m;
        }
        out
    }

    /// Double contraction `A : B`.
    pub fn dot(&self, other: &Self) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.0[i][j]
    }
}

impl<T: Real> Add for Tensor3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j] + rhs.0[i][j])
        }))
    }
}

impl<T: Real> Sub for Tensor3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j] - rhs.0[i][j])
        }))
    }
}

impl<T: Real> Mul<T> for Tensor3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self(self.0.map(|r| r.map(|v| v * s)))
    }
}
