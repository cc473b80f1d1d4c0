//! Bilinear quadrilateral shape functions and 2×2 Gauss quadrature.

use crate::Real;

/// Natural coordinates of the four corners, counter-clockwise.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// 2×2 Gauss points; all weights equal one.
pub fn gauss_points<T: Real>() -> [[T; 2]; 4] {
    let g = T::one() / T::lit(3.0).sqrt();
    CORNERS.map(|[a, b]| [T::lit(a) * g, T::lit(b) * g])
}

pub fn shape<T: Real>(xi: T, eta: T) -> [T; 4] {
    let q = T::lit(0.25);
    CORNERS.map(|[a, b]| q * (T::one() + T::lit(a) * xi) * (T::one() + T::lit(b) * eta))
}

/// Derivatives `[dN/dξ, dN/dη]` per node.
pub fn shape_derivatives<T: Real>(xi: T, eta: T) -> [[T; 2]; 4] {
    let q = T::lit(0.25);
    CORNERS.map(|[a, b]| {
        let (a, b) = (T::lit(a), T::lit(b));
        [q * a * (T::one() + b * eta), q * b * (T::one() + a * xi)]
    })
}

/// Isoparametric Jacobian `∂(x, y)/∂(ξ, η)` as `[[x_ξ, x_η], [y_ξ, y_η]]`.
pub fn jacobian<T: Real>(coords: &[[T; 2]; 4], xi: T, eta: T) -> [[T; 2]; 2] {
    let dn = shape_derivatives(xi, eta);
    let mut j = [[T::zero(); 2]; 2];
    for (c, d) in coords.iter().zip(&dn) {
        for r in 0..2 {
            j[r][0] += c[r] * d[0];
            j[r][1] += c[r] * d[1];
        }
    }
    j
}

pub fn det2<T: Real>(j: &[[T; 2]; 2]) -> T {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Physical shape-function gradients `[dN/dx, dN/dy]` and `det J`.
pub fn physical_gradients<T: Real>(coords: &[[T; 2]; 4], xi: T, eta: T) -> ([[T; 2]; 4], T) {
    let j = jacobian(coords, xi, eta);
    let det = det2(&j);
    let inv = [
        [j[1][1] / det, -j[0][1] / det],
        [-j[1][0] / det, j[0][0] / det],
    ];
    let dn = shape_derivatives(xi, eta);
    let grads = dn.map(|[dxi, deta]| {
        [
            dxi * inv[0][0] + deta * inv[1][0],
            dxi * inv[0][1] + deta * inv[1][1],
        ]
    });
    (grads, det)
}

/// Strain-displacement matrix rows `[ε11, ε22, γ12]` for dofs `[u1, v1, …, u4, v4]`.
pub fn strain_matrix<T: Real>(grads: &[[T; 2]; 4]) -> [[T; 8]; 3] {
    let mut b = [[T::zero(); 8]; 3];
    for (a, g) in grads.iter().enumerate() {
        b[0][2 * a] = g[0];
        b[1][2 * a + 1] = g[1];
        b[2][2 * a] = g[1];
        b[2][2 * a + 1] = g[0];
    }
    b
}

/// Maps natural coordinates to physical ones.
pub fn map_point<T: Real>(coords: &[[T; 2]; 4], xi: T, eta: T) -> [T; 2] {
    let n = shape(xi, eta);
    let mut p = [T::zero(); 2];
    for (c, w) in coords.iter().zip(&n) {
        p[0] += c[0] * *w;
        p[1] += c[1] * *w;
    }
    p
}

/// Inverse isoparametric map by Newton iteration.
///
/// Returns `None` when the iteration fails to converge to `tol`.
pub fn inverse_map<T: Real>(coords: &[[T; 2]; 4], point: [T; 2], tol: T) -> Option<[T; 2]> {
    let mut xi = [T::zero(); 2];
    for _ in 0..30 {
        let p = map_point(coords, xi[0], xi[1]);
        let r = [p[0] - point[0], p[1] - point[1]];
        let j = jacobian(coords, xi[0], xi[1]);
        let det = det2(&j);
        if det.abs() <= T::min_positive_value() {
            return None;
        }
        let d0 = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let d1 = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        xi[0] -= d0;
        xi[1] -= d1;
        if d0.abs().max(d1.abs()) < tol {
            return Some(xi);
        }
        if !xi[0].is_finite() || !xi[1].is_finite() {
            return None;
        }
    }
    None
}
