//! Point location in a Q4 mesh and bilinear interpolation of nodal fields.

use super::DataError;
use crate::fem::q4;
use crate::mesh::Mesh;
use crate::Real;

/// Uniform bucket grid over element bounding boxes.
#[derive(Debug, Clone)]
pub struct PointLocator<'m, T> {
    mesh: &'m Mesh<T>,
    origin: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'m, T: Real> PointLocator<'m, T> {
    pub fn new(mesh: &'m Mesh<T>) -> Self {
        let pts: Vec<[f64; 2]> = mesh
            .nodes()
            .iter()
            .map(|p| [p[0].to_f64_lossy(), p[1].to_f64_lossy()])
            .collect();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &pts {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let n = (mesh.elements().len() as f64).sqrt().ceil().max(1.0) as usize;
        let dims = [n, n];
        let cell = [0, 1].map(|d| ((hi[d] - lo[d]) / n as f64).max(f64::MIN_POSITIVE));
        let mut buckets = vec![Vec::new(); n * n];
        for (e, conn) in mesh.elements().iter().enumerate() {
            let mut elo = [f64::INFINITY; 2];
            let mut ehi = [f64::NEG_INFINITY; 2];
            for &v in conn {
                for d in 0..2 {
                    elo[d] = elo[d].min(pts[v][d]);
                    ehi[d] = ehi[d].max(pts[v][d]);
                }
            }
            let a = [0, 1].map(|d| Self::index(elo[d], lo[d], cell[d], dims[d]));
            let b = [0, 1].map(|d| Self::index(ehi[d], lo[d], cell[d], dims[d]));
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    buckets[j * dims[0] + i].push(e);
                }
            }
        }
        Self {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    fn index(v: f64, lo: f64, h: f64, n: usize) -> usize {
        (((v - lo) / h).floor().max(0.0) as usize).min(n - 1)
    }

    /// Element containing `p` and the natural coordinates of `p` in it.
    pub fn locate(&self, p: [T; 2]) -> Option<(usize, [T; 2])> {
        let pf = [p[0].to_f64_lossy(), p[1].to_f64_lossy()];
        let extent = self.cell[0].max(self.cell[1]) * self.dims[0] as f64;
        let slack = 1e-9 * extent;
        let ia = Self::index(pf[0] - slack, self.origin[0], self.cell[0], self.dims[0]);
        let ib = Self::index(pf[0] + slack, self.origin[0], self.cell[0], self.dims[0]);
        let ja = Self::index(pf[1] - slack, self.origin[1], self.cell[1], self.dims[1]);
        let jb = Self::index(pf[1] + slack, self.origin[1], self.cell[1], self.dims[1]);
        let tol = T::lit(1e-10);
        let inside = T::one() + T::lit(1e-8);
        for i in ia..=ib {
            for j in ja..=jb {
                for &e in &self.buckets[j * self.dims[0] + i] {
                    let coords = self.mesh.element_coords(e);
                    if let Some(xi) = q4::inverse_map(&coords, p, tol) {
                        if xi[0].abs() <= inside && xi[1].abs() <= inside {
                            return Some((e, xi));
                        }
                    }
                }
            }
        }
        None
    }
}

/// Interpolates a global nodal displacement vector `[u1, v1, u2, v2, …]` at
/// arbitrary points. A point that coincides with a node returns that node's
/// value exactly.
pub fn interpolate_bilinear<T: Real>(
    mesh: &Mesh<T>,
    field: &[T],
    points: &[[T; 2]],
) -> Result<Vec<[T; 2]>, DataError> {
    let locator = PointLocator::new(mesh);
    points
        .iter()
        .map(|&p| interpolate_at(&locator, field, p))
        .collect()
}

pub(crate) fn interpolate_at<T: Real>(
    locator: &PointLocator<'_, T>,
    field: &[T],
    p: [T; 2],
) -> Result<[T; 2], DataError> {
    let mesh = locator.mesh;
    let (e, xi) = locator.locate(p).ok_or(DataError::Unlocatable {
        x: p[0].to_f64_lossy(),
        y: p[1].to_f64_lossy(),
    })?;
    let conn = mesh.elements()[e];
    let coords = mesh.element_coords(e);
    let scale = coords
        .iter()
        .map(|c| (c[0] - coords[0][0]).abs().max((c[1] - coords[0][1]).abs()))
        .fold(T::zero(), T::max);
    for (k, c) in coords.iter().enumerate() {
        if (c[0] - p[0]).abs() <= T::lit(1e-12) * scale
            && (c[1] - p[1]).abs() <= T::lit(1e-12) * scale
        {
            return Ok([field[2 * conn[k]], field[2 * conn[k] + 1]]);
        }
    }
    let n = q4::shape(xi[0], xi[1]);
    let mut out = [T::zero(); 2];
    for (a, &w) in conn.iter().zip(&n) {
        out[0] += w * field[2 * a];
        out[1] += w * field[2 * a + 1];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{plate_with_hole, PlateGeometry, PlateResolution};

    fn mesh() -> Mesh<f64> {
        plate_with_hole(
            &PlateGeometry::default(),
            PlateResolution { arc: 5, radial: 4 },
        )
        .unwrap()
    }

    #[test]
    fn node_queries_return_nodal_values() {
        let m = mesh();
        let field: Vec<f64> = (0..m.n_dofs()).map(|i| (i as f64 * 0.7).sin()).collect();
        let vals = interpolate_bilinear(&m, &field, m.nodes()).unwrap();
        for (i, v) in vals.iter().enumerate() {
            assert_eq!(v[0], field[2 * i]);
            assert_eq!(v[1], field[2 * i + 1]);
        }
    }

    #[test]
    fn linear_fields_are_reproduced() {
        let m = mesh();
        let field: Vec<f64> = m
            .nodes()
            .iter()
            .flat_map(|p| [0.3 + 2.0 * p[0], -1.0 + 0.5 * p[0] - 0.25 * p[1]])
            .collect();
        let pts = [[5.1, 0.7], [3.3, 3.3], [0.4, 8.8], [11.9, 9.9], [7.0, 2.0]];
        let vals = interpolate_bilinear(&m, &field, &pts).unwrap();
        for (p, v) in pts.iter().zip(&vals) {
            assert!((v[0] - (0.3 + 2.0 * p[0])).abs() < 1e-12);
            assert!((v[1] - (-1.0 + 0.5 * p[0] - 0.25 * p[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_anywhere() {
        let m = mesh();
        let field: Vec<f64> = (0..m.n_nodes()).flat_map(|_| [1.25, -3.0]).collect();
        let v = interpolate_bilinear(&m, &field, &[[6.0, 6.0]]).unwrap();
        assert!((v[0][0] - 1.25).abs() < 1e-14 && (v[0][1] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn points_in_the_hole_are_unlocatable() {
        let m = mesh();
        let field = vec![0.0; m.n_dofs()];
        let r = interpolate_bilinear(&m, &field, &[[1.0, 1.0]]);
        assert!(matches!(r, Err(DataError::Unlocatable { .. })));
    }
}
