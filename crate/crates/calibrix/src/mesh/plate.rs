//! Structured quarter model of a plate with a central circular hole.

use super::{Dof, Mesh, MeshError, NodalValue};
use crate::Real;

/// Quarter-plate geometry in mm; the hole is centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateGeometry {
    pub width: f64,
    pub height: f64,
    pub radius: f64,
    pub thickness: f64,
    /// Total tensile force on the edge `x = width`, in N.
    pub load: f64,
}

impl Default for PlateGeometry {
    fn default() -> Self {
        Self {
            width: 12.0,
            height: 10.0,
            radius: 3.0,
            thickness: 1.0,
            load: 1500.0,
        }
    }
}

/// Element counts of the two mapped blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlateResolution {
    /// Elements along the hole per block.
    pub arc: usize,
    /// Elements from the hole to the outer edge.
    pub radial: usize,
}

impl PlateResolution {
    /// About 3000 elements.
    pub const COARSE: Self = Self {
        arc: 40,
        radial: 37,
    };

    /// Uniform refinement by an integer factor; coarse nodes stay mesh nodes.
    pub fn refined(self, factor: usize) -> Self {
        Self {
            arc: self.arc * factor,
            radial: self.radial * factor,
        }
    }
}

/// Generates the quarter plate.
///
/// Two blocks split along the diagonal to the corner `(width, height)`: the
/// first maps the hole arc onto the loaded edge, the second onto the top
/// edge. Symmetry edges get zero normal displacement and the edge load is
/// lumped consistently (half weight at the edge ends).
pub fn plate_with_hole<T: Real>(
    geom: &PlateGeometry,
    res: PlateResolution,
) -> Result<Mesh<T>, MeshError> {
    let PlateGeometry {
        width: w,
        height: h,
        radius: r,
        ..
    } = *geom;
    let na = res.arc;
    let nr = res.radial;
    let columns = 2 * na + 1;
    let corner_angle = h.atan2(w);
    let half_pi = std::f64::consts::FRAC_PI_2;

    let mut nodes = Vec::with_capacity(columns * (nr + 1));
    for j in 0..=nr {
        let t = j as f64 / nr as f64;
        for a in 0..columns {
            let (inner, outer) = if a <= na {
                let s = a as f64 / na as f64;
                let theta = corner_angle * s;
                ([r * theta.cos(), r * theta.sin()], [w, h * s])
            } else {
                let s = (a - na) as f64 / na as f64;
                let theta = corner_angle + (half_pi - corner_angle) * s;
                ([r * theta.cos(), r * theta.sin()], [w * (1.0 - s), h])
            };
            let mut x = (1.0 - t) * inner[0] + t * outer[0];
            let y = (1.0 - t) * inner[1] + t * outer[1];
            if a == columns - 1 {
                x = 0.0;
            }
            nodes.push([T::lit(x), T::lit(if a == 0 { 0.0 } else { y })]);
        }
    }
    let id = |a: usize, j: usize| j * columns + a;

    let mut elements = Vec::with_capacity(2 * na * nr);
    for j in 0..nr {
        for a in 0..columns - 1 {
            elements.push([id(a, j), id(a, j + 1), id(a + 1, j + 1), id(a + 1, j)]);
        }
    }

    let zero = T::zero();
    let mut dirichlet = Vec::with_capacity(2 * (nr + 1));
    for j in 0..=nr {
        dirichlet.push(NodalValue {
            node: id(0, j),
            dof: Dof::Y,
            value: zero,
        });
    }
    for j in 0..=nr {
        dirichlet.push(NodalValue {
            node: id(columns - 1, j),
            dof: Dof::X,
            value: zero,
        });
    }

    let per_segment = geom.load / na as f64;
    let neumann = (0..=na)
        .map(|a| {
            let weight = if a == 0 || a == na { 0.5 } else { 1.0 };
            NodalValue {
                node: id(a, nr),
                dof: Dof::X,
                value: T::lit(weight * per_segment),
            }
        })
        .collect();

    Mesh::new(nodes, elements, T::lit(geom.thickness), dirichlet, neumann)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_mesh_size() {
        let m: Mesh<f64> =
            plate_with_hole(&PlateGeometry::default(), PlateResolution::COARSE).unwrap();
        assert_eq!(m.elements().len(), 2960);
        assert_eq!(m.n_nodes(), 81 * 38);
        let total: f64 = m.neumann().iter().map(|c| c.value).sum();
        assert!((total - 1500.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_nodes_are_fine_nodes() {
        let g = PlateGeometry::default();
        let coarse: Mesh<f64> = plate_with_hole(&g, PlateResolution { arc: 3, radial: 2 }).unwrap();
        let fine: Mesh<f64> =
            plate_with_hole(&g, PlateResolution { arc: 3, radial: 2 }.refined(2)).unwrap();
        for p in coarse.nodes() {
            let hit = fine
                .nodes()
                .iter()
                .any(|q| (p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
            assert!(hit, "coarse node {p:?} missing from fine mesh");
        }
    }

    #[test]
    fn nodes_stay_in_the_quarter_domain() {
        let g = PlateGeometry::default();
        let m: Mesh<f64> = plate_with_hole(&g, PlateResolution { arc: 6, radial: 5 }).unwrap();
        for p in m.nodes() {
            assert!(p[0] >= 0.0 && p[0] <= g.width + 1e-12);
            assert!(p[1] >= 0.0 && p[1] <= g.height + 1e-12);
            assert!(p[0].hypot(p[1]) >= g.radius - 1e-12);
        }
    }
}
