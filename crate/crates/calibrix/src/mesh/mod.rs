//! Plane-stress Q4 meshes, boundary conditions and the degree-of-freedom partition.

mod io;
mod partition;
mod plate;

pub use partition::{DofPartition, DofSlot};
pub use plate::{plate_with_hole, PlateGeometry, PlateResolution};

use std::collections::HashSet;

use thiserror::Error;

use crate::fem::q4;
use crate::Real;

/// Displacement component at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dof {
    X,
    Y,
}

impl Dof {
    pub const ALL: [Dof; 2] = [Dof::X, Dof::Y];

    pub fn index(self) -> usize {
        match self {
            Dof::X => 0,
            Dof::Y => 1,
        }
    }

    /// Parses the 1-based component number used in mesh files.
    pub fn from_number(n: usize) -> Option<Self> {
        match n {
            1 => Some(Dof::X),
            2 => Some(Dof::Y),
            _ => None,
        }
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }
}

/// A value attached to one nodal degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalValue<T> {
    pub node: usize,
    pub dof: Dof,
    pub value: T,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("element {element} references missing node {node}")]
    InvalidNode { element: usize, node: usize },
    #[error("element {element} is degenerate: det J = {det:e} at a Gauss point")]
    Degenerate { element: usize, det: f64 },
    #[error("node {node} dof {dof} appears in more than one boundary condition")]
    DuplicateCondition { node: usize, dof: usize },
    #[error("boundary condition references missing node {node}")]
    InvalidConditionNode { node: usize },
    #[error("thickness must be positive, got {0}")]
    Thickness(f64),
    #[error("mesh has no elements")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Plane-stress mesh of bilinear quadrilaterals.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    nodes: Vec<[T; 2]>,
    elements: Vec<[usize; 4]>,
    thickness: T,
    dirichlet: Vec<NodalValue<T>>,
    neumann: Vec<NodalValue<T>>,
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh after checking connectivity, element orientation and
    /// boundary-condition uniqueness.
    pub fn new(
        nodes: Vec<[T; 2]>,
        elements: Vec<[usize; 4]>,
        thickness: T,
        dirichlet: Vec<NodalValue<T>>,
        neumann: Vec<NodalValue<T>>,
    ) -> Result<Self, MeshError> {
        if elements.is_empty() {
            return Err(MeshError::Empty);
        }
        if !(thickness > T::zero()) {
            return Err(MeshError::Thickness(thickness.to_f64_lossy()));
        }
        let mesh = Self {
            nodes,
            elements,
            thickness,
            dirichlet,
            neumann,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked(
        nodes: Vec<[T; 2]>,
        elements: Vec<[usize; 4]>,
        thickness: T,
    ) -> Self {
        Self {
            nodes,
            elements,
            thickness,
            dirichlet: vec![],
            neumann: vec![],
        }
    }

    fn validate(&self) -> Result<(), MeshError> {
        for (e, conn) in self.elements.iter().enumerate() {
            if let Some(&node) = conn.iter().find(|&&n| n >= self.nodes.len()) {
                return Err(MeshError::InvalidNode { element: e, node });
            }
            let coords = self.element_coords(e);
            for [xi, eta] in q4::gauss_points::<T>() {
                let det = q4::det2(&q4::jacobian(&coords, xi, eta));
                if !(det > T::zero()) {
                    return Err(MeshError::Degenerate {
                        element: e,
                        det: det.to_f64_lossy(),
                    });
                }
            }
        }
        let mut seen = HashSet::new();
        for c in self.dirichlet.iter().chain(&self.neumann) {
            if c.node >= self.nodes.len() {
                return Err(MeshError::InvalidConditionNode { node: c.node });
            }
            if !seen.insert((c.node, c.dof)) {
                return Err(MeshError::DuplicateCondition {
                    node: c.node,
                    dof: c.dof.number(),
                });
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn thickness(&self) -> T {
        self.thickness
    }

    pub fn dirichlet(&self) -> &[NodalValue<T>] {
        &self.dirichlet
    }

    pub fn neumann(&self) -> &[NodalValue<T>] {
        &self.neumann
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn element_coords(&self, e: usize) -> [[T; 2]; 4] {
        self.elements[e].map(|n| self.nodes[n])
    }

    /// Global dof indices `[2n₁, 2n₁+1, …]` of an element.
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let c = self.elements[e];
        std::array::from_fn(|k| 2 * c[k / 2] + k % 2)
    }

    /// Global applied-force vector assembled from the Neumann set.
    pub fn load_vector(&self) -> Vec<T> {
        let mut f = vec![T::zero(); self.n_dofs()];
        for c in &self.neumann {
            f[global_dof(c.node, c.dof)] += c.value;
        }
        f
    }

    /// Returns a copy with all Neumann values multiplied by `factor`.
    pub fn with_scaled_loads(&self, factor: T) -> Self {
        let mut m = self.clone();
        m.neumann.iter_mut().for_each(|c| c.value *= factor);
        m
    }

    /// Node adjacency through shared elements.
    pub fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for conn in &self.elements {
            for &a in conn {
                for &b in conn {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

pub fn global_dof(node: usize, dof: Dof) -> usize {
    2 * node + dof.index()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(order: [usize; 4]) -> Result<Mesh<f64>, MeshError> {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![order],
            1.0,
            vec![],
            vec![],
        )
    }

    #[test]
    fn clockwise_element_is_rejected() {
        assert!(square([0, 1, 2, 3]).is_ok());
        assert!(matches!(
            square([0, 3, 2, 1]),
            Err(MeshError::Degenerate { element: 0, .. })
        ));
    }

    #[test]
    fn missing_node_is_rejected() {
        assert!(matches!(
            square([0, 1, 2, 7]),
            Err(MeshError::InvalidNode {
                element: 0,
                node: 7
            })
        ));
    }

    #[test]
    fn overlapping_conditions_are_rejected() {
        let c = NodalValue {
            node: 0,
            dof: Dof::X,
            value: 0.0,
        };
        let r = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2, 3]],
            1.0,
            vec![c],
            vec![c],
        );
        assert!(matches!(
            r,
            Err(MeshError::DuplicateCondition { node: 0, dof: 1 })
        ));
    }
}
