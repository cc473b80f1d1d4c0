use super::{global_dof, Dof, Mesh};
use crate::linalg::reverse_cuthill_mckee;
use crate::Real;

/// Position of a global dof inside the partitioned vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofSlot {
    Free(usize),
    Prescribed(usize),
}

/// Split of the global dofs into free (`u`) and prescribed (`ū`) sets.
///
/// Free dofs follow a reverse Cuthill–McKee node ordering so that the free
/// stiffness block has a narrow profile. Prescribed dofs keep global order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofPartition {
    free: Vec<usize>,
    prescribed: Vec<usize>,
    slots: Vec<DofSlot>,
}

impl DofPartition {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        let n = mesh.n_dofs();
        let mut is_fixed = vec![false; n];
        for c in mesh.dirichlet() {
            is_fixed[global_dof(c.node, c.dof)] = true;
        }
        let node_order = reverse_cuthill_mckee(&mesh.node_adjacency());
        let free: Vec<usize> = node_order
            .iter()
            .flat_map(|&node| Dof::ALL.map(|d| global_dof(node, d)))
            .filter(|&g| !is_fixed[g])
            .collect();
        let prescribed: Vec<usize> = (0..n).filter(|&g| is_fixed[g]).collect();
        let mut slots = vec![DofSlot::Free(0); n];
        for (k, &g) in free.iter().enumerate() {
            slots[g] = DofSlot::Free(k);
        }
        for (k, &g) in prescribed.iter().enumerate() {
            slots[g] = DofSlot::Prescribed(k);
        }
        Self {
            free,
            prescribed,
            slots,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_prescribed(&self) -> usize {
        self.prescribed.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.slots.len()
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn prescribed(&self) -> &[usize] {
        &self.prescribed
    }

    pub fn slot(&self, global: usize) -> DofSlot {
        self.slots[global]
    }

    /// Restricts a global vector to the free dofs.
    pub fn gather_free<T: Copy>(&self, global: &[T]) -> Vec<T> {
        self.free.iter().map(|&g| global[g]).collect()
    }

    pub fn gather_prescribed<T: Copy>(&self, global: &[T]) -> Vec<T> {
        self.prescribed.iter().map(|&g| global[g]).collect()
    }

    /// Assembles a global vector from its free and prescribed parts.
    pub fn scatter<T: Real>(&self, free: &[T], prescribed: &[T]) -> Vec<T> {
        assert_eq!(free.len(), self.n_free());
        assert_eq!(prescribed.len(), self.n_prescribed());
        let mut out = vec![T::zero(); self.n_dofs()];
        for (&g, &v) in self.free.iter().zip(free) {
            out[g] = v;
        }
        for (&g, &v) in self.prescribed.iter().zip(prescribed) {
            out[g] = v;
        }
        out
    }

    /// Prescribed displacement values `ū` from the mesh's Dirichlet set.
    pub fn prescribed_values<T: Real>(&self, mesh: &Mesh<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_prescribed()];
        for c in mesh.dirichlet() {
            if let DofSlot::Prescribed(k) = self.slot(global_dof(c.node, c.dof)) {
                out[k] = c.value;
            }
        }
        out
    }

    /// Applied nodal forces `p̄` on the free dofs.
    pub fn applied_forces<T: Real>(&self, mesh: &Mesh<T>) -> Vec<T> {
        self.gather_free(&mesh.load_vector())
    }

    /// 0/1 selection vector `m` over prescribed dofs of one component.
    pub fn selection<T: Real>(&self, dof: Dof) -> Vec<T> {
        self.prescribed
            .iter()
            .map(|&g| {
                if g % 2 == dof.index() {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::NodalValue;

    #[test]
    fn free_and_prescribed_cover_all_dofs_once() {
        let mesh = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2, 3]],
            1.0,
            vec![
                NodalValue {
                    node: 0,
                    dof: Dof::X,
                    value: 0.0,
                },
                NodalValue {
                    node: 3,
                    dof: Dof::X,
                    value: 0.25,
                },
            ],
            vec![],
        )
        .unwrap();
        let p = DofPartition::new(&mesh);
        let mut all: Vec<usize> = p.free().iter().chain(p.prescribed()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        assert_eq!(p.prescribed(), &[0, 6]);
        assert_eq!(p.prescribed_values(&mesh), vec![0.0, 0.25]);
        let g: Vec<f64> = (0..8).map(f64::from).collect();
        assert_eq!(p.scatter(&p.gather_free(&g), &p.gather_prescribed(&g)), g);
    }
}
