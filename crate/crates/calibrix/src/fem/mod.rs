//! Plane-stress Q4 assembly, partitioned solves and the parameter-linear forms
//! of the stiffness operator.

pub mod q4;
mod system;

pub use system::{
    assemble_aao_matrices, assemble_parameter_matrices, assemble_vfm_system, AaoMatrices,
    ParameterMatrices, VfmSystem,
};

use thiserror::Error;

use crate::linalg::{CsrMatrix, LdlFactor, SkylineMatrix, SolverError, TripletBuilder};
use crate::mesh::{DofPartition, Mesh};
use crate::Real;

/// Plane-stress elasticity matrix in Voigt order `[11, 22, 12]` with engineering shear.
pub type Elasticity<T> = [[T; 3]; 3];

/// Elasticity matrices whose combination `C11·C₁ + C12·C₂` spans isotropic
/// plane stress with `C33 = (C11 − C12)/2`.
pub fn isotropic_basis<T: Real>() -> [Elasticity<T>; 2] {
    let (o, z, h) = (T::one(), T::zero(), T::lit(0.5));
    [
        [[o, z, z], [z, o, z], [z, z, h]],
        [[z, o, z], [o, z, z], [z, z, -h]],
    ]
}

pub fn isotropic_elasticity<T: Real>(c11: T, c12: T) -> Elasticity<T> {
    let [a, b] = isotropic_basis::<T>();
    std::array::from_fn(|i| std::array::from_fn(|j| c11 * a[i][j] + c12 * b[i][j]))
}

#[derive(Debug, Error)]
pub enum FemError {
    #[error("element {element} is degenerate: det J = {det:e}")]
    Degenerate { element: usize, det: f64 },
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("stiffness solve failed: {0}")]
    Solver(#[from] SolverError),
}

/// Element stiffness `kᵉ = Σ_gp w Bᵀ C B det J t` with 2×2 Gauss quadrature.
pub fn element_stiffness<T: Real>(
    mesh: &Mesh<T>,
    e: usize,
    c: &Elasticity<T>,
) -> Result<[[T; 8]; 8], FemError> {
    let coords = mesh.element_coords(e);
    let t = mesh.thickness();
    let mut k = [[T::zero(); 8]; 8];
    for [xi, eta] in q4::gauss_points::<T>() {
        let (grads, det) = q4::physical_gradients(&coords, xi, eta);
        if !(det > T::zero()) {
            return Err(FemError::Degenerate {
                element: e,
                det: det.to_f64_lossy(),
            });
        }
        let b = q4::strain_matrix(&grads);
        let scale = det * t;
        let mut cb = [[T::zero(); 8]; 3];
        for i in 0..3 {
            for j in 0..8 {
                cb[i][j] = (0..3).map(|m| c[i][m] * b[m][j]).sum();
            }
        }
        for (r, row) in k.iter_mut().enumerate() {
            for (s, v) in row.iter_mut().enumerate() {
                *v += scale * (0..3).map(|m| b[m][r] * cb[m][s]).sum::<T>();
            }
        }
    }
    Ok(k)
}

/// Global stiffness over all dofs, in global numbering.
pub fn assemble_global<T: Real>(
    mesh: &Mesh<T>,
    c: &Elasticity<T>,
) -> Result<CsrMatrix<T>, FemError> {
    let n = mesh.n_dofs();
    let mut b = TripletBuilder::with_capacity(n, n, 64 * mesh.elements().len());
    for e in 0..mesh.elements().len() {
        let ke = element_stiffness(mesh, e, c)?;
        let dofs = mesh.element_dofs(e);
        for (r, &gr) in dofs.iter().enumerate() {
            for (s, &gs) in dofs.iter().enumerate() {
                b.push(gr, gs, ke[r][s]);
            }
        }
    }
    Ok(b.build())
}

/// Blocks `K` (free–free), `K̄` (free–prescribed) and `K̿` (prescribed–prescribed).
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedStiffness<T> {
    pub free: CsrMatrix<T>,
    pub coupling: CsrMatrix<T>,
    pub prescribed: CsrMatrix<T>,
}

impl<T: Real> PartitionedStiffness<T> {
    pub fn from_global(global: &CsrMatrix<T>, part: &DofPartition) -> Self {
        Self {
            free: global.submatrix(part.free(), part.free()),
            coupling: global.submatrix(part.free(), part.prescribed()),
            prescribed: global.submatrix(part.prescribed(), part.prescribed()),
        }
    }

    pub fn factor(&self) -> Result<LdlFactor<T>, FemError> {
        Ok(SkylineMatrix::from_csr(&self.free)?.factor()?)
    }
}

pub fn assemble_stiffness<T: Real>(
    mesh: &Mesh<T>,
    part: &DofPartition,
    c: &Elasticity<T>,
) -> Result<PartitionedStiffness<T>, FemError> {
    Ok(PartitionedStiffness::from_global(
        &assemble_global(mesh, c)?,
        part,
    ))
}

/// Stiffness blocks for the two isotropic basis matrices, so that
/// `K(C11, C12)` is a two-term sparse combination.
#[derive(Debug, Clone)]
pub struct StiffnessBasis<T> {
    terms: [PartitionedStiffness<T>; 2],
}

impl<T: Real> StiffnessBasis<T> {
    pub fn new(mesh: &Mesh<T>, part: &DofPartition) -> Result<Self, FemError> {
        let [a, b] = isotropic_basis::<T>();
        Ok(Self {
            terms: [
                assemble_stiffness(mesh, part, &a)?,
                assemble_stiffness(mesh, part, &b)?,
            ],
        })
    }

    pub fn term(&self, k: usize) -> &PartitionedStiffness<T> {
        &self.terms[k]
    }

    pub fn at(&self, c11: T, c12: T) -> PartitionedStiffness<T> {
        let [a, b] = &self.terms;
        PartitionedStiffness {
            free: CsrMatrix::combine(&[(c11, &a.free), (c12, &b.free)]),
            coupling: CsrMatrix::combine(&[(c11, &a.coupling), (c12, &b.coupling)]),
            prescribed: CsrMatrix::combine(&[(c11, &a.prescribed), (c12, &b.prescribed)]),
        }
    }
}

/// Free displacements `u` and reactions `p` on the prescribed dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution<T> {
    pub displacements: Vec<T>,
    pub reactions: Vec<T>,
}

/// Solves `K u = p̄ − K̄ ū` and recovers `p = K̄ᵀ u + K̿ ū`.
pub fn solve_linear<T: Real>(
    stiff: &PartitionedStiffness<T>,
    applied: &[T],
    prescribed: &[T],
) -> Result<LinearSolution<T>, FemError> {
    check_len("applied forces", stiff.free.rows(), applied.len())?;
    check_len(
        "prescribed displacements",
        stiff.prescribed.rows(),
        prescribed.len(),
    )?;
    let coupled = stiff.coupling.matvec(prescribed);
    let rhs: Vec<T> = applied.iter().zip(&coupled).map(|(&f, &k)| f - k).collect();
    let u = stiff.factor()?.solve(&rhs)?;
    let mut p = stiff.coupling.matvec_transpose(&u);
    for (pi, q) in p.iter_mut().zip(stiff.prescribed.matvec(prescribed)) {
        *pi += q;
    }
    Ok(LinearSolution {
        displacements: u,
        reactions: p,
    })
}

/// Force resultant `mᵀ p`.
pub fn reaction_resultant<T: Real>(reactions: &[T], selection: &[T]) -> Result<T, FemError> {
    check_len("selection vector", reactions.len(), selection.len())?;
    Ok(crate::linalg::dot(reactions, selection))
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), FemError> {
    if expected == got {
        Ok(())
    } else {
        Err(FemError::Dimension {
            what,
            expected,
            got,
        })
    }
}
