//! Systems that are linear in the isotropic stiffness coordinates `(C11, C12)`.

use super::{check_len, isotropic_basis, q4, FemError, PartitionedStiffness};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::mesh::{DofPartition, DofSlot, Mesh};
use crate::Real;

/// `A_S` (free rows) and `Ā_S` (prescribed rows) with
/// `A_S κ = K(κ) u + K̄(κ) ū` and `Ā_S κ = K̄ᵀ(κ) u + K̿(κ) ū`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMatrices<T> {
    pub free: DenseMatrix<T>,
    pub prescribed: DenseMatrix<T>,
}

/// Element-wise evaluation of the internal-force sensitivities.
pub fn assemble_parameter_matrices<T: Real>(
    mesh: &Mesh<T>,
    part: &DofPartition,
    u: &[T],
    prescribed: &[T],
) -> Result<ParameterMatrices<T>, FemError> {
    check_len("free displacements", part.n_free(), u.len())?;
    check_len(
        "prescribed displacements",
        part.n_prescribed(),
        prescribed.len(),
    )?;
    let global = part.scatter(u, prescribed);
    let basis = isotropic_basis::<T>();
    let t = mesh.thickness();
    let mut free = DenseMatrix::zeros(part.n_free(), 2);
    let mut fixed = DenseMatrix::zeros(part.n_prescribed(), 2);

    for e in 0..mesh.elements().len() {
        let coords = mesh.element_coords(e);
        let dofs = mesh.element_dofs(e);
        let ue: [T; 8] = dofs.map(|g| global[g]);
        let mut ae = [[T::zero(); 2]; 8];
        for [xi, eta] in q4::gauss_points::<T>() {
            let (grads, det) = q4::physical_gradients(&coords, xi, eta);
            if !(det > T::zero()) {
                return Err(FemError::Degenerate {
                    element: e,
                    det: det.to_f64_lossy(),
                });
            }
            let b = q4::strain_matrix(&grads);
            let strain: [T; 3] = std::array::from_fn(|i| (0..8).map(|j| b[i][j] * ue[j]).sum());
            for (k, c) in basis.iter().enumerate() {
                let stress: [T; 3] =
                    std::array::from_fn(|i| (0..3).map(|m| c[i][m] * strain[m]).sum());
                for (r, row) in ae.iter_mut().enumerate() {
                    row[k] += det * t * (0..3).map(|m| b[m][r] * stress[m]).sum::<T>();
                }
            }
        }
        for (r, &g) in dofs.iter().enumerate() {
            let target = match part.slot(g) {
                DofSlot::Free(i) => (&mut free, i),
                DofSlot::Prescribed(i) => (&mut fixed, i),
            };
            let (m, i) = target;
            for k in 0..2 {
                m[(i, k)] += ae[r][k];
            }
        }
    }
    Ok(ParameterMatrices {
        free,
        prescribed: fixed,
    })
}

/// Free dofs without applied load, the rows kept by the VFM and AAO systems.
pub fn zero_force_rows<T: Real>(mesh: &Mesh<T>, part: &DofPartition) -> Vec<usize> {
    part.applied_forces(mesh)
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_zero())
        .map(|(i, _)| i)
        .collect()
}

/// Overdetermined VFM system `A κ ≈ p̌_vec`.
#[derive(Debug, Clone, PartialEq)]
pub struct VfmSystem<T> {
    pub matrix: DenseMatrix<T>,
    pub rhs: Vec<T>,
    pub zero_force_rows: Vec<usize>,
}

/// Rows of `A_S` at unloaded free dofs plus the `√σ_r`-scaled resultant row.
#[allow(clippy::too_many_arguments)]
pub fn assemble_vfm_system<T: Real>(
    mesh: &Mesh<T>,
    part: &DofPartition,
    measured: &[T],
    prescribed: &[T],
    resultant: T,
    selection: &[T],
    resultant_weight: T,
) -> Result<VfmSystem<T>, FemError> {
    check_len("selection vector", part.n_prescribed(), selection.len())?;
    let pm = assemble_parameter_matrices(mesh, part, measured, prescribed)?;
    let rows = zero_force_rows(mesh, part);
    let scale = resultant_weight.sqrt();
    let resultant_row: Vec<T> = pm
        .prescribed
        .matvec_transpose(selection)
        .iter()
        .map(|&v| v * scale)
        .collect();
    let mut data: Vec<T> = pm.free.select_rows(&rows).as_slice().to_vec();
    data.extend(resultant_row);
    let matrix = DenseMatrix::from_row_major(rows.len() + 1, 2, data);
    let mut rhs = vec![T::zero(); rows.len()];
    rhs.push(scale * resultant);
    Ok(VfmSystem {
        matrix,
        rhs,
        zero_force_rows: rows,
    })
}

/// `K^fr`, `K̄^fr` and `p̌_vec` of the all-at-once physics residual
/// `K^fr u + K̄^fr ū − p̌_vec`.
#[derive(Debug, Clone, PartialEq)]
pub struct AaoMatrices<T> {
    pub free: CsrMatrix<T>,
    pub prescribed: CsrMatrix<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> AaoMatrices<T> {
    pub fn residual(&self, u: &[T], prescribed: &[T]) -> Vec<T> {
        let a = self.free.matvec(u);
        let b = self.prescribed.matvec(prescribed);
        a.iter()
            .zip(&b)
            .zip(&self.rhs)
            .map(|((&x, &y), &r)| x + y - r)
            .collect()
    }
}

pub fn assemble_aao_matrices<T: Real>(
    mesh: &Mesh<T>,
    part: &DofPartition,
    stiff: &PartitionedStiffness<T>,
    resultant: T,
    selection: &[T],
    resultant_weight: T,
) -> Result<AaoMatrices<T>, FemError> {
    check_len("selection vector", part.n_prescribed(), selection.len())?;
    let rows = zero_force_rows(mesh, part);
    let scale = resultant_weight.sqrt();
    let all_free: Vec<usize> = (0..part.n_free()).collect();
    let all_fixed: Vec<usize> = (0..part.n_prescribed()).collect();

    let mut free = stiff.free.submatrix(&rows, &all_free);
    let free_row = selected_row(&stiff.coupling, selection, scale);
    free.push_row(&free_row);

    let mut fixed = stiff.coupling.submatrix(&rows, &all_fixed);
    let fixed_row = selected_row(&stiff.prescribed, selection, scale);
    fixed.push_row(&fixed_row);

    let mut rhs = vec![T::zero(); rows.len()];
    rhs.push(scale * resultant);
    Ok(AaoMatrices {
        free,
        prescribed: fixed,
        rhs,
    })
}

/// Entries of `scale · (M m)` on the structural pattern, so that matrices
/// built for different stiffness terms share one sparsity pattern.
fn selected_row<T: Real>(m: &CsrMatrix<T>, selection: &[T], scale: T) -> Vec<(usize, T)> {
    (0..m.rows())
        .filter_map(|i| {
            let mut touched = false;
            let mut acc = T::zero();
            for (k, v) in m.row(i) {
                if !selection[k].is_zero() {
                    touched = true;
                    acc += v * selection[k];
                }
            }
            touched.then_some((i, acc * scale))
        })
        .collect()
}
