//! Virtual fields method with the finite-element test space: one linear
//! least-squares solve for `(C11, C12)` from measured displacements and the
//! force resultant.

use nalgebra::{DMatrix, DVector};

use super::{IdentifyError, ParameterVector};
use crate::fem::{assemble_vfm_system, VfmSystem};
use crate::identify::reduced::ElasticCoordinates;
use crate::materials::young_poisson_from_coefficients;
use crate::mesh::{Dof, DofPartition, Mesh};
use crate::synthetic::{Component, DataError, ObservationSet};
use crate::uq::identifiability_check;

/// Weight of the resultant row used by the benchmark.
pub const DEFAULT_RESULTANT_WEIGHT: f64 = 1e4;

/// Measured full-field state of one load step on the identification mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredStep {
    pub exp: usize,
    pub step: usize,
    /// Measured displacements on the free dofs, in partition order.
    pub free: Vec<f64>,
    /// Prescribed displacements from the boundary conditions.
    pub prescribed: Vec<f64>,
    pub resultant: f64,
    pub selection: Vec<f64>,
}

/// Splits full-field data into load steps on `mesh`. The resultant is the
/// `F1` row (or `F2` if no `F1` row exists) of each step.
pub fn measured_steps(
    mesh: &Mesh<f64>,
    part: &DofPartition,
    data: &ObservationSet,
) -> Result<Vec<MeasuredStep>, DataError> {
    let prescribed = part.prescribed_values(mesh);
    data.load_steps()
        .into_iter()
        .map(|(exp, step)| {
            let nodal = data.nodal_displacements(exp, step, mesh.n_nodes())?;
            let global: Vec<f64> = nodal.iter().flat_map(|u| *u).collect();
            let (resultant, dof) = match data.resultant(exp, step, Component::F1) {
                Some(f) => (f, Dof::X),
                None => match data.resultant(exp, step, Component::F2) {
                    Some(f) => (f, Dof::Y),
                    None => {
                        return Err(DataError::Coverage {
                            exp,
                            step,
                            point: 0,
                            comp: Component::F1,
                        })
                    }
                },
            };
            Ok(MeasuredStep {
                exp,
                step,
                free: part.gather_free(&global),
                prescribed: prescribed.clone(),
                resultant,
                selection: part.selection(dof),
            })
        })
        .collect()
}

pub fn step_system(
    mesh: &Mesh<f64>,
    part: &DofPartition,
    step: &MeasuredStep,
    resultant_weight: f64,
) -> Result<VfmSystem<f64>, IdentifyError> {
    Ok(assemble_vfm_system(
        mesh,
        part,
        &step.free,
        &step.prescribed,
        step.resultant,
        &step.selection,
        resultant_weight,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VfmResult {
    /// `(C11, C12)` averaged over load steps.
    pub coefficients: [f64; 2],
    /// `(E, ν)` from the averaged coefficients.
    pub parameters: ParameterVector,
    /// Least-squares residual norm `‖A κ − p̌_vec‖`, summed in quadrature
    /// over steps.
    pub residual_norm: f64,
    pub per_step: Vec<[f64; 2]>,
}

/// Normal-equation solution `(AᵀA)⁻¹ Aᵀ p̌_vec` of one VFM system.
pub fn solve_system(system: &VfmSystem<f64>) -> Result<([f64; 2], f64), IdentifyError> {
    let a = DMatrix::from_row_slice(system.matrix.rows(), 2, system.matrix.as_slice());
    let b = DVector::from_column_slice(&system.rhs);
    let normal = a.tr_mul(&a);
    let check = identifiability_check(&normal, 1e-12);
    if !check.is_identifiable() {
        return Err(IdentifyError::Identifiability(format!(
            "VFM normal matrix has eigenvalue ratio {:e}; the deformation does not activate both moduli",
            check.eigen_ratio
        )));
    }
    let kappa = normal
        .cholesky()
        .ok_or_else(|| {
            IdentifyError::Identifiability("VFM normal matrix is not positive definite".into())
        })?
        .solve(&a.tr_mul(&b));
    let res = (&a * &kappa - &b).norm();
    Ok(([kappa[0], kappa[1]], res))
}

pub fn solve_vfm(
    mesh: &Mesh<f64>,
    part: &DofPartition,
    data: &ObservationSet,
    resultant_weight: f64,
) -> Result<VfmResult, IdentifyError> {
    let steps = measured_steps(mesh, part, data)?;
    if steps.is_empty() {
        return Err(DataError::Empty.into());
    }
    let mut per_step = Vec::with_capacity(steps.len());
    let mut res2 = 0.0;
    for s in &steps {
        let (k, r) = solve_system(&step_system(mesh, part, s, resultant_weight)?)?;
        per_step.push(k);
        res2 += r * r;
    }
    let n = per_step.len() as f64;
    let coefficients = [0, 1].map(|i| per_step.iter().map(|k| k[i]).sum::<f64>() / n);
    let (e, nu) = young_poisson_from_coefficients(coefficients[0], coefficients[1]);
    Ok(VfmResult {
        coefficients,
        parameters: ParameterVector::new(
            ElasticCoordinates::YoungPoisson.parameters(),
            vec![e, nu],
        )?,
        residual_norm: res2.sqrt(),
        per_step,
    })
}

/// `½ ‖A(d) κ − p̌_vec‖²` summed over load steps, with `κ = (C11, C12)`.
pub fn equilibrium_gap(
    mesh: &Mesh<f64>,
    part: &DofPartition,
    data: &ObservationSet,
    coefficients: [f64; 2],
    resultant_weight: f64,
) -> Result<f64, IdentifyError> {
    let mut gap = 0.0;
    for s in &measured_steps(mesh, part, data)? {
        let sys = step_system(mesh, part, s, resultant_weight)?;
        let ak = sys.matrix.matvec(&coefficients);
        gap += 0.5
            * ak.iter()
                .zip(&sys.rhs)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::identify::fixtures::{
        exact_data, plate, refined_data, relative, true_coefficients, E_TRUE, NU_TRUE,
    };
    use crate::linalg::DenseMatrix;
    use crate::rng;

    #[test]
    fn exact_data_recover_the_truth() {
        let (mesh, part) = plate(4, 3);
        let r = solve_vfm(&mesh, &part, &exact_data(&mesh), DEFAULT_RESULTANT_WEIGHT).unwrap();
        let truth = true_coefficients();
        for k in 0..2 {
            assert!(
                relative(r.coefficients[k], truth[k]) < 1e-8,
                "{:?}",
                r.coefficients
            );
        }
        assert!(relative(r.parameters.get("E").unwrap(), E_TRUE) < 1e-8);
        assert!(relative(r.parameters.get("nu").unwrap(), NU_TRUE) < 1e-8);
    }

    #[test]
    fn duplicated_rows_leave_the_solution_unchanged() {
        let (mesh, part, data) = refined_data(4, 3, 2, 0.0, 0);
        let step = &measured_steps(&mesh, &part, &data).unwrap()[0];
        let sys = step_system(&mesh, &part, step, DEFAULT_RESULTANT_WEIGHT).unwrap();
        let mut rows = sys.matrix.as_slice().to_vec();
        rows.extend_from_slice(sys.matrix.as_slice());
        let mut rhs = sys.rhs.clone();
        rhs.extend_from_slice(&sys.rhs);
        let doubled = VfmSystem {
            matrix: DenseMatrix::from_row_major(2 * sys.matrix.rows(), 2, rows),
            rhs,
            zero_force_rows: sys.zero_force_rows.clone(),
        };
        let (a, _) = solve_system(&sys).unwrap();
        let (b, _) = solve_system(&doubled).unwrap();
        for k in 0..2 {
            assert!(relative(b[k], a[k]) < 1e-12);
        }
    }

    #[test]
    fn dependent_columns_are_not_identifiable() {
        let sys = VfmSystem {
            matrix: DenseMatrix::from_row_major(3, 2, vec![1.0, 2.0, 2.0, 4.0, -1.0, -2.0]),
            rhs: vec![1.0, 2.0, 3.0],
            zero_force_rows: vec![0, 1],
        };
        assert!(matches!(
            solve_system(&sys),
            Err(IdentifyError::Identifiability(_))
        ));
    }

    #[test]
    fn exact_data_close_the_equilibrium_gap() {
        let (mesh, part) = plate(4, 3);
        let data = exact_data(&mesh);
        let gap = equilibrium_gap(
            &mesh,
            &part,
            &data,
            true_coefficients(),
            DEFAULT_RESULTANT_WEIGHT,
        )
        .unwrap();
        let f = data.resultant(1, 1, Component::F1).unwrap();
        let reference = 0.5 * DEFAULT_RESULTANT_WEIGHT * f * f;
        assert!(gap <= 1e-16 * reference, "gap {gap:e} vs {reference:e}");
    }

    #[test]
    fn the_solution_minimizes_the_gap() {
        let (mesh, part, data) = refined_data(4, 3, 2, 0.0, 0);
        let r = solve_vfm(&mesh, &part, &data, DEFAULT_RESULTANT_WEIGHT).unwrap();
        let best = equilibrium_gap(
            &mesh,
            &part,
            &data,
            r.coefficients,
            DEFAULT_RESULTANT_WEIGHT,
        )
        .unwrap();
        let mut rng = rng::seeded(7);
        for _ in 0..100 {
            let probe = r
                .coefficients
                .map(|c| c * (1.0 + rng.random_range(-0.2..0.2)));
            let gap =
                equilibrium_gap(&mesh, &part, &data, probe, DEFAULT_RESULTANT_WEIGHT).unwrap();
            assert!(
                best <= gap * (1.0 + 1e-12),
                "{best:e} > {gap:e} at {probe:?}"
            );
        }
    }

    #[test]
    fn gap_scales_quadratically_with_the_data() {
        let (mesh, part, data) = refined_data(4, 3, 2, 0.0, 0);
        let kappa = true_coefficients().map(|c| 1.1 * c);
        let base = equilibrium_gap(&mesh, &part, &data, kappa, DEFAULT_RESULTANT_WEIGHT).unwrap();
        let scaled = data.with_values(data.values().iter().map(|v| 3.0 * v).collect());
        let gap = equilibrium_gap(&mesh, &part, &scaled, kappa, DEFAULT_RESULTANT_WEIGHT).unwrap();
        assert!(relative(gap, 9.0 * base) < 1e-12);
    }
}
