use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ForwardModel;
use crate::fem::{
    assemble_parameter_matrices, solve_linear, LinearSolution, PartitionedStiffness, StiffnessBasis,
};
use crate::identify::{check_len, IdentifyError, Parameter};
use crate::materials::plane_stress_coefficients;
use crate::mesh::{global_dof, Dof, DofPartition, DofSlot, Mesh};
use crate::synthetic::{Component, DataError, ObservationSet};

/// Coordinates in which the isotropic plane-stress stiffness is identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElasticCoordinates {
    /// `(E, ν)`.
    YoungPoisson,
    /// `(C11, C12)`, in which the stiffness is linear.
    Coefficients,
}

impl ElasticCoordinates {
    pub fn parameters(self) -> Vec<Parameter> {
        match self {
            ElasticCoordinates::YoungPoisson => vec![
                Parameter::new("E", "N/mm^2").bounded(1e3, 1e7),
                Parameter::new("nu", "-").bounded(-0.95, 0.49),
            ],
            ElasticCoordinates::Coefficients => vec![
                Parameter::new("C11", "N/mm^2").bounded(1e3, 1e7),
                Parameter::new("C12", "N/mm^2").bounded(-1e7, 1e7),
            ],
        }
    }

    /// `(C11, C12)` at `κ`.
    pub fn coefficients(self, kappa: &[f64]) -> (f64, f64) {
        match self {
            ElasticCoordinates::YoungPoisson => plane_stress_coefficients(kappa[0], kappa[1]),
            ElasticCoordinates::Coefficients => (kappa[0], kappa[1]),
        }
    }

    /// `∂(C11, C12)/∂κ`.
    pub fn coefficient_jacobian(self, kappa: &[f64]) -> DMatrix<f64> {
        match self {
            ElasticCoordinates::YoungPoisson => {
                let (e, nu) = (kappa[0], kappa[1]);
                let q = 1.0 - nu * nu;
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        1.0 / q,
                        2.0 * nu * e / (q * q),
                        nu / q,
                        e * (1.0 + nu * nu) / (q * q),
                    ],
                )
            }
            ElasticCoordinates::Coefficients => DMatrix::identity(2, 2),
        }
    }
}

/// Linear-elastic full-field model: one FE solve per evaluation, observed at
/// the nodal displacement rows of a data layout.
#[derive(Debug, Clone)]
pub struct PlateModel {
    mesh: Mesh<f64>,
    part: DofPartition,
    basis: StiffnessBasis<f64>,
    applied: Vec<f64>,
    prescribed: Vec<f64>,
    coords: ElasticCoordinates,
    params: Vec<Parameter>,
    rows: Vec<usize>,
}

impl PlateModel {
    /// `layout` must hold only `u1`/`u2` rows of mesh nodes.
    pub fn new(
        mesh: Mesh<f64>,
        layout: &ObservationSet,
        coords: ElasticCoordinates,
    ) -> Result<Self, IdentifyError> {
        let part = DofPartition::new(&mesh);
        let basis = StiffnessBasis::new(&mesh, &part)?;
        let rows = layout
            .keys()
            .iter()
            .map(|k| {
                let dof = match k.comp {
                    Component::U1 => Dof::X,
                    Component::U2 => Dof::Y,
                    other => {
                        return Err(DataError::Csv(format!(
                            "plate model cannot observe `{other}`"
                        )));
                    }
                };
                if k.point == 0 || k.point > mesh.n_nodes() {
                    return Err(DataError::Coverage {
                        exp: k.exp,
                        step: k.step,
                        point: k.point,
                        comp: k.comp,
                    });
                }
                Ok(global_dof(k.point - 1, dof))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            applied: part.applied_forces(&mesh),
            prescribed: part.prescribed_values(&mesh),
            params: coords.parameters(),
            mesh,
            part,
            basis,
            coords,
            rows,
        })
    }

    pub fn with_bounds(mut self, params: Vec<Parameter>) -> Result<Self, IdentifyError> {
        check_len("parameters", 2, params.len())?;
        self.params = params;
        Ok(self)
    }

    pub fn mesh(&self) -> &Mesh<f64> {
        &self.mesh
    }

    pub fn partition(&self) -> &DofPartition {
        &self.part
    }

    pub fn coordinates(&self) -> ElasticCoordinates {
        self.coords
    }

    pub fn stiffness(&self, kappa: &[f64]) -> PartitionedStiffness<f64> {
        let (c11, c12) = self.coords.coefficients(kappa);
        self.basis.at(c11, c12)
    }

    pub fn solve(&self, kappa: &[f64]) -> Result<LinearSolution<f64>, IdentifyError> {
        check_len("parameter vector", 2, kappa.len())?;
        solve_linear(&self.stiffness(kappa), &self.applied, &self.prescribed).map_err(|e| {
            IdentifyError::Forward {
                kappa: kappa.to_vec(),
                message: e.to_string(),
            }
        })
    }

    /// Observed rows of a solution.
    pub fn observe(&self, free: &[f64]) -> Vec<f64> {
        let global = self.part.scatter(free, &self.prescribed);
        self.rows.iter().map(|&g| global[g]).collect()
    }

    /// Sensitivities from the parameter-linear form: differentiating
    /// `K(κ) u + K̄(κ) ū = p̄` gives `∂u/∂(C11, C12) = −K⁻¹ A_S(u, ū)`.
    pub fn analytic_jacobian(&self, kappa: &[f64]) -> Result<DMatrix<f64>, IdentifyError> {
        let stiff = self.stiffness(kappa);
        let factor = stiff.factor()?;
        let coupled = stiff.coupling.matvec(&self.prescribed);
        let rhs: Vec<f64> = self
            .applied
            .iter()
            .zip(&coupled)
            .map(|(f, k)| f - k)
            .collect();
        let u = factor.solve(&rhs)?;
        let a = assemble_parameter_matrices(&self.mesh, &self.part, &u, &self.prescribed)?;
        let zero = vec![0.0; self.part.n_prescribed()];
        let mut dc = DMatrix::zeros(self.rows.len(), 2);
        for k in 0..2 {
            let col: Vec<f64> = a.free.column(k).iter().map(|v| -v).collect();
            let du = factor.solve(&col)?;
            let global = self.part.scatter(&du, &zero);
            for (r, &g) in self.rows.iter().enumerate() {
                dc[(r, k)] = global[g];
            }
        }
        Ok(dc * self.coords.coefficient_jacobian(kappa))
    }

    /// Consistency of the Lagrange-multiplier form of the reduced optimality
    /// conditions at `κ`.
    ///
    /// The state equation is solved, the multiplier follows from
    /// `Kᵀ Λ = −Oᵀ Wᵀ W r`, and the parameter condition `A_S(u, ū)ᵀ Λ = 0`
    /// is evaluated. Each component is returned relative to
    /// `‖A_S column‖ ‖Λ‖`, so the value is a cosine.
    pub fn multiplier_residual(
        &self,
        data: &ObservationSet,
        kappa: &[f64],
    ) -> Result<f64, IdentifyError> {
        check_len("observations", self.rows.len(), data.len())?;
        let stiff = self.stiffness(kappa);
        let factor = stiff.factor()?;
        let coupled = stiff.coupling.matvec(&self.prescribed);
        let rhs: Vec<f64> = self
            .applied
            .iter()
            .zip(&coupled)
            .map(|(f, k)| f - k)
            .collect();
        let u = factor.solve(&rhs)?;
        let s = self.observe(&u);
        let mut gradient = vec![0.0; self.part.n_free()];
        for (r, &g) in self.rows.iter().enumerate() {
            if let DofSlot::Free(i) = self.part.slot(g) {
                let w = data.weights()[r];
                gradient[i] += w * w * (s[r] - data.values()[r]);
            }
        }
        let neg: Vec<f64> = gradient.iter().map(|g| -g).collect();
        let multiplier = factor.solve(&neg)?;
        let a = assemble_parameter_matrices(&self.mesh, &self.part, &u, &self.prescribed)?;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lam = norm(&multiplier);
        if lam == 0.0 {
            return Ok(0.0);
        }
        Ok((0..2)
            .map(|k| {
                let col = a.free.column(k);
                let dot: f64 = col.iter().zip(&multiplier).map(|(a, l)| a * l).sum();
                dot.abs() / (norm(&col) * lam)
            })
            .fold(0.0, f64::max))
    }
}

impl ForwardModel for PlateModel {
    fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    fn n_outputs(&self) -> usize {
        self.rows.len()
    }

    fn evaluate(&self, kappa: &[f64]) -> Result<Vec<f64>, IdentifyError> {
        Ok(self.observe(&self.solve(kappa)?.displacements))
    }
}
