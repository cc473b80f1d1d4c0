//! All-at-once identification over the joint unknown `β = (u, κ)` for linear
//! elasticity with `κ = (C11, C12)`.
//!
//! Both formulations weigh the physics residual `F(u, κ) = A(u) κ − p̌_vec`
//! against a data term:
//!
//! - Euclidean data norm: `σ_s/2 ‖F‖² + σ_d/2 ‖u − d_u‖²`;
//! - stiffness semi-norm: `σ_s/2 ‖F‖² + σ_d/2 ‖K(κ)(u − d_u)‖²`;
//!
//! optionally plus `γ_S/2 ‖u − d_u‖² + γ_P/2 ‖κ − κ₀‖²`.

use serde::{Deserialize, Serialize};

use super::reduced::{ElasticCoordinates, LandweberOptions, StepRule, StopReason};
use super::vfm::measured_steps;
use super::{check_len, IdentifyError, ParameterVector};
use crate::fem::{assemble_aao_matrices, AaoMatrices, StiffnessBasis};
use crate::linalg::{dot, norm, power_iteration, CsrMatrix, LdlFactor, SkylineMatrix};
use crate::materials::young_poisson_from_coefficients;
use crate::mesh::{DofPartition, Mesh};
use crate::synthetic::ObservationSet;

/// Starting coefficients `(C11, C12)` in MPa.
pub const DEFAULT_INITIAL_COEFFICIENTS: [f64; 2] = [225_000.0, 65_000.0];

/// Stacked free displacements and elastic coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVector {
    pub state: Vec<f64>,
    pub parameters: [f64; 2],
}

impl JointVector {
    pub fn new(state: Vec<f64>, parameters: [f64; 2]) -> Self {
        Self { state, parameters }
    }

    pub fn n_state(&self) -> usize {
        self.state.len()
    }

    pub fn len(&self) -> usize {
        self.state.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[u; κ]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.state.iter().chain(&self.parameters).copied().collect()
    }

    pub fn from_stacked(v: &[f64], n_state: usize) -> Result<Self, IdentifyError> {
        check_len("joint vector", n_state + 2, v.len())?;
        Ok(Self {
            state: v[..n_state].to_vec(),
            parameters: [v[n_state], v[n_state + 1]],
        })
    }

    /// `self + t · direction`.
    pub fn moved(&self, t: f64, direction: &JointVector) -> Self {
        Self {
            state: self
                .state
                .iter()
                .zip(&direction.state)
                .map(|(a, b)| a + t * b)
                .collect(),
            parameters: [0, 1].map(|k| self.parameters[k] + t * direction.parameters[k]),
        }
    }

    fn is_finite(&self) -> bool {
        self.state
            .iter()
            .chain(&self.parameters)
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AaoFormulation {
    /// Euclidean distance of the state to the data.
    Fem,
    /// Distance measured in the `K(κ)` semi-norm.
    Vfm,
}

impl AaoFormulation {
    pub fn default_weights(self) -> AaoWeights {
        let sigma_d = match self {
            AaoFormulation::Fem => 1e-5,
            AaoFormulation::Vfm => 1e-10,
        };
        AaoWeights {
            sigma_d,
            ..AaoWeights::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AaoWeights {
    pub sigma_s: f64,
    pub sigma_d: f64,
    pub gamma_s: f64,
    pub gamma_p: f64,
}

impl Default for AaoWeights {
    fn default() -> Self {
        Self {
            sigma_s: 1.0,
            sigma_d: 1e-5,
            gamma_s: 0.0,
            gamma_p: 0.0,
        }
    }
}

impl AaoWeights {
    pub fn new(sigma_s: f64, sigma_d: f64) -> Self {
        Self {
            sigma_s,
            sigma_d,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), IdentifyError> {
        let positive = self.sigma_s > 0.0
            && self.sigma_d > 0.0
            && self.sigma_s.is_finite()
            && self.sigma_d.is_finite();
        let penalties = self.gamma_s >= 0.0
            && self.gamma_p >= 0.0
            && self.gamma_s.is_finite()
            && self.gamma_p.is_finite();
        if positive && penalties {
            Ok(())
        } else {
            Err(IdentifyError::Options(format!(
                "invalid all-at-once weights {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSolver {
    /// Gauss-Newton on the stacked residual; the state block is eliminated
    /// through `S = c K Kᵀ + τ I`.
    GaussNewton,
    /// Alternating exact minimization over `u` and `κ`.
    GaussSeidel,
    /// Gradient iteration using matrix-vector products only.
    Landweber,
}

/// Single-load-step physics residual `F(u, κ)` on the identification mesh.
#[derive(Debug, Clone)]
pub struct AaoProblem {
    terms: [AaoMatrices<f64>; 2],
    measured: Vec<f64>,
    prescribed: Vec<f64>,
}

impl AaoProblem {
    pub fn new(
        mesh: &Mesh<f64>,
        part: &DofPartition,
        data: &ObservationSet,
        resultant_weight: f64,
    ) -> Result<Self, IdentifyError> {
        let steps = measured_steps(mesh, part, data)?;
        let [step] = steps.as_slice() else {
            return Err(IdentifyError::Options(format!(
                "all-at-once solvers take exactly one load step, got {}",
                steps.len()
            )));
        };
        let basis = StiffnessBasis::new(mesh, part)?;
        let term = |k: usize| {
            assemble_aao_matrices(
                mesh,
                part,
                basis.term(k),
                step.resultant,
                &step.selection,
                resultant_weight,
            )
        };
        Ok(Self {
            terms: [term(0)?, term(1)?],
            measured: step.free.clone(),
            prescribed: step.prescribed.clone(),
        })
    }

    pub fn n_state(&self) -> usize {
        self.measured.len()
    }

    pub fn n_rows(&self) -> usize {
        self.terms[0].rhs.len()
    }

    /// Measured free displacements `d_u`.
    pub fn measured(&self) -> &[f64] {
        &self.measured
    }

    pub fn rhs(&self) -> &[f64] {
        &self.terms[0].rhs
    }

    /// `β₀ = (d_u, κ₀)`.
    pub fn initial_guess(&self, coefficients: [f64; 2]) -> JointVector {
        JointVector::new(self.measured.clone(), coefficients)
    }

    /// `K^fr(κ)`.
    pub fn state_matrix(&self, kappa: [f64; 2]) -> CsrMatrix<f64> {
        CsrMatrix::combine(&[
            (kappa[0], &self.terms[0].free),
            (kappa[1], &self.terms[1].free),
        ])
    }

    /// Columns of `A(u, ū)`, so that `F = A κ − p̌_vec`.
    pub fn columns(&self, u: &[f64]) -> [Vec<f64>; 2] {
        [0, 1].map(|k| {
            let t = &self.terms[k];
            let mut col = t.free.matvec(u);
            for (c, p) in col.iter_mut().zip(t.prescribed.matvec(&self.prescribed)) {
                *c += p;
            }
            col
        })
    }

    /// Columns of `A` for a state increment, without the prescribed part.
    fn increment_columns(&self, v: &[f64]) -> [Vec<f64>; 2] {
        [0, 1].map(|k| self.terms[k].free.matvec(v))
    }

    pub fn residual(&self, u: &[f64], kappa: [f64; 2]) -> Vec<f64> {
        let [a0, a1] = self.columns(u);
        (0..self.n_rows())
            .map(|i| kappa[0] * a0[i] + kappa[1] * a1[i] - self.rhs()[i])
            .collect()
    }

    /// `½ ‖F(u, κ)‖²`.
    pub fn equilibrium_gap(&self, u: &[f64], kappa: [f64; 2]) -> f64 {
        0.5 * norm(&self.residual(u, kappa)).powi(2)
    }

    /// Largest eigenvalue of `K^fr Kᵀ^fr`, the natural scale of `σ_d / σ_s`
    /// for the Euclidean data norm.
    pub fn stiffness_scale(&self, kappa: [f64; 2]) -> f64 {
        let k = self.state_matrix(kappa);
        power_iteration(
            self.n_rows(),
            |v: &[f64]| k.matvec(&k.matvec_transpose(v)),
            1000,
            1e-10,
        )
    }

    fn check(&self, beta: &JointVector) -> Result<(), IdentifyError> {
        check_len("joint state", self.n_state(), beta.n_state())
    }
}

/// Quantities of one iterate shared by objective, gradient and steps.
struct Evaluation {
    k: CsrMatrix<f64>,
    a: [Vec<f64>; 2],
    f: Vec<f64>,
    e: Vec<f64>,
    /// `K e` for the semi-norm; `e` itself for the Euclidean norm.
    data: Vec<f64>,
    /// `∂(data term)/∂κ`, zero for the Euclidean norm.
    data_columns: Option<[Vec<f64>; 2]>,
}

/// Weighted least-squares objective over `β` for one formulation.
#[derive(Debug, Clone)]
pub struct JointObjective<'p> {
    problem: &'p AaoProblem,
    formulation: AaoFormulation,
    weights: AaoWeights,
    reference: [f64; 2],
}

/// Relative residuals of the multiplier form of the first-order conditions
/// with `Λ = σ_s F(u, κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AaoFoc {
    /// `max_k |A_kᵀ Λ + …| / (‖A_k‖ ‖Λ‖ + …)`.
    pub parameter_residual: f64,
    /// `‖Kᵀ Λ + σ_d ∂(data)/∂u‖ / (‖Kᵀ Λ‖ + ‖σ_d ∂(data)/∂u‖)`.
    pub state_residual: f64,
    pub multiplier_norm: f64,
}

impl<'p> JointObjective<'p> {
    /// `reference` is `κ₀` of the parameter penalty.
    pub fn new(
        problem: &'p AaoProblem,
        formulation: AaoFormulation,
        weights: AaoWeights,
        reference: [f64; 2],
    ) -> Result<Self, IdentifyError> {
        weights.validate()?;
        Ok(Self {
            problem,
            formulation,
            weights,
            reference,
        })
    }

    pub fn problem(&self) -> &AaoProblem {
        self.problem
    }

    pub fn formulation(&self) -> AaoFormulation {
        self.formulation
    }

    pub fn weights(&self) -> AaoWeights {
        self.weights
    }

    fn evaluate(&self, beta: &JointVector) -> Evaluation {
        let p = self.problem;
        let kappa = beta.parameters;
        let k = p.state_matrix(kappa);
        let a = p.columns(&beta.state);
        let f = (0..p.n_rows())
            .map(|i| kappa[0] * a[0][i] + kappa[1] * a[1][i] - p.rhs()[i])
            .collect();
        let e: Vec<f64> = beta
            .state
            .iter()
            .zip(&p.measured)
            .map(|(u, d)| u - d)
            .collect();
        let (data, data_columns) = match self.formulation {
            AaoFormulation::Fem => (e.clone(), None),
            AaoFormulation::Vfm => (k.matvec(&e), Some(p.increment_columns(&e))),
        };
        Evaluation {
            k,
            a,
            f,
            e,
            data,
            data_columns,
        }
    }

    fn objective_of(&self, ev: &Evaluation, kappa: [f64; 2]) -> f64 {
        let w = &self.weights;
        let dk = [0, 1].map(|i| kappa[i] - self.reference[i]);
        0.5 * (w.sigma_s * dot(&ev.f, &ev.f)
            + w.sigma_d * dot(&ev.data, &ev.data)
            + w.gamma_s * dot(&ev.e, &ev.e)
            + w.gamma_p * dot(&dk, &dk))
    }

    pub fn objective(&self, beta: &JointVector) -> f64 {
        self.objective_of(&self.evaluate(beta), beta.parameters)
    }

    /// Objective at `(0, κ)`, the floor of the gradient scaling.
    fn reference_objective(&self, kappa: [f64; 2]) -> f64 {
        self.objective(&JointVector::new(vec![0.0; self.problem.n_state()], kappa))
    }

    /// Stacked weighted residual `R(β)` with `Φ = ½ ‖R‖²`.
    pub fn residual_vector(&self, beta: &JointVector) -> Vec<f64> {
        self.stacked_residual(&self.evaluate(beta), beta.parameters)
    }

    fn stacked_residual(&self, ev: &Evaluation, kappa: [f64; 2]) -> Vec<f64> {
        let w = &self.weights;
        let mut r: Vec<f64> = ev.f.iter().map(|v| w.sigma_s.sqrt() * v).collect();
        r.extend(ev.data.iter().map(|v| w.sigma_d.sqrt() * v));
        if w.gamma_s > 0.0 {
            r.extend(ev.e.iter().map(|v| w.gamma_s.sqrt() * v));
        }
        if w.gamma_p > 0.0 {
            r.extend((0..2).map(|i| w.gamma_p.sqrt() * (kappa[i] - self.reference[i])));
        }
        r
    }

    /// `J̃ v` for the stacked residual.
    pub fn apply_jacobian(&self, beta: &JointVector, v: &JointVector) -> Vec<f64> {
        let ev = self.evaluate(beta);
        self.jacobian_product(&ev, v)
    }

    fn jacobian_product(&self, ev: &Evaluation, v: &JointVector) -> Vec<f64> {
        let w = &self.weights;
        let kv = ev.k.matvec(&v.state);
        let [vk0, vk1] = v.parameters;
        let ss = w.sigma_s.sqrt();
        let sd = w.sigma_d.sqrt();
        let mut out: Vec<f64> = (0..kv.len())
            .map(|i| ss * (kv[i] + ev.a[0][i] * vk0 + ev.a[1][i] * vk1))
            .collect();
        match &ev.data_columns {
            None => out.extend(v.state.iter().map(|x| sd * x)),
            Some(c) => {
                out.extend((0..kv.len()).map(|i| sd * (kv[i] + c[0][i] * vk0 + c[1][i] * vk1)))
            }
        }
        if w.gamma_s > 0.0 {
            out.extend(v.state.iter().map(|x| w.gamma_s.sqrt() * x));
        }
        if w.gamma_p > 0.0 {
            out.extend(v.parameters.iter().map(|x| w.gamma_p.sqrt() * x));
        }
        out
    }

    /// `J̃ᵀ r` for a vector in the stacked residual space.
    pub fn apply_jacobian_transpose(
        &self,
        beta: &JointVector,
        r: &[f64],
    ) -> Result<JointVector, IdentifyError> {
        let ev = self.evaluate(beta);
        self.transpose_product(&ev, r)
    }

    fn transpose_product(&self, ev: &Evaluation, r: &[f64]) -> Result<JointVector, IdentifyError> {
        let w = &self.weights;
        let m = self.problem.n_rows();
        let n = self.problem.n_state();
        let data_len = ev.data.len();
        let expected = m
            + data_len
            + if w.gamma_s > 0.0 { n } else { 0 }
            + if w.gamma_p > 0.0 { 2 } else { 0 };
        check_len("stacked residual", expected, r.len())?;
        let (r1, rest) = r.split_at(m);
        let (r2, rest) = rest.split_at(data_len);
        let ss = w.sigma_s.sqrt();
        let sd = w.sigma_d.sqrt();

        let mut state: Vec<f64> =
            ev.k.matvec_transpose(r1)
                .into_iter()
                .map(|v| ss * v)
                .collect();
        let mut params = [0, 1].map(|k| ss * dot(&ev.a[k], r1));
        match &ev.data_columns {
            None => state.iter_mut().zip(r2).for_each(|(s, v)| *s += sd * v),
            Some(c) => {
                state
                    .iter_mut()
                    .zip(ev.k.matvec_transpose(r2))
                    .for_each(|(s, v)| *s += sd * v);
                for k in 0..2 {
                    params[k] += sd * dot(&c[k], r2);
                }
            }
        }
        let mut rest = rest;
        if w.gamma_s > 0.0 {
            let (r3, tail) = rest.split_at(n);
            state
                .iter_mut()
                .zip(r3)
                .for_each(|(s, v)| *s += w.gamma_s.sqrt() * v);
            rest = tail;
        }
        if w.gamma_p > 0.0 {
            for k in 0..2 {
                params[k] += w.gamma_p.sqrt() * rest[k];
            }
        }
        Ok(JointVector::new(state, params))
    }

    /// `∇Φ(β) = J̃ᵀ R`.
    pub fn gradient(&self, beta: &JointVector) -> Result<JointVector, IdentifyError> {
        self.problem.check(beta)?;
        let ev = self.evaluate(beta);
        self.transpose_product(&ev, &self.stacked_residual(&ev, beta.parameters))
    }

    /// `‖(∇_u Φ · max|d_u|, ∇_κ Φ ⊙ |κ|)‖ / max(Φ(β), 10⁻¹² Φ(0, κ))`.
    pub fn scaled_gradient(&self, beta: &JointVector) -> Result<f64, IdentifyError> {
        let g = self.gradient(beta)?;
        let su = self
            .problem
            .measured
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mut acc: f64 = g.state.iter().map(|v| (v * su).powi(2)).sum();
        acc += (0..2)
            .map(|k| (g.parameters[k] * beta.parameters[k]).powi(2))
            .sum::<f64>();
        let floor = 1e-12 * self.reference_objective(beta.parameters);
        Ok(acc.sqrt() / self.objective(beta).max(floor).max(f64::MIN_POSITIVE))
    }

    /// Column scaling `D_j = 1 / ‖J̃ e_j‖` at `β`, from the matrix entries
    /// rather than from products with unit vectors.
    pub fn column_scaling(&self, beta: &JointVector) -> Result<Vec<f64>, IdentifyError> {
        self.problem.check(beta)?;
        let w = &self.weights;
        let ev = self.evaluate(beta);
        let mut k2 = vec![0.0; self.problem.n_state()];
        for i in 0..ev.k.rows() {
            for (j, v) in ev.k.row(i) {
                k2[j] += v * v;
            }
        }
        let data_factor = match self.formulation {
            AaoFormulation::Fem => 0.0,
            AaoFormulation::Vfm => w.sigma_d,
        };
        let state_data = match self.formulation {
            AaoFormulation::Fem => w.sigma_d,
            AaoFormulation::Vfm => 0.0,
        };
        let mut out: Vec<f64> = k2
            .iter()
            .map(|q| (w.sigma_s + data_factor) * q + state_data + w.gamma_s)
            .collect();
        for k in 0..2 {
            let mut q = w.sigma_s * dot(&ev.a[k], &ev.a[k]) + w.gamma_p;
            if let Some(c) = &ev.data_columns {
                q += w.sigma_d * dot(&c[k], &c[k]);
            }
            out.push(q);
        }
        Ok(out
            .into_iter()
            .map(|q| if q > 0.0 { 1.0 / q.sqrt() } else { 1.0 })
            .collect())
    }

    /// `(c, τ)` of the state-block elimination `S = c K Kᵀ + τ I`.
    fn elimination_weights(&self) -> (f64, f64) {
        let w = &self.weights;
        match self.formulation {
            AaoFormulation::Fem => (w.sigma_s, w.sigma_d + w.gamma_s),
            AaoFormulation::Vfm => (w.sigma_s + w.sigma_d, w.gamma_s),
        }
    }

    fn factor_state_block<'k>(
        &self,
        k: &'k CsrMatrix<f64>,
    ) -> Result<StateBlock<'k>, IdentifyError> {
        let (c, tau) = self.elimination_weights();
        let s = k.mul_self_transpose().scaled(c).add_diagonal(tau)?;
        Ok(StateBlock {
            k,
            c,
            tau,
            factor: SkylineMatrix::from_csr(&s)?.factor()?,
        })
    }

    /// Gauss-Newton direction from the block normal equations
    /// `[[c KᵀK + τ I, Kᵀ B], [Bᵀ K, H_κκ]] Δβ = −∇Φ`.
    ///
    /// The state block is never formed: with `S = c K Kᵀ + τ I`,
    /// `(c KᵀK + τ I)⁻¹ Kᵀ = Kᵀ S⁻¹`, which leaves a 2 × 2 Schur complement.
    pub fn gauss_newton_direction(&self, beta: &JointVector) -> Result<JointVector, IdentifyError> {
        self.problem.check(beta)?;
        let w = self.weights;
        let ev = self.evaluate(beta);
        let (c, tau) = self.elimination_weights();
        let kappa = beta.parameters;
        let dk = [0, 1].map(|i| kappa[i] - self.reference[i]);
        let m = self.problem.n_rows();

        let (b, h, mut schur, mut rhs) = match &ev.data_columns {
            None => {
                let b =
                    ev.a.clone()
                        .map(|col| col.into_iter().map(|v| w.sigma_s * v).collect::<Vec<_>>());
                let h: Vec<f64> = ev.f.iter().map(|v| w.sigma_s * v).collect();
                let schur = [[w.gamma_p, 0.0], [0.0, w.gamma_p]];
                let rhs = dk.map(|d| -w.gamma_p * d);
                (b, h, schur, rhs)
            }
            Some(ae) => {
                let b = [0, 1].map(|k| {
                    (0..m)
                        .map(|i| w.sigma_s * ev.a[k][i] + w.sigma_d * ae[k][i])
                        .collect::<Vec<_>>()
                });
                let h: Vec<f64> = (0..m)
                    .map(|i| w.sigma_s * ev.f[i] + w.sigma_d * ev.data[i])
                    .collect();
                let ad = self.problem.columns(&self.problem.measured);
                let fd: Vec<f64> = (0..m)
                    .map(|i| kappa[0] * ad[0][i] + kappa[1] * ad[1][i] - self.problem.rhs()[i])
                    .collect();
                let blend = w.sigma_s * w.sigma_d / c;
                let mut schur = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        schur[i][j] = blend * dot(&ad[i], &ad[j]);
                    }
                    schur[i][i] += w.gamma_p;
                }
                let rhs = [0, 1].map(|i| -blend * dot(&ad[i], &fd) - w.gamma_p * dk[i]);
                (b, h, schur, rhs)
            }
        };

        let block = self.factor_state_block(&ev.k)?;
        let yh = block.solve(&h)?;
        let ke = ev.k.matvec(&ev.e);
        let ye = block.solve(&ke)?;
        let z = [block.solve(&b[0])?, block.solve(&b[1])?];
        for i in 0..2 {
            for j in 0..2 {
                schur[i][j] += tau / c * dot(&b[i], &z[j]);
            }
            rhs[i] += -tau / c * dot(&b[i], &yh) + tau * dot(&b[i], &ye);
        }
        let sym = 0.5 * (schur[0][1] + schur[1][0]);
        schur[0][1] = sym;
        schur[1][0] = sym;
        let dkappa = solve2(schur, rhs)?;

        let combo: Vec<f64> = (0..m)
            .map(|i| yh[i] + z[0][i] * dkappa[0] + z[1][i] * dkappa[1])
            .collect();
        let mut du: Vec<f64> =
            ev.k.matvec_transpose(&combo)
                .into_iter()
                .map(|v| -v)
                .collect();
        if tau > 0.0 {
            let kye = ev.k.matvec_transpose(&ye);
            for i in 0..du.len() {
                du[i] -= ev.e[i] - c * kye[i];
            }
        }
        Ok(JointVector::new(du, dkappa))
    }

    /// Exact minimizer over `u` for fixed `κ`: `u = d_u + σ_s Kᵀ S⁻¹ (−F(d_u, κ))`.
    pub fn minimize_state(&self, kappa: [f64; 2]) -> Result<Vec<f64>, IdentifyError> {
        let p = self.problem;
        let k = p.state_matrix(kappa);
        let block = self.factor_state_block(&k)?;
        let fd = p.residual(&p.measured, kappa);
        let rhs: Vec<f64> = fd.iter().map(|v| -self.weights.sigma_s * v).collect();
        let w = k.matvec_transpose(&block.solve(&rhs)?);
        Ok(p.measured.iter().zip(w).map(|(d, x)| d + x).collect())
    }

    /// Exact minimizer over `κ` for fixed `u`.
    pub fn minimize_parameters(&self, u: &[f64]) -> Result<[f64; 2], IdentifyError> {
        check_len("joint state", self.problem.n_state(), u.len())?;
        let w = &self.weights;
        let p = self.problem;
        let a = p.columns(u);
        let mut normal = [[0.0; 2]; 2];
        let mut rhs = [0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                normal[i][j] = w.sigma_s * dot(&a[i], &a[j]);
            }
            normal[i][i] += w.gamma_p;
            rhs[i] = w.sigma_s * dot(&a[i], p.rhs()) + w.gamma_p * self.reference[i];
        }
        if self.formulation == AaoFormulation::Vfm {
            let e: Vec<f64> = u.iter().zip(&p.measured).map(|(x, d)| x - d).collect();
            let ae = p.increment_columns(&e);
            for i in 0..2 {
                for j in 0..2 {
                    normal[i][j] += w.sigma_d * dot(&ae[i], &ae[j]);
                }
            }
        }
        solve2(normal, rhs)
    }

    pub fn foc(&self, beta: &JointVector) -> Result<AaoFoc, IdentifyError> {
        self.problem.check(beta)?;
        let w = &self.weights;
        let ev = self.evaluate(beta);
        let lambda: Vec<f64> = ev.f.iter().map(|v| w.sigma_s * v).collect();
        let lambda_norm = norm(&lambda);
        let dk = [0, 1].map(|i| beta.parameters[i] - self.reference[i]);

        let mut parameter_residual = 0.0f64;
        for k in 0..2 {
            let mut value = dot(&ev.a[k], &lambda) + w.gamma_p * dk[k];
            let mut scale = norm(&ev.a[k]) * lambda_norm + w.gamma_p * dk[k].abs();
            if let Some(c) = &ev.data_columns {
                value += w.sigma_d * dot(&c[k], &ev.data);
                scale += w.sigma_d * norm(&c[k]) * norm(&ev.data);
            }
            parameter_residual = parameter_residual.max(value.abs() / scale.max(f64::MIN_POSITIVE));
        }

        let kl = ev.k.matvec_transpose(&lambda);
        let mut data_term: Vec<f64> = match &ev.data_columns {
            None => ev.e.iter().map(|v| w.sigma_d * v).collect(),
            Some(_) => {
                ev.k.matvec_transpose(&ev.data)
                    .into_iter()
                    .map(|v| w.sigma_d * v)
                    .collect()
            }
        };
        data_term
            .iter_mut()
            .zip(&ev.e)
            .for_each(|(t, e)| *t += w.gamma_s * e);
        let sum: Vec<f64> = kl.iter().zip(&data_term).map(|(a, b)| a + b).collect();
        let state_residual = norm(&sum) / (norm(&kl) + norm(&data_term)).max(f64::MIN_POSITIVE);
        Ok(AaoFoc {
            parameter_residual,
            state_residual,
            multiplier_norm: lambda_norm,
        })
    }
}

/// Factored `S = c K Kᵀ + τ I`. Forming `K Kᵀ` squares the condition
/// number, so solves are followed by iterative refinement against the
/// matrix-free product.
struct StateBlock<'k> {
    k: &'k CsrMatrix<f64>,
    c: f64,
    tau: f64,
    factor: LdlFactor<f64>,
}

impl StateBlock<'_> {
    const REFINEMENTS: usize = 3;

    fn apply(&self, y: &[f64]) -> Vec<f64> {
        let kk = self.k.matvec(&self.k.matvec_transpose(y));
        kk.iter()
            .zip(y)
            .map(|(a, b)| self.c * a + self.tau * b)
            .collect()
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, IdentifyError> {
        let mut y = self.factor.solve(rhs)?;
        for _ in 0..Self::REFINEMENTS {
            let r: Vec<f64> = rhs.iter().zip(self.apply(&y)).map(|(b, a)| b - a).collect();
            let dy = self.factor.solve(&r)?;
            y.iter_mut().zip(dy).for_each(|(a, d)| *a += d);
        }
        Ok(y)
    }
}

fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> Result<[f64; 2], IdentifyError> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = (m[0][0].abs() + m[0][1].abs()) * (m[1][0].abs() + m[1][1].abs());
    if !(det.abs() > 1e-14 * scale) || !det.is_finite() {
        return Err(IdentifyError::Identifiability(format!(
            "parameter block of the all-at-once system is singular (det = {det:e})"
        )));
    }
    Ok([
        (r[0] * m[1][1] - r[1] * m[0][1]) / det,
        (m[0][0] * r[1] - m[1][0] * r[0]) / det,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaoOptions {
    pub weights: AaoWeights,
    pub solver: BlockSolver,
    pub max_iterations: usize,
    /// Stop when the scaled gradient falls below this.
    pub gradient_tol: f64,
    /// Stop when every component of the step is below `step_tol` relative.
    pub step_tol: f64,
    /// Scaled gradient below which the final iterate counts as converged.
    pub accept_gradient: f64,
    pub max_halvings: usize,
    pub landweber: LandweberOptions,
}

impl Default for AaoOptions {
    fn default() -> Self {
        Self {
            weights: AaoWeights::default(),
            solver: BlockSolver::GaussNewton,
            max_iterations: 200,
            gradient_tol: 1e-12,
            step_tol: 1e-12,
            accept_gradient: 1e-6,
            max_halvings: 40,
            landweber: LandweberOptions {
                max_iterations: 100_000,
                ..LandweberOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaoResult {
    pub formulation: AaoFormulation,
    pub weights: AaoWeights,
    pub solution: JointVector,
    /// `(E, ν)` of the identified coefficients.
    pub parameters: ParameterVector,
    pub objective: f64,
    pub equilibrium_gap: f64,
    /// `‖u* − d_u‖ / ‖d_u‖`.
    pub state_misfit: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub objectives: Vec<f64>,
    pub stop: StopReason,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl AaoResult {
    pub fn coefficients(&self) -> [f64; 2] {
        self.solution.parameters
    }
}

/// Euclidean data norm.
pub fn aao_fem_solve(
    problem: &AaoProblem,
    initial: &JointVector,
    opts: &AaoOptions,
) -> Result<AaoResult, IdentifyError> {
    aao_solve(problem, AaoFormulation::Fem, initial, opts)
}

/// Stiffness semi-norm data term.
pub fn aao_vfm_solve(
    problem: &AaoProblem,
    initial: &JointVector,
    opts: &AaoOptions,
) -> Result<AaoResult, IdentifyError> {
    aao_solve(problem, AaoFormulation::Vfm, initial, opts)
}

pub fn aao_solve(
    problem: &AaoProblem,
    formulation: AaoFormulation,
    initial: &JointVector,
    opts: &AaoOptions,
) -> Result<AaoResult, IdentifyError> {
    problem.check(initial)?;
    let objective = JointObjective::new(problem, formulation, opts.weights, initial.parameters)?;
    let mut warnings = Vec::new();
    if formulation == AaoFormulation::Vfm && opts.weights.gamma_s == 0.0 {
        let deficiency = problem.n_state().saturating_sub(problem.n_rows());
        if deficiency > 0 {
            warnings.push(format!(
                "semi-norm data term leaves {deficiency} state directions undetermined; state steps use the minimum-norm update"
            ));
        }
    }
    let (beta, objectives, stop) = match opts.solver {
        BlockSolver::GaussNewton => gauss_newton(&objective, initial, opts)?,
        BlockSolver::GaussSeidel => gauss_seidel(&objective, initial, opts)?,
        BlockSolver::Landweber => {
            let h = landweber_aao(&objective, initial, &opts.landweber)?;
            let stop = if h.converged {
                StopReason::StepSize
            } else {
                StopReason::MaxIterations
            };
            (h.last, h.objectives, stop)
        }
    };
    let gradient_norm = objective.scaled_gradient(&beta)?;
    let converged = gradient_norm <= opts.accept_gradient
        || matches!(
            stop,
            StopReason::StepSize | StopReason::Gradient | StopReason::ObjectiveChange
        );
    if !converged {
        warnings.push(format!(
            "stopped with {stop:?} at scaled gradient {gradient_norm:e}"
        ));
    }
    let [c11, c12] = beta.parameters;
    let (e, nu) = young_poisson_from_coefficients(c11, c12);
    let d = problem.measured();
    let misfit = norm(
        &beta
            .state
            .iter()
            .zip(d)
            .map(|(u, d)| u - d)
            .collect::<Vec<_>>(),
    ) / norm(d).max(f64::MIN_POSITIVE);
    Ok(AaoResult {
        formulation,
        weights: opts.weights,
        parameters: ParameterVector::new(
            ElasticCoordinates::YoungPoisson.parameters(),
            vec![e, nu],
        )?,
        objective: objective.objective(&beta),
        equilibrium_gap: problem.equilibrium_gap(&beta.state, beta.parameters),
        state_misfit: misfit,
        gradient_norm,
        iterations: objectives.len() - 1,
        objectives,
        stop,
        converged,
        warnings,
        solution: beta,
    })
}

fn small_step(step: &JointVector, beta: &JointVector, tol: f64) -> bool {
    let su = beta.state.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    step.state.iter().all(|d| d.abs() <= tol * (su + tol))
        && (0..2).all(|k| step.parameters[k].abs() <= tol * (beta.parameters[k].abs() + tol))
}

/// Relative Gauss-Newton step below which a failed line search means the
/// iterate is stationary to working precision.
const ROUNDING_STEP: f64 = 1e-8;

type Trajectory = (JointVector, Vec<f64>, StopReason);

fn gauss_newton(
    objective: &JointObjective,
    initial: &JointVector,
    opts: &AaoOptions,
) -> Result<Trajectory, IdentifyError> {
    let mut beta = initial.clone();
    let mut phi = objective.objective(&beta);
    let mut history = vec![phi];
    for iteration in 1..=opts.max_iterations {
        if objective.scaled_gradient(&beta)? <= opts.gradient_tol {
            return Ok((beta, history, StopReason::Gradient));
        }
        let step = objective.gauss_newton_direction(&beta)?;
        if small_step(&step, &beta, opts.step_tol) {
            return Ok((beta, history, StopReason::StepSize));
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = beta.moved(t, &step);
            if !trial.is_finite() {
                return Err(IdentifyError::Divergence { iteration });
            }
            let value = objective.objective(&trial);
            if value < phi {
                accepted = Some((trial, value));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, value)) = accepted else {
            let stop = if small_step(&step, &beta, ROUNDING_STEP) {
                StopReason::StepSize
            } else {
                StopReason::Stalled
            };
            return Ok((beta, history, stop));
        };
        beta = trial;
        phi = value;
        history.push(phi);
    }
    Ok((beta, history, StopReason::MaxIterations))
}

fn gauss_seidel(
    objective: &JointObjective,
    initial: &JointVector,
    opts: &AaoOptions,
) -> Result<Trajectory, IdentifyError> {
    let mut beta = initial.clone();
    let mut history = vec![objective.objective(&beta)];
    for iteration in 1..=opts.max_iterations {
        let state = objective.minimize_state(beta.parameters)?;
        let parameters = objective.minimize_parameters(&state)?;
        let next = JointVector::new(state, parameters);
        if !next.is_finite() {
            return Err(IdentifyError::Divergence { iteration });
        }
        let change = JointVector::new(
            next.state
                .iter()
                .zip(&beta.state)
                .map(|(a, b)| a - b)
                .collect(),
            [0, 1].map(|k| next.parameters[k] - beta.parameters[k]),
        );
        beta = next;
        let previous = history[history.len() - 1];
        let phi = objective.objective(&beta);
        history.push(phi);
        let gradient = objective.scaled_gradient(&beta)?;
        if gradient <= opts.gradient_tol {
            return Ok((beta, history, StopReason::Gradient));
        }
        if small_step(&change, &beta, opts.step_tol) && gradient <= opts.accept_gradient {
            return Ok((beta, history, StopReason::StepSize));
        }
        if (previous - phi).abs() <= opts.step_tol * phi {
            return Ok((beta, history, StopReason::ObjectiveChange));
        }
    }
    Ok((beta, history, StopReason::MaxIterations))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaoLandweberHistory {
    /// `κ_k` of every accepted iterate, starting with `κ_0`.
    pub parameters: Vec<[f64; 2]>,
    pub objectives: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub last: JointVector,
    pub converged: bool,
}

impl AaoLandweberHistory {
    pub fn iterations(&self) -> usize {
        self.parameters.len() - 1
    }
}

/// Iterations between spectral-norm refreshes of the step size.
const SPECTRAL_REFRESH: usize = 200;

/// `β_{k+1} = β_k − μ_k D² J̃ᵀ R(β_k)` with step halving until the objective
/// decreases. Only products with `J̃` and `J̃ᵀ` are used.
///
/// `opts.scaling` has length `n_state + 2`; `None` uses
/// [`JointObjective::column_scaling`] at `β₀`.
pub fn landweber_aao(
    objective: &JointObjective,
    initial: &JointVector,
    opts: &LandweberOptions,
) -> Result<AaoLandweberHistory, IdentifyError> {
    let problem = objective.problem();
    problem.check(initial)?;
    let n = initial.len();
    let scale = match &opts.scaling {
        Some(s) => {
            check_len("joint scaling", n, s.len())?;
            s.clone()
        }
        None => objective.column_scaling(initial)?,
    };
    let scale2: Vec<f64> = scale.iter().map(|s| s * s).collect();
    let n_state = problem.n_state();

    let mut beta = initial.clone();
    let mut phi = objective.objective(&beta);
    let mut history = AaoLandweberHistory {
        parameters: vec![beta.parameters],
        objectives: vec![phi],
        step_sizes: Vec::new(),
        last: beta.clone(),
        converged: false,
    };
    let mut mu_max = 0.0;
    for iteration in 1..=opts.max_iterations {
        if (iteration - 1) % SPECTRAL_REFRESH == 0 {
            let ev = objective.evaluate(&beta);
            let norm2 = power_iteration(
                n,
                |v: &[f64]| {
                    let scaled: Vec<f64> = v.iter().zip(&scale).map(|(a, s)| a * s).collect();
                    let dv = JointVector::from_stacked(&scaled, n_state)
                        .expect("length fixed by construction");
                    let jv = objective.jacobian_product(&ev, &dv);
                    let back = objective
                        .transpose_product(&ev, &jv)
                        .expect("stacked length is consistent");
                    back.stacked()
                        .iter()
                        .zip(&scale)
                        .map(|(a, s)| a * s)
                        .collect()
                },
                300,
                1e-8,
            );
            mu_max = match opts.step {
                StepRule::Constant(mu) => {
                    if mu * norm2 >= 2.0 {
                        return Err(IdentifyError::Options(format!(
                            "step {mu:e} violates the Landweber bound 2/|J|^2 = {:e}",
                            2.0 / norm2
                        )));
                    }
                    mu
                }
                StepRule::Spectral { fraction } => fraction * 2.0 / norm2,
            };
        }
        let g = objective.gradient(&beta)?.stacked();
        let update: Vec<f64> = g.iter().zip(&scale2).map(|(g, s)| g * s).collect();
        let current = beta.stacked();
        if update
            .iter()
            .zip(&current)
            .all(|(u, b)| (mu_max * u).abs() <= opts.tol * (b.abs() + opts.tol))
        {
            history.converged = true;
            break;
        }
        let mut mu = mu_max;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = current
                .iter()
                .zip(&update)
                .map(|(b, u)| b - mu * u)
                .collect();
            if trial.iter().any(|v| !v.is_finite()) {
                return Err(IdentifyError::Divergence { iteration });
            }
            let trial = JointVector::from_stacked(&trial, n_state)?;
            let value = objective.objective(&trial);
            if value < phi {
                accepted = Some((trial, value));
                break;
            }
            mu *= 0.5;
        }
        let Some((trial, value)) = accepted else {
            history.converged = true;
            break;
        };
        beta = trial;
        phi = value;
        history.parameters.push(beta.parameters);
        history.objectives.push(phi);
        history.step_sizes.push(mu);
    }
    history.last = beta;
    Ok(history)
}

#[cfg(test)]
mod tests;
