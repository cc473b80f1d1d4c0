//! Small-strain von Mises viscoplasticity with Armstrong–Frederick kinematic
//! hardening, integrated by an elastic predictor and a backward-Euler corrector.

use super::{ElasticParams, MaterialError, Tensor3};
use crate::Real;

/// Normalizing stress of the overstress function, N/mm².
pub const REFERENCE_STRESS: f64 = 1.0;

const LOCAL_TOL: f64 = 1e-10;
const LOCAL_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasticParams<T> {
    /// Initial yield stress `k`, N/mm².
    pub yield_stress: T,
    /// Dynamic recovery `b` of the backstress.
    pub recovery: T,
    /// Hardening modulus `c`, N/mm².
    pub hardening: T,
    /// Viscosity `η` in s; zero selects the rate-independent limit.
    pub viscosity: T,
    /// Overstress exponent `r`.
    pub exponent: T,
}

impl<T: Real> PlasticParams<T> {
    pub fn rate_independent(yield_stress: T, recovery: T, hardening: T) -> Self {
        Self {
            yield_stress,
            recovery,
            hardening,
            viscosity: T::zero(),
            exponent: T::one(),
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let ok = self.yield_stress > T::zero()
            && self.recovery >= T::zero()
            && self.hardening >= T::zero()
            && self.viscosity >= T::zero()
            && self.exponent >= T::one();
        if ok {
            Ok(())
        } else {
            Err(MaterialError::Plastic(format!(
                "need k > 0, b >= 0, c >= 0, eta >= 0, r >= 1; got k = {}, b = {}, c = {}, eta = {}, r = {}",
                self.yield_stress, self.recovery, self.hardening, self.viscosity, self.exponent
            )))
        }
    }

    /// Yield function `f = ½‖ξ‖² − k²/3` for the relative stress norm `‖ξ‖`.
    pub fn yield_function(&self, relative_norm: T) -> T {
        T::lit(0.5) * relative_norm * relative_norm
            - self.yield_stress * self.yield_stress / T::lit(3.0)
    }
}

/// Internal variables of one material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialState<T> {
    pub viscous_strain: Tensor3<T>,
    pub backstress: Tensor3<T>,
    pub arc_length: T,
}

impl<T: Real> Default for MaterialState<T> {
    fn default() -> Self {
        Self {
            viscous_strain: Tensor3::zero(),
            backstress: Tensor3::zero(),
            arc_length: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult<T> {
    pub state: MaterialState<T>,
    pub stress: Tensor3<T>,
    /// Multiplier increment `Δλ`; zero for elastic steps.
    pub increment: T,
}

impl<T: Real> StepResult<T> {
    pub fn is_plastic(&self) -> bool {
        self.increment > T::zero()
    }
}

struct Corrector<T> {
    trial_dev: Tensor3<T>,
    backstress: Tensor3<T>,
    two_shear: T,
    hardening: T,
    beta: T,
}

impl<T: Real> Corrector<T> {
    /// Relative stress norm after an increment `dl` and its derivative.
    fn relative_norm(&self, dl: T) -> (T, T, Tensor3<T>) {
        let a = T::one() / (T::one() + self.beta * dl);
        let eta = self.trial_dev - self.backstress * a;
        let en = eta.norm();
        let d_en = if en > T::zero() {
            eta.dot(&self.backstress) * self.beta * a * a / en
        } else {
            T::zero()
        };
        let xi = en - (self.two_shear + self.hardening * a) * dl;
        let dxi = d_en - (self.two_shear + self.hardening * a * a);
        (xi, dxi, eta)
    }
}

/// Advances one material point from `state` to the total strain `strain`.
pub fn integrate_viscoplastic_step<T: Real>(
    state: &MaterialState<T>,
    strain: &Tensor3<T>,
    dt: T,
    elastic: &ElasticParams<T>,
    plastic: &PlasticParams<T>,
) -> Result<StepResult<T>, MaterialError> {
    plastic.validate()?;
    let (bulk, shear) = elastic.bulk_shear()?;
    let two_shear = T::lit(2.0) * shear;
    let volumetric = Tensor3::identity() * (bulk * strain.trace());
    let trial_dev = (*strain - state.viscous_strain).dev() * two_shear;
    let trial_rel = (trial_dev - state.backstress).norm();
    if plastic.yield_function(trial_rel) <= T::zero() {
        return Ok(StepResult {
            state: *state,
            stress: volumetric + trial_dev,
            increment: T::zero(),
        });
    }

    let root23 = T::lit(2.0 / 3.0).sqrt();
    let corrector = Corrector {
        trial_dev,
        backstress: state.backstress,
        two_shear,
        hardening: plastic.hardening,
        beta: plastic.recovery * root23,
    };
    let radius = root23 * plastic.yield_stress;
    let consistency = |dl: T| {
        let (xi, dxi, _) = corrector.relative_norm(dl);
        (xi - radius, dxi)
    };
    let upper = (trial_dev.norm() + state.backstress.norm()) / two_shear;
    let rate_independent = solve_decreasing(consistency, upper, T::lit(LOCAL_TOL))?;

    let increment = if plastic.viscosity.is_zero() {
        rate_independent
    } else {
        if !(dt > T::zero()) {
            return Err(MaterialError::Plastic(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let sigma0 = T::lit(REFERENCE_STRESS);
        let eta = plastic.viscosity;
        let inv_r = T::one() / plastic.exponent;
        // f = σ₀ (η Δλ/Δt)^(1/r) rewritten as a condition on the relative stress norm
        let overstress = |dl: T| {
            let (xi, dxi, _) = corrector.relative_norm(dl);
            let rate = eta * dl / dt;
            let f = sigma0 * rate.powf(inv_r);
            let target = (radius * radius + T::lit(2.0) * f).sqrt();
            let df = if rate > T::zero() {
                sigma0 * inv_r * rate.powf(inv_r - T::one()) * eta / dt
            } else {
                T::infinity()
            };
            (xi - target, dxi - df / target)
        };
        solve_decreasing(overstress, rate_independent, T::lit(LOCAL_TOL))?
    };

    let (_, _, eta) = corrector.relative_norm(increment);
    let direction = eta.dev() * (T::one() / eta.norm());
    let a = T::one() / (T::one() + corrector.beta * increment);
    let backstress = ((state.backstress + direction * (plastic.hardening * increment)) * a).dev();
    let viscous_strain = (state.viscous_strain + direction * increment).dev();
    let stress = volumetric + (*strain - viscous_strain).dev() * two_shear;
    Ok(StepResult {
        state: MaterialState {
            viscous_strain,
            backstress,
            arc_length: state.arc_length + root23 * increment,
        },
        stress,
        increment,
    })
}

/// Root of a function decreasing on `[0, upper]` with `g(0) > 0 ≥ g(upper)`,
/// by Newton steps safeguarded with bisection.
fn solve_decreasing<T: Real>(
    g: impl Fn(T) -> (T, T),
    upper: T,
    tol: T,
) -> Result<T, MaterialError> {
    let (mut lo, mut hi) = (T::zero(), upper);
    let mut x = T::zero();
    let (mut gx, mut dgx) = g(x);
    for _ in 0..LOCAL_MAX_ITER {
        if gx.abs() <= tol {
            return Ok(x);
        }
        if gx > T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - gx / dgx;
        x = if dgx < T::zero() && newton > lo && newton < hi {
            newton
        } else {
            T::lit(0.5) * (lo + hi)
        };
        if hi - lo <= T::lit(4.0) * T::epsilon() * hi.abs().max(T::min_positive_value()) {
            return Ok(x);
        }
        (gx, dgx) = g(x);
    }
    if gx.abs() <= tol {
        Ok(x)
    } else {
        Err(MaterialError::LocalNewton {
            residual: gx.to_f64_lossy(),
            iterations: LOCAL_MAX_ITER,
        })
    }
}

/// Axial stress and lateral strain histories of a uniaxial stress test.
#[derive(Debug, Clone, PartialEq)]
pub struct UniaxialResponse<T> {
    pub stress: Vec<T>,
    pub lateral: Vec<T>,
    pub states: Vec<MaterialState<T>>,
}

/// Drives a material point along an axial strain history under uniaxial
/// stress, solving for the lateral strain at every step.
pub fn uniaxial_plastic_driver<T: Real>(
    axial: &[T],
    dt: T,
    elastic: &ElasticParams<T>,
    plastic: &PlasticParams<T>,
) -> Result<UniaxialResponse<T>, MaterialError> {
    let (_, poisson) = elastic.young_poisson()?;
    let (bulk, shear) = elastic.bulk_shear()?;
    let tangent0 = T::lit(2.0) * bulk + T::lit(2.0) * shear / T::lit(3.0);
    let tol = T::lit(1e-9) * plastic.yield_stress;
    let mut state = MaterialState::default();
    let mut previous = (T::zero(), T::zero());
    let mut out = UniaxialResponse {
        stress: Vec::with_capacity(axial.len()),
        lateral: Vec::with_capacity(axial.len()),
        states: Vec::with_capacity(axial.len()),
    };
    for (step, &eps) in axial.iter().enumerate() {
        let lateral_stress = |q: T| -> Result<(T, StepResult<T>), MaterialError> {
            let r = integrate_viscoplastic_step(
                &state,
                &Tensor3::diagonal([eps, q, q]),
                dt,
                elastic,
                plastic,
            )?;
            Ok((r.stress.get(1, 1), r))
        };
        let mut q = previous.1 - poisson * (eps - previous.0);
        let (mut s22, mut result) = lateral_stress(q)?;
        let mut iterations = 0;
        while s22.abs() > tol {
            iterations += 1;
            if iterations > LOCAL_MAX_ITER {
                return Err(MaterialError::Driver {
                    step,
                    residual: s22.to_f64_lossy(),
                });
            }
            let h = T::lit(1e-7) * (eps.abs() + q.abs()).max(T::lit(1e-6));
            let (s_h, _) = lateral_stress(q + h)?;
            let slope = (s_h - s22) / h;
            let slope = if slope > T::lit(1e-6) * tangent0 {
                slope
            } else {
                tangent0
            };
            q -= s22 / slope;
            (s22, result) = lateral_stress(q)?;
        }
        state = result.state;
        previous = (eps, q);
        out.stress.push(result.stress.get(0, 0));
        out.lateral.push(q);
        out.states.push(state);
    }
    Ok(out)
}
