use super::MaterialError;
use crate::fem::Elasticity;
use crate::Real;

/// Isotropic elastic constants in either parameterization (N/mm²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElasticParams<T> {
    YoungPoisson { young: T, poisson: T },
    BulkShear { bulk: T, shear: T },
}

impl<T: Real> ElasticParams<T> {
    pub fn young_poisson(&self) -> Result<(T, T), MaterialError> {
        match *self {
            Self::YoungPoisson { young, poisson } => {
                check_young_poisson(young, poisson)?;
                Ok((young, poisson))
            }
            Self::BulkShear { bulk, shear } => convert_k_g_to_e_nu(bulk, shear),
        }
    }

    pub fn bulk_shear(&self) -> Result<(T, T), MaterialError> {
        match *self {
            Self::YoungPoisson { young, poisson } => convert_e_nu_to_k_g(young, poisson),
            Self::BulkShear { bulk, shear } => {
                check_bulk_shear(bulk, shear)?;
                Ok((bulk, shear))
            }
        }
    }
}

fn check_young_poisson<T: Real>(e: T, nu: T) -> Result<(), MaterialError> {
    if e > T::zero() && nu > -T::one() && nu < T::lit(0.5) {
        Ok(())
    } else {
        Err(MaterialError::Elastic(format!(
            "need E > 0 and -1 < nu < 0.5, got E = {e}, nu = {nu}"
        )))
    }
}

fn check_bulk_shear<T: Real>(k: T, g: T) -> Result<(), MaterialError> {
    if k > T::zero() && g > T::zero() {
        Ok(())
    } else {
        Err(MaterialError::Elastic(format!(
            "need K > 0 and G > 0, got K = {k}, G = {g}"
        )))
    }
}

/// Plane-stress `C = E/(1−ν²) [[1, ν, 0], [ν, 1, 0], [0, 0, (1−ν)/2]]`.
pub fn elasticity_matrix_plane_stress<T: Real>(
    p: &ElasticParams<T>,
) -> Result<Elasticity<T>, MaterialError> {
    let (e, nu) = p.young_poisson()?;
    let (c11, c12) = plane_stress_coefficients(e, nu);
    Ok(crate::fem::isotropic_elasticity(c11, c12))
}

/// `(C11, C12)` of isotropic plane stress.
pub fn plane_stress_coefficients<T: Real>(e: T, nu: T) -> (T, T) {
    let f = e / (T::one() - nu * nu);
    (f, f * nu)
}

/// Inverse of [`plane_stress_coefficients`].
pub fn young_poisson_from_coefficients<T: Real>(c11: T, c12: T) -> (T, T) {
    let nu = c12 / c11;
    (c11 * (T::one() - nu * nu), nu)
}

/// `K = E / (3(1 − 2ν))`, `G = E / (2(1 + ν))`.
pub fn convert_e_nu_to_k_g<T: Real>(e: T, nu: T) -> Result<(T, T), MaterialError> {
    check_young_poisson(e, nu)?;
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    Ok((
        e / (three * (T::one() - two * nu)),
        e / (two * (T::one() + nu)),
    ))
}

/// `E = 9KG / (3K + G)`, `ν = (3K − 2G) / (2(3K + G))`.
pub fn convert_k_g_to_e_nu<T: Real>(k: T, g: T) -> Result<(T, T), MaterialError> {
    check_bulk_shear(k, g)?;
    let three_k = T::lit(3.0) * k;
    let e = T::lit(9.0) * k * g / (three_k + g);
    let nu = (three_k - T::lit(2.0) * g) / (T::lit(2.0) * (three_k + g));
    Ok((e, nu))
}

/// Axial stress and lateral strain of a uniaxial stress state.
pub fn uniaxial_elastic_response<T: Real>(k: T, g: T, strain: T) -> (T, T) {
    let stress = T::lit(9.0) * k * g / (T::lit(3.0) * k + g) * strain;
    let lateral =
        -(T::lit(3.0) * k - T::lit(2.0) * g) / (T::lit(6.0) * k + T::lit(2.0) * g) * strain;
    (stress, lateral)
}
