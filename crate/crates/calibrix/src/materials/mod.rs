//! Constitutive models: isotropic elasticity and small-strain viscoplasticity.

mod elastic;
mod params;
mod tensor;
mod viscoplastic;

pub use elastic::{
    convert_e_nu_to_k_g, convert_k_g_to_e_nu, elasticity_matrix_plane_stress,
    plane_stress_coefficients, uniaxial_elastic_response, young_poisson_from_coefficients,
    ElasticParams,
};
pub use params::MaterialParams;
pub use tensor::Tensor3;
pub use viscoplastic::{
    integrate_viscoplastic_step, uniaxial_plastic_driver, MaterialState, PlasticParams, StepResult,
    UniaxialResponse, REFERENCE_STRESS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("invalid elastic parameters: {0}")]
    Elastic(String),
    #[error("invalid plastic parameters: {0}")]
    Plastic(String),
    #[error("local Newton iteration did not converge after {iterations} iterations, residual {residual:e}")]
    LocalNewton { residual: f64, iterations: usize },
    #[error("uniaxial driver failed at step {step}: lateral stress residual {residual:e}")]
    Driver { step: usize, residual: f64 },
    #[error("parameter file: {0}")]
    File(String),
}
