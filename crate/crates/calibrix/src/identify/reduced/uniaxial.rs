use super::ForwardModel;
use crate::identify::{check_len, IdentifyError, Parameter};
use crate::materials::{ElasticParams, PlasticParams};
use crate::synthetic::UniaxialProtocol;

/// Uniaxial material-point model in the hardening parameters `(k, b, c)`
/// with fixed elastic constants, viscosity and exponent.
#[derive(Debug, Clone)]
pub struct UniaxialPlasticModel {
    protocol: UniaxialProtocol,
    elastic: ElasticParams<f64>,
    viscosity: f64,
    exponent: f64,
    params: Vec<Parameter>,
}

impl UniaxialPlasticModel {
    pub fn new(protocol: UniaxialProtocol, elastic: ElasticParams<f64>) -> Self {
        Self {
            protocol,
            elastic,
            viscosity: 0.0,
            exponent: 1.0,
            params: vec![
                Parameter::new("k", "N/mm^2").bounded(1e-3, 1e5),
                Parameter::new("b", "-").bounded(0.0, 1e5),
                Parameter::new("c", "N/mm^2").bounded(0.0, 1e7),
            ],
        }
    }

    pub fn with_viscosity(mut self, viscosity: f64, exponent: f64) -> Self {
        self.viscosity = viscosity;
        self.exponent = exponent;
        self
    }

    pub fn with_elastic(&self, elastic: ElasticParams<f64>) -> Self {
        Self {
            elastic,
            ..self.clone()
        }
    }

    pub fn elastic(&self) -> &ElasticParams<f64> {
        &self.elastic
    }

    pub fn protocol(&self) -> &UniaxialProtocol {
        &self.protocol
    }

    pub fn plastic(&self, kappa: &[f64]) -> PlasticParams<f64> {
        PlasticParams {
            yield_stress: kappa[0],
            recovery: kappa[1],
            hardening: kappa[2],
            viscosity: self.viscosity,
            exponent: self.exponent,
        }
    }
}

impl ForwardModel for UniaxialPlasticModel {
    fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    fn n_outputs(&self) -> usize {
        let n = self.protocol.strains.len();
        if self.protocol.lateral_noise.is_some() {
            2 * n
        } else {
            n
        }
    }

    fn evaluate(&self, kappa: &[f64]) -> Result<Vec<f64>, IdentifyError> {
        check_len("parameter vector", 3, kappa.len())?;
        let forward = |e: String| IdentifyError::Forward {
            kappa: kappa.to_vec(),
            message: e,
        };
        let (stress, lateral) = self
            .protocol
            .response(&self.elastic, Some(&self.plastic(kappa)))
            .map_err(|e| forward(e.to_string()))?;
        let mut out = stress;
        if self.protocol.lateral_noise.is_some() {
            out.extend(lateral);
        }
        Ok(out)
    }
}
