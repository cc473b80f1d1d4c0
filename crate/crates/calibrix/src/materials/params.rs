//! Key-value parameter files (TOML syntax), units N/mm² and s.
//!
//! ```toml
//! K = 150991.0
//! G = 79321.0
//! k = 282.6
//! b = 41.04
//! c = 3499.8
//! eta = 0.0
//! r = 1.0
//! ```

use serde::{Deserialize, Serialize};

use super::{ElasticParams, MaterialError, PlasticParams};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    young: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    bulk: Option<f64>,
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    shear: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
}

/// Elastic constants with optional plastic parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub elastic: ElasticParams<f64>,
    pub plastic: Option<PlasticParams<f64>>,
}

impl MaterialParams {
    pub fn parse(text: &str) -> Result<Self, MaterialError> {
        let raw: RawParams =
            toml::from_str(text).map_err(|e| MaterialError::File(e.to_string()))?;
        let elastic = match (raw.young, raw.nu, raw.bulk, raw.shear) {
            (Some(young), Some(poisson), None, None) => {
                ElasticParams::YoungPoisson { young, poisson }
            }
            (None, None, Some(bulk), Some(shear)) => ElasticParams::BulkShear { bulk, shear },
            _ => {
                return Err(MaterialError::File(
                    "give exactly one elastic pair: `E` and `nu`, or `K` and `G`".into(),
                ))
            }
        };
        elastic.bulk_shear()?;
        let plastic = match (raw.k, raw.b, raw.c) {
            (None, None, None) if raw.eta.is_none() && raw.r.is_none() => None,
            (Some(k), Some(b), Some(c)) => {
                let p = PlasticParams {
                    yield_stress: k,
                    recovery: b,
                    hardening: c,
                    viscosity: raw.eta.unwrap_or(0.0),
                    exponent: raw.r.unwrap_or(1.0),
                };
                p.validate()?;
                Some(p)
            }
            _ => {
                return Err(MaterialError::File(
                    "plastic parameters need all of `k`, `b`, `c`".into(),
                ))
            }
        };
        Ok(Self { elastic, plastic })
    }

    pub fn to_text(&self) -> String {
        let mut raw = RawParams::default();
        match self.elastic {
            ElasticParams::YoungPoisson { young, poisson } => {
                raw.young = Some(young);
                raw.nu = Some(poisson);
            }
            ElasticParams::BulkShear { bulk, shear } => {
                raw.bulk = Some(bulk);
                raw.shear = Some(shear);
            }
        }
        if let Some(p) = self.plastic {
            raw.k = Some(p.yield_stress);
            raw.b = Some(p.recovery);
            raw.c = Some(p.hardening);
            raw.eta = Some(p.viscosity);
            raw.r = Some(p.exponent);
        }
        toml::to_string(&raw).expect("flat table serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bulk_shear_with_plasticity() {
        let p =
            MaterialParams::parse("K = 150991.0\nG = 79321.0\nk = 282.6\nb = 41.04\nc = 3499.8\n")
                .unwrap();
        assert_eq!(
            p.elastic,
            ElasticParams::BulkShear {
                bulk: 150991.0,
                shear: 79321.0
            }
        );
        let plastic = p.plastic.unwrap();
        assert_eq!(plastic.viscosity, 0.0);
        assert_eq!(plastic.exponent, 1.0);
        assert_eq!(MaterialParams::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn young_poisson_only() {
        let p = MaterialParams::parse("E = 210000\nnu = 0.3").unwrap();
        assert!(p.plastic.is_none());
    }

    #[test]
    fn mixed_or_incomplete_sets_are_rejected() {
        assert!(MaterialParams::parse("E = 210000\nG = 80000").is_err());
        assert!(MaterialParams::parse("E = 210000\nnu = 0.3\nk = 200").is_err());
        assert!(MaterialParams::parse("E = 210000\nnu = 0.6").is_err());
        assert!(MaterialParams::parse("E = 210000\nnu = 0.3\nzeta = 1").is_err());
    }
}
