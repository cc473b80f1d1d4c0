//! Observation sets and synthetic full-field data.

mod csv_io;
mod generate;
mod locate;

pub use generate::{
    generate_plate_data, generate_uniaxial_data, plate_observations, PlateData, UniaxialProtocol,
};
pub use locate::{interpolate_bilinear, PointLocator};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fem::FemError;
use crate::materials::MaterialError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("point ({x}, {y}) lies outside every element")]
    Unlocatable { x: f64, y: f64 },
    #[error("block {block} has non-positive weight {weight}")]
    Weight { block: usize, weight: f64 },
    #[error("no data blocks given")]
    Empty,
    #[error("missing {comp} observation for point {point} (experiment {exp}, step {step})")]
    Coverage {
        exp: usize,
        step: usize,
        point: usize,
        comp: Component,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Observed quantity of one data row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    /// Displacement along x, mm.
    U1,
    /// Displacement along y, mm.
    U2,
    /// Force resultant along x, N.
    F1,
    /// Force resultant along y, N.
    F2,
    /// Axial stress of a material-point test, N/mm².
    Stress,
    /// Lateral strain of a material-point test.
    Lateral,
}

impl Component {
    pub fn as_str(self) -> &'static str {
        match self {
            Component::U1 => "u1",
            Component::U2 => "u2",
            Component::F1 => "F1",
            Component::F2 => "F2",
            Component::Stress => "sig",
            Component::Lateral => "epsq",
        }
    }

    pub fn is_displacement(self) -> bool {
        matches!(self, Component::U1 | Component::U2)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Component {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "u1" => Component::U1,
            "u2" => Component::U2,
            "F1" => Component::F1,
            "F2" => Component::F2,
            "sig" => Component::Stress,
            "epsq" => Component::Lateral,
            other => return Err(DataError::Csv(format!("unknown component `{other}`"))),
        })
    }
}

/// Layout entry of one scalar observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationKey {
    pub exp: usize,
    pub step: usize,
    /// 1-based measurement point id; for full-field data the mesh node id.
    pub point: usize,
    pub x: f64,
    pub y: f64,
    pub comp: Component,
}

/// Stacked measurements `d` with diagonal weights `W` and their layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet {
    keys: Vec<ObservationKey>,
    values: Vec<f64>,
    weights: Vec<f64>,
    noise: BTreeMap<Component, f64>,
}

impl ObservationSet {
    pub fn new(
        keys: Vec<ObservationKey>,
        values: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self, DataError> {
        if keys.len() != values.len() || keys.len() != weights.len() {
            return Err(DataError::Csv(format!(
                "layout has {} entries but {} values and {} weights",
                keys.len(),
                values.len(),
                weights.len()
            )));
        }
        if let Some((block, &weight)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
            return Err(DataError::Weight { block, weight });
        }
        Ok(Self {
            keys,
            values,
            weights,
            noise: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn keys(&self) -> &[ObservationKey] {
        &self.keys
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Diagonal of `W`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn noise(&self, comp: Component) -> Option<f64> {
        self.noise.get(&comp).copied()
    }

    pub fn set_noise(&mut self, comp: Component, sigma: f64) {
        self.noise.insert(comp, sigma);
    }

    /// Rows satisfying `keep`, in their original order.
    pub fn filter(&self, keep: impl Fn(&ObservationKey) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.keys[i])).collect();
        Self {
            keys: idx.iter().map(|&i| self.keys[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            noise: self.noise.clone(),
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.len());
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, DataError> {
        let mut s = Self::new(self.keys.clone(), self.values.clone(), weights)?;
        s.noise = self.noise.clone();
        Ok(s)
    }

    /// Distinct `(exp, step)` pairs in order of appearance.
    pub fn load_steps(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for k in &self.keys {
            if !out.contains(&(k.exp, k.step)) {
                out.push((k.exp, k.step));
            }
        }
        out
    }

    /// Nodal displacements of one load step, indexed by 0-based node.
    pub fn nodal_displacements(
        &self,
        exp: usize,
        step: usize,
        n_nodes: usize,
    ) -> Result<Vec<[f64; 2]>, DataError> {
        let mut out = vec![[f64::NAN; 2]; n_nodes];
        for (k, &v) in self.keys.iter().zip(&self.values) {
            if k.exp == exp && k.step == step && k.point >= 1 && k.point <= n_nodes {
                match k.comp {
                    Component::U1 => out[k.point - 1][0] = v,
                    Component::U2 => out[k.point - 1][1] = v,
                    _ => {}
                }
            }
        }
        for (i, u) in out.iter().enumerate() {
            for (c, comp) in [Component::U1, Component::U2].into_iter().enumerate() {
                if u[c].is_nan() {
                    return Err(DataError::Coverage {
                        exp,
                        step,
                        point: i + 1,
                        comp,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn resultant(&self, exp: usize, step: usize, comp: Component) -> Option<f64> {
        self.keys
            .iter()
            .zip(&self.values)
            .find(|(k, _)| k.exp == exp && k.step == step && k.comp == comp)
            .map(|(_, &v)| v)
    }
}

/// One homogeneous group of measurements with a common weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    pub values: Vec<f64>,
    pub weight: f64,
}

/// Stacks blocks in declaration order; `W` entries are `1/weight`.
pub fn assemble_data_vector(blocks: &[DataBlock]) -> Result<(Vec<f64>, Vec<f64>), DataError> {
    if blocks.is_empty() {
        return Err(DataError::Empty);
    }
    let mut d = Vec::new();
    let mut w = Vec::new();
    for (block, b) in blocks.iter().enumerate() {
        if !(b.weight > 0.0) || !b.weight.is_finite() {
            return Err(DataError::Weight {
                block,
                weight: b.weight,
            });
        }
        d.extend_from_slice(&b.values);
        w.extend(std::iter::repeat_n(1.0 / b.weight, b.values.len()));
    }
    Ok((d, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unit_block_gives_identity_weights() {
        let (d, w) = assemble_data_vector(&[DataBlock {
            values: vec![1.0, 2.0],
            weight: 1.0,
        }])
        .unwrap();
        assert_eq!(d, vec![1.0, 2.0]);
        assert_eq!(w, vec![1.0, 1.0]);
    }

    #[test]
    fn per_direction_weights_follow_the_maximum() {
        let u1 = vec![0.01, -0.04, 0.02];
        let u2 = vec![-0.002, 0.001, 0.0];
        let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let blocks = [
            DataBlock {
                values: u1.clone(),
                weight: max(&u1),
            },
            DataBlock {
                values: u2.clone(),
                weight: max(&u2),
            },
        ];
        let (_, w) = assemble_data_vector(&blocks).unwrap();
        assert_eq!(w[0], 25.0);
        assert_eq!(w[4], 500.0);
    }

    #[test]
    fn permuting_blocks_permutes_the_layout() {
        let a = DataBlock {
            values: vec![1.0, 2.0],
            weight: 2.0,
        };
        let b = DataBlock {
            values: vec![3.0],
            weight: 4.0,
        };
        let (d1, w1) = assemble_data_vector(&[a.clone(), b.clone()]).unwrap();
        let (d2, w2) = assemble_data_vector(&[b, a]).unwrap();
        assert_eq!(d1, vec![1.0, 2.0, 3.0]);
        assert_eq!(d2, vec![3.0, 1.0, 2.0]);
        assert_eq!(w1, vec![0.5, 0.5, 0.25]);
        assert_eq!(w2, vec![0.25, 0.5, 0.5]);
    }

    #[test]
    fn zero_weight_is_rejected() {
        let r = assemble_data_vector(&[DataBlock {
            values: vec![1.0],
            weight: 0.0,
        }]);
        assert!(matches!(r, Err(DataError::Weight { block: 0, .. })));
        assert!(matches!(assemble_data_vector(&[]), Err(DataError::Empty)));
    }
}
