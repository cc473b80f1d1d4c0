//! Seeded synthetic experiments.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::locate::{interpolate_at, PointLocator};
use super::{Component, DataError, ObservationKey, ObservationSet};
use crate::fem::{reaction_resultant, solve_linear, StiffnessBasis};
use crate::materials::{
    plane_stress_coefficients, uniaxial_elastic_response, uniaxial_plastic_driver, ElasticParams,
    PlasticParams,
};
use crate::mesh::{Dof, DofPartition, Mesh};
use crate::rng;

/// Synthetic plate experiment: observations on the coarse nodes plus the
/// noise-free values in the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateData {
    pub observations: ObservationSet,
    pub clean: Vec<f64>,
}

/// Full-field observation set for one load step on the nodes of `mesh`.
///
/// Rows are `u1, u2` per node followed by the `F1` resultant. Displacement
/// weights are `1/max|u|` per direction and the resultant weight is `1/|F|`.
pub fn plate_observations(
    mesh: &Mesh<f64>,
    displacements: &[[f64; 2]],
    resultant: f64,
) -> Result<ObservationSet, DataError> {
    if displacements.len() != mesh.n_nodes() {
        return Err(DataError::Csv(format!(
            "{} displacement pairs for {} nodes",
            displacements.len(),
            mesh.n_nodes()
        )));
    }
    let max = |c: usize| displacements.iter().fold(0.0f64, |m, u| m.max(u[c].abs()));
    let scale = [max(0), max(1)];
    let n = 2 * mesh.n_nodes() + 1;
    let (mut keys, mut values, mut weights) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for (i, (p, u)) in mesh.nodes().iter().zip(displacements).enumerate() {
        for (c, comp) in [Component::U1, Component::U2].into_iter().enumerate() {
            keys.push(ObservationKey {
                exp: 1,
                step: 1,
                point: i + 1,
                x: p[0],
                y: p[1],
                comp,
            });
            values.push(u[c]);
            weights.push(1.0 / scale[c]);
        }
    }
    keys.push(ObservationKey {
        exp: 1,
        step: 1,
        point: 0,
        x: 0.0,
        y: 0.0,
        comp: Component::F1,
    });
    values.push(resultant);
    weights.push(1.0 / resultant.abs());
    ObservationSet::new(keys, values, weights)
}

/// Solves the plate on `fine` at the true parameters with total edge load
/// `load`, interpolates onto the nodes of `coarse` and adds `N(0, sigma²)`
/// noise to every displacement value.
pub fn generate_plate_data(
    fine: &Mesh<f64>,
    coarse: &Mesh<f64>,
    truth: &ElasticParams<f64>,
    load: f64,
    sigma: f64,
    seed: u64,
) -> Result<PlateData, DataError> {
    let (e, nu) = truth.young_poisson()?;
    let total: f64 = fine.load_vector().iter().step_by(2).sum();
    if total == 0.0 {
        return Err(DataError::Csv("fine mesh carries no x load".into()));
    }
    let fine = fine.with_scaled_loads(load / total);
    let part = DofPartition::new(&fine);
    let (c11, c12) = plane_stress_coefficients(e, nu);
    let stiff = StiffnessBasis::new(&fine, &part)?.at(c11, c12);
    let sol = solve_linear(
        &stiff,
        &part.applied_forces(&fine),
        &part.prescribed_values(&fine),
    )?;
    let resultant = reaction_resultant(&sol.reactions, &part.selection(Dof::X))?;
    let u = part.scatter(&sol.displacements, &part.prescribed_values(&fine));
    let locator = PointLocator::new(&fine);
    let clean_u = coarse
        .nodes()
        .iter()
        .map(|&p| interpolate_at(&locator, &u, p))
        .collect::<Result<Vec<_>, _>>()?;
    let clean = plate_observations(coarse, &clean_u, resultant)?;
    let mut rng = rng::seeded(seed);
    let noisy_u: Vec<[f64; 2]> = clean_u
        .iter()
        .map(|u| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            [u[0] + sigma * z1, u[1] + sigma * z2]
        })
        .collect();
    let mut observations = plate_observations(coarse, &noisy_u, resultant)?;
    observations.set_noise(Component::U1, sigma);
    observations.set_noise(Component::U2, sigma);
    observations.set_noise(Component::F1, 0.0);
    Ok(PlateData {
        observations,
        clean: clean.values().to_vec(),
    })
}

/// Strain-controlled uniaxial stress test of one material point.
#[derive(Debug, Clone, PartialEq)]
pub struct UniaxialProtocol {
    pub exp: usize,
    /// Axial strain at each recorded step, starting after the origin.
    pub strains: Vec<f64>,
    pub dt: f64,
    pub stress_noise: f64,
    /// Standard deviation of the lateral strain; `None` omits lateral rows.
    pub lateral_noise: Option<f64>,
}

impl UniaxialProtocol {
    /// `steps` equal increments up to `max_strain`.
    pub fn ramp(exp: usize, max_strain: f64, steps: usize, dt: f64) -> Self {
        Self {
            exp,
            strains: (1..=steps)
                .map(|i| max_strain * i as f64 / steps as f64)
                .collect(),
            dt,
            stress_noise: 0.0,
            lateral_noise: None,
        }
    }

    pub fn with_noise(mut self, stress: f64, lateral: Option<f64>) -> Self {
        self.stress_noise = stress;
        self.lateral_noise = lateral;
        self
    }

    /// Axial stress and lateral strain at every step without noise.
    pub fn response(
        &self,
        elastic: &ElasticParams<f64>,
        plastic: Option<&PlasticParams<f64>>,
    ) -> Result<(Vec<f64>, Vec<f64>), DataError> {
        match plastic {
            Some(pp) => {
                let r = uniaxial_plastic_driver(&self.strains, self.dt, elastic, pp)?;
                Ok((r.stress, r.lateral))
            }
            None => {
                let (k, g) = elastic.bulk_shear()?;
                Ok(self
                    .strains
                    .iter()
                    .map(|&e| uniaxial_elastic_response(k, g, e))
                    .unzip())
            }
        }
    }

    /// Observation rows for given stress and lateral histories: `sig` rows
    /// first, then `epsq` rows when lateral data are recorded.
    pub fn observations(
        &self,
        stress: &[f64],
        lateral: &[f64],
    ) -> Result<ObservationSet, DataError> {
        let mut blocks = vec![(Component::Stress, stress)];
        if self.lateral_noise.is_some() {
            blocks.push((Component::Lateral, lateral));
        }
        let (mut keys, mut values, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for (comp, series) in blocks {
            let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (i, (&x, &v)) in self.strains.iter().zip(series).enumerate() {
                keys.push(ObservationKey {
                    exp: self.exp,
                    step: i + 1,
                    point: 1,
                    x,
                    y: 0.0,
                    comp,
                });
                values.push(v);
                weights.push(1.0 / scale);
            }
        }
        let mut set = ObservationSet::new(keys, values, weights)?;
        set.set_noise(Component::Stress, self.stress_noise);
        if let Some(s) = self.lateral_noise {
            set.set_noise(Component::Lateral, s);
        }
        Ok(set)
    }
}

/// Runs the protocol at the true parameters and adds seeded Gaussian noise.
pub fn generate_uniaxial_data(
    protocol: &UniaxialProtocol,
    elastic: &ElasticParams<f64>,
    plastic: Option<&PlasticParams<f64>>,
    seed: u64,
) -> Result<ObservationSet, DataError> {
    let (stress, lateral) = protocol.response(elastic, plastic)?;
    let mut rng = rng::seeded(seed);
    let mut noisy = |series: &[f64], sigma: f64| -> Vec<f64> {
        series
            .iter()
            .map(|&v| {
                let z: f64 = rng.sample(StandardNormal);
                v + sigma * z
            })
            .collect()
    };
    let stress = noisy(&stress, protocol.stress_noise);
    let lateral = noisy(&lateral, protocol.lateral_noise.unwrap_or(0.0));
    protocol.observations(&stress, &lateral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{plate_with_hole, PlateGeometry, PlateResolution};

    const SMALL: PlateResolution = PlateResolution { arc: 6, radial: 5 };

    fn meshes() -> (Mesh<f64>, Mesh<f64>) {
        let g = PlateGeometry::default();
        (
            plate_with_hole(&g, SMALL.refined(2)).unwrap(),
            plate_with_hole(&g, SMALL).unwrap(),
        )
    }

    fn truth() -> ElasticParams<f64> {
        ElasticParams::YoungPoisson {
            young: 210000.0,
            poisson: 0.3,
        }
    }

    #[test]
    fn zero_noise_gives_the_interpolated_solution() {
        let (fine, coarse) = meshes();
        let d = generate_plate_data(&fine, &coarse, &truth(), 1500.0, 0.0, 1).unwrap();
        assert_eq!(d.observations.values(), d.clean.as_slice());
        assert_eq!(d.observations.len(), 2 * coarse.n_nodes() + 1);
        let f = d.observations.resultant(1, 1, Component::F1).unwrap();
        assert!((f + 1500.0).abs() < 1e-6);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (fine, coarse) = meshes();
        let a = generate_plate_data(&fine, &coarse, &truth(), 1500.0, 4e-4, 42).unwrap();
        let b = generate_plate_data(&fine, &coarse, &truth(), 1500.0, 4e-4, 42).unwrap();
        let c = generate_plate_data(&fine, &coarse, &truth(), 1500.0, 4e-4, 43).unwrap();
        assert_eq!(
            a.observations.to_csv_string(),
            b.observations.to_csv_string()
        );
        assert_ne!(a.observations.values(), c.observations.values());
        assert_eq!(a.clean, c.clean);
    }

    #[test]
    fn injected_noise_has_the_requested_statistics() {
        let g = PlateGeometry::default();
        let coarse = plate_with_hole::<f64>(
            &g,
            PlateResolution {
                arc: 50,
                radial: 50,
            },
        )
        .unwrap();
        let sigma = 2e-4;
        let d = generate_plate_data(&coarse, &coarse, &truth(), 1500.0, sigma, 7).unwrap();
        let noise: Vec<f64> = d
            .observations
            .keys()
            .iter()
            .zip(d.observations.values().iter().zip(&d.clean))
            .filter(|(k, _)| k.comp.is_displacement())
            .map(|(_, (v, c))| v - c)
            .collect();
        let n = noise.len() as f64;
        assert!(n >= 1e4);
        let mean = noise.iter().sum::<f64>() / n;
        let std = (noise.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sigma / n.sqrt());
        assert!((std / sigma - 1.0).abs() < 0.05);
    }

    #[test]
    fn seed_differences_are_zero_mean() {
        let (fine, coarse) = meshes();
        let a = generate_plate_data(&fine, &coarse, &truth(), 1500.0, 4e-4, 1).unwrap();
        let b = generate_plate_data(&fine, &coarse, &truth(), 1500.0, 4e-4, 2).unwrap();
        let diff: Vec<f64> = a
            .observations
            .values()
            .iter()
            .zip(b.observations.values())
            .zip(a.observations.keys())
            .filter(|(_, k)| k.comp.is_displacement())
            .map(|((x, y), _)| x - y)
            .collect();
        let n = diff.len() as f64;
        let mean = diff.iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * 4e-4 * 2f64.sqrt() / n.sqrt());
        let last = a.observations.len() - 1;
        assert_eq!(a.observations.values()[last], b.observations.values()[last]);
    }

    #[test]
    fn displacement_weights_are_per_direction_maxima() {
        let (fine, coarse) = meshes();
        let d = generate_plate_data(&fine, &coarse, &truth(), 1500.0, 0.0, 1).unwrap();
        let obs = &d.observations;
        let max_u1 = obs
            .keys()
            .iter()
            .zip(obs.values())
            .filter(|(k, _)| k.comp == Component::U1)
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        assert_eq!(obs.weights()[0], 1.0 / max_u1);
        assert_eq!(
            obs.weights()[obs.len() - 1],
            1.0 / obs.values()[obs.len() - 1].abs()
        );
    }

    #[test]
    fn elastic_uniaxial_data_follow_hookes_law() {
        let p = UniaxialProtocol::ramp(1, 0.001, 5, 1.0).with_noise(0.0, Some(0.0));
        let d = generate_uniaxial_data(&p, &truth(), None, 3).unwrap();
        assert_eq!(d.len(), 10);
        for (k, v) in d.keys().iter().zip(d.values()) {
            let expect = match k.comp {
                Component::Stress => 210000.0 * k.x,
                _ => -0.3 * k.x,
            };
            assert!((v - expect).abs() <= 1e-9 * expect.abs());
        }
    }
}
