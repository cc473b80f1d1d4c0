//! Small plate problems shared by the identification tests.

use crate::materials::{plane_stress_coefficients, ElasticParams};
use crate::mesh::{plate_with_hole, DofPartition, Mesh, PlateGeometry, PlateResolution};
use crate::synthetic::{generate_plate_data, ObservationSet};

pub const E_TRUE: f64 = 210_000.0;
pub const NU_TRUE: f64 = 0.3;

pub fn truth() -> ElasticParams<f64> {
    ElasticParams::YoungPoisson {
        young: E_TRUE,
        poisson: NU_TRUE,
    }
}

pub fn true_coefficients() -> [f64; 2] {
    let (c11, c12) = plane_stress_coefficients(E_TRUE, NU_TRUE);
    [c11, c12]
}

pub fn plate(arc: usize, radial: usize) -> (Mesh<f64>, DofPartition) {
    let mesh = plate_with_hole(&PlateGeometry::default(), PlateResolution { arc, radial }).unwrap();
    let part = DofPartition::new(&mesh);
    (mesh, part)
}

/// FE solution on `mesh` itself, so the data are exact for this mesh.
pub fn exact_data(mesh: &Mesh<f64>) -> ObservationSet {
    generate_plate_data(mesh, mesh, &truth(), 1500.0, 0.0, 0)
        .unwrap()
        .observations
}

/// Data from a mesh refined by `factor`, with optional noise.
pub fn refined_data(
    arc: usize,
    radial: usize,
    factor: usize,
    sigma: f64,
    seed: u64,
) -> (Mesh<f64>, DofPartition, ObservationSet) {
    let (coarse, part) = plate(arc, radial);
    let (fine, _) = plate(arc * factor, radial * factor);
    let data = generate_plate_data(&fine, &coarse, &truth(), 1500.0, sigma, seed)
        .unwrap()
        .observations;
    (coarse, part, data)
}

pub fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
