use calibrix::identify::aao::{
    aao_solve, AaoFormulation, AaoOptions, AaoProblem, DEFAULT_INITIAL_COEFFICIENTS,
};
use calibrix::identify::reduced::{solve_nls, ElasticCoordinates, NlsOptions, PlateModel};
use calibrix::identify::vfm::{solve_vfm, DEFAULT_RESULTANT_WEIGHT};
use calibrix::materials::{young_poisson_from_coefficients, ElasticParams};
use calibrix::mesh::{plate_with_hole, DofPartition, Mesh, PlateGeometry, PlateResolution};
use calibrix::synthetic::{generate_plate_data, ObservationSet};
use proptest::prelude::*;

fn same_mesh_data(young: f64, poisson: f64) -> (Mesh<f64>, DofPartition, ObservationSet) {
    let mesh = plate_with_hole(
        &PlateGeometry::default(),
        PlateResolution { arc: 4, radial: 3 },
    )
    .unwrap();
    let part = DofPartition::new(&mesh);
    let truth = ElasticParams::YoungPoisson { young, poisson };
    let data = generate_plate_data(&mesh, &mesh, &truth, 1500.0, 0.0, 0)
        .unwrap()
        .observations;
    (mesh, part, data)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn every_method_recovers_same_mesh_truth(young in 150_000.0..250_000.0f64, poisson in 0.2..0.4f64) {
        let (mesh, part, data) = same_mesh_data(young, poisson);

        let disp = data.filter(|k| k.comp.is_displacement());
        let model = PlateModel::new(mesh.clone(), &disp, ElasticCoordinates::YoungPoisson).unwrap();
        let reduced = solve_nls(&model, &disp, &[180_000.0, 0.35], &NlsOptions::default()).unwrap();
        prop_assert!((reduced.parameters.values[0] / young - 1.0).abs() < 1e-6);
        prop_assert!((reduced.parameters.values[1] - poisson).abs() < 1e-6);

        let vfm = solve_vfm(&mesh, &part, &data, DEFAULT_RESULTANT_WEIGHT).unwrap();
        prop_assert!((vfm.parameters.values[0] / young - 1.0).abs() < 1e-8);
        prop_assert!((vfm.parameters.values[1] - poisson).abs() < 1e-8);

        let problem = AaoProblem::new(&mesh, &part, &data, DEFAULT_RESULTANT_WEIGHT).unwrap();
        let start = problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS);
        let aao = aao_solve(&problem, AaoFormulation::Fem, &start, &AaoOptions::default()).unwrap();
        let [c11, c12] = aao.coefficients();
        let (e, nu) = young_poisson_from_coefficients(c11, c12);
        prop_assert!((e / young - 1.0).abs() < 1e-6, "aao E {e} vs {young}");
        prop_assert!((nu - poisson).abs() < 1e-6, "aao nu {nu} vs {poisson}");
    }
}
