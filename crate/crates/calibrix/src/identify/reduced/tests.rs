use nalgebra::{DMatrix, DVector};

use super::*;
use crate::identify::fixtures::{
    exact_data, plate, refined_data, relative, true_coefficients, E_TRUE, NU_TRUE,
};
use crate::synthetic::{Component, ObservationKey};

fn layout(values: Vec<f64>, weights: Vec<f64>) -> ObservationSet {
    let keys = (0..values.len())
        .map(|i| ObservationKey {
            exp: 1,
            step: i + 1,
            point: 1,
            x: i as f64,
            y: 0.0,
            comp: Component::Stress,
        })
        .collect();
    ObservationSet::new(keys, values, weights).unwrap()
}

fn free_params(n: usize) -> Vec<Parameter> {
    (0..n)
        .map(|i| Parameter::new(&format!("k{i}"), "-"))
        .collect()
}

fn regression() -> (LinearModel, ObservationSet, DVector<f64>) {
    let x: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
    let a = DMatrix::from_fn(12, 2, |r, c| if c == 0 { 1.0 } else { x[r] });
    let noise = [
        0.03, -0.01, 0.02, -0.04, 0.0, 0.01, -0.02, 0.05, -0.03, 0.01, 0.02, -0.01,
    ];
    let d: Vec<f64> = (0..12).map(|i| 1.5 + 2.0 * x[i] + noise[i]).collect();
    let exact = (a.tr_mul(&a))
        .cholesky()
        .unwrap()
        .solve(&a.tr_mul(&DVector::from_vec(d.clone())));
    let model = LinearModel::new(free_params(2), a, DVector::zeros(12)).unwrap();
    (model, layout(d, vec![1.0; 12]), exact)
}

fn plate_model_and_data(arc: usize, radial: usize, factor: usize) -> (PlateModel, ObservationSet) {
    let (mesh, _, data) = refined_data(arc, radial, factor, 0.0, 0);
    let data = data.filter(|k| k.comp.is_displacement());
    (
        PlateModel::new(mesh, &data, ElasticCoordinates::YoungPoisson).unwrap(),
        data,
    )
}

#[test]
fn identity_model_has_identity_jacobian() {
    let model =
        LinearModel::new(free_params(3), DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
    let s = jacobian_external_nd(&model, &[0.3, -2.0, 7.0], &StepPolicy::default()).unwrap();
    assert!((s.jacobian - DMatrix::<f64>::identity(3, 3)).amax() < 1e-8);
}

#[test]
fn data_at_the_model_give_zero_residual() {
    let (model, _, _) = regression();
    let kappa = [0.7, -1.1];
    let s = model.evaluate(&kappa).unwrap();
    let r = residual(&model, &layout(s, vec![2.0; 12]), &kappa).unwrap();
    assert!(r.raw.iter().all(|v| *v == 0.0));
    assert_eq!(r.objective(), 0.0);
}

#[test]
fn step_halving_is_first_order() {
    let model = ClosureModel::new(free_params(2), 2, |k: &[f64]| {
        Ok(vec![k[0].exp(), k[0] * k[1] * k[1]])
    });
    let kappa = [0.5, 2.0];
    let exact = DMatrix::from_row_slice(2, 2, &[0.5f64.exp(), 0.0, 4.0, 2.0]);
    let err = |h: f64| {
        let j = jacobian_external_nd(
            &model,
            &kappa,
            &StepPolicy {
                relative: h,
                absolute: h,
            },
        )
        .unwrap()
        .jacobian;
        (j - &exact).amax()
    };
    let ratio = err(1e-3) / err(5e-4);
    assert!((1.8..2.2).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn failing_forward_model_names_the_parameter() {
    let model = ClosureModel::new(free_params(2), 1, |k: &[f64]| {
        if k[1] > 1.0 {
            Err(IdentifyError::Options("out of range".into()))
        } else {
            Ok(vec![k[0] + k[1]])
        }
    });
    match jacobian_external_nd(&model, &[0.0, 1.0], &StepPolicy::default()) {
        Err(IdentifyError::Jacobian { name, .. }) => assert_eq!(name, "k1"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn linear_least_squares_is_solved_exactly() {
    let (model, data, exact) = regression();
    let r = solve_nls(&model, &data, &[0.0, 0.0], &NlsOptions::default()).unwrap();
    assert!(r.converged);
    for k in 0..2 {
        assert!(relative(r.parameters.values[k], exact[k]) < 1e-8);
    }
}

#[test]
fn uniform_weight_rescaling_leaves_the_estimate_unchanged() {
    let (model, data, _) = regression();
    let a = solve_nls(&model, &data, &[0.0, 0.0], &NlsOptions::default()).unwrap();
    let scaled = data.with_weights(vec![250.0; 12]).unwrap();
    let b = solve_nls(&model, &scaled, &[0.0, 0.0], &NlsOptions::default()).unwrap();
    for k in 0..2 {
        assert!(relative(b.parameters.values[k], a.parameters.values[k]) < 1e-10);
    }
}

#[test]
fn same_mesh_plate_data_are_recovered() {
    let (mesh, _) = plate(4, 3);
    let data = exact_data(&mesh).filter(|k| k.comp.is_displacement());
    let model = PlateModel::new(mesh, &data, ElasticCoordinates::YoungPoisson).unwrap();
    let r = solve_nls(&model, &data, &[180_000.0, 0.35], &NlsOptions::default()).unwrap();
    assert!(r.converged, "{:?}", r.stop);
    assert!(relative(r.parameters.values[0], E_TRUE) < 1e-6);
    assert!(relative(r.parameters.values[1], NU_TRUE) < 1e-6);
}

#[test]
fn plate_model_rejects_force_rows() {
    let (mesh, _) = plate(2, 2);
    let data = exact_data(&mesh);
    assert!(PlateModel::new(mesh, &data, ElasticCoordinates::Coefficients).is_err());
}

#[test]
fn analytic_and_numerical_sensitivities_agree() {
    for coords in [
        ElasticCoordinates::YoungPoisson,
        ElasticCoordinates::Coefficients,
    ] {
        let (mesh, _) = plate(4, 3);
        let data = exact_data(&mesh).filter(|k| k.comp.is_displacement());
        let model = PlateModel::new(mesh, &data, coords).unwrap();
        let kappa = match coords {
            ElasticCoordinates::YoungPoisson => vec![E_TRUE, NU_TRUE],
            ElasticCoordinates::Coefficients => true_coefficients().to_vec(),
        };
        let analytic = model.analytic_jacobian(&kappa).unwrap();
        let nd = jacobian_external_nd(&model, &kappa, &StepPolicy::default())
            .unwrap()
            .jacobian;
        for c in 0..2 {
            let col = analytic.column(c);
            let err = (nd.column(c) - col).amax() / col.amax();
            assert!(err < 1e-5, "{coords:?} column {c}: {err:e}");
        }
    }
}

#[test]
fn multiplier_form_holds_only_at_the_minimizer() {
    let (model, data) = plate_model_and_data(4, 3, 2);
    let r = solve_nls(&model, &data, &[180_000.0, 0.35], &NlsOptions::default()).unwrap();
    let at_min = model
        .multiplier_residual(&data, &r.parameters.values)
        .unwrap();
    assert!(at_min < 1e-6, "{at_min:e}");
    let away = model
        .multiplier_residual(&data, &[190_000.0, 0.25])
        .unwrap();
    assert!(away > 1e-3, "{away:e}");
}

#[test]
fn landweber_stops_immediately_at_the_solution() {
    let (model, data, exact) = regression();
    let h = landweber_reduced(
        &model,
        &data,
        exact.as_slice(),
        &LandweberOptions::default(),
    )
    .unwrap();
    assert!(h.converged);
    assert_eq!(h.iterations(), 0);
}

#[test]
fn landweber_reaches_the_normal_equation_solution() {
    let (model, data, exact) = regression();
    let h = landweber_reduced(&model, &data, &[0.0, 0.0], &LandweberOptions::default()).unwrap();
    assert!(h.objectives.windows(2).all(|w| w[1] < w[0]));
    for k in 0..2 {
        assert!(
            relative(h.last()[k], exact[k]) < 1e-6,
            "{:?} vs {exact}",
            h.last()
        );
    }
}

#[test]
fn landweber_rejects_steps_beyond_the_bound() {
    let (model, data, _) = regression();
    let opts = LandweberOptions {
        step: StepRule::Constant(10.0),
        ..LandweberOptions::default()
    };
    assert!(matches!(
        landweber_reduced(&model, &data, &[0.0, 0.0], &opts),
        Err(IdentifyError::Options(_))
    ));
}
