use nalgebra::{DMatrix, DVector};

use super::*;
use crate::identify::fixtures::{exact_data, plate, refined_data, relative, true_coefficients};
use crate::identify::vfm::{solve_vfm, DEFAULT_RESULTANT_WEIGHT};
use crate::synthetic::ObservationKey;

fn noisy_problem(
    arc: usize,
    radial: usize,
) -> (AaoProblem, ObservationSet, Mesh<f64>, DofPartition) {
    let (mesh, part, data) = refined_data(arc, radial, 3, 1e-4, 11);
    let problem = AaoProblem::new(&mesh, &part, &data, DEFAULT_RESULTANT_WEIGHT).unwrap();
    (problem, data, mesh, part)
}

/// `σ_d` as a multiple of the largest eigenvalue of `K Kᵀ`.
fn relative_weights(problem: &AaoProblem, ratio: f64) -> AaoWeights {
    AaoWeights::new(
        1.0,
        ratio * problem.stiffness_scale(DEFAULT_INITIAL_COEFFICIENTS),
    )
}

fn dense_jacobian(objective: &JointObjective, beta: &JointVector) -> DMatrix<f64> {
    let n = beta.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            objective.apply_jacobian(
                beta,
                &JointVector::from_stacked(&e, beta.n_state()).unwrap(),
            )
        })
        .collect();
    DMatrix::from_fn(cols[0].len(), n, |i, j| cols[j][i])
}

fn perturbed(problem: &AaoProblem) -> JointVector {
    let mut beta = problem.initial_guess(true_coefficients().map(|c| 1.07 * c));
    for (i, u) in beta.state.iter_mut().enumerate() {
        *u *= 1.0 + 0.01 * ((i % 7) as f64 - 3.0);
    }
    beta
}

#[test]
fn joint_vector_round_trips() {
    let beta = JointVector::new(vec![1.0, 2.0, 3.0], [4.0, 5.0]);
    assert_eq!(JointVector::from_stacked(&beta.stacked(), 3).unwrap(), beta);
    assert!(JointVector::from_stacked(&[1.0, 2.0], 3).is_err());
}

#[test]
fn transpose_product_is_the_adjoint() {
    let (problem, ..) = noisy_problem(2, 2);
    let weights = AaoWeights {
        gamma_s: 0.3,
        gamma_p: 1e-6,
        ..relative_weights(&problem, 1e-2)
    };
    for formulation in [AaoFormulation::Fem, AaoFormulation::Vfm] {
        let obj = JointObjective::new(&problem, formulation, weights, DEFAULT_INITIAL_COEFFICIENTS)
            .unwrap();
        let beta = perturbed(&problem);
        let v = JointVector::new(
            (0..problem.n_state())
                .map(|i| (i as f64).sin() * 1e-3)
                .collect(),
            [3.0, -2.0],
        );
        let jv = obj.apply_jacobian(&beta, &v);
        let r: Vec<f64> = (0..jv.len()).map(|i| (0.3 * i as f64).cos()).collect();
        let jtr = obj.apply_jacobian_transpose(&beta, &r).unwrap();
        let lhs = dot(&jv, &r);
        let rhs = dot(&v.stacked(), &jtr.stacked());
        assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()),
            "{formulation:?}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn gradient_matches_central_differences() {
    let (problem, ..) = noisy_problem(2, 2);
    let weights = AaoWeights {
        gamma_s: 0.3,
        gamma_p: 1e-6,
        ..relative_weights(&problem, 1e-2)
    };
    for formulation in [AaoFormulation::Fem, AaoFormulation::Vfm] {
        let obj = JointObjective::new(&problem, formulation, weights, DEFAULT_INITIAL_COEFFICIENTS)
            .unwrap();
        let beta = perturbed(&problem);
        let g = obj.gradient(&beta).unwrap().stacked();
        let x = beta.stacked();
        for j in [0, 3, x.len() - 2, x.len() - 1] {
            let h = 1e-6 * x[j].abs().max(1e-6);
            let at = |s: f64| {
                let mut y = x.clone();
                y[j] += s * h;
                obj.objective(&JointVector::from_stacked(&y, beta.n_state()).unwrap())
            };
            let fd = (at(1.0) - at(-1.0)) / (2.0 * h);
            assert!(
                (fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3),
                "{formulation:?} entry {j}: {fd} vs {}",
                g[j]
            );
        }
    }
}

#[test]
fn gauss_newton_direction_solves_the_dense_normal_equations() {
    let (problem, ..) = noisy_problem(2, 2);
    let cases = [
        (
            AaoFormulation::Fem,
            AaoWeights {
                gamma_s: 0.0,
                gamma_p: 0.0,
                ..relative_weights(&problem, 1e-2)
            },
        ),
        (
            AaoFormulation::Fem,
            AaoWeights {
                gamma_s: 0.5,
                gamma_p: 1e-6,
                ..relative_weights(&problem, 1e-3)
            },
        ),
        (
            AaoFormulation::Vfm,
            AaoWeights {
                sigma_s: 1.0,
                sigma_d: 0.5,
                gamma_s: 1e6,
                gamma_p: 1e-6,
            },
        ),
    ];
    for (formulation, weights) in cases {
        let obj = JointObjective::new(&problem, formulation, weights, DEFAULT_INITIAL_COEFFICIENTS)
            .unwrap();
        let beta = perturbed(&problem);
        let j = dense_jacobian(&obj, &beta);
        let r = DVector::from_vec(obj.residual_vector(&beta));
        let expected = (j.tr_mul(&j)).lu().solve(&(-j.tr_mul(&r))).unwrap();
        let step = obj.gauss_newton_direction(&beta).unwrap().stacked();
        let err = (DVector::from_vec(step) - &expected).norm() / expected.norm();
        assert!(
            err < 1e-6,
            "{formulation:?} {weights:?}: relative error {err:e}"
        );
    }
}

#[test]
fn state_minimizer_is_stationary() {
    let (problem, ..) = noisy_problem(2, 2);
    let cases = [
        (AaoFormulation::Fem, relative_weights(&problem, 1e-2)),
        (AaoFormulation::Vfm, AaoFormulation::Vfm.default_weights()),
    ];
    for (formulation, weights) in cases {
        let obj = JointObjective::new(&problem, formulation, weights, true_coefficients()).unwrap();
        let u = obj.minimize_state(true_coefficients()).unwrap();
        let beta = JointVector::new(u, true_coefficients());
        let g = obj.gradient(&beta).unwrap();
        let ev = obj.evaluate(&beta);
        let ku = ev.k.matvec(&beta.state);
        let scale = norm(&ev.k.matvec_transpose(&ku)) * obj.weights.sigma_s + norm(&g.state);
        assert!(
            norm(&g.state) <= 1e-6 * scale.max(1e-300),
            "{formulation:?}: {:e} vs {scale:e}",
            norm(&g.state)
        );
    }
}

#[test]
fn semi_norm_parameters_at_the_data_are_the_vfm_solution() {
    let (problem, data, mesh, part) = noisy_problem(3, 3);
    let vfm = solve_vfm(&mesh, &part, &data, DEFAULT_RESULTANT_WEIGHT).unwrap();
    let obj = JointObjective::new(
        &problem,
        AaoFormulation::Vfm,
        AaoFormulation::Vfm.default_weights(),
        [0.0; 2],
    )
    .unwrap();
    let kappa = obj.minimize_parameters(problem.measured()).unwrap();
    for k in 0..2 {
        assert!(relative(kappa[k], vfm.coefficients[k]) < 1e-10);
    }
}

#[test]
fn semi_norm_solution_coincides_with_the_vfm() {
    let (problem, data, mesh, part) = noisy_problem(3, 3);
    let vfm = solve_vfm(&mesh, &part, &data, DEFAULT_RESULTANT_WEIGHT).unwrap();
    let cases = [
        (
            BlockSolver::GaussNewton,
            AaoFormulation::Vfm.default_weights(),
        ),
        (BlockSolver::GaussSeidel, relative_weights(&problem, 1.0)),
    ];
    for (solver, weights) in cases {
        let opts = AaoOptions {
            weights,
            solver,
            max_iterations: 2000,
            ..AaoOptions::default()
        };
        let r = aao_vfm_solve(
            &problem,
            &problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS),
            &opts,
        )
        .unwrap();
        assert!(r.converged, "{solver:?}: {:?}", r.stop);
        assert!(!r.warnings.is_empty());
        for k in 0..2 {
            assert!(
                relative(r.coefficients()[k], vfm.coefficients[k]) < 1e-8,
                "{solver:?}: {:?}",
                r.coefficients()
            );
        }
    }
}

#[test]
fn alternating_minimization_stalls_under_a_tiny_semi_norm_weight() {
    let (problem, ..) = noisy_problem(2, 2);
    let opts = AaoOptions {
        weights: AaoFormulation::Vfm.default_weights(),
        solver: BlockSolver::GaussSeidel,
        max_iterations: 50,
        ..AaoOptions::default()
    };
    let r = aao_vfm_solve(
        &problem,
        &problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS),
        &opts,
    )
    .unwrap();
    assert!(!r.converged);
    assert_eq!(r.stop, StopReason::MaxIterations);
}

#[test]
fn exact_data_are_a_zero_objective_minimizer() {
    let (mesh, part) = plate(3, 3);
    let data = exact_data(&mesh);
    let problem = AaoProblem::new(&mesh, &part, &data, DEFAULT_RESULTANT_WEIGHT).unwrap();
    let opts = AaoOptions::default();
    let r = aao_fem_solve(
        &problem,
        &problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS),
        &opts,
    )
    .unwrap();
    let truth = true_coefficients();
    for k in 0..2 {
        assert!(
            relative(r.coefficients()[k], truth[k]) < 1e-6,
            "{:?}",
            r.coefficients()
        );
    }
}

#[test]
fn large_data_weight_recovers_the_vfm() {
    let (problem, data, mesh, part) = noisy_problem(3, 3);
    let vfm = solve_vfm(&mesh, &part, &data, DEFAULT_RESULTANT_WEIGHT).unwrap();
    let mut errors = Vec::new();
    for ratio in [1e2, 1e4, 1e6] {
        let opts = AaoOptions {
            weights: relative_weights(&problem, ratio),
            ..AaoOptions::default()
        };
        let r = aao_fem_solve(
            &problem,
            &problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS),
            &opts,
        )
        .unwrap();
        errors.push(
            (0..2)
                .map(|k| relative(r.coefficients()[k], vfm.coefficients[k]))
                .fold(0.0, f64::max),
        );
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 1e-3, "{errors:?}");
}

#[test]
fn first_order_conditions_hold_in_multiplier_form() {
    let (problem, ..) = noisy_problem(3, 3);
    let opts = AaoOptions {
        weights: relative_weights(&problem, 1e-2),
        ..AaoOptions::default()
    };
    let r = aao_fem_solve(
        &problem,
        &problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS),
        &opts,
    )
    .unwrap();
    assert!(r.converged);
    let obj = JointObjective::new(
        &problem,
        AaoFormulation::Fem,
        opts.weights,
        DEFAULT_INITIAL_COEFFICIENTS,
    )
    .unwrap();
    let foc = obj.foc(&r.solution).unwrap();
    assert!(
        foc.parameter_residual < 1e-6 && foc.state_residual < 1e-6,
        "{foc:?}"
    );
    assert!(r.equilibrium_gap > 0.0);
}

#[test]
fn block_gauss_seidel_agrees_with_gauss_newton() {
    let (problem, ..) = noisy_problem(2, 2);
    let weights = relative_weights(&problem, 1e-1);
    let start = problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS);
    let gn = aao_fem_solve(
        &problem,
        &start,
        &AaoOptions {
            weights,
            ..AaoOptions::default()
        },
    )
    .unwrap();
    let gs = aao_fem_solve(
        &problem,
        &start,
        &AaoOptions {
            weights,
            solver: BlockSolver::GaussSeidel,
            max_iterations: 20_000,
            ..AaoOptions::default()
        },
    )
    .unwrap();
    for k in 0..2 {
        assert!(
            relative(gs.coefficients()[k], gn.coefficients()[k]) < 1e-6,
            "{:?} vs {:?}",
            gs.coefficients(),
            gn.coefficients()
        );
    }
}

#[test]
fn landweber_stops_at_the_minimizer() {
    let (problem, ..) = noisy_problem(1, 1);
    let weights = relative_weights(&problem, 1e-2);
    let start = problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS);
    let gn = aao_fem_solve(
        &problem,
        &start,
        &AaoOptions {
            weights,
            ..AaoOptions::default()
        },
    )
    .unwrap();
    let obj = JointObjective::new(
        &problem,
        AaoFormulation::Fem,
        weights,
        DEFAULT_INITIAL_COEFFICIENTS,
    )
    .unwrap();
    let h = landweber_aao(&obj, &gn.solution, &LandweberOptions::default()).unwrap();
    assert!(h.converged);
    assert!(h.iterations() <= 1, "{} iterations", h.iterations());
}

#[test]
fn landweber_matches_gauss_newton_on_two_elements() {
    let (problem, ..) = noisy_problem(1, 1);
    let weights = relative_weights(&problem, 1e-2);
    let start = problem.initial_guess(DEFAULT_INITIAL_COEFFICIENTS);
    let gn = aao_fem_solve(
        &problem,
        &start,
        &AaoOptions {
            weights,
            ..AaoOptions::default()
        },
    )
    .unwrap();
    let obj = JointObjective::new(
        &problem,
        AaoFormulation::Fem,
        weights,
        DEFAULT_INITIAL_COEFFICIENTS,
    )
    .unwrap();
    let opts = LandweberOptions {
        max_iterations: 100_000,
        ..LandweberOptions::default()
    };
    let h = landweber_aao(&obj, &start, &opts).unwrap();
    assert!(h.objectives.windows(2).all(|w| w[1] < w[0]));
    let last = h.last.parameters;
    for k in 0..2 {
        assert!(
            relative(last[k], gn.coefficients()[k]) < 1e-3,
            "{last:?} vs {:?} after {}",
            gn.coefficients(),
            h.iterations()
        );
    }
}

#[test]
fn several_load_steps_are_rejected() {
    let (mesh, part) = plate(1, 1);
    let data = exact_data(&mesh);
    let mut keys = data.keys().to_vec();
    keys.extend(data.keys().iter().map(|k| ObservationKey { step: 2, ..*k }));
    let mut values = data.values().to_vec();
    values.extend_from_slice(data.values());
    let mut weights = data.weights().to_vec();
    weights.extend_from_slice(data.weights());
    let two = ObservationSet::new(keys, values, weights).unwrap();
    assert!(matches!(
        AaoProblem::new(&mesh, &part, &two, 1.0),
        Err(IdentifyError::Options(_))
    ));
}
