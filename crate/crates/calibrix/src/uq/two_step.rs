use nalgebra::DMatrix;

use super::frequentist::gram_inverse;
use super::{check_len, symmetrize, UncertaintyReport, UqError, UqMethod};
use crate::identify::reduced::{jacobian_external_nd, ClosureModel, StepPolicy};
use crate::identify::{IdentifyError, Parameter};

/// Sensitivities of the plastic-step model outputs at `(κ_e*, κ_p*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepSensitivities {
    /// `J_p = ∂s_p/∂κ_p`.
    pub plastic: DMatrix<f64>,
    /// `J_pe = ∂s_p/∂κ_e`.
    pub cross: DMatrix<f64>,
    /// `∂J_p/∂κ_e,k` for every elastic parameter `k`.
    pub curvature: Vec<DMatrix<f64>>,
}

/// Forward differences of `s_p(κ_e, κ_p)` around the two-step estimate.
pub fn two_step_sensitivities<F>(
    model: F,
    outputs: usize,
    elastic: &[f64],
    plastic: &[f64],
    steps: &StepPolicy,
) -> Result<TwoStepSensitivities, UqError>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>, IdentifyError> + Sync,
{
    let unbounded = |n: usize, tag: &str| {
        (0..n)
            .map(|i| Parameter::new(&format!("{tag}{i}"), ""))
            .collect::<Vec<_>>()
    };
    let plastic_jacobian = |ke: &[f64]| -> Result<DMatrix<f64>, IdentifyError> {
        let m = ClosureModel::new(unbounded(plastic.len(), "p"), outputs, |kp: &[f64]| {
            model(ke, kp)
        });
        Ok(jacobian_external_nd(&m, plastic, steps)?.jacobian)
    };
    let jp = plastic_jacobian(elastic)?;
    let cross_model = ClosureModel::new(unbounded(elastic.len(), "e"), outputs, |ke: &[f64]| {
        model(ke, plastic)
    });
    let cross = jacobian_external_nd(&cross_model, elastic, steps)?.jacobian;
    let curvature = (0..elastic.len())
        .map(|k| {
            let h = steps.step(elastic[k]);
            let mut shifted = elastic.to_vec();
            shifted[k] += h;
            Ok((plastic_jacobian(&shifted)? - &jp) / h)
        })
        .collect::<Result<Vec<_>, IdentifyError>>()?;
    Ok(TwoStepSensitivities {
        plastic: jp,
        cross,
        curvature,
    })
}

/// Plastic-parameter covariance including the elastic-step uncertainty.
///
/// With `Q = (2/m) J_pᵀJ_p` and
/// `Z = (4/m)[σ² J_pᵀJ_p + J_pᵀJ_pe Σ_e J_peᵀJ_p + σ² G_pe Σ_e]`, the
/// covariance is `C = (1/m) Q⁻¹ Z Q⁻¹`, where
/// `(G_pe Σ_e)_{jj'} = Σ_i Σ_{kk'} ∂²s_i/∂κ_pj∂κ_ek ∂²s_i/∂κ_pj'∂κ_ek' Σ_kk'`.
/// The first term of `Z` contributes exactly `σ² (J_pᵀJ_p)⁻¹`, which is
/// evaluated in that form so that `Σ_e = 0` reproduces the one-step
/// covariance bit for bit. The row count is used for `m`, which cancels.
///
/// `std` holds the one-step `Δ`, `two_step_std` the combined `δ`, and the
/// intervals use `δ`.
pub fn two_step_covariance(
    meta: &[Parameter],
    estimate: &[f64],
    sens: &TwoStepSensitivities,
    elastic_cov: &DMatrix<f64>,
    sigma2: f64,
    level: f64,
) -> Result<UncertaintyReport, UqError> {
    let np = meta.len();
    let ne = sens.cross.ncols();
    check_len("plastic sensitivities", np, sens.plastic.ncols())?;
    check_len("elastic covariance", ne, elastic_cov.nrows())?;
    check_len("curvature terms", ne, sens.curvature.len())?;
    let n = sens.plastic.nrows();
    let m = n as f64;
    let jp = &sens.plastic;
    let gram_inv = gram_inverse(jp)?;
    let one_step = &gram_inv * sigma2;

    let coupling = jp.tr_mul(&sens.cross);
    let mut g = DMatrix::<f64>::zeros(np, np);
    for i in 0..n {
        let mi = DMatrix::from_fn(np, ne, |j, k| sens.curvature[k][(i, j)]);
        g += &mi * elastic_cov * mi.transpose();
    }
    let z_extra =
        symmetrize(&((&coupling * elastic_cov * coupling.transpose() + g * sigma2) * (4.0 / m)));
    let z_full = symmetrize(&(jp.tr_mul(jp) * (4.0 * sigma2 / m))) + &z_extra;
    let eig = z_full.symmetric_eigenvalues();
    if eig.min() < -1e-10 * eig.amax().max(f64::MIN_POSITIVE) {
        return Err(UqError::NotPsd(eig.min()));
    }
    let q_inv = &gram_inv * (m / 2.0);
    let extra = symmetrize(&(&q_inv * z_extra * &q_inv / m));
    let covariance = &one_step + extra;

    let mut report =
        UncertaintyReport::from_covariance(UqMethod::TwoStep, meta, estimate, &covariance, level)?;
    let z = super::z_value(level)?;
    for (i, row) in report.parameters.iter_mut().enumerate() {
        let delta = row.std;
        row.std = one_step[(i, i)].max(0.0).sqrt();
        row.two_step_std = Some(delta);
        row.lower = row.estimate - z * delta;
        row.upper = row.estimate + z * delta;
    }
    report.s2 = Some(sigma2);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::reduced::{solve_nls, NlsOptions};
    use crate::synthetic::{Component, ObservationKey, ObservationSet};
    use crate::uq::covariance_and_ci;

    const XS: [f64; 8] = [0.1, 0.4, 0.7, 1.0, 1.3, 1.6, 1.9, 2.2];

    fn coupled(ke: &[f64], kp: &[f64]) -> Result<Vec<f64>, IdentifyError> {
        Ok(XS
            .iter()
            .map(|x| kp[0] * x + kp[1] * ke[0] * x * x + ke[1] * (kp[0] * x).sin())
            .collect())
    }

    fn data(ke: &[f64], kp: &[f64]) -> ObservationSet {
        let noise = [0.01, -0.02, 0.015, 0.0, -0.01, 0.02, -0.005, 0.01];
        let values: Vec<f64> = coupled(ke, kp)
            .unwrap()
            .iter()
            .zip(noise)
            .map(|(v, e)| v + e)
            .collect();
        let keys = (0..XS.len())
            .map(|i| ObservationKey {
                exp: 1,
                step: i + 1,
                point: 1,
                x: XS[i],
                y: 0.0,
                comp: Component::Stress,
            })
            .collect();
        ObservationSet::new(keys, values, vec![1.0; XS.len()]).unwrap()
    }

    fn meta() -> Vec<Parameter> {
        vec![Parameter::new("a", ""), Parameter::new("b", "")]
    }

    #[test]
    fn vanishing_elastic_covariance_reproduces_the_one_step_report() {
        let ke = [0.8, 0.3];
        let d = data(&ke, &[1.2, 0.5]);
        let model = ClosureModel::new(meta(), XS.len(), |kp: &[f64]| coupled(&ke, kp));
        let fit = solve_nls(&model, &d, &[1.0, 0.4], &NlsOptions::default()).unwrap();
        let one_step = covariance_and_ci(&fit, 0.95).unwrap();
        let sens = two_step_sensitivities(
            coupled,
            XS.len(),
            &ke,
            &fit.parameters.values,
            &StepPolicy::default(),
        )
        .unwrap();
        let s2 = one_step.s2.unwrap();
        let zero = DMatrix::zeros(2, 2);
        let two =
            two_step_covariance(&meta(), &fit.parameters.values, &sens, &zero, s2, 0.95).unwrap();
        for (a, b) in one_step.parameters.iter().zip(&two.parameters) {
            assert_eq!(a.std, b.two_step_std.unwrap());
            assert_eq!(a.std, b.std);
        }
    }

    #[test]
    fn elastic_uncertainty_only_widens_the_intervals() {
        let ke = [0.8, 0.3];
        let kp = [1.2, 0.5];
        let sens =
            two_step_sensitivities(coupled, XS.len(), &ke, &kp, &StepPolicy::default()).unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[1e-3, 2e-4, 2e-4, 5e-4]);
        let two = two_step_covariance(&meta(), &kp, &sens, &cov, 1e-4, 0.95).unwrap();
        for row in &two.parameters {
            assert!(row.two_step_std.unwrap() > row.std);
        }
    }

    #[test]
    fn cross_sensitivity_matches_the_closed_form() {
        let ke = [0.8, 0.3];
        let kp = [1.2, 0.5];
        let sens =
            two_step_sensitivities(coupled, XS.len(), &ke, &kp, &StepPolicy::default()).unwrap();
        for (i, x) in XS.iter().enumerate() {
            assert!((sens.cross[(i, 0)] - kp[1] * x * x).abs() < 1e-5);
            assert!((sens.cross[(i, 1)] - (kp[0] * x).sin()).abs() < 1e-5);
            assert!(
                (sens.curvature[0][(i, 1)] - x * x).abs() < 1e-2 * x * x,
                "{} vs {}",
                sens.curvature[0][(i, 1)],
                x * x
            );
        }
    }
}
