use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_len, symmetrize, UncertaintyReport, UqError, UqMethod};
use crate::identify::reduced::{residual, CalibrationResult, ForwardModel};
use crate::synthetic::ObservationSet;

/// `Jᵀ Wᵀ W J` for diagonal `W`.
pub fn hessian_approx(jacobian: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let jw = DMatrix::from_fn(jacobian.nrows(), jacobian.ncols(), |r, c| {
        weights[r] * jacobian[(r, c)]
    });
    symmetrize(&jw.tr_mul(&jw))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    LocallyIdentifiable,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Identifiability {
    pub verdict: Verdict,
    pub determinant: f64,
    /// `λ_min / λ_max` of the approximate Hessian.
    pub eigen_ratio: f64,
    pub eigenvalues: Vec<f64>,
}

impl Identifiability {
    pub fn is_identifiable(&self) -> bool {
        self.verdict == Verdict::LocallyIdentifiable
    }
}

pub fn identifiability_check(hessian: &DMatrix<f64>, tol: f64) -> Identifiability {
    let mut eigenvalues: Vec<f64> = symmetrize(hessian)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(f64::total_cmp);
    let max = eigenvalues.last().copied().unwrap_or(0.0);
    let min = eigenvalues.first().copied().unwrap_or(0.0);
    let eigen_ratio = if max > 0.0 { min / max } else { 0.0 };
    let verdict = if eigen_ratio > tol {
        Verdict::LocallyIdentifiable
    } else {
        Verdict::RankDeficient
    };
    Identifiability {
        verdict,
        determinant: hessian.determinant(),
        eigen_ratio,
        eigenvalues,
    }
}

/// Two-sided standard normal quantile for a confidence level.
pub fn z_value(level: f64) -> Result<f64, UqError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(UqError::Level(level));
    }
    if level == 0.95 {
        return Ok(1.96);
    }
    if level == 0.68 {
        return Ok(1.0);
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + 0.5 * level))
}

/// Asymptotic covariance `s² (JᵀJ)⁻¹` from unweighted residuals and
/// sensitivities, with `s² = rᵀr / (n_D − 1)`.
pub fn covariance_and_ci(
    result: &CalibrationResult,
    level: f64,
) -> Result<UncertaintyReport, UqError> {
    let n = result.residual.len();
    check_len("Jacobian rows", n, result.jacobian.nrows())?;
    if n < 2 {
        return Err(UqError::Identifiability(
            "fewer than two observations".into(),
        ));
    }
    let s2 = result.residual.iter().map(|r| r * r).sum::<f64>() / (n as f64 - 1.0);
    let gram_inv = gram_inverse(&result.jacobian)?;
    let covariance = &gram_inv * s2;
    let mut report = UncertaintyReport::from_covariance(
        UqMethod::Asymptotic,
        &result.parameters.meta,
        &result.parameters.values,
        &covariance,
        level,
    )?;
    report.s2 = Some(s2);
    report.det_hessian = Some(result.identifiability.determinant);
    report.eigen_ratio = Some(result.identifiability.eigen_ratio);
    Ok(report)
}

/// `(JᵀJ)⁻¹`, symmetrized.
pub(crate) fn gram_inverse(j: &DMatrix<f64>) -> Result<DMatrix<f64>, UqError> {
    let gram = symmetrize(&j.tr_mul(j));
    let check = identifiability_check(&gram, 1e-14);
    if !check.is_identifiable() {
        return Err(UqError::Identifiability(format!(
            "JᵀJ eigenvalue ratio {:e}",
            check.eigen_ratio
        )));
    }
    let inv = gram
        .cholesky()
        .ok_or_else(|| UqError::Identifiability("JᵀJ is not positive definite".into()))?
        .inverse();
    Ok(symmetrize(&inv))
}

/// Gaussian log-likelihood of the residual under independent noise with
/// standard deviations `sigma`, constants included. A failed forward solve
/// gives `−∞`.
pub fn log_likelihood(
    model: &dyn ForwardModel,
    data: &ObservationSet,
    kappa: &[f64],
    sigma: &[f64],
) -> Result<f64, UqError> {
    check_len("noise levels", data.len(), sigma.len())?;
    let Ok(r) = residual(model, data, kappa) else {
        return Ok(f64::NEG_INFINITY);
    };
    Ok(gaussian_log_density(&r.raw, sigma))
}

pub(crate) fn gaussian_log_density(r: &[f64], sigma: &[f64]) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    r.iter()
        .zip(sigma)
        .map(|(r, s)| -0.5 * (r / s).powi(2) - s.ln() - 0.5 * ln_2pi)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::reduced::LinearModel;
    use crate::identify::Parameter;
    use crate::synthetic::{Component, ObservationKey};
    use nalgebra::DVector;
    use proptest::prelude::*;

    #[test]
    fn identity_sensitivities_give_identity_hessian() {
        let h = hessian_approx(&DMatrix::identity(3, 3), &[1.0; 3]);
        assert_eq!(h, DMatrix::identity(3, 3));
    }

    #[test]
    fn verdicts() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            identifiability_check(&h, 1e-12).verdict,
            Verdict::RankDeficient
        );
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        assert_eq!(
            identifiability_check(&hessian_approx(&j, &[1.0; 3]), 1e-12).verdict,
            Verdict::RankDeficient
        );
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let v = identifiability_check(&h, 1e-12);
        assert!(v.is_identifiable());
        assert!((v.determinant - 1.75).abs() < 1e-14);
    }

    #[test]
    fn quantiles() {
        assert_eq!(z_value(0.95).unwrap(), 1.96);
        assert_eq!(z_value(0.68).unwrap(), 1.0);
        assert!((z_value(0.99).unwrap() - 2.5758293035489).abs() < 1e-9);
        assert!(z_value(1.0).is_err());
    }

    proptest! {
        #[test]
        fn gauss_newton_hessian_is_psd(entries in prop::collection::vec(-10.0f64..10.0, 12),
                                       weights in prop::collection::vec(0.01f64..5.0, 4)) {
            let j = DMatrix::from_row_slice(4, 3, &entries);
            let h = hessian_approx(&j, &weights);
            prop_assert_eq!(&h, &h.transpose());
            let min = h.symmetric_eigenvalues().min();
            prop_assert!(min >= -1e-12 * (1.0 + h.norm()));
        }
    }

    fn line_data(x: &[f64], y: &[f64]) -> ObservationSet {
        let keys = x
            .iter()
            .enumerate()
            .map(|(i, &x)| ObservationKey {
                exp: 1,
                step: i + 1,
                point: 1,
                x,
                y: 0.0,
                comp: Component::Stress,
            })
            .collect();
        ObservationSet::new(keys, y.to_vec(), vec![1.0; x.len()]).unwrap()
    }

    #[test]
    fn linear_regression_variance_matches_closed_form() {
        use crate::identify::reduced::{solve_nls, NlsOptions};
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.1, 3.9, 6.2, 7.8, 10.1];
        let model = LinearModel::new(
            vec![Parameter::new("slope", "-")],
            DMatrix::from_column_slice(5, 1, &x),
            DVector::zeros(5),
        )
        .unwrap();
        let result = solve_nls(&model, &line_data(&x, &y), &[1.0], &NlsOptions::default()).unwrap();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let slope = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sxx;
        let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - slope * a).powi(2)).sum();
        let var = rss / 4.0 / sxx;
        let report = result.uncertainty.unwrap();
        assert!((report.parameters[0].estimate - slope).abs() < 1e-9);
        assert!((report.covariance[0][0] / var - 1.0).abs() < 1e-6);
        let half = report.parameters[0].upper - report.parameters[0].estimate;
        assert!((half - 1.96 * var.sqrt()).abs() < 1e-6 * var.sqrt());
    }

    #[test]
    fn zero_residual_gives_zero_width() {
        use crate::identify::reduced::{solve_nls, NlsOptions};
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let model = LinearModel::new(
            vec![Parameter::new("slope", "-")],
            DMatrix::from_column_slice(3, 1, &x),
            DVector::zeros(3),
        )
        .unwrap();
        let result = solve_nls(&model, &line_data(&x, &y), &[2.0], &NlsOptions::default()).unwrap();
        let report = covariance_and_ci(&result, 0.95).unwrap();
        assert_eq!(report.covariance[0][0], 0.0);
        assert_eq!(report.parameters[0].lower, report.parameters[0].upper);
    }

    #[test]
    fn likelihood_peaks_at_zero_residual() {
        let x = [1.0, 2.0];
        let model = LinearModel::new(
            vec![Parameter::new("slope", "-")],
            DMatrix::from_column_slice(2, 1, &x),
            DVector::zeros(2),
        )
        .unwrap();
        let data = line_data(&x, &[3.0, 6.0]);
        let sigma = [0.5, 2.0];
        let l = log_likelihood(&model, &data, &[3.0], &sigma).unwrap();
        let expect = -(2.0 / 2.0) * (2.0 * std::f64::consts::PI).ln() - 0.5 * (0.25f64 * 4.0).ln();
        assert!((l - expect).abs() < 1e-12);
        let l1 = log_likelihood(&model, &data, &[3.5], &sigma).unwrap();
        let r = [0.5 / 0.5, 1.0 / 2.0];
        let half_norm = 0.5 * (r[0] * r[0] + r[1] * r[1]);
        assert!((l - l1 - half_norm).abs() < 1e-12);
    }
}
