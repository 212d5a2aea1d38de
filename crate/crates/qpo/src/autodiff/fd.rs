//! Central finite differences, the independent oracle for [`backward`].
//!
//! Deliberately shares nothing with the tape: it only needs scalar
//! re-evaluations of a closure at perturbed parameter vectors.
//!
//! [`backward`]: super::backward

use super::params::{Gradient, ParamVector};
use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `params` with half-step `step`.
///
/// Each coordinate is perturbed in isolation and restored bit-exactly.
/// Non-finite evaluations are collected per coordinate and reported together.
pub fn finite_diff<F>(mut f: F, params: &ParamVector, step: f64) -> Result<Gradient>
where
    F: FnMut(&ParamVector) -> f64,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::config(format!(
            "finite difference step must be positive and finite, got {step}"
        )));
    }
    let mut work = params.clone();
    let mut grad = Gradient::zeros(params.len());
    let mut bad = Vec::new();
    for i in 0..params.len() {
        let original = work.values()[i];
        work.values_mut()[i] = original + step;
        let plus = f(&work);
        work.values_mut()[i] = original - step;
        let minus = f(&work);
        work.values_mut()[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            bad.push(i);
            continue;
        }
        grad.values_mut()[i] = (plus - minus) / (2.0 * step);
    }
    if !bad.is_empty() {
        return Err(Error::NonFiniteEval { coords: bad });
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{BlockSpec, ParamLayout};

    fn flat_params(values: Vec<f64>) -> ParamVector {
        let n = values.len();
        let layout = ParamLayout::new(vec![BlockSpec::vector("theta", n, 1)]);
        ParamVector::from_values(layout, values).unwrap()
    }

    #[test]
    fn gradient_of_half_norm_squared_is_theta() {
        let params = flat_params(vec![1.0, -2.0, 0.5, 3.0]);
        let f = |p: &ParamVector| 0.5 * p.values().iter().map(|v| v * v).sum::<f64>();
        let g = finite_diff(f, &params, 1e-5).unwrap();
        for (gi, ti) in g.values().iter().zip(params.values()) {
            assert!((gi - ti).abs() < 1e-9, "{gi} vs {ti}");
        }
    }

    #[test]
    fn gradient_of_linear_form_is_the_coefficients() {
        let c = [2.0, -1.0, 0.25];
        let params = flat_params(vec![0.1, 0.2, 0.3]);
        let f = |p: &ParamVector| {
            p.values().iter().zip(&c).map(|(v, ci)| v * ci).sum::<f64>()
        };
        let g = finite_diff(f, &params, 1e-5).unwrap();
        for (gi, ci) in g.values().iter().zip(&c) {
            assert!((gi - ci).abs() < 1e-10);
        }
    }

    #[test]
    fn non_finite_evaluations_are_reported_per_coordinate() {
        let params = flat_params(vec![1.0, 0.0]);
        // Blows up whenever coordinate 1 moves off zero.
        let f = |p: &ParamVector| {
            if p.values()[1] != 0.0 {
                f64::NAN
            } else {
                p.values()[0]
            }
        };
        match finite_diff(f, &params, 1e-5) {
            Err(Error::NonFiniteEval { coords }) => assert_eq!(coords, vec![1]),
            other => panic!("expected NonFiniteEval, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_step() {
        let params = flat_params(vec![1.0]);
        assert!(finite_diff(|_| 0.0, &params, 0.0).is_err());
        assert!(finite_diff(|_| 0.0, &params, f64::NAN).is_err());
    }

    #[test]
    fn restores_parameters_exactly() {
        let params = flat_params(vec![0.1, 0.2]);
        let before = params.values().to_vec();
        let _ = finite_diff(|p| p.values().iter().sum(), &params, 1e-4).unwrap();
        assert_eq!(params.values(), before.as_slice());
    }
}
