use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-parameter surrogate laws fitted by weighted least squares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `y = A e^{−K x}`
    PureExponential,
    /// `y = A e^{−c x²/log x}`, defined for `x > 1`
    GaussianOverLog,
    /// `y = A e^{−c x²}`
    PureGaussian,
    /// `y = a log x + b`, fitted on the linear scale
    AffineInLog,
}

impl DecayModel {
    pub fn name(self) -> &'static str {
        match self {
            DecayModel::PureExponential => "pure_exponential",
            DecayModel::GaussianOverLog => "gaussian_over_log",
            DecayModel::PureGaussian => "pure_gaussian",
            DecayModel::AffineInLog => "affine_in_log",
        }
    }

    fn log_scale(self) -> bool {
        self != DecayModel::AffineInLog
    }

    fn regressor(self, x: f64) -> Result<f64> {
        let u = match self {
            DecayModel::PureExponential => x,
            DecayModel::GaussianOverLog => {
                if x <= 1.0 {
                    return Err(Error::Fit(format!("x²/log x needs x > 1, got {x}")));
                }
                x * x / x.ln()
            }
            DecayModel::PureGaussian => x * x,
            DecayModel::AffineInLog => {
                if x <= 0.0 {
                    return Err(Error::Fit(format!("log x needs x > 0, got {x}")));
                }
                x.ln()
            }
        };
        Ok(u)
    }

    fn names(self) -> [&'static str; 2] {
        match self {
            DecayModel::PureExponential => ["log_amplitude", "rate"],
            DecayModel::GaussianOverLog | DecayModel::PureGaussian => ["log_amplitude", "c"],
            DecayModel::AffineInLog => ["intercept", "slope"],
        }
    }

    /// Decay models report the rate `−slope`; the affine model its slope.
    fn sign(self) -> f64 {
        if self.log_scale() {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    /// 95% confidence interval.
    pub ci: [f64; 2],
}

impl FitParameter {
    pub fn ci_contains(&self, v: f64) -> bool {
        self.ci[0] <= v && v <= self.ci[1]
    }

    pub fn ci_excludes_zero(&self) -> bool {
        !self.ci_contains(0.0)
    }

    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci[1] - self.ci[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    /// Intercept first, then the rate (or slope).
    pub parameters: Vec<FitParameter>,
    pub r_squared: f64,
    /// Residuals on the fitted scale (log scale for decay models).
    pub residuals: Vec<f64>,
    /// `Σ w r²` with `w = 1/σ²`, or the plain residual sum of squares without errors.
    pub weighted_rss: f64,
    pub dof: usize,
}

impl DecayFit {
    /// The rate `K` / `c`, or the slope `a` of the affine model.
    pub fn rate(&self) -> &FitParameter {
        &self.parameters[1]
    }

    pub fn intercept(&self) -> &FitParameter {
        &self.parameters[0]
    }

    /// Prediction of the fitted law at `x`, on the original scale.
    pub fn predict(&self, x: f64) -> Result<f64> {
        let u = self.model.regressor(x)?;
        let v = self.parameters[0].value + self.model.sign() * self.parameters[1].value * u;
        Ok(if self.model.log_scale() { v.exp() } else { v })
    }
}

/// Weighted least squares of `ys` against `xs` under `model`. Per-point
/// standard errors become weights `1/σ²` on the fitted scale (`σ/y` for the
/// log-scale models). The parameter covariance is `(XᵀWX)⁻¹` inflated by the
/// reduced χ² when that exceeds one (always used when no errors are given);
/// intervals use the Student quantile with `n − 2` degrees of freedom.
pub fn fit_decay(xs: &[f64], ys: &[f64], ses: Option<&[f64]>, model: DecayModel) -> Result<DecayFit> {
    let n = xs.len();
    if ys.len() != n || ses.is_some_and(|s| s.len() != n) {
        return Err(Error::Fit("xs, ys and errors differ in length".into()));
    }
    if n < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {n}")));
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for k in 0..n {
        let (x, y) = (xs[k], ys[k]);
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Fit(format!("non-finite point ({x}, {y})")));
        }
        u.push(model.regressor(x)?);
        if model.log_scale() {
            if y <= 0.0 {
                return Err(Error::Fit(format!("log-scale model needs y > 0, got {y} at x = {x}")));
            }
            v.push(y.ln());
        } else {
            v.push(y);
        }
        let weight = match ses {
            Some(s) => {
                let sigma = if model.log_scale() { s[k] / y } else { s[k] };
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::Fit(format!("standard error {} at x = {x} is not positive", s[k])));
                }
                1.0 / (sigma * sigma)
            }
            None => 1.0,
        };
        w.push(weight);
    }
    let (mut s, mut su, mut suu, mut sv, mut suv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        s += w[k];
        su += w[k] * u[k];
        suu += w[k] * u[k] * u[k];
        sv += w[k] * v[k];
        suv += w[k] * u[k] * v[k];
    }
    let normal = Matrix2::new(s, su, su, suu);
    let det = s * suu - su * su;
    if !(det.abs() > 1e-12 * s * suu) {
        return Err(Error::Fit("degenerate design: all abscissae coincide".into()));
    }
    let cov = normal.try_inverse().ok_or_else(|| Error::Fit("singular normal matrix".into()))?;
    let beta: Vector2<f64> = cov * Vector2::new(sv, suv);
    let residuals: Vec<f64> = (0..n).map(|k| v[k] - beta[0] - beta[1] * u[k]).collect();
    let rss: f64 = (0..n).map(|k| w[k] * residuals[k].powi(2)).sum();
    let dof = n - 2;
    let reduced = rss / dof as f64;
    let scale = if ses.is_some() { reduced.max(1.0) } else { reduced };
    let vbar = sv / s;
    let tss: f64 = (0..n).map(|k| w[k] * (v[k] - vbar).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let q = StudentsT::new(0.0, 1.0, dof as f64)
        .map_err(|e| Error::Fit(e.to_string()))?
        .inverse_cdf(0.975);
    let names = model.names();
    let parameters = (0..2)
        .map(|p| {
            let sign = if p == 1 { model.sign() } else { 1.0 };
            let value = sign * beta[p];
            let se = (cov[(p, p)] * scale).sqrt();
            FitParameter {
                name: names[p].to_string(),
                value,
                std_error: se,
                ci: [value - q * se, value + q * se],
            }
        })
        .collect();
    Ok(DecayFit {
        model,
        parameters,
        r_squared,
        residuals,
        weighted_rss: rss,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_exponential() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-0.5 * x).exp()).collect();
        let f = fit_decay(&xs, &ys, None, DecayModel::PureExponential).unwrap();
        assert!((f.rate().value - 0.5).abs() < 1e-12);
        assert!(f.weighted_rss < 1e-20);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_points_rejected() {
        assert!(fit_decay(&[1.0, 2.0, 3.0], &[1.0, 0.5, 0.2], None, DecayModel::PureExponential).is_err());
    }

    #[test]
    fn non_positive_rejected_on_log_scale() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!(fit_decay(&xs, &[1.0, 0.5, 0.0, 0.1], None, DecayModel::PureExponential).is_err());
        assert!(fit_decay(&xs, &[1.0, 0.5, 0.0, -0.1], None, DecayModel::AffineInLog).is_ok());
        assert!(fit_decay(&[2.0; 4], &[1.0, 0.5, 0.2, 0.1], None, DecayModel::PureExponential).is_err());
    }

    #[test]
    fn noisy_rate_coverage() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = xs
                .iter()
                .map(|x| (-0.5 * x).exp() * (1.0 + 0.05 * rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let ses: Vec<f64> = ys.iter().map(|y| 0.05 * y).collect();
            let f = fit_decay(&xs, &ys, Some(&ses), DecayModel::PureExponential).unwrap();
            hits += usize::from(f.rate().ci_contains(0.5));
        }
        assert!(hits >= 90, "{hits}");
    }

    #[test]
    fn gaussian_over_log_recovery() {
        let ts: Vec<f64> = (0..8).map(|k| 2.0 + 0.5 * k as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * (-t * t / t.ln()).exp()).collect();
        let f = fit_decay(&ts, &ys, None, DecayModel::GaussianOverLog).unwrap();
        assert!((f.rate().value - 1.0).abs() < 1e-10);
        assert!((f.predict(3.3).unwrap() / (3.0 * (-3.3f64 * 3.3 / 3.3f64.ln()).exp()) - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn affine_fit_recovers_line(a in -3.0f64..3.0, b in -5.0f64..5.0) {
            let xs = [8.0, 16.0, 32.0, 64.0, 128.0];
            let ys: Vec<f64> = xs.iter().map(|x: &f64| a * x.ln() + b).collect();
            let f = fit_decay(&xs, &ys, None, DecayModel::AffineInLog).unwrap();
            prop_assert!((f.rate().value - a).abs() < 1e-9);
            prop_assert!((f.intercept().value - b).abs() < 1e-8);
        }
    }
}
