use std::sync::Arc;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Window factor of the self-consistent truncation `W ≥ c·τ_int(W)`.
pub const SOKAL_WINDOW: f64 = 6.0;

/// A Monte Carlo mean with an autocorrelation-corrected error bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub tau_int: f64,
    pub ess: f64,
    pub count: usize,
    /// Shorter than `100·τ_int`; the error bar is indicative only.
    #[serde(default)]
    pub underpowered: bool,
}

impl Estimate {
    /// An exactly known value (zero error), e.g. a constant series.
    pub fn exact(mean: f64, count: usize) -> Self {
        Estimate {
            mean,
            std_error: 0.0,
            tau_int: 0.5,
            ess: count as f64,
            count,
            underpowered: false,
        }
    }

    /// Combined standard error of the difference with `other`.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// Number of combined standard errors separating the two means.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let se = self.combined_se(other);
        if se == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean).abs() / se
        }
    }

    /// `|mean − value| ≤ k·SE`.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// Normalised autocorrelation function up to lag `max_lag` via FFT.
pub fn autocorrelation_function(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    fwd.process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let c0 = buf[0].re;
    (0..=max_lag.min(n - 1)).map(|t| buf[t].re / c0).collect()
}

/// `(mean, sample variance, τ_int, window)`; errors only on constant series.
pub(crate) fn integrated_time(series: &[f64]) -> Result<(f64, f64, f64, usize)> {
    let n = series.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, tau: 0.5 });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = series.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if var <= (1e-14 * scale).powi(2) {
        return Err(Error::ConstantSeries);
    }
    let rho = autocorrelation_function(series, n - 1);
    let mut tau = 0.5;
    let mut window = 0;
    for (t, r) in rho.iter().enumerate().skip(1) {
        tau += r;
        window = t;
        if t as f64 >= SOKAL_WINDOW * tau {
            break;
        }
    }
    Ok((mean, var * n as f64 / (n as f64 - 1.0), tau.max(0.5), window))
}

/// Mean, `τ_int` and the standard error `s·√(2τ_int/N)` of a stationary series.
///
/// Errors on constant series and on series shorter than `100·τ_int`.
pub fn autocorrelation(series: &[f64]) -> Result<Estimate> {
    integrated_time(series)?;
    let est = lenient_estimate(series)?;
    if est.underpowered {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            tau: est.tau_int,
        });
    }
    Ok(est)
}

/// As [`autocorrelation`] but flags short series instead of failing, and maps
/// constant series to a zero-error estimate.
pub fn lenient_estimate(series: &[f64]) -> Result<Estimate> {
    match integrated_time(series) {
        Ok((mean, var, tau, _)) => {
            let n = series.len();
            Ok(Estimate {
                mean,
                std_error: (var * 2.0 * tau / n as f64).sqrt(),
                tau_int: tau,
                ess: n as f64 / (2.0 * tau),
                count: n,
                underpowered: (n as f64) < 100.0 * tau,
            })
        }
        Err(Error::ConstantSeries) => Ok(Estimate::exact(series[0], series.len())),
        Err(e) => Err(e),
    }
}

/// Pools replica estimates of the same observable. The error bar is the larger
/// of the within-replica and between-replica errors; `τ_int` is re-derived so
/// that `SE = s·√(2τ_int/N)` still holds for the pooled series.
pub fn merge_replicas(parts: &[Estimate], pooled_variance: f64) -> Estimate {
    let r = parts.len();
    let count: usize = parts.iter().map(|p| p.count).sum();
    let mean = parts.iter().map(|p| p.mean * p.count as f64).sum::<f64>() / count as f64;
    let within = parts
        .iter()
        .map(|p| (p.std_error * p.count as f64).powi(2))
        .sum::<f64>()
        .sqrt()
        / count as f64;
    let between = if r > 1 {
        let m = parts.iter().map(|p| p.mean).sum::<f64>() / r as f64;
        (parts.iter().map(|p| (p.mean - m).powi(2)).sum::<f64>() / (r as f64 - 1.0) / r as f64).sqrt()
    } else {
        0.0
    };
    let se = within.max(between);
    let underpowered = parts.iter().any(|p| p.underpowered);
    if pooled_variance <= 0.0 || se == 0.0 {
        return Estimate {
            mean,
            std_error: se,
            tau_int: 0.5,
            ess: count as f64,
            count,
            underpowered,
        };
    }
    let tau = (se * se * count as f64 / (2.0 * pooled_variance)).max(0.5);
    Estimate {
        mean,
        std_error: (pooled_variance * 2.0 * tau / count as f64).sqrt(),
        tau_int: tau,
        ess: count as f64 / (2.0 * tau),
        count,
        underpowered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn iid_tau_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let e = autocorrelation(&x).unwrap();
        assert!((e.tau_int - 0.5).abs() < 0.05, "{}", e.tau_int);
        assert!((e.std_error - (1.0f64 / 100_000.0).sqrt()).abs() < 3e-4);
    }

    #[test]
    fn ar1_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.0;
        let s: Vec<f64> = (0..1_000_000)
            .map(|_| {
                x = 0.5 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let e = autocorrelation(&s).unwrap();
        assert!((e.tau_int - 1.5).abs() < 0.15, "{}", e.tau_int);
    }

    #[test]
    fn constant_series_is_error() {
        assert!(matches!(autocorrelation(&[2.0; 500]), Err(Error::ConstantSeries)));
        let e = lenient_estimate(&[2.0; 500]).unwrap();
        assert_eq!((e.mean, e.std_error), (2.0, 0.0));
    }

    #[test]
    fn short_series_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = 0.0;
        let s: Vec<f64> = (0..300)
            .map(|_| {
                x = 0.95 * x + rng.random::<f64>();
                x
            })
            .collect();
        assert!(matches!(autocorrelation(&s), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn merge_keeps_se_identity() {
        let parts = [
            Estimate { mean: 1.0, std_error: 0.1, tau_int: 2.0, ess: 25.0, count: 100, underpowered: false },
            Estimate { mean: 1.4, std_error: 0.1, tau_int: 2.0, ess: 25.0, count: 100, underpowered: false },
        ];
        let m = merge_replicas(&parts, 0.25);
        assert!((m.mean - 1.2).abs() < 1e-15);
        // between-replica spread dominates: sd of means / √2 = 0.2
        assert!((m.std_error - 0.2).abs() < 1e-12);
        assert!((m.std_error - (0.25 * 2.0 * m.tau_int / 200.0f64).sqrt()).abs() < 1e-12);
    }
}
