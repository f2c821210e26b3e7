use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Per-horizon normalized absolute error of one forecast, `|pred - truth| / train_std`.
/// Aggregating the squares over realizations with [`SrmseAccumulator`]
/// gives the SRMSE curve.
pub fn srmse(pred: &[f64], truth: &[f64], train_std: f64) -> Result<Vec<f64>> {
    if !(train_std > 0.0 && train_std.is_finite()) {
        return Err(Error::Domain(format!("training standard deviation must be positive, got {train_std}")));
    }
    if pred.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            actual: pred.len(),
            context: "forecast vs truth",
        });
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs() / train_std).collect())
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Accumulates per-realization normalized errors at each horizon.
///
/// The SRMSE is the root of the mean squared normalized error. Its standard
/// error comes from the spread of the squared errors through the delta
/// method, `se(mean sq) / (2 sqrt(mean sq))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrmseAccumulator {
    sum_sq: Vec<f64>,
    sum_sq2: Vec<f64>,
    count: usize,
}

impl SrmseAccumulator {
    pub fn new(horizon: usize) -> Self {
        Self {
            sum_sq: vec![0.0; horizon],
            sum_sq2: vec![0.0; horizon],
            count: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.sum_sq.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, errors: &[f64]) {
        assert_eq!(errors.len(), self.horizon(), "horizon mismatch");
        for (i, e) in errors.iter().enumerate() {
            let s = e * e;
            self.sum_sq[i] += s;
            self.sum_sq2[i] += s * s;
        }
        self.count += 1;
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum_sq.iter().map(|s| (s / n).sqrt()).collect()
    }

    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum_sq
            .iter()
            .zip(&self.sum_sq2)
            .map(|(s, s2)| {
                if self.count < 2 {
                    return 0.0;
                }
                let m = s / n;
                let var = ((s2 / n - m * m) * n / (n - 1.0)).max(0.0);
                if m > 0.0 {
                    (var / n).sqrt() / (2.0 * m.sqrt())
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Initial parameter guesses drawn from `Normal(p, (u p)^2)` with `u` the
/// fractional uncertainty (0.5 for 50%).
pub fn sample_initial_params(true_params: &[f64], uncertainty: f64, seed: u64) -> Result<Vec<f64>> {
    sample_initial_params_with(true_params, uncertainty, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_initial_params_with<R: Rng + ?Sized>(true_params: &[f64], uncertainty: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(uncertainty >= 0.0 && uncertainty.is_finite()) {
        return Err(Error::Domain(format!("uncertainty must be nonnegative, got {uncertainty}")));
    }
    true_params
        .iter()
        .map(|&p| {
            let sd = (uncertainty * p).abs();
            if sd == 0.0 {
                return Ok(p);
            }
            let n = Normal::new(p, sd).map_err(|e| Error::Domain(e.to_string()))?;
            Ok(n.sample(rng))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_forecast_scores_zero() {
        let s = srmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 2.0).unwrap();
        assert_eq!(s, vec![0.0; 3]);
        assert!(srmse(&[1.0], &[1.0], 0.0).is_err());
        assert!(srmse(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn error_of_one_std_is_one() {
        let mut acc = SrmseAccumulator::new(1);
        for r in 0..10 {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            acc.push(&srmse(&[5.0 + sign * 1.5], &[5.0], 1.5).unwrap());
        }
        assert_eq!(acc.mean(), vec![1.0]);
        assert_eq!(acc.stderr(), vec![0.0]);
    }

    #[test]
    fn train_mean_forecaster_scores_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dist = Normal::new(3.0, 2.0).unwrap();
        let train: Vec<f64> = (0..20000).map(|_| dist.sample(&mut rng)).collect();
        let mean = train.iter().sum::<f64>() / train.len() as f64;
        let sd = std_dev(&train);
        let mut acc = SrmseAccumulator::new(1);
        for _ in 0..20000 {
            acc.push(&srmse(&[mean], &[dist.sample(&mut rng)], sd).unwrap());
        }
        assert!((acc.mean()[0] - 1.0).abs() < 0.02, "{:?}", acc.mean());
        assert!(acc.stderr()[0] > 0.0 && acc.stderr()[0] < 0.02);
    }

    #[test]
    fn zero_uncertainty_returns_truth() {
        let p = [10.0, 28.0, 8.0 / 3.0];
        assert_eq!(sample_initial_params(&p, 0.0, 1).unwrap(), p.to_vec());
        assert!(sample_initial_params(&p, -0.1, 1).is_err());
    }

    #[test]
    fn draw_moments_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| sample_initial_params_with(&[12.0], 0.5, &mut rng).unwrap()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = std_dev(&draws);
        assert!((mean - 12.0).abs() < 0.1, "{mean}");
        assert!((sd - 6.0).abs() < 0.12, "{sd}");
        assert!(draws.iter().any(|&v| v < 0.0));
    }

    #[test]
    fn seeded_draws_repeat() {
        let p = [1.0, 2.0, 3.0];
        assert_eq!(sample_initial_params(&p, 0.8, 9).unwrap(), sample_initial_params(&p, 0.8, 9).unwrap());
    }
}
