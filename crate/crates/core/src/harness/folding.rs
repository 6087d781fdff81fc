use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::trial::child_seed;
use crate::encoders::Encoder;
use crate::error::{Error, Result};

/// Empirical variance of the entries of `A n`, pooled over `trials` fresh
/// Gaussian encoders and noise vectors `n ~ N(0, sigma_n^2 I)`, divided by
/// `sigma_n^2`. Its expectation is `N / m`.
pub fn noise_folding_check(n: usize, m: usize, sigma_n: f64, trials: usize, seed: u64) -> Result<f64> {
    if n == 0 || m == 0 || trials == 0 {
        return Err(Error::Parameter("noise_folding_check needs N, m, trials >= 1".into()));
    }
    if !(sigma_n > 0.0 && sigma_n.is_finite()) {
        return Err(Error::Parameter(format!("sigma_n must be > 0, got {sigma_n}")));
    }
    let normal = Normal::new(0.0, sigma_n).map_err(|e| Error::Parameter(e.to_string()))?;
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
    for t in 0..trials {
        let s = child_seed(seed, m, n, t);
        let enc = Encoder::<f64>::gaussian(m, n, s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x6e6f_6973_65);
        let noise = DVector::from_fn(n, |_, _| normal.sample(&mut rng));
        for v in enc.apply(&noise).iter() {
            sum += v;
            sum_sq += v * v;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let var = (sum_sq - count as f64 * mean * mean) / (count - 1).max(1) as f64;
    Ok(var / (sigma_n * sigma_n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_case_has_unit_ratio() {
        let ratio = noise_folding_check(40, 40, 0.5, 500, 3).unwrap();
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn ratio_is_linear_in_n() {
        let m = 20;
        let r1 = noise_folding_check(40, m, 1.0, 1000, 5).unwrap();
        let r2 = noise_folding_check(80, m, 1.0, 1000, 5).unwrap();
        // Slope per unit N is 1/m for both points.
        assert!((r1 - 2.0).abs() < 0.1, "{r1}");
        assert!((r2 - 4.0).abs() < 0.2, "{r2}");
        assert!(((r2 - r1) / 40.0 - 1.0 / m as f64).abs() < 0.01);
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(noise_folding_check(0, 1, 1.0, 1, 0).is_err());
        assert!(noise_folding_check(5, 2, 0.0, 1, 0).is_err());
    }
}
