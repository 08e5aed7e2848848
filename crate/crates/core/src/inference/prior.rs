//! Independent uniform and Bernoulli priors.

use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec<T> {
    /// Uniform support `(lo, hi)` per continuous slot.
    pub bounds: Vec<(T, T)>,
    /// Success probability per binary slot.
    pub p: Vec<f64>,
}

impl<T: Real> PriorSpec<T> {
    /// Uniform bounds with `Bernoulli(1/2)` for each of `n_binary` slots.
    pub fn new(bounds: Vec<(T, T)>, n_binary: usize) -> Self {
        Self {
            bounds,
            p: vec![0.5; n_binary],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "prior bounds of slot {} must satisfy lo < hi, got ({lo}, {hi})",
                    i + 1
                )));
            }
        }
        if let Some(p) = self.p.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli prior probability must lie in (0, 1), got {p}"
            )));
        }
        Ok(())
    }

    pub fn n_continuous(&self) -> usize {
        self.bounds.len()
    }

    pub fn n_binary(&self) -> usize {
        self.p.len()
    }

    pub fn contains(&self, theta: &[T]) -> bool {
        theta
            .iter()
            .zip(&self.bounds)
            .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    /// Log density of the continuous part; `-inf` outside the support.
    pub fn log_density(&self, theta: &[T]) -> T {
        if !self.contains(theta) {
            return T::neg_infinity();
        }
        -self
            .bounds
            .iter()
            .map(|&(lo, hi)| (hi - lo).ln())
            .sum::<T>()
    }

    /// Density of the continuous part.
    pub fn density(&self, theta: &[T]) -> T {
        if !self.contains(theta) {
            return T::zero();
        }
        T::one()
            / self
                .bounds
                .iter()
                .map(|&(lo, hi)| hi - lo)
                .fold(T::one(), |a, b| a * b)
    }
}

/// Draws continuous slots first, then binary slots.
pub fn sample_prior<T: Real, R: Rng + ?Sized>(
    spec: &PriorSpec<T>,
    rng: &mut R,
) -> (Vec<T>, Vec<bool>) {
    let theta_c = spec
        .bounds
        .iter()
        .map(|&(lo, hi)| lo + (hi - lo) * T::unit_uniform(rng))
        .collect();
    let theta_b = spec.p.iter().map(|&p| rng.random::<f64>() < p).collect();
    (theta_c, theta_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_stay_in_bounds() {
        let spec = PriorSpec::new(vec![(2.0, 4.0), (100.0, 2000.0)], 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ones = 0;
        for _ in 0..10_000 {
            let (c, b) = sample_prior(&spec, &mut rng);
            assert!((2.0..=4.0).contains(&c[0]));
            assert!((100.0..=2000.0).contains(&c[1]));
            ones += b[0] as usize;
        }
        let frac = ones as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }

    #[test]
    fn validation() {
        let mut spec = PriorSpec::<f64>::new(vec![(0.0, 1.0)], 1);
        assert!(spec.validate().is_ok());
        spec.p[0] = 1.0;
        assert!(spec.validate().is_err());
        assert!(PriorSpec::<f64>::new(vec![(1.0, 1.0)], 0)
            .validate()
            .is_err());
    }

    #[test]
    fn density_and_log_density_agree() {
        let spec = PriorSpec::<f64>::new(vec![(2.0, 4.0), (0.5, 1.0)], 0);
        assert!((spec.density(&[3.0, 0.7]) - 1.0).abs() < 1e-15);
        assert_eq!(spec.log_density(&[3.0, 0.7]), -(2.0f64.ln() + 0.5f64.ln()));
        assert_eq!(spec.density(&[5.0, 0.7]), 0.0);
        assert_eq!(spec.log_density(&[5.0, 0.7]), f64::NEG_INFINITY);
    }
}
