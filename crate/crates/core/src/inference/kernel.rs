//! Perturbation kernels and importance weights.

use rand::Rng;

use super::prior::PriorSpec;
use super::{Generation, KernelKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;

/// Proposal parameters derived from the previous generation.
#[derive(Clone, Debug)]
pub struct KernelState<T> {
    /// Twice the weighted covariance of the continuous particles, regularized.
    pub sigma_hat: Vec<T>,
    /// Lower Cholesky factor of `sigma_hat`.
    pub chol: Vec<T>,
    /// Unweighted mean of each binary coordinate.
    pub p_hat: Vec<f64>,
    /// `4 p(1 - p)` per binary coordinate, with `p` the unweighted mean.
    pub q_flip: Vec<f64>,
    pub q_stay: f64,
    /// Ridge added to the diagonal of `sigma_hat`, zero if none was needed.
    pub ridge: T,
}

/// `Σ w_i (x_i - x̄)(x_i - x̄)ᵀ` with `x̄ = Σ w_i x_i` for normalized weights,
/// row-major `d x d`.
pub fn weighted_covariance<T: Real>(points: &[&[T]], weights: &[T]) -> Vec<T> {
    let d = points.first().map_or(0, |p| p.len());
    let mut mean = vec![T::zero(); d];
    for (x, &w) in points.iter().zip(weights) {
        for (m, &v) in mean.iter_mut().zip(x.iter()) {
            *m += w * v;
        }
    }
    let mut cov = vec![T::zero(); d * d];
    for (x, &w) in points.iter().zip(weights) {
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in 0..d {
                cov[a * d + b] += w * da * (x[b] - mean[b]);
            }
        }
    }
    cov
}

/// Unweighted fraction of ones per binary coordinate.
pub fn binary_means<T: Real>(gen: &Generation<T>) -> Vec<f64> {
    let n_b = gen.particles.first().map_or(0, |p| p.theta_b.len());
    let m = gen.particles.len() as f64;
    (0..n_b)
        .map(|u| gen.particles.iter().filter(|p| p.theta_b[u]).count() as f64 / m)
        .collect()
}

impl<T: Real> KernelState<T> {
    /// Builds the kernel from `gen`. When the doubled covariance is not
    /// positive definite a ridge of `1e-10` times its mean diagonal (or times
    /// `fallback_scale` if that is zero) is added and escalated tenfold until
    /// factorization succeeds.
    pub fn from_generation(gen: &Generation<T>, q_stay: f64, fallback_scale: T) -> Result<Self> {
        if gen.particles.is_empty() {
            return Err(Error::InvalidParameter(
                "kernel needs a nonempty generation".into(),
            ));
        }
        let points: Vec<&[T]> = gen.particles.iter().map(|p| p.theta_c.as_slice()).collect();
        let weights: Vec<T> = gen.particles.iter().map(|p| p.weight).collect();
        let d = points[0].len();
        let mut sigma_hat: Vec<T> = weighted_covariance(&points, &weights)
            .into_iter()
            .map(|v| v * T::lit(2.0))
            .collect();
        let mut ridge = T::zero();
        let chol = if d == 0 {
            Vec::new()
        } else {
            match linalg::cholesky(&sigma_hat, d) {
                Some(l) => l,
                None => {
                    let mean_diag =
                        (0..d).map(|i| sigma_hat[i * d + i]).sum::<T>() / T::from_usize_lossy(d);
                    let base = if mean_diag > T::zero() {
                        mean_diag
                    } else {
                        fallback_scale
                    };
                    ridge = T::lit(1e-10) * base;
                    loop {
                        let mut reg = sigma_hat.clone();
                        (0..d).for_each(|i| reg[i * d + i] += ridge);
                        if let Some(l) = linalg::cholesky(&reg, d) {
                            sigma_hat = reg;
                            break l;
                        }
                        ridge *= T::lit(10.0);
                        if !ridge.is_finite() || ridge > base * T::lit(1e6) {
                            return Err(Error::Factorization(
                                "proposal covariance cannot be regularized".into(),
                            ));
                        }
                    }
                }
            }
        };
        let p_hat = binary_means(gen);
        let q_flip = p_hat.iter().map(|&p| 4.0 * p * (1.0 - p)).collect();
        Ok(Self {
            sigma_hat,
            chol,
            p_hat,
            q_flip,
            q_stay,
            ridge,
        })
    }

    /// Log Gaussian kernel density of `theta` around `center`.
    pub fn log_kernel(&self, theta: &[T], center: &[T]) -> T {
        if theta.is_empty() {
            return T::zero();
        }
        linalg::mvn_log_density(theta, center, &self.chol)
    }
}

/// Index drawn with probability proportional to `weights`.
pub fn sample_index<T: Real, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total: T = weights.iter().copied().sum();
    let u = T::unit_uniform(rng) * total;
    let mut acc = T::zero();
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

const MAX_SUPPORT_ATTEMPTS: usize = 1_000_000;

/// Draws a particle index by weight and perturbs its continuous part with
/// `N(0, sigma_hat)`, redrawing both until the result lies in the prior
/// support. Returns the index and the perturbed vector.
pub fn perturb_continuous<T: Real, R: Rng + ?Sized>(
    gen: &Generation<T>,
    weights: &[T],
    ks: &KernelState<T>,
    prior: &PriorSpec<T>,
    rng: &mut R,
) -> Result<(usize, Vec<T>)> {
    let d = prior.n_continuous();
    let mut z = vec![T::zero(); d];
    for _ in 0..MAX_SUPPORT_ATTEMPTS {
        let idx = sample_index(weights, rng);
        z.iter_mut().for_each(|v| *v = T::standard_normal(rng));
        let step = linalg::lower_mul(&ks.chol, &z);
        let theta: Vec<T> = gen.particles[idx]
            .theta_c
            .iter()
            .zip(&step)
            .map(|(&a, &b)| a + b)
            .collect();
        if prior.contains(&theta) {
            return Ok((idx, theta));
        }
    }
    Err(Error::InvalidParameter(
        "perturbation kernel keeps proposing outside the prior support".into(),
    ))
}

/// Binary proposal of the independent kernel: `Bernoulli(p_hat)` then keep
/// with probability `q_stay`.
pub fn propose_binary<R: Rng + ?Sized>(p_hat: &[f64], q_stay: f64, rng: &mut R) -> Vec<bool> {
    p_hat
        .iter()
        .map(|&p| {
            let b = rng.random::<f64>() < p;
            let keep = rng.random::<f64>() < q_stay;
            if keep {
                b
            } else {
                !b
            }
        })
        .collect()
}

/// Binary proposal of the joint kernel: flip each coordinate of `theta_b`
/// with probability `q_flip`.
pub fn flip_binary<R: Rng + ?Sized>(theta_b: &[bool], q_flip: &[f64], rng: &mut R) -> Vec<bool> {
    theta_b
        .iter()
        .zip(q_flip)
        .map(|(&b, &q)| if rng.random::<f64>() < q { !b } else { b })
        .collect()
}

/// One proposal `(θ_c*, θ_b*)` from the previous generation.
pub fn propose<T: Real, R: Rng + ?Sized>(
    kind: KernelKind,
    gen: &Generation<T>,
    weights: &[T],
    ks: &KernelState<T>,
    prior: &PriorSpec<T>,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<bool>)> {
    let (idx, theta_c) = perturb_continuous(gen, weights, ks, prior, rng)?;
    let theta_b = match kind {
        KernelKind::Bernoulli => propose_binary(&ks.p_hat, ks.q_stay, rng),
        KernelKind::Flip => flip_binary(&gen.particles[idx].theta_b, &ks.q_flip, rng),
    };
    Ok((theta_c, theta_b))
}

/// `log π(θ) - log Σ_l w_l K(θ | θ_l)`, using only the continuous part.
pub fn log_unnormalized_weight<T: Real>(
    theta_c: &[T],
    prev: &Generation<T>,
    ks: &KernelState<T>,
    prior: &PriorSpec<T>,
) -> T {
    let terms: Vec<T> = prev
        .particles
        .iter()
        .map(|p| p.weight.ln() + ks.log_kernel(theta_c, &p.theta_c))
        .collect();
    prior.log_density(theta_c) - log_sum_exp(&terms)
}

pub fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

/// Normalizes log weights through log-sum-exp.
pub fn normalize_log_weights<T: Real>(log_w: &[T]) -> Result<Vec<T>> {
    let lse = log_sum_exp(log_w);
    if !lse.is_finite() {
        return Err(Error::DegenerateData(
            "all importance weights vanish".into(),
        ));
    }
    Ok(log_w.iter().map(|&l| (l - lse).exp()).collect())
}
