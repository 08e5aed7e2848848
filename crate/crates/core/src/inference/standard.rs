//! Plain sequential SMC-ABC with a Gaussian kernel and no binary parameters.
//!
//! A straightforward reference implementation: one proposal at a time,
//! importance weights computed directly rather than in log space. It uses
//! the same random stream layout as [`run_nsmc_abc`](super::run_nsmc_abc),
//! so on problems without binary slots both produce the same generations.

use super::kernel::{perturb_continuous, weighted_covariance, KernelState};
use super::prior::{sample_prior, PriorSpec};
use super::smc::{next_threshold, simulation_error};
use super::{AbcSettings, Discrepancy, Generation, Particle, RunRecord, RunStatus};
use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;
use crate::rng;
use crate::stats;

pub fn run_standard_smc_abc<T: Real, D: Discrepancy<T>>(
    problem: &D,
    prior: &PriorSpec<T>,
    settings: &AbcSettings<T>,
) -> Result<RunRecord<T>> {
    settings.validate()?;
    prior.validate()?;
    if prior.n_binary() != 0 {
        return Err(Error::InvalidParameter(
            "standard SMC-ABC handles continuous parameters only".into(),
        ));
    }
    let mut rec = RunRecord {
        pilot_distances: Vec::new(),
        delta1: None,
        generations: Vec::new(),
        status: RunStatus::BudgetExhausted,
        sims_used: 0,
        partial_accepted: 0,
        warnings: Vec::new(),
        timings: Vec::new(),
    };
    let mut sims = 0u64;
    let delta1 = match settings.delta1 {
        Some(d) => d,
        None => {
            let mut pilot = Vec::with_capacity(settings.n_pilot);
            for i in 0..settings.n_pilot {
                let mut rng = rng::stream(settings.seed, 0, i as u64);
                let (c, b) = sample_prior(prior, &mut rng);
                pilot.push(
                    problem
                        .distance(&c, &b, &mut rng)
                        .map_err(|e| simulation_error(&c, &b, e))?,
                );
                sims += 1;
            }
            let d = stats::median(&pilot).expect("nonempty pilot");
            rec.pilot_distances = pilot;
            d
        }
    };
    rec.delta1 = Some(delta1);

    let m = settings.m;
    let mut particles = Vec::with_capacity(m);
    let mut i = 0u64;
    while particles.len() < m {
        if sims >= settings.budget {
            rec.sims_used = sims;
            rec.partial_accepted = particles.len();
            return Ok(rec);
        }
        let mut rng = rng::stream(settings.seed, 1, i);
        let (c, b) = sample_prior(prior, &mut rng);
        let d = problem
            .distance(&c, &b, &mut rng)
            .map_err(|e| simulation_error(&c, &b, e))?;
        sims += 1;
        i += 1;
        if d < delta1 {
            particles.push(Particle {
                theta_c: c,
                theta_b: b,
                weight: T::one() / T::from_usize_lossy(m),
                distance: d,
            });
        }
    }
    rec.generations.push(Generation {
        iteration: 1,
        threshold: delta1,
        particles,
        sims_used: sims,
        acceptance_rate: m as f64 / i as f64,
        proposals: i as usize,
    });

    loop {
        let prev = rec.generations.last().expect("one generation");
        if prev.acceptance_rate < settings.stop_rate {
            rec.status = RunStatus::Converged;
            break;
        }
        if settings
            .max_iterations
            .is_some_and(|cap| rec.generations.len() >= cap)
        {
            rec.status = RunStatus::MaxIterations;
            break;
        }
        let r = prev.iteration + 1;
        let threshold = next_threshold(&prev.distances(), prev.acceptance_rate);
        let floor = prev.threshold - T::lit(1e-9) * prev.threshold.abs();
        if prev.threshold.is_finite() && !(threshold < floor) {
            rec.status = RunStatus::Stalled;
            break;
        }

        let d = prior.n_continuous();
        let points: Vec<&[T]> = prev
            .particles
            .iter()
            .map(|p| p.theta_c.as_slice())
            .collect();
        let weights = prev.weights();
        let sigma: Vec<T> = weighted_covariance(&points, &weights)
            .into_iter()
            .map(|v| v * T::lit(2.0))
            .collect();
        let chol = linalg::cholesky(&sigma, d).ok_or_else(|| {
            Error::Factorization("proposal covariance is not positive definite".into())
        })?;
        let ks = KernelState {
            sigma_hat: sigma,
            chol,
            p_hat: Vec::new(),
            q_flip: Vec::new(),
            q_stay: settings.q_stay,
            ridge: T::zero(),
        };
        let norm = T::one()
            / ((T::lit(2.0) * T::PI()).powi(d as i32)
                * linalg::log_det_from_cholesky(&ks.chol, d).exp())
            .sqrt();

        let mut accepted = Vec::with_capacity(m);
        let mut i = 0u64;
        while accepted.len() < m {
            if sims >= settings.budget {
                rec.sims_used = sims;
                rec.partial_accepted = accepted.len();
                return Ok(rec);
            }
            let mut rng = rng::stream(settings.seed, r as u32, i);
            let (_, c) = perturb_continuous(prev, &weights, &ks, prior, &mut rng)?;
            let dist = problem
                .distance(&c, &[], &mut rng)
                .map_err(|e| simulation_error(&c, &[], e))?;
            sims += 1;
            i += 1;
            if dist < threshold {
                accepted.push((c, dist));
            }
        }

        let mut raw = Vec::with_capacity(m);
        for (c, _) in &accepted {
            let mut denom = T::zero();
            for p in &prev.particles {
                let diff: Vec<T> = c.iter().zip(&p.theta_c).map(|(&a, &b)| a - b).collect();
                let y = linalg::forward_solve(&ks.chol, &diff);
                let quad: T = y.iter().map(|&v| v * v).sum();
                denom += p.weight * norm * (-T::lit(0.5) * quad).exp();
            }
            raw.push(prior.density(c) / denom);
        }
        let total: T = raw.iter().copied().sum();
        let particles = accepted
            .into_iter()
            .zip(raw)
            .map(|((theta_c, distance), w)| Particle {
                theta_c,
                theta_b: Vec::new(),
                weight: w / total,
                distance,
            })
            .collect();
        rec.generations.push(Generation {
            iteration: r,
            threshold,
            particles,
            sims_used: sims,
            acceptance_rate: m as f64 / i as f64,
            proposals: i as usize,
        });
    }
    rec.sims_used = sims;
    Ok(rec)
}
