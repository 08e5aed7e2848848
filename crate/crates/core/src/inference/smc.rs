//! The parallel nSMC-ABC driver.
//!
//! Proposal `i` of iteration `r` always uses the random stream `(r, i)`, and
//! accepted proposals are committed in index order until `M` are collected.
//! Generations therefore depend on the seed but not on the worker count.

use std::time::Instant;

use rayon::prelude::*;

use super::kernel::{self, KernelState};
use super::prior::{sample_prior, PriorSpec};
use super::{AbcSettings, Discrepancy, Generation, Particle, RunRecord, RunStatus};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{self, Rng};
use crate::stats;

const MIN_CHUNK: usize = 32;
const MAX_CHUNK: usize = 16_384;
const STALL_TOLERANCE: f64 = 1e-9;

pub(crate) fn simulation_error<T: Real>(theta_c: &[T], theta_b: &[bool], e: Error) -> Error {
    Error::Simulation {
        theta_c: theta_c
            .iter()
            .map(|v| v.to_f64().unwrap_or(f64::NAN))
            .collect(),
        theta_b: theta_b.to_vec(),
        source: Box::new(e),
    }
}

pub(crate) fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))
}

/// `δ1` as the median of `n_pilot` prior-predictive distances, returned with
/// the full distance sample. Uses stream tag 0.
pub fn pilot_threshold<T: Real, D: Discrepancy<T>>(
    problem: &D,
    prior: &PriorSpec<T>,
    n_pilot: usize,
    seed: u64,
    workers: usize,
) -> Result<(T, Vec<T>)> {
    let pool = build_pool(workers)?;
    pilot_with(&pool, problem, prior, n_pilot, seed)
}

fn pilot_with<T: Real, D: Discrepancy<T>>(
    pool: &rayon::ThreadPool,
    problem: &D,
    prior: &PriorSpec<T>,
    n_pilot: usize,
    seed: u64,
) -> Result<(T, Vec<T>)> {
    if n_pilot < 2 {
        return Err(Error::InvalidParameter("n_pilot must be at least 2".into()));
    }
    let distances = pool.install(|| {
        (0..n_pilot)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(seed, 0, i as u64);
                let (c, b) = sample_prior(prior, &mut rng);
                problem
                    .distance(&c, &b, &mut rng)
                    .map_err(|e| simulation_error(&c, &b, e))
            })
            .collect::<Result<Vec<T>>>()
    })?;
    let delta1 = stats::median(&distances).expect("nonempty pilot");
    Ok((delta1, distances))
}

type Accepted<T> = (Vec<T>, Vec<bool>, T);

struct Collected<T> {
    accepted: Vec<Accepted<T>>,
    proposals: usize,
    complete: bool,
}

/// Proposes in index-ordered chunks until `m` distances fall below
/// `threshold` or the budget runs out.
#[allow(clippy::too_many_arguments)]
fn collect<T, D, P>(
    pool: &rayon::ThreadPool,
    problem: &D,
    propose: P,
    seed: u64,
    tag: u32,
    threshold: T,
    m: usize,
    rate_hint: f64,
    sims_used: &mut u64,
    budget: u64,
) -> Result<Collected<T>>
where
    T: Real,
    D: Discrepancy<T>,
    P: Fn(&mut Rng) -> Result<(Vec<T>, Vec<bool>)> + Sync,
{
    let mut accepted = Vec::with_capacity(m);
    let mut next = 0usize;
    while accepted.len() < m {
        let remaining = budget.saturating_sub(*sims_used);
        if remaining == 0 {
            return Ok(Collected {
                accepted,
                proposals: next,
                complete: false,
            });
        }
        let rate = if !accepted.is_empty() {
            accepted.len() as f64 / next as f64
        } else {
            rate_hint
        }
        .max(1e-4);
        let want = (1.1 * (m - accepted.len()) as f64 / rate).ceil() as usize;
        let chunk = want
            .clamp(MIN_CHUNK, MAX_CHUNK)
            .min(remaining.min(usize::MAX as u64) as usize);
        let results: Vec<Result<Accepted<T>>> = pool.install(|| {
            (next..next + chunk)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng::stream(seed, tag, i as u64);
                    let (c, b) = propose(&mut rng)?;
                    let d = problem
                        .distance(&c, &b, &mut rng)
                        .map_err(|e| simulation_error(&c, &b, e))?;
                    Ok((c, b, d))
                })
                .collect()
        });
        *sims_used += chunk as u64;
        for (offset, res) in results.into_iter().enumerate() {
            let (c, b, d) = res?;
            if d < threshold {
                accepted.push((c, b, d));
                if accepted.len() == m {
                    return Ok(Collected {
                        accepted,
                        proposals: next + offset + 1,
                        complete: true,
                    });
                }
            }
        }
        next += chunk;
    }
    unreachable!("loop exits by returning")
}

/// Next threshold: the median of the previous distances if the previous
/// acceptance rate exceeded 1%, otherwise their 75th percentile.
pub fn next_threshold<T: Real>(distances: &[T], acceptance_rate: f64) -> T {
    let p = if acceptance_rate > 0.01 { 0.5 } else { 0.75 };
    stats::quantile(distances, p).expect("nonempty generation")
}

fn prior_scale<T: Real>(prior: &PriorSpec<T>) -> T {
    if prior.bounds.is_empty() {
        return T::one();
    }
    let s: T = prior
        .bounds
        .iter()
        .map(|&(lo, hi)| (hi - lo) * (hi - lo))
        .sum();
    s / T::from_usize_lossy(prior.bounds.len())
}

/// Runs nSMC-ABC against `problem` until the acceptance rate drops below
/// `settings.stop_rate`, the budget is spent, the thresholds stall, or the
/// iteration cap is reached.
pub fn run_nsmc_abc<T: Real, D: Discrepancy<T>>(
    problem: &D,
    prior: &PriorSpec<T>,
    settings: &AbcSettings<T>,
) -> Result<RunRecord<T>> {
    settings.validate()?;
    prior.validate()?;
    let pool = build_pool(settings.workers)?;
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
    let mut sims_used = 0u64;
    let delta1 = match settings.delta1 {
        Some(d) => d,
        None => {
            if (settings.n_pilot as u64) > settings.budget {
                return Ok(rec);
            }
            let (d, dists) = pilot_with(&pool, problem, prior, settings.n_pilot, settings.seed)?;
            sims_used += settings.n_pilot as u64;
            rec.pilot_distances = dists;
            d
        }
    };
    rec.delta1 = Some(delta1);
    rec.sims_used = sims_used;

    let started = Instant::now();
    let first = collect(
        &pool,
        problem,
        |rng| Ok(sample_prior(prior, rng)),
        settings.seed,
        1,
        delta1,
        settings.m,
        0.5,
        &mut sims_used,
        settings.budget,
    )?;
    rec.sims_used = sims_used;
    if !first.complete {
        rec.partial_accepted = first.accepted.len();
        return Ok(rec);
    }
    let w0 = T::one() / T::from_usize_lossy(settings.m);
    rec.generations.push(Generation {
        iteration: 1,
        threshold: delta1,
        particles: first
            .accepted
            .into_iter()
            .map(|(theta_c, theta_b, distance)| Particle {
                theta_c,
                theta_b,
                weight: w0,
                distance,
            })
            .collect(),
        sims_used,
        acceptance_rate: settings.m as f64 / first.proposals as f64,
        proposals: first.proposals,
    });
    rec.timings.push(started.elapsed().as_secs_f64());

    let fallback = prior_scale(prior);
    loop {
        let prev = rec.generations.last().expect("at least one generation");
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
        let floor = prev.threshold - T::lit(STALL_TOLERANCE) * prev.threshold.abs();
        if prev.threshold.is_finite() && !(threshold < floor) {
            rec.status = RunStatus::Stalled;
            break;
        }
        let started = Instant::now();
        let ks = KernelState::from_generation(prev, settings.q_stay, fallback)?;
        if ks.ridge > T::zero() {
            rec.warnings.push(format!(
                "iteration {r}: proposal covariance regularized with ridge {}",
                ks.ridge
            ));
        }
        let weights = prev.weights();
        let kind = settings.kernel;
        let collected = collect(
            &pool,
            problem,
            |rng| kernel::propose(kind, prev, &weights, &ks, prior, rng),
            settings.seed,
            r as u32,
            threshold,
            settings.m,
            prev.acceptance_rate,
            &mut sims_used,
            settings.budget,
        )?;
        rec.sims_used = sims_used;
        if !collected.complete {
            rec.partial_accepted = collected.accepted.len();
            rec.status = RunStatus::BudgetExhausted;
            break;
        }
        let log_w: Vec<T> = collected
            .accepted
            .iter()
            .map(|(c, _, _)| kernel::log_unnormalized_weight(c, prev, &ks, prior))
            .collect();
        let weights = kernel::normalize_log_weights(&log_w)?;
        let particles = collected
            .accepted
            .into_iter()
            .zip(weights)
            .map(|((theta_c, theta_b, distance), weight)| Particle {
                theta_c,
                theta_b,
                weight,
                distance,
            })
            .collect();
        rec.generations.push(Generation {
            iteration: r,
            threshold,
            particles,
            sims_used,
            acceptance_rate: settings.m as f64 / collected.proposals as f64,
            proposals: collected.proposals,
        });
        rec.timings.push(started.elapsed().as_secs_f64());
        log::info!(
            "iteration {r}: threshold {threshold}, acceptance rate {:.4}, simulations {sims_used}",
            settings.m as f64 / collected.proposals as f64
        );
    }
    Ok(rec)
}
