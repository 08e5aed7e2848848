//! Sequential Monte Carlo ABC over continuous parameters and binary
//! coupling directions.
//!
//! Continuous parameters are perturbed with a Gaussian kernel whose
//! covariance is twice the weighted covariance of the previous generation.
//! Binary parameters are redrawn from their unweighted marginal frequencies
//! and then kept with probability `q_stay` (the default kernel), or copied
//! from a jointly drawn particle and flipped with probability `4 p (1 - p)`
//! (the joint kernel). Importance weights only involve the continuous part.

pub mod diagnostics;
pub mod kernel;
pub mod predictive;
pub mod prior;
pub mod problem;
pub mod record;
pub mod smc;
pub mod standard;

pub use diagnostics::{ess, f1_score, posterior_mean, posterior_network, EdgeMode, PosteriorEdge};
pub use kernel::KernelState;
pub use predictive::{posterior_predictive, PredictiveBands};
pub use prior::{sample_prior, PriorSpec};
pub use problem::JrProblem;
pub use smc::{pilot_threshold, run_nsmc_abc};
pub use standard::run_standard_smc_abc;

use serde::Serialize;

use crate::error::Result;
use crate::real::Real;

/// Anything that can simulate a dataset for `θ` and score it against the
/// observed data.
pub trait Discrepancy<T>: Sync {
    fn distance(&self, theta_c: &[T], theta_b: &[bool], rng: &mut crate::rng::Rng) -> Result<T>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle<T> {
    pub theta_c: Vec<T>,
    pub theta_b: Vec<bool>,
    pub weight: T,
    pub distance: T,
}

/// The `M` weighted particles accepted at one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Generation<T> {
    pub iteration: usize,
    pub threshold: T,
    pub particles: Vec<Particle<T>>,
    /// Cumulative simulations, pilot included, when this generation closed.
    pub sims_used: u64,
    /// `M` divided by the number of proposals needed to reach the `M`-th
    /// acceptance.
    pub acceptance_rate: f64,
    /// Number of proposals up to and including the `M`-th acceptance.
    pub proposals: usize,
}

impl<T: Real> Generation<T> {
    pub fn weights(&self) -> Vec<T> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn distances(&self) -> Vec<T> {
        self.particles.iter().map(|p| p.distance).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Independent Bernoulli redraw followed by keep-or-flip.
    #[default]
    Bernoulli,
    /// Joint particle draw followed by variance-scaled flips.
    Flip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// The acceptance rate fell below the stopping rate.
    Converged,
    /// The simulation budget ran out before the next generation completed.
    BudgetExhausted,
    /// The next threshold would not have decreased.
    Stalled,
    /// The configured iteration cap was reached.
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbcSettings<T> {
    /// Particles kept per generation.
    pub m: usize,
    /// Prior simulations used to set the first threshold.
    pub n_pilot: usize,
    pub q_stay: f64,
    /// Total simulations allowed, pilot included.
    pub budget: u64,
    /// Stop once a generation's acceptance rate falls below this.
    pub stop_rate: f64,
    pub kernel: KernelKind,
    pub workers: usize,
    pub seed: u64,
    /// Fixed first threshold; skips the pilot run. May be infinite.
    pub delta1: Option<T>,
    pub max_iterations: Option<usize>,
}

impl<T: Real> Default for AbcSettings<T> {
    fn default() -> Self {
        Self {
            m: 500,
            n_pilot: 10_000,
            q_stay: 0.9,
            budget: 10_000_000,
            stop_rate: 1e-3,
            kernel: KernelKind::Bernoulli,
            workers: 1,
            seed: 0,
            delta1: None,
            max_iterations: None,
        }
    }
}

impl<T: Real> AbcSettings<T> {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.m == 0 {
            return Err(Error::InvalidParameter("M must be positive".into()));
        }
        if self.delta1.is_none() && self.n_pilot < 2 {
            return Err(Error::InvalidParameter("n_pilot must be at least 2".into()));
        }
        if !(self.q_stay > 0.5 && self.q_stay <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "q_stay must lie in (0.5, 1], got {}",
                self.q_stay
            )));
        }
        if !(self.stop_rate > 0.0 && self.stop_rate < 1.0) {
            return Err(Error::InvalidParameter(
                "stop rate must lie in (0, 1)".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be positive".into()));
        }
        if let Some(d) = self.delta1 {
            if !(d > T::zero()) {
                return Err(Error::InvalidParameter("delta1 must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Everything produced by one inference run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord<T> {
    pub pilot_distances: Vec<T>,
    pub delta1: Option<T>,
    pub generations: Vec<Generation<T>>,
    pub status: RunStatus,
    pub sims_used: u64,
    /// Acceptances of an unfinished generation when the budget ran out.
    pub partial_accepted: usize,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per completed generation.
    pub timings: Vec<f64>,
}

impl<T: Real> RunRecord<T> {
    pub fn last(&self) -> Option<&Generation<T>> {
        self.generations.last()
    }

    /// Effective sample size per generation.
    pub fn ess_trace(&self) -> Vec<T> {
        self.generations.iter().map(|g| ess(&g.weights())).collect()
    }
}
