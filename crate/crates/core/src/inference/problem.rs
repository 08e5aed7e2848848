//! The JR-NMM network problem: simulate, summarize, compare.

use super::Discrepancy;
use crate::error::{Error, Result};
use crate::integrator::{simulate_observed, MultiSeries, SimSettings};
use crate::model::{apply_theta, ModelParams, ThetaLayout};
use crate::real::Real;
use crate::rng::Rng;
use crate::summaries::{
    calibrate_weights, compute_summaries, compute_summaries_aligned, distance, DistanceWeights,
    SummaryConfig, SummarySet,
};

/// Observed summaries together with everything needed to simulate a
/// comparable dataset for a parameter vector.
#[derive(Clone, Debug)]
pub struct JrProblem<T> {
    pub base: ModelParams<T>,
    pub layout: ThetaLayout,
    pub sim: SimSettings<T>,
    pub summary: SummaryConfig,
    pub observed: SummarySet<T>,
    pub weights: DistanceWeights<T>,
}

impl<T: Real> JrProblem<T> {
    /// Summarizes `obs` and calibrates the distance weights on it. Simulated
    /// series cover the same window as `obs` at the integration step
    /// `sim_step`, and are sampled at `obs.dt`.
    pub fn new(
        base: ModelParams<T>,
        layout: ThetaLayout,
        obs: &MultiSeries<T>,
        sim_step: T,
        burn_in: T,
        summary: SummaryConfig,
    ) -> Result<Self> {
        base.validate()?;
        layout.validate(&base)?;
        if obs.n_channels() != base.n() {
            return Err(Error::DimensionMismatch {
                expected: base.n(),
                got: obs.n_channels(),
            });
        }
        let t_end = obs.dt * T::from_usize_lossy(obs.len() - 1);
        let mut sim = SimSettings::new(t_end, sim_step, obs.dt);
        sim.burn_in = burn_in;
        let observed = compute_summaries(obs, &summary)?;
        let weights = calibrate_weights(&observed)?;
        Ok(Self {
            base,
            layout,
            sim,
            summary,
            observed,
            weights,
        })
    }

    pub fn simulate(
        &self,
        theta_c: &[T],
        theta_b: &[bool],
        rng: &mut Rng,
    ) -> Result<MultiSeries<T>> {
        let m = apply_theta(&self.layout, theta_c, theta_b, &self.base)?;
        simulate_observed(&m, &self.sim, rng)
    }

    /// Summaries of one simulated dataset on the observed grids.
    pub fn simulate_summaries(
        &self,
        theta_c: &[T],
        theta_b: &[bool],
        rng: &mut Rng,
    ) -> Result<SummarySet<T>> {
        let series = self.simulate(theta_c, theta_b, rng)?;
        compute_summaries_aligned(&series, &self.summary, &self.observed)
    }
}

impl<T: Real> Discrepancy<T> for JrProblem<T> {
    fn distance(&self, theta_c: &[T], theta_b: &[bool], rng: &mut Rng) -> Result<T> {
        let sim = self.simulate_summaries(theta_c, theta_b, rng)?;
        distance(&self.observed, &sim, &self.weights)
    }
}
