//! Posterior predictive envelopes of the summary curves.

use rayon::prelude::*;

use super::kernel::sample_index;
use super::problem::JrProblem;
use super::smc::{build_pool, simulation_error};
use super::Generation;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{self, PREDICTIVE_TAG};
use crate::stats;
use crate::summaries::{Curve, SummarySet};

/// Pointwise minimum, median and maximum of each summary curve over the
/// predictive simulations.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveBands<T> {
    pub lower: SummarySet<T>,
    pub median: SummarySet<T>,
    pub upper: SummarySet<T>,
    pub draws: usize,
}

/// Draws `n_draws` particles of `gen` by weight, simulates one dataset for
/// each and summarizes them on the observed grids. Draw `i` uses the
/// predictive stream `i`.
pub fn posterior_predictive<T: Real>(
    problem: &JrProblem<T>,
    gen: &Generation<T>,
    n_draws: usize,
    seed: u64,
    workers: usize,
) -> Result<PredictiveBands<T>> {
    if n_draws == 0 {
        return Err(Error::InvalidParameter("n_draws must be positive".into()));
    }
    if gen.particles.is_empty() {
        return Err(Error::InvalidParameter(
            "generation has no particles".into(),
        ));
    }
    let weights = gen.weights();
    let pool = build_pool(workers)?;
    let sets = pool.install(|| {
        (0..n_draws)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(seed, PREDICTIVE_TAG, i as u64);
                let p = &gen.particles[sample_index(&weights, &mut rng)];
                problem
                    .simulate_summaries(&p.theta_c, &p.theta_b, &mut rng)
                    .map_err(|e| simulation_error(&p.theta_c, &p.theta_b, e))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(PredictiveBands {
        lower: envelope(&sets, |v| v[0]),
        median: envelope(&sets, |v| stats::quantile_sorted(v, 0.5)),
        upper: envelope(&sets, |v| v[v.len() - 1]),
        draws: n_draws,
    })
}

fn envelope<T: Real>(sets: &[SummarySet<T>], pick: impl Fn(&[T]) -> T + Copy) -> SummarySet<T> {
    let first = &sets[0];
    let band = |get: &dyn Fn(&SummarySet<T>) -> &Vec<Curve<T>>| -> Vec<Curve<T>> {
        get(first)
            .iter()
            .enumerate()
            .map(|(c, template)| {
                let values = (0..template.values.len())
                    .map(|i| {
                        let mut v: Vec<T> = sets.iter().map(|s| get(s)[c].values[i]).collect();
                        v.sort_by(|a, b| a.partial_cmp(b).expect("finite summaries"));
                        pick(&v)
                    })
                    .collect();
                Curve {
                    kind: template.kind,
                    grid: template.grid.clone(),
                    values,
                }
            })
            .collect()
    };
    SummarySet {
        densities: band(&|s| &s.densities),
        spectra: band(&|s| &s.spectra),
        ccfs: band(&|s| &s.ccfs),
        pairs: first.pairs.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Particle;
    use crate::integrator::{simulate_observed, SimSettings};
    use crate::model::{ModelParams, Target, ThetaLayout};
    use crate::summaries::SummaryConfig;

    fn setup() -> (JrProblem<f64>, Generation<f64>) {
        let base = ModelParams::<f64>::uncoupled(1);
        let obs = simulate_observed(
            &base,
            &SimSettings::new(1.0, 2e-3, 2e-3),
            &mut rng::stream(3, 0, 0),
        )
        .unwrap();
        let layout = ThetaLayout::new(vec![Target::Gain(vec![0])], vec![]);
        let p = JrProblem::new(base, layout, &obs, 2e-3, 0.0, SummaryConfig::default()).unwrap();
        let gen = Generation {
            iteration: 1,
            threshold: 1.0,
            particles: [3.1, 3.25, 3.4]
                .iter()
                .map(|&a| Particle {
                    theta_c: vec![a],
                    theta_b: vec![],
                    weight: 1.0 / 3.0,
                    distance: 0.0,
                })
                .collect(),
            sims_used: 0,
            acceptance_rate: 1.0,
            proposals: 3,
        };
        (p, gen)
    }

    #[test]
    fn single_draw_collapses_band() {
        let (p, gen) = setup();
        let b = posterior_predictive(&p, &gen, 1, 5, 1).unwrap();
        assert_eq!(b.lower, b.upper);
        assert_eq!(b.lower, b.median);
    }

    #[test]
    fn bands_are_ordered_and_reproducible() {
        let (p, gen) = setup();
        let b = posterior_predictive(&p, &gen, 5, 5, 2).unwrap();
        let again = posterior_predictive(&p, &gen, 5, 5, 1).unwrap();
        assert_eq!(b, again);
        for ((lo, md), hi) in b
            .lower
            .spectra
            .iter()
            .zip(&b.median.spectra)
            .zip(&b.upper.spectra)
        {
            for i in 0..lo.values.len() {
                assert!(lo.values[i] <= md.values[i] && md.values[i] <= hi.values[i]);
            }
        }
    }
}
