//! Posterior summaries and run diagnostics.

use serde::Serialize;

use super::Generation;
use crate::model::Adjacency;
use crate::real::Real;

/// Effective sample size `1 / Σ w²` of normalized weights.
pub fn ess<T: Real>(weights: &[T]) -> T {
    T::one() / weights.iter().map(|&w| w * w).sum::<T>()
}

/// `2TP / (2TP + FP + FN)` over directed off-diagonal edges. Scores 1 when
/// neither adjacency has an edge.
pub fn f1_score(estimate: &Adjacency, truth: &Adjacency) -> f64 {
    assert_eq!(estimate.n(), truth.n(), "adjacency sizes differ");
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    let n = truth.n();
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            match (estimate.get(j, k), truth.get(j, k)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fne += 1,
                (false, false) => {}
            }
        }
    }
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        1.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    Present,
    Absent,
    /// Posterior mean exactly one half.
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorEdge {
    /// 1-based source population.
    pub from: usize,
    /// 1-based target population.
    pub to: usize,
    /// Unweighted fraction of particles with the edge.
    pub mean: f64,
    pub mode: EdgeMode,
    /// Mean within `[1/3, 2/3]`.
    pub weak: bool,
}

/// Marginal posterior of every binary slot. `slots` are the 0-based
/// `(j, k)` positions in the order of `theta_b`.
pub fn posterior_network<T: Real>(
    gen: &Generation<T>,
    slots: &[(usize, usize)],
) -> Vec<PosteriorEdge> {
    let means = super::kernel::binary_means(gen);
    slots
        .iter()
        .zip(means)
        .map(|(&(j, k), mean)| PosteriorEdge {
            from: j + 1,
            to: k + 1,
            mean,
            mode: if mean > 0.5 {
                EdgeMode::Present
            } else if mean < 0.5 {
                EdgeMode::Absent
            } else {
                EdgeMode::Undecided
            },
            weak: (1.0 / 3.0..=2.0 / 3.0).contains(&mean),
        })
        .collect()
}

/// Adjacency of `base` with each slot set to its posterior mode. Undecided
/// slots are set to absent.
pub fn mode_adjacency(base: &Adjacency, edges: &[PosteriorEdge]) -> Adjacency {
    let mut a = base.clone();
    for e in edges {
        a.set(e.from - 1, e.to - 1, e.mode == EdgeMode::Present);
    }
    a
}

/// Weighted mean of the continuous particles.
pub fn posterior_mean<T: Real>(gen: &Generation<T>) -> Vec<T> {
    let d = gen.particles.first().map_or(0, |p| p.theta_c.len());
    let mut out = vec![T::zero(); d];
    for p in &gen.particles {
        for (o, &v) in out.iter_mut().zip(&p.theta_c) {
            *o += p.weight * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Particle;

    #[test]
    fn ess_examples() {
        assert!((ess(&[0.25_f64; 4]) - 4.0).abs() < 1e-12);
        assert_eq!(ess(&[1.0_f64, 0.0, 0.0]), 1.0);
        assert_eq!(ess(&[0.5_f64, 0.5, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn f1_examples() {
        let truth = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(f1_score(&truth, &truth), 1.0);
        assert_eq!(f1_score(&Adjacency::empty(4), &truth), 0.0);
        assert_eq!(f1_score(&Adjacency::empty(4), &Adjacency::empty(4)), 1.0);
        let est = Adjacency::from_edges(4, &[(0, 1), (1, 2), (3, 0)]).unwrap();
        assert!((f1_score(&est, &truth) - 4.0 / 6.0).abs() < 1e-15);
    }

    fn gen_with(bits: &[[bool; 1]]) -> Generation<f64> {
        Generation {
            iteration: 1,
            threshold: 1.0,
            particles: bits
                .iter()
                .map(|b| Particle {
                    theta_c: vec![],
                    theta_b: b.to_vec(),
                    weight: 1.0 / bits.len() as f64,
                    distance: 0.0,
                })
                .collect(),
            sims_used: 0,
            acceptance_rate: 1.0,
            proposals: 0,
        }
    }

    #[test]
    fn network_modes_and_flags() {
        let all = gen_with(&[[true]; 10]);
        let e = &posterior_network(&all, &[(0, 1)])[0];
        assert_eq!((e.mean, e.mode, e.weak), (1.0, EdgeMode::Present, false));

        let mut bits = vec![[false]; 25];
        bits[0] = [true];
        let e = &posterior_network(&gen_with(&bits), &[(0, 1)])[0];
        assert_eq!((e.mean, e.mode), (0.04, EdgeMode::Absent));

        let mut bits = vec![[false]; 1000];
        bits[..512].iter_mut().for_each(|b| *b = [true]);
        let e = &posterior_network(&gen_with(&bits), &[(0, 1)])[0];
        assert_eq!(e.mode, EdgeMode::Present);
        assert!(e.weak);

        let e = &posterior_network(&gen_with(&[[true], [false]]), &[(0, 1)])[0];
        assert_eq!(e.mode, EdgeMode::Undecided);
    }
}
