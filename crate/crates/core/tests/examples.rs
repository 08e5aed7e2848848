//! Worked examples for the integrator, the summary estimators and the
//! cascade distance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use jrnet::inference::{pilot_threshold, Discrepancy, JrProblem, PriorSpec};
use jrnet::integrator::{
    integrate, simulate_observed, strang_step, strang_step_xi, OuPrecompute, Scheme, SimSettings,
    State,
};
use jrnet::model::{
    off_diagonal_pairs, Adjacency, CouplingStructure, JrDrift, ModelParams, PopulationParams,
    Target, ThetaLayout,
};
use jrnet::rng::{self, OBSERVED_TAG};
use jrnet::summaries::{estimate_spectrum, raw_spectrum, SummaryConfig};
use jrnet::Real;

fn final_state(
    m: &ModelParams<f64>,
    noise: &[f64],
    delta: f64,
    t_end: f64,
    x0: &State<f64>,
) -> Vec<f64> {
    let n_steps = (t_end / delta).round() as usize;
    let mut rng = rng::stream(0, 0, 0);
    let mut last = Vec::new();
    integrate(
        Scheme::Strang,
        (&m.damping_diag(), noise),
        delta,
        &JrDrift::new(m),
        x0,
        n_steps,
        &mut rng,
        |k, x| {
            if k == n_steps {
                last = x.to_flat();
            }
        },
    )
    .unwrap();
    last
}

#[test]
fn noiseless_self_convergence() {
    let m = ModelParams::<f64>::uncoupled(1);
    let x0 = State::from_flat(&[0.02, 15.0, 5.0, 0.0, 0.0, 0.0]).unwrap();
    let zero = [0.0; 3];
    let reference = final_state(&m, &zero, 1.25e-5, 0.5, &x0);
    let steps = [8e-4, 4e-4, 2e-4, 1e-4];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&d| {
            final_state(&m, &zero, d, 0.5, &x0)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 0.9, "{errors:?}");
    }
}

#[test]
fn one_step_mean_matches_noise_free_composition() {
    let m = ModelParams::<f64>::uncoupled(1);
    let pre = OuPrecompute::new(&m, 1e-3).unwrap();
    let drift = JrDrift::new(&m);
    let x = State::from_flat(&[0.03, 20.0, 8.0, 1.5, -40.0, 12.0]).unwrap();
    let expected = strang_step_xi(&x, &pre, &drift, &[0.0; 6]).to_flat();
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..6).map(|_| f64::standard_normal(&mut rng)).collect();
            strang_step(&x, &pre, &drift, &z).to_flat()
        })
        .collect();
    for j in 0..6 {
        let mean = draws.iter().map(|d| d[j]).sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - expected[j]).abs() <= 3.0 * se,
            "coordinate {j}: {mean} vs {}",
            expected[j]
        );
    }
}

#[test]
fn spectral_peak_is_stable_across_seeds() {
    let mut p = PopulationParams::<f64>::default();
    p.a_gain = 3.25;
    p.mu = 90.0;
    p.sigma = 500.0;
    let m = ModelParams::single(p);
    let settings = SimSettings::new(20.0, 1e-4, 2e-3);
    let peaks: Vec<f64> = (0..5)
        .map(|seed| {
            let y = simulate_observed(&m, &settings, &mut rng::stream(seed, OBSERVED_TAG, 0)).unwrap();
            assert_eq!(y.len(), 10_001);
            assert!(y.channels[0].iter().all(|v| v.is_finite()));
            let s = estimate_spectrum(
                &y.channels[0],
                y.dt,
                jrnet::summaries::default_halfwidth(y.len()),
            )
            .unwrap();
            let i = (0..s.values.len())
                .max_by(|&a, &b| s.values[a].total_cmp(&s.values[b]))
                .unwrap();
            s.grid[i]
        })
        .collect();
    let lo = peaks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = peaks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo <= 2.0, "{peaks:?}");
}

fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| f64::standard_normal(&mut rng)).collect()
}

#[test]
fn white_noise_spectrum_is_flat() {
    let n = 10_000;
    let x = white_noise(n, 12);
    let h = (n as f64).sqrt().ceil() as usize;
    let s = estimate_spectrum(&x, 2e-3, h).unwrap();
    let k = s.values.len();
    let middle = &s.values[k / 10..k - k / 10];
    let max = middle.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = middle.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(max / min < 3.0, "{}", max / min);
}

#[test]
fn raw_periodogram_satisfies_parseval() {
    let x = white_noise(10_000, 13);
    let dt = 2e-3;
    let s = raw_spectrum(&x, dt).unwrap();
    let total: f64 = s.values.iter().sum::<f64>() * s.step();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
    assert!((total / var - 1.0).abs() < 0.05, "{total} vs {var}");
}

#[test]
fn cascade_truth_beats_the_pilot_median() {
    let mut truth = ModelParams::<f64>::uncoupled(4);
    truth.pops[0].a_gain = 3.6;
    truth.coupling = CouplingStructure::Uniform { l: 700.0 };
    truth.adjacency = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let obs = simulate_observed(
        &truth,
        &SimSettings::new(20.0, 1e-4, 2e-3),
        &mut rng::stream(5, OBSERVED_TAG, 0),
    )
    .unwrap();
    let pairs = off_diagonal_pairs(4);
    let layout = ThetaLayout::new(
        (0..4)
            .map(|k| Target::Gain(vec![k]))
            .chain([Target::Strength])
            .collect(),
        pairs.clone(),
    );
    let mut base = truth.clone();
    base.adjacency = Adjacency::empty(4);
    let problem = JrProblem::new(base, layout, &obs, 2e-3, 0.0, SummaryConfig::default()).unwrap();
    let mut bounds = vec![(2.0, 4.0); 4];
    bounds.push((100.0, 2000.0));
    let prior = PriorSpec::new(bounds, pairs.len());
    let (delta1, _) = pilot_threshold(&problem, &prior, 100, 6, 1).unwrap();

    let theta_c = [3.6, 3.25, 3.25, 3.25, 700.0];
    let theta_b: Vec<bool> = pairs.iter().map(|&(j, k)| truth.adjacency.get(j, k)).collect();
    let below = (0..100)
        .filter(|&i| {
            let mut rng = rng::stream(7, 0, i);
            problem.distance(&theta_c, &theta_b, &mut rng).unwrap() < delta1
        })
        .count();
    assert!(below > 50, "{below} of 100 below {delta1}");
}
