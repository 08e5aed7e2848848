//! Path simulation for the coupled stochastic Jansen-Rit system.
//!
//! The state splits into displacements `Q = (X1, X2, X3)` and velocities
//! `P = (X4, X5, X6)` per population. The damped linear part is an
//! Ornstein-Uhlenbeck process solved exactly; the nonlinear part only shifts
//! `P` by `G(Q)` and is solved exactly as well. Composing the two flows gives
//! the Strang and Lie-Trotter schemes. Euler-Maruyama is kept as a baseline.
//!
//! The exponential and covariance matrices of the linear part are block
//! diagonal up to a permutation: coordinate `i` of `Q` only mixes with
//! coordinate `i` of `P`. They are stored as `3N` independent `2 x 2` blocks.

pub mod series;

pub use series::{ingest_csv, ingest_csv_file, MultiSeries};

use rand::Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::model::{Drift, JrDrift, ModelParams};
use crate::real::Real;

/// Solution vector, `q` and `p` each of length `3N`.
#[derive(Clone, Debug, PartialEq)]
pub struct State<T> {
    pub q: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Real> State<T> {
    pub fn zeros(n_pops: usize) -> Self {
        Self {
            q: vec![T::zero(); 3 * n_pops],
            p: vec![T::zero(); 3 * n_pops],
        }
    }

    /// Splits a flat `6N` vector laid out as `[Q; P]`.
    pub fn from_flat(x: &[T]) -> Result<Self> {
        if x.is_empty() || !x.len().is_multiple_of(6) {
            return Err(Error::InvalidParameter(format!(
                "state length must be a positive multiple of 6, got {}",
                x.len()
            )));
        }
        let h = x.len() / 2;
        Ok(Self {
            q: x[..h].to_vec(),
            p: x[h..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut x = self.q.clone();
        x.extend_from_slice(&self.p);
        x
    }

    pub fn n_pops(&self) -> usize {
        self.q.len() / 3
    }

    /// Observed output `X2 - X3` of population `k`.
    pub fn output(&self, k: usize) -> T {
        self.q[3 * k + 1] - self.q[3 * k + 2]
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

/// Per-coordinate `2 x 2` blocks of `Exp(Δ)`, `Cov(Δ)` and its Cholesky factor.
#[derive(Clone, Debug)]
pub struct OuPrecompute<T> {
    delta: T,
    gamma: Vec<T>,
    noise: Vec<T>,
    // Exp(Δ) = [[theta, kappa], [dtheta, dkappa]]
    theta: Vec<T>,
    kappa: Vec<T>,
    dtheta: Vec<T>,
    dkappa: Vec<T>,
    c_qq: Vec<T>,
    c_qp: Vec<T>,
    c_pp: Vec<T>,
    l11: Vec<T>,
    l21: Vec<T>,
    l22: Vec<T>,
    ridge: T,
}

/// Covariance block entries for damping `g`, noise `s` and step `d`.
fn cov_entries<T: Real>(g: T, s: T, d: T) -> (T, T, T) {
    let two = T::lit(2.0);
    let x = g * d;
    let y = two * x;
    let e = (-y).exp();
    // 1 - e^{-y}(1 + y + y²/2) and 1 - e^{-y}(1 - y + y²/2)
    let (fq, fp) = if y < T::one() {
        let mut term = y * y * y / T::lit(6.0);
        let mut tail = T::zero();
        let mut k = 3.0;
        while term > T::epsilon() * tail || tail == T::zero() {
            tail += term;
            k += 1.0;
            term = term * y / T::lit(k);
            if k > 60.0 || term == T::zero() {
                break;
            }
        }
        (e * tail, e * (two * y + tail))
    } else {
        let half_sq = y * y / two;
        (
            T::one() - e * (T::one() + y + half_sq),
            T::one() - e * (T::one() - y + half_sq),
        )
    };
    let s2 = s * s;
    let four = T::lit(4.0);
    let kap = (-x).exp() * d;
    (
        s2 / (four * g * g * g) * fq,
        s2 / two * kap * kap,
        s2 / (four * g) * fp,
    )
}

fn factor_block<T: Real>(c11: T, c12: T, c22: T, ridge: T) -> Option<(T, T, T)> {
    let a = c11 + ridge;
    if !(a > T::zero()) {
        return None;
    }
    let l11 = a.sqrt();
    let l21 = c12 / l11;
    let d = c22 + ridge - l21 * l21;
    if !(d >= T::zero()) {
        return None;
    }
    Some((l11, l21, d.sqrt()))
}

impl<T: Real> OuPrecompute<T> {
    pub fn new(m: &ModelParams<T>, delta: T) -> Result<Self> {
        Self::from_diagonals(&m.damping_diag(), &m.noise_diag(), delta)
    }

    /// Builds from the diagonals of `Γ` (positive) and `Σ` (nonnegative).
    pub fn from_diagonals(gamma: &[T], noise: &[T], delta: T) -> Result<Self> {
        if !(delta > T::zero() && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step must be positive, got {delta}"
            )));
        }
        if gamma.len() != noise.len() {
            return Err(Error::DimensionMismatch {
                expected: gamma.len(),
                got: noise.len(),
            });
        }
        if gamma.iter().any(|&g| !(g > T::zero() && g.is_finite())) {
            return Err(Error::InvalidParameter(
                "damping rates must be positive".into(),
            ));
        }
        if noise.iter().any(|&s| !(s >= T::zero() && s.is_finite())) {
            return Err(Error::InvalidParameter(
                "noise intensities must be nonnegative".into(),
            ));
        }
        let n = gamma.len();
        let mut pre = Self {
            delta,
            gamma: gamma.to_vec(),
            noise: noise.to_vec(),
            theta: Vec::with_capacity(n),
            kappa: Vec::with_capacity(n),
            dtheta: Vec::with_capacity(n),
            dkappa: Vec::with_capacity(n),
            c_qq: Vec::with_capacity(n),
            c_qp: Vec::with_capacity(n),
            c_pp: Vec::with_capacity(n),
            l11: vec![T::zero(); n],
            l21: vec![T::zero(); n],
            l22: vec![T::zero(); n],
            ridge: T::zero(),
        };
        for (&g, &s) in gamma.iter().zip(noise) {
            let x = g * delta;
            let e = (-x).exp();
            pre.theta.push(e * (T::one() + x));
            pre.kappa.push(e * delta);
            pre.dtheta.push(-g * g * e * delta);
            pre.dkappa.push(e * (T::one() - x));
            let (qq, qp, pp) = cov_entries(g, s, delta);
            pre.c_qq.push(qq);
            pre.c_qp.push(qp);
            pre.c_pp.push(pp);
        }
        pre.factorize()?;
        Ok(pre)
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.gamma.len();
        let trace_mean = (self.c_qq.iter().copied().sum::<T>()
            + self.c_pp.iter().copied().sum::<T>())
            / T::from_usize_lossy(2 * n);
        let mut ridge = T::zero();
        let max_ridge = T::lit(1e-6) * trace_mean;
        loop {
            let mut ok = true;
            for i in 0..n {
                if self.noise[i] == T::zero() {
                    self.l11[i] = T::zero();
                    self.l21[i] = T::zero();
                    self.l22[i] = T::zero();
                    continue;
                }
                match factor_block(self.c_qq[i], self.c_qp[i], self.c_pp[i], ridge) {
                    Some((a, b, c)) => {
                        self.l11[i] = a;
                        self.l21[i] = b;
                        self.l22[i] = c;
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                self.ridge = ridge;
                return Ok(());
            }
            ridge = if ridge == T::zero() {
                T::lit(1e-12) * trace_mean
            } else {
                ridge * T::lit(10.0)
            };
            if !(ridge > T::zero()) || ridge > max_ridge * T::lit(1.000_001) {
                return Err(Error::Factorization(format!(
                    "Cov({}) is not positive semi-definite even with ridge {}",
                    self.delta, max_ridge
                )));
            }
        }
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// Ridge that had to be added before factorization succeeded (usually 0).
    pub fn ridge(&self) -> T {
        self.ridge
    }

    /// Length of `Q` (`3N`).
    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn damping(&self) -> &[T] {
        &self.gamma
    }

    pub fn noise(&self) -> &[T] {
        &self.noise
    }

    /// Maps `6N` standard normals, ordered `[z_Q; z_P]`, to a draw of
    /// `N(0, Cov(Δ))` in the same layout.
    pub fn correlate_into(&self, z: &[T], xi: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let (zq, zp) = (z[i], z[n + i]);
            xi[i] = self.l11[i] * zq;
            xi[n + i] = self.l21[i] * zq + self.l22[i] * zp;
        }
    }

    /// Exact linear flow `x ← Exp(Δ) x + xi`, where `xi` is `[ξ_Q; ξ_P]`.
    pub fn flow(&self, x: &mut State<T>, xi: &[T]) {
        let n = self.dim();
        for i in 0..n {
            let (q, p) = (x.q[i], x.p[i]);
            x.q[i] = self.theta[i] * q + self.kappa[i] * p + xi[i];
            x.p[i] = self.dtheta[i] * q + self.dkappa[i] * p + xi[n + i];
        }
    }

    /// Noise-free linear flow `x ← Exp(Δ) x`.
    pub fn flow_mean(&self, x: &mut State<T>) {
        let n = self.dim();
        for i in 0..n {
            let (q, p) = (x.q[i], x.p[i]);
            x.q[i] = self.theta[i] * q + self.kappa[i] * p;
            x.p[i] = self.dtheta[i] * q + self.dkappa[i] * p;
        }
    }

    fn dense(&self, blocks: [&[T]; 4]) -> Vec<T> {
        let n = self.dim();
        let d = 2 * n;
        let mut out = vec![T::zero(); d * d];
        for i in 0..n {
            out[i * d + i] = blocks[0][i];
            out[i * d + n + i] = blocks[1][i];
            out[(n + i) * d + i] = blocks[2][i];
            out[(n + i) * d + n + i] = blocks[3][i];
        }
        out
    }

    /// `Exp(Δ)` as a row-major `6N x 6N` matrix in `[Q; P]` layout.
    pub fn exp_dense(&self) -> Vec<T> {
        self.dense([&self.theta, &self.kappa, &self.dtheta, &self.dkappa])
    }

    /// `Cov(Δ)` as a row-major `6N x 6N` matrix in `[Q; P]` layout.
    pub fn cov_dense(&self) -> Vec<T> {
        self.dense([&self.c_qq, &self.c_qp, &self.c_qp, &self.c_pp])
    }

    /// Lower-triangular factor of `Cov(Δ)` as a row-major `6N x 6N` matrix.
    pub fn chol_dense(&self) -> Vec<T> {
        let zeros = vec![T::zero(); self.dim()];
        self.dense([&self.l11, &zeros, &self.l21, &self.l22])
    }
}

fn check_dims<T: Real, D: Drift<T> + ?Sized>(x: &State<T>, pre: &OuPrecompute<T>, drift: &D) {
    assert_eq!(x.q.len(), pre.dim(), "state and precompute disagree on N");
    assert_eq!(drift.dim(), pre.dim(), "drift and precompute disagree on N");
}

/// One Strang step given a prepared noise increment `xi ~ N(0, Cov(Δ))`:
/// half a shift by `G`, the exact linear flow, then another half shift.
pub fn strang_step_xi<T: Real, D: Drift<T> + ?Sized>(
    x: &State<T>,
    pre: &OuPrecompute<T>,
    drift: &D,
    xi: &[T],
) -> State<T> {
    check_dims(x, pre, drift);
    let half = pre.delta / T::lit(2.0);
    let mut g = vec![T::zero(); pre.dim()];
    let mut y = x.clone();
    drift.displacement_into(&y.q, &mut g);
    y.p.iter_mut().zip(&g).for_each(|(p, &gi)| *p += half * gi);
    pre.flow(&mut y, xi);
    drift.displacement_into(&y.q, &mut g);
    y.p.iter_mut().zip(&g).for_each(|(p, &gi)| *p += half * gi);
    y
}

/// One Strang step driven by `6N` standard normals `z`.
pub fn strang_step<T: Real, D: Drift<T> + ?Sized>(
    x: &State<T>,
    pre: &OuPrecompute<T>,
    drift: &D,
    z: &[T],
) -> State<T> {
    let mut xi = vec![T::zero(); 2 * pre.dim()];
    pre.correlate_into(z, &mut xi);
    strang_step_xi(x, pre, drift, &xi)
}

/// One Lie-Trotter step given `xi`: a full shift by `G`, then the linear flow.
pub fn lie_trotter_step_xi<T: Real, D: Drift<T> + ?Sized>(
    x: &State<T>,
    pre: &OuPrecompute<T>,
    drift: &D,
    xi: &[T],
) -> State<T> {
    check_dims(x, pre, drift);
    let mut g = vec![T::zero(); pre.dim()];
    let mut y = x.clone();
    drift.displacement_into(&y.q, &mut g);
    y.p.iter_mut()
        .zip(&g)
        .for_each(|(p, &gi)| *p += pre.delta * gi);
    pre.flow(&mut y, xi);
    y
}

pub fn lie_trotter_step<T: Real, D: Drift<T> + ?Sized>(
    x: &State<T>,
    pre: &OuPrecompute<T>,
    drift: &D,
    z: &[T],
) -> State<T> {
    let mut xi = vec![T::zero(); 2 * pre.dim()];
    pre.correlate_into(z, &mut xi);
    lie_trotter_step_xi(x, pre, drift, &xi)
}

/// Coefficients of the full linear drift and the diffusion for the
/// Euler-Maruyama baseline.
#[derive(Clone, Debug)]
pub struct EulerMaruyama<T> {
    delta: T,
    gamma: Vec<T>,
    noise: Vec<T>,
}

impl<T: Real> EulerMaruyama<T> {
    pub fn new(m: &ModelParams<T>, delta: T) -> Result<Self> {
        Self::from_diagonals(&m.damping_diag(), &m.noise_diag(), delta)
    }

    pub fn from_diagonals(gamma: &[T], noise: &[T], delta: T) -> Result<Self> {
        if !(delta > T::zero() && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step must be positive, got {delta}"
            )));
        }
        if gamma.len() != noise.len() {
            return Err(Error::DimensionMismatch {
                expected: gamma.len(),
                got: noise.len(),
            });
        }
        Ok(Self {
            delta,
            gamma: gamma.to_vec(),
            noise: noise.to_vec(),
        })
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

/// One Euler-Maruyama step `x + Δ f(x) + √Δ Σ z_P`. Only the `P` half of
/// the `6N` vector `z` is used.
pub fn euler_maruyama_step<T: Real, D: Drift<T> + ?Sized>(
    x: &State<T>,
    em: &EulerMaruyama<T>,
    drift: &D,
    z: &[T],
) -> State<T> {
    let n = em.dim();
    assert_eq!(x.q.len(), n);
    let mut g = vec![T::zero(); n];
    drift.displacement_into(&x.q, &mut g);
    let d = em.delta;
    let sd = d.sqrt();
    let two = T::lit(2.0);
    let mut y = x.clone();
    for i in 0..n {
        let (q, p, gm) = (x.q[i], x.p[i], em.gamma[i]);
        y.q[i] = q + d * p;
        y.p[i] = p + d * (g[i] - gm * gm * q - two * gm * p) + sd * em.noise[i] * z[n + i];
    }
    y
}

/// Numerical scheme used for path simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    #[default]
    Strang,
    LieTrotter,
    EulerMaruyama,
}

#[allow(clippy::large_enum_variant)]
enum Engine<T> {
    Split(OuPrecompute<T>),
    Em(EulerMaruyama<T>),
}

/// Drives a scheme from `x0` for `n_steps`, calling `visit(i, state)` for
/// every state including the initial one.
///
/// Uses the same arithmetic as the single-step functions, so paths agree bit
/// for bit with iterating them on the same normals. The Strang scheme
/// reuses `G` from the end of one step at the start of the next, which is
/// valid because the second half shift leaves `Q` unchanged.
#[allow(clippy::too_many_arguments)]
pub fn integrate<T, D, R, F>(
    scheme: Scheme,
    diagonals: (&[T], &[T]),
    delta: T,
    drift: &D,
    x0: &State<T>,
    n_steps: usize,
    rng: &mut R,
    mut visit: F,
) -> Result<()>
where
    T: Real,
    D: Drift<T> + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, &State<T>),
{
    let (gamma, noise) = diagonals;
    let engine = match scheme {
        Scheme::EulerMaruyama => Engine::Em(EulerMaruyama::from_diagonals(gamma, noise, delta)?),
        _ => Engine::Split(OuPrecompute::from_diagonals(gamma, noise, delta)?),
    };
    integrate_with(scheme, &engine, drift, x0, n_steps, rng, &mut visit)
}

fn integrate_with<T, D, R, F>(
    scheme: Scheme,
    engine: &Engine<T>,
    drift: &D,
    x0: &State<T>,
    n_steps: usize,
    rng: &mut R,
    visit: &mut F,
) -> Result<()>
where
    T: Real,
    D: Drift<T> + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, &State<T>),
{
    let n = x0.q.len();
    if drift.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: drift.dim(),
        });
    }
    let mut x = x0.clone();
    let mut z = vec![T::zero(); 2 * n];
    let mut xi = vec![T::zero(); 2 * n];
    let mut g = vec![T::zero(); n];
    visit(0, &x);
    match (scheme, engine) {
        (Scheme::Strang, Engine::Split(pre)) => {
            let half = pre.delta / T::lit(2.0);
            drift.displacement_into(&x.q, &mut g);
            for step in 1..=n_steps {
                x.p.iter_mut().zip(&g).for_each(|(p, &gi)| *p += half * gi);
                z.iter_mut().for_each(|v| *v = T::standard_normal(rng));
                pre.correlate_into(&z, &mut xi);
                pre.flow(&mut x, &xi);
                drift.displacement_into(&x.q, &mut g);
                x.p.iter_mut().zip(&g).for_each(|(p, &gi)| *p += half * gi);
                if !x.is_finite() {
                    return Err(Error::NonFinite { step });
                }
                visit(step, &x);
            }
        }
        (Scheme::LieTrotter, Engine::Split(pre)) => {
            for step in 1..=n_steps {
                z.iter_mut().for_each(|v| *v = T::standard_normal(rng));
                x = lie_trotter_step(&x, pre, drift, &z);
                if !x.is_finite() {
                    return Err(Error::NonFinite { step });
                }
                visit(step, &x);
            }
        }
        (Scheme::EulerMaruyama, Engine::Em(em)) => {
            for step in 1..=n_steps {
                z.iter_mut().for_each(|v| *v = T::standard_normal(rng));
                x = euler_maruyama_step(&x, em, drift, &z);
                if !x.is_finite() {
                    return Err(Error::NonFinite { step });
                }
                visit(step, &x);
            }
        }
        _ => unreachable!("engine built for a different scheme"),
    }
    Ok(())
}

/// Number of steps of size `delta` in `t_end`, rejecting non-integral ratios.
pub fn step_count<T: Real>(t_end: T, delta: T) -> Result<usize> {
    if !(t_end > T::zero() && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {t_end}"
        )));
    }
    if !(delta > T::zero() && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {delta}"
        )));
    }
    let ratio = (t_end / delta).to_f64().expect("finite ratio");
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "{t_end} is not an integer multiple of {delta}"
        )));
    }
    Ok(n as usize)
}

/// Full Strang path of `T/Δ + 1` states with noise from `seed`.
pub fn simulate<T: Real>(
    m: &ModelParams<T>,
    t_end: T,
    delta: T,
    x0: &State<T>,
    seed: u64,
) -> Result<Vec<State<T>>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    simulate_with(Scheme::Strang, m, t_end, delta, x0, &mut rng)
}

pub fn simulate_with<T: Real, R: Rng + ?Sized>(
    scheme: Scheme,
    m: &ModelParams<T>,
    t_end: T,
    delta: T,
    x0: &State<T>,
    rng: &mut R,
) -> Result<Vec<State<T>>> {
    m.validate()?;
    check_initial(m, x0)?;
    let n_steps = step_count(t_end, delta)?;
    let drift = JrDrift::new(m);
    let mut path = Vec::with_capacity(n_steps + 1);
    integrate(
        scheme,
        (&m.damping_diag(), &m.noise_diag()),
        delta,
        &drift,
        x0,
        n_steps,
        rng,
        |_, x| path.push(x.clone()),
    )?;
    Ok(path)
}

fn check_initial<T: Real>(m: &ModelParams<T>, x0: &State<T>) -> Result<()> {
    if x0.q.len() != 3 * m.n() || x0.p.len() != 3 * m.n() {
        return Err(Error::DimensionMismatch {
            expected: 6 * m.n(),
            got: x0.q.len() + x0.p.len(),
        });
    }
    Ok(())
}

fn subsample_ratio<T: Real>(delta: T, obs_step: T) -> Result<usize> {
    step_count(obs_step, delta).map_err(|_| {
        Error::InvalidParameter(format!(
            "observation step {obs_step} is not a multiple of {delta}"
        ))
    })
}

/// Extracts `X2 - X3` per population at every `obs_step / delta`-th state.
pub fn observe_and_subsample<T: Real>(
    path: &[State<T>],
    delta: T,
    obs_step: T,
) -> Result<MultiSeries<T>> {
    let r = subsample_ratio(delta, obs_step)?;
    let n = path
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty path".into()))?
        .n_pops();
    let channels = (0..n)
        .map(|k| path.iter().step_by(r).map(|x| x.output(k)).collect())
        .collect();
    MultiSeries::with_default_labels(obs_step, channels)
}

/// Time grid and scheme for producing an observed series.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSettings<T> {
    /// Length of the recorded window (s).
    pub t_end: T,
    /// Integration step (s).
    pub step: T,
    /// Sampling step of the output (s), a multiple of `step`.
    pub obs_step: T,
    /// Extra simulated time before the recorded window, as a fraction of
    /// `t_end`, rounded to whole observation steps.
    pub burn_in: T,
    pub scheme: Scheme,
}

impl<T: Real> SimSettings<T> {
    pub fn new(t_end: T, step: T, obs_step: T) -> Self {
        Self {
            t_end,
            step,
            obs_step,
            burn_in: T::zero(),
            scheme: Scheme::Strang,
        }
    }
}

/// Simulates from `X0 = 0` and returns the subsampled output process
/// without storing the full path.
pub fn simulate_observed<T: Real, R: Rng + ?Sized>(
    m: &ModelParams<T>,
    s: &SimSettings<T>,
    rng: &mut R,
) -> Result<MultiSeries<T>> {
    m.validate()?;
    let n_steps = step_count(s.t_end, s.step)?;
    let r = subsample_ratio(s.step, s.obs_step)?;
    if !(s.burn_in >= T::zero() && s.burn_in.is_finite()) {
        return Err(Error::InvalidParameter(
            "burn-in fraction must be nonnegative".into(),
        ));
    }
    let burn_obs = (s.burn_in * T::from_usize_lossy(n_steps / r))
        .round()
        .to_usize()
        .unwrap_or(0);
    let burn = burn_obs * r;
    let n = m.n();
    let kept = n_steps / r + 1;
    let mut channels = vec![Vec::with_capacity(kept); n];
    let drift = JrDrift::new(m);
    integrate(
        s.scheme,
        (&m.damping_diag(), &m.noise_diag()),
        s.step,
        &drift,
        &State::zeros(n),
        burn + n_steps,
        rng,
        |i, x| {
            if i >= burn && (i - burn).is_multiple_of(r) {
                for (k, c) in channels.iter_mut().enumerate() {
                    c.push(x.output(k));
                }
            }
        },
    )?;
    MultiSeries::with_default_labels(s.obs_step, channels)
}
