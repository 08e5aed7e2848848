//! Parameterization of the coupled stochastic Jansen-Rit neural mass model.
//!
//! Populations are indexed from 0 in the API. Parameter names in layouts and
//! files use 1-based population numbers, matching how channels are labelled.

use crate::error::{Error, Result};
use crate::real::Real;

/// Physiological constants of one neural population.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationParams<T> {
    /// Average excitatory synaptic gain `A` (mV).
    pub a_gain: T,
    /// Average inhibitory synaptic gain `B` (mV).
    pub b_gain: T,
    /// Excitatory membrane rate `a` (1/s).
    pub a_rate: T,
    /// Inhibitory membrane rate `b` (1/s).
    pub b_rate: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    /// Maximum firing rate (1/s).
    pub nu_max: T,
    /// Potential at half-maximal firing (mV).
    pub v0: T,
    /// Sigmoid slope parameter (1/mV).
    pub gamma: T,
    /// Deterministic extrinsic input.
    pub mu: T,
    /// Noise intensity on the excitatory interneuron velocity.
    pub sigma: T,
    /// Weak noise intensity on the pyramidal and inhibitory velocities.
    pub eps: T,
}

impl<T: Real> Default for PopulationParams<T> {
    /// Standard Jansen-Rit constants with `mu = 90`, `sigma = 500`, `eps = 1`.
    fn default() -> Self {
        Self {
            a_gain: T::lit(3.25),
            b_gain: T::lit(22.0),
            a_rate: T::lit(100.0),
            b_rate: T::lit(50.0),
            c1: T::lit(135.0),
            c2: T::lit(0.8 * 135.0),
            c3: T::lit(0.25 * 135.0),
            c4: T::lit(0.25 * 135.0),
            nu_max: T::lit(5.0),
            v0: T::lit(6.0),
            gamma: T::lit(0.56),
            mu: T::lit(90.0),
            sigma: T::lit(500.0),
            eps: T::lit(1.0),
        }
    }
}

impl<T: Real> PopulationParams<T> {
    /// Sets `C1..C4` from the single connectivity constant `C`
    /// (`C1 = C`, `C2 = 0.8 C`, `C3 = C4 = 0.25 C`).
    pub fn with_connectivity(mut self, c: T) -> Self {
        self.c1 = c;
        self.c2 = T::lit(0.8) * c;
        self.c3 = T::lit(0.25) * c;
        self.c4 = T::lit(0.25) * c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("A", self.a_gain),
            ("B", self.b_gain),
            ("a", self.a_rate),
            ("b", self.b_rate),
            ("C1", self.c1),
            ("C2", self.c2),
            ("C3", self.c3),
            ("C4", self.c4),
            ("nu_max", self.nu_max),
            ("gamma", self.gamma),
            ("sigma", self.sigma),
            ("eps", self.eps),
        ];
        for (name, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("v0", self.v0), ("mu", self.mu)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Sigmoid transforming a mean membrane potential into a firing rate.
#[inline]
pub fn sigmoid<T: Real>(x: T, p: &PopulationParams<T>) -> T {
    p.nu_max / (T::one() + (p.gamma * (p.v0 - x)).exp())
}

/// How coupling strengths `K_jk` are derived from a few shared parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingStructure<T> {
    /// `K_jk = c^(|j-k|-1) L`.
    PowerDecay { l: T, c: T },
    /// `K_jk = L` for every pair.
    Uniform { l: T },
    /// Two hemispheres {1,2} and {3,4}: `L1` within, `L2` across. Requires N = 4.
    TwoLevel { l1: T, l2: T },
    /// Power decay with an extra unit of distance between hemispheres {1,2}
    /// and {3,4}. Requires N = 4.
    HemispherePower { l: T, c: T },
    /// Dense matrix, row `j` column `k`; the diagonal is ignored.
    Explicit(Vec<Vec<T>>),
}

// Exponent of c in the hemisphere structure, row j, column k.
const HEMISPHERE_EXPONENT: [[i32; 4]; 4] = [[0, 0, 2, 3], [0, 0, 1, 2], [2, 1, 0, 0], [3, 2, 0, 0]];

impl<T: Real> CouplingStructure<T> {
    /// Coupling strength from population `j` to population `k` (0-based).
    ///
    /// Panics when `j == k`.
    pub fn strength(&self, j: usize, k: usize) -> T {
        assert_ne!(j, k, "coupling strength is undefined on the diagonal");
        match self {
            Self::PowerDecay { l, c } => {
                let d = j.abs_diff(k) as i32 - 1;
                c.powi(d) * *l
            }
            Self::Uniform { l } => *l,
            Self::TwoLevel { l1, l2 } => {
                if (j < 2) == (k < 2) {
                    *l1
                } else {
                    *l2
                }
            }
            Self::HemispherePower { l, c } => c.powi(HEMISPHERE_EXPONENT[j][k]) * *l,
            Self::Explicit(k_mat) => k_mat[j][k],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "coupling {name} must be positive, got {v}"
                )))
            }
        };
        let decay = |c: T| {
            if c > T::zero() && c <= T::one() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "coupling c must lie in (0, 1], got {c}"
                )))
            }
        };
        match self {
            Self::PowerDecay { l, c } => {
                pos("L", *l)?;
                decay(*c)
            }
            Self::Uniform { l } => pos("L", *l),
            Self::TwoLevel { l1, l2 } => {
                if n != 4 && n > 1 {
                    return Err(Error::InvalidParameter(
                        "two-level coupling requires N = 4".into(),
                    ));
                }
                pos("L1", *l1)?;
                pos("L2", *l2)
            }
            Self::HemispherePower { l, c } => {
                if n != 4 && n > 1 {
                    return Err(Error::InvalidParameter(
                        "hemisphere coupling requires N = 4".into(),
                    ));
                }
                pos("L", *l)?;
                decay(*c)
            }
            Self::Explicit(k_mat) => {
                if k_mat.len() != n || k_mat.iter().any(|row| row.len() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: k_mat.len(),
                    });
                }
                for (j, row) in k_mat.iter().enumerate() {
                    for (k, &v) in row.iter().enumerate() {
                        if j != k {
                            pos(&format!("K[{}][{}]", j + 1, k + 1), v)?;
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Binary coupling directions: `rho(j, k) = true` means population `j`
/// drives population `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    rho: Vec<bool>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            rho: vec![false; n * n],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut a = Self::empty(n);
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    a.set(j, k, true);
                }
            }
        }
        a
    }

    /// Builds from 0-based directed edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(n);
        for &(j, k) in edges {
            if j >= n || k >= n || j == k {
                return Err(Error::InvalidParameter(format!(
                    "edge ({}, {}) is not an off-diagonal pair for N = {n}",
                    j + 1,
                    k + 1
                )));
            }
            a.set(j, k, true);
        }
        Ok(a)
    }

    /// Builds from a 0/1 matrix; the diagonal is ignored.
    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut a = Self::empty(n);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                if j == k {
                    continue;
                }
                match v {
                    0 => {}
                    1 => a.set(j, k, true),
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "adjacency entry ({}, {}) must be 0 or 1, got {v}",
                            j + 1,
                            k + 1
                        )))
                    }
                }
            }
        }
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> bool {
        j != k && self.rho[j * self.n + k]
    }

    pub fn set(&mut self, j: usize, k: usize, value: bool) {
        assert_ne!(j, k, "diagonal adjacency entries are unused");
        self.rho[j * self.n + k] = value;
    }

    /// Present edges in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.n {
            for k in 0..self.n {
                if self.get(j, k) {
                    out.push((j, k));
                }
            }
        }
        out
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|j| (0..self.n).map(|k| self.get(j, k) as u8).collect())
            .collect()
    }
}

/// All off-diagonal pairs `(j, k)` in row-major order.
pub fn off_diagonal_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for j in 0..n {
        for k in 0..n {
            if j != k {
                out.push((j, k));
            }
        }
    }
    out
}

/// Full parameterization of an N-population model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub pops: Vec<PopulationParams<T>>,
    pub coupling: CouplingStructure<T>,
    pub adjacency: Adjacency,
}

impl<T: Real> ModelParams<T> {
    /// `n` uncoupled populations with default constants.
    pub fn uncoupled(n: usize) -> Self {
        Self {
            pops: vec![PopulationParams::default(); n],
            coupling: CouplingStructure::Uniform { l: T::one() },
            adjacency: Adjacency::empty(n),
        }
    }

    pub fn single(pop: PopulationParams<T>) -> Self {
        Self {
            pops: vec![pop],
            coupling: CouplingStructure::Uniform { l: T::one() },
            adjacency: Adjacency::empty(1),
        }
    }

    pub fn n(&self) -> usize {
        self.pops.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "at least one population is required".into(),
            ));
        }
        for p in &self.pops {
            p.validate()?;
        }
        if n > 1 {
            if self.adjacency.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: self.adjacency.n(),
                });
            }
            self.coupling.validate(n)?;
        }
        Ok(())
    }

    /// Diagonal of the damping matrix: `(a_k, a_k, b_k)` per population.
    pub fn damping_diag(&self) -> Vec<T> {
        self.pops
            .iter()
            .flat_map(|p| [p.a_rate, p.a_rate, p.b_rate])
            .collect()
    }

    /// Diagonal of the diffusion matrix: `(eps_k, sigma_k, eps_k)` per population.
    pub fn noise_diag(&self) -> Vec<T> {
        self.pops
            .iter()
            .flat_map(|p| [p.eps, p.sigma, p.eps])
            .collect()
    }

    /// Active edges with their weight `K_jk`; empty for a single population.
    pub fn weighted_edges(&self) -> Vec<(usize, usize, T)> {
        if self.n() < 2 {
            return Vec::new();
        }
        self.adjacency
            .edges()
            .into_iter()
            .map(|(j, k)| (j, k, self.coupling.strength(j, k)))
            .collect()
    }
}

/// Anything that maps the displacement block `Q` to the velocity forcing.
pub trait Drift<T>: Sync {
    fn dim(&self) -> usize;

    /// Writes `G(q)` into `out`; both have length `3N`.
    fn displacement_into(&self, q: &[T], out: &mut [T]);
}

/// The Jansen-Rit displacement-and-coupling function, with the edge list
/// resolved once.
#[derive(Clone, Debug)]
pub struct JrDrift<T> {
    pops: Vec<PopulationParams<T>>,
    edges: Vec<(usize, usize, T)>,
}

impl<T: Real> JrDrift<T> {
    pub fn new(m: &ModelParams<T>) -> Self {
        Self {
            pops: m.pops.clone(),
            edges: m.weighted_edges(),
        }
    }
}

impl<T: Real> Drift<T> for JrDrift<T> {
    fn dim(&self) -> usize {
        3 * self.pops.len()
    }

    fn displacement_into(&self, q: &[T], out: &mut [T]) {
        for (k, p) in self.pops.iter().enumerate() {
            let (x1, x2, x3) = (q[3 * k], q[3 * k + 1], q[3 * k + 2]);
            let aa = p.a_gain * p.a_rate;
            out[3 * k] = aa * sigmoid(x2 - x3, p);
            out[3 * k + 1] = p.mu + p.c2 * sigmoid(p.c1 * x1, p);
            out[3 * k + 2] = p.b_gain * p.b_rate * p.c4 * sigmoid(p.c3 * x1, p);
        }
        for &(j, k, w) in &self.edges {
            out[3 * k + 1] += w * q[3 * j];
        }
        for (k, p) in self.pops.iter().enumerate() {
            out[3 * k + 1] *= p.a_gain * p.a_rate;
        }
    }
}

/// Drift with `G = 0`, leaving the damped linear part alone.
#[derive(Clone, Copy, Debug)]
pub struct ZeroDrift {
    pub dim: usize,
}

impl<T: Real> Drift<T> for ZeroDrift {
    fn dim(&self) -> usize {
        self.dim
    }

    fn displacement_into(&self, _q: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
    }
}

/// Evaluates `G(Q)` for the given model.
pub fn displacement<T: Real>(q: &[T], m: &ModelParams<T>) -> Result<Vec<T>> {
    let dim = 3 * m.n();
    if q.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: q.len(),
        });
    }
    let mut out = vec![T::zero(); dim];
    JrDrift::new(m).displacement_into(q, &mut out);
    Ok(out)
}

/// Addressable continuous parameter for inference.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    /// Excitatory gain `A` of one population or a tied group.
    Gain(Vec<usize>),
    /// Deterministic input `mu`.
    Input(Vec<usize>),
    /// Input noise `sigma`.
    Noise(Vec<usize>),
    /// Coupling `L`.
    Strength,
    /// Coupling decay `c`.
    Decay,
    /// Within-hemisphere strength `L1`.
    WithinStrength,
    /// Across-hemisphere strength `L2`.
    AcrossStrength,
}

impl Target {
    /// Column name, e.g. `A_1`, `sigma_1+2`, `L`.
    pub fn name(&self) -> String {
        let group = |pops: &[usize]| {
            pops.iter()
                .map(|p| (p + 1).to_string())
                .collect::<Vec<_>>()
                .join("+")
        };
        match self {
            Self::Gain(p) => format!("A_{}", group(p)),
            Self::Input(p) => format!("mu_{}", group(p)),
            Self::Noise(p) => format!("sigma_{}", group(p)),
            Self::Strength => "L".into(),
            Self::Decay => "c".into(),
            Self::WithinStrength => "L1".into(),
            Self::AcrossStrength => "L2".into(),
        }
    }

    fn pops(&self) -> Option<&[usize]> {
        match self {
            Self::Gain(p) | Self::Input(p) | Self::Noise(p) => Some(p),
            _ => None,
        }
    }

    fn same_kind(&self, other: &Self) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

/// Maps the flat inference vectors onto model parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThetaLayout {
    pub continuous: Vec<Target>,
    /// 0-based `(j, k)` adjacency positions.
    pub binary: Vec<(usize, usize)>,
}

impl ThetaLayout {
    pub fn new(continuous: Vec<Target>, binary: Vec<(usize, usize)>) -> Self {
        Self { continuous, binary }
    }

    pub fn continuous_names(&self) -> Vec<String> {
        self.continuous.iter().map(Target::name).collect()
    }

    pub fn binary_names(&self) -> Vec<String> {
        self.binary
            .iter()
            .map(|(j, k)| format!("rho_{}_{}", j + 1, k + 1))
            .collect()
    }

    /// Checks slot distinctness and compatibility with `base`.
    pub fn validate<T: Real>(&self, base: &ModelParams<T>) -> Result<()> {
        let n = base.n();
        for (i, t) in self.continuous.iter().enumerate() {
            if let Some(pops) = t.pops() {
                if pops.is_empty() {
                    return Err(Error::InvalidParameter(format!(
                        "slot {} targets no population",
                        t.name()
                    )));
                }
                if let Some(&bad) = pops.iter().find(|&&p| p >= n) {
                    return Err(Error::InvalidParameter(format!(
                        "slot {} references population {} but N = {n}",
                        t.name(),
                        bad + 1
                    )));
                }
            }
            for other in &self.continuous[..i] {
                let clash = match (t.pops(), other.pops()) {
                    (Some(a), Some(b)) => t.same_kind(other) && a.iter().any(|p| b.contains(p)),
                    _ => t == other,
                };
                if clash {
                    return Err(Error::InvalidParameter(format!(
                        "slots {} and {} overlap",
                        other.name(),
                        t.name()
                    )));
                }
            }
            let fits = matches!(
                (t, &base.coupling),
                (Target::Strength, CouplingStructure::PowerDecay { .. })
                    | (Target::Strength, CouplingStructure::Uniform { .. })
                    | (Target::Strength, CouplingStructure::HemispherePower { .. })
                    | (Target::Decay, CouplingStructure::PowerDecay { .. })
                    | (Target::Decay, CouplingStructure::HemispherePower { .. })
                    | (Target::WithinStrength, CouplingStructure::TwoLevel { .. })
                    | (Target::AcrossStrength, CouplingStructure::TwoLevel { .. })
                    | (Target::Gain(_) | Target::Input(_) | Target::Noise(_), _)
            );
            if !fits {
                return Err(Error::InvalidParameter(format!(
                    "slot {} does not exist in the configured coupling structure",
                    t.name()
                )));
            }
        }
        for (i, &(j, k)) in self.binary.iter().enumerate() {
            if j >= n || k >= n || j == k {
                return Err(Error::InvalidParameter(format!(
                    "binary slot ({}, {}) is not an off-diagonal pair",
                    j + 1,
                    k + 1
                )));
            }
            if self.binary[..i].contains(&(j, k)) {
                return Err(Error::InvalidParameter(format!(
                    "binary slot ({}, {}) repeated",
                    j + 1,
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Returns a copy of `base` with every slot of `layout` overwritten.
pub fn apply_theta<T: Real>(
    layout: &ThetaLayout,
    theta_c: &[T],
    theta_b: &[bool],
    base: &ModelParams<T>,
) -> Result<ModelParams<T>> {
    if theta_c.len() != layout.continuous.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.continuous.len(),
            got: theta_c.len(),
        });
    }
    if theta_b.len() != layout.binary.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.binary.len(),
            got: theta_b.len(),
        });
    }
    let mut m = base.clone();
    for (target, &v) in layout.continuous.iter().zip(theta_c) {
        match target {
            Target::Gain(pops) => pops.iter().for_each(|&p| m.pops[p].a_gain = v),
            Target::Input(pops) => pops.iter().for_each(|&p| m.pops[p].mu = v),
            Target::Noise(pops) => pops.iter().for_each(|&p| m.pops[p].sigma = v),
            Target::Strength => match &mut m.coupling {
                CouplingStructure::PowerDecay { l, .. }
                | CouplingStructure::Uniform { l }
                | CouplingStructure::HemispherePower { l, .. } => *l = v,
                _ => return Err(missing_slot(target)),
            },
            Target::Decay => match &mut m.coupling {
                CouplingStructure::PowerDecay { c, .. }
                | CouplingStructure::HemispherePower { c, .. } => *c = v,
                _ => return Err(missing_slot(target)),
            },
            Target::WithinStrength => match &mut m.coupling {
                CouplingStructure::TwoLevel { l1, .. } => *l1 = v,
                _ => return Err(missing_slot(target)),
            },
            Target::AcrossStrength => match &mut m.coupling {
                CouplingStructure::TwoLevel { l2, .. } => *l2 = v,
                _ => return Err(missing_slot(target)),
            },
        }
    }
    for (&(j, k), &b) in layout.binary.iter().zip(theta_b) {
        m.adjacency.set(j, k, b);
    }
    Ok(m)
}

fn missing_slot(t: &Target) -> Error {
    Error::InvalidParameter(format!(
        "slot {} does not exist in the configured coupling structure",
        t.name()
    ))
}

/// Reads the slot values of `layout` back out of `m`. Tied groups report the
/// value of their first population.
pub fn read_theta<T: Real>(
    layout: &ThetaLayout,
    m: &ModelParams<T>,
) -> Result<(Vec<T>, Vec<bool>)> {
    let mut theta_c = Vec::with_capacity(layout.continuous.len());
    for target in &layout.continuous {
        let v = match (target, &m.coupling) {
            (Target::Gain(p), _) => m.pops[p[0]].a_gain,
            (Target::Input(p), _) => m.pops[p[0]].mu,
            (Target::Noise(p), _) => m.pops[p[0]].sigma,
            (Target::Strength, CouplingStructure::PowerDecay { l, .. })
            | (Target::Strength, CouplingStructure::Uniform { l })
            | (Target::Strength, CouplingStructure::HemispherePower { l, .. }) => *l,
            (Target::Decay, CouplingStructure::PowerDecay { c, .. })
            | (Target::Decay, CouplingStructure::HemispherePower { c, .. }) => *c,
            (Target::WithinStrength, CouplingStructure::TwoLevel { l1, .. }) => *l1,
            (Target::AcrossStrength, CouplingStructure::TwoLevel { l2, .. }) => *l2,
            _ => return Err(missing_slot(target)),
        };
        theta_c.push(v);
    }
    let theta_b = layout
        .binary
        .iter()
        .map(|&(j, k)| m.adjacency.get(j, k))
        .collect();
    Ok((theta_c, theta_b))
}
