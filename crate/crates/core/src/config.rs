//! TOML run configuration.
//!
//! Every section is optional and every key has a default; unknown keys are
//! rejected. Populations are numbered from 1.
//!
//! ```toml
//! [model]
//! n = 4
//! edges = [[1, 2], [2, 3], [3, 4]]
//! coupling = { kind = "uniform", l = 700.0 }
//! overrides = [{ pop = 1, a_gain = 3.6 }]
//!
//! [simulation]
//! t_end = 20.0
//! step = 1e-4
//! obs_step = 2e-3
//!
//! [infer]
//! continuous = [
//!   { target = "A", pops = [1], lo = 2.0, hi = 4.0 },
//!   { target = "L", lo = 100.0, hi = 2000.0 },
//! ]
//! binary = "all"
//!
//! [io]
//! observed = "obs.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{AbcSettings, KernelKind, PriorSpec};
use crate::integrator::{Scheme, SimSettings};
use crate::model::{
    off_diagonal_pairs, Adjacency, CouplingStructure, ModelParams, PopulationParams, Target,
    ThetaLayout,
};
use crate::summaries::SummaryConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub simulation: SimulationSection,
    pub summary: SummarySection,
    pub abc: AbcSection,
    pub infer: InferSection,
    pub io: IoSection,
}

/// Partial population constants; missing keys keep their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationPatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_rate: Option<f64>,
    /// Sets `C1..C4` from one connectivity constant before the individual
    /// keys below are applied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl PopulationPatch {
    pub fn apply(&self, p: &mut PopulationParams<f64>) {
        if let Some(c) = self.connectivity {
            *p = p.clone().with_connectivity(c);
        }
        let fields = [
            (self.a_gain, &mut p.a_gain),
            (self.b_gain, &mut p.b_gain),
            (self.a_rate, &mut p.a_rate),
            (self.b_rate, &mut p.b_rate),
            (self.c1, &mut p.c1),
            (self.c2, &mut p.c2),
            (self.c3, &mut p.c3),
            (self.c4, &mut p.c4),
            (self.nu_max, &mut p.nu_max),
            (self.v0, &mut p.v0),
            (self.gamma, &mut p.gamma),
            (self.mu, &mut p.mu),
            (self.sigma, &mut p.sigma),
            (self.eps, &mut p.eps),
        ];
        for (v, slot) in fields {
            if let Some(v) = v {
                *slot = v;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationOverride {
    /// 1-based population number.
    pub pop: usize,
    #[serde(flatten)]
    pub values: PopulationPatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSection {
    PowerDecay { l: f64, c: f64 },
    Uniform { l: f64 },
    TwoLevel { l1: f64, l2: f64 },
    HemispherePower { l: f64, c: f64 },
    Explicit { matrix: Vec<Vec<f64>> },
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self::PowerDecay { l: 700.0, c: 0.8 }
    }
}

impl CouplingSection {
    pub fn build(&self) -> CouplingStructure<f64> {
        match self.clone() {
            Self::PowerDecay { l, c } => CouplingStructure::PowerDecay { l, c },
            Self::Uniform { l } => CouplingStructure::Uniform { l },
            Self::TwoLevel { l1, l2 } => CouplingStructure::TwoLevel { l1, l2 },
            Self::HemispherePower { l, c } => CouplingStructure::HemispherePower { l, c },
            Self::Explicit { matrix } => CouplingStructure::Explicit(matrix),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub n: usize,
    /// Constants shared by every population.
    pub population: PopulationPatch,
    /// Per-population exceptions, applied after `population`.
    pub overrides: Vec<PopulationOverride>,
    pub coupling: CouplingSection,
    /// Directed edges `[j, k]` with `rho_jk = 1`, 1-based.
    pub edges: Vec<[usize; 2]>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            n: 1,
            population: PopulationPatch::default(),
            overrides: Vec::new(),
            coupling: CouplingSection::default(),
            edges: Vec::new(),
        }
    }
}

impl ModelSection {
    pub fn build(&self) -> Result<ModelParams<f64>> {
        if self.n == 0 {
            return Err(Error::Config("model.n must be at least 1".into()));
        }
        let mut shared = PopulationParams::default();
        self.population.apply(&mut shared);
        let mut pops = vec![shared; self.n];
        for o in &self.overrides {
            if o.pop == 0 || o.pop > self.n {
                return Err(Error::Config(format!(
                    "model.overrides: population {} out of range",
                    o.pop
                )));
            }
            o.values.apply(&mut pops[o.pop - 1]);
        }
        let edges = one_based_pairs(&self.edges, self.n, "model.edges")?;
        let m = ModelParams {
            pops,
            coupling: self.coupling.build(),
            adjacency: Adjacency::from_edges(self.n, &edges)
                .map_err(|e| Error::Config(e.to_string()))?,
        };
        m.validate()
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(m)
    }
}

fn one_based_pairs(pairs: &[[usize; 2]], n: usize, key: &str) -> Result<Vec<(usize, usize)>> {
    pairs
        .iter()
        .map(|&[j, k]| {
            if j == 0 || k == 0 || j > n || k > n || j == k {
                Err(Error::Config(format!(
                    "{key}: [{j}, {k}] is not an off-diagonal pair for N = {n}"
                )))
            } else {
                Ok((j - 1, k - 1))
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    #[default]
    Strang,
    LieTrotter,
    EulerMaruyama,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Strang => Scheme::Strang,
            SchemeName::LieTrotter => Scheme::LieTrotter,
            SchemeName::EulerMaruyama => Scheme::EulerMaruyama,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    /// Recorded window (s).
    pub t_end: f64,
    /// Integration step (s).
    pub step: f64,
    /// Output sampling step (s).
    pub obs_step: f64,
    /// Extra simulated time before the window, as a fraction of `t_end`.
    pub burn_in: f64,
    pub scheme: SchemeName,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            t_end: 20.0,
            step: 1e-4,
            obs_step: 2e-3,
            burn_in: 0.0,
            scheme: SchemeName::Strang,
            seed: 0,
        }
    }
}

impl SimulationSection {
    pub fn build(&self) -> SimSettings<f64> {
        let mut s = SimSettings::new(self.t_end, self.step, self.obs_step);
        s.burn_in = self.burn_in;
        s.scheme = self.scheme.into();
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SummarySection {
    pub density_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_halfwidth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag_max: Option<usize>,
}

impl Default for SummarySection {
    fn default() -> Self {
        let d = SummaryConfig::default();
        Self {
            density_points: d.density_points,
            spectrum_halfwidth: d.spectrum_halfwidth,
            lag_max: d.lag_max,
        }
    }
}

impl SummarySection {
    pub fn build(&self) -> Result<SummaryConfig> {
        if self.density_points < 2 {
            return Err(Error::Config(
                "summary.density_points must be at least 2".into(),
            ));
        }
        Ok(SummaryConfig {
            density_points: self.density_points,
            spectrum_halfwidth: self.spectrum_halfwidth,
            lag_max: self.lag_max,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    #[default]
    Bernoulli,
    Flip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbcSection {
    pub m: usize,
    pub n_pilot: usize,
    pub q_stay: f64,
    pub budget: u64,
    pub stop_rate: f64,
    pub kernel: KernelName,
    pub workers: usize,
    pub seed: u64,
    /// Fixed first threshold instead of a pilot run; `inf` accepts the first
    /// `m` prior draws.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    /// Integration step for simulated datasets; defaults to the sampling
    /// step of the observed data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim_step: Option<f64>,
    /// Posterior predictive simulations for `ppcheck`.
    pub predictive_draws: usize,
}

impl Default for AbcSection {
    fn default() -> Self {
        let d = AbcSettings::<f64>::default();
        Self {
            m: d.m,
            n_pilot: d.n_pilot,
            q_stay: d.q_stay,
            budget: d.budget,
            stop_rate: d.stop_rate,
            kernel: KernelName::Bernoulli,
            workers: d.workers,
            seed: d.seed,
            delta1: None,
            max_iterations: None,
            sim_step: None,
            predictive_draws: 100,
        }
    }
}

impl AbcSection {
    pub fn build(&self) -> Result<AbcSettings<f64>> {
        let s = AbcSettings {
            m: self.m,
            n_pilot: self.n_pilot,
            q_stay: self.q_stay,
            budget: self.budget,
            stop_rate: self.stop_rate,
            kernel: match self.kernel {
                KernelName::Bernoulli => KernelKind::Bernoulli,
                KernelName::Flip => KernelKind::Flip,
            },
            workers: self.workers,
            seed: self.seed,
            delta1: self.delta1,
            max_iterations: self.max_iterations,
        };
        s.validate()
            .map_err(|e| Error::Config(format!("abc: {e}")))?;
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetName {
    A,
    #[serde(rename = "mu")]
    Mu,
    #[serde(rename = "sigma")]
    Sigma,
    L,
    #[serde(rename = "c")]
    C,
    L1,
    L2,
}

/// One continuous parameter with its uniform prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousSlot {
    pub target: TargetName,
    /// 1-based populations sharing this value; only for `A`, `mu`, `sigma`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pops: Vec<usize>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinarySlots {
    /// `"all"` for every off-diagonal pair in row-major order, `"none"` for
    /// no binary parameters.
    Preset(String),
    List(Vec<[usize; 2]>),
}

impl Default for BinarySlots {
    fn default() -> Self {
        Self::Preset("none".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferSection {
    pub continuous: Vec<ContinuousSlot>,
    pub binary: BinarySlots,
    /// Prior success probability of every binary slot.
    pub p: f64,
}

impl Default for InferSection {
    fn default() -> Self {
        Self {
            continuous: Vec::new(),
            binary: BinarySlots::default(),
            p: 0.5,
        }
    }
}

impl InferSection {
    pub fn build(&self, base: &ModelParams<f64>) -> Result<(ThetaLayout, PriorSpec<f64>)> {
        let n = base.n();
        let mut targets = Vec::with_capacity(self.continuous.len());
        let mut bounds = Vec::with_capacity(self.continuous.len());
        for s in &self.continuous {
            let grouped = matches!(s.target, TargetName::A | TargetName::Mu | TargetName::Sigma);
            if grouped && s.pops.is_empty() {
                return Err(Error::Config(format!(
                    "infer.continuous: {:?} needs pops",
                    s.target
                )));
            }
            if !grouped && !s.pops.is_empty() {
                return Err(Error::Config(format!(
                    "infer.continuous: {:?} takes no pops",
                    s.target
                )));
            }
            if let Some(&bad) = s.pops.iter().find(|&&p| p == 0 || p > n) {
                return Err(Error::Config(format!(
                    "infer.continuous: population {bad} out of range"
                )));
            }
            let pops: Vec<usize> = s.pops.iter().map(|p| p - 1).collect();
            targets.push(match s.target {
                TargetName::A => Target::Gain(pops),
                TargetName::Mu => Target::Input(pops),
                TargetName::Sigma => Target::Noise(pops),
                TargetName::L => Target::Strength,
                TargetName::C => Target::Decay,
                TargetName::L1 => Target::WithinStrength,
                TargetName::L2 => Target::AcrossStrength,
            });
            bounds.push((s.lo, s.hi));
        }
        let binary = match &self.binary {
            BinarySlots::Preset(p) if p == "all" => {
                if n > 1 {
                    off_diagonal_pairs(n)
                } else {
                    Vec::new()
                }
            }
            BinarySlots::Preset(p) if p == "none" => Vec::new(),
            BinarySlots::Preset(p) => {
                return Err(Error::Config(format!(
                    "infer.binary: expected \"all\", \"none\" or a list, got {p:?}"
                )))
            }
            BinarySlots::List(l) => one_based_pairs(l, n, "infer.binary")?,
        };
        let layout = ThetaLayout::new(targets, binary);
        layout
            .validate(base)
            .map_err(|e| Error::Config(format!("infer: {e}")))?;
        let prior = PriorSpec {
            bounds,
            p: vec![self.p; layout.binary.len()],
        };
        prior
            .validate()
            .map_err(|e| Error::Config(format!("infer: {e}")))?;
        Ok((layout, prior))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    /// Observed series CSV for `summarize`, `infer` and `ppcheck`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<PathBuf>,
    /// Factor applied to every observed value.
    pub scale: f64,
    /// Sampling step of the observed data; read from the time column when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Output directory.
    pub out_dir: PathBuf,
    /// True adjacency for `score`, as a 0/1 matrix CSV. Defaults to
    /// `model.edges`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Estimate for `score`: a generation CSV or a 0/1 matrix CSV. Defaults
    /// to the last generation of the run in `out_dir`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<PathBuf>,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            observed: None,
            scale: 1.0,
            dt: None,
            out_dir: PathBuf::from("out"),
            truth: None,
            estimate: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Reads a config file. Relative paths in `[io]` are resolved against
    /// the directory of the file and stored as absolute paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let base = std::path::absolute(dir)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.io.observed.as_mut().map(resolve);
        cfg.io.truth.as_mut().map(resolve);
        cfg.io.estimate.as_mut().map(resolve);
        resolve(&mut cfg.io.out_dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
