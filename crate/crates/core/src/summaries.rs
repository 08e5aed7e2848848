//! Summary curves of a multichannel series and the weighted IAE distance.
//!
//! Each channel contributes a kernel density estimate and a smoothed
//! periodogram; each ordered channel pair contributes a cross-correlation
//! curve. Two summary sets are compared by integrated absolute error.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::MultiSeries;
use crate::model::off_diagonal_pairs;
use crate::real::Real;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Density,
    Spectrum,
    Ccf,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Density => "density",
            Self::Spectrum => "spectrum",
            Self::Ccf => "ccf",
        }
    }
}

/// Ordinates on a uniform, strictly increasing grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve<T> {
    pub kind: CurveKind,
    pub grid: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> Curve<T> {
    pub fn new(kind: CurveKind, grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "curve needs at least two points and matching lengths, got {} and {}",
                grid.len(),
                values.len()
            )));
        }
        let h = grid[1] - grid[0];
        if !(h > T::zero()) {
            return Err(Error::InvalidParameter(
                "curve grid must be strictly increasing".into(),
            ));
        }
        let scale = grid[0].abs().max(grid[grid.len() - 1].abs());
        let tol = T::lit(1e-12) * h + T::lit(4.0) * T::epsilon() * scale;
        if grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > tol) {
            return Err(Error::InvalidParameter("curve grid must be uniform".into()));
        }
        Ok(Self { kind, grid, values })
    }

    fn uniform(kind: CurveKind, start: T, step: T, values: Vec<T>) -> Self {
        let grid = (0..values.len())
            .map(|i| start + T::from_usize_lossy(i) * step)
            .collect();
        Self { kind, grid, values }
    }

    pub fn step(&self) -> T {
        self.grid[1] - self.grid[0]
    }

    /// Rectangular-rule integral of the curve.
    pub fn area(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.step()
    }

    /// Rectangular-rule integral of the absolute value.
    pub fn abs_area(&self) -> T {
        self.values.iter().map(|v| v.abs()).sum::<T>() * self.step()
    }

    /// Linear interpolation, zero outside the grid.
    pub fn interpolate(&self, x: T) -> T {
        let (first, last) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if x < first || x > last {
            return T::zero();
        }
        let pos = ((x - first) / self.step()).to_f64().unwrap_or(0.0);
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let frac = T::lit(pos - i as f64).max(T::zero()).min(T::one());
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// This curve resampled onto `grid`, zero outside its support.
    pub fn resample(&self, grid: &[T]) -> Self {
        Self {
            kind: self.kind,
            grid: grid.to_vec(),
            values: grid.iter().map(|&x| self.interpolate(x)).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["grid", "value"])?;
        for (g, v) in self.grid.iter().zip(&self.values) {
            out.write_record([g.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_finite<T: Real>(x: &[T]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::DegenerateData(
            "series contains non-finite values".into(),
        ))
    }
}

/// Normal-reference bandwidth `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn bandwidth<T: Real>(x: &[T]) -> Result<T> {
    if x.len() < 2 {
        return Err(Error::DegenerateData(
            "density needs at least two samples".into(),
        ));
    }
    check_finite(x)?;
    let sd = stats::sample_sd(x);
    if !(sd > T::zero()) {
        return Err(Error::DegenerateData(
            "zero sample variance, bandwidth undefined".into(),
        ));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let spread = if iqr > T::zero() {
        sd.min(iqr / T::lit(1.34))
    } else {
        sd
    };
    Ok(T::lit(0.9) * spread * T::from_usize_lossy(x.len()).powf(T::lit(-0.2)))
}

/// Gaussian kernel density estimate on `grid_points` points spanning
/// `[min - 3h, max + 3h]`, computed by linear binning onto the grid followed
/// by a direct discrete convolution.
pub fn estimate_density<T: Real>(x: &[T], grid_points: usize) -> Result<Curve<T>> {
    if grid_points < 2 {
        return Err(Error::InvalidParameter(
            "density grid needs at least two points".into(),
        ));
    }
    let h = bandwidth(x)?;
    let lo = x.iter().copied().fold(T::infinity(), T::min) - T::lit(3.0) * h;
    let hi = x.iter().copied().fold(T::neg_infinity(), T::max) + T::lit(3.0) * h;
    let g = grid_points;
    let step = (hi - lo) / T::from_usize_lossy(g - 1);
    let w = T::one() / T::from_usize_lossy(x.len());
    let mut bins = vec![T::zero(); g];
    for &v in x {
        let pos = ((v - lo) / step).to_f64().expect("finite");
        let i = (pos.floor() as usize).min(g - 2);
        let frac = T::lit(pos - i as f64);
        bins[i] += w * (T::one() - frac);
        bins[i + 1] += w * frac;
    }
    let norm = T::one() / (h * (T::lit(2.0) * T::PI()).sqrt());
    let kernel: Vec<T> = (0..g)
        .map(|d| {
            let u = T::from_usize_lossy(d) * step / h;
            norm * (-T::lit(0.5) * u * u).exp()
        })
        .collect();
    let mut values = vec![T::zero(); g];
    for (j, out) in values.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (i, &b) in bins.iter().enumerate() {
            if b != T::zero() {
                acc += b * kernel[i.abs_diff(j)];
            }
        }
        *out = acc;
    }
    Ok(Curve::uniform(CurveKind::Density, lo, step, values))
}

/// Default smoother half-width `ceil(sqrt(m))` for `m` sampling intervals.
pub fn default_halfwidth(len: usize) -> usize {
    ((len.saturating_sub(1)) as f64).sqrt().ceil().max(1.0) as usize
}

/// Default maximum lag `ceil(10 log10(m))` for `m` sampling intervals.
pub fn default_lag_max(len: usize) -> usize {
    (10.0 * (len.saturating_sub(1).max(1) as f64).log10())
        .ceil()
        .max(1.0) as usize
}

const TAPER: f64 = 0.1;

thread_local! {
    static FFT_PLANS: RefCell<HashMap<(TypeId, usize), Box<dyn Any>>> = RefCell::new(HashMap::new());
}

/// Forward FFT of length `n`, planned once per thread.
fn forward_fft<T: Real>(n: usize) -> Arc<dyn Fft<T>> {
    FFT_PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry((TypeId::of::<T>(), n))
            .or_insert_with(|| Box::new(FftPlanner::<T>::new().plan_fft_forward(n)))
            .downcast_ref::<Arc<dyn Fft<T>>>()
            .expect("plan stored under its scalar type")
            .clone()
    })
}

/// Raw one-sided periodogram over all `n` Fourier indices of the demeaned,
/// split-cosine-bell tapered series. Index `k` has frequency `k / (n dt)`.
fn raw_periodogram<T: Real>(x: &[T], dt: T) -> Vec<T> {
    let n = x.len();
    let mean = stats::mean(x);
    let mut buf: Vec<Complex<T>> = x
        .iter()
        .map(|&v| Complex::new(v - mean, T::zero()))
        .collect();
    let m = (n as f64 * TAPER).floor() as usize;
    for i in 0..m {
        let w = T::lit(
            0.5 * (1.0 - (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * m) as f64).cos()),
        );
        buf[i].re *= w;
        buf[n - 1 - i].re *= w;
    }
    forward_fft::<T>(n).process(&mut buf);
    let u2 = T::lit(1.0 - 5.0 / 8.0 * TAPER * 2.0);
    let scale = T::lit(2.0) * dt / (T::from_usize_lossy(n) * u2);
    buf.iter().map(|c| c.norm_sqr() * scale).collect()
}

/// Smoothed periodogram on the Fourier frequencies `k / (n dt)`,
/// `k = 1..=n/2`.
///
/// The series is demeaned and tapered (10% split cosine bell). The zero
/// frequency ordinate is replaced by the mean of its two neighbours and the
/// periodogram is smoothed circularly with a modified Daniell kernel of the
/// given half-width. Normalized one-sided: summing over the returned grid
/// times the frequency spacing approximates the variance.
pub fn estimate_spectrum<T: Real>(x: &[T], dt: T, halfwidth: usize) -> Result<Curve<T>> {
    if x.len() < 16 {
        return Err(Error::DegenerateData(
            "spectrum needs at least 16 samples".into(),
        ));
    }
    check_finite(x)?;
    let n = x.len();
    let mut pgram = raw_periodogram(x, dt);
    pgram[0] = (pgram[1] + pgram[n - 1]) / T::lit(2.0);
    let nf = n / 2;
    let values = if halfwidth == 0 {
        pgram[1..=nf].to_vec()
    } else {
        daniell_smooth(&pgram, halfwidth, 1..nf + 1)
    };
    let df = T::one() / (T::from_usize_lossy(n) * dt);
    Ok(Curve::uniform(CurveKind::Spectrum, df, df, values))
}

/// Unsmoothed periodogram ordinates on the same grid as [`estimate_spectrum`].
pub fn raw_spectrum<T: Real>(x: &[T], dt: T) -> Result<Curve<T>> {
    estimate_spectrum(x, dt, 0)
}

/// Circular modified Daniell smoothing evaluated at the indices in `range`.
fn daniell_smooth<T: Real>(p: &[T], h: usize, range: std::ops::Range<usize>) -> Vec<T> {
    let n = p.len();
    // p[(i - h) mod n] sits at padded[i].
    let padded: Vec<T> = (0..n + 2 * h)
        .map(|i| p[(i + n * (h / n + 1) - h) % n])
        .collect();
    let inner = T::one() / T::from_usize_lossy(2 * h);
    let edge = T::one() / T::from_usize_lossy(4 * h);
    range
        .map(|k| {
            let mut s = T::zero();
            for &v in &padded[k + 1..k + 2 * h] {
                s += v;
            }
            s * inner + (padded[k] + padded[k + 2 * h]) * edge
        })
        .collect()
}

/// Dot product with four interleaved partial sums. Symmetric in its
/// arguments bit for bit.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Sample cross-correlation `(1/n) Σ (x_t - x̄)(y_{t+τ} - ȳ) / (s_x s_y)` for
/// `τ = -lag_max..=lag_max`, with biased standard deviations. The grid is in
/// seconds. A positive lag means `y` lags `x`.
///
/// `estimate_ccf(x, y)` at `τ` equals `estimate_ccf(y, x)` at `-τ` exactly.
pub fn estimate_ccf<T: Real>(x: &[T], y: &[T], lag_max: usize, dt: T) -> Result<Curve<T>> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 2 || lag_max >= n {
        return Err(Error::InvalidParameter(format!(
            "lag_max {lag_max} needs a longer series than {n}"
        )));
    }
    check_finite(x)?;
    check_finite(y)?;
    let center = |v: &[T]| {
        let m = stats::mean(v);
        v.iter().map(|&a| a - m).collect::<Vec<_>>()
    };
    let (xc, yc) = (center(x), center(y));
    let nn = T::from_usize_lossy(n);
    let sx = (xc.iter().map(|&a| a * a).sum::<T>() / nn).sqrt();
    let sy = (yc.iter().map(|&a| a * a).sum::<T>() / nn).sqrt();
    if !(sx > T::zero() && sy > T::zero()) {
        return Err(Error::DegenerateData(
            "zero variance channel in cross-correlation".into(),
        ));
    }
    let denom = nn * (sx * sy);
    let mut values = Vec::with_capacity(2 * lag_max + 1);
    for lag in -(lag_max as isize)..=(lag_max as isize) {
        let l = lag.unsigned_abs();
        let acc = if lag >= 0 {
            dot(&xc[..n - l], &yc[l..])
        } else {
            dot(&xc[l..], &yc[..n - l])
        };
        values.push(acc / denom);
    }
    let grid = (-(lag_max as isize)..=(lag_max as isize))
        .map(|l| T::lit(l as f64) * dt)
        .collect();
    Ok(Curve {
        kind: CurveKind::Ccf,
        grid,
        values,
    })
}

/// Grid sizes and smoothing spans. `None` picks the length-based defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryConfig {
    pub density_points: usize,
    pub spectrum_halfwidth: Option<usize>,
    pub lag_max: Option<usize>,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            density_points: 512,
            spectrum_halfwidth: None,
            lag_max: None,
        }
    }
}

/// Per-channel densities and spectra plus cross-correlations for every
/// ordered pair `(j, k)`, `j != k`, in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct SummarySet<T> {
    pub densities: Vec<Curve<T>>,
    pub spectra: Vec<Curve<T>>,
    pub ccfs: Vec<Curve<T>>,
    pub pairs: Vec<(usize, usize)>,
}

impl<T: Real> SummarySet<T> {
    pub fn n_channels(&self) -> usize {
        self.densities.len()
    }

    /// Cross-correlation curve of the ordered pair `(j, k)`.
    pub fn ccf(&self, j: usize, k: usize) -> Option<&Curve<T>> {
        self.pairs
            .iter()
            .position(|&p| p == (j, k))
            .map(|i| &self.ccfs[i])
    }

    /// Writes one CSV per curve plus `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>, labels: &[String]) -> Result<()> {
        #[derive(Serialize)]
        struct Entry {
            file: String,
            kind: CurveKind,
            channels: Vec<String>,
        }
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut manifest = Vec::new();
        let mut emit = |curve: &Curve<T>, name: String, channels: Vec<String>| -> Result<()> {
            let f = std::fs::File::create(dir.join(&name))?;
            curve.write_csv(std::io::BufWriter::new(f))?;
            manifest.push(Entry {
                file: name,
                kind: curve.kind,
                channels,
            });
            Ok(())
        };
        for (k, c) in self.densities.iter().enumerate() {
            emit(c, format!("density_{}.csv", k + 1), vec![labels[k].clone()])?;
        }
        for (k, c) in self.spectra.iter().enumerate() {
            emit(
                c,
                format!("spectrum_{}.csv", k + 1),
                vec![labels[k].clone()],
            )?;
        }
        for (&(j, k), c) in self.pairs.iter().zip(&self.ccfs) {
            emit(
                c,
                format!("ccf_{}_{}.csv", j + 1, k + 1),
                vec![labels[j].clone(), labels[k].clone()],
            )?;
        }
        let f = std::fs::File::create(dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &manifest)?;
        Ok(())
    }
}

/// Computes every summary curve of `series`.
pub fn compute_summaries<T: Real>(
    series: &MultiSeries<T>,
    cfg: &SummaryConfig,
) -> Result<SummarySet<T>> {
    let len = series.len();
    let hw = cfg
        .spectrum_halfwidth
        .unwrap_or_else(|| default_halfwidth(len));
    let lag_max = cfg.lag_max.unwrap_or_else(|| default_lag_max(len));
    let mut densities = Vec::with_capacity(series.n_channels());
    let mut spectra = Vec::with_capacity(series.n_channels());
    for ch in &series.channels {
        densities.push(estimate_density(ch, cfg.density_points)?);
        spectra.push(estimate_spectrum(ch, series.dt, hw)?);
    }
    let n = series.n_channels();
    let pairs = off_diagonal_pairs(n);
    let mut ccfs: Vec<Option<Curve<T>>> = vec![None; pairs.len()];
    let index = |j: usize, k: usize| j * (n - 1) + if k > j { k - 1 } else { k };
    for j in 0..n {
        for k in j + 1..n {
            let c = estimate_ccf(&series.channels[j], &series.channels[k], lag_max, series.dt)?;
            let mut mirrored = c.clone();
            mirrored.values.reverse();
            ccfs[index(j, k)] = Some(c);
            ccfs[index(k, j)] = Some(mirrored);
        }
    }
    Ok(SummarySet {
        densities,
        spectra,
        ccfs: ccfs
            .into_iter()
            .map(|c| c.expect("every pair filled"))
            .collect(),
        pairs,
    })
}

/// Summaries of a simulated series with its densities resampled onto the
/// density grids of `reference`, so that every curve shares a grid with its
/// observed counterpart.
pub fn compute_summaries_aligned<T: Real>(
    series: &MultiSeries<T>,
    cfg: &SummaryConfig,
    reference: &SummarySet<T>,
) -> Result<SummarySet<T>> {
    if series.n_channels() != reference.n_channels() {
        return Err(Error::DimensionMismatch {
            expected: reference.n_channels(),
            got: series.n_channels(),
        });
    }
    let mut s = compute_summaries(series, cfg)?;
    for (d, r) in s.densities.iter_mut().zip(&reference.densities) {
        *d = d.resample(&r.grid);
    }
    Ok(s)
}

/// Rectangular-rule `∫ |g1 - g2|` on the grid of `g1`. When the grids differ
/// `g2` is linearly interpolated, and taken as zero outside its support.
pub fn iae<T: Real>(g1: &Curve<T>, g2: &Curve<T>) -> Result<T> {
    if g1.kind != g2.kind {
        return Err(Error::KindMismatch(
            g1.kind.as_str().into(),
            g2.kind.as_str().into(),
        ));
    }
    let sum: T = if g1.grid == g2.grid {
        g1.values
            .iter()
            .zip(&g2.values)
            .map(|(&a, &b)| (a - b).abs())
            .sum()
    } else {
        g1.grid
            .iter()
            .zip(&g1.values)
            .map(|(&x, &a)| (a - g2.interpolate(x)).abs())
            .sum()
    };
    Ok(sum * g1.step())
}

/// Weights `(v1, v2, v3)` of the spectral, density and cross-correlation terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceWeights<T> {
    pub v1: T,
    pub v2: T,
    pub v3: T,
}

/// `v1 = 1`; `v2` is the mean area under the observed spectra (densities
/// have unit area); `v3` is that mean spectral area over the mean area under
/// the absolute observed cross-correlations. With one channel `v3 = 0`.
pub fn calibrate_weights<T: Real>(obs: &SummarySet<T>) -> Result<DistanceWeights<T>> {
    let spec_area = stats::mean(&obs.spectra.iter().map(Curve::area).collect::<Vec<_>>());
    let v3 = if obs.ccfs.is_empty() {
        T::zero()
    } else {
        let ccf_area = stats::mean(&obs.ccfs.iter().map(Curve::abs_area).collect::<Vec<_>>());
        if !(ccf_area > T::zero()) {
            return Err(Error::DegenerateData(
                "observed cross-correlations have zero area".into(),
            ));
        }
        spec_area / ccf_area
    };
    Ok(DistanceWeights {
        v1: T::one(),
        v2: spec_area,
        v3,
    })
}

fn mean_iae<T: Real>(a: &[Curve<T>], b: &[Curve<T>]) -> Result<T> {
    if a.is_empty() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for (x, y) in a.iter().zip(b) {
        total += iae(x, y)?;
    }
    Ok(total / T::from_usize_lossy(a.len()))
}

/// `v1 · mean IAE(spectra) + v2 · mean IAE(densities) + v3 · mean IAE(ccfs)`.
pub fn distance<T: Real>(
    obs: &SummarySet<T>,
    sim: &SummarySet<T>,
    w: &DistanceWeights<T>,
) -> Result<T> {
    if obs.densities.len() != sim.densities.len()
        || obs.spectra.len() != sim.spectra.len()
        || obs.ccfs.len() != sim.ccfs.len()
    {
        return Err(Error::DimensionMismatch {
            expected: obs.n_channels(),
            got: sim.n_channels(),
        });
    }
    if obs.pairs != sim.pairs {
        return Err(Error::InvalidParameter(
            "cross-correlation pairs differ".into(),
        ));
    }
    let spec = mean_iae(&obs.spectra, &sim.spectra)?;
    let dens = mean_iae(&obs.densities, &sim.densities)?;
    let cc = mean_iae(&obs.ccfs, &sim.ccfs)?;
    Ok(w.v1 * spec + w.v2 * dens + w.v3 * cc)
}
