//! Uniformly sampled multichannel time series and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::stats;

/// `N` channels sampled on a shared uniform grid with spacing `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSeries<T> {
    pub dt: T,
    pub channels: Vec<Vec<T>>,
    pub labels: Vec<String>,
}

impl<T: Real> MultiSeries<T> {
    pub fn new(dt: T, channels: Vec<Vec<T>>, labels: Vec<String>) -> Result<Self> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sampling step must be positive, got {dt}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::Data("series has no channels".into()));
        }
        if labels.len() != channels.len() {
            return Err(Error::DimensionMismatch {
                expected: channels.len(),
                got: labels.len(),
            });
        }
        let len = channels[0].len();
        if let Some(bad) = channels.iter().find(|c| c.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: bad.len(),
            });
        }
        Ok(Self {
            dt,
            channels,
            labels,
        })
    }

    /// Channels labelled `Y1..YN`.
    pub fn with_default_labels(dt: T, channels: Vec<Vec<T>>) -> Result<Self> {
        let labels = (1..=channels.len()).map(|k| format!("Y{k}")).collect();
        Self::new(dt, channels, labels)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of samples per channel (`m + 1`).
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reorders channels; `order[i]` is the source index of output channel `i`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            dt: self.dt,
            channels: order.iter().map(|&i| self.channels[i].clone()).collect(),
            labels: order.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(self.n_channels() + 1);
        for i in 0..self.len() {
            row.clear();
            row.push((T::from_usize_lossy(i) * self.dt).to_string());
            row.extend(self.channels.iter().map(|c| c[i].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Reads a series whose first column holds time stamps (or a sample index
/// when `dt` is given) and whose remaining columns are channels.
///
/// Channel values are multiplied by `scale`. Without `dt`, the step is the
/// median spacing of the first column, which must be uniform to within
/// `1e-6` relative.
pub fn ingest_csv<T: Real, R: Read>(reader: R, scale: T, dt: Option<T>) -> Result<MultiSeries<T>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() < 2 {
        return Err(Error::Data(
            "expected a time column and at least one channel column".into(),
        ));
    }
    let n = header.len() - 1;
    let mut time = Vec::new();
    let mut channels = vec![Vec::new(); n];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 2;
        if rec.len() != header.len() {
            return Err(Error::Data(format!(
                "row {line} has {} fields, expected {}",
                rec.len(),
                header.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: T = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "row {line} column {} is not numeric: {field:?}",
                    c + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {line} column {} is not finite",
                    c + 1
                )));
            }
            if c == 0 {
                time.push(v);
            } else {
                channels[c - 1].push(v * scale);
            }
        }
    }
    if time.is_empty() {
        return Err(Error::Data("file has a header but no data rows".into()));
    }
    if time.len() < 2 {
        return Err(Error::Data("at least two samples are required".into()));
    }
    let spacing: Vec<T> = time.windows(2).map(|w| w[1] - w[0]).collect();
    let med = stats::median(&spacing).expect("nonempty");
    if !(med > T::zero()) {
        return Err(Error::Data("time column is not increasing".into()));
    }
    let tol = T::lit(1e-6) * med;
    if let Some(i) = spacing.iter().position(|&s| (s - med).abs() > tol) {
        return Err(Error::Data(format!(
            "time grid is not uniform between rows {} and {}",
            i + 2,
            i + 3
        )));
    }
    MultiSeries::new(dt.unwrap_or(med), channels, header[1..].to_vec())
}

pub fn ingest_csv_file<T: Real>(
    path: impl AsRef<Path>,
    scale: T,
    dt: Option<T>,
) -> Result<MultiSeries<T>> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.as_ref().display())))?;
    ingest_csv(std::io::BufReader::new(f), scale, dt)
}
