//! Sliding-window pattern construction over hourly series.
//!
//! A pattern at origin `t` concatenates, for each step `t-Δ, ..., t`, the
//! exogenous features followed by a one-hot encoding of that step's label.
//! Its target is the label observed exactly `k` hours after `t`. Missing hours
//! suppress every pattern whose window or target would touch them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordinal::{OrdinalLabel, OrdinalScale};

/// One hourly observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    /// Hour index, strictly increasing within a series.
    pub timestamp: i64,
    pub features: Vec<f64>,
    pub raw_value: Option<f64>,
    pub label: OrdinalLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedPattern {
    pub z: Vec<f64>,
    /// Label at the origin `t`; the persistence forecast.
    pub current_label: OrdinalLabel,
    /// Label at `t + k`.
    pub target: OrdinalLabel,
    pub origin_t: i64,
}

/// Per-column z-score parameters. Columns with zero spread map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Fits column means and population standard deviations.
    pub fn fit(patterns: &[WindowedPattern]) -> Result<Self> {
        let first = patterns
            .first()
            .ok_or_else(|| Error::InsufficientData("no patterns to standardize".into()))?;
        let dim = first.z.len();
        let n = patterns.len() as f64;
        let mut mean = vec![0.0; dim];
        for p in patterns {
            for (m, v) in mean.iter_mut().zip(&p.z) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for p in patterns {
            for ((s, v), m) in var.iter_mut().zip(&p.z).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                // spread below rounding noise counts as constant
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardization { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, z: &mut [f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: z.len(),
            });
        }
        for ((v, m), s) in z.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = if *s == 0.0 { 0.0 } else { (*v - m) / s };
        }
        Ok(())
    }
}

/// Standardized windowed patterns together with how they were built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub patterns: Vec<WindowedPattern>,
    pub scale: OrdinalScale,
    pub delta: usize,
    pub horizon: usize,
    pub standardization: Standardization,
}

impl WindowedDataset {
    /// Standardizes raw patterns. When `standardization` is `None` it is fitted
    /// on `patterns` themselves (the training-split case).
    pub fn from_raw_patterns(
        mut patterns: Vec<WindowedPattern>,
        scale: OrdinalScale,
        delta: usize,
        horizon: usize,
        standardization: Option<Standardization>,
    ) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no window of {} consecutive hours plus a target {horizon} hours ahead",
                delta + 1
            )));
        }
        let standardization = match standardization {
            Some(s) => s,
            None => Standardization::fit(&patterns)?,
        };
        for p in &mut patterns {
            standardization.apply(&mut p.z)?;
        }
        Ok(WindowedDataset {
            patterns,
            scale,
            delta,
            horizon,
            standardization,
        })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.scale.num_classes()
    }

    pub fn input_dim(&self) -> usize {
        self.standardization.dim()
    }

    /// Copy restricted to `indices`, keeping the same standardization.
    pub fn subset(&self, indices: &[usize]) -> WindowedDataset {
        WindowedDataset {
            patterns: indices.iter().map(|&i| self.patterns[i].clone()).collect(),
            scale: self.scale.clone(),
            delta: self.delta,
            horizon: self.horizon,
            standardization: self.standardization.clone(),
        }
    }

    pub fn targets(&self) -> impl Iterator<Item = OrdinalLabel> + '_ {
        self.patterns.iter().map(|p| p.target)
    }

    pub fn class_distribution(&self) -> Vec<usize> {
        class_distribution(self)
    }

    pub fn persistence_rate(&self) -> f64 {
        persistence_rate(self)
    }
}

/// Width of `z` for a given window.
pub fn window_dim(delta: usize, feature_dim: usize, num_classes: usize) -> usize {
    (delta + 1) * (feature_dim + num_classes)
}

/// Enumerates unstandardized patterns.
///
/// Fails on inconsistent feature widths, non-increasing timestamps or labels
/// outside the scale; returns an empty vector when no window fits.
pub fn window_patterns(
    series: &[TimeSeriesRecord],
    delta: usize,
    horizon: usize,
    num_classes: usize,
) -> Result<Vec<WindowedPattern>> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let feature_dim = first.features.len();
    for (i, r) in series.iter().enumerate() {
        if r.features.len() != feature_dim {
            return Err(Error::DimensionMismatch {
                expected: feature_dim,
                actual: r.features.len(),
            });
        }
        if r.label.rank() > num_classes {
            return Err(Error::LabelOutOfRange {
                rank: r.label.rank(),
                num_classes,
            });
        }
        if i > 0 && series[i - 1].timestamp >= r.timestamp {
            return Err(Error::InvalidConfig(format!(
                "timestamps must be strictly increasing (record {i}: {} after {})",
                r.timestamp,
                series[i - 1].timestamp
            )));
        }
    }

    let by_time: HashMap<i64, usize> = series.iter().enumerate().map(|(i, r)| (r.timestamp, i)).collect();
    let dim = window_dim(delta, feature_dim, num_classes);
    let mut out = Vec::new();
    for (t, rec) in series.iter().enumerate() {
        if t < delta {
            continue;
        }
        let start = t - delta;
        // sorted + strictly increasing, so a span of exactly delta hours means no gap
        if rec.timestamp - series[start].timestamp != delta as i64 {
            continue;
        }
        let Some(&target_idx) = by_time.get(&(rec.timestamp + horizon as i64)) else {
            continue;
        };
        let mut z = Vec::with_capacity(dim);
        for step in &series[start..=t] {
            z.extend_from_slice(&step.features);
            let mut one_hot = vec![0.0; num_classes];
            one_hot[step.label.index()] = 1.0;
            z.extend(one_hot);
        }
        out.push(WindowedPattern {
            z,
            current_label: rec.label,
            target: series[target_idx].label,
            origin_t: rec.timestamp,
        });
    }
    Ok(out)
}

/// Builds a dataset whose standardization is fitted on its own patterns.
pub fn build_windows(
    series: &[TimeSeriesRecord],
    delta: usize,
    horizon: usize,
    scale: &OrdinalScale,
) -> Result<WindowedDataset> {
    let patterns = window_patterns(series, delta, horizon, scale.num_classes())?;
    WindowedDataset::from_raw_patterns(patterns, scale.clone(), delta, horizon, None)
}

/// Builds a dataset standardized with previously fitted statistics (test splits).
pub fn build_windows_with(
    series: &[TimeSeriesRecord],
    delta: usize,
    horizon: usize,
    scale: &OrdinalScale,
    standardization: &Standardization,
) -> Result<WindowedDataset> {
    let patterns = window_patterns(series, delta, horizon, scale.num_classes())?;
    WindowedDataset::from_raw_patterns(patterns, scale.clone(), delta, horizon, Some(standardization.clone()))
}

/// Target counts per class.
pub fn class_distribution(ds: &WindowedDataset) -> Vec<usize> {
    let mut counts = vec![0; ds.num_classes()];
    for t in ds.targets() {
        counts[t.index()] += 1;
    }
    counts
}

/// Fraction of patterns whose target equals the current label.
pub fn persistence_rate(ds: &WindowedDataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let same = ds.patterns.iter().filter(|p| p.target == p.current_label).count();
    same as f64 / ds.len() as f64
}

/// Train/test pairs holding out each block in turn. Windows never cross
/// block boundaries; standardization is fitted on the training blocks only.
pub fn leave_one_block_out(
    blocks: &[Vec<TimeSeriesRecord>],
    delta: usize,
    horizon: usize,
    scale: &OrdinalScale,
) -> Result<Vec<(WindowedDataset, WindowedDataset)>> {
    if blocks.len() < 2 {
        return Err(Error::InvalidConfig(
            "leave-one-block-out needs at least two blocks".into(),
        ));
    }
    let q = scale.num_classes();
    let per_block = blocks
        .iter()
        .map(|b| window_patterns(b, delta, horizon, q))
        .collect::<Result<Vec<_>>>()?;
    (0..blocks.len())
        .map(|held_out| {
            let train: Vec<WindowedPattern> = per_block
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held_out)
                .flat_map(|(_, p)| p.iter().cloned())
                .collect();
            split_pair(train, per_block[held_out].clone(), scale, delta, horizon)
        })
        .collect()
}

/// One train/test pair from a single series: the first `1 - test_fraction`
/// of the records train, the rest test.
pub fn chronological_split(
    series: &[TimeSeriesRecord],
    delta: usize,
    horizon: usize,
    scale: &OrdinalScale,
    test_fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let cut = ((1.0 - test_fraction) * series.len() as f64).round() as usize;
    let q = scale.num_classes();
    let train = window_patterns(&series[..cut], delta, horizon, q)?;
    let test = window_patterns(&series[cut..], delta, horizon, q)?;
    split_pair(train, test, scale, delta, horizon)
}

fn split_pair(
    train: Vec<WindowedPattern>,
    test: Vec<WindowedPattern>,
    scale: &OrdinalScale,
    delta: usize,
    horizon: usize,
) -> Result<(WindowedDataset, WindowedDataset)> {
    let train = WindowedDataset::from_raw_patterns(train, scale.clone(), delta, horizon, None)?;
    let std = train.standardization.clone();
    let test = WindowedDataset::from_raw_patterns(test, scale.clone(), delta, horizon, Some(std))?;
    Ok((train, test))
}
