//! Repeated train/test evaluation over several splits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cross_validate, fit, train_persist, Hyperparams, Method, TrainSpec};
use crate::error::{Error, Result};
use crate::math::{mean, std_dev};
use crate::metrics::EvalReport;
use crate::window::WindowedDataset;

/// The four headline metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub acc: f64,
    pub amae: f64,
    pub mmae: f64,
    pub gms: f64,
}

impl MetricSummary {
    pub fn of(r: &EvalReport) -> Self {
        MetricSummary {
            acc: r.acc,
            amae: r.amae,
            mmae: r.mmae,
            gms: r.gms,
        }
    }

    fn combine(items: &[MetricSummary], f: fn(&[f64]) -> f64) -> Self {
        let col = |g: fn(&MetricSummary) -> f64| f(&items.iter().map(g).collect::<Vec<_>>());
        MetricSummary {
            acc: col(|m| m.acc),
            amae: col(|m| m.amae),
            mmae: col(|m| m.mmae),
            gms: col(|m| m.gms),
        }
    }

    pub fn mean(items: &[MetricSummary]) -> Self {
        Self::combine(items, mean)
    }

    /// Sample standard deviation; zero for a single item.
    pub fn std(items: &[MetricSummary]) -> Self {
        Self::combine(items, std_dev)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub split: usize,
    pub repeat: usize,
    pub seed: u64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: usize,
    pub hyper: Option<Hyperparams>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub num_classes: usize,
    pub runs: Vec<RepeatResult>,
    pub splits: Vec<SplitSummary>,
    /// Mean over splits of the per-split means.
    pub mean: MetricSummary,
}

impl ExperimentReport {
    /// Rebuilds the per-split and overall aggregates from `runs`.
    pub fn from_runs(method: Method, num_classes: usize, runs: Vec<RepeatResult>) -> Self {
        let mut split_ids: Vec<usize> = runs.iter().map(|r| r.split).collect();
        split_ids.sort_unstable();
        split_ids.dedup();
        let splits: Vec<SplitSummary> = split_ids
            .into_iter()
            .map(|split| {
                let items: Vec<MetricSummary> = runs
                    .iter()
                    .filter(|r| r.split == split)
                    .map(|r| MetricSummary::of(&r.report))
                    .collect();
                SplitSummary {
                    split,
                    hyper: None,
                    mean: MetricSummary::mean(&items),
                    std: MetricSummary::std(&items),
                    warnings: Vec::new(),
                }
            })
            .collect();
        let means: Vec<MetricSummary> = splits.iter().map(|s| s.mean).collect();
        ExperimentReport {
            method,
            num_classes,
            runs,
            mean: MetricSummary::mean(&means),
            splits,
        }
    }

    /// Mean over splits of the per-split standard deviations.
    pub fn mean_std(&self) -> MetricSummary {
        let stds: Vec<MetricSummary> = self.splits.iter().map(|s| s.std).collect();
        MetricSummary::mean(&stds)
    }
}

/// Selects hyperparameters once per split, then trains `spec.repeats` final
/// models with seeds `spec.seed + r` and evaluates each on the test set.
pub fn run_experiment(splits: &[(WindowedDataset, WindowedDataset)], spec: &TrainSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let Some((first_train, _)) = splits.first() else {
        return Err(Error::InvalidConfig("an experiment needs at least one split".into()));
    };
    let q = first_train.num_classes();
    let mut runs = Vec::new();
    let mut extra = Vec::new();
    for (split, (train, test)) in splits.iter().enumerate() {
        if train.num_classes() != q || test.num_classes() != q {
            return Err(Error::InvalidConfig("all splits must share one ordinal scale".into()));
        }
        let (hyper, warnings) = if spec.method == Method::Persist {
            (None, Vec::new())
        } else {
            let cv = cross_validate(train, spec)?;
            (Some(cv.chosen), cv.warnings)
        };
        let truth: Vec<_> = test.targets().collect();
        let results: Vec<Result<RepeatResult>> = (0..spec.repeats)
            .into_par_iter()
            .map(|repeat| {
                let seed = spec.seed.wrapping_add(repeat as u64);
                let model = match &hyper {
                    None => train_persist(),
                    Some(h) => fit(spec.method, train, h, seed)?,
                };
                let pred = model.predict_all(test)?;
                Ok(RepeatResult {
                    split,
                    repeat,
                    seed,
                    report: EvalReport::from_labels(&truth, &pred, q)?,
                })
            })
            .collect();
        runs.extend(results.into_iter().collect::<Result<Vec<_>>>()?);
        extra.push((hyper, warnings));
    }
    let mut report = ExperimentReport::from_runs(spec.method, q, runs);
    for (s, (hyper, warnings)) in report.splits.iter_mut().zip(extra) {
        s.hyper = hyper;
        s.warnings = warnings;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenConfig};
    use crate::ordinal::OrdinalScale;
    use crate::training::Grid;
    use crate::window::{build_windows, build_windows_with};

    fn split(seed: u64) -> (WindowedDataset, WindowedDataset) {
        let cfg = GenConfig {
            num_steps: 300,
            num_classes: 3,
            feature_dim: 2,
            base_persistence: 0.8,
            switch_signal_strength: 3.0,
            seed,
            ..GenConfig::default()
        };
        let scale = OrdinalScale::with_classes(3).unwrap();
        let train = build_windows(&generate(&cfg).unwrap(), 1, 1, &scale).unwrap();
        let test_cfg = GenConfig {
            seed: seed + 100,
            ..cfg
        };
        let test = build_windows_with(&generate(&test_cfg).unwrap(), 1, 1, &scale, &train.standardization).unwrap();
        (train, test)
    }

    #[test]
    fn persist_has_zero_spread() {
        let splits = vec![split(1), split(2)];
        let spec = TrainSpec::new(Method::Persist);
        let r = run_experiment(&splits, &spec).unwrap();
        assert_eq!(r.runs.len(), 20);
        for s in &r.splits {
            assert_eq!(s.std, MetricSummary::default());
        }
    }

    #[test]
    fn aggregate_is_mean_of_split_means() {
        let splits = vec![split(3), split(4), split(5)];
        let mut spec = TrainSpec::new(Method::Stme);
        spec.repeats = 2;
        spec.grid = Grid {
            m: vec![2],
            iter: vec![20],
            lambda: vec![0.0],
        };
        let r = run_experiment(&splits, &spec).unwrap();
        let mut acc = 0.0;
        for s in 0..3 {
            let own: Vec<f64> = r.runs.iter().filter(|x| x.split == s).map(|x| x.report.acc).collect();
            let m = own.iter().sum::<f64>() / own.len() as f64;
            assert!((r.splits[s].mean.acc - m).abs() < 1e-12);
            acc += m / 3.0;
        }
        assert!((r.mean.acc - acc).abs() < 1e-12);
    }

    #[test]
    fn repeat_runs_are_identical() {
        let splits = vec![split(6)];
        let mut spec = TrainSpec::new(Method::Itme);
        spec.repeats = 1;
        spec.seed = 42;
        spec.grid = Grid {
            m: vec![2],
            iter: vec![15, 30],
            lambda: vec![0.0],
        };
        assert_eq!(
            run_experiment(&splits, &spec).unwrap(),
            run_experiment(&splits, &spec).unwrap()
        );
    }
}
