//! Model selection by k-fold cross-validation over contiguous time blocks.
//!
//! Every (M, λ, fold) combination trains once for the largest `iter` in the
//! grid; smaller `iter` values are read off the same run, which yields the
//! same parameters a shorter run would have.

use std::collections::HashSet;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_checkpoints, FittedModel, Hyperparams, SelectionMetric, TrainSpec};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::mixture::PROB_FLOOR;
use crate::window::WindowedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub chosen: Hyperparams,
    /// Mean validation score per grid point, oriented so lower is better.
    pub scores: Vec<(Hyperparams, f64)>,
    /// Folds whose validation block lacked at least one class.
    pub flagged_folds: Vec<usize>,
    pub warnings: Vec<String>,
}

/// `k` contiguous, near-equal blocks covering `0..n`.
pub fn fold_ranges(n: usize, k: usize) -> Vec<Range<usize>> {
    (0..k).map(|f| f * n / k..(f + 1) * n / k).collect()
}

/// Validation score of a fitted model, lower is better.
pub fn score(model: &FittedModel, val: &WindowedDataset, metric: SelectionMetric) -> Result<f64> {
    if metric == SelectionMetric::Loss {
        let q = val.num_classes();
        let mut total = 0.0;
        for p in &val.patterns {
            let probs = model.probs(p, q)?;
            total -= probs[p.target.index()].max(PROB_FLOOR).ln();
        }
        return Ok(total / val.len() as f64);
    }
    let truth: Vec<_> = val.targets().collect();
    let pred = model.predict_all(val)?;
    let r = EvalReport::from_labels(&truth, &pred, val.num_classes())?;
    Ok(match metric {
        SelectionMetric::Amae => r.amae,
        SelectionMetric::Mmae => r.mmae,
        SelectionMetric::Acc => -r.acc,
        SelectionMetric::Gms => -r.gms,
        SelectionMetric::Loss => unreachable!(),
    })
}

struct FoldResult {
    scores: Vec<f64>,
    warnings: Vec<String>,
}

/// Picks hyperparameters for `spec.method` on `train`.
///
/// Ties go to the smaller M, then the smaller iter, then the larger λ. A grid
/// with a single point is returned without training.
pub fn cross_validate(train: &WindowedDataset, spec: &TrainSpec) -> Result<CvOutcome> {
    spec.validate()?;
    let points = spec.grid.points(spec.method)?;
    let Some(&first) = points.first() else {
        return Err(Error::InvalidConfig(format!(
            "{} has no hyperparameters to select",
            spec.method
        )));
    };
    if points.len() == 1 {
        return Ok(CvOutcome {
            chosen: first,
            scores: Vec::new(),
            flagged_folds: Vec::new(),
            warnings: Vec::new(),
        });
    }
    if train.len() < spec.cv_folds {
        return Err(Error::InsufficientData(format!(
            "{} patterns cannot be split into {} folds",
            train.len(),
            spec.cv_folds
        )));
    }

    let mut iters: Vec<usize> = points.iter().map(|h| h.iter).collect();
    iters.sort_unstable();
    iters.dedup();
    let mut runs: Vec<(Option<usize>, f64)> = Vec::new();
    for h in &points {
        let key = (h.hidden_units, h.lambda);
        if !runs.contains(&key) {
            runs.push(key);
        }
    }

    let folds = fold_ranges(train.len(), spec.cv_folds);
    let q = train.num_classes();
    let flagged_folds: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            let mut seen = vec![false; q];
            for p in &train.patterns[(*r).clone()] {
                seen[p.target.index()] = true;
            }
            seen.contains(&false)
        })
        .map(|(f, _)| f)
        .collect();

    let tasks: Vec<(usize, usize)> = (0..runs.len())
        .flat_map(|r| (0..folds.len()).map(move |f| (r, f)))
        .collect();
    let results: Vec<Result<FoldResult>> = tasks
        .par_iter()
        .map(|&(r, f)| {
            let (hidden_units, lambda) = runs[r];
            let val_idx: Vec<usize> = folds[f].clone().collect();
            let train_idx: Vec<usize> = (0..train.len()).filter(|i| !folds[f].contains(i)).collect();
            let val_set: HashSet<usize> = val_idx.iter().copied().collect();
            assert!(
                train_idx.iter().all(|i| !val_set.contains(i)),
                "fold {f}: training and validation indices overlap"
            );
            let fold_train = train.subset(&train_idx);
            let fold_val = train.subset(&val_idx);
            let models = fit_checkpoints(spec.method, &fold_train, hidden_units, lambda, &iters, spec.seed)
                .map_err(|e| Error::Training(format!("fold {}: {e}", f + 1)))?;
            let scores = models
                .iter()
                .map(|m| score(m, &fold_val, spec.selection_metric))
                .collect::<Result<Vec<f64>>>()?;
            let warnings = models.last().map(|m| m.warnings.clone()).unwrap_or_default();
            Ok(FoldResult { scores, warnings })
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut warnings: Vec<String> = Vec::new();
    for w in results.iter().flat_map(|r| &r.warnings) {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    for &f in &flagged_folds {
        warnings.push(format!(
            "validation fold {} lacks a class; its metrics cover present classes only",
            f + 1
        ));
    }

    let mut scores = Vec::with_capacity(points.len());
    for h in &points {
        let r = runs
            .iter()
            .position(|k| *k == (h.hidden_units, h.lambda))
            .expect("every point has a run");
        let i = iters.iter().position(|&it| it == h.iter).expect("iter in grid");
        let folds_scores = &results[r * folds.len()..(r + 1) * folds.len()];
        let mean = folds_scores.iter().map(|fr| fr.scores[i]).sum::<f64>() / folds.len() as f64;
        scores.push((*h, mean));
    }
    let mut chosen = scores[0];
    for &s in &scores[1..] {
        if s.1 < chosen.1 {
            chosen = s;
        }
    }
    Ok(CvOutcome {
        chosen: chosen.0,
        scores,
        flagged_folds,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenConfig};
    use crate::ordinal::OrdinalScale;
    use crate::training::{Grid, Method};
    use crate::window::build_windows;

    fn synthetic(seed: u64) -> WindowedDataset {
        let cfg = GenConfig {
            num_steps: 400,
            num_classes: 3,
            feature_dim: 2,
            base_persistence: 0.8,
            switch_signal_strength: 3.0,
            seed,
            ..GenConfig::default()
        };
        build_windows(&generate(&cfg).unwrap(), 1, 1, &OrdinalScale::with_classes(3).unwrap()).unwrap()
    }

    #[test]
    fn folds_partition_in_order() {
        for (n, k) in [(10, 5), (11, 5), (7, 2), (500, 5)] {
            let f = fold_ranges(n, k);
            assert_eq!(f.len(), k);
            assert_eq!(f[0].start, 0);
            assert_eq!(f[k - 1].end, n);
            assert!(f.windows(2).all(|w| w[0].end == w[1].start));
            assert!(f.iter().all(|r| r.len() >= n / k && r.len() <= n / k + 1));
        }
    }

    #[test]
    fn single_point_needs_no_training() {
        let ds = synthetic(1);
        let mut spec = TrainSpec::new(Method::Stme);
        spec.grid = Grid {
            m: vec![3],
            iter: vec![40],
            lambda: vec![0.0],
        };
        let out = cross_validate(&ds, &spec).unwrap();
        assert_eq!(out.chosen.hidden_units, Some(3));
        assert!(out.scores.is_empty());
    }

    #[test]
    fn chooses_the_best_mean_score() {
        let ds = synthetic(2);
        let mut spec = TrainSpec::new(Method::Nnpom);
        spec.grid = Grid {
            m: vec![2, 4],
            iter: vec![5, 60],
            lambda: vec![0.0],
        };
        let out = cross_validate(&ds, &spec).unwrap();
        assert_eq!(out.scores.len(), 4);
        let best = out.scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let first_best = out.scores.iter().find(|s| s.1 == best).unwrap();
        assert_eq!(out.chosen, first_best.0);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let ds = synthetic(3);
        let mut spec = TrainSpec::new(Method::Stmeic);
        spec.grid = Grid {
            m: vec![2, 3],
            iter: vec![10, 30],
            lambda: vec![0.0, 0.001],
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| cross_validate(&ds, &spec)).unwrap();
        let b = four.install(|| cross_validate(&ds, &spec)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_patterns() {
        let ds = synthetic(4).subset(&[0, 1, 2]);
        let mut spec = TrainSpec::new(Method::Pom);
        spec.grid.iter = vec![5, 10];
        assert!(matches!(cross_validate(&ds, &spec), Err(Error::InsufficientData(_))));
    }
}
