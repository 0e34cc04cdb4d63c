//! Ordinal and imbalance-aware classification metrics.
//!
//! Classes absent from the true labels are excluded from the per-class
//! averages (AMAE, MMAE, GMS) and listed in [`EvalReport::missing_classes`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordinal::OrdinalLabel;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn from_labels(truth: &[OrdinalLabel], pred: &[OrdinalLabel], num_classes: usize) -> Result<Self> {
        check_inputs(truth, pred, num_classes)?;
        let mut m = ConfusionMatrix::new(num_classes);
        for (t, p) in truth.iter().zip(pred) {
            m.counts[t.index()][p.index()] += 1;
        }
        Ok(m)
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> usize {
        self.counts[truth][pred]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Metrics derived from the matrix alone.
    pub fn report(&self) -> EvalReport {
        let q = self.num_classes();
        let n_per_class: Vec<usize> = self.counts.iter().map(|r| r.iter().sum()).collect();
        let correct: usize = (0..q).map(|i| self.counts[i][i]).sum();
        let abs_errors: Vec<usize> = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, c)| c * i.abs_diff(j)).sum())
            .collect();
        let hits: Vec<usize> = (0..q).map(|i| self.counts[i][i]).collect();
        EvalReport::assemble(self.total(), correct, &n_per_class, &abs_errors, &hits)
    }
}

/// Summary metrics for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Percentage of exact hits.
    pub acc: f64,
    pub amae: f64,
    pub mmae: f64,
    /// Geometric mean of per-class sensitivities, in percent.
    pub gms: f64,
    /// `NaN` for classes without true patterns.
    pub per_class_mae: Vec<f64>,
    /// Recall in percent; `NaN` for classes without true patterns.
    pub per_class_sensitivity: Vec<f64>,
    pub n_per_class: Vec<usize>,
    /// 1-based ranks of classes absent from the true labels.
    pub missing_classes: Vec<usize>,
}

impl EvalReport {
    /// Single streaming pass over the label pairs.
    pub fn from_labels(truth: &[OrdinalLabel], pred: &[OrdinalLabel], num_classes: usize) -> Result<Self> {
        check_inputs(truth, pred, num_classes)?;
        let mut n_per_class = vec![0usize; num_classes];
        let mut abs_errors = vec![0usize; num_classes];
        let mut hits = vec![0usize; num_classes];
        let mut correct = 0usize;
        for (t, p) in truth.iter().zip(pred) {
            let q = t.index();
            n_per_class[q] += 1;
            abs_errors[q] += t.distance(*p);
            if t == p {
                hits[q] += 1;
                correct += 1;
            }
        }
        Ok(Self::assemble(truth.len(), correct, &n_per_class, &abs_errors, &hits))
    }

    fn assemble(total: usize, correct: usize, n_per_class: &[usize], abs_errors: &[usize], hits: &[usize]) -> Self {
        let mut per_class_mae = Vec::with_capacity(n_per_class.len());
        let mut per_class_sensitivity = Vec::with_capacity(n_per_class.len());
        let mut missing_classes = Vec::new();
        for (q, &n) in n_per_class.iter().enumerate() {
            if n == 0 {
                per_class_mae.push(f64::NAN);
                per_class_sensitivity.push(f64::NAN);
                missing_classes.push(q + 1);
            } else {
                per_class_mae.push(abs_errors[q] as f64 / n as f64);
                per_class_sensitivity.push(100.0 * hits[q] as f64 / n as f64);
            }
        }
        let present_mae: Vec<f64> = per_class_mae.iter().copied().filter(|v| !v.is_nan()).collect();
        let present_sens: Vec<f64> = per_class_sensitivity.iter().copied().filter(|v| !v.is_nan()).collect();
        let amae = present_mae.iter().sum::<f64>() / present_mae.len() as f64;
        let mmae = present_mae.iter().copied().fold(0.0, f64::max);
        // on fractions, so perfect recall gives exactly 100
        let product: f64 = present_sens.iter().map(|s| s / 100.0).product();
        let gms = if product == 0.0 {
            0.0
        } else {
            100.0 * product.powf(1.0 / present_sens.len() as f64)
        };
        EvalReport {
            // same rounding as 100 * persistence_rate
            acc: 100.0 * (correct as f64 / total as f64),
            amae,
            mmae,
            gms,
            per_class_mae,
            per_class_sensitivity,
            n_per_class: n_per_class.to_vec(),
            missing_classes,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.n_per_class.len()
    }

    pub fn has_missing_classes(&self) -> bool {
        !self.missing_classes.is_empty()
    }
}

fn check_inputs(truth: &[OrdinalLabel], pred: &[OrdinalLabel], num_classes: usize) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::InvalidConfig("cannot evaluate an empty label sequence".into()));
    }
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    for l in truth.iter().chain(pred) {
        if l.rank() > num_classes {
            return Err(Error::LabelOutOfRange {
                rank: l.rank(),
                num_classes,
            });
        }
    }
    Ok(())
}

pub fn accuracy(truth: &[OrdinalLabel], pred: &[OrdinalLabel]) -> Result<f64> {
    let q = truth.iter().chain(pred).map(|l| l.rank()).max().unwrap_or(1);
    check_inputs(truth, pred, q)?;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    Ok(100.0 * (correct as f64 / truth.len() as f64))
}

pub fn amae(truth: &[OrdinalLabel], pred: &[OrdinalLabel], num_classes: usize) -> Result<f64> {
    Ok(EvalReport::from_labels(truth, pred, num_classes)?.amae)
}

pub fn mmae(truth: &[OrdinalLabel], pred: &[OrdinalLabel], num_classes: usize) -> Result<f64> {
    Ok(EvalReport::from_labels(truth, pred, num_classes)?.mmae)
}

pub fn gms(truth: &[OrdinalLabel], pred: &[OrdinalLabel], num_classes: usize) -> Result<f64> {
    Ok(EvalReport::from_labels(truth, pred, num_classes)?.gms)
}
