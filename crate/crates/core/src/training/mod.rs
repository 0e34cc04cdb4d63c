//! Training regimes for the persistence baseline, the standalone ordinal
//! experts and the three mixture variants.
//!
//! | method | parameters | objective |
//! |--------|------------|-----------|
//! | Persist | none | none |
//! | POM | linear expert | unweighted cross-entropy, no L2 |
//! | NNPOM | neural expert | unweighted cross-entropy + L2 |
//! | ITME | gate + expert | gate by logistic regression on "persistence was right", expert on the remaining patterns |
//! | STME | gate + expert | joint unweighted cross-entropy + L2 |
//! | STMEIC | gate + expert | joint class-weighted cross-entropy + L2 |
//!
//! [`fit`] trains with fixed hyperparameters. [`cv::cross_validate`] picks
//! them, and [`experiment::run_experiment`] repeats the whole procedure over
//! splits and seeds.

pub mod cv;
pub mod experiment;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{affine, sigmoid_pair};
use crate::mixture::{self, LossConfig, MixtureParams};
use crate::nnpom::{NnpomConfig, NnpomParams};
use crate::optimizer::{minimize_checkpoints, Minimized, RpropConfig};
use crate::ordinal::OrdinalLabel;
use crate::window::{WindowedDataset, WindowedPattern};

pub use cv::{cross_validate, CvOutcome};
pub use experiment::{run_experiment, ExperimentReport, MetricSummary, RepeatResult, SplitSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Persist,
    #[serde(rename = "POM")]
    Pom,
    #[serde(rename = "NNPOM")]
    Nnpom,
    #[serde(rename = "ITME")]
    Itme,
    #[serde(rename = "STME")]
    Stme,
    #[serde(rename = "STMEIC")]
    Stmeic,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Persist,
        Method::Pom,
        Method::Nnpom,
        Method::Itme,
        Method::Stme,
        Method::Stmeic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Persist => "Persist",
            Method::Pom => "POM",
            Method::Nnpom => "NNPOM",
            Method::Itme => "ITME",
            Method::Stme => "STME",
            Method::Stmeic => "STMEIC",
        }
    }

    pub fn uses_hidden_layer(self) -> bool {
        matches!(self, Method::Nnpom | Method::Itme | Method::Stme | Method::Stmeic)
    }

    pub fn uses_lambda(self) -> bool {
        self.uses_hidden_layer()
    }

    pub fn is_trained(self) -> bool {
        self != Method::Persist
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown method {s:?}; expected one of Persist, POM, NNPOM, ITME, STME, STMEIC"
                ))
            })
    }
}

/// Criterion minimized (or, for Acc/GMS, maximized) on validation folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    #[default]
    Amae,
    Mmae,
    Acc,
    Gms,
    /// Unweighted, unregularized validation cross-entropy.
    Loss,
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "amae" => Ok(SelectionMetric::Amae),
            "mmae" => Ok(SelectionMetric::Mmae),
            "acc" => Ok(SelectionMetric::Acc),
            "gms" | "gm" => Ok(SelectionMetric::Gms),
            "loss" => Ok(SelectionMetric::Loss),
            _ => Err(Error::InvalidConfig(format!(
                "unknown selection_metric {s:?}; expected amae, mmae, acc, gms or loss"
            ))),
        }
    }
}

/// Hyperparameter ranges explored by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub m: Vec<usize>,
    pub iter: Vec<usize>,
    pub lambda: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            m: vec![5, 10, 25, 50, 75],
            iter: vec![100, 250, 500, 1000],
            lambda: vec![0.0, 0.001],
        }
    }
}

impl Grid {
    pub fn single(hyper: Hyperparams) -> Self {
        Grid {
            m: hyper.hidden_units.into_iter().collect(),
            iter: vec![hyper.iter],
            lambda: vec![hyper.lambda],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iter.is_empty() || self.iter.contains(&0) {
            return Err(Error::InvalidConfig("grid.iter needs positive entries".into()));
        }
        if self.m.contains(&0) {
            return Err(Error::InvalidConfig("grid.m entries must be positive".into()));
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(
                "grid.lambda entries must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Candidate points for `method`, in tie-break order: smaller M, then
    /// smaller iter, then larger λ.
    pub fn points(&self, method: Method) -> Result<Vec<Hyperparams>> {
        self.validate()?;
        if !method.is_trained() {
            return Ok(Vec::new());
        }
        let ms: Vec<Option<usize>> = if method.uses_hidden_layer() {
            if self.m.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "{method} needs at least one grid.m value"
                )));
            }
            let mut m = self.m.clone();
            m.sort_unstable();
            m.dedup();
            m.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let lambdas = if method.uses_lambda() {
            if self.lambda.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "{method} needs at least one grid.lambda value"
                )));
            }
            let mut l = self.lambda.clone();
            l.sort_by(|a, b| b.total_cmp(a));
            l.dedup();
            l
        } else {
            vec![0.0]
        };
        let mut iters = self.iter.clone();
        iters.sort_unstable();
        iters.dedup();
        let mut out = Vec::new();
        for &hidden_units in &ms {
            for &iter in &iters {
                for &lambda in &lambdas {
                    out.push(Hyperparams {
                        hidden_units,
                        iter,
                        lambda,
                    });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// `None` for the linear POM.
    pub hidden_units: Option<usize>,
    pub iter: usize,
    pub lambda: f64,
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hidden_units {
            Some(m) => write!(f, "M={m} iter={} lambda={}", self.iter, self.lambda),
            None => write!(f, "iter={} lambda={}", self.iter, self.lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub method: Method,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub selection_metric: SelectionMetric,
}

fn default_repeats() -> usize {
    10
}

fn default_folds() -> usize {
    5
}

impl TrainSpec {
    pub fn new(method: Method) -> Self {
        TrainSpec {
            method,
            grid: Grid::default(),
            repeats: default_repeats(),
            seed: 0,
            cv_folds: default_folds(),
            selection_metric: SelectionMetric::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidConfig("cv_folds must be at least 2".into()));
        }
        self.grid.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum ModelParams {
    None,
    Expert(NnpomParams),
    Mixture(MixtureParams),
}

/// Optimizer outcome for one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub initial_loss: f64,
    pub best_loss: f64,
    pub best_iteration: usize,
}

impl StageSummary {
    fn from_run(stage: &str, run: &Minimized) -> Self {
        StageSummary {
            stage: stage.to_string(),
            initial_loss: run.trace[0],
            best_loss: run.best_loss,
            best_iteration: run.best_iteration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub method: Method,
    pub params: ModelParams,
    pub hyper: Option<Hyperparams>,
    pub seed: u64,
    pub stages: Vec<StageSummary>,
    pub warnings: Vec<String>,
}

impl FittedModel {
    pub fn input_dim(&self) -> Option<usize> {
        match &self.params {
            ModelParams::None => None,
            ModelParams::Expert(e) => Some(e.config().input_dim),
            ModelParams::Mixture(m) => Some(m.config().input_dim),
        }
    }

    pub fn probs(&self, pattern: &WindowedPattern, num_classes: usize) -> Result<Vec<f64>> {
        match &self.params {
            ModelParams::None => {
                let mut p = vec![0.0; num_classes];
                let q = pattern.current_label.index();
                if q >= num_classes {
                    return Err(Error::LabelOutOfRange {
                        rank: q + 1,
                        num_classes,
                    });
                }
                p[q] = 1.0;
                Ok(p)
            }
            ModelParams::Expert(e) => e.class_probs(&pattern.z),
            ModelParams::Mixture(m) => m.probs(pattern),
        }
    }

    pub fn predict(&self, pattern: &WindowedPattern) -> Result<OrdinalLabel> {
        match &self.params {
            ModelParams::None => Ok(pattern.current_label),
            ModelParams::Expert(e) => Ok(mixture::argmax_label(&e.class_probs(&pattern.z)?)),
            ModelParams::Mixture(m) => m.predict(pattern),
        }
    }

    pub fn predict_all(&self, ds: &WindowedDataset) -> Result<Vec<OrdinalLabel>> {
        ds.patterns.iter().map(|p| self.predict(p)).collect()
    }

    /// Gate output for mixtures; `None` for models without a gate.
    pub fn gate_alpha(&self, z: &[f64]) -> Result<Option<f64>> {
        match &self.params {
            ModelParams::Mixture(m) => m.alpha(z).map(Some),
            _ => Ok(None),
        }
    }
}

pub fn train_persist() -> FittedModel {
    FittedModel {
        method: Method::Persist,
        params: ModelParams::None,
        hyper: None,
        seed: 0,
        stages: Vec::new(),
        warnings: Vec::new(),
    }
}

/// Indices of patterns where persistence is wrong (`y_{t+k} ≠ y_t`).
pub fn problematic_indices(ds: &WindowedDataset) -> Vec<usize> {
    ds.patterns
        .iter()
        .enumerate()
        .filter(|(_, p)| p.target != p.current_label)
        .map(|(i, _)| i)
        .collect()
}

fn expert_config(method: Method, input_dim: usize, num_classes: usize, hyper: &Hyperparams) -> Result<NnpomConfig> {
    match (method, hyper.hidden_units) {
        (Method::Pom, _) => NnpomConfig::linear(input_dim, num_classes),
        (_, Some(m)) => NnpomConfig::new(input_dim, m, num_classes),
        (_, None) => Err(Error::InvalidConfig(format!("{method} needs a hidden layer size"))),
    }
}

/// Trains `method` on `train` with fixed hyperparameters.
pub fn fit(method: Method, train: &WindowedDataset, hyper: &Hyperparams, seed: u64) -> Result<FittedModel> {
    Ok(
        fit_checkpoints(method, train, hyper.hidden_units, hyper.lambda, &[hyper.iter], seed)?
            .pop()
            .expect("one checkpoint"),
    )
}

/// Trains once for `max(iters)` iterations and returns the model as it would
/// have come out of a run with each entry of `iters`.
pub(crate) fn fit_checkpoints(
    method: Method,
    train: &WindowedDataset,
    hidden_units: Option<usize>,
    lambda: f64,
    iters: &[usize],
    seed: u64,
) -> Result<Vec<FittedModel>> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if method == Method::Persist {
        return Ok(iters.iter().map(|_| train_persist()).collect());
    }
    let lambda = if method.uses_lambda() { lambda } else { 0.0 };
    let probe = Hyperparams {
        hidden_units,
        iter: 1,
        lambda,
    };
    let cfg = expert_config(method, train.input_dim(), train.num_classes(), &probe)?;
    let rprop = RpropConfig::default();
    let hyper_for = |iter| Hyperparams {
        hidden_units: if method == Method::Pom { None } else { hidden_units },
        iter,
        lambda,
    };
    let model = |params, iter, stages, warnings| FittedModel {
        method,
        params,
        hyper: Some(hyper_for(iter)),
        seed,
        stages,
        warnings,
    };

    match method {
        Method::Persist => unreachable!(),
        Method::Pom | Method::Nnpom => {
            let loss_cfg = LossConfig::unweighted(train.num_classes(), lambda);
            let init = MixtureParams::init(&cfg, seed).expert().as_slice().to_vec();
            let runs = minimize_checkpoints(
                |w, g| mixture::expert_objective(&train.patterns, &cfg, w, &loss_cfg, Some(g)),
                init,
                iters,
                rprop,
            )?;
            runs.into_iter()
                .zip(iters)
                .map(|(run, &iter)| {
                    let stages = vec![StageSummary::from_run("expert", &run)];
                    let expert = NnpomParams::from_vec(cfg, run.params)?;
                    Ok(model(ModelParams::Expert(expert), iter, stages, Vec::new()))
                })
                .collect()
        }
        Method::Stme | Method::Stmeic => {
            let loss_cfg = LossConfig::for_dataset(train, method == Method::Stmeic, lambda);
            let init = MixtureParams::init(&cfg, seed).to_flat();
            let runs = minimize_checkpoints(
                |w, g| mixture::mixture_objective(&train.patterns, &cfg, w, &loss_cfg, Some(g)),
                init,
                iters,
                rprop,
            )?;
            runs.into_iter()
                .zip(iters)
                .map(|(run, &iter)| {
                    let stages = vec![StageSummary::from_run("joint", &run)];
                    let params = MixtureParams::from_flat(&cfg, &run.params)?;
                    Ok(model(ModelParams::Mixture(params), iter, stages, Vec::new()))
                })
                .collect()
        }
        Method::Itme => {
            let problematic = problematic_indices(train);
            if problematic.is_empty() {
                return Err(Error::Training(
                    "ITME: every training pattern is persistent, so the expert has nothing to learn".into(),
                ));
            }
            let hard = train.subset(&problematic);
            let mut warnings = Vec::new();
            let missing: Vec<String> = hard
                .class_distribution()
                .iter()
                .enumerate()
                .filter(|(_, &n)| n == 0)
                .map(|(q, _)| format!("C{}", q + 1))
                .collect();
            if !missing.is_empty() {
                warnings.push(format!(
                    "ITME: problematic patterns contain no target of class {}",
                    missing.join(", ")
                ));
            }

            let init = MixtureParams::init(&cfg, seed);
            let persistent: Vec<f64> = train
                .patterns
                .iter()
                .map(|p| if p.target == p.current_label { 1.0 } else { 0.0 })
                .collect();
            let gate_runs = minimize_checkpoints(
                |w, g| gate_objective(&train.patterns, &persistent, w, lambda, Some(g)),
                init.gate_weights().to_vec(),
                iters,
                rprop,
            )?;
            let loss_cfg = LossConfig::unweighted(train.num_classes(), lambda);
            let expert_runs = minimize_checkpoints(
                |w, g| mixture::expert_objective(&hard.patterns, &cfg, w, &loss_cfg, Some(g)),
                init.expert().as_slice().to_vec(),
                iters,
                rprop,
            )?;
            gate_runs
                .into_iter()
                .zip(expert_runs)
                .zip(iters)
                .map(|((gate_run, expert_run), &iter)| {
                    let stages = vec![
                        StageSummary::from_run("gate", &gate_run),
                        StageSummary::from_run("expert", &expert_run),
                    ];
                    let expert = NnpomParams::from_vec(cfg, expert_run.params)?;
                    let params = MixtureParams::new(gate_run.params, expert)?;
                    Ok(model(ModelParams::Mixture(params), iter, stages, warnings.clone()))
                })
                .collect()
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binary cross-entropy of a logistic regression predicting `labels` (1 when
/// persistence is right) plus `λ Σ ν_i²`. Overwrites `grad` when given.
pub(crate) fn gate_objective(
    patterns: &[WindowedPattern],
    labels: &[f64],
    nu: &[f64],
    lambda: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let n = patterns.len() as f64;
    let mut data = 0.0;
    for (p, &c) in patterns.iter().zip(labels) {
        let h = affine(nu, &p.z);
        // -log σ(h) = softplus(-h), -log(1 - σ(h)) = softplus(h)
        data += c * softplus(-h) + (1.0 - c) * softplus(h);
        if let Some(g) = grad.as_deref_mut() {
            let (alpha, _) = sigmoid_pair(h);
            let r = (alpha - c) / n;
            g[0] += r;
            for (gi, zi) in g[1..].iter_mut().zip(&p.z) {
                *gi += r * zi;
            }
        }
    }
    let mut reg = 0.0;
    if lambda != 0.0 {
        reg = lambda * nu.iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = grad {
            for (gi, v) in g.iter_mut().zip(nu) {
                *gi += 2.0 * lambda * v;
            }
        }
    }
    data / n + reg
}

/// Cross-validates (unless the grid has a single point) and fits the chosen
/// hyperparameters on the whole of `train` with `spec.seed`.
pub fn train(train: &WindowedDataset, spec: &TrainSpec) -> Result<FittedModel> {
    spec.validate()?;
    if spec.method == Method::Persist {
        return Ok(train_persist());
    }
    let chosen = cross_validate(train, spec)?;
    let mut model = fit(spec.method, train, &chosen.chosen, spec.seed)?;
    model.warnings.extend(chosen.warnings);
    Ok(model)
}

pub fn train_itme(train_set: &WindowedDataset, spec: &TrainSpec) -> Result<FittedModel> {
    train(
        train_set,
        &TrainSpec {
            method: Method::Itme,
            ..spec.clone()
        },
    )
}

pub fn train_stme(train_set: &WindowedDataset, spec: &TrainSpec, weighted: bool) -> Result<FittedModel> {
    let method = if weighted { Method::Stmeic } else { Method::Stme };
    train(train_set, &TrainSpec { method, ..spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenConfig};
    use crate::ordinal::OrdinalScale;
    use crate::window::build_windows;

    fn synthetic(seed: u64, steps: usize, persistence: f64, strength: f64) -> WindowedDataset {
        let cfg = GenConfig {
            num_steps: steps,
            num_classes: 3,
            feature_dim: 2,
            base_persistence: persistence,
            switch_signal_strength: strength,
            seed,
            ..GenConfig::default()
        };
        build_windows(&generate(&cfg).unwrap(), 1, 1, &OrdinalScale::with_classes(3).unwrap()).unwrap()
    }

    fn hyper(m: usize, iter: usize, lambda: f64) -> Hyperparams {
        Hyperparams {
            hidden_units: Some(m),
            iter,
            lambda,
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("stmeic".parse::<Method>().unwrap(), Method::Stmeic);
        assert!("MoE".parse::<Method>().is_err());
    }

    #[test]
    fn grid_order_breaks_ties() {
        let grid = Grid {
            m: vec![10, 5],
            iter: vec![500, 250],
            lambda: vec![0.0, 0.001],
        };
        let pts = grid.points(Method::Stme).unwrap();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], hyper(5, 250, 0.001));
        assert_eq!(pts[1], hyper(5, 250, 0.0));
        assert_eq!(pts[7], hyper(10, 500, 0.0));
        let pom = grid.points(Method::Pom).unwrap();
        assert_eq!(pom.len(), 2);
        assert!(pom.iter().all(|h| h.hidden_units.is_none() && h.lambda == 0.0));
    }

    #[test]
    fn persist_predicts_current_label() {
        let ds = synthetic(1, 300, 0.8, 0.0);
        let model = train_persist();
        let pred = model.predict_all(&ds).unwrap();
        assert!(pred.iter().zip(&ds.patterns).all(|(p, x)| *p == x.current_label));
        assert_eq!(model.gate_alpha(&ds.patterns[0].z).unwrap(), None);
    }

    #[test]
    fn problematic_matches_count() {
        let ds = synthetic(2, 400, 0.7, 1.0);
        let idx = problematic_indices(&ds);
        let brute = ds.patterns.iter().filter(|p| p.target != p.current_label).count();
        assert_eq!(idx.len(), brute);
        assert!(idx
            .iter()
            .all(|&i| ds.patterns[i].target != ds.patterns[i].current_label));
    }

    #[test]
    fn itme_rejects_persistent_data() {
        let ds = synthetic(3, 200, 1.0, 0.0);
        let err = fit(Method::Itme, &ds, &hyper(2, 10, 0.0), 0).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn itme_gate_prefers_persistence_on_persistent_data() {
        let train = synthetic(4, 1500, 0.95, 0.0);
        let test = synthetic(5, 500, 0.95, 0.0);
        let model = fit(Method::Itme, &train, &hyper(2, 200, 0.0), 0).unwrap();
        let high = test
            .patterns
            .iter()
            .filter(|p| model.gate_alpha(&p.z).unwrap().unwrap() > 0.5)
            .count();
        assert!(high as f64 > 0.9 * test.len() as f64);
    }

    #[test]
    fn gate_objective_gradient() {
        let ds = synthetic(6, 80, 0.7, 1.0);
        let labels: Vec<f64> = ds
            .patterns
            .iter()
            .map(|p| f64::from(u8::from(p.target == p.current_label)))
            .collect();
        let nu: Vec<f64> = (0..=ds.input_dim()).map(|i| 0.1 * (i as f64 - 3.0)).collect();
        let mut g = vec![0.0; nu.len()];
        gate_objective(&ds.patterns, &labels, &nu, 0.01, Some(&mut g));
        for i in 0..nu.len() {
            let mut a = nu.clone();
            let mut b = nu.clone();
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (gate_objective(&ds.patterns, &labels, &a, 0.01, None)
                - gate_objective(&ds.patterns, &labels, &b, 0.01, None))
                / 2e-6;
            assert!((fd - g[i]).abs() <= 1e-6 * fd.abs().max(1e-2), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn heavy_regularization_shrinks_parameters() {
        let ds = synthetic(7, 300, 0.8, 2.0);
        let norm = |m: &FittedModel| match &m.params {
            ModelParams::Mixture(p) => p.to_flat().iter().map(|v| v * v).sum::<f64>(),
            _ => unreachable!(),
        };
        let free = fit(Method::Stme, &ds, &hyper(3, 100, 0.0), 9).unwrap();
        let tight = fit(Method::Stme, &ds, &hyper(3, 100, 1e3), 9).unwrap();
        assert!(norm(&tight) < 0.1 * norm(&free), "{} vs {}", norm(&tight), norm(&free));
    }

    #[test]
    fn checkpoints_match_separate_fits() {
        let ds = synthetic(8, 200, 0.8, 2.0);
        for method in [Method::Pom, Method::Nnpom, Method::Itme, Method::Stme, Method::Stmeic] {
            let both = fit_checkpoints(method, &ds, Some(2), 0.001, &[20, 50], 4).unwrap();
            let h = Hyperparams {
                hidden_units: Some(2),
                iter: 20,
                lambda: 0.001,
            };
            assert_eq!(both[0], fit(method, &ds, &h, 4).unwrap(), "{method}");
        }
    }

    #[test]
    fn predictions_are_pure() {
        let ds = synthetic(9, 200, 0.8, 2.0);
        let model = fit(Method::Stmeic, &ds, &hyper(3, 30, 0.0), 1).unwrap();
        assert_eq!(model.predict_all(&ds).unwrap(), model.predict_all(&ds).unwrap());
    }
}
