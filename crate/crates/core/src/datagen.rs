//! Synthetic persistent ordinal series with feature-predictable switches.
//!
//! Labels follow a birth-death chain on `C_1 ≺ … ≺ C_Q`. At each hour the
//! chain either stays or moves one class up or down, reflecting at the ends.
//! Per-class switch probabilities `m_y` are chosen so that the stationary
//! distribution equals `class_marginals` and the overall switch rate equals
//! `1 - base_persistence`. The switch flow `π_y m_y` is `c (1, 2, …, 2, 1)`
//! with `c = (1 - p) / (2Q - 2)`, which satisfies detailed balance when
//! interior classes move up or down with probability 1/2 each.
//!
//! The features at hour `t` announce the transition `y_t → y_{t+1}`:
//!
//! - `x_0 ~ N(±s/2, 1)`: `+` when a switch follows, `-` otherwise
//! - `x_1 ~ N(±s/2, 1)`: `+` for an upward switch, `-` for a downward one, `N(0, 1)` without a switch
//! - remaining columns are `N(0, 1)` noise
//!
//! where `s` is `switch_signal_strength`. Because the generative law is known,
//! the Bayes-optimal one-step accuracy can be estimated exactly from
//! posteriors (see [`oracle_bayes_accuracy`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordinal::OrdinalLabel;
use crate::window::TimeSeriesRecord;

/// Missing fields take their `Default` values when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub num_steps: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub base_persistence: f64,
    pub switch_signal_strength: f64,
    /// Uniform when empty.
    pub class_marginals: Vec<f64>,
    pub gap_probability: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_steps: 10_000,
            num_classes: 4,
            feature_dim: 4,
            base_persistence: 0.9,
            switch_signal_strength: 0.0,
            class_marginals: Vec::new(),
            gap_probability: 0.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn marginals(&self) -> Vec<f64> {
        if self.class_marginals.is_empty() {
            vec![1.0 / self.num_classes as f64; self.num_classes]
        } else {
            self.class_marginals.clone()
        }
    }

    /// Probability of leaving each class in one step.
    pub fn switch_rates(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let q = self.num_classes;
        let c = (1.0 - self.base_persistence) / (2 * q - 2) as f64;
        let rates: Vec<f64> = self
            .marginals()
            .iter()
            .enumerate()
            .map(|(y, pi)| {
                let flow = if y == 0 || y == q - 1 { c } else { 2.0 * c };
                flow / pi
            })
            .collect();
        if let Some((y, m)) = rates.iter().enumerate().find(|(_, m)| **m > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "class C{} would need switch probability {m:.4} > 1; raise base_persistence or its marginal",
                y + 1
            )));
        }
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_classes < 2 {
            return bad(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if self.feature_dim < 2 {
            return bad(format!("feature_dim must be at least 2, got {}", self.feature_dim));
        }
        if !(self.base_persistence > 0.0 && self.base_persistence <= 1.0) {
            return bad(format!(
                "base_persistence must lie in (0, 1], got {}",
                self.base_persistence
            ));
        }
        if !(self.switch_signal_strength >= 0.0 && self.switch_signal_strength.is_finite()) {
            return bad(format!(
                "switch_signal_strength must be finite and non-negative, got {}",
                self.switch_signal_strength
            ));
        }
        if !(0.0..1.0).contains(&self.gap_probability) {
            return bad(format!(
                "gap_probability must lie in [0, 1), got {}",
                self.gap_probability
            ));
        }
        if !self.class_marginals.is_empty() {
            if self.class_marginals.len() != self.num_classes {
                return bad(format!(
                    "class_marginals has {} entries for {} classes",
                    self.class_marginals.len(),
                    self.num_classes
                ));
            }
            let sum: f64 = self.class_marginals.iter().sum();
            if self.class_marginals.iter().any(|p| p.is_nan() || *p <= 0.0) || (sum - 1.0).abs() > 1e-9 {
                return bad("class_marginals must be positive and sum to 1".into());
            }
        }
        Ok(())
    }
}

/// One transition of the latent chain with its announcing features.
struct Step {
    label: usize,
    /// -1, 0 or +1.
    moves: i8,
    features: Vec<f64>,
}

struct Chain {
    cfg: GenConfig,
    rates: Vec<f64>,
    marginals: Vec<f64>,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
}

impl Chain {
    fn new(cfg: &GenConfig) -> Result<Self> {
        Ok(Chain {
            rates: cfg.switch_rates()?,
            marginals: cfg.marginals(),
            cfg: cfg.clone(),
            noise: Normal::new(0.0, 1.0).expect("unit normal"),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    fn initial(&mut self) -> usize {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (y, p) in self.marginals.iter().enumerate() {
            acc += p;
            if u < acc {
                return y;
            }
        }
        self.marginals.len() - 1
    }

    fn step(&mut self, label: usize) -> Step {
        let q = self.cfg.num_classes;
        let half = self.cfg.switch_signal_strength / 2.0;
        let switch = self.rng.random::<f64>() < self.rates[label];
        let moves = if !switch {
            0
        } else if label == 0 {
            1
        } else if label == q - 1 {
            -1
        } else if self.rng.random::<bool>() {
            1
        } else {
            -1
        };
        let mut features = Vec::with_capacity(self.cfg.feature_dim);
        let sign = if switch { 1.0 } else { -1.0 };
        features.push(sign * half + self.noise.sample(&mut self.rng));
        features.push(moves as f64 * half + self.noise.sample(&mut self.rng));
        for _ in 2..self.cfg.feature_dim {
            features.push(self.noise.sample(&mut self.rng));
        }
        Step { label, moves, features }
    }
}

/// Generates `num_steps` hourly records (fewer after gap removal).
pub fn generate(cfg: &GenConfig) -> Result<Vec<TimeSeriesRecord>> {
    let mut chain = Chain::new(cfg)?;
    let mut label = chain.initial();
    let mut out = Vec::with_capacity(cfg.num_steps);
    for t in 0..cfg.num_steps {
        let step = chain.step(label);
        let dropped = cfg.gap_probability > 0.0 && chain.rng.random::<f64>() < cfg.gap_probability;
        if !dropped {
            out.push(TimeSeriesRecord {
                timestamp: t as i64,
                features: step.features,
                raw_value: None,
                label: OrdinalLabel::from_index(step.label),
            });
        }
        label = (step.label as i64 + step.moves as i64) as usize;
    }
    Ok(out)
}

fn normal_density(x: f64, mean: f64) -> f64 {
    (-(x - mean) * (x - mean) / 2.0).exp()
}

/// Monte-Carlo estimate of the best achievable one-step accuracy given the
/// current label and features, averaging the exact maximum posterior over
/// `num_steps` simulated transitions.
pub fn oracle_bayes_accuracy(cfg: &GenConfig) -> Result<f64> {
    let mut chain = Chain::new(cfg)?;
    let q = cfg.num_classes;
    let half = cfg.switch_signal_strength / 2.0;
    let mut label = chain.initial();
    let mut total = 0.0;
    let steps = cfg.num_steps.max(1);
    for _ in 0..steps {
        let step = chain.step(label);
        let m = chain.rates[label];
        let (u, v) = (step.features[0], step.features[1]);
        // joint densities up to the shared N(0,1) factors of the noise columns
        let stay = (1.0 - m) * normal_density(u, -half) * normal_density(v, 0.0);
        let switch = m * normal_density(u, half);
        let (up, down) = if label == 0 {
            (switch * normal_density(v, half), 0.0)
        } else if label == q - 1 {
            (0.0, switch * normal_density(v, -half))
        } else {
            (
                0.5 * switch * normal_density(v, half),
                0.5 * switch * normal_density(v, -half),
            )
        };
        let norm = stay + up + down;
        total += stay.max(up).max(down) / norm;
        label = (step.label as i64 + step.moves as i64) as usize;
    }
    Ok(total / steps as f64)
}
