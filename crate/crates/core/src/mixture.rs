//! Persistence-gated mixture of an ordinal expert and the persistence forecast.
//!
//! For a window `z` with current label `y_t` the class probabilities are
//!
//! ```text
//! p_q = α(z) · [y_t = C_q] + (1 - α(z)) · p_net,q(z)
//! α(z) = σ(ν · (1, z))
//! ```
//!
//! Training minimizes the class-weighted cross-entropy plus `λ Σ s_i²` over
//! every parameter `s = (ν, κ)`. The flat parameter vector stores `ν` first,
//! followed by the expert's own flat layout (see [`crate::nnpom`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{affine, sigmoid, sigmoid_pair};
use crate::nnpom::{self, NnpomConfig, NnpomParams, Workspace};
use crate::ordinal::OrdinalLabel;
use crate::window::{WindowedDataset, WindowedPattern};

/// Lower bound applied to probabilities inside the logarithm and the `1/p` factor.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    gate: Vec<f64>,
    expert: NnpomParams,
}

impl MixtureParams {
    pub fn new(gate: Vec<f64>, expert: NnpomParams) -> Result<Self> {
        let expected = expert.config().input_dim + 1;
        if gate.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: gate.len(),
            });
        }
        Ok(MixtureParams { gate, expert })
    }

    /// Gate weights uniform in `[-0.1, 0.1]`, expert per [`nnpom::init_params`] rules.
    pub fn init(cfg: &NnpomConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gate = (0..=cfg.input_dim).map(|_| rng.random_range(-0.1..=0.1)).collect();
        let expert = nnpom::init_params_with(cfg, &mut rng);
        MixtureParams { gate, expert }
    }

    pub fn from_flat(cfg: &NnpomConfig, flat: &[f64]) -> Result<Self> {
        let expected = num_params(cfg);
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: flat.len(),
            });
        }
        let (gate, kappa) = flat.split_at(cfg.input_dim + 1);
        Ok(MixtureParams {
            gate: gate.to_vec(),
            expert: NnpomParams::from_vec(*cfg, kappa.to_vec())?,
        })
    }

    /// `ν` followed by the expert parameters.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.gate.clone();
        v.extend_from_slice(self.expert.as_slice());
        v
    }

    pub fn gate_weights(&self) -> &[f64] {
        &self.gate
    }

    pub fn gate_weights_mut(&mut self) -> &mut [f64] {
        &mut self.gate
    }

    pub fn expert(&self) -> &NnpomParams {
        &self.expert
    }

    pub fn expert_mut(&mut self) -> &mut NnpomParams {
        &mut self.expert
    }

    pub fn config(&self) -> &NnpomConfig {
        self.expert.config()
    }

    pub fn alpha(&self, z: &[f64]) -> Result<f64> {
        gate(z, &self.gate)
    }

    pub fn probs(&self, pattern: &WindowedPattern) -> Result<Vec<f64>> {
        mixture_probs(pattern, self)
    }

    pub fn predict(&self, pattern: &WindowedPattern) -> Result<OrdinalLabel> {
        predict(pattern, self)
    }
}

pub fn num_params(cfg: &NnpomConfig) -> usize {
    cfg.input_dim + 1 + cfg.num_params()
}

/// Probability that the persistence expert is trusted: `σ(ν · (1, z))`.
pub fn gate(z: &[f64], nu: &[f64]) -> Result<f64> {
    if nu.len() != z.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: z.len() + 1,
            actual: nu.len(),
        });
    }
    Ok(sigmoid(affine(nu, z)))
}

pub fn mixture_probs(pattern: &WindowedPattern, params: &MixtureParams) -> Result<Vec<f64>> {
    if params.gate.len() != pattern.z.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: params.gate.len() - 1,
            actual: pattern.z.len(),
        });
    }
    let (alpha, one_minus_alpha) = sigmoid_pair(affine(&params.gate, &pattern.z));
    let mut p = params.expert.class_probs(&pattern.z)?;
    for v in &mut p {
        *v *= one_minus_alpha;
    }
    let c = pattern.current_label.index();
    // alpha and 1 - alpha are rounded separately
    p[c] = (p[c] + alpha).min(1.0);
    Ok(p)
}

/// Index of the largest probability; ties go to the lowest class.
pub fn argmax_label(probs: &[f64]) -> OrdinalLabel {
    let mut best = 0;
    for (q, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = q;
        }
    }
    OrdinalLabel::from_index(best)
}

/// Maximum a posteriori class.
pub fn predict(pattern: &WindowedPattern, params: &MixtureParams) -> Result<OrdinalLabel> {
    Ok(argmax_label(&mixture_probs(pattern, params)?))
}

/// Class costs and L2 strength of the training objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub class_weights: Vec<f64>,
    pub lambda: f64,
    pub weighted: bool,
}

impl LossConfig {
    /// `o_q = 1` for every class.
    pub fn unweighted(num_classes: usize, lambda: f64) -> Self {
        LossConfig {
            class_weights: vec![1.0; num_classes],
            lambda,
            weighted: false,
        }
    }

    /// `o_q = 1 - N_q / N` from the targets of `ds`.
    pub fn weighted(ds: &WindowedDataset, lambda: f64) -> Self {
        let counts = ds.class_distribution();
        let n = ds.len() as f64;
        LossConfig {
            class_weights: counts.iter().map(|&c| 1.0 - c as f64 / n).collect(),
            lambda,
            weighted: true,
        }
    }

    pub fn for_dataset(ds: &WindowedDataset, weighted: bool, lambda: f64) -> Self {
        if weighted {
            Self::weighted(ds, lambda)
        } else {
            Self::unweighted(ds.num_classes(), lambda)
        }
    }
}

/// Regularized weighted cross-entropy of the mixture on `ds`.
pub fn loss(ds: &WindowedDataset, params: &MixtureParams, cfg: &LossConfig) -> f64 {
    mixture_objective(&ds.patterns, params.config(), &params.to_flat(), cfg, None)
}

/// Analytic gradient of [`loss`] in the flat `(ν, κ)` order.
pub fn loss_gradient(ds: &WindowedDataset, params: &MixtureParams, cfg: &LossConfig) -> Vec<f64> {
    let flat = params.to_flat();
    let mut grad = vec![0.0; flat.len()];
    mixture_objective(&ds.patterns, params.config(), &flat, cfg, Some(&mut grad));
    grad
}

fn add_l2(flat: &[f64], lambda: f64, grad: Option<&mut [f64]>) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    if let Some(g) = grad {
        for (gi, s) in g.iter_mut().zip(flat) {
            *gi += 2.0 * lambda * s;
        }
    }
    lambda * flat.iter().map(|s| s * s).sum::<f64>()
}

/// Loss (and optionally its gradient, overwriting `grad`) for the flat mixture vector.
pub(crate) fn mixture_objective(
    patterns: &[WindowedPattern],
    cfg: &NnpomConfig,
    flat: &[f64],
    loss_cfg: &LossConfig,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let gate_len = cfg.input_dim + 1;
    let (nu, kappa) = flat.split_at(gate_len);
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let n = patterns.len() as f64;
    let mut ws = Workspace::new(cfg);
    let mut data = 0.0;
    for p in patterns {
        let y = p.target.index();
        let (alpha, one_minus_alpha) = sigmoid_pair(affine(nu, &p.z));
        nnpom::forward(cfg, kappa, &p.z, &mut ws);
        let p_net = ws.prob(y);
        let persist = if p.current_label == p.target { 1.0 } else { 0.0 };
        let prob = alpha * persist + one_minus_alpha * p_net;
        let w = loss_cfg.class_weights[y];
        let clamped = prob.max(PROB_FLOOR);
        data -= w * clamped.ln();
        if let Some(g) = grad.as_deref_mut() {
            let coef = -w / (n * clamped);
            let d_gate = coef * alpha * one_minus_alpha * (persist - p_net);
            g[0] += d_gate;
            for (gi, zi) in g[1..gate_len].iter_mut().zip(&p.z) {
                *gi += d_gate * zi;
            }
            nnpom::accumulate_prob_gradient(cfg, kappa, &p.z, &ws, y, coef * one_minus_alpha, &mut g[gate_len..]);
        }
    }
    data / n + add_l2(flat, loss_cfg.lambda, grad)
}

/// Same objective for the expert alone (the gate removed), used by the
/// standalone POM/NNPOM baselines and the independently trained expert.
pub(crate) fn expert_objective(
    patterns: &[WindowedPattern],
    cfg: &NnpomConfig,
    flat: &[f64],
    loss_cfg: &LossConfig,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let n = patterns.len() as f64;
    let mut ws = Workspace::new(cfg);
    let mut data = 0.0;
    for p in patterns {
        let y = p.target.index();
        nnpom::forward(cfg, flat, &p.z, &mut ws);
        let w = loss_cfg.class_weights[y];
        let clamped = ws.prob(y).max(PROB_FLOOR);
        data -= w * clamped.ln();
        if let Some(g) = grad.as_deref_mut() {
            nnpom::accumulate_prob_gradient(cfg, flat, &p.z, &ws, y, -w / (n * clamped), g);
        }
    }
    data / n + add_l2(flat, loss_cfg.lambda, grad)
}
