//! Proportional-odds ordinal head with a latent projection.
//!
//! The latent value `f(z)` is either a one-hidden-layer sigmoid network
//! (`f = Σ_j β_j σ(w_j · (1, z))`) or, for the linear baseline, `θ · (1, z)`.
//! Cumulative probabilities are `P(y <= C_q) = σ(b_q - f)` with thresholds
//! `b_q = b_1 + Σ_{j=2..q} a_j²`, which keeps them ordered without constraints.
//! A larger latent value moves mass toward higher classes.
//!
//! Parameters live in one flat vector so the optimizer can work on them
//! directly. Layout for the network: hidden weights `W` row-major
//! (`M × (I+1)`, bias first in each row), then `β` (`M`), then `b_1`, then
//! `a_2 .. a_{Q-1}`. The linear head stores `θ` (`I+1`) in place of `W, β`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{affine, sigmoid_pair};

/// Form of the latent projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Projection {
    /// `θ · (1, z)`: the proportional odds model.
    Linear,
    /// One hidden layer of `units` sigmoid neurons.
    Hidden { units: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NnpomConfig {
    pub input_dim: usize,
    pub num_classes: usize,
    pub projection: Projection,
}

impl NnpomConfig {
    pub fn new(input_dim: usize, hidden_units: usize, num_classes: usize) -> Result<Self> {
        Self::validated(input_dim, num_classes, Projection::Hidden { units: hidden_units })
    }

    /// Linear latent projection (POM).
    pub fn linear(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::validated(input_dim, num_classes, Projection::Linear)
    }

    fn validated(input_dim: usize, num_classes: usize, projection: Projection) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input dimension must be positive".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if let Projection::Hidden { units: 0 } = projection {
            return Err(Error::InvalidConfig("hidden units must be positive".into()));
        }
        Ok(NnpomConfig {
            input_dim,
            num_classes,
            projection,
        })
    }

    pub fn hidden_units(&self) -> usize {
        match self.projection {
            Projection::Linear => 0,
            Projection::Hidden { units } => units,
        }
    }

    /// Number of parameters in the latent projection.
    pub fn projection_len(&self) -> usize {
        let row = self.input_dim + 1;
        match self.projection {
            Projection::Linear => row,
            Projection::Hidden { units } => units * row + units,
        }
    }

    /// Offset of `b_1` in the flat vector.
    pub fn threshold_offset(&self) -> usize {
        self.projection_len()
    }

    pub fn num_params(&self) -> usize {
        self.projection_len() + 1 + (self.num_classes - 2)
    }
}

/// Flat parameter record for the ordinal head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnpomParams {
    config: NnpomConfig,
    values: Vec<f64>,
}

impl NnpomParams {
    pub fn from_vec(config: NnpomConfig, values: Vec<f64>) -> Result<Self> {
        if values.len() != config.num_params() {
            return Err(Error::DimensionMismatch {
                expected: config.num_params(),
                actual: values.len(),
            });
        }
        Ok(NnpomParams { config, values })
    }

    pub fn config(&self) -> &NnpomConfig {
        &self.config
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `W` row-major for the network, `θ` for the linear head.
    pub fn hidden_weights(&self) -> &[f64] {
        match self.config.projection {
            Projection::Linear => &self.values[..self.config.input_dim + 1],
            Projection::Hidden { units } => &self.values[..units * (self.config.input_dim + 1)],
        }
    }

    /// `β`; empty for the linear head.
    pub fn output_weights(&self) -> &[f64] {
        match self.config.projection {
            Projection::Linear => &[],
            Projection::Hidden { units } => {
                let start = units * (self.config.input_dim + 1);
                &self.values[start..start + units]
            }
        }
    }

    pub fn first_threshold(&self) -> f64 {
        self.values[self.config.threshold_offset()]
    }

    pub fn paddings(&self) -> &[f64] {
        &self.values[self.config.threshold_offset() + 1..]
    }

    pub fn thresholds(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.config.num_classes - 1];
        thresholds_into(&self.config, &self.values, &mut out);
        out
    }

    pub fn latent(&self, z: &[f64]) -> Result<f64> {
        check_dim(&self.config, z)?;
        let mut ws = Workspace::new(&self.config);
        Ok(forward(&self.config, &self.values, z, &mut ws))
    }

    pub fn class_probs(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(&self.config, z)?;
        let mut ws = Workspace::new(&self.config);
        forward(&self.config, &self.values, z, &mut ws);
        let mut p = vec![0.0; self.config.num_classes];
        ws.probs_into(&mut p);
        Ok(p)
    }

    /// `∂p_q/∂s` for every class `q` (rows) and parameter `s` (columns, flat order).
    pub fn prob_gradients(&self, z: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(&self.config, z)?;
        let mut ws = Workspace::new(&self.config);
        forward(&self.config, &self.values, z, &mut ws);
        Ok((0..self.config.num_classes)
            .map(|c| {
                let mut g = vec![0.0; self.config.num_params()];
                accumulate_prob_gradient(&self.config, &self.values, z, &ws, c, 1.0, &mut g);
                g
            })
            .collect())
    }
}

fn check_dim(cfg: &NnpomConfig, z: &[f64]) -> Result<()> {
    if z.len() != cfg.input_dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.input_dim,
            actual: z.len(),
        });
    }
    Ok(())
}

/// Deterministic initialization: projection weights uniform in `[-0.1, 0.1]`,
/// `b_1 = 0`, paddings uniform in `[0.1, 1.1]`.
pub fn init_params(cfg: &NnpomConfig, seed: u64) -> NnpomParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_params_with(cfg, &mut rng)
}

pub(crate) fn init_params_with<R: Rng>(cfg: &NnpomConfig, rng: &mut R) -> NnpomParams {
    let mut values = Vec::with_capacity(cfg.num_params());
    values.extend((0..cfg.projection_len()).map(|_| rng.random_range(-0.1..=0.1)));
    values.push(0.0);
    values.extend((0..cfg.num_classes - 2).map(|_| rng.random_range(0.1..=1.1)));
    NnpomParams { config: *cfg, values }
}

/// Scratch buffers reused across patterns.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    /// Hidden activations `σ(w_j · (1, z))`.
    hidden: Vec<f64>,
    /// Their derivatives `σ'(w_j · (1, z))`.
    hidden_slope: Vec<f64>,
    thresholds: Vec<f64>,
    /// Cumulative probabilities `σ(b_q - f)`, `q = 1..Q-1`.
    cumulative: Vec<f64>,
    /// Complements `σ(f - b_q)`.
    survival: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(cfg: &NnpomConfig) -> Self {
        Workspace {
            hidden: vec![0.0; cfg.hidden_units()],
            hidden_slope: vec![0.0; cfg.hidden_units()],
            thresholds: vec![0.0; cfg.num_classes - 1],
            cumulative: vec![0.0; cfg.num_classes - 1],
            survival: vec![0.0; cfg.num_classes - 1],
        }
    }

    /// Class probability `q` (0-based) from the last forward pass.
    pub(crate) fn prob(&self, q: usize) -> f64 {
        let last = self.cumulative.len();
        if q == 0 {
            self.cumulative[0]
        } else if q == last {
            self.survival[last - 1]
        } else {
            // σ(u) - σ(l) = σ(u) σ(-l) (1 - e^{l-u}) avoids cancellation near 0 and 1
            let gap = self.thresholds[q - 1] - self.thresholds[q];
            self.cumulative[q] * self.survival[q - 1] * -gap.exp_m1()
        }
    }

    /// `σ'(b_q - f)` for threshold `q` (0-based).
    fn slope(&self, q: usize) -> f64 {
        self.cumulative[q] * self.survival[q]
    }

    pub(crate) fn probs_into(&self, out: &mut [f64]) {
        for (q, p) in out.iter_mut().enumerate() {
            *p = self.prob(q);
        }
    }
}

fn thresholds_into(cfg: &NnpomConfig, values: &[f64], out: &mut [f64]) {
    let off = cfg.threshold_offset();
    let mut b = values[off];
    out[0] = b;
    for (slot, a) in out[1..].iter_mut().zip(&values[off + 1..]) {
        b += a * a;
        *slot = b;
    }
}

/// Forward pass; returns the latent value and fills `ws`.
pub(crate) fn forward(cfg: &NnpomConfig, values: &[f64], z: &[f64], ws: &mut Workspace) -> f64 {
    let row = cfg.input_dim + 1;
    let f = match cfg.projection {
        Projection::Linear => affine(&values[..row], z),
        Projection::Hidden { units } => {
            let beta = &values[units * row..units * row + units];
            let mut f = 0.0;
            for j in 0..units {
                let (h, h_neg) = sigmoid_pair(affine(&values[j * row..(j + 1) * row], z));
                ws.hidden[j] = h;
                ws.hidden_slope[j] = h * h_neg;
                f += beta[j] * h;
            }
            f
        }
    };
    thresholds_into(cfg, values, &mut ws.thresholds);
    for (q, b) in ws.thresholds.iter().enumerate() {
        let (c, s) = sigmoid_pair(b - f);
        ws.cumulative[q] = c;
        ws.survival[q] = s;
    }
    f
}

/// Adds `scale · ∂p_class/∂s` to `grad` (flat layout). Requires a prior
/// [`forward`] on the same `z` and `values`.
pub(crate) fn accumulate_prob_gradient(
    cfg: &NnpomConfig,
    values: &[f64],
    z: &[f64],
    ws: &Workspace,
    class: usize,
    scale: f64,
    grad: &mut [f64],
) {
    let last = cfg.num_classes - 1;
    // σ'(b_q - f) for the upper and lower cumulative terms of p_class
    let upper = if class < last { ws.slope(class) } else { 0.0 };
    let lower = if class > 0 { ws.slope(class - 1) } else { 0.0 };
    let d_threshold = scale * (upper - lower);
    let d_latent = -d_threshold;

    let row = cfg.input_dim + 1;
    match cfg.projection {
        Projection::Linear => {
            grad[0] += d_latent;
            for (g, zi) in grad[1..row].iter_mut().zip(z) {
                *g += d_latent * zi;
            }
        }
        Projection::Hidden { units } => {
            if d_latent != 0.0 {
                let beta_off = units * row;
                for j in 0..units {
                    let h = ws.hidden[j];
                    grad[beta_off + j] += d_latent * h;
                    let dw = d_latent * values[beta_off + j] * ws.hidden_slope[j];
                    let w_grad = &mut grad[j * row..(j + 1) * row];
                    w_grad[0] += dw;
                    for (g, zi) in w_grad[1..].iter_mut().zip(z) {
                        *g += dw * zi;
                    }
                }
            }
        }
    }

    let off = cfg.threshold_offset();
    grad[off] += d_threshold;
    // padding a_m (0-based, m = j - 2) enters b_t for every 0-based threshold t > m
    for (m, a) in values[off + 1..].iter().enumerate() {
        let mut d = 0.0;
        if class < last && m < class {
            d += upper;
        }
        if class > 0 && m + 1 < class {
            d -= lower;
        }
        grad[off + 1 + m] += scale * 2.0 * a * d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sigmoid;
    use rand::Rng;

    fn random_params(rng: &mut ChaCha8Rng, cfg: &NnpomConfig) -> NnpomParams {
        let values = (0..cfg.num_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
        NnpomParams::from_vec(*cfg, values).unwrap()
    }

    /// Direct re-evaluation used as an oracle for `latent`.
    fn latent_oracle(p: &NnpomParams, z: &[f64]) -> f64 {
        let cfg = p.config();
        let i = cfg.input_dim;
        match cfg.projection {
            Projection::Linear => {
                let th = p.hidden_weights();
                th[0] + (0..i).map(|k| th[k + 1] * z[k]).sum::<f64>()
            }
            Projection::Hidden { units } => (0..units)
                .map(|j| {
                    let w = &p.hidden_weights()[j * (i + 1)..(j + 1) * (i + 1)];
                    let a = w[0] + (0..i).map(|k| w[k + 1] * z[k]).sum::<f64>();
                    p.output_weights()[j] / (1.0 + (-a).exp())
                })
                .sum(),
        }
    }

    #[test]
    fn zero_output_weights_give_zero_latent() {
        let cfg = NnpomConfig::new(3, 4, 3).unwrap();
        let mut p = init_params(&cfg, 1);
        let off = 4 * 4;
        p.as_mut_slice()[off..off + 4].fill(0.0);
        assert_eq!(p.latent(&[1.0, -2.0, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn single_unit_latent() {
        let cfg = NnpomConfig::new(2, 1, 2).unwrap();
        // W = 0 (row of 3), beta = 2, b_1 = 0
        let p = NnpomParams::from_vec(cfg, vec![0.0, 0.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(p.latent(&[5.0, -5.0]).unwrap(), 1.0);
    }

    #[test]
    fn latent_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for units in [1, 5, 25] {
            let cfg = NnpomConfig::new(6, units, 4).unwrap();
            let p = random_params(&mut rng, &cfg);
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert!((p.latent(&z).unwrap() - latent_oracle(&p, &z)).abs() < 1e-12);
        }
        let cfg = NnpomConfig::linear(6, 3).unwrap();
        let p = random_params(&mut rng, &cfg);
        let z = vec![0.5; 6];
        assert!((p.latent(&z).unwrap() - latent_oracle(&p, &z)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let cfg = NnpomConfig::new(3, 2, 3).unwrap();
        let p = init_params(&cfg, 0);
        assert!(p.latent(&[1.0]).is_err());
        assert!(p.class_probs(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn two_class_at_threshold_is_even() {
        let cfg = NnpomConfig::linear(1, 2).unwrap();
        // f = 0.7 (bias only), b_1 = 0.7
        let p = NnpomParams::from_vec(cfg, vec![0.7, 0.0, 0.7]).unwrap();
        assert_eq!(p.class_probs(&[3.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn saturation_direction() {
        let cfg = NnpomConfig::linear(1, 3).unwrap();
        let high = NnpomParams::from_vec(cfg, vec![1e4, 0.0, 0.0, 1.0]).unwrap();
        let p = high.class_probs(&[0.0]).unwrap();
        assert!(p[0] < 1e-200 && p[1] < 1e-200 && p[2] == 1.0, "{p:?}");
        let low = NnpomParams::from_vec(cfg, vec![-1e4, 0.0, 0.0, 1.0]).unwrap();
        let p = low.class_probs(&[0.0]).unwrap();
        assert!(p[0] == 1.0 && p[1] < 1e-200 && p[2] < 1e-200, "{p:?}");
    }

    #[test]
    fn hand_evaluated_three_class() {
        // f = 0, b_1 = -1, a_2 = sqrt(2) so b_2 = 1
        let cfg = NnpomConfig::linear(1, 3).unwrap();
        let p = NnpomParams::from_vec(cfg, vec![0.0, 0.0, -1.0, 2f64.sqrt()]).unwrap();
        let probs = p.class_probs(&[0.0]).unwrap();
        let s1 = 1.0 / (1.0 + 1.0f64.exp()); // σ(-1 - 0)
        let s2 = 1.0 / (1.0 + (-1.0f64).exp()); // σ(1 - 0)
        let expected = [s1, s2 - s1, 1.0 - s2];
        for (a, b) in probs.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15, "{probs:?} vs {expected:?}");
        }
        assert!((expected[1] - 0.462_117_157_260_009_8).abs() < 1e-15);
    }

    #[test]
    fn thresholds_monotone_after_init() {
        for seed in 0..20 {
            let cfg = NnpomConfig::new(4, 3, 5).unwrap();
            let p = init_params(&cfg, seed);
            let b = p.thresholds();
            assert!(b.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(p.first_threshold(), 0.0);
            assert!(p.paddings().iter().all(|a| (0.1..=1.1).contains(a)));
            assert!(p.hidden_weights().iter().all(|w| w.abs() <= 0.1));
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = NnpomConfig::new(4, 3, 4).unwrap();
        assert_eq!(init_params(&cfg, 7), init_params(&cfg, 7));
        assert_ne!(init_params(&cfg, 7), init_params(&cfg, 8));
    }

    #[test]
    fn gradient_zero_cases() {
        let cfg = NnpomConfig::new(3, 2, 4).unwrap();
        let mut p = init_params(&cfg, 2);
        let z = [0.3, -0.4, 1.2];
        // beta = 0 -> no gradient through W
        p.as_mut_slice()[8..10].fill(0.0);
        // a_j = 0 -> no gradient through paddings
        let off = cfg.threshold_offset();
        p.as_mut_slice()[off + 1..].fill(0.0);
        for g in p.prob_gradients(&z).unwrap() {
            assert!(g[..8].iter().all(|&v| v == 0.0));
            assert!(g[off + 1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for trial in 0..120 {
            let units = [1, 5, 25][trial % 3];
            let q = [2, 3, 4][(trial / 3) % 3];
            let cfg = if trial % 10 == 9 {
                NnpomConfig::linear(5, q).unwrap()
            } else {
                NnpomConfig::new(5, units, q).unwrap()
            };
            let p = random_params(&mut rng, &cfg);
            let z: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let analytic = p.prob_gradients(&z).unwrap();
            for s in 0..cfg.num_params() {
                let mut plus = p.clone();
                plus.as_mut_slice()[s] += h;
                let mut minus = p.clone();
                minus.as_mut_slice()[s] -= h;
                let pp = plus.class_probs(&z).unwrap();
                let pm = minus.class_probs(&z).unwrap();
                for c in 0..q {
                    let numeric = (pp[c] - pm[c]) / (2.0 * h);
                    let a = analytic[c][s];
                    let abs = (a - numeric).abs();
                    if abs < 1e-8 {
                        continue;
                    }
                    let rel = abs / a.abs().max(numeric.abs());
                    worst = worst.max(rel);
                    assert!(rel < 1e-5, "trial {trial} class {c} param {s}: {a} vs {numeric}");
                }
            }
        }
        assert!(worst < 1e-5);
    }

    #[test]
    fn probabilities_normalized_and_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let q = rng.random_range(2..=5);
            let cfg = NnpomConfig::linear(3, q).unwrap();
            let p = random_params(&mut rng, &cfg);
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let probs = p.class_probs(&z).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(probs.iter().all(|&v| (0.0..=1.0).contains(&v)));

            // shift the latent (bias) and b_1 together
            let shift = rng.random_range(-5.0..5.0);
            let mut moved = p.clone();
            moved.as_mut_slice()[0] += shift;
            moved.as_mut_slice()[cfg.threshold_offset()] += shift;
            let probs2 = moved.class_probs(&z).unwrap();
            for (a, b) in probs.iter().zip(&probs2) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cumulative_matches_sigmoid() {
        let cfg = NnpomConfig::linear(1, 4).unwrap();
        let p = NnpomParams::from_vec(cfg, vec![0.2, 1.0, -0.5, 0.7, 1.1]).unwrap();
        let z = [0.3];
        let f = 0.2 + 0.3;
        let b = p.thresholds();
        let probs = p.class_probs(&z).unwrap();
        assert!((probs[0] - sigmoid(b[0] - f)).abs() < 1e-15);
        assert!((probs[3] - (1.0 - sigmoid(b[2] - f))).abs() < 1e-15);
    }
}
