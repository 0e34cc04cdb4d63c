//! Central finite-difference verification of the analytic derivatives.
//!
//! Two suites run on random configurations:
//!
//! - `nnpom`: every `∂p_q/∂s` of the ordinal expert against differences of
//!   its class probabilities
//! - `mixture`: the full gradient of the regularized, class-weighted mixture
//!   loss on windowed synthetic data against differences of the loss
//!
//! A component passes when its absolute error is below `abs_tol` or its
//! relative error (against the larger magnitude) is below `rel_tol`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::datagen::{generate, GenConfig};
use crate::error::Result;
use crate::mixture::{loss, loss_gradient, LossConfig, MixtureParams};
use crate::nnpom::{NnpomConfig, NnpomParams, Projection};
use crate::ordinal::OrdinalScale;
use crate::window::build_windows;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Test hook: scales every analytic gradient by 1.01 so the check must fail.
    pub corrupt: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            trials: 100,
            seed: 0,
            step: 1e-6,
            rel_tol: 1e-5,
            abs_tol: 1e-8,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub suite: &'static str,
    pub trial: usize,
    pub block: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub components: usize,
    pub worst_absolute: f64,
    /// Largest relative error among components outside the absolute tolerance.
    pub worst_relative: f64,
    pub worst_block: Option<&'static str>,
    pub failures: Vec<Failure>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Distinct parameter blocks with at least one failure, in first-seen order.
    pub fn failing_blocks(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for f in &self.failures {
            let name = format!("{}/{}", f.suite, f.block);
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }
}

/// Parameter block of index `i` in an expert's flat layout.
pub fn expert_block(cfg: &NnpomConfig, i: usize) -> &'static str {
    let row = cfg.input_dim + 1;
    match cfg.projection {
        Projection::Linear if i < row => "theta",
        Projection::Hidden { units } if i < units * row => "hidden W",
        Projection::Hidden { .. } if i < cfg.projection_len() => "output beta",
        _ if i == cfg.threshold_offset() => "threshold b1",
        _ => "paddings a",
    }
}

/// Parameter block of index `i` in a mixture's flat layout.
pub fn mixture_block(cfg: &NnpomConfig, i: usize) -> &'static str {
    if i <= cfg.input_dim {
        "gate nu"
    } else {
        expert_block(cfg, i - cfg.input_dim - 1)
    }
}

struct Tally<'a> {
    cfg: &'a GradcheckConfig,
    report: GradcheckReport,
}

impl Tally<'_> {
    fn check(
        &mut self,
        suite: &'static str,
        trial: usize,
        block: &'static str,
        index: usize,
        analytic: f64,
        numeric: f64,
    ) {
        let analytic = if self.cfg.corrupt { analytic * 1.01 } else { analytic };
        self.report.components += 1;
        let abs = (analytic - numeric).abs();
        self.report.worst_absolute = self.report.worst_absolute.max(abs);
        if abs < self.cfg.abs_tol {
            return;
        }
        let rel = abs / analytic.abs().max(numeric.abs());
        if rel > self.report.worst_relative {
            self.report.worst_relative = rel;
            self.report.worst_block = Some(block);
        }
        if rel >= self.cfg.rel_tol {
            self.report.failures.push(Failure {
                suite,
                trial,
                block,
                index,
                analytic,
                numeric,
                relative_error: rel,
            });
        }
    }
}

const CLASSES: [usize; 3] = [2, 3, 4];
const UNITS: [usize; 3] = [1, 5, 25];
const DELTAS: [usize; 3] = [0, 1, 3];

/// Runs both suites for `cfg.trials` random configurations each.
///
/// Trial `t` cycles through M ∈ {1, 5, 25}, Q ∈ {2, 3, 4} and Δ ∈ {0, 1, 3},
/// so 27 consecutive trials cover every combination.
#[allow(clippy::needless_range_loop)]
pub fn run(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut tally = Tally {
        cfg,
        report: GradcheckReport {
            components: 0,
            worst_absolute: 0.0,
            worst_relative: 0.0,
            worst_block: None,
            failures: Vec::new(),
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.step;
    for trial in 0..cfg.trials {
        let units = UNITS[trial % 3];
        let q = CLASSES[(trial / 3) % 3];
        let delta = DELTAS[(trial / 9) % 3];

        // expert probabilities
        let dim = 6;
        let ecfg = if trial % 10 == 9 {
            NnpomConfig::linear(dim, q)?
        } else {
            NnpomConfig::new(dim, units, q)?
        };
        let values = (0..ecfg.num_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let p = NnpomParams::from_vec(ecfg, values)?;
        let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let analytic = p.prob_gradients(&z)?;
        for s in 0..ecfg.num_params() {
            let mut plus = p.clone();
            plus.as_mut_slice()[s] += h;
            let mut minus = p.clone();
            minus.as_mut_slice()[s] -= h;
            let pp = plus.class_probs(&z)?;
            let pm = minus.class_probs(&z)?;
            for c in 0..q {
                let numeric = (pp[c] - pm[c]) / (2.0 * h);
                tally.check("nnpom", trial, expert_block(&ecfg, s), s, analytic[c][s], numeric);
            }
        }

        // mixture loss on windowed synthetic data
        let gen = GenConfig {
            num_steps: 12 + delta,
            num_classes: q,
            feature_dim: 2,
            base_persistence: 0.6,
            switch_signal_strength: 1.0,
            seed: rng.random(),
            ..GenConfig::default()
        };
        let ds = build_windows(&generate(&gen)?, delta, 1, &OrdinalScale::with_classes(q)?)?;
        let mcfg = NnpomConfig::new(ds.input_dim(), units, q)?;
        let mut flat = MixtureParams::init(&mcfg, rng.random()).to_flat();
        for v in &mut flat {
            *v += rng.random_range(-0.8..0.8);
        }
        let params = MixtureParams::from_flat(&mcfg, &flat)?;
        let lc = LossConfig {
            class_weights: (0..q).map(|_| rng.random_range(0.2..1.0)).collect(),
            lambda: [0.0, 0.001][trial % 2],
            weighted: true,
        };
        let g = loss_gradient(&ds, &params, &lc);
        for s in 0..flat.len() {
            let mut fp = flat.clone();
            fp[s] += h;
            let mut fm = flat.clone();
            fm[s] -= h;
            let lp = loss(&ds, &MixtureParams::from_flat(&mcfg, &fp)?, &lc);
            let lm = loss(&ds, &MixtureParams::from_flat(&mcfg, &fm)?, &lc);
            let numeric = (lp - lm) / (2.0 * h);
            tally.check("mixture", trial, mixture_block(&mcfg, s), s, g[s], numeric);
        }
    }
    Ok(tally.report)
}
