//! iRprop+ (resilient backpropagation with weight-backtracking).
//!
//! Each parameter keeps its own step size, grown by `eta_plus` while the
//! gradient sign is stable and shrunk by `eta_minus` when it flips. On a flip
//! that coincides with an increase of the objective the previous update of
//! that parameter is undone. Only gradient signs and loss comparisons enter
//! the update, so the method is invariant to positive rescaling of the
//! objective.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpropConfig {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub initial_step: f64,
    pub step_min: f64,
    pub step_max: f64,
}

impl Default for RpropConfig {
    fn default() -> Self {
        RpropConfig {
            eta_plus: 1.2,
            eta_minus: 0.5,
            initial_step: 0.0125,
            step_min: 1e-12,
            step_max: 50.0,
        }
    }
}

impl RpropConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta_plus > 1.0
            && self.eta_minus > 0.0
            && self.eta_minus < 1.0
            && self.step_min > 0.0
            && self.step_min <= self.initial_step
            && self.initial_step <= self.step_max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid iRprop+ constants: {self:?}")))
        }
    }
}

/// Per-parameter optimizer memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RpropState {
    pub step_sizes: Vec<f64>,
    pub prev_gradient: Vec<f64>,
    pub prev_loss: f64,
    pub prev_delta_w: Vec<f64>,
    config: RpropConfig,
}

impl RpropState {
    pub fn new(num_params: usize, config: RpropConfig) -> Self {
        RpropState {
            step_sizes: vec![config.initial_step; num_params],
            prev_gradient: vec![0.0; num_params],
            prev_loss: f64::INFINITY,
            prev_delta_w: vec![0.0; num_params],
            config,
        }
    }

    pub fn config(&self) -> &RpropConfig {
        &self.config
    }

    /// Applies one update to `params` given the gradient and loss evaluated there.
    pub fn step(&mut self, params: &mut [f64], gradient: &[f64], loss: f64) {
        let c = self.config;
        let loss_increased = loss > self.prev_loss;
        for i in 0..params.len() {
            let g = gradient[i];
            let agreement = self.prev_gradient[i] * g;
            if agreement > 0.0 {
                self.step_sizes[i] = (self.step_sizes[i] * c.eta_plus).min(c.step_max);
                let dw = -g.signum() * self.step_sizes[i];
                params[i] += dw;
                self.prev_delta_w[i] = dw;
                self.prev_gradient[i] = g;
            } else if agreement < 0.0 {
                self.step_sizes[i] = (self.step_sizes[i] * c.eta_minus).max(c.step_min);
                if loss_increased {
                    params[i] -= self.prev_delta_w[i];
                }
                self.prev_delta_w[i] = 0.0;
                self.prev_gradient[i] = 0.0;
            } else {
                let dw = if g == 0.0 {
                    0.0
                } else {
                    -g.signum() * self.step_sizes[i]
                };
                params[i] += dw;
                self.prev_delta_w[i] = dw;
                self.prev_gradient[i] = g;
            }
        }
        self.prev_loss = loss;
    }
}

/// Result of a run: the best iterate seen and the full loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimized {
    pub params: Vec<f64>,
    pub best_loss: f64,
    pub best_iteration: usize,
    /// Loss at the initial point followed by one entry per iteration.
    pub trace: Vec<f64>,
}

/// Runs exactly `max_iters` iRprop+ iterations and returns the best iterate.
///
/// `objective` writes the gradient into its second argument and returns the loss.
pub fn minimize<F>(objective: F, init: Vec<f64>, max_iters: usize, config: RpropConfig) -> Result<Minimized>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    minimize_observed(objective, init, max_iters, config, |_, _, _| {})
}

/// [`minimize`] with a callback `(iteration, params, loss)` after every evaluation,
/// starting with iteration 0 at the initial point.
pub fn minimize_observed<F, O>(
    objective: F,
    init: Vec<f64>,
    max_iters: usize,
    config: RpropConfig,
    observer: O,
) -> Result<Minimized>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    O: FnMut(usize, &[f64], f64),
{
    let mut out = run(objective, init, &[max_iters], config, observer)?;
    Ok(out.pop().expect("one checkpoint"))
}

/// One run of `max(checkpoints)` iterations, reporting the best iterate as it
/// stood after each checkpoint. Identical to separate runs with
/// `max_iters = checkpoint`, since iRprop+ never looks ahead.
pub fn minimize_checkpoints<F>(
    objective: F,
    init: Vec<f64>,
    checkpoints: &[usize],
    config: RpropConfig,
) -> Result<Vec<Minimized>>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    run(objective, init, checkpoints, config, |_, _, _| {})
}

fn run<F, O>(
    mut objective: F,
    init: Vec<f64>,
    checkpoints: &[usize],
    config: RpropConfig,
    mut observer: O,
) -> Result<Vec<Minimized>>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    O: FnMut(usize, &[f64], f64),
{
    config.validate()?;
    if checkpoints.is_empty() || checkpoints.contains(&0) {
        return Err(Error::InvalidConfig("iteration counts must be at least 1".into()));
    }
    let max_iters = *checkpoints.iter().max().expect("non-empty");

    let mut params = init;
    let mut gradient = vec![0.0; params.len()];
    let mut evaluate = |params: &[f64], gradient: &mut [f64], iteration: usize| -> Result<f64> {
        let loss = objective(params, gradient);
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "loss",
                iteration,
            });
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                iteration,
            });
        }
        Ok(loss)
    };

    let mut loss = evaluate(&params, &mut gradient, 0)?;
    observer(0, &params, loss);
    let mut trace = Vec::with_capacity(max_iters + 1);
    trace.push(loss);
    let mut best_params = params.clone();
    let mut best_loss = loss;
    let mut best_iteration = 0;

    let mut state = RpropState::new(params.len(), config);
    let mut snapshots = vec![None; checkpoints.len()];
    for iteration in 1..=max_iters {
        state.step(&mut params, &gradient, loss);
        loss = evaluate(&params, &mut gradient, iteration)?;
        observer(iteration, &params, loss);
        trace.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best_iteration = iteration;
            best_params.copy_from_slice(&params);
        }
        for (slot, _) in snapshots.iter_mut().zip(checkpoints).filter(|(_, &c)| c == iteration) {
            *slot = Some(Minimized {
                params: best_params.clone(),
                best_loss,
                best_iteration,
                trace: trace.clone(),
            });
        }
    }
    Ok(snapshots
        .into_iter()
        .map(|s| s.expect("every checkpoint is reached"))
        .collect())
}

/// Writes `iteration,loss` rows.
pub fn write_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = String::from("iteration,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
