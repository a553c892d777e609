//! Pseudo-Bayesian stabilized slotted ALOHA: every backlogged user sends
//! with probability `1 / max(n_hat, 1)`, where `n_hat` tracks the backlog
//! from ternary feedback.

use std::f64::consts::E;

use crate::channel::SlottedPolicy;
use crate::types::SlotOutcome;

/// Transmit probability for the current slot and the backlog estimate for
/// the next one.
pub fn saloha_step(n_hat: f64, feedback: &SlotOutcome, rate: f64) -> (f64, f64) {
    let prob = (1.0 / n_hat.max(1.0)).min(1.0);
    let next = match feedback {
        SlotOutcome::Idle | SlotOutcome::Success(_) => (n_hat - 1.0).max(rate) + rate,
        SlotOutcome::Collision(_) => n_hat + 1.0 / (E - 2.0) + rate,
    };
    (prob, next)
}

#[derive(Debug, Clone)]
pub struct SalohaController {
    n_hat: f64,
    rate: f64,
}

impl SalohaController {
    pub fn new(total_rate: f64) -> Self {
        SalohaController { n_hat: 0.0, rate: total_rate }
    }

    pub fn backlog_estimate(&self) -> f64 {
        self.n_hat
    }
}

impl SlottedPolicy for SalohaController {
    fn transmit_probability(&self) -> f64 {
        (1.0 / self.n_hat.max(1.0)).min(1.0)
    }

    fn observe(&mut self, outcome: &SlotOutcome) {
        self.n_hat = saloha_step(self.n_hat, outcome, self.rate).1;
    }
}
