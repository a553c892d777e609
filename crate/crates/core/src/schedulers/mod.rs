//! Scheduling policies.
//!
//! PIMA-family schedulers ([`FrameScheduler`]) map each frame's
//! [`Observation`] to a slot assignment. TDMA is a fixed assignment and
//! slotted ALOHA a per-slot transmit policy; both run on their own channel
//! harnesses.

pub mod efficiency;
pub mod gfeo;
pub mod greedy;
pub mod pima;
pub mod saloha;
pub mod sgfeo;
pub mod tdma;

pub use efficiency::frame_efficiency;
pub use gfeo::{gfeo_plan, gfeo_schedule, GfeoScheduler};
pub use greedy::{activation_order, dealt_assignment, greedy_assign, greedy_or_dealt, GreedyOutcome, SuccessModel};
pub use pima::{group_success_probability, pima_baseline_schedule, shuffle_users};
pub use saloha::{saloha_step, SalohaController};
pub use sgfeo::{sgfeo_plan, sgfeo_schedule, SgfeoScheduler};
pub use tdma::tdma_schedule;

use crate::belief::Belief;
use crate::error::Result;
use crate::traffic::{rng_fork, RngStream, PIMA_STREAM};
use crate::types::{Assignment, EfficiencyMode, Observation, PimaUserOrder, SchedulerKind, SimConfig};

/// Counters and invariant residuals collected across scheduling calls.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchedulerStats {
    pub calls: u64,
    /// Frames where the filtered belief was lost and rebuilt from the last
    /// feedback only.
    pub filter_fallbacks: u64,
    /// Frames scheduled by the baseline because the model had no mass.
    pub baseline_fallbacks: u64,
    /// Largest `|sum(phi) - nu|` seen.
    pub max_activation_residual: f64,
    /// Largest `|sum(belief) - 1|` seen.
    pub max_normalisation_drift: f64,
    pub max_support: usize,
}

impl SchedulerStats {
    pub(crate) fn record_activation(&mut self, phi: &[f64], nu: usize) {
        let r = (phi.iter().sum::<f64>() - nu as f64).abs();
        self.max_activation_residual = self.max_activation_residual.max(r);
    }

    pub(crate) fn record_belief(&mut self, belief: &Belief) {
        let drift = (belief.total_mass() - 1.0).abs();
        self.max_normalisation_drift = self.max_normalisation_drift.max(drift);
        self.max_support = self.max_support.max(belief.support_len());
    }
}

/// Scheduler state of a PIMA-family run.
#[derive(Debug, Clone)]
pub enum FrameScheduler {
    Pima { l1: f64, mode: EfficiencyMode, shuffle: Option<Box<RngStream>>, stats: SchedulerStats },
    Gfeo(Box<GfeoScheduler>),
    Sgfeo(SgfeoScheduler),
}

impl FrameScheduler {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        Ok(match cfg.scheduler {
            SchedulerKind::Pima => FrameScheduler::Pima {
                l1: cfg.pia_len,
                mode: cfg.efficiency_denominator,
                shuffle: (cfg.pima_user_order == PimaUserOrder::Shuffled)
                    .then(|| Box::new(rng_fork(cfg.seed, PIMA_STREAM))),
                stats: SchedulerStats::default(),
            },
            SchedulerKind::Gfeo => FrameScheduler::Gfeo(Box::new(GfeoScheduler::new(cfg)?)),
            SchedulerKind::Sgfeo => FrameScheduler::Sgfeo(SgfeoScheduler::new(cfg)),
            other => panic!("{other} is not a PIMA-family scheduler"),
        })
    }

    pub fn schedule(&mut self, obs: &Observation) -> Assignment {
        match self {
            FrameScheduler::Pima { l1, mode, shuffle, stats } => {
                stats.calls += 1;
                let a = pima_baseline_schedule(obs.nu, obs.n_users(), *l1, *mode);
                match shuffle {
                    Some(rng) if !a.is_empty_frame() => shuffle_users(&a, rng.as_mut()),
                    _ => a,
                }
            }
            FrameScheduler::Gfeo(s) => s.schedule(obs),
            FrameScheduler::Sgfeo(s) => s.schedule(obs),
        }
    }

    pub fn stats(&self) -> &SchedulerStats {
        match self {
            FrameScheduler::Pima { stats, .. } => stats,
            FrameScheduler::Gfeo(s) => s.stats(),
            FrameScheduler::Sgfeo(s) => s.stats(),
        }
    }
}
