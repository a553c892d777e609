//! GFEO: greedy placement driven by the exact filtered belief.

use crate::belief::{activation_probabilities, Belief, BeliefFilter, BufferVector, StateSpace};
use crate::error::Result;
use crate::schedulers::greedy::{greedy_assign, GreedyOutcome, SuccessModel};
use crate::schedulers::pima::pima_baseline_schedule;
use crate::schedulers::SchedulerStats;
use crate::types::{Assignment, EfficiencyMode, Observation, SimConfig};

impl SuccessModel for Belief {
    fn n_users(&self) -> usize {
        Belief::n_users(self)
    }

    fn activation_probabilities(&mut self) -> Vec<f64> {
        activation_probabilities(self)
    }

    fn success(&mut self, group: u64) -> f64 {
        self.exactly_one_active(group)
    }
}

/// Greedy frame-efficiency placement under `belief`.
pub fn gfeo_schedule(belief: &Belief, nu: usize, l1: f64, mode: EfficiencyMode) -> Assignment {
    gfeo_plan(belief, nu, l1, mode).assignment
}

/// As [`gfeo_schedule`], also returning the expected efficiency.
pub fn gfeo_plan(belief: &Belief, nu: usize, l1: f64, mode: EfficiencyMode) -> GreedyOutcome {
    let mut model = belief.clone();
    greedy_assign(&mut model, nu, l1, mode)
}

/// Stateful GFEO: keeps the belief across frames.
#[derive(Debug, Clone)]
pub struct GfeoScheduler {
    per_user_rate: f64,
    l1: f64,
    mode: EfficiencyMode,
    prune_epsilon: f64,
    filter: BeliefFilter,
    belief: Option<Belief>,
    prev_nu: Option<usize>,
    stats: SchedulerStats,
}

impl GfeoScheduler {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let space = StateSpace::new(cfg.n_users, cfg.belief_capacity)?;
        Ok(GfeoScheduler {
            per_user_rate: cfg.per_user_rate(),
            l1: cfg.pia_len,
            mode: cfg.efficiency_denominator,
            prune_epsilon: cfg.prune_epsilon,
            filter: BeliefFilter::new(space),
            belief: None,
            prev_nu: None,
            stats: SchedulerStats::default(),
        })
    }

    pub fn belief(&self) -> Option<&Belief> {
        self.belief.as_ref()
    }

    pub fn stats(&self) -> &SchedulerStats {
        &self.stats
    }

    fn space(&self) -> StateSpace {
        self.filter.space().clone()
    }

    fn next_belief(&mut self, obs: &Observation) -> Option<Belief> {
        let mean = self.per_user_rate * obs.prev_frame_len.slots();
        let Some(prev_nu) = self.prev_nu else {
            // First frame: the system starts empty.
            let space = self.space();
            return if obs.nu == 0 {
                Some(Belief::point_mass(space, &BufferVector::zeros(obs.n_users())))
            } else {
                Belief::uniform_with_active(space, obs.nu, 0).ok()
            };
        };
        if let Some(prior) = self.belief.take() {
            match self.filter.update(&prior, obs, mean, self.prune_epsilon) {
                Ok(b) => return Some(b),
                Err(_) => self.stats.filter_fallbacks += 1,
            }
        }
        // One-shot reconstruction: uniform over states compatible with the
        // last feedback, then the usual forward step.
        let prior = Belief::uniform_with_active(self.space(), prev_nu, self.stats.calls).ok()?;
        self.filter.update(&prior, obs, mean, self.prune_epsilon).ok()
    }

    pub fn schedule(&mut self, obs: &Observation) -> Assignment {
        self.stats.calls += 1;
        let belief = self.next_belief(obs);
        self.prev_nu = Some(obs.nu);
        let Some(belief) = belief else {
            self.stats.baseline_fallbacks += 1;
            return pima_baseline_schedule(obs.nu, obs.n_users(), self.l1, self.mode);
        };
        self.stats.record_belief(&belief);
        let plan = gfeo_plan(&belief, obs.nu, self.l1, self.mode);
        self.stats.record_activation(&plan.activation, obs.nu);
        self.belief = Some(belief);
        plan.assignment
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: EfficiencyMode = EfficiencyMode::FullFrame;

    #[test]
    fn no_actives_no_data_slots() {
        let b = Belief::point_mass(StateSpace::new(3, 2).unwrap(), &BufferVector(vec![0, 0, 0]));
        assert!(gfeo_schedule(&b, 0, 0.1, FULL).is_empty_frame());
    }

    #[test]
    fn single_user_single_slot() {
        let b = Belief::point_mass(StateSpace::new(1, 2).unwrap(), &BufferVector(vec![1]));
        let a = gfeo_schedule(&b, 1, 0.1, FULL);
        assert_eq!(a.q(), &[1]);
    }

    #[test]
    fn anticorrelated_pair_shares_a_slot() {
        let s = StateSpace::new(2, 1).unwrap();
        let b = Belief::from_states(
            s,
            [(BufferVector(vec![1, 0]), 0.5), (BufferVector(vec![0, 1]), 0.5)],
            0,
        )
        .unwrap();
        assert_eq!(gfeo_schedule(&b, 1, 0.1, FULL).q(), &[1, 1]);
    }

    #[test]
    fn all_active_get_singletons() {
        let b = Belief::point_mass(StateSpace::new(4, 2).unwrap(), &BufferVector(vec![1, 2, 1, 1]));
        let a = gfeo_schedule(&b, 4, 0.1, FULL);
        assert_eq!(a.l2(), 4);
    }
}
