//! Observation-conditioned forward filter.
//!
//! Given the previous action, each prior state produces exactly one
//! feedback pattern (acks and collided slots), so the update keeps the prior
//! states whose pattern matches, applies their departures, spreads the mass
//! with the arrival kernel one user at a time, and finally keeps only the
//! states with exactly `nu(t)` non-empty buffers before renormalising.

use crate::belief::kernel::ArrivalKernel;
use crate::belief::{Belief, StateSpace};
use crate::error::{Error, Result};
use crate::types::{ObservedSlot, Observation};

/// Feedback constraints of the previous frame, as activity-mask tests.
#[derive(Debug, Clone)]
pub(crate) struct FeedbackPattern {
    idle: u64,
    success: Vec<(u64, u64)>,
    collision: Vec<u64>,
    departed: Vec<usize>,
}

impl FeedbackPattern {
    pub(crate) fn new(obs: &Observation) -> Self {
        let mut pattern =
            FeedbackPattern { idle: 0, success: Vec::new(), collision: Vec::new(), departed: Vec::new() };
        for (idx, fb) in obs.slot_feedback().into_iter().enumerate() {
            let group = obs.prev_assignment.slot_mask(idx + 1);
            match fb {
                ObservedSlot::Idle => pattern.idle |= group,
                ObservedSlot::Success(n) => {
                    pattern.success.push((group, 1 << n));
                    pattern.departed.push(n);
                }
                ObservedSlot::Collision => pattern.collision.push(group),
            }
        }
        pattern
    }

    /// Whether a prior state with activity `mask` produces this feedback.
    pub(crate) fn matches(&self, mask: u64) -> bool {
        mask & self.idle == 0
            && self.success.iter().all(|&(g, who)| mask & g == who)
            && self.collision.iter().all(|&g| (mask & g).count_ones() >= 2)
    }

    pub(crate) fn departed(&self) -> &[usize] {
        &self.departed
    }
}

/// Reusable dense workspace for repeated filter updates on one state space.
#[derive(Debug, Clone)]
pub struct BeliefFilter {
    space: StateSpace,
    cur: Vec<f64>,
    next: Vec<f64>,
    touched_cur: Vec<u32>,
    touched_next: Vec<u32>,
    digits: Vec<u8>,
}

impl BeliefFilter {
    pub fn new(space: StateSpace) -> Self {
        let size = space.size() as usize;
        BeliefFilter {
            digits: vec![0; space.n_users()],
            space,
            cur: vec![0.0; size],
            next: vec![0.0; size],
            touched_cur: Vec::new(),
            touched_next: Vec::new(),
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// One forward step. States whose mass falls below
    /// `prune_epsilon` times the compatible total are dropped.
    pub fn update(
        &mut self,
        prior: &Belief,
        obs: &Observation,
        arrival_mean: f64,
        prune_epsilon: f64,
    ) -> Result<Belief> {
        assert_eq!(prior.space(), &self.space, "belief and workspace state spaces differ");
        let pattern = FeedbackPattern::new(obs);
        let dep_offset: u32 = pattern.departed().iter().map(|&n| self.space.power(n)).sum();

        self.touched_cur.clear();
        for (&(code, p), (mask, _)) in prior.entries().iter().zip(prior.activity()) {
            if pattern.matches(mask) {
                let c = code - dep_offset;
                if self.cur[c as usize] == 0.0 {
                    self.touched_cur.push(c);
                }
                self.cur[c as usize] += p;
            }
        }
        if self.touched_cur.is_empty() {
            return Err(Error::ObservationImpossible(
                "no prior state is compatible with the previous frame feedback".into(),
            ));
        }

        let kernel = ArrivalKernel::new(arrival_mean, self.space.capacity());
        let nu = obs.nu;
        let n_users = self.space.n_users();
        for d in 0..n_users {
            let pow = self.space.power(d);
            self.touched_next.clear();
            for t in 0..self.touched_cur.len() {
                let code = self.touched_cur[t];
                let v = std::mem::take(&mut self.cur[code as usize]);
                self.space.decode_into(code, &mut self.digits);
                let level = self.digits[d];
                let nz_other = self.digits.iter().filter(|&&k| k > 0).count() - (level > 0) as usize;
                let zeros_after = self.digits[d + 1..].iter().filter(|&&k| k == 0).count();
                let base = code - level as u32 * pow;
                for &(new_level, kp) in kernel.row(level) {
                    let nz = nz_other + (new_level > 0) as usize;
                    if nz > nu || nz + zeros_after < nu {
                        continue;
                    }
                    let w = v * kp;
                    if w > 0.0 {
                        let j = (base + new_level as u32 * pow) as usize;
                        if self.next[j] == 0.0 {
                            self.touched_next.push(j as u32);
                        }
                        self.next[j] += w;
                    }
                }
            }
            std::mem::swap(&mut self.cur, &mut self.next);
            std::mem::swap(&mut self.touched_cur, &mut self.touched_next);
        }

        let total: f64 = self.touched_cur.iter().map(|&c| self.cur[c as usize]).sum();
        let threshold = prune_epsilon * total;
        let mut entries = Vec::with_capacity(self.touched_cur.len());
        for &c in &self.touched_cur {
            let v = std::mem::take(&mut self.cur[c as usize]);
            if v > threshold {
                entries.push((c, v));
            }
        }
        self.touched_cur.clear();
        if total.is_nan() || total <= 0.0 || entries.is_empty() {
            return Err(Error::ObservationImpossible(format!(
                "no compatible state has exactly {nu} active users"
            )));
        }
        Belief::from_codes(self.space.clone(), entries, prior.frame + 1)
    }
}

/// Forward step without a persistent workspace.
pub fn filter_update(
    prior: &Belief,
    obs: &Observation,
    arrival_mean: f64,
    prune_epsilon: f64,
) -> Result<Belief> {
    BeliefFilter::new(prior.space().clone()).update(prior, obs, arrival_mean, prune_epsilon)
}
