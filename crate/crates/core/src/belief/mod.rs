//! Belief tracking over truncated buffer-load states.
//!
//! The hidden state at a frame start is the vector of eligible buffer
//! levels `(K_1, ..., K_N)`, each capped at the capacity `C`, so the state
//! space has `(C+1)^N` points. States are packed into a mixed-radix `u32`
//! code for compact sparse storage.
//!
//! - [`kernel`]: the one-frame transition kernel (departures then Poisson
//!   arrivals, overflow lumped at `C`).
//! - [`filter`]: the observation-conditioned forward filter used by GFEO.
//! - [`classes`]: the one-shot compatible-set model used by S-GFEO.

pub mod classes;
pub mod filter;
pub mod kernel;

pub use classes::{
    conditioned_success_dp, sgfeo_reconstruct, ActivityEvidence, CompatibleClassBelief,
    ConditionedClassModel, SlotConstraint,
};
pub use filter::{filter_update, BeliefFilter};
pub use kernel::{transition_distribution, ArrivalKernel};

use crate::error::{Error, Result};
use crate::types::Assignment;

/// Buffer levels of all users, each in `0..=C`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BufferVector(pub Vec<u8>);

impl BufferVector {
    pub fn zeros(n_users: usize) -> Self {
        BufferVector(vec![0; n_users])
    }

    pub fn levels(&self) -> &[u8] {
        &self.0
    }

    /// Bit `n` set iff user `n` has a non-empty buffer.
    pub fn active_mask(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .fold(0, |m, (n, _)| m | (1 << n))
    }

    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&k| k > 0).count()
    }
}

impl From<Vec<u8>> for BufferVector {
    fn from(v: Vec<u8>) -> Self {
        BufferVector(v)
    }
}

/// Largest state space the dense filter workspace will allocate.
pub const MAX_DENSE_STATES: u64 = 1 << 25;

/// Mixed-radix coding of [`BufferVector`]s with radix `C + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    n_users: usize,
    capacity: usize,
    powers: Vec<u32>,
    size: u32,
}

impl StateSpace {
    pub fn new(n_users: usize, capacity: usize) -> Result<Self> {
        if n_users == 0 || capacity == 0 || capacity > 255 {
            return Err(Error::InvalidConfig {
                field: "belief_capacity",
                reason: format!("state space needs N >= 1 and 1 <= C <= 255 (N={n_users}, C={capacity})"),
            });
        }
        let radix = capacity as u64 + 1;
        let size = radix.checked_pow(n_users as u32).filter(|&s| s <= MAX_DENSE_STATES).ok_or_else(
            || Error::BudgetExceeded(format!("(C+1)^N = {radix}^{n_users} states exceeds {MAX_DENSE_STATES}")),
        )?;
        let powers = (0..n_users).map(|d| radix.pow(d as u32) as u32).collect();
        Ok(StateSpace { n_users, capacity, powers, size: size as u32 })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn power(&self, user: usize) -> u32 {
        self.powers[user]
    }

    pub fn encode(&self, levels: &[u8]) -> u32 {
        debug_assert_eq!(levels.len(), self.n_users);
        levels.iter().zip(&self.powers).map(|(&k, &p)| k as u32 * p).sum()
    }

    pub fn decode(&self, code: u32) -> BufferVector {
        let mut levels = vec![0u8; self.n_users];
        self.decode_into(code, &mut levels);
        BufferVector(levels)
    }

    pub fn decode_into(&self, mut code: u32, levels: &mut [u8]) {
        let radix = self.capacity as u32 + 1;
        for k in levels.iter_mut() {
            *k = (code % radix) as u8;
            code /= radix;
        }
    }

    pub fn digit(&self, code: u32, user: usize) -> u8 {
        ((code / self.powers[user]) % (self.capacity as u32 + 1)) as u8
    }

    pub fn active_mask(&self, code: u32) -> u64 {
        let radix = self.capacity as u32 + 1;
        let mut code = code;
        let mut mask = 0u64;
        for n in 0..self.n_users {
            if !code.is_multiple_of(radix) {
                mask |= 1 << n;
            }
            code /= radix;
        }
        mask
    }

    /// Every state, in code order.
    pub fn iter(&self) -> impl Iterator<Item = BufferVector> + '_ {
        (0..self.size).map(|c| self.decode(c))
    }
}

/// Normalised sparse distribution over buffer states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    space: StateSpace,
    /// Sorted by code, strictly positive probabilities.
    entries: Vec<(u32, f64)>,
    masks: Vec<u64>,
    pub frame: u64,
}

impl Belief {
    /// Builds a belief from code/weight pairs, merging duplicates and
    /// normalising. Non-positive weights are dropped.
    pub fn from_codes(space: StateSpace, mut entries: Vec<(u32, f64)>, frame: u64) -> Result<Self> {
        entries.retain(|&(_, p)| p > 0.0);
        entries.sort_by_key(|&(c, _)| c);
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::ObservationImpossible("belief has no mass".into()));
        }
        for e in &mut entries {
            e.1 /= total;
        }
        let masks = entries.iter().map(|&(c, _)| space.active_mask(c)).collect();
        Ok(Belief { space, entries, masks, frame })
    }

    pub fn from_states(
        space: StateSpace,
        states: impl IntoIterator<Item = (BufferVector, f64)>,
        frame: u64,
    ) -> Result<Self> {
        let entries = states.into_iter().map(|(s, p)| (space.encode(&s.0), p)).collect();
        Belief::from_codes(space, entries, frame)
    }

    pub fn point_mass(space: StateSpace, state: &BufferVector) -> Self {
        let code = space.encode(&state.0);
        Belief::from_codes(space, vec![(code, 1.0)], 0).expect("unit mass")
    }

    /// Uniform over all states with exactly `active` non-empty buffers.
    pub fn uniform_with_active(space: StateSpace, active: usize, frame: u64) -> Result<Self> {
        let entries = (0..space.size())
            .filter(|&c| space.active_mask(c).count_ones() as usize == active)
            .map(|c| (c, 1.0))
            .collect();
        Belief::from_codes(space, entries, frame)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n_users(&self) -> usize {
        self.space.n_users()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BufferVector, f64)> + '_ {
        self.entries.iter().map(|&(c, p)| (self.space.decode(c), p))
    }

    pub fn probability(&self, state: &BufferVector) -> f64 {
        let code = self.space.encode(&state.0);
        self.entries
            .binary_search_by_key(&code, |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// `(activity mask, probability)` for every support state.
    pub fn activity(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.masks.iter().copied().zip(self.entries.iter().map(|&(_, p)| p))
    }

    /// Probability that exactly one user of `group` is active.
    pub fn exactly_one_active(&self, group: u64) -> f64 {
        self.activity().filter(|(m, _)| (m & group).count_ones() == 1).map(|(_, p)| p).sum()
    }

    /// Total variation distance to `other` over the same state space.
    pub fn total_variation(&self, other: &Belief) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        let mut acc = 0.0;
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    acc += (x.1 - y.1).abs();
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    acc += x.1;
                    i += 1;
                }
                (Some(x), None) => {
                    acc += x.1;
                    i += 1;
                }
                (_, Some(y)) => {
                    acc += y.1;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        acc / 2.0
    }
}

/// Marginal probability that each user has a non-empty buffer.
pub fn activation_probabilities(belief: &Belief) -> Vec<f64> {
    let mut phi = vec![0.0; belief.n_users()];
    for (mask, p) in belief.activity() {
        let mut m = mask;
        while m != 0 {
            let n = m.trailing_zeros() as usize;
            phi[n] += p;
            m &= m - 1;
        }
    }
    phi
}

/// Probability that `slot` of `assignment` carries exactly one active user,
/// i.e. the expected success indicator of that slot.
pub fn slot_success_probability(belief: &Belief, assignment: &Assignment, slot: usize) -> f64 {
    belief.exactly_one_active(assignment.slot_mask(slot))
}
