//! Brute-force reference implementations for differential testing and
//! calibration. Every entry point is guarded by an [`OracleBudget`].

use rand::Rng;

use crate::belief::{Belief, CompatibleClassBelief, ActivityEvidence, StateSpace};
use crate::error::{Error, Result};
use crate::schedulers::pima::partition_efficiency;
use crate::types::{Assignment, EfficiencyMode, ObservedSlot, Observation};

/// Size limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_users: usize,
    pub max_capacity: usize,
    /// Largest data sub-frame searched; `None` means `N`.
    pub max_l2: Option<usize>,
    /// Cap on enumerated states or assignments.
    pub max_states: u64,
}

impl OracleBudget {
    pub const fn assignments() -> Self {
        OracleBudget { max_users: 4, max_capacity: 3, max_l2: None, max_states: 10_000_000 }
    }

    pub const fn dp_checks() -> Self {
        OracleBudget { max_users: 6, max_capacity: 3, max_l2: None, max_states: 10_000_000 }
    }

    fn check_users(&self, n: usize) -> Result<()> {
        if n > self.max_users {
            return Err(Error::BudgetExceeded(format!("{n} users exceed the oracle limit {}", self.max_users)));
        }
        Ok(())
    }

    fn check_capacity(&self, c: usize) -> Result<()> {
        if c > self.max_capacity {
            return Err(Error::BudgetExceeded(format!(
                "capacity {c} exceeds the oracle limit {}",
                self.max_capacity
            )));
        }
        Ok(())
    }

    fn check_states(&self, what: &str, count: u64) -> Result<()> {
        if count > self.max_states {
            return Err(Error::BudgetExceeded(format!(
                "{count} {what} exceed the oracle limit {}",
                self.max_states
            )));
        }
        Ok(())
    }
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget::assignments()
    }
}

fn exactly_one(active: u64, group: u64) -> bool {
    (active & group).count_ones() == 1
}

/// Expected efficiency of `assignment` under `belief`, summing over the
/// full support state by state.
pub fn assignment_efficiency(belief: &Belief, assignment: &Assignment, l1: f64, mode: EfficiencyMode) -> f64 {
    let l2 = assignment.l2();
    if l2 == 0 {
        return 0.0;
    }
    let space = belief.space();
    let mut total = 0.0;
    for &(code, p) in belief.entries() {
        let active = space.active_mask(code);
        for slot in 1..=l2 {
            if exactly_one(active, assignment.slot_mask(slot)) {
                total += p;
            }
        }
    }
    total / mode.denominator(l1, l2)
}

/// Global maximiser of the expected frame efficiency over every assignment
/// of the `N` users to `1..=L2` slots, up to slot relabelling.
pub fn exhaustive_schedule(
    belief: &Belief,
    nu: usize,
    l1: f64,
    mode: EfficiencyMode,
    budget: &OracleBudget,
) -> Result<(Assignment, f64)> {
    let n = belief.n_users();
    budget.check_users(n)?;
    budget.check_capacity(belief.space().capacity())?;
    if nu == 0 {
        return Ok((Assignment::empty(n), 0.0));
    }
    let max_l2 = budget.max_l2.unwrap_or(n).min(n).max(1);
    let mut best: Option<(Assignment, f64)> = None;
    let mut visited = 0u64;
    // restricted-growth strings: q[0] = 1, q[i] <= max(q[..i]) + 1
    let mut q = vec![1usize; n];
    loop {
        visited += 1;
        budget.check_states("assignments", visited)?;
        let a = Assignment::new(q.clone())?;
        let eta = assignment_efficiency(belief, &a, l1, mode);
        if best.as_ref().is_none_or(|(_, b)| eta > *b) {
            best = Some((a, eta));
        }
        // next string
        let mut i = n;
        loop {
            if i <= 1 {
                return Ok(best.expect("at least one assignment"));
            }
            i -= 1;
            let prefix_max = *q[..i].iter().max().expect("non-empty prefix");
            if q[i] <= prefix_max && q[i] < max_l2 {
                q[i] += 1;
                for v in &mut q[i + 1..] {
                    *v = 1;
                }
                break;
            }
        }
    }
}

/// Probability of moving from level `from` to `to` in one frame, computed
/// directly from the Poisson law with the overflow lumped at `capacity`.
fn level_transition(from: u8, to: u8, mean: f64, capacity: usize) -> f64 {
    if to < from {
        return 0.0;
    }
    let pois = |k: usize| {
        let mut p = (-mean).exp();
        for i in 1..=k {
            p *= mean / i as f64;
        }
        p
    };
    let gap = (to - from) as usize;
    if (to as usize) < capacity {
        pois(gap)
    } else {
        1.0 - (0..gap).map(pois).sum::<f64>()
    }
}

/// Feedback a prior activity mask produces under `assignment`, compared
/// with the observed feedback.
fn produces_feedback(active: u64, assignment: &Assignment, feedback: &[ObservedSlot]) -> bool {
    feedback.iter().enumerate().all(|(idx, fb)| {
        let on = active & assignment.slot_mask(idx + 1);
        match *fb {
            ObservedSlot::Idle => on == 0,
            ObservedSlot::Success(n) => on == 1 << n,
            ObservedSlot::Collision => on.count_ones() >= 2,
        }
    })
}

/// Dense forward step over all `(I, J)` state pairs, without pruning.
pub fn enumerate_filter(
    prior: &Belief,
    obs: &Observation,
    arrival_mean: f64,
    budget: &OracleBudget,
) -> Result<Belief> {
    let space: &StateSpace = prior.space();
    let size = space.size() as u64;
    budget.check_states("states", size)?;
    let capacity = space.capacity();
    let feedback = obs.slot_feedback();
    let assignment = &obs.prev_assignment;
    let states: Vec<Vec<u8>> = (0..space.size()).map(|c| space.decode(c).0).collect();
    let mut post = vec![0.0; size as usize];
    let mut compatible = false;
    for &(code, p) in prior.entries() {
        let levels = &states[code as usize];
        let active = space.active_mask(code);
        if !produces_feedback(active, assignment, &feedback) {
            continue;
        }
        compatible = true;
        let mut after = levels.clone();
        for (idx, fb) in feedback.iter().enumerate() {
            if let ObservedSlot::Success(n) = fb {
                debug_assert_eq!(assignment.slot_of(*n), idx + 1);
                after[*n] -= 1;
            }
        }
        for (j, next) in states.iter().enumerate() {
            if next.iter().filter(|&&l| l > 0).count() != obs.nu {
                continue;
            }
            let w: f64 = after.iter().zip(next).map(|(&a, &b)| level_transition(a, b, arrival_mean, capacity)).product();
            post[j] += p * w;
        }
    }
    if !compatible {
        return Err(Error::ObservationImpossible("no prior state matches the feedback".into()));
    }
    let entries: Vec<(u32, f64)> =
        post.into_iter().enumerate().filter(|&(_, v)| v > 0.0).map(|(c, v)| (c as u32, v)).collect();
    if entries.is_empty() {
        return Err(Error::ObservationImpossible(format!("no state has exactly {} active users", obs.nu)));
    }
    Belief::from_codes(space.clone(), entries, prior.frame + 1)
}

/// Integer partitions of `n` with parts in non-increasing order.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=rest.min(max)).rev() {
            cur.push(part);
            rec(rest - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Largest `N` accepted by [`exhaustive_partition`].
pub const MAX_PARTITION_USERS: usize = 12;

/// Best group-size multiset for `nu` uniformly placed actives among `N`
/// exchangeable users. Ties prefer fewer slots.
pub fn exhaustive_partition(
    nu: usize,
    n_users: usize,
    l1: f64,
    mode: EfficiencyMode,
    budget: &OracleBudget,
) -> Result<(Assignment, f64)> {
    if n_users > MAX_PARTITION_USERS {
        return Err(Error::BudgetExceeded(format!(
            "{n_users} users exceed the partition oracle limit {MAX_PARTITION_USERS}"
        )));
    }
    if nu == 0 {
        return Ok((Assignment::empty(n_users), 0.0));
    }
    let max_l2 = budget.max_l2.unwrap_or(n_users);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for sizes in partitions(n_users).into_iter().filter(|s| s.len() <= max_l2) {
        let eta = partition_efficiency(&sizes, nu, n_users, l1, mode);
        let better = match &best {
            None => true,
            Some((b, e)) => eta > *e || (eta == *e && sizes.len() < b.len()),
        };
        if better {
            best = Some((sizes, eta));
        }
    }
    let (sizes, eta) = best.expect("N >= 1 has a partition");
    let q = sizes.iter().enumerate().flat_map(|(slot, &k)| std::iter::repeat_n(slot + 1, k)).collect();
    Ok((Assignment::new(q)?, eta))
}

/// Conditioned success probability of `group` from first principles: every
/// previous activity set consistent with the feedback (and with `prev_nu`
/// when given) is equally likely, active levels are uniform on `1..=C`,
/// and the current frame is conditioned on exactly `nu` actives.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_conditioned_success(
    obs: &Observation,
    prev_nu: Option<usize>,
    arrival_mean: f64,
    capacity: usize,
    nu: usize,
    group: u64,
    budget: &OracleBudget,
) -> Result<f64> {
    let n = obs.n_users();
    budget.check_users(n)?;
    budget.check_capacity(capacity)?;
    let feedback = obs.slot_feedback();
    let pa = 1.0 - (-arrival_mean).exp();
    let c = capacity as u8;
    let mut joint = 0.0;
    let mut hit = 0.0;
    let mut compatible = false;
    for prev in 0u64..(1 << n) {
        if prev_nu.is_some_and(|k| prev.count_ones() as usize != k)
            || !produces_feedback(prev, &obs.prev_assignment, &feedback)
        {
            continue;
        }
        compatible = true;
        let actives: Vec<usize> = (0..n).filter(|&u| prev >> u & 1 == 1).collect();
        let combos = (capacity as u64).pow(actives.len() as u32);
        budget.check_states("level vectors", combos << n)?;
        let mut levels = vec![0u8; n];
        for combo in 0..combos {
            let mut rest = combo;
            for &u in &actives {
                levels[u] = 1 + (rest % capacity as u64) as u8;
                rest /= capacity as u64;
            }
            let after: Vec<u8> = (0..n).map(|u| levels[u] - (obs.acks[u] && levels[u] > 0) as u8).collect();
            debug_assert!(after.iter().all(|&l| l <= c));
            for cur in 0u64..(1 << n) {
                if cur.count_ones() as usize != nu {
                    continue;
                }
                let mut w = 1.0 / combos as f64;
                for (u, &l) in after.iter().enumerate() {
                    let on = cur >> u & 1 == 1;
                    w *= match (l > 0, on) {
                        (true, true) => 1.0,
                        (true, false) => 0.0,
                        (false, true) => pa,
                        (false, false) => 1.0 - pa,
                    };
                }
                joint += w;
                if exactly_one(cur, group) {
                    hit += w;
                }
            }
        }
    }
    if !compatible || joint.is_nan() || joint <= 0.0 {
        return Err(Error::ObservationImpossible("no compatible history yields the observed count".into()));
    }
    Ok(hit / joint)
}

/// Monte-Carlo frequency of "exactly one member of `slot` active" with
/// states sampled from `belief`.
pub fn mc_success_estimate<R: Rng + ?Sized>(
    belief: &Belief,
    assignment: &Assignment,
    slot: usize,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let group = assignment.slot_mask(slot);
    let space = belief.space();
    let mut cdf = Vec::with_capacity(belief.support_len());
    let mut acc = 0.0;
    for &(code, p) in belief.entries() {
        acc += p;
        cdf.push((acc, space.active_mask(code)));
    }
    let mut hits = 0usize;
    for _ in 0..samples {
        let u = rng.random::<f64>() * acc;
        let i = cdf.partition_point(|&(c, _)| c <= u).min(cdf.len() - 1);
        hits += exactly_one(cdf[i].1, group) as usize;
    }
    hits as f64 / samples as f64
}

/// Monte-Carlo counterpart for the compatible-class model, by rejection:
/// previous activity sets are drawn uniformly among the compatible ones and
/// current states are kept only when exactly `nu` users are active.
/// Returns `None` when no sample was accepted.
pub fn mc_class_success_estimate<R: Rng + ?Sized>(
    cb: &CompatibleClassBelief,
    nu: usize,
    assignment: &Assignment,
    slot: usize,
    samples: usize,
    rng: &mut R,
) -> Option<f64> {
    let group = assignment.slot_mask(slot);
    let n = cb.n_users();
    let pa = 1.0 - (-cb.arrival_mean).exp();
    let (mut accepted, mut hits) = (0usize, 0usize);
    for _ in 0..samples {
        let mut prev = 0u64;
        for (u, e) in cb.evidence.iter().enumerate() {
            let on = match e {
                ActivityEvidence::KnownActive { .. } => true,
                ActivityEvidence::KnownInactive => false,
                _ => rng.random::<bool>(),
            };
            prev |= (on as u64) << u;
        }
        if cb.constraints.iter().any(|c| c.members.iter().filter(|&&m| prev >> m & 1 == 1).count() < c.min_active) {
            continue;
        }
        if let Some(prev_nu) = cb.prev_nu {
            if prev.count_ones() as usize != prev_nu {
                continue;
            }
        }
        let mut cur = 0u64;
        for u in 0..n {
            let was = prev >> u & 1 == 1;
            let level = if was { rng.random_range(1..=cb.capacity) } else { 0 };
            let after = level - (was && cb.departures[u]) as usize;
            if after > 0 || rng.random::<f64>() < pa {
                cur |= 1 << u;
            }
        }
        if cur.count_ones() as usize != nu {
            continue;
        }
        accepted += 1;
        hits += exactly_one(cur, group) as usize;
    }
    (accepted > 0).then(|| hits as f64 / accepted as f64)
}
