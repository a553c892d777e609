//! One-shot compatible-set model for S-GFEO.
//!
//! The previous frame's feedback is turned into per-user activity evidence:
//! users in idle slots were inactive, acked users were active and lost one
//! packet, and every collided slot held at least two active members. Knowing
//! `nu(t-1)` fixes how many actives sit among the collision members and the
//! unobserved users. Compatible states are taken uniform: every compatible
//! activity set is equally likely and active buffer levels are uniform on
//! `1..=C`.
//!
//! Success probabilities for the current frame are conditioned on the
//! observed `nu(t)` through a count convolution over user categories, which
//! keeps the cost polynomial in `N`.

use std::collections::HashMap;

use crate::belief::kernel::ArrivalKernel;
use crate::error::{Error, Result};
use crate::types::{Assignment, ObservedSlot, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityEvidence {
    /// Active in the previous frame. `departed` is set when the user's
    /// head packet was delivered.
    KnownActive { departed: bool },
    KnownInactive,
    /// Member of the collided slot with this index.
    CollisionMember(usize),
    Unconstrained,
}

/// "At least `min_active` of `members` were active."
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotConstraint {
    pub slot: usize,
    pub members: Vec<usize>,
    pub min_active: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleClassBelief {
    pub evidence: Vec<ActivityEvidence>,
    /// Collided slots whose members are not all forced active.
    pub constraints: Vec<SlotConstraint>,
    pub prev_nu: Option<usize>,
    /// Previous-frame actives still to be placed among the collision members
    /// and unconstrained users; `None` without history.
    pub budget: Option<usize>,
    pub departures: Vec<bool>,
    pub arrival_mean: f64,
    pub capacity: usize,
}

fn infeasible(msg: String) -> Error {
    Error::ObservationImpossible(msg)
}

/// Builds the compatible-class model from the previous frame's feedback.
pub fn sgfeo_reconstruct(
    obs: &Observation,
    prev_nu: Option<usize>,
    arrival_mean: f64,
    capacity: usize,
) -> Result<CompatibleClassBelief> {
    obs.validate()?;
    let n_users = obs.n_users();
    let feedback = obs.slot_feedback();
    let mut evidence = vec![ActivityEvidence::Unconstrained; n_users];
    for (n, ev) in evidence.iter_mut().enumerate() {
        let slot = obs.prev_assignment.slot_of(n);
        if slot == 0 {
            continue;
        }
        *ev = match feedback[slot - 1] {
            ObservedSlot::Idle => ActivityEvidence::KnownInactive,
            ObservedSlot::Success(m) if m == n => ActivityEvidence::KnownActive { departed: true },
            ObservedSlot::Success(_) => ActivityEvidence::KnownInactive,
            ObservedSlot::Collision => ActivityEvidence::CollisionMember(slot),
        };
    }
    let mut constraints: Vec<SlotConstraint> = obs
        .collided_slots
        .iter()
        .map(|&slot| SlotConstraint {
            slot,
            members: obs.prev_assignment.members(slot).collect(),
            min_active: 2,
        })
        .collect();

    let force_active = |ev: &mut [ActivityEvidence], members: &[usize]| {
        for &m in members {
            ev[m] = ActivityEvidence::KnownActive { departed: false };
        }
    };

    let budget = match prev_nu {
        None => {
            constraints.retain(|c| {
                if c.members.len() <= c.min_active {
                    force_active(&mut evidence, &c.members);
                    false
                } else {
                    true
                }
            });
            None
        }
        Some(prev) => {
            let known = evidence
                .iter()
                .filter(|e| matches!(e, ActivityEvidence::KnownActive { .. }))
                .count();
            if prev < known {
                return Err(infeasible(format!("nu(t-1) = {prev} but {known} users were acked")));
            }
            let mut remaining = prev - known;
            loop {
                let free: Vec<usize> = (0..n_users)
                    .filter(|&n| evidence[n] == ActivityEvidence::Unconstrained)
                    .collect();
                let sum_min: usize = constraints.iter().map(|c| c.min_active).sum();
                let sum_max: usize = constraints.iter().map(|c| c.members.len()).sum::<usize>() + free.len();
                if remaining < sum_min || remaining > sum_max {
                    return Err(infeasible(format!(
                        "{remaining} previous actives cannot satisfy collision constraints \
                         (need between {sum_min} and {sum_max})"
                    )));
                }
                let forced = constraints.iter().position(|c| {
                    let m = c.members.len();
                    remaining.saturating_sub(sum_max - m).max(c.min_active) >= m
                });
                if let Some(i) = forced {
                    let c = constraints.remove(i);
                    force_active(&mut evidence, &c.members);
                    remaining -= c.members.len();
                    continue;
                }
                if !free.is_empty() {
                    if remaining - sum_min == 0 {
                        for &n in &free {
                            evidence[n] = ActivityEvidence::KnownInactive;
                        }
                        continue;
                    }
                    if remaining.saturating_sub(sum_max - free.len()) >= free.len() {
                        force_active(&mut evidence, &free);
                        remaining -= free.len();
                        continue;
                    }
                }
                break;
            }
            Some(remaining)
        }
    };

    Ok(CompatibleClassBelief {
        evidence,
        constraints,
        prev_nu,
        budget,
        departures: obs.acks.clone(),
        arrival_mean,
        capacity,
    })
}

/// Binomial coefficients up to 64.
#[derive(Debug, Clone)]
struct Pascal {
    rows: Vec<Vec<f64>>,
}

impl Pascal {
    fn new(n: usize) -> Self {
        let mut rows = vec![vec![1.0]];
        for i in 1..=n {
            let prev = &rows[i - 1];
            let mut row = vec![1.0; i + 1];
            for k in 1..i {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        Pascal { rows }
    }

    fn choose(&self, n: usize, k: usize) -> f64 {
        if k > n {
            0.0
        } else {
            self.rows[n][k]
        }
    }

    fn binom_pmf(&self, n: usize, p: f64, x: usize) -> f64 {
        if x > n {
            return 0.0;
        }
        self.choose(n, x) * p.powi(x as i32) * (1.0 - p).powi((n - x) as i32)
    }
}

#[derive(Debug, Clone)]
enum CategoryKind {
    /// Independent users sharing one activation probability at frame t.
    Independent { p: f64 },
    /// Users whose previous-frame activity count `a` is drawn jointly, with
    /// weight `C(size, a)`, `min_active <= a`. Previously active users stay
    /// active; the others activate with probability `p_new`.
    Budgeted { min_active: usize, p_new: f64 },
}

#[derive(Debug, Clone)]
struct Category {
    kind: CategoryKind,
    size: usize,
}

impl CompatibleClassBelief {
    pub fn n_users(&self) -> usize {
        self.evidence.len()
    }

    fn activation_probability(&self) -> f64 {
        ArrivalKernel::new(self.arrival_mean, self.capacity).activation_probability()
    }

    /// Probability that an acked user is still active: its level was uniform
    /// on `1..=C`, so it empties with probability `1/C` unless a packet arrives.
    pub fn departed_stay_active(&self) -> f64 {
        let c = self.capacity as f64;
        (c - 1.0) / c + self.activation_probability() / c
    }

    /// Previous-frame activity marginals under the uniform compatible law.
    pub fn prior_activity_marginals(&self) -> Vec<f64> {
        let pascal = Pascal::new(self.n_users());
        let free: Vec<usize> = (0..self.n_users())
            .filter(|&n| self.evidence[n] == ActivityEvidence::Unconstrained)
            .collect();
        // (members, min_active) per budgeted block
        let mut blocks: Vec<(Vec<usize>, usize)> =
            self.constraints.iter().map(|c| (c.members.clone(), c.min_active)).collect();
        if !free.is_empty() {
            blocks.push((free, 0));
        }
        let weights = |members: usize, min: usize, drop_one: bool| -> Vec<f64> {
            (0..=members)
                .map(|a| {
                    if a < min {
                        0.0
                    } else if drop_one {
                        if a == 0 { 0.0 } else { pascal.choose(members - 1, a - 1) }
                    } else {
                        pascal.choose(members, a)
                    }
                })
                .collect()
        };
        let convolve = |a: &[f64], b: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; a.len() + b.len() - 1];
            for (i, x) in a.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        };
        let mass_at = |poly: &[f64]| match self.budget {
            Some(r) => poly.get(r).copied().unwrap_or(0.0),
            None => poly.iter().sum(),
        };

        let mut marginals: Vec<f64> = self
            .evidence
            .iter()
            .map(|e| match e {
                ActivityEvidence::KnownActive { .. } => 1.0,
                ActivityEvidence::KnownInactive => 0.0,
                _ => f64::NAN,
            })
            .collect();
        for (b, (members, min)) in blocks.iter().enumerate() {
            let mut others = vec![1.0];
            for (o, (m2, min2)) in blocks.iter().enumerate() {
                if o != b {
                    others = convolve(&others, &weights(m2.len(), *min2, false));
                }
            }
            let num = mass_at(&convolve(&others, &weights(members.len(), *min, true)));
            let den = mass_at(&convolve(&others, &weights(members.len(), *min, false)));
            for &n in members {
                marginals[n] = if self.budget.is_none() && *min == 0 { 0.5 } else { num / den };
            }
        }
        marginals
    }

    /// Category layout used by the conditioned model.
    fn categories(&self) -> (Vec<Category>, Vec<usize>) {
        let pa = self.activation_probability();
        let mut cats: Vec<Category> = Vec::new();
        let mut user_cat = vec![usize::MAX; self.n_users()];
        let independent = |p: f64, users: Vec<usize>, cats: &mut Vec<Category>, uc: &mut Vec<usize>| {
            if users.is_empty() {
                return;
            }
            let id = cats.len();
            cats.push(Category { kind: CategoryKind::Independent { p }, size: users.len() });
            for n in users {
                uc[n] = id;
            }
        };
        let select = |f: &dyn Fn(&ActivityEvidence) -> bool| -> Vec<usize> {
            (0..self.n_users()).filter(|&n| f(&self.evidence[n])).collect()
        };
        independent(
            self.departed_stay_active(),
            select(&|e| *e == ActivityEvidence::KnownActive { departed: true }),
            &mut cats,
            &mut user_cat,
        );
        independent(
            1.0,
            select(&|e| *e == ActivityEvidence::KnownActive { departed: false }),
            &mut cats,
            &mut user_cat,
        );
        independent(pa, select(&|e| *e == ActivityEvidence::KnownInactive), &mut cats, &mut user_cat);

        let free = select(&|e| *e == ActivityEvidence::Unconstrained);
        if self.budget.is_none() {
            independent(0.5 + 0.5 * pa, free, &mut cats, &mut user_cat);
        } else if !free.is_empty() {
            let id = cats.len();
            cats.push(Category {
                kind: CategoryKind::Budgeted { min_active: 0, p_new: pa },
                size: free.len(),
            });
            for n in free {
                user_cat[n] = id;
            }
        }
        for c in &self.constraints {
            let id = cats.len();
            cats.push(Category {
                kind: CategoryKind::Budgeted { min_active: c.min_active, p_new: pa },
                size: c.members.len(),
            });
            for &n in &c.members {
                user_cat[n] = id;
            }
        }
        debug_assert!(user_cat.iter().all(|&c| c != usize::MAX));
        (cats, user_cat)
    }
}

/// Current-frame success probabilities under the compatible-class belief,
/// conditioned on exactly `nu` active users. Results are cached per group
/// composition, since users in one category are exchangeable.
#[derive(Debug, Clone)]
pub struct ConditionedClassModel {
    categories: Vec<Category>,
    user_category: Vec<usize>,
    budget: Option<usize>,
    nu: usize,
    normaliser: f64,
    pascal: Pascal,
    cache: HashMap<Vec<u8>, f64>,
}

impl ConditionedClassModel {
    pub fn new(cb: &CompatibleClassBelief, nu: usize) -> Result<Self> {
        let (categories, user_category) = cb.categories();
        let mut model = ConditionedClassModel {
            categories,
            user_category,
            budget: cb.budget,
            nu,
            normaliser: 0.0,
            pascal: Pascal::new(cb.n_users()),
            cache: HashMap::new(),
        };
        let zero = vec![0u8; model.categories.len()];
        let dp = model.joint(&zero);
        model.normaliser = dp.iter().sum();
        if model.normaliser.is_nan() || model.normaliser <= 0.0 {
            return Err(infeasible(format!("nu(t) = {nu} has zero probability under the class model")));
        }
        Ok(model)
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn n_users(&self) -> usize {
        self.user_category.len()
    }

    fn composition(&self, group: u64) -> Vec<u8> {
        let mut comp = vec![0u8; self.categories.len()];
        let mut m = group;
        while m != 0 {
            let n = m.trailing_zeros() as usize;
            comp[self.user_category[n]] += 1;
            m &= m - 1;
        }
        comp
    }

    /// Unnormalised masses of "exactly `nu` active and `j` group members
    /// active" for `j` in {0, 1, 2+}.
    fn joint(&self, comp: &[u8]) -> [f64; 3] {
        let pascal = &self.pascal;
        let nu = self.nu;
        let r_max = self.budget.unwrap_or(0);
        let kdim = nu + 1;
        let idx = |r: usize, k: usize, j: usize| (r * kdim + k) * 3 + j;
        let mut dp = vec![0.0; (r_max + 1) * kdim * 3];
        dp[idx(0, 0, 0)] = 1.0;

        for (cat, &g) in self.categories.iter().zip(comp) {
            let g = g as usize;
            let h = cat.size - g;
            // entries (r added, s active, j group-active capped at 2, weight)
            let mut table: Vec<(usize, usize, usize, f64)> = Vec::new();
            match cat.kind {
                CategoryKind::Independent { p } => {
                    for x in 0..=g.min(nu) {
                        let wx = pascal.binom_pmf(g, p, x);
                        if wx == 0.0 {
                            continue;
                        }
                        for y in 0..=h.min(nu - x) {
                            let w = wx * pascal.binom_pmf(h, p, y);
                            if w > 0.0 {
                                table.push((0, x + y, x.min(2), w));
                            }
                        }
                    }
                }
                CategoryKind::Budgeted { min_active, p_new } => {
                    let a_max = match self.budget {
                        Some(r) => cat.size.min(r),
                        None => cat.size,
                    };
                    for a in min_active..=a_max {
                        if a > nu {
                            break;
                        }
                        let radd = if self.budget.is_some() { a } else { 0 };
                        for i in a.saturating_sub(h)..=g.min(a) {
                            let c = pascal.choose(g, i) * pascal.choose(h, a - i);
                            let g_idle = g - i;
                            let h_idle = h - (a - i);
                            for x in 0..=g_idle.min(nu - a) {
                                let wx = c * pascal.binom_pmf(g_idle, p_new, x);
                                if wx == 0.0 {
                                    continue;
                                }
                                for y in 0..=h_idle.min(nu - a - x) {
                                    let w = wx * pascal.binom_pmf(h_idle, p_new, y);
                                    if w > 0.0 {
                                        table.push((radd, a + x + y, (i + x).min(2), w));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            let mut next = vec![0.0; dp.len()];
            for r in 0..=r_max {
                for k in 0..kdim {
                    for j in 0..3 {
                        let v = dp[idx(r, k, j)];
                        if v == 0.0 {
                            continue;
                        }
                        for &(radd, s, jx, w) in &table {
                            if r + radd > r_max || k + s > nu {
                                continue;
                            }
                            next[idx(r + radd, k + s, (j + jx).min(2))] += v * w;
                        }
                    }
                }
            }
            dp = next;
        }
        [dp[idx(r_max, nu, 0)], dp[idx(r_max, nu, 1)], dp[idx(r_max, nu, 2)]]
    }

    /// `P(exactly one member of group active | nu active)`.
    pub fn success(&mut self, group: u64) -> f64 {
        let comp = self.composition(group);
        if let Some(&v) = self.cache.get(&comp) {
            return v;
        }
        let v = (self.joint(&comp)[1] / self.normaliser).clamp(0.0, 1.0);
        self.cache.insert(comp, v);
        v
    }

    /// Per-user posterior activity probabilities at the current frame.
    pub fn activation_probabilities(&mut self) -> Vec<f64> {
        (0..self.n_users()).map(|n| self.success(1 << n)).collect()
    }
}

/// Conditioned success probability of `slot` under `assignment`.
pub fn conditioned_success_dp(
    cb: &CompatibleClassBelief,
    obs_nu: usize,
    assignment: &Assignment,
    slot: usize,
) -> Result<f64> {
    let mut model = ConditionedClassModel::new(cb, obs_nu)?;
    Ok(model.success(assignment.slot_mask(slot)))
}
