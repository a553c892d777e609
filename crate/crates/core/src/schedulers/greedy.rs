//! Greedy slot placement shared by GFEO and S-GFEO.
//!
//! Users are visited by decreasing activation probability. Each one either
//! joins an existing slot or opens a new one, whichever yields the larger
//! frame efficiency; ties keep the frame short and prefer low slot indices.

use crate::types::{Assignment, EfficiencyMode};

/// Tolerance below which two efficiencies are treated as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Success model consulted by the greedy placement.
pub trait SuccessModel {
    fn n_users(&self) -> usize;
    fn activation_probabilities(&mut self) -> Vec<f64>;
    /// Probability that exactly one user of `group` is active.
    fn success(&mut self, group: u64) -> f64;
}

/// Visiting order: decreasing activation probability, ties by index.
pub fn activation_order(phi: &[f64]) -> Vec<usize> {
    let key = |p: f64| (p / TIE_TOLERANCE).round() as i64;
    let mut order: Vec<usize> = (0..phi.len()).collect();
    order.sort_by_key(|&n| (std::cmp::Reverse(key(phi[n])), n));
    order
}

/// How one placement was chosen; kept for diagnostics and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    pub assignment: Assignment,
    pub expected_efficiency: f64,
    pub activation: Vec<f64>,
}

pub fn greedy_assign<M: SuccessModel + ?Sized>(
    model: &mut M,
    nu: usize,
    l1: f64,
    mode: EfficiencyMode,
) -> GreedyOutcome {
    let n_users = model.n_users();
    let activation = model.activation_probabilities();
    if nu == 0 {
        return GreedyOutcome {
            assignment: Assignment::empty(n_users),
            expected_efficiency: 0.0,
            activation,
        };
    }
    let order = activation_order(&activation);
    let mut q = vec![0usize; n_users];
    let mut groups: Vec<u64> = Vec::with_capacity(n_users);
    let mut probs: Vec<f64> = Vec::with_capacity(n_users);

    let first = order[0];
    q[first] = 1;
    groups.push(1 << first);
    probs.push(model.success(1 << first));
    let mut total: f64 = probs[0];

    for &user in &order[1..] {
        let bit = 1u64 << user;
        let l2 = groups.len();
        let current_denominator = mode.denominator(l1, l2);
        let mut best_slot = 0;
        let mut best_prob = model.success(groups[0] | bit);
        let mut best_eta = (total - probs[0] + best_prob) / current_denominator;
        for l in 1..l2 {
            let p = model.success(groups[l] | bit);
            let eta = (total - probs[l] + p) / current_denominator;
            if eta > best_eta + TIE_TOLERANCE {
                best_slot = l;
                best_prob = p;
                best_eta = eta;
            }
        }
        let p_new = model.success(bit);
        let eta_new = (total + p_new) / mode.denominator(l1, l2 + 1);
        if eta_new > best_eta + TIE_TOLERANCE {
            groups.push(bit);
            probs.push(p_new);
            total += p_new;
            q[user] = l2 + 1;
        } else {
            groups[best_slot] |= bit;
            total += best_prob - probs[best_slot];
            probs[best_slot] = best_prob;
            q[user] = best_slot + 1;
        }
    }
    let l2 = groups.len();
    GreedyOutcome {
        assignment: Assignment::new(q).expect("greedy placement is compact"),
        expected_efficiency: total / mode.denominator(l1, l2),
        activation,
    }
}

/// Balanced assignment dealing users round-robin over `l2` slots in
/// visiting order, so the likeliest users land in distinct slots.
pub fn dealt_assignment(order: &[usize], l2: usize) -> Assignment {
    let mut q = vec![0usize; order.len()];
    for (i, &user) in order.iter().enumerate() {
        q[user] = i % l2 + 1;
    }
    Assignment::new(q).expect("l2 <= N keeps every slot occupied")
}

/// Greedy placement, replaced by the best round-robin deal over any `L2`
/// when that one is strictly better under the model. With exchangeable
/// users the deals are the balanced partitions, which a one-user-at-a-time
/// greedy cannot reach once an early slot is crowded.
pub fn greedy_or_dealt<M: SuccessModel + ?Sized>(
    model: &mut M,
    nu: usize,
    l1: f64,
    mode: EfficiencyMode,
) -> GreedyOutcome {
    let mut best = greedy_assign(model, nu, l1, mode);
    if nu == 0 {
        return best;
    }
    let order = activation_order(&best.activation);
    for l2 in 1..=order.len() {
        let a = dealt_assignment(&order, l2);
        let total: f64 = (1..=l2).map(|s| model.success(a.slot_mask(s))).sum();
        let eta = total / mode.denominator(l1, l2);
        if eta > best.expected_efficiency + TIE_TOLERANCE {
            best.assignment = a;
            best.expected_efficiency = eta;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_breaks_ties_by_index() {
        assert_eq!(activation_order(&[0.5, 0.9, 0.5, 1.0]), vec![3, 1, 0, 2]);
        assert_eq!(activation_order(&[0.5, 0.5 + 1e-16]), vec![0, 1]);
    }

    #[test]
    fn dealing_spreads_the_order() {
        assert_eq!(dealt_assignment(&[3, 1, 0, 2], 2).q(), &[1, 2, 2, 1]);
        assert_eq!(dealt_assignment(&[0, 1, 2], 3).q(), &[1, 2, 3]);
        assert_eq!(dealt_assignment(&[2, 0, 1], 1).q(), &[1, 1, 1]);
    }
}
