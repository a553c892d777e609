//! Baseline PIMA scheduler: only the active-user count is known, so users
//! are exchangeable and the `nu` actives form a uniformly random subset.
//! The users are split into `L2` groups of near-equal size, and `L2` is chosen
//! to maximise the frame efficiency. A group of `k` users succeeds with the
//! hypergeometric probability `k * C(N-k, nu-1) / C(N, nu)`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::types::{Assignment, EfficiencyMode};

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that a group of `k` users holds exactly one of `nu` actives
/// drawn uniformly among `n_users`.
pub fn group_success_probability(k: usize, nu: usize, n_users: usize) -> f64 {
    if nu == 0 || k == 0 {
        return 0.0;
    }
    k as f64 * choose(n_users - k, nu - 1) / choose(n_users, nu)
}

/// Near-equal group sizes: the first `N mod L2` groups get one extra user.
pub fn balanced_sizes(n_users: usize, l2: usize) -> Vec<usize> {
    (0..l2).map(|g| n_users / l2 + usize::from(g < n_users % l2)).collect()
}

/// Frame efficiency of a partition with the given group sizes.
pub fn partition_efficiency(sizes: &[usize], nu: usize, n_users: usize, l1: f64, mode: EfficiencyMode) -> f64 {
    let total: f64 = sizes.iter().map(|&k| group_success_probability(k, nu, n_users)).sum();
    total / mode.denominator(l1, sizes.len())
}

/// Best balanced partition, users filled into groups in index order.
pub fn pima_baseline_schedule(nu: usize, n_users: usize, l1: f64, mode: EfficiencyMode) -> Assignment {
    assert!(nu <= n_users, "nu = {nu} exceeds N = {n_users}");
    if nu == 0 {
        return Assignment::empty(n_users);
    }
    let mut best_l2 = 1;
    let mut best_eta = f64::NEG_INFINITY;
    for l2 in 1..=n_users {
        let eta = partition_efficiency(&balanced_sizes(n_users, l2), nu, n_users, l1, mode);
        if eta > best_eta + 1e-12 {
            best_eta = eta;
            best_l2 = l2;
        }
    }
    let mut q = Vec::with_capacity(n_users);
    for (g, size) in balanced_sizes(n_users, best_l2).into_iter().enumerate() {
        q.extend(std::iter::repeat_n(g + 1, size));
    }
    Assignment::new(q).expect("balanced partition is compact")
}

/// Applies a uniformly random relabelling of the users to `assignment`.
pub fn shuffle_users<R: Rng + ?Sized>(assignment: &Assignment, rng: &mut R) -> Assignment {
    let mut perm: Vec<usize> = (0..assignment.n_users()).collect();
    perm.shuffle(rng);
    let q = perm.iter().map(|&src| assignment.slot_of(src)).collect();
    Assignment::new(q).expect("relabelling keeps every slot occupied")
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: EfficiencyMode = EfficiencyMode::FullFrame;

    #[test]
    fn single_active_shares_one_slot() {
        for n in [1, 2, 5, 30] {
            let a = pima_baseline_schedule(1, n, 0.1, FULL);
            assert_eq!(a.l2(), 1);
            assert!((group_success_probability(n, 1, n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn all_active_gets_singletons() {
        for n in [1, 3, 5, 12] {
            let a = pima_baseline_schedule(n, n, 0.1, FULL);
            assert_eq!(a.l2(), n);
            let eta = partition_efficiency(&a.group_sizes(), n, n, 0.1, FULL);
            assert!((eta - n as f64 / (0.1 + n as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_of_five() {
        // sizes {3,2}: 3*C(2,1)/C(5,2) = 0.6 and 2*C(3,1)/10 = 0.6
        let a = pima_baseline_schedule(2, 5, 0.1, FULL);
        assert_eq!(a.q(), &[1, 1, 1, 2, 2]);
        assert!((partition_efficiency(&a.group_sizes(), 2, 5, 0.1, FULL) - 1.2 / 2.1).abs() < 1e-12);
    }

    #[test]
    fn empty_frame_without_actives() {
        assert!(pima_baseline_schedule(0, 5, 0.1, FULL).is_empty_frame());
    }
}
