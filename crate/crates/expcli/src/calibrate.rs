//! Randomized differential suites pitting production code against the
//! brute-force oracles.

use pima::belief::{
    filter_update, sgfeo_reconstruct, ArrivalKernel, Belief, ConditionedClassModel, StateSpace,
};
use pima::oracle::{
    assignment_efficiency, brute_force_conditioned_success, enumerate_filter, exhaustive_partition,
    exhaustive_schedule, mc_class_success_estimate, mc_success_estimate, OracleBudget,
};
use pima::schedulers::pima::partition_efficiency;
use pima::schedulers::{gfeo_schedule, pima_baseline_schedule};
use pima::traffic::{rng_fork, RngStream};
use pima::{Assignment, EfficiencyMode, Observation, SimTime};
use rand::Rng;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Random compact assignment of `n` users, or the empty frame.
pub fn random_assignment(n: usize, rng: &mut RngStream, allow_empty: bool) -> Assignment {
    if allow_empty && rng.random::<f64>() < 0.1 {
        return Assignment::empty(n);
    }
    let l2 = rng.random_range(1..=n);
    let raw: Vec<usize> = (0..n).map(|_| rng.random_range(1..=l2)).collect();
    // relabel slots by first appearance
    let mut map = vec![0usize; l2 + 1];
    let mut next = 0;
    let q = raw
        .iter()
        .map(|&s| {
            if map[s] == 0 {
                next += 1;
                map[s] = next;
            }
            map[s]
        })
        .collect();
    Assignment::new(q).expect("relabelled assignment is compact")
}

/// Random belief over `space`, optionally restricted to `active` users.
pub fn random_belief(space: &StateSpace, active: Option<usize>, rng: &mut RngStream) -> Belief {
    loop {
        let mut entries = Vec::new();
        for c in (0..space.size()).filter(|&c| active.is_none_or(|k| space.active_mask(c).count_ones() as usize == k)) {
            if rng.random::<f64>() < 0.5 {
                entries.push((c, rng.random::<f64>() + 1e-3));
            }
        }
        if let Ok(b) = Belief::from_codes(space.clone(), entries, 0) {
            return b;
        }
    }
}

/// Feedback of `assignment` when `levels` are the buffer levels, plus the
/// levels after departures.
fn play(levels: &[u8], assignment: &Assignment) -> (Vec<bool>, std::collections::BTreeSet<usize>, Vec<u8>) {
    let n = levels.len();
    let mut acks = vec![false; n];
    let mut collided = std::collections::BTreeSet::new();
    let mut after = levels.to_vec();
    for slot in 1..=assignment.l2() {
        let on: Vec<usize> = assignment.members(slot).filter(|&u| levels[u] > 0).collect();
        match on.len() {
            0 => {}
            1 => {
                acks[on[0]] = true;
                after[on[0]] -= 1;
            }
            _ => {
                collided.insert(slot);
            }
        }
    }
    (acks, collided, after)
}

fn sample_arrivals(after: &[u8], kernel: &ArrivalKernel, rng: &mut RngStream) -> Vec<u8> {
    after
        .iter()
        .map(|&l| {
            let mut u = rng.random::<f64>();
            for &(to, p) in kernel.row(l) {
                if u < p {
                    return to;
                }
                u -= p;
            }
            kernel.row(l).last().expect("non-empty row").0
        })
        .collect()
}

fn sample_state(belief: &Belief, rng: &mut RngStream) -> Vec<u8> {
    let mut u = rng.random::<f64>();
    for (state, p) in belief.iter() {
        if u < p {
            return state.0;
        }
        u -= p;
    }
    belief.iter().last().expect("non-empty belief").0 .0
}

/// Random consistent `(prior, observation, arrival mean)`. One in ten
/// observations carries a perturbed count, which may be impossible.
pub fn random_filter_instance(n: usize, c: usize, rng: &mut RngStream) -> (Belief, Observation, f64) {
    let space = StateSpace::new(n, c).expect("small state space");
    let prior = random_belief(&space, None, rng);
    let assignment = random_assignment(n, rng, true);
    let truth = sample_state(&prior, rng);
    let (acks, collided_slots, after) = play(&truth, &assignment);
    let mean = rng.random_range(0.05..1.0);
    let next = sample_arrivals(&after, &ArrivalKernel::new(mean, c), rng);
    let mut nu = next.iter().filter(|&&l| l > 0).count();
    if rng.random::<f64>() < 0.1 {
        nu = rng.random_range(0..=n);
    }
    let frame_len = SimTime(0.1 + assignment.l2() as f64);
    let obs = Observation { nu, acks, collided_slots, prev_assignment: assignment, prev_frame_len: frame_len };
    (prior, obs, mean)
}

/// Sparse filter against dense enumeration: worst total variation and
/// error parity.
pub fn filter_suite(n: usize, c: usize, instances: usize, seed: u64) -> CheckReport {
    let mut rng = rng_fork(seed, 0);
    let budget = OracleBudget::default();
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut impossible = 0;
    for _ in 0..instances {
        let (prior, obs, mean) = random_filter_instance(n, c, &mut rng);
        match (filter_update(&prior, &obs, mean, 1e-12), enumerate_filter(&prior, &obs, mean, &budget)) {
            (Ok(a), Ok(b)) => worst = worst.max(a.total_variation(&b)),
            (Err(_), Err(_)) => impossible += 1,
            _ => mismatches += 1,
        }
    }
    CheckReport {
        name: format!("filter vs enumeration (N={n}, C={c})"),
        passed: worst <= 1e-12 && mismatches == 0,
        detail: format!(
            "{instances} instances, max TV {worst:.3e}, {impossible} impossible on both sides, {mismatches} parity mismatches"
        ),
    }
}

/// Class-model success probability against the brute-force enumeration.
pub fn class_dp_suite(instances: usize, seed: u64) -> CheckReport {
    let mut rng = rng_fork(seed, 1);
    let budget = OracleBudget::dp_checks();
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut impossible = 0;
    for _ in 0..instances {
        let n = rng.random_range(2..=6);
        let c = rng.random_range(2..=3);
        let assignment = random_assignment(n, &mut rng, true);
        let levels: Vec<u8> =
            (0..n).map(|_| if rng.random::<f64>() < 0.45 { rng.random_range(1..=c as u8) } else { 0 }).collect();
        let (acks, collided_slots, after) = play(&levels, &assignment);
        let prev_active = levels.iter().filter(|&&l| l > 0).count();
        let prev_nu = (rng.random::<f64>() < 0.8).then_some(prev_active);
        let mean = rng.random_range(0.05..1.0);
        let next = sample_arrivals(&after, &ArrivalKernel::new(mean, c), &mut rng);
        let nu = next.iter().filter(|&&l| l > 0).count();
        let group = loop {
            let g = rng.random_range(1u64..(1 << n));
            if g != 0 {
                break g;
            }
        };
        let obs = Observation {
            nu,
            acks,
            collided_slots,
            prev_assignment: assignment,
            prev_frame_len: SimTime(1.0),
        };
        let dp = sgfeo_reconstruct(&obs, prev_nu, mean, c)
            .and_then(|cb| ConditionedClassModel::new(&cb, nu))
            .map(|mut m| m.success(group));
        let brute = brute_force_conditioned_success(&obs, prev_nu, mean, c, nu, group, &budget);
        match (dp, brute) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b).abs()),
            (Err(_), Err(_)) => impossible += 1,
            _ => mismatches += 1,
        }
    }
    CheckReport {
        name: "class-model DP vs brute force (N<=6)".into(),
        passed: worst <= 1e-9 && mismatches == 0,
        detail: format!(
            "{instances} instances, max |diff| {worst:.3e}, {impossible} impossible on both sides, {mismatches} parity mismatches"
        ),
    }
}

/// Greedy placement against exhaustive search on `nu`-conditioned beliefs.
/// Fails only when the greedy value exceeds the optimum.
pub fn greedy_suite(n: usize, c: usize, instances: usize, seed: u64) -> CheckReport {
    let mut rng = rng_fork(seed, 2);
    let budget = OracleBudget::default();
    let space = StateSpace::new(n, c).expect("small state space");
    let (l1, mode) = (0.1, EfficiencyMode::FullFrame);
    let mut violations = 0;
    let mut gap_sum = 0.0;
    let mut equal = 0;
    for _ in 0..instances {
        let nu = rng.random_range(1..=n);
        let belief = random_belief(&space, Some(nu), &mut rng);
        let greedy = assignment_efficiency(&belief, &gfeo_schedule(&belief, nu, l1, mode), l1, mode);
        let (_, best) = exhaustive_schedule(&belief, nu, l1, mode, &budget).expect("within budget");
        if greedy > best + 1e-12 {
            violations += 1;
        }
        if (best - greedy).abs() <= 1e-12 {
            equal += 1;
        }
        gap_sum += (best - greedy) / best;
    }
    CheckReport {
        name: format!("greedy vs exhaustive (N={n}, C={c})"),
        passed: violations == 0,
        detail: format!(
            "{instances} beliefs, {violations} optimality violations, optimal on {equal}, mean relative gap {:.4}",
            gap_sum / instances as f64
        ),
    }
}

/// Baseline partition rule against the exhaustive partition search.
pub fn partition_suite() -> CheckReport {
    let budget = OracleBudget::default();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=10 {
        for nu in 1..=n {
            for l1 in [0.0, 0.1, 0.25, 1.0] {
                let mode = EfficiencyMode::FullFrame;
                let a = pima_baseline_schedule(nu, n, l1, mode);
                let eta = partition_efficiency(&a.group_sizes(), nu, n, l1, mode);
                let (_, best) = exhaustive_partition(nu, n, l1, mode, &budget).expect("within budget");
                worst = worst.max(best - eta);
                cases += 1;
            }
        }
    }
    CheckReport {
        name: "baseline vs exhaustive partition (N<=10)".into(),
        passed: worst <= 1e-12,
        detail: format!("{cases} cases, max shortfall {worst:.3e}"),
    }
}

/// Monte-Carlo estimates inside four binomial standard errors.
pub fn monte_carlo_suite(instances: usize, seed: u64) -> CheckReport {
    let mut rng = rng_fork(seed, 3);
    let samples = 20_000;
    let mut outliers = 0;
    let mut checked = 0;
    for i in 0..instances {
        let n = 3;
        let (analytic, estimate) = if i % 2 == 0 {
            let space = StateSpace::new(n, 2).expect("small state space");
            let belief = random_belief(&space, None, &mut rng);
            let a = random_assignment(n, &mut rng, false);
            let analytic = pima::belief::slot_success_probability(&belief, &a, 1);
            (analytic, Some(mc_success_estimate(&belief, &a, 1, samples, &mut rng)))
        } else {
            let (_, obs, mean) = random_filter_instance(n, 2, &mut rng);
            let Ok(cb) = sgfeo_reconstruct(&obs, None, mean, 2) else { continue };
            let Ok(mut m) = ConditionedClassModel::new(&cb, obs.nu) else { continue };
            let a = random_assignment(n, &mut rng, false);
            let analytic = m.success(a.slot_mask(1));
            (analytic, mc_class_success_estimate(&cb, obs.nu, &a, 1, samples, &mut rng))
        };
        let Some(estimate) = estimate else { continue };
        let sigma = (analytic * (1.0 - analytic) / samples as f64).sqrt().max(1.0 / samples as f64);
        if (estimate - analytic).abs() > 4.0 * sigma + 1e-3 {
            outliers += 1;
        }
        checked += 1;
    }
    CheckReport {
        name: "Monte-Carlo success estimates".into(),
        passed: outliers == 0,
        detail: format!("{checked} estimates, {outliers} outside 4 sigma"),
    }
}

pub fn run_calibration(seed: u64) -> Vec<CheckReport> {
    vec![
        filter_suite(2, 2, 100, seed),
        filter_suite(3, 2, 20, seed),
        class_dp_suite(100, seed),
        greedy_suite(4, 2, 200, seed),
        partition_suite(),
        monte_carlo_suite(40, seed),
    ]
}
