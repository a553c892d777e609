//! Collision channel: frame executor for PIMA-family and TDMA frames, and a
//! frame-less slot harness for slotted ALOHA.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{Assignment, LatencyReference, Packet, SimTime, SlotOutcome, UserQueue};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    /// One outcome per data slot, indexed by `slot - 1`.
    pub outcomes: Vec<SlotOutcome>,
    pub acks: Vec<bool>,
    pub collided_slots: BTreeSet<usize>,
    pub nu_at_start: usize,
    pub frame_start: SimTime,
    pub frame_len: SimTime,
    pub delivered: Vec<Packet>,
}

impl FrameResult {
    pub fn successes(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_success()).count()
    }

    pub fn frame_end(&self) -> SimTime {
        self.frame_start + self.frame_len
    }
}

/// Ack vector implied by a list of slot outcomes.
pub fn acks_from_outcomes(outcomes: &[SlotOutcome], n_users: usize) -> Vec<bool> {
    let mut acks = vec![false; n_users];
    for o in outcomes {
        if let SlotOutcome::Success(n) = o {
            acks[*n] = true;
        }
    }
    acks
}

/// Number of users with at least one eligible packet.
pub fn count_active(queues: &[UserQueue]) -> usize {
    queues.iter().filter(|q| q.is_active()).count()
}

/// Runs the data sub-frame of `assignment` after an enumeration phase of
/// `l1` slots. Only eligible packets are transmitted.
pub fn execute_frame(
    assignment: &Assignment,
    queues: &mut [UserQueue],
    frame_start: SimTime,
    l1: f64,
    reference: LatencyReference,
) -> Result<FrameResult> {
    let n_users = queues.len();
    if assignment.n_users() != n_users {
        return Err(Error::InvalidAssignment(format!(
            "assignment covers {} users, system has {n_users}",
            assignment.n_users()
        )));
    }
    let l2 = assignment.l2();
    let nu_at_start = count_active(queues);
    if l2 > 0 {
        if let Some(q) = queues.iter().find(|q| q.is_active() && assignment.slot_of(q.user) == 0) {
            return Err(Error::InvalidAssignment(format!(
                "active user {} has no slot in a non-empty frame",
                q.user
            )));
        }
    }

    let mut transmitters: Vec<Vec<usize>> = vec![Vec::new(); l2];
    for q in queues.iter().filter(|q| q.is_active()) {
        let slot = assignment.slot_of(q.user);
        if slot > 0 {
            transmitters[slot - 1].push(q.user);
        }
    }

    let mut outcomes = Vec::with_capacity(l2);
    let mut collided_slots = BTreeSet::new();
    let mut delivered = Vec::new();
    for (idx, tx) in transmitters.into_iter().enumerate() {
        let outcome = SlotOutcome::from_transmitters(tx);
        match &outcome {
            SlotOutcome::Success(n) => {
                let slot_start = frame_start + l1 + idx as f64;
                let packet = queues[*n]
                    .deliver_head(reference.stamp(slot_start))
                    .expect("active user has a head packet");
                delivered.push(packet);
            }
            SlotOutcome::Collision(_) => {
                collided_slots.insert(idx + 1);
            }
            SlotOutcome::Idle => {}
        }
        outcomes.push(outcome);
    }

    Ok(FrameResult {
        acks: acks_from_outcomes(&outcomes, n_users),
        outcomes,
        collided_slots,
        nu_at_start,
        frame_start,
        frame_len: SimTime(l1 + l2 as f64),
        delivered,
    })
}

/// TDMA frame of `N` slots, user `n` owning slot `n + 1`. Eligibility is
/// evaluated at each slot start: `before_slot` must add every packet
/// generated before that instant. `nu_at_start` counts the users that had a
/// packet at their own slot.
pub fn execute_tdma_frame<F>(
    queues: &mut [UserQueue],
    frame_start: SimTime,
    reference: LatencyReference,
    mut before_slot: F,
) -> FrameResult
where
    F: FnMut(SimTime, &mut [UserQueue]),
{
    let n_users = queues.len();
    let mut outcomes = Vec::with_capacity(n_users);
    let mut delivered = Vec::new();
    for user in 0..n_users {
        let slot_start = frame_start + user as f64;
        before_slot(slot_start, queues);
        let queue = &mut queues[user];
        queue.refresh_eligibility(slot_start);
        if queue.is_active() {
            let packet = queue.deliver_head(reference.stamp(slot_start)).expect("non-empty");
            delivered.push(packet);
            outcomes.push(SlotOutcome::Success(user));
        } else {
            outcomes.push(SlotOutcome::Idle);
        }
    }
    FrameResult {
        acks: acks_from_outcomes(&outcomes, n_users),
        nu_at_start: delivered.len(),
        outcomes,
        collided_slots: BTreeSet::new(),
        frame_start,
        frame_len: SimTime(n_users as f64),
        delivered,
    }
}

/// Per-slot transmit-probability policy driven by ternary feedback.
pub trait SlottedPolicy {
    fn transmit_probability(&self) -> f64;
    fn observe(&mut self, outcome: &SlotOutcome);
}

/// Fixed transmit probability, no adaptation.
#[derive(Debug, Clone, Copy)]
pub struct FixedProbability(pub f64);

impl SlottedPolicy for FixedProbability {
    fn transmit_probability(&self) -> f64 {
        self.0
    }
    fn observe(&mut self, _outcome: &SlotOutcome) {}
}

/// Frame-less slotted channel over `horizon_slots` unit slots starting at
/// slot index `first_slot`. `before_slot` adds arrivals generated before the
/// slot start; `after_slot` sees the outcome and the delivered packet.
#[allow(clippy::too_many_arguments)]
pub fn run_slotted<P, R, B, A>(
    policy: &mut P,
    queues: &mut [UserQueue],
    first_slot: u64,
    horizon_slots: u64,
    rng: &mut R,
    reference: LatencyReference,
    mut before_slot: B,
    mut after_slot: A,
) -> Vec<SlotOutcome>
where
    P: SlottedPolicy + ?Sized,
    R: Rng + ?Sized,
    B: FnMut(SimTime, &mut [UserQueue]),
    A: FnMut(u64, &SlotOutcome, Option<&Packet>),
{
    let mut outcomes = Vec::with_capacity(horizon_slots as usize);
    for k in first_slot..first_slot + horizon_slots {
        let slot_start = SimTime(k as f64);
        before_slot(slot_start, queues);
        let p = policy.transmit_probability();
        let mut tx = Vec::new();
        for q in queues.iter_mut() {
            q.refresh_eligibility(slot_start);
            // One coin per backlogged user keeps the coin stream aligned.
            if q.is_active() && rng.random::<f64>() < p {
                tx.push(q.user);
            }
        }
        let outcome = SlotOutcome::from_transmitters(tx);
        let packet = match &outcome {
            SlotOutcome::Success(n) => queues[*n].deliver_head(reference.stamp(slot_start)),
            _ => None,
        };
        policy.observe(&outcome);
        after_slot(k, &outcome, packet.as_ref());
        outcomes.push(outcome);
    }
    outcomes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::rng_fork;

    fn queues_with(levels: &[usize]) -> Vec<UserQueue> {
        let mut id = 0;
        levels
            .iter()
            .enumerate()
            .map(|(n, &k)| {
                let mut q = UserQueue::new(n);
                for i in 0..k {
                    q.push(Packet {
                        id,
                        user: n,
                        generated_at: SimTime(0.1 * i as f64),
                        delivered_at: None,
                    });
                    id += 1;
                }
                q.refresh_eligibility(SimTime(10.0));
                q
            })
            .collect()
    }

    #[test]
    fn counts_active_users() {
        assert_eq!(count_active(&queues_with(&[0, 0, 0, 0, 0])), 0);
        assert_eq!(count_active(&queues_with(&[2, 0, 1, 0, 0])), 2);
        assert_eq!(count_active(&queues_with(&[1, 1, 1, 1, 1])), 5);
    }

    #[test]
    fn lone_transmitter_succeeds() {
        let mut qs = queues_with(&[1, 0]);
        let a = Assignment::new(vec![1, 1]).unwrap();
        let r = execute_frame(&a, &mut qs, SimTime(10.0), 0.1, LatencyReference::SlotEnd).unwrap();
        assert_eq!(r.outcomes, vec![SlotOutcome::Success(0)]);
        assert_eq!(r.acks, vec![true, false]);
        assert_eq!(r.delivered[0].delivered_at, Some(SimTime(11.1)));
        assert!(qs[0].is_empty());
    }

    #[test]
    fn collision_keeps_packets() {
        let mut qs = queues_with(&[1, 1]);
        let a = Assignment::new(vec![1, 1]).unwrap();
        let r = execute_frame(&a, &mut qs, SimTime(10.0), 0.1, LatencyReference::SlotEnd).unwrap();
        assert_eq!(r.outcomes, vec![SlotOutcome::Collision(vec![0, 1])]);
        assert_eq!(r.collided_slots, [1].into_iter().collect());
        assert_eq!(qs[0].len() + qs[1].len(), 2);
    }

    #[test]
    fn mixed_frame() {
        let mut qs = queues_with(&[1, 1, 1]);
        let a = Assignment::new(vec![1, 2, 2]).unwrap();
        let r = execute_frame(&a, &mut qs, SimTime(10.0), 0.25, LatencyReference::SlotStart).unwrap();
        assert_eq!(r.outcomes, vec![SlotOutcome::Success(0), SlotOutcome::Collision(vec![1, 2])]);
        assert_eq!(r.acks, vec![true, false, false]);
        assert_eq!(r.collided_slots, [2].into_iter().collect());
        assert_eq!(r.delivered[0].delivered_at, Some(SimTime(10.25)));
        assert!((r.frame_len.0 - 2.25).abs() < 1e-12);
    }

    #[test]
    fn malformed_assignment_is_rejected() {
        let mut qs = queues_with(&[1, 1]);
        let a = Assignment::partial(vec![1, 0]);
        assert!(execute_frame(&a, &mut qs, SimTime(10.0), 0.1, LatencyReference::SlotEnd).is_err());
    }

    #[test]
    fn acks_are_a_function_of_outcomes() {
        let mut qs = queues_with(&[1, 2, 0, 1]);
        let a = Assignment::new(vec![1, 2, 2, 3]).unwrap();
        let r = execute_frame(&a, &mut qs, SimTime(5.0), 0.1, LatencyReference::SlotEnd).unwrap();
        assert_eq!(r.acks, acks_from_outcomes(&r.outcomes, 4));
        assert_eq!(r.acks, vec![true, true, false, true]);
    }

    #[test]
    fn slotted_always_transmit() {
        let mut qs = queues_with(&[3]);
        let mut rng = rng_fork(0, 0);
        let out = run_slotted(
            &mut FixedProbability(1.0),
            &mut qs,
            10,
            5,
            &mut rng,
            LatencyReference::SlotStart,
            |_, _| {},
            |_, _, _| {},
        );
        assert_eq!(out[..3], [SlotOutcome::Success(0), SlotOutcome::Success(0), SlotOutcome::Success(0)]);
        assert_eq!(out[3..], [SlotOutcome::Idle, SlotOutcome::Idle]);

        let mut qs = queues_with(&[2, 2]);
        let out = run_slotted(
            &mut FixedProbability(1.0),
            &mut qs,
            10,
            50,
            &mut rng,
            LatencyReference::SlotStart,
            |_, _| {},
            |_, _, _| {},
        );
        assert!(out.iter().all(|o| o.is_collision()));
    }

    #[test]
    fn slotted_half_probability_success_rate() {
        // Queues are refilled before each slot so both users stay backlogged.
        let mut qs = queues_with(&[1, 1]);
        let mut rng = rng_fork(11, 0);
        let slots = 100_000u64;
        let mut next_id = 1000;
        let out = run_slotted(
            &mut FixedProbability(0.5),
            &mut qs,
            10,
            slots,
            &mut rng,
            LatencyReference::SlotStart,
            |_, qs| {
                for q in qs.iter_mut() {
                    if q.is_empty() {
                        q.push(Packet { id: next_id, user: q.user, generated_at: SimTime(0.0), delivered_at: None });
                        next_id += 1;
                    }
                }
            },
            |_, _, _| {},
        );
        let rate = out.iter().filter(|o| o.is_success()).count() as f64 / slots as f64;
        assert!((rate - 0.5).abs() < 0.01, "success rate {rate}");
    }

    #[test]
    fn tdma_frame_uses_slot_eligibility() {
        let mut qs: Vec<UserQueue> = (0..3).map(UserQueue::new).collect();
        // user 2 gets a packet at 1.5, before its slot at 2.0
        let r = execute_tdma_frame(&mut qs, SimTime(0.0), LatencyReference::SlotStart, |t, qs| {
            if t.0 == 2.0 {
                qs[2].push(Packet { id: 0, user: 2, generated_at: SimTime(1.5), delivered_at: None });
            }
        });
        assert_eq!(r.outcomes, vec![SlotOutcome::Idle, SlotOutcome::Idle, SlotOutcome::Success(2)]);
        assert_eq!(r.nu_at_start, 1);
        assert_eq!(r.delivered[0].latency(), Some(SimTime(0.5)));
    }
}
