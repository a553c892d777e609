//! Shared domain types: simulation clock, configuration, packets, queues,
//! slot assignments and the per-frame observation available at the base
//! station.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulation time measured in slots. One slot lasts `slot_ms` milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SimTime(pub f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn slots(self) -> f64 {
        self.0
    }

    pub fn to_ms(self, slot_ms: f64) -> f64 {
        to_ms(self, slot_ms)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: f64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} slots", self.0)
    }
}

/// Length of a frame: enumeration sub-frame plus data sub-frame.
pub fn frame_length(l1: f64, assignment: &Assignment) -> SimTime {
    SimTime(l1 + assignment.l2() as f64)
}

pub fn to_ms(t: SimTime, slot_ms: f64) -> f64 {
    t.0 * slot_ms
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchedulerKind {
    #[serde(rename = "TDMA", alias = "tdma")]
    Tdma,
    #[serde(rename = "SALOHA", alias = "saloha")]
    Saloha,
    #[serde(rename = "PIMA", alias = "pima")]
    Pima,
    #[serde(rename = "GFEO", alias = "gfeo")]
    Gfeo,
    #[serde(rename = "SGFEO", alias = "sgfeo", alias = "S-GFEO")]
    Sgfeo,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 5] = [
        SchedulerKind::Tdma,
        SchedulerKind::Saloha,
        SchedulerKind::Pima,
        SchedulerKind::Gfeo,
        SchedulerKind::Sgfeo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Tdma => "TDMA",
            SchedulerKind::Saloha => "SALOHA",
            SchedulerKind::Pima => "PIMA",
            SchedulerKind::Gfeo => "GFEO",
            SchedulerKind::Sgfeo => "SGFEO",
        }
    }

    /// Label used in plots and reports.
    pub fn label(self) -> &'static str {
        match self {
            SchedulerKind::Sgfeo => "S-GFEO",
            other => other.name(),
        }
    }

    /// PIMA-family protocols share the enumeration + data frame structure.
    pub fn is_pima_family(self) -> bool {
        matches!(self, SchedulerKind::Pima | SchedulerKind::Gfeo | SchedulerKind::Sgfeo)
    }

    pub fn default_latency_reference(self) -> LatencyReference {
        if self.is_pima_family() {
            LatencyReference::SlotEnd
        } else {
            LatencyReference::SlotStart
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "TDMA" => Ok(SchedulerKind::Tdma),
            "SALOHA" => Ok(SchedulerKind::Saloha),
            "PIMA" => Ok(SchedulerKind::Pima),
            "GFEO" => Ok(SchedulerKind::Gfeo),
            "SGFEO" => Ok(SchedulerKind::Sgfeo),
            _ => Err(Error::InvalidConfig {
                field: "scheduler",
                reason: format!("unknown scheduler `{s}`"),
            }),
        }
    }
}

/// Denominator of the frame efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EfficiencyMode {
    /// Successes divided by the data sub-frame length `L2`.
    DtOnly,
    /// Successes divided by the whole frame `L1 + L2`.
    #[default]
    FullFrame,
}

impl EfficiencyMode {
    pub fn denominator(self, l1: f64, l2: usize) -> f64 {
        match self {
            EfficiencyMode::DtOnly => l2 as f64,
            EfficiencyMode::FullFrame => l1 + l2 as f64,
        }
    }
}

/// Which edge of the delivering slot stamps the delivery instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LatencyReference {
    SlotStart,
    SlotEnd,
}

impl LatencyReference {
    /// Delivery instant for a slot occupying `[slot_start, slot_start + 1)`.
    pub fn stamp(self, slot_start: SimTime) -> SimTime {
        match self {
            LatencyReference::SlotStart => slot_start,
            LatencyReference::SlotEnd => slot_start + 1.0,
        }
    }
}

fn default_slot_ms() -> f64 {
    0.125
}
fn default_pia_len() -> f64 {
    0.1
}
fn default_capacity() -> usize {
    8
}
fn default_horizon() -> u64 {
    200_000
}
fn default_prune() -> f64 {
    1e-12
}
fn default_tdma_cap() -> Option<usize> {
    Some(100)
}
fn default_warmup() -> f64 {
    0.1
}
fn default_gfeo_gate() -> usize {
    6
}
fn default_scheduler() -> SchedulerKind {
    SchedulerKind::Gfeo
}

/// How the baseline PIMA scheduler maps users onto its groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PimaUserOrder {
    /// Users fill the groups in index order every frame.
    Index,
    /// A fresh uniform relabelling of the users every frame.
    #[default]
    Shuffled,
}

/// Configuration of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_users: usize,
    /// Total arrival rate over all users, packets per slot.
    pub total_rate: f64,
    #[serde(default = "default_slot_ms")]
    pub slot_ms: f64,
    /// Enumeration sub-frame length, in slots.
    #[serde(default = "default_pia_len")]
    pub pia_len: f64,
    /// Per-user buffer cap of the belief state space.
    #[serde(default = "default_capacity")]
    pub belief_capacity: usize,
    #[serde(default = "default_horizon")]
    pub horizon_frames: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerKind,
    #[serde(default)]
    pub efficiency_denominator: EfficiencyMode,
    /// `None` selects the per-scheduler default.
    #[serde(default)]
    pub latency_reference: Option<LatencyReference>,
    #[serde(default = "default_prune")]
    pub prune_epsilon: f64,
    /// `None` means unbounded.
    #[serde(default = "default_tdma_cap")]
    pub tdma_queue_cap: Option<usize>,
    /// Fraction of frames (slots for SALOHA) excluded from every average.
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    /// Largest user count for which GFEO is allowed to run.
    #[serde(default = "default_gfeo_gate")]
    pub gfeo_max_users: usize,
    #[serde(default)]
    pub pima_user_order: PimaUserOrder,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_users: 5,
            total_rate: 0.1,
            slot_ms: default_slot_ms(),
            pia_len: default_pia_len(),
            belief_capacity: default_capacity(),
            horizon_frames: default_horizon(),
            seed: 0,
            scheduler: default_scheduler(),
            efficiency_denominator: EfficiencyMode::default(),
            latency_reference: None,
            prune_epsilon: default_prune(),
            tdma_queue_cap: default_tdma_cap(),
            warmup_fraction: default_warmup(),
            gfeo_max_users: default_gfeo_gate(),
            pima_user_order: PimaUserOrder::default(),
        }
    }
}

/// Users are packed into `u64` activity masks.
pub const MAX_USERS: usize = 64;

impl SimConfig {
    /// Per-user arrival rate `Λ / N`.
    pub fn per_user_rate(&self) -> f64 {
        self.total_rate / self.n_users as f64
    }

    pub fn latency_reference(&self) -> LatencyReference {
        self.latency_reference
            .unwrap_or_else(|| self.scheduler.default_latency_reference())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(Error::InvalidConfig { field, reason });
        if self.n_users == 0 || self.n_users > MAX_USERS {
            return bad("n_users", format!("must be in 1..={MAX_USERS}, got {}", self.n_users));
        }
        if !(self.total_rate.is_finite() && self.total_rate >= 0.0) {
            return bad("total_rate", format!("must be finite and >= 0, got {}", self.total_rate));
        }
        if !(self.slot_ms.is_finite() && self.slot_ms > 0.0) {
            return bad("slot_ms", format!("must be > 0, got {}", self.slot_ms));
        }
        if !(self.pia_len.is_finite() && self.pia_len >= 0.0) {
            return bad("pia_len", format!("must be >= 0, got {}", self.pia_len));
        }
        if self.belief_capacity == 0 || self.belief_capacity > 255 {
            return bad(
                "belief_capacity",
                format!("must be in 1..=255, got {}", self.belief_capacity),
            );
        }
        if self.horizon_frames == 0 {
            return bad("horizon_frames", "must be positive".into());
        }
        if !(self.prune_epsilon >= 0.0 && self.prune_epsilon < 1e-6) {
            return bad("prune_epsilon", format!("must be in [0, 1e-6), got {}", self.prune_epsilon));
        }
        if self.tdma_queue_cap == Some(0) {
            return bad("tdma_queue_cap", "must be positive or null (unbounded)".into());
        }
        if !(self.warmup_fraction >= 0.0 && self.warmup_fraction < 1.0) {
            return bad(
                "warmup_fraction",
                format!("must be in [0, 1), got {}", self.warmup_fraction),
            );
        }
        if self.scheduler == SchedulerKind::Gfeo && self.n_users > self.gfeo_max_users {
            return bad(
                "scheduler",
                format!(
                    "GFEO tracks (C+1)^N buffer states and is gated to N <= {} (got N = {}); \
                     use SGFEO or raise gfeo_max_users",
                    self.gfeo_max_users, self.n_users
                ),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    /// Zero-based user index.
    pub user: usize,
    pub generated_at: SimTime,
    pub delivered_at: Option<SimTime>,
}

impl Packet {
    pub fn latency(&self) -> Option<SimTime> {
        self.delivered_at.map(|d| d - self.generated_at)
    }
}

/// FIFO buffer of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserQueue {
    pub user: usize,
    pub packets: VecDeque<Packet>,
    /// Packets generated before the current frame start.
    pub eligible_count: usize,
}

impl UserQueue {
    pub fn new(user: usize) -> Self {
        UserQueue { user, packets: VecDeque::new(), eligible_count: 0 }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn is_active(&self) -> bool {
        self.eligible_count > 0
    }

    pub fn push(&mut self, packet: Packet) {
        debug_assert!(self
            .packets
            .back()
            .is_none_or(|p| p.generated_at <= packet.generated_at));
        self.packets.push_back(packet);
    }

    /// Recomputes the eligible prefix: packets generated strictly before `at`.
    pub fn refresh_eligibility(&mut self, at: SimTime) {
        self.eligible_count = self.packets.iter().take_while(|p| p.generated_at < at).count();
    }

    /// Removes the head-of-line packet and stamps its delivery.
    pub fn deliver_head(&mut self, at: SimTime) -> Option<Packet> {
        let mut packet = self.packets.pop_front()?;
        debug_assert!(at > packet.generated_at);
        packet.delivered_at = Some(at);
        self.eligible_count = self.eligible_count.saturating_sub(1);
        Some(packet)
    }

    pub fn drop_oldest(&mut self) -> Option<Packet> {
        let packet = self.packets.pop_front()?;
        self.eligible_count = self.eligible_count.saturating_sub(1);
        Some(packet)
    }
}

/// Slot selection vector: `q[n]` is the 1-based slot of user `n`, or `0`
/// when no data sub-frame is scheduled.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    q: Vec<usize>,
    l2: usize,
}

impl Assignment {
    /// Validates that every slot `1..=L2` has at least one user and that the
    /// sentinel `0` only appears in an empty frame.
    pub fn new(q: Vec<usize>) -> Result<Self> {
        let l2 = q.iter().copied().max().unwrap_or(0);
        if l2 > 0 {
            if q.contains(&0) {
                return Err(Error::InvalidAssignment(format!(
                    "user left unassigned in a non-empty frame: {q:?}"
                )));
            }
            let mut used = vec![false; l2];
            for &slot in &q {
                used[slot - 1] = true;
            }
            if let Some(empty) = used.iter().position(|u| !u) {
                return Err(Error::InvalidAssignment(format!(
                    "slot {} has no user: {q:?}",
                    empty + 1
                )));
            }
        }
        Ok(Assignment { q, l2 })
    }

    /// Partial assignment used while a scheduler is still placing users:
    /// zeros are allowed, empty slots are not checked.
    pub fn partial(q: Vec<usize>) -> Self {
        let l2 = q.iter().copied().max().unwrap_or(0);
        Assignment { q, l2 }
    }

    /// Frame without a data sub-frame.
    pub fn empty(n_users: usize) -> Self {
        Assignment { q: vec![0; n_users], l2: 0 }
    }

    pub fn q(&self) -> &[usize] {
        &self.q
    }

    pub fn l2(&self) -> usize {
        self.l2
    }

    pub fn n_users(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty_frame(&self) -> bool {
        self.l2 == 0
    }

    pub fn slot_of(&self, user: usize) -> usize {
        self.q[user]
    }

    /// Users assigned to `slot`.
    pub fn members(&self, slot: usize) -> impl Iterator<Item = usize> + '_ {
        self.q
            .iter()
            .enumerate()
            .filter(move |&(_, &s)| s == slot && slot != 0)
            .map(|(n, _)| n)
    }

    pub fn slot_mask(&self, slot: usize) -> u64 {
        self.members(slot).fold(0u64, |m, n| m | (1 << n))
    }

    /// True when every scheduled slot has at least one user.
    pub fn is_compact(&self) -> bool {
        (1..=self.l2).all(|l| self.q.contains(&l))
    }

    /// Users per slot, indexed by `slot - 1`.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.l2];
        for &s in &self.q {
            if s > 0 {
                sizes[s - 1] += 1;
            }
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotOutcome {
    Idle,
    Success(usize),
    Collision(Vec<usize>),
}

impl SlotOutcome {
    /// Classifies a slot from its transmitter list.
    pub fn from_transmitters(transmitters: Vec<usize>) -> Self {
        match transmitters.len() {
            0 => SlotOutcome::Idle,
            1 => SlotOutcome::Success(transmitters[0]),
            _ => SlotOutcome::Collision(transmitters),
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, SlotOutcome::Success(_))
    }

    pub fn is_collision(&self) -> bool {
        matches!(self, SlotOutcome::Collision(_))
    }
}

/// What the base station knows when it schedules a frame: the active-user
/// count of this frame and the feedback of the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub nu: usize,
    pub acks: Vec<bool>,
    pub collided_slots: BTreeSet<usize>,
    pub prev_assignment: Assignment,
    pub prev_frame_len: SimTime,
}

/// Feedback of one previous-frame slot as seen by the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservedSlot {
    Idle,
    Success(usize),
    Collision,
}

impl Observation {
    /// Observation at the first frame: no history.
    pub fn initial(n_users: usize, nu: usize) -> Self {
        Observation {
            nu,
            acks: vec![false; n_users],
            collided_slots: BTreeSet::new(),
            prev_assignment: Assignment::empty(n_users),
            prev_frame_len: SimTime::ZERO,
        }
    }

    pub fn n_users(&self) -> usize {
        self.acks.len()
    }

    /// Feedback for each previous slot `1..=L2(t-1)`, indexed by `slot - 1`.
    pub fn slot_feedback(&self) -> Vec<ObservedSlot> {
        let l2 = self.prev_assignment.l2();
        let mut slots = vec![ObservedSlot::Idle; l2];
        for &c in &self.collided_slots {
            if (1..=l2).contains(&c) {
                slots[c - 1] = ObservedSlot::Collision;
            }
        }
        for (n, &acked) in self.acks.iter().enumerate() {
            if acked {
                let s = self.prev_assignment.slot_of(n);
                if s > 0 {
                    slots[s - 1] = ObservedSlot::Success(n);
                }
            }
        }
        slots
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_users();
        let bad = |msg: String| Err(Error::ObservationImpossible(msg));
        if self.prev_assignment.n_users() != n {
            return bad("assignment and ack vectors differ in length".into());
        }
        if self.nu > n {
            return bad(format!("nu = {} exceeds N = {n}", self.nu));
        }
        let l2 = self.prev_assignment.l2();
        if let Some(&c) = self.collided_slots.iter().find(|&&c| c == 0 || c > l2) {
            return bad(format!("collided slot {c} outside 1..={l2}"));
        }
        let mut acked_slots = BTreeSet::new();
        for (user, _) in self.acks.iter().enumerate().filter(|(_, &a)| a) {
            let s = self.prev_assignment.slot_of(user);
            if s == 0 {
                return bad(format!("user {user} acked without a slot"));
            }
            if self.collided_slots.contains(&s) {
                return bad(format!("user {user} acked in collided slot {s}"));
            }
            if !acked_slots.insert(s) {
                return bad(format!("two acks in slot {s}"));
            }
        }
        let implied = acked_slots.len() + 2 * self.collided_slots.len();
        if implied > n {
            return bad(format!("feedback implies {implied} transmitters with N = {n}"));
        }
        for &c in &self.collided_slots {
            if self.prev_assignment.members(c).count() < 2 {
                return bad(format!("collision in slot {c} with fewer than two members"));
            }
        }
        Ok(())
    }
}
