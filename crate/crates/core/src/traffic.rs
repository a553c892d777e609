//! Poisson packet generation with one reproducible random stream per user.
//!
//! Arrivals are drawn on a fixed grid of unit-slot cells (count first, then
//! uniform placement inside the cell). Frames of any length consume the grid
//! in time order, so two schedulers run with the same seed see exactly the
//! same arrival instants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::types::{Packet, SimTime};

pub type RngStream = ChaCha8Rng;

/// Stream id reserved for the slotted-ALOHA transmit coins.
pub const SALOHA_STREAM: u64 = 1 << 32;
/// Stream of the baseline PIMA user relabelling.
pub const PIMA_STREAM: u64 = (1 << 32) + 1;

/// Arrivals used for the traffic checksum: the first this many slots.
pub const CHECKSUM_WINDOW: f64 = 1000.0;

/// Deterministic stream for `(seed, stream_id)`; independent of fork order.
pub fn rng_fork(seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalBatch {
    pub user: usize,
    pub times: Vec<SimTime>,
}

/// Poisson arrivals of one user on `[interval_start, interval_start + interval_len)`.
pub fn draw_arrivals<R: Rng + ?Sized>(
    user: usize,
    rate_per_slot: f64,
    interval_start: SimTime,
    interval_len: f64,
    rng: &mut R,
) -> ArrivalBatch {
    let mean = rate_per_slot * interval_len;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    } else {
        0
    };
    let mut times: Vec<SimTime> = (0..count)
        .map(|_| interval_start + interval_len * rng.random::<f64>())
        .collect();
    times.sort_by(|a, b| a.0.total_cmp(&b.0));
    ArrivalBatch { user, times }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_mix(mut h: u64, word: u64) -> u64 {
    for byte in word.to_le_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Arrival process of one user, materialised cell by cell.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    user: usize,
    rate: f64,
    rng: RngStream,
    next_cell: u64,
    pending: std::collections::VecDeque<SimTime>,
    checksum: u64,
}

impl ArrivalStream {
    pub fn new(user: usize, rate: f64, seed: u64) -> Self {
        ArrivalStream {
            user,
            rate,
            rng: rng_fork(seed, user as u64),
            next_cell: 0,
            pending: Default::default(),
            checksum: FNV_OFFSET,
        }
    }

    fn fill_until(&mut self, t: SimTime) {
        while (self.next_cell as f64) < t.0 {
            let batch =
                draw_arrivals(self.user, self.rate, SimTime(self.next_cell as f64), 1.0, &mut self.rng);
            for &time in &batch.times {
                if time.0 < CHECKSUM_WINDOW {
                    self.checksum = fnv_mix(self.checksum, time.0.to_bits());
                }
            }
            self.pending.extend(batch.times);
            self.next_cell += 1;
        }
    }

    /// Removes and returns every arrival strictly before `t`, in order.
    pub fn take_before(&mut self, t: SimTime) -> Vec<SimTime> {
        self.fill_until(t);
        let split = self.pending.iter().position(|x| x.0 >= t.0).unwrap_or(self.pending.len());
        self.pending.drain(..split).collect()
    }

    /// Checksum of all arrivals inside the checksum window.
    pub fn checksum(&mut self) -> u64 {
        self.fill_until(SimTime(CHECKSUM_WINDOW));
        fnv_mix(self.checksum, self.user as u64)
    }
}

/// All users' arrival streams plus packet-id allocation.
#[derive(Debug, Clone)]
pub struct TrafficSource {
    streams: Vec<ArrivalStream>,
    next_id: u64,
    generated: u64,
}

impl TrafficSource {
    pub fn new(n_users: usize, per_user_rate: f64, seed: u64) -> Self {
        TrafficSource {
            streams: (0..n_users).map(|n| ArrivalStream::new(n, per_user_rate, seed)).collect(),
            next_id: 0,
            generated: 0,
        }
    }

    /// Packets of `user` generated strictly before `t` and not yet taken.
    pub fn take_user_before(&mut self, user: usize, t: SimTime) -> Vec<Packet> {
        let times = self.streams[user].take_before(t);
        self.generated += times.len() as u64;
        times
            .into_iter()
            .map(|generated_at| {
                let id = self.next_id;
                self.next_id += 1;
                Packet { id, user, generated_at, delivered_at: None }
            })
            .collect()
    }

    pub fn generated(&self) -> u64 {
        self.generated
    }

    /// Order-independent digest of every user's arrivals in the checksum window.
    pub fn checksum(&mut self) -> u64 {
        self.streams.iter_mut().fold(FNV_OFFSET, |h, s| fnv_mix(h, s.checksum()))
    }
}
