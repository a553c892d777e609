//! Run accounting: frame efficiency, packet latency, queue stability, and
//! cross-seed aggregation.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::channel::FrameResult;
use crate::schedulers::SchedulerStats;
use crate::types::{Packet, SchedulerKind};

/// Number of queue windows kept for the stability test.
pub const QUEUE_WINDOWS: usize = 40;
/// Default stability threshold on the queue trend, packets per frame.
pub const STABILITY_SLOPE: f64 = 0.01;

/// Single-run accumulator. Frames up to `warmup_frames` only feed the
/// stability series and the conservation counters.
#[derive(Debug, Clone)]
pub struct RunAccumulator {
    slot_ms: f64,
    warmup_frames: u64,
    frames: u64,
    eta_sum: f64,
    eta_frames: u64,
    latency_sum: f64,
    delivered: u64,
    delivered_total: u64,
    dropped: u64,
    queue_sum: f64,
    queue_frames: u64,
    frames_per_window: u64,
    windows: Vec<f64>,
    window_acc: f64,
    window_fill: u64,
}

impl RunAccumulator {
    /// `horizon_frames` sizes the stability windows; it need not be exact.
    pub fn new(slot_ms: f64, horizon_frames: u64, warmup_frames: u64) -> Self {
        RunAccumulator {
            slot_ms,
            warmup_frames,
            frames: 0,
            eta_sum: 0.0,
            eta_frames: 0,
            latency_sum: 0.0,
            delivered: 0,
            delivered_total: 0,
            dropped: 0,
            queue_sum: 0.0,
            queue_frames: 0,
            frames_per_window: (horizon_frames / QUEUE_WINDOWS as u64).max(1),
            windows: Vec::new(),
            window_acc: 0.0,
            window_fill: 0,
        }
    }

    fn measuring(&self) -> bool {
        self.frames > self.warmup_frames
    }

    /// Counts one frame; must precede the frame's deliveries.
    pub fn record_frame(&mut self, result: &FrameResult) {
        self.record_efficiency(result.nu_at_start, result.successes(), result.frame_len.slots());
    }

    /// Frame-less form of [`record_frame`](Self::record_frame).
    pub fn record_efficiency(&mut self, nu: usize, successes: usize, frame_len: f64) {
        self.frames += 1;
        if nu > 0 && self.measuring() {
            self.eta_sum += successes as f64 / frame_len;
            self.eta_frames += 1;
        }
    }

    pub fn record_delivery(&mut self, packet: &Packet) {
        let latency = packet.latency().expect("recorded packet was not delivered");
        assert!(latency.0 >= 0.0, "packet {} delivered before it was generated", packet.id);
        self.delivered_total += 1;
        if self.measuring() {
            self.latency_sum += latency.to_ms(self.slot_ms);
            self.delivered += 1;
        }
    }

    pub fn record_drop(&mut self) {
        self.dropped += 1;
    }

    /// Total buffered packets at the end of the current frame.
    pub fn record_queue(&mut self, total: usize) {
        let q = total as f64;
        if self.measuring() {
            self.queue_sum += q;
            self.queue_frames += 1;
        }
        self.window_acc += q;
        self.window_fill += 1;
        if self.window_fill == self.frames_per_window {
            self.windows.push(self.window_acc / self.window_fill as f64);
            self.window_acc = 0.0;
            self.window_fill = 0;
        }
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn finish(self, run: RunInfo) -> RunSummary {
        let queue_slope = queue_trend(&self.windows, self.frames_per_window as f64);
        RunSummary {
            scheduler: run.scheduler,
            n_users: run.n_users,
            total_rate: run.total_rate,
            seed: run.seed,
            frames: self.frames,
            measured_frames: self.frames.saturating_sub(self.warmup_frames),
            avg_frame_efficiency: ratio(self.eta_sum, self.eta_frames),
            avg_latency_ms: ratio(self.latency_sum, self.delivered),
            delivered: self.delivered,
            delivered_total: self.delivered_total,
            dropped: self.dropped,
            residual: run.residual,
            generated: run.generated,
            mean_queue_len: ratio(self.queue_sum, self.queue_frames) / run.n_users.max(1) as f64,
            queue_slope,
            stable: queue_slope.is_none_or(|s| s <= STABILITY_SLOPE),
            traffic_checksum: run.traffic_checksum,
            scheduler_stats: run.scheduler_stats,
        }
    }
}

fn ratio(sum: f64, n: u64) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Run facts known only to the simulator.
#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    pub scheduler: Option<SchedulerKind>,
    pub n_users: usize,
    pub total_rate: f64,
    pub seed: u64,
    pub generated: u64,
    pub residual: u64,
    pub traffic_checksum: u64,
    pub scheduler_stats: SchedulerStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    #[serde(skip)]
    pub scheduler: Option<SchedulerKind>,
    pub n_users: usize,
    pub total_rate: f64,
    pub seed: u64,
    pub frames: u64,
    pub measured_frames: u64,
    /// Mean of successes over frame length, over measured frames with at
    /// least one active user.
    pub avg_frame_efficiency: f64,
    /// Mean latency of packets delivered in measured frames.
    pub avg_latency_ms: f64,
    pub delivered: u64,
    /// Deliveries over the whole run, warm-up included.
    pub delivered_total: u64,
    pub dropped: u64,
    /// Packets still queued at the horizon.
    pub residual: u64,
    pub generated: u64,
    /// Per-user mean queue length over measured frames.
    pub mean_queue_len: f64,
    /// Queue trend over the last half of the run, packets per frame.
    pub queue_slope: Option<f64>,
    pub stable: bool,
    pub traffic_checksum: u64,
    #[serde(skip)]
    pub scheduler_stats: SchedulerStats,
}

impl RunSummary {
    /// Every generated packet is delivered, dropped, or still queued.
    pub fn conserves_packets(&self) -> bool {
        self.delivered_total + self.dropped + self.residual == self.generated
    }
}

/// Least-squares slope of the last half of `windows`, in packets per frame.
fn queue_trend(windows: &[f64], frames_per_window: f64) -> Option<f64> {
    if windows.len() < 2 {
        return None;
    }
    let tail = &windows[windows.len() / 2..];
    let tail = if tail.len() < 2 { &windows[windows.len() - 2..] } else { tail };
    let n = tail.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = tail.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in tail.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    Some(sxy / sxx / frames_per_window)
}

/// `true` when the total-queue trend over the last half of `windows`
/// (window means, `frames_per_window` frames each) is at most `threshold`
/// packets per frame.
pub fn stability_check(windows: &[f64], frames_per_window: f64, threshold: f64) -> bool {
    assert!(windows.len() >= 2, "stability check needs at least two windows");
    queue_trend(windows, frames_per_window).is_some_and(|s| s <= threshold)
}

/// Sample mean and 95% Student-t half-width. The half-width is NaN for
/// fewer than two finite samples.
pub fn mean_ci95(samples: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    let k = xs.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (k - 1) as f64).expect("degrees of freedom are positive").inverse_cdf(0.975);
    (mean, t * (var / k as f64).sqrt())
}

/// Per-cell aggregate over independent seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateSummary {
    pub scheduler: SchedulerKind,
    pub n_users: usize,
    pub lambda_total: f64,
    pub seed_count: usize,
    /// Frames per run.
    pub frames: u64,
    pub eta_mean: f64,
    pub eta_ci95: f64,
    pub latency_ms_mean: f64,
    pub latency_ms_ci95: f64,
    pub delivered: u64,
    pub dropped: u64,
    pub mean_queue_len: f64,
    /// Stable in every seed.
    pub stable: bool,
    /// Combined traffic checksum of all seeds, in seed order.
    pub traffic_checksum: u64,
}

/// Folds per-seed summaries, in the given order, into one row.
pub fn aggregate(scheduler: SchedulerKind, runs: &[RunSummary]) -> AggregateSummary {
    assert!(!runs.is_empty(), "aggregate needs at least one run");
    let etas: Vec<f64> = runs.iter().map(|r| r.avg_frame_efficiency).collect();
    let lats: Vec<f64> = runs.iter().map(|r| r.avg_latency_ms).collect();
    let (eta_mean, eta_ci95) = mean_ci95(&etas);
    let (latency_ms_mean, latency_ms_ci95) = mean_ci95(&lats);
    let mut checksum: u64 = 0xcbf2_9ce4_8422_2325;
    for r in runs {
        for b in r.traffic_checksum.to_le_bytes() {
            checksum ^= b as u64;
            checksum = checksum.wrapping_mul(0x0100_0000_01b3);
        }
    }
    AggregateSummary {
        scheduler,
        n_users: runs[0].n_users,
        lambda_total: runs[0].total_rate,
        seed_count: runs.len(),
        frames: runs[0].frames,
        eta_mean,
        eta_ci95,
        latency_ms_mean,
        latency_ms_ci95,
        delivered: runs.iter().map(|r| r.delivered).sum(),
        dropped: runs.iter().map(|r| r.dropped).sum(),
        mean_queue_len: mean_ci95(&runs.iter().map(|r| r.mean_queue_len).collect::<Vec<_>>()).0,
        stable: runs.iter().all(|r| r.stable),
        traffic_checksum: checksum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SimTime;

    fn frame(nu: usize, successes: usize, len: f64) -> FrameResult {
        let outcomes = (0..successes).map(crate::types::SlotOutcome::Success).collect();
        FrameResult {
            outcomes,
            acks: vec![],
            collided_slots: Default::default(),
            nu_at_start: nu,
            frame_start: SimTime(0.0),
            frame_len: SimTime(len),
            delivered: vec![],
        }
    }

    fn packet(generated: f64, delivered: f64) -> Packet {
        Packet { id: 0, user: 0, generated_at: SimTime(generated), delivered_at: Some(SimTime(delivered)) }
    }

    fn summary(acc: RunAccumulator) -> RunSummary {
        acc.finish(RunInfo { n_users: 1, ..Default::default() })
    }

    #[test]
    fn efficiency_examples() {
        let mut acc = RunAccumulator::new(0.125, 10, 0);
        acc.record_frame(&frame(1, 1, 1.1));
        acc.record_frame(&frame(0, 0, 0.1));
        assert!((summary(acc.clone()).avg_frame_efficiency - 1.0 / 1.1).abs() < 1e-15);
        assert!((1.0f64 / 1.1 - 0.9091).abs() < 1e-4);
        let mut tdma = RunAccumulator::new(0.125, 10, 0);
        tdma.record_frame(&frame(3, 2, 5.0));
        assert!((summary(tdma).avg_frame_efficiency - 0.4).abs() < 1e-15);
    }

    #[test]
    fn latency_examples() {
        let mut acc = RunAccumulator::new(0.125, 10, 0);
        acc.record_frame(&frame(1, 1, 1.1));
        acc.record_delivery(&packet(10.05, 11.2));
        assert!((summary(acc).avg_latency_ms - 0.14375).abs() < 1e-12);
        let mut acc = RunAccumulator::new(0.125, 10, 0);
        acc.record_frame(&frame(2, 2, 2.1));
        acc.record_delivery(&packet(0.0, 1.0));
        acc.record_delivery(&packet(0.0, 2.0));
        assert!((summary(acc).avg_latency_ms - 0.1875).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "before it was generated")]
    fn delivery_before_generation_panics() {
        let mut acc = RunAccumulator::new(0.125, 10, 0);
        acc.record_delivery(&packet(2.0, 1.0));
    }

    #[test]
    fn warmup_frames_are_excluded() {
        let mut acc = RunAccumulator::new(0.125, 10, 1);
        acc.record_frame(&frame(1, 0, 1.1));
        acc.record_delivery(&packet(0.0, 100.0));
        acc.record_frame(&frame(1, 1, 1.1));
        acc.record_delivery(&packet(1.0, 2.0));
        let s = summary(acc);
        assert!((s.avg_frame_efficiency - 1.0 / 1.1).abs() < 1e-15);
        assert_eq!(s.delivered, 1);
        assert_eq!(s.delivered_total, 2);
        assert!((s.avg_latency_ms - 0.125).abs() < 1e-15);
    }

    #[test]
    fn stability_examples() {
        assert!(stability_check(&[3.0; 10], 1.0, STABILITY_SLOPE));
        let growing: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(!stability_check(&growing, 1.0, STABILITY_SLOPE));
        assert!(stability_check(&growing, 1000.0, STABILITY_SLOPE));
    }

    #[test]
    fn ci_is_nan_for_one_seed() {
        let (m, h) = mean_ci95(&[0.5]);
        assert_eq!(m, 0.5);
        assert!(h.is_nan());
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 4.302652729911275 / 3f64.sqrt()).abs() < 1e-9);
    }
}
