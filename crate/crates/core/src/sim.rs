//! End-to-end single-seed simulation of one scheduler.

use std::cell::Cell;

use crate::channel::{count_active, execute_frame, execute_tdma_frame, run_slotted, FrameResult};
use crate::error::Result;
use crate::metrics::{RunAccumulator, RunInfo, RunSummary};
use crate::schedulers::{FrameScheduler, SalohaController, SchedulerStats};
use crate::traffic::{rng_fork, TrafficSource, SALOHA_STREAM};
use crate::types::{Assignment, Observation, SchedulerKind, SimConfig, SimTime, UserQueue};

/// Runs `cfg` for its horizon. For TDMA a frame is one round of `N` slots;
/// for slotted ALOHA a frame is one slot.
pub fn run(cfg: &SimConfig) -> Result<RunSummary> {
    run_observed(cfg, |_, _, _| {})
}

/// As [`run`], calling `observer` after every PIMA-family frame with the
/// observation, the scheduled assignment, and the channel result.
pub fn run_observed<F>(cfg: &SimConfig, observer: F) -> Result<RunSummary>
where
    F: FnMut(&Observation, &Assignment, &FrameResult),
{
    cfg.validate()?;
    match cfg.scheduler {
        SchedulerKind::Tdma => Ok(run_tdma(cfg)),
        SchedulerKind::Saloha => Ok(run_saloha(cfg)),
        _ => run_frames(cfg, observer),
    }
}

fn warmup_frames(cfg: &SimConfig) -> u64 {
    (cfg.horizon_frames as f64 * cfg.warmup_fraction).floor() as u64
}

fn admit(traffic: &mut TrafficSource, queues: &mut [UserQueue], t: SimTime, cap: Option<usize>) -> u64 {
    let mut dropped = 0;
    for q in queues.iter_mut() {
        for p in traffic.take_user_before(q.user, t) {
            q.push(p);
            if cap.is_some_and(|c| q.len() > c) {
                q.drop_oldest();
                dropped += 1;
            }
        }
    }
    dropped
}

fn queued(queues: &[UserQueue]) -> usize {
    queues.iter().map(UserQueue::len).sum()
}

fn finish(
    cfg: &SimConfig,
    acc: RunAccumulator,
    mut traffic: TrafficSource,
    queues: &[UserQueue],
    scheduler_stats: SchedulerStats,
) -> RunSummary {
    acc.finish(RunInfo {
        scheduler: Some(cfg.scheduler),
        n_users: cfg.n_users,
        total_rate: cfg.total_rate,
        seed: cfg.seed,
        generated: traffic.generated(),
        residual: queued(queues) as u64,
        traffic_checksum: traffic.checksum(),
        scheduler_stats,
    })
}

fn new_queues(n: usize) -> Vec<UserQueue> {
    (0..n).map(UserQueue::new).collect()
}

fn run_frames<F>(cfg: &SimConfig, mut observer: F) -> Result<RunSummary>
where
    F: FnMut(&Observation, &Assignment, &FrameResult),
{
    let n = cfg.n_users;
    let reference = cfg.latency_reference();
    let mut traffic = TrafficSource::new(n, cfg.per_user_rate(), cfg.seed);
    let mut queues = new_queues(n);
    let mut scheduler = FrameScheduler::new(cfg)?;
    let mut acc = RunAccumulator::new(cfg.slot_ms, cfg.horizon_frames, warmup_frames(cfg));
    let mut t = SimTime::ZERO;
    let mut last: Option<(Assignment, FrameResult)> = None;
    for _ in 0..cfg.horizon_frames {
        admit(&mut traffic, &mut queues, t, None);
        for q in &mut queues {
            q.refresh_eligibility(t);
        }
        let nu = count_active(&queues);
        let obs = match last.take() {
            None => Observation::initial(n, nu),
            Some((prev_assignment, r)) => Observation {
                nu,
                acks: r.acks,
                collided_slots: r.collided_slots,
                prev_assignment,
                prev_frame_len: r.frame_len,
            },
        };
        let assignment = scheduler.schedule(&obs);
        let result = execute_frame(&assignment, &mut queues, t, cfg.pia_len, reference)?;
        acc.record_frame(&result);
        for p in &result.delivered {
            acc.record_delivery(p);
        }
        acc.record_queue(queued(&queues));
        observer(&obs, &assignment, &result);
        t = result.frame_end();
        last = Some((assignment, result));
    }
    let stats = scheduler.stats().clone();
    Ok(finish(cfg, acc, traffic, &queues, stats))
}

fn run_tdma(cfg: &SimConfig) -> RunSummary {
    let n = cfg.n_users;
    let reference = cfg.latency_reference();
    let mut traffic = TrafficSource::new(n, cfg.per_user_rate(), cfg.seed);
    let mut queues = new_queues(n);
    let mut acc = RunAccumulator::new(cfg.slot_ms, cfg.horizon_frames, warmup_frames(cfg));
    let mut t = SimTime::ZERO;
    for _ in 0..cfg.horizon_frames {
        let mut dropped = 0;
        let result = execute_tdma_frame(&mut queues, t, reference, |at, qs| {
            dropped += admit(&mut traffic, qs, at, cfg.tdma_queue_cap);
        });
        for _ in 0..dropped {
            acc.record_drop();
        }
        acc.record_frame(&result);
        for p in &result.delivered {
            acc.record_delivery(p);
        }
        acc.record_queue(queued(&queues));
        t = result.frame_end();
    }
    let stats = SchedulerStats { calls: cfg.horizon_frames, ..Default::default() };
    finish(cfg, acc, traffic, &queues, stats)
}

fn run_saloha(cfg: &SimConfig) -> RunSummary {
    let n = cfg.n_users;
    let reference = cfg.latency_reference();
    let mut traffic = TrafficSource::new(n, cfg.per_user_rate(), cfg.seed);
    let mut queues = new_queues(n);
    let mut acc = RunAccumulator::new(cfg.slot_ms, cfg.horizon_frames, warmup_frames(cfg));
    let mut policy = SalohaController::new(cfg.total_rate);
    let mut rng = rng_fork(cfg.seed, SALOHA_STREAM);
    let nu = Cell::new(0usize);
    let backlog = Cell::new(0usize);
    run_slotted(
        &mut policy,
        &mut queues,
        0,
        cfg.horizon_frames,
        &mut rng,
        reference,
        |at, qs| {
            admit(&mut traffic, qs, at, None);
            nu.set(qs.iter().filter(|q| !q.is_empty()).count());
            backlog.set(queued(qs));
        },
        |_, outcome, packet| {
            acc.record_efficiency(nu.get(), outcome.is_success() as usize, 1.0);
            if let Some(p) = packet {
                acc.record_delivery(p);
            }
            acc.record_queue(backlog.get() - packet.is_some() as usize);
        },
    );
    let stats = SchedulerStats { calls: cfg.horizon_frames, ..Default::default() };
    finish(cfg, acc, traffic, &queues, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: SchedulerKind, rate: f64, frames: u64) -> SimConfig {
        SimConfig { n_users: 5, total_rate: rate, horizon_frames: frames, seed: 3, scheduler: kind, ..Default::default() }
    }

    #[test]
    fn every_scheduler_conserves_packets() {
        for kind in SchedulerKind::ALL {
            let s = run(&cfg(kind, 0.3, 2000)).unwrap();
            assert!(s.conserves_packets(), "{kind}: {s:?}");
            assert!(s.generated > 0);
            assert!((0.0..=1.0).contains(&s.avg_frame_efficiency), "{kind}");
        }
    }

    #[test]
    fn runs_are_reproducible() {
        for kind in SchedulerKind::ALL {
            let c = cfg(kind, 0.4, 1000);
            assert_eq!(run(&c).unwrap(), run(&c).unwrap(), "{kind}");
        }
    }

    #[test]
    fn traffic_is_paired_across_schedulers() {
        let sums: Vec<u64> = SchedulerKind::ALL.iter().map(|&k| run(&cfg(k, 0.2, 300)).unwrap().traffic_checksum).collect();
        assert!(sums.windows(2).all(|w| w[0] == w[1]), "{sums:?}");
    }
}
