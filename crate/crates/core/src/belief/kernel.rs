use crate::belief::BufferVector;
use crate::types::Assignment;

/// Per-user arrival kernel over one frame: Poisson counts added to the
/// current level, with all overflow mass lumped at the capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalKernel {
    capacity: usize,
    /// `rows[l]` lists `(new level, probability)` from level `l`.
    rows: Vec<Vec<(u8, f64)>>,
}

impl ArrivalKernel {
    pub fn new(mean: f64, capacity: usize) -> Self {
        assert!(mean >= 0.0 && mean.is_finite(), "arrival mean must be finite and >= 0");
        let mut pmf = Vec::with_capacity(capacity + 1);
        let mut p = (-mean).exp();
        for a in 0..=capacity {
            pmf.push(p);
            p *= mean / (a + 1) as f64;
        }
        let rows = (0..=capacity)
            .map(|level| {
                let room = capacity - level;
                let mut row: Vec<(u8, f64)> =
                    (0..room).map(|a| ((level + a) as u8, pmf[a])).filter(|&(_, p)| p > 0.0).collect();
                let below: f64 = pmf[..room].iter().sum();
                let tail = (1.0 - below).max(0.0);
                if tail > 0.0 {
                    row.push((capacity as u8, tail));
                }
                row
            })
            .collect();
        ArrivalKernel { capacity, rows }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn row(&self, level: u8) -> &[(u8, f64)] {
        &self.rows[level as usize]
    }

    /// Probability of moving from `from` to `to` within one frame.
    pub fn prob(&self, from: u8, to: u8) -> f64 {
        self.row(from).iter().find(|&&(l, _)| l == to).map_or(0.0, |&(_, p)| p)
    }

    /// Probability that an empty buffer receives at least one packet.
    pub fn activation_probability(&self) -> f64 {
        1.0 - self.prob(0, 0)
    }
}

/// Levels after the data sub-frame: every slot with exactly one active
/// assigned user removes one packet from that user.
pub fn apply_departures(levels: &[u8], assignment: &Assignment) -> Vec<u8> {
    let mut out = levels.to_vec();
    let l2 = assignment.l2();
    if l2 == 0 {
        return out;
    }
    let mut count = vec![0usize; l2];
    let mut last = vec![0usize; l2];
    for (n, &s) in assignment.q().iter().enumerate() {
        if s > 0 && levels[n] > 0 {
            count[s - 1] += 1;
            last[s - 1] = n;
        }
    }
    for (slot, &c) in count.iter().enumerate() {
        if c == 1 {
            out[last[slot]] -= 1;
        }
    }
    out
}

/// Full distribution of the next frame-start state given the current state,
/// the action taken, and the per-user arrival mean over the frame.
pub fn transition_distribution(
    state: &BufferVector,
    assignment: &Assignment,
    arrival_mean_per_user: f64,
    capacity: usize,
) -> Vec<(BufferVector, f64)> {
    let kernel = ArrivalKernel::new(arrival_mean_per_user, capacity);
    let after = apply_departures(&state.0, assignment);
    let rows: Vec<&[(u8, f64)]> = after.iter().map(|&l| kernel.row(l)).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; rows.len()];
    'odometer: loop {
        let mut p = 1.0;
        let mut levels = Vec::with_capacity(rows.len());
        for (row, &i) in rows.iter().zip(&idx) {
            levels.push(row[i].0);
            p *= row[i].1;
        }
        out.push((BufferVector(levels), p));
        for d in 0..rows.len() {
            idx[d] += 1;
            if idx[d] < rows[d].len() {
                continue 'odometer;
            }
            idx[d] = 0;
        }
        break;
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stochastic() {
        for mean in [0.0, 0.05, 0.5, 3.0, 40.0] {
            let k = ArrivalKernel::new(mean, 4);
            for l in 0..=4u8 {
                let s: f64 = k.row(l).iter().map(|&(_, p)| p).sum();
                assert!((s - 1.0).abs() < 1e-12, "mean {mean} level {l}: {s}");
                assert!(k.row(l).iter().all(|&(to, _)| to >= l));
            }
        }
    }

    #[test]
    fn departures_only_without_arrivals() {
        let d = transition_distribution(&BufferVector(vec![1, 1]), &Assignment::new(vec![1, 2]).unwrap(), 0.0, 3);
        assert_eq!(d, vec![(BufferVector(vec![0, 0]), 1.0)]);
    }

    #[test]
    fn collision_keeps_levels() {
        let d = transition_distribution(&BufferVector(vec![1, 1]), &Assignment::new(vec![1, 1]).unwrap(), 0.0, 3);
        assert_eq!(d, vec![(BufferVector(vec![1, 1]), 1.0)]);
    }

    #[test]
    fn poisson_levels_with_lumped_tail() {
        let c = 3;
        let d = transition_distribution(&BufferVector(vec![0]), &Assignment::empty(1), 0.5, c);
        let p0 = (-0.5f64).exp();
        let p1 = 0.5 * p0;
        let p2 = 0.125 * p0;
        assert!((d[0].1 - p0).abs() < 1e-15 && (p0 - 0.6065).abs() < 1e-4);
        assert!((d[1].1 - p1).abs() < 1e-15 && (p1 - 0.3033).abs() < 1e-4);
        assert!((d[2].1 - p2).abs() < 1e-15);
        assert!((d[3].1 - (1.0 - p0 - p1 - p2)).abs() < 1e-15);
        assert_eq!(d[3].0, BufferVector(vec![c as u8]));
    }
}
