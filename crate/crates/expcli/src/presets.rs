//! Figure-reproduction sweeps.

use std::fmt;
use std::str::FromStr;

use pima::{SchedulerKind, SimConfig};

use crate::sweep::SweepSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// Frame efficiency versus `Λ`, five users.
    Fig2,
    /// Latency versus `Λ`, five users.
    Fig3,
    /// Latency versus `Λ`, thirty users.
    Fig4,
}

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::Fig2, Figure::Fig3, Figure::Fig4];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    pub fn shows_latency(self) -> bool {
        !matches!(self, Figure::Fig2)
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown figure `{s}` (expected fig2, fig3 or fig4)"))
    }
}

pub const DEFAULT_SEEDS: u64 = 10;

/// Ten evenly spaced rates from 0.01 to 0.5.
pub fn lambda_grid() -> Vec<f64> {
    (0..10).map(|i| 0.01 + 0.49 * i as f64 / 9.0).collect()
}

pub fn preset(figure: Figure) -> SweepSpec {
    use SchedulerKind::*;
    let (n_users, pia_len, schedulers) = match figure {
        Figure::Fig2 => (5, 0.1, vec![Tdma, Pima, Gfeo, Sgfeo]),
        Figure::Fig3 => (5, 0.1, vec![Tdma, Saloha, Pima, Gfeo, Sgfeo]),
        Figure::Fig4 => (30, 0.25, vec![Tdma, Saloha, Pima, Sgfeo]),
    };
    SweepSpec {
        base: SimConfig { n_users, pia_len, slot_ms: 0.125, ..Default::default() },
        lambda_grid: lambda_grid(),
        schedulers,
        seeds: (0..DEFAULT_SEEDS).collect(),
        output_path: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = lambda_grid();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[9] - 0.5).abs() < 1e-15);
        assert!((g[5] - 0.282222222222222).abs() < 1e-12);
    }

    #[test]
    fn preset_cell_counts() {
        assert_eq!(preset(Figure::Fig2).cells().len(), 40);
        assert_eq!(preset(Figure::Fig3).cells().len(), 50);
        assert_eq!(preset(Figure::Fig4).cells().len(), 40);
        for f in Figure::ALL {
            preset(f).validate().unwrap();
        }
    }
}
