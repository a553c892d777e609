use crate::types::EfficiencyMode;

/// Expected successes per unit frame time.
pub fn frame_efficiency(success_probs: &[f64], l1: f64, mode: EfficiencyMode) -> f64 {
    let l2 = success_probs.len();
    assert!(l2 >= 1, "frame efficiency needs at least one data slot");
    success_probs.iter().sum::<f64>() / mode.denominator(l1, l2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_includes_pia_cost() {
        let eta = frame_efficiency(&[1.0], 0.1, EfficiencyMode::FullFrame);
        assert!((eta - 1.0 / 1.1).abs() < 1e-15);
        assert!((eta - 0.9091).abs() < 5e-5);
        for l1 in [0.0, 0.1, 0.25, 3.0] {
            assert_eq!(frame_efficiency(&[1.0], l1, EfficiencyMode::DtOnly), 1.0);
        }
        let eta = frame_efficiency(&[0.8, 0.6], 0.25, EfficiencyMode::FullFrame);
        assert!((eta - 1.4 / 2.25).abs() < 1e-15);
        assert!((eta - 0.6222).abs() < 5e-5);
    }
}
