use crate::types::Assignment;

/// One user per slot, user `n` in slot `n + 1`. TDMA frames carry no
/// enumeration phase.
pub fn tdma_schedule(n_users: usize) -> Assignment {
    Assignment::new((1..=n_users).collect()).expect("identity assignment is compact")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_slots() {
        assert_eq!(tdma_schedule(5).q(), &[1, 2, 3, 4, 5]);
        assert_eq!(tdma_schedule(1).q(), &[1]);
        for n in 1..10 {
            assert!(tdma_schedule(n).group_sizes().iter().all(|&k| k == 1));
        }
    }
}
