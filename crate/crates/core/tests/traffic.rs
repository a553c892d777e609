use pima::traffic::{draw_arrivals, rng_fork, TrafficSource};
use pima::SimTime;

#[test]
fn counts_have_poisson_mean_and_variance() {
    let mut rng = rng_fork(11, 0);
    let (rate, len, reps) = (0.3, 10.0, 20_000);
    let counts: Vec<f64> = (0..reps).map(|_| draw_arrivals(0, rate, SimTime(0.0), len, &mut rng).times.len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    // standard errors are about 0.012 and 0.03
    assert!((mean - 3.0).abs() < 0.06, "mean {mean}");
    assert!((var - 3.0).abs() < 0.15, "variance {var}");
}

#[test]
fn arrivals_stay_inside_the_interval() {
    let mut rng = rng_fork(2, 5);
    for _ in 0..1000 {
        let b = draw_arrivals(4, 2.0, SimTime(7.5), 1.25, &mut rng);
        assert_eq!(b.user, 4);
        assert!(b.times.windows(2).all(|w| w[0] <= w[1]));
        assert!(b.times.iter().all(|t| t.0 >= 7.5 && t.0 < 8.75));
    }
}

#[test]
fn gaps_are_exponential() {
    let mut src = TrafficSource::new(1, 0.2, 9);
    let times: Vec<f64> = src.take_user_before(0, SimTime(200_000.0)).iter().map(|p| p.generated_at.0).collect();
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((mean - 5.0).abs() < 0.1, "mean gap {mean}");
    // P(gap > mean) = 1/e for an exponential law
    let tail = gaps.iter().filter(|&&g| g > 5.0).count() as f64 / gaps.len() as f64;
    assert!((tail - (-1.0f64).exp()).abs() < 0.01, "tail {tail}");
}

#[test]
fn realisation_does_not_depend_on_how_time_is_cut() {
    let mut whole = TrafficSource::new(3, 0.4, 21);
    let mut pieces = TrafficSource::new(3, 0.4, 21);
    for user in 0..3 {
        let a: Vec<f64> = whole.take_user_before(user, SimTime(500.0)).iter().map(|p| p.generated_at.0).collect();
        let mut b = Vec::new();
        let mut t = 0.0;
        while t < 500.0 {
            t = (t + 0.37 + 0.1 * user as f64).min(500.0);
            b.extend(pieces.take_user_before(user, SimTime(t)).iter().map(|p| p.generated_at.0));
        }
        assert_eq!(a, b);
    }
    assert_eq!(whole.generated(), pieces.generated());
}

#[test]
fn users_draw_independent_streams() {
    let mut src = TrafficSource::new(2, 0.5, 4);
    let a: Vec<f64> = src.take_user_before(0, SimTime(100.0)).iter().map(|p| p.generated_at.0).collect();
    let b: Vec<f64> = src.take_user_before(1, SimTime(100.0)).iter().map(|p| p.generated_at.0).collect();
    assert_ne!(a, b);
    let mut other_seed = TrafficSource::new(2, 0.5, 5);
    let c: Vec<f64> = other_seed.take_user_before(0, SimTime(100.0)).iter().map(|p| p.generated_at.0).collect();
    assert_ne!(a, c);
}
