use proptest::prelude::*;

use semstream::ppo::{clip_objective, discounted_returns, entropy, gae, gaussian_log_prob};
use semstream::qoe::{qoe_slot, QoeWeights};
use semstream::recovery::{recovery_accuracy, temporal_hold_recover, FrameWindow};
use semstream::sim::{advance_position, corridor_for, downlink_rates, sample_channel, ChannelParams, GeometryConfig, UavState};
use semstream::stream::MaskedIndexFrame;
use semstream::vq::{laplace_smooth, IndexFrame};
use semstream::rng_from_seed;

fn brute_gae(r: &[f64], v: &[f64], g: f64, l: f64) -> Vec<f64> {
    (0..r.len())
        .map(|s| {
            (s..r.len())
                .map(|k| (g * l).powi((k - s) as i32) * (r[k] + g * v[k + 1] - v[k]))
                .sum()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flight_stays_in_corridor(
        id in 1usize..=4,
        start in prop::array::uniform3(0.0f64..1.0),
        steps in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..30),
    ) {
        let g = GeometryConfig::default();
        let region = corridor_for(id, &g).unwrap();
        let b = region.bounds();
        let pos = [0, 1, 2].map(|k| b[k].0 + start[k] * (b[k].1 - b[k].0));
        let mut u = UavState { uav_id: id, position: pos, power: 1.0, bitrate: 5e4 };
        for a in steps {
            let next = advance_position(&u, a, &g).unwrap();
            prop_assert!(region.contains(next.position));
            let moved: f64 = (0..3).map(|k| (next.position[k] - u.position[k]).powi(2)).sum::<f64>().sqrt();
            prop_assert!(moved <= g.max_step_a_max + 1e-9);
            u = next;
        }
    }

    #[test]
    fn rates_fall_with_interferer_power(seed in any::<u64>(), extra in 0.1f64..5.0) {
        let p = ChannelParams::default();
        let mut rng = rng_from_seed(seed);
        let ch: Vec<_> = (0..3).map(|_| sample_channel(&mut rng, 120.0, &p).unwrap()).collect();
        let base = downlink_rates(&[2.0, 2.0, 2.0], &ch, &p).unwrap();
        let louder = downlink_rates(&[2.0, 2.0, 2.0 + extra], &ch, &p).unwrap();
        prop_assert!(base.iter().all(|r| *r >= 0.0));
        prop_assert!(louder[0] <= base[0] && louder[1] <= base[1]);
        prop_assert!(louder[2] >= base[2]);
    }

    #[test]
    fn clip_is_continuous_and_bounded(a in -5.0f64..5.0, eps in 0.01f64..0.9, r in 0.0f64..3.0) {
        let v = clip_objective(r, a, eps);
        if a >= 0.0 {
            prop_assert!(v <= (1.0 + eps) * a + 1e-12);
        } else {
            prop_assert!(v <= r * a + 1e-12);
        }
        let dr = 1e-9;
        prop_assert!((clip_objective(r + dr, a, eps) - v).abs() <= a.abs() * dr * 1.0001 + 1e-15);
        if (1.0 - eps..=1.0 + eps).contains(&r) {
            prop_assert_eq!(v, r * a);
        }
    }

    #[test]
    fn gae_matches_double_sum(
        r in prop::collection::vec(-10.0f64..10.0, 1..64),
        seed in any::<u64>(),
        g in 0.01f64..=1.0,
        l in 0.01f64..=1.0,
    ) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let mut v: Vec<f64> = (0..=r.len()).map(|_| rng.random_range(-10.0..10.0)).collect();
        *v.last_mut().unwrap() = 0.0;
        let fast = gae(&r, &v, g, l).unwrap();
        for (a, b) in fast.iter().zip(brute_gae(&r, &v, g, l)) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        // with one-step lookahead only, advantages are the TD errors
        let td = gae(&r, &v, g, 1e-300).unwrap();
        for t in 0..r.len() {
            prop_assert!((td[t] - (r[t] + g * v[t + 1] - v[t])).abs() <= 1e-9 * td[t].abs().max(1.0));
        }
        // returns satisfy the one-step recursion
        let ret = discounted_returns(&r, g);
        for t in 0..r.len() - 1 {
            prop_assert!((ret[t] - (r[t] + g * ret[t + 1])).abs() <= 1e-9 * ret[t].abs().max(1.0));
        }
    }

    #[test]
    fn log_prob_peaks_at_mean(
        mean in prop::collection::vec(-2.0f64..2.0, 1..6),
        shift in -1.0f64..1.0,
        ls in -2.0f64..1.0,
    ) {
        let log_std = vec![ls; mean.len()];
        let at = gaussian_log_prob(&mean, &log_std, &mean);
        let off: Vec<f64> = mean.iter().map(|m| m + shift).collect();
        prop_assert!(gaussian_log_prob(&mean, &log_std, &off) <= at);
        prop_assert!((entropy(&log_std) - mean.len() as f64 * (1.4189385332046727 + ls)).abs() < 1e-12);
    }

    #[test]
    fn laplace_keeps_total_and_order(c in prop::collection::vec(0.0f64..100.0, 2..64), eps in 1e-9f64..1e-1) {
        prop_assume!(c.iter().sum::<f64>() > 0.0);
        let s = laplace_smooth(&c, eps).unwrap();
        let n: f64 = c.iter().sum();
        prop_assert!((s.iter().sum::<f64>() - n).abs() <= 1e-9 * n);
        for i in 0..c.len() {
            prop_assert!(s[i] > 0.0);
            for j in 0..c.len() {
                if c[i] < c[j] {
                    prop_assert!(s[i] <= s[j]);
                }
            }
        }
    }

    #[test]
    fn qoe_decreases_with_delay(
        v in prop::collection::vec(5e4f64..2e6, 1..5),
        d1 in 0.0f64..20.0,
        d2 in 0.0f64..20.0,
    ) {
        let w = QoeWeights::default();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(qoe_slot(&v, &v, hi, &w).unwrap() <= qoe_slot(&v, &v, lo, &w).unwrap());
    }

    #[test]
    fn recovery_keeps_received_indices(
        h in 1usize..8,
        w in 1usize..8,
        seed in any::<u64>(),
        p in 0.0f64..1.0,
    ) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let n = h * w;
        let truth = IndexFrame::new(h, w, (0..n).map(|_| rng.random_range(0..16)).collect()).unwrap();
        let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
        let rx = MaskedIndexFrame::with_mask(&truth, 16, mask.clone()).unwrap();
        let window = FrameWindow::from_frames(vec![rx]).unwrap();
        let rec = temporal_hold_recover(&window, None).unwrap();
        for pos in 0..n {
            if !mask[pos] {
                prop_assert_eq!(rec.indices()[pos], truth.indices()[pos]);
            }
            prop_assert!(rec.indices()[pos] < 16);
        }
        let acc = recovery_accuracy(&rec, &truth, &mask).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
    }
}
