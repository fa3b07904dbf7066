mod common;

use proptest::prelude::*;
use smq_core::heavy_traffic::ht_rate;
use smq_core::inversion::{invert_pgf, mean_queue_length, MeanOptions};
use smq_core::{Complex, Epoch, Solution};

fn model_strategy() -> impl Strategy<Value = smq_core::Model> {
    (any::<u64>(), 1usize..=4, 0.05f64..0.9).prop_map(|(seed, n, rho)| {
        common::random_model(&mut common::rng(seed), n, rho)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn solution_is_a_probability_law(model in model_strategy()) {
        let n = model.n_types();
        let sol = Solution::new(model).unwrap();
        prop_assert_eq!(sol.roots().roots.len(), n - 1);
        prop_assert!(sol.roots().roots.iter().all(|z| z.norm() < 1.0));
        prop_assert!(sol.boundary().f0.iter().all(|&x| x >= 0.0));
        let total: f64 = sol.f_at_one().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "F(1) = {}", total);
        // the type marginal at departures is nonnegative
        prop_assert!(sol.f_at_one().iter().all(|&x| x > -1e-12));
        // the empty probability is p_0 of the departure pmf
        let pmf = invert_pgf(&sol, Epoch::Departure, 64).unwrap();
        prop_assert!((pmf.probabilities[0] - sol.boundary().empty_probability()).abs() < 1e-9);
    }

    #[test]
    fn pgf_is_bounded_by_one_in_the_disk(model in model_strategy(), r in 0.0f64..0.99, t in 0.0f64..std::f64::consts::TAU) {
        let sol = Solution::new(model).unwrap();
        let z = Complex::from_polar(r, t);
        for e in Epoch::ALL {
            let v = sol.epoch_pgf(z, e).unwrap();
            prop_assert!(v.norm() <= 1.0 + 1e-9, "{:?} at {}: {}", e, z, v);
        }
        // coefficients are real: F(conj z) = conj F(z)
        let a = sol.evaluate_pgf(z).unwrap();
        let b = sol.evaluate_pgf(z.conj()).unwrap();
        prop_assert!((a - b.conj()).norm() < 1e-9);
    }

    #[test]
    fn mean_matches_pgf_derivative(model in model_strategy()) {
        let sol = Solution::new(model).unwrap();
        let m = mean_queue_length(&sol, Epoch::Departure, &MeanOptions::default()).unwrap();
        // central difference of F on the real axis just inside 1
        let h = 1e-4;
        let f = |x: f64| sol.evaluate_pgf(Complex::new(x, 0.0)).unwrap().re;
        let d = (f(1.0 - h) - f(1.0 - 3.0 * h)) / (2.0 * h);
        // F'(1-2h) = E[X] - 2h E[X(X-1)] + ..., so allow a relative slack
        let second: f64 = m.pmf.probabilities.iter().enumerate().map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p).sum();
        prop_assert!((d - m.mean).abs() <= 3.0 * h * second + 1e-6 * (1.0 + m.mean), "{} vs {}", d, m.mean);
    }

    #[test]
    fn heavy_traffic_denominator_is_positive(seed in any::<u64>(), n in 1usize..=4) {
        let model = common::random_model(&mut common::rng(seed), n, 0.5);
        let ht = ht_rate(&model).unwrap();
        prop_assert!(ht.valid, "denominator {}", ht.denominator);
        prop_assert!(ht.eta > 0.0);
        // scaling lambda does not change the heavy-traffic rate
        let other = ht_rate(&model.with_lambda(model.lambda() * 0.3).unwrap()).unwrap();
        prop_assert!((ht.eta - other.eta).abs() <= 1e-9 * ht.eta);
    }
}

#[test]
fn pmfs_from_different_truncations_agree() {
    let mut rng = common::rng(11);
    for n in 1..=3 {
        let sol = Solution::new(common::random_model(&mut rng, n, 0.6)).unwrap();
        let a = invert_pgf(&sol, Epoch::Arbitrary, 64).unwrap();
        let b = invert_pgf(&sol, Epoch::Arbitrary, 256).unwrap();
        for k in 0..=64 {
            assert!((a.probabilities[k] - b.probabilities[k]).abs() < 1e-9, "n={n} k={k}");
        }
    }
}
