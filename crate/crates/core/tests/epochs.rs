mod common;

use smq_core::inversion::{invert_pgf, mean_queue_length, MeanOptions};
use smq_core::sim::{simulate, SimConfig};
use smq_core::{presets, Batch, Complex, Duration, Epoch, Solution};

#[test]
fn single_arrivals_make_all_epochs_coincide() {
    let mut rng = common::rng(5);
    for n in 1..=4 {
        let sol = Solution::new(common::random_single_arrival_model(&mut rng, n, 0.7)).unwrap();
        let reference = invert_pgf(&sol, Epoch::Departure, 128).unwrap();
        for e in Epoch::ALL {
            let p = invert_pgf(&sol, e, 128).unwrap();
            for (a, b) in p.probabilities.iter().zip(&reference.probabilities) {
                assert!((a - b).abs() < 1e-10, "n={n} {e}");
            }
        }
    }
}

#[test]
fn geometric_batches_satisfy_the_arrival_relation() {
    let mut rng = common::rng(9);
    for n in 1..=3 {
        let regular = common::random_kernel(&mut rng, n);
        let q = 0.45;
        let batch = Batch::Geometric { p: q };
        let m = smq_core::Model::new(1.0, batch.clone(), regular, None).unwrap();
        let m = m.with_lambda(m.lambda_for_rho(0.75).unwrap()).unwrap();
        let sol = Solution::new(m).unwrap();
        let eb = 1.0 / q;
        for k in 0..40 {
            let z = Complex::from_polar(0.05 + 0.9 * (k % 10) as f64 / 10.0, 0.7 * k as f64);
            let customer = sol.epoch_pgf(z, Epoch::CustomerArrival).unwrap();
            let batch_arr = sol.epoch_pgf(z, Epoch::BatchArrival).unwrap();
            // customer-arrival view = batch-arrival view + batch-mates ahead
            let lhs = customer * eb * (Complex::new(1.0, 0.0) - z);
            let rhs = batch_arr * (Complex::new(1.0, 0.0) - batch.pgf(z));
            assert!((lhs - rhs).norm() < 1e-10, "n={n} z={z}");
        }
    }
}

#[test]
fn customers_see_more_than_batches_under_geometric_batches() {
    // N = 1, geometric batches with mean 2, exponential services
    let model = presets::mxg1(0.2, Batch::Geometric { p: 0.5 }, Duration::exponential(1.0));
    let sol = Solution::new(model.clone()).unwrap();
    let opts = MeanOptions::default();
    let batch = mean_queue_length(&sol, Epoch::BatchArrival, &opts).unwrap().mean;
    let customer = mean_queue_length(&sol, Epoch::CustomerArrival, &opts).unwrap().mean;
    // the difference is the mean number of batch-mates ahead: E[B(B-1)] / (2 E[B])
    let ahead = 1.0;
    assert!((customer - batch - ahead).abs() < 1e-8, "{customer} - {batch}");

    let sim = simulate(&model, &SimConfig { num_departures: 400_000, ..SimConfig::default() }).unwrap();
    let s_batch = sim.epoch(Epoch::BatchArrival);
    let s_customer = sim.epoch(Epoch::CustomerArrival);
    assert!(s_customer.mean > s_batch.mean);
    assert!((s_batch.mean - batch).abs() < 4.0 * s_batch.half_width, "{} vs {batch}", s_batch.mean);
    assert!((s_customer.mean - customer).abs() < 4.0 * s_customer.half_width);
}

#[test]
fn fixed_batches_of_two_split_the_epochs() {
    let model = presets::mxg1(0.3, Batch::Finite(vec![0.0, 1.0]), Duration::erlang(2, 2.0));
    let sol = Solution::new(model.clone()).unwrap();
    let sim = simulate(&model, &SimConfig { num_departures: 400_000, ..SimConfig::default() }).unwrap();
    let analytic_batch = invert_pgf(&sol, Epoch::BatchArrival, 128).unwrap();
    let analytic_customer = invert_pgf(&sol, Epoch::CustomerArrival, 128).unwrap();
    assert!(common::tv(&analytic_batch.probabilities, &analytic_customer.probabilities) > 0.05);
    for (e, analytic) in [(Epoch::BatchArrival, &analytic_batch), (Epoch::CustomerArrival, &analytic_customer)] {
        let d = common::tv(&sim.epoch(e).pmf, &analytic.probabilities);
        assert!(d < 0.01, "{e}: {d}");
    }
}
