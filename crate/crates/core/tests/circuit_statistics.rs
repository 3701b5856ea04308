use rayon::prelude::*;

use steadybench::circuit::{build_random_circuit, circuit_to_channel, AncillaStrategy, MeasurementMode, NoiseModel, SimState};
use steadybench::linalg::DensityMatrix;
use steadybench::protocol::{compare_reports, run_benchmark_with, BenchmarkReport, ProtocolConfig, Repetitions, Shots};
use steadybench::rmt::{ks_distance, ks_distance_to_cdf, EmpiricalDistribution, MPParams, ReferenceCache};
use steadybench::rng::{lane, RngStream};
use steadybench::spectral::steady_state;

fn cfg(seed: u64, ensemble: usize) -> ProtocolConfig {
    ProtocolConfig {
        n_system: 3,
        depth: 3,
        repetitions: Repetitions::Auto(1e-3),
        ensemble_size: ensemble,
        shots: Shots::Exact,
        rank: 2,
        master_seed: seed,
        reference_samples: 200_000,
        ..ProtocolConfig::default()
    }
}

fn with_noise(c: ProtocolConfig, noise: NoiseModel) -> ProtocolConfig {
    ProtocolConfig { noise: Some(noise), ..c }
}

fn run(c: &ProtocolConfig, cache: &ReferenceCache) -> BenchmarkReport {
    run_benchmark_with(c, cache).unwrap()
}

#[test]
fn circuit_steady_states_follow_marchenko_pastur() {
    let pooled: Vec<f64> = (0..100u64)
        .into_par_iter()
        .flat_map_iter(|i| {
            let c = build_random_circuit(3, 3, &mut RngStream::new(201, i).lane(lane::MAP)).unwrap();
            steady_state(&circuit_to_channel(&c, None).unwrap()).unwrap().eigenvalues
        })
        .collect();
    let params = MPParams::<f64>::new(8, 2).unwrap();
    let ks = ks_distance_to_cdf(&EmpiricalDistribution::new(pooled).unwrap(), |x| params.cdf(x));
    assert!(ks <= 0.08, "KS {ks}");
}

#[test]
fn variance_falls_along_noise_ladders() {
    let cache = ReferenceCache::in_memory();
    let base = cfg(202, 100);
    let variance = |noise: NoiseModel| {
        run(&with_noise(base.clone(), noise), &cache)
            .aggregate
            .output_moments
            .variance
    };
    let reset: Vec<f64> = [0.0, 0.1, 0.25, 0.5]
        .iter()
        .map(|&p| {
            variance(NoiseModel {
                reset_error: p,
                ..NoiseModel::default()
            })
        })
        .collect();
    assert!(reset.windows(2).all(|w| w[1] <= w[0]), "{reset:?}");
    let depol: Vec<f64> = [0.0, 0.03, 0.1]
        .iter()
        .map(|&w| {
            variance(NoiseModel {
                depolarizing: w,
                ..NoiseModel::default()
            })
        })
        .collect();
    assert!(depol.windows(2).all(|w| w[1] <= w[0]), "{depol:?}");
}

#[test]
fn reset_error_raises_the_score() {
    let cache = ReferenceCache::in_memory();
    let clean = run(&cfg(203, 100), &cache);
    let noisy = run(
        &with_noise(
            cfg(203, 100),
            NoiseModel {
                reset_error: 0.3,
                ..NoiseModel::default()
            },
        ),
        &cache,
    );
    assert!(noisy.aggregate.ks_reference > clean.aggregate.ks_reference);
    assert!(compare_reports(&clean, &noisy).unwrap().ks_two_sample > 0.0);
}

#[test]
fn independent_ensembles_agree() {
    let cache = ReferenceCache::in_memory();
    let a = run(&cfg(204, 200), &cache);
    let b = run(&cfg(205, 200), &cache);
    let cmp = compare_reports(&a, &b).unwrap();
    assert!(cmp.ks_two_sample <= 0.03, "KS {}", cmp.ks_two_sample);
}

#[test]
fn fresh_and_reused_ancillas() {
    let cache = ReferenceCache::in_memory();
    let reuse = cfg(206, 100);
    let fresh = ProtocolConfig {
        ancilla_strategy: AncillaStrategy::Fresh,
        ..reuse.clone()
    };
    let (a, b) = (run(&reuse, &cache), run(&fresh, &cache));
    let ks = ks_distance(&a.output_distribution().unwrap(), b.output_distribution().unwrap());
    assert!(ks <= 0.03, "noiseless KS {ks}");

    // A fresh ancilla never sees the reset error, so it keeps more of the
    // noiseless spread.
    let noise = NoiseModel {
        reset_error: 0.25,
        ..NoiseModel::default()
    };
    let a = run(&with_noise(reuse, noise.clone()), &cache);
    let b = run(&with_noise(fresh, noise), &cache);
    assert!(b.aggregate.output_moments.variance > a.aggregate.output_moments.variance);
}

#[test]
fn trajectories_reproduce_the_averaged_state() {
    let c = build_random_circuit(2, 2, &mut RngStream::new(207, 0)).unwrap();
    let rho0 = DensityMatrix::basis(4, 0);
    let exact = circuit_to_channel(&c, None)
        .unwrap()
        .iterate(&rho0, 10)
        .unwrap()
        .probabilities();
    let trajectories = 10_000;
    let outcomes: Vec<usize> = (0..trajectories as u64)
        .into_par_iter()
        .map(|k| {
            let mut s = SimState::new(&rho0, &c, None, RngStream::new(208, k))
                .unwrap()
                .with_mode(MeasurementMode::Trajectory);
            s.run(&c, None, 10).unwrap();
            let h = s.sample_system_shots(&c, 1, &[]).unwrap();
            let (bits, _) = h.counts().iter().next().unwrap();
            usize::from_str_radix(bits, 2).unwrap()
        })
        .collect();
    // Both laws live on four outcomes, so KS is the largest gap between
    // the cumulative sums.
    let (mut f_exact, mut f_sampled, mut ks) = (0.0, 0.0, 0.0f64);
    for x in 0..4 {
        f_exact += exact[x];
        f_sampled += outcomes.iter().filter(|&&o| o == x).count() as f64 / trajectories as f64;
        ks = ks.max((f_exact - f_sampled).abs());
    }
    assert!(ks <= 0.02, "KS {ks}");
}

#[test]
fn shot_frequencies_track_exact_probabilities() {
    let c = ProtocolConfig {
        shots: Shots::Count(100_000),
        ..cfg(209, 5)
    };
    let r = run(&c, &ReferenceCache::in_memory());
    for m in &r.members {
        let exact = m.exact_probabilities.as_ref().unwrap();
        for (f, p) in m.probabilities.iter().zip(exact) {
            let sigma = (p * (1.0 - p) / 100_000.0).sqrt();
            assert!((f - p).abs() <= 5.0 * sigma + 1e-12, "member {}: {f} vs {p}", m.index);
        }
    }
}

#[test]
fn auto_repetitions_reach_the_steady_state() {
    let c = cfg(210, 20);
    let t = c.repetitions.resolve(c.rank).unwrap();
    let rho0 = DensityMatrix::basis(8, 0);
    for i in 0..c.ensemble_size {
        let ch = circuit_to_channel(&c.member_circuit(i).unwrap(), None).unwrap();
        let a = ch.iterate(&rho0, t).unwrap();
        let b = ch.iterate(&a, 5).unwrap();
        let d = a.trace_distance(&b).unwrap();
        assert!(d <= 1e-2, "member {i}: {d}");
    }
}
