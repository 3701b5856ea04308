use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};
use steadybench::linalg::{eig_hermitian, sample_ginibre};
use steadybench::rmt::{
    ks_distance, ks_distance_to_cdf, normal_probability_points, reference_output_distribution, sample_fixed_trace_wishart,
    EmpiricalDistribution, MPParams,
};
use steadybench::rng::RngStream;

/// Output probability drawn the long way: Wishart spectrum, Haar vector,
/// then `sum_i lambda_i |<psi_i|x>|^2`.
fn spectral_oracle_sample(n: usize, r: usize, rng: &mut RngStream) -> f64 {
    let w = sample_fixed_trace_wishart::<f64>(n, r, rng).unwrap();
    let lambdas = eig_hermitian(w.matrix()).unwrap().values;
    let g = sample_ginibre::<f64>(n, 1, rng);
    let norm: f64 = g.as_slice().iter().map(|z| z.norm_sqr()).sum();
    lambdas.iter().zip(g.as_slice()).map(|(l, z)| l * z.norm_sqr() / norm).sum()
}

#[test]
fn reference_matches_spectral_oracle() {
    let (n, r, count) = (8, 2, 1_000_000);
    let p = MPParams::new(n, r).unwrap();
    let reference = reference_output_distribution(&p, count, 11).unwrap();
    let oracle: Vec<f64> = (0..count / 10_000)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = RngStream::new(12, c as u64);
            (0..10_000).map(move |_| spectral_oracle_sample(n, r, &mut rng))
        })
        .collect();
    let oracle = EmpiricalDistribution::new(oracle).unwrap();
    let d = ks_distance(&oracle, &reference);
    assert!(d <= 0.01, "KS {d}");
    let (a, b) = (reference.distribution().moments(), oracle.moments());
    assert!((a.variance - b.variance).abs() <= 0.02 * a.variance);
}

#[test]
fn reference_is_the_beta_law() {
    // A diagonal entry of a unit-trace Wishart matrix is Beta(N r, N (N - 1) r).
    for &(n, r) in &[(4usize, 2usize), (8, 2), (8, 4)] {
        let p = MPParams::new(n, r).unwrap();
        let reference = reference_output_distribution(&p, 100_000, 13).unwrap();
        let beta = Beta::new((n * r) as f64, (n * (n - 1) * r) as f64).unwrap();
        let d = ks_distance_to_cdf(reference.distribution(), |x| beta.cdf(x));
        // 1.95 / sqrt(n) is the 0.1% critical value.
        assert!(d <= 1.95 / (100_000f64).sqrt(), "N={n} r={r} KS {d}");
    }
}

#[test]
fn diagonal_entries_are_basis_invariant() {
    let (n, r, count) = (4usize, 2usize, 100_000usize);
    let mut rng = RngStream::new(14, 0);
    let mut pooled = Vec::with_capacity(count);
    let mut first = Vec::with_capacity(count);
    while first.len() < count {
        let w = sample_fixed_trace_wishart::<f64>(n, r, &mut rng).unwrap();
        first.push(w.matrix()[(0, 0)].re);
        for x in 0..n {
            if pooled.len() < count {
                pooled.push(w.matrix()[(x, x)].re);
            }
        }
    }
    // Pooled entries come from count / n matrices; use an independent set for x = 0.
    let d = ks_distance(
        &EmpiricalDistribution::new(pooled).unwrap(),
        EmpiricalDistribution::new(first).unwrap(),
    );
    assert!(d <= 0.01, "KS {d}");
}

#[test]
fn porter_thomas_overlaps_are_exponential() {
    let (n, count) = (16usize, 100_000usize);
    let mut rng = RngStream::new(15, 0);
    let scaled: Vec<f64> = (0..count)
        .map(|_| {
            let g = sample_ginibre::<f64>(n, 1, &mut rng);
            let norm: f64 = g.as_slice().iter().map(|z| z.norm_sqr()).sum();
            n as f64 * g.as_slice()[0].norm_sqr() / norm
        })
        .collect();
    let m = EmpiricalDistribution::new(scaled).unwrap().moments();
    let se_mean = (m.variance / count as f64).sqrt();
    assert!((m.mean - 1.0).abs() <= 5.0 * se_mean, "mean {}", m.mean);
    // Finite-N overlaps are Beta(1, N-1) scaled by N: variance (N-1)/(N+1).
    let exact_var = (n as f64 - 1.0) / (n as f64 + 1.0);
    let se_var = (8.0 / count as f64).sqrt();
    assert!((m.variance - exact_var).abs() <= 5.0 * se_var, "var {}", m.variance);
    assert!((m.variance - 1.0).abs() <= 5.0 * se_var + 2.0 / n as f64);
}

#[test]
fn large_system_output_is_heavy_tailed() {
    let p = MPParams::new(32, 2).unwrap();
    let reference = reference_output_distribution(&p, 100_000, 16).unwrap();
    let m = reference.distribution().moments();
    assert!(m.kurtosis > 3.0, "kurtosis {}", m.kurtosis);
    let plot = normal_probability_points(reference.distribution()).unwrap();
    // Right tail sits above the identity line.
    let last = plot.points.last().unwrap();
    assert!(last.1 > last.0);
}

/// Exact finite-N moments of unit-trace Wishart spectra. `W = G G^dagger / T`
/// is independent of `T = Tr(G G^dagger)`, so `E Tr W^m = E Tr (GG^dagger)^m / E T^m`.
fn finite_n_moment(n: usize, r: usize, m: u32) -> f64 {
    let (nf, mf) = (n as f64, (n * r) as f64);
    let k = nf * mf;
    let trace_moment = match m {
        1 => nf * mf,
        2 => nf * mf * (nf + mf),
        3 => nf * mf * (nf * nf + 3.0 * nf * mf + mf * mf + 1.0),
        _ => unreachable!(),
    };
    let t_moment: f64 = (0..m).map(|i| k + i as f64).product();
    trace_moment / t_moment / nf
}

#[test]
fn wishart_sampler_matches_exact_finite_n_moments() {
    for &(n, r) in &[(4usize, 2usize), (8, 2), (4, 4), (8, 4)] {
        let mut rng = RngStream::new(17, (n * 100 + r) as u64);
        let mut pooled = Vec::new();
        for _ in 0..2000 {
            let w = sample_fixed_trace_wishart::<f64>(n, r, &mut rng).unwrap();
            pooled.extend(eig_hermitian(w.matrix()).unwrap().values);
        }
        for m in 1..=3u32 {
            let powers: Vec<f64> = pooled.iter().map(|l| l.powi(m as i32)).collect();
            let s = EmpiricalDistribution::new(powers).unwrap().moments();
            let se = (s.variance / s.count as f64).sqrt();
            let exact = finite_n_moment(n, r, m);
            assert!((s.mean - exact).abs() <= 5.0 * se.max(1e-15), "N={n} r={r} m={m}");
        }
    }
}
