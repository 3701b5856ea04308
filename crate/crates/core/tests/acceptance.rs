//! Acceptance criteria. Each prints one PASS/FAIL line; the process exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_traits::ToPrimitive;
use rayon::prelude::*;

use steadybench::channel::{from_choi, Construction, KrausChannel};
use steadybench::circuit::{
    build_random_circuit, build_random_circuit_with, circuit_to_channel, AncillaStrategy, NoiseModel, SimState,
};
use steadybench::linalg::{eig_hermitian, eigvals_general, sample_ginibre, sample_haar_unitary, DensityMatrix};
use steadybench::protocol::{run_benchmark_with, BenchmarkReport, ProtocolConfig, Repetitions, Shots};
use steadybench::qasm::{decompose_two_qubit, export_qasm, phase_distance, recompose};
use steadybench::rmt::{
    ks_distance, ks_distance_to_cdf, mp_moment_exact, sample_fixed_trace_wishart, EmpiricalDistribution, MPParams, ReferenceCache,
};
use steadybench::rng::{lane, RngStream};
use steadybench::spectral::{analyze_spectrum, girko_fraction, mean_disk_violation, steady_state, ChannelSpectrum};
use steadybench::Result;

type Check = Result<(bool, String)>;

fn pooled_steady_eigenvalues(construction: Construction, count: usize, seed: u64) -> Result<Vec<f64>> {
    let per: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64);
            let ch = construction.sample::<f64>(3, 2, &mut rng)?;
            Ok(steady_state(&ch)?.eigenvalues)
        })
        .collect::<Result<_>>()?;
    Ok(per.concat())
}

fn girko_disk() -> Check {
    let start = Instant::now();
    let spectra = (0..100u64)
        .map(|i| {
            let ch = Construction::GinibreKraus.sample::<f64>(3, 2, &mut RngStream::new(101, i))?;
            analyze_spectrum(&ch)
        })
        .collect::<Result<Vec<_>>>()?;
    let fraction = girko_fraction(&spectra, 0.05)?;
    let elapsed = start.elapsed();
    Ok((
        fraction >= 0.95 && elapsed < Duration::from_secs(60),
        format!(
            "inside fraction {fraction:.4} (>= 0.95), {:.1} s single-threaded (< 60 s)",
            elapsed.as_secs_f64()
        ),
    ))
}

fn depth_convergence() -> Check {
    let mut violations = Vec::new();
    for depth in [1, 3, 5] {
        let spectra: Vec<ChannelSpectrum<f64>> = (0..50u64)
            .into_par_iter()
            .map(|i| {
                let c = build_random_circuit(3, depth, &mut RngStream::new(102, i).lane(lane::MAP))?;
                analyze_spectrum(&circuit_to_channel(&c, None)?)
            })
            .collect::<Result<_>>()?;
        violations.push(mean_disk_violation(&spectra)?);
    }
    let pass = violations.windows(2).all(|w| w[1] < w[0]);
    Ok((pass, format!("mean violation at d=1,3,5: {violations:.5?}")))
}

fn marchenko_pastur() -> Check {
    let pooled = pooled_steady_eigenvalues(Construction::GinibreKraus, 200, 103)?;
    let params = MPParams::<f64>::new(8, 2)?;
    let dist = EmpiricalDistribution::new(pooled)?;
    let ks = ks_distance_to_cdf(&dist, |x| params.cdf(x));
    let m = dist.moments();
    let target_var = 1.0 / 128.0;
    let (mean_err, var_rel) = ((m.mean - 0.125).abs(), (m.variance - target_var).abs() / target_var);
    Ok((
        ks <= 0.05 && mean_err <= 1e-3 && var_rel <= 0.10,
        format!(
            "KS {ks:.4} (<= 0.05), |mean - 1/8| {mean_err:.2e}, variance {:.5} ({:.1}% off 1/128)",
            m.variance,
            100.0 * var_rel
        ),
    ))
}

fn moment_formula() -> Check {
    let mut pass = true;
    let mut lines = Vec::new();
    for (n, r) in [(4usize, 2usize), (4, 4), (8, 2), (8, 4)] {
        let mut rng = RngStream::new(104, (100 * n + r) as u64);
        let mut pooled = Vec::new();
        for _ in 0..2000 {
            let w = sample_fixed_trace_wishart::<f64>(n, r, &mut rng)?;
            pooled.extend(eig_hermitian(w.matrix())?.values);
        }
        let mu1 = mp_moment_exact(n, r, 1)?;
        if mu1 != num_rational::Ratio::new(1, n as i128) {
            pass = false;
            lines.push(format!("N={n} r={r}: mu_1 = {mu1}, not 1/{n}"));
        }
        for m in 1..=3u32 {
            let exact = mp_moment_exact(n, r, m)?;
            let analytic = exact.numer().to_f64().unwrap_or(f64::NAN) / exact.denom().to_f64().unwrap_or(f64::NAN);
            let powers: Vec<f64> = pooled.iter().map(|l| l.powi(m as i32)).collect();
            let s = EmpiricalDistribution::new(powers)?.moments();
            let se = (s.variance / s.count as f64).sqrt();
            let z = if se > 0.0 { (s.mean - analytic) / se } else { 0.0 };
            let ok = z.abs() <= 5.0 || (m == 1 && (s.mean - analytic).abs() < 1e-12);
            pass &= ok;
            lines.push(format!(
                "N={n} r={r} m={m}: analytic {analytic:.6e}, sampled {:.6e}, z {z:+.2} {}",
                s.mean,
                if ok { "ok" } else { "OUTSIDE 5 SE" }
            ));
        }
    }
    Ok((pass, lines.join("\n    ")))
}

fn circuit_config(rank: usize, seed: u64) -> ProtocolConfig {
    ProtocolConfig {
        n_system: 3,
        depth: 3,
        repetitions: Repetitions::Auto(1e-3),
        ensemble_size: 100,
        shots: Shots::Exact,
        rank,
        master_seed: seed,
        ..ProtocolConfig::default()
    }
}

fn output_statistics(cache: &ReferenceCache) -> Check {
    let r2 = run_benchmark_with(&circuit_config(2, 105), cache)?;
    let r4 = run_benchmark_with(&circuit_config(4, 105), cache)?;
    let (ks, v2, v4) = (
        r2.aggregate.ks_reference,
        r2.aggregate.output_moments.variance,
        r4.aggregate.output_moments.variance,
    );
    Ok((
        ks <= 0.05 && v4 < v2,
        format!("KS {ks:.4} (<= 0.05); output variance r=2 {v2:.4e} > r=4 {v4:.4e}"),
    ))
}

fn ladder(cache: &ReferenceCache, models: &[NoiseModel]) -> Result<Vec<(f64, f64)>> {
    models
        .iter()
        .map(|m| {
            let cfg = ProtocolConfig {
                noise: Some(m.clone()),
                ..circuit_config(2, 106)
            };
            let r = run_benchmark_with(&cfg, cache)?;
            Ok((r.aggregate.output_moments.variance, r.aggregate.ks_reference))
        })
        .collect()
}

fn monotone(points: &[(f64, f64)]) -> bool {
    points.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 >= w[0].1)
}

fn noise_response(cache: &ReferenceCache) -> Check {
    let reset: Vec<NoiseModel> = [0.0, 0.25, 0.5]
        .iter()
        .map(|&p| NoiseModel {
            reset_error: p,
            ..NoiseModel::default()
        })
        .collect();
    let depol: Vec<NoiseModel> = [0.0, 0.02, 0.05]
        .iter()
        .map(|&w| NoiseModel {
            depolarizing: w,
            ..NoiseModel::default()
        })
        .collect();
    let (a, b) = (ladder(cache, &reset)?, ladder(cache, &depol)?);
    let fmt = |pts: &[(f64, f64)]| {
        pts.iter()
            .map(|(v, k)| format!("var {v:.3e} KS {k:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok((
        monotone(&a) && monotone(&b),
        format!(
            "reset p=0,0.25,0.5: [{}]\n    depolarizing w=0,0.02,0.05: [{}]",
            fmt(&a),
            fmt(&b)
        ),
    ))
}

fn cross_construction() -> Check {
    let a = EmpiricalDistribution::new(pooled_steady_eigenvalues(Construction::GinibreKraus, 200, 107)?)?;
    let b = EmpiricalDistribution::new(pooled_steady_eigenvalues(Construction::Stinespring, 200, 108)?)?;
    let ks = ks_distance(&a, &b);
    Ok((ks <= 0.05, format!("two-sample KS {ks:.4} (<= 0.05)")))
}

fn random_state(n: usize, pure: bool, rng: &mut RngStream) -> Result<DensityMatrix<f64>> {
    if pure {
        let g = sample_ginibre::<f64>(n, 1, rng);
        let norm = g.frobenius_norm();
        DensityMatrix::pure(&g.scale_real(1.0 / norm).into_vec())
    } else {
        sample_fixed_trace_wishart(n, 2, rng)
    }
}

fn simulator_channel() -> Check {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for d in 1..=3 {
            let mut rng = RngStream::new(109, (10 * n + d) as u64);
            let c = build_random_circuit(n, d, &mut rng.lane(lane::MAP))?;
            let ch = circuit_to_channel(&c, None)?;
            for k in 0..10 {
                let rho = random_state(1 << n, k % 2 == 0, &mut rng)?;
                let mut sim = SimState::new(&rho, &c, None, rng.substream(k))?;
                sim.step(&c, None)?;
                worst = worst.max(sim.system_state(&c)?.matrix().max_abs_diff(&ch.apply_matrix(rho.matrix())));
            }
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max entrywise difference {worst:.2e} (<= 1e-9) over n,d in 1..=3, 10 states each"),
    ))
}

fn cptp_suite() -> Check {
    let constructions = [Construction::GinibreKraus, Construction::Stinespring, Construction::Choi];
    let results: Vec<(f64, f64, f64)> = (0..1000usize)
        .into_par_iter()
        .map(|i| {
            let n_qubits = 1 + i % 3;
            let rank = (1 + (i / 3) % 8).min(1 << (2 * n_qubits));
            let mut rng = RngStream::new(110, i as u64);
            let ch: KrausChannel<f64> = constructions[(i / 24) % 3].sample(n_qubits, rank, &mut rng)?;
            let choi = ch.to_choi();
            // Round trip through the Choi representation must stay CPTP too.
            from_choi(&choi)?;
            let unit = eigvals_general(ch.to_superoperator().matrix())?
                .iter()
                .map(|v| (v - num_complex::Complex::new(1.0, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            Ok((ch.tp_deviation(), choi.min_eigenvalue()?, unit))
        })
        .collect::<Result<_>>()?;
    let tp = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let psd = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let unit = results.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok((
        tp <= 1e-10 && psd >= -1e-9 && unit <= 1e-7,
        format!("worst TP deviation {tp:.2e}, min Choi eigenvalue {psd:.2e}, worst |lambda - 1| {unit:.2e} over 1000 channels"),
    ))
}

fn run_cli(workers: usize, out: &Path, cache: &Path, noise: &Path) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_steadybench"))
        .args([
            "run",
            "--qubits",
            "2",
            "--depth",
            "2",
            "--epsilon",
            "1e-3",
            "--ensemble",
            "24",
        ])
        .args(["--shots", "2000", "--seed", "31", "--reference-samples", "100000"])
        .arg("--noise-file")
        .arg(noise)
        .args(["--workers", &workers.to_string()])
        .arg("--out")
        .arg(out)
        .arg("--cache-dir")
        .arg(cache)
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| steadybench::Error::io("steadybench", e))?;
    if !status.success() {
        return Err(steadybench::Error::InvalidParams(format!(
            "steadybench run exited with {status}"
        )));
    }
    Ok(())
}

fn reproducibility() -> Check {
    let dir = tempfile::tempdir().map_err(|e| steadybench::Error::io("tempdir", e))?;
    let noise = dir.path().join("noise.json");
    std::fs::write(
        &noise,
        r#"{"depolarizing": 0.01, "reset_error": 0.05, "readout_error": 0.02, "t1": 100.0, "gate_duration": 0.1}"#,
    )
    .map_err(|e| steadybench::Error::io(&noise, e))?;
    let (a, b) = (dir.path().join("w1"), dir.path().join("w8"));
    run_cli(1, &a, &dir.path().join("cache1"), &noise)?;
    run_cli(8, &b, &dir.path().join("cache8"), &noise)?;
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .map_err(|e| steadybench::Error::io(&a, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        if std::fs::read(a.join(name)).ok() != std::fs::read(b.join(name)).ok() {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    BenchmarkReport::read(&a.join("report.json"))?;
    Ok((
        differing.is_empty() && names.len() == 6,
        format!("{} files compared at workers 1 and 8, differing: {differing:?}", names.len()),
    ))
}

fn qasm_round_trip() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let u = sample_haar_unitary::<f64>(4, &mut RngStream::new(111, i));
        worst = worst.max(phase_distance(&recompose(&decompose_two_qubit(u.matrix())?), u.matrix()));
    }
    let mut structure_ok = true;
    let mut cases = Vec::new();
    for (n_anc, strategy, reps) in [
        (1, AncillaStrategy::Reuse, 20),
        (2, AncillaStrategy::Reuse, 10),
        (1, AncillaStrategy::Fresh, 5),
    ] {
        let c = build_random_circuit_with(3, n_anc, 3, strategy, &mut RngStream::new(112, n_anc as u64))?;
        let src = export_qasm(&c, reps, Some(112))?.source;
        let measures = src
            .lines()
            .filter(|l| l.starts_with("anc[") && l.contains("= measure"))
            .count();
        let resets = src.lines().filter(|l| l.starts_with("reset ")).count();
        let finals = src.lines().filter(|l| l.starts_with("c[") && l.contains("= measure")).count();
        let cx = src.lines().filter(|l| l.starts_with("cx ")).count();
        let ok = measures == n_anc * reps && resets == n_anc * reps && finals == 3 && cx == 3 * c.gate_count() * reps;
        structure_ok &= ok;
        cases.push(format!(
            "{strategy:?}/{n_anc} anc x{reps}: {measures} measure, {resets} reset, {finals} final, {cx} cx"
        ));
    }
    Ok((
        worst <= 1e-8 && structure_ok,
        format!(
            "worst phase distance {worst:.2e} (<= 1e-8) over 100 gates; {}",
            cases.join("; ")
        ),
    ))
}

fn main() {
    let cache = ReferenceCache::in_memory();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        ("girko disk", Box::new(girko_disk)),
        ("depth convergence", Box::new(depth_convergence)),
        ("marchenko-pastur steady states", Box::new(marchenko_pastur)),
        ("moment formula", Box::new(moment_formula)),
        ("output statistics", Box::new(|| output_statistics(&cache))),
        ("noise response", Box::new(|| noise_response(&cache))),
        ("cross-construction universality", Box::new(cross_construction)),
        ("simulator-channel equivalence", Box::new(simulator_channel)),
        ("cptp invariant suite", Box::new(cptp_suite)),
        ("reproducibility", Box::new(reproducibility)),
        ("qasm round trip", Box::new(qasm_round_trip)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
