use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::csv_error;

/// Non-empty, finite samples sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

/// Sample mean, unbiased variance and (non-excess) kurtosis `m4 / m2^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub kurtosis: f64,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParams(
                "empirical distribution needs at least one sample".into(),
            ));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParams("empirical distribution has non-finite samples".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { samples })
    }

    pub(crate) fn from_sorted(samples: Vec<f64>) -> Result<Self> {
        debug_assert!(samples.windows(2).all(|w| w[0] <= w[1]));
        if samples.is_empty() {
            return Err(Error::InvalidParams(
                "empirical distribution needs at least one sample".into(),
            ));
        }
        Ok(EmpiricalDistribution { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Right-continuous ECDF `#{x_i <= x} / n`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    /// Smallest sample `x` with `cdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.samples[k - 1]
    }

    pub fn moments(&self) -> SampleMoments {
        let n = self.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        let (mut m2, mut m4) = (0.0, 0.0);
        for s in &self.samples {
            let d2 = (s - mean) * (s - mean);
            m2 += d2;
            m4 += d2 * d2;
        }
        let variance = if self.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
        let (m2n, m4n) = (m2 / n, m4 / n);
        let kurtosis = if m2n > 0.0 { m4n / (m2n * m2n) } else { f64::NAN };
        SampleMoments {
            count: self.len(),
            mean,
            variance,
            kurtosis,
        }
    }
}

/// Two-sample Kolmogorov-Smirnov statistic by a sorted-merge sweep.
pub fn ks_distance(a: &EmpiricalDistribution, b: impl AsRef<EmpiricalDistribution>) -> f64 {
    let b = b.as_ref();
    let (xs, ys) = (&a.samples, &b.samples);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

impl AsRef<EmpiricalDistribution> for EmpiricalDistribution {
    fn as_ref(&self) -> &EmpiricalDistribution {
        self
    }
}

/// One-sample statistic against a continuous CDF.
pub fn ks_distance_to_cdf(a: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = a.len() as f64;
    let xs = &a.samples;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i];
        let below = i as f64 / n;
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        let at = i as f64 / n;
        let f = cdf(v);
        d = d.max((f - below).abs()).max((f - at).abs());
    }
    d
}

/// Step points `(value, F(value))` at each distinct sample value.
pub fn empirical_cdf(d: &EmpiricalDistribution) -> Vec<(f64, f64)> {
    let n = d.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in d.samples.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    out
}

/// Points of a normal probability plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalProbabilityPlot {
    /// `(theoretical_quantile, standardized_sample_quantile)`.
    pub points: Vec<(f64, f64)>,
    /// Zero sample variance: sample quantiles are all zero and carry no shape.
    pub degenerate: bool,
}

impl NormalProbabilityPlot {
    /// Least-squares slope of sample against theoretical quantiles.
    pub fn slope(&self) -> f64 {
        let n = self.points.len() as f64;
        let mx = self.points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = self.points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = self.points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = self.points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }
}

/// Standardized order statistics against normal quantiles at `(i - 0.5) / n`.
pub fn normal_probability_points(d: &EmpiricalDistribution) -> Result<NormalProbabilityPlot> {
    if d.len() < 10 {
        return Err(Error::InvalidParams(format!(
            "normal probability plot needs at least 10 samples, got {}",
            d.len()
        )));
    }
    let m = d.moments();
    let sd = m.variance.sqrt();
    let degenerate = !(sd > 0.0);
    let n = d.len() as f64;
    let points = d
        .samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let q = inverse_normal_cdf((i as f64 + 0.5) / n);
            let z = if degenerate { 0.0 } else { (x - m.mean) / sd };
            (q, z)
        })
        .collect();
    Ok(NormalProbabilityPlot { points, degenerate })
}

/// Acklam's rational approximation to the standard normal quantile
/// (relative error below 1.2e-9 on `(0, 1)`).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.02425;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

#[derive(Serialize)]
struct CdfRow {
    value: f64,
    cdf: f64,
}

#[derive(Serialize)]
struct QuantileRow {
    theoretical: f64,
    sample: f64,
}

/// Writes `value,cdf` rows.
pub fn write_cdf_csv<W: Write>(out: W, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for &(value, cdf) in points {
        w.serialize(CdfRow { value, cdf }).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Writes `theoretical,sample` rows.
pub fn write_quantiles_csv<W: Write>(out: W, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for &(theoretical, sample) in points {
        w.serialize(QuantileRow { theoretical, sample }).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
