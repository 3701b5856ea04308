//! Random-matrix reference layer: Marchenko-Pastur law of fixed-trace
//! Wishart spectra, the output-probability reference distribution, and the
//! statistics used to score samples against it.

mod quad;
mod reference;
mod stats;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use quad::integrate;
pub use reference::{
    reference_output_distribution, sample_fixed_trace_wishart, sample_wishart_diagonal, ReferenceCache, ReferenceKey,
    ReferenceOutputDistribution, DEFAULT_REFERENCE_SAMPLES,
};
pub use stats::{
    empirical_cdf, ks_distance, ks_distance_to_cdf, normal_probability_points, write_cdf_csv, write_quantiles_csv,
    EmpiricalDistribution, NormalProbabilityPlot, SampleMoments,
};

/// Absolute tolerance of the density quadrature.
pub const QUAD_TOLERANCE: f64 = 1e-9;

/// Parameters of the Marchenko-Pastur law for unit-trace `N x N` Wishart
/// matrices built from `N x N r` Ginibre factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MPParams<T> {
    pub n: usize,
    pub r: usize,
    pub kappa: T,
    pub lambda_minus: T,
    pub lambda_plus: T,
}

impl<T: Real> MPParams<T> {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::InvalidParams(format!(
                "MP parameters need N, r >= 1, got N={n}, r={r}"
            )));
        }
        let nf = T::lit(n as f64);
        let s = T::one() / T::lit(r as f64).sqrt();
        Ok(MPParams {
            n,
            r,
            kappa: T::one() / (nf * T::lit(r as f64)),
            lambda_minus: (T::one() - s).powi(2) / nf,
            lambda_plus: (T::one() + s).powi(2) / nf,
        })
    }

    /// `sqrt((l+ - l)(l - l-)) / (2 pi kappa l)` on the support, zero outside.
    pub fn pdf(&self, lambda: T) -> Result<T> {
        if lambda <= T::zero() && self.lambda_minus <= T::zero() {
            if lambda == T::zero() {
                return Err(Error::InvalidParams(
                    "density diverges at lambda = 0 when the lower edge is 0".into(),
                ));
            }
            return Ok(T::zero());
        }
        if lambda <= self.lambda_minus || lambda >= self.lambda_plus {
            return Ok(T::zero());
        }
        let root = ((self.lambda_plus - lambda) * (lambda - self.lambda_minus)).sqrt();
        Ok(root / (T::lit(2.0) * T::PI() * self.kappa * lambda))
    }

    /// `integral_{l-}^{x} g(l) P(l) dl` via `l = l- + (l+ - l-) sin^2(theta)`,
    /// which removes the square-root edge singularities.
    pub fn integrate_against(&self, g: impl Fn(T) -> T, x: T) -> T {
        let (a, b) = (self.lambda_minus, self.lambda_plus);
        if x <= a {
            return T::zero();
        }
        let w = b - a;
        let upper = if x >= b {
            T::FRAC_PI_2()
        } else {
            ((x - a) / w).sqrt().min(T::one()).asin()
        };
        let scale = w * w * T::lit(2.0) / (T::lit(2.0) * T::PI() * self.kappa);
        let integrand = |theta: T| {
            let (s, c) = theta.sin_cos();
            let s2 = s * s;
            let lambda = a + w * s2;
            if lambda <= T::zero() {
                // Lower edge at 0: s^2 / lambda -> 1 / w.
                return scale * c * c * g(lambda) / w;
            }
            scale * s2 * c * c * g(lambda) / lambda
        };
        integrate(integrand, T::zero(), upper, T::lit(QUAD_TOLERANCE))
    }

    pub fn cdf(&self, x: T) -> T {
        if x >= self.lambda_plus {
            return T::one();
        }
        self.integrate_against(|_| T::one(), x).max(T::zero()).min(T::one())
    }

    /// `E[g(lambda)]` under the density.
    pub fn expectation(&self, g: impl Fn(T) -> T) -> T {
        self.integrate_against(g, self.lambda_plus)
    }

    /// Closed-form moment `E[lambda^m]`, see [`mp_moment_exact`].
    pub fn moment(&self, m: u32) -> Result<T> {
        if m == 0 {
            return Err(Error::InvalidParams("moment order must be >= 1".into()));
        }
        let r = T::lit(self.r as f64);
        let mut sum = T::zero();
        for l in 1..=m {
            sum += T::lit(binomial_f64(m, l - 1) * binomial_f64(m, l)) * r.powi(l as i32);
        }
        Ok(sum * self.kappa.powi(m as i32) / T::lit(m as f64))
    }

    pub fn mean(&self) -> T {
        T::one() / T::lit(self.n as f64)
    }

    /// `1 / (N^2 r)`.
    pub fn variance(&self) -> T {
        let n = T::lit(self.n as f64);
        T::one() / (n * n * T::lit(self.r as f64))
    }
}

pub fn mp_pdf<T: Real>(params: &MPParams<T>, lambda: T) -> Result<T> {
    params.pdf(lambda)
}

pub fn mp_cdf<T: Real>(params: &MPParams<T>, x: T) -> T {
    params.cdf(x)
}

pub fn mp_moment<T: Real>(params: &MPParams<T>, m: u32) -> Result<T> {
    params.moment(m)
}

/// `mu_m = (1/m) (1/(N r))^m sum_{l=1}^{m} C(m, l-1) C(m, l) r^l`, exactly.
///
/// Fails with `OutOfRange` if an intermediate value overflows `i128`.
pub fn mp_moment_exact(n: usize, r: usize, m: u32) -> Result<Ratio<i128>> {
    if n == 0 || r == 0 || m == 0 {
        return Err(Error::InvalidParams(format!("need N, r, m >= 1, got N={n}, r={r}, m={m}")));
    }
    let overflow = || Error::OutOfRange {
        value: m as f64,
        range: "moment order small enough for i128 arithmetic",
    };
    let rr = r as i128;
    let mut sum = Ratio::<i128>::zero();
    let mut rl = Ratio::<i128>::one();
    for l in 1..=m {
        rl = rl.checked_mul(&Ratio::from_integer(rr)).ok_or_else(overflow)?;
        let c = binomial_i128(m, l - 1)
            .checked_mul(binomial_i128(m, l))
            .ok_or_else(overflow)?;
        let term = rl.checked_mul(&Ratio::from_integer(c)).ok_or_else(overflow)?;
        sum = sum.checked_add(&term).ok_or_else(overflow)?;
    }
    let nr = (n as i128).checked_mul(rr).ok_or_else(overflow)?;
    let mut kappa_m = Ratio::<i128>::one();
    for _ in 0..m {
        kappa_m = kappa_m.checked_mul(&Ratio::new(1, nr)).ok_or_else(overflow)?;
    }
    sum.checked_mul(&kappa_m)
        .and_then(|v| v.checked_mul(&Ratio::new(1, m as i128)))
        .ok_or_else(overflow)
}

fn binomial_i128(n: u32, k: u32) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

fn binomial_f64(n: u32, k: u32) -> f64 {
    binomial_i128(n, k) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_edges_for_n8_r2() {
        let p = MPParams::<f64>::new(8, 2).unwrap();
        assert!((p.lambda_plus - 0.36428).abs() < 1e-5);
        assert!((p.lambda_minus - 0.010723).abs() < 1e-6);
        assert_eq!(p.kappa, 1.0 / 16.0);
    }

    #[test]
    fn pdf_vanishes_outside_support() {
        let p = MPParams::<f64>::new(8, 2).unwrap();
        assert_eq!(p.pdf(0.005).unwrap(), 0.0);
        assert_eq!(p.pdf(0.5).unwrap(), 0.0);
        assert_eq!(p.pdf(-1.0).unwrap(), 0.0);
        assert!(p.pdf(0.1).unwrap() > 0.0);
    }

    #[test]
    fn pdf_at_zero_with_zero_edge_is_invalid() {
        let p = MPParams::<f64>::new(4, 1).unwrap();
        assert_eq!(p.lambda_minus, 0.0);
        assert!(matches!(p.pdf(0.0), Err(Error::InvalidParams(_))));
        assert!(p.pdf(0.1).unwrap() > 0.0);
    }

    #[test]
    fn density_normalizes() {
        for &(n, r) in &[(2, 1), (4, 1), (4, 2), (8, 2), (8, 4), (16, 3), (32, 8)] {
            let p = MPParams::<f64>::new(n, r).unwrap();
            assert!((p.cdf(p.lambda_plus) - 1.0).abs() < 1e-6, "N={n} r={r}");
            let direct = integrate(|x| p.pdf(x).unwrap(), p.lambda_minus, p.lambda_plus, 1e-10);
            assert!((p.expectation(|_| 1.0) - 1.0).abs() < 1e-6);
            // Plain quadrature on the raw density converges only slowly at the edges.
            assert!((direct - 1.0).abs() < 1e-3, "N={n} r={r} direct={direct}");
        }
    }

    #[test]
    fn mean_is_one_over_n() {
        for &(n, r) in &[(4, 2), (8, 2), (8, 4)] {
            let p = MPParams::<f64>::new(n, r).unwrap();
            assert!((p.expectation(|x| x) - 1.0 / n as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let p = MPParams::<f64>::new(8, 2).unwrap();
        let mut last = 0.0;
        for i in 0..=200 {
            let x = p.lambda_plus * 1.1 * i as f64 / 200.0;
            let c = p.cdf(x);
            assert!(c >= last - 1e-12);
            last = c;
        }
        assert_eq!(p.cdf(1.0), 1.0);
        assert_eq!(p.cdf(0.0), 0.0);
    }

    #[test]
    fn moment_examples() {
        let p = MPParams::<f64>::new(8, 2).unwrap();
        assert!((p.moment(1).unwrap() - 0.125).abs() < 1e-15);
        assert!((p.moment(2).unwrap() - 0.0234375).abs() < 1e-15);
        assert_eq!(mp_moment_exact(8, 2, 2).unwrap(), Ratio::new(3, 128));
        for n in 1..10 {
            for r in 1..10 {
                assert_eq!(mp_moment_exact(n, r, 1).unwrap(), Ratio::new(1, n as i128));
                let mu2 = mp_moment_exact(n, r, 2).unwrap();
                let var = mu2 - Ratio::new(1, (n * n) as i128);
                assert_eq!(var, Ratio::new(1, (n * n * r) as i128));
            }
        }
    }

    #[test]
    fn closed_form_moments_match_quadrature() {
        for &(n, r) in &[(4, 2), (8, 2), (8, 4), (16, 3)] {
            let p = MPParams::<f64>::new(n, r).unwrap();
            for m in 1..=5u32 {
                let closed = p.moment(m).unwrap();
                let quad = p.expectation(|x| x.powi(m as i32));
                assert!((closed - quad).abs() < 1e-8, "N={n} r={r} m={m}");
                let exact = mp_moment_exact(n, r, m).unwrap();
                let as_f64 = *exact.numer() as f64 / *exact.denom() as f64;
                assert!((closed - as_f64).abs() <= 1e-14 * closed);
            }
        }
    }

    #[test]
    fn exact_moment_overflow_is_reported() {
        assert!(matches!(mp_moment_exact(1 << 20, 1 << 20, 12), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn f32_params() {
        let p = MPParams::<f32>::new(8, 2).unwrap();
        assert!((p.cdf(p.lambda_plus) - 1.0).abs() < 1e-5);
    }
}
