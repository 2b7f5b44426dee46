//! Deterministic, seeded integration over catalog domains: importance
//! sampling matched to the egg fiber decay, rejection sampling for
//! truncations, polar sampling for balls and polydiscs, and exact
//! closed-form monomial norms for the rotation-invariant models.
//!
//! Determinism contract: a plan fixes a partition into strata, each
//! stratum draws from its own counter-seeded generator, and the reduction
//! runs in stratum order. Results are bit-identical for equal
//! (integrand, plan, seed) regardless of thread count.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domains::DomainSpec;
use crate::error::{Error, Result};

/// Output of all stochastic quadrature.
#[derive(Debug, Clone, Serialize)]
pub struct IntegralEstimate {
    pub re: f64,
    pub im: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl IntegralEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SamplePlan {
    pub count: u64,
    pub seed: u64,
    pub strata: u32,
}

impl SamplePlan {
    pub fn new(count: u64, seed: u64) -> Self {
        Self {
            count,
            seed,
            strata: 64,
        }
    }

    pub fn with_strata(mut self, strata: u32) -> Self {
        self.strata = strata.max(1);
        self
    }

    fn stratum_count(&self, index: u32) -> u64 {
        let k = u64::from(self.strata.max(1));
        let base = self.count / k;
        let extra = self.count % k;
        base + u64::from(u64::from(index) < extra)
    }

    fn stratum_rng(&self, index: u32) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from(index) + 1);
        rng
    }
}

/// Points with importance weights. The estimator of an integral is
/// sum(w_i * f(x_i)) / proposals; for rejection strategies `proposals`
/// exceeds the number of returned points.
#[derive(Debug, Clone)]
pub struct WeightedSamples {
    pub points: Vec<(Vec<Complex64>, f64)>,
    pub proposals: u64,
    pub seed: u64,
}

fn unit_ball_point(rng: &mut ChaCha12Rng, n: usize) -> Vec<Complex64> {
    // Gaussian direction, radius with the uniform-in-volume law U^(1/2n)
    loop {
        let g: Vec<Complex64> = (0..n)
            .map(|_| {
                Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
            })
            .collect();
        let norm: f64 = g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let u: f64 = rng.gen::<f64>();
            let r = u.powf(1.0 / (2.0 * n as f64));
            return g.iter().map(|v| v * (r / norm)).collect();
        }
    }
}

/// Volume of the complex n-ball of radius r (real dimension 2n).
pub fn complex_ball_volume(n: usize, r: f64) -> f64 {
    let mut fact = 1.0;
    for i in 1..=n {
        fact *= i as f64;
    }
    std::f64::consts::PI.powi(n as i32) * r.powi(2 * n as i32) / fact
}

/// One stratum's chunk of the plan: the building block for any consumer
/// that needs bitwise-deterministic parallel reduction over samples.
pub fn sample_stratum(spec: &DomainSpec, plan: &SamplePlan, index: u32) -> Result<WeightedSamples> {
    let count = plan.stratum_count(index);
    let mut rng = plan.stratum_rng(index);
    let mut points = Vec::new();
    match spec {
        DomainSpec::Ball { center, radius } => {
            let n = center.len();
            let w = complex_ball_volume(n, *radius);
            for _ in 0..count {
                let p: Vec<Complex64> = unit_ball_point(&mut rng, n)
                    .iter()
                    .zip(center)
                    .map(|(v, c)| c + v * *radius)
                    .collect();
                points.push((p, w));
            }
        }
        DomainSpec::Polydisc { radii } => {
            let w: f64 = radii.iter().map(|r| std::f64::consts::PI * r * r).product();
            for _ in 0..count {
                let p: Vec<Complex64> = radii
                    .iter()
                    .map(|&r| {
                        let s = r * rng.gen::<f64>().sqrt();
                        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                        Complex64::from_polar(s, theta)
                    })
                    .collect();
                points.push((p, w));
            }
        }
        DomainSpec::Egg { kappa } => {
            // z from the complex Gaussian with density (kappa/pi) e^{-kappa|z|^2},
            // w uniform in the fiber disc of radius e^{-kappa|z|^2/2}. The joint
            // density is the constant kappa/pi^2, so the weight is pi^2/kappa.
            let sigma = (0.5 / kappa).sqrt();
            let w = std::f64::consts::PI.powi(2) / kappa;
            for _ in 0..count {
                let z = Complex64::new(
                    sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
                );
                let rad = (-kappa * z.norm_sqr() / 2.0).exp();
                let s = rad * rng.gen::<f64>().sqrt();
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                points.push((vec![z, Complex64::from_polar(s, theta)], w));
            }
        }
        DomainSpec::Truncated { inner, radius } => {
            let n = spec.dimension();
            let w = complex_ball_volume(n, *radius);
            for _ in 0..count {
                let p: Vec<Complex64> = unit_ball_point(&mut rng, n)
                    .iter()
                    .map(|v| v * *radius)
                    .collect();
                if inner.contains(&p) {
                    points.push((p, w));
                }
            }
        }
        _ => return Err(Error::NoSamplingPlan),
    }
    Ok(WeightedSamples {
        points,
        proposals: count,
        seed: plan.seed,
    })
}

/// Draw a seeded weighted sample of a finite-volume catalog domain.
/// Unbounded graph domains have no plan; truncate first.
pub fn sample_domain(spec: &DomainSpec, plan: &SamplePlan) -> Result<WeightedSamples> {
    let chunks: Vec<Result<WeightedSamples>> = (0..plan.strata)
        .into_par_iter()
        .map(|i| sample_stratum(spec, plan, i))
        .collect();
    let mut points = Vec::new();
    let mut proposals = 0;
    for chunk in chunks {
        let chunk = chunk?;
        points.extend(chunk.points);
        proposals += chunk.proposals;
    }
    Ok(WeightedSamples {
        points,
        proposals,
        seed: plan.seed,
    })
}

struct StratumSums {
    sum: Complex64,
    sum_sq_re: f64,
    sum_sq_im: f64,
    proposals: u64,
}

/// Weighted Monte Carlo integral of a complex-valued integrand over a
/// finite-volume catalog domain, with standard error. NaN or infinite
/// integrand values abort with the offending point.
pub fn integrate<F>(spec: &DomainSpec, f: F, plan: &SamplePlan) -> Result<IntegralEstimate>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let partials: Vec<Result<StratumSums>> = (0..plan.strata)
        .into_par_iter()
        .map(|i| {
            let chunk = sample_stratum(spec, plan, i)?;
            let mut sums = StratumSums {
                sum: Complex64::default(),
                sum_sq_re: 0.0,
                sum_sq_im: 0.0,
                proposals: chunk.proposals,
            };
            for (p, w) in &chunk.points {
                let v = f(p) * *w;
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::Evaluation {
                        point: format!("{p:?}"),
                        reason: "non-finite integrand".into(),
                    });
                }
                sums.sum += v;
                sums.sum_sq_re += v.re * v.re;
                sums.sum_sq_im += v.im * v.im;
            }
            Ok(sums)
        })
        .collect();

    let mut sum = Complex64::default();
    let mut sq_re = 0.0;
    let mut sq_im = 0.0;
    let mut n = 0u64;
    for p in partials {
        let p = p?;
        sum += p.sum;
        sq_re += p.sum_sq_re;
        sq_im += p.sum_sq_im;
        n += p.proposals;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var_re = (sq_re / nf - mean.re * mean.re).max(0.0);
    let var_im = (sq_im / nf - mean.im * mean.im).max(0.0);
    let std_error = ((var_re + var_im) / nf).sqrt();
    Ok(IntegralEstimate {
        re: mean.re,
        im: mean.im,
        std_error,
        samples: n,
        seed: plan.seed,
    })
}

/// Rejection sample of the annulus { r_lo <= |z - center| <= r_hi }
/// intersected with a domain; used by the separation checker.
pub fn sample_annulus(
    spec: &DomainSpec,
    center: &[Complex64],
    r_lo: f64,
    r_hi: f64,
    count: usize,
    seed: u64,
) -> Vec<Vec<Complex64>> {
    let n = center.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < count * 1000 {
        attempts += 1;
        let u = unit_ball_point(&mut rng, n);
        let p: Vec<Complex64> = u.iter().zip(center).map(|(v, c)| c + v * r_hi).collect();
        let d: f64 = p
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if d >= r_lo && spec.contains(&p) {
            out.push(p);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// exact fiber integrals
// ---------------------------------------------------------------------------

/// Exact monomial norm on the egg domain { |w|^2 < exp(-kappa |z|^2) }:
///
///   integral |z|^{2a} |w|^{2b} = pi^2 a! / (kappa^{a+1} (b+1)^{a+2}).
///
/// Two-step polar evaluation: the fiber disc of radius e^{-kappa|z|^2/2}
/// contributes pi e^{-kappa(b+1)|z|^2}/(b+1), and the outer Gaussian
/// moment is pi a!/(kappa(b+1))^{a+1}.
pub fn egg_monomial_integral(kappa: f64, a: u32, b: u32) -> f64 {
    let mut fact = 1.0f64;
    for i in 1..=a {
        fact *= f64::from(i);
    }
    let bp = f64::from(b + 1);
    std::f64::consts::PI.powi(2) * fact / (kappa.powi(a as i32 + 1) * bp.powi(a as i32 + 2))
}

/// Exact monomial norm on the complex n-ball of radius r:
/// integral |z^alpha|^2 = pi^n alpha! / (|alpha| + n)! * r^{2|alpha| + 2n}.
pub fn ball_monomial_norm(n: usize, r: f64, alpha: &[u32]) -> f64 {
    assert_eq!(alpha.len(), n);
    let total: u32 = alpha.iter().sum();
    let mut v = std::f64::consts::PI.powi(n as i32);
    for &a in alpha {
        for i in 1..=a {
            v *= f64::from(i);
        }
    }
    for i in 1..=(total as usize + n) {
        v /= i as f64;
    }
    v * r.powi(2 * (total as i32 + n as i32))
}

/// Exact monomial norm on a polydisc:
/// integral |z^alpha|^2 = prod_j pi r_j^{2 a_j + 2} / (a_j + 1).
pub fn polydisc_monomial_norm(radii: &[f64], alpha: &[u32]) -> f64 {
    assert_eq!(alpha.len(), radii.len());
    radii
        .iter()
        .zip(alpha)
        .map(|(&r, &a)| std::f64::consts::PI * r.powi(2 * a as i32 + 2) / f64::from(a + 1))
        .product()
}

/// Largest admissible basis degree for Monte Carlo Gram assembly on the
/// egg: the per-sample relative variance of the worst Gram-entry
/// integrand under the matched Gaussian sampler must stay below 1e12
/// (so that sane sample counts keep the well-conditioned block accurate),
/// and all norms must be representable.
pub fn egg_max_mc_degree(kappa: f64) -> u32 {
    const VAR_CAP: f64 = 1e12;
    let vol = std::f64::consts::PI.powi(2) / kappa;
    let mut admissible = 0;
    'deg: for d in 1..=64u32 {
        for a in 0..=d {
            for b in 0..=(d - a) {
                let n1 = egg_monomial_integral(kappa, a, b);
                let n2 = egg_monomial_integral(kappa, 2 * a, 2 * b);
                if !n1.is_finite() || !n2.is_finite() || n1 < 1e-280 {
                    break 'deg;
                }
                let rel_var = vol * n2 / (n1 * n1);
                if rel_var > VAR_CAP {
                    break 'deg;
                }
            }
        }
        admissible = d;
    }
    admissible
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn determinism_bitwise() {
        let spec = DomainSpec::Egg { kappa: 1.0 };
        let plan = SamplePlan::new(20_000, 42);
        let f = |z: &[Complex64]| Complex64::new(z[0].norm_sqr() * z[1].norm_sqr(), 0.0);
        let a = integrate(&spec, f, &plan).unwrap();
        let b = integrate(&spec, f, &plan).unwrap();
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn strata_partition_preserves_count() {
        let plan = SamplePlan::new(1_000_003, 1).with_strata(64);
        let total: u64 = (0..64).map(|i| plan.stratum_count(i)).sum();
        assert_eq!(total, 1_000_003);
    }

    #[test]
    fn disc_second_moment() {
        // mean of |z|^2 over the unit disc is 1/2
        let spec = DomainSpec::ball(1, 1.0);
        let plan = SamplePlan::new(1_000_000, 7);
        let num = integrate(&spec, |z| Complex64::new(z[0].norm_sqr(), 0.0), &plan).unwrap();
        let mean = num.re / std::f64::consts::PI;
        let sigma = num.std_error / std::f64::consts::PI;
        assert!(
            (mean - 0.5).abs() <= 3.0 * sigma,
            "mean {mean}, sigma {sigma}"
        );
    }

    #[test]
    fn disc_area() {
        let spec = DomainSpec::ball(1, 1.0);
        let plan = SamplePlan::new(100_000, 3);
        let est = integrate(&spec, |_| Complex64::new(1.0, 0.0), &plan).unwrap();
        assert_relative_eq!(est.re, std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn disc_odd_moment_vanishes() {
        let spec = DomainSpec::ball(1, 1.0);
        let plan = SamplePlan::new(200_000, 5);
        let est = integrate(&spec, |z| z[0], &plan).unwrap();
        assert!(est.value().norm() <= 3.0 * est.std_error + 1e-12);
    }

    #[test]
    fn egg_volume() {
        for kappa in [1.0, 2.0] {
            let spec = DomainSpec::Egg { kappa };
            let plan = SamplePlan::new(400_000, 11);
            let est = integrate(&spec, |_| Complex64::new(1.0, 0.0), &plan).unwrap();
            let exact = std::f64::consts::PI.powi(2) / kappa;
            // constant weight: the estimate is exact up to rounding
            assert_relative_eq!(est.re, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn egg_w_moment_matches_closed_form() {
        let spec = DomainSpec::Egg { kappa: 1.0 };
        let plan = SamplePlan::new(1_000_000, 13);
        let est = integrate(&spec, |z| Complex64::new(z[1].norm_sqr(), 0.0), &plan).unwrap();
        let exact = egg_monomial_integral(1.0, 0, 1);
        assert_relative_eq!(exact, std::f64::consts::PI.powi(2) / 4.0, max_relative = 1e-14);
        assert!(
            (est.re - exact).abs() <= 3.0 * est.std_error,
            "est {} exact {} sigma {}",
            est.re,
            exact,
            est.std_error
        );
    }

    #[test]
    fn egg_random_monomials_within_3_sigma() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let kappa = 1.5;
        let spec = DomainSpec::Egg { kappa };
        for trial in 0..10 {
            let a = rng.gen_range(0..5u32);
            let b = rng.gen_range(0..5u32);
            let plan = SamplePlan::new(4_000_000, 1000 + trial);
            let est = integrate(
                &spec,
                |z| Complex64::new(z[0].norm().powi(2 * a as i32) * z[1].norm().powi(2 * b as i32), 0.0),
                &plan,
            )
            .unwrap();
            let exact = egg_monomial_integral(kappa, a, b);
            assert!(
                (est.re - exact).abs() <= 3.0 * est.std_error,
                "({a},{b}): est {} exact {} sigma {}",
                est.re,
                exact,
                est.std_error
            );
        }
    }

    #[test]
    fn weights_positive_and_finite() {
        for spec in [
            DomainSpec::ball(2, 1.0),
            DomainSpec::Polydisc { radii: vec![1.0, 0.5] },
            DomainSpec::Egg { kappa: 2.0 },
            DomainSpec::Truncated {
                inner: Box::new(DomainSpec::KohnNirenberg),
                radius: 3.0,
            },
        ] {
            let samples = sample_domain(&spec, &SamplePlan::new(5_000, 21)).unwrap();
            assert!(!samples.points.is_empty());
            for (p, w) in &samples.points {
                assert!(*w > 0.0 && w.is_finite());
                assert!(spec.contains(p) || spec.defining_value(p).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn unbounded_without_truncation_refused() {
        let plan = SamplePlan::new(100, 1);
        for spec in [
            DomainSpec::KohnNirenberg,
            DomainSpec::ExpGraph,
            DomainSpec::hkn(),
        ] {
            assert!(matches!(
                sample_domain(&spec, &plan),
                Err(Error::NoSamplingPlan)
            ));
        }
    }

    #[test]
    fn standard_error_shrinks_with_n() {
        let spec = DomainSpec::Egg { kappa: 1.0 };
        let f = |z: &[Complex64]| Complex64::new(z[0].norm_sqr() + z[1].norm_sqr(), 0.0);
        let mut prev = f64::INFINITY;
        for (i, n) in [10_000u64, 100_000, 1_000_000].into_iter().enumerate() {
            let est = integrate(&spec, f, &SamplePlan::new(n, 70 + i as u64)).unwrap();
            assert!(
                est.std_error < prev * 0.6,
                "n={n}: se {} vs prev {prev}",
                est.std_error
            );
            prev = est.std_error;
        }
    }

    #[test]
    fn ball_norm_closed_forms() {
        // n=1: pi/(a+1)
        assert_relative_eq!(
            ball_monomial_norm(1, 1.0, &[3]),
            std::f64::consts::PI / 4.0,
            max_relative = 1e-14
        );
        // n=2 volume: pi^2/2
        assert_relative_eq!(
            ball_monomial_norm(2, 1.0, &[0, 0]),
            std::f64::consts::PI.powi(2) / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn ball_norm_against_mc() {
        let spec = DomainSpec::ball(2, 1.0);
        let plan = SamplePlan::new(400_000, 31);
        let est = integrate(
            &spec,
            |z| Complex64::new(z[0].norm_sqr() * z[1].norm().powi(4), 0.0),
            &plan,
        )
        .unwrap();
        let exact = ball_monomial_norm(2, 1.0, &[1, 2]);
        assert!((est.re - exact).abs() <= 3.5 * est.std_error);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let spec = DomainSpec::ball(1, 1.0);
        let plan = SamplePlan::new(1000, 1);
        let res = integrate(
            &spec,
            |z| Complex64::new(1.0 / (z[0].re - z[0].re), 0.0),
            &plan,
        );
        assert!(matches!(res, Err(Error::Evaluation { .. })));
    }

    #[test]
    fn egg_mc_degree_bound_admits_twelve() {
        let d1 = egg_max_mc_degree(1.0);
        let d2 = egg_max_mc_degree(2.0);
        assert!(d1 >= 12, "kappa=1 bound {d1}");
        assert!(d2 >= 12, "kappa=2 bound {d2}");
        assert!(d1 < 64);
    }
}
