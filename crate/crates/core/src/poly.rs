//! Hermitian-symmetric polynomials on C^k and weight signatures.
//!
//! A real-valued polynomial on C^k is stored as a sparse map from bidegree
//! multi-index pairs (alpha, beta) to complex coefficients, with the
//! Hermitian symmetry c_{beta,alpha} = conj(c_{alpha,beta}) enforced at
//! construction. Evaluation is sum of c * z^alpha * conj(z)^beta, which is
//! real up to rounding whenever the symmetry holds.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type MultiIndex = Vec<u32>;

/// Tolerance for the imaginary part of an evaluation, relative to the
/// absolute term sum. Hermitian symmetry makes the true value real.
pub const IMAG_TOL: f64 = 1e-12;

/// Real-valued polynomial on C^k in sparse bidegree form.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPolynomial {
    dimension: usize,
    terms: BTreeMap<(MultiIndex, MultiIndex), Complex64>,
}

impl HermitianPolynomial {
    /// Build from raw terms, symmetrizing: each input (alpha, beta, c)
    /// contributes c/2 at (alpha, beta) and conj(c)/2 at (beta, alpha).
    /// Inputs that already carry both halves reproduce themselves.
    pub fn new<I>(dimension: usize, raw: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, MultiIndex, Complex64)>,
    {
        let mut terms: BTreeMap<(MultiIndex, MultiIndex), Complex64> = BTreeMap::new();
        for (alpha, beta, c) in raw {
            assert_eq!(alpha.len(), dimension, "alpha length must match dimension");
            assert_eq!(beta.len(), dimension, "beta length must match dimension");
            let half = 0.5 * c;
            *terms.entry((alpha.clone(), beta.clone())).or_default() += half;
            *terms.entry((beta, alpha)).or_default() += half.conj();
        }
        terms.retain(|_, c| c.norm() > 0.0);
        Self { dimension, terms }
    }

    /// The zero polynomial on C^k.
    pub fn zero(dimension: usize) -> Self {
        Self {
            dimension,
            terms: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(MultiIndex, MultiIndex), &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, alpha: &[u32], beta: &[u32]) -> Complex64 {
        self.terms
            .get(&(alpha.to_vec(), beta.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    /// Sum of two polynomials on the same C^k.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dimension, other.dimension);
        let mut terms = self.terms.clone();
        for (key, c) in &other.terms {
            *terms.entry(key.clone()).or_default() += c;
        }
        terms.retain(|_, c| c.norm() > 0.0);
        Self {
            dimension: self.dimension,
            terms,
        }
    }

    /// Scale by a real factor (keeps Hermitian symmetry).
    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dimension: self.dimension,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.clone(), c * factor))
                .collect(),
        }
    }

    fn check_dim(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Complex evaluation sum c * z^alpha * conj(z)^beta.
    pub fn eval_complex(&self, z: &[Complex64]) -> Result<Complex64> {
        self.check_dim(z)?;
        let zbar: Vec<Complex64> = z.iter().map(|v| v.conj()).collect();
        let mut acc = Complex64::default();
        for ((alpha, beta), c) in &self.terms {
            acc += c * monomial(z, alpha) * monomial(&zbar, beta);
        }
        Ok(acc)
    }

    /// Real evaluation; the imaginary part is an artifact of rounding and
    /// is checked against `IMAG_TOL` relative to the term magnitude sum.
    pub fn eval(&self, z: &[Complex64]) -> Result<f64> {
        self.check_dim(z)?;
        let zbar: Vec<Complex64> = z.iter().map(|v| v.conj()).collect();
        let mut acc = Complex64::default();
        let mut scale = 1.0f64;
        for ((alpha, beta), c) in &self.terms {
            let t = c * monomial(z, alpha) * monomial(&zbar, beta);
            acc += t;
            scale = scale.max(t.norm());
        }
        debug_assert!(
            acc.im.abs() <= IMAG_TOL * scale.max(1.0),
            "imaginary residue {} exceeds tolerance at {:?}",
            acc.im,
            z
        );
        Ok(acc.re)
    }

    /// Exact mixed Wirtinger derivative d^{|a|+|b|} / dz^a dzbar^b by
    /// term-wise exponent shifting, evaluated at z.
    pub fn wirtinger_derivative(&self, a: &[u32], b: &[u32], z: &[Complex64]) -> Result<Complex64> {
        self.check_dim(z)?;
        assert_eq!(a.len(), self.dimension);
        assert_eq!(b.len(), self.dimension);
        let zbar: Vec<Complex64> = z.iter().map(|v| v.conj()).collect();
        let mut acc = Complex64::default();
        'term: for ((alpha, beta), c) in &self.terms {
            let mut factor = 1.0f64;
            let mut sa = Vec::with_capacity(self.dimension);
            let mut sb = Vec::with_capacity(self.dimension);
            for j in 0..self.dimension {
                if alpha[j] < a[j] || beta[j] < b[j] {
                    continue 'term;
                }
                factor *= falling(alpha[j], a[j]) * falling(beta[j], b[j]);
                sa.push(alpha[j] - a[j]);
                sb.push(beta[j] - b[j]);
            }
            acc += c * factor * monomial(z, &sa) * monomial(&zbar, &sb);
        }
        Ok(acc)
    }

    /// Terms with alpha = 0 or beta = 0: pure (anti)holomorphic monomials.
    /// A nonempty result means the polynomial has pluriharmonic terms.
    pub fn pluriharmonic_terms(&self) -> Vec<(MultiIndex, MultiIndex)> {
        self.terms
            .keys()
            .filter(|(alpha, beta)| {
                let azero = alpha.iter().all(|&e| e == 0);
                let bzero = beta.iter().all(|&e| e == 0);
                // the constant term (0,0) is harmless for convexity checks
                // but is still flagged: it is pluriharmonic
                azero || bzero
            })
            .cloned()
            .collect()
    }

    /// Substitute z_j -> z_j^{mu_j} term-wise: the term (alpha, beta) maps
    /// to (mu*alpha, mu*beta) componentwise with the same coefficient.
    pub fn substitute_powers(&self, mu: &[u64]) -> Self {
        assert_eq!(mu.len(), self.dimension);
        let terms = self
            .terms
            .iter()
            .map(|((alpha, beta), c)| {
                let a: MultiIndex = alpha
                    .iter()
                    .zip(mu)
                    .map(|(&e, &m)| e * u32::try_from(m).expect("weight exponent fits u32"))
                    .collect();
                let b: MultiIndex = beta
                    .iter()
                    .zip(mu)
                    .map(|(&e, &m)| e * u32::try_from(m).expect("weight exponent fits u32"))
                    .collect();
                ((a, b), *c)
            })
            .collect();
        Self {
            dimension: self.dimension,
            terms,
        }
    }

    /// Largest total bidegree |alpha| + |beta| over stored terms.
    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|(a, b)| a.iter().sum::<u32>() + b.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }
}

fn monomial(z: &[Complex64], exps: &[u32]) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for (v, &e) in z.iter().zip(exps) {
        acc *= v.powu(e);
    }
    acc
}

fn falling(n: u32, k: u32) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= f64::from(n - i);
    }
    acc
}

/// Serialized term form used by the domain-spec JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl HermitianPolynomial {
    pub fn from_json_terms(dimension: usize, terms: &[TermJson]) -> Result<Self> {
        for t in terms {
            if t.alpha.len() != dimension || t.beta.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: t.alpha.len().max(t.beta.len()),
                });
            }
        }
        Ok(Self::new(
            dimension,
            terms
                .iter()
                .map(|t| (t.alpha.clone(), t.beta.clone(), Complex64::new(t.re, t.im))),
        ))
    }

    pub fn to_json_terms(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|((a, b), c)| TermJson {
                alpha: a.clone(),
                beta: b.clone(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }
}

/// Positive integer weights (m_1, ..., m_{n-1}) of a weighted-homogeneous
/// polynomial, with the derived covering exponents mu_j = (prod m_k) / m_j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSignature {
    weights: Vec<u32>,
}

impl WeightSignature {
    pub fn new(weights: Vec<u32>) -> Result<Self> {
        if weights.iter().any(|&m| m == 0) {
            return Err(Error::InvalidDomain("weights must be >= 1".into()));
        }
        let prod: u64 = weights.iter().map(|&m| u64::from(m)).product();
        if prod > u64::from(u32::MAX) {
            return Err(Error::InvalidDomain("weight product overflows".into()));
        }
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    /// k = prod m_j; the homogenized polynomial has degree 2k.
    pub fn degree_k(&self) -> u64 {
        self.weights.iter().map(|&m| u64::from(m)).product()
    }

    /// Covering exponents mu_j = k / m_j. Note mu_j * m_j = k for all j.
    pub fn mu(&self) -> Vec<u64> {
        let k = self.degree_k();
        self.weights.iter().map(|&m| k / u64::from(m)).collect()
    }
}

/// Report of the exact weighted-homogeneity check plus a numerical
/// scaling spot-check.
#[derive(Debug, Clone, Serialize)]
pub struct HomogeneityReport {
    pub ok: bool,
    pub offending_terms: Vec<(MultiIndex, MultiIndex)>,
    /// worst relative residual of P(t^{1/2m} z) = t P(z) over the samples
    pub spot_check_max_rel: f64,
}

/// Decide weighted homogeneity exactly: every nonzero term must satisfy
/// sum_j (alpha_j + beta_j) * mu_j = 2k in integer arithmetic, which is
/// the common-denominator form of sum_j (alpha_j + beta_j)/(2 m_j) = 1.
/// A scaling spot-check at sampled (t, z) guards the arithmetic.
pub fn check_weighted_homogeneity(
    poly: &HermitianPolynomial,
    weights: &WeightSignature,
) -> Result<HomogeneityReport> {
    if poly.dimension() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: poly.dimension(),
        });
    }
    let mu = weights.mu();
    let two_k = 2 * weights.degree_k();
    let mut offending = Vec::new();
    for ((alpha, beta), _) in poly.terms() {
        let s: u64 = alpha
            .iter()
            .zip(beta)
            .zip(&mu)
            .map(|((&a, &b), &m)| (u64::from(a) + u64::from(b)) * m)
            .sum();
        if s != two_k {
            offending.push((alpha.clone(), beta.clone()));
        }
    }
    let exact_ok = offending.is_empty();

    // numerical spot-check: P(t^{1/2m_j} z_j) vs t P(z)
    let mut max_rel = 0.0f64;
    if exact_ok && !weights.is_empty() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x9e37_79b9);
        for _ in 0..32 {
            let t: f64 = rng.gen_range(0.1..4.0);
            let z: Vec<Complex64> = (0..weights.len())
                .map(|_| Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
                .collect();
            let scaled: Vec<Complex64> = z
                .iter()
                .zip(weights.weights())
                .map(|(v, &m)| v * t.powf(1.0 / f64::from(2 * m)))
                .collect();
            let lhs = poly.eval(&scaled)?;
            let rhs = t * poly.eval(&z)?;
            let denom = rhs.abs().max(1e-30);
            max_rel = max_rel.max((lhs - rhs).abs() / denom);
        }
    }
    let ok = exact_ok && max_rel < 1e-9;
    Ok(HomogeneityReport {
        ok,
        offending_terms: offending,
        spot_check_max_rel: max_rel,
    })
}

/// H(z_1, ..., z_{n-1}) := P(z_1^{mu_1}, ...): homogeneous of degree 2k.
/// Fails if P is not weighted-homogeneous for the given weights.
pub fn homogenize(
    poly: &HermitianPolynomial,
    weights: &WeightSignature,
) -> Result<HermitianPolynomial> {
    let report = check_weighted_homogeneity(poly, weights)?;
    if !report.ok {
        return Err(Error::NotWeightedHomogeneous);
    }
    let h = poly.substitute_powers(&weights.mu());
    let two_k = u32::try_from(2 * weights.degree_k()).expect("degree fits u32");
    debug_assert!(h
        .terms()
        .all(|((a, b), _)| a.iter().sum::<u32>() + b.iter().sum::<u32>() == two_k));
    Ok(h)
}

// ---------------------------------------------------------------------------
// catalog polynomials
// ---------------------------------------------------------------------------

/// |z|^8 + (15/7) |z|^2 Re z^6 on C: the graph part of the homogeneous
/// Kohn-Nirenberg domain. Terms (4,4), (7,1), (1,7).
pub fn hkn_polynomial() -> HermitianPolynomial {
    let c = 15.0 / 14.0;
    HermitianPolynomial::new(
        1,
        [
            (vec![4], vec![4], Complex64::new(1.0, 0.0)),
            (vec![7], vec![1], Complex64::new(c, 0.0)),
            (vec![1], vec![7], Complex64::new(c, 0.0)),
        ],
    )
}

/// |z|^6 + t |z|^2 Re z^4 on C: the graph part of the homogeneous
/// Fornaess domain, 1 < t < 9/5.
pub fn fornaess_polynomial(t: f64) -> HermitianPolynomial {
    HermitianPolynomial::new(
        1,
        [
            (vec![3], vec![3], Complex64::new(1.0, 0.0)),
            (vec![5], vec![1], Complex64::new(t / 2.0, 0.0)),
            (vec![1], vec![5], Complex64::new(t / 2.0, 0.0)),
        ],
    )
}

/// Full Kohn-Nirenberg defining polynomial on C^2 (coordinates (z, w)):
/// Re w + |zw|^2 + |z|^8 + (15/7) |z|^2 Re z^6.
pub fn kn_defining_polynomial() -> HermitianPolynomial {
    let c = 15.0 / 14.0;
    HermitianPolynomial::new(
        2,
        [
            (vec![0, 1], vec![0, 0], Complex64::new(0.5, 0.0)),
            (vec![0, 0], vec![0, 1], Complex64::new(0.5, 0.0)),
            (vec![1, 1], vec![1, 1], Complex64::new(1.0, 0.0)),
            (vec![4, 0], vec![4, 0], Complex64::new(1.0, 0.0)),
            (vec![7, 0], vec![1, 0], Complex64::new(c, 0.0)),
            (vec![1, 0], vec![7, 0], Complex64::new(c, 0.0)),
        ],
    )
}

/// Full Fornaess defining polynomial on C^2:
/// Re w + |zw|^2 + |z|^6 + t |z|^2 Re z^4.
pub fn fornaess_defining_polynomial(t: f64) -> HermitianPolynomial {
    HermitianPolynomial::new(
        2,
        [
            (vec![0, 1], vec![0, 0], Complex64::new(0.5, 0.0)),
            (vec![0, 0], vec![0, 1], Complex64::new(0.5, 0.0)),
            (vec![1, 1], vec![1, 1], Complex64::new(1.0, 0.0)),
            (vec![3, 0], vec![3, 0], Complex64::new(1.0, 0.0)),
            (vec![5, 0], vec![1, 0], Complex64::new(t / 2.0, 0.0)),
            (vec![1, 0], vec![5, 0], Complex64::new(t / 2.0, 0.0)),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn symmetrization_forces_real_values() {
        // Re z^2 entered as a one-sided term
        let p = HermitianPolynomial::new(1, [(vec![2], vec![0], c(2.0, 0.0))]);
        let z = [c(0.7, -0.3)];
        let v = p.eval(&z).unwrap();
        let expect = (z[0] * z[0]).re * 2.0 * 0.5 * 2.0; // c/2 on each side sums to Re
        assert_relative_eq!(v, expect, max_relative = 1e-14);
        assert_eq!(p.num_terms(), 2);
    }

    #[test]
    fn hkn_matches_direct_formula() {
        let p = hkn_polynomial();
        let z = [c(0.8, 0.45)];
        let direct = z[0].norm().powi(8)
            + (15.0 / 7.0) * z[0].norm_sqr() * (z[0].powu(6)).re;
        assert_relative_eq!(p.eval(&z).unwrap(), direct, max_relative = 1e-13);
    }

    #[test]
    fn hkn_weighted_homogeneous_weight_4() {
        let w = WeightSignature::new(vec![4]).unwrap();
        let report = check_weighted_homogeneity(&hkn_polynomial(), &w).unwrap();
        assert!(report.ok, "offending: {:?}", report.offending_terms);
        assert!(report.spot_check_max_rel < 1e-9);
    }

    #[test]
    fn diagonal_type_weighted_homogeneous() {
        // |z1|^2 + |z2|^4 with m = (1, 2)
        let p = HermitianPolynomial::new(
            2,
            [
                (vec![1, 0], vec![1, 0], c(1.0, 0.0)),
                (vec![0, 2], vec![0, 2], c(1.0, 0.0)),
            ],
        );
        let w = WeightSignature::new(vec![1, 2]).unwrap();
        assert!(check_weighted_homogeneity(&p, &w).unwrap().ok);
    }

    #[test]
    fn mixed_degrees_fail_homogeneity() {
        // |z|^2 + |z|^4 with m = (1): offending term (2,2)
        let p = HermitianPolynomial::new(
            1,
            [
                (vec![1], vec![1], c(1.0, 0.0)),
                (vec![2], vec![2], c(1.0, 0.0)),
            ],
        );
        let w = WeightSignature::new(vec![1]).unwrap();
        let report = check_weighted_homogeneity(&p, &w).unwrap();
        assert!(!report.ok);
        assert_eq!(report.offending_terms, vec![(vec![2], vec![2])]);
    }

    #[test]
    fn pluriharmonic_detection() {
        assert!(hkn_polynomial().pluriharmonic_terms().is_empty());
        let re_z2 = HermitianPolynomial::new(1, [(vec![2], vec![0], c(1.0, 0.0))]);
        assert_eq!(re_z2.pluriharmonic_terms().len(), 2);
        let abs2 = HermitianPolynomial::new(1, [(vec![1], vec![1], c(1.0, 0.0))]);
        assert!(abs2.pluriharmonic_terms().is_empty());
    }

    #[test]
    fn homogenize_diagonal_example() {
        // P = |z1|^2 + |z2|^4, m = (1,2): mu = (2,1), H = |z1|^4 + |z2|^4
        let p = HermitianPolynomial::new(
            2,
            [
                (vec![1, 0], vec![1, 0], c(1.0, 0.0)),
                (vec![0, 2], vec![0, 2], c(1.0, 0.0)),
            ],
        );
        let w = WeightSignature::new(vec![1, 2]).unwrap();
        assert_eq!(w.mu(), vec![2, 1]);
        let h = homogenize(&p, &w).unwrap();
        assert_eq!(h.coefficient(&[2, 0], &[2, 0]), c(1.0, 0.0));
        assert_eq!(h.coefficient(&[0, 2], &[0, 2]), c(1.0, 0.0));
        assert_eq!(h.total_degree(), 4);
    }

    #[test]
    fn homogenize_is_power_substitution() {
        use rand::prelude::*;
        let p = HermitianPolynomial::new(
            2,
            [
                (vec![1, 0], vec![1, 0], c(1.0, 0.0)),
                (vec![0, 2], vec![0, 2], c(0.5, 0.0)),
                (vec![1, 1], vec![1, 0], c(0.25, 0.0)), // weight-(1,2): (1+1)/2+(1+0)/4... not hom
            ],
        );
        // restrict to the homogeneous part for this identity test
        let p = HermitianPolynomial::new(
            2,
            p.terms()
                .filter(|((a, b), _)| {
                    (u64::from(a[0]) + u64::from(b[0])) * 2 + (u64::from(a[1]) + u64::from(b[1]))
                        == 4
                })
                .map(|((a, b), coef)| (a.clone(), b.clone(), *coef))
                .collect::<Vec<_>>(),
        );
        let w = WeightSignature::new(vec![1, 2]).unwrap();
        let h = homogenize(&p, &w).unwrap();
        let mu = w.mu();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let z: Vec<Complex64> = (0..2)
                .map(|_| c(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)))
                .collect();
            let pw: Vec<Complex64> = z
                .iter()
                .zip(&mu)
                .map(|(v, &m)| v.powu(u32::try_from(m).unwrap()))
                .collect();
            let lhs = h.eval(&z).unwrap();
            let rhs = p.eval(&pw).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn wirtinger_of_abs2_is_one() {
        let p = HermitianPolynomial::new(1, [(vec![1], vec![1], c(1.0, 0.0))]);
        let d = p
            .wirtinger_derivative(&[1], &[1], &[c(0.3, 0.8)])
            .unwrap();
        assert_relative_eq!(d.re, 1.0, max_relative = 1e-14);
        assert_relative_eq!(d.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn wirtinger_of_abs4() {
        // |z|^4 = z^2 zbar^2: d2/dz dzbar = 4 |z|^2
        let p = HermitianPolynomial::new(1, [(vec![2], vec![2], c(1.0, 0.0))]);
        let z = c(0.6, -0.2);
        let d = p.wirtinger_derivative(&[1], &[1], &[z]).unwrap();
        assert_relative_eq!(d.re, 4.0 * z.norm_sqr(), max_relative = 1e-13);
    }

    #[test]
    fn wirtinger_of_pluriharmonic_mixed_vanishes() {
        let p = HermitianPolynomial::new(1, [(vec![2], vec![0], c(1.0, 0.0))]);
        let d = p.wirtinger_derivative(&[1], &[1], &[c(1.1, 0.4)]).unwrap();
        assert_eq!(d, Complex64::default());
    }
}
