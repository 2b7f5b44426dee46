//! Bergman kernels and metrics: closed-form models for the ball, polydisc
//! and egg, numeric engines built from monomial Gram matrices, the metric
//! tensor b_{ab} = d^2 log K / dz_a dzbar_b, and the extremal quantities
//! B0 and B1 with their identity cross-check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus;
use crate::domains::{DomainSpec, DomainSpecJson};
use crate::error::{Error, Result};
use crate::quadrature::{
    self, ball_monomial_norm, egg_max_mc_degree, egg_monomial_integral, polydisc_monomial_norm,
    SamplePlan,
};

const PI: f64 = std::f64::consts::PI;

// ---------------------------------------------------------------------------
// closed-form kernels
// ---------------------------------------------------------------------------

/// Models with a closed-form kernel.
#[derive(Debug, Clone)]
pub enum ClosedFormModel {
    Ball { center: Vec<Complex64>, radius: f64 },
    Polydisc { radii: Vec<f64> },
    Egg { kappa: f64 },
}

impl ClosedFormModel {
    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        match spec {
            DomainSpec::Ball { center, radius } => Ok(ClosedFormModel::Ball {
                center: center.clone(),
                radius: *radius,
            }),
            DomainSpec::Polydisc { radii } => Ok(ClosedFormModel::Polydisc {
                radii: radii.clone(),
            }),
            DomainSpec::Egg { kappa } => Ok(ClosedFormModel::Egg { kappa: *kappa }),
            other => Err(Error::InvalidDomain(format!(
                "no closed-form kernel for {}",
                other.tag()
            ))),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ClosedFormModel::Ball { center, .. } => center.len(),
            ClosedFormModel::Polydisc { radii } => radii.len(),
            ClosedFormModel::Egg { .. } => 2,
        }
    }

    /// K(z, w), holomorphic in z and anti-holomorphic in w.
    pub fn kernel(&self, z: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
        match self {
            ClosedFormModel::Ball { center, radius } => {
                let n = center.len();
                let r2 = radius * radius;
                let pairing: Complex64 = z
                    .iter()
                    .zip(w)
                    .zip(center)
                    .map(|((a, b), c)| (a - c) * (b - c).conj())
                    .sum();
                let denom = r2 - pairing;
                if denom.norm() < 1e-14 * r2 {
                    return Err(Error::KernelPole {
                        z: format!("{z:?}"),
                        w: format!("{w:?}"),
                    });
                }
                let mut fact = 1.0;
                for i in 1..=n {
                    fact *= i as f64;
                }
                let num = fact * r2.powi(n as i32) / PI.powi(n as i32);
                Ok(num / denom.powu(n as u32 + 1))
            }
            ClosedFormModel::Polydisc { radii } => {
                let mut k = Complex64::new(1.0, 0.0);
                for ((a, b), &r) in z.iter().zip(w).zip(radii) {
                    let r2 = r * r;
                    let denom = r2 - a * b.conj();
                    if denom.norm() < 1e-14 * r2 {
                        return Err(Error::KernelPole {
                            z: format!("{z:?}"),
                            w: format!("{w:?}"),
                        });
                    }
                    k *= r2 / (PI * denom * denom);
                }
                Ok(k)
            }
            ClosedFormModel::Egg { kappa } => {
                // Series over the diagonal monomial norms
                //   N(a,b) = pi^2 a! / (kappa^{a+1} (b+1)^{a+2})
                // sums, via sum_b (b+1)^2 u^b = (1+u)/(1-u)^3, to
                //   K = kappa e^{kappa s} (1 + u) / (pi^2 (1 - u)^3),
                // s = z1 conj(w1), u = z2 conj(w2) e^{kappa s}.
                let s = z[0] * w[0].conj();
                let e = (kappa * s).exp();
                let u = z[1] * w[1].conj() * e;
                let denom = Complex64::new(1.0, 0.0) - u;
                if denom.norm() < 1e-14 {
                    return Err(Error::KernelPole {
                        z: format!("{z:?}"),
                        w: format!("{w:?}"),
                    });
                }
                Ok(kappa * e * (Complex64::new(1.0, 0.0) + u) / (PI * PI * denom.powu(3)))
            }
        }
    }

    /// Analytic Bergman form (hand-differentiated log K on the diagonal).
    pub fn bergman_matrix(&self, zeta: &[Complex64]) -> Result<DMatrix<Complex64>> {
        match self {
            ClosedFormModel::Ball { center, radius } => {
                let n = center.len();
                let d: Vec<Complex64> = zeta.iter().zip(center).map(|(a, c)| a - c).collect();
                let rem = radius * radius - d.iter().map(|v| v.norm_sqr()).sum::<f64>();
                if rem <= 0.0 {
                    return Err(Error::KernelNotPositive { value: rem });
                }
                let np1 = (n + 1) as f64;
                let mut m = DMatrix::zeros(n, n);
                for a in 0..n {
                    for b in 0..n {
                        let mut v = d[a].conj() * d[b] / (rem * rem);
                        if a == b {
                            v += Complex64::new(1.0 / rem, 0.0);
                        }
                        m[(a, b)] = np1 * v;
                    }
                }
                Ok(m)
            }
            ClosedFormModel::Polydisc { radii } => {
                let n = radii.len();
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    let r2 = radii[j] * radii[j];
                    let rem = r2 - zeta[j].norm_sqr();
                    if rem <= 0.0 {
                        return Err(Error::KernelNotPositive { value: rem });
                    }
                    m[(j, j)] = Complex64::new(2.0 * r2 / (rem * rem), 0.0);
                }
                Ok(m)
            }
            ClosedFormModel::Egg { kappa } => {
                // log K = kappa|z1|^2 + g(u) + const with u = |z2|^2 e^{kappa|z1|^2},
                // g(u) = log(1+u) - 3log(1-u). With W = g'(u) + u g''(u):
                //   b11 = kappa (1 + u g'(u)) + kappa^2 |z1|^2 u W
                //   b22 = e^{kappa|z1|^2} W
                //   b12 = kappa conj(z1) z2 e^{kappa|z1|^2} W
                // The Schur complement b11 - |b12|^2/b22 collapses to
                // kappa (1 + u g'(u)) >= kappa.
                let s = zeta[0].norm_sqr();
                let es = (kappa * s).exp();
                let u = zeta[1].norm_sqr() * es;
                if u >= 1.0 {
                    return Err(Error::KernelNotPositive { value: 1.0 - u });
                }
                let gp = 1.0 / (1.0 + u) + 3.0 / (1.0 - u);
                let gpp = -1.0 / ((1.0 + u) * (1.0 + u)) + 3.0 / ((1.0 - u) * (1.0 - u));
                let w_factor = gp + u * gpp;
                let mut m = DMatrix::zeros(2, 2);
                m[(0, 0)] = Complex64::new(
                    kappa * (1.0 + u * gp) + kappa * kappa * s * u * w_factor,
                    0.0,
                );
                m[(1, 1)] = Complex64::new(es * w_factor, 0.0);
                let b12 = kappa * zeta[0].conj() * zeta[1] * es * w_factor;
                m[(0, 1)] = b12;
                m[(1, 0)] = b12.conj();
                Ok(m)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// numeric engines
// ---------------------------------------------------------------------------

/// All multi-indices of total degree <= max_degree in graded
/// lexicographic order.
pub fn monomial_basis(n: usize, max_degree: u32) -> Vec<Vec<u32>> {
    fn extend(prefix: &mut Vec<u32>, left: u32, slots: usize, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            extend(prefix, left - e, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut prefix = Vec::with_capacity(n);
        extend(&mut prefix, d, n, &mut out);
    }
    out
}

fn monomial_row(basis: &[Vec<u32>], z: &[Complex64]) -> Vec<Complex64> {
    basis
        .iter()
        .map(|alpha| {
            let mut v = Complex64::new(1.0, 0.0);
            for (p, &e) in z.iter().zip(alpha) {
                v *= p.powu(e);
            }
            v
        })
        .collect()
}

/// Directional derivative sum_a v_a d(z^alpha)/dz_a of each basis monomial.
fn monomial_deriv_row(basis: &[Vec<u32>], z: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    basis
        .iter()
        .map(|alpha| {
            let mut acc = Complex64::default();
            for a in 0..z.len() {
                if alpha[a] == 0 {
                    continue;
                }
                let mut term = v[a] * f64::from(alpha[a]);
                for (j, (p, &e)) in z.iter().zip(alpha).enumerate() {
                    let ee = if j == a { e - 1 } else { e };
                    term *= p.powu(ee);
                }
                acc += term;
            }
            acc
        })
        .collect()
}

/// How the Gram matrix is assembled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GramPlan {
    /// closed-form diagonal norms (rotation-invariant models only)
    Exact,
    /// seeded Monte Carlo outer-product accumulation
    MonteCarlo { count: u64, seed: u64, strata: u32 },
}

impl GramPlan {
    pub fn mc(count: u64, seed: u64) -> Self {
        GramPlan::MonteCarlo {
            count,
            seed,
            strata: 64,
        }
    }
}

/// Finite monomial section of the Bergman space: basis, Gram factor and
/// conditioning record. Immutable after construction.
#[derive(Debug, Clone)]
pub struct NumericEngine {
    pub spec: DomainSpec,
    pub degree: u32,
    pub basis: Vec<Vec<u32>>,
    /// diagonal pre-scaling d_j = sqrt(G_jj)
    equilibration: Vec<f64>,
    /// lower Cholesky factor of the equilibrated Gram
    factor: DMatrix<Complex64>,
    pub condition_estimate: f64,
    pub plan: GramPlan,
}

fn complex_cholesky(g: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = g.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut diag = g[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let pivot = diag.sqrt();
        l[(j, j)] = Complex64::new(pivot, 0.0);
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / pivot;
        }
    }
    Some(l)
}

fn forward_substitute(l: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let mut y = vec![Complex64::default(); n];
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

fn exact_diagonal_gram(spec: &DomainSpec, basis: &[Vec<u32>]) -> Result<DMatrix<Complex64>> {
    let n = basis.len();
    let mut g = DMatrix::zeros(n, n);
    for (j, alpha) in basis.iter().enumerate() {
        let norm = match spec {
            DomainSpec::Ball { center, radius } => {
                if center.iter().any(|c| c.norm() > 0.0) {
                    return Err(Error::InvalidDomain(
                        "exact Gram requires a centered ball".into(),
                    ));
                }
                ball_monomial_norm(center.len(), *radius, alpha)
            }
            DomainSpec::Polydisc { radii } => polydisc_monomial_norm(radii, alpha),
            DomainSpec::Egg { kappa } => egg_monomial_integral(*kappa, alpha[0], alpha[1]),
            other => {
                return Err(Error::InvalidDomain(format!(
                    "no exact Gram for {}",
                    other.tag()
                )))
            }
        };
        g[(j, j)] = Complex64::new(norm, 0.0);
    }
    Ok(g)
}

fn monte_carlo_gram(
    spec: &DomainSpec,
    basis: &[Vec<u32>],
    plan: &SamplePlan,
) -> Result<DMatrix<Complex64>> {
    use rayon::prelude::*;
    let n = basis.len();
    let partials: Vec<Result<(DMatrix<Complex64>, u64)>> = (0..plan.strata)
        .into_par_iter()
        .map(|i| {
            let chunk = quadrature::sample_stratum(spec, plan, i)?;
            let mut g = DMatrix::<Complex64>::zeros(n, n);
            for (p, w) in &chunk.points {
                let row = monomial_row(basis, p);
                for a in 0..n {
                    let ra = row[a] * *w;
                    for b in a..n {
                        g[(a, b)] += ra * row[b].conj();
                    }
                }
            }
            Ok((g, chunk.proposals))
        })
        .collect();
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    let mut proposals = 0u64;
    for part in partials {
        let (pg, pp) = part?;
        g += pg;
        proposals += pp;
    }
    let scale = 1.0 / proposals as f64;
    for a in 0..n {
        for b in a..n {
            let v = g[(a, b)] * scale;
            g[(a, b)] = v;
            g[(b, a)] = v.conj();
        }
    }
    Ok(g)
}

impl NumericEngine {
    pub fn build(spec: &DomainSpec, degree: u32, plan: GramPlan) -> Result<Self> {
        match spec {
            DomainSpec::Ball { .. }
            | DomainSpec::Polydisc { .. }
            | DomainSpec::Truncated { .. } => {}
            DomainSpec::Egg { kappa } => {
                if matches!(plan, GramPlan::MonteCarlo { .. }) {
                    let max = egg_max_mc_degree(*kappa);
                    if degree > max {
                        return Err(Error::DegreeBound {
                            degree,
                            max,
                            kappa: *kappa,
                        });
                    }
                }
            }
            other => {
                return Err(Error::InvalidDomain(format!(
                    "no numeric engine strategy for {}",
                    other.tag()
                )))
            }
        }
        let basis = monomial_basis(spec.dimension(), degree);
        let gram = match &plan {
            GramPlan::Exact => exact_diagonal_gram(spec, &basis)?,
            GramPlan::MonteCarlo { count, seed, strata } => monte_carlo_gram(
                spec,
                &basis,
                &SamplePlan {
                    count: *count,
                    seed: *seed,
                    strata: *strata,
                },
            )?,
        };
        Self::from_gram(spec.clone(), degree, basis, gram, plan)
    }

    fn from_gram(
        spec: DomainSpec,
        degree: u32,
        basis: Vec<Vec<u32>>,
        gram: DMatrix<Complex64>,
        plan: GramPlan,
    ) -> Result<Self> {
        let n = basis.len();
        let mut equilibration = Vec::with_capacity(n);
        for j in 0..n {
            let d = gram[(j, j)].re;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularGram { cond: f64::INFINITY });
            }
            equilibration.push(d.sqrt());
        }
        let mut scaled = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                scaled[(a, b)] = gram[(a, b)] / (equilibration[a] * equilibration[b]);
            }
        }
        let (lo, hi) = calculus::hermitian_eigen_range(&scaled);
        let condition_estimate = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        let factor = complex_cholesky(&scaled)
            .ok_or(Error::SingularGram { cond: condition_estimate })?;
        Ok(Self {
            spec,
            degree,
            basis,
            equilibration,
            factor,
            condition_estimate,
            plan,
        })
    }

    /// Orthonormal-frame coordinates u(z) = L^{-1} D^{-1} b(z); the kernel
    /// is K(z, w) = <u(z), u(w)>.
    fn frame(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut row = monomial_row(&self.basis, z);
        for (r, d) in row.iter_mut().zip(&self.equilibration) {
            *r /= *d;
        }
        forward_substitute(&self.factor, &row)
    }

    fn frame_deriv(&self, z: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
        let mut row = monomial_deriv_row(&self.basis, z, v);
        for (r, d) in row.iter_mut().zip(&self.equilibration) {
            *r /= *d;
        }
        forward_substitute(&self.factor, &row)
    }

    pub fn kernel(&self, z: &[Complex64], w: &[Complex64]) -> Complex64 {
        let uz = self.frame(z);
        let uw = self.frame(w);
        let mut acc = Complex64::default();
        for (a, b) in uz.iter().zip(&uw) {
            acc += a * b.conj();
        }
        acc
    }

    pub fn kernel_diagonal(&self, z: &[Complex64]) -> f64 {
        self.frame(z).iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn provenance(&self) -> String {
        format!("numeric_D{}", self.degree)
    }
}

// ---------------------------------------------------------------------------
// the engine wrapper
// ---------------------------------------------------------------------------

/// Evaluator of K(z, w): a closed-form model or a (basis, Gram-factor)
/// pair. Immutable; evaluation is pure.
#[derive(Debug, Clone)]
pub enum KernelEngine {
    ClosedForm(ClosedFormModel),
    Numeric(NumericEngine),
}

impl KernelEngine {
    pub fn closed_form(spec: &DomainSpec) -> Result<Self> {
        Ok(KernelEngine::ClosedForm(ClosedFormModel::from_spec(spec)?))
    }

    pub fn numeric(spec: &DomainSpec, degree: u32, plan: GramPlan) -> Result<Self> {
        Ok(KernelEngine::Numeric(NumericEngine::build(
            spec, degree, plan,
        )?))
    }

    pub fn dimension(&self) -> usize {
        match self {
            KernelEngine::ClosedForm(m) => m.dimension(),
            KernelEngine::Numeric(e) => e.spec.dimension(),
        }
    }

    pub fn kernel(&self, z: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
        match self {
            KernelEngine::ClosedForm(m) => m.kernel(z, w),
            KernelEngine::Numeric(e) => Ok(e.kernel(z, w)),
        }
    }

    pub fn kernel_diagonal(&self, z: &[Complex64]) -> Result<f64> {
        match self {
            KernelEngine::ClosedForm(m) => m.kernel(z, z).map(|k| k.re),
            KernelEngine::Numeric(e) => Ok(e.kernel_diagonal(z)),
        }
    }

    pub fn provenance(&self) -> String {
        match self {
            KernelEngine::ClosedForm(_) => "closed_form".into(),
            KernelEngine::Numeric(e) => e.provenance(),
        }
    }
}

// ---------------------------------------------------------------------------
// Bergman form and quantities
// ---------------------------------------------------------------------------

/// The Hermitian (1,1)-form b_{ab}(zeta) = d^2 log K(z,z) / dz_a dzbar_b.
#[derive(Debug, Clone)]
pub struct BergmanForm {
    pub point: Vec<Complex64>,
    pub matrix: DMatrix<Complex64>,
}

impl BergmanForm {
    /// Quadratic form b(v, v), real for Hermitian b.
    pub fn apply(&self, v: &[Complex64]) -> f64 {
        let n = self.matrix.nrows();
        let mut acc = Complex64::default();
        for a in 0..n {
            for b in 0..n {
                acc += v[a] * self.matrix[(a, b)] * v[b].conj();
            }
        }
        acc.re
    }

    pub fn hermitian_residual(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.matrix[(a, b)] - self.matrix[(b, a)].conj()).norm());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FormMode {
    Analytic,
    FiniteDifference,
}

/// Bergman form at an interior point. Analytic mode is available for the
/// closed-form models; numeric engines use complex-pair central
/// differences of log K(z,z) with step 1e-3 (1 + |zeta|) and Richardson
/// extrapolation, re-evaluating K from the stored factorization.
pub fn bergman_form(engine: &KernelEngine, zeta: &[Complex64], mode: FormMode) -> Result<BergmanForm> {
    let k0 = engine.kernel_diagonal(zeta)?;
    if !(k0 > 0.0) {
        return Err(Error::KernelNotPositive { value: k0 });
    }
    match (engine, mode) {
        (KernelEngine::ClosedForm(m), FormMode::Analytic) => Ok(BergmanForm {
            point: zeta.to_vec(),
            matrix: m.bergman_matrix(zeta)?,
        }),
        _ => {
            let norm: f64 = zeta.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let h = 1e-3 * (1.0 + norm);
            let f = |z: &[Complex64]| {
                engine
                    .kernel_diagonal(z)
                    .ok()
                    .filter(|&k| k > 0.0)
                    .map_or(f64::NAN, f64::ln)
            };
            let levi = calculus::levi_form_fd(f, zeta, Some(h), true)?;
            Ok(BergmanForm {
                point: zeta.to_vec(),
                matrix: levi.matrix,
            })
        }
    }
}

/// B0, B1 and the identity residual. B0(p) = K(p,p); B1 = B0 * b_p(v,v).
/// For numeric engines an independent extremal estimate of B1 solves the
/// constrained maximization of |d_v phi(p)|^2 over the orthonormalized
/// span with phi(p) = 0, which reduces to projecting the derivative frame
/// vector off the evaluation frame vector.
#[derive(Debug, Clone, Serialize)]
pub struct BergmanQuantities {
    pub b0: f64,
    pub form_value: f64,
    pub b1: f64,
    pub extremal_b1: Option<f64>,
    pub identity_residual: Option<f64>,
}

pub fn bergman_quantities(
    engine: &KernelEngine,
    p: &[Complex64],
    v: &[Complex64],
    mode: FormMode,
) -> Result<BergmanQuantities> {
    let b0 = engine.kernel_diagonal(p)?;
    if !(b0 > 0.0) {
        return Err(Error::KernelNotPositive { value: b0 });
    }
    let form = bergman_form(engine, p, mode)?;
    let form_value = form.apply(v);
    let b1 = b0 * form_value;
    let (extremal_b1, identity_residual) = match engine {
        KernelEngine::Numeric(e) => {
            let eval = e.frame(p);
            let deriv = e.frame_deriv(p, v);
            let e2: f64 = eval.iter().map(|x| x.norm_sqr()).sum();
            let d2: f64 = deriv.iter().map(|x| x.norm_sqr()).sum();
            let cross: Complex64 = deriv
                .iter()
                .zip(&eval)
                .map(|(d, ev)| d * ev.conj())
                .sum();
            let ext = d2 - cross.norm_sqr() / e2;
            let resid = (b1 - ext).abs() / b1.abs().max(ext.abs()).max(1e-300);
            (Some(ext), Some(resid))
        }
        KernelEngine::ClosedForm(_) => (None, None),
    };
    Ok(BergmanQuantities {
        b0,
        form_value,
        b1,
        extremal_b1,
        identity_residual,
    })
}

// ---------------------------------------------------------------------------
// engine serialization
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineJson {
    pub version: u32,
    pub spec: DomainSpecJson,
    pub degree: u32,
    pub basis: Vec<Vec<u32>>,
    pub equilibration: Vec<f64>,
    /// lower-triangular Cholesky factor, row-major [re, im] pairs
    pub factor: Vec<[f64; 2]>,
    pub condition_estimate: f64,
    pub plan: GramPlan,
}

pub const ENGINE_FORMAT_VERSION: u32 = 1;

impl NumericEngine {
    pub fn to_json(&self) -> String {
        let n = self.basis.len();
        let mut factor = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = self.factor[(i, j)];
                factor.push([v.re, v.im]);
            }
        }
        let j = EngineJson {
            version: ENGINE_FORMAT_VERSION,
            spec: self.spec.to_json_value(),
            degree: self.degree,
            basis: self.basis.clone(),
            equilibration: self.equilibration.clone(),
            factor,
            condition_estimate: self.condition_estimate,
            plan: self.plan.clone(),
        };
        serde_json::to_string(&j).expect("engine serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: EngineJson = serde_json::from_str(text)?;
        if j.version != ENGINE_FORMAT_VERSION {
            return Err(Error::InvalidDomain(format!(
                "unsupported engine format version {}",
                j.version
            )));
        }
        let n = j.basis.len();
        if j.factor.len() != n * n || j.equilibration.len() != n {
            return Err(Error::InvalidDomain("engine factor shape mismatch".into()));
        }
        let mut factor = DMatrix::zeros(n, n);
        for i in 0..n {
            for jj in 0..n {
                let [re, im] = j.factor[i * n + jj];
                factor[(i, jj)] = Complex64::new(re, im);
            }
        }
        Ok(Self {
            spec: DomainSpec::from_json_value(&j.spec)?,
            degree: j.degree,
            basis: j.basis,
            equilibration: j.equilibration,
            factor,
            condition_estimate: j.condition_estimate,
            plan: j.plan,
        })
    }
}
