//! Invariant-metric estimators: Caratheodory lower bounds from candidate
//! families of disc-valued maps, Kobayashi upper bounds from affine
//! analytic discs, the Hahn-Lu comparison check against the Bergman
//! form, Poincare machinery, curve lengths and completeness probes.

use std::sync::Arc;

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::bergman::{bergman_form, FormMode, KernelEngine};
use crate::domains::{self, DomainSpec};
use crate::error::{Error, Result};
use crate::expr::{Expr, HoloMap};
use crate::peaks;

/// Poincare distance of the unit disc with the infinitesimal metric
/// |dz| / (1 - |z|^2), so that the disc's Caratheodory metric at the
/// origin is exactly |v| with no factor 2.
pub fn poincare_distance(a: Complex64, b: Complex64) -> Result<f64> {
    if a.norm() >= 1.0 {
        return Err(Error::OutsideDisc(format!("{a}")));
    }
    if b.norm() >= 1.0 {
        return Err(Error::OutsideDisc(format!("{b}")));
    }
    let pseudo = (a - b).norm() / (Complex64::new(1.0, 0.0) - a.conj() * b).norm();
    Ok(pseudo.atanh())
}

// ---------------------------------------------------------------------------
// candidate families
// ---------------------------------------------------------------------------

/// One holomorphic map into the unit disc with closed-form evaluation
/// and derivative.
#[derive(Clone)]
pub enum Member {
    /// (1 + tau z_c) / (1 - tau z_c), disc-valued on { Re z_c < 0 }
    HalfPlaneCayley { coord: usize, tau: f64 },
    /// exp(tau z_c), disc-valued on { Re z_c < 0 }
    HalfPlaneExp { coord: usize, tau: f64 },
    /// sum_j coeffs_j (z_j - center_j) / scale with |coeffs| = 1,
    /// disc-valued on the ball B(center, scale)
    Linear {
        coeffs: Vec<Complex64>,
        center: Vec<Complex64>,
        scale: f64,
    },
    /// w exp(kappa conj(z0) z - kappa |z0|^2 / 2), disc-valued on the
    /// egg domain by |w| e^{kappa Re(conj(z0) z) - kappa(|z0|^2+|z|^2)/2}
    /// = |w| e^{kappa |z|^2/2} e^{-kappa |z - z0|^2 / 2} <= 1
    EggGaussian { kappa: f64, z0: Complex64 },
    /// user-supplied expression
    Expression(Arc<Expr>),
    /// arbitrary holomorphic map (peak products, compositions)
    Map(Arc<dyn HoloMap>),
}

impl HoloMap for Member {
    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        match self {
            Member::HalfPlaneCayley { coord, tau } => {
                let one = Complex64::new(1.0, 0.0);
                Ok((one + tau * z[*coord]) / (one - tau * z[*coord]))
            }
            Member::HalfPlaneExp { coord, tau } => Ok((tau * z[*coord]).exp()),
            Member::Linear {
                coeffs,
                center,
                scale,
            } => Ok(coeffs
                .iter()
                .zip(z)
                .zip(center)
                .map(|((c, v), o)| c * (v - o))
                .sum::<Complex64>()
                / *scale),
            Member::EggGaussian { kappa, z0 } => {
                let arg = kappa * z0.conj() * z[0] - 0.5 * kappa * z0.norm_sqr();
                Ok(z[1] * arg.exp())
            }
            Member::Expression(e) => e.eval(z),
            Member::Map(m) => m.eval(z),
        }
    }

    fn deriv(&self, z: &[Complex64], j: usize) -> Result<Complex64> {
        match self {
            Member::HalfPlaneCayley { coord, tau } => {
                if j != *coord {
                    return Ok(Complex64::default());
                }
                let one = Complex64::new(1.0, 0.0);
                let d = one - tau * z[*coord];
                Ok(2.0 * tau / (d * d))
            }
            Member::HalfPlaneExp { coord, tau } => {
                if j != *coord {
                    return Ok(Complex64::default());
                }
                Ok(tau * (tau * z[*coord]).exp())
            }
            Member::Linear { coeffs, scale, .. } => Ok(coeffs[j] / *scale),
            Member::EggGaussian { kappa, z0 } => {
                let g = (kappa * z0.conj() * z[0] - 0.5 * kappa * z0.norm_sqr()).exp();
                Ok(match j {
                    0 => kappa * z0.conj() * z[1] * g,
                    _ => g,
                })
            }
            Member::Expression(e) => e.derivative(j).eval(z),
            Member::Map(m) => m.deriv(z, j),
        }
    }
}

/// Parametric list of disc-valued candidates for one domain.
#[derive(Clone)]
pub struct CandidateFamily {
    pub tag: String,
    pub members: Vec<(String, Member)>,
}

impl CandidateFamily {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn tau_grid() -> Vec<f64> {
    (-5..=5).map(|k| 2f64.powi(k)).collect()
}

/// The shipped family for a catalog domain: Cayley/exponential half-plane
/// maps for graph domains, the Gaussian-weighted w-family for the egg,
/// coordinate and linear functionals for balls, polydiscs and truncations.
pub fn family_for(spec: &DomainSpec) -> CandidateFamily {
    let n = spec.dimension();
    let mut members: Vec<(String, Member)> = Vec::new();
    match spec {
        DomainSpec::WbGraph { .. }
        | DomainSpec::KohnNirenberg
        | DomainSpec::Fornaess { .. }
        | DomainSpec::ExpGraph => {
            for tau in tau_grid() {
                members.push((
                    format!("cayley(tau={tau})"),
                    Member::HalfPlaneCayley { coord: n - 1, tau },
                ));
                members.push((
                    format!("exp(tau={tau})"),
                    Member::HalfPlaneExp { coord: n - 1, tau },
                ));
            }
        }
        DomainSpec::Egg { kappa } => {
            let mut grid = vec![Complex64::default()];
            for r in [0.75, 1.5] {
                for k in 0..4 {
                    let theta = std::f64::consts::FRAC_PI_2 * k as f64;
                    grid.push(Complex64::from_polar(r, theta));
                }
            }
            for z0 in grid {
                members.push((
                    format!("gaussian(z0={z0})"),
                    Member::EggGaussian { kappa: *kappa, z0 },
                ));
            }
        }
        DomainSpec::Ball { center, radius } => {
            for j in 0..n {
                let mut coeffs = vec![Complex64::default(); n];
                coeffs[j] = Complex64::new(1.0, 0.0);
                members.push((
                    format!("linear(e{j})"),
                    Member::Linear {
                        coeffs,
                        center: center.clone(),
                        scale: *radius,
                    },
                ));
            }
        }
        DomainSpec::Polydisc { radii } => {
            for j in 0..n {
                let mut coeffs = vec![Complex64::default(); n];
                coeffs[j] = Complex64::new(1.0, 0.0);
                members.push((
                    format!("coordinate(z{j})"),
                    Member::Linear {
                        coeffs,
                        center: vec![Complex64::default(); n],
                        scale: radii[j],
                    },
                ));
            }
        }
        DomainSpec::Truncated { inner, radius } => {
            let inner_family = family_for(inner);
            members.extend(inner_family.members);
            for j in 0..n {
                let mut coeffs = vec![Complex64::default(); n];
                coeffs[j] = Complex64::new(1.0, 0.0);
                members.push((
                    format!("ball-linear(e{j})"),
                    Member::Linear {
                        coeffs,
                        center: vec![Complex64::default(); n],
                        scale: *radius,
                    },
                ));
            }
        }
        DomainSpec::Bumped { inner, .. } => {
            members.extend(family_for(inner).members);
        }
    }
    CandidateFamily {
        tag: spec.tag(),
        members,
    }
}

/// Like `family_for`, but keeps only members whose disc-valuedness on
/// the whole domain is certified: linear functionals on containing
/// balls, the Gaussian egg family, and half-plane maps only where the
/// graph part is verifiably nonnegative (sampled for WB polynomials,
/// structural for the exponential graph). Kohn-Nirenberg-type graph
/// polynomials take negative values, so their half-plane members are
/// dropped here and survive only the per-probe validation of
/// `family_for`. Use this family when a bound feeds an inequality
/// check.
pub fn certified_family_for(spec: &DomainSpec) -> CandidateFamily {
    let n = spec.dimension();
    let mut members: Vec<(String, Member)> = Vec::new();
    match spec {
        DomainSpec::WbGraph { poly, weights, bump_s } => {
            let graph_nonneg = weights.is_empty()
                || domains::check_nonnegativity(poly, weights, *bump_s, 4000, 0x517e)
                    .map(|r| r.ok)
                    .unwrap_or(false);
            if graph_nonneg {
                for tau in tau_grid() {
                    members.push((
                        format!("cayley(tau={tau})"),
                        Member::HalfPlaneCayley { coord: n - 1, tau },
                    ));
                    members.push((
                        format!("exp(tau={tau})"),
                        Member::HalfPlaneExp { coord: n - 1, tau },
                    ));
                }
            }
        }
        DomainSpec::ExpGraph => {
            // exp(|z|^2) >= 1 > 0, so the domain sits inside { Re w < 0 }
            for tau in tau_grid() {
                members.push((
                    format!("cayley(tau={tau})"),
                    Member::HalfPlaneCayley { coord: n - 1, tau },
                ));
                members.push((
                    format!("exp(tau={tau})"),
                    Member::HalfPlaneExp { coord: n - 1, tau },
                ));
            }
        }
        DomainSpec::KohnNirenberg | DomainSpec::Fornaess { .. } => {}
        DomainSpec::Egg { .. } | DomainSpec::Ball { .. } | DomainSpec::Polydisc { .. } => {
            return CandidateFamily {
                tag: spec.tag(),
                members: family_for(spec).members,
            };
        }
        DomainSpec::Truncated { inner, radius } => {
            members.extend(certified_family_for(inner).members);
            for j in 0..n {
                let mut coeffs = vec![Complex64::default(); n];
                coeffs[j] = Complex64::new(1.0, 0.0);
                members.push((
                    format!("ball-linear(e{j})"),
                    Member::Linear {
                        coeffs,
                        center: vec![Complex64::default(); n],
                        scale: *radius,
                    },
                ));
            }
        }
        DomainSpec::Bumped { inner, .. } => {
            members.extend(certified_family_for(inner).members);
        }
    }
    CandidateFamily {
        tag: spec.tag(),
        members,
    }
}

/// Members generated from the probe itself; always globally valid
/// candidates, so the lower bound stays a lower bound.
fn adapted_members(spec: &DomainSpec, p: &[Complex64], v: &[Complex64]) -> Vec<(String, Member)> {
    let mut out = Vec::new();
    match spec {
        DomainSpec::Ball { center, radius } => {
            let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.push((
                    "linear(adapted)".to_string(),
                    Member::Linear {
                        coeffs: v.iter().map(|x| x.conj() / norm).collect(),
                        center: center.clone(),
                        scale: *radius,
                    },
                ));
            }
        }
        DomainSpec::Egg { kappa } => {
            out.push((
                format!("gaussian(z0={})", p[0]),
                Member::EggGaussian {
                    kappa: *kappa,
                    z0: p[0],
                },
            ));
        }
        DomainSpec::Truncated { inner, radius } => {
            out.extend(adapted_members(inner, p, v));
            let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.push((
                    "ball-linear(adapted)".to_string(),
                    Member::Linear {
                        coeffs: v.iter().map(|x| x.conj() / norm).collect(),
                        center: vec![Complex64::default(); p.len()],
                        scale: *radius,
                    },
                ));
            }
        }
        _ => {}
    }
    out
}

/// Load a user family from JSON: an array of { "name": ..., "expr": ... }.
pub fn family_from_json(tag: &str, text: &str) -> Result<CandidateFamily> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Entry {
        name: String,
        expr: crate::expr::ExprJson,
    }
    let entries: Vec<Entry> = serde_json::from_str(text)?;
    let mut members = Vec::with_capacity(entries.len());
    for e in &entries {
        members.push((
            e.name.clone(),
            Member::Expression(Arc::new(Expr::from_json_value(&e.expr)?)),
        ));
    }
    Ok(CandidateFamily {
        tag: tag.to_string(),
        members,
    })
}

// ---------------------------------------------------------------------------
// Caratheodory lower bound
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CaratheodoryBound {
    pub value: f64,
    pub best_member: String,
    /// members with |F(p)| >= 1 at this probe, skipped and reported
    pub disqualified: Vec<String>,
}

/// max over the family of |dF_p(v)| / (1 - |F(p)|^2): the Mobius
/// normalization recenters F(p) to 0, so every valid member yields a
/// true lower bound for the Caratheodory metric.
pub fn caratheodory_lower(
    spec: &DomainSpec,
    family: &CandidateFamily,
    p: &[Complex64],
    v: &[Complex64],
) -> Result<CaratheodoryBound> {
    if !spec.contains(p) {
        return Err(Error::Evaluation {
            point: format!("{p:?}"),
            reason: "probe point not interior".into(),
        });
    }
    if v.iter().all(|x| x.norm() == 0.0) {
        return Err(Error::Evaluation {
            point: format!("{p:?}"),
            reason: "zero direction".into(),
        });
    }
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut best = 0.0f64;
    let mut best_member = String::from("none");
    let mut disqualified = Vec::new();
    let adapted = adapted_members(spec, p, v);
    for (name, member) in family.members.iter().chain(adapted.iter()) {
        let fp = member.eval(p)?;
        if fp.norm() >= 1.0 {
            disqualified.push(name.clone());
            continue;
        }
        let df = member.directional_deriv(p, v)?;
        let value = df.norm() / (1.0 - fp.norm_sqr());
        if value > best {
            best = value;
            best_member = name.clone();
        }
    }
    Ok(CaratheodoryBound {
        value: best,
        best_member,
        disqualified,
    })
}

// ---------------------------------------------------------------------------
// Kobayashi upper bound
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct KobayashiBound {
    pub value: f64,
    /// radius of the largest verified affine disc
    pub disc_radius: f64,
    /// circle sampling resolution: radii up to 1 - 2^-depth, M angles
    pub angles: usize,
    pub radius_depth: u32,
    /// the affine disc kept growing past the cap (flat direction)
    pub unbounded_disc: bool,
    /// p is within resolution of the boundary; the bound is unreliable
    pub near_boundary: bool,
}

/// Upper bound 1/R from the largest affine disc lambda -> p + lambda R v
/// whose sampled circles stay inside the domain. An estimate of an upper
/// bound: it is sampled, and affine discs are a strict subfamily.
pub fn kobayashi_upper(
    spec: &DomainSpec,
    p: &[Complex64],
    v: &[Complex64],
    angles: usize,
    tol: f64,
) -> Result<KobayashiBound> {
    if !spec.contains(p) {
        return Err(Error::Evaluation {
            point: format!("{p:?}"),
            reason: "probe point not interior".into(),
        });
    }
    let depth = 8u32;
    let radii: Vec<f64> = (1..=depth).map(|j| 1.0 - 2f64.powi(-(j as i32))).collect();
    let fits = |r_disc: f64| -> bool {
        for &r in &radii {
            for k in 0..angles {
                let theta = std::f64::consts::TAU * (k as f64) / (angles as f64);
                let lambda = Complex64::from_polar(r_disc * r, theta);
                let q: Vec<Complex64> = p.iter().zip(v).map(|(a, b)| a + lambda * b).collect();
                if !spec.contains(&q) {
                    return false;
                }
            }
        }
        true
    };
    let cap = 2f64.powi(60);
    let mut lo; // fits
    let mut hi; // does not fit
    let mut unbounded_disc = false;
    let mut near_boundary = false;
    if fits(1.0) {
        lo = 1.0;
        hi = 2.0;
        while fits(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > cap {
                unbounded_disc = true;
                break;
            }
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        while !fits(lo) {
            hi = lo;
            lo *= 0.5;
            if lo < 2f64.powi(-60) {
                near_boundary = true;
                break;
            }
        }
    }
    if !unbounded_disc && !near_boundary {
        while hi - lo > tol * lo.max(1e-12) {
            let mid = 0.5 * (lo + hi);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    // circles were only verified up to radius (1 - 2^-depth) lo, so the
    // honest upper bound divides by the verified radius
    let verified = lo * (1.0 - 2f64.powi(-(depth as i32)));
    Ok(KobayashiBound {
        value: 1.0 / verified,
        disc_radius: lo,
        angles,
        radius_depth: depth,
        unbounded_disc,
        near_boundary,
    })
}

// ---------------------------------------------------------------------------
// the comparison report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub domain: String,
    pub point: Vec<(f64, f64)>,
    pub direction: Vec<(f64, f64)>,
    pub c_lower: f64,
    pub k_upper: f64,
    pub bergman_value: f64,
    pub hahn_lu_ok: bool,
    pub ordering_ok: bool,
    pub c_provenance: String,
    pub k_provenance: String,
    pub b_provenance: String,
    pub best_member: String,
    pub disqualified: Vec<String>,
}

fn record(p: &[Complex64]) -> Vec<(f64, f64)> {
    p.iter().map(|z| (z.re, z.im)).collect()
}

/// Verdicts: c_lower^2 <= b (1 + tol) (comparison of Caratheodory and
/// Bergman) and c_lower <= k_upper (1 + tol) (metric ordering). Requires
/// K(p,p) > 0.
pub fn hahn_lu_check(
    spec: &DomainSpec,
    engine: &KernelEngine,
    family: &CandidateFamily,
    p: &[Complex64],
    v: &[Complex64],
    tol: f64,
) -> Result<MetricReport> {
    let k_pp = engine.kernel_diagonal(p)?;
    if !(k_pp > 0.0) {
        return Err(Error::ComparisonInapplicable);
    }
    let mode = match engine {
        KernelEngine::ClosedForm(_) => FormMode::Analytic,
        KernelEngine::Numeric(_) => FormMode::FiniteDifference,
    };
    let form = bergman_form(engine, p, mode)?;
    let b = form.apply(v);
    let c = caratheodory_lower(spec, family, p, v)?;
    let k = kobayashi_upper(spec, p, v, 24, 1e-4)?;
    Ok(MetricReport {
        domain: spec.tag(),
        point: record(p),
        direction: record(v),
        c_lower: c.value,
        k_upper: k.value,
        bergman_value: b,
        hahn_lu_ok: c.value * c.value <= b * (1.0 + tol),
        ordering_ok: c.value <= k.value * (1.0 + tol),
        c_provenance: "sampled_bound".into(),
        k_provenance: "sampled_bound".into(),
        b_provenance: engine.provenance(),
        best_member: c.best_member,
        disqualified: c.disqualified,
    })
}

/// Deterministic interior probes: sampled points pulled toward the
/// anchor, paired with random unit directions.
pub fn default_probes(
    spec: &DomainSpec,
    count: usize,
    seed: u64,
) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
    let n = spec.dimension();
    let anchor = spec.anchor();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cloud = match crate::quadrature::sample_domain(
        spec,
        &crate::quadrature::SamplePlan::new(4 * count as u64 + 64, seed),
    ) {
        Ok(s) => s.points.into_iter().map(|(p, _)| p).collect::<Vec<_>>(),
        Err(_) => peaks::interior_cloud(spec, 4 * count, 4.0, seed),
    };
    let mut probes = Vec::with_capacity(count);
    for q in cloud {
        if probes.len() >= count {
            break;
        }
        let pulled: Vec<Complex64> = q
            .iter()
            .zip(&anchor)
            .map(|(a, b)| b + (a - b) * 0.65)
            .collect();
        if !spec.contains(&pulled) {
            continue;
        }
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| {
                Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
            })
            .collect();
        let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        probes.push((pulled, v));
    }
    probes
}

// ---------------------------------------------------------------------------
// curve lengths
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CurveLength {
    pub value: f64,
    pub coarse_value: f64,
    /// relative change under sample doubling
    pub rel_change: f64,
    pub samples: usize,
}

/// Composite trapezoid of metric(gamma(t), gamma'(t)) dt over [0,1] with
/// finite-difference tangents, evaluated at n and 2n samples.
pub fn curve_length<M, G>(
    spec: Option<&DomainSpec>,
    metric: M,
    curve: G,
    samples: usize,
) -> Result<CurveLength>
where
    M: Fn(&[Complex64], &[Complex64]) -> Result<f64>,
    G: Fn(f64) -> Vec<Complex64>,
{
    let eval_at = |n: usize| -> Result<f64> {
        let dt = 1.0 / n as f64;
        let pts: Vec<Vec<Complex64>> = (0..=n).map(|i| curve(i as f64 * dt)).collect();
        if let Some(spec) = spec {
            for (i, q) in pts.iter().enumerate() {
                if !spec.contains(q) {
                    return Err(Error::Evaluation {
                        point: format!("t = {}", i as f64 * dt),
                        reason: "curve sample outside domain".into(),
                    });
                }
            }
        }
        let tangent = |i: usize| -> Vec<Complex64> {
            let (a, b, h) = if i == 0 {
                (0, 1, dt)
            } else if i == n {
                (n - 1, n, dt)
            } else {
                (i - 1, i + 1, 2.0 * dt)
            };
            pts[b]
                .iter()
                .zip(&pts[a])
                .map(|(x, y)| (x - y) / h)
                .collect()
        };
        let mut acc = 0.0;
        for i in 0..=n {
            let g = metric(&pts[i], &tangent(i))?;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * g * dt;
        }
        Ok(acc)
    };
    let coarse = eval_at(samples)?;
    let fine = eval_at(2 * samples)?;
    let rel_change = (fine - coarse).abs() / fine.abs().max(1e-300);
    Ok(CurveLength {
        value: fine,
        coarse_value: coarse,
        rel_change,
        samples: 2 * samples,
    })
}

// ---------------------------------------------------------------------------
// distance lower bounds and completeness probes
// ---------------------------------------------------------------------------

/// d^P(f(p), f(q)): by the distance-decreasing property of disc-valued
/// holomorphic maps, a lower bound for the integrated Caratheodory
/// distance between p and q.
pub fn pushforward_distance_lower(
    f: &dyn HoloMap,
    p: &[Complex64],
    q: &[Complex64],
) -> Result<f64> {
    let fp = f.eval(p)?;
    if fp.norm() >= 1.0 {
        return Err(Error::Disqualified {
            point: format!("{p:?}"),
        });
    }
    let fq = f.eval(q)?;
    if fq.norm() >= 1.0 {
        return Err(Error::Disqualified {
            point: format!("{q:?}"),
        });
    }
    poincare_distance(fp, fq)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub index: usize,
    pub point: Vec<(f64, f64)>,
    pub lower_bound: f64,
    pub best_member: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompletenessReport {
    pub rows: Vec<ProbeRow>,
    pub increments: Vec<f64>,
    pub strictly_increasing: bool,
    pub exceeded_threshold: Option<bool>,
}

/// For each escape point q_nu, the best pushforward lower bound for the
/// Caratheodory distance from q_1; increasing unbounded-looking bounds
/// are divergence evidence, not a proof.
pub fn completeness_probe(
    spec: &DomainSpec,
    family: &CandidateFamily,
    escape: &[Vec<Complex64>],
    threshold: Option<f64>,
) -> Result<CompletenessReport> {
    if escape.len() < 2 {
        return Err(Error::Evaluation {
            point: "escape".into(),
            reason: "need at least two escape points".into(),
        });
    }
    for q in escape {
        if !spec.contains(q) {
            return Err(Error::Evaluation {
                point: format!("{q:?}"),
                reason: "escape point not interior".into(),
            });
        }
    }
    let base = &escape[0];
    let mut rows = Vec::with_capacity(escape.len() - 1);
    for (i, q) in escape.iter().enumerate().skip(1) {
        let mut best = 0.0f64;
        let mut best_member = String::from("none");
        for (name, member) in &family.members {
            let fp = member.eval(base)?;
            let fq = member.eval(q)?;
            if fp.norm() >= 1.0 || fq.norm() >= 1.0 {
                continue;
            }
            let d = poincare_distance(fp, fq)?;
            if d > best {
                best = d;
                best_member = name.clone();
            }
        }
        rows.push(ProbeRow {
            index: i,
            point: record(q),
            lower_bound: best,
            best_member,
        });
    }
    let increments: Vec<f64> = rows
        .windows(2)
        .map(|w| w[1].lower_bound - w[0].lower_bound)
        .collect();
    let strictly_increasing = increments.iter().all(|&d| d > 0.0);
    let exceeded_threshold =
        threshold.map(|t| rows.last().map(|r| r.lower_bound >= t).unwrap_or(false));
    Ok(CompletenessReport {
        rows,
        increments,
        strictly_increasing,
        exceeded_threshold,
    })
}

/// The homothety escape q_nu = Lambda_{t_nu}(q) for a WB graph domain.
pub fn homothety_escape(
    spec: &DomainSpec,
    q: &[Complex64],
    ts: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    let DomainSpec::WbGraph { weights, .. } = spec else {
        return Err(Error::InvalidDomain(
            "homothety escape requires a WB graph domain".into(),
        ));
    };
    Ok(ts
        .iter()
        .map(|&t| domains::homothety(weights, t, q))
        .collect())
}

// ---------------------------------------------------------------------------
// positivity candidate from a peak function
// ---------------------------------------------------------------------------

struct PeakLinearProduct {
    peak: Arc<dyn HoloMap>,
    base: Vec<Complex64>,
    vbar: Vec<Complex64>,
    scale: f64,
}

impl HoloMap for PeakLinearProduct {
    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        let lin: Complex64 = self
            .vbar
            .iter()
            .zip(z)
            .zip(&self.base)
            .map(|((vb, a), b)| vb * (a - b))
            .sum();
        Ok(self.peak.eval(z)? * lin / self.scale)
    }

    fn deriv(&self, z: &[Complex64], j: usize) -> Result<Complex64> {
        let lin: Complex64 = self
            .vbar
            .iter()
            .zip(z)
            .zip(&self.base)
            .map(|((vb, a), b)| vb * (a - b))
            .sum();
        Ok((self.peak.deriv(z, j)? * lin + self.peak.eval(z)? * self.vbar[j]) / self.scale)
    }
}

/// The positivity candidate g = Q(z) (vbar_1 (z_1 - p_1) + ...), scaled
/// by its sampled sup so it maps into the disc; its derivative at p in
/// direction v is Q(p) |v|^2 / scale, positive wherever the peak
/// function does not vanish.
pub fn peak_product_member(
    peak: Arc<dyn HoloMap>,
    spec: &DomainSpec,
    p: &[Complex64],
    v: &[Complex64],
    samples: usize,
    seed: u64,
) -> Result<(String, Member)> {
    let raw = PeakLinearProduct {
        peak,
        base: p.to_vec(),
        vbar: v.iter().map(|x| x.conj()).collect(),
        scale: 1.0,
    };
    let mut cloud = peaks::interior_cloud(spec, samples, 10.0, seed);
    if spec.is_unbounded() {
        cloud.extend(peaks::far_cloud(spec, &[5.0, 10.0, 20.0], samples / 10, seed));
    }
    let mut sup = 0.0f64;
    for q in &cloud {
        sup = sup.max(raw.eval(q)?.norm());
    }
    if !(sup > 0.0) || !sup.is_finite() {
        return Err(Error::Evaluation {
            point: format!("{p:?}"),
            reason: "degenerate peak product (sampled sup is 0 or infinite)".into(),
        });
    }
    let member = Member::Map(Arc::new(PeakLinearProduct {
        scale: 1.05 * sup,
        ..raw
    }));
    Ok(("peak-product".to_string(), member))
}

/// Compose a member with the disc automorphism
/// phi(w) = (w - a) / (1 - conj(a) w); used to check that the computed
/// lower bound is Mobius invariant.
pub fn compose_with_automorphism(member: &Member, a: Complex64) -> Member {
    struct Composed {
        inner: Member,
        a: Complex64,
    }
    impl HoloMap for Composed {
        fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
            let w = self.inner.eval(z)?;
            Ok((w - self.a) / (Complex64::new(1.0, 0.0) - self.a.conj() * w))
        }
        fn deriv(&self, z: &[Complex64], j: usize) -> Result<Complex64> {
            let w = self.inner.eval(z)?;
            let dw = self.inner.deriv(z, j)?;
            let denom = Complex64::new(1.0, 0.0) - self.a.conj() * w;
            Ok(dw * (1.0 - self.a.norm_sqr()) / (denom * denom))
        }
    }
    Member::Map(Arc::new(Composed {
        inner: member.clone(),
        a,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::GramPlan;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn poincare_basics() {
        assert_eq!(poincare_distance(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
        assert_relative_eq!(
            poincare_distance(c(0.0, 0.0), c(0.5, 0.0)).unwrap(),
            0.5f64.atanh(),
            max_relative = 1e-14
        );
        assert!(poincare_distance(c(1.0, 0.0), c(0.0, 0.0)).is_err());
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = Complex64::from_polar(rng.gen_range(0.0..0.95), rng.gen_range(0.0..6.28));
            let b = Complex64::from_polar(rng.gen_range(0.0..0.95), rng.gen_range(0.0..6.28));
            assert_relative_eq!(
                poincare_distance(a, b).unwrap(),
                poincare_distance(b, a).unwrap(),
                max_relative = 1e-12,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn disc_caratheodory_is_sharp_at_origin() {
        let spec = DomainSpec::disc();
        let family = family_for(&spec);
        let bound = caratheodory_lower(&spec, &family, &[c(0.0, 0.0)], &[c(0.7, 0.4)]).unwrap();
        assert_relative_eq!(bound.value, c(0.7, 0.4).norm(), max_relative = 1e-13);
    }

    #[test]
    fn wb_half_plane_value() {
        // p = (0', -1), v = (0', 1): the half-plane metric |v| / 2|Re p_n|
        let spec = DomainSpec::hkn();
        let family = family_for(&spec);
        let bound = caratheodory_lower(
            &spec,
            &family,
            &[c(0.0, 0.0), c(-1.0, 0.0)],
            &[c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        assert_relative_eq!(bound.value, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn egg_family_positive_at_probe() {
        let spec = DomainSpec::Egg { kappa: 1.0 };
        let family = family_for(&spec);
        let bound = caratheodory_lower(
            &spec,
            &family,
            &[c(1.0, 0.0), c(0.1, 0.0)],
            &[c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        assert!(bound.value > 0.0, "{bound:?}");
    }

    #[test]
    fn caratheodory_homogeneity_in_direction() {
        let spec = DomainSpec::Egg { kappa: 2.0 };
        let family = family_for(&spec);
        let p = [c(0.4, -0.2), c(0.2, 0.1)];
        let v = [c(0.3, 0.7), c(-0.5, 0.2)];
        let lambda = c(1.7, -2.3);
        let lv: Vec<Complex64> = v.iter().map(|x| lambda * x).collect();
        let a = caratheodory_lower(&spec, &family, &p, &v).unwrap().value;
        let b = caratheodory_lower(&spec, &family, &p, &lv).unwrap().value;
        assert_relative_eq!(b, lambda.norm() * a, max_relative = 1e-12);
    }

    #[test]
    fn mobius_invariance_of_lower_bound() {
        let p = [c(0.5, 0.2), c(0.2, -0.1)];
        let v = [c(1.0, 0.0), c(0.5, 0.5)];
        let base = Member::EggGaussian {
            kappa: 1.0,
            z0: c(0.5, 0.2),
        };
        let composed = compose_with_automorphism(&base, c(0.3, -0.4));
        let fam = |m: Member| CandidateFamily {
            tag: "test".into(),
            members: vec![("m".into(), m)],
        };
        // strip adapted members by using a ball spec? directly compare the
        // member values: family of one vs its automorphism image
        let a = {
            let fp = base.eval(&p).unwrap();
            let df = base.directional_deriv(&p, &v).unwrap();
            df.norm() / (1.0 - fp.norm_sqr())
        };
        let b = {
            let m = &fam(composed).members[0].1;
            let fp = m.eval(&p).unwrap();
            let df = m.directional_deriv(&p, &v).unwrap();
            df.norm() / (1.0 - fp.norm_sqr())
        };
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn kobayashi_disc_and_ball() {
        let disc = DomainSpec::disc();
        let k = kobayashi_upper(&disc, &[c(0.0, 0.0)], &[c(1.0, 0.0)], 16, 1e-6).unwrap();
        assert!((k.value - 1.0).abs() < 0.01, "disc k = {}", k.value);

        let ball = DomainSpec::ball(2, 1.0);
        let k2 = kobayashi_upper(
            &ball,
            &[c(0.0, 0.0), c(0.0, 0.0)],
            &[c(0.6, 0.0), c(0.0, 0.8)],
            16,
            1e-6,
        )
        .unwrap();
        assert!((k2.value - 1.0).abs() < 0.01, "ball k = {}", k2.value);
    }

    #[test]
    fn kobayashi_half_plane_gap() {
        // the affine estimate returns 1 while the true metric is 1/2
        let spec = DomainSpec::half_plane();
        let k = kobayashi_upper(&spec, &[c(-1.0, 0.0)], &[c(1.0, 0.0)], 16, 1e-6).unwrap();
        assert!((k.value - 1.0).abs() < 0.01, "half-plane k = {}", k.value);
        assert!(!k.unbounded_disc);
    }

    #[test]
    fn kobayashi_flat_direction_on_egg_line() {
        let spec = DomainSpec::Egg { kappa: 1.0 };
        let k = kobayashi_upper(
            &spec,
            &[c(0.0, 0.0), c(0.0, 0.0)],
            &[c(1.0, 0.0), c(0.0, 0.0)],
            8,
            1e-4,
        )
        .unwrap();
        assert!(k.unbounded_disc);
        assert!(k.value < 1e-15);
    }

    #[test]
    fn hahn_lu_on_ball_and_disc() {
        let ball = DomainSpec::ball(2, 1.0);
        let engine = KernelEngine::closed_form(&ball).unwrap();
        let family = family_for(&ball);
        let report = hahn_lu_check(
            &ball,
            &engine,
            &family,
            &[c(0.0, 0.0), c(0.0, 0.0)],
            &[c(0.6, 0.0), c(0.0, 0.8)],
            1e-6,
        )
        .unwrap();
        assert!(report.hahn_lu_ok && report.ordering_ok);
        assert_relative_eq!(report.c_lower, 1.0, max_relative = 1e-12);
        assert_relative_eq!(report.bergman_value, 3.0, max_relative = 1e-12);

        let disc = DomainSpec::disc();
        let dengine = KernelEngine::closed_form(&disc).unwrap();
        let dfam = family_for(&disc);
        let dreport =
            hahn_lu_check(&disc, &dengine, &dfam, &[c(0.0, 0.0)], &[c(1.0, 0.0)], 1e-6).unwrap();
        assert!(dreport.hahn_lu_ok && dreport.ordering_ok);
        assert_relative_eq!(dreport.bergman_value, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn hahn_lu_sweep_egg() {
        let spec = DomainSpec::Egg { kappa: 2.0 };
        let engine = KernelEngine::closed_form(&spec).unwrap();
        let family = family_for(&spec);
        for (p, v) in default_probes(&spec, 50, 21) {
            let report = hahn_lu_check(&spec, &engine, &family, &p, &v, 1e-6).unwrap();
            assert!(report.hahn_lu_ok, "{report:?}");
            assert!(report.ordering_ok, "{report:?}");
        }
    }

    #[test]
    fn comparison_refused_without_positive_kernel() {
        let spec = DomainSpec::Egg { kappa: 1.0 };
        let engine = KernelEngine::closed_form(&spec).unwrap();
        let family = family_for(&spec);
        // a point outside the domain: K cannot be trusted there
        let p = [c(0.0, 0.0), c(2.0, 0.0)];
        let res = hahn_lu_check(&spec, &engine, &family, &p, &[c(1.0, 0.0), c(0.0, 0.0)], 1e-6);
        assert!(res.is_err());
    }

    #[test]
    fn curve_length_euclidean_segment() {
        let metric = |_: &[Complex64], v: &[Complex64]| -> Result<f64> {
            Ok(v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
        };
        let curve = |t: f64| vec![c(t, 0.0)];
        let len = curve_length(None, metric, curve, 64).unwrap();
        assert_relative_eq!(len.value, 1.0, max_relative = 1e-10);
        assert!(len.rel_change < 1e-3);
    }

    #[test]
    fn curve_length_poincare_radial() {
        let metric = |z: &[Complex64], v: &[Complex64]| -> Result<f64> {
            Ok(v[0].norm() / (1.0 - z[0].norm_sqr()))
        };
        let r = 0.8;
        let curve = move |t: f64| vec![c(r * t, 0.0)];
        let len = curve_length(Some(&DomainSpec::disc()), metric, curve, 256).unwrap();
        assert_relative_eq!(len.value, r.atanh(), max_relative = 1e-4);
    }

    #[test]
    fn curve_length_egg_line_is_euclidean() {
        let kappa = 2.0;
        let spec = DomainSpec::Egg { kappa };
        let engine = KernelEngine::closed_form(&spec).unwrap();
        let metric = move |z: &[Complex64], v: &[Complex64]| -> Result<f64> {
            let form = bergman_form(&engine, z, FormMode::Analytic)?;
            Ok(form.apply(v).max(0.0).sqrt())
        };
        let target = c(1.2, -0.9);
        let curve = move |t: f64| vec![target * t, c(0.0, 0.0)];
        let len = curve_length(Some(&spec), metric, curve, 64).unwrap();
        assert_relative_eq!(
            len.value,
            kappa.sqrt() * target.norm(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn curve_escaping_domain_is_an_error() {
        let metric = |_: &[Complex64], _: &[Complex64]| -> Result<f64> { Ok(1.0) };
        let curve = |t: f64| vec![c(2.0 * t, 0.0)];
        let res = curve_length(Some(&DomainSpec::disc()), metric, curve, 16);
        assert!(matches!(res, Err(Error::Evaluation { .. })));
    }

    #[test]
    fn pushforward_identity_is_poincare() {
        let id = Member::Linear {
            coeffs: vec![c(1.0, 0.0)],
            center: vec![c(0.0, 0.0)],
            scale: 1.0,
        };
        let p = [c(0.1, 0.2)];
        let q = [c(-0.5, 0.3)];
        let d = pushforward_distance_lower(&id, &p, &q).unwrap();
        assert_relative_eq!(
            d,
            poincare_distance(p[0], q[0]).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn pushforward_bounded_by_curve_length() {
        // the pushforward lower bound never exceeds the integrated
        // c_lower length of any sampled curve joining the points
        let spec = DomainSpec::disc();
        let family = family_for(&spec);
        let p = [c(0.0, 0.0)];
        let q = [c(0.7, 0.2)];
        let id = Member::Linear {
            coeffs: vec![c(1.0, 0.0)],
            center: vec![c(0.0, 0.0)],
            scale: 1.0,
        };
        let lower = pushforward_distance_lower(&id, &p, &q).unwrap();
        let metric = |z: &[Complex64], v: &[Complex64]| -> Result<f64> {
            Ok(caratheodory_lower(&spec, &family, z, v)?.value)
        };
        let curve = |t: f64| vec![q[0] * t];
        let len = curve_length(Some(&spec), metric, curve, 256).unwrap();
        assert!(
            lower <= len.value + 1e-4,
            "pushforward {lower} vs curve length {}",
            len.value
        );
    }

    #[test]
    fn catalog_engines_positive_on_interior_probes() {
        let specs = [
            DomainSpec::disc(),
            DomainSpec::ball(2, 1.0),
            DomainSpec::Polydisc { radii: vec![1.0, 1.5] },
            DomainSpec::Egg { kappa: 1.0 },
            DomainSpec::Egg { kappa: 2.0 },
        ];
        for spec in specs {
            let closed = KernelEngine::closed_form(&spec).unwrap();
            let numeric = KernelEngine::numeric(&spec, 6, GramPlan::Exact).unwrap();
            for (p, _) in default_probes(&spec, 20, 77) {
                assert!(closed.kernel_diagonal(&p).unwrap() > 0.0, "{}", spec.tag());
                assert!(numeric.kernel_diagonal(&p).unwrap() > 0.0, "{}", spec.tag());
            }
        }
    }

    #[test]
    fn pushforward_half_plane_log_growth() {
        let cayley = Member::HalfPlaneCayley { coord: 0, tau: 1.0 };
        let p = [c(-1.0, 0.0)];
        for t in [2.0, 8.0, 64.0] {
            let q = [c(-t, 0.0)];
            let d = pushforward_distance_lower(&cayley, &p, &q).unwrap();
            assert_relative_eq!(d, 0.5 * t.ln(), max_relative = 1e-10);
        }
    }

    #[test]
    fn completeness_probe_hkn_homothety() {
        let spec = DomainSpec::hkn();
        let family = family_for(&spec);
        let base = vec![c(0.0, 0.0), c(-1.0, 0.0)];
        let ts: Vec<f64> = (1..=12).map(|v| 2f64.powi(v)).collect();
        let escape = homothety_escape(&spec, &base, &ts).unwrap();
        let report = completeness_probe(&spec, &family, &escape, Some(1.0)).unwrap();
        assert!(report.strictly_increasing);
        assert_eq!(report.exceeded_threshold, Some(true));
        let half_log2 = 0.5 * 2f64.ln();
        for (i, inc) in report.increments.iter().enumerate() {
            assert!(
                (inc - half_log2).abs() <= 0.1 * half_log2,
                "increment {i}: {inc} vs {half_log2}"
            );
        }
    }

    #[test]
    fn completeness_probe_disc_radial() {
        let spec = DomainSpec::disc();
        let family = family_for(&spec);
        let escape: Vec<Vec<Complex64>> =
            [0.0, 0.5, 0.9, 0.99, 0.999].iter().map(|&r| vec![c(r, 0.0)]).collect();
        let report = completeness_probe(&spec, &family, &escape, None).unwrap();
        for (row, r) in report.rows.iter().zip([0.5f64, 0.9, 0.99, 0.999]) {
            assert_relative_eq!(row.lower_bound, r.atanh(), max_relative = 1e-10);
        }
    }

    #[test]
    fn peak_product_gives_positive_bound() {
        // disc peak (1 + z)/2 at p = 1 drives the positivity candidate
        let peak = Arc::new(Expr::mul(vec![
            Expr::constant(0.5, 0.0),
            Expr::add(vec![Expr::constant(1.0, 0.0), Expr::coord(0)]),
        ]));
        let spec = DomainSpec::disc();
        let p = [c(0.9, 0.0)];
        let v = [c(1.0, 0.0)];
        let (name, member) = peak_product_member(peak, &spec, &p, &v, 4000, 3).unwrap();
        let family = CandidateFamily {
            tag: spec.tag(),
            members: vec![(name, member)],
        };
        let bound = caratheodory_lower(&spec, &family, &p, &v).unwrap();
        assert!(bound.value > 0.0, "{bound:?}");
    }

    #[test]
    fn truncated_kn_numeric_hahn_lu() {
        let spec = DomainSpec::Truncated {
            inner: Box::new(DomainSpec::KohnNirenberg),
            radius: 3.0,
        };
        let engine = KernelEngine::numeric(&spec, 4, GramPlan::mc(40_000, 11)).unwrap();
        let family = certified_family_for(&spec);
        assert!(family
            .members
            .iter()
            .all(|(name, _)| !name.starts_with("cayley") && !name.starts_with("exp(")));
        for (p, v) in default_probes(&spec, 10, 31) {
            let report = hahn_lu_check(&spec, &engine, &family, &p, &v, 1e-6).unwrap();
            assert!(report.hahn_lu_ok, "{report:?}");
            assert!(report.ordering_ok, "{report:?}");
        }
    }

    #[test]
    fn family_json_load() {
        let text = r#"[{"name": "id", "expr": {"op": "coord", "index": 0}}]"#;
        let family = family_from_json("disc", text).unwrap();
        assert_eq!(family.members.len(), 1);
        let spec = DomainSpec::disc();
        let bound = caratheodory_lower(&spec, &family, &[c(0.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        assert_relative_eq!(bound.value, 1.0, max_relative = 1e-14);
    }
}
