//! Wirtinger calculus: analytic derivatives of Hermitian polynomials,
//! finite-difference derivatives of black-box real functions, Levi forms
//! and their eigenvalues, and boundary pseudoconvexity verdicts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::poly::HermitianPolynomial;

/// Hermitian matrix of mixed second Wirtinger derivatives
/// L_{jl} = d^2 f / dz_j dzbar_l at a base point.
#[derive(Debug, Clone)]
pub struct LeviForm {
    pub point: Vec<Complex64>,
    pub matrix: DMatrix<Complex64>,
}

impl LeviForm {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Max entry-wise deviation from the conjugate transpose.
    pub fn hermitian_residual(&self) -> f64 {
        let k = self.dim();
        let mut worst = 0.0f64;
        for j in 0..k {
            for l in 0..k {
                worst = worst.max((self.matrix[(j, l)] - self.matrix[(l, j)].conj()).norm());
            }
        }
        worst
    }

    /// Quadratic form v^H L v (real for Hermitian L).
    pub fn apply(&self, v: &[Complex64]) -> f64 {
        let mut acc = Complex64::default();
        for j in 0..self.dim() {
            for l in 0..self.dim() {
                acc += v[j].conj() * self.matrix[(j, l)] * v[l];
            }
        }
        acc.re
    }
}

/// Differentiation mode for Levi forms of black-box functions.
#[derive(Debug, Clone, Copy)]
pub enum DiffMode {
    Analytic,
    FiniteDifference { h: Option<f64>, richardson: bool },
}

impl DiffMode {
    pub fn fd() -> Self {
        DiffMode::FiniteDifference {
            h: None,
            richardson: false,
        }
    }

    pub fn fd_richardson() -> Self {
        DiffMode::FiniteDifference {
            h: None,
            richardson: true,
        }
    }
}

/// Default step 1e-4 * (1 + |z|).
pub fn default_step(z: &[Complex64]) -> f64 {
    let norm: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    1e-4 * (1.0 + norm)
}

/// Exact mixed Wirtinger derivative of a Hermitian polynomial.
pub fn wirtinger_derivative(
    poly: &HermitianPolynomial,
    orders: (&[u32], &[u32]),
    z: &[Complex64],
) -> Result<Complex64> {
    poly.wirtinger_derivative(orders.0, orders.1, z)
}

/// Exact Levi form of a Hermitian polynomial: term calculus, no rounding
/// beyond evaluation. The result is Hermitian by construction.
pub fn levi_form_poly(poly: &HermitianPolynomial, z: &[Complex64]) -> Result<LeviForm> {
    let k = poly.dimension();
    let mut matrix = DMatrix::zeros(k, k);
    for j in 0..k {
        for l in j..k {
            let mut a = vec![0u32; k];
            let mut b = vec![0u32; k];
            a[j] += 1;
            b[l] += 1;
            let v = poly.wirtinger_derivative(&a, &b, z)?;
            matrix[(j, l)] = v;
            if l != j {
                matrix[(l, j)] = v.conj();
            }
        }
    }
    Ok(LeviForm {
        point: z.to_vec(),
        matrix,
    })
}

fn probe(
    f: &dyn Fn(&[Complex64]) -> f64,
    z: &[Complex64],
    j: usize,
    re_j: f64,
    im_j: f64,
    l: usize,
    re_l: f64,
    im_l: f64,
) -> Result<f64> {
    let mut w = z.to_vec();
    w[j] += Complex64::new(re_j, im_j);
    w[l] += Complex64::new(re_l, im_l);
    let v = f(&w);
    if v.is_nan() {
        return Err(Error::Evaluation {
            point: format!("{w:?}"),
            reason: "NaN from function".into(),
        });
    }
    Ok(v)
}

fn levi_fd_step(
    f: &dyn Fn(&[Complex64]) -> f64,
    z: &[Complex64],
    h: f64,
) -> Result<DMatrix<Complex64>> {
    let k = z.len();
    let f0 = probe(f, z, 0, 0.0, 0.0, 0, 0.0, 0.0)?;
    let h2 = h * h;
    let mut m = DMatrix::zeros(k, k);
    // second real-direction derivative d^2/du dv via central differences
    let mixed = |ju: usize, du: (f64, f64), jv: usize, dv: (f64, f64)| -> Result<f64> {
        let pp = probe(f, z, ju, h * du.0, h * du.1, jv, h * dv.0, h * dv.1)?;
        let pm = probe(f, z, ju, h * du.0, h * du.1, jv, -h * dv.0, -h * dv.1)?;
        let mp = probe(f, z, ju, -h * du.0, -h * du.1, jv, h * dv.0, h * dv.1)?;
        let mm = probe(f, z, ju, -h * du.0, -h * du.1, jv, -h * dv.0, -h * dv.1)?;
        Ok((pp - pm - mp + mm) / (4.0 * h2))
    };
    for j in 0..k {
        // diagonal: quarter Laplacian in the j-th complex coordinate
        let fxx = (probe(f, z, j, h, 0.0, j, 0.0, 0.0)? - 2.0 * f0
            + probe(f, z, j, -h, 0.0, j, 0.0, 0.0)?)
            / h2;
        let fyy = (probe(f, z, j, 0.0, h, j, 0.0, 0.0)? - 2.0 * f0
            + probe(f, z, j, 0.0, -h, j, 0.0, 0.0)?)
            / h2;
        m[(j, j)] = Complex64::new(0.25 * (fxx + fyy), 0.0);
        for l in (j + 1)..k {
            let xx = mixed(j, (1.0, 0.0), l, (1.0, 0.0))?;
            let yy = mixed(j, (0.0, 1.0), l, (0.0, 1.0))?;
            let xy = mixed(j, (1.0, 0.0), l, (0.0, 1.0))?;
            let yx = mixed(j, (0.0, 1.0), l, (1.0, 0.0))?;
            let v = Complex64::new(0.25 * (xx + yy), 0.25 * (xy - yx));
            m[(j, l)] = v;
            m[(l, j)] = v.conj();
        }
    }
    Ok(m)
}

/// Levi form of a black-box real-valued function by central second
/// differences on the real directions of each complex pair; O(h^2) error,
/// or O(h^4) with Richardson extrapolation.
pub fn levi_form_fd(
    f: impl Fn(&[Complex64]) -> f64,
    z: &[Complex64],
    h: Option<f64>,
    richardson: bool,
) -> Result<LeviForm> {
    let h = h.unwrap_or_else(|| default_step(z));
    let coarse = levi_fd_step(&f, z, h)?;
    let matrix = if richardson {
        let fine = levi_fd_step(&f, z, 0.5 * h)?;
        fine.map(|v| v * (4.0 / 3.0)) - coarse.map(|v| v / 3.0)
    } else {
        coarse
    };
    // symmetrize away the rounding skew
    let sym = (&matrix + matrix.adjoint()).scale(0.5);
    Ok(LeviForm {
        point: z.to_vec(),
        matrix: sym,
    })
}

/// Smallest eigenvalue of a Hermitian matrix via the symmetric eigensolver
/// on the 2k x 2k real embedding [[A, -B], [B, A]] of L = A + iB.
pub fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let k = m.nrows();
    if k == 0 {
        return f64::INFINITY;
    }
    if k == 1 {
        return m[(0, 0)].re;
    }
    let mut real = DMatrix::zeros(2 * k, 2 * k);
    for j in 0..k {
        for l in 0..k {
            let v = m[(j, l)];
            real[(j, l)] = v.re;
            real[(j + k, l + k)] = v.re;
            real[(j, l + k)] = -v.im;
            real[(j + k, l)] = v.im;
        }
    }
    let sym = 0.5 * (&real + real.transpose());
    sym.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn min_levi_eigenvalue(levi: &LeviForm) -> f64 {
    min_hermitian_eigenvalue(&levi.matrix)
}

/// (min, max) eigenvalues of a Hermitian matrix via the real embedding.
pub fn hermitian_eigen_range(m: &DMatrix<Complex64>) -> (f64, f64) {
    let k = m.nrows();
    if k == 0 {
        return (f64::INFINITY, f64::NEG_INFINITY);
    }
    if k == 1 {
        return (m[(0, 0)].re, m[(0, 0)].re);
    }
    let mut real = DMatrix::zeros(2 * k, 2 * k);
    for j in 0..k {
        for l in 0..k {
            let v = m[(j, l)];
            real[(j, l)] = v.re;
            real[(j + k, l + k)] = v.re;
            real[(j, l + k)] = -v.im;
            real[(j + k, l)] = v.im;
        }
    }
    let sym = 0.5 * (&real + real.transpose());
    let eigs = sym.symmetric_eigenvalues();
    let lo = eigs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = eigs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    (lo, hi)
}

// ---------------------------------------------------------------------------
// defining-function calculus per catalog variant
// ---------------------------------------------------------------------------

/// Wirtinger gradient (d rho / dz_1, ..., d rho / dz_n) of the defining
/// function; analytic for the catalog variants, finite differences for
/// the composite ones.
pub fn defining_gradient(spec: &DomainSpec, z: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = spec.dimension();
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z.len(),
        });
    }
    match spec {
        DomainSpec::WbGraph { poly, .. } => {
            let mut g = Vec::with_capacity(n);
            for j in 0..n - 1 {
                let mut a = vec![0u32; n - 1];
                a[j] = 1;
                g.push(poly.wirtinger_derivative(&a, &vec![0; n - 1], &z[..n - 1])?);
            }
            g.push(Complex64::new(0.5, 0.0));
            Ok(g)
        }
        DomainSpec::KohnNirenberg => {
            gradient_of_poly(&crate::poly::kn_defining_polynomial(), z)
        }
        DomainSpec::Fornaess { t } => {
            gradient_of_poly(&crate::poly::fornaess_defining_polynomial(*t), z)
        }
        DomainSpec::ExpGraph => Ok(vec![
            z[0].conj() * z[0].norm_sqr().exp(),
            Complex64::new(0.5, 0.0),
        ]),
        DomainSpec::Egg { kappa } => Ok(vec![
            kappa * z[0].conj() * (-kappa * z[0].norm_sqr()).exp(),
            z[1].conj(),
        ]),
        DomainSpec::Ball { center, .. } => {
            Ok(z.iter().zip(center).map(|(v, c)| (v - c).conj()).collect())
        }
        _ => gradient_fd(spec, z),
    }
}

fn gradient_of_poly(p: &HermitianPolynomial, z: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = p.dimension();
    let mut g = Vec::with_capacity(n);
    for j in 0..n {
        let mut a = vec![0u32; n];
        a[j] = 1;
        g.push(p.wirtinger_derivative(&a, &vec![0; n], z)?);
    }
    Ok(g)
}

fn gradient_fd(spec: &DomainSpec, z: &[Complex64]) -> Result<Vec<Complex64>> {
    let h = default_step(z);
    let f = |w: &[Complex64]| spec.defining_value(w).unwrap_or(f64::NAN);
    let mut g = Vec::with_capacity(z.len());
    for j in 0..z.len() {
        let fx = (probe(&f, z, j, h, 0.0, j, 0.0, 0.0)? - probe(&f, z, j, -h, 0.0, j, 0.0, 0.0)?)
            / (2.0 * h);
        let fy = (probe(&f, z, j, 0.0, h, j, 0.0, 0.0)? - probe(&f, z, j, 0.0, -h, j, 0.0, 0.0)?)
            / (2.0 * h);
        g.push(Complex64::new(0.5 * fx, -0.5 * fy));
    }
    Ok(g)
}

/// Levi form of the defining function of a catalog domain.
pub fn defining_levi(spec: &DomainSpec, z: &[Complex64], mode: DiffMode) -> Result<LeviForm> {
    if let DiffMode::FiniteDifference { h, richardson } = mode {
        let f = |w: &[Complex64]| spec.defining_value(w).unwrap_or(f64::NAN);
        return levi_form_fd(f, z, h, richardson);
    }
    let n = spec.dimension();
    match spec {
        DomainSpec::WbGraph { poly, .. } => {
            let inner = levi_form_poly(poly, &z[..n - 1])?;
            let mut matrix = DMatrix::zeros(n, n);
            for j in 0..n - 1 {
                for l in 0..n - 1 {
                    matrix[(j, l)] = inner.matrix[(j, l)];
                }
            }
            Ok(LeviForm {
                point: z.to_vec(),
                matrix,
            })
        }
        DomainSpec::KohnNirenberg => levi_form_poly(&crate::poly::kn_defining_polynomial(), z),
        DomainSpec::Fornaess { t } => {
            levi_form_poly(&crate::poly::fornaess_defining_polynomial(*t), z)
        }
        DomainSpec::ExpGraph => {
            let mut matrix = DMatrix::zeros(2, 2);
            let s = z[0].norm_sqr();
            matrix[(0, 0)] = Complex64::new(s.exp() * (1.0 + s), 0.0);
            Ok(LeviForm {
                point: z.to_vec(),
                matrix,
            })
        }
        DomainSpec::Egg { kappa } => {
            let mut matrix = DMatrix::zeros(2, 2);
            let s = z[0].norm_sqr();
            matrix[(0, 0)] =
                Complex64::new(kappa * (-kappa * s).exp() * (1.0 - kappa * s), 0.0);
            matrix[(1, 1)] = Complex64::new(1.0, 0.0);
            Ok(LeviForm {
                point: z.to_vec(),
                matrix,
            })
        }
        DomainSpec::Ball { .. } => Ok(LeviForm {
            point: z.to_vec(),
            matrix: DMatrix::identity(n, n),
        }),
        _ => defining_levi(spec, z, DiffMode::fd_richardson()),
    }
}

// ---------------------------------------------------------------------------
// boundary pseudoconvexity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, PartialEq)]
pub enum PseudoconvexityVerdict {
    Strong { min_tangential_eigenvalue: f64 },
    NotStrong { min_tangential_eigenvalue: f64 },
    GradientDegenerate { gradient_norm: f64 },
}

/// Levi form of rho at a boundary point restricted to the complex tangent
/// space { v : sum_j (d rho/dz_j) v_j = 0 }; strong iff the restricted
/// form has smallest eigenvalue > tol.
pub fn strong_pseudoconvexity_at(
    spec: &DomainSpec,
    p: &[Complex64],
    tol: f64,
) -> Result<PseudoconvexityVerdict> {
    let rho = spec.defining_value(p)?;
    if rho.abs() >= tol {
        return Err(Error::Evaluation {
            point: format!("{p:?}"),
            reason: format!("not a boundary point: rho = {rho}"),
        });
    }
    let grad = defining_gradient(spec, p)?;
    let gnorm: f64 = grad.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if gnorm < tol {
        return Ok(PseudoconvexityVerdict::GradientDegenerate { gradient_norm: gnorm });
    }
    let n = p.len();
    if n == 1 {
        // no complex tangent directions: vacuously strong
        return Ok(PseudoconvexityVerdict::Strong {
            min_tangential_eigenvalue: f64::INFINITY,
        });
    }
    // tangent space = Hermitian orthocomplement of conj(grad)
    let normal = DVector::from_iterator(n, grad.iter().map(|v| v.conj() / gnorm));
    let mut tangent: Vec<DVector<Complex64>> = Vec::with_capacity(n - 1);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = Complex64::new(1.0, 0.0);
        let mut v = &e - &normal * normal.dotc(&e);
        for t in &tangent {
            v -= t * t.dotc(&v);
        }
        let vn = v.norm();
        if vn > 1e-10 {
            tangent.push(v / Complex64::new(vn, 0.0));
            if tangent.len() == n - 1 {
                break;
            }
        }
    }
    let levi = defining_levi(spec, p, DiffMode::Analytic)?;
    let k = tangent.len();
    let mut restricted = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let mut acc = Complex64::default();
            for j in 0..n {
                for l in 0..n {
                    acc += tangent[a][j].conj() * levi.matrix[(j, l)] * tangent[b][l];
                }
            }
            restricted[(a, b)] = acc;
        }
    }
    let min_eig = min_hermitian_eigenvalue(&restricted);
    if min_eig > tol {
        Ok(PseudoconvexityVerdict::Strong {
            min_tangential_eigenvalue: min_eig,
        })
    } else {
        Ok(PseudoconvexityVerdict::NotStrong {
            min_tangential_eigenvalue: min_eig,
        })
    }
}
