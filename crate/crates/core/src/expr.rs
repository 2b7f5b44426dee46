//! Closed-form holomorphic expression subset: compositions of
//! polynomials, reciprocals, exponentials and principal rational powers,
//! with exact symbolic Wirtinger derivatives and a JSON wire form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A holomorphic map evaluable on points of C^n. Implementations provide
/// exact derivatives where possible; the default falls back to central
/// differences, which are O(h^2)-accurate for holomorphic functions.
pub trait HoloMap: Send + Sync {
    fn eval(&self, z: &[Complex64]) -> Result<Complex64>;

    fn deriv(&self, z: &[Complex64], j: usize) -> Result<Complex64> {
        let norm: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let h = 1e-5 * (1.0 + norm);
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[j] += Complex64::new(h, 0.0);
        zm[j] -= Complex64::new(h, 0.0);
        Ok((self.eval(&zp)? - self.eval(&zm)?) / (2.0 * h))
    }

    /// Directional derivative sum_j v_j dF/dz_j at z.
    fn directional_deriv(&self, z: &[Complex64], v: &[Complex64]) -> Result<Complex64> {
        let mut acc = Complex64::default();
        for (j, vj) in v.iter().enumerate() {
            if vj.norm() > 0.0 {
                acc += vj * self.deriv(z, j)?;
            }
        }
        Ok(acc)
    }
}

/// Reduced rational exponent; den > 1 selects the principal branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: i64,
    pub den: u32,
}

impl Ratio {
    pub fn int(num: i64) -> Self {
        Self { num, den: 1 }
    }

    pub fn new(num: i64, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidDomain("exponent denominator 0".into()));
        }
        let g = gcd(num.unsigned_abs(), u64::from(den));
        Ok(Self {
            num: num / g as i64,
            den: (u64::from(den) / g) as u32,
        })
    }

    fn as_f64(self) -> f64 {
        self.num as f64 / f64::from(self.den)
    }

    fn minus_one(self) -> Self {
        Ratio {
            num: self.num - i64::from(self.den),
            den: self.den,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Coord(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, Ratio),
    Recip(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn constant(re: f64, im: f64) -> Self {
        Expr::Const(Complex64::new(re, im))
    }

    pub fn coord(j: usize) -> Self {
        Expr::Coord(j)
    }

    pub fn add(terms: Vec<Expr>) -> Self {
        Expr::Add(terms)
    }

    pub fn mul(factors: Vec<Expr>) -> Self {
        Expr::Mul(factors)
    }

    pub fn neg(self) -> Self {
        Expr::Mul(vec![Expr::constant(-1.0, 0.0), self])
    }

    pub fn sub(self, other: Expr) -> Self {
        Expr::Add(vec![self, other.neg()])
    }

    pub fn recip(self) -> Self {
        Expr::Recip(Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn pow(self, r: Ratio) -> Self {
        Expr::Pow(Box::new(self), r)
    }

    /// Largest coordinate index used, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Coord(j) => Some(*j),
            Expr::Add(v) | Expr::Mul(v) => v.iter().filter_map(Expr::max_coord).max(),
            Expr::Pow(e, _) | Expr::Recip(e) | Expr::Exp(e) => e.max_coord(),
        }
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if let Some(m) = self.max_coord() {
            if m >= dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: m + 1,
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Coord(j) => {
                if *j >= z.len() {
                    return Err(Error::DimensionMismatch {
                        expected: j + 1,
                        got: z.len(),
                    });
                }
                z[*j]
            }
            Expr::Add(terms) => {
                let mut acc = Complex64::default();
                for t in terms {
                    acc += t.eval(z)?;
                }
                acc
            }
            Expr::Mul(factors) => {
                let mut acc = Complex64::new(1.0, 0.0);
                for f in factors {
                    acc *= f.eval(z)?;
                }
                acc
            }
            Expr::Pow(e, r) => {
                let base = e.eval(z)?;
                if r.den == 1 {
                    if r.num >= 0 {
                        base.powu(r.num as u32)
                    } else {
                        base.powi(r.num as i32)
                    }
                } else {
                    base.powf(r.as_f64())
                }
            }
            Expr::Recip(e) => {
                let v = e.eval(z)?;
                if v.norm() == 0.0 {
                    return Err(Error::Evaluation {
                        point: format!("{z:?}"),
                        reason: "reciprocal of zero".into(),
                    });
                }
                v.inv()
            }
            Expr::Exp(e) => e.eval(z)?.exp(),
        };
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Evaluation {
                point: format!("{z:?}"),
                reason: "non-finite expression value".into(),
            });
        }
        Ok(v)
    }

    /// Exact symbolic d/dz_j.
    pub fn derivative(&self, j: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::constant(0.0, 0.0),
            Expr::Coord(i) => {
                if *i == j {
                    Expr::constant(1.0, 0.0)
                } else {
                    Expr::constant(0.0, 0.0)
                }
            }
            Expr::Add(terms) => Expr::Add(terms.iter().map(|t| t.derivative(j)).collect()),
            Expr::Mul(factors) => {
                let mut sum = Vec::with_capacity(factors.len());
                for (i, _) in factors.iter().enumerate() {
                    let mut prod = Vec::with_capacity(factors.len());
                    for (k, f) in factors.iter().enumerate() {
                        prod.push(if k == i { f.derivative(j) } else { f.clone() });
                    }
                    sum.push(Expr::Mul(prod));
                }
                Expr::Add(sum)
            }
            Expr::Pow(e, r) => Expr::Mul(vec![
                Expr::constant(r.as_f64(), 0.0),
                Expr::Pow(e.clone(), r.minus_one()),
                e.derivative(j),
            ]),
            Expr::Recip(e) => Expr::Mul(vec![
                Expr::constant(-1.0, 0.0),
                e.derivative(j),
                Expr::Recip(e.clone()).pow(Ratio::int(2)),
            ]),
            Expr::Exp(e) => Expr::Mul(vec![e.derivative(j), self.clone()]),
        }
    }
}

impl HoloMap for Expr {
    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        Expr::eval(self, z)
    }

    fn deriv(&self, z: &[Complex64], j: usize) -> Result<Complex64> {
        self.derivative(j).eval(z)
    }
}

// ---------------------------------------------------------------------------
// JSON wire form
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprJson {
    pub op: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<ExprJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub den: Option<u32>,
}

impl Expr {
    pub fn from_json_value(j: &ExprJson) -> Result<Self> {
        let expect_args = |n: usize| -> Result<()> {
            if j.args.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!(
                    "op `{}` expects {n} argument(s), got {}",
                    j.op,
                    j.args.len()
                )))
            }
        };
        Ok(match j.op.as_str() {
            "const" => {
                expect_args(0)?;
                Expr::constant(j.re.unwrap_or(0.0), j.im.unwrap_or(0.0))
            }
            "coord" => {
                expect_args(0)?;
                Expr::Coord(j.index.ok_or_else(|| {
                    Error::InvalidDomain("coord requires `index`".into())
                })?)
            }
            "add" | "mul" => {
                if j.args.is_empty() {
                    return Err(Error::InvalidDomain(format!("op `{}` needs args", j.op)));
                }
                let args: Vec<Expr> = j
                    .args
                    .iter()
                    .map(Expr::from_json_value)
                    .collect::<Result<_>>()?;
                if j.op == "add" {
                    Expr::Add(args)
                } else {
                    Expr::Mul(args)
                }
            }
            "pow" => {
                expect_args(1)?;
                let num = j
                    .num
                    .ok_or_else(|| Error::InvalidDomain("pow requires `num`".into()))?;
                let den = j.den.unwrap_or(1);
                Expr::Pow(
                    Box::new(Expr::from_json_value(&j.args[0])?),
                    Ratio::new(num, den)?,
                )
            }
            "recip" => {
                expect_args(1)?;
                Expr::Recip(Box::new(Expr::from_json_value(&j.args[0])?))
            }
            "exp" => {
                expect_args(1)?;
                Expr::Exp(Box::new(Expr::from_json_value(&j.args[0])?))
            }
            other => {
                return Err(Error::InvalidDomain(format!("unknown expression op `{other}`")))
            }
        })
    }

    pub fn to_json_value(&self) -> ExprJson {
        let blank = || ExprJson {
            op: String::new(),
            args: vec![],
            re: None,
            im: None,
            index: None,
            num: None,
            den: None,
        };
        let mut j = blank();
        match self {
            Expr::Const(c) => {
                j.op = "const".into();
                j.re = Some(c.re);
                j.im = Some(c.im);
            }
            Expr::Coord(i) => {
                j.op = "coord".into();
                j.index = Some(*i);
            }
            Expr::Add(terms) => {
                j.op = "add".into();
                j.args = terms.iter().map(Expr::to_json_value).collect();
            }
            Expr::Mul(factors) => {
                j.op = "mul".into();
                j.args = factors.iter().map(Expr::to_json_value).collect();
            }
            Expr::Pow(e, r) => {
                j.op = "pow".into();
                j.args = vec![e.to_json_value()];
                j.num = Some(r.num);
                j.den = Some(r.den);
            }
            Expr::Recip(e) => {
                j.op = "recip".into();
                j.args = vec![e.to_json_value()];
            }
            Expr::Exp(e) => {
                j.op = "exp".into();
                j.args = vec![e.to_json_value()];
            }
        }
        j
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ExprJson = serde_json::from_str(text)?;
        Self::from_json_value(&j)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("expr serializes")
    }
}
