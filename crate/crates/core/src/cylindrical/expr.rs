//! Expression trees for the functions `f` of smooth random variables.

use std::collections::BTreeMap;
use std::fmt;
use std::ops;

use serde::{Deserialize, Serialize};

use super::dual::{Dual, HyperDual, Real};
use crate::error::{Error, Result};

/// A differentiable function of variables `v_0, v_1, …`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, u32),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Logistic(Box<Expr>),
    /// `Σ_k c_k u^k`.
    Poly(Vec<f64>, Box<Expr>),
    /// C² clamp of `u` to about `±(c + 1/2)`; the identity on `[−c, c]`.
    SoftClip(f64, Box<Expr>),
    /// `ln(1 + e^u)`.
    Softplus(Box<Expr>),
}

/// Growth class of a function and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    /// The function and all derivatives are bounded.
    Bounded,
    /// Affine growth with bounded derivatives.
    Affine,
    /// At most polynomial growth of the function and its derivatives.
    Polynomial,
    /// Possibly exponential growth; integrability is not checked.
    Exponential,
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn pow(self, n: u32) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }

    pub fn logistic(self) -> Expr {
        Expr::Logistic(Box::new(self))
    }

    pub fn poly(coeffs: Vec<f64>, arg: Expr) -> Expr {
        Expr::Poly(coeffs, Box::new(arg))
    }

    pub fn soft_clip(self, level: f64) -> Expr {
        Expr::SoftClip(level, Box::new(self))
    }

    pub fn softplus(self) -> Expr {
        Expr::Softplus(Box::new(self))
    }

    /// Number of variables referenced (`1 + max index`).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(v) | Expr::Mul(v) => v.iter().map(Expr::arity).max().unwrap_or(0),
            Expr::Pow(e, _)
            | Expr::Exp(e)
            | Expr::Sin(e)
            | Expr::Cos(e)
            | Expr::Logistic(e)
            | Expr::Poly(_, e)
            | Expr::SoftClip(_, e)
            | Expr::Softplus(e) => e.arity(),
        }
    }

    /// Renames `v_i` to `v_{i + offset}`.
    pub fn shift_vars(&self, offset: usize) -> Expr {
        self.substitute(&|i| Expr::Var(i + offset))
    }

    /// Replaces each `v_i` by `sub(i)`.
    pub fn substitute(&self, sub: &dyn Fn(usize) -> Expr) -> Expr {
        let b = |e: &Expr| Box::new(e.substitute(sub));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => sub(*i),
            Expr::Add(v) => Expr::Add(v.iter().map(|e| e.substitute(sub)).collect()),
            Expr::Mul(v) => Expr::Mul(v.iter().map(|e| e.substitute(sub)).collect()),
            Expr::Pow(e, n) => Expr::Pow(b(e), *n),
            Expr::Exp(e) => Expr::Exp(b(e)),
            Expr::Sin(e) => Expr::Sin(b(e)),
            Expr::Cos(e) => Expr::Cos(b(e)),
            Expr::Logistic(e) => Expr::Logistic(b(e)),
            Expr::Poly(c, e) => Expr::Poly(c.clone(), b(e)),
            Expr::SoftClip(c, e) => Expr::SoftClip(*c, b(e)),
            Expr::Softplus(e) => Expr::Softplus(b(e)),
        }
    }

    pub fn eval<R: Real>(&self, x: &[R]) -> R {
        match self {
            Expr::Const(c) => R::constant(*c),
            Expr::Var(i) => x[*i],
            Expr::Add(v) => v.iter().fold(R::constant(0.0), |acc, e| acc + e.eval(x)),
            Expr::Mul(v) => v.iter().fold(R::constant(1.0), |acc, e| acc * e.eval(x)),
            Expr::Pow(e, n) => {
                let u = e.eval(x);
                let v = u.value();
                let n = *n as i32;
                let d1 = if n >= 1 { n as f64 * v.powi(n - 1) } else { 0.0 };
                let d2 = if n >= 2 { (n * (n - 1)) as f64 * v.powi(n - 2) } else { 0.0 };
                u.lift(v.powi(n), d1, d2)
            }
            Expr::Exp(e) => {
                let u = e.eval(x);
                let f = u.value().exp();
                u.lift(f, f, f)
            }
            Expr::Sin(e) => {
                let u = e.eval(x);
                let (s, c) = u.value().sin_cos();
                u.lift(s, c, -s)
            }
            Expr::Cos(e) => {
                let u = e.eval(x);
                let (s, c) = u.value().sin_cos();
                u.lift(c, -s, -c)
            }
            Expr::Logistic(e) => {
                let u = e.eval(x);
                let s = logistic(u.value());
                let d1 = s * (1.0 - s);
                u.lift(s, d1, d1 * (1.0 - 2.0 * s))
            }
            Expr::Poly(c, e) => {
                let u = e.eval(x);
                c.iter().rev().fold(R::constant(0.0), |acc, &k| acc * u + R::constant(k))
            }
            Expr::SoftClip(c, e) => {
                let u = e.eval(x);
                let (f, d1, d2) = soft_clip(*c, u.value());
                u.lift(f, d1, d2)
            }
            Expr::Softplus(e) => {
                let u = e.eval(x);
                let v = u.value();
                let s = logistic(v);
                u.lift(softplus(v), s, s * (1.0 - s))
            }
        }
    }

    pub fn growth(&self) -> Growth {
        use Growth::*;
        match self {
            Expr::Const(_) => Bounded,
            Expr::Var(_) => Affine,
            Expr::Add(v) => v.iter().map(Expr::growth).max().unwrap_or(Bounded),
            Expr::Mul(v) => {
                let g: Vec<Growth> = v.iter().map(Expr::growth).collect();
                if g.contains(&Exponential) {
                    Exponential
                } else if g.iter().all(|x| *x == Bounded) {
                    Bounded
                } else if g.iter().filter(|x| **x != Bounded).count() == 1
                    && g.contains(&Affine)
                    && v.iter().all(|e| matches!(e, Expr::Const(_)) || e.growth() == Affine)
                {
                    Affine
                } else {
                    Polynomial
                }
            }
            Expr::Pow(e, n) => match (e.growth(), n) {
                (_, 0) | (Bounded, _) => Bounded,
                (g, 1) => g,
                (Exponential, _) => Exponential,
                _ => Polynomial,
            },
            Expr::Poly(c, e) => {
                let deg = c.iter().rposition(|v| *v != 0.0).unwrap_or(0);
                match (e.growth(), deg) {
                    (_, 0) | (Bounded, _) => Bounded,
                    (g, 1) => g,
                    (Exponential, _) => Exponential,
                    _ => Polynomial,
                }
            }
            Expr::Sin(e) | Expr::Cos(e) | Expr::Logistic(e) | Expr::SoftClip(_, e) => match e.growth() {
                Bounded | Affine => Bounded,
                g => g,
            },
            Expr::Softplus(e) => e.growth(),
            Expr::Exp(e) => {
                if e.growth() == Bounded || e.is_coercive_below() {
                    Bounded
                } else {
                    Exponential
                }
            }
        }
    }

    /// Recognizes `c + Σ_k a_k g_k^{2n_k}` with `a_k < 0` and polynomial `g_k`,
    /// for which `exp(·)` is bounded with bounded derivatives.
    fn is_coercive_below(&self) -> bool {
        let negative_even = |e: &Expr| match e {
            Expr::Mul(v) => {
                let consts: f64 = v
                    .iter()
                    .filter_map(|x| if let Expr::Const(c) = x { Some(*c) } else { None })
                    .product();
                let rest: Vec<&Expr> = v.iter().filter(|x| !matches!(x, Expr::Const(_))).collect();
                consts < 0.0
                    && rest.len() == 1
                    && matches!(rest[0], Expr::Pow(g, n) if n % 2 == 0 && *n > 0 && g.is_polynomial())
            }
            _ => false,
        };
        match self {
            Expr::Add(v) => {
                v.iter().any(negative_even) && v.iter().all(|e| matches!(e, Expr::Const(_)) || negative_even(e))
            }
            e => negative_even(e),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => true,
            Expr::Add(v) | Expr::Mul(v) => v.iter().all(Expr::is_polynomial),
            Expr::Pow(e, _) | Expr::Poly(_, e) => e.is_polynomial(),
            _ => false,
        }
    }

    /// Expansion into monomials; fails on any non-polynomial node.
    pub fn to_polynomial(&self, arity: usize) -> Result<Polynomial> {
        Ok(match self {
            Expr::Const(c) => Polynomial::constant(arity, *c),
            Expr::Var(i) => Polynomial::variable(arity, *i),
            Expr::Add(v) => {
                let mut acc = Polynomial::constant(arity, 0.0);
                for e in v {
                    acc = acc.add(&e.to_polynomial(arity)?);
                }
                acc
            }
            Expr::Mul(v) => {
                let mut acc = Polynomial::constant(arity, 1.0);
                for e in v {
                    acc = acc.mul(&e.to_polynomial(arity)?);
                }
                acc
            }
            Expr::Pow(e, n) => e.to_polynomial(arity)?.pow(*n),
            Expr::Poly(c, e) => {
                let u = e.to_polynomial(arity)?;
                c.iter()
                    .rev()
                    .fold(Polynomial::constant(arity, 0.0), |acc, &k| acc.mul(&u).add(&Polynomial::constant(arity, k)))
            }
            other => return Err(Error::NotPolynomial(other.op_name().into())),
        })
    }

    fn op_name(&self) -> &'static str {
        match self {
            Expr::Const(_) => "const",
            Expr::Var(_) => "var",
            Expr::Add(_) => "add",
            Expr::Mul(_) => "mul",
            Expr::Pow(..) => "pow",
            Expr::Exp(_) => "exp",
            Expr::Sin(_) => "sin",
            Expr::Cos(_) => "cos",
            Expr::Logistic(_) => "logistic",
            Expr::Poly(..) => "poly",
            Expr::SoftClip(..) => "softclip",
            Expr::Softplus(_) => "softplus",
        }
    }
}

pub fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

/// Value and first two derivatives of the soft clip at level `c`.
///
/// On `[c, c+1]` the blend is `c + u − u³ + u⁴/2` in `u = v − c`, which meets
/// the identity and the constant `c + 1/2` with matching first and second
/// derivatives; the negative side is odd-symmetric.
pub fn soft_clip(c: f64, v: f64) -> (f64, f64, f64) {
    let a = v.abs();
    let s = v.signum();
    if a <= c {
        (v, 1.0, 0.0)
    } else if a >= c + 1.0 {
        (s * (c + 0.5), 0.0, 0.0)
    } else {
        let u = a - c;
        let f = c + u - u.powi(3) + 0.5 * u.powi(4);
        let d1 = 1.0 - 3.0 * u * u + 2.0 * u.powi(3);
        let d2 = -6.0 * u + 6.0 * u * u;
        (s * f, d1, s * d2)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        match self {
            Expr::Add(mut v) => {
                v.push(o);
                Expr::Add(v)
            }
            s => Expr::Add(vec![s, o]),
        }
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        match self {
            Expr::Mul(mut v) => {
                v.push(o);
                Expr::Mul(v)
            }
            s => Expr::Mul(vec![s, o]),
        }
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Mul(vec![Expr::Const(-1.0), self])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        self + (-o)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Expr], sep: &str| v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(sep);
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "v{i}"),
            Expr::Add(v) => write!(f, "({})", join(v, " + ")),
            Expr::Mul(v) => write!(f, "({})", join(v, " * ")),
            Expr::Pow(e, n) => write!(f, "{e}^{n}"),
            Expr::Poly(c, e) => write!(f, "poly{c:?}({e})"),
            Expr::SoftClip(c, e) => write!(f, "softclip[{c}]({e})"),
            other => {
                let arg = match other {
                    Expr::Exp(e) | Expr::Sin(e) | Expr::Cos(e) | Expr::Logistic(e) | Expr::Softplus(e) => e,
                    _ => unreachable!(),
                };
                write!(f, "{}({arg})", other.op_name())
            }
        }
    }
}

// JSON form: {"const": c}, {"var": i}, {"op": name, "args": [...], ...}
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExprRepr {
    Const {
        #[serde(rename = "const")]
        value: f64,
    },
    Var {
        var: usize,
    },
    Op {
        op: String,
        args: Vec<ExprRepr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coeffs: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level: Option<f64>,
    },
}

impl From<&Expr> for ExprRepr {
    fn from(e: &Expr) -> Self {
        let op = |e: &Expr, args: Vec<ExprRepr>| ExprRepr::Op {
            op: e.op_name().into(),
            args,
            n: None,
            coeffs: None,
            level: None,
        };
        match e {
            Expr::Const(c) => ExprRepr::Const { value: *c },
            Expr::Var(i) => ExprRepr::Var { var: *i },
            Expr::Add(v) | Expr::Mul(v) => op(e, v.iter().map(Into::into).collect()),
            Expr::Pow(a, n) => ExprRepr::Op {
                op: "pow".into(),
                args: vec![a.as_ref().into()],
                n: Some(*n),
                coeffs: None,
                level: None,
            },
            Expr::Poly(c, a) => ExprRepr::Op {
                op: "poly".into(),
                args: vec![a.as_ref().into()],
                n: None,
                coeffs: Some(c.clone()),
                level: None,
            },
            Expr::SoftClip(c, a) => ExprRepr::Op {
                op: "softclip".into(),
                args: vec![a.as_ref().into()],
                n: None,
                coeffs: None,
                level: Some(*c),
            },
            Expr::Exp(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Logistic(a) | Expr::Softplus(a) => {
                op(e, vec![a.as_ref().into()])
            }
        }
    }
}

impl TryFrom<ExprRepr> for Expr {
    type Error = Error;
    fn try_from(r: ExprRepr) -> Result<Self> {
        match r {
            ExprRepr::Const { value } => Ok(Expr::Const(value)),
            ExprRepr::Var { var } => Ok(Expr::Var(var)),
            ExprRepr::Op {
                op,
                args,
                n,
                coeffs,
                level,
            } => {
                let mut args: Vec<Expr> = args.into_iter().map(Expr::try_from).collect::<Result<_>>()?;
                let unary = |args: &mut Vec<Expr>| -> Result<Box<Expr>> {
                    if args.len() != 1 {
                        return Err(Error::InvalidArgument(format!("'{op}' takes exactly one argument")));
                    }
                    Ok(Box::new(args.pop().expect("length checked")))
                };
                Ok(match op.as_str() {
                    "add" => Expr::Add(args),
                    "mul" => Expr::Mul(args),
                    "pow" => Expr::Pow(
                        unary(&mut args)?,
                        n.ok_or_else(|| Error::InvalidArgument("'pow' needs an exponent 'n'".into()))?,
                    ),
                    "exp" => Expr::Exp(unary(&mut args)?),
                    "sin" => Expr::Sin(unary(&mut args)?),
                    "cos" => Expr::Cos(unary(&mut args)?),
                    "logistic" => Expr::Logistic(unary(&mut args)?),
                    "softplus" => Expr::Softplus(unary(&mut args)?),
                    "poly" => Expr::Poly(
                        coeffs.ok_or_else(|| Error::InvalidArgument("'poly' needs 'coeffs'".into()))?,
                        unary(&mut args)?,
                    ),
                    "softclip" => {
                        let c = level.ok_or_else(|| Error::InvalidArgument("'softclip' needs 'level'".into()))?;
                        if c.is_nan() || c <= 0.0 {
                            return Err(Error::InvalidArgument("soft clip level must be positive".into()));
                        }
                        Expr::SoftClip(c, unary(&mut args)?)
                    }
                    other => return Err(Error::InvalidArgument(format!("unknown op '{other}'"))),
                })
            }
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExprRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ExprRepr::deserialize(d)?;
        Expr::try_from(r).map_err(serde::de::Error::custom)
    }
}

/// A function `f: R^n → R` with its declared arity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FunctionRepr", into = "FunctionRepr")]
pub struct SmoothFunction {
    expr: Expr,
    arity: usize,
}

#[derive(Serialize, Deserialize)]
struct FunctionRepr {
    expr: Expr,
    arity: usize,
}

impl TryFrom<FunctionRepr> for SmoothFunction {
    type Error = Error;
    fn try_from(r: FunctionRepr) -> Result<Self> {
        SmoothFunction::new(r.expr, r.arity)
    }
}

impl From<SmoothFunction> for FunctionRepr {
    fn from(f: SmoothFunction) -> Self {
        FunctionRepr {
            expr: f.expr,
            arity: f.arity,
        }
    }
}

impl SmoothFunction {
    pub fn new(expr: Expr, arity: usize) -> Result<Self> {
        if expr.arity() > arity {
            return Err(Error::InvalidArgument(format!(
                "expression uses v{} but the function has arity {arity}",
                expr.arity() - 1
            )));
        }
        Ok(SmoothFunction { expr, arity })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn growth(&self) -> Growth {
        self.expr.growth()
    }

    /// Whether `f` and all its derivatives are bounded.
    pub fn is_bounded(&self) -> bool {
        self.growth() == Growth::Bounded
    }

    pub fn is_polynomial(&self) -> bool {
        self.expr.is_polynomial()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.expr.eval(x)
    }

    /// `∂_j f(x)` by one forward dual pass.
    pub fn partial(&self, j: usize, x: &[f64], scratch: &mut Vec<Dual>) -> f64 {
        scratch.clear();
        scratch.extend(x.iter().enumerate().map(|(i, v)| Dual::new(*v, if i == j { 1.0 } else { 0.0 })));
        self.expr.eval(scratch).d
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = Vec::with_capacity(x.len());
        (0..self.arity).map(|j| self.partial(j, x, &mut scratch)).collect()
    }

    /// `∂_i ∂_j f(x)` by one hyper-dual pass.
    pub fn second_partial(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        let xs: Vec<HyperDual> = x
            .iter()
            .enumerate()
            .map(|(k, v)| HyperDual::new(*v, (k == i) as u8 as f64, (k == j) as u8 as f64, 0.0))
            .collect();
        self.expr.eval(&xs).ab
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.arity)
            .map(|i| (0..self.arity).map(|j| self.second_partial(i, j, x)).collect())
            .collect()
    }

    pub fn to_polynomial(&self) -> Result<Polynomial> {
        self.expr.to_polynomial(self.arity)
    }
}

/// A multivariate polynomial as `exponents → coefficient`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    arity: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn constant(arity: usize, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(vec![0; arity], c);
        }
        Polynomial { arity, terms }
    }

    pub fn variable(arity: usize, i: usize) -> Self {
        let mut e = vec![0; arity];
        e[i] = 1;
        Polynomial {
            arity,
            terms: BTreeMap::from([(e, 1.0)]),
        }
    }

    pub fn monomial(exponents: Vec<u32>, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(exponents.clone(), c);
        }
        Polynomial {
            arity: exponents.len(),
            terms,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, o: &Polynomial) -> Polynomial {
        let mut terms = self.terms.clone();
        for (e, c) in &o.terms {
            *terms.entry(e.clone()).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        Polynomial {
            arity: self.arity,
            terms,
        }
    }

    pub fn mul(&self, o: &Polynomial) -> Polynomial {
        let mut terms = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                let e: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                *terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        terms.retain(|_, c: &mut f64| *c != 0.0);
        Polynomial {
            arity: self.arity,
            terms,
        }
    }

    /// `∂_j p`.
    pub fn partial(&self, j: usize) -> Polynomial {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[j] > 0 {
                let mut e2 = e.clone();
                e2[j] -= 1;
                *terms.entry(e2).or_insert(0.0) += c * e[j] as f64;
            }
        }
        Polynomial {
            arity: self.arity,
            terms,
        }
    }

    pub fn pow(&self, n: u32) -> Polynomial {
        (0..n).fold(Polynomial::constant(self.arity, 1.0), |acc, _| acc.mul(self))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(k, v)| v.powi(*k as i32)).product::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> Expr {
        Expr::var(i)
    }

    #[test]
    fn evaluation_and_gradients() {
        let f = SmoothFunction::new(v(0).sin() * v(1).cos(), 2).unwrap();
        let x = [0.3, -1.1];
        assert!((f.value(&x) - 0.3f64.sin() * (-1.1f64).cos()).abs() < 1e-15);
        let g = f.gradient(&x);
        assert!((g[0] - 0.3f64.cos() * (-1.1f64).cos()).abs() < 1e-15);
        assert!((g[1] + 0.3f64.sin() * (-1.1f64).sin()).abs() < 1e-15);
        let h = f.hessian(&x);
        assert!((h[0][1] + 0.3f64.cos() * (-1.1f64).sin()).abs() < 1e-15);
        assert_eq!(h[0][1], h[1][0]);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = SmoothFunction::new(
            Expr::poly(vec![1.0, -2.0, 0.5], v(0)) * v(1).logistic() + (v(0) * v(1)).softplus() + v(1).soft_clip(0.5),
            2,
        )
        .unwrap();
        for x in [[0.2, 0.7], [-1.3, 1.2], [0.9, -0.8]] {
            let g = f.gradient(&x);
            for j in 0..2 {
                let mut a = x;
                let mut b = x;
                a[j] += 1e-6;
                b[j] -= 1e-6;
                let fd = (f.value(&a) - f.value(&b)) / 2e-6;
                assert!((fd - g[j]).abs() < 1e-7, "{j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn soft_clip_is_c2() {
        let c = 2.0;
        for v0 in [c, c + 1.0, -c, -c - 1.0] {
            let lo = soft_clip(c, v0 - 1e-9);
            let hi = soft_clip(c, v0 + 1e-9);
            assert!((lo.0 - hi.0).abs() < 1e-8 && (lo.1 - hi.1).abs() < 1e-7 && (lo.2 - hi.2).abs() < 1e-7);
        }
        assert_eq!(soft_clip(c, 10.0).0, 2.5);
        assert_eq!(soft_clip(c, -1.5).0, -1.5);
    }

    #[test]
    fn growth_classes() {
        assert_eq!(v(0).sin().growth(), Growth::Bounded);
        assert_eq!(v(0).growth(), Growth::Affine);
        assert_eq!((Expr::constant(2.0) * v(0)).growth(), Growth::Affine);
        assert_eq!(v(0).pow(2).growth(), Growth::Polynomial);
        assert_eq!((v(0) * v(0).sin()).growth(), Growth::Polynomial);
        assert_eq!(v(0).exp().growth(), Growth::Exponential);
        assert_eq!((Expr::constant(-0.5) * v(0).pow(2)).exp().growth(), Growth::Bounded);
        assert_eq!((Expr::constant(0.25) * v(0).pow(2)).exp().growth(), Growth::Exponential);
        assert_eq!(v(0).softplus().growth(), Growth::Affine);
    }

    #[test]
    fn polynomial_expansion() {
        let e = (v(0) + v(1)).pow(2) - Expr::constant(1.0);
        let p = e.to_polynomial(2).unwrap();
        assert_eq!(p.degree(), 2);
        for x in [[0.3, 0.4], [-2.0, 1.5]] {
            assert!((p.eval(&x) - e.eval(&x)).abs() < 1e-14);
        }
        assert!(matches!(v(0).sin().to_polynomial(1), Err(Error::NotPolynomial(_))));
    }

    #[test]
    fn json_form() {
        let e: Expr = serde_json::from_str(r#"{"op":"sin","args":[{"var":0}]}"#).unwrap();
        assert_eq!(e, v(0).sin());
        let e = Expr::poly(vec![0.0, 1.0], v(1)).soft_clip(2.0) * Expr::constant(3.0) + v(0).pow(3);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<Expr>(&s).unwrap(), e);
        assert!(serde_json::from_str::<Expr>(r#"{"op":"tan","args":[{"var":0}]}"#).is_err());
        assert!(serde_json::from_str::<Expr>(r#"{"op":"pow","args":[{"var":0}]}"#).is_err());
    }
}
