//! Forward-mode automatic differentiation.

use std::ops::{Add, Mul, Neg, Sub};

/// Scalar types an expression can be evaluated over.
///
/// Every non-arithmetic node is applied through [`Real::lift`], which needs
/// the node's value and its first two derivatives at the current point.
pub trait Real: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn constant(c: f64) -> Self;
    fn value(self) -> f64;
    /// `φ(self)` given `φ(v)`, `φ'(v)`, `φ''(v)` at `v = self.value()`.
    fn lift(self, f: f64, d1: f64, d2: f64) -> Self;
}

impl Real for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn lift(self, f: f64, _d1: f64, _d2: f64) -> Self {
        f
    }
}

/// `v + d ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.v * o.d + self.d * o.v)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl Real for Dual {
    fn constant(c: f64) -> Self {
        Dual::new(c, 0.0)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn lift(self, f: f64, d1: f64, _d2: f64) -> Self {
        Dual::new(f, d1 * self.d)
    }
}

/// `v + a ε₁ + b ε₂ + ab ε₁ε₂` with `ε₁² = ε₂² = 0`; carries one mixed second derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub v: f64,
    pub a: f64,
    pub b: f64,
    pub ab: f64,
}

impl HyperDual {
    pub fn new(v: f64, a: f64, b: f64, ab: f64) -> Self {
        HyperDual { v, a, b, ab }
    }
}

impl Add for HyperDual {
    type Output = HyperDual;
    fn add(self, o: HyperDual) -> HyperDual {
        HyperDual::new(self.v + o.v, self.a + o.a, self.b + o.b, self.ab + o.ab)
    }
}

impl Sub for HyperDual {
    type Output = HyperDual;
    fn sub(self, o: HyperDual) -> HyperDual {
        HyperDual::new(self.v - o.v, self.a - o.a, self.b - o.b, self.ab - o.ab)
    }
}

impl Mul for HyperDual {
    type Output = HyperDual;
    fn mul(self, o: HyperDual) -> HyperDual {
        HyperDual::new(
            self.v * o.v,
            self.v * o.a + self.a * o.v,
            self.v * o.b + self.b * o.v,
            self.v * o.ab + self.a * o.b + self.b * o.a + self.ab * o.v,
        )
    }
}

impl Neg for HyperDual {
    type Output = HyperDual;
    fn neg(self) -> HyperDual {
        HyperDual::new(-self.v, -self.a, -self.b, -self.ab)
    }
}

impl Real for HyperDual {
    fn constant(c: f64) -> Self {
        HyperDual::new(c, 0.0, 0.0, 0.0)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn lift(self, f: f64, d1: f64, d2: f64) -> Self {
        HyperDual::new(f, d1 * self.a, d1 * self.b, d1 * self.ab + d2 * self.a * self.b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube<R: Real>(x: R) -> R {
        x * x * x
    }

    #[test]
    fn dual_and_hyperdual_derivatives() {
        let d = cube(Dual::new(2.0, 1.0));
        assert_eq!((d.v, d.d), (8.0, 12.0));
        let h = cube(HyperDual::new(2.0, 1.0, 1.0, 0.0));
        assert_eq!((h.v, h.a, h.b, h.ab), (8.0, 12.0, 12.0, 12.0));
        let s = HyperDual::new(0.3, 1.0, 1.0, 0.0).lift(0.3f64.sin(), 0.3f64.cos(), -0.3f64.sin());
        assert!((s.ab + 0.3f64.sin()).abs() < 1e-15);
    }
}
