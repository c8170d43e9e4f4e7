//! The target space `E = R^m` with an `l^p` norm, gamma-radonifying operators
//! into it, operator families and UMD transform constants.

mod family;
mod gamma;
mod umd;

pub use family::{gamma_bound_estimate, gaussian_matrix, lift_check, GammaBoundEstimate, LiftReport, OperatorFamily};
pub use gamma::{
    gamma_norm, gamma_norm_matrix, gamma_norm_sq_matrix, trace_pairing, GammaMode, GammaOperator,
};
pub use umd::{umd_transform_ratio, PaleyWalsh, UmdEstimate, UMD_DEPTH_LIMIT};
pub(crate) use gamma::spectral_factor;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The exponent of an `l^p` norm, `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NormTag(f64);

impl NormTag {
    pub const L1: NormTag = NormTag(1.0);
    pub const L2: NormTag = NormTag(2.0);
    pub const LINF: NormTag = NormTag(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidArgument(format!("norm exponent must be in [1, inf], got {p}")));
        }
        Ok(NormTag(p))
    }

    pub fn p(&self) -> f64 {
        self.0
    }

    /// Conjugate exponent `q` with `1/p + 1/q = 1`.
    pub fn conjugate(&self) -> NormTag {
        let p = self.0;
        if p == 1.0 {
            NormTag::LINF
        } else if p.is_infinite() {
            NormTag::L1
        } else {
            NormTag(p / (p - 1.0))
        }
    }

    pub fn is_hilbert(&self) -> bool {
        self.0 == 2.0
    }
}

impl fmt::Display for NormTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "linf")
        } else {
            write!(f, "l{}", self.0)
        }
    }
}

impl FromStr for NormTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let rest = s
            .strip_prefix('l')
            .ok_or_else(|| Error::InvalidArgument(format!("norm tag `{s}` must look like l1, l2, l3.5 or linf")))?;
        if rest == "inf" {
            return Ok(NormTag::LINF);
        }
        let p: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("cannot parse norm exponent in `{s}`")))?;
        NormTag::new(p)
    }
}

impl TryFrom<String> for NormTag {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NormTag> for String {
    fn from(t: NormTag) -> String {
        t.to_string()
    }
}

/// `E = (R^m, ‖·‖_p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanachSpaceSpec {
    pub m: usize,
    pub norm: NormTag,
}

impl BanachSpaceSpec {
    pub fn new(m: usize, norm: NormTag) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("dimension m must be positive".into()));
        }
        Ok(BanachSpaceSpec { m, norm })
    }

    pub fn lp(m: usize, p: f64) -> Result<Self> {
        Self::new(m, NormTag::new(p)?)
    }

    pub fn hilbert(m: usize) -> Self {
        BanachSpaceSpec { m: m.max(1), norm: NormTag::L2 }
    }

    pub fn is_hilbert(&self) -> bool {
        self.norm.is_hilbert()
    }

    /// The dual space `E* = (R^m, ‖·‖_q)` under the Euclidean pairing.
    pub fn dual(&self) -> BanachSpaceSpec {
        BanachSpaceSpec {
            m: self.m,
            norm: self.norm.conjugate(),
        }
    }

    pub fn check_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::dims(self.m, x.len()));
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        lp_norm(x, self.norm.p())
    }

    /// Upper bound for `‖T‖` as an operator `self → target`, exact for
    /// `l2 → l2`, `l1 → l1` and `linf → linf`.
    pub fn operator_norm_bound(&self, t: &DMatrix<f64>, target: &BanachSpaceSpec) -> Result<f64> {
        if t.ncols() != self.m || t.nrows() != target.m {
            return Err(Error::ShapeMismatch(format!(
                "operator is {}x{}, expected {}x{}",
                t.nrows(),
                t.ncols(),
                target.m,
                self.m
            )));
        }
        let (p, q) = (self.norm.p(), target.norm.p());
        if p == 1.0 && q == 1.0 {
            return Ok(max_abs_column_sum(t));
        }
        if p.is_infinite() && q.is_infinite() {
            return Ok(max_abs_row_sum(t));
        }
        // ‖T x‖_q ≤ a ‖T x‖_2 ≤ a σ_max ‖x‖_2 ≤ a σ_max b ‖x‖_p
        let a = (target.m as f64).powf((1.0 / q - 0.5).max(0.0));
        let b = (self.m as f64).powf((0.5 - 1.0 / p).max(0.0));
        Ok(a * b * spectral_norm(t))
    }
}

pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p.is_infinite() {
        x.iter().fold(0.0, |a, v| a.max(v.abs()))
    } else {
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        scale * x.iter().map(|v| (v.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Largest singular value.
pub fn spectral_norm(t: &DMatrix<f64>) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    t.clone().svd(false, false).singular_values.max()
}

fn max_abs_column_sum(t: &DMatrix<f64>) -> f64 {
    t.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn max_abs_row_sum(t: &DMatrix<f64>) -> f64 {
    t.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norm_tags_round_trip() {
        for s in ["l1", "l2", "linf", "l3.5"] {
            let t: NormTag = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!("l0.5".parse::<NormTag>().is_err());
        assert!("2".parse::<NormTag>().is_err());
        assert_eq!(NormTag::L1.conjugate(), NormTag::LINF);
        assert_eq!(NormTag::new(3.0).unwrap().conjugate().p(), 1.5);
        let spec: BanachSpaceSpec = serde_json::from_str(r#"{"m":3,"norm":"linf"}"#).unwrap();
        assert_eq!(spec.dual().norm, NormTag::L1);
    }

    #[test]
    fn norms_of_simple_vectors() {
        let x = [3.0, -4.0];
        assert_eq!(lp_norm(&x, 1.0), 7.0);
        assert_eq!(lp_norm(&x, 2.0), 5.0);
        assert_eq!(lp_norm(&x, f64::INFINITY), 4.0);
        assert!((lp_norm(&x, 3.0) - 91f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn operator_norm_bounds() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let l1 = BanachSpaceSpec::lp(2, 1.0).unwrap();
        let linf = BanachSpaceSpec::lp(2, f64::INFINITY).unwrap();
        assert_eq!(l1.operator_norm_bound(&t, &l1).unwrap(), 4.0);
        assert_eq!(linf.operator_norm_bound(&t, &linf).unwrap(), 3.5);
        let id = DMatrix::<f64>::identity(2, 2);
        let h = BanachSpaceSpec::hilbert(2);
        assert!((h.operator_norm_bound(&id, &h).unwrap() - 1.0).abs() < 1e-15);
        assert!(h.operator_norm_bound(&DMatrix::zeros(3, 2), &h).is_err());
    }

    proptest! {
        #[test]
        fn norm_axioms(
            x in prop::collection::vec(-5.0f64..5.0, 3),
            y in prop::collection::vec(-5.0f64..5.0, 3),
            c in -3.0f64..3.0,
            p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0, f64::INFINITY]),
        ) {
            let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            prop_assert!(lp_norm(&s, p) <= lp_norm(&x, p) + lp_norm(&y, p) + 1e-12);
            let cx: Vec<f64> = x.iter().map(|a| c * a).collect();
            prop_assert!((lp_norm(&cx, p) - c.abs() * lp_norm(&x, p)).abs() <= 1e-12 * (1.0 + lp_norm(&cx, p)));
            prop_assert_eq!(lp_norm(&[0.0; 3], p), 0.0);
        }

        #[test]
        fn operator_bound_dominates_ratios(
            t in prop::collection::vec(-2.0f64..2.0, 6),
            x in prop::collection::vec(-2.0f64..2.0, 3),
            p in prop::sample::select(vec![1.0, 1.5, 2.0, 4.0, f64::INFINITY]),
        ) {
            let e = BanachSpaceSpec::lp(3, p).unwrap();
            let f = BanachSpaceSpec::lp(2, p).unwrap();
            let tm = DMatrix::from_row_slice(2, 3, &t);
            let tx = &tm * nalgebra::DVector::from_column_slice(&x);
            let bound = e.operator_norm_bound(&tm, &f).unwrap();
            prop_assert!(f.norm(tx.as_slice()) <= bound * e.norm(&x) + 1e-12);
        }
    }
}
