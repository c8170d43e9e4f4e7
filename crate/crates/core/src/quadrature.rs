//! Gauss-Hermite quadrature for the standard Gaussian measure.
//!
//! Nodes come from the Golub-Welsch eigenproblem for the probabilists'
//! Hermite recurrence and are polished with Newton steps on the orthonormal
//! Hermite functions. Rules are cached per order.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default number of nodes per dimension.
pub const DEFAULT_ORDER: usize = 10;

/// Largest supported order.
pub const MAX_ORDER: usize = 1024;

/// An `n`-point rule with `Σ w_i g(x_i) ≈ E g(Z)`, `Z ~ N(0,1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal Hermite values `ĥ_{n-1}(x)`, `ĥ_n(x)` and `Σ_{k<n} ĥ_k(x)^2`,
/// returned with a common `10^{-100}` scaling exponent to survive large `x`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64, f64, i32) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sumsq = 0.0;
    let mut scale = 0i32;
    for k in 0..n {
        sumsq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            cur *= 1e-100;
            prev *= 1e-100;
            sumsq *= 1e-200;
            scale += 1;
        }
    }
    (prev, cur, sumsq, scale)
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "quadrature order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        let jacobi = DMatrix::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = order as f64;
        let mut weights = Vec::with_capacity(order);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (pm1, p, _, _) = hermite_orthonormal(order, *x);
                let dx = p / (n.sqrt() * pm1);
                if dx.is_finite() {
                    *x -= dx;
                }
            }
            let (_, _, sumsq, scale) = hermite_orthonormal(order, *x);
            let w = if scale == 0 {
                1.0 / sumsq
            } else {
                (-sumsq.ln() - 200.0 * scale as f64 * std::f64::consts::LN_10).exp()
            };
            weights.push(w);
        }
        // symmetrize to remove the last ulp of asymmetry
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ w_i g(x_i)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * g(*x)).sum()
    }
}

/// Cached rule of the given order.
pub fn rule(order: usize) -> Result<Arc<GaussHermite>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&order) {
        return Ok(r.clone());
    }
    let r = Arc::new(GaussHermite::new(order)?);
    cache.lock().unwrap().insert(order, r.clone());
    Ok(r)
}

/// Calls `f(z, w)` for every node of the `dim`-fold tensor rule, in lexicographic order.
pub fn for_each_tensor_node<F: FnMut(&[f64], f64)>(dim: usize, order: usize, mut f: F) -> Result<()> {
    let r = rule(order)?;
    if dim == 0 {
        f(&[], 1.0);
        return Ok(());
    }
    let mut idx = vec![0usize; dim];
    let mut z = vec![0.0; dim];
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            z[k] = r.nodes[i];
            w *= r.weights[i];
        }
        f(&z, w);
        let mut k = dim;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < order {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Tensor Gauss-Hermite approximation of `E g(Z)`, `Z ~ N(0, I_dim)`.
pub fn tensor_expect<F: FnMut(&[f64]) -> f64>(dim: usize, order: usize, mut g: F) -> Result<f64> {
    let mut acc = 0.0;
    for_each_tensor_node(dim, order, |z, w| acc += w * g(z))?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_moment(k: u32) -> f64 {
        // E Z^k
        if k % 2 == 1 {
            0.0
        } else {
            (1..k).step_by(2).map(|j| j as f64).product()
        }
    }

    #[test]
    fn small_rules_match_closed_forms() {
        let r = GaussHermite::new(2).unwrap();
        assert!((r.nodes[1] - 1.0).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        let r = GaussHermite::new(3).unwrap();
        assert!((r.nodes[2] - 3f64.sqrt()).abs() < 1e-14);
        assert!((r.weights[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((r.weights[0] - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_polynomials_below_twice_the_order() {
        for order in [1, 4, 10, 20] {
            let r = rule(order).unwrap();
            for k in 0..(2 * order as u32) {
                let q = r.expect(|x| x.powi(k as i32));
                let exact = double_factorial_moment(k);
                let scale = r.expect(|x| x.abs().powi(k as i32)).max(1.0);
                assert!((q - exact).abs() <= 1e-12 * scale, "order {order} moment {k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn characteristic_function() {
        // E cos(aZ) = exp(-a^2/2)
        let r = rule(20).unwrap();
        for a in [0.3, 1.0, 2.0] {
            let q = r.expect(|x| (a * x).cos());
            assert!((q - (-a * a / 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn high_orders_stay_finite() {
        let r = rule(400).unwrap();
        let total: f64 = r.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(r.weights.iter().all(|w| w.is_finite() && *w >= 0.0));
        let second = r.expect(|x| x * x);
        assert!((second - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tensor_rule_moments() {
        let v = tensor_expect(3, 4, |z| z[0] * z[0] * z[1] * z[1] + z[2].powi(4)).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        assert_eq!(tensor_expect(0, 4, |_| 2.5).unwrap(), 2.5);
        assert!(GaussHermite::new(0).is_err());
    }
}
