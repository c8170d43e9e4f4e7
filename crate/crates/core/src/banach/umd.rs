use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BanachSpaceSpec;
use crate::error::{Error, Result};
use crate::rng;

/// Largest martingale length enumerated exactly (`2^12` sample points).
pub const UMD_DEPTH_LIMIT: usize = 12;

/// Result of [`umd_transform_ratio`]: an empirical lower bound for `β_{p,E}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmdEstimate {
    pub lower: f64,
    pub history: Vec<f64>,
    pub depth: usize,
    pub p: f64,
    pub seed: u64,
}

/// A Paley-Walsh martingale on `{-1,1}^n`: `d_k = ε_k v_k(ε_1..ε_{k-1})`.
#[derive(Debug, Clone)]
pub struct PaleyWalsh {
    m: usize,
    /// `values[k]` holds `2^k` vectors of length `m`, indexed by the prefix bits.
    values: Vec<Vec<f64>>,
}

impl PaleyWalsh {
    pub fn random(m: usize, depth: usize, seed: u64, stream: u64) -> Self {
        let mut r = rng::stream(seed, stream);
        let values = (0..depth)
            .map(|k| {
                let mut v = vec![0.0; m << k];
                rng::fill_standard_normal(&mut r, &mut v);
                v
            })
            .collect();
        PaleyWalsh { m, values }
    }

    pub fn depth(&self) -> usize {
        self.values.len()
    }

    /// `(E‖Σ_k s_k d_k‖^p)^{1/p}` by exact enumeration.
    pub fn transformed_moment(&self, signs: &[f64], space: &BanachSpaceSpec, p: f64) -> f64 {
        let n = self.depth();
        let mut acc = 0.0;
        let mut x = vec![0.0; self.m];
        for omega in 0..(1usize << n) {
            x.fill(0.0);
            for (k, (vals, s)) in self.values.iter().zip(signs).enumerate() {
                let eps = if omega >> k & 1 == 1 { 1.0 } else { -1.0 };
                let prefix = omega & ((1 << k) - 1);
                let v = &vals[prefix * self.m..(prefix + 1) * self.m];
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi += s * eps * vi;
                }
            }
            acc += space.norm(&x).powf(p);
        }
        (acc / (1usize << n) as f64).powf(1.0 / p)
    }

    /// Ratio of the transformed to the plain p-th moment.
    pub fn transform_ratio(&self, signs: &[f64], space: &BanachSpaceSpec, p: f64) -> f64 {
        let plus = vec![1.0; self.depth()];
        self.transformed_moment(signs, space, p) / self.transformed_moment(&plus, space, p)
    }
}

/// Empirical lower bound for the UMD constant `β_{p,E}`.
///
/// Each trial draws a Gaussian Paley-Walsh martingale of length `depth` and a
/// random sign sequence. Because a sign transform is an involution both
/// `r` and `1/r` are admissible ratios, so each trial contributes `max(r, 1/r)`.
pub fn umd_transform_ratio(space: &BanachSpaceSpec, p: f64, depth: usize, trials: usize, seed: u64) -> Result<UmdEstimate> {
    if depth > UMD_DEPTH_LIMIT {
        return Err(Error::DepthTooLarge {
            depth,
            limit: UMD_DEPTH_LIMIT,
        });
    }
    if depth == 0 || trials == 0 {
        return Err(Error::InvalidArgument("depth and trials must be at least 1".into()));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must be in (1, inf), got {p}")));
    }
    let ratios = rng::par_collect(trials, |t| {
        let mart = PaleyWalsh::random(space.m, depth, seed, 2 * t);
        let mut r = rng::stream(seed, 2 * t + 1);
        let signs: Vec<f64> = (0..depth).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let ratio = mart.transform_ratio(&signs, space, p);
        ratio.max(1.0 / ratio)
    });
    let mut best = 0.0f64;
    let history = ratios
        .iter()
        .map(|r| {
            best = best.max(*r);
            best
        })
        .collect();
    Ok(UmdEstimate {
        lower: best,
        history,
        depth,
        p,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hilbert_spaces_give_one() {
        for m in [1, 2, 3] {
            let e = umd_transform_ratio(&BanachSpaceSpec::hilbert(m), 2.0, 6, 20, 3).unwrap();
            assert!((e.lower - 1.0).abs() < 1e-12, "m = {m}: {}", e.lower);
        }
    }

    #[test]
    fn plus_signs_are_exactly_one() {
        let mart = PaleyWalsh::random(2, 5, 1, 0);
        let space = BanachSpaceSpec::lp(2, 1.0).unwrap();
        assert_eq!(mart.transform_ratio(&[1.0; 5], &space, 3.0), 1.0);
    }

    #[test]
    fn l1_exceeds_one() {
        let space = BanachSpaceSpec::lp(2, 1.0).unwrap();
        let e = umd_transform_ratio(&space, 2.0, 8, 20, 42).unwrap();
        assert!(e.lower > 1.0);
        assert!(e.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn depth_guard() {
        let space = BanachSpaceSpec::hilbert(1);
        assert!(matches!(
            umd_transform_ratio(&space, 2.0, 13, 1, 0),
            Err(Error::DepthTooLarge { depth: 13, limit: 12 })
        ));
        assert!(umd_transform_ratio(&space, 1.0, 4, 1, 0).is_err());
    }
}
