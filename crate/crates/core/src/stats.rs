//! Estimators, standard errors and statistical gates.

use serde::{Deserialize, Serialize};

/// Width of the two-sided statistical gates, in standard errors.
pub const SIGMA_GATE: f64 = 3.0;

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
            samples: 0,
            seed: 0,
        }
    }

    /// Half-width of the `k`-sigma band.
    pub fn halfwidth(&self, k: f64) -> f64 {
        k * self.std_error
    }

    /// Whether `target` lies inside the `k`-sigma band (inclusive, with an absolute floor).
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= self.halfwidth(k) + 1e-12 * (1.0 + target.abs())
    }
}

/// Sample mean and its standard error (`s / sqrt(n)`).
///
/// For the sample mean the delete-one jackknife standard error coincides
/// with this classical formula.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn estimate(values: &[f64], seed: u64) -> Estimate {
    let (value, std_error) = mean_and_se(values);
    Estimate {
        value,
        std_error,
        samples: values.len(),
        seed,
    }
}

/// Delete-one jackknife standard error of `stat(mean(a), mean(b))` for paired samples.
pub fn jackknife_pair<F>(a: &[f64], b: &[f64], stat: F) -> (f64, f64)
where
    F: Fn(f64, f64) -> f64,
{
    let n = a.len();
    assert_eq!(n, b.len());
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let full = stat(sa / n as f64, sb / n as f64);
    if n < 2 {
        return (full, f64::INFINITY);
    }
    let m = (n - 1) as f64;
    let loo: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| stat((sa - x) / m, (sb - y) / m))
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>() * (n as f64 - 1.0) / n as f64;
    (full, var.sqrt())
}

/// Paired gate: the mean of `lhs - rhs` must be within `k` standard errors of zero.
pub fn paired_difference(lhs: &[f64], rhs: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    mean_and_se(&diffs)
}

/// Least-squares slope of `log(err)` against `log(n)`, negated so that
/// `err ~ n^{-s}` yields `s`.
pub fn loglog_rate(ns: &[f64], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errs)
        .filter(|(_, e)| **e > 0.0)
        .map(|(n, e)| (n.ln(), e.ln()))
        .collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

/// Number of consecutive increases in a sequence that should be decreasing.
pub fn monotone_violations(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(x)
}

/// How an identity is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CheckMode {
    /// Exact chaos computation.
    Chaos,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Both sides of an identity and the gate applied to them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Zero for exact comparisons.
    pub samples: usize,
}

impl Comparison {
    /// `|lhs - rhs| <= tolerance`.
    pub fn exact(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let diff = (lhs - rhs).abs();
        Comparison {
            lhs,
            rhs,
            diff,
            tolerance,
            pass: diff <= tolerance,
            samples: 0,
        }
    }

    /// Paired samples of both sides; gate at [`SIGMA_GATE`] standard errors of the difference.
    pub fn paired(lhs: &[f64], rhs: &[f64]) -> Self {
        let (l, _) = mean_and_se(lhs);
        let (r, _) = mean_and_se(rhs);
        let (d, se) = paired_difference(lhs, rhs);
        let tolerance = SIGMA_GATE * se + 1e-12 * (1.0 + r.abs());
        Comparison {
            lhs: l,
            rhs: r,
            diff: d.abs(),
            tolerance,
            pass: d.abs() <= tolerance,
            samples: lhs.len(),
        }
    }

    /// An estimate against a known value.
    pub fn against(est: &Estimate, target: f64) -> Self {
        let diff = (est.value - target).abs();
        let tolerance = est.halfwidth(SIGMA_GATE) + 1e-12 * (1.0 + target.abs());
        Comparison {
            lhs: est.value,
            rhs: target,
            diff,
            tolerance,
            pass: diff <= tolerance,
            samples: est.samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se_of_constant_sample() {
        let (m, se) = mean_and_se(&[2.0; 10]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn jackknife_of_mean_matches_classical() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let b = vec![1.0; 50];
        let (v, se) = jackknife_pair(&a, &b, |x, y| x / y);
        let (m, se0) = mean_and_se(&a);
        assert!((v - m).abs() < 1e-12);
        assert!((se - se0).abs() < 1e-12);
    }

    #[test]
    fn rate_of_power_law() {
        let ns = [4.0, 8.0, 16.0, 32.0];
        let errs: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        assert!((loglog_rate(&ns, &errs) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // Phi(0.1) from tables: 0.539827837277029
        assert!((normal_cdf(0.1) - 0.539_827_837_277_029).abs() < 1e-12);
    }
}
