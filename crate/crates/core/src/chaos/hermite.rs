//! Probabilists' Hermite polynomials `He_n`.

/// `n!` as a float (exact up to `n = 22`).
pub fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// `He_n(x)` by the three-term recurrence `He_{n+1} = x He_n − n He_{n−1}`.
pub fn he(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `[He_0(x), …, He_n(x)]`.
pub fn he_all(n: u32, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n {
        let next = x * out[k as usize] - k as f64 * out[k as usize - 1];
        out.push(next);
    }
    out
}

/// Linearization `He_a He_b = Σ_k C(a,k) C(b,k) k! He_{a+b−2k}` as `(degree, coefficient)` pairs.
pub fn linearize(a: u32, b: u32) -> Vec<(u32, f64)> {
    (0..=a.min(b))
        .map(|k| (a + b - 2 * k, binomial(a, k) * binomial(b, k) * factorial(k)))
        .collect()
}

/// Space-time Hermite polynomial `H_n(x, u) = u^{n/2} He_n(x / √u)`, with `H_n(x, 0) = x^n`.
pub fn space_time(n: u32, x: f64, u: f64) -> f64 {
    // H_{k+1} = x H_k − k u H_{k−1}
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * u * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_polynomials() {
        let x = 0.7;
        assert_eq!(he(0, x), 1.0);
        assert_eq!(he(1, x), x);
        assert!((he(2, x) - (x * x - 1.0)).abs() < 1e-15);
        assert!((he(3, x) - (x.powi(3) - 3.0 * x)).abs() < 1e-15);
        assert!((he(4, x) - (x.powi(4) - 6.0 * x * x + 3.0)).abs() < 1e-14);
        assert_eq!(he_all(4, x)[4], he(4, x));
    }

    #[test]
    fn linearization_matches_pointwise_products() {
        for a in 0..6 {
            for b in 0..6 {
                for x in [-1.3, 0.2, 2.1] {
                    let lhs = he(a, x) * he(b, x);
                    let rhs: f64 = linearize(a, b).iter().map(|(n, c)| c * he(*n, x)).sum();
                    assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
                }
            }
        }
        assert_eq!(linearize(1, 1), vec![(2, 1.0), (0, 1.0)]);
    }

    #[test]
    fn space_time_scaling() {
        let (x, u) = (0.9f64, 0.4f64);
        for n in 0..6 {
            let direct = u.powf(n as f64 / 2.0) * he(n, x / u.sqrt());
            assert!((space_time(n, x, u) - direct).abs() < 1e-13);
        }
        assert_eq!(space_time(3, 2.0, 0.0), 8.0);
        assert_eq!(binomial(6, 2), 15.0);
    }
}
