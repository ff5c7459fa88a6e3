//! Legendre polynomials and associated Legendre functions.
//!
//! Sign convention: the Condon–Shortley phase `(-1)^m` is **not** included,
//! so `P_1^1(x) = +sqrt(1 - x²)`. Every product used by the solver has the
//! form `P_n^m(x) P_n^m(x0)`, which does not depend on the convention.

use crate::error::{Error, Result};

fn check_x(x: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("Legendre argument must lie in [-1, 1], got {x}")))
    }
}

/// `P_0(x) ..= P_{n_max}(x)` by the three-term recurrence.
pub fn legendre_polynomials(n_max: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n_max + 1);
    p.push(1.0);
    if n_max >= 1 {
        p.push(x);
    }
    for n in 1..n_max {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p
}

/// Associated Legendre function `P_n^m(x)` (no Condon–Shortley phase).
pub fn legendre_p(n: usize, m: usize, x: f64) -> Result<f64> {
    check_x(x)?;
    if m > n {
        return Err(Error::Domain(format!("order m = {m} exceeds degree n = {n}")));
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    // P_m^m = (2m-1)!! s^m
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if n == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for l in (m + 2)..=n {
        let next = ((2 * l - 1) as f64 * x * cur - (l + m - 1) as f64 * prev) / (l - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `sqrt((n-m)!/(n+m)!)·P_n^m(x)`; stays finite for large degrees.
pub fn legendre_p_normalized(n: usize, m: usize, x: f64) -> Result<f64> {
    check_x(x)?;
    if m > n {
        return Err(Error::Domain(format!("order m = {m} exceeds degree n = {n}")));
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        let kf = k as f64;
        pmm *= s * ((2.0 * kf - 1.0) / (2.0 * kf)).sqrt();
    }
    if n == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * ((2 * m + 1) as f64).sqrt() * pmm;
    let mf = m as f64;
    for l in (m + 2)..=n {
        let lf = l as f64;
        let a = (2.0 * lf - 1.0) * x;
        let b = ((lf + mf - 1.0) * (lf - mf - 1.0)).sqrt();
        let next = (a * cur - b * prev) / ((lf + mf) * (lf - mf)).sqrt();
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gauss_legendre;

    #[test]
    fn endpoint_and_small_cases() {
        for n in 0..30 {
            assert!((legendre_p(n, 0, 1.0).unwrap() - 1.0).abs() < 1e-12);
            assert!((legendre_polynomials(n, 1.0)[n] - 1.0).abs() < 1e-12);
        }
        assert!((legendre_p(2, 0, 0.5).unwrap() + 0.125).abs() < 1e-15);
        assert_eq!(legendre_p(1, 1, 0.0).unwrap(), 1.0);
        assert!(legendre_p(2, 0, 1.5).is_err());
        assert!(legendre_p(1, 2, 0.5).is_err());
    }

    #[test]
    fn normalized_matches_factorial_ratio() {
        let x = 0.3;
        for n in 0..15 {
            for m in 0..=n {
                let mut ratio = 1.0;
                for k in (n - m + 1)..=(n + m) {
                    ratio /= k as f64;
                }
                let a = legendre_p(n, m, x).unwrap() * ratio.sqrt();
                let b = legendre_p_normalized(n, m, x).unwrap();
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn orthogonality() {
        let (nodes, weights) = gauss_legendre(40);
        for n in 0..=20 {
            for k in 0..=20 {
                let integral: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&x, &w)| {
                        let p = legendre_polynomials(20, x);
                        w * p[n] * p[k]
                    })
                    .sum();
                let expect = if n == k { 2.0 / (2 * n + 1) as f64 } else { 0.0 };
                assert!((integral - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn addition_theorem_is_convention_free() {
        // sum_m eps_m (n-m)!/(n+m)! P_n^m(x) P_n^m(x0) cos(m dphi) = P_n(cos gamma)
        let (t, t0, dphi) = (0.4f64, 1.9f64, 2.2f64);
        let cg = t.cos() * t0.cos() + t.sin() * t0.sin() * dphi.cos();
        for n in 0..25 {
            let mut sum = 0.0;
            for m in 0..=n {
                let eps = if m == 0 { 1.0 } else { 2.0 };
                let a = legendre_p_normalized(n, m, t.cos()).unwrap();
                let b = legendre_p_normalized(n, m, t0.cos()).unwrap();
                // flipping the phase of both factors leaves the product unchanged
                let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
                sum += eps * (sign * a) * (sign * b) * (m as f64 * dphi).cos();
            }
            let pn = legendre_polynomials(n, cg)[n];
            assert!((sum - pn).abs() < 1e-12, "n={n}");
        }
    }
}
