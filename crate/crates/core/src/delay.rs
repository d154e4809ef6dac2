//! Catch-up probability and the deviation inequality under network delay.
//!
//! With blocks arriving at rate `lambda` and one-way delays `d_ah`
//! (attacker to honest) and `d_ha`, an attacker trailing by one block wins a
//! two-block race with probability at least
//! `q = alpha^2 exp(-(1 - alpha) lambda (d_ah + d_ha))`. Waiting at `(k-1, k)`
//! instead of adopting then pays at least `(k + 1) q - rho` over honest
//! adoption.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams {
    pub alpha: f64,
    pub lambda: f64,
    pub d_ah: f64,
    pub d_ha: f64,
}

impl DelayParams {
    pub fn new(alpha: f64, lambda: f64, d_ah: f64, d_ha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1) (got {alpha})")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive (got {lambda})")));
        }
        for (name, d) in [("d-ah", d_ah), ("d-ha", d_ha)] {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative (got {d})")));
            }
        }
        Ok(Self {
            alpha,
            lambda,
            d_ah,
            d_ha,
        })
    }

    fn damping(&self) -> f64 {
        (-(1.0 - self.alpha) * self.lambda * (self.d_ah + self.d_ha)).exp()
    }
}

/// `q = alpha^2 exp(-(1 - alpha) lambda (d_ah + d_ha))`.
pub fn catchup_probability(p: &DelayParams) -> f64 {
    p.alpha * p.alpha * p.damping()
}

/// The double integral behind [`catchup_probability`], evaluated by nested
/// adaptive Simpson quadrature after mapping `[0, inf)` onto `[0, 1)`.
pub fn catchup_probability_quadrature(p: &DelayParams, tol: f64) -> f64 {
    let (al, l) = (p.alpha * p.lambda, p.lambda);
    let link = (-(1.0 - p.alpha) * l * (p.d_ah + p.d_ha)).exp();
    // density of the attacker's two blocks times the honest network staying silent
    let f = |t: f64, s: f64| al * al * (-al * (t + s)).exp() * (-(1.0 - p.alpha) * l * (t + s)).exp() * link;
    let mapped = |u: f64| {
        let x = u / (1.0 - u);
        (x, 1.0 / ((1.0 - u) * (1.0 - u)))
    };
    let inner = |t: f64| {
        adaptive_simpson(
            &|v: f64| {
                if v >= 1.0 {
                    return 0.0;
                }
                let (s, ds) = mapped(v);
                f(t, s) * ds
            },
            0.0,
            1.0,
            tol * 0.1,
        )
    };
    adaptive_simpson(
        &|u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let (t, dt) = mapped(u);
            inner(t) * dt
        },
        0.0,
        1.0,
        tol,
    )
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationGain {
    /// `(k + 1) q - rho`.
    pub lower_bound: f64,
    /// `q (1 - rho)(k + 1) - (1 - q) rho (k + 1) + rho k`.
    pub full: f64,
}

/// Advantage of trying to catch up from `(k-1, k)` over adopting, at
/// baseline revenue `rho`.
pub fn deviation_gain(k: u64, q: f64, rho: f64) -> Result<DeviationGain> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("q and rho must lie in [0, 1] (got {q}, {rho})")));
    }
    let k1 = (k + 1) as f64;
    Ok(DeviationGain {
        lower_bound: k1 * q - rho,
        full: q * (1.0 - rho) * k1 - (1.0 - q) * rho * k1 + rho * k as f64,
    })
}

/// Smallest `k <= k_cap` with `(k + 1) q > rho`.
pub fn min_profitable_k(p: &DelayParams, rho: f64, k_cap: u64) -> Result<Option<u64>> {
    if k_cap == 0 {
        return Err(Error::InvalidParameter("k cap must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1] (got {rho})")));
    }
    let q = catchup_probability(p);
    if q <= 0.0 {
        return Ok(None);
    }
    let profitable = |k: u64| (k + 1) as f64 * q - rho > 0.0;
    let guess = (rho / q - 1.0).floor().max(0.0);
    if guess >= k_cap as f64 {
        return Ok(profitable(k_cap).then_some(k_cap));
    }
    let mut k = (guess as u64).max(1);
    // floor() lands within a step of the answer; settle rounding either way
    while k > 1 && profitable(k - 1) {
        k -= 1;
    }
    while !profitable(k) {
        k += 1;
        if k > k_cap {
            return Ok(None);
        }
    }
    Ok(Some(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub q: f64,
    pub min_k: Option<u64>,
    pub gain_at_min_k: Option<f64>,
}

pub fn analyze(p: &DelayParams, rho: f64, k_cap: u64) -> Result<DelayReport> {
    let q = catchup_probability(p);
    let min_k = min_profitable_k(p, rho, k_cap)?;
    let gain_at_min_k = match min_k {
        Some(k) => Some(deviation_gain(k, q, rho)?.lower_bound),
        None => None,
    };
    Ok(DelayReport {
        q,
        min_k,
        gain_at_min_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(q: f64, rho: f64, cap: u64) -> Option<u64> {
        (1..=cap).find(|&k| (k + 1) as f64 * q - rho > 0.0)
    }

    #[test]
    fn zero_delay_is_alpha_squared() {
        let p = DelayParams::new(0.3, 2.0, 0.0, 0.0).unwrap();
        assert!((catchup_probability(&p) - 0.09).abs() < 1e-15);
        assert!((catchup_probability_quadrature(&p, 1e-10) - 0.09).abs() < 1e-8);
    }

    #[test]
    fn examples() {
        let p = DelayParams::new(0.3, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(min_profitable_k(&p, 0.3, DEFAULT_K_CAP).unwrap(), Some(3));
        assert_eq!(scan(0.09, 0.3, 100), Some(3));

        // (1 - alpha) lambda d = 1
        let p = DelayParams::new(0.1, 1.0, 1.0 / 0.9, 0.0).unwrap();
        let q = catchup_probability(&p);
        assert!((q - 0.01 * (-1f64).exp()).abs() < 1e-15);
        assert_eq!(min_profitable_k(&p, 0.1, DEFAULT_K_CAP).unwrap(), Some(27));
        assert_eq!(scan(q, 0.1, 1000), Some(27));

        let p = DelayParams::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(min_profitable_k(&p, 0.1, u64::MAX).unwrap(), None);
    }

    #[test]
    fn deviation_gain_values() {
        let g = deviation_gain(3, 0.09, 0.3).unwrap();
        assert!((g.lower_bound - 0.06).abs() < 1e-12);
        assert!(deviation_gain(2, 0.09, 0.3).unwrap().lower_bound < 0.0);
        assert!((deviation_gain(1, 0.5, 0.3).unwrap().lower_bound - 0.7).abs() < 1e-12);
        assert!(deviation_gain(0, 0.5, 0.3).is_err());
    }

    #[test]
    fn cap_is_respected() {
        let p = DelayParams::new(0.01, 1.0, 0.0, 0.0).unwrap();
        // q = 1e-4, rho = 0.5 needs k = 5000
        assert_eq!(min_profitable_k(&p, 0.5, 4999).unwrap(), None);
        assert_eq!(min_profitable_k(&p, 0.5, 5000).unwrap(), Some(5000));
    }
}
