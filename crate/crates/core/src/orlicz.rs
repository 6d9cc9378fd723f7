//! Orlicz functions, their generalized inverses, and the resilience radii
//! they induce.

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};

/// A convex, non-decreasing `psi: [0, inf) -> [0, inf)` with `psi(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrliczFunction {
    /// `x^k`, `k >= 1` (bounded k-th moment).
    Power { k: f64 },
    /// `e^x - 1` (sub-exponential).
    Exponential,
    /// `e^(x^2) - 1` (sub-Gaussian).
    GaussianExp,
}

impl OrliczFunction {
    pub fn power(k: f64) -> Result<Self> {
        if !(k >= 1.0 && k.is_finite()) {
            return domain_err(format!("power Orlicz function needs k >= 1, got {k}"));
        }
        Ok(Self::Power { k })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        psi_eval(*self, x)
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        psi_inverse(*self, y)
    }

    #[inline]
    fn eval_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Power { k } => {
                if k == 2.0 {
                    x * x
                } else {
                    x.powf(k)
                }
            }
            Self::Exponential => x.exp_m1(),
            Self::GaussianExp => (x * x).exp_m1(),
        }
    }
}

pub fn psi_eval(psi: OrliczFunction, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return domain_err(format!("Orlicz functions are defined on [0, inf), got {x}"));
    }
    Ok(psi.eval_unchecked(x))
}

/// Generalized inverse `inf { x : psi(x) > y }`. All supported kinds are
/// continuous and strictly increasing, so this is the ordinary inverse.
pub fn psi_inverse(psi: OrliczFunction, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return domain_err(format!("Orlicz inverse is defined on [0, inf), got {y}"));
    }
    Ok(match psi {
        OrliczFunction::Power { k } => y.powf(1.0 / k),
        OrliczFunction::Exponential => y.ln_1p(),
        OrliczFunction::GaussianExp => y.ln_1p().sqrt(),
    })
}

/// `rho(eps) = eps * psi^{-1}(1 / eps)`, with `rho(0) = 0`.
pub fn resilience_radius(psi: OrliczFunction, eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return domain_err(format!("contamination level must lie in [0, 1), got {eps}"));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    Ok(eps * psi_inverse(psi, 1.0 / eps)?)
}

/// Empirical Orlicz norm `inf { t > 0 : mean psi(|x_i| / t) <= 1 }`, solved by
/// bisection to a relative width of `1e-12`.
pub fn orlicz_norm_scalar(values: &[f64], psi: OrliczFunction) -> Result<f64> {
    if values.is_empty() {
        return domain_err("Orlicz norm of an empty sample");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return domain_err("Orlicz norm of a non-finite sample");
    }
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok(0.0);
    }
    let n = values.len() as f64;
    let excess = |t: f64| values.iter().map(|v| psi.eval_unchecked(v.abs() / t)).sum::<f64>() / n;

    // At `lo` the largest term alone contributes psi(psi^{-1}(n)) / n = 1.
    let mut lo = max_abs / psi_inverse(psi, n)?;
    let mut hi = 2.0 * max_abs;
    while excess(lo) < 1.0 {
        lo *= 0.5;
    }
    while excess(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..300 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// A resilience budget `rho(eps) = scale * eps * psi^{-1}(1/eps)`. For
/// regression families the residual and design scale factors are kept
/// alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResilienceSpec {
    pub psi: OrliczFunction,
    pub scale: f64,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
}

impl ResilienceSpec {
    pub fn new(psi: OrliczFunction, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("resilience scale must be positive, got {scale}")));
        }
        Ok(Self {
            psi,
            scale,
            sigma1: None,
            sigma2: None,
        })
    }

    pub fn with_regression_scales(mut self, sigma1: f64, sigma2: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma2 > 0.0) {
            return domain_err("regression scale factors must be positive");
        }
        self.sigma1 = Some(sigma1);
        self.sigma2 = Some(sigma2);
        Ok(self)
    }

    pub fn radius(&self, eps: f64) -> Result<f64> {
        Ok(self.scale * resilience_radius(self.psi, eps)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const KINDS: [OrliczFunction; 4] = [
        OrliczFunction::Power { k: 2.0 },
        OrliczFunction::Power { k: 3.5 },
        OrliczFunction::Exponential,
        OrliczFunction::GaussianExp,
    ];

    #[test]
    fn eval_examples() {
        assert_eq!(psi_eval(OrliczFunction::Power { k: 2.0 }, 3.0).unwrap(), 9.0);
        assert_eq!(psi_eval(OrliczFunction::Exponential, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            psi_eval(OrliczFunction::GaussianExp, 1.0).unwrap(),
            std::f64::consts::E - 1.0,
            max_relative = 1e-15
        );
        assert!(psi_eval(OrliczFunction::Exponential, -1e-3).is_err());
        assert!(psi_eval(OrliczFunction::Exponential, f64::NAN).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_relative_eq!(psi_inverse(OrliczFunction::Power { k: 2.0 }, 9.0).unwrap(), 3.0);
        assert_eq!(psi_inverse(OrliczFunction::Exponential, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            psi_inverse(OrliczFunction::Exponential, std::f64::consts::E - 1.0).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert!(psi_inverse(OrliczFunction::GaussianExp, -1.0).is_err());
    }

    #[test]
    fn radius_examples() {
        for psi in KINDS {
            assert_eq!(resilience_radius(psi, 0.0).unwrap(), 0.0);
        }
        assert_relative_eq!(
            resilience_radius(OrliczFunction::Power { k: 2.0 }, 0.04).unwrap(),
            0.2,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            resilience_radius(OrliczFunction::Exponential, 0.1).unwrap(),
            0.1 * 11f64.ln(),
            max_relative = 1e-14
        );
        assert!(resilience_radius(OrliczFunction::Exponential, 1.0).is_err());
        assert!(resilience_radius(OrliczFunction::Exponential, -0.1).is_err());
    }

    #[test]
    fn radius_non_decreasing() {
        for psi in KINDS {
            let mut prev = 0.0;
            for i in 1..=500 {
                let eps = i as f64 / 1000.0;
                let r = resilience_radius(psi, eps).unwrap();
                assert!(r >= prev, "{psi:?} at {eps}");
                prev = r;
            }
        }
    }

    #[test]
    fn norm_examples() {
        let sq = OrliczFunction::Power { k: 2.0 };
        assert_relative_eq!(orlicz_norm_scalar(&[2.0, 2.0, 2.0], sq).unwrap(), 2.0, max_relative = 1e-9);
        for psi in KINDS {
            assert_eq!(orlicz_norm_scalar(&[0.0, 0.0], psi).unwrap(), 0.0);
        }
        assert_relative_eq!(orlicz_norm_scalar(&[1.0, 3.0], sq).unwrap(), 5f64.sqrt(), max_relative = 1e-9);
        assert!(orlicz_norm_scalar(&[], sq).is_err());
    }

    #[test]
    fn power_k_validation() {
        assert!(OrliczFunction::power(0.5).is_err());
        assert!(OrliczFunction::power(1.0).is_ok());
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    proptest! {
        #[test]
        fn midpoint_convex_and_monotone(x1 in 0.0f64..20.0, x2 in 0.0f64..20.0) {
            for psi in KINDS {
                let mid = psi.eval(0.5 * (x1 + x2)).unwrap();
                let avg = 0.5 * (psi.eval(x1).unwrap() + psi.eval(x2).unwrap());
                prop_assert!(mid <= avg * (1.0 + 1e-12) || mid == avg);
                let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
                prop_assert!(psi.eval(lo).unwrap() <= psi.eval(hi).unwrap());
            }
        }

        #[test]
        fn inverse_consistency(log_y in -6.0f64..6.0) {
            let y = 10f64.powf(log_y);
            for psi in KINDS {
                let back = psi.eval(psi.inverse(y).unwrap()).unwrap();
                prop_assert!(rel_close(back, y, 1e-9), "{:?}: {} vs {}", psi, back, y);
            }
        }

        #[test]
        fn bisection_hits_the_constraint(values in prop::collection::vec(-50.0f64..50.0, 1..40)) {
            prop_assume!(values.iter().any(|v| v.abs() > 1e-6));
            for psi in KINDS {
                let t = orlicz_norm_scalar(&values, psi).unwrap();
                let m = values.iter().map(|v| psi.eval(v.abs() / t).unwrap()).sum::<f64>() / values.len() as f64;
                prop_assert!((m - 1.0).abs() <= 1e-6, "{:?}: mean {}", psi, m);
            }
        }

        #[test]
        fn scale_equivariance(values in prop::collection::vec(-10.0f64..10.0, 1..30), c in 0.01f64..100.0) {
            prop_assume!(values.iter().any(|v| v.abs() > 1e-3));
            let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
            for psi in KINDS {
                let a = orlicz_norm_scalar(&scaled, psi).unwrap();
                let b = c * orlicz_norm_scalar(&values, psi).unwrap();
                prop_assert!(rel_close(a, b, 1e-8), "{:?}: {} vs {}", psi, a, b);
            }
        }
    }
}
