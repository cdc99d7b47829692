//! Smoothed absolute value `|p|_k = sqrt(p^2 + k^2)` and its antiderivative.
//!
//! `k = 0` is handled on its own branch everywhere so that the degenerate
//! problem never evaluates `asinh(p / 0)`.

use crate::error::{Error, Result};

/// The smoothing level `kappa >= 0`, validated once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegAbs {
    kappa: f64,
}

impl RegAbs {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Argument(format!(
                "kappa must be finite and nonnegative, got {kappa}"
            )));
        }
        Ok(Self { kappa })
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    pub fn abs(&self, p: f64) -> f64 {
        if self.kappa == 0.0 {
            p.abs()
        } else {
            p.hypot(self.kappa)
        }
    }

    /// `int_0^p |y|_k dy`.
    pub fn flux(&self, p: f64) -> f64 {
        let k = self.kappa;
        if k == 0.0 {
            return 0.5 * p * p.abs();
        }
        0.5 * (p * p.hypot(k) + k * k * stable_asinh(p / k))
    }

    /// Secant slope `flux(p) / p`, extended by its limit `kappa` at `p = 0`.
    ///
    /// This is the frozen diffusion coefficient that makes
    /// `coef(p) * p == flux(p)` hold at the linearization point.
    pub fn secant(&self, p: f64) -> f64 {
        let k = self.kappa;
        if k == 0.0 {
            return 0.5 * p.abs();
        }
        let t = p / k;
        0.5 * (p.hypot(k) + k * asinh_over_t(t))
    }

    /// `d|p|_k / dp = p / |p|_k`; for `kappa = 0` the sign function with
    /// `sign(0) = 0`.
    pub fn abs_derivative(&self, p: f64) -> f64 {
        if self.kappa == 0.0 {
            if p == 0.0 {
                0.0
            } else {
                p.signum()
            }
        } else {
            p / p.hypot(self.kappa)
        }
    }
}

pub fn abs_kappa(p: f64, kappa: f64) -> Result<f64> {
    Ok(RegAbs::new(kappa)?.abs(p))
}

pub fn flux_kappa(p: f64, kappa: f64) -> Result<f64> {
    Ok(RegAbs::new(kappa)?.flux(p))
}

/// Upper bound `kappa |p|` on `|flux_kappa(p, kappa) - flux_kappa(p, 0)|`.
pub fn flux_kappa_error_bound(p: f64, kappa: f64) -> f64 {
    kappa * p.abs()
}

/// `asinh` without overflow for large arguments and without cancellation
/// for negative ones.
fn stable_asinh(t: f64) -> f64 {
    let a = t.abs();
    let r = if a < 1.0 {
        (a + a * a / (1.0 + (1.0 + a * a).sqrt())).ln_1p()
    } else {
        a.ln() + (1.0 + (1.0 + (1.0 / a) * (1.0 / a)).sqrt()).ln()
    };
    r.copysign(t)
}

/// `asinh(t) / t` with the removable singularity at `t = 0`.
fn asinh_over_t(t: f64) -> f64 {
    let a = t.abs();
    if a < 1e-4 {
        // asinh(t)/t = 1 - t^2/6 + 3 t^4/40 - ...
        let t2 = a * a;
        1.0 - t2 / 6.0 + 3.0 * t2 * t2 / 40.0
    } else {
        stable_asinh(a) / a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_kappa_values() {
        assert_eq!(abs_kappa(0.0, 0.3).unwrap(), 0.3);
        assert_eq!(abs_kappa(3.0, 4.0).unwrap(), 5.0);
        for p in [-2.0, 0.0, 7.0] {
            assert_eq!(abs_kappa(p, 0.0).unwrap(), f64::abs(p));
        }
        assert!(abs_kappa(1.0, -0.1).is_err());
        assert!(abs_kappa(1.0, f64::NAN).is_err());
    }

    #[test]
    fn flux_kappa_values() {
        assert_eq!(flux_kappa(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(flux_kappa(1.0, 0.0).unwrap(), 0.5);
        // (sqrt(2) + asinh(1)) / 2
        assert!((flux_kappa(1.0, 1.0).unwrap() - 1.147794).abs() < 1e-5);
        assert!(flux_kappa(1.0, -1.0).is_err());
    }

    #[test]
    fn error_bound_examples() {
        assert_eq!(flux_kappa_error_bound(5.0, 0.0), 0.0);
        let gap = flux_kappa(1.0, 1.0).unwrap() - flux_kappa(1.0, 0.0).unwrap();
        assert!((gap - 0.647794).abs() < 1e-5);
        assert!(gap <= flux_kappa_error_bound(1.0, 1.0));
        let bound = flux_kappa_error_bound(-2.0, 0.5);
        assert_eq!(bound, 1.0);
        let gap = (flux_kappa(-2.0, 0.5).unwrap() - flux_kappa(-2.0, 0.0).unwrap()).abs();
        assert!(gap <= bound, "gap = {gap}");
    }

    #[test]
    fn stable_asinh_matches_std() {
        for t in [
            -1e300, -1e8, -3.0, -1.0, -1e-9, 0.0, 1e-9, 0.5, 1.0, 42.0, 1e300,
        ] {
            let want = f64::asinh(t);
            let got = stable_asinh(t);
            assert!(
                (got - want).abs() <= 1e-15 * want.abs().max(1e-300) + 1e-300,
                "t = {t}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn flux_is_finite_for_extreme_ratios() {
        let r = RegAbs::new(1e-12).unwrap();
        for p in [-1e6, -1.0, 1e-20, 1e6] {
            assert!(r.flux(p).is_finite());
            assert!(r.secant(p).is_finite());
        }
    }

    #[test]
    fn secant_times_p_is_flux() {
        for k in [0.0, 1e-3, 0.1, 1.0] {
            let r = RegAbs::new(k).unwrap();
            for p in [-3.0, -0.2, -1e-6, 1e-6, 0.4, 5.0] {
                let lhs = r.secant(p) * p;
                assert!((lhs - r.flux(p)).abs() <= 1e-14 * (1.0 + r.flux(p).abs()));
            }
            assert_eq!(r.secant(0.0), k);
        }
    }

    #[test]
    fn abs_derivative_is_bounded_by_one() {
        let r = RegAbs::new(0.2).unwrap();
        for p in [-10.0, -0.1, 0.0, 0.1, 10.0] {
            assert!(r.abs_derivative(p).abs() <= 1.0);
        }
        assert_eq!(RegAbs::new(0.0).unwrap().abs_derivative(0.0), 0.0);
    }
}
