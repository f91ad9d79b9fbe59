//! The monotone kernel map ψ that parameterizes every fractional operator.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub(crate) type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A strictly increasing C¹ map ψ on [a, b] together with its derivative ψ′.
///
/// Construction probes ψ′ > 0 and strict monotonicity of ψ on a 1024-node
/// grid; the map is immutable afterwards and cheap to clone (the callables
/// are shared).
#[derive(Clone)]
pub struct PsiMap {
    psi: RealFn,
    dpsi: RealFn,
    a: f64,
    b: f64,
}

impl fmt::Debug for PsiMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PsiMap")
            .field("a", &self.a)
            .field("b", &self.b)
            .finish()
    }
}

const PROBE_NODES: usize = 1024;
const INVERSE_TOL: f64 = 1e-13;

impl PsiMap {
    pub fn new(
        a: f64,
        b: f64,
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dpsi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Validation(format!(
                "psi map requires a < b, got a = {a}, b = {b}"
            )));
        }
        let map = Self {
            psi: Arc::new(psi),
            dpsi: Arc::new(dpsi),
            a,
            b,
        };
        let mut prev = (map.psi)(a);
        if !prev.is_finite() {
            return Err(Error::Validation("psi(a) is not finite".into()));
        }
        for i in 0..=PROBE_NODES {
            let t = a + (b - a) * i as f64 / PROBE_NODES as f64;
            let d = (map.dpsi)(t);
            if !(d > 0.0) {
                return Err(Error::Validation(format!(
                    "psi' must be positive on [a, b]; psi'({t}) = {d}"
                )));
            }
            if i > 0 {
                let v = (map.psi)(t);
                if !(v > prev) {
                    return Err(Error::Validation(format!(
                        "psi must be strictly increasing; psi({t}) = {v} does not exceed the previous probe {prev}"
                    )));
                }
                prev = v;
            }
        }
        Ok(map)
    }

    /// ψ(t) = t on [a, b].
    pub fn identity(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, |t| t, |_| 1.0)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.psi)(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        (self.dpsi)(t)
    }

    /// ψ⁻¹(u) by monotone bisection on [a, b] to 1e-13 (scaled by |b - a|).
    pub fn inverse(&self, u: f64) -> Result<f64> {
        let (ua, ub) = (self.eval(self.a), self.eval(self.b));
        let tol = INVERSE_TOL * (self.b - self.a).max(1.0);
        if u < ua - 1e-12 * (ub - ua) || u > ub + 1e-12 * (ub - ua) {
            return Err(Error::Domain(format!(
                "psi-inverse argument {u} outside image [{ua}, {ub}]"
            )));
        }
        let (mut lo, mut hi) = (self.a, self.b);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_roundtrip() {
        let m = PsiMap::identity(0.0, 2.0).unwrap();
        assert_eq!(m.eval(1.25), 1.25);
        assert_eq!(m.deriv(0.3), 1.0);
        assert_abs_diff_eq!(m.inverse(0.7).unwrap(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_map_inverse() {
        let m = PsiMap::new(0.0, 3.0, |t| (t + 1.0).sqrt(), |t| 0.5 / (t + 1.0).sqrt()).unwrap();
        let u = m.eval(2.0);
        assert_abs_diff_eq!(m.inverse(u).unwrap(), 2.0, epsilon = 1e-11);
    }

    #[test]
    fn rejects_decreasing_map() {
        assert!(PsiMap::new(0.0, 1.0, |t| -t, |_| -1.0).is_err());
        // positive derivative claimed, but actual values decrease
        assert!(PsiMap::new(0.0, 1.0, |t| -t, |_| 1.0).is_err());
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(PsiMap::identity(1.0, 1.0).is_err());
        assert!(PsiMap::identity(2.0, 1.0).is_err());
    }

    #[test]
    fn inverse_rejects_outside_image() {
        let m = PsiMap::identity(0.0, 1.0).unwrap();
        assert!(m.inverse(2.0).is_err());
    }
}
