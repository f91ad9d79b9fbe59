//! Lagrangian descriptions: the integrand L and the partial derivatives the
//! optimality conditions consume.
//!
//! Slot conventions follow the functional signatures: the scalar form is
//! L(t, x, d) with d the ψ-Caputo derivative of x; the delay form is
//! L(t, x, x_τ, d); the high-order form is L(t, x, d₁, …, d_m); the
//! multi-variable form is L(t, x₁…x_m, d₁…d_m).

use std::sync::Arc;

use crate::error::{Error, Result};

pub type Fn3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type Fn4 = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
pub type FnSlice = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;
pub type FnMulti = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

/// Scalar Lagrangian L(t, x, d) with first partials and the optional second
/// partials needed by the Legendre condition.
#[derive(Clone)]
pub struct Lagrangian {
    pub l: Fn3,
    /// ∂L/∂x
    pub dx: Fn3,
    /// ∂L/∂d
    pub dd: Fn3,
    pub dxx: Option<Fn3>,
    pub dxd: Option<Fn3>,
    pub ddd: Option<Fn3>,
}

impl Lagrangian {
    pub fn new(
        l: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        dd: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            l: Arc::new(l),
            dx: Arc::new(dx),
            dd: Arc::new(dd),
            dxx: None,
            dxd: None,
            ddd: None,
        }
    }

    pub fn with_second_partials(
        mut self,
        dxx: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        dxd: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        ddd: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.dxx = Some(Arc::new(dxx));
        self.dxd = Some(Arc::new(dxd));
        self.ddd = Some(Arc::new(ddd));
        self
    }

    /// Checks the supplied first partials against central differences of L
    /// at `samples` quasi-random points of the box; relative tolerance 1e-5.
    pub fn validate_partials(
        &self,
        t_range: (f64, f64),
        x_range: (f64, f64),
        d_range: (f64, f64),
        samples: usize,
    ) -> Result<()> {
        let h = 1e-6;
        for i in 0..samples {
            let t = lerp(t_range, halton(i as u64 + 1, 2));
            let x = lerp(x_range, halton(i as u64 + 1, 3));
            let d = lerp(d_range, halton(i as u64 + 1, 5));
            let fd_x = ((self.l)(t, x + h, d) - (self.l)(t, x - h, d)) / (2.0 * h);
            let fd_d = ((self.l)(t, x, d + h) - (self.l)(t, x, d - h)) / (2.0 * h);
            let scale = 1.0 + fd_x.abs().max(fd_d.abs());
            if ((self.dx)(t, x, d) - fd_x).abs() > 1e-5 * scale {
                return Err(Error::Validation(format!(
                    "∂L/∂x disagrees with finite differences at (t,x,d)=({t},{x},{d})"
                )));
            }
            if ((self.dd)(t, x, d) - fd_d).abs() > 1e-5 * scale {
                return Err(Error::Validation(format!(
                    "∂L/∂d disagrees with finite differences at (t,x,d)=({t},{x},{d})"
                )));
            }
        }
        Ok(())
    }
}

/// Delay Lagrangian L(t, x, x_τ, d).
#[derive(Clone)]
pub struct DelayLagrangian {
    pub l: Fn4,
    /// ∂L/∂x (second slot)
    pub dx: Fn4,
    /// ∂L/∂x_τ (third slot)
    pub dxtau: Fn4,
    /// ∂L/∂d (fourth slot)
    pub dd: Fn4,
}

impl DelayLagrangian {
    pub fn new(
        l: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        dxtau: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        dd: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            l: Arc::new(l),
            dx: Arc::new(dx),
            dxtau: Arc::new(dxtau),
            dd: Arc::new(dd),
        }
    }
}

/// High-order Lagrangian L(t, x, d₁ … d_m).
#[derive(Clone)]
pub struct HighOrderLagrangian {
    pub l: FnSlice,
    /// ∂L/∂x
    pub dx: FnSlice,
    /// ∂L/∂d_n for n = 1..m
    pub dd: Vec<FnSlice>,
}

impl HighOrderLagrangian {
    pub fn arity(&self) -> usize {
        self.dd.len()
    }
}

/// Multi-variable Lagrangian L(t, x₁…x_m, d₁…d_m).
#[derive(Clone)]
pub struct MultiLagrangian {
    pub l: FnMulti,
    pub dx: Vec<FnMulti>,
    pub dd: Vec<FnMulti>,
}

impl MultiLagrangian {
    pub fn arity(&self) -> usize {
        self.dx.len()
    }

    /// Lifts a scalar Lagrangian to the m = 1 multi form.
    pub fn from_scalar(l: &Lagrangian) -> Self {
        let (f, dx, dd) = (l.l.clone(), l.dx.clone(), l.dd.clone());
        Self {
            l: Arc::new(move |t, xs: &[f64], ds: &[f64]| f(t, xs[0], ds[0])),
            dx: vec![Arc::new(move |t, xs: &[f64], ds: &[f64]| dx(t, xs[0], ds[0]))],
            dd: vec![Arc::new(move |t, xs: &[f64], ds: &[f64]| dd(t, xs[0], ds[0]))],
        }
    }
}

fn lerp(range: (f64, f64), w: f64) -> f64 {
    range.0 + (range.1 - range.0) * w
}

/// Halton low-discrepancy sequence member in (0, 1).
pub(crate) fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}
