//! Quadrature grids for the product-integration operators.

use crate::error::{Error, Result};
use crate::psi::PsiMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridScheme {
    /// Nodes equally spaced in the ψ-image; makes the product weights
    /// translation invariant, so whole-table evaluations reuse one weight
    /// vector.
    UniformInPsi,
    /// Nodes equally spaced in t; diagnostic use.
    UniformInT,
}

/// A strictly increasing node set t₀ < … < t_N with the cached ψ-images.
#[derive(Debug, Clone)]
pub struct QuadGrid {
    t: Vec<f64>,
    u: Vec<f64>,
    scheme: GridScheme,
    uniform_h: Option<f64>,
}

impl QuadGrid {
    /// Uniform-in-ψ grid over the full [a, b] of the map.
    pub fn uniform_in_psi(psi: &PsiMap, n_cells: usize) -> Result<Self> {
        Self::uniform_in_psi_on(psi, psi.a(), psi.b(), n_cells)
    }

    /// Uniform-in-ψ grid over [lo, hi] ⊆ [a, b].
    pub fn uniform_in_psi_on(psi: &PsiMap, lo: f64, hi: f64, n_cells: usize) -> Result<Self> {
        check_subinterval(psi, lo, hi, n_cells)?;
        let (ulo, uhi) = (psi.eval(lo), psi.eval(hi));
        let h = (uhi - ulo) / n_cells as f64;
        let mut t = Vec::with_capacity(n_cells + 1);
        let mut u = Vec::with_capacity(n_cells + 1);
        for i in 0..=n_cells {
            let ui = if i == n_cells { uhi } else { ulo + h * i as f64 };
            let ti = if i == 0 {
                lo
            } else if i == n_cells {
                hi
            } else {
                psi.inverse(ui)?
            };
            t.push(ti);
            u.push(ui);
        }
        Ok(Self {
            t,
            u,
            scheme: GridScheme::UniformInPsi,
            uniform_h: Some(h),
        })
    }

    /// Uniform-in-t grid over the full [a, b].
    pub fn uniform_in_t(psi: &PsiMap, n_cells: usize) -> Result<Self> {
        Self::uniform_in_t_on(psi, psi.a(), psi.b(), n_cells)
    }

    pub fn uniform_in_t_on(psi: &PsiMap, lo: f64, hi: f64, n_cells: usize) -> Result<Self> {
        check_subinterval(psi, lo, hi, n_cells)?;
        let h = (hi - lo) / n_cells as f64;
        let mut t = Vec::with_capacity(n_cells + 1);
        let mut u = Vec::with_capacity(n_cells + 1);
        for i in 0..=n_cells {
            let ti = if i == n_cells { hi } else { lo + h * i as f64 };
            t.push(ti);
            u.push(psi.eval(ti));
        }
        let uniform_h = detect_uniform(&u);
        Ok(Self {
            t,
            u,
            scheme: GridScheme::UniformInT,
            uniform_h,
        })
    }

    /// Grid from explicit nodes (must be strictly increasing).
    pub fn from_nodes(psi: &PsiMap, nodes: Vec<f64>, scheme: GridScheme) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Grid("a grid needs at least two nodes".into()));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Grid(format!(
                    "grid nodes must be strictly increasing; got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        let u: Vec<f64> = nodes.iter().map(|&t| psi.eval(t)).collect();
        let uniform_h = detect_uniform(&u);
        Ok(Self {
            t: nodes,
            u,
            scheme,
            uniform_h,
        })
    }

    /// Same cell count and scheme, re-laid over [lo, hi].
    pub fn resample(&self, psi: &PsiMap, lo: f64, hi: f64) -> Result<Self> {
        match self.scheme {
            GridScheme::UniformInPsi => Self::uniform_in_psi_on(psi, lo, hi, self.n_cells()),
            GridScheme::UniformInT => Self::uniform_in_t_on(psi, lo, hi, self.n_cells()),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.t.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn psi_nodes(&self) -> &[f64] {
        &self.u
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub(crate) fn uniform_psi_step(&self) -> Option<f64> {
        self.uniform_h
    }

    pub(crate) fn require_span(&self, lo: f64, hi: f64) -> Result<()> {
        let slack = 1e-9 * (self.end() - self.start()).max(1.0);
        if self.start() > lo + slack || self.end() < hi - slack {
            return Err(Error::Grid(format!(
                "grid [{}, {}] does not span the requested interval [{lo}, {hi}]",
                self.start(),
                self.end()
            )));
        }
        Ok(())
    }
}

fn check_subinterval(psi: &PsiMap, lo: f64, hi: f64, n_cells: usize) -> Result<()> {
    if n_cells == 0 {
        return Err(Error::Grid("cell count must be positive".into()));
    }
    if !(lo < hi) {
        return Err(Error::Grid(format!("grid interval [{lo}, {hi}] is empty")));
    }
    let slack = 1e-9 * (psi.b() - psi.a());
    if lo < psi.a() - slack || hi > psi.b() + slack {
        return Err(Error::Grid(format!(
            "grid interval [{lo}, {hi}] leaves the psi domain [{}, {}]",
            psi.a(),
            psi.b()
        )));
    }
    Ok(())
}

fn detect_uniform(u: &[f64]) -> Option<f64> {
    let h = (u[u.len() - 1] - u[0]) / (u.len() - 1) as f64;
    let tol = 1e-12 * h.abs().max(1e-300);
    for (i, w) in u.windows(2).enumerate() {
        let _ = i;
        if ((w[1] - w[0]) - h).abs() > 64.0 * tol {
            return None;
        }
    }
    Some(h)
}
