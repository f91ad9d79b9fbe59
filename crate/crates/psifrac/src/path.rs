//! Trajectory descriptions consumed by the fractional operators.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::psi::{PsiMap, RealFn};

/// A trajectory x on [a, b]: an analytic closure plus optional ψ-directional
/// derivatives, or grid samples.
///
/// `dx_psi` is always the plain operator (1/ψ′) dx/dt; the right-sided
/// operators apply their own sign internally. `higher_dx_psi[k]` holds the
/// (k+2)-fold iterate, so a path good for order n ∈ (1, 2) needs
/// `higher_dx_psi` of length ≥ 0 plus `dx_psi`; order n = 2 needs the first
/// `higher_dx_psi` entry, and so on.
#[derive(Clone)]
pub struct Path {
    x: RealFn,
    dx_psi: Option<RealFn>,
    higher_dx_psi: Vec<RealFn>,
    samples: Option<(Arc<Vec<f64>>, Arc<Vec<f64>>)>,
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Path")
            .field("analytic_dx", &self.dx_psi.is_some())
            .field("higher", &self.higher_dx_psi.len())
            .field("sampled", &self.samples.is_some())
            .finish()
    }
}

impl Path {
    pub fn new(x: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            x: Arc::new(x),
            dx_psi: None,
            higher_dx_psi: Vec::new(),
            samples: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    pub fn with_dx_psi(mut self, dx: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dx_psi = Some(Arc::new(dx));
        self
    }

    pub fn with_higher_dx_psi(
        mut self,
        higher: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Self {
        self.higher_dx_psi = higher;
        self
    }

    /// A path backed by samples only; evaluation is linear interpolation.
    pub fn from_samples(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::Validation(
                "sample nodes and values must have equal length >= 2".into(),
            ));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Validation("sample nodes must be strictly increasing".into()));
            }
        }
        let nodes = Arc::new(nodes);
        let values = Arc::new(values);
        let (n2, v2) = (nodes.clone(), values.clone());
        Ok(Self {
            x: Arc::new(move |t| interp_linear(&n2, &v2, t)),
            dx_psi: None,
            higher_dx_psi: Vec::new(),
            samples: Some((nodes, values)),
        })
    }

    /// Attaches samples to an analytic path, checking the two forms agree at
    /// the shared nodes to 1e-10.
    pub fn with_samples(mut self, nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::Validation(
                "sample nodes and values must have equal length >= 2".into(),
            ));
        }
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (t, v) in nodes.iter().zip(&values) {
            let av = (self.x)(*t);
            if (av - v).abs() > 1e-10 * scale {
                return Err(Error::Validation(format!(
                    "analytic and sampled forms disagree at t = {t}: {av} vs {v}"
                )));
            }
        }
        self.samples = Some((Arc::new(nodes), Arc::new(values)));
        Ok(self)
    }

    /// Pointwise sum of two paths. Analytic derivatives combine when both
    /// sides carry them, otherwise the sum falls back to differencing.
    pub fn add(&self, other: &Path) -> Path {
        let (xa, xb) = (self.x.clone(), other.x.clone());
        let mut out = Path::new(move |t| xa(t) + xb(t));
        if let (Some(da), Some(db)) = (self.dx_psi.clone(), other.dx_psi.clone()) {
            out.dx_psi = Some(Arc::new(move |t| da(t) + db(t)));
        }
        let n = self.higher_dx_psi.len().min(other.higher_dx_psi.len());
        for k in 0..n {
            let (ha, hb) = (self.higher_dx_psi[k].clone(), other.higher_dx_psi[k].clone());
            out.higher_dx_psi
                .push(Arc::new(move |t| ha(t) + hb(t)) as Arc<dyn Fn(f64) -> f64 + Send + Sync>);
        }
        out
    }

    /// Pointwise scaling; derivatives scale along.
    pub fn scale(&self, c: f64) -> Path {
        let x = self.x.clone();
        let mut out = Path::new(move |t| c * x(t));
        if let Some(d) = self.dx_psi.clone() {
            out.dx_psi = Some(Arc::new(move |t| c * d(t)));
        }
        for h in &self.higher_dx_psi {
            let h = h.clone();
            out.higher_dx_psi
                .push(Arc::new(move |t| c * h(t)) as Arc<dyn Fn(f64) -> f64 + Send + Sync>);
        }
        out
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.x)(t)
    }

    pub fn has_analytic_dx(&self) -> bool {
        self.dx_psi.is_some()
    }

    /// The finite-difference step used when `dx_psi` is synthesized.
    pub fn fd_step(psi: &PsiMap) -> f64 {
        (1e-8 * (psi.b() - psi.a())).max(1e-6)
    }

    /// (1/ψ′) dx/dt at t: the analytic closure when present, otherwise
    /// central differences on x (one-sided at the endpoints).
    pub fn eval_dx_psi(&self, t: f64, psi: &PsiMap) -> f64 {
        if let Some(d) = &self.dx_psi {
            return d(t);
        }
        let h = Self::fd_step(psi);
        let (a, b) = (psi.a(), psi.b());
        let dxdt = if t - h >= a && t + h <= b {
            ((self.x)(t + h) - (self.x)(t - h)) / (2.0 * h)
        } else if t + h <= b {
            // second-order one-sided at the left endpoint
            (-3.0 * (self.x)(t) + 4.0 * (self.x)(t + h) - (self.x)(t + 2.0 * h)) / (2.0 * h)
        } else {
            (3.0 * (self.x)(t) - 4.0 * (self.x)(t - h) + (self.x)(t - 2.0 * h)) / (2.0 * h)
        };
        dxdt / psi.deriv(t)
    }

    /// The k-fold ψ-directional derivative ((1/ψ′) d/dt)^k x at t.
    ///
    /// k = 0 is x itself; k = 1 uses `dx_psi`; k ≥ 2 requires the
    /// corresponding `higher_dx_psi` entry.
    pub fn dx_psi_k(&self, k: usize, t: f64, psi: &PsiMap) -> Result<f64> {
        match k {
            0 => Ok(self.eval(t)),
            1 => Ok(self.eval_dx_psi(t, psi)),
            _ => match self.higher_dx_psi.get(k - 2) {
                Some(f) => Ok(f(t)),
                None => Err(Error::MissingDerivative(format!(
                    "path carries {} higher psi-derivatives but level {k} was requested",
                    self.higher_dx_psi.len()
                ))),
            },
        }
    }
}

pub(crate) fn interp_linear(nodes: &[f64], values: &[f64], t: f64) -> f64 {
    let n = nodes.len();
    if t <= nodes[0] {
        return values[0];
    }
    if t >= nodes[n - 1] {
        return values[n - 1];
    }
    let i = match nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => return values[i],
        Err(i) => i,
    };
    let (t0, t1) = (nodes[i - 1], nodes[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] * (1.0 - w) + values[i] * w
}
