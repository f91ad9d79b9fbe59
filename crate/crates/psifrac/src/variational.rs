//! Residual evaluators for the necessary and sufficient optimality
//! conditions: given a candidate (x, T) — and λ, α, τ as applicable — each
//! evaluator reports how far the candidate is from satisfying the
//! corresponding condition.
//!
//! Conventions shared by every evaluator:
//!
//! * Work happens on a grid resampled over [a, T] with the caller's cell
//!   count and scheme.
//! * Euler–Lagrange residuals are reported on the window
//!   [a + δ, T − δ], δ = 0.02 (T − a): the right Riemann–Liouville kernel
//!   blows up at T and the quadrature degrades at a. The window is part of
//!   the report so tolerances stay auditable.
//! * The transversality integral I_{T-}^{1-α,ψ}(∂₃L/ψ′) collapses to zero
//!   structurally when evaluated at the endpoint node, so it is evaluated
//!   near T and Richardson-extrapolated (first-order model 2q(δ/2) − q(δ)),
//!   which cancels the smooth part and keeps the singular mass the
//!   condition is about.

use crate::error::{Error, Result};
use crate::grid::{GridScheme, QuadGrid};
use crate::lagrangian::{halton, Lagrangian, MultiLagrangian};
use crate::ops::{
    abel_right_from, caputo_left_table, caputo_right_highorder_from_samples,
    caputo_right_table_from_samples, rl_right_table_from_samples, trapezoid, Order,
};
use crate::path::{interp_linear, Path};
use crate::problem::{Functional, ProblemKind, ProblemSpec};
use crate::psi::PsiMap;
use crate::special::gamma_unchecked;

/// Fraction of (T − a) shaved off both window ends.
pub const WINDOW_FRACTION: f64 = 0.02;

/// A candidate passes the Legendre necessary condition iff
/// legendre_check ≥ −TOL_LEGENDRE.
pub const TOL_LEGENDRE: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct GridMeta {
    pub n_cells: usize,
    pub scheme: GridScheme,
    /// Finite-difference step used to synthesize the path derivative, when
    /// it was synthesized.
    pub h_fd: Option<f64>,
}

/// Which form of the Euler–Lagrange residual is assembled: the
/// Riemann–Liouville form via the rewrite identity, or the explicit
/// Caputo-plus-boundary-term assembly. The two agree analytically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElMode {
    RiemannLiouville,
    Caputo,
}

#[derive(Debug, Clone)]
pub struct BoundaryResidual {
    pub label: String,
    pub value: f64,
}

/// Per-candidate residual report.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// max |EL residual| over the report window
    pub el_max: f64,
    /// (t, residual) at every window node
    pub el_nodes: Vec<(f64, f64)>,
    /// extrapolated I^{1-α} transversality value at T
    pub trans_integral: f64,
    /// L[x](T), or F[x](T) − λΦ′(T) for isoperimetric problems
    pub trans_lagrangian: f64,
    pub legendre_min: Option<f64>,
    /// |G(x,T) − Φ(T)| (isoperimetric only)
    pub constraint_defect: Option<f64>,
    /// max |∂₂M + D_{T-}(∂₃M/ψ′)ψ′| over the window (isoperimetric only)
    pub nondegeneracy: Option<f64>,
    /// extra endpoint conditions: free ends, high-order transversality family
    pub boundary_residuals: Vec<BoundaryResidual>,
    pub window: Window,
    pub grid_meta: GridMeta,
}

impl ResidualReport {
    fn new(window: Window, meta: GridMeta) -> Self {
        Self {
            el_max: 0.0,
            el_nodes: Vec::new(),
            trans_integral: 0.0,
            trans_lagrangian: 0.0,
            legendre_min: None,
            constraint_defect: None,
            nondegeneracy: None,
            boundary_residuals: Vec::new(),
            window,
            grid_meta: meta,
        }
    }
}

fn meta_for(x: &Path, psi: &PsiMap, grid: &QuadGrid) -> GridMeta {
    GridMeta {
        n_cells: grid.n_cells(),
        scheme: grid.scheme(),
        h_fd: if x.has_analytic_dx() {
            None
        } else {
            Some(Path::fd_step(psi))
        },
    }
}

fn check_terminal(psi: &PsiMap, t_terminal: f64) -> Result<()> {
    if !(t_terminal > psi.a() && t_terminal <= psi.b() + 1e-12) {
        return Err(Error::Validation(format!(
            "terminal time {t_terminal} outside ({}, {}]",
            psi.a(),
            psi.b()
        )));
    }
    Ok(())
}

fn check_admissible(p: &ProblemSpec, x: &Path) -> Result<()> {
    if let Some(v) = p.x_a_value() {
        let got = x.eval(p.psi.a());
        if (got - v).abs() > 1e-8 * (1.0 + v.abs()) {
            return Err(Error::Validation(format!(
                "candidate is not admissible: x(a) = {got}, required {v}"
            )));
        }
    }
    Ok(())
}

/// Node indices of `grid` lying inside [lo, hi].
fn window_indices(grid: &QuadGrid, lo: f64, hi: f64) -> Vec<usize> {
    grid.nodes()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= lo && t <= hi)
        .map(|(i, _)| i)
        .collect()
}

/// I_{upper-}^{1-α,ψ} of a pointwise-evaluable integrand near t = upper,
/// Richardson-extrapolated to the endpoint over δ and δ/2.
fn extrapolated_terminal_integral(
    f_at: &dyn Fn(f64) -> Result<f64>,
    psi: &PsiMap,
    lower: f64,
    upper: f64,
    alpha: f64,
) -> Result<f64> {
    let delta = WINDOW_FRACTION * (upper - lower);
    let q = |d: f64| -> Result<f64> {
        let m = 64usize;
        let lo = upper - d;
        let (ulo, uhi) = (psi.eval(lo), psi.eval(upper));
        let h = (uhi - ulo) / m as f64;
        let mut us = Vec::with_capacity(m + 1);
        let mut vals = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let ui = if i == m { uhi } else { ulo + h * i as f64 };
            let ti = if i == 0 {
                lo
            } else if i == m {
                upper
            } else {
                psi.inverse(ui)?
            };
            us.push(ui);
            vals.push(f_at(ti)?);
        }
        Ok(abel_right_from(&us, &vals, us[0], 1.0 - alpha) / gamma_unchecked(1.0 - alpha))
    };
    Ok(2.0 * q(delta / 2.0)? - q(delta)?)
}

/// I_{upper-}^{γ,ψ} of node samples from an arbitrary ψ-coordinate base,
/// linearly interpolating the samples at the seam.
fn right_integral_from_samples(grid: &QuadGrid, fvals: &[f64], v: f64, gamma: f64) -> f64 {
    let u = grid.psi_nodes();
    let uhi = *u.last().unwrap();
    let tol = 1e-12 * (uhi - u[0]).max(1.0);
    let mut us = vec![v];
    let mut gs = vec![interp_linear(u, fvals, v)];
    for (j, &uj) in u.iter().enumerate() {
        if uj > v + tol {
            us.push(uj);
            gs.push(fvals[j]);
        }
    }
    if us.len() < 2 {
        return 0.0;
    }
    abel_right_from(&us, &gs, us[0], gamma) / gamma_unchecked(gamma)
}

/// Shared node fields of a scalar-Lagrangian scan.
struct ScalarFields {
    x: Vec<f64>,
    d: Vec<f64>,
    p2: Vec<f64>,
    p3: Vec<f64>,
    f: Vec<f64>,
}

fn scalar_fields(
    l: &Lagrangian,
    x: &Path,
    order: &Order,
    psi: &PsiMap,
    grid: &QuadGrid,
) -> Result<ScalarFields> {
    let d = caputo_left_table(x, order, psi, grid)?;
    let tn = grid.nodes();
    let mut xv = Vec::with_capacity(tn.len());
    let mut p2 = Vec::with_capacity(tn.len());
    let mut p3 = Vec::with_capacity(tn.len());
    let mut f = Vec::with_capacity(tn.len());
    for (i, &t) in tn.iter().enumerate() {
        let xi = x.eval(t);
        xv.push(xi);
        p2.push((l.dx)(t, xi, d[i]));
        let p3i = (l.dd)(t, xi, d[i]);
        p3.push(p3i);
        f.push(p3i / psi.deriv(t));
    }
    Ok(ScalarFields { x: xv, d, p2, p3, f })
}

/// Euler–Lagrange and transversality residuals for the fundamental
/// free-terminal-time problem (Riemann–Liouville form).
pub fn el_residual(
    p: &ProblemSpec,
    x: &Path,
    t_terminal: f64,
    grid: &QuadGrid,
) -> Result<ResidualReport> {
    el_residual_with_mode(p, x, t_terminal, grid, ElMode::RiemannLiouville)
}

/// [`el_residual`] with an explicit assembly mode.
pub fn el_residual_with_mode(
    p: &ProblemSpec,
    x: &Path,
    t_terminal: f64,
    grid: &QuadGrid,
    mode: ElMode,
) -> Result<ResidualReport> {
    if !matches!(p.kind, ProblemKind::Fundamental | ProblemKind::OptimalOrder) {
        return Err(Error::Validation(format!(
            "el_residual expects a fundamental problem, got {}",
            p.kind.name()
        )));
    }
    check_admissible(p, x)?;
    let l = p.scalar_lagrangian()?;
    let multi = MultiLagrangian::from_scalar(l);
    let mut reports = el_residual_multi_impl(
        &p.psi,
        &multi,
        std::slice::from_ref(x),
        std::slice::from_ref(p.order()),
        t_terminal,
        grid,
        mode,
    )?;
    let mut report = reports.remove(0);
    if l.ddd.is_some() {
        report.legendre_min = Some(legendre_min_of(l, x, p.order(), &p.psi, t_terminal, grid)?);
    }
    Ok(report)
}

/// Per-coordinate Euler–Lagrange and transversality residuals for the
/// several-dependent-variables problem. m = 1 reproduces [`el_residual`]
/// exactly.
pub fn el_residual_multi(
    psi: &PsiMap,
    l: &MultiLagrangian,
    xs: &[Path],
    alphas: &[Order],
    t_terminal: f64,
    grid: &QuadGrid,
) -> Result<Vec<ResidualReport>> {
    el_residual_multi_impl(psi, l, xs, alphas, t_terminal, grid, ElMode::RiemannLiouville)
}

fn el_residual_multi_impl(
    psi: &PsiMap,
    l: &MultiLagrangian,
    xs: &[Path],
    alphas: &[Order],
    t_terminal: f64,
    grid: &QuadGrid,
    mode: ElMode,
) -> Result<Vec<ResidualReport>> {
    let m = xs.len();
    if m == 0 || m != alphas.len() || m != l.arity() {
        return Err(Error::Validation(format!(
            "arity mismatch: {} paths, {} orders, Lagrangian arity {}",
            m,
            alphas.len(),
            l.arity()
        )));
    }
    for o in alphas {
        if o.is_integer() || o.alpha() >= 1.0 {
            return Err(Error::Validation("base orders must lie in (0,1)".into()));
        }
    }
    check_terminal(psi, t_terminal)?;
    let a = psi.a();
    let wg = grid.resample(psi, a, t_terminal)?;
    let tn = wg.nodes();
    let un = wg.psi_nodes();
    let n = tn.len();

    let mut dtab = Vec::with_capacity(m);
    for (xi, oi) in xs.iter().zip(alphas) {
        dtab.push(caputo_left_table(xi, oi, psi, &wg)?);
    }
    let xv: Vec<Vec<f64>> = xs
        .iter()
        .map(|xi| tn.iter().map(|&t| xi.eval(t)).collect())
        .collect();

    let mut xs_node = vec![0.0; m];
    let mut ds_node = vec![0.0; m];
    let mut p2 = vec![vec![0.0; n]; m];
    let mut f = vec![vec![0.0; n]; m];
    for i in 0..n {
        for c in 0..m {
            xs_node[c] = xv[c][i];
            ds_node[c] = dtab[c][i];
        }
        let dpsi = psi.deriv(tn[i]);
        for c in 0..m {
            p2[c][i] = (l.dx[c])(tn[i], &xs_node, &ds_node);
            f[c][i] = (l.dd[c])(tn[i], &xs_node, &ds_node) / dpsi;
        }
    }

    let delta = WINDOW_FRACTION * (t_terminal - a);
    let window = Window {
        lo: a + delta,
        hi: t_terminal - delta,
    };
    let idx = window_indices(&wg, window.lo, window.hi);

    for c in 0..m {
        xs_node[c] = xv[c][n - 1];
        ds_node[c] = dtab[c][n - 1];
    }
    let l_at_terminal = (l.l)(t_terminal, &xs_node, &ds_node);

    let mut reports = Vec::with_capacity(m);
    for c in 0..m {
        let alpha = alphas[c].alpha();
        let rl = rl_right_table_from_samples(&f[c], alpha, &wg);
        let cap = caputo_right_table_from_samples(&f[c], alpha, &wg);
        let f_end = f[c][n - 1];
        let u_end = un[n - 1];
        let ga1 = gamma_unchecked(1.0 - alpha);

        let mut nodes = Vec::with_capacity(idx.len());
        let mut worst = 0.0f64;
        for &i in &idx {
            let dpsi = psi.deriv(tn[i]);
            let r = match mode {
                ElMode::RiemannLiouville => p2[c][i] + rl[i] * dpsi,
                ElMode::Caputo => {
                    p2[c][i] + cap[i] * dpsi + f_end / ga1 * (u_end - un[i]).powf(-alpha) * dpsi
                }
            };
            worst = worst.max(r.abs());
            nodes.push((tn[i], r));
        }

        let f_at = |s: f64| -> Result<f64> {
            let mut xsn = vec![0.0; m];
            let mut dsn = vec![0.0; m];
            for cc in 0..m {
                xsn[cc] = xs[cc].eval(s);
                dsn[cc] = interp_linear(tn, &dtab[cc], s);
            }
            Ok((l.dd[c])(s, &xsn, &dsn) / psi.deriv(s))
        };
        let trans_integral = extrapolated_terminal_integral(&f_at, psi, a, t_terminal, alpha)?;

        let mut report = ResidualReport::new(window, meta_for(&xs[c], psi, grid));
        report.el_max = worst;
        report.el_nodes = nodes;
        report.trans_integral = trans_integral;
        report.trans_lagrangian = l_at_terminal;
        reports.push(report);
    }
    Ok(reports)
}

fn legendre_min_of(
    l: &Lagrangian,
    x: &Path,
    order: &Order,
    psi: &PsiMap,
    t_terminal: f64,
    grid: &QuadGrid,
) -> Result<f64> {
    let ddd = l
        .ddd
        .as_ref()
        .ok_or_else(|| Error::MissingDerivative("Legendre check needs ∂²L/∂d²".into()))?;
    let wg = grid.resample(psi, psi.a(), t_terminal)?;
    let d = caputo_left_table(x, order, psi, &wg)?;
    let mut min = f64::INFINITY;
    for (i, &t) in wg.nodes().iter().enumerate() {
        min = min.min(ddd(t, x.eval(t), d[i]));
    }
    Ok(min)
}

/// Second-order (Legendre) necessary condition: min over the grid nodes in
/// [a, T] of ∂²₃₃L along the candidate. Passes iff ≥ −[`TOL_LEGENDRE`].
pub fn legendre_check(p: &ProblemSpec, x: &Path, t_terminal: f64, grid: &QuadGrid) -> Result<f64> {
    check_terminal(&p.psi, t_terminal)?;
    let l = p.scalar_lagrangian()?;
    legendre_min_of(l, x, p.order(), &p.psi, t_terminal, grid)
}

/// Residuals for the extension where the cost integral starts at an
/// interior A > a: D_{T-}(f) − D_{A-}(f) on [a, A], the standard EL residual
/// on [A, T], plus free-endpoint conditions when requested.
pub fn extended_residuals(
    p: &ProblemSpec,
    x: &Path,
    t_terminal: f64,
    grid: &QuadGrid,
) -> Result<ResidualReport> {
    let (inner_start, x_a_free, x_inner_free) = match &p.kind {
        ProblemKind::Extended {
            inner_start,
            x_a_free,
            x_inner_free,
        } => (*inner_start, *x_a_free, *x_inner_free),
        _ => {
            return Err(Error::Validation(
                "extended_residuals expects an extended problem".into(),
            ))
        }
    };
    let psi = &p.psi;
    let a = psi.a();
    check_terminal(psi, t_terminal)?;
    if !(a < inner_start && inner_start < t_terminal) {
        return Err(Error::Validation(format!(
            "extended problem needs a < A < T, got A = {inner_start}, T = {t_terminal}"
        )));
    }
    let l = p.scalar_lagrangian()?;
    let order = p.order();
    let alpha = order.alpha();

    let wg = grid.resample(psi, a, t_terminal)?;
    let fields = scalar_fields(l, x, order, psi, &wg)?;
    let tn = wg.nodes();

    let delta = WINDOW_FRACTION * (t_terminal - a);
    let window = Window {
        lo: a + delta,
        hi: t_terminal - delta,
    };

    // interior branch [A, T]: the standard EL residual
    let rl_t = rl_right_table_from_samples(&fields.f, alpha, &wg);
    let idx_outer = window_indices(&wg, inner_start + delta, t_terminal - delta);
    let mut nodes = Vec::new();
    let mut worst = 0.0f64;
    for &i in &idx_outer {
        let r = fields.p2[i] + rl_t[i] * psi.deriv(tn[i]);
        worst = worst.max(r.abs());
        nodes.push((tn[i], r));
    }

    // initial branch [a, A]: D_{T-}(f) − D_{A-}(f)
    let wga = grid.resample(psi, a, inner_start)?;
    let fa: Vec<f64> = {
        let da = caputo_left_table(x, order, psi, &wga)?;
        wga.nodes()
            .iter()
            .enumerate()
            .map(|(i, &t)| (l.dd)(t, x.eval(t), da[i]) / psi.deriv(t))
            .collect()
    };
    let rl_a = rl_right_table_from_samples(&fa, alpha, &wga);
    let idx_inner = window_indices(&wga, a + delta, inner_start - delta);
    for &i in &idx_inner {
        let t = wga.nodes()[i];
        let rl_t_here = interp_linear(tn, &rl_t, t);
        let r = rl_t_here - rl_a[i];
        worst = worst.max(r.abs());
        nodes.push((t, r));
    }
    nodes.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());

    let f_at = |s: f64| -> Result<f64> {
        let d = interp_linear(tn, &fields.d, s);
        Ok((l.dd)(s, x.eval(s), d) / psi.deriv(s))
    };
    let trans_integral = extrapolated_terminal_integral(&f_at, psi, a, t_terminal, alpha)?;

    let n = tn.len();
    let mut report = ResidualReport::new(window, meta_for(x, psi, grid));
    report.el_max = worst;
    report.el_nodes = nodes;
    report.trans_integral = trans_integral;
    report.trans_lagrangian = (l.l)(t_terminal, fields.x[n - 1], fields.d[n - 1]);
    if x_a_free {
        let ua = wg.psi_nodes()[0];
        let i_t = right_integral_from_samples(&wg, &fields.f, ua, 1.0 - alpha);
        let i_a = right_integral_from_samples(&wga, &fa, ua, 1.0 - alpha);
        report.boundary_residuals.push(BoundaryResidual {
            label: "free_initial".into(),
            value: i_t - i_a,
        });
    }
    if x_inner_free {
        let trans_a = extrapolated_terminal_integral(&f_at, psi, a, inner_start, alpha)?;
        report.boundary_residuals.push(BoundaryResidual {
            label: "free_inner".into(),
            value: trans_a,
        });
    }
    if l.ddd.is_some() {
        report.legendre_min = Some(legendre_min_of(l, x, order, psi, t_terminal, grid)?);
    }
    Ok(report)
}

/// Residuals for the isoperimetric problem with the augmented integrand
/// F = L + λM: the EL residual of F, the transversality pair
/// {I^{1-α}(∂₃F/ψ′) = 0, F[x](T) = λΦ′(T)}, the constraint defect
/// |G(x,T) − Φ(T)| and the non-degeneracy probe for M.
pub fn isoperimetric_residuals(
    p: &ProblemSpec,
    x: &Path,
    t_terminal: f64,
    lambda: f64,
    grid: &QuadGrid,
) -> Result<ResidualReport> {
    let constraint = match &p.kind {
        ProblemKind::Isoperimetric { constraint, .. } => constraint,
        _ => {
            return Err(Error::Validation(
                "isoperimetric_residuals expects an isoperimetric problem".into(),
            ))
        }
    };
    if !lambda.is_finite() {
        return Err(Error::Validation("multiplier must be finite".into()));
    }
    let psi = &p.psi;
    let a = psi.a();
    check_terminal(psi, t_terminal)?;
    check_admissible(p, x)?;
    let l = p.scalar_lagrangian()?;
    let m = &constraint.m;
    let order = p.order();
    let alpha = order.alpha();

    let wg = grid.resample(psi, a, t_terminal)?;
    let tn = wg.nodes();
    let n = tn.len();
    let lf = scalar_fields(l, x, order, psi, &wg)?;
    let mut p2m = Vec::with_capacity(n);
    let mut p3m = Vec::with_capacity(n);
    let mut mval = Vec::with_capacity(n);
    for (i, &t) in tn.iter().enumerate() {
        let (xi, di) = (lf.x[i], lf.d[i]);
        p2m.push((m.dx)(t, xi, di));
        p3m.push((m.dd)(t, xi, di));
        mval.push((m.l)(t, xi, di));
    }
    let ff: Vec<f64> = (0..n)
        .map(|i| (lf.p3[i] + lambda * p3m[i]) / psi.deriv(tn[i]))
        .collect();
    let p2f: Vec<f64> = (0..n).map(|i| lf.p2[i] + lambda * p2m[i]).collect();
    let fm: Vec<f64> = (0..n).map(|i| p3m[i] / psi.deriv(tn[i])).collect();

    let delta = WINDOW_FRACTION * (t_terminal - a);
    let window = Window {
        lo: a + delta,
        hi: t_terminal - delta,
    };
    let idx = window_indices(&wg, window.lo, window.hi);

    let rl_f = rl_right_table_from_samples(&ff, alpha, &wg);
    let rl_m = rl_right_table_from_samples(&fm, alpha, &wg);
    let mut nodes = Vec::with_capacity(idx.len());
    let mut worst = 0.0f64;
    let mut nondeg = 0.0f64;
    for &i in &idx {
        let dpsi = psi.deriv(tn[i]);
        let r = p2f[i] + rl_f[i] * dpsi;
        worst = worst.max(r.abs());
        nodes.push((tn[i], r));
        nondeg = nondeg.max((p2m[i] + rl_m[i] * dpsi).abs());
    }

    let f_at = |s: f64| -> Result<f64> {
        let d = interp_linear(tn, &lf.d, s);
        let xi = x.eval(s);
        Ok(((l.dd)(s, xi, d) + lambda * (m.dd)(s, xi, d)) / psi.deriv(s))
    };
    let trans_integral = extrapolated_terminal_integral(&f_at, psi, a, t_terminal, alpha)?;

    let g_val = trapezoid(tn, &mval);
    let phi_t = (constraint.phi)(t_terminal);
    let phi_prime_t = (constraint.phi_prime)(t_terminal);
    let f_terminal = (l.l)(t_terminal, lf.x[n - 1], lf.d[n - 1])
        + lambda * (m.l)(t_terminal, lf.x[n - 1], lf.d[n - 1]);

    let mut report = ResidualReport::new(window, meta_for(x, psi, grid));
    report.el_max = worst;
    report.el_nodes = nodes;
    report.trans_integral = trans_integral;
    report.trans_lagrangian = f_terminal - lambda * phi_prime_t;
    report.constraint_defect = Some((g_val - phi_t).abs());
    report.nondegeneracy = Some(nondeg);
    if let (Some(l3), Some(m3)) = (&l.ddd, &m.ddd) {
        let mut min = f64::INFINITY;
        for (i, &t) in tn.iter().enumerate() {
            min = min.min(l3(t, lf.x[i], lf.d[i]) + lambda * m3(t, lf.x[i], lf.d[i]));
        }
        report.legendre_min = Some(min);
    }
    Ok(report)
}

/// The delay tail integral K(t) = ∫_{t_mid}^{T} ψ′(s)(ψ(s)-ψ(t))^{-α}
/// (∂₄L/ψ′)(s) ds, with (1/Γ(1-α)) dK/du by central differences one
/// ψ-cell wide.
struct TailIntegral {
    us: Vec<f64>,
    gs: Vec<f64>,
    alpha: f64,
    h: f64,
}

impl TailIntegral {
    fn new(
        wg: &QuadGrid,
        fvals: &[f64],
        psi: &PsiMap,
        t_mid: f64,
        alpha: f64,
    ) -> Result<Self> {
        let u = wg.psi_nodes();
        let umid = psi.eval(t_mid);
        let tol = 1e-12 * (u[u.len() - 1] - u[0]).max(1.0);
        let mut us = vec![umid];
        let mut gs = vec![interp_linear(u, fvals, umid)];
        for (j, &uj) in u.iter().enumerate() {
            if uj > umid + tol {
                us.push(uj);
                gs.push(fvals[j]);
            }
        }
        if us.len() < 2 {
            return Err(Error::Grid("delay tail span is empty".into()));
        }
        let h = wg
            .uniform_psi_step()
            .unwrap_or((u[u.len() - 1] - u[0]) / wg.n_cells() as f64);
        Ok(Self { us, gs, alpha, h })
    }

    fn k_of(&self, v: f64) -> f64 {
        abel_right_from(&self.us, &self.gs, v, 1.0 - self.alpha)
    }

    fn derivative_term(&self, v: f64) -> f64 {
        let h = self.h;
        let d = (self.k_of(v + h) - self.k_of(v - h)) / (2.0 * h);
        d / gamma_unchecked(1.0 - self.alpha)
    }
}

/// max over early-branch window nodes of |D_{T-}f − (D_{(T_mid)-}f − tail)|:
/// the split identity the delay Euler–Lagrange equation rests on, from node
/// samples of f. Diagnostic surface for the delay machinery.
pub fn delay_split_defect(
    f: &Path,
    order: &Order,
    psi: &PsiMap,
    t_mid: f64,
    t_upper: f64,
    grid: &QuadGrid,
) -> Result<f64> {
    let a = psi.a();
    if !(a < t_mid && t_mid < t_upper && t_upper <= psi.b()) {
        return Err(Error::Validation("need a < t_mid < t_upper <= b".into()));
    }
    let alpha = order.alpha();
    let wg = grid.resample(psi, a, t_upper)?;
    let tn = wg.nodes();
    let fv: Vec<f64> = tn.iter().map(|&t| f.eval(t)).collect();
    let rl_full = rl_right_table_from_samples(&fv, alpha, &wg);

    let wgm = grid.resample(psi, a, t_mid)?;
    let fm: Vec<f64> = wgm.nodes().iter().map(|&t| f.eval(t)).collect();
    let rl_mid = rl_right_table_from_samples(&fm, alpha, &wgm);

    let tail = TailIntegral::new(&wg, &fv, psi, t_mid, alpha)?;

    let delta = WINDOW_FRACTION * (t_upper - a);
    let idx = window_indices(&wgm, a + delta, t_mid - delta);
    let mut worst = 0.0f64;
    for &i in &idx {
        let t = wgm.nodes()[i];
        let lhs = interp_linear(tn, &rl_full, t);
        let rhs = rl_mid[i] - tail.derivative_term(psi.eval(t));
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Residuals for the time-delay problem: the two branch equations and the
/// transversality pair, with the tail integral evaluated by the product
/// quadrature and its t-derivative by central differences.
pub fn delay_residuals(
    p: &ProblemSpec,
    x: &Path,
    t_terminal: f64,
    grid: &QuadGrid,
) -> Result<ResidualReport> {
    let (tau, theta) = match &p.kind {
        ProblemKind::Delay(d) => (d.tau, d.theta.clone()),
        _ => {
            return Err(Error::Validation(
                "delay_residuals expects a delay problem".into(),
            ))
        }
    };
    let dl = match &p.functional {
        Functional::Delay(dl) => dl,
        _ => unreachable!("validated at construction"),
    };
    let psi = &p.psi;
    let a = psi.a();
    check_terminal(psi, t_terminal)?;
    if !(tau > 0.0 && tau < t_terminal - a) {
        return Err(Error::Validation(format!(
            "delay must satisfy 0 < tau < T - a, got tau = {tau}, T = {t_terminal}"
        )));
    }
    let order = p.order();
    let alpha = order.alpha();

    let x_full = {
        let xc = x.clone();
        let th = theta.clone();
        move |t: f64| if t < a { th(t) } else { xc.eval(t) }
    };

    let wg = grid.resample(psi, a, t_terminal)?;
    let tn = wg.nodes();
    let n = tn.len();
    let d = caputo_left_table(x, order, psi, &wg)?;
    let mut p2 = Vec::with_capacity(n);
    let mut f4 = Vec::with_capacity(n);
    for (i, &t) in tn.iter().enumerate() {
        let xi = x_full(t);
        let xti = x_full(t - tau);
        p2.push((dl.dx)(t, xi, xti, d[i]));
        f4.push((dl.dd)(t, xi, xti, d[i]) / psi.deriv(t));
    }

    let delta = WINDOW_FRACTION * (t_terminal - a);
    let t_mid = t_terminal - tau;
    let window = Window {
        lo: a + delta,
        hi: t_terminal - delta,
    };

    // late branch [T-τ, T]
    let rl_full = rl_right_table_from_samples(&f4, alpha, &wg);
    let mut nodes = Vec::new();
    let mut worst = 0.0f64;
    for &i in &window_indices(&wg, t_mid + delta, t_terminal - delta) {
        let r = p2[i] + rl_full[i] * psi.deriv(tn[i]);
        worst = worst.max(r.abs());
        nodes.push((tn[i], r));
    }

    // early branch [a, T-τ]
    if t_mid > a + 2.0 * delta {
        let wgm = grid.resample(psi, a, t_mid)?;
        let f4m: Vec<f64> = wgm
            .nodes()
            .iter()
            .map(|&t| interp_linear(tn, &f4, t))
            .collect();
        let rl_mid = rl_right_table_from_samples(&f4m, alpha, &wgm);
        let tail = TailIntegral::new(&wg, &f4, psi, t_mid, alpha)?;
        for &i in &window_indices(&wgm, a + delta, t_mid - delta) {
            let t = wgm.nodes()[i];
            let xi = x_full(t);
            let xti = x_full(t - tau);
            let di = interp_linear(tn, &d, t);
            let p2_here = (dl.dx)(t, xi, xti, di);
            // ∂₃L_τ at the shifted time t + τ
            let ts = t + tau;
            let p3_shift = (dl.dxtau)(ts, x_full(ts), xi, interp_linear(tn, &d, ts));
            let dpsi = psi.deriv(t);
            let r =
                p2_here + p3_shift + rl_mid[i] * dpsi - tail.derivative_term(psi.eval(t)) * dpsi;
            worst = worst.max(r.abs());
            nodes.push((t, r));
        }
        nodes.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    }

    let f_at = |s: f64| -> Result<f64> {
        let di = interp_linear(tn, &d, s);
        Ok((dl.dd)(s, x_full(s), x_full(s - tau), di) / psi.deriv(s))
    };
    let trans_integral = extrapolated_terminal_integral(&f_at, psi, a, t_terminal, alpha)?;

    let mut report = ResidualReport::new(window, meta_for(x, psi, grid));
    report.el_max = worst;
    report.el_nodes = nodes;
    report.trans_integral = trans_integral;
    report.trans_lagrangian = (dl.l)(
        t_terminal,
        x_full(t_terminal),
        x_full(t_terminal - tau),
        d[n - 1],
    );
    Ok(report)
}

/// Residuals for the high-order problem: the summed Euler–Lagrange equation
/// and the transversality family for k = 1..m, with the iterated outer
/// derivatives evaluated by nested central differences one ψ-cell wide.
pub fn high_order_residuals(
    p: &ProblemSpec,
    x: &Path,
    t_terminal: f64,
    grid: &QuadGrid,
) -> Result<ResidualReport> {
    if !matches!(p.kind, ProblemKind::HighOrder) {
        return Err(Error::Validation(
            "high_order_residuals expects a high-order problem".into(),
        ));
    }
    let hl = match &p.functional {
        Functional::HighOrder(hl) => hl,
        _ => unreachable!("validated at construction"),
    };
    let psi = &p.psi;
    let a = psi.a();
    check_terminal(psi, t_terminal)?;
    let m = p.orders.len();

    let wg = grid.resample(psi, a, t_terminal)?;
    let tn = wg.nodes();
    let un = wg.psi_nodes();
    let n = tn.len();

    let mut dtab = Vec::with_capacity(m);
    for o in &p.orders {
        dtab.push(caputo_left_table(x, o, psi, &wg)?);
    }
    let mut p2 = Vec::with_capacity(n);
    let mut fs = vec![Vec::with_capacity(n); m];
    let mut dnode = vec![0.0; m];
    for i in 0..n {
        for c in 0..m {
            dnode[c] = dtab[c][i];
        }
        let xi = x.eval(tn[i]);
        p2.push((hl.dx)(tn[i], xi, &dnode));
        let dpsi = psi.deriv(tn[i]);
        for c in 0..m {
            fs[c].push((hl.dd[c])(tn[i], xi, &dnode) / dpsi);
        }
    }

    // per-order right RL derivative tables via the Caputo rewrite with the
    // full boundary series
    let mut rl = vec![vec![0.0; n]; m];
    for c in 0..m {
        let ord = &p.orders[c];
        let alpha = ord.alpha();
        let nn = ord.n() as usize;
        let (cap, dk_end) = caputo_right_highorder_from_samples(&fs[c], ord, &wg);
        for i in 0..n - 1 {
            let mut boundary = 0.0;
            for (k, dk) in dk_end.iter().enumerate().take(nn) {
                boundary += dk / gamma_unchecked(k as f64 + 1.0 - alpha)
                    * (un[n - 1] - un[i]).powf(k as f64 - alpha);
            }
            rl[c][i] = cap[i] + boundary;
        }
        rl[c][n - 1] = f64::NAN;
    }

    let delta = WINDOW_FRACTION * (t_terminal - a);
    let window = Window {
        lo: a + delta,
        hi: t_terminal - delta,
    };
    let idx = window_indices(&wg, window.lo, window.hi);
    let mut nodes = Vec::with_capacity(idx.len());
    let mut worst = 0.0f64;
    for &i in &idx {
        let dpsi = psi.deriv(tn[i]);
        let mut r = p2[i];
        for rl_c in rl.iter() {
            r += rl_c[i] * dpsi;
        }
        worst = worst.max(r.abs());
        nodes.push((tn[i], r));
    }

    // transversality family: S_k(δ) = Σ_{n=k}^m (-(1/ψ')d/dt)^{n-k}
    // I^{n-α_n}(f_n) at T − δ, Richardson-extrapolated over δ, δ/2
    let h_u = wg
        .uniform_psi_step()
        .unwrap_or((un[n - 1] - un[0]) / wg.n_cells() as f64);
    let family_at = |k: usize, d_t: f64| -> f64 {
        let v0 = psi.eval(t_terminal - d_t);
        let mut total = 0.0;
        for c in k..=m {
            let ord = &p.orders[c - 1];
            let gamma = ord.n() as f64 - ord.alpha();
            let j = c - k;
            let x_of = |v: f64| right_integral_from_samples(&wg, &fs[c - 1], v, gamma);
            total += iterated_backward_derivative(&x_of, v0, h_u, j);
        }
        total
    };
    let mut family = Vec::with_capacity(m);
    for k in 1..=m {
        let q1 = family_at(k, delta);
        let q2 = family_at(k, delta / 2.0);
        family.push(2.0 * q2 - q1);
    }

    for c in 0..m {
        dnode[c] = dtab[c][n - 1];
    }
    let mut report = ResidualReport::new(window, meta_for(x, psi, grid));
    report.el_max = worst;
    report.el_nodes = nodes;
    report.trans_integral = family[0];
    report.trans_lagrangian = (hl.l)(t_terminal, x.eval(t_terminal), &dnode);
    report.boundary_residuals = family
        .iter()
        .enumerate()
        .map(|(k, &v)| BoundaryResidual {
            label: format!("transversality_k{}", k + 1),
            value: v,
        })
        .collect();
    Ok(report)
}

/// j-fold (−d/du)^j of a scalar function by nested central differences of
/// step h.
fn iterated_backward_derivative(f: &dyn Fn(f64) -> f64, at: f64, h: f64, j: usize) -> f64 {
    if j == 0 {
        return f(at);
    }
    let inner = |v: f64| iterated_backward_derivative(f, v, h, j - 1);
    -(inner(at + h) - inner(at - h)) / (2.0 * h)
}

/// ∫_a^T ∂₃L[x](t) Λ_t′(α) dt with Λ_t′(α) by central differences in the
/// order (step 1e-4); a stationary fractional order makes this vanish.
pub fn optimal_order_stationarity(
    p: &ProblemSpec,
    x: &Path,
    t_terminal: f64,
    order: &Order,
    grid: &QuadGrid,
) -> Result<f64> {
    let psi = &p.psi;
    check_terminal(psi, t_terminal)?;
    let l = p.scalar_lagrangian()?;
    let h_alpha = 1e-4;
    let alpha = order.alpha();
    if !(alpha - h_alpha > 0.0 && alpha + h_alpha < 1.0) {
        return Err(Error::Domain(format!("order {alpha} ± {h_alpha} leaves (0, 1)")));
    }
    let wg = grid.resample(psi, psi.a(), t_terminal)?;
    let tn = wg.nodes();
    let d0 = caputo_left_table(x, order, psi, &wg)?;
    let dp = caputo_left_table(x, &Order::new(alpha + h_alpha)?, psi, &wg)?;
    let dm = caputo_left_table(x, &Order::new(alpha - h_alpha)?, psi, &wg)?;
    let vals: Vec<f64> = (0..tn.len())
        .map(|i| {
            let lambda_prime = (dp[i] - dm[i]) / (2.0 * h_alpha);
            (l.dd)(tn[i], x.eval(tn[i]), d0[i]) * lambda_prime
        })
        .collect();
    Ok(trapezoid(tn, &vals))
}

/// Sampling box for [`convexity_probe`].
#[derive(Debug, Clone, Copy)]
pub struct ConvexityBox {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub d: (f64, f64),
    pub v: (f64, f64),
    pub w: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub violations: usize,
    pub worst_gap: f64,
    pub samples: usize,
}

/// Samples L(t, x+v, d+w) − L(t, x, d) ≥ ∂₂L·v + ∂₃L·w at quasi-random
/// (Halton) points; gaps below −1e−9 count as violations.
pub fn convexity_probe(l: &Lagrangian, bx: &ConvexityBox, samples: usize) -> ConvexityReport {
    let lerp = |r: (f64, f64), w: f64| r.0 + (r.1 - r.0) * w;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in 0..samples {
        let idx = i as u64 + 1;
        let t = lerp(bx.t, halton(idx, 2));
        let xx = lerp(bx.x, halton(idx, 3));
        let d = lerp(bx.d, halton(idx, 5));
        let v = lerp(bx.v, halton(idx, 7));
        let w = lerp(bx.w, halton(idx, 11));
        let gap = (l.l)(t, xx + v, d + w)
            - (l.l)(t, xx, d)
            - (l.dx)(t, xx, d) * v
            - (l.dd)(t, xx, d) * w;
        if gap < -1e-9 {
            violations += 1;
        }
        worst = worst.min(gap);
    }
    ConvexityReport {
        violations,
        worst_gap: worst,
        samples,
    }
}

#[derive(Debug, Clone)]
pub struct SufficiencyReport {
    pub base_value: f64,
    pub gaps: Vec<f64>,
    pub min_gap: f64,
}

/// Evaluates J(x+v, T+ΔT) − J(x, T) for each perturbation; confirms the
/// almost-minimizer behavior of EL candidates, and reproduces the convex
/// counterexample where the gap goes negative.
pub fn sufficiency_epsilon_check(
    p: &ProblemSpec,
    x: &Path,
    t_terminal: f64,
    perturbations: &[(Path, f64)],
    grid: &QuadGrid,
) -> Result<SufficiencyReport> {
    let base = j_value(p, x, t_terminal, grid)?;
    let a = p.psi.a();
    let mut gaps = Vec::with_capacity(perturbations.len());
    let mut min_gap = f64::INFINITY;
    for (v, dt) in perturbations {
        let v_at_a = v.eval(a);
        if v_at_a.abs() > 1e-10 {
            return Err(Error::Validation(format!(
                "perturbation violates v(a) = 0 (got {v_at_a})"
            )));
        }
        let perturbed = x.add(v);
        let jp = j_value(p, &perturbed, t_terminal + dt, grid)?;
        let gap = jp - base;
        min_gap = min_gap.min(gap);
        gaps.push(gap);
    }
    Ok(SufficiencyReport {
        base_value: base,
        gaps,
        min_gap: if perturbations.is_empty() { 0.0 } else { min_gap },
    })
}

/// J(x, T): the cost functional by the trapezoid rule over the work grid.
pub fn j_value(p: &ProblemSpec, x: &Path, t_terminal: f64, grid: &QuadGrid) -> Result<f64> {
    let psi = &p.psi;
    check_terminal(psi, t_terminal)?;
    let a = psi.a();
    let wg = grid.resample(psi, a, t_terminal)?;
    let tn = wg.nodes();
    let vals: Vec<f64> = match &p.functional {
        Functional::Scalar(l) => {
            let d = caputo_left_table(x, p.order(), psi, &wg)?;
            tn.iter()
                .enumerate()
                .map(|(i, &t)| (l.l)(t, x.eval(t), d[i]))
                .collect()
        }
        Functional::Delay(dl) => {
            let (tau, theta) = match &p.kind {
                ProblemKind::Delay(d) => (d.tau, d.theta.clone()),
                _ => unreachable!(),
            };
            let d = caputo_left_table(x, p.order(), psi, &wg)?;
            let x_full = |t: f64| if t < a { theta(t) } else { x.eval(t) };
            tn.iter()
                .enumerate()
                .map(|(i, &t)| (dl.l)(t, x_full(t), x_full(t - tau), d[i]))
                .collect()
        }
        Functional::HighOrder(hl) => {
            let m = p.orders.len();
            let mut dtab = Vec::with_capacity(m);
            for o in &p.orders {
                dtab.push(caputo_left_table(x, o, psi, &wg)?);
            }
            let mut dnode = vec![0.0; m];
            tn.iter()
                .enumerate()
                .map(|(i, &t)| {
                    for c in 0..m {
                        dnode[c] = dtab[c][i];
                    }
                    (hl.l)(t, x.eval(t), &dnode)
                })
                .collect()
        }
    };
    Ok(trapezoid(tn, &vals))
}

/// Admissibility of the initial datum; exported for solver preflight.
pub fn check_candidate(p: &ProblemSpec, x: &Path) -> Result<()> {
    check_admissible(p, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterated_derivative_matches_polynomial() {
        // f(u) = u^3: (-d/du)^1 -> -3u^2; (-d/du)^2 -> +6u
        let f = |u: f64| u * u * u;
        let d1 = iterated_backward_derivative(&f, 1.0, 1e-3, 1);
        assert!((d1 + 3.0).abs() < 1e-6, "{d1}");
        let d2 = iterated_backward_derivative(&f, 1.0, 1e-3, 2);
        assert!((d2 - 6.0).abs() < 1e-5, "{d2}");
    }
}
