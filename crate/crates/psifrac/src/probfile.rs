//! Line-oriented problem files: `[section]` headers with `key = value`
//! lines, expressions as quoted strings. Diffable and free of structured
//! format dependencies.
//!
//! ```text
//! [problem]
//! kind = fundamental
//! alpha = 0.5
//! interval = 0 1.5
//! x_a = 0
//!
//! [psi]
//! expr = "t"
//!
//! [lagrangian]
//! L = "(d - s^0.5/gammafn(1.5))^2 + t^2 - 1"
//!
//! [candidate]
//! x = "s"
//!
//! [grid]
//! N = 2048
//! scheme = uniform-psi
//! ```
//!
//! Variable slots: `psi` may use only `t`; Lagrangians use `t, x, d`
//! (plus `xtau` for delay problems and `d1..dm` for high-order ones) and
//! may also read `s` = ψ(t) − ψ(a) and `alpha`; candidates use `t, s,
//! alpha`; `Phi` uses `t, alpha`. Partial-derivative keys follow the slot
//! numbering of the functional: `d2L` is ∂L/∂x, `d3L` is ∂L/∂d (or ∂L/∂xtau
//! for delay problems, whose ∂L/∂d is `d4L`), and high-order problems
//! address ∂L/∂d_n as `d(n+2)L`. Omitted partials are derived symbolically.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{self, differentiate, evaluate, Env, Expr, Var};
use crate::grid::{GridScheme, QuadGrid};
use crate::lagrangian::{DelayLagrangian, FnSlice, HighOrderLagrangian, Lagrangian};
use crate::ops::Order;
use crate::path::Path;
use crate::problem::{
    BoundaryCondition, Constraint, DelaySpec, Functional, ProblemKind, ProblemSpec,
};
use crate::psi::PsiMap;
use crate::solvers::{MinimizeConfig, RootConfig};

/// Raw parsed file: sections of key/value strings, order preserved inside
/// the maps for error messages only.
#[derive(Debug, Clone, Default)]
pub struct ProblemFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

/// Solver knobs collected from the `[solver]` section.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub t_bracket: Option<(f64, f64)>,
    pub alpha_bracket: (f64, f64),
    pub lambda_bracket: Option<(f64, f64)>,
    pub tol_x: f64,
    pub tol_f: f64,
    pub max_iter: usize,
    pub basis_size: usize,
    pub simplex_scale: f64,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            t_bracket: None,
            alpha_bracket: crate::solvers::DEFAULT_ORDER_BRACKET,
            lambda_bracket: None,
            tol_x: 1e-12,
            tol_f: 1e-12,
            max_iter: 200,
            basis_size: 3,
            simplex_scale: 0.5,
            max_evals: 5000,
            seed: 0,
        }
    }
}

impl SolverSettings {
    pub fn root_config(&self, psi: &PsiMap) -> Result<RootConfig> {
        let bracket = self
            .t_bracket
            .unwrap_or_else(|| crate::solvers::default_terminal_bracket(psi.a(), psi.b()));
        Ok(RootConfig {
            bracket,
            tol_x: self.tol_x,
            tol_f: self.tol_f,
            max_iter: self.max_iter,
        })
    }

    pub fn order_config(&self) -> RootConfig {
        RootConfig {
            bracket: self.alpha_bracket,
            tol_x: self.tol_x,
            tol_f: self.tol_f,
            max_iter: self.max_iter,
        }
    }

    pub fn minimize_config(&self) -> MinimizeConfig {
        MinimizeConfig {
            basis_size: self.basis_size,
            simplex_scale: self.simplex_scale,
            max_evals: self.max_evals,
            seed: self.seed,
            t_bracket: self.t_bracket,
        }
    }
}

/// A compiled problem ready for the evaluators and solvers.
pub struct LoadedProblem {
    pub spec: ProblemSpec,
    pub candidate: Option<Path>,
    pub grid: QuadGrid,
    pub solver: SolverSettings,
}

const SECTIONS: &[&str] = &[
    "problem",
    "psi",
    "lagrangian",
    "constraint",
    "candidate",
    "grid",
    "solver",
];

const KEYS: &[(&str, &[&str])] = &[
    (
        "problem",
        &["kind", "alpha", "interval", "x_a", "A", "x_A", "tau", "lambda_hint"],
    ),
    ("psi", &["expr"]),
    (
        "lagrangian",
        &["L", "d2L", "d3L", "d4L", "d5L", "d6L", "d7L", "d8L", "d9L", "d22L", "d23L", "d33L"],
    ),
    ("constraint", &["M", "d2M", "d3M", "Phi", "Phi_prime"]),
    (
        "candidate",
        &["x", "dx_psi", "dx_psi2", "dx_psi3", "dx_psi4", "theta"],
    ),
    ("grid", &["N", "scheme"]),
    (
        "solver",
        &[
            "t_bracket",
            "alpha_bracket",
            "lambda_bracket",
            "tol_x",
            "tol_f",
            "max_iter",
            "basis_size",
            "simplex_scale",
            "max_evals",
            "seed",
        ],
    ),
];

impl ProblemFile {
    pub fn parse(src: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw) in src.lines().enumerate() {
            // strip # comments, but not inside a quoted expression
            let line = match raw.find('#') {
                Some(pos) if raw[..pos].matches('"').count() % 2 == 0 => &raw[..pos],
                _ => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(Error::Validation(format!(
                        "line {}: unknown section [{name}]",
                        lineno + 1
                    )));
                }
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Validation(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let section = current.as_ref().ok_or_else(|| {
                Error::Validation(format!(
                    "line {}: key outside any [section]",
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_string();
            let allowed = KEYS
                .iter()
                .find(|(s, _)| s == section)
                .map(|(_, ks)| *ks)
                .unwrap_or(&[]);
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Validation(format!(
                    "line {}: unknown key `{key}` in section [{section}]",
                    lineno + 1
                )));
            }
            let map = sections.get_mut(section).unwrap();
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Validation(format!(
                    "line {}: duplicate key `{key}` in [{section}]",
                    lineno + 1
                )));
            }
        }
        Ok(Self { sections })
    }

    fn section(&self, name: &str) -> Result<&BTreeMap<String, String>> {
        self.sections
            .get(name)
            .ok_or_else(|| Error::Validation(format!("missing required section [{name}]")))
    }

    fn get<'a>(&'a self, section: &str, key: &str) -> Option<&'a str> {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .map(|s| s.as_str())
    }

    fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| {
            Error::Validation(format!("missing `{key}` in section [{section}]"))
        })
    }

    fn reject(&self, section: &str, key: &str, why: &str) -> Result<()> {
        if self.get(section, key).is_some() {
            return Err(Error::Validation(format!(
                "key `{key}` in [{section}] is only valid for {why}"
            )));
        }
        Ok(())
    }

    /// Full validation plus compilation into runnable form.
    pub fn compile(&self) -> Result<LoadedProblem> {
        self.compile_at(None)
    }

    /// [`ProblemFile::compile`] with the base order replaced; expressions
    /// reading `alpha` see the override. Used by order sweeps.
    pub fn compile_at(&self, alpha_override: Option<f64>) -> Result<LoadedProblem> {
        let problem = self.section("problem")?;
        let _ = problem;
        let kind_name = self.require("problem", "kind")?;

        // interval and orders first: everything downstream needs them
        let interval = parse_numbers(self.require("problem", "interval")?)?;
        if interval.len() != 2 {
            return Err(Error::Validation("interval needs exactly two numbers: a b".into()));
        }
        let (a, b) = (interval[0], interval[1]);
        let mut alphas = parse_numbers(self.require("problem", "alpha")?)?;
        if alphas.is_empty() {
            return Err(Error::Validation("at least one alpha is required".into()));
        }
        if let Some(al) = alpha_override {
            alphas[0] = al;
        }
        let mut orders = Vec::with_capacity(alphas.len());
        for al in &alphas {
            orders.push(Order::new(*al)?);
        }
        let alpha0 = alphas[0];

        // psi and its symbolic derivative
        let psi_src = unquote(self.require("psi", "expr")?)?;
        let psi_ast = expr::parse(&psi_src)?;
        psi_ast.check_vars(&[Var::T], "psi")?;
        let dpsi_ast = differentiate(&psi_ast, Var::T).map_err(|e| {
            Error::Validation(format!("psi expression must be differentiable in t: {e}"))
        })?;
        let psi = {
            let pa = psi_ast.clone();
            let da = dpsi_ast.clone();
            PsiMap::new(
                a,
                b,
                move |t| eval_or_nan(&pa, &Env { t: Some(t), ..Default::default() }),
                move |t| eval_or_nan(&da, &Env { t: Some(t), ..Default::default() }),
            )?
        };

        // boundary condition
        let x_a = match self.get("problem", "x_a") {
            None | Some("free") => BoundaryCondition::Free,
            Some(v) => BoundaryCondition::Fixed(parse_one(v)?),
        };

        let ctx = ExprCtx {
            psi: psi.clone(),
            alpha: alpha0,
        };

        // kind-specific assembly
        let kind_fields = |field: &str, ok: bool, why: &str| -> Result<()> {
            if !ok {
                self.reject("problem", field, why)?;
            }
            Ok(())
        };

        let (kind, functional) = match kind_name {
            "fundamental" | "optimal-order" => {
                kind_fields("A", false, "extended problems")?;
                kind_fields("x_A", false, "extended problems")?;
                kind_fields("tau", false, "delay problems")?;
                self.reject_section("constraint", "isoperimetric problems")?;
                let l = self.compile_scalar_lagrangian(&ctx, "lagrangian", "L")?;
                let kind = if kind_name == "fundamental" {
                    ProblemKind::Fundamental
                } else {
                    ProblemKind::OptimalOrder
                };
                (kind, Functional::Scalar(l))
            }
            "extended" => {
                kind_fields("tau", false, "delay problems")?;
                self.reject_section("constraint", "isoperimetric problems")?;
                let inner = parse_one(self.require("problem", "A")?)?;
                let x_inner_free = match self.get("problem", "x_A") {
                    None => false,
                    Some("free") => true,
                    Some(v) => {
                        return Err(Error::Validation(format!(
                            "x_A supports only `free` (fixed inner values are implied by the candidate), got `{v}`"
                        )))
                    }
                };
                let l = self.compile_scalar_lagrangian(&ctx, "lagrangian", "L")?;
                (
                    ProblemKind::Extended {
                        inner_start: inner,
                        x_a_free: matches!(x_a, BoundaryCondition::Free),
                        x_inner_free,
                    },
                    Functional::Scalar(l),
                )
            }
            "isoperimetric" => {
                kind_fields("A", false, "extended problems")?;
                kind_fields("tau", false, "delay problems")?;
                let l = self.compile_scalar_lagrangian(&ctx, "lagrangian", "L")?;
                let m = self.compile_constraint_m(&ctx)?;
                let phi_src = unquote(self.require("constraint", "Phi")?)?;
                let phi_ast = expr::parse(&phi_src)?;
                phi_ast.check_vars(&[Var::T, Var::Alpha], "Phi")?;
                let phi = ctx.time_closure(phi_ast.clone());
                let phi_prime: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
                    match self.get("constraint", "Phi_prime") {
                        Some(src) => {
                            let ast = expr::parse(&unquote(src)?)?;
                            ast.check_vars(&[Var::T, Var::Alpha], "Phi_prime")?;
                            ctx.time_closure(ast)
                        }
                        None => {
                            // central differences of Phi
                            let phi_inner = ctx.time_closure(phi_ast.clone());
                            let h = 1e-6;
                            Arc::new(move |t| {
                                (phi_inner(t + h) - phi_inner(t - h)) / (2.0 * h)
                            })
                        }
                    };
                let lambda_hint = match self.get("problem", "lambda_hint") {
                    Some(v) => Some(parse_one(v)?),
                    None => None,
                };
                (
                    ProblemKind::Isoperimetric {
                        constraint: Constraint { m, phi, phi_prime },
                        lambda_hint,
                    },
                    Functional::Scalar(l),
                )
            }
            "delay" => {
                kind_fields("A", false, "extended problems")?;
                self.reject_section("constraint", "isoperimetric problems")?;
                let tau = parse_one(self.require("problem", "tau")?)?;
                let theta_src = unquote(self.require("candidate", "theta")?)?;
                let theta_ast = expr::parse(&theta_src)?;
                theta_ast.check_vars(&[Var::T, Var::Alpha], "theta")?;
                let theta = ctx.time_closure(theta_ast);
                let dl = self.compile_delay_lagrangian(&ctx)?;
                (
                    ProblemKind::Delay(DelaySpec { tau, theta }),
                    Functional::Delay(dl),
                )
            }
            "high-order" => {
                kind_fields("A", false, "extended problems")?;
                kind_fields("tau", false, "delay problems")?;
                self.reject_section("constraint", "isoperimetric problems")?;
                let hl = self.compile_high_order_lagrangian(&ctx, orders.len())?;
                (ProblemKind::HighOrder, Functional::HighOrder(hl))
            }
            other => {
                return Err(Error::Validation(format!(
                    "unknown problem kind `{other}`; expected fundamental | extended | \
                     isoperimetric | delay | high-order | optimal-order"
                )))
            }
        };

        let spec = ProblemSpec::new(kind, psi.clone(), functional, orders, x_a)?;

        // candidate path
        let candidate = match self.get("candidate", "x") {
            Some(src) => Some(self.compile_candidate(&ctx, &unquote(src)?, spec.orders.len())?),
            None => None,
        };

        // grid
        let n_cells = match self.get("grid", "N") {
            Some(v) => parse_one(v)? as usize,
            None => 2048,
        };
        let scheme = match self.get("grid", "scheme") {
            None | Some("uniform-psi") => GridScheme::UniformInPsi,
            Some("uniform-t") => GridScheme::UniformInT,
            Some(other) => {
                return Err(Error::Validation(format!(
                    "unknown grid scheme `{other}`; expected uniform-psi | uniform-t"
                )))
            }
        };
        let grid = match scheme {
            GridScheme::UniformInPsi => QuadGrid::uniform_in_psi(&psi, n_cells)?,
            GridScheme::UniformInT => QuadGrid::uniform_in_t(&psi, n_cells)?,
        };

        // solver settings
        let mut solver = SolverSettings::default();
        if let Some(v) = self.get("solver", "t_bracket") {
            let ns = parse_numbers(v)?;
            if ns.len() != 2 {
                return Err(Error::Validation("t_bracket needs two numbers".into()));
            }
            solver.t_bracket = Some((ns[0], ns[1]));
        }
        if let Some(v) = self.get("solver", "alpha_bracket") {
            let ns = parse_numbers(v)?;
            if ns.len() != 2 {
                return Err(Error::Validation("alpha_bracket needs two numbers".into()));
            }
            solver.alpha_bracket = (ns[0], ns[1]);
        }
        if let Some(v) = self.get("solver", "lambda_bracket") {
            let ns = parse_numbers(v)?;
            if ns.len() != 2 {
                return Err(Error::Validation("lambda_bracket needs two numbers".into()));
            }
            solver.lambda_bracket = Some((ns[0], ns[1]));
        }
        if let Some(v) = self.get("solver", "tol_x") {
            solver.tol_x = parse_one(v)?;
        }
        if let Some(v) = self.get("solver", "tol_f") {
            solver.tol_f = parse_one(v)?;
        }
        if let Some(v) = self.get("solver", "max_iter") {
            solver.max_iter = parse_one(v)? as usize;
        }
        if let Some(v) = self.get("solver", "basis_size") {
            solver.basis_size = parse_one(v)? as usize;
        }
        if let Some(v) = self.get("solver", "simplex_scale") {
            solver.simplex_scale = parse_one(v)?;
        }
        if let Some(v) = self.get("solver", "max_evals") {
            solver.max_evals = parse_one(v)? as usize;
        }
        if let Some(v) = self.get("solver", "seed") {
            solver.seed = parse_one(v)? as u64;
        }

        Ok(LoadedProblem {
            spec,
            candidate,
            grid,
            solver,
        })
    }

    fn reject_section(&self, name: &str, why: &str) -> Result<()> {
        if self.sections.contains_key(name) {
            return Err(Error::Validation(format!(
                "section [{name}] is only valid for {why}"
            )));
        }
        Ok(())
    }

    fn compile_scalar_lagrangian(
        &self,
        ctx: &ExprCtx,
        section: &str,
        key: &str,
    ) -> Result<Lagrangian> {
        let src = unquote(self.require(section, key)?)?;
        let ast = expr::parse(&src)?;
        let allowed = [Var::T, Var::X, Var::D, Var::S, Var::Alpha];
        ast.check_vars(&allowed, "scalar Lagrangian")?;

        let dx_ast = self.partial(section, "d2L", &ast, Var::X, &allowed)?;
        let dd_ast = self.partial(section, "d3L", &ast, Var::D, &allowed)?;
        let mut l = Lagrangian::new(
            ctx.scalar_closure3(ast.clone()),
            ctx.scalar_closure3(dx_ast.clone()),
            ctx.scalar_closure3(dd_ast.clone()),
        );
        // second partials: explicit, else derived from the first partials
        let dxx = self.partial_opt(section, "d22L", &dx_ast, Var::X, &allowed)?;
        let dxd = self.partial_opt(section, "d23L", &dx_ast, Var::D, &allowed)?;
        let ddd = self.partial_opt(section, "d33L", &dd_ast, Var::D, &allowed)?;
        if let (Some(dxx), Some(dxd), Some(ddd)) = (dxx, dxd, ddd) {
            l.dxx = Some(ctx.fn3(dxx));
            l.dxd = Some(ctx.fn3(dxd));
            l.ddd = Some(ctx.fn3(ddd));
        }
        self.validate_explicit_partials(ctx, section, &ast)?;
        Ok(l)
    }

    fn compile_constraint_m(&self, ctx: &ExprCtx) -> Result<Lagrangian> {
        let src = unquote(self.require("constraint", "M")?)?;
        let ast = expr::parse(&src)?;
        let allowed = [Var::T, Var::X, Var::D, Var::S, Var::Alpha];
        ast.check_vars(&allowed, "constraint integrand")?;
        let dx_ast = match self.get("constraint", "d2M") {
            Some(s) => expr::parse(&unquote(s)?)?,
            None => differentiate(&ast, Var::X)?,
        };
        let dd_ast = match self.get("constraint", "d3M") {
            Some(s) => expr::parse(&unquote(s)?)?,
            None => differentiate(&ast, Var::D)?,
        };
        let mut m = Lagrangian::new(
            ctx.scalar_closure3(ast.clone()),
            ctx.scalar_closure3(dx_ast.clone()),
            ctx.scalar_closure3(dd_ast.clone()),
        );
        if let (Ok(dxx), Ok(dxd), Ok(ddd)) = (
            differentiate(&dx_ast, Var::X),
            differentiate(&dx_ast, Var::D),
            differentiate(&dd_ast, Var::D),
        ) {
            m.dxx = Some(ctx.fn3(dxx));
            m.dxd = Some(ctx.fn3(dxd));
            m.ddd = Some(ctx.fn3(ddd));
        }
        Ok(m)
    }

    fn compile_delay_lagrangian(&self, ctx: &ExprCtx) -> Result<DelayLagrangian> {
        let src = unquote(self.require("lagrangian", "L")?)?;
        let ast = expr::parse(&src)?;
        let allowed = [Var::T, Var::X, Var::XTau, Var::D, Var::S, Var::Alpha];
        ast.check_vars(&allowed, "delay Lagrangian")?;
        // delay slot numbering: ∂₂ = x, ∂₃ = xtau, ∂₄ = d
        let dx = self.partial("lagrangian", "d2L", &ast, Var::X, &allowed)?;
        let dxt = self.partial("lagrangian", "d3L", &ast, Var::XTau, &allowed)?;
        let dd = self.partial("lagrangian", "d4L", &ast, Var::D, &allowed)?;
        Ok(DelayLagrangian::new(
            ctx.scalar_closure4(ast),
            ctx.scalar_closure4(dx),
            ctx.scalar_closure4(dxt),
            ctx.scalar_closure4(dd),
        ))
    }

    fn compile_high_order_lagrangian(
        &self,
        ctx: &ExprCtx,
        m: usize,
    ) -> Result<HighOrderLagrangian> {
        let src = unquote(self.require("lagrangian", "L")?)?;
        let ast = expr::parse(&src)?;
        let mut allowed = vec![Var::T, Var::X, Var::D, Var::S, Var::Alpha];
        for k in 1..=m {
            allowed.push(Var::DN(k as u8));
        }
        ast.check_vars(&allowed, "high-order Lagrangian")?;
        let dx = self.partial("lagrangian", "d2L", &ast, Var::X, &allowed)?;
        let mut dd: Vec<FnSlice> = Vec::with_capacity(m);
        for k in 1..=m {
            // ∂_{k+2}L is the derivative in d_k
            let key = format!("d{}L", k + 2);
            let ast_k = match self.get("lagrangian", &key) {
                Some(s) => expr::parse(&unquote(s)?)?,
                None => differentiate(&ast, Var::DN(k as u8))?,
            };
            dd.push(ctx.slice_closure(ast_k, m));
        }
        Ok(HighOrderLagrangian {
            l: ctx.slice_closure(ast, m),
            dx: ctx.slice_closure(dx, m),
            dd,
        })
    }

    fn compile_candidate(&self, ctx: &ExprCtx, src: &str, m: usize) -> Result<Path> {
        let ast = expr::parse(src)?;
        ast.check_vars(&[Var::T, Var::S, Var::Alpha], "candidate")?;
        let x = ctx.path_closure(ast.clone());
        let mut path = Path::new(move |t| x(t));
        let pure_s = !ast.variables().contains(&Var::T);
        let mut level_ast = ast.clone();
        if let Some(dsrc) = self.get("candidate", "dx_psi") {
            let dast = expr::parse(&unquote(dsrc)?)?;
            dast.check_vars(&[Var::T, Var::S, Var::Alpha], "candidate derivative")?;
            let dx = ctx.path_closure(dast.clone());
            path = path.with_dx_psi(move |t| dx(t));
            level_ast = dast;
        } else if pure_s {
            // pure function of s: (1/ψ')d/dt = d/ds, available symbolically
            if let Ok(dast) = differentiate(&ast, Var::S) {
                let dx = ctx.path_closure(dast.clone());
                path = path.with_dx_psi(move |t| dx(t));
                level_ast = dast;
            }
        }
        // higher ψ-derivatives: explicit keys, else repeated d/ds for
        // pure-s candidates of high-order problems
        let mut higher: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>> = Vec::new();
        for level in 2..=m.max(1) {
            let key = format!("dx_psi{level}");
            match self.get("candidate", &key) {
                Some(dsrc) => {
                    let dast = expr::parse(&unquote(dsrc)?)?;
                    dast.check_vars(&[Var::T, Var::S, Var::Alpha], "candidate derivative")?;
                    let f = ctx.path_closure(dast.clone());
                    higher.push(Arc::new(move |t| f(t)));
                    level_ast = dast;
                }
                None if pure_s => match differentiate(&level_ast, Var::S) {
                    Ok(dast) => {
                        let f = ctx.path_closure(dast.clone());
                        higher.push(Arc::new(move |t| f(t)));
                        level_ast = dast;
                    }
                    Err(_) => break,
                },
                None => break,
            }
        }
        if !higher.is_empty() {
            path = path.with_higher_dx_psi(higher);
        }
        Ok(path)
    }

    fn partial(
        &self,
        section: &str,
        key: &str,
        l_ast: &Expr,
        wrt: Var,
        allowed: &[Var],
    ) -> Result<Expr> {
        match self.get(section, key) {
            Some(src) => {
                let ast = expr::parse(&unquote(src)?)?;
                ast.check_vars(allowed, key)?;
                Ok(ast)
            }
            None => differentiate(l_ast, wrt),
        }
    }

    fn partial_opt(
        &self,
        section: &str,
        key: &str,
        base: &Expr,
        wrt: Var,
        allowed: &[Var],
    ) -> Result<Option<Expr>> {
        match self.get(section, key) {
            Some(src) => {
                let ast = expr::parse(&unquote(src)?)?;
                ast.check_vars(allowed, key)?;
                Ok(Some(ast))
            }
            None => Ok(differentiate(base, wrt).ok()),
        }
    }

    /// Explicitly supplied first partials must agree with central
    /// differences of L at 100 quasi-random interior points.
    fn validate_explicit_partials(
        &self,
        ctx: &ExprCtx,
        section: &str,
        l_ast: &Expr,
    ) -> Result<()> {
        let explicit_dx = self.get(section, "d2L").is_some();
        let explicit_dd = self.get(section, "d3L").is_some();
        if !explicit_dx && !explicit_dd {
            return Ok(());
        }
        let l = self.compile_scalar_lagrangian_unvalidated(ctx, section)?;
        let a = ctx.psi.a();
        let b = ctx.psi.b();
        let span = b - a;
        let _ = l_ast;
        l.validate_partials(
            (a + 0.05 * span, b - 0.05 * span),
            (-1.0, 1.0),
            (-1.0, 1.0),
            100,
        )
    }

    fn compile_scalar_lagrangian_unvalidated(
        &self,
        ctx: &ExprCtx,
        section: &str,
    ) -> Result<Lagrangian> {
        let src = unquote(self.require(section, "L")?)?;
        let ast = expr::parse(&src)?;
        let allowed = [Var::T, Var::X, Var::D, Var::S, Var::Alpha];
        let dx_ast = self.partial(section, "d2L", &ast, Var::X, &allowed)?;
        let dd_ast = self.partial(section, "d3L", &ast, Var::D, &allowed)?;
        Ok(Lagrangian::new(
            ctx.scalar_closure3(ast),
            ctx.scalar_closure3(dx_ast),
            ctx.scalar_closure3(dd_ast),
        ))
    }
}

/// Shared compile context: the kernel map for the `s` binding plus the
/// problem's base order for `alpha`.
struct ExprCtx {
    psi: PsiMap,
    alpha: f64,
}

impl ExprCtx {
    fn env_at(&self, t: f64) -> Env {
        Env {
            t: Some(t),
            s: Some(self.psi.eval(t) - self.psi.eval(self.psi.a())),
            alpha: Some(self.alpha),
            ..Default::default()
        }
    }

    fn scalar_closure3(
        &self,
        ast: Expr,
    ) -> impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static {
        let ctx = self.clone_ctx();
        move |t, x, d| {
            let mut env = ctx.env_at(t);
            env.x = Some(x);
            env.d = Some(d);
            eval_or_nan(&ast, &env)
        }
    }

    fn fn3(&self, ast: Expr) -> crate::lagrangian::Fn3 {
        Arc::new(self.scalar_closure3(ast))
    }

    fn scalar_closure4(
        &self,
        ast: Expr,
    ) -> impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static {
        let ctx = self.clone_ctx();
        move |t, x, xtau, d| {
            let mut env = ctx.env_at(t);
            env.x = Some(x);
            env.xtau = Some(xtau);
            env.d = Some(d);
            eval_or_nan(&ast, &env)
        }
    }

    fn slice_closure(&self, ast: Expr, m: usize) -> FnSlice {
        let ctx = self.clone_ctx();
        Arc::new(move |t, x, ds: &[f64]| {
            let mut env = ctx.env_at(t);
            env.x = Some(x);
            for k in 0..m.min(ds.len()).min(9) {
                env.dn[k] = Some(ds[k]);
            }
            eval_or_nan(&ast, &env)
        })
    }

    fn path_closure(&self, ast: Expr) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        let ctx = self.clone_ctx();
        move |t| eval_or_nan(&ast, &ctx.env_at(t))
    }

    fn time_closure(&self, ast: Expr) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        let ctx = self.clone_ctx();
        Arc::new(move |t| eval_or_nan(&ast, &ctx.env_at(t)))
    }

    fn clone_ctx(&self) -> ExprCtx {
        ExprCtx {
            psi: self.psi.clone(),
            alpha: self.alpha,
        }
    }
}

/// Evaluation inside numeric kernels: domain failures surface as NaN, which
/// the quadratures and validators catch.
fn eval_or_nan(ast: &Expr, env: &Env) -> f64 {
    evaluate(ast, env).unwrap_or(f64::NAN)
}

fn unquote(s: &str) -> Result<String> {
    let t = s.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        Ok(t[1..t.len() - 1].to_string())
    } else {
        Err(Error::Validation(format!(
            "expressions must be double-quoted strings, got `{t}`"
        )))
    }
}

fn parse_one(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Validation(format!("expected a number, got `{s}`")))
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(parse_one).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = r#"
[problem]
kind = fundamental
alpha = 0.5
interval = 0 1.5
x_a = 0

[psi]
expr = "t"

[lagrangian]
L = "(d - s^0.5/gammafn(1.5))^2 + t^2 - 1"
d33L = "2"

[candidate]
x = "s"

[grid]
N = 512
scheme = uniform-psi
"#;

    #[test]
    fn parses_and_compiles_the_bundled_form() {
        let pf = ProblemFile::parse(EXAMPLE1).unwrap();
        let loaded = pf.compile().unwrap();
        assert_eq!(loaded.grid.n_cells(), 512);
        let x = loaded.candidate.unwrap();
        assert_eq!(x.eval(0.0), 0.0);
        // candidate in s only: symbolic d/ds gives the unit derivative
        assert!(x.has_analytic_dx());
        assert!((x.eval_dx_psi(0.7, &loaded.spec.psi) - 1.0).abs() < 1e-12);

        // the compiled Lagrangian matches the native one along the extremal
        let l = loaded.spec.scalar_lagrangian().unwrap();
        let k = |t: f64| t.powf(0.5) / crate::special::gamma(1.5).unwrap();
        for t in [0.2, 0.5, 1.0] {
            let got = (l.l)(t, t, k(t));
            assert!((got - (t * t - 1.0)).abs() < 1e-12, "L at {t}: {got}");
            let gd = (l.dd)(t, t, k(t));
            assert!(gd.abs() < 1e-12);
        }
        assert!(l.ddd.is_some());
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        assert!(ProblemFile::parse("[problem]\nbogus = 1").is_err());
        assert!(ProblemFile::parse("[nonsense]\n").is_err());
        assert!(ProblemFile::parse("kind = fundamental").is_err());
        // duplicate key
        assert!(ProblemFile::parse("[problem]\nkind = fundamental\nkind = delay").is_err());
    }

    #[test]
    fn kind_conditional_keys_enforced() {
        // tau on a fundamental problem
        let src = EXAMPLE1.replace("x_a = 0", "x_a = 0\ntau = 0.1");
        assert!(ProblemFile::parse(&src).unwrap().compile().is_err());
        // extended without A
        let src = EXAMPLE1.replace("kind = fundamental", "kind = extended");
        assert!(ProblemFile::parse(&src).unwrap().compile().is_err());
        // delay without theta
        let src = EXAMPLE1.replace("kind = fundamental", "kind = delay\ntau = 0.2");
        assert!(ProblemFile::parse(&src).unwrap().compile().is_err());
    }

    #[test]
    fn psi_slot_restricted_to_t() {
        let src = EXAMPLE1.replace("expr = \"t\"", "expr = \"t + x\"");
        assert!(ProblemFile::parse(&src).unwrap().compile().is_err());
    }

    #[test]
    fn wrong_explicit_partial_caught_by_validation() {
        let src = EXAMPLE1.replace(
            "d33L = \"2\"",
            "d3L = \"7 * d\"",
        );
        let err = ProblemFile::parse(&src).unwrap().compile();
        assert!(err.is_err(), "wrong explicit partial must be rejected");
    }

    #[test]
    fn sqrt_kernel_compiles() {
        let src = EXAMPLE1.replace("expr = \"t\"", "expr = \"sqrt(t + 1)\"");
        let loaded = ProblemFile::parse(&src).unwrap().compile().unwrap();
        assert!((loaded.spec.psi.eval(0.0) - 1.0).abs() < 1e-12);
        assert!((loaded.spec.psi.deriv(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn solver_settings_parsed() {
        let src = format!(
            "{EXAMPLE1}\n[solver]\nt_bracket = 0.1 1.4\nseed = 9\nmax_evals = 700\n"
        );
        let loaded = ProblemFile::parse(&src).unwrap().compile().unwrap();
        assert_eq!(loaded.solver.t_bracket, Some((0.1, 1.4)));
        assert_eq!(loaded.solver.seed, 9);
        assert_eq!(loaded.solver.max_evals, 700);
    }
}
