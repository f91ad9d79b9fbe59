//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass/fail line (visible under `--nocapture`).
//!
//! Criterion 2 is split per kernel; the sqrt-shift half documents a known
//! irreproducibility: the 0.2827 reference order is not a root of either
//! form of the stationarity integral (the verified stationary order of that
//! family is 0.588977…, confirmed by an independent high-precision scan of
//! the cost as a function of the order). The test asserts the reference
//! value anyway and stays red rather than being weakened.

use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use psifrac::expr::{differentiate, evaluate, parse, BinOp, Env, Expr, UnOp, Var};
use psifrac::lagrangian::{DelayLagrangian, Lagrangian};
use psifrac::ops::{
    caputo_left, composition_residual_left, integration_by_parts_residual, Order,
};
use psifrac::presets::{self, PsiChoice};
use psifrac::problem::{
    BoundaryCondition, Constraint, DelaySpec, Functional, ProblemKind, ProblemSpec,
};
use psifrac::solvers::{
    direct_minimize, solve_isoperimetric, solve_optimal_order, MinimizeConfig, RootConfig,
    DEFAULT_ORDER_BRACKET,
};
use psifrac::special::{gamma, mittag_leffler, MlParams};
use psifrac::variational::{
    delay_residuals, el_residual, extended_residuals, high_order_residuals,
    isoperimetric_residuals, j_value, legendre_check, sufficiency_epsilon_check, TOL_LEGENDRE,
};
use psifrac::{Path, PsiMap, QuadGrid};

fn verdict(name: &str, desc: &str, pass: bool, detail: &str) -> bool {
    println!(
        "[{name}] {desc}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

#[test]
fn criterion_1_example1_reproduction() {
    let start = Instant::now();
    let (p, x, t_star) = presets::example1(PsiChoice::Identity, 0.5, 1.5).unwrap();
    let grid = QuadGrid::uniform_in_psi(&p.psi, 2048).unwrap();
    let rep = el_residual(&p, &x, t_star, &grid).unwrap();
    let j = j_value(&p, &x, t_star, &grid).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let ok = rep.el_max <= 1e-2
        && rep.trans_lagrangian.abs() <= 1e-12
        && (j + 2.0 / 3.0).abs() <= 1e-3
        && elapsed <= 10.0;
    let detail = format!(
        "el_max = {:.2e}, trans_lagrangian = {:.2e}, J = {:.8}, {:.2}s",
        rep.el_max, rep.trans_lagrangian, j, elapsed
    );
    assert!(verdict("criterion 1", "first demo extremal reproduction", ok, &detail));
}

#[test]
fn criterion_2a_optimal_order_identity_kernel() {
    let start = Instant::now();
    let (p, _) = presets::example3(PsiChoice::Identity, 0.5, 60.0).unwrap();
    let grid = QuadGrid::uniform_in_psi(&p.psi, 512).unwrap();
    let cfg = RootConfig {
        bracket: DEFAULT_ORDER_BRACKET,
        tol_x: 1e-12,
        tol_f: 1e-10,
        max_iter: 200,
    };
    let sol = solve_optimal_order(&p, &cfg, &grid).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = (sol.alpha - 0.2677).abs() <= 0.005
        && sol.stationarity_value.abs() <= 1e-6
        && elapsed <= 30.0;
    let detail = format!(
        "alpha* = {:.6}, |integral| = {:.2e}, {:.2}s",
        sol.alpha, sol.stationarity_value, elapsed
    );
    assert!(verdict(
        "criterion 2a",
        "optimal order, identity kernel (reference 0.2677)",
        ok,
        &detail
    ));
}

#[test]
fn criterion_2b_optimal_order_sqrt_kernel() {
    let start = Instant::now();
    let (p, _) = presets::example3(PsiChoice::SqrtShift, 0.5, 60.0).unwrap();
    let grid = QuadGrid::uniform_in_psi(&p.psi, 512).unwrap();
    let cfg = RootConfig {
        bracket: DEFAULT_ORDER_BRACKET,
        tol_x: 1e-12,
        tol_f: 1e-10,
        max_iter: 200,
    };
    let sol = solve_optimal_order(&p, &cfg, &grid).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = (sol.alpha - 0.2827).abs() <= 0.005
        && sol.stationarity_value.abs() <= 1e-6
        && elapsed <= 30.0;
    let detail = format!(
        "alpha* = {:.6} vs reference 0.2827, |integral| = {:.2e}, psi'-variant root = {:?}, {:.2}s",
        sol.alpha, sol.stationarity_value, sol.with_psi_prime_root, elapsed
    );
    let pass = verdict(
        "criterion 2b",
        "optimal order, sqrt-shift kernel (reference 0.2827)",
        ok,
        &detail,
    );
    assert!(
        pass,
        "KNOWN RED: neither form of the stationarity integral has a root near 0.2827 for the \
         sqrt-shift kernel. The derivative-of-cost form roots at {:.6} — independently verified \
         as the argmin of the cost by a 30-digit scan — and the psi'-variant form has no root in \
         (0,1) at all ({:?}). The solver therefore cannot return the reference value; the red \
         verdict is recorded rather than the tolerance widened.",
        sol.alpha,
        sol.with_psi_prime_root
    );
}

#[test]
fn criterion_3_isoperimetric_reproduction() {
    let alpha = 0.5;
    let (p, x, _) = presets::example2(alpha, 1.5).unwrap();
    let grid = QuadGrid::uniform_in_psi(&p.psi, 2048).unwrap();
    let cfg = RootConfig::new(0.015, 1.5).unwrap();
    let sol = solve_isoperimetric(&p, &x, &cfg, &grid).unwrap();
    let k = sol.t_terminal.powf(1.0 - alpha) / gamma(2.0 - alpha).unwrap();
    let terminal_eq = sol.t_terminal.powi(2) - 1.0 + 2.0 * k * k;
    let rep = isoperimetric_residuals(&p, &x, sol.t_terminal, sol.lambda, &grid).unwrap();
    let ok = sol.lambda == -2.0
        && terminal_eq.abs() <= 1e-10
        && rep.constraint_defect.unwrap() <= 1e-6
        && rep.el_max <= 1e-2;
    let detail = format!(
        "T* = {:.10}, terminal-eq residual = {:.2e}, defect = {:.2e}, el_max = {:.2e}",
        sol.t_terminal,
        terminal_eq,
        rep.constraint_defect.unwrap(),
        rep.el_max
    );
    assert!(verdict("criterion 3", "isoperimetric demo reproduction", ok, &detail));
}

/// d/dw E_α(λ w^α) = λ w^{α-1} Σ_k (λ w^α)^k / Γ(α(k+1)); series oracle for
/// the eigenfunction paths.
fn ml_eigen_dx(alpha: f64, lambda: f64, w: f64) -> f64 {
    if w == 0.0 {
        return f64::INFINITY;
    }
    let z = lambda * w.powf(alpha);
    let mut s = 0.0;
    for k in 0..200 {
        let term = z.powi(k) / gamma(alpha * k as f64 + alpha).unwrap();
        s += term;
        if term.abs() < 1e-18 * s.abs().max(1.0) && k > 4 {
            break;
        }
    }
    lambda * w.powf(alpha - 1.0) * s
}

fn ml(alpha: f64, z: f64) -> f64 {
    mittag_leffler(MlParams::new(alpha, z).unwrap()).unwrap()
}

#[test]
fn criterion_4_operator_identities() {
    let kernels = [
        PsiChoice::Identity.build(0.0, 1.0).unwrap(),
        PsiChoice::SqrtShift.build(0.0, 1.0).unwrap(),
    ];
    let mut worst_power: f64 = 0.0;
    let mut worst_eigen: f64 = 0.0;
    for psi in &kernels {
        let grid = QuadGrid::uniform_in_psi(psi, 4096).unwrap();
        for alpha in [0.25, 0.5, 0.75] {
            let ord = Order::new(alpha).unwrap();
            for beta in [2.0, 2.5, 3.0, 4.0] {
                let pc = psi.clone();
                let x = Path::new({
                    let p = pc.clone();
                    move |t| (p.eval(t) - p.eval(p.a())).powf(beta - 1.0)
                })
                .with_dx_psi({
                    let p = pc.clone();
                    move |t| (beta - 1.0) * (p.eval(t) - p.eval(p.a())).powf(beta - 2.0)
                });
                for t in [0.5, 0.95] {
                    let w = psi.eval(t) - psi.eval(psi.a());
                    if w < 0.1 {
                        continue;
                    }
                    let expect = gamma(beta).unwrap() / gamma(beta - alpha).unwrap()
                        * w.powf(beta - alpha - 1.0);
                    let got = caputo_left(&x, &ord, psi, t, &grid).unwrap();
                    worst_power = worst_power.max(((got - expect) / expect).abs());
                }
            }
            // eigenfunction identity
            let pc = psi.clone();
            let x = Path::new({
                let p = pc.clone();
                move |t| ml(alpha, (p.eval(t) - p.eval(p.a())).powf(alpha))
            })
            .with_dx_psi({
                let p = pc.clone();
                move |t| ml_eigen_dx(alpha, 1.0, p.eval(t) - p.eval(p.a()))
            });
            for t in [0.5, 0.95] {
                let w = psi.eval(t) - psi.eval(psi.a());
                if w < 0.1 {
                    continue;
                }
                let expect = ml(alpha, w.powf(alpha));
                let got = caputo_left(&x, &ord, psi, t, &grid).unwrap();
                worst_eigen = worst_eigen.max(((got - expect) / expect).abs());
            }
        }
    }

    // composition and integration-by-parts residuals on the identity kernel
    let psi = PsiMap::identity(0.0, 1.0).unwrap();
    let grid = QuadGrid::uniform_in_psi(&psi, 4096).unwrap();
    let half = Order::new(0.5).unwrap();
    let eigen = Path::new(move |t: f64| ml(0.5, t.powf(0.5)))
        .with_dx_psi(move |t: f64| ml_eigen_dx(0.5, 1.0, t));
    let comp = composition_residual_left(&eigen, &half, &psi, &grid).unwrap();
    let xw = Path::new(|t: f64| 1.0 - t);
    let yw = Path::new(|t: f64| t * t).with_dx_psi(|t| 2.0 * t);
    let ibp = integration_by_parts_residual(&xw, &yw, &half, &psi, &grid).unwrap();

    let ok = worst_power <= 1e-3 && worst_eigen <= 1e-3 && comp <= 1e-3 && ibp <= 1e-3;
    let detail = format!(
        "power rel = {worst_power:.2e}, eigen rel = {worst_eigen:.2e}, composition = {comp:.2e}, ibp = {ibp:.2e}"
    );
    assert!(verdict("criterion 4", "operator identities at N = 4096", ok, &detail));
}

#[test]
fn criterion_5_convergence_order() {
    let psi = PsiMap::identity(0.0, 1.0).unwrap();
    let t = 0.9;
    let beta = 4.0;
    let alpha = 0.5;
    let errs: Vec<f64> = [256usize, 512, 1024, 2048]
        .iter()
        .map(|&n| {
            let grid = QuadGrid::uniform_in_psi(&psi, n).unwrap();
            let x = Path::new(move |t: f64| t.powf(beta - 1.0))
                .with_dx_psi(move |t| (beta - 1.0) * t.powf(beta - 2.0));
            let got = caputo_left(&x, &Order::new(alpha).unwrap(), &psi, t, &grid).unwrap();
            let expect =
                gamma(beta).unwrap() / gamma(beta - alpha).unwrap() * t.powf(beta - alpha - 1.0);
            (got - expect).abs()
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = orders.iter().all(|&p| p >= 1.5);
    let detail = format!("observed orders {orders:?}");
    assert!(verdict("criterion 5", "grid-refinement order >= 1.5", ok, &detail));
}

#[test]
fn criterion_6_legendre_values() {
    let (p, x, t_star) = presets::example1(PsiChoice::Identity, 0.5, 1.5).unwrap();
    let grid = QuadGrid::uniform_in_psi(&p.psi, 2048).unwrap();
    let good = legendre_check(&p, &x, t_star, &grid).unwrap();

    let psi = PsiMap::identity(0.0, 1.5).unwrap();
    let concave = Lagrangian::new(|_, _, d| -d * d, |_, _, _| 0.0, |_, _, d| -2.0 * d)
        .with_second_partials(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| -2.0);
    let pc = ProblemSpec::new(
        ProblemKind::Fundamental,
        psi.clone(),
        Functional::Scalar(concave),
        vec![Order::new(0.5).unwrap()],
        BoundaryCondition::Fixed(0.0),
    )
    .unwrap();
    let xc = Path::new(|t| t).with_dx_psi(|_| 1.0);
    let bad = legendre_check(&pc, &xc, 1.0, &grid).unwrap();

    let ok = good == 2.0 && bad == -2.0 && bad < -TOL_LEGENDRE;
    let detail = format!("demo extremal -> {good}, concave integrand -> {bad} (flagged failing)");
    assert!(verdict("criterion 6", "second-order condition values", ok, &detail));
}

#[test]
fn criterion_7_reduction_chain() {
    let alpha = 0.5;
    let n = 2048;
    let (pf, xf, _) = presets::example1(PsiChoice::Identity, alpha, 1.5).unwrap();
    let grid = QuadGrid::uniform_in_psi(&pf.psi, n).unwrap();
    let base = el_residual(&pf, &xf, 1.0, &grid).unwrap();
    let psi = pf.psi.clone();
    let k = {
        let ga = gamma(2.0 - alpha).unwrap();
        move |t: f64| t.powf(1.0 - alpha) / ga
    };

    // extended with A -> a
    let (k1, k2) = (k.clone(), k.clone());
    let l = Lagrangian::new(
        move |t, _x, d| (d - k1(t)).powi(2) + t * t - 1.0,
        |_, _, _| 0.0,
        move |t, _x, d| 2.0 * (d - k2(t)),
    );
    let pe = ProblemSpec::new(
        ProblemKind::Extended {
            inner_start: 1e-3,
            x_a_free: false,
            x_inner_free: false,
        },
        psi.clone(),
        Functional::Scalar(l),
        vec![Order::new(alpha).unwrap()],
        BoundaryCondition::Fixed(0.0),
    )
    .unwrap();
    let ext = extended_residuals(&pe, &xf, 1.0, &grid).unwrap();
    let d_ext = (ext.el_max - base.el_max).abs();

    // delay with no lag dependence
    let (k1, k2) = (k.clone(), k.clone());
    let dl = DelayLagrangian::new(
        move |t, _x, _xt, d| (d - k1(t)).powi(2) + t * t - 1.0,
        |_, _, _, _| 0.0,
        |_, _, _, _| 0.0,
        move |t, _x, _xt, d| 2.0 * (d - k2(t)),
    );
    let pd = ProblemSpec::new(
        ProblemKind::Delay(DelaySpec {
            tau: 0.25,
            theta: Arc::new(|_| 0.0),
        }),
        psi.clone(),
        Functional::Delay(dl),
        vec![Order::new(alpha).unwrap()],
        BoundaryCondition::Fixed(0.0),
    )
    .unwrap();
    let del = delay_residuals(&pd, &xf, 1.0, &grid).unwrap();
    let d_del = (del.el_max - base.el_max).abs();

    // high-order with m = 1
    let (k1, k2) = (k.clone(), k.clone());
    let hl = psifrac::lagrangian::HighOrderLagrangian {
        l: Arc::new(move |t: f64, _x, ds: &[f64]| (ds[0] - k1(t)).powi(2) + t * t - 1.0),
        dx: Arc::new(|_, _, _: &[f64]| 0.0),
        dd: vec![Arc::new(move |t: f64, _x, ds: &[f64]| 2.0 * (ds[0] - k2(t)))],
    };
    let ph = ProblemSpec::new(
        ProblemKind::HighOrder,
        psi.clone(),
        Functional::HighOrder(hl),
        vec![Order::new(alpha).unwrap()],
        BoundaryCondition::Fixed(0.0),
    )
    .unwrap();
    let high = high_order_residuals(&ph, &xf, 1.0, &grid).unwrap();
    let d_high = (high.el_max - base.el_max).abs();

    // isoperimetric with M ≡ 0
    let (k1, k2) = (k.clone(), k);
    let l = Lagrangian::new(
        move |t, _x, d| (d - k1(t)).powi(2) + t * t - 1.0,
        |_, _, _| 0.0,
        move |t, _x, d| 2.0 * (d - k2(t)),
    );
    let zero = Lagrangian::new(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 0.0);
    let pi_ = ProblemSpec::new(
        ProblemKind::Isoperimetric {
            constraint: Constraint {
                m: zero,
                phi: Arc::new(|_| 0.0),
                phi_prime: Arc::new(|_| 0.0),
            },
            lambda_hint: None,
        },
        psi,
        Functional::Scalar(l),
        vec![Order::new(alpha).unwrap()],
        BoundaryCondition::Fixed(0.0),
    )
    .unwrap();
    let iso = isoperimetric_residuals(&pi_, &xf, 1.0, 4.2, &grid).unwrap();
    let d_iso = (iso.el_max - base.el_max).abs();

    let ok = d_ext <= 1e-2 && d_del <= 1e-2 && d_high <= 1e-2 && d_iso <= 1e-2;
    let detail = format!(
        "deviations from fundamental: extended {d_ext:.2e}, delay {d_del:.2e}, high-order {d_high:.2e}, isoperimetric {d_iso:.2e}"
    );
    assert!(verdict("criterion 7", "reduction chain", ok, &detail));
}

#[test]
fn criterion_8_counterexample_gap() {
    let (p, x, t_star) = presets::counterexample(2.0).unwrap();
    let grid = QuadGrid::uniform_in_psi(&p.psi, 2048).unwrap();
    let zero = || Path::new(|_| 0.0).with_dx_psi(|_| 0.0);
    let perturbations = vec![(zero(), 0.1), (zero(), 0.01)];
    let rep = sufficiency_epsilon_check(&p, &x, t_star, &perturbations, &grid).unwrap();
    let e1 = (rep.gaps[0] + 0.1f64 * 0.1 / 2.0).abs();
    let e2 = (rep.gaps[1] + 0.01f64 * 0.01 / 2.0).abs();
    let ok = e1 <= 1e-9 && e2 <= 1e-9;
    let detail = format!(
        "gaps {:.12e}, {:.12e}; defects {e1:.2e}, {e2:.2e}",
        rep.gaps[0], rep.gaps[1]
    );
    assert!(verdict("criterion 8", "convexity counterexample gap = -dT^2/2", ok, &detail));
}

#[test]
fn criterion_9_direct_minimizer_cross_check() {
    let (p, _, _) = presets::example1(PsiChoice::Identity, 0.5, 1.5).unwrap();
    let grid = QuadGrid::uniform_in_psi(&p.psi, 256).unwrap();
    let cfg = MinimizeConfig {
        basis_size: 2,
        simplex_scale: 0.5,
        max_evals: 5000,
        seed: 7,
        t_bracket: None,
    };
    let r1 = direct_minimize(&p, &cfg, &grid).unwrap();
    let r2 = direct_minimize(&p, &cfg, &grid).unwrap();
    let ok = r1.j_value <= -2.0 / 3.0 + 1e-2
        && (r1.t_terminal - 1.0).abs() <= 0.05
        && r1.evaluations <= 5000
        && r1.j_value == r2.j_value
        && r1.coefficients == r2.coefficients;
    let detail = format!(
        "J = {:.6}, T = {:.4}, evals = {}, deterministic = {}",
        r1.j_value,
        r1.t_terminal,
        r1.evaluations,
        r1.j_value == r2.j_value
    );
    assert!(verdict("criterion 9", "direct-minimizer cross-check", ok, &detail));
}

/// Deterministic expression generator for criterion 10 (independent of the
/// proptest suite, same shape constraints: depth ≤ 6, constant exponents).
fn random_expr(rng: &mut StdRng, depth: usize) -> Expr {
    if depth == 0 || rng.gen_range(0..100) < 25 {
        return match rng.gen_range(0..4) {
            0 => Expr::Const(rng.gen_range(0..24) as f64 / 8.0),
            1 => Expr::Var(Var::T),
            2 => Expr::Var(Var::X),
            _ => Expr::Var(Var::D),
        };
    }
    match rng.gen_range(0..8) {
        0..=3 => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][rng.gen_range(0..4)];
            Expr::Binary(
                op,
                Box::new(random_expr(rng, depth - 1)),
                Box::new(random_expr(rng, depth - 1)),
            )
        }
        4 => Expr::Binary(
            BinOp::Pow,
            Box::new(random_expr(rng, depth - 1)),
            Box::new(Expr::Const(rng.gen_range(1..4) as f64)),
        ),
        5 => Expr::Unary(
            [UnOp::Neg, UnOp::Sin, UnOp::Cos][rng.gen_range(0..3)],
            Box::new(random_expr(rng, depth - 1)),
        ),
        6 => Expr::Unary(
            UnOp::Ln,
            Box::new(Expr::Binary(
                BinOp::Add,
                Box::new(Expr::Const(1.5)),
                Box::new(Expr::Unary(UnOp::Sin, Box::new(random_expr(rng, depth - 1)))),
            )),
        ),
        _ => Expr::Unary(
            UnOp::Sqrt,
            Box::new(Expr::Binary(
                BinOp::Add,
                Box::new(Expr::Const(1.5)),
                Box::new(Expr::Unary(UnOp::Cos, Box::new(random_expr(rng, depth - 1)))),
            )),
        ),
    }
}

#[test]
fn criterion_10_parser_and_derivative_suite() {
    let mut rng = StdRng::seed_from_u64(20240817);
    let mut roundtrip_fail = 0usize;
    let mut fd_checked = 0usize;
    let mut fd_fail = 0usize;
    for _ in 0..1000 {
        let e = random_expr(&mut rng, 6);
        let printed = e.to_string();
        match parse(&printed) {
            Ok(re) if re == e => {}
            _ => roundtrip_fail += 1,
        }

        let t = rng.gen_range(0.1..1.9);
        let x = rng.gen_range(-0.9..0.9);
        let d = rng.gen_range(-0.9..0.9);
        let wrt = if rng.gen_bool(0.5) { Var::X } else { Var::D };
        let Ok(de) = differentiate(&e, wrt) else {
            continue;
        };
        let env_at = |x: f64, d: f64| Env {
            t: Some(t),
            x: Some(x),
            d: Some(d),
            ..Default::default()
        };
        let h = 1e-6;
        let central = |h: f64| -> Option<f64> {
            let (pl, mi) = match wrt {
                Var::X => (env_at(x + h, d), env_at(x - h, d)),
                _ => (env_at(x, d + h), env_at(x, d - h)),
            };
            match (evaluate(&e, &pl), evaluate(&e, &mi)) {
                (Ok(a), Ok(b)) => Some((a - b) / (2.0 * h)),
                _ => None,
            }
        };
        if let (Some(fd), Some(fd2), Ok(sym)) =
            (central(h), central(2.0 * h), evaluate(&de, &env_at(x, d)))
        {
            // oracle must be self-consistent before it judges the symbol
            if fd.is_finite()
                && sym.is_finite()
                && fd.abs() < 1e6
                && (fd - fd2).abs() <= 1e-7 * (1.0 + fd.abs())
            {
                fd_checked += 1;
                if (sym - fd).abs() > 1e-5 * (1.0 + fd.abs().max(sym.abs())) {
                    fd_fail += 1;
                }
            }
        }
    }
    let ok = roundtrip_fail == 0 && fd_fail == 0 && fd_checked >= 400;
    let detail = format!(
        "1000 round-trips ({roundtrip_fail} failures), {fd_checked} derivative checks ({fd_fail} failures)"
    );
    assert!(verdict("criterion 10", "parser and derivative suites", ok, &detail));
}
