//! Grid-refinement study: observed order of accuracy of the left Caputo
//! derivative under doubling, for the power-law case with a known closed
//! form.

use psifrac::ops::{caputo_left, Order};
use psifrac::special::gamma;
use psifrac::{Path, PsiMap, QuadGrid};

/// Errors at t for x = (ψ(t)-ψ(a))^{β-1} against the closed form
/// Γ(β)/Γ(β-α) w^{β-α-1}.
fn power_rule_error(psi: &PsiMap, beta: f64, alpha: f64, t: f64, n_cells: usize) -> f64 {
    let grid = QuadGrid::uniform_in_psi(psi, n_cells).unwrap();
    let p = psi.clone();
    let x = Path::new({
        let p = p.clone();
        move |t| (p.eval(t) - p.eval(p.a())).powf(beta - 1.0)
    })
    .with_dx_psi({
        let p = p.clone();
        move |t| (beta - 1.0) * (p.eval(t) - p.eval(p.a())).powf(beta - 2.0)
    });
    let ord = Order::new(alpha).unwrap();
    let got = caputo_left(&x, &ord, psi, t, &grid).unwrap();
    let w = psi.eval(t) - psi.eval(psi.a());
    let expect = gamma(beta).unwrap() / gamma(beta - alpha).unwrap() * w.powf(beta - alpha - 1.0);
    (got - expect).abs()
}

#[test]
fn caputo_observed_order_at_least_three_halves() {
    // β = 4, α = 0.5: the integrand is quadratic in ψ-space, so the product
    // trapezoid converges at second order; the criterion asks for ≥ 1.5
    let psi = PsiMap::identity(0.0, 1.0).unwrap();
    let t = 0.9;
    let ns = [256usize, 512, 1024, 2048];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| power_rule_error(&psi, 4.0, 0.5, t, n))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(
            order >= 1.5,
            "observed order {order} from errors {:?}",
            errs
        );
    }
}

#[test]
fn caputo_order_holds_for_sqrt_kernel_too() {
    let psi = PsiMap::new(0.0, 1.0, |t| (t + 1.0).sqrt(), |t| 0.5 / (t + 1.0).sqrt()).unwrap();
    let t = 0.9;
    let ns = [256usize, 512, 1024, 2048];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| power_rule_error(&psi, 4.0, 0.5, t, n))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.5, "observed order {order} from errors {:?}", errs);
    }
}
