//! Bundled demonstration problems used by the CLI `reproduce` subcommand,
//! the test suites and the documentation.
//!
//! * `example1` — quadratic tracking of a fractional power with free
//!   terminal time; the known extremal is x*(t) = ψ(t) − ψ(a), T* = 1.
//! * `example2` — the isoperimetric variant whose augmented integrand
//!   coincides with example 1 at λ = −2.
//! * `example3` — the optimal-fractional-order family with terminal
//!   relation ψ(T*) = ψ(a) + 40^{1/(α+2)}.
//! * `counterexample` — J = ∫₀ᵀ (1 − t) dt, where the sufficiency gap is
//!   −ΔT²/2 despite convexity.

use std::sync::Arc;

use crate::error::Result;
use crate::lagrangian::Lagrangian;
use crate::ops::Order;
use crate::path::Path;
use crate::problem::{BoundaryCondition, Constraint, Functional, ProblemKind, ProblemSpec};
use crate::psi::PsiMap;
use crate::special::gamma_unchecked;

/// Kernel map choices exposed by the demo problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiChoice {
    /// ψ(t) = t
    Identity,
    /// ψ(t) = √(t + 1)
    SqrtShift,
}

impl PsiChoice {
    pub fn build(&self, a: f64, b: f64) -> Result<PsiMap> {
        match self {
            PsiChoice::Identity => PsiMap::identity(a, b),
            PsiChoice::SqrtShift => {
                PsiMap::new(a, b, |t| (t + 1.0).sqrt(), |t| 0.5 / (t + 1.0).sqrt())
            }
        }
    }
}

/// The tracking target k(t) = (ψ(t) − ψ(a))^{1-α} / Γ(2-α), the ψ-Caputo
/// image of ψ(t) − ψ(a).
fn tracking_target(psi: &PsiMap, alpha: f64) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    let psic = psi.clone();
    let ga = gamma_unchecked(2.0 - alpha);
    move |t: f64| {
        let w = psic.eval(t) - psic.eval(psic.a());
        w.powf(1.0 - alpha) / ga
    }
}

/// Example 1: L = (d − k(t))² + t² − 1 on [0, b] with x(0) = 0.
///
/// Returns the problem, the extremal candidate x*(t) = ψ(t) − ψ(a) and the
/// optimal terminal time T* = 1.
pub fn example1(psi_choice: PsiChoice, alpha: f64, b: f64) -> Result<(ProblemSpec, Path, f64)> {
    let psi = psi_choice.build(0.0, b)?;
    let k = Arc::new(tracking_target(&psi, alpha));
    let k2 = k.clone();
    let l = Lagrangian::new(
        move |t, _x, d| {
            let e = d - k(t);
            e * e + t * t - 1.0
        },
        |_, _, _| 0.0,
        move |t, _x, d| 2.0 * (d - k2(t)),
    )
    .with_second_partials(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 2.0);
    let spec = ProblemSpec::new(
        ProblemKind::Fundamental,
        psi.clone(),
        Functional::Scalar(l),
        vec![Order::new(alpha)?],
        BoundaryCondition::Fixed(0.0),
    )?;
    let candidate = extremal_path(&psi);
    Ok((spec, candidate, 1.0))
}

/// The example-1/2 extremal x*(t) = ψ(t) − ψ(a) with its unit ψ-derivative.
pub fn extremal_path(psi: &PsiMap) -> Path {
    let p = psi.clone();
    Path::new(move |t| p.eval(t) - p.eval(p.a())).with_dx_psi(|_| 1.0)
}

/// Example 2 (ψ(t) = t): L = d² + k(t)² + t² − 1 with the integral
/// constraint ∫ d·k(t) dt = Φ(T), Φ(T) = ∫₀ᵀ k(t)² dt. The augmented
/// integrand at λ = −2 is example 1's.
pub fn example2(alpha: f64, b: f64) -> Result<(ProblemSpec, Path, f64)> {
    let psi = PsiMap::identity(0.0, b)?;
    let k = Arc::new(tracking_target(&psi, alpha));
    let (k_l, k_m, k_md) = (k.clone(), k.clone(), k.clone());
    let l = Lagrangian::new(
        move |t, _x, d| d * d + k_l(t) * k_l(t) + t * t - 1.0,
        |_, _, _| 0.0,
        |_, _, d| 2.0 * d,
    )
    .with_second_partials(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 2.0);
    let m = Lagrangian::new(
        move |t, _x, d| d * k_m(t),
        |_, _, _| 0.0,
        move |t, _x, _| k_md(t),
    )
    .with_second_partials(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 0.0);
    // Φ(T) = ∫₀ᵀ t^{2-2α}/Γ(2-α)² dt in closed form for ψ(t) = t
    let ga2 = gamma_unchecked(2.0 - alpha).powi(2);
    let phi = move |t: f64| t.powf(3.0 - 2.0 * alpha) / ((3.0 - 2.0 * alpha) * ga2);
    let phi_prime = move |t: f64| t.powf(2.0 - 2.0 * alpha) / ga2;
    let spec = ProblemSpec::new(
        ProblemKind::Isoperimetric {
            constraint: Constraint {
                m,
                phi: Arc::new(phi),
                phi_prime: Arc::new(phi_prime),
            },
            lambda_hint: Some(-2.0),
        },
        psi.clone(),
        Functional::Scalar(l),
        vec![Order::new(alpha)?],
        BoundaryCondition::Fixed(0.0),
    )?;
    let candidate = extremal_path(&psi);
    Ok((spec, candidate, 1.0))
}

/// Example 3: the optimal-fractional-order family
/// L = w^α/(2Γ(α+2))·d² − w^{α+1}·d + 20Γ(α+2), w = ψ(t) − ψ(a), whose
/// candidate x*(t) = w^{α+1} kills ∂₃L identically.
///
/// `alpha` picks the order the scalar problem is instantiated at; the
/// order-solver varies it.
pub fn example3(psi_choice: PsiChoice, alpha: f64, b: f64) -> Result<(ProblemSpec, Path)> {
    let psi = psi_choice.build(0.0, b)?;
    let spec = ProblemSpec::new(
        ProblemKind::OptimalOrder,
        psi.clone(),
        Functional::Scalar(example3_lagrangian(&psi, alpha)),
        vec![Order::new(alpha)?],
        BoundaryCondition::Fixed(0.0),
    )?;
    let candidate = example3_candidate(&psi, alpha);
    Ok((spec, candidate))
}

/// The example-3 integrand at a fixed order α.
pub fn example3_lagrangian(psi: &PsiMap, alpha: f64) -> Lagrangian {
    let (p1, p2, p3) = (psi.clone(), psi.clone(), psi.clone());
    let g = gamma_unchecked(alpha + 2.0);
    Lagrangian::new(
        move |t, _x, d| {
            let w = p1.eval(t) - p1.eval(p1.a());
            w.powf(alpha) / (2.0 * g) * d * d - w.powf(alpha + 1.0) * d + 20.0 * g
        },
        |_, _, _| 0.0,
        move |t, _x, d| {
            let w = p2.eval(t) - p2.eval(p2.a());
            w.powf(alpha) / g * d - w.powf(alpha + 1.0)
        },
    )
    .with_second_partials(|_, _, _| 0.0, |_, _, _| 0.0, move |t, _, _| {
        let w = p3.eval(t) - p3.eval(p3.a());
        w.powf(alpha) / g
    })
}

/// The example-3 candidate x*(t) = (ψ(t) − ψ(a))^{α+1}.
pub fn example3_candidate(psi: &PsiMap, alpha: f64) -> Path {
    let (p1, p2) = (psi.clone(), psi.clone());
    Path::new(move |t| (p1.eval(t) - p1.eval(p1.a())).powf(alpha + 1.0))
        .with_dx_psi(move |t| (alpha + 1.0) * (p2.eval(t) - p2.eval(p2.a())).powf(alpha))
}

/// The convex counterexample J = ∫₀ᵀ (1 − t) dt: every x satisfies the
/// first-order conditions with T* = 1, yet J(x, 1 + ΔT) − J(x, 1) = −ΔT²/2.
pub fn counterexample(b: f64) -> Result<(ProblemSpec, Path, f64)> {
    let psi = PsiMap::identity(0.0, b)?;
    let l = Lagrangian::new(|t, _, _| 1.0 - t, |_, _, _| 0.0, |_, _, _| 0.0)
        .with_second_partials(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 0.0);
    let spec = ProblemSpec::new(
        ProblemKind::Fundamental,
        psi,
        Functional::Scalar(l),
        vec![Order::new(0.5)?],
        BoundaryCondition::Fixed(0.0),
    )?;
    let candidate = Path::new(|_| 0.0).with_dx_psi(|_| 0.0);
    Ok((spec, candidate, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_candidate_is_admissible() {
        let (p, x, t_star) = example1(PsiChoice::Identity, 0.5, 1.5).unwrap();
        assert_eq!(x.eval(0.0), 0.0);
        assert_eq!(t_star, 1.0);
        assert!(crate::variational::check_candidate(&p, &x).is_ok());
    }

    #[test]
    fn example3_candidate_derivative_is_power_rule_image() {
        let psi = PsiMap::identity(0.0, 10.0).unwrap();
        let alpha = 0.3;
        let x = example3_candidate(&psi, alpha);
        // analytic ψ-derivative: (α+1) w^α
        let t = 2.0f64;
        assert!((x.eval_dx_psi(t, &psi) - (alpha + 1.0) * t.powf(alpha)).abs() < 1e-12);
    }
}
