//! Tagged problem descriptions tying together the kernel map, the
//! Lagrangian, the orders and the boundary data.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lagrangian::{DelayLagrangian, HighOrderLagrangian, Lagrangian};
use crate::ops::Order;
use crate::psi::PsiMap;

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Initial datum x(a): pinned to a value or left free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Fixed(f64),
    Free,
}

/// Integral constraint G(x, T) = Φ(T) with the constraint integrand M and
/// Φ, Φ′ as callables.
#[derive(Clone)]
pub struct Constraint {
    pub m: Lagrangian,
    pub phi: TimeFn,
    pub phi_prime: TimeFn,
}

/// Delay data: the lag τ and the history θ on [a − τ, a].
#[derive(Clone)]
pub struct DelaySpec {
    pub tau: f64,
    pub theta: TimeFn,
}

/// Problem kind with its kind-specific data.
#[derive(Clone)]
pub enum ProblemKind {
    Fundamental,
    /// Cost integral starts at an interior A > a; the two endpoint data may
    /// be free.
    Extended {
        inner_start: f64,
        x_a_free: bool,
        x_inner_free: bool,
    },
    Isoperimetric {
        constraint: Constraint,
        lambda_hint: Option<f64>,
    },
    Delay(DelaySpec),
    HighOrder,
    OptimalOrder,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Fundamental => "fundamental",
            ProblemKind::Extended { .. } => "extended",
            ProblemKind::Isoperimetric { .. } => "isoperimetric",
            ProblemKind::Delay(_) => "delay",
            ProblemKind::HighOrder => "high-order",
            ProblemKind::OptimalOrder => "optimal-order",
        }
    }
}

/// The functional's integrand in the shape the kind requires.
#[derive(Clone)]
pub enum Functional {
    Scalar(Lagrangian),
    Delay(DelayLagrangian),
    HighOrder(HighOrderLagrangian),
}

/// A fully described variational problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub psi: PsiMap,
    pub functional: Functional,
    pub orders: Vec<Order>,
    pub x_a: BoundaryCondition,
}

impl ProblemSpec {
    pub fn new(
        kind: ProblemKind,
        psi: PsiMap,
        functional: Functional,
        orders: Vec<Order>,
        x_a: BoundaryCondition,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            psi,
            functional,
            orders,
            x_a,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Kind-dependent shape checks: the right functional form, the right
    /// order count, delay/extension parameters in range.
    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() {
            return Err(Error::Validation("at least one fractional order is required".into()));
        }
        let base_order_ok = |o: &Order| o.alpha() > 0.0 && o.alpha() < 1.0;
        match (&self.kind, &self.functional) {
            (ProblemKind::HighOrder, Functional::HighOrder(l)) => {
                if l.arity() != self.orders.len() {
                    return Err(Error::Validation(format!(
                        "high-order problem has {} orders but the Lagrangian carries {} d-partials",
                        self.orders.len(),
                        l.arity()
                    )));
                }
                for (i, o) in self.orders.iter().enumerate() {
                    let n = (i + 1) as f64;
                    if !(o.alpha() > n - 1.0 && o.alpha() < n) {
                        return Err(Error::Validation(format!(
                            "order {} of the high-order problem must lie in ({}, {}), got {}",
                            i + 1,
                            n - 1.0,
                            n,
                            o.alpha()
                        )));
                    }
                }
            }
            (ProblemKind::HighOrder, _) => {
                return Err(Error::Validation(
                    "high-order problems need a high-order Lagrangian".into(),
                ))
            }
            (ProblemKind::Delay(d), Functional::Delay(_)) => {
                let span = self.psi.b() - self.psi.a();
                if !(d.tau > 0.0 && d.tau < span) {
                    return Err(Error::Validation(format!(
                        "delay must satisfy 0 < tau < b - a = {span}, got {}",
                        d.tau
                    )));
                }
                if !base_order_ok(&self.orders[0]) {
                    return Err(Error::Validation("delay problems use a base order in (0,1)".into()));
                }
            }
            (ProblemKind::Delay(_), _) => {
                return Err(Error::Validation("delay problems need a delay Lagrangian".into()))
            }
            (ProblemKind::Extended { inner_start, .. }, Functional::Scalar(_)) => {
                if !(*inner_start > self.psi.a() && *inner_start < self.psi.b()) {
                    return Err(Error::Validation(format!(
                        "extended problems need a < A < b, got A = {inner_start}"
                    )));
                }
                if !base_order_ok(&self.orders[0]) {
                    return Err(Error::Validation("base problems use an order in (0,1)".into()));
                }
            }
            (
                ProblemKind::Fundamental | ProblemKind::Isoperimetric { .. } | ProblemKind::OptimalOrder,
                Functional::Scalar(_),
            ) => {
                if !base_order_ok(&self.orders[0]) {
                    return Err(Error::Validation("base problems use an order in (0,1)".into()));
                }
            }
            _ => {
                return Err(Error::Validation(format!(
                    "{} problems need a scalar Lagrangian",
                    self.kind.name()
                )))
            }
        }
        Ok(())
    }

    pub fn scalar_lagrangian(&self) -> Result<&Lagrangian> {
        match &self.functional {
            Functional::Scalar(l) => Ok(l),
            _ => Err(Error::Validation(
                "operation needs the scalar Lagrangian form".into(),
            )),
        }
    }

    pub fn order(&self) -> &Order {
        &self.orders[0]
    }

    /// The fixed initial value, if any.
    pub fn x_a_value(&self) -> Option<f64> {
        match self.x_a {
            BoundaryCondition::Fixed(v) => Some(v),
            BoundaryCondition::Free => None,
        }
    }
}
