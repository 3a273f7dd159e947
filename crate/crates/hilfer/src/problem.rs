use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::PsiKernel;

/// Derivative order pair (alpha, beta) with the derived composite order
/// gamma = alpha + beta - alpha*beta.
///
/// alpha in (0,1) is the differentiation order, beta in [0,1] interpolates
/// between the Riemann-Liouville (beta=0) and Caputo (beta=1) conventions.
/// gamma governs the endpoint behavior w^(gamma-1) and the weighted space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    alpha: f64,
    beta: f64,
}

impl FractionalOrder {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && 0.0 < alpha && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "order alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if !(beta.is_finite() && (0.0..=1.0).contains(&beta)) {
            return Err(Error::InvalidParameter(format!(
                "type beta must lie in [0, 1], got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// gamma = alpha + beta - alpha*beta; always recomputed, never stored.
    pub fn gamma(&self) -> f64 {
        self.alpha + self.beta - self.alpha * self.beta
    }
}

type RhsFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Right-hand side f(t, u, v) of the implicit problem, where v stands for the
/// unknown's own fractional derivative. Builtin kinds carry exact Lipschitz
/// constants (M in u, M* in v); arbitrary expressions are deliberately not
/// parsed so those constants stay honest.
#[derive(Clone)]
pub enum RhsSpec {
    /// f(t,u,v) = c * w^(delta-1), independent of (u, v); w = psi(t)-psi(a).
    PowerSource { c: f64, delta: f64 },
    /// f(t,u,v) = lambda * u.
    LinearInU { lambda: f64 },
    /// f(t,u,v) = g0 + c * v with |c| < 1; the inner fixed point is the
    /// geometric one, F = g0 / (1 - c).
    ImplicitContraction { g0: f64, c: f64 },
    /// f(t,u,v) = 1 / ((1 + 9 e^t)(1 + |u| + |v|)), the bounded saturating
    /// demo right-hand side; Lipschitz constants M = M* = 1/10 on [0, 1].
    Saturating,
    /// Arbitrary callback with caller-supplied Lipschitz constants.
    Custom { f: RhsFn, m: f64, mstar: f64 },
}

impl RhsSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RhsSpec::PowerSource { c, delta } => {
                if !c.is_finite() || !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power_source needs finite c and delta > 0, got c={c}, delta={delta}"
                    )));
                }
            }
            RhsSpec::LinearInU { lambda } => {
                if !lambda.is_finite() {
                    return Err(Error::InvalidParameter(
                        "linear_in_u lambda not finite".into(),
                    ));
                }
            }
            RhsSpec::ImplicitContraction { g0, c } => {
                if !g0.is_finite() || !(c.is_finite() && c.abs() < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "implicit_contraction needs finite g0 and |c| < 1, got g0={g0}, c={c}"
                    )));
                }
            }
            RhsSpec::Saturating => {}
            RhsSpec::Custom { m, mstar, .. } => {
                if !(m.is_finite() && *m >= 0.0) || !(mstar.is_finite() && *mstar >= 0.0) {
                    return Err(Error::InvalidParameter(
                        "custom rhs needs finite nonnegative Lipschitz constants".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Evaluates f(t, u, v); w = psi(t) - psi(a) is passed in so source terms
    /// on the psi scale need no kernel lookup.
    pub fn eval(&self, t: f64, w: f64, u: f64, v: f64) -> f64 {
        match self {
            RhsSpec::PowerSource { c, delta } => c * w.powf(delta - 1.0),
            RhsSpec::LinearInU { lambda } => lambda * u,
            RhsSpec::ImplicitContraction { g0, c } => g0 + c * v,
            RhsSpec::Saturating => 1.0 / ((1.0 + 9.0 * t.exp()) * (1.0 + u.abs() + v.abs())),
            RhsSpec::Custom { f, .. } => f(t, u, v),
        }
    }

    /// Lipschitz constants (M, M*) of f in u and v.
    pub fn lipschitz(&self) -> (f64, f64) {
        match self {
            RhsSpec::PowerSource { .. } => (0.0, 0.0),
            RhsSpec::LinearInU { lambda } => (lambda.abs(), 0.0),
            RhsSpec::ImplicitContraction { c, .. } => (0.0, c.abs()),
            RhsSpec::Saturating => (0.1, 0.1),
            RhsSpec::Custom { m, mstar, .. } => (*m, *mstar),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            RhsSpec::PowerSource { .. } => "power_source",
            RhsSpec::LinearInU { .. } => "linear_in_u",
            RhsSpec::ImplicitContraction { .. } => "implicit_contraction",
            RhsSpec::Saturating => "example5",
            RhsSpec::Custom { .. } => "custom_callback",
        }
    }
}

impl fmt::Debug for RhsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsSpec::PowerSource { c, delta } => {
                write!(f, "PowerSource {{ c: {c}, delta: {delta} }}")
            }
            RhsSpec::LinearInU { lambda } => write!(f, "LinearInU {{ lambda: {lambda} }}"),
            RhsSpec::ImplicitContraction { g0, c } => {
                write!(f, "ImplicitContraction {{ g0: {g0}, c: {c} }}")
            }
            RhsSpec::Saturating => write!(f, "Saturating"),
            RhsSpec::Custom { m, mstar, .. } => {
                write!(f, "Custom {{ m: {m}, mstar: {mstar} }}")
            }
        }
    }
}

/// Full problem statement: find u with D^(alpha,beta;psi) u = f(t, u, D u) on
/// (a, b] and weighted initial value I^(1-gamma;psi) u(a) = u_a.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    kernel: PsiKernel,
    order: FractionalOrder,
    u_a: f64,
    rhs: RhsSpec,
    lipschitz_m: f64,
    lipschitz_mstar: f64,
}

impl ProblemSpec {
    /// Builds a problem with Lipschitz constants derived from the builtin rhs
    /// kind; override them with [`ProblemSpec::with_lipschitz`] if sharper
    /// constants are known.
    pub fn new(kernel: PsiKernel, order: FractionalOrder, u_a: f64, rhs: RhsSpec) -> Result<Self> {
        rhs.validate()?;
        if !u_a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial weighted value must be finite, got {u_a}"
            )));
        }
        let (m, mstar) = rhs.lipschitz();
        let spec = Self {
            kernel,
            order,
            u_a,
            rhs,
            lipschitz_m: m,
            lipschitz_mstar: mstar,
        };
        spec.check_lipschitz()?;
        Ok(spec)
    }

    pub fn with_lipschitz(mut self, m: f64, mstar: f64) -> Result<Self> {
        self.lipschitz_m = m;
        self.lipschitz_mstar = mstar;
        self.check_lipschitz()?;
        Ok(self)
    }

    fn check_lipschitz(&self) -> Result<()> {
        if !(self.lipschitz_m.is_finite() && self.lipschitz_m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constant M must be finite and >= 0, got {}",
                self.lipschitz_m
            )));
        }
        if !(self.lipschitz_mstar.is_finite() && (0.0..1.0).contains(&self.lipschitz_mstar)) {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constant M* must satisfy 0 <= M* < 1, got {}",
                self.lipschitz_mstar
            )));
        }
        Ok(())
    }

    pub fn kernel(&self) -> &PsiKernel {
        &self.kernel
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn u_a(&self) -> f64 {
        self.u_a
    }

    pub fn rhs(&self) -> &RhsSpec {
        &self.rhs
    }

    pub fn lipschitz_m(&self) -> f64 {
        self.lipschitz_m
    }

    pub fn lipschitz_mstar(&self) -> f64 {
        self.lipschitz_mstar
    }

    /// Same problem with a shifted initial value (data perturbation).
    pub fn with_u_a(&self, u_a: f64) -> Result<Self> {
        let mut p = self.clone();
        if !u_a.is_finite() {
            return Err(Error::InvalidParameter("perturbed u_a not finite".into()));
        }
        p.u_a = u_a;
        Ok(p)
    }

    /// Same problem with order alpha - epsilon and initial value u_a_star
    /// (order perturbation); beta is kept.
    pub fn with_perturbed_order(&self, epsilon: f64, u_a_star: f64) -> Result<Self> {
        let order = FractionalOrder::new(self.order.alpha() - epsilon, self.order.beta())?;
        let mut p = self.clone();
        p.order = order;
        p.u_a = u_a_star;
        Ok(p)
    }
}
