use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Strictly increasing scale function psi on [a, b], with its derivative.
///
/// Every fractional operator here integrates against
/// psi'(s) (psi(t) - psi(s))^(alpha-1), so psi must be increasing and
/// continuously differentiable. Monotonicity and derivative consistency are
/// verified numerically when a mesh is built over the kernel; the constructor
/// only checks the interval.
#[derive(Clone)]
pub struct PsiKernel {
    label: String,
    a: f64,
    b: f64,
    eval: KernelFn,
    deriv: KernelFn,
}

impl PsiKernel {
    pub fn new(
        label: impl Into<String>,
        a: f64,
        b: f64,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidParameter(format!(
                "kernel interval must satisfy a < b with both finite, got [{a}, {b}]"
            )));
        }
        Ok(Self {
            label: label.into(),
            a,
            b,
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// psi(t)
    pub fn psi(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    /// psi'(t)
    pub fn dpsi(&self, t: f64) -> f64 {
        (self.deriv)(t)
    }

    /// psi(t) - psi(a), the scale distance from the left endpoint.
    pub fn w(&self, t: f64) -> f64 {
        self.psi(t) - self.psi(self.a)
    }
}

impl fmt::Debug for PsiKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PsiKernel")
            .field("label", &self.label)
            .field("a", &self.a)
            .field("b", &self.b)
            .finish()
    }
}

/// Builds one of the named builtin kernels on [a, b].
///
/// - `linear`: psi(t) = t
/// - `sqrt_shift`: psi(t) = sqrt(t + 1) (requires a > -1)
/// - `exp`: psi(t) = e^t
pub fn builtin_kernels(name: &str, a: f64, b: f64) -> Result<PsiKernel> {
    match name {
        "linear" => PsiKernel::new("linear", a, b, |t| t, |_| 1.0),
        "sqrt_shift" => {
            if a <= -1.0 {
                return Err(Error::InvalidParameter(format!(
                    "sqrt_shift kernel needs a > -1, got a = {a}"
                )));
            }
            PsiKernel::new(
                "sqrt_shift",
                a,
                b,
                |t| (t + 1.0).sqrt(),
                |t| 0.5 / (t + 1.0).sqrt(),
            )
        }
        "exp" => PsiKernel::new("exp", a, b, |t| t.exp(), |t| t.exp()),
        other => Err(Error::UnknownKernel(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_shift_eval_matches_sqrt_two_at_one() {
        let k = builtin_kernels("sqrt_shift", 0.0, 1.0).unwrap();
        assert_relative_eq!(k.psi(1.0), std::f64::consts::SQRT_2, max_relative = 1e-12);
        assert_relative_eq!(k.dpsi(0.0), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn linear_derivative_is_one() {
        let k = builtin_kernels("linear", 0.0, 1.0).unwrap();
        assert_eq!(k.dpsi(0.5), 1.0);
    }

    #[test]
    fn exp_eval_at_zero_is_one() {
        let k = builtin_kernels("exp", 0.0, 1.0).unwrap();
        assert_eq!(k.psi(0.0), 1.0);
        assert_eq!(k.dpsi(0.0), 1.0);
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(
            builtin_kernels("bogus", 0.0, 1.0),
            Err(Error::UnknownKernel(_))
        ));
    }

    #[test]
    fn degenerate_interval_is_rejected() {
        assert!(builtin_kernels("linear", 1.0, 1.0).is_err());
        assert!(builtin_kernels("linear", f64::NAN, 1.0).is_err());
    }
}
