use std::sync::Arc;

use gauss_quad::{GaussJacobi, GaussLegendre};

use crate::error::{Error, Result};
use crate::exec::{try_map_range, ExecutionMode};
use crate::grid::WeightedGridFunction;
use crate::kernel::PsiKernel;
use crate::mesh::GradedMesh;
use crate::special::{beta_fn, gamma_fn};

/// Degree of the Gauss-Jacobi rules used on singular panels.
const JACOBI_DEG: usize = 16;
/// Degree of the Gauss-Legendre rule used on interior panels of singular
/// (mu > 0) inputs, where both kernel factors are analytic.
const LEGENDRE_DEG: usize = 12;

/// Discretized fractional integral I^(alpha;psi) on a fixed mesh.
///
/// The integral is evaluated in the transformed coordinate x = psi(s)-psi(a),
/// where it is an Abel convolution with kernel (X - x)^(alpha-1).
///
/// For continuous inputs (weight exponent 0) each panel integrates the exact
/// kernel against the piecewise-linear interpolant of the integrand (product
/// trapezoidal rule). For weighted inputs (mu > 0) the singular factor
/// x^(-mu) is part of the quadrature weight on every panel rather than being
/// interpolated, so the piecewise-linear model applies to the stored
/// weighted values themselves: the result is smooth in the target index,
/// which keeps downstream numerical differentiation stable.
#[derive(Debug, Clone)]
pub struct FracIntegralOperator {
    mesh: Arc<GradedMesh>,
    alpha: f64,
}

impl FracIntegralOperator {
    pub fn new(mesh: Arc<GradedMesh>, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional integral order must be positive, got {alpha}"
            )));
        }
        Ok(Self { mesh, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mesh(&self) -> &GradedMesh {
        &self.mesh
    }

    pub fn apply(&self, f: &WeightedGridFunction) -> Result<WeightedGridFunction> {
        self.apply_with_mode(f, ExecutionMode::default())
    }

    pub fn apply_with_mode(
        &self,
        f: &WeightedGridFunction,
        mode: ExecutionMode,
    ) -> Result<WeightedGridFunction> {
        if !f.mesh().same_grid(&self.mesh) {
            return Err(Error::MeshMismatch);
        }
        let alpha = self.alpha;
        let mu = f.weight_exponent();
        let v = f.values();
        let n = v.len();

        // Node offsets x_i = psi(t_i) - psi(a).
        let x: Vec<f64> = (0..n).map(|i| self.mesh.w(i)).collect();
        let inv_gamma_alpha = 1.0 / gamma_fn(alpha)?;

        // Panel rules for singular inputs: the x^(-mu) factor is never
        // interpolated. The first panel absorbs it into a Jacobi weight (or
        // exact Beta moments when the target is its right edge), the panel
        // adjacent to the target absorbs the kernel singularity into a
        // Jacobi weight, and interior panels, where both factors are
        // analytic, use Gauss-Legendre on the full product.
        let singular = if mu > 0.0 {
            let origin_rule = GaussJacobi::new(
                JACOBI_DEG.try_into().expect("nonzero degree"),
                0.0.try_into().expect("finite exponent"),
                (-mu)
                    .try_into()
                    .expect("mu < 1 keeps the exponent above -1"),
            );
            let target_rule = GaussJacobi::new(
                JACOBI_DEG.try_into().expect("nonzero degree"),
                (alpha - 1.0)
                    .try_into()
                    .expect("alpha > 0 keeps the exponent above -1"),
                0.0.try_into().expect("finite exponent"),
            );
            let interior_rule = GaussLegendre::new(LEGENDRE_DEG.try_into().expect("nonzero"));
            let b1 = beta_fn(1.0 - mu, alpha)?;
            let b2 = beta_fn(2.0 - mu, alpha)?;
            Some((origin_rule, target_rule, interior_rule, b1, b2))
        } else {
            None
        };

        let out: Vec<f64> = try_map_range(mode, n, |j| -> Result<f64> {
            if j == 0 {
                return Ok(0.0);
            }
            let cap_x = x[j];
            let mut acc = 0.0_f64;

            if let Some((origin_rule, target_rule, interior_rule, b1, b2)) = &singular {
                let d0 = x[1];
                if j == 1 {
                    // Exact Beta moments of x^(-mu) * (linear) * (d0-x)^(alpha-1).
                    acc += d0.powf(alpha - mu) * (v[0] * b1 + (v[1] - v[0]) * b2);
                } else {
                    // First panel: kernel smooth, weight absorbs x^(-mu).
                    let scale = (0.5 * d0).powf(1.0 - mu);
                    let mut panel = 0.0_f64;
                    for &(xi, wk) in origin_rule.as_node_weight_pairs() {
                        let frac = 0.5 * (1.0 + xi);
                        let xk = d0 * frac;
                        let vk = v[0] + (v[1] - v[0]) * frac;
                        panel += wk * (cap_x - xk).powf(alpha - 1.0) * vk;
                    }
                    acc += scale * panel;
                }
                for i in 1..j {
                    let dx = x[i + 1] - x[i];
                    let mut panel = 0.0_f64;
                    if i + 1 == j {
                        // Target panel: weight absorbs (X - x)^(alpha-1).
                        for &(xi, wk) in target_rule.as_node_weight_pairs() {
                            let frac = 0.5 * (1.0 + xi);
                            let xk = x[i] + dx * frac;
                            let vk = v[i] + (v[i + 1] - v[i]) * frac;
                            panel += wk * xk.powf(-mu) * vk;
                        }
                        acc += (0.5 * dx).powf(alpha) * panel;
                    } else {
                        for &(xi, wk) in interior_rule.as_node_weight_pairs() {
                            let frac = 0.5 * (1.0 + xi);
                            let xk = x[i] + dx * frac;
                            let vk = v[i] + (v[i + 1] - v[i]) * frac;
                            panel += wk * (cap_x - xk).powf(alpha - 1.0) * xk.powf(-mu) * vk;
                        }
                        acc += 0.5 * dx * panel;
                    }
                }
            } else {
                // Regular panels: exact kernel moments m0 = int (d0-s)^(a-1) ds
                // and m1 = int (d0-s)^(a-1) s ds over s in [0, dx], against the
                // interpolant v_i + slope*s. Far panels (dx <= d1) evaluate the
                // power differences through ln_1p/exp_m1 so the O(dx^2) moment
                // m1 carries no catastrophic cancellation; for near panels the
                // direct differences are benign.
                for i in 0..j {
                    let d0 = cap_x - x[i];
                    let d1 = cap_x - x[i + 1];
                    let dx = x[i + 1] - x[i];
                    let (m0, m1) = if d1 > 0.0 && dx <= d1 {
                        let lr = (dx / d1).ln_1p();
                        let p1 = d1.powf(alpha);
                        let m0 = p1 * (alpha * lr).exp_m1() / alpha;
                        let n1 = p1 * d1 * ((alpha + 1.0) * lr).exp_m1() / (alpha + 1.0);
                        (m0, (d0 * m0 - n1).clamp(0.0, dx * m0))
                    } else {
                        let p0 = d0.powf(alpha);
                        let p1 = if d1 == 0.0 { 0.0 } else { d1.powf(alpha) };
                        let m0 = (p0 - p1) / alpha;
                        let n1 = (p0 * d0 - p1 * d1) / (alpha + 1.0);
                        (m0, (d0 * m0 - n1).clamp(0.0, dx * m0))
                    };
                    acc += v[i] * m0 + (v[i + 1] - v[i]) / dx * m1;
                }
            }

            let g = acc * inv_gamma_alpha;
            Ok(if mu == 0.0 { g } else { g * cap_x.powf(mu) })
        })?;

        WeightedGridFunction::new(f.mesh_arc(), mu, out)
    }
}

/// One-shot fractional integral of `f` on its own mesh.
pub fn frac_integral(alpha: f64, f: &WeightedGridFunction) -> Result<WeightedGridFunction> {
    FracIntegralOperator::new(f.mesh_arc(), alpha)?.apply(f)
}

/// Closed-form value of I^(alpha;psi) applied to w^(delta-1), evaluated at t:
///
///   gamma(delta) / gamma(delta + alpha) * w(t)^(alpha + delta - 1).
///
/// alpha = 0 is permitted and yields the identity. Requires t strictly
/// inside (a, b] since the result may be singular at a.
pub fn power_rule_exact(kernel: &PsiKernel, alpha: f64, delta: f64, t: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power rule needs alpha >= 0, got {alpha}"
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power rule needs delta > 0, got {delta}"
        )));
    }
    if !(t > kernel.a() && t <= kernel.b()) {
        return Err(Error::Domain(format!(
            "power rule evaluation point {t} outside ({}, {}]",
            kernel.a(),
            kernel.b()
        )));
    }
    let w = kernel.w(t);
    Ok(gamma_fn(delta)? / gamma_fn(delta + alpha)? * w.powf(alpha + delta - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WeightedGridFunction;
    use crate::kernel::builtin_kernels;
    use crate::mesh::build_graded_mesh;
    use approx::assert_relative_eq;

    fn mesh_on(kernel_name: &str, a: f64, b: f64, n: usize, r: f64) -> Arc<GradedMesh> {
        let k = builtin_kernels(kernel_name, a, b).unwrap();
        build_graded_mesh(&k, n, r).unwrap()
    }

    #[test]
    fn constant_input_is_integrated_exactly() {
        // I^(1/2) 1 with psi = t equals w^(1/2)/gamma(3/2); the interpolant
        // of a constant is the constant, so the quadrature is exact.
        let mesh = mesh_on("linear", 0.0, 1.0, 64, 1.0);
        let one = WeightedGridFunction::constant(mesh.clone(), 0.0, 1.0).unwrap();
        let out = frac_integral(0.5, &one).unwrap();
        for j in 1..=mesh.last_index() {
            let exact = power_rule_exact(mesh.kernel(), 0.5, 1.0, mesh.nodes()[j]).unwrap();
            assert_relative_eq!(out.values()[j], exact, max_relative = 1e-12);
        }
        // Frozen endpoint value 2/sqrt(pi).
        assert_relative_eq!(
            out.values()[mesh.last_index()],
            1.128_379_167_095_512_6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn singular_power_input_matches_power_rule() {
        // h = w^(delta-1) with delta = 2/3 stored at exponent mu = 1/3 is the
        // constant weighted function 1; its half-order integral is
        // gamma(2/3)/gamma(7/6) * w^(1/6).
        let delta = 2.0 / 3.0;
        let mu = 1.0 - delta;
        let mesh = mesh_on("sqrt_shift", 0.0, 1.0, 256, 3.0);
        let f = WeightedGridFunction::constant(mesh.clone(), mu, 1.0).unwrap();
        let out = frac_integral(0.5, &f).unwrap();
        // Error in the weighted sup norm (the operator's contract norm) over
        // all nodes, and relative error away from the origin.
        let mut worst_weighted = 0.0_f64;
        let mut worst_rel_tail = 0.0_f64;
        for j in 1..=mesh.last_index() {
            let exact = power_rule_exact(mesh.kernel(), 0.5, delta, mesh.nodes()[j]).unwrap();
            worst_weighted =
                worst_weighted.max((out.values()[j] - mesh.w(j).powf(mu) * exact).abs());
            if j >= mesh.last_index() / 4 {
                let got = out.values()[j] * mesh.w(j).powf(-mu);
                worst_rel_tail = worst_rel_tail.max((got - exact).abs() / exact.abs());
            }
        }
        assert!(
            worst_weighted < 5e-4,
            "weighted max deviation {worst_weighted}"
        );
        assert!(
            worst_rel_tail < 2e-3,
            "tail relative deviation {worst_rel_tail}"
        );
        // Frozen value at t = 1: gamma(2/3)/gamma(7/6) * (sqrt(2)-1)^(1/6).
        let end = out.values()[mesh.last_index()] * mesh.w(mesh.last_index()).powf(-mu);
        assert_relative_eq!(end, 1.2602, max_relative = 5e-4);
    }

    #[test]
    fn operator_is_linear_to_machine_precision() {
        let mesh = mesh_on("exp", 0.0, 1.0, 40, 2.0);
        let f = WeightedGridFunction::sample_weighted(mesh.clone(), 0.0, |t, _| (3.0 * t).sin())
            .unwrap();
        let g =
            WeightedGridFunction::sample_weighted(mesh.clone(), 0.0, |t, _| t * t - 0.5).unwrap();
        let combo = f.linear_combination(2.0, -0.75, &g).unwrap();
        let op = FracIntegralOperator::new(mesh, 0.7).unwrap();
        let lhs = op.apply(&combo).unwrap();
        let rhs = op
            .apply(&f)
            .unwrap()
            .linear_combination(2.0, -0.75, &op.apply(&g).unwrap())
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-13);
    }

    #[test]
    fn nonnegative_input_stays_nonnegative() {
        let mesh = mesh_on("linear", 0.0, 2.0, 50, 2.0);
        let f = WeightedGridFunction::sample_weighted(mesh, 0.3, |t, _| 0.1 + t).unwrap();
        let out = frac_integral(0.4, &f).unwrap();
        assert!(out.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn mismatched_meshes_are_rejected() {
        let m1 = mesh_on("linear", 0.0, 1.0, 16, 1.0);
        let m2 = mesh_on("linear", 0.0, 1.0, 17, 1.0);
        let f = WeightedGridFunction::constant(m2, 0.0, 1.0).unwrap();
        let op = FracIntegralOperator::new(m1, 0.5).unwrap();
        assert!(matches!(op.apply(&f), Err(Error::MeshMismatch)));
    }

    #[test]
    fn power_rule_closed_form_checks() {
        let k = builtin_kernels("linear", 0.0, 1.0).unwrap();
        // alpha = 0 is the identity.
        let id = power_rule_exact(&k, 0.0, 0.5, 0.25).unwrap();
        assert_relative_eq!(id, 0.25_f64.powf(-0.5), max_relative = 1e-14);
        // I^(1/2) of w^0 at t: w^(1/2)/gamma(3/2) = 2 sqrt(t/pi).
        let v = power_rule_exact(&k, 0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(v, 2.0 / std::f64::consts::PI.sqrt(), max_relative = 1e-13);
        assert!(power_rule_exact(&k, 0.5, 1.0, 0.0).is_err());
        assert!(power_rule_exact(&k, -0.1, 1.0, 0.5).is_err());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_rows_are_bit_identical() {
        let mesh = mesh_on("sqrt_shift", 0.0, 1.0, 200, 2.5);
        let f =
            WeightedGridFunction::sample_weighted(mesh.clone(), 0.25, |t, w| (1.0 + t).ln() + w)
                .unwrap();
        let op = FracIntegralOperator::new(mesh, 0.6).unwrap();
        let seq = op.apply_with_mode(&f, ExecutionMode::Sequential).unwrap();
        let par = op.apply_with_mode(&f, ExecutionMode::Parallel).unwrap();
        assert_eq!(seq.values(), par.values());
    }
}
