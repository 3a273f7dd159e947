use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::{try_map_range, ExecutionMode};
use crate::grid::WeightedGridFunction;
use crate::integral::FracIntegralOperator;
use crate::mesh::{build_composite_mesh, default_grading, GradedMesh};
use crate::problem::ProblemSpec;
use crate::special::gamma_fn;

/// Knobs of the Picard scheme. `mesh_n` counts panels per subinterval of the
/// contraction partition; the grading exponent defaults to the standard rate
/// for the problem's composite order.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub mesh_n: usize,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub safety_factor: f64,
    pub grading: Option<f64>,
    pub mode: ExecutionMode,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mesh_n: 512,
            picard_tol: 1e-10,
            picard_max_iters: 200,
            inner_tol: 1e-12,
            inner_max_iters: 100,
            safety_factor: 0.9,
            grading: None,
            mode: ExecutionMode::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mesh_n < 2 {
            return Err(Error::InvalidParameter(format!(
                "mesh_N must be at least 2 panels, got {}",
                self.mesh_n
            )));
        }
        for (name, v) in [
            ("picard_tol", self.picard_tol),
            ("inner_tol", self.inner_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.safety_factor.is_finite() && 0.0 < self.safety_factor && self.safety_factor < 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "safety_factor must lie in (0, 1), got {}",
                self.safety_factor
            )));
        }
        if self.picard_max_iters == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidParameter(
                "iteration caps must be positive".into(),
            ));
        }
        if let Some(r) = self.grading {
            if !(r.is_finite() && r >= 1.0) {
                return Err(Error::InvalidGrading(r));
            }
        }
        Ok(())
    }
}

/// Subdivision a = t_0 < ... < t_K = b with the per-interval contraction
/// constants eta_k that make each local Picard map a contraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub breakpoints: Vec<f64>,
    pub contraction_constants: Vec<f64>,
}

impl Partition {
    pub fn num_intervals(&self) -> usize {
        self.contraction_constants.len()
    }
}

/// Everything a solve produced: the weighted solution, the partition it ran
/// on, per-interval iteration counts and successive-difference histories, the
/// converged right-hand side F_u, and an a-posteriori residual of the full
/// integral equation measured by one extra sweep.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: WeightedGridFunction,
    pub partition: Partition,
    pub picard_iters_per_interval: Vec<usize>,
    pub final_residual: f64,
    pub rhs_values: WeightedGridFunction,
    pub delta_history: Vec<Vec<f64>>,
    pub certificate: Option<f64>,
}

/// The zeroth iterate u_0 = u_a/gamma(gamma) * w^(gamma-1): constant in the
/// weighted representation, where the exponent 1-gamma cancels the seed's
/// singular factor exactly.
pub fn seed_iterate(problem: &ProblemSpec, mesh: &Arc<GradedMesh>) -> Result<WeightedGridFunction> {
    let gamma = problem.order().gamma();
    let c = problem.u_a() / gamma_fn(gamma)?;
    WeightedGridFunction::constant(Arc::clone(mesh), 1.0 - gamma, c)
}

/// Resolves the implicit value F = f(t, u_t, F) by direct iteration from
/// `f_init`; converges geometrically at rate M* < 1. The returned F satisfies
/// |F - f(t, u_t, F)| <= inner_tol * (1 + |F|).
pub fn inner_fixed_point(
    problem: &ProblemSpec,
    t: f64,
    u_t: f64,
    f_init: f64,
    cfg: &SolveConfig,
) -> Result<f64> {
    let kernel = problem.kernel();
    let w = kernel.psi(t) - kernel.psi(kernel.a());
    let mut f_cur = f_init;
    for _ in 0..cfg.inner_max_iters {
        let f_next = problem.rhs().eval(t, w, u_t, f_cur);
        if !f_next.is_finite() {
            return Err(Error::InnerDivergence {
                t,
                iters: cfg.inner_max_iters,
            });
        }
        if (f_next - f_cur).abs() <= cfg.inner_tol * (1.0 + f_next.abs()) {
            return Ok(f_next);
        }
        f_cur = f_next;
    }
    Err(Error::InnerDivergence {
        t,
        iters: cfg.inner_max_iters,
    })
}

/// Greedy left-to-right subdivision: from t_k, the next breakpoint is the
/// largest t <= b with
///
///   eta_k = gamma(gamma) (psi(t) - psi(t_k))^alpha / gamma(gamma+alpha)
///           * M/(1-M*)  <=  safety_factor,
///
/// found by bisection on the increasing psi (no inverse kernel needed).
pub fn partition_domain(problem: &ProblemSpec, cfg: &SolveConfig) -> Result<Partition> {
    cfg.validate()?;
    let kernel = problem.kernel();
    let (a, b) = (kernel.a(), kernel.b());
    let alpha = problem.order().alpha();
    let gamma = problem.order().gamma();
    let m_eff = problem.lipschitz_m() / (1.0 - problem.lipschitz_mstar());
    let coeff = gamma_fn(gamma)? / gamma_fn(gamma + alpha)? * m_eff;
    let psi_a = kernel.psi(a);
    let psi_b = kernel.psi(b);

    if coeff <= 0.0 || coeff * (psi_b - psi_a).powf(alpha) <= cfg.safety_factor {
        let eta = (coeff * (psi_b - psi_a).powf(alpha)).max(0.0);
        return Ok(Partition {
            breakpoints: vec![a, b],
            contraction_constants: vec![eta],
        });
    }

    let dpsi_max = (cfg.safety_factor / coeff).powf(1.0 / alpha);
    let mut breakpoints = vec![a];
    let mut etas = Vec::new();
    let mut t_k = a;
    while t_k < b {
        let psi_k = kernel.psi(t_k);
        let t_next = if psi_b - psi_k <= dpsi_max {
            b
        } else {
            // Largest t with psi(t) <= psi_k + dpsi_max; fixed iteration
            // count keeps the result bit-reproducible.
            let target = psi_k + dpsi_max;
            let (mut lo, mut hi) = (t_k, b);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if kernel.psi(mid) <= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if !(t_next > t_k) {
            return Err(Error::DegenerateStep(t_k));
        }
        etas.push(coeff * (kernel.psi(t_next) - psi_k).powf(alpha));
        breakpoints.push(t_next);
        t_k = t_next;
    }
    Ok(Partition {
        breakpoints,
        contraction_constants: etas,
    })
}

/// One Picard sweep: evaluates F at every non-frozen node up to `active_end`
/// by the inner fixed point (warm-started from the previous sweep), then
/// u_new = seed + I^(alpha) F in weighted form.
///
/// Nodes below `freeze` keep their converged F from earlier subintervals;
/// since the integral at row j only reads F[0..=j], the frozen prefix of the
/// output reproduces itself bitwise. Nodes beyond `active_end` get F = 0 —
/// they belong to later subintervals where the map need not contract yet, so
/// iterating them would be wasted (and potentially overflowing) work.
fn sweep(
    problem: &ProblemSpec,
    op: &FracIntegralOperator,
    seed: &WeightedGridFunction,
    u_prev: &WeightedGridFunction,
    f_prev: &WeightedGridFunction,
    freeze: usize,
    active_end: usize,
    cfg: &SolveConfig,
) -> Result<(WeightedGridFunction, WeightedGridFunction)> {
    let mesh = u_prev.mesh();
    let nodes = mesh.nodes();
    let n = nodes.len();
    let mu = u_prev.weight_exponent();
    let lo = if mu > 0.0 { 1 } else { 0 };

    let mut f_values: Vec<f64> = try_map_range(cfg.mode, n, |j| -> Result<f64> {
        if j < freeze {
            return Ok(f_prev.values()[j]);
        }
        if j > active_end || j < lo {
            return Ok(0.0);
        }
        // Unweighted iterate and warm start; both exist for j >= lo.
        let u_j = u_prev.unweighted_at(j).unwrap_or(0.0);
        let f_init = f_prev.unweighted_at(j).unwrap_or(0.0);
        let f_val = inner_fixed_point(problem, nodes[j], u_j, f_init, cfg)?;
        Ok(f_val * mesh.w(j).powf(mu))
    })?;
    // Weighted F at the origin is not directly evaluable (u is singular there
    // for gamma < 1, and f itself may be); extend linearly in the psi offset.
    if freeze == 0 && n >= 3 && (lo == 1 || !f_values[0].is_finite()) {
        let (x1, x2) = (mesh.w(1), mesh.w(2));
        f_values[0] = f_values[1] - (f_values[2] - f_values[1]) * x1 / (x2 - x1);
    }
    let f_new = WeightedGridFunction::new(u_prev.mesh_arc(), mu, f_values)?;
    let integral = op.apply_with_mode(&f_new, cfg.mode)?;
    let u_new = seed.linear_combination(1.0, 1.0, &integral)?;
    Ok((u_new, f_new))
}

/// One full-domain Picard sweep u_new = seed + I^(alpha) F_{u_prev}: the
/// public single-step view of the scheme; `solve_cauchy` drives it to a
/// fixed point per subinterval.
pub fn picard_sweep(
    problem: &ProblemSpec,
    mesh: &Arc<GradedMesh>,
    u_prev: &WeightedGridFunction,
    f_prev: &WeightedGridFunction,
    cfg: &SolveConfig,
) -> Result<(WeightedGridFunction, WeightedGridFunction)> {
    cfg.validate()?;
    if !u_prev.mesh().same_grid(mesh) || !f_prev.same_layout(u_prev) {
        return Err(Error::MeshMismatch);
    }
    let op = FracIntegralOperator::new(Arc::clone(mesh), problem.order().alpha())?;
    let seed = seed_iterate(problem, mesh)?;
    let last = mesh.last_index();
    sweep(problem, &op, &seed, u_prev, f_prev, 0, last, cfg)
}

/// Weighted max-norm defect of the integral equation, ‖u - seed - I^α F‖:
/// an a-posteriori certificate independent of how u was produced.
pub fn volterra_residual(
    problem: &ProblemSpec,
    u: &WeightedGridFunction,
    f: &WeightedGridFunction,
) -> Result<f64> {
    if !f.same_layout(u) {
        return Err(Error::MeshMismatch);
    }
    let op = FracIntegralOperator::new(u.mesh_arc(), problem.order().alpha())?;
    let seed = seed_iterate(problem, &u.mesh_arc())?;
    let rhs = seed.linear_combination(1.0, 1.0, &op.apply(f)?)?;
    u.max_abs_diff(&rhs)
}

/// Solves the Cauchy-type problem on its kernel's [a, b]: partitions the
/// domain so each piece contracts, then drives Picard sweeps to the fixed
/// point piece by piece, freezing converged history (its convolution
/// contribution is carried exactly by the global integral operator).
pub fn solve_cauchy(problem: &ProblemSpec, cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let partition = partition_domain(problem, cfg)?;
    let gamma = problem.order().gamma();
    let r = cfg.grading.unwrap_or_else(|| default_grading(gamma));
    let mesh = build_composite_mesh(problem.kernel(), &partition.breakpoints, cfg.mesh_n, r)?;
    let op = FracIntegralOperator::new(Arc::clone(&mesh), problem.order().alpha())?;
    let seed = seed_iterate(problem, &mesh)?;
    let mu = seed.weight_exponent();

    let mut u = seed.clone();
    let mut f = WeightedGridFunction::constant(Arc::clone(&mesh), mu, 0.0)?;
    let intervals = partition.num_intervals();
    let mut iters_per_interval = Vec::with_capacity(intervals);
    let mut delta_history = Vec::with_capacity(intervals);

    for k in 0..intervals {
        let freeze = if k == 0 { 0 } else { k * cfg.mesh_n + 1 };
        let active_end = (k + 1) * cfg.mesh_n;
        let mut deltas = Vec::new();
        let mut converged = false;
        for it in 1..=cfg.picard_max_iters {
            let (u_next, f_next) = sweep(problem, &op, &seed, &u, &f, freeze, active_end, cfg)?;
            let delta = u_next.max_abs_diff(&u)?;
            u = u_next;
            f = f_next;
            deltas.push(delta);
            if delta <= cfg.picard_tol {
                converged = true;
                iters_per_interval.push(it);
                break;
            }
        }
        if !converged {
            let residual = deltas.last().copied().unwrap_or(f64::NAN);
            return Err(Error::NonConvergence {
                residual,
                iters: cfg.picard_max_iters,
            });
        }
        delta_history.push(deltas);
    }

    // A-posteriori defect: one more full sweep evaluated at the converged u.
    let last = mesh.last_index();
    let (u_check, f_final) = sweep(problem, &op, &seed, &u, &f, 0, last, cfg)?;
    let final_residual = u_check.max_abs_diff(&u)?;

    Ok(SolveReport {
        solution: u,
        partition,
        picard_iters_per_interval: iters_per_interval,
        final_residual,
        rhs_values: f_final,
        delta_history,
        certificate: None,
    })
}
