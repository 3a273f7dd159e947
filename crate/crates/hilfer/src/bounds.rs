use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::WeightedGridFunction;
use crate::integral::FracIntegralOperator;
use crate::mesh::GradedMesh;
use crate::problem::ProblemSpec;
use crate::solver::{solve_cauchy, SolveConfig};
use crate::special::{gamma_fn, mittag_leffler, MlSeriesPolicy};

/// Relative tolerance at which convolution-series terms stop contributing.
const SERIES_TOL: f64 = 1e-14;
/// Consecutive negligible terms required before truncating a series.
const SERIES_STREAK: usize = 3;

/// Inputs of the integral-inequality envelope: a nonnegative baseline `v`, a
/// nonnegative nondecreasing multiplier `h` sampled at the mesh nodes, and
/// the order `alpha` of the singular kernel.
#[derive(Debug, Clone)]
pub struct GronwallInput {
    v: WeightedGridFunction,
    h: Vec<f64>,
    alpha: f64,
}

impl GronwallInput {
    pub fn new(v: WeightedGridFunction, h: Vec<f64>, alpha: f64) -> Result<Self> {
        if h.len() != v.mesh().nodes().len() {
            return Err(Error::InvalidParameter(format!(
                "multiplier has {} values for {} nodes",
                h.len(),
                v.mesh().nodes().len()
            )));
        }
        if v.values().iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter(
                "envelope baseline must be nonnegative".into(),
            ));
        }
        if h.iter().any(|&x| !(x.is_finite() && x >= 0.0)) || h.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::InvalidParameter(
                "multiplier must be nonnegative and nondecreasing".into(),
            ));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "envelope order must be positive, got {alpha}"
            )));
        }
        Ok(Self { v, h, alpha })
    }

    pub fn with_constant_h(v: WeightedGridFunction, h0: f64, alpha: f64) -> Result<Self> {
        let n = v.mesh().nodes().len();
        Self::new(v, vec![h0; n], alpha)
    }

    pub fn v(&self) -> &WeightedGridFunction {
        &self.v
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Result of the envelope evaluation. `closed_form` is populated when both
/// v and h are constant and the baseline is unweighted, in which case the
/// envelope collapses to v * E_alpha(h gamma(alpha) w^alpha) nodewise.
#[derive(Debug, Clone)]
pub struct GronwallEnvelope {
    pub envelope: WeightedGridFunction,
    pub closed_form: Option<Vec<f64>>,
    pub terms_used: usize,
}

/// Evaluates the envelope
///
///   env(t) = v(t) + sum_{k>=1} [h(t) gamma(alpha)]^k I^(alpha k) v (t),
///
/// truncating the series once three consecutive terms contribute below
/// 1e-14 relative to the accumulated values everywhere on the mesh.
pub fn gronwall_envelope(inp: &GronwallInput, k_terms: usize) -> Result<GronwallEnvelope> {
    if k_terms < 10 {
        return Err(Error::InvalidParameter(format!(
            "series cap must allow at least 10 terms, got {k_terms}"
        )));
    }
    let mesh = inp.v.mesh_arc();
    let n = mesh.nodes().len();
    let gamma_alpha = gamma_fn(inp.alpha)?;
    let mut acc = inp.v.values().to_vec();
    let h_max = inp.h.iter().fold(0.0_f64, |m, &x| m.max(x));

    let mut terms_used = 0;
    if h_max > 0.0 {
        let mut streak = 0;
        let mut truncated = true;
        for k in 1..=k_terms {
            // Each term integrates the original baseline at order alpha*k;
            // composing I^alpha with itself instead would re-interpolate the
            // fractional-power intermediates and compound quadrature error.
            let step = FracIntegralOperator::new(Arc::clone(&mesh), inp.alpha * k as f64)?;
            let current = step.apply(&inp.v)?;
            terms_used = k;
            let acc_scale = acc.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            let mut term_max = 0.0_f64;
            for j in 0..n {
                let factor = (inp.h[j] * gamma_alpha).powi(k as i32);
                let contribution = factor * current.values()[j];
                if contribution.is_finite() {
                    acc[j] += contribution;
                    term_max = term_max.max(contribution.abs());
                }
            }
            if term_max <= SERIES_TOL * (1.0 + acc_scale) {
                streak += 1;
                if streak >= SERIES_STREAK {
                    truncated = false;
                    break;
                }
            } else {
                streak = 0;
            }
        }
        if truncated {
            return Err(Error::SeriesCap(k_terms));
        }
    }

    let envelope = WeightedGridFunction::new(mesh.clone(), inp.v.weight_exponent(), acc)?;
    let v0 = inp.v.values()[0];
    let constant_inputs = inp.v.weight_exponent() == 0.0
        && inp.v.values().iter().all(|&x| x == v0)
        && inp.h.iter().all(|&x| x == inp.h[0]);
    let closed_form = if constant_inputs {
        let policy = MlSeriesPolicy::default();
        let mut cf = Vec::with_capacity(n);
        for j in 0..n {
            let z = inp.h[0] * gamma_alpha * mesh.w(j).powf(inp.alpha);
            cf.push(v0 * mittag_leffler(inp.alpha, 1.0, z, policy)?);
        }
        Some(cf)
    } else {
        None
    };

    Ok(GronwallEnvelope {
        envelope,
        closed_form,
        terms_used,
    })
}

/// An incremental-series convolution used by the semigroup-compatible
/// dependence bound: base + sum_{k>=1} c^k I^(step k) base.
fn geometric_convolution(
    base: &WeightedGridFunction,
    step_order: f64,
    c: f64,
    k_terms: usize,
) -> Result<(WeightedGridFunction, usize)> {
    let mesh = base.mesh_arc();
    let n = mesh.nodes().len();
    let mut acc = base.values().to_vec();
    if c == 0.0 {
        let out = WeightedGridFunction::new(mesh, base.weight_exponent(), acc)?;
        return Ok((out, 0));
    }
    let mut streak = 0;
    for k in 1..=k_terms {
        let op = FracIntegralOperator::new(Arc::clone(&mesh), step_order * k as f64)?;
        let current = op.apply(base)?;
        let factor = c.powi(k as i32);
        let acc_scale = acc.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
        let mut term_max = 0.0_f64;
        for j in 0..n {
            let contribution = factor * current.values()[j];
            if contribution.is_finite() {
                acc[j] += contribution;
                term_max = term_max.max(contribution.abs());
            }
        }
        if term_max <= SERIES_TOL * (1.0 + acc_scale) {
            streak += 1;
            if streak >= SERIES_STREAK {
                let out = WeightedGridFunction::new(mesh, base.weight_exponent(), acc)?;
                return Ok((out, k));
            }
        } else {
            streak = 0;
        }
    }
    Err(Error::SeriesCap(k_terms))
}

/// Shift of the differentiation order alpha -> alpha - epsilon together with
/// the matching initial value of the perturbed problem. `f_sup` is the sup of
/// |f(t, u(t), F_u(t))| along the base solution; leave it `None` to have
/// [`verify_dependence`] measure it from the solved right-hand side.
#[derive(Debug, Clone)]
pub struct OrderPerturbation {
    pub epsilon: f64,
    pub u_a_star: f64,
    pub f_sup: Option<f64>,
}

/// Shift of the weighted initial value u_a -> u_a + delta.
#[derive(Debug, Clone)]
pub struct DataPerturbation {
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub enum Perturbation {
    Order(OrderPerturbation),
    Data(DataPerturbation),
}

fn validate_order_perturbation(problem: &ProblemSpec, pert: &OrderPerturbation) -> Result<()> {
    let alpha = problem.order().alpha();
    if !(pert.epsilon.is_finite() && (0.0..alpha).contains(&pert.epsilon)) {
        return Err(Error::InvalidParameter(format!(
            "order shift must satisfy 0 <= epsilon < alpha = {alpha}, got {}",
            pert.epsilon
        )));
    }
    if !pert.u_a_star.is_finite() {
        return Err(Error::InvalidParameter(
            "perturbed initial value must be finite".into(),
        ));
    }
    if let Some(fs) = pert.f_sup {
        if !(fs.is_finite() && fs >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "f_sup must be finite and nonnegative, got {fs}"
            )));
        }
    }
    Ok(())
}

/// The inhomogeneous part A(t) of the order-dependence estimate, evaluated
/// exactly as displayed: one term comparing the two seeds and two terms
/// comparing the kernel normalizations, all against the sup of |f| along
/// the base solution.
pub fn order_dependence_a(problem: &ProblemSpec, pert: &OrderPerturbation, t: f64) -> Result<f64> {
    validate_order_perturbation(problem, pert)?;
    let f_sup = pert.f_sup.ok_or_else(|| {
        Error::InvalidParameter(
            "order_dependence_a needs f_sup (set it or use verify_dependence)".into(),
        )
    })?;
    let kernel = problem.kernel();
    if t <= kernel.a() {
        return Err(Error::Domain(format!(
            "A(t) is evaluated strictly inside the interval, got t = {t}"
        )));
    }
    let w = kernel.psi(t) - kernel.psi(kernel.a());
    let alpha = problem.order().alpha();
    let beta = problem.order().beta();
    let gamma = problem.order().gamma();
    let gamma_star = gamma + pert.epsilon * (beta - 1.0);
    let ae = alpha - pert.epsilon;

    let seed_term = (pert.u_a_star * w.powf(gamma_star - 1.0) / gamma_fn(gamma_star)?
        - problem.u_a() * w.powf(gamma - 1.0) / gamma_fn(gamma)?)
    .abs();
    let cross = w.powf(ae) / (gamma_fn(ae)? * gamma_fn(alpha)?);
    let kernel_term_1 = (w.powf(ae) / gamma_fn(ae + 1.0)? - cross).abs();
    let kernel_term_2 = (cross - w.powf(alpha) / gamma_fn(alpha + 1.0)?).abs();
    Ok(seed_term + f_sup * (kernel_term_1 + kernel_term_2))
}

/// Weighted representation of A on a mesh: values w^(1-gamma*) A(t_j) at the
/// exponent 1 - gamma* that keeps the t -> a limit finite.
fn order_a_weighted(
    problem: &ProblemSpec,
    pert: &OrderPerturbation,
    mesh: &Arc<GradedMesh>,
) -> Result<WeightedGridFunction> {
    let beta = problem.order().beta();
    let gamma = problem.order().gamma();
    let gamma_star = gamma + pert.epsilon * (beta - 1.0);
    let mu = 1.0 - gamma_star;
    let n = mesh.nodes().len();
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        if j == 0 {
            // Limit of w^(1-gamma*) A as w -> 0: only the perturbed seed
            // survives when gamma* < gamma; the seed difference otherwise.
            let v0 = if gamma_star < gamma {
                (pert.u_a_star / gamma_fn(gamma_star)?).abs()
            } else {
                ((pert.u_a_star - problem.u_a()) / gamma_fn(gamma)?).abs()
            };
            values.push(v0);
        } else {
            let a = order_dependence_a(problem, pert, mesh.nodes()[j])?;
            values.push(mesh.w(j).powf(mu) * a);
        }
    }
    WeightedGridFunction::new(Arc::clone(mesh), mu, values)
}

/// Full order-dependence envelope
///
///   B(t) = A(t) + sum_{k>=1} (M gamma(alpha-eps) / (gamma(alpha)(1-M*)))^k
///                 I^(k(alpha-eps)) A (t),
///
/// returned in the weighted representation at exponent 1 - gamma* (see
/// [`order_dependence_a`]); multiply by w^(gamma*-1) for pointwise values.
pub fn order_dependence_bound(
    problem: &ProblemSpec,
    pert: &OrderPerturbation,
    mesh: &Arc<GradedMesh>,
    k_terms: usize,
) -> Result<WeightedGridFunction> {
    validate_order_perturbation(problem, pert)?;
    let a_grid = order_a_weighted(problem, pert, mesh)?;
    let alpha = problem.order().alpha();
    let ae = alpha - pert.epsilon;
    let c = problem.lipschitz_m() * gamma_fn(ae)?
        / (gamma_fn(alpha)? * (1.0 - problem.lipschitz_mstar()));
    let (bound, _) = geometric_convolution(&a_grid, ae, c, k_terms)?;
    Ok(bound)
}

/// The data-dependence estimate at a point:
///
///   |u(t) - u*(t)| <= |delta| w^(gamma-1) E_(alpha,gamma)(M/(1-M*) w^alpha).
pub fn data_dependence_bound(
    problem: &ProblemSpec,
    pert: &DataPerturbation,
    t: f64,
) -> Result<f64> {
    if !pert.delta.is_finite() {
        return Err(Error::InvalidParameter("data shift must be finite".into()));
    }
    let kernel = problem.kernel();
    let gamma = problem.order().gamma();
    if t < kernel.a() || t > kernel.b() || (t == kernel.a() && gamma < 1.0) {
        return Err(Error::Domain(format!(
            "data bound is evaluated on (a, b], got t = {t}"
        )));
    }
    let w = kernel.psi(t) - kernel.psi(kernel.a());
    let m_eff = problem.lipschitz_m() / (1.0 - problem.lipschitz_mstar());
    let ml = mittag_leffler(
        problem.order().alpha(),
        gamma,
        m_eff * w.powf(problem.order().alpha()),
        MlSeriesPolicy::default(),
    )?;
    Ok(pert.delta.abs() * w.powf(gamma - 1.0) * ml)
}

/// Nodewise comparison of a dependence bound against two actual solves. All
/// columns are in the weighted norm (multiplied by the singular weight), so
/// every number is finite including near t = a.
#[derive(Debug, Clone)]
pub struct DependenceReport {
    pub mode: &'static str,
    pub nodes: Vec<f64>,
    pub weighted_diff: Vec<f64>,
    pub weighted_bound: Vec<f64>,
    pub margin: Vec<f64>,
    pub tightness_note: Option<String>,
}

impl DependenceReport {
    pub fn min_margin(&self) -> f64 {
        self.margin.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }
}

/// Solves the base and perturbed problems and checks the claimed bound
/// nodewise. Rows cover j >= 1 (the origin is excluded: bounds hold on
/// t > a). The margin is bound - diff, expected nonnegative up to
/// quadrature slack.
pub fn verify_dependence(
    problem: &ProblemSpec,
    pert: &Perturbation,
    cfg: &SolveConfig,
) -> Result<DependenceReport> {
    // Pin the grading so the perturbed solve (whose own default would differ
    // with its gamma) lands on the same nodes as the base solve.
    let mut cfg = cfg.clone();
    cfg.grading = Some(
        cfg.grading
            .unwrap_or_else(|| crate::mesh::default_grading(problem.order().gamma())),
    );
    let cfg = &cfg;
    let base = solve_cauchy(problem, cfg)?;
    let mesh = base.solution.mesh_arc();
    let n = mesh.nodes().len();
    match pert {
        Perturbation::Data(dp) => {
            if !dp.delta.is_finite() {
                return Err(Error::InvalidParameter("data shift must be finite".into()));
            }
            let perturbed = problem.with_u_a(problem.u_a() + dp.delta)?;
            let star = solve_cauchy(&perturbed, cfg)?;
            if !star.solution.same_layout(&base.solution) {
                return Err(Error::MeshMismatch);
            }
            let gamma = problem.order().gamma();
            let m_eff = problem.lipschitz_m() / (1.0 - problem.lipschitz_mstar());
            let policy = MlSeriesPolicy::default();
            let mut nodes = Vec::with_capacity(n - 1);
            let mut diffs = Vec::with_capacity(n - 1);
            let mut bounds = Vec::with_capacity(n - 1);
            let mut margins = Vec::with_capacity(n - 1);
            for j in 1..n {
                let w = mesh.w(j);
                let diff = (base.solution.values()[j] - star.solution.values()[j]).abs();
                // Weighted form of the displayed bound: the w^(gamma-1)
                // factor cancels against the representation weight.
                let z = m_eff * w.powf(problem.order().alpha());
                let bound =
                    dp.delta.abs() * mittag_leffler(problem.order().alpha(), gamma, z, policy)?;
                nodes.push(mesh.nodes()[j]);
                diffs.push(diff);
                bounds.push(bound);
                margins.push(bound - diff);
            }
            let tightness_note = match problem.rhs() {
                crate::problem::RhsSpec::LinearInU { .. } => Some(
                    "bound is tight for rhs linear in u: margin should sit at quadrature level"
                        .into(),
                ),
                _ => None,
            };
            Ok(DependenceReport {
                mode: "data",
                nodes,
                weighted_diff: diffs,
                weighted_bound: bounds,
                margin: margins,
                tightness_note,
            })
        }
        Perturbation::Order(op) => {
            validate_order_perturbation(problem, op)?;
            let f_sup = match op.f_sup {
                Some(fs) => fs,
                None => {
                    let mut sup = 0.0_f64;
                    let start = if base.rhs_values.weight_exponent() > 0.0 {
                        1
                    } else {
                        0
                    };
                    for j in start..n {
                        let f_j = base.rhs_values.unweighted_at(j).unwrap_or(f64::NAN);
                        if !f_j.is_finite() {
                            return Err(Error::InvalidParameter(
                                "measured |f| is unbounded along the solution; supply f_sup".into(),
                            ));
                        }
                        sup = sup.max(f_j.abs());
                    }
                    sup
                }
            };
            let pert_full = OrderPerturbation {
                f_sup: Some(f_sup),
                ..op.clone()
            };
            let perturbed = problem.with_perturbed_order(op.epsilon, op.u_a_star)?;
            let star = solve_cauchy(&perturbed, cfg)?;
            if star.solution.mesh().nodes() != mesh.nodes() {
                return Err(Error::InvalidParameter(
                    "order perturbation changed the contraction partition; \
                     compare with a smaller epsilon or a coarser safety factor"
                        .into(),
                ));
            }
            let bound = order_dependence_bound(problem, &pert_full, &mesh, 200)?;
            // Weight both solutions by w^(1-gamma*): the perturbed problem's
            // own representation already carries that exponent, the base one
            // is w^(epsilon(1-beta)) less singular.
            let shift = problem.order().gamma()
                - (problem.order().gamma() + op.epsilon * (problem.order().beta() - 1.0));
            let mut nodes = Vec::with_capacity(n - 1);
            let mut diffs = Vec::with_capacity(n - 1);
            let mut bounds = Vec::with_capacity(n - 1);
            let mut margins = Vec::with_capacity(n - 1);
            for j in 1..n {
                let w = mesh.w(j);
                let base_w = base.solution.values()[j] * w.powf(shift);
                let diff = (base_w - star.solution.values()[j]).abs();
                let b = bound.values()[j];
                nodes.push(mesh.nodes()[j]);
                diffs.push(diff);
                bounds.push(b);
                margins.push(b - diff);
            }
            Ok(DependenceReport {
                mode: "order",
                nodes,
                weighted_diff: diffs,
                weighted_bound: bounds,
                margin: margins,
                tightness_note: Some(
                    "A(t) does not vanish as epsilon -> 0 for alpha < 1 (formula evaluated \
                     as displayed); expect generous margins"
                        .into(),
                ),
            })
        }
    }
}
