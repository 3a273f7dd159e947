use crate::derivative::hilfer_derivative;
use crate::error::{Error, Result};
use crate::grid::WeightedGridFunction;
use crate::integral::frac_integral;
use crate::problem::FractionalOrder;
use crate::special::gamma_fn;

/// Max weighted deviation of the semigroup property
/// I^(alpha) I^(beta_ord) h = I^(alpha+beta_ord) h over every node.
pub fn check_semigroup(alpha: f64, beta_ord: f64, h: &WeightedGridFunction) -> Result<f64> {
    if !(beta_ord.is_finite() && beta_ord > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "semigroup check needs positive orders, got beta_ord {beta_ord}"
        )));
    }
    let nested = frac_integral(alpha, &frac_integral(beta_ord, h)?)?;
    let direct = frac_integral(alpha + beta_ord, h)?;
    nested.max_abs_diff(&direct)
}

/// Interior nodes used by derivative-based checkers: the first two and the
/// last node are excluded because one-sided stencils degrade there.
fn interior_range(last: usize) -> std::ops::Range<usize> {
    2..last
}

/// Max deviation of D^(alpha,beta) I^(alpha) h = h over interior nodes.
/// Requires a continuous representative (weight exponent 0).
pub fn check_left_inverse(order: FractionalOrder, h: &WeightedGridFunction) -> Result<f64> {
    if h.weight_exponent() != 0.0 {
        return Err(Error::InvalidParameter(
            "left-inverse check needs an unweighted input (exponent 0)".into(),
        ));
    }
    let roundtrip = hilfer_derivative(order, &frac_integral(order.alpha(), h)?)?;
    let mut worst = 0.0_f64;
    for j in interior_range(h.mesh().last_index()) {
        worst = worst.max((roundtrip.values()[j] - h.values()[j]).abs());
    }
    Ok(worst)
}

/// Max weighted deviation over interior nodes of the expansion
///
///   I^(alpha) D^(alpha,beta) h = h - w^(gamma-1)/gamma(gamma) * I^(1-gamma) h(a),
///
/// where the initial-limit term equals `u_a` supplied by the caller (exact
/// for inputs of the form u_a/gamma(gamma) * w^(gamma-1) + smoother part).
pub fn check_integral_inversion(
    order: FractionalOrder,
    h: &WeightedGridFunction,
    u_a: f64,
) -> Result<f64> {
    let lhs = frac_integral(order.alpha(), &hilfer_derivative(order, h)?)?;
    let gamma = order.gamma();
    let seed_coeff = u_a / gamma_fn(gamma)?;
    let mu = h.weight_exponent();
    let mesh = h.mesh();
    let mut worst = 0.0_f64;
    for j in interior_range(mesh.last_index()) {
        let rhs = h.values()[j] - seed_coeff * mesh.w(j).powf(mu + gamma - 1.0);
        worst = worst.max((lhs.values()[j] - rhs).abs());
    }
    Ok(worst)
}
