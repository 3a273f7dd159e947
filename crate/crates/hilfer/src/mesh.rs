use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::PsiKernel;

/// Nonuniform time grid over a kernel's [a, b], with cached psi values.
///
/// The graded constructor places t_j = a + (b-a)(j/N)^r, clustering nodes at
/// the left endpoint to resolve the (psi(t)-psi(a))^(gamma-1) singularity of
/// weighted solutions. All operators consume the cached `psi_nodes` so the
/// kernel's inverse is never needed.
#[derive(Debug, Clone)]
pub struct GradedMesh {
    kernel: PsiKernel,
    grading: f64,
    nodes: Vec<f64>,
    psi_nodes: Vec<f64>,
    dpsi_nodes: Vec<f64>,
}

/// Default grading exponent for a given composite order gamma: the standard
/// rate recovering second-order product-trapezoid accuracy on w^(gamma-1) data.
pub fn default_grading(gamma: f64) -> f64 {
    (2.0 / gamma).max(1.0)
}

/// Builds the graded mesh t_j = a + (b-a)(j/N)^r with N panels (N+1 nodes).
pub fn build_graded_mesh(kernel: &PsiKernel, n: usize, r: f64) -> Result<Arc<GradedMesh>> {
    build_composite_mesh(kernel, &[kernel.a(), kernel.b()], n, r)
}

/// Builds a mesh over consecutive segments [breakpoints[k], breakpoints[k+1]]
/// with `n_per` panels each: the first segment graded with exponent r (it
/// contains the endpoint singularity), later segments uniform.
pub fn build_composite_mesh(
    kernel: &PsiKernel,
    breakpoints: &[f64],
    n_per: usize,
    r: f64,
) -> Result<Arc<GradedMesh>> {
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::InvalidGrading(r));
    }
    if n_per < 2 {
        return Err(Error::InvalidParameter(format!(
            "mesh needs at least 2 panels per segment, got {n_per}"
        )));
    }
    if breakpoints.len() < 2
        || breakpoints[0] != kernel.a()
        || breakpoints[breakpoints.len() - 1] != kernel.b()
        || breakpoints.windows(2).any(|p| p[0] >= p[1])
    {
        return Err(Error::InvalidParameter(
            "breakpoints must increase strictly from a to b".into(),
        ));
    }

    let mut nodes = Vec::with_capacity(n_per * (breakpoints.len() - 1) + 1);
    for (k, seg) in breakpoints.windows(2).enumerate() {
        let (lo, hi) = (seg[0], seg[1]);
        let start = if k == 0 { 0 } else { 1 };
        for j in start..=n_per {
            let frac = j as f64 / n_per as f64;
            let frac = if k == 0 { frac.powf(r) } else { frac };
            nodes.push(if j == n_per {
                hi
            } else {
                lo + (hi - lo) * frac
            });
        }
    }

    let psi_nodes: Vec<f64> = nodes.iter().map(|&t| kernel.psi(t)).collect();
    let dpsi_nodes: Vec<f64> = nodes.iter().map(|&t| kernel.dpsi(t)).collect();
    validate_kernel_on_nodes(kernel, &nodes, &psi_nodes, &dpsi_nodes)?;

    Ok(Arc::new(GradedMesh {
        kernel: kernel.clone(),
        grading: r,
        nodes,
        psi_nodes,
        dpsi_nodes,
    }))
}

fn validate_kernel_on_nodes(
    kernel: &PsiKernel,
    nodes: &[f64],
    psi_nodes: &[f64],
    dpsi_nodes: &[f64],
) -> Result<()> {
    for j in 0..nodes.len() - 1 {
        if !(psi_nodes[j + 1] > psi_nodes[j]) || !psi_nodes[j].is_finite() {
            return Err(Error::NonMonotoneKernel {
                label: kernel.label().to_string(),
                t_lo: nodes[j],
                t_hi: nodes[j + 1],
                x_lo: psi_nodes[j],
                x_hi: psi_nodes[j + 1],
            });
        }
    }
    // Spot-check psi' against a central difference of psi; stencil is clamped
    // into [a, b] so kernels need not be defined outside their interval.
    let h = 1e-5 * (kernel.b() - kernel.a());
    for (&t, &d) in nodes.iter().zip(dpsi_nodes) {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel `{}` has non-positive derivative {d} at t = {t}",
                kernel.label()
            )));
        }
        let tc = t.clamp(kernel.a() + h, kernel.b() - h);
        let fd = (kernel.psi(tc + h) - kernel.psi(tc - h)) / (2.0 * h);
        let dc = kernel.dpsi(tc);
        if (fd - dc).abs() > 1e-6 * (1.0 + dc.abs()) {
            return Err(Error::InvalidParameter(format!(
                "kernel `{}`: derivative {dc} disagrees with finite difference {fd} at t = {tc}",
                kernel.label()
            )));
        }
    }
    Ok(())
}

impl GradedMesh {
    pub fn kernel(&self) -> &PsiKernel {
        &self.kernel
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn psi_nodes(&self) -> &[f64] {
        &self.psi_nodes
    }

    pub fn dpsi_nodes(&self) -> &[f64] {
        &self.dpsi_nodes
    }

    /// Index of the last node (number of panels).
    pub fn last_index(&self) -> usize {
        self.nodes.len() - 1
    }

    /// w_j = psi(t_j) - psi(a).
    pub fn w(&self, j: usize) -> f64 {
        self.psi_nodes[j] - self.psi_nodes[0]
    }

    /// Two meshes are interchangeable when they hold identical nodes for the
    /// same kernel interval.
    pub fn same_grid(&self, other: &GradedMesh) -> bool {
        std::ptr::eq(self, other) || self.nodes == other.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::builtin_kernels;

    #[test]
    fn uniform_mesh_with_unit_grading() {
        let k = builtin_kernels("linear", 0.0, 1.0).unwrap();
        let m = build_graded_mesh(&k, 4, 1.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn quadratic_grading_squares_the_fractions() {
        let k = builtin_kernels("linear", 0.0, 1.0).unwrap();
        let m = build_graded_mesh(&k, 4, 2.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.0625, 0.25, 0.5625, 1.0]);
    }

    #[test]
    fn decreasing_kernel_is_rejected() {
        let k = PsiKernel::new("neg", 0.0, 1.0, |t| -t, |_| -1.0).unwrap();
        assert!(matches!(
            build_graded_mesh(&k, 8, 1.0),
            Err(Error::NonMonotoneKernel { .. })
        ));
    }

    #[test]
    fn inconsistent_derivative_is_rejected() {
        let k = PsiKernel::new("lie", 0.0, 1.0, |t| t, |_| 2.0).unwrap();
        assert!(build_graded_mesh(&k, 8, 1.0).is_err());
    }

    #[test]
    fn grading_below_one_is_rejected() {
        let k = builtin_kernels("linear", 0.0, 1.0).unwrap();
        assert!(matches!(
            build_graded_mesh(&k, 8, 0.5),
            Err(Error::InvalidGrading(_))
        ));
    }

    #[test]
    fn increasing_grading_shrinks_the_first_step() {
        let k = builtin_kernels("linear", 0.0, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for r in [1.0, 2.0, 3.0, 4.0] {
            let m = build_graded_mesh(&k, 16, r).unwrap();
            let first = m.nodes()[1] - m.nodes()[0];
            assert!(first < prev);
            prev = first;
        }
    }

    #[test]
    fn composite_mesh_hits_breakpoints_once() {
        let k = builtin_kernels("linear", 0.0, 1.0).unwrap();
        let m = build_composite_mesh(&k, &[0.0, 0.25, 1.0], 4, 2.0).unwrap();
        assert_eq!(m.nodes().len(), 9);
        assert_eq!(m.nodes()[4], 0.25);
        assert_eq!(m.nodes()[8], 1.0);
        // second segment is uniform
        assert!((m.nodes()[5] - 0.4375).abs() < 1e-15);
    }
}
