use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::GradedMesh;

/// Grid samples stored in weighted representation: v_j = w_j^mu * u(t_j) with
/// w_j = psi(t_j) - psi(a).
///
/// Solutions of the weighted space carry mu = 1 - gamma, which cancels the
/// w^(gamma-1) endpoint singularity; every stored number is finite. mu = 0 is
/// the plain (continuous) representation.
#[derive(Debug, Clone)]
pub struct WeightedGridFunction {
    mesh: Arc<GradedMesh>,
    weight_exponent: f64,
    values: Vec<f64>,
}

impl WeightedGridFunction {
    pub fn new(mesh: Arc<GradedMesh>, weight_exponent: f64, values: Vec<f64>) -> Result<Self> {
        if !(0.0..1.0).contains(&weight_exponent) {
            return Err(Error::WeightTooSingular(weight_exponent));
        }
        if values.len() != mesh.nodes().len() {
            return Err(Error::InvalidParameter(format!(
                "grid function has {} values for {} nodes",
                values.len(),
                mesh.nodes().len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid function contains non-finite value {bad}"
            )));
        }
        Ok(Self {
            mesh,
            weight_exponent,
            values,
        })
    }

    pub fn constant(mesh: Arc<GradedMesh>, weight_exponent: f64, c: f64) -> Result<Self> {
        let n = mesh.nodes().len();
        Self::new(mesh, weight_exponent, vec![c; n])
    }

    /// Samples the weighted values v_j = g(t_j, w_j); the closure receives the
    /// node time and scale distance and returns the already-weighted value.
    pub fn sample_weighted(
        mesh: Arc<GradedMesh>,
        weight_exponent: f64,
        g: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let values = mesh
            .nodes()
            .iter()
            .enumerate()
            .map(|(j, &t)| g(t, mesh.w(j)))
            .collect();
        Self::new(mesh, weight_exponent, values)
    }

    pub fn mesh(&self) -> &GradedMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<GradedMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn weight_exponent(&self) -> f64 {
        self.weight_exponent
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Unweighted value u(t_j) = v_j * w_j^(-mu). `None` at nodes where the
    /// unweighted value is not recoverable (w_j = 0 with mu > 0: the function
    /// may be unbounded there and is never materialized unweighted).
    pub fn unweighted_at(&self, j: usize) -> Option<f64> {
        let w = self.mesh.w(j);
        if self.weight_exponent == 0.0 {
            Some(self.values[j])
        } else if w > 0.0 {
            Some(self.values[j] * w.powf(-self.weight_exponent))
        } else {
            None
        }
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.weight_exponent == other.weight_exponent && self.mesh.same_grid(&other.mesh)
    }

    /// Pointwise a*self + b*other.
    pub fn linear_combination(&self, a: f64, b: f64, other: &Self) -> Result<Self> {
        if !self.same_layout(other) {
            return Err(Error::MeshMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.mesh_arc(), self.weight_exponent, values)
    }

    /// The same function stored at a different weight exponent: nodewise
    /// exact away from t_0 (v'_j = v_j * w_j^(new_mu - mu)). Slot 0 becomes
    /// a 0.0 placeholder when the exponent actually changes, since the
    /// origin value is not representable across exponents.
    ///
    /// Choosing the exponent so the stored values are locally linear in w
    /// near the origin (exponent 1 - theta for a leading power w^theta) is
    /// what keeps the product quadrature accurate on the first panels.
    pub fn repacked(&self, new_mu: f64) -> Result<Self> {
        if new_mu == self.weight_exponent {
            return Ok(self.clone());
        }
        let shift = new_mu - self.weight_exponent;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if j == 0 {
                    0.0
                } else {
                    v * self.mesh.w(j).powf(shift)
                }
            })
            .collect();
        Self::new(self.mesh_arc(), new_mu, values)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if !self.same_layout(other) {
            return Err(Error::MeshMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
    }
}

/// Discrete weighted sup norm max_j |v_j| — the metric behind every stopping
/// test and error report.
pub fn weighted_sup_norm(f: &WeightedGridFunction) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}
