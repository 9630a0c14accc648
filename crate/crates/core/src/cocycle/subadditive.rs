use std::sync::Arc;

use super::{AdditiveCocycle, MatrixCocycle};
use crate::error::Result;
use crate::flow::{FiberPoint, SuspensionFlow};

/// α(t+s, x) ≤ α(t, x) + α(s, Tᵗx), with values in ℝ ∪ {−∞}.
pub trait SubadditiveCocycle: Send + Sync {
    fn flow(&self) -> &SuspensionFlow;

    fn name(&self) -> String;

    /// α(t, x) for t ≥ 0.
    fn eval_forward(&self, t: f64, x: FiberPoint) -> Result<f64>;

    /// Times in (0, t] where s ↦ α(s, x) may jump.
    fn critical_times(&self, x: FiberPoint, t: f64) -> Result<Vec<f64>> {
        self.flow().crossing_times(x, t)
    }

    /// α(tₖ, x) along nondecreasing times.
    fn path(&self, x: FiberPoint, times: &[f64]) -> Result<Vec<f64>> {
        times.iter().map(|&t| self.eval_forward(t, x)).collect()
    }
}

/// α(t, x) = ln‖A(t, x)‖ in the spectral norm.
#[derive(Debug, Clone)]
pub struct LogNormCocycle {
    a: MatrixCocycle,
}

impl LogNormCocycle {
    pub fn new(a: MatrixCocycle) -> Self {
        Self { a }
    }

    pub fn matrix(&self) -> &MatrixCocycle {
        &self.a
    }
}

impl SubadditiveCocycle for LogNormCocycle {
    fn flow(&self) -> &SuspensionFlow {
        self.a.flow()
    }

    fn name(&self) -> String {
        format!("ln‖A‖ of {}", self.a.name())
    }

    fn eval_forward(&self, t: f64, x: FiberPoint) -> Result<f64> {
        Ok(self.a.graded(t, x)?.log_norm())
    }

    fn path(&self, x: FiberPoint, times: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(times.len());
        self.a.product_path(x, times, |_, g| {
            out.push(g.log_norm());
            Ok(())
        })?;
        Ok(out)
    }
}

/// Distance from the base point p = I to A(t, x)·p in GL(m)/O(m) with the
/// affine-invariant metric: 2‖ln σ(A(t, x))‖₂.
#[derive(Debug, Clone)]
pub struct OrbitDisplacement {
    a: MatrixCocycle,
}

impl OrbitDisplacement {
    pub fn new(a: MatrixCocycle) -> Self {
        Self { a }
    }
}

fn displacement(log_sv: &[f64]) -> f64 {
    2.0 * log_sv.iter().map(|l| l * l).sum::<f64>().sqrt()
}

impl SubadditiveCocycle for OrbitDisplacement {
    fn flow(&self) -> &SuspensionFlow {
        self.a.flow()
    }

    fn name(&self) -> String {
        format!("orbit displacement of {}", self.a.name())
    }

    fn eval_forward(&self, t: f64, x: FiberPoint) -> Result<f64> {
        Ok(displacement(&self.a.graded(t, x)?.log_singular_values()))
    }

    fn path(&self, x: FiberPoint, times: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(times.len());
        self.a.product_path(x, times, |_, g| {
            out.push(displacement(&g.log_singular_values()));
            Ok(())
        })?;
        Ok(out)
    }
}

/// An additive cocycle viewed as a subadditive one (the equality case).
#[derive(Clone)]
pub struct AdditiveAsSubadditive(pub Arc<dyn AdditiveCocycle>);

impl SubadditiveCocycle for AdditiveAsSubadditive {
    fn flow(&self) -> &SuspensionFlow {
        self.0.flow()
    }

    fn name(&self) -> String {
        self.0.name()
    }

    fn eval_forward(&self, t: f64, x: FiberPoint) -> Result<f64> {
        self.0.eval_forward(t, x)
    }

    fn critical_times(&self, x: FiberPoint, t: f64) -> Result<Vec<f64>> {
        self.0.critical_times(x, t)
    }

    fn path(&self, x: FiberPoint, times: &[f64]) -> Result<Vec<f64>> {
        self.0.path(x, times)
    }
}
