//! Additive, subadditive and matrix cocycles over a suspension flow.
//!
//! An additive cocycle satisfies α(t+s, x) = α(t, x) + α(s, Tᵗx); a matrix
//! cocycle satisfies A(t+s, x) = A(s, Tᵗx)·A(t, x).

mod additive;
mod matrix;
mod subadditive;

pub use additive::{
    example2_cocycle, example2_sup_integral, example2_unit_sup, Coboundary, FiberCocycle, FiberData,
    IntegralCocycle, Observable, Potential, SupIntegralEstimate,
};
pub use matrix::{matrix_identity_defect, MatrixCocycle, MAX_CONDITION};
pub use subadditive::{AdditiveAsSubadditive, LogNormCocycle, OrbitDisplacement, SubadditiveCocycle};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flow::{FiberPoint, SuspensionFlow};
use crate::numeric::KahanSum;

pub trait AdditiveCocycle: Send + Sync {
    fn flow(&self) -> &SuspensionFlow;

    fn name(&self) -> String;

    /// ∫ α(1, ·) dμ / μ(X) when it is available in closed form or by quadrature.
    fn known_space_average(&self) -> Option<Result<f64>> {
        None
    }

    /// α(t, x) for t ≥ 0.
    fn eval_forward(&self, t: f64, x: FiberPoint) -> Result<f64>;

    /// α(t, x) for any real t. Negative times use α(−s, x) = −α(s, T^(−s)x)
    /// and need an invertible base.
    fn eval(&self, t: f64, x: FiberPoint) -> Result<f64> {
        if t >= 0.0 {
            self.eval_forward(t, x)
        } else {
            let back = self.flow().evolve(x, t)?;
            Ok(-self.eval_forward(-t, back)?)
        }
    }

    /// Times in (0, t] where s ↦ α(s, x) may jump or blow up.
    fn critical_times(&self, x: FiberPoint, t: f64) -> Result<Vec<f64>> {
        self.flow().crossing_times(x, t)
    }

    /// α(tₖ, x) along nondecreasing times, built from increments.
    fn path(&self, x: FiberPoint, times: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(times.len());
        let mut acc = KahanSum::new();
        let mut prev = 0.0;
        let mut point = x;
        for &t in times {
            if !(t >= prev) || !t.is_finite() {
                return Err(Error::arg("path times must be finite, nonnegative and nondecreasing"));
            }
            let dt = t - prev;
            if dt > 0.0 {
                acc.add(self.eval_forward(dt, point)?);
                point = self.flow().evolve(point, dt)?;
            }
            out.push(acc.total());
            prev = t;
        }
        Ok(out)
    }
}

/// α(t, x) = c·t.
#[derive(Debug, Clone)]
pub struct ConstantRate {
    flow: SuspensionFlow,
    rate: f64,
}

impl ConstantRate {
    pub fn new(flow: SuspensionFlow, rate: f64) -> Self {
        Self { flow, rate }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl AdditiveCocycle for ConstantRate {
    fn flow(&self) -> &SuspensionFlow {
        &self.flow
    }

    fn name(&self) -> String {
        format!("constant rate {}", self.rate)
    }

    fn known_space_average(&self) -> Option<Result<f64>> {
        Some(Ok(self.rate))
    }

    fn eval_forward(&self, t: f64, _x: FiberPoint) -> Result<f64> {
        Ok(self.rate * t)
    }

    fn eval(&self, t: f64, _x: FiberPoint) -> Result<f64> {
        Ok(self.rate * t)
    }

    fn critical_times(&self, _x: FiberPoint, _t: f64) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    fn path(&self, _x: FiberPoint, times: &[f64]) -> Result<Vec<f64>> {
        Ok(times.iter().map(|t| self.rate * t).collect())
    }
}

/// |α(t+s, x) − α(t, x) − α(s, Tᵗx)|.
pub fn identity_defect(c: &dyn AdditiveCocycle, t: f64, s: f64, x: FiberPoint) -> Result<f64> {
    let xt = c.flow().evolve(x, t)?;
    Ok((c.eval(t + s, x)? - c.eval(t, x)? - c.eval(s, xt)?).abs())
}

/// Evaluation trace as CSV rows `t,y,tau,value` for the start point x.
pub fn trace_csv(c: &dyn AdditiveCocycle, x: FiberPoint, times: &[f64]) -> Result<String> {
    let values = c.path(x, times)?;
    let mut out = String::from("t,y,tau,value\n");
    for (t, v) in times.iter().zip(values) {
        writeln!(out, "{t},{},{},{v}", x.y, x.tau).expect("writing to a String");
    }
    Ok(out)
}
