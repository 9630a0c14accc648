//! The symmetric space GL(m, ℝ)/O(m) as positive-definite matrices, with
//! g·P = gPgᵀ and the affine-invariant metric.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cocycle::{MatrixCocycle, OrbitDisplacement};
use crate::density::{kingman_dlim, KingmanOptions};
use crate::error::{Error, Result};
use crate::flow::FiberPoint;
use crate::linalg::{symmetric_apply, symmetrize, GradedProduct};
use crate::numeric::{final_third_start, median};

use super::oseledets::{pull_back, push_forward};
use super::spectrum::LambdaEstimate;

/// Largest exponent magnitude per pushed factor when applying exp(sL).
const CHUNK_LOG: f64 = 16.0;
/// θ at or below this counts as no drift.
pub const DRIFT_FREE_THETA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSpacePoint {
    p: DMatrix<f64>,
}

impl SymmetricSpacePoint {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return Err(Error::NotPositiveDefinite("matrix is not square".into()));
        }
        let asym = (&p - p.transpose()).amax();
        if !(asym < 1e-10) {
            return Err(Error::NotPositiveDefinite(format!("asymmetry {asym:.2e}")));
        }
        let min = p.clone().symmetric_eigen().eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {min:.3e}")));
        }
        Ok(Self { p: symmetrize(&p) })
    }

    /// The base point p = I.
    pub fn identity(m: usize) -> Self {
        Self { p: DMatrix::identity(m, m) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// g·P = gPgᵀ.
    pub fn act(&self, g: &DMatrix<f64>) -> Result<Self> {
        Self::new(symmetrize(&(g * &self.p * g.transpose())))
    }
}

/// ρ(P, Q) = ‖log(P^{−1/2} Q P^{−1/2})‖_F.
pub fn symspace_distance(p: &SymmetricSpacePoint, q: &SymmetricSpacePoint) -> Result<f64> {
    if p.p.nrows() != q.p.nrows() {
        return Err(Error::arg("points live in spaces of different dimension"));
    }
    let w = symmetric_apply(&p.p, |l| l.powf(-0.5));
    let m = symmetrize(&(&w * &q.p * &w));
    let eig = m.symmetric_eigen().eigenvalues;
    if eig.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::NotPositiveDefinite("P^{-1/2}QP^{-1/2} lost positivity".into()));
    }
    Ok(eig.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

/// Pushes exp(s·L), L symmetric, as chunks whose entries stay below e^16.
fn push_exp(g: &mut GradedProduct, l: &DMatrix<f64>, s: f64) -> Result<()> {
    let eig = l.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax() * s.abs();
    if top == 0.0 {
        return Ok(());
    }
    let pieces = (top / CHUNK_LOG).ceil().max(1.0) as u64;
    let step = s / pieces as f64;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| (v * step).exp()));
    let f = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    for _ in 0..pieces {
        g.push(&f)?;
    }
    Ok(())
}

/// ln σ of A(t, x)·exp(s·L).
fn log_sv_twisted(a: &MatrixCocycle, x: FiberPoint, t: f64, l: &DMatrix<f64>, s: f64) -> Result<Vec<f64>> {
    let mut g = GradedProduct::identity(a.dim());
    push_exp(&mut g, l, s)?;
    a.push_into(&mut g, t, x)?;
    Ok(g.log_singular_values())
}

fn log_of(lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    SymmetricSpacePoint::new(lambda.clone())?;
    Ok(symmetric_apply(lambda, f64::ln))
}

/// ln σ of A(t, x)·exp(−c·t·log Λ) for Λ estimated from A(T, x), t ≤ T.
///
/// Multiplying out the product directly loses the slow directions once
/// 2χt exceeds ln(1/ε). Instead each column A(t, x)vⱼ is built in the right
/// singular basis of A(T, x): either by walking vⱼ forward, or as
/// σⱼ·A(T−t, Tᵗx)⁻¹uⱼ, whichever amplifies rounding less.
fn twisted_log_sv(a: &MatrixCocycle, x: FiberPoint, est: &LambdaEstimate, t: f64, c: f64) -> Result<Vec<f64>> {
    if !(t > 0.0 && t <= est.horizon) {
        return Err(Error::arg(format!(
            "times must lie in (0, {}] for a Λ estimated at that horizon",
            est.horizon
        )));
    }
    let m = a.dim();
    let ell = &est.log_eigen;
    let mut cols = DMatrix::zeros(m, m);
    let mut logs = Vec::with_capacity(m);
    for j in 0..m {
        let forward_gain = (ell[0] - ell[j]) * t;
        let backward_gain = (ell[j] - ell[m - 1]) * (est.horizon - t);
        let (w, log) = if forward_gain <= backward_gain {
            push_forward(a, t, x, &est.svd.right.column(j).into_owned())?
        } else {
            let (w, log) = pull_back(a, t, est.horizon, x, &est.svd.left.column(j).into_owned())?;
            (w, log + est.svd.log_sv[j])
        };
        cols.set_column(j, &w);
        logs.push(log - c * t * ell[j]);
    }
    let mut g = GradedProduct::identity(m);
    push_exp(&mut g, &DMatrix::from_diagonal(&DVector::from_vec(logs)), 1.0)?;
    g.push(&cols)?;
    Ok(g.log_singular_values())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityCurve {
    pub times: Vec<f64>,
    /// (1/t)·ln‖A(t, x)Λ^{−t}‖.
    pub forward: Vec<f64>,
    /// (1/t)·ln‖(A(t, x)Λ^{−t})⁻¹‖.
    pub inverse: Vec<f64>,
    /// max of the two per time.
    pub defect: Vec<f64>,
    /// Median of the final third of `defect`.
    pub headline: f64,
}

fn curve(times: &[f64], mut log_sv: impl FnMut(f64) -> Result<Vec<f64>>) -> Result<RegularityCurve> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::arg("regularity times must be positive"));
    }
    let (mut forward, mut inverse, mut defect) = (Vec::new(), Vec::new(), Vec::new());
    for &t in times {
        let l = log_sv(t)?;
        let up = l[0] / t;
        let down = -l[l.len() - 1] / t;
        forward.push(up);
        inverse.push(down);
        defect.push(up.max(down));
    }
    let headline = median(&defect[final_third_start(defect.len())..]).expect("nonempty");
    Ok(RegularityCurve {
        times: times.to_vec(),
        forward,
        inverse,
        defect,
        headline,
    })
}

/// Kaimanovich defect of A(t, x) against the Λ estimated along the same
/// orbit; all times must be at most the estimation horizon.
pub fn regularity_defect(
    a: &MatrixCocycle,
    x: FiberPoint,
    lambda: &LambdaEstimate,
    times: &[f64],
) -> Result<RegularityCurve> {
    curve(times, |t| twisted_log_sv(a, x, lambda, t, 1.0))
}

/// Kaimanovich defect against an arbitrary positive-definite candidate Λ,
/// multiplied out directly. Accurate only while ln(1/ε) dominates the
/// spread of exponents times t.
pub fn candidate_regularity_defect(
    a: &MatrixCocycle,
    x: FiberPoint,
    lambda: &DMatrix<f64>,
    times: &[f64],
) -> Result<RegularityCurve> {
    let log_lambda = log_of(lambda)?;
    curve(times, |t| log_sv_twisted(a, x, t, &log_lambda, -t))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingReport {
    /// Drift θ = dlim ρ(A(t, x)p, p)/t.
    pub theta: f64,
    pub theta_band: f64,
    pub drift_free: bool,
    /// Unit direction D of the geodesic, row-major; γ(s) = exp(−s·D).
    pub direction: Vec<Vec<f64>>,
    pub horizons: Vec<f64>,
    /// ρ(orbit(t), γ(θt))/t.
    pub defects: Vec<f64>,
    pub note: Option<String>,
}

/// Karlsson–Margulis check along the inverse-cocycle orbit
/// t ↦ A(t, x)⁻¹·p = (AᵀA)⁻¹, against the unit-speed geodesic from p in the
/// direction of −log Λ, with Λ taken at the largest horizon.
pub fn geodesic_tracking(
    a: &MatrixCocycle,
    x: FiberPoint,
    horizons: &[f64],
    kingman: &KingmanOptions,
) -> Result<TrackingReport> {
    crate::density::check_horizons(horizons)?;
    let horizon = horizons[horizons.len() - 1];
    let grid = crate::density::horizons_up_to((horizon / 64.0).max(1.0), horizon);
    let k = kingman_dlim(&OrbitDisplacement::new(a.clone()), x, &grid, kingman)?;
    let theta = k.dlim.beta;
    let lambda = super::lambda_matrix(a, x, horizon)?;
    let log_lambda = log_of(&lambda.matrix)?;
    let norm = log_lambda.norm();
    if !(theta > DRIFT_FREE_THETA) || norm == 0.0 {
        return Ok(TrackingReport {
            theta,
            theta_band: k.dlim.band,
            drift_free: true,
            direction: Vec::new(),
            horizons: horizons.to_vec(),
            defects: Vec::new(),
            note: Some("drift-free orbit, no geodesic".into()),
        });
    }
    let d = &log_lambda / norm;
    // ρ((AᵀA)⁻¹, exp(−θtD)) = 2‖ln σ(A·exp(−(θt/2)D))‖₂ and (θ/2)D = c·log Λ.
    let c = 0.5 * theta / norm;
    let defects = horizons
        .iter()
        .map(|&t| Ok(2.0 * DVector::from_vec(twisted_log_sv(a, x, &lambda, t, c)?).norm() / t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(TrackingReport {
        theta,
        theta_band: k.dlim.band,
        drift_free: false,
        direction: super::rows(&d),
        horizons: horizons.to_vec(),
        defects,
        note: None,
    })
}
