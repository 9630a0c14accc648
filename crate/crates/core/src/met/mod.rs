//! Lyapunov spectra, Oseledets subspaces, regularity and geodesic tracking
//! for matrix cocycles.

mod geometry;
mod oseledets;
mod spectrum;

pub use geometry::{
    candidate_regularity_defect, geodesic_tracking, regularity_defect, symspace_distance, RegularityCurve, SymmetricSpacePoint, TrackingReport,
    DRIFT_FREE_THETA,
};
pub use oseledets::{
    filtration_growth, oseledets_filtration, oseledets_splitting, splitting_equivariance, EquivarianceCheck,
    Filtration, GrowthCheck, Splitting,
};
pub use spectrum::{
    default_group_tolerance, group_exponents, lambda_matrix, lyapunov_spectrum_qr, Grouping, LambdaEstimate,
    QrOptions, QrSpectrum,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cocycle::MatrixCocycle;
use crate::error::Result;
use crate::flow::FiberPoint;

/// Row-major nested vectors, for JSON output.
pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Row-major CSV of a matrix.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    rows(m)
        .iter()
        .map(|r| r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub horizon: f64,
    /// Distinct exponents χ₁ > … > χ_k.
    pub exponents: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// QR spectrum with multiplicity, descending.
    pub spectrum: Vec<f64>,
    /// Per-exponent spread of the running QR estimates.
    pub band: Vec<f64>,
    /// ln σᵢ(A(T, x))/T, descending.
    pub svd_spectrum: Vec<f64>,
    pub lambda_matrix: Vec<Vec<f64>>,
    pub group_tolerance: f64,
    /// Vᵢ as column bases, row-major.
    pub filtration: Vec<Vec<Vec<f64>>>,
    /// Uᵢ when the base map is invertible.
    pub splitting: Option<Vec<Vec<Vec<f64>>>>,
    /// (1/T)·ln|det A(T, x)|.
    pub log_det_rate: f64,
    pub warnings: Vec<String>,
}

/// Spectrum, Λ, filtration and (for invertible bases) splitting at horizon T.
pub fn lyapunov_report(a: &MatrixCocycle, x: FiberPoint, horizon: f64, qr: QrOptions) -> Result<LyapunovReport> {
    let tol = default_group_tolerance(horizon);
    let q = lyapunov_spectrum_qr(a, x, horizon, qr)?;
    let grouping = group_exponents(&q.spectrum, tol);
    let lambda = lambda_matrix(a, x, horizon)?;
    let filtration = oseledets_filtration(a, x, horizon, tol)?;
    let mut warnings = filtration.warnings.clone();
    if filtration.grouping.multiplicities != grouping.multiplicities {
        warnings.push(format!(
            "QR grouping {:?} differs from SVD grouping {:?}",
            grouping.multiplicities, filtration.grouping.multiplicities
        ));
    }
    let splitting = if a.invertible_time() {
        let s = oseledets_splitting(a, x, horizon, tol)?;
        warnings.extend(s.warnings.iter().filter(|w| !warnings.contains(w)).cloned().collect::<Vec<_>>());
        Some(s.pieces.iter().map(rows).collect())
    } else {
        None
    };
    Ok(LyapunovReport {
        horizon,
        exponents: grouping.exponents,
        multiplicities: grouping.multiplicities,
        spectrum: q.spectrum,
        band: q.band,
        svd_spectrum: lambda.log_eigen.clone(),
        lambda_matrix: rows(&lambda.matrix),
        group_tolerance: tol,
        filtration: filtration.subspaces.iter().map(rows).collect(),
        splitting,
        log_det_rate: a.log_abs_det(horizon, x)? / horizon,
        warnings,
    })
}
