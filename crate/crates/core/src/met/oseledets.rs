use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::spectrum::{group_exponents, Grouping};
use crate::cocycle::MatrixCocycle;
use crate::error::{Error, Result};
use crate::flow::FiberPoint;
use crate::linalg::{intersect_subspaces, orthonormal_basis, principal_angles, subspace_distance};
use crate::numeric::{final_third_start, median};

/// Angles below this between splitting pieces trigger a conditioning warning.
const MIN_SPLITTING_ANGLE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Filtration {
    pub grouping: Grouping,
    /// V₁ ⊇ V₂ ⊇ …, orthonormal columns.
    pub subspaces: Vec<DMatrix<f64>>,
    pub horizon: f64,
    pub warnings: Vec<String>,
}

fn group_starts(mult: &[usize]) -> Vec<usize> {
    mult.iter()
        .scan(0, |acc, &m| {
            let s = *acc;
            *acc += m;
            Some(s)
        })
        .collect()
}

/// Vᵢ = span of the right singular vectors of A(T, x) from group i on.
pub fn oseledets_filtration(a: &MatrixCocycle, x: FiberPoint, horizon: f64, tol: f64) -> Result<Filtration> {
    if !(horizon > 0.0) || !(tol > 0.0) {
        return Err(Error::arg("filtration needs T > 0 and a positive tolerance"));
    }
    let svd = a.graded(horizon, x)?.svd();
    let spectrum: Vec<f64> = svd.log_sv.iter().map(|l| l / horizon).collect();
    let grouping = group_exponents(&spectrum, tol);
    let m = a.dim();
    let subspaces: Vec<DMatrix<f64>> = group_starts(&grouping.multiplicities)
        .into_iter()
        .map(|s| svd.right.columns(s, m - s).into_owned())
        .collect();
    for w in subspaces.windows(2) {
        // Vᵢ₊₁ ⊂ Vᵢ: projecting onto Vᵢ changes nothing.
        let proj = &w[0] * (w[0].transpose() * &w[1]);
        if (proj - &w[1]).norm() > 1e-8 {
            return Err(Error::Renormalization("filtration is not nested".into()));
        }
    }
    let mut warnings = Vec::new();
    if grouping.degenerate {
        warnings.push(format!(
            "degenerate spectrum: a gap is below twice the grouping tolerance {:.3e}",
            grouping.tolerance
        ));
    }
    Ok(Filtration {
        grouping,
        subspaces,
        horizon,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub group: usize,
    pub exponent: f64,
    pub times: Vec<f64>,
    /// (1/t)·ln‖A(t, x)v‖ for the test vector v.
    pub rates: Vec<f64>,
    /// Median of the final third of the rates.
    pub estimate: f64,
    pub defect: f64,
}

/// A(t, x)v as a unit vector and ln‖A(t, x)v‖.
pub(super) fn push_forward(a: &MatrixCocycle, t: f64, x: FiberPoint, v: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = v.norm();
    let mut w = v / n;
    let mut log = n.ln();
    a.for_each_factor(t, x, |f| {
        w = f * &w;
        let n = w.norm();
        log += n.ln();
        w /= n;
        Ok(())
    })?;
    Ok((w, log))
}

/// A(T−t, Tᵗx)⁻¹u as a unit vector and its log-norm, applying the inverse
/// factors last-to-first.
pub(super) fn pull_back(
    a: &MatrixCocycle,
    t: f64,
    horizon: f64,
    x: FiberPoint,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let start = a.flow().evolve(x, t)?;
    let mut factors = Vec::new();
    a.for_each_factor(horizon - t, start, |f| {
        factors.push(f.clone());
        Ok(())
    })?;
    let n = u.norm();
    let mut w = u / n;
    let mut log = n.ln();
    for f in factors.iter().rev() {
        let lu = f.clone().lu();
        w = lu.solve(&w).ok_or_else(|| Error::Singular("factor has no inverse".into()))?;
        let n = w.norm();
        log += n.ln();
        w /= n;
    }
    Ok((w, log))
}

/// Growth rate of a vector in Vᵢ \ Vᵢ₊₁ along `times` (all ≤ T).
///
/// The top group is followed forward from v₁. Lower groups use
/// A(t, x)vₖ = σₖ·A(T−t, Tᵗx)⁻¹uₖ, which is stable for the lowest group and
/// in dimension two, where a forward walk would drift to the top exponent.
pub fn filtration_growth(
    a: &MatrixCocycle,
    x: FiberPoint,
    filtration: &Filtration,
    group: usize,
    times: &[f64],
) -> Result<GrowthCheck> {
    let horizon = filtration.horizon;
    let g = &filtration.grouping;
    if group >= g.exponents.len() {
        return Err(Error::arg(format!("group {group} out of range")));
    }
    if times.iter().any(|&t| !(t > 0.0 && t <= horizon)) {
        return Err(Error::arg("growth times must lie in (0, T]"));
    }
    let svd = a.graded(horizon, x)?.svd();
    let k = group_starts(&g.multiplicities)[group];
    let rates = if group == 0 {
        let v = svd.right.column(k).into_owned();
        times
            .iter()
            .map(|&t| Ok(push_forward(a, t, x, &v)?.1 / t))
            .collect::<Result<Vec<f64>>>()?
    } else {
        let u = svd.left.column(k).into_owned();
        let lsv = svd.log_sv[k];
        times
            .iter()
            .map(|&t| Ok((lsv + pull_back(a, t, horizon, x, &u)?.1) / t))
            .collect::<Result<Vec<f64>>>()?
    };
    let estimate = median(&rates[final_third_start(rates.len())..]).expect("nonempty");
    Ok(GrowthCheck {
        group,
        exponent: g.exponents[group],
        times: times.to_vec(),
        rates,
        estimate,
        defect: (estimate - g.exponents[group]).abs(),
    })
}

#[derive(Debug, Clone)]
pub struct Splitting {
    pub grouping: Grouping,
    /// Uᵢ, orthonormal columns, dim Uᵢ = multiplicity i.
    pub pieces: Vec<DMatrix<f64>>,
    /// Largest principal angle used when intersecting, per piece.
    pub intersection_angles: Vec<f64>,
    /// Smallest principal angle between distinct pieces.
    pub min_separation: f64,
    pub warnings: Vec<String>,
}

/// Uᵢ = Vᵢ⁺(x) ∩ V̂ᵢ⁻(x), the backward filtration taken from A(−T, x).
pub fn oseledets_splitting(a: &MatrixCocycle, x: FiberPoint, horizon: f64, tol: f64) -> Result<Splitting> {
    if !a.invertible_time() {
        return Err(Error::Unsupported(
            "the two-sided splitting needs an invertible base map".into(),
        ));
    }
    let forward = oseledets_filtration(a, x, horizon, tol)?;
    let back = a.graded(-horizon, x)?.svd();
    let m = a.dim();
    let mult = &forward.grouping.multiplicities;
    let mut pieces = Vec::new();
    let mut angles = Vec::new();
    let mut below = 0;
    for (i, &d) in mult.iter().enumerate() {
        below += d;
        // V̂ᵢ⁻: directions of A(−T, x) growing at rate ≤ −χᵢ, i.e. its last `below` columns.
        let hat = back.right.columns(m - below, below).into_owned();
        let (u, angle) = intersect_subspaces(&forward.subspaces[i], &hat, d);
        pieces.push(u);
        angles.push(angle);
    }
    let mut min_separation = std::f64::consts::FRAC_PI_2;
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            let first = principal_angles(&pieces[i], &pieces[j]).first().copied().unwrap_or(min_separation);
            min_separation = min_separation.min(first);
        }
    }
    let mut warnings = forward.warnings.clone();
    if min_separation < MIN_SPLITTING_ANGLE || angles.iter().any(|a| *a > MIN_SPLITTING_ANGLE) {
        warnings.push(format!(
            "near-parallel intersection: separation {min_separation:.2e}, worst intersection angle {:.2e}",
            angles.iter().copied().fold(0.0, f64::max)
        ));
    }
    Ok(Splitting {
        grouping: forward.grouping,
        pieces,
        intersection_angles: angles,
        min_separation,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivarianceCheck {
    pub times: Vec<f64>,
    /// max over i of the largest principal angle between A(t, x)Uᵢ(x) and Uᵢ(Tᵗx).
    pub defects: Vec<f64>,
}

pub fn splitting_equivariance(
    a: &MatrixCocycle,
    x: FiberPoint,
    horizon: f64,
    tol: f64,
    times: &[f64],
) -> Result<EquivarianceCheck> {
    let here = oseledets_splitting(a, x, horizon, tol)?;
    let mut defects = Vec::with_capacity(times.len());
    for &t in times {
        let there = oseledets_splitting(a, a.flow().evolve(x, t)?, horizon, tol)?;
        if there.pieces.len() != here.pieces.len() {
            defects.push(f64::INFINITY);
            continue;
        }
        let g = a.graded(t, x)?;
        let at = g
            .to_matrix()
            .ok_or_else(|| Error::SpectrumRange { partial: g.log_singular_values() })?;
        let worst = here
            .pieces
            .iter()
            .zip(&there.pieces)
            .map(|(u, v)| subspace_distance(&orthonormal_basis(&(&at * u)), v))
            .fold(0.0, f64::max);
        defects.push(worst);
    }
    Ok(EquivarianceCheck {
        times: times.to_vec(),
        defects,
    })
}
