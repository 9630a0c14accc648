use nalgebra::DMatrix;
use serde::Serialize;

use crate::cocycle::MatrixCocycle;
use crate::error::{Error, Result};
use crate::flow::FiberPoint;
use crate::linalg::{symmetrize, LogSvd};
use crate::numeric::{final_third_start, log_grid, median};

/// Λ = (AᵀA)^{1/(2T)} for A = A(T, x), with the SVD it came from.
#[derive(Debug, Clone)]
pub struct LambdaEstimate {
    pub horizon: f64,
    pub matrix: DMatrix<f64>,
    /// ln σᵢ(A(T, x))/T, descending; these are the ln-eigenvalues of Λ.
    pub log_eigen: Vec<f64>,
    pub svd: LogSvd,
}

pub fn lambda_matrix(a: &MatrixCocycle, x: FiberPoint, horizon: f64) -> Result<LambdaEstimate> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::arg(format!("lambda_matrix needs finite T > 0 (got {horizon})")));
    }
    let svd = a.graded(horizon, x)?.svd();
    let log_eigen: Vec<f64> = svd.log_sv.iter().map(|l| l / horizon).collect();
    if log_eigen.iter().any(|l| !l.is_finite() || l.abs() > 700.0) {
        return Err(Error::SpectrumRange { partial: log_eigen });
    }
    let v = &svd.right;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        log_eigen.len(),
        log_eigen.iter().map(|l| l.exp()),
    ));
    let matrix = symmetrize(&(v * d * v.transpose()));
    Ok(LambdaEstimate {
        horizon,
        matrix,
        log_eigen,
        svd,
    })
}

/// Default multiplicity tolerance 5/√T.
pub fn default_group_tolerance(horizon: f64) -> f64 {
    5.0 / horizon.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grouping {
    /// Group means, descending.
    pub exponents: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub tolerance: f64,
    /// Some gap between groups is below twice the tolerance.
    pub degenerate: bool,
}

/// Merges sorted-descending values whose consecutive gaps are within `tol`.
pub fn group_exponents(spectrum: &[f64], tol: f64) -> Grouping {
    let mut exponents = Vec::new();
    let mut multiplicities = Vec::new();
    let mut gaps = Vec::new();
    let mut start = 0;
    for i in 1..=spectrum.len() {
        if i == spectrum.len() || spectrum[i - 1] - spectrum[i] > tol {
            let group = &spectrum[start..i];
            exponents.push(group.iter().sum::<f64>() / group.len() as f64);
            multiplicities.push(group.len());
            if i < spectrum.len() {
                gaps.push(spectrum[i - 1] - spectrum[i]);
            }
            start = i;
        }
    }
    Grouping {
        exponents,
        multiplicities,
        tolerance: tol,
        degenerate: gaps.iter().any(|g| *g < 2.0 * tol),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QrOptions {
    pub step: f64,
    /// Fold into a QR factorization at least this often (in steps).
    pub fold_every: usize,
    /// Fold when a column norm leaves [e^−l, e^l].
    pub log_threshold: f64,
    /// Number of checkpoints for the running-estimate band.
    pub checkpoints: usize,
}

impl Default for QrOptions {
    fn default() -> Self {
        Self {
            step: 1.0,
            fold_every: 50,
            log_threshold: 4.0,
            checkpoints: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QrSpectrum {
    pub horizon: f64,
    /// Time-averaged ln|Rᵢᵢ|, sorted descending.
    pub spectrum: Vec<f64>,
    /// Checkpoint times and the running spectrum at each.
    pub checkpoint_times: Vec<f64>,
    pub running: Vec<Vec<f64>>,
    /// Per exponent: largest deviation of the final-third running values from their median.
    pub band: Vec<f64>,
    pub folds: u64,
}

/// Discrete QR iteration over the increments A(step, T^{k·step}x).
pub fn lyapunov_spectrum_qr(a: &MatrixCocycle, x: FiberPoint, horizon: f64, opts: QrOptions) -> Result<QrSpectrum> {
    if !(opts.step > 0.0) || !(horizon >= opts.step) || !horizon.is_finite() {
        return Err(Error::arg(format!(
            "QR spectrum needs 0 < step <= T (got step {}, T {horizon})",
            opts.step
        )));
    }
    if opts.fold_every == 0 || !(opts.log_threshold > 0.0) {
        return Err(Error::arg("fold cadence and threshold must be positive"));
    }
    let m = a.dim();
    let steps = (horizon / opts.step).ceil() as u64;
    let mut marks: Vec<u64> = log_grid((steps as f64 / 100.0).max(1.0), steps as f64, opts.checkpoints.max(1))
        .into_iter()
        .map(|s| s.round() as u64)
        .collect();
    marks.dedup();

    let mut p = DMatrix::<f64>::identity(m, m);
    let mut sums = vec![0.0f64; m];
    let mut since_fold = 0usize;
    let mut folds = 0u64;
    let mut point = x;
    let mut elapsed = 0.0f64;
    let mut next_mark = 0usize;
    let mut checkpoint_times = Vec::new();
    let mut running = Vec::new();

    let fold = |p: &mut DMatrix<f64>, sums: &mut [f64]| -> Result<()> {
        let qr = p.clone().qr();
        let r = qr.r();
        for i in 0..m {
            let d = r[(i, i)].abs();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Renormalization(format!("R diagonal entry {i} is {d}")));
            }
            sums[i] += d.ln();
        }
        // Column signs of Q do not matter for the recursion.
        *p = qr.q();
        Ok(())
    };

    for k in 1..=steps {
        let dt = if k == steps { horizon - elapsed } else { opts.step };
        a.for_each_factor(dt, point, |f| {
            p = f * &p;
            Ok(())
        })?;
        point = a.flow().evolve(point, dt)?;
        elapsed = if k == steps { horizon } else { elapsed + dt };
        since_fold += 1;
        let at_mark = next_mark < marks.len() && marks[next_mark] == k;
        let out_of_range = p.column_iter().any(|c| {
            let l = c.norm().ln();
            !(l.abs() <= opts.log_threshold)
        });
        if at_mark || out_of_range || since_fold >= opts.fold_every || k == steps {
            fold(&mut p, &mut sums)?;
            folds += 1;
            since_fold = 0;
        }
        if at_mark {
            checkpoint_times.push(elapsed);
            let mut current: Vec<f64> = sums.iter().map(|s| s / elapsed).collect();
            current.sort_by(|a, b| b.total_cmp(a));
            running.push(current);
            next_mark += 1;
        }
    }
    let mut spectrum: Vec<f64> = sums.iter().map(|s| s / horizon).collect();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    let tail = &running[final_third_start(running.len())..];
    let band = (0..m)
        .map(|i| {
            let vals: Vec<f64> = tail.iter().map(|r| r[i]).collect();
            let med = median(&vals).unwrap_or(spectrum[i]);
            vals.iter().map(|v| (v - med).abs()).fold(0.0, f64::max)
        })
        .collect();
    Ok(QrSpectrum {
        horizon,
        spectrum,
        checkpoint_times,
        running,
        band,
        folds,
    })
}
