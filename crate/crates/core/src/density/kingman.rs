use rayon::prelude::*;
use serde::Serialize;

use super::exceptional::{above, assemble, check_horizon, default_eps_seq, lattice_orbit, validate_eps, ExceptionalSet};
use super::scan::{to_absolute, HeadWindow, Sampled, ScanConfig, TailWindow};
use super::{check_horizons, sample_times, summarize, DlimResult, DEFAULT_BAND_LIMIT};
use crate::cocycle::SubadditiveCocycle;
use crate::error::{Error, Result};
use crate::flow::{sample_mu, FiberPoint};
use crate::numeric::mean_and_sem;
use crate::timeset::{Interval, TimeSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KingmanOptions {
    pub scan: ScanConfig,
    pub eps: Vec<f64>,
    pub scale: f64,
    pub band_limit: f64,
    /// Sample size, seed and time grid for the space-mean curve; skipped when None.
    pub space_mean: Option<(usize, u64, Vec<f64>)>,
}

impl Default for KingmanOptions {
    fn default() -> Self {
        Self {
            scan: ScanConfig {
                coarse: 0.05,
                resolution: 1e-6,
            },
            eps: default_eps_seq(),
            scale: 1.0,
            band_limit: DEFAULT_BAND_LIMIT,
            space_mean: Some((400, 1, vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceMeanCurve {
    pub times: Vec<f64>,
    /// Sample mean of α(t, ·)/t.
    pub means: Vec<f64>,
    pub sems: Vec<f64>,
    /// Smallest mean on the grid.
    pub infimum: f64,
    /// Each step is nonincreasing up to three paired standard errors.
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KingmanResult {
    pub dlim: DlimResult,
    pub construction: ExceptionalSet,
    pub space_mean: Option<SpaceMeanCurve>,
}

/// dlim α(t, x)/t for a subadditive cocycle. Discards the windows where
/// α⁺({t}, T^⌊t⌋x) or α⁺(1 − {t}, Tᵗx) reaches ε·⌊t⌋.
pub fn kingman_dlim(
    s: &dyn SubadditiveCocycle,
    x: FiberPoint,
    horizons: &[f64],
    opts: &KingmanOptions,
) -> Result<KingmanResult> {
    check_horizons(horizons)?;
    validate_eps(&opts.eps)?;
    opts.scan.validate()?;
    if !(opts.scale > 0.0 && opts.scale <= 1.0) {
        return Err(Error::arg(format!("scale must lie in (0, 1] (got {})", opts.scale)));
    }
    let last = horizons[horizons.len() - 1];
    let h = check_horizon(last.ceil() + 1.0)?;
    let orbit = lattice_orbit(s.flow(), x, h)?;
    let windows = orbit
        .par_iter()
        .enumerate()
        .map(|(n, &z)| {
            let head = HeadWindow { c: s, z };
            let tail = TailWindow { c: s, z };
            let head = Sampled::new(&head, opts.scan)?;
            let tail = Sampled::new(&tail, opts.scan)?;
            opts.eps
                .iter()
                .map(|e| {
                    let thr = e * n as f64;
                    let mut ivs: Vec<Interval> = to_absolute(&above(&head, thr)?, n as f64).collect();
                    ivs.extend(to_absolute(&above(&tail, thr)?, n as f64));
                    Ok(ivs)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let construction = assemble(windows, &opts.eps, h, opts.scale)?;
    let (kept, times, excluded) = sample_times(horizons, &construction.set);
    if kept.is_empty() {
        return Err(Error::ExceptionalCoversHorizon { horizon: last });
    }
    let residuals: Vec<f64> = s.path(x, &times)?.iter().zip(&times).map(|(a, t)| a / t).collect();
    let dlim = summarize(kept, times, residuals, excluded, construction.set.clone(), opts.band_limit)?;
    let space_mean = match &opts.space_mean {
        Some((count, seed, grid)) => Some(space_mean_curve(s, *count, *seed, grid)?),
        None => None,
    };
    Ok(KingmanResult {
        dlim,
        construction,
        space_mean,
    })
}

/// (1/t)·mean α(t, ·) over μ-distributed points shared by all grid times.
pub fn space_mean_curve(s: &dyn SubadditiveCocycle, count: usize, seed: u64, times: &[f64]) -> Result<SpaceMeanCurve> {
    check_horizons(times)?;
    if count < 2 {
        return Err(Error::arg("space mean needs at least two sample points"));
    }
    let pts = sample_mu(s.flow(), seed, count)?;
    let rows = pts
        .par_iter()
        .map(|&p| {
            Ok(s.path(p, times)?
                .into_iter()
                .zip(times)
                .map(|(v, t)| v / t)
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let column = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let (mut means, mut sems) = (Vec::new(), Vec::new());
    for k in 0..times.len() {
        let (m, e) = mean_and_sem(&column(k));
        means.push(m);
        sems.push(e);
    }
    let decreasing = (1..times.len()).all(|k| {
        let diffs: Vec<f64> = rows.iter().map(|r| r[k] - r[k - 1]).collect();
        let (d, e) = mean_and_sem(&diffs);
        d <= 3.0 * e + 1e-12
    });
    Ok(SpaceMeanCurve {
        infimum: means.iter().copied().fold(f64::INFINITY, f64::min),
        times: times.to_vec(),
        means,
        sems,
        decreasing,
    })
}

impl KingmanResult {
    pub fn exceptional(&self) -> &TimeSet {
        &self.construction.set
    }
}
