//! Limits in density of α(t, x)/t.
//!
//! Every estimator samples α(t, x)/t at a grid of horizons, skips times that
//! fall in a discarded set τ(x) of finite measure, and reports the median of
//! the final third of the samples together with a spread band.

mod atkinson;
mod exceptional;
mod kingman;
mod scan;

pub use atkinson::{atkinson_measure, AtkinsonReport};
pub use exceptional::{
    default_eps_seq, delta_set, fit_growth, phi_exceptional_set, theorem1_exceptional_set, ExceptionalSet,
    GrowthCurve, GrowthFit, LevelReport, PhiFunction, PhiKind, PhiVariant, Theorem1Options, DEFAULT_LEVELS,
};
pub use kingman::{kingman_dlim, space_mean_curve, KingmanOptions, KingmanResult, SpaceMeanCurve};
pub use scan::ScanConfig;

use serde::Serialize;

use crate::cocycle::AdditiveCocycle;
use crate::error::{Error, Result};
use crate::flow::FiberPoint;
use crate::numeric::{final_third_start, interquartile_range, mean_and_sem, median, ratio_grid, KahanSum};
use crate::timeset::TimeSet;

pub const DEFAULT_BAND_LIMIT: f64 = 1e-2;

/// {10², 2·10², 4·10², …} up to 10⁴, with 10⁴ itself appended.
pub fn default_horizons() -> Vec<f64> {
    horizons_up_to(100.0, 1e4)
}

/// Doubling grid from `start` with `end` appended when it is not on the grid.
pub fn horizons_up_to(start: f64, end: f64) -> Vec<f64> {
    let mut h = ratio_grid(start, end, 2.0);
    if h.last().is_none_or(|&l| l < end * (1.0 - 1e-12)) {
        h.push(end);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlimResult {
    pub beta: f64,
    /// max(IQR, largest deviation from β) over the final third of samples.
    pub band: f64,
    pub band_limit: f64,
    pub converged: bool,
    pub exceptional: TimeSet,
    pub exceptional_measure: f64,
    /// Horizons that produced a sample.
    pub horizons: Vec<f64>,
    /// Sample time used for each horizon (moved past τ when the horizon is in it).
    pub sample_times: Vec<f64>,
    /// α(t, x)/t at the sample times.
    pub residuals: Vec<f64>,
    /// Horizons dropped because τ covers them too far to the right.
    pub excluded: Vec<f64>,
}

impl DlimResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,t,ratio\n");
        for ((h, t), r) in self.horizons.iter().zip(&self.sample_times).zip(&self.residuals) {
            out.push_str(&format!("{h:?},{t:?},{r:?}\n"));
        }
        out
    }
}

pub(crate) fn check_horizons(horizons: &[f64]) -> Result<()> {
    if horizons.is_empty() || !(horizons[0] > 0.0) || horizons.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("horizons must be positive and strictly increasing"));
    }
    if horizons.iter().any(|h| !h.is_finite()) {
        return Err(Error::arg("horizons must be finite"));
    }
    Ok(())
}

/// For each horizon, the first time ≥ it outside `exceptional`, kept when it
/// lies within a third of the horizon.
pub(crate) fn sample_times(horizons: &[f64], exceptional: &TimeSet) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut kept, mut times, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for &h in horizons {
        let t = match exceptional.intervals().iter().find(|iv| iv.start <= h && h < iv.end) {
            Some(iv) => iv.end,
            None => h,
        };
        if t <= h * (4.0 / 3.0) {
            kept.push(h);
            times.push(t);
        } else {
            excluded.push(h);
        }
    }
    (kept, times, excluded)
}

pub(crate) fn summarize(
    kept: Vec<f64>,
    times: Vec<f64>,
    residuals: Vec<f64>,
    excluded: Vec<f64>,
    exceptional: TimeSet,
    band_limit: f64,
) -> Result<DlimResult> {
    if residuals.iter().any(|r| r.is_nan()) {
        return Err(Error::Domain {
            y: f64::NAN,
            tau: f64::NAN,
            detail: "α(t, x)/t is NaN at a sampled horizon".into(),
        });
    }
    let tail = &residuals[final_third_start(residuals.len())..];
    let beta = median(tail).expect("nonempty");
    let iqr = interquartile_range(tail).expect("nonempty");
    let dev = tail.iter().map(|r| (r - beta).abs()).fold(0.0, f64::max);
    let band = iqr.max(dev);
    Ok(DlimResult {
        beta,
        band,
        band_limit,
        converged: band <= band_limit,
        exceptional_measure: exceptional.measure(),
        exceptional,
        horizons: kept,
        sample_times: times,
        residuals,
        excluded,
    })
}

/// Estimate of dlim α(t, x)/t outside `exceptional`.
pub fn dlim_estimate(
    c: &dyn AdditiveCocycle,
    x: FiberPoint,
    horizons: &[f64],
    exceptional: &TimeSet,
    band_limit: f64,
) -> Result<DlimResult> {
    check_horizons(horizons)?;
    let (kept, times, excluded) = sample_times(horizons, exceptional);
    if kept.is_empty() {
        return Err(Error::ExceptionalCoversHorizon {
            horizon: horizons[horizons.len() - 1],
        });
    }
    let residuals: Vec<f64> = c.path(x, &times)?.iter().zip(&times).map(|(a, t)| a / t).collect();
    summarize(kept, times, residuals, excluded, exceptional.clone(), band_limit)
}

/// (Σ_{n<⌊t⌋} α(1, Tⁿx), α({t}, T^⌊t⌋x)).
pub fn birkhoff_decompose(c: &dyn AdditiveCocycle, t: f64, x: FiberPoint) -> Result<(f64, f64)> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::arg(format!("birkhoff_decompose needs finite t ≥ 0 (got {t})")));
    }
    let whole = t.floor();
    let mut sum = KahanSum::new();
    let mut z = x;
    for _ in 0..whole as u64 {
        sum.add(c.eval_forward(1.0, z)?);
        z = c.flow().evolve(z, 1.0)?;
    }
    Ok((sum.total(), c.eval_forward(t - whole, z)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeLimit {
    pub spacing: f64,
    pub steps: u64,
    pub estimate: f64,
    /// max(IQR, largest deviation) over the final third of k ↦ α(kh, x)/(kh).
    pub band: f64,
}

/// Limit of α(kh, x)/(kh) along k = 1..=N.
pub fn lattice_limit(c: &dyn AdditiveCocycle, x: FiberPoint, h: f64, steps: u64) -> Result<LatticeLimit> {
    if !(h > 0.0) || !h.is_finite() || steps == 0 {
        return Err(Error::arg("lattice_limit needs h > 0 and N ≥ 1"));
    }
    let times: Vec<f64> = (1..=steps).map(|k| k as f64 * h).collect();
    let ratios: Vec<f64> = c.path(x, &times)?.iter().zip(&times).map(|(a, t)| a / t).collect();
    let tail = &ratios[final_third_start(ratios.len())..];
    let estimate = median(tail).expect("nonempty");
    let dev = tail.iter().map(|r| (r - estimate).abs()).fold(0.0, f64::max);
    Ok(LatticeLimit {
        spacing: h,
        steps,
        estimate,
        band: interquartile_range(tail).expect("nonempty").max(dev),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaMeanReport {
    pub samples: usize,
    pub t: f64,
    pub mean_beta: f64,
    pub sem_beta: f64,
    /// Mean of α(t, x)/t over the same points.
    pub mean_ratio: f64,
    pub sem_ratio: f64,
    pub passed: bool,
}

/// Compares the sample mean of β(x) with the sample mean of α(t, x)/t.
pub fn beta_mean_identity_check(
    c: &dyn AdditiveCocycle,
    points: &[FiberPoint],
    t: f64,
    horizons: &[f64],
) -> Result<BetaMeanReport> {
    use rayon::prelude::*;
    if points.len() < 1000 {
        return Err(Error::arg(format!("need at least 1000 sample points (got {})", points.len())));
    }
    if !(t > 0.0) {
        return Err(Error::arg("t must be positive"));
    }
    check_horizons(horizons)?;
    let empty = TimeSet::empty();
    let pairs = points
        .par_iter()
        .map(|&x| {
            let beta = dlim_estimate(c, x, horizons, &empty, f64::INFINITY)?.beta;
            Ok((beta, c.eval_forward(t, x)? / t))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (betas, ratios): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (mb, sb) = mean_and_sem(&betas);
    let (mr, sr) = mean_and_sem(&ratios);
    let sigma = (sb * sb + sr * sr).sqrt();
    Ok(BetaMeanReport {
        samples: points.len(),
        t,
        mean_beta: mb,
        sem_beta: sb,
        mean_ratio: mr,
        sem_ratio: sr,
        passed: (mb - mr).abs() <= 3.0 * sigma + 1e-12 * (1.0 + mr.abs()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupProbe {
    /// Grid step used near critical times at each refinement.
    pub steps: Vec<f64>,
    /// max |α(t, x)|/t over the probed windows at each refinement.
    pub sup: Vec<f64>,
    /// Time where the last maximum was attained.
    pub argmax: f64,
}

/// Sampled sup of |α(t, x)|/t over windows [n, n+1), on a uniform grid plus
/// points approaching each critical time from the left.
pub fn full_time_sup_probe(
    c: &dyn AdditiveCocycle,
    x: FiberPoint,
    windows: &[u64],
    base_step: f64,
    refinements: usize,
) -> Result<SupProbe> {
    if !(base_step > 0.0 && base_step < 1.0) || refinements == 0 || windows.is_empty() {
        return Err(Error::arg("sup probe needs 0 < base_step < 1, refinements ≥ 1 and a window"));
    }
    let mut steps = Vec::with_capacity(refinements);
    let mut sup = vec![0.0f64; refinements];
    let mut argmax = f64::NAN;
    for &n in windows {
        let nf = n as f64;
        let start = c.eval_forward(nf, x)?;
        let z = c.flow().evolve(x, nf)?;
        let mut crit = c.critical_times(z, 1.0)?;
        crit.push(1.0);
        let mut grid: Vec<f64> = Vec::new();
        let mut s = 0.0;
        while s < 1.0 {
            grid.push(s);
            s += base_step;
        }
        for (j, best) in sup.iter_mut().enumerate() {
            let step = base_step * 10f64.powi(-(j as i32));
            if steps.len() < refinements {
                steps.push(step);
            }
            let mut offsets = grid.clone();
            for &tc in &crit {
                offsets.extend((1..=10).map(|m| tc - m as f64 * step).filter(|&o| o > 0.0));
            }
            offsets.sort_by(f64::total_cmp);
            offsets.dedup();
            let vals = c.path(z, &offsets)?;
            for (o, v) in offsets.iter().zip(vals) {
                let t = nf + o;
                if t <= 0.0 {
                    continue;
                }
                let r = (start + v).abs() / t;
                if r > *best {
                    *best = r;
                    if j + 1 == refinements {
                        argmax = t;
                    }
                }
            }
        }
    }
    Ok(SupProbe { steps, sup, argmax })
}
