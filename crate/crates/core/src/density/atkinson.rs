use rayon::prelude::*;
use serde::Serialize;

use super::check_horizons;
use super::exceptional::{check_horizon, lattice_orbit};
use super::scan::{to_absolute, AdditiveWindow, Sampled, ScanConfig};
use crate::cocycle::AdditiveCocycle;
use crate::error::{Error, Result};
use crate::flow::{sample_mu, FiberPoint};
use crate::numeric::mean_and_sem;
use crate::timeset::TimeSet;

const MEAN_CHECK_SAMPLES: usize = 4000;
const MEAN_CHECK_SEED: u64 = 0x5eed_a7c1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtkinsonReport {
    pub eps: f64,
    pub horizons: Vec<f64>,
    /// λ{t ≤ H : |α(t, x)| ≤ ε} per horizon.
    pub measures: Vec<f64>,
    pub increasing: bool,
    /// (m_last − m_prev)/m_prev for the last two horizons.
    pub final_gain_ratio: f64,
    /// Final gain below 10% of the running value.
    pub saturated: bool,
    /// Monte-Carlo mean of α(1, ·) and its standard error.
    pub space_mean: f64,
    pub space_mean_sem: f64,
    /// Set when the zero-mean hypothesis looks violated.
    pub warning: Option<String>,
}

/// Measure of the return set {t ≤ H : |α(t, x)| ≤ ε} along the horizons.
pub fn atkinson_measure(
    c: &dyn AdditiveCocycle,
    x: FiberPoint,
    eps: f64,
    horizons: &[f64],
    scan: ScanConfig,
) -> Result<AtkinsonReport> {
    if !(eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive (got {eps})")));
    }
    check_horizons(horizons)?;
    scan.validate()?;
    let last = horizons[horizons.len() - 1];
    let h = check_horizon(last.ceil())?;
    let orbit = lattice_orbit(c.flow(), x, h)?;
    let lattice: Vec<f64> = (0..h).map(|n| n as f64).collect();
    let bases = c.path(x, &lattice)?;
    let pieces = orbit
        .par_iter()
        .zip(bases.par_iter())
        .enumerate()
        .map(|(n, (&z, &base))| {
            let window = AdditiveWindow { c, z, base, len: 1.0 };
            let sampled = Sampled::new(&window, scan)?;
            Ok(to_absolute(&sampled.level_set(|v| v.abs() <= eps)?, n as f64).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let set = TimeSet::from_intervals(pieces.into_iter().flatten().collect());
    let measures: Vec<f64> = horizons.iter().map(|&t| set.measure_up_to(t)).collect();
    let increasing = measures.windows(2).all(|w| w[1] > w[0]);
    let final_gain_ratio = match measures.len() {
        0 | 1 => f64::NAN,
        n if measures[n - 2] > 0.0 => (measures[n - 1] - measures[n - 2]) / measures[n - 2],
        n if measures[n - 1] > 0.0 => f64::INFINITY,
        _ => 0.0,
    };
    let saturated = !(final_gain_ratio >= 0.1);

    let pts = sample_mu(c.flow(), MEAN_CHECK_SEED, MEAN_CHECK_SAMPLES)?;
    let unit = pts
        .par_iter()
        .map(|&p| c.eval_forward(1.0, p))
        .collect::<Result<Vec<f64>>>()?;
    let (space_mean, space_mean_sem) = mean_and_sem(&unit);
    let warning = (space_mean.abs() > 3.0 * space_mean_sem + 1e-12).then(|| {
        format!(
            "space mean of α(1, ·) is {space_mean:.3e} ± {space_mean_sem:.1e}; the zero-mean hypothesis fails"
        )
    });
    Ok(AtkinsonReport {
        eps,
        horizons: horizons.to_vec(),
        measures,
        increasing,
        final_gain_ratio,
        saturated,
        space_mean,
        space_mean_sem,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{ConstantRate, IntegralCocycle, Observable};
    use crate::flow::SuspensionFlow;

    #[test]
    fn zero_cocycle_returns_everywhere() {
        let c = ConstantRate::new(SuspensionFlow::golden_unit(), 0.0);
        let r = atkinson_measure(&c, FiberPoint::new(0.2, 0.0), 0.5, &[10.0, 100.0], ScanConfig::new(1e-2, 1e-6).unwrap())
            .unwrap();
        assert_eq!(r.measures, vec![10.0, 100.0]);
        assert!(r.warning.is_none());
    }

    #[test]
    fn drifting_control_saturates_and_is_flagged() {
        let c = ConstantRate::new(SuspensionFlow::golden_unit(), 2.0);
        let r = atkinson_measure(&c, FiberPoint::new(0.2, 0.0), 0.5, &[10.0, 100.0], ScanConfig::new(1e-2, 1e-6).unwrap())
            .unwrap();
        assert!((r.measures[1] - 0.25).abs() < 1e-5, "{:?}", r.measures);
        assert!(r.saturated && r.warning.is_some());
    }

    #[test]
    fn zero_mean_integral_matches_dense_scan() {
        let c = IntegralCocycle::new(SuspensionFlow::golden_sine(), Observable::cos(1.0));
        let x = FiberPoint::new(0.3, 0.1);
        let r = atkinson_measure(&c, x, 0.5, &[100.0], ScanConfig::new(1e-2, 1e-6).unwrap()).unwrap();
        let m = 200_000;
        let times: Vec<f64> = (0..m).map(|i| 100.0 * (i as f64 + 0.5) / m as f64).collect();
        let hits = c.path(x, &times).unwrap().iter().filter(|v| v.abs() <= 0.5).count();
        let dense = 100.0 * hits as f64 / m as f64;
        assert!((r.measures[0] - dense).abs() < 1e-2, "{} vs {dense}", r.measures[0]);
        assert!(r.warning.is_none());
    }
}
