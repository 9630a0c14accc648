use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{FiberPoint, RoofKind, SecondMoment, SuspensionFlow};
use crate::error::{Error, Result};

const PROPOSALS_PER_POINT: u64 = 1000;

/// Draws `count` points from μ / μ(X): the base coordinate has density
/// f(y)/∫f dν against ν and τ is uniform on [0, f(y)). Deterministic in `seed`.
pub fn sample_mu(flow: &SuspensionFlow, seed: u64, count: usize) -> Result<Vec<FiberPoint>> {
    if count == 0 {
        return Err(Error::arg("sample_mu needs count >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let roof = flow.roof();
    match roof.kind() {
        RoofKind::Constant { .. } => {
            for _ in 0..count {
                let y = flow.base().sample_nu(&mut rng);
                out.push(uniform_on_fiber(flow, y, &mut rng));
            }
        }
        RoofKind::Power { exponent, y_min } => {
            let (p, ym) = (*exponent, *y_min);
            let q = 1.0 - p;
            let head = ym.powf(q);
            let mean = roof.mean();
            for _ in 0..count {
                let u: f64 = rng.random::<f64>() * mean;
                let y = if u < head {
                    u * ym.powf(p)
                } else {
                    ((u - head) * q + head).powf(1.0 / q)
                };
                let y = y.clamp(0.0, 1.0 - f64::EPSILON);
                out.push(uniform_on_fiber(flow, y, &mut rng));
            }
        }
        RoofKind::Sine { .. } | RoofKind::Custom { .. } => {
            let upper = roof.upper_bound().ok_or_else(|| Error::SamplerStalled {
                attempts: 0,
                accepted: 0,
                detail: "unbounded roof without an analytic inverse CDF".into(),
            })?;
            let cap = PROPOSALS_PER_POINT * count as u64;
            let mut attempts = 0u64;
            while out.len() < count {
                attempts += 1;
                if attempts > cap {
                    return Err(Error::SamplerStalled {
                        attempts,
                        accepted: out.len() as u64,
                        detail: format!(
                            "acceptance rate below 1/{PROPOSALS_PER_POINT}; roof sup {upper} vs mean {}",
                            roof.mean()
                        ),
                    });
                }
                let y = flow.base().sample_nu(&mut rng);
                let f = roof.checked_eval(y)?;
                if rng.random::<f64>() * upper < f {
                    out.push(FiberPoint::new(y, rng.random::<f64>() * f));
                }
            }
        }
    }
    Ok(out)
}

fn uniform_on_fiber(flow: &SuspensionFlow, y: f64, rng: &mut ChaCha8Rng) -> FiberPoint {
    let f = flow.roof().eval(y);
    let tau = (rng.random::<f64>() * f).min(f * (1.0 - f64::EPSILON));
    FiberPoint::new(y, tau)
}

/// Empirical mean of f(y) under the fiber-weighted law at growing sample
/// sizes, compared with ∫f² dν / ∫f dν.
#[derive(Debug, Clone, Serialize)]
pub struct HeavyTailReport {
    pub counts: Vec<usize>,
    pub estimates: Vec<f64>,
    /// ∫f²dν/∫f dν when finite and known.
    pub analytic: Option<f64>,
    /// The estimate has no finite limit.
    pub divergent: bool,
}

pub fn fiber_weighted_roof_mean(
    flow: &SuspensionFlow,
    seed: u64,
    counts: &[usize],
) -> Result<HeavyTailReport> {
    if counts.is_empty() {
        return Err(Error::arg("need at least one sample size"));
    }
    let mut estimates = Vec::with_capacity(counts.len());
    for &n in counts {
        let pts = sample_mu(flow, seed, n)?;
        let m = pts.iter().map(|p| flow.roof().eval(p.y)).sum::<f64>() / n as f64;
        estimates.push(m);
    }
    let (analytic, divergent) = match flow.roof().second_moment() {
        SecondMoment::Finite(m2) => (Some(m2 / flow.total_mass()), false),
        SecondMoment::Divergent => (None, true),
        SecondMoment::Unknown => {
            // Without an analytic answer, call it divergent when the estimate
            // keeps growing by more than 25% per size step.
            let growing = estimates.windows(2).all(|w| w[1] > 1.25 * w[0]);
            (None, estimates.len() > 2 && growing)
        }
    };
    Ok(HeavyTailReport {
        counts: counts.to_vec(),
        estimates,
        analytic,
        divergent,
    })
}
