use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::scan::{to_absolute, AdditiveWindow, Sampled, ScanConfig};
use crate::cocycle::AdditiveCocycle;
use crate::error::{Error, Result};
use crate::flow::{FiberPoint, SuspensionFlow};
use crate::numeric::{linear_fit, log_grid};
use crate::timeset::{Interval, TimeSet};

/// Number of levels in the default sequence εₗ = 2⁻ˡ.
pub const DEFAULT_LEVELS: usize = 48;

pub fn default_eps_seq() -> Vec<f64> {
    (1..=DEFAULT_LEVELS as i32).map(|l| 2f64.powi(-l)).collect()
}

/// Points Tⁿx for n = 0..count.
pub(crate) fn lattice_orbit(flow: &SuspensionFlow, x: FiberPoint, count: usize) -> Result<Vec<FiberPoint>> {
    let mut out = Vec::with_capacity(count);
    let mut z = x;
    for n in 0..count {
        if n > 0 {
            z = flow.evolve(z, 1.0)?;
        }
        out.push(z);
    }
    Ok(out)
}

pub(crate) fn check_horizon(horizon: f64) -> Result<usize> {
    if !(horizon >= 1.0) || !horizon.is_finite() {
        return Err(Error::arg(format!("horizon must be finite and at least 1 (got {horizon})")));
    }
    Ok(horizon.floor() as usize)
}

/// {s ∈ window : |v(s)| ≥ thr}, with thr = 0 meaning the whole window unless
/// every sample vanishes.
pub(crate) fn above<W: super::scan::WindowFn>(sampled: &Sampled<'_, W>, thr: f64) -> Result<Vec<Interval>> {
    if thr <= 0.0 {
        if sampled.max_abs() == 0.0 {
            return Ok(Vec::new());
        }
        return sampled.level_set(|_| true);
    }
    sampled.level_set(|v| v.abs() >= thr)
}

/// Outer approximation of Δₙᵉ(x) = {t ∈ [n, n+1) : |α({t}, Tⁿx)| ≥ εn}.
pub fn delta_set(c: &dyn AdditiveCocycle, x: FiberPoint, n: u64, eps: f64, resolution: f64) -> Result<TimeSet> {
    let cfg = ScanConfig::new(ScanConfig::default().coarse, resolution)?;
    if !(eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive (got {eps})")));
    }
    let z = c.flow().evolve(x, n as f64)?;
    let window = AdditiveWindow { c, z, base: 0.0, len: 1.0 };
    let sampled = Sampled::new(&window, cfg)?;
    let ivs = above(&sampled, eps * n as f64)?;
    Ok(TimeSet::from_intervals(to_absolute(&ivs, n as f64).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub eps: f64,
    /// kₗ: first integer time from which the tail of τₗ is below the bound.
    pub k: u64,
    pub tail_bound: f64,
    /// λ(τₗ ∩ [kₗ, horizon)).
    pub tail_measure: f64,
    /// Measure of the part of τₗ kept in τ.
    pub level_measure: f64,
    /// The next level did not fit, so this one runs to the horizon.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceptionalSet {
    pub set: TimeSet,
    pub measure: f64,
    pub horizon: f64,
    pub scale: f64,
    pub levels: Vec<LevelReport>,
    pub truncated: bool,
}

pub(crate) fn validate_eps(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::arg("eps sequence is empty"));
    }
    if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::arg("eps sequence must be positive and strictly decreasing"));
    }
    Ok(())
}

/// Assembles τ from per-window level sets `windows[n][l]` (absolute times).
///
/// Level l is kept on [kₗ, kₗ₊₁), where its tail is at most scale·2⁻ˡ, and
/// level 1 also on [0, k₁). The last level that fits runs to the horizon.
pub(crate) fn assemble(
    windows: Vec<Vec<Vec<Interval>>>,
    eps: &[f64],
    horizon: usize,
    scale: f64,
) -> Result<ExceptionalSet> {
    let mut per_level: Vec<Vec<Interval>> = vec![Vec::new(); eps.len()];
    for w in windows {
        for (l, ivs) in w.into_iter().enumerate() {
            per_level[l].extend(ivs);
        }
    }
    let h = horizon as f64;
    let mut fitted: Vec<(TimeSet, u64, f64)> = Vec::new();
    let mut k_prev = 0u64;
    for (l, ivs) in per_level.into_iter().enumerate() {
        let tau_l = TimeSet::from_intervals(ivs).restrict(h);
        let bound = scale * 2f64.powi(-(l as i32 + 1));
        // tail_measure is nonincreasing in k, so bisect on [k_prev, horizon].
        let (mut lo, mut hi) = (k_prev, horizon as u64);
        if tau_l.tail_measure(lo as f64) <= bound {
            hi = lo;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tau_l.tail_measure(mid as f64) <= bound {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if hi >= horizon as u64 {
            break;
        }
        assert!(tau_l.tail_measure(hi as f64) <= bound, "tail bound violated at level {}", l + 1);
        fitted.push((tau_l, hi, bound));
        k_prev = hi;
    }
    if fitted.is_empty() {
        return Err(Error::HorizonExhausted { horizon: h });
    }
    let truncated = fitted.len() < eps.len();
    let mut pieces = Vec::new();
    let mut reports = Vec::new();
    for (l, (tau_l, k, bound)) in fitted.iter().enumerate() {
        let upper = fitted.get(l + 1).map_or(h, |next| next.1 as f64);
        let lower = if l == 0 { 0.0 } else { *k as f64 };
        let kept = tau_l.window(lower, upper);
        reports.push(LevelReport {
            level: l + 1,
            eps: eps[l],
            k: *k,
            tail_bound: *bound,
            tail_measure: tau_l.tail_measure(*k as f64),
            level_measure: kept.measure(),
            truncated: l + 1 == fitted.len() && truncated,
        });
        pieces.extend_from_slice(kept.intervals());
    }
    let set = TimeSet::from_intervals(pieces);
    Ok(ExceptionalSet {
        measure: set.measure(),
        set,
        horizon: h,
        scale,
        levels: reports,
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Options {
    pub scan: ScanConfig,
    /// Factor s ∈ (0, 1] applied to the tail bounds 2⁻ˡ.
    pub scale: f64,
}

impl Default for Theorem1Options {
    fn default() -> Self {
        Self {
            scan: ScanConfig::default(),
            scale: 1.0,
        }
    }
}

/// The finite-measure set τ(x) built from the windows Δₙ^{εₗ}(x), n < horizon.
pub fn theorem1_exceptional_set(
    c: &dyn AdditiveCocycle,
    x: FiberPoint,
    eps_seq: Option<&[f64]>,
    horizon: f64,
    opts: Theorem1Options,
) -> Result<ExceptionalSet> {
    let default_eps;
    let eps = match eps_seq {
        Some(e) => e,
        None => {
            default_eps = default_eps_seq();
            &default_eps
        }
    };
    validate_eps(eps)?;
    opts.scan.validate()?;
    if !(opts.scale > 0.0 && opts.scale <= 1.0) {
        return Err(Error::arg(format!("scale must lie in (0, 1] (got {})", opts.scale)));
    }
    let h = check_horizon(horizon)?;
    let orbit = lattice_orbit(c.flow(), x, h)?;
    let windows = orbit
        .par_iter()
        .enumerate()
        .map(|(n, &z)| {
            let window = AdditiveWindow { c, z, base: 0.0, len: 1.0 };
            let sampled = Sampled::new(&window, opts.scan)?;
            eps.iter()
                .map(|e| Ok(to_absolute(&above(&sampled, e * n as f64)?, n as f64).collect()))
                .collect::<Result<Vec<Vec<Interval>>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(windows, eps, h, opts.scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhiKind {
    /// Monotone and increasing to ∞.
    Increasing,
    /// Convex with x·φ(x) → 0 as x → 0⁺.
    ConvexBlowup,
}

#[derive(Clone)]
pub struct PhiFunction {
    name: String,
    kind: PhiKind,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiFunction").field("name", &self.name).field("kind", &self.kind).finish()
    }
}

impl PhiFunction {
    pub fn custom(
        name: impl Into<String>,
        kind: PhiKind,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let phi = Self {
            name: name.into(),
            kind,
            f: Arc::new(f),
        };
        phi.validate()?;
        Ok(phi)
    }

    /// x^p: increasing for p > 0, convex blow-up for −1 < p < 0.
    pub fn power(p: f64) -> Result<Self> {
        let kind = if p > 0.0 { PhiKind::Increasing } else { PhiKind::ConvexBlowup };
        Self::custom(format!("x^{p}"), kind, move |x| x.powf(p))
    }

    /// ln(x + 2).
    pub fn log_shift() -> Self {
        Self::custom("ln(x+2)", PhiKind::Increasing, |x| (x + 2.0).ln()).expect("ln(x+2) is increasing")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> PhiKind {
        self.kind
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            PhiKind::Increasing => {
                let vals: Vec<f64> = log_grid(1.0, 1e8, 64).into_iter().map(|x| self.eval(x)).collect();
                let ok = vals.iter().all(|v| v.is_finite() && *v > 0.0)
                    && vals.windows(2).all(|w| w[1] > w[0]);
                if !ok {
                    return Err(Error::config(format!("{} is not positive and increasing", self.name)));
                }
            }
            PhiKind::ConvexBlowup => {
                let probe: Vec<f64> = (1..=12).map(|k| {
                    let x = 10f64.powi(-k);
                    x * self.eval(x)
                }).collect();
                let ok = probe.iter().all(|v| v.is_finite() && *v > 0.0)
                    && probe.windows(2).all(|w| w[1] <= w[0])
                    && probe[probe.len() - 1] < 1e-3;
                if !ok {
                    return Err(Error::config(format!("{}: x·φ(x) does not vanish at 0", self.name)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhiVariant {
    /// Threshold n/φ(n).
    NOverPhi,
    /// Threshold n/φ(f(Tⁿx)/n) with f(z) = ∫₀¹ |α(s, z)| ds.
    FRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCurve {
    pub times: Vec<f64>,
    pub measures: Vec<f64>,
}

impl GrowthCurve {
    pub fn from_set(set: &TimeSet, times: Vec<f64>) -> Self {
        let measures = times.iter().map(|&t| set.measure_up_to(t)).collect();
        Self { times, measures }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,measure\n");
        for (t, m) in self.times.iter().zip(&self.measures) {
            out.push_str(&format!("{t:?},{m:?}\n"));
        }
        out
    }
}

pub fn phi_exceptional_set(
    c: &dyn AdditiveCocycle,
    x: FiberPoint,
    phi: &PhiFunction,
    horizon: f64,
    variant: PhiVariant,
    scan: ScanConfig,
) -> Result<(TimeSet, GrowthCurve)> {
    scan.validate()?;
    let wanted = match variant {
        PhiVariant::NOverPhi => PhiKind::Increasing,
        PhiVariant::FRatio => PhiKind::ConvexBlowup,
    };
    if phi.kind() != wanted {
        return Err(Error::arg(format!("{:?} needs a φ of kind {wanted:?}", variant)));
    }
    let h = check_horizon(horizon)?;
    let orbit = lattice_orbit(c.flow(), x, h)?;
    let pieces = orbit
        .par_iter()
        .enumerate()
        .map(|(n, &z)| {
            let window = AdditiveWindow { c, z, base: 0.0, len: 1.0 };
            let sampled = Sampled::new(&window, scan)?;
            let nf = n as f64;
            let ivs = match variant {
                PhiVariant::NOverPhi => {
                    let thr = if n == 0 { 0.0 } else { nf / phi.eval(nf) };
                    above(&sampled, thr)?
                }
                PhiVariant::FRatio => {
                    let f = sampled.abs_integral();
                    if f == 0.0 {
                        Vec::new()
                    } else {
                        let thr = if n == 0 { 0.0 } else { nf / phi.eval(f / nf) };
                        above(&sampled, thr)?
                    }
                }
            };
            Ok(to_absolute(&ivs, nf).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let set = TimeSet::from_intervals(pieces.into_iter().flatten().collect());
    let grid = log_grid(1.0_f64.min(horizon), h as f64, 40);
    let curve = GrowthCurve::from_set(&set, grid);
    Ok((set, curve))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    /// C = λ(t₀)/(φ(t₀)·ln t₀).
    pub constant: f64,
    /// Log-log slope of λ(τ ∩ [0, t]) against φ(t)·ln t.
    pub exponent: f64,
    /// max over the range of λ/(C·φ(t)·ln t).
    pub max_ratio: f64,
    pub passed: bool,
}

/// Checks λ(τ ∩ [0, t]) ≤ 1.2·C·φ(t)·ln t over t ∈ [t0, t1], with C fixed at t0.
pub fn fit_growth(curve: &GrowthCurve, phi: &PhiFunction, t0: f64, t1: f64) -> Result<GrowthFit> {
    let pts: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.measures)
        .filter(|(t, _)| **t >= t0 * (1.0 - 1e-12) && **t <= t1 * (1.0 + 1e-12))
        .map(|(t, m)| (*t, *m))
        .collect();
    if pts.len() < 2 || pts[0].1 <= 0.0 {
        return Err(Error::arg("growth fit needs two points with positive measure in range"));
    }
    let psi = |t: f64| phi.eval(t) * t.ln();
    let constant = pts[0].1 / psi(pts[0].0);
    let max_ratio = pts.iter().map(|(t, m)| m / (constant * psi(*t))).fold(0.0, f64::max);
    let lx: Vec<f64> = pts.iter().map(|(t, _)| psi(*t).ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|(_, m)| m.ln()).collect();
    let exponent = linear_fit(&lx, &ly).map(|(s, _)| s).unwrap_or(f64::NAN);
    Ok(GrowthFit {
        constant,
        exponent,
        max_ratio,
        passed: max_ratio <= 1.2 && exponent <= 1.2,
    })
}
