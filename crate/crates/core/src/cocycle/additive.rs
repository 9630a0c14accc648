use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::AdditiveCocycle;
use crate::error::{Error, Result};
use crate::flow::{FiberPoint, RoofKind, SuspensionFlow};
use crate::numeric::{adaptive_gl8, KahanSum};

const QUAD_TOL: f64 = 1e-13;
const QUAD_DEPTH: u32 = 40;
/// Integer fiber times closer than this count as hits for the Example-2 data.
pub const INTEGER_HIT_TOL: f64 = 1e-9;

type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A function g(y, τ) on the phase space.
#[derive(Clone)]
pub enum Observable {
    Constant(f64),
    /// offset + cos_amp·cos(2π·freq·y) + sin_amp·sin(2π·freq·y) + tau_coeff·τ
    Trig {
        offset: f64,
        cos_amp: f64,
        sin_amp: f64,
        freq: f64,
        tau_coeff: f64,
    },
    Custom { name: String, g: Field },
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Constant(c) => write!(f, "Constant({c})"),
            Observable::Trig {
                offset,
                cos_amp,
                sin_amp,
                freq,
                tau_coeff,
            } => write!(
                f,
                "Trig({offset} + {cos_amp} cos + {sin_amp} sin (freq {freq}) + {tau_coeff} τ)"
            ),
            Observable::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Observable {
    pub fn cos(freq: f64) -> Self {
        Observable::Trig {
            offset: 0.0,
            cos_amp: 1.0,
            sin_amp: 0.0,
            freq,
            tau_coeff: 0.0,
        }
    }

    pub fn custom(name: impl Into<String>, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Observable::Custom {
            name: name.into(),
            g: Arc::new(g),
        }
    }

    pub fn eval(&self, y: f64, tau: f64) -> f64 {
        match self {
            Observable::Constant(c) => *c,
            Observable::Trig {
                offset,
                cos_amp,
                sin_amp,
                freq,
                tau_coeff,
            } => {
                let (s, c) = (std::f64::consts::TAU * freq * y).sin_cos();
                offset + cos_amp * c + sin_amp * s + tau_coeff * tau
            }
            Observable::Custom { g, .. } => g(y, tau),
        }
    }
}

/// α(t, x) = ∫₀ᵗ g(Tˢx) ds, integrated fiber segment by fiber segment.
#[derive(Debug, Clone)]
pub struct IntegralCocycle {
    flow: SuspensionFlow,
    g: Observable,
}

impl IntegralCocycle {
    pub fn new(flow: SuspensionFlow, g: Observable) -> Self {
        Self { flow, g }
    }

    pub fn observable(&self) -> &Observable {
        &self.g
    }

    fn fiber_integral(&self, y: f64, a: f64, b: f64) -> Result<f64> {
        let g = &self.g;
        adaptive_gl8(&mut |tau| g.eval(y, tau), a, b, QUAD_TOL, QUAD_DEPTH)
            .ok_or(Error::Quadrature { y, a, b })
    }

    /// ∫ g dμ / μ(X): the almost-sure value of lim α(t, x)/t for ergodic flows.
    pub fn space_average(&self) -> Result<f64> {
        if let Observable::Constant(c) = self.g {
            return Ok(c);
        }
        let roof = self.flow.roof();
        let mut failed = None;
        let mut inner = |y: f64| match self.fiber_integral(y, 0.0, roof.eval(y)) {
            Ok(v) => v,
            Err(e) => {
                failed.get_or_insert(e);
                f64::NAN
            }
        };
        let total = adaptive_gl8(&mut inner, 0.0, 1.0, 1e-12, 30);
        if let Some(e) = failed {
            return Err(e);
        }
        let total = total.ok_or(Error::Quadrature { y: f64::NAN, a: 0.0, b: 1.0 })?;
        Ok(total / self.flow.total_mass())
    }
}

impl AdditiveCocycle for IntegralCocycle {
    fn flow(&self) -> &SuspensionFlow {
        &self.flow
    }

    fn name(&self) -> String {
        format!("integral of {:?}", self.g)
    }

    fn known_space_average(&self) -> Option<Result<f64>> {
        Some(self.space_average())
    }

    fn eval_forward(&self, t: f64, x: FiberPoint) -> Result<f64> {
        if let Observable::Constant(c) = self.g {
            return Ok(c * t);
        }
        let mut acc = KahanSum::new();
        self.flow.walk_forward(x, t, |seg| {
            acc.add(self.fiber_integral(seg.y, seg.tau_start, seg.tau_end)?);
            Ok(())
        })?;
        Ok(acc.total())
    }
}

type PotentialFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A transfer function h(y, τ) for coboundaries. Custom potentials also
/// receive the roof value f(y).
#[derive(Clone)]
pub enum Potential {
    Constant(f64),
    /// (f(y) − τ)^(−1/2): integrable on every fiber, unbounded near each roof.
    FiberTop,
    /// amp·cos(2π(y + τ/f(y))).
    Bounded { amp: f64 },
    Custom { name: String, h: PotentialFn },
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Constant(c) => write!(f, "Constant({c})"),
            Potential::FiberTop => write!(f, "FiberTop"),
            Potential::Bounded { amp } => write!(f, "Bounded({amp})"),
            Potential::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Potential {
    pub fn eval(&self, flow: &SuspensionFlow, x: FiberPoint) -> Result<f64> {
        let v = match self {
            Potential::Constant(c) => *c,
            Potential::FiberTop => (flow.roof().eval(x.y) - x.tau).powf(-0.5),
            Potential::Bounded { amp } => {
                let r = flow.roof().eval(x.y);
                amp * (std::f64::consts::TAU * (x.y + x.tau / r)).cos()
            }
            Potential::Custom { h, .. } => h(x.y, x.tau, flow.roof().eval(x.y)),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain {
                y: x.y,
                tau: x.tau,
                detail: format!("potential {self:?} is not finite"),
            })
        }
    }

    /// sup |h| when finite.
    pub fn bound(&self) -> Option<f64> {
        match self {
            Potential::Constant(c) => Some(c.abs()),
            Potential::Bounded { amp } => Some(amp.abs()),
            _ => None,
        }
    }
}

/// α(t, x) = h(Tᵗx) − h(x).
#[derive(Debug, Clone)]
pub struct Coboundary {
    flow: SuspensionFlow,
    h: Potential,
}

impl Coboundary {
    pub fn new(flow: SuspensionFlow, h: Potential) -> Self {
        Self { flow, h }
    }

    /// Unit roof over the golden rotation with h = (1 − τ)^(−1/2), ∫h dμ = 2.
    pub fn example1() -> Self {
        Self::new(SuspensionFlow::golden_unit(), Potential::FiberTop)
    }

    pub fn potential(&self) -> &Potential {
        &self.h
    }

    pub fn h(&self, x: FiberPoint) -> Result<f64> {
        self.h.eval(&self.flow, x)
    }
}

impl AdditiveCocycle for Coboundary {
    fn flow(&self) -> &SuspensionFlow {
        &self.flow
    }

    fn name(&self) -> String {
        format!("coboundary of {:?}", self.h)
    }

    fn eval_forward(&self, t: f64, x: FiberPoint) -> Result<f64> {
        let end = self.flow.evolve(x, t)?;
        Ok(self.h(end)? - self.h(x)?)
    }

    fn eval(&self, t: f64, x: FiberPoint) -> Result<f64> {
        let end = self.flow.evolve(x, t)?;
        Ok(self.h(end)? - self.h(x)?)
    }

    fn path(&self, x: FiberPoint, times: &[f64]) -> Result<Vec<f64>> {
        let h0 = self.h(x)?;
        let mut point = x;
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if !(t >= prev) || !t.is_finite() {
                return Err(Error::arg("path times must be finite, nonnegative and nondecreasing"));
            }
            point = self.flow.evolve(point, t - prev)?;
            out.push(self.h(point)? - h0);
            prev = t;
        }
        Ok(out)
    }
}

type FiberFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type AtomFn = Arc<dyn Fn(f64, f64, f64) -> Vec<f64> + Send + Sync>;

/// Prescribed values g(t, y) = α(t, (y, 0)) for 0 ≤ t ≤ f(y).
#[derive(Clone)]
pub struct FiberData {
    name: String,
    g: FiberFn,
    /// Fiber times in [lo, hi] where g jumps: (y, lo, hi) ↦ times.
    atoms: Option<AtomFn>,
}

impl fmt::Debug for FiberData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiberData({})", self.name)
    }
}

impl FiberData {
    pub fn new(name: impl Into<String>, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            g: Arc::new(g),
            atoms: None,
        }
    }

    pub fn with_atoms(mut self, atoms: impl Fn(f64, f64, f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.atoms = Some(Arc::new(atoms));
        self
    }

    /// g(t, y) = c·t.
    pub fn linear(c: f64) -> Self {
        Self::new(format!("{c}·t"), move |t, _| c * t)
    }

    /// g(t, y) = sin(t)·y.
    pub fn sin_times_y() -> Self {
        Self::new("sin(t)·y", |t: f64, y| t.sin() * y)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        (self.g)(t, y)
    }
}

/// The cocycle determined by fiber data:
/// α(t, (y, τ)) = Σ_{i<n} g(f(Sⁱy), Sⁱy) + g(τ + t − fₙ(y), Sⁿy) − g(τ, y).
#[derive(Debug, Clone)]
pub struct FiberCocycle {
    flow: SuspensionFlow,
    data: FiberData,
    max_crossings: u64,
}

impl FiberCocycle {
    pub const DEFAULT_MAX_CROSSINGS: u64 = 10_000_000;

    pub fn new(flow: SuspensionFlow, data: FiberData) -> Result<Self> {
        for i in 0..32 {
            let y = (i as f64 + 0.5) / 32.0;
            let g0 = data.eval(0.0, y);
            if !(g0.abs() <= 1e-12) {
                return Err(Error::config(format!(
                    "fiber data {} must vanish at t = 0, got g(0, {y}) = {g0}",
                    data.name
                )));
            }
        }
        Ok(Self {
            flow,
            data,
            max_crossings: Self::DEFAULT_MAX_CROSSINGS,
        })
    }

    pub fn with_max_crossings(mut self, cap: u64) -> Self {
        self.max_crossings = cap;
        self
    }

    pub fn data(&self) -> &FiberData {
        &self.data
    }
}

impl AdditiveCocycle for FiberCocycle {
    fn flow(&self) -> &SuspensionFlow {
        &self.flow
    }

    fn name(&self) -> String {
        format!("fiber data {}", self.data.name)
    }

    fn eval_forward(&self, t: f64, x: FiberPoint) -> Result<f64> {
        let mut acc = KahanSum::new();
        let mut crossings = 0u64;
        let cap = self.max_crossings;
        self.flow.walk_forward(x, t, |seg| {
            acc.add(self.data.eval(seg.tau_end, seg.y));
            if seg.crosses {
                crossings += 1;
                if crossings > cap {
                    return Err(Error::Horizon { crossings, cap });
                }
            }
            Ok(())
        })?;
        acc.add(-self.data.eval(x.tau, x.y));
        Ok(acc.total())
    }

    fn critical_times(&self, x: FiberPoint, t: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        self.flow.walk_forward(x, t, |seg| {
            if let Some(atoms) = &self.data.atoms {
                for a in atoms(seg.y, seg.tau_start, seg.tau_end) {
                    let s = seg.time_start + (a - seg.tau_start);
                    if s > 0.0 && s <= t {
                        out.push(s);
                    }
                }
            }
            if seg.crosses {
                out.push(seg.time_start + seg.tau_end - seg.tau_start);
            }
            Ok(())
        })?;
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }
}

/// The Example-2 cocycle: g(t, y) = √n when t is an integer n ≤ f(y), else 0.
pub fn example2_cocycle(flow: SuspensionFlow) -> Result<FiberCocycle> {
    match flow.roof().kind() {
        RoofKind::Power { exponent, .. } if (exponent - 2.0 / 3.0).abs() < 1e-12 => {}
        other => {
            return Err(Error::config(format!(
                "the integer-spike cocycle needs the roof y^(-2/3), got {other:?}"
            )))
        }
    }
    let roof = flow.roof().clone();
    let roof_atoms = roof.clone();
    let data = FiberData::new("integer spikes √n", move |t, y| {
        let n = t.round();
        if n >= 0.0 && (t - n).abs() <= INTEGER_HIT_TOL && n <= roof.eval(y) {
            n.sqrt()
        } else {
            0.0
        }
    })
    .with_atoms(move |y, lo, hi| {
        let top = hi.min(roof_atoms.eval(y)).floor();
        let mut k = lo.max(0.0).ceil();
        let mut out = Vec::new();
        while k <= top {
            out.push(k);
            k += 1.0;
        }
        out
    });
    FiberCocycle::new(flow, data)
}

/// sup_{0 ≤ t ≤ 1} |α(t, x)|, found by evaluating α at every critical time in
/// the window; between them α equals its generic value −g(τ, y).
pub fn example2_unit_sup(c: &FiberCocycle, x: FiberPoint) -> Result<f64> {
    let mut sup = c.data().eval(x.tau, x.y).abs();
    for s in c.critical_times(x, 1.0)? {
        sup = sup.max(c.eval_forward(s, x)?.abs());
    }
    Ok(sup)
}

/// Stratified estimate of ∫_{y ≥ cutoff} sup_{0≤t≤1} |α(t, ·)| dμ.
#[derive(Debug, Clone, Serialize)]
pub struct SupIntegralEstimate {
    pub cutoff: f64,
    pub value: f64,
    pub std_error: f64,
    pub strata: usize,
    pub samples_per_stratum: usize,
}

/// The y-range [cutoff, 1] is cut into log-spaced strata with uniform draws
/// of y inside each; τ is stratified into unit cells, on each of which the
/// window sup is constant, so one evaluation per cell is exact.
pub fn example2_sup_integral(
    c: &FiberCocycle,
    cutoff: f64,
    strata_per_decade: usize,
    samples_per_stratum: usize,
    seed: u64,
) -> Result<SupIntegralEstimate> {
    if !(cutoff > 0.0 && cutoff < 1.0) || strata_per_decade == 0 || samples_per_stratum < 2 {
        return Err(Error::arg(
            "need 0 < cutoff < 1, at least one stratum per decade and two samples per stratum",
        ));
    }
    let roof = c.flow().roof();
    let decades = -cutoff.log10();
    let strata = (decades * strata_per_decade as f64).ceil() as usize;
    let edge = |j: usize| cutoff * 10f64.powf(decades * j as f64 / strata as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = KahanSum::new();
    let mut var = 0.0;
    for j in 0..strata {
        let (a, b) = (edge(j), if j + 1 == strata { 1.0 } else { edge(j + 1) });
        let mut vals = Vec::with_capacity(samples_per_stratum);
        for _ in 0..samples_per_stratum {
            let y = a + (b - a) * rng.random::<f64>();
            let cells = roof.eval(y).floor() as u64;
            let mut fiber = KahanSum::new();
            for k in 1..=cells {
                fiber.add(example2_unit_sup(c, FiberPoint::new(y, k as f64 - 0.5))?);
            }
            vals.push(fiber.total());
        }
        let (mean, sem) = crate::numeric::mean_and_sem(&vals);
        total.add((b - a) * mean);
        var += ((b - a) * sem).powi(2);
    }
    Ok(SupIntegralEstimate {
        cutoff,
        value: total.total(),
        std_error: var.sqrt(),
        strata,
        samples_per_stratum,
    })
}
