//! One function per subcommand. Each returns a [`Report`]: a JSON-ready
//! result plus named CSV/text attachments. Writing is left to the caller.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use cocycle_core::cocycle::{
    example2_cocycle, example2_sup_integral, AdditiveCocycle, Coboundary, SupIntegralEstimate,
};
use cocycle_core::config::Cocycle;
use cocycle_core::density::{
    atkinson_measure, birkhoff_decompose, dlim_estimate, fit_growth, full_time_sup_probe, horizons_up_to,
    kingman_dlim, lattice_limit, phi_exceptional_set, theorem1_exceptional_set, AtkinsonReport, DlimResult,
    ExceptionalSet, GrowthCurve, GrowthFit, KingmanOptions, LatticeLimit, LevelReport, ScanConfig, SpaceMeanCurve,
    SupProbe, Theorem1Options, DEFAULT_BAND_LIMIT,
};
use cocycle_core::flow::sample_mu;
use cocycle_core::met::{
    default_group_tolerance, filtration_growth, geodesic_tracking, lambda_matrix, lyapunov_report,
    lyapunov_spectrum_qr, matrix_csv, oseledets_filtration, regularity_defect, splitting_equivariance,
    EquivarianceCheck, GrowthCheck, LyapunovReport, QrOptions, RegularityCurve, TrackingReport,
};
use cocycle_core::numeric::log_grid;
use cocycle_core::{DensityEstimate, Error, FiberPoint, Result, SuspensionFlow, TimeSet};

use crate::experiment::{ExceptionalMode, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counterexample {
    Ex1,
    Ex2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Birkhoff,
    Dlim,
    Exceptional,
    Atkinson,
    Kingman,
    Met,
    Track,
    Counterexample(Counterexample),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Birkhoff => "birkhoff",
            Command::Dlim => "dlim",
            Command::Exceptional => "exceptional",
            Command::Atkinson => "atkinson",
            Command::Kingman => "kingman",
            Command::Met => "met",
            Command::Track => "track",
            Command::Counterexample(Counterexample::Ex1) => "counterexample-ex1",
            Command::Counterexample(Counterexample::Ex2) => "counterexample-ex2",
        }
    }
}

/// Result of one subcommand.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub horizon: f64,
    pub point: FiberPoint,
    pub cocycle: String,
    pub total_mass: f64,
    pub result: Value,
    /// (file name, contents) pairs.
    pub files: Vec<(String, String)>,
    /// Short human-readable lines.
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    command: &'a str,
    seed: u64,
    horizon: f64,
    point: FiberPoint,
    cocycle: &'a str,
    total_mass: f64,
    config: &'a ExperimentConfig,
    result: &'a Value,
    timestamp: u64,
}

impl Report {
    /// Pretty JSON; everything except `timestamp` is a function of the config and seed.
    pub fn to_json(&self, ctx: &Context, timestamp: u64) -> String {
        let env = Envelope {
            command: self.command,
            seed: ctx.seed,
            horizon: self.horizon,
            point: self.point,
            cocycle: &self.cocycle,
            total_mass: self.total_mass,
            config: &ctx.cfg,
            result: &self.result,
            timestamp,
        };
        serde_json::to_string_pretty(&env).expect("reports serialize") + "\n"
    }
}

/// Resolved inputs shared by all subcommands.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub horizon_override: Option<f64>,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, seed: Option<u64>, horizon: Option<f64>) -> Result<Self> {
        if let Some(h) = horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("--horizon must be positive and finite (got {h})")));
            }
        }
        Ok(Self {
            seed: seed.unwrap_or(cfg.seed),
            cfg,
            horizon_override: horizon,
        })
    }

    fn horizon(&self, default: f64) -> f64 {
        self.horizon_override.or(self.cfg.run.horizon).unwrap_or(default)
    }

    /// The configured grid cut at `h`, or doubling from min(100, h) up to h.
    fn horizons(&self, h: f64) -> Result<Vec<f64>> {
        match &self.cfg.run.horizons {
            Some(list) => {
                let kept: Vec<f64> = list.iter().copied().filter(|t| *t <= h).collect();
                if kept.is_empty() {
                    return Err(Error::Config(format!("no configured horizon is at most {h}")));
                }
                Ok(kept)
            }
            None => Ok(horizons_up_to(100f64.min(h), h)),
        }
    }

    fn flow(&self) -> Result<SuspensionFlow> {
        self.cfg.flow.build(self.seed)
    }

    fn cocycle(&self) -> Result<Cocycle> {
        let spec = self
            .cfg
            .cocycle
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand needs a [cocycle] section".into()))?;
        spec.build(self.flow()?, self.seed)
    }

    fn point(&self, flow: &SuspensionFlow) -> Result<FiberPoint> {
        match self.cfg.point {
            Some(p) => {
                flow.check_point(p).map_err(|e| Error::Config(e.to_string()))?;
                Ok(p)
            }
            None => Ok(sample_mu(flow, self.seed, 1)?[0]),
        }
    }

    fn scan(&self, default: ScanConfig) -> ScanConfig {
        self.cfg.run.scan.unwrap_or(default)
    }

    fn band_limit(&self) -> f64 {
        self.cfg.run.band_limit.unwrap_or(DEFAULT_BAND_LIMIT)
    }

    fn theorem1_options(&self) -> Theorem1Options {
        let d = Theorem1Options::default();
        Theorem1Options {
            scan: self.scan(d.scan),
            scale: self.cfg.run.scale.unwrap_or(d.scale),
        }
    }
}

pub fn run(cmd: Command, ctx: &Context) -> Result<Report> {
    match cmd {
        Command::Simulate => simulate(ctx),
        Command::Birkhoff => birkhoff(ctx),
        Command::Dlim => dlim(ctx),
        Command::Exceptional => exceptional(ctx),
        Command::Atkinson => atkinson(ctx),
        Command::Kingman => kingman(ctx),
        Command::Met => met(ctx),
        Command::Track => track(ctx),
        Command::Counterexample(Counterexample::Ex1) => ex1(ctx),
        Command::Counterexample(Counterexample::Ex2) => ex2(ctx),
    }
}

fn report<T: Serialize>(
    command: Command,
    horizon: f64,
    point: FiberPoint,
    cocycle: String,
    flow: &SuspensionFlow,
    result: &T,
) -> Report {
    Report {
        command: command.name(),
        horizon,
        point,
        cocycle,
        total_mass: flow.total_mass(),
        result: serde_json::to_value(result).expect("reports serialize"),
        files: Vec::new(),
        summary: Vec::new(),
    }
}

/// 10², 10³, … up to h, with h appended when off the grid.
fn decades_up_to(h: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (2..).map(|k| 10f64.powi(k)).take_while(|t| *t <= h * (1.0 + 1e-12)).collect();
    if out.last().is_none_or(|l| *l < h * (1.0 - 1e-12)) {
        out.push(h);
    }
    out
}

/// Levels and totals of a construction without repeating its intervals.
#[derive(Debug, Clone, Serialize)]
pub struct ConstructionSummary {
    pub measure: f64,
    pub horizon: f64,
    pub scale: f64,
    pub truncated: bool,
    pub intervals: usize,
    pub levels: Vec<LevelReport>,
}

impl From<&ExceptionalSet> for ConstructionSummary {
    fn from(e: &ExceptionalSet) -> Self {
        Self {
            measure: e.measure,
            horizon: e.horizon,
            scale: e.scale,
            truncated: e.truncated,
            intervals: e.set.intervals().len(),
            levels: e.levels.clone(),
        }
    }
}

#[derive(Serialize)]
struct SimRow {
    t: f64,
    y: f64,
    tau: f64,
    crossings: i64,
    value: Option<f64>,
}

#[derive(Serialize)]
struct SimulateResult {
    /// What `value` holds: α(t, x), ln‖A(t, x)‖, or nothing without a cocycle.
    value_kind: Option<&'static str>,
    rows: Vec<SimRow>,
}

fn simulate(ctx: &Context) -> Result<Report> {
    let flow = ctx.flow()?;
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(100.0);
    let times = match &ctx.cfg.run.times {
        Some(t) => t.clone(),
        None => (1..=20).map(|k| h * k as f64 / 20.0).collect(),
    };
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("simulate times must be finite, nonnegative and sorted".into()));
    }
    let cocycle = ctx.cfg.cocycle.as_ref().map(|_| ctx.cocycle()).transpose()?;
    let (kind, values) = match &cocycle {
        Some(Cocycle::Additive(c)) => (Some("alpha(t,x)"), Some(c.path(x, &times)?)),
        Some(Cocycle::Matrix(a)) => {
            let v = times
                .iter()
                .map(|&t| Ok(a.graded(t, x)?.log_norm()))
                .collect::<Result<Vec<f64>>>()?;
            (Some("ln|A(t,x)|"), Some(v))
        }
        None => (None, None),
    };
    let mut rows = Vec::with_capacity(times.len());
    let mut csv = String::from("t,y,tau,crossings,value\n");
    for (i, &t) in times.iter().enumerate() {
        let e = flow.evolve_counted(x, t)?;
        let value = values.as_ref().map(|v| v[i]);
        let shown = value.map_or(String::new(), |v| format!("{v:?}"));
        writeln!(csv, "{t:?},{:?},{:?},{},{shown}", e.point.y, e.point.tau, e.crossings).expect("string write");
        rows.push(SimRow {
            t,
            y: e.point.y,
            tau: e.point.tau,
            crossings: e.crossings,
            value,
        });
    }
    let last = rows.last().map(|r| (r.t, r.crossings));
    let name = cocycle.as_ref().map_or_else(|| "none".to_string(), Cocycle::name);
    let mut r = report(Command::Simulate, h, x, name, &flow, &SimulateResult { value_kind: kind, rows });
    r.files.push(("trajectory.csv".into(), csv));
    if let Some((t, n)) = last {
        r.summary.push(format!("{n} roof crossings by t = {t}"));
    }
    Ok(r)
}

#[derive(Serialize)]
struct BirkhoffResult {
    dlim: DlimResult,
    space_average: Option<f64>,
    beta_minus_space_average: Option<f64>,
    /// α(T, x) = Σ_{n<⌊T⌋} α(1, Tⁿx) + α({T}, T^⌊T⌋x).
    decomposition_sum: f64,
    decomposition_remainder: f64,
    lattice: Vec<LatticeLimit>,
    /// Largest difference between lattice estimates.
    lattice_spread: f64,
    /// Largest lattice band.
    lattice_band: f64,
    lattice_consistent: bool,
}

fn birkhoff(ctx: &Context) -> Result<Report> {
    let cocycle = ctx.cocycle()?;
    let c = cocycle.additive()?;
    let flow = c.flow().clone();
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e4);
    let horizons = ctx.horizons(h)?;
    let set = match ctx.cfg.run.exceptional.unwrap_or(ExceptionalMode::None) {
        ExceptionalMode::None => TimeSet::empty(),
        ExceptionalMode::Theorem1 => {
            theorem1_exceptional_set(c.as_ref(), x, None, h.ceil() + 1.0, ctx.theorem1_options())?.set
        }
    };
    let dlim = dlim_estimate(c.as_ref(), x, &horizons, &set, ctx.band_limit())?;
    let space_average = c.known_space_average().transpose()?;
    let (sum, rem) = birkhoff_decompose(c.as_ref(), h, x)?;
    let spacings = ctx.cfg.run.lattice.clone().unwrap_or_else(|| {
        vec![1.0, std::f64::consts::SQRT_2, std::f64::consts::FRAC_PI_3]
    });
    let lattice = spacings
        .iter()
        .map(|&s| lattice_limit(c.as_ref(), x, s, ((h / s).floor() as u64).max(1)))
        .collect::<Result<Vec<_>>>()?;
    let est: Vec<f64> = lattice.iter().map(|l| l.estimate).collect();
    let spread = est.iter().copied().fold(f64::NEG_INFINITY, f64::max) - est.iter().copied().fold(f64::INFINITY, f64::min);
    let band = lattice.iter().map(|l| l.band).fold(0.0, f64::max);
    let mut lattice_csv = String::from("spacing,steps,estimate,band\n");
    for l in &lattice {
        writeln!(lattice_csv, "{:?},{},{:?},{:?}", l.spacing, l.steps, l.estimate, l.band).expect("string write");
    }
    let result = BirkhoffResult {
        beta_minus_space_average: space_average.map(|s| dlim.beta - s),
        space_average,
        decomposition_sum: sum,
        decomposition_remainder: rem,
        lattice,
        lattice_spread: spread,
        lattice_band: band,
        lattice_consistent: spread <= 2.0 * band,
        dlim,
    };
    let mut r = report(Command::Birkhoff, h, x, c.name(), &flow, &result);
    r.summary.push(format!("beta = {:.9} (band {:.3e})", result.dlim.beta, result.dlim.band));
    if let Some(s) = result.space_average {
        r.summary.push(format!("space average = {s:.9}"));
    }
    r.summary.push(format!(
        "lattice spread {:.3e} vs band {:.3e}: {}",
        spread,
        band,
        if result.lattice_consistent { "consistent" } else { "inconsistent" }
    ));
    r.files.push(("birkhoff_means.csv".into(), result.dlim.to_csv()));
    r.files.push(("lattice.csv".into(), lattice_csv));
    Ok(r)
}

#[derive(Serialize)]
struct DlimReport {
    dlim: DlimResult,
    construction: Option<ConstructionSummary>,
}

fn dlim(ctx: &Context) -> Result<Report> {
    let cocycle = ctx.cocycle()?;
    let c = cocycle.additive()?;
    let flow = c.flow().clone();
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e3);
    let horizons = ctx.horizons(h)?;
    let construction = match ctx.cfg.run.exceptional.unwrap_or(ExceptionalMode::Theorem1) {
        ExceptionalMode::None => None,
        ExceptionalMode::Theorem1 => Some(theorem1_exceptional_set(
            c.as_ref(),
            x,
            None,
            h.ceil() + 1.0,
            ctx.theorem1_options(),
        )?),
    };
    let set = construction.as_ref().map_or_else(TimeSet::empty, |e| e.set.clone());
    let dlim = dlim_estimate(c.as_ref(), x, &horizons, &set, ctx.band_limit())?;
    let result = DlimReport {
        construction: construction.as_ref().map(ConstructionSummary::from),
        dlim,
    };
    let mut r = report(Command::Dlim, h, x, c.name(), &flow, &result);
    r.summary.push(format!(
        "beta = {:.9}, band {:.3e}, {}",
        result.dlim.beta,
        result.dlim.band,
        if result.dlim.converged { "converged" } else { "not converged" }
    ));
    r.summary.push(format!("exceptional measure {:.6}", result.dlim.exceptional_measure));
    r.files.push(("dlim.csv".into(), result.dlim.to_csv()));
    r.files.push(("exceptional.txt".into(), set.to_text() + "\n"));
    Ok(r)
}

#[derive(Serialize)]
struct ExceptionalReport {
    construction: &'static str,
    phi: Option<String>,
    measure: f64,
    intervals: usize,
    levels: Option<Vec<LevelReport>>,
    truncated: bool,
    upper_density: DensityEstimate,
    growth: GrowthCurve,
    fit: Option<GrowthFit>,
}

fn exceptional(ctx: &Context) -> Result<Report> {
    let cocycle = ctx.cocycle()?;
    let c = cocycle.additive()?;
    let flow = c.flow().clone();
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e3);
    let horizons = ctx.horizons(h)?;
    let grid = log_grid(1f64.min(h), h, 40);
    let result = match &ctx.cfg.run.phi {
        Some(spec) => {
            let (phi, variant) = spec.build()?;
            let (set, growth) = phi_exceptional_set(c.as_ref(), x, &phi, h, variant, ctx.scan(ScanConfig::default()))?;
            let fit = if h > 100.0 {
                Some(fit_growth(&growth, &phi, 100.0, h)?)
            } else {
                None
            };
            ExceptionalReport {
                construction: "phi",
                phi: Some(phi.name().to_string()),
                measure: set.measure(),
                intervals: set.intervals().len(),
                levels: None,
                truncated: false,
                upper_density: set.upper_density(&horizons)?,
                growth,
                fit,
            }
        }
        None => {
            let e = theorem1_exceptional_set(c.as_ref(), x, None, h, ctx.theorem1_options())?;
            ExceptionalReport {
                construction: "theorem1",
                phi: None,
                measure: e.measure,
                intervals: e.set.intervals().len(),
                levels: Some(e.levels.clone()),
                truncated: e.truncated,
                upper_density: e.set.upper_density(&horizons)?,
                growth: GrowthCurve::from_set(&e.set, grid),
                fit: None,
            }
        }
    };
    let mut r = report(Command::Exceptional, h, x, c.name(), &flow, &result);
    r.summary.push(format!(
        "{} set: measure {:.6} in {} intervals, upper density {:.3e}",
        result.construction, result.measure, result.intervals, result.upper_density.value
    ));
    if let Some(f) = &result.fit {
        r.summary.push(format!(
            "growth fit: C = {:.4}, exponent {:.3}, max ratio {:.3} ({})",
            f.constant,
            f.exponent,
            f.max_ratio,
            if f.passed { "pass" } else { "fail" }
        ));
    }
    r.files.push(("growth.csv".into(), result.growth.to_csv()));
    r.files.push(("density.csv".into(), result.upper_density.to_csv()));
    Ok(r)
}

fn atkinson(ctx: &Context) -> Result<Report> {
    let cocycle = ctx.cocycle()?;
    let c = cocycle.additive()?;
    let flow = c.flow().clone();
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e4);
    let horizons = match ctx.cfg.run.horizons {
        Some(_) => ctx.horizons(h)?,
        None => decades_up_to(h),
    };
    let eps = ctx.cfg.run.eps.unwrap_or(0.5);
    let result: AtkinsonReport = atkinson_measure(c.as_ref(), x, eps, &horizons, ctx.scan(ScanConfig::default()))?;
    let mut csv = String::from("horizon,measure\n");
    for (t, m) in result.horizons.iter().zip(&result.measures) {
        writeln!(csv, "{t:?},{m:?}").expect("string write");
    }
    let mut r = report(Command::Atkinson, h, x, c.name(), &flow, &result);
    r.summary.push(format!(
        "return-set measures {:?}; final gain {:.3}{}",
        result.measures,
        result.final_gain_ratio,
        if result.saturated { " (saturated)" } else { "" }
    ));
    if let Some(w) = &result.warning {
        r.summary.push(format!("warning: {w}"));
    }
    r.files.push(("atkinson.csv".into(), csv));
    Ok(r)
}

#[derive(Serialize)]
struct KingmanReport {
    dlim: DlimResult,
    construction: ConstructionSummary,
    space_mean: Option<SpaceMeanCurve>,
    /// Top QR exponent, for matrix cocycles.
    top_exponent: Option<f64>,
    beta_minus_top_exponent: Option<f64>,
}

fn kingman(ctx: &Context) -> Result<Report> {
    let cocycle = ctx.cocycle()?;
    let s = cocycle.subadditive();
    let flow = cocycle.flow().clone();
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e4);
    let horizons = ctx.horizons(h)?;
    let d = KingmanOptions::default();
    let opts = KingmanOptions {
        scan: ctx.scan(d.scan),
        scale: ctx.cfg.run.scale.unwrap_or(d.scale),
        band_limit: ctx.band_limit(),
        space_mean: Some((
            ctx.cfg.run.samples.unwrap_or(400),
            ctx.seed,
            vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
        )),
        ..d
    };
    let k = kingman_dlim(s.as_ref(), x, &horizons, &opts)?;
    let top = match &cocycle {
        Cocycle::Matrix(a) => Some(lyapunov_spectrum_qr(a, x, h, QrOptions::default())?.spectrum[0]),
        Cocycle::Additive(_) => None,
    };
    let result = KingmanReport {
        beta_minus_top_exponent: top.map(|t| k.dlim.beta - t),
        top_exponent: top,
        construction: ConstructionSummary::from(&k.construction),
        space_mean: k.space_mean.clone(),
        dlim: k.dlim,
    };
    let mut r = report(Command::Kingman, h, x, s.name(), &flow, &result);
    r.summary.push(format!("beta = {:.9} (band {:.3e})", result.dlim.beta, result.dlim.band));
    if let Some(t) = top {
        r.summary.push(format!("top QR exponent {t:.9}"));
    }
    r.files.push(("kingman.csv".into(), result.dlim.to_csv()));
    if let Some(sm) = &result.space_mean {
        let mut csv = String::from("t,mean,sem\n");
        for ((t, m), e) in sm.times.iter().zip(&sm.means).zip(&sm.sems) {
            writeln!(csv, "{t:?},{m:?},{e:?}").expect("string write");
        }
        r.files.push(("space_mean.csv".into(), csv));
    }
    Ok(r)
}

#[derive(Serialize)]
struct Invariance {
    shift: f64,
    spectrum: Vec<f64>,
    max_deviation: f64,
}

#[derive(Serialize)]
struct MetReport {
    report: LyapunovReport,
    growth: Vec<GrowthCheck>,
    equivariance: Option<EquivarianceCheck>,
    invariance: Vec<Invariance>,
    /// Every shifted spectrum within twice the largest QR band.
    invariant_within_band: bool,
}

fn met(ctx: &Context) -> Result<Report> {
    let cocycle = ctx.cocycle()?;
    let a = cocycle.matrix()?;
    let flow = a.flow().clone();
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e4);
    let qr = QrOptions::default();
    let report_ = lyapunov_report(a, x, h, qr)?;
    let tol = default_group_tolerance(h);
    let filtration = oseledets_filtration(a, x, h, tol)?;
    let groups = filtration.grouping.exponents.len();
    let times: Vec<f64> = (1..=5).map(|k| h * k as f64 / 5.0).collect();
    let mut wanted = vec![0];
    if groups > 1 {
        wanted.push(groups - 1);
    }
    let growth = wanted
        .into_iter()
        .map(|g| filtration_growth(a, x, &filtration, g, &times))
        .collect::<Result<Vec<_>>>()?;
    let equivariance = if a.invertible_time() && groups > 1 {
        Some(splitting_equivariance(a, x, h, tol, &[1.0, 5.0, 20.0])?)
    } else {
        None
    };
    let q = lyapunov_spectrum_qr(a, x, h, qr)?;
    let mut invariance = Vec::new();
    for shift in [10.0, 100.0] {
        let y = flow.evolve(x, shift)?;
        let spectrum = lyapunov_spectrum_qr(a, y, h, qr)?.spectrum;
        let max_deviation = spectrum.iter().zip(&q.spectrum).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        invariance.push(Invariance {
            shift,
            spectrum,
            max_deviation,
        });
    }
    let band = q.band.iter().copied().fold(0.0, f64::max);
    let lambda_csv = matrix_csv(&lambda_matrix(a, x, h)?.matrix);
    let mut running = String::from("t");
    for i in 0..a.dim() {
        write!(running, ",chi{}", i + 1).expect("string write");
    }
    running.push('\n');
    for (t, row) in q.checkpoint_times.iter().zip(&q.running) {
        write!(running, "{t:?}").expect("string write");
        for v in row {
            write!(running, ",{v:?}").expect("string write");
        }
        running.push('\n');
    }
    let result = MetReport {
        invariant_within_band: invariance.iter().all(|i| i.max_deviation <= 2.0 * band),
        report: report_,
        growth,
        equivariance,
        invariance,
    };
    let mut r = report(Command::Met, h, x, a.name(), &flow, &result);
    r.summary.push(format!(
        "exponents {:?} with multiplicities {:?}",
        result.report.exponents, result.report.multiplicities
    ));
    for w in &result.report.warnings {
        r.summary.push(format!("warning: {w}"));
    }
    r.files.push(("lambda.csv".into(), lambda_csv));
    r.files.push(("running_spectrum.csv".into(), running));
    Ok(r)
}

#[derive(Serialize)]
struct TrackReport {
    /// Λ is estimated at this horizon, twice the largest regularity time.
    lambda_horizon: f64,
    regularity: RegularityCurve,
    /// Final regularity defect is below half the first.
    regularity_halved: bool,
    tracking: TrackingReport,
    tracking_decreasing: bool,
}

fn track(ctx: &Context) -> Result<Report> {
    let cocycle = ctx.cocycle()?;
    let a = cocycle.matrix()?;
    let flow = a.flow().clone();
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e4);
    let times = ctx.horizons(h)?;
    let lambda = lambda_matrix(a, x, 2.0 * h)?;
    let regularity = regularity_defect(a, x, &lambda, &times)?;
    let opts = KingmanOptions {
        space_mean: None,
        band_limit: ctx.band_limit(),
        ..KingmanOptions::default()
    };
    let tracking = geodesic_tracking(a, x, &decades_up_to(h), &opts)?;
    let first = regularity.defect[0];
    let last = regularity.defect[regularity.defect.len() - 1];
    let mut reg_csv = String::from("t,forward,inverse,defect\n");
    for i in 0..regularity.times.len() {
        writeln!(
            reg_csv,
            "{:?},{:?},{:?},{:?}",
            regularity.times[i], regularity.forward[i], regularity.inverse[i], regularity.defect[i]
        )
        .expect("string write");
    }
    let mut track_csv = String::from("horizon,defect\n");
    for (t, d) in tracking.horizons.iter().zip(&tracking.defects) {
        writeln!(track_csv, "{t:?},{d:?}").expect("string write");
    }
    let result = TrackReport {
        lambda_horizon: 2.0 * h,
        regularity_halved: regularity.times.len() > 1 && last < 0.5 * first,
        tracking_decreasing: tracking.defects.windows(2).all(|w| w[1] < w[0]),
        regularity,
        tracking,
    };
    let mut r = report(Command::Track, h, x, a.name(), &flow, &result);
    r.summary.push(format!("regularity defect {first:.3e} -> {last:.3e}"));
    if result.tracking.drift_free {
        r.summary.push("drift-free orbit".into());
    } else {
        r.summary.push(format!(
            "drift theta = {:.6}, tracking defects {:?}",
            result.tracking.theta, result.tracking.defects
        ));
    }
    r.files.push(("regularity.csv".into(), reg_csv));
    r.files.push(("tracking.csv".into(), track_csv));
    Ok(r)
}

#[derive(Serialize)]
struct Ex1Report {
    construction: ConstructionSummary,
    tail_bounds_hold: bool,
    dlim: DlimResult,
    sup_probe: SupProbe,
    /// The sampled full-time sup of |α(t, x)|/t exceeds 10.
    divergent: bool,
}

fn ex1(ctx: &Context) -> Result<Report> {
    let c = Coboundary::example1();
    let flow = c.flow().clone();
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e3);
    let horizons = ctx.horizons(h)?;
    let e = theorem1_exceptional_set(&c, x, None, h.ceil() + 1.0, ctx.theorem1_options())?;
    let dlim = dlim_estimate(&c, x, &horizons, &e.set, ctx.band_limit())?;
    let windows: Vec<u64> = [1u64, 3, 10, 30, 100].into_iter().filter(|n| (*n as f64) < h).collect();
    let sup_probe = full_time_sup_probe(&c, x, &windows, 1e-2, 6)?;
    let result = Ex1Report {
        construction: ConstructionSummary::from(&e),
        tail_bounds_hold: e.levels.iter().all(|l| l.tail_measure <= l.tail_bound),
        divergent: sup_probe.sup.iter().any(|s| *s > 10.0),
        dlim,
        sup_probe,
    };
    let mut r = report(Command::Counterexample(Counterexample::Ex1), h, x, c.name(), &flow, &result);
    r.summary.push(format!(
        "dlim = {:.3e} (band {:.3e}) off a set of measure {:.6}",
        result.dlim.beta, result.dlim.band, result.construction.measure
    ));
    r.summary.push(format!("sup probe {:?}", result.sup_probe.sup));
    r.files.push(("exceptional.txt".into(), e.set.to_text() + "\n"));
    r.files.push(("dlim.csv".into(), result.dlim.to_csv()));
    Ok(r)
}

#[derive(Serialize)]
struct Ex2Report {
    spikes_checked: usize,
    /// max |α(n, (y, 0)) − √n| over integer n ≤ f(y).
    spike_max_error: f64,
    random_times: usize,
    nonzero_at_random_times: usize,
    sup_integral: Vec<SupIntegralEstimate>,
    /// Last estimate over the first.
    growth_ratio: f64,
    /// Strictly increasing, more than doubling as the cutoff shrinks.
    divergent_sup_integral: bool,
    dlim: DlimResult,
}

fn ex2(ctx: &Context) -> Result<Report> {
    let flow = SuspensionFlow::example2();
    let c = example2_cocycle(flow.clone())?;
    let x = ctx.point(&flow)?;
    let h = ctx.horizon(1e4);
    let horizons = ctx.horizons(h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);

    let (mut checked, mut worst) = (0usize, 0.0f64);
    for _ in 0..16 {
        let y = rng.random::<f64>() * 0.1 + 1e-3;
        let top = flow.roof().eval(y).floor().min(50.0) as u64;
        for n in 1..=top {
            let v = c.eval_forward(n as f64, FiberPoint::new(y, 0.0))?;
            worst = worst.max((v - (n as f64).sqrt()).abs());
            checked += 1;
        }
    }
    let count = ctx.cfg.run.samples.unwrap_or(100_000);
    let pts = sample_mu(&flow, ctx.seed.wrapping_add(1), count)?;
    let mut nonzero = 0usize;
    for p in pts {
        let t = loop {
            let t = rng.random::<f64>() * 10.0;
            if (t - t.round()).abs() > 1e-6 && (p.tau + t - (p.tau + t).round()).abs() > 1e-6 {
                break t;
            }
        };
        if c.eval_forward(t, p)? != 0.0 {
            nonzero += 1;
        }
    }
    let cutoffs = ctx.cfg.run.cutoffs.clone().unwrap_or_else(|| vec![1e-2, 1e-4]);
    let sup_integral = cutoffs
        .iter()
        .enumerate()
        .map(|(i, &cut)| example2_sup_integral(&c, cut, 16, 256, ctx.seed.wrapping_add(2 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = sup_integral.iter().map(|s| s.value).collect();
    let growth_ratio = values[values.len() - 1] / values[0];
    let dlim = dlim_estimate(&c, x, &horizons, &TimeSet::empty(), ctx.band_limit())?;
    let result = Ex2Report {
        spikes_checked: checked,
        spike_max_error: worst,
        random_times: count,
        nonzero_at_random_times: nonzero,
        divergent_sup_integral: values.windows(2).all(|w| w[1] > w[0]) && growth_ratio > 2.0,
        growth_ratio,
        sup_integral,
        dlim,
    };
    let mut r = report(Command::Counterexample(Counterexample::Ex2), h, x, c.name(), &flow, &result);
    r.summary.push(format!(
        "spikes exact to {:.1e} over {checked} integer times; {nonzero} of {count} random times nonzero",
        worst
    ));
    r.summary.push(format!("sup-integral estimates {values:?}, ratio {growth_ratio:.4}"));
    r.summary.push(format!("dlim = {}", result.dlim.beta));
    let mut csv = String::from("cutoff,value,std_error\n");
    for s in &result.sup_integral {
        writeln!(csv, "{:?},{:?},{:?}", s.cutoff, s.value, s.std_error).expect("string write");
    }
    r.files.push(("sup_integral.csv".into(), csv));
    Ok(r)
}
