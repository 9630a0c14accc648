//! Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit
//! if any failed. Runs with `cargo test -p cocycle-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command as Proc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cocycle_core::cocycle::{
    example2_cocycle, example2_sup_integral, identity_defect, matrix_identity_defect, AdditiveCocycle, Coboundary,
    ConstantRate, FiberCocycle, FiberData, IntegralCocycle, LogNormCocycle, Observable, Potential,
};
use cocycle_core::density::{
    atkinson_measure, dlim_estimate, fit_growth, full_time_sup_probe, horizons_up_to, kingman_dlim, lattice_limit,
    phi_exceptional_set, theorem1_exceptional_set, KingmanOptions, PhiFunction, PhiVariant, ScanConfig,
    Theorem1Options, DEFAULT_BAND_LIMIT,
};
use cocycle_core::flow::sample_mu;
use cocycle_core::met::{
    default_group_tolerance, filtration_growth, geodesic_tracking, lambda_matrix, lyapunov_report,
    lyapunov_spectrum_qr, oseledets_filtration, regularity_defect, splitting_equivariance, QrOptions,
};
use cocycle_core::{FiberPoint, MatrixCocycle, Result, SuspensionFlow, TimeSet};

type Outcome = Result<(bool, String)>;
type Check = (&'static str, fn() -> Outcome);

fn x0() -> FiberPoint {
    FiberPoint::new(0.3, 0.45)
}

fn sl2() -> Result<MatrixCocycle> {
    MatrixCocycle::random_sl2(SuspensionFlow::golden_sine(), 2, 8)
}

fn triples(flow: &SuspensionFlow, seed: u64, span: f64) -> Result<Vec<(f64, f64, FiberPoint)>> {
    let pts = sample_mu(flow, seed, 1000)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pts
        .into_iter()
        .map(|x| (rng.random::<f64>() * span, rng.random::<f64>() * span, x))
        .collect())
}

fn identities() -> Outcome {
    let sine = SuspensionFlow::golden_sine();
    let trig = Observable::Trig {
        offset: 0.2,
        cos_amp: 1.0,
        sin_amp: -0.3,
        freq: 2.0,
        tau_coeff: 0.5,
    };
    let additive: Vec<Box<dyn AdditiveCocycle>> = vec![
        Box::new(ConstantRate::new(sine.clone(), 0.7)),
        Box::new(IntegralCocycle::new(sine.clone(), trig)),
        Box::new(Coboundary::example1()),
        Box::new(Coboundary::new(sine.clone(), Potential::FiberTop)),
        Box::new(Coboundary::new(sine.clone(), Potential::Bounded { amp: 0.8 })),
        Box::new(Coboundary::new(sine.clone(), Potential::Constant(2.0))),
        Box::new(FiberCocycle::new(sine.clone(), FiberData::linear(0.4))?),
        Box::new(FiberCocycle::new(sine.clone(), FiberData::sin_times_y())?),
        Box::new(example2_cocycle(SuspensionFlow::example2())?),
    ];
    let mut worst_add = 0.0f64;
    for (i, c) in additive.iter().enumerate() {
        for (t, s, x) in triples(c.flow(), 100 + i as u64, 100.0)? {
            worst_add = worst_add.max(identity_defect(c.as_ref(), t, s, x)?);
        }
    }
    let matrices = [
        sl2()?,
        MatrixCocycle::constant(sine.clone(), DMatrix::from_row_slice(2, 2, &[1.1, 0.3, -0.2, 0.9]))?,
        MatrixCocycle::diagonal_exp(sine.clone(), vec![0.4, 0.0, -0.3])?,
        MatrixCocycle::scalar_exp(sine.clone(), 2, 0.25)?,
        MatrixCocycle::identity(sine.clone(), 3)?,
    ];
    let mut worst_mat = 0.0f64;
    for (i, a) in matrices.iter().enumerate() {
        for (t, s, x) in triples(a.flow(), 200 + i as u64, 100.0)? {
            worst_mat = worst_mat.max(matrix_identity_defect(a, t, s, x)?);
        }
    }
    Ok((
        worst_add < 1e-9 && worst_mat < 1e-8,
        format!(
            "{} additive and {} matrix constructors, max defects {worst_add:.2e} / {worst_mat:.2e}",
            additive.len(),
            matrices.len()
        ),
    ))
}

fn theorem1() -> Outcome {
    let c = Coboundary::example1();
    let x = x0();
    let e = theorem1_exceptional_set(&c, x, None, 1e3 + 1.0, Theorem1Options::default())?;
    let tails = e.levels.iter().all(|l| l.tail_measure <= l.tail_bound);
    let d = dlim_estimate(&c, x, &horizons_up_to(100.0, 1e3), &e.set, DEFAULT_BAND_LIMIT)?;
    let probe = full_time_sup_probe(&c, x, &[1, 3, 10, 30, 100], 1e-2, 4)?;
    let witness = probe.sup.iter().any(|s| *s > 10.0);
    let ok = e.measure.is_finite() && tails && d.beta.abs() < 1e-12 && d.band < 1e-2 && witness;
    Ok((
        ok,
        format!(
            "measure {:.4} over {} levels, beta {:.1e}, band {:.1e}, sup probe {:?}",
            e.measure,
            e.levels.len(),
            d.beta,
            d.band,
            probe.sup.iter().map(|s| format!("{s:.1}")).collect::<Vec<_>>()
        ),
    ))
}

fn birkhoff() -> Outcome {
    let g = Observable::Trig {
        offset: 0.2,
        cos_amp: 1.0,
        sin_amp: 0.0,
        freq: 1.0,
        tau_coeff: 0.5,
    };
    let c = IntegralCocycle::new(SuspensionFlow::golden_sine(), g);
    let x = x0();
    let d = dlim_estimate(&c, x, &horizons_up_to(100.0, 1e4), &TimeSet::empty(), DEFAULT_BAND_LIMIT)?;
    let avg = c.space_average()?;
    let lat = [1.0, std::f64::consts::SQRT_2, std::f64::consts::FRAC_PI_3]
        .iter()
        .map(|&h| lattice_limit(&c, x, h, (1e4 / h) as u64))
        .collect::<Result<Vec<_>>>()?;
    let band = lat.iter().map(|l| l.band).fold(0.0, f64::max);
    let spread = lat.iter().map(|l| l.estimate).fold(f64::NEG_INFINITY, f64::max)
        - lat.iter().map(|l| l.estimate).fold(f64::INFINITY, f64::min);
    let err = (d.beta - avg).abs();
    Ok((
        err < 1e-3 && spread <= 2.0 * band,
        format!("|beta - space average| = {err:.2e}, lattice spread {spread:.2e} vs band {band:.2e}"),
    ))
}

/// Exact ∫ sup over the fiber above y of |α| dy, for y ≥ cutoff.
fn example2_oracle(cutoff: f64) -> f64 {
    let mut total = 0.0;
    let mut partial = 0.0;
    for n in 1u64.. {
        partial += (n as f64).sqrt();
        let lo = ((n + 1) as f64).powf(-1.5).max(cutoff);
        let hi = (n as f64).powf(-1.5).min(1.0);
        if hi <= cutoff {
            break;
        }
        if hi > lo {
            total += partial * (hi - lo);
        }
    }
    total
}

fn example2() -> Outcome {
    let flow = SuspensionFlow::example2();
    let c = example2_cocycle(flow.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut spike_err = 0.0f64;
    for _ in 0..16 {
        let y = 1e-3 + 0.1 * rng.random::<f64>();
        let top = flow.roof().eval(y).floor().min(50.0) as u64;
        for n in 1..=top {
            let v = c.eval_forward(n as f64, FiberPoint::new(y, 0.0))?;
            spike_err = spike_err.max((v - (n as f64).sqrt()).abs());
        }
    }
    let mut nonzero = 0;
    for p in sample_mu(&flow, 5, 100_000)? {
        let t = 10.0 * rng.random::<f64>();
        let end = p.tau + t;
        if (t - t.round()).abs() < 1e-9 || (end - end.round()).abs() < 1e-9 {
            continue;
        }
        if c.eval_forward(t, p)? != 0.0 {
            nonzero += 1;
        }
    }
    let wide = example2_sup_integral(&c, 1e-2, 16, 512, 6)?;
    let narrow = example2_sup_integral(&c, 1e-4, 16, 512, 7)?;
    let (o1, o2) = (example2_oracle(1e-2), example2_oracle(1e-4));
    let near_oracle = (wide.value - o1).abs() <= 4.0 * wide.std_error.max(1e-6)
        && (narrow.value - o2).abs() <= 4.0 * narrow.std_error.max(1e-6);
    let d = dlim_estimate(&c, x0(), &horizons_up_to(100.0, 1e4), &TimeSet::empty(), DEFAULT_BAND_LIMIT)?;
    let ratio = narrow.value / wide.value;
    let ok = spike_err == 0.0 && nonzero == 0 && narrow.value > wide.value && ratio > 2.0 && d.beta == 0.0;
    Ok((
        ok,
        format!(
            "spike error {spike_err:.1e}, {nonzero} nonzero random values, sup-integral {:.4} -> {:.4} \
             (exact {o1:.4} -> {o2:.4}{}), ratio {ratio:.4}, dlim {}",
            wide.value,
            narrow.value,
            if near_oracle { "" } else { ", off oracle" },
            d.beta
        ),
    ))
}

fn phi_growth() -> Outcome {
    let c = Coboundary::example1();
    let phi = PhiFunction::power(0.25)?;
    let (set, curve) = phi_exceptional_set(&c, x0(), &phi, 1e4, PhiVariant::NOverPhi, ScanConfig::default())?;
    let fit = fit_growth(&curve, &phi, 100.0, 1e4)?;
    Ok((
        fit.passed,
        format!(
            "measure {:.3}, C = {:.4}, max ratio {:.3} (limit 1.2)",
            set.measure(),
            fit.constant,
            fit.max_ratio
        ),
    ))
}

fn atkinson() -> Outcome {
    let flow = SuspensionFlow::golden_sine();
    let hs = [1e2, 1e3, 1e4];
    let trig = |offset| Observable::Trig {
        offset,
        cos_amp: 1.0,
        sin_amp: 0.0,
        freq: 1.0,
        tau_coeff: 0.0,
    };
    let zero = IntegralCocycle::new(flow.clone(), trig(0.0));
    let r = atkinson_measure(&zero, x0(), 0.5, &hs, ScanConfig::default())?;
    let control = IntegralCocycle::new(flow, trig(0.2));
    let rc = atkinson_measure(&control, x0(), 0.5, &hs, ScanConfig::default())?;
    let ok = r.increasing && r.final_gain_ratio >= 0.1 && !r.saturated && rc.saturated && rc.warning.is_some();
    Ok((
        ok,
        format!(
            "zero mean: {:?}, gain {:.2}; control saturated = {}, flagged = {}",
            r.measures.iter().map(|m| format!("{m:.1}")).collect::<Vec<_>>(),
            r.final_gain_ratio,
            rc.saturated,
            rc.warning.is_some()
        ),
    ))
}

fn kingman() -> Outcome {
    let a = sl2()?;
    let x = x0();
    let k = kingman_dlim(&LogNormCocycle::new(a.clone()), x, &horizons_up_to(100.0, 1e4), &KingmanOptions::default())?;
    let top = lyapunov_spectrum_qr(&a, x, 1e4, QrOptions::default())?.spectrum[0];
    let sm = k.space_mean.as_ref().expect("space mean requested");
    let diff = (k.dlim.beta - top).abs();
    Ok((
        diff < 1e-2 && sm.decreasing,
        format!(
            "beta {:.5} vs top exponent {top:.5} (diff {diff:.1e}); space means {:?} decreasing = {}",
            k.dlim.beta,
            sm.means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>(),
            sm.decreasing
        ),
    ))
}

fn met() -> Outcome {
    let x = x0();
    let t = 1e4;
    let rates = vec![0.7, 0.1, -0.5];
    let diag = MatrixCocycle::diagonal_exp(SuspensionFlow::golden_sine(), rates.clone())?;
    let dr = lyapunov_report(&diag, x, t, QrOptions::default())?;
    let diag_err = dr.spectrum.iter().zip(&rates).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);

    let a = sl2()?;
    let r = lyapunov_report(&a, x, t, QrOptions::default())?;
    let det = (r.spectrum[0] + r.spectrum[1]).abs();
    let qr_svd = r.spectrum.iter().zip(&r.svd_spectrum).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let tol = default_group_tolerance(t);
    let f = oseledets_filtration(&a, x, t, tol)?;
    let times: Vec<f64> = (1..=5).map(|k| t * k as f64 / 5.0).collect();
    let growth = (0..f.grouping.exponents.len())
        .map(|g| Ok(filtration_growth(&a, x, &f, g, &times)?.defect))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let equi = splitting_equivariance(&a, x, t, tol, &[1.0, 5.0, 20.0])?.defects.into_iter().fold(0.0, f64::max);
    let q = lyapunov_spectrum_qr(&a, x, t, QrOptions::default())?;
    let band = q.band.iter().copied().fold(0.0, f64::max);
    let mut shift_dev = 0.0f64;
    for s in [10.0, 100.0] {
        let y = a.flow().evolve(x, s)?;
        let qs = lyapunov_spectrum_qr(&a, y, t, QrOptions::default())?;
        shift_dev = shift_dev.max(qs.spectrum.iter().zip(&q.spectrum).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max));
    }
    let ok = diag_err < 1e-9 && det < 1e-6 && qr_svd < 1e-3 && growth < 1e-2 && equi < 1e-2 && shift_dev <= 2.0 * band;
    Ok((
        ok,
        format!(
            "diagonal {diag_err:.1e}, det {det:.1e}, qr/svd {qr_svd:.1e}, growth {growth:.1e}, \
             equivariance {equi:.1e}, shift {shift_dev:.1e} vs 2x band {:.1e}",
            2.0 * band
        ),
    ))
}

fn regularity() -> Outcome {
    let x = x0();
    let a = sl2()?;
    let times = horizons_up_to(100.0, 1e4);
    let reg = regularity_defect(&a, x, &lambda_matrix(&a, x, 2e4)?, &times)?;
    let (first, last) = (reg.defect[0], reg.defect[reg.defect.len() - 1]);
    let opts = KingmanOptions {
        space_mean: None,
        ..KingmanOptions::default()
    };
    let tr = geodesic_tracking(&a, x, &[1e2, 1e3, 1e4], &opts)?;
    let tracking_down = tr.defects.windows(2).all(|w| w[1] < w[0]);

    let s = MatrixCocycle::scalar_exp(SuspensionFlow::golden_sine(), 2, 0.3)?;
    let sreg = regularity_defect(&s, x, &lambda_matrix(&s, x, 2e4)?, &times)?;
    let str_ = geodesic_tracking(&s, x, &[1e2, 1e3, 1e4], &opts)?;
    // Zero up to rounding: θ is itself an estimate and e^(at) is built from rounded factors.
    let scalar = sreg.defect.iter().chain(&str_.defects).fold(0.0f64, |m, d| m.max(d.abs()));
    Ok((
        last < 0.5 * first && tracking_down && !str_.drift_free && scalar <= 1e-12,
        format!(
            "regularity {first:.2e} -> {last:.2e}, tracking {:?}, scalar cocycle max defect {scalar:.1e}",
            tr.defects.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()
        ),
    ))
}

fn run_cli(args: &[&str], out: &Path) -> std::io::Result<bool> {
    let status = Proc::new(env!("CARGO_BIN_EXE_cocycle-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()?
        .status;
    Ok(status.success())
}

/// Every file in the directory, with the JSON timestamp line dropped.
fn snapshot(dir: &Path) -> std::io::Result<Vec<(String, String)>> {
    let mut files: Vec<(String, String)> = std::fs::read_dir(dir)?
        .map(|e| {
            let p = e?.path();
            let body: String = std::fs::read_to_string(&p)?
                .lines()
                .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
                .map(|l| format!("{l}\n"))
                .collect();
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), body))
        })
        .collect::<std::io::Result<_>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let root = std::env::temp_dir().join(format!("cocycle-acceptance-{}", std::process::id()));
    let cases: [(&[&str], &str, &str); 10] = [
        (&["simulate"], "simulate.toml", "100"),
        (&["birkhoff"], "birkhoff.toml", "2000"),
        (&["dlim"], "dlim.toml", "500"),
        (&["exceptional"], "exceptional.toml", "500"),
        (&["atkinson"], "atkinson.toml", "1000"),
        (&["kingman"], "kingman.toml", "1000"),
        (&["met"], "met.toml", "1000"),
        (&["track"], "track.toml", "1000"),
        (&["counterexample", "ex1"], "ex1.toml", "300"),
        (&["counterexample", "ex2"], "ex2.toml", "1000"),
    ];
    let mut bad = Vec::new();
    let mut files = 0;
    for (i, (cmd, cfg, horizon)) in cases.iter().enumerate() {
        let cfg = configs.join(cfg);
        let mut args: Vec<&str> = cmd.to_vec();
        args.extend(["--config", cfg.to_str().unwrap(), "--horizon", horizon]);
        let (a, b) = (root.join(format!("{i}a")), root.join(format!("{i}b")));
        let same = (|| -> std::io::Result<bool> {
            if !(run_cli(&args, &a)? && run_cli(&args, &b)?) {
                return Ok(false);
            }
            let (sa, sb) = (snapshot(&a)?, snapshot(&b)?);
            files += sa.len();
            Ok(sa == sb)
        })()
        .unwrap_or(false);
        if !same {
            bad.push(cmd.join(" "));
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} subcommands, {files} output files identical across two runs", cases.len())
        } else {
            format!("differing or failing: {}", bad.join(", "))
        },
    ))
}

fn main() {
    let criteria: [Check; 10] = [
        ("cocycle identities", identities),
        ("exceptional set and dlim for Example 1", theorem1),
        ("Birkhoff consistency", birkhoff),
        ("Example 2", example2),
        ("phi-set growth", phi_growth),
        ("Atkinson recurrence", atkinson),
        ("Kingman limit", kingman),
        ("multiplicative ergodic theorem", met),
        ("regularity and tracking", regularity),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {detail} [{:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
