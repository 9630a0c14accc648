//! Small numerical kernels shared by the flow, cocycle and estimator modules.

/// Compensated (Kahan–Babuška) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }

    /// Leading sum and its compensation term.
    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }
}

/// Error-free sum: returns (s, e) with s = fl(a + b) and a + b = s + e exactly.
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

// 8-point Gauss–Legendre nodes and weights on [-1, 1].
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Single 8-point Gauss–Legendre panel on [a, b].
pub fn gauss_legendre8<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (&x, &w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Adaptive bisection on top of [`gauss_legendre8`]. Returns `None` when the
/// panel estimates fail to agree before `max_depth` halvings.
pub fn adaptive_gl8<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Option<f64> {
    if b <= a {
        return Some(0.0);
    }
    let whole = gauss_legendre8(f, a, b);
    adaptive_step(f, a, b, whole, tol, max_depth)
}

fn adaptive_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let left = gauss_legendre8(f, a, m);
    let right = gauss_legendre8(f, m, b);
    let split = left + right;
    if !split.is_finite() {
        return None;
    }
    if (split - whole).abs() <= tol.max(1e-15 * split.abs()) {
        return Some(split);
    }
    if depth == 0 {
        return None;
    }
    let l = adaptive_step(f, a, m, left, 0.5 * tol, depth - 1)?;
    let r = adaptive_step(f, m, b, right, 0.5 * tol, depth - 1)?;
    Some(l + r)
}

/// Median of a slice (NaNs must be filtered by the caller).
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

pub fn interquartile_range(values: &[f64]) -> Option<f64> {
    Some(quantile(values, 0.75)? - quantile(values, 0.25)?)
}

/// Mean and standard error of the mean.
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut acc = KahanSum::new();
    values.iter().for_each(|&v| acc.add(v));
    let mean = acc.total() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Geometric grid from `start` to `end` (both included) with `points` nodes.
pub fn log_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    assert!(start > 0.0 && end >= start && points >= 1);
    if points == 1 {
        return vec![end];
    }
    let (ls, le) = (start.ln(), end.ln());
    (0..points)
        .map(|i| {
            if i + 1 == points {
                end
            } else {
                (ls + (le - ls) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// Geometric grid `start, start*ratio, ...` not exceeding `end`.
pub fn ratio_grid(start: f64, end: f64, ratio: f64) -> Vec<f64> {
    assert!(start > 0.0 && ratio > 1.0);
    let mut out = Vec::new();
    let mut t = start;
    while t <= end * (1.0 + 1e-12) {
        out.push(t);
        t *= ratio;
    }
    out
}

/// Index where the final third of a grid of length `n` starts.
pub fn final_third_start(n: usize) -> usize {
    n - n.div_ceil(3)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl8_is_exact_for_degree_15() {
        let mut f = |x: f64| x.powi(15) + 3.0 * x.powi(4);
        let got = gauss_legendre8(&mut f, 0.0, 2.0);
        let exact = 2f64.powi(16) / 16.0 + 3.0 * 2f64.powi(5) / 5.0;
        assert!((got - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let mut f = |x: f64| (40.0 * x).sin();
        let got = adaptive_gl8(&mut f, 0.0, 3.0, 1e-12, 30).unwrap();
        let exact = (1.0 - (120.0f64).cos()) / 40.0;
        assert!((got - exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reports_singularity() {
        let mut g = |x: f64| if x < 0.5 { f64::INFINITY } else { 1.0 };
        assert!(adaptive_gl8(&mut g, 0.0, 1.0, 1e-12, 4).is_none());
    }

    #[test]
    fn kahan_beats_naive() {
        let mut k = KahanSum::new();
        let mut naive = 0.0;
        for _ in 0..1_000_000 {
            k.add(0.1);
            naive += 0.1;
        }
        assert!((k.total() - 100_000.0).abs() < 1e-9);
        assert!((naive - 100_000.0f64).abs() > (k.total() - 100_000.0).abs());
    }

    #[test]
    fn quantiles() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(median(&v), Some(3.0));
        assert_eq!(interquartile_range(&v), Some(2.0));
        assert_eq!(final_third_start(3), 2);
        assert_eq!(final_third_start(7), 4);
        assert_eq!(final_third_start(1), 0);
    }

    #[test]
    fn grids() {
        let g = log_grid(10.0, 1000.0, 3);
        assert!((g[1] - 100.0).abs() < 1e-9);
        assert_eq!(*g.last().unwrap(), 1000.0);
        assert_eq!(ratio_grid(100.0, 10_000.0, 2.0).len(), 7);
    }
}
