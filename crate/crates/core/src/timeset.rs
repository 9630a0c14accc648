//! Finite unions of half-open intervals on the time axis [0, ∞).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{final_third_start, KahanSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        !(self.end > self.start)
    }
}

/// Canonical form: sorted, pairwise disjoint, non-touching [a, b) with
/// 0 ≤ a < b. Touching or overlapping inputs are merged on construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Interval>", from = "Vec<Interval>")]
pub struct TimeSet {
    intervals: Vec<Interval>,
}

impl From<TimeSet> for Vec<Interval> {
    fn from(ts: TimeSet) -> Self {
        ts.intervals
    }
}

impl From<Vec<Interval>> for TimeSet {
    fn from(v: Vec<Interval>) -> Self {
        TimeSet::from_intervals(v)
    }
}

impl TimeSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn interval(start: f64, end: f64) -> Self {
        Self::from_intervals(vec![Interval::new(start, end)])
    }

    pub fn from_pairs<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Self {
        Self::from_intervals(pairs.into_iter().map(|(a, b)| Interval::new(a, b)).collect())
    }

    pub fn from_intervals(mut raw: Vec<Interval>) -> Self {
        raw.retain(|iv| !iv.start.is_nan() && !iv.end.is_nan());
        for iv in raw.iter_mut() {
            iv.start = iv.start.max(0.0);
        }
        raw.retain(|iv| !iv.is_empty());
        raw.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut merged: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match merged.last_mut() {
                Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        let mut acc = KahanSum::new();
        self.intervals.iter().for_each(|iv| acc.add(iv.len()));
        acc.total()
    }

    pub fn sup(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.end)
    }

    pub fn contains(&self, t: f64) -> bool {
        let idx = self.intervals.partition_point(|iv| iv.end <= t);
        self.intervals.get(idx).is_some_and(|iv| iv.start <= t)
    }

    pub fn union(&self, other: &TimeSet) -> TimeSet {
        let mut all = Vec::with_capacity(self.intervals.len() + other.intervals.len());
        all.extend_from_slice(&self.intervals);
        all.extend_from_slice(&other.intervals);
        TimeSet::from_intervals(all)
    }

    pub fn intersect(&self, other: &TimeSet) -> TimeSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].start.max(b[j].start);
            let hi = a[i].end.min(b[j].end);
            if lo < hi {
                out.push(Interval::new(lo, hi));
            }
            if a[i].end < b[j].end {
                i += 1;
            } else {
                j += 1;
            }
        }
        TimeSet { intervals: out }
    }

    /// Intersection with [0, t).
    pub fn restrict(&self, t: f64) -> TimeSet {
        self.window(0.0, t)
    }

    /// Intersection with [a, b).
    pub fn window(&self, a: f64, b: f64) -> TimeSet {
        if !(b > a) {
            return TimeSet::empty();
        }
        self.intersect(&TimeSet::interval(a, b))
    }

    /// λ(ts ∩ [0, t)).
    pub fn measure_up_to(&self, t: f64) -> f64 {
        let mut acc = KahanSum::new();
        for iv in &self.intervals {
            if iv.start >= t {
                break;
            }
            acc.add(iv.end.min(t) - iv.start);
        }
        acc.total()
    }

    /// λ(ts ∩ [k, ∞)).
    pub fn tail_measure(&self, k: f64) -> f64 {
        let mut acc = KahanSum::new();
        for iv in self.intervals.iter().rev() {
            if iv.end <= k {
                break;
            }
            acc.add(iv.end - iv.start.max(k));
        }
        acc.total()
    }

    /// Finite-horizon proxy for the upper density limsup λ(ts ∩ [0,t))/t.
    pub fn upper_density(&self, horizons: &[f64]) -> Result<DensityEstimate> {
        if horizons.is_empty() {
            return Err(Error::arg("upper_density needs at least one horizon"));
        }
        if horizons.windows(2).any(|w| !(w[1] > w[0])) || !(horizons[0] > 0.0) {
            return Err(Error::arg("horizons must be positive and strictly increasing"));
        }
        let ratios: Vec<f64> = horizons
            .iter()
            .map(|&t| (self.measure_up_to(t) / t).clamp(0.0, 1.0))
            .collect();
        let value = ratios[final_third_start(ratios.len())..]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        Ok(DensityEstimate {
            value,
            horizons: horizons.to_vec(),
            ratios,
        })
    }

    /// Shift every interval by `offset` (results below 0 are clipped).
    pub fn shifted(&self, offset: f64) -> TimeSet {
        TimeSet::from_intervals(
            self.intervals
                .iter()
                .map(|iv| Interval::new(iv.start + offset, iv.end + offset))
                .collect(),
        )
    }

    /// Line-based text form, one "a b" pair per line.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        text.parse()
    }
}

impl fmt::Display for TimeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for iv in &self.intervals {
            writeln!(f, "{:?} {:?}", iv.start, iv.end)?;
        }
        Ok(())
    }
}

impl FromStr for TimeSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut raw = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |p: Option<&str>| -> Result<f64> {
                p.ok_or_else(|| Error::arg(format!("line {}: expected \"a b\"", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::arg(format!("line {}: {e}", lineno + 1)))
            };
            let a = parse(parts.next())?;
            let b = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::arg(format!("line {}: trailing fields", lineno + 1)));
            }
            if !(a >= 0.0 && b > a && b.is_finite()) {
                return Err(Error::arg(format!(
                    "line {}: need 0 <= a < b < inf, got {a} {b}",
                    lineno + 1
                )));
            }
            raw.push(Interval::new(a, b));
        }
        Ok(TimeSet::from_intervals(raw))
    }
}

/// Ratios λ(τ ∩ [0,t))/t per horizon and their final-third maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub horizons: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl DensityEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,ratio\n");
        for (h, r) in self.horizons.iter().zip(&self.ratios) {
            out.push_str(&format!("{h:?},{r:?}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn measures() {
        assert_eq!(TimeSet::empty().measure(), 0.0);
        assert_eq!(TimeSet::from_pairs([(0.0, 1.0), (2.0, 3.5)]).measure(), 2.5);
        let u = TimeSet::interval(0.0, 2.0).union(&TimeSet::interval(1.0, 3.0));
        assert_eq!(u.measure(), 3.0);
        assert_eq!(u.intervals().len(), 1);
    }

    #[test]
    fn touching_intervals_merge() {
        let ts = TimeSet::from_pairs([(1.0, 2.0), (0.0, 1.0), (5.0, 6.0)]);
        assert_eq!(ts.intervals(), &[Interval::new(0.0, 2.0), Interval::new(5.0, 6.0)]);
    }

    #[test]
    fn set_algebra_examples() {
        assert!(TimeSet::interval(0.0, 1.0).intersect(&TimeSet::interval(1.0, 2.0)).is_empty());
        assert_eq!(TimeSet::from_pairs([(0.0, 1.0), (5.0, 7.0)]).tail_measure(6.0), 1.0);
        assert_eq!(TimeSet::interval(0.0, 10.0).restrict(4.0), TimeSet::interval(0.0, 4.0));
        let ts = TimeSet::from_pairs([(0.0, 1.0), (3.0, 4.0)]);
        assert!(ts.contains(0.0) && ts.contains(3.5));
        assert!(!ts.contains(1.0) && !ts.contains(2.0) && !ts.contains(4.0));
    }

    #[test]
    fn finite_set_has_density_zero() {
        let est = TimeSet::interval(0.0, 1.0).upper_density(&[10.0, 100.0, 1000.0]).unwrap();
        assert_eq!(est.ratios, vec![0.1, 0.01, 0.001]);
        assert_eq!(est.value, 0.001);
        assert!(TimeSet::empty().upper_density(&[]).is_err());
    }

    #[test]
    fn periodic_set_has_density_half() {
        let ts = TimeSet::from_pairs((0..500).map(|n| (2.0 * n as f64, 2.0 * n as f64 + 1.0)));
        let horizons: Vec<f64> = (1..=100).map(|k| 10.0 * k as f64 + 0.5).collect();
        let est = ts.upper_density(&horizons).unwrap();
        assert!((est.value - 0.5).abs() < 0.01);
    }

    #[test]
    fn summable_windows_have_vanishing_density() {
        let ts = TimeSet::from_pairs((1..=1000).map(|n| {
            let n = n as f64;
            (n, n + 1.0 / (n * n))
        }));
        let horizons = [10.0, 100.0, 1000.0];
        let est = ts.upper_density(&horizons).unwrap();
        for (&t, &r) in horizons.iter().zip(&est.ratios) {
            // partial-sum oracle Σ_{n < t} n^-2
            let partial: f64 = (1..(t as usize)).map(|n| 1.0 / (n as f64 * n as f64)).sum();
            assert!((r - partial / t).abs() < 1e-12, "t={t}");
        }
        assert!(est.ratios.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let ts = TimeSet::from_pairs([(0.25, 1.0), (3.0, 3.125)]);
        assert_eq!(TimeSet::from_text(&ts.to_text()).unwrap(), ts);
        assert_eq!(TimeSet::from_text("# comment\n\n1 2\n").unwrap(), TimeSet::interval(1.0, 2.0));
        assert!(TimeSet::from_text("1").is_err());
        assert!(TimeSet::from_text("2 1").is_err());
        assert!(TimeSet::from_text("1 2 3").is_err());
    }

    #[test]
    fn density_csv() {
        let est = TimeSet::interval(0.0, 1.0).upper_density(&[2.0, 4.0]).unwrap();
        assert_eq!(est.to_csv(), "horizon,ratio\n2.0,0.5\n4.0,0.25\n");
    }

    fn arb_set() -> impl Strategy<Value = TimeSet> {
        prop::collection::vec((0.0f64..100.0, 0.0f64..10.0), 0..20)
            .prop_map(|v| TimeSet::from_pairs(v.into_iter().map(|(a, l)| (a, a + l))))
    }

    proptest! {
        #[test]
        fn inclusion_exclusion(a in arb_set(), b in arb_set()) {
            let lhs = a.union(&b).measure() + a.intersect(&b).measure();
            let rhs = a.measure() + b.measure();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn canonical_form(a in arb_set(), b in arb_set()) {
            for ts in [a.union(&b), a.intersect(&b)] {
                for w in ts.intervals().windows(2) {
                    prop_assert!(w[0].end < w[1].start);
                }
                for iv in ts.intervals() {
                    prop_assert!(iv.start >= 0.0 && iv.start < iv.end);
                }
            }
        }

        #[test]
        fn restrict_is_monotone(a in arb_set(), t1 in 0.0f64..120.0, dt in 0.0f64..20.0) {
            prop_assert!(a.restrict(t1).measure() <= a.restrict(t1 + dt).measure() + 1e-12);
            prop_assert!((a.restrict(t1).measure() - a.measure_up_to(t1)).abs() < 1e-12);
        }

        #[test]
        fn finite_sets_dilute(a in arb_set(), last in 200.0f64..1e6) {
            let est = a.upper_density(&[last / 4.0, last / 2.0, last]).unwrap();
            prop_assert!(*est.ratios.last().unwrap() < a.measure() / last + 1e-15);
        }
    }
}
