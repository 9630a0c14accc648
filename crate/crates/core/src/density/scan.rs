//! Outer approximation of level sets of a function on a short window.
//!
//! The window is cut at the function's critical offsets. Each piece is
//! sampled on a coarse grid plus a node just left of its right end, where
//! blow-ups live. Membership changes between neighbouring nodes are located
//! by bisection to half the resolution, found intervals are widened by half
//! the resolution on both sides, and everything is clipped to the window.

use serde::{Deserialize, Serialize};

use crate::cocycle::{AdditiveCocycle, SubadditiveCocycle};
use crate::error::{Error, Result};
use crate::flow::FiberPoint;
use crate::timeset::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Spacing of the sampling grid inside each piece.
    pub coarse: f64,
    /// Precision to which set boundaries are located.
    pub resolution: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            coarse: 1e-3,
            resolution: 1e-7,
        }
    }
}

impl ScanConfig {
    pub fn new(coarse: f64, resolution: f64) -> Result<Self> {
        let cfg = Self { coarse, resolution };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || !(self.coarse > 0.0) || !self.coarse.is_finite() {
            return Err(Error::arg(format!(
                "scan needs positive coarse step and resolution (got {}, {})",
                self.coarse, self.resolution
            )));
        }
        Ok(())
    }
}

/// A real function on offsets s ∈ [0, len).
pub(crate) trait WindowFn: Sync {
    fn len(&self) -> f64;
    /// Offsets in (0, len) where the function may jump or blow up.
    fn breaks(&self) -> Result<Vec<f64>>;
    /// Values at nondecreasing offsets.
    fn values(&self, offsets: &[f64]) -> Result<Vec<f64>>;
    fn value(&self, s: f64) -> Result<f64>;
}

/// s ↦ base + α(s, z).
pub(crate) struct AdditiveWindow<'a> {
    pub c: &'a dyn AdditiveCocycle,
    pub z: FiberPoint,
    pub base: f64,
    pub len: f64,
}

impl WindowFn for AdditiveWindow<'_> {
    fn len(&self) -> f64 {
        self.len
    }

    fn breaks(&self) -> Result<Vec<f64>> {
        let mut b = self.c.critical_times(self.z, self.len)?;
        b.retain(|&s| s > 0.0 && s < self.len);
        Ok(b)
    }

    fn values(&self, offsets: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.c.path(self.z, offsets)?;
        v.iter_mut().for_each(|x| *x += self.base);
        Ok(v)
    }

    fn value(&self, s: f64) -> Result<f64> {
        Ok(self.base + self.c.eval_forward(s, self.z)?)
    }
}

/// s ↦ α⁺(s, z) for a subadditive cocycle.
pub(crate) struct HeadWindow<'a> {
    pub c: &'a dyn SubadditiveCocycle,
    pub z: FiberPoint,
}

impl WindowFn for HeadWindow<'_> {
    fn len(&self) -> f64 {
        1.0
    }

    fn breaks(&self) -> Result<Vec<f64>> {
        let mut b = self.c.critical_times(self.z, 1.0)?;
        b.retain(|&s| s > 0.0 && s < 1.0);
        Ok(b)
    }

    fn values(&self, offsets: &[f64]) -> Result<Vec<f64>> {
        Ok(self.c.path(self.z, offsets)?.into_iter().map(|v| v.max(0.0)).collect())
    }

    fn value(&self, s: f64) -> Result<f64> {
        Ok(self.c.eval_forward(s, self.z)?.max(0.0))
    }
}

/// s ↦ α⁺(1 − s, Tˢz): the part of the unit step after offset s.
pub(crate) struct TailWindow<'a> {
    pub c: &'a dyn SubadditiveCocycle,
    pub z: FiberPoint,
}

impl WindowFn for TailWindow<'_> {
    fn len(&self) -> f64 {
        1.0
    }

    fn breaks(&self) -> Result<Vec<f64>> {
        let mut b = self.c.critical_times(self.z, 1.0)?;
        b.retain(|&s| s > 0.0 && s < 1.0);
        Ok(b)
    }

    fn values(&self, offsets: &[f64]) -> Result<Vec<f64>> {
        offsets.iter().map(|&s| self.value(s)).collect()
    }

    fn value(&self, s: f64) -> Result<f64> {
        let p = self.c.flow().evolve(self.z, s)?;
        Ok(self.c.eval_forward(1.0 - s, p)?.max(0.0))
    }
}

struct Piece {
    start: f64,
    end: f64,
    nodes: Vec<(f64, f64)>,
}

/// Node values of a window, reusable across thresholds.
pub(crate) struct Sampled<'w, W: WindowFn> {
    window: &'w W,
    pieces: Vec<Piece>,
    cfg: ScanConfig,
}

impl<'w, W: WindowFn> Sampled<'w, W> {
    pub fn new(window: &'w W, cfg: ScanConfig) -> Result<Self> {
        let len = window.len();
        let mut cuts = vec![0.0];
        cuts.extend(window.breaks()?);
        cuts.push(len);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut offsets = Vec::new();
        let mut spans = Vec::new();
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            if !(q > p) {
                continue;
            }
            let first = offsets.len();
            let left_of_end = q - (cfg.resolution / 8.0).min(0.25 * (q - p));
            let mut s = p;
            while s < left_of_end {
                offsets.push(s);
                s += cfg.coarse;
            }
            offsets.push(left_of_end);
            spans.push((p, q, first, offsets.len()));
        }
        let values = window.values(&offsets)?;
        let pieces = spans
            .into_iter()
            .map(|(p, q, a, b)| Piece {
                start: p,
                end: q,
                nodes: offsets[a..b].iter().copied().zip(values[a..b].iter().copied()).collect(),
            })
            .collect();
        Ok(Self { window, pieces, cfg })
    }

    /// Largest |value| over the nodes.
    pub fn max_abs(&self) -> f64 {
        self.node_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn node_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().flat_map(|p| p.nodes.iter().map(|n| n.1))
    }

    /// Trapezoid estimate of ∫ |value| over the window.
    pub fn abs_integral(&self) -> f64 {
        let mut acc = 0.0;
        for p in &self.pieces {
            for w in p.nodes.windows(2) {
                acc += 0.5 * (w[0].1.abs() + w[1].1.abs()) * (w[1].0 - w[0].0);
            }
            let last = p.nodes[p.nodes.len() - 1];
            acc += last.1.abs() * (p.end - last.0);
        }
        acc
    }

    /// Outer approximation of {s : pred(value(s))}, as window offsets.
    pub fn level_set(&self, pred: impl Fn(f64) -> bool) -> Result<Vec<Interval>> {
        let res = self.cfg.resolution;
        let mut out = Vec::new();
        for piece in &self.pieces {
            let st: Vec<bool> = piece.nodes.iter().map(|n| pred(n.1)).collect();
            if piece.nodes.len() == 1 {
                if st[0] {
                    out.push(Interval::new(piece.start, piece.end));
                }
                continue;
            }
            for i in 0..piece.nodes.len() - 1 {
                let (u, v) = (piece.nodes[i].0, piece.nodes[i + 1].0);
                match (st[i], st[i + 1]) {
                    (true, true) => out.push(Interval::new(u, v)),
                    (true, false) => out.push(Interval::new(u, self.bisect(u, v, &pred)?)),
                    (false, true) => out.push(Interval::new(self.bisect(v, u, &pred)?, v)),
                    (false, false) => {}
                }
            }
            let (last, last_in) = (piece.nodes[piece.nodes.len() - 1].0, st[st.len() - 1]);
            if last_in {
                out.push(Interval::new(last, piece.end));
            }
        }
        let len = self.window.len();
        let mut merged: Vec<Interval> = Vec::new();
        for iv in out {
            let iv = Interval::new((iv.start - 0.5 * res).max(0.0), (iv.end + 0.5 * res).min(len));
            if iv.is_empty() {
                continue;
            }
            match merged.last_mut() {
                Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
                _ => merged.push(iv),
            }
        }
        Ok(merged)
    }

    /// Shrinks [inside, outside] to width res/2; returns the outside end.
    fn bisect(&self, mut inside: f64, mut outside: f64, pred: &impl Fn(f64) -> bool) -> Result<f64> {
        while (outside - inside).abs() > 0.5 * self.cfg.resolution {
            let m = 0.5 * (inside + outside);
            if pred(self.window.value(m)?) {
                inside = m;
            } else {
                outside = m;
            }
        }
        Ok(outside)
    }
}

/// Shifts window offsets to absolute times.
pub(crate) fn to_absolute(ivs: &[Interval], offset: f64) -> impl Iterator<Item = Interval> + '_ {
    ivs.iter().map(move |iv| Interval::new(iv.start + offset, iv.end + offset))
}
