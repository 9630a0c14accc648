use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{FiberPoint, SuspensionFlow};
use crate::linalg::GradedProduct;

/// Largest condition number accepted for a generator B(y).
pub const MAX_CONDITION: f64 = 1e8;
/// Diagonal-exponential factors are split so no entry exceeds e^CHUNK_LOG.
const CHUNK_LOG: f64 = 16.0;

type Generator = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
enum Kind {
    /// Piecewise constant in fiber time: one factor B(y) per roof crossing.
    FromBase { name: String, b: Generator },
    /// A(t, x) = diag(e^(rᵢ t)).
    DiagonalExp { rates: Vec<f64> },
}

/// A GL(m, ℝ)-valued cocycle with A(t+s, x) = A(s, Tᵗx)·A(t, x).
#[derive(Clone)]
pub struct MatrixCocycle {
    flow: SuspensionFlow,
    dim: usize,
    kind: Kind,
}

impl fmt::Debug for MatrixCocycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixCocycle({}, dim {})", self.name(), self.dim)
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

impl MatrixCocycle {
    /// A(t, (y, τ)) = B(S^(n−1)y)⋯B(y), n the number of roof crossings.
    /// B is probed on a grid of base points for shape and conditioning.
    pub fn from_base(
        flow: SuspensionFlow,
        dim: usize,
        name: impl Into<String>,
        b: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("matrix dimension must be at least 1"));
        }
        for i in 0..64 {
            let y = (i as f64 + 0.5) / 64.0;
            let m = b(y);
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::config(format!(
                    "generator returned a {}x{} matrix at y = {y}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let cond = condition_number(&m);
            if !(cond < MAX_CONDITION) {
                return Err(Error::Singular(format!(
                    "generator at y = {y} has condition number {cond:e} (limit {MAX_CONDITION:e})"
                )));
            }
        }
        Ok(Self {
            flow,
            dim,
            kind: Kind::FromBase {
                name: name.into(),
                b: Arc::new(b),
            },
        })
    }

    /// B(y) ≡ B.
    pub fn constant(flow: SuspensionFlow, b: DMatrix<f64>) -> Result<Self> {
        let dim = b.nrows();
        let name = format!("constant {:?}", b.as_slice());
        Self::from_base(flow, dim, name, move |_| b.clone())
    }

    /// B(y) constant on `cells` equal subintervals, each an independent draw
    /// of a 2×2 matrix with entries uniform in [−2, 2], rescaled into SL(2).
    pub fn random_sl2(flow: SuspensionFlow, seed: u64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::config("random SL(2) cocycle needs at least one cell"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = Vec::with_capacity(cells);
        while table.len() < cells {
            let mut m = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let mut det = m.determinant();
            if det.abs() < 0.25 {
                continue;
            }
            if det < 0.0 {
                m.swap_columns(0, 1);
                det = -det;
            }
            m /= det.sqrt();
            if condition_number(&m) < 1e3 {
                table.push(m);
            }
        }
        let name = format!("random SL(2) seed {seed} cells {cells}");
        Self::from_base(flow, 2, name, move |y| {
            let i = ((y * cells as f64) as usize).min(cells - 1);
            table[i].clone()
        })
    }

    pub fn diagonal_exp(flow: SuspensionFlow, rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("diagonal cocycle needs finite rates"));
        }
        Ok(Self {
            flow,
            dim: rates.len(),
            kind: Kind::DiagonalExp { rates },
        })
    }

    /// A(t, x) = e^(at)·I.
    pub fn scalar_exp(flow: SuspensionFlow, dim: usize, a: f64) -> Result<Self> {
        Self::diagonal_exp(flow, vec![a; dim])
    }

    pub fn identity(flow: SuspensionFlow, dim: usize) -> Result<Self> {
        Self::diagonal_exp(flow, vec![0.0; dim])
    }

    pub fn flow(&self) -> &SuspensionFlow {
        &self.flow
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether A(t, x) is defined for negative t.
    pub fn invertible_time(&self) -> bool {
        self.flow.is_invertible()
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::FromBase { name, .. } => name.clone(),
            Kind::DiagonalExp { rates } => format!("diag exp {rates:?}"),
        }
    }

    /// Exact exponents when the cocycle is diagonal exponential.
    pub fn diagonal_rates(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::DiagonalExp { rates } => Some(rates),
            Kind::FromBase { .. } => None,
        }
    }

    /// Visits the factors of A(t, x), t ≥ 0, in the order they are applied.
    pub fn for_each_factor<F>(&self, t: f64, x: FiberPoint, mut visit: F) -> Result<()>
    where
        F: FnMut(&DMatrix<f64>) -> Result<()>,
    {
        if !(t >= 0.0) {
            return Err(Error::arg(format!("factor walk needs t >= 0, got {t}")));
        }
        match &self.kind {
            Kind::FromBase { b, .. } => {
                self.flow.walk_forward(x, t, |seg| {
                    if seg.crosses {
                        visit(&b(seg.y))?;
                    }
                    Ok(())
                })?;
            }
            Kind::DiagonalExp { rates } => {
                let top = rates.iter().fold(0.0f64, |m, r| m.max(r.abs()));
                let pieces = if top == 0.0 || t == 0.0 {
                    1
                } else {
                    (t * top / CHUNK_LOG).ceil().max(1.0) as u64
                };
                let dt = t / pieces as f64;
                let f = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    self.dim,
                    rates.iter().map(|r| (r * dt).exp()),
                ));
                for _ in 0..pieces {
                    visit(&f)?;
                }
            }
        }
        Ok(())
    }

    fn factors(&self, t: f64, x: FiberPoint) -> Result<Vec<DMatrix<f64>>> {
        let mut out = Vec::new();
        self.for_each_factor(t, x, |f| {
            out.push(f.clone());
            Ok(())
        })?;
        Ok(out)
    }

    /// Factors of A(t, x) for any real t, in application order. For t < 0,
    /// A(t, x) = A(−t, Tᵗx)⁻¹.
    fn signed_factors(&self, t: f64, x: FiberPoint) -> Result<Vec<DMatrix<f64>>> {
        if t >= 0.0 {
            return self.factors(t, x);
        }
        let start = self.flow.evolve(x, t)?;
        let mut fwd = self.factors(-t, start)?;
        fwd.reverse();
        fwd.into_iter()
            .map(|f| f.try_inverse().ok_or_else(|| Error::Singular("factor has no inverse".into())))
            .collect()
    }

    /// A(t, x) as a dense matrix. Overflows for long times; see [`Self::graded`].
    pub fn eval(&self, t: f64, x: FiberPoint) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::identity(self.dim, self.dim);
        for f in self.signed_factors(t, x)? {
            m = f * m;
        }
        Ok(m)
    }

    /// The inverse cocycle Ã(t, x) = A(t, x)⁻¹, which composes in the other
    /// order: Ã(t+s, x) = Ã(t, x)·Ã(s, Tᵗx).
    pub fn eval_inverse_cocycle(&self, t: f64, x: FiberPoint) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::identity(self.dim, self.dim);
        for f in self.signed_factors(t, x)? {
            let inv = f.try_inverse().ok_or_else(|| Error::Singular("factor has no inverse".into()))?;
            m *= inv;
        }
        Ok(m)
    }

    /// A(t, x) in overflow-free graded form.
    pub fn graded(&self, t: f64, x: FiberPoint) -> Result<GradedProduct> {
        let mut g = GradedProduct::identity(self.dim);
        self.push_into(&mut g, t, x)?;
        Ok(g)
    }

    /// Left-multiplies `g` by A(t, x).
    pub fn push_into(&self, g: &mut GradedProduct, t: f64, x: FiberPoint) -> Result<()> {
        if t >= 0.0 {
            self.for_each_factor(t, x, |f| g.push(f))
        } else {
            for f in self.signed_factors(t, x)? {
                g.push(&f)?;
            }
            Ok(())
        }
    }

    pub fn log_abs_det(&self, t: f64, x: FiberPoint) -> Result<f64> {
        Ok(self.graded(t, x)?.log_abs_det())
    }

    /// A(tₖ, x) in graded form along nondecreasing times, visited in order.
    pub fn product_path<F>(&self, x: FiberPoint, times: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &GradedProduct) -> Result<()>,
    {
        let mut g = GradedProduct::identity(self.dim);
        let mut point = x;
        let mut prev = 0.0;
        for (k, &t) in times.iter().enumerate() {
            if !(t >= prev) || !t.is_finite() {
                return Err(Error::arg("product path times must be nonnegative and nondecreasing"));
            }
            let dt = t - prev;
            if dt > 0.0 {
                self.push_into(&mut g, dt, point)?;
                point = self.flow.evolve(point, dt)?;
            }
            visit(k, &g)?;
            prev = t;
        }
        Ok(())
    }
}

/// ‖A(t+s, x) − A(s, Tᵗx)A(t, x)‖_F / ‖A(t+s, x)‖_F.
pub fn matrix_identity_defect(a: &MatrixCocycle, t: f64, s: f64, x: FiberPoint) -> Result<f64> {
    let whole = a.eval(t + s, x)?;
    let xt = a.flow().evolve(x, t)?;
    let split = a.eval(s, xt)? * a.eval(t, x)?;
    Ok((&whole - split).norm() / whole.norm())
}
