//! Products of many matrices whose singular values span far more than the
//! double-precision range.
//!
//! A product M = F_n ⋯ F_1 is stored as M = Q · diag(e^ℓ) · W with Q
//! orthogonal, ℓ the row log-scales and W a matrix with unit rows. Each new
//! factor is folded in with one QR step, rows kept sorted by scale so that
//! the update never mixes a small row into a large one. Singular values are
//! then extracted by one-sided Jacobi on the scaled rows, carrying every
//! scale in log space, which keeps the small singular values to full
//! relative accuracy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct GradedProduct {
    q: DMatrix<f64>,
    log_scale: Vec<f64>,
    rows: DMatrix<f64>,
    log_abs_det: f64,
    factors: u64,
}

/// Singular value decomposition with log singular values, sorted descending.
#[derive(Debug, Clone)]
pub struct LogSvd {
    pub log_sv: Vec<f64>,
    /// Right singular vectors as columns.
    pub right: DMatrix<f64>,
    /// Left singular vectors as columns.
    pub left: DMatrix<f64>,
}

impl GradedProduct {
    pub fn identity(dim: usize) -> Self {
        Self {
            q: DMatrix::identity(dim, dim),
            log_scale: vec![0.0; dim],
            rows: DMatrix::identity(dim, dim),
            log_abs_det: 0.0,
            factors: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.log_scale.len()
    }

    pub fn factor_count(&self) -> u64 {
        self.factors
    }

    /// Σ ln|det F| over the folded factors.
    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// M ← F · M.
    pub fn push(&mut self, factor: &DMatrix<f64>) -> Result<()> {
        let m = self.dim();
        if factor.nrows() != m || factor.ncols() != m {
            return Err(Error::arg(format!(
                "factor is {}x{}, product is {m}x{m}",
                factor.nrows(),
                factor.ncols()
            )));
        }
        let det = factor.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular(format!("factor with determinant {det}")));
        }
        self.log_abs_det += det.abs().ln();
        self.sort_rows();

        let qr = (factor * &self.q).qr();
        let (q, r) = (qr.q(), qr.r());
        let mut rows = DMatrix::zeros(m, m);
        let mut scales = vec![0.0; m];
        for i in 0..m {
            let mut row = DVector::zeros(m);
            for k in i..m {
                let coef = r[(i, k)] * (self.log_scale[k] - self.log_scale[i]).exp();
                if coef != 0.0 {
                    row.axpy(coef, &self.rows.row(k).transpose(), 1.0);
                }
            }
            let norm = row.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Renormalization(format!(
                    "row {i} collapsed after {} factors",
                    self.factors
                )));
            }
            scales[i] = self.log_scale[i] + norm.ln();
            rows.set_row(i, &(row / norm).transpose());
        }
        self.q = q;
        self.log_scale = scales;
        self.rows = rows;
        self.factors += 1;
        Ok(())
    }

    fn sort_rows(&mut self) {
        let m = self.dim();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.log_scale[b].total_cmp(&self.log_scale[a]));
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return;
        }
        let q = DMatrix::from_fn(m, m, |r, c| self.q[(r, order[c])]);
        let rows = DMatrix::from_fn(m, m, |r, c| self.rows[(order[r], c)]);
        let scales = order.iter().map(|&o| self.log_scale[o]).collect();
        self.q = q;
        self.rows = rows;
        self.log_scale = scales;
    }

    pub fn svd(&self) -> LogSvd {
        graded_svd(&self.q, &self.log_scale, &self.rows)
    }

    pub fn log_singular_values(&self) -> Vec<f64> {
        self.svd().log_sv
    }

    /// ln‖M‖ in the spectral norm.
    pub fn log_norm(&self) -> f64 {
        self.log_singular_values()[0]
    }

    /// The product itself, when it fits in double precision.
    pub fn to_matrix(&self) -> Option<DMatrix<f64>> {
        let m = self.dim();
        let d = DMatrix::from_fn(m, m, |r, c| if r == c { self.log_scale[r].exp() } else { 0.0 });
        let out = &self.q * d * &self.rows;
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

/// One-sided Jacobi on the rows of diag(e^ℓ)·W with scales kept in log space.
fn graded_svd(q: &DMatrix<f64>, log_scale: &[f64], rows: &DMatrix<f64>) -> LogSvd {
    let m = log_scale.len();
    let mut ell = log_scale.to_vec();
    let mut w: Vec<DVector<f64>> = (0..m).map(|i| rows.row(i).transpose()).collect();
    // Accumulated left rotation: X = J · X'.
    let mut left_rot = DMatrix::<f64>::identity(m, m);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for r in (p + 1)..m {
                let (i, j) = if ell[p] >= ell[r] { (p, r) } else { (r, p) };
                let c = w[i].dot(&w[j]);
                if c.abs() <= JACOBI_TOL {
                    continue;
                }
                rotated = true;
                let delta = ell[i] - ell[j];
                let e_neg = (-delta).exp();
                let e_neg2 = e_neg * e_neg;
                // ζ·e^{-Δ} for ζ = cot 2θ of the 2x2 Gram block.
                let zeta_scaled = (e_neg2 - 1.0) / (2.0 * c);
                let sign = if zeta_scaled >= 0.0 { 1.0 } else { -1.0 };
                // tan θ · e^{Δ}
                let tan_up = sign / (zeta_scaled.abs() + (e_neg2 + zeta_scaled * zeta_scaled).sqrt());
                let tan = tan_up * e_neg;
                let cs = 1.0 / (1.0 + tan * tan).sqrt();
                let sn = tan * cs;

                let new_i = &w[i] * cs - &w[j] * (sn * e_neg);
                let new_j = &w[i] * (cs * tan_up) + &w[j] * cs;
                let (ni, nj) = (new_i.norm(), new_j.norm());
                ell[i] += ni.ln();
                ell[j] += nj.ln();
                w[i] = new_i / ni;
                w[j] = new_j / nj;

                // X = J X' with J = [[cs, sn], [-sn, cs]] on (i, j).
                for row in 0..m {
                    let a = left_rot[(row, i)];
                    let b = left_rot[(row, j)];
                    left_rot[(row, i)] = cs * a - sn * b;
                    left_rot[(row, j)] = sn * a + cs * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ell[b].total_cmp(&ell[a]));
    let log_sv = order.iter().map(|&o| ell[o]).collect();
    let right = DMatrix::from_fn(m, m, |r, c| w[order[c]][r]);
    let u = q * left_rot;
    let left = DMatrix::from_fn(m, m, |r, c| u[(r, order[c])]);
    LogSvd { log_sv, right, left }
}

/// f(S) = V f(D) Vᵀ for a symmetric matrix S.
pub fn symmetric_apply(s: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = s.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let v = &eig.eigenvectors;
    let out = v * d * v.transpose();
    symmetrize(&out)
}

pub fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

/// Orthonormal basis (columns) for the span of the columns of `a`.
pub fn orthonormal_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let qr = a.clone().qr();
    let q = qr.q();
    q.columns(0, a.ncols().min(a.nrows())).into_owned()
}

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let c = a.transpose() * b;
    let sv = c.svd(false, false).singular_values;
    let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(|x, y| x.total_cmp(y));
    angles
}

/// Largest principal angle between two subspaces of equal dimension.
/// Uses sin θ = ‖(I − BBᵀ)A‖₂, which keeps small angles that acos would round to zero.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0.0;
    }
    let residual = a - b * (b.transpose() * a);
    let sin = residual.svd(false, false).singular_values.max();
    sin.clamp(0.0, 1.0).asin()
}

/// Orthonormal basis of the intersection of two column spans, keeping the
/// `dim` best-aligned directions, plus the largest principal angle used.
pub fn intersect_subspaces(a: &DMatrix<f64>, b: &DMatrix<f64>, dim: usize) -> (DMatrix<f64>, f64) {
    let c = a.transpose() * b;
    let svd = c.svd(true, false);
    let u = svd.u.expect("requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let keep: Vec<usize> = idx.into_iter().take(dim).collect();
    let worst = keep
        .iter()
        .map(|&k| svd.singular_values[k].clamp(-1.0, 1.0).acos())
        .fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = keep.iter().map(|&k| a * u.column(k)).collect();
    let basis = if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        orthonormal_basis(&DMatrix::from_columns(&cols))
    };
    (basis, worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn matches_direct_svd_for_short_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 2..=4 {
            let mut g = GradedProduct::identity(m);
            let mut direct = DMatrix::identity(m, m);
            for _ in 0..6 {
                let f = random_matrix(&mut rng, m) + DMatrix::identity(m, m) * 0.5;
                g.push(&f).unwrap();
                direct = &f * direct;
            }
            let mut sv: Vec<f64> = direct.clone().svd(false, false).singular_values.iter().copied().collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            let svd = g.svd();
            for (a, b) in svd.log_sv.iter().zip(&sv) {
                assert!((a - b.ln()).abs() < 1e-10, "{a} vs {}", b.ln());
            }
            let rebuilt = g.to_matrix().unwrap();
            assert!((rebuilt - &direct).norm() < 1e-10 * direct.norm());
            // M v_k = σ_k u_k
            for k in 0..m {
                let lhs = &direct * svd.right.column(k);
                let rhs = svd.left.column(k) * svd.log_sv[k].exp();
                assert!((lhs - rhs).norm() < 1e-9 * direct.norm());
            }
        }
    }

    #[test]
    fn keeps_tiny_singular_values_of_long_sl2_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut g = GradedProduct::identity(2);
        for _ in 0..5000 {
            let mut f = random_matrix(&mut rng, 2);
            let d = f.determinant();
            if d < 0.0 {
                f.swap_columns(0, 1);
            }
            let s = f.determinant().sqrt();
            g.push(&(f / s)).unwrap();
        }
        let sv = g.log_singular_values();
        assert!(sv[0] > 100.0, "product should be hugely expanding, got {sv:?}");
        // det = 1 forces ln σ1 + ln σ2 = 0 even when σ2 ≈ e^{-sv[0]}
        assert!((sv[0] + sv[1]).abs() < 1e-8, "{sv:?}");
        assert!(g.log_abs_det().abs() < 1e-8);
    }

    #[test]
    fn diagonal_products_are_exact() {
        let mut g = GradedProduct::identity(3);
        let f = DMatrix::from_diagonal(&DVector::from_vec(vec![2f64.exp(), 1.0, (-1f64).exp()]));
        for _ in 0..1000 {
            g.push(&f).unwrap();
        }
        let sv = g.log_singular_values();
        assert!((sv[0] - 2000.0).abs() < 1e-9);
        assert!(sv[1].abs() < 1e-9);
        assert!((sv[2] + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_singular_factor() {
        let mut g = GradedProduct::identity(2);
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(g.push(&f), Err(Error::Singular(_))));
    }

    #[test]
    fn subspace_tools() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let plane = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let other = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let (inter, angle) = intersect_subspaces(&plane, &other, 1);
        assert!(angle < 1e-12);
        assert!(subspace_distance(&inter, &e1) < 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let r = symmetric_apply(&s, f64::sqrt);
        assert!((r[(0, 0)] - 2.0).abs() < 1e-12 && (r[(1, 1)] - 3.0).abs() < 1e-12);
    }
}
