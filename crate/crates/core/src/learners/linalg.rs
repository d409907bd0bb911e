//! Dense helpers shared by the least-squares and logistic solvers.

use nalgebra::{DMatrix, DVector};

/// Relative ridge added to the normal equations when they are rank deficient.
pub(crate) const RIDGE_SCALE: f64 = 1e-8;
/// Squared pivot ratio below which the Gram matrix is treated as singular.
const PIVOT_RATIO_FLOOR: f64 = 1e-10;

/// Column standardisation computed from training rows. Columns with no
/// spread are marked inactive (scale 0) and contribute a zero column.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Scaling {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaling {
    pub fn fit(e: &DMatrix<f64>, rows: Option<&[usize]>, centered: bool) -> Self {
        let q = e.ncols();
        let idx: Vec<usize> = match rows {
            Some(r) => r.to_vec(),
            None => (0..e.nrows()).collect(),
        };
        let m = idx.len().max(1) as f64;
        let mut center = vec![0.0; q];
        let mut scale = vec![0.0; q];
        for j in 0..q {
            let col = e.column(j);
            let mean = idx.iter().map(|&i| col[i]).sum::<f64>() / m;
            let ss = idx.iter().map(|&i| (col[i] - mean).powi(2)).sum::<f64>() / m;
            let sd = ss.sqrt();
            if centered {
                center[j] = mean;
                scale[j] = if sd > 1e-12 * (1.0 + mean.abs()) { sd } else { 0.0 };
            } else {
                let rms = (ss + mean * mean).sqrt();
                scale[j] = if rms > 1e-300 { rms } else { 0.0 };
            }
        }
        Self { center, scale }
    }

    /// Standardised design, with a leading column of ones when `intercept`.
    pub fn design(&self, e: &DMatrix<f64>, intercept: bool) -> DMatrix<f64> {
        let off = usize::from(intercept);
        let q = e.ncols();
        DMatrix::from_fn(e.nrows(), q + off, |i, j| {
            if intercept && j == 0 {
                1.0
            } else {
                let c = j - off;
                if self.scale[c] == 0.0 {
                    0.0
                } else {
                    (e[(i, c)] - self.center[c]) / self.scale[c]
                }
            }
        })
    }

    /// Maps coefficients on the standardised design back to raw features.
    pub fn unscale(&self, beta: &[f64], intercept: bool) -> Vec<f64> {
        let off = usize::from(intercept);
        let mut out = vec![0.0; self.scale.len() + 1];
        if intercept {
            out[0] = beta[0];
        }
        for (c, &s) in self.scale.iter().enumerate() {
            if s != 0.0 {
                let b = beta[c + off] / s;
                out[c + 1] = b;
                out[0] -= b * self.center[c];
            }
        }
        out
    }
}

/// Weighted Gram matrix D'WD and moment D'Wy over a row subset.
pub(crate) fn weighted_gram(d: &DMatrix<f64>, rows: &[usize], w: &[f64], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let q = d.ncols();
    let m = rows.len();
    let sw: Vec<f64> = rows.iter().map(|&i| w[i].max(0.0).sqrt()).collect();
    let sub = DMatrix::from_fn(m, q, |r, j| d[(rows[r], j)] * sw[r]);
    let yw = DVector::from_fn(m, |r, _| y[rows[r]] * sw[r]);
    (sub.tr_mul(&sub), sub.tr_mul(&yw))
}

/// Solves the symmetric positive semi-definite system `g x = b`.
///
/// Falls back to a ridge penalty of `1e-8 * trace / dim` on every
/// non-intercept coordinate when the Cholesky pivots reveal rank
/// deficiency. Returns the solution and whether the ridge was used.
pub(crate) fn solve_normal(g: &DMatrix<f64>, b: &DVector<f64>, intercept: bool) -> (DVector<f64>, bool) {
    // Inactive (all-zero) columns are dropped and get a zero coefficient.
    let dim = g.nrows();
    let active: Vec<usize> = (0..dim).filter(|&i| g[(i, i)] > 0.0).collect();
    if active.len() < dim {
        let mut out = DVector::zeros(dim);
        if active.is_empty() {
            return (out, false);
        }
        let keeps_intercept = intercept && active[0] == 0;
        let gs = g.select_rows(&active).select_columns(&active);
        let bs = DVector::from_fn(active.len(), |i, _| b[active[i]]);
        let (xs, ridged) = solve_full(&gs, &bs, keeps_intercept);
        for (k, &i) in active.iter().enumerate() {
            out[i] = xs[k];
        }
        return (out, ridged);
    }
    solve_full(g, b, intercept)
}

fn solve_full(g: &DMatrix<f64>, b: &DVector<f64>, intercept: bool) -> (DVector<f64>, bool) {
    if let Some(ch) = g.clone().cholesky() {
        let l = ch.l_dirty();
        let diag: Vec<f64> = (0..g.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if max > 0.0 && min / max >= PIVOT_RATIO_FLOOR {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return (x, false);
            }
        }
    }
    (ridge_solve(g, b, intercept), true)
}

fn ridge_solve(g: &DMatrix<f64>, b: &DVector<f64>, intercept: bool) -> DVector<f64> {
    let dim = g.nrows();
    let trace = g.trace().max(1e-300);
    let mut lambda = RIDGE_SCALE * trace / dim as f64;
    for _ in 0..20 {
        let mut gr = g.clone();
        for i in usize::from(intercept)..dim {
            gr[(i, i)] += lambda;
        }
        if intercept && gr[(0, 0)] <= 0.0 {
            gr[(0, 0)] += lambda;
        }
        if let Some(ch) = gr.cholesky() {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return x;
            }
        }
        lambda *= 10.0;
    }
    DVector::zeros(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unscale_inverts_standardisation() {
        let e = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 5.0]);
        let s = Scaling::fit(&e, None, true);
        let d = s.design(&e, true);
        // y = 3 + 2x on the raw scale
        let beta_raw = [3.0, 2.0];
        let w = vec![1.0; 4];
        let y: Vec<f64> = (0..4).map(|i| beta_raw[0] + beta_raw[1] * e[(i, 0)]).collect();
        let (g, b) = weighted_gram(&d, &[0, 1, 2, 3], &w, &y);
        let (x, ridged) = solve_normal(&g, &b, true);
        assert!(!ridged);
        let back = s.unscale(x.as_slice(), true);
        assert!((back[0] - 3.0).abs() < 1e-12 && (back[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_system_uses_ridge() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let (x, ridged) = solve_normal(&g, &b, false);
        assert!(ridged);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_columns_are_dropped() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![2.0, 0.0]);
        let (x, ridged) = solve_normal(&g, &b, true);
        assert!(!ridged);
        assert_eq!(x.as_slice(), &[0.5, 0.0]);
    }
}
