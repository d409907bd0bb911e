use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Feature expansion applied to raw covariates before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// The raw coordinates.
    Main,
    /// Raw coordinates followed by every pairwise product x_i x_j (i < j).
    Interactions,
    /// Raw coordinates, then per-coordinate squares, then cubes.
    Poly3,
    /// Products over every non-empty subset of coordinates. On binary inputs
    /// this is the saturated (cell-means) design.
    Saturated,
}

/// Largest input dimension accepted by [`Basis::Saturated`].
pub const MAX_SATURATED_DIM: usize = 12;

impl Basis {
    pub fn output_dim(self, d: usize) -> usize {
        match self {
            Basis::Main => d,
            Basis::Interactions => d + d * d.saturating_sub(1) / 2,
            Basis::Poly3 => 3 * d,
            Basis::Saturated => (1usize << d.min(MAX_SATURATED_DIM)) - 1,
        }
    }
}

/// Expands one covariate vector.
pub fn expand_basis(x: &[f64], basis: Basis) -> Vec<f64> {
    let d = x.len();
    let mut out = Vec::with_capacity(basis.output_dim(d));
    match basis {
        Basis::Main => out.extend_from_slice(x),
        Basis::Interactions => {
            out.extend_from_slice(x);
            for i in 0..d {
                for j in i + 1..d {
                    out.push(x[i] * x[j]);
                }
            }
        }
        Basis::Poly3 => {
            out.extend_from_slice(x);
            out.extend(x.iter().map(|v| v * v));
            out.extend(x.iter().map(|v| v * v * v));
        }
        Basis::Saturated => {
            assert!(d <= MAX_SATURATED_DIM, "saturated basis limited to {MAX_SATURATED_DIM} inputs");
            for mask in 1usize..(1 << d) {
                out.push((0..d).filter(|j| mask & (1 << j) != 0).map(|j| x[j]).product());
            }
        }
    }
    out
}

/// Expands every row of a raw feature matrix.
pub fn expand_matrix(x: &DMatrix<f64>, basis: Basis) -> DMatrix<f64> {
    if basis == Basis::Main {
        return x.clone();
    }
    let n = x.nrows();
    let q = basis.output_dim(x.ncols());
    let mut out = DMatrix::zeros(n, q);
    let mut row = vec![0.0; x.ncols()];
    for i in 0..n {
        for (j, v) in row.iter_mut().enumerate() {
            *v = x[(i, j)];
        }
        for (j, v) in expand_basis(&row, basis).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}
