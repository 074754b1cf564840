//! Periodic lattices, grid functions and the closed-form field catalog.

mod coeffs;
mod expr;
mod grid;
mod lattice;
mod parser;

pub use coeffs::{CoefficientSet, DataSet};
pub use expr::{FieldExpr, SampledField, Trig, WaveVector, DEFAULT_M_AVAIL, MAX_TIME_ORDER};
pub use grid::GridFunction;
pub use lattice::{Lattice, MIN_NODES};
pub use parser::parse_expr;

use crate::error::{Error, Result};

/// Refinement factor of the evaluation lattice used for sup norms.
pub const EVAL_REFINEMENT: usize = 4;

/// Number of uniform time samples used for sups over `[0, T]`.
pub const TIME_SAMPLES: usize = 33;

pub fn sample(expr: &FieldExpr, t: f64, lattice: &Lattice) -> GridFunction {
    expr.sample(t, lattice)
}

pub fn exact_derivative(expr: &FieldExpr, alpha: &[u32], t_order: u32) -> Result<FieldExpr> {
    expr.derivative(alpha, t_order)
}

/// `count` uniform points on `[0, t_final]` (just `0` when `t_final == 0`).
pub fn time_samples(t_final: f64, count: usize) -> Vec<f64> {
    if t_final == 0.0 || count < 2 {
        return vec![0.0];
    }
    (0..count).map(|i| t_final * i as f64 / (count - 1) as f64).collect()
}

/// All multi-indices of order `k` in `dim` variables, in lexicographic order.
pub fn multi_indices(dim: usize, k: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a);
            rec(dim, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, k, &mut Vec::new(), &mut out);
    out
}

/// Pointwise `|D^k expr|^2 = Σ_{|α|=k} (D^α expr)^2` at time `t` on `lattice`.
pub fn derivative_norm_sq(expr: &FieldExpr, k: u32, t: f64, lattice: &Lattice) -> Result<GridFunction> {
    let mut acc = vec![0.0; lattice.len()];
    for alpha in multi_indices(lattice.dim(), k) {
        let d = expr.derivative(&alpha, 0)?;
        for (a, v) in acc.iter_mut().zip(d.sample(t, lattice).values()) {
            *a += v * v;
        }
    }
    Ok(GridFunction::from_vec_unchecked(*lattice, acc))
}

/// `[expr]_k = sup_x |D^k expr(t, x)|`, with the sup taken over a lattice
/// refined [`EVAL_REFINEMENT`] times relative to `working`.
pub fn seminorm_k(expr: &FieldExpr, k: u32, t: f64, working: &Lattice) -> Result<f64> {
    let dense = working.refined(EVAL_REFINEMENT)?;
    Ok(derivative_norm_sq(expr, k, t, &dense)?.max().max(0.0).sqrt())
}

/// `(F_n, G_n)`: sums over `k <= n` of the sup of `|D^k f|` on `[0, T] x torus`
/// and of `|D^k g|` on the torus.
pub fn data_norms(data: &DataSet, n: u32, t_final: f64, working: &Lattice) -> Result<(f64, f64)> {
    let times = time_samples(t_final, TIME_SAMPLES);
    let mut f_n = 0.0;
    let mut g_n = 0.0;
    for k in 0..=n {
        let mut sup_f: f64 = 0.0;
        for &t in &times {
            sup_f = sup_f.max(seminorm_k(&data.f, k, t, working)?);
        }
        f_n += sup_f;
        g_n += seminorm_k(&data.g, k, 0.0, working)?;
    }
    Ok((f_n, g_n))
}

pub(crate) fn check_dim(expr: &FieldExpr, dim: usize, what: &str) -> Result<()> {
    if expr.spatial_rank() > dim {
        return Err(Error::InvalidArgument(format!(
            "{what} depends on x{} but the lattice has dimension {dim}",
            expr.spatial_rank()
        )));
    }
    Ok(())
}
