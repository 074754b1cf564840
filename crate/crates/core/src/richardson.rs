//! Richardson extrapolation over dyadically refined lattices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::GridFunction;
use crate::linalg::DenseMatrix;

/// Largest supported extrapolation order.
pub const MAX_ORDER: usize = 3;

/// Weights `b_0..b_k` applied to solutions on meshes `h, h/2, ..., h/2^k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtrapolationPlan {
    k: usize,
    b: Vec<f64>,
}

impl ExtrapolationPlan {
    pub fn order(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    /// Number of lattices the plan combines.
    pub fn levels(&self) -> usize {
        self.k + 1
    }

    /// `|Σ b_j 2^{-jl}|` for `l = 0..=k`, with the target `1` removed at `l = 0`.
    pub fn residuals(&self) -> Vec<f64> {
        (0..=self.k)
            .map(|l| {
                let s: f64 = self
                    .b
                    .iter()
                    .enumerate()
                    .map(|(j, b)| b * 0.5f64.powi((j * l) as i32))
                    .sum();
                if l == 0 {
                    (s - 1.0).abs()
                } else {
                    s.abs()
                }
            })
            .collect()
    }
}

/// Solve `b V = e_1` with `V_ij = 2^{-(i-1)(j-1)}`.
pub fn vandermonde_coefficients(k: usize) -> Result<ExtrapolationPlan> {
    if k > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "extrapolation order {k} exceeds {MAX_ORDER}"
        )));
    }
    let n = k + 1;
    let v = DenseMatrix::from_fn(n, |i, j| 0.5f64.powi((i * j) as i32));
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let b = v.transpose().solve(&rhs)?;
    Ok(ExtrapolationPlan { k, b })
}

/// `Σ_j b_j u_{h/2^j}` restricted to the coarsest lattice.
pub fn combine(plan: &ExtrapolationPlan, solutions: &[GridFunction]) -> Result<GridFunction> {
    if solutions.len() != plan.levels() {
        return Err(Error::InvalidArgument(format!(
            "plan of order {} needs {} solutions, got {}",
            plan.k,
            plan.levels(),
            solutions.len()
        )));
    }
    let coarse = *solutions[0].lattice();
    let mut acc = GridFunction::zeros(coarse);
    for (j, (u, b)) in solutions.iter().zip(&plan.b).enumerate() {
        if coarse.ratio_to(u.lattice()) != Some(1 << j) {
            return Err(Error::InvalidArgument(format!(
                "solution #{j} is not on the {}-fold refinement of the coarse lattice",
                1 << j
            )));
        }
        acc.axpy(*b, &u.restrict_to(&coarse)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Lattice;

    #[test]
    fn low_order_plans() {
        assert_eq!(vandermonde_coefficients(0).unwrap().weights(), &[1.0]);
        let p1 = vandermonde_coefficients(1).unwrap();
        assert!((p1.weights()[0] + 1.0).abs() < 1e-14 && (p1.weights()[1] - 2.0).abs() < 1e-14);
        let p2 = vandermonde_coefficients(2).unwrap();
        for (b, want) in p2.weights().iter().zip([1.0 / 3.0, -2.0, 8.0 / 3.0]) {
            assert!((b - want).abs() < 1e-13);
        }
        assert!(vandermonde_coefficients(4).is_err());
    }

    #[test]
    fn residuals_vanish() {
        for k in 0..=MAX_ORDER {
            let p = vandermonde_coefficients(k).unwrap();
            assert!(p.residuals().iter().all(|r| *r <= 1e-12), "{k}: {:?}", p.residuals());
        }
    }

    #[test]
    fn combine_cancels_first_order_term() {
        let coarse = Lattice::new(1, 16).unwrap();
        let fine = coarse.refined(2).unwrap();
        let h = coarse.h();
        let u = |x: &[f64; 3]| x[0].sin();
        let w = |x: &[f64; 3]| (2.0 * x[0]).cos();
        let uh = GridFunction::from_fn(coarse, |x| u(x) + h * w(x));
        let uh2 = GridFunction::from_fn(fine, |x| u(x) + 0.5 * h * w(x));
        let out = combine(&vandermonde_coefficients(1).unwrap(), &[uh, uh2]).unwrap();
        let exact = GridFunction::from_fn(coarse, u);
        assert!(out.dist_sup(&exact).unwrap() < 1e-14);
    }

    #[test]
    fn combine_rejects_unnested() {
        let a = GridFunction::zeros(Lattice::new(1, 16).unwrap());
        let b = GridFunction::zeros(Lattice::new(1, 64).unwrap());
        let plan = vandermonde_coefficients(1).unwrap();
        assert!(combine(&plan, &[a.clone(), b]).is_err());
        assert!(combine(&plan, &[a]).is_err());
    }
}
