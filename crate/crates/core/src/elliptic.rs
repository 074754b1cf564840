//! Stationary problem `L_h v + f = 0` for time-independent data.

use crate::error::{Error, Result};
use crate::fields::{FieldExpr, GridFunction};
use crate::linalg::DenseMatrix;
use crate::operator::{apply_operator, Evaluator, Scheme};
use crate::parabolic::cfl_bound;

/// Consecutive residual increases tolerated before the march is abandoned.
pub const MAX_GROWTH_STEPS: usize = 100;

/// Largest `N^d` accepted by [`solve_elliptic_direct`] by default.
pub const DEFAULT_SIZE_CAP: usize = 4096;

#[derive(Clone, Debug)]
pub struct MarchOutcome {
    pub solution: GridFunction,
    /// Final `sup |L_h v + f|`.
    pub residual: f64,
    pub steps: usize,
    pub dt: f64,
}

/// Default residual target `1e-8 (1 + sup |f|)`.
pub fn default_tolerance(scheme: &Scheme, f: &FieldExpr) -> f64 {
    1e-8 * (1.0 + f.sample(0.0, scheme.lattice()).sup_abs())
}

fn require_static(scheme: &Scheme, f: &FieldExpr) -> Result<()> {
    if !scheme.coeffs().is_time_independent() {
        return Err(Error::TimeDependent(
            "the stationary solver needs static coefficients".into(),
        ));
    }
    if !f.is_time_independent() {
        return Err(Error::TimeDependent(
            "the stationary solver needs a static forcing".into(),
        ));
    }
    Ok(())
}

/// March `∂_t u = L_h u + f` from `u = 0` with explicit Euler at the monotone
/// step bound until `sup |L_h u + f| <= tol`.
pub fn solve_elliptic_march(scheme: &Scheme, f: &FieldExpr, tol: Option<f64>) -> Result<MarchOutcome> {
    require_static(scheme, f)?;
    let tol = tol.unwrap_or_else(|| default_tolerance(scheme, f));
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive (got {tol})"
        )));
    }
    let dt = cfl_bound(scheme, &[0.0]);
    if !dt.is_finite() {
        return Err(Error::InvalidArgument(
            "all coefficients vanish; the stationary problem is not well posed".into(),
        ));
    }
    let len = scheme.lattice().len();
    let mut ev = Evaluator::new(scheme, f);
    let mut u = vec![0.0; len];
    let mut r = vec![0.0; len];
    let mut prev = f64::INFINITY;
    let mut growth = 0usize;
    let mut steps = 0usize;
    loop {
        ev.rhs(0.0, &u, &mut r);
        let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !res.is_finite() {
            return Err(Error::NonFinite {
                step: steps,
                time: steps as f64 * dt,
            });
        }
        if res <= tol {
            return Ok(MarchOutcome {
                solution: GridFunction::new(*scheme.lattice(), u)?,
                residual: res,
                steps,
                dt,
            });
        }
        if res > prev {
            growth += 1;
            if growth >= MAX_GROWTH_STEPS {
                return Err(Error::NonContraction {
                    steps: growth,
                    residual: res,
                });
            }
        } else {
            growth = 0;
        }
        prev = res;
        for (ui, ri) in u.iter_mut().zip(&r) {
            *ui += dt * ri;
        }
        steps += 1;
    }
}

/// Dense matrix of `-L_h`: diagonal `h⁻² Σ χ_λ + c`, off-diagonal `-h⁻² χ_λ`
/// at the wrapped neighbours.
pub fn assemble_negative_operator(scheme: &Scheme) -> Result<DenseMatrix> {
    let len = scheme.lattice().len();
    let h2 = scheme.h() * scheme.h();
    let grids = scheme.sample(0.0);
    let rates = grids.rates(scheme.h());
    let mut a = DenseMatrix::zeros(len);
    for i in 0..len {
        a.add_to(i, i, grids.c.values()[i]);
    }
    for (table, rates) in scheme.neighbors().iter().zip(&rates) {
        for i in 0..len {
            let w = rates.values()[i] / h2;
            a.add_to(i, i, w);
            a.add_to(i, table[i], -w);
        }
    }
    Ok(a)
}

/// Solve `-L_h v = f` by dense elimination; oracle for the march.
pub fn solve_elliptic_direct(scheme: &Scheme, f: &FieldExpr, size_cap: usize) -> Result<GridFunction> {
    require_static(scheme, f)?;
    let len = scheme.lattice().len();
    if len > size_cap {
        return Err(Error::InvalidArgument(format!(
            "{len} unknowns exceed the dense-solve cap {size_cap}"
        )));
    }
    let a = assemble_negative_operator(scheme)?;
    let rhs = f.sample(0.0, scheme.lattice());
    let v = GridFunction::new(*scheme.lattice(), a.solve(rhs.values())?)?;
    Ok(v)
}

/// `sup |L_h v + f|`.
pub fn residual(scheme: &Scheme, f: &FieldExpr, v: &GridFunction) -> Result<f64> {
    let lv = apply_operator(scheme, 0.0, v)?;
    Ok(lv.add(&f.sample(0.0, scheme.lattice()))?.sup_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{parse_expr, CoefficientSet, Lattice};
    use crate::stencil::StencilSet;

    fn heat(n: usize, q: f64, c: f64) -> Scheme {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::uniform(&st, q, 0.0, c, 1.0).unwrap();
        Scheme::new(st, co, Lattice::new(1, n).unwrap()).unwrap()
    }

    #[test]
    fn reaction_only() {
        let s = heat(8, 0.0, 1.0);
        let f = FieldExpr::constant(1.0);
        let out = solve_elliptic_march(&s, &f, None).unwrap();
        assert!(out.solution.values().iter().all(|v| (v - 1.0).abs() < 1e-7));
        let d = solve_elliptic_direct(&s, &f, DEFAULT_SIZE_CAP).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn fourier_mode() {
        let s = heat(64, 0.5, 1.0);
        let h = s.h();
        let f = parse_expr("1.5*sin(x)").unwrap();
        let out = solve_elliptic_march(&s, &f, Some(1e-10)).unwrap();
        let denom = 1.0 + (1.0 - h.cos()) / (h * h);
        let want = GridFunction::from_fn(*s.lattice(), |x| 1.5 * x[0].sin() / denom);
        assert!(out.solution.dist_sup(&want).unwrap() < 1e-8);
        let d = solve_elliptic_direct(&s, &f, DEFAULT_SIZE_CAP).unwrap();
        assert!(d.dist_sup(&want).unwrap() < 1e-12);
    }

    #[test]
    fn zero_forcing() {
        let s = heat(16, 0.5, 1.0);
        let out = solve_elliptic_march(&s, &FieldExpr::zero(), None).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.solution.sup_abs(), 0.0);
    }

    #[test]
    fn row_sums_are_reaction() {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::new(
            vec![parse_expr("1+0.5*sin(x)").unwrap(), parse_expr("1").unwrap()],
            vec![parse_expr("cos(x)").unwrap(), FieldExpr::zero()],
            parse_expr("2+sin(2*x)").unwrap(),
            1.0,
        )
        .unwrap();
        let s = Scheme::new(st, co, Lattice::new(1, 16).unwrap()).unwrap();
        let a = assemble_negative_operator(&s).unwrap();
        let c = s.coeffs().c.sample(0.0, s.lattice());
        for i in 0..16 {
            assert!((a.row_sum(i) - c.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_time_dependence_and_oversize() {
        let s = heat(16, 0.5, 1.0);
        assert!(matches!(
            solve_elliptic_march(&s, &parse_expr("t").unwrap(), None),
            Err(Error::TimeDependent(_))
        ));
        assert!(solve_elliptic_direct(&s, &FieldExpr::zero(), 8).is_err());
    }
}
