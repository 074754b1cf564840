//! Pointwise sufficient conditions for the structural inequalities, in the
//! special case where the auxiliary slack functions vanish.

use super::{check_symmetry, effective_times, ValidationReport, Witness, Worst, SIGN_TOL};
use crate::error::{Error, Result};
use crate::fields::{CoefficientSet, Lattice};
use crate::operator::Scheme;
use crate::stencil::StencilSet;

/// Check, for all `λ, μ ∈ Λ₁`,
/// `m(m-1) h² (δ_λ r_μ)² <= δ (χ_λ + χ_μ)` and `h² |δ_λ p_μ| <= δ² (χ_λ + χ_μ)`
/// with `r_μ = sqrt(q_μ)`. Requires condition (S) and `p >= 0`; when either
/// fails the report fails with that violation as witness.
pub fn check_gradient_condition(scheme: &Scheme, m: u32, slack: f64, t_samples: &[f64]) -> Result<ValidationReport> {
    if !(slack > 0.0 && slack <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "slack must lie in (0, 1] (got {slack})"
        )));
    }
    let name = "gradient_condition";
    let sym = check_symmetry(scheme, t_samples);
    if !sym.pass {
        let w = sym.witness.clone().with_detail("condition (S) does not hold");
        return Ok(ValidationReport::new(name, sym.margin, SIGN_TOL, w));
    }
    let lat = *scheme.lattice();
    let st = scheme.stencil();
    let h = scheme.h();
    let tables: Vec<Vec<usize>> = st
        .vectors()
        .iter()
        .map(|v| lat.neighbor_table(v.components()))
        .collect::<Result<_>>()?;
    let mm = (m as f64) * (m as f64 - 1.0);

    let mut worst = Worst::new();
    for t in effective_times(scheme, t_samples) {
        let grids = scheme.sample(t);
        let mut negative_p = Worst::new();
        for (i, p) in grids.p.iter().enumerate() {
            negative_p.offer_grid(p, t, Some(&st.vector(i).to_string()));
        }
        if negative_p.value < -SIGN_TOL {
            let w = negative_p.witness.with_detail("drift coefficient p is negative");
            return Ok(ValidationReport::new(name, negative_p.value, SIGN_TOL, w));
        }
        let rates = grids.rates(h);
        let r: Vec<Vec<f64>> = grids
            .q
            .iter()
            .map(|q| q.values().iter().map(|v| v.max(0.0).sqrt()).collect())
            .collect();
        for (li, table) in tables.iter().enumerate() {
            for mu in 0..st.len() {
                let pv = grids.p[mu].values();
                for x in 0..lat.len() {
                    let sum_rates = rates[li].values()[x] + rates[mu].values()[x];
                    let dr = (r[mu][table[x]] - r[mu][x]) / h;
                    let first = slack * sum_rates - mm * h * h * dr * dr;
                    let dp = (pv[table[x]] - pv[x]) / h;
                    let second = slack * slack * sum_rates - h * h * dp.abs();
                    let (slack, which) = if first <= second {
                        (first, "diffusion")
                    } else {
                        (second, "drift")
                    };
                    worst.offer(slack, || {
                        Witness::at_node(&lat, x, t)
                            .with_lambda(format!("{};{}", st.vector(li), st.vector(mu)))
                            .with_detail(format!("{which} inequality"))
                    });
                }
            }
        }
    }
    Ok(worst.into_report(name, SIGN_TOL))
}

/// Coarsest dyadic `N` in `n_min..=n_max` from which [`check_gradient_condition`] passes on
/// every scanned finer lattice; `None` if it fails at `n_max`.
pub fn critical_n_gradient_condition(
    stencil: &StencilSet,
    coeffs: &CoefficientSet,
    dim: usize,
    (n_min, n_max): (usize, usize),
    m: u32,
    slack: f64,
    t_samples: &[f64],
) -> Result<Option<usize>> {
    let mut passing_from = None;
    let mut n = n_min;
    while n <= n_max {
        let lat = Lattice::new(dim, n)?;
        let s = Scheme::with_max_spacing(stencil.clone(), coeffs.clone(), lat, f64::INFINITY)?;
        if check_gradient_condition(&s, m, slack, t_samples)?.pass {
            passing_from.get_or_insert(n);
        } else {
            passing_from = None;
        }
        n *= 2;
    }
    Ok(passing_from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expr;
    use std::f64::consts::TAU;

    fn coeffs(q: &str, p: &str) -> CoefficientSet {
        let e = |s: &str| parse_expr(s).unwrap();
        CoefficientSet::new(vec![e(q), e(q)], vec![e(p), e(p)], e("1"), 1.0).unwrap()
    }

    fn scheme(n: usize, q: &str, p: &str) -> Scheme {
        Scheme::new(StencilSet::axes(1), coeffs(q, p), Lattice::new(1, n).unwrap()).unwrap()
    }

    #[test]
    fn constant_coefficients_pass() {
        let r = check_gradient_condition(&scheme(16, "1", "2"), 3, 0.25, &[0.0]).unwrap();
        assert!(r.pass && r.margin > 0.0);
    }

    #[test]
    fn critical_mesh_for_drift_gradient() {
        // q = 1, p = 1 + sin x: the drift inequality h² |δp| <= δ² (χ_λ + χ_μ)
        // holds once h is about sqrt(2) δ or smaller
        let st = StencilSet::axes(1);
        let co = coeffs("1", "1 + sin(x)");
        let n = critical_n_gradient_condition(&st, &co, 1, (8, 256), 2, 0.25, &[0.0])
            .unwrap()
            .unwrap();
        let h = TAU / n as f64;
        assert!(h <= 2f64.sqrt() * 0.25 * 1.5);
        assert!(TAU / (n as f64 / 2.0) > 0.3);
        assert!(
            !check_gradient_condition(&scheme(8, "1", "1 + sin(x)"), 2, 0.25, &[0.0])
                .unwrap()
                .pass
        );
    }

    #[test]
    fn degenerate_diffusion_fails_where_chi_vanishes() {
        let r = check_gradient_condition(&scheme(32, "sin(x)^2", "0"), 3, 0.25, &[0.0]).unwrap();
        assert!(!r.pass);
        let x = r.witness.x[0];
        let h = TAU / 32.0;
        // violation sits next to a zero of sin
        assert!(x.sin().abs() <= h + 1e-12, "witness at {x}");
    }

    #[test]
    fn preconditions_reported() {
        let r = check_gradient_condition(&scheme(16, "1", "-1"), 2, 0.25, &[0.0]).unwrap();
        assert!(!r.pass);
        assert!(r.witness.detail.unwrap().contains("negative"));
        assert!(check_gradient_condition(&scheme(16, "1", "1"), 2, 0.0, &[0.0]).is_err());
    }
}
