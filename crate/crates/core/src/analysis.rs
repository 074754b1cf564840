//! Mixed-difference functionals and multi-resolution studies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{data_norms, DataSet, FieldExpr, GridFunction, Lattice};
use crate::operator::{manufacture_rhs, Scheme, DEFAULT_MAX_SPACING};
use crate::parabolic::{solve_parabolic, Integrator, ParabolicSolution, TimeGrid};
use crate::richardson::{combine, vandermonde_coefficients};
use crate::stencil::StencilSet;

/// Largest `n` accepted by [`mixed_diff_sup`].
pub const MAX_MIXED_ORDER: usize = 4;

/// Errors below this are treated as roundoff; no order is reported for them.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

/// Nodes per axis of the fixed spacing used by the central-difference proxies.
pub const PROXY_NODES: usize = 16;

/// Interior times (besides `T`) at which the derivative study samples.
pub const INTERIOR_TIMES: usize = 8;

/// `sup_x Σ_{λ ∈ Λ₁ⁿ} |δ̄_λ u|²`, with `n = 0` giving `sup u²`.
pub fn mixed_diff_sup(u: &GridFunction, stencil: &StencilSet, n: usize) -> Result<f64> {
    if n > MAX_MIXED_ORDER {
        return Err(Error::InvalidArgument(format!(
            "mixed differences of order {n} exceed the cap {MAX_MIXED_ORDER}"
        )));
    }
    let lat = *u.lattice();
    let h = lat.h();
    let tables: Vec<(Vec<usize>, f64)> = stencil
        .vectors()
        .iter()
        .enumerate()
        .map(|(i, v)| Ok((lat.neighbor_table(v.components())?, stencil.direction_weight(i) / h)))
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0; lat.len()];
    fn walk(g: &[f64], depth: usize, tables: &[(Vec<usize>, f64)], acc: &mut [f64]) {
        if depth == 0 {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v * v;
            }
            return;
        }
        for (table, w) in tables {
            if *w == 0.0 {
                continue;
            }
            let next: Vec<f64> = table.iter().zip(g).map(|(&j, &gi)| w * (g[j] - gi)).collect();
            walk(&next, depth - 1, tables, acc);
        }
    }
    walk(u.values(), n, &tables, &mut acc);
    Ok(acc.into_iter().fold(0.0, f64::max))
}

/// `sup_x sqrt(Σ_axis (Dₐᵏ u)²)` with `Dₐᵏ` the centred `k`-th difference of
/// spacing `2π / PROXY_NODES` along axis `a`, for `k <= 3`.
pub fn central_proxy_sup(u: &GridFunction, k: usize) -> Result<f64> {
    let lat = *u.lattice();
    let n = lat.nodes_per_axis();
    if n < PROXY_NODES || n % PROXY_NODES != 0 {
        return Err(Error::InvalidArgument(format!(
            "proxy spacing needs a multiple of {PROXY_NODES} nodes per axis (got {n})"
        )));
    }
    let s = (n / PROXY_NODES) as i64;
    let big_h = std::f64::consts::TAU / PROXY_NODES as f64;
    // (offset in units of s, weight) before division by H^k
    let taps: &[(i64, f64)] = match k {
        0 => &[(0, 1.0)],
        1 => &[(1, 0.5), (-1, -0.5)],
        2 => &[(1, 1.0), (0, -2.0), (-1, 1.0)],
        3 => &[(2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)],
        _ => return Err(Error::InvalidArgument(format!("proxy order {k} exceeds 3"))),
    };
    let scale = big_h.powi(k as i32);
    let v = u.values();
    let mut acc = vec![0.0; lat.len()];
    let axes = if k == 0 { 1 } else { lat.dim() };
    for axis in 0..axes {
        for (idx, a) in acc.iter_mut().enumerate() {
            let m = lat.multi_index(idx);
            let mut d = 0.0;
            for &(off, w) in taps {
                let mut mm = m;
                mm[axis] = (m[axis] as i64 + off * s).rem_euclid(n as i64) as usize;
                d += w * v[lat.flat_index(&mm)];
            }
            d /= scale;
            *a += d * d;
        }
    }
    Ok(acc.into_iter().fold(0.0, f64::max).sqrt())
}

/// A parabolic problem without a lattice: the lattice is chosen per study level.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub dim: usize,
    pub stencil: StencilSet,
    pub coeffs: crate::fields::CoefficientSet,
    pub data: DataSet,
    /// Manufactured exact solution, if any.
    pub exact: Option<FieldExpr>,
    pub t_final: f64,
    pub integrator: Integrator,
    pub max_spacing: f64,
}

impl Problem {
    /// Problem whose data are manufactured from `u0`.
    pub fn manufactured(
        name: &str,
        stencil: StencilSet,
        coeffs: crate::fields::CoefficientSet,
        u0: FieldExpr,
        t_final: f64,
    ) -> Result<Self> {
        let data = manufacture_rhs(&coeffs, &stencil, &u0)?;
        Ok(Self {
            name: name.to_string(),
            dim: stencil.dim(),
            stencil,
            coeffs,
            data,
            exact: Some(u0),
            t_final,
            integrator: Integrator::Rk4,
            max_spacing: DEFAULT_MAX_SPACING,
        })
    }

    pub fn scheme(&self, n: usize) -> Result<Scheme> {
        Scheme::with_max_spacing(
            self.stencil.clone(),
            self.coeffs.clone(),
            Lattice::new(self.dim, n)?,
            self.max_spacing,
        )
    }

    pub fn solve(&self, n: usize, snapshots: &[f64]) -> Result<ParabolicSolution> {
        let scheme = self.scheme(n)?;
        let grid = TimeGrid::default_for(&scheme, self.t_final)?;
        solve_parabolic(&scheme, &self.data, &grid, self.integrator, snapshots)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub h: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub error_sup: f64,
    /// `log₂(e_prev / e)` against the previous (coarser) row.
    pub observed_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyResult {
    pub scenario: String,
    pub k: usize,
    pub weights: Vec<f64>,
    pub integrator: Integrator,
    pub t_final: f64,
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    pub fn finest_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.observed_order)
    }

    /// CSV with columns `h,N,error_sup,observed_order`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,N,error_sup,observed_order\n");
        for r in &self.rows {
            let order = r.observed_order.map(|o| format!("{o:.6}")).unwrap_or_default();
            let _ = writeln!(s, "{:.12e},{},{:.12e},{}", r.h, r.n, r.error_sup, order);
        }
        s
    }
}

/// Coarse sizes `N` in `n_list` whose `2^k`-fold refinement is also in `n_list`'s range.
pub fn coarse_levels(n_list: &[usize], k: usize) -> Vec<usize> {
    let max = n_list.iter().copied().max().unwrap_or(0);
    let mut out: Vec<usize> = n_list.iter().copied().filter(|&n| n << k <= max).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn check_dyadic(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("empty list of lattice sizes".into()));
    }
    for w in n_list.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::InvalidArgument(format!(
                "lattice sizes must double from level to level (got {} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Solve once per distinct lattice size, in parallel; results keyed by `N`.
fn solve_all(problem: &Problem, sizes: &[usize], snapshots: &[f64]) -> Result<BTreeMap<usize, ParabolicSolution>> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let runs: Vec<Result<(usize, ParabolicSolution)>> = sizes
        .par_iter()
        .map(|&n| Ok((n, problem.solve(n, snapshots)?)))
        .collect();
    runs.into_iter().collect()
}

/// Extrapolated error study: for each coarse `N` solve on `N, 2N, ..., 2^k N`,
/// combine with the order-`k` plan and compare with the manufactured solution
/// at the coarse nodes.
pub fn convergence_study(problem: &Problem, k: usize, coarse: &[usize]) -> Result<StudyResult> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("convergence study needs a manufactured solution".into()))?;
    check_dyadic(coarse)?;
    let plan = vandermonde_coefficients(k)?;
    let needed: Vec<usize> = coarse.iter().flat_map(|&n| (0..=k).map(move |j| n << j)).collect();
    let runs = solve_all(problem, &needed, &[])?;

    let mut rows: Vec<StudyRow> = Vec::with_capacity(coarse.len());
    for &n in coarse {
        let levels: Vec<GridFunction> = (0..=k).map(|j| runs[&(n << j)].final_state.clone()).collect();
        let combined = combine(&plan, &levels)?;
        let reference = exact.sample(problem.t_final, combined.lattice());
        let error_sup = combined.dist_sup(&reference)?;
        let mut row = StudyRow {
            h: combined.lattice().h(),
            n,
            error_sup,
            observed_order: None,
            flag: None,
        };
        if error_sup < ROUNDOFF_FLOOR {
            row.flag = Some("roundoff".into());
        }
        if let Some(prev) = rows.last() {
            if prev.error_sup >= ROUNDOFF_FLOOR && error_sup >= ROUNDOFF_FLOOR {
                row.observed_order = Some((prev.error_sup / error_sup).log2());
            }
            if error_sup > prev.error_sup && row.flag.is_none() {
                row.flag = Some("nonmonotone".into());
            }
        }
        rows.push(row);
    }
    Ok(StudyResult {
        scenario: problem.name.clone(),
        k,
        weights: plan.weights().to_vec(),
        integrator: problem.integrator,
        t_final: problem.t_final,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeRow {
    pub h: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// `max_t sqrt(V_j)` for `j = 0..=m`.
    pub mixed_norms: Vec<f64>,
    /// `max_t` of the fixed-spacing central-difference proxy, `j = 0..=min(m, 3)`.
    pub proxy: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeStudy {
    pub scenario: String,
    pub m: usize,
    pub t_final: f64,
    pub times: Vec<f64>,
    /// `F_m + G_m` on the coarsest lattice.
    pub data_bound: f64,
    pub rows: Vec<DerivativeRow>,
}

impl DerivativeStudy {
    /// `max / min` across levels of each `sqrt(V_j)`; `1` when all vanish.
    pub fn ratios(&self) -> Vec<f64> {
        (0..=self.m)
            .map(|j| {
                let vals = self.rows.iter().map(|r| r.mixed_norms[j]);
                let max = vals.clone().fold(0.0, f64::max);
                let min = vals.fold(f64::INFINITY, f64::min);
                if max == 0.0 {
                    1.0
                } else {
                    max / min
                }
            })
            .collect()
    }

    /// CSV with columns `h,N,n,mixed_norms,proxy`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,N,n,mixed_norms,proxy\n");
        for r in &self.rows {
            for j in 0..=self.m {
                let proxy = r.proxy.get(j).map(|p| format!("{p:.12e}")).unwrap_or_default();
                let _ = writeln!(s, "{:.12e},{},{},{:.12e},{}", r.h, r.n, j, r.mixed_norms[j], proxy);
            }
        }
        s
    }
}

/// Record `sqrt(V_j)`, `j <= m`, maximised over `T` and eight interior times,
/// on every lattice in `n_list`.
pub fn derivative_bound_study(problem: &Problem, m: usize, n_list: &[usize]) -> Result<DerivativeStudy> {
    if m > MAX_MIXED_ORDER {
        return Err(Error::InvalidArgument(format!("m = {m} exceeds {MAX_MIXED_ORDER}")));
    }
    check_dyadic(n_list)?;
    let t = problem.t_final;
    let times: Vec<f64> = (1..=INTERIOR_TIMES + 1)
        .map(|i| t * i as f64 / (INTERIOR_TIMES + 1) as f64)
        .collect();
    let runs = solve_all(problem, n_list, &times)?;
    let rows = n_list
        .iter()
        .map(|&n| {
            let run = &runs[&n];
            let mut mixed_norms = vec![0.0f64; m + 1];
            let mut proxy = vec![0.0f64; m.min(3) + 1];
            let with_proxy = n % PROXY_NODES == 0;
            for (_, u) in run
                .snapshots
                .iter()
                .chain(std::iter::once(&(t, run.final_state.clone())))
            {
                for j in 0..=m {
                    mixed_norms[j] = mixed_norms[j].max(mixed_diff_sup(u, &problem.stencil, j)?.sqrt());
                }
                if with_proxy {
                    for (j, p) in proxy.iter_mut().enumerate() {
                        *p = p.max(central_proxy_sup(u, j)?);
                    }
                }
            }
            Ok(DerivativeRow {
                h: Lattice::new(problem.dim, n)?.h(),
                n,
                mixed_norms,
                proxy: if with_proxy { proxy } else { Vec::new() },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (f_m, g_m) = data_norms(&problem.data, m as u32, t, &Lattice::new(problem.dim, n_list[0])?)?;
    Ok(DerivativeStudy {
        scenario: problem.name.clone(),
        m,
        t_final: t,
        times,
        data_bound: f_m + g_m,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{parse_expr, CoefficientSet};
    use crate::stencil::StencilVector;

    #[test]
    fn mixed_sup_of_constant_and_sine() {
        let st = StencilSet::axes(1);
        let lat = Lattice::new(1, 64).unwrap();
        let c = GridFunction::constant(lat, 3.0);
        for n in 1..=4 {
            assert_eq!(mixed_diff_sup(&c, &st, n).unwrap(), 0.0);
        }
        let s = GridFunction::from_fn(lat, |x| x[0].sin());
        // direct evaluation of (δ_+ sin)² + (δ_- sin)²
        let h = lat.h();
        let direct = (0..64)
            .map(|i| {
                let x = i as f64 * h;
                let a = ((x + h).sin() - x.sin()) / h;
                let b = ((x - h).sin() - x.sin()) / h;
                a * a + b * b
            })
            .fold(0.0, f64::max);
        assert!((mixed_diff_sup(&s, &st, 1).unwrap() - direct).abs() < 1e-13);
        let a = s.scale(2.5);
        assert!((mixed_diff_sup(&a, &st, 2).unwrap() - 6.25 * mixed_diff_sup(&s, &st, 2).unwrap()).abs() < 1e-12);
        assert!(mixed_diff_sup(&s, &st, 5).is_err());
    }

    #[test]
    fn proxy_of_sine() {
        let lat = Lattice::new(1, 64).unwrap();
        let s = GridFunction::from_fn(lat, |x| x[0].sin());
        let big_h = std::f64::consts::TAU / 16.0;
        assert!((central_proxy_sup(&s, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((central_proxy_sup(&s, 1).unwrap() - big_h.sin() / big_h).abs() < 1e-12);
        assert!(central_proxy_sup(&GridFunction::zeros(Lattice::new(1, 8).unwrap()), 1).is_err());
    }

    #[test]
    fn coarse_levels_respect_finest() {
        let l = [32, 64, 128, 256, 512];
        assert_eq!(coarse_levels(&l, 0), l.to_vec());
        assert_eq!(coarse_levels(&l, 2), vec![32, 64, 128]);
    }

    fn drift() -> Problem {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::from_pairs(
            &st,
            &[],
            &[(StencilVector::new(vec![1]), FieldExpr::constant(1.0))],
            FieldExpr::constant(1.0),
            1.0,
        )
        .unwrap();
        Problem::manufactured("drift", st, co, parse_expr("sin(x)*(1+t)").unwrap(), 1.0).unwrap()
    }

    #[test]
    fn upwind_is_first_order_and_extrapolation_helps() {
        let p = drift();
        let r0 = convergence_study(&p, 0, &[16, 32, 64]).unwrap();
        let o0 = r0.finest_order().unwrap();
        assert!((o0 - 1.0).abs() < 0.15, "{o0}");
        let r1 = convergence_study(&p, 1, &[16, 32, 64]).unwrap();
        let o1 = r1.finest_order().unwrap();
        assert!(o1 > o0 + 0.7, "{o1}");
        assert!(r0.to_csv().starts_with("h,N,error_sup,observed_order\n"));
    }

    #[test]
    fn constant_manufactured_solution_is_exact() {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::uniform(&st, 0.5, 0.2, 1.0, 1.0).unwrap();
        let p = Problem::manufactured("const", st, co, parse_expr("2*(1+t)").unwrap(), 1.0).unwrap();
        let r = convergence_study(&p, 1, &[16, 32]).unwrap();
        assert!(r.rows.iter().all(|row| row.error_sup <= 1e-10));
        assert!(r.rows.iter().all(|row| row.observed_order.is_none()));
    }

    #[test]
    fn zero_data_gives_zero_functionals() {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::uniform(&st, 0.5, 0.0, 1.0, 1.0).unwrap();
        let p = Problem {
            name: "zero".into(),
            dim: 1,
            stencil: st,
            coeffs: co,
            data: DataSet::default(),
            exact: None,
            t_final: 0.5,
            integrator: Integrator::Rk4,
            max_spacing: DEFAULT_MAX_SPACING,
        };
        let d = derivative_bound_study(&p, 3, &[16, 32]).unwrap();
        assert!(d.rows.iter().all(|r| r.mixed_norms.iter().all(|&v| v == 0.0)));
        assert_eq!(d.ratios(), vec![1.0; 4]);
    }
}
