//! Falsification probes for the first- and higher-order structural
//! inequalities, evaluated with the identity positivity-preserving operator on
//! a bank of band-limited test functions.

use std::collections::HashMap;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{effective_times, ValidationReport, Witness, Worst, REL_TOL};
use crate::error::{Error, Result};
use crate::fields::{parse_expr, FieldExpr, GridFunction, Lattice};
use crate::operator::Scheme;

/// `τ₀` values swept by [`derivative_weight_sweep`].
pub const DERIVATIVE_WEIGHT_SWEEP: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

const FIXED_1D: [&str; 12] = [
    "sin(x)",
    "cos(x)",
    "sin(2*x)",
    "cos(2*x)",
    "sin(3*x)",
    "cos(3*x)",
    "sin(x) + 0.5*cos(2*x)",
    "cos(x) - 0.3*sin(3*x)",
    "sin(x)^2",
    "cos(x)^3",
    "1 + sin(x)",
    "sin(2*x) + sin(3*x)",
];

const FIXED_2D: [&str; 12] = [
    "sin(x)",
    "cos(y)",
    "sin(x+y)",
    "cos(x-y)",
    "sin(2*x)*cos(y)",
    "cos(3*y)",
    "sin(x)*sin(y)",
    "cos(2*x+y)",
    "sin(x-2*y)",
    "cos(x) + sin(2*y)",
    "sin(3*x)",
    "sin(x+y)^2",
];

const FIXED_3D: [&str; 12] = [
    "sin(x)",
    "cos(y)",
    "sin(z)",
    "sin(x+y+z)",
    "cos(x-z)",
    "sin(2*y)*cos(z)",
    "cos(3*z)",
    "sin(x)*sin(y)*sin(z)",
    "cos(x+2*y-z)",
    "sin(x-y) + cos(2*z)",
    "sin(3*x)",
    "cos(y+z)^2",
];

/// Finite catalog of smooth periodic test functions.
#[derive(Clone, Debug, PartialEq)]
pub struct TestBank {
    functions: Vec<FieldExpr>,
}

impl TestBank {
    pub fn new(functions: Vec<FieldExpr>) -> Self {
        Self { functions }
    }

    /// Twelve fixed trigonometric polynomials with wave numbers at most 3 plus
    /// eight random ones drawn from `seed`.
    pub fn standard(dim: usize, seed: u64) -> Result<Self> {
        let fixed: &[&str] = match dim {
            1 => &FIXED_1D,
            2 => &FIXED_2D,
            3 => &FIXED_3D,
            _ => return Err(Error::InvalidArgument(format!("unsupported dimension {dim}"))),
        };
        let mut functions = fixed.iter().map(|s| parse_expr(s)).collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let mut f = FieldExpr::zero();
            for _ in 0..3 {
                let mut wave = [0i32; 3];
                while wave == [0; 3] {
                    for w in wave.iter_mut().take(dim) {
                        *w = rng.gen_range(-3..=3);
                    }
                }
                let amp: f64 = rng.gen_range(-1.0..1.0);
                let term = if rng.gen_bool(0.5) {
                    FieldExpr::sin(wave)
                } else {
                    FieldExpr::cos(wave)
                };
                f = f.add(&term.scale(amp));
            }
            functions.push(f);
        }
        Ok(Self { functions })
    }

    pub fn functions(&self) -> &[FieldExpr] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// Parameters shared by both probes: order `m`, slack `δ`, and `K₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeParams {
    pub order: u32,
    pub slack: f64,
    pub form_weight: f64,
}

impl ProbeParams {
    fn check(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidArgument("probe order m must be >= 1".into()));
        }
        if !(self.slack > 0.0 && self.slack <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "slack must lie in (0, 1] (got {})",
                self.slack
            )));
        }
        if !(self.form_weight >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "form weight must be >= 0 (got {})",
                self.form_weight
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    FirstOrder,
    HigherOrder,
}

/// A member of `Λ = Λ₁ ∪ Λ₂`: a lattice direction or a coordinate derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Dir {
    Grid(usize),
    Axis(usize),
}

fn directions(scheme: &Scheme) -> Vec<Dir> {
    (0..scheme.stencil().len())
        .map(Dir::Grid)
        .chain((0..scheme.lattice().dim()).map(Dir::Axis))
        .collect()
}

fn shifts_of(dirs: &[Dir]) -> Vec<usize> {
    dirs.iter()
        .filter_map(|d| match d {
            Dir::Grid(i) => Some(*i),
            Dir::Axis(_) => None,
        })
        .collect()
}

type Key = (usize, Vec<Dir>, Vec<usize>);

/// Memoized `T_s δ̄_dirs e` for a set of expressions at one time. All the
/// operators involved commute, so keys are sorted.
struct DiffCache<'a> {
    scheme: &'a Scheme,
    exprs: Vec<&'a FieldExpr>,
    t: f64,
    tables: &'a [Vec<usize>],
    cache: HashMap<Key, Rc<GridFunction>>,
}

impl<'a> DiffCache<'a> {
    fn get(&mut self, id: usize, dirs: &[Dir], shifts: &[usize]) -> Result<Rc<GridFunction>> {
        let mut dirs = dirs.to_vec();
        dirs.sort();
        let mut shifts = shifts.to_vec();
        shifts.sort();
        let key = (id, dirs, shifts);
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let (_, dirs, shifts) = &key;
        let value = if let Some((&last, rest)) = shifts.split_last() {
            let base = self.get(id, dirs, rest)?;
            let v = base.values();
            let vals = self.tables[last].iter().map(|&j| v[j]).collect();
            GridFunction::from_vec_unchecked(*base.lattice(), vals)
        } else if let Some(pos) = dirs.iter().rposition(|d| matches!(d, Dir::Grid(_))) {
            let Dir::Grid(i) = dirs[pos] else { unreachable!() };
            let mut rest = dirs.clone();
            rest.remove(pos);
            let base = self.get(id, &rest, &[])?;
            let w = self.scheme.stencil().direction_weight(i) / self.scheme.h();
            let v = base.values();
            let vals = self.tables[i].iter().zip(v).map(|(&j, &vi)| w * (v[j] - vi)).collect();
            GridFunction::from_vec_unchecked(*base.lattice(), vals)
        } else {
            let dim = self.scheme.lattice().dim();
            let mut alpha = vec![0u32; dim];
            for d in dirs {
                if let Dir::Axis(a) = d {
                    alpha[*a] += 1;
                }
            }
            let order: u32 = alpha.iter().sum();
            let e = self.exprs[id].derivative(&alpha, 0)?;
            e.sample(self.t, self.scheme.lattice())
                .scale(self.scheme.stencil().derivative_weight().powi(order as i32))
        };
        let value = Rc::new(value);
        self.cache.insert(key, value.clone());
        Ok(value)
    }
}

/// Evaluator of both sides of the probed inequalities for one test function
/// at one time. Expression ids: `0` is the test function, `1..=L` the `q_μ`,
/// `L+1..=2L` the `p_μ`.
struct ProbeEval<'a> {
    cache: DiffCache<'a>,
    dirs: Vec<Dir>,
    rates: Vec<GridFunction>,
    c: GridFunction,
    n_vec: usize,
}

impl<'a> ProbeEval<'a> {
    fn new(scheme: &'a Scheme, phi: &'a FieldExpr, t: f64, tables: &'a [Vec<usize>]) -> Self {
        let mut exprs = vec![phi];
        exprs.extend(scheme.coeffs().q.iter());
        exprs.extend(scheme.coeffs().p.iter());
        let grids = scheme.sample(t);
        Self {
            n_vec: scheme.stencil().len(),
            rates: grids.rates(scheme.h()),
            c: grids.c,
            dirs: directions(scheme),
            cache: DiffCache {
                scheme,
                exprs,
                t,
                tables,
                cache: HashMap::new(),
            },
        }
    }

    fn h(&self) -> f64 {
        self.cache.scheme.h()
    }

    fn len(&self) -> usize {
        self.cache.scheme.lattice().len()
    }

    /// `δ_μ g` (plain difference) at node `i`.
    fn plain_delta(&self, g: &GridFunction, mu: usize, i: usize) -> f64 {
        let v = g.values();
        (v[self.cache.tables[mu][i]] - v[i]) / self.h()
    }

    /// `𝒬(g)` accumulated into `out` with weight `w`.
    fn add_q_form(&self, g: &GridFunction, w: f64, out: &mut [f64]) {
        for mu in 0..self.n_vec {
            let rates = self.rates[mu].values();
            for (i, o) in out.iter_mut().enumerate() {
                let d = self.plain_delta(g, mu, i);
                *o += w * rates[i] * d * d;
            }
        }
    }

    /// `2 Σ_{λ∈Λ} (δ̄_λ ψ) L⁰_λ T_λ ψ` with `ψ = δ̄_base φ`, accumulated into `out`.
    fn add_a1(&mut self, base: &[Dir], w: f64, out: &mut [f64]) -> Result<()> {
        let h = self.h();
        for lam in self.dirs.clone() {
            let mut with_lam = base.to_vec();
            with_lam.push(lam);
            let d_psi = self.cache.get(0, &with_lam, &[])?;
            if d_psi.sup_abs() == 0.0 {
                continue;
            }
            let shifted = self.cache.get(0, base, &shifts_of(&[lam]))?;
            let mut l0 = vec![0.0; self.len()];
            for mu in 0..self.n_vec {
                let dq = self.cache.get(1 + mu, &[lam], &[])?;
                let dp = self.cache.get(1 + self.n_vec + mu, &[lam], &[])?;
                if dq.sup_abs() == 0.0 && dp.sup_abs() == 0.0 {
                    continue;
                }
                for (i, l) in l0.iter_mut().enumerate() {
                    *l += (dq.values()[i] / h + dp.values()[i]) * self.plain_delta(&shifted, mu, i);
                }
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += 2.0 * w * d_psi.values()[i] * l0[i];
            }
        }
        Ok(())
    }

    /// `Σ_{λ∈Λ²} (δ̄_λ φ) Q_λ T_λ φ`.
    fn add_second_q(&mut self, w: f64, out: &mut [f64]) -> Result<()> {
        let h = self.h();
        for a in self.dirs.clone() {
            for b in self.dirs.clone() {
                let pair = [a, b];
                let d_phi = self.cache.get(0, &pair, &[])?;
                if d_phi.sup_abs() == 0.0 {
                    continue;
                }
                let shifted = self.cache.get(0, &[], &shifts_of(&pair))?;
                let mut qv = vec![0.0; self.len()];
                for mu in 0..self.n_vec {
                    let dq = self.cache.get(1 + mu, &pair, &[])?;
                    if dq.sup_abs() == 0.0 {
                        continue;
                    }
                    for (i, q) in qv.iter_mut().enumerate() {
                        *q += dq.values()[i] / h * self.plain_delta(&shifted, mu, i);
                    }
                }
                for (i, o) in out.iter_mut().enumerate() {
                    *o += w * d_phi.values()[i] * qv[i];
                }
            }
        }
        Ok(())
    }

    /// `Σ_{λ∈Λ^order} 𝒬(δ̄_λ φ)` and `Σ_{λ∈Λ^order} |δ̄_λ φ|²`.
    fn energy(&mut self, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut q = vec![0.0; self.len()];
        let mut sq = vec![0.0; self.len()];
        let mut seqs: Vec<Vec<Dir>> = vec![Vec::new()];
        for _ in 0..order {
            seqs = seqs
                .into_iter()
                .flat_map(|s| {
                    self.dirs.iter().map(move |d| {
                        let mut s = s.clone();
                        s.push(*d);
                        s
                    })
                })
                .collect();
        }
        for s in seqs {
            let g = self.cache.get(0, &s, &[])?;
            self.add_q_form(&g, 1.0, &mut q);
            for (o, v) in sq.iter_mut().zip(g.values()) {
                *o += v * v;
            }
        }
        Ok((q, sq))
    }

    /// Nodewise `(lhs, rhs)` for the first-order inequality.
    fn first_order(&mut self, p: &ProbeParams) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lhs = vec![0.0; self.len()];
        self.add_a1(&[], p.order as f64, &mut lhs)?;
        let (q1, sq1) = self.energy(1)?;
        let (q0, _) = self.energy(0)?;
        let c = self.c.values();
        let rhs = (0..self.len())
            .map(|i| (1.0 - p.slack) * q1[i] + p.form_weight * q0[i] + 2.0 * (1.0 - p.slack) * c[i] * sq1[i])
            .collect();
        Ok((lhs, rhs))
    }

    /// Nodewise `(Σ_ν A₁(δ̄_ν φ), Σ_{Λ²} (δ̄_λ φ) Q_λ T_λ φ, rhs)`; the left side for
    /// index `n` is `n·first + n(n-1)·second`.
    fn higher_order(&mut self, p: &ProbeParams) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut first = vec![0.0; self.len()];
        for nu in self.dirs.clone() {
            self.add_a1(&[nu], 1.0, &mut first)?;
        }
        let mut second = vec![0.0; self.len()];
        self.add_second_q(1.0, &mut second)?;
        let (q2, sq2) = self.energy(2)?;
        let (q1, sq1) = self.energy(1)?;
        let c = self.c.values();
        let rhs = (0..self.len())
            .map(|i| {
                (1.0 - p.slack) * q2[i]
                    + p.form_weight * q1[i]
                    + 2.0 * (1.0 - p.slack) * c[i] * sq2[i]
                    + p.form_weight * sq1[i]
            })
            .collect();
        Ok((first, second, rhs))
    }
}

struct Outcome {
    worst: Worst,
    scale: f64,
}

fn run_probe(
    scheme: &Scheme,
    kind: ProbeKind,
    params: &ProbeParams,
    bank: &TestBank,
    t_samples: &[f64],
) -> Result<ValidationReport> {
    params.check()?;
    if kind == ProbeKind::HigherOrder && params.order < 2 {
        return Err(Error::InvalidArgument("the higher-order probe needs m >= 2".into()));
    }
    if scheme.stencil().direction_weights().iter().all(|&t| t == 0.0) {
        return Err(Error::InvalidArgument("probe needs nonzero direction weights".into()));
    }
    for f in bank.functions() {
        crate::fields::check_dim(f, scheme.lattice().dim(), "test function")?;
    }
    let lat: Lattice = *scheme.lattice();
    let tables: Vec<Vec<usize>> = scheme
        .stencil()
        .vectors()
        .iter()
        .map(|v| lat.neighbor_table(v.components()))
        .collect::<Result<_>>()?;
    let times = effective_times(scheme, t_samples);
    let name = match kind {
        ProbeKind::FirstOrder => "probe_first_order",
        ProbeKind::HigherOrder => "probe_higher_order",
    };

    let outcomes: Vec<Result<Outcome>> = bank
        .functions()
        .par_iter()
        .enumerate()
        .map(|(fi, phi)| {
            let mut worst = Worst::new();
            let mut scale: f64 = 0.0;
            for &t in &times {
                let mut ev = ProbeEval::new(scheme, phi, t, &tables);
                let mut consider = |lhs: &[f64], rhs: &[f64], n: Option<u32>, worst: &mut Worst| {
                    for i in 0..lhs.len() {
                        scale = scale.max(lhs[i].abs() + rhs[i].abs());
                        worst.offer(rhs[i] - lhs[i], || {
                            let mut detail = format!("test function #{fi}: {phi}");
                            if let Some(n) = n {
                                detail.push_str(&format!(", n = {n}"));
                            }
                            Witness::at_node(&lat, i, t).with_detail(detail)
                        });
                    }
                };
                match kind {
                    ProbeKind::FirstOrder => {
                        let (lhs, rhs) = ev.first_order(params)?;
                        consider(&lhs, &rhs, None, &mut worst);
                    }
                    ProbeKind::HigherOrder => {
                        let (first, second, rhs) = ev.higher_order(params)?;
                        for n in 1..=params.order {
                            let nf = n as f64;
                            let lhs: Vec<f64> = first
                                .iter()
                                .zip(&second)
                                .map(|(a, b)| nf * a + nf * (nf - 1.0) * b)
                                .collect();
                            consider(&lhs, &rhs, Some(n), &mut worst);
                        }
                    }
                }
            }
            Ok(Outcome { worst, scale })
        })
        .collect();

    let mut worst = Worst::new();
    let mut scale: f64 = 0.0;
    for o in outcomes {
        let o = o?;
        scale = scale.max(o.scale);
        worst.merge(o.worst);
    }
    if worst.value == f64::INFINITY {
        worst.value = 0.0;
    }
    Ok(worst.into_report(name, REL_TOL * (1.0 + scale)))
}

/// Falsification probe of the first-order structural inequality.
pub fn probe_first_order(
    scheme: &Scheme,
    params: &ProbeParams,
    bank: &TestBank,
    t_samples: &[f64],
) -> Result<ValidationReport> {
    run_probe(scheme, ProbeKind::FirstOrder, params, bank, t_samples)
}

/// Falsification probe of the higher-order structural inequality, `n = 1..=m`.
pub fn probe_higher_order(
    scheme: &Scheme,
    params: &ProbeParams,
    bank: &TestBank,
    t_samples: &[f64],
) -> Result<ValidationReport> {
    run_probe(scheme, ProbeKind::HigherOrder, params, bank, t_samples)
}

/// Probe margins for each `τ₀` in `weights`.
pub fn derivative_weight_sweep(
    scheme: &Scheme,
    kind: ProbeKind,
    params: &ProbeParams,
    bank: &TestBank,
    t_samples: &[f64],
    weights: &[f64],
) -> Result<Vec<(f64, ValidationReport)>> {
    weights
        .iter()
        .map(|&derivative_weight| {
            let stencil = scheme.stencil().clone().with_derivative_weight(derivative_weight)?;
            let s = Scheme::with_max_spacing(
                stencil,
                scheme.coeffs().clone(),
                *scheme.lattice(),
                scheme.max_spacing(),
            )?;
            Ok((derivative_weight, run_probe(&s, kind, params, bank, t_samples)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::CoefficientSet;
    use crate::stencil::StencilSet;

    fn scheme(n: usize, q: &str, p: [&str; 2], c: &str) -> Scheme {
        let st = StencilSet::axes(1);
        let e = |s: &str| parse_expr(s).unwrap();
        let co = CoefficientSet::new(vec![e(q), e(q)], vec![e(p[0]), e(p[1])], e(c), 1.0).unwrap();
        Scheme::new(st, co, Lattice::new(1, n).unwrap()).unwrap()
    }

    fn params(m: u32, slack: f64, form_weight: f64) -> ProbeParams {
        ProbeParams {
            order: m,
            slack,
            form_weight,
        }
    }

    #[test]
    fn bank_is_reproducible() {
        let a = TestBank::standard(2, 7).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, TestBank::standard(2, 7).unwrap());
        assert_ne!(a, TestBank::standard(2, 8).unwrap());
        assert!(a.functions().iter().all(|f| f.max_wave_number() <= 3));
    }

    #[test]
    fn constant_coefficients_pass_with_nonnegative_margin() {
        let s = scheme(16, "1", ["0.5", "0.5"], "1");
        let bank = TestBank::standard(1, 1).unwrap();
        let r = probe_first_order(&s, &params(3, 0.5, 0.0), &bank, &[0.0]).unwrap();
        assert!(r.pass && r.margin >= 0.0, "{r:?}");
        let r = probe_higher_order(&s, &params(3, 0.5, 0.0), &bank, &[0.0]).unwrap();
        assert!(r.pass && r.margin >= 0.0, "{r:?}");
    }

    #[test]
    fn constant_test_function_gives_zero_margin() {
        let s = scheme(16, "1+0.5*sin(x)", ["1", "1"], "1");
        let bank = TestBank::new(vec![FieldExpr::constant(2.5)]);
        for r in [
            probe_first_order(&s, &params(2, 0.5, 0.0), &bank, &[0.0]).unwrap(),
            probe_higher_order(&s, &params(2, 0.5, 0.0), &bank, &[0.0]).unwrap(),
        ] {
            assert!(r.pass);
            assert_eq!(r.margin, 0.0);
        }
    }

    #[test]
    fn steep_diffusion_with_small_reaction_is_falsified() {
        let s = scheme(32, "0.05 + sin(2*x)^2", ["0", "0"], "0.01");
        let bank = TestBank::standard(1, 3).unwrap();
        let r = probe_first_order(&s, &params(1, 0.9, 0.0), &bank, &[0.0]).unwrap();
        assert!(!r.pass, "{r:?}");
        assert_eq!(r.witness.x.len(), 1);
    }

    #[test]
    fn margin_invariant_under_constant_shift() {
        let s = scheme(16, "1+0.3*cos(x)", ["1", "0.5"], "2");
        let f = parse_expr("sin(x) + 0.2*cos(3*x)").unwrap();
        let b1 = TestBank::new(vec![f.clone()]);
        let b2 = TestBank::new(vec![f.add(&FieldExpr::constant(7.0))]);
        let p = params(2, 0.5, 0.1);
        let r1 = probe_higher_order(&s, &p, &b1, &[0.0]).unwrap();
        let r2 = probe_higher_order(&s, &p, &b2, &[0.0]).unwrap();
        assert!((r1.margin - r2.margin).abs() < 1e-10 * (1.0 + r1.margin.abs()));
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = scheme(16, "1", ["0", "0"], "1");
        let bank = TestBank::standard(1, 1).unwrap();
        assert!(probe_first_order(&s, &params(0, 0.5, 0.0), &bank, &[0.0]).is_err());
        assert!(probe_first_order(&s, &params(1, 1.5, 0.0), &bank, &[0.0]).is_err());
        assert!(probe_higher_order(&s, &params(1, 0.5, 0.0), &bank, &[0.0]).is_err());
    }

    #[test]
    fn sweep_covers_all_tau0() {
        let s = scheme(16, "1", ["0", "0"], "1");
        let bank = TestBank::new(vec![parse_expr("sin(x)").unwrap()]);
        let out = derivative_weight_sweep(
            &s,
            ProbeKind::FirstOrder,
            &params(1, 0.5, 0.0),
            &bank,
            &[0.0],
            &DERIVATIVE_WEIGHT_SWEEP,
        )
        .unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|(_, r)| r.pass));
    }
}
