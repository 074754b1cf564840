//! Discrete operators `L_h⁰`, `L_h`, the quadratic form `𝒬`, and the continuum
//! operator used to manufacture right-hand sides.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{check_dim, CoefficientSet, DataSet, FieldExpr, GridFunction, Lattice, SampledField};
use crate::stencil::StencilSet;

/// Default scheme-validity ceiling `h₀` (eight nodes per axis).
pub const DEFAULT_MAX_SPACING: f64 = PI / 4.0;

/// Stencil, coefficients and lattice: everything needed to apply `L_h`.
#[derive(Clone, Debug)]
pub struct Scheme {
    stencil: StencilSet,
    coeffs: CoefficientSet,
    lattice: Lattice,
    max_spacing: f64,
    neighbors: Vec<Vec<usize>>,
}

/// Coefficients sampled at the nodes at one time.
#[derive(Clone, Debug)]
pub struct CoefficientGrids {
    pub q: Vec<GridFunction>,
    pub p: Vec<GridFunction>,
    pub c: GridFunction,
}

impl CoefficientGrids {
    /// `χ_λ = q_λ + h p_λ`
    pub fn rates(&self, h: f64) -> Vec<GridFunction> {
        self.q
            .iter()
            .zip(&self.p)
            .map(|(q, p)| q.zip_map(p, |a, b| a + h * b).expect("same lattice"))
            .collect()
    }
}

impl Scheme {
    pub fn new(stencil: StencilSet, coeffs: CoefficientSet, lattice: Lattice) -> Result<Self> {
        Self::with_max_spacing(stencil, coeffs, lattice, DEFAULT_MAX_SPACING)
    }

    pub fn with_max_spacing(
        stencil: StencilSet,
        coeffs: CoefficientSet,
        lattice: Lattice,
        max_spacing: f64,
    ) -> Result<Self> {
        if coeffs.len() != stencil.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficient entries for {} stencil vectors",
                coeffs.len(),
                stencil.len()
            )));
        }
        if stencil.dim() != lattice.dim() {
            return Err(Error::InvalidArgument(format!(
                "stencil dimension {} does not match lattice dimension {}",
                stencil.dim(),
                lattice.dim()
            )));
        }
        if lattice.h() > max_spacing * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "mesh size {} exceeds the scheme ceiling max_spacing = {max_spacing}",
                lattice.h()
            )));
        }
        for (i, e) in coeffs.all().enumerate() {
            check_dim(e, lattice.dim(), &format!("coefficient #{i}"))?;
        }
        let neighbors = stencil
            .vectors()
            .iter()
            .map(|v| lattice.neighbor_table(v.components()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            stencil,
            coeffs,
            lattice,
            max_spacing,
            neighbors,
        })
    }

    /// Same stencil and coefficients on another lattice (e.g. a refinement).
    pub fn on_lattice(&self, lattice: Lattice) -> Result<Self> {
        Self::with_max_spacing(self.stencil.clone(), self.coeffs.clone(), lattice, self.max_spacing)
    }

    pub fn stencil(&self) -> &StencilSet {
        &self.stencil
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn h(&self) -> f64 {
        self.lattice.h()
    }

    pub fn max_spacing(&self) -> f64 {
        self.max_spacing
    }

    pub(crate) fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn sample(&self, t: f64) -> CoefficientGrids {
        let s = |e: &FieldExpr| e.sample(t, &self.lattice);
        CoefficientGrids {
            q: self.coeffs.q.iter().map(s).collect(),
            p: self.coeffs.p.iter().map(s).collect(),
            c: s(&self.coeffs.c),
        }
    }

    pub fn rates(&self, t: f64) -> Vec<GridFunction> {
        self.sample(t).rates(self.h())
    }

    fn check_lattice(&self, phi: &GridFunction) -> Result<()> {
        if phi.lattice() != &self.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }

    /// `L⁰φ = Σ_λ (χ_λ / h²)(φ(x + hλ) - φ(x))` with pre-sampled `χ`.
    pub(crate) fn principal_with(&self, rates: &[GridFunction], phi: &GridFunction) -> GridFunction {
        let h2 = self.h() * self.h();
        let v = phi.values();
        let mut out = vec![0.0; v.len()];
        for (table, rates) in self.neighbors.iter().zip(rates) {
            for ((o, &j), (&vi, &w)) in out.iter_mut().zip(table).zip(v.iter().zip(rates.values())) {
                *o += w * (v[j] - vi) / h2;
            }
        }
        GridFunction::from_vec_unchecked(self.lattice, out)
    }
}

/// `L_h⁰ φ = h⁻¹ Σ q_λ δ_λ φ + Σ p_λ δ_λ φ` at time `t`.
pub fn apply_principal_part(scheme: &Scheme, t: f64, phi: &GridFunction) -> Result<GridFunction> {
    scheme.check_lattice(phi)?;
    Ok(scheme.principal_with(&scheme.rates(t), phi))
}

/// `L_h φ = L_h⁰ φ - c φ`.
pub fn apply_operator(scheme: &Scheme, t: f64, phi: &GridFunction) -> Result<GridFunction> {
    scheme.check_lattice(phi)?;
    let grids = scheme.sample(t);
    let l0 = scheme.principal_with(&grids.rates(scheme.h()), phi);
    l0.zip_map(&grids.c.mul(phi)?, |a, b| a - b)
}

/// `𝒬(φ) = Σ_μ χ_μ (δ_μ φ)²`, nodewise.
pub fn dirichlet_form(scheme: &Scheme, t: f64, phi: &GridFunction) -> Result<GridFunction> {
    scheme.check_lattice(phi)?;
    Ok(dirichlet_form_with(scheme, &scheme.rates(t), phi))
}

pub(crate) fn dirichlet_form_with(scheme: &Scheme, rates: &[GridFunction], phi: &GridFunction) -> GridFunction {
    let h = scheme.h();
    let v = phi.values();
    let mut out = vec![0.0; v.len()];
    for (table, rates) in scheme.neighbors().iter().zip(rates) {
        for ((o, &j), (&vi, &w)) in out.iter_mut().zip(table).zip(v.iter().zip(rates.values())) {
            let d = (v[j] - vi) / h;
            *o += w * d * d;
        }
    }
    GridFunction::from_vec_unchecked(*phi.lattice(), out)
}

/// `𝓛u = ½ Σ_λ q_λ λ_i λ_j D_i D_j u + Σ_λ p_λ λ_i D_i u - c u` as a closed-form field.
pub fn continuum_operator(coeffs: &CoefficientSet, stencil: &StencilSet, u: &FieldExpr) -> Result<FieldExpr> {
    if u.m_avail() < 2 {
        return Err(Error::DerivativeOrder {
            requested: 2,
            available: u.m_avail(),
        });
    }
    if coeffs.len() != stencil.len() {
        return Err(Error::InvalidArgument(
            "coefficient set does not match the stencil".into(),
        ));
    }
    let dim = stencil.dim();
    let grad: Vec<FieldExpr> = (0..dim).map(|i| u.d_axis(i)).collect();
    let mut out = coeffs.c.mul(u).scale(-1.0);
    for (idx, v) in stencil.vectors().iter().enumerate() {
        let lam = v.components();
        // directional first and second derivatives along λ
        let mut first = FieldExpr::zero();
        let mut second = FieldExpr::zero();
        for i in 0..dim {
            if lam[i] == 0 {
                continue;
            }
            first = first.add(&grad[i].scale(lam[i] as f64));
            for j in 0..dim {
                if lam[j] != 0 {
                    second = second.add(&grad[i].d_axis(j).scale((lam[i] * lam[j]) as f64));
                }
            }
        }
        out = out
            .add(&coeffs.q[idx].mul(&second).scale(0.5))
            .add(&coeffs.p[idx].mul(&first));
    }
    Ok(out)
}

/// Data for which `u0` solves `∂_t u = 𝓛u + f`, `u(0) = g`.
pub fn manufacture_rhs(coeffs: &CoefficientSet, stencil: &StencilSet, u0: &FieldExpr) -> Result<DataSet> {
    let lu = continuum_operator(coeffs, stencil, u0)?;
    let f = u0.d_time().sub(&lu);
    DataSet::new(f, u0.at_time_zero())
}

/// Coefficients and forcing pre-evaluated on the scheme lattice, ready for
/// repeated right-hand-side evaluation `L_h u + f` inside time steppers.
pub(crate) struct Evaluator<'a> {
    scheme: &'a Scheme,
    q: Vec<SampledField>,
    p: Vec<SampledField>,
    c: SampledField,
    f: SampledField,
    weights: Vec<Vec<f64>>,
    c_now: Vec<f64>,
    f_now: Vec<f64>,
    scratch: Vec<f64>,
    coeff_static: bool,
    primed: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(scheme: &'a Scheme, forcing: &FieldExpr) -> Self {
        let lat = *scheme.lattice();
        let n = lat.len();
        let q: Vec<_> = scheme.coeffs.q.iter().map(|e| SampledField::new(e, &lat)).collect();
        let p: Vec<_> = scheme.coeffs.p.iter().map(|e| SampledField::new(e, &lat)).collect();
        let c = SampledField::new(&scheme.coeffs.c, &lat);
        let coeff_static = scheme.coeffs.is_time_independent();
        Self {
            scheme,
            weights: vec![vec![0.0; n]; q.len()],
            q,
            p,
            c,
            f: SampledField::new(forcing, &lat),
            c_now: vec![0.0; n],
            f_now: vec![0.0; n],
            scratch: vec![0.0; n],
            coeff_static,
            primed: false,
        }
    }

    fn update(&mut self, t: f64) {
        if !(self.coeff_static && self.primed) {
            let h = self.scheme.h();
            let h2 = h * h;
            for (i, w) in self.weights.iter_mut().enumerate() {
                self.q[i].fill(t, w);
                self.p[i].fill(t, &mut self.scratch);
                for (wi, pi) in w.iter_mut().zip(&self.scratch) {
                    *wi = (*wi + h * pi) / h2;
                }
            }
            self.c.fill(t, &mut self.c_now);
            self.primed = true;
        }
        self.f.fill(t, &mut self.f_now);
    }

    /// `out = L_h u + f` at time `t`.
    pub fn rhs(&mut self, t: f64, u: &[f64], out: &mut [f64]) {
        self.update(t);
        for (o, (&ui, (&ci, &fi))) in out.iter_mut().zip(u.iter().zip(self.c_now.iter().zip(&self.f_now))) {
            *o = fi - ci * ui;
        }
        for (table, w) in self.scheme.neighbors.iter().zip(&self.weights) {
            for ((o, &j), (&ui, &wi)) in out.iter_mut().zip(table).zip(u.iter().zip(w)) {
                *o += wi * (u[j] - ui);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expr;
    use crate::stencil::{StencilSet, StencilVector};

    fn heat(n: usize, c: f64) -> Scheme {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::uniform(&st, 0.5, 0.0, c, 1.0).unwrap();
        Scheme::new(st, co, Lattice::new(1, n).unwrap()).unwrap()
    }

    fn upwind(n: usize) -> Scheme {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::from_pairs(
            &st,
            &[],
            &[(StencilVector::new(vec![1]), FieldExpr::constant(1.0))],
            FieldExpr::constant(1.0),
            1.0,
        )
        .unwrap();
        Scheme::new(st, co, Lattice::new(1, n).unwrap()).unwrap()
    }

    #[test]
    fn l0_annihilates_constants() {
        let s = heat(16, 1.0);
        let phi = GridFunction::constant(*s.lattice(), 4.2);
        assert_eq!(apply_principal_part(&s, 0.0, &phi).unwrap().sup_abs(), 0.0);
        assert_eq!(dirichlet_form(&s, 0.0, &phi).unwrap().sup_abs(), 0.0);
    }

    #[test]
    fn heat_eigenvalue() {
        let s = heat(64, 1.0);
        let h = s.h();
        let phi = GridFunction::from_fn(*s.lattice(), |x| x[0].sin());
        let eig = (h.cos() - 1.0) / (h * h);
        let l0 = apply_principal_part(&s, 0.0, &phi).unwrap();
        let l = apply_operator(&s, 0.0, &phi).unwrap();
        for i in 0..phi.values().len() {
            let sv = phi.values()[i];
            assert!((l0.values()[i] - eig * sv).abs() <= 1e-12 * (1.0 + eig.abs()));
            assert!((l.values()[i] - (eig - 1.0) * sv).abs() <= 1e-12 * (1.0 + eig.abs()));
        }
    }

    #[test]
    fn upwind_of_linear_is_one() {
        let s = upwind(32);
        let phi = GridFunction::from_fn(*s.lattice(), |x| x[0]);
        let l0 = apply_principal_part(&s, 0.0, &phi).unwrap();
        for v in &l0.values()[..31] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reaction_only() {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::uniform(&st, 0.0, 0.0, 1.0, 1.0).unwrap();
        let s = Scheme::new(st, co, Lattice::new(1, 8).unwrap()).unwrap();
        let one = GridFunction::constant(*s.lattice(), 1.0);
        assert!(apply_operator(&s, 0.0, &one)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == -1.0));
        let zero = GridFunction::zeros(*s.lattice());
        assert_eq!(apply_operator(&s, 0.0, &zero).unwrap().sup_abs(), 0.0);
    }

    #[test]
    fn q_form_of_linear_on_forward_stencil() {
        let st = StencilSet::new(vec![StencilVector::new(vec![1])], vec![1.0], 1.0).unwrap();
        let co = CoefficientSet::uniform(&st, 1.0, 0.0, 1.0, 1.0).unwrap();
        let s = Scheme::new(st, co, Lattice::new(1, 32).unwrap()).unwrap();
        let phi = GridFunction::from_fn(*s.lattice(), |x| x[0]);
        let q = dirichlet_form(&s, 0.0, &phi).unwrap();
        for v in &q.values()[..31] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn continuum_operator_examples() {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::uniform(&st, 0.5, 0.0, 0.0, 1.0).unwrap();
        let u = parse_expr("sin(x)").unwrap();
        assert_eq!(continuum_operator(&co, &st, &u).unwrap(), u.scale(-0.5));

        let co = CoefficientSet::from_pairs(
            &st,
            &[],
            &[(StencilVector::new(vec![1]), FieldExpr::constant(1.0))],
            FieldExpr::zero(),
            1.0,
        )
        .unwrap();
        assert_eq!(continuum_operator(&co, &st, &u).unwrap(), parse_expr("cos(x)").unwrap());

        let co = CoefficientSet::uniform(&st, 0.3, 0.1, 0.0, 1.0).unwrap();
        let c = parse_expr("2 + sin(x)").unwrap();
        let co = CoefficientSet { c: c.clone(), ..co };
        assert_eq!(
            continuum_operator(&co, &st, &FieldExpr::constant(1.0)).unwrap(),
            c.scale(-1.0)
        );
        assert!(continuum_operator(&co, &st, &u.clone().with_m_avail(1)).is_err());
    }

    #[test]
    fn manufactured_heat_forcing() {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::uniform(&st, 0.5, 0.0, 0.0, 1.0).unwrap();
        let u0 = parse_expr("sin(x)*(1+t)").unwrap();
        let d = manufacture_rhs(&co, &st, &u0).unwrap();
        let want = parse_expr("sin(x)*(1 + (1+t)/2)");
        // the grammar has no division; compare against the expanded form
        assert!(want.is_err());
        assert_eq!(d.f, parse_expr("1.5*sin(x) + 0.5*sin(x)*t").unwrap());
        assert_eq!(d.g, parse_expr("sin(x)").unwrap());

        let co = CoefficientSet::uniform(&st, 0.0, 0.0, 1.0, 1.0).unwrap();
        let u0 = parse_expr("cos(2*x)").unwrap();
        assert_eq!(manufacture_rhs(&co, &st, &u0).unwrap().f, u0);
    }

    #[test]
    fn product_rule_on_smooth_field() {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::new(
            vec![parse_expr("1+0.5*sin(x)").unwrap(), parse_expr("0.2").unwrap()],
            vec![parse_expr("cos(2*x)").unwrap(), FieldExpr::zero()],
            FieldExpr::constant(1.0),
            1.0,
        )
        .unwrap();
        let s = Scheme::new(st, co, Lattice::new(1, 32).unwrap()).unwrap();
        let phi = GridFunction::from_fn(*s.lattice(), |x| (3.0 * x[0]).sin() + x[0].cos());
        let lhs = apply_principal_part(&s, 0.3, &phi.mul(&phi).unwrap()).unwrap();
        let rhs = phi
            .mul(&apply_principal_part(&s, 0.3, &phi).unwrap())
            .unwrap()
            .scale(2.0)
            .add(&dirichlet_form(&s, 0.3, &phi).unwrap())
            .unwrap();
        assert!(lhs.dist_sup(&rhs).unwrap() <= 1e-11 * (1.0 + lhs.sup_abs()));
    }

    #[test]
    fn evaluator_matches_apply_l() {
        let s = heat(32, 1.0);
        let f = parse_expr("cos(x)*t").unwrap();
        let mut ev = Evaluator::new(&s, &f);
        let phi = GridFunction::from_fn(*s.lattice(), |x| (2.0 * x[0]).sin());
        let mut out = vec![0.0; 32];
        ev.rhs(0.7, phi.values(), &mut out);
        let want = apply_operator(&s, 0.7, &phi)
            .unwrap()
            .add(&f.sample(0.7, s.lattice()))
            .unwrap();
        let got = GridFunction::new(*s.lattice(), out).unwrap();
        assert!(got.dist_sup(&want).unwrap() < 1e-12 * (1.0 + want.sup_abs()));
    }

    #[test]
    fn mesh_ceiling_enforced() {
        let st = StencilSet::axes(1);
        let co = CoefficientSet::uniform(&st, 0.5, 0.0, 1.0, 1.0).unwrap();
        let lat = Lattice::new(1, 8).unwrap();
        assert!(Scheme::new(st.clone(), co.clone(), lat).is_ok());
        assert!(Scheme::with_max_spacing(st, co, lat, PI / 8.0).is_err());
    }
}
