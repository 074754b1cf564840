//! Executable checks of the structural hypotheses on a scheme.
//!
//! Every checker returns a [`ValidationReport`] whose `margin` is the raw
//! worst-case slack (negative means violated) and whose `tolerance` is the
//! absolute allowance: `pass == (margin >= -tolerance)`.

mod probes;
mod sufficient;

pub use probes::{
    derivative_weight_sweep, probe_first_order, probe_higher_order, ProbeKind, ProbeParams, TestBank,
    DERIVATIVE_WEIGHT_SWEEP,
};
pub use sufficient::{check_gradient_condition, critical_n_gradient_condition};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{multi_indices, CoefficientSet, GridFunction, Lattice, EVAL_REFINEMENT};
use crate::operator::Scheme;

/// Absolute tolerance for sign conditions on sampled coefficients.
pub const SIGN_TOL: f64 = 1e-12;

/// Relative tolerance for the probes and the drift-independence check.
pub const REL_TOL: f64 = 1e-10;

/// Where the worst slack of a check was found.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub node: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Witness {
    pub fn at_node(lattice: &Lattice, idx: usize, t: f64) -> Self {
        let d = lattice.dim();
        Self {
            t,
            x: lattice.coords(idx)[..d].to_vec(),
            node: lattice.multi_index(idx)[..d].to_vec(),
            lambda: None,
            detail: None,
        }
    }

    pub fn with_lambda(mut self, lambda: impl Into<String>) -> Self {
        self.lambda = Some(lambda.into());
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub witness: Witness,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn new(name: &str, margin: f64, tolerance: f64, witness: Witness) -> Self {
        Self {
            name: name.to_string(),
            pass: margin >= -tolerance,
            margin,
            witness,
            tolerance,
        }
    }
}

/// Tracks the smallest value seen together with its location.
#[derive(Clone, Debug)]
pub(crate) struct Worst {
    pub value: f64,
    pub witness: Witness,
}

impl Worst {
    pub fn new() -> Self {
        Self {
            value: f64::INFINITY,
            witness: Witness::default(),
        }
    }

    /// Offer the minimum of `g`; `label` names the direction(s) involved.
    pub fn offer_grid(&mut self, g: &GridFunction, t: f64, label: Option<&str>) {
        let i = g.argmin();
        let v = g.values()[i];
        if v < self.value {
            self.value = v;
            let mut w = Witness::at_node(g.lattice(), i, t);
            if let Some(l) = label {
                w = w.with_lambda(l);
            }
            self.witness = w;
        }
    }

    pub fn offer(&mut self, value: f64, witness: impl FnOnce() -> Witness) {
        if value < self.value {
            self.value = value;
            self.witness = witness();
        }
    }

    pub fn merge(&mut self, other: Worst) {
        if other.value < self.value {
            *self = other;
        }
    }

    pub fn into_report(self, name: &str, tolerance: f64) -> ValidationReport {
        ValidationReport::new(name, self.value, tolerance, self.witness)
    }
}

fn times_or_zero(t_samples: &[f64]) -> &[f64] {
    if t_samples.is_empty() {
        &[0.0]
    } else {
        t_samples
    }
}

/// Time samples actually needed: one when the coefficients are static.
pub(crate) fn effective_times(scheme: &Scheme, t_samples: &[f64]) -> Vec<f64> {
    let ts = times_or_zero(t_samples);
    if scheme.coeffs().is_time_independent() {
        vec![ts[0]]
    } else {
        ts.to_vec()
    }
}

/// `χ_λ = q_λ + h p_λ >= 0` at every node, time sample and direction.
pub fn check_monotonicity(scheme: &Scheme, t_samples: &[f64]) -> ValidationReport {
    let mut worst = Worst::new();
    for t in effective_times(scheme, t_samples) {
        for (i, rates) in scheme.rates(t).iter().enumerate() {
            worst.offer_grid(rates, t, Some(&scheme.stencil().vector(i).to_string()));
        }
    }
    worst.into_report("monotonicity", SIGN_TOL)
}

/// `c >= reaction_floor`; the margin is `min c - reaction_floor`.
pub fn check_c_floor(scheme: &Scheme, reaction_floor: f64, t_samples: &[f64]) -> ValidationReport {
    let mut worst = Worst::new();
    for t in effective_times(scheme, t_samples) {
        let c = scheme
            .coeffs()
            .c
            .sample(t, scheme.lattice())
            .map(|v| v - reaction_floor);
        worst.offer_grid(&c, t, None);
    }
    worst.into_report("c_floor", SIGN_TOL)
}

/// `Σ_λ λ q_λ` must not depend on `x`; the margin is minus the largest spread.
pub fn check_q_drift(scheme: &Scheme, t_samples: &[f64]) -> ValidationReport {
    let lat = *scheme.lattice();
    let dim = lat.dim();
    let mut spread_worst: f64 = 0.0;
    let mut sup_s: f64 = 0.0;
    let mut witness = Witness::default();
    for t in effective_times(scheme, t_samples) {
        let grids = scheme.sample(t);
        for axis in 0..dim {
            let mut s = vec![0.0; lat.len()];
            for (v, q) in scheme.stencil().vectors().iter().zip(&grids.q) {
                let a = v.components()[axis] as f64;
                if a != 0.0 {
                    for (si, qi) in s.iter_mut().zip(q.values()) {
                        *si += a * qi;
                    }
                }
            }
            let s = GridFunction::from_vec_unchecked(lat, s);
            sup_s = sup_s.max(s.sup_abs());
            let spread = s.max() - s.min();
            if spread > spread_worst || witness.x.is_empty() {
                spread_worst = spread_worst.max(spread);
                let lo = s.argmin();
                witness = Witness::at_node(&lat, s.argmax(), t).with_detail(format!(
                    "component {}: max {:e} here, min {:e} at node {:?}",
                    axis + 1,
                    s.max(),
                    s.min(),
                    &lat.multi_index(lo)[..dim]
                ));
            }
        }
    }
    ValidationReport::new("q_drift", -spread_worst, REL_TOL * (1.0 + sup_s), witness)
}

/// Condition (S): `Λ₁ = -Λ₁` and `q_λ = q_{-λ}`.
pub fn check_symmetry(scheme: &Scheme, t_samples: &[f64]) -> ValidationReport {
    let st = scheme.stencil();
    for i in 0..st.len() {
        if st.opposite(i).is_none() {
            let w = Witness {
                lambda: Some(st.vector(i).to_string()),
                detail: Some(format!("-({}) is not in the stencil set", st.vector(i))),
                ..Witness::default()
            };
            return ValidationReport::new("symmetry", -1.0, SIGN_TOL, w);
        }
    }
    let mut worst = Worst::new();
    for t in effective_times(scheme, t_samples) {
        let grids = scheme.sample(t);
        for i in 0..st.len() {
            let j = st.opposite(i).expect("checked above");
            let diff = grids.q[i]
                .zip_map(&grids.q[j], |a, b| -(a - b).abs())
                .expect("same lattice");
            worst.offer_grid(&diff, t, Some(&st.vector(i).to_string()));
        }
    }
    worst.into_report("symmetry", SIGN_TOL)
}

/// `q_λ >= κ` with `κ > 0`; the margin is `min q - κ`.
pub fn check_q_floor(scheme: &Scheme, q_floor: f64, t_samples: &[f64]) -> Result<ValidationReport> {
    if !(q_floor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "q_floor must be positive (got {q_floor})"
        )));
    }
    let mut worst = Worst::new();
    for t in effective_times(scheme, t_samples) {
        let grids = scheme.sample(t);
        for (i, q) in grids.q.iter().enumerate() {
            worst.offer_grid(
                &q.map(|v| v - q_floor),
                t,
                Some(&scheme.stencil().vector(i).to_string()),
            );
        }
    }
    Ok(worst.into_report("q_floor", SIGN_TOL))
}

/// `M_k = sup sqrt(Σ_λ (|D^k q_λ|² + |D^k p_λ|²) + |D^k c|²)` for `k = 0..=m`,
/// sampled on a lattice refined [`EVAL_REFINEMENT`] times from `working`.
pub fn coefficient_derivative_bounds(
    coeffs: &CoefficientSet,
    working: &Lattice,
    m: u32,
    t_samples: &[f64],
) -> Result<Vec<f64>> {
    let dense = working.refined(EVAL_REFINEMENT)?;
    let times = times_or_zero(t_samples);
    let times: Vec<f64> = if coeffs.is_time_independent() {
        vec![times[0]]
    } else {
        times.to_vec()
    };
    let mut out = Vec::with_capacity(m as usize + 1);
    for k in 0..=m {
        let alphas = multi_indices(dense.dim(), k);
        let mut derivs = Vec::new();
        for e in coeffs.all() {
            for a in &alphas {
                let d = e.derivative(a, 0)?;
                if !d.is_zero() {
                    derivs.push(d);
                }
            }
        }
        let mut sup: f64 = 0.0;
        for &t in &times {
            let mut acc = vec![0.0; dense.len()];
            for d in &derivs {
                for (a, v) in acc.iter_mut().zip(d.sample(t, &dense).values()) {
                    *a += v * v;
                }
            }
            sup = sup.max(acc.iter().cloned().fold(0.0, f64::max));
        }
        out.push(sup.sqrt());
    }
    Ok(out)
}
