use crate::error::{Error, Result};
use crate::fields::FieldExpr;
use crate::stencil::{StencilSet, StencilVector};

/// Scheme coefficients `q_λ`, `p_λ` (one entry per stencil vector, in stencil
/// order), the zeroth-order coefficient `c` and its declared floor `reaction_floor`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub q: Vec<FieldExpr>,
    pub p: Vec<FieldExpr>,
    pub c: FieldExpr,
    pub reaction_floor: f64,
}

impl CoefficientSet {
    pub fn new(q: Vec<FieldExpr>, p: Vec<FieldExpr>, c: FieldExpr, reaction_floor: f64) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::InvalidArgument(format!(
                "{} diffusion weights but {} drift weights",
                q.len(),
                p.len()
            )));
        }
        if !(reaction_floor > 0.0) || !reaction_floor.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "declared floor reaction_floor must be positive (got {reaction_floor})"
            )));
        }
        Ok(Self {
            q,
            p,
            c,
            reaction_floor,
        })
    }

    /// Build from `(vector, expr)` pairs; vectors absent from a list get zero
    /// coefficients, vectors not in the stencil are rejected.
    pub fn from_pairs(
        stencil: &StencilSet,
        q: &[(StencilVector, FieldExpr)],
        p: &[(StencilVector, FieldExpr)],
        c: FieldExpr,
        reaction_floor: f64,
    ) -> Result<Self> {
        let place = |pairs: &[(StencilVector, FieldExpr)]| -> Result<Vec<FieldExpr>> {
            let mut out = vec![FieldExpr::zero(); stencil.len()];
            let mut seen = vec![false; stencil.len()];
            for (v, e) in pairs {
                let i = stencil
                    .index_of(v)
                    .ok_or_else(|| Error::UnknownVector(v.components().to_vec()))?;
                if seen[i] {
                    return Err(Error::InvalidArgument(format!("coefficient for {v} given twice")));
                }
                seen[i] = true;
                out[i] = e.clone();
            }
            Ok(out)
        };
        Self::new(place(q)?, place(p)?, c, reaction_floor)
    }

    /// Constant coefficients shared by every stencil vector.
    pub fn uniform(stencil: &StencilSet, q: f64, p: f64, c: f64, reaction_floor: f64) -> Result<Self> {
        let n = stencil.len();
        Self::new(
            vec![FieldExpr::constant(q); n],
            vec![FieldExpr::constant(p); n],
            FieldExpr::constant(c),
            reaction_floor,
        )
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn is_time_independent(&self) -> bool {
        self.q.iter().chain(&self.p).all(FieldExpr::is_time_independent) && self.c.is_time_independent()
    }

    pub fn all(&self) -> impl Iterator<Item = &FieldExpr> {
        self.q.iter().chain(&self.p).chain(std::iter::once(&self.c))
    }
}

/// Forcing `f(t, x)` and initial value `g(x)`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DataSet {
    pub f: FieldExpr,
    pub g: FieldExpr,
}

impl DataSet {
    pub fn new(f: FieldExpr, g: FieldExpr) -> Result<Self> {
        if !g.is_time_independent() {
            return Err(Error::InvalidArgument("initial value g must not depend on t".into()));
        }
        Ok(Self { f, g })
    }
}
