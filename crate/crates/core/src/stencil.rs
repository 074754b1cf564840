//! Lattice stencil vectors and the shift/difference algebra on grid functions.

use std::fmt;

use crate::error::{Error, Result};
use crate::fields::GridFunction;

/// Largest multi-vector length accepted by [`leibniz_expand`].
pub const LEIBNIZ_MAX_ORDER: usize = 3;

/// Integer lattice direction `λ`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StencilVector(Vec<i32>);

impl StencilVector {
    pub fn new(components: Vec<i32>) -> Self {
        Self(components)
    }

    pub fn components(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }

    /// Unit vector `±e_axis` in `dim` dimensions.
    pub fn unit(dim: usize, axis: usize, sign: i32) -> Self {
        let mut v = vec![0; dim];
        v[axis] = sign;
        Self(v)
    }
}

impl From<Vec<i32>> for StencilVector {
    fn from(v: Vec<i32>) -> Self {
        Self(v)
    }
}

impl fmt::Display for StencilVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// The set `Λ₁` with weights `τ_λ >= 0` and the derivative weight `τ₀ > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilSet {
    vectors: Vec<StencilVector>,
    weights: Vec<f64>,
    derivative_weight: f64,
}

impl StencilSet {
    pub fn new(vectors: Vec<StencilVector>, weights: Vec<f64>, derivative_weight: f64) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidStencil("empty vector set".into()));
        }
        if weights.len() != vectors.len() {
            return Err(Error::InvalidStencil(format!(
                "{} vectors but {} weights",
                vectors.len(),
                weights.len()
            )));
        }
        let dim = vectors[0].dim();
        for (i, v) in vectors.iter().enumerate() {
            if v.dim() != dim || dim == 0 {
                return Err(Error::InvalidStencil(format!(
                    "vector {v} has dimension {}, expected {dim}",
                    v.dim()
                )));
            }
            if v.is_zero() {
                return Err(Error::InvalidStencil("the zero vector is not allowed".into()));
            }
            if vectors[..i].contains(v) {
                return Err(Error::InvalidStencil(format!("vector {v} listed twice")));
            }
        }
        if let Some(t) = weights.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidStencil(format!(
                "weights must be finite and nonnegative (got {t})"
            )));
        }
        if !(derivative_weight > 0.0) || !derivative_weight.is_finite() {
            return Err(Error::InvalidStencil(format!(
                "derivative_weight must be positive (got {derivative_weight})"
            )));
        }
        Ok(Self {
            vectors,
            weights,
            derivative_weight,
        })
    }

    /// `{±e_1, ..., ±e_d}` with unit weights.
    pub fn axes(dim: usize) -> Self {
        let mut vectors = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            vectors.push(StencilVector::unit(dim, axis, 1));
            vectors.push(StencilVector::unit(dim, axis, -1));
        }
        let n = vectors.len();
        Self::new(vectors, vec![1.0; n], 1.0).expect("axis stencil is valid")
    }

    pub fn with_derivative_weight(mut self, derivative_weight: f64) -> Result<Self> {
        Self::new(
            std::mem::take(&mut self.vectors),
            std::mem::take(&mut self.weights),
            derivative_weight,
        )
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[StencilVector] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &StencilVector {
        &self.vectors[i]
    }

    pub fn direction_weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn direction_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn derivative_weight(&self) -> f64 {
        self.derivative_weight
    }

    pub fn index_of(&self, v: &StencilVector) -> Option<usize> {
        self.vectors.iter().position(|w| w == v)
    }

    /// Index of `-λ_i`, if present.
    pub fn opposite(&self, i: usize) -> Option<usize> {
        self.index_of(&self.vectors[i].neg())
    }

    /// `|Λ₁|² = Σ |λ|²`
    pub fn norm_sq(&self) -> f64 {
        self.vectors.iter().map(StencilVector::norm_sq).sum()
    }

    /// `‖Λ₁‖² = Σ |τ_λ λ|²`
    pub fn weighted_norm_sq(&self) -> f64 {
        self.vectors
            .iter()
            .zip(&self.weights)
            .map(|(v, t)| t * t * v.norm_sq())
            .sum()
    }

    /// `Λ₁ = -Λ₁` as sets.
    pub fn is_symmetric_set(&self) -> bool {
        (0..self.len()).all(|i| self.opposite(i).is_some())
    }
}

/// Ordered tuple `(λ¹, ..., λⁿ)` of stencil vectors, `n >= 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiVector(Vec<StencilVector>);

impl MultiVector {
    pub fn new(entries: Vec<StencilVector>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("a multi-vector needs at least one entry".into()));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[StencilVector] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `T_λ φ(x) = φ(x + hλ)` on the torus.
pub fn shift(phi: &GridFunction, lambda: &StencilVector) -> Result<GridFunction> {
    let table = phi.lattice().neighbor_table(lambda.components())?;
    Ok(gather(phi, &table))
}

/// Composite shift `T_{λ¹} ... T_{λⁿ}`; the empty composite is the identity.
pub fn shift_all(phi: &GridFunction, lambdas: &[StencilVector]) -> Result<GridFunction> {
    let dim = phi.lattice().dim();
    let mut total = vec![0i32; dim];
    for l in lambdas {
        phi.lattice().check_offset(l.components())?;
        for (t, c) in total.iter_mut().zip(l.components()) {
            *t += c;
        }
    }
    let n = phi.lattice().nodes_per_axis() as i32;
    // composite offsets may exceed n/4; wrap them into (-n/2, n/2]
    for t in total.iter_mut() {
        *t = t.rem_euclid(n);
        if *t > n / 2 {
            *t -= n;
        }
    }
    if total.iter().all(|&c| c == 0) {
        return Ok(phi.clone());
    }
    let table = composite_table(phi, &total);
    Ok(gather(phi, &table))
}

fn composite_table(phi: &GridFunction, offset: &[i32]) -> Vec<usize> {
    let lat = phi.lattice();
    let n = lat.nodes_per_axis() as i64;
    (0..lat.len())
        .map(|idx| {
            let m = lat.multi_index(idx);
            let mut s = [0usize; 3];
            for a in 0..lat.dim() {
                s[a] = (m[a] as i64 + offset[a] as i64).rem_euclid(n) as usize;
            }
            lat.flat_index(&s)
        })
        .collect()
}

pub(crate) fn gather(phi: &GridFunction, table: &[usize]) -> GridFunction {
    let v = phi.values();
    GridFunction::from_vec_unchecked(*phi.lattice(), table.iter().map(|&j| v[j]).collect())
}

/// `δ_λ φ = (φ(x + hλ) - φ(x)) / h`
pub fn forward_difference(phi: &GridFunction, lambda: &StencilVector) -> Result<GridFunction> {
    let h = phi.lattice().h();
    let table = phi.lattice().neighbor_table(lambda.components())?;
    let v = phi.values();
    Ok(GridFunction::from_vec_unchecked(
        *phi.lattice(),
        table.iter().zip(v).map(|(&j, &vi)| (v[j] - vi) / h).collect(),
    ))
}

/// `Δ_λ φ = (φ(x + hλ) - 2φ(x) + φ(x - hλ)) / h²`
pub fn second_difference(phi: &GridFunction, lambda: &StencilVector) -> Result<GridFunction> {
    let lat = phi.lattice();
    let h2 = lat.h() * lat.h();
    let fwd = lat.neighbor_table(lambda.components())?;
    let bwd = lat.neighbor_table(lambda.neg().components())?;
    let v = phi.values();
    Ok(GridFunction::from_vec_unchecked(
        *lat,
        (0..v.len())
            .map(|i| (v[fwd[i]] - 2.0 * v[i] + v[bwd[i]]) / h2)
            .collect(),
    ))
}

/// `δ̄_λ φ = τ_λ δ_λ φ` for a single member of the stencil set.
pub fn weighted_difference(phi: &GridFunction, stencil: &StencilSet, lambda: &StencilVector) -> Result<GridFunction> {
    let i = stencil
        .index_of(lambda)
        .ok_or_else(|| Error::UnknownVector(lambda.components().to_vec()))?;
    let weights = stencil.direction_weight(i);
    if weights == 0.0 {
        return Ok(GridFunction::zeros(*phi.lattice()));
    }
    Ok(forward_difference(phi, lambda)?.scale(weights))
}

/// `δ̄_μ = δ̄_{μ¹} ... δ̄_{μⁿ}` applied to `phi`.
pub fn weighted_mixed_difference(phi: &GridFunction, stencil: &StencilSet, mu: &MultiVector) -> Result<GridFunction> {
    weighted_difference_seq(phi, stencil, mu.entries())
}

fn weighted_difference_seq(phi: &GridFunction, stencil: &StencilSet, seq: &[StencilVector]) -> Result<GridFunction> {
    let mut out = phi.clone();
    // validate membership before doing any work
    for l in seq {
        if stencil.index_of(l).is_none() {
            return Err(Error::UnknownVector(l.components().to_vec()));
        }
    }
    for l in seq {
        out = weighted_difference(&out, stencil, l)?;
    }
    Ok(out)
}

/// Right-hand side of the discrete Leibniz rule for `δ̄_μ(ψ φ)`:
/// the sum over subsets `S` of positions of
/// `(δ̄_{μ(S)} ψ) · δ̄_{μ(Sᶜ)} T_{μ(S)} φ`.
pub fn leibniz_expand(
    psi: &GridFunction,
    phi: &GridFunction,
    stencil: &StencilSet,
    mu: &MultiVector,
) -> Result<GridFunction> {
    let n = mu.len();
    if n > LEIBNIZ_MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "Leibniz expansion supports at most {LEIBNIZ_MAX_ORDER} factors (got {n})"
        )));
    }
    if psi.lattice() != phi.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let entries = mu.entries();
    let mut acc = GridFunction::zeros(*phi.lattice());
    for mask in 0u32..(1 << n) {
        let (chosen, rest): (Vec<_>, Vec<_>) = entries.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
        let chosen: Vec<StencilVector> = chosen.into_iter().map(|(_, v)| v.clone()).collect();
        let rest: Vec<StencilVector> = rest.into_iter().map(|(_, v)| v.clone()).collect();
        let d_psi = weighted_difference_seq(psi, stencil, &chosen)?;
        let shifted = shift_all(phi, &chosen)?;
        let d_phi = weighted_difference_seq(&shifted, stencil, &rest)?;
        acc.axpy(1.0, &d_psi.mul(&d_phi)?)?;
    }
    Ok(acc)
}
