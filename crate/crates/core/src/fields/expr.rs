use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::fields::{GridFunction, Lattice};

/// Default number of exact spatial derivatives advertised by catalog fields.
pub const DEFAULT_M_AVAIL: u32 = 12;

/// Highest time-derivative order served by [`FieldExpr::derivative`].
pub const MAX_TIME_ORDER: u32 = 2;

pub type WaveVector = [i32; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trig {
    Cos,
    Sin,
}

/// One basis element `t^power * trig(wave · x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Basis {
    wave: WaveVector,
    trig: Trig,
    power: u32,
}

impl Basis {
    /// Canonical key and sign: wave's first nonzero component is positive,
    /// `sin(0)` vanishes, `cos(0) = 1`.
    fn canonical(wave: WaveVector, trig: Trig, power: u32) -> Option<(Self, f64)> {
        let lead = wave.iter().copied().find(|&k| k != 0);
        match lead {
            None => match trig {
                Trig::Sin => None,
                Trig::Cos => Some((Basis { wave, trig, power }, 1.0)),
            },
            Some(k) if k < 0 => {
                let neg = [-wave[0], -wave[1], -wave[2]];
                let sign = match trig {
                    Trig::Cos => 1.0,
                    Trig::Sin => -1.0,
                };
                Some((Basis { wave: neg, trig, power }, sign))
            }
            Some(_) => Some((Basis { wave, trig, power }, 1.0)),
        }
    }
}

/// A 2π-periodic trigonometric polynomial in `x` with polynomial time factors,
/// stored as a canonical sum `Σ a · t^p · {cos,sin}(k · x)`.
///
/// Every operation (sum, product, differentiation) stays inside this class,
/// so derivatives of any order are exact.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldExpr {
    terms: BTreeMap<Basis, f64>,
    m_avail: u32,
}

impl Default for FieldExpr {
    fn default() -> Self {
        Self::zero()
    }
}

fn wave_add(a: &WaveVector, b: &WaveVector) -> WaveVector {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn wave_sub(a: &WaveVector, b: &WaveVector) -> WaveVector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl FieldExpr {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
            m_avail: DEFAULT_M_AVAIL,
        }
    }

    pub fn constant(value: f64) -> Self {
        let mut e = Self::zero();
        e.push([0; 3], Trig::Cos, 0, value);
        e
    }

    pub fn cos(wave: WaveVector) -> Self {
        let mut e = Self::zero();
        e.push(wave, Trig::Cos, 0, 1.0);
        e
    }

    pub fn sin(wave: WaveVector) -> Self {
        let mut e = Self::zero();
        e.push(wave, Trig::Sin, 0, 1.0);
        e
    }

    /// `t^power`
    pub fn time_power(power: u32) -> Self {
        let mut e = Self::zero();
        e.push([0; 3], Trig::Cos, power, 1.0);
        e
    }

    /// Single-axis helpers: `sin(k x_axis)` with axis counted from 0.
    pub fn sin_axis(axis: usize, k: i32) -> Self {
        let mut w = [0; 3];
        w[axis] = k;
        Self::sin(w)
    }

    pub fn cos_axis(axis: usize, k: i32) -> Self {
        let mut w = [0; 3];
        w[axis] = k;
        Self::cos(w)
    }

    pub fn m_avail(&self) -> u32 {
        self.m_avail
    }

    pub fn with_m_avail(mut self, m: u32) -> Self {
        self.m_avail = m;
        self
    }

    fn push(&mut self, wave: WaveVector, trig: Trig, power: u32, coef: f64) {
        if coef == 0.0 {
            return;
        }
        if let Some((key, sign)) = Basis::canonical(wave, trig, power) {
            let slot = self.terms.entry(key).or_insert(0.0);
            *slot += sign * coef;
            if *slot == 0.0 {
                self.terms.remove(&key);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(value)` when the expression is a constant in `(t, x)`.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => {
                let (b, &v) = self.terms.iter().next()?;
                (b.wave == [0; 3] && b.power == 0).then_some(v)
            }
            _ => None,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.keys().all(|b| b.power == 0)
    }

    pub fn max_time_power(&self) -> u32 {
        self.terms.keys().map(|b| b.power).max().unwrap_or(0)
    }

    /// Number of spatial axes the expression actually depends on (1 + highest axis used).
    pub fn spatial_rank(&self) -> usize {
        self.terms
            .keys()
            .map(|b| b.wave.iter().rposition(|&k| k != 0).map_or(0, |a| a + 1))
            .max()
            .unwrap_or(0)
    }

    /// Largest |component| of any wave vector.
    pub fn max_wave_number(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|b| b.wave.iter().map(|k| k.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = Self::zero().with_m_avail(self.m_avail);
        if a != 0.0 {
            for (b, &v) in &self.terms {
                out.push(b.wave, b.trig, b.power, a * v);
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.m_avail = self.m_avail.min(other.m_avail);
        for (b, &v) in &other.terms {
            out.push(b.wave, b.trig, b.power, v);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero().with_m_avail(self.m_avail.min(other.m_avail));
        for (a, &va) in &self.terms {
            for (b, &vb) in &other.terms {
                let power = a.power + b.power;
                let half = 0.5 * va * vb;
                let sum = wave_add(&a.wave, &b.wave);
                let diff = wave_sub(&a.wave, &b.wave);
                match (a.trig, b.trig) {
                    (Trig::Cos, Trig::Cos) => {
                        out.push(diff, Trig::Cos, power, half);
                        out.push(sum, Trig::Cos, power, half);
                    }
                    (Trig::Sin, Trig::Sin) => {
                        out.push(diff, Trig::Cos, power, half);
                        out.push(sum, Trig::Cos, power, -half);
                    }
                    (Trig::Sin, Trig::Cos) => {
                        out.push(sum, Trig::Sin, power, half);
                        out.push(diff, Trig::Sin, power, half);
                    }
                    (Trig::Cos, Trig::Sin) => {
                        out.push(sum, Trig::Sin, power, half);
                        out.push(diff, Trig::Sin, power, -half);
                    }
                }
            }
        }
        out
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(1.0).with_m_avail(self.m_avail);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// `D_axis` (axis counted from 0), without availability bookkeeping.
    pub fn d_axis(&self, axis: usize) -> Self {
        let mut out = Self::zero().with_m_avail(self.m_avail);
        for (b, &v) in &self.terms {
            let k = b.wave[axis] as f64;
            match b.trig {
                Trig::Cos => out.push(b.wave, Trig::Sin, b.power, -k * v),
                Trig::Sin => out.push(b.wave, Trig::Cos, b.power, k * v),
            }
        }
        out
    }

    /// `∂_t`, without availability bookkeeping.
    pub fn d_time(&self) -> Self {
        let mut out = Self::zero().with_m_avail(self.m_avail);
        for (b, &v) in &self.terms {
            if b.power > 0 {
                out.push(b.wave, b.trig, b.power - 1, b.power as f64 * v);
            }
        }
        out
    }

    /// Exact `∂_t^{t_order} D^alpha` of the expression.
    pub fn derivative(&self, alpha: &[u32], t_order: u32) -> Result<Self> {
        let order: u32 = alpha.iter().sum();
        if order > self.m_avail {
            return Err(Error::DerivativeOrder {
                requested: order,
                available: self.m_avail,
            });
        }
        if t_order > MAX_TIME_ORDER {
            return Err(Error::DerivativeOrder {
                requested: t_order,
                available: MAX_TIME_ORDER,
            });
        }
        if alpha.len() > 3 {
            return Err(Error::InvalidArgument(format!(
                "multi-index {alpha:?} has more than 3 components"
            )));
        }
        let mut out = self.clone();
        for (axis, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                out = out.d_axis(axis);
            }
        }
        for _ in 0..t_order {
            out = out.d_time();
        }
        Ok(out)
    }

    /// Value at `t = 0` as a time-independent expression.
    pub fn at_time_zero(&self) -> Self {
        let mut out = Self::zero().with_m_avail(self.m_avail);
        for (b, &v) in &self.terms {
            if b.power == 0 {
                out.push(b.wave, b.trig, 0, v);
            }
        }
        out
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(b, &v)| {
                let phase: f64 = b.wave.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
                let trig = match b.trig {
                    Trig::Cos => phase.cos(),
                    Trig::Sin => phase.sin(),
                };
                v * t.powi(b.power as i32) * trig
            })
            .sum()
    }

    pub fn sample(&self, t: f64, lattice: &Lattice) -> GridFunction {
        SampledField::new(self, lattice).at(t)
    }

    fn terms(&self) -> impl Iterator<Item = (&Basis, &f64)> {
        self.terms.iter()
    }
}

/// A field pre-evaluated on a lattice: one spatial grid per distinct
/// trigonometric factor plus its time polynomial, so sampling at a new time
/// is a short linear combination.
#[derive(Clone, Debug)]
pub struct SampledField {
    lattice: Lattice,
    parts: Vec<(Vec<f64>, Vec<f64>)>,
    static_values: Option<Vec<f64>>,
}

impl SampledField {
    pub fn new(expr: &FieldExpr, lattice: &Lattice) -> Self {
        let mut grouped: BTreeMap<(WaveVector, Trig), Vec<f64>> = BTreeMap::new();
        for (b, &v) in expr.terms() {
            let poly = grouped.entry((b.wave, b.trig)).or_default();
            let p = b.power as usize;
            if poly.len() <= p {
                poly.resize(p + 1, 0.0);
            }
            poly[p] += v;
        }
        let n = lattice.nodes_per_axis() as i64;
        let h = lattice.h();
        let parts: Vec<(Vec<f64>, Vec<f64>)> = grouped
            .into_iter()
            .map(|((wave, trig), poly)| {
                let values = (0..lattice.len())
                    .map(|idx| {
                        let m = lattice.multi_index(idx);
                        // reduce the integer phase mod n before scaling
                        let phase: i64 = (0..lattice.dim())
                            .map(|a| wave[a] as i64 * m[a] as i64)
                            .sum::<i64>()
                            .rem_euclid(n);
                        let angle = phase as f64 * h;
                        match trig {
                            Trig::Cos => angle.cos(),
                            Trig::Sin => angle.sin(),
                        }
                    })
                    .collect();
                (values, poly)
            })
            .collect();
        let static_values = expr
            .is_time_independent()
            .then(|| Self::combine(lattice.len(), &parts, 0.0));
        Self {
            lattice: *lattice,
            parts,
            static_values,
        }
    }

    fn combine(len: usize, parts: &[(Vec<f64>, Vec<f64>)], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (values, poly) in parts {
            let w = poly.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            if w != 0.0 {
                for (o, v) in out.iter_mut().zip(values) {
                    *o += w * v;
                }
            }
        }
        out
    }

    pub fn is_static(&self) -> bool {
        self.static_values.is_some()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn at(&self, t: f64) -> GridFunction {
        let values = match &self.static_values {
            Some(v) => v.clone(),
            None => Self::combine(self.lattice.len(), &self.parts, t),
        };
        GridFunction::from_vec_unchecked(self.lattice, values)
    }

    pub fn fill(&self, t: f64, out: &mut [f64]) {
        match &self.static_values {
            Some(v) => out.copy_from_slice(v),
            None => {
                out.fill(0.0);
                for (values, poly) in &self.parts {
                    let w = poly.iter().rev().fold(0.0, |acc, &c| acc * t + c);
                    if w != 0.0 {
                        for (o, v) in out.iter_mut().zip(values) {
                            *o += w * v;
                        }
                    }
                }
            }
        }
    }
}

fn fmt_number(v: f64) -> String {
    // `{:?}` gives the shortest representation that round-trips exactly.
    let s = format!("{v:?}");
    if v < 0.0 {
        format!("({s})")
    } else {
        s
    }
}

fn fmt_linear(wave: &WaveVector) -> String {
    let mut out = String::new();
    for (axis, &k) in wave.iter().enumerate() {
        if k == 0 {
            continue;
        }
        if k < 0 {
            out.push('-');
        } else if !out.is_empty() {
            out.push('+');
        }
        out.push_str(&format!("{}*x{}", k.abs(), axis + 1));
    }
    out
}

/// Prints in the scenario grammar; parsing the output reproduces the expression exactly.
impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (b, &v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", fmt_number(v))?;
            if b.wave != [0; 3] {
                let name = match b.trig {
                    Trig::Cos => "cos",
                    Trig::Sin => "sin",
                };
                write!(f, "*{name}({})", fmt_linear(&b.wave))?;
            }
            if b.power > 0 {
                write!(f, "*t^{}", b.power)?;
            }
        }
        Ok(())
    }
}
