use std::io::Write;

use crate::error::{Error, Result};
use crate::fields::Lattice;

/// Real values at the nodes of a periodic lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    lattice: Lattice,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                lattice.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(Self { lattice, values })
    }

    pub(crate) fn from_vec_unchecked(lattice: Lattice, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), lattice.len());
        Self { lattice, values }
    }

    pub fn zeros(lattice: Lattice) -> Self {
        Self::constant(lattice, 0.0)
    }

    pub fn constant(lattice: Lattice, value: f64) -> Self {
        Self {
            lattice,
            values: vec![value; lattice.len()],
        }
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = (0..lattice.len()).map(|i| f(&lattice.coords(i))).collect();
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            lattice: self.lattice,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self {
            lattice: self.lattice,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        argbest(&self.values, |a, b| a > b)
    }

    pub fn argmin(&self) -> usize {
        argbest(&self.values, |a, b| a < b)
    }

    /// Sup-norm distance.
    pub fn dist_sup(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.sup_abs())
    }

    /// Values at the nodes of the coarser lattice `coarse` (exact injection).
    pub fn restrict_to(&self, coarse: &Lattice) -> Result<Self> {
        let ratio = coarse.ratio_to(&self.lattice).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "lattice with {} nodes per axis is not nested in one with {}",
                coarse.nodes_per_axis(),
                self.lattice.nodes_per_axis()
            ))
        })?;
        let values = (0..coarse.len())
            .map(|i| {
                let mut m = coarse.multi_index(i);
                for axis in 0..coarse.dim() {
                    m[axis] *= ratio;
                }
                self.values[self.lattice.flat_index(&m)]
            })
            .collect();
        Ok(Self {
            lattice: *coarse,
            values,
        })
    }

    /// CSV with one column per axis index followed by the value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.lattice.dim();
        let header: Vec<String> = (1..=d).map(|a| format!("i{a}")).collect();
        writeln!(w, "{},value", header.join(","))?;
        for (idx, v) in self.values.iter().enumerate() {
            let m = self.lattice.multi_index(idx);
            for i in &m[..d] {
                write!(w, "{i},")?;
            }
            writeln!(w, "{v:.15e}")?;
        }
        Ok(())
    }
}

fn argbest(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if better(v, values[best]) {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let l = Lattice::new(1, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[1] = f64::NAN;
        assert!(GridFunction::new(l, v).is_err());
        assert!(GridFunction::new(l, vec![0.0; 7]).is_err());
    }

    #[test]
    fn restriction_picks_coarse_nodes() {
        let coarse = Lattice::new(2, 8).unwrap();
        let fine = Lattice::new(2, 32).unwrap();
        let g = GridFunction::from_fn(fine, |x| x[0] + 10.0 * x[1]);
        let r = g.restrict_to(&coarse).unwrap();
        let expect = GridFunction::from_fn(coarse, |x| x[0] + 10.0 * x[1]);
        assert!(r.dist_sup(&expect).unwrap() < 1e-12);
        assert!(fine.ratio_to(&coarse).is_none());
        assert!(r.restrict_to(&fine).is_err());
    }

    #[test]
    fn csv_layout() {
        let l = Lattice::new(2, 8).unwrap();
        let g = GridFunction::constant(l, 1.5);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i1,i2,value"));
        assert_eq!(lines.next(), Some("0,0,1.500000000000000e0"));
        assert_eq!(text.lines().count(), 65);
    }
}
