//! Vector fields as derivations given by their components on coordinates.

use std::collections::BTreeMap;
use std::fmt;

use crate::chart::{Chart, Parity};
use crate::error::{Error, Result};
use crate::expr::Expression;

/// A vector field `X = X^z ∂/∂z` over a chart; components are stored sparsely.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    chart: Chart,
    /// Coordinate index -> component expression (nonzero only).
    components: BTreeMap<usize, Expression>,
}

impl VectorField {
    pub fn zero(chart: &Chart) -> VectorField {
        VectorField {
            chart: chart.clone(),
            components: BTreeMap::new(),
        }
    }

    pub fn new(chart: &Chart, components: &[(&str, Expression)]) -> Result<VectorField> {
        let mut vf = VectorField::zero(chart);
        for (name, e) in components {
            vf.set(name, e.clone())?;
        }
        Ok(vf)
    }

    pub fn set(&mut self, name: &str, e: Expression) -> Result<()> {
        if e.chart() != &self.chart {
            return Err(Error::ChartMismatch(
                e.chart().name().into(),
                self.chart.name().into(),
            ));
        }
        let idx = self.chart.index_of(name)?;
        if e.is_zero() {
            self.components.remove(&idx);
        } else {
            self.components.insert(idx, e);
        }
        Ok(())
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn component(&self, name: &str) -> Result<Expression> {
        let idx = self.chart.index_of(name)?;
        Ok(self
            .components
            .get(&idx)
            .cloned()
            .unwrap_or_else(|| Expression::zero(&self.chart)))
    }

    pub fn components(&self) -> impl Iterator<Item = (&str, &Expression)> {
        self.components
            .iter()
            .map(|(i, e)| (self.chart.coord(*i).name.as_str(), e))
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    /// Apply as a derivation: `X(e) = Σ X^z · ∂e/∂z`.
    pub fn apply(&self, e: &Expression) -> Result<Expression> {
        let mut acc = Expression::zero(&self.chart);
        for (idx, comp) in &self.components {
            let d = e.differentiate(&self.chart.coord(*idx).name)?;
            if !d.is_zero() {
                acc = acc.add(&comp.mul(&d)?)?;
            }
        }
        Ok(acc)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch(
                self.chart.name().into(),
                other.chart.name().into(),
            ));
        }
        let mut out = self.clone();
        for (idx, e) in &other.components {
            let name = other.chart.coord(*idx).name.clone();
            let cur = out.component(&name)?;
            out.set(&name, cur.add(e)?)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            components: self
                .components
                .iter()
                .map(|(i, e)| (*i, e.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &crate::expr::Coeff) -> VectorField {
        let mut out = VectorField::zero(&self.chart);
        for (i, e) in &self.components {
            let s = e.scale(c);
            if !s.is_zero() {
                out.components.insert(*i, s);
            }
        }
        out
    }

    /// Left multiplication by a function.
    pub fn mul_fn(&self, f: &Expression) -> Result<VectorField> {
        let mut out = VectorField::zero(&self.chart);
        for (i, e) in &self.components {
            let m = f.mul(e)?;
            if !m.is_zero() {
                out.components.insert(*i, m);
            }
        }
        Ok(out)
    }

    /// Grassmann parity, provided all components are consistently graded.
    pub fn parity(&self) -> Result<Parity> {
        let mut found: Option<Parity> = None;
        for (idx, e) in &self.components {
            let (p, _) = e.grade_of()?;
            let field_parity = p.compose(self.chart.coord(*idx).parity);
            match found {
                None => found = Some(field_parity),
                Some(q) if q == field_parity => {}
                Some(q) => {
                    return Err(Error::Inhomogeneous {
                        term_a: format!("component of d/d{}", self.chart.coord(*idx).name),
                        grade_a: format!("{field_parity}"),
                        term_b: "earlier component".into(),
                        grade_b: format!("{q}"),
                    })
                }
            }
        }
        found.ok_or(Error::GradeOfZero)
    }

    /// Homogeneous weight: the vector `k` with `weight(X^z) = weight(z) + k`
    /// for every nonzero component.
    pub fn weight(&self) -> Result<Vec<i64>> {
        let mut found: Option<Vec<i64>> = None;
        for (idx, e) in &self.components {
            let (_, w) = e.grade_of()?;
            let cw = &self.chart.coord(*idx).weight;
            let k: Vec<i64> = w
                .iter()
                .zip(cw.iter())
                .map(|(a, b)| *a as i64 - *b as i64)
                .collect();
            match &found {
                None => found = Some(k),
                Some(q) if *q == k => {}
                Some(q) => {
                    return Err(Error::Inhomogeneous {
                        term_a: format!("component of d/d{}", self.chart.coord(*idx).name),
                        grade_a: format!("{k:?}"),
                        term_b: "earlier component".into(),
                        grade_b: format!("{q:?}"),
                    })
                }
            }
        }
        found.ok_or(Error::GradeOfZero)
    }

    pub fn has_parity(&self, p: Parity) -> bool {
        self.is_zero() || self.parity().map(|q| q == p).unwrap_or(false)
    }

    pub fn has_weight(&self, w: &[i64]) -> bool {
        self.is_zero() || self.weight().map(|v| v == w).unwrap_or(false)
    }

    /// Graded commutator `[X, Y] = X∘Y − (−1)^{|X||Y|} Y∘X`, computed on
    /// generators. Both fields must be parity-homogeneous.
    pub fn commutator(&self, other: &VectorField) -> Result<VectorField> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch(
                self.chart.name().into(),
                other.chart.name().into(),
            ));
        }
        if self.is_zero() || other.is_zero() {
            return Ok(VectorField::zero(&self.chart));
        }
        let sign_flip = self.parity()? == Parity::Odd && other.parity()? == Parity::Odd;
        let mut out = VectorField::zero(&self.chart);
        let indices: std::collections::BTreeSet<usize> = self
            .components
            .keys()
            .chain(other.components.keys())
            .copied()
            .collect();
        // [X,Y](z) = X(Y(z)) − (−1)^{|X||Y|} Y(X(z)); it suffices to evaluate
        // on the union of the supports.
        for idx in indices {
            let name = self.chart.coord(idx).name.clone();
            let yz = other
                .components
                .get(&idx)
                .cloned()
                .unwrap_or_else(|| Expression::zero(&self.chart));
            let xz = self
                .components
                .get(&idx)
                .cloned()
                .unwrap_or_else(|| Expression::zero(&self.chart));
            let a = self.apply(&yz)?;
            let b = other.apply(&xz)?;
            let comp = if sign_flip { a.add(&b)? } else { a.sub(&b)? };
            out.set(&name, comp)?;
        }
        Ok(out)
    }

    /// Square of an odd vector field: `X² = ½[X, X]`, i.e. `X∘X` on generators.
    pub fn square(&self) -> Result<VectorField> {
        let mut out = VectorField::zero(&self.chart);
        for c in self.chart.coords() {
            let once = self.component(&c.name)?;
            let twice = self.apply(&once)?;
            out.set(&c.name, twice)?;
        }
        Ok(out)
    }

    /// Push along a two-way change of coordinates: the resulting field over
    /// the primed chart has components `X'(z') = inverse(X(forward(z')))`.
    pub fn conjugate(&self, tw: &crate::subst::TwoWayMap) -> Result<VectorField> {
        if tw.unprimed() != &self.chart {
            return Err(Error::ChartMismatch(
                tw.unprimed().name().into(),
                self.chart.name().into(),
            ));
        }
        let primed = tw.primed().clone();
        let mut out = VectorField::zero(&primed);
        for c in primed.coords() {
            let pulled = tw.forward.image(&c.name)?;
            let moved = self.apply(&pulled)?;
            out.set(&c.name, tw.inverse.apply(&moved)?)?;
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        if self.components.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (i, e) in &self.components {
            parts.push(format!("({}) d/d{}", e.render(), self.chart.coord(*i).name));
        }
        parts.join(" + ")
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::pi_bundle_chart;
    use crate::expr::FnSym;

    #[test]
    fn de_rham_differential_squares_to_zero() {
        let c = pi_bundle_chart("PiTM", &["x"], &["dx"]).unwrap();
        let dx = Expression::coord(&c, "dx").unwrap();
        let d = VectorField::new(&c, &[("x", dx)]).unwrap();
        assert_eq!(d.parity().unwrap(), Parity::Odd);
        assert_eq!(d.weight().unwrap(), vec![1]);
        assert!(d.square().unwrap().is_zero());

        let f = Expression::sym(&c, FnSym::new("f"));
        let df = d.apply(&f).unwrap();
        assert_eq!(df.render(), "D[f;x]*dx");
        assert!(d.apply(&df).unwrap().is_zero());
    }

    #[test]
    fn graded_leibniz_for_odd_derivation() {
        // ∂_z(ab) = (∂_z a) b + (−1)^{|z||a|} a (∂_z b) on a sample pair.
        let c = pi_bundle_chart("PiA", &["x"], &["xi1", "xi2"]).unwrap();
        let xi1 = Expression::coord(&c, "xi1").unwrap();
        let xi2 = Expression::coord(&c, "xi2").unwrap();
        let x = Expression::coord(&c, "x").unwrap();
        let a = xi1.clone();
        let b = xi2.mul(&x).unwrap();
        let d = VectorField::new(&c, &[("xi1", Expression::one(&c))]).unwrap();
        let lhs = d.apply(&a.mul(&b).unwrap()).unwrap();
        let rhs = d
            .apply(&a)
            .unwrap()
            .mul(&b)
            .unwrap()
            .sub(&a.mul(&d.apply(&b).unwrap()).unwrap())
            .unwrap();
        assert_eq!(lhs, rhs);
    }
}
