//! Coordinate substitutions: algebra homomorphisms given on generators.
//!
//! A [`Substitution`] replaces each coordinate of a source chart by an
//! expression over a target chart. Coordinates without an explicit assignment
//! map to the coordinate of the same name in the target. Base-function symbols
//! are functions of the base point and pass through substitution untouched.

use std::collections::BTreeMap;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expression;

#[derive(Clone, Debug, PartialEq)]
pub struct Substitution {
    source: Chart,
    target: Chart,
    /// Source coordinate index -> image expression over the target chart.
    map: BTreeMap<usize, Expression>,
}

impl Substitution {
    /// Build a substitution from (source coordinate name, image) pairs.
    /// Every image must be parity- and multiweight-preserving.
    pub fn new(
        source: &Chart,
        target: &Chart,
        assignments: &[(&str, Expression)],
    ) -> Result<Substitution> {
        let mut s = Substitution {
            source: source.clone(),
            target: target.clone(),
            map: BTreeMap::new(),
        };
        for (name, image) in assignments {
            s.insert(name, image.clone())?;
        }
        s.check_unmapped()?;
        Ok(s)
    }

    pub fn identity(chart: &Chart) -> Substitution {
        Substitution {
            source: chart.clone(),
            target: chart.clone(),
            map: BTreeMap::new(),
        }
    }

    /// Identity-on-names embedding into a larger chart.
    pub fn embedding(source: &Chart, target: &Chart) -> Result<Substitution> {
        Substitution::new(source, target, &[])
    }

    fn insert(&mut self, name: &str, image: Expression) -> Result<()> {
        let idx = self.source.index_of(name)?;
        if image.chart() != &self.target {
            return Err(Error::ChartMismatch(
                image.chart().name().into(),
                self.target.name().into(),
            ));
        }
        let c = self.source.coord(idx);
        if !image.has_grade(c.parity, &c.weight) {
            return Err(Error::GradingViolation {
                name: name.into(),
                expected: format!("parity {}, multiweight {:?}", c.parity, c.weight),
                got: format!("`{}`", image.render()),
            });
        }
        self.map.insert(idx, image);
        Ok(())
    }

    fn check_unmapped(&self) -> Result<()> {
        for (i, c) in self.source.coords().iter().enumerate() {
            if self.map.contains_key(&i) {
                continue;
            }
            let j = self.target.index_of(&c.name).map_err(|_| {
                Error::IncompleteMap(format!(
                    "{} (not assigned, and absent from chart `{}`)",
                    c.name,
                    self.target.name()
                ))
            })?;
            let t = self.target.coord(j);
            if t.parity != c.parity || t.weight != c.weight {
                return Err(Error::GradingViolation {
                    name: c.name.clone(),
                    expected: format!("parity {}, multiweight {:?}", c.parity, c.weight),
                    got: format!("parity {}, multiweight {:?}", t.parity, t.weight),
                });
            }
        }
        Ok(())
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    /// Image of a source coordinate as an expression over the target chart.
    pub fn image(&self, name: &str) -> Result<Expression> {
        let idx = self.source.index_of(name)?;
        match self.map.get(&idx) {
            Some(e) => Ok(e.clone()),
            None => Expression::coord(&self.target, name),
        }
    }

    /// True when every coordinate maps to itself.
    pub fn is_identity(&self) -> bool {
        self.source == self.target
            && self.map.iter().all(|(i, e)| {
                Expression::coord(&self.target, &self.source.coord(*i).name)
                    .map(|c| &c == e)
                    .unwrap_or(false)
            })
    }

    pub fn fixes(&self, name: &str) -> bool {
        match self.source.index_of(name) {
            Ok(idx) => match self.map.get(&idx) {
                Some(e) => Expression::coord(&self.target, name)
                    .map(|c| &c == e)
                    .unwrap_or(false),
                None => true,
            },
            Err(_) => false,
        }
    }

    /// Apply as an algebra homomorphism.
    pub fn apply(&self, e: &Expression) -> Result<Expression> {
        if e.chart() != &self.source {
            return Err(Error::ChartMismatch(
                e.chart().name().into(),
                self.source.name().into(),
            ));
        }
        let mut acc = Expression::zero(&self.target);
        for t in e.terms() {
            let mut prod = Expression::constant(&self.target, t.coeff.clone());
            for (s, p) in &t.syms {
                let f = Expression::sym(&self.target, s.clone());
                prod = prod.mul(&f.pow(*p)?)?;
            }
            for (i, p) in &t.evens {
                let img = self.image(&self.source.coord(*i).name)?;
                prod = prod.mul(&img.pow(*p)?)?;
            }
            for i in &t.odds {
                let img = self.image(&self.source.coord(*i).name)?;
                prod = prod.mul(&img)?;
            }
            acc = acc.add(&prod)?;
        }
        Ok(acc)
    }

    /// Composite substitution: apply `self` first, then `then`, i.e.
    /// `apply(compose) = then.apply ∘ self.apply`.
    pub fn compose(&self, then: &Substitution) -> Result<Substitution> {
        if &self.target != then.source() {
            return Err(Error::ChartMismatch(
                self.target.name().into(),
                then.source().name().into(),
            ));
        }
        let mut map = BTreeMap::new();
        for (i, c) in self.source.coords().iter().enumerate() {
            let img = then.apply(&self.image(&c.name)?)?;
            map.insert(i, img);
        }
        Ok(Substitution {
            source: self.source.clone(),
            target: then.target().clone(),
            map,
        })
    }

    pub fn assignments(&self) -> impl Iterator<Item = (&str, &Expression)> {
        self.map
            .iter()
            .map(|(i, e)| (self.source.coord(*i).name.as_str(), e))
    }
}

/// A substitution with a supplied (and verifiable) two-sided inverse.
///
/// `forward` expresses the primed coordinates through the unprimed chart,
/// `inverse` the other way around; inverses are user-supplied data, verified
/// symbolically rather than computed.
#[derive(Clone, Debug)]
pub struct TwoWayMap {
    pub forward: Substitution,
    pub inverse: Substitution,
}

impl TwoWayMap {
    pub fn new(forward: Substitution, inverse: Substitution) -> Result<TwoWayMap> {
        if forward.source() != inverse.target() || forward.target() != inverse.source() {
            return Err(Error::ChartMismatch(
                format!("{} -> {}", forward.source().name(), forward.target().name()),
                format!("{} -> {}", inverse.source().name(), inverse.target().name()),
            ));
        }
        Ok(TwoWayMap { forward, inverse })
    }

    pub fn identity(chart: &Chart) -> TwoWayMap {
        TwoWayMap {
            forward: Substitution::identity(chart),
            inverse: Substitution::identity(chart),
        }
    }

    /// Chart whose coordinates the forward map assigns (the primed chart).
    pub fn primed(&self) -> &Chart {
        self.forward.source()
    }

    /// Chart the forward images live in (the unprimed chart).
    pub fn unprimed(&self) -> &Chart {
        self.forward.target()
    }

    /// Residuals of the two-sided inverse identities on all generators.
    /// Empty iff inverse∘forward and forward∘inverse are both the identity.
    pub fn inverse_residuals(&self) -> Result<Vec<(String, Expression)>> {
        let mut out = Vec::new();
        for c in self.primed().coords() {
            let round = self.inverse.apply(&self.forward.image(&c.name)?)?;
            let back = round.sub(&Expression::coord(self.primed(), &c.name)?)?;
            if !back.is_zero() {
                out.push((format!("inverse(forward({}))", c.name), back));
            }
        }
        for c in self.unprimed().coords() {
            let round = self.forward.apply(&self.inverse.image(&c.name)?)?;
            let back = round.sub(&Expression::coord(self.unprimed(), &c.name)?)?;
            if !back.is_zero() {
                out.push((format!("forward(inverse({}))", c.name), back));
            }
        }
        Ok(out)
    }

    pub fn swap(&self) -> TwoWayMap {
        TwoWayMap {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::graded_bundle_chart;
    use crate::expr::{frac, FnSym};

    fn deg2() -> Chart {
        graded_bundle_chart("F2", &["x"], &[("y", 1), ("z", 2)]).unwrap()
    }

    #[test]
    fn direct_image_and_inverse_roundtrip() {
        // z ↦ z + ½ y² g(x)
        let c = deg2();
        let z = Expression::coord(&c, "z").unwrap();
        let y = Expression::coord(&c, "y").unwrap();
        let g = Expression::sym(&c, FnSym::new("g"));
        let shift = y.pow(2).unwrap().mul(&g).unwrap().scale(&frac(1, 2));
        let fwd = Substitution::new(&c, &c, &[("z", z.add(&shift).unwrap())]).unwrap();
        let inv = Substitution::new(&c, &c, &[("z", z.sub(&shift).unwrap())]).unwrap();

        assert_eq!(fwd.apply(&z).unwrap(), z.add(&shift).unwrap());
        let tw = TwoWayMap::new(fwd, inv).unwrap();
        assert!(tw.inverse_residuals().unwrap().is_empty());
    }

    #[test]
    fn weight_violating_assignment_rejected() {
        let c = deg2();
        let y = Expression::coord(&c, "y").unwrap();
        // z has weight 2; assigning the weight-1 expression y must fail.
        assert!(matches!(
            Substitution::new(&c, &c, &[("z", y)]),
            Err(Error::GradingViolation { .. })
        ));
    }

    #[test]
    fn substitution_composition_law() {
        let c = deg2();
        let z = Expression::coord(&c, "z").unwrap();
        let y = Expression::coord(&c, "y").unwrap();
        let s1 = Substitution::new(&c, &c, &[("z", z.add(&y.pow(2).unwrap()).unwrap())]).unwrap();
        let s2 = Substitution::new(&c, &c, &[("y", y.scale(&frac(3, 1)))]).unwrap();
        let comp = s1.compose(&s2).unwrap();
        let e = z.mul(&y).unwrap();
        assert_eq!(
            comp.apply(&e).unwrap(),
            s2.apply(&s1.apply(&e).unwrap()).unwrap()
        );
    }

    #[test]
    fn squared_linear_substitution() {
        // y' = y T(x) applied to y'^2 gives y^2 T(x)^2.
        let c = deg2();
        let y = Expression::coord(&c, "y").unwrap();
        let t = Expression::sym(&c, FnSym::new("T"));
        let s = Substitution::new(&c, &c, &[("y", y.mul(&t).unwrap())]).unwrap();
        let img = s.apply(&y.pow(2).unwrap()).unwrap();
        assert_eq!(img, y.pow(2).unwrap().mul(&t.pow(2).unwrap()).unwrap());
    }
}
