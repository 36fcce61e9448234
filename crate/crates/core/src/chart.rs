//! Charts: named coordinate systems with Grassmann parity and multi-weights.
//!
//! A chart fixes the ambient number of grading slots and one descriptor per
//! coordinate. Coordinates are stored sorted by (multiweight lexicographic,
//! name); that order is the canonical order every normal form in the engine
//! depends on.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn compose(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CoordKind {
    /// Weight-zero even coordinate on the base manifold.
    Base,
    /// Fibre coordinate of a (multi-)graded bundle.
    Fiber,
    /// Grassmann-odd coordinate of the parity-reversed algebroid factor;
    /// weight one in exactly the last grading slot.
    AlgebroidOdd,
    /// Formal even parameter of weight zero (scale parameters t, s and the
    /// infinitesimal square-zero parameters).
    Param { square_zero: bool },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Coordinate {
    pub name: String,
    pub parity: Parity,
    pub weight: Vec<u32>,
    pub kind: CoordKind,
}

impl Coordinate {
    pub fn base(name: impl Into<String>, slots: usize) -> Coordinate {
        Coordinate {
            name: name.into(),
            parity: Parity::Even,
            weight: vec![0; slots],
            kind: CoordKind::Base,
        }
    }

    pub fn fiber(name: impl Into<String>, weight: Vec<u32>) -> Coordinate {
        Coordinate {
            name: name.into(),
            parity: Parity::Even,
            weight,
            kind: CoordKind::Fiber,
        }
    }

    pub fn odd_fiber(name: impl Into<String>, weight: Vec<u32>) -> Coordinate {
        Coordinate {
            name: name.into(),
            parity: Parity::Odd,
            weight,
            kind: CoordKind::Fiber,
        }
    }

    pub fn algebroid_odd(name: impl Into<String>, slots: usize) -> Coordinate {
        let mut weight = vec![0; slots];
        weight[slots - 1] = 1;
        Coordinate {
            name: name.into(),
            parity: Parity::Odd,
            weight,
            kind: CoordKind::AlgebroidOdd,
        }
    }

    pub fn param(name: impl Into<String>, slots: usize, square_zero: bool) -> Coordinate {
        Coordinate {
            name: name.into(),
            parity: Parity::Even,
            weight: vec![0; slots],
            kind: CoordKind::Param { square_zero },
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self.kind, CoordKind::Base)
    }

    pub fn is_param(&self) -> bool {
        matches!(self.kind, CoordKind::Param { .. })
    }

    pub fn square_zero(&self) -> bool {
        matches!(self.kind, CoordKind::Param { square_zero: true })
    }
}

#[derive(Debug)]
pub struct ChartData {
    pub name: String,
    pub slots: usize,
    /// Coordinates in canonical order: (weight lexicographic, name) ascending.
    pub coords: Vec<Coordinate>,
    by_name: BTreeMap<String, usize>,
}

/// Shared immutable chart handle. Charts compare by content, with a pointer
/// fast path, so independently built identical charts are interchangeable.
#[derive(Clone, Debug)]
pub struct Chart(Arc<ChartData>);

impl PartialEq for Chart {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.slots == other.0.slots && self.0.coords == other.0.coords)
    }
}

impl Eq for Chart {}

impl Chart {
    pub fn new(name: impl Into<String>, slots: usize, mut coords: Vec<Coordinate>) -> Result<Chart> {
        for c in &coords {
            if c.weight.len() != slots {
                return Err(Error::GradingViolation {
                    name: c.name.clone(),
                    expected: format!("multiweight of length {slots}"),
                    got: format!("length {}", c.weight.len()),
                });
            }
            match c.kind {
                CoordKind::Base | CoordKind::Param { .. } => {
                    if c.parity != Parity::Even || c.weight.iter().any(|&w| w != 0) {
                        return Err(Error::GradingViolation {
                            name: c.name.clone(),
                            expected: "even parity and all-zero multiweight".into(),
                            got: format!("{} {:?}", c.parity, c.weight),
                        });
                    }
                }
                CoordKind::AlgebroidOdd => {
                    let ok = c.parity == Parity::Odd
                        && c.weight[slots - 1] == 1
                        && c.weight[..slots - 1].iter().all(|&w| w == 0);
                    if !ok {
                        return Err(Error::GradingViolation {
                            name: c.name.clone(),
                            expected: "odd parity and weight 1 in the last slot only".into(),
                            got: format!("{} {:?}", c.parity, c.weight),
                        });
                    }
                }
                CoordKind::Fiber => {}
            }
        }
        coords.sort_by(|a, b| a.weight.cmp(&b.weight).then_with(|| a.name.cmp(&b.name)));
        let mut by_name = BTreeMap::new();
        for (i, c) in coords.iter().enumerate() {
            if by_name.insert(c.name.clone(), i).is_some() {
                return Err(Error::DuplicateCoordinate(c.name.clone()));
            }
        }
        Ok(Chart(Arc::new(ChartData {
            name: name.into(),
            slots,
            coords,
            by_name,
        })))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn slots(&self) -> usize {
        self.0.slots
    }

    pub fn len(&self) -> usize {
        self.0.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.coords.is_empty()
    }

    pub fn coord(&self, idx: usize) -> &Coordinate {
        &self.0.coords[idx]
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.0.coords
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.0
            .by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownCoordinate(name.into(), self.0.name.clone()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.by_name.contains_key(name)
    }

    pub fn base_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.coord(i).is_base()).collect()
    }

    pub fn indices_where(&self, pred: impl Fn(&Coordinate) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(self.coord(i))).collect()
    }

    /// Maximum weight occurring in the given slot.
    pub fn degree(&self, slot: usize) -> u32 {
        self.coords().iter().map(|c| c.weight[slot]).max().unwrap_or(0)
    }

    /// Same coordinates plus extra formal parameters.
    pub fn with_params(&self, params: &[(&str, bool)]) -> Result<Chart> {
        let mut coords = self.coords().to_vec();
        for (p, sq) in params {
            coords.push(Coordinate::param(*p, self.slots(), *sq));
        }
        Chart::new(format!("{}+params", self.name()), self.slots(), coords)
    }

    /// Restriction to the coordinates satisfying `keep`.
    pub fn restrict(&self, name: impl Into<String>, keep: impl Fn(&Coordinate) -> bool) -> Result<Chart> {
        let coords = self.coords().iter().filter(|c| keep(c)).cloned().collect();
        Chart::new(name, self.slots(), coords)
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Chart of a graded bundle: weight-zero base coordinates plus even fibre
/// coordinates of positive weight, a single grading slot.
pub fn graded_bundle_chart(
    name: impl Into<String>,
    base: &[&str],
    fibers: &[(&str, u32)],
) -> Result<Chart> {
    let mut coords: Vec<Coordinate> = base.iter().map(|b| Coordinate::base(*b, 1)).collect();
    for (f, w) in fibers {
        if *w == 0 {
            return Err(Error::GradingViolation {
                name: (*f).into(),
                expected: "positive fibre weight".into(),
                got: "0".into(),
            });
        }
        coords.push(Coordinate::fiber(*f, vec![*w]));
    }
    Chart::new(name, 1, coords)
}

/// Chart of a multi-graded bundle with `slots` gradings.
pub fn multigraded_bundle_chart(
    name: impl Into<String>,
    slots: usize,
    base: &[&str],
    fibers: &[(&str, Vec<u32>)],
) -> Result<Chart> {
    let mut coords: Vec<Coordinate> = base.iter().map(|b| Coordinate::base(*b, slots)).collect();
    for (f, w) in fibers {
        if w.iter().all(|&x| x == 0) {
            return Err(Error::GradingViolation {
                name: (*f).into(),
                expected: "non-zero fibre multiweight".into(),
                got: format!("{w:?}"),
            });
        }
        coords.push(Coordinate::fiber(*f, w.clone()));
    }
    Chart::new(name, slots, coords)
}

/// Chart of a parity-reversed vector bundle ΠA: base coordinates plus odd
/// weight-one coordinates, one grading slot.
pub fn pi_bundle_chart(name: impl Into<String>, base: &[&str], odd: &[&str]) -> Result<Chart> {
    let mut coords: Vec<Coordinate> = base.iter().map(|b| Coordinate::base(*b, 1)).collect();
    coords.extend(odd.iter().map(|o| Coordinate::algebroid_odd(*o, 1)));
    Chart::new(name, 1, coords)
}

/// Product chart of a graded bundle with ΠA over the shared base: the bundle
/// keeps its grading slots, the odd coordinates get one extra final slot.
pub fn product_chart(name: impl Into<String>, bundle: &Chart, pi: &Chart) -> Result<Chart> {
    let slots = bundle.slots() + 1;
    let mut coords = Vec::new();
    for c in bundle.coords() {
        let mut w = c.weight.clone();
        w.push(0);
        coords.push(Coordinate {
            name: c.name.clone(),
            parity: c.parity,
            weight: w,
            kind: c.kind,
        });
    }
    for c in pi.coords() {
        match c.kind {
            CoordKind::Base => {
                if !bundle.contains(&c.name) {
                    return Err(Error::Precondition(format!(
                        "base coordinate `{}` of `{}` missing from `{}`; the factors must share the base chart",
                        c.name,
                        pi.name(),
                        bundle.name()
                    )));
                }
            }
            CoordKind::AlgebroidOdd => coords.push(Coordinate::algebroid_odd(c.name.clone(), slots)),
            _ => {
                return Err(Error::Precondition(format!(
                    "`{}` is not a ΠA chart: unexpected coordinate `{}`",
                    pi.name(),
                    c.name
                )))
            }
        }
    }
    for c in bundle.coords() {
        if c.is_base() && !pi.contains(&c.name) {
            return Err(Error::Precondition(format!(
                "base coordinate `{}` of `{}` missing from `{}`; the factors must share the base chart",
                c.name,
                bundle.name(),
                pi.name()
            )));
        }
    }
    Chart::new(name, slots, coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_weight_then_name() {
        let c = graded_bundle_chart("F", &["x"], &[("z", 2), ("y", 1)]).unwrap();
        let names: Vec<&str> = c.coords().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["x", "y", "z"]);
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(graded_bundle_chart("F", &["x"], &[("x", 1)]).is_err());
    }

    #[test]
    fn product_requires_shared_base() {
        let f = graded_bundle_chart("F", &["x"], &[("y", 1)]).unwrap();
        let a = pi_bundle_chart("PiA", &["q"], &["xi1"]).unwrap();
        assert!(product_chart("T", &f, &a).is_err());
        let a2 = pi_bundle_chart("PiA", &["x"], &["xi1"]).unwrap();
        let t = product_chart("T", &f, &a2).unwrap();
        assert_eq!(t.slots(), 2);
        assert_eq!(t.coord(t.index_of("xi1").unwrap()).weight, vec![0, 1]);
        assert_eq!(t.coord(t.index_of("y").unwrap()).weight, vec![1, 0]);
    }
}
