//! Exact symbolic algebra of graded-super polynomial expressions.
//!
//! An [`Expression`] is a finite sum of terms
//! `rational · (base-function symbols) · (even monomial) · (sorted odd monomial)`
//! over a fixed [`Chart`]. Every constructor and operation returns the
//! canonical normal form:
//!
//! * odd coordinates sorted ascending in the chart's canonical order, with the
//!   Koszul sign absorbed into the coefficient; a repeated odd factor kills
//!   the term, as does the square of any square-zero formal parameter;
//! * terms sorted by a fixed total monomial order, like terms combined,
//!   zero coefficients dropped.
//!
//! Equality of canonical forms is the engine's only equality notion.
//! Coefficients are exact big rationals; there is no floating point anywhere.

use std::cmp::Ordering;
use std::fmt;

use num::{BigInt, BigRational, One, Signed, Zero};

use crate::chart::{Chart, Parity};
use crate::error::{Error, Result};

pub type Coeff = BigRational;

pub fn rat(n: i64) -> Coeff {
    BigRational::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Coeff {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Opaque base-function symbol with a formal partial-derivative multi-index.
///
/// Symbols depend on the base point only; partial derivatives commute, so the
/// multi-index is a sorted multiset of base-coordinate names.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct FnSym {
    pub name: String,
    /// Sorted (base coordinate name, order) pairs, order > 0.
    pub deriv: Vec<(String, u32)>,
}

impl FnSym {
    pub fn new(name: impl Into<String>) -> FnSym {
        FnSym {
            name: name.into(),
            deriv: Vec::new(),
        }
    }

    /// Bump the derivative order with respect to the named base coordinate.
    pub fn bump(&self, coord: &str) -> FnSym {
        let mut deriv = self.deriv.clone();
        match deriv.iter_mut().find(|(n, _)| n == coord) {
            Some((_, k)) => *k += 1,
            None => {
                deriv.push((coord.to_string(), 1));
                deriv.sort();
            }
        }
        FnSym {
            name: self.name.clone(),
            deriv,
        }
    }
}

impl fmt::Display for FnSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.deriv.is_empty() {
            write!(f, "{}", self.name)
        } else {
            let mut parts = Vec::new();
            for (n, k) in &self.deriv {
                for _ in 0..*k {
                    parts.push(n.as_str());
                }
            }
            write!(f, "D[{};{}]", self.name, parts.join(","))
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Term {
    pub coeff: Coeff,
    /// Sorted (symbol, power) pairs, power > 0.
    pub syms: Vec<(FnSym, u32)>,
    /// Sorted (even coordinate index, power) pairs, power > 0.
    pub evens: Vec<(usize, u32)>,
    /// Strictly ascending odd coordinate indices.
    pub odds: Vec<usize>,
}

impl Term {
    fn unit() -> Term {
        Term {
            coeff: Coeff::one(),
            syms: Vec::new(),
            evens: Vec::new(),
            odds: Vec::new(),
        }
    }

    fn monomial_cmp(&self, other: &Term) -> Ordering {
        self.odds
            .cmp(&other.odds)
            .then_with(|| self.evens.cmp(&other.evens))
            .then_with(|| self.syms.cmp(&other.syms))
    }

    /// Grade of the term in the given chart.
    fn grade(&self, chart: &Chart) -> (Parity, Vec<u32>) {
        let mut w = vec![0u32; chart.slots()];
        for (i, p) in &self.evens {
            for (s, acc) in chart.coord(*i).weight.iter().zip(w.iter_mut()) {
                *acc += s * p;
            }
        }
        for i in &self.odds {
            for (s, acc) in chart.coord(*i).weight.iter().zip(w.iter_mut()) {
                *acc += s;
            }
        }
        let parity = if self.odds.len() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        };
        (parity, w)
    }
}

/// Product of two terms; `None` when the product vanishes (repeated odd factor
/// or the square of a square-zero parameter).
fn mul_terms(chart: &Chart, a: &Term, b: &Term) -> Option<Term> {
    // Koszul sign: each odd factor of `b` moves left past the odd factors of
    // `a` that come after it in the canonical order.
    let mut sign_flips = 0usize;
    let mut odds = Vec::with_capacity(a.odds.len() + b.odds.len());
    let (mut i, mut j) = (0, 0);
    while i < a.odds.len() && j < b.odds.len() {
        match a.odds[i].cmp(&b.odds[j]) {
            Ordering::Less => {
                odds.push(a.odds[i]);
                i += 1;
            }
            Ordering::Greater => {
                sign_flips += a.odds.len() - i;
                odds.push(b.odds[j]);
                j += 1;
            }
            Ordering::Equal => return None,
        }
    }
    odds.extend_from_slice(&a.odds[i..]);
    odds.extend_from_slice(&b.odds[j..]);

    let mut evens = a.evens.clone();
    for (idx, p) in &b.evens {
        match evens.binary_search_by_key(idx, |(k, _)| *k) {
            Ok(pos) => {
                evens[pos].1 += p;
                if chart.coord(*idx).square_zero() && evens[pos].1 >= 2 {
                    return None;
                }
            }
            Err(pos) => evens.insert(pos, (*idx, *p)),
        }
    }

    let mut syms = a.syms.clone();
    for (s, p) in &b.syms {
        match syms.binary_search_by(|(t, _)| t.cmp(s)) {
            Ok(pos) => syms[pos].1 += p,
            Err(pos) => syms.insert(pos, (s.clone(), *p)),
        }
    }

    let mut coeff = &a.coeff * &b.coeff;
    if sign_flips % 2 == 1 {
        coeff = -coeff;
    }
    Some(Term {
        coeff,
        syms,
        evens,
        odds,
    })
}

/// Canonical-form element of the graded-super polynomial algebra over a chart.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Expression {
    chart: Chart,
    terms: Vec<Term>,
}

impl Expression {
    pub fn zero(chart: &Chart) -> Expression {
        Expression {
            chart: chart.clone(),
            terms: Vec::new(),
        }
    }

    pub fn one(chart: &Chart) -> Expression {
        Expression::constant(chart, Coeff::one())
    }

    pub fn constant(chart: &Chart, c: Coeff) -> Expression {
        if c.is_zero() {
            return Expression::zero(chart);
        }
        Expression {
            chart: chart.clone(),
            terms: vec![Term {
                coeff: c,
                ..Term::unit()
            }],
        }
    }

    pub fn int(chart: &Chart, n: i64) -> Expression {
        Expression::constant(chart, rat(n))
    }

    pub fn coord(chart: &Chart, name: &str) -> Result<Expression> {
        let idx = chart.index_of(name)?;
        let c = chart.coord(idx);
        let mut t = Term::unit();
        if c.parity == Parity::Odd {
            t.odds.push(idx);
        } else {
            t.evens.push((idx, 1));
        }
        Ok(Expression {
            chart: chart.clone(),
            terms: vec![t],
        })
    }

    pub fn sym(chart: &Chart, s: FnSym) -> Expression {
        let mut t = Term::unit();
        t.syms.push((s, 1));
        Expression {
            chart: chart.clone(),
            terms: vec![t],
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_chart(&self, other: &Expression) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch(
                self.chart.name().into(),
                other.chart.name().into(),
            ));
        }
        Ok(())
    }

    fn from_raw(chart: Chart, mut terms: Vec<Term>) -> Expression {
        terms.sort_by(|a, b| a.monomial_cmp(b));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            if t.coeff.is_zero() {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.monomial_cmp(&t) == Ordering::Equal => {
                    last.coeff = &last.coeff + &t.coeff;
                    if last.coeff.is_zero() {
                        out.pop();
                    }
                }
                _ => out.push(t),
            }
        }
        Expression { chart, terms: out }
    }

    pub fn add(&self, other: &Expression) -> Result<Expression> {
        self.check_chart(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Expression::from_raw(self.chart.clone(), terms))
    }

    pub fn sub(&self, other: &Expression) -> Result<Expression> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expression {
        self.scale(&-Coeff::one())
    }

    pub fn scale(&self, c: &Coeff) -> Expression {
        if c.is_zero() {
            return Expression::zero(&self.chart);
        }
        Expression {
            chart: self.chart.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: &t.coeff * c,
                    ..t.clone()
                })
                .collect(),
        }
    }

    pub fn mul(&self, other: &Expression) -> Result<Expression> {
        self.check_chart(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                if let Some(t) = mul_terms(&self.chart, a, b) {
                    terms.push(t);
                }
            }
        }
        Ok(Expression::from_raw(self.chart.clone(), terms))
    }

    pub fn pow(&self, n: u32) -> Result<Expression> {
        let mut acc = Expression::one(&self.chart);
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Left partial derivative with respect to a coordinate. For an odd
    /// coordinate the factor is commuted to the leftmost position, the Koszul
    /// sign accumulating in the coefficient, and removed.
    pub fn differentiate(&self, name: &str) -> Result<Expression> {
        let idx = self.chart.index_of(name)?;
        let coord = self.chart.coord(idx).clone();
        let mut out = Vec::new();
        for t in &self.terms {
            if coord.parity == Parity::Odd {
                if let Some(pos) = t.odds.iter().position(|&i| i == idx) {
                    let mut nt = t.clone();
                    nt.odds.remove(pos);
                    if pos % 2 == 1 {
                        nt.coeff = -nt.coeff;
                    }
                    out.push(nt);
                }
                continue;
            }
            // Power rule on the even monomial.
            for (k, (ci, p)) in t.evens.iter().enumerate() {
                if *ci != idx {
                    continue;
                }
                let mut nt = t.clone();
                nt.coeff = &nt.coeff * rat(*p as i64);
                if *p == 1 {
                    nt.evens.remove(k);
                } else {
                    nt.evens[k].1 -= 1;
                }
                out.push(nt);
            }
            // Formal chain rule on base-function symbols.
            if coord.is_base() {
                for (k, (s, p)) in t.syms.iter().enumerate() {
                    let bumped = s.bump(&coord.name);
                    let mut nt = t.clone();
                    nt.coeff = &nt.coeff * rat(*p as i64);
                    if *p == 1 {
                        nt.syms.remove(k);
                    } else {
                        nt.syms[k].1 -= 1;
                    }
                    match nt.syms.binary_search_by(|(u, _)| u.cmp(&bumped)) {
                        Ok(pos) => nt.syms[pos].1 += 1,
                        Err(pos) => nt.syms.insert(pos, (bumped, 1)),
                    }
                    out.push(nt);
                }
            }
        }
        Ok(Expression::from_raw(self.chart.clone(), out))
    }

    /// Grade of a homogeneous expression. Reports the offending pair of terms
    /// when the expression is not homogeneous.
    pub fn grade_of(&self) -> Result<(Parity, Vec<u32>)> {
        let first = self.terms.first().ok_or(Error::GradeOfZero)?;
        let grade = first.grade(&self.chart);
        for t in &self.terms[1..] {
            let g = t.grade(&self.chart);
            if g != grade {
                return Err(Error::Inhomogeneous {
                    term_a: self.render_term(first),
                    grade_a: format!("({}, {:?})", grade.0, grade.1),
                    term_b: self.render_term(t),
                    grade_b: format!("({}, {:?})", g.0, g.1),
                });
            }
        }
        Ok(grade)
    }

    /// True when the expression is homogeneous of the given grade (zero is
    /// homogeneous of every grade).
    pub fn has_grade(&self, parity: Parity, weight: &[u32]) -> bool {
        if self.is_zero() {
            return true;
        }
        match self.grade_of() {
            Ok((p, w)) => p == parity && w == weight,
            Err(_) => false,
        }
    }

    /// Re-express over another chart, mapping coordinates by name.
    pub fn promote(&self, target: &Chart) -> Result<Expression> {
        let mut out = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let mut nt = Term {
                coeff: t.coeff.clone(),
                syms: t.syms.clone(),
                evens: Vec::with_capacity(t.evens.len()),
                odds: Vec::with_capacity(t.odds.len()),
            };
            for (i, p) in &t.evens {
                nt.evens.push((target.index_of(&self.chart.coord(*i).name)?, *p));
            }
            for i in &t.odds {
                nt.odds.push(target.index_of(&self.chart.coord(*i).name)?);
            }
            nt.evens.sort_by_key(|(i, _)| *i);
            // The canonical order of shared coordinates agrees between charts
            // (both sort by weight then name), but promoted weights can gain
            // slots, so re-sort and recount the Koszul sign defensively.
            let mut odds = nt.odds.clone();
            let mut flips = 0usize;
            for i in 1..odds.len() {
                let mut j = i;
                while j > 0 && odds[j - 1] > odds[j] {
                    odds.swap(j - 1, j);
                    flips += 1;
                    j -= 1;
                }
            }
            if flips % 2 == 1 {
                nt.coeff = -nt.coeff;
            }
            nt.odds = odds;
            out.push(nt);
        }
        Ok(Expression::from_raw(target.clone(), out))
    }

    /// Canonical textual rendering: deterministic and whitespace-normalized.
    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (k, t) in self.terms.iter().enumerate() {
            let body = self.render_term_body(t);
            let coeff = t.coeff.abs();
            let neg = t.coeff.is_negative();
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let coeff_str = if coeff.is_one() && !body.is_empty() {
                String::new()
            } else {
                format!("{coeff}")
            };
            match (coeff_str.is_empty(), body.is_empty()) {
                (true, false) => s.push_str(&body),
                (false, true) => s.push_str(&coeff_str),
                (false, false) => {
                    s.push_str(&coeff_str);
                    s.push('*');
                    s.push_str(&body);
                }
                (true, true) => s.push('1'),
            }
        }
        s
    }

    fn render_term_body(&self, t: &Term) -> String {
        let mut parts = Vec::new();
        for (s, p) in &t.syms {
            if *p == 1 {
                parts.push(format!("{s}"));
            } else {
                parts.push(format!("{s}^{p}"));
            }
        }
        for (i, p) in &t.evens {
            let name = &self.chart.coord(*i).name;
            if *p == 1 {
                parts.push(name.clone());
            } else {
                parts.push(format!("{name}^{p}"));
            }
        }
        for i in &t.odds {
            parts.push(self.chart.coord(*i).name.clone());
        }
        parts.join("*")
    }

    fn render_term(&self, t: &Term) -> String {
        Expression {
            chart: self.chart.clone(),
            terms: vec![t.clone()],
        }
        .render()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::pi_bundle_chart;

    fn chart2() -> Chart {
        pi_bundle_chart("PiA", &["x"], &["xi1", "xi2"]).unwrap()
    }

    #[test]
    fn odd_anticommutation() {
        let c = chart2();
        let xi1 = Expression::coord(&c, "xi1").unwrap();
        let xi2 = Expression::coord(&c, "xi2").unwrap();
        // ξ²·ξ¹ = −ξ¹ξ²
        let lhs = xi2.mul(&xi1).unwrap();
        let rhs = xi1.mul(&xi2).unwrap().neg();
        assert_eq!(lhs, rhs);
        // ξ¹·ξ¹ = 0
        assert!(xi1.mul(&xi1).unwrap().is_zero());
    }

    #[test]
    fn even_square_with_symbol() {
        // (y·g(x))·(y·g(x)) = y²·g(x)²  -- oracle: naive unsorted expansion,
        // no signs since everything is even.
        let c = crate::chart::graded_bundle_chart("F", &["x"], &[("y", 1)]).unwrap();
        let y = Expression::coord(&c, "y").unwrap();
        let g = Expression::sym(&c, FnSym::new("g"));
        let yg = y.mul(&g).unwrap();
        let sq = yg.mul(&yg).unwrap();
        let expect = y.pow(2).unwrap().mul(&g.pow(2).unwrap()).unwrap();
        assert_eq!(sq, expect);
    }

    #[test]
    fn left_derivative_convention() {
        let c = chart2();
        let xi1 = Expression::coord(&c, "xi1").unwrap();
        let xi2 = Expression::coord(&c, "xi2").unwrap();
        let m = xi1.mul(&xi2).unwrap();
        assert_eq!(m.differentiate("xi1").unwrap(), xi2);
        assert_eq!(m.differentiate("xi2").unwrap(), xi1.neg());
    }

    #[test]
    fn base_symbol_derivative_bump() {
        let c = crate::chart::graded_bundle_chart("F", &["x"], &[("y", 1)]).unwrap();
        let f = Expression::sym(&c, FnSym::new("f"));
        let y = Expression::coord(&c, "y").unwrap();
        let fy = f.mul(&y).unwrap();
        let d = fy.differentiate("x").unwrap();
        let fx = Expression::sym(&c, FnSym::new("f").bump("x"));
        assert_eq!(d, fx.mul(&y).unwrap());
        assert_eq!(d.render(), "D[f;x]*y");
    }

    #[test]
    fn exact_rationals() {
        let c = chart2();
        let half = Expression::constant(&c, frac(1, 2));
        let two = Expression::int(&c, 2);
        let one = half.mul(&two).unwrap();
        assert_eq!(one, Expression::one(&c));
    }

    #[test]
    fn even_commutativity_of_symbols() {
        let c = chart2();
        let f = Expression::sym(&c, FnSym::new("f"));
        let g = Expression::sym(&c, FnSym::new("g"));
        let fg = f.mul(&g).unwrap();
        let gf = g.mul(&f).unwrap();
        assert!(fg.sub(&gf).unwrap().is_zero());
    }

    #[test]
    fn grade_of_examples() {
        let c = crate::chart::graded_bundle_chart("F", &["x"], &[("y", 1), ("z", 2)]).unwrap();
        let y = Expression::coord(&c, "y").unwrap();
        let z = Expression::coord(&c, "z").unwrap();
        let (p, w) = y.mul(&z).unwrap().grade_of().unwrap();
        assert_eq!((p, w), (Parity::Even, vec![3]));
        assert!(y.add(&z).unwrap().grade_of().is_err());
    }

    #[test]
    fn square_zero_parameter() {
        let c = chart2().with_params(&[("eps", true)]).unwrap();
        let eps = Expression::coord(&c, "eps").unwrap();
        assert!(eps.mul(&eps).unwrap().is_zero());
        let t = Expression::coord(
            &chart2().with_params(&[("t", false)]).unwrap(),
            "t",
        )
        .unwrap();
        assert!(!t.mul(&t).unwrap().is_zero());
    }
}
