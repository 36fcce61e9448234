//! Lie algebroids as weight-one homological vector fields on ΠA.
//!
//! An [`AlgebroidSpec`] holds the anchor components `Q_i^a(x)` and the
//! antisymmetric structure functions `S_ij^k(x)` with `[e_i, e_j] = S_ij^k e_k`.
//! The induced odd field is
//!
//! `d_A = ξ^i Q_i^a ∂/∂x^a + ½ ξ^i ξ^j S_ji^k ∂/∂ξ^k`,
//!
//! and `check_structure` verifies the two displayed structure equations and
//! `d_A² = 0` as independent routes, asserting their agreement. Downstream
//! connection constructions require the [`VerifiedAlgebroid`] wrapper.

use std::collections::BTreeMap;

use crate::chart::{Chart, Coordinate, Parity};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::report::Report;
use crate::subst::Substitution;
use crate::vf::VectorField;

#[derive(Clone, Debug)]
pub struct AlgebroidSpec {
    base: Chart,
    pi_chart: Chart,
    xi_names: Vec<String>,
    base_names: Vec<String>,
    /// anchor[i][a] = Q_i^a over the ΠA chart, base-dependent only.
    anchor: Vec<Vec<Expression>>,
    /// Canonical keys i < j; S_ij^k with [e_i, e_j] = S_ij^k e_k.
    structure: BTreeMap<(usize, usize, usize), Expression>,
}

impl AlgebroidSpec {
    /// Build from anchor and structure entries (0-based indices). Structure
    /// input is antisymmetrized: diagonal entries must vanish and doubly
    /// given pairs must be consistent, otherwise construction is rejected.
    pub fn new(
        base: &Chart,
        xi_names: &[&str],
        anchor_entries: &[((usize, usize), Expression)],
        structure_entries: &[((usize, usize, usize), Expression)],
    ) -> Result<AlgebroidSpec> {
        for c in base.coords() {
            if !c.is_base() {
                return Err(Error::Precondition(format!(
                    "`{}` is not a base chart: coordinate `{}` has nonzero weight",
                    base.name(),
                    c.name
                )));
            }
        }
        let base_names: Vec<String> = base.coords().iter().map(|c| c.name.clone()).collect();
        let mut coords: Vec<Coordinate> = base.coords().to_vec();
        coords.extend(xi_names.iter().map(|x| Coordinate::algebroid_odd(*x, 1)));
        let pi_chart = Chart::new(format!("Pi({})", base.name()), 1, coords)?;
        let rank = xi_names.len();
        let dim = base_names.len();

        let mut anchor = vec![vec![Expression::zero(&pi_chart); dim]; rank];
        for ((i, a), e) in anchor_entries {
            if *i >= rank || *a >= dim {
                return Err(Error::Range(format!("anchor index ({i},{a}) out of range")));
            }
            let e = e.promote(&pi_chart)?;
            check_base_expr(&pi_chart, &e)?;
            anchor[*i][*a] = e;
        }

        let mut structure: BTreeMap<(usize, usize, usize), Expression> = BTreeMap::new();
        for ((i, j, k), e) in structure_entries {
            if *i >= rank || *j >= rank || *k >= rank {
                return Err(Error::Range(format!(
                    "structure index ({i},{j},{k}) out of range"
                )));
            }
            let e = e.promote(&pi_chart)?;
            check_base_expr(&pi_chart, &e)?;
            if i == j {
                if !e.is_zero() {
                    return Err(Error::Construction(format!(
                        "structure function S[{i}][{j}][{k}] must vanish on the diagonal, got `{}`",
                        e.render()
                    )));
                }
                continue;
            }
            let (key, val) = if i < j {
                ((*i, *j, *k), e)
            } else {
                ((*j, *i, *k), e.neg())
            };
            if let Some(prev) = structure.get(&key) {
                if prev != &val {
                    return Err(Error::Construction(format!(
                        "structure functions S[{i}][{j}][{k}] and its transpose are not antisymmetric: `{}` vs `{}`",
                        val.render(),
                        prev.render()
                    )));
                }
            } else if !val.is_zero() {
                structure.insert(key, val);
            }
        }

        Ok(AlgebroidSpec {
            base: base.clone(),
            pi_chart,
            xi_names: xi_names.iter().map(|s| s.to_string()).collect(),
            base_names,
            anchor,
            structure,
        })
    }

    /// The tangent algebroid TM in its coordinate frame: identity anchor,
    /// vanishing structure functions, odd coordinates `d<x>`.
    pub fn tangent(base: &Chart) -> Result<AlgebroidSpec> {
        let xi: Vec<String> = base.coords().iter().map(|c| format!("d{}", c.name)).collect();
        let xi_refs: Vec<&str> = xi.iter().map(|s| s.as_str()).collect();
        let dim = base.len();
        let mut spec = AlgebroidSpec::new(base, &xi_refs, &[], &[])?;
        for i in 0..dim {
            spec.anchor[i][i] = Expression::one(&spec.pi_chart);
        }
        Ok(spec)
    }

    /// A Lie algebra: zero-dimensional base, constant structure functions.
    pub fn lie_algebra(
        xi_names: &[&str],
        constants: &[((usize, usize, usize), i64)],
    ) -> Result<AlgebroidSpec> {
        let pt = Chart::new("pt", 1, vec![])?;
        let entries: Vec<((usize, usize, usize), Expression)> = constants
            .iter()
            .map(|(k, c)| (*k, Expression::int(&pt, *c)))
            .collect();
        AlgebroidSpec::new(&pt, xi_names, &[], &entries)
    }

    pub fn base(&self) -> &Chart {
        &self.base
    }

    pub fn pi_chart(&self) -> &Chart {
        &self.pi_chart
    }

    pub fn rank(&self) -> usize {
        self.xi_names.len()
    }

    pub fn dim(&self) -> usize {
        self.base_names.len()
    }

    pub fn xi_names(&self) -> &[String] {
        &self.xi_names
    }

    pub fn base_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn anchor_component(&self, i: usize, a: usize) -> &Expression {
        &self.anchor[i][a]
    }

    /// Structure function with sign handling: `[e_i, e_j] = S_ij^k e_k`.
    pub fn structure_fn(&self, i: usize, j: usize, k: usize) -> Expression {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => Expression::zero(&self.pi_chart),
            Less => self
                .structure
                .get(&(i, j, k))
                .cloned()
                .unwrap_or_else(|| Expression::zero(&self.pi_chart)),
            Greater => self
                .structure
                .get(&(j, i, k))
                .map(|e| e.neg())
                .unwrap_or_else(|| Expression::zero(&self.pi_chart)),
        }
    }

    /// Assemble `d_A` and verify it is odd of weight one.
    pub fn build_differential(&self) -> Result<VectorField> {
        let c = &self.pi_chart;
        let mut d = VectorField::zero(c);
        for (a, xa) in self.base_names.iter().enumerate() {
            let mut comp = Expression::zero(c);
            for (i, xi) in self.xi_names.iter().enumerate() {
                let q = &self.anchor[i][a];
                if !q.is_zero() {
                    comp = comp.add(&Expression::coord(c, xi)?.mul(q)?)?;
                }
            }
            d.set(xa, comp)?;
        }
        for (k, xk) in self.xi_names.iter().enumerate() {
            let mut comp = Expression::zero(c);
            for i in 0..self.rank() {
                for j in (i + 1)..self.rank() {
                    let s = self.structure_fn(j, i, k);
                    if s.is_zero() {
                        continue;
                    }
                    let m = Expression::coord(c, &self.xi_names[i])?
                        .mul(&Expression::coord(c, &self.xi_names[j])?)?
                        .mul(&s)?;
                    comp = comp.add(&m)?;
                }
            }
            d.set(xk, comp)?;
        }
        if !d.has_parity(Parity::Odd) || !d.has_weight(&[1]) {
            return Err(Error::Internal(
                "assembled differential is not odd of weight one".into(),
            ));
        }
        Ok(d)
    }
}

fn check_base_expr(chart: &Chart, e: &Expression) -> Result<()> {
    if e.is_zero() {
        return Ok(());
    }
    if !e.has_grade(Parity::Even, &vec![0; chart.slots()]) {
        return Err(Error::Domain(format!(
            "`{}` is not a base-manifold function",
            e.render()
        )));
    }
    Ok(())
}

/// An algebroid whose structure equations have been checked; the only
/// gateway to the connection machinery.
#[derive(Clone, Debug)]
pub struct VerifiedAlgebroid {
    spec: AlgebroidSpec,
    differential: VectorField,
}

impl VerifiedAlgebroid {
    pub fn spec(&self) -> &AlgebroidSpec {
        &self.spec
    }

    pub fn differential(&self) -> &VectorField {
        &self.differential
    }

    pub fn pi_chart(&self) -> &Chart {
        self.spec.pi_chart()
    }
}

/// Evaluate both displayed structure equations and `d_A² = 0` independently;
/// the report records the residuals of each route and their agreement.
///
/// The second (cyclic) equation is evaluated with the quadratic contraction
/// read against the same index convention the local display of `d_A` fixes,
/// which is the unique reading equivalent to the derived-bracket Jacobi
/// identity.
pub fn check_structure(spec: &AlgebroidSpec) -> Result<(Report, Option<VerifiedAlgebroid>)> {
    let mut rep = Report::new(format!("structure equations on `{}`", spec.pi_chart().name()));
    let c = spec.pi_chart();
    let d = spec.build_differential()?;

    // Route 1: anchor/bracket compatibility,
    //   S_ji^k Q_k^b = Q_j^a ∂_a Q_i^b − Q_i^a ∂_a Q_j^b.
    let mut eq1_ok = true;
    for i in 0..spec.rank() {
        for j in (i + 1)..spec.rank() {
            for b in 0..spec.dim() {
                let mut lhs = Expression::zero(c);
                for k in 0..spec.rank() {
                    lhs = lhs.add(&spec.structure_fn(j, i, k).mul(spec.anchor_component(k, b))?)?;
                }
                let mut rhs = Expression::zero(c);
                for (a, xa) in spec.base_names().iter().enumerate() {
                    let da_qi = spec.anchor_component(i, b).differentiate(xa)?;
                    let da_qj = spec.anchor_component(j, b).differentiate(xa)?;
                    rhs = rhs
                        .add(&spec.anchor_component(j, a).mul(&da_qi)?)?
                        .sub(&spec.anchor_component(i, a).mul(&da_qj)?)?;
                }
                let res = lhs.sub(&rhs)?;
                if !res.is_zero() {
                    eq1_ok = false;
                    rep.fail(
                        format!("first structure equation (i={i},j={j},b={b})"),
                        res.render(),
                    );
                }
            }
        }
    }
    if eq1_ok {
        rep.check("first structure equation", true);
    }

    // Route 2: cyclic (Jacobi) equation,
    //   Σ_cyc(i,j,k) [ Q_i^a ∂_a S_jk^l + S_jk^m S_im^l ] = 0.
    let mut eq2_ok = true;
    for i in 0..spec.rank() {
        for j in (i + 1)..spec.rank() {
            for k in (j + 1)..spec.rank() {
                for l in 0..spec.rank() {
                    let mut sum = Expression::zero(c);
                    for (p, q, r) in [(i, j, k), (j, k, i), (k, i, j)] {
                        for (a, xa) in spec.base_names().iter().enumerate() {
                            let ds = spec.structure_fn(q, r, l).differentiate(xa)?;
                            sum = sum.add(&spec.anchor_component(p, a).mul(&ds)?)?;
                        }
                        for m in 0..spec.rank() {
                            sum = sum.add(
                                &spec.structure_fn(q, r, m).mul(&spec.structure_fn(p, m, l))?,
                            )?;
                        }
                    }
                    if !sum.is_zero() {
                        eq2_ok = false;
                        rep.fail(
                            format!("second structure equation (i={i},j={j},k={k},l={l})"),
                            sum.render(),
                        );
                    }
                }
            }
        }
    }
    if eq2_ok {
        rep.check("second structure equation (cyclic)", true);
    }

    // Route 3: the convention-free oracle d_A² = 0.
    let sq = d.square()?;
    let homological = sq.is_zero();
    if homological {
        rep.check("d_A^2 = 0", true);
    } else {
        rep.fail("d_A^2 = 0", sq.render());
    }

    let agree = (eq1_ok && eq2_ok) == homological;
    rep.check_with(
        "structure equations agree with d_A^2 = 0",
        agree,
        vec![(
            "routes".into(),
            format!(
                "equations {}, oracle {}",
               if eq1_ok && eq2_ok { "hold" } else { "fail" },
                if homological { "holds" } else { "fails" }
            ),
        )],
    );

    let verified = if homological && agree {
        Some(VerifiedAlgebroid {
            spec: spec.clone(),
            differential: d,
        })
    } else {
        None
    };
    Ok((rep, verified))
}

/// A section `u = u^i(x) e_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    components: Vec<Expression>,
}

impl Section {
    pub fn new(spec: &AlgebroidSpec, components: &[Expression]) -> Result<Section> {
        if components.len() != spec.rank() {
            return Err(Error::Precondition(format!(
                "section needs {} components, got {}",
                spec.rank(),
                components.len()
            )));
        }
        let mut comps = Vec::new();
        for e in components {
            let e = e.promote(spec.pi_chart())?;
            check_base_expr(spec.pi_chart(), &e)?;
            comps.push(e);
        }
        Ok(Section { components: comps })
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    /// The odd interior derivative `ι_u = u^i ∂/∂ξ^i`.
    pub fn iota(&self, spec: &AlgebroidSpec) -> Result<VectorField> {
        let mut vf = VectorField::zero(spec.pi_chart());
        for (i, name) in spec.xi_names().iter().enumerate() {
            vf.set(name, self.components[i].clone())?;
        }
        Ok(vf)
    }
}

/// The Lie algebroid bracket via the derived-bracket formula
/// `ι_[u,v] = [[d_A, ι_u], ι_v]`, cross-checked against the displayed closed
/// form `[u,v]^k = u^i Q_i^a ∂_a v^k − v^i Q_i^a ∂_a u^k − u^i v^j S_ji^k`.
pub fn derived_bracket(alg: &VerifiedAlgebroid, u: &Section, v: &Section) -> Result<Section> {
    let spec = alg.spec();
    let inner = alg.differential().commutator(&u.iota(spec)?)?;
    let nested = inner.commutator(&v.iota(spec)?)?;

    // The nested commutator must be an interior derivative again.
    for (name, comp) in nested.components() {
        let idx = spec.pi_chart().index_of(name)?;
        if spec.pi_chart().coord(idx).kind != crate::chart::CoordKind::AlgebroidOdd {
            return Err(Error::Internal(format!(
                "derived bracket has a stray ∂/∂{name} component: {}",
                comp.render()
            )));
        }
        check_base_expr(spec.pi_chart(), comp)
            .map_err(|_| Error::Internal("derived bracket component is not basic".into()))?;
    }

    let mut closed = Vec::new();
    for k in 0..spec.rank() {
        // u^i Q_i^a ∂_a v^k − v^i Q_i^a ∂_a u^k − u^i v^j S_ji^k
        let mut w = Expression::zero(spec.pi_chart());
        for i in 0..spec.rank() {
            for (a, xa) in spec.base_names().iter().enumerate() {
                let q = spec.anchor_component(i, a);
                if q.is_zero() {
                    continue;
                }
                let t1 = u.components[i].mul(q)?.mul(&v.components[k].differentiate(xa)?)?;
                let t2 = v.components[i].mul(q)?.mul(&u.components[k].differentiate(xa)?)?;
                w = w.add(&t1)?.sub(&t2)?;
            }
            for j in 0..spec.rank() {
                let s = spec.structure_fn(j, i, k);
                if s.is_zero() {
                    continue;
                }
                w = w.sub(&u.components[i].mul(&v.components[j])?.mul(&s)?)?;
            }
        }
        closed.push(w);
    }

    for (k, name) in spec.xi_names().iter().enumerate() {
        let from_commutator = nested.component(name)?;
        if from_commutator != closed[k] {
            return Err(Error::Internal(format!(
                "derived bracket disagrees with the closed form on e_{k}: `{}` vs `{}`",
                from_commutator.render(),
                closed[k].render()
            )));
        }
    }
    Section::new(spec, &closed)
}

/// Anchor action `ρ_u(f) = u^i Q_i^a ∂f/∂x^a` on a base function.
pub fn anchor_apply(alg: &VerifiedAlgebroid, u: &Section, f: &Expression) -> Result<Expression> {
    let spec = alg.spec();
    let f = f.promote(spec.pi_chart())?;
    check_base_expr(spec.pi_chart(), &f)?;
    let mut out = Expression::zero(spec.pi_chart());
    for i in 0..spec.rank() {
        for (a, xa) in spec.base_names().iter().enumerate() {
            let q = spec.anchor_component(i, a);
            if q.is_zero() {
                continue;
            }
            out = out.add(&u.components()[i].mul(q)?.mul(&f.differentiate(xa)?)?)?;
        }
    }
    Ok(out)
}

/// Anchor as a vector field on the base: `ρ(u) = u^i Q_i^a ∂/∂x^a` over ΠA.
pub fn anchor_field(alg: &VerifiedAlgebroid, u: &Section) -> Result<VectorField> {
    let spec = alg.spec();
    let mut vf = VectorField::zero(spec.pi_chart());
    for (a, xa) in spec.base_names().iter().enumerate() {
        let mut comp = Expression::zero(spec.pi_chart());
        for i in 0..spec.rank() {
            comp = comp.add(&u.components()[i].mul(spec.anchor_component(i, a))?)?;
        }
        vf.set(xa, comp)?;
    }
    Ok(vf)
}

/// The anchor as a morphism ΠA → ΠTM of graded super bundles, returned as the
/// pullback substitution `x^a ↦ x^a, dx^a ↦ ξ^i Q_i^a`, usable in `substitute`.
pub fn anchor_morphism(alg: &VerifiedAlgebroid) -> Result<(Chart, Substitution)> {
    let spec = alg.spec();
    let base_refs: Vec<&str> = spec.base_names().iter().map(|s| s.as_str()).collect();
    let d_names: Vec<String> = spec.base_names().iter().map(|b| format!("d{b}")).collect();
    let d_refs: Vec<&str> = d_names.iter().map(|s| s.as_str()).collect();
    let pi_tm = crate::chart::pi_bundle_chart(
        format!("PiT({})", spec.base().name()),
        &base_refs,
        &d_refs,
    )?;
    let mut pairs = Vec::new();
    for (a, dname) in d_names.iter().enumerate() {
        let mut img = Expression::zero(spec.pi_chart());
        for (i, xi) in spec.xi_names().iter().enumerate() {
            let q = spec.anchor_component(i, a);
            if !q.is_zero() {
                img = img.add(&Expression::coord(spec.pi_chart(), xi)?.mul(q)?)?;
            }
        }
        pairs.push((dname.clone(), img));
    }
    let pair_refs: Vec<(&str, Expression)> =
        pairs.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
    let subst = Substitution::new(&pi_tm, spec.pi_chart(), &pair_refs)?;
    Ok((pi_tm, subst))
}

/// Anticotangent chart ΠT*M: base coordinates plus odd weight-one momenta
/// named `<x>s`.
pub fn anticotangent_chart(base: &Chart) -> Result<Chart> {
    let names: Vec<&str> = base.coords().iter().map(|c| c.name.as_str()).collect();
    let momenta: Vec<String> = names.iter().map(|n| format!("{n}s")).collect();
    let momenta_refs: Vec<&str> = momenta.iter().map(|s| s.as_str()).collect();
    crate::chart::pi_bundle_chart(format!("PiT*({})", base.name()), &names, &momenta_refs)
}

/// The canonical Schouten bracket on ΠT*M:
/// `[[X,Y]] = (−1)^{|X|+1} (∂X/∂x*_a)(∂Y/∂x^a) − (∂X/∂x^a)(∂Y/∂x*_a)`.
pub fn schouten_bracket(base_names: &[String], x: &Expression, y: &Expression) -> Result<Expression> {
    let chart = x.chart();
    if y.chart() != chart {
        return Err(Error::ChartMismatch(
            chart.name().into(),
            y.chart().name().into(),
        ));
    }
    for b in base_names {
        if !chart.contains(b) || !chart.contains(&format!("{b}s")) {
            return Err(Error::Domain(format!(
                "`{}` is not an anticotangent chart: missing `{b}`/`{b}s`",
                chart.name()
            )));
        }
    }
    if x.is_zero() || y.is_zero() {
        return Ok(Expression::zero(chart));
    }
    let (px, _) = x.grade_of()?;
    let sign = if px == Parity::Even {
        crate::expr::rat(-1)
    } else {
        crate::expr::rat(1)
    };
    let mut out = Expression::zero(chart);
    for b in base_names {
        let star = format!("{b}s");
        let t1 = x.differentiate(&star)?.mul(&y.differentiate(b)?)?.scale(&sign);
        let t2 = x.differentiate(b)?.mul(&y.differentiate(&star)?)?;
        out = out.add(&t1)?.sub(&t2)?;
    }
    Ok(out)
}

/// A Poisson bivector `P = ½ P^{ab}(x) x*_b x*_a` on ΠT*M; antisymmetry is
/// enforced at construction, the Jacobi identity is checked, not assumed.
#[derive(Clone, Debug)]
pub struct PoissonStructure {
    base_names: Vec<String>,
    chart: Chart,
    /// Canonical keys a < b.
    comps: BTreeMap<(usize, usize), Expression>,
}

impl PoissonStructure {
    pub fn new(base: &Chart, entries: &[((usize, usize), Expression)]) -> Result<PoissonStructure> {
        let chart = anticotangent_chart(base)?;
        let base_names: Vec<String> = base.coords().iter().map(|c| c.name.clone()).collect();
        let mut comps: BTreeMap<(usize, usize), Expression> = BTreeMap::new();
        for ((a, b), e) in entries {
            let e = e.promote(&chart)?;
            check_base_expr(&chart, &e)?;
            if a == b {
                if !e.is_zero() {
                    return Err(Error::Construction(
                        "diagonal Poisson components must vanish".into(),
                    ));
                }
                continue;
            }
            let (key, val) = if a < b { ((*a, *b), e) } else { ((*b, *a), e.neg()) };
            if let Some(prev) = comps.get(&key) {
                if prev != &val {
                    return Err(Error::Construction(format!(
                        "Poisson components P[{a}][{b}] are not antisymmetric"
                    )));
                }
            } else if !val.is_zero() {
                comps.insert(key, val);
            }
        }
        Ok(PoissonStructure {
            base_names,
            chart,
            comps,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn base_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn component(&self, a: usize, b: usize) -> Expression {
        use std::cmp::Ordering::*;
        match a.cmp(&b) {
            Equal => Expression::zero(&self.chart),
            Less => self
                .comps
                .get(&(a, b))
                .cloned()
                .unwrap_or_else(|| Expression::zero(&self.chart)),
            Greater => self
                .comps
                .get(&(b, a))
                .map(|e| e.neg())
                .unwrap_or_else(|| Expression::zero(&self.chart)),
        }
    }

    /// `P = ½ P^{ab} x*_b x*_a` as an even quadratic function on ΠT*M.
    pub fn as_function(&self) -> Result<Expression> {
        let mut p = Expression::zero(&self.chart);
        for a in 0..self.base_names.len() {
            for b in 0..self.base_names.len() {
                let comp = self.component(a, b);
                if comp.is_zero() {
                    continue;
                }
                let xsb = Expression::coord(&self.chart, &format!("{}s", self.base_names[b]))?;
                let xsa = Expression::coord(&self.chart, &format!("{}s", self.base_names[a]))?;
                p = p.add(&comp.mul(&xsb)?.mul(&xsa)?.scale(&crate::expr::frac(1, 2)))?;
            }
        }
        Ok(p)
    }

    /// Residual of the Jacobi identity, `[[P, P]]`.
    pub fn jacobi_residual(&self) -> Result<Expression> {
        let p = self.as_function()?;
        schouten_bracket(&self.base_names, &p, &p)
    }
}

/// The Lichnerowicz–Poisson differential `d_P = [[P, −]]` on ΠT*M, together
/// with the algebroid data read off `P` and `∂P`. Requires `[[P,P]] = 0`.
pub fn cotangent_algebroid(p: &PoissonStructure) -> Result<(AlgebroidSpec, VerifiedAlgebroid)> {
    let jac = p.jacobi_residual()?;
    if !jac.is_zero() {
        return Err(Error::Construction(format!(
            "Poisson structure fails Jacobi: [[P,P]] = {}",
            jac.render()
        )));
    }
    let dim = p.base_names().len();
    let base = p.chart().restrict("base", |c| c.is_base())?;
    let mut anchor_entries = Vec::new();
    let mut structure_entries = Vec::new();
    for i in 0..dim {
        for a in 0..dim {
            // ξ_i = x*_i, Q_i^a = P^{ai}
            let q = p.component(a, i);
            if !q.is_zero() {
                anchor_entries.push(((i, a), q));
            }
        }
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            for k in 0..dim {
                // S_ij^k = −∂P^{ij}/∂x^k
                let s = p
                    .component(i, j)
                    .differentiate(&p.base_names()[k])?
                    .neg();
                if !s.is_zero() {
                    structure_entries.push(((i, j, k), s));
                }
            }
        }
    }
    let momenta: Vec<String> = p.base_names().iter().map(|n| format!("{n}s")).collect();
    let momenta_refs: Vec<&str> = momenta.iter().map(|s| s.as_str()).collect();
    let anchor_refs: Vec<((usize, usize), Expression)> = anchor_entries;
    let structure_refs: Vec<((usize, usize, usize), Expression)> = structure_entries;
    let spec = AlgebroidSpec::new(&base, &momenta_refs, &anchor_refs, &structure_refs)?;

    // d_P must agree with [[P, −]] computed directly from the Schouten bracket.
    let d = spec.build_differential()?;
    let pf = p.as_function()?;
    for c in p.chart().coords() {
        let direct = schouten_bracket(p.base_names(), &pf, &Expression::coord(p.chart(), &c.name)?)?;
        let assembled = d.component(&c.name)?.promote(p.chart())?;
        if direct != assembled {
            return Err(Error::Internal(format!(
                "d_P mismatch on `{}`: [[P,{}]] = `{}` vs assembled `{}`",
                c.name,
                c.name,
                direct.render(),
                assembled.render()
            )));
        }
    }

    let (rep, verified) = check_structure(&spec)?;
    match verified {
        Some(v) => Ok((spec, v)),
        None => Err(Error::Construction(format!(
            "cotangent algebroid of a Jacobi Poisson structure failed verification:\n{}",
            rep.render_text()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::graded_bundle_chart;
    use crate::expr::FnSym;

    fn line() -> Chart {
        graded_bundle_chart("M", &["x"], &[]).unwrap()
    }

    #[test]
    fn tangent_algebroid_on_line() {
        let spec = AlgebroidSpec::tangent(&line()).unwrap();
        let d = spec.build_differential().unwrap();
        // d = ξ ∂_x with ξ named dx
        let c = spec.pi_chart();
        assert_eq!(
            d.component("x").unwrap(),
            Expression::coord(c, "dx").unwrap()
        );
        let (rep, verified) = check_structure(&spec).unwrap();
        assert!(rep.passed());
        assert!(verified.is_some());
    }

    #[test]
    fn abelian_lie_algebra_differential_vanishes() {
        let spec = AlgebroidSpec::lie_algebra(&["xi1", "xi2"], &[]).unwrap();
        assert!(spec.build_differential().unwrap().is_zero());
        let (rep, v) = check_structure(&spec).unwrap();
        assert!(rep.passed() && v.is_some());
    }

    #[test]
    fn solvable_algebra_differential_normal_form() {
        // [e1, e2] = e2: d = −ξ¹ξ² ∂_{ξ²} after normalization
        let spec = AlgebroidSpec::lie_algebra(&["xi1", "xi2"], &[((0, 1, 1), 1)]).unwrap();
        let d = spec.build_differential().unwrap();
        let c = spec.pi_chart();
        let expected = Expression::coord(c, "xi1")
            .unwrap()
            .mul(&Expression::coord(c, "xi2").unwrap())
            .unwrap()
            .neg();
        assert_eq!(d.component("xi2").unwrap(), expected);
        let (rep, v) = check_structure(&spec).unwrap();
        assert!(rep.passed() && v.is_some());
    }

    #[test]
    fn sl2_passes_structure_check() {
        // [h,e] = 2e, [h,f] = −2f, [e,f] = h with basis order (h,e,f)
        let spec = AlgebroidSpec::lie_algebra(
            &["xh", "xe", "xf"],
            &[((0, 1, 1), 2), ((0, 2, 2), -2), ((1, 2, 0), 1)],
        )
        .unwrap();
        let (rep, v) = check_structure(&spec).unwrap();
        assert!(rep.passed(), "{}", rep.render_text());
        assert!(v.is_some());
    }

    #[test]
    fn jacobi_violation_caught_by_both_routes() {
        // S_12^1 = 1, S_13^2 = 1 violates Jacobi (hand-checked residual S_13^2 ≠ 0
        // in the cyclic sum).
        let spec = AlgebroidSpec::lie_algebra(
            &["x1", "x2", "x3"],
            &[((0, 1, 0), 1), ((0, 2, 1), 1)],
        )
        .unwrap();
        let (rep, v) = check_structure(&spec).unwrap();
        assert!(!rep.passed());
        assert!(v.is_none());
        // agreement item must still pass: both routes fail together
        let agree = rep
            .items
            .iter()
            .find(|i| i.label.contains("agree"))
            .unwrap();
        assert_eq!(agree.status, crate::report::Status::Pass);
    }

    #[test]
    fn asymmetric_structure_input_rejected() {
        let pt = Chart::new("pt", 1, vec![]).unwrap();
        let one = Expression::one(&pt);
        let err = AlgebroidSpec::new(
            &pt,
            &["x1", "x2"],
            &[],
            &[((0, 1, 0), one.clone()), ((1, 0, 0), one.clone())],
        );
        assert!(err.is_err());
        // diagonal must vanish
        assert!(AlgebroidSpec::new(&pt, &["x1", "x2"], &[], &[((0, 0, 0), one)]).is_err());
    }

    #[test]
    fn derived_bracket_on_tangent_line() {
        // u = x e, v = e over TM on R: [u,v] = −e (classical [x∂, ∂] = −∂)
        let spec = AlgebroidSpec::tangent(&line()).unwrap();
        let (_, v) = check_structure(&spec).unwrap();
        let alg = v.unwrap();
        let c = spec.pi_chart();
        let x = Expression::coord(c, "x").unwrap();
        let u = Section::new(&spec, &[x]).unwrap();
        let e = Section::new(&spec, &[Expression::one(c)]).unwrap();
        let br = derived_bracket(&alg, &u, &e).unwrap();
        assert_eq!(br.components()[0], Expression::int(c, -1));
    }

    #[test]
    fn anchor_examples() {
        let spec = AlgebroidSpec::tangent(&line()).unwrap();
        let (_, v) = check_structure(&spec).unwrap();
        let alg = v.unwrap();
        let c = spec.pi_chart();
        let u = Section::new(&spec, &[Expression::coord(c, "x").unwrap()]).unwrap();
        let f = Expression::sym(c, FnSym::new("f"));
        let rho = anchor_apply(&alg, &u, &f).unwrap();
        let expect = Expression::coord(c, "x")
            .unwrap()
            .mul(&Expression::sym(c, FnSym::new("f").bump("x")))
            .unwrap();
        assert_eq!(rho, expect);

        // Lie algebra: anchor vanishes
        let g = AlgebroidSpec::lie_algebra(&["x1", "x2"], &[((0, 1, 1), 1)]).unwrap();
        let (_, gv) = check_structure(&g).unwrap();
        let gv = gv.unwrap();
        let gu = Section::new(&g, &[Expression::one(g.pi_chart()), Expression::one(g.pi_chart())])
            .unwrap();
        let konst = Expression::one(g.pi_chart());
        assert!(anchor_apply(&gv, &gu, &konst).unwrap().is_zero());
    }

    #[test]
    fn schouten_on_generators() {
        // [[x^a, x*_b]] = −δ^a_b with the displayed formula.
        let base = graded_bundle_chart("M", &["x1", "x2"], &[]).unwrap();
        let chart = anticotangent_chart(&base).unwrap();
        let names = vec!["x1".to_string(), "x2".to_string()];
        let x1 = Expression::coord(&chart, "x1").unwrap();
        let x1s = Expression::coord(&chart, "x1s").unwrap();
        let x2s = Expression::coord(&chart, "x2s").unwrap();
        assert_eq!(
            schouten_bracket(&names, &x1, &x1s).unwrap(),
            Expression::int(&chart, -1)
        );
        assert!(schouten_bracket(&names, &x1, &x2s).unwrap().is_zero());

        // base functions have vanishing bracket
        let f = Expression::sym(&chart, FnSym::new("f"));
        let g = Expression::sym(&chart, FnSym::new("g"));
        assert!(schouten_bracket(&names, &f, &g).unwrap().is_zero());
    }

    #[test]
    fn so3_poisson_cotangent_algebroid() {
        // P^{ab} = ε^{ab}_c x^c on R³ (the so(3)* linear Poisson structure).
        let base = graded_bundle_chart("M", &["x1", "x2", "x3"], &[]).unwrap();
        let x = |i: usize| Expression::coord(&anticotangent_chart(&base).unwrap(), &format!("x{i}")).unwrap();
        let p = PoissonStructure::new(
            &base,
            &[
                ((0, 1), x(3)),
                ((1, 2), x(1)),
                ((2, 0), x(2)),
            ],
        )
        .unwrap();
        assert!(p.jacobi_residual().unwrap().is_zero());
        let (_, alg) = cotangent_algebroid(&p).unwrap();
        assert!(alg.differential().square().unwrap().is_zero());
    }

    #[test]
    fn constant_symplectic_poisson() {
        let base = graded_bundle_chart("M", &["x1", "x2"], &[]).unwrap();
        let chart = anticotangent_chart(&base).unwrap();
        let p = PoissonStructure::new(&base, &[((0, 1), Expression::one(&chart))]).unwrap();
        let (_, alg) = cotangent_algebroid(&p).unwrap();
        assert!(alg.differential().square().unwrap().is_zero());
        // zero Poisson structure gives the zero differential
        let z = PoissonStructure::new(&base, &[]).unwrap();
        let (_, zalg) = cotangent_algebroid(&z).unwrap();
        assert!(zalg.differential().is_zero());
    }
}
