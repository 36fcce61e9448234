//! Evaluation of a parsed manifest into engine objects.
//!
//! Name errors and malformed declarations are input errors (CLI exit 2);
//! failed mathematical checks (non-invertible transitions, structure-equation
//! residuals, grading violations in Christoffel data) become report content
//! (CLI exit 1).

use std::collections::BTreeMap;

use super::ast::{Ast, Decl, Manifest};
use crate::algebroid::{check_structure, AlgebroidSpec, PoissonStructure, Section, VerifiedAlgebroid};
use crate::chart::{Chart, Coordinate};
use crate::connection::{assemble, total_chart, ChristoffelData, GaugeElement, WeightedConnection};
use crate::error::{Error, Result};
use crate::expr::{Expression, FnSym};
use crate::report::Report;
use crate::subst::TwoWayMap;

#[derive(Clone)]
pub struct BuiltTransition {
    pub from: String,
    pub to: String,
    pub splitting: bool,
    pub map: std::result::Result<TwoWayMap, Report>,
}

#[derive(Clone)]
pub struct BuiltAlgebroid {
    pub spec: AlgebroidSpec,
    pub report: Report,
    pub verified: Option<VerifiedAlgebroid>,
}

pub struct Env {
    pub charts: BTreeMap<String, Chart>,
    pub functions: BTreeMap<String, Vec<String>>,
    pub transitions: BTreeMap<String, BuiltTransition>,
    pub algebroids: BTreeMap<String, BuiltAlgebroid>,
    pub connections: BTreeMap<String, std::result::Result<(String, WeightedConnection), Report>>,
    pub gauges: BTreeMap<String, std::result::Result<(String, GaugeElement), Report>>,
    pub sections: BTreeMap<String, (String, Section)>,
    pub poissons: BTreeMap<String, PoissonStructure>,
    pub runs: Vec<(String, Vec<String>)>,
    pub decl_order: Vec<(String, String)>,
}

fn semantic(span: (usize, usize), msg: impl Into<String>) -> Error {
    Error::Semantic {
        line: span.0,
        col: span.1,
        msg: msg.into(),
    }
}

/// Evaluate an AST expression over a chart; identifiers resolve to chart
/// coordinates first, then to declared function symbols.
pub fn eval_expr(
    ast: &Ast,
    chart: &Chart,
    functions: &BTreeMap<String, Vec<String>>,
) -> Result<Expression> {
    match ast {
        Ast::Int(n) => Ok(Expression::int(chart, *n)),
        Ast::Ident(s) => {
            if chart.contains(s) {
                Expression::coord(chart, s)
            } else if functions.contains_key(s) {
                Ok(Expression::sym(chart, FnSym::new(s.clone())))
            } else {
                Err(Error::UnknownCoordinate(s.clone(), chart.name().into()))
            }
        }
        Ast::Neg(a) => Ok(eval_expr(a, chart, functions)?.neg()),
        Ast::Add(a, b) => eval_expr(a, chart, functions)?.add(&eval_expr(b, chart, functions)?),
        Ast::Sub(a, b) => eval_expr(a, chart, functions)?.sub(&eval_expr(b, chart, functions)?),
        Ast::Mul(a, b) => eval_expr(a, chart, functions)?.mul(&eval_expr(b, chart, functions)?),
        Ast::Div(a, b) => {
            let num = eval_expr(a, chart, functions)?;
            let den = eval_expr(b, chart, functions)?;
            // only division by nonzero rational constants
            let terms = den.terms();
            if terms.len() == 1
                && terms[0].syms.is_empty()
                && terms[0].evens.is_empty()
                && terms[0].odds.is_empty()
            {
                let c = terms[0].coeff.clone();
                Ok(num.scale(&c.recip()))
            } else {
                Err(Error::Domain(format!(
                    "division only by nonzero rational constants, got `{}`",
                    den.render()
                )))
            }
        }
        Ast::Pow(a, n) => eval_expr(a, chart, functions)?.pow(*n),
    }
}

impl Env {
    pub fn build(manifest: &Manifest, spans: &[(usize, usize)]) -> Result<Env> {
        let mut env = Env {
            charts: BTreeMap::new(),
            functions: BTreeMap::new(),
            transitions: BTreeMap::new(),
            algebroids: BTreeMap::new(),
            connections: BTreeMap::new(),
            gauges: BTreeMap::new(),
            sections: BTreeMap::new(),
            poissons: BTreeMap::new(),
            runs: Vec::new(),
            decl_order: Vec::new(),
        };
        let mut names: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for (idx, decl) in manifest.decls.iter().enumerate() {
            let span = spans.get(idx).copied().unwrap_or((0, 0));
            if let Some(name) = decl_name(decl) {
                if let Some(prev) = names.insert(name.to_string(), span) {
                    return Err(semantic(
                        span,
                        format!(
                            "duplicate name `{name}` (first defined at {}:{})",
                            prev.0, prev.1
                        ),
                    ));
                }
            }
            env.eval_decl(decl, span)?;
        }
        Ok(env)
    }

    fn chart(&self, name: &str, span: (usize, usize)) -> Result<Chart> {
        self.charts
            .get(name)
            .cloned()
            .ok_or_else(|| semantic(span, format!("unknown chart `{name}`")))
    }

    fn eval_decl(&mut self, decl: &Decl, span: (usize, usize)) -> Result<()> {
        match decl {
            Decl::Chart { name, coords } => {
                let slots = coords.first().map(|c| c.weight.len()).unwrap_or(1);
                let mut cs = Vec::new();
                for c in coords {
                    if c.weight.len() != slots {
                        return Err(semantic(
                            span,
                            format!(
                                "coordinate `{}` has {} weight slots, chart `{name}` uses {slots}",
                                c.name,
                                c.weight.len()
                            ),
                        ));
                    }
                    let zero = c.weight.iter().all(|&w| w == 0);
                    let coord = if c.odd {
                        let last_only = c.weight[slots - 1] == 1
                            && c.weight[..slots - 1].iter().all(|&w| w == 0);
                        if last_only {
                            Coordinate::algebroid_odd(c.name.clone(), slots)
                        } else {
                            Coordinate::odd_fiber(c.name.clone(), c.weight.clone())
                        }
                    } else if zero {
                        Coordinate::base(c.name.clone(), slots)
                    } else {
                        Coordinate::fiber(c.name.clone(), c.weight.clone())
                    };
                    cs.push(coord);
                }
                let chart = Chart::new(name.clone(), slots, cs)
                    .map_err(|e| semantic(span, e.to_string()))?;
                self.charts.insert(name.clone(), chart);
                self.decl_order.push(("chart".into(), name.clone()));
            }
            Decl::Function { name, args } => {
                self.functions.insert(name.clone(), args.clone());
                self.decl_order.push(("function".into(), name.clone()));
            }
            Decl::Transition {
                name,
                from,
                to,
                forward,
                inverse,
                splitting,
            } => {
                let from_chart = self.chart(from, span)?;
                let to_chart = self.chart(to, span)?;
                let map = self.build_two_way(&from_chart, &to_chart, forward, inverse);
                self.transitions.insert(
                    name.clone(),
                    BuiltTransition {
                        from: from.clone(),
                        to: to.clone(),
                        splitting: *splitting,
                        map,
                    },
                );
                self.decl_order.push((
                    if *splitting { "splitting" } else { "transition" }.into(),
                    name.clone(),
                ));
            }
            Decl::Algebroid {
                name,
                chart,
                rank,
                anchor,
                structure,
            } => {
                let base = self.chart(chart, span)?;
                let xi_names: Vec<String> = (1..=*rank).map(|i| format!("xi{i}")).collect();
                let xi_refs: Vec<&str> = xi_names.iter().map(|s| s.as_str()).collect();
                let mut anchor_entries = Vec::new();
                for ((i, a), ast) in anchor {
                    if *a >= base.len() {
                        return Err(semantic(
                            span,
                            format!("anchor index [{}] exceeds base dimension", a + 1),
                        ));
                    }
                    let e = eval_expr(ast, &base, &self.functions)?;
                    anchor_entries.push(((*i, *a), e));
                }
                let mut structure_entries = Vec::new();
                for ((i, j, k), ast) in structure {
                    let e = eval_expr(ast, &base, &self.functions)?;
                    structure_entries.push(((*i, *j, *k), e));
                }
                let built = match AlgebroidSpec::new(&base, &xi_refs, &anchor_entries, &structure_entries)
                {
                    Ok(spec) => {
                        let (report, verified) = check_structure(&spec)?;
                        BuiltAlgebroid {
                            spec,
                            report,
                            verified,
                        }
                    }
                    Err(e) => {
                        // antisymmetry violations and the like: report content
                        let placeholder =
                            AlgebroidSpec::new(&base, &xi_refs, &[], &[]).map_err(|e2| {
                                semantic(span, format!("algebroid `{name}`: {e2}"))
                            })?;
                        let mut rep = Report::new(format!("algebroid `{name}`"));
                        rep.fail("construction", e.to_string());
                        BuiltAlgebroid {
                            spec: placeholder,
                            report: rep,
                            verified: None,
                        }
                    }
                };
                self.algebroids.insert(name.clone(), built);
                self.decl_order.push(("algebroid".into(), name.clone()));
            }
            Decl::Connection {
                name,
                algebroid,
                chart,
                gammas,
            } => {
                let bundle = self.chart(chart, span)?;
                let alg = self
                    .algebroids
                    .get(algebroid)
                    .ok_or_else(|| semantic(span, format!("unknown algebroid `{algebroid}`")))?
                    .clone();
                let built = match &alg.verified {
                    None => {
                        let mut rep = Report::new(format!("connection `{name}`"));
                        rep.fail(
                            "assembly",
                            format!("algebroid `{algebroid}` is not verified"),
                        );
                        Err(rep)
                    }
                    Some(v) => match self.build_connection(v, &bundle, gammas) {
                        Ok(conn) => Ok((algebroid.clone(), conn)),
                        Err(e) => {
                            let mut rep = Report::new(format!("connection `{name}`"));
                            rep.fail("assembly", e.to_string());
                            Err(rep)
                        }
                    },
                };
                self.connections.insert(name.clone(), built);
                self.decl_order.push(("connection".into(), name.clone()));
            }
            Decl::Gauge {
                name,
                connection,
                forward,
                inverse,
            } => {
                let conn = self
                    .connections
                    .get(connection)
                    .ok_or_else(|| semantic(span, format!("unknown connection `{connection}`")))?;
                let built = match conn {
                    Err(_) => {
                        let mut rep = Report::new(format!("gauge `{name}`"));
                        rep.fail(
                            "construction",
                            format!("target connection `{connection}` failed to build"),
                        );
                        Err(rep)
                    }
                    Ok((_, c)) => match self.build_gauge(c, forward, inverse) {
                        Ok(g) => Ok((connection.clone(), g)),
                        Err(e) => {
                            let mut rep = Report::new(format!("gauge `{name}`"));
                            rep.fail("construction", e.to_string());
                            Err(rep)
                        }
                    },
                };
                self.gauges.insert(name.clone(), built);
                self.decl_order.push(("gauge".into(), name.clone()));
            }
            Decl::Section {
                name,
                algebroid,
                components,
            } => {
                let alg = self
                    .algebroids
                    .get(algebroid)
                    .ok_or_else(|| semantic(span, format!("unknown algebroid `{algebroid}`")))?;
                let rank = alg.spec.rank();
                let mut comps = vec![Expression::zero(alg.spec.pi_chart()); rank];
                for (i, ast) in components {
                    if *i >= rank {
                        return Err(semantic(
                            span,
                            format!("section index [{}] exceeds rank {rank}", i + 1),
                        ));
                    }
                    comps[*i] = eval_expr(ast, alg.spec.pi_chart(), &self.functions)?;
                }
                let section = Section::new(&alg.spec, &comps)
                    .map_err(|e| semantic(span, format!("section `{name}`: {e}")))?;
                self.sections.insert(name.clone(), (algebroid.clone(), section));
                self.decl_order.push(("section".into(), name.clone()));
            }
            Decl::Poisson {
                name,
                chart,
                components,
            } => {
                let base = self.chart(chart, span)?;
                let pchart = crate::algebroid::anticotangent_chart(&base)
                    .map_err(|e| semantic(span, e.to_string()))?;
                let mut entries = Vec::new();
                for ((a, b), ast) in components {
                    let e = eval_expr(ast, &pchart, &self.functions)?;
                    entries.push(((*a, *b), e));
                }
                let p = PoissonStructure::new(&base, &entries)
                    .map_err(|e| semantic(span, format!("poisson `{name}`: {e}")))?;
                self.poissons.insert(name.clone(), p);
                self.decl_order.push(("poisson".into(), name.clone()));
            }
            Decl::Run { command, args } => {
                self.runs.push((command.clone(), args.clone()));
            }
        }
        Ok(())
    }

    fn build_two_way(
        &self,
        from: &Chart,
        to: &Chart,
        forward: &[(String, Ast)],
        inverse: &[(String, Ast)],
    ) -> std::result::Result<TwoWayMap, Report> {
        let mut rep = Report::new(format!("transition {} -> {}", from.name(), to.name()));
        let mut fwd_pairs = Vec::new();
        for (c, ast) in forward {
            match eval_expr(ast, from, &self.functions) {
                Ok(e) => fwd_pairs.push((c.clone(), e)),
                Err(e) => {
                    rep.fail(format!("forward assignment of `{c}`"), e.to_string());
                    return Err(rep);
                }
            }
        }
        let mut inv_pairs = Vec::new();
        for (c, ast) in inverse {
            match eval_expr(ast, to, &self.functions) {
                Ok(e) => inv_pairs.push((c.clone(), e)),
                Err(e) => {
                    rep.fail(format!("inverse assignment of `{c}`"), e.to_string());
                    return Err(rep);
                }
            }
        }
        let fwd_refs: Vec<(&str, Expression)> =
            fwd_pairs.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
        let inv_refs: Vec<(&str, Expression)> =
            inv_pairs.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
        crate::bundles::build_transition(to, from, &fwd_refs, &inv_refs)
    }

    fn build_connection(
        &self,
        alg: &VerifiedAlgebroid,
        bundle: &Chart,
        gammas: &[((usize, String), Ast)],
    ) -> Result<WeightedConnection> {
        let total = total_chart(alg, bundle)?;
        let rank = alg.spec().rank();
        let mut data: ChristoffelData = BTreeMap::new();
        for ((i, coord), ast) in gammas {
            if *i >= rank {
                return Err(Error::Range(format!(
                    "Gamma index [{}] exceeds rank {rank}",
                    i + 1
                )));
            }
            if !bundle.contains(coord) {
                return Err(Error::UnknownCoordinate(coord.clone(), bundle.name().into()));
            }
            let e = eval_expr(ast, &total, &self.functions)?;
            let entry = data
                .entry(coord.clone())
                .or_insert_with(|| vec![Expression::zero(&total); rank]);
            entry[*i] = entry[*i].add(&e)?;
        }
        assemble(alg, bundle, &data)
    }

    fn build_gauge(
        &self,
        conn: &WeightedConnection,
        forward: &[(String, Ast)],
        inverse: &[(String, Ast)],
    ) -> Result<GaugeElement> {
        let total = conn.total();
        let mut fwd_pairs = Vec::new();
        for (c, ast) in forward {
            fwd_pairs.push((c.clone(), eval_expr(ast, total, &self.functions)?));
        }
        let mut inv_pairs = Vec::new();
        for (c, ast) in inverse {
            inv_pairs.push((c.clone(), eval_expr(ast, total, &self.functions)?));
        }
        let fwd_refs: Vec<(&str, Expression)> =
            fwd_pairs.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
        let inv_refs: Vec<(&str, Expression)> =
            inv_pairs.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
        GaugeElement::for_connection(conn, &fwd_refs, &inv_refs)
    }

    /// Splitting wrapper around a declared `splitting` transition.
    pub fn splitting_of(
        &self,
        name: &str,
    ) -> Option<std::result::Result<crate::connection::Splitting, Report>> {
        let t = self.transitions.get(name)?;
        if !t.splitting {
            return None;
        }
        Some(match &t.map {
            Err(rep) => Err(rep.clone()),
            Ok(tw) => {
                let unsplit = self.charts.get(&t.from).cloned();
                let split = self.charts.get(&t.to).cloned();
                match (unsplit, split) {
                    (Some(u), Some(s)) => {
                        crate::connection::Splitting::new(&u, &s, tw.clone()).map_err(|e| {
                            let mut rep = Report::new(format!("splitting `{name}`"));
                            rep.fail("construction", e.to_string());
                            rep
                        })
                    }
                    _ => {
                        let mut rep = Report::new(format!("splitting `{name}`"));
                        rep.fail("construction", "missing charts");
                        Err(rep)
                    }
                }
            }
        })
    }
}

fn decl_name(decl: &Decl) -> Option<&str> {
    match decl {
        Decl::Chart { name, .. }
        | Decl::Function { name, .. }
        | Decl::Transition { name, .. }
        | Decl::Algebroid { name, .. }
        | Decl::Connection { name, .. }
        | Decl::Gauge { name, .. }
        | Decl::Section { name, .. }
        | Decl::Poisson { name, .. } => Some(name),
        Decl::Run { .. } => None,
    }
}

