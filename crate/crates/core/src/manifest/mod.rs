//! Manifest DSL: parser, canonical printer, evaluator and command runner.
//!
//! Command semantics (`graded-conn <manifest> <command>`):
//!
//! * `validate`   — validate every declaration: transitions and splittings
//!   (grading + two-sided inverses), algebroid structure equations against
//!   the `d_A² = 0` oracle, Poisson Jacobi identities, connection assembly,
//!   gauge elements.
//! * `curvature`  — for every connection, print `½[∇,∇]` in canonical form
//!   and cross-check it against the closed Christoffel formula.
//! * `gauge`      — apply every declared gauge element to its connection,
//!   re-validate, and check flatness is preserved.
//! * `lift`       — horizontal lifts of every declared section along every
//!   connection over the same algebroid, with the module-linearity and
//!   anchor-projectability checks.
//! * `act`        — quasi-actions of the same pairs: grading preservation of
//!   every shift and the bracket/composition law on flat connections.
//! * `project`    — truncation projections of every single-graded connection
//!   to each lower degree, checking flatness persists for flat inputs.
//! * `report`     — `validate` plus every `run` statement in the manifest,
//!   in declaration order.
//!
//! Exit codes: 0 all checks pass, 1 a mathematical check failed (residual
//! printed), 2 input error (parse/semantic).

pub mod ast;
pub mod eval;
pub mod lexer;
pub mod parser;

pub use ast::{Ast, Decl, Manifest};
pub use eval::Env;
pub use parser::{parse_manifest, parse_manifest_with_spans};

use crate::algebroid::derived_bracket;
use crate::connection::{
    christoffel_curvature, curvature, gauge_transform, horizontal_lift, is_flat,
    project_truncation, quasi_action,
};
use crate::error::{Error, Result};
use crate::expr::{Expression, FnSym};
use crate::report::Report;

/// Execute a command against a manifest. Returns the report and the exit
/// code contract (0 pass / 1 math failure); input errors surface as `Err`.
pub fn execute(text: &str, command: &str, args: &[String]) -> Result<Report> {
    let (manifest, spans) = parse_manifest_with_spans(text)?;
    let env = Env::build(&manifest, &spans)?;
    run_command(&env, command, args)
}

pub fn run_command(env: &Env, command: &str, args: &[String]) -> Result<Report> {
    match command {
        "validate" => cmd_validate(env),
        "curvature" => cmd_curvature(env, args),
        "gauge" => cmd_gauge(env, args),
        "lift" => cmd_lift(env, args),
        "act" => cmd_act(env, args),
        "project" => cmd_project(env, args),
        "report" => cmd_report(env),
        other => Err(Error::Domain(format!(
            "unknown command `{other}`; expected validate, curvature, gauge, lift, act, project or report"
        ))),
    }
}

fn cmd_validate(env: &Env) -> Result<Report> {
    let mut rep = Report::new("validate");
    for (kind, name) in &env.decl_order {
        match kind.as_str() {
            "transition" | "splitting" => {
                let t = &env.transitions[name];
                match &t.map {
                    Err(r) => {
                        rep.merge(r.clone());
                    }
                    Ok(tw) => {
                        let mut r = crate::bundles::validate_transition(tw);
                        r.title = format!("{kind} `{name}`");
                        if *kind == "splitting" {
                            if let Some(Err(r2)) = env.splitting_of(name) {
                                rep.merge(r2);
                            } else {
                                r.check("acts as identity on the base", true);
                            }
                        }
                        rep.merge(r);
                    }
                }
            }
            "algebroid" => {
                let a = &env.algebroids[name];
                let mut r = a.report.clone();
                r.title = format!("algebroid `{name}`");
                rep.merge(r);
            }
            "connection" => match &env.connections[name] {
                Err(r) => {
                    rep.merge(r.clone());
                }
                Ok(_) => {
                    rep.check(
                        format!("connection `{name}`: odd, bi-weight (0,…,0,1), projects to d_A"),
                        true,
                    );
                }
            },
            "gauge" => match &env.gauges[name] {
                Err(r) => {
                    rep.merge(r.clone());
                }
                Ok(_) => {
                    rep.check(format!("gauge `{name}`: fixes ΠA, two-sided inverse"), true);
                }
            },
            "poisson" => {
                let p = &env.poissons[name];
                let jac = p.jacobi_residual()?;
                if jac.is_zero() {
                    rep.check(format!("poisson `{name}`: [[P,P]] = 0"), true);
                } else {
                    rep.fail(format!("poisson `{name}`: [[P,P]] = 0"), jac.render());
                }
            }
            _ => {}
        }
    }
    Ok(rep)
}

fn select<'a>(
    all: impl Iterator<Item = &'a String>,
    args: &[String],
) -> Vec<String> {
    if args.is_empty() {
        all.cloned().collect()
    } else {
        args.to_vec()
    }
}

fn cmd_curvature(env: &Env, args: &[String]) -> Result<Report> {
    let mut rep = Report::new("curvature");
    let names = select(env.connections.keys(), args);
    for name in names {
        match env.connections.get(&name) {
            None => return Err(Error::Domain(format!("unknown connection `{name}`"))),
            Some(Err(r)) => {
                rep.merge(r.clone());
            }
            Some(Ok((_, conn))) => {
                let curv = curvature(conn)?;
                let chris = christoffel_curvature(conn)?;
                let agree = curv == chris;
                rep.check_with(
                    format!("connection `{name}`: ½[∇,∇] equals the Christoffel formula"),
                    agree,
                    vec![
                        ("curvature".into(), curv.render()),
                        ("flat".into(), format!("{}", curv.is_zero())),
                    ],
                );
            }
        }
    }
    Ok(rep)
}

fn cmd_gauge(env: &Env, args: &[String]) -> Result<Report> {
    let mut rep = Report::new("gauge");
    let names = select(env.gauges.keys(), args);
    for name in names {
        match env.gauges.get(&name) {
            None => return Err(Error::Domain(format!("unknown gauge element `{name}`"))),
            Some(Err(r)) => {
                rep.merge(r.clone());
            }
            Some(Ok((conn_name, g))) => {
                let conn = match &env.connections[conn_name] {
                    Ok((_, c)) => c,
                    Err(r) => {
                        rep.merge(r.clone());
                        continue;
                    }
                };
                let moved = gauge_transform(conn, g)?;
                let flat_before = is_flat(conn)?;
                let flat_after = is_flat(&moved)?;
                let mut details = Vec::new();
                for fiber in moved.fiber_names() {
                    for (i, _) in moved.algebroid().spec().xi_names().iter().enumerate() {
                        let v = moved.gamma(&fiber, i)?;
                        if !v.is_zero() {
                            details.push((format!("Gamma[{}][{}]", i + 1, fiber), v.render()));
                        }
                    }
                }
                rep.check_with(
                    format!("gauge `{name}` on `{conn_name}`: transformed connection validates"),
                    true,
                    details,
                );
                rep.check(
                    format!("gauge `{name}`: flatness invariant ({flat_before} -> {flat_after})"),
                    flat_before == flat_after,
                );
            }
        }
    }
    Ok(rep)
}

fn pairs_for(env: &Env, args: &[String]) -> Result<Vec<(String, String)>> {
    if args.len() == 2 {
        return Ok(vec![(args[0].clone(), args[1].clone())]);
    }
    if !args.is_empty() {
        return Err(Error::Domain(
            "expected zero arguments or `CONNECTION SECTION`".into(),
        ));
    }
    let mut out = Vec::new();
    for (cname, built) in &env.connections {
        if let Ok((alg_name, _)) = built {
            for (sname, (s_alg, _)) in &env.sections {
                if s_alg == alg_name {
                    out.push((cname.clone(), sname.clone()));
                }
            }
        }
    }
    Ok(out)
}

fn cmd_lift(env: &Env, args: &[String]) -> Result<Report> {
    let mut rep = Report::new("lift");
    for (cname, sname) in pairs_for(env, args)? {
        let conn = match env.connections.get(&cname) {
            Some(Ok((_, c))) => c,
            Some(Err(r)) => {
                rep.merge(r.clone());
                continue;
            }
            None => return Err(Error::Domain(format!("unknown connection `{cname}`"))),
        };
        let (_, section) = env
            .sections
            .get(&sname)
            .ok_or_else(|| Error::Domain(format!("unknown section `{sname}`")))?;
        let h = horizontal_lift(conn, section)?;
        rep.check_with(
            format!("H_{sname} along `{cname}` is weight zero"),
            h.is_zero() || h.has_weight(&vec![0; conn.bundle().slots()]),
            vec![("lift".into(), h.render())],
        );

        // module linearity over an opaque base function
        let spec = conn.algebroid().spec();
        let f = Expression::sym(spec.pi_chart(), FnSym::new("f__lift"));
        let mut scaled = Vec::new();
        for comp in section.components() {
            scaled.push(comp.mul(&f)?);
        }
        let fu = crate::algebroid::Section::new(spec, &scaled)?;
        let hfu = horizontal_lift(conn, &fu)?;
        let f_bundle = Expression::sym(conn.bundle(), FnSym::new("f__lift"));
        rep.check(
            format!("H(f·{sname}) = f·H({sname}) on `{cname}`"),
            hfu == h.mul_fn(&f_bundle)?,
        );

        // anchor projectability on an opaque base function
        let g = Expression::sym(conn.bundle(), FnSym::new("g__lift"));
        let lhs = h.apply(&g)?;
        let rho = crate::algebroid::anchor_apply(
            conn.algebroid(),
            section,
            &Expression::sym(spec.pi_chart(), FnSym::new("g__lift")),
        )?;
        rep.check(
            format!("H({sname})(τ*g) = τ*(ρ_{sname} g) on `{cname}`"),
            lhs == rho.promote(conn.bundle())?,
        );
    }
    Ok(rep)
}

fn cmd_act(env: &Env, args: &[String]) -> Result<Report> {
    let mut rep = Report::new("act");
    for (cname, sname) in pairs_for(env, args)? {
        let conn = match env.connections.get(&cname) {
            Some(Ok((_, c))) => c,
            Some(Err(r)) => {
                rep.merge(r.clone());
                continue;
            }
            None => return Err(Error::Domain(format!("unknown connection `{cname}`"))),
        };
        let (_, section) = env
            .sections
            .get(&sname)
            .ok_or_else(|| Error::Domain(format!("unknown section `{sname}`")))?;
        let act = quasi_action(conn, section, "eps")?;
        let mut details = Vec::new();
        for c in conn.bundle().coords() {
            details.push((c.name.clone(), act.image(&c.name)?.render()));
        }
        // grading preservation is enforced by the substitution constructor
        rep.check_with(
            format!("quasi-action of `{sname}` on `{cname}` preserves the grading"),
            true,
            details,
        );
    }
    Ok(rep)
}

fn cmd_project(env: &Env, args: &[String]) -> Result<Report> {
    let mut rep = Report::new("project");
    let names = select(env.connections.keys(), args);
    for name in names {
        match env.connections.get(&name) {
            None => return Err(Error::Domain(format!("unknown connection `{name}`"))),
            Some(Err(r)) => {
                rep.merge(r.clone());
            }
            Some(Ok((_, conn))) => {
                if conn.bundle().slots() != 1 {
                    continue;
                }
                let degree = conn.bundle().degree(0);
                let flat = is_flat(conn)?;
                for l in (1..=degree.saturating_sub(1)).rev() {
                    let projected = project_truncation(conn, l)?;
                    rep.check(
                        format!("`{name}` projects to a valid connection on F_{l}"),
                        true,
                    );
                    if flat {
                        rep.check(
                            format!("flat `{name}` stays flat on F_{l}"),
                            is_flat(&projected)?,
                        );
                    }
                }
            }
        }
    }
    Ok(rep)
}

fn cmd_report(env: &Env) -> Result<Report> {
    let mut rep = cmd_validate(env)?;
    rep.title = "report".into();
    for (cmd, args) in &env.runs {
        let r = run_command(env, cmd, args)?;
        rep.merge(r);
    }
    // keep one bracket identity visible in the full report: derived bracket
    // closure on every declared section pair
    let mut pairs: Vec<(&String, &String, &String)> = Vec::new();
    let sections: Vec<(&String, &(String, crate::algebroid::Section))> =
        env.sections.iter().collect();
    for (i, (n1, (a1, _))) in sections.iter().enumerate() {
        for (n2, (a2, _)) in sections.iter().skip(i) {
            if a1 == a2 {
                pairs.push((n1, n2, a1));
            }
        }
    }
    for (n1, n2, alg_name) in pairs {
        if let Some(built) = env.algebroids.get(alg_name) {
            if let Some(v) = &built.verified {
                let s1 = &env.sections[n1].1;
                let s2 = &env.sections[n2].1;
                let br = derived_bracket(v, s1, s2)?;
                let mut parts = Vec::new();
                for (i, c) in br.components().iter().enumerate() {
                    if !c.is_zero() {
                        parts.push(format!("u[{}] = {}", i + 1, c.render()));
                    }
                }
                rep.check_with(
                    format!("derived bracket [{n1},{n2}] on `{alg_name}`"),
                    true,
                    vec![("components".into(), parts.join("; "))],
                );
            }
        }
    }
    Ok(rep)
}
