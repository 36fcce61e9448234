//! Graded-bundle chart machinery: transition validation, homogeneity actions,
//! the truncation tower, and higher tangent lifts.

use crate::chart::{Chart, Coordinate, Parity};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::report::Report;
use crate::subst::{Substitution, TwoWayMap};
use crate::vf::VectorField;

/// Validate a change of graded coordinates: weight and parity preservation
/// (hence the polynomial form in non-zero-weight coordinates) and the
/// two-sided inverse identities on all generators.
pub fn validate_transition(tw: &TwoWayMap) -> Report {
    let mut rep = Report::new(format!(
        "transition {} -> {}",
        tw.unprimed().name(),
        tw.primed().name()
    ));
    // Grading is enforced when the substitutions are built; re-assert here so
    // the report is self-contained.
    for c in tw.primed().coords() {
        let img = tw.forward.image(&c.name).unwrap_or_else(|_| Expression::zero(tw.unprimed()));
        let ok = img.has_grade(c.parity, &c.weight);
        rep.check(
            format!("{} assignment is homogeneous of weight {:?}", c.name, c.weight),
            ok,
        );
    }
    match tw.inverse_residuals() {
        Ok(res) => {
            if res.is_empty() {
                rep.check("two-sided inverse identities", true);
            } else {
                for (label, e) in res {
                    rep.fail(label, e.render());
                }
            }
        }
        Err(e) => {
            rep.fail("two-sided inverse identities", e.to_string());
        }
    }
    rep
}

/// Build a transition from assignment lists, reporting construction problems
/// (incomplete maps, grading violations) as failures instead of erroring.
pub fn build_transition(
    primed: &Chart,
    unprimed: &Chart,
    forward: &[(&str, Expression)],
    inverse: &[(&str, Expression)],
) -> std::result::Result<TwoWayMap, Report> {
    let mut rep = Report::new(format!("transition {} -> {}", unprimed.name(), primed.name()));
    let fwd = match Substitution::new(primed, unprimed, forward) {
        Ok(s) => s,
        Err(e) => {
            rep.fail("forward map", e.to_string());
            return Err(rep);
        }
    };
    let inv = match Substitution::new(unprimed, primed, inverse) {
        Ok(s) => s,
        Err(e) => {
            rep.fail("inverse map", e.to_string());
            return Err(rep);
        }
    };
    match TwoWayMap::new(fwd, inv) {
        Ok(tw) => Ok(tw),
        Err(e) => {
            rep.fail("chart pairing", e.to_string());
            Err(rep)
        }
    }
}

/// Pullback along the homogeneity action of the given grading slot:
/// every coordinate scales as `z ↦ param^{w_slot(z)} · z`. The result lives
/// on the chart extended by the formal scale parameter.
pub fn homogeneity_scale(e: &Expression, slot: usize, param: &str) -> Result<Expression> {
    let chart = e.chart();
    if slot >= chart.slots() {
        return Err(Error::Range(format!(
            "grading slot {slot} out of range for chart `{}` with {} slot(s)",
            chart.name(),
            chart.slots()
        )));
    }
    let ext = chart.with_params(&[(param, false)])?;
    let t = Expression::coord(&ext, param)?;
    let mut assignments = Vec::new();
    for c in chart.coords() {
        let w = c.weight[slot];
        if w == 0 {
            continue;
        }
        let img = t.pow(w)?.mul(&Expression::coord(&ext, &c.name)?)?;
        assignments.push((c.name.clone(), img));
    }
    let pairs: Vec<(&str, Expression)> = assignments
        .iter()
        .map(|(n, e)| (n.as_str(), e.clone()))
        .collect();
    // Scaling is not weight-preserving, so bypass the graded constructor and
    // substitute term by term.
    let mut acc = Expression::zero(&ext);
    for term in e.terms() {
        let mut prod = Expression::constant(&ext, term.coeff.clone());
        for (s, p) in &term.syms {
            prod = prod.mul(&Expression::sym(&ext, s.clone()).pow(*p)?)?;
        }
        for (i, p) in &term.evens {
            let name = &chart.coord(*i).name;
            let img = pairs
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, e)| e.clone())
                .unwrap_or(Expression::coord(&ext, name)?);
            prod = prod.mul(&img.pow(*p)?)?;
        }
        for i in &term.odds {
            let name = &chart.coord(*i).name;
            let img = pairs
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, e)| e.clone())
                .unwrap_or(Expression::coord(&ext, name)?);
            prod = prod.mul(&img)?;
        }
        acc = acc.add(&prod)?;
    }
    Ok(acc)
}

/// Regularity test of the homogeneity structure (vector-bundle criterion):
/// `d/dt|_0 h_t(p) = 0` must force every fibre coordinate of `p` to vanish.
/// Checked symbolically on generators: the derivative at zero keeps exactly
/// the weight-one coordinates, so the action is regular iff no fibre
/// coordinate carries weight >= 2.
pub fn regularity_check(chart: &Chart, slot: usize) -> Result<Report> {
    let mut rep = Report::new(format!("regularity of h on `{}`", chart.name()));
    let ext = chart.with_params(&[("t__reg", false)])?;
    let mut surviving = Vec::new();
    for c in chart.coords() {
        if c.is_base() || c.is_param() {
            continue;
        }
        let scaled = homogeneity_scale(&Expression::coord(chart, &c.name)?, slot, "t__reg")?;
        let d = scaled.differentiate("t__reg")?;
        let at_zero = Substitution::new(&ext, &ext, &[("t__reg", Expression::zero(&ext))])?
            .apply(&d)?;
        if !at_zero.is_zero() {
            surviving.push(c.name.clone());
        }
    }
    let all_fibers: Vec<String> = chart
        .coords()
        .iter()
        .filter(|c| !c.is_base() && !c.is_param())
        .map(|c| c.name.clone())
        .collect();
    let regular = surviving == all_fibers;
    rep.check_with(
        "d/dt|_0 h_t(p) = 0 only at fibre-zero points",
        regular,
        vec![(
            "weight-one coordinates seen by d/dt|_0".into(),
            format!("{surviving:?} of fibre coordinates {all_fibers:?}"),
        )],
    );
    Ok(rep)
}

/// Chart of the truncation `F_l`: drop the coordinates of weight > l in the
/// given slot.
pub fn truncate(chart: &Chart, slot: usize, l: u32) -> Result<Chart> {
    if slot >= chart.slots() {
        return Err(Error::Range(format!("slot {slot} out of range")));
    }
    if l > chart.degree(slot) {
        return Err(Error::Range(format!(
            "truncation degree {l} exceeds chart degree {}",
            chart.degree(slot)
        )));
    }
    chart.restrict(format!("{}|<={}", chart.name(), l), |c| c.weight[slot] <= l)
}

/// Transition induced on a truncation: every kept coordinate's image is a
/// polynomial in kept coordinates, by weight counting.
pub fn truncate_transition(tw: &TwoWayMap, slot: usize, l: u32) -> Result<TwoWayMap> {
    let primed = truncate(tw.primed(), slot, l)?;
    let unprimed = truncate(tw.unprimed(), slot, l)?;
    let mut fwd = Vec::new();
    for c in primed.coords() {
        fwd.push((c.name.clone(), tw.forward.image(&c.name)?.promote(&unprimed)?));
    }
    let mut inv = Vec::new();
    for c in unprimed.coords() {
        inv.push((c.name.clone(), tw.inverse.image(&c.name)?.promote(&primed)?));
    }
    let fwd_pairs: Vec<(&str, Expression)> = fwd.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
    let inv_pairs: Vec<(&str, Expression)> = inv.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
    TwoWayMap::new(
        Substitution::new(&primed, &unprimed, &fwd_pairs)?,
        Substitution::new(&unprimed, &primed, &inv_pairs)?,
    )
}

/// Name of the α-th adapted coordinate over a base coordinate on T^k M.
pub fn lift_name(base: &str, alpha: u32) -> String {
    if alpha == 0 {
        base.to_string()
    } else {
        format!("{base}_{alpha}")
    }
}

/// Adapted chart of the higher tangent bundle T^k M: coordinates
/// `x^{a,(α)}` of weight α for 0 ≤ α ≤ k.
pub fn tkm_chart(name: impl Into<String>, base: &[&str], k: u32) -> Result<Chart> {
    let mut coords: Vec<Coordinate> = base.iter().map(|b| Coordinate::base(*b, 1)).collect();
    for b in base {
        for alpha in 1..=k {
            coords.push(Coordinate::fiber(lift_name(b, alpha), vec![alpha]));
        }
    }
    Chart::new(name, 1, coords)
}

/// The total-derivative vector field on T^k M: raises every `x^{(α)}` with
/// α < k to `x^{(α+1)}`; base-function symbols pick up `x^{(1)}`-contracted
/// formal partials through the base-coordinate derivative.
pub fn total_derivative(chart: &Chart, base: &[&str], k: u32) -> Result<VectorField> {
    let mut vf = VectorField::zero(chart);
    for b in base {
        for alpha in 0..k {
            let up = Expression::coord(chart, &lift_name(b, alpha + 1))?;
            vf.set(&lift_name(b, alpha), up)?;
        }
    }
    Ok(vf)
}

/// The (α)-lift `f^{(α)}` of a base expression to T^k M: α applications of
/// the total derivative to the pullback; `f^{(0)}` is the pullback itself.
pub fn alpha_lift(chart: &Chart, base: &[&str], k: u32, f: &Expression, alpha: u32) -> Result<Expression> {
    if alpha > k {
        return Err(Error::Range(format!("lift order {alpha} exceeds bundle degree {k}")));
    }
    let d = total_derivative(chart, base, k)?;
    let mut acc = f.promote(chart)?;
    for _ in 0..alpha {
        acc = d.apply(&acc)?;
    }
    Ok(acc)
}

/// Transition on T^k M induced by a base change with supplied inverse:
/// `x'^{(α)} = (x'(x))^{(α)}` via the α-lift (iterated chain rule).
pub fn higher_tangent_transition(
    primed_base: &Chart,
    unprimed_base: &Chart,
    base_forward: &[(&str, Expression)],
    base_inverse: &[(&str, Expression)],
    k: u32,
) -> Result<(Chart, Chart, TwoWayMap)> {
    let pnames: Vec<&str> = primed_base.coords().iter().map(|c| c.name.as_str()).collect();
    let unames: Vec<&str> = unprimed_base.coords().iter().map(|c| c.name.as_str()).collect();
    let primed = tkm_chart(format!("T{k}{}", primed_base.name()), &pnames, k)?;
    let unprimed = tkm_chart(format!("T{k}{}", unprimed_base.name()), &unames, k)?;

    let mut fwd: Vec<(String, Expression)> = Vec::new();
    for (name, img) in base_forward {
        for alpha in 0..=k {
            fwd.push((
                lift_name(name, alpha),
                alpha_lift(&unprimed, &unames, k, img, alpha)?,
            ));
        }
    }
    let mut inv: Vec<(String, Expression)> = Vec::new();
    for (name, img) in base_inverse {
        for alpha in 0..=k {
            inv.push((
                lift_name(name, alpha),
                alpha_lift(&primed, &pnames, k, img, alpha)?,
            ));
        }
    }
    let fwd_pairs: Vec<(&str, Expression)> = fwd.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
    let inv_pairs: Vec<(&str, Expression)> = inv.iter().map(|(n, e)| (n.as_str(), e.clone())).collect();
    let tw = TwoWayMap::new(
        Substitution::new(&primed, &unprimed, &fwd_pairs)?,
        Substitution::new(&unprimed, &primed, &inv_pairs)?,
    )?;
    Ok((primed, unprimed, tw))
}

/// Shorthand for charts whose fibre coordinates are all even: a graded-bundle
/// chart check used by the bundle validators.
pub fn check_bundle_chart(chart: &Chart) -> Result<()> {
    for c in chart.coords() {
        if !c.is_base() && !c.is_param() && c.parity == Parity::Odd {
            return Err(Error::Precondition(format!(
                "`{}` is not a graded-bundle chart: fibre coordinate `{}` is odd",
                chart.name(),
                c.name
            )));
        }
    }
    Ok(())
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
    fn degree2_shift_transition_passes() {
        let c = deg2();
        let z = Expression::coord(&c, "z").unwrap();
        let y = Expression::coord(&c, "y").unwrap();
        let g = Expression::sym(&c, FnSym::new("g"));
        let shift = y.pow(2).unwrap().mul(&g).unwrap().scale(&frac(1, 2));
        let tw = build_transition(
            &c,
            &c,
            &[("z", z.add(&shift).unwrap())],
            &[("z", z.sub(&shift).unwrap())],
        )
        .unwrap();
        assert!(validate_transition(&tw).passed());
    }

    #[test]
    fn weight_violation_detected() {
        let c = deg2();
        let z = Expression::coord(&c, "z").unwrap();
        let y = Expression::coord(&c, "y").unwrap();
        let rep = build_transition(&c, &c, &[("z", z.add(&y).unwrap())], &[("z", z.clone())]);
        assert!(rep.is_err());
    }

    #[test]
    fn identity_passes() {
        let c = deg2();
        assert!(validate_transition(&TwoWayMap::identity(&c)).passed());
    }

    #[test]
    fn homogeneity_scaling_examples() {
        let c = deg2();
        let y = Expression::coord(&c, "y").unwrap();
        let z = Expression::coord(&c, "z").unwrap();
        let yz = y.mul(&z).unwrap();
        let scaled = homogeneity_scale(&yz, 0, "t").unwrap();
        let ext = c.with_params(&[("t", false)]).unwrap();
        let t = Expression::coord(&ext, "t").unwrap();
        let expect = t
            .pow(3)
            .unwrap()
            .mul(&yz.promote(&ext).unwrap())
            .unwrap();
        assert_eq!(scaled, expect);

        // base functions are weight zero
        let f = Expression::sym(&c, FnSym::new("f"));
        assert_eq!(
            homogeneity_scale(&f, 0, "t").unwrap(),
            f.promote(&ext).unwrap()
        );

        // termwise scaling
        let sum = y.add(&z).unwrap();
        let expect = t
            .mul(&y.promote(&ext).unwrap())
            .unwrap()
            .add(&t.pow(2).unwrap().mul(&z.promote(&ext).unwrap()).unwrap())
            .unwrap();
        assert_eq!(homogeneity_scale(&sum, 0, "t").unwrap(), expect);
    }

    #[test]
    fn action_composition_law() {
        // h_t* ∘ h_s* = h_{ts}* on generators.
        let c = deg2();
        for name in ["x", "y", "z"] {
            let e = Expression::coord(&c, name).unwrap();
            let once = homogeneity_scale(&e, 0, "t").unwrap();
            let twice = homogeneity_scale(&once, 0, "s").unwrap();
            let u = homogeneity_scale(&e, 0, "u").unwrap();
            let ext = u.chart().clone();
            let big = twice.chart().clone();
            let ts = Expression::coord(&big, "t")
                .unwrap()
                .mul(&Expression::coord(&big, "s").unwrap())
                .unwrap();
            let subst = Substitution::new(&ext, &big, &[("u", ts)]).unwrap();
            assert_eq!(subst.apply(&u).unwrap(), twice);
        }
    }

    #[test]
    fn regularity_detects_higher_weights() {
        let deg1 = graded_bundle_chart("E", &["x"], &[("y", 1)]).unwrap();
        assert!(regularity_check(&deg1, 0).unwrap().passed());
        assert!(!regularity_check(&deg2(), 0).unwrap().passed());
    }

    #[test]
    fn truncation_tower() {
        let c = deg2();
        let t1 = truncate(&c, 0, 1).unwrap();
        assert!(t1.contains("y") && !t1.contains("z"));
        assert_eq!(truncate(&c, 0, 2).unwrap(), c);
        assert!(truncate(&c, 0, 3).is_err());

        // induced transition of the z' = z + ½y²g example at l = 1 drops to y' = y
        let z = Expression::coord(&c, "z").unwrap();
        let y = Expression::coord(&c, "y").unwrap();
        let g = Expression::sym(&c, FnSym::new("g"));
        let shift = y.pow(2).unwrap().mul(&g).unwrap().scale(&frac(1, 2));
        let tw = build_transition(
            &c,
            &c,
            &[("z", z.add(&shift).unwrap())],
            &[("z", z.sub(&shift).unwrap())],
        )
        .unwrap();
        let t = truncate_transition(&tw, 0, 1).unwrap();
        assert!(validate_transition(&t).passed());
        assert!(t.forward.is_identity());
    }

    #[test]
    fn alpha_lift_examples() {
        let base = graded_bundle_chart("M", &["x"], &[]).unwrap();
        let k = 2;
        let chart = tkm_chart("T2M", &["x"], k).unwrap();
        let f = Expression::sym(&base, FnSym::new("f"));

        let f1 = alpha_lift(&chart, &["x"], k, &f, 1).unwrap();
        let x1 = Expression::coord(&chart, "x_1").unwrap();
        let fx = Expression::sym(&chart, FnSym::new("f").bump("x"));
        assert_eq!(f1, x1.mul(&fx).unwrap());

        // f^{(2)} = x^{(2)} f' + (x^{(1)})² f''  -- frozen from iterating the
        // total derivative by hand.
        let f2 = alpha_lift(&chart, &["x"], k, &f, 2).unwrap();
        let x2 = Expression::coord(&chart, "x_2").unwrap();
        let fxx = Expression::sym(&chart, FnSym::new("f").bump("x").bump("x"));
        let expect = x2
            .mul(&fx)
            .unwrap()
            .add(&x1.pow(2).unwrap().mul(&fxx).unwrap())
            .unwrap();
        assert_eq!(f2, expect);

        // constants die
        let one = Expression::one(&base);
        assert!(alpha_lift(&chart, &["x"], k, &one, 1).unwrap().is_zero());
        assert!(alpha_lift(&chart, &["x"], k, &f, 3).is_err());
    }

    #[test]
    fn lifts_are_derivations_over_total_derivative() {
        // (fg)^{(1)} = f^{(1)} g^{(0)} + f^{(0)} g^{(1)}
        let base = graded_bundle_chart("M", &["x"], &[]).unwrap();
        let chart = tkm_chart("T1M", &["x"], 1).unwrap();
        let f = Expression::sym(&base, FnSym::new("f"));
        let g = Expression::sym(&base, FnSym::new("g"));
        let fg = f.mul(&g).unwrap();
        let lhs = alpha_lift(&chart, &["x"], 1, &fg, 1).unwrap();
        let rhs = alpha_lift(&chart, &["x"], 1, &f, 1)
            .unwrap()
            .mul(&alpha_lift(&chart, &["x"], 1, &g, 0).unwrap())
            .unwrap()
            .add(
                &alpha_lift(&chart, &["x"], 1, &f, 0)
                    .unwrap()
                    .mul(&alpha_lift(&chart, &["x"], 1, &g, 1).unwrap())
                    .unwrap(),
            )
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn faa_di_bruno_degree2() {
        // 1-dim x' = φ(x): x'^{(2)} = x^{(2)} φ' + (x^{(1)})² φ''.
        // Concrete polynomial instance φ(x) = x + x³ so the inverse exists…
        // actually use affine φ(x) = 2x + 1 with exact inverse.
        let base = graded_bundle_chart("M", &["x"], &[]).unwrap();
        let x = Expression::coord(&base, "x").unwrap();
        let phi = x.scale(&frac(2, 1)).add(&Expression::one(&base)).unwrap();
        let psi = x
            .sub(&Expression::one(&base))
            .unwrap()
            .scale(&frac(1, 2));
        let (_, unprimed, tw) = higher_tangent_transition(
            &base,
            &base,
            &[("x", phi)],
            &[("x", psi)],
            2,
        )
        .unwrap();
        assert!(validate_transition(&tw).passed());
        let img = tw.forward.image("x_2").unwrap();
        let x2 = Expression::coord(&unprimed, "x_2").unwrap();
        assert_eq!(img, x2.scale(&frac(2, 1)));
    }
}
