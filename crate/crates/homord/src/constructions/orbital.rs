use std::collections::BTreeMap;

use serde_json::json;

use super::{
    absorb, certify_inside, chain_json, domain, fresh_name, image, next_target, power, pull_type, push_type,
    realize1, Built, View, Want,
};
use crate::automorphism::{AutoId, Dir, Lab, Letter, OrderProfile, Tag};
use crate::certificate::{Assertion, ConstructionRun, Recorder};
use crate::error::{Error, Result};
use crate::structure::Id;
use crate::types::TypeDescriptor;

/// Where and how deep a single-order construction runs.
#[derive(Clone, Debug)]
pub(crate) struct Job {
    pub view: View,
    pub order: usize,
    /// Orders on which the chain must ascend.
    pub chain_orders: Vec<usize>,
    pub depth: usize,
    pub phase: String,
}

/// A built map with its word and the chain `a_i`, `w a_i = a_{i+1}`.
#[derive(Clone, Debug)]
pub(crate) struct Orbit {
    pub map: AutoId,
    pub word: AutoId,
    pub chain: BTreeMap<i64, Id>,
    pub covered: Vec<Id>,
    /// Points witnessing where the word moves up and down, when it has two orbitals.
    pub witnesses: Option<(Id, Id)>,
}

impl Orbit {
    pub fn summary(&self, lab: &Lab) -> serde_json::Value {
        json!({
            "map": lab.name(self.map),
            "word": lab.display(self.word),
            "chain": chain_json(&self.chain),
            "covered": self.covered,
        })
    }
}

fn target(lab: &mut Lab, h: AutoId, window: Option<&[usize]>) -> Result<Option<Id>> {
    if let Some(x) = next_target(lab, h, window) {
        return Ok(Some(x));
    }
    if lab.universe().is_empty() {
        let n = lab.universe().num_orders();
        return Ok(Some(lab.universe_mut().insert_between(&TypeDescriptor::trivial(n), &[])?));
    }
    Ok(None)
}

fn oriented_tag(lab: &mut Lab, g: AutoId, view: &View, o: usize) -> Result<Tag> {
    Ok(view.tag(lab.profile(g, o)?.tag, o))
}

fn trivial(lab: &Lab) -> TypeDescriptor {
    TypeDescriptor::trivial(lab.universe().num_orders())
}

/// Builds `h` so that `g h^-1 g h` has a single orbital on `job.order`, for
/// `g` moving every point up there.
pub(crate) fn case1(lab: &mut Lab, rec: &mut Recorder, g: AutoId, job: &Job) -> Result<Orbit> {
    let (o, view) = (job.order, &job.view);
    let t = oriented_tag(lab, g, view, o)?;
    if !matches!(t, Tag::StrictlyUp | Tag::CofinallyUp | Tag::SinglePlusOrbital) {
        return Err(Error::ProfileMismatch(format!("{t} on order {} is not positive", o + 1)));
    }
    let h = lab.partial(fresh_name(lab, "h"), &[])?;
    let w = lab.word(fresh_name(lab, "w"), vec![Letter::new(g, 1), Letter::conj(g, 1, h, -1)])?;
    let mut chain: BTreeMap<i64, Id> = BTreeMap::new();
    let mut covered = Vec::new();
    let up = || Want::default().moving(g, o, Dir::Up);
    for n in 0..job.depth as i64 {
        let x = target(lab, h, None)?.expect("universe is nonempty");
        if n == 0 {
            let a0 = realize1(lab, view, &trivial(lab), up().below(o, [x]))?;
            chain.insert(0, a0);
        }
        let an = chain[&n];
        let bn = realize1(lab, view, &push_type(lab, h, &[an])?, up().above(o, [x]))?;
        lab.set_pair(h, an, bn)?;
        let gbn = lab.apply(g, bn)?;
        let cn = realize1(lab, view, &pull_type(lab, h, &[gbn])?, up().above(o, [x]))?;
        lab.set_pair(h, cn, gbn)?;
        let an1 = lab.apply(g, cn)?;
        chain.insert(n + 1, an1);
        let am = chain[&-n];
        let gam = lab.apply_inverse(g, am)?;
        let bm = realize1(lab, view, &push_type(lab, h, &[gam])?, up().below(o, [x]))?;
        lab.set_pair(h, gam, bm)?;
        let gbm = lab.apply_inverse(g, bm)?;
        let am1 = realize1(lab, view, &pull_type(lab, h, &[gbm])?, up().below(o, [x]))?;
        lab.set_pair(h, am1, gbm)?;
        chain.insert(-n - 1, am1);
        let gam1 = lab.apply(g, am1)?;
        absorb(lab, h, x)?;
        covered.push(x);

        rec.image(lab, format!("w a{n} = a{}", n + 1), w, an, an1);
        rec.image(lab, format!("w a{} = a{}", -n - 1, -n), w, am1, am);
        for j in &job.chain_orders {
            view.less(rec, format!("a{n} < a{} on order {}", n + 1, j + 1), an, *j, an1);
            view.less(rec, format!("a{} < a{} on order {}", -n - 1, -n, j + 1), am1, *j, am);
        }
        for (label, a, b) in [("g b", bn, gbn), ("g c", cn, an1), ("g b-", gbm, bm), ("g a-", am1, gam1)] {
            rec.image(lab, format!("{label}: {a} -> {b}"), g, a, b);
            view.less(rec, format!("{label} moves up"), a, o, b);
        }
        rec.check("h is a partial isomorphism", Assertion::PartialIso { map: lab.name(h).to_string() });
        let (d, i) = (domain(lab, h), image(lab, h));
        view.extreme(rec, "min A", am1, &d, o, false);
        view.extreme(rec, "max A", cn, &d, o, true);
        view.extreme(rec, "min B", gbm, &i, o, false);
        view.extreme(rec, "max B", gbn, &i, o, true);
        certify_inside(rec, lab, h, &[o], x);
        rec.close(lab, &job.phase, n);
    }
    Ok(Orbit { map: h, word: w, chain, covered, witnesses: None })
}

/// Builds `h` so that `g h^-1 g h` has an up orbital unbounded above and a
/// down orbital unbounded below, for `g` moving up above and down below.
pub(crate) fn two_orbitals(lab: &mut Lab, rec: &mut Recorder, g: AutoId, job: &Job) -> Result<Orbit> {
    let (o, view) = (job.order, &job.view);
    let t = oriented_tag(lab, g, view, o)?;
    if t != Tag::UpAboveDownBelow {
        return Err(Error::ProfileMismatch(format!("{t} on order {} does not move up above and down below", o + 1)));
    }
    let h = lab.partial(fresh_name(lab, "h"), &[])?;
    let w = lab.word(fresh_name(lab, "w"), vec![Letter::new(g, 1), Letter::conj(g, 1, h, -1)])?;
    let (mut plus, mut minus): (Vec<Id>, Vec<Id>) = (vec![], vec![]);
    let mut covered = Vec::new();
    let up = || Want::default().moving(g, o, Dir::Up);
    let down = || Want::default().moving(g, o, Dir::Down);
    for n in 0..job.depth {
        let x = target(lab, h, None)?.expect("universe is nonempty");
        if n == 0 {
            plus.push(realize1(lab, view, &trivial(lab), Want::default().above(o, [x]))?);
            minus.push(realize1(lab, view, &trivial(lab), Want::default().below(o, [x]))?);
        }
        let an = plus[n];
        let bn = realize1(lab, view, &push_type(lab, h, &[an])?, up().above(o, [x]))?;
        lab.set_pair(h, an, bn)?;
        let gbn = lab.apply(g, bn)?;
        let cn = realize1(lab, view, &pull_type(lab, h, &[gbn])?, up().above(o, [x]))?;
        lab.set_pair(h, cn, gbn)?;
        let an1 = lab.apply(g, cn)?;
        plus.push(an1);
        let pn = minus[n];
        let qn = realize1(lab, view, &push_type(lab, h, &[pn])?, down().below(o, [x]))?;
        lab.set_pair(h, pn, qn)?;
        let gqn = lab.apply(g, qn)?;
        let rn = realize1(lab, view, &pull_type(lab, h, &[gqn])?, down().below(o, [x]))?;
        lab.set_pair(h, rn, gqn)?;
        let pn1 = lab.apply(g, rn)?;
        minus.push(pn1);
        absorb(lab, h, x)?;
        covered.push(x);

        rec.image(lab, format!("w a{n} = a{}", n + 1), w, an, an1);
        view.less(rec, format!("a{n} < a{}", n + 1), an, o, an1);
        rec.image(lab, format!("w a'{n} = a'{}", n + 1), w, pn, pn1);
        view.less(rec, format!("a'{} < a'{n}", n + 1), pn1, o, pn);
        view.less(rec, "a' below x", pn1, o, x);
        view.less(rec, "x below a", x, o, an1);
        for (label, a, b, upward) in [("g b", bn, gbn, true), ("g c", cn, an1, true), ("g b'", qn, gqn, false), ("g c'", rn, pn1, false)] {
            rec.image(lab, format!("{label}: {a} -> {b}"), g, a, b);
            if upward {
                view.less(rec, format!("{label} moves up"), a, o, b);
            } else {
                view.less(rec, format!("{label} moves down"), b, o, a);
            }
        }
        rec.check("h is a partial isomorphism", Assertion::PartialIso { map: lab.name(h).to_string() });
        let (d, i) = (domain(lab, h), image(lab, h));
        view.extreme(rec, "min A", rn, &d, o, false);
        view.extreme(rec, "max A", cn, &d, o, true);
        view.extreme(rec, "min B", gqn, &i, o, false);
        view.extreme(rec, "max B", gbn, &i, o, true);
        certify_inside(rec, lab, h, &[o], x);
        rec.close(lab, &job.phase, n as i64);
    }
    let witnesses = (!plus.is_empty()).then(|| (plus[0], minus[0]));
    if let Some((y, z)) = witnesses {
        let p = OrderProfile::threshold(Tag::UpAboveDownBelow, y, z);
        lab.declare(w, o, if view.rev[o] { p.reversed() } else { p });
    }
    let chain = plus.iter().enumerate().map(|(i, x)| (i as i64, *x)).collect();
    Ok(Orbit { map: h, word: w, chain, covered, witnesses })
}

/// Builds `k` so that `[g, k]` has a single orbital on `job.order`, for `g`
/// moving every materialized point above `y` up and every one below `z` down.
pub(crate) fn commutator(lab: &mut Lab, rec: &mut Recorder, g: AutoId, y: Id, z: Id, job: &Job) -> Result<Orbit> {
    let (o, view) = (job.order, &job.view);
    let ids: Vec<Id> = lab.universe().ids().collect();
    for x in ids {
        let Some(gx) = lab.peek(g, x) else { continue };
        let u = lab.universe();
        if (view.lt(u, y, o, x) && !view.lt(u, x, o, gx)) || (view.lt(u, x, o, z) && !view.lt(u, gx, o, x)) {
            return Err(Error::HypothesisUnmet(format!("{} sends {x} to {gx} against its witnesses", lab.label(g))));
        }
    }
    let k = lab.partial(fresh_name(lab, "k"), &[])?;
    let w = lab.word(fresh_name(lab, "w"), vec![Letter::new(g, -1), Letter::conj(g, 1, k, -1)])?;
    let (mut a, mut b, mut c): (BTreeMap<i64, Id>, BTreeMap<i64, Id>, BTreeMap<i64, Id>) = Default::default();
    let mut covered = Vec::new();
    let up = || Want::default().moving(g, o, Dir::Up);
    let down = || Want::default().moving(g, o, Dir::Down);
    let window = [o];
    for n in 0..job.depth as i64 {
        let x = if n == 0 { target(lab, k, None)? } else { target(lab, k, Some(&window))? };
        let xs: Vec<Id> = x.into_iter().collect();
        if n == 0 {
            let a0 = realize1(lab, view, &trivial(lab), down().below(o, [z]).below(o, xs.clone()))?;
            a.insert(0, a0);
            let b0 = realize1(lab, view, &push_type(lab, k, &[a0])?, up().above(o, [y]).above(o, xs.clone()))?;
            lab.set_pair(k, a0, b0)?;
            b.insert(0, b0);
        } else {
            let an = a[&n];
            let bn = realize1(lab, view, &push_type(lab, k, &[an])?, up())?;
            lab.set_pair(k, an, bn)?;
            b.insert(n, bn);
        }
        let bn = b[&n];
        let gbn = lab.apply(g, bn)?;
        let mut low = xs.clone();
        if n == 0 {
            low.push(lab.apply(g, y)?);
        } else {
            low.push(power(lab, rec, g, a[&1], n)?);
            low.push(lab.apply(g, c[&(n - 1)])?);
        }
        let cn = realize1(lab, view, &pull_type(lab, k, &[gbn])?, Want::default().above(o, low))?;
        lab.set_pair(k, cn, gbn)?;
        c.insert(n, cn);
        let an1 = lab.apply_inverse(g, cn)?;
        a.insert(n + 1, an1);
        let am = a[&-n];
        let gam = lab.apply(g, am)?;
        let mut high = xs.clone();
        if n == 0 {
            high.push(lab.apply(g, z)?);
        } else {
            high.push(power(lab, rec, g, b[&-1], n)?);
            high.push(lab.apply(g, b[&-n])?);
        }
        let bm = realize1(lab, view, &push_type(lab, k, &[gam])?, down().below(o, high))?;
        lab.set_pair(k, gam, bm)?;
        b.insert(-n - 1, bm);
        let gib = lab.apply_inverse(g, bm)?;
        let am1 = realize1(lab, view, &pull_type(lab, k, &[gib])?, Want::default())?;
        lab.set_pair(k, am1, gib)?;
        a.insert(-n - 1, am1);
        if let Some(x) = x {
            if super::in_window(lab, k, &window, x) {
                absorb(lab, k, x)?;
                covered.push(x);
                certify_inside(rec, lab, k, &window, x);
            }
        }

        let an = a[&n];
        rec.image(lab, format!("w a{n} = a{}", n + 1), w, an, an1);
        rec.image(lab, format!("w a{} = a{}", -n - 1, -n), w, am1, am);
        for j in &job.chain_orders {
            view.less(rec, format!("a{n} < a{} on order {}", n + 1, j + 1), an, *j, an1);
            view.less(rec, format!("a{} < a{} on order {}", -n - 1, -n, j + 1), am1, *j, am);
        }
        if n == 0 {
            view.less(rec, "a0 below z", a[&0], o, z);
            view.less(rec, "y below a1", y, o, an1);
        } else {
            let ga1 = power(lab, rec, g, a[&1], n)?;
            view.less(rec, format!("c{n} above g^{n} a1"), ga1, o, cn);
            let gb0 = power(lab, rec, g, b[&0], n / 2)?;
            view.less(rec, format!("b{n} above g^{} b0", n / 2), gb0, o, b[&n]);
            let ga0 = power(lab, rec, g, a[&0], (n + 1) / 2)?;
            view.less(rec, format!("a{} below g^{} a0", -n - 1, (n + 1) / 2), am1, o, ga0);
            let gbm1 = power(lab, rec, g, b[&-1], n)?;
            view.less(rec, format!("b{} below g^{n} b-1", -n - 1), bm, o, gbm1);
        }
        rec.check("k is a partial isomorphism", Assertion::PartialIso { map: lab.name(k).to_string() });
        let (d, i) = (domain(lab, k), image(lab, k));
        view.extreme(rec, "min A", gam, &d, o, false);
        view.extreme(rec, "max A", cn, &d, o, true);
        view.extreme(rec, "min B", bm, &i, o, false);
        view.extreme(rec, "max B", gbn, &i, o, true);
        rec.close(lab, &job.phase, n);
    }
    Ok(Orbit { map: k, word: w, chain: a, covered, witnesses: None })
}

/// Runs the construction matching the profile of `g` on `job.order`.
pub(crate) fn dispatch(lab: &mut Lab, rec: &mut Recorder, g: AutoId, job: &Job) -> Result<Orbit> {
    let t = oriented_tag(lab, g, &job.view, job.order)?;
    let two = |lab: &mut Lab, rec: &mut Recorder, g: AutoId| -> Result<Orbit> {
        let first = Job { phase: format!("{} two orbitals", job.phase), ..job.clone() };
        let w = two_orbitals(lab, rec, g, &first)?;
        let second = Job { phase: format!("{} commutator", job.phase), ..job.clone() };
        match w.witnesses {
            Some((y, z)) => commutator(lab, rec, w.word, y, z, &second),
            None => {
                let k = lab.partial(fresh_name(lab, "k"), &[])?;
                let word = lab.word(fresh_name(lab, "w"), vec![Letter::new(w.word, -1), Letter::conj(w.word, 1, k, -1)])?;
                Ok(Orbit { map: k, word, chain: BTreeMap::new(), covered: vec![], witnesses: None })
            }
        }
    };
    match t {
        Tag::Identity => Err(Error::TrivialInput),
        Tag::StrictlyUp | Tag::CofinallyUp | Tag::SinglePlusOrbital => case1(lab, rec, g, job),
        Tag::StrictlyDown | Tag::CofinallyDown => {
            let gi = lab.inverse(g)?;
            case1(lab, rec, gi, job)
        }
        Tag::UpAboveDownBelow => two(lab, rec, g),
        Tag::DownAboveUpBelow => {
            let gi = lab.inverse(g)?;
            two(lab, rec, gi)
        }
        Tag::Unconstrained => Err(Error::ProfileMismatch(format!(
            "no construction for an unconstrained map on order {}",
            job.order + 1
        ))),
    }
}

/// Builds a product of conjugates of `g` and `g^-1` with a single orbital,
/// moving every point up, on a universe with one order.
pub fn make_single_plus_orbital(lab: &mut Lab, g: AutoId, depth: usize) -> Result<Built> {
    let n = lab.universe().num_orders();
    if n != 1 {
        return Err(Error::RelationNotApplicable(format!("single orbital construction needs one order, not {n}")));
    }
    let mut rec = Recorder::new(lab);
    let job = Job { view: View::new(1), order: 0, chain_orders: vec![0], depth, phase: "order 1".into() };
    let orbit = dispatch(lab, &mut rec, g, &job)?;
    if depth > 0 {
        lab.declare(orbit.word, 0, OrderProfile::plain(Tag::SinglePlusOrbital));
    }
    let mut run = ConstructionRun::new("single-plus-orbital", lab.universe().seed(), depth);
    run.inputs = json!({ "g": lab.to_json(g) });
    run.summary = orbit.summary(lab);
    run.stages = rec.into_stages();
    Ok(Built { map: orbit.map, word: orbit.word, run })
}

fn single_order_run(
    lab: &mut Lab,
    kind: &str,
    g: AutoId,
    depth: usize,
    build: impl FnOnce(&mut Lab, &mut Recorder, &Job) -> Result<Orbit>,
) -> Result<Built> {
    let mut rec = Recorder::new(lab);
    let job = Job { view: View::new(lab.universe().num_orders()), order: 0, chain_orders: vec![0], depth, phase: kind.into() };
    let orbit = build(lab, &mut rec, &job)?;
    let mut run = ConstructionRun::new(kind, lab.universe().seed(), depth);
    run.inputs = json!({ "g": lab.to_json(g) });
    run.summary = orbit.summary(lab);
    if let Some((y, z)) = orbit.witnesses {
        run.summary["witnesses"] = json!({ "above": y, "below": z });
    }
    run.stages = rec.into_stages();
    Ok(Built { map: orbit.map, word: orbit.word, run })
}

/// Builds `h` with `g h^-1 g h` a single up orbital on the first order, for
/// `g` moving up there.
pub fn build_case1(lab: &mut Lab, g: AutoId, depth: usize) -> Result<Built> {
    single_order_run(lab, "case1", g, depth, |lab, rec, job| case1(lab, rec, g, job))
}

/// Builds `h` with `g h^-1 g h` moving up above and down below on the first
/// order, for `g` of the same shape.
pub fn build_two_orbitals(lab: &mut Lab, g: AutoId, depth: usize) -> Result<Built> {
    single_order_run(lab, "two-orbitals", g, depth, |lab, rec, job| two_orbitals(lab, rec, g, job))
}

/// Builds `k` with `[g, k]` a single up orbital on the first order, for `g`
/// moving up above and down below with declared witnesses.
pub fn build_commutator_single(lab: &mut Lab, g: AutoId, depth: usize) -> Result<Built> {
    let p = lab.profile(g, 0)?;
    let (Tag::UpAboveDownBelow, Some(y), Some(z)) = (p.tag, p.above, p.below) else {
        return Err(Error::ProfileMismatch(format!("{} on order 1 has no up-above and down-below witnesses", p.tag)));
    };
    single_order_run(lab, "commutator", g, depth, |lab, rec, job| commutator(lab, rec, g, y, z, job))
}
