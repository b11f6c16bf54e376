use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::{domain, fresh_name, image, indep_check, pull_type, push_type, relation_name, Built, View};
use crate::automorphism::{AutoId, Lab, Letter, Tag};
use crate::certificate::{Assertion, ConstructionRun, Recorder};
use crate::error::{Error, Result};
use crate::fraisse::{Interval, Lean, Universe};
use crate::independence::{indep, IndependenceRelation, RelationKind};
use crate::structure::Id;
use crate::types::{type_of, TypeDescriptor};

/// Which side of the independence the fresh tuple sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hand {
    /// `ā ⫝_X B`, for `g` moving every point down.
    Right,
    /// `B ⫝_X ā`, for `g` moving every point up.
    Left,
}

impl std::str::FromStr for Hand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Hand> {
        match s {
            "R" | "r" | "right" => Ok(Hand::Right),
            "L" | "l" | "left" => Ok(Hand::Left),
            _ => Err(Error::Parse(format!("side must be R or L, not {s:?}"))),
        }
    }
}

fn toggled(rel: &IndependenceRelation, n: usize) -> IndependenceRelation {
    let mut r = rel.clone();
    r.reversed = (0..n).filter(|o| !rel.reversed.contains(o)).collect();
    r
}

fn oriented(lab: &mut Lab, g: AutoId, o: usize, rel: &IndependenceRelation) -> Result<Tag> {
    let t = lab.profile(g, o)?.tag;
    Ok(if rel.reversed.contains(&o) { t.reversed() } else { t })
}

fn apply_all(lab: &mut Lab, g: AutoId, xs: &[Id]) -> Result<Vec<Id>> {
    xs.iter().map(|x| lab.apply(g, *x)).collect()
}

fn apply_inverse_all(lab: &mut Lab, g: AutoId, xs: &[Id]) -> Result<Vec<Id>> {
    xs.iter().map(|x| lab.apply_inverse(g, *x)).collect()
}

/// Realizes `p` by a tuple `ā` independent from `B` over the parameters `X`
/// (on the side given by `hand`) whose `g`-image is separated from it by `X`.
/// Returns `ā` and `g ā`.
pub fn realize_independent_from_image(
    lab: &mut Lab,
    p: &TypeDescriptor,
    b: &BTreeSet<Id>,
    g: AutoId,
    hand: Hand,
    rel: &IndependenceRelation,
) -> Result<(Vec<Id>, Vec<Id>)> {
    rel.check_applicable(lab.universe().spec())?;
    let n = lab.universe().num_orders();
    let eff = match hand {
        Hand::Right => rel.clone(),
        Hand::Left => toggled(rel, n),
    };
    let orders = eff.clause_orders(n);
    for o in &orders {
        let t = oriented(lab, g, *o, &eff)?;
        if !matches!(t, Tag::StrictlyDown) {
            let want = if hand == Hand::Right { "down" } else { "up" };
            return Err(Error::ProfileMismatch(format!("{t} on order {} does not move every point {want}", o + 1)));
        }
    }
    if let Some(x) = p.params.iter().chain(b).find(|x| !lab.universe().contains(**x)) {
        return Err(Error::UnknownElement(*x));
    }
    let seq: Vec<usize> = match orders.first() {
        Some(o) => {
            let mut vs: Vec<usize> = p.orders[*o]
                .iter()
                .filter_map(|t| match t {
                    crate::types::Term::Var(v) => Some(*v),
                    _ => None,
                })
                .collect();
            if !eff.reversed.contains(o) {
                vs.reverse();
            }
            vs
        }
        None => (0..p.num_vars).collect(),
    };
    let leans: Vec<Lean> =
        (0..n).map(|o| if orders.contains(&o) { eff.independent_lean(o) } else { Lean::Low }).collect();
    let mut done: Vec<(usize, Id)> = Vec::new();
    for v in seq {
        for (_, a) in &done {
            lab.apply(g, *a)?;
        }
        let q = p.substitute(&done);
        let idx = (0..v).filter(|w| !done.iter().any(|(d, _)| d == w)).count();
        let mut perm: Vec<usize> = vec![idx];
        perm.extend((0..q.num_vars).filter(|w| *w != idx));
        let q = q.permute_vars(&perm).prefix(1);
        let a = lab.universe_mut().realize(&q, &[], &leans)?[0];
        done.push((v, a));
    }
    done.sort_unstable();
    let abar: Vec<Id> = done.into_iter().map(|(_, a)| a).collect();
    let gabar = apply_all(lab, g, &abar)?;
    Ok((abar, gabar))
}

fn prepare(lab: &mut Lab, k: AutoId, g: AutoId, xs: &[Id]) -> Result<()> {
    for x in xs {
        let kx = lab.apply(k, *x)?;
        let gx = lab.apply(g, *x)?;
        lab.apply(k, gx)?;
        let gkx = lab.apply(g, kx)?;
        lab.apply_inverse(k, gkx)?;
    }
    Ok(())
}

fn union(a: &[Id], b: &[Id]) -> Vec<Id> {
    let s: BTreeSet<Id> = a.iter().chain(b).copied().collect();
    s.into_iter().collect()
}

fn high(n: usize) -> Vec<Lean> {
    vec![Lean::High; n]
}

fn pair_all(lab: &mut Lab, k: AutoId, from: &[Id], to: &[Id]) -> Result<()> {
    for (a, b) in from.iter().zip(to) {
        lab.set_pair(k, *a, *b)?;
    }
    Ok(())
}

/// Builds `k` so that `[k, g]` moves each listed type maximally to the right
/// and `[g, k]` moves it maximally to the left, for `g` moving every point down.
pub fn build_maximal_mover(lab: &mut Lab, g: AutoId, types: &[TypeDescriptor]) -> Result<Built> {
    let rel = IndependenceRelation::lifted();
    rel.check_applicable(lab.universe().spec())?;
    let t = lab.profile(g, 0)?.tag;
    if t != Tag::StrictlyDown {
        return Err(Error::ProfileMismatch(format!("{t} does not move every point down")));
    }
    if types.iter().any(|p| p.params.is_empty()) {
        return Err(Error::EmptyBase);
    }
    let n = lab.universe().num_orders();
    let sep = IndependenceRelation::per_order(0);
    let mut rec = Recorder::new(lab);
    let k = lab.partial(fresh_name(lab, "k"), &[])?;
    let right = lab.word(fresh_name(lab, "r"), vec![Letter::new(k, -1), Letter::conj(k, 1, g, -1)])?;
    let left = lab.word(fresh_name(lab, "l"), vec![Letter::new(g, -1), Letter::conj(g, 1, k, -1)])?;
    let gi = lab.inverse(g)?;
    let mut witnesses = Vec::new();
    for (i, p) in types.iter().enumerate() {
        let xs = p.params.clone();
        prepare(lab, k, g, &xs)?;
        let a_set = domain(lab, k);
        let b_set = image(lab, k);
        let ginvb = apply_inverse_all(lab, g, &b_set)?;
        let (abar, gabar) = realize_independent_from_image(lab, p, &a_set.iter().copied().collect(), g, Hand::Right, &rel)?;
        let t = push_type(lab, k, &abar)?;
        let bbar = lab.universe_mut().realize(&t, &[], &high(n))?;
        pair_all(lab, k, &abar, &bbar)?;
        let gb = apply_all(lab, g, &bbar)?;
        let t = pull_type(lab, k, &gb)?;
        let cbar = lab.universe_mut().realize(&t, &[], &high(n))?;
        pair_all(lab, k, &cbar, &gb)?;
        let moved = apply_all(lab, right, &abar)?;
        let kx: Vec<Id> = xs.iter().map(|x| lab.peek(k, *x).unwrap()).collect();
        let kgkx: Vec<Id> = xs
            .iter()
            .map(|x| lab.peek(k, *x).and_then(|y| lab.peek(g, y)).and_then(|z| lab.peek_inverse(k, z)).unwrap())
            .collect();
        rec.check("a independent from A over X", indep_check(&abar, xs.clone(), &a_set, &rel));
        rec.check("a separated from g a by X", indep_check(&abar, xs.clone(), &gabar, &sep));
        rec.check("a and g a disjoint", Assertion::Disjoint { a: abar.clone(), b: gabar.clone() });
        rec.check("b independent from g^-1 B over B", indep_check(&bbar, b_set.clone(), &ginvb, &rel));
        rec.check("b and g b disjoint", Assertion::Disjoint { a: bbar.clone(), b: gb.clone() });
        rec.check("b independent from B over kX", indep_check(&bbar, kx.clone(), &b_set, &rel));
        rec.check("c independent from g a over aA", indep_check(&cbar, union(&abar, &a_set), &gabar, &rel));
        rec.check("c and a disjoint", Assertion::Disjoint { a: cbar.clone(), b: abar.clone() });
        rec.check(
            "a deleted from the base of c and g a",
            Assertion::DeleteSupport {
                a: cbar.clone(),
                b: abar.clone(),
                b2: a_set.clone(),
                c: gabar.clone(),
                relation: relation_name(&rel),
                reversed: vec![],
            },
        );
        rec.check("b independent from g^-1 B over kX", indep_check(&bbar, kx, &ginvb, &rel));
        rec.check("c independent from A over k^-1 g k X", indep_check(&cbar, kgkx.clone(), &a_set, &rel));
        rec.check("c independent from g a over k^-1 g k X", indep_check(&cbar, kgkx, &gabar, &rel));
        rec.check("a independent from [k,g] a over X", indep_check(&abar, xs.clone(), &moved, &rel));
        for (a, b) in abar.iter().zip(&moved) {
            rec.image(lab, format!("[k,g] {a} = {b}"), right, *a, *b);
        }
        rec.close(lab, "right", i as i64);
        let right_witness = json!({ "tuple": abar, "image": moved });

        prepare(lab, k, g, &xs)?;
        let a_set = domain(lab, k);
        let ginva = apply_inverse_all(lab, g, &a_set)?;
        let (abar, giabar) = realize_independent_from_image(lab, p, &ginva.iter().copied().collect(), gi, Hand::Left, &rel)?;
        let gabar = apply_all(lab, g, &abar)?;
        let t = push_type(lab, k, &abar)?;
        let bbar = lab.universe_mut().realize(&t, &[], &high(n))?;
        pair_all(lab, k, &abar, &bbar)?;
        let gb = apply_all(lab, g, &bbar)?;
        let t = pull_type(lab, k, &gb)?;
        let cbar = lab.universe_mut().realize(&t, &[], &high(n))?;
        pair_all(lab, k, &cbar, &gb)?;
        let moved = apply_all(lab, left, &abar)?;
        let gx: Vec<Id> = xs.iter().map(|x| lab.peek(g, *x).unwrap()).collect();
        rec.check("g^-1 A independent from a over X", indep_check(&ginva, xs.clone(), &abar, &rel));
        rec.check("g^-1 a separated from a by X", indep_check(&giabar, xs.clone(), &abar, &sep));
        rec.check("a separated from g a by gX", indep_check(&abar, gx.clone(), &gabar, &sep));
        rec.check("a and g a disjoint", Assertion::Disjoint { a: abar.clone(), b: gabar.clone() });
        rec.check("A independent from g a over gX", indep_check(&a_set, gx.clone(), &gabar, &rel));
        rec.check("c independent from g a over aA", indep_check(&cbar, union(&abar, &a_set), &gabar, &rel));
        rec.check("c and a disjoint", Assertion::Disjoint { a: cbar.clone(), b: abar.clone() });
        rec.check(
            "a deleted from the base of c and g a",
            Assertion::DeleteSupport {
                a: cbar.clone(),
                b: abar.clone(),
                b2: a_set.clone(),
                c: gabar.clone(),
                relation: relation_name(&rel),
                reversed: vec![],
            },
        );
        rec.check("c independent from g a over A", indep_check(&cbar, a_set.clone(), &gabar, &rel));
        rec.check("c independent from g a over gX", indep_check(&cbar, gx, &gabar, &rel));
        rec.check("[g,k] a independent from a over X", indep_check(&moved, xs.clone(), &abar, &rel));
        for (a, b) in abar.iter().zip(&moved) {
            rec.image(lab, format!("[g,k] {a} = {b}"), left, *a, *b);
        }
        for x in &xs {
            lab.apply_inverse(k, *x)?;
        }
        rec.close(lab, "left", i as i64);
        witnesses.push(json!({
            "type": i,
            "params": xs,
            "right": right_witness,
            "left": { "tuple": abar, "image": moved },
        }));
    }
    let mut run = ConstructionRun::new("max-mover", lab.universe().seed(), types.len());
    let sig = lab.universe().spec().signature.clone();
    run.inputs = json!({ "g": lab.to_json(g), "types": types.iter().map(|p| p.to_json(&sig)).collect::<Vec<_>>() });
    run.summary = json!({
        "k": lab.name(k),
        "right": lab.display(right),
        "left": lab.display(left),
        "types": witnesses,
    });
    run.stages = rec.into_stages();
    Ok(Built { map: k, word: right, run })
}

/// Nonempty-base types over the universe, deterministic in its seed: type
/// `i` has `1 + i % 2` variables over one or two existing parameters.
pub fn enumerate_types(u: &Universe, count: usize) -> Vec<TypeDescriptor> {
    let ids: Vec<Id> = u.ids().collect();
    if ids.is_empty() {
        return vec![];
    }
    let mut scratch = u.clone();
    (0..count)
        .filter_map(|i| {
            let base: BTreeSet<Id> = (0..1 + i % 2).map(|j| ids[(i + j) % ids.len()]).collect();
            let fresh = scratch.grow_random(1 + i % 2);
            type_of(&scratch, &fresh, &base).ok()
        })
        .collect()
}

/// A tuple realizing a type independently from its image on every order,
/// with the number of per-order repairs it needed.
#[derive(Debug)]
pub struct MultiRealized {
    pub tuple: Vec<Id>,
    pub image: Vec<Id>,
    pub repairs: usize,
    pub run: ConstructionRun,
}

fn gap(u: &Universe, x: Id, o: usize, around: &[Id]) -> Interval {
    let c = u.coord(x, o);
    let lo = around.iter().map(|s| u.coord(*s, o)).filter(|s| *s < c).max().cloned();
    let hi = around.iter().map(|s| u.coord(*s, o)).filter(|s| *s > c).min().cloned();
    Interval::new(lo, hi)
}

/// Realizes `p` by `d̄` with `d̄ ⫝_X g d̄` for the multi-order relation `rel`,
/// for `g` moving every point down on every order as `rel` reads them.
pub fn realize_independent_multiorder(
    lab: &mut Lab,
    p: &TypeDescriptor,
    g: AutoId,
    rel: &IndependenceRelation,
) -> Result<MultiRealized> {
    let u = lab.universe();
    if !u.spec().is_pure_orders() || rel.kind != RelationKind::MultiOrderSwir {
        return Err(Error::RelationNotApplicable("multi-order realization needs a pure order class".into()));
    }
    if p.params.is_empty() {
        return Err(Error::EmptyBase);
    }
    let n = u.num_orders();
    let view = View { rev: (0..n).map(|o| rel.reversed.contains(&o)).collect() };
    for o in 0..n {
        let t = oriented(lab, g, o, rel)?;
        if t != Tag::StrictlyDown {
            return Err(Error::ProfileMismatch(format!("{t} on order {} does not move every point down", o + 1)));
        }
    }
    let xs = p.params.clone();
    let mut rec = Recorder::new(lab);
    let per = |o: usize| IndependenceRelation::per_order(o).reversing(rel.reversed.iter().copied());
    let (mut cur, gcur) = realize_independent_from_image(lab, p, &BTreeSet::new(), g, Hand::Right, &per(0))?;
    let orig = cur.clone();
    let with_x = |t: &[Id]| xs.iter().chain(t).copied().collect::<Vec<Id>>();
    rec.check("realizes the type", Assertion::SameType { from: with_x(&orig), to: with_x(&cur) });
    rec.check("independent on order 1", indep_check(&cur, xs.clone(), &gcur, &per(0)));
    rec.close(lab, "order 1", 0);
    let mut repairs = 0;
    for m in 1..n {
        let prev = cur.clone();
        let gprev = apply_all(lab, g, &prev)?;
        let mut sorted: Vec<usize> = (0..prev.len()).collect();
        let u = lab.universe();
        sorted.sort_by(|i, j| {
            if view.lt(u, prev[*j], m, prev[*i]) {
                std::cmp::Ordering::Less
            } else if i == j {
                std::cmp::Ordering::Equal
            } else {
                std::cmp::Ordering::Greater
            }
        });
        let mut c = prev.clone();
        for k in 1..sorted.len() {
            let v = sorted[k];
            let done: Vec<Id> = sorted[..k].iter().map(|i| c[*i]).collect();
            let gdone = apply_all(lab, g, &done)?;
            let bv = prev[v];
            let u = lab.universe();
            let sep = |a: Id, b: Id| xs.iter().any(|x| view.lt(u, a, m, *x) && view.lt(u, *x, m, b));
            if gdone.iter().all(|gc| xs.contains(gc) || !view.lt(u, bv, m, *gc) || sep(bv, *gc)) {
                continue;
            }
            let x2 = view.min(u, xs.iter().copied().filter(|x| view.lt(u, bv, m, *x)), m);
            let lower = view
                .max(u, gdone.iter().copied().filter(|gc| x2.is_none_or(|x2| view.lt(u, *gc, m, x2))), m)
                .expect("a violating image lies below the next parameter");
            let upper = view.min(u, x2.into_iter().chain([c[sorted[k - 1]]]), m).unwrap();
            let rest: Vec<Id> = sorted[k + 1..].iter().map(|i| prev[*i]).collect();
            let near = union(&done, &rest);
            let mut around = union(&near, &xs);
            around.extend(apply_all(lab, g, &near)?);
            around.extend(apply_inverse_all(lab, g, &union(&near, &xs))?);
            let u = lab.universe();
            let mut bounds: Vec<Interval> = (0..n).map(|i| gap(u, bv, i, &around)).collect();
            bounds[m] = view.above(u, lower, m).intersect(&view.below(u, upper, m));
            let fresh = lab.universe_mut().insert_between(&TypeDescriptor::trivial(n), &bounds)?;
            lab.apply(g, fresh)?;
            c[v] = fresh;
            repairs += 1;
        }
        let gc = apply_all(lab, g, &c)?;
        rec.check("realizes the type", Assertion::SameType { from: with_x(&orig), to: with_x(&c) });
        for i in 0..=m {
            rec.check(format!("independent on order {}", i + 1), indep_check(&c, xs.clone(), &gc, &per(i)));
        }
        for i in 0..m {
            rec.check(
                format!("order {} type kept", i + 1),
                Assertion::SameOrderType {
                    from: [with_x(&prev), gprev.clone()].concat(),
                    to: [with_x(&c), gc.clone()].concat(),
                    order: i,
                },
            );
        }
        rec.close(lab, &format!("order {}", m + 1), m as i64);
        cur = c;
    }
    let image = apply_all(lab, g, &cur)?;
    rec.check("independent on every order", indep_check(&cur, xs.clone(), &image, rel));
    rec.close(lab, "final", n as i64);
    let mut run = ConstructionRun::new("multi-realize", lab.universe().seed(), n);
    let sig = lab.universe().spec().signature.clone();
    run.inputs = json!({ "g": lab.to_json(g), "type": p.to_json(&sig), "reversed": rel.reversed });
    run.summary = json!({ "tuple": cur, "image": image, "repairs": repairs });
    run.stages = rec.into_stages();
    Ok(MultiRealized { tuple: cur, image, repairs, run })
}

/// The outcome of testing whether a map moves one type maximally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoveVerdict {
    pub index: usize,
    pub tuple: Vec<Id>,
    pub image: Vec<Id>,
    pub moves_maximally: bool,
    pub method: String,
}

impl MoveVerdict {
    pub fn to_json(&self) -> Value {
        json!({
            "type": self.index,
            "tuple": self.tuple,
            "image": self.image,
            "moves_maximally": self.moves_maximally,
            "method": self.method,
        })
    }
}

/// Realizes each type and checks `ā ⫝_X g ā` (right) or `g ā ⫝_X ā` (left).
pub fn verify_moves_maximally(
    lab: &mut Lab,
    g: AutoId,
    types: &[TypeDescriptor],
    hand: Hand,
    rel: &IndependenceRelation,
) -> Result<Vec<MoveVerdict>> {
    rel.check_applicable(lab.universe().spec())?;
    let n = lab.universe().num_orders();
    let mut out = Vec::new();
    for (index, p) in types.iter().enumerate() {
        if p.params.is_empty() {
            out.push(MoveVerdict { index, tuple: vec![], image: vec![], moves_maximally: false, method: "empty base".into() });
            continue;
        }
        let attempt = if rel.kind == RelationKind::MultiOrderSwir {
            let r = if hand == Hand::Right { rel.clone() } else { toggled(rel, n) };
            realize_independent_multiorder(lab, p, g, &r).map(|m| (m.tuple, m.image, "multi-order repair"))
        } else {
            realize_independent_from_image(lab, p, &BTreeSet::new(), g, hand, rel).map(|(a, b)| (a, b, "move"))
        };
        let (tuple, image, method) = match attempt {
            Ok(r) => r,
            Err(Error::ProfileMismatch(_)) => {
                let leans: Vec<Lean> = (0..n).map(|o| rel.independent_lean(o)).collect();
                let a = lab.universe_mut().realize(p, &[], &leans)?;
                let ga = apply_all(lab, g, &a)?;
                (a, ga, "generic")
            }
            Err(e) => return Err(e),
        };
        let x: BTreeSet<Id> = p.params.iter().copied().collect();
        let (sa, sb): (BTreeSet<Id>, BTreeSet<Id>) = (tuple.iter().copied().collect(), image.iter().copied().collect());
        let ok = match hand {
            Hand::Right => indep(lab.universe(), &sa, &x, &sb, rel)?,
            Hand::Left => indep(lab.universe(), &sb, &x, &sa, rel)?,
        };
        out.push(MoveVerdict { index, tuple, image, moves_maximally: ok, method: method.into() });
    }
    Ok(out)
}
