//! Certified constructions of automorphisms: single-orbital maps on one or
//! several orders, maximal movers and multi-order independent realizations.

mod mover;
mod norder;
mod orbital;

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::automorphism::{realize_displaced, AutoId, Dir, Lab, Tag};
use crate::certificate::{Assertion, ConstructionRun, Recorder};
use crate::error::Result;
use crate::fraisse::{Interval, Universe};
use crate::independence::{IndependenceRelation, RelationKind};
use crate::structure::Id;
use crate::types::{pushforward, type_of, TypeDescriptor};

pub use mover::{
    build_maximal_mover, enumerate_types, realize_independent_from_image, realize_independent_multiorder,
    verify_moves_maximally, Hand, MoveVerdict, MultiRealized,
};
pub use norder::{build_n_order_single_orbital, NOrderBuilt};
pub use orbital::{build_case1, build_commutator_single, build_two_orbitals, make_single_plus_orbital};

/// The result of a construction: the map built, the word it is read through
/// and the certified run.
#[derive(Debug)]
pub struct Built {
    pub map: AutoId,
    pub word: AutoId,
    pub run: ConstructionRun,
}

/// A choice of orientation for every order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct View {
    pub rev: Vec<bool>,
}

impl View {
    pub fn new(n: usize) -> Self {
        View { rev: vec![false; n] }
    }

    pub fn reversed(&self) -> BTreeSet<usize> {
        (0..self.rev.len()).filter(|o| self.rev[*o]).collect()
    }

    pub fn lt(&self, u: &Universe, a: Id, o: usize, b: Id) -> bool {
        if self.rev[o] {
            u.less(b, o, a)
        } else {
            u.less(a, o, b)
        }
    }

    pub fn tag(&self, t: Tag, o: usize) -> Tag {
        if self.rev[o] {
            t.reversed()
        } else {
            t
        }
    }

    pub fn dir(&self, o: usize, d: Dir) -> Dir {
        match (self.rev[o], d) {
            (false, d) => d,
            (true, Dir::Up) => Dir::Down,
            (true, Dir::Down) => Dir::Up,
        }
    }

    /// The interval of points above `x` in the oriented order.
    pub fn above(&self, u: &Universe, x: Id, o: usize) -> Interval {
        let c = u.coord(x, o).clone();
        if self.rev[o] {
            Interval::below(c)
        } else {
            Interval::above(c)
        }
    }

    pub fn below(&self, u: &Universe, x: Id, o: usize) -> Interval {
        let c = u.coord(x, o).clone();
        if self.rev[o] {
            Interval::above(c)
        } else {
            Interval::below(c)
        }
    }

    pub fn less(&self, rec: &mut Recorder, label: impl Into<String>, a: Id, o: usize, b: Id) {
        if self.rev[o] {
            rec.less(label, b, o, a)
        } else {
            rec.less(label, a, o, b)
        }
    }

    pub fn extreme(&self, rec: &mut Recorder, label: impl Into<String>, elem: Id, set: &[Id], o: usize, max: bool) {
        rec.check(label, Assertion::Extreme { elem, set: set.to_vec(), order: o, max: max ^ self.rev[o] });
    }

    pub fn min(&self, u: &Universe, xs: impl IntoIterator<Item = Id>, o: usize) -> Option<Id> {
        xs.into_iter().reduce(|a, b| if self.lt(u, b, o, a) { b } else { a })
    }

    pub fn max(&self, u: &Universe, xs: impl IntoIterator<Item = Id>, o: usize) -> Option<Id> {
        xs.into_iter().reduce(|a, b| if self.lt(u, a, o, b) { b } else { a })
    }
}

/// Bounds and an optional displacement requirement for one fresh point, all
/// read in the oriented orders.
#[derive(Default)]
pub(crate) struct Want {
    pub lows: Vec<(usize, Id)>,
    pub highs: Vec<(usize, Id)>,
    pub moving: Option<(AutoId, usize, Dir)>,
}

impl Want {
    pub fn above(mut self, o: usize, x: impl IntoIterator<Item = Id>) -> Self {
        self.lows.extend(x.into_iter().map(|x| (o, x)));
        self
    }

    pub fn below(mut self, o: usize, x: impl IntoIterator<Item = Id>) -> Self {
        self.highs.extend(x.into_iter().map(|x| (o, x)));
        self
    }

    pub fn moving(mut self, g: AutoId, o: usize, dir: Dir) -> Self {
        self.moving = Some((g, o, dir));
        self
    }
}

pub(crate) fn realize1(lab: &mut Lab, view: &View, p: &TypeDescriptor, want: Want) -> Result<Id> {
    let u = lab.universe();
    let mut bounds = vec![Interval::all(); u.num_orders()];
    for (o, x) in &want.lows {
        bounds[*o] = bounds[*o].intersect(&view.above(u, *x, *o));
    }
    for (o, x) in &want.highs {
        bounds[*o] = bounds[*o].intersect(&view.below(u, *x, *o));
    }
    match want.moving {
        Some((g, o, dir)) => realize_displaced(lab, g, p, view.dir(o, dir), o, &bounds),
        None => lab.universe_mut().insert_between(p, &bounds),
    }
}

pub(crate) fn fresh_name(lab: &Lab, base: &str) -> String {
    if lab.find(base).is_none() {
        return base.to_string();
    }
    (2..).map(|i| format!("{base}{i}")).find(|n| lab.find(n).is_none()).unwrap()
}

pub(crate) fn domain(lab: &Lab, h: AutoId) -> Vec<Id> {
    lab.support(h).map(|m| m.domain().collect()).unwrap_or_default()
}

pub(crate) fn image(lab: &Lab, h: AutoId) -> Vec<Id> {
    lab.support(h).map(|m| m.image().collect()).unwrap_or_default()
}

/// The type of `h(a)` over `img(h)`, for `a` outside `dom(h)`.
pub(crate) fn push_type(lab: &Lab, h: AutoId, a: &[Id]) -> Result<TypeDescriptor> {
    let m = lab.support(h).cloned().unwrap_or_default();
    let dom: BTreeSet<Id> = m.domain().collect();
    let p = type_of(lab.universe(), a, &dom)?;
    pushforward(lab.universe(), &p, &|x| m.get(x))
}

/// The type of `h^-1(b)` over `dom(h)`, for `b` outside `img(h)`.
pub(crate) fn pull_type(lab: &Lab, h: AutoId, b: &[Id]) -> Result<TypeDescriptor> {
    let m = lab.support(h).cloned().unwrap_or_default();
    let img: BTreeSet<Id> = m.image().collect();
    let p = type_of(lab.universe(), b, &img)?;
    pushforward(lab.universe(), &p, &|x| m.get_inverse(x))
}

/// Extends `h` so that `x` lies in both its domain and its image.
pub(crate) fn absorb(lab: &mut Lab, h: AutoId, x: Id) -> Result<()> {
    let m = lab.support(h).cloned().unwrap_or_default();
    if !m.in_domain(x) {
        let t = push_type(lab, h, &[x])?;
        let y = lab.universe_mut().insert_between(&t, &[])?;
        lab.set_pair(h, x, y)?;
    }
    let m = lab.support(h).cloned().unwrap_or_default();
    if !m.in_image(x) {
        let t = pull_type(lab, h, &[x])?;
        let z = lab.universe_mut().insert_between(&t, &[])?;
        lab.set_pair(h, z, x)?;
    }
    Ok(())
}

/// Whether `x` lies strictly inside the hulls of `dom(h)` and `img(h)` on every listed order.
pub(crate) fn in_window(lab: &Lab, h: AutoId, orders: &[usize], x: Id) -> bool {
    let u = lab.universe();
    let (d, i) = (domain(lab, h), image(lab, h));
    orders.iter().all(|o| {
        [&d, &i].iter().all(|s| s.iter().any(|a| u.less(*a, *o, x)) && s.iter().any(|b| u.less(x, *o, *b)))
    })
}

/// The least element not yet in both the domain and the image of `h`,
/// optionally only among points inside the window on `orders`.
pub(crate) fn next_target(lab: &Lab, h: AutoId, window: Option<&[usize]>) -> Option<Id> {
    let m = lab.support(h).cloned().unwrap_or_default();
    lab.universe()
        .ids()
        .filter(|x| !(m.in_domain(*x) && m.in_image(*x)))
        .find(|x| window.is_none_or(|os| in_window(lab, h, os, *x)))
}

/// Certifies that `h` reaches `x` on the listed orders.
pub(crate) fn certify_inside(rec: &mut Recorder, lab: &Lab, h: AutoId, orders: &[usize], x: Id) {
    let (d, i) = (domain(lab, h), image(lab, h));
    for o in orders {
        rec.check(format!("{x} inside dom on order {}", o + 1), Assertion::Inside { elem: x, set: d.clone(), order: *o });
        rec.check(format!("{x} inside img on order {}", o + 1), Assertion::Inside { elem: x, set: i.clone(), order: *o });
    }
}

pub(crate) fn power_word(lab: &Lab, g: AutoId, k: i64) -> Vec<(String, i8)> {
    let base = crate::certificate::word_names(lab, g);
    let step: Vec<(String, i8)> = if k >= 0 { base } else { base.into_iter().rev().map(|(n, e)| (n, -e)).collect() };
    (0..k.unsigned_abs()).flat_map(|_| step.clone()).collect()
}

/// `g^k x`, with its image assertion recorded.
pub(crate) fn power(lab: &mut Lab, rec: &mut Recorder, g: AutoId, x: Id, k: i64) -> Result<Id> {
    let y = lab.pow(g, x, k)?;
    rec.check(
        format!("{}^{k} {x} = {y}", lab.label(g)),
        Assertion::Image { word: power_word(lab, g, k), from: x, to: y },
    );
    Ok(y)
}

pub(crate) fn relation_name(rel: &IndependenceRelation) -> String {
    match rel.kind {
        RelationKind::FreeSwir => "free".into(),
        RelationKind::LiftedSwir => "lifted".into(),
        RelationKind::MultiOrderSwir => "multi-order".into(),
        RelationKind::PerOrder(k) => format!("order-{}", k + 1),
    }
}

pub(crate) fn indep_check(a: &[Id], b: impl IntoIterator<Item = Id>, c: &[Id], rel: &IndependenceRelation) -> Assertion {
    let mut base: Vec<Id> = b.into_iter().collect();
    base.sort_unstable();
    base.dedup();
    Assertion::Indep {
        a: a.to_vec(),
        b: base,
        c: c.to_vec(),
        relation: relation_name(rel),
        reversed: rel.reversed.iter().copied().collect(),
    }
}

pub(crate) fn chain_json(chain: &std::collections::BTreeMap<i64, Id>) -> Value {
    json!(chain.iter().map(|(i, x)| json!([i, x])).collect::<Vec<_>>())
}
