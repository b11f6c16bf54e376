//! Lazily materialized automorphisms, words over them and orbital tools.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Bound::{Excluded, Unbounded};
use std::str::FromStr;

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fraisse::{Interval, Lean, Universe};
use crate::structure::{coord_to_string, rat, Coord, Id, PartialMap};
use crate::types::{canonical_atom, pushforward, type_of, Term, TypeDescriptor};

pub type AutoId = usize;
pub type ConjugateForm = Vec<(AutoId, i8, Vec<(AutoId, i8)>)>;

/// Displacement behaviour of an automorphism on one order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    StrictlyUp,
    StrictlyDown,
    CofinallyUp,
    CofinallyDown,
    UpAboveDownBelow,
    DownAboveUpBelow,
    SinglePlusOrbital,
    Identity,
    Unconstrained,
}

impl Tag {
    pub const ALL: [Tag; 9] = [
        Tag::StrictlyUp,
        Tag::StrictlyDown,
        Tag::CofinallyUp,
        Tag::CofinallyDown,
        Tag::UpAboveDownBelow,
        Tag::DownAboveUpBelow,
        Tag::SinglePlusOrbital,
        Tag::Identity,
        Tag::Unconstrained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tag::StrictlyUp => "strictly-up",
            Tag::StrictlyDown => "strictly-down",
            Tag::CofinallyUp => "cofinally-up",
            Tag::CofinallyDown => "cofinally-down",
            Tag::UpAboveDownBelow => "up-above-down-below",
            Tag::DownAboveUpBelow => "down-above-up-below",
            Tag::SinglePlusOrbital => "single-plus-orbital",
            Tag::Identity => "identity",
            Tag::Unconstrained => "unconstrained",
        }
    }

    /// The tag of the inverse map.
    pub fn inverse(self) -> Tag {
        match self {
            Tag::StrictlyUp | Tag::SinglePlusOrbital => Tag::StrictlyDown,
            Tag::StrictlyDown => Tag::StrictlyUp,
            Tag::CofinallyUp => Tag::CofinallyDown,
            Tag::CofinallyDown => Tag::CofinallyUp,
            Tag::UpAboveDownBelow => Tag::DownAboveUpBelow,
            Tag::DownAboveUpBelow => Tag::UpAboveDownBelow,
            t => t,
        }
    }

    /// The tag read in the reversed order. Threshold tags are unchanged.
    pub fn reversed(self) -> Tag {
        match self {
            Tag::StrictlyUp | Tag::SinglePlusOrbital => Tag::StrictlyDown,
            Tag::StrictlyDown => Tag::StrictlyUp,
            Tag::CofinallyUp => Tag::CofinallyDown,
            Tag::CofinallyDown => Tag::CofinallyUp,
            t => t,
        }
    }

    fn is_threshold(self) -> bool {
        matches!(self, Tag::UpAboveDownBelow | Tag::DownAboveUpBelow)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Tag> {
        Tag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown profile tag {s:?}")))
    }
}

/// A tag with witnesses: for threshold tags, `above` and `below` bound the
/// regions where the sign is known; `cut` is the exact switch point of a
/// synthesized map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderProfile {
    pub tag: Tag,
    pub above: Option<Id>,
    pub below: Option<Id>,
    pub cut: Option<Coord>,
}

impl OrderProfile {
    pub fn plain(tag: Tag) -> Self {
        OrderProfile { tag, above: None, below: None, cut: None }
    }

    pub fn threshold(tag: Tag, above: Id, below: Id) -> Self {
        OrderProfile { tag, above: Some(above), below: Some(below), cut: None }
    }

    /// The same profile read in the reversed order.
    pub fn reversed(&self) -> Self {
        OrderProfile {
            tag: self.tag.reversed(),
            above: self.below,
            below: self.above,
            cut: self.cut.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "tag": self.tag.name() });
        if let Some(y) = self.above {
            v["above"] = json!(y);
        }
        if let Some(z) = self.below {
            v["below"] = json!(z);
        }
        if let Some(c) = &self.cut {
            v["cut"] = json!(coord_to_string(c));
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Up,
    Down,
}

/// One letter `c g^e c^-1` of a word, with an optional conjugator `c = k^ce`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Letter {
    pub gen: AutoId,
    pub exp: i8,
    pub conj: Option<(AutoId, i8)>,
}

impl Letter {
    pub fn new(gen: AutoId, exp: i8) -> Self {
        Letter { gen, exp, conj: None }
    }

    pub fn conj(gen: AutoId, exp: i8, by: AutoId, by_exp: i8) -> Self {
        Letter { gen, exp, conj: Some((by, by_exp)) }
    }
}

#[derive(Clone, Debug)]
struct Lazy {
    map: PartialMap,
    log: Vec<(Id, Id)>,
    profile: Vec<OrderProfile>,
    identity: bool,
    dom: Vec<BTreeMap<Coord, Id>>,
    img: Vec<BTreeMap<Coord, Id>>,
    pts: Vec<BTreeMap<Coord, Id>>,
    fixed: Vec<(Id, Id)>,
}

#[derive(Clone, Debug)]
enum Body {
    Lazy(Lazy),
    Word(Vec<Letter>),
}

#[derive(Clone, Debug)]
struct Auto {
    name: String,
    body: Body,
    declared: Vec<Option<OrderProfile>>,
    label: Option<String>,
}

/// An arena of automorphisms sharing one universe.
#[derive(Clone, Debug)]
pub struct Lab {
    u: Universe,
    autos: Vec<Auto>,
}

fn sign_ok(up: bool, from: &Coord, to: &Coord) -> bool {
    if up {
        to > from
    } else {
        to < from
    }
}

impl Lab {
    pub fn new(u: Universe) -> Self {
        Lab { u, autos: Vec::new() }
    }

    pub fn universe(&self) -> &Universe {
        &self.u
    }

    pub fn universe_mut(&mut self) -> &mut Universe {
        &mut self.u
    }

    pub fn into_universe(self) -> Universe {
        self.u
    }

    pub fn len(&self) -> usize {
        self.autos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.autos.is_empty()
    }

    fn check(&self, id: AutoId) -> Result<()> {
        if id < self.autos.len() {
            Ok(())
        } else {
            Err(Error::MixedUniverses)
        }
    }

    pub fn name(&self, id: AutoId) -> &str {
        &self.autos[id].name
    }

    pub fn find(&self, name: &str) -> Option<AutoId> {
        self.autos.iter().position(|a| a.name == name)
    }

    pub fn is_word(&self, id: AutoId) -> bool {
        matches!(self.autos[id].body, Body::Word(_))
    }

    pub fn letters(&self, id: AutoId) -> Option<&[Letter]> {
        match &self.autos[id].body {
            Body::Word(ls) => Some(ls),
            Body::Lazy(_) => None,
        }
    }

    pub fn set_label(&mut self, id: AutoId, label: impl Into<String>) {
        self.autos[id].label = Some(label.into());
    }

    fn push(&mut self, name: String, body: Body) -> AutoId {
        let n = self.u.num_orders();
        self.autos.push(Auto { name, body, declared: vec![None; n], label: None });
        self.autos.len() - 1
    }

    fn empty_lazy(&self, profile: Vec<OrderProfile>, identity: bool) -> Lazy {
        let n = self.u.num_orders();
        Lazy {
            map: PartialMap::new(),
            log: Vec::new(),
            profile,
            identity,
            dom: vec![BTreeMap::new(); n],
            img: vec![BTreeMap::new(); n],
            pts: vec![BTreeMap::new(); n],
            fixed: Vec::new(),
        }
    }

    /// Creates a lazy automorphism with one tag per order. Threshold tags get
    /// two fresh witnesses `z < y` and a cut strictly between them.
    pub fn synthesize(&mut self, name: impl Into<String>, tags: &[Tag]) -> Result<AutoId> {
        let n = self.u.num_orders();
        if tags.len() != n {
            return Err(Error::ProfileMismatch(format!("expected {n} tags, got {}", tags.len())));
        }
        let ids = tags.iter().filter(|t| **t == Tag::Identity).count();
        if ids != 0 && ids != n {
            return Err(Error::ProfileMismatch("identity must be declared on every order".into()));
        }
        let mut profile = Vec::with_capacity(n);
        for (o, tag) in tags.iter().enumerate() {
            let mut p = OrderProfile::plain(*tag);
            if tag.is_threshold() {
                let z = self.u.extend_realizing(&TypeDescriptor::trivial(n))?[0];
                let mut bounds = vec![Interval::all(); n];
                bounds[o] = Interval::above(self.u.coord(z, o).clone());
                let y = self.u.insert_between(&TypeDescriptor::trivial(n), &bounds)?;
                let (cz, cy) = (self.u.coord(z, o), self.u.coord(y, o));
                p.cut = Some(cz + (cy - cz) / rat(3));
                p.above = Some(y);
                p.below = Some(z);
            }
            profile.push(p);
        }
        let lazy = self.empty_lazy(profile, ids == n);
        Ok(self.push(name.into(), Body::Lazy(lazy)))
    }

    /// A lazy map with no displacement constraint, seeded with explicit pairs.
    pub fn partial(&mut self, name: impl Into<String>, pairs: &[(Id, Id)]) -> Result<AutoId> {
        let n = self.u.num_orders();
        let lazy = self.empty_lazy(vec![OrderProfile::plain(Tag::Unconstrained); n], false);
        let id = self.push(name.into(), Body::Lazy(lazy));
        for (a, b) in pairs {
            self.set_pair(id, *a, *b)?;
        }
        Ok(id)
    }

    /// Makes the lazy map extend as the identity inside `(x, y)` on the first order.
    pub fn fix_interval(&mut self, id: AutoId, x: Id, y: Id) -> Result<()> {
        self.check(id)?;
        match &mut self.autos[id].body {
            Body::Lazy(l) => {
                l.fixed.push((x, y));
                Ok(())
            }
            Body::Word(_) => Err(Error::ProfileMismatch("words cannot fix intervals".into())),
        }
    }

    pub fn word(&mut self, name: impl Into<String>, letters: Vec<Letter>) -> Result<AutoId> {
        for l in &letters {
            self.check(l.gen)?;
            if let Some((c, _)) = l.conj {
                self.check(c)?;
            }
            if l.exp.abs() != 1 || l.conj.is_some_and(|(_, e)| e.abs() != 1) {
                return Err(Error::Parse("letter exponents must be 1 or -1".into()));
            }
        }
        Ok(self.push(name.into(), Body::Word(letters)))
    }

    /// The inverse of `id` as a word; declared profiles are inverted too.
    pub fn inverse(&mut self, id: AutoId) -> Result<AutoId> {
        self.check(id)?;
        let letters = match &self.autos[id].body {
            Body::Word(ls) => ls.iter().rev().map(|l| Letter { exp: -l.exp, ..*l }).collect(),
            Body::Lazy(_) => vec![Letter::new(id, -1)],
        };
        let name = format!("{}^-1", self.autos[id].name);
        let declared = self.autos[id].declared.clone();
        let inv = self.push(name, Body::Word(letters));
        for (o, d) in declared.into_iter().enumerate() {
            if let Some(p) = d {
                let q = self.invert_profile(id, p)?;
                self.autos[inv].declared[o] = Some(q);
            }
        }
        Ok(inv)
    }

    /// Records a profile established by a construction (to its depth).
    pub fn declare(&mut self, id: AutoId, order: usize, p: OrderProfile) {
        self.autos[id].declared[order] = Some(p);
    }

    pub fn support(&self, id: AutoId) -> Option<&PartialMap> {
        match &self.autos[id].body {
            Body::Lazy(l) => Some(&l.map),
            Body::Word(_) => None,
        }
    }

    /// Pairs of a lazy map in the order they were materialized.
    pub fn log(&self, id: AutoId) -> &[(Id, Id)] {
        match &self.autos[id].body {
            Body::Lazy(l) => &l.log,
            Body::Word(_) => &[],
        }
    }

    fn lazy(&self, id: AutoId) -> &Lazy {
        match &self.autos[id].body {
            Body::Lazy(l) => l,
            Body::Word(_) => unreachable!("not a lazy map"),
        }
    }

    fn lazy_mut(&mut self, id: AutoId) -> &mut Lazy {
        match &mut self.autos[id].body {
            Body::Lazy(l) => l,
            Body::Word(_) => unreachable!("not a lazy map"),
        }
    }

    fn record(&mut self, id: AutoId, a: Id, b: Id) -> Result<()> {
        let n = self.u.num_orders();
        let ca: Vec<Coord> = (0..n).map(|o| self.u.coord(a, o).clone()).collect();
        let cb: Vec<Coord> = (0..n).map(|o| self.u.coord(b, o).clone()).collect();
        let l = self.lazy_mut(id);
        l.map.insert(a, b)?;
        l.log.push((a, b));
        for o in 0..n {
            l.dom[o].insert(ca[o].clone(), a);
            l.img[o].insert(cb[o].clone(), b);
            l.pts[o].insert(ca[o].clone(), a);
            l.pts[o].insert(cb[o].clone(), b);
        }
        Ok(())
    }

    /// Whether `a -> b` extends the current support to a partial isomorphism.
    fn pair_fits(&self, id: AutoId, a: Id, b: Id) -> Result<bool> {
        let l = self.lazy(id);
        if l.map.in_domain(a) || l.map.in_image(b) {
            return Ok(false);
        }
        let dom: BTreeSet<Id> = l.map.domain().collect();
        let img: BTreeSet<Id> = l.map.image().collect();
        let p = type_of(&self.u, &[a], &dom)?;
        let q = pushforward(&self.u, &p, &|x| l.map.get(x))?;
        Ok(q == type_of(&self.u, &[b], &img)?)
    }

    /// Extends a lazy map by an explicit pair.
    pub fn set_pair(&mut self, id: AutoId, a: Id, b: Id) -> Result<()> {
        self.check(id)?;
        if self.is_word(id) {
            return Err(Error::ProfileMismatch("pairs can only be set on lazy maps".into()));
        }
        for x in [a, b] {
            if !self.u.contains(x) {
                return Err(Error::UnknownElement(x));
            }
        }
        if self.lazy(id).map.get(a) == Some(b) {
            return Ok(());
        }
        if !self.pair_fits(id, a, b)? {
            return Err(Error::Unrealizable(format!(
                "{a} -> {b} does not extend the partial isomorphism"
            )));
        }
        for o in 0..self.u.num_orders() {
            if !self.pair_respects(&self.lazy(id).profile[o], o, a, b) {
                return Err(Error::ProfileMismatch(format!(
                    "{a} -> {b} breaks the {} profile on order {}",
                    self.lazy(id).profile[o].tag,
                    o + 1
                )));
            }
        }
        self.record(id, a, b)
    }

    fn pair_respects(&self, p: &OrderProfile, o: usize, a: Id, b: Id) -> bool {
        let (ca, cb) = (self.u.coord(a, o), self.u.coord(b, o));
        let witness_sign = |up_above: bool| {
            if let Some(cut) = &p.cut {
                return sign_ok((ca > cut) == up_above, ca, cb);
            }
            if p.above.is_some_and(|y| ca > self.u.coord(y, o)) {
                return sign_ok(up_above, ca, cb);
            }
            if p.below.is_some_and(|z| ca < self.u.coord(z, o)) {
                return sign_ok(!up_above, ca, cb);
            }
            true
        };
        match p.tag {
            Tag::StrictlyUp | Tag::SinglePlusOrbital => cb > ca,
            Tag::StrictlyDown => cb < ca,
            Tag::CofinallyUp | Tag::CofinallyDown => a != b,
            Tag::Identity => a == b,
            Tag::UpAboveDownBelow => witness_sign(true),
            Tag::DownAboveUpBelow => witness_sign(false),
            Tag::Unconstrained => true,
        }
    }

    /// Checks every materialized pair of a lazy map against its profile.
    pub fn profile_violation(&self, id: AutoId) -> Option<(Id, Id, usize)> {
        let l = match &self.autos[id].body {
            Body::Lazy(l) => l,
            Body::Word(_) => return None,
        };
        for (a, b) in l.map.pairs() {
            for (o, p) in l.profile.iter().enumerate() {
                if !self.pair_respects(p, o, a, b) {
                    return Some((a, b, o));
                }
            }
        }
        None
    }

    fn in_fixed(&self, id: AutoId, a: Id) -> bool {
        let c = self.u.coord(a, 0);
        self.lazy(id)
            .fixed
            .iter()
            .any(|(x, y)| self.u.coord(*x, 0) < c && c < self.u.coord(*y, 0))
    }

    /// Extends a lazy map at `a` (forward: `g(a)`; backward: `g^-1(a)`).
    fn extend(&mut self, id: AutoId, a: Id, forward: bool) -> Result<Id> {
        if !self.u.contains(a) {
            return Err(Error::UnknownElement(a));
        }
        if self.lazy(id).identity {
            return Ok(a);
        }
        if self.in_fixed(id, a) {
            if !self.pair_fits(id, a, a)? {
                return Err(Error::ProfileDeadlock(a));
            }
            self.record(id, a, a)?;
            return Ok(a);
        }
        let n = self.u.num_orders();
        let l = self.lazy(id);
        let map = if forward { l.map.clone() } else { l.map.inverse() };
        let params: BTreeSet<Id> = map.domain().collect();
        let p = type_of(&self.u, &[a], &params)?;
        let q = pushforward(&self.u, &p, &|x| map.get(x))?;
        let mut bounds = vec![Interval::all(); n];
        let mut leans = vec![Lean::Low; n];
        let mut coins = Vec::new();
        for o in 0..n {
            let l = self.lazy(id);
            let prof = &l.profile[o];
            let src = if forward { &l.dom[o] } else { &l.img[o] };
            let ca = self.u.coord(a, o).clone();
            let lo = src.range((Unbounded, Excluded(&ca))).next_back().map(|(_, x)| *x);
            let hi = src.range((Excluded(&ca), Unbounded)).next().map(|(_, x)| *x);
            let mlo = lo.map(|x| self.u.coord(map.get(x).unwrap(), o).clone());
            let mhi = hi.map(|x| self.u.coord(map.get(x).unwrap(), o).clone());
            let (up_ok, down_ok) = if forward {
                (mhi.as_ref().is_none_or(|m| *m > ca), mlo.as_ref().is_none_or(|m| *m < ca))
            } else {
                (mlo.as_ref().is_none_or(|m| *m < ca), mhi.as_ref().is_none_or(|m| *m > ca))
            };
            let extreme = lo.is_none() || hi.is_none();
            let side = |up_above: bool| -> Option<bool> {
                if let Some(cut) = &prof.cut {
                    return Some((ca > *cut) == up_above);
                }
                if prof.above.is_some_and(|y| ca > *self.u.coord(y, o)) {
                    return Some(up_above);
                }
                if prof.below.is_some_and(|z| ca < *self.u.coord(z, o)) {
                    return Some(!up_above);
                }
                None
            };
            let fixed: Option<Option<bool>> = match prof.tag {
                Tag::Unconstrained | Tag::Identity => None,
                Tag::StrictlyUp | Tag::SinglePlusOrbital => Some(Some(true)),
                Tag::StrictlyDown => Some(Some(false)),
                Tag::CofinallyUp => Some(extreme.then_some(true)),
                Tag::CofinallyDown => Some(extreme.then_some(false)),
                Tag::UpAboveDownBelow => Some(side(true)),
                Tag::DownAboveUpBelow => Some(side(false)),
            };
            let up = match fixed {
                None => None,
                Some(Some(up)) => Some(up),
                Some(None) => match (up_ok, down_ok) {
                    (true, true) => {
                        coins.push(o);
                        Some(true)
                    }
                    (u, _) => Some(u),
                },
            };
            let Some(up) = up else { continue };
            if (up && !up_ok) || (!up && !down_ok) {
                return Err(Error::ProfileDeadlock(a));
            }
            let cut = prof.cut.clone().filter(|_| forward == (prof.tag == Tag::DownAboveUpBelow));
            let pts = &l.pts[o];
            let (iv, lean) = match (forward, up) {
                (true, true) => {
                    let lower = mlo.map_or(ca.clone(), |m| m.max(ca.clone()));
                    let next = pts.range((Excluded(&lower), Unbounded)).next().map(|(c, _)| c.clone());
                    (Interval::new(Some(lower), min_opt(min_opt(mhi, next), cut)), Lean::High)
                }
                (true, false) => {
                    let upper = mhi.map_or(ca.clone(), |m| m.min(ca.clone()));
                    let prev = pts.range((Unbounded, Excluded(&upper))).next_back().map(|(c, _)| c.clone());
                    (Interval::new(max_opt(max_opt(mlo, prev), cut), Some(upper)), Lean::Low)
                }
                (false, true) => {
                    let upper = mhi.map_or(ca.clone(), |m| m.min(ca.clone()));
                    let prev = pts.range((Unbounded, Excluded(&upper))).next_back().map(|(c, _)| c.clone());
                    (Interval::new(max_opt(max_opt(mlo, prev), cut), Some(upper)), Lean::Low)
                }
                (false, false) => {
                    let lower = mlo.map_or(ca.clone(), |m| m.max(ca.clone()));
                    let next = pts.range((Excluded(&lower), Unbounded)).next().map(|(c, _)| c.clone());
                    (Interval::new(Some(lower), min_opt(min_opt(mhi, next), cut)), Lean::High)
                }
            };
            bounds[o] = iv;
            leans[o] = lean;
        }
        // Interior points of a cofinal profile move in a seeded random direction.
        for o in coins {
            if self.u.rng().gen_bool(0.5) {
                continue;
            }
            let l = self.lazy(id);
            let src = if forward { &l.dom[o] } else { &l.img[o] };
            let ca = self.u.coord(a, o).clone();
            let lo = src.range((Unbounded, Excluded(&ca))).next_back().map(|(_, x)| *x);
            let hi = src.range((Excluded(&ca), Unbounded)).next().map(|(_, x)| *x);
            let mlo = lo.map(|x| self.u.coord(map.get(x).unwrap(), o).clone());
            let mhi = hi.map(|x| self.u.coord(map.get(x).unwrap(), o).clone());
            let pts = &l.pts[o];
            if forward {
                let upper = mhi.map_or(ca.clone(), |m| m.min(ca.clone()));
                let prev = pts.range((Unbounded, Excluded(&upper))).next_back().map(|(c, _)| c.clone());
                bounds[o] = Interval::new(max_opt(mlo, prev), Some(upper));
                leans[o] = Lean::Low;
            } else {
                let lower = mlo.map_or(ca.clone(), |m| m.max(ca.clone()));
                let next = pts.range((Excluded(&lower), Unbounded)).next().map(|(c, _)| c.clone());
                bounds[o] = Interval::new(Some(lower), min_opt(mhi, next));
                leans[o] = Lean::High;
            }
        }
        let e = match self.u.realize(&q, &[bounds], &leans) {
            Ok(v) => v[0],
            Err(Error::IntervalClash { .. }) => return Err(Error::ProfileDeadlock(a)),
            Err(e) => return Err(e),
        };
        if forward {
            self.record(id, a, e)?;
        } else {
            self.record(id, e, a)?;
        }
        Ok(e)
    }

    pub fn apply(&mut self, id: AutoId, x: Id) -> Result<Id> {
        self.check(id)?;
        match &self.autos[id].body {
            Body::Lazy(l) => match l.map.get(x) {
                Some(y) => Ok(y),
                None => self.extend(id, x, true),
            },
            Body::Word(ls) => {
                let ls = ls.clone();
                let mut y = x;
                for l in ls.iter().rev() {
                    y = self.apply_letter(*l, y, false)?;
                }
                Ok(y)
            }
        }
    }

    pub fn apply_inverse(&mut self, id: AutoId, x: Id) -> Result<Id> {
        self.check(id)?;
        match &self.autos[id].body {
            Body::Lazy(l) => match l.map.get_inverse(x) {
                Some(y) => Ok(y),
                None => self.extend(id, x, false),
            },
            Body::Word(ls) => {
                let ls = ls.clone();
                let mut y = x;
                for l in &ls {
                    y = self.apply_letter(*l, y, true)?;
                }
                Ok(y)
            }
        }
    }

    pub fn apply_exp(&mut self, id: AutoId, x: Id, e: i8) -> Result<Id> {
        if e > 0 {
            self.apply(id, x)
        } else {
            self.apply_inverse(id, x)
        }
    }

    /// `g^k(x)` for any integer `k`.
    pub fn pow(&mut self, id: AutoId, x: Id, k: i64) -> Result<Id> {
        let mut y = x;
        for _ in 0..k.unsigned_abs() {
            y = self.apply_exp(id, y, if k > 0 { 1 } else { -1 })?;
        }
        Ok(y)
    }

    fn apply_letter(&mut self, l: Letter, x: Id, invert: bool) -> Result<Id> {
        let e = if invert { -l.exp } else { l.exp };
        match l.conj {
            None => self.apply_exp(l.gen, x, e),
            Some((c, ce)) => {
                let y = self.apply_exp(c, x, -ce)?;
                let y = self.apply_exp(l.gen, y, e)?;
                self.apply_exp(c, y, ce)
            }
        }
    }

    /// The image of `x` if already determined; never extends anything.
    pub fn peek(&self, id: AutoId, x: Id) -> Option<Id> {
        self.peek_exp(id, x, 1)
    }

    pub fn peek_inverse(&self, id: AutoId, x: Id) -> Option<Id> {
        self.peek_exp(id, x, -1)
    }

    fn peek_exp(&self, id: AutoId, x: Id, e: i8) -> Option<Id> {
        match &self.autos.get(id)?.body {
            Body::Lazy(l) if l.identity => Some(x),
            Body::Lazy(l) => {
                if e > 0 {
                    l.map.get(x)
                } else {
                    l.map.get_inverse(x)
                }
            }
            Body::Word(ls) => {
                let mut y = x;
                let step = |l: &Letter, y: Id| -> Option<Id> {
                    let le = if e > 0 { l.exp } else { -l.exp };
                    match l.conj {
                        None => self.peek_exp(l.gen, y, le),
                        Some((c, ce)) => {
                            let y = self.peek_exp(c, y, -ce)?;
                            let y = self.peek_exp(l.gen, y, le)?;
                            self.peek_exp(c, y, ce)
                        }
                    }
                };
                if e > 0 {
                    for l in ls.iter().rev() {
                        y = step(l, y)?;
                    }
                } else {
                    for l in ls {
                        y = step(l, y)?;
                    }
                }
                Some(y)
            }
        }
    }

    /// The word as a product of base (lazy) maps, written left to right.
    pub fn expand(&self, id: AutoId) -> Vec<(AutoId, i8)> {
        match &self.autos[id].body {
            Body::Lazy(_) => vec![(id, 1)],
            Body::Word(ls) => {
                let mut out = Vec::new();
                for l in ls {
                    let g = power(self.expand(l.gen), l.exp);
                    match l.conj {
                        None => out.extend(g),
                        Some((c, ce)) => {
                            let cw = power(self.expand(c), ce);
                            out.extend(cw.iter().copied());
                            out.extend(g);
                            out.extend(power(cw, -1));
                        }
                    }
                }
                out
            }
        }
    }

    /// The word with each letter shown as a conjugate of a generator power.
    pub fn conjugate_form(&self, id: AutoId) -> ConjugateForm {
        match &self.autos[id].body {
            Body::Lazy(_) => vec![(id, 1, vec![])],
            Body::Word(ls) => {
                let mut out = Vec::new();
                for l in ls {
                    let mut inner = self.conjugate_form(l.gen);
                    if l.exp < 0 {
                        inner.reverse();
                        for x in &mut inner {
                            x.1 = -x.1;
                        }
                    }
                    if let Some((c, ce)) = l.conj {
                        let cw = power(self.expand(c), ce);
                        for x in &mut inner {
                            let mut k = cw.clone();
                            k.extend(x.2.iter().copied());
                            x.2 = k;
                        }
                    }
                    out.extend(inner);
                }
                out
            }
        }
    }

    /// Human readable form; words are expanded into base generators.
    pub fn display(&self, id: AutoId) -> String {
        let a = &self.autos[id];
        match &a.body {
            Body::Lazy(_) => a.name.clone(),
            Body::Word(ls) => ls
                .iter()
                .map(|l| {
                    let g = self.display_pow(l.gen, l.exp);
                    match l.conj {
                        None => g,
                        Some((c, ce)) => {
                            format!("{} {} {}", self.display_pow(c, ce), g, self.display_pow(c, -ce))
                        }
                    }
                })
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    fn display_pow(&self, id: AutoId, e: i8) -> String {
        let inner = self.display(id);
        let compound = self.is_word(id) && inner.contains(' ');
        match (compound, e > 0) {
            (false, true) => inner,
            (false, false) => format!("{inner}^-1"),
            (true, true) => format!("({inner})"),
            (true, false) => format!("({inner})^-1"),
        }
    }

    pub fn label(&self, id: AutoId) -> String {
        self.autos[id].label.clone().unwrap_or_else(|| self.display(id))
    }

    /// The profile on `order`: declared if present, else derived from the letters.
    pub fn profile(&mut self, id: AutoId, order: usize) -> Result<OrderProfile> {
        self.check(id)?;
        if let Some(p) = &self.autos[id].declared[order] {
            return Ok(p.clone());
        }
        let ls = match &self.autos[id].body {
            Body::Lazy(l) if l.identity => return Ok(OrderProfile::plain(Tag::Identity)),
            Body::Lazy(l) => return Ok(l.profile[order].clone()),
            Body::Word(ls) => ls.clone(),
        };
        let mut ps = Vec::with_capacity(ls.len());
        for l in ls {
            let mut p = self.profile(l.gen, order)?;
            if l.exp < 0 {
                p = self.invert_profile(l.gen, p)?;
            }
            if let Some((c, ce)) = l.conj {
                p.cut = None;
                if let Some(y) = p.above {
                    p.above = Some(self.apply_exp(c, y, ce)?);
                }
                if let Some(z) = p.below {
                    p.below = Some(self.apply_exp(c, z, ce)?);
                }
            }
            ps.push(p);
        }
        Ok(self.product_profile(ps, order))
    }

    fn invert_profile(&mut self, g: AutoId, mut p: OrderProfile) -> Result<OrderProfile> {
        p.tag = p.tag.inverse();
        if let Some(y) = p.above {
            p.above = Some(self.apply(g, y)?);
        }
        if let Some(z) = p.below {
            p.below = Some(self.apply(g, z)?);
        }
        Ok(p)
    }

    fn product_profile(&self, ps: Vec<OrderProfile>, o: usize) -> OrderProfile {
        let ps: Vec<OrderProfile> = ps.into_iter().filter(|p| p.tag != Tag::Identity).collect();
        if ps.is_empty() {
            return OrderProfile::plain(Tag::Identity);
        }
        if ps.len() == 1 {
            return ps[0].clone();
        }
        let all = |f: &dyn Fn(Tag) -> bool| ps.iter().all(|p| f(p.tag));
        if all(&|t| t == Tag::SinglePlusOrbital) {
            return OrderProfile::plain(Tag::SinglePlusOrbital);
        }
        if all(&|t| matches!(t, Tag::SinglePlusOrbital | Tag::StrictlyUp)) {
            return OrderProfile::plain(Tag::StrictlyUp);
        }
        if all(&|t| t == Tag::StrictlyDown) {
            return OrderProfile::plain(Tag::StrictlyDown);
        }
        for t in [Tag::UpAboveDownBelow, Tag::DownAboveUpBelow] {
            if all(&|s| s == t) && ps.iter().all(|p| p.above.is_some() && p.below.is_some()) {
                let c = |x: &Id| self.u.coord(*x, o).clone();
                let above = ps.iter().filter_map(|p| p.above).max_by_key(c);
                let below = ps.iter().filter_map(|p| p.below).min_by_key(c);
                let cut = ps[0].cut.clone().filter(|k| ps.iter().all(|p| p.cut.as_ref() == Some(k)));
                return OrderProfile { tag: t, above, below, cut };
            }
        }
        OrderProfile::plain(Tag::Unconstrained)
    }

    pub fn to_json(&self, id: AutoId) -> Value {
        let a = &self.autos[id];
        let declared: Vec<Value> =
            a.declared.iter().map(|d| d.as_ref().map_or(Value::Null, |p| p.to_json())).collect();
        match &a.body {
            Body::Lazy(l) => json!({
                "name": a.name,
                "kind": "lazy",
                "profile": l.profile.iter().map(|p| p.to_json()).collect::<Vec<_>>(),
                "pairs": l.log,
            }),
            Body::Word(_) => json!({
                "name": a.name,
                "kind": "word",
                "word": self.label(id),
                "expanded": self
                    .expand(id)
                    .iter()
                    .map(|(g, e)| json!([self.name(*g), e]))
                    .collect::<Vec<_>>(),
                "declared": declared,
            }),
        }
    }
}

fn min_opt(a: Option<Coord>, b: Option<Coord>) -> Option<Coord> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

fn max_opt(a: Option<Coord>, b: Option<Coord>) -> Option<Coord> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

fn power(mut w: Vec<(AutoId, i8)>, e: i8) -> Vec<(AutoId, i8)> {
    if e < 0 {
        w.reverse();
        for x in &mut w {
            x.1 = -x.1;
        }
    }
    w
}

/// Whether a profile forces the displacement asked for on the given side.
pub fn displacement_allowed(tag: Tag, side: Side, dir: Dir) -> bool {
    use Tag::*;
    match (side, dir) {
        (Side::Above, Dir::Up) => {
            matches!(tag, StrictlyUp | CofinallyUp | UpAboveDownBelow | SinglePlusOrbital)
        }
        (Side::Above, Dir::Down) => matches!(tag, StrictlyDown | CofinallyDown | DownAboveUpBelow),
        (Side::Below, Dir::Up) => {
            matches!(tag, StrictlyUp | CofinallyUp | DownAboveUpBelow | SinglePlusOrbital)
        }
        (Side::Below, Dir::Down) => matches!(tag, StrictlyDown | CofinallyDown | UpAboveDownBelow),
    }
}

const CANDIDATE_BUDGET: usize = 64;

/// Realizes the one-sided 1-type `p` beyond `y` and its parameters on `order`,
/// at a point that `g` moves in direction `dir`.
pub fn realize_moving(
    lab: &mut Lab,
    g: AutoId,
    p: &TypeDescriptor,
    side: Side,
    dir: Dir,
    y: Option<Id>,
    order: usize,
) -> Result<Id> {
    let n = lab.universe().num_orders();
    realize_moving_within(lab, g, p, side, dir, y, order, &vec![Interval::all(); n])
}

/// As [`realize_moving`], additionally inside `bounds` (one interval per order).
#[allow(clippy::too_many_arguments)]
pub fn realize_moving_within(
    lab: &mut Lab,
    g: AutoId,
    p: &TypeDescriptor,
    side: Side,
    dir: Dir,
    y: Option<Id>,
    order: usize,
    bounds: &[Interval],
) -> Result<Id> {
    let prof = lab.profile(g, order)?;
    if !displacement_allowed(prof.tag, side, dir) {
        return Err(Error::ProfileMismatch(format!(
            "{} cannot move points {} {}",
            prof.tag,
            match side {
                Side::Above => "above",
                Side::Below => "below",
            },
            match dir {
                Dir::Up => "up",
                Dir::Down => "down",
            }
        )));
    }
    if p.num_vars != 1 {
        return Err(Error::Unrealizable("realize_moving needs a 1-type".into()));
    }
    let list = &p.orders[order];
    let one_sided = match side {
        Side::Above => list.last() == Some(&Term::Var(0)),
        Side::Below => list.first() == Some(&Term::Var(0)),
    };
    if !one_sided {
        return Err(Error::HypothesisUnmet("type is not one-sided over its parameters".into()));
    }
    let mut bounds = bounds.to_vec();
    if let Some(y) = y {
        let c = lab.universe().coord(y, order).clone();
        bounds[order] = bounds[order].intersect(&match side {
            Side::Above => Interval::above(c),
            Side::Below => Interval::below(c),
        });
    }
    realize_displaced(lab, g, p, dir, order, &bounds)
}

/// Realizes the 1-type `p` inside `bounds` at a point that `g` moves in
/// direction `dir` on `order`, by inserting it between some `z` of its gap and `g z`.
pub fn realize_displaced(
    lab: &mut Lab,
    g: AutoId,
    p: &TypeDescriptor,
    dir: Dir,
    order: usize,
    bounds: &[Interval],
) -> Result<Id> {
    if p.num_vars != 1 {
        return Err(Error::Unrealizable("realize_displaced needs a 1-type".into()));
    }
    let u = lab.universe();
    let list = &p.orders[order];
    let pos = list.iter().position(|t| *t == Term::Var(0)).unwrap();
    let coord = |t: &Term| match t {
        Term::Param(x) => u.coord(*x, order).clone(),
        Term::Var(_) => unreachable!(),
    };
    let gap = Interval::new(
        pos.checked_sub(1).map(|i| coord(&list[i])),
        list.get(pos + 1).map(coord),
    )
    .intersect(&bounds[order]);
    if gap.is_empty() {
        return Err(Error::IntervalClash { order });
    }
    let up = dir == Dir::Up;
    let moves = |lab: &Lab, z: Id, gz: Id| {
        let u = lab.universe();
        sign_ok(up, u.coord(z, order), u.coord(gz, order))
    };
    let mut candidates: Vec<Id> =
        u.order_index(order).iter().filter(|(c, _)| gap.contains(c)).map(|(_, x)| *x).collect();
    let downward = gap.lo.is_none() && gap.hi.is_some();
    if downward {
        candidates.reverse();
    }
    let mut found = candidates
        .iter()
        .filter_map(|z| lab.peek(g, *z).map(|gz| (*z, gz)))
        .find(|(z, gz)| moves(lab, *z, *gz));
    if found.is_none() {
        let n = lab.universe().num_orders();
        let mut fresh = vec![Interval::all(); n];
        fresh[order] = gap.clone();
        let mut leans = vec![Lean::Low; n];
        if !downward {
            leans[order] = Lean::High;
        }
        let z = lab.universe_mut().realize(&TypeDescriptor::trivial(n), &[fresh], &leans)?[0];
        let gz = lab.apply(g, z)?;
        if moves(lab, z, gz) {
            found = Some((z, gz));
        }
    }
    if found.is_none() {
        for z in candidates.into_iter().take(CANDIDATE_BUDGET) {
            let gz = lab.apply(g, z)?;
            if moves(lab, z, gz) {
                found = Some((z, gz));
                break;
            }
        }
    }
    let (z, gz) = found.ok_or_else(|| {
        Error::ProfileMismatch("no materialized point with the required displacement".into())
    })?;
    let u = lab.universe();
    let (a, b) = (u.coord(z, order).clone(), u.coord(gz, order).clone());
    let iv = Interval::new(Some(a.clone().min(b.clone())), Some(a.max(b)));
    let mut bounds = bounds.to_vec();
    bounds[order] = gap.intersect(&iv);
    lab.universe_mut().insert_between(p, &bounds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitSign {
    Plus,
    Minus,
    Fixed,
}

/// How far an orbit was seen to extend in one direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Extent {
    Bounded(Id),
    /// Passed every element materialized before the scan after `steps` steps.
    Witnessed { witness: Id, steps: usize },
    Unknown,
}

impl Extent {
    fn to_json(&self) -> Value {
        match self {
            Extent::Bounded(a) => json!({ "bounded": a }),
            Extent::Witnessed { witness, steps } => json!({ "witnessed": witness, "steps": steps }),
            Extent::Unknown => json!("unknown"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitalReport {
    pub sign: OrbitSign,
    pub sign_constant: bool,
    pub above: Extent,
    pub below: Extent,
    pub depth: usize,
}

impl OrbitalReport {
    pub fn to_json(&self) -> Value {
        json!({
            "sign": match self.sign {
                OrbitSign::Plus => "+",
                OrbitSign::Minus => "-",
                OrbitSign::Fixed => "fixed",
            },
            "sign_constant": self.sign_constant,
            "above": self.above.to_json(),
            "below": self.below.to_json(),
            "depth": self.depth,
        })
    }
}

/// Follows the orbit of `a` for `depth` steps each way on `order`.
pub fn classify_orbital(
    lab: &mut Lab,
    g: AutoId,
    a: Id,
    order: usize,
    depth: usize,
) -> Result<OrbitalReport> {
    let u = lab.universe();
    if !u.contains(a) {
        return Err(Error::UnknownElement(a));
    }
    let top = u.max_element(order).map(|x| u.coord(x, order).clone());
    let bottom = u.min_element(order).map(|x| u.coord(x, order).clone());
    let mut fwd = vec![a];
    let mut bwd = vec![a];
    for _ in 0..depth {
        let x = lab.apply(g, *fwd.last().unwrap())?;
        fwd.push(x);
        let x = lab.apply_inverse(g, *bwd.last().unwrap())?;
        bwd.push(x);
    }
    let u = lab.universe();
    let c = |x: Id| u.coord(x, order);
    let sign = match c(fwd[1]).cmp(c(a)) {
        std::cmp::Ordering::Greater => OrbitSign::Plus,
        std::cmp::Ordering::Less => OrbitSign::Minus,
        std::cmp::Ordering::Equal => OrbitSign::Fixed,
    };
    let step_sign = |x: Id, gx: Id| c(gx).cmp(c(x));
    let first = step_sign(a, fwd[1]);
    let sign_constant = fwd.windows(2).all(|w| step_sign(w[0], w[1]) == first)
        && bwd.windows(2).all(|w| step_sign(w[1], w[0]) == first);
    if sign == OrbitSign::Fixed {
        return Ok(OrbitalReport {
            sign,
            sign_constant,
            above: Extent::Bounded(a),
            below: Extent::Bounded(a),
            depth,
        });
    }
    let (rising, falling) = if sign == OrbitSign::Plus { (&fwd, &bwd) } else { (&bwd, &fwd) };
    let above = rising
        .iter()
        .enumerate()
        .find(|(_, x)| top.as_ref().is_some_and(|t| c(**x) > t))
        .map_or(Extent::Unknown, |(i, x)| Extent::Witnessed { witness: *x, steps: i });
    let below = falling
        .iter()
        .enumerate()
        .find(|(_, x)| bottom.as_ref().is_some_and(|b| c(**x) < b))
        .map_or(Extent::Unknown, |(i, x)| Extent::Witnessed { witness: *x, steps: i });
    Ok(OrbitalReport { sign, sign_constant, above, below, depth })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FixedIntervalVerdict {
    Pass { intervals_checked: usize },
    /// `g` fixes `witness` inside `(x, y)` while sending `moved` to `image`,
    /// which no automorphism can do.
    Violation { x: Id, y: Id, moved: Id, image: Id, witness: Vec<Id> },
}

impl FixedIntervalVerdict {
    pub fn to_json(&self) -> Value {
        match self {
            FixedIntervalVerdict::Pass { intervals_checked } => {
                json!({ "verdict": "pass", "intervals_checked": intervals_checked })
            }
            FixedIntervalVerdict::Violation { x, y, moved, image, witness } => json!({
                "verdict": "violation",
                "interval": [x, y],
                "moved": moved,
                "image": image,
                "witness": witness,
            }),
        }
    }
}

/// Tests on the materialized fragment that `g` does not fix an interval
/// pointwise while moving some point: inside each sampled interval whose known
/// points are fixed, realizes a tuple related to a moved point `b` but not to
/// `g(b)` and checks that `g` cannot fix that tuple.
pub fn check_no_fixed_interval(lab: &mut Lab, g: AutoId, samples: usize) -> Result<FixedIntervalVerdict> {
    lab.check(g)?;
    let sig = lab.universe().spec().signature.clone();
    let Some(sym) = (0..sig.relations.len()).find(|s| sig.arity(*s) >= 2) else {
        return Err(Error::LemmaInapplicable("the signature has no relation of arity at least 2".into()));
    };
    let n = lab.universe().num_orders();
    if (0..n).all(|o| lab.profile(g, o).is_ok_and(|p| p.tag == Tag::Identity)) {
        return Ok(FixedIntervalVerdict::Pass { intervals_checked: 0 });
    }
    let mut known: Vec<(Id, Id)> = match lab.support(g) {
        Some(m) => m.pairs().collect(),
        None => {
            let ids: Vec<Id> = lab.universe().order_index(0).values().copied().take(samples.max(2)).collect();
            let mut v = Vec::new();
            for x in ids {
                v.push((x, lab.apply(g, x)?));
            }
            v
        }
    };
    let (b, c) = match known.iter().find(|(x, y)| x != y) {
        Some(p) => *p,
        None => {
            let z = lab.universe_mut().realize(&TypeDescriptor::trivial(n), &[], &vec![Lean::High; n])?[0];
            let gz = lab.apply(g, z)?;
            if gz == z {
                return Ok(FixedIntervalVerdict::Pass { intervals_checked: 0 });
            }
            known.push((z, gz));
            (z, gz)
        }
    };
    known.sort_by(|p, q| lab.universe().coord(p.0, 0).cmp(lab.universe().coord(q.0, 0)));
    let mut intervals = Vec::new();
    for i in 0..known.len() {
        if intervals.len() >= samples {
            break;
        }
        let mut j = i + 1;
        while j + 1 < known.len() && known[j].0 == known[j].1 {
            j += 1;
        }
        if j < known.len() {
            intervals.push((known[i].0, known[j].0));
        }
    }
    let arity = sig.arity(sym);
    let mut checked = 0;
    for (x, y) in intervals {
        let u = lab.universe();
        let mut params: Vec<Id> = vec![x, y, b, c];
        params.sort_unstable();
        params.dedup();
        let vars = arity - 1;
        let mut ts: Vec<Term> = (0..vars).map(Term::Var).collect();
        ts.push(Term::Param(b));
        let atom = canonical_atom(sym, ts, u.spec().symmetric);
        let orders = (0..n)
            .map(|o| {
                let mut ps = params.clone();
                ps.sort_by(|p, q| u.coord(*p, o).cmp(u.coord(*q, o)));
                let mut list: Vec<Term> = Vec::new();
                for p in ps {
                    list.push(Term::Param(p));
                    if o == 0 && p == x {
                        list.extend((0..vars).map(Term::Var));
                    }
                }
                if o != 0 {
                    list.extend((0..vars).map(Term::Var));
                }
                list
            })
            .collect();
        let p = TypeDescriptor { params, num_vars: vars, atoms: [atom].into(), orders };
        let abar = match lab.universe_mut().realize(&p, &[], &[]) {
            Ok(v) => v,
            Err(Error::Unrealizable(_)) => continue,
            Err(e) => return Err(e),
        };
        checked += 1;
        let mut fixed = true;
        for a in &abar {
            match lab.apply(g, *a) {
                Ok(ga) if ga == *a => {}
                Ok(_) => fixed = false,
                Err(Error::ProfileDeadlock(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if fixed {
            return Ok(FixedIntervalVerdict::Violation { x, y, moved: b, image: c, witness: abar });
        }
    }
    Ok(FixedIntervalVerdict::Pass { intervals_checked: checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraisse::ClassSpec;
    use crate::structure::is_partial_isomorphism;

    fn lab(spec: ClassSpec, seed: u64, grow: usize) -> Lab {
        let mut u = Universe::new(spec, seed);
        u.grow_random(grow);
        Lab::new(u)
    }

    #[test]
    fn strictly_up_moves_everything_up() {
        let mut l = lab(ClassSpec::random_graph(1), 3, 12);
        let g = l.synthesize("g", &[Tag::StrictlyUp]).unwrap();
        let ids: Vec<Id> = l.universe().ids().collect();
        for x in ids {
            let gx = l.apply(g, x).unwrap();
            assert!(l.universe().less(x, 0, gx));
            assert_eq!(l.apply_inverse(g, gx).unwrap(), x);
        }
        let m = l.support(g).unwrap().clone();
        assert!(is_partial_isomorphism(l.universe().structure(), &m).unwrap());
        assert_eq!(l.profile_violation(g), None);
    }

    #[test]
    fn threshold_profile_respects_cut() {
        let mut l = lab(ClassSpec::k3_free(1), 5, 15);
        let g = l.synthesize("g", &[Tag::UpAboveDownBelow]).unwrap();
        let ids: Vec<Id> = l.universe().ids().collect();
        for x in ids {
            l.apply(g, x).unwrap();
            l.apply_inverse(g, x).unwrap();
        }
        assert_eq!(l.profile_violation(g), None);
        let m = l.support(g).unwrap().clone();
        assert!(is_partial_isomorphism(l.universe().structure(), &m).unwrap());
    }

    #[test]
    fn identity_must_cover_all_orders() {
        let mut l = lab(ClassSpec::pure_orders(2), 1, 0);
        assert!(l.synthesize("g", &[Tag::Identity, Tag::StrictlyUp]).is_err());
        let g = l.synthesize("g", &[Tag::Identity, Tag::Identity]).unwrap();
        let x = l.universe_mut().grow_random(1)[0];
        assert_eq!(l.apply(g, x).unwrap(), x);
    }

    #[test]
    fn word_application_composes_letters() {
        let mut l = lab(ClassSpec::random_graph(1), 9, 8);
        let g = l.synthesize("g", &[Tag::CofinallyUp]).unwrap();
        let h = l.partial("h", &[]).unwrap();
        let w = l.word("w", vec![Letter::new(g, 1), Letter::conj(g, 1, h, -1)]).unwrap();
        let ids: Vec<Id> = l.universe().ids().collect();
        for x in ids {
            let wx = l.apply(w, x).unwrap();
            let mut y = l.apply(h, x).unwrap();
            y = l.apply(g, y).unwrap();
            y = l.apply_inverse(h, y).unwrap();
            y = l.apply(g, y).unwrap();
            assert_eq!(wx, y);
            assert_eq!(l.peek(w, x), Some(wx));
            assert_eq!(l.apply_inverse(w, wx).unwrap(), x);
        }
        assert_eq!(l.expand(w), vec![(g, 1), (h, -1), (g, 1), (h, 1)]);
        assert_eq!(l.display(w), "g h^-1 g h");
        let forms = l.conjugate_form(w);
        assert!(forms.iter().all(|(b, _, _)| *b == g));
    }

    #[test]
    fn profile_algebra() {
        let mut l = lab(ClassSpec::pure_orders(1), 2, 4);
        let g = l.synthesize("g", &[Tag::StrictlyUp]).unwrap();
        let h = l.partial("h", &[]).unwrap();
        let w = l.word("w", vec![Letter::new(g, 1), Letter::conj(g, 1, h, -1)]).unwrap();
        assert_eq!(l.profile(w, 0).unwrap().tag, Tag::StrictlyUp);
        let v = l.word("v", vec![Letter::new(g, 1), Letter::new(g, -1)]).unwrap();
        assert_eq!(l.profile(v, 0).unwrap().tag, Tag::Unconstrained);
        let gi = l.inverse(g).unwrap();
        assert_eq!(l.profile(gi, 0).unwrap().tag, Tag::StrictlyDown);
        let t = l.synthesize("t", &[Tag::UpAboveDownBelow]).unwrap();
        let c = l.word("c", vec![Letter::conj(t, 1, h, 1), Letter::new(t, 1)]).unwrap();
        let p = l.profile(c, 0).unwrap();
        assert_eq!(p.tag, Tag::UpAboveDownBelow);
        assert!(p.above.is_some() && p.below.is_some());
        let ti = l.inverse(t).unwrap();
        assert_eq!(l.profile(ti, 0).unwrap().tag, Tag::DownAboveUpBelow);
    }

    #[test]
    fn explicit_pairs_must_be_isomorphic() {
        let mut u = Universe::new(ClassSpec::random_graph(1), 1);
        let a = u.add_element(vec![rat(0)]).unwrap();
        let b = u.add_element(vec![rat(1)]).unwrap();
        let c = u.add_element(vec![rat(2)]).unwrap();
        u.add_edge(a, b).unwrap();
        let mut l = Lab::new(u);
        let h = l.partial("h", &[(a, a)]).unwrap();
        assert!(l.set_pair(h, b, c).is_err());
        l.set_pair(h, c, c).unwrap();
        assert!(l.set_pair(h, b, b).is_ok());
    }

    #[test]
    fn realize_moving_checks_table() {
        let mut l = lab(ClassSpec::random_graph(1), 4, 10);
        let g = l.synthesize("g", &[Tag::UpAboveDownBelow]).unwrap();
        let p = TypeDescriptor::trivial(1);
        let a = realize_moving(&mut l, g, &p, Side::Above, Dir::Up, None, 0).unwrap();
        let ga = l.apply(g, a).unwrap();
        assert!(l.universe().less(a, 0, ga));
        let b = realize_moving(&mut l, g, &p, Side::Below, Dir::Down, None, 0).unwrap();
        let gb = l.apply(g, b).unwrap();
        assert!(l.universe().less(gb, 0, b));
        assert!(matches!(
            realize_moving(&mut l, g, &p, Side::Above, Dir::Down, None, 0),
            Err(Error::ProfileMismatch(_))
        ));
    }

    #[test]
    fn orbital_of_strictly_up_map() {
        let mut l = lab(ClassSpec::random_graph(1), 6, 10);
        let g = l.synthesize("g", &[Tag::StrictlyUp]).unwrap();
        let a = l.universe().ids().next().unwrap();
        let r = classify_orbital(&mut l, g, a, 0, 10).unwrap();
        assert_eq!(r.sign, OrbitSign::Plus);
        assert!(r.sign_constant);
        assert!(matches!(r.above, Extent::Witnessed { .. }));
    }

    #[test]
    fn fixed_interval_detection() {
        let mut u = Universe::new(ClassSpec::random_graph(1), 2);
        let ids: Vec<Id> = (0..6).map(|i| u.add_element(vec![rat(i)]).unwrap()).collect();
        let mut l = Lab::new(u);
        let h = l
            .partial("h", &[(ids[0], ids[0]), (ids[1], ids[1]), (ids[2], ids[2]), (ids[4], ids[5])])
            .unwrap();
        l.fix_interval(h, ids[0], ids[2]).unwrap();
        let v = check_no_fixed_interval(&mut l, h, 4).unwrap();
        assert!(matches!(v, FixedIntervalVerdict::Violation { moved, .. } if moved == ids[4]));

        let mut l = lab(ClassSpec::random_graph(1), 2, 10);
        let g = l.synthesize("g", &[Tag::CofinallyUp]).unwrap();
        let xs: Vec<Id> = l.universe().ids().collect();
        for x in xs {
            l.apply(g, x).unwrap();
        }
        assert!(matches!(check_no_fixed_interval(&mut l, g, 8).unwrap(), FixedIntervalVerdict::Pass { .. }));

        let mut l = lab(ClassSpec::pure_orders(1), 2, 4);
        let g = l.synthesize("g", &[Tag::StrictlyUp]).unwrap();
        assert!(matches!(check_no_fixed_interval(&mut l, g, 4), Err(Error::LemmaInapplicable(_))));
    }
}
