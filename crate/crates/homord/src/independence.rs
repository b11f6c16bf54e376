//! Independence relations on finite subsets of a universe and an exhaustive
//! checker for the stationary weak independence axioms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fraisse::{ClassSpec, Lean, Universe};
use crate::structure::{is_partial_isomorphism, Id, PartialMap};
use crate::types::{type_of, Term};

type LocalType = (Vec<Vec<Term>>, Vec<(usize, Vec<Term>)>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelationKind {
    FreeSwir,
    LiftedSwir,
    MultiOrderSwir,
    /// The order clause on a single (0-based) order.
    PerOrder(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependenceRelation {
    pub kind: RelationKind,
    /// Orders read in reverse.
    pub reversed: BTreeSet<usize>,
    /// Mutation switch: ignore every order clause.
    pub drop_order_clause: bool,
}

impl IndependenceRelation {
    pub fn new(kind: RelationKind) -> Self {
        IndependenceRelation { kind, reversed: BTreeSet::new(), drop_order_clause: false }
    }

    pub fn free() -> Self {
        Self::new(RelationKind::FreeSwir)
    }

    pub fn lifted() -> Self {
        Self::new(RelationKind::LiftedSwir)
    }

    pub fn multi_order() -> Self {
        Self::new(RelationKind::MultiOrderSwir)
    }

    pub fn per_order(k: usize) -> Self {
        Self::new(RelationKind::PerOrder(k))
    }

    /// The relation the constructions use on universes of this class.
    pub fn natural(spec: &ClassSpec) -> Result<Self> {
        let r = if spec.is_pure_orders() {
            Self::multi_order()
        } else if spec.num_orders() == 0 {
            Self::free()
        } else {
            Self::lifted()
        };
        r.check_applicable(spec)?;
        Ok(r)
    }

    pub fn reversing(mut self, orders: impl IntoIterator<Item = usize>) -> Self {
        self.reversed.extend(orders);
        self
    }

    pub fn without_order_clause(mut self) -> Self {
        self.drop_order_clause = true;
        self
    }

    pub fn check_applicable(&self, spec: &ClassSpec) -> Result<()> {
        let n = spec.num_orders();
        let bad = |m: String| Err(Error::RelationNotApplicable(m));
        match self.kind {
            RelationKind::FreeSwir if n != 0 || !spec.is_free() => {
                bad("free relation needs an unordered free class".into())
            }
            RelationKind::LiftedSwir if n != 1 || !spec.is_free() => {
                bad("lifted relation needs one order over a free class".into())
            }
            RelationKind::MultiOrderSwir if !spec.is_pure_orders() => {
                bad("multi-order relation needs a pure order class".into())
            }
            RelationKind::PerOrder(k) if k >= n => bad(format!("order {} does not exist", k + 1)),
            _ => {
                if let Some(o) = self.reversed.iter().find(|o| **o >= n) {
                    return bad(format!("cannot reverse missing order {}", o + 1));
                }
                Ok(())
            }
        }
    }

    pub(crate) fn clause_orders(&self, n: usize) -> Vec<usize> {
        if self.drop_order_clause {
            return vec![];
        }
        match self.kind {
            RelationKind::FreeSwir => vec![],
            RelationKind::LiftedSwir => vec![0],
            RelationKind::MultiOrderSwir => (0..n).collect(),
            RelationKind::PerOrder(k) => vec![k],
        }
    }

    pub(crate) fn has_free_clause(&self) -> bool {
        matches!(self.kind, RelationKind::FreeSwir | RelationKind::LiftedSwir)
    }

    /// Lean that places fresh points on the far side of their gap from any
    /// later point `c` that must not precede them unseparated.
    pub(crate) fn independent_lean(&self, order: usize) -> Lean {
        if self.reversed.contains(&order) {
            Lean::Low
        } else {
            Lean::High
        }
    }
}

impl fmt::Display for IndependenceRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RelationKind::FreeSwir => write!(f, "free")?,
            RelationKind::LiftedSwir => write!(f, "lifted")?,
            RelationKind::MultiOrderSwir => write!(f, "multi-order")?,
            RelationKind::PerOrder(k) => write!(f, "order-{}", k + 1)?,
        }
        if !self.reversed.is_empty() {
            let r: Vec<String> = self.reversed.iter().map(|o| (o + 1).to_string()).collect();
            write!(f, " reversed {{{}}}", r.join(","))?;
        }
        if self.drop_order_clause {
            write!(f, " without order clause")?;
        }
        Ok(())
    }
}

/// Bitmask view of at most 64 elements with precomputed order and relation data.
pub(crate) struct Frame {
    pub ids: Vec<Id>,
    pub pos: BTreeMap<Id, usize>,
    num_orders: usize,
    rank: Vec<Vec<usize>>,
    related: Vec<u64>,
    between: Vec<Vec<u64>>,
    tuples: Vec<(usize, Vec<usize>)>,
}

impl Frame {
    pub fn new(u: &Universe, ids: impl IntoIterator<Item = Id>) -> Result<Frame> {
        let ids: Vec<Id> = ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if ids.len() > 64 {
            return Err(Error::InstanceTooLarge(format!("{} elements in one query", ids.len())));
        }
        if let Some(x) = ids.iter().find(|x| !u.contains(**x)) {
            return Err(Error::UnknownElement(*x));
        }
        let m = ids.len();
        let n = u.num_orders();
        let pos: BTreeMap<Id, usize> = ids.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let mut rank = vec![vec![0; m]; n];
        let mut between = vec![vec![0u64; m * m]; n];
        for o in 0..n {
            let mut sorted: Vec<usize> = (0..m).collect();
            sorted.sort_by(|a, b| u.coord(ids[*a], o).cmp(u.coord(ids[*b], o)));
            for (r, i) in sorted.iter().enumerate() {
                rank[o][*i] = r;
            }
            for (ra, a) in sorted.iter().enumerate() {
                let mut mask = 0u64;
                for b in &sorted[ra + 1..] {
                    between[o][a * m + b] = mask;
                    between[o][b * m + a] = mask;
                    mask |= 1 << b;
                }
            }
        }
        let mut related = vec![0u64; m];
        let mut tuples = BTreeSet::new();
        for (i, x) in ids.iter().enumerate() {
            for (s, t) in u.tuples_of(*x) {
                if let Some(ix) = t.iter().map(|y| pos.get(y).copied()).collect::<Option<Vec<_>>>() {
                    for j in &ix {
                        if *j != i {
                            related[i] |= 1 << j;
                        }
                    }
                    tuples.insert((*s, ix));
                }
            }
        }
        Ok(Frame { ids, pos, num_orders: n, rank, related, between, tuples: tuples.into_iter().collect() })
    }

    pub fn mask<'a>(&self, set: impl IntoIterator<Item = &'a Id>) -> u64 {
        set.into_iter().fold(0, |m, x| m | (1 << self.pos[x]))
    }

    pub fn set(&self, mask: u64) -> BTreeSet<Id> {
        bits(mask).map(|i| self.ids[i]).collect()
    }

    fn less(&self, rel: &IndependenceRelation, o: usize, i: usize, j: usize) -> bool {
        if rel.reversed.contains(&o) {
            self.rank[o][j] < self.rank[o][i]
        } else {
            self.rank[o][i] < self.rank[o][j]
        }
    }

    pub fn indep(&self, rel: &IndependenceRelation, a: u64, b: u64, c: u64) -> bool {
        let a_ = a & !b;
        let c_ = c & !b;
        if a_ & c_ != 0 {
            return false;
        }
        if rel.has_free_clause() && bits(a_).any(|i| self.related[i] & c_ != 0) {
            return false;
        }
        let m = self.ids.len();
        for o in rel.clause_orders(self.num_orders) {
            for i in bits(a_) {
                for j in bits(c_) {
                    if self.less(rel, o, i, j) && self.between[o][i * m + j] & b == 0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Quantifier-free type of `tuple` over `params`, with parameters named by
    /// frame position.
    fn local_type(&self, tuple: &[usize], params: u64) -> LocalType {
        let term = |i: usize| -> Option<Term> {
            tuple
                .iter()
                .position(|x| *x == i)
                .map(Term::Var)
                .or_else(|| (params >> i & 1 == 1).then_some(Term::Param(i as Id)))
        };
        let mut members: Vec<usize> = tuple.to_vec();
        members.extend(bits(params));
        let orders = (0..self.num_orders)
            .map(|o| {
                let mut ms = members.clone();
                ms.sort_by_key(|i| self.rank[o][*i]);
                ms.into_iter().map(|i| term(i).unwrap()).collect()
            })
            .collect();
        let mut atoms: Vec<(usize, Vec<Term>)> = self
            .tuples
            .iter()
            .filter_map(|(s, t)| {
                let ts = t.iter().map(|i| term(*i)).collect::<Option<Vec<_>>>()?;
                ts.iter().any(|x| matches!(x, Term::Var(_))).then_some((*s, ts))
            })
            .collect();
        atoms.sort();
        (orders, atoms)
    }
}

pub(crate) fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

pub fn indep(
    u: &Universe,
    a: &BTreeSet<Id>,
    b: &BTreeSet<Id>,
    c: &BTreeSet<Id>,
    rel: &IndependenceRelation,
) -> Result<bool> {
    rel.check_applicable(u.spec())?;
    let f = Frame::new(u, a.iter().chain(b).chain(c).copied())?;
    Ok(f.indep(rel, f.mask(a), f.mask(b), f.mask(c)))
}

/// The conjunction of the single-order relations over every order.
pub fn indep_decompose(u: &Universe, a: &[Id], x: &BTreeSet<Id>, b: &[Id]) -> Result<bool> {
    if !u.spec().is_pure_orders() {
        return Err(Error::RelationNotApplicable("decomposition needs a pure order class".into()));
    }
    let (a, b): (BTreeSet<Id>, BTreeSet<Id>) = (a.iter().copied().collect(), b.iter().copied().collect());
    for k in 0..u.num_orders() {
        if !indep(u, &a, x, &b, &IndependenceRelation::per_order(k))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Verifies the hypothesis for removing `B` from the base and returns the
/// re-evaluated conclusion `A ⫝_{B'} C`.
pub fn delete_support(
    u: &Universe,
    a: &BTreeSet<Id>,
    b: &BTreeSet<Id>,
    b_prime: &BTreeSet<Id>,
    c: &BTreeSet<Id>,
) -> Result<bool> {
    let rel = IndependenceRelation::lifted();
    rel.check_applicable(u.spec())?;
    if let Some(x) = a.intersection(b).next() {
        return Err(Error::HypothesisUnmet(format!("{x} lies in both A and B")));
    }
    if let Some(x) = c.intersection(b).next() {
        return Err(Error::HypothesisUnmet(format!("{x} lies in both C and B")));
    }
    let bb: BTreeSet<Id> = b.union(b_prime).copied().collect();
    if !indep(u, a, &bb, c, &rel)? {
        return Err(Error::HypothesisUnmet("A is not independent from C over B ∪ B'".into()));
    }
    for x in b.difference(b_prime) {
        for y in c.difference(b_prime) {
            if u.less(*x, 0, *y)
                && !b_prime.iter().any(|s| u.less(*x, 0, *s) && u.less(*s, 0, *y))
            {
                return Err(Error::HypothesisUnmet(format!("unseparated pair ({x}, {y})")));
            }
        }
    }
    indep(u, a, b_prime, c, &rel)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axiom {
    Invariance,
    Monotonicity,
    Transitivity,
    Existence,
    Stationarity,
}

impl Axiom {
    pub const ALL: [Axiom; 5] = [
        Axiom::Invariance,
        Axiom::Monotonicity,
        Axiom::Transitivity,
        Axiom::Existence,
        Axiom::Stationarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::Invariance => "invariance",
            Axiom::Monotonicity => "monotonicity",
            Axiom::Transitivity => "transitivity",
            Axiom::Existence => "existence",
            Axiom::Stationarity => "stationarity",
        }
    }
}

impl FromStr for Axiom {
    type Err = Error;
    fn from_str(s: &str) -> Result<Axiom> {
        Axiom::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown axiom {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub clause: String,
    pub sets: Vec<(String, Vec<Id>)>,
}

impl Counterexample {
    fn new(clause: &str, sets: &[(&str, Vec<Id>)]) -> Self {
        Counterexample {
            clause: clause.to_string(),
            sets: sets.iter().map(|(n, v)| (n.to_string(), v.clone())).collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = serde_json::Map::new();
        m.insert("clause".into(), json!(self.clause));
        for (n, v) in &self.sets {
            m.insert(n.clone(), json!(v));
        }
        Value::Object(m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub bound: usize,
    pub instances_checked: u64,
    /// Existence queries over an empty base with order clauses present.
    pub skipped_empty_base: u64,
    pub counterexample: Option<Counterexample>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "axiom": self.axiom.name(),
            "bound": self.bound,
            "instances_checked": self.instances_checked,
            "result": if self.passed() { "pass" } else { "fail" },
        });
        if self.skipped_empty_base > 0 {
            v["skipped_empty_base"] = json!(self.skipped_empty_base);
        }
        if let Some(c) = &self.counterexample {
            v["counterexample"] = c.to_json();
        }
        v
    }
}

pub const MAX_BOUND: usize = 8;

/// Exhaustively checks one axiom on every instance whose elements come from
/// the materialized fragment and number at most `bound`.
pub fn check_axiom(
    u: &Universe,
    rel: &IndependenceRelation,
    axiom: Axiom,
    bound: usize,
) -> Result<AxiomReport> {
    if bound > MAX_BOUND {
        return Err(Error::InstanceTooLarge(format!("bound {bound} exceeds {MAX_BOUND}")));
    }
    rel.check_applicable(u.spec())?;
    let frame = Frame::new(u, u.ids())?;
    let mut report = AxiomReport {
        axiom,
        bound,
        instances_checked: 0,
        skipped_empty_base: 0,
        counterexample: None,
    };
    let supports = subsets_upto(frame.ids.len(), bound);
    let cx = match axiom {
        Axiom::Monotonicity | Axiom::Transitivity => {
            check_four_set(&frame, rel, axiom, &supports, &mut report.instances_checked)
        }
        Axiom::Invariance => check_invariance(u, &frame, rel, &supports, &mut report.instances_checked)?,
        Axiom::Existence => check_existence(u, &frame, rel, bound, &mut report)?,
        Axiom::Stationarity => check_stationarity(&frame, rel, bound, &mut report.instances_checked),
    };
    report.counterexample = cx;
    Ok(report)
}

fn subsets_upto(m: usize, k: usize) -> Vec<u64> {
    let mut out = vec![0u64];
    fn rec(start: usize, m: usize, left: usize, cur: u64, out: &mut Vec<u64>) {
        for i in start..m {
            let next = cur | 1 << i;
            out.push(next);
            if left > 1 {
                rec(i + 1, m, left - 1, next, out);
            }
        }
    }
    if k > 0 {
        rec(0, m, k, 0, &mut out);
    }
    out
}

/// Every way of distributing the elements of `support` over `s` sets so that
/// each element lies in at least one.
fn assignments<const S: usize>(support: u64) -> impl Iterator<Item = [u64; S]> {
    let elems: Vec<usize> = bits(support).collect();
    let patterns = (1u64 << S) - 1;
    let total = patterns.pow(elems.len() as u32);
    (0..total).map(move |mut code| {
        let mut sets = [0u64; S];
        for e in &elems {
            let p = code % patterns + 1;
            code /= patterns;
            for (k, set) in sets.iter_mut().enumerate() {
                if p >> k & 1 == 1 {
                    *set |= 1 << e;
                }
            }
        }
        sets
    })
}

fn check_four_set(
    f: &Frame,
    rel: &IndependenceRelation,
    axiom: Axiom,
    supports: &[u64],
    count: &mut u64,
) -> Option<Counterexample> {
    let m = f.ids.len();
    let memo = std::cell::RefCell::new(if m <= 7 { vec![0u8; 1 << (3 * m)] } else { Vec::new() });
    let cached = |x: u64, y: u64, z: u64| -> bool {
        let mut t = memo.borrow_mut();
        if t.is_empty() {
            return f.indep(rel, x, y, z);
        }
        let k = ((x << (2 * m)) | (y << m) | z) as usize;
        if t[k] == 0 {
            t[k] = 1 + u8::from(f.indep(rel, x, y, z));
        }
        t[k] == 2
    };
    let r = |x: u64, y: u64, z: u64| cached(x, y, z);
    let l = |x: u64, y: u64, z: u64| cached(z, y, x);
    type Ind<'a> = &'a dyn Fn(u64, u64, u64) -> bool;
    let sides: [(&str, Ind); 2] = [("", &r), ("dual ", &l)];
    for s in supports {
        for sets in assignments::<4>(*s) {
            let (a, b, c, d) = (sets[0], sets[1], sets[2], sets[3]);
            *count += 1;
            for (tag, i) in &sides {
                let failed = match axiom {
                    Axiom::Monotonicity => {
                        if i(a, b, c | d) && !(i(a, b, c) && i(a, b | c, d)) {
                            Some("first line")
                        } else if i(a | d, b, c) && !(i(a, b, c) && i(d, a | b, c)) {
                            Some("second line")
                        } else {
                            None
                        }
                    }
                    _ => {
                        if i(a, b, c) && i(a, b | c, d) && !i(a, b, c | d) {
                            Some("first line")
                        } else if i(a, b, c) && i(d, a | b, c) && !i(a | d, b, c) {
                            Some("second line")
                        } else {
                            None
                        }
                    }
                };
                if let Some(line) = failed {
                    return Some(Counterexample::new(
                        &format!("{tag}{} {line}", axiom.name()),
                        &[
                            ("A", f.set(a).into_iter().collect()),
                            ("B", f.set(b).into_iter().collect()),
                            ("C", f.set(c).into_iter().collect()),
                            ("D", f.set(d).into_iter().collect()),
                        ],
                    ));
                }
            }
        }
    }
    None
}

fn partial_isos_from(f: &Frame, support: u64) -> Vec<Vec<usize>> {
    let dom: Vec<usize> = bits(support).collect();
    let mut out = Vec::new();
    let mut img = Vec::new();
    fn rec(f: &Frame, dom: &[usize], img: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let k = img.len();
        if k == dom.len() {
            out.push(img.clone());
            return;
        }
        for t in 0..f.ids.len() {
            if img.contains(&t) {
                continue;
            }
            let ok = (0..k).all(|j| {
                (0..f.num_orders).all(|o| {
                    (f.rank[o][dom[j]] < f.rank[o][dom[k]]) == (f.rank[o][img[j]] < f.rank[o][t])
                })
            });
            if !ok {
                continue;
            }
            img.push(t);
            let map = |i: usize| dom.iter().position(|d| *d == i).and_then(|p| img.get(p).copied());
            let inv = |i: usize| img.iter().position(|d| *d == i).map(|p| dom[p]);
            let fwd_ok = f.tuples.iter().all(|(s, tu)| match tu.iter().map(|x| map(*x)).collect::<Option<Vec<_>>>() {
                Some(im) => f.tuples.contains(&(*s, im)),
                None => true,
            });
            let bwd_ok = f.tuples.iter().all(|(s, tu)| match tu.iter().map(|x| inv(*x)).collect::<Option<Vec<_>>>() {
                Some(pre) => f.tuples.contains(&(*s, pre)),
                None => true,
            });
            if fwd_ok && bwd_ok {
                rec(f, dom, img, out);
            }
            img.pop();
        }
    }
    rec(f, &dom, &mut img, &mut out);
    out
}

fn check_invariance(
    u: &Universe,
    f: &Frame,
    rel: &IndependenceRelation,
    supports: &[u64],
    count: &mut u64,
) -> Result<Option<Counterexample>> {
    let map_mask = |dom: &[usize], img: &[usize], m: u64| -> u64 {
        dom.iter().zip(img).fold(0, |acc, (d, i)| if m >> d & 1 == 1 { acc | 1 << i } else { acc })
    };
    for s in supports {
        let dom: Vec<usize> = bits(*s).collect();
        for img in partial_isos_from(f, *s) {
            for sets in assignments::<3>(*s) {
                *count += 1;
                let (a, b, c) = (sets[0], sets[1], sets[2]);
                let (ga, gb, gc) = (map_mask(&dom, &img, a), map_mask(&dom, &img, b), map_mask(&dom, &img, c));
                if f.indep(rel, a, b, c) != f.indep(rel, ga, gb, gc) {
                    return Ok(Some(Counterexample::new(
                        "invariance",
                        &[
                            ("A", f.set(a).into_iter().collect()),
                            ("B", f.set(b).into_iter().collect()),
                            ("C", f.set(c).into_iter().collect()),
                            ("map_image", img.iter().map(|i| f.ids[*i]).collect()),
                        ],
                    )));
                }
            }
        }
        // Homogeneity step: fix all but the last element and move it to a fresh
        // realization of its type over the rest.
        if dom.is_empty() {
            continue;
        }
        let mut w = u.clone();
        let last = f.ids[*dom.last().unwrap()];
        let rest: BTreeSet<Id> = dom[..dom.len() - 1].iter().map(|i| f.ids[*i]).collect();
        let p = type_of(&w, &[last], &rest)?;
        let fresh = w.extend_realizing(&p)?[0];
        let mut m = PartialMap::new();
        for x in &rest {
            m.insert(*x, *x)?;
        }
        m.insert(last, fresh)?;
        if !is_partial_isomorphism(w.structure(), &m)? {
            return Ok(Some(Counterexample::new("homogeneity step", &[("support", f.set(*s).into_iter().collect())])));
        }
        let g = Frame::new(&w, f.set(*s).into_iter().chain([fresh]))?;
        let to_g = |mask: u64, moved: bool| -> u64 {
            bits(mask).fold(0, |acc, i| {
                let id = if moved && f.ids[i] == last { fresh } else { f.ids[i] };
                acc | 1 << g.pos[&id]
            })
        };
        for sets in assignments::<3>(*s) {
            *count += 1;
            let (a, b, c) = (sets[0], sets[1], sets[2]);
            if g.indep(rel, to_g(a, false), to_g(b, false), to_g(c, false))
                != g.indep(rel, to_g(a, true), to_g(b, true), to_g(c, true))
            {
                return Ok(Some(Counterexample::new(
                    "invariance under a homogeneity step",
                    &[
                        ("A", f.set(a).into_iter().collect()),
                        ("B", f.set(b).into_iter().collect()),
                        ("C", f.set(c).into_iter().collect()),
                        ("moved", vec![last, fresh]),
                    ],
                )));
            }
        }
    }
    Ok(None)
}

fn tuples_upto(m: usize, k: usize, avoid: u64) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(m: usize, k: usize, avoid: u64, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == k {
            return;
        }
        for i in 0..m {
            if avoid >> i & 1 == 1 || cur.contains(&i) {
                continue;
            }
            cur.push(i);
            rec(m, k, avoid, cur, out);
            cur.pop();
        }
    }
    rec(m, k, avoid, &mut Vec::new(), &mut out);
    out
}

fn tuple_mask(t: &[usize]) -> u64 {
    t.iter().fold(0, |m, i| m | 1 << i)
}

fn check_existence(
    u: &Universe,
    f: &Frame,
    rel: &IndependenceRelation,
    bound: usize,
    report: &mut AxiomReport,
) -> Result<Option<Counterexample>> {
    let n = u.num_orders();
    let has_orders = !rel.clause_orders(n).is_empty();
    let m = f.ids.len();
    for b in subsets_upto(m, bound) {
        let nb = b.count_ones() as usize;
        if nb >= bound.max(1) && bound > 0 {
            continue;
        }
        let base = f.set(b);
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for t in tuples_upto(m, bound.saturating_sub(nb).min(2), b) {
            let tuple: Vec<Id> = t.iter().map(|i| f.ids[*i]).collect();
            let p = type_of(u, &tuple, &base)?;
            if !seen.insert(p.to_json(&u.spec().signature).to_string()) {
                continue;
            }
            let room = bound - nb - t.len();
            let cs: Vec<u64> = subsets_upto(m, room).into_iter().filter(|c| *c & !b != 0).collect();
            if b == 0 && has_orders {
                report.skipped_empty_base += cs.len() as u64;
                continue;
            }
            let mut w = u.clone();
            let left: Vec<Lean> = (0..n).map(|o| rel.independent_lean(o)).collect();
            let right: Vec<Lean> = left.iter().map(|l| if *l == Lean::High { Lean::Low } else { Lean::High }).collect();
            let a1 = w.realize(&p, &[], &left)?;
            let a2 = w.realize(&p, &[], &right)?;
            let ok_type = type_of(&w, &a1, &base)? == p && type_of(&w, &a2, &base)? == p;
            let g = Frame::new(&w, f.ids.iter().copied().chain(a1.iter().copied()).chain(a2.iter().copied()))?;
            let bm = g.mask(&base);
            let (m1, m2) = (g.mask(&a1), g.mask(&a2));
            for c in cs {
                report.instances_checked += 1;
                let cm = g.mask(&f.set(c));
                if !ok_type || !g.indep(rel, m1, bm, cm) || !g.indep(rel, cm, bm, m2) {
                    return Ok(Some(Counterexample::new(
                        "existence",
                        &[
                            ("B", base.iter().copied().collect()),
                            ("C", f.set(c).into_iter().collect()),
                            ("type_source", tuple.clone()),
                        ],
                    )));
                }
            }
        }
    }
    Ok(None)
}

fn check_stationarity(
    f: &Frame,
    rel: &IndependenceRelation,
    bound: usize,
    count: &mut u64,
) -> Option<Counterexample> {
    let m = f.ids.len();
    let mut cache: HashMap<(Vec<usize>, u64), LocalType> = HashMap::new();
    let mut tp = |t: &[usize], p: u64| cache.entry((t.to_vec(), p)).or_insert_with(|| f.local_type(t, p)).clone();
    for b in subsets_upto(m, bound) {
        let tuples = tuples_upto(m, 2.min(bound), b);
        for c in subsets_upto(m, bound) {
            if c & !b == 0 {
                continue;
            }
            let bc = b | c;
            for (i, t1) in tuples.iter().enumerate() {
                let m1 = tuple_mask(t1);
                if m1 & c != 0 {
                    continue;
                }
                for t2 in &tuples[i + 1..] {
                    let m2 = tuple_mask(t2);
                    if t2.len() != t1.len() || m2 & c != 0 || (bc | m1 | m2).count_ones() as usize > bound {
                        continue;
                    }
                    *count += 1;
                    if tp(t1, b) != tp(t2, b) {
                        continue;
                    }
                    let right = f.indep(rel, m1, b, c) && f.indep(rel, m2, b, c);
                    let left = f.indep(rel, c, b, m1) && f.indep(rel, c, b, m2);
                    if (right || left) && tp(t1, bc) != tp(t2, bc) {
                        return Some(Counterexample::new(
                            if right { "stationarity" } else { "dual stationarity" },
                            &[
                                ("a", t1.iter().map(|x| f.ids[*x]).collect()),
                                ("a_prime", t2.iter().map(|x| f.ids[*x]).collect()),
                                ("B", f.set(b).into_iter().collect()),
                                ("C", f.set(c).into_iter().collect()),
                            ],
                        ));
                    }
                }
            }
        }
    }
    None
}
