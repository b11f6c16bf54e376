//! The lazily materialized Fraïssé limit: class constraints, amalgamation,
//! and realization of types (the extension property).

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound::{Excluded, Unbounded};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::structure::{
    midpoint, rat, validate, Coord, Element, FiniteStructure, Id, Signature, Tuple,
};
use crate::types::{check_consistent, Term, TypeDescriptor};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassKind {
    Free { forbidden: Vec<FiniteStructure> },
    PureOrders,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassSpec {
    pub signature: Signature,
    pub kind: ClassKind,
    /// All relations binary, symmetric and irreflexive (graphs).
    pub symmetric: bool,
}

impl ClassSpec {
    pub fn new(signature: Signature, kind: ClassKind, symmetric: bool) -> Result<Self> {
        let err = |m: &str| Err(Error::InvalidSignature(m.to_string()));
        match &kind {
            ClassKind::PureOrders => {
                if !signature.relations.is_empty() {
                    return err("pure order class with relation symbols");
                }
                if signature.num_orders == 0 {
                    return err("pure order class needs at least one order");
                }
            }
            ClassKind::Free { forbidden } => {
                for f in forbidden {
                    if f.signature.relations != signature.relations || f.signature.num_orders != 0 {
                        return err("forbidden pattern over a different signature");
                    }
                    let ids: Vec<Id> = f.elements.keys().copied().collect();
                    for (i, a) in ids.iter().enumerate() {
                        for b in &ids[i + 1..] {
                            if !f.tuples.iter().any(|(_, t)| t.contains(a) && t.contains(b)) {
                                return err("forbidden pattern is not irreducible");
                            }
                        }
                    }
                }
            }
        }
        if symmetric && signature.relations.iter().any(|(_, a)| *a != 2) {
            return err("symmetric classes need binary relations");
        }
        Ok(ClassSpec { signature, kind, symmetric })
    }

    pub fn random_graph(num_orders: usize) -> Self {
        let sig = Signature::new(vec![("E".into(), 2)], num_orders).unwrap();
        ClassSpec::new(sig, ClassKind::Free { forbidden: vec![] }, true).unwrap()
    }

    /// Graphs omitting the complete graph on `k` vertices.
    pub fn kn_free(k: usize, num_orders: usize) -> Self {
        let sig = Signature::new(vec![("E".into(), 2)], num_orders).unwrap();
        let mut clique = FiniteStructure::new(Signature::new(vec![("E".into(), 2)], 0).unwrap());
        for i in 0..k as Id {
            clique.insert_element(Element { id: i, coords: vec![] });
            for j in 0..k as Id {
                if i != j {
                    clique.add_tuple(0, vec![i, j]);
                }
            }
        }
        ClassSpec::new(sig, ClassKind::Free { forbidden: vec![clique] }, true).unwrap()
    }

    pub fn k3_free(num_orders: usize) -> Self {
        Self::kn_free(3, num_orders)
    }

    pub fn pure_orders(n: usize) -> Self {
        ClassSpec::new(Signature::new(vec![], n).unwrap(), ClassKind::PureOrders, false).unwrap()
    }

    pub fn num_orders(&self) -> usize {
        self.signature.num_orders
    }

    pub fn is_pure_orders(&self) -> bool {
        matches!(self.kind, ClassKind::PureOrders)
    }

    pub fn is_free(&self) -> bool {
        matches!(self.kind, ClassKind::Free { .. })
    }

    pub fn has_forbidden(&self) -> bool {
        matches!(&self.kind, ClassKind::Free { forbidden } if !forbidden.is_empty())
    }

    pub fn forbidden(&self) -> &[FiniteStructure] {
        match &self.kind {
            ClassKind::Free { forbidden } => forbidden,
            ClassKind::PureOrders => &[],
        }
    }

    /// The stored tuples for one atom: both orientations in symmetric classes.
    pub fn expand<T: Clone>(&self, ts: &[T]) -> Vec<Vec<T>> {
        if self.symmetric {
            vec![ts.to_vec(), vec![ts[1].clone(), ts[0].clone()]]
        } else {
            vec![ts.to_vec()]
        }
    }

    pub fn to_json(&self) -> Value {
        let relations: Vec<Value> =
            self.signature.relations.iter().map(|(n, a)| json!([n, a])).collect();
        let (kind, forbidden) = match &self.kind {
            ClassKind::Free { forbidden } => {
                ("free", forbidden.iter().map(FiniteStructure::to_json).collect::<Vec<_>>())
            }
            ClassKind::PureOrders => ("pure_orders", vec![]),
        };
        json!({
            "kind": kind,
            "relations": relations,
            "num_orders": self.signature.num_orders,
            "symmetric": self.symmetric,
            "forbidden": forbidden,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |w: &str| Error::Parse(format!("class spec json: {w}"));
        let mut relations = Vec::new();
        for r in v.get("relations").and_then(Value::as_array).ok_or_else(|| bad("relations"))? {
            let name = r.get(0).and_then(Value::as_str).ok_or_else(|| bad("relation name"))?;
            let arity = r.get(1).and_then(Value::as_u64).ok_or_else(|| bad("arity"))?;
            relations.push((name.to_string(), arity as usize));
        }
        let n = v.get("num_orders").and_then(Value::as_u64).ok_or_else(|| bad("num_orders"))?;
        let signature = Signature::new(relations, n as usize)?;
        let symmetric = v.get("symmetric").and_then(Value::as_bool).unwrap_or(false);
        let kind = match v.get("kind").and_then(Value::as_str) {
            Some("pure_orders") => ClassKind::PureOrders,
            Some("free") => {
                let forbidden = v
                    .get("forbidden")
                    .and_then(Value::as_array)
                    .map(|fs| fs.iter().map(FiniteStructure::from_json).collect::<Result<Vec<_>>>())
                    .transpose()?
                    .unwrap_or_default();
                ClassKind::Free { forbidden }
            }
            _ => return Err(bad("kind")),
        };
        ClassSpec::new(signature, kind, symmetric)
    }
}

/// Searches for an injective homomorphic copy of a forbidden pattern inside a
/// candidate on `n` nodes that uses at least one node of `must`.
pub fn forbidden_copy(
    spec: &ClassSpec,
    n: usize,
    tuples: &BTreeSet<(usize, Vec<usize>)>,
    must: &BTreeSet<usize>,
) -> bool {
    for pat in spec.forbidden() {
        let pids: Vec<Id> = pat.elements.keys().copied().collect();
        let k = pids.len();
        if k > n || k == 0 {
            continue;
        }
        let pos: BTreeMap<Id, usize> = pids.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let ptuples: Vec<(usize, Vec<usize>)> = pat
            .tuples
            .iter()
            .map(|(s, t)| (*s, t.iter().map(|x| pos[x]).collect()))
            .collect();
        for anchor in 0..k {
            for m in must {
                let mut f: Vec<Option<usize>> = vec![None; k];
                f[anchor] = Some(*m);
                if extend_copy(&mut f, 0, n, &ptuples, tuples) {
                    return true;
                }
            }
        }
    }
    false
}

fn extend_copy(
    f: &mut Vec<Option<usize>>,
    next: usize,
    n: usize,
    ptuples: &[(usize, Vec<usize>)],
    tuples: &BTreeSet<(usize, Vec<usize>)>,
) -> bool {
    let consistent = |f: &Vec<Option<usize>>| {
        ptuples.iter().all(|(s, t)| match t.iter().map(|i| f[*i]).collect::<Option<Vec<_>>>() {
            Some(img) => tuples.contains(&(*s, img)),
            None => true,
        })
    };
    if next == f.len() {
        return consistent(f);
    }
    if f[next].is_some() {
        return consistent(f) && extend_copy(f, next + 1, n, ptuples, tuples);
    }
    for c in 0..n {
        if f.contains(&Some(c)) {
            continue;
        }
        f[next] = Some(c);
        if consistent(f) && extend_copy(f, next + 1, n, ptuples, tuples) {
            return true;
        }
    }
    f[next] = None;
    false
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lean {
    Low,
    High,
}

/// An open coordinate interval; `None` means unbounded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<Coord>,
    pub hi: Option<Coord>,
}

impl Interval {
    pub fn all() -> Self {
        Interval::default()
    }

    pub fn new(lo: Option<Coord>, hi: Option<Coord>) -> Self {
        Interval { lo, hi }
    }

    pub fn above(c: Coord) -> Self {
        Interval { lo: Some(c), hi: None }
    }

    pub fn below(c: Coord) -> Self {
        Interval { lo: None, hi: Some(c) }
    }

    pub fn is_empty(&self) -> bool {
        matches!((&self.lo, &self.hi), (Some(l), Some(h)) if l >= h)
    }

    pub fn contains(&self, c: &Coord) -> bool {
        self.lo.as_ref().is_none_or(|l| c > l) && self.hi.as_ref().is_none_or(|h| c < h)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = match (&self.lo, &other.lo) {
            (Some(a), Some(b)) => Some(a.max(b).clone()),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        let hi = match (&self.hi, &other.hi) {
            (Some(a), Some(b)) => Some(a.min(b).clone()),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        Interval { lo, hi }
    }
}

#[derive(Clone, Debug)]
pub struct Universe {
    spec: ClassSpec,
    seed: u64,
    rng: ChaCha8Rng,
    current: FiniteStructure,
    next_id: Id,
    index: Vec<BTreeMap<Coord, Id>>,
    incident: BTreeMap<Id, BTreeSet<Tuple>>,
    neighbours: BTreeMap<Id, BTreeSet<Id>>,
}

static EMPTY_TUPLES: BTreeSet<Tuple> = BTreeSet::new();
static EMPTY_IDS: BTreeSet<Id> = BTreeSet::new();

impl Universe {
    pub fn new(spec: ClassSpec, seed: u64) -> Self {
        let n = spec.num_orders();
        Universe {
            current: FiniteStructure::new(spec.signature.clone()),
            spec,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
            index: vec![BTreeMap::new(); n],
            incident: BTreeMap::new(),
            neighbours: BTreeMap::new(),
        }
    }

    pub fn spec(&self) -> &ClassSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn structure(&self) -> &FiniteStructure {
        &self.current
    }

    pub fn num_orders(&self) -> usize {
        self.spec.num_orders()
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn contains(&self, id: Id) -> bool {
        self.current.contains(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = Id> + '_ {
        self.current.elements.keys().copied()
    }

    pub fn coords(&self, id: Id) -> &[Coord] {
        &self.current.elements[&id]
    }

    pub fn coord(&self, id: Id, order: usize) -> &Coord {
        &self.current.elements[&id][order]
    }

    pub fn less(&self, a: Id, order: usize, b: Id) -> bool {
        self.coord(a, order) < self.coord(b, order)
    }

    pub fn order_index(&self, order: usize) -> &BTreeMap<Coord, Id> {
        &self.index[order]
    }

    pub fn tuples_of(&self, id: Id) -> &BTreeSet<Tuple> {
        self.incident.get(&id).unwrap_or(&EMPTY_TUPLES)
    }

    pub fn neighbours(&self, id: Id) -> &BTreeSet<Id> {
        self.neighbours.get(&id).unwrap_or(&EMPTY_IDS)
    }

    /// Whether `a` and `b` occur together in some relation tuple.
    pub fn related(&self, a: Id, b: Id) -> bool {
        self.neighbours(a).contains(&b)
    }

    pub fn has_tuple(&self, sym: usize, ids: &[Id]) -> bool {
        ids.first()
            .is_some_and(|x| self.tuples_of(*x).contains(&(sym, ids.to_vec())))
    }

    pub fn min_element(&self, order: usize) -> Option<Id> {
        self.index[order].values().next().copied()
    }

    pub fn max_element(&self, order: usize) -> Option<Id> {
        self.index[order].values().next_back().copied()
    }

    /// Nearest materialized element strictly above coordinate `c`.
    pub fn next_above(&self, order: usize, c: &Coord) -> Option<(&Coord, Id)> {
        self.index[order].range((Excluded(c), Unbounded)).next().map(|(k, v)| (k, *v))
    }

    /// Nearest materialized element strictly below coordinate `c`.
    pub fn next_below(&self, order: usize, c: &Coord) -> Option<(&Coord, Id)> {
        self.index[order].range((Unbounded, Excluded(c))).next_back().map(|(k, v)| (k, *v))
    }

    /// Picks a fresh coordinate inside `iv`, in the gap adjacent to the lower
    /// end (`Low`) or the upper end (`High`).
    pub fn place(&self, order: usize, iv: &Interval, lean: Lean) -> Result<Coord> {
        if iv.is_empty() {
            return Err(Error::IntervalClash { order });
        }
        let one = rat(1);
        Ok(match lean {
            Lean::Low => {
                let first = match &iv.lo {
                    Some(l) => self.next_above(order, l).map(|(c, _)| c.clone()),
                    None => self.index[order].keys().next().cloned(),
                }
                .filter(|c| iv.contains(c));
                match (&iv.lo, first) {
                    (Some(l), Some(c)) => midpoint(l, &c),
                    (Some(l), None) => match &iv.hi {
                        Some(h) => midpoint(l, h),
                        None => l + &one,
                    },
                    (None, Some(c)) => c - &one,
                    (None, None) => match &iv.hi {
                        Some(h) => h - &one,
                        None => rat(0),
                    },
                }
            }
            Lean::High => {
                let last = match &iv.hi {
                    Some(h) => self.next_below(order, h).map(|(c, _)| c.clone()),
                    None => self.index[order].keys().next_back().cloned(),
                }
                .filter(|c| iv.contains(c));
                match (&iv.hi, last) {
                    (Some(h), Some(c)) => midpoint(&c, h),
                    (Some(h), None) => match &iv.lo {
                        Some(l) => midpoint(l, h),
                        None => h - &one,
                    },
                    (None, Some(c)) => c + &one,
                    (None, None) => match &iv.lo {
                        Some(l) => l + &one,
                        None => rat(0),
                    },
                }
            }
        })
    }

    /// Adds an unrelated element with the given coordinates.
    pub fn add_element(&mut self, coords: Vec<Coord>) -> Result<Id> {
        if coords.len() != self.num_orders() {
            return Err(Error::Unrealizable("wrong number of coordinates".into()));
        }
        for (o, c) in coords.iter().enumerate() {
            if self.index[o].contains_key(c) {
                return Err(Error::Unrealizable(format!("coordinate collision on order {}", o + 1)));
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        for (o, c) in coords.iter().enumerate() {
            self.index[o].insert(c.clone(), id);
        }
        self.current.insert_element(Element { id, coords });
        Ok(id)
    }

    fn remove_fresh(&mut self, id: Id) {
        if let Some(cs) = self.current.elements.remove(&id) {
            for (o, c) in cs.iter().enumerate() {
                self.index[o].remove(c);
            }
        }
    }

    fn insert_tuple_unchecked(&mut self, sym: usize, ids: Vec<Id>) {
        for x in &ids {
            self.incident.entry(*x).or_default().insert((sym, ids.clone()));
            for y in &ids {
                if x != y {
                    self.neighbours.entry(*x).or_default().insert(*y);
                }
            }
        }
        self.current.add_tuple(sym, ids);
    }

    /// Adds a relation tuple (both orientations in symmetric classes),
    /// refusing tuples that would complete a forbidden configuration.
    pub fn add_tuple(&mut self, sym: usize, ids: Vec<Id>) -> Result<()> {
        if sym >= self.spec.signature.relations.len() || self.spec.signature.arity(sym) != ids.len() {
            return Err(Error::Unrealizable(format!("bad tuple for symbol {sym}")));
        }
        if let Some(x) = ids.iter().find(|x| !self.contains(**x)) {
            return Err(Error::UnknownElement(*x));
        }
        if self.spec.symmetric && ids[0] == ids[1] {
            return Err(Error::Unrealizable("loop in a symmetric relation".into()));
        }
        if self.would_complete_forbidden(sym, &ids) {
            return Err(Error::Unrealizable("completes a forbidden configuration".into()));
        }
        for t in self.spec.expand(&ids) {
            self.insert_tuple_unchecked(sym, t);
        }
        Ok(())
    }

    pub fn add_edge(&mut self, a: Id, b: Id) -> Result<()> {
        self.add_tuple(0, vec![a, b])
    }

    fn would_complete_forbidden(&self, sym: usize, ids: &[Id]) -> bool {
        if !self.spec.has_forbidden() {
            return false;
        }
        let mut nodes: BTreeSet<Id> = ids.iter().copied().collect();
        for x in ids {
            nodes.extend(self.neighbours(*x).iter().copied());
        }
        let nodes: Vec<Id> = nodes.into_iter().collect();
        let pos: BTreeMap<Id, usize> = nodes.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let mut tuples = BTreeSet::new();
        for x in &nodes {
            for (s, t) in self.tuples_of(*x) {
                if let Some(ix) = t.iter().map(|y| pos.get(y).copied()).collect::<Option<Vec<_>>>() {
                    tuples.insert((*s, ix));
                }
            }
        }
        for t in self.spec.expand(ids) {
            tuples.insert((sym, t.iter().map(|y| pos[y]).collect()));
        }
        let must: BTreeSet<usize> = ids.iter().map(|y| pos[y]).collect();
        forbidden_copy(&self.spec, nodes.len(), &tuples, &must)
    }

    /// Realizes `p` with fresh elements. `bounds[v][o]` optionally narrows the
    /// interval of variable `v` on order `o`; `leans[o]` picks the gap side.
    pub fn realize(
        &mut self,
        p: &TypeDescriptor,
        bounds: &[Vec<Interval>],
        leans: &[Lean],
    ) -> Result<Vec<Id>> {
        check_consistent(self, p)?;
        let mut placed: Vec<Id> = Vec::with_capacity(p.num_vars);
        for v in 0..p.num_vars {
            let mut coords = Vec::with_capacity(self.num_orders());
            let mut failure = None;
            for o in 0..self.num_orders() {
                let list = &p.orders[o];
                let pos = list.iter().position(|t| *t == Term::Var(v)).unwrap();
                let coord_of = |t: &Term| match t {
                    Term::Param(x) => Some(self.coord(*x, o).clone()),
                    Term::Var(w) if *w < v => Some(self.coord(placed[*w], o).clone()),
                    Term::Var(_) => None,
                };
                let lo = list[..pos].iter().rev().find_map(coord_of);
                let hi = list[pos + 1..].iter().find_map(coord_of);
                let mut iv = Interval::new(lo, hi);
                if let Some(b) = bounds.get(v).and_then(|b| b.get(o)) {
                    iv = iv.intersect(b);
                }
                match self.place(o, &iv, leans.get(o).copied().unwrap_or(Lean::Low)) {
                    Ok(c) => coords.push(c),
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            if let Some(e) = failure {
                for id in placed {
                    self.remove_fresh(id);
                }
                return Err(e);
            }
            placed.push(self.add_element(coords)?);
        }
        for (sym, ts) in &p.atoms {
            let ids: Vec<Id> = ts
                .iter()
                .map(|t| match t {
                    Term::Param(x) => *x,
                    Term::Var(v) => placed[*v],
                })
                .collect();
            for t in self.spec.expand(&ids) {
                self.insert_tuple_unchecked(*sym, t);
            }
        }
        Ok(placed)
    }

    pub fn extend_realizing(&mut self, p: &TypeDescriptor) -> Result<Vec<Id>> {
        self.realize(p, &[], &[])
    }

    /// Realizes a 1-type strictly inside the given per-order intervals.
    pub fn insert_between(&mut self, p: &TypeDescriptor, bounds: &[Interval]) -> Result<Id> {
        if p.num_vars != 1 {
            return Err(Error::Unrealizable("insert_between needs a 1-type".into()));
        }
        Ok(self.realize(p, &[bounds.to_vec()], &[])?[0])
    }

    /// Adds `steps` elements in uniformly chosen order gaps with seeded random
    /// relations to the existing fragment.
    pub fn grow_random(&mut self, steps: usize) -> Vec<Id> {
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let mut coords = Vec::new();
            for o in 0..self.num_orders() {
                let keys: Vec<Coord> = self.index[o].keys().cloned().collect();
                let gap = self.rng.gen_range(0..=keys.len());
                let iv = Interval::new(
                    gap.checked_sub(1).map(|i| keys[i].clone()),
                    keys.get(gap).cloned(),
                );
                coords.push(self.place(o, &iv, Lean::Low).expect("gap is nonempty"));
            }
            let others: Vec<Id> = self.ids().collect();
            let id = self.add_element(coords).expect("fresh coordinates");
            let rels = self.spec.signature.relations.clone();
            for (sym, (_, arity)) in rels.iter().enumerate() {
                match arity {
                    1 => {
                        if self.rng.gen_bool(0.5) {
                            let _ = self.add_tuple(sym, vec![id]);
                        }
                    }
                    2 => {
                        for &e in &others {
                            if self.rng.gen_bool(0.5) {
                                let _ = self.add_tuple(sym, vec![id, e]);
                            }
                            if !self.spec.symmetric && self.rng.gen_bool(0.5) {
                                let _ = self.add_tuple(sym, vec![e, id]);
                            }
                        }
                    }
                    k => {
                        if others.is_empty() {
                            continue;
                        }
                        for _ in 0..(2 * k) {
                            let mut t: Vec<Id> = (0..*k)
                                .map(|_| others[self.rng.gen_range(0..others.len())])
                                .collect();
                            let slot = self.rng.gen_range(0..*k);
                            t[slot] = id;
                            let _ = self.add_tuple(sym, t);
                        }
                    }
                }
            }
            out.push(id);
        }
        out
    }

    pub fn snapshot(&self) -> Value {
        let mut v = self.current.to_json();
        v["spec"] = self.spec.to_json();
        v["seed"] = json!(self.seed);
        v["rng_word_pos"] = json!(self.rng.get_word_pos().to_string());
        v["next_id"] = json!(self.next_id);
        v
    }

    pub fn from_snapshot(v: &Value) -> Result<Self> {
        let spec = ClassSpec::from_json(v.get("spec").ok_or_else(|| Error::Parse("missing spec".into()))?)?;
        let seed = v.get("seed").and_then(Value::as_u64).unwrap_or(0);
        let s = FiniteStructure::from_json(v)?;
        if s.signature != spec.signature {
            return Err(Error::Parse("snapshot signature differs from its spec".into()));
        }
        validate(&s).map_err(|e| Error::Parse(e.to_string()))?;
        let mut u = Universe::new(spec, seed);
        if let Some(pos) = v.get("rng_word_pos").and_then(Value::as_str).and_then(|p| p.parse().ok()) {
            u.rng.set_word_pos(pos);
        }
        for (id, cs) in &s.elements {
            for (o, c) in cs.iter().enumerate() {
                u.index[o].insert(c.clone(), *id);
            }
            u.current.elements.insert(*id, cs.clone());
        }
        for (sym, ids) in &s.tuples {
            u.insert_tuple_unchecked(*sym, ids.clone());
        }
        let max_id = s.elements.keys().next_back().map_or(0, |m| m + 1);
        u.next_id = v.get("next_id").and_then(Value::as_u64).unwrap_or(max_id).max(max_id);
        Ok(u)
    }
}

/// Amalgamates `a` and `c` over the common base `b`: no relations across the
/// two sides, and per order `x < y` for `x ∈ A∖B`, `y ∈ C∖B` exactly when a
/// base element lies strictly between them. Coordinates of the result are ranks.
pub fn amalgamate(
    spec: &ClassSpec,
    a: &FiniteStructure,
    b: &FiniteStructure,
    c: &FiniteStructure,
) -> Result<FiniteStructure> {
    for s in [a, b, c] {
        validate(s).map_err(|v| Error::BaseMismatch(v.to_string()))?;
    }
    let n = spec.num_orders();
    let base = b.ids();
    for side in [a, c] {
        if !base.iter().all(|x| side.contains(*x)) {
            return Err(Error::BaseMismatch("base element missing from a side".into()));
        }
        if side.induced(&base).tuples != b.tuples {
            return Err(Error::BaseMismatch("relations on the base differ".into()));
        }
        for o in 0..n {
            for x in &base {
                for y in &base {
                    if b.less(*x, o, *y) != side.less(*x, o, *y) {
                        return Err(Error::BaseMismatch(format!("order {} on the base differs", o + 1)));
                    }
                }
            }
        }
    }
    if let Some(x) = a.ids().intersection(&c.ids()).find(|x| !base.contains(x)) {
        return Err(Error::NotDisjointOverBase(*x));
    }
    let a_only: Vec<Id> = a.ids().difference(&base).copied().collect();
    let c_only: Vec<Id> = c.ids().difference(&base).copied().collect();
    if base.is_empty() && !a_only.is_empty() && !c_only.is_empty() && n > 0 {
        return Err(Error::EmptyBaseUnorderable);
    }
    let mut d = FiniteStructure::new(spec.signature.clone());
    let all: Vec<Id> = a.ids().union(&c.ids()).copied().collect();
    let mut coords: BTreeMap<Id, Vec<Coord>> = all.iter().map(|x| (*x, Vec::new())).collect();
    for o in 0..n {
        let before = |x: Id, y: Id| -> bool {
            let (xa, ya) = (a.contains(x), a.contains(y));
            let (xc, yc) = (c.contains(x), c.contains(y));
            if (xa && ya) || (xc && yc) {
                let s = if xa && ya { a } else { c };
                return s.less(x, o, y);
            }
            if xa {
                base.iter().any(|m| a.less(x, o, *m) && c.less(*m, o, y))
            } else {
                !base.iter().any(|m| a.less(y, o, *m) && c.less(*m, o, x))
            }
        };
        let mut sorted = all.clone();
        sorted.sort_by(|x, y| {
            if x == y {
                std::cmp::Ordering::Equal
            } else if before(*x, *y) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        for (rank, x) in sorted.iter().enumerate() {
            coords.get_mut(x).unwrap().push(rat(rank as i64));
        }
    }
    for (id, cs) in coords {
        d.insert_element(Element { id, coords: cs });
    }
    d.tuples = a.tuples.union(&c.tuples).cloned().collect();
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::type_of;

    fn chain(ids: &[(Id, i64)], n: usize) -> FiniteStructure {
        let mut s = FiniteStructure::new(Signature::new(vec![("E".into(), 2)], n).unwrap());
        for (id, c) in ids {
            s.insert_element(Element { id: *id, coords: vec![rat(*c); n] });
        }
        s
    }

    #[test]
    fn amalgamate_line() {
        let spec = ClassSpec::random_graph(1);
        let a = chain(&[(0, 0), (1, 1)], 1);
        let b = chain(&[(1, 1)], 1);
        let c = chain(&[(1, 1), (2, 2)], 1);
        let d = amalgamate(&spec, &a, &b, &c).unwrap();
        assert!(d.less(0, 0, 1) && d.less(1, 0, 2));
        assert!(d.tuples.is_empty());
        assert_eq!(amalgamate(&spec, &b, &b, &b).unwrap().ids(), b.ids());
    }

    #[test]
    fn amalgamate_errors() {
        let spec = ClassSpec::random_graph(1);
        let a = chain(&[(0, 0)], 1);
        let c = chain(&[(2, 0)], 1);
        let e = chain(&[], 1);
        assert_eq!(amalgamate(&spec, &a, &e, &c), Err(Error::EmptyBaseUnorderable));
        let a2 = chain(&[(0, 0), (5, 3)], 1);
        let c2 = chain(&[(5, 1), (2, 0)], 1);
        assert_eq!(amalgamate(&spec, &a2, &e, &c2), Err(Error::NotDisjointOverBase(5)));
    }

    #[test]
    fn amalgamate_both_inside_same_gap() {
        let spec = ClassSpec::random_graph(1);
        let a = chain(&[(1, 0), (2, 10), (0, 5)], 1);
        let b = chain(&[(1, 0), (2, 10)], 1);
        let c = chain(&[(1, 0), (2, 10), (3, 5)], 1);
        let d = amalgamate(&spec, &a, &b, &c).unwrap();
        // No base element separates 0 from 3, so 3 precedes 0.
        assert!(d.less(3, 0, 0));
        assert!(d.less(1, 0, 3) && d.less(0, 0, 2));
    }

    #[test]
    fn place_policy() {
        let mut u = Universe::new(ClassSpec::pure_orders(1), 0);
        assert_eq!(u.place(0, &Interval::all(), Lean::Low).unwrap(), rat(0));
        u.add_element(vec![rat(0)]).unwrap();
        u.add_element(vec![rat(4)]).unwrap();
        assert_eq!(u.place(0, &Interval::all(), Lean::Low).unwrap(), rat(-1));
        assert_eq!(u.place(0, &Interval::all(), Lean::High).unwrap(), rat(5));
        assert_eq!(u.place(0, &Interval::above(rat(0)), Lean::Low).unwrap(), rat(2));
        assert_eq!(u.place(0, &Interval::above(rat(-3)), Lean::High).unwrap(), rat(5));
        assert!(u.place(0, &Interval::new(Some(rat(1)), Some(rat(1))), Lean::Low).is_err());
    }

    #[test]
    fn insert_between_two_orders() {
        let mut u = Universe::new(ClassSpec::pure_orders(2), 0);
        u.add_element(vec![rat(0), rat(10)]).unwrap();
        u.add_element(vec![rat(1), rat(20)]).unwrap();
        let p = TypeDescriptor::trivial(2);
        let b = [Interval::new(Some(rat(0)), Some(rat(1))), Interval::new(Some(rat(10)), Some(rat(20)))];
        let x = u.insert_between(&p, &b).unwrap();
        assert_eq!(u.coords(x), &[midpoint(&rat(0), &rat(1)), rat(15)]);
    }

    #[test]
    fn insert_between_clash() {
        let mut u = Universe::new(ClassSpec::pure_orders(1), 0);
        let z = u.add_element(vec![rat(0)]).unwrap();
        let p = TypeDescriptor {
            params: vec![z],
            num_vars: 1,
            atoms: BTreeSet::new(),
            orders: vec![vec![Term::Var(0), Term::Param(z)]],
        };
        let r = u.insert_between(&p, &[Interval::new(Some(rat(0)), Some(rat(1)))]);
        assert_eq!(r, Err(Error::IntervalClash { order: 0 }));
        assert_eq!(u.len(), 1);
    }

    #[test]
    fn empty_universe_first_point() {
        let mut u = Universe::new(ClassSpec::pure_orders(1), 0);
        let x = u.extend_realizing(&TypeDescriptor::trivial(1)).unwrap();
        assert_eq!(u.coord(x[0], 0), &rat(0));
    }

    #[test]
    fn realize_adjacent_between() {
        let mut u = Universe::new(ClassSpec::random_graph(1), 0);
        let a = u.add_element(vec![rat(0)]).unwrap();
        let b = u.add_element(vec![rat(4)]).unwrap();
        let v = Term::Var(0);
        let p = TypeDescriptor {
            params: vec![a, b],
            num_vars: 1,
            atoms: [(0, vec![v, Term::Param(a)])].into(),
            orders: vec![vec![Term::Param(a), v, Term::Param(b)]],
        };
        let x = u.extend_realizing(&p).unwrap()[0];
        assert!(u.less(a, 0, x) && u.less(x, 0, b));
        assert!(u.related(x, a) && !u.related(x, b));
        let y = u.extend_realizing(&p).unwrap()[0];
        assert_ne!(x, y);
        assert_eq!(type_of(&u, &[y], &[a, b].into()).unwrap(), p);
    }

    #[test]
    fn k3_free_growth_has_no_triangle() {
        let mut u = Universe::new(ClassSpec::k3_free(1), 11);
        u.grow_random(40);
        let ids: Vec<Id> = u.ids().collect();
        for (i, a) in ids.iter().enumerate() {
            for (j, b) in ids.iter().enumerate().skip(i + 1) {
                for c in ids.iter().skip(j + 1) {
                    assert!(!(u.related(*a, *b) && u.related(*b, *c) && u.related(*a, *c)));
                }
            }
        }
        assert!(u.structure().tuples.len() > 10);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut u = Universe::new(ClassSpec::k3_free(2), 5);
        u.grow_random(12);
        let v = u.snapshot();
        let mut w = Universe::from_snapshot(&v).unwrap();
        assert_eq!(w.structure(), u.structure());
        assert_eq!(w.spec(), u.spec());
        u.grow_random(3);
        w.grow_random(3);
        assert_eq!(w.structure(), u.structure());
    }
}
