//! Signatures, finite structures carrying several strict linear orders as
//! dense rational coordinates, and partial maps between their elements.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub type Id = u64;
pub type Coord = BigRational;
/// A relation tuple: symbol index into the signature plus element ids.
pub type Tuple = (usize, Vec<Id>);

pub fn rat(n: i64) -> Coord {
    BigRational::from_integer(BigInt::from(n))
}

pub fn midpoint(a: &Coord, b: &Coord) -> Coord {
    (a + b) / rat(2)
}

pub fn coord_to_string(c: &Coord) -> String {
    format!("{}/{}", c.numer(), c.denom())
}

pub fn coord_from_str(s: &str) -> Result<Coord> {
    let s = s.trim();
    let parse = |t: &str| {
        t.trim()
            .parse::<BigInt>()
            .map_err(|_| Error::Parse(format!("bad rational {s:?}")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse(d)?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(parse(n)?, d))
        }
        None => Ok(BigRational::new(parse(s)?, BigInt::one())),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub relations: Vec<(String, usize)>,
    pub num_orders: usize,
}

impl Signature {
    pub fn new(relations: Vec<(String, usize)>, num_orders: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, arity) in &relations {
            if *arity == 0 {
                return Err(Error::InvalidSignature(format!("symbol {name} has arity 0")));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidSignature(format!("duplicate symbol {name}")));
            }
        }
        Ok(Signature { relations, num_orders })
    }

    pub fn symbol(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|(n, _)| n == name)
    }

    pub fn arity(&self, sym: usize) -> usize {
        self.relations[sym].1
    }

    pub fn name(&self, sym: usize) -> &str {
        &self.relations[sym].0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub id: Id,
    pub coords: Vec<Coord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteStructure {
    pub signature: Signature,
    pub elements: BTreeMap<Id, Vec<Coord>>,
    pub tuples: BTreeSet<Tuple>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    CoordCount { id: Id, expected: usize, found: usize },
    OrderTie { order: usize, a: Id, b: Id },
    UnknownSymbol { sym: usize },
    ArityMismatch { sym: usize, expected: usize, found: usize },
    DanglingId { sym: usize, id: Id },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CoordCount { id, expected, found } => {
                write!(f, "coordinate count: element {id} has {found}, expected {expected}")
            }
            Violation::OrderTie { order, a, b } => {
                write!(f, "order-{} tie: elements {a} and {b}", order + 1)
            }
            Violation::UnknownSymbol { sym } => write!(f, "unknown symbol index {sym}"),
            Violation::ArityMismatch { sym, expected, found } => {
                write!(f, "arity mismatch: symbol {sym} expects {expected}, tuple has {found}")
            }
            Violation::DanglingId { sym, id } => {
                write!(f, "dangling id {id} in a tuple of symbol {sym}")
            }
        }
    }
}

impl FiniteStructure {
    pub fn new(signature: Signature) -> Self {
        FiniteStructure { signature, elements: BTreeMap::new(), tuples: BTreeSet::new() }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, id: Id) -> bool {
        self.elements.contains_key(&id)
    }

    pub fn coord(&self, id: Id, order: usize) -> Option<&Coord> {
        self.elements.get(&id).map(|c| &c[order])
    }

    pub fn less(&self, a: Id, order: usize, b: Id) -> bool {
        self.elements[&a][order] < self.elements[&b][order]
    }

    pub fn element(&self, id: Id) -> Option<Element> {
        self.elements.get(&id).map(|c| Element { id, coords: c.clone() })
    }

    pub fn insert_element(&mut self, e: Element) {
        self.elements.insert(e.id, e.coords);
    }

    pub fn add_tuple(&mut self, sym: usize, ids: Vec<Id>) {
        self.tuples.insert((sym, ids));
    }

    /// The induced substructure on `ids` (ids absent from the structure are ignored).
    pub fn induced(&self, ids: &BTreeSet<Id>) -> FiniteStructure {
        let elements = self
            .elements
            .iter()
            .filter(|(id, _)| ids.contains(id))
            .map(|(id, c)| (*id, c.clone()))
            .collect();
        let tuples = self
            .tuples
            .iter()
            .filter(|(_, t)| t.iter().all(|x| ids.contains(x)))
            .cloned()
            .collect();
        FiniteStructure { signature: self.signature.clone(), elements, tuples }
    }

    pub fn ids(&self) -> BTreeSet<Id> {
        self.elements.keys().copied().collect()
    }

    pub fn to_json(&self) -> Value {
        let relations: Vec<Value> =
            self.signature.relations.iter().map(|(n, a)| json!([n, a])).collect();
        let elements: Vec<Value> = self
            .elements
            .iter()
            .map(|(id, cs)| {
                json!({"id": id, "coords": cs.iter().map(coord_to_string).collect::<Vec<_>>()})
            })
            .collect();
        let tuples: Vec<Value> = self
            .tuples
            .iter()
            .map(|(s, ids)| json!([self.signature.name(*s), ids]))
            .collect();
        json!({
            "signature": {"relations": relations, "num_orders": self.signature.num_orders},
            "elements": elements,
            "tuples": tuples,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("structure json: {what}"));
        let sig = v.get("signature").ok_or_else(|| bad("missing signature"))?;
        let num_orders = sig
            .get("num_orders")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing num_orders"))? as usize;
        let mut relations = Vec::new();
        for r in sig.get("relations").and_then(Value::as_array).ok_or_else(|| bad("relations"))? {
            let name = r.get(0).and_then(Value::as_str).ok_or_else(|| bad("relation name"))?;
            let arity = r.get(1).and_then(Value::as_u64).ok_or_else(|| bad("relation arity"))?;
            relations.push((name.to_string(), arity as usize));
        }
        let signature = Signature::new(relations, num_orders)?;
        let mut s = FiniteStructure::new(signature);
        for e in v.get("elements").and_then(Value::as_array).ok_or_else(|| bad("elements"))? {
            let id = e.get("id").and_then(Value::as_u64).ok_or_else(|| bad("element id"))?;
            let mut coords = Vec::new();
            for c in e.get("coords").and_then(Value::as_array).ok_or_else(|| bad("coords"))? {
                let c = c.as_str().ok_or_else(|| bad("coordinate must be a string"))?;
                coords.push(coord_from_str(c)?);
            }
            s.elements.insert(id, coords);
        }
        for t in v.get("tuples").and_then(Value::as_array).ok_or_else(|| bad("tuples"))? {
            let name = t.get(0).and_then(Value::as_str).ok_or_else(|| bad("tuple symbol"))?;
            let sym = s
                .signature
                .symbol(name)
                .ok_or_else(|| bad(&format!("unknown symbol {name}")))?;
            let ids = t
                .get(1)
                .and_then(Value::as_array)
                .ok_or_else(|| bad("tuple ids"))?
                .iter()
                .map(|x| x.as_u64().ok_or_else(|| bad("tuple id")))
                .collect::<Result<Vec<_>>>()?;
            s.tuples.insert((sym, ids));
        }
        Ok(s)
    }
}

pub fn validate(s: &FiniteStructure) -> std::result::Result<(), Violation> {
    let n = s.signature.num_orders;
    for (id, cs) in &s.elements {
        if cs.len() != n {
            return Err(Violation::CoordCount { id: *id, expected: n, found: cs.len() });
        }
    }
    for order in 0..n {
        let mut seen: BTreeMap<&Coord, Id> = BTreeMap::new();
        for (id, cs) in &s.elements {
            if let Some(prev) = seen.insert(&cs[order], *id) {
                return Err(Violation::OrderTie { order, a: prev, b: *id });
            }
        }
    }
    for (sym, ids) in &s.tuples {
        if *sym >= s.signature.relations.len() {
            return Err(Violation::UnknownSymbol { sym: *sym });
        }
        let expected = s.signature.arity(*sym);
        if ids.len() != expected {
            return Err(Violation::ArityMismatch { sym: *sym, expected, found: ids.len() });
        }
        if let Some(id) = ids.iter().find(|id| !s.contains(**id)) {
            return Err(Violation::DanglingId { sym: *sym, id: *id });
        }
    }
    Ok(())
}

/// A finite injection between element ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialMap {
    fwd: BTreeMap<Id, Id>,
    bwd: BTreeMap<Id, Id>,
}

impl PartialMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Id, Id)>) -> Result<Self> {
        let mut m = PartialMap::new();
        for (a, b) in pairs {
            m.insert(a, b)?;
        }
        Ok(m)
    }

    /// Adds `a -> b`; re-adding an existing pair is a no-op.
    pub fn insert(&mut self, a: Id, b: Id) -> Result<()> {
        match (self.fwd.get(&a), self.bwd.get(&b)) {
            (Some(&x), _) if x == b => Ok(()),
            (None, None) => {
                self.fwd.insert(a, b);
                self.bwd.insert(b, a);
                Ok(())
            }
            _ => Err(Error::NotInjective(a, b)),
        }
    }

    pub fn get(&self, a: Id) -> Option<Id> {
        self.fwd.get(&a).copied()
    }

    pub fn get_inverse(&self, b: Id) -> Option<Id> {
        self.bwd.get(&b).copied()
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Id, Id)> + '_ {
        self.fwd.iter().map(|(a, b)| (*a, *b))
    }

    pub fn domain(&self) -> impl Iterator<Item = Id> + '_ {
        self.fwd.keys().copied()
    }

    pub fn image(&self) -> impl Iterator<Item = Id> + '_ {
        self.bwd.keys().copied()
    }

    pub fn in_domain(&self, a: Id) -> bool {
        self.fwd.contains_key(&a)
    }

    pub fn in_image(&self, b: Id) -> bool {
        self.bwd.contains_key(&b)
    }

    pub fn inverse(&self) -> PartialMap {
        PartialMap { fwd: self.bwd.clone(), bwd: self.fwd.clone() }
    }
}

pub fn is_partial_isomorphism(s: &FiniteStructure, m: &PartialMap) -> Result<bool> {
    for (a, b) in m.pairs() {
        for x in [a, b] {
            if !s.contains(x) {
                return Err(Error::UnknownElement(x));
            }
        }
    }
    for order in 0..s.signature.num_orders {
        let mut dom: Vec<(Id, Id)> = m.pairs().collect();
        dom.sort_by(|x, y| s.elements[&x.0][order].cmp(&s.elements[&y.0][order]));
        for w in dom.windows(2) {
            if s.elements[&w[0].1][order] >= s.elements[&w[1].1][order] {
                return Ok(false);
            }
        }
    }
    for (sym, ids) in &s.tuples {
        if let Some(img) = ids.iter().map(|x| m.get(*x)).collect::<Option<Vec<_>>>() {
            if !s.tuples.contains(&(*sym, img)) {
                return Ok(false);
            }
        }
        if let Some(pre) = ids.iter().map(|x| m.get_inverse(*x)).collect::<Option<Vec<_>>>() {
            if !s.tuples.contains(&(*sym, pre)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Nearest elements of `a` below and above `b` on order `order`.
pub fn constraints(
    a: &FiniteStructure,
    b: &Element,
    order: usize,
) -> Result<(Option<Element>, Option<Element>)> {
    if a.contains(b.id) {
        return Err(Error::NotExternal(b.id));
    }
    let x = &b.coords[order];
    let mut lower: Option<(Id, &Coord)> = None;
    let mut upper: Option<(Id, &Coord)> = None;
    for (id, cs) in &a.elements {
        let c = &cs[order];
        if c < x && lower.is_none_or(|(_, l)| c > l) {
            lower = Some((*id, c));
        }
        if c > x && upper.is_none_or(|(_, u)| c < u) {
            upper = Some((*id, c));
        }
    }
    Ok((lower.and_then(|(id, _)| a.element(id)), upper.and_then(|(id, _)| a.element(id))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(coords: &[i64]) -> FiniteStructure {
        let mut s = FiniteStructure::new(Signature::new(vec![], 1).unwrap());
        for (i, c) in coords.iter().enumerate() {
            s.insert_element(Element { id: i as Id, coords: vec![rat(*c)] });
        }
        s
    }

    #[test]
    fn empty_structure_is_valid() {
        let s = FiniteStructure::new(Signature::new(vec![("E".into(), 2)], 2).unwrap());
        assert_eq!(validate(&s), Ok(()));
    }

    #[test]
    fn tie_is_reported() {
        let s = line(&[3, 3]);
        let v = validate(&s).unwrap_err();
        assert!(v.to_string().starts_with("order-1 tie"));
    }

    #[test]
    fn dangling_id_is_reported() {
        let mut s = FiniteStructure::new(Signature::new(vec![("E".into(), 2)], 0).unwrap());
        s.insert_element(Element { id: 0, coords: vec![] });
        s.add_tuple(0, vec![0, 9]);
        assert!(matches!(validate(&s), Err(Violation::DanglingId { id: 9, .. })));
        assert!(validate(&s).unwrap_err().to_string().starts_with("dangling id"));
    }

    #[test]
    fn signature_rejects_duplicates_and_zero_arity() {
        assert!(Signature::new(vec![("E".into(), 2), ("E".into(), 1)], 0).is_err());
        assert!(Signature::new(vec![("P".into(), 0)], 0).is_err());
    }

    #[test]
    fn identity_and_swap() {
        let s = line(&[1, 2, 3]);
        let id = PartialMap::from_pairs([(0, 0), (1, 1), (2, 2)]).unwrap();
        assert!(is_partial_isomorphism(&s, &id).unwrap());
        let swap = PartialMap::from_pairs([(0, 1), (1, 0)]).unwrap();
        assert!(!is_partial_isomorphism(&s, &swap).unwrap());
        let bad = PartialMap::from_pairs([(0, 7)]).unwrap();
        assert_eq!(is_partial_isomorphism(&s, &bad), Err(Error::UnknownElement(7)));
    }

    #[test]
    fn path_graph_maps_agree_with_oracle() {
        // Path 0-1-2 with one order; compare against a direct edge-by-edge check.
        let mut s = line(&[1, 2, 3]);
        for (a, b) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            s.add_tuple(0, vec![a, b]);
        }
        s.signature = Signature::new(vec![("E".into(), 2)], 1).unwrap();
        let ids = [0u64, 1, 2];
        let edge = |a: Id, b: Id| s.tuples.contains(&(0, vec![a, b]));
        for mask in 1u32..8 {
            let dom: Vec<Id> = ids.iter().copied().filter(|i| mask >> i & 1 == 1).collect();
            let k = dom.len();
            let mut img = vec![0usize; k];
            loop {
                let targets: Vec<Id> = img.iter().map(|&i| ids[i]).collect();
                let distinct = targets.iter().collect::<BTreeSet<_>>().len() == k;
                if distinct {
                    let m = PartialMap::from_pairs(dom.iter().copied().zip(targets.iter().copied()))
                        .unwrap();
                    let mut expect = true;
                    for i in 0..k {
                        for j in 0..k {
                            if edge(dom[i], dom[j]) != edge(targets[i], targets[j]) {
                                expect = false;
                            }
                            if i != j && (dom[i] < dom[j]) != (targets[i] < targets[j]) {
                                expect = false;
                            }
                        }
                    }
                    assert_eq!(is_partial_isomorphism(&s, &m).unwrap(), expect, "{dom:?}->{targets:?}");
                }
                let mut p = 0;
                loop {
                    if p == k {
                        break;
                    }
                    img[p] += 1;
                    if img[p] < 3 {
                        break;
                    }
                    img[p] = 0;
                    p += 1;
                }
                if p == k {
                    break;
                }
            }
        }
    }

    #[test]
    fn constraints_examples() {
        let a = line(&[1, 3, 7]);
        let b = Element { id: 10, coords: vec![rat(4)] };
        let (lo, hi) = constraints(&a, &b, 0).unwrap();
        assert_eq!(lo.unwrap().coords[0], rat(3));
        assert_eq!(hi.unwrap().coords[0], rat(7));
        let empty = line(&[]);
        assert_eq!(constraints(&empty, &b, 0).unwrap(), (None, None));
        let single = line(&[2]);
        let b5 = Element { id: 10, coords: vec![rat(5)] };
        let (lo, hi) = constraints(&single, &b5, 0).unwrap();
        assert_eq!(lo.unwrap().coords[0], rat(2));
        assert!(hi.is_none());
        let inside = Element { id: 1, coords: vec![rat(3)] };
        assert_eq!(constraints(&a, &inside, 0), Err(Error::NotExternal(1)));
    }

    #[test]
    fn json_round_trip() {
        let mut s = line(&[1, 2]);
        s.signature = Signature::new(vec![("E".into(), 2)], 1).unwrap();
        s.elements.insert(5, vec![BigRational::new(BigInt::from(1), BigInt::from(3))]);
        s.add_tuple(0, vec![0, 5]);
        let v = s.to_json();
        assert_eq!(v["elements"][2]["coords"][0], "1/3");
        assert_eq!(FiniteStructure::from_json(&v).unwrap(), s);
    }

    #[test]
    fn partial_map_injectivity() {
        let mut m = PartialMap::new();
        m.insert(1, 2).unwrap();
        m.insert(1, 2).unwrap();
        assert!(m.insert(1, 3).is_err());
        assert!(m.insert(4, 2).is_err());
        assert_eq!(m.inverse().get(2), Some(1));
    }
}
