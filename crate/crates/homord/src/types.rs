//! Quantifier-free types over finite parameter sets, split into a relational
//! part and an order part.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fraisse::{forbidden_copy, Universe};
use crate::structure::{Id, Signature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(usize),
    Param(Id),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(i) => write!(f, "v{i}"),
            Term::Param(id) => write!(f, "{id}"),
        }
    }
}

impl Term {
    fn to_json(self) -> Value {
        match self {
            Term::Var(i) => json!(format!("v{i}")),
            Term::Param(id) => json!(id),
        }
    }

    fn from_json(v: &Value) -> Result<Term> {
        if let Some(id) = v.as_u64() {
            return Ok(Term::Param(id));
        }
        let s = v.as_str().ok_or_else(|| Error::Parse(format!("bad term {v}")))?;
        s.strip_prefix('v')
            .and_then(|n| n.parse().ok())
            .map(Term::Var)
            .ok_or_else(|| Error::Parse(format!("bad term {s:?}")))
    }
}

/// A positive relation atom: symbol index and argument terms.
pub type Atom = (usize, Vec<Term>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDescriptor {
    pub params: Vec<Id>,
    pub num_vars: usize,
    pub atoms: BTreeSet<Atom>,
    /// Per order, all terms listed in ascending position.
    pub orders: Vec<Vec<Term>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LangPart {
    pub params: Vec<Id>,
    pub num_vars: usize,
    pub atoms: BTreeSet<Atom>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderPart {
    pub params: Vec<Id>,
    pub num_vars: usize,
    pub orders: Vec<Vec<Term>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Merged {
    Consistent(TypeDescriptor),
    Inconsistent(String),
}

impl TypeDescriptor {
    /// One variable, no parameters, no atoms.
    pub fn trivial(num_orders: usize) -> Self {
        TypeDescriptor {
            params: vec![],
            num_vars: 1,
            atoms: BTreeSet::new(),
            orders: vec![vec![Term::Var(0)]; num_orders],
        }
    }

    pub fn lang_part(&self) -> LangPart {
        LangPart { params: self.params.clone(), num_vars: self.num_vars, atoms: self.atoms.clone() }
    }

    pub fn order_part(&self) -> OrderPart {
        OrderPart { params: self.params.clone(), num_vars: self.num_vars, orders: self.orders.clone() }
    }

    pub fn position(&self, order: usize, t: Term) -> Option<usize> {
        self.orders[order].iter().position(|x| *x == t)
    }

    /// The type of the first `k` variables over the same parameters.
    pub fn prefix(&self, k: usize) -> TypeDescriptor {
        let keep = |t: &Term| !matches!(t, Term::Var(i) if *i >= k);
        TypeDescriptor {
            params: self.params.clone(),
            num_vars: k,
            atoms: self.atoms.iter().filter(|(_, ts)| ts.iter().all(keep)).cloned().collect(),
            orders: self.orders.iter().map(|o| o.iter().copied().filter(keep).collect()).collect(),
        }
    }

    /// Replaces the listed variables by parameters; the remaining variables
    /// keep their relative order and are renumbered from 0.
    pub fn substitute(&self, values: &[(usize, Id)]) -> TypeDescriptor {
        let fixed: BTreeMap<usize, Id> = values.iter().copied().collect();
        let rest: Vec<usize> = (0..self.num_vars).filter(|v| !fixed.contains_key(v)).collect();
        let f = |t: &Term| match t {
            Term::Var(i) => match fixed.get(i) {
                Some(id) => Term::Param(*id),
                None => Term::Var(rest.iter().position(|v| v == i).unwrap()),
            },
            p => *p,
        };
        let mut params = self.params.clone();
        params.extend(fixed.values());
        params.sort_unstable();
        params.dedup();
        TypeDescriptor {
            params,
            num_vars: rest.len(),
            atoms: self
                .atoms
                .iter()
                .map(|(s, ts)| (*s, ts.iter().map(f).collect::<Vec<Term>>()))
                .filter(|(_, ts)| ts.iter().any(|t| matches!(t, Term::Var(_))))
                .collect(),
            orders: self.orders.iter().map(|o| o.iter().map(f).collect()).collect(),
        }
    }

    /// Renumbers variables: new variable `i` is old variable `perm[i]`.
    pub fn permute_vars(&self, perm: &[usize]) -> TypeDescriptor {
        let mut inv = vec![0; perm.len()];
        for (new, old) in perm.iter().enumerate() {
            inv[*old] = new;
        }
        let f = |t: &Term| match t {
            Term::Var(i) => Term::Var(inv[*i]),
            p => *p,
        };
        TypeDescriptor {
            params: self.params.clone(),
            num_vars: self.num_vars,
            atoms: self
                .atoms
                .iter()
                .map(|(s, ts)| (*s, ts.iter().map(f).collect::<Vec<Term>>()))
                .filter(|(_, ts)| ts.iter().any(|t| matches!(t, Term::Var(_))))
                .collect(),
            orders: self.orders.iter().map(|o| o.iter().map(f).collect()).collect(),
        }
    }

    pub fn to_json(&self, sig: &Signature) -> Value {
        json!({
            "params": self.params,
            "vars": self.num_vars,
            "atoms": self.atoms.iter().map(|(s, ts)| {
                json!([sig.name(*s), ts.iter().map(|t| t.to_json()).collect::<Vec<_>>()])
            }).collect::<Vec<_>>(),
            "orders": self.orders.iter().map(|o| {
                o.iter().map(|t| t.to_json()).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(sig: &Signature, v: &Value) -> Result<TypeDescriptor> {
        let bad = |w: &str| Error::Parse(format!("type json: {w}"));
        let mut params: Vec<Id> = v
            .get("params")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("params"))?
            .iter()
            .map(|x| x.as_u64().ok_or_else(|| bad("param id")))
            .collect::<Result<_>>()?;
        params.sort_unstable();
        let num_vars = v.get("vars").and_then(Value::as_u64).ok_or_else(|| bad("vars"))? as usize;
        let mut atoms = BTreeSet::new();
        for a in v.get("atoms").and_then(Value::as_array).ok_or_else(|| bad("atoms"))? {
            let name = a.get(0).and_then(Value::as_str).ok_or_else(|| bad("atom symbol"))?;
            let sym = sig.symbol(name).ok_or_else(|| bad(&format!("unknown symbol {name}")))?;
            let ts = a
                .get(1)
                .and_then(Value::as_array)
                .ok_or_else(|| bad("atom terms"))?
                .iter()
                .map(Term::from_json)
                .collect::<Result<Vec<_>>>()?;
            atoms.insert((sym, ts));
        }
        let orders = v
            .get("orders")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("orders"))?
            .iter()
            .map(|o| {
                o.as_array()
                    .ok_or_else(|| bad("order list"))?
                    .iter()
                    .map(Term::from_json)
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TypeDescriptor { params, num_vars, atoms, orders })
    }
}

pub(crate) fn canonical_atom(sym: usize, mut ts: Vec<Term>, symmetric: bool) -> Atom {
    if symmetric {
        ts.sort();
    }
    (sym, ts)
}

/// The quantifier-free type of `tuple` over `params` under the closed-world reading.
pub fn type_of(u: &Universe, tuple: &[Id], params: &BTreeSet<Id>) -> Result<TypeDescriptor> {
    for id in tuple.iter().chain(params.iter()) {
        if !u.contains(*id) {
            return Err(Error::UnknownElement(*id));
        }
    }
    if let Some(x) = tuple.iter().find(|x| params.contains(x)) {
        return Err(Error::VariableEqualsParameter(*x));
    }
    let mut term_of: BTreeMap<Id, Term> = params.iter().map(|p| (*p, Term::Param(*p))).collect();
    for (i, x) in tuple.iter().enumerate() {
        if term_of.insert(*x, Term::Var(i)).is_some() {
            return Err(Error::Unrealizable(format!("element {x} repeated in tuple")));
        }
    }
    let symmetric = u.spec().symmetric;
    let mut atoms = BTreeSet::new();
    for x in tuple {
        for (sym, ids) in u.tuples_of(*x) {
            if let Some(ts) = ids.iter().map(|y| term_of.get(y).copied()).collect::<Option<Vec<_>>>() {
                atoms.insert(canonical_atom(*sym, ts, symmetric));
            }
        }
    }
    let orders = (0..u.num_orders())
        .map(|o| {
            let mut ids: Vec<Id> = term_of.keys().copied().collect();
            ids.sort_by(|a, b| u.coord(*a, o).cmp(u.coord(*b, o)));
            ids.iter().map(|x| term_of[x]).collect()
        })
        .collect();
    Ok(TypeDescriptor { params: params.iter().copied().collect(), num_vars: tuple.len(), atoms, orders })
}

/// Checks that `p` can be realized in the universe: well-formed, parameters
/// ordered as materialized, atoms valid and no forbidden configuration created.
pub fn check_consistent(u: &Universe, p: &TypeDescriptor) -> Result<()> {
    let fail = |m: String| Err(Error::Unrealizable(m));
    let sig = &u.spec().signature;
    for x in &p.params {
        if !u.contains(*x) {
            return Err(Error::UnknownElement(*x));
        }
    }
    let params: BTreeSet<Id> = p.params.iter().copied().collect();
    if params.len() != p.params.len() {
        return fail("repeated parameter".into());
    }
    let terms: BTreeSet<Term> = params
        .iter()
        .map(|x| Term::Param(*x))
        .chain((0..p.num_vars).map(Term::Var))
        .collect();
    if p.orders.len() != sig.num_orders {
        return fail(format!("{} order lists for {} orders", p.orders.len(), sig.num_orders));
    }
    for (o, list) in p.orders.iter().enumerate() {
        let listed: BTreeSet<Term> = list.iter().copied().collect();
        if listed.len() != list.len() || listed != terms {
            return fail(format!("order {} list is not a permutation of the terms", o + 1));
        }
        let ps: Vec<Id> = list
            .iter()
            .filter_map(|t| if let Term::Param(x) = t { Some(*x) } else { None })
            .collect();
        if ps.windows(2).any(|w| u.coord(w[0], o) >= u.coord(w[1], o)) {
            return fail(format!("order {} contradicts the parameters", o + 1));
        }
    }
    if u.spec().is_pure_orders() && !p.atoms.is_empty() {
        return fail("relation atoms in a pure order class".into());
    }
    for (sym, ts) in &p.atoms {
        if *sym >= sig.relations.len() || sig.arity(*sym) != ts.len() {
            return fail(format!("bad atom symbol or arity: {sym}"));
        }
        if ts.iter().any(|t| !terms.contains(t)) {
            return fail("atom mentions an unknown term".into());
        }
        if !ts.iter().any(|t| matches!(t, Term::Var(_))) {
            return fail("atom over parameters only".into());
        }
        if u.spec().symmetric && ts[0] == ts[1] {
            return fail("loop in a symmetric relation".into());
        }
    }
    // Forbidden configurations that use at least one variable.
    if u.spec().has_forbidden() {
        let nodes: Vec<Term> = terms.iter().copied().collect();
        let index: BTreeMap<Term, usize> = nodes.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let mut tuples: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
        for x in &params {
            for (sym, ids) in u.tuples_of(*x) {
                if let Some(ix) = ids
                    .iter()
                    .map(|y| index.get(&Term::Param(*y)).copied())
                    .collect::<Option<Vec<_>>>()
                {
                    tuples.insert((*sym, ix));
                }
            }
        }
        for (sym, ts) in &p.atoms {
            for perm in u.spec().expand(ts) {
                tuples.insert((*sym, perm.iter().map(|t| index[t]).collect()));
            }
        }
        let must: BTreeSet<usize> = (0..p.num_vars).map(|v| index[&Term::Var(v)]).collect();
        if forbidden_copy(u.spec(), nodes.len(), &tuples, &must) {
            return fail("completes a forbidden configuration".into());
        }
    }
    Ok(())
}

/// Combines a relational part with an order part over the same terms.
pub fn merge(u: &Universe, lang: &LangPart, order: &OrderPart) -> Result<Merged> {
    if lang.num_vars != order.num_vars {
        return Err(Error::Unrealizable(format!(
            "variable sets differ: {} vs {}",
            lang.num_vars, order.num_vars
        )));
    }
    let (mut a, mut b) = (lang.params.clone(), order.params.clone());
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(Error::Unrealizable("parameter sets differ".into()));
    }
    let p = TypeDescriptor {
        params: a,
        num_vars: lang.num_vars,
        atoms: lang.atoms.clone(),
        orders: order.orders.clone(),
    };
    Ok(match check_consistent(u, &p) {
        Ok(()) => Merged::Consistent(p),
        Err(Error::Unrealizable(m)) => Merged::Inconsistent(m),
        Err(e) => return Err(e),
    })
}

/// Pushforward of a type along a parameter substitution (`g·p`).
pub fn pushforward(
    u: &Universe,
    p: &TypeDescriptor,
    f: &dyn Fn(Id) -> Option<Id>,
) -> Result<TypeDescriptor> {
    let mut map = BTreeMap::new();
    for x in &p.params {
        map.insert(*x, f(*x).ok_or(Error::OutsideDomain(*x))?);
    }
    let sub = |t: &Term| match t {
        Term::Param(x) => Term::Param(map[x]),
        v => *v,
    };
    let mut params: Vec<Id> = map.values().copied().collect();
    params.sort_unstable();
    let symmetric = u.spec().symmetric;
    Ok(TypeDescriptor {
        params,
        num_vars: p.num_vars,
        atoms: p
            .atoms
            .iter()
            .map(|(s, ts)| canonical_atom(*s, ts.iter().map(sub).collect(), symmetric))
            .collect(),
        orders: p.orders.iter().map(|o| o.iter().map(sub).collect()).collect(),
    })
}
