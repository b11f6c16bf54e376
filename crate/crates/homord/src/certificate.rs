//! Stage certificates for constructions and their replay against a snapshot.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::automorphism::{AutoId, Lab};
use crate::error::{Error, Result};
use crate::structure::{coord_from_str, coord_to_string, is_partial_isomorphism, FiniteStructure, Id, PartialMap};

/// One checkable fact. Orders are 0-based; `reversed` lists orders read backwards.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assertion {
    Less { a: Id, order: usize, b: Id },
    /// `word` is written left to right over base maps and applied right to left.
    Image { word: Vec<(String, i8)>, from: Id, to: Id },
    Extreme { elem: Id, set: Vec<Id>, order: usize, max: bool },
    /// `elem` lies strictly between the least and greatest element of `set`.
    Inside { elem: Id, set: Vec<Id>, order: usize },
    Indep { a: Vec<Id>, b: Vec<Id>, c: Vec<Id>, relation: String, reversed: Vec<usize> },
    Disjoint { a: Vec<Id>, b: Vec<Id> },
    /// The positional map `from -> to` is a partial isomorphism.
    SameType { from: Vec<Id>, to: Vec<Id> },
    SameOrderType { from: Vec<Id>, to: Vec<Id>, order: usize },
    /// Hypothesis and conclusion of deleting `b` from the base `b ∪ b2`.
    DeleteSupport { a: Vec<Id>, b: Vec<Id>, b2: Vec<Id>, c: Vec<Id>, relation: String, reversed: Vec<usize> },
    PartialIso { map: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    #[serde(flatten)]
    pub assertion: Assertion,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCertificate {
    pub phase: String,
    pub stage: i64,
    /// Elements created during the stage with their coordinates.
    pub created: Vec<(Id, Vec<String>)>,
    /// Pairs added to base maps during the stage.
    pub pairs: Vec<(String, Id, Id)>,
    pub checks: Vec<Check>,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    AllStagesVerified,
    Failed { phase: String, stage: i64, assertion: String },
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        *self == Verdict::AllStagesVerified
    }

    pub fn to_json(&self) -> Value {
        match self {
            Verdict::AllStagesVerified => json!("all-stages-verified"),
            Verdict::Failed { phase, stage, assertion } => {
                json!({ "failed": { "phase": phase, "stage": stage, "assertion": assertion } })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionRun {
    pub kind: String,
    pub seed: u64,
    pub depth: usize,
    pub inputs: Value,
    pub stages: Vec<StageCertificate>,
    pub summary: Value,
}

impl ConstructionRun {
    pub fn new(kind: impl Into<String>, seed: u64, depth: usize) -> Self {
        ConstructionRun {
            kind: kind.into(),
            seed,
            depth,
            inputs: json!({}),
            stages: Vec::new(),
            summary: json!({}),
        }
    }

    pub fn verdict(&self) -> Verdict {
        for s in &self.stages {
            if let Some(c) = s.checks.iter().find(|c| !c.ok) {
                return Verdict::Failed { phase: s.phase.clone(), stage: s.stage, assertion: c.label.clone() };
            }
        }
        Verdict::AllStagesVerified
    }

    pub fn num_checks(&self) -> usize {
        self.stages.iter().map(|s| s.checks.len()).sum()
    }

    pub fn header(&self) -> Value {
        json!({ "header": { "kind": self.kind, "seed": self.seed, "depth": self.depth, "inputs": self.inputs } })
    }

    pub fn footer(&self) -> Value {
        json!({ "summary": self.summary, "verdict": self.verdict().to_json() })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header().to_string());
        out.push('\n');
        for s in &self.stages {
            out.push_str(&serde_json::to_string(s).expect("certificate serializes"));
            out.push('\n');
        }
        out.push_str(&self.footer().to_string());
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse(format!("run file: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Value = serde_json::from_str(lines.next().ok_or_else(|| bad("empty".into()))?)
            .map_err(|e| bad(e.to_string()))?;
        let h = head.get("header").ok_or_else(|| bad("missing header".into()))?;
        let mut run = ConstructionRun::new(
            h["kind"].as_str().unwrap_or_default(),
            h["seed"].as_u64().unwrap_or(0),
            h["depth"].as_u64().unwrap_or(0) as usize,
        );
        run.inputs = h["inputs"].clone();
        for line in lines {
            let v: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if let Some(s) = v.get("summary") {
                run.summary = s.clone();
            } else {
                run.stages.push(serde_json::from_value(v).map_err(|e| bad(e.to_string()))?);
            }
        }
        Ok(run)
    }
}

/// The facts an assertion is evaluated against.
pub struct Env<'a> {
    pub s: &'a FiniteStructure,
    pub maps: &'a BTreeMap<String, PartialMap>,
}

fn coord_lt(s: &FiniteStructure, a: Id, b: Id, o: usize, rev: bool) -> std::result::Result<bool, String> {
    let ca = s.elements.get(&a).ok_or(format!("unknown element {a}"))?;
    let cb = s.elements.get(&b).ok_or(format!("unknown element {b}"))?;
    Ok(if rev { cb[o] < ca[o] } else { ca[o] < cb[o] })
}

fn relation_clauses(rel: &str, n: usize) -> std::result::Result<(Vec<usize>, bool), String> {
    Ok(match rel {
        "free" => (vec![], true),
        "lifted" => (vec![0], true),
        "multi-order" => ((0..n).collect(), false),
        r => {
            let k: usize = r
                .strip_prefix("order-")
                .and_then(|k| k.parse().ok())
                .filter(|k| *k >= 1 && *k <= n)
                .ok_or(format!("unknown relation {r}"))?;
            (vec![k - 1], false)
        }
    })
}

fn eval_indep(
    s: &FiniteStructure,
    a: &[Id],
    b: &[Id],
    c: &[Id],
    rel: &str,
    reversed: &[usize],
) -> std::result::Result<bool, String> {
    let (orders, free) = relation_clauses(rel, s.signature.num_orders)?;
    let base: BTreeSet<Id> = b.iter().copied().collect();
    let a2: BTreeSet<Id> = a.iter().copied().filter(|x| !base.contains(x)).collect();
    let c2: BTreeSet<Id> = c.iter().copied().filter(|x| !base.contains(x)).collect();
    if a2.intersection(&c2).next().is_some() {
        return Ok(false);
    }
    if free
        && s.tuples
            .iter()
            .any(|(_, t)| t.iter().any(|x| a2.contains(x)) && t.iter().any(|x| c2.contains(x)))
    {
        return Ok(false);
    }
    for o in orders {
        let rev = reversed.contains(&o);
        for x in &a2 {
            for y in &c2 {
                if coord_lt(s, *x, *y, o, rev)? {
                    let mut sep = false;
                    for z in &base {
                        if coord_lt(s, *x, *z, o, rev)? && coord_lt(s, *z, *y, o, rev)? {
                            sep = true;
                            break;
                        }
                    }
                    if !sep {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

fn positional(from: &[Id], to: &[Id]) -> std::result::Result<PartialMap, String> {
    if from.len() != to.len() {
        return Err("tuples of different length".into());
    }
    let mut m = PartialMap::new();
    for (a, b) in from.iter().zip(to) {
        match m.get(*a) {
            Some(x) if x == *b => {}
            Some(_) => return Err(format!("{a} sent to two elements")),
            None => m.insert(*a, *b).map_err(|e| e.to_string())?,
        }
    }
    Ok(m)
}

impl Env<'_> {
    /// Evaluates an assertion; `Err` carries the reason it could not be decided.
    pub fn eval(&self, a: &Assertion) -> std::result::Result<bool, String> {
        let s = self.s;
        match a {
            Assertion::Less { a, order, b } => coord_lt(s, *a, *b, *order, false),
            Assertion::Image { word, from, to } => {
                let mut x = *from;
                for (name, e) in word.iter().rev() {
                    let m = self.maps.get(name).ok_or(format!("unknown map {name}"))?;
                    x = if *e > 0 { m.get(x) } else { m.get_inverse(x) }
                        .ok_or(format!("{name}^{e} undetermined at {x}"))?;
                }
                Ok(x == *to)
            }
            Assertion::Extreme { elem, set, order, max } => {
                if !set.contains(elem) {
                    return Ok(false);
                }
                for x in set.iter().filter(|x| *x != elem) {
                    let beyond = if *max { coord_lt(s, *x, *elem, *order, false)? } else { coord_lt(s, *elem, *x, *order, false)? };
                    if !beyond {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Assertion::Inside { elem, set, order } => {
                let mut below = false;
                let mut above = false;
                for x in set {
                    below |= coord_lt(s, *x, *elem, *order, false)?;
                    above |= coord_lt(s, *elem, *x, *order, false)?;
                }
                Ok(below && above)
            }
            Assertion::Indep { a, b, c, relation, reversed } => eval_indep(s, a, b, c, relation, reversed),
            Assertion::Disjoint { a, b } => Ok(!a.iter().any(|x| b.contains(x))),
            Assertion::SameType { from, to } => {
                let m = positional(from, to)?;
                is_partial_isomorphism(s, &m).map_err(|e| e.to_string())
            }
            Assertion::SameOrderType { from, to, order } => {
                positional(from, to)?;
                for i in 0..from.len() {
                    for j in 0..from.len() {
                        if coord_lt(s, from[i], from[j], *order, false)? != coord_lt(s, to[i], to[j], *order, false)? {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            }
            Assertion::DeleteSupport { a, b, b2, c, relation, reversed } => {
                if a.iter().chain(c).any(|x| b.contains(x)) {
                    return Ok(false);
                }
                let bb: Vec<Id> = b.iter().chain(b2).copied().collect();
                if !eval_indep(s, a, &bb, c, relation, reversed)? {
                    return Ok(false);
                }
                let (orders, _) = relation_clauses(relation, s.signature.num_orders)?;
                for o in orders {
                    let rev = reversed.contains(&o);
                    for x in b.iter().filter(|x| !b2.contains(x)) {
                        for y in c.iter().filter(|y| !b2.contains(y)) {
                            if coord_lt(s, *x, *y, o, rev)? {
                                let mut sep = false;
                                for z in b2 {
                                    if coord_lt(s, *x, *z, o, rev)? && coord_lt(s, *z, *y, o, rev)? {
                                        sep = true;
                                    }
                                }
                                if !sep {
                                    return Ok(false);
                                }
                            }
                        }
                    }
                }
                eval_indep(s, a, b2, c, relation, reversed)
            }
            Assertion::PartialIso { map } => {
                let m = self.maps.get(map).ok_or(format!("unknown map {map}"))?;
                is_partial_isomorphism(s, m).map_err(|e| e.to_string())
            }
        }
    }
}

/// Collects assertions while a construction runs and closes them into stage certificates.
pub struct Recorder {
    seen: BTreeSet<Id>,
    logged: Vec<usize>,
    pending: Vec<(String, Assertion)>,
    stages: Vec<StageCertificate>,
}

impl Recorder {
    pub fn new(lab: &Lab) -> Self {
        Recorder {
            seen: lab.universe().ids().collect(),
            logged: (0..lab.len()).map(|id| lab.log(id).len()).collect(),
            pending: Vec::new(),
            stages: Vec::new(),
        }
    }

    pub fn check(&mut self, label: impl Into<String>, a: Assertion) {
        self.pending.push((label.into(), a));
    }

    pub fn less(&mut self, label: impl Into<String>, a: Id, order: usize, b: Id) {
        self.check(label, Assertion::Less { a, order, b });
    }

    pub fn image(&mut self, lab: &Lab, label: impl Into<String>, word: AutoId, from: Id, to: Id) {
        self.check(label, Assertion::Image { word: word_names(lab, word), from, to });
    }

    /// Closes the current stage, evaluating its assertions on the lab.
    pub fn close(&mut self, lab: &Lab, phase: &str, stage: i64) -> bool {
        let u = lab.universe();
        let created: Vec<(Id, Vec<String>)> = u
            .ids()
            .filter(|x| !self.seen.contains(x))
            .map(|x| (x, u.coords(x).iter().map(coord_to_string).collect()))
            .collect();
        self.seen.extend(created.iter().map(|(x, _)| *x));
        self.logged.resize(lab.len(), 0);
        let mut pairs = Vec::new();
        for id in 0..lab.len() {
            let log = lab.log(id);
            pairs.extend(log[self.logged[id]..].iter().map(|(a, b)| (lab.name(id).to_string(), *a, *b)));
            self.logged[id] = log.len();
        }
        let maps = lab_maps(lab);
        let env = Env { s: u.structure(), maps: &maps };
        let checks: Vec<Check> = self
            .pending
            .drain(..)
            .map(|(label, assertion)| {
                let ok = env.eval(&assertion).unwrap_or(false);
                Check { label, assertion, ok }
            })
            .collect();
        let verified = checks.iter().all(|c| c.ok);
        self.stages.push(StageCertificate { phase: phase.to_string(), stage, created, pairs, checks, verified });
        verified
    }

    pub fn into_stages(self) -> Vec<StageCertificate> {
        self.stages
    }
}

/// The base maps of a word, by name.
pub fn word_names(lab: &Lab, word: AutoId) -> Vec<(String, i8)> {
    lab.expand(word).into_iter().map(|(g, e)| (lab.name(g).to_string(), e)).collect()
}

fn lab_maps(lab: &Lab) -> BTreeMap<String, PartialMap> {
    (0..lab.len())
        .filter_map(|id| lab.support(id).map(|m| (lab.name(id).to_string(), m.clone())))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub stages: usize,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({ "stages": self.stages, "checks": self.checks, "ok": self.ok(), "failures": self.failures })
    }
}

/// Re-checks every certificate of a run against a structure snapshot, using
/// only the recorded pairs and the snapshot's coordinates and tuples.
pub fn replay(run: &ConstructionRun, snapshot: &FiniteStructure) -> ReplayReport {
    let mut report = ReplayReport::default();
    let mut maps: BTreeMap<String, PartialMap> = BTreeMap::new();
    for st in &run.stages {
        report.stages += 1;
        let at = format!("{} stage {}", st.phase, st.stage);
        for (id, coords) in &st.created {
            let stored = snapshot.elements.get(id);
            let same = stored.is_some_and(|cs| {
                cs.len() == coords.len()
                    && cs.iter().zip(coords).all(|(c, s)| coord_from_str(s).is_ok_and(|d| d == *c))
            });
            if !same {
                report.failures.push(format!("{at}: element {id} differs from the snapshot"));
            }
        }
        for (name, a, b) in &st.pairs {
            if let Err(e) = maps.entry(name.clone()).or_default().insert(*a, *b) {
                report.failures.push(format!("{at}: map {name}: {e}"));
            }
        }
        let env = Env { s: snapshot, maps: &maps };
        for c in &st.checks {
            report.checks += 1;
            match env.eval(&c.assertion) {
                Ok(true) => {}
                Ok(false) => report.failures.push(format!("{at}: {} is false", c.label)),
                Err(e) => report.failures.push(format!("{at}: {}: {e}", c.label)),
            }
        }
    }
    report
}
