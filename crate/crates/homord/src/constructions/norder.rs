use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use super::orbital::{case1, dispatch, two_orbitals, Job, Orbit};
use super::{
    absorb, certify_inside, domain, fresh_name, image, next_target, power, pull_type, push_type,
    realize1, View, Want,
};
use crate::automorphism::{AutoId, Dir, Lab, Letter, OrderProfile, Tag};
use crate::certificate::{Assertion, ConstructionRun, Recorder};
use crate::error::{Error, Result};
use crate::structure::Id;
use crate::types::TypeDescriptor;

/// The outcome of the n-order construction: `f` has a single orbital moving
/// every point up on each order, read backwards on the orders in `reversed`.
#[derive(Debug)]
pub struct NOrderBuilt {
    pub f: AutoId,
    pub reversed: BTreeSet<usize>,
    pub run: ConstructionRun,
}

fn declare_single(lab: &mut Lab, f: AutoId, view: &View, upto: usize) {
    for j in 0..=upto {
        let t = if view.rev[j] { Tag::StrictlyDown } else { Tag::SinglePlusOrbital };
        lab.declare(f, j, OrderProfile::plain(t));
    }
}

/// Builds `k3` so that `[k2, k3]` ascends on every order up to `m`, where
/// `k2 = k1^-1 h k1 h` is built from `h` moving down above and up below on `m`.
#[allow(clippy::too_many_arguments)]
fn case3(
    lab: &mut Lab,
    rec: &mut Recorder,
    h: AutoId,
    view: &View,
    m: usize,
    depth: usize,
    targets: &[Id],
    phase: &str,
) -> Result<Orbit> {
    let hi = lab.inverse(h)?;
    let first = Job {
        view: view.clone(),
        order: m,
        chain_orders: vec![m],
        depth: depth.max(1),
        phase: format!("{phase} two orbitals"),
    };
    let w = two_orbitals(lab, rec, hi, &first)?;
    let (y, z) = w.witnesses.expect("two orbitals built at depth one or more");
    let k1 = w.map;
    let k2 = lab.word(fresh_name(lab, "k"), vec![Letter::conj(h, 1, k1, -1), Letter::new(h, 1)])?;
    let p = OrderProfile::threshold(Tag::DownAboveUpBelow, y, z);
    lab.declare(k2, m, if view.rev[m] { p.reversed() } else { p });
    for j in 0..m {
        lab.declare(k2, j, OrderProfile::plain(if view.rev[j] { Tag::StrictlyDown } else { Tag::StrictlyUp }));
    }
    let k3 = lab.partial(fresh_name(lab, "k"), &[])?;
    let word = lab.word(fresh_name(lab, "f"), vec![Letter::new(k2, -1), Letter::conj(k2, 1, k3, -1)])?;
    let low: Vec<usize> = (0..m).collect();
    let all: Vec<usize> = (0..=m).collect();
    let (mut a, mut b, mut c): (BTreeMap<i64, Id>, BTreeMap<i64, Id>, BTreeMap<i64, Id>) = Default::default();
    let mut covered = Vec::new();
    let n = lab.universe().num_orders();
    for s in 0..depth as i64 {
        if s == 0 {
            let x0 = next_target(lab, k3, None);
            let xs: Vec<Id> = x0.into_iter().collect();
            let a0 = realize1(
                lab,
                view,
                &TypeDescriptor::trivial(n),
                Want::default().above(m, [y]).above(m, xs.clone()).above(m, targets.to_vec()).moving(k2, m, Dir::Down),
            )?;
            let ka0 = lab.apply(k2, a0)?;
            let mut want = Want::default().above(m, [y]).above(m, xs.clone()).moving(k2, m, Dir::Down);
            for j in &low {
                want = want.above(*j, [a0]).below(*j, [ka0]);
            }
            let b0 = realize1(lab, view, &push_type(lab, k3, &[a0])?, want)?;
            lab.set_pair(k3, a0, b0)?;
            let kb0 = lab.apply(k2, b0)?;
            let mut want = Want::default();
            for j in &all {
                want = want.above(*j, [ka0]);
            }
            for j in &low {
                for x in targets {
                    let kx = lab.apply(k2, *x)?;
                    want = want.above(*j, [kx]);
                }
            }
            let c0 = realize1(lab, view, &pull_type(lab, k3, &[kb0])?, want)?;
            lab.set_pair(k3, c0, kb0)?;
            let a1 = lab.apply_inverse(k2, c0)?;
            let bm1 = realize1(
                lab,
                view,
                &push_type(lab, k3, &[ka0])?,
                Want::default().below(m, [z]).below(m, xs.clone()).moving(k2, m, Dir::Up),
            )?;
            lab.set_pair(k3, ka0, bm1)?;
            let kib = lab.apply_inverse(k2, bm1)?;
            let kia0 = lab.apply_inverse(k2, a0)?;
            let mut want = Want::default().below(m, [z]).below(m, xs).moving(k2, m, Dir::Up);
            for j in &all {
                want = want.below(*j, [kia0]).below(*j, targets.to_vec());
            }
            let am1 = realize1(lab, view, &pull_type(lab, k3, &[kib])?, want)?;
            lab.set_pair(k3, am1, kib)?;
            a.extend([(0, a0), (1, a1), (-1, am1)]);
            b.extend([(0, b0), (-1, bm1)]);
            c.insert(0, c0);
        } else {
            let lo_b = [power(lab, rec, k2, b[&0], 1 - s)?, lab.apply_inverse(k2, b[&(s - 1)])?];
            let bs = realize1(
                lab,
                view,
                &push_type(lab, k3, &[a[&s]])?,
                Want::default().above(m, lo_b).moving(k2, m, Dir::Down),
            )?;
            lab.set_pair(k3, a[&s], bs)?;
            b.insert(s, bs);
            let kbs = lab.apply(k2, bs)?;
            let lo_c = [lab.apply(k2, c[&(s - 1)])?, power(lab, rec, k2, a[&0], s + 1)?];
            let mut want = Want::default();
            for j in &low {
                want = want.above(*j, lo_c);
            }
            let cs = realize1(lab, view, &pull_type(lab, k3, &[kbs])?, want)?;
            lab.set_pair(k3, cs, kbs)?;
            c.insert(s, cs);
            a.insert(s + 1, lab.apply_inverse(k2, cs)?);
            let kam = lab.apply(k2, a[&-s])?;
            let hi_b = [lab.apply(k2, b[&-s])?, power(lab, rec, k2, b[&0], s)?];
            let mut want = Want::default().below(m, [hi_b[0]]).moving(k2, m, Dir::Up);
            for j in &low {
                want = want.below(*j, hi_b);
            }
            let bm = realize1(lab, view, &push_type(lab, k3, &[kam])?, want)?;
            lab.set_pair(k3, kam, bm)?;
            b.insert(-s - 1, bm);
            let kib = lab.apply_inverse(k2, bm)?;
            let hi_a = [lab.apply_inverse(k2, a[&-s])?, power(lab, rec, k2, a[&0], -s)?];
            let mut want = Want::default().moving(k2, m, Dir::Up);
            for j in &all {
                want = want.below(*j, hi_a);
            }
            let am = realize1(lab, view, &pull_type(lab, k3, &[kib])?, want)?;
            lab.set_pair(k3, am, kib)?;
            a.insert(-s - 1, am);
        }
        if let Some(x) = next_target(lab, k3, Some(&all)) {
            absorb(lab, k3, x)?;
            covered.push(x);
            certify_inside(rec, lab, k3, &all, x);
        }

        let (an, an1, am, am1) = (a[&s], a[&(s + 1)], a[&-s], a[&(-s - 1)]);
        rec.image(lab, format!("[k2,k3] a{s} = a{}", s + 1), word, an, an1);
        rec.image(lab, format!("[k2,k3] a{} = a{}", -s - 1, -s), word, am1, am);
        for j in &all {
            view.less(rec, format!("a{s} < a{} on order {}", s + 1, j + 1), an, *j, an1);
            view.less(rec, format!("a{} < a{} on order {}", -s - 1, -s, j + 1), am1, *j, am);
        }
        let (bs, bm) = (b[&s], b[&(-s - 1)]);
        let growth_low = [
            (an1, power(lab, rec, k2, a[&0], s)?, true),
            (am1, power(lab, rec, k2, a[&0], -s)?, false),
            (bs, power(lab, rec, k2, b[&0], s / 2 - 1)?, true),
            (bm, power(lab, rec, k2, b[&0], 1 - (s + 1) / 2)?, false),
        ];
        let growth_top = [
            (an1, power(lab, rec, k2, a[&0], 1 - (s + 1) / 2)?, true),
            (am1, power(lab, rec, k2, a[&-1], 1 - s)?, false),
            (bs, power(lab, rec, k2, b[&0], 1 - s)?, true),
            (bm, power(lab, rec, k2, b[&-1], 1 - s / 2)?, false),
        ];
        for (orders, facts) in [(low.clone(), growth_low), (vec![m], growth_top)] {
            for (x, bound, above) in facts {
                for j in &orders {
                    if above {
                        view.less(rec, format!("{x} above {bound} on order {}", j + 1), bound, *j, x);
                    } else {
                        view.less(rec, format!("{x} below {bound} on order {}", j + 1), x, *j, bound);
                    }
                }
            }
        }
        rec.check("k3 is a partial isomorphism", Assertion::PartialIso { map: lab.name(k3).to_string() });
        let (d, i) = (domain(lab, k3), image(lab, k3));
        let kib = lab.apply_inverse(k2, bm)?;
        let kbs = lab.apply(k2, bs)?;
        for j in &all {
            let top = *j == m;
            view.extreme(rec, format!("min A on order {}", j + 1), am1, &d, *j, false);
            view.extreme(rec, format!("max A on order {}", j + 1), if top { an } else { c[&s] }, &d, *j, true);
            view.extreme(rec, format!("min B on order {}", j + 1), kib, &i, *j, false);
            view.extreme(rec, format!("max B on order {}", j + 1), if top { bs } else { kbs }, &i, *j, true);
        }
        rec.close(lab, phase, s);
    }
    Ok(Orbit { map: k3, word, chain: a, covered, witnesses: None })
}

/// Builds a product of conjugates of `g` and `g^-1` with a single orbital on
/// every order of a pure order class, after reversing the orders it returns.
pub fn build_n_order_single_orbital(lab: &mut Lab, g: AutoId, depth: usize) -> Result<NOrderBuilt> {
    let u = lab.universe();
    if !u.spec().is_pure_orders() || u.num_orders() == 0 {
        return Err(Error::RelationNotApplicable("the n-order construction needs a pure order class".into()));
    }
    let n = u.num_orders();
    let initial: Vec<Id> = u.ids().take(depth).collect();
    let mut rec = Recorder::new(lab);
    let mut view = View::new(n);
    let mut levels = Vec::new();
    let job = Job { view: view.clone(), order: 0, chain_orders: vec![0], depth, phase: "order 1".into() };
    let mut orbit = dispatch(lab, &mut rec, g, &job)?;
    let mut f = orbit.word;
    declare_single(lab, f, &view, 0);
    levels.push(json!({ "order": 1, "case": "base", "word": lab.label(f) }));
    let mut window = vec![0];
    for m in 1..n {
        let t = view.tag(lab.profile(f, m)?.tag, m);
        let phase = format!("order {}", m + 1);
        let case = match t {
            Tag::StrictlyUp | Tag::CofinallyUp | Tag::SinglePlusOrbital => {
                let job = Job { view: view.clone(), order: m, chain_orders: (0..=m).collect(), depth, phase: format!("{phase} case I") };
                orbit = case1(lab, &mut rec, f, &job)?;
                window = vec![m];
                "I"
            }
            Tag::StrictlyDown | Tag::CofinallyDown => {
                view.rev[m] = true;
                let job = Job { view: view.clone(), order: m, chain_orders: (0..=m).collect(), depth, phase: format!("{phase} case II") };
                orbit = case1(lab, &mut rec, f, &job)?;
                window = vec![m];
                "II"
            }
            Tag::DownAboveUpBelow => {
                orbit = case3(lab, &mut rec, f, &view, m, depth, &initial, &format!("{phase} case III"))?;
                window = (0..=m).collect();
                "III"
            }
            Tag::UpAboveDownBelow => {
                let fi = lab.inverse(f)?;
                for j in 0..m {
                    view.rev[j] = !view.rev[j];
                }
                orbit = case3(lab, &mut rec, fi, &view, m, depth, &initial, &format!("{phase} case IV"))?;
                window = (0..=m).collect();
                "IV"
            }
            Tag::Identity => return Err(Error::TrivialInput),
            Tag::Unconstrained => {
                return Err(Error::ProfileMismatch(format!("no case applies to an unconstrained map on order {}", m + 1)))
            }
        };
        f = orbit.word;
        declare_single(lab, f, &view, m);
        levels.push(json!({ "order": m + 1, "case": case, "word": lab.label(f) }));
    }
    let u = lab.universe();
    let chain: Vec<Id> = orbit.chain.values().copied().collect();
    let inside = |x: Id| {
        window.iter().all(|o| {
            chain.iter().any(|a| view.lt(u, *a, *o, x)) && chain.iter().any(|b| view.lt(u, x, *o, *b))
        })
    };
    let covered: Vec<Id> = initial.iter().copied().filter(|x| inside(*x)).collect();
    let reversed = view.reversed();
    let mut run = ConstructionRun::new("n-order", lab.universe().seed(), depth);
    run.inputs = json!({ "g": lab.to_json(g) });
    run.summary = json!({
        "f": lab.display(f),
        "reversed": reversed.iter().map(|o| o + 1).collect::<Vec<_>>(),
        "levels": levels,
        "final": orbit.summary(lab),
        "window_orders": window.iter().map(|o| o + 1).collect::<Vec<_>>(),
        "initial": initial,
        "initial_covered": covered,
    });
    run.stages = rec.into_stages();
    Ok(NOrderBuilt { f, reversed, run })
}
