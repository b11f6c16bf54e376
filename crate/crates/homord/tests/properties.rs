use std::collections::BTreeSet;

use homord::automorphism::{classify_orbital, realize_moving, AutoId, Dir, Lab, Letter, Side, Tag};
use homord::certificate::{replay, ConstructionRun};
use homord::constructions::{build_case1, make_single_plus_orbital};
use homord::fraisse::{amalgamate, ClassSpec, Universe};
use homord::independence::{indep, IndependenceRelation};
use homord::structure::{constraints, is_partial_isomorphism, validate, Element, FiniteStructure, Id, PartialMap};
use homord::types::{merge, pushforward, type_of, Merged, TypeDescriptor};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec_of(k: u8) -> ClassSpec {
    match k % 6 {
        0 => ClassSpec::random_graph(0),
        1 => ClassSpec::random_graph(1),
        2 => ClassSpec::k3_free(1),
        3 => ClassSpec::pure_orders(1),
        4 => ClassSpec::pure_orders(2),
        _ => ClassSpec::random_graph(2),
    }
}

fn ordered_spec(k: u8) -> ClassSpec {
    match k % 3 {
        0 => ClassSpec::random_graph(1),
        1 => ClassSpec::k3_free(1),
        _ => ClassSpec::pure_orders(2),
    }
}

fn universe(spec: ClassSpec, seed: u64, steps: usize) -> Universe {
    let mut u = Universe::new(spec, seed);
    u.grow_random(steps);
    u
}

fn random_subset(rng: &mut ChaCha8Rng, ids: &[Id]) -> BTreeSet<Id> {
    ids.iter().copied().filter(|_| rng.gen_bool(0.4)).collect()
}

fn has_triangle(u: &Universe) -> bool {
    let ids: Vec<Id> = u.ids().collect();
    ids.iter().any(|a| {
        ids.iter().any(|b| a < b && u.related(*a, *b) && ids.iter().any(|c| b < c && u.related(*a, *c) && u.related(*b, *c)))
    })
}

fn is_induced(old: &FiniteStructure, new: &FiniteStructure) -> bool {
    let ids = old.ids();
    ids.iter().all(|x| new.element(*x) == old.element(*x)) && new.induced(&ids).tuples == old.tuples
}

fn tag_of(k: u8) -> Tag {
    [
        Tag::StrictlyUp,
        Tag::StrictlyDown,
        Tag::CofinallyUp,
        Tag::CofinallyDown,
        Tag::UpAboveDownBelow,
        Tag::DownAboveUpBelow,
    ][k as usize % 6]
}

/// Applies a word letter by letter, last letter first.
fn apply_letters(lab: &mut Lab, letters: &[Letter], mut x: Id) -> Id {
    for l in letters.iter().rev() {
        if let Some((c, ce)) = l.conj {
            x = lab.apply_exp(c, x, -ce).unwrap();
        }
        x = lab.apply_exp(l.gen, x, l.exp).unwrap();
        if let Some((c, ce)) = l.conj {
            x = lab.apply_exp(c, x, ce).unwrap();
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn induced_substructures_validate(k in 0u8..6, seed in 0u64..1000, steps in 0usize..12, pick in 0u64..1000) {
        let u = universe(spec_of(k), seed, steps);
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let ids: Vec<Id> = u.ids().collect();
        let sub = random_subset(&mut rng, &ids);
        prop_assert!(validate(u.structure()).is_ok());
        prop_assert!(validate(&u.structure().induced(&sub)).is_ok());
    }

    #[test]
    fn partial_isomorphism_is_symmetric(k in 0u8..6, seed in 0u64..1000, pick in 0u64..1000) {
        let u = universe(spec_of(k), seed, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let mut ids: Vec<Id> = u.ids().collect();
        let n = rng.gen_range(0..=ids.len().min(4));
        let dom: Vec<Id> = ids.choose_multiple(&mut rng, n).copied().collect();
        ids.shuffle(&mut rng);
        let m = PartialMap::from_pairs(dom.into_iter().zip(ids)).unwrap();
        prop_assert_eq!(
            is_partial_isomorphism(u.structure(), &m).unwrap(),
            is_partial_isomorphism(u.structure(), &m.inverse()).unwrap()
        );
    }

    #[test]
    fn constraints_bracket_the_point(k in 1u8..5, seed in 0u64..1000, pick in 0u64..1000) {
        let u = universe(spec_of(k), seed, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let ids: Vec<Id> = u.ids().collect();
        let b = ids[rng.gen_range(0..ids.len())];
        let rest: BTreeSet<Id> = ids.iter().copied().filter(|x| *x != b).filter(|_| rng.gen_bool(0.6)).collect();
        let a = u.structure().induced(&rest);
        let e = Element { id: b, coords: u.coords(b).to_vec() };
        for o in 0..u.num_orders() {
            let (lo, hi) = constraints(&a, &e, o).unwrap();
            if let Some(l) = &lo {
                prop_assert!(l.coords[o] < e.coords[o]);
                prop_assert!(!rest.iter().any(|x| &l.coords[o] < u.coord(*x, o) && u.coord(*x, o) < &e.coords[o]));
            } else {
                prop_assert!(rest.iter().all(|x| u.coord(*x, o) > &e.coords[o]));
            }
            if let Some(h) = &hi {
                prop_assert!(e.coords[o] < h.coords[o]);
            } else {
                prop_assert!(rest.iter().all(|x| u.coord(*x, o) < &e.coords[o]));
            }
        }
    }

    #[test]
    fn growth_is_monotone_and_triangle_free(k in 0u8..6, seed in 0u64..1000, steps in 1usize..10, pick in 0u64..1000) {
        let spec = if k % 2 == 0 { ClassSpec::k3_free(1) } else { spec_of(k) };
        let mut u = universe(spec, seed, steps);
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        for _ in 0..4 {
            let old = u.structure().clone();
            let ids: Vec<Id> = u.ids().collect();
            let params = random_subset(&mut rng, &ids);
            let x = ids[rng.gen_range(0..ids.len())];
            if params.contains(&x) {
                continue;
            }
            let p = type_of(&u, &[x], &params).unwrap();
            let y = u.extend_realizing(&p).unwrap()[0];
            prop_assert_eq!(type_of(&u, &[y], &params).unwrap(), p);
            u.grow_random(1);
            prop_assert!(is_induced(&old, u.structure()));
        }
        if u.spec().has_forbidden() {
            prop_assert!(!has_triangle(&u));
        }
    }

    #[test]
    fn amalgams_satisfy_the_separation_rule(k in 0u8..3, seed in 0u64..1000, pick in 0u64..1000) {
        let spec = ordered_spec(k);
        let u = universe(spec.clone(), seed, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let (mut a, mut b, mut c) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
        for x in u.ids() {
            match rng.gen_range(0..3) {
                0 => a.insert(x),
                1 => b.insert(x),
                _ => c.insert(x),
            };
        }
        prop_assume!(!b.is_empty());
        let ab: BTreeSet<Id> = a.union(&b).copied().collect();
        let cb: BTreeSet<Id> = c.union(&b).copied().collect();
        let s = u.structure();
        let (sa, sb, sc) = (s.induced(&ab), s.induced(&b), s.induced(&cb));
        let d = amalgamate(&spec, &sa, &sb, &sc).unwrap();
        prop_assert!(validate(&d).is_ok());
        for (side, set) in [(&sa, &ab), (&sc, &cb)] {
            prop_assert_eq!(&d.induced(set).tuples, &side.tuples);
            for x in set {
                for y in set {
                    for o in 0..u.num_orders() {
                        prop_assert_eq!(d.less(*x, o, *y), side.less(*x, o, *y));
                    }
                }
            }
        }
        for x in &a {
            for y in &c {
                prop_assert!(!d.tuples.iter().any(|(_, t)| t.contains(x) && t.contains(y)));
                for o in 0..u.num_orders() {
                    let separated = b.iter().any(|m| u.less(*x, o, *m) && u.less(*m, o, *y));
                    prop_assert_eq!(d.less(*x, o, *y), separated);
                }
            }
        }
    }

    #[test]
    fn partial_isomorphisms_extend_back_and_forth(k in 0u8..6, seed in 0u64..1000, pick in 0u64..1000, len in 1usize..4) {
        let mut u = universe(spec_of(k), seed, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let ids: Vec<Id> = u.ids().collect();
        let t1: Vec<Id> = ids.choose_multiple(&mut rng, len).copied().collect();
        let p = type_of(&u, &t1, &BTreeSet::new()).unwrap();
        let t2 = ids.to_vec()
            .windows(len)
            .map(|w| w.to_vec())
            .find(|w| type_of(&u, w, &BTreeSet::new()).unwrap() == p)
            .unwrap_or_else(|| u.extend_realizing(&p).unwrap());
        let mut m = PartialMap::from_pairs(t1.into_iter().zip(t2)).unwrap();
        for step in 0..10 {
            let ids: Vec<Id> = u.ids().collect();
            if step % 2 == 0 {
                let Some(x) = ids.iter().copied().filter(|x| !m.in_domain(*x)).collect::<Vec<_>>().choose(&mut rng).copied() else { continue };
                let dom: BTreeSet<Id> = m.domain().collect();
                let q = pushforward(&u, &type_of(&u, &[x], &dom).unwrap(), &|y| m.get(y)).unwrap();
                let y = u.extend_realizing(&q).unwrap()[0];
                m.insert(x, y).unwrap();
            } else {
                let Some(y) = ids.iter().copied().filter(|y| !m.in_image(*y)).collect::<Vec<_>>().choose(&mut rng).copied() else { continue };
                let img: BTreeSet<Id> = m.image().collect();
                let q = pushforward(&u, &type_of(&u, &[y], &img).unwrap(), &|x| m.get_inverse(x)).unwrap();
                let x = u.extend_realizing(&q).unwrap()[0];
                m.insert(x, y).unwrap();
            }
            prop_assert!(is_partial_isomorphism(u.structure(), &m).unwrap());
        }
    }

    #[test]
    fn types_split_and_merge(k in 0u8..6, seed in 0u64..1000, pick in 0u64..1000) {
        let u = universe(spec_of(k), seed, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let ids: Vec<Id> = u.ids().collect();
        let x: BTreeSet<Id> = ids.choose_multiple(&mut rng, 3).copied().collect();
        let free: Vec<Id> = ids.iter().copied().filter(|i| !x.contains(i)).collect();
        let t1: Vec<Id> = free.choose_multiple(&mut rng, 2).copied().collect();
        let t2: Vec<Id> = free.choose_multiple(&mut rng, t1.len()).copied().collect();
        let (p1, p2) = (type_of(&u, &t1, &x).unwrap(), type_of(&u, &t2, &x).unwrap());
        prop_assert_eq!(merge(&u, &p1.lang_part(), &p1.order_part()).unwrap(), Merged::Consistent(p1.clone()));
        prop_assert_eq!(p1 == p2, p1.lang_part() == p2.lang_part() && p1.order_part() == p2.order_part());
    }

    #[test]
    fn moving_realizations_replay(seed in 0u64..1000, up in any::<bool>(), pick in 0u64..1000) {
        let mut lab = Lab::new(universe(ClassSpec::random_graph(1), seed, 6));
        let tag = if up { Tag::StrictlyUp } else { Tag::StrictlyDown };
        let g = lab.synthesize("g", &[tag]).unwrap();
        let u = lab.universe();
        let top = u.max_element(0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let others: Vec<Id> = u.ids().filter(|x| *x != top).collect();
        let x = random_subset(&mut rng, &others);
        let p = type_of(u, &[top], &x).unwrap();
        let dir = if up { Dir::Up } else { Dir::Down };
        let y = others.choose(&mut rng).copied();
        let a = realize_moving(&mut lab, g, &p, Side::Above, dir, y, 0).unwrap();
        prop_assert_eq!(type_of(lab.universe(), &[a], &x).unwrap(), p);
        let ga = lab.apply(g, a).unwrap();
        prop_assert_eq!(lab.universe().less(a, 0, ga), up);
        if let Some(y) = y {
            prop_assert!(lab.universe().less(y, 0, a));
        }
    }

    #[test]
    fn order_clause_is_monotone_in_the_base(k in 0u8..3, seed in 0u64..1000, pick in 0u64..1000) {
        let spec = ordered_spec(k);
        let u = universe(spec.clone(), seed, 6);
        let rel = IndependenceRelation::natural(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let ids: Vec<Id> = u.ids().collect();
        let (a, b, c) = (random_subset(&mut rng, &ids), random_subset(&mut rng, &ids), random_subset(&mut rng, &ids));
        let bigger: BTreeSet<Id> = b.union(&random_subset(&mut rng, &ids)).copied().collect();
        if indep(&u, &a, &b, &c, &rel).unwrap() {
            prop_assert!(indep(&u, &a, &bigger, &c, &rel).unwrap());
        }
    }

    #[test]
    fn lazy_maps_stay_sound(k in 0u8..6, seed in 0u64..1000, pick in 0u64..1000, n in 2usize..3) {
        let spec = if n == 2 { ClassSpec::pure_orders(2) } else { ClassSpec::random_graph(1) };
        let orders = spec.num_orders();
        let mut lab = Lab::new(universe(spec, seed, 8));
        let tags: Vec<Tag> = (0..orders).map(|o| tag_of(k + o as u8)).collect();
        let g = lab.synthesize("g", &tags).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        for _ in 0..20 {
            let ids: Vec<Id> = lab.universe().ids().collect();
            let x = ids[rng.gen_range(0..ids.len())];
            let _ = if rng.gen_bool(0.5) { lab.apply(g, x) } else { lab.apply_inverse(g, x) }.unwrap();
        }
        let m = lab.support(g).unwrap().clone();
        prop_assert!(is_partial_isomorphism(lab.universe().structure(), &m).unwrap());
        prop_assert_eq!(lab.profile_violation(g), None);
        let u = lab.universe();
        for (o, t) in tags.iter().enumerate() {
            for (x, y) in m.pairs() {
                match t {
                    Tag::StrictlyUp => prop_assert!(u.less(x, o, y)),
                    Tag::StrictlyDown => prop_assert!(u.less(y, o, x)),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn orbital_sign_is_constant(k in 0u8..6, seed in 0u64..1000) {
        let mut lab = Lab::new(universe(ClassSpec::random_graph(1), seed, 6));
        let g = lab.synthesize("g", &[tag_of(k)]).unwrap();
        let ids: Vec<Id> = lab.universe().ids().collect();
        for a in ids {
            let r = classify_orbital(&mut lab, g, a, 0, 10).unwrap();
            prop_assert!(r.sign_constant);
        }
    }

    #[test]
    fn words_associate(seed in 0u64..1000, k in 0u8..6, pick in 0u64..1000) {
        let mut lab = Lab::new(universe(ClassSpec::random_graph(1), seed, 6));
        let g = lab.synthesize("g", &[tag_of(k)]).unwrap();
        let h = lab.synthesize("h", &[tag_of(k + 1)]).unwrap();
        let f = lab.synthesize("f", &[tag_of(k + 2)]).unwrap();
        let w1 = lab.word("w1", vec![Letter::new(g, 1), Letter::conj(h, -1, f, 1)]).unwrap();
        let w2 = lab.word("w2", vec![Letter::conj(f, 1, g, -1)]).unwrap();
        let w3 = lab.word("w3", vec![Letter::new(h, 1), Letter::new(g, -1)]).unwrap();
        let w12 = lab.word("w12", vec![Letter::new(w1, 1), Letter::new(w2, 1)]).unwrap();
        let left = lab.word("l", vec![Letter::new(w12, 1), Letter::new(w3, 1)]).unwrap();
        let w23 = lab.word("w23", vec![Letter::new(w2, 1), Letter::new(w3, 1)]).unwrap();
        let right = lab.word("r", vec![Letter::new(w1, 1), Letter::new(w23, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let ids: Vec<Id> = lab.universe().ids().collect();
        for _ in 0..5 {
            let x = ids[rng.gen_range(0..ids.len())];
            prop_assert_eq!(lab.apply(left, x).unwrap(), lab.apply(right, x).unwrap());
        }
    }

    #[test]
    fn constructions_replay_and_cover(k in 0u8..6, seed in 0u64..1000, depth in 0usize..6) {
        let mut lab = Lab::new(universe(ClassSpec::random_graph(1), seed, 6));
        let initial: Vec<Id> = lab.universe().ids().take(depth).collect();
        let g = lab.synthesize("g", &[tag_of(k)]).unwrap();
        let built = make_single_plus_orbital(&mut lab, g, depth).unwrap();
        prop_assert!(built.run.verdict().is_verified());
        let back = ConstructionRun::from_jsonl(&built.run.to_jsonl()).unwrap();
        prop_assert!(replay(&back, lab.universe().structure()).ok());
        let (dom, img): (Vec<Id>, Vec<Id>) = lab.support(built.map).map(|m| m.pairs().unzip()).unwrap();
        let u = lab.universe();
        let covered: Vec<Id> = built.run.summary["covered"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as Id).collect();
        prop_assert_eq!(covered.len(), depth);
        for x in covered {
            for s in [&dom, &img] {
                prop_assert!(s.iter().any(|a| u.less(*a, 0, x)) && s.iter().any(|b| u.less(x, 0, *b)));
            }
        }
        if k % 6 < 4 {
            prop_assert_eq!(&built.run.summary["covered"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as Id).collect::<Vec<_>>(), &initial);
        }
    }

    #[test]
    fn words_evaluate_letter_by_letter(seed in 0u64..1000, depth in 1usize..5, pick in 0u64..1000) {
        let mut lab = Lab::new(universe(ClassSpec::random_graph(1), seed, 6));
        let g = lab.synthesize("g", &[Tag::StrictlyUp]).unwrap();
        let built = build_case1(&mut lab, g, depth).unwrap();
        let letters = vec![Letter::new(g, 1), Letter::conj(g, 1, built.map, -1)];
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let ids: Vec<Id> = lab.universe().ids().collect();
        for _ in 0..20 {
            let x = ids[rng.gen_range(0..ids.len())];
            let direct = apply_letters(&mut lab, &letters, x);
            prop_assert_eq!(lab.apply(built.word, x).unwrap(), direct);
        }
    }
}

#[test]
fn word_sample_sanity() {
    let mut lab = Lab::new(universe(ClassSpec::random_graph(1), 1, 4));
    let g: AutoId = lab.synthesize("g", &[Tag::StrictlyUp]).unwrap();
    let gi = lab.inverse(g).unwrap();
    let x = lab.universe().ids().next().unwrap();
    let y = lab.apply(g, x).unwrap();
    assert_eq!(lab.apply(gi, y).unwrap(), x);
    let _ = TypeDescriptor::trivial(1);
}
