use std::collections::HashMap;

use num_rational::Ratio;
use proptest::prelude::*;
use treesmith::registry::{MoveFamily, NielsenMoves};
use treesmith::splitting::standard_pair;
use treesmith::twist::{act, projective_distance_values, NeighborhoodSpec, Rational};
use treesmith::whitehead::is_primitive;
use treesmith::word::Gen;
use treesmith::{Automorphism, ConjClass, Word};

const RANK: usize = 4;

fn word(max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec((0..RANK, any::<bool>()), 0..=max_len)
        .prop_map(|gs| Word::reduce(gs.into_iter().map(|(i, inv)| Gen::new(i, inv))))
}

fn automorphism() -> impl Strategy<Value = Automorphism> {
    let moves = NielsenMoves.moves(RANK);
    let n = moves.len();
    prop::collection::vec(0..n, 0..8).prop_map(move |ix| {
        ix.iter().fold(Automorphism::identity(RANK), |acc, &i| moves[i].compose(&acc))
    })
}

fn same_letterwise(a: &Automorphism, b: &Automorphism) -> bool {
    (0..RANK).all(|i| a.image(i) == b.image(i))
}

proptest! {
    #[test]
    fn reduce_is_idempotent(u in word(12), v in word(12)) {
        let uv = u.mul(&v);
        prop_assert!(uv.len() <= u.len() + v.len());
        prop_assert_eq!(Word::reduce(uv.gens().iter().copied()), uv);
    }

    #[test]
    fn inversion_and_composition(a in automorphism(), b in automorphism(), c in automorphism()) {
        prop_assert!(same_letterwise(&a.invert().invert(), &a));
        prop_assert!(same_letterwise(&a.compose(&b).compose(&c), &a.compose(&b.compose(&c))));
        for x in [&a, &b, &a.compose(&b)] {
            prop_assert!(x.check_inverse().is_ok());
        }
    }

    #[test]
    fn apply_is_injective(a in automorphism(), words in prop::collection::vec(word(10), 50..100)) {
        let mut images: HashMap<Word, Word> = HashMap::new();
        for w in words {
            let img = a.apply(&w);
            if let Some(prev) = images.insert(img, w.clone()) {
                prop_assert_eq!(prev, w);
            }
        }
    }

    #[test]
    fn primitivity_is_a_class_property(a in automorphism(), i in 0..RANK, h in word(4), w in word(6)) {
        let image = a.apply(&Word::letter(i));
        prop_assert!(is_primitive(&ConjClass::new(&image), RANK));
        let conj = h.mul(&image).mul(&h.inverse());
        prop_assert!(is_primitive(&ConjClass::new(&conj), RANK));
        let c = ConjClass::new(&w);
        let moved = ConjClass::new(&h.mul(&w).mul(&h.inverse()));
        prop_assert_eq!(is_primitive(&c, RANK), is_primitive(&moved, RANK));
        prop_assert_eq!(is_primitive(&c, RANK), is_primitive(&c.inverse(), RANK));
    }

    #[test]
    fn length_is_a_class_function(g in word(10), h in word(6), m in automorphism()) {
        let (t, t2, _) = standard_pair(RANK, None).unwrap();
        for c in [t.with_marking(m.clone()), t2.with_marking(m)] {
            let conj = h.mul(&g).mul(&h.inverse());
            prop_assert_eq!(c.translation_length_word(&g), c.translation_length_word(&conj));
        }
    }

    #[test]
    fn length_is_linear_in_powers(g in word(8), n in 1i64..=5) {
        let (t, t2, _) = standard_pair(RANK, None).unwrap();
        for c in [&t, &t2] {
            let l = c.translation_length_word(&g);
            if l > 0 {
                prop_assert_eq!(c.translation_length_word(&g.pow(n)), n as usize * l);
            }
        }
    }

    #[test]
    fn marking_pullback(g in word(10), a in automorphism()) {
        let (t, _, _) = standard_pair(RANK, None).unwrap();
        let moved = act(&t, &a).unwrap();
        prop_assert_eq!(moved.translation_length_word(&g), t.translation_length_word(&a.apply(&g)));
    }

    #[test]
    fn disjoint_lengths_add(g in word(12), m in automorphism()) {
        let (_, _, y) = standard_pair(RANK, None).unwrap();
        let y = y.with_marking(m);
        let (t, t2) = (y.collapse(1).unwrap(), y.collapse(2).unwrap());
        let c = ConjClass::new(&g);
        prop_assert_eq!(y.translation_length(&c), t.translation_length(&c) + t2.translation_length(&c));
    }

    #[test]
    fn projective_distance_is_a_metric(
        u in prop::collection::vec(0u64..50, 6),
        v in prop::collection::vec(0u64..50, 6),
        w in prop::collection::vec(0u64..50, 6),
    ) {
        prop_assume!([&u, &v, &w].iter().all(|x| x.iter().any(|&y| y > 0)));
        let d = |a: &[u64], b: &[u64]| projective_distance_values(a, b).unwrap();
        prop_assert_eq!(d(&u, &v), d(&v, &u));
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w));
        prop_assert_eq!(d(&u, &u), Ratio::from_integer(0));
    }

    #[test]
    fn nesting_implies_containment(
        outer_c in prop::collection::vec(0u64..20, 5),
        inner_c in prop::collection::vec(0u64..20, 5),
        probe in prop::collection::vec(0u64..20, 5),
        r_old in 1i128..8,
        r_new in 1i128..8,
    ) {
        prop_assume!([&outer_c, &inner_c, &probe].iter().all(|x| x.iter().any(|&y| y > 0)));
        let d = |a: &[u64], b: &[u64]| projective_distance_values(a, b).unwrap();
        let (r_old, r_new): (Rational, Rational) = (Ratio::new(r_old, 8), Ratio::new(r_new, 8));
        if d(&inner_c, &outer_c) + r_new <= r_old && d(&probe, &inner_c) <= r_new {
            prop_assert!(d(&probe, &outer_c) <= r_old);
        }
    }
}

#[test]
fn neighborhoods_nest_by_the_triangle_rule() {
    let (t, _, _) = standard_pair(RANK, None).unwrap();
    let tests = treesmith::twist::default_test_set(RANK, 3, 40, 5);
    let outer = NeighborhoodSpec::around(&t, &tests, Ratio::new(1, 4)).unwrap();
    let moved = act(&t, &Automorphism::twist(RANK, 2, &Word::letter(0)).unwrap()).unwrap();
    let inner = NeighborhoodSpec::around(&moved, &tests, Ratio::new(1, 8)).unwrap();
    let n = inner.nested_in(&outer).unwrap();
    assert_eq!(n.pass, n.distance + n.r_new <= n.r_old);
}
