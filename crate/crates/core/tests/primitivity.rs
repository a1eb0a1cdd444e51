mod common;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treesmith::registry::{MoveFamily, NielsenMoves, Transpositions};
use treesmith::whitehead::is_primitive;
use treesmith::{Automorphism, Basis, ConjClass, Word};

use common::{abelian_gcd, all_cyclically_reduced};

fn class(basis: &Basis, s: &str) -> ConjClass {
    ConjClass::new(&basis.parse(s).unwrap())
}

/// Classes in the orbit of a basis letter with every intermediate class of
/// length `≤ cap`, reached by Nielsen moves, transpositions and inversions.
fn primitive_orbit(rank: usize, cap: usize) -> HashSet<ConjClass> {
    let mut moves = NielsenMoves.moves(rank);
    moves.extend(Transpositions.moves(rank));
    moves.extend((0..rank).map(|i| Automorphism::inversion(rank, i)));
    let start = ConjClass::new(&Word::letter(0));
    let mut seen = HashSet::from([start.clone()]);
    let mut frontier = vec![start];
    while let Some(c) = frontier.pop() {
        for m in &moves {
            let next = ConjClass::new(&m.apply(c.representative()));
            if next.len() <= cap && seen.insert(next.clone()) {
                frontier.push(next);
            }
        }
    }
    seen
}

#[test]
fn basis_letters_are_primitive() {
    for rank in 2..=4 {
        for i in 0..rank {
            assert!(is_primitive(&ConjClass::new(&Word::letter(i)), rank));
            assert!(is_primitive(&ConjClass::new(&Word::letter(i).inverse()), rank));
        }
    }
}

#[test]
fn squares_are_not_primitive() {
    let b = Basis::new("ab").unwrap();
    for s in ["aa", "aabb", "AA", "aBaB"] {
        let c = class(&b, s);
        assert!(!is_primitive(&c, 2), "{s}");
        assert_eq!(abelian_gcd(c.representative(), 2), 2, "{s}");
    }
    // exponent gcd 1 does not suffice
    for s in ["aabbb", "abAB", "abABa"] {
        assert!(!is_primitive(&class(&b, s), 2), "{s}");
    }
    assert!(is_primitive(&class(&b, "ababb"), 2));
}

#[test]
fn primitive_words_have_coprime_exponents() {
    for (rank, len) in [(2, 7), (3, 5)] {
        for w in all_cyclically_reduced(rank, len) {
            if is_primitive(&ConjClass::new(&w), rank) {
                assert_eq!(abelian_gcd(&w, rank), 1, "{w:?}");
            }
        }
    }
}

#[test]
fn agrees_with_orbit_enumeration() {
    for (rank, len, cap) in [(2, 7, 10), (3, 4, 7)] {
        let orbit = primitive_orbit(rank, cap);
        for w in all_cyclically_reduced(rank, len) {
            let c = ConjClass::new(&w);
            assert_eq!(is_primitive(&c, rank), orbit.contains(&c), "rank {rank}: {w:?}");
        }
    }
}

#[test]
fn images_of_a_letter_are_primitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for rank in 2..=4 {
        let moves = NielsenMoves.moves(rank);
        for _ in 0..50 {
            let mut a = Automorphism::identity(rank);
            for _ in 0..rng.gen_range(1..=8) {
                a = moves[rng.gen_range(0..moves.len())].compose(&a);
            }
            let letter = rng.gen_range(0..rank);
            let image = a.apply(&Word::letter(letter));
            let c = ConjClass::new(&image);
            assert!(is_primitive(&c, rank), "{image:?}");
            assert!(is_primitive(&c.inverse(), rank));
            assert_eq!(abelian_gcd(&image, rank), 1);
        }
    }
}
