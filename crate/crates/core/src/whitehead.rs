//! Primitivity by Whitehead length descent.
//!
//! A cyclic word that is not of minimal length in its automorphism orbit can
//! be shortened by a single Whitehead automorphism. Descending greedily
//! therefore reaches the minimal length, and a class is primitive exactly when
//! that length is 1.

use crate::automorphism::Automorphism;
use crate::word::{ConjClass, Gen, Word};

/// The Whitehead automorphism with multiplier `a` and, for every other letter
/// `x`, a choice `(left, right)` giving `x ↦ a⁻¹^left · x · a^right`.
fn whitehead_move(rank: usize, a: Gen, choice: &[(bool, bool)]) -> Automorphism {
    let aw = Word::reduce([a]);
    let ainv = aw.inverse();
    let mut images = Vec::with_capacity(rank);
    let mut inverse_images = Vec::with_capacity(rank);
    let mut k = 0;
    for i in 0..rank {
        let x = Word::letter(i);
        if i == a.index() {
            images.push(x.clone());
            inverse_images.push(x);
            continue;
        }
        let (l, r) = choice[k];
        k += 1;
        let lw = if l { ainv.clone() } else { Word::identity() };
        let rw = if r { aw.clone() } else { Word::identity() };
        images.push(lw.mul(&x).mul(&rw));
        inverse_images.push(lw.inverse().mul(&x).mul(&rw.inverse()));
    }
    Automorphism::new(images, inverse_images, "whitehead").expect("whitehead moves are invertible")
}

/// All nontrivial Whitehead automorphisms of the second kind for this rank.
pub fn whitehead_moves(rank: usize) -> Vec<Automorphism> {
    let others = rank - 1;
    let mut out = Vec::new();
    for slot in 0..2 * rank {
        let a = Gen::from_slot(slot);
        for mask in 1u64..(1u64 << (2 * others)) {
            let choice: Vec<(bool, bool)> =
                (0..others).map(|k| (mask >> (2 * k) & 1 == 1, mask >> (2 * k + 1) & 1 == 1)).collect();
            out.push(whitehead_move(rank, a, &choice));
        }
    }
    out
}

/// Result of greedy descent: the minimal cyclic word reached and the automorphism carrying the input there.
#[derive(Debug, Clone)]
pub struct Descent {
    pub minimal: ConjClass,
    pub carrier: Automorphism,
    pub steps: usize,
}

pub fn descend(c: &ConjClass, rank: usize) -> Descent {
    let moves = whitehead_moves(rank);
    let mut current = c.representative().clone();
    let mut carrier = Automorphism::identity(rank);
    let mut steps = 0;
    'outer: loop {
        if current.len() <= 1 {
            break;
        }
        for m in &moves {
            let next = m.apply(&current).cyclic_core();
            if next.len() < current.len() {
                current = next;
                carrier = m.compose(&carrier);
                steps += 1;
                continue 'outer;
            }
        }
        break;
    }
    Descent { minimal: ConjClass::new(&current), carrier, steps }
}

pub fn is_primitive(c: &ConjClass, rank: usize) -> bool {
    !c.is_empty() && descend(c, rank).minimal.len() == 1
}

/// Necessary condition for primitivity: the abelianized exponent vector has gcd 1.
pub fn abelian_gcd(w: &Word, rank: usize) -> u64 {
    let mut exps = vec![0i64; rank];
    for g in w.gens() {
        exps[g.index()] += if g.is_inverse() { -1 } else { 1 };
    }
    exps.iter().fold(0u64, |acc, &e| num_integer::gcd(acc, e.unsigned_abs()))
}
