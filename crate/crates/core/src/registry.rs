//! Named strategy registries.
//!
//! Two places in the construction choose among interchangeable automorphism
//! families: the expansion map raised to a power on a sub-basis, and the
//! elementary moves that generate factor candidates. Both are looked up by name
//! so configs and tests can swap them without touching the pipeline.

use std::collections::BTreeMap;

use crate::automorphism::Automorphism;
use crate::error::{Error, Result};
use crate::splitting::StandardRoles;
use crate::word::Word;

/// An automorphism of the sub-basis `letters`, extended by the identity.
pub trait ExpansionStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn automorphism(&self, rank: usize, letters: &[usize]) -> Result<Automorphism>;
}

/// `x₁ ↦ x₂, …, x_{r−1} ↦ x_r, x_r ↦ x₁x₂`.
pub struct CyclicShift;

impl ExpansionStrategy for CyclicShift {
    fn name(&self) -> &'static str {
        "cyclic-shift"
    }

    fn automorphism(&self, rank: usize, letters: &[usize]) -> Result<Automorphism> {
        Automorphism::cyclic_shift(rank, letters)
    }
}

/// The Nielsen moves `x_i ↦ x_i x_{i+1}` for `i < r` (each reading the
/// original neighbour), followed by `x_r ↦ x_r x₁`.
pub struct NielsenChain;

impl ExpansionStrategy for NielsenChain {
    fn name(&self) -> &'static str {
        "nielsen-chain"
    }

    fn automorphism(&self, rank: usize, letters: &[usize]) -> Result<Automorphism> {
        if letters.len() < 2 {
            return Err(Error::Input("expansion needs at least two letters".into()));
        }
        let mut out = Automorphism::identity(rank);
        let r = letters.len();
        for i in 0..r - 1 {
            let step = Automorphism::nielsen(rank, letters[i], letters[i + 1], false)?;
            out = out.compose(&step);
        }
        let wrap = Automorphism::nielsen(rank, letters[r - 1], letters[0], false)?;
        Ok(wrap.compose(&out).with_name("nielsen-chain"))
    }
}

pub struct ExpansionRegistry {
    entries: BTreeMap<&'static str, Box<dyn ExpansionStrategy>>,
}

impl Default for ExpansionRegistry {
    fn default() -> Self {
        let mut r = ExpansionRegistry { entries: BTreeMap::new() };
        r.register(Box::new(CyclicShift));
        r.register(Box::new(NielsenChain));
        r
    }
}

impl ExpansionRegistry {
    pub const DEFAULT: &'static str = "cyclic-shift";

    pub fn register(&mut self, s: Box<dyn ExpansionStrategy>) {
        self.entries.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ExpansionStrategy> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Config(format!("unknown expansion strategy {name:?}")))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

/// A family of elementary automorphisms of the whole group.
pub trait MoveFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn moves(&self, rank: usize) -> Vec<Automorphism>;
}

/// `x_i ↦ x_i x_j^{±1}` and `x_i ↦ x_j^{±1} x_i` for `i ≠ j`.
pub struct NielsenMoves;

impl MoveFamily for NielsenMoves {
    fn name(&self) -> &'static str {
        "nielsen"
    }

    fn moves(&self, rank: usize) -> Vec<Automorphism> {
        let mut out = Vec::new();
        for i in 0..rank {
            for j in (0..rank).filter(|&j| j != i) {
                for inv in [false, true] {
                    let xj = Word::letter(j).pow(if inv { -1 } else { 1 });
                    let e = Word::identity();
                    out.push(Automorphism::multiply(rank, i, &e, &xj, "nielsen-right").expect("i ≠ j"));
                    out.push(Automorphism::multiply(rank, i, &xj, &e, "nielsen-left").expect("i ≠ j"));
                }
            }
        }
        out
    }
}

/// Transpositions of basis letters.
pub struct Transpositions;

impl MoveFamily for Transpositions {
    fn name(&self) -> &'static str {
        "permutation"
    }

    fn moves(&self, rank: usize) -> Vec<Automorphism> {
        let mut out = Vec::new();
        for i in 0..rank {
            for j in i + 1..rank {
                let mut p: Vec<usize> = (0..rank).collect();
                p.swap(i, j);
                out.push(Automorphism::permutation(&p).expect("transposition"));
            }
        }
        out
    }
}

/// Dehn twists of the standard disjoint pair and their inverses.
pub struct StandardTwists;

impl MoveFamily for StandardTwists {
    fn name(&self) -> &'static str {
        "twist"
    }

    fn moves(&self, rank: usize) -> Vec<Automorphism> {
        if rank < 4 {
            return Vec::new();
        }
        let r = StandardRoles::new(rank);
        let mut out = Vec::new();
        for (stable, w) in [(r.t, Word::letter(0)), (r.t2, Word::letter(r.w2))] {
            let tw = Automorphism::twist(rank, stable, &w).expect("twistor avoids the stable letter");
            out.push(tw.invert());
            out.push(tw);
        }
        out
    }
}

pub struct MoveRegistry {
    entries: Vec<Box<dyn MoveFamily>>,
}

impl Default for MoveRegistry {
    fn default() -> Self {
        MoveRegistry { entries: vec![Box::new(NielsenMoves), Box::new(Transpositions), Box::new(StandardTwists)] }
    }
}

impl MoveRegistry {
    pub fn register(&mut self, f: Box<dyn MoveFamily>) {
        self.entries.push(f);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|f| f.name()).collect()
    }

    /// Every move of every family, in registration order.
    pub fn all_moves(&self, rank: usize) -> Vec<Automorphism> {
        self.entries.iter().flat_map(|f| f.moves(rank)).collect()
    }
}
