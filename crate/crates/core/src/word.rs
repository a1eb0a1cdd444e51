//! Reduced words over a named basis of a free group.
//!
//! A word is stored as a sequence of [`Gen`]s (letter index plus sign) and is
//! always freely reduced. Words do not carry their basis; the basis is only
//! needed to parse and print the literal syntax (lowercase letter = generator,
//! uppercase = inverse).

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of distinct lowercase letter names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Basis {
    letters: Vec<char>,
}

impl Basis {
    pub fn new(spec: &str) -> Result<Self> {
        let letters: Vec<char> = spec.chars().collect();
        if letters.len() < 2 {
            return Err(Error::Input(format!("basis {spec:?} needs at least two letters")));
        }
        for (i, c) in letters.iter().enumerate() {
            if !c.is_ascii_lowercase() {
                return Err(Error::Input(format!("basis letter {c:?} is not lowercase ASCII")));
            }
            if letters[..i].contains(c) {
                return Err(Error::Input(format!("basis letter {c:?} repeated")));
            }
        }
        Ok(Self { letters })
    }

    pub fn rank(&self) -> usize {
        self.letters.len()
    }

    pub fn letter(&self, index: usize) -> char {
        self.letters[index]
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.letters.iter().position(|&l| l == c)
    }

    pub fn as_str(&self) -> String {
        self.letters.iter().collect()
    }

    /// Parses a word literal such as `"abA"`.
    pub fn parse(&self, literal: &str) -> Result<Word> {
        let mut raw = Vec::with_capacity(literal.len());
        for c in literal.chars() {
            let lower = c.to_ascii_lowercase();
            let index = self
                .index_of(lower)
                .ok_or_else(|| Error::Input(format!("unknown letter {c:?} for basis {}", self.as_str())))?;
            raw.push(Gen::new(index, c.is_ascii_uppercase()));
        }
        Ok(Word::reduce(raw))
    }

    /// Prints a word in literal syntax. Letters outside the basis print as `?`.
    pub fn format(&self, word: &Word) -> String {
        word.gens()
            .iter()
            .map(|g| match self.letters.get(g.index()) {
                Some(c) if g.is_inverse() => c.to_ascii_uppercase(),
                Some(c) => *c,
                None => '?',
            })
            .collect()
    }

    /// Resolves a set of letter names, e.g. `"wv"`, to indices.
    pub fn letter_set(&self, names: &str) -> Result<Vec<usize>> {
        names
            .chars()
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| Error::Input(format!("unknown letter {c:?} for basis {}", self.as_str())))
            })
            .collect()
    }
}

impl TryFrom<String> for Basis {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        Basis::new(&value)
    }
}

impl From<Basis> for String {
    fn from(value: Basis) -> Self {
        value.as_str()
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

/// A generator or its inverse, encoded as `±(index + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gen(i32);

impl Gen {
    pub fn new(index: usize, inverse: bool) -> Self {
        let v = index as i32 + 1;
        Gen(if inverse { -v } else { v })
    }

    pub fn pos(index: usize) -> Self {
        Gen::new(index, false)
    }

    pub fn neg(index: usize) -> Self {
        Gen::new(index, true)
    }

    pub fn index(self) -> usize {
        (self.0.unsigned_abs() - 1) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn inverse(self) -> Self {
        Gen(-self.0)
    }

    /// Dense code in `0..2n`: `2·index` for the generator, `2·index + 1` for its inverse.
    pub fn slot(self) -> usize {
        2 * self.index() + self.is_inverse() as usize
    }

    pub fn from_slot(slot: usize) -> Self {
        Gen::new(slot / 2, slot % 2 == 1)
    }
}

/// Pushes `g` onto a reduced sequence, cancelling against the last letter.
#[inline]
pub(crate) fn push_reduced(buf: &mut Vec<Gen>, g: Gen) {
    if buf.last() == Some(&g.inverse()) {
        buf.pop();
    } else {
        buf.push(g);
    }
}

/// Appends `tail` to a reduced sequence, keeping it reduced.
pub(crate) fn extend_reduced(buf: &mut Vec<Gen>, tail: &[Gen]) {
    let mut i = 0;
    while i < tail.len() && buf.last() == Some(&tail[i].inverse()) {
        buf.pop();
        i += 1;
    }
    buf.extend_from_slice(&tail[i..]);
}

/// Freely reduced word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Word(Vec<Gen>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn letter(index: usize) -> Self {
        Word(vec![Gen::pos(index)])
    }

    pub fn reduce(raw: impl IntoIterator<Item = Gen>) -> Self {
        let mut buf = Vec::new();
        for g in raw {
            push_reduced(&mut buf, g);
        }
        Word(buf)
    }

    /// Wraps a sequence the caller guarantees is already reduced.
    pub(crate) fn from_reduced(gens: Vec<Gen>) -> Self {
        debug_assert!(gens.windows(2).all(|p| p[0] != p[1].inverse()));
        Word(gens)
    }

    pub fn gens(&self) -> &[Gen] {
        &self.0
    }

    pub fn into_gens(self) -> Vec<Gen> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Word(self.0.iter().rev().map(|g| g.inverse()).collect())
    }

    pub fn mul(&self, other: &Word) -> Self {
        let mut buf = self.0.clone();
        extend_reduced(&mut buf, &other.0);
        Word(buf)
    }

    pub fn pow(&self, n: i64) -> Self {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut buf = Vec::with_capacity(base.len() * n.unsigned_abs() as usize);
        for _ in 0..n.unsigned_abs() {
            extend_reduced(&mut buf, &base.0);
        }
        Word(buf)
    }

    /// `self⁻¹ · other · self`.
    pub fn conjugate(&self, other: &Word) -> Self {
        self.inverse().mul(other).mul(self)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.iter().map(|g| g.index()).max()
    }

    pub fn letters_used(&self) -> std::collections::BTreeSet<usize> {
        self.0.iter().map(|g| g.index()).collect()
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.0.len() < 2 || self.0[0] != self.0[self.0.len() - 1].inverse()
    }

    /// Splits `self` as `conjugator · core · conjugator⁻¹` with `core` cyclically reduced.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let g = &self.0;
        let mut k = 0;
        while 2 * k + 1 < g.len() && g[k] == g[g.len() - 1 - k].inverse() {
            k += 1;
        }
        (Word(g[k..g.len() - k].to_vec()), Word(g[..k].to_vec()))
    }

    pub fn cyclic_core(&self) -> Word {
        self.cyclic_reduce().0
    }

    /// Rotation `g[k..] · g[..k]`; only meaningful for cyclically reduced words.
    pub fn rotate(&self, k: usize) -> Word {
        if self.0.is_empty() {
            return self.clone();
        }
        let k = k % self.0.len();
        let mut v = self.0[k..].to_vec();
        v.extend_from_slice(&self.0[..k]);
        Word(v)
    }

    /// Is `self` equal to `base^k` for some integer `k`? Returns that `k`.
    /// `base` must be cyclically reduced and nonempty.
    pub fn power_of(&self, base: &[Gen]) -> Option<i64> {
        power_of(&self.0, base)
    }
}

/// Slice form of [`Word::power_of`].
pub(crate) fn power_of(word: &[Gen], base: &[Gen]) -> Option<i64> {
    if word.is_empty() {
        return Some(0);
    }
    let l = base.len();
    if l == 0 || !word.len().is_multiple_of(l) {
        return None;
    }
    let k = (word.len() / l) as i64;
    if word[0] == base[0] && word.chunks(l).all(|c| c == base) {
        return Some(k);
    }
    // base⁻¹ read forwards
    let inv: Vec<Gen> = base.iter().rev().map(|g| g.inverse()).collect();
    if word[0] == inv[0] && word.chunks(l).all(|c| c == inv.as_slice()) {
        return Some(-k);
    }
    None
}

/// Least rotation of a cyclically reduced sequence (Booth-free quadratic scan, fine at desk scale).
fn least_rotation(g: &[Gen]) -> usize {
    let n = g.len();
    let mut best = 0;
    for k in 1..n {
        let ord = (0..n)
            .map(|i| g[(k + i) % n].cmp(&g[(best + i) % n]))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal);
        if ord == Ordering::Less {
            best = k;
        }
    }
    best
}

/// Conjugacy class, represented by the least rotation of a cyclically reduced word.
///
/// Equality is oriented: `ab` and `BA` are different classes. Use
/// [`ConjClass::unoriented_eq`] to identify a class with its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConjClass(Word);

impl ConjClass {
    pub fn new(w: &Word) -> Self {
        let core = w.cyclic_core();
        let k = least_rotation(core.gens());
        ConjClass(core.rotate(k))
    }

    pub fn representative(&self) -> &Word {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        ConjClass::new(&self.0.inverse())
    }

    pub fn unoriented_eq(&self, other: &ConjClass) -> bool {
        self == other || *self == other.inverse()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Word> for ConjClass {
    fn from(w: Word) -> Self {
        ConjClass::new(&w)
    }
}

/// Seeded random reduced word of exactly `length` letters over `alphabet`.
pub fn random_word(alphabet: &[usize], length: usize, seed: u64) -> Result<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_word_with(alphabet, length, &mut rng)
}

pub fn random_word_with(alphabet: &[usize], length: usize, rng: &mut impl rand::Rng) -> Result<Word> {
    if alphabet.is_empty() {
        return Err(Error::Input("random word needs a nonempty alphabet".into()));
    }
    let choices: Vec<Gen> = alphabet.iter().flat_map(|&i| [Gen::pos(i), Gen::neg(i)]).collect();
    let mut buf: Vec<Gen> = Vec::with_capacity(length);
    while buf.len() < length {
        let g = *choices.choose(rng).expect("nonempty");
        if buf.last() == Some(&g.inverse()) {
            continue;
        }
        buf.push(g);
    }
    Ok(Word(buf))
}

/// All cyclically reduced conjugacy classes of length `1..=max_len` over the first
/// `rank` letters, one per rotation class, in shortlex order of representatives.
pub fn enumerate_classes(rank: usize, max_len: usize) -> Vec<ConjClass> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let gens: Vec<Gen> = (0..rank).flat_map(|i| [Gen::pos(i), Gen::neg(i)]).collect();
    let mut frontier: Vec<Vec<Gen>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for &g in &gens {
                if w.last() == Some(&g.inverse()) {
                    continue;
                }
                let mut v = w.clone();
                v.push(g);
                next.push(v);
            }
        }
        for v in &next {
            let w = Word(v.clone());
            if !w.is_cyclically_reduced() {
                continue;
            }
            let c = ConjClass::new(&w);
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
        frontier = next;
    }
    out
}
