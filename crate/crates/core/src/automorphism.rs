//! Automorphisms of F_N given by images of the basis letters, always paired
//! with the images of the inverse map.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::{extend_reduced, Basis, Gen, Word};

const MAX_NAME: usize = 160;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphism {
    images: Vec<Word>,
    inverse_images: Vec<Word>,
    name: String,
}

/// Substitutes `images` into `w` letterwise.
fn substitute(images: &[Word], w: &[Gen]) -> Word {
    let mut buf: Vec<Gen> = Vec::with_capacity(w.len());
    let inverses: Vec<Option<Word>> = vec![None; images.len()];
    let mut inverses = inverses;
    for g in w {
        let i = g.index();
        if g.is_inverse() {
            let inv = inverses[i].get_or_insert_with(|| images[i].inverse());
            extend_reduced(&mut buf, inv.gens());
        } else {
            extend_reduced(&mut buf, images[i].gens());
        }
    }
    Word::from_reduced(buf)
}

impl Automorphism {
    pub fn identity(rank: usize) -> Self {
        let images: Vec<Word> = (0..rank).map(Word::letter).collect();
        Automorphism { inverse_images: images.clone(), images, name: "id".into() }
    }

    /// Builds an automorphism from claimed images and inverse images, verifying
    /// that the two maps compose to the identity in both orders.
    pub fn new(images: Vec<Word>, inverse_images: Vec<Word>, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let rank = images.len();
        if inverse_images.len() != rank {
            return Err(Error::BadInverse(format!("{name}: image counts differ")));
        }
        for w in images.iter().chain(&inverse_images) {
            if w.max_index().is_some_and(|m| m >= rank) {
                return Err(Error::BasisMismatch(format!("{name}: image uses a letter outside rank {rank}")));
            }
        }
        let a = Automorphism { images, inverse_images, name };
        a.check_inverse()?;
        Ok(a)
    }

    fn unchecked(images: Vec<Word>, inverse_images: Vec<Word>, name: String) -> Self {
        let a = Automorphism { images, inverse_images, name };
        debug_assert!(a.check_inverse().is_ok());
        a
    }

    /// Verifies images ∘ inverse_images and inverse_images ∘ images fix every letter.
    pub fn check_inverse(&self) -> Result<()> {
        for i in 0..self.rank() {
            let x = Word::letter(i);
            if substitute(&self.images, self.inverse_images[i].gens()) != x
                || substitute(&self.inverse_images, self.images[i].gens()) != x
            {
                return Err(Error::BadInverse(format!("{} fails on letter {i}", self.name)));
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.images.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn inverse_images(&self) -> &[Word] {
        &self.inverse_images
    }

    pub fn image(&self, letter: usize) -> &Word {
        &self.images[letter]
    }

    pub fn apply(&self, w: &Word) -> Word {
        substitute(&self.images, w.gens())
    }

    pub fn apply_inverse(&self, w: &Word) -> Word {
        substitute(&self.inverse_images, w.gens())
    }

    pub fn try_apply(&self, w: &Word) -> Result<Word> {
        if w.max_index().is_some_and(|m| m >= self.rank()) {
            return Err(Error::BasisMismatch(format!("word uses a letter outside rank {}", self.rank())));
        }
        Ok(self.apply(w))
    }

    /// `compose(α, β)` acts as `w ↦ α(β(w))`.
    pub fn compose(&self, other: &Automorphism) -> Automorphism {
        assert_eq!(self.rank(), other.rank(), "compose: rank mismatch");
        let images = other.images.iter().map(|w| self.apply(w)).collect();
        let inverse_images = self.inverse_images.iter().map(|w| other.apply_inverse(w)).collect();
        let name = if self.is_named_identity() {
            other.name.clone()
        } else if other.is_named_identity() {
            self.name.clone()
        } else {
            let n = format!("{}∘{}", self.name, other.name);
            if n.chars().count() > MAX_NAME {
                "composite".into()
            } else {
                n
            }
        };
        Automorphism::unchecked(images, inverse_images, name)
    }

    fn is_named_identity(&self) -> bool {
        self.name == "id"
    }

    pub fn invert(&self) -> Automorphism {
        Automorphism {
            images: self.inverse_images.clone(),
            inverse_images: self.images.clone(),
            name: format!("inv({})", self.name),
        }
    }

    pub fn pow(&self, n: u32) -> Automorphism {
        let mut acc = Automorphism::identity(self.rank());
        for _ in 0..n {
            acc = acc.compose(self);
        }
        acc.with_name(format!("{}^{n}", self.name))
    }

    /// `β⁻¹ ∘ self ∘ β`.
    pub fn conjugated_by(&self, beta: &Automorphism) -> Automorphism {
        beta.invert().compose(self).compose(beta)
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, w)| *w == Word::letter(i))
    }

    /// True if every letter in `letters` is mapped to itself.
    pub fn fixes_letters(&self, letters: &[usize]) -> bool {
        letters.iter().all(|&i| self.images[i] == Word::letter(i))
    }

    /// Letterwise equality of images (names ignored).
    pub fn same_map(&self, other: &Automorphism) -> bool {
        self.images == other.images
    }

    /// `x_letter ↦ x_letter · u`, every other letter fixed. `u` must avoid `letter`.
    pub fn right_multiply(rank: usize, letter: usize, u: &Word, name: impl Into<String>) -> Result<Self> {
        Self::multiply(rank, letter, &Word::identity(), u, name)
    }

    /// `x_letter ↦ l · x_letter · r`, every other letter fixed. `l`, `r` must avoid `letter`.
    pub fn multiply(rank: usize, letter: usize, l: &Word, r: &Word, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if letter >= rank {
            return Err(Error::BasisMismatch(format!("{name}: letter {letter} outside rank {rank}")));
        }
        if l.letters_used().contains(&letter) || r.letters_used().contains(&letter) {
            return Err(Error::Input(format!("{name}: multiplier involves the moved letter")));
        }
        let mut images: Vec<Word> = (0..rank).map(Word::letter).collect();
        let mut inverse_images = images.clone();
        images[letter] = l.mul(&Word::letter(letter)).mul(r);
        inverse_images[letter] = l.inverse().mul(&Word::letter(letter)).mul(&r.inverse());
        Automorphism::new(images, inverse_images, name)
    }

    /// Elementary Nielsen transvection `x_i ↦ x_i · x_j^{±1}`.
    pub fn nielsen(rank: usize, i: usize, j: usize, inverse: bool) -> Result<Self> {
        let u = Word::reduce([Gen::new(j, inverse)]);
        Self::right_multiply(rank, i, &u, format!("nielsen({i},{j}{})", if inverse { "⁻" } else { "" }))
    }

    /// Letter inversion `x_i ↦ x_i⁻¹`.
    pub fn inversion(rank: usize, i: usize) -> Self {
        let mut images: Vec<Word> = (0..rank).map(Word::letter).collect();
        images[i] = images[i].inverse();
        Automorphism::unchecked(images.clone(), images, format!("inv{i}"))
    }

    /// Letter permutation `x_i ↦ x_{perm[i]}`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let rank = perm.len();
        let mut inv = vec![usize::MAX; rank];
        for (i, &p) in perm.iter().enumerate() {
            if p >= rank || inv[p] != usize::MAX {
                return Err(Error::Input(format!("{perm:?} is not a permutation")));
            }
            inv[p] = i;
        }
        let images = perm.iter().map(|&p| Word::letter(p)).collect();
        let inverse_images = inv.iter().map(|&p| Word::letter(p)).collect();
        Ok(Automorphism::unchecked(images, inverse_images, format!("perm{perm:?}")))
    }

    /// Dehn twist `t ↦ t · w` about an edge word `w` that avoids `t`.
    pub fn twist(rank: usize, stable: usize, twistor: &Word) -> Result<Self> {
        Self::right_multiply(rank, stable, twistor, "twist")
    }

    /// The cyclic-shift expansion on the ordered letters `xs`:
    /// `x₁ ↦ x₂, …, x_{r−1} ↦ x_r, x_r ↦ x₁x₂`, other letters fixed.
    pub fn cyclic_shift(rank: usize, xs: &[usize]) -> Result<Self> {
        let r = xs.len();
        if r < 2 {
            return Err(Error::Input("cyclic shift needs at least two letters".into()));
        }
        let mut images: Vec<Word> = (0..rank).map(Word::letter).collect();
        let mut inverse_images = images.clone();
        for i in 0..r - 1 {
            images[xs[i]] = Word::letter(xs[i + 1]);
            inverse_images[xs[i + 1]] = Word::letter(xs[i]);
        }
        images[xs[r - 1]] = Word::letter(xs[0]).mul(&Word::letter(xs[1]));
        inverse_images[xs[0]] = Word::letter(xs[r - 1]).mul(&Word::letter(xs[0]).inverse());
        Automorphism::new(images, inverse_images, format!("shift{xs:?}"))
    }

    pub fn display<'a>(&'a self, basis: &'a Basis) -> impl fmt::Display + 'a {
        DisplayAut { aut: self, basis }
    }
}

struct DisplayAut<'a> {
    aut: &'a Automorphism,
    basis: &'a Basis,
}

impl fmt::Display for DisplayAut<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{", self.aut.name)?;
        for (i, w) in self.aut.images.iter().enumerate() {
            if *w != Word::letter(i) {
                write!(f, " {}↦{}", self.basis.letter(i), self.basis.format(w))?;
            }
        }
        write!(f, " }}")
    }
}

/// Serialized form: `(letter, word)` pairs for the images and the inverse images.
/// Letters not listed map to themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomorphismSpec {
    #[serde(default)]
    pub images: Vec<(String, String)>,
    #[serde(default)]
    pub inverse_images: Vec<(String, String)>,
}

impl AutomorphismSpec {
    pub fn from_automorphism(a: &Automorphism, basis: &Basis) -> Self {
        let pairs = |ws: &[Word]| {
            ws.iter()
                .enumerate()
                .filter(|(i, w)| **w != Word::letter(*i))
                .map(|(i, w)| (basis.letter(i).to_string(), basis.format(w)))
                .collect()
        };
        AutomorphismSpec { images: pairs(&a.images), inverse_images: pairs(&a.inverse_images) }
    }

    pub fn to_automorphism(&self, basis: &Basis) -> Result<Automorphism> {
        let parse = |pairs: &[(String, String)]| -> Result<Vec<Word>> {
            let mut ws: Vec<Word> = (0..basis.rank()).map(Word::letter).collect();
            for (letter, word) in pairs {
                let mut cs = letter.chars();
                let (Some(c), None) = (cs.next(), cs.next()) else {
                    return Err(Error::Input(format!("marking key {letter:?} is not a single letter")));
                };
                let i = basis
                    .index_of(c)
                    .ok_or_else(|| Error::Input(format!("marking key {c:?} not in basis {basis}")))?;
                ws[i] = basis.parse(word)?;
            }
            Ok(ws)
        };
        Automorphism::new(parse(&self.images)?, parse(&self.inverse_images)?, "marking")
    }
}
