//! One-edge HNN splittings ("curves"), their two-edge refinement, and
//! translation lengths by Britton reduction.
//!
//! A base curve with stable letter `t` and edge word `w` (a word in the other
//! letters) has vertex group `V = ⟨vertex letters, t·w·t⁻¹⟩`. Writing `W` for
//! the extension symbol standing for `t·w·t⁻¹`, `V` is free on the vertex
//! letters and `W`, and the relation is `t·w·t⁻¹ = W`. A pinch is `t·u·t⁻¹`
//! with `u = wᵏ` (rewritten to `Wᵏ`) or `t⁻¹·u·t` with `u = Wᵏ` (rewritten
//! to `wᵏ`). Translation length is the number of stable letters left in a
//! cyclically Britton-reduced word.
//!
//! Marked curves are `(base curve, marking)` pairs with
//! `l(g) = l_base(marking(g))`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::automorphism::{Automorphism, AutomorphismSpec};
use crate::error::{Error, Result};
use crate::whitehead::is_primitive;
use crate::word::{extend_reduced, power_of, push_reduced, Basis, ConjClass, Gen, Word};

/// One loop edge of a graph of groups with a single vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HnnEdge {
    pub stable: usize,
    /// Edge word, a cyclically reduced word in the vertex letters.
    pub edge_word: Vec<Gen>,
    /// Index of the extension symbol standing for `stable · edge_word · stable⁻¹`.
    pub ext: usize,
}

/// A one-vertex graph of groups over a basis whose loop edges carry cyclic
/// edge groups. Tokens in reduced forms use basis indices plus extension
/// indices `rank..rank + edges`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HnnStructure {
    rank: usize,
    edges: Vec<HnnEdge>,
    /// `edge_of[index]` is the edge whose stable letter is `index`, if any.
    edge_of: Vec<Option<usize>>,
}

/// Britton normal form split at stable letters: `segments[0] s₁ segments[1] … sₖ segments[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalForm {
    pub stables: Vec<Gen>,
    pub segments: Vec<Vec<Gen>>,
}

impl HnnStructure {
    pub fn new(rank: usize, edges: Vec<(usize, Word)>) -> Self {
        let mut edge_of = vec![None; rank];
        let edges: Vec<HnnEdge> = edges
            .into_iter()
            .enumerate()
            .map(|(k, (stable, w))| {
                edge_of[stable] = Some(k);
                HnnEdge { stable, edge_word: w.into_gens(), ext: rank + k }
            })
            .collect();
        HnnStructure { rank, edges, edge_of }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn edges(&self) -> &[HnnEdge] {
        &self.edges
    }

    /// Extended alphabet size: basis letters plus one extension symbol per edge.
    pub fn token_count(&self) -> usize {
        self.rank + self.edges.len()
    }

    pub fn is_stable(&self, g: Gen) -> bool {
        g.index() < self.rank && self.edge_of[g.index()].is_some()
    }

    pub fn edge_index(&self, g: Gen) -> Option<usize> {
        if g.index() < self.rank {
            self.edge_of[g.index()]
        } else {
            None
        }
    }

    /// If `first · u · last` is a pinch, its replacement exponent and symbol.
    fn pinch(&self, first: Gen, u: &[Gen], last: Gen) -> Option<Vec<Gen>> {
        if first.index() != last.index() || first.is_inverse() == last.is_inverse() {
            return None;
        }
        let edge = &self.edges[self.edge_of[first.index()]?];
        let ext = [Gen::pos(edge.ext)];
        let (base, into): (&[Gen], &[Gen]) =
            if first.is_inverse() { (&ext, &edge.edge_word) } else { (&edge.edge_word, &ext) };
        let k = power_of(u, base)?;
        let unit: Vec<Gen> = if k < 0 { into.iter().rev().map(|g| g.inverse()).collect() } else { into.to_vec() };
        let mut out = Vec::with_capacity(unit.len() * k.unsigned_abs() as usize);
        for _ in 0..k.unsigned_abs() {
            out.extend_from_slice(&unit);
        }
        Some(out)
    }

    /// Linear Britton reduction of a token sequence.
    pub fn reduce_tokens(&self, input: &[Gen]) -> Vec<Gen> {
        let mut out: Vec<Gen> = Vec::with_capacity(input.len());
        let mut stable_pos: Vec<usize> = Vec::new();
        for &g in input {
            if !self.is_stable(g) {
                push_reduced(&mut out, g);
                continue;
            }
            if let Some(&p) = stable_pos.last() {
                if let Some(rep) = self.pinch(out[p], &out[p + 1..], g) {
                    out.truncate(p);
                    stable_pos.pop();
                    extend_reduced(&mut out, &rep);
                    continue;
                }
            }
            stable_pos.push(out.len());
            out.push(g);
        }
        out
    }

    pub fn normal_form(&self, w: &[Gen]) -> NormalForm {
        split_at_stables(self, &self.reduce_tokens(w))
    }

    /// Number of stable letters in the linear normal form: the distance `d(x, g·x)` from the base vertex.
    pub fn displacement(&self, w: &[Gen]) -> usize {
        self.reduce_tokens(w).iter().filter(|g| self.is_stable(**g)).count()
    }

    /// Stable letters surviving cyclic Britton reduction, per edge.
    pub fn cyclic_counts(&self, w: &[Gen]) -> Vec<usize> {
        let nf = self.normal_form(w);
        let k = nf.stables.len();
        let mut counts = vec![0; self.edges.len()];
        if k == 0 {
            return counts;
        }
        // rotate the head segment onto the tail
        let mut wrap = nf.segments[k].clone();
        extend_reduced(&mut wrap, &nf.segments[0]);
        let (mut i, mut j) = (0usize, k - 1);
        while j > i {
            let Some(rep) = self.pinch(nf.stables[j], &wrap, nf.stables[i]) else { break };
            let mut merged = nf.segments[j].clone();
            extend_reduced(&mut merged, &rep);
            extend_reduced(&mut merged, &nf.segments[i + 1]);
            wrap = merged;
            i += 1;
            if j == i {
                // both stables consumed and nothing in between: k was even and is now 0
                j = i - 1;
                break;
            }
            j -= 1;
        }
        if j + 1 > i {
            for s in &nf.stables[i..=j] {
                counts[self.edge_of[s.index()].expect("stable")] += 1;
            }
        }
        counts
    }

    pub fn cyclic_length(&self, w: &[Gen]) -> usize {
        self.cyclic_counts(w).iter().sum()
    }

    /// Expands extension symbols back into basis words.
    pub fn expand(&self, tokens: &[Gen]) -> Word {
        let mut out = Vec::with_capacity(tokens.len());
        for &g in tokens {
            if g.index() < self.rank {
                push_reduced(&mut out, g);
            } else {
                let e = &self.edges[g.index() - self.rank];
                let mut x = vec![Gen::pos(e.stable)];
                x.extend_from_slice(&e.edge_word);
                x.push(Gen::neg(e.stable));
                let x = if g.is_inverse() { Word::reduce(x).inverse() } else { Word::reduce(x) };
                extend_reduced(&mut out, x.gens());
            }
        }
        Word::reduce(out)
    }

    /// Formats tokens with extension symbols shown as `[..]` brackets.
    pub fn format_tokens(&self, basis: &Basis, tokens: &[Gen]) -> String {
        let mut s = String::new();
        for &g in tokens {
            if g.index() < self.rank {
                let c = basis.letter(g.index());
                s.push(if g.is_inverse() { c.to_ascii_uppercase() } else { c });
            } else {
                let e = &self.edges[g.index() - self.rank];
                s.push('[');
                s.push(basis.letter(e.stable));
                s.push_str(&basis.format(&Word::reduce(e.edge_word.iter().copied())));
                s.push(basis.letter(e.stable).to_ascii_uppercase());
                s.push(']');
                if g.is_inverse() {
                    s.push('⁻');
                }
            }
        }
        s
    }
}

fn split_at_stables(h: &HnnStructure, tokens: &[Gen]) -> NormalForm {
    let mut stables = Vec::new();
    let mut segments = vec![Vec::new()];
    for &g in tokens {
        if h.is_stable(g) {
            stables.push(g);
            segments.push(Vec::new());
        } else {
            segments.last_mut().expect("nonempty").push(g);
        }
    }
    NormalForm { stables, segments }
}

/// Letter names for the standard basis of rank `n`: `n − 3` vertex letters
/// (`a, b, c, …`, skipping `t, v, w`) followed by `w`, `t`, `v`.
pub fn standard_basis(n: usize) -> Result<Basis> {
    if n < 4 {
        return Err(Error::Input(format!("rank {n} < 4")));
    }
    let pool: Vec<char> = ('a'..='z').filter(|c| !matches!(c, 't' | 'v' | 'w')).collect();
    if n - 3 > pool.len() {
        return Err(Error::Input(format!("rank {n} too large for single-letter names")));
    }
    let mut s: String = pool[..n - 3].iter().collect();
    s.push_str("wtv");
    Basis::new(&s)
}

/// Role indices in a standard basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StandardRoles {
    pub n: usize,
    /// `w′`, the partner's edge word.
    pub w2: usize,
    pub t: usize,
    /// `t′`, the partner's stable letter.
    pub t2: usize,
}

impl StandardRoles {
    pub fn new(n: usize) -> Self {
        StandardRoles { n, w2: n - 3, t: n - 2, t2: n - 1 }
    }

    /// The letters `a₁, …, a_{N−3}`.
    pub fn vertex_core(&self) -> Vec<usize> {
        (0..self.n - 3).collect()
    }
}

/// A marked one-edge HNN splitting.
#[derive(Debug, Clone)]
pub struct Curve {
    basis: Basis,
    vertex_letters: Vec<usize>,
    edge_word: Word,
    stable: usize,
    marking: Automorphism,
    hnn: HnnStructure,
}

impl PartialEq for Curve {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis
            && self.vertex_letters == other.vertex_letters
            && self.edge_word == other.edge_word
            && self.stable == other.stable
            && self.marking.same_map(&other.marking)
    }
}

impl Curve {
    pub fn new(
        basis: Basis,
        vertex_letters: Vec<usize>,
        edge_word: Word,
        stable: usize,
        marking: Automorphism,
    ) -> Result<Self> {
        let n = basis.rank();
        if marking.rank() != n {
            return Err(Error::BasisMismatch("marking rank differs from basis".into()));
        }
        if stable >= n || vertex_letters.contains(&stable) {
            return Err(Error::Input("stable letter must be a basis letter outside the vertex letters".into()));
        }
        let mut all: BTreeSet<usize> = vertex_letters.iter().copied().collect();
        all.insert(stable);
        if all.len() != n || vertex_letters.len() != n - 1 {
            return Err(Error::Input("vertex letters and stable letter must partition the basis".into()));
        }
        if edge_word.is_empty() || !edge_word.is_cyclically_reduced() {
            return Err(Error::Input("edge word must be nonempty and cyclically reduced".into()));
        }
        if edge_word.letters_used().contains(&stable) {
            return Err(Error::Input("edge word must avoid the stable letter".into()));
        }
        if !is_primitive(&ConjClass::new(&edge_word), n) {
            return Err(Error::Input(format!("edge word {} is not primitive", basis.format(&edge_word))));
        }
        let hnn = HnnStructure::new(n, vec![(stable, edge_word.clone())]);
        Ok(Curve { basis, vertex_letters, edge_word, stable, marking, hnn })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn vertex_letters(&self) -> &[usize] {
        &self.vertex_letters
    }

    /// Edge word of the base curve.
    pub fn base_edge_word(&self) -> &Word {
        &self.edge_word
    }

    pub fn stable_letter(&self) -> usize {
        self.stable
    }

    pub fn marking(&self) -> &Automorphism {
        &self.marking
    }

    pub fn hnn(&self) -> &HnnStructure {
        &self.hnn
    }

    /// The same base curve with a different marking.
    pub fn with_marking(&self, marking: Automorphism) -> Curve {
        Curve { marking, ..self.clone() }
    }

    pub fn unmarked(&self) -> Curve {
        self.with_marking(Automorphism::identity(self.rank()))
    }

    /// Generator of the edge group of this marked curve: `marking⁻¹(w)`.
    pub fn edge_element(&self) -> Word {
        self.marking.apply_inverse(&self.edge_word)
    }

    /// Free basis of the vertex group of the base curve (in base coordinates).
    pub fn base_vertex_generators(&self) -> Vec<Word> {
        let mut gens: Vec<Word> = self.vertex_letters.iter().map(|&i| Word::letter(i)).collect();
        gens.push(self.extension_word());
        gens
    }

    /// `t · w · t⁻¹`.
    pub fn extension_word(&self) -> Word {
        let t = Word::letter(self.stable);
        t.mul(&self.edge_word).mul(&t.inverse())
    }

    /// Free basis of this marked curve's vertex group: `marking⁻¹` of the base generators.
    pub fn vertex_generators(&self) -> Vec<Word> {
        self.base_vertex_generators().iter().map(|g| self.marking.apply_inverse(g)).collect()
    }

    pub fn translation_length(&self, g: &ConjClass) -> usize {
        self.translation_length_word(g.representative())
    }

    pub fn translation_length_word(&self, g: &Word) -> usize {
        let image = self.marking.apply(g);
        self.hnn.cyclic_length(image.gens())
    }

    /// `d(x, g·x)` for the base vertex `x`.
    pub fn displacement(&self, g: &Word) -> usize {
        self.hnn.displacement(self.marking.apply(g).gens())
    }

    pub fn length_vector(&self, test_set: &[ConjClass]) -> LengthVector {
        LengthVector {
            test_set: test_set.to_vec(),
            values: test_set.iter().map(|g| self.translation_length(g) as u64).collect(),
        }
    }

    pub fn to_spec(&self) -> CurveSpec {
        CurveSpec {
            basis: self.basis.as_str(),
            vertex_letters: self.vertex_letters.iter().map(|&i| self.basis.letter(i)).collect(),
            edge_word: self.basis.format(&self.edge_word),
            stable_letter: self.basis.letter(self.stable).to_string(),
            marking: AutomorphismSpec::from_automorphism(&self.marking, &self.basis),
        }
    }

    pub fn from_spec(spec: &CurveSpec) -> Result<Self> {
        let basis = Basis::new(&spec.basis)?;
        let vertex_letters = basis.letter_set(&spec.vertex_letters)?;
        let edge_word = basis.parse(&spec.edge_word)?;
        let stable = match basis.letter_set(&spec.stable_letter)?.as_slice() {
            [s] => *s,
            _ => return Err(Error::Input("stable_letter must be a single letter".into())),
        };
        let marking = spec.marking.to_automorphism(&basis)?;
        Curve::new(basis, vertex_letters, edge_word, stable, marking)
    }
}

/// Serialized curve: `{ basis, vertex_letters, edge_word, stable_letter, marking }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub basis: String,
    pub vertex_letters: String,
    pub edge_word: String,
    pub stable_letter: String,
    #[serde(default)]
    pub marking: AutomorphismSpec,
}

/// Lengths of a curve on a finite list of conjugacy classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthVector {
    pub test_set: Vec<ConjClass>,
    pub values: Vec<u64>,
}

/// The one-vertex, two-loop refinement of a disjoint standard pair.
#[derive(Debug, Clone)]
pub struct TwoEdgeRefinement {
    basis: Basis,
    roles: StandardRoles,
    edge_word: Word,
    marking: Automorphism,
    hnn: HnnStructure,
}

impl TwoEdgeRefinement {
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn roles(&self) -> StandardRoles {
        self.roles
    }

    pub fn marking(&self) -> &Automorphism {
        &self.marking
    }

    pub fn hnn(&self) -> &HnnStructure {
        &self.hnn
    }

    /// Edge words `(w, w′)`.
    pub fn edge_words(&self) -> (Word, Word) {
        (self.edge_word.clone(), Word::letter(self.roles.w2))
    }

    pub fn with_marking(&self, marking: Automorphism) -> Self {
        TwoEdgeRefinement { marking, ..self.clone() }
    }

    pub fn translation_length(&self, g: &ConjClass) -> usize {
        self.hnn.cyclic_length(self.marking.apply(g.representative()).gens())
    }

    /// Collapses one edge orbit: `1` keeps the `t` edge (giving T), `2` keeps the `t′` edge (giving T′).
    pub fn collapse(&self, which: usize) -> Result<Curve> {
        let r = self.roles;
        let (stable, w) = match which {
            1 => (r.t, self.edge_word.clone()),
            2 => (r.t2, Word::letter(r.w2)),
            _ => return Err(Error::Input(format!("edge index {which} not in {{1, 2}}"))),
        };
        let vertex_letters = (0..r.n).filter(|&i| i != stable).collect();
        Curve::new(self.basis.clone(), vertex_letters, w, stable, self.marking.clone())
    }
}

/// The standard disjoint pair on the rank-`n` standard basis with the given
/// edge word for T (default `a₁`).
pub fn standard_pair(n: usize, edge_word: Option<&Word>) -> Result<(Curve, Curve, TwoEdgeRefinement)> {
    let basis = standard_basis(n)?;
    let roles = StandardRoles::new(n);
    let w = edge_word.cloned().unwrap_or_else(|| Word::letter(0));
    if w.letters_used().iter().any(|&i| i >= n - 3) {
        return Err(Error::Input(format!(
            "edge word {} must be a word in {}",
            basis.format(&w),
            roles.vertex_core().iter().map(|&i| basis.letter(i)).collect::<String>()
        )));
    }
    let hnn = HnnStructure::new(n, vec![(roles.t, w.clone()), (roles.t2, Word::letter(roles.w2))]);
    let y = TwoEdgeRefinement { basis, roles, edge_word: w, marking: Automorphism::identity(n), hnn };
    let t = y.collapse(1)?;
    let t2 = y.collapse(2)?;
    Ok((t, t2, y))
}

/// Additivity check `l_Y = l_T + l_T′` on a test set; residuals are `l_Y − l_T − l_T′`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisjointnessCertificate {
    pub pass: bool,
    pub residuals: Vec<i64>,
}

pub fn disjointness_certificate(
    t: &Curve,
    t2: &Curve,
    y: &TwoEdgeRefinement,
    test_set: &[ConjClass],
) -> Result<DisjointnessCertificate> {
    if t.basis() != t2.basis() || t.basis() != y.basis() {
        return Err(Error::BasisMismatch("disjointness needs a shared basis".into()));
    }
    let residuals: Vec<i64> = test_set
        .iter()
        .map(|g| y.translation_length(g) as i64 - t.translation_length(g) as i64 - t2.translation_length(g) as i64)
        .collect();
    Ok(DisjointnessCertificate { pass: residuals.iter().all(|&r| r == 0), residuals })
}

/// Pairing of a curve with the counting current of a conjugacy class.
pub fn counting_current_intersection(t: &Curve, g: &ConjClass) -> usize {
    t.translation_length(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (Curve, Curve, TwoEdgeRefinement) {
        standard_pair(4, None).unwrap()
    }

    fn len(c: &Curve, s: &str) -> usize {
        c.translation_length(&ConjClass::new(&c.basis().parse(s).unwrap()))
    }

    #[test]
    fn basis_names() {
        assert_eq!(standard_basis(4).unwrap().as_str(), "awtv");
        assert_eq!(standard_basis(6).unwrap().as_str(), "abcwtv");
        assert!(standard_basis(3).is_err());
    }

    #[test]
    fn lengths_on_standard_t() {
        let (t, t2, _) = pair();
        assert_eq!(len(&t, "a"), 0);
        assert_eq!(len(&t, "w"), 0);
        assert_eq!(len(&t, "v"), 0);
        assert_eq!(len(&t, "t"), 1);
        assert_eq!(len(&t, "tt"), 2);
        assert_eq!(len(&t, "Tat"), 0);
        assert_eq!(len(&t, "taTw"), 0);
        assert_eq!(len(&t, "tawTw"), 2);
        assert_eq!(len(&t2, "t"), 0);
        assert_eq!(len(&t2, "v"), 1);
    }

    #[test]
    fn displacement_linear() {
        let (t, _, _) = pair();
        let b = t.basis().clone();
        assert_eq!(t.displacement(&b.parse("taT").unwrap()), 0);
        assert_eq!(t.displacement(&b.parse("Tat").unwrap()), 2);
        assert_eq!(t.displacement(&b.parse("wtW").unwrap()), 1);
    }

    #[test]
    fn wrap_pinches() {
        let (t, _, _) = pair();
        // conjugates of elliptic elements by long words stay elliptic
        assert_eq!(len(&t, "tvtaTVT"), 0);
        assert_eq!(len(&t, "vtaaaTVw"), 0);
        assert_eq!(len(&t, "TvtaTVt"), 0);
        assert_eq!(len(&t, "TvtaTVtw"), 2);
    }

    #[test]
    fn additivity_examples() {
        let (t, t2, y) = pair();
        let g = ConjClass::new(&t.basis().parse("tv").unwrap());
        assert_eq!(y.translation_length(&g), 2);
        assert_eq!(disjointness_certificate(&t, &t2, &y, &[g]).unwrap().residuals, vec![0]);
    }

    #[test]
    fn curve_validation() {
        let b = standard_basis(4).unwrap();
        let id = Automorphism::identity(4);
        assert!(Curve::new(b.clone(), vec![0, 1, 3], b.parse("aa").unwrap(), 2, id.clone()).is_err());
        assert!(Curve::new(b.clone(), vec![0, 1, 3], b.parse("at").unwrap(), 2, id.clone()).is_err());
        assert!(Curve::new(b.clone(), vec![0, 1], b.parse("a").unwrap(), 2, id.clone()).is_err());
        assert!(Curve::new(b.clone(), vec![0, 1, 3], b.parse("aw").unwrap(), 2, id).is_ok());
    }

    #[test]
    fn spec_roundtrip() {
        let (t, _, _) = pair();
        let tau = Automorphism::twist(4, 2, &Word::letter(0)).unwrap();
        let marked = t.with_marking(tau);
        let json = serde_json::to_string(&marked.to_spec()).unwrap();
        let back = Curve::from_spec(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, marked);
    }

    #[test]
    fn collapse_index() {
        let (t, t2, y) = pair();
        assert_eq!(y.collapse(1).unwrap(), t);
        assert_eq!(y.collapse(2).unwrap(), t2);
        assert!(y.collapse(3).is_err());
    }
}
