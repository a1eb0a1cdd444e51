//! Independent oracles shared by the integration tests. Nothing here calls the
//! Britton engine: lengths come from walking the Bass–Serre tree with coset
//! equality decided by Stallings membership.
#![allow(dead_code)]

use treesmith::stallings::SubgroupGraph;
use treesmith::word::{Gen, Word};

/// A one-vertex graph of groups seen through its vertex group: letters in
/// `stables` move the base vertex to a neighbour, every other letter fixes it.
pub struct TreeOracle {
    pub vertex_group: SubgroupGraph,
    pub stables: Vec<usize>,
}

impl TreeOracle {
    pub fn new(rank: usize, vertex_generators: &[Word], stables: &[usize]) -> Self {
        TreeOracle { vertex_group: SubgroupGraph::fold(rank, vertex_generators), stables: stables.to_vec() }
    }

    fn same_vertex(&self, g: &Word, h: &Word) -> bool {
        self.vertex_group.contains(&h.inverse().mul(g))
    }

    /// `d(x, g·x)`: walk the prefix vertices `p·x`, cancelling backtracks.
    pub fn distance(&self, g: &Word) -> usize {
        let mut path: Vec<Word> = vec![Word::identity()];
        let mut prefix = Word::identity();
        for &l in g.gens() {
            prefix = prefix.mul(&Word::reduce([l]));
            if !self.stables.contains(&l.index()) {
                continue;
            }
            let n = path.len();
            if n >= 2 && self.same_vertex(&prefix, &path[n - 2]) {
                path.pop();
            } else {
                path.push(prefix.clone());
            }
        }
        path.len() - 1
    }

    /// Translation length `max(0, d(x, g²x) − d(x, g·x))`.
    pub fn length(&self, g: &Word) -> usize {
        let d1 = self.distance(g);
        let d2 = self.distance(&g.mul(g));
        d2.saturating_sub(d1)
    }
}

/// Words `t·w·t⁻¹` for a stable letter and an edge word.
pub fn conj(t: usize, w: &Word) -> Word {
    Word::letter(t).mul(w).mul(&Word::letter(t).inverse())
}

/// Oracle for the standard curve with stable `t` and edge word `w` on rank `n`.
pub fn curve_oracle(n: usize, t: usize, w: &Word) -> TreeOracle {
    let mut gens: Vec<Word> = (0..n).filter(|&i| i != t).map(Word::letter).collect();
    gens.push(conj(t, w));
    TreeOracle::new(n, &gens, &[t])
}

/// Oracle for the two-edge refinement of the standard rank-`n` pair with T edge word `w`.
pub fn refinement_oracle(n: usize, w: &Word) -> TreeOracle {
    let (w2, t, t2) = (n - 3, n - 2, n - 1);
    let mut gens: Vec<Word> = (0..n - 3).map(Word::letter).collect();
    gens.push(Word::letter(w2));
    gens.push(conj(t, w));
    gens.push(conj(t2, &Word::letter(w2)));
    TreeOracle::new(n, &gens, &[t, t2])
}

/// Every cyclically reduced word of length `1..=max_len` over `rank` letters.
pub fn all_cyclically_reduced(rank: usize, max_len: usize) -> Vec<Word> {
    let gens: Vec<Gen> = (0..rank).flat_map(|i| [Gen::pos(i), Gen::neg(i)]).collect();
    let mut out = Vec::new();
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
            if v.len() < 2 || v[0] != v[v.len() - 1].inverse() {
                out.push(Word::reduce(v.iter().copied()));
            }
        }
        frontier = next;
    }
    out
}

/// Exponent-sum gcd, the abelianization obstruction to primitivity.
pub fn abelian_gcd(w: &Word, rank: usize) -> u64 {
    let mut e = vec![0i64; rank];
    for g in w.gens() {
        e[g.index()] += if g.is_inverse() { -1 } else { 1 };
    }
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    e.iter().fold(0, |acc, &x| gcd(acc, x.unsigned_abs()))
}

/// All reduced products of at most `max_factors` elements of `gens ∪ gens⁻¹`.
pub fn subgroup_ball(gens: &[Word], max_factors: usize) -> std::collections::HashSet<Word> {
    let mut letters: Vec<Word> = gens.to_vec();
    letters.extend(gens.iter().map(|g| g.inverse()));
    let mut seen = std::collections::HashSet::from([Word::identity()]);
    let mut frontier = vec![Word::identity()];
    for _ in 0..max_factors {
        let mut next = Vec::new();
        for w in &frontier {
            for l in &letters {
                let x = w.mul(l);
                if seen.insert(x.clone()) {
                    next.push(x);
                }
            }
        }
        frontier = next;
    }
    seen
}

/// The intersecting curve of the convergence experiment: the standard `T`
/// read through the swap of its first vertex letter and its stable letter,
/// so that `l_S(w) = 1` for the edge word `w = a`.
pub fn swapped_curve(t: &treesmith::Curve) -> treesmith::Curve {
    let n = t.rank();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.swap(0, t.stable_letter());
    t.with_marking(treesmith::Automorphism::permutation(&perm).unwrap())
}

/// Max-normalized sup distance in exact rationals.
pub fn oracle_distance(u: &[usize], v: &[usize]) -> num_rational::Ratio<i128> {
    use num_rational::Ratio;
    use num_traits::Signed;
    let mu = *u.iter().max().unwrap() as i128;
    let mv = *v.iter().max().unwrap() as i128;
    u.iter()
        .zip(v)
        .map(|(&x, &y)| (Ratio::new(x as i128, mu) - Ratio::new(y as i128, mv)).abs())
        .max()
        .unwrap()
}

pub const BALL: usize = 8;

/// Products of generators whose partial products all have length `≤ BALL`.
/// This can miss members whose every spelling passes through a longer word, so
/// [`Ball::member`] also tries products of two enumerated elements.
pub struct Ball {
    all: std::collections::HashSet<Word>,
}

impl Ball {
    pub fn new(gens: &[Word]) -> Self {
        let mut letters: Vec<Word> = gens.to_vec();
        letters.extend(gens.iter().map(Word::inverse));
        let mut all = std::collections::HashSet::from([Word::identity()]);
        let mut frontier = vec![Word::identity()];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for w in &frontier {
                for l in &letters {
                    let x = w.mul(l);
                    if x.len() <= BALL && all.insert(x.clone()) {
                        next.push(x);
                    }
                }
            }
            frontier = next;
        }
        Ball { all }
    }

    pub fn elements(&self) -> impl Iterator<Item = &Word> {
        self.all.iter()
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.all.contains(w)
    }

    pub fn member(&self, w: &Word) -> bool {
        self.all.contains(w) || self.all.iter().any(|p| self.all.contains(&p.inverse().mul(w)))
    }
}

pub fn random_generators(rng: &mut impl rand::Rng, rank: usize) -> Vec<Word> {
    let alphabet: Vec<usize> = (0..rank).collect();
    let count = rng.gen_range(1..=3);
    (0..count)
        .map(|i| {
            let len = if i == 0 { rng.gen_range(1..=3) } else { rng.gen_range(2..=3) };
            treesmith::word::random_word_with(&alphabet, len, rng).unwrap()
        })
        .collect()
}

/// Least rotation of the cyclic core.
pub fn canonical_rotation(w: &Word) -> Word {
    let c = w.cyclic_core();
    (0..c.len().max(1)).map(|k| c.rotate(k)).min().unwrap_or(c)
}

