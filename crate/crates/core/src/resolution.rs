//! Finite charts of a curve's Bass–Serre tree, the partial isometries the basis
//! induces on them, and their decomposition into families of parallel leaves.
//!
//! Vertices of the tree are cosets `gV`. A vertex is named by the canonical
//! path from the base vertex: the Britton normal form of `g` with the trailing
//! vertex-group segment dropped and every remaining segment reduced to a
//! minimal-length coset representative modulo the edge group it is attached
//! through. Charts are tries of such paths.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::splitting::{Curve, HnnStructure};
use crate::twist::{fmt_rational, Rational};
use crate::word::{extend_reduced, Gen, Word};

pub const DEFAULT_ORBIT_CAP: usize = 2_000_000;

/// All reduced words of length `≤ n`, shortlex.
pub fn cayley_ball(rank: usize, n: usize) -> Vec<Word> {
    let mut out = vec![Word::identity()];
    let mut start = 0;
    for _ in 0..n {
        let end = out.len();
        for i in start..end {
            for s in 0..2 * rank {
                let g = Gen::from_slot(s);
                if out[i].gens().last() == Some(&g.inverse()) {
                    continue;
                }
                let mut v = out[i].gens().to_vec();
                v.push(g);
                out.push(Word::reduce(v));
            }
        }
        start = end;
    }
    out
}

/// Right coset representative of `seg·⟨h⟩` of minimal length (lexicographic tie-break),
/// returned with the exponent `k` such that `seg = rep · hᵏ`.
fn coset_rep(seg: &[Gen], h: &[Gen]) -> (Vec<Gen>, i64) {
    let l = h.len();
    let n = seg.len();
    let run = |matches: &dyn Fn(usize, Gen) -> bool| (0..n).take_while(|&i| matches(i, seg[n - 1 - i])).count();
    let plus = run(&|i, x| x == h[i % l].inverse());
    let minus = run(&|i, x| x == h[l - 1 - i % l]);
    let mut cands: Vec<i64> = vec![0];
    for (m, sign) in [(plus, 1i64), (minus, -1i64)] {
        if m > 0 {
            cands.push(sign * (m / l) as i64);
            cands.push(sign * m.div_ceil(l) as i64);
        }
    }
    let hw = Word::reduce(h.iter().copied());
    let mut best: Option<(Vec<Gen>, i64)> = None;
    for j in cands {
        let mut v = seg.to_vec();
        extend_reduced(&mut v, hw.pow(j).gens());
        let better = match &best {
            None => true,
            Some((b, _)) => v.len() < b.len() || (v.len() == b.len() && v < *b),
        };
        if better {
            best = Some((v, j));
        }
    }
    let (rep, j) = best.expect("candidate");
    (rep, -j)
}

/// Canonical vertex path of `g·x`: a list of `(segment, stable letter)` steps.
pub fn canonical_path(hnn: &HnnStructure, tokens: &[Gen]) -> Vec<(Vec<Gen>, Gen)> {
    let nf = hnn.normal_form(tokens);
    let mut out = Vec::with_capacity(nf.stables.len());
    let mut carry: Vec<Gen> = Vec::new();
    for (i, &s) in nf.stables.iter().enumerate() {
        let edge = &hnn.edges()[hnn.edge_index(s).expect("stable")];
        let ext = [Gen::pos(edge.ext)];
        let mut seg = std::mem::take(&mut carry);
        extend_reduced(&mut seg, &nf.segments[i]);
        // `E·s = s·c` for `s` positive, `c·s⁻¹ = s⁻¹·E` for `s` negative
        let (sub, across): (&[Gen], &[Gen]) = if s.is_inverse() { (&edge.edge_word, &ext) } else { (&ext, &edge.edge_word) };
        let (rep, k) = coset_rep(&seg, sub);
        let acr = Word::reduce(across.iter().copied()).pow(k);
        carry = acr.into_gens();
        out.push((rep, s));
    }
    out
}

#[derive(Default)]
struct Trie {
    parent: Vec<u32>,
    depth: Vec<u32>,
    children: HashMap<(u32, Vec<Gen>, Gen), u32>,
}

impl Trie {
    fn new() -> Self {
        Trie { parent: vec![0], depth: vec![0], children: HashMap::new() }
    }

    fn insert(&mut self, path: Vec<(Vec<Gen>, Gen)>) -> u32 {
        let mut node = 0u32;
        for (seg, s) in path {
            let next_id = self.parent.len() as u32;
            let entry = *self.children.entry((node, seg, s)).or_insert(next_id);
            if entry == next_id {
                self.parent.push(node);
                self.depth.push(self.depth[node as usize] + 1);
            }
            node = entry;
        }
        node
    }

    /// Vertex sequence of the geodesic from `u` to `v`.
    fn geodesic(&self, mut u: u32, mut v: u32) -> Vec<u32> {
        let mut head = Vec::new();
        let mut tail = Vec::new();
        while self.depth[u as usize] > self.depth[v as usize] {
            head.push(u);
            u = self.parent[u as usize];
        }
        while self.depth[v as usize] > self.depth[u as usize] {
            tail.push(v);
            v = self.parent[v as usize];
        }
        while u != v {
            head.push(u);
            tail.push(v);
            u = self.parent[u as usize];
            v = self.parent[v as usize];
        }
        head.push(u);
        head.extend(tail.into_iter().rev());
        head
    }
}

/// The hull `K(T, x, n)` of the `B_n`-orbit of the base vertex.
#[derive(Debug, Clone)]
pub struct Chart {
    pub n: usize,
    /// `parent[v]` for `v > 0`; vertex 0 is the basepoint.
    parent: Vec<usize>,
    depth: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    /// `(g, vertex of g·x)` for every `g ∈ B_n`.
    pub orbit_marks: Vec<(Word, usize)>,
    /// `maps[b][v]`: image of `v` under basis letter `b`, if it stays in the chart.
    maps: Vec<Vec<Option<usize>>>,
}

impl Chart {
    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub fn volume(&self) -> usize {
        self.vertex_count() - 1
    }

    pub fn basepoint(&self) -> usize {
        0
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v > 0).then(|| self.parent[v])
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.vertex_count()).map(|v| (self.parent[v], v))
    }

    /// Tree distance between two chart vertices.
    pub fn distance(&self, mut u: usize, mut v: usize) -> usize {
        let mut d = 0;
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
            d += 1;
        }
        d
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.neighbors[v].len() == 1
    }
}

/// Builds the chart at radius `n` together with the basis-induced partial isometries.
pub fn build_chart(t: &Curve, n: usize) -> Chart {
    let rank = t.rank();
    let hnn = t.hnn();
    let ball = cayley_ball(rank, n + 1);
    let mut trie = Trie::new();
    let mut end: HashMap<Word, u32> = HashMap::with_capacity(ball.len());
    // images of ball elements, built from the image of the word without its last letter
    let mut images: HashMap<Word, Word> = HashMap::with_capacity(ball.len());
    images.insert(Word::identity(), Word::identity());
    for g in &ball {
        let img = match g.gens().split_last() {
            None => Word::identity(),
            Some((&last, init)) => {
                let prev = &images[&Word::reduce(init.iter().copied())];
                let l = t.marking().apply(&Word::reduce([last]));
                prev.mul(&l)
            }
        };
        let node = trie.insert(canonical_path(hnn, img.gens()));
        end.insert(g.clone(), node);
        images.insert(g.clone(), img);
    }
    drop(images);

    // chart vertices: nodes on paths to B_n ends
    let total = trie.parent.len();
    let mut in_chart = vec![false; total];
    in_chart[0] = true;
    for g in ball.iter().filter(|g| g.len() <= n) {
        let mut v = end[g];
        while !in_chart[v as usize] {
            in_chart[v as usize] = true;
            v = trie.parent[v as usize];
        }
    }
    let mut id = vec![usize::MAX; total];
    let mut order: Vec<u32> = (0..total as u32).filter(|&v| in_chart[v as usize]).collect();
    order.sort_by_key(|&v| (trie.depth[v as usize], v));
    for (i, &v) in order.iter().enumerate() {
        id[v as usize] = i;
    }
    let m = order.len();
    let parent: Vec<usize> = order.iter().map(|&v| id[trie.parent[v as usize] as usize]).collect();
    let depth: Vec<usize> = order.iter().map(|&v| trie.depth[v as usize] as usize).collect();
    let mut neighbors = vec![Vec::new(); m];
    for v in 1..m {
        neighbors[v].push(parent[v]);
        neighbors[parent[v]].push(v);
    }
    let orbit_marks: Vec<(Word, usize)> =
        ball.iter().filter(|g| g.len() <= n).map(|g| (g.clone(), id[end[g] as usize])).collect();

    // b maps the i-th vertex of [x, g·x] to the i-th vertex of [b·x, bg·x]
    let mut maps = vec![vec![None; m]; rank];
    for (b, map) in maps.iter_mut().enumerate() {
        let bw = Word::letter(b);
        let bx = end[&bw];
        let mut done = vec![false; m];
        for (g, gx) in &orbit_marks {
            let bgx = end[&bw.mul(g)];
            let image_path = trie.geodesic(bx, bgx);
            let mut path = Vec::with_capacity(depth[*gx] + 1);
            let mut v = *gx;
            loop {
                path.push(v);
                if v == 0 {
                    break;
                }
                v = parent[v];
            }
            path.reverse();
            debug_assert_eq!(path.len(), image_path.len());
            for (i, &y) in path.iter().enumerate() {
                if !done[y] {
                    done[y] = true;
                    let img = id[image_path[i] as usize];
                    map[y] = (img != usize::MAX).then_some(img);
                }
            }
        }
    }
    Chart { n, parent, depth, neighbors, orbit_marks, maps }
}

/// Partial isometries `φ_b : K ∩ b⁻¹K → K` for each basis letter.
#[derive(Debug, Clone)]
pub struct PartialIsometrySystem {
    pub chart: Chart,
    forward: Vec<Vec<Option<usize>>>,
    backward: Vec<Vec<Option<usize>>>,
}

impl PartialIsometrySystem {
    pub fn letters(&self) -> usize {
        self.forward.len()
    }

    /// Image of `v` under `b` (or `b⁻¹` when `inverse`).
    pub fn apply(&self, b: usize, inverse: bool, v: usize) -> Option<usize> {
        if inverse {
            self.backward[b][v]
        } else {
            self.forward[b][v]
        }
    }

    pub fn domain(&self, b: usize) -> Vec<usize> {
        (0..self.chart.vertex_count()).filter(|&v| self.forward[b][v].is_some()).collect()
    }

    pub fn range(&self, b: usize) -> Vec<usize> {
        (0..self.chart.vertex_count()).filter(|&v| self.backward[b][v].is_some()).collect()
    }
}

pub fn induce_system(chart: &Chart) -> PartialIsometrySystem {
    let m = chart.vertex_count();
    let forward = chart.maps.clone();
    let mut backward = vec![vec![None; m]; forward.len()];
    for (b, map) in forward.iter().enumerate() {
        for (v, img) in map.iter().enumerate() {
            if let Some(u) = img {
                backward[b][*u] = Some(v);
            }
        }
    }
    PartialIsometrySystem { chart: chart.clone(), forward, backward }
}

/// One step of an itinerary: member `from` is carried onto member `to` by letter `letter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ItineraryStep {
    pub from: usize,
    pub letter: usize,
    pub to: usize,
    pub flips: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Family {
    /// Vertex path of the representative arc.
    pub representative_arc: Vec<usize>,
    /// Arcs of the family; member 0 is the representative.
    pub members: Vec<Vec<usize>>,
    /// Spanning tree of band maps reaching every member from the representative.
    pub itinerary: Vec<ItineraryStep>,
    #[serde(serialize_with = "ser_rational")]
    pub width: Rational,
    pub annular: bool,
    /// Cycle rank of a generic leaf.
    pub holonomy_rank: usize,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rational(r))
}

impl Family {
    pub fn leaf_count(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub families: Vec<Family>,
    pub singular_points: Vec<usize>,
    #[serde(serialize_with = "ser_rational")]
    pub covered_volume: Rational,
    pub chart_volume: usize,
    /// Band maps `(segment, letter, image segment, flips)` between segments.
    #[serde(skip)]
    pub bands: Vec<(usize, usize, usize, bool)>,
    #[serde(skip)]
    pub segments: Vec<Vec<usize>>,
}

impl Decomposition {
    pub fn volume_residual(&self) -> Rational {
        Ratio::from_integer(self.chart_volume as i128) - self.covered_volume
    }
}

pub fn imanishi_decompose(sys: &PartialIsometrySystem, orbit_cap: usize) -> Result<Decomposition> {
    let chart = &sys.chart;
    let m = chart.vertex_count();
    let letters = sys.letters();
    let mut singular: Vec<bool> = (0..m).map(|v| chart.neighbors(v).len() != 2).collect();
    // extremal points of every domain and range
    for b in 0..letters {
        for inverse in [false, true] {
            for (v, s) in singular.iter_mut().enumerate() {
                if sys.apply(b, inverse, v).is_none() {
                    continue;
                }
                let inside = chart.neighbors(v).iter().filter(|&&u| sys.apply(b, inverse, u).is_some()).count();
                if inside != 2 {
                    *s = true;
                }
            }
        }
    }
    // closure under the pseudo-group
    let mut queue: Vec<usize> = (0..m).filter(|&v| singular[v]).collect();
    let mut count = queue.len();
    while let Some(v) = queue.pop() {
        for b in 0..letters {
            for inverse in [false, true] {
                if let Some(u) = sys.apply(b, inverse, v) {
                    if !singular[u] {
                        singular[u] = true;
                        count += 1;
                        if count > orbit_cap {
                            return Err(Error::OrbitCap(count));
                        }
                        queue.push(u);
                    }
                }
            }
        }
    }

    // maximal arcs between singular vertices
    let mut segments: Vec<Vec<usize>> = Vec::new();
    let mut seg_of_edge = vec![usize::MAX; m]; // indexed by child vertex of the edge
    let edge_key = |u: usize, v: usize| if chart.depth(u) > chart.depth(v) { u } else { v };
    for s in 0..m {
        if !singular[s] {
            continue;
        }
        for &first in chart.neighbors(s) {
            if seg_of_edge[edge_key(s, first)] != usize::MAX {
                continue;
            }
            let mut arc = vec![s, first];
            while !singular[*arc.last().expect("arc")] {
                let (prev, cur) = (arc[arc.len() - 2], arc[arc.len() - 1]);
                let next = *chart.neighbors(cur).iter().find(|&&u| u != prev).expect("valence 2");
                arc.push(next);
            }
            let id = segments.len();
            for w in arc.windows(2) {
                seg_of_edge[edge_key(w[0], w[1])] = id;
            }
            segments.push(arc);
        }
    }

    // band maps between whole segments
    let mut bands = Vec::new();
    for (i, arc) in segments.iter().enumerate() {
        for b in 0..letters {
            let img: Option<Vec<usize>> = arc.iter().map(|&v| sys.apply(b, false, v)).collect();
            let Some(img) = img else { continue };
            let j = seg_of_edge[edge_key(img[0], img[1])];
            let target = &segments[j];
            let flips = if img == *target {
                false
            } else if img.iter().rev().eq(target.iter()) {
                true
            } else {
                return Err(Error::Input(format!("band image of segment {i} is not a segment")));
            };
            bands.push((i, b, j, flips));
        }
    }

    // families: components of the segment graph
    let ns = segments.len();
    let mut adj: Vec<Vec<(usize, usize, bool, usize)>> = vec![Vec::new(); ns]; // (other, letter, flips, band index)
    for (k, &(i, b, j, f)) in bands.iter().enumerate() {
        adj[i].push((j, b, f, k));
        if i != j {
            adj[j].push((i, b, f, k));
        }
    }
    let mut family_of = vec![usize::MAX; ns];
    let mut families = Vec::new();
    for start in 0..ns {
        if family_of[start] != usize::MAX {
            continue;
        }
        let fid = families.len();
        family_of[start] = fid;
        let mut members = vec![start];
        let mut itinerary = Vec::new();
        let mut local = HashMap::from([(start, 0usize)]);
        let mut i = 0;
        while i < members.len() {
            let s = members[i];
            i += 1;
            for &(o, b, f, _) in &adj[s] {
                if family_of[o] == usize::MAX {
                    family_of[o] = fid;
                    local.insert(o, members.len());
                    itinerary.push(ItineraryStep { from: local[&s], letter: b, to: members.len(), flips: f });
                    members.push(o);
                }
            }
        }
        // generic leaf: nodes (segment, orientation), one edge per band and orientation
        let mut seen: HashMap<(usize, bool), ()> = HashMap::new();
        let mut stack = vec![(start, false)];
        seen.insert((start, false), ());
        let mut edges = 0usize;
        while let Some((s, o)) = stack.pop() {
            for &(_, _, f, k) in &adj[s] {
                let (bi, _, bj, _) = bands[k];
                // each band is counted from its source side only
                let next = if bi == s {
                    edges += 1;
                    (bj, o ^ f)
                } else {
                    (bi, o ^ f)
                };
                if seen.insert(next, ()).is_none() {
                    stack.push(next);
                }
            }
        }
        let nodes = seen.len();
        let holonomy_rank = (edges + 1).saturating_sub(nodes);
        let width = Ratio::from_integer((segments[start].len() - 1) as i128);
        families.push(Family {
            representative_arc: segments[start].clone(),
            members: members.iter().map(|&s| segments[s].clone()).collect(),
            itinerary,
            width,
            annular: holonomy_rank > 0,
            holonomy_rank,
        });
    }
    let covered: i128 = families.iter().map(|f| *f.width.numer() * f.leaf_count() as i128).sum();
    Ok(Decomposition {
        families,
        singular_points: (0..m).filter(|&v| singular[v]).collect(),
        covered_volume: Ratio::from_integer(covered),
        chart_volume: chart.volume(),
        bands,
        segments,
    })
}

pub fn min_nonannular_width(d: &Decomposition) -> Option<Rational> {
    d.families.iter().filter(|f| !f.annular).map(|f| f.width).min()
}

/// Least scale at which the stabilized edge is declared visible: the word
/// lengths of the edge element and of its conjugate across the stable letter,
/// both pulled back through the marking.
pub fn stabilized_edge_scale(t: &Curve) -> usize {
    let w = t.edge_element();
    let across = t.marking().apply_inverse(&t.extension_word());
    w.len().max(across.len())
}

/// Least scale `≤ n_max` whose decomposition has an annular family.
pub fn first_annular_scale(t: &Curve, n_max: usize) -> Result<Option<usize>> {
    for n in 0..=n_max {
        let d = decompose(t, n)?;
        if d.families.iter().any(|f| f.annular) {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

pub fn decompose(t: &Curve, n: usize) -> Result<Decomposition> {
    imanishi_decompose(&induce_system(&build_chart(t, n)), DEFAULT_ORBIT_CAP)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub width_a: Option<String>,
    pub width_b: Option<String>,
    pub epsilon: String,
    pub distance: Option<String>,
    pub pass: bool,
}

/// Compares minimal non-annular widths of two curves at scale `n`.
pub fn stability_probe(
    a: &Curve,
    b: &Curve,
    n: usize,
    epsilon: Rational,
    test_set: &[crate::word::ConjClass],
) -> Result<ProbeReport> {
    if a.basis() != b.basis() {
        return Err(Error::BasisMismatch("probe curves need a shared basis".into()));
    }
    let wa = min_nonannular_width(&decompose(a, n)?);
    let wb = min_nonannular_width(&decompose(b, n)?);
    let pass = match (wa, wb) {
        (Some(x), Some(y)) => y >= x - epsilon,
        (None, _) => true,
        (Some(_), None) => false,
    };
    let distance = crate::twist::projective_distance(&a.length_vector(test_set), &b.length_vector(test_set))
        .ok()
        .map(|d| fmt_rational(&d));
    Ok(ProbeReport {
        width_a: wa.map(|w| fmt_rational(&w)),
        width_b: wb.map(|w| fmt_rational(&w)),
        epsilon: fmt_rational(&epsilon),
        distance,
        pass,
    })
}
