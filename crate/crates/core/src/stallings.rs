//! Folded Stallings graphs: membership, rank, and intersections via the fiber product.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::word::{Gen, Word};

const NONE: u32 = u32::MAX;

/// Folded, based core graph of a finitely generated subgroup.
///
/// Vertex `v` has, for each signed letter slot `s`, at most one outgoing edge
/// `trans[v * 2N + s]`; the reverse edge is stored at the target under the
/// inverse slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupGraph {
    rank: usize,
    base: u32,
    trans: Vec<u32>,
}

/// Mutable folding workspace with union-find over vertices.
struct Folder {
    slots: usize,
    trans: Vec<u32>,
    parent: Vec<u32>,
    pending: Vec<(u32, u32)>,
}

impl Folder {
    fn new(rank: usize) -> Self {
        let mut f = Folder { slots: 2 * rank, trans: Vec::new(), parent: Vec::new(), pending: Vec::new() };
        f.add_vertex();
        f
    }

    fn add_vertex(&mut self) -> u32 {
        let v = self.parent.len() as u32;
        self.parent.push(v);
        self.trans.extend(std::iter::repeat_n(NONE, self.slots));
        v
    }

    fn find(&mut self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            let p = self.parent[v as usize];
            self.parent[v as usize] = self.parent[p as usize];
            v = p;
        }
        v
    }

    fn get(&mut self, v: u32, slot: usize) -> Option<u32> {
        let t = self.trans[v as usize * self.slots + slot];
        (t != NONE).then(|| self.find(t))
    }

    /// Sets a half-edge, queueing a merge on collision.
    fn set_half(&mut self, v: u32, slot: usize, target: u32) {
        let cell = v as usize * self.slots + slot;
        let old = self.trans[cell];
        if old == NONE {
            self.trans[cell] = target;
        } else {
            self.pending.push((old, target));
        }
    }

    fn add_edge(&mut self, u: u32, g: Gen, v: u32) {
        self.set_half(u, g.slot(), v);
        self.set_half(v, g.inverse().slot(), u);
        self.drain();
    }

    fn drain(&mut self) {
        while let Some((x, y)) = self.pending.pop() {
            let (x, y) = (self.find(x), self.find(y));
            if x == y {
                continue;
            }
            let (keep, gone) = if x < y { (x, y) } else { (y, x) };
            self.parent[gone as usize] = keep;
            for s in 0..self.slots {
                let t = self.trans[gone as usize * self.slots + s];
                if t != NONE {
                    self.set_half(keep, s, t);
                }
            }
        }
    }

    /// Adds a based loop reading `w`, reusing existing edges where possible.
    fn add_loop(&mut self, w: &[Gen]) {
        if w.is_empty() {
            return;
        }
        let mut i = 0;
        let mut u = 0u32;
        while i < w.len() {
            match self.get(u, w[i].slot()) {
                Some(next) => {
                    u = next;
                    i += 1;
                }
                None => break,
            }
        }
        if i == w.len() {
            // The whole word is readable; close up by identifying endpoints.
            self.pending.push((u, 0));
            self.drain();
            return;
        }
        let mut j = w.len();
        let mut v = 0u32;
        while j > i + 1 {
            match self.get(v, w[j - 1].inverse().slot()) {
                Some(prev) => {
                    v = prev;
                    j -= 1;
                }
                None => break,
            }
        }
        let mut cur = u;
        for g in &w[i..j - 1] {
            let nv = self.add_vertex();
            let cur_r = self.find(cur);
            self.add_edge(cur_r, *g, nv);
            cur = nv;
        }
        let (c, v) = (self.find(cur), self.find(v));
        self.add_edge(c, w[j - 1], v);
    }

    /// Compacts live vertices and trims hanging trees (keeping the basepoint).
    fn finish(mut self, rank: usize) -> SubgroupGraph {
        let n = self.parent.len();
        let slots = self.slots;
        let mut trans = vec![NONE; n * slots];
        for v in 0..n as u32 {
            if self.find(v) != v {
                continue;
            }
            for s in 0..slots {
                if let Some(t) = self.get(v, s) {
                    trans[v as usize * slots + s] = t;
                }
            }
        }
        let alive: Vec<bool> = (0..n as u32).map(|v| self.find(v) == v).collect();
        let base = self.find(0);
        SubgroupGraph::from_raw(rank, base, trans, alive, true).0
    }
}

impl SubgroupGraph {
    /// Builds from raw transitions, trims to the core, and relabels in BFS order.
    /// The basepoint is `base` if it survives trimming, else the least surviving vertex.
    /// Returns the graph and the raw id of the vertex that became its basepoint.
    fn from_raw(rank: usize, base: u32, mut trans: Vec<u32>, mut alive: Vec<bool>, keep_base: bool) -> (Self, u32) {
        let slots = 2 * rank;
        trim(slots, &mut trans, &mut alive, keep_base.then_some(base as usize));
        let base = if alive[base as usize] {
            base
        } else {
            match alive.iter().position(|&a| a) {
                Some(v) => v as u32,
                None => return (SubgroupGraph { rank, base: 0, trans: vec![NONE; slots] }, base),
            }
        };
        (Self::relabel(rank, base, &trans, slots), base)
    }

    fn relabel(rank: usize, base: u32, trans: &[u32], slots: usize) -> Self {
        let mut order = vec![NONE; trans.len() / slots];
        let mut queue = VecDeque::from([base]);
        order[base as usize] = 0;
        let mut seq = vec![base];
        while let Some(v) = queue.pop_front() {
            for s in 0..slots {
                let t = trans[v as usize * slots + s];
                if t != NONE && order[t as usize] == NONE {
                    order[t as usize] = seq.len() as u32;
                    seq.push(t);
                    queue.push_back(t);
                }
            }
        }
        let mut out = vec![NONE; seq.len() * slots];
        for (new, &old) in seq.iter().enumerate() {
            for s in 0..slots {
                let t = trans[old as usize * slots + s];
                if t != NONE {
                    out[new * slots + s] = order[t as usize];
                }
            }
        }
        SubgroupGraph { rank, base: 0, trans: out }
    }

    /// Folded core graph of the subgroup generated by `generators` in F_rank.
    pub fn fold(rank: usize, generators: &[Word]) -> Self {
        let mut f = Folder::new(rank);
        for g in generators {
            f.add_loop(g.gens());
        }
        f.finish(rank)
    }

    pub fn alphabet_rank(&self) -> usize {
        self.rank
    }

    fn slots(&self) -> usize {
        2 * self.rank
    }

    pub fn vertex_count(&self) -> usize {
        self.trans.len() / self.slots()
    }

    pub fn edge_count(&self) -> usize {
        // positive slots only
        self.trans.iter().enumerate().filter(|(i, &t)| t != NONE && i % 2 == 0).count()
    }

    pub fn basepoint(&self) -> usize {
        self.base as usize
    }

    pub fn target(&self, v: usize, g: Gen) -> Option<usize> {
        let t = self.trans[v * self.slots() + g.slot()];
        (t != NONE).then_some(t as usize)
    }

    /// Edges `(source, target, letter)` with positive letters.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for v in 0..self.vertex_count() {
            for i in 0..self.rank {
                if let Some(t) = self.target(v, Gen::pos(i)) {
                    out.push((v, t, i));
                }
            }
        }
        out
    }

    pub fn rank(&self) -> usize {
        (self.edge_count() + 1).saturating_sub(self.vertex_count())
    }

    /// Reads `w` from `start`; `None` if the path leaves the graph.
    pub fn read(&self, start: usize, w: &[Gen]) -> Option<usize> {
        w.iter().try_fold(start, |v, &g| self.target(v, g))
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.read(self.basepoint(), w.gens()) == Some(self.basepoint())
    }

    pub fn letters_seen(&self) -> BTreeSet<usize> {
        self.edges().into_iter().map(|(_, _, l)| l).collect()
    }

    /// BFS tree paths from the basepoint to every vertex.
    pub fn tree_paths(&self) -> Vec<Word> {
        let n = self.vertex_count();
        let mut path: Vec<Option<Word>> = vec![None; n];
        path[self.basepoint()] = Some(Word::identity());
        let mut queue = VecDeque::from([self.basepoint()]);
        while let Some(v) = queue.pop_front() {
            for s in 0..self.slots() {
                let g = Gen::from_slot(s);
                if let Some(t) = self.target(v, g) {
                    if path[t].is_none() {
                        let p = path[v].as_ref().expect("visited").mul(&Word::reduce([g]));
                        path[t] = Some(p);
                        queue.push_back(t);
                    }
                }
            }
        }
        path.into_iter().map(|p| p.expect("connected")).collect()
    }

    /// Free basis read off a BFS spanning tree.
    pub fn generators(&self) -> Vec<Word> {
        let paths = self.tree_paths();
        let mut out = Vec::new();
        for (u, v, l) in self.edges() {
            let g = Word::letter(l);
            let through = paths[u].mul(&g);
            if through != paths[v] && paths[v].mul(&g.inverse()) != paths[u] {
                out.push(through.mul(&paths[v].inverse()));
            }
        }
        out
    }

    /// Same graph with the basepoint moved to `v` (not trimmed).
    pub fn rebased(&self, v: usize) -> SubgroupGraph {
        Self::relabel(self.rank, v as u32, &self.trans, self.slots())
    }

    /// The unbased cyclic core: hanging trees, including one at the basepoint, removed.
    pub fn cyclic_core(&self) -> Option<SubgroupGraph> {
        let n = self.vertex_count();
        let (g, _) = Self::from_raw(self.rank, self.base, self.trans.clone(), vec![true; n], false);
        (g.edge_count() > 0).then_some(g)
    }

    /// BFS code of the graph from `start`; equal codes mean label-preserving based isomorphism.
    fn code_from(&self, start: usize) -> Vec<u32> {
        Self::relabel(self.rank, start as u32, &self.trans, self.slots()).trans
    }

    /// Based isomorphism respecting labels.
    pub fn based_isomorphic(&self, other: &SubgroupGraph) -> bool {
        self.rank == other.rank && self.code_from(self.basepoint()) == other.code_from(other.basepoint())
    }

    /// Canonical signature of the conjugacy class: least BFS code of the cyclic core over all basepoints.
    pub fn conjugacy_signature(&self) -> Vec<u32> {
        match self.cyclic_core() {
            None => Vec::new(),
            Some(core) => (0..core.vertex_count()).map(|v| core.code_from(v)).min().unwrap_or_default(),
        }
    }
}

/// One nontrivial conjugacy class of `H ∩ gKg⁻¹`.
#[derive(Debug, Clone)]
pub struct IntersectionComponent {
    pub graph: SubgroupGraph,
    pub letters_seen: BTreeSet<usize>,
    /// Vertices of `H` and `K` under the component's basepoint.
    pub over: (usize, usize),
}

#[derive(Debug, Clone, Default)]
pub struct IntersectionReport {
    pub components: Vec<IntersectionComponent>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ComponentSummary {
    pub rank: usize,
    pub letters: String,
    pub generators: Vec<String>,
}

impl IntersectionReport {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.components.iter().map(|c| c.graph.rank()).collect();
        r.sort_unstable();
        r
    }

    pub fn summarize(&self, basis: &crate::word::Basis) -> Vec<ComponentSummary> {
        self.components
            .iter()
            .map(|c| ComponentSummary {
                rank: c.graph.rank(),
                letters: c.letters_seen.iter().map(|&i| basis.letter(i)).collect(),
                generators: c.graph.generators().iter().map(|g| basis.format(g)).collect(),
            })
            .collect()
    }
}

/// Cores of the fiber-product components carrying loops.
pub fn intersect_conjugates(h: &SubgroupGraph, k: &SubgroupGraph) -> IntersectionReport {
    assert_eq!(h.rank, k.rank, "intersect_conjugates: alphabet mismatch");
    let slots = h.slots();
    let (nh, nk) = (h.vertex_count(), k.vertex_count());
    let pair = |a: usize, b: usize| a * nk + b;
    let n = nh * nk;
    let mut trans = vec![NONE; n * slots];
    let mut any_edge = vec![false; n];
    for a in 0..nh {
        for b in 0..nk {
            for s in 0..slots {
                let (ta, tb) = (h.trans[a * slots + s], k.trans[b * slots + s]);
                if ta != NONE && tb != NONE {
                    trans[pair(a, b) * slots + s] = pair(ta as usize, tb as usize) as u32;
                    any_edge[pair(a, b)] = true;
                }
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX || !any_edge[start] {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut i = 0;
        while i < members.len() {
            let v = members[i];
            i += 1;
            for s in 0..slots {
                let t = trans[v * slots + s];
                if t != NONE && comp[t as usize] == usize::MAX {
                    comp[t as usize] = id;
                    members.push(t as usize);
                }
            }
        }
        let alive: Vec<bool> = (0..n).map(|v| comp[v] == id).collect();
        let (core, base_pair) = SubgroupGraph::from_raw(h.rank, start as u32, trans.clone(), alive, false);
        if core.edge_count() == 0 {
            components.push(None);
            continue;
        }
        let base_pair = base_pair as usize;
        let letters_seen = core.letters_seen();
        components.push(Some(IntersectionComponent {
            graph: core,
            letters_seen,
            over: (base_pair / nk, base_pair % nk),
        }));
    }
    IntersectionReport { components: components.into_iter().flatten().collect() }
}

/// Removes degree ≤ 1 vertices repeatedly, except `keep`.
fn trim(slots: usize, trans: &mut [u32], alive: &mut [bool], keep: Option<usize>) {
    let degree = |t: &[u32], v: usize| (0..slots).filter(|&s| t[v * slots + s] != NONE).count();
    let mut stack: Vec<usize> = (0..alive.len()).filter(|&v| alive[v] && degree(trans, v) <= 1).collect();
    while let Some(v) = stack.pop() {
        if !alive[v] || keep == Some(v) || degree(trans, v) > 1 {
            continue;
        }
        alive[v] = false;
        for s in 0..slots {
            let u = trans[v * slots + s];
            if u != NONE {
                trans[v * slots + s] = NONE;
                trans[u as usize * slots + (s ^ 1)] = NONE;
                if alive[u as usize] && degree(trans, u as usize) <= 1 {
                    stack.push(u as usize);
                }
            }
        }
    }
}

/// True iff every component uses some letter outside `subfactor_letters`.
pub fn avoids_subfactor(report: &IntersectionReport, subfactor_letters: &[usize]) -> bool {
    report.components.iter().all(|c| c.letters_seen.iter().any(|l| !subfactor_letters.contains(l)))
}
