//! The staged construction.
//!
//! A stage takes a disjoint pair `(T, T′)` with neighborhoods, makes one more
//! factor act freely on both curves, then makes both resolutions keep a
//! non-annular family at the stage scale, and finally shrinks the
//! neighborhoods. Every "sufficiently high power" in the underlying argument
//! becomes an incremental search whose acceptance test is the decidable check
//! the argument consumes.
//!
//! The pair is kept as one marked two-edge refinement, so the two curves always
//! share a marking `m` and are disjoint by construction. All moves are written
//! in the current frame (the standard basis read through `m`) and applied as
//! `m ↦ ψ ∘ m`. Moves for one side are chosen from the stabilizer of the other
//! side's standard curve, so moving `T` leaves `T′` exactly where it was.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automorphism::{Automorphism, AutomorphismSpec};
use crate::error::{Error, Result};
use crate::registry::{ExpansionRegistry, ExpansionStrategy, MoveRegistry};
use crate::resolution::{decompose, min_nonannular_width, stabilized_edge_scale};
use crate::splitting::{
    counting_current_intersection, disjointness_certificate, standard_pair, Curve, StandardRoles, TwoEdgeRefinement,
};
use crate::stallings::{intersect_conjugates, SubgroupGraph};
use crate::twist::{default_test_set, fmt_rational, parse_rational, projective_distance_to, NeighborhoodSpec, Rational};
use crate::word::{random_word_with, Basis, ConjClass, Gen, Word};

pub const SCHEMA: &str = "treesmith/1";

/// Size of the fixed test set that carries every neighborhood.
pub const NEIGHBORHOOD_TEST_CAP: usize = 64;
/// Size of the per-stage test set used for disjointness residuals.
pub const STAGE_TEST_CAP: usize = 128;
const EXPANSION_POWER_MAX: u32 = 12;
const ANCHOR_POWER_MAX: u32 = 4;
const NONGEOMETRIC_POWER_MAX: u32 = 12;
const U_ATTEMPTS: usize = 4;
/// Floor on the random word length of the non-geometric step.
pub const MIN_U_LEN: usize = 8;

mod rational_text {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(r))
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Int(i64),
        Float(f64),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Int(i) => i.to_string(),
            Raw::Float(f) => f.to_string(),
        };
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub rank: usize,
    pub edge_word: String,
    #[serde(rename = "depth_K")]
    pub depth_k: usize,
    pub factor_budget: usize,
    /// Length cap of the neighborhood test set; stage `k` residuals use `test_len_cap + k`.
    pub test_len_cap: usize,
    /// Largest twist power tried in any search.
    pub k_max: usize,
    /// Widths must exceed this.
    #[serde(with = "rational_text")]
    pub tol: Rational,
    #[serde(with = "rational_text")]
    pub radius0: Rational,
    #[serde(with = "rational_text")]
    pub radius_ratio: Rational,
    pub random_u_len: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            rank: 4,
            edge_word: "a".into(),
            depth_k: 3,
            factor_budget: 1,
            test_len_cap: 4,
            k_max: 200,
            tol: Rational::new(1, 1000),
            radius0: Rational::new(1, 4),
            radius_ratio: Rational::new(1, 2),
            random_u_len: 32,
            seed: 1,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.rank < 4 {
            return bad(format!("rank {} < 4", self.rank));
        }
        let zero = Rational::from_integer(0);
        let one = Rational::from_integer(1);
        if self.radius0 <= zero {
            return bad("radius0 must be positive".into());
        }
        if self.radius_ratio <= zero || self.radius_ratio >= one {
            return bad("radius_ratio must lie strictly between 0 and 1".into());
        }
        if self.random_u_len < MIN_U_LEN {
            return bad(format!("random_u_len {} below the floor {MIN_U_LEN}", self.random_u_len));
        }
        if self.tol < zero {
            return bad("tol must be nonnegative".into());
        }
        if self.test_len_cap == 0 || self.k_max == 0 {
            return bad("test_len_cap and k_max must be positive".into());
        }
        self.edge_word()?;
        Ok(())
    }

    pub fn basis(&self) -> Result<Basis> {
        crate::splitting::standard_basis(self.rank)
    }

    pub fn edge_word(&self) -> Result<Word> {
        let w = self.basis()?.parse(&self.edge_word)?;
        standard_pair(self.rank, Some(&w))?;
        Ok(w)
    }

    /// `r_k = r₀ · ρᵏ`.
    pub fn radius(&self, k: usize) -> Rational {
        (0..k).fold(self.radius0, |r, _| r * self.radius_ratio)
    }

    pub fn neighborhood_test_set(&self) -> Vec<ConjClass> {
        default_test_set(self.rank, self.test_len_cap, NEIGHBORHOOD_TEST_CAP, self.seed)
    }

    pub fn stage_test_set(&self, k: usize) -> Vec<ConjClass> {
        default_test_set(self.rank, self.test_len_cap + k, STAGE_TEST_CAP, self.seed.wrapping_add(k as u64))
    }
}

/// A proper free factor given by automorphism images of a proper subset of the basis.
#[derive(Debug, Clone)]
pub struct FactorSpec {
    pub generators: Vec<Word>,
    pub provenance: String,
    pub graph: SubgroupGraph,
}

impl FactorSpec {
    pub fn from_subset(subset: &[usize], automorphism: &Automorphism) -> Result<Self> {
        let rank = automorphism.rank();
        if subset.is_empty() || subset.len() >= rank || subset.iter().any(|&i| i >= rank) {
            return Err(Error::Input(format!("{subset:?} is not a nonempty proper subset of the basis")));
        }
        let generators: Vec<Word> = subset.iter().map(|&i| automorphism.image(i).clone()).collect();
        let provenance = format!("{}{subset:?}", automorphism.name());
        Ok(Self::build(rank, generators, provenance))
    }

    fn build(rank: usize, generators: Vec<Word>, provenance: String) -> Self {
        let graph = SubgroupGraph::fold(rank, &generators);
        FactorSpec { generators, provenance, graph }
    }

    pub fn rank(&self) -> usize {
        self.graph.rank()
    }

    fn to_record(&self, basis: &Basis) -> FactorRecord {
        FactorRecord {
            generators: self.generators.iter().map(|g| basis.format(g)).collect(),
            provenance: self.provenance.clone(),
        }
    }

    fn from_record(r: &FactorRecord, basis: &Basis) -> Result<Self> {
        let generators = r.generators.iter().map(|g| basis.parse(g)).collect::<Result<Vec<_>>>()?;
        let f = Self::build(basis.rank(), generators, r.provenance.clone());
        if f.rank() == 0 || f.rank() >= basis.rank() {
            return Err(Error::Input(format!("factor {:?} has rank {}", r.generators, f.rank())));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub generators: Vec<String>,
    pub provenance: String,
}

fn proper_subsets(rank: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> =
        (1u32..(1 << rank) - 1).map(|mask| (0..rank).filter(|&i| mask >> i & 1 == 1).collect()).collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Images of proper basis subsets under compositions of at most `budget`
/// elementary moves, one per conjugacy class, layered by budget.
pub fn enumerate_factors(rank: usize, budget: usize, moves: &MoveRegistry) -> Vec<FactorSpec> {
    let subsets = proper_subsets(rank);
    let elementary = moves.all_moves(rank);
    let mut seen_maps: HashSet<Vec<Word>> = HashSet::new();
    let mut seen_factors: HashSet<Vec<u32>> = HashSet::new();
    let mut out = Vec::new();
    let mut layer = vec![Automorphism::identity(rank)];
    seen_maps.insert(layer[0].images().to_vec());
    for level in 0..=budget {
        for auto in &layer {
            for s in &subsets {
                let f = FactorSpec::from_subset(s, auto).expect("proper subset");
                if seen_factors.insert(f.graph.conjugacy_signature()) {
                    out.push(f);
                }
            }
        }
        if level == budget {
            break;
        }
        let mut next = Vec::new();
        for auto in &layer {
            for m in &elementary {
                let c = m.compose(auto);
                if seen_maps.insert(c.images().to_vec()) {
                    next.push(c);
                }
            }
        }
        layer = next;
    }
    out
}

/// Roles of one side of the standard pair in the current frame.
#[derive(Debug, Clone)]
struct Side {
    /// Vertex letters owned by this side: `a₁…a_{N−3}` for `T`, `w′` for `T′`.
    core: Vec<usize>,
    stable: usize,
    edge: Word,
    partner_stable: usize,
    /// Elements of the partner's vertex group avoiding this side's letters.
    partner_free: Vec<Word>,
    /// Partner's edge word conjugated across its stable letter.
    partner_extension: Word,
}

impl Side {
    fn both(rank: usize, w: &Word) -> [Side; 2] {
        let r = StandardRoles::new(rank);
        let conj = |s: usize, e: &Word| {
            let sw = Word::letter(s);
            sw.mul(e).mul(&sw.inverse())
        };
        let w2 = Word::letter(r.w2);
        let e1 = conj(r.t, w);
        let e2 = conj(r.t2, &w2);
        let mut free2: Vec<Word> = r.vertex_core().into_iter().map(Word::letter).collect();
        free2.push(e1.clone());
        [
            Side {
                core: r.vertex_core(),
                stable: r.t,
                edge: w.clone(),
                partner_stable: r.t2,
                partner_free: vec![w2.clone(), e2.clone()],
                partner_extension: e2,
            },
            Side { core: vec![r.w2], stable: r.t2, edge: w2, partner_stable: r.t, partner_free: free2, partner_extension: e1 },
        ]
    }

    fn factor_letters(&self) -> Vec<usize> {
        let mut v = self.core.clone();
        v.push(self.stable);
        v
    }

    /// `stable ↦ stable · edgeᵏ`.
    fn twist_power(&self, rank: usize, k: usize) -> Automorphism {
        Automorphism::twist(rank, self.stable, &self.edge.pow(k as i64)).expect("edge word avoids the stable letter")
    }
}

/// The construction state after stage `k`.
#[derive(Debug, Clone)]
pub struct StageState {
    pub k: usize,
    pub t: Curve,
    pub t2: Curve,
    pub y: TwoEdgeRefinement,
    pub u: NeighborhoodSpec,
    pub u2: NeighborhoodSpec,
    pub processed_factors: Vec<FactorSpec>,
    pub rng_seed: u64,
    pub certificates: Vec<Certificate>,
}

impl StageState {
    pub fn initial(config: &Config) -> Result<Self> {
        config.validate()?;
        let (t, t2, y) = standard_pair(config.rank, Some(&config.edge_word()?))?;
        let tests = config.neighborhood_test_set();
        let u = NeighborhoodSpec::around(&t, &tests, config.radius(0))?;
        let u2 = NeighborhoodSpec::around(&t2, &tests, config.radius(0))?;
        Ok(StageState { k: 0, t, t2, y, u, u2, processed_factors: Vec::new(), rng_seed: config.seed, certificates: vec![] })
    }

    pub fn marking(&self) -> &Automorphism {
        self.y.marking()
    }

    fn curve(&self, side: usize) -> &Curve {
        if side == 1 {
            &self.t
        } else {
            &self.t2
        }
    }

    fn remark(&self, marking: Automorphism) -> Result<Self> {
        let y = self.y.with_marking(marking);
        Ok(StageState { t: y.collapse(1)?, t2: y.collapse(2)?, y, ..self.clone() })
    }

    pub fn to_record(&self) -> StageRecord {
        let basis = self.y.basis();
        StageRecord {
            k: self.k,
            marking: AutomorphismSpec::from_automorphism(self.marking(), basis),
            radius: fmt_rational(&self.u.radius),
            processed_factors: self.processed_factors.iter().map(|f| f.to_record(basis)).collect(),
            rng_seed: self.rng_seed,
            certificates: self.certificates.clone(),
        }
    }

    /// Rebuilds a state; the neighborhoods are recomputed from the curves and the config test set.
    pub fn from_record(r: &StageRecord, config: &Config) -> Result<Self> {
        let base = StageState::initial(config)?;
        let basis = base.y.basis().clone();
        let marking = r.marking.to_automorphism(&basis)?;
        let mut s = base.remark(marking)?;
        let radius = parse_rational(&r.radius)?;
        let tests = config.neighborhood_test_set();
        s.k = r.k;
        s.u = NeighborhoodSpec::around(&s.t, &tests, radius)?;
        s.u2 = NeighborhoodSpec::around(&s.t2, &tests, radius)?;
        s.processed_factors = r.processed_factors.iter().map(|f| FactorSpec::from_record(f, &basis)).collect::<Result<_>>()?;
        s.rng_seed = r.rng_seed;
        s.certificates = r.certificates.clone();
        Ok(s)
    }
}

/// Serialized [`StageState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub k: usize,
    pub marking: AutomorphismSpec,
    pub radius: String,
    pub processed_factors: Vec<FactorRecord>,
    pub rng_seed: u64,
    pub certificates: Vec<Certificate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub generators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreenessSummary {
    pub components: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidthEntry {
    pub scale: usize,
    /// Least non-annular width over both curves; `None` if some curve has no non-annular family.
    pub width: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestingSummary {
    pub distance: String,
    pub r_new: String,
    pub r_old: String,
    pub pass: bool,
}

/// Evidence for one stage, in report order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub k: usize,
    pub factor: FactorSummary,
    pub freeness: FreenessSummary,
    pub disjoint_residuals: Vec<i64>,
    pub eta_zero: bool,
    pub widths: Vec<WidthEntry>,
    pub nesting: NestingSummary,
    pub twist_powers: Vec<usize>,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.freeness.pass
            && self.disjoint_residuals.iter().all(|&r| r == 0)
            && self.eta_zero
            && !self.widths.is_empty()
            && self.widths.iter().all(|w| w.width.is_some())
            && self.nesting.pass
    }
}

/// A state together with the twist powers used to reach it.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: StageState,
    pub twist_powers: Vec<usize>,
}

/// Stage-scoped search context: the stage's starting neighborhoods and the
/// radius budget every move must stay within.
struct StageFrame<'a> {
    config: &'a Config,
    expansion: &'a dyn ExpansionStrategy,
    sides: [Side; 2],
    /// `U_{k−1}`, `U′_{k−1}`.
    outer: [NeighborhoodSpec; 2],
    /// `r_{k−1} − r_k`: how far the new centers may move.
    budget: Rational,
    /// Twist searches still to run in this stage; each gets an equal share of the remaining slack.
    twists_left: usize,
    /// Closest distance and target of the last failed twist search, for error reports.
    last_miss: Option<(Rational, Rational)>,
}

impl StageFrame<'_> {
    fn rank(&self) -> usize {
        self.config.rank
    }

    fn side(&self, i: usize) -> &Side {
        &self.sides[i - 1]
    }

    fn base_curve(&self, side: usize) -> Result<Curve> {
        let (t, t2, _) = standard_pair(self.rank(), Some(&self.config.edge_word()?))?;
        Ok(if side == 1 { t } else { t2 })
    }

    /// Searches twist powers `k ≤ k_max` for the marking `ψ ∘ τᵏ ∘ m`, where `τ`
    /// is the side's standard twist and `m` the current marking. Distances are
    /// measured to the stage's outer center; the first power inside the
    /// allotted radius that also passes `accept` wins.
    fn twist_search(
        &mut self,
        state: &StageState,
        side: usize,
        psi: &Automorphism,
        mut accept: impl FnMut(&StageState) -> Result<bool>,
    ) -> Result<Option<(usize, StageState)>> {
        let outer = &self.outer[side - 1];
        let base = self.base_curve(side)?;
        let start = outer_distance(outer, state.curve(side))?;
        let slack = self.budget - start;
        let target = start + slack / Rational::from_integer(self.twists_left.max(1) as i128);
        let marked: Vec<Word> = outer.test_set.iter().map(|c| state.marking().apply(c.representative())).collect();
        let mut best = None;
        for k in twist_grid(self.config.k_max) {
            let tau = self.side(side).twist_power(self.rank(), k);
            let values: Vec<u64> =
                marked.iter().map(|w| base.translation_length_word(&psi.apply(&tau.apply(w))) as u64).collect();
            let Ok(d) = projective_distance_to(&values, &outer.center) else { continue };
            best = Some(best.map_or(d, |b: Rational| b.min(d)));
            if d > target {
                continue;
            }
            let candidate = state.remark(psi.compose(&tau).compose(state.marking()))?;
            if accept(&candidate)? {
                self.twists_left = self.twists_left.saturating_sub(1);
                return Ok(Some((k, candidate)));
            }
        }
        self.last_miss = best.map(|b| (b, target));
        Ok(None)
    }

    fn miss(&self) -> String {
        match self.last_miss {
            Some((best, target)) => format!(" (closest {} against target {})", fmt_rational(&best), fmt_rational(&target)),
            None => String::new(),
        }
    }
}

/// Every power up to 32, then a geometric grid with ratio 5/4 up to `k_max`.
fn twist_grid(k_max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=k_max.min(32)).collect();
    let mut k = 32;
    while k < k_max {
        k = (k * 5 / 4).min(k_max);
        out.push(k);
    }
    out
}

fn outer_distance(outer: &NeighborhoodSpec, c: &Curve) -> Result<Rational> {
    outer.distance_to(c)
}

/// Total number of intersection components of the factors with the vertex group of `curve`,
/// computed in base coordinates as `m(F) ∩ V_base`.
fn freeness_components(curve: &Curve, factors: &[FactorSpec]) -> usize {
    let vertex = SubgroupGraph::fold(curve.rank(), &curve.base_vertex_generators());
    factors
        .iter()
        .map(|f| {
            let image: Vec<Word> = f.generators.iter().map(|g| curve.marking().apply(g)).collect();
            intersect_conjugates(&SubgroupGraph::fold(curve.rank(), &image), &vertex).components.len()
        })
        .sum()
}

/// True if some vertex of the graph carries a loop for each letter, i.e. the
/// subgroup contains a conjugate of the free factor on those letters.
fn contains_conjugate_of_letters(g: &SubgroupGraph, letters: &[usize]) -> bool {
    (0..g.vertex_count()).any(|v| letters.iter().all(|&l| g.target(v, Gen::pos(l)) == Some(v)))
}

fn stage_error(k: usize, reason: impl Into<String>) -> Error {
    Error::Stage { stage: k, reason: reason.into() }
}

/// Forces `F` to act freely on one side's curve by moves that fix the other side.
///
/// Step 0 breaks a full copy of the side's sub-basis inside `F`. Then anchor
/// powers `r` (the partner's stable letter picks up `stableʳ` on the left) and
/// expansion powers `p` are searched jointly, by increasing `r + p`, until
/// every intersection component leaves the sub-basis and the intersection is
/// in fact empty; a twist then returns the curve to its neighborhood.
fn arational_side(frame: &mut StageFrame, state: StageState, f: &FactorSpec, side_ix: usize) -> Result<StepOutcome> {
    let rank = frame.rank();
    let side = frame.side(side_ix).clone();
    let k = state.k + 1;
    let vertex = SubgroupGraph::fold(rank, &frame.base_curve(side_ix)?.base_vertex_generators());
    let current: Vec<Word> = f.generators.iter().map(|g| state.marking().apply(g)).collect();
    let letters = side.factor_letters();
    let mut factors = state.processed_factors.clone();
    factors.push(f.clone());

    let fg = SubgroupGraph::fold(rank, &current);
    let mut entry = Automorphism::identity(rank);
    if contains_conjugate_of_letters(&fg, &letters) {
        let eps = [side.partner_free[0].clone(), side.partner_extension.clone()]
            .into_iter()
            .find(|e| intersect_conjugates(&fg, &SubgroupGraph::fold(rank, std::slice::from_ref(e))).is_empty())
            .ok_or_else(|| stage_error(k, "factor meets both candidate multipliers of the entry move"))?;
        entry = Automorphism::right_multiply(rank, side.core[0], &eps, "entry")?;
    }

    let phi = frame.expansion.automorphism(rank, &letters)?;
    let own = Word::letter(side.stable);
    for total in 1..=EXPANSION_POWER_MAX + ANCHOR_POWER_MAX {
        for r in 0..=total.min(ANCHOR_POWER_MAX) {
            let p = total - r;
            if p == 0 || p > EXPANSION_POWER_MAX {
                continue;
            }
            let anchor = Automorphism::multiply(rank, side.partner_stable, &own.pow(r as i64), &Word::identity(), "anchor")?;
            let psi = phi.pow(p).compose(&anchor).compose(&entry);
            let image: Vec<Word> = current.iter().map(|g| psi.apply(g)).collect();
            let report = intersect_conjugates(&SubgroupGraph::fold(rank, &image), &vertex);
            if !report.is_empty() {
                continue;
            }
            let moved = state.remark(psi.compose(state.marking()))?;
            if freeness_components(moved.curve(side_ix), &factors) != 0 {
                continue;
            }
            let hit = frame.twist_search(&state, side_ix, &psi, |c| Ok(freeness_components(c.curve(side_ix), &factors) == 0))?;
            if let Some((kt, out)) = hit {
                return Ok(StepOutcome { state: out, twist_powers: vec![kt] });
            }
        }
    }
    Err(stage_error(k, format!("no anchor and expansion powers free the factor on side {side_ix}{}", frame.miss())))
}

/// Runs the free-action step for both sides.
fn force_arational(frame: &mut StageFrame, state: StageState, f: &FactorSpec) -> Result<StepOutcome> {
    let a = arational_side(frame, state, f, 1)?;
    let b = arational_side(frame, a.state, f, 2)?;
    let mut state = b.state;
    state.processed_factors.push(f.clone());
    Ok(StepOutcome { state, twist_powers: [a.twist_powers, b.twist_powers].concat() })
}

/// Widths at scales `1..=n` of one curve, failing fast.
fn widths_hold(curve: &Curve, n: usize, tol: Rational) -> Result<bool> {
    if stabilized_edge_scale(curve) <= n {
        return Ok(false);
    }
    for scale in 1..=n {
        match min_nonannular_width(&decompose(curve, scale)?) {
            Some(w) if w > tol => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

fn random_partner_word(side: &Side, len: usize, rng: &mut ChaCha8Rng) -> Result<Word> {
    let abstract_word = random_word_with(&(0..side.partner_free.len()).collect::<Vec<_>>(), len, rng)?;
    let mut out = Word::identity();
    for g in abstract_word.gens() {
        let piece = &side.partner_free[g.index()];
        out = out.mul(&if g.is_inverse() { piece.inverse() } else { piece.clone() });
    }
    Ok(out)
}

/// `t ↦ t·u` with `u` random in the partner's vertex group, then an expansion
/// power, then a twist back; accepted once the moved curve keeps a
/// non-annular family at scales `1..=n` and every processed factor stays free.
fn nongeometric_side(frame: &mut StageFrame, state: StageState, n: usize, side_ix: usize) -> Result<StepOutcome> {
    let rank = frame.rank();
    let side = frame.side(side_ix).clone();
    let k = state.k + 1;
    let tol = frame.config.tol;
    let phi = frame.expansion.automorphism(rank, &side.factor_letters())?;
    let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
    for _ in 0..U_ATTEMPTS {
        let u = random_partner_word(&side, frame.config.random_u_len, &mut rng)?;
        let mut psi = Automorphism::right_multiply(rank, side.stable, &u, "stretch")?;
        for _ in 1..=NONGEOMETRIC_POWER_MAX {
            psi = phi.compose(&psi);
            let factors = &state.processed_factors;
            let hit = frame.twist_search(&state, side_ix, &psi, |c| {
                let curve = c.curve(side_ix);
                Ok(freeness_components(curve, factors) == 0 && widths_hold(curve, n, tol)?)
            })?;
            if let Some((kt, mut out)) = hit {
                out.rng_seed = rng.gen();
                return Ok(StepOutcome { state: out, twist_powers: vec![kt] });
            }
        }
    }
    Err(stage_error(k, format!("no stretched curve on side {side_ix} certifies widths at scale {n}")))
}

/// Runs the non-geometric step on `T`, then repeats it on `T′`.
fn force_nongeometric(frame: &mut StageFrame, mut state: StageState, n: usize) -> Result<StepOutcome> {
    let mut powers = Vec::new();
    for side in [1, 2] {
        let o = nongeometric_side(frame, state, n, side)?;
        state = o.state;
        powers.extend(o.twist_powers);
    }
    Ok(StepOutcome { state, twist_powers: powers })
}

/// Twist searches per stage: one per side in each of the two steps.
const TWISTS_PER_STAGE: usize = 4;

fn frame_for<'a>(config: &'a Config, expansion: &'a dyn ExpansionStrategy, state: &StageState) -> Result<StageFrame<'a>> {
    let k = state.k + 1;
    Ok(StageFrame {
        config,
        expansion,
        sides: Side::both(config.rank, &config.edge_word()?),
        outer: [state.u.clone(), state.u2.clone()],
        budget: config.radius(k - 1) - config.radius(k),
        twists_left: TWISTS_PER_STAGE,
        last_miss: None,
    })
}

/// Free-action step on its own: both sides, against the state's current neighborhoods.
pub fn force_arational_step(
    config: &Config,
    expansion: &dyn ExpansionStrategy,
    state: StageState,
    f: &FactorSpec,
) -> Result<StepOutcome> {
    let mut frame = frame_for(config, expansion, &state)?;
    force_arational(&mut frame, state, f)
}

/// Non-geometric step on its own at scale `n`.
pub fn force_nongeometric_step(
    config: &Config,
    expansion: &dyn ExpansionStrategy,
    state: StageState,
    n: usize,
) -> Result<StepOutcome> {
    let mut frame = frame_for(config, expansion, &state)?;
    force_nongeometric(&mut frame, state, n)
}

/// Assembles the certificate of a finished stage and shrinks the neighborhoods.
fn certify(config: &Config, prev: &StageState, mut state: StageState, f: &FactorSpec, twist_powers: Vec<usize>) -> Result<StageState> {
    let k = prev.k + 1;
    let components = freeness_components(&state.t, &state.processed_factors) + freeness_components(&state.t2, &state.processed_factors);
    let residuals = disjointness_certificate(&state.t, &state.t2, &state.y, &config.stage_test_set(k))?.residuals;
    let edges = [state.t.edge_element(), state.t2.edge_element()];
    let eta_zero = edges
        .iter()
        .all(|e| [&state.t, &state.t2].iter().all(|c| counting_current_intersection(c, &ConjClass::new(e)) == 0));
    let mut widths = Vec::new();
    for scale in 1..=k {
        let mut least: Option<Rational> = None;
        let mut missing = false;
        for c in [&state.t, &state.t2] {
            match min_nonannular_width(&decompose(c, scale)?) {
                Some(w) if w > config.tol => least = Some(least.map_or(w, |l| l.min(w))),
                _ => missing = true,
            }
        }
        widths.push(WidthEntry { scale, width: if missing { None } else { least.map(|w| fmt_rational(&w)) } });
    }
    let tests = config.neighborhood_test_set();
    let r = config.radius(k);
    state.u = NeighborhoodSpec::around(&state.t, &tests, r)?;
    state.u2 = NeighborhoodSpec::around(&state.t2, &tests, r)?;
    let n1 = state.u.nested_in(&prev.u)?;
    let n2 = state.u2.nested_in(&prev.u2)?;
    let worst = if n1.distance >= n2.distance { n1 } else { n2 };
    let cert = Certificate {
        k,
        factor: FactorSummary { generators: f.generators.iter().map(|g| config.basis().map(|b| b.format(g))).collect::<Result<_>>()? },
        freeness: FreenessSummary { components, pass: components == 0 },
        disjoint_residuals: residuals,
        eta_zero,
        widths,
        nesting: NestingSummary {
            distance: fmt_rational(&worst.distance),
            r_new: fmt_rational(&worst.r_new),
            r_old: fmt_rational(&worst.r_old),
            pass: n1.pass && n2.pass,
        },
        twist_powers,
    };
    state.k = k;
    state.certificates.push(cert);
    Ok(state)
}

/// Drives stages `state.k + 1 ..= depth_K`, calling `on_stage` after each.
pub struct Pipeline {
    pub config: Config,
    pub expansions: ExpansionRegistry,
    pub expansion: String,
    pub factors: Vec<FactorSpec>,
}

impl Pipeline {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let factors = enumerate_factors(config.rank, config.factor_budget, &MoveRegistry::default());
        Ok(Pipeline { config, expansions: ExpansionRegistry::default(), expansion: ExpansionRegistry::DEFAULT.into(), factors })
    }

    /// Factor processed at stage `k` (1-based), cycling through the enumeration.
    pub fn factor_for(&self, k: usize) -> &FactorSpec {
        &self.factors[(k - 1) % self.factors.len()]
    }

    pub fn run_stage(&self, state: StageState) -> Result<StageState> {
        let expansion = self.expansions.get(&self.expansion)?;
        let k = state.k + 1;
        let f = self.factor_for(k).clone();
        let prev = state.clone();
        let mut frame = frame_for(&self.config, expansion, &state)?;
        let a = force_arational(&mut frame, state, &f)?;
        let b = force_nongeometric(&mut frame, a.state, k)?;
        let powers = [a.twist_powers, b.twist_powers].concat();
        certify(&self.config, &prev, b.state, &f, powers)
    }

    pub fn run_from(&self, mut state: StageState, mut on_stage: impl FnMut(&StageState) -> Result<()>) -> Result<StageState> {
        while state.k < self.config.depth_k {
            state = self.run_stage(state)?;
            on_stage(&state)?;
        }
        Ok(state)
    }
}

/// Runs the whole construction from the standard pair.
pub fn run_construction(config: &Config) -> Result<Vec<Certificate>> {
    let p = Pipeline::new(config.clone())?;
    Ok(p.run_from(StageState::initial(config)?, |_| Ok(()))?.certificates)
}

/// Runs from `state` and reports whatever was certified, recording a stage
/// failure instead of discarding the earlier stages.
pub fn run_report(pipeline: &Pipeline, state: StageState, on_stage: impl FnMut(&StageState) -> Result<()>) -> Report {
    let mut certs = state.certificates.clone();
    let mut hook = on_stage;
    let outcome = pipeline.run_from(state, |s| {
        certs = s.certificates.clone();
        hook(s)
    });
    let mut report = emit_report(&pipeline.config, &certs);
    if let Err(e) = outcome {
        report.failure = Some(e.to_string());
    }
    report
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub schema: String,
    pub config: Config,
    pub stages: Vec<Certificate>,
    /// `r_0, r_1, …, r_K` as exact rationals.
    pub radius_trace: Vec<String>,
    pub notes: Vec<String>,
    /// Why the run stopped before `depth_K`, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub fn emit_report(config: &Config, certs: &[Certificate]) -> Report {
    Report {
        schema: SCHEMA.into(),
        config: config.clone(),
        stages: certs.to_vec(),
        radius_trace: (0..=config.depth_k).map(|k| fmt_rational(&config.radius(k))).collect(),
        notes: vec![
            format!("factors enumerated up to {} elementary moves; the full enumeration is infinite", config.factor_budget),
            "freeness is certified at the neighborhood centers only; the claim for every curve in the ball is not tested".into(),
            "neighborhoods are balls in a finite test metric, so compactness is automatic".into(),
        ],
        failure: None,
    }
}

impl Report {
    pub fn pass(&self) -> bool {
        self.failure.is_none() && self.stages.len() == self.config.depth_k && self.stages.iter().all(Certificate::pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
