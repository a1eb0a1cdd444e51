//! Dehn twists, the right action of automorphisms on marked curves, and the
//! projective sup-metric on length vectors.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::automorphism::Automorphism;
use crate::error::{Error, Result};
use crate::splitting::{Curve, LengthVector};
use crate::word::{enumerate_classes, ConjClass, Word};

pub type Rational = Ratio<i128>;

/// Exact `p/q` string for reports.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::Input(format!("{s:?} is not a rational"));
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i128 = p.trim().parse().map_err(|_| bad())?;
        let q: i128 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(p, q));
    }
    if let Some((m, e)) = s.split_once(['e', 'E']) {
        let base = parse_rational(m)?;
        let e: i32 = e.parse().map_err(|_| bad())?;
        if e.unsigned_abs() > 30 {
            return Err(bad());
        }
        let p = Ratio::from_integer(10i128.pow(e.unsigned_abs()));
        return Ok(if e < 0 { base / p } else { base * p });
    }
    if let Some((int, frac)) = s.split_once('.') {
        let digits = frac.len() as u32;
        if digits > 30 {
            return Err(bad());
        }
        let scale = 10i128.pow(digits);
        let sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let ip: i128 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let fp: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        return Ok(Ratio::new(ip * scale + sign * fp, scale));
    }
    Ok(Ratio::from_integer(s.parse().map_err(|_| bad())?))
}

/// The Dehn twist of a curve about its own edge.
#[derive(Debug, Clone)]
pub struct DehnTwist {
    pub source: Curve,
    /// Edge element of the source curve.
    pub twistor: Word,
    pub automorphism: Automorphism,
}

/// For a base curve, `t ↦ t·w` with every other letter fixed. For a marked
/// curve with marking `m`, the automorphism is `m⁻¹ ∘ (t ↦ t·w) ∘ m`, which is
/// the map that fixes the marked curve's length function.
pub fn twist_of(t: &Curve) -> DehnTwist {
    let base = Automorphism::twist(t.rank(), t.stable_letter(), t.base_edge_word()).expect("edge word avoids the stable letter");
    let automorphism = if t.marking().is_identity() {
        base
    } else {
        t.marking().invert().compose(&base).compose(t.marking()).with_name("twist")
    };
    DehnTwist { source: t.clone(), twistor: t.edge_element(), automorphism }
}

/// Right action: `l_{act(T, α)}(g) = l_T(α(g))`.
pub fn act(t: &Curve, alpha: &Automorphism) -> Result<Curve> {
    if alpha.rank() != t.rank() {
        return Err(Error::BasisMismatch("automorphism rank differs from curve".into()));
    }
    Ok(t.with_marking(t.marking().compose(alpha)))
}

fn normalized(v: &[u64]) -> Result<Vec<Rational>> {
    let max = *v.iter().max().unwrap_or(&0);
    if max == 0 {
        return Err(Error::Input("length vector is zero on the test set".into()));
    }
    Ok(v.iter().map(|&x| Ratio::new(x as i128, max as i128)).collect())
}

pub fn projective_point(v: &LengthVector) -> Result<Vec<Rational>> {
    normalized(&v.values)
}

fn sup_distance(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or_else(Rational::zero)
}

/// Sup distance of the max-normalized vectors.
pub fn projective_distance(u: &LengthVector, v: &LengthVector) -> Result<Rational> {
    if u.test_set != v.test_set {
        return Err(Error::Input("length vectors on different test sets".into()));
    }
    Ok(sup_distance(&normalized(&u.values)?, &normalized(&v.values)?))
}

pub fn projective_distance_values(u: &[u64], v: &[u64]) -> Result<Rational> {
    Ok(sup_distance(&normalized(u)?, &normalized(v)?))
}

/// Distance from raw lengths to an already normalized point.
pub fn projective_distance_to(values: &[u64], point: &[Rational]) -> Result<Rational> {
    Ok(sup_distance(&normalized(values)?, point))
}

/// A sup-metric ball around a normalized length vector on a fixed test set.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSpec {
    pub test_set: Vec<ConjClass>,
    pub center: Vec<Rational>,
    pub radius: Rational,
}

impl NeighborhoodSpec {
    pub fn around(curve: &Curve, test_set: &[ConjClass], radius: Rational) -> Result<Self> {
        if radius < Rational::zero() {
            return Err(Error::Input("negative radius".into()));
        }
        let center = normalized(&curve.length_vector(test_set).values)?;
        Ok(NeighborhoodSpec { test_set: test_set.to_vec(), center, radius })
    }

    pub fn distance_to(&self, curve: &Curve) -> Result<Rational> {
        Ok(sup_distance(&normalized(&curve.length_vector(&self.test_set).values)?, &self.center))
    }

    pub fn contains(&self, curve: &Curve) -> Result<bool> {
        Ok(self.distance_to(curve)? <= self.radius)
    }

    /// Triangle rule: `d(c_new, c_old) + r_new ≤ r_old` puts this ball inside `outer`.
    pub fn nested_in(&self, outer: &NeighborhoodSpec) -> Result<Nesting> {
        if self.test_set != outer.test_set {
            return Err(Error::Input("nesting needs a common test set".into()));
        }
        let distance = sup_distance(&self.center, &outer.center);
        let pass = distance + self.radius <= outer.radius;
        Ok(Nesting { distance, r_new: self.radius, r_old: outer.radius, pass })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Nesting {
    pub distance: Rational,
    pub r_new: Rational,
    pub r_old: Rational,
    pub pass: bool,
}

/// Cyclically reduced classes up to rotation of length `≤ max_len`, subsampled to `cap` with a seeded shuffle
/// (shortlex order is kept among the survivors).
pub fn default_test_set(rank: usize, max_len: usize, cap: usize, seed: u64) -> Vec<ConjClass> {
    let all = enumerate_classes(rank, max_len);
    if all.len() <= cap {
        return all;
    }
    let mut idx: Vec<usize> = (0..all.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep: Vec<usize> = idx[..cap].to_vec();
    keep.sort_unstable();
    keep.into_iter().map(|i| all[i].clone()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRun {
    pub k_found: Option<usize>,
    /// `(k, distance)` for `k = 0..=k_max`, distances as exact strings.
    pub trace: Vec<(usize, String)>,
    #[serde(skip)]
    pub distances: Vec<Rational>,
}

/// Length vectors of `act(S, τᵏ)` for `k = 0..=k_max`, by iterating `τ` on test words.
fn twisted_vectors(s: &Curve, tau: &DehnTwist, test_set: &[ConjClass], k_max: usize) -> Vec<Vec<u64>> {
    let mut words: Vec<Word> = test_set.iter().map(|c| c.representative().clone()).collect();
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            for w in words.iter_mut() {
                *w = tau.automorphism.apply(w);
            }
        }
        out.push(words.iter().map(|w| s.translation_length_word(w) as u64).collect());
    }
    out
}

pub fn twist_converge(
    s: &Curve,
    tau: &DehnTwist,
    target: &Curve,
    test_set: &[ConjClass],
    k_max: usize,
    tol: Rational,
) -> Result<ConvergenceRun> {
    if s.translation_length_word(&tau.twistor) == 0 {
        return Err(Error::DoesNotIntersect);
    }
    let goal = target.length_vector(test_set).values;
    let goal = normalized(&goal)?;
    let mut distances = Vec::with_capacity(k_max + 1);
    for v in twisted_vectors(s, tau, test_set, k_max) {
        distances.push(sup_distance(&normalized(&v)?, &goal));
    }
    let mut k_found = None;
    for k in (0..=k_max).rev() {
        if distances[k] <= tol {
            k_found = Some(k);
        } else {
            break;
        }
    }
    let trace = distances.iter().enumerate().map(|(k, d)| (k, fmt_rational(d))).collect();
    Ok(ConvergenceRun { k_found, trace, distances })
}

/// Least `k ≤ k_max` with `act(S, τᵏ)` inside `U`; returns the power and the curve.
pub fn twist_into(s: &Curve, tau: &DehnTwist, u: &NeighborhoodSpec, k_max: usize) -> Result<(usize, Curve)> {
    if s.translation_length_word(&tau.twistor) == 0 {
        return Err(Error::DoesNotIntersect);
    }
    let mut last = None;
    for (k, v) in twisted_vectors(s, tau, &u.test_set, k_max).into_iter().enumerate() {
        let d = sup_distance(&normalized(&v)?, &u.center);
        if d <= u.radius {
            return Ok((k, act(s, &tau.automorphism.pow(k as u32))?));
        }
        last = Some(d);
    }
    Err(Error::Exhausted(format!(
        "no twist power ≤ {k_max} reaches radius {}; final distance {}",
        fmt_rational(&u.radius),
        last.map(|d| fmt_rational(&d)).unwrap_or_default()
    )))
}
