//! One-dimensional environments with bounded jumps.
//!
//! A [`JumpLaw`] is a probability vector over the offsets
//! `{-B, ..., -1, 1, ..., B}`; offset 0 has no slot. An [`Environment`]
//! assigns a law to every site, either the same law everywhere, a periodic
//! pattern, or an explicit finite window (typically an iid sample).
//!
//! Constructors only enforce structure (shapes, finiteness, signs). Whether
//! the laws are normalized and uniformly elliptic is a question for
//! [`Environment::validate`], which reports every violation instead of
//! stopping at the first one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::CounterRng;

/// Tolerance on `sum_z p(z) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("jump bound must be positive")]
    ZeroBound,
    #[error("offset {offset} is outside {{-{bound},...,-1,1,...,{bound}}}")]
    BadOffset { offset: i64, bound: usize },
    #[error("probability for offset {offset} is not a finite nonnegative number ({value})")]
    BadProbability { offset: i64, value: f64 },
    #[error("expected {expected} probabilities, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("laws disagree on the jump bound ({found} vs {expected})")]
    MixedBounds { expected: usize, found: usize },
    #[error("periodic environment needs at least one law")]
    EmptyPeriod,
    #[error("sampled window [{lo}, {hi}] must satisfy lo < 0 < hi")]
    BadWindow { lo: i64, hi: i64 },
    #[error("ellipticity constant must be in (0, 1/2], got {0}")]
    BadDelta(f64),
    #[error("site {x} is outside the sampled window [{lo}, {hi}]; widen the window")]
    WindowExhausted { x: i64, lo: i64, hi: i64 },
    #[error("iid site law specification has no atoms")]
    EmptySupport,
    #[error("atom weights must be finite, nonnegative and not all zero")]
    BadWeights,
    #[error("environment is invalid: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("environment spec: {0}")]
    Spec(String),
}

/// All offsets `-B..=-1, 1..=B` in storage order.
pub fn offsets(bound: usize) -> impl Iterator<Item = i64> + Clone {
    let b = bound as i64;
    (-b..=-1).chain(1..=b)
}

/// Storage slot of offset `z` (which must be nonzero with `|z| <= bound`).
#[inline]
pub fn offset_index(bound: usize, z: i64) -> usize {
    debug_assert!(z != 0 && z.unsigned_abs() as usize <= bound);
    if z < 0 {
        (z + bound as i64) as usize
    } else {
        (z + bound as i64 - 1) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpLaw {
    bound: usize,
    probs: Vec<f64>,
}

impl JumpLaw {
    /// Builds a law from `(offset, probability)` pairs; missing offsets get 0.
    pub fn new(bound: usize, pairs: &[(i64, f64)]) -> Result<Self, EnvError> {
        if bound == 0 {
            return Err(EnvError::ZeroBound);
        }
        let mut probs = vec![0.0; 2 * bound];
        for &(z, p) in pairs {
            if z == 0 || z.unsigned_abs() as usize > bound {
                return Err(EnvError::BadOffset { offset: z, bound });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(EnvError::BadProbability { offset: z, value: p });
            }
            probs[offset_index(bound, z)] += p;
        }
        Ok(Self { bound, probs })
    }

    /// Builds a law from a vector in storage order (see [`offsets`]).
    pub fn from_probs(bound: usize, probs: Vec<f64>) -> Result<Self, EnvError> {
        if bound == 0 {
            return Err(EnvError::ZeroBound);
        }
        if probs.len() != 2 * bound {
            return Err(EnvError::WrongLength { expected: 2 * bound, got: probs.len() });
        }
        for (z, &p) in offsets(bound).zip(&probs) {
            if !p.is_finite() || p < 0.0 {
                return Err(EnvError::BadProbability { offset: z, value: p });
            }
        }
        Ok(Self { bound, probs })
    }

    /// Nearest-neighbor law with `p(+1) = p_right`.
    pub fn nearest_neighbor(p_right: f64) -> Result<Self, EnvError> {
        Self::new(1, &[(-1, 1.0 - p_right), (1, p_right)])
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    /// Probability of offset `z`; zero for `z = 0` or `|z| > B`.
    pub fn prob(&self, z: i64) -> f64 {
        if z == 0 || z.unsigned_abs() as usize > self.bound {
            0.0
        } else {
            self.probs[offset_index(self.bound, z)]
        }
    }

    /// Probabilities in storage order.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        offsets(self.bound).zip(self.probs.iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(z, p)| z as f64 * p).sum()
    }

    /// The law of `-Z`.
    pub fn reflected(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.reverse();
        Self { bound: self.bound, probs }
    }

    /// The same law viewed with a larger jump bound.
    pub fn widened(&self, bound: usize) -> Self {
        assert!(bound >= self.bound);
        let pairs: Vec<(i64, f64)> = self.iter().collect();
        Self::new(bound, &pairs).expect("widening keeps offsets valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    Homogeneous(JumpLaw),
    Periodic(Vec<JumpLaw>),
    /// Laws for sites `x_lo, x_lo + 1, ..., x_lo + laws.len() - 1`.
    SampledWindow {
        x_lo: i64,
        laws: Vec<JumpLaw>,
        seed: u64,
    },
}

/// A site-indexed field of jump laws together with its declared ellipticity
/// constant `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    kind: EnvKind,
    delta: f64,
    bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Normalization { site: i64, sum: f64 },
    Ellipticity { site: i64, offset: i64, prob: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvDiagnostics {
    pub min_plus_one_prob: f64,
    pub min_minus_one_prob: f64,
    /// Largest `|log p(z)|` over sites with `p(z) > 0`, per offset in storage
    /// order; zero-probability entries are skipped.
    pub max_abs_log_prob: Vec<f64>,
    pub normalization_error: f64,
    pub violations: Vec<Violation>,
}

impl EnvDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_bounds(laws: &[JumpLaw]) -> Result<usize, EnvError> {
    let first = laws.first().ok_or(EnvError::EmptyPeriod)?;
    let bound = first.bound();
    if let Some(bad) = laws.iter().find(|l| l.bound() != bound) {
        return Err(EnvError::MixedBounds { expected: bound, found: bad.bound() });
    }
    Ok(bound)
}

fn check_delta(delta: f64) -> Result<(), EnvError> {
    if delta.is_finite() && delta > 0.0 && delta <= 0.5 {
        Ok(())
    } else {
        Err(EnvError::BadDelta(delta))
    }
}

impl Environment {
    pub fn homogeneous(law: JumpLaw, delta: f64) -> Result<Self, EnvError> {
        check_delta(delta)?;
        let bound = law.bound();
        Ok(Self { kind: EnvKind::Homogeneous(law), delta, bound })
    }

    pub fn periodic(laws: Vec<JumpLaw>, delta: f64) -> Result<Self, EnvError> {
        check_delta(delta)?;
        let bound = check_bounds(&laws)?;
        Ok(Self { kind: EnvKind::Periodic(laws), delta, bound })
    }

    pub fn sampled_window(x_lo: i64, laws: Vec<JumpLaw>, seed: u64, delta: f64) -> Result<Self, EnvError> {
        check_delta(delta)?;
        let bound = check_bounds(&laws)?;
        let x_hi = x_lo + laws.len() as i64 - 1;
        if !(x_lo < 0 && 0 < x_hi) {
            return Err(EnvError::BadWindow { lo: x_lo, hi: x_hi });
        }
        Ok(Self { kind: EnvKind::SampledWindow { x_lo, laws, seed }, delta, bound })
    }

    /// Draws an independent law per site in `[x_lo, x_hi]` from the finitely
    /// supported distribution `atoms = [(weight, law), ...]`.
    ///
    /// Site `x` uses counter `x - x_lo + 1` of stream 0 of `seed`, so the
    /// draw at a site does not depend on the window size.
    pub fn sample_iid(atoms: &[(f64, JumpLaw)], x_lo: i64, x_hi: i64, seed: u64, delta: f64) -> Result<Self, EnvError> {
        if atoms.is_empty() {
            return Err(EnvError::EmptySupport);
        }
        if !(x_lo < 0 && 0 < x_hi) {
            return Err(EnvError::BadWindow { lo: x_lo, hi: x_hi });
        }
        let total: f64 = atoms.iter().map(|(w, _)| *w).sum();
        if atoms.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) || !(total > 0.0) {
            return Err(EnvError::BadWeights);
        }
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for (w, _) in atoms {
            acc += w / total;
            cumulative.push(acc);
        }
        let rng = CounterRng::new(seed, 0);
        let laws = (x_lo..=x_hi)
            .map(|x| {
                let u = rng.uniform_at((x - x_lo) as u64 + 1);
                let k = cumulative.iter().position(|&c| u < c).unwrap_or(atoms.len() - 1);
                atoms[k].1.clone()
            })
            .collect();
        Self::sampled_window(x_lo, laws, seed, delta)
    }

    /// Random periodic environment: each site law puts `delta` on each of
    /// `+-1` and spreads the remaining mass with random weights in `[0.2, 1]`
    /// over all offsets.
    pub fn random_periodic(period: usize, bound: usize, delta: f64, seed: u64) -> Result<Self, EnvError> {
        if bound == 0 {
            return Err(EnvError::ZeroBound);
        }
        check_delta(delta)?;
        let mut rng = CounterRng::new(seed, 0);
        let laws = (0..period)
            .map(|_| {
                let w: Vec<f64> = (0..2 * bound).map(|_| 0.2 + 0.8 * rng.uniform()).collect();
                let s: f64 = w.iter().sum();
                let free = 1.0 - 2.0 * delta;
                let probs = offsets(bound)
                    .zip(&w)
                    .map(|(z, wi)| free * wi / s + if z.abs() == 1 { delta } else { 0.0 })
                    .collect();
                JumpLaw::from_probs(bound, probs)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::periodic(laws, delta)
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    /// Period length for homogeneous (1) and periodic environments.
    pub fn period(&self) -> Option<usize> {
        match &self.kind {
            EnvKind::Homogeneous(_) => Some(1),
            EnvKind::Periodic(laws) => Some(laws.len()),
            EnvKind::SampledWindow { .. } => None,
        }
    }

    /// Inclusive site window of a sampled environment.
    pub fn window(&self) -> Option<(i64, i64)> {
        match &self.kind {
            EnvKind::SampledWindow { x_lo, laws, .. } => Some((*x_lo, *x_lo + laws.len() as i64 - 1)),
            _ => None,
        }
    }

    pub fn law_at(&self, x: i64) -> Result<&JumpLaw, EnvError> {
        match &self.kind {
            EnvKind::Homogeneous(law) => Ok(law),
            EnvKind::Periodic(laws) => Ok(&laws[x.rem_euclid(laws.len() as i64) as usize]),
            EnvKind::SampledWindow { x_lo, laws, .. } => {
                let i = x - x_lo;
                if i < 0 || i >= laws.len() as i64 {
                    Err(EnvError::WindowExhausted { x, lo: *x_lo, hi: *x_lo + laws.len() as i64 - 1 })
                } else {
                    Ok(&laws[i as usize])
                }
            }
        }
    }

    /// The environment seen by `-X`: `law'(x)(z) = law(-x)(-z)`.
    pub fn reflect(&self) -> Self {
        let kind = match &self.kind {
            EnvKind::Homogeneous(law) => EnvKind::Homogeneous(law.reflected()),
            EnvKind::Periodic(laws) => {
                let l = laws.len();
                EnvKind::Periodic((0..l).map(|i| laws[(l - i) % l].reflected()).collect())
            }
            EnvKind::SampledWindow { x_lo, laws, seed } => {
                let x_hi = *x_lo + laws.len() as i64 - 1;
                EnvKind::SampledWindow {
                    x_lo: -x_hi,
                    laws: laws.iter().rev().map(JumpLaw::reflected).collect(),
                    seed: *seed,
                }
            }
        };
        Self { kind, delta: self.delta, bound: self.bound }
    }

    /// Distinct sites to inspect: period classes, or every window site.
    fn sites(&self) -> Vec<(i64, &JumpLaw)> {
        match &self.kind {
            EnvKind::Homogeneous(law) => vec![(0, law)],
            EnvKind::Periodic(laws) => laws.iter().enumerate().map(|(i, l)| (i as i64, l)).collect(),
            EnvKind::SampledWindow { x_lo, laws, .. } => {
                laws.iter().enumerate().map(|(i, l)| (x_lo + i as i64, l)).collect()
            }
        }
    }

    pub fn validate(&self) -> EnvDiagnostics {
        let mut diag = EnvDiagnostics {
            min_plus_one_prob: f64::INFINITY,
            min_minus_one_prob: f64::INFINITY,
            max_abs_log_prob: vec![0.0; 2 * self.bound],
            normalization_error: 0.0,
            violations: Vec::new(),
        };
        for (site, law) in self.sites() {
            let sum = law.total();
            let err = (sum - 1.0).abs();
            diag.normalization_error = diag.normalization_error.max(err);
            if err > NORMALIZATION_TOL {
                diag.violations.push(Violation::Normalization { site, sum });
            }
            let (pp, pm) = (law.prob(1), law.prob(-1));
            diag.min_plus_one_prob = diag.min_plus_one_prob.min(pp);
            diag.min_minus_one_prob = diag.min_minus_one_prob.min(pm);
            for (z, p) in [(1, pp), (-1, pm)] {
                if p < self.delta - NORMALIZATION_TOL {
                    diag.violations.push(Violation::Ellipticity { site, offset: z, prob: p, delta: self.delta });
                }
            }
            for (slot, &p) in law.probs().iter().enumerate() {
                if p > 0.0 {
                    diag.max_abs_log_prob[slot] = diag.max_abs_log_prob[slot].max(p.ln().abs());
                }
            }
        }
        diag
    }

    /// `Err(Invalid)` unless [`validate`](Self::validate) is clean.
    pub fn ensure_valid(&self) -> Result<(), EnvError> {
        let diag = self.validate();
        if diag.is_valid() {
            Ok(())
        } else {
            Err(EnvError::Invalid(diag.violations))
        }
    }

    /// Average of `f(law)` over one period (exact) or over the window.
    pub fn site_average(&self, f: impl Fn(&JumpLaw) -> f64) -> f64 {
        let sites = self.sites();
        sites.iter().map(|(_, l)| f(l)).sum::<f64>() / sites.len() as f64
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let spec: EnvSpec = serde_json::from_str(text).map_err(|e| EnvError::Spec(e.to_string()))?;
        spec.build()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvType {
    Periodic,
    Homogeneous,
    Iid,
}

/// A law as serialized: offsets as string keys, missing offsets mean 0.
pub type LawSpec = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub weight: f64,
    pub law: LawSpec,
}

/// Serialized environment, e.g.
/// `{"type":"periodic","B":1,"delta":0.1,"laws":[{"-1":0.2,"1":0.8},{"-1":0.6,"1":0.4}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    #[serde(rename = "type")]
    pub kind: EnvType,
    #[serde(rename = "B")]
    pub bound: usize,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub laws: Vec<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomSpec>>,
}

pub fn law_from_spec(bound: usize, spec: &LawSpec) -> Result<JumpLaw, EnvError> {
    let pairs = spec
        .iter()
        .map(|(k, &p)| {
            k.trim()
                .parse::<i64>()
                .map(|z| (z, p))
                .map_err(|_| EnvError::Spec(format!("offset key {k:?} is not an integer")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    JumpLaw::new(bound, &pairs)
}

pub fn law_to_spec(law: &JumpLaw) -> LawSpec {
    law.iter().filter(|(_, p)| *p != 0.0).map(|(z, p)| (z.to_string(), p)).collect()
}

impl EnvSpec {
    pub fn build(&self) -> Result<Environment, EnvError> {
        let laws =
            || -> Result<Vec<JumpLaw>, EnvError> { self.laws.iter().map(|l| law_from_spec(self.bound, l)).collect() };
        match self.kind {
            EnvType::Homogeneous => {
                let mut laws = laws()?;
                if laws.len() != 1 {
                    return Err(EnvError::Spec(format!(
                        "homogeneous environment needs exactly one law, got {}",
                        laws.len()
                    )));
                }
                Environment::homogeneous(laws.remove(0), self.delta)
            }
            EnvType::Periodic => Environment::periodic(laws()?, self.delta),
            EnvType::Iid => {
                let atoms = self
                    .atoms
                    .as_ref()
                    .ok_or_else(|| EnvError::Spec("iid environment needs \"atoms\"".into()))?
                    .iter()
                    .map(|a| Ok((a.weight, law_from_spec(self.bound, &a.law)?)))
                    .collect::<Result<Vec<_>, EnvError>>()?;
                let (lo, hi) = self.window.ok_or_else(|| EnvError::Spec("iid environment needs \"window\"".into()))?;
                let seed = self.seed.ok_or_else(|| EnvError::Spec("iid environment needs \"seed\"".into()))?;
                Environment::sample_iid(&atoms, lo, hi, seed, self.delta)
            }
        }
    }
}
