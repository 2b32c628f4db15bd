//! Degree distributions, user classes and scenario configuration.
//!
//! A degree distribution is the probability mass function a user applies
//! when choosing how many replicas of its packet to send. It is stored
//! densely, indexed by degree `l = 1..=d`, and viewed as the polynomial
//! `Λ(x) = Σ Λ_l x^l`.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Deserializer;
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ Λ_l = 1` and `Σ α_k = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Probability mass function over repetition degrees.
#[derive(Clone, PartialEq)]
pub struct DegreeDistribution {
    // probs[l - 1] = Λ_l; no trailing zeros.
    probs: Vec<f64>,
}

impl DegreeDistribution {
    /// Builds a distribution from `probs[l - 1] = Λ_l`.
    ///
    /// Inputs that are negative, non-finite or do not sum to one within
    /// [`NORMALIZATION_TOL`] are rejected; nothing is renormalized.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("probability {p} is negative or not finite")));
        }
        while probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no degree has positive mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    /// Builds a distribution from `(degree, probability)` pairs. Repeated
    /// degrees accumulate.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let d = pairs.iter().map(|&(l, _)| l).max().unwrap_or(0);
        let mut probs = vec![0.0; d];
        for &(l, p) in pairs {
            if l == 0 {
                return Err(Error::InvalidDistribution("degree 0 is not allowed".into()));
            }
            probs[l - 1] += p;
        }
        Self::new(probs)
    }

    /// All users pick degree `l`.
    pub fn monomial(l: usize) -> Result<Self> {
        Self::from_pairs(&[(l, 1.0)])
    }

    /// Largest degree with positive probability.
    pub fn max_degree(&self) -> usize {
        self.probs.len()
    }

    /// Smallest degree with positive probability.
    pub fn min_degree(&self) -> usize {
        self.probs.iter().position(|&p| p > 0.0).map_or(0, |i| i + 1)
    }

    /// `Λ_l`, zero for degrees outside the support.
    pub fn prob(&self, l: usize) -> f64 {
        if l == 0 {
            return 0.0;
        }
        self.probs.get(l - 1).copied().unwrap_or(0.0)
    }

    /// Dense view, `probs()[l - 1] = Λ_l`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Iterates `(l, Λ_l)` over degrees with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, &p)| (i + 1, p))
    }

    /// `Λ(x) = Σ Λ_l x^l` for `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// `Λ'(x) = Σ l Λ_l x^(l-1)` for `x ∈ [0, 1]`.
    pub fn eval_derivative(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.eval_derivative_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        // Horner from the top degree down.
        let mut acc = 0.0;
        for &p in self.probs.iter().rev() {
            acc = (acc + p) * x;
        }
        acc
    }

    pub(crate) fn eval_derivative_unchecked(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate().rev() {
            acc = acc * x + (i + 1) as f64 * p;
        }
        acc
    }

    /// Average number of replicas per user, `Λ'(1)`.
    pub fn average_degree(&self) -> f64 {
        self.eval_derivative_unchecked(1.0)
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(x))
    }
}

impl fmt::Debug for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.support()).finish()
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (l, p) in self.support() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{p} x^{l}")?;
        }
        Ok(())
    }
}

// Serialized as {"2": p2, "3": p3, ...}; keys are decimal degrees.
impl Serialize for DegreeDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        for (l, p) in self.support() {
            map.serialize_entry(&l.to_string(), &p)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for DegreeDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(deserializer)?;
        let mut pairs = Vec::with_capacity(raw.len());
        for (key, p) in raw {
            let l: usize = key
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("degree key {key:?} is not an integer")))?;
            pairs.push((l, p));
        }
        DegreeDistribution::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}

/// One user class: membership probability, degree distribution and an
/// optional target packet loss rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_plr: Option<f64>,
    pub dist: DegreeDistribution,
}

impl ClassSpec {
    pub fn new(alpha: f64, dist: DegreeDistribution) -> Self {
        Self { alpha, target_plr: None, dist }
    }

    pub fn with_target(mut self, target_plr: f64) -> Self {
        self.target_plr = Some(target_plr);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("class alpha {} must lie in (0, 1]", self.alpha)));
        }
        if let Some(t) = self.target_plr {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidConfig(format!("target PLR {t} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// How users are split into classes within a frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassAssignment {
    /// Each user draws its class independently from `α`.
    #[default]
    Stochastic,
    /// Exactly `round(α_k m)` users per class, largest-remainder corrected.
    FixedFraction,
}

/// Frame length, load and user classes of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub g: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub class_assignment: ClassAssignment,
    pub classes: Vec<ClassSpec>,
}

impl ScenarioConfig {
    pub fn new(n: usize, g: f64, classes: Vec<ClassSpec>) -> Self {
        Self { n, g, seed: 0, class_assignment: ClassAssignment::Stochastic, classes }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_assignment(mut self, assignment: ClassAssignment) -> Self {
        self.class_assignment = assignment;
        self
    }

    /// Same scenario at another load.
    pub fn at_load(&self, g: f64) -> Self {
        Self { g, ..self.clone() }
    }

    /// Number of users per frame, `round(g n)` with ties away from zero.
    pub fn m(&self) -> usize {
        users_for_load(self.g, self.n)
    }

    /// Realized load `m / n`.
    pub fn realized_load(&self) -> f64 {
        self.m() as f64 / self.n as f64
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.alpha).collect()
    }

    pub fn average_distribution(&self) -> Result<DegreeDistribution> {
        average_distribution(&self.classes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("frame length n must be positive".into()));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::InvalidConfig(format!("load g = {} must be positive", self.g)));
        }
        if self.classes.is_empty() {
            return Err(Error::InvalidConfig("at least one class is required".into()));
        }
        for c in &self.classes {
            c.validate()?;
            if c.dist.max_degree() > self.n {
                return Err(Error::InvalidConfig(format!(
                    "maximum degree {} exceeds frame length {}",
                    c.dist.max_degree(),
                    self.n
                )));
            }
        }
        check_alpha_sum(&self.classes)?;
        if self.m() < 1 {
            return Err(Error::InvalidConfig(format!(
                "round(g n) = round({} * {}) must be at least 1",
                self.g, self.n
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn users_for_load(g: f64, n: usize) -> usize {
    (g * n as f64).round() as usize
}

fn check_alpha_sum(classes: &[ClassSpec]) -> Result<()> {
    let total: f64 = classes.iter().map(|c| c.alpha).sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidConfig(format!("class alphas sum to {total}, expected 1")));
    }
    Ok(())
}

/// The α-weighted mixture `Σ α_k Λ^(k)(x)` of the class distributions.
pub fn average_distribution(classes: &[ClassSpec]) -> Result<DegreeDistribution> {
    check_alpha_sum(classes)?;
    let d = classes.iter().map(|c| c.dist.max_degree()).max().unwrap_or(0);
    let mut probs = vec![0.0; d];
    for c in classes {
        for (l, p) in c.dist.support() {
            probs[l - 1] += c.alpha * p;
        }
    }
    // α and Λ each sum to one within tolerance; the product can drift by
    // a few ulps more, so the mixture is renormalized here only.
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    DegreeDistribution::new(probs)
}
