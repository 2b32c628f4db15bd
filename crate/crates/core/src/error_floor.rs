//! Error-floor approximation of the packet loss rate at finite frame length.
//!
//! For each catalog stopping set `S` the expected number of copies formed
//! by the `m` users on `n` slots is
//!
//! ```text
//! m!/(m-ν)! · c(S) · C(n, μ) · Π_j Λ_j^{v_j} / (v_j! C(n, j)^{v_j})
//! ```
//!
//! with `c(S)` the number of labeled realizations for fixed per-node
//! degrees. Weighting by `v_l(S) / (m Λ_l)` turns it into the probability
//! that a degree-l user is caught in a copy of `S`; summing over the
//! catalog gives `p_l`. Everything is evaluated in log space.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ClassSpec, DegreeDistribution};
use crate::stopping_set::StoppingSetCatalog;

fn ln_falling(top: usize, count: usize) -> f64 {
    // ln(top · (top-1) ··· (top-count+1))
    (0..count).map(|i| ((top - i) as f64).ln()).sum()
}

fn ln_factorial_small(k: usize) -> f64 {
    ln_falling(k, k)
}

fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_falling(n, k) - ln_factorial_small(k)
}

#[derive(Clone, Debug)]
struct Term {
    /// Everything except the Λ-dependent factors.
    ln_base: f64,
    /// (degree, v_j) for the degrees present in the set.
    degrees: Vec<(usize, usize)>,
}

/// Catalog specialised to a frame length and user count, ready to be
/// evaluated for many distributions.
#[derive(Clone, Debug)]
pub struct PreparedCatalog {
    n: usize,
    m: usize,
    terms: Vec<Term>,
}

impl PreparedCatalog {
    /// Sets that cannot fit (`ν > m` or `μ > n`) contribute nothing and are
    /// dropped here.
    pub fn new(catalog: &StoppingSetCatalog, n: usize, m: usize) -> Self {
        // Sets sharing a degree profile differ only in their constant factor,
        // so they are merged (log-sum-exp) into one term.
        let mut merged: BTreeMap<Vec<(usize, usize)>, f64> = BTreeMap::new();
        for s in catalog.sets.iter().filter(|s| s.nu() <= m && s.mu() <= n) {
            let degrees: Vec<(usize, usize)> =
                (1..=s.max_degree()).map(|j| (j, s.v_j(j))).filter(|&(_, k)| k > 0).collect();
            let mut ln_base =
                ln_falling(m - 1, s.nu() - 1) + (s.degree_labeled_count() as f64).ln() + ln_binomial(n, s.mu());
            for &(j, k) in &degrees {
                ln_base -= k as f64 * ln_binomial(n, j) + ln_factorial_small(k);
            }
            merged.entry(degrees).and_modify(|acc| *acc = ln_add(*acc, ln_base)).or_insert(ln_base);
        }
        let terms = merged.into_iter().map(|(degrees, ln_base)| Term { ln_base, degrees }).collect();
        Self { n, m, terms }
    }

    /// Number of distinct degree profiles left after merging.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Error-floor estimate of the probability that a degree-l user is not
    /// resolved. `avg` is the average distribution over all classes.
    pub fn plr_degree(&self, avg: &DegreeDistribution, l: usize) -> Result<f64> {
        let lambda_l = avg.prob(l);
        if lambda_l <= 0.0 {
            return Err(Error::UndefinedDegree(l));
        }
        let ln_lambda_l = lambda_l.ln();
        let mut total = 0.0;
        'sets: for term in &self.terms {
            let mut v_l = 0;
            let mut ln = term.ln_base - ln_lambda_l;
            for &(j, k) in &term.degrees {
                let p = avg.prob(j);
                if p <= 0.0 {
                    continue 'sets;
                }
                ln += k as f64 * p.ln();
                if j == l {
                    v_l = k;
                }
            }
            if v_l > 0 {
                total += v_l as f64 * ln.exp();
            }
        }
        Ok(total)
    }

    /// `p_l` for every degree in one pass over the catalog; entry `l - 1`
    /// is zero when `Λ_l = 0`.
    pub fn plr_by_degree(&self, avg: &DegreeDistribution) -> Vec<f64> {
        let probs = avg.probs();
        let mut out = vec![0.0; probs.len()];
        'sets: for term in &self.terms {
            let mut ln = term.ln_base;
            for &(j, k) in &term.degrees {
                let p = probs.get(j - 1).copied().unwrap_or(0.0);
                if p <= 0.0 {
                    continue 'sets;
                }
                ln += k as f64 * p.ln();
            }
            let weight = ln.exp();
            for &(j, k) in &term.degrees {
                out[j - 1] += k as f64 * weight / probs[j - 1];
            }
        }
        out
    }

    /// `p^(k) = Σ_l Λ^(k)_l p_l`, with `p_l` taken on the average
    /// distribution `avg` of all classes.
    pub fn plr_class_with(&self, avg: &DegreeDistribution, class: &ClassSpec) -> Result<f64> {
        class.dist.support().map(|(l, p)| Ok(p * self.plr_degree(avg, l)?)).sum()
    }

    /// Per-class PLR predictions for all classes.
    pub fn plr_classes(&self, classes: &[ClassSpec]) -> Result<Vec<f64>> {
        let avg = crate::model::average_distribution(classes)?;
        classes.iter().map(|c| self.plr_class_with(&avg, c)).collect()
    }
}

/// Error-floor estimate of `p_l` for `m` users on `n` slots.
pub fn plr_degree(catalog: &StoppingSetCatalog, avg: &DegreeDistribution, n: usize, m: usize, l: usize) -> Result<f64> {
    PreparedCatalog::new(catalog, n, m).plr_degree(avg, l)
}

/// Error-floor estimate of the PLR of class `k` (zero-based).
pub fn plr_class(catalog: &StoppingSetCatalog, classes: &[ClassSpec], n: usize, m: usize, k: usize) -> Result<f64> {
    let class = classes.get(k).ok_or_else(|| Error::InvalidConfig(format!("class index {k} out of range")))?;
    let avg = crate::model::average_distribution(classes)?;
    PreparedCatalog::new(catalog, n, m).plr_class_with(&avg, class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stopping_set::enumerate_stopping_sets;

    fn dist(pairs: &[(usize, f64)]) -> DegreeDistribution {
        DegreeDistribution::from_pairs(pairs).unwrap()
    }

    fn binom2(n: usize) -> f64 {
        (n * (n - 1) / 2) as f64
    }

    #[test]
    fn elementary_closed_form() {
        let cat = StoppingSetCatalog::elementary();
        let avg = dist(&[(2, 0.3), (3, 0.7)]);
        let p = plr_degree(&cat, &avg, 100, 50, 2).unwrap();
        let expected = 49.0 * 0.3 / 4950.0;
        assert!((p / expected - 1.0).abs() < 1e-12, "{p} vs {expected}");
        assert!((p - 2.970e-3).abs() < 1e-6);
    }

    #[test]
    fn sparse_limit_vanishes() {
        let cat = enumerate_stopping_sets(4, 4).unwrap();
        let avg = dist(&[(2, 1.0)]);
        let n = 1_000_000;
        let p = plr_degree(&cat, &avg, n, 5, 2).unwrap();
        let elementary = 4.0 / binom2(n);
        assert!(p >= elementary && p < elementary * (1.0 + 1e-4), "{p}");
    }

    #[test]
    fn one_pass_matches_per_degree() {
        let cat = enumerate_stopping_sets(4, 8).unwrap();
        let avg = dist(&[(2, 0.216), (3, 0.586), (8, 0.198)]);
        let prepared = PreparedCatalog::new(&cat, 100, 50);
        let all = prepared.plr_by_degree(&avg);
        for l in [2, 3, 8] {
            let single = prepared.plr_degree(&avg, l).unwrap();
            assert!((all[l - 1] - single).abs() <= 1e-12 * single, "l = {l}");
        }
        assert_eq!(all[3], 0.0);
    }

    #[test]
    fn undefined_degree() {
        let cat = StoppingSetCatalog::elementary();
        let avg = dist(&[(3, 1.0)]);
        assert!(matches!(plr_degree(&cat, &avg, 100, 50, 2), Err(Error::UndefinedDegree(2))));
    }

    #[test]
    fn single_class_collapse() {
        let cat = enumerate_stopping_sets(3, 3).unwrap();
        let d = dist(&[(2, 0.4), (3, 0.6)]);
        let classes = vec![ClassSpec::new(1.0, d.clone())];
        let direct = 0.4 * plr_degree(&cat, &d, 60, 30, 2).unwrap() + 0.6 * plr_degree(&cat, &d, 60, 30, 3).unwrap();
        let via_class = plr_class(&cat, &classes, 60, 30, 0).unwrap();
        assert!((direct - via_class).abs() <= 1e-15 * direct);
    }

    #[test]
    fn degree_eight_class_outside_small_catalog() {
        let cat = enumerate_stopping_sets(4, 3).unwrap();
        let classes = vec![ClassSpec::new(0.5, dist(&[(8, 1.0)])), ClassSpec::new(0.5, dist(&[(2, 0.5), (3, 0.5)]))];
        assert_eq!(plr_class(&cat, &classes, 100, 50, 0).unwrap(), 0.0);
        assert!(plr_class(&cat, &classes, 100, 50, 1).unwrap() > 0.0);
    }

    #[test]
    fn monotone_in_m_and_lambda() {
        let cat = enumerate_stopping_sets(4, 8).unwrap().restricted_to_degrees(&[2, 3, 8]);
        let base = dist(&[(2, 0.3), (3, 0.5), (8, 0.2)]);
        let mut prev = 0.0;
        for m in 10..60 {
            let p = plr_degree(&cat, &base, 100, m, 2).unwrap();
            assert!(p >= prev);
            prev = p;
        }
        // shifting mass into degree 3 raises p_2's contribution from mixed sets
        let more3 = dist(&[(2, 0.3), (3, 0.6), (8, 0.1)]);
        assert!(plr_degree(&cat, &more3, 100, 50, 2).unwrap() >= plr_degree(&cat, &base, 100, 50, 2).unwrap());
    }
}
