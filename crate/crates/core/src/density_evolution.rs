//! Asymptotic analysis of the frame graph as `n → ∞`.
//!
//! All classes share one erasure probability on the slot side, so the
//! threshold follows from the single recursion
//! `ξ ← 1 − exp(−g Λ'(ξ))` on the average distribution. The multi-edge
//! recursion below tracks each class separately and exists to check that
//! claim numerically.

use serde::{Deserialize, Serialize};

use crate::model::{ClassSpec, DegreeDistribution};

/// Iteration controls for the fixed-point recursions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeParams {
    pub max_iter: usize,
    /// Convergence is declared once ξ drops below this.
    pub eps: f64,
    /// A step that lowers ξ by less than this while ξ ≥ eps means a
    /// non-zero fixed point has been reached.
    pub stall: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        Self { max_iter: 10_000, eps: 1e-10, stall: 1e-14 }
    }
}

/// Default bisection tolerance on `g*`.
pub const DEFAULT_TOL: f64 = 1e-3;

/// Upper end of the bisection bracket; infeasible for min-degree-2 ensembles.
pub const LOAD_CAP: f64 = 2.0;

/// Outcome of one run of the single-edge recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    pub converged: bool,
    pub xi: f64,
    pub iterations: usize,
}

fn iterate(avg: &DegreeDistribution, g: f64, params: &DeParams, mut record: Option<&mut Vec<f64>>) -> FixedPoint {
    let certifiable = avg.prob(1) == 0.0;
    let mut xi = 1.0;
    if let Some(t) = record.as_deref_mut() {
        t.push(xi);
    }
    for i in 1..=params.max_iter {
        let next = 1.0 - (-g * avg.eval_derivative_unchecked(xi)).exp();
        if let Some(t) = record.as_deref_mut() {
            t.push(next);
        }
        if next < params.eps || (certifiable && g * avg.eval_derivative_unchecked(next) < next) {
            return FixedPoint { converged: true, xi: next, iterations: i };
        }
        if xi - next < params.stall {
            return FixedPoint { converged: false, xi: next, iterations: i };
        }
        xi = next;
    }
    FixedPoint { converged: false, xi, iterations: params.max_iter }
}

/// Runs `ξ_{i+1} = 1 − exp(−g Λ'(ξ_i))` from `ξ_0 = 1`.
///
/// Besides `ξ < eps`, convergence is certified as soon as `g Λ'(ξ) < ξ`
/// when `Λ_1 = 0`: then `Λ'(x)/x` is non-decreasing and `1 − e^(−y) ≤ y`, so
/// every later step contracts by at least that ratio and ξ tends to zero.
/// Without it, loads just under a stability-limited threshold (x² at
/// g = 0.4999) would need far more than `max_iter` linear-rate steps.
pub fn de_fixed_point(avg: &DegreeDistribution, g: f64, params: &DeParams) -> FixedPoint {
    iterate(avg, g, params, None)
}

/// The ξ sequence of [`de_fixed_point`], starting with `ξ_0 = 1`.
pub fn de_trajectory(avg: &DegreeDistribution, g: f64, params: &DeParams) -> (FixedPoint, Vec<f64>) {
    let mut t = Vec::new();
    let fp = iterate(avg, g, params, Some(&mut t));
    (fp, t)
}

/// Checks `ξ > 1 − exp(−g Λ'(ξ))` on `points` equally spaced ξ in `(0, 1]`.
pub fn satisfies_de_inequality(avg: &DegreeDistribution, g: f64, points: usize) -> bool {
    (1..=points).all(|i| {
        let xi = i as f64 / points as f64;
        xi > 1.0 - (-g * avg.eval_derivative_unchecked(xi)).exp()
    })
}

/// A load probed during bisection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub g: f64,
    pub converged: bool,
}

/// Threshold search result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DEResult {
    pub threshold: f64,
    pub tol: f64,
    pub probes: Vec<Probe>,
}

/// Bisection on `[0, LOAD_CAP]` for the largest feasible load.
pub fn bisect_threshold(tol: f64, mut feasible: impl FnMut(f64) -> bool) -> DEResult {
    let (mut lo, mut hi) = (0.0, LOAD_CAP);
    let mut probes = Vec::new();
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        let converged = feasible(mid);
        probes.push(Probe { g: mid, converged });
        if converged {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    DEResult { threshold: 0.5 * (lo + hi), tol, probes }
}

/// `g*` of the average distribution, within `tol`.
pub fn threshold(avg: &DegreeDistribution, tol: f64) -> DEResult {
    threshold_with(avg, tol, &DeParams::default())
}

pub fn threshold_with(avg: &DegreeDistribution, tol: f64, params: &DeParams) -> DEResult {
    bisect_threshold(tol, |g| de_fixed_point(avg, g, params).converged)
}

/// `g*` as the infimum of `−ln(1 − ξ)/Λ'(ξ)` over `(0, 1]`, capped at
/// [`LOAD_CAP`].
///
/// The recursion is driven to zero exactly when `g` lies below this
/// envelope, so this is the limit the bisection approaches without any
/// fixed-point iterations. A coarse scan locates the minimum and a golden
/// section search refines it.
pub fn threshold_envelope(avg: &DegreeDistribution) -> f64 {
    if avg.prob(1) > 0.0 {
        return 0.0;
    }
    let ratio = |xi: f64| {
        let d = avg.eval_derivative_unchecked(xi);
        if d > 0.0 {
            -(-xi).ln_1p() / d
        } else {
            f64::INFINITY
        }
    };
    // As ξ → 0 the ratio tends to 1/(2Λ_2).
    let p2 = avg.prob(2);
    let mut best = if p2 > 0.0 { 0.5 / p2 } else { f64::INFINITY };

    const SCAN: usize = 512;
    let grid = |i: usize| i as f64 / SCAN as f64;
    let (mut arg, mut min) = (0, f64::INFINITY);
    for i in 1..SCAN {
        let v = ratio(grid(i));
        if v < min {
            (arg, min) = (i, v);
        }
    }
    if arg > 0 {
        let (mut a, mut b) = (grid(arg - 1), grid(arg + 1));
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (ratio(c), ratio(d));
        while b - a > 1e-10 {
            if fc < fd {
                (b, d, fd) = (d, c, fc);
                c = b - inv_phi * (b - a);
                fc = ratio(c);
            } else {
                (a, c, fc) = (c, d, fd);
                d = a + inv_phi * (b - a);
                fd = ratio(d);
            }
        }
        min = min.min(fc).min(fd);
    }
    best = best.min(min);
    best.min(LOAD_CAP)
}

/// Per-iteration state of the multi-edge recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiEdgeStep {
    /// Erasure probability from a slot to a class-k user, one per class.
    pub xi: Vec<f64>,
    /// `p^(k)_i = Λ^(k)(ξ^(k)_i)`: probability a class-k user is still unresolved.
    pub erasure: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiEdgeTrajectory {
    pub converged: bool,
    pub steps: Vec<MultiEdgeStep>,
}

impl MultiEdgeTrajectory {
    pub fn final_erasure(&self) -> &[f64] {
        &self.steps.last().expect("at least one step").erasure
    }
}

/// Multi-edge-type recursion with one edge type per class.
///
/// Class-k users induce a Poisson slot-degree distribution with mean
/// `g α_k Λ'^(k)(1)`, whose generating function is `exp(−mean (1 − x))`.
/// For class k the slot-to-user erasure is
/// `ξ^(k) = 1 − ρ^(k)(1 − q^(k)) Π_{j≠k} P^(j)(1 − q^(j))`, and the
/// user-to-slot erasure is `q^(k) ← λ^(k)(ξ^(k)) = Λ'^(k)(ξ^(k)) / Λ'^(k)(1)`.
pub fn multi_edge_de(classes: &[ClassSpec], g: f64, params: &DeParams) -> MultiEdgeTrajectory {
    let kappa = classes.len();
    let means: Vec<f64> = classes.iter().map(|c| g * c.alpha * c.dist.average_degree()).collect();
    let poisson_pgf = |mean: f64, x: f64| (-mean * (1.0 - x)).exp();
    let certifiable = classes.iter().all(|c| c.dist.prob(1) == 0.0);
    let mut q = vec![1.0; kappa];
    let mut steps = Vec::new();
    let mut prev_max = f64::INFINITY;
    for _ in 0..params.max_iter {
        let xi: Vec<f64> = (0..kappa)
            .map(|k| {
                // ρ^(k) = P^(k) for Poisson, written out separately anyway.
                let own = poisson_pgf(means[k], 1.0 - q[k]);
                let others: f64 = (0..kappa).filter(|&j| j != k).map(|j| poisson_pgf(means[j], 1.0 - q[j])).product();
                1.0 - own * others
            })
            .collect();
        let erasure = classes.iter().zip(&xi).map(|(c, &x)| c.dist.eval_unchecked(x)).collect();
        for k in 0..kappa {
            q[k] = classes[k].dist.eval_derivative_unchecked(xi[k]) / classes[k].dist.average_degree();
        }
        let max_xi = xi.iter().copied().fold(0.0, f64::max);
        // Linearized slot update Σ_k mean_k λ^(k)(ξ^(k)) bounds the next ξ.
        let linear: f64 = (0..kappa).map(|k| means[k] * q[k]).sum();
        steps.push(MultiEdgeStep { xi, erasure });
        if max_xi < params.eps || (certifiable && linear < max_xi) {
            return MultiEdgeTrajectory { converged: true, steps };
        }
        if prev_max - max_xi < params.stall {
            return MultiEdgeTrajectory { converged: false, steps };
        }
        prev_max = max_xi;
    }
    MultiEdgeTrajectory { converged: false, steps }
}

/// Largest load at which the multi-edge recursion converges, within `tol`.
pub fn multi_edge_threshold(classes: &[ClassSpec], tol: f64, params: &DeParams) -> DEResult {
    bisect_threshold(tol, |g| multi_edge_de(classes, g, params).converged)
}
