//! Nelder-Mead simplex search (maximization).

use serde::{Deserialize, Serialize};

/// Simplex coefficients and stopping rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadParams {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_evals: usize,
    /// Stop once every vertex is within this max-norm distance of the best one.
    pub tolerance: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadParams {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_evals: 2000,
            tolerance: 1e-4,
            initial_step: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NmOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Candidate edge directions for the `i`-th initial vertex: the unit axis
/// both ways, then axis swaps `±(e_i - e_j)` for corners of a constraint.
fn step_directions(dim: usize, i: usize) -> impl Iterator<Item = Vec<f64>> {
    let unit = move |pairs: &[(usize, f64)]| {
        let mut d = vec![0.0; dim];
        for &(k, v) in pairs {
            d[k] = v;
        }
        d
    };
    let axes = [unit(&[(i, 1.0)]), unit(&[(i, -1.0)])];
    let swaps = (0..dim)
        .filter(move |&j| j != i)
        .flat_map(move |j| [unit(&[(i, 1.0), (j, -1.0)]), unit(&[(i, -1.0), (j, 1.0)])]);
    axes.into_iter().chain(swaps)
}

/// Component of `dir` orthogonal to the (orthogonal) `basis`, or `None`
/// when `dir` lies in its span.
fn independent_part(basis: &[Vec<f64>], dir: &[f64]) -> Option<Vec<f64>> {
    let mut r = dir.to_vec();
    for b in basis {
        let t = r.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / b.iter().map(|y| y * y).sum::<f64>();
        r.iter_mut().zip(b).for_each(|(x, y)| *x -= t * y);
    }
    (r.iter().map(|x| x * x).sum::<f64>() > 1e-12).then_some(r)
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Maximizes `f` from `start`.
///
/// The initial simplex steps `initial_step` along each axis. When that
/// vertex evaluates to `-inf` the opposite direction is tried, then moves
/// trading mass between this axis and another one, so a start on a corner
/// of a feasible region still gets a non-degenerate, mostly finite
/// simplex. Ties keep the older vertex ahead, so a constant objective
/// returns `start`.
pub fn nelder_mead<F>(f: F, start: &[f64], params: &NelderMeadParams) -> NmOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut f = Counted { f, evals: 0 };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = f.eval(start);
    simplex.push((start.to_vec(), v0));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut fallback = None;
        let mut chosen = None;
        for dir in step_directions(dim, i) {
            let Some(residual) = independent_part(&basis, &dir) else { continue };
            let x: Vec<f64> = start.iter().zip(&dir).map(|(s, d)| s + params.initial_step * d).collect();
            let v = f.eval(&x);
            if v > f64::NEG_INFINITY {
                chosen = Some((x, v, residual));
                break;
            }
            fallback.get_or_insert((x, v, residual));
        }
        let (x, v, residual) = chosen.or(fallback).expect("the unit axis is always independent");
        basis.push(residual);
        simplex.push((x, v));
    }

    let mut trace = Vec::new();
    loop {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        trace.push(simplex[0].1);
        let best = &simplex[0].0;
        let diameter =
            simplex[1..].iter().flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if diameter < params.tolerance || f.evals >= params.max_evals || dim == 0 {
            break;
        }

        let worst = simplex[dim].clone();
        let second_worst = simplex[dim - 1].1;
        let centroid: Vec<f64> =
            (0..dim).map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64).collect();

        let reflected = affine(&centroid, &worst.0, -params.reflection);
        let fr = f.eval(&reflected);
        if fr > simplex[0].1 {
            let expanded = affine(&centroid, &worst.0, -params.reflection * params.expansion);
            let fe = f.eval(&expanded);
            simplex[dim] = if fe > fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr > second_worst {
            simplex[dim] = (reflected, fr);
            continue;
        }
        // outside contraction when the reflection beats the worst vertex
        let accepted = if fr > worst.1 {
            let c = affine(&centroid, &worst.0, -params.reflection * params.contraction);
            let fc = f.eval(&c);
            (fc >= fr).then_some((c, fc))
        } else {
            let c = affine(&centroid, &worst.0, params.contraction);
            let fc = f.eval(&c);
            (fc > worst.1).then_some((c, fc))
        };
        if let Some(vertex) = accepted {
            simplex[dim] = vertex;
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = affine(&anchor, &vertex.0, params.shrink);
            let v = f.eval(&x);
            *vertex = (x, v);
        }
    }
    let (point, value) = simplex.swap_remove(0);
    NmOutcome { point, value, evaluations: f.evals, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_4d() {
        let f = |x: &[f64]| -x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>();
        let params = NelderMeadParams { tolerance: 1e-7, max_evals: 20_000, ..Default::default() };
        let out = nelder_mead(f, &[0.0; 4], &params);
        for v in &out.point {
            assert!((v - 0.3).abs() < 1e-4, "{:?}", out.point);
        }
    }

    #[test]
    fn constant_returns_start() {
        let out = nelder_mead(|_: &[f64]| 1.0, &[0.2, 0.4], &NelderMeadParams::default());
        assert_eq!(out.point, vec![0.2, 0.4]);
        assert_eq!(out.value, 1.0);
    }

    #[test]
    fn trace_never_decreases() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - 3.0 * (x[1] + 0.5).powi(2) + x[0] * x[1];
        let out = nelder_mead(f, &[0.0, 0.0], &NelderMeadParams::default());
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.evaluations <= NelderMeadParams::default().max_evals + 3);
    }

    #[test]
    fn respects_infeasible_region() {
        // maximize x + 2y on the triangle x, y ≥ 0, x + y ≤ 1; optimum at the corner (0, 1)
        let f = |x: &[f64]| {
            if x[0] < 0.0 || x[1] < 0.0 || x[0] + x[1] > 1.0 {
                f64::NEG_INFINITY
            } else {
                x[0] + 2.0 * x[1]
            }
        };
        let out = nelder_mead(f, &[1.0, 0.0], &NelderMeadParams::default());
        assert!(out.value > 1.99, "{out:?}");
    }
}
