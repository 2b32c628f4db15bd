//! Decoding delay under a slot-by-slot decoder.
//!
//! The receiver runs peeling after every slot arrival instead of waiting for
//! the whole frame. A user decoded while slot `s` (zero-based) is the newest
//! received slot has normalized delay `(s + 1) / n`. Unresolved users carry
//! no delay and are left out of the statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{frame_rng, par_frames};
use crate::model::{ClassSpec, ScenarioConfig};
use crate::sim::{FrameGraph, FrameSampler};

/// Density of the minimum of `l` independent uniforms on `[0, 1]`:
/// `l (1 − t)^(l − 1)` inside the unit interval, zero outside.
pub fn delay_pdf(l: usize, t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) || l == 0 {
        return 0.0;
    }
    l as f64 * (1.0 - t).powi(l as i32 - 1)
}

/// Mean delay of a degree-l user as the load vanishes, `1 / (l + 1)`.
pub fn mean_delay_degree(l: usize) -> f64 {
    1.0 / (l as f64 + 1.0)
}

/// Low-load mean delay of a class, `Σ_l Λ_l / (l + 1)`.
pub fn mean_delay_class(spec: &ClassSpec) -> f64 {
    spec.dist.support().map(|(l, p)| p * mean_delay_degree(l)).sum()
}

/// Workspace for [`slot_decoder`].
#[derive(Clone, Debug, Default)]
pub struct SlotDecoder {
    live: Vec<u32>,
    decoded_at: Vec<Option<u32>>,
    queue: Vec<u32>,
}

impl SlotDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decodes `graph` slot by slot. Entry `u` of the result is the slot
    /// index whose arrival triggered the decoding of user `u`.
    pub fn decode(&mut self, graph: &FrameGraph) -> &[Option<u32>] {
        self.live.clear();
        self.live.resize(graph.n(), 0);
        self.decoded_at.clear();
        self.decoded_at.resize(graph.m(), None);
        self.queue.clear();

        for s in 0..graph.n() {
            // Copies of users decoded earlier are cancelled on arrival.
            let live = graph.slot_users(s).iter().filter(|&&u| self.decoded_at[u as usize].is_none()).count();
            self.live[s] = live as u32;
            if live == 1 {
                self.queue.push(s as u32);
            }
            while let Some(t) = self.queue.pop() {
                if self.live[t as usize] != 1 {
                    continue;
                }
                let Some(&u) = graph.slot_users(t as usize).iter().find(|&&u| self.decoded_at[u as usize].is_none())
                else {
                    continue;
                };
                self.decoded_at[u as usize] = Some(s as u32);
                for &x in graph.user_slots(u as usize) {
                    if x as usize > s {
                        // user slots are sorted; the rest have not arrived
                        break;
                    }
                    let c = &mut self.live[x as usize];
                    *c -= 1;
                    if *c == 1 {
                        self.queue.push(x);
                    }
                }
            }
        }
        &self.decoded_at
    }
}

/// Per-user decode slot index, `None` when unresolved at the end of the frame.
pub fn slot_decoder(graph: &FrameGraph) -> Vec<Option<u32>> {
    SlotDecoder::new().decode(graph).to_vec()
}

/// Delay statistics of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDelay {
    /// `histogram[s]`: users decoded at slot `s`, i.e. with delay `(s + 1) / n`.
    pub histogram: Vec<u64>,
    pub resolved: u64,
    pub unresolved: u64,
    /// Mean normalized delay over resolved users; zero when none resolved.
    pub mean: f64,
}

impl ClassDelay {
    fn from_histogram(histogram: Vec<u64>, unresolved: u64) -> Self {
        let n = histogram.len() as f64;
        let resolved: u64 = histogram.iter().sum();
        let weighted: u64 = histogram.iter().enumerate().map(|(s, &c)| (s as u64 + 1) * c).sum();
        let mean = if resolved == 0 { 0.0 } else { weighted as f64 / (resolved as f64 * n) };
        Self { histogram, resolved, unresolved, mean }
    }

    /// `(delay, probability)` for every non-empty bin.
    pub fn pmf(&self) -> Vec<(f64, f64)> {
        let n = self.histogram.len() as f64;
        self.histogram
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| ((s + 1) as f64 / n, c as f64 / self.resolved as f64))
            .collect()
    }

    pub fn resolved_fraction(&self) -> f64 {
        let total = self.resolved + self.unresolved;
        if total == 0 {
            0.0
        } else {
            self.resolved as f64 / total as f64
        }
    }
}

/// Delay statistics of every class at one load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub trials: u64,
    pub n: usize,
    pub load: f64,
    pub per_class: Vec<ClassDelay>,
}

struct DelayAcc {
    histograms: Vec<Vec<u64>>,
    unresolved: Vec<u64>,
}

impl DelayAcc {
    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.histograms.iter_mut().zip(other.histograms) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.unresolved.iter_mut().zip(other.unresolved).for_each(|(x, y)| *x += y);
        self
    }
}

/// Runs the slot decoder on `trials` frames of `config`.
pub fn run_delay_monte_carlo(config: &ScenarioConfig, trials: u64, workers: usize) -> Result<DelayStats> {
    if trials < 1 {
        return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
    }
    let sampler = FrameSampler::new(config)?;
    let (n, kappa) = (config.n, config.classes.len());
    let make = || {
        (
            FrameGraph::default(),
            SlotDecoder::new(),
            DelayAcc { histograms: vec![vec![0; n]; kappa], unresolved: vec![0; kappa] },
        )
    };
    let (_, _, acc) = par_frames(
        workers,
        trials,
        make,
        |(graph, decoder, acc), frame| {
            let mut rng = frame_rng(config.seed, frame);
            sampler.sample_into(&mut rng, graph);
            for (u, at) in decoder.decode(graph).iter().enumerate() {
                let k = graph.user_class(u);
                match at {
                    Some(s) => acc.histograms[k][*s as usize] += 1,
                    None => acc.unresolved[k] += 1,
                }
            }
        },
        |a, b| (a.0, a.1, a.2.merge(b.2)),
    )?;
    Ok(DelayStats {
        trials,
        n,
        load: config.g,
        per_class: acc
            .histograms
            .into_iter()
            .zip(acc.unresolved)
            .map(|(h, u)| ClassDelay::from_histogram(h, u))
            .collect(),
    })
}

/// [`run_delay_monte_carlo`] at every load in `loads`.
pub fn run_delay_sweep(config: &ScenarioConfig, loads: &[f64], trials: u64, workers: usize) -> Result<Vec<DelayStats>> {
    loads.iter().map(|&g| run_delay_monte_carlo(&config.at_load(g), trials, workers)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DegreeDistribution;
    use crate::sim::peel;

    fn graph(n: usize, users: &[&[usize]]) -> FrameGraph {
        let users: Vec<_> = users.iter().map(|s| (0, s.to_vec())).collect();
        FrameGraph::from_users(n, &users).unwrap()
    }

    // Composite Simpson on [0, 1].
    fn simpson(f: impl Fn(f64) -> f64, intervals: usize) -> f64 {
        let h = 1.0 / intervals as f64;
        let inner: f64 = (1..intervals).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h)).sum();
        (f(0.0) + f(1.0) + inner) * h / 3.0
    }

    #[test]
    fn pdf_examples() {
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(delay_pdf(1, t), 1.0);
        }
        assert_eq!(delay_pdf(2, 0.0), 2.0);
        assert_eq!(delay_pdf(3, 1.5), 0.0);
        assert_eq!(delay_pdf(3, -0.1), 0.0);
    }

    #[test]
    fn pdf_normalized_with_expected_mean() {
        for l in 1..=8 {
            let mass = simpson(|t| delay_pdf(l, t), 2000);
            assert!((mass - 1.0).abs() < 1e-9, "l = {l}: {mass}");
            let mean = simpson(|t| t * delay_pdf(l, t), 2000);
            assert!((mean - 1.0 / (l as f64 + 1.0)).abs() < 1e-9, "l = {l}: {mean}");
        }
    }

    #[test]
    fn class_means() {
        let d = |p: &[(usize, f64)]| DegreeDistribution::from_pairs(p).unwrap();
        assert!((mean_delay_class(&ClassSpec::new(1.0, d(&[(8, 1.0)]))) - 1.0 / 9.0).abs() < 1e-15);
        let c1 = ClassSpec::new(0.2, d(&[(3, 0.01), (8, 0.99)]));
        assert!((mean_delay_class(&c1) - 0.1125).abs() < 1e-12);
        let c2 = ClassSpec::new(0.8, d(&[(2, 0.27), (3, 0.73)]));
        assert!((mean_delay_class(&c2) - 0.2725).abs() < 1e-12);
    }

    #[test]
    fn decoder_examples() {
        assert_eq!(slot_decoder(&graph(10, &[&[2, 7]])), vec![Some(2)]);
        // A's copy in slot 1 is cancelled on arrival, leaving B alone there
        assert_eq!(slot_decoder(&graph(3, &[&[0, 1], &[1, 2]])), vec![Some(0), Some(1)]);
        assert_eq!(slot_decoder(&graph(2, &[&[0, 1], &[0, 1]])), vec![None, None]);
        // slot 2 resolves A, whose cancellation frees B in slot 1 and then C in slot 0
        assert_eq!(slot_decoder(&graph(4, &[&[1, 2], &[0, 1, 3], &[0, 3]])), vec![Some(2); 3]);
    }

    #[test]
    fn cascade_shares_slot_index() {
        // nothing decodes until slot 2 exposes C; B and A follow in the same cascade
        let at = slot_decoder(&graph(6, &[&[0, 3], &[0, 1], &[1, 2], &[4, 5]]));
        assert_eq!(at, vec![Some(2), Some(2), Some(2), Some(4)]);
    }

    #[test]
    fn end_of_frame_matches_peel() {
        let d = DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.3), (4, 0.2)]).unwrap();
        let cfg = ScenarioConfig::new(12, 0.9, vec![ClassSpec::new(1.0, d)]);
        let sampler = FrameSampler::new(&cfg).unwrap();
        for f in 0..2000 {
            let g = sampler.sample(&mut frame_rng(8, f));
            let slots = slot_decoder(&g);
            let resolved = peel(&g);
            for u in 0..g.m() {
                assert_eq!(slots[u].is_some(), resolved[u]);
                if let Some(s) = slots[u] {
                    // a user cannot be decoded before its first copy arrives
                    assert!(s >= g.user_slots(u)[0]);
                }
            }
        }
    }

    #[test]
    fn histogram_mass_and_determinism() {
        let d = DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.5)]).unwrap();
        let cfg = ScenarioConfig::new(30, 0.6, vec![ClassSpec::new(1.0, d)]).with_seed(5);
        let a = run_delay_monte_carlo(&cfg, 5000, 1).unwrap();
        let b = run_delay_monte_carlo(&cfg, 5000, 4).unwrap();
        assert_eq!(a, b);
        let c = &a.per_class[0];
        assert_eq!(c.histogram.iter().sum::<u64>(), c.resolved);
        assert_eq!(c.resolved + c.unresolved, 5000 * 18);
        assert!(c.mean > 0.0 && c.mean <= 1.0);
        assert!((c.pmf().iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
