//! Frame graph generation, the SIC peeling decoder and the Monte Carlo
//! packet loss rate estimator.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{frame_rng, par_frames};
use crate::model::{ClassAssignment, ScenarioConfig};

/// One realized user/slot bipartite graph. Users are variable nodes, slots
/// are check nodes. Adjacency is stored in compressed rows both ways.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrameGraph {
    n: usize,
    user_class: Vec<usize>,
    user_offsets: Vec<usize>,
    user_slots: Vec<u32>,
    slot_offsets: Vec<usize>,
    slot_users: Vec<u32>,
}

impl FrameGraph {
    /// Builds a graph from `(class, slots)` per user. Slot lists are sorted;
    /// duplicates or out-of-range slots are rejected.
    pub fn from_users(n: usize, users: &[(usize, Vec<usize>)]) -> Result<Self> {
        let mut g = FrameGraph { n, user_offsets: vec![0], ..Default::default() };
        for (u, (class, slots)) in users.iter().enumerate() {
            let mut sorted = slots.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != slots.len() || sorted.last().is_some_and(|&s| s >= n) {
                return Err(Error::InvalidConfig(format!("user {u} has repeated or out-of-range slots {slots:?}")));
            }
            g.user_class.push(*class);
            g.user_slots.extend(sorted.iter().map(|&s| s as u32));
            g.user_offsets.push(g.user_slots.len());
        }
        g.rebuild_slots();
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of users.
    pub fn m(&self) -> usize {
        self.user_class.len()
    }

    pub fn user_class(&self, user: usize) -> usize {
        self.user_class[user]
    }

    /// Sorted slot indices of a user.
    pub fn user_slots(&self, user: usize) -> &[u32] {
        &self.user_slots[self.user_offsets[user]..self.user_offsets[user + 1]]
    }

    pub fn degree(&self, user: usize) -> usize {
        self.user_offsets[user + 1] - self.user_offsets[user]
    }

    /// Users transmitting in a slot, in increasing index order.
    pub fn slot_users(&self, slot: usize) -> &[u32] {
        &self.slot_users[self.slot_offsets[slot]..self.slot_offsets[slot + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.user_slots.len()
    }

    // Transposes user adjacency into slot adjacency (counting sort).
    fn rebuild_slots(&mut self) {
        self.slot_offsets.clear();
        self.slot_offsets.resize(self.n + 1, 0);
        for &s in &self.user_slots {
            self.slot_offsets[s as usize + 1] += 1;
        }
        for s in 0..self.n {
            self.slot_offsets[s + 1] += self.slot_offsets[s];
        }
        self.slot_users.clear();
        self.slot_users.resize(self.user_slots.len(), 0);
        let mut fill: Vec<usize> = self.slot_offsets[..self.n].to_vec();
        for u in 0..self.m() {
            for i in self.user_offsets[u]..self.user_offsets[u + 1] {
                let s = self.user_slots[i] as usize;
                self.slot_users[fill[s]] = u as u32;
                fill[s] += 1;
            }
        }
    }
}

/// Draws frame graphs for a scenario. Reuses buffers across frames.
#[derive(Clone, Debug)]
pub struct FrameSampler {
    n: usize,
    m: usize,
    assignment: ClassAssignment,
    class_cdf: Vec<f64>,
    fixed_counts: Vec<usize>,
    degree_cdfs: Vec<Vec<(usize, f64)>>,
}

impl FrameSampler {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let m = config.m();
        let mut acc = 0.0;
        let class_cdf = config
            .classes
            .iter()
            .map(|c| {
                acc += c.alpha;
                acc
            })
            .collect();
        let degree_cdfs = config
            .classes
            .iter()
            .map(|c| {
                let mut acc = 0.0;
                c.dist
                    .support()
                    .map(|(l, p)| {
                        acc += p;
                        (l, acc)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n: config.n,
            m,
            assignment: config.class_assignment,
            class_cdf,
            fixed_counts: largest_remainder_counts(&config.alphas(), m),
            degree_cdfs,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> FrameGraph {
        let mut g = FrameGraph::default();
        self.sample_into(rng, &mut g);
        g
    }

    /// Overwrites `graph` with a fresh frame.
    pub fn sample_into<R: Rng>(&self, rng: &mut R, graph: &mut FrameGraph) {
        graph.n = self.n;
        graph.user_class.clear();
        graph.user_offsets.clear();
        graph.user_offsets.push(0);
        graph.user_slots.clear();

        match self.assignment {
            ClassAssignment::Stochastic => {
                for _ in 0..self.m {
                    let class = pick(&self.class_cdf, rng.gen::<f64>());
                    graph.user_class.push(class);
                }
            }
            ClassAssignment::FixedFraction => {
                for (class, &count) in self.fixed_counts.iter().enumerate() {
                    graph.user_class.extend(std::iter::repeat_n(class, count));
                }
            }
        }

        for u in 0..self.m {
            let cdf = &self.degree_cdfs[graph.user_class[u]];
            let x = rng.gen::<f64>();
            let l = cdf.iter().find(|&&(_, c)| x < c).unwrap_or(&cdf[cdf.len() - 1]).0;
            let start = graph.user_slots.len();
            // Floyd's sampling of l distinct slots out of n.
            for j in (self.n - l)..self.n {
                let t = rng.gen_range(0..=j) as u32;
                let chosen = &graph.user_slots[start..];
                let pick = if chosen.contains(&t) { j as u32 } else { t };
                graph.user_slots.push(pick);
            }
            graph.user_slots[start..].sort_unstable();
            graph.user_offsets.push(graph.user_slots.len());
        }
        graph.rebuild_slots();
    }
}

fn pick(cdf: &[f64], x: f64) -> usize {
    cdf.iter().position(|&c| x < c).unwrap_or(cdf.len() - 1)
}

/// Splits `m` users into classes in proportion to `alphas`: floors first,
/// then the remaining users go to the largest fractional remainders (ties
/// to the lower class index).
pub fn largest_remainder_counts(alphas: &[f64], m: usize) -> Vec<usize> {
    let quotas: Vec<f64> = alphas.iter().map(|a| a * m as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(m.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Draws one frame for `config`.
pub fn generate_frame<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Result<FrameGraph> {
    Ok(FrameSampler::new(config)?.sample(rng))
}

/// Reusable workspace for the peeling decoder.
#[derive(Clone, Debug, Default)]
pub struct Peeler {
    live: Vec<u32>,
    resolved: Vec<bool>,
    queue: Vec<u32>,
}

impl Peeler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Peels `graph` to its fixpoint and returns the resolved-user mask.
    ///
    /// Keeps a live-degree counter per slot and a stack of singleton slots,
    /// so each edge is touched a constant number of times.
    pub fn peel(&mut self, graph: &FrameGraph) -> &[bool] {
        self.live.clear();
        self.live.extend((0..graph.n).map(|s| graph.slot_users(s).len() as u32));
        self.resolved.clear();
        self.resolved.resize(graph.m(), false);
        self.queue.clear();
        self.queue.extend((0..graph.n as u32).filter(|&s| self.live[s as usize] == 1));

        while let Some(s) = self.queue.pop() {
            if self.live[s as usize] != 1 {
                continue;
            }
            let Some(&u) = graph.slot_users(s as usize).iter().find(|&&u| !self.resolved[u as usize]) else {
                continue;
            };
            self.resolved[u as usize] = true;
            for &t in graph.user_slots(u as usize) {
                let live = &mut self.live[t as usize];
                *live -= 1;
                if *live == 1 {
                    self.queue.push(t);
                }
            }
        }
        &self.resolved
    }
}

/// Runs the peeling decoder; `result[u]` is true when user `u` is resolved.
pub fn peel(graph: &FrameGraph) -> Vec<bool> {
    Peeler::new().peel(graph).to_vec()
}

/// Indices of the resolved users.
pub fn resolved_users(graph: &FrameGraph) -> Vec<usize> {
    peel(graph).iter().enumerate().filter(|(_, &r)| r).map(|(u, _)| u).collect()
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Packet loss statistics of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassPlr {
    pub users_observed: u64,
    pub users_unresolved: u64,
    pub plr: f64,
    pub ci_halfwidth: f64,
}

impl ClassPlr {
    pub fn from_counts(observed: u64, unresolved: u64) -> Self {
        if observed == 0 {
            return Self { users_observed: 0, users_unresolved: 0, plr: 0.0, ci_halfwidth: 1.0 };
        }
        let n = observed as f64;
        let plr = unresolved as f64 / n;
        let ci_halfwidth = if unresolved == 0 { 3.0 / n } else { Z95 * (plr * (1.0 - plr) / n).sqrt() };
        Self { users_observed: observed, users_unresolved: unresolved, plr, ci_halfwidth }
    }
}

/// Monte Carlo PLR estimate over `trials` frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub trials: u64,
    pub n: usize,
    pub m: usize,
    pub requested_load: f64,
    pub realized_load: f64,
    pub per_class: Vec<ClassPlr>,
}

/// Unresolved users of each class in one frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub frame: u64,
    pub unresolved: Vec<u64>,
}

#[derive(Clone)]
struct PlrAcc {
    observed: Vec<u64>,
    unresolved: Vec<u64>,
}

impl PlrAcc {
    fn merge(mut self, other: Self) -> Self {
        for k in 0..self.observed.len() {
            self.observed[k] += other.observed[k];
            self.unresolved[k] += other.unresolved[k];
        }
        self
    }
}

fn simulate_frame(
    sampler: &FrameSampler,
    seed: u64,
    frame: u64,
    graph: &mut FrameGraph,
    peeler: &mut Peeler,
    acc: &mut PlrAcc,
) {
    let mut rng = frame_rng(seed, frame);
    sampler.sample_into(&mut rng, graph);
    let resolved = peeler.peel(graph);
    for (u, &r) in resolved.iter().enumerate() {
        let k = graph.user_class(u);
        acc.observed[k] += 1;
        acc.unresolved[k] += u64::from(!r);
    }
}

/// Estimates the per-class PLR over `trials` independent frames.
/// `workers = 0` uses every available core; the outcome does not depend on
/// the worker count.
pub fn run_monte_carlo(config: &ScenarioConfig, trials: u64, workers: usize) -> Result<SimOutcome> {
    if trials < 1 {
        return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
    }
    let sampler = FrameSampler::new(config)?;
    let kappa = config.classes.len();
    let make =
        || (FrameGraph::default(), Peeler::new(), PlrAcc { observed: vec![0; kappa], unresolved: vec![0; kappa] });
    let (_, _, acc) = par_frames(
        workers,
        trials,
        make,
        |(graph, peeler, acc), frame| simulate_frame(&sampler, config.seed, frame, graph, peeler, acc),
        |a, b| (a.0, a.1, a.2.merge(b.2)),
    )?;
    Ok(SimOutcome {
        trials,
        n: config.n,
        m: sampler.m(),
        requested_load: config.g,
        realized_load: config.realized_load(),
        per_class: acc.observed.iter().zip(&acc.unresolved).map(|(&o, &u)| ClassPlr::from_counts(o, u)).collect(),
    })
}

/// Same estimate as [`run_monte_carlo`], additionally writing one JSON line
/// per frame (frame index and per-class unresolved counts) to `trace`.
pub fn run_monte_carlo_traced<W: Write>(
    config: &ScenarioConfig,
    trials: u64,
    workers: usize,
    mut trace: W,
) -> Result<SimOutcome> {
    let outcome = run_monte_carlo(config, trials, workers)?;
    let sampler = FrameSampler::new(config)?;
    let kappa = config.classes.len();
    let mut graph = FrameGraph::default();
    let mut peeler = Peeler::new();
    for frame in 0..trials {
        let mut acc = PlrAcc { observed: vec![0; kappa], unresolved: vec![0; kappa] };
        simulate_frame(&sampler, config.seed, frame, &mut graph, &mut peeler, &mut acc);
        let record = FrameTrace { frame, unresolved: acc.unresolved };
        serde_json::to_writer(&mut trace, &record)?;
        trace.write_all(b"\n")?;
    }
    Ok(outcome)
}
