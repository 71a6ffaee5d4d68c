//! Discrete-time agent-based SIR with asymptomatic cases, contact tracing and
//! quarantine on a typed contact graph.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::kinetics::EpidemicParams;
use crate::netgraph::{ContactGraph, EdgeType};

pub const DEFAULT_STEP_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    /// Probability that a normal contact of a symptomatic case is traced.
    pub eta: f64,
    /// Quarantine length for traced susceptibles, in time units.
    pub quarantine_period: u32,
    /// Overlap threshold used to type the graph's edges.
    pub h_overlap: f64,
    pub beta_close: f64,
    pub beta_normal: f64,
}

impl PolicyParams {
    /// `beta_normal = β`, `beta_close = 2β`, tracing fraction taken from `disease.eta`.
    pub fn from_disease(disease: &EpidemicParams, quarantine_period: u32, h_overlap: f64) -> Self {
        Self {
            eta: disease.eta,
            quarantine_period,
            h_overlap,
            beta_close: 2.0 * disease.beta,
            beta_normal: disease.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(param(format!("eta = {} must lie in [0, 1]", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.h_overlap) {
            return Err(param(format!("h_overlap = {} must lie in [0, 1]", self.h_overlap)));
        }
        if !(self.beta_normal >= 0.0 && self.beta_close >= self.beta_normal && self.beta_close.is_finite()) {
            return Err(param(format!(
                "need beta_close ({}) >= beta_normal ({}) >= 0",
                self.beta_close, self.beta_normal
            )));
        }
        Ok(())
    }
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self::from_disease(&EpidemicParams::BASELINE, 14, 0.75)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compartment {
    Susceptible,
    InfectedAsymptomatic,
    SusceptibleQuarantined,
    InfectedQuarantined,
    Recovered,
}

impl Compartment {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Seeding {
    /// `max(1, round(0.001 n))` uniformly chosen nodes.
    Default,
    Count(usize),
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub s: f64,
    pub r: f64,
    pub q_max: f64,
    pub i_max: f64,
    pub t_q: f64,
    pub t_i: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 6] = ["S", "R", "Q_max", "I_max", "t_q", "t_i"];

    pub fn to_array(&self) -> [f64; 6] {
        [self.s, self.r, self.q_max, self.i_max, self.t_q, self.t_i]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self {
            s: a[0],
            r: a[1],
            q_max: a[2],
            i_max: a[3],
            t_q: a[4],
            t_i: a[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Fractions `(S, I, QS, QI, R)` after each step; entry 0 is the seeded state.
    pub series: Vec<[f64; 5]>,
    pub metrics: Metrics,
    pub seed: u64,
    pub disease: EpidemicParams,
    pub policy: PolicyParams,
}

fn initial_nodes(n: usize, seeds: &Seeding, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let count = match seeds {
        Seeding::Default => ((0.001 * n as f64).round() as usize).max(1),
        Seeding::Count(c) => *c,
        Seeding::Nodes(nodes) => {
            if let Some(&bad) = nodes.iter().find(|&&u| u >= n) {
                return Err(param(format!("seed node {bad} outside 0..{n}")));
            }
            let mut nodes = nodes.clone();
            nodes.sort_unstable();
            nodes.dedup();
            return Ok(nodes);
        }
    };
    if count > n {
        return Err(param(format!("cannot seed {count} infections among {n} nodes")));
    }
    let mut nodes = sample(rng, n, count).into_vec();
    nodes.sort_unstable();
    Ok(nodes)
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    p > 0.0 && rng.random::<f64>() < p
}

pub fn simulate_once(
    g: &ContactGraph,
    disease: &EpidemicParams,
    policy: &PolicyParams,
    seeds: &Seeding,
    rng_seed: u64,
) -> Result<SimulationResult> {
    simulate_once_capped(g, disease, policy, seeds, rng_seed, DEFAULT_STEP_CAP)
}

pub fn simulate_once_capped(
    g: &ContactGraph,
    disease: &EpidemicParams,
    policy: &PolicyParams,
    seeds: &Seeding,
    rng_seed: u64,
    step_cap: usize,
) -> Result<SimulationResult> {
    use Compartment::*;

    disease.validate()?;
    policy.validate()?;
    if g.edge_types().contains(&EdgeType::Untyped) {
        return Err(param("every edge must be typed before simulation"));
    }
    let n = g.n();
    if n == 0 {
        return Err(param("empty graph"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let p_close = 1.0 - (-policy.beta_close).exp();
    let p_normal = 1.0 - (-policy.beta_normal).exp();
    let p_recover = 1.0 - (-disease.gamma).exp();

    let mut state = vec![Susceptible; n];
    let mut clock = vec![0u32; n];
    let mut counts = [0usize; 5];
    counts[Susceptible.index()] = n;
    let set = |state: &mut [Compartment], counts: &mut [usize; 5], u: usize, c: Compartment| {
        counts[state[u].index()] -= 1;
        counts[c.index()] += 1;
        state[u] = c;
    };

    let mut active: Vec<usize> = initial_nodes(n, seeds, &mut rng)?;
    for &u in &active {
        set(&mut state, &mut counts, u, InfectedAsymptomatic);
    }
    let mut isolated: Vec<usize> = Vec::new();
    let mut quarantined: Vec<usize> = Vec::new();

    let frac = |c: &[usize; 5]| c.map(|x| x as f64 / n as f64);
    let mut series = vec![frac(&counts)];
    let mut q_max = series[0][SusceptibleQuarantined.index()];
    let mut i_max = series[0][InfectedAsymptomatic.index()];
    let mut t_q = 0usize;
    let mut t_i = usize::from(!active.is_empty());

    let mut newly: Vec<usize> = Vec::new();
    let mut fresh_quarantine: Vec<bool> = vec![false; n];
    let mut step = 0usize;
    while counts[InfectedAsymptomatic.index()] + counts[InfectedQuarantined.index()] > 0
        || counts[SusceptibleQuarantined.index()] > 0
    {
        if step == step_cap {
            return Err(Error::Timeout { steps: step_cap });
        }
        step += 1;

        // transmission from non-isolated infected nodes to susceptible neighbours
        newly.clear();
        for &u in &active {
            for (&v, &e) in g.neighbors(u).iter().zip(g.incident_edges(u)) {
                if state[v] != Susceptible {
                    continue;
                }
                let p = if g.edge_type(e) == EdgeType::Close { p_close } else { p_normal };
                if bernoulli(&mut rng, p) {
                    newly.push(v);
                    set(&mut state, &mut counts, v, InfectedAsymptomatic);
                }
            }
        }

        // symptom branching, then tracing around each symptomatic case
        let mut index_cases = Vec::new();
        for &v in &newly {
            if bernoulli(&mut rng, disease.alpha) {
                set(&mut state, &mut counts, v, InfectedQuarantined);
                isolated.push(v);
                index_cases.push(v);
            } else {
                active.push(v);
            }
        }
        for &v in &index_cases {
            for (&c, &e) in g.neighbors(v).iter().zip(g.incident_edges(v)) {
                let traced = g.edge_type(e) == EdgeType::Close || bernoulli(&mut rng, policy.eta);
                if !traced {
                    continue;
                }
                match state[c] {
                    Susceptible if policy.quarantine_period > 0 => {
                        set(&mut state, &mut counts, c, SusceptibleQuarantined);
                        clock[c] = policy.quarantine_period;
                        fresh_quarantine[c] = true;
                        quarantined.push(c);
                    }
                    InfectedAsymptomatic => {
                        set(&mut state, &mut counts, c, InfectedQuarantined);
                        isolated.push(c);
                    }
                    _ => {}
                }
            }
        }

        // recovery of every infected node, isolated or not
        active.retain(|&u| state[u] == InfectedAsymptomatic);
        for list in [&mut active, &mut isolated] {
            list.retain(|&u| {
                if bernoulli(&mut rng, p_recover) {
                    set(&mut state, &mut counts, u, Recovered);
                    false
                } else {
                    true
                }
            });
        }
        isolated.retain(|&u| state[u] == InfectedQuarantined);

        // release of quarantined susceptibles whose clock runs out
        quarantined.retain(|&u| {
            if fresh_quarantine[u] {
                fresh_quarantine[u] = false;
                return true;
            }
            clock[u] -= 1;
            if clock[u] == 0 {
                set(&mut state, &mut counts, u, Susceptible);
                false
            } else {
                true
            }
        });

        let f = frac(&counts);
        q_max = q_max.max(f[SusceptibleQuarantined.index()]);
        i_max = i_max.max(f[InfectedAsymptomatic.index()]);
        if counts[SusceptibleQuarantined.index()] + counts[InfectedQuarantined.index()] > 0 {
            t_q = step + 1;
        }
        if counts[InfectedAsymptomatic.index()] + counts[InfectedQuarantined.index()] > 0 {
            t_i = step + 1;
        }
        series.push(f);
    }

    let last = series.last().copied().unwrap_or_default();
    Ok(SimulationResult {
        metrics: Metrics {
            s: last[Susceptible.index()] + last[SusceptibleQuarantined.index()],
            r: last[Recovered.index()],
            q_max,
            i_max,
            t_q: t_q as f64,
            t_i: t_i as f64,
        },
        series,
        seed: rng_seed,
        disease: *disease,
        policy: *policy,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub mean: Metrics,
    /// Sample standard deviation (zero for a single run).
    pub std: Metrics,
    pub runs: Vec<SimulationResult>,
    pub base_seed: u64,
}

impl EnsembleSummary {
    pub fn std_error(&self) -> Metrics {
        let k = (self.runs.len() as f64).sqrt();
        Metrics::from_array(self.std.to_array().map(|s| s / k))
    }
}

/// Runs `n_runs` independent simulations with seeds `base_seed + i`.
pub fn simulate_ensemble(
    g: &ContactGraph,
    disease: &EpidemicParams,
    policy: &PolicyParams,
    seeds: &Seeding,
    n_runs: usize,
    base_seed: u64,
) -> Result<EnsembleSummary> {
    if n_runs == 0 {
        return Err(param("n_runs must be at least 1"));
    }
    let runs: Vec<SimulationResult> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| simulate_once(g, disease, policy, seeds, base_seed.wrapping_add(i)))
        .collect::<Result<_>>()?;
    let k = n_runs as f64;
    let mut mean = [0.0; 6];
    for r in &runs {
        for (m, x) in mean.iter_mut().zip(r.metrics.to_array()) {
            *m += x / k;
        }
    }
    let mut var = [0.0; 6];
    if n_runs > 1 {
        for r in &runs {
            for ((v, x), m) in var.iter_mut().zip(r.metrics.to_array()).zip(mean) {
                *v += (x - m) * (x - m) / (k - 1.0);
            }
        }
    }
    Ok(EnsembleSummary {
        mean: Metrics::from_array(mean),
        std: Metrics::from_array(var.map(f64::sqrt)),
        runs,
        base_seed,
    })
}
