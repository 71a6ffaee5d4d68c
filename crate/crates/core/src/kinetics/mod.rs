//! Degree-based mean-field dynamics of the SIR model with asymptomatic
//! infections, contact tracing and isolation.
//!
//! Two systems are provided. [`FullSystem`] carries the five compartments
//! `(s_k, qS_k, x_k, qI_k, r_k)` for every degree class `k = 0..=kmax`.
//! [`ReducedSystem`] closes the dynamics with the ansatz `s_k = u^k` and
//! tracks five edge-weighted scalars `(u, qS, v, qI, r)`.
//!
//! Full-system states are flattened compartment-major: `[s.., qS.., x.., qI.., r..]`.

mod integrate;

use std::fmt;

pub use integrate::{integrate, OdeSystem, SolverOptions, Trajectory, TrajectoryMeta};

use crate::dist::DegreeDistribution;
use crate::error::{param, Error, Result};

/// Slack allowed on compartment fractions before an invariant violation is raised.
pub const STATE_TOL: f64 = 1e-6;
/// Smallest admissible g1'(u) in the reduced system.
pub const MIN_EXCESS_SLOPE: f64 = 1e-12;
/// Values below this floor in both operands yield a ratio of 1.
pub const RATIO_FLOOR: f64 = 1e-12;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 150.0;

pub const COMPARTMENTS: [&str; 5] = ["s", "qS", "x", "qI", "r"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpidemicParams {
    /// Probability that a new infection is symptomatic (and isolated at once).
    pub alpha: f64,
    /// Infection rate per infected, non-isolated neighbour.
    pub beta: f64,
    /// Recovery rate.
    pub gamma: f64,
    /// Release rate from isolation.
    pub gamma1: f64,
    /// Fraction of an index case's neighbours that is traced and isolated.
    pub eta: f64,
}

impl EpidemicParams {
    pub const BASELINE: EpidemicParams = EpidemicParams {
        alpha: 0.4,
        beta: 0.15,
        gamma: 0.1,
        gamma1: 0.1,
        eta: 0.5,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64, gamma1: f64, eta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            gamma1,
            eta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(param(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        let rate = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(format!("{name} = {v} must be a non-negative rate")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("eta", self.eta)?;
        rate("beta", self.beta)?;
        rate("gamma", self.gamma)?;
        rate("gamma1", self.gamma1)
    }
}

impl Default for EpidemicParams {
    fn default() -> Self {
        Self::BASELINE
    }
}

impl fmt::Display for EpidemicParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={},beta={},gamma={},gamma1={},eta={}",
            self.alpha, self.beta, self.gamma, self.gamma1, self.eta
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub s: Vec<f64>,
    pub q_s: Vec<f64>,
    pub x: Vec<f64>,
    pub q_i: Vec<f64>,
    pub r: Vec<f64>,
    pub time: f64,
}

impl FullState {
    /// `s_k = 1 - epsilon`, `x_k = epsilon`, everything else zero.
    pub fn initial(kmax: usize, epsilon: f64) -> Self {
        let n = kmax + 1;
        Self {
            s: vec![1.0 - epsilon; n],
            q_s: vec![0.0; n],
            x: vec![epsilon; n],
            q_i: vec![0.0; n],
            r: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn kmax(&self) -> usize {
        self.s.len() - 1
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [&self.s, &self.q_s, &self.x, &self.q_i, &self.r]
            .into_iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn from_flat(flat: &[f64], time: f64) -> Result<Self> {
        if !flat.len().is_multiple_of(5) || flat.len() < 10 {
            return Err(param(format!("flat state length {} is not 5 * (kmax + 1)", flat.len())));
        }
        let n = flat.len() / 5;
        let part = |i: usize| flat[i * n..(i + 1) * n].to_vec();
        Ok(Self {
            s: part(0),
            q_s: part(1),
            x: part(2),
            q_i: part(3),
            r: part(4),
            time,
        })
    }

    fn consistent(&self) -> bool {
        let n = self.s.len();
        [&self.q_s, &self.x, &self.q_i, &self.r].iter().all(|v| v.len() == n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub u: f64,
    pub q_s: f64,
    pub v: f64,
    pub q_i: f64,
    pub r: f64,
    pub time: f64,
}

impl ReducedState {
    /// `u = g1^{-1}(1 - epsilon)`, `v = epsilon`, everything else zero.
    pub fn initial(exc: &DegreeDistribution, epsilon: f64) -> Result<Self> {
        Ok(Self {
            u: exc.pgf_invert(1.0 - epsilon)?,
            q_s: 0.0,
            v: epsilon,
            q_i: 0.0,
            r: 0.0,
            time: 0.0,
        })
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.u, self.q_s, self.v, self.q_i, self.r]
    }

    pub fn from_slice(y: &[f64], time: f64) -> Self {
        Self {
            u: y[0],
            q_s: y[1],
            v: y[2],
            q_i: y[3],
            r: y[4],
            time,
        }
    }
}

fn check_aligned(deg: &DegreeDistribution, exc: &DegreeDistribution) -> Result<()> {
    if deg.kmax() != exc.kmax() {
        return Err(param(format!(
            "degree (kmax {}) and excess (kmax {}) distributions are not aligned",
            deg.kmax(),
            exc.kmax()
        )));
    }
    Ok(())
}

/// The `5 (1 + kmax)`-dimensional degree-based system.
#[derive(Debug, Clone, Copy)]
pub struct FullSystem<'a> {
    pub params: EpidemicParams,
    pub deg: &'a DegreeDistribution,
    pub exc: &'a DegreeDistribution,
}

impl<'a> FullSystem<'a> {
    pub fn new(params: EpidemicParams, deg: &'a DegreeDistribution, exc: &'a DegreeDistribution) -> Result<Self> {
        params.validate()?;
        check_aligned(deg, exc)?;
        Ok(Self { params, deg, exc })
    }

    fn classes(&self) -> usize {
        self.deg.kmax() + 1
    }
}

impl OdeSystem for FullSystem<'_> {
    fn dim(&self) -> usize {
        5 * self.classes()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.classes();
        if y.len() != 5 * n || dy.len() != 5 * n {
            return Err(param("state dimension does not match distribution truncation"));
        }
        let EpidemicParams {
            alpha,
            beta,
            gamma,
            gamma1,
            eta,
        } = self.params;
        let (s, rest) = y.split_at(n);
        let (q_s, rest) = rest.split_at(n);
        let (x, rest) = rest.split_at(n);
        let (q_i, _) = rest.split_at(n);
        let p = self.deg.pmf();
        let w = self.exc.pmf();

        let v: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
        let weighted_s: f64 = s.iter().zip(p).enumerate().map(|(k, (s, p))| k as f64 * s * p).sum();
        // rate at which a node of any class is traced and isolated
        let tracing = alpha * beta * v * self.deg.mean() * eta * weighted_s;

        let (ds, rest) = dy.split_at_mut(n);
        let (dq_s, rest) = rest.split_at_mut(n);
        let (dx, rest) = rest.split_at_mut(n);
        let (dq_i, dr) = rest.split_at_mut(n);
        for k in 0..n {
            let infection = beta * k as f64 * v * s[k];
            ds[k] = -infection - tracing * s[k] + gamma1 * q_s[k];
            dq_s[k] = tracing * s[k] - gamma1 * q_s[k];
            dx[k] = (1.0 - alpha) * infection - tracing * x[k] - gamma * x[k];
            dq_i[k] = alpha * infection + tracing * x[k] - gamma * q_i[k];
            dr[k] = gamma * x[k] + gamma * q_i[k];
        }
        Ok(())
    }
}

/// Derivative of a [`FullState`] under the full system.
pub fn full_rhs(
    state: &FullState,
    params: &EpidemicParams,
    deg: &DegreeDistribution,
    exc: &DegreeDistribution,
) -> Result<FullState> {
    let sys = FullSystem::new(*params, deg, exc)?;
    if !state.consistent() || state.kmax() != deg.kmax() {
        return Err(param("state arrays do not match distribution truncation"));
    }
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    sys.rhs(state.time, &y, &mut dy)?;
    FullState::from_flat(&dy, state.time)
}

/// The five-variable closure `s_k = u^k`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSystem<'a> {
    pub params: EpidemicParams,
    pub deg: &'a DegreeDistribution,
    pub exc: &'a DegreeDistribution,
}

impl<'a> ReducedSystem<'a> {
    pub fn new(params: EpidemicParams, deg: &'a DegreeDistribution, exc: &'a DegreeDistribution) -> Result<Self> {
        params.validate()?;
        check_aligned(deg, exc)?;
        Ok(Self { params, deg, exc })
    }

    pub fn derivative(&self, y: &[f64; 5]) -> Result<[f64; 5]> {
        let mut dy = [0.0; 5];
        self.rhs(0.0, y, &mut dy)?;
        Ok(dy)
    }
}

impl OdeSystem for ReducedSystem<'_> {
    fn dim(&self) -> usize {
        5
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let EpidemicParams {
            alpha,
            beta,
            gamma,
            gamma1,
            eta,
        } = self.params;
        let [u, q_s, v, q_i, _r] = [y[0], y[1], y[2], y[3], y[4]];
        let g1p = self.exc.dg(u);
        if !(g1p >= MIN_EXCESS_SLOPE) {
            return Err(Error::Singularity { u, slope: g1p });
        }
        let g1 = self.exc.g(u);
        let g0p = self.deg.dg(u);
        let k0 = self.deg.mean();
        let tracing = alpha * beta * k0 * eta * v * u * g0p;

        dy[0] = -beta * v * u - tracing * g1 / g1p + gamma1 * q_s / g1p;
        dy[1] = tracing * g1 - gamma1 * q_s;
        dy[2] = (1.0 - alpha) * beta * v * u * g1p - tracing * v - gamma * v;
        dy[3] = alpha * beta * v * u * g1p + tracing * v - gamma * q_i;
        dy[4] = gamma * (v + q_i);
        Ok(())
    }
}

/// Derivative of a [`ReducedState`] under the reduced system.
pub fn reduced_rhs(
    state: &ReducedState,
    params: &EpidemicParams,
    deg: &DegreeDistribution,
    exc: &DegreeDistribution,
) -> Result<ReducedState> {
    let sys = ReducedSystem::new(*params, deg, exc)?;
    let dy = sys.derivative(&state.to_array())?;
    Ok(ReducedState::from_slice(&dy, state.time))
}

fn check_bounds(traj: &Trajectory, names: impl Fn(usize) -> String) -> Result<()> {
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if let Some((i, v)) = s
            .iter()
            .enumerate()
            .find(|(_, v)| !(-STATE_TOL..=1.0 + STATE_TOL).contains(*v))
        {
            return Err(Error::Invariant {
                time: *t,
                detail: format!("{} = {v} outside [-{STATE_TOL}, 1 + {STATE_TOL}]", names(i)),
            });
        }
    }
    Ok(())
}

/// Integrates the full system and checks that every compartment stays in the unit band.
pub fn solve_full(
    params: &EpidemicParams,
    deg: &DegreeDistribution,
    exc: &DegreeDistribution,
    init: &FullState,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    let sys = FullSystem::new(*params, deg, exc)?;
    if !init.consistent() || init.kmax() != deg.kmax() {
        return Err(param("initial state does not match distribution truncation"));
    }
    let mut traj = integrate(&sys, &init.to_flat(), init.time, t_end, opts)?;
    let n = deg.kmax() + 1;
    check_bounds(&traj, |i| format!("{}[{}]", COMPARTMENTS[i / n], i % n))?;
    traj.meta.system = "full".into();
    traj.meta.params = params.to_string();
    traj.meta.distributions = vec![deg.label().to_string(), exc.label().to_string()];
    Ok(traj)
}

/// Integrates the reduced system; columns are `(u, qS, v, qI, r)`.
pub fn solve_reduced(
    params: &EpidemicParams,
    deg: &DegreeDistribution,
    exc: &DegreeDistribution,
    init: &ReducedState,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    let sys = ReducedSystem::new(*params, deg, exc)?;
    let mut traj = integrate(&sys, &init.to_array(), init.time, t_end, opts)?;
    const NAMES: [&str; 5] = ["u", "qS", "v", "qI", "r"];
    check_bounds(&traj, |i| NAMES[i].to_string())?;
    traj.meta.system = "reduced".into();
    traj.meta.params = params.to_string();
    traj.meta.distributions = vec![deg.label().to_string(), exc.label().to_string()];
    Ok(traj)
}

/// Collapses a full trajectory to five scalars `Σ weight_k · compartment_k`.
///
/// Weighting by the degree distribution gives node-level fractions; weighting
/// by the excess distribution gives the edge-level quantities the reduced
/// system tracks.
pub fn aggregate_full(traj: &Trajectory, weights: &DegreeDistribution) -> Result<Trajectory> {
    let n = weights.kmax() + 1;
    if traj.width() != 5 * n {
        return Err(param(format!(
            "trajectory width {} does not match 5 * (kmax + 1) = {}",
            traj.width(),
            5 * n
        )));
    }
    let w = weights.pmf();
    let mut out = traj.map_states(|_, y| {
        (0..5)
            .map(|c| y[c * n..(c + 1) * n].iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    });
    out.meta.system = format!("{}/aggregate[{}]", traj.meta.system, weights.label());
    Ok(out)
}

/// Maps reduced-system samples `(u, qS, v, qI, r)` to edge-level fractions
/// `(g1(u), qS, v, qI, r)`, comparable with [`aggregate_full`] weighted by `exc`.
pub fn reduced_edge_fractions(traj: &Trajectory, exc: &DegreeDistribution) -> Trajectory {
    let mut out = traj.map_states(|_, y| vec![exc.g(y[0]), y[1], y[2], y[3], y[4]]);
    out.meta.system = format!("{}/edge-fractions", traj.meta.system);
    out
}

/// Node-level susceptible fraction `g0(u)` of a reduced trajectory.
pub fn reduced_node_susceptible(traj: &Trajectory, deg: &DegreeDistribution) -> Vec<f64> {
    traj.states.iter().map(|y| deg.g(y[0])).collect()
}

/// `s_k = u^k` for `k = 0..=kmax`.
pub fn expand_reduced(state: &ReducedState, kmax: usize) -> Vec<f64> {
    std::iter::successors(Some(1.0), |p| Some(p * state.u)).take(kmax + 1).collect()
}

/// Closed-form logistic solution of the linearised early-time dynamics of `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyTimeModel {
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub epsilon: f64,
}

impl EarlyTimeModel {
    pub fn new(
        params: &EpidemicParams,
        deg: &DegreeDistribution,
        exc: &DegreeDistribution,
        epsilon: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(param(format!("epsilon = {epsilon} must lie in (0, 1)")));
        }
        let EpidemicParams {
            alpha,
            beta,
            gamma,
            eta,
            ..
        } = *params;
        let k0 = deg.mean();
        let k1 = exc.mean();
        let c1 = alpha * beta * eta * k0 * k0 * (1.0 - epsilon);
        let c2 = (1.0 - alpha) * beta * k1 * (1.0 - epsilon) - gamma;
        if c2.abs() < 1e-14 {
            return Err(Error::Degenerate(format!(
                "c2 = {c2:e} vanishes; the logistic form is invalid at the threshold"
            )));
        }
        let denom = c2 - c1 * epsilon;
        let d1 = if denom == 0.0 { f64::INFINITY } else { epsilon / denom };
        Ok(Self { c1, c2, d1, epsilon })
    }

    pub fn v(&self, t: f64) -> f64 {
        let Self { c1, c2, d1, epsilon } = *self;
        if d1.is_infinite() {
            // c2 = c1 * epsilon: v sits at the logistic fixed point
            return epsilon;
        }
        if c2 > 0.0 {
            c2 * d1 / ((-c2 * t).exp() + c1 * d1)
        } else {
            let e = (c2 * t).exp();
            c2 * d1 * e / (1.0 + c1 * d1 * e)
        }
    }

    /// Right-hand side `c2 v - c1 v^2` of the early-time equation.
    pub fn rhs(&self, v: f64) -> f64 {
        self.c2 * v - self.c1 * v * v
    }
}

pub fn early_time_v(
    t: f64,
    params: &EpidemicParams,
    deg: &DegreeDistribution,
    exc: &DegreeDistribution,
    epsilon: f64,
) -> Result<f64> {
    Ok(EarlyTimeModel::new(params, deg, exc, epsilon)?.v(t))
}

/// `R0 = (1 - alpha) beta K1 / gamma`.
pub fn basic_reproduction_number(params: &EpidemicParams, exc: &DegreeDistribution) -> Result<f64> {
    if !(params.gamma > 0.0) {
        return Err(param("gamma must be positive for R0 to be defined"));
    }
    Ok((1.0 - params.alpha) * params.beta * exc.mean() / params.gamma)
}

/// Pointwise quotient `approx / exact` for every column of two trajectories
/// on the same grid.
pub fn ratio_series(approx: &Trajectory, exact: &Trajectory) -> Result<Vec<(f64, Vec<f64>)>> {
    if approx.len() != exact.len() || approx.width() != exact.width() {
        return Err(param(format!(
            "trajectory shapes differ: {}x{} vs {}x{}",
            approx.len(),
            approx.width(),
            exact.len(),
            exact.width()
        )));
    }
    approx
        .times
        .iter()
        .zip(&exact.times)
        .zip(approx.states.iter().zip(&exact.states))
        .map(|((&ta, &te), (a, e))| {
            if (ta - te).abs() > 1e-9 * ta.abs().max(1.0) {
                return Err(param(format!("time grids differ: {ta} vs {te}")));
            }
            let ratios = a
                .iter()
                .zip(e)
                .map(|(&a, &e)| {
                    if a.abs() < RATIO_FLOOR && e.abs() < RATIO_FLOOR {
                        1.0
                    } else {
                        a / e
                    }
                })
                .collect();
            Ok((ta, ratios))
        })
        .collect()
}
