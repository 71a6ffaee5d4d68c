//! Local analysis of the reduced system around disease-free equilibria `(ξ, 0, 0)`.
//!
//! The state is restricted to `(u, qS, v)`; `qI` and `r` do not feed back.

use crate::dist::DegreeDistribution;
use crate::error::{param, Error, Result};
use crate::kinetics::{solve_reduced, EpidemicParams, ReducedState, SolverOptions};

/// `|a|` below this is reported as [`Classification::Degenerate`].
pub const DEGENERATE_A: f64 = 1e-12;
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Threshold under which `qS` and `v` count as decayed.
pub const DECAY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Unstable,
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub xi: f64,
    pub jacobian: [[f64; 3]; 3],
    /// Mixed second derivative of the `u` equation in `(u, qS)`.
    pub hess_a: f64,
    /// Mixed second derivative of the `u` equation in `(u, v)`.
    pub hess_b: f64,
    pub a: f64,
    pub h_coef: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub big_m: f64,
    pub small_m: f64,
    pub lower: f64,
    pub upper: f64,
    pub classification: Classification,
    /// `d2 / γ1`, kept separately so that `γ1 = 0` stays finite.
    d2_over_gamma1: f64,
    pub params: EpidemicParams,
    pub deg: DegreeDistribution,
    pub exc: DegreeDistribution,
}

/// `a = (1 - α) β ξ g1'(ξ) - γ`.
pub fn growth_rate(xi: f64, params: &EpidemicParams, exc: &DegreeDistribution) -> f64 {
    (1.0 - params.alpha) * params.beta * xi * exc.dg(xi) - params.gamma
}

pub fn linearize(
    xi: f64,
    params: &EpidemicParams,
    deg: &DegreeDistribution,
    exc: &DegreeDistribution,
) -> Result<StabilityReport> {
    params.validate()?;
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::Domain(format!("xi = {xi} must lie in (0, 1]")));
    }
    let EpidemicParams {
        alpha,
        beta,
        gamma1,
        eta,
        ..
    } = *params;
    let k0 = deg.mean();
    let (g0p, g0pp) = (deg.dg(xi), deg.d2g(xi));
    let (g1, g1p, g1pp) = (exc.g(xi), exc.dg(xi), exc.d2g(xi));
    if !(g1p > 0.0) {
        return Err(Error::Singularity { u: xi, slope: g1p });
    }
    let trace = alpha * beta * k0 * eta;
    let a = growth_rate(xi, params, exc);

    let j12 = gamma1 / g1p;
    let j13 = -beta * xi - trace * xi * g0p * g1 / g1p;
    let j23 = trace * xi * g0p * g1;
    let jacobian = [[0.0, j12, j13], [0.0, -gamma1, j23], [0.0, 0.0, a]];

    let hess_a = -gamma1 * g1pp / (g1p * g1p);
    let hess_b = -beta
        - trace
            * (g0p * g1 / g1p + xi * g0pp * g1 / g1p - xi * g0p * g1pp * g1 / (g1p * g1p) + xi * g0p);

    if a + gamma1 == 0.0 {
        return Err(Error::Degenerate(
            "a + gamma1 = 0 leaves the perturbation coefficient h undefined".into(),
        ));
    }
    let h_coef = j23 / (a + gamma1);
    let d1 = hess_a * h_coef + hess_b;
    let d2 = hess_a * (1.0 - h_coef);
    let d3 = h_coef * j12 + j13;
    let d4 = (1.0 - h_coef) * j12;
    let d2_over_gamma1 = -g1pp * (1.0 - h_coef) / (g1p * g1p);

    let big_m = a.max(-gamma1);
    let small_m = a.min(-gamma1);
    let upper = (d3.abs() + d4.abs()) / small_m.abs();
    let classification = if a.abs() < DEGENERATE_A {
        Classification::Degenerate
    } else if a < 0.0 {
        Classification::Stable
    } else {
        Classification::Unstable
    };

    Ok(StabilityReport {
        xi,
        jacobian,
        hess_a,
        hess_b,
        a,
        h_coef,
        d1,
        d2,
        d3,
        d4,
        big_m,
        small_m,
        lower: -upper,
        upper,
        classification,
        d2_over_gamma1,
        params: *params,
        deg: deg.clone(),
        exc: exc.clone(),
    })
}

/// Closed-form solution of the perturbation equations about `(ξ, 0, 0)`.
#[derive(Debug, Clone)]
pub struct PerturbationSolution {
    pub epsilon: f64,
    pub limit_interval: (f64, f64),
    a: f64,
    gamma1: f64,
    h: f64,
    d1_over_a: f64,
    d2_over_gamma1: f64,
    d3: f64,
    d4: f64,
    horizon: f64,
}

pub fn perturbation_solution(report: &StabilityReport, epsilon: f64) -> Result<PerturbationSolution> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(param(format!("epsilon = {epsilon} must lie in (0, 1e-2]")));
    }
    if report.a == 0.0 {
        return Err(Error::Degenerate("a = 0: the perturbation solution is undefined".into()));
    }
    let gamma1 = report.params.gamma1;
    // slowest decay among the exponentials that actually appear in the integrand
    let slowest = if gamma1 > 0.0 && report.d4 != 0.0 {
        report.a.abs().min(gamma1)
    } else {
        report.a.abs()
    };
    Ok(PerturbationSolution {
        epsilon,
        limit_interval: (epsilon * (1.0 + report.lower), epsilon * (1.0 + report.upper)),
        a: report.a,
        gamma1,
        h: report.h_coef,
        d1_over_a: report.d1 / report.a,
        d2_over_gamma1: report.d2_over_gamma1,
        d3: report.d3,
        d4: report.d4,
        horizon: 50.0 / slowest,
    })
}

impl PerturbationSolution {
    pub fn y3(&self, t: f64) -> f64 {
        self.epsilon * (self.a * t).exp()
    }

    pub fn y2(&self, t: f64) -> f64 {
        self.epsilon * (self.h * (self.a * t).exp() + (1.0 - self.h) * (-self.gamma1 * t).exp())
    }

    fn phi(&self, t: f64) -> f64 {
        self.epsilon * (self.d1_over_a * (self.a * t).exp() - self.d2_over_gamma1 * (-self.gamma1 * t).exp())
    }

    fn integrand(&self, y: f64) -> f64 {
        let lin = self.d3 * (self.a * y).exp() + self.d4 * (-self.gamma1 * y).exp();
        (-self.phi(y)).exp() * self.epsilon * lin
    }

    pub fn y1(&self, t: f64) -> f64 {
        let integral = adaptive_simpson(&|y| self.integrand(y), 0.0, t, QUADRATURE_TOL);
        self.phi(t).exp() * (self.epsilon * (-self.phi(0.0)).exp() + integral)
    }

    /// `lim_{t→∞} y1(t)` for a stable equilibrium, evaluated on `[0, horizon]`.
    pub fn y1_limit(&self) -> Result<f64> {
        if self.a > 0.0 {
            return Err(Error::Degenerate("y1 diverges when a > 0".into()));
        }
        let integral = adaptive_simpson(&|y| self.integrand(y), 0.0, self.horizon, QUADRATURE_TOL);
        // phi(∞) is 0 when γ1 > 0 and a constant otherwise
        let phi_inf = if self.gamma1 > 0.0 {
            0.0
        } else {
            -self.epsilon * self.d2_over_gamma1
        };
        Ok(phi_inf.exp() * (self.epsilon * (-self.phi(0.0)).exp() + integral))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeComparison {
    pub epsilon: f64,
    pub t_end: f64,
    /// `(u, qS, v)` at `t_end`.
    pub terminal: [f64; 3],
    /// `u(t_end) - ξ`.
    pub deviation: f64,
    pub limit_interval: (f64, f64),
    pub within_interval: bool,
    pub decayed: bool,
    /// First sample time at which `v > 10 ε`, if any.
    pub v_exceeds_10eps_at: Option<f64>,
}

/// Integrates the reduced system from `(ξ + ε, ε, ε)` and compares the terminal
/// state with the limit interval.
pub fn verify_against_ode(report: &StabilityReport, epsilon: f64, t_end: f64) -> Result<OdeComparison> {
    if report.classification == Classification::Degenerate {
        return Err(Error::Degenerate("a is numerically zero".into()));
    }
    if report.xi + epsilon > 1.0 {
        return Err(param(format!("xi + epsilon = {} exceeds 1", report.xi + epsilon)));
    }
    let interval = (epsilon * (1.0 + report.lower), epsilon * (1.0 + report.upper));
    let init = ReducedState {
        u: report.xi + epsilon,
        q_s: epsilon,
        v: epsilon,
        q_i: 0.0,
        r: 0.0,
        time: 0.0,
    };
    let opts = SolverOptions::with_tolerances(1e-10, 1e-14)
        .with_sample_dt(0.05);
    let traj = solve_reduced(&report.params, &report.deg, &report.exc, &init, t_end, &opts)?;
    let (_, last) = traj.last().ok_or_else(|| param("empty trajectory"))?;
    let terminal = [last[0], last[1], last[2]];
    let deviation = terminal[0] - report.xi;
    let v_exceeds_10eps_at = traj
        .times
        .iter()
        .zip(&traj.states)
        .find(|(_, y)| y[2] > 10.0 * epsilon)
        .map(|(t, _)| *t);
    Ok(OdeComparison {
        epsilon,
        t_end,
        terminal,
        deviation,
        limit_interval: interval,
        within_interval: deviation > interval.0 && deviation < interval.1,
        decayed: terminal[1].abs() < DECAY_TOL && terminal[2].abs() < DECAY_TOL,
        v_exceeds_10eps_at,
    })
}
