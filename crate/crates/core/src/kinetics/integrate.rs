//! Dormand–Prince 5(4) integrator with adaptive step control and
//! continuous (dense) output.

use crate::error::{param, Error, Result};

/// Autonomous or time-dependent first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.1)(t, y, dy);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub sample_dt: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-9,
            sample_dt: 0.5,
            min_step: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        self.sample_dt = dt;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(param("solver tolerances must be positive"));
        }
        if !(self.sample_dt > 0.0) {
            return Err(param("sample interval must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub system: String,
    pub params: String,
    pub distributions: Vec<String>,
    pub rtol: f64,
    pub atol: f64,
}

/// Samples `(t_i, y(t_i))` on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn width(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        let t = *self.times.last()?;
        Some((t, self.states.last()?.as_slice()))
    }

    /// Values of one state component across all samples.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    /// Applies `f` to each sample, producing a new trajectory on the same grid.
    pub fn map_states(&self, mut f: impl FnMut(f64, &[f64]) -> Vec<f64>) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.times.iter().zip(&self.states).map(|(&t, s)| f(t, s)).collect(),
            meta: self.meta.clone(),
        }
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output coefficients (Hairer & Wanner).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
    cont: [Vec<f64>; 5],
}

impl Workspace {
    fn new(n: usize) -> Self {
        let v = || vec![0.0; n];
        Self {
            k: [v(), v(), v(), v(), v(), v(), v()],
            tmp: v(),
            y_new: v(),
            err: v(),
            cont: [v(), v(), v(), v(), v()],
        }
    }
}

fn stage(tmp: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        tmp[i] = y[i] + h * acc;
    }
}

fn scaled_norm(v: &[f64], y0: &[f64], y1: &[f64], opts: &SolverOptions) -> f64 {
    let n = v.len().max(1) as f64;
    let sum: f64 = v
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<S: OdeSystem>(sys: &S, t0: f64, y0: &[f64], f0: &[f64], opts: &SolverOptions, span: f64) -> Result<f64> {
    let d0 = scaled_norm(y0, y0, y0, opts);
    let d1 = scaled_norm(f0, y0, y0, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    sys.rhs(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = scaled_norm(&diff, y0, y0, opts);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Integrates `sys` from `t0` to `t_end`, sampling the dense output every
/// `opts.sample_dt` (and at `t_end` itself).
pub fn integrate<S: OdeSystem>(sys: &S, y0: &[f64], t0: f64, t_end: f64, opts: &SolverOptions) -> Result<Trajectory> {
    opts.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(param(format!("initial state has length {}, system dimension is {n}", y0.len())));
    }
    if !(t_end > t0) {
        return Err(param(format!("t_end {t_end} must exceed t0 {t0}")));
    }

    let span = t_end - t0;
    let mut grid: Vec<f64> = (0..)
        .map(|i| t0 + i as f64 * opts.sample_dt)
        .take_while(|&t| t < t_end - 1e-9 * opts.sample_dt)
        .collect();
    grid.push(t_end);

    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        meta: TrajectoryMeta {
            rtol: opts.rtol,
            atol: opts.atol,
            ..TrajectoryMeta::default()
        },
    };
    traj.times.push(t0);
    traj.states.push(y0.to_vec());
    let mut next_sample = 1;

    let mut ws = Workspace::new(n);
    let mut y = y0.to_vec();
    let mut t = t0;
    sys.rhs(t, &y, &mut ws.k[0])?;
    let mut h = initial_step(sys, t, &y, &ws.k[0].clone(), opts, span)?;
    let mut steps = 0usize;
    let mut last_rejected = false;

    while t < t_end {
        if steps >= opts.max_steps {
            return Err(Error::Stiffness { time: t, step: h });
        }
        steps += 1;
        if h < opts.min_step {
            return Err(Error::Stiffness { time: t, step: h });
        }
        let last_step = t + h >= t_end;
        if last_step {
            h = t_end - t;
        }

        let [k1, k2, k3, k4, k5, k6, k7] = &mut ws.k;
        stage(&mut ws.tmp, &y, h, &[(A21, k1)]);
        sys.rhs(t + C2 * h, &ws.tmp, k2)?;
        stage(&mut ws.tmp, &y, h, &[(A31, k1), (A32, k2)]);
        sys.rhs(t + C3 * h, &ws.tmp, k3)?;
        stage(&mut ws.tmp, &y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
        sys.rhs(t + C4 * h, &ws.tmp, k4)?;
        stage(&mut ws.tmp, &y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        sys.rhs(t + C5 * h, &ws.tmp, k5)?;
        stage(&mut ws.tmp, &y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        sys.rhs(t + h, &ws.tmp, k6)?;
        stage(&mut ws.y_new, &y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        sys.rhs(t + h, &ws.y_new, k7)?;

        for i in 0..n {
            ws.err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = scaled_norm(&ws.err, &y, &ws.y_new, opts);

        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).max(FAC_MIN)
            } else {
                FAC_MIN
            };
            h *= fac;
            last_rejected = true;
            continue;
        }

        // accepted: build the continuous extension on [t, t + h]
        for i in 0..n {
            let dy = ws.y_new[i] - y[i];
            let bspl = h * k1[i] - dy;
            ws.cont[0][i] = y[i];
            ws.cont[1][i] = dy;
            ws.cont[2][i] = bspl;
            ws.cont[3][i] = dy - h * k7[i] - bspl;
            ws.cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let t_new = if last_step { t_end } else { t + h };
        while next_sample < grid.len() && grid[next_sample] <= t_new {
            let ts = grid[next_sample];
            let state = if next_sample == grid.len() - 1 && last_step {
                ws.y_new.clone()
            } else {
                let theta = (ts - t) / h;
                let theta1 = 1.0 - theta;
                (0..n)
                    .map(|i| {
                        let c = &ws.cont;
                        c[0][i] + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])))
                    })
                    .collect()
            };
            traj.times.push(ts);
            traj.states.push(state);
            next_sample += 1;
        }

        std::mem::swap(&mut y, &mut ws.y_new);
        ws.k.swap(0, 6);
        t = t_new;

        let mut fac = if err == 0.0 { FAC_MAX } else { SAFETY * err.powf(-0.2) };
        fac = fac.clamp(FAC_MIN, FAC_MAX);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = (h * fac).min(span);
    }

    Ok(traj)
}
