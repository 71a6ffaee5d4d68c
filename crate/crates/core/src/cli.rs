//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::abm::{simulate_ensemble, Metrics, PolicyParams, Seeding};
use crate::dist::{excess_of, make_poisson, make_powerlaw, DegreeDistribution, DEFAULT_KMAX};
use crate::error::{Error, Result};
use crate::kinetics::{
    aggregate_full, ratio_series, reduced_edge_fractions, solve_full, solve_reduced, EarlyTimeModel,
    EpidemicParams, FullState, ReducedState, SolverOptions, DEFAULT_EPSILON, DEFAULT_T_END,
};
use crate::netgraph::{
    classify_edges, configuration_model, graph_stats, load_edge_list_with_labels, write_id_map,
};
use crate::stability::{linearize, verify_against_ode, Classification};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_TIMEOUT: i32 = 5;

fn probability(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a non-negative number"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "epinet", version, about = "Epidemics with asymptomatic spread, contact tracing and isolation on networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the degree-class system.
    OdeFull(OdeArgs),
    /// Integrate the five-variable reduced system.
    OdeReduced {
        #[command(flatten)]
        ode: OdeArgs,
        /// Also integrate the full system and emit ratio columns.
        #[arg(long)]
        compare: bool,
    },
    /// Evaluate the closed-form early-time solution for v.
    EarlyTime {
        #[command(flatten)]
        ode: OdeArgs,
        #[arg(long)]
        compare: bool,
    },
    /// Linearise the reduced system at a disease-free equilibrium.
    Stability(StabilityArgs),
    /// Descriptive statistics of an edge list.
    Netstat(NetstatArgs),
    /// Sample a configuration-model graph.
    GenGraph(GenGraphArgs),
    /// Agent-based ensemble on a contact graph.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DiseaseArgs {
    #[arg(long, default_value_t = 0.4, value_parser = probability)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.15, value_parser = non_negative)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1, value_parser = non_negative)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1, value_parser = non_negative)]
    pub gamma1: f64,
    #[arg(long, default_value_t = 0.5, value_parser = probability)]
    pub eta: f64,
}

impl DiseaseArgs {
    fn params(&self) -> EpidemicParams {
        EpidemicParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            gamma1: self.gamma1,
            eta: self.eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistName {
    Poisson,
    Powerlaw,
}

#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    #[arg(long, value_enum, default_value_t = DistName::Poisson)]
    pub dist: DistName,
    /// Poisson mean degree.
    #[arg(long, default_value_t = 25.0, value_parser = non_negative)]
    pub mean: f64,
    /// Power-law exponent (negative).
    #[arg(long, default_value_t = -2.5, allow_hyphen_values = true)]
    pub exponent: f64,
    #[arg(long, default_value_t = 1)]
    pub kmin: usize,
    #[arg(long, default_value_t = DEFAULT_KMAX)]
    pub kmax: usize,
}

impl DistArgs {
    fn build(&self) -> Result<(DegreeDistribution, DegreeDistribution)> {
        let deg = match self.dist {
            DistName::Poisson => make_poisson(self.mean, self.kmax)?,
            DistName::Powerlaw => make_powerlaw(self.exponent, self.kmin, self.kmax)?,
        };
        let exc = excess_of(&deg)?;
        Ok((deg, exc))
    }

    fn echo(&self, m: &mut Manifest) {
        m.push("dist", format!("{:?}", self.dist).to_lowercase());
        match self.dist {
            DistName::Poisson => m.push("mean", self.mean),
            DistName::Powerlaw => {
                m.push("exponent", self.exponent);
                m.push("kmin", self.kmin);
            }
        }
        m.push("kmax", self.kmax);
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// CSV destination; a `.manifest` sidecar is written next to it. Defaults to stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub disease: DiseaseArgs,
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long, default_value_t = DEFAULT_T_END, value_parser = positive)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    pub dt: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON, value_parser = probability)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-10, value_parser = positive)]
    pub atol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

impl OdeArgs {
    fn solver(&self) -> SolverOptions {
        SolverOptions::with_tolerances(self.rtol, self.atol).with_sample_dt(self.dt)
    }

    fn echo(&self, m: &mut Manifest) {
        echo_disease(m, &self.disease.params());
        self.dist.echo(m);
        m.push("t_end", self.t_end);
        m.push("dt", self.dt);
        m.push("epsilon", self.epsilon);
        m.push("rtol", self.rtol);
        m.push("atol", self.atol);
    }
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub disease: DiseaseArgs,
    #[command(flatten)]
    pub dist: DistArgs,
    /// Equilibrium coordinate in (0, 1].
    #[arg(long, default_value_t = 0.8, value_parser = positive)]
    pub xi: f64,
    /// Perturbation size for the optional ODE check.
    #[arg(long, default_value_t = 1e-4, value_parser = positive)]
    pub epsilon: f64,
    /// Integrate the reduced system to this time and compare with the limit interval.
    #[arg(long, value_parser = positive)]
    pub verify: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct NetstatArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Write the node relabelling to this file.
    #[arg(long)]
    pub id_map: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenGraphArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub disease: DiseaseArgs,
    /// Quarantine period in time units.
    #[arg(long, default_value_t = 14)]
    pub period: u32,
    #[arg(long, default_value_t = 0.75, value_parser = probability)]
    pub h_overlap: f64,
    /// Transmission rate on close edges; defaults to twice beta.
    #[arg(long, value_parser = non_negative)]
    pub beta_close: Option<f64>,
    /// Transmission rate on normal edges; defaults to beta.
    #[arg(long, value_parser = non_negative)]
    pub beta_normal: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of initially infected nodes; defaults to max(1, round(0.001 n)).
    #[arg(long)]
    pub initial: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Flat `key=value` record written next to every output.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    fn push(&mut self, k: &str, v: impl ToString) {
        self.entries.push((k.to_string(), v.to_string()));
    }

    fn render(&self) -> String {
        self.entries.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k}={v}");
            s
        })
    }
}

fn echo_disease(m: &mut Manifest, p: &EpidemicParams) {
    m.push("alpha", p.alpha);
    m.push("beta", p.beta);
    m.push("gamma", p.gamma);
    m.push("gamma1", p.gamma1);
    m.push("eta", p.eta);
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Domain(_) => EXIT_USAGE,
        Error::Parse { .. } | Error::EmptyInput(_) | Error::Io(_) => EXIT_DATA,
        Error::Timeout { .. } => EXIT_TIMEOUT,
        Error::Singularity { .. }
        | Error::Stiffness { .. }
        | Error::Invariant { .. }
        | Error::Degenerate(_)
        | Error::Generation(_) => EXIT_NUMERIC,
    }
}

fn csv_row(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let row: Vec<String> = fields.into_iter().collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

fn emit(out: &OutArgs, csv: &str, manifest: &Manifest) -> Result<()> {
    match &out.out {
        Some(path) => {
            fs::write(path, csv)?;
            let mut side = path.as_os_str().to_owned();
            side.push(".manifest");
            fs::write(Path::new(&side), manifest.render())?;
        }
        None => io::stdout().lock().write_all(csv.as_bytes())?,
    }
    Ok(())
}

fn ode_full(a: &OdeArgs, m: &mut Manifest) -> Result<String> {
    let (deg, exc) = a.dist.build()?;
    let p = a.disease.params();
    let init = FullState::initial(deg.kmax(), a.epsilon);
    let traj = solve_full(&p, &deg, &exc, &init, a.t_end, &a.solver())?;
    let agg = aggregate_full(&traj, &deg)?;
    a.echo(m);
    let mut csv = String::from("t,s,qS,x,qI,r\n");
    for (t, y) in agg.times.iter().zip(&agg.states) {
        csv_row(&mut csv, std::iter::once(t.to_string()).chain(y.iter().map(f64::to_string)));
    }
    Ok(csv)
}

fn ode_reduced(a: &OdeArgs, compare: bool, m: &mut Manifest) -> Result<String> {
    let (deg, exc) = a.dist.build()?;
    let p = a.disease.params();
    let init = ReducedState::initial(&exc, a.epsilon)?;
    let traj = solve_reduced(&p, &deg, &exc, &init, a.t_end, &a.solver())?;
    a.echo(m);
    m.push("compare", compare);
    let edge = reduced_edge_fractions(&traj, &exc);
    let ratios = if compare {
        let full = solve_full(&p, &deg, &exc, &FullState::initial(deg.kmax(), a.epsilon), a.t_end, &a.solver())?;
        Some(ratio_series(&edge, &aggregate_full(&full, &exc)?)?)
    } else {
        None
    };
    let mut csv = String::from("t,u,s_node,s_edge,qS,v,qI,r");
    if compare {
        csv.push_str(",ratio_s,ratio_qS,ratio_v,ratio_qI,ratio_r");
    }
    csv.push('\n');
    for (i, (t, y)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut f = vec![t.to_string(), y[0].to_string(), deg.g(y[0]).to_string(), exc.g(y[0]).to_string()];
        f.extend(y[1..].iter().map(f64::to_string));
        if let Some(r) = &ratios {
            f.extend(r[i].1.iter().map(f64::to_string));
        }
        csv_row(&mut csv, f);
    }
    Ok(csv)
}

fn early_time(a: &OdeArgs, compare: bool, m: &mut Manifest) -> Result<String> {
    let (deg, exc) = a.dist.build()?;
    let p = a.disease.params();
    let model = EarlyTimeModel::new(&p, &deg, &exc, a.epsilon)?;
    a.echo(m);
    m.push("compare", compare);
    m.push("c1", model.c1);
    m.push("c2", model.c2);
    let mut csv = String::from(if compare { "t,v_early,v_full,ratio\n" } else { "t,v_early\n" });
    if compare {
        let full = solve_full(&p, &deg, &exc, &FullState::initial(deg.kmax(), a.epsilon), a.t_end, &a.solver())?;
        let agg = aggregate_full(&full, &exc)?;
        for (t, y) in agg.times.iter().zip(&agg.states) {
            let ve = model.v(*t);
            csv_row(&mut csv, [t.to_string(), ve.to_string(), y[2].to_string(), (ve / y[2]).to_string()]);
        }
    } else {
        let steps = (a.t_end / a.dt).ceil() as usize;
        for i in 0..=steps {
            let t = (i as f64 * a.dt).min(a.t_end);
            csv_row(&mut csv, [t.to_string(), model.v(t).to_string()]);
        }
    }
    Ok(csv)
}

fn stability(a: &StabilityArgs, m: &mut Manifest) -> Result<String> {
    let (deg, exc) = a.dist.build()?;
    let p = a.disease.params();
    let rep = linearize(a.xi, &p, &deg, &exc)?;
    echo_disease(m, &p);
    a.dist.echo(m);
    m.push("xi", a.xi);
    m.push("epsilon", a.epsilon);
    let class = match rep.classification {
        Classification::Stable => "stable",
        Classification::Unstable => "unstable",
        Classification::Degenerate => "degenerate",
    };
    let mut header = vec![
        "xi", "a", "A", "B", "h_coef", "d1", "d2", "d3", "d4", "M", "m", "L", "U", "J12", "J13", "J22", "J23",
        "classification",
    ];
    let j = rep.jacobian;
    let mut row: Vec<String> = [
        rep.xi, rep.a, rep.hess_a, rep.hess_b, rep.h_coef, rep.d1, rep.d2, rep.d3, rep.d4, rep.big_m, rep.small_m,
        rep.lower, rep.upper, j[0][1], j[0][2], j[1][1], j[1][2],
    ]
    .iter()
    .map(f64::to_string)
    .collect();
    row.push(class.into());
    if let Some(t_end) = a.verify {
        m.push("verify_t_end", t_end);
        let cmp = verify_against_ode(&rep, a.epsilon, t_end)?;
        header.extend(["u_dev", "qS_end", "v_end", "within_interval", "decayed", "v_exceeds_10eps_at"]);
        row.extend([
            cmp.deviation.to_string(),
            cmp.terminal[1].to_string(),
            cmp.terminal[2].to_string(),
            cmp.within_interval.to_string(),
            cmp.decayed.to_string(),
            cmp.v_exceeds_10eps_at.map(|t| t.to_string()).unwrap_or_default(),
        ]);
    }
    let mut csv = header.join(",") + "\n";
    csv_row(&mut csv, row);
    Ok(csv)
}

fn netstat(a: &NetstatArgs, m: &mut Manifest) -> Result<String> {
    let loaded = load_edge_list_with_labels(&a.graph)?;
    if let Some(p) = &a.id_map {
        write_id_map(p, &loaded.labels)?;
    }
    let s = graph_stats(&loaded.graph);
    m.push("graph", a.graph.display());
    m.push("dropped_duplicates", loaded.dropped.duplicates);
    m.push("dropped_self_loops", loaded.dropped.self_loops);
    let mut csv = String::from("n,m,K0,rho,C,C_local\n");
    csv_row(
        &mut csv,
        [s.n.to_string(), s.m.to_string(), s.k0.to_string(), s.rho.to_string(), s.c.to_string(), s.c_local.to_string()],
    );
    Ok(csv)
}

fn gen_graph(a: &GenGraphArgs, m: &mut Manifest) -> Result<String> {
    let (deg, _) = a.dist.build()?;
    let g = configuration_model(&deg, a.n, a.seed)?;
    a.dist.echo(m);
    m.push("n", a.n);
    m.push("seed", a.seed);
    m.push("m", g.m());
    // whitespace edge list, so the output can be fed back to netstat and simulate
    let mut text = format!("# n={} m={}\n", g.n(), g.m());
    for (u, v) in g.edges() {
        let _ = writeln!(text, "{u} {v}");
    }
    Ok(text)
}

fn simulate(a: &SimulateArgs, m: &mut Manifest) -> Result<String> {
    let g = load_edge_list_with_labels(&a.graph)?.graph;
    let disease = a.disease.params();
    let mut policy = PolicyParams::from_disease(&disease, a.period, a.h_overlap);
    if let Some(b) = a.beta_close {
        policy.beta_close = b;
    }
    if let Some(b) = a.beta_normal {
        policy.beta_normal = b;
    }
    policy.validate()?;
    let typed = classify_edges(&g, a.h_overlap)?;
    let seeds = a.initial.map_or(Seeding::Default, Seeding::Count);
    let summary = simulate_ensemble(&typed, &disease, &policy, &seeds, a.runs, a.seed)?;

    m.push("graph", a.graph.display());
    echo_disease(m, &disease);
    m.push("period", a.period);
    m.push("h_overlap", a.h_overlap);
    m.push("beta_close", policy.beta_close);
    m.push("beta_normal", policy.beta_normal);
    m.push("runs", a.runs);
    m.push("base_seed", a.seed);
    m.push("initial", a.initial.map(|c| c.to_string()).unwrap_or_else(|| "default".into()));

    let mut csv = String::from("run,seed");
    for name in Metrics::NAMES {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for (i, r) in summary.runs.iter().enumerate() {
        let f = [i.to_string(), r.seed.to_string()];
        csv_row(&mut csv, f.into_iter().chain(r.metrics.to_array().map(|x| x.to_string())));
    }
    for (label, metrics) in [("mean", summary.mean), ("std", summary.std)] {
        let f = [label.to_string(), String::new()];
        csv_row(&mut csv, f.into_iter().chain(metrics.to_array().map(|x| x.to_string())));
    }
    Ok(csv)
}

/// Executes a parsed command and returns the process exit code.
pub fn execute(cli: &Cli, argv: &[String]) -> i32 {
    let started = Instant::now();
    let mut manifest = Manifest::default();
    manifest.push("version", env!("CARGO_PKG_VERSION"));
    manifest.push("argv", argv.join(" "));
    let (name, out, result) = match &cli.command {
        Command::OdeFull(a) => ("ode-full", &a.out, ode_full(a, &mut manifest)),
        Command::OdeReduced { ode, compare } => ("ode-reduced", &ode.out, ode_reduced(ode, *compare, &mut manifest)),
        Command::EarlyTime { ode, compare } => ("early-time", &ode.out, early_time(ode, *compare, &mut manifest)),
        Command::Stability(a) => ("stability", &a.out, stability(a, &mut manifest)),
        Command::Netstat(a) => ("netstat", &a.out, netstat(a, &mut manifest)),
        Command::GenGraph(a) => ("gen-graph", &a.out, gen_graph(a, &mut manifest)),
        Command::Simulate(a) => ("simulate", &a.out, simulate(a, &mut manifest)),
    };
    let written = result.and_then(|csv| {
        manifest.push("command", name);
        manifest.push("wall_clock_seconds", started.elapsed().as_secs_f64());
        emit(out, &csv, &manifest)
    });
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("epinet {name}: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    match Cli::try_parse_from(&argv) {
        Ok(cli) => {
            let shown: Vec<String> = argv.iter().map(|s| s.to_string_lossy().into_owned()).collect();
            execute(&cli, &shown)
        }
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                0
            }
        }
    }
}
