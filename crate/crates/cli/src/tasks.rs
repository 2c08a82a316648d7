//! The nine tasks: key tables and runners.

use std::fmt;

use hjhom::effective::{
    closure_csv, estimate_mbar, hbar_table_delta, homogenization_closure, invert_metric_to_hbar, legendre, oracle_1d,
    property_suite, solvability_hbar, ClosureSetup, DeltaSchedule, HbarPoint, HbarTable, MetricSetup,
    PropertyConstants, Route,
};
use hjhom::env::{cloud_to_text, sample_cluster_cloud, sample_poisson_cloud, BumpProfile, EnvironmentSample};
use hjhom::hamiltonian::{Diffusion, Form, HamiltonianSpec};
use hjhom::numerics::{Grid, ScalarField, MAX_DIM};
use hjhom::solvers::{
    feynman_kac_metric, metric_box, probe_directions, solve_delta, solve_metric, source_set, DeltaOptions, FkOptions,
    MetricOptions,
};
use hjhom::Error;
use log::{info, warn};

use crate::artifacts::Outputs;
use crate::config::{key, optional, required, ConfigError, Key, Settings};
use crate::expr::Expr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    SampleEnv,
    SolveDelta,
    SolveMetric,
    EstimateHbar,
    ProfileMbar,
    Closure,
    FeynmanKac,
    PropertySuite,
    Oracle1d,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config: {e}"),
            RunError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

impl RunError {
    /// 2 for numerical failures, 3 for bad input, 1 for i/o.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 3,
            RunError::Core(e) => match e.root() {
                Error::Divergence { .. } | Error::Solver { .. } | Error::Budget { .. } | Error::Oracle(_) => 2,
                Error::Io { .. } => 1,
                _ => 3,
            },
        }
    }
}

fn bad(key: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("`{key}`: {msg}"))
}

const COMMON: &[Key] = &[
    key("environment.process", "poisson"),
    key("environment.nu", "1.0"),
    key("environment.offspring_mean", "4.0"),
    key("environment.offspring_spread", "0.5"),
    key("environment.radius", "0.5"),
    key("environment.side", "8.0"),
    key("environment.dim", "2"),
    key("environment.n", "64"),
    key("environment.seeds", "0"),
    key("hamiltonian.form", "separated"),
    key("hamiltonian.gamma", "2.0"),
    key("hamiltonian.c0", "1.0"),
    key("hamiltonian.sigma2", "0.0"),
    key("output.dir", "out"),
    optional("task.kind"),
];

const DELTA: &[Key] = &[
    key("task.deltas", "0.025, 0.0125, 0.00625"),
    key("task.tol", "1e-7"),
    key("task.max_iters", "20000"),
];

const METRIC: &[Key] = &[
    key("task.half", "64"),
    key("task.center", "origin"),
    key("task.t", "auto"),
    key("task.metric_tol", "1e-6"),
    key("task.max_rounds", "50"),
    key("task.slope_fraction", "0.02"),
    key("task.viscous_delta", "1e-3"),
    optional("task.eps_phys"),
];

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::SampleEnv => "sample-env",
            Task::SolveDelta => "solve-delta",
            Task::SolveMetric => "solve-metric",
            Task::EstimateHbar => "estimate-hbar",
            Task::ProfileMbar => "profile-mbar",
            Task::Closure => "closure",
            Task::FeynmanKac => "feynman-kac",
            Task::PropertySuite => "property-suite",
            Task::Oracle1d => "oracle-1d",
        }
    }

    pub fn keys(self) -> Vec<Key> {
        let mut k = COMMON.to_vec();
        match self {
            Task::SampleEnv => {}
            Task::SolveDelta => k.extend([
                required("task.p"),
                key("task.delta", "0.0125"),
                key("task.tol", "1e-7"),
                key("task.max_iters", "20000"),
            ]),
            Task::SolveMetric => {
                k.extend([required("task.p"), required("task.mu")]);
                k.extend(METRIC);
            }
            Task::EstimateHbar => {
                k.extend([
                    required("task.p"),
                    key("task.route", "delta"),
                    optional("task.mu_grid"),
                    optional("task.bracket"),
                    key("task.bisection_tol", "0.01"),
                ]);
                k.extend(DELTA);
                k.extend(METRIC);
            }
            Task::ProfileMbar => {
                k.extend([key("task.p", "origin"), required("task.mu")]);
                k.extend(METRIC);
            }
            Task::Closure => {
                k.extend([
                    key("task.p_max", "3.0"),
                    key("task.p_step", "0.5"),
                    key("task.vmax", "4.0"),
                    key("task.v_points", "41"),
                    key("task.epsilons", "0.2, 0.1, 0.05"),
                    key("task.t_final", "0.5"),
                    key("task.lo", "-2.0"),
                    key("task.side", "4.0"),
                    key("task.window_half", "0.8"),
                    key("task.window_step", "0.1"),
                    key("task.u0", "min(sqrt(x^2 + y^2), 1.0)"),
                ]);
                k.extend(DELTA);
            }
            Task::FeynmanKac => k.extend([
                required("task.mu"),
                required("task.points"),
                key("task.center", "middle"),
                key("task.n_paths", "4000"),
                key("task.dt", "2e-3"),
                key("task.max_steps", "200000"),
                key("task.mc_seed", "0"),
            ]),
            Task::PropertySuite => {
                k.extend([
                    required("task.p"),
                    key("task.coercivity", "4.0"),
                    key("task.lipschitz", "2.0"),
                    key("task.flat_tol", "0.02"),
                    key("task.flat_spot", "auto"),
                ]);
                k.extend(DELTA);
            }
            Task::Oracle1d => k.extend([required("task.p"), key("task.potential", "0")]),
        }
        k
    }

    pub fn run(self, s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
        if let Ok(kind) = s.str("task.kind") {
            if kind != self.name() {
                return Err(bad("task.kind", format!("`{kind}` does not match the subcommand `{}`", self.name())).into());
            }
        }
        match self {
            Task::SampleEnv => sample_env(s, seed_offset, out),
            Task::SolveDelta => run_solve_delta(s, seed_offset, out),
            Task::SolveMetric => run_solve_metric(s, seed_offset, out),
            Task::EstimateHbar => estimate_hbar(s, seed_offset, out),
            Task::ProfileMbar => profile_mbar(s, seed_offset, out),
            Task::Closure => closure(s, seed_offset, out),
            Task::FeynmanKac => feynman_kac(s, seed_offset, out),
            Task::PropertySuite => run_property_suite(s, seed_offset, out),
            Task::Oracle1d => run_oracle_1d(s, out),
        }
    }
}

fn dim(s: &Settings) -> Result<usize, ConfigError> {
    match s.usize("environment.dim")? {
        d @ 1..=MAX_DIM => Ok(d),
        d => Err(bad("environment.dim", format!("must be 1 or 2, got {d}"))),
    }
}

fn hamiltonian(s: &Settings) -> Result<HamiltonianSpec, RunError> {
    let form = match s.str("hamiltonian.form")? {
        "separated" => Form::Separated,
        "fpp" => Form::Fpp,
        f => return Err(bad("hamiltonian.form", format!("expected `separated` or `fpp`, got `{f}`")).into()),
    };
    let sigma2 = s.f64("hamiltonian.sigma2")?;
    let diffusion = if sigma2 == 0.0 { Diffusion::None } else { Diffusion::Isotropic { sigma2 } };
    HamiltonianSpec::new(s.f64("hamiltonian.gamma")?, s.f64("hamiltonian.c0")?, form, diffusion)
        .map_err(|e| e.context("hamiltonian block").into())
}

struct Env {
    seed: u64,
    sample: EnvironmentSample,
}

fn environments(s: &Settings, seed_offset: u64) -> Result<Vec<Env>, RunError> {
    let d = dim(s)?;
    let side = s.f64("environment.side")?;
    let n = s.usize("environment.n")?;
    let grid = Grid::periodic_box(d, n, side).map_err(|e| e.context("environment grid"))?;
    let profile = BumpProfile::new(s.f64("environment.radius")?).map_err(|e| e.context("environment.radius"))?;
    let nu = s.f64("environment.nu")?;
    let process = s.str("environment.process")?;
    let mut out = Vec::new();
    for seed in s.u64_list("environment.seeds")? {
        let seed = seed + seed_offset;
        let cloud = match process {
            "poisson" => sample_poisson_cloud(nu, side, d, seed),
            "cluster" => sample_cluster_cloud(
                nu,
                s.f64("environment.offspring_mean")?,
                s.f64("environment.offspring_spread")?,
                side,
                d,
                seed,
            ),
            p => return Err(bad("environment.process", format!("expected `poisson` or `cluster`, got `{p}`")).into()),
        }
        .map_err(|e| e.context(format!("environment seed {seed}")))?;
        out.push(Env {
            seed,
            sample: EnvironmentSample::new(cloud, profile, &grid)?,
        });
    }
    Ok(out)
}

fn potentials(envs: &[Env]) -> Vec<ScalarField> {
    envs.iter().map(|e| e.sample.potential.clone()).collect()
}

fn fmt_p(p: &[f64; MAX_DIM], dim: usize) -> String {
    p[..dim].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// A point key that also accepts `origin`.
fn point_or_origin(s: &Settings, key: &str, dim: usize) -> Result<[f64; MAX_DIM], ConfigError> {
    if s.str(key)? == "origin" {
        Ok([0.0; MAX_DIM])
    } else {
        s.point(key, dim)
    }
}

/// Raster node nearest to the configured centre.
fn center_node(s: &Settings, grid: &Grid) -> Result<usize, ConfigError> {
    let c = point_or_origin(s, "task.center", grid.dim())?;
    let n = grid.n() as i64;
    let mut ij = [0usize; MAX_DIM];
    for a in 0..grid.dim() {
        ij[a] = ((c[a] / grid.h()).round() as i64).rem_euclid(n) as usize;
    }
    Ok(grid.index(ij))
}

fn metric_setup(s: &Settings, grid: &Grid) -> Result<MetricSetup, ConfigError> {
    let half = s.usize("task.half")?;
    if half < 2 {
        return Err(bad("task.half", "need at least 2"));
    }
    let eps_phys = if s.has("task.eps_phys") { Some(s.f64("task.eps_phys")?) } else { None };
    Ok(MetricSetup {
        half,
        center: center_node(s, grid)?,
        options: MetricOptions {
            tol: s.f64("task.metric_tol")?,
            max_rounds: s.usize("task.max_rounds")?,
            slope_fraction: s.f64("task.slope_fraction")?,
            viscous_delta: s.f64("task.viscous_delta")?,
        },
        eps_phys,
    })
}

/// `auto` is `r/4, r/2, r` with `r` just inside the box.
fn t_schedule(s: &Settings, reach: f64) -> Result<Vec<f64>, ConfigError> {
    if s.str("task.t")? == "auto" {
        let r = reach * 31.0 / 32.0;
        Ok(vec![r / 4.0, r / 2.0, r])
    } else {
        let mut t = s.f64_list("task.t")?;
        t.sort_by(f64::total_cmp);
        Ok(t)
    }
}

fn delta_schedule(s: &Settings) -> Result<DeltaSchedule, ConfigError> {
    let mut deltas = s.f64_list("task.deltas")?;
    deltas.sort_by(|a, b| b.total_cmp(a));
    Ok(DeltaSchedule {
        deltas,
        tol: s.f64("task.tol")?,
        max_iters: s.usize("task.max_iters")?,
    })
}

fn sample_env(s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
    for e in environments(s, seed_offset)? {
        let seed = e.seed;
        out.write(&format!("cloud_seed{seed}.txt"), cloud_to_text(&e.sample.cloud).as_bytes())?;
        out.field(&format!("potential_seed{seed}.hjf"), &e.sample.potential)?;
        out.field_dat(&format!("potential_seed{seed}.dat"), &e.sample.potential, [0.0; MAX_DIM])?;
        info!("seed {seed}: {} points", e.sample.cloud.len());
    }
    Ok(())
}

fn run_solve_delta(s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
    let d = dim(s)?;
    let ham = hamiltonian(s)?;
    let p = s.point("task.p", d)?;
    let delta = s.f64("task.delta")?;
    let opts = DeltaOptions {
        tol: s.f64("task.tol")?,
        max_iters: s.usize("task.max_iters")?,
        ..DeltaOptions::default()
    };
    let mut summary = String::from("seed,delta,hbar_estimate,residual,iterations,max_gradient\n");
    for e in environments(s, seed_offset)? {
        let seed = e.seed;
        let r = solve_delta(&e.sample, &ham, p, delta, &opts).map_err(|err| err.context(format!("solve-delta seed {seed}")))?;
        out.field(&format!("v_seed{seed}.hjf"), &r.v)?;
        out.field_dat(&format!("v_seed{seed}.dat"), &r.v, [0.0; MAX_DIM])?;
        let mut hist = String::from("round,residual\n");
        for (k, x) in r.history.iter().enumerate() {
            hist.push_str(&format!("{},{x}\n", k + 1));
        }
        out.write(&format!("history_seed{seed}.csv"), hist.as_bytes())?;
        summary.push_str(&format!(
            "{seed},{delta},{},{},{},{}\n",
            r.hbar_estimate(),
            r.residual,
            r.iterations,
            r.max_gradient
        ));
    }
    out.write("summary.csv", summary.as_bytes())?;
    Ok(())
}

fn run_solve_metric(s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
    let d = dim(s)?;
    let ham = hamiltonian(s)?;
    let p = s.point("task.p", d)?;
    let mu = s.f64("task.mu")?;
    let envs = environments(s, seed_offset)?;
    let setup = metric_setup(s, envs[0].sample.potential.grid())?;
    let mut slopes = String::from("seed,direction,slope\n");
    let mut summary = String::from("seed,mu,feasible,rounds,slope_tol\n");
    for e in &envs {
        let seed = e.seed;
        let (b, c) = metric_box(&e.sample.potential, setup.center, setup.half)?;
        let src = source_set(b.grid(), c, &ham, setup.eps_phys);
        let sol = solve_metric(&b, &ham, p, mu, &src, c, &setup.options)
            .map_err(|err| err.context(format!("solve-metric seed {seed}")))?;
        let origin = b.grid().position(c).map(|x| -x);
        out.field(&format!("m_seed{seed}.hjf"), &sol.m)?;
        out.field_dat(&format!("m_seed{seed}.dat"), &sol.m, origin)?;
        for (k, (_, v)) in sol.asymptotic_slopes.iter().enumerate() {
            slopes.push_str(&format!("{seed},{k},{v}\n"));
        }
        if !sol.feasible {
            warn!("seed {seed}: μ = {mu} is below the threshold");
        }
        summary.push_str(&format!("{seed},{mu},{},{},{}\n", sol.feasible, sol.rounds, sol.slope_tol));
    }
    out.write("slopes.csv", slopes.as_bytes())?;
    out.write("summary.csv", summary.as_bytes())?;
    Ok(())
}

fn hbar_dat(out: &mut Outputs, table: &HbarTable) -> Result<(), RunError> {
    let d = table.dim;
    let rows: Vec<Vec<f64>> = table
        .points
        .iter()
        .map(|q| q.p[..d].iter().copied().chain([q.estimate, q.spread]).collect())
        .collect();
    let header: &[&str] = if d == 1 { &["p_1", "estimate", "spread"] } else { &["p_1", "p_2", "estimate", "spread"] };
    out.table_dat("hbar.dat", header, &rows, &[d])?;
    Ok(())
}

fn estimate_hbar(s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
    let d = dim(s)?;
    let ham = hamiltonian(s)?;
    let ps = s.points("task.p", d)?;
    let route: Route = s.str("task.route")?.parse().map_err(|e: Error| bad("task.route", e))?;
    let envs = environments(s, seed_offset)?;
    let pots = potentials(&envs);
    let table = match route {
        Route::Delta => hbar_table_delta(&pots, &ham, &ps, &delta_schedule(s)?)?,
        Route::MetricInversion => {
            if !s.has("task.mu_grid") {
                return Err(bad("task.mu_grid", "the metric_inversion route needs a list of levels").into());
            }
            let setup = metric_setup(s, pots[0].grid())?;
            let reach = setup.half as f64 * pots[0].grid().h();
            let ts = t_schedule(s, reach)?;
            let profiles = s
                .f64_list("task.mu_grid")?
                .into_iter()
                .map(|mu| estimate_mbar(&pots, &ham, [0.0; MAX_DIM], mu, &ts, &setup))
                .collect::<Result<Vec<_>, _>>()?;
            let mut points = Vec::new();
            for &p in &ps {
                let inv = invert_metric_to_hbar(&profiles, [0.0; MAX_DIM], p)?;
                if inv.floor {
                    warn!("p = {}: at or below the smallest tabled level", fmt_p(&p, d));
                }
                points.push(HbarPoint {
                    p,
                    estimate: inv.value,
                    spread: 0.0,
                    n_seeds: pots.len(),
                    per_delta: Vec::new(),
                });
            }
            HbarTable::new(d, Route::MetricInversion, points)
        }
        Route::Solvability => {
            if !s.has("task.bracket") {
                return Err(bad("task.bracket", "the solvability route needs `lo, hi`").into());
            }
            let b = s.f64_list("task.bracket")?;
            let [lo, hi] = b[..] else {
                return Err(bad("task.bracket", "expected two numbers").into());
            };
            let setup = metric_setup(s, pots[0].grid())?;
            let tol = s.f64("task.bisection_tol")?;
            let mut points = Vec::new();
            for &p in &ps {
                let v = solvability_hbar(&pots, &ham, p, (lo, hi), tol, &setup)
                    .map_err(|e| e.context(format!("p = {}", fmt_p(&p, d))))?;
                points.push(HbarPoint {
                    p,
                    estimate: v,
                    spread: 0.5 * tol,
                    n_seeds: pots.len(),
                    per_delta: Vec::new(),
                });
            }
            HbarTable::new(d, Route::Solvability, points)
        }
    };
    out.write("hbar.csv", table.to_csv().as_bytes())?;
    hbar_dat(out, &table)?;
    Ok(())
}

fn profile_mbar(s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
    let d = dim(s)?;
    let ham = hamiltonian(s)?;
    let p = point_or_origin(s, "task.p", d)?;
    let mu = s.f64("task.mu")?;
    let pots = potentials(&environments(s, seed_offset)?);
    let setup = metric_setup(s, pots[0].grid())?;
    let reach = setup.half as f64 * pots[0].grid().h();
    let ts = t_schedule(s, reach)?;
    let pr = estimate_mbar(&pots, &ham, p, mu, &ts, &setup)?;
    if !pr.reliable {
        warn!("{} of {} seeds are infeasible at μ = {mu}", pr.infeasible_seeds, pr.n_seeds);
    }
    out.write("profile.csv", pr.to_csv().as_bytes())?;
    let dirs = probe_directions(d);
    let mut header = vec!["t".to_string()];
    header.extend((0..dirs.len()).map(|k| format!("direction_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = pr.history.iter().map(|(t, sl)| [*t].into_iter().chain(sl.iter().copied()).collect()).collect();
    out.table_dat("profile.dat", &header, &rows, &(1..=dirs.len()).collect::<Vec<_>>())?;
    let mut summary = String::from("direction,e_1,e_2,slope,extrapolated\n");
    for (k, e) in dirs.iter().enumerate() {
        summary.push_str(&format!("{k},{},{},{},{}\n", e[0], e[1], pr.slopes[k], pr.extrapolated[k]));
    }
    summary.push_str(&format!("# mu = {mu}, seeds = {}, infeasible = {}\n", pr.n_seeds, pr.infeasible_seeds));
    out.write("summary.csv", summary.as_bytes())?;
    Ok(())
}

/// Square `p` grid of the given step over `[−p_max, p_max]^d`.
fn p_grid(p_max: f64, step: f64, d: usize) -> Vec<[f64; MAX_DIM]> {
    let k = (p_max / step).round() as i64;
    let line: Vec<f64> = (-k..=k).map(|i| i as f64 * step).collect();
    if d == 1 {
        line.iter().map(|&x| [x, 0.0]).collect()
    } else {
        line.iter().flat_map(|&x| line.iter().map(move |&y| [x, y])).collect()
    }
}

fn closure(s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
    let d = dim(s)?;
    let ham = hamiltonian(s)?;
    let envs = environments(s, seed_offset)?;
    let pots = potentials(&envs);
    let step = s.f64("task.p_step")?;
    if step <= 0.0 {
        return Err(bad("task.p_step", "must be positive").into());
    }
    let table = hbar_table_delta(&pots, &ham, &p_grid(s.f64("task.p_max")?, step, d), &delta_schedule(s)?)?.convexify()?;
    out.write("hbar.csv", table.to_csv().as_bytes())?;
    let lag = legendre(&table, s.f64("task.vmax")?, s.usize("task.v_points")?)?;
    let u0 = Expr::parse(s.str("task.u0")?, &["x", "y"]).map_err(|e| bad("task.u0", e))?;
    let u0f = |x: [f64; MAX_DIM]| u0.eval(&x).unwrap_or(f64::NAN);
    let wh = s.f64("task.window_half")?;
    let ws = s.f64("task.window_step")?;
    let window = p_grid(wh, ws, d);
    let setup = ClosureSetup {
        lo: s.f64("task.lo")?,
        side: s.f64("task.side")?,
        t_final: s.f64("task.t_final")?,
        window,
    };
    let mut eps = s.f64_list("task.epsilons")?;
    eps.sort_by(|a, b| b.total_cmp(a));
    let errors = homogenization_closure(&pots[0], &ham, &u0f, &eps, &lag, &setup)?;
    out.write("closure.csv", closure_csv(&errors).as_bytes())?;
    let rows: Vec<Vec<f64>> = errors.iter().map(|&(e, x)| vec![e, x]).collect();
    out.table_dat("closure.dat", &["epsilon", "sup_error"], &rows, &[1])?;
    Ok(())
}

fn feynman_kac(s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
    let d = dim(s)?;
    let ham = hamiltonian(s)?;
    let mu = s.f64("task.mu")?;
    let offsets = s.points("task.points", d)?;
    let side = s.f64("environment.side")?;
    let center = if s.str("task.center")? == "middle" {
        let mut c = [0.0; MAX_DIM];
        c[..d].iter_mut().for_each(|x| *x = 0.5 * side);
        c
    } else {
        s.point("task.center", d)?
    };
    let opts = FkOptions {
        n_paths: s.usize("task.n_paths")?,
        dt: s.f64("task.dt")?,
        max_steps: s.usize("task.max_steps")?,
        seed: s.usize("task.mc_seed")? as u64,
        ..FkOptions::default()
    };
    let mut csv = String::from("seed,y_1,y_2,value,ci,hit,killed,alive\n");
    for e in environments(s, seed_offset)? {
        for off in &offsets {
            let y = [center[0] + off[0], center[1] + off[1]];
            let r = feynman_kac_metric(&e.sample.potential, &ham, mu, center, y, &opts)
                .map_err(|err| err.context(format!("feynman-kac seed {} at {}", e.seed, fmt_p(off, d))))?;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                e.seed, off[0], off[1], r.value, r.ci, r.hit, r.killed, r.alive
            ));
        }
    }
    out.write("fk.csv", csv.as_bytes())?;
    Ok(())
}

fn run_property_suite(s: &Settings, seed_offset: u64, out: &mut Outputs) -> Result<(), RunError> {
    let d = dim(s)?;
    let ham = hamiltonian(s)?;
    let ps = s.points("task.p", d)?;
    let pots = potentials(&environments(s, seed_offset)?);
    let table = hbar_table_delta(&pots, &ham, &ps, &delta_schedule(s)?)?;
    let flat_spot = match s.str("task.flat_spot")? {
        "auto" => {
            ham.form == Form::Separated && ham.diffusion.sigma2() == 0.0 && pots.iter().all(|v| v.min() >= 0.0)
        }
        "true" => true,
        "false" => false,
        v => return Err(bad("task.flat_spot", format!("expected auto, true or false, got `{v}`")).into()),
    };
    let constants = PropertyConstants {
        coercivity: s.f64("task.coercivity")?,
        lipschitz: s.f64("task.lipschitz")?,
        flat_tol: s.f64("task.flat_tol")?,
        flat_spot,
    };
    let r = property_suite(&table, &ham, &constants);
    let mut text = format!(
        "passed = {}\nconvexity_violation = {}\ncoercivity_ok = {}\nlipschitz_quotient = {}\nlipschitz_ok = {}\n",
        r.passed(),
        r.convexity_violation,
        r.coercivity_ok,
        r.lipschitz_quotient,
        r.lipschitz_ok
    );
    if let Some(h0) = r.hbar_at_zero {
        text.push_str(&format!("hbar_at_zero = {h0}\n"));
    }
    if let Some(ok) = r.flat_spot_ok {
        text.push_str(&format!("flat_spot_ok = {ok}\n"));
    }
    for f in &r.findings {
        warn!("{f}");
        text.push_str(&format!("finding = {f}\n"));
    }
    out.write("hbar.csv", table.to_csv().as_bytes())?;
    out.write("properties.txt", text.as_bytes())?;
    Ok(())
}

fn run_oracle_1d(s: &Settings, out: &mut Outputs) -> Result<(), RunError> {
    let ham = hamiltonian(s)?;
    if ham.form != Form::Separated || ham.diffusion.sigma2() != 0.0 {
        return Err(bad("hamiltonian.form", "oracle-1d needs the separated form with sigma2 = 0").into());
    }
    let ps = s.f64_list("task.p")?;
    let v = Expr::parse(s.str("task.potential")?, &["y"]).map_err(|e| bad("task.potential", e))?;
    let f = |y: f64| v.eval(&[y]).unwrap_or(f64::NAN);
    let mut csv = String::from("p,hbar\n");
    let mut rows = Vec::new();
    for p in ps {
        let h = oracle_1d(ham.gamma, ham.c0, f, p).map_err(|e| e.context("task.potential"))?;
        csv.push_str(&format!("{p},{h}\n"));
        rows.push(vec![p, h]);
    }
    out.write("oracle.csv", csv.as_bytes())?;
    out.table_dat("oracle.dat", &["p", "hbar"], &rows, &[1])?;
    Ok(())
}
