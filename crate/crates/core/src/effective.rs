//! Estimators of the effective Hamiltonian by three routes, the effective
//! Lagrangian and Hopf-Lax solver, the closure test and the property suite.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::numerics::{Grid, ScalarField, MAX_DIM};
use crate::solvers::{
    metric_box, probe_directions, solve_delta_on, solve_metric, source_set, DeltaOptions, MetricOptions,
    MetricSolution,
};
use crate::stats::{linear_fit, mean, std_dev};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Delta,
    MetricInversion,
    Solvability,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Delta => "delta",
            Route::MetricInversion => "metric_inversion",
            Route::Solvability => "solvability",
        })
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Route::Delta),
            "metric_inversion" => Ok(Route::MetricInversion),
            "solvability" => Ok(Route::Solvability),
            _ => Err(Error::param("route", format!("unknown route `{s}`"))),
        }
    }
}

/// One tabled value of `H̄(p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HbarPoint {
    pub p: [f64; MAX_DIM],
    pub estimate: f64,
    pub spread: f64,
    pub n_seeds: usize,
    /// `(δ, seed-averaged −mean(δv))` in schedule order; empty for the metric
    /// routes.
    pub per_delta: Vec<(f64, f64)>,
}

impl HbarPoint {
    /// The un-extrapolated value at the smallest `δ`.
    pub fn smallest_delta_value(&self) -> Option<f64> {
        self.per_delta
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|&(_, v)| v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HbarTable {
    pub dim: usize,
    pub route: Route,
    pub points: Vec<HbarPoint>,
    pub convexified: bool,
}

impl HbarTable {
    pub fn new(dim: usize, route: Route, points: Vec<HbarPoint>) -> Self {
        HbarTable {
            dim,
            route,
            points,
            convexified: false,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.points.iter().map(|q| q.estimate).fold(f64::INFINITY, f64::min)
    }

    pub fn argmin(&self) -> [f64; MAX_DIM] {
        self.points
            .iter()
            .min_by(|a, b| a.estimate.total_cmp(&b.estimate))
            .map(|q| q.p)
            .unwrap_or([0.0; MAX_DIM])
    }

    /// `p_1..p_d, estimate, spread, route, n_seeds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for a in 0..self.dim {
            out.push_str(&format!("p_{},", a + 1));
        }
        out.push_str("estimate,spread,route,n_seeds\n");
        for q in &self.points {
            for a in 0..self.dim {
                out.push_str(&format!("{},", q.p[a]));
            }
            out.push_str(&format!("{},{},{},{}\n", q.estimate, q.spread, self.route, q.n_seeds));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::param("table", "empty table"))?;
        let dim = header.split(',').filter(|c| c.starts_with("p_")).count();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::param("table", "header must name p_1 or p_1,p_2"));
        }
        let mut route = Route::Delta;
        let mut points = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != dim + 4 {
                return Err(Error::param("table", format!("bad row `{line}`")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::param("table", format!("bad number `{s}`")))
            };
            let mut p = [0.0; MAX_DIM];
            for a in 0..dim {
                p[a] = num(cols[a])?;
            }
            route = cols[dim + 2].parse()?;
            points.push(HbarPoint {
                p,
                estimate: num(cols[dim])?,
                spread: num(cols[dim + 1])?,
                n_seeds: cols[dim + 3]
                    .parse()
                    .map_err(|_| Error::param("table", format!("bad count `{}`", cols[dim + 3])))?,
                per_delta: Vec::new(),
            });
        }
        Ok(HbarTable::new(dim, route, points))
    }

    /// Points lying on one line `p = a + s·e`, as `(e, [(s, index)])` sorted
    /// by `s`.
    fn line_coordinates(&self) -> Option<([f64; MAX_DIM], Vec<(f64, usize)>)> {
        let pts = &self.points;
        if pts.len() < 2 {
            return None;
        }
        let a = pts[0].p;
        let far = pts
            .iter()
            .map(|q| q.p)
            .max_by(|x, y| dist(x, &a).total_cmp(&dist(y, &a)))?;
        let len = dist(&far, &a);
        if len == 0.0 {
            return None;
        }
        let e = [(far[0] - a[0]) / len, (far[1] - a[1]) / len];
        let mut out = Vec::new();
        for (i, q) in pts.iter().enumerate() {
            let d = [q.p[0] - a[0], q.p[1] - a[1]];
            let s = d[0] * e[0] + d[1] * e[1];
            if (d[0] - s * e[0]).abs() + (d[1] - s * e[1]).abs() > 1e-9 * (1.0 + len) {
                return None;
            }
            out.push((s, i));
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        Some((e, out))
    }

    /// Lower convex envelope of the table, evaluated at the tabled points.
    /// Points on one line use the 1-d hull; planar tables take the least
    /// value over triangles of tabled points that contain each point.
    pub fn convexify(&self) -> Result<HbarTable> {
        let mut out = self.clone();
        if let Some((_, line)) = self.line_coordinates() {
            let xs: Vec<f64> = line.iter().map(|&(s, _)| s).collect();
            let ys: Vec<f64> = line.iter().map(|&(_, i)| self.points[i].estimate).collect();
            let hull = lower_hull(&xs, &ys);
            for (k, &(_, i)) in line.iter().enumerate() {
                out.points[i].estimate = hull[k];
            }
        } else {
            let ps: Vec<[f64; MAX_DIM]> = self.points.iter().map(|q| q.p).collect();
            let ys: Vec<f64> = self.points.iter().map(|q| q.estimate).collect();
            for (q, y) in out.points.iter_mut().zip(lower_envelope_2d(&ps, &ys)) {
                q.estimate = y;
            }
        }
        out.convexified = true;
        Ok(out)
    }

    /// Largest midpoint-convexity violation
    /// `H̄(p_m) − (H̄(p_a) + H̄(p_b))/2` over tabled triples with `p_m` the
    /// midpoint of `p_a`, `p_b`, with the witness triple of indices.
    pub fn convexity_violation(&self) -> (f64, Option<[usize; 3]>) {
        let pts = &self.points;
        let mut worst = 0.0;
        let mut witness = None;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let mid = [0.5 * (pts[a].p[0] + pts[b].p[0]), 0.5 * (pts[a].p[1] + pts[b].p[1])];
                let scale = 1e-9 * (1.0 + dist(&pts[a].p, &pts[b].p));
                if let Some(m) = pts.iter().position(|q| dist(&q.p, &mid) < scale) {
                    let v = pts[m].estimate - 0.5 * (pts[a].estimate + pts[b].estimate);
                    if v > worst {
                        worst = v;
                        witness = Some([a, m, b]);
                    }
                }
            }
        }
        (worst, witness)
    }

    /// Piecewise-linear value along a line table at arbitrary `p` on it.
    pub fn interpolate_line(&self, p: [f64; MAX_DIM]) -> Result<f64> {
        let (e, line) = self
            .line_coordinates()
            .ok_or_else(|| Error::param("table", "interpolation needs points on one line"))?;
        let a = self.points[0].p;
        let s = (p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1];
        let xs: Vec<f64> = line.iter().map(|&(s, _)| s).collect();
        let ys: Vec<f64> = line.iter().map(|&(_, i)| self.points[i].estimate).collect();
        if s < xs[0] - 1e-12 || s > xs[xs.len() - 1] + 1e-12 {
            return Err(Error::Range {
                what: "p",
                reason: format!("{p:?} lies outside the tabled segment"),
            });
        }
        let k = xs.partition_point(|&x| x < s).clamp(1, xs.len() - 1);
        let t = (s - xs[k - 1]) / (xs[k] - xs[k - 1]);
        Ok(ys[k - 1] + t * (ys[k] - ys[k - 1]))
    }
}

fn dist(a: &[f64; MAX_DIM], b: &[f64; MAX_DIM]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn lower_envelope_2d(ps: &[[f64; MAX_DIM]], ys: &[f64]) -> Vec<f64> {
    let n = ps.len();
    let mut out = ys.to_vec();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let (pa, pb, pc) = (ps[a], ps[b], ps[c]);
                let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
                let span = dist(&pa, &pb).max(dist(&pa, &pc)).max(dist(&pb, &pc));
                if det.abs() <= 1e-12 * span * span {
                    continue;
                }
                for (i, p) in ps.iter().enumerate() {
                    let wb = ((p[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (p[1] - pa[1])) / det;
                    let wc = ((pb[0] - pa[0]) * (p[1] - pa[1]) - (p[0] - pa[0]) * (pb[1] - pa[1])) / det;
                    let wa = 1.0 - wb - wc;
                    if wa >= -1e-12 && wb >= -1e-12 && wc >= -1e-12 {
                        out[i] = out[i].min(wa * ys[a] + wb * ys[b] + wc * ys[c]);
                    }
                }
            }
        }
    }
    out
}

/// Lower convex hull of `(xs, ys)` (sorted `xs`) evaluated back at `xs`.
fn lower_hull(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut k = 0;
    for i in 0..xs.len() {
        while k + 1 < hull.len() && xs[hull[k + 1]] < xs[i] {
            k += 1;
        }
        let (a, b) = (hull[k], hull[(k + 1).min(hull.len() - 1)]);
        if a == b || xs[b] == xs[a] {
            out.push(ys[a]);
        } else {
            let t = (xs[i] - xs[a]) / (xs[b] - xs[a]);
            out.push(ys[a] + t * (ys[b] - ys[a]));
        }
    }
    out
}

/// Settings shared by the δ-route estimators.
#[derive(Clone, Debug)]
pub struct DeltaSchedule {
    /// Decreasing, e.g. a halving sequence.
    pub deltas: Vec<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl DeltaSchedule {
    pub fn halving(start: f64, count: usize, tol: f64) -> Self {
        DeltaSchedule {
            deltas: (0..count).map(|k| start / f64::powi(2.0, k as i32)).collect(),
            tol,
            max_iters: 20_000,
        }
    }
}

/// `H̄(p)` by the δ-route: for every δ and environment, `−mean(δv^δ)`;
/// seed averages are fitted linearly in δ and the intercept reported.
///
/// `spread` is the seed standard deviation at the smallest δ plus the largest
/// fit residual.
pub fn estimate_hbar_delta(
    potentials: &[ScalarField],
    ham: &impl Hamiltonian,
    p: [f64; MAX_DIM],
    schedule: &DeltaSchedule,
) -> Result<HbarPoint> {
    if potentials.is_empty() {
        return Err(Error::param("seeds", "need at least one environment"));
    }
    if schedule.deltas.is_empty() || schedule.deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("deltas", "schedule must be non-empty and decreasing"));
    }
    let runs: Vec<Vec<f64>> = potentials
        .par_iter()
        .enumerate()
        .map(|(seed, v)| {
            let mut out = Vec::with_capacity(schedule.deltas.len());
            let mut initial: Option<ScalarField> = None;
            for &delta in &schedule.deltas {
                let opts = DeltaOptions {
                    tol: schedule.tol,
                    max_iters: schedule.max_iters,
                    initial: initial.take(),
                    recenter: true,
                };
                let r = solve_delta_on(v, ham, p, delta, &opts)
                    .map_err(|e| e.context(format!("δ = {delta}, seed #{seed}, p = {p:?}")))?;
                out.push(r.hbar_estimate());
                initial = Some(r.v);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let per_delta: Vec<(f64, f64)> = schedule
        .deltas
        .iter()
        .enumerate()
        .map(|(k, &d)| (d, mean(&runs.iter().map(|r| r[k]).collect::<Vec<_>>())))
        .collect();
    let last: Vec<f64> = runs.iter().map(|r| r[r.len() - 1]).collect();
    let (estimate, fit_resid) = if per_delta.len() >= 2 {
        let xs: Vec<f64> = per_delta.iter().map(|x| x.0).collect();
        let ys: Vec<f64> = per_delta.iter().map(|x| x.1).collect();
        let (a, _, r) = linear_fit(&xs, &ys);
        (a, r)
    } else {
        (per_delta[0].1, 0.0)
    };
    Ok(HbarPoint {
        p,
        estimate,
        spread: std_dev(&last) + fit_resid,
        n_seeds: potentials.len(),
        per_delta,
    })
}

/// δ-route table over a list of `p`.
pub fn hbar_table_delta(
    potentials: &[ScalarField],
    ham: &impl Hamiltonian,
    ps: &[[f64; MAX_DIM]],
    schedule: &DeltaSchedule,
) -> Result<HbarTable> {
    let dim = potentials.first().map(|v| v.grid().dim()).unwrap_or(1);
    let points = ps
        .iter()
        .map(|&p| estimate_hbar_delta(potentials, ham, p, schedule))
        .collect::<Result<Vec<_>>>()?;
    Ok(HbarTable::new(dim, Route::Delta, points))
}

/// Geometry of the metric solves: an outflow box of `2·half + 1` nodes per
/// side centred on `center` of each periodic environment raster.
#[derive(Clone, Debug)]
pub struct MetricSetup {
    pub half: usize,
    pub center: usize,
    pub options: MetricOptions,
    /// Physical source radius for the viscous source ball.
    pub eps_phys: Option<f64>,
}

fn metric_on(potential: &ScalarField, ham: &impl Hamiltonian, p: [f64; MAX_DIM], mu: f64, setup: &MetricSetup) -> Result<MetricSolution> {
    let (b, c) = metric_box(potential, setup.center, setup.half)?;
    let src = source_set(b.grid(), c, ham, setup.eps_phys);
    solve_metric(&b, ham, p, mu, &src, c, &setup.options)
}

#[derive(Clone, Debug)]
pub struct EffectiveMetricProfile {
    pub mu: f64,
    pub p: [f64; MAX_DIM],
    pub directions: Vec<[f64; MAX_DIM]>,
    /// Seed-averaged `m(t·e)/t` at the largest `t`, one per direction.
    pub slopes: Vec<f64>,
    /// `2·s(t) − s(t/2)` at the largest `t` when `t/2` is also on the
    /// schedule, which removes the `O(1/t)` offset; otherwise `slopes`.
    pub extrapolated: Vec<f64>,
    /// `(t, per-direction slopes)` along the schedule.
    pub history: Vec<(f64, Vec<f64>)>,
    pub n_seeds: usize,
    pub infeasible_seeds: usize,
    pub reliable: bool,
}

impl EffectiveMetricProfile {
    /// `direction, t, slope` with the direction as its index in
    /// [`probe_directions`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction,t,slope\n");
        for (t, s) in &self.history {
            for k in 0..self.directions.len() {
                out.push_str(&format!("{k},{t},{}\n", s[k]));
            }
        }
        out
    }

    /// Largest relative change between the slopes at `t` and `2t` over the
    /// recorded schedule pairs.
    pub fn self_convergence(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for (t, a) in &self.history {
            if let Some((_, b)) = self.history.iter().find(|(u, _)| (u - 2.0 * t).abs() < 1e-9 * t) {
                for (x, y) in a.iter().zip(b) {
                    let r = (x - y).abs() / y.abs().max(1e-12);
                    worst = Some(worst.map_or(r, |w: f64| w.max(r)));
                }
            }
        }
        worst
    }
}

/// Profile of `m̄_μ(·; p)`: one metric solve per environment, slopes
/// `m(t·e)/t` over the schedule, averaged over feasible seeds.
pub fn estimate_mbar(
    potentials: &[ScalarField],
    ham: &impl Hamiltonian,
    p: [f64; MAX_DIM],
    mu: f64,
    t_schedule: &[f64],
    setup: &MetricSetup,
) -> Result<EffectiveMetricProfile> {
    if potentials.is_empty() || t_schedule.is_empty() {
        return Err(Error::param("seeds", "need environments and a t schedule"));
    }
    let dim = potentials[0].grid().dim();
    let directions = probe_directions(dim);
    let sols = potentials
        .par_iter()
        .enumerate()
        .map(|(seed, v)| metric_on(v, ham, p, mu, setup).map_err(|e| e.context(format!("μ = {mu}, seed #{seed}"))))
        .collect::<Result<Vec<_>>>()?;
    let reach = sols[0].reach();
    if t_schedule.iter().any(|&t| !(t > 0.0 && t <= reach)) {
        return Err(Error::param("t", format!("schedule must lie in (0, {reach}]")));
    }
    let feasible: Vec<&MetricSolution> = sols.iter().filter(|s| s.feasible).collect();
    let infeasible = sols.len() - feasible.len();
    let pool: Vec<&MetricSolution> = if feasible.is_empty() { sols.iter().collect() } else { feasible };
    let mut history = Vec::new();
    for &t in t_schedule {
        let s: Vec<f64> = directions
            .iter()
            .map(|&e| mean(&pool.iter().map(|m| m.slope(e, t)).collect::<Vec<_>>()))
            .collect();
        history.push((t, s));
    }
    let t_max = t_schedule.iter().cloned().fold(0.0, f64::max);
    let slopes = history.iter().find(|(t, _)| *t == t_max).map(|x| x.1.clone()).unwrap_or_default();
    let extrapolated = match history.iter().find(|(t, _)| (2.0 * t - t_max).abs() < 1e-9 * t_max) {
        Some((_, half)) => slopes.iter().zip(half).map(|(a, b)| 2.0 * a - b).collect(),
        None => slopes.clone(),
    };
    Ok(EffectiveMetricProfile {
        mu,
        p,
        directions,
        slopes,
        extrapolated,
        history,
        n_seeds: sols.len(),
        infeasible_seeds: infeasible,
        reliable: (infeasible as f64) <= 0.2 * sols.len() as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inversion {
    pub value: f64,
    /// The query lies at or below the smallest tabled level.
    pub floor: bool,
}

/// `inf{μ : m̄_μ(e; p0) > (p − p0)·e for all tabled e}`, read off the
/// extrapolated slopes, with linear
/// interpolation of the margin between neighbouring levels.
pub fn invert_metric_to_hbar(profiles: &[EffectiveMetricProfile], p0: [f64; MAX_DIM], p: [f64; MAX_DIM]) -> Result<Inversion> {
    if profiles.is_empty() {
        return Err(Error::param("profiles", "need at least one level"));
    }
    let mut sorted: Vec<&EffectiveMetricProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let q = [p[0] - p0[0], p[1] - p0[1]];
    let margin = |pr: &EffectiveMetricProfile| {
        pr.directions
            .iter()
            .zip(&pr.extrapolated)
            .map(|(e, s)| s - (q[0] * e[0] + q[1] * e[1]))
            .fold(f64::INFINITY, f64::min)
    };
    let g: Vec<f64> = sorted.iter().map(|pr| margin(pr)).collect();
    if g[0] > 0.0 {
        return Ok(Inversion {
            value: sorted[0].mu,
            floor: true,
        });
    }
    for k in 1..g.len() {
        if g[k] > 0.0 {
            let (m0, m1) = (sorted[k - 1].mu, sorted[k].mu);
            let t = -g[k - 1] / (g[k] - g[k - 1]);
            return Ok(Inversion {
                value: m0 + t * (m1 - m0),
                floor: false,
            });
        }
    }
    Err(Error::Range {
        what: "μ grid",
        reason: format!(
            "no tabled level exceeds the query p = {p:?} (largest μ = {}, margin {:.4}); extend the grid upward",
            sorted[g.len() - 1].mu,
            g[g.len() - 1]
        ),
    })
}

/// Majority feasibility verdict of the metric problem over environments.
pub fn metric_feasible(potentials: &[ScalarField], ham: &impl Hamiltonian, p: [f64; MAX_DIM], mu: f64, setup: &MetricSetup) -> Result<bool> {
    let verdicts = potentials
        .par_iter()
        .map(|v| metric_on(v, ham, p, mu, setup).map(|s| s.feasible))
        .collect::<Result<Vec<_>>>()?;
    Ok(2 * verdicts.iter().filter(|&&f| f).count() > verdicts.len())
}

/// Threshold of the feasibility verdict in `μ` by bisection.
pub fn solvability_hbar(
    potentials: &[ScalarField],
    ham: &impl Hamiltonian,
    p: [f64; MAX_DIM],
    bracket: (f64, f64),
    tol: f64,
    setup: &MetricSetup,
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi && tol > 0.0) {
        return Err(Error::param("bracket", "need lo < hi and a positive tolerance"));
    }
    if metric_feasible(potentials, ham, p, lo, setup)? {
        return Err(Error::Bracket {
            lo,
            hi,
            reason: "the lower end is already feasible".into(),
        });
    }
    if !metric_feasible(potentials, ham, p, hi, setup)? {
        return Err(Error::Bracket {
            lo,
            hi,
            reason: "the upper end is still infeasible".into(),
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if metric_feasible(potentials, ham, p, mid, setup)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Conjugate `L̄(v) = max_j [p_j·v − H̄(p_j)]` of a table. A radial table
/// stores `f(s)` at `p = (s, 0)`, `s ≥ 0`, and stands for `H̄(p) = f(|p|)`.
#[derive(Clone, Debug)]
pub struct LagrangianTable {
    pub dim: usize,
    pub radial: bool,
    pub p: Vec<[f64; MAX_DIM]>,
    pub h: Vec<f64>,
    pub v_grid: Vec<[f64; MAX_DIM]>,
    pub values: Vec<f64>,
}

impl LagrangianTable {
    pub fn eval(&self, v: [f64; MAX_DIM]) -> f64 {
        if self.radial {
            let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
            self.p
                .iter()
                .zip(&self.h)
                .map(|(p, h)| p[0].abs() * r - h)
                .fold(f64::NEG_INFINITY, f64::max)
        } else {
            self.p
                .iter()
                .zip(&self.h)
                .map(|(p, h)| p[0] * v[0] + p[1] * v[1] - h)
                .fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// `H̄**(p) = sup_v [p·v − L̄(v)]` over the velocity grid.
    pub fn biconjugate(&self, p: [f64; MAX_DIM]) -> f64 {
        self.v_grid
            .iter()
            .zip(&self.values)
            .map(|(v, l)| p[0] * v[0] + p[1] * v[1] - l)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn velocity_grid(dim: usize, vmax: f64, n: usize) -> Vec<[f64; MAX_DIM]> {
    let step = 2.0 * vmax / (n - 1) as f64;
    let axis: Vec<f64> = (0..n).map(|k| -vmax + k as f64 * step).collect();
    if dim == 1 {
        axis.iter().map(|&x| [x, 0.0]).collect()
    } else {
        axis.iter().flat_map(|&x| axis.iter().map(move |&y| [x, y])).collect()
    }
}

/// Legendre transform of a convexified table, sampled on a velocity grid of
/// `n` points per axis covering `[−vmax, vmax]`.
pub fn legendre(table: &HbarTable, vmax: f64, n: usize) -> Result<LagrangianTable> {
    if !table.convexified {
        return Err(Error::param("table", "convexify the table before taking the conjugate"));
    }
    let mut lag = LagrangianTable {
        dim: table.dim,
        radial: false,
        p: table.points.iter().map(|q| q.p).collect(),
        h: table.points.iter().map(|q| q.estimate).collect(),
        v_grid: velocity_grid(table.dim, vmax, n.max(2)),
        values: Vec::new(),
    };
    lag.values = lag.v_grid.iter().map(|&v| lag.eval(v)).collect();
    Ok(lag)
}

/// Legendre transform of `H̄(p) = f(|p|)` from a table of `f` on `p = (s, 0)`,
/// `s ≥ 0`, in `dim` dimensions.
pub fn legendre_radial(table: &HbarTable, dim: usize, vmax: f64, n: usize) -> Result<LagrangianTable> {
    if !table.convexified {
        return Err(Error::param("table", "convexify the table before taking the conjugate"));
    }
    if table.points.iter().any(|q| q.p[0] < 0.0 || q.p[1] != 0.0) {
        return Err(Error::param("table", "radial tables hold p = (s, 0) with s ≥ 0"));
    }
    let mut lag = LagrangianTable {
        dim,
        radial: true,
        p: table.points.iter().map(|q| q.p).collect(),
        h: table.points.iter().map(|q| q.estimate).collect(),
        v_grid: velocity_grid(dim, vmax, n.max(2)),
        values: Vec::new(),
    };
    lag.values = lag.v_grid.iter().map(|&v| lag.eval(v)).collect();
    Ok(lag)
}

/// `u(x, t) = min_y [u0(y) + t·L̄((x − y)/t)]` at points given in the
/// coordinates of `u0`'s grid, minimising over its nodes.
pub fn hopf_lax_at(u0: &ScalarField, lag: &LagrangianTable, t: f64, points: &[[f64; MAX_DIM]]) -> Result<Vec<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    let g = u0.grid();
    Ok(points
        .par_iter()
        .map(|&x| {
            if t == 0.0 {
                return u0.interpolate(x);
            }
            (0..g.len())
                .map(|k| {
                    let y = g.position(k);
                    u0.get(k) + t * lag.eval([(x[0] - y[0]) / t, (x[1] - y[1]) / t])
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// [`hopf_lax_at`] on the nodes of `x_grid`, whose node 0 sits at `x_origin`
/// in the coordinates of `u0`'s grid.
pub fn hopf_lax_solve(u0: &ScalarField, lag: &LagrangianTable, t: f64, x_grid: &Grid, x_origin: [f64; MAX_DIM]) -> Result<ScalarField> {
    let pts: Vec<[f64; MAX_DIM]> = (0..x_grid.len())
        .map(|k| {
            let x = x_grid.position(k);
            [x[0] + x_origin[0], x[1] + x_origin[1]]
        })
        .collect();
    ScalarField::new(x_grid.clone(), hopf_lax_at(u0, lag, t, &pts)?)
}

/// Effective Hamiltonian of a one-dimensional periodic separated problem
/// `c0|p|^γ − V`: `−min V` on the flat region, elsewhere the `μ` with
/// `|p| = ∫₀¹ ((μ + V)/c0)^{1/γ}`.
pub fn oracle_1d(gamma: f64, c0: f64, v: impl Fn(f64) -> f64, p: f64) -> Result<f64> {
    if !(gamma > 1.0 && c0 > 0.0) {
        return Err(Error::param("gamma", "need γ > 1 and c0 > 0"));
    }
    let n = 4096;
    let mut vmin = f64::INFINITY;
    for k in 0..=n {
        let y = k as f64 / n as f64;
        let x = v(y);
        if !x.is_finite() {
            return Err(Error::param("potential", format!("non-finite value {x} at y = {y}")));
        }
        vmin = vmin.min(x);
    }
    // refine the minimum locally so the flat level is exact to the quadrature
    // tolerance
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut best, mut fbest) = (0.0, f64::INFINITY);
    for k in 0..=n {
        let y = k as f64 / n as f64;
        if v(y) < fbest {
            fbest = v(y);
            best = y;
        }
    }
    lo = (best - 1.0 / n as f64).max(lo);
    hi = (best + 1.0 / n as f64).min(hi);
    for _ in 0..100 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if v(a) < v(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    vmin = vmin.min(v(0.5 * (lo + hi)));
    let inv = 1.0 / gamma;
    let integral = |mu: f64| adaptive_simpson(&|y: f64| ((mu + v(y)) / c0).max(0.0).powf(inv), 0.0, 1.0, 1e-11);
    let target = p.abs();
    let flat = -vmin;
    let p_star = integral(flat);
    if !p_star.is_finite() {
        return Err(Error::param("potential", "integral is not finite"));
    }
    if target <= p_star {
        return Ok(flat);
    }
    let mut hi = flat + 1.0;
    while integral(hi) < target {
        hi = flat + 2.0 * (hi - flat);
        if hi > 1e12 {
            return Err(Error::Oracle("no bracket for the effective level".into()));
        }
    }
    let mut lo = flat;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if integral(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // split first so periodic integrands cannot alias the initial samples
    let pieces = 16;
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * w, a + (i + 1) as f64 * w);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            rec(f, x0, x1, f0, fm, f1, w / 6.0 * (f0 + 4.0 * fm + f1), tol / pieces as f64, 40)
        })
        .sum()
}

/// Inputs of the closure test for one `ε`.
#[derive(Clone, Debug)]
pub struct ClosureSetup {
    /// Macroscopic box `[lo, lo + side]^d`.
    pub lo: f64,
    pub side: f64,
    pub t_final: f64,
    /// Window points in macroscopic coordinates.
    pub window: Vec<[f64; MAX_DIM]>,
}

/// `sup` over the window of `|u^ε − u|` per `ε`: `u^ε` from the
/// time-dependent solver on a grid of spacing `ε·h_env` (so `x/ε` lands on
/// raster nodes) and `u` from Hopf-Lax with `lag`.
pub fn homogenization_closure(
    env_potential: &ScalarField,
    spec: &crate::hamiltonian::HamiltonianSpec,
    u0: &(dyn Fn([f64; MAX_DIM]) -> f64 + Sync),
    epsilons: &[f64],
    lag: &LagrangianTable,
    setup: &ClosureSetup,
) -> Result<Vec<(f64, f64)>> {
    let dim = env_potential.grid().dim();
    let eh = env_potential.grid().h();
    // reference solution: Hopf-Lax over a fixed fine grid of initial data
    let ref_n = (setup.side / 0.01).round() as usize + 1;
    let ref_grid = Grid::new(dim, ref_n, setup.side / (ref_n - 1) as f64, crate::numerics::Boundary::Outflow)?;
    let lo = setup.lo;
    let u0_ref = ScalarField::from_fn(ref_grid, |x| u0([x[0] + lo, if dim == 2 { x[1] + lo } else { 0.0 }]));
    let local: Vec<[f64; MAX_DIM]> = setup
        .window
        .iter()
        .map(|x| [x[0] - lo, if dim == 2 { x[1] - lo } else { 0.0 }])
        .collect();
    let reference = hopf_lax_at(&u0_ref, lag, setup.t_final, &local)?;
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let h = eps * eh;
        let n = (setup.side / h).round() as usize + 1;
        let grid = Grid::new(dim, n, h, crate::numerics::Boundary::Outflow)?;
        let origin = [lo, if dim == 2 { lo } else { 0.0 }];
        let v = crate::solvers::scaled_potential(env_potential, &grid, origin, eps)?;
        let init = ScalarField::from_fn(grid.clone(), |x| u0([x[0] + origin[0], x[1] + origin[1]]));
        let r = crate::solvers::solve_time_dependent(&v, spec, &init, eps, &[setup.t_final], None)
            .map_err(|e| e.context(format!("ε = {eps}")))?;
        let u = &r.slices[0];
        let err = local
            .iter()
            .zip(&reference)
            .map(|(x, want)| (u.interpolate(*x) - want).abs())
            .fold(0.0f64, f64::max);
        out.push((eps, err));
    }
    Ok(out)
}

/// `epsilon,sup_error`.
pub fn closure_csv(errors: &[(f64, f64)]) -> String {
    let mut out = String::from("epsilon,sup_error\n");
    for (e, s) in errors {
        out.push_str(&format!("{e},{s}\n"));
    }
    out
}

/// Frozen constants for the property suite.
#[derive(Clone, Debug)]
pub struct PropertyConstants {
    /// `C` in `½c0|p|^γ − C ≤ H̄(p) ≤ C(1 + |p|^γ)`.
    pub coercivity: f64,
    /// Bound on the Lipschitz quotient.
    pub lipschitz: f64,
    /// Tolerance of the flat-spot checks.
    pub flat_tol: f64,
    /// Whether the flat-spot checks apply (separated form, `V ≥ 0`, no
    /// diffusion).
    pub flat_spot: bool,
}

#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub convexity_violation: f64,
    pub convexity_witness: Option<[usize; 3]>,
    pub coercivity_ok: bool,
    pub lipschitz_quotient: f64,
    pub lipschitz_ok: bool,
    pub hbar_at_zero: Option<f64>,
    pub flat_spot_ok: Option<bool>,
    pub findings: Vec<String>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Largest `|H̄(p1) − H̄(p2)| / [(1+|p1|+|p2|)^{γ−1}|p1 − p2|]` over pairs.
pub fn lipschitz_quotient(table: &HbarTable, gamma: f64) -> f64 {
    let pts = &table.points;
    let mut worst = 0.0f64;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let d = dist(&pts[a].p, &pts[b].p);
            if d == 0.0 {
                continue;
            }
            let na = dist(&pts[a].p, &[0.0; MAX_DIM]);
            let nb = dist(&pts[b].p, &[0.0; MAX_DIM]);
            let q = (pts[a].estimate - pts[b].estimate).abs() / ((1.0 + na + nb).powf(gamma - 1.0) * d);
            worst = worst.max(q);
        }
    }
    worst
}

pub fn property_suite(table: &HbarTable, ham: &impl Hamiltonian, constants: &PropertyConstants) -> PropertyReport {
    let mut findings = Vec::new();
    let (viol, witness) = table.convexity_violation();
    let tol = table.points.iter().map(|q| q.spread).fold(0.0, f64::max);
    if viol > 2.0 * tol + 1e-12 {
        findings.push(format!("midpoint convexity violated by {viol:.4e} at {witness:?}"));
    }
    let (g, c0, c) = (ham.gamma(), ham.c0(), constants.coercivity);
    let mut coercivity_ok = true;
    for q in &table.points {
        let n = dist(&q.p, &[0.0; MAX_DIM]).powf(g);
        if q.estimate < 0.5 * c0 * n - c || q.estimate > c * (1.0 + n) {
            coercivity_ok = false;
            findings.push(format!("coercivity sandwich fails at p = {:?}: {}", q.p, q.estimate));
        }
    }
    let lq = lipschitz_quotient(table, g);
    let lipschitz_ok = lq <= constants.lipschitz;
    if !lipschitz_ok {
        findings.push(format!("Lipschitz quotient {lq:.4} exceeds {}", constants.lipschitz));
    }
    let zero = table.points.iter().find(|q| q.p == [0.0; MAX_DIM]).map(|q| q.estimate);
    let mut flat_spot_ok = None;
    if constants.flat_spot {
        let ft = constants.flat_tol;
        let mut ok = true;
        match zero {
            Some(h0) => {
                if h0.abs() > ft {
                    ok = false;
                    findings.push(format!("H̄(0) = {h0:.4} is not within {ft} of 0"));
                }
                for q in &table.points {
                    if q.estimate < h0 - ft {
                        ok = false;
                        findings.push(format!("H̄({:?}) = {:.4} lies below H̄(0) − tol", q.p, q.estimate));
                    }
                }
            }
            None => {
                ok = false;
                findings.push("table has no p = 0 entry for the flat-spot check".into());
            }
        }
        flat_spot_ok = Some(ok);
    }
    PropertyReport {
        convexity_violation: viol,
        convexity_witness: witness,
        coercivity_ok,
        lipschitz_quotient: lq,
        lipschitz_ok,
        hbar_at_zero: zero,
        flat_spot_ok,
        findings,
    }
}

/// Largest `s` with `f(s) ≤ min f + tol` on a convexified line table through
/// its minimiser, measured from the minimiser.
pub fn flat_radius(table: &HbarTable, tol: f64) -> f64 {
    let m = table.min_value();
    let at = table.argmin();
    table
        .points
        .iter()
        .filter(|q| q.estimate <= m + tol)
        .map(|q| dist(&q.p, &at))
        .fold(0.0, f64::max)
}
