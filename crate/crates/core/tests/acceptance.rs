//! Acceptance suite: one PASS/FAIL line per criterion, then a single verdict.
//! The report goes straight to stderr so it shows without `--nocapture`.

use std::error::Error;
use std::io::Write;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hjhom::effective::*;
use hjhom::env::EnvironmentSample;
use hjhom::hamiltonian::{Diffusion, Form, HamiltonianSpec};
use hjhom::numerics::{oscillation, Grid, ScalarField, MAX_DIM};
use hjhom::solvers::*;

type Outcome = Result<String, Box<dyn Error>>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+).into());
        }
    };
}

// frozen constants
const SANDWICH_C: f64 = 1.0;
const SUBADDITIVITY_K: f64 = 4.0;
const COERCIVITY_HEADROOM: f64 = 3.0;
const LIPSCHITZ_HEADROOM: f64 = 2.0;
const ROUTE_TOL: f64 = 0.05;

fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn run(log: &mut Vec<(usize, bool)>, id: usize, name: &str, f: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}").into())
    });
    let (ok, detail) = match outcome {
        Ok(d) => (true, d),
        Err(e) => (false, e.to_string()),
    };
    report(&format!(
        "{} {id:>2}. {name}: {detail} [{:.1} s]",
        if ok { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    ));
    log.push((id, ok));
}

fn norm(p: [f64; MAX_DIM]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

/// Poisson bumps (intensity 1, radius 1/2) on the 8-periodic torus, h = 1/8.
fn torus(seed: u64) -> ScalarField {
    EnvironmentSample::poisson(1.0, 0.5, 8.0, 2, 64, seed).unwrap().potential
}

fn torus_schedule() -> DeltaSchedule {
    DeltaSchedule {
        deltas: vec![0.025, 0.0125, 0.00625],
        tol: 1e-7,
        max_iters: 50_000,
    }
}

fn metric_setup(half: usize) -> MetricSetup {
    MetricSetup {
        half,
        center: 0,
        options: MetricOptions::default(),
        eps_phys: None,
    }
}

fn constant_environment() -> Outcome {
    let v = ScalarField::constant(Grid::periodic(2, 16, 0.5)?, 0.0);
    let ps = [[0.0, 0.0], [0.5, 0.0], [1.0, 0.5], [-1.0, 1.0], [1.5, -1.5]];
    let sched = DeltaSchedule::halving(0.5, 3, 1e-9);
    let mut worst: f64 = 0.0;
    for gamma in [1.5, 2.0, 3.0] {
        let ham = HamiltonianSpec::new(gamma, 1.0, Form::Separated, Diffusion::None)?;
        for p in ps {
            let want = norm(p).powf(gamma);
            let got = estimate_hbar_delta(&[v.clone()], &ham, p, &sched)?.estimate;
            let err = if want == 0.0 { got.abs() } else { (got - want).abs() / want };
            ensure!(err <= 0.05, "γ = {gamma}, p = {p:?}: {got} vs {want}");
            worst = worst.max(err);
        }
    }
    Ok(format!("worst error {worst:.1e} over 15 points"))
}

fn periodic_oracle() -> Outcome {
    let g = Grid::periodic_box(1, 512, 1.0)?;
    let ham = HamiltonianSpec::quadratic();
    let sched = DeltaSchedule {
        deltas: vec![0.2, 0.1, 0.05],
        tol: 1e-6,
        max_iters: 20_000,
    };
    let (mut steep, mut flat): (f64, f64) = (0.0, 0.0);
    // the flat region is |p| ≤ ∫√V = 2√A/π
    for (a, above, inside) in [(1.0, [1.0, 1.5, 2.0, 3.0], [0.0, 0.3, 0.6]), (4.0, [1.5, 2.0, 2.5, 3.0], [0.0, 0.6, 1.2])] {
        let v = ScalarField::from_fn(g.clone(), |x| a * (PI * x[0]).sin().powi(2));
        let pot = |y: f64| a * (PI * y).sin().powi(2);
        for p in above {
            let want = oracle_1d(2.0, 1.0, pot, p)?;
            let got = estimate_hbar_delta(&[v.clone()], &ham, [p, 0.0], &sched)?.estimate;
            let rel = (got - want).abs() / want.abs();
            ensure!(rel <= 0.03, "A = {a}, p = {p}: {got} vs oracle {want}");
            steep = steep.max(rel);
        }
        for p in inside {
            let want = oracle_1d(2.0, 1.0, pot, p)?;
            ensure!(want == 0.0, "p = {p} is not on the flat region of A = {a}");
            let got = estimate_hbar_delta(&[v.clone()], &ham, [p, 0.0], &sched)?.estimate;
            ensure!(got.abs() <= 0.05, "A = {a}, flat p = {p}: {got}");
            flat = flat.max(got.abs());
        }
    }
    Ok(format!("worst relative error {steep:.1e} above, {flat:.1e} absolute on the flat region"))
}

fn flat_spot(runs: &mut Vec<DeltaProblemResult>) -> Outcome {
    let env = EnvironmentSample::poisson(1.0, 0.5, 64.0, 2, 512, 1)?;
    let ham = HamiltonianSpec::quadratic();
    let mut init = None;
    let mut values = Vec::new();
    for d in [0.2, 0.1, 0.05] {
        let opts = DeltaOptions {
            tol: 1e-5,
            max_iters: 500,
            initial: init.take(),
            recenter: true,
        };
        let r = solve_delta(&env, &ham, [0.0; MAX_DIM], d, &opts)?;
        values.push(r.hbar_estimate());
        init = Some(r.v.clone());
        runs.push(r);
    }
    let last = values[values.len() - 1];
    ensure!(last.abs() <= 0.05, "H̄(0) estimate {last}");
    ensure!(values.windows(2).all(|w| w[0] <= w[1]), "not monotone across δ: {values:?}");
    ensure!(values.iter().all(|&x| x <= 0.0), "approach is not from below: {values:?}");
    Ok(format!("−δ⟨v⟩ = {values:.4?} for δ = 0.2, 0.1, 0.05"))
}

struct LineTable {
    raw: HbarTable,
    calibration: HbarTable,
}

fn line_table() -> hjhom::error::Result<LineTable> {
    let ham = HamiltonianSpec::quadratic();
    let ps: Vec<[f64; MAX_DIM]> = (-4..=4).map(|k| [0.5 * k as f64, 0.0]).collect();
    let sched = DeltaSchedule {
        deltas: vec![0.05, 0.025, 0.0125],
        tol: 1e-7,
        max_iters: 50_000,
    };
    let raw = hbar_table_delta(&[torus(0), torus(1)], &ham, &ps, &sched)?;
    let flat = ScalarField::constant(Grid::periodic(2, 16, 0.5)?, 0.0);
    let calibration = hbar_table_delta(&[flat], &ham, &ps, &DeltaSchedule::halving(0.5, 3, 1e-9))?;
    Ok(LineTable { raw, calibration })
}

fn convexity(t: &LineTable) -> Outcome {
    let (viol, witness) = t.raw.convexity_violation();
    let spread = t.raw.points.iter().map(|q| q.spread).fold(0.0, f64::max);
    ensure!(viol <= 2.0 * spread, "violation {viol:.3e} at {witness:?} exceeds 2 × spread {spread:.3e}");
    Ok(format!("violation {viol:.2e}, per-point spread ≤ {spread:.2e}"))
}

fn coercivity_constant(cal: &HbarTable) -> f64 {
    cal.points
        .iter()
        .map(|q| {
            let n = norm(q.p).powi(2);
            (q.estimate / (1.0 + n)).max(0.5 * n - q.estimate)
        })
        .fold(0.0, f64::max)
}

fn coercivity(t: &LineTable) -> Outcome {
    let c = COERCIVITY_HEADROOM * coercivity_constant(&t.calibration);
    for q in &t.raw.points {
        let n = norm(q.p).powi(2);
        ensure!(
            0.5 * n - c <= q.estimate && q.estimate <= c * (1.0 + n),
            "p = {:?}: {} outside the sandwich with C = {c}",
            q.p,
            q.estimate
        );
    }
    Ok(format!("C = {c:.3} (calibration × {COERCIVITY_HEADROOM})"))
}

fn lipschitz(t: &LineTable) -> Outcome {
    let bound = LIPSCHITZ_HEADROOM * lipschitz_quotient(&t.calibration, 2.0);
    let q = lipschitz_quotient(&t.raw, 2.0);
    let report = property_suite(
        &t.raw,
        &HamiltonianSpec::quadratic(),
        &PropertyConstants {
            coercivity: COERCIVITY_HEADROOM * coercivity_constant(&t.calibration),
            lipschitz: bound,
            flat_tol: 0.05,
            flat_spot: true,
        },
    );
    ensure!(report.lipschitz_ok, "quotient {q:.4} exceeds {bound:.4}");
    ensure!(report.passed(), "property suite: {:?}", report.findings);
    Ok(format!("quotient {q:.4} ≤ {bound:.4}; property suite clean"))
}

fn subadditivity() -> Outcome {
    let ham = HamiltonianSpec::quadratic();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut h = 0.0;
    for seed in 0..2 {
        let env = EnvironmentSample::poisson(1.0, 0.5, 32.0, 2, 256, seed)?;
        let (b, c) = metric_box(&env.potential, 0, 48)?;
        let g = b.grid();
        h = g.h();
        let mid = g.multi_index(c);
        let near = |rng: &mut ChaCha8Rng, r: usize| {
            let i = mid[0] + rng.random_range(0..=2 * r) - r;
            let j = mid[1] + rng.random_range(0..=2 * r) - r;
            g.index([i, j])
        };
        let sources: Vec<usize> = (0..6).map(|_| near(&mut rng, 24)).collect();
        let metrics = sources
            .iter()
            .map(|&s| solve_metric(&b, &ham, [0.0; MAX_DIM], 1.0, &[s], c, &MetricOptions::default()).map(|m| m.m))
            .collect::<hjhom::error::Result<Vec<_>>>()?;
        for _ in 0..50 {
            let x = rng.random_range(0..sources.len());
            let y = (x + rng.random_range(1..sources.len())) % sources.len();
            let z = near(&mut rng, 40);
            let v = metrics[x].get(z) - metrics[x].get(sources[y]) - metrics[y].get(z);
            worst = worst.max(v);
        }
    }
    let k = worst.max(0.0) / h;
    ensure!(k <= SUBADDITIVITY_K, "violation {worst:.4} = {k:.2}·h");
    Ok(format!("largest violation {:.2}·h over 100 triples (K = {SUBADDITIVITY_K})", k))
}

struct RouteData {
    profiles: Vec<EffectiveMetricProfile>,
    tilted: EffectiveMetricProfile,
    slope_tol: f64,
}

fn routes(data: &mut Option<RouteData>) -> Outcome {
    let ham = HamiltonianSpec::quadratic();
    let pots = [torus(0)];
    let setup = metric_setup(256);
    let schedule = [7.75, 15.5, 31.0];
    let profiles = (2..=18)
        .map(|k| estimate_mbar(&pots, &ham, [0.0; MAX_DIM], 0.25 * k as f64, &schedule, &setup))
        .collect::<hjhom::error::Result<Vec<_>>>()?;
    let tilted = estimate_mbar(&pots, &ham, [1.0, 0.0], 1.5, &schedule, &setup)?;
    let ps = [[1.0, 0.0], [1.5, 0.0], [1.5 * FRAC_1_SQRT_2, 1.5 * FRAC_1_SQRT_2], [0.0, -1.2]];
    let min_hbar = estimate_hbar_delta(&pots, &ham, [0.0; MAX_DIM], &torus_schedule())?.estimate;
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for p in ps {
        let d = estimate_hbar_delta(&pots, &ham, p, &torus_schedule())?.estimate;
        ensure!(d > min_hbar + 0.1, "p = {p:?} is too close to the flat spot");
        let inv = invert_metric_to_hbar(&profiles, [0.0; MAX_DIM], p)?.value;
        let solv = solvability_hbar(&pots, &ham, p, (d - 0.4, d + 0.4), 0.01, &setup)?;
        for (name, x) in [("inversion", inv), ("solvability", solv)] {
            let err = (x - d).abs() / d.abs().max(1.0);
            ensure!(err <= ROUTE_TOL, "p = {p:?}: {name} {x:.4} vs δ-route {d:.4}");
            worst = worst.max(err);
        }
        lines.push(format!("{d:.3}/{inv:.3}/{solv:.3}"));
    }
    *data = Some(RouteData {
        profiles,
        tilted,
        slope_tol: setup.options.slope_fraction / (2.0 * 32.0 * 2f64.sqrt()),
    });
    Ok(format!("worst gap {:.1}%; δ/inversion/solvability {}", 100.0 * worst, lines.join(", ")))
}

fn metric_homogenization(data: &Option<RouteData>) -> Outcome {
    let data = data.as_ref().ok_or("route profiles are unavailable")?;
    let mut worst: f64 = 0.0;
    for pr in data.profiles.iter().filter(|pr| [1.0, 2.0, 4.0].contains(&pr.mu)) {
        let n = pr.history.len();
        let (a, b) = (&pr.history[n - 2].1, &pr.history[n - 1].1);
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            let rel = (x - y).abs() / y.abs();
            ensure!(rel < 0.05, "μ = {}, direction {k}: {x:.4} at t vs {y:.4} at 2t", pr.mu);
            worst = worst.max(rel);
        }
    }
    for pr in data.profiles.iter().chain([&data.tilted]) {
        let low = pr.slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure!(low >= -data.slope_tol, "μ = {}, p = {:?}: slope {low:.4}", pr.mu, pr.p);
    }
    Ok(format!("largest t-vs-2t change {:.1}% at t = 31; slopes ≥ −{:.1e}", 100.0 * worst, data.slope_tol))
}

fn closure() -> Outcome {
    let ham = HamiltonianSpec::quadratic();
    let env = torus(0);
    let sched = DeltaSchedule {
        deltas: vec![0.05, 0.025, 0.0125],
        tol: 1e-6,
        max_iters: 50_000,
    };
    let ps: Vec<[f64; MAX_DIM]> = (-3..=3)
        .flat_map(|i| (-3..=3).map(move |j| [0.5 * i as f64, 0.5 * j as f64]))
        .collect();
    let table = hbar_table_delta(&[env.clone()], &ham, &ps, &sched)?.convexify()?;
    let lag = legendre(&table, 4.0, 41)?;
    let window: Vec<[f64; MAX_DIM]> = (-8..=8)
        .flat_map(|i| (-8..=8).map(move |j| [0.1 * i as f64, 0.1 * j as f64]))
        .collect();
    let setup = ClosureSetup {
        lo: -2.0,
        side: 4.0,
        t_final: 0.5,
        window,
    };
    let u0 = |x: [f64; MAX_DIM]| norm(x).min(1.0);
    let errors = homogenization_closure(&env, &ham, &u0, &[0.2, 0.1, 0.05], &lag, &setup)?;
    let rises = errors.windows(2).filter(|w| w[1].1 > w[0].1).count();
    let last = errors[errors.len() - 1].1;
    ensure!(rises <= 1, "errors rise more than once: {errors:?}");
    ensure!(last <= 0.15, "final error {last:.4}");
    Ok(format!("sup errors {:.3?} for ε = 0.2, 0.1, 0.05", errors.iter().map(|e| e.1).collect::<Vec<_>>()))
}

fn feynman_kac() -> Outcome {
    let env = EnvironmentSample::poisson(1.0, 0.5, 32.0, 2, 256, 5)?;
    let ham = HamiltonianSpec::quadratic().with_diffusion(Diffusion::Isotropic { sigma2: 1.0 });
    let center = env.potential.grid().index([128, 128]);
    let (b, c) = metric_box(&env.potential, center, 64)?;
    let src = source_set(b.grid(), c, &ham, Some(1.0));
    let pde = solve_metric(&b, &ham, [0.0; MAX_DIM], 1.0, &src, c, &MetricOptions::default())?;
    ensure!(pde.history.last().is_some_and(|&r| r < 1e-6), "viscous metric did not converge");
    let cpos = env.potential.grid().position(center);
    let mut lines = Vec::new();
    for r in [2.0, 3.0, 4.0] {
        let mc = feynman_kac_metric(&env.potential, &ham, 1.0, cpos, [cpos[0] + r, cpos[1]], &FkOptions::default())?;
        let got = pde.value_at([r, 0.0]);
        let allowed = (0.1 * mc.value).max(mc.ci);
        ensure!((got - mc.value).abs() <= allowed, "|y| = {r}: PDE {got:.4} vs MC {:.4} ± {:.4}", mc.value, mc.ci);
        lines.push(format!("{got:.3} vs {:.3}±{:.3}", mc.value, mc.ci));
    }
    Ok(lines.join(", "))
}

fn delta_bounds(flat: &[DeltaProblemResult]) -> Outcome {
    let ham = HamiltonianSpec::quadratic();
    let v8 = torus(0);
    let mut tilted = Vec::new();
    let mut init = None;
    for d in [0.05, 0.025, 0.0125] {
        let opts = DeltaOptions {
            tol: 1e-7,
            max_iters: 50_000,
            initial: init.take(),
            recenter: true,
        };
        let r = solve_delta_on(&v8, &ham, [1.5, 0.0], d, &opts)?;
        init = Some(r.v.clone());
        tilted.push(r);
    }
    ensure!(flat.len() == 3, "flat-spot solves are unavailable");
    let env64 = EnvironmentSample::poisson(1.0, 0.5, 64.0, 2, 512, 1)?.potential;
    let mut lines = Vec::new();
    for (runs, pot) in [(flat, &env64), (&tilted[..], &v8)] {
        let mut osc = Vec::new();
        let mut wide = Vec::new();
        for r in runs {
            let dv = r.scaled();
            let g = dv.grid();
            let pg = norm(r.p).powi(2);
            ensure!(dv.min() >= -SANDWICH_C * (1.0 + pg), "δ = {}: δ·min v = {}", r.delta, dv.min());
            for k in (0..g.len()).step_by(g.len() / 16 + 1) {
                let top = g.ball(k, 0.5).into_iter().map(|j| dv.get(j)).fold(f64::NEG_INFINITY, f64::max);
                let sup_v = g.ball(k, 1.0).into_iter().map(|j| pot.get(j)).fold(f64::NEG_INFINITY, f64::max);
                ensure!(top <= sup_v + SANDWICH_C * (1.0 + r.delta), "δ = {}: local max {top} over sup V {sup_v}", r.delta);
            }
            // a Lipschitz bound |Dv| ≤ cap gives osc over B(r/δ) ≤ 2·cap·r
            let radius = 0.5;
            let o = oscillation(&dv, 0, radius / r.delta) / radius;
            ensure!(o <= 2.0 * r.gradient_cap, "δ = {}: oscillation ratio {o} above {}", r.delta, 2.0 * r.gradient_cap);
            osc.push(o);
            // comparison with constants pins δv between inf and sup of −H(p, ·)
            let w = dv.max() - dv.min();
            ensure!(w <= pot.max() - pot.min() + 1e-6, "δ = {}: box oscillation {w}", r.delta);
            wide.push(w);
        }
        lines.push(format!("p = {:?}: osc/r {osc:.2?}, box osc {wide:.2?}", runs[0].p));
    }
    Ok(lines.join("; "))
}

fn monotonicity() -> Outcome {
    let ham = HamiltonianSpec::quadratic();
    let p = [1.5, 0.0];
    let (b, c) = metric_box(&torus(0), 0, 128)?;
    let lo = solve_metric(&b, &ham, p, 2.4, &[c], c, &MetricOptions::default())?;
    let hi = solve_metric(&b, &ham, p, 2.8, &[c], c, &MetricOptions::default())?;
    let dip = lo.m.values().iter().zip(hi.m.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    ensure!(dip <= 1e-9, "m at μ = 2.8 dips {dip} below μ = 2.4");
    let seeds = 5;
    let mut infeasible = 0;
    for seed in 0..seeds {
        let env = torus(seed);
        let hbar = estimate_hbar_delta(&[env.clone()], &ham, p, &torus_schedule())?.estimate;
        let (b, c) = metric_box(&env, 0, 128)?;
        if !solve_metric(&b, &ham, p, hbar - 0.3, &[c], c, &MetricOptions::default())?.feasible {
            infeasible += 1;
        }
    }
    ensure!(5 * infeasible >= 4 * seeds, "only {infeasible}/{seeds} seeds infeasible");
    Ok(format!("monotone in μ; {infeasible}/{seeds} seeds infeasible at H̄ − 0.3"))
}

fn oracle_equivalence() -> Outcome {
    let ham = HamiltonianSpec::quadratic();
    let mut delta_gap: f64 = 0.0;
    for seed in 0..3 {
        let env = EnvironmentSample::poisson(1.0, 0.5, 8.0, 2, 16, seed)?;
        let p = [0.7, -0.3];
        let fast = solve_delta(
            &env,
            &ham,
            p,
            0.5,
            &DeltaOptions {
                tol: 1e-11,
                max_iters: 100_000,
                ..DeltaOptions::default()
            },
        )?;
        let slow = brute_force_delta(&env.potential, &ham, p, 0.5, 1e-11)?;
        let gap = fast.v.values().iter().zip(slow.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        delta_gap = delta_gap.max(gap);
    }
    ensure!(delta_gap <= 1e-8, "δ-solver vs brute force: {delta_gap:e}");
    let mut ring: f64 = 0.0;
    for seed in 0..3 {
        let n = 1024;
        let env = EnvironmentSample::poisson(1.0, 0.5, 32.0, 2, n, seed)?;
        let (b, c) = metric_box(&env.potential, env.potential.grid().index([n / 2, n / 2]), 64)?;
        let m = solve_metric(&b, &ham, [0.0; MAX_DIM], 1.0, &[c], c, &MetricOptions::default())?;
        let graph = graph_metric(&b, &ham, 1.0, &[c], 3)?;
        let g = b.grid();
        for k in 0..g.len() {
            let r = g.distance(g.position(k), g.position(c)) / g.h();
            if (56.0..=64.0).contains(&r) {
                ring = ring.max((m.m.get(k) / graph.get(k) - 1.0).abs());
            }
        }
    }
    ensure!(ring <= 0.05, "metric vs graph: {:.2}%", 100.0 * ring);
    Ok(format!("δ gap {delta_gap:.1e}; metric vs graph {:.1}% on the outer ring", 100.0 * ring))
}

#[test]
fn acceptance() {
    let mut log = Vec::new();
    let mut flat = Vec::new();
    let mut route_data = None;
    run(&mut log, 1, "constant environment", constant_environment);
    run(&mut log, 2, "1-d periodic oracle", periodic_oracle);
    run(&mut log, 3, "flat spot", || flat_spot(&mut flat));
    match catch_unwind(line_table) {
        Ok(Ok(t)) => {
            run(&mut log, 4, "convexity", || convexity(&t));
            run(&mut log, 5, "coercivity sandwich", || coercivity(&t));
            run(&mut log, 6, "Lipschitz in p", || lipschitz(&t));
        }
        other => {
            let why = match other {
                Ok(Err(e)) => e.to_string(),
                _ => "panicked".into(),
            };
            for (id, name) in [(4, "convexity"), (5, "coercivity sandwich"), (6, "Lipschitz in p")] {
                run(&mut log, id, name, || Err(format!("table failed: {why}").into()));
            }
        }
    }
    run(&mut log, 7, "metric subadditivity", subadditivity);
    run(&mut log, 9, "route consistency", || routes(&mut route_data));
    run(&mut log, 8, "metric homogenization", || metric_homogenization(&route_data));
    run(&mut log, 10, "homogenization closure", closure);
    run(&mut log, 11, "Feynman-Kac cross-check", feynman_kac);
    run(&mut log, 12, "δ-problem bounds", || delta_bounds(&flat));
    run(&mut log, 13, "μ-monotonicity and infeasibility", monotonicity);
    run(&mut log, 14, "oracle equivalence", oracle_equivalence);
    log.sort();
    let failed: Vec<usize> = log.iter().filter(|x| !x.1).map(|x| x.0).collect();
    report(&format!("{}/{} criteria pass", log.len() - failed.len(), log.len()));
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
