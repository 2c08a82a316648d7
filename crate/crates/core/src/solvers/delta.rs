use log::warn;

use super::sweep::Engine;
use crate::env::EnvironmentSample;
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::numerics::{ScalarField, MAX_DIM};

/// Converged solution of `δv − a·Δv + H(p + Dv, y) = 0` on a periodic grid.
#[derive(Clone, Debug)]
pub struct DeltaProblemResult {
    pub v: ScalarField,
    pub delta: f64,
    pub p: [f64; MAX_DIM],
    /// Max-norm of the discrete equation at return.
    pub residual: f64,
    /// Gauss-Seidel rounds, each covering every sweep ordering once.
    pub iterations: usize,
    pub history: Vec<f64>,
    /// Largest realised `|p + Dv|` (one-sided maxima per axis).
    pub max_gradient: f64,
    /// The Bernstein-shaped cap the dissipation audit compares against.
    pub gradient_cap: f64,
}

impl DeltaProblemResult {
    /// `−mean(δv)`, the per-run statistic for `H̄(p)`.
    pub fn hbar_estimate(&self) -> f64 {
        -self.delta * self.v.mean()
    }

    pub fn scaled(&self) -> ScalarField {
        let d = self.delta;
        self.v.map(|x| d * x)
    }
}

#[derive(Clone, Debug)]
pub struct DeltaOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Starting field; shifted by a constant to match the new `δ` before use.
    pub initial: Option<ScalarField>,
    /// Remove the mean residual by a constant shift after every round, until
    /// that stops paying off.
    pub recenter: bool,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        DeltaOptions {
            tol: 1e-8,
            max_iters: 2000,
            initial: None,
            recenter: true,
        }
    }
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn gradient_cap(ham: &impl Hamiltonian, sup_potential: f64, p: &[f64]) -> f64 {
    (4.0 / ham.c0() * (1.0 + sup_potential.max(0.0))).powf(1.0 / ham.gamma()) + norm(p)
}

fn check_common(potential: &ScalarField, ham: &impl Hamiltonian, delta: f64, tol: f64) -> Result<()> {
    if !potential.grid().is_periodic() {
        return Err(Error::param("grid", "the δ-problem is posed on a periodic grid"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let s2 = ham.diffusion().sigma2();
    if !(s2.is_finite() && s2 >= 0.0) {
        return Err(Error::param("sigma2", "diffusion must be non-negative"));
    }
    Ok(())
}

pub fn solve_delta(
    env: &EnvironmentSample,
    ham: &impl Hamiltonian,
    p: [f64; MAX_DIM],
    delta: f64,
    opts: &DeltaOptions,
) -> Result<DeltaProblemResult> {
    solve_delta_on(&env.potential, ham, p, delta, opts)
}

/// [`solve_delta`] for an explicit periodic potential field.
pub fn solve_delta_on(
    potential: &ScalarField,
    ham: &impl Hamiltonian,
    p: [f64; MAX_DIM],
    delta: f64,
    opts: &DeltaOptions,
) -> Result<DeltaProblemResult> {
    check_common(potential, ham, delta, opts.tol)?;
    let grid = potential.grid();
    if grid.side() * delta < 1.0 {
        warn!("box side {} is below 1/δ = {}", grid.side(), 1.0 / delta);
    }
    let engine = Engine {
        ham,
        grid,
        potential: potential.values(),
        p,
        delta,
        rhs: 0.0,
        diffusion: ham.diffusion().sigma2(),
        pinned: None,
        ftol: 0.05 * opts.tol,
        rising_edges: false,
    };
    let mut v = match &opts.initial {
        Some(f) if f.grid() == grid => f.values().to_vec(),
        Some(_) => return Err(Error::param("initial", "starting field lives on a different grid")),
        None => {
            // the constant subsolution −max H(p, ·)/δ
            let top = potential
                .values()
                .iter()
                .map(|&w| ham.value(&p[..grid.dim()], w))
                .fold(f64::NEG_INFINITY, f64::max);
            vec![-top / delta; grid.len()]
        }
    };
    let cap = gradient_cap(ham, potential.max(), &p[..grid.dim()]);
    let mut history = Vec::new();
    let mut recenter = opts.recenter;
    let mut residual = settle(&engine, &mut v, recenter);
    history.push(residual);
    let mut rounds = 0;
    while residual > opts.tol {
        // the shift can lock into a cycle with the sweeps; plain sweeps cannot
        if recenter && rounds >= 10 && residual > 0.9 * history[rounds - 10] {
            recenter = false;
        }
        if rounds >= opts.max_iters || !residual.is_finite() {
            let g = engine.max_gradient(&v);
            return Err(Error::Divergence {
                solver: "solve_delta",
                iterations: rounds,
                last_residual: residual,
                history,
                note: Some(format!("max |p + Dv| = {g:.4} against gradient cap {cap:.4}")),
            });
        }
        for o in 0..engine.orderings() {
            engine.sweep(&mut v, o, false);
        }
        rounds += 1;
        residual = settle(&engine, &mut v, recenter);
        history.push(residual);
    }
    let max_gradient = engine.max_gradient(&v);
    Ok(DeltaProblemResult {
        v: ScalarField::new(grid.clone(), v).map_err(|e| Error::Solver {
            solver: "solve_delta",
            reason: e.to_string(),
        })?,
        delta,
        p,
        residual,
        iterations: rounds,
        history,
        max_gradient,
        gradient_cap: cap,
    })
}

fn settle<H: Hamiltonian>(engine: &Engine<'_, H>, v: &mut [f64], recenter: bool) -> f64 {
    if recenter {
        shift_constant_mode(engine, v)
    } else {
        engine.residuals(v).iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Removes the mean residual with a constant shift (which moves every
/// residual by exactly `δ·c`) and returns the resulting max residual.
fn shift_constant_mode<H: Hamiltonian>(engine: &Engine<'_, H>, v: &mut [f64]) -> f64 {
    let r = engine.residuals(v);
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let c = mean / engine.delta;
    for x in v.iter_mut() {
        *x -= c;
    }
    r.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max)
}

/// Reference solution by damped explicit pseudo-time iteration
/// `v ← v − τ·F(v)` on grids with at most `32^d` nodes.
pub fn brute_force_delta(
    potential: &ScalarField,
    ham: &impl Hamiltonian,
    p: [f64; MAX_DIM],
    delta: f64,
    tol: f64,
) -> Result<ScalarField> {
    check_common(potential, ham, delta, tol)?;
    let grid = potential.grid();
    if grid.n() > 32 {
        return Err(Error::param("grid", "the brute-force oracle is limited to 32 nodes per side"));
    }
    let engine = Engine {
        ham,
        grid,
        potential: potential.values(),
        p,
        delta,
        rhs: 0.0,
        diffusion: ham.diffusion().sigma2(),
        pinned: None,
        ftol: 0.0,
        rising_edges: false,
    };
    let d = grid.dim();
    let h = grid.h();
    let mut v = vec![0.0; grid.len()];
    let max_iters = 5_000_000;
    for it in 0..max_iters {
        let r = engine.residuals(&v);
        let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if worst < tol {
            return ScalarField::new(grid.clone(), v).map_err(|e| Error::Oracle(e.to_string()));
        }
        if !worst.is_finite() {
            return Err(Error::Oracle(format!("brute-force iteration blew up at step {it}")));
        }
        let g = engine.max_gradient(&v);
        let alpha = ham.slope_bound(2.0 * g + 1.0, 0.0).max(ham.slope_bound(2.0 * g + 1.0, potential.min()));
        let tau = 0.5 / (delta + d as f64 * (alpha + 2.0 * engine.diffusion / h) / h);
        for (x, rk) in v.iter_mut().zip(&r) {
            *x -= tau * rk;
        }
    }
    Err(Error::Oracle(format!("brute-force iteration did not reach {tol:e} in {max_iters} steps")))
}
