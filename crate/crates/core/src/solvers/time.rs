use crate::error::{Error, Result};
use crate::hamiltonian::{dissipation_bound, scheme_operator, HamiltonianSpec};
use crate::numerics::{Grid, LocalStencil, ScalarField, Side, MAX_DIM};

/// Slices of `u^ε` at the requested times.
#[derive(Clone, Debug)]
pub struct TimeDependentResult {
    pub slices: Vec<ScalarField>,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub cfl_dt: f64,
    pub steps: usize,
    /// Bound on the upwind gradient the time step was built from.
    pub gradient_cap: f64,
}

/// `V(x/ε)` on a macroscopic grid whose node 0 sits at `origin`, read from
/// a periodic environment raster. Nodes that land on raster nodes are copied
/// exactly, others are interpolated.
pub fn scaled_potential(env: &ScalarField, macro_grid: &Grid, origin: [f64; MAX_DIM], epsilon: f64) -> Result<ScalarField> {
    if !env.grid().is_periodic() {
        return Err(Error::param("potential", "environment raster must be periodic"));
    }
    if env.grid().dim() != macro_grid.dim() {
        return Err(Error::param("grid", "macroscopic and environment dimensions differ"));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    let eh = env.grid().h();
    let n = env.grid().n() as i64;
    let values = (0..macro_grid.len())
        .map(|k| {
            let x = macro_grid.position(k);
            let mut y = [0.0; MAX_DIM];
            let mut node = [0usize; MAX_DIM];
            let mut aligned = true;
            for a in 0..macro_grid.dim() {
                y[a] = (origin[a] + x[a]) / epsilon;
                let s = y[a] / eh;
                let r = s.round();
                aligned &= (s - r).abs() < 1e-9;
                node[a] = (r as i64).rem_euclid(n) as usize;
            }
            if aligned {
                env.get(env.grid().index(node))
            } else {
                env.interpolate(y)
            }
        })
        .collect();
    ScalarField::new(macro_grid.clone(), values)
}

/// One-sided differences where an outflow edge never acts as the upwind
/// side, which keeps the explicit step monotone up to the edge.
fn edge_gradients(grid: &Grid, u: &[f64], k: usize) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
    let (mut qm, mut qp) = LocalStencil::gather(grid, u, k).gradients(u[k]);
    for a in 0..grid.dim() {
        match grid.axis_neighbors(k, a) {
            (_, Side::Mirror) => qp[a] = qm[a].max(0.0),
            (Side::Mirror, _) => qm[a] = qp[a].min(0.0),
            _ => {}
        }
    }
    (qm, qp)
}

/// Bound on `|Du|` for `u_t + H(Du, x/ε) = ε·a·Δu`: `H(Du) = −u_t` stays
/// within the range of `H(Du0)`.
fn time_gradient_cap(spec: &HamiltonianSpec, u0: &ScalarField, potential: &ScalarField) -> f64 {
    let g = u0.grid();
    let lip = (0..g.len())
        .map(|k| {
            let (qm, qp) = LocalStencil::gather(g, u0.values(), k).gradients(u0.get(k));
            (0..g.dim()).map(|a| qm[a].abs().max(qp[a].abs()).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0f64, f64::max);
    let (vmin, vmax) = (potential.min().max(0.0), potential.max().max(0.0));
    let range = spec.c0 * lip.powf(spec.gamma) + vmax + vmin;
    (range / spec.c0 + 1.0).powf(1.0 / spec.gamma).max(lip) + 1.0
}

/// Forward Euler for `u_t − ε·σ²·Δu + H(Du, x/ε) = 0` with the
/// upwind operator. `potential` already holds `V(x/ε)` on the grid of
/// `u0`. With `dt = None` the step is the largest one allowed by
/// `dt·(d·b/h + 2d·εσ²/h²) ≤ 0.9`, `b` the dissipation bound at the gradient
/// cap; an explicit `dt` beyond that is rejected.
pub fn solve_time_dependent(
    potential: &ScalarField,
    spec: &HamiltonianSpec,
    u0: &ScalarField,
    epsilon: f64,
    output_times: &[f64],
    dt: Option<f64>,
) -> Result<TimeDependentResult> {
    spec.validate()?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    if potential.grid() != u0.grid() {
        return Err(Error::param("potential", "potential and initial data must share a grid"));
    }
    if output_times.is_empty() || output_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::param("times", "need at least one finite non-negative output time"));
    }
    if output_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "output times must be sorted"));
    }
    let grid = u0.grid();
    let h = grid.h();
    let d = grid.dim() as f64;
    let a = epsilon * spec.diffusion.sigma2();
    let cap = time_gradient_cap(spec, u0, potential);
    let b = dissipation_bound(spec, cap);
    let rate = d * b / h + 2.0 * d * a / (h * h);
    let cfl = if rate > 0.0 { 0.9 / rate } else { f64::INFINITY };
    let dt = match dt {
        Some(x) if !(x.is_finite() && x > 0.0) => return Err(Error::param("dt", format!("must be positive, got {x}"))),
        Some(x) if x > cfl * (1.0 + 1e-12) => {
            return Err(Error::param("dt", format!("{x} violates the stability bound {cfl}")));
        }
        Some(x) => x,
        None => cfl,
    };
    let mut u = u0.values().to_vec();
    let mut next = vec![0.0; u.len()];
    let mut t = 0.0;
    let mut steps = 0;
    let mut slices = Vec::with_capacity(output_times.len());
    for &target in output_times {
        while t < target - 1e-12 * target.max(1.0) {
            let tau = dt.min(target - t);
            let (mut gmax, mut at): (f64, usize) = (0.0, 0);
            for k in 0..u.len() {
                let (qm, qp) = edge_gradients(grid, &u, k);
                let g2: f64 = (0..grid.dim()).map(|i| qm[i].max(-qp[i]).max(0.0).powi(2)).sum();
                if g2 > gmax {
                    (gmax, at) = (g2, k);
                }
                let op = scheme_operator(spec, potential.get(k), &qm, &qp, grid.dim(), h, a);
                next[k] = u[k] - tau * op;
            }
            if gmax.sqrt() > cap {
                return Err(Error::Solver {
                    solver: "solve_time_dependent",
                    reason: format!("gradient {} exceeded the cap {cap} at t = {t}, x = {:?}", gmax.sqrt(), grid.position(at)),
                });
            }
            std::mem::swap(&mut u, &mut next);
            t += tau;
            steps += 1;
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Solver {
                solver: "solve_time_dependent",
                reason: format!("non-finite values at t = {t}"),
            });
        }
        slices.push(ScalarField::new(grid.clone(), u.clone())?);
    }
    Ok(TimeDependentResult {
        slices,
        epsilon,
        times: output_times.to_vec(),
        cfl_dt: dt,
        steps,
        gradient_cap: cap,
    })
}
