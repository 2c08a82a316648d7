use super::delta::norm;
use super::sweep::Engine;
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::numerics::{Grid, ScalarField, MAX_DIM};

/// `m_μ(·, source)` on a box with outflow edges.
#[derive(Clone, Debug)]
pub struct MetricSolution {
    pub m: ScalarField,
    pub mu: f64,
    pub p: [f64; MAX_DIM],
    pub source: Vec<usize>,
    /// Node the box is centred on; offsets are measured from it.
    pub center: usize,
    pub feasible: bool,
    /// `(direction, m(t·e)/t)` at `t` just inside the box.
    pub asymptotic_slopes: Vec<([f64; MAX_DIM], f64)>,
    pub slope_tol: f64,
    pub rounds: usize,
    /// Largest change per round (inviscid) or max residual (viscous).
    pub history: Vec<f64>,
}

impl MetricSolution {
    /// Bilinear value at `offset` from the centre node.
    pub fn value_at(&self, offset: [f64; MAX_DIM]) -> f64 {
        let c = self.m.grid().position(self.center);
        self.m.interpolate([c[0] + offset[0], c[1] + offset[1]])
    }

    pub fn slope(&self, e: [f64; MAX_DIM], t: f64) -> f64 {
        self.value_at([t * e[0], t * e[1]]) / t
    }

    /// Half-width of the box around the centre, in length units.
    pub fn reach(&self) -> f64 {
        let g = self.m.grid();
        let ij = g.multi_index(self.center);
        (0..g.dim())
            .map(|a| ij[a].min(g.n() - 1 - ij[a]) as f64 * g.h())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct MetricOptions {
    /// Convergence threshold on the largest change per round.
    pub tol: f64,
    /// Window over which the update size must at least halve; a solve that
    /// stops contracting is declared infeasible.
    pub max_rounds: usize,
    /// Negative-slope allowance, divided by the box diagonal.
    pub slope_fraction: f64,
    /// Frozen `δ` for the viscous variant.
    pub viscous_delta: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            tol: 1e-6,
            max_rounds: 50,
            slope_fraction: 0.02,
            viscous_delta: 1e-3,
        }
    }
}

/// Unit directions used for asymptotic slopes: the axes and diagonals.
pub fn probe_directions(dim: usize) -> Vec<[f64; MAX_DIM]> {
    if dim == 1 {
        return vec![[1.0, 0.0], [-1.0, 0.0]];
    }
    (0..8)
        .map(|k| {
            let t = k as f64 * std::f64::consts::FRAC_PI_4;
            [t.cos(), t.sin()]
        })
        .collect()
}

/// Outflow box of `2·half + 1` nodes per side centred on node `center` of a
/// periodic environment raster, filled with the periodic extension of that
/// raster. Returns the box potential and the index of its centre node.
pub fn metric_box(env_potential: &ScalarField, center: usize, half: usize) -> Result<(ScalarField, usize)> {
    let eg = env_potential.grid();
    if !eg.is_periodic() {
        return Err(Error::param("potential", "environment raster must be periodic"));
    }
    let n = 2 * half + 1;
    let grid = Grid::outflow(eg.dim(), n, eg.h())?;
    let c = eg.multi_index(center);
    let en = eg.n() as i64;
    let values = (0..grid.len())
        .map(|k| {
            let ij = grid.multi_index(k);
            let mut src = [0usize; MAX_DIM];
            for a in 0..eg.dim() {
                src[a] = (c[a] as i64 + ij[a] as i64 - half as i64).rem_euclid(en) as usize;
            }
            env_potential.get(eg.index(src))
        })
        .collect();
    let mid = grid.index([half, if eg.dim() == 2 { half } else { 0 }]);
    Ok((ScalarField::new(grid, values)?, mid))
}

/// Source set per the dichotomy: the centre node alone for first-order
/// problems or `γ > 2`, otherwise the discrete ball of radius
/// `max(eps_phys, 2h)`.
pub fn source_set(grid: &Grid, center: usize, ham: &impl Hamiltonian, eps_phys: Option<f64>) -> Vec<usize> {
    if ham.diffusion().sigma2() == 0.0 || ham.gamma() > 2.0 {
        vec![center]
    } else {
        let r = eps_phys.unwrap_or(2.0 * grid.h()).max(2.0 * grid.h());
        grid.ball(center, r)
    }
}

/// Solves `H(p + Dm, y) − a·Δm = μ` off the source with `m = 0` on it.
///
/// First-order problems use fast sweeping with monotone min-updates from
/// the supersolution `1.5·K·|y − center|`. Problems with diffusion reuse
/// the δ-problem kernel with a small frozen `δ`.
pub fn solve_metric(
    potential: &ScalarField,
    ham: &impl Hamiltonian,
    p: [f64; MAX_DIM],
    mu: f64,
    source: &[usize],
    center: usize,
    opts: &MetricOptions,
) -> Result<MetricSolution> {
    let grid = potential.grid();
    if grid.is_periodic() {
        return Err(Error::param("grid", "the metric problem needs a non-periodic box"));
    }
    if !mu.is_finite() {
        return Err(Error::param("mu", "must be finite"));
    }
    if source.is_empty() || source.iter().any(|&k| k >= grid.len()) || center >= grid.len() {
        return Err(Error::param("source", "source nodes must lie in the box"));
    }
    let dim = grid.dim();
    let mut pinned = vec![false; grid.len()];
    for &k in source {
        pinned[k] = true;
    }
    let diffusion = ham.diffusion().sigma2();
    let viscous = diffusion > 0.0;
    let k_speed = norm(&p[..dim])
        + ham.level_radius(mu, potential.max()).max(ham.level_radius(mu, potential.min()));
    let scale = if viscous { 2.0 } else { 1.5 };
    let c = grid.position(center);
    let mut v: Vec<f64> = (0..grid.len())
        .map(|k| if pinned[k] { 0.0 } else { scale * k_speed.max(1e-9) * grid.distance(grid.position(k), c) })
        .collect();
    let engine = Engine {
        ham,
        grid,
        potential: potential.values(),
        p,
        delta: if viscous { opts.viscous_delta } else { 0.0 },
        rhs: mu,
        diffusion,
        pinned: Some(&pinned),
        ftol: 1e-3 * opts.tol,
        rising_edges: !viscous,
    };
    let mut history = Vec::new();
    let mut converged = false;
    let mut rounds = 0;
    let window = opts.max_rounds.max(2);
    let budget = 40 * window;
    while rounds < budget {
        let mut change: f64 = 0.0;
        for o in 0..engine.orderings() {
            change = change.max(engine.sweep(&mut v, o, !viscous));
        }
        rounds += 1;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Solver {
                solver: "solve_metric",
                reason: format!("non-finite values after {rounds} rounds"),
            });
        }
        let stat = if viscous {
            engine.residuals(&v).iter().fold(0.0f64, |m, x| m.max(x.abs()))
        } else {
            change
        };
        history.push(stat);
        if stat < opts.tol {
            converged = true;
            break;
        }
        // the viscous residual rises before it settles, so it gets a warm-up window
        let warmup = if viscous { 2 * window } else { window };
        if rounds >= warmup && stat > 0.5 * history[rounds - window] {
            break;
        }
    }
    let m = ScalarField::new(grid.clone(), v)?;
    let mut sol = MetricSolution {
        m,
        mu,
        p,
        source: source.to_vec(),
        center,
        feasible: false,
        asymptotic_slopes: Vec::new(),
        slope_tol: 0.0,
        rounds,
        history,
    };
    let t = sol.reach() - grid.h();
    sol.slope_tol = opts.slope_fraction / (2.0 * sol.reach() * (dim as f64).sqrt());
    sol.asymptotic_slopes = probe_directions(dim).into_iter().map(|e| (e, sol.slope(e, t))).collect();
    // the secant over the outer half cancels the offset built up near the source
    let secant = |e: [f64; MAX_DIM]| {
        (sol.value_at([t * e[0], t * e[1]]) - sol.value_at([0.5 * t * e[0], 0.5 * t * e[1]])) / (0.5 * t)
    };
    let growing = probe_directions(dim).into_iter().all(|e| secant(e) >= -sol.slope_tol);
    sol.feasible = converged && growing;
    Ok(sol)
}
