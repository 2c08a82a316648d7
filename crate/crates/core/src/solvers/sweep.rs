//! Nonlinear Gauss-Seidel kernel shared by the static solvers.
//!
//! The discrete equation at node `k` is
//! `δ·v_k + Ĥ(p + D⁻v, p + D⁺v, V_k) − a·Δv_k = rhs` with the local
//! upwind operator from [`crate::hamiltonian::scheme_operator`].
//! Holding the neighbours fixed it is a nondecreasing function of `v_k`, so
//! each update is a bracketed scalar root.
//!
//! Outflow edges use a lagged ghost by default: the missing neighbour is the
//! linear extrapolation through the current centre value, frozen during the
//! local solve. At a fixed point this is the linear extrapolation rule, and
//! it keeps the local function monotone. With `rising_edges` the ghost is the
//! live extrapolation `2x − w` instead, restricted so that `x + p·y` does not
//! decrease outward; on that branch the local function is again
//! monotone.

use crate::hamiltonian::{scheme_operator_with_alpha, Hamiltonian};
use crate::numerics::{Grid, Side, MAX_DIM};

#[derive(Clone, Copy)]
enum Ghost {
    Value(f64),
    Slope(f64),
    /// Live extrapolation through the opposite neighbour value.
    Through(f64),
}

#[derive(Clone, Copy)]
pub(crate) struct Local {
    minus: [Ghost; MAX_DIM],
    plus: [Ghost; MAX_DIM],
    potential: f64,
    /// Smallest admissible centre value.
    floor: f64,
}

pub(crate) struct Engine<'a, H> {
    pub ham: &'a H,
    pub grid: &'a Grid,
    pub potential: &'a [f64],
    pub p: [f64; MAX_DIM],
    pub delta: f64,
    pub rhs: f64,
    pub diffusion: f64,
    pub pinned: Option<&'a [bool]>,
    /// Local solves stop once `|F| ≤ ftol`.
    pub ftol: f64,
    pub rising_edges: bool,
}

impl<H: Hamiltonian> Engine<'_, H> {
    pub fn local(&self, v: &[f64], k: usize) -> Local {
        let mut minus = [Ghost::Slope(0.0); MAX_DIM];
        let mut plus = [Ghost::Slope(0.0); MAX_DIM];
        let mut floor = f64::NEG_INFINITY;
        for a in 0..self.grid.dim() {
            let (m, p) = self.grid.axis_neighbors(k, a);
            let direct = |s: Side| match s {
                Side::Node(j) => Some(Ghost::Value(v[j])),
                Side::Slope(q) => Some(Ghost::Slope(q)),
                Side::Mirror => None,
            };
            // `shift` is the change of `p·y` from the neighbour to this node
            let mut ghost = |other: Side, shift: f64| match other {
                Side::Node(j) if self.rising_edges => {
                    floor = floor.max(v[j] - shift);
                    Ghost::Through(v[j])
                }
                Side::Node(j) => Ghost::Value(2.0 * v[k] - v[j]),
                Side::Slope(q) => Ghost::Slope(q),
                Side::Mirror => Ghost::Slope(0.0),
            };
            let ph = self.p[a] * self.grid.h();
            minus[a] = direct(m).unwrap_or_else(|| ghost(p, -ph));
            plus[a] = direct(p).unwrap_or_else(|| ghost(m, ph));
        }
        Local {
            minus,
            plus,
            potential: self.potential[k],
            floor,
        }
    }

    #[inline]
    pub fn gradients(&self, loc: &Local, x: f64) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let h = self.grid.h();
        let mut qm = [0.0; MAX_DIM];
        let mut qp = [0.0; MAX_DIM];
        for a in 0..self.grid.dim() {
            qm[a] = self.p[a]
                + match loc.minus[a] {
                    Ghost::Value(w) => (x - w) / h,
                    Ghost::Slope(s) => s,
                    Ghost::Through(w) => (w - x) / h,
                };
            qp[a] = self.p[a]
                + match loc.plus[a] {
                    Ghost::Value(w) => (w - x) / h,
                    Ghost::Slope(s) => s,
                    Ghost::Through(w) => (x - w) / h,
                };
        }
        (qm, qp)
    }

    /// The local equation and its sensitivity to the node value (times `h`).
    #[inline]
    pub fn eval(&self, loc: &Local, x: f64) -> (f64, f64) {
        let (qm, qp) = self.gradients(loc, x);
        let (op, alpha) = scheme_operator_with_alpha(
            self.ham,
            loc.potential,
            &qm,
            &qp,
            self.grid.dim(),
            self.grid.h(),
            self.diffusion,
        );
        (self.delta * x + op - self.rhs, alpha)
    }

    pub fn residual_at(&self, v: &[f64], k: usize) -> f64 {
        if self.is_pinned(k) {
            return 0.0;
        }
        self.eval(&self.local(v, k), v[k]).0
    }

    pub fn residuals(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len()).map(|k| self.residual_at(v, k)).collect()
    }

    #[inline]
    fn is_pinned(&self, k: usize) -> bool {
        self.pinned.is_some_and(|p| p[k])
    }

    /// Largest `max(|q⁻|, |q⁺|)` norm over the grid.
    pub fn max_gradient(&self, v: &[f64]) -> f64 {
        (0..v.len())
            .map(|k| {
                let (qm, qp) = self.gradients(&self.local(v, k), v[k]);
                (0..self.grid.dim())
                    .map(|a| qm[a].abs().max(qp[a].abs()).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// New value at node `k`. With `min_update` the value never increases.
    pub fn update(&self, v: &[f64], k: usize, min_update: bool) -> f64 {
        let x0 = v[k];
        let loc = self.local(v, k);
        if min_update && x0 <= loc.floor {
            return x0;
        }
        let x0 = x0.max(loc.floor);
        let (f0, alpha) = self.eval(&loc, x0);
        if f0.abs() <= self.ftol || (min_update && f0 <= 0.0) {
            return x0;
        }
        let h = self.grid.h();
        let d = self.grid.dim() as f64;
        let slope = self.delta + (alpha + d * 2.0 * self.diffusion / h) / h;
        let mut step = if slope > 0.0 { f0.abs() / slope } else { h };
        if f0 > 0.0 && loc.floor > f64::NEG_INFINITY {
            if self.eval(&loc, loc.floor).0 >= 0.0 {
                return loc.floor;
            }
            step = step.min(x0 - loc.floor);
        }
        solve_monotone(|x| self.eval(&loc, x).0, x0, f0, step, self.ftol, loc.floor)
    }

    /// One Gauss-Seidel pass in ordering `order` (bit `a` set = descending
    /// along axis `a`). Returns the largest change.
    pub fn sweep(&self, v: &mut [f64], order: usize, min_update: bool) -> f64 {
        let n = self.grid.n();
        let dim = self.grid.dim();
        let range = |desc: bool| -> Box<dyn Iterator<Item = usize>> {
            if desc {
                Box::new((0..n).rev())
            } else {
                Box::new(0..n)
            }
        };
        let mut biggest: f64 = 0.0;
        let mut visit = |k: usize, v: &mut [f64]| {
            if self.is_pinned(k) {
                return;
            }
            let x = self.update(v, k, min_update);
            biggest = biggest.max((x - v[k]).abs());
            v[k] = x;
        };
        if dim == 1 {
            for i in range(order & 1 == 1) {
                visit(i, v);
            }
        } else {
            for i in range(order & 1 == 1) {
                for j in range(order & 2 == 2) {
                    visit(i * n + j, v);
                }
            }
        }
        biggest
    }

    pub fn orderings(&self) -> usize {
        1 << self.grid.dim()
    }
}

/// Root of a nondecreasing function starting from `x0` with `f(x0) = f0`:
/// geometric bracketing in the downhill direction (never below `lower`),
/// then Illinois false position.
pub(crate) fn solve_monotone(f: impl Fn(f64) -> f64, x0: f64, f0: f64, step: f64, ftol: f64, lower: f64) -> f64 {
    if f0 == 0.0 {
        return x0;
    }
    let dir = if f0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = step.max(1e-12 * (1.0 + x0.abs()));
    let (mut a, mut fa) = (x0, f0);
    let (mut b, mut fb);
    let mut tries = 0;
    loop {
        b = (a + dir * step).max(lower);
        fb = f(b);
        if fb.abs() <= ftol {
            return b;
        }
        if (fb > 0.0) != (fa > 0.0) {
            break;
        }
        a = b;
        fa = fb;
        step *= 2.0;
        tries += 1;
        if tries > 200 || !fb.is_finite() || b == lower {
            return b;
        }
    }
    let (mut lo, mut flo, mut hi, mut fhi) = if fa < 0.0 { (a, fa, b, fb) } else { (b, fb, a, fa) };
    let mut last = 0i8;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        x = (lo * fhi - hi * flo) / (fhi - flo);
        let (l, u) = if lo < hi { (lo, hi) } else { (hi, lo) };
        if !(x > l && x < u) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx.abs() <= ftol {
            return x;
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if last == -1 {
                fhi *= 0.5;
            }
            last = -1;
        } else {
            hi = x;
            fhi = fx;
            if last == 1 {
                flo *= 0.5;
            }
            last = 1;
        }
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            break;
        }
    }
    x
}
