//! Uniform grids, scalar fields and the finite-difference stencils shared by
//! every solver.
//!
//! Nodes are addressed by a flat row-major index. In two dimensions node
//! `(i, j)` sits at `(i·h, j·h)` and has index `i·n + j`; axis 0 is the slow
//! axis. Grids carry no origin: callers that work in shifted coordinates keep
//! the offset themselves.

mod format;

pub use format::{decode_field, encode_field, read_field, write_dat, write_field, FORMAT_VERSION, MAGIC};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// How the stencil is completed at the edge of a non-periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary {
    Periodic,
    /// Ghost nodes follow the linear data with the given slope, so the
    /// outward one-sided difference equals `slope[axis]`.
    Dirichlet { slope: [f64; MAX_DIM] },
    /// Ghost nodes are the linear extrapolation of the two nodes nearest the
    /// edge: both one-sided differences at an edge node coincide.
    Outflow,
}

impl Boundary {
    pub(crate) fn tag(&self) -> u8 {
        match self {
            Boundary::Periodic => 0,
            Boundary::Dirichlet { .. } => 1,
            Boundary::Outflow => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
    boundary: Boundary,
}

impl Grid {
    pub fn new(dim: usize, n: usize, h: f64, boundary: Boundary) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::param("dim", format!("must be 1 or 2, got {dim}")));
        }
        if n < 8 {
            return Err(Error::param("n", format!("need at least 8 nodes per side, got {n}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param("h", format!("spacing must be positive, got {h}")));
        }
        if let Boundary::Dirichlet { slope } = &boundary {
            if slope.iter().any(|s| !s.is_finite()) {
                return Err(Error::param("slope", "boundary slope must be finite"));
            }
        }
        Ok(Grid {
            dim,
            n,
            h,
            boundary,
        })
    }

    pub fn periodic(dim: usize, n: usize, h: f64) -> Result<Self> {
        Self::new(dim, n, h, Boundary::Periodic)
    }

    /// Periodic grid with `n` nodes on a box of side `side`.
    pub fn periodic_box(dim: usize, n: usize, side: f64) -> Result<Self> {
        Self::new(dim, n, side / n as f64, Boundary::Periodic)
    }

    pub fn outflow(dim: usize, n: usize, h: f64) -> Result<Self> {
        Self::new(dim, n, h, Boundary::Outflow)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `n·h`, the period of a periodic grid.
    pub fn side(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn index(&self, ij: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => ij[0],
            _ => ij[0] * self.n + ij[1],
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    pub fn position(&self, idx: usize) -> [f64; MAX_DIM] {
        let ij = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = ij[a] as f64 * self.h;
        }
        x
    }

    fn stride(&self, axis: usize) -> usize {
        if self.dim == 1 || axis == 1 {
            1
        } else {
            self.n
        }
    }

    /// Index of the adjacent node along `axis`, wrapping on periodic grids.
    /// `None` when the neighbour lies outside a non-periodic grid.
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let k = self.multi_index(idx)[axis];
        let s = self.stride(axis);
        let n = self.n;
        match (forward, k) {
            (true, k) if k + 1 < n => Some(idx + s),
            (false, k) if k > 0 => Some(idx - s),
            _ if self.is_periodic() => Some(if forward { idx + s - n * s } else { idx + (n - 1) * s }),
            _ => None,
        }
    }

    /// Stencil neighbours of `idx` along `axis`, boundary rule applied.
    pub fn axis_neighbors(&self, idx: usize, axis: usize) -> (Side, Side) {
        let m = self.neighbor(idx, axis, false);
        let p = self.neighbor(idx, axis, true);
        let side = |nb: Option<usize>| match nb {
            Some(k) => Side::Node(k),
            None => match &self.boundary {
                Boundary::Dirichlet { slope } => Side::Slope(slope[axis]),
                _ => Side::Mirror,
            },
        };
        (side(m), side(p))
    }

    /// Displacement from `a` to `b`, using the nearest periodic image.
    pub fn displacement(&self, a: [f64; MAX_DIM], b: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
        let mut d = [0.0; MAX_DIM];
        let l = self.side();
        for k in 0..self.dim {
            let mut x = b[k] - a[k];
            if self.is_periodic() {
                x -= l * (x / l).round();
            }
            d[k] = x;
        }
        d
    }

    pub fn distance(&self, a: [f64; MAX_DIM], b: [f64; MAX_DIM]) -> f64 {
        let d = self.displacement(a, b);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Node indices within Euclidean distance `radius` of node `center`
    /// (periodic distance on periodic grids). Each node appears once.
    pub fn ball(&self, center: usize, radius: f64) -> Vec<usize> {
        let r = (radius / self.h).floor() as i64;
        let c = self.multi_index(center);
        let n = self.n as i64;
        let mut out = Vec::new();
        let span = |k: usize| -> Vec<i64> {
            let k = k as i64;
            if self.is_periodic() && 2 * r + 1 >= n {
                (0..n).map(|x| x - k).collect()
            } else {
                (-r..=r).collect()
            }
        };
        let di_range = span(c[0]);
        let dj_range = if self.dim == 2 { span(c[1]) } else { vec![0] };
        for &di in &di_range {
            for &dj in &dj_range {
                let mut ij = [0usize; MAX_DIM];
                let mut ok = true;
                for (a, d) in [di, dj].into_iter().enumerate().take(self.dim) {
                    let mut k = c[a] as i64 + d;
                    if self.is_periodic() {
                        k = k.rem_euclid(n);
                    } else if k < 0 || k >= n {
                        ok = false;
                    }
                    ij[a] = k as usize;
                }
                if !ok {
                    continue;
                }
                let idx = self.index(ij);
                if self.distance(self.position(center), self.position(idx)) <= radius + 1e-12 * self.h {
                    out.push(idx);
                }
            }
        }
        out
    }
}

/// One side of a one-dimensional stencil.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Side {
    Node(usize),
    /// Ghost from linear data: the one-sided difference is this slope.
    Slope(f64),
    /// Ghost by linear extrapolation: mirror the opposite one-sided difference.
    Mirror,
}

/// Neighbour values around one node, frozen so the centre value can vary.
#[derive(Clone, Copy, Debug)]
pub struct LocalStencil {
    pub dim: usize,
    pub h: f64,
    minus: [Ghost; MAX_DIM],
    plus: [Ghost; MAX_DIM],
}

#[derive(Clone, Copy, Debug)]
enum Ghost {
    Value(f64),
    Slope(f64),
    Mirror,
}

impl LocalStencil {
    pub fn gather(grid: &Grid, values: &[f64], idx: usize) -> Self {
        let mut minus = [Ghost::Mirror; MAX_DIM];
        let mut plus = [Ghost::Mirror; MAX_DIM];
        for a in 0..grid.dim {
            let (m, p) = grid.axis_neighbors(idx, a);
            let conv = |s: Side| match s {
                Side::Node(k) => Ghost::Value(values[k]),
                Side::Slope(q) => Ghost::Slope(q),
                Side::Mirror => Ghost::Mirror,
            };
            minus[a] = conv(m);
            plus[a] = conv(p);
        }
        LocalStencil {
            dim: grid.dim,
            h: grid.h,
            minus,
            plus,
        }
    }

    /// Backward and forward differences with the centre value set to `x`.
    #[inline]
    pub fn gradients(&self, x: f64) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let mut qm = [0.0; MAX_DIM];
        let mut qp = [0.0; MAX_DIM];
        for a in 0..self.dim {
            let m = match self.minus[a] {
                Ghost::Value(v) => Some((x - v) / self.h),
                Ghost::Slope(s) => Some(s),
                Ghost::Mirror => None,
            };
            let p = match self.plus[a] {
                Ghost::Value(v) => Some((v - x) / self.h),
                Ghost::Slope(s) => Some(s),
                Ghost::Mirror => None,
            };
            let (m, p) = match (m, p) {
                (Some(m), Some(p)) => (m, p),
                (Some(m), None) => (m, m),
                (None, Some(p)) => (p, p),
                (None, None) => (0.0, 0.0),
            };
            qm[a] = m;
            qp[a] = p;
        }
        (qm, qp)
    }
}

/// Values on every node of a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(
                "values",
                format!("expected {} values, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("values", format!("non-finite value at node {k}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let values = vec![value; grid.len()];
        ScalarField { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; MAX_DIM]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.position(k))).collect();
        ScalarField { grid, values }
    }


    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same values on a grid with a different boundary rule.
    pub fn with_boundary(&self, boundary: Boundary) -> Result<Self> {
        let grid = Grid::new(self.grid.dim, self.grid.n, self.grid.h, boundary)?;
        Ok(ScalarField {
            grid,
            values: self.values.clone(),
        })
    }

    /// Cyclic shift by whole nodes along each axis (`out[i + s] = self[i]`).
    pub fn shifted(&self, shift: [i64; MAX_DIM]) -> Self {
        let g = &self.grid;
        let n = g.n as i64;
        let mut out = vec![0.0; self.values.len()];
        for (k, &v) in self.values.iter().enumerate() {
            let ij = g.multi_index(k);
            let mut t = [0usize; MAX_DIM];
            for a in 0..g.dim {
                t[a] = (ij[a] as i64 + shift[a]).rem_euclid(n) as usize;
            }
            out[g.index(t)] = v;
        }
        ScalarField {
            grid: g.clone(),
            values: out,
        }
    }

    /// Bilinear interpolation at a point given in grid coordinates. Periodic
    /// grids wrap; other grids clamp to the box.
    pub fn interpolate(&self, x: [f64; MAX_DIM]) -> f64 {
        let g = &self.grid;
        let n = g.n;
        let mut base = [0usize; MAX_DIM];
        let mut next = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..g.dim {
            let mut s = x[a] / g.h;
            if g.is_periodic() {
                s = s.rem_euclid(n as f64);
                let i = (s.floor() as usize).min(n - 1);
                base[a] = i;
                next[a] = (i + 1) % n;
                frac[a] = s - i as f64;
            } else {
                s = s.clamp(0.0, (n - 1) as f64);
                let i = (s.floor() as usize).min(n - 2);
                base[a] = i;
                next[a] = i + 1;
                frac[a] = s - i as f64;
            }
        }
        if g.dim == 1 {
            let v0 = self.values[base[0]];
            let v1 = self.values[next[0]];
            return v0 + frac[0] * (v1 - v0);
        }
        let at = |i: usize, j: usize| self.values[g.index([i, j])];
        let (i0, i1, j0, j1) = (base[0], next[0], base[1], next[1]);
        let (fx, fy) = (frac[0], frac[1]);
        let a = at(i0, j0) + fy * (at(i0, j1) - at(i0, j0));
        let b = at(i1, j0) + fy * (at(i1, j1) - at(i1, j0));
        a + fx * (b - a)
    }
}

/// Backward (`q⁻`) and forward (`q⁺`) differences at `idx`, boundary rule
/// applied. Entries beyond the grid dimension are zero.
pub fn one_sided_gradients(field: &ScalarField, idx: usize) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
    LocalStencil::gather(&field.grid, &field.values, idx).gradients(field.values[idx])
}

/// Five-point (three-point in 1-d) Laplacian.
pub fn laplacian(field: &ScalarField, idx: usize) -> f64 {
    let (qm, qp) = one_sided_gradients(field, idx);
    let h = field.grid.h;
    (0..field.grid.dim).map(|a| (qp[a] - qm[a]) / h).sum()
}

/// `max − min` of the field over the discrete ball of `radius` around `center`.
pub fn oscillation(field: &ScalarField, center: usize, radius: f64) -> f64 {
    let (lo, hi) = field
        .grid
        .ball(center, radius)
        .into_iter()
        .map(|k| field.values[k])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}
