use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::numerics::{ScalarField, MAX_DIM};

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Primitive integer steps with entries in `[−r, r]`.
fn stencil(dim: usize, r: i64) -> Vec<[i64; MAX_DIM]> {
    let gcd = |mut a: i64, mut b: i64| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a.abs()
    };
    if dim == 1 {
        return vec![[1, 0], [-1, 0]];
    }
    let mut out = Vec::new();
    for i in -r..=r {
        for j in -r..=r {
            if (i, j) != (0, 0) && gcd(i, j) == 1 {
                out.push([i, j]);
            }
        }
    }
    out
}

/// Shortest-path distance from `source` with cost density
/// `level_radius(μ, V)` (for the separated form `((μ + V)/c0)^{1/γ}`),
/// which is the metric at `p = 0` for first-order problems.
///
/// Edges join each node to the nodes reached by primitive steps of size up
/// to `radius` nodes per axis; edge cost is the length times the mean
/// density sampled along the segment.
pub fn graph_metric(
    potential: &ScalarField,
    ham: &impl Hamiltonian,
    mu: f64,
    source: &[usize],
    radius: usize,
) -> Result<ScalarField> {
    let grid = potential.grid();
    if grid.is_periodic() {
        return Err(Error::param("grid", "the graph oracle works on a non-periodic box"));
    }
    if source.is_empty() || source.iter().any(|&k| k >= grid.len()) {
        return Err(Error::param("source", "source nodes must lie in the box"));
    }
    let h = grid.h();
    let n = grid.n() as i64;
    let dim = grid.dim();
    let steps = stencil(dim, radius.max(1) as i64);
    let density = |x: [f64; MAX_DIM]| ham.level_radius(mu, potential.interpolate(x));
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut done = vec![false; grid.len()];
    let mut heap = BinaryHeap::new();
    for &s in source {
        dist[s] = 0.0;
        heap.push(Item(0.0, s));
    }
    while let Some(Item(d, k)) = heap.pop() {
        if done[k] {
            continue;
        }
        done[k] = true;
        let ij = grid.multi_index(k);
        let x0 = grid.position(k);
        for s in &steps {
            let mut t = [0usize; MAX_DIM];
            let mut inside = true;
            for a in 0..dim {
                let c = ij[a] as i64 + s[a];
                inside &= (0..n).contains(&c);
                t[a] = c.max(0) as usize;
            }
            if !inside {
                continue;
            }
            let j = grid.index(t);
            if done[j] {
                continue;
            }
            let len = h * ((s[0] * s[0] + s[1] * s[1]) as f64).sqrt();
            let samples = 2 * (s[0].abs().max(s[1].abs()) as usize) + 1;
            let mut acc = 0.0;
            for q in 0..=samples {
                let f = q as f64 / samples as f64;
                let w = if q == 0 || q == samples { 0.5 } else { 1.0 };
                let x = [x0[0] + f * h * s[0] as f64, x0[1] + f * h * s[1] as f64];
                acc += w * density(x);
            }
            let nd = d + len * acc / samples as f64;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Item(nd, j));
            }
        }
    }
    ScalarField::new(grid.clone(), dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianSpec;
    use crate::numerics::{Boundary, Grid};

    #[test]
    fn stencil_counts() {
        assert_eq!(stencil(2, 1).len(), 8);
        assert_eq!(stencil(2, 3).len(), 32);
    }

    #[test]
    fn flat_density_is_nearly_euclidean() {
        let g = Grid::new(2, 41, 0.1, Boundary::Outflow).unwrap();
        let v = ScalarField::constant(g.clone(), 0.0);
        let c = g.index([20, 20]);
        let m = graph_metric(&v, &HamiltonianSpec::quadratic(), 4.0, &[c], 3).unwrap();
        for k in 0..g.len() {
            let r = g.distance(g.position(k), g.position(c));
            let got = m.get(k);
            assert!(got >= 2.0 * r - 1e-9);
            assert!(got <= 2.0 * r * 1.03 + 1e-9, "{got} vs {}", 2.0 * r);
        }
    }

    #[test]
    fn slow_strip_costs_more() {
        let g = Grid::new(1, 21, 0.1, Boundary::Outflow).unwrap();
        let v = ScalarField::from_fn(g.clone(), |x| if x[0] > 1.0 { 3.0 } else { 0.0 });
        let m = graph_metric(&v, &HamiltonianSpec::quadratic(), 1.0, &[0], 1).unwrap();
        // density 1 up to x = 1, then 2, with one interpolated cell between
        assert!((m.get(10) - 1.0).abs() < 1e-12);
        assert!((m.get(20) - 3.0).abs() < 0.06, "{}", m.get(20));
    }
}
