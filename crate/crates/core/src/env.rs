//! Stationary random environments: Poisson and Poisson-cluster point clouds
//! on a periodic box, the bump potential they induce, and statistical
//! diagnostics of that potential.
//!
//! Sampling uses a counter-based scheme: each point draws from its own
//! ChaCha stream keyed by `(seed, point index)`, so a cloud is reproduced
//! bit-for-bit from its parameters and does not depend on evaluation order.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{Grid, ScalarField, MAX_DIM};
use crate::stats::Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpShape {
    /// `cos²(π|y| / (2r))` inside the support.
    CosineSquared,
}

/// A smooth, compactly supported bump with peak value 1 at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    pub radius: f64,
    pub shape: BumpShape,
}

impl BumpProfile {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::param("radius", format!("must be positive, got {radius}")));
        }
        Ok(BumpProfile {
            radius,
            shape: BumpShape::CosineSquared,
        })
    }

    #[inline]
    pub fn eval(&self, distance: f64) -> f64 {
        if distance >= self.radius {
            return 0.0;
        }
        match self.shape {
            BumpShape::CosineSquared => {
                let c = (std::f64::consts::FRAC_PI_2 * distance / self.radius).cos();
                c * c
            }
        }
    }

    /// `∫ W` over the plane (or line).
    pub fn integral(&self, dim: usize) -> f64 {
        let r = self.radius;
        match (self.shape, dim) {
            // ∫_{-r}^{r} cos²(πx/2r) dx = r
            (BumpShape::CosineSquared, 1) => r,
            // 2π ∫_0^r s cos²(πs/2r) ds = π r² (1/2 − 2/π²)
            (BumpShape::CosineSquared, _) => std::f64::consts::PI * r * r * (0.5 - 2.0 / (std::f64::consts::PI.powi(2))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProcessKind {
    Poisson {
        intensity: f64,
    },
    /// Poisson centres, each with a Poisson number of Gaussian offspring.
    Cluster {
        center_intensity: f64,
        offspring_mean: f64,
        offspring_spread: f64,
    },
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessKind::Poisson { intensity } => write!(f, "poisson({intensity})"),
            ProcessKind::Cluster {
                center_intensity,
                offspring_mean,
                offspring_spread,
            } => write!(f, "cluster({center_intensity},{offspring_mean},{offspring_spread})"),
        }
    }
}

impl FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("unrecognised process kind `{s}`"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<f64> = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name.trim(), args.as_slice()) {
            ("poisson", [i]) => Ok(ProcessKind::Poisson { intensity: *i }),
            ("cluster", [c, m, s]) => Ok(ProcessKind::Cluster {
                center_intensity: *c,
                offspring_mean: *m,
                offspring_spread: *s,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    /// Coordinates in `[0, L)^d`; the second entry is 0 in one dimension.
    pub points: Vec<[f64; MAX_DIM]>,
    pub dim: usize,
    pub box_side: f64,
    pub periodic: bool,
    pub seed: u64,
    pub kind: ProcessKind,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.box_side.powi(self.dim as i32)
    }

    /// The same cloud translated by `shift` and wrapped into the box.
    pub fn translated(&self, shift: [f64; MAX_DIM]) -> PointCloud {
        let mut out = self.clone();
        for p in &mut out.points {
            for a in 0..self.dim {
                p[a] = wrap(p[a] + shift[a], self.box_side);
            }
        }
        out
    }
}

fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn wrap(x: f64, l: f64) -> f64 {
    let w = x.rem_euclid(l);
    if w >= l {
        0.0
    } else {
        w
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and non-negative, got {value}")))
    }
}

fn check_box(box_side: f64, dim: usize) -> Result<()> {
    if !(box_side.is_finite() && box_side > 0.0) {
        return Err(Error::param("box_side", format!("must be positive, got {box_side}")));
    }
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(Error::param("dim", format!("must be 1 or 2, got {dim}")));
    }
    Ok(())
}

/// Poisson(mean) by inversion of a single uniform, so the count is
/// nondecreasing in `mean` for a fixed stream (nested clouds across
/// intensities).
fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let u: f64 = rng.random();
    poisson_quantile(u, mean)
}

fn poisson_quantile(u: f64, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let mode = mean.floor() as usize;
    let ln_pmf_mode = mode as f64 * mean.ln() - mean - (1..=mode).map(|i| (i as f64).ln()).sum::<f64>();
    let width = (40.0 * mean.sqrt()) as usize + 40;
    let lo = mode.saturating_sub(width);
    let hi = mode + width;
    let mut pmf = vec![0.0; hi - lo + 1];
    pmf[mode - lo] = ln_pmf_mode.exp();
    for k in (lo..mode).rev() {
        pmf[k - lo] = pmf[k + 1 - lo] * (k + 1) as f64 / mean;
    }
    for k in mode + 1..=hi {
        pmf[k - lo] = pmf[k - 1 - lo] * mean / k as f64;
    }
    let total: f64 = pmf.iter().sum();
    let mut acc = 0.0;
    for (i, w) in pmf.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return lo + i;
        }
    }
    hi
}

pub fn sample_poisson_cloud(intensity: f64, box_side: f64, dim: usize, seed: u64) -> Result<PointCloud> {
    check_rate("intensity", intensity)?;
    check_box(box_side, dim)?;
    let count = poisson_count(&mut keyed_rng(seed, 0), intensity * box_side.powi(dim as i32));
    let points = (0..count)
        .map(|i| {
            let mut rng = keyed_rng(seed, i as u64 + 1);
            let mut p = [0.0; MAX_DIM];
            for x in p.iter_mut().take(dim) {
                *x = rng.random::<f64>() * box_side;
            }
            p
        })
        .collect();
    Ok(PointCloud {
        points,
        dim,
        box_side,
        periodic: true,
        seed,
        kind: ProcessKind::Poisson { intensity },
    })
}

pub fn sample_cluster_cloud(
    center_intensity: f64,
    offspring_mean: f64,
    offspring_spread: f64,
    box_side: f64,
    dim: usize,
    seed: u64,
) -> Result<PointCloud> {
    check_rate("center_intensity", center_intensity)?;
    check_rate("offspring_mean", offspring_mean)?;
    check_rate("offspring_spread", offspring_spread)?;
    check_box(box_side, dim)?;
    let centers = poisson_count(&mut keyed_rng(seed, 0), center_intensity * box_side.powi(dim as i32));
    let mut points = Vec::new();
    for i in 0..centers {
        let base = (i as u64 + 1) << 32;
        let mut rng = keyed_rng(seed, base);
        let mut c = [0.0; MAX_DIM];
        for x in c.iter_mut().take(dim) {
            *x = rng.random::<f64>() * box_side;
        }
        let kids = poisson_count(&mut rng, offspring_mean);
        points.push(c);
        for j in 0..kids {
            let mut rng = keyed_rng(seed, base | (j as u64 + 1));
            let mut p = [0.0; MAX_DIM];
            for a in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                p[a] = wrap(c[a] + offspring_spread * z, box_side);
            }
            points.push(p);
        }
    }
    Ok(PointCloud {
        points,
        dim,
        box_side,
        periodic: true,
        seed,
        kind: ProcessKind::Cluster {
            center_intensity,
            offspring_mean,
            offspring_spread,
        },
    })
}

#[inline]
fn image_distance(a: [f64; MAX_DIM], b: [f64; MAX_DIM], dim: usize, side: f64, periodic: bool) -> f64 {
    let mut d2 = 0.0;
    for k in 0..dim {
        let mut x = a[k] - b[k];
        if periodic {
            x -= side * (x / side).round();
        }
        d2 += x * x;
    }
    d2.sqrt()
}

/// `Σⱼ W(y − yⱼ)` using the nearest periodic image of every point.
pub fn evaluate_potential(cloud: &PointCloud, profile: &BumpProfile, y: [f64; MAX_DIM]) -> f64 {
    let mut y = y;
    if cloud.periodic {
        for x in y.iter_mut().take(cloud.dim) {
            *x = wrap(*x, cloud.box_side);
        }
    }
    let mut s = 0.0;
    for &p in &cloud.points {
        s += profile.eval(image_distance(y, p, cloud.dim, cloud.box_side, cloud.periodic));
    }
    s
}

/// The potential sampled at every node of a periodic grid covering the box.
pub fn rasterize_potential(cloud: &PointCloud, profile: &BumpProfile, grid: &Grid) -> Result<ScalarField> {
    if grid.dim() != cloud.dim {
        return Err(Error::param("grid", "dimension differs from the cloud's"));
    }
    if !grid.is_periodic() || (grid.side() - cloud.box_side).abs() > 1e-9 * cloud.box_side {
        return Err(Error::param(
            "grid",
            format!("periodic box of side {} does not match the cloud box {}", grid.side(), cloud.box_side),
        ));
    }
    if 2.0 * profile.radius >= cloud.box_side {
        return Err(Error::param("radius", "bump diameter must be smaller than the box"));
    }
    let n = grid.n() as i64;
    let h = grid.h();
    let reach = (profile.radius / h).ceil() as i64;
    let mut values = vec![0.0; grid.len()];
    for &p in &cloud.points {
        let c: Vec<i64> = (0..cloud.dim).map(|a| (p[a] / h).round() as i64).collect();
        let span = |a: usize| -> std::ops::RangeInclusive<i64> {
            if a < cloud.dim {
                c[a] - reach..=c[a] + reach
            } else {
                0..=0
            }
        };
        for i in span(0) {
            for j in span(1) {
                let ij = [i.rem_euclid(n) as usize, j.rem_euclid(n) as usize];
                let idx = grid.index(ij);
                let w = profile.eval(image_distance(grid.position(idx), p, cloud.dim, cloud.box_side, true));
                if w > 0.0 {
                    values[idx] += w;
                }
            }
        }
    }
    ScalarField::new(grid.clone(), values)
}

/// One realised environment: the cloud, its bump profile, and the potential
/// rasterised on a periodic grid.
#[derive(Clone, Debug)]
pub struct EnvironmentSample {
    pub cloud: PointCloud,
    pub profile: BumpProfile,
    pub potential: ScalarField,
    pub alpha_diag: f64,
    pub beta_diag: f64,
}

impl EnvironmentSample {
    pub fn new(cloud: PointCloud, profile: BumpProfile, grid: &Grid) -> Result<Self> {
        let potential = rasterize_potential(&cloud, &profile, grid)?;
        Ok(EnvironmentSample {
            cloud,
            profile,
            potential,
            alpha_diag: 1.0,
            beta_diag: f64::INFINITY,
        })
    }

    pub fn with_exponents(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha_diag = alpha;
        self.beta_diag = beta;
        self
    }

    /// Poisson bumps on an `n`-node periodic grid of side `box_side`.
    pub fn poisson(intensity: f64, radius: f64, box_side: f64, dim: usize, n: usize, seed: u64) -> Result<Self> {
        let cloud = sample_poisson_cloud(intensity, box_side, dim, seed)?;
        let grid = Grid::periodic_box(dim, n, box_side)?;
        Self::new(cloud, BumpProfile::new(radius)?, &grid)
    }
}

/// Pointwise `sup_{B(y, r)} V` for every node (periodic balls).
pub fn local_sup(field: &ScalarField, radius: f64) -> Vec<f64> {
    let g = field.grid();
    let offsets: Vec<(i64, i64)> = {
        let r = (radius / g.h()).floor() as i64;
        let mut v = Vec::new();
        let dj_max = if g.dim() == 2 { r } else { 0 };
        for di in -r..=r {
            for dj in -dj_max..=dj_max {
                let d = g.h() * ((di * di + dj * dj) as f64).sqrt();
                if d <= radius + 1e-12 * g.h() {
                    v.push((di, dj));
                }
            }
        }
        v
    };
    let n = g.n() as i64;
    (0..g.len())
        .map(|k| {
            let ij = g.multi_index(k);
            offsets
                .iter()
                .map(|&(di, dj)| {
                    let i = (ij[0] as i64 + di).rem_euclid(n) as usize;
                    let j = (ij[1] as i64 + dj).rem_euclid(n.max(1)) as usize;
                    field.get(g.index([i, if g.dim() == 2 { j } else { 0 }]))
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Nodes on a sub-lattice with the given physical spacing.
fn lattice_sites(grid: &Grid, spacing: f64) -> Vec<usize> {
    let step = ((spacing / grid.h()).round() as usize).max(1);
    let ks: Vec<usize> = (0..grid.n()).step_by(step).collect();
    if grid.dim() == 1 {
        return ks;
    }
    ks.iter().flat_map(|&i| ks.iter().map(move |&j| (i, j))).map(|(i, j)| grid.index([i, j])).collect()
}

/// Monte Carlo estimate of `E[sup_{B_1} V^α]` over unit balls centred on a
/// lattice of spacing 2 in every sample.
pub fn moment_diagnostic(samples: &[EnvironmentSample], alpha: f64) -> Result<Estimate> {
    if samples.is_empty() {
        return Err(Error::param("samples", "need at least one environment"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    let mut xs = Vec::new();
    for s in samples {
        let sup = local_sup(&s.potential, 1.0);
        for k in lattice_sites(s.potential.grid(), 2.0) {
            xs.push(sup[k].max(0.0).powf(alpha));
        }
    }
    Ok(Estimate::from_samples(&xs))
}

/// `R^{−σ} · sup_{B_R} V` around the box origin for each radius.
pub fn sublinearity_diagnostic(sample: &EnvironmentSample, sigma: f64, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::param("sigma", format!("must lie in (0, 1), got {sigma}")));
    }
    let v = &sample.potential;
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::param("radii", format!("radius must be positive, got {r}")));
            }
            let sup = v.grid().ball(0, r).into_iter().map(|k| v.get(k)).fold(0.0, f64::max);
            Ok((r, r.powf(-sigma) * sup))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovariancePoint {
    pub separation: f64,
    pub covariance: f64,
    /// 95% half-width.
    pub ci: f64,
}

/// Empirical covariance of `sup_{B(y,1)} V` and `sup_{B(y + r e₁,1)} V`
/// over sites on a lattice of spacing 4 in every sample.
pub fn correlation_decay_diagnostic(samples: &[EnvironmentSample], separations: &[f64]) -> Result<Vec<CovariancePoint>> {
    if separations.len() < 2 {
        return Err(Error::param("separations", "need at least two separations"));
    }
    if samples.is_empty() {
        return Err(Error::param("samples", "need at least one environment"));
    }
    let sups: Vec<Vec<f64>> = samples.iter().map(|s| local_sup(&s.potential, 1.0)).collect();
    separations
        .iter()
        .map(|&r| {
            let mut pairs = Vec::new();
            for (s, sup) in samples.iter().zip(&sups) {
                let g = s.potential.grid();
                let shift = (r / g.h()).round() as usize;
                for k in lattice_sites(g, 4.0) {
                    let ij = g.multi_index(k);
                    let t = g.index([(ij[0] + shift) % g.n(), ij[1]]);
                    pairs.push((sup[k], sup[t]));
                }
            }
            let n = pairs.len() as f64;
            let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let z: Vec<f64> = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).collect();
            let est = Estimate::from_samples(&z);
            Ok(CovariancePoint {
                separation: r,
                covariance: est.mean,
                ci: est.ci,
            })
        })
        .collect()
}

pub fn cloud_to_text(cloud: &PointCloud) -> String {
    let mut s = format!(
        "# kind={}\n# seed={}\n# L={}\n# d={}\n# periodic={}\n",
        cloud.kind, cloud.seed, cloud.box_side, cloud.dim, cloud.periodic
    );
    for p in &cloud.points {
        let coords: Vec<String> = p[..cloud.dim].iter().map(|x| x.to_string()).collect();
        s.push_str(&coords.join(" "));
        s.push('\n');
    }
    s
}

pub fn cloud_from_text(text: &str) -> Result<PointCloud> {
    let mut kind = None;
    let mut seed = None;
    let mut side = None;
    let mut dim = None;
    let mut periodic = true;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let bad = |what: &str| Error::Format(format!("line {}: {what}", lineno + 1));
        if let Some(h) = line.strip_prefix('#') {
            let (k, v) = h.trim().split_once('=').ok_or_else(|| bad("header without `=`"))?;
            match k.trim() {
                "kind" => kind = Some(v.parse::<ProcessKind>()?),
                "seed" => seed = Some(v.trim().parse::<u64>().map_err(|_| bad("bad seed"))?),
                "L" => side = Some(v.trim().parse::<f64>().map_err(|_| bad("bad L"))?),
                "d" => dim = Some(v.trim().parse::<usize>().map_err(|_| bad("bad d"))?),
                "periodic" => periodic = v.trim().parse::<bool>().map_err(|_| bad("bad periodic flag"))?,
                other => return Err(bad(&format!("unknown header `{other}`"))),
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let d = dim.ok_or_else(|| bad("point before `# d=` header"))?;
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad("bad coordinate")))
            .collect::<Result<_>>()?;
        if coords.len() != d {
            return Err(bad("coordinate count differs from d"));
        }
        let mut p = [0.0; MAX_DIM];
        p[..d].copy_from_slice(&coords);
        points.push(p);
    }
    let missing = |h: &str| Error::Format(format!("missing `# {h}=` header"));
    let dim = dim.ok_or_else(|| missing("d"))?;
    check_box(side.unwrap_or(1.0), dim)?;
    Ok(PointCloud {
        points,
        dim,
        box_side: side.ok_or_else(|| missing("L"))?,
        periodic,
        seed: seed.ok_or_else(|| missing("seed"))?,
        kind: kind.ok_or_else(|| missing("kind"))?,
    })
}

pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, cloud_to_text(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    cloud_from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
