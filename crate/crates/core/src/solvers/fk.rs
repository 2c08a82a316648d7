use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{Form, HamiltonianSpec};
use crate::numerics::{ScalarField, MAX_DIM};

#[derive(Clone, Debug)]
pub struct FkOptions {
    pub n_paths: usize,
    pub dt: f64,
    pub max_steps: usize,
    /// Paths whose weight drops below this are treated as killed.
    pub weight_cutoff: f64,
    pub seed: u64,
}

impl Default for FkOptions {
    fn default() -> Self {
        FkOptions {
            n_paths: 4000,
            dt: 2e-3,
            max_steps: 200_000,
            weight_cutoff: 1e-14,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FkEstimate {
    /// `−log` of the mean path weight.
    pub value: f64,
    /// 95% half-width, including the bias bound from paths cut off alive.
    pub ci: f64,
    pub mean_weight: f64,
    pub hit: usize,
    pub killed: usize,
    pub alive: usize,
}

enum Fate {
    Hit(f64),
    Killed,
    Alive(f64),
}

/// Monte Carlo value of the viscous metric `−σ²Δm + σ²|Dm|² = V + μ` with
/// `m = 0` on the unit ball around
/// `center`: `m = −log E[exp(−∫₀^τ (V + μ)(X_s) ds)]`, `X` the diffusion with
/// generator `σ²Δ` started at `y` and `τ` its hitting time of the ball.
///
/// Euler steps of variance `2σ²dt` per axis, potential by bilinear
/// interpolation, and a Brownian-bridge test for crossings inside a step.
pub fn feynman_kac_metric(
    potential: &ScalarField,
    spec: &HamiltonianSpec,
    mu: f64,
    center: [f64; MAX_DIM],
    y: [f64; MAX_DIM],
    opts: &FkOptions,
) -> Result<FkEstimate> {
    let sigma2 = spec.diffusion.sigma2();
    if spec.gamma != 2.0 || spec.form != Form::Separated || sigma2 <= 0.0 || (spec.c0 - sigma2).abs() > 1e-12 {
        return Err(Error::param(
            "hamiltonian",
            "the path representation needs γ = 2, separated form and c0 = σ² > 0",
        ));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::param("mu", format!("must be non-negative, got {mu}")));
    }
    if !(opts.dt.is_finite() && opts.dt > 0.0) || opts.n_paths == 0 {
        return Err(Error::param("dt", "need a positive step and at least one path"));
    }
    let dim = potential.grid().dim();
    let dist = |x: &[f64; MAX_DIM]| (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>().sqrt() - 1.0;
    if dist(&y) <= 0.0 {
        return Err(Error::param("y", "start point must lie outside the unit ball"));
    }
    let sd = (2.0 * sigma2 * opts.dt).sqrt();
    let log_cut = opts.weight_cutoff.ln();
    let rate = |x: &[f64; MAX_DIM]| potential.interpolate(*x) + mu;
    let fates: Vec<Fate> = (0..opts.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let mut x = y;
            let mut d0 = dist(&x);
            let mut r0 = rate(&x);
            let mut logw = 0.0;
            for _ in 0..opts.max_steps {
                let mut nx = x;
                for a in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    nx[a] += sd * z;
                }
                let d1 = dist(&nx);
                if d1 <= 0.0 {
                    // crossed within the step: charge half of it
                    return Fate::Hit(logw - 0.5 * opts.dt * r0);
                }
                let r1 = rate(&nx);
                logw -= 0.5 * opts.dt * (r0 + r1);
                let u: f64 = rand::Rng::random(&mut rng);
                if u < (-d0 * d1 / (sigma2 * opts.dt)).exp() {
                    return Fate::Hit(logw);
                }
                if logw < log_cut {
                    return Fate::Killed;
                }
                x = nx;
                d0 = d1;
                r0 = r1;
            }
            Fate::Alive(logw)
        })
        .collect();
    let n = opts.n_paths as f64;
    let mut weights = Vec::with_capacity(opts.n_paths);
    let (mut hit, mut killed, mut alive, mut alive_weight) = (0, 0, 0, 0.0);
    for f in &fates {
        match *f {
            Fate::Hit(lw) => {
                hit += 1;
                weights.push(lw.exp());
            }
            Fate::Killed => {
                killed += 1;
                weights.push(0.0);
            }
            Fate::Alive(lw) => {
                alive += 1;
                alive_weight += lw.exp();
                weights.push(0.0);
            }
        }
    }
    if hit == 0 {
        return Err(Error::Budget {
            paths: opts.n_paths,
            hit,
            alive,
            horizon: opts.max_steps as f64 * opts.dt,
        });
    }
    let est = crate::stats::Estimate::from_samples(&weights);
    let e = est.mean;
    let bias = ((e + alive_weight / n) / e).ln();
    Ok(FkEstimate {
        value: -e.ln(),
        ci: est.ci / e + bias,
        mean_weight: e,
        hit,
        killed,
        alive,
    })
}

/// `−log E[e^{−μτ}]` for the hitting time of `[−1, 1]` from `y` by the 1-d
/// diffusion with generator `σ²·d²/dx²`.
pub fn hitting_laplace_1d(mu: f64, sigma2: f64, y: f64) -> f64 {
    (y.abs() - 1.0).max(0.0) * (mu / sigma2).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Diffusion;
    use crate::numerics::Grid;

    fn brownian() -> HamiltonianSpec {
        HamiltonianSpec::quadratic().with_diffusion(Diffusion::Isotropic { sigma2: 1.0 })
    }

    #[test]
    fn one_dimensional_laplace_transform() {
        let v = ScalarField::constant(Grid::periodic(1, 64, 0.5).unwrap(), 0.0);
        let opts = FkOptions {
            n_paths: 4000,
            ..FkOptions::default()
        };
        for (mu, y) in [(1.0, 2.0), (0.5, 3.0)] {
            let r = feynman_kac_metric(&v, &brownian(), mu, [16.0, 0.0], [16.0 + y, 0.0], &opts).unwrap();
            let want = hitting_laplace_1d(mu, 1.0, y);
            assert!((r.value - want).abs() < r.ci + 0.03 * want, "{} vs {want} ± {}", r.value, r.ci);
        }
    }

    #[test]
    fn no_killing_means_zero() {
        let v = ScalarField::constant(Grid::periodic(1, 64, 0.5).unwrap(), 0.0);
        let opts = FkOptions {
            n_paths: 500,
            dt: 1e-2,
            max_steps: 20_000,
            ..FkOptions::default()
        };
        let r = feynman_kac_metric(&v, &brownian(), 0.0, [16.0, 0.0], [18.0, 0.0], &opts).unwrap();
        assert!(r.value.abs() <= r.ci, "{} ± {}", r.value, r.ci);
    }

    #[test]
    fn deterministic_per_seed() {
        let v = ScalarField::constant(Grid::periodic(2, 32, 0.5).unwrap(), 0.3);
        let opts = FkOptions {
            n_paths: 200,
            dt: 1e-2,
            ..FkOptions::default()
        };
        let a = feynman_kac_metric(&v, &brownian(), 1.0, [8.0, 8.0], [10.0, 8.0], &opts).unwrap();
        let b = feynman_kac_metric(&v, &brownian(), 1.0, [8.0, 8.0], [10.0, 8.0], &opts).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn rejects_other_hamiltonians() {
        let v = ScalarField::constant(Grid::periodic(2, 32, 0.5).unwrap(), 0.0);
        let e = feynman_kac_metric(&v, &HamiltonianSpec::quadratic(), 1.0, [8.0; 2], [10.0, 8.0], &FkOptions::default());
        assert!(e.is_err());
    }

    #[test]
    fn budget_error_when_nothing_arrives() {
        let v = ScalarField::constant(Grid::periodic(2, 32, 0.5).unwrap(), 0.0);
        let opts = FkOptions {
            n_paths: 20,
            dt: 1e-2,
            max_steps: 5,
            ..FkOptions::default()
        };
        let e = feynman_kac_metric(&v, &brownian(), 0.0, [8.0; 2], [14.0, 8.0], &opts).unwrap_err();
        assert!(matches!(e, Error::Budget { hit: 0, alive: 20, .. }));
    }
}
