//! Hamiltonian families, their truncations, and the monotone numerical
//! Hamiltonians: the Lax-Friedrichs flux and the upwind operator used by the
//! solvers.

use crate::error::{Error, Result};
use crate::numerics::{ScalarField, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Form {
    /// `c0·|p|^γ − V(y)`.
    Separated,
    /// `c0·|p|^γ / (1 + V(y))`, the first-passage-percolation cost form.
    Fpp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Diffusion {
    None,
    /// Diffusion matrix `σ²·I`.
    Isotropic { sigma2: f64 },
}

impl Diffusion {
    pub fn sigma2(&self) -> f64 {
        match *self {
            Diffusion::None => 0.0,
            Diffusion::Isotropic { sigma2 } => sigma2,
        }
    }
}

/// Anything the solvers can discretise: a convex Hamiltonian `H(q, V)`
/// evaluated with the local potential value.
pub trait Hamiltonian: Sync {
    fn value(&self, q: &[f64], potential: f64) -> f64;

    /// Upper bound on `|∂H/∂q_i|` over `|q| ≤ cap`, the same for every axis.
    fn slope_bound(&self, cap: f64, potential: f64) -> f64;

    /// Upper bound on `|∂H/∂q_i|` over `|q| ≤ norm_cap`, `|q_i| ≤ axis_cap`.
    fn axis_slope_bound(&self, norm_cap: f64, axis_cap: f64, potential: f64) -> f64;

    /// `sup{|q| : H(q, V) ≤ level}`, zero when the sublevel set is empty.
    fn level_radius(&self, level: f64, potential: f64) -> f64;

    fn diffusion(&self) -> Diffusion;

    fn gamma(&self) -> f64;

    fn c0(&self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub gamma: f64,
    pub c0: f64,
    /// The constant `C0` of the lower coercivity bound.
    pub offset: f64,
    pub form: Form,
    pub diffusion: Diffusion,
}

impl HamiltonianSpec {
    pub fn new(gamma: f64, c0: f64, form: Form, diffusion: Diffusion) -> Result<Self> {
        let spec = HamiltonianSpec {
            gamma,
            c0,
            offset: 0.0,
            form,
            diffusion,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `|p|²` minus the potential, no diffusion.
    pub fn quadratic() -> Self {
        HamiltonianSpec {
            gamma: 2.0,
            c0: 1.0,
            offset: 0.0,
            form: Form::Separated,
            diffusion: Diffusion::None,
        }
    }

    pub fn with_diffusion(mut self, diffusion: Diffusion) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(Error::param("gamma", format!("exponent must exceed 1, got {}", self.gamma)));
        }
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::param("c0", format!("must be positive, got {}", self.c0)));
        }
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(Error::param("offset", format!("must be non-negative, got {}", self.offset)));
        }
        let s2 = self.diffusion.sigma2();
        if !(s2.is_finite() && s2 >= 0.0) {
            return Err(Error::param("sigma2", format!("must be non-negative, got {s2}")));
        }
        Ok(())
    }

    pub fn truncated(self, k: f64) -> TruncatedSpec {
        TruncatedSpec { base: self, k }
    }

    /// `c0·|q|^γ`.
    #[inline]
    pub fn kinetic(&self, q: &[f64]) -> f64 {
        let n2: f64 = q.iter().map(|x| x * x).sum();
        self.c0 * pow_norm(n2, self.gamma)
    }
}

/// `|q|^γ` from `|q|²`.
#[inline]
fn pow_norm(n2: f64, gamma: f64) -> f64 {
    if gamma == 2.0 {
        n2
    } else if n2 == 0.0 {
        0.0
    } else {
        n2.powf(0.5 * gamma)
    }
}

impl Hamiltonian for HamiltonianSpec {
    #[inline]
    fn value(&self, q: &[f64], potential: f64) -> f64 {
        match self.form {
            Form::Separated => self.kinetic(q) - potential,
            Form::Fpp => self.kinetic(q) / (1.0 + potential),
        }
    }

    #[inline]
    fn slope_bound(&self, cap: f64, potential: f64) -> f64 {
        let b = dissipation_bound(self, cap);
        match self.form {
            Form::Separated => b,
            Form::Fpp => b / (1.0 + potential),
        }
    }

    #[inline]
    fn axis_slope_bound(&self, norm_cap: f64, axis_cap: f64, potential: f64) -> f64 {
        let b = axis_kinetic_bound(self.gamma, self.c0, norm_cap, axis_cap);
        match self.form {
            Form::Separated => b,
            Form::Fpp => b / (1.0 + potential),
        }
    }

    fn level_radius(&self, level: f64, potential: f64) -> f64 {
        let lift = match self.form {
            Form::Separated => level + potential,
            Form::Fpp => level * (1.0 + potential),
        };
        (lift.max(0.0) / self.c0).powf(1.0 / self.gamma)
    }

    fn diffusion(&self) -> Diffusion {
        self.diffusion
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn c0(&self) -> f64 {
        self.c0
    }
}

/// `H_k = max{H, c0|p|^γ − k}`: the Hamiltonian of the environment with the
/// potential effectively capped at `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedSpec {
    pub base: HamiltonianSpec,
    pub k: f64,
}

impl Hamiltonian for TruncatedSpec {
    #[inline]
    fn value(&self, q: &[f64], potential: f64) -> f64 {
        let h = self.base.value(q, potential);
        h.max(self.base.kinetic(q) - self.k)
    }

    #[inline]
    fn slope_bound(&self, cap: f64, _potential: f64) -> f64 {
        dissipation_bound(&self.base, cap)
    }

    #[inline]
    fn axis_slope_bound(&self, norm_cap: f64, axis_cap: f64, _potential: f64) -> f64 {
        axis_kinetic_bound(self.base.gamma, self.base.c0, norm_cap, axis_cap)
    }

    fn level_radius(&self, level: f64, potential: f64) -> f64 {
        let cap = ((level + self.k).max(0.0) / self.base.c0).powf(1.0 / self.base.gamma);
        self.base.level_radius(level, potential).min(cap)
    }

    fn diffusion(&self) -> Diffusion {
        self.base.diffusion
    }

    fn gamma(&self) -> f64 {
        self.base.gamma
    }

    fn c0(&self) -> f64 {
        self.base.c0
    }
}

/// `γ·c0·|q|^(γ−2)·|q_i|` maximised over the box: `|Q|^(γ−2)·|Q_i|` for
/// `γ ≥ 2`, `|Q_i|^(γ−1)` below.
#[inline]
fn axis_kinetic_bound(gamma: f64, c0: f64, norm_cap: f64, axis_cap: f64) -> f64 {
    let f = if gamma == 2.0 {
        axis_cap
    } else if gamma > 2.0 {
        norm_cap.powf(gamma - 2.0) * axis_cap
    } else if axis_cap > 0.0 {
        axis_cap.powf(gamma - 1.0)
    } else {
        0.0
    };
    gamma * c0 * f
}

pub fn eval_h(ham: &impl Hamiltonian, p: &[f64], potential: f64) -> f64 {
    ham.value(p, potential)
}

/// `γ·c0·cap^(γ−1)`: bound on each `|∂H/∂q_i|` when `|q| ≤ cap`.
pub fn dissipation_bound(spec: &HamiltonianSpec, cap: f64) -> f64 {
    if cap <= 0.0 {
        return 0.0;
    }
    let c = if spec.gamma == 2.0 {
        cap
    } else {
        cap.powf(spec.gamma - 1.0)
    };
    spec.gamma * spec.c0 * c
}

/// Lax-Friedrichs numerical Hamiltonian
/// `H((q⁻+q⁺)/2) − Σ αᵢ (qᵢ⁺ − qᵢ⁻)/2`.
///
/// Monotone (non-decreasing in `q⁻`, non-increasing in `q⁺`) when every
/// `αᵢ` bounds `|∂H/∂qᵢ|` on the box spanned by `q⁻` and `q⁺`.
pub fn lf_flux(
    ham: &impl Hamiltonian,
    potential: f64,
    q_minus: &[f64],
    q_plus: &[f64],
    dissipation: &[f64],
) -> Result<f64> {
    if q_minus.len() != q_plus.len() || q_minus.len() != dissipation.len() || q_minus.len() > MAX_DIM {
        return Err(Error::param("q", "gradient and dissipation lengths differ"));
    }
    if let Some(a) = dissipation.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::param("dissipation", format!("must be non-negative, got {a}")));
    }
    let d = q_minus.len();
    let mut avg = [0.0; MAX_DIM];
    let mut jump = 0.0;
    for i in 0..d {
        avg[i] = 0.5 * (q_minus[i] + q_plus[i]);
        jump += dissipation[i] * 0.5 * (q_plus[i] - q_minus[i]);
    }
    Ok(ham.value(&avg[..d], potential) - jump)
}

/// The discrete operator `−a·Δ_h + Ĥ` at one node with the upwind numerical
/// Hamiltonian `Ĥ = H(w)`, `wᵢ = max(qᵢ⁻, −qᵢ⁺, 0)`.
///
/// `q⁻`, `q⁺` already include the macroscopic shift `p`. Every Hamiltonian
/// here depends on `q` through `|q|` and grows with it, so `Ĥ` is monotone,
/// convex in the node values, exact on linear data, and adds no dissipation
/// where the gradient vanishes.
#[inline]
pub fn scheme_operator(
    ham: &impl Hamiltonian,
    potential: f64,
    q_minus: &[f64; MAX_DIM],
    q_plus: &[f64; MAX_DIM],
    dim: usize,
    h: f64,
    diffusion: f64,
) -> f64 {
    let (value, _) = scheme_operator_with_alpha(ham, potential, q_minus, q_plus, dim, h, diffusion);
    value
}

/// As [`scheme_operator`], also returning `Σᵢ |∂Ĥ/∂wᵢ|` (bounded above), the
/// sensitivity of `Ĥ` to the node value times `h`.
#[inline]
pub fn scheme_operator_with_alpha(
    ham: &impl Hamiltonian,
    potential: f64,
    q_minus: &[f64; MAX_DIM],
    q_plus: &[f64; MAX_DIM],
    dim: usize,
    h: f64,
    diffusion: f64,
) -> (f64, f64) {
    let mut w = [0.0; MAX_DIM];
    let mut n2 = 0.0;
    for i in 0..dim {
        w[i] = q_minus[i].max(-q_plus[i]).max(0.0);
        n2 += w[i] * w[i];
    }
    let norm = n2.sqrt();
    let mut value = ham.value(&w[..dim], potential);
    let mut total = 0.0;
    for i in 0..dim {
        total += ham.axis_slope_bound(norm, w[i], potential);
        value -= diffusion / h * (q_plus[i] - q_minus[i]);
    }
    (value, total)
}

/// Gradient cap shaped like the Bernstein estimate `|Dv|^γ ≤ C(1 + sup V)`
/// with `C = 4/c0`, plus the macroscopic slope.
pub fn bernstein_gradient_cap(spec: &HamiltonianSpec, sup_potential: f64, p_norm: f64) -> f64 {
    let c = 4.0 / spec.c0;
    (c * (1.0 + sup_potential.max(0.0))).powf(1.0 / spec.gamma) + p_norm
}

/// Result of checking `c0|p|^γ − V − C0 ≤ H ≤ C(1 + |p|^γ)` over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityAudit {
    /// Largest `c0|p|^γ − V − C0 − H` seen; non-positive when the lower
    /// bound holds.
    pub lower_violation: f64,
    /// Smallest `C` that makes the upper bound hold on the samples.
    pub fitted_upper: f64,
    pub samples: usize,
}

impl CoercivityAudit {
    pub fn upper_holds(&self, frozen: f64) -> bool {
        self.fitted_upper <= frozen
    }
}

pub fn coercivity_audit(
    ham: &impl Hamiltonian,
    offset: f64,
    potential: &ScalarField,
    p_samples: &[[f64; MAX_DIM]],
) -> CoercivityAudit {
    let dim = potential.grid().dim();
    let (g, c0) = (ham.gamma(), ham.c0());
    let mut lower_violation = f64::NEG_INFINITY;
    let mut fitted_upper: f64 = 0.0;
    let mut samples = 0;
    for &v in potential.values() {
        for p in p_samples {
            let p = &p[..dim];
            let n2: f64 = p.iter().map(|x| x * x).sum();
            let pg = pow_norm(n2, g);
            let h = ham.value(p, v);
            lower_violation = lower_violation.max(c0 * pg - v - offset - h);
            fitted_upper = fitted_upper.max(h / (1.0 + pg));
            samples += 1;
        }
    }
    CoercivityAudit {
        lower_violation,
        fitted_upper,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Grid;
    use proptest::prelude::*;

    #[test]
    fn separated_values() {
        let spec = HamiltonianSpec::quadratic();
        assert_eq!(eval_h(&spec, &[3.0, 4.0], 0.0), 25.0);
        assert_eq!(eval_h(&spec, &[0.0, 0.0], 5.0), -5.0);
        assert_eq!(eval_h(&spec.truncated(1.0), &[0.0, 0.0], 5.0), -1.0);
    }

    #[test]
    fn fpp_form_degenerates_with_potential() {
        let spec = HamiltonianSpec::new(2.0, 1.0, Form::Fpp, Diffusion::None).unwrap();
        assert_eq!(eval_h(&spec, &[2.0], 3.0), 1.0);
        assert!(spec.slope_bound(1.0, 3.0) < spec.slope_bound(1.0, 0.0));
        assert!(spec.axis_slope_bound(1.0, 0.5, 3.0) < spec.axis_slope_bound(1.0, 0.5, 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HamiltonianSpec::new(1.0, 1.0, Form::Separated, Diffusion::None).is_err());
        assert!(HamiltonianSpec::new(2.0, 0.0, Form::Separated, Diffusion::None).is_err());
        assert!(HamiltonianSpec::new(2.0, 1.0, Form::Separated, Diffusion::Isotropic { sigma2: -1.0 }).is_err());
    }

    #[test]
    fn flux_consistency_and_examples() {
        let spec = HamiltonianSpec::quadratic();
        let q = [0.3, -1.2];
        assert_eq!(lf_flux(&spec, 0.7, &q, &q, &[5.0, 5.0]).unwrap(), spec.value(&q, 0.7));
        assert_eq!(lf_flux(&spec, 0.0, &[1.0, 0.0], &[1.0, 0.0], &[9.0, 1.0]).unwrap(), 1.0);
        assert!(lf_flux(&spec, 0.0, &[1.0], &[1.0], &[-0.1]).is_err());
    }

    #[test]
    fn dissipation_examples() {
        let spec = HamiltonianSpec::quadratic();
        assert_eq!(dissipation_bound(&spec, 3.0), 6.0);
        let s3 = HamiltonianSpec::new(3.0, 1.0, Form::Separated, Diffusion::None).unwrap();
        let r = dissipation_bound(&s3, 4.0) / dissipation_bound(&s3, 2.0);
        assert!((r - 4.0).abs() < 1e-12);
    }

    #[test]
    fn level_radius_inverts_the_kinetic_term() {
        let spec = HamiltonianSpec::new(3.0, 2.0, Form::Separated, Diffusion::None).unwrap();
        let r = spec.level_radius(5.0, 11.0);
        assert!((spec.value(&[r, 0.0], 11.0) - 5.0).abs() < 1e-12);
        assert_eq!(spec.level_radius(-4.0, 1.0), 0.0);
        let fpp = HamiltonianSpec::new(2.0, 1.0, Form::Fpp, Diffusion::None).unwrap();
        assert!((fpp.level_radius(4.0, 3.0) - 4.0).abs() < 1e-12);
        assert!((spec.truncated(1.0).level_radius(0.0, 5.0) - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn truncation_is_ordered() {
        let spec = HamiltonianSpec::quadratic();
        for v in [0.0, 0.5, 3.0, 10.0] {
            for p in [[0.0, 0.0], [0.5, 1.0], [2.0, -1.0]] {
                let h = spec.value(&p, v);
                let h1 = spec.truncated(1.0).value(&p, v);
                let h4 = spec.truncated(4.0).value(&p, v);
                assert!(h1 >= h4 && h4 >= h);
            }
        }
    }

    #[test]
    fn audit_on_separated_form() {
        let g = Grid::periodic(2, 8, 0.5).unwrap();
        let v = ScalarField::from_fn(g, |x| x[0]);
        let spec = HamiltonianSpec::quadratic();
        let ps = [[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]];
        let audit = coercivity_audit(&spec, 0.0, &v, &ps);
        assert!(audit.lower_violation <= 0.0);
        assert!(audit.upper_holds(1.0));
        assert_eq!(audit.samples, 64 * 3);
    }

    fn arb_q() -> impl Strategy<Value = [f64; 2]> {
        [-3.0f64..3.0, -3.0f64..3.0]
    }

    proptest! {
        #[test]
        fn flux_is_monotone(qm in arb_q(), qp in arb_q(), axis in 0usize..2, bump in 0.0f64..0.5,
                            gamma in prop_oneof![Just(1.5), Just(2.0), Just(3.0)], v in 0.0f64..3.0) {
            let spec = HamiltonianSpec::new(gamma, 1.0, Form::Separated, Diffusion::None).unwrap();
            let cap = |a: &[f64; 2], b: &[f64; 2]| {
                (0..2).map(|i| a[i].abs().max(b[i].abs()).powi(2)).sum::<f64>().sqrt()
            };
            let mut qp2 = qp;
            qp2[axis] += bump;
            let mut qm2 = qm;
            qm2[axis] += bump;
            let a = dissipation_bound(&spec, cap(&qm, &qp).max(cap(&qm, &qp2)).max(cap(&qm2, &qp)));
            let base = lf_flux(&spec, v, &qm, &qp, &[a, a]).unwrap();
            prop_assert!(lf_flux(&spec, v, &qm, &qp2, &[a, a]).unwrap() <= base + 1e-12);
            prop_assert!(lf_flux(&spec, v, &qm2, &qp, &[a, a]).unwrap() >= base - 1e-12);
        }

        #[test]
        fn flux_is_jointly_convex(a in (arb_q(), arb_q()), b in (arb_q(), arb_q()), alpha in 0.0f64..10.0) {
            let spec = HamiltonianSpec::quadratic();
            let f = |qm: &[f64; 2], qp: &[f64; 2]| lf_flux(&spec, 0.3, qm, qp, &[alpha, alpha]).unwrap();
            let mid = |x: &[f64; 2], y: &[f64; 2]| [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
            let fm = f(&mid(&a.0, &b.0), &mid(&a.1, &b.1));
            prop_assert!(fm <= 0.5 * (f(&a.0, &a.1) + f(&b.0, &b.1)) + 1e-10);
        }

        #[test]
        fn scheme_operator_is_monotone_in_one_dimension(a in -3.0f64..3.0, b in -3.0f64..3.0, bump in 0.0f64..0.3,
                                                        v in 0.0f64..2.0) {
            let spec = HamiltonianSpec::quadratic();
            let f = |qm: f64, qp: f64| scheme_operator(&spec, v, &[qm, 0.0], &[qp, 0.0], 1, 0.1, 0.0);
            prop_assert!(f(a, b + bump) <= f(a, b) + 1e-12);
            prop_assert!(f(a + bump, b) >= f(a, b) - 1e-12);
        }

        #[test]
        fn scheme_operator_is_convex_in_node_values(x in prop::array::uniform5(-2.0f64..2.0),
                                                    y in prop::array::uniform5(-2.0f64..2.0),
                                                    p in arb_q(), gamma in prop_oneof![Just(1.5), Just(2.0), Just(3.0)]) {
            // node values: centre, west, east, south, north
            let spec = HamiltonianSpec::new(gamma, 1.0, Form::Separated, Diffusion::Isotropic { sigma2: 0.2 }).unwrap();
            let h = 0.5;
            let f = |u: &[f64; 5]| {
                let qm = [p[0] + (u[0] - u[1]) / h, p[1] + (u[0] - u[3]) / h];
                let qp = [p[0] + (u[2] - u[0]) / h, p[1] + (u[4] - u[0]) / h];
                scheme_operator(&spec, 0.4, &qm, &qp, 2, h, 0.2)
            };
            let mut m = [0.0; 5];
            for i in 0..5 {
                m[i] = 0.5 * (x[i] + y[i]);
            }
            prop_assert!(f(&m) <= 0.5 * (f(&x) + f(&y)) + 1e-9 * (1.0 + f(&x).abs() + f(&y).abs()));
        }

        #[test]
        fn axis_bound_dominates_partial_derivative(q in arb_q(), axis in 0usize..2,
                                                   gamma in prop_oneof![Just(1.5), Just(2.0), Just(3.0)]) {
            let spec = HamiltonianSpec::new(gamma, 1.3, Form::Separated, Diffusion::None).unwrap();
            let e = 1e-6;
            let mut a = q;
            let mut b = q;
            a[axis] -= e;
            b[axis] += e;
            let d = (spec.value(&b, 0.0) - spec.value(&a, 0.0)) / (2.0 * e);
            let n = (q[0] * q[0] + q[1] * q[1]).sqrt();
            prop_assert!(d.abs() <= spec.axis_slope_bound(n, q[axis].abs() + e, 0.0) * (1.0 + 1e-6) + 1e-6);
            prop_assert!(spec.axis_slope_bound(n, q[axis].abs(), 0.0) <= dissipation_bound(&spec, n) + 1e-12);
        }
    }
}
