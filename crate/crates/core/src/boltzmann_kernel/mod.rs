//! The Boltzmann kernel `K_f` in Carleman form and its homogeneous surrogate, plus the
//! measurements of upper bound, nondegeneracy, coercivity and cancellation built on them.
//!
//! The angular kernel is fixed to `b(cos theta) = kappa |sin(theta/2)|^{-(n-1)-2s}`, under which
//! the Carleman integrand collapses to
//! `K_f(v, v + h) = 2^{n-1} kappa |h|^{-n-2s} int_{w perp h} f(v + w) (|h|^2 + |w|^2)^{p/2} dw`
//! with `p = gamma + 2s + 1`. The surrogate replaces `(|h|^2 + |w|^2)^{p/2}` by `|w|^p` and drops
//! the `2^{n-1}`.

mod carleman;
mod coercivity;
mod conditions;
mod operator;

pub use carleman::{carleman_energy_check, gauss_hermite, CarlemanCheck, CarlemanGrid};
pub use coercivity::{bump, coercivity_energies, default_family, gs_distance, CoercivityEnergies, CoercivityGrid, CoercivityTable};
pub use conditions::{
    min_over_directions, condition_cancellation, condition_nondegeneracy, condition_upper_bound, Cell, Condition, ConditionSettings, EllipticityReport, Thresholds,
};
pub use operator::{apply_nonlocal_operator, collision_operator};

use crate::dist_model::Mixture;
use crate::error::{Result, VerifyError};
use crate::linalg::{check_dimension, complement_basis, Mat3, Vec3};
use crate::quadrature::{integrate_vec, mixture_plane_integral, Cubature, QuadBudget};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Plain,
    /// Angular kernel scaled by `1 - s`.
    Grazing,
}

fn default_q_reference() -> f64 {
    4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub n: usize,
    pub s: f64,
    pub gamma: f64,
    pub normalization: Normalization,
    #[serde(default = "default_q_reference")]
    pub q_reference: f64,
}

impl KernelParams {
    pub fn new(n: usize, s: f64, gamma: f64, normalization: Normalization) -> Result<Self> {
        let p = KernelParams { n, s, gamma, normalization, q_reference: default_q_reference() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_dimension(self.n)?;
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(VerifyError::InvalidParameter(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if !(self.gamma > -(self.n as f64)) || !self.gamma.is_finite() {
            return Err(VerifyError::InvalidParameter(format!("gamma must exceed -n = -{}, got {}", self.n, self.gamma)));
        }
        if !(self.q_reference > 2.0) {
            return Err(VerifyError::InvalidParameter(format!("q_reference must exceed 2, got {}", self.q_reference)));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        match self.normalization {
            Normalization::Plain => 1.0,
            Normalization::Grazing => 1.0 - self.s,
        }
    }

    /// Weight exponent `gamma + 2s + 1` of the hyperplane integral.
    pub fn p(&self) -> f64 {
        self.gamma + 2.0 * self.s + 1.0
    }

    /// `gamma + 2s` in `[0, q_reference]`.
    pub fn admissible(&self) -> bool {
        let g = self.gamma + 2.0 * self.s;
        (0.0..=self.q_reference).contains(&g)
    }

    fn singular_power(&self) -> f64 {
        self.n as f64 + 2.0 * self.s
    }
}

/// `a(v; theta) = int_{w perp theta} f(v + w) |w|^p dw`.
pub fn profile_a(f: &Mixture, params: &KernelParams, v: &Vec3, theta: &Vec3, budget: &QuadBudget) -> Result<f64> {
    Ok(mixture_plane_integral(f, v, theta, params.p(), |_| 1.0, budget)?.value)
}

fn nonzero(h: &Vec3) -> Result<f64> {
    let norm = h.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(VerifyError::Degenerate("kernel needs v != v'".into()));
    }
    Ok(norm)
}

/// Carleman-form kernel `K_f(v, v')`.
pub fn kernel_exact(f: &Mixture, params: &KernelParams, v: &Vec3, vprime: &Vec3, budget: &QuadBudget) -> Result<f64> {
    let h = vprime - v;
    let hn = nonzero(&h)?;
    let n = params.n;
    if params.p() <= -(n as f64 - 1.0) {
        return Err(VerifyError::InvalidParameter("hyperplane integral diverges for gamma + 2s + 1 <= -(n - 1)".into()));
    }
    let half = 0.5 * params.p();
    let h2 = hn * hn;
    let inner = mixture_plane_integral(f, v, &h, 0.0, |w| (h2 + w * w).powf(half), budget)?.value;
    Ok(2f64.powi(n as i32 - 1) * params.kappa() * hn.powf(-params.singular_power()) * inner)
}

/// Homogeneous surrogate `kappa |h|^{-n-2s} a(v; h / |h|)`.
pub fn kernel_surrogate(f: &Mixture, params: &KernelParams, v: &Vec3, h: &Vec3, budget: &QuadBudget) -> Result<f64> {
    let hn = nonzero(h)?;
    Ok(params.kappa() * hn.powf(-params.singular_power()) * profile_a(f, params, v, &(h / hn), budget)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelEvaluation {
    pub exact_value: f64,
    pub surrogate_value: f64,
    /// Upper comparison constant at this configuration; see [`comparability_bound`].
    pub upper_bound: f64,
}

/// `2^{n-1} 2^{p/2} [surrogate + kappa |h|^{-n-2s} |h|^p int_{w perp h} f(v + w) dw]`, an upper bound
/// for the exact kernel when `p >= 0` (from `(|h|^2 + |w|^2)^{p/2} <= 2^{p/2} (|h|^p + |w|^p)`).
pub fn comparability_bound(f: &Mixture, params: &KernelParams, v: &Vec3, h: &Vec3, budget: &QuadBudget) -> Result<f64> {
    let hn = nonzero(h)?;
    let p = params.p();
    let mass = mixture_plane_integral(f, v, h, 0.0, |_| 1.0, budget)?.value;
    let sur = kernel_surrogate(f, params, v, h, budget)?;
    let pref = 2f64.powi(params.n as i32 - 1) * 2f64.powf(0.5 * p);
    Ok(pref * (sur + params.kappa() * hn.powf(p - params.singular_power()) * mass))
}

pub fn evaluate_kernel(f: &Mixture, params: &KernelParams, v: &Vec3, vprime: &Vec3, budget: &QuadBudget) -> Result<KernelEvaluation> {
    let h = vprime - v;
    Ok(KernelEvaluation {
        exact_value: kernel_exact(f, params, v, vprime, budget)?,
        surrogate_value: kernel_surrogate(f, params, v, &h, budget)?,
        upper_bound: comparability_bound(f, params, v, &h, budget)?,
    })
}

/// A kernel of the form `K(v, v + h) = kappa |h|^{-n-2s} A(v; h / |h|)` with `A` even in its
/// direction argument.
pub trait Profile: Sync {
    fn params(&self) -> &KernelParams;

    fn profile(&self, v: &Vec3, theta: &Vec3) -> Result<f64>;

    /// Matrix `S(v)` with `int_S A(v; theta) (theta . e)_+^2 dtheta = e^T S(v) e`, computed by a
    /// full-space integral that never touches the sphere.
    fn quadratic_form(&self, v: &Vec3) -> Result<Mat3>;

    fn kernel(&self, v: &Vec3, h: &Vec3) -> Result<f64> {
        let hn = nonzero(h)?;
        let p = self.params();
        Ok(p.kappa() * hn.powf(-p.singular_power()) * self.profile(v, &(h / hn))?)
    }
}

/// The surrogate profile `A = a(v; theta)` of a distribution.
pub struct Surrogate<'a> {
    pub f: &'a Mixture,
    pub params: KernelParams,
    pub budget: QuadBudget,
}

impl<'a> Surrogate<'a> {
    pub fn new(f: &'a Mixture, params: KernelParams, budget: QuadBudget) -> Result<Self> {
        params.validate()?;
        if f.dimension() != params.n {
            return Err(VerifyError::DimensionMismatch { expected: params.n, got: f.dimension() });
        }
        budget.validate()?;
        Ok(Surrogate { f, params, budget })
    }
}

impl Profile for Surrogate<'_> {
    fn params(&self) -> &KernelParams {
        &self.params
    }

    fn profile(&self, v: &Vec3, theta: &Vec3) -> Result<f64> {
        profile_a(self.f, &self.params, v, theta, &self.budget)
    }

    fn quadratic_form(&self, v: &Vec3) -> Result<Mat3> {
        plane_form_matrix(self.f, &self.params, v, None, &self.budget)
    }
}

/// `1/2 int f(c + w) |w|^{gamma+2s} N(w) dw` with `N(w) = int_{omega in S, omega perp w} omega omega^T Q(omega)^{s-1}`,
/// where `Q(omega) = |omega|^2 + (|v0|^2 - 1)(omega . v0/|v0|)^2` for `metric = Some(v0)` and `Q = 1`
/// otherwise. This equals `int_S A (theta . e)_+^2` as a quadratic form in `e` (up to the
/// frame scaling applied by the caller).
pub fn plane_form_matrix(f: &Mixture, params: &KernelParams, c: &Vec3, metric: Option<Vec3>, budget: &QuadBudget) -> Result<Mat3> {
    let n = params.n;
    let power = params.gamma + 2.0 * params.s;
    if power < 0.0 {
        return Err(VerifyError::InvalidParameter("the full-space form needs gamma + 2s >= 0".into()));
    }
    let sm1 = params.s - 1.0;
    let metric = metric.filter(|m| m.norm() > 0.0);
    let q_of = |omega: &Vec3| -> f64 {
        match &metric {
            None => 1.0,
            Some(m) => {
                let mn = m.norm();
                let c = omega.dot(m) / mn;
                omega.norm_squared() + (mn * mn - 1.0) * c * c
            }
        }
    };
    let inner = budget.inner();
    let section = |w: &Vec3| -> [f64; 6] {
        let basis = complement_basis(n, w);
        if n == 2 {
            let b = basis[0];
            let q = 2.0 * q_of(&b).powf(sm1);
            return sym6(&(b * b.transpose() * q));
        }
        if metric.is_none() {
            let u = w.normalize();
            return sym6(&((Mat3::identity() - u * u.transpose()) * PI));
        }
        let (b1, b2) = (basis[0], basis[1]);
        let m = metric.unwrap();
        let phase = m.dot(&b2).atan2(m.dot(&b1)).rem_euclid(PI);
        let mut breaks = vec![0.5 * PI, PI, 1.5 * PI];
        for k in 0..4 {
            breaks.push((phase + 0.5 * PI * k as f64).rem_euclid(2.0 * PI));
        }
        integrate_vec(
            |phi| {
                let o = b1 * phi.cos() + b2 * phi.sin();
                sym6(&(o * o.transpose() * q_of(&o).powf(sm1)))
            },
            0.0,
            2.0 * PI,
            &breaks,
            &inner,
        )
        .map(|q| q.value)
        .unwrap_or([f64::NAN; 6])
    };
    let res = Cubature::new(f, budget).kink(*c).integrate_vec::<6, _>(|x, d| {
        let w = x - c;
        let r = w.norm();
        if r == 0.0 || d == 0.0 {
            return [0.0; 6];
        }
        let scale = 0.5 * d * r.powf(power);
        section(&w).map(|e| e * scale)
    })?;
    Ok(unsym6(&res.value))
}

fn sym6(m: &Mat3) -> [f64; 6] {
    [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]
}

fn unsym6(a: &[f64; 6]) -> Mat3 {
    Mat3::new(a[0], a[1], a[2], a[1], a[3], a[4], a[2], a[4], a[5])
}
