//! Change of variables adapted to a base velocity `v0` and the kernels it induces.
//!
//! For `|v0| >= 2` the map `tau0` shrinks the `v0` component by `1/|v0|` and leaves the orthogonal
//! complement alone; for `|v0| < 2` it is the identity.

use crate::boltzmann_kernel::{
    condition_cancellation, condition_nondegeneracy, condition_upper_bound, kernel_exact, kernel_surrogate, plane_form_matrix, profile_a, Condition,
    ConditionSettings, KernelParams, Profile, Surrogate, Thresholds,
};
use crate::boltzmann_kernel::{coercivity_energies, CoercivityGrid};
use crate::dist_model::{sphere_line, Mixture};
use crate::error::{Result, VerifyError};
use crate::linalg::{check_dimension, to_slice, Mat3, Vec3};
use crate::quadrature::{integrate_radial, QuadBudget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Near,
    Far,
}

pub use crate::kinetic_geometry::KineticPoint;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameTransform {
    n: usize,
    z0: KineticPoint,
    gamma: f64,
    s: f64,
    regime: Regime,
    tau0: Mat3,
    tau0_inv: Mat3,
}

impl FrameTransform {
    /// Frame at `z0` for interaction exponent `gamma` and order `s`. The Landau case uses `s = 1`.
    pub fn new(n: usize, z0: KineticPoint, gamma: f64, s: f64) -> Result<Self> {
        check_dimension(n)?;
        if n == 2 && (z0.v[2] != 0.0 || z0.x[2] != 0.0) {
            return Err(VerifyError::InvalidParameter("planar frame with a nonzero third component".into()));
        }
        if !(s > 0.0 && s <= 1.0) || !gamma.is_finite() {
            return Err(VerifyError::InvalidParameter(format!("invalid frame parameters gamma = {gamma}, s = {s}")));
        }
        let norm = z0.v.norm();
        let (regime, tau0, tau0_inv) = if norm >= 2.0 {
            let u = z0.v / norm;
            let p = u * u.transpose();
            (Regime::Far, Mat3::identity() + p * (1.0 / norm - 1.0), Mat3::identity() + p * (norm - 1.0))
        } else {
            (Regime::Near, Mat3::identity(), Mat3::identity())
        };
        Ok(FrameTransform { n, z0, gamma, s, regime, tau0, tau0_inv })
    }

    pub fn for_kernel(params: &KernelParams, v0: &Vec3) -> Result<Self> {
        Self::new(params.n, KineticPoint::velocity(*v0), params.gamma, params.s)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn v0(&self) -> Vec3 {
        self.z0.v
    }

    pub fn z0(&self) -> KineticPoint {
        self.z0
    }

    pub fn tau0(&self, v: &Vec3) -> Vec3 {
        self.tau0 * v
    }

    pub fn tau0_inv(&self, v: &Vec3) -> Vec3 {
        self.tau0_inv * v
    }

    pub fn tau0_matrix(&self) -> Mat3 {
        self.tau0
    }

    pub fn tau0_inv_matrix(&self) -> Mat3 {
        self.tau0_inv
    }

    pub fn det_tau0(&self) -> f64 {
        match self.regime {
            Regime::Far => 1.0 / self.z0.v.norm(),
            Regime::Near => 1.0,
        }
    }

    fn time_scale(&self) -> f64 {
        match self.regime {
            Regime::Far => self.z0.v.norm().powf(self.gamma + 2.0 * self.s),
            Regime::Near => 1.0,
        }
    }

    /// `v0 + tau0(v)`.
    pub fn velocity(&self, v: &Vec3) -> Vec3 {
        self.z0.v + self.tau0(v)
    }

    pub fn transform_point(&self, z: &KineticPoint) -> KineticPoint {
        let k = self.time_scale();
        let (t0, x0, v0) = (self.z0.t, self.z0.x, self.z0.v);
        match self.regime {
            Regime::Far => KineticPoint { t: t0 + z.t / k, x: x0 + (self.tau0(&z.x) + v0 * z.t) / k, v: v0 + self.tau0(&z.v) },
            Regime::Near => KineticPoint { t: t0 + z.t, x: x0 + z.x + v0 * z.t, v: v0 + z.v },
        }
    }

    pub fn inverse_point(&self, z: &KineticPoint) -> KineticPoint {
        let k = self.time_scale();
        let (t0, x0, v0) = (self.z0.t, self.z0.x, self.z0.v);
        match self.regime {
            Regime::Far => {
                let t = (z.t - t0) * k;
                KineticPoint { t, x: self.tau0_inv(&((z.x - x0) * k - v0 * t)), v: self.tau0_inv(&(z.v - v0)) }
            }
            Regime::Near => {
                let t = z.t - t0;
                KineticPoint { t, x: z.x - x0 - v0 * t, v: z.v - v0 }
            }
        }
    }

    /// Membership in `E_r(v0) = v0 + tau0(B_r)`.
    pub fn in_velocity_set(&self, r: f64, v: &Vec3) -> bool {
        self.tau0_inv(&(v - self.z0.v)).norm() < r
    }

    /// Membership in the image of the centred kinetic cylinder `Q_r` under the frame map.
    pub fn in_cylinder_set(&self, r: f64, z: &KineticPoint) -> bool {
        let q = self.inverse_point(z);
        in_cylinder(r, self.s, &q)
    }

    /// Smallest radius of the section of `E_r(v0) - v0` by the hyperplane orthogonal to `u`.
    pub fn section_min_radius(&self, r: f64, u: &Vec3) -> Result<f64> {
        if self.regime == Regime::Near {
            return Err(VerifyError::InvalidParameter("section radius formula applies to the far regime only".into()));
        }
        let un = u.norm();
        if un == 0.0 {
            return Err(VerifyError::Degenerate("section normal must be nonzero".into()));
        }
        let v0 = self.z0.v;
        let cos = u.dot(&v0) / (un * v0.norm());
        let sin2 = (1.0 - cos * cos).max(0.0);
        Ok(r / (v0.norm_squared() * sin2 + cos * cos).sqrt())
    }

    fn check_params(&self, params: &KernelParams) -> Result<()> {
        if params.n != self.n || params.gamma != self.gamma || params.s != self.s {
            return Err(VerifyError::InvalidParameter("frame was built for different kernel parameters".into()));
        }
        Ok(())
    }
}

/// `(t, x, v)` with `-r^{2s} < t <= 0`, `|x| < r^{1+2s}`, `|v| < r`.
pub fn in_cylinder(r: f64, s: f64, z: &KineticPoint) -> bool {
    crate::kinetic_geometry::cylinder_contains(&KineticPoint::velocity(Vec3::zeros()), r, s, z)
}

/// Kernel seen in the frame: `|v0|^{-1-gamma-2s} K_f(v0 + tau0 v, v0 + tau0(v + h))` in the far regime
/// and `K_f(v0 + v, v0 + v + h)` in the near regime.
pub fn transformed_kernel(f: &Mixture, params: &KernelParams, frame: &FrameTransform, v: &Vec3, h: &Vec3, exact: bool, budget: &QuadBudget) -> Result<f64> {
    frame.check_params(params)?;
    let (vt, ht) = (frame.velocity(v), frame.tau0(h));
    let scale = match frame.regime {
        Regime::Far => frame.v0().norm().powf(-1.0 - params.gamma - 2.0 * params.s),
        Regime::Near => 1.0,
    };
    let k = if exact { kernel_exact(f, params, &vt, &(vt + ht), budget)? } else { kernel_surrogate(f, params, &vt, &ht, budget)? };
    Ok(scale * k)
}

/// Profile of the frame kernel built on the surrogate.
pub struct TransformedProfile<'a> {
    base: Surrogate<'a>,
    frame: FrameTransform,
}

impl<'a> TransformedProfile<'a> {
    pub fn new(base: Surrogate<'a>, frame: FrameTransform) -> Result<Self> {
        frame.check_params(&base.params)?;
        Ok(TransformedProfile { base, frame })
    }

    pub fn frame(&self) -> &FrameTransform {
        &self.frame
    }
}

impl Profile for TransformedProfile<'_> {
    fn params(&self) -> &KernelParams {
        &self.base.params
    }

    fn profile(&self, v: &Vec3, theta: &Vec3) -> Result<f64> {
        let vt = self.frame.velocity(v);
        match self.frame.regime {
            Regime::Near => self.base.profile(&vt, theta),
            Regime::Far => {
                let p = &self.base.params;
                let t = self.frame.tau0(theta);
                let tn = t.norm();
                let scale = self.frame.v0().norm().powf(-1.0 - p.gamma - 2.0 * p.s) * tn.powf(-(p.n as f64) - 2.0 * p.s);
                Ok(scale * profile_a(self.base.f, p, &vt, &(t / tn), &self.base.budget)?)
            }
        }
    }

    fn quadratic_form(&self, v: &Vec3) -> Result<Mat3> {
        let vt = self.frame.velocity(v);
        match self.frame.regime {
            Regime::Near => self.base.quadratic_form(&vt),
            Regime::Far => {
                let p = &self.base.params;
                let b = plane_form_matrix(self.base.f, p, &vt, Some(self.frame.v0()), &self.base.budget)?;
                let ti = self.frame.tau0_inv;
                Ok(ti * b * ti * self.frame.v0().norm().powf(-p.gamma - 2.0 * p.s))
            }
        }
    }
}

/// The untransformed kernel recentred at `v0`: `A(v0 + v; theta)`.
pub struct ShiftedProfile<'a> {
    base: Surrogate<'a>,
    v0: Vec3,
}

impl<'a> ShiftedProfile<'a> {
    pub fn new(base: Surrogate<'a>, v0: Vec3) -> Self {
        ShiftedProfile { base, v0 }
    }
}

impl Profile for ShiftedProfile<'_> {
    fn params(&self) -> &KernelParams {
        &self.base.params
    }

    fn profile(&self, v: &Vec3, theta: &Vec3) -> Result<f64> {
        self.base.profile(&(self.v0 + v), theta)
    }

    fn quadratic_form(&self, v: &Vec3) -> Result<Mat3> {
        self.base.quadratic_form(&(self.v0 + v))
    }
}

/// Grids shared by every base velocity of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrids {
    pub r_list: Vec<f64>,
    pub v_grid: Vec<Vec<f64>>,
    #[serde(default)]
    pub settings: ConditionSettings,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Coercivity only.
    #[serde(default)]
    pub coercivity_grid: CoercivityGrid,
    /// Decay exponent of the weight used in the far tail integral.
    #[serde(default)]
    pub tail_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub v0: Vec<f64>,
    pub v0_norm: f64,
    pub regime: Regime,
    pub lambda: Option<f64>,
    pub big_lambda: Option<f64>,
    pub discrepancy: Option<f64>,
    pub pass: bool,
    /// Far tail integral and its value divided by `(1 + |v0|)^{gamma - p}`.
    pub tail: Option<TailCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityScan {
    pub condition: Condition,
    pub transformed: bool,
    pub rows: Vec<ScanRow>,
    /// max / min of the measured constant across base velocities.
    pub ratio: f64,
}

/// Runs a condition measurement for each base velocity, with the frame kernel (`transformed`)
/// or with the plain kernel recentred at `v0`.
pub fn uniformity_scan(f: &Mixture, params: &KernelParams, condition: Condition, v0_list: &[Vec3], grids: &ScanGrids, transformed: bool, budget: &QuadBudget) -> Result<UniformityScan> {
    if v0_list.is_empty() {
        return Err(VerifyError::InvalidParameter("empty base velocity list".into()));
    }
    let n = params.n;
    let v_grid: Vec<Vec3> = grids.v_grid.iter().map(|v| crate::linalg::to_vec3(n, v)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(v0_list.len());
    for v0 in v0_list {
        let frame = FrameTransform::for_kernel(params, v0)?;
        let base = Surrogate::new(f, *params, *budget)?;
        let prof: Box<dyn Profile + '_> = if transformed { Box::new(TransformedProfile::new(base, frame.clone())?) } else { Box::new(ShiftedProfile::new(base, *v0)) };
        let rep = match condition {
            Condition::Upper => condition_upper_bound(prof.as_ref(), &grids.r_list, &v_grid, &grids.settings, &grids.thresholds)?,
            Condition::Nondegeneracy => condition_nondegeneracy(prof.as_ref(), &grids.r_list, &v_grid, &grids.settings, &grids.thresholds)?,
            Condition::Cancellation => condition_cancellation(prof.as_ref(), &grids.r_list, &v_grid, &grids.settings, &grids.thresholds)?,
            Condition::Coercivity => coercivity_energies(prof.as_ref(), &crate::boltzmann_kernel::default_family(), grids.coercivity_grid, &grids.thresholds)?.1,
        };
        let tail = if frame.regime() == Regime::Far { Some(tail_integral_check(f, params, v0, grids.tail_weight, &grids.settings, budget)?) } else { None };
        rows.push(ScanRow {
            v0: to_slice(n, v0),
            v0_norm: v0.norm(),
            regime: frame.regime(),
            lambda: rep.lambda_meas,
            big_lambda: rep.big_lambda_meas,
            discrepancy: rep.discrepancy,
            pass: rep.pass,
            tail,
        });
    }
    let vals: Vec<f64> = rows.iter().filter_map(|r| if condition == Condition::Upper || condition == Condition::Cancellation { r.big_lambda } else { r.lambda }).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(UniformityScan { condition, transformed, rows, ratio })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub value: f64,
    pub normalized: f64,
}

/// `int_M (1 + |v0 + h|)^{-p} K(v0, v0 + h) dh` over `M = {|v0 + h| < |v0|/8, |h| > 1/2 + |v0|/8}`,
/// with the surrogate kernel, together with its ratio to `(1 + |v0|)^{gamma - p}`.
pub fn tail_integral_check(f: &Mixture, params: &KernelParams, v0: &Vec3, p: f64, settings: &ConditionSettings, budget: &QuadBudget) -> Result<TailCheck> {
    params.validate()?;
    let r_in = v0.norm() / 8.0;
    let rho_min = 0.5 + r_in;
    let rule = settings.rule(params.n);
    let s = params.s;
    let parts: Vec<f64> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(theta, w)| {
            let Some((lo, hi)) = sphere_line(v0, theta, &Vec3::zeros(), r_in) else {
                return Ok(0.0);
            };
            let (a, b) = (lo.max(rho_min), hi);
            if b <= a {
                return Ok(0.0);
            }
            let prof = profile_a(f, params, v0, theta, budget)?;
            let radial = integrate_radial(|rho| (1.0 + (v0 + theta * rho).norm()).powf(-p), -1.0 - 2.0 * s, a, b, &[], &settings.radial)?.value;
            Ok(w * prof * radial)
        })
        .collect::<Result<_>>()?;
    let value = params.kappa() * parts.iter().sum::<f64>();
    Ok(TailCheck { value, normalized: value / (1.0 + v0.norm()).powf(params.gamma - p) })
}

/// Fitted constant `c0` with `c0 |v - v'| <= d(v0 + tau0 v, v0 + tau0 v') <= |v - v'| / c0` over
/// random pairs in the ball of radius 3, `d` the anisotropic distance.
pub fn fit_distance_constant(frame: &FrameTransform, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = frame.dimension();
    let mut c0: f64 = 1.0;
    for _ in 0..samples {
        let a = random_in_ball(&mut rng, n, 3.0);
        let b = random_in_ball(&mut rng, n, 3.0);
        let e = (a - b).norm();
        if e == 0.0 {
            continue;
        }
        let d = crate::boltzmann_kernel::gs_distance(&frame.velocity(&a), &frame.velocity(&b));
        c0 = c0.min(d / e).min(e / d);
    }
    c0
}

/// Minimum of `|v0 + tau0(v)| / |v0|` over random `v` in the ball of radius `radius`.
pub fn v0_lower_ratio(frame: &FrameTransform, radius: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = frame.v0().norm();
    let mut worst = f64::INFINITY;
    for k in 0..samples {
        // include the extreme point along -v0 deterministically
        let v = if k == 0 && n0 > 0.0 { -frame.v0() / n0 * radius } else { random_in_ball(&mut rng, frame.dimension(), radius) };
        worst = worst.min(frame.velocity(&v).norm() / n0);
    }
    worst
}

pub fn random_in_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec3 {
    loop {
        let mut v = Vec3::zeros();
        for k in 0..n {
            v[k] = rng.gen_range(-radius..radius);
        }
        if v.norm() < radius {
            return v;
        }
    }
}
