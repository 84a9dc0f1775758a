//! Kinetic distance, cylinders, sampled weighted Hölder norms, and checkers for the velocity
//! interpolation inequality and the iteration lemma.

use crate::error::{Result, VerifyError};
use crate::frame_transform::random_in_ball;
use crate::linalg::{ball_volume, check_dimension, Vec3};
use crate::quadrature::{gauss_legendre, SphereRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticPoint {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
}

impl KineticPoint {
    pub fn new(t: f64, x: Vec3, v: Vec3) -> Self {
        KineticPoint { t, x, v }
    }

    pub fn velocity(v: Vec3) -> Self {
        KineticPoint { t: 0.0, x: Vec3::zeros(), v }
    }

    /// `(lambda^{2s} t, lambda^{1+2s} x, lambda v)`.
    pub fn scaled(&self, lambda: f64, s: f64) -> Self {
        KineticPoint { t: lambda.powf(2.0 * s) * self.t, x: self.x * lambda.powf(1.0 + 2.0 * s), v: self.v * lambda }
    }
}

/// `min_w max(|dt|^{1/2s}, |dx - dt w|^{1/(1+2s)}, |v1 - w|, |v2 - w|)`.
///
/// Equal times have the closed form `max(|dx|^{1/(1+2s)}, |v1 - v2| / 2)`. Otherwise the minimum is
/// found by a pattern search started from `v1`, `v2`, their midpoint and `dx / dt`. Every piece of
/// the objective has ball-shaped sublevel sets, so local minima are global.
pub fn kinetic_distance(z1: &KineticPoint, z2: &KineticPoint, s: f64) -> f64 {
    debug_assert!(s > 0.0 && s <= 1.0);
    let dt = z1.t - z2.t;
    let dx = z1.x - z2.x;
    let beta = 1.0 / (1.0 + 2.0 * s);
    let a = dt.abs().powf(0.5 / s);
    let floor = a.max(0.5 * (z1.v - z2.v).norm());
    if dt == 0.0 {
        return floor.max(dx.norm().powf(beta));
    }
    let cx = dx / dt;
    let obj = |w: &Vec3| a.max((cx - w).norm().powf(beta) * dt.abs().powf(beta)).max((z1.v - w).norm()).max((z2.v - w).norm());
    let mid = 0.5 * (z1.v + z2.v);
    if obj(&mid) <= floor {
        return floor;
    }
    let centers = [cx, z1.v, z2.v];
    let scale = centers.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let step0 = 0.5 * (z1.v - z2.v).norm().max((cx - mid).norm()).max(1e-3 * scale);
    [z1.v, z2.v, mid, cx].iter().map(|w| pattern_search(&obj, *w, &centers, step0, scale)).fold(f64::INFINITY, f64::min)
}

fn pattern_search<F: Fn(&Vec3) -> f64>(obj: &F, mut w: Vec3, centers: &[Vec3; 3], step0: f64, scale: f64) -> f64 {
    let mut best = obj(&w);
    let mut step = step0;
    let mut iters = 0;
    while step > 1e-14 * scale && iters < 20_000 {
        iters += 1;
        // unit vectors towards the centres and their partial sums cover every active set
        let u: Vec<Vec3> = centers.iter().filter_map(|c| (c - w).try_normalize(0.0)).collect();
        let mut dirs: Vec<Vec3> = u.clone();
        for i in 0..u.len() {
            for j in i + 1..u.len() {
                dirs.extend((u[i] + u[j]).try_normalize(1e-12));
            }
        }
        if u.len() == 3 {
            dirs.extend((u[0] + u[1] + u[2]).try_normalize(1e-12));
        }
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = 1.0;
            dirs.push(e);
            dirs.push(-e);
        }
        let mut cand = None;
        for d in &dirs {
            let y = w + d * step;
            let val = obj(&y);
            if val < best {
                best = val;
                cand = Some(y);
            }
        }
        match cand {
            Some(y) => {
                w = y;
                step *= 2.0;
            }
            None => step *= 0.25,
        }
    }
    best
}

/// Membership in `Q_r(z0)`: `t0 - r^{2s} < t <= t0`, `|x - x0 - (t - t0) v0| < r^{1+2s}`, `|v - v0| < r`.
pub fn cylinder_contains(z0: &KineticPoint, r: f64, s: f64, z: &KineticPoint) -> bool {
    if r <= 0.0 {
        return false;
    }
    let dt = z.t - z0.t;
    dt > -r.powf(2.0 * s) && dt <= 0.0 && (z.x - z0.x - z0.v * dt).norm() < r.powf(1.0 + 2.0 * s) && (z.v - z0.v).norm() < r
}

/// Weighted kinetic norm on the time window `(tau, T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub n: usize,
    pub s: f64,
    pub alpha: f64,
    pub p: f64,
    pub window: (f64, f64),
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
}

fn default_radii() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

impl NormSpec {
    pub fn validate(&self) -> Result<()> {
        check_dimension(self.n)?;
        let (tau, big_t) = self.window;
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(VerifyError::InvalidParameter(format!("s = {} outside (0, 1]", self.s)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(VerifyError::InvalidParameter(format!("alpha = {} outside [0, 1)", self.alpha)));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(VerifyError::InvalidParameter(format!("weight exponent p = {} must be finite and >= 0", self.p)));
        }
        if !(tau.is_finite() && big_t.is_finite() && tau < big_t) {
            return Err(VerifyError::InvalidParameter(format!("empty time window ({tau}, {big_t})")));
        }
        if self.radii.is_empty() {
            return Err(VerifyError::InvalidParameter("no cylinder radii".into()));
        }
        for &r in &self.radii {
            if !(r > 0.0 && r <= 1.0) || r.powf(2.0 * self.s) >= big_t - tau {
                return Err(VerifyError::InvalidParameter(format!("cylinder radius {r} must lie in (0, 1] and fit in the time window")));
            }
        }
        Ok(())
    }

    fn weight(&self, v: &Vec3, p: f64) -> f64 {
        (1.0 + v.norm()).powf(p)
    }
}

/// Where the sampled norms look: seeded cylinder centres, random points inside each cylinder
/// and a polar rule on velocity balls for the `L^1` part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplePlan {
    pub seed: u64,
    pub centers: usize,
    pub points_per_cylinder: usize,
    pub x_radius: f64,
    pub v_radius: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan { seed: 7, centers: 12, points_per_cylinder: 6, x_radius: 1.0, v_radius: 3.0, radial_nodes: 6, angular_nodes: 16 }
    }
}

impl SamplePlan {
    pub fn validate(&self) -> Result<()> {
        if self.centers == 0 || self.points_per_cylinder == 0 || self.radial_nodes == 0 || self.angular_nodes < 2 {
            return Err(VerifyError::InvalidParameter("empty sample plan".into()));
        }
        if !(self.x_radius > 0.0 && self.v_radius > 0.0) {
            return Err(VerifyError::InvalidParameter("sample plan radii must be positive".into()));
        }
        Ok(())
    }

    /// Nodes and weights of a rule on the unit ball; weights sum to its volume.
    fn ball_rule(&self, n: usize) -> Vec<(Vec3, f64)> {
        let sphere = if n == 2 { SphereRule::circle(self.angular_nodes) } else { SphereRule::product(self.angular_nodes / 2) };
        let (x, w) = gauss_legendre(self.radial_nodes);
        let mut out = Vec::with_capacity(x.len() * sphere.len());
        for (xi, wi) in x.iter().zip(&w) {
            let rho = 0.5 * (xi + 1.0);
            let wr = 0.5 * wi * rho.powi(n as i32 - 1);
            for (node, ws) in sphere.nodes.iter().zip(&sphere.weights) {
                out.push((node * rho, wr * ws));
            }
        }
        out
    }

    fn centers<R: Rng>(&self, rng: &mut R, spec: &NormSpec, r: f64) -> Vec<KineticPoint> {
        let (tau, big_t) = spec.window;
        let t_lo = tau + r.powf(2.0 * spec.s);
        (0..self.centers)
            .map(|_| {
                let t = t_lo + rng.gen_range(0.0..1.0) * (big_t - t_lo);
                let x = random_in_ball(rng, spec.n, self.x_radius);
                let v = random_in_ball(rng, spec.n, self.v_radius);
                KineticPoint::new(t, x, v)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub radius: f64,
    pub sup: f64,
    /// Largest `(1 + |v|)^p |F|` over the sampled points, each weighted by its own velocity.
    pub weighted_sup: f64,
    pub seminorm: f64,
    /// Largest `int_{B_r(v0)} |F(t, x, w)| (1 + |w|)^p dw` over the sampled `(t, x)`.
    pub l1_weighted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledNorms {
    pub c0: f64,
    pub seminorm: f64,
    pub weighted_c0: f64,
    pub weighted_holder: f64,
    pub weighted_l1: f64,
    pub pairs: usize,
    pub cylinders: Vec<CylinderRecord>,
}

fn finite(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(VerifyError::NonFiniteIntegrand(value))
    }
}

fn holder_ratio(f1: f64, f2: f64, d: f64, alpha: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        (f1 - f2).abs() / d.powf(alpha)
    }
}

/// Sampled `C^0`, `C^alpha` and `L^infty_{t,x} L^1` functionals over the plan's cylinders.
///
/// The seminorm is the largest difference quotient over all sampled pairs of one cylinder; with
/// `alpha = 0` it is the sup norm. The weighted `C^0` norm weights every sample by its own velocity
/// (the small-cylinder limit); the weighted Hölder norm uses `(1 + |v0|)^p` of the cylinder centre.
pub fn sampled_holder_norm<F>(field: F, spec: &NormSpec, plan: &SamplePlan) -> Result<SampledNorms>
where
    F: Fn(&KineticPoint) -> f64 + Sync,
{
    spec.validate()?;
    plan.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut jobs = Vec::new();
    for &r in &spec.radii {
        for z0 in plan.centers(&mut rng, spec, r) {
            let mut pts = vec![z0];
            for _ in 0..plan.points_per_cylinder {
                let dt = -rng.gen_range(0.0..1.0) * r.powf(2.0 * spec.s);
                let v = z0.v + random_in_ball(&mut rng, n, r);
                let x = z0.x + z0.v * dt + random_in_ball(&mut rng, n, r.powf(1.0 + 2.0 * spec.s));
                pts.push(KineticPoint::new(z0.t + dt, x, v));
            }
            jobs.push((r, pts));
        }
    }
    let ball = plan.ball_rule(n);
    let cylinders: Vec<CylinderRecord> = jobs
        .par_iter()
        .map(|(r, pts)| {
            let z0 = pts[0];
            let vals: Vec<f64> = pts.iter().map(|z| finite(field(z))).collect::<Result<_>>()?;
            let sup = vals.iter().fold(0.0f64, |m, f| m.max(f.abs()));
            let weighted_sup = pts.iter().zip(&vals).fold(0.0f64, |m, (z, f)| m.max(spec.weight(&z.v, spec.p) * f.abs()));
            let mut seminorm = 0.0f64;
            if spec.alpha == 0.0 {
                seminorm = sup;
            } else {
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        let d = kinetic_distance(&pts[i], &pts[j], spec.s);
                        seminorm = seminorm.max(holder_ratio(vals[i], vals[j], d, spec.alpha));
                    }
                }
            }
            let mut l1_weighted = 0.0f64;
            for z in pts {
                let mut acc = 0.0;
                for (node, w) in &ball {
                    let v = z0.v + node * *r;
                    acc += w * r.powi(n as i32) * finite(field(&KineticPoint::new(z.t, z.x, v)))?.abs() * spec.weight(&v, spec.p);
                }
                l1_weighted = l1_weighted.max(acc);
            }
            Ok(CylinderRecord { t: z0.t, x: crate::linalg::to_slice(n, &z0.x), v: crate::linalg::to_slice(n, &z0.v), radius: *r, sup, weighted_sup, seminorm, l1_weighted })
        })
        .collect::<Result<_>>()?;
    let weight = |c: &CylinderRecord| (1.0 + c.v.iter().map(|a| a * a).sum::<f64>().sqrt()).powf(spec.p);
    let pairs = jobs.iter().map(|(_, p)| p.len() * (p.len() - 1) / 2).sum();
    Ok(SampledNorms {
        c0: cylinders.iter().fold(0.0, |m, c| m.max(c.sup)),
        seminorm: cylinders.iter().fold(0.0, |m, c| m.max(c.seminorm)),
        weighted_c0: cylinders.iter().fold(0.0, |m, c| m.max(c.weighted_sup)),
        weighted_holder: cylinders.iter().fold(0.0, |m, c| m.max(weight(c) * (c.sup + c.seminorm))),
        weighted_l1: cylinders.iter().fold(0.0, |m, c| m.max(c.l1_weighted)),
        pairs,
        cylinders,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationRow {
    pub epsilon: f64,
    /// `sup (1 + |v|)^p |F|` over the sampled points.
    pub lhs: f64,
    /// Sampled `C^alpha` norm with weight exponent `p - alpha`.
    pub holder_norm: f64,
    /// Sampled `L^infty_{t,x} L^1` norm with weight exponent `p + n`.
    pub l1_norm: f64,
    pub constant: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Constant of the ball-average step: `(1 + eps)^{p+n} / |B_1|`.
pub fn interpolation_constant(n: usize, p: f64, eps: f64) -> f64 {
    (1.0 + eps).powf(p + n as f64) / ball_volume(n)
}

/// Checks `||F||_{C^0_p} <= eps^alpha ||F||_{C^alpha_{p-alpha}} + C eps^{-n} ||F||_{L^1_{p+n}}` on sampled points.
///
/// Each sampled point `z` carries the cylinder of radius `eps / (1 + |v|)` around it; the Hölder
/// and `L^1` norms are sampled on that cylinder's velocity ball at the time and position of `z`.
pub fn verify_interpolation<F>(field: F, spec: &NormSpec, epsilons: &[f64], plan: &SamplePlan) -> Result<Vec<InterpolationRow>>
where
    F: Fn(&KineticPoint) -> f64 + Sync,
{
    spec.validate()?;
    plan.validate()?;
    let n = spec.n;
    let ball = plan.ball_rule(n);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    epsilons
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps < 1.0) || eps.powf(2.0 * spec.s) >= spec.window.1 - spec.window.0 {
                return Err(VerifyError::InvalidParameter(format!("epsilon = {eps} must lie in (0, 1) and fit in the time window")));
            }
            let centers = plan.centers(&mut rng, spec, eps);
            let per: Vec<(f64, f64, f64)> = centers
                .par_iter()
                .map(|z| {
                    let f0 = finite(field(z))?;
                    let vn = 1.0 + z.v.norm();
                    let r = eps / vn;
                    let (mut sup, mut semi, mut l1) = (f0.abs(), 0.0f64, 0.0);
                    for (node, w) in &ball {
                        let y = KineticPoint::new(z.t, z.x, z.v + node * r);
                        let fy = finite(field(&y))?;
                        sup = sup.max(fy.abs());
                        if spec.alpha == 0.0 {
                            semi = semi.max(fy.abs()).max(f0.abs());
                        } else {
                            semi = semi.max(holder_ratio(f0, fy, kinetic_distance(z, &y, spec.s), spec.alpha));
                        }
                        l1 += w * r.powi(n as i32) * fy.abs() * spec.weight(&y.v, spec.p + n as f64);
                    }
                    Ok((vn.powf(spec.p) * f0.abs(), vn.powf(spec.p - spec.alpha) * (sup + semi), l1))
                })
                .collect::<Result<_>>()?;
            let lhs = per.iter().fold(0.0f64, |m, r| m.max(r.0));
            let holder_norm = per.iter().fold(0.0f64, |m, r| m.max(r.1));
            let l1_norm = per.iter().fold(0.0f64, |m, r| m.max(r.2));
            let constant = interpolation_constant(n, spec.p, eps);
            let rhs = eps.powf(spec.alpha) * holder_norm + constant * eps.powi(-(n as i32)) * l1_norm;
            let slack = rhs - lhs;
            Ok(InterpolationRow { epsilon: eps, lhs, holder_norm, l1_norm, constant, rhs, slack, holds: lhs <= rhs * (1.0 + 1e-12) })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GiustiReport {
    pub hypothesis_ok: bool,
    /// `None` when the hypothesis fails and nothing is asserted.
    pub conclusion_ok: Option<bool>,
    pub c_used: f64,
    pub pairs: usize,
    pub bounded: bool,
    pub hypothesis_violations: usize,
    /// Smallest `c A (s2 - s1)^{-gamma} - F(s1)` over the sampled pairs.
    pub conclusion_margin: f64,
}

/// `(1 - sigma)^{-gamma} sum_i 2^{-i/2}` with `sigma = 2^{-1/(2 gamma)}`.
pub fn giusti_constant(gamma: f64) -> f64 {
    let sigma = 2f64.powf(-0.5 / gamma);
    (1.0 - sigma).powf(-gamma) / (1.0 - 2f64.powf(-0.5))
}

/// Checks the iteration lemma for `F` on `samples` equispaced points of `[t1, t2]`.
///
/// The hypothesis also requires every sample to be finite and nonnegative.
pub fn giusti_verify<F: Fn(f64) -> f64>(f: F, gamma: f64, a: f64, t1: f64, t2: f64, samples: usize) -> Result<GiustiReport> {
    if !(gamma > 0.0 && gamma.is_finite()) || !(a >= 0.0 && a.is_finite()) || !(t1 < t2) || samples < 2 {
        return Err(VerifyError::InvalidParameter(format!("iteration check needs gamma > 0, A >= 0, t1 < t2, two samples (gamma = {gamma}, A = {a})")));
    }
    let ts: Vec<f64> = (0..samples).map(|i| t1 + (t2 - t1) * i as f64 / (samples - 1) as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let bounded = vals.iter().all(|v| v.is_finite() && *v >= 0.0);
    let c = giusti_constant(gamma);
    let tol = |x: f64| 1e-12 * x.abs().max(1.0);
    let (mut violations, mut margin, mut pairs) = (0, f64::INFINITY, 0);
    for i in 0..samples {
        for j in i + 1..samples {
            pairs += 1;
            let decay = (ts[j] - ts[i]).powf(-gamma);
            let bound = 0.5 * vals[j] + a * decay;
            if !(vals[i] <= bound + tol(bound)) {
                violations += 1;
            }
            margin = margin.min(c * a * decay - vals[i]);
        }
    }
    let hypothesis_ok = bounded && violations == 0;
    let conclusion_ok = hypothesis_ok.then(|| margin >= -tol(c * a));
    Ok(GiustiReport { hypothesis_ok, conclusion_ok, c_used: c, pairs, bounded, hypothesis_violations: violations, conclusion_margin: margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn pt(t: f64, x: [f64; 2], v: [f64; 2]) -> KineticPoint {
        KineticPoint::new(t, Vec3::new(x[0], x[1], 0.0), Vec3::new(v[0], v[1], 0.0))
    }

    /// Brute force over a `w` grid around the seeds, then a finer grid around the best node.
    fn grid_oracle(z1: &KineticPoint, z2: &KineticPoint, s: f64) -> f64 {
        let dt = z1.t - z2.t;
        let obj = |w: Vec3| {
            dt.abs()
                .powf(0.5 / s)
                .max((z1.x - z2.x - w * dt).norm().powf(1.0 / (1.0 + 2.0 * s)))
                .max((z1.v - w).norm())
                .max((z2.v - w).norm())
        };
        let mut center = 0.5 * (z1.v + z2.v);
        let mut half = 6.0;
        let mut best = obj(center);
        for _ in 0..4 {
            let m = 120;
            let mut arg = center;
            for i in 0..=m {
                for j in 0..=m {
                    let w = center + Vec3::new(-half + 2.0 * half * i as f64 / m as f64, -half + 2.0 * half * j as f64 / m as f64, 0.0);
                    let val = obj(w);
                    if val < best {
                        best = val;
                        arg = w;
                    }
                }
            }
            center = arg;
            half *= 4.0 / m as f64;
        }
        best
    }

    #[test]
    fn distance_spot_values() {
        let o = pt(0.0, [0.0, 0.0], [0.0, 0.0]);
        assert_eq!(kinetic_distance(&o, &o, 0.5), 0.0);
        let b = pt(0.0, [0.0, 0.0], [2.0, 0.0]);
        assert_relative_eq!(kinetic_distance(&o, &b, 0.5), 1.0, max_relative = 1e-12);
        assert_relative_eq!(grid_oracle(&o, &b, 0.5), 1.0, max_relative = 1e-6);
        let t1 = pt(1.0, [0.0, 0.0], [0.0, 0.0]);
        assert_relative_eq!(kinetic_distance(&t1, &o, 0.5), 1.0, max_relative = 1e-12);
        assert_relative_eq!(grid_oracle(&t1, &o, 0.5), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn distance_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &s in &[0.3, 0.7, 1.0] {
            for _ in 0..100 {
                let mut z = || pt(rng.gen_range(-1.0..1.0), [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
                let (a, b) = (z(), z());
                let d = kinetic_distance(&a, &b, s);
                let oracle = grid_oracle(&a, &b, s);
                assert!(d <= oracle + 1e-3, "s = {s}: {d} vs grid {oracle}");
                assert!(d >= oracle - 1e-3, "s = {s}: {d} vs grid {oracle}");
            }
        }
    }

    #[test]
    fn cylinder_boundaries_are_strict() {
        let z0 = pt(1.0, [0.5, 0.0], [1.0, 0.0]);
        let (r, s) = (0.5, 0.5);
        assert!(cylinder_contains(&z0, r, s, &z0));
        assert!(!cylinder_contains(&z0, r, s, &pt(1.0 - r, [0.0, 0.0], [1.0, 0.0])));
        assert!(!cylinder_contains(&z0, r, s, &pt(1.0, [0.5, 0.0], [1.5, 0.0])));
        assert!(!cylinder_contains(&z0, r, s, &pt(1.1, [0.5, 0.0], [1.0, 0.0])));
        // x is transported with v0
        assert!(cylinder_contains(&z0, r, s, &pt(0.8, [0.3, 0.0], [1.0, 0.0])));
        assert!(!cylinder_contains(&z0, r, s, &pt(0.8, [0.8, 0.0], [1.0, 0.0])));
    }

    fn spec(alpha: f64, p: f64) -> NormSpec {
        NormSpec { n: 2, s: 0.5, alpha, p, window: (0.0, 3.0), radii: vec![0.25, 0.5, 1.0] }
    }

    #[test]
    fn sampled_norm_special_fields() {
        let plan = SamplePlan::default();
        let c = sampled_holder_norm(|_: &KineticPoint| 3.0, &spec(0.5, 0.0), &plan).unwrap();
        assert_eq!(c.seminorm, 0.0);
        assert_eq!(c.c0, 3.0);
        let p = 1.5;
        let w = sampled_holder_norm(|z: &KineticPoint| (1.0 + z.v.norm()).powf(-p), &spec(0.5, p), &plan).unwrap();
        assert_relative_eq!(w.weighted_c0, 1.0, max_relative = 1e-12);
        let hat = pt(1.5, [0.2, -0.1], [0.5, 0.5]);
        let d = sampled_holder_norm(|z: &KineticPoint| kinetic_distance(z, &hat, 0.5).powf(0.5), &spec(0.5, 0.0), &plan).unwrap();
        assert!(d.seminorm <= 1.0 + 1e-6, "{}", d.seminorm);
        assert!(d.seminorm > 0.1);
    }

    #[test]
    fn l1_functional_of_a_constant() {
        let plan = SamplePlan::default();
        let c = sampled_holder_norm(|_: &KineticPoint| 1.0, &spec(0.5, 0.0), &plan).unwrap();
        assert_relative_eq!(c.weighted_l1, std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn interpolation_rows() {
        let plan = SamplePlan::default();
        let eps = [0.5, 0.1, 0.02];
        let zero = verify_interpolation(|_: &KineticPoint| 0.0, &spec(0.5, 1.0), &eps, &plan).unwrap();
        assert!(zero.iter().all(|r| r.holds && r.slack == r.rhs));
        let bump = |z: &KineticPoint| (-(z.v - Vec3::new(0.5, 0.0, 0.0)).norm_squared()).exp();
        for row in verify_interpolation(bump, &spec(0.5, 1.0), &eps, &plan).unwrap() {
            assert!(row.holds && row.slack > 0.0, "{row:?}");
        }
        let p = 2.0;
        let decaying = |z: &KineticPoint| (1.0 + z.v.norm()).powf(-p) * (-(z.t - 1.5).powi(2) - z.x.norm_squared()).exp();
        for row in verify_interpolation(decaying, &spec(0.5, p), &eps, &plan).unwrap() {
            assert!(row.holds && row.slack > 0.0, "{row:?}");
        }
        assert_relative_eq!(interpolation_constant(2, 0.0, 0.0), 1.0 / std::f64::consts::PI);
    }

    #[test]
    fn giusti_reference_cases() {
        let c = giusti_constant(1.0);
        let sigma = 2f64.powf(-0.5);
        assert_relative_eq!(sigma, 0.707_106_781_186_547_5, max_relative = 1e-15);
        assert_relative_eq!(c, (1.0 - sigma).powi(-2), max_relative = 1e-12);
        assert_relative_eq!(c, 11.656_854_249_492_38, max_relative = 1e-12);
        let zero = giusti_verify(|_| 0.0, 1.0, 0.0, 0.0, 1.0, 50).unwrap();
        assert!(zero.hypothesis_ok && zero.conclusion_ok == Some(true));
        // blows up at the right end point, so the samples are not bounded
        let blow = giusti_verify(|t| (1.0 - t).powi(-1), 1.0, 1.0, 0.0, 1.0, 50).unwrap();
        assert!(!blow.hypothesis_ok && blow.conclusion_ok.is_none());
        // increasing F with A = 0 violates F(t1) <= F(t2) / 2 for close pairs
        let inc = giusti_verify(|t| t + 1.0, 1.0, 0.0, 0.0, 1.0, 20).unwrap();
        assert!(!inc.hypothesis_ok && inc.hypothesis_violations > 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn distance_is_symmetric_and_scales(
            t in -1.0..1.0f64, x in prop::array::uniform2(-2.0..2.0f64), v1 in prop::array::uniform2(-2.0..2.0f64),
            v2 in prop::array::uniform2(-2.0..2.0f64), s in 0.2..1.0f64, big in any::<bool>(),
        ) {
            let a = pt(t, x, v1);
            let b = pt(0.0, [0.0, 0.0], v2);
            let d = kinetic_distance(&a, &b, s);
            prop_assert!((d - kinetic_distance(&b, &a, s)).abs() <= 1e-9 * d.max(1.0));
            let lambda = if big { 2.0 } else { 0.5 };
            let ds = kinetic_distance(&a.scaled(lambda, s), &b.scaled(lambda, s), s);
            prop_assert!((ds - lambda * d).abs() <= 1e-8 * d.max(1.0), "{} vs {}", ds, lambda * d);
            prop_assert_eq!(kinetic_distance(&a, &a, s), 0.0);
        }

        #[test]
        fn giusti_conclusion_follows_hypothesis(
            gamma in 0.3..2.0f64, a in 0.1..3.0f64, fr in prop::collection::vec((0.0..1.0f64, 0.01..0.5f64), 1..4), t2 in 0.5..2.0f64,
        ) {
            // maxima of b (t2 + delta - t)^{-gamma} with b <= A satisfy the hypothesis exactly
            let f = |t: f64| fr.iter().map(|&(b, delta)| b * a * (t2 + delta - t).powf(-gamma)).fold(0.0, f64::max);
            let rep = giusti_verify(f, gamma, a, 0.0, t2, 40).unwrap();
            prop_assert!(rep.hypothesis_ok);
            prop_assert_eq!(rep.conclusion_ok, Some(true));
        }
    }
}
