//! Velocity distributions as finite mixtures of Gaussians, boxes and balls.
//!
//! Gaussian weights are masses; box and ball weights are density heights. Boxes may
//! carry a negative weight to correct overlaps, as long as the total density stays
//! nonnegative.

use crate::error::{Result, VerifyError};
use crate::linalg::{ball_volume, check_dimension, is_symmetric, sphere_area, sym_eigen, to_mat3, to_vec3, Mat3, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Exponent cut-off: Gaussian tails with `exp(-q/2)` below `exp(-TAIL_Q/2)` are dropped.
const TAIL_Q: f64 = 82.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentSpec {
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        #[serde(default = "unit_weight")]
        weight: f64,
    },
    Box {
        center: Vec<f64>,
        half_widths: Vec<f64>,
        #[serde(default = "unit_weight")]
        weight: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "unit_weight")]
        weight: f64,
    },
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub dimension: usize,
    pub components: Vec<ComponentSpec>,
}

#[derive(Clone, Debug)]
pub enum Component {
    Gaussian { mean: Vec3, cov: Mat3, prec: Mat3, norm: f64, weight: f64, sigma: Vec3 },
    Box { center: Vec3, half: Vec3, weight: f64 },
    Ball { center: Vec3, radius: f64, weight: f64 },
}

#[derive(Clone, Debug)]
pub struct Mixture {
    n: usize,
    components: Vec<Component>,
}

impl Component {
    /// Density contribution at `v` (third coordinate ignored in dimension 2).
    fn eval(&self, n: usize, v: &Vec3) -> f64 {
        match self {
            Component::Gaussian { mean, prec, norm, weight, .. } => {
                let d = v - mean;
                let q = d.dot(&(prec * d));
                if q > TAIL_Q {
                    0.0
                } else {
                    weight * norm * (-0.5 * q).exp()
                }
            }
            Component::Box { center, half, weight } => {
                if (0..n).all(|i| (v[i] - center[i]).abs() < half[i]) {
                    *weight
                } else {
                    0.0
                }
            }
            Component::Ball { center, radius, weight } => {
                if (v - center).norm_squared() < radius * radius {
                    *weight
                } else {
                    0.0
                }
            }
        }
    }

    fn mass(&self, n: usize) -> f64 {
        match self {
            Component::Gaussian { weight, .. } => *weight,
            Component::Box { half, weight, .. } => weight * (0..n).map(|i| 2.0 * half[i]).product::<f64>(),
            Component::Ball { radius, weight, .. } => weight * ball_volume(n) * radius.powi(n as i32),
        }
    }

    fn center(&self) -> Vec3 {
        match self {
            Component::Gaussian { mean, .. } => *mean,
            Component::Box { center, .. } | Component::Ball { center, .. } => *center,
        }
    }

    /// `int v v^T` over the component.
    fn second_moment(&self, n: usize) -> Mat3 {
        let m = self.mass(n);
        let c = self.center();
        let mut out = c * c.transpose();
        match self {
            Component::Gaussian { cov, .. } => out += cov,
            Component::Box { half, .. } => {
                for i in 0..n {
                    out[(i, i)] += half[i] * half[i] / 3.0;
                }
            }
            Component::Ball { radius, .. } => {
                for i in 0..n {
                    out[(i, i)] += radius * radius / (n as f64 + 2.0);
                }
            }
        }
        out * m
    }

    /// Closed form of `int |v|^q` over the component, when one is available.
    fn closed_moment(&self, n: usize, q: f64) -> Option<f64> {
        if q == 0.0 {
            return Some(self.mass(n));
        }
        let even = q > 0.0 && q.fract() == 0.0 && (q as i64) % 2 == 0;
        match self {
            Component::Box { center, half, weight } if even => {
                let m = (q as usize) / 2;
                Some(weight * box_even_moment(n, center, half, m))
            }
            Component::Gaussian { mean, cov, weight, .. } if q == 2.0 || q == 4.0 => {
                let tr = cov.trace();
                let mu2 = mean.norm_squared();
                if q == 2.0 {
                    Some(weight * (tr + mu2))
                } else {
                    let tr2 = (cov * cov).trace();
                    let mcm = mean.dot(&(cov * mean));
                    Some(weight * ((tr + mu2).powi(2) + 2.0 * tr2 + 4.0 * mcm))
                }
            }
            Component::Ball { center, radius, weight } => {
                let nf = n as f64;
                if center.norm() == 0.0 && q > -nf {
                    Some(weight * sphere_area(n) * radius.powf(nf + q) / (nf + q))
                } else if q == 2.0 {
                    let vol = ball_volume(n) * radius.powi(n as i32);
                    Some(weight * vol * (center.norm_squared() + nf * radius * radius / (nf + 2.0)))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// `int_box |v|^{2m} dv` by multinomial expansion into one-dimensional monomials.
fn box_even_moment(n: usize, c: &Vec3, h: &Vec3, m: usize) -> f64 {
    let mono = |i: usize, p: usize| -> f64 {
        let (a, b) = (c[i] - h[i], c[i] + h[i]);
        (b.powi(p as i32 + 1) - a.powi(p as i32 + 1)) / (p as f64 + 1.0)
    };
    let fact = |k: usize| -> f64 { (1..=k).map(|x| x as f64).product() };
    let mut total = 0.0;
    if n == 2 {
        for k0 in 0..=m {
            let k1 = m - k0;
            total += fact(m) / (fact(k0) * fact(k1)) * mono(0, 2 * k0) * mono(1, 2 * k1);
        }
    } else {
        for k0 in 0..=m {
            for k1 in 0..=(m - k0) {
                let k2 = m - k0 - k1;
                total += fact(m) / (fact(k0) * fact(k1) * fact(k2))
                    * mono(0, 2 * k0)
                    * mono(1, 2 * k1)
                    * mono(2, 2 * k2);
            }
        }
    }
    total
}

impl Mixture {
    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        let n = spec.dimension;
        check_dimension(n)?;
        if spec.components.is_empty() {
            return Err(VerifyError::InvalidDistribution("mixture has no components".into()));
        }
        let mut components = Vec::with_capacity(spec.components.len());
        for c in &spec.components {
            components.push(build_component(n, c)?);
        }
        let mix = Mixture { n, components };
        mix.check_nonnegative()?;
        if mix.mass() <= 0.0 {
            return Err(VerifyError::InvalidDistribution("total mass must be positive".into()));
        }
        Ok(mix)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Standard Maxwellian with unit temperature.
    pub fn maxwellian(n: usize) -> Result<Self> {
        let cov = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::from_spec(&DistributionSpec {
            dimension: n,
            components: vec![ComponentSpec::Gaussian { mean: vec![0.0; n], covariance: cov, weight: 1.0 }],
        })
    }

    pub fn gaussian(mean: &[f64], covariance: Vec<Vec<f64>>, weight: f64) -> Result<Self> {
        Self::from_spec(&DistributionSpec {
            dimension: mean.len(),
            components: vec![ComponentSpec::Gaussian { mean: mean.to_vec(), covariance, weight }],
        })
    }

    /// Gaussian with unit variance along `axis` and variance `eps^2` across it.
    pub fn squeezed_gaussian(eps: f64, axis: &[f64]) -> Result<Self> {
        let n = axis.len();
        check_dimension(n)?;
        if !(eps > 0.0) {
            return Err(VerifyError::InvalidParameter(format!("squeeze factor must be positive, got {eps}")));
        }
        let a = to_vec3(n, axis)?;
        let norm = a.norm();
        if norm == 0.0 {
            return Err(VerifyError::InvalidParameter("squeeze axis must be nonzero".into()));
        }
        let a = a / norm;
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (if i == j { eps * eps } else { 0.0 }) + (1.0 - eps * eps) * a[i] * a[j]).collect())
            .collect();
        Self::gaussian(&vec![0.0; n], cov, 1.0)
    }

    /// Two thin slabs crossing at the origin plus a tall square, in dimension 2:
    /// `1_{A1 u A2} + R^2 1_A` with `A1 = (-R^-3, R^-3) x (-R, R)`, `A2` its transpose and
    /// `A = (-1/R, 1/R)^2`. The overlap of the slabs is removed by a negative box.
    pub fn counterexample(r: f64) -> Result<Self> {
        if !(r > 1.0) {
            return Err(VerifyError::InvalidParameter(format!("counterexample needs R > 1, got {r}")));
        }
        let thin = r.powi(-3);
        let boxed = |hx: f64, hy: f64, w: f64| ComponentSpec::Box { center: vec![0.0, 0.0], half_widths: vec![hx, hy], weight: w };
        Self::from_spec(&DistributionSpec {
            dimension: 2,
            components: vec![boxed(thin, r, 1.0), boxed(r, thin, 1.0), boxed(thin, thin, -1.0), boxed(1.0 / r, 1.0 / r, r * r)],
        })
    }

    pub fn density(&self, v: &[f64]) -> Result<f64> {
        let p = to_vec3(self.n, v)?;
        Ok(self.density_at(&p))
    }

    #[inline]
    pub fn density_at(&self, v: &Vec3) -> f64 {
        self.components.iter().map(|c| c.eval(self.n, v)).sum()
    }

    pub fn mass(&self) -> f64 {
        self.components.iter().map(|c| c.mass(self.n)).sum()
    }

    pub fn first_moment(&self) -> Vec3 {
        self.components.iter().map(|c| c.center() * c.mass(self.n)).sum()
    }

    pub fn second_moment(&self) -> Mat3 {
        self.components.iter().map(|c| c.second_moment(self.n)).sum()
    }

    /// Closed-form `int f |v|^q` per component; `None` entries need quadrature.
    pub fn closed_moments(&self, q: f64) -> Vec<Option<f64>> {
        self.components.iter().map(|c| c.closed_moment(self.n, q)).collect()
    }

    /// Single-component mixture used for per-component quadrature.
    pub fn component_mixture(&self, idx: usize) -> Mixture {
        Mixture { n: self.n, components: vec![self.components[idx].clone()] }
    }

    fn check_nonnegative(&self) -> Result<()> {
        let negatives: Vec<&Component> = self
            .components
            .iter()
            .filter(|c| match c {
                Component::Box { weight, .. } => *weight < 0.0,
                Component::Gaussian { weight, .. } | Component::Ball { weight, .. } => *weight < 0.0,
            })
            .collect();
        if negatives.is_empty() {
            return Ok(());
        }
        if negatives.iter().any(|c| !matches!(c, Component::Box { .. })) {
            return Err(VerifyError::InvalidDistribution("only box components may carry negative weight".into()));
        }
        // Box-only contributions are piecewise constant on the grid spanned by the box edges;
        // positive Gaussians and balls are ignored, which only makes the check stricter.
        let mut edges: Vec<Vec<f64>> = vec![Vec::new(); self.n];
        for c in &self.components {
            if let Component::Box { center, half, .. } = c {
                for i in 0..self.n {
                    edges[i].push(center[i] - half[i]);
                    edges[i].push(center[i] + half[i]);
                }
            }
        }
        let mids: Vec<Vec<f64>> = edges
            .iter_mut()
            .map(|e| {
                e.sort_by(f64::total_cmp);
                e.dedup();
                e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            })
            .collect();
        let boxes_at = |p: &Vec3| -> f64 {
            self.components
                .iter()
                .filter(|c| matches!(c, Component::Box { .. }))
                .map(|c| c.eval(self.n, p))
                .sum()
        };
        let mut idx = vec![0usize; self.n];
        loop {
            let mut p = Vec3::zeros();
            for i in 0..self.n {
                p[i] = mids[i][idx[i]];
            }
            let d = boxes_at(&p);
            if d < -1e-12 * (1.0 + d.abs()) {
                return Err(VerifyError::InvalidDistribution(format!("density is negative ({d:.3e}) near {:?}", &p.as_slice()[..self.n])));
            }
            let mut k = 0;
            loop {
                if k == self.n {
                    return Ok(());
                }
                idx[k] += 1;
                if idx[k] < mids[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Parameters `t` at which `origin + t dir` crosses a component boundary, plus
    /// interior hint points for Gaussians (peak and +-2, +-5 standard deviations).
    pub fn line_crossings(&self, origin: &Vec3, dir: &Vec3, out: &mut Vec<f64>) {
        for c in &self.components {
            match c {
                Component::Gaussian { mean, prec, .. } => {
                    let a = dir.dot(&(prec * dir));
                    if a <= 0.0 {
                        continue;
                    }
                    let d = origin - mean;
                    let b = dir.dot(&(prec * d));
                    let t0 = -b / a;
                    let sd = 1.0 / a.sqrt();
                    for k in [-5.0, -2.0, 0.0, 2.0, 5.0] {
                        out.push(t0 + k * sd);
                    }
                }
                Component::Box { center, half, .. } => {
                    for i in 0..self.n {
                        if dir[i] != 0.0 {
                            out.push((center[i] - half[i] - origin[i]) / dir[i]);
                            out.push((center[i] + half[i] - origin[i]) / dir[i]);
                        }
                    }
                }
                Component::Ball { center, radius, .. } => {
                    if let Some((t1, t2)) = sphere_line(origin, dir, center, *radius) {
                        out.push(t1);
                        out.push(t2);
                    }
                }
            }
        }
    }

    /// Hull of the parameter intervals on which the line meets some component support.
    pub fn line_support(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.components {
            let iv = match c {
                Component::Gaussian { mean, prec, .. } => {
                    let a = dir.dot(&(prec * dir));
                    let d = origin - mean;
                    let b = dir.dot(&(prec * d));
                    let cc = d.dot(&(prec * d));
                    let room = TAIL_Q - (cc - b * b / a);
                    if a <= 0.0 || room <= 0.0 {
                        None
                    } else {
                        let t0 = -b / a;
                        let w = (room / a).sqrt();
                        Some((t0 - w, t0 + w))
                    }
                }
                Component::Box { center, half, .. } => {
                    let mut a = f64::NEG_INFINITY;
                    let mut b = f64::INFINITY;
                    for i in 0..self.n {
                        if dir[i] == 0.0 {
                            if (origin[i] - center[i]).abs() >= half[i] {
                                a = f64::INFINITY;
                            }
                        } else {
                            let t1 = (center[i] - half[i] - origin[i]) / dir[i];
                            let t2 = (center[i] + half[i] - origin[i]) / dir[i];
                            a = a.max(t1.min(t2));
                            b = b.min(t1.max(t2));
                        }
                    }
                    (a < b).then_some((a, b))
                }
                Component::Ball { center, radius, .. } => sphere_line(origin, dir, center, *radius),
            };
            if let Some((a, b)) = iv {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo < hi).then_some((lo, hi))
    }

    /// Bounding interval of the support along coordinate `k`.
    pub fn axis_bounds(&self, k: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.components {
            let (a, b) = match c {
                Component::Gaussian { mean, sigma, .. } => {
                    let w = TAIL_Q.sqrt() * sigma[k];
                    (mean[k] - w, mean[k] + w)
                }
                Component::Box { center, half, .. } => (center[k] - half[k], center[k] + half[k]),
                Component::Ball { center, radius, .. } => (center[k] - radius, center[k] + radius),
            };
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    /// Breakpoints along coordinate `k` when all coordinates above `k` are fixed to those of `p`.
    pub fn axis_breaks(&self, k: usize, p: &Vec3, out: &mut Vec<f64>) {
        for c in &self.components {
            match c {
                Component::Gaussian { mean, sigma, .. } => {
                    for m in [-5.0, -2.0, 0.0, 2.0, 5.0] {
                        out.push(mean[k] + m * sigma[k]);
                    }
                }
                Component::Box { center, half, .. } => {
                    if ((k + 1)..self.n).all(|j| (p[j] - center[j]).abs() < half[j]) {
                        out.push(center[k] - half[k]);
                        out.push(center[k] + half[k]);
                    }
                }
                Component::Ball { center, radius, .. } => {
                    let rem = radius * radius - ((k + 1)..self.n).map(|j| (p[j] - center[j]).powi(2)).sum::<f64>();
                    if rem > 0.0 {
                        out.push(center[k] - rem.sqrt());
                        out.push(center[k] + rem.sqrt());
                    }
                }
            }
        }
    }
}

/// Parameters where the line `o + t d` (unit `d`) meets the sphere `|x - c| = r`.
pub fn sphere_line(o: &Vec3, d: &Vec3, c: &Vec3, r: f64) -> Option<(f64, f64)> {
    let oc = o - c;
    let b = d.dot(&oc);
    let dd = d.norm_squared();
    let disc = b * b - dd * (oc.norm_squared() - r * r);
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((-b - s) / dd, (-b + s) / dd))
}

fn build_component(n: usize, spec: &ComponentSpec) -> Result<Component> {
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    match spec {
        ComponentSpec::Gaussian { mean, covariance, weight } => {
            let mean = to_vec3(n, mean)?;
            let cov = to_mat3(n, covariance)?;
            if !finite(mean.as_slice()) || !finite(cov.as_slice()) || !weight.is_finite() {
                return Err(VerifyError::InvalidDistribution("non-finite Gaussian parameters".into()));
            }
            if !is_symmetric(n, &cov, 1e-12) {
                return Err(VerifyError::InvalidDistribution("covariance is not symmetric".into()));
            }
            let (vals, _) = sym_eigen(n, &cov);
            if vals[0] <= 0.0 {
                return Err(VerifyError::InvalidDistribution(format!("covariance is not positive definite (eigenvalue {:.3e})", vals[0])));
            }
            let (prec, det) = if n == 2 {
                let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
                let mut p = Mat3::zeros();
                p[(0, 0)] = cov[(1, 1)] / det;
                p[(1, 1)] = cov[(0, 0)] / det;
                p[(0, 1)] = -cov[(0, 1)] / det;
                p[(1, 0)] = -cov[(1, 0)] / det;
                (p, det)
            } else {
                let inv = cov.try_inverse().ok_or_else(|| VerifyError::InvalidDistribution("singular covariance".into()))?;
                (inv, cov.determinant())
            };
            let norm = 1.0 / ((2.0 * PI).powf(n as f64 / 2.0) * det.sqrt());
            let mut sigma = Vec3::zeros();
            for i in 0..n {
                sigma[i] = cov[(i, i)].sqrt();
            }
            Ok(Component::Gaussian { mean, cov, prec, norm, weight: *weight, sigma })
        }
        ComponentSpec::Box { center, half_widths, weight } => {
            let center = to_vec3(n, center)?;
            let half = to_vec3(n, half_widths)?;
            if !finite(center.as_slice()) || !weight.is_finite() || (0..n).any(|i| !(half[i] > 0.0 && half[i].is_finite())) {
                return Err(VerifyError::InvalidDistribution("box needs finite center and positive half widths".into()));
            }
            Ok(Component::Box { center, half, weight: *weight })
        }
        ComponentSpec::Ball { center, radius, weight } => {
            let center = to_vec3(n, center)?;
            if !finite(center.as_slice()) || !weight.is_finite() || !(*radius > 0.0 && radius.is_finite()) {
                return Err(VerifyError::InvalidDistribution("ball needs finite center and positive radius".into()));
            }
            Ok(Component::Ball { center, radius: *radius, weight: *weight })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn boxed(center: Vec<f64>, half: Vec<f64>, weight: f64) -> ComponentSpec {
        ComponentSpec::Box { center, half_widths: half, weight }
    }

    #[test]
    fn maxwellian_peak_density() {
        let f = Mixture::maxwellian(2).unwrap();
        assert_relative_eq!(f.density(&[0.0, 0.0]).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-14);
        let f3 = Mixture::maxwellian(3).unwrap();
        assert_relative_eq!(f3.density(&[0.0, 0.0, 0.0]).unwrap(), (2.0 * PI).powf(-1.5), max_relative = 1e-14);
    }

    #[test]
    fn box_and_ball_heights() {
        let spec = DistributionSpec {
            dimension: 2,
            components: vec![boxed(vec![0.0, 0.0], vec![1.0, 1.0], 3.0), ComponentSpec::Ball { center: vec![5.0, 0.0], radius: 1.0, weight: 2.0 }],
        };
        let f = Mixture::from_spec(&spec).unwrap();
        assert_eq!(f.density(&[0.5, -0.5]).unwrap(), 3.0);
        assert_eq!(f.density(&[5.2, 0.3]).unwrap(), 2.0);
        assert_eq!(f.density(&[3.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = Mixture::maxwellian(2).unwrap();
        assert!(matches!(f.density(&[0.0, 0.0, 0.0]), Err(VerifyError::DimensionMismatch { .. })));
        let bad_cov = Mixture::gaussian(&[0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]], 1.0);
        assert!(matches!(bad_cov, Err(VerifyError::InvalidDistribution(_))));
        let asym = Mixture::gaussian(&[0.0, 0.0], vec![vec![1.0, 0.1], vec![0.0, 1.0]], 1.0);
        assert!(asym.is_err());
        let negative = DistributionSpec { dimension: 2, components: vec![boxed(vec![0.0, 0.0], vec![1.0, 1.0], 1.0), boxed(vec![0.5, 0.0], vec![1.0, 0.2], -1.0)] };
        assert!(Mixture::from_spec(&negative).is_err());
        assert!(matches!(Mixture::maxwellian(4), Err(VerifyError::UnsupportedDimension(4))));
    }

    #[test]
    fn counterexample_density_and_mass() {
        let r = 10.0;
        let f = Mixture::counterexample(r).unwrap();
        assert_relative_eq!(f.density(&[0.0, 0.0]).unwrap(), 1.0 + r * r);
        assert_relative_eq!(f.density(&[0.05, 0.05]).unwrap(), r * r);
        assert_relative_eq!(f.density(&[0.05, 0.0]).unwrap(), 1.0 + r * r);
        assert_relative_eq!(f.density(&[5.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(f.density(&[0.0, -5.0]).unwrap(), 1.0);
        let expected = 4.0 + 8.0 / (r * r) - 4.0 * r.powi(-6);
        assert_relative_eq!(f.mass(), expected, max_relative = 1e-13);
    }

    #[test]
    fn squeezed_covariance() {
        let f = Mixture::squeezed_gaussian(0.1, &[1.0, 0.0]).unwrap();
        let p = f.second_moment();
        assert_relative_eq!(p[(0, 0)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(p[(1, 1)], 0.01, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_fourth_moment_closed_form() {
        let f = Mixture::maxwellian(2).unwrap();
        assert_relative_eq!(f.closed_moments(4.0)[0].unwrap(), 8.0, max_relative = 1e-14);
        let f3 = Mixture::maxwellian(3).unwrap();
        assert_relative_eq!(f3.closed_moments(4.0)[0].unwrap(), 15.0, max_relative = 1e-14);
    }

    #[test]
    fn box_moments_match_simple_cases() {
        let c = Vec3::zeros();
        let h = Vec3::new(1.0, 1.0, 0.0);
        // int_{[-1,1]^2} x^2 + y^2 = 8/3
        assert_relative_eq!(box_even_moment(2, &c, &h, 1), 8.0 / 3.0, max_relative = 1e-14);
        // x^4 + y^4 terms give 8/5, the cross term 8/9
        let direct = 2.0 * (2.0 / 5.0) * 2.0 + 2.0 * (2.0 / 3.0) * (2.0 / 3.0);
        assert_relative_eq!(box_even_moment(2, &c, &h, 2), direct, max_relative = 1e-14);
    }

    #[test]
    fn line_support_of_ball_and_box() {
        let spec = DistributionSpec { dimension: 2, components: vec![ComponentSpec::Ball { center: vec![0.0, 0.0], radius: 1.0, weight: 1.0 }] };
        let f = Mixture::from_spec(&spec).unwrap();
        let (a, b) = f.line_support(&Vec3::new(-5.0, 0.0, 0.0), &Vec3::x()).unwrap();
        assert_relative_eq!(a, 4.0, max_relative = 1e-14);
        assert_relative_eq!(b, 6.0, max_relative = 1e-14);
        assert!(f.line_support(&Vec3::new(0.0, 2.0, 0.0), &Vec3::x()).is_none());
    }

    proptest! {
        #[test]
        fn mixture_density_is_nonnegative_and_additive(x in -3.0f64..3.0, y in -3.0f64..3.0, w1 in 0.1f64..3.0, w2 in 0.1f64..3.0) {
            let a = ComponentSpec::Gaussian { mean: vec![0.5, -0.2], covariance: vec![vec![1.0, 0.3], vec![0.3, 0.5]], weight: w1 };
            let b = boxed(vec![0.0, 0.0], vec![1.0, 0.5], w2);
            let both = Mixture::from_spec(&DistributionSpec { dimension: 2, components: vec![a.clone(), b.clone()] }).unwrap();
            let fa = Mixture::from_spec(&DistributionSpec { dimension: 2, components: vec![a] }).unwrap();
            let fb = Mixture::from_spec(&DistributionSpec { dimension: 2, components: vec![b] }).unwrap();
            let v = [x, y];
            let d = both.density(&v).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!((d - fa.density(&v).unwrap() - fb.density(&v).unwrap()).abs() <= 1e-14 * (1.0 + d));
        }
    }
}
