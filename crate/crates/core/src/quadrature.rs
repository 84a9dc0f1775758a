//! Deterministic quadrature: adaptive Gauss-Kronrod in one dimension, sphere and
//! great-circle rules, hyperplane and ellipsoid-section integrals, and a cubature that
//! follows the supports of a [`Mixture`].

use crate::dist_model::{sphere_line, Mixture};
use crate::error::{Result, VerifyError};
use crate::linalg::{check_dimension, complement_basis, Vec3};
use serde::{Deserialize, Serialize};
use std::cell::{Cell, RefCell};
use std::collections::BinaryHeap;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadBudget {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integrand evaluations allowed per one-dimensional adaptive call.
    pub max_evals: usize,
    /// Radius at which unbounded integrals are cut off.
    pub truncation_radius: f64,
}

impl Default for QuadBudget {
    fn default() -> Self {
        QuadBudget { rel_tol: 1e-8, abs_tol: 1e-14, max_evals: 200_000, truncation_radius: 12.0 }
    }
}

impl QuadBudget {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    /// Tighter budget for integrals nested inside another adaptive integral.
    pub fn inner(&self) -> Self {
        QuadBudget { rel_tol: (self.rel_tol * 0.1).max(1e-13), ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) || !(self.abs_tol >= 0.0) || self.max_evals < 15 || !(self.truncation_radius > 0.0) {
            return Err(VerifyError::InvalidParameter(format!("invalid quadrature budget {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadVec<const K: usize> {
    pub value: [f64; K],
    pub error: f64,
    pub evals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

struct Segment<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: f64,
}

#[derive(PartialEq)]
struct HeapKey(f64, usize);
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

fn gk15<const K: usize, F: FnMut(f64) -> [f64; K]>(f: &mut F, a: f64, b: f64) -> Result<([f64; K], f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];
    let mut add = |x: f64, wk: f64, wg: f64, kron: &mut [f64; K], gauss: &mut [f64; K]| -> Result<()> {
        let y = f(x);
        for k in 0..K {
            if !y[k].is_finite() {
                return Err(VerifyError::NonFiniteIntegrand(x));
            }
            kron[k] += wk * y[k];
            gauss[k] += wg * y[k];
        }
        Ok(())
    };
    add(c, WGK[7], WG[3], &mut kron, &mut gauss)?;
    for j in 0..7 {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        let dx = h * XGK[j];
        add(c - dx, WGK[j], wg, &mut kron, &mut gauss)?;
        add(c + dx, WGK[j], wg, &mut kron, &mut gauss)?;
    }
    let mut err: f64 = 0.0;
    for k in 0..K {
        kron[k] *= h;
        gauss[k] *= h;
        err = err.max((kron[k] - gauss[k]).abs());
    }
    Ok((kron, err))
}

fn clean_breaks(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let eps = 1e-13 * (b - a).abs().max(a.abs()).max(b.abs()).max(1e-300);
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite() && *x > a + eps && *x < b - eps).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= eps);
    pts
}

/// Globally adaptive G7-K15 quadrature of a vector-valued integrand over `[a, b]`,
/// with the interval initially split at `breaks`.
pub fn integrate_vec<const K: usize, F: FnMut(f64) -> [f64; K]>(mut f: F, a: f64, b: f64, breaks: &[f64], budget: &QuadBudget) -> Result<QuadVec<K>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(VerifyError::InvalidParameter(format!("integration limits must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadVec { value: [0.0; K], error: 0.0, evals: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let pts = clean_breaks(lo, hi, breaks);
    let mut segs: Vec<Segment<K>> = Vec::with_capacity(pts.len() * 4);
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut total = [0.0; K];
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1])?;
        evals += 15;
        for k in 0..K {
            total[k] += v[k];
        }
        total_err += e;
        heap.push(HeapKey(e, segs.len()));
        segs.push(Segment { a: w[0], b: w[1], value: v, error: e });
    }
    loop {
        let scale = total.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = budget.abs_tol.max(budget.rel_tol * scale);
        if total_err <= tol {
            break;
        }
        let Some(HeapKey(_, idx)) = heap.pop() else { break };
        let (sa, sb) = (segs[idx].a, segs[idx].b);
        let mid = 0.5 * (sa + sb);
        if !(mid > sa && mid < sb) || (sb - sa) <= 1e-15 * sa.abs().max(sb.abs()).max(1e-300) {
            total_err -= segs[idx].error;
            segs[idx].error = 0.0;
            continue;
        }
        if evals + 30 > budget.max_evals {
            heap.push(HeapKey(segs[idx].error, idx));
            let value = sum_segments(&segs);
            return Err(VerifyError::QuadratureBudget { estimate: sign * value[0], error: total_err, evals });
        }
        let (v1, e1) = gk15(&mut f, sa, mid)?;
        let (v2, e2) = gk15(&mut f, mid, sb)?;
        evals += 30;
        for k in 0..K {
            total[k] += v1[k] + v2[k] - segs[idx].value[k];
        }
        total_err += e1 + e2 - segs[idx].error;
        segs[idx] = Segment { a: sa, b: mid, value: v1, error: e1 };
        heap.push(HeapKey(e1, idx));
        heap.push(HeapKey(e2, segs.len()));
        segs.push(Segment { a: mid, b: sb, value: v2, error: e2 });
    }
    let mut value = sum_segments(&segs);
    for v in value.iter_mut() {
        *v *= sign;
    }
    let error = segs.iter().map(|s| s.error).sum();
    Ok(QuadVec { value, error, evals })
}

fn sum_segments<const K: usize>(segs: &[Segment<K>]) -> [f64; K] {
    let mut sorted: Vec<&Segment<K>> = segs.iter().collect();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut out = [0.0; K];
    for s in sorted {
        for k in 0..K {
            out[k] += s.value[k];
        }
    }
    out
}

/// Scalar form of [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], budget: &QuadBudget) -> Result<Quad> {
    let q = integrate_vec(|x| [f(x)], a, b, breaks, budget)?;
    Ok(Quad { value: q.value[0], error: q.error, evals: q.evals })
}

/// `int_a^b rho^q phi(rho) d rho`. For `a = 0` and `q < 0` the substitution `u = rho^(q+1)`
/// removes the endpoint singularity.
pub fn integrate_radial<F: FnMut(f64) -> f64>(mut phi: F, q: f64, a: f64, b: f64, breaks: &[f64], budget: &QuadBudget) -> Result<Quad> {
    if b <= a {
        return Ok(Quad { value: 0.0, error: 0.0, evals: 0 });
    }
    if a <= 0.0 && q < 0.0 {
        if q <= -1.0 {
            return Err(VerifyError::InvalidParameter(format!("radial power {q} is not integrable at the origin")));
        }
        let p = q + 1.0;
        let mapped: Vec<f64> = breaks.iter().filter(|x| **x > 0.0).map(|x| x.powf(p)).collect();
        let res = integrate(|u| phi(u.powf(1.0 / p)) / p, 0.0, b.powf(p), &mapped, budget)?;
        return Ok(res);
    }
    let a = a.max(0.0);
    integrate(|r| if r == 0.0 { if q == 0.0 { phi(0.0) } else { 0.0 } } else { r.powf(q) * phi(r) }, a, b, breaks, budget)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Antipodally symmetric quadrature rule on S^{n-1}.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub n: usize,
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    antipode: Vec<usize>,
}

impl SphereRule {
    /// `m` equispaced points on the circle (`m` even).
    pub fn circle(m: usize) -> Self {
        let m = m.max(2) + m % 2;
        let nodes = (0..m).map(|j| crate::linalg::polar(2.0 * PI * (j as f64 + 0.5) / m as f64)).collect();
        let weights = vec![2.0 * PI / m as f64; m];
        let antipode = (0..m).map(|j| (j + m / 2) % m).collect();
        SphereRule { n: 2, nodes, weights, antipode }
    }

    /// Gauss-Legendre in the polar cosine times a uniform azimuth grid of twice the size.
    pub fn product(n_polar: usize) -> Self {
        let np = n_polar.max(2) + n_polar % 2;
        let na = 2 * np;
        let (x, w) = gauss_legendre(np);
        let mut nodes = Vec::with_capacity(np * na);
        let mut weights = Vec::with_capacity(np * na);
        let mut antipode = Vec::with_capacity(np * na);
        for i in 0..np {
            let st = (1.0 - x[i] * x[i]).sqrt();
            for j in 0..na {
                let phi = 2.0 * PI * (j as f64 + 0.5) / na as f64;
                nodes.push(Vec3::new(st * phi.cos(), st * phi.sin(), x[i]));
                weights.push(w[i] * 2.0 * PI / na as f64);
                antipode.push((np - 1 - i) * na + (j + na / 2) % na);
            }
        }
        SphereRule { n: 3, nodes, weights, antipode }
    }

    /// Rule at refinement `level`: 32 * 2^level points on the circle, 8 * 2^level polar nodes on S^2.
    pub fn level(n: usize, level: usize) -> Self {
        if n == 2 {
            Self::circle(32 << level)
        } else {
            Self::product(8 << level)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn antipode(&self, i: usize) -> usize {
        self.antipode[i]
    }

    /// One representative index from every antipodal pair.
    pub fn half(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| i < self.antipode[i]).collect()
    }

    pub fn integrate<F: FnMut(&Vec3) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * g(x)).sum()
    }
}

/// `int_{S^{n-1}} g`, refining the sphere rule until two consecutive levels agree.
pub fn sphere_integral<F: FnMut(&Vec3) -> Result<f64>>(n: usize, mut g: F, budget: &QuadBudget) -> Result<Quad> {
    check_dimension(n)?;
    let max_level = if n == 2 { 10 } else { 5 };
    let mut prev: Option<f64> = None;
    let mut evals = 0;
    for level in 0..=max_level {
        let rule = SphereRule::level(n, level);
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * g(x)?;
        }
        evals += rule.len();
        if let Some(p) = prev {
            let err = (acc - p).abs();
            if err <= budget.abs_tol.max(budget.rel_tol * acc.abs()) {
                return Ok(Quad { value: acc, error: err, evals });
            }
            if evals > budget.max_evals {
                return Err(VerifyError::QuadratureBudget { estimate: acc, error: err, evals });
            }
        }
        prev = Some(acc);
    }
    let v = prev.unwrap_or(0.0);
    Err(VerifyError::QuadratureBudget { estimate: v, error: f64::NAN, evals })
}

/// `int_{theta in S^{n-1}, theta . z = 0} g(theta)`: two points for n = 2, a great circle for n = 3.
pub fn sphere_section_integral<F: FnMut(&Vec3) -> f64>(n: usize, mut g: F, z: &Vec3, budget: &QuadBudget) -> Result<Quad> {
    check_dimension(n)?;
    if z.norm() == 0.0 {
        return Err(VerifyError::Degenerate("section normal must be nonzero".into()));
    }
    let basis = complement_basis(n, z);
    if n == 2 {
        let b = basis[0];
        return Ok(Quad { value: g(&b) + g(&(-b)), error: 0.0, evals: 2 });
    }
    let (b1, b2) = (basis[0], basis[1]);
    let quarter: Vec<f64> = (1..4).map(|k| 0.5 * PI * k as f64).collect();
    integrate(|phi| g(&(b1 * phi.cos() + b2 * phi.sin())), 0.0, 2.0 * PI, &quarter, budget)
}

/// `int_{w . normal = 0} g(w) dw` over the hyperplane through the origin, in Cartesian
/// coordinates truncated at `budget.truncation_radius`.
pub fn hyperplane_integral<F: FnMut(&Vec3) -> f64>(n: usize, mut g: F, normal: &Vec3, budget: &QuadBudget) -> Result<Quad> {
    check_dimension(n)?;
    if normal.norm() == 0.0 {
        return Err(VerifyError::Degenerate("hyperplane normal must be nonzero".into()));
    }
    let t = budget.truncation_radius;
    let basis = complement_basis(n, normal);
    if n == 2 {
        let b = basis[0];
        return integrate(|x| g(&(b * x)), -t, t, &[0.0], budget);
    }
    let (b1, b2) = (basis[0], basis[1]);
    let inner = budget.inner();
    let failure = RefCell::new(None);
    let evals = Cell::new(0);
    let g = RefCell::new(g);
    let outer = integrate(
        |y| match integrate(|x| (g.borrow_mut())(&(b1 * x + b2 * y)), -t, t, &[0.0], &inner) {
            Ok(q) => {
                evals.set(evals.get() + q.evals);
                q.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        -t,
        t,
        &[0.0],
        budget,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(Quad { evals: outer.evals + evals.get(), ..outer })
}

/// The image `E_r = tau(B_r)` of a ball under the anisotropic velocity scaling that
/// shrinks the `v0` direction by `1/|v0|`. For `v0 = 0` this is the ball `B_r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    pub n: usize,
    pub r: f64,
    pub v0: Vec3,
}

impl Ellipsoid {
    pub fn new(n: usize, r: f64, v0: Vec3) -> Result<Self> {
        check_dimension(n)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(VerifyError::InvalidParameter(format!("ellipsoid radius must be positive, got {r}")));
        }
        Ok(Ellipsoid { n, r, v0 })
    }

    /// `h^T Q h` with `E_r = {h^T Q h < r^2}`.
    pub fn quadratic_form(&self, h: &Vec3) -> f64 {
        let m = self.v0.norm();
        if m == 0.0 {
            return h.norm_squared();
        }
        let c = h.dot(&self.v0) / m;
        h.norm_squared() + (m * m - 1.0) * c * c
    }

    pub fn contains(&self, h: &Vec3) -> bool {
        self.quadratic_form(h) < self.r * self.r
    }

    /// Boundary distance from the origin along the unit direction `u`.
    pub fn radius_along(&self, u: &Vec3) -> f64 {
        self.r / self.quadratic_form(u).sqrt()
    }

    pub fn volume(&self) -> f64 {
        let m = self.v0.norm();
        let scale = if m == 0.0 { 1.0 } else { 1.0 / m };
        crate::linalg::ball_volume(self.n) * self.r.powi(self.n as i32) * scale
    }
}

/// `int_{E_r, h . w = 0} |h|^p g(h) dh`, computed in polar coordinates inside the section.
pub fn ellipsoid_section_integral<F: FnMut(&Vec3) -> f64>(ell: &Ellipsoid, w: &Vec3, mut g: F, p: f64, budget: &QuadBudget) -> Result<Quad> {
    if w.norm() == 0.0 {
        return Err(VerifyError::Degenerate("section normal must be nonzero".into()));
    }
    let n = ell.n;
    let q = p + n as f64 - 2.0;
    let basis = complement_basis(n, w);
    if n == 2 {
        let b = basis[0];
        let mut total = Quad { value: 0.0, error: 0.0, evals: 0 };
        for u in [b, -b] {
            let rho = ell.radius_along(&u);
            let part = integrate_radial(|r| g(&(u * r)), q, 0.0, rho, &[], budget)?;
            total.value += part.value;
            total.error += part.error;
            total.evals += part.evals;
        }
        return Ok(total);
    }
    let (b1, b2) = (basis[0], basis[1]);
    let inner = budget.inner();
    let failure = RefCell::new(None);
    let g = RefCell::new(g);
    let quarter: Vec<f64> = (1..4).map(|k| 0.5 * PI * k as f64).collect();
    let res = integrate(
        |phi| {
            let u = b1 * phi.cos() + b2 * phi.sin();
            let rho = ell.radius_along(&u);
            match integrate_radial(|r| (g.borrow_mut())(&(u * r)), q, 0.0, rho, &[], &inner) {
                Ok(v) => v.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        2.0 * PI,
        &quarter,
        budget,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(res)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrafoCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

impl TrafoCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        let rel_err = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        TrafoCheck { lhs, rhs, rel_err }
    }
}

fn nested_error(slot: &RefCell<Option<VerifyError>>, e: VerifyError) -> f64 {
    slot.borrow_mut().get_or_insert(e);
    0.0
}

/// Evaluates both sides of
/// `int_S int_{w perp theta} g(w, theta) dw dtheta = int_{R^n} (int_{theta perp z} g(z, theta) dtheta) |z|^{-1} dz`
/// along independent quadrature paths.
pub fn verify_weighted_trafo<G: Fn(&Vec3, &Vec3) -> f64>(n: usize, g: G, budget: &QuadBudget) -> Result<TrafoCheck> {
    check_dimension(n)?;
    let inner = budget.inner();
    let failure = RefCell::new(None);
    let lhs = sphere_integral(n, |theta| hyperplane_integral(n, |w| g(w, theta), theta, &inner).map(|q| q.value), budget)?;
    let t = budget.truncation_radius;
    let rhs = sphere_integral(
        n,
        |omega| {
            integrate_radial(
                |rho| {
                    let z = omega * rho;
                    match sphere_section_integral(n, |theta| g(&z, theta), omega, &inner.inner()) {
                        Ok(q) => q.value,
                        Err(e) => nested_error(&failure, e),
                    }
                },
                n as f64 - 2.0,
                0.0,
                t,
                &[],
                &inner,
            )
            .map(|q| q.value)
        },
        budget,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(TrafoCheck::new(lhs.value, rhs.value))
}

/// Ellipsoidal form:
/// `int_{E_r} int_{w perp h} g(w, h) dw dh = int_{R^n} int_{E_r, h perp w} g(w, h) |h| / |w| dh dw`.
pub fn verify_weighted_trafo_ellipsoid<G: Fn(&Vec3, &Vec3) -> f64>(ell: &Ellipsoid, g: G, budget: &QuadBudget) -> Result<TrafoCheck> {
    let n = ell.n;
    let inner = budget.inner();
    let failure = RefCell::new(None);
    let lhs = sphere_integral(
        n,
        |theta| {
            let rho_max = ell.radius_along(theta);
            integrate_radial(
                |rho| {
                    let h = theta * rho;
                    match hyperplane_integral(n, |w| g(w, &h), theta, &inner.inner()) {
                        Ok(q) => q.value,
                        Err(e) => nested_error(&failure, e),
                    }
                },
                n as f64 - 1.0,
                0.0,
                rho_max,
                &[],
                &inner,
            )
            .map(|q| q.value)
        },
        budget,
    )?;
    let t = budget.truncation_radius;
    let rhs = sphere_integral(
        n,
        |omega| {
            integrate_radial(
                |rho| {
                    let w = omega * rho;
                    match ellipsoid_section_integral(ell, omega, |h| g(&w, h), 1.0, &inner.inner()) {
                        Ok(q) => q.value,
                        Err(e) => nested_error(&failure, e),
                    }
                },
                n as f64 - 2.0,
                0.0,
                t,
                &[],
                &inner,
            )
            .map(|q| q.value)
        },
        budget,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(TrafoCheck::new(lhs.value, rhs.value))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCase {
    pub name: String,
    pub n: usize,
    /// `true` for the ellipsoid form.
    pub ellipsoid: bool,
    pub check: TrafoCheck,
}

/// Fixed set of smooth integrands for both change-of-variables identities: six for the
/// hyperplane form in dimensions 2 and 3, three for the ellipsoid form.
pub fn identity_suite(budget: &QuadBudget) -> Result<Vec<IdentityCase>> {
    let a = Vec3::new(0.4, -0.3, 0.2);
    let a2 = Vec3::new(0.4, -0.3, 0.0);
    let plain = |name: &str, n: usize, check: TrafoCheck| IdentityCase { name: name.into(), n, ellipsoid: false, check };
    let mut out = vec![
        plain("gaussian_3d", 3, verify_weighted_trafo(3, |w, _| (-w.norm_squared()).exp(), budget)?),
        plain("gaussian_2d", 2, verify_weighted_trafo(2, |w, _| (-w.norm_squared()).exp(), budget)?),
        plain("shifted_angular_2d", 2, verify_weighted_trafo(2, |w, t| (-(w - a2).norm_squared()).exp() * (1.0 + t[0] * t[0]), budget)?),
        plain("shifted_angular_3d", 3, verify_weighted_trafo(3, |w, t| (-0.5 * (w - a).norm_squared()).exp() * (1.0 + 0.5 * t[2] * t[2]), budget)?),
        plain("quadratic_weight_3d", 3, verify_weighted_trafo(3, |w, t| w.norm_squared() * (-w.norm_squared()).exp() * t[0] * t[0], budget)?),
        plain("oscillating_2d", 2, verify_weighted_trafo(2, |w, _| (-w.norm_squared()).exp() * (1.0 + 0.5 * w[0].cos()), budget)?),
    ];
    let ell = [(2, 0.5, 2.0), (2, 1.0, 10.0), (3, 1.0, 2.0)];
    for (n, r, m) in ell {
        let e = Ellipsoid::new(n, r, Vec3::new(m, 0.0, 0.0))?;
        let check = verify_weighted_trafo_ellipsoid(&e, |w, h| (-w.norm_squared()).exp() * (1.0 + h[1] * h[1]), budget)?;
        out.push(IdentityCase { name: format!("ellipsoid_{n}d_r{r}_v0_{m}"), n, ellipsoid: true, check });
    }
    Ok(out)
}

/// Geometric restriction of a cubature domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// `|x - center| < radius` (or its complement).
    Ball { center: Vec3, radius: f64, inside: bool },
    /// `|(x - center) . normal| < half_width` (or its complement); `normal` is unit.
    Slab { center: Vec3, normal: Vec3, half_width: f64, inside: bool },
    /// Distance to the line `point + R dir` below `radius` (or its complement); `dir` is unit.
    Tube { point: Vec3, dir: Vec3, radius: f64, inside: bool },
    /// `x . normal >= offset`.
    HalfSpace { normal: Vec3, offset: f64 },
}

impl Constraint {
    /// Tube around a line; in dimension 2 this is represented as a slab.
    pub fn tube(n: usize, point: Vec3, dir: Vec3, radius: f64, inside: bool) -> Self {
        let dir = dir.normalize();
        if n == 2 {
            Constraint::Slab { center: point, normal: Vec3::new(-dir[1], dir[0], 0.0), half_width: radius, inside }
        } else {
            Constraint::Tube { point, dir, radius, inside }
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        match self {
            Constraint::Ball { center, radius, inside } => ((x - center).norm_squared() < radius * radius) == *inside,
            Constraint::Slab { center, normal, half_width, inside } => ((x - center).dot(normal).abs() < *half_width) == *inside,
            Constraint::Tube { point, dir, radius, inside } => {
                let d = x - point;
                let perp = d - dir * d.dot(dir);
                (perp.norm_squared() < radius * radius) == *inside
            }
            Constraint::HalfSpace { normal, offset } => x.dot(normal) >= *offset,
        }
    }

    fn line_crossings(&self, o: &Vec3, d: &Vec3, out: &mut Vec<f64>) {
        match self {
            Constraint::Ball { center, radius, .. } => {
                if let Some((a, b)) = sphere_line(o, d, center, *radius) {
                    out.push(a);
                    out.push(b);
                }
            }
            Constraint::Slab { center, normal, half_width, .. } => {
                let dn = d.dot(normal);
                if dn != 0.0 {
                    let base = (o - center).dot(normal);
                    out.push((half_width - base) / dn);
                    out.push((-half_width - base) / dn);
                }
            }
            Constraint::Tube { point, dir, radius, .. } => {
                let q = o - point;
                let qp = q - dir * q.dot(dir);
                let dp = d - dir * d.dot(dir);
                let a = dp.norm_squared();
                if a > 0.0 {
                    let b = qp.dot(&dp);
                    let disc = b * b - a * (qp.norm_squared() - radius * radius);
                    if disc > 0.0 {
                        out.push((-b - disc.sqrt()) / a);
                        out.push((-b + disc.sqrt()) / a);
                    }
                }
            }
            Constraint::HalfSpace { normal, offset } => {
                let dn = d.dot(normal);
                if dn != 0.0 {
                    out.push((offset - o.dot(normal)) / dn);
                }
            }
        }
    }

    /// Breakpoints along axis `k` (coordinates above `k` fixed by `p`) when the boundary
    /// does not depend on the coordinates below `k`.
    fn axis_breaks(&self, n: usize, k: usize, p: &Vec3, out: &mut Vec<f64>) {
        let flat = |normal: &Vec3| (0..k).all(|j| normal[j] == 0.0) && normal[k] != 0.0;
        match self {
            Constraint::Ball { center, radius, .. } => {
                let rem = radius * radius - ((k + 1)..n).map(|j| (p[j] - center[j]).powi(2)).sum::<f64>();
                if rem > 0.0 {
                    out.push(center[k] - rem.sqrt());
                    out.push(center[k] + rem.sqrt());
                }
            }
            Constraint::Slab { center, normal, half_width, .. } if flat(normal) => {
                let rest: f64 = ((k + 1)..n).map(|j| normal[j] * (p[j] - center[j])).sum();
                out.push(center[k] + (half_width - rest) / normal[k]);
                out.push(center[k] + (-half_width - rest) / normal[k]);
            }
            Constraint::HalfSpace { normal, offset } if flat(normal) => {
                let rest: f64 = ((k + 1)..n).map(|j| normal[j] * p[j]).sum();
                out.push((offset - rest) / normal[k]);
            }
            _ => {}
        }
    }
}

/// Cubature of `g(x, f(x))` over R^n restricted to a [`Constraint`] set, nesting adaptive
/// one-dimensional rules along the coordinate axes. Breakpoints are placed where lines
/// cross component boundaries, constraint boundaries and user-supplied kink points.
pub struct Cubature<'a> {
    mix: &'a Mixture,
    region: Vec<Constraint>,
    kinks: Vec<Vec3>,
    budget: QuadBudget,
}

impl<'a> Cubature<'a> {
    pub fn new(mix: &'a Mixture, budget: &QuadBudget) -> Self {
        Cubature { mix, region: Vec::new(), kinks: Vec::new(), budget: *budget }
    }

    pub fn restrict(mut self, c: Constraint) -> Self {
        self.region.push(c);
        self
    }

    /// Registers a point where the integrand is not smooth.
    pub fn kink(mut self, p: Vec3) -> Self {
        self.kinks.push(p);
        self
    }

    fn inside(&self, x: &Vec3) -> bool {
        self.region.iter().all(|c| c.contains(x))
    }

    fn bounds(&self, k: usize) -> (f64, f64) {
        let (mut lo, mut hi) = self.mix.axis_bounds(k);
        for c in &self.region {
            if let Constraint::Ball { center, radius, inside: true } = c {
                lo = lo.max(center[k] - radius);
                hi = hi.min(center[k] + radius);
            }
        }
        (lo, hi)
    }

    pub fn integrate<G: Fn(&Vec3, f64) -> f64>(&self, g: G) -> Result<Quad> {
        let q = self.integrate_vec(|x, f| [g(x, f)])?;
        Ok(Quad { value: q.value[0], error: q.error, evals: q.evals })
    }

    pub fn integrate_vec<const K: usize, G: Fn(&Vec3, f64) -> [f64; K]>(&self, g: G) -> Result<QuadVec<K>> {
        let n = self.mix.dimension();
        let failure = RefCell::new(None);
        let evals = Cell::new(0usize);
        let top = n - 1;
        let res = self.level(top, Vec3::zeros(), &g, &failure, &evals, &self.budget)?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(QuadVec { evals: res.evals + evals.get(), ..res })
    }

    fn level<const K: usize, G: Fn(&Vec3, f64) -> [f64; K]>(
        &self,
        k: usize,
        fixed: Vec3,
        g: &G,
        failure: &RefCell<Option<VerifyError>>,
        evals: &Cell<usize>,
        budget: &QuadBudget,
    ) -> Result<QuadVec<K>> {
        let n = self.mix.dimension();
        let mut breaks = Vec::new();
        let (a, b);
        if k == 0 {
            let mut origin = fixed;
            origin[0] = 0.0;
            let dir = Vec3::x();
            let Some((s, t)) = self.mix.line_support(&origin, &dir) else {
                return Ok(QuadVec { value: [0.0; K], error: 0.0, evals: 0 });
            };
            let (lo, hi) = self.bounds(0);
            a = s.max(lo);
            b = t.min(hi);
            self.mix.line_crossings(&origin, &dir, &mut breaks);
            for c in &self.region {
                c.line_crossings(&origin, &dir, &mut breaks);
            }
        } else {
            let (lo, hi) = self.bounds(k);
            a = lo;
            b = hi;
            self.mix.axis_breaks(k, &fixed, &mut breaks);
            for c in &self.region {
                c.axis_breaks(n, k, &fixed, &mut breaks);
            }
        }
        if !(a < b) {
            return Ok(QuadVec { value: [0.0; K], error: 0.0, evals: 0 });
        }
        breaks.extend(self.kinks.iter().map(|p| p[k]));
        if k == 0 {
            integrate_vec(
                |x| {
                    let mut p = fixed;
                    p[0] = x;
                    if self.inside(&p) {
                        g(&p, self.mix.density_at(&p))
                    } else {
                        [0.0; K]
                    }
                },
                a,
                b,
                &breaks,
                budget,
            )
        } else {
            let inner = budget.inner();
            integrate_vec(
                |x| {
                    let mut p = fixed;
                    p[k] = x;
                    match self.level(k - 1, p, g, failure, evals, &inner) {
                        Ok(q) => {
                            evals.set(evals.get() + q.evals);
                            q.value
                        }
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            [0.0; K]
                        }
                    }
                },
                a,
                b,
                &breaks,
                budget,
            )
        }
    }
}

/// `int_{w perp normal} f(v + w) |w|^q weight(|w|) dw` for a mixture density: along a line
/// for n = 2 and in polar coordinates inside the plane for n = 3.
pub fn mixture_plane_integral<W: Fn(f64) -> f64>(mix: &Mixture, v: &Vec3, normal: &Vec3, q: f64, weight: W, budget: &QuadBudget) -> Result<Quad> {
    let n = mix.dimension();
    let basis = complement_basis(n, normal);
    let ray = |u: &Vec3, bud: &QuadBudget| -> Result<Quad> {
        let Some((lo, hi)) = mix.line_support(v, u) else {
            return Ok(Quad { value: 0.0, error: 0.0, evals: 0 });
        };
        if hi <= 0.0 {
            return Ok(Quad { value: 0.0, error: 0.0, evals: 0 });
        }
        let mut breaks = Vec::new();
        mix.line_crossings(v, u, &mut breaks);
        let a = lo.max(0.0);
        integrate_radial(|r| mix.density_at(&(v + u * r)) * weight(r), q + n as f64 - 2.0, a, hi, &breaks, bud)
    };
    if n == 2 {
        let b = basis[0];
        let p = ray(&b, budget)?;
        let m = ray(&(-b), budget)?;
        return Ok(Quad { value: p.value + m.value, error: p.error + m.error, evals: p.evals + m.evals });
    }
    let (b1, b2) = (basis[0], basis[1]);
    let mut breaks = vec![0.5 * PI, PI, 1.5 * PI];
    for c in mix.components() {
        let (center, extent) = component_extent(c);
        let d = center - v;
        let (x, y) = (d.dot(&b1), d.dot(&b2));
        let dist = (x * x + y * y).sqrt();
        if dist > extent {
            let phi = y.atan2(x).rem_euclid(2.0 * PI);
            let half = (extent / dist).asin();
            for t in [phi - half, phi, phi + half] {
                breaks.push(t.rem_euclid(2.0 * PI));
            }
        }
    }
    let inner = budget.inner();
    let failure = RefCell::new(None);
    let res = integrate(
        |phi| match ray(&(b1 * phi.cos() + b2 * phi.sin()), &inner) {
            Ok(q) => q.value,
            Err(e) => nested_error(&failure, e),
        },
        0.0,
        2.0 * PI,
        &breaks,
        budget,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(res)
}

fn component_extent(c: &crate::dist_model::Component) -> (Vec3, f64) {
    use crate::dist_model::Component;
    match c {
        Component::Gaussian { mean, sigma, .. } => (*mean, 9.1 * sigma.max()),
        Component::Box { center, half, .. } => (*center, half.norm()),
        Component::Ball { center, radius, .. } => (*center, *radius),
    }
}
