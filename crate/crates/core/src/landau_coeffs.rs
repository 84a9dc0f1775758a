//! Landau diffusion matrix, drift and potential of a distribution, with all physical constants set
//! to one:
//! `A(v) = int (I - w w^T/|w|^2) |w|^{gamma+2} f(v - w) dw`, `b(v) = int w |w|^gamma f(v - w) dw`,
//! `c(v) = int |w|^gamma f(v - w) dw`.

use crate::dist_model::Mixture;
use crate::error::{Result, VerifyError};
use crate::frame_transform::{FrameTransform, KineticPoint, Regime};
use crate::linalg::{direction_grid, mat_rows, sym_eigen, to_slice, unit, Mat3, Vec3};
use crate::quadrature::{integrate_radial, integrate_vec, Constraint, Cubature, QuadBudget};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;

/// Radius of the ball around the singularity handled in polar coordinates.
const NEAR_RADIUS: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LandauCoefficients {
    pub a: Mat3,
    pub b: Vec3,
    pub c: f64,
}

fn check_gamma(n: usize, gamma: f64) -> Result<()> {
    if !(gamma > -(n as f64)) || !gamma.is_finite() {
        return Err(VerifyError::InvalidParameter(format!("gamma must exceed -n = -{n}, got {gamma}")));
    }
    Ok(())
}

/// `int_{S^{n-1}} g` for a vector-valued `g`, adaptively.
fn sphere_vec<const K: usize, G: Fn(&Vec3) -> [f64; K]>(n: usize, g: G, budget: &QuadBudget) -> Result<[f64; K]> {
    if n == 2 {
        return Ok(integrate_vec(|phi| g(&Vec3::new(phi.cos(), phi.sin(), 0.0)), 0.0, 2.0 * PI, &[PI], budget)?.value);
    }
    let inner = budget.inner();
    let failure = RefCell::new(None);
    let res = integrate_vec(
        |z| {
            let r = (1.0 - z * z).max(0.0).sqrt();
            match integrate_vec(|phi| g(&Vec3::new(r * phi.cos(), r * phi.sin(), z)), 0.0, 2.0 * PI, &[PI], &inner) {
                Ok(q) => q.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    [0.0; K]
                }
            }
        },
        -1.0,
        1.0,
        &[0.0],
        budget,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(res.value)
}

/// `int f(x) G(v - x) dx` where `G(w) = sum_k |w|^{q_k} g_k(w/|w|)` may be singular at `w = 0`.
/// The ball of radius one around `v` is done in polar coordinates when the smallest power is
/// negative; the rest by the mixture cubature.
fn singular_cubature<const K: usize, G>(f: &Mixture, v: &Vec3, powers: [f64; K], shape: G, budget: &QuadBudget) -> Result<[f64; K]>
where
    G: Fn(&Vec3) -> [f64; K] + Sync,
{
    let n = f.dimension();
    let qmin = powers.iter().cloned().fold(f64::INFINITY, f64::min);
    let full = |x: &Vec3, d: f64| -> [f64; K] {
        let w = v - x;
        let r = w.norm();
        if d == 0.0 || r == 0.0 {
            return [0.0; K];
        }
        let sh = shape(&(w / r));
        let mut out = [0.0; K];
        for k in 0..K {
            out[k] = d * r.powf(powers[k]) * sh[k];
        }
        out
    };
    if qmin >= 0.0 {
        return Ok(Cubature::new(f, budget).kink(*v).integrate_vec::<K, _>(full)?.value);
    }
    let outer = Cubature::new(f, budget).kink(*v).restrict(Constraint::Ball { center: *v, radius: NEAR_RADIUS, inside: false }).integrate_vec::<K, _>(full)?.value;
    let inner = budget.inner();
    let failure = RefCell::new(None);
    let near = sphere_vec::<K, _>(
        n,
        |theta| {
            // x = v - rho theta so that w = rho theta
            let mut out = [0.0; K];
            let sh = shape(theta);
            for k in 0..K {
                let q = powers[k] + n as f64 - 1.0;
                match integrate_radial(|rho| f.density_at(&(v - theta * rho)), q, 0.0, NEAR_RADIUS, &[], &inner) {
                    Ok(r) => out[k] = r.value * sh[k],
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                    }
                }
            }
            out
        },
        budget,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut out = outer;
    for k in 0..K {
        out[k] += near[k];
    }
    Ok(out)
}

pub fn landau_coefficients(f: &Mixture, gamma: f64, v: &Vec3, budget: &QuadBudget) -> Result<LandauCoefficients> {
    check_gamma(f.dimension(), gamma)?;
    let (g2, g1) = (gamma + 2.0, gamma + 1.0);
    let powers = [g2, g2, g2, g2, g2, g2, g1, g1, g1, gamma];
    let r = singular_cubature(
        f,
        v,
        powers,
        |u| [1.0 - u[0] * u[0], -u[0] * u[1], -u[0] * u[2], 1.0 - u[1] * u[1], -u[1] * u[2], 1.0 - u[2] * u[2], u[0], u[1], u[2], 1.0],
        budget,
    )?;
    let mut a = Mat3::new(r[0], r[1], r[2], r[1], r[3], r[4], r[2], r[4], r[5]);
    if f.dimension() == 2 {
        a[(2, 2)] = 0.0;
    }
    Ok(LandauCoefficients { a, b: Vec3::new(r[6], r[7], r[8]), c: r[9] })
}

pub fn landau_a(f: &Mixture, gamma: f64, v: &Vec3, budget: &QuadBudget) -> Result<Mat3> {
    Ok(landau_coefficients(f, gamma, v, budget)?.a)
}

pub fn landau_b_c(f: &Mixture, gamma: f64, v: &Vec3, budget: &QuadBudget) -> Result<(Vec3, f64)> {
    let c = landau_coefficients(f, gamma, v, budget)?;
    Ok((c.b, c.c))
}

/// `int f(v - w) |w|^gamma dw`.
pub fn potential_convolution(f: &Mixture, v: &Vec3, gamma: f64, budget: &QuadBudget) -> Result<f64> {
    check_gamma(f.dimension(), gamma)?;
    Ok(singular_cubature(f, v, [gamma], |_| [1.0], budget)?[0])
}

/// Coefficients seen in the frame of `v0` (interaction exponent `gamma`, order one):
/// `A~ = |v0|^{-gamma-2} tau0^{-1} A(v~) tau0^{-1}`, `b~ = |v0|^{-gamma-2} tau0^{-1} b(v~)`,
/// `c~ = |v0|^{-gamma-2} c(v~)` for `|v0| >= 2`, unscaled at `v~ = v0 + v` otherwise.
pub fn transformed_coefficients(f: &Mixture, gamma: f64, frame: &FrameTransform, v: &Vec3, budget: &QuadBudget) -> Result<LandauCoefficients> {
    let vt = frame.velocity(v);
    let c = landau_coefficients(f, gamma, &vt, budget)?;
    match frame.regime() {
        Regime::Near => Ok(c),
        Regime::Far => {
            let k = frame.v0().norm().powf(-gamma - 2.0);
            let ti = frame.tau0_inv_matrix();
            Ok(LandauCoefficients { a: ti * c.a * ti * k, b: ti * c.b * k, c: c.c * k })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauScanRow {
    pub v0: Vec<f64>,
    pub v0_norm: f64,
    /// Smallest eigenvalue of the transformed matrix over the velocity grid.
    pub min_eig: f64,
    pub max_eig: f64,
    pub b_norm: f64,
    pub c_value: f64,
    /// `max |c~| (1 + |v0|)^2`.
    pub c_scaled: f64,
    /// Smallest `e . A(v0 + v) e / (1 + |v0 + v|)^gamma` of the untransformed matrix.
    pub plain_shape: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauScan {
    pub gamma: f64,
    pub rows: Vec<LandauScanRow>,
    /// max / min of `min_eig` across base velocities.
    pub ratio: f64,
}

pub fn landau_ellipticity_scan(f: &Mixture, gamma: f64, v0_list: &[Vec3], v_grid: &[Vec3], budget: &QuadBudget) -> Result<LandauScan> {
    let n = f.dimension();
    if gamma < 0.0 {
        return Err(VerifyError::InvalidParameter("the ellipticity scan needs gamma >= 0".into()));
    }
    if v0_list.is_empty() || v_grid.is_empty() {
        return Err(VerifyError::InvalidParameter("empty scan grid".into()));
    }
    if let Some(v) = v_grid.iter().find(|v| v.norm() > 2.0 + 1e-12) {
        return Err(VerifyError::InvalidParameter(format!("velocity {v:?} lies outside the ball of radius 2")));
    }
    let mut rows = Vec::new();
    for v0 in v0_list {
        let frame = FrameTransform::new(n, KineticPoint::velocity(*v0), gamma, 1.0)?;
        let cells: Vec<(f64, f64, f64, f64, f64)> = v_grid
            .par_iter()
            .map(|v| {
                let t = transformed_coefficients(f, gamma, &frame, v, budget)?;
                let (eigs, _) = sym_eigen(n, &t.a);
                let plain = landau_a(f, gamma, &(v0 + v), budget)?;
                let (peigs, _) = sym_eigen(n, &plain);
                let shape = peigs[0] / (1.0 + (v0 + v).norm()).powf(gamma);
                Ok((eigs[0], eigs[n - 1], t.b.norm(), t.c.abs(), shape))
            })
            .collect::<Result<_>>()?;
        let min_eig = cells.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let max_eig = cells.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let b_norm = cells.iter().map(|c| c.2).fold(0.0, f64::max);
        let c_value = cells.iter().map(|c| c.3).fold(0.0, f64::max);
        let plain_shape = cells.iter().map(|c| c.4).fold(f64::INFINITY, f64::min);
        rows.push(LandauScanRow {
            v0: to_slice(n, v0),
            v0_norm: v0.norm(),
            min_eig,
            max_eig,
            b_norm,
            c_value,
            c_scaled: c_value * (1.0 + v0.norm()).powi(2),
            plain_shape,
        });
    }
    let lo = rows.iter().map(|r| r.min_eig).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.min_eig).fold(f64::NEG_INFINITY, f64::max);
    Ok(LandauScan { gamma, rows, ratio: if lo > 0.0 { hi / lo } else { f64::INFINITY } })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSplit {
    pub v: Vec<f64>,
    /// `e . A(v) e` for `e` parallel to `v`.
    pub parallel: f64,
    /// Largest `e . A(v) e` over `e` orthogonal to `v`.
    pub orthogonal: f64,
    /// `orthogonal / parallel`.
    pub factor: f64,
    /// `(1 + |v|)^2 / 4`.
    pub required: f64,
    pub holds: bool,
}

/// Compares the diffusion along `v` with the diffusion across it at each velocity.
pub fn upper_direction_split(f: &Mixture, gamma: f64, v_list: &[Vec3], budget: &QuadBudget) -> Result<Vec<DirectionSplit>> {
    let n = f.dimension();
    v_list
        .iter()
        .map(|v| {
            let vn = v.norm();
            if vn == 0.0 {
                return Err(VerifyError::Degenerate("direction split needs v != 0".into()));
            }
            let a = landau_a(f, gamma, v, budget)?;
            let e = v / vn;
            let parallel = e.dot(&(a * e));
            let orthogonal = crate::linalg::complement_basis(n, &e).iter().map(|u| u.dot(&(a * u))).fold(0.0, f64::max);
            let factor = orthogonal / parallel;
            let required = (1.0 + vn).powi(2) / 4.0;
            Ok(DirectionSplit { v: to_slice(n, v), parallel, orthogonal, factor, required, holds: factor >= required })
        })
        .collect()
}

/// Rows `(v, e, e . A e)` of a direction sweep, for export.
pub fn quadratic_form_table(f: &Mixture, gamma: f64, v: &Vec3, count: usize, budget: &QuadBudget) -> Result<Vec<(Vec<f64>, f64)>> {
    let n = f.dimension();
    let a = landau_a(f, gamma, v, budget)?;
    Ok(direction_grid(n, count).iter().map(|e| (to_slice(n, e), e.dot(&(a * e)))).collect())
}

/// Matrix rows for serialization.
pub fn matrix_rows(n: usize, a: &Mat3) -> Vec<Vec<f64>> {
    mat_rows(n, a)
}

/// `A(v) e_i . e_i` for the coordinate axes.
pub fn diagonal(n: usize, a: &Mat3) -> Vec<f64> {
    (0..n).map(|i| unit(n, i).dot(&(a * unit(n, i)))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_symmetric;
    use crate::{ComponentSpec, DistributionSpec};
    use approx::assert_relative_eq;

    fn budget() -> QuadBudget {
        QuadBudget { rel_tol: 1e-7, ..Default::default() }
    }

    #[test]
    fn maxwellian_origin_values() {
        let f = Mixture::maxwellian(3).unwrap();
        let c = landau_coefficients(&f, 0.0, &Vec3::zeros(), &budget()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((c.a[(i, j)] - want).abs() < 1e-5, "{:?}", c.a);
            }
        }
        assert!(c.b.norm() < 1e-8);
        assert_relative_eq!(c.c, 1.0, max_relative = 1e-7);
    }

    #[test]
    fn potential_radial_oracle() {
        // n = 3, gamma = 1, v = 2 e1: E|v - W| = (2 pi)^{-1/2} int rho^2 e^{-(rho^2 + 4)/2} sinh(2 rho) d rho
        let f = Mixture::maxwellian(3).unwrap();
        let (_, c) = landau_b_c(&f, 1.0, &Vec3::new(2.0, 0.0, 0.0), &budget()).unwrap();
        let m = 200_000;
        let dr = 14.0 / m as f64;
        let oracle: f64 = (0..m).map(|i| (i as f64 + 0.5) * dr).map(|r| r * r * (-(r * r + 4.0) / 2.0).exp() * (2.0 * r).sinh() * dr).sum::<f64>() / (2.0 * PI).sqrt();
        assert_relative_eq!(c, oracle, max_relative = 1e-6);
    }

    #[test]
    fn singular_potential_for_soft_gamma() {
        // n = 2, gamma = -1, v = 0: int |w|^{-1} (2 pi)^{-1} e^{-|w|^2/2} = sqrt(pi/2)
        let f = Mixture::maxwellian(2).unwrap();
        let c = potential_convolution(&f, &Vec3::zeros(), -1.0, &budget()).unwrap();
        assert_relative_eq!(c, (PI / 2.0).sqrt(), max_relative = 1e-6);
        // away from the mean the split still matches a direct polar sum
        let v = Vec3::new(0.7, -0.2, 0.0);
        let c = potential_convolution(&f, &v, -1.5, &budget()).unwrap();
        let (m, na) = (20_000, 512);
        // r = u^2 removes the r^{-1/2} singularity
        let du = 12f64.sqrt() / m as f64;
        let mut oracle = 0.0;
        for j in 0..na {
            let t = crate::linalg::polar(2.0 * PI * (j as f64 + 0.5) / na as f64);
            for i in 0..m {
                let u = (i as f64 + 0.5) * du;
                oracle += 2.0 * f.density_at(&(v - t * (u * u))) * du * 2.0 * PI / na as f64;
            }
        }
        assert_relative_eq!(c, oracle, max_relative = 2e-3);
    }

    #[test]
    fn zero_density_and_symmetry() {
        let far = Mixture::from_spec(&DistributionSpec { dimension: 3, components: vec![ComponentSpec::Ball { center: vec![0.0, 0.0, 0.0], radius: 0.5, weight: 1.0 }] }).unwrap();
        let c = landau_coefficients(&far, 1.0, &Vec3::new(0.3, 0.1, 0.0), &budget()).unwrap();
        assert!(is_symmetric(3, &c.a, 1e-12));
        let (eigs, _) = sym_eigen(3, &c.a);
        assert!(eigs[0] > -1e-10);
        let zero = Mixture::from_spec(&DistributionSpec { dimension: 2, components: vec![ComponentSpec::Box { center: vec![0.0, 0.0], half_widths: vec![1.0, 1.0], weight: 0.0 }] });
        if let Ok(z) = zero {
            let c = landau_coefficients(&z, 0.0, &Vec3::zeros(), &budget()).unwrap();
            assert_eq!(c.a, Mat3::zeros());
        }
    }

    #[test]
    fn squeezed_distribution_degenerates_along_axis() {
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01] {
            let f = Mixture::squeezed_gaussian(eps, &[1.0, 0.0, 0.0]).unwrap();
            let a = landau_a(&f, 0.0, &Vec3::zeros(), &budget()).unwrap();
            let (eigs, vecs) = sym_eigen(3, &a);
            assert_relative_eq!(eigs[0], 2.0 * eps * eps, max_relative = 1e-4);
            assert!(vecs[0][0].abs() > 0.99);
            assert!(eigs[0] < prev);
            prev = eigs[0];
        }
    }

    #[test]
    fn null_direction_follows_the_ray() {
        // a thin box along e1 away from the origin: at v on that ray the matrix kernel is e1
        let f = Mixture::from_spec(&DistributionSpec { dimension: 2, components: vec![ComponentSpec::Box { center: vec![3.0, 0.0], half_widths: vec![1.0, 1e-3], weight: 1.0 }] }).unwrap();
        let a = landau_a(&f, 0.0, &Vec3::zeros(), &budget()).unwrap();
        let (eigs, vecs) = sym_eigen(2, &a);
        assert!(eigs[0] < 1e-5 * eigs[1]);
        assert!(vecs[0][0].abs() > 0.9999);
    }

    #[test]
    fn transformed_matrix_scan_and_split() {
        let f = Mixture::maxwellian(3).unwrap();
        let grid = [Vec3::zeros(), Vec3::new(1.5, 0.0, 0.0), Vec3::new(0.0, -1.5, 0.0)];
        let b = QuadBudget { rel_tol: 1e-6, ..Default::default() };
        let scan = landau_ellipticity_scan(&f, 1.0, &[Vec3::zeros(), Vec3::new(5.0, 0.0, 0.0)], &grid, &b).unwrap();
        assert!(scan.rows.iter().all(|r| r.min_eig > 0.0));
        assert!(scan.ratio < 10.0, "{scan:?}");
        let split = upper_direction_split(&f, 1.0, &[Vec3::new(5.0, 0.0, 0.0)], &b).unwrap();
        assert!(split[0].holds, "{split:?}");
    }
}
