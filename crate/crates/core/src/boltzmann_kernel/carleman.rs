use super::KernelParams;
use crate::dist_model::{Component, Mixture};
use crate::error::{Result, VerifyError};
use crate::linalg::{polar, Vec3};
use crate::quadrature::gauss_legendre;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Resolution of the two energy evaluations. All rules are fixed tensor products.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarlemanGrid {
    /// Outer velocity integral covers `[-box_half, box_half]^2`.
    pub box_half: f64,
    pub v_panels: usize,
    pub nodes_per_panel: usize,
    /// Gauss-Hermite nodes per axis for Gaussian components of `f`.
    pub hermite: usize,
    /// Gauss-Legendre panels (four nodes each) on `[0, pi]` for the scattering angle.
    pub phi_panels: usize,
    pub theta_count: usize,
    pub line_nodes: usize,
}

impl Default for CarlemanGrid {
    fn default() -> Self {
        CarlemanGrid { box_half: 7.0, v_panels: 14, nodes_per_panel: 6, hermite: 16, phi_panels: 32, theta_count: 128, line_nodes: 24 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanCheck {
    /// Energy from the `(v, v_*, sigma)` representation.
    pub sigma_energy: f64,
    /// Energy from `int int Phi(v, v') K_f(v', v)`.
    pub kernel_energy: f64,
    pub rel_err: f64,
}

fn panel_rule(a: f64, b: f64, panels: usize, per: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(per);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * per);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

fn graded_rule(edges: &[f64], per: usize) -> Vec<(f64, f64)> {
    edges.windows(2).flat_map(|e| panel_rule(e[0], e[1], 1, per)).collect()
}

/// Gauss-Hermite rule for weight `exp(-x^2)` via the eigen-decomposition of the Jacobi matrix.
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let b = (k as f64 / 2.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..m).map(|i| (eig.eigenvalues[i], PI.sqrt() * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Nodes and weights with `sum w_k h(x_k) ~ int f h` for a planar mixture.
fn density_rule(f: &Mixture, grid: &CarlemanGrid) -> Vec<(Vec3, f64)> {
    let mut out = Vec::new();
    let per = grid.nodes_per_panel.max(2);
    for c in f.components() {
        match c {
            Component::Gaussian { mean, cov, weight, .. } => {
                let chol = nalgebra::Cholesky::new(cov.fixed_view::<2, 2>(0, 0).into_owned()).expect("covariance is positive definite");
                let l = chol.l();
                let (x, w) = gauss_hermite(grid.hermite);
                for i in 0..x.len() {
                    for k in 0..x.len() {
                        let z = nalgebra::Vector2::new(x[i], x[k]) * 2f64.sqrt();
                        let y = l * z;
                        out.push((mean + Vec3::new(y[0], y[1], 0.0), weight * w[i] * w[k] / PI));
                    }
                }
            }
            Component::Box { center, half, weight } => {
                let d = *weight;
                for (x, wx) in panel_rule(center[0] - half[0], center[0] + half[0], 4, per) {
                    for (y, wy) in panel_rule(center[1] - half[1], center[1] + half[1], 4, per) {
                        out.push((Vec3::new(x, y, 0.0), d * wx * wy));
                    }
                }
            }
            Component::Ball { center, radius, weight } => {
                let d = *weight;
                let na = 8 * per;
                for (r, wr) in panel_rule(0.0, *radius, 4, per) {
                    for a in 0..na {
                        let t = polar(2.0 * PI * (a as f64 + 0.5) / na as f64);
                        out.push((center + t * r, d * wr * r * 2.0 * PI / na as f64));
                    }
                }
            }
        }
    }
    out
}

/// Weighted collision energy computed two ways for n = 2:
///
/// * `int dv int dv_* f(v_*) |v - v_*|^gamma int_{S^1} b(cos theta) Phi(v, v') dsigma` with
///   `v' = (v + v_*)/2 + |v - v_*| sigma / 2`;
/// * `int dv' int dh Phi(v' + h, v') K_f(v', v' + h)` using the Carleman form of the kernel.
///
/// `phi` must be symmetric and decay fast enough for both outer integrals to converge on the box.
pub fn carleman_energy_check<P>(f: &Mixture, params: &KernelParams, phi: P, grid: &CarlemanGrid) -> Result<CarlemanCheck>
where
    P: Fn(&Vec3, &Vec3) -> f64 + Sync,
{
    params.validate()?;
    if params.n != 2 || f.dimension() != 2 {
        return Err(VerifyError::UnsupportedDimension(params.n));
    }
    if params.p() < 0.0 {
        return Err(VerifyError::InvalidParameter("energy check needs gamma + 2s + 1 >= 0".into()));
    }
    let (s, gamma, kappa) = (params.s, params.gamma, params.kappa());
    let l = grid.box_half;
    let axis = panel_rule(-l, l, grid.v_panels, grid.nodes_per_panel);
    let outer: Vec<(Vec3, f64)> = axis.iter().flat_map(|&(x, wx)| axis.iter().map(move |&(y, wy)| (Vec3::new(x, y, 0.0), wx * wy))).collect();
    let stars = density_rule(f, grid);
    let half_phi = panel_rule(0.0, PI, grid.phi_panels, 4);
    let angular = |phi_ang: f64| kappa * (0.5 * phi_ang).sin().abs().powf(-1.0 - 2.0 * s);

    let sigma_energy: f64 = outer
        .par_iter()
        .map(|(v, wv)| {
            let mut acc = 0.0;
            for (vs, ws) in &stars {
                let d = v - vs;
                let r = d.norm();
                if r == 0.0 {
                    continue;
                }
                let k = d / r;
                let mid = (v + vs) * 0.5;
                let mut ang = 0.0;
                for &(a, wa) in &half_phi {
                    let b = angular(a);
                    let (sn, cs) = a.sin_cos();
                    for sg in [1.0, -1.0] {
                        let sigma = Vec3::new(cs * k[0] - sg * sn * k[1], sg * sn * k[0] + cs * k[1], 0.0);
                        let vp = mid + sigma * (0.5 * r);
                        ang += wa * b * phi(v, &vp);
                    }
                }
                acc += ws * r.powf(gamma) * ang;
            }
            wv * acc
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();

    let rho_rule = graded_rule(&[0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0], 8);
    let thetas: Vec<Vec3> = (0..grid.theta_count).map(|k| polar(2.0 * PI * (k as f64 + 0.5) / grid.theta_count as f64)).collect();
    let dtheta = 2.0 * PI / grid.theta_count as f64;
    let (lx, lw) = gauss_legendre(grid.line_nodes.max(2));
    let half_p = 0.5 * params.p();
    let even = (half_p - half_p.round()).abs() < 1e-12;
    let weight = |rho2: f64, t: f64| if even { (rho2 + t * t).powi(half_p.round() as i32) } else { (rho2 + t * t).powf(half_p) };
    let kernel_energy: f64 = outer
        .par_iter()
        .map(|(vp, wv)| {
            let mut acc = 0.0;
            let mut line: Vec<(f64, f64)> = Vec::with_capacity(lx.len());
            for theta in &thetas {
                let b = Vec3::new(-theta[1], theta[0], 0.0);
                line.clear();
                if let Some((lo, hi)) = f.line_support(vp, &b) {
                    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                    for (x, w) in lx.iter().zip(&lw) {
                        let t = c + h * x;
                        let fv = f.density_at(&(vp + b * t));
                        if fv != 0.0 {
                            line.push((t, h * w * fv));
                        }
                    }
                }
                if line.is_empty() {
                    continue;
                }
                let mut radial = 0.0;
                for &(rho, wr) in &rho_rule {
                    let pv = phi(&(vp + theta * rho), vp);
                    if pv == 0.0 {
                        continue;
                    }
                    let r2 = rho * rho;
                    let p: f64 = line.iter().map(|&(t, wf)| wf * weight(r2, t)).sum();
                    radial += wr * rho.powf(-1.0 - 2.0 * s) * pv * p;
                }
                acc += dtheta * radial;
            }
            wv * 2.0 * kappa * acc
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();

    let rel_err = (sigma_energy - kernel_energy).abs() / sigma_energy.abs().max(kernel_energy.abs()).max(f64::MIN_POSITIVE);
    Ok(CarlemanCheck { sigma_energy, kernel_energy, rel_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann_kernel::Normalization;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite(12);
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(m0, PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(m2, PI.sqrt() / 2.0, max_relative = 1e-12);
        assert_relative_eq!(m8, 105.0 / 16.0 * PI.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn density_rule_integrates_moments() {
        let f = Mixture::gaussian(&[0.5, -0.2], vec![vec![1.0, 0.3], vec![0.3, 0.5]], 2.0).unwrap();
        let rule = density_rule(&f, &CarlemanGrid::default());
        let mass: f64 = rule.iter().map(|(_, w)| w).sum();
        let m: Vec3 = rule.iter().map(|(x, w)| x * *w).sum();
        assert_relative_eq!(mass, 2.0, max_relative = 1e-12);
        assert_relative_eq!(m[0], 1.0, max_relative = 1e-12);
        let sq: f64 = rule.iter().map(|(x, w)| w * x[0] * x[1]).sum();
        assert_relative_eq!(sq, 2.0 * (0.3 - 0.1), max_relative = 1e-10);
    }

    #[test]
    fn energies_agree_on_coarse_grid() {
        let f = Mixture::maxwellian(2).unwrap();
        let p = KernelParams::new(2, 0.5, 0.0, Normalization::Plain).unwrap();
        let c = Vec3::new(0.5, 0.0, 0.0);
        let g = |x: &Vec3| (-(x - c).norm_squared()).exp();
        let psi = |x: &Vec3| (-x.norm_squared() / 8.0).exp();
        let grid = CarlemanGrid { v_panels: 10, nodes_per_panel: 5, hermite: 12, phi_panels: 24, theta_count: 96, line_nodes: 20, ..Default::default() };
        let chk = carleman_energy_check(&f, &p, |a: &Vec3, b: &Vec3| (g(a) - g(b)).powi(2) * psi(a) * psi(b), &grid).unwrap();
        assert!(chk.sigma_energy > 0.0);
        assert!(chk.rel_err < 0.05, "{chk:?}");
    }
}
