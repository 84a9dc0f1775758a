use super::conditions::{Cell, Condition, EllipticityReport, Thresholds};
use super::{KernelParams, Profile};
use crate::error::{Result, VerifyError};
use crate::linalg::{polar, Vec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ANGLES: usize = 180;

/// Anisotropic distance `sqrt(|w - w'|^2 + (|w|^2 - |w'|^2)^2 / 4)`.
pub fn gs_distance(w: &Vec3, wp: &Vec3) -> f64 {
    let d = (w.norm_squared() - wp.norm_squared()) * 0.5;
    ((w - wp).norm_squared() + d * d).sqrt()
}

/// Smooth bump `exp(-1 / (1 - |x - c|^2 / r^2))`, zero outside the ball.
pub fn bump(center: Vec3, radius: f64) -> impl Fn(&Vec3) -> f64 + Sync + Copy {
    move |x: &Vec3| {
        let t = (x - center).norm_squared() / (radius * radius);
        if t < 1.0 {
            (-1.0 / (1.0 - t)).exp()
        } else {
            0.0
        }
    }
}

/// Square lattice of the given spacing clipped to the ball of the given radius (n = 2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityGrid {
    pub spacing: f64,
    pub radius: f64,
}

impl Default for CoercivityGrid {
    fn default() -> Self {
        CoercivityGrid { spacing: 0.1, radius: 4.0 }
    }
}

impl CoercivityGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing <= 0.1) {
            return Err(VerifyError::InvalidParameter(format!("grid spacing {} is too coarse (need <= 0.1)", self.spacing)));
        }
        if !(self.radius >= 4.0) {
            return Err(VerifyError::InvalidParameter(format!("grid must cover the ball of radius 4, got {}", self.radius)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Vec3> {
        let m = (self.radius / self.spacing).floor() as i64;
        let mut out = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                let x = Vec3::new(i as f64 * self.spacing, j as f64 * self.spacing, 0.0);
                if x.norm() <= self.radius + 1e-12 {
                    out.push(x);
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityEnergies {
    pub e_k: f64,
    pub e_aniso: f64,
    pub e_hs: f64,
    pub l2: f64,
}

/// Profile values on the grid, tabulated at equispaced half-circle angles.
pub struct CoercivityTable {
    params: KernelParams,
    grid: CoercivityGrid,
    points: Vec<Vec3>,
    profile: Vec<[f64; ANGLES]>,
}

impl CoercivityTable {
    pub fn build<P: Profile + ?Sized>(prof: &P, grid: CoercivityGrid) -> Result<Self> {
        let params = *prof.params();
        if params.n != 2 {
            return Err(VerifyError::UnsupportedDimension(params.n));
        }
        grid.validate()?;
        let points = grid.points();
        let dirs: Vec<Vec3> = (0..ANGLES).map(|k| polar(PI * k as f64 / ANGLES as f64)).collect();
        let profile = points
            .par_iter()
            .map(|x| {
                let mut row = [0.0; ANGLES];
                for (k, t) in dirs.iter().enumerate() {
                    row[k] = prof.profile(x, t)?;
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        Ok(CoercivityTable { params, grid, points, profile })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn lookup(&self, i: usize, d: &Vec3) -> f64 {
        let phi = d[1].atan2(d[0]).rem_euclid(PI);
        let x = phi / PI * ANGLES as f64;
        let k = (x.floor() as usize).min(ANGLES - 1);
        let t = x - k as f64;
        let row = &self.profile[i];
        (1.0 - t) * row[k] + t * row[(k + 1) % ANGLES]
    }

    /// Dirichlet energies of `g` on the grid. Pairs closer than the cell radius are replaced by
    /// the first-order expansion `(grad g . h)^2` integrated analytically over a disc with the
    /// cell's area.
    pub fn energies<G: Fn(&Vec3) -> f64 + Sync>(&self, g: G) -> CoercivityEnergies {
        let KernelParams { s, .. } = self.params;
        let kappa = self.params.kappa();
        let p = self.params.p();
        let h = self.grid.spacing;
        let cell = h * h;
        let rs = h / PI.sqrt();
        let radial = rs.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
        let power = -2.0 - 2.0 * s;
        let vals: Vec<f64> = self.points.iter().map(&g).collect();
        let support: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] != 0.0).collect();
        let all: Vec<usize> = (0..vals.len()).collect();
        let dirs: Vec<Vec3> = (0..ANGLES).map(|k| polar(PI * (k as f64 + 0.5) / ANGLES as f64)).collect();
        let fd = 1e-5;
        let rows: Vec<[f64; 4]> = (0..self.points.len())
            .into_par_iter()
            .map(|i| {
                let x = self.points[i];
                let gi = vals[i];
                let (mut ek, mut ea, mut eh) = (0.0, 0.0, 0.0);
                let wx = (1.0 + x.norm_squared()).powf(0.25 * p);
                let others = if gi == 0.0 { &support } else { &all };
                for &j in others {
                    if j == i {
                        continue;
                    }
                    let diff = gi - vals[j];
                    if diff == 0.0 {
                        continue;
                    }
                    let y = self.points[j];
                    let d = y - x;
                    let dn = d.norm();
                    let d2 = diff * diff;
                    let base = dn.powf(power);
                    ek += d2 * base * self.lookup(i, &d);
                    eh += d2 * base;
                    let gs = gs_distance(&x, &y);
                    if gs <= 1.0 {
                        let wy = (1.0 + y.norm_squared()).powf(0.25 * p);
                        ea += d2 * wx * wy * gs.powf(power);
                    }
                }
                let grad = Vec3::new(
                    (g(&(x + Vec3::new(fd, 0.0, 0.0))) - g(&(x - Vec3::new(fd, 0.0, 0.0)))) / (2.0 * fd),
                    (g(&(x + Vec3::new(0.0, fd, 0.0))) - g(&(x - Vec3::new(0.0, fd, 0.0)))) / (2.0 * fd),
                    0.0,
                );
                let (mut lk, mut la) = (0.0, 0.0);
                if grad.norm_squared() > 0.0 {
                    let dtheta = PI / ANGLES as f64;
                    for t in &dirs {
                        let gt = grad.dot(t).powi(2);
                        // each half-circle direction stands for itself and its antipode
                        lk += 2.0 * dtheta * gt * self.lookup(i, t);
                        let q = 1.0 + x.dot(t).powi(2);
                        la += 2.0 * dtheta * gt * q.powf(-1.0 - s);
                    }
                }
                let local_k = radial * lk;
                let local_a = (1.0 + x.norm_squared()).powf(0.5 * p) * radial * la;
                let local_h = PI * grad.norm_squared() * radial;
                [
                    cell * cell * ek + cell * local_k,
                    cell * cell * ea + cell * local_a,
                    cell * cell * eh + cell * local_h,
                    cell * gi * gi,
                ]
            })
            .collect();
        let mut out = [0.0; 4];
        for r in &rows {
            for k in 0..4 {
                out[k] += r[k];
            }
        }
        CoercivityEnergies { e_k: kappa * out[0], e_aniso: kappa * out[1], e_hs: kappa * out[2], l2: out[3] }
    }
}

/// Energies for a family of test fields plus a coercivity report. Cells carry, per field, the
/// ratio `E_K / E_aniso` (`method = "anisotropic"`) and `E_K / E_Hs` (`method = "fractional"`),
/// with `v` the field's center and `r` its radius. The report passes when the anisotropic ratios
/// are positive and agree within a factor 2.
pub fn coercivity_energies<P: Profile + ?Sized>(prof: &P, family: &[(Vec3, f64)], grid: CoercivityGrid, thr: &Thresholds) -> Result<(Vec<CoercivityEnergies>, EllipticityReport)> {
    for (c, r) in family {
        if c.norm() + r > 2.0 + 1e-12 {
            return Err(VerifyError::InvalidParameter(format!("test field centred at {c:?} with radius {r} leaves the ball of radius 2")));
        }
    }
    let table = CoercivityTable::build(prof, grid)?;
    let energies: Vec<CoercivityEnergies> = family.iter().map(|(c, r)| table.energies(bump(*c, *r))).collect();
    let mut cells = Vec::new();
    for ((c, r), e) in family.iter().zip(&energies) {
        let v = vec![c[0], c[1]];
        cells.push(Cell { v: v.clone(), r: *r, e: None, value: e.e_k / e.e_aniso, method: "anisotropic".into() });
        cells.push(Cell { v, r: *r, e: None, value: e.e_k / e.e_hs, method: "fractional".into() });
    }
    let ratios: Vec<f64> = cells.iter().filter(|c| c.method == "anisotropic").map(|c| c.value).collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lambda = cells.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    let pass = lo > thr.lower && lo.is_finite() && spread <= 2.0;
    let report = EllipticityReport {
        condition: Condition::Coercivity,
        params: *prof.params(),
        cells,
        lambda_meas: Some(lambda),
        big_lambda_meas: None,
        discrepancy: Some(spread),
        pass,
    };
    Ok((energies, report))
}

/// Five bumps inside the ball of radius 2 used as the default coercivity test family.
pub fn default_family() -> Vec<(Vec3, f64)> {
    vec![
        (Vec3::zeros(), 1.0),
        (Vec3::new(0.5, 0.0, 0.0), 1.2),
        (Vec3::new(-0.4, 0.6, 0.0), 0.8),
        (Vec3::new(0.0, -1.0, 0.0), 0.9),
        (Vec3::new(0.8, 0.8, 0.0), 0.7),
    ]
}
