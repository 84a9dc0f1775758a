//! wasm-bindgen bindings for the static demo page in `www/`.

use kinetic_ellipticity::boltzmann_kernel::{condition_nondegeneracy, ConditionSettings, KernelParams, Normalization, Surrogate, Thresholds};
use kinetic_ellipticity::kinetic_geometry::{kinetic_distance as distance, KineticPoint};
use kinetic_ellipticity::observables::compute_observables;
use kinetic_ellipticity::quadrature::QuadBudget;
use kinetic_ellipticity::{Mixture, Vec3};
use wasm_bindgen::prelude::*;

fn plane(a: f64, b: f64) -> Vec3 {
    Vec3::new(a, b, 0.0)
}

/// Kinetic distance between `(t1, x1, v1)` and `(t2, x2, v2)` in the plane.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn kinetic_distance(t1: f64, x1: f64, y1: f64, vx1: f64, vy1: f64, t2: f64, x2: f64, y2: f64, vx2: f64, vy2: f64, s: f64) -> Result<f64, String> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(format!("s must lie in (0, 1], got {s}"));
    }
    let z1 = KineticPoint::new(t1, plane(x1, y1), plane(vx1, vy1));
    let z2 = KineticPoint::new(t2, plane(x2, y2), plane(vx2, vy2));
    Ok(distance(&z1, &z2, s))
}

/// `[mass, temperature, two-direction pressure]` of a planar Gaussian stretched along the x-axis
/// with width `eps` across it.
#[wasm_bindgen]
pub fn squeezed_observables(eps: f64) -> Result<Vec<f64>, String> {
    let f = Mixture::squeezed_gaussian(eps, &[1.0, 0.0]).map_err(|e| e.to_string())?;
    let rep = compute_observables(&f, &[], 1e-8).map_err(|e| e.to_string())?;
    Ok(vec![rep.rho, rep.temperature, rep.two_direction_pressure()])
}

/// Nondegeneracy constant of the planar Maxwellian kernel at velocity `(vx, vy)`, returned as
/// `[sphere rule, full-space form, relative gap]`.
#[wasm_bindgen]
pub fn maxwellian_nondegeneracy(s: f64, gamma: f64, vx: f64, vy: f64) -> Result<Vec<f64>, String> {
    let k = KernelParams::new(2, s, gamma, Normalization::Plain).map_err(|e| e.to_string())?;
    if !k.admissible() {
        return Err(format!("gamma + 2s = {} is outside the admissible range", gamma + 2.0 * s));
    }
    let f = Mixture::maxwellian(2).map_err(|e| e.to_string())?;
    let sur = Surrogate::new(&f, k, QuadBudget::default()).map_err(|e| e.to_string())?;
    let settings = ConditionSettings { sphere_nodes: 360, e_count: 180, ..Default::default() };
    let rep = condition_nondegeneracy(&sur, &[1.0], &[plane(vx, vy)], &settings, &Thresholds::default()).map_err(|e| e.to_string())?;
    let value = |m: &str| rep.cells_by(m).next().map(|c| c.value).unwrap_or(f64::NAN);
    Ok(vec![value("sphere"), value("full_space"), rep.discrepancy.unwrap_or(f64::NAN)])
}
