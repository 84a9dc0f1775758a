use super::conditions::{even_fit_integral, radial};
use super::{ConditionSettings, Profile, Surrogate};
use crate::error::{Result, VerifyError};
use crate::linalg::Vec3;
use rayon::prelude::*;

/// `L g(v) = 1/2 int (g(v + h) + g(v - h) - 2 g(v)) K(v, v + h) dh` for a profile kernel.
///
/// Directions are paired antipodally. Below the split radius the second difference is fitted by
/// an even quartic; outside it is integrated adaptively up to the truncation radius, beyond
/// which `g` is taken to vanish.
pub fn apply_nonlocal_operator<P, G>(prof: &P, g: G, v: &Vec3, settings: &ConditionSettings) -> Result<f64>
where
    P: Profile + ?Sized,
    G: Fn(&Vec3) -> f64 + Sync,
{
    let params = *prof.params();
    params.validate()?;
    settings.validate()?;
    let (s, kappa) = (params.s, params.kappa());
    let t_max = settings.radial.truncation_radius;
    let rs = settings.split.min(t_max);
    let g0 = g(v);
    if !g0.is_finite() {
        return Err(VerifyError::NonFiniteIntegrand(g0));
    }
    let rule = settings.rule(params.n);
    let half = rule.half();
    let parts: Vec<f64> = half
        .par_iter()
        .map(|&i| {
            let theta = rule.nodes[i];
            let a = prof.profile(v, &theta)?;
            if a == 0.0 {
                return Ok(0.0);
            }
            let delta = |rho: f64| g(&(v + theta * rho)) + g(&(v - theta * rho)) - 2.0 * g0;
            let near = even_fit_integral(delta(rs), delta(0.5 * rs), rs, s);
            let far = radial(|rho| Ok(delta(rho)), -1.0 - 2.0 * s, rs, t_max, &settings.radial)?;
            let tail = -2.0 * g0 * t_max.powf(-2.0 * s) / (2.0 * s);
            Ok(rule.weights[i] * a * (near + far + tail))
        })
        .collect::<Result<_>>()?;
    let value = kappa * parts.iter().sum::<f64>();
    if !value.is_finite() {
        return Err(VerifyError::NonFiniteIntegrand(value));
    }
    Ok(value)
}

/// `Q(f, g)(v) = L g(v) + g(v) int f(v - w) |w|^gamma dw`.
pub fn collision_operator<G>(kernel: &Surrogate<'_>, g: G, v: &Vec3, settings: &ConditionSettings) -> Result<f64>
where
    G: Fn(&Vec3) -> f64 + Sync,
{
    let g0 = g(v);
    let op = apply_nonlocal_operator(kernel, &g, v, settings)?;
    if g0 == 0.0 {
        return Ok(op);
    }
    let conv = crate::landau_coeffs::potential_convolution(kernel.f, v, kernel.params.gamma, &kernel.budget)?;
    Ok(op + g0 * conv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann_kernel::{condition_nondegeneracy, KernelParams, Normalization, Thresholds};
    use crate::dist_model::Mixture;
    use crate::linalg::gamma_fn;
    use crate::quadrature::QuadBudget;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn setup(f: &Mixture, s: f64, gamma: f64) -> Surrogate<'_> {
        let p = KernelParams::new(2, s, gamma, Normalization::Grazing).unwrap();
        Surrogate::new(f, p, QuadBudget { rel_tol: 1e-10, ..Default::default() }).unwrap()
    }

    fn settings() -> ConditionSettings {
        ConditionSettings { sphere_nodes: 120, ..Default::default() }
    }

    #[test]
    fn constants_and_linear_fields_vanish() {
        let f = Mixture::gaussian(&[0.3, 0.0], vec![vec![1.0, 0.2], vec![0.2, 0.7]], 1.0).unwrap();
        let k = setup(&f, 0.4, 0.5);
        // the field vanishes at v, so the truncation tail does not contribute
        let v = Vec3::new(0.1, 0.2, 0.0);
        assert_eq!(apply_nonlocal_operator(&k, |_| 0.0, &v, &settings()).unwrap(), 0.0);
        let lin = apply_nonlocal_operator(&k, |x| 2.0 * x[0] - x[1], &v, &settings()).unwrap();
        assert!(lin.abs() < 1e-10, "{lin}");
    }

    #[test]
    fn gaussian_field_closed_form() {
        let f = Mixture::maxwellian(2).unwrap();
        for (s, gamma) in [(0.5, 0.0), (0.3, 1.0), (0.8, -0.5)] {
            let k = setup(&f, s, gamma);
            let p = k.params.p();
            let a0 = 2f64.powf(0.5 * (p + 1.0)) * gamma_fn(0.5 * (p + 1.0)) / (2.0 * PI);
            let gamma_neg = gamma_fn(1.0 - s) / (-s);
            let oracle = k.params.kappa() * a0 * 2.0 * PI * 2f64.powf(-1.0 - s) * gamma_neg;
            let val = apply_nonlocal_operator(&k, |x| (-0.5 * x.norm_squared()).exp(), &Vec3::zeros(), &settings()).unwrap();
            assert_relative_eq!(val, oracle, max_relative = 1e-6);
        }
    }

    #[test]
    fn quadratic_window_matches_nondegeneracy_cells() {
        let f = Mixture::maxwellian(2).unwrap();
        let k = setup(&f, 0.5, 0.0);
        let st = settings();
        let t = st.radial.truncation_radius;
        let lg = apply_nonlocal_operator(&k, |x| if x.norm() <= t { x.norm_squared() } else { 0.0 }, &Vec3::zeros(), &st).unwrap();
        let rep = condition_nondegeneracy(&k, &[1.0], &[Vec3::zeros()], &st, &Thresholds::default()).unwrap();
        // isotropic: every direction gives the same cell, so the e-sum is n times the minimum
        let cell = rep.cells_by("full_space").next().unwrap().value;
        assert_relative_eq!(lg, 2.0 * 2.0 * cell * t.powf(2.0 - 2.0 * 0.5), max_relative = 1e-5);
    }

    #[test]
    fn collision_operator_adds_mass_term() {
        let f = Mixture::maxwellian(2).unwrap();
        let k = setup(&f, 0.5, 0.0);
        let g = |x: &Vec3| (-0.5 * x.norm_squared()).exp();
        let v = Vec3::zeros();
        let op = apply_nonlocal_operator(&k, g, &v, &settings()).unwrap();
        let q = collision_operator(&k, g, &v, &settings()).unwrap();
        assert_relative_eq!(q - op, 1.0, max_relative = 1e-6);
        assert_eq!(collision_operator(&k, |_| 0.0, &v, &settings()).unwrap(), 0.0);
    }

    #[test]
    fn collision_operator_double_integral_oracle() {
        // gamma = 1: independent polar double sum for both pieces at v = (0.3, 0)
        let f = Mixture::maxwellian(2).unwrap();
        let k = setup(&f, 0.5, 1.0);
        let g = |x: &Vec3| (-(x - Vec3::new(0.2, 0.1, 0.0)).norm_squared()).exp();
        let v = Vec3::new(0.3, 0.0, 0.0);
        let q = collision_operator(&k, g, &v, &settings()).unwrap();
        let m = 4000;
        let dr = 12.0 / m as f64;
        let na = 256;
        let mut conv = 0.0;
        let mut op = 0.0;
        for j in 0..na {
            let th = crate::linalg::polar(2.0 * PI * (j as f64 + 0.5) / na as f64);
            let a = crate::boltzmann_kernel::profile_a(&f, &k.params, &v, &th, &k.budget).unwrap();
            for i in 0..m {
                let r = (i as f64 + 0.5) * dr;
                let w = th * r;
                conv += f.density_at(&(v - w)) * r * r * dr * 2.0 * PI / na as f64;
                let d = g(&(v + w)) + g(&(v - w)) - 2.0 * g(&v);
                op += 0.5 * 0.5 * r.powf(-2.0) * a * d * dr * 2.0 * PI / na as f64;
            }
            // beyond r = 12 only -2 g(v) survives
            op += 0.5 * 0.5 * a * (-2.0 * g(&v)) / 12.0 * 2.0 * PI / na as f64;
        }
        assert_relative_eq!(q, op + g(&v) * conv, max_relative = 2e-3);
    }
}
