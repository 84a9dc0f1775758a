//! Macroscopic observables of a velocity distribution and the hydrodynamic bounds on them.

use crate::dist_model::Mixture;
use crate::error::{Result, VerifyError};
use crate::linalg::{direction_grid, is_symmetric, mat_rows, sym_eigen, to_slice, Mat3, Vec3};
use crate::quadrature::{Cubature, QuadBudget};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub q: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableReport {
    pub dimension: usize,
    pub rho: f64,
    pub vbar: Vec<f64>,
    pub pressure: Vec<Vec<f64>>,
    pub temperature: f64,
    pub energy: f64,
    pub entropy: f64,
    /// `int f |v|`, always computed.
    pub first_abs_moment: f64,
    pub moments: Vec<Moment>,
    /// Ascending.
    pub pressure_eigs: Vec<f64>,
}

impl ObservableReport {
    pub fn moment(&self, q: f64) -> Option<f64> {
        self.moments.iter().find(|m| m.q == q).map(|m| m.value)
    }

    pub fn pressure_matrix(&self) -> Mat3 {
        let mut p = Mat3::zeros();
        for i in 0..self.dimension {
            for j in 0..self.dimension {
                p[(i, j)] = self.pressure[i][j];
            }
        }
        p
    }

    /// Directional temperature bound: smallest pressure eigenvalue.
    pub fn directional_pressure(&self) -> f64 {
        self.pressure_eigs[0]
    }

    /// Two-direction bound: second-largest pressure eigenvalue.
    pub fn two_direction_pressure(&self) -> f64 {
        self.pressure_eigs[self.dimension - 2]
    }
}

/// `int f |v|^q` summed over components, in closed form where available.
pub fn moment(f: &Mixture, q: f64, budget: &QuadBudget) -> Result<f64> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(VerifyError::InvalidParameter(format!("moment order must be a nonnegative number, got {q}")));
    }
    let mut total = 0.0;
    for (idx, closed) in f.closed_moments(q).into_iter().enumerate() {
        total += match closed {
            Some(v) => v,
            None => {
                let part = f.component_mixture(idx);
                Cubature::new(&part, budget).kink(Vec3::zeros()).integrate(|x, d| d * x.norm().powf(q))?.value
            }
        };
    }
    Ok(total)
}

/// `int f log f` with `0 log 0 = 0`.
pub fn entropy(f: &Mixture, budget: &QuadBudget) -> Result<f64> {
    Ok(Cubature::new(f, budget).integrate(|_, d| if d > 0.0 { d * d.ln() } else { 0.0 })?.value)
}

pub fn compute_observables(f: &Mixture, moment_orders: &[f64], tol: f64) -> Result<ObservableReport> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(VerifyError::InvalidParameter(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let n = f.dimension();
    let budget = QuadBudget::default().with_rel_tol(tol);
    let rho = f.mass();
    let vbar = f.first_moment() / rho;
    let second = f.second_moment();
    let p = second - vbar * vbar.transpose() * rho;
    let p = (p + p.transpose()) * 0.5;
    let (eigs, _) = sym_eigen(n, &p);
    let trace: f64 = (0..n).map(|i| p[(i, i)]).sum();
    let energy = 0.5 * (0..n).map(|i| second[(i, i)]).sum::<f64>();
    let mut moments = Vec::with_capacity(moment_orders.len());
    for &q in moment_orders {
        moments.push(Moment { q, value: moment(f, q, &budget)? });
    }
    Ok(ObservableReport {
        dimension: n,
        rho,
        vbar: to_slice(n, &vbar),
        pressure: mat_rows(n, &p),
        temperature: trace / (n as f64 * rho),
        energy,
        entropy: entropy(f, &budget)?,
        first_abs_moment: moment(f, 1.0, &budget)?,
        moments,
        pressure_eigs: eigs,
    })
}

fn checked_eigs(n: usize, p: &Mat3) -> Result<Vec<f64>> {
    if !is_symmetric(n, p, 1e-12 * p.abs().max().max(1.0)) {
        return Err(VerifyError::InvalidParameter("pressure matrix must be symmetric".into()));
    }
    Ok(sym_eigen(n, p).0)
}

/// `inf_e e . P e`.
pub fn pressure_condition_directional(n: usize, p: &Mat3) -> Result<f64> {
    Ok(checked_eigs(n, p)?[0])
}

/// `inf_sigma sup_{e perp sigma} e . P e`, equal to the second-largest eigenvalue.
pub fn pressure_condition_two_directions(n: usize, p: &Mat3) -> Result<f64> {
    Ok(checked_eigs(n, p)?[n - 2])
}

/// Grid version of the inf-sup: `sigma` over `count` directions, `e` over a fine circle in
/// the complement of `sigma`.
pub fn two_direction_grid(n: usize, p: &Mat3, count: usize) -> f64 {
    let mut best = f64::INFINITY;
    for sigma in direction_grid(n, count) {
        let basis = crate::linalg::complement_basis(n, &sigma);
        let sup = if n == 2 {
            basis[0].dot(&(p * basis[0]))
        } else {
            (0..720)
                .map(|k| {
                    let a = std::f64::consts::PI * k as f64 / 720.0;
                    let e = basis[0] * a.cos() + basis[1] * a.sin();
                    e.dot(&(p * e))
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        best = best.min(sup);
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroThresholds {
    pub m0: f64,
    #[serde(rename = "M0")]
    pub big_m0: f64,
    pub p0: f64,
    #[serde(rename = "Mq")]
    pub mq: f64,
    pub q: f64,
    #[serde(default, rename = "E0")]
    pub e0: Option<f64>,
    #[serde(default, rename = "H0")]
    pub h0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionResult {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HydroCheck {
    pub conditions: Vec<ConditionResult>,
}

impl HydroCheck {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.conditions.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub fn check_hydro_bounds(report: &ObservableReport, t: &HydroThresholds) -> Result<HydroCheck> {
    if !(t.m0 > 0.0 && t.big_m0 >= t.m0 && t.p0 > 0.0 && t.mq > 0.0 && t.q > 0.0) {
        return Err(VerifyError::InvalidParameter(format!("hydrodynamic thresholds must be positive and ordered: {t:?}")));
    }
    let mq = report.moment(t.q).ok_or_else(|| VerifyError::InvalidParameter(format!("moment of order {} was not computed", t.q)))?;
    let two = report.two_direction_pressure();
    let mut conditions = vec![
        ConditionResult { name: "mass".into(), value: report.rho, bound: format!("[{}, {}]", t.m0, t.big_m0), pass: t.m0 <= report.rho && report.rho <= t.big_m0 },
        ConditionResult { name: "two_direction_pressure".into(), value: two, bound: format!(">= {}", t.p0), pass: two >= t.p0 },
        ConditionResult { name: "moment".into(), value: mq, bound: format!("<= {}", t.mq), pass: mq <= t.mq },
    ];
    if let Some(e0) = t.e0 {
        conditions.push(ConditionResult { name: "energy".into(), value: report.energy, bound: format!("<= {e0}"), pass: report.energy <= e0 });
    }
    if let Some(h0) = t.h0 {
        conditions.push(ConditionResult { name: "entropy".into(), value: report.entropy, bound: format!("<= {h0}"), pass: report.entropy <= h0 });
    }
    Ok(HydroCheck { conditions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn thresholds(p0: f64) -> HydroThresholds {
        HydroThresholds { m0: 0.5, big_m0: 2.0, p0, mq: 10.0, q: 4.0, e0: None, h0: None }
    }

    #[test]
    fn maxwellian_observables() {
        let f = Mixture::maxwellian(2).unwrap();
        let r = compute_observables(&f, &[2.0, 3.0, 4.0], 1e-8).unwrap();
        assert_relative_eq!(r.rho, 1.0, max_relative = 1e-12);
        assert!(r.vbar.iter().all(|x| x.abs() < 1e-14));
        assert_relative_eq!(r.temperature, 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.energy, 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.moment(4.0).unwrap(), 8.0, max_relative = 1e-10);
        // E|v|^3 for a 2D standard normal: 3 sqrt(pi / 2)
        assert_relative_eq!(r.moment(3.0).unwrap(), 3.0 * (PI / 2.0).sqrt(), max_relative = 1e-6);
        assert_relative_eq!(r.first_abs_moment, (PI / 2.0).sqrt(), max_relative = 1e-6);
        // -(1 + log 2 pi)
        assert_relative_eq!(r.entropy, -(1.0 + (2.0 * PI).ln()), max_relative = 1e-6);
    }

    #[test]
    fn radial_oracle_for_fourth_moment() {
        // int_0^inf r^4 e^{-r^2/2} r dr, by a plain midpoint sum
        let m = 200_000;
        let h = 40.0 / m as f64;
        let oracle: f64 = (0..m).map(|i| (i as f64 + 0.5) * h).map(|r| r.powi(5) * (-0.5 * r * r).exp() * h).sum();
        let f = Mixture::maxwellian(2).unwrap();
        assert_relative_eq!(moment(&f, 4.0, &QuadBudget::default()).unwrap(), oracle, max_relative = 1e-6);
    }

    #[test]
    fn energy_identity_for_shifted_mixture() {
        let f = Mixture::from_spec(&crate::DistributionSpec {
            dimension: 3,
            components: vec![
                crate::ComponentSpec::Gaussian { mean: vec![1.0, -0.5, 0.2], covariance: vec![vec![2.0, 0.3, 0.0], vec![0.3, 1.0, 0.1], vec![0.0, 0.1, 0.5]], weight: 0.7 },
                crate::ComponentSpec::Ball { center: vec![0.0, 1.0, 0.0], radius: 1.0, weight: 0.2 },
            ],
        })
        .unwrap();
        let r = compute_observables(&f, &[], 1e-6).unwrap();
        let vb = Vec3::new(r.vbar[0], r.vbar[1], r.vbar[2]);
        assert_relative_eq!(r.energy, 0.5 * r.rho * vb.norm_squared() + 1.5 * r.rho * r.temperature, max_relative = 1e-12);
        assert!(r.pressure_eigs[0] > 0.0);
    }

    #[test]
    fn pressure_conditions() {
        let d = Mat3::from_diagonal(&Vec3::new(3.0, 2.0, 0.1));
        assert_eq!(pressure_condition_directional(3, &Mat3::identity()).unwrap(), 1.0);
        assert_relative_eq!(pressure_condition_directional(3, &d).unwrap(), 0.1);
        assert_relative_eq!(pressure_condition_two_directions(3, &d).unwrap(), 2.0);
        assert_relative_eq!(pressure_condition_two_directions(3, &Mat3::identity()).unwrap(), 1.0);
        let sq = Mat3::from_diagonal(&Vec3::new(1.0, 0.01, 0.0));
        assert_relative_eq!(pressure_condition_two_directions(2, &sq).unwrap(), 0.01);
        let mut asym = Mat3::identity();
        asym[(0, 1)] = 0.5;
        assert!(pressure_condition_two_directions(3, &asym).is_err());
    }

    #[test]
    fn grid_inf_sup_matches_spectral_value() {
        let d = Mat3::from_diagonal(&Vec3::new(3.0, 2.0, 0.1));
        assert_relative_eq!(two_direction_grid(3, &d, 2562), 2.0, max_relative = 2e-2);
        let sq = Mat3::from_diagonal(&Vec3::new(1.0, 0.01, 0.0));
        assert_relative_eq!(two_direction_grid(2, &sq, 720), 0.01, max_relative = 2e-2);
    }

    #[test]
    fn squeezed_pressure() {
        let f = Mixture::squeezed_gaussian(0.1, &[1.0, 0.0]).unwrap();
        let r = compute_observables(&f, &[4.0], 1e-8).unwrap();
        assert_relative_eq!(r.pressure[0][0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.pressure[1][1], 0.01, max_relative = 1e-12);
        assert_relative_eq!(r.directional_pressure(), 0.01, max_relative = 1e-12);
        let tiny = compute_observables(&Mixture::squeezed_gaussian(0.01, &[1.0, 0.0]).unwrap(), &[4.0], 1e-8).unwrap();
        assert_relative_eq!(tiny.two_direction_pressure(), 1e-4, max_relative = 1e-10);
        let check = check_hydro_bounds(&tiny, &thresholds(0.5)).unwrap();
        assert_eq!(check.failures(), vec!["two_direction_pressure"]);
    }

    #[test]
    fn maxwellian_passes_hydro_bounds() {
        let r = compute_observables(&Mixture::maxwellian(2).unwrap(), &[4.0], 1e-8).unwrap();
        let check = check_hydro_bounds(&r, &thresholds(0.5)).unwrap();
        assert!(check.all_pass());
        let missing = HydroThresholds { q: 3.0, ..thresholds(0.5) };
        assert!(check_hydro_bounds(&r, &missing).is_err());
    }

    #[test]
    fn counterexample_moments() {
        let r = 10.0;
        let f = Mixture::counterexample(r).unwrap();
        let rep = compute_observables(&f, &[3.0], 1e-6).unwrap();
        assert!(rep.rho >= 4.0 && rep.rho <= 8.0);
        // dominant part: two slabs of width 2 R^-3 and length 2R, int |t|^3 dt = R^4 / 2 each way
        let slabs = 2.0 * (2.0 * r.powi(-3)) * (r.powi(4) / 2.0);
        assert_relative_eq!(rep.moment(3.0).unwrap(), slabs, max_relative = 1e-2);
        assert!(rep.entropy <= rep.rho * (r * r + 1.0).ln());
        let large = compute_observables(&Mixture::counterexample(1e3).unwrap(), &[3.0], 1e-6).unwrap();
        let t = HydroThresholds { m0: 1.0, big_m0: 8.0, p0: 0.1, mq: 100.0, q: 3.0, e0: None, h0: None };
        assert!(!check_hydro_bounds(&large, &t).unwrap().get("moment").unwrap().pass);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn second_largest_eigenvalue_is_the_two_direction_value(a in prop::collection::vec(-1.0f64..1.0, 9)) {
            let b = Mat3::from_row_slice(&a);
            let p = b * b.transpose();
            let spectral = pressure_condition_two_directions(3, &p).unwrap();
            let grid = two_direction_grid(3, &p, 2562);
            prop_assert!((grid - spectral).abs() <= 2e-2 * p.trace().max(1e-12));
        }
    }
}
