use super::{KernelParams, Profile};
use crate::error::{Result, VerifyError};
use crate::linalg::{direction_grid, golden_min, polar, sym_eigen, to_slice, Vec3};
use crate::quadrature::{integrate_radial, QuadBudget, SphereRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Upper,
    Nondegeneracy,
    Coercivity,
    Cancellation,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::Upper => "upper",
            Condition::Nondegeneracy => "nondegeneracy",
            Condition::Coercivity => "coercivity",
            Condition::Cancellation => "cancellation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionSettings {
    /// Sphere rule size: circle points for n = 2, polar Gauss nodes for n = 3. Zero picks 720 / 16.
    pub sphere_nodes: usize,
    /// Direction grid for the infimum over `e`. Zero picks 360 / 2562.
    pub e_count: usize,
    pub split: f64,
    pub radial: QuadBudget,
}

impl Default for ConditionSettings {
    fn default() -> Self {
        ConditionSettings { sphere_nodes: 0, e_count: 0, split: 0.1, radial: QuadBudget { rel_tol: 1e-7, max_evals: 20_000, ..Default::default() } }
    }
}

impl ConditionSettings {
    pub fn rule(&self, n: usize) -> SphereRule {
        match (n, self.sphere_nodes) {
            (2, 0) => SphereRule::circle(720),
            (2, m) => SphereRule::circle(m),
            (_, 0) => SphereRule::product(16),
            (_, m) => SphereRule::product(m),
        }
    }

    pub fn e_grid(&self, n: usize) -> Vec<Vec3> {
        let count = match (n, self.e_count) {
            (2, 0) => 360,
            (_, 0) => 2562,
            (_, c) => c,
        };
        direction_grid(n, count)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0) {
            return Err(VerifyError::InvalidParameter("radial split must be positive".into()));
        }
        self.radial.validate()
    }
}

/// Pass criteria: lower constants must exceed `lower`, upper constants must stay below `upper`, and
/// the two nondegeneracy methods must agree to `max_discrepancy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub lower: f64,
    pub upper: f64,
    pub max_discrepancy: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { lower: 0.0, upper: f64::INFINITY, max_discrepancy: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub v: Vec<f64>,
    pub r: f64,
    pub e: Option<Vec<f64>>,
    pub value: f64,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub condition: Condition,
    pub params: KernelParams,
    pub cells: Vec<Cell>,
    pub lambda_meas: Option<f64>,
    pub big_lambda_meas: Option<f64>,
    /// Largest relative gap between independent evaluation routes, when two exist.
    pub discrepancy: Option<f64>,
    pub pass: bool,
}

impl EllipticityReport {
    pub fn cells_by(&self, method: &str) -> impl Iterator<Item = &Cell> {
        let m = method.to_string();
        self.cells.iter().filter(move |c| c.method == m)
    }

    fn upper(condition: Condition, params: KernelParams, cells: Vec<Cell>, thr: &Thresholds) -> Self {
        let big = cells.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
        let big = (!cells.is_empty()).then_some(big);
        let pass = big.is_some_and(|b| b.is_finite() && b <= thr.upper);
        EllipticityReport { condition, params, cells, lambda_meas: None, big_lambda_meas: big, discrepancy: None, pass }
    }
}

fn check_inputs(params: &KernelParams, r_list: &[f64], v_grid: &[Vec3], settings: &ConditionSettings) -> Result<()> {
    params.validate()?;
    settings.validate()?;
    if r_list.is_empty() || v_grid.is_empty() {
        return Err(VerifyError::InvalidParameter("empty r or v grid".into()));
    }
    if let Some(r) = r_list.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(VerifyError::InvalidParameter(format!("radius {r} must be positive")));
    }
    Ok(())
}

pub(crate) fn profile_table<P: Profile + ?Sized>(prof: &P, nodes: &[Vec3], v: &Vec3) -> Result<Vec<f64>> {
    nodes.par_iter().map(|t| prof.profile(v, t)).collect()
}

pub(crate) fn radial<F: FnMut(f64) -> Result<f64>>(mut g: F, q: f64, a: f64, b: f64, budget: &QuadBudget) -> Result<f64> {
    let mut fail = None;
    let res = integrate_radial(
        |x| match g(x) {
            Ok(v) => v,
            Err(e) => {
                fail.get_or_insert(e);
                0.0
            }
        },
        q,
        a,
        b,
        &[],
        budget,
    )?;
    match fail {
        Some(e) => Err(e),
        None => Ok(res.value),
    }
}

fn cell(n: usize, v: &Vec3, r: f64, e: Option<&Vec3>, value: f64, method: &str) -> Cell {
    Cell { v: to_slice(n, v), r, e: e.map(|e| to_slice(n, e)), value, method: method.into() }
}

/// `Lambda`: per cell `r^{2s} [int_{|h| > r} K(v, v + h) dh + int_{|h| > r} K(v + h, v) dh]`.
///
/// The outgoing part is `kappa / (2s) int_S A(v; theta)`, independent of `r`. The incoming part
/// samples `A` along rays and is integrated out to the truncation radius.
pub fn condition_upper_bound<P: Profile + ?Sized>(prof: &P, r_list: &[f64], v_grid: &[Vec3], settings: &ConditionSettings, thr: &Thresholds) -> Result<EllipticityReport> {
    let params = *prof.params();
    check_inputs(&params, r_list, v_grid, settings)?;
    let (n, s, kappa) = (params.n, params.s, params.kappa());
    let rule = settings.rule(n);
    let t_max = settings.radial.truncation_radius;
    let mut order: Vec<usize> = (0..r_list.len()).collect();
    order.sort_by(|&a, &b| r_list[b].total_cmp(&r_list[a]));
    let mut cells = Vec::new();
    for v in v_grid {
        let table = profile_table(prof, &rule.nodes, v)?;
        let outgoing = kappa / (2.0 * s) * rule.weights.iter().zip(&table).map(|(w, a)| w * a).sum::<f64>();
        let per_node: Vec<Vec<f64>> = rule
            .nodes
            .par_iter()
            .map(|theta| {
                let mut acc = 0.0;
                let mut upper = t_max;
                let mut out = vec![0.0; r_list.len()];
                for &k in &order {
                    let r = r_list[k];
                    if r < upper {
                        acc += radial(|rho| prof.profile(&(v + theta * rho), theta), -1.0 - 2.0 * s, r, upper, &settings.radial)?;
                        upper = r;
                    }
                    out[k] = acc;
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (k, &r) in r_list.iter().enumerate() {
            let incoming: f64 = rule.weights.iter().zip(&per_node).map(|(w, row)| w * row[k]).sum();
            let value = outgoing + kappa * r.powf(2.0 * s) * incoming;
            cells.push(cell(n, v, r, None, value, "sphere"));
            cells.push(cell(n, v, r, None, outgoing, "outgoing"));
        }
    }
    Ok(EllipticityReport::upper(Condition::Upper, params, cells, thr))
}

/// Minimum of `q` over unit vectors, from a direction grid followed by golden-section polishing.
pub fn min_over_directions<F: Fn(&Vec3) -> f64 + Sync>(n: usize, grid: &[Vec3], q: F) -> (Vec3, f64) {
    let vals: Vec<f64> = grid.par_iter().map(&q).collect();
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[best] {
            best = i;
        }
    }
    let e0 = grid[best];
    let mut bestv = vals[best];
    let mut beste = e0;
    if n == 2 {
        let step = 2.0 * std::f64::consts::PI / grid.len() as f64;
        let a0 = e0[1].atan2(e0[0]);
        let (a, fa) = golden_min(|a| q(&polar(a)), a0 - step, a0 + step, 40);
        if fa < bestv {
            bestv = fa;
            beste = polar(a);
        }
    } else {
        let step = (4.0 * std::f64::consts::PI / grid.len() as f64).sqrt() * 1.5;
        for _ in 0..2 {
            let basis = crate::linalg::complement_basis(3, &beste);
            for u in basis {
                let c = beste;
                let dir = |t: f64| (c * t.cos() + u * t.sin()).normalize();
                let (t, ft) = golden_min(|t| q(&dir(t)), -step, step, 30);
                if ft < bestv {
                    bestv = ft;
                    beste = dir(t);
                }
            }
        }
    }
    (beste, bestv)
}

/// `lambda`: per cell `inf_e r^{2s-2} int_{B_r} K(v, v + h) (h . e)_+^2 dh`, evaluated on a sphere
/// rule (`method = "sphere"`) and through the full-space matrix form (`method = "full_space"`).
pub fn condition_nondegeneracy<P: Profile + ?Sized>(prof: &P, r_list: &[f64], v_grid: &[Vec3], settings: &ConditionSettings, thr: &Thresholds) -> Result<EllipticityReport> {
    let params = *prof.params();
    check_inputs(&params, r_list, v_grid, settings)?;
    let (n, s, kappa) = (params.n, params.s, params.kappa());
    let radial_factor = kappa / (2.0 - 2.0 * s);
    let rule = settings.rule(n);
    let grid = settings.e_grid(n);
    let mut cells = Vec::new();
    let mut discrepancy: f64 = 0.0;
    for v in v_grid {
        let table = profile_table(prof, &rule.nodes, v)?;
        let quad = |e: &Vec3| -> f64 { rule.nodes.iter().zip(&rule.weights).zip(&table).map(|((t, w), a)| w * a * t.dot(e).max(0.0).powi(2)).sum() };
        let (ea, qa) = min_over_directions(n, &grid, quad);
        let (eigs, vecs) = sym_eigen(n, &prof.quadratic_form(v)?);
        let (eb, qb) = (vecs[0], eigs[0]);
        let (va, vb) = (radial_factor * qa, radial_factor * qb);
        let scale = va.abs().max(vb.abs());
        if scale > 0.0 {
            discrepancy = discrepancy.max((va - vb).abs() / scale);
        }
        for &r in r_list {
            cells.push(cell(n, v, r, Some(&ea), va, "sphere"));
            cells.push(cell(n, v, r, Some(&eb), vb, "full_space"));
        }
    }
    let lambda = cells.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let pass = lambda > thr.lower && discrepancy <= thr.max_discrepancy;
    Ok(EllipticityReport {
        condition: Condition::Nondegeneracy,
        params,
        cells,
        lambda_meas: Some(lambda),
        big_lambda_meas: None,
        discrepancy: Some(discrepancy),
        pass,
    })
}

/// Fit of `c2 rho^2 + c4 rho^4` through samples at `rs` and `rs/2`, integrated against `rho^{-1-2s}` on `[0, rs]`.
pub(crate) fn even_fit_integral(a: f64, b: f64, rs: f64, s: f64) -> f64 {
    let c2 = (16.0 * b - a) / (3.0 * rs * rs);
    let c4 = (4.0 * a - 16.0 * b) / (3.0 * rs.powi(4));
    c2 * rs.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) + c4 * rs.powf(4.0 - 2.0 * s) / (4.0 - 2.0 * s)
}

/// Fit of `d1 rho + d3 rho^3` through samples at `rs` and `rs/2`, integrated against `rho^{-2s}` on `[0, rs]`.
pub(crate) fn odd_fit_integral(a: f64, b: f64, rs: f64, s: f64) -> f64 {
    let d1 = (8.0 * b - a) / (3.0 * rs);
    let d3 = (4.0 * a - 8.0 * b) / (3.0 * rs.powi(3));
    d1 * rs.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) + d3 * rs.powf(4.0 - 2.0 * s) / (4.0 - 2.0 * s)
}

/// Cancellation: per cell `r^{2s} |int_{B_r} (K(v, v + h) - K(v + h, v)) dh|` (`method = "zeroth"`)
/// and, for `s >= 1/2`, `|int_{B_r} (K(v, v + h) - K(v + h, v)) h dh| / (1 + r^{1-2s})` (`method = "first"`).
///
/// Antipodal directions are paired so the integrands become second and first differences of
/// `A` along each ray; below the split radius these are fitted by even / odd polynomials.
pub fn condition_cancellation<P: Profile + ?Sized>(prof: &P, r_list: &[f64], v_grid: &[Vec3], settings: &ConditionSettings, thr: &Thresholds) -> Result<EllipticityReport> {
    let params = *prof.params();
    check_inputs(&params, r_list, v_grid, settings)?;
    let (n, s, kappa) = (params.n, params.s, params.kappa());
    let with_first = s >= 0.5;
    let rule = settings.rule(n);
    let half = rule.half();
    let r_min = r_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let rs = settings.split.min(r_min);
    let mut order: Vec<usize> = (0..r_list.len()).collect();
    order.sort_by(|&a, &b| r_list[a].total_cmp(&r_list[b]));
    let mut cells = Vec::new();
    for v in v_grid {
        let rows: Vec<(Vec<f64>, Vec<f64>)> = half
            .par_iter()
            .map(|&i| {
                let theta = rule.nodes[i];
                let base = prof.profile(v, &theta)?;
                let d = |rho: f64| -> Result<(f64, f64)> {
                    let plus = prof.profile(&(v + theta * rho), &theta)?;
                    let minus = prof.profile(&(v - theta * rho), &theta)?;
                    Ok((2.0 * base - plus - minus, minus - plus))
                };
                let (a2, a1) = d(rs)?;
                let (b2, b1) = d(0.5 * rs)?;
                let mut acc0 = even_fit_integral(a2, b2, rs, s);
                let mut acc1 = if with_first { odd_fit_integral(a1, b1, rs, s) } else { 0.0 };
                let mut lower = rs;
                let mut z = vec![0.0; r_list.len()];
                let mut o = vec![0.0; r_list.len()];
                for &k in &order {
                    let r = r_list[k];
                    if r > lower {
                        acc0 += radial(|rho| d(rho).map(|x| x.0), -1.0 - 2.0 * s, lower, r, &settings.radial)?;
                        if with_first {
                            acc1 += radial(|rho| d(rho).map(|x| x.1), -2.0 * s, lower, r, &settings.radial)?;
                        }
                        lower = r;
                    }
                    z[k] = acc0;
                    o[k] = acc1;
                }
                Ok((z, o))
            })
            .collect::<Result<_>>()?;
        for (k, &r) in r_list.iter().enumerate() {
            let mut i0 = 0.0;
            let mut i1 = Vec3::zeros();
            for (j, &i) in half.iter().enumerate() {
                let w = rule.weights[i];
                i0 += w * rows[j].0[k];
                i1 += rule.nodes[i] * (w * rows[j].1[k]);
            }
            cells.push(cell(n, v, r, None, kappa * i0.abs() * r.powf(2.0 * s), "zeroth"));
            if with_first {
                cells.push(cell(n, v, r, None, kappa * i1.norm() / (1.0 + r.powf(1.0 - 2.0 * s)), "first"));
            }
        }
    }
    Ok(EllipticityReport::upper(Condition::Cancellation, params, cells, thr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann_kernel::{Normalization, Surrogate};
    use crate::dist_model::Mixture;
    use crate::linalg::Mat3;
    use crate::{ComponentSpec, DistributionSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn fast() -> ConditionSettings {
        ConditionSettings { sphere_nodes: 180, e_count: 180, ..Default::default() }
    }

    fn maxwell_surrogate(f: &Mixture, s: f64, gamma: f64) -> Surrogate<'_> {
        let p = KernelParams::new(2, s, gamma, Normalization::Grazing).unwrap();
        Surrogate::new(f, p, QuadBudget { rel_tol: 1e-9, ..Default::default() }).unwrap()
    }

    #[test]
    fn fits_reproduce_polynomials() {
        let (rs, s) = (0.1f64, 0.3f64);
        let poly2 = |x: f64| 2.0 * x * x - 5.0 * x.powi(4);
        let exact2 = 2.0 * rs.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) - 5.0 * rs.powf(4.0 - 2.0 * s) / (4.0 - 2.0 * s);
        assert_relative_eq!(even_fit_integral(poly2(rs), poly2(rs / 2.0), rs, s), exact2, max_relative = 1e-12);
        let poly1 = |x: f64| 3.0 * x + 7.0 * x.powi(3);
        let exact1 = 3.0 * rs.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) + 7.0 * rs.powf(4.0 - 2.0 * s) / (4.0 - 2.0 * s);
        assert_relative_eq!(odd_fit_integral(poly1(rs), poly1(rs / 2.0), rs, s), exact1, max_relative = 1e-12);
    }

    #[test]
    fn upper_bound_maxwellian_origin() {
        let f = Mixture::maxwellian(2).unwrap();
        let sur = maxwell_surrogate(&f, 0.5, 0.0);
        let r_list = [0.25, 0.5, 1.0, 2.0];
        let rep = condition_upper_bound(&sur, &r_list, &[Vec3::zeros()], &fast(), &Thresholds::default()).unwrap();
        let a0 = (2.0 * PI).powf(-0.5);
        let out_oracle = 0.5 / 1.0 * 2.0 * PI * a0;
        for c in rep.cells_by("outgoing") {
            assert_relative_eq!(c.value, out_oracle, max_relative = 1e-8);
        }
        // incoming: A(rho theta; theta) = e^{-rho^2/2} a0, integrate rho^{-2} e^{-rho^2/2} by midpoint sums
        for c in rep.cells_by("sphere") {
            let m = 200_000;
            let dr = (12.0 - c.r) / m as f64;
            let tail: f64 = (0..m).map(|i| c.r + (i as f64 + 0.5) * dr).map(|x| x.powi(-2) * (-0.5 * x * x).exp() * dr).sum();
            let oracle = out_oracle + 0.5 * c.r * 2.0 * PI * a0 * tail;
            assert_relative_eq!(c.value, oracle, max_relative = 1e-6);
        }
        assert!(rep.pass);
        assert!(rep.big_lambda_meas.unwrap() >= rep.cells.iter().map(|c| c.value).fold(0.0, f64::max));
    }

    #[test]
    fn zero_profile_gives_zero() {
        struct Zero(KernelParams);
        impl Profile for Zero {
            fn params(&self) -> &KernelParams {
                &self.0
            }
            fn profile(&self, _: &Vec3, _: &Vec3) -> Result<f64> {
                Ok(0.0)
            }
            fn quadratic_form(&self, _: &Vec3) -> Result<Mat3> {
                Ok(Mat3::zeros())
            }
        }
        let z = Zero(KernelParams::new(2, 0.5, 0.0, Normalization::Plain).unwrap());
        let v = [Vec3::new(0.0, 0.5, 0.0)];
        let rep = condition_cancellation(&z, &[0.3], &v, &fast(), &Thresholds::default()).unwrap();
        assert!(rep.cells.iter().all(|c| c.value == 0.0));
        let rep = condition_upper_bound(&z, &[0.3], &v, &fast(), &Thresholds::default()).unwrap();
        assert!(rep.cells.iter().all(|c| c.value == 0.0));
    }

    #[test]
    fn nondegeneracy_dual_path() {
        let f = Mixture::maxwellian(2).unwrap();
        let sur = maxwell_surrogate(&f, 0.5, 0.0);
        let rep = condition_nondegeneracy(&sur, &[0.5, 1.0], &[Vec3::zeros(), Vec3::new(0.7, -0.4, 0.0)], &ConditionSettings::default(), &Thresholds::default()).unwrap();
        assert!(rep.lambda_meas.unwrap() > 0.0);
        assert!(rep.discrepancy.unwrap() < 0.01, "{:?}", rep.discrepancy);
        assert!(rep.pass);
        // isotropy at v = 0: kappa/(2-2s) * pi/2 * a0
        let oracle = 0.5 / 1.0 * PI / 2.0 * (2.0 * PI).powf(-0.5);
        let c = rep.cells_by("sphere").next().unwrap();
        assert_relative_eq!(c.value, oracle, max_relative = 1e-5);
    }

    #[test]
    fn cancellation_far_edge_is_invisible() {
        // on a huge unit disc A(v; th) = R^2 - (v.th)^2, so every cell is independent of R
        let disc = |r: f64| Mixture::from_spec(&DistributionSpec { dimension: 2, components: vec![ComponentSpec::Ball { center: vec![0.0, 0.0], radius: r, weight: 1.0 }] }).unwrap();
        let p = KernelParams::new(2, 0.6, -1.2, Normalization::Plain).unwrap();
        let run = |f: &Mixture| {
            let sur = Surrogate::new(f, p, QuadBudget { rel_tol: 1e-11, ..Default::default() }).unwrap();
            condition_cancellation(&sur, &[0.2, 0.5], &[Vec3::new(0.3, 0.1, 0.0)], &fast(), &Thresholds::default()).unwrap()
        };
        let (a, b) = (run(&disc(1000.0)), run(&disc(2000.0)));
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert!(x.value.is_finite() && x.value < 10.0, "{x:?}");
            assert_relative_eq!(x.value, y.value, max_relative = 1e-3, epsilon = 1e-6);
        }
    }

    #[test]
    fn cancellation_bounded_for_maxwellian() {
        let f = Mixture::maxwellian(2).unwrap();
        let sur = maxwell_surrogate(&f, 0.6, 0.0);
        let r_list = [0.1, 0.3, 0.5, 0.7, 0.9];
        let rep = condition_cancellation(&sur, &r_list, &[Vec3::new(0.5, 0.2, 0.0)], &fast(), &Thresholds::default()).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.cells_by("first").count(), r_list.len());
        assert!(rep.big_lambda_meas.unwrap() < 10.0);
    }
}
