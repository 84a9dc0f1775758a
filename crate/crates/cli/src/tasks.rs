use crate::config::{task_name, FieldSpec, GiustiFunction, RunConfig, TaskEntry, TaskSpec};
use kinetic_ellipticity::boltzmann_kernel::{
    coercivity_energies, condition_cancellation, condition_nondegeneracy, condition_upper_bound, default_family, Condition, EllipticityReport, KernelParams, Surrogate,
};
use kinetic_ellipticity::frame_transform::{uniformity_scan, KineticPoint};
use kinetic_ellipticity::kinetic_geometry::{giusti_verify, sampled_holder_norm, verify_interpolation};
use kinetic_ellipticity::landau_coeffs::{landau_ellipticity_scan, upper_direction_split};
use kinetic_ellipticity::linalg::{to_slice, to_vec3};
use kinetic_ellipticity::mass_geometry::{tube_complement_mass, worst_tube_scan, LineSpec};
use kinetic_ellipticity::observables::{check_hydro_bounds, compute_observables, moment};
use kinetic_ellipticity::quadrature::identity_suite;
use kinetic_ellipticity::{Mixture, Vec3, VerifyError};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// A CSV table: header plus rows of already formatted cells.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

pub struct Outcome {
    pub name: String,
    pub status: Status,
    pub metrics: Value,
    pub table: Option<Table>,
}

pub const TASK_KINDS: &[(&str, &str)] = &[
    ("observables", "mass, mean velocity, pressure tensor, temperature, energy, entropy and moments"),
    ("hydro_check", "mass, two-direction pressure, moment, energy and entropy bounds"),
    ("tube_scan", "smallest mass outside a tube around a line, over a grid of lines"),
    ("ellipticity", "one kernel condition (upper, nondegeneracy, coercivity, cancellation) on a grid"),
    ("uniformity", "a kernel condition across base velocities, with or without the change of variables"),
    ("landau", "transformed Landau coefficients across base velocities and the direction split"),
    ("identities", "both change-of-variables identities on a fixed integrand suite"),
    ("counterexample_sweep", "mass, tube mass and moment growth of the counterexample family"),
    ("kinetic_norms", "sampled kinetic Hoelder norms and the interpolation inequality"),
    ("giusti", "hypothesis and conclusion of the iteration lemma on sampled pairs"),
];

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn vec_cell(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

fn status(pass: bool) -> Status {
    if pass {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

pub fn run_task(i: usize, entry: &TaskEntry, cfg: &RunConfig) -> Outcome {
    let name = task_name(i, entry);
    match execute(&entry.spec, cfg) {
        Ok((status, metrics, table)) => Outcome { name, status, metrics, table: Some(table) },
        Err(e) => Outcome { name, status: Status::Error, metrics: json!({ "error": e.to_string() }), table: None },
    }
}

fn distribution(cfg: &RunConfig, name: &str) -> Result<Mixture, VerifyError> {
    let d = cfg.distributions.iter().find(|d| d.name == name).ok_or_else(|| VerifyError::InvalidParameter(format!("unknown distribution '{name}'")))?;
    d.kind.build()
}

fn kernel(cfg: &RunConfig) -> Result<KernelParams, VerifyError> {
    let k = cfg.kernel.ok_or_else(|| VerifyError::InvalidParameter("missing kernel section".into()))?;
    k.validate()?;
    if !k.admissible() {
        return Err(VerifyError::InvalidParameter(format!("kernel admissibility: gamma + 2s = {} outside [0, {}]", k.gamma + 2.0 * k.s, k.q_reference)));
    }
    Ok(k)
}

fn vectors(n: usize, list: &[Vec<f64>]) -> Result<Vec<Vec3>, VerifyError> {
    list.iter().map(|v| to_vec3(n, v)).collect()
}

fn cells_table(rep: &EllipticityReport) -> Table {
    let mut t = Table::new(&["method", "v", "r", "e", "value"]);
    for c in &rep.cells {
        t.push([c.method.clone(), vec_cell(&c.v), num(c.r), c.e.as_deref().map(vec_cell).unwrap_or_default(), num(c.value)]);
    }
    t
}

type Executed = (Status, Value, Table);

fn execute(spec: &TaskSpec, cfg: &RunConfig) -> Result<Executed, VerifyError> {
    let quad = &cfg.quad;
    match spec {
        TaskSpec::Observables { distribution: d, moments } => {
            let f = distribution(cfg, d)?;
            let rep = compute_observables(&f, moments, quad.rel_tol)?;
            let mut t = Table::new(&["q", "moment"]);
            for m in &rep.moments {
                t.push([num(m.q), num(m.value)]);
            }
            let mut metrics = to_value(&rep);
            metrics["two_direction_pressure"] = json!(rep.two_direction_pressure());
            Ok((Status::Pass, metrics, t))
        }
        TaskSpec::HydroCheck { distribution: d, thresholds } => {
            let f = distribution(cfg, d)?;
            let rep = compute_observables(&f, &[thresholds.q], quad.rel_tol)?;
            let check = check_hydro_bounds(&rep, thresholds)?;
            let mut t = Table::new(&["condition", "value", "bound", "pass"]);
            for c in &check.conditions {
                t.push([c.name.clone(), num(c.value), c.bound.clone(), c.pass.to_string()]);
            }
            let metrics = json!({ "conditions": check.conditions, "failures": check.failures() });
            Ok((status(check.all_pass()), metrics, t))
        }
        TaskSpec::TubeScan { distribution: d, delta, radius, directions, offsets, min_mass } => {
            let f = distribution(cfg, d)?;
            let scan = worst_tube_scan(&f, *delta, *radius, *directions, offsets, quad)?;
            let mut t = Table::new(&["direction", "offset", "mass"]);
            for r in &scan.rows {
                t.push([vec_cell(&r.direction), vec_cell(&r.offset), num(r.mass)]);
            }
            let n = f.dimension();
            let metrics = json!({
                "min_mass": scan.min_mass,
                "line_point": to_slice(n, &scan.line.point),
                "line_direction": to_slice(n, &scan.line.dir),
                "threshold": min_mass,
            });
            Ok((status(min_mass.map_or(true, |m| scan.min_mass >= m)), metrics, t))
        }
        TaskSpec::Ellipticity { distribution: d, condition, r_list, v_grid, settings, thresholds, coercivity_grid } => {
            let f = distribution(cfg, d)?;
            let k = kernel(cfg)?;
            let sur = Surrogate::new(&f, k, *quad)?;
            let grid = vectors(k.n, v_grid)?;
            let mut extra = Value::Null;
            let rep = match condition {
                Condition::Upper => condition_upper_bound(&sur, r_list, &grid, settings, thresholds)?,
                Condition::Nondegeneracy => condition_nondegeneracy(&sur, r_list, &grid, settings, thresholds)?,
                Condition::Cancellation => condition_cancellation(&sur, r_list, &grid, settings, thresholds)?,
                Condition::Coercivity => {
                    let (energies, rep) = coercivity_energies(&sur, &default_family(), *coercivity_grid, thresholds)?;
                    extra = to_value(&energies);
                    rep
                }
            };
            let metrics = json!({
                "condition": rep.condition.label(),
                "lambda_meas": rep.lambda_meas,
                "big_lambda_meas": rep.big_lambda_meas,
                "discrepancy": rep.discrepancy,
                "energies": extra,
            });
            Ok((status(rep.pass), metrics, cells_table(&rep)))
        }
        TaskSpec::Uniformity { distribution: d, condition, v0_list, grids, transformed, max_ratio } => {
            let f = distribution(cfg, d)?;
            let k = kernel(cfg)?;
            let v0s = vectors(k.n, v0_list)?;
            let scan = uniformity_scan(&f, &k, *condition, &v0s, grids, *transformed, quad)?;
            let mut t = Table::new(&["v0", "v0_norm", "regime", "lambda", "big_lambda", "discrepancy", "pass"]);
            let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
            for r in &scan.rows {
                t.push([vec_cell(&r.v0), num(r.v0_norm), format!("{:?}", r.regime).to_lowercase(), opt(r.lambda), opt(r.big_lambda), opt(r.discrepancy), r.pass.to_string()]);
            }
            let pass = scan.ratio <= *max_ratio && scan.rows.iter().all(|r| r.pass);
            let metrics = json!({ "condition": condition.label(), "transformed": transformed, "ratio": scan.ratio, "max_ratio": max_ratio, "rows": scan.rows });
            Ok((status(pass), metrics, t))
        }
        TaskSpec::Landau { distribution: d, gamma, v0_list, v_grid, split_points, max_ratio } => {
            let f = distribution(cfg, d)?;
            let n = f.dimension();
            let scan = landau_ellipticity_scan(&f, *gamma, &vectors(n, v0_list)?, &vectors(n, v_grid)?, quad)?;
            let split = if split_points.is_empty() { Vec::new() } else { upper_direction_split(&f, *gamma, &vectors(n, split_points)?, quad)? };
            let mut t = Table::new(&["v0", "v0_norm", "min_eig", "max_eig", "b_norm", "c_value", "c_scaled"]);
            for r in &scan.rows {
                t.push([vec_cell(&r.v0), num(r.v0_norm), num(r.min_eig), num(r.max_eig), num(r.b_norm), num(r.c_value), num(r.c_scaled)]);
            }
            let positive = scan.rows.iter().all(|r| r.min_eig > 0.0);
            let pass = positive && scan.ratio <= *max_ratio && split.iter().all(|s| s.holds);
            let c_scaled_max = scan.rows.iter().map(|r| r.c_scaled).fold(0.0, f64::max);
            let metrics = json!({ "ratio": scan.ratio, "max_ratio": max_ratio, "min_eig_positive": positive, "c_scaled_max": c_scaled_max, "rows": scan.rows, "direction_split": split });
            Ok((status(pass), metrics, t))
        }
        TaskSpec::Identities { tolerance } => {
            let suite = identity_suite(quad)?;
            let mut t = Table::new(&["case", "n", "ellipsoid", "lhs", "rhs", "rel_err"]);
            for c in &suite {
                t.push([c.name.clone(), c.n.to_string(), c.ellipsoid.to_string(), num(c.check.lhs), num(c.check.rhs), num(c.check.rel_err)]);
            }
            let worst = suite.iter().map(|c| c.check.rel_err).fold(0.0, f64::max);
            Ok((status(worst < *tolerance), json!({ "cases": suite, "max_rel_err": worst, "tolerance": tolerance }), t))
        }
        TaskSpec::CounterexampleSweep { r_list, delta, q } => {
            let line = LineSpec::new(2, &[0.0, 0.0], &[0.0, 1.0])?;
            let mut t = Table::new(&["R", "mass", "tube_mass", "tube_bound", "moment"]);
            let mut rows = Vec::new();
            for &r in r_list {
                let f = Mixture::counterexample(r)?;
                let tube = tube_complement_mass(&f, &line, *delta, f64::INFINITY, quad)?;
                let m = moment(&f, *q, quad)?;
                rows.push((r, f.mass(), tube, 4.0 / (r * r), m));
            }
            let slope = log_slope(&rows.iter().map(|r| (r.0, r.4)).collect::<Vec<_>>());
            for r in &rows {
                t.push([num(r.0), num(r.1), num(r.2), num(r.3), num(r.4)]);
            }
            let mass_ok = rows.iter().all(|r| (4.0..=8.0).contains(&r.1));
            let tube_ok = rows.iter().all(|r| r.2 <= 1.05 * r.3);
            let slope_ok = (slope - (q - 2.0)).abs() <= 0.1 * (q - 2.0);
            let metrics = json!({ "slope": slope, "expected_slope": q - 2.0, "mass_in_range": mass_ok, "tube_bound_holds": tube_ok, "slope_within_tolerance": slope_ok });
            Ok((status(mass_ok && tube_ok && slope_ok), metrics, t))
        }
        TaskSpec::KineticNorms { field, norm, epsilons, plan } => {
            let mut plan = plan.clone();
            plan.seed = cfg.seed;
            let n = norm.n;
            let mid = 0.5 * (norm.window.0 + norm.window.1);
            let f = field_fn(field, n, mid)?;
            let norms = sampled_holder_norm(&f, norm, &plan)?;
            let rows = verify_interpolation(&f, norm, epsilons, &plan)?;
            let mut t = Table::new(&["epsilon", "lhs", "holder_norm", "l1_norm", "constant", "rhs", "slack", "holds"]);
            for r in &rows {
                t.push([num(r.epsilon), num(r.lhs), num(r.holder_norm), num(r.l1_norm), num(r.constant), num(r.rhs), num(r.slack), r.holds.to_string()]);
            }
            let metrics = json!({
                "c0": norms.c0,
                "seminorm": norms.seminorm,
                "weighted_c0": norms.weighted_c0,
                "weighted_holder": norms.weighted_holder,
                "weighted_l1": norms.weighted_l1,
                "pairs": norms.pairs,
                "cylinders": norms.cylinders.len(),
                "interpolation": rows,
            });
            Ok((status(rows.iter().all(|r| r.holds)), metrics, t))
        }
        TaskSpec::Giusti { function, gamma, a, t1, t2, samples } => {
            let (g, big_t) = (*gamma, *t2);
            let func = function.clone();
            let f = move |t: f64| match func {
                GiustiFunction::Zero => 0.0,
                GiustiFunction::Power { b, shift } => b * (big_t + shift - t).powf(-g),
                GiustiFunction::Linear { offset, slope } => offset + slope * t,
            };
            let rep = giusti_verify(f, *gamma, *a, *t1, *t2, *samples)?;
            let mut t = Table::new(&["hypothesis_ok", "conclusion_ok", "c_used", "pairs", "hypothesis_violations", "conclusion_margin"]);
            let concl = rep.conclusion_ok.map(|c| c.to_string()).unwrap_or_else(|| "not_applicable".into());
            t.push([rep.hypothesis_ok.to_string(), concl, num(rep.c_used), rep.pairs.to_string(), rep.hypothesis_violations.to_string(), num(rep.conclusion_margin)]);
            Ok((status(rep.conclusion_ok != Some(false)), to_value(&rep), t))
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
fn log_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

type Field = Box<dyn Fn(&KineticPoint) -> f64 + Sync>;

fn field_fn(field: &FieldSpec, n: usize, t_mid: f64) -> Result<Field, VerifyError> {
    Ok(match field {
        FieldSpec::Zero => Box::new(|_: &KineticPoint| 0.0),
        FieldSpec::VelocityBump { center, width } => {
            let c = to_vec3(n, center)?;
            let w2 = width * width;
            Box::new(move |z: &KineticPoint| (-(z.v - c).norm_squared() / w2).exp())
        }
        FieldSpec::DecayingBump { p } => {
            let p = *p;
            Box::new(move |z: &KineticPoint| (1.0 + z.v.norm()).powf(-p) * (-(z.t - t_mid).powi(2) - z.x.norm_squared()).exp())
        }
    })
}
