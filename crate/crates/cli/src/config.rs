use kinetic_ellipticity::boltzmann_kernel::{CoercivityGrid, Condition, ConditionSettings, KernelParams, Thresholds};
use kinetic_ellipticity::frame_transform::ScanGrids;
use kinetic_ellipticity::kinetic_geometry::{NormSpec, SamplePlan};
use kinetic_ellipticity::observables::HydroThresholds;
use kinetic_ellipticity::quadrature::QuadBudget;
use kinetic_ellipticity::{ComponentSpec, DistributionSpec, Mixture};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub kernel: Option<KernelParams>,
    #[serde(default)]
    pub distributions: Vec<NamedDistribution>,
    #[serde(default)]
    pub tasks: Vec<TaskEntry>,
    #[serde(default)]
    pub quad: QuadBudget,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedDistribution {
    pub name: String,
    #[serde(flatten)]
    pub kind: DistributionKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Maxwellian { n: usize },
    SqueezedGaussian { eps: f64, axis: Vec<f64> },
    Counterexample { r: f64 },
    Mixture { dimension: usize, components: Vec<ComponentSpec> },
}

impl DistributionKind {
    pub fn build(&self) -> kinetic_ellipticity::Result<Mixture> {
        match self {
            DistributionKind::Maxwellian { n } => Mixture::maxwellian(*n),
            DistributionKind::SqueezedGaussian { eps, axis } => Mixture::squeezed_gaussian(*eps, axis),
            DistributionKind::Counterexample { r } => Mixture::counterexample(*r),
            DistributionKind::Mixture { dimension, components } => Mixture::from_spec(&DistributionSpec { dimension: *dimension, components: components.clone() }),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskEntry {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: TaskSpec,
}

fn default_moments() -> Vec<f64> {
    vec![2.0, 3.0, 4.0]
}
fn default_directions() -> usize {
    24
}
fn default_offsets() -> Vec<f64> {
    (-4..=4).map(|k| k as f64 * 0.5).collect()
}
fn default_ratio() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}
fn default_tolerance() -> f64 {
    1e-2
}
fn default_delta() -> f64 {
    0.5
}
fn default_q() -> f64 {
    3.0
}
fn default_samples() -> usize {
    200
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskSpec {
    Observables {
        distribution: String,
        #[serde(default = "default_moments")]
        moments: Vec<f64>,
    },
    HydroCheck {
        distribution: String,
        thresholds: HydroThresholds,
    },
    TubeScan {
        distribution: String,
        delta: f64,
        radius: f64,
        #[serde(default = "default_directions")]
        directions: usize,
        #[serde(default = "default_offsets")]
        offsets: Vec<f64>,
        #[serde(default)]
        min_mass: Option<f64>,
    },
    Ellipticity {
        distribution: String,
        condition: Condition,
        r_list: Vec<f64>,
        v_grid: Vec<Vec<f64>>,
        #[serde(default)]
        settings: ConditionSettings,
        #[serde(default)]
        thresholds: Thresholds,
        #[serde(default)]
        coercivity_grid: CoercivityGrid,
    },
    Uniformity {
        distribution: String,
        condition: Condition,
        v0_list: Vec<Vec<f64>>,
        grids: ScanGrids,
        #[serde(default = "default_true")]
        transformed: bool,
        #[serde(default = "default_ratio")]
        max_ratio: f64,
    },
    Landau {
        distribution: String,
        gamma: f64,
        v0_list: Vec<Vec<f64>>,
        v_grid: Vec<Vec<f64>>,
        #[serde(default)]
        split_points: Vec<Vec<f64>>,
        #[serde(default = "default_ratio")]
        max_ratio: f64,
    },
    Identities {
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    CounterexampleSweep {
        r_list: Vec<f64>,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_q")]
        q: f64,
    },
    KineticNorms {
        field: FieldSpec,
        norm: NormSpec,
        epsilons: Vec<f64>,
        #[serde(default)]
        plan: SamplePlan,
    },
    Giusti {
        function: GiustiFunction,
        gamma: f64,
        a: f64,
        t1: f64,
        t2: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Observables { .. } => "observables",
            TaskSpec::HydroCheck { .. } => "hydro_check",
            TaskSpec::TubeScan { .. } => "tube_scan",
            TaskSpec::Ellipticity { .. } => "ellipticity",
            TaskSpec::Uniformity { .. } => "uniformity",
            TaskSpec::Landau { .. } => "landau",
            TaskSpec::Identities { .. } => "identities",
            TaskSpec::CounterexampleSweep { .. } => "counterexample_sweep",
            TaskSpec::KineticNorms { .. } => "kinetic_norms",
            TaskSpec::Giusti { .. } => "giusti",
        }
    }

    pub fn distribution(&self) -> Option<&str> {
        match self {
            TaskSpec::Observables { distribution, .. }
            | TaskSpec::HydroCheck { distribution, .. }
            | TaskSpec::TubeScan { distribution, .. }
            | TaskSpec::Ellipticity { distribution, .. }
            | TaskSpec::Uniformity { distribution, .. }
            | TaskSpec::Landau { distribution, .. } => Some(distribution),
            _ => None,
        }
    }

    fn needs_kernel(&self) -> bool {
        matches!(self, TaskSpec::Ellipticity { .. } | TaskSpec::Uniformity { .. })
    }
}

/// Test fields for the interpolation check.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Zero,
    /// `exp(-|v - center|^2 / width^2)`.
    VelocityBump { center: Vec<f64>, width: f64 },
    /// `(1 + |v|)^{-p} exp(-(t - t_mid)^2 - |x|^2)` with `t_mid` the window midpoint.
    DecayingBump { p: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GiustiFunction {
    Zero,
    /// `b (t2 + shift - t)^{-gamma}`.
    Power { b: f64, shift: f64 },
    /// `offset + slope t`.
    Linear { offset: f64, slope: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn diag(path: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic { path: path.into(), message: message.into() }
}

/// Parses a config; syntax and schema errors carry the line and column.
pub fn parse(text: &str) -> Result<RunConfig, Diagnostic> {
    serde_json::from_str(text).map_err(|e| diag(format!("line {} column {}", e.line(), e.column()), e.to_string()))
}

/// Schema and admissibility checks that do not run anything.
pub fn validate(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut names = std::collections::BTreeSet::new();
    for (i, d) in cfg.distributions.iter().enumerate() {
        if !names.insert(d.name.as_str()) {
            out.push(diag(format!("distributions[{i}].name"), format!("duplicate distribution name '{}'", d.name)));
        }
        if let Err(e) = d.kind.build() {
            out.push(diag(format!("distributions[{i}]"), e.to_string()));
        }
    }
    if let Err(e) = cfg.quad.validate() {
        out.push(diag("quad", e.to_string()));
    }
    if let Some(k) = &cfg.kernel {
        if let Err(e) = k.validate() {
            out.push(diag("kernel", e.to_string()));
        }
    }
    let mut task_names = std::collections::BTreeSet::new();
    for (i, t) in cfg.tasks.iter().enumerate() {
        let path = format!("tasks[{i}]");
        if !task_names.insert(task_name(i, t)) {
            out.push(diag(format!("{path}.name"), format!("duplicate task name '{}'", task_name(i, t))));
        }
        if let Some(name) = t.spec.distribution() {
            match cfg.distributions.iter().find(|d| d.name == name) {
                None => out.push(diag(format!("{path}.distribution"), format!("unknown distribution '{name}'"))),
                Some(d) => {
                    if let (Some(k), Ok(f)) = (&cfg.kernel, d.kind.build()) {
                        if t.spec.needs_kernel() && f.dimension() != k.n {
                            out.push(diag(format!("{path}.distribution"), format!("distribution '{name}' has dimension {} but the kernel has n = {}", f.dimension(), k.n)));
                        }
                    }
                }
            }
        }
        if t.spec.needs_kernel() {
            match &cfg.kernel {
                None => out.push(diag(path.clone(), "task needs a kernel section")),
                Some(k) if !k.admissible() => out.push(diag(
                    "kernel",
                    format!("kernel admissibility: gamma + 2s = {} must lie in [0, {}] for {} tasks", k.gamma + 2.0 * k.s, k.q_reference, t.spec.kind()),
                )),
                _ => {}
            }
        }
        task_checks(&path, &t.spec, cfg, &mut out);
    }
    out.dedup();
    out
}

pub fn task_name(i: usize, t: &TaskEntry) -> String {
    t.name.clone().unwrap_or_else(|| format!("{:02}_{}", i, t.spec.kind()))
}

fn task_checks(path: &str, spec: &TaskSpec, cfg: &RunConfig, out: &mut Vec<Diagnostic>) {
    let mut push = |field: &str, msg: String| out.push(diag(format!("{path}.{field}"), msg));
    match spec {
        TaskSpec::Ellipticity { r_list, v_grid, settings, .. } => {
            if r_list.is_empty() || r_list.iter().any(|r| !(*r > 0.0)) {
                push("r_list", "radii must be a nonempty list of positive numbers".into());
            }
            if v_grid.is_empty() {
                push("v_grid", "empty velocity grid".into());
            }
            if let Err(e) = settings.validate() {
                push("settings", e.to_string());
            }
        }
        TaskSpec::Uniformity { v0_list, grids, .. } => {
            if v0_list.is_empty() {
                push("v0_list", "empty base velocity list".into());
            }
            if grids.r_list.is_empty() || grids.v_grid.is_empty() {
                push("grids", "radii and velocity grid must be nonempty".into());
            }
        }
        TaskSpec::Landau { gamma, v0_list, v_grid, .. } => {
            if *gamma < 0.0 {
                push("gamma", format!("the Landau scan needs gamma >= 0, got {gamma}"));
            }
            if v0_list.is_empty() || v_grid.is_empty() {
                push("v0_list", "empty scan grid".into());
            }
        }
        TaskSpec::CounterexampleSweep { r_list, q, .. } => {
            if r_list.len() < 2 || r_list.iter().any(|r| !(*r > 1.0)) {
                push("r_list", "need at least two radii, each above 1".into());
            }
            if !(*q > 2.0) {
                push("q", format!("moment order must exceed 2, got {q}"));
            }
        }
        TaskSpec::KineticNorms { norm, epsilons, plan, .. } => {
            if let Err(e) = norm.validate() {
                push("norm", e.to_string());
            }
            if let Err(e) = plan.validate() {
                push("plan", e.to_string());
            }
            if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                push("epsilons", "epsilons must be a nonempty list in (0, 1)".into());
            }
            match &cfg.kernel {
                None => push("norm.p", "the weight range check needs a kernel section".into()),
                Some(k) => {
                    let n = norm.n as f64;
                    let low = norm.p > norm.alpha && norm.p < n - 1.0;
                    let high = norm.p > n + k.gamma + 2.0 * k.s;
                    if !(low || high) {
                        push("norm.p", format!("p = {} outside ({}, {}) U ({}, inf)", norm.p, norm.alpha, n - 1.0, n + k.gamma + 2.0 * k.s));
                    }
                }
            }
        }
        TaskSpec::Giusti { gamma, a, t1, t2, samples, .. } => {
            if !(*gamma > 0.0) || !(*a >= 0.0) || !(t1 < t2) || *samples < 2 {
                push("gamma", "need gamma > 0, a >= 0, t1 < t2 and at least two samples".into());
            }
        }
        TaskSpec::Identities { tolerance } => {
            if !(*tolerance > 0.0) {
                push("tolerance", "tolerance must be positive".into());
            }
        }
        TaskSpec::TubeScan { delta, radius, directions, .. } => {
            if !(*delta > 0.0 && *radius > 0.0) || *directions == 0 {
                push("delta", "tube radius, ball radius and direction count must be positive".into());
            }
        }
        TaskSpec::Observables { .. } | TaskSpec::HydroCheck { .. } => {}
    }
}
