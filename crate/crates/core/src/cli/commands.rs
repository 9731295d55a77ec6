use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::artifacts::{write_atomic, RunArtifacts};
use super::config::{BoxSpec, DataSource, ExperimentConfig, InitSpec, TargetSpec};
use crate::density::{AtomFamilyConfig, MixtureDensity, TruncatedGaussianAtom};
use crate::error::{Error, Result};
use crate::integrate::{derive_seed, integrate_box, integrate_interval, Estimator, McSpec, QuadratureSpec};
use crate::objective::{kl_estimate, truncation_loss, ObjectiveConstants, TargetPosterior};
use crate::solvers::{run, run_estimator, ConvergenceTrace, Init, LmoChoice, RunOutput};
use crate::targets::{
    load_dataset, meanfield_init, predictive_auc, CauchyTarget, Dataset, GaussComponent, GaussMixTarget,
    LogisticRegressionModel,
};

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::Dataset { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.solver.seed = seed;
            if let LmoChoice::Stochastic(l) = &mut cfg.solver.lmo {
                l.seed = seed;
            }
            if let InitSpec::MeanField { lmo, .. } = &mut cfg.init {
                lmo.seed = seed;
            }
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    overrides.apply(&mut cfg);
    Ok(cfg)
}

/// Everything a run needs, built from a validated config.
pub struct Experiment {
    pub target: TargetPosterior,
    pub family: AtomFamilyConfig,
    pub solver: crate::solvers::SolverConfig,
    pub test: Option<Dataset>,
    pub init: MixtureDensity,
}

fn logreg_target(data: &DataSource, n_train: usize, prior_sigma: f64, dim: usize) -> Result<(TargetPosterior, Dataset)> {
    let data = match data {
        DataSource::File(p) => load_dataset(p)?,
        DataSource::Synthetic { n, dim, seed } => Dataset::synthetic(*n, *dim, *seed)?,
    };
    if data.dim() != dim {
        return Err(Error::config("family.dim", format!("dataset has {} features", data.dim())));
    }
    if n_train >= data.len() {
        return Err(Error::config("target.n_train", format!("dataset has only {} rows", data.len())));
    }
    let (train, test) = data.split(n_train)?;
    Ok((LogisticRegressionModel::new(train, prior_sigma)?.into_target(), test))
}

fn analytic_target(spec: &TargetSpec, family: &AtomFamilyConfig) -> Result<TargetPosterior> {
    match spec {
        TargetSpec::Cauchy { location, scale } => {
            Ok(CauchyTarget::new(*location, *scale, (*family.support).clone())?.into_target())
        }
        TargetSpec::GaussMix { components } => Ok(gauss_mix(components, family)?.into_target()),
        TargetSpec::LogReg { .. } => unreachable!("handled by the caller"),
    }
}

fn gauss_mix(components: &[(f64, Vec<f64>, f64)], family: &AtomFamilyConfig) -> Result<GaussMixTarget> {
    let comps = components
        .iter()
        .map(|(w, m, s)| GaussComponent {
            weight: *w,
            mean: m.clone(),
            sigma: *s,
        })
        .collect();
    GaussMixTarget::new(comps, family.support.clone())
        .map_err(|e| Error::config("target.components", e.to_string()))
}

impl Experiment {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let dim = cfg.family.dim;
        let (target, test) = match &cfg.target {
            TargetSpec::LogReg { data, n_train, prior_sigma } => {
                let (t, test) = logreg_target(data, *n_train, *prior_sigma, dim)?;
                (Some(t), Some(test))
            }
            _ => (None, None),
        };
        let (family, init) = match &cfg.init {
            InitSpec::Center => {
                let family = cfg
                    .fixed_family()?
                    .ok_or_else(|| Error::config("family.radius", "needs init.kind = meanfield"))?;
                let q0 = MixtureDensity::single(family.center_atom()?);
                (family, q0)
            }
            InitSpec::MeanField { lower, upper, lmo } => {
                let wide = cfg.family_on(lower.clone(), upper.clone())?;
                let fit_target = match &target {
                    Some(t) => t.clone(),
                    None => analytic_target(&cfg.target, &wide)?,
                };
                let est = run_estimator(&cfg.solver, dim);
                let fit = meanfield_init(&fit_target, &wide, lmo, &est)?;
                let atom = &fit.atoms()[0];
                let family = match &cfg.family.bounds {
                    BoxSpec::Bounds { .. } => cfg.fixed_family()?.expect("explicit bounds"),
                    BoxSpec::AroundInit { radius } => cfg.family_on(
                        atom.mean().iter().map(|m| m - radius).collect(),
                        atom.mean().iter().map(|m| m + radius).collect(),
                    )?,
                };
                let q0 = MixtureDensity::single(family.atom(atom.mean(), atom.sigma())?);
                (family, q0)
            }
        };
        let target = match target {
            Some(t) => t,
            None => analytic_target(&cfg.target, &family)?,
        };
        target.validate_on(&family.support)?;
        let mut solver = cfg.solver.clone();
        solver.init = Init::Mixture(init.clone());
        Ok(Self {
            target,
            family,
            solver,
            test,
            init,
        })
    }
}

fn metrics_for(cfg: &ExperimentConfig, exp: &Experiment, q: &MixtureDensity) -> Result<Value> {
    let mut m = serde_json::Map::new();
    let label = exp.target.objective_label();
    if cfg.metrics.kl_quadrature && exp.target.reports_kl() {
        let v = kl_estimate(q, &exp.target, &Estimator::Quadrature(QuadratureSpec::default()))?;
        m.insert(format!("{label}_quadrature"), json!(v.value));
    }
    if cfg.metrics.kl_mc {
        let spec = McSpec::new(cfg.metrics.kl_mc_samples, derive_seed(cfg.seed, 0x6b6c))?;
        let v = kl_estimate(q, &exp.target, &Estimator::MonteCarlo(spec))?;
        m.insert(format!("{label}_mc"), json!(v.value));
        m.insert(format!("{label}_mc_stderr"), json!(v.stderr));
    }
    if cfg.metrics.auc {
        if let Some(test) = &exp.test {
            let a = predictive_auc(q, test, cfg.metrics.auc_samples, derive_seed(cfg.seed, 0x0a0c))?;
            m.insert("auc".into(), json!(a));
        }
    }
    Ok(Value::Object(m))
}

fn constants_json(c: &ObjectiveConstants, used: f64) -> Value {
    json!({
        "epsilon": c.epsilon,
        "m_upper": c.m_upper,
        "l_smooth": c.l_smooth,
        "lebesgue": c.lebesgue,
        "diameter_sq_lebesgue": c.diameter.lebesgue_bound,
        "diameter_sq_gaussian": c.diameter.gaussian_bound,
        "diameter_sq": c.diameter.value,
        "curvature_bound": c.curvature_bound,
        "curvature_lebesgue_bound": c.lebesgue_curvature_bound,
        "curvature_used": used,
    })
}

fn atom_json(a: &TruncatedGaussianAtom) -> Value {
    json!({ "mean": a.mean(), "sigma": a.sigma() })
}

fn summary_json(
    cfg: &ExperimentConfig,
    trace: &ConvergenceTrace,
    mixture: Option<&MixtureDensity>,
    extra: serde_json::Map<String, Value>,
) -> Value {
    let last = trace.last();
    let mut v = json!({
        "algorithm": cfg.solver.algorithm.name(),
        "objective_label": trace.objective_label,
        "iterations": last.map(|r| r.t).unwrap_or(0),
        "converged": trace.converged,
        "final_objective": last.map(|r| r.objective.value),
        "final_objective_stderr": last.map(|r| r.objective.stderr),
        "events": trace.events.iter().map(|e| json!({ "t": e.t, "kind": e.kind, "detail": e.detail })).collect::<Vec<_>>(),
    });
    if let Some(q) = mixture {
        v["active_atoms"] = json!(q.len());
        v["weights"] = json!(q.weights());
        v["atoms"] = Value::Array(q.atoms().iter().map(atom_json).collect());
    }
    for (k, x) in extra {
        v[k] = x;
    }
    v
}

fn write_outputs(
    cfg: &ExperimentConfig,
    trace: &ConvergenceTrace,
    summary: &Value,
) -> Result<RunArtifacts> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let artifacts = RunArtifacts::in_dir(dir);
    write_atomic(&artifacts.trace, trace.to_csv(cfg.record_wallclock).as_bytes())?;
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| Error::Numeric(e.to_string()))?;
    text.push('\n');
    write_atomic(&artifacts.summary, text.as_bytes())?;
    write_atomic(&artifacts.config, cfg.to_text().as_bytes())?;
    Ok(artifacts)
}

/// Result of one configured run, successful or not.
pub struct RunReport {
    pub artifacts: RunArtifacts,
    pub output: std::result::Result<RunOutput, CliError>,
}

/// Build, run and write artifacts. Config problems return `Err`; solver
/// failures still write the partial trace and come back inside the report.
pub fn execute(cfg: &ExperimentConfig) -> std::result::Result<RunReport, CliError> {
    let exp = Experiment::build(cfg)?;
    let mut extra = serde_json::Map::new();
    extra.insert("seed".into(), json!(cfg.seed));
    extra.insert("init_metrics".into(), metrics_for(cfg, &exp, &exp.init)?);
    match run(&exp.solver, &exp.family, &exp.target) {
        Ok(out) => {
            extra.insert("status".into(), json!("ok"));
            extra.insert("constants".into(), constants_json(&out.constants, out.curvature));
            extra.insert("metrics".into(), metrics_for(cfg, &exp, &out.mixture)?);
            let summary = summary_json(cfg, &out.trace, Some(&out.mixture), extra);
            let artifacts = write_outputs(cfg, &out.trace, &summary)?;
            Ok(RunReport {
                artifacts,
                output: Ok(out),
            })
        }
        Err(fail) => {
            extra.insert("status".into(), json!("failed"));
            extra.insert("error".into(), json!(fail.error.to_string()));
            let summary = summary_json(cfg, &fail.trace, fail.mixture.as_ref(), extra);
            let artifacts = write_outputs(cfg, &fail.trace, &summary)?;
            Ok(RunReport {
                artifacts,
                output: Err(CliError::runtime(format!("solver failed: {}", fail.error))),
            })
        }
    }
}

pub fn cmd_run(config: &Path, overrides: &Overrides) -> std::result::Result<RunArtifacts, CliError> {
    let cfg = load_config(config, overrides)?;
    let report = execute(&cfg)?;
    let out = report.output?;
    let last = out.trace.last().expect("trace has an initial row");
    println!(
        "{}: {} iterations, {} = {} ± {}, {} atoms",
        cfg.solver.algorithm,
        last.t,
        out.trace.objective_label,
        last.objective.value,
        last.objective.stderr,
        out.mixture.len()
    );
    println!("trace   {}", report.artifacts.trace.display());
    println!("summary {}", report.artifacts.summary.display());
    println!("config  {}", report.artifacts.config.display());
    Ok(report.artifacts)
}

/// Merged per-iteration table: `t` then one objective/gap column pair per run.
pub fn merged_csv(labels: &[String], traces: &[ConvergenceTrace]) -> String {
    let mut out = String::from("t");
    for l in labels {
        let _ = write!(out, ",{l}_objective,{l}_gap");
    }
    out.push('\n');
    let rows = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
    for i in 0..rows {
        let _ = write!(out, "{i}");
        for tr in traces {
            match tr.records.get(i) {
                Some(r) => {
                    let gap = r.gap.map(|g| g.value.to_string()).unwrap_or_default();
                    let _ = write!(out, ",{},{gap}", r.objective.value);
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn cmd_compare(configs: &[PathBuf], overrides: &Overrides) -> std::result::Result<PathBuf, CliError> {
    if configs.len() < 2 {
        return Err(Error::config("compare", "needs at least two configs").into());
    }
    let mut cfgs = Vec::with_capacity(configs.len());
    for p in configs {
        cfgs.push(load_config(p, overrides)?);
    }
    let shared = |c: &ExperimentConfig| -> Vec<String> {
        c.non_solver_lines().into_iter().filter(|l| !l.starts_with("run.output_dir")).collect()
    };
    let base = shared(&cfgs[0]);
    for (p, c) in configs.iter().zip(&cfgs).skip(1) {
        let other = shared(c);
        if let Some(line) = other.iter().find(|l| !base.contains(l)).or_else(|| base.iter().find(|l| !other.contains(l))) {
            let field = line.split('=').next().unwrap_or("").trim().to_string();
            return Err(Error::config(
                field,
                format!("{} differs from {} outside the solver and lmo settings", p.display(), configs[0].display()),
            )
            .into());
        }
    }
    let root = overrides.out.clone().unwrap_or_else(|| cfgs[0].output_dir.clone());
    let mut labels: Vec<String> = Vec::new();
    let mut traces = Vec::new();
    let mut failure = None;
    println!("{:<18} {:>6} {:>22} {:>12} {:>6}", "run", "iters", "final objective", "stderr", "atoms");
    for (i, mut cfg) in cfgs.into_iter().enumerate() {
        let mut label = cfg.solver.algorithm.name().to_string();
        if labels.contains(&label) {
            label = format!("{label}_{i}");
        }
        cfg.output_dir = root.join(&label);
        let report = execute(&cfg)?;
        match report.output {
            Ok(out) => {
                let last = out.trace.last().expect("trace has an initial row");
                println!(
                    "{:<18} {:>6} {:>22.6e} {:>12.3e} {:>6}",
                    label,
                    last.t,
                    last.objective.value,
                    last.objective.stderr,
                    out.mixture.len()
                );
                traces.push(out.trace);
            }
            Err(e) => {
                println!("{label:<18} failed: {}", e.message);
                traces.push(ConvergenceTrace::default());
                failure.get_or_insert(e);
            }
        }
        labels.push(label);
    }
    std::fs::create_dir_all(&root).map_err(Error::from)?;
    let merged = root.join("compare.csv");
    write_atomic(&merged, merged_csv(&labels, &traces).as_bytes())?;
    println!("merged  {}", merged.display());
    match failure {
        Some(e) => Err(e),
        None => Ok(merged),
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Check {
    pub name: String,
    /// "pass", "fail" or "skipped"
    pub status: String,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: Option<bool>, detail: String) -> Self {
        let status = match pass {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "skipped",
        };
        Self {
            name: name.into(),
            status: status.into(),
            detail,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VerifyReport {
    pub dim: usize,
    pub constants: ObjectiveConstants,
    pub truncation_loss: Option<f64>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != "fail")
    }
}

fn gaussian_square_check(sigma: f64) -> Result<(f64, f64)> {
    let spec = QuadratureSpec::new(1e-13, 1e-12, 4000)?;
    let pdf = |z: f64| (-0.5 * z * z / (sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let got = integrate_interval(|z| pdf(z) * pdf(z), -12.0 * sigma, 12.0 * sigma, &spec)?.value;
    let want = 1.0 / (sigma * 2.0 * std::f64::consts::PI.sqrt());
    Ok((got, want))
}

/// Family constants plus quadrature spot-checks (skipped for d > 2).
pub fn verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let dim = cfg.family.dim;
    let family = match cfg.fixed_family()? {
        Some(f) => f,
        None => Experiment::build(cfg)?.family,
    };
    let c = ObjectiveConstants::for_family(&family);
    let quad = dim <= 2;
    let mut checks = Vec::new();

    // the bound is formed in log space, so compare with a rounding allowance
    let l_diam = c.l_smooth * c.diameter.value;
    let chain = c.curvature_bound <= l_diam * (1.0 + 1e-12) && l_diam <= c.lebesgue_curvature_bound * (1.0 + 1e-12);
    checks.push(Check::new(
        "curvature_chain",
        Some(chain),
        format!("{:e} <= {l_diam:e} <= {:e}", c.curvature_bound, c.lebesgue_curvature_bound),
    ));

    if quad {
        let mut worst = 0.0f64;
        for s in [family.sigma_min, family.sigma_max] {
            let (got, want) = gaussian_square_check(s)?;
            worst = worst.max((got - want).abs());
        }
        checks.push(Check::new("gaussian_square_integral", Some(worst <= 1e-8), format!("max abs error {worst:e}")));
    } else {
        checks.push(Check::new("gaussian_square_integral", None, format!("d = {dim} > 2")));
    }

    // ε and M are attained by the σ_min atom at the lower corner.
    let corner = family.atom(family.support.lower(), family.sigma_min)?;
    let lower_pdf = corner.log_pdf(family.support.upper())?;
    let peak = corner.log_pdf(family.support.lower())?;
    let b = family.bounds();
    let attained = (lower_pdf - b.log_epsilon).abs() <= 1e-9 * (1.0 + b.log_epsilon.abs())
        && (peak - b.log_m_upper).abs() <= 1e-9 * (1.0 + b.log_m_upper.abs());
    checks.push(Check::new(
        "epsilon_m_attained",
        Some(attained),
        format!("log ε = {}, log M = {}", b.log_epsilon, b.log_m_upper),
    ));

    let mut trunc = None;
    let exp_target = match &cfg.target {
        TargetSpec::LogReg { .. } => None,
        spec => Some(analytic_target(spec, &family)?),
    };
    match (&exp_target, quad) {
        (Some(t), true) => {
            let mass = integrate_box(|z| t.log_target(z).exp(), &family.support, &QuadratureSpec::default())?.value;
            checks.push(Check::new(
                "target_normalized",
                Some((mass - 1.0).abs() <= 1e-8),
                format!("mass {mass}"),
            ));
            trunc = Some(match &cfg.target {
                TargetSpec::Cauchy { location, scale } => {
                    let ct = CauchyTarget::new(*location, *scale, (*family.support).clone())?;
                    truncation_loss(&ct.full_target(), &family.support, &Estimator::Quadrature(QuadratureSpec::default()))?
                }
                TargetSpec::GaussMix { components } => -gauss_mix(components, &family)?.box_mass().min(1.0).ln(),
                TargetSpec::LogReg { .. } => unreachable!(),
            });
        }
        (Some(_), false) => checks.push(Check::new("target_normalized", None, format!("d = {dim} > 2"))),
        (None, _) => checks.push(Check::new("target_normalized", None, "unnormalized target".into())),
    }

    Ok(VerifyReport {
        dim,
        constants: c,
        truncation_loss: trunc,
        checks,
    })
}

pub fn render_verify(r: &VerifyReport) -> String {
    let c = &r.constants;
    let mut out = String::new();
    let _ = writeln!(out, "d                         {}", r.dim);
    let _ = writeln!(out, "epsilon                   {:e}", c.epsilon);
    let _ = writeln!(out, "M                         {:e}", c.m_upper);
    let _ = writeln!(out, "L = 1/epsilon             {:e}", c.l_smooth);
    let _ = writeln!(out, "lebesgue                  {:e}", c.lebesgue);
    let _ = writeln!(out, "diam^2 (4 M^2 L(A))       {:e}", c.diameter.lebesgue_bound);
    let _ = writeln!(out, "diam^2 (gaussian)         {:e}", c.diameter.gaussian_bound);
    let _ = writeln!(out, "curvature bound           {:e}", c.curvature_bound);
    let _ = writeln!(out, "4 M^2 L(A) / epsilon      {:e}", c.lebesgue_curvature_bound);
    let _ = writeln!(out, "information loss const    {:e}", c.information_loss_constant);
    let _ = writeln!(out, "information loss (chain)  {:e}", c.information_loss_chain);
    match r.truncation_loss {
        Some(v) => {
            let _ = writeln!(out, "truncation loss           {v}");
        }
        None => {
            let _ = writeln!(out, "truncation loss           n/a");
        }
    }
    for ch in &r.checks {
        let _ = writeln!(out, "[{}] {} ({})", ch.status, ch.name, ch.detail);
    }
    out
}

pub fn cmd_verify(config: &Path, overrides: &Overrides, as_json: bool) -> std::result::Result<bool, CliError> {
    let cfg = load_config(config, overrides)?;
    let report = verify(&cfg)?;
    if as_json {
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
        println!("{text}");
    } else {
        print!("{}", render_verify(&report));
    }
    Ok(report.passed())
}
