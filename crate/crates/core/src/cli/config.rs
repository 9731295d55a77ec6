//! Flat `section.key = value` experiment configs.
//!
//! Every key is typed and checked; unknown keys are rejected so that a typo in
//! a sweep fails loudly instead of silently falling back to a default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::density::{AtomFamilyConfig, SupportBox};
use crate::error::{Error, Result};
use crate::lmo::{GridSpec, LmoConfig, VarianceReduction};
use crate::solvers::{Algorithm, LmoChoice, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Cauchy {
        location: f64,
        scale: f64,
    },
    /// Components as (weight, mean, σ).
    GaussMix {
        components: Vec<(f64, Vec<f64>, f64)>,
    },
    LogReg {
        data: DataSource,
        n_train: usize,
        prior_sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic { n: usize, dim: usize, seed: u64 },
}

/// Where the atom box comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BoxSpec {
    Bounds { lower: Vec<f64>, upper: Vec<f64> },
    /// Half-width around the mean-field mean (requires `init.kind = meanfield`).
    AroundInit { radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub dim: usize,
    pub bounds: BoxSpec,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub mean_stride: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Box center at σ_max.
    Center,
    /// A single-atom fit on its own (wide) box.
    MeanField {
        lower: Vec<f64>,
        upper: Vec<f64>,
        lmo: LmoConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSpec {
    pub kl_quadrature: bool,
    pub kl_mc: bool,
    pub kl_mc_samples: usize,
    pub auc: bool,
    pub auc_samples: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub family: FamilySpec,
    pub init: InitSpec,
    /// `init` and `seed` inside are filled in when the experiment is built.
    pub solver: SolverConfig,
    pub metrics: MetricsSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub record_wallclock: bool,
}

/// Raw key/value pairs with the line each came from.
struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", i + 1), format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim().to_string();
            if !key.contains('.') {
                return Err(Error::config(key, "keys must be `section.name`"));
            }
            if map.insert(key.clone(), (value.trim().to_string(), i + 1)).is_some() {
                return Err(Error::config(key, "given more than once"));
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|(v, _)| v)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.parsed(key)?.ok_or_else(|| Error::config(key, "required"))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key).as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
        }
    }

    /// Whitespace-separated reals; a single value is broadcast to `dim`.
    fn vector(&mut self, key: &str, dim: usize) -> Result<Vec<f64>> {
        let v = self.take(key).ok_or_else(|| Error::config(key, "required"))?;
        let xs = v
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::config(key, format!("cannot parse `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        match xs.len() {
            1 => Ok(vec![xs[0]; dim]),
            n if n == dim => Ok(xs),
            n => Err(Error::config(key, format!("expected 1 or {dim} values, got {n}"))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, (_, line))) => Err(Error::config(k, format!("unknown key (line {line})"))),
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    if v.iter().all(|x| *x == v[0]) {
        return v[0].to_string();
    }
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_lmo(e: &mut Entries, prefix: &str, seed: u64) -> Result<LmoConfig> {
    let d = LmoConfig::default();
    let key = |k: &str| format!("{prefix}.{k}");
    let vr = match e.take(&key("variance_reduction")).as_deref() {
        None | Some("leave_one_out") => VarianceReduction::LeaveOneOut,
        Some("none") => VarianceReduction::None,
        Some(v) => return Err(Error::config(key("variance_reduction"), format!("expected none or leave_one_out, got `{v}`"))),
    };
    let cfg = LmoConfig {
        inner_steps: e.or(&key("inner_steps"), d.inner_steps)?,
        step_size: e.or(&key("step_size"), d.step_size)?,
        samples: e.or(&key("samples"), d.samples)?,
        restarts: e.or(&key("restarts"), d.restarts)?,
        learn_sigma: e.bool_or(&key("learn_sigma"), d.learn_sigma)?,
        seed,
        variance_reduction: vr,
    };
    cfg.validate()
        .map_err(|err| match err {
            Error::Config { field, message } => Error::config(format!("{prefix}.{}", field.trim_start_matches("lmo.")), message),
            other => other,
        })?;
    Ok(cfg)
}

fn write_lmo(out: &mut String, prefix: &str, cfg: &LmoConfig) {
    let vr = match cfg.variance_reduction {
        VarianceReduction::None => "none",
        VarianceReduction::LeaveOneOut => "leave_one_out",
    };
    let _ = writeln!(out, "{prefix}.inner_steps = {}", cfg.inner_steps);
    let _ = writeln!(out, "{prefix}.step_size = {}", cfg.step_size);
    let _ = writeln!(out, "{prefix}.samples = {}", cfg.samples);
    let _ = writeln!(out, "{prefix}.restarts = {}", cfg.restarts);
    let _ = writeln!(out, "{prefix}.learn_sigma = {}", cfg.learn_sigma);
    let _ = writeln!(out, "{prefix}.variance_reduction = {vr}");
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Relative dataset and output paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let seed: u64 = e.or("run.seed", 0)?;
        let output_dir = base.join(e.take("run.output_dir").unwrap_or_else(|| "out".into()));
        let record_wallclock = e.bool_or("run.record_wallclock", false)?;

        let kind = e.take("target.kind").ok_or_else(|| Error::config("target.kind", "required"))?;
        let target = match kind.as_str() {
            "cauchy" => TargetSpec::Cauchy {
                location: e.or("target.location", 0.0)?,
                scale: e.or("target.scale", 1.0)?,
            },
            "gauss_mix" => {
                let raw = e.take("target.components").ok_or_else(|| Error::config("target.components", "required"))?;
                let mut components = Vec::new();
                for part in raw.split(';') {
                    let xs = part
                        .split_whitespace()
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<Vec<f64>, _>>()
                        .map_err(|_| Error::config("target.components", format!("cannot parse `{part}`")))?;
                    if xs.len() < 3 {
                        return Err(Error::config("target.components", "each component is `weight mean... sigma`"));
                    }
                    components.push((xs[0], xs[1..xs.len() - 1].to_vec(), xs[xs.len() - 1]));
                }
                TargetSpec::GaussMix { components }
            }
            "logreg" => {
                let data = match e.take("target.dataset").as_deref() {
                    None => return Err(Error::config("target.dataset", "required (a CSV path or `synthetic`)")),
                    Some("synthetic") => DataSource::Synthetic {
                        n: e.or("target.synthetic_n", 2500)?,
                        dim: e.or("target.synthetic_dim", 100)?,
                        seed: e.or("target.synthetic_seed", 0)?,
                    },
                    Some(p) => DataSource::File(base.join(p)),
                };
                TargetSpec::LogReg {
                    data,
                    n_train: e.required("target.n_train")?,
                    prior_sigma: e.or("target.prior_sigma", 1.0)?,
                }
            }
            other => {
                return Err(Error::config("target.kind", format!("expected cauchy, gauss_mix or logreg, got `{other}`")))
            }
        };

        let dim: usize = e.required("family.dim")?;
        if dim == 0 {
            return Err(Error::config("family.dim", "must be at least 1"));
        }
        let bounds = match e.parsed::<f64>("family.radius")? {
            Some(radius) => BoxSpec::AroundInit { radius },
            None => BoxSpec::Bounds {
                lower: e.vector("family.lower", dim)?,
                upper: e.vector("family.upper", dim)?,
            },
        };
        let family = FamilySpec {
            dim,
            bounds,
            sigma_min: e.required("family.sigma_min")?,
            sigma_max: e.required("family.sigma_max")?,
            mean_stride: e.or("family.mean_stride", 0.0)?,
        };

        let init = match e.take("init.kind").as_deref() {
            None | Some("center") => InitSpec::Center,
            Some("meanfield") => InitSpec::MeanField {
                lower: e.vector("init.lower", dim)?,
                upper: e.vector("init.upper", dim)?,
                lmo: parse_lmo(&mut e, "init", seed)?,
            },
            Some(v) => return Err(Error::config("init.kind", format!("expected center or meanfield, got `{v}`"))),
        };

        let lmo = match e.take("lmo.kind").as_deref() {
            None | Some("grid") => LmoChoice::Grid(GridSpec {
                means_per_dim: e.or("lmo.means_per_dim", 101)?,
                sigmas: e.or("lmo.sigmas", 6)?,
            }),
            Some("stochastic") => LmoChoice::Stochastic(parse_lmo(&mut e, "lmo", seed)?),
            Some(v) => return Err(Error::config("lmo.kind", format!("expected grid or stochastic, got `{v}`"))),
        };
        let algorithm: Algorithm = e
            .take("solver.algorithm")
            .ok_or_else(|| Error::config("solver.algorithm", "required"))?
            .parse()
            .map_err(|err: Error| Error::config("solver.algorithm", err.to_string()))?;
        let mut solver = SolverConfig::new(algorithm, e.required("solver.T")?, lmo);
        solver.seed = seed;
        solver.l_surrogate = e.or("solver.L", solver.l_surrogate)?;
        solver.l_relative = e.bool_or("solver.l_relative", solver.l_relative)?;
        solver.curvature = match e.take("solver.curvature").as_deref() {
            None | Some("auto") => None,
            Some(v) => Some(v.parse().map_err(|_| Error::config("solver.curvature", format!("cannot parse `{v}`")))?),
        };
        solver.mc_samples = e.or("solver.mc_samples", solver.mc_samples)?;
        solver.correct_atoms = e.bool_or("solver.correct_atoms", solver.correct_atoms)?;
        solver.qp_tol = e.or("solver.qp_tol", solver.qp_tol)?;
        solver.qp_max_iter = e.or("solver.qp_max_iter", solver.qp_max_iter)?;
        solver.inner_tol = e.or("solver.inner_tol", solver.inner_tol)?;
        solver.inner_max_iter = e.or("solver.inner_max_iter", solver.inner_max_iter)?;
        solver.stall_patience = e.or("solver.stall_patience", solver.stall_patience)?;

        let is_logreg = matches!(target, TargetSpec::LogReg { .. });
        let metrics = MetricsSpec {
            kl_quadrature: e.bool_or("metrics.kl_quadrature", dim <= 2 && !is_logreg)?,
            kl_mc: e.bool_or("metrics.kl_mc", true)?,
            kl_mc_samples: e.or("metrics.kl_mc_samples", 4096)?,
            auc: e.bool_or("metrics.auc", is_logreg)?,
            auc_samples: e.or("metrics.auc_samples", 200)?,
        };
        e.finish()?;

        let cfg = Self {
            target,
            family,
            init,
            solver,
            metrics,
            output_dir,
            seed,
            record_wallclock,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let dim = self.family.dim;
        match &self.target {
            TargetSpec::Cauchy { scale, .. } => {
                if dim != 1 {
                    return Err(Error::config("family.dim", "the Cauchy target is one-dimensional"));
                }
                if !(*scale > 0.0) {
                    return Err(Error::config("target.scale", "must be positive"));
                }
            }
            TargetSpec::GaussMix { components } => {
                if let Some((_, m, _)) = components.iter().find(|(_, m, _)| m.len() != dim) {
                    return Err(Error::config(
                        "target.components",
                        format!("component mean has {} coordinates, family.dim is {dim}", m.len()),
                    ));
                }
            }
            TargetSpec::LogReg { data, n_train, prior_sigma } => {
                if let DataSource::File(p) = data {
                    if !p.is_file() {
                        return Err(Error::config("target.dataset", format!("no such file: {}", p.display())));
                    }
                }
                if let DataSource::Synthetic { n, dim: d, .. } = data {
                    if *d != dim {
                        return Err(Error::config("target.synthetic_dim", format!("must equal family.dim ({dim})")));
                    }
                    if n_train >= n {
                        return Err(Error::config("target.n_train", "must leave a non-empty test split"));
                    }
                }
                if *n_train == 0 {
                    return Err(Error::config("target.n_train", "must be at least 1"));
                }
                if !(*prior_sigma > 0.0) {
                    return Err(Error::config("target.prior_sigma", "must be positive"));
                }
            }
        }
        if let BoxSpec::AroundInit { radius } = self.family.bounds {
            if !matches!(self.init, InitSpec::MeanField { .. }) {
                return Err(Error::config("family.radius", "needs init.kind = meanfield"));
            }
            if !(radius > 0.0) {
                return Err(Error::config("family.radius", "must be positive"));
            }
        }
        if self.metrics.kl_quadrature && dim > 2 {
            return Err(Error::config("metrics.kl_quadrature", "quadrature metrics need family.dim <= 2"));
        }
        if self.metrics.auc && !matches!(self.target, TargetSpec::LogReg { .. }) {
            return Err(Error::config("metrics.auc", "AUC needs a logreg target"));
        }
        if matches!(self.solver.lmo, LmoChoice::Grid(_)) && dim > 2 {
            return Err(Error::config("lmo.kind", "the grid oracle needs family.dim <= 2"));
        }
        self.solver.validate()
    }

    /// A family config for explicit bounds; `None` when the box is placed around the init.
    pub fn fixed_family(&self) -> Result<Option<AtomFamilyConfig>> {
        match &self.family.bounds {
            BoxSpec::Bounds { lower, upper } => self.family_on(lower.clone(), upper.clone()).map(Some),
            BoxSpec::AroundInit { .. } => Ok(None),
        }
    }

    pub fn family_on(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<AtomFamilyConfig> {
        let support = SupportBox::new(lower, upper).map_err(|e| Error::config("family.lower", e.to_string()))?;
        AtomFamilyConfig::new(support, self.family.sigma_min, self.family.sigma_max, self.family.mean_stride)
            .map_err(|e| Error::config("family.sigma_min", e.to_string()))
    }

    /// Fully resolved snapshot; parsing it yields an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run.seed = {}", self.seed);
        let _ = writeln!(out, "run.output_dir = {}", self.output_dir.display());
        let _ = writeln!(out, "run.record_wallclock = {}", self.record_wallclock);
        match &self.target {
            TargetSpec::Cauchy { location, scale } => {
                let _ = writeln!(out, "target.kind = cauchy");
                let _ = writeln!(out, "target.location = {location}");
                let _ = writeln!(out, "target.scale = {scale}");
            }
            TargetSpec::GaussMix { components } => {
                let parts: Vec<String> = components
                    .iter()
                    .map(|(w, m, s)| {
                        let m: Vec<String> = m.iter().map(|x| x.to_string()).collect();
                        format!("{w} {} {s}", m.join(" "))
                    })
                    .collect();
                let _ = writeln!(out, "target.kind = gauss_mix");
                let _ = writeln!(out, "target.components = {}", parts.join("; "));
            }
            TargetSpec::LogReg { data, n_train, prior_sigma } => {
                let _ = writeln!(out, "target.kind = logreg");
                match data {
                    DataSource::File(p) => {
                        let _ = writeln!(out, "target.dataset = {}", p.display());
                    }
                    DataSource::Synthetic { n, dim, seed } => {
                        let _ = writeln!(out, "target.dataset = synthetic");
                        let _ = writeln!(out, "target.synthetic_n = {n}");
                        let _ = writeln!(out, "target.synthetic_dim = {dim}");
                        let _ = writeln!(out, "target.synthetic_seed = {seed}");
                    }
                }
                let _ = writeln!(out, "target.n_train = {n_train}");
                let _ = writeln!(out, "target.prior_sigma = {prior_sigma}");
            }
        }
        let _ = writeln!(out, "family.dim = {}", self.family.dim);
        match &self.family.bounds {
            BoxSpec::Bounds { lower, upper } => {
                let _ = writeln!(out, "family.lower = {}", fmt_vec(lower));
                let _ = writeln!(out, "family.upper = {}", fmt_vec(upper));
            }
            BoxSpec::AroundInit { radius } => {
                let _ = writeln!(out, "family.radius = {radius}");
            }
        }
        let _ = writeln!(out, "family.sigma_min = {}", self.family.sigma_min);
        let _ = writeln!(out, "family.sigma_max = {}", self.family.sigma_max);
        let _ = writeln!(out, "family.mean_stride = {}", self.family.mean_stride);
        match &self.init {
            InitSpec::Center => {
                let _ = writeln!(out, "init.kind = center");
            }
            InitSpec::MeanField { lower, upper, lmo } => {
                let _ = writeln!(out, "init.kind = meanfield");
                let _ = writeln!(out, "init.lower = {}", fmt_vec(lower));
                let _ = writeln!(out, "init.upper = {}", fmt_vec(upper));
                write_lmo(&mut out, "init", lmo);
            }
        }
        match &self.solver.lmo {
            LmoChoice::Grid(g) => {
                let _ = writeln!(out, "lmo.kind = grid");
                let _ = writeln!(out, "lmo.means_per_dim = {}", g.means_per_dim);
                let _ = writeln!(out, "lmo.sigmas = {}", g.sigmas);
            }
            LmoChoice::Stochastic(c) => {
                let _ = writeln!(out, "lmo.kind = stochastic");
                write_lmo(&mut out, "lmo", c);
            }
        }
        let s = &self.solver;
        let _ = writeln!(out, "solver.algorithm = {}", s.algorithm);
        let _ = writeln!(out, "solver.T = {}", s.iterations);
        let _ = writeln!(out, "solver.L = {}", s.l_surrogate);
        let _ = writeln!(out, "solver.l_relative = {}", s.l_relative);
        match s.curvature {
            None => {
                let _ = writeln!(out, "solver.curvature = auto");
            }
            Some(c) => {
                let _ = writeln!(out, "solver.curvature = {c}");
            }
        }
        let _ = writeln!(out, "solver.mc_samples = {}", s.mc_samples);
        let _ = writeln!(out, "solver.correct_atoms = {}", s.correct_atoms);
        let _ = writeln!(out, "solver.qp_tol = {}", s.qp_tol);
        let _ = writeln!(out, "solver.qp_max_iter = {}", s.qp_max_iter);
        let _ = writeln!(out, "solver.inner_tol = {}", s.inner_tol);
        let _ = writeln!(out, "solver.inner_max_iter = {}", s.inner_max_iter);
        let _ = writeln!(out, "solver.stall_patience = {}", s.stall_patience);
        let m = &self.metrics;
        let _ = writeln!(out, "metrics.kl_quadrature = {}", m.kl_quadrature);
        let _ = writeln!(out, "metrics.kl_mc = {}", m.kl_mc);
        let _ = writeln!(out, "metrics.kl_mc_samples = {}", m.kl_mc_samples);
        let _ = writeln!(out, "metrics.auc = {}", m.auc);
        let _ = writeln!(out, "metrics.auc_samples = {}", m.auc_samples);
        out
    }

    /// The snapshot lines outside the `solver.` and `lmo.` blocks, used to
    /// check that compared runs differ only in their algorithm settings.
    pub fn non_solver_lines(&self) -> Vec<String> {
        self.to_text()
            .lines()
            .filter(|l| !l.starts_with("solver.") && !l.starts_with("lmo."))
            .map(str::to_string)
            .collect()
    }
}
