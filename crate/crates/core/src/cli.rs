//! Config-driven runner behind the `solver` binary.
//!
//! A run loads a JSON [`RunConfig`], builds the grid and operators, checks
//! the hypotheses of the chosen task, solves, and writes a summary JSON,
//! solution CSVs and optionally a line-delimited iterate log.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::assembly::{assemble, OperatorSet, Potentials};
use crate::error::{Error, Result};
use crate::functional::{gn_exponents, GnExponents, ProblemContext};
use crate::geometry::{
    build_grid, check_condition_c, check_condition_n, coercivity_factor, k_mask, ConditionReport, DomainSpec, NodeMask,
    RegionK,
};
use crate::nonlinearity::{
    read_node_table, Coefficient, ConditionsReport, NonlinearitySpec, OffKPart, PowerPart, SamplePlan,
};
use crate::solvers::{
    mountain_pass, multi_solve, normalized_multi, normalized_solve, SolutionReport, SolverConfig,
};
use crate::spectral::{
    check_condition_a, hardy_constant_boundary, hardy_constant_origin, spectrum_a, ConditionAReport, SpectrumReport,
};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitCode {
    Success,
    /// Unreadable or invalid configuration, or an unwritable output path.
    Config,
    /// A hypothesis of the problem fails.
    Hypothesis,
    /// A solver did not converge.
    NotConverged,
    /// Internal failure or a computed result contradicting the theory.
    Internal,
}

impl ExitCode {
    pub fn code(self) -> u8 {
        match self {
            ExitCode::Success => 0,
            ExitCode::Config => 2,
            ExitCode::Hypothesis => 3,
            ExitCode::NotConverged => 4,
            ExitCode::Internal => 5,
        }
    }

    pub fn of(err: &Error) -> Self {
        match err {
            Error::Config(_)
            | Error::Domain(_)
            | Error::Resolution(_)
            | Error::Precondition(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => ExitCode::Config,
            Error::ConditionViolated { .. } | Error::Coercivity(_) | Error::Inconclusive(_) => ExitCode::Hypothesis,
            Error::Range(_) => ExitCode::NotConverged,
            Error::EmptyProblem(_) | Error::Eigensolver { .. } | Error::TheoryViolation(_) => ExitCode::Internal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Report conditions (C), (N), (A), (F1)-(F5) and mass criticality.
    Verify,
    /// Discrete Hardy constants at the origin and the boundary.
    Hardy,
    /// Lowest eigenvalues of the singular operator on the complement of K.
    Spectrum,
    /// Mountain-pass solution.
    Solve,
    /// Several solutions of an odd problem.
    Multi,
    /// Solution with prescribed mass.
    Normalized,
    /// Several solutions with prescribed mass.
    NormalizedMulti,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Verify => "verify",
            Task::Hardy => "hardy",
            Task::Spectrum => "spectrum",
            Task::Solve => "solve",
            Task::Multi => "multi",
            Task::Normalized => "normalized",
            Task::NormalizedMulti => "normalized-multi",
        }
    }
}

/// Domain with its grid resolution (radial cells, or cells per box axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBlock {
    #[serde(flatten)]
    pub shape: DomainSpec,
    pub resolution: usize,
}

/// A constant, an inline per-node table, or a CSV file of `node,value`
/// rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSource {
    Value(f64),
    Table(Vec<f64>),
    Csv { csv: PathBuf },
}

impl CoefficientSource {
    fn resolve(&self, grid_len: usize) -> Result<Coefficient> {
        Ok(match self {
            CoefficientSource::Value(v) => Coefficient::Constant(*v),
            CoefficientSource::Table(t) => Coefficient::Table(t.clone()),
            CoefficientSource::Csv { csv } => Coefficient::Table(read_node_table(csv, grid_len)?),
        })
    }

    fn anchor(&mut self, base: &Path) {
        if let CoefficientSource::Csv { csv } = self {
            if csv.is_relative() {
                *csv = base.join(&*csv);
            }
        }
    }
}

fn one() -> CoefficientSource {
    CoefficientSource::Value(1.0)
}

fn half() -> CoefficientSource {
    CoefficientSource::Value(0.5)
}

fn unit() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NonlinearityBlock {
    /// `Γ|u|^{p-2}u` on `K`; off `K`, `s u³/(1+u²)` up to `u₀ = threshold`
    /// and `Θu` beyond.
    Saturating {
        #[serde(default = "one")]
        gamma: CoefficientSource,
        p: f64,
        #[serde(default = "half")]
        theta: CoefficientSource,
        #[serde(default = "unit")]
        threshold: f64,
        #[serde(default = "yes")]
        odd: bool,
    },
    /// `Γ|u|^{p-2}u` everywhere.
    Power {
        #[serde(default = "one")]
        gamma: CoefficientSource,
        p: f64,
        #[serde(default = "yes")]
        odd: bool,
    },
    /// `f ≡ 0`.
    Zero,
    /// A full specification in library form.
    Custom { spec: NonlinearitySpec },
}

impl NonlinearityBlock {
    pub fn build(&self, grid_len: usize) -> Result<NonlinearitySpec> {
        Ok(match self {
            NonlinearityBlock::Saturating { gamma, p, theta, threshold, odd } => NonlinearitySpec {
                on_k: PowerPart { gamma: gamma.resolve(grid_len)?, exponent: *p },
                off_k: OffKPart::Saturating { theta: theta.resolve(grid_len)?, threshold: *threshold },
                odd: *odd,
            },
            NonlinearityBlock::Power { gamma, p, odd } => {
                let part = PowerPart { gamma: gamma.resolve(grid_len)?, exponent: *p };
                NonlinearitySpec { on_k: part.clone(), off_k: OffKPart::Power(part), odd: *odd }
            }
            NonlinearityBlock::Zero => NonlinearitySpec::zero(),
            NonlinearityBlock::Custom { spec } => spec.clone(),
        })
    }

    fn anchor(&mut self, base: &Path) {
        match self {
            NonlinearityBlock::Saturating { gamma, theta, .. } => {
                gamma.anchor(base);
                theta.anchor(base);
            }
            NonlinearityBlock::Power { gamma, .. } => gamma.anchor(base),
            NonlinearityBlock::Zero | NonlinearityBlock::Custom { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumBlock {
    /// Number of eigenvalues computed.
    pub k: usize,
    /// Non-resonance tolerance for condition (A); `1e-3 (1 + |λ|)` if
    /// absent.
    pub tol: Option<f64>,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        SpectrumBlock { k: 6, tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizedBlock {
    pub rho: f64,
    pub count: usize,
}

impl Default for NormalizedBlock {
    fn default() -> Self {
        NormalizedBlock { rho: 1.0, count: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiBlock {
    pub count: usize,
}

impl Default for MultiBlock {
    fn default() -> Self {
        MultiBlock { count: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    pub prefix: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: None, prefix: "solution".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub domain: DomainBlock,
    #[serde(default = "empty_region")]
    pub region_k: RegionK,
    #[serde(default)]
    pub potentials: Potentials,
    pub nonlinearity: NonlinearityBlock,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub normalized: NormalizedBlock,
    #[serde(default)]
    pub multi: MultiBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn empty_region() -> RegionK {
    RegionK::Empty
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Read a config file; relative CSV paths are taken relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.nonlinearity.anchor(base);
        if let Some(dir) = &mut cfg.output.dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }

    /// Load-time checks that need no grid.
    fn check(&self) -> Result<()> {
        self.domain.shape.validate()?;
        self.region_k.validate(&self.domain.shape)?;
        self.solver.validate()?;
        let Potentials { lambda, mu, nu } = self.potentials;
        if ![lambda, mu, nu].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("potential strengths must be finite".into()));
        }
        if self.spectrum.k == 0 || self.multi.count == 0 || self.normalized.count == 0 {
            return Err(Error::Config("spectrum.k and solution counts must be at least 1".into()));
        }
        if !(self.normalized.rho > 0.0) {
            return Err(Error::Config(format!("normalized.rho must be positive, got {}", self.normalized.rho)));
        }
        Ok(())
    }
}

/// Grid, operators, `K` and the resolved nonlinearity of a config.
pub struct Setup {
    pub ops: OperatorSet,
    pub k: NodeMask,
    pub spec: NonlinearitySpec,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let grid = build_grid(&cfg.domain.shape, cfg.domain.resolution)?;
        let k = k_mask(&grid, &cfg.region_k)?;
        let spec = cfg.nonlinearity.build(grid.len())?;
        Ok(Setup { ops: assemble(&grid), k, spec })
    }

    pub fn context(&self, potentials: Potentials) -> Result<ProblemContext> {
        ProblemContext::new(self.ops.clone(), self.spec.clone(), potentials, self.k.clone())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionN {
    pub holds: bool,
    pub margin: Option<f64>,
    pub coercivity: f64,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionAStatus {
    Satisfied,
    Violated,
    Inconclusive,
    /// `Ω∖K` has no node.
    Vacuous,
    /// Could not be evaluated, see the detail.
    Undefined,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionA {
    pub status: ConditionAStatus,
    pub report: Option<ConditionAReport>,
    pub spectrum: Option<SpectrumReport>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conditions {
    pub c: ConditionReport,
    pub n: ConditionN,
    pub a: ConditionA,
    /// (F1)-(F5) and oddness, sampled.
    pub f: Option<ConditionsReport>,
    /// Why the nonlinearity could not be checked.
    pub f_error: Option<String>,
    /// Gagliardo–Nirenberg exponents of the growth exponent, if any.
    pub mass: Option<GnExponents>,
}

impl Conditions {
    pub fn evaluate(cfg: &RunConfig, setup: &Setup) -> Self {
        let Potentials { lambda, mu, nu } = cfg.potentials;
        let dim = cfg.domain.shape.dim();
        let n = match check_condition_n(mu, nu, dim) {
            Ok(margin) => ConditionN {
                holds: margin > 0.0,
                margin: Some(margin),
                coercivity: coercivity_factor(mu, nu, dim),
                detail: (margin <= 0.0).then(|| format!("mu/(N-2)^2 + nu = {} >= 1/4", 0.25 - margin)),
            },
            Err(e) => ConditionN {
                holds: false,
                margin: None,
                coercivity: coercivity_factor(mu, nu, dim),
                detail: Some(e.to_string()),
            },
        };
        let a = condition_a(cfg, setup, lambda, mu, nu, n.holds);
        let (f, f_error) = match setup.spec.validate(dim, setup.ops.len()) {
            Ok(()) => (Some(setup.spec.verify_conditions(&setup.k, &SamplePlan::default())), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Conditions {
            c: check_condition_c(&cfg.domain.shape),
            n,
            a,
            f,
            f_error,
            mass: setup.spec.growth_exponent().map(|p| gn_exponents(p, dim)),
        }
    }

    /// Error for the first failing hard condition of `task`.
    pub fn gate(&self, task: Task) -> Result<()> {
        if !self.c.holds {
            return Err(Error::violated("C", self.c.reason.clone()));
        }
        if task == Task::Hardy {
            return Ok(());
        }
        if !self.n.holds {
            return Err(Error::violated("N", self.n.detail.clone().unwrap_or_default()));
        }
        let unconstrained = matches!(task, Task::Verify | Task::Solve | Task::Multi);
        if unconstrained {
            match self.a.status {
                ConditionAStatus::Violated => {
                    let margin = self.a.report.as_ref().map_or(f64::NAN, |r| r.margin);
                    return Err(Error::violated("A", format!("-lambda is within {margin:.3e} of the spectrum")));
                }
                ConditionAStatus::Inconclusive | ConditionAStatus::Undefined => {
                    return Err(Error::violated("A", self.a.detail.clone().unwrap_or_default()));
                }
                ConditionAStatus::Satisfied | ConditionAStatus::Vacuous => {}
            }
        }
        let f = self.f.as_ref().ok_or_else(|| Error::violated("F1", self.f_error.clone().unwrap_or_default()))?;
        if unconstrained {
            let mut names = vec!["F1", "F2", "F3", "F4", "F5"];
            if task == Task::Multi {
                names.push("odd");
            }
            f.require(&names)?;
        }
        if matches!(task, Task::Normalized | Task::NormalizedMulti) {
            if let Some(gn) = &self.mass {
                if !gn.subcritical {
                    return Err(Error::violated(
                        "mass-subcritical",
                        format!("growth exponent is not below 2 + 4/N = {:.6}", gn.mass_critical),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn condition_a(cfg: &RunConfig, setup: &Setup, lambda: f64, mu: f64, nu: f64, n_holds: bool) -> ConditionA {
    let undefined = |detail: String| ConditionA {
        status: ConditionAStatus::Undefined,
        report: None,
        spectrum: None,
        detail: Some(detail),
    };
    if !setup.k.complement().any() {
        return ConditionA { status: ConditionAStatus::Vacuous, report: None, spectrum: None, detail: None };
    }
    if !n_holds {
        return undefined("condition (N) fails".into());
    }
    let restricted = match setup.ops.restrict_to_complement(&setup.k) {
        Ok(r) => r,
        Err(e) => return undefined(e.to_string()),
    };
    let theta = match setup.spec.theta_table(restricted.nodes()) {
        Ok(t) => t,
        Err(e) => return undefined(e.to_string()),
    };
    let k = cfg.spectrum.k.min(restricted.len());
    let spectrum = match spectrum_a(&restricted, mu, nu, &theta, k) {
        Ok(s) => s,
        Err(e) => return undefined(e.to_string()),
    };
    match check_condition_a(lambda, &spectrum, cfg.spectrum.tol) {
        Ok(report) => ConditionA {
            status: if report.satisfied { ConditionAStatus::Satisfied } else { ConditionAStatus::Violated },
            report: Some(report),
            spectrum: Some(spectrum),
            detail: None,
        },
        Err(e) => ConditionA {
            status: ConditionAStatus::Inconclusive,
            report: None,
            spectrum: Some(spectrum),
            detail: Some(e.to_string()),
        },
    }
}

/// Options from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.dir`.
    pub out: Option<PathBuf>,
    /// Solve even when a hypothesis fails.
    pub force: bool,
    pub log_iterates: bool,
}

/// Result of a run: exit status, summary document and written files.
#[derive(Debug)]
pub struct Outcome {
    pub exit: ExitCode,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

/// Run `task` from the config file at `path`; failures become exit codes
/// and an error message on stderr.
pub fn run(task: Task, path: &Path, opts: &RunOptions) -> ExitCode {
    let outcome = RunConfig::load(path).and_then(|cfg| execute(task, &cfg, opts));
    match outcome {
        Ok(o) => {
            if let Some(msg) = o.summary.get("message").and_then(Value::as_str) {
                eprintln!("{msg}");
            }
            for f in &o.files {
                println!("{}", f.display());
            }
            o.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::of(&e)
        }
    }
}

/// Run `task` on a parsed config. Errors are returned only when not even a
/// summary can be written.
pub fn execute(task: Task, cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome> {
    if let Some(t) = cfg.task {
        if t != task {
            return Err(Error::Config(format!("config is for task {}, not {}", t.name(), task.name())));
        }
    }
    let dir = opts.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let setup = Setup::new(cfg)?;
    let conditions = Conditions::evaluate(cfg, &setup);
    let mut summary = json!({
        "task": task.name(),
        "grid": {
            "nodes": setup.ops.len(),
            "resolution": cfg.domain.resolution,
            "k_nodes": setup.k.count(),
        },
        "conditions": conditions,
        "config": cfg,
        "versions": {
            "hardy-variational": env!("CARGO_PKG_VERSION"),
            "summary_format": 1,
        },
    });
    let mut files = Vec::new();
    let finish = |summary: &mut Value, exit: ExitCode, message: String, files: &mut Vec<PathBuf>| -> Result<Outcome> {
        summary["exit_code"] = json!(exit.code());
        summary["message"] = json!(message);
        let path = dir.join(format!("{}_summary.json", cfg.output.prefix));
        fs::write(&path, serde_json::to_string_pretty(summary)? + "\n")?;
        files.push(path);
        Ok(Outcome { exit, summary: summary.clone(), files: std::mem::take(files) })
    };
    let gate = conditions.gate(task);
    if let Err(e) = &gate {
        if task == Task::Verify || !opts.force {
            return finish(&mut summary, ExitCode::of(e), e.to_string(), &mut files);
        }
        summary["forced"] = json!(e.to_string());
    }
    let result = match task {
        Task::Verify => Ok((vec![], "all conditions hold".to_string(), Value::Null)),
        Task::Hardy => hardy(&setup, cfg),
        Task::Spectrum => Ok((vec![], "spectrum computed".into(), json!(conditions.a))),
        Task::Solve => setup
            .context(cfg.potentials)
            .and_then(|ctx| Ok((vec![mountain_pass(&ctx, &cfg.solver)?], "mountain-pass solve".into(), Value::Null))),
        Task::Multi => setup
            .context(cfg.potentials)
            .and_then(|ctx| Ok((multi_solve(&ctx, &cfg.solver, cfg.multi.count)?, "multiple solutions".into(), Value::Null))),
        Task::Normalized => setup.context(cfg.potentials).and_then(|ctx| {
            Ok((vec![normalized_solve(&ctx, &cfg.solver, cfg.normalized.rho, None)?], "normalized solve".into(), Value::Null))
        }),
        Task::NormalizedMulti => setup.context(cfg.potentials).and_then(|ctx| {
            let reps = normalized_multi(&ctx, &cfg.solver, cfg.normalized.rho, cfg.normalized.count)?;
            Ok((reps, "normalized solutions".into(), Value::Null))
        }),
    };
    let (reports, message, extra) = match result {
        Ok(r) => r,
        Err(e) => return finish(&mut summary, ExitCode::of(&e), e.to_string(), &mut files),
    };
    if !extra.is_null() {
        summary["result"] = extra;
    }
    if reports.is_empty() {
        return finish(&mut summary, ExitCode::Success, message, &mut files);
    }
    let many = matches!(task, Task::Multi | Task::NormalizedMulti);
    for (j, rep) in reports.iter().enumerate() {
        let name = if many { format!("{}_{j}.csv", cfg.output.prefix) } else { format!("{}.csv", cfg.output.prefix) };
        let path = dir.join(name);
        emit_solution_csv(&setup.ops, &rep.u, &path)?;
        files.push(path);
    }
    if opts.log_iterates {
        let path = dir.join(format!("{}_iterates.jsonl", cfg.output.prefix));
        write_iterate_log(&reports, &path)?;
        files.push(path);
    }
    summary["solutions"] = json!(reports);
    summary["energies"] = json!(reports.iter().map(|r| r.energy).collect::<Vec<_>>());
    let stalled = reports.iter().filter(|r| !r.converged).count();
    let (exit, message) = if stalled == 0 {
        (ExitCode::Success, message)
    } else {
        (ExitCode::NotConverged, format!("{message}: {stalled} of {} runs did not converge", reports.len()))
    };
    finish(&mut summary, exit, message, &mut files)
}

fn hardy(setup: &Setup, cfg: &RunConfig) -> Result<(Vec<SolutionReport>, String, Value)> {
    let dim = cfg.domain.shape.dim() as f64;
    let origin = hardy_constant_origin(&setup.ops);
    let boundary = hardy_constant_boundary(&setup.ops)?;
    let value = json!({
        "origin": origin.as_ref().ok(),
        "origin_error": origin.as_ref().err().map(|e| e.to_string()),
        "origin_constant": (dim - 2.0).powi(2) / 4.0,
        "boundary": boundary,
        "boundary_constant": 0.25,
    });
    Ok((vec![], "discrete Hardy constants computed".into(), value))
}

/// Write a grid function as CSV: `r,u,d,abs_x` on radial grids,
/// `x,y,z,u,d,abs_x` on boxes, one row per active node.
pub fn emit_solution_csv(ops: &OperatorSet, u: &crate::assembly::GridFunction, path: &Path) -> Result<()> {
    let grid = ops.grid();
    let mut w = csv::Writer::from_path(path)?;
    if grid.is_radial() {
        w.write_record(["r", "u", "d", "abs_x"])?;
    } else {
        w.write_record(["x", "y", "z", "u", "d", "abs_x"])?;
    }
    for (k, &i) in ops.nodes().iter().enumerate() {
        let mut row: Vec<String> = grid.point(i).iter().map(|x| x.to_string()).collect();
        row.push(u[k].to_string());
        row.push(grid.dist_boundary()[i].to_string());
        row.push(grid.dist_origin()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_iterate_log(reports: &[SolutionReport], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (j, rep) in reports.iter().enumerate() {
        for rec in &rep.log {
            let mut line = serde_json::to_value(rec)?;
            line["solution"] = json!(j);
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
    }
    out.flush()?;
    Ok(())
}
