//! Config-driven batch runs behind the `rwre-ldp` binary.
//!
//! A run reads one JSON [`RunConfig`], executes its task and writes CSV or
//! JSON artifacts. Each artifact starts with the line
//! `# tool=rwre-ldp version=<v> config_sha256=<hex>`; nothing else in the
//! output depends on time or thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::environment::{law_to_spec, EnvKind, EnvSpec, Environment, JumpLaw};
use crate::level2::{minimize_entropy, Level2Error, SolverConfig};
use crate::mc::{self, McError, McReport};
use crate::passage::{lambda_curve, PassageError, RcOptions, ULimitOptions};
use crate::rate::{asymmetry_demo, rate_curve, symmetry_gap, RateError, RateOptions, ASYMMETRY_R_VALUES};
use crate::tilt::{tilt_report, TiltError};

pub const TOOL: &str = "rwre-ldp";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    LambdaCurve,
    RateCurve,
    TiltReport,
    Level2Min,
    McVerify,
    Counterexample,
    SymmetryCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|k| if k + 1 == self.points { self.max } else { self.min + step * k as f64 }).collect()
    }

    fn check(&self, key: &str) -> Result<(), CliError> {
        if self.points == 0 || !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(CliError::Config(format!("{key}: need finite min <= max and points >= 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub u: f64,
    pub rc: f64,
    pub level2_grad: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { u: 1e-12, rc: 1e-8, level2_grad: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub r: f64,
    /// Passage level for the LLN check.
    pub n: u64,
    pub replicas: usize,
    /// Path length for the velocity and corrector checks.
    pub steps: usize,
    #[serde(default = "default_orders")]
    pub moment_orders: Vec<u32>,
    /// Replicas for the moment-bound check (defaults to `replicas`).
    #[serde(default)]
    pub moment_replicas: Option<usize>,
}

fn default_orders() -> Vec<u32> {
    vec![1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub environment: EnvSpec,
    /// `r` grid (lambda-curve, tilt-report, symmetry-check, counterexample)
    /// or `xi` grid (rate-curve, level2-min).
    #[serde(default)]
    pub grid: Option<Grid>,
    /// `xi` grid of the symmetry check.
    #[serde(default)]
    pub xi_grid: Option<Grid>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub mc: Option<McConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        if !(t.u > 0.0 && t.rc > 0.0 && t.level2_grad > 0.0) {
            return Err(CliError::Config("tolerances: all entries must be positive".into()));
        }
        if let Some(g) = &self.grid {
            g.check("grid")?;
        }
        if let Some(g) = &self.xi_grid {
            g.check("xi_grid")?;
        }
        let needs_grid = matches!(
            self.task,
            Task::LambdaCurve | Task::RateCurve | Task::TiltReport | Task::Level2Min | Task::SymmetryCheck
        );
        if needs_grid && self.grid.is_none() {
            return Err(CliError::Config("grid: required for this task".into()));
        }
        if self.task == Task::SymmetryCheck && self.xi_grid.is_none() {
            return Err(CliError::Config("xi_grid: required for symmetry-check".into()));
        }
        if self.task == Task::McVerify {
            let mc = self.mc.as_ref().ok_or_else(|| CliError::Config("mc: required for mc-verify".into()))?;
            if mc.n == 0 || mc.replicas < 2 || mc.steps == 0 {
                return Err(CliError::Config("mc: need n >= 1, replicas >= 2, steps >= 1".into()));
            }
        }
        Ok(())
    }

    fn u_opts(&self) -> ULimitOptions {
        ULimitOptions { tol: self.tolerances.u, ..ULimitOptions::default() }
    }

    fn rc_opts(&self) -> RcOptions {
        RcOptions { tol: self.tolerances.rc, ..RcOptions::default() }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error("hard invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<TiltError> for CliError {
    fn from(e: TiltError) -> Self {
        match e {
            TiltError::Inconsistent { .. } => CliError::Invariant(e.to_string()),
            other => CliError::Divergence(other.to_string()),
        }
    }
}

impl From<PassageError> for CliError {
    fn from(e: PassageError) -> Self {
        match e {
            PassageError::BadArgument(_) | PassageError::NotNearestNeighbor(_) | PassageError::Env(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Divergence(other.to_string()),
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::Passage(p) => p.into(),
            RateError::Tilt(t) => t.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<Level2Error> for CliError {
    fn from(e: Level2Error) -> Self {
        match e {
            Level2Error::Infeasible { .. } | Level2Error::NotPeriodic => CliError::Config(e.to_string()),
            other => CliError::Divergence(other.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Passage(p) => p.into(),
            McError::Tilt(t) => t.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub strict: bool,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Outcome of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    header: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let text = format!("{}\n{}", self.header, body);
        fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).expect("serializable output");
        body.push('\n');
        self.write(name, &body)
    }
}

pub fn config_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the config at `path`; returns the process exit code.
pub fn run(path: &Path, opts: &RunOptions) -> RunOutcome {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return RunOutcome { exit_code: EXIT_CONFIG, files: vec![], warnings: vec![] };
        }
    };
    run_bytes(&bytes, opts)
}

pub fn run_bytes(bytes: &[u8], opts: &RunOptions) -> RunOutcome {
    let fail = |e: CliError| {
        eprintln!("error: {e}");
        RunOutcome { exit_code: e.exit_code(), files: vec![], warnings: vec![] }
    };
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => return fail(CliError::Config(format!("config is not UTF-8: {e}"))),
    };
    let cfg = match RunConfig::parse(text) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let env = match cfg.environment.build().and_then(|env| env.ensure_valid().map(|_| env)) {
        Ok(env) => env,
        Err(e) => return fail(CliError::Config(format!("at `environment`: {e}"))),
    };
    let dir = opts.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    if let Err(source) = fs::create_dir_all(&dir) {
        return fail(CliError::Io { path: dir, source });
    }
    let header = format!("# tool={TOOL} version={VERSION} config_sha256={}", config_sha256(bytes));
    let mut w = Writer { dir, header, files: vec![] };

    let result = match opts.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(&cfg, &env, &mut w)),
            Err(e) => Err(CliError::Config(format!("--threads: {e}"))),
        },
        None => dispatch(&cfg, &env, &mut w),
    };
    match result {
        Ok(warnings) => {
            for msg in &warnings {
                eprintln!("warning: {msg}");
            }
            let exit_code = if opts.strict && !warnings.is_empty() { EXIT_INVARIANT } else { EXIT_OK };
            RunOutcome { exit_code, files: w.files, warnings }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Divergence(_) | CliError::Invariant(_)) {
                let diag = serde_json::json!({ "task": cfg.task, "error": e.to_string(), "exit_code": e.exit_code() });
                // best effort: the primary error is what matters
                let _ = w.json("diagnostics.json", &diag);
            }
            RunOutcome { exit_code: e.exit_code(), files: w.files, warnings: vec![] }
        }
    }
}

fn e16(v: f64) -> String {
    format!("{v:.16e}")
}

fn dispatch(cfg: &RunConfig, env: &Environment, w: &mut Writer) -> Result<Vec<String>, CliError> {
    let mut warnings = Vec::new();
    match cfg.task {
        Task::LambdaCurve => {
            let grid = cfg.grid.expect("checked").values();
            let curve = lambda_curve(env, &grid, &cfg.u_opts(), &cfg.rc_opts())?;
            let mut csv = String::from("r,lambda,lambda_bar,converged,n_used,M_used\n");
            for p in &curve.points {
                let converged = p.lambda.converged && p.lambda_bar.converged;
                writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    e16(p.r),
                    e16(p.lambda.value),
                    e16(p.lambda_bar.value),
                    converged,
                    p.lambda.n_used,
                    p.lambda.m_used
                )
                .unwrap();
            }
            w.write("lambda_curve.csv", &csv)?;
            let summary = serde_json::json!({
                "rc": curve.rc,
                "convexity_defect_lambda": curve.convexity_defect(false),
                "convexity_defect_lambda_bar": curve.convexity_defect(true),
            });
            w.json("lambda_summary.json", &summary)?;
            if !curve.rc.consistent {
                warnings.push(format!("critical tilt brackets disagree by {:e}", curve.rc.gap));
            }
        }
        Task::RateCurve => {
            let grid = cfg.grid.expect("checked").values();
            let opts = RateOptions::with(env, &cfg.rc_opts(), &cfg.u_opts())?;
            let curve = rate_curve(env, &grid, &opts)?;
            let mut csv = String::from("xi,I,r_star,branch,err_flag\n");
            for s in &curve.samples {
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    e16(s.xi),
                    e16(s.value),
                    e16(s.r_star),
                    s.branch.as_str(),
                    s.err_flag()
                )
                .unwrap();
            }
            w.write("rate_curve.csv", &csv)?;
            let summary = serde_json::json!({
                "xi_c": curve.xi_c,
                "xi_bar_c": curve.xi_bar_c,
                "rc": curve.rc,
                "i_zero": curve.i_zero,
                "convexity_defect": curve.convexity_defect(),
            });
            w.json("rate_summary.json", &summary)?;
            let ambiguous = curve.samples.iter().filter(|s| s.ambiguous).count();
            if ambiguous > 0 {
                warnings.push(format!("{ambiguous} xi values fall inside the xi_c bracket"));
            }
        }
        Task::TiltReport => {
            let rows = cfg
                .grid
                .expect("checked")
                .values()
                .iter()
                .map(|&r| tilt_report(env, r, &cfg.u_opts()))
                .collect::<Result<Vec<_>, _>>()?;
            w.json("tilt_report.json", &rows)?;
        }
        Task::Level2Min => {
            let solver = SolverConfig { grad_tol: cfg.tolerances.level2_grad, ..SolverConfig::default() };
            let mut summary = Vec::new();
            for (k, xi) in cfg.grid.expect("checked").values().into_iter().enumerate() {
                let rep = minimize_entropy(env, xi, &solver)?;
                let mut csv = String::from("site_class,offset,weight\n");
                for (i, z, m) in rep.minimizer.iter() {
                    writeln!(csv, "{i},{z},{}", e16(m)).unwrap();
                }
                w.write(&format!("pair_measure_{k:03}.csv"), &csv)?;
                if !rep.converged {
                    warnings.push(format!("level-2 solver did not converge at xi = {xi}"));
                }
                summary.push(serde_json::json!({
                    "xi": rep.xi,
                    "value": rep.value,
                    "projected_gradient": rep.projected_gradient,
                    "iterations": rep.iterations,
                    "mass_residual": rep.mass_residual,
                    "stationarity_residual": rep.stationarity_residual,
                    "drift_residual": rep.drift_residual,
                    "converged": rep.converged,
                }));
            }
            w.json("level2_summary.json", &summary)?;
        }
        Task::McVerify => {
            let mc_cfg = cfg.mc.as_ref().expect("checked");
            let reports = run_mc(env, mc_cfg, cfg.seed)?;
            let mut lines = String::new();
            for rep in &reports {
                lines.push_str(&serde_json::to_string(rep).expect("serializable report"));
                lines.push('\n');
            }
            w.write("mc_reports.jsonl", &lines)?;
            if let Some(bad) = reports.iter().find(|r| !r.hard_invariant_ok) {
                return Err(CliError::Invariant(format!("{} at r = {}", bad.name, bad.r)));
            }
            for rep in reports.iter().filter(|r| !r.pass) {
                warnings.push(format!("{} failed its gate: z = {:.3}", rep.name, rep.z_score));
            }
        }
        Task::Counterexample => {
            let law = match env.kind() {
                EnvKind::Homogeneous(law) if law.bound() >= 2 => law.clone(),
                _ => return Err(CliError::Config("counterexample needs a homogeneous law with B >= 2".into())),
            };
            let r_values = cfg.grid.map(|g| g.values()).unwrap_or_else(|| ASYMMETRY_R_VALUES.to_vec());
            let report = asymmetry_demo(&law, &r_values, &cfg.u_opts())?;
            let control_law = nearest_neighbor_control(&law);
            let control = asymmetry_demo(&control_law, &r_values, &cfg.u_opts())?;
            let mut t = String::new();
            writeln!(t, "law: {}", serde_json::to_string(&law_to_spec(&law)).unwrap()).unwrap();
            writeln!(
                t,
                "{:>8} {:>22} {:>22} {:>22} {:>22}",
                "r", "lambda", "lambda_bar", "gap(roots)", "gap(pipeline)"
            )
            .unwrap();
            for row in &report.rows {
                writeln!(
                    t,
                    "{:>8} {:>22.15e} {:>22.15e} {:>22.15e} {:>22.15e}",
                    row.r,
                    row.lambda_pipeline,
                    row.lambda_bar_pipeline,
                    row.gap_poly(),
                    row.gap_pipeline()
                )
                .unwrap();
            }
            writeln!(t, "variation of gap (roots):    {:.6e}", report.variation_poly).unwrap();
            writeln!(t, "variation of gap (pipeline): {:.6e}", report.variation_pipeline).unwrap();
            writeln!(t, "max |pipeline - roots|:      {:.6e}", report.max_disagreement).unwrap();
            writeln!(
                t,
                "nearest-neighbor control {}: variation {:.6e}",
                serde_json::to_string(&law_to_spec(&control_law)).unwrap(),
                control.variation_pipeline
            )
            .unwrap();
            w.write("counterexample.txt", &t)?;
            w.json("counterexample.json", &serde_json::json!({ "law": report, "control": control }))?;
            if report.max_disagreement > 1e-6 {
                return Err(CliError::Divergence(format!(
                    "pipeline and characteristic roots disagree by {:e}",
                    report.max_disagreement
                )));
            }
        }
        Task::SymmetryCheck => {
            if env.bound() != 1 {
                return Err(CliError::Config("symmetry-check needs B = 1".into()));
            }
            let r_grid = cfg.grid.expect("checked").values();
            let xi_grid = cfg.xi_grid.expect("checked").values();
            let opts = RateOptions::with(env, &cfg.rc_opts(), &cfg.u_opts())?;
            let report = symmetry_gap(env, &r_grid, &xi_grid, &opts)?;
            w.json("symmetry.json", &report)?;
            if report.max_gap_deviation > 1e-8 || report.max_identity_residual > 1e-7 {
                warnings.push(format!(
                    "symmetry residuals {:e} (lambda gap), {:e} (rate identity)",
                    report.max_gap_deviation, report.max_identity_residual
                ));
            }
        }
    }
    Ok(warnings)
}

/// Nearest-neighbor law carrying the same mass to each side as `law`.
fn nearest_neighbor_control(law: &JumpLaw) -> JumpLaw {
    let right: f64 = law.iter().filter(|(z, _)| *z > 0).map(|(_, p)| p).sum();
    JumpLaw::nearest_neighbor(right / law.total()).expect("valid nearest-neighbor law")
}

/// The four Monte Carlo checks, in a fixed order.
pub fn run_mc(env: &Environment, c: &McConfig, seed: u64) -> Result<Vec<McReport>, CliError> {
    let mut out = vec![
        mc::passage_lln_check(env, c.r, c.n, c.replicas, seed)?,
        mc::empirical_velocity_check(env, c.r, c.steps, c.replicas, seed.wrapping_add(1))?,
    ];
    for &m in &c.moment_orders {
        out.push(mc::moment_bound_check(env, c.r, m, c.moment_replicas.unwrap_or(c.replicas), seed.wrapping_add(2))?);
    }
    out.push(mc::corrector_sublinearity_check(env, c.r, c.steps, c.replicas, seed.wrapping_add(3))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = Grid { min: -1.0, max: 0.3, points: 14 };
        let v = g.values();
        assert_eq!(v.len(), 14);
        assert_eq!(v[0], -1.0);
        assert_eq!(v[13], 0.3);
    }

    #[test]
    fn missing_bound_points_at_key() {
        let text = r#"{"task":"rate-curve","environment":{"type":"homogeneous","delta":0.5,"laws":[{"-1":0.5,"1":0.5}]},
            "grid":{"min":0,"max":1,"points":3}}"#;
        let err = RunConfig::parse(text).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(err.to_string().contains("environment"), "{err}");
        assert!(err.to_string().contains("B"), "{err}");
    }

    #[test]
    fn grid_required() {
        let text = r#"{"task":"lambda-curve","environment":{"type":"homogeneous","B":1,"delta":0.5,"laws":[{"-1":0.5,"1":0.5}]}}"#;
        assert!(matches!(RunConfig::parse(text), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_task_rejected() {
        let text =
            r#"{"task":"plot","environment":{"type":"homogeneous","B":1,"delta":0.5,"laws":[{"-1":0.5,"1":0.5}]}}"#;
        let err = RunConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains("task"), "{err}");
    }
}
