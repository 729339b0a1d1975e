//! Batch front end: run configuration, pipeline orchestration, level cache and plots.

mod cache;
mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{DomainSpec, PlanarDomain};
use crate::error::{Error, Result};
use crate::flows::{
    build_flow_with, flow_grid, refine_flow_with, run_checks_with_refinement, CheckReport, FlowOptions, FlowTable,
    Tolerances,
};
use crate::green::{CriticalSet, GreenMethod, GreenSolver};
use crate::kernels::{default_degree, factored_kernels, kernels_at_level, HoloBasis, LevelKernels, MAX_DEGREE};
use crate::sublevel::{trace_level_with, LevelCurveSet, TraceOptions};

pub use cache::{level_from_csv, level_to_csv, LevelCache, LEVEL_CSV_HEADER};
pub use svg::{emit_svg, render_svg, Labels};

pub const MIN_STEPS: usize = 8;
pub const MIN_DEGREE: usize = 4;
const MIN_NODES: usize = 16;
/// Points per axis of the `green` sample grid.
const GREEN_GRID: usize = 81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Green,
    Bergman,
    Hardy,
    #[default]
    Flow,
    Verify,
}

fn default_t_max() -> f64 {
    2.0
}

fn default_t_steps() -> usize {
    128
}

fn default_nodes() -> usize {
    crate::domain::DEFAULT_NODES
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    #[serde(default)]
    pub command: Command,
    #[serde(default)]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
    /// Level used by `bergman` and `hardy`; `t_min` when absent.
    #[serde(default)]
    pub t: Option<f64>,
    /// Starting basis degree K; chosen from the domain when absent.
    #[serde(default, alias = "K")]
    pub degree: Option<usize>,
    #[serde(default = "default_nodes")]
    pub nodes_per_curve: usize,
    #[serde(default)]
    pub green_method: GreenMethod,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "yes")]
    pub cache: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if !(self.t_min.is_finite() && self.t_min >= 0.0) {
            return bad(format!("t_min = {} must be finite and >= 0", self.t_min));
        }
        if !(self.t_max.is_finite() && self.t_max > self.t_min) {
            return bad(format!("t_max = {} must be finite and > t_min", self.t_max));
        }
        if self.t_steps < MIN_STEPS {
            return bad(format!("t_steps = {} must be at least {MIN_STEPS}", self.t_steps));
        }
        if let Some(t) = self.t {
            if !(t.is_finite() && t >= 0.0) {
                return bad(format!("t = {t} must be finite and >= 0"));
            }
        }
        if let Some(k) = self.degree {
            if !(MIN_DEGREE..=MAX_DEGREE).contains(&k) {
                return bad(format!("degree K = {k} must lie in [{MIN_DEGREE}, {MAX_DEGREE}]"));
            }
        }
        if self.nodes_per_curve < MIN_NODES {
            return bad(format!(
                "nodes_per_curve = {} must be at least {MIN_NODES}",
                self.nodes_per_curve
            ));
        }
        let tol = &self.tolerances;
        let all = [
            tol.mono,
            tol.deriv,
            tol.concave,
            tol.ineq_abs,
            tol.ineq_rel,
            tol.constancy,
            tol.critical_window,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("tolerances must be finite and >= 0".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        flow_grid(self.t_min, self.t_max, self.t_steps)
    }

    fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            degree: self.degree,
            critical_window: self.tolerances.critical_window,
            exclude_critical: true,
        }
    }

    fn trace_options(&self) -> TraceOptions {
        TraceOptions {
            critical_margin: self.tolerances.critical_window,
            ..TraceOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: Vec<String>,
}

impl CheckSummary {
    fn new(checks: &[CheckReport]) -> Self {
        Self {
            total: checks.len(),
            passed: checks.iter().filter(|c| c.passed).count(),
            failed: checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect(),
        }
    }
}

/// Kernel values at one level with the degree sweep behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDiagnostics {
    pub kernels: LevelKernels,
    pub holes: usize,
    pub nodes: usize,
    /// `(degree, B, Khat)` for each degree tried.
    pub sweep: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub version: String,
    pub method: crate::green::MethodTag,
    pub critical_times: Vec<f64>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
    pub checks: Option<CheckSummary>,
    pub kernels: Option<KernelDiagnostics>,
    /// Rows that failed for reasons other than a critical window.
    pub row_failures: Vec<(f64, String)>,
    pub exit_code: i32,
}

struct Stopwatch {
    timings: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(stage.into(), start.elapsed().as_secs_f64());
        out
    }
}

/// Cache key: the discretized geometry plus the Green representation.
fn cache_key(domain: &PlanarDomain, solver: &GreenSolver) -> String {
    let mut h = Sha256::new();
    h.update(domain.fingerprint().as_bytes());
    h.update(format!("{:?}", solver.method()).as_bytes());
    hex::encode(&h.finalize()[..12])
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents)?;
    artifacts.push(path);
    Ok(())
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Integrity(format!("serialization failed: {e}")))
}

/// Execute the configured command, writing artifacts under `config.out`.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    fs::create_dir_all(&config.out)?;
    let mut clock = Stopwatch {
        timings: BTreeMap::new(),
    };
    let domain = clock.time("domain", || config.domain.build(config.nodes_per_curve))?;
    let solver = clock.time("green", || {
        GreenSolver::new(&domain, config.nodes_per_curve, config.green_method)
    })?;
    let critical = clock.time("critical_set", || solver.critical_times());
    let cache = if config.cache {
        Some(LevelCache::new(
            &config.out.join("cache"),
            &cache_key(&domain, &solver),
        )?)
    } else {
        None
    };
    let trace = config.trace_options();
    let level = |t: f64| -> Result<LevelCurveSet> {
        match &cache {
            Some(c) => c.level(&solver, t, &trace),
            None => trace_level_with(&solver, t, &trace),
        }
    };

    let mut report = RunReport {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        method: solver.method(),
        critical_times: critical,
        timings: BTreeMap::new(),
        artifacts: Vec::new(),
        checks: None,
        kernels: None,
        row_failures: Vec::new(),
        exit_code: 0,
    };
    let out = &config.out;
    match config.command {
        Command::Green => {
            let (csv, crit) = clock.time("sample", || green_sample(&solver));
            write(out.join("green.csv"), csv, &mut report.artifacts)?;
            write(out.join("critical.json"), to_json(&crit)?, &mut report.artifacts)?;
        }
        Command::Bergman | Command::Hardy => {
            let t = config.t.unwrap_or(config.t_min);
            let diag = clock.time("kernels", || kernel_diagnostics(&solver, &level(t)?, config.degree))?;
            write(out.join("kernels.json"), to_json(&diag)?, &mut report.artifacts)?;
            report.kernels = Some(diag);
        }
        Command::Flow => {
            let flow = clock.time("flow", || {
                build_flow_with(&solver, &config.grid(), &config.flow_options(), &level)
            })?;
            emit_flow(&flow, out, "flow.csv", &mut report.artifacts)?;
            emit_plots(&flow, out, &mut report.artifacts)?;
            report.row_failures = flow.failures().to_vec();
        }
        Command::Verify => {
            let options = config.flow_options();
            let flow = clock.time("flow", || build_flow_with(&solver, &config.grid(), &options, &level))?;
            let fine = clock.time("refine", || refine_flow_with(&flow, &solver, &options, &level))?;
            let checks = clock.time("checks", || {
                run_checks_with_refinement(&flow, &fine, &config.tolerances)
            });
            emit_flow(&flow, out, "flow.csv", &mut report.artifacts)?;
            emit_flow(&fine, out, "flow_refined.csv", &mut report.artifacts)?;
            write(out.join("checks.json"), to_json(&checks)?, &mut report.artifacts)?;
            emit_plots(&flow, out, &mut report.artifacts)?;
            let summary = CheckSummary::new(&checks);
            report.row_failures = fine.failures().to_vec();
            if !summary.failed.is_empty() || !report.row_failures.is_empty() {
                report.exit_code = 1;
            }
            report.checks = Some(summary);
        }
    }
    report.timings = clock.timings;
    let path = out.join("report.json");
    report.artifacts.push(path.clone());
    fs::write(&path, to_json(&report)?)?;
    Ok(report)
}

fn emit_flow(flow: &FlowTable, out: &Path, name: &str, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    write(out.join(name), flow.to_csv(), artifacts)
}

fn emit_plots(flow: &FlowTable, out: &Path, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    let rows: Vec<_> = flow.valid_rows().copied().collect();
    let plots = [
        (
            "khat_scaled.svg",
            Labels {
                title: "Khat(t) e^-t",
                x: "t",
                y: "Khat e^-t",
            },
            rows.iter().map(|r| (r.t, r.khat_scaled())).collect::<Vec<_>>(),
        ),
        (
            "inv_bergman.svg",
            Labels {
                title: "1/B against r = e^-t",
                x: "r",
                y: "1/B",
            },
            rows.iter().rev().map(|r| ((-r.t).exp(), r.inv_b)).collect::<Vec<_>>(),
        ),
        (
            "hhat.svg",
            Labels {
                title: "Hhat against r = e^-t",
                x: "r",
                y: "Hhat",
            },
            rows.iter().rev().map(|r| ((-r.t).exp(), r.hhat)).collect::<Vec<_>>(),
        ),
    ];
    for (name, labels, series) in plots {
        let path = out.join(name);
        emit_svg(&series, &labels, &path)?;
        artifacts.push(path);
    }
    Ok(())
}

#[derive(Serialize)]
struct CriticalReport<'a> {
    critical_set: &'a CriticalSet,
    critical_times: Vec<f64>,
    robin_constant: f64,
    conformal_radius: f64,
}

/// `x,y,G` on a regular grid over the outer curve's bounding box (empty G off the domain),
/// and the critical set.
fn green_sample(solver: &GreenSolver) -> (String, CriticalReport<'_>) {
    let pts = solver.domain().outer().points();
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    let mut csv = String::from("x,y,G\n");
    let n = GREEN_GRID - 1;
    for j in 0..=n {
        for i in 0..=n {
            let z = Complex64::new(
                lo.re + (hi.re - lo.re) * i as f64 / n as f64,
                lo.im + (hi.im - lo.im) * j as f64 / n as f64,
            );
            let g = solver.value(z).map(|g| format!("{g:?}")).unwrap_or_default();
            csv.push_str(&format!("{:?},{:?},{g}\n", z.re, z.im));
        }
    }
    let crit = CriticalReport {
        critical_set: solver.critical_set(),
        critical_times: solver.critical_times(),
        robin_constant: solver.robin_constant(),
        conformal_radius: solver.conformal_radius(),
    };
    (csv, crit)
}

fn kernel_diagnostics(solver: &GreenSolver, level: &LevelCurveSet, degree: Option<usize>) -> Result<KernelDiagnostics> {
    let start = degree.unwrap_or_else(|| default_degree(solver.domain()));
    let kernels = kernels_at_level(solver, level, start)?;
    let mut sweep = Vec::new();
    let mut k = start;
    while k <= kernels.degree {
        let basis = HoloBasis::for_level(solver.domain(), level, k)?;
        let (b, khat, _) = factored_kernels(&basis, level, solver.domain().base_point())?;
        sweep.push((k, b, khat));
        k *= 2;
    }
    Ok(KernelDiagnostics {
        kernels,
        holes: level.hole_count(),
        nodes: level.node_count(),
        sweep,
    })
}
