//! Kernel quantities along the sublevel flow `t -> D_t` and the inequalities they obey.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenSolver;
use crate::kernels::{default_degree, kernels_at_level};
use crate::sublevel::{trace_level_with, LevelCurveSet, TraceOptions, DELTA_CRIT};

/// Column order of the CSV form of a [`FlowTable`].
pub const CSV_HEADER: &str = "t,B,Khat,hnormB,invB,H,Hhat,gap_flag";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative slack on monotone sequences.
    pub mono: f64,
    /// Relative slack between finite differences and quadrature.
    pub deriv: f64,
    /// Slack on second differences normalized by the middle value.
    pub concave: f64,
    pub ineq_abs: f64,
    pub ineq_rel: f64,
    /// Relative spread allowed for constant sequences.
    pub constancy: f64,
    /// Rows closer than this to a critical time are not computed.
    pub critical_window: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mono: 1e-6,
            deriv: 1e-2,
            concave: 1e-6,
            ineq_abs: 1e-8,
            ineq_rel: 1e-4,
            constancy: 1e-3,
            critical_window: DELTA_CRIT,
        }
    }
}

impl Tolerances {
    pub fn ineq(&self, rhs: f64) -> f64 {
        self.ineq_abs + self.ineq_rel * rhs.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowRow {
    pub t: f64,
    pub b: f64,
    pub khat: f64,
    pub hnorm_b: f64,
    pub inv_b: f64,
    pub h: f64,
    pub hhat: f64,
    pub gap: bool,
    /// Holes of `D_t`.
    pub holes: usize,
    pub degree: usize,
    pub degree_change: f64,
}

impl FlowRow {
    fn gap(t: f64) -> Self {
        Self {
            t,
            b: f64::NAN,
            khat: f64::NAN,
            hnorm_b: f64::NAN,
            inv_b: f64::NAN,
            h: f64::NAN,
            hhat: f64::NAN,
            gap: true,
            holes: 0,
            degree: 0,
            degree_change: f64::NAN,
        }
    }

    /// `Khat e^{-t}`.
    pub fn khat_scaled(&self) -> f64 {
        self.khat * (-self.t).exp()
    }
}

/// How the integral of `H` beyond the last row was closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tail {
    pub t: f64,
    pub value: f64,
    /// The tail is exact once `Khat e^{-t}` is constant, i.e. past the last critical time.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTable {
    rows: Vec<FlowRow>,
    critical_times: Vec<f64>,
    tail: Option<Tail>,
    failures: Vec<(f64, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Starting basis degree; `None` picks one from the domain.
    pub degree: Option<usize>,
    pub critical_window: f64,
    /// Turn rows near critical times into gaps instead of rejecting the grid.
    pub exclude_critical: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            degree: None,
            critical_window: DELTA_CRIT,
            exclude_critical: true,
        }
    }
}

/// `steps` equispaced times from `t_min` to `t_max` inclusive.
pub fn flow_grid(t_min: f64, t_max: f64, steps: usize) -> Vec<f64> {
    if steps < 2 {
        return vec![t_min];
    }
    let h = (t_max - t_min) / (steps - 1) as f64;
    (0..steps)
        .map(|i| if i + 1 == steps { t_max } else { t_min + h * i as f64 })
        .collect()
}

/// The grid with every interval bisected.
pub fn refine_grid(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.extend(grid.last());
    out
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Configuration("empty t grid".into()));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Configuration("t grid values must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Configuration("t grid must be strictly increasing".into()));
    }
    Ok(())
}

/// The boundary level at t = 0 is exact, so only positive times can sit in a window.
fn in_window(t: f64, critical: &[f64], window: f64) -> bool {
    t > 0.0 && critical.iter().any(|c| (t - c).abs() <= window)
}

pub fn build_flow(solver: &GreenSolver, grid: &[f64], options: &FlowOptions) -> Result<FlowTable> {
    let trace = TraceOptions {
        critical_margin: options.critical_window,
        ..TraceOptions::default()
    };
    build_flow_with(solver, grid, options, &|t| trace_level_with(solver, t, &trace))
}

/// As [`build_flow`], with levels supplied by `level` (for example from a cache).
pub fn build_flow_with(
    solver: &GreenSolver,
    grid: &[f64],
    options: &FlowOptions,
    level: &(dyn Fn(f64) -> Result<LevelCurveSet> + Sync),
) -> Result<FlowTable> {
    validate_grid(grid)?;
    let critical = solver.critical_times();
    if !options.exclude_critical {
        if let Some(&t) = grid.iter().find(|&&t| in_window(t, &critical, options.critical_window)) {
            return Err(Error::Configuration(format!(
                "grid time {t} lies within {} of a critical time",
                options.critical_window
            )));
        }
    }
    let degree = options.degree.unwrap_or_else(|| default_degree(solver.domain()));
    let computed: Vec<(FlowRow, Option<String>)> = grid
        .par_iter()
        .map(|&t| {
            if in_window(t, &critical, options.critical_window) {
                return (FlowRow::gap(t), None);
            }
            let row = level(t).and_then(|l| {
                let k = kernels_at_level(solver, &l, degree)?;
                Ok(FlowRow {
                    t,
                    b: k.bergman,
                    khat: k.khat,
                    hnorm_b: k.hnorm_bergman,
                    inv_b: 1.0 / k.bergman,
                    h: PI / k.khat,
                    hhat: f64::NAN,
                    gap: false,
                    holes: l.hole_count(),
                    degree: k.degree,
                    degree_change: k.degree_change,
                })
            });
            match row {
                Ok(r) => (r, None),
                Err(e) => (FlowRow::gap(t), Some(e.to_string())),
            }
        })
        .collect();
    let failures = computed
        .iter()
        .filter_map(|(r, e)| e.as_ref().map(|e| (r.t, e.clone())))
        .collect();
    let rows = computed.into_iter().map(|(r, _)| r).collect();
    Ok(FlowTable::assemble(rows, critical, failures))
}

/// Refine `coarse` to the bisected grid, computing only the new midpoints.
pub fn refine_flow(coarse: &FlowTable, solver: &GreenSolver, options: &FlowOptions) -> Result<FlowTable> {
    let trace = TraceOptions {
        critical_margin: options.critical_window,
        ..TraceOptions::default()
    };
    refine_flow_with(coarse, solver, options, &|t| trace_level_with(solver, t, &trace))
}

/// As [`refine_flow`], with levels supplied by `level`.
pub fn refine_flow_with(
    coarse: &FlowTable,
    solver: &GreenSolver,
    options: &FlowOptions,
    level: &(dyn Fn(f64) -> Result<LevelCurveSet> + Sync),
) -> Result<FlowTable> {
    let grid = coarse.t_grid();
    let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if mids.is_empty() {
        return Ok(coarse.clone());
    }
    let fine = build_flow_with(solver, &mids, options, level)?;
    let mut rows = Vec::with_capacity(grid.len() + mids.len());
    for (i, r) in coarse.rows.iter().enumerate() {
        rows.push(*r);
        if let Some(m) = fine.rows.get(i) {
            rows.push(*m);
        }
    }
    let mut failures = coarse.failures.clone();
    failures.extend(fine.failures);
    failures.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(FlowTable::assemble(rows, coarse.critical_times.clone(), failures))
}

/// `int_a^b (p + (q - p)(s - a)/(b - a)) e^{-s} ds`.
fn linear_times_exp(a: f64, b: f64, p: f64, q: f64) -> f64 {
    let h = b - a;
    let ea = (-a).exp();
    let base = ea * -(-h).exp_m1();
    // int_0^h u e^{-(a+u)} du
    let first = ea * (1.0 - (-h).exp() * (1.0 + h));
    p * base + (q - p) / h * first
}

/// `int_{t_i}^{t_j} f(s) e^{-s} ds` for `f` sampled at both ends: linear when smooth,
/// one-sided constants when a critical time lies between the samples.
fn segment_integral(ti: f64, tj: f64, fi: f64, fj: f64, critical: &[f64]) -> f64 {
    let inside: Vec<f64> = critical.iter().copied().filter(|&c| c > ti && c < tj).collect();
    match (inside.first(), inside.last()) {
        (Some(&c0), Some(&c1)) => {
            let mid = 0.5 * (fi + fj);
            fi * ((-ti).exp() - (-c0).exp()) + mid * ((-c0).exp() - (-c1).exp()) + fj * ((-c1).exp() - (-tj).exp())
        }
        _ => linear_times_exp(ti, tj, fi, fj),
    }
}

impl FlowTable {
    fn assemble(mut rows: Vec<FlowRow>, critical_times: Vec<f64>, failures: Vec<(f64, String)>) -> Self {
        let valid: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].gap).collect();
        let tail = valid.last().map(|&last| {
            let r = rows[last];
            Tail {
                t: r.t,
                value: r.h,
                exact: critical_times.iter().all(|&c| c < r.t),
            }
        });
        if let Some(tail) = tail {
            let phi = |r: &FlowRow| r.h * r.t.exp();
            let mut acc = tail.value;
            rows[*valid.last().unwrap()].hhat = acc;
            for w in valid.windows(2).rev() {
                let (a, b) = (rows[w[0]], rows[w[1]]);
                acc += segment_integral(a.t, b.t, phi(&a), phi(&b), &critical_times);
                rows[w[0]].hhat = acc;
            }
        }
        Self {
            rows,
            critical_times,
            tail,
            failures,
        }
    }

    pub fn rows(&self) -> &[FlowRow] {
        &self.rows
    }

    pub fn valid_rows(&self) -> impl Iterator<Item = &FlowRow> {
        self.rows.iter().filter(|r| !r.gap)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn critical_times(&self) -> &[f64] {
        &self.critical_times
    }

    pub fn tail(&self) -> Option<Tail> {
        self.tail
    }

    /// Rows that failed for reasons other than a critical window.
    pub fn failures(&self) -> &[(f64, String)] {
        &self.failures
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                r.t, r.b, r.khat, r.hnorm_b, r.inv_b, r.h, r.hhat, r.gap as u8
            );
        }
        out
    }

    /// Replace one value, for exercising the checks.
    #[doc(hidden)]
    pub fn with_row(&self, index: usize, f: impl FnOnce(&mut FlowRow)) -> Self {
        let mut rows = self.rows.clone();
        f(&mut rows[index]);
        Self { rows, ..self.clone() }
    }

    fn crosses_critical(&self, a: f64, b: f64) -> bool {
        self.critical_times.iter().any(|&c| c > a && c <= b)
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub worst_violation: f64,
    /// Time (or first time of the pair) where the worst violation occurs.
    pub location: Option<f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub metrics: BTreeMap<String, f64>,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            worst_violation: 0.0,
            location: None,
            tolerance,
            samples: 0,
            metrics: BTreeMap::new(),
            detail: String::new(),
        }
    }

    /// Record a violation measure; anything above the tolerance fails the check.
    fn observe(&mut self, violation: f64, at: f64) {
        self.samples += 1;
        if violation.is_nan() {
            self.passed = false;
            self.location.get_or_insert(at);
            return;
        }
        if violation > self.worst_violation || self.location.is_none() {
            self.worst_violation = violation;
            self.location = Some(at);
        }
        if violation > self.tolerance {
            self.passed = false;
        }
    }

    /// As `observe`, with a tolerance specific to this sample.
    fn observe_scaled(&mut self, violation: f64, tol: f64, at: f64) {
        self.observe(violation / tol * self.tolerance, at);
    }

    fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.into(), value);
        self
    }
}

fn valid(flow: &FlowTable) -> Vec<FlowRow> {
    flow.valid_rows().copied().collect()
}

/// Relative increase of a sequence that must not increase.
fn nonincreasing(name: &str, rows: &[FlowRow], f: impl Fn(&FlowRow) -> f64, tol: f64) -> CheckReport {
    let mut rep = CheckReport::new(name, tol);
    for w in rows.windows(2) {
        let (a, b) = (f(&w[0]), f(&w[1]));
        rep.observe((b - a) / a.abs(), w[1].t);
    }
    rep
}

/// `Khat e^{-t}` does not increase; with a refined table, the refined values at the
/// coarse times must agree and the new midpoints must fit between their neighbours.
pub fn check_khat_monotone(flow: &FlowTable, refined: Option<&FlowTable>, tol: &Tolerances) -> CheckReport {
    let rows = valid(flow);
    let mut rep = nonincreasing("khat_monotone", &rows, FlowRow::khat_scaled, tol.mono);
    let first_crit = flow.critical_times.first().copied().unwrap_or(f64::INFINITY);
    let pre: Vec<&FlowRow> = rows.iter().filter(|r| r.t < first_crit).collect();
    let min_drop = pre
        .windows(2)
        .map(|w| (w[0].khat_scaled() - w[1].khat_scaled()) / w[0].khat_scaled())
        .fold(f64::INFINITY, f64::min);
    rep = rep.metric("precritical_rows", pre.len() as f64);
    if pre.len() > 1 {
        rep = rep.metric("precritical_min_drop", min_drop);
    }
    if let Some(fine) = refined {
        let fine_rows = valid(fine);
        let mut worst: f64 = 0.0;
        for r in &rows {
            if let Some(f) = fine_rows.iter().find(|f| f.t == r.t) {
                worst = worst.max((f.khat_scaled() - r.khat_scaled()).abs() / r.khat_scaled());
            }
        }
        rep = rep.metric("refinement_mismatch", worst);
        if worst > tol.mono {
            rep.passed = false;
        }
        let refined_rep = nonincreasing("", &fine_rows, FlowRow::khat_scaled, tol.mono);
        rep = rep.metric("refined_worst_increase", refined_rep.worst_violation);
        if !refined_rep.passed {
            rep.passed = false;
        }
    }
    rep
}

/// Middle point of every consecutive triple (in r = e^{-t}) with its normalized second
/// difference: the divided difference times the squared half span, over the middle value.
fn second_differences(rows: &[FlowRow], f: impl Fn(&FlowRow) -> f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| ((-r.t).exp(), f(r), r.t)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(3)
        .map(|w| {
            let [(r0, f0, _), (r1, f1, t1), (r2, f2, _)] = [w[0], w[1], w[2]];
            let dd = 2.0 * ((f2 - f1) / (r2 - r1) - (f1 - f0) / (r1 - r0)) / (r2 - r0);
            let half = 0.5 * (r2 - r0);
            (t1, dd * half * half / f1.abs())
        })
        .collect()
}

fn concavity(name: &str, flow: &FlowTable, f: impl Fn(&FlowRow) -> f64, tol: f64) -> CheckReport {
    let mut rep = CheckReport::new(name, tol);
    let diffs = second_differences(&valid(flow), f);
    for &(t, d) in &diffs {
        rep.observe(d, t);
    }
    let most_concave = diffs.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    if !diffs.is_empty() {
        rep = rep.metric("min_second_difference", most_concave);
    }
    rep
}

/// `1/B` is concave as a function of `r = e^{-t}`.
pub fn check_bergman_concavity(flow: &FlowTable, tol: &Tolerances) -> CheckReport {
    concavity("bergman_concavity", flow, |r| r.inv_b, tol.concave)
}

/// `Hhat` is concave as a function of `r = e^{-t}`.
pub fn check_hhat_concavity(flow: &FlowTable, tol: &Tolerances) -> CheckReport {
    concavity("hhat_concavity", flow, |r| r.hhat, tol.concave)
}

/// Interior rows whose neighbours are valid, adjacent and on the same side of every
/// critical time, with the three-point derivative of `f` there.
fn central_derivatives(flow: &FlowTable, f: impl Fn(&FlowRow) -> f64) -> Vec<(FlowRow, f64)> {
    flow.rows
        .windows(3)
        .filter(|w| !w.iter().any(|r| r.gap) && !flow.crosses_critical(w[0].t, w[2].t))
        .map(|w| {
            let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
            let d =
                -h2 / (h1 * (h1 + h2)) * f(&w[0]) + (h2 - h1) / (h1 * h2) * f(&w[1]) + h1 / (h2 * (h1 + h2)) * f(&w[2]);
            (w[1], d)
        })
        .collect()
}

/// `||B(., z0)||^2 e^t / B^2` does not decrease.
pub fn check_norm_ratio_monotone(flow: &FlowTable, tol: &Tolerances) -> CheckReport {
    let rows = valid(flow);
    nonincreasing(
        "norm_ratio_monotone",
        &rows,
        |r| -r.hnorm_b * r.t.exp() / (r.b * r.b),
        tol.mono,
    )
}

/// `e^t 2 pi ||B(., z0)||^2 / B^2`, the normalized extremal function's weighted norm,
/// does not decrease.
pub fn check_weighted_norm_monotone(flow: &FlowTable, tol: &Tolerances) -> CheckReport {
    let rows = valid(flow);
    nonincreasing(
        "weighted_norm_monotone",
        &rows,
        |r| -2.0 * PI * r.hnorm_b * r.t.exp() / (r.b * r.b),
        tol.mono,
    )
}

/// `dB/dt = pi ||B(., z0)||^2` away from critical times.
pub fn check_derivative_identity(flow: &FlowTable, tol: &Tolerances) -> CheckReport {
    let mut rep = CheckReport::new("derivative_identity", tol.deriv);
    for (r, d) in central_derivatives(flow, |r| r.b) {
        let q = PI * r.hnorm_b;
        rep.observe((d - q).abs() / q, r.t);
    }
    rep
}

/// `pi / Khat <= -d(1/B)/dt` away from critical times.
pub fn check_h_derivative_bound(flow: &FlowTable, tol: &Tolerances) -> CheckReport {
    let mut rep = CheckReport::new("h_derivative_bound", tol.ineq_rel);
    for (r, d) in central_derivatives(flow, |r| r.inv_b) {
        let rhs = -d;
        rep.observe_scaled(r.h - rhs, tol.ineq(rhs), r.t);
    }
    rep
}

/// The chain `pi/Khat(t0) <= Hhat(t0) <= int pi ||B||^2/B^2 <= 1/B(t0)` from the first
/// valid row, and `Khat >= pi B` there, strictly when `D_{t0}` has holes.
pub fn check_saitoh_chain(flow: &FlowTable, tol: &Tolerances) -> CheckReport {
    let rows = valid(flow);
    let mut rep = CheckReport::new("saitoh_chain", tol.ineq_rel);
    let Some(first) = rows.first().copied() else {
        rep.passed = false;
        rep.detail = "no valid rows".into();
        return rep;
    };
    let last = *rows.last().unwrap();
    let chi = |r: &FlowRow| PI * r.hnorm_b * r.t.exp() / (r.b * r.b);
    let mut middle = last.inv_b;
    for w in rows.windows(2) {
        middle += segment_integral(w[0].t, w[1].t, chi(&w[0]), chi(&w[1]), &flow.critical_times);
    }
    let steps = [first.h, first.hhat, middle, first.inv_b];
    for w in steps.windows(2) {
        rep.observe_scaled(w[0] - w[1], tol.ineq(w[1]), first.t);
    }
    let gap = first.khat - PI * first.b;
    let err = first.degree_change * (first.khat + PI * first.b) + 1e-12 * first.khat;
    rep.observe_scaled(-gap, tol.ineq(PI * first.b), first.t);
    rep = rep
        .metric("h", first.h)
        .metric("hhat", first.hhat)
        .metric("norm_integral", middle)
        .metric("inv_b", first.inv_b)
        .metric("khat_minus_pi_b", gap)
        .metric("error_estimate", err);
    if first.holes > 0 {
        let strict = gap > 10.0 * err;
        rep = rep.metric("strict_margin_ratio", gap / err);
        if !strict {
            rep.passed = false;
            rep.detail = format!("Khat - pi B = {gap:e} is not above 10x the error estimate {err:e}");
        }
    }
    rep
}

/// For all pairs `t1 < t0` of valid rows:
/// (a) `int_{t1}^{t0} 1/Khat dt / (e^{-t1} - e^{-t0}) <= e^{t0}/Khat(t0)`;
/// (b) `1/B(t1) <= 1/B(t0) + (e^{-t1} - e^{-t0}) e^{t0} pi ||B||^2(t0)/B(t0)^2`.
pub fn check_pair_inequalities(flow: &FlowTable, tol: &Tolerances) -> [CheckReport; 2] {
    let rows = valid(flow);
    let mut a = CheckReport::new("pair_inequality_khat", tol.ineq_rel);
    let mut b = CheckReport::new("pair_inequality_bergman", tol.ineq_rel);
    for (j, r0) in rows.iter().enumerate() {
        for r1 in &rows[..j] {
            let span = (-r1.t).exp() - (-r0.t).exp();
            let lhs = (r1.hhat - r0.hhat) / PI / span;
            let rhs = r0.t.exp() / r0.khat;
            a.observe_scaled(lhs - rhs, tol.ineq(rhs), r1.t);
            let rhs = r0.inv_b + span * r0.t.exp() * PI * r0.hnorm_b / (r0.b * r0.b);
            b.observe_scaled(r1.inv_b - rhs, tol.ineq(rhs), r1.t);
        }
    }
    [a, b]
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 {
        0.0
    } else {
        (hi - lo) / hi.abs()
    }
}

/// `Khat e^{-t}` is constant once `D_t` is simply connected, i.e. past the last critical
/// time. Also reports the spread before the first critical time.
pub fn check_postcritical_constancy(flow: &FlowTable, tol: &Tolerances) -> CheckReport {
    let mut rep = CheckReport::new("postcritical_constancy", tol.constancy);
    let (Some(&first), Some(&last)) = (flow.critical_times.first(), flow.critical_times.last()) else {
        rep.detail = "no critical times".into();
        return rep;
    };
    let rows = valid(flow);
    let post: Vec<f64> = rows.iter().filter(|r| r.t > last).map(FlowRow::khat_scaled).collect();
    let pre: Vec<f64> = rows.iter().filter(|r| r.t < first).map(FlowRow::khat_scaled).collect();
    let s = spread(&post);
    rep.observe(s, last);
    rep.samples = post.len();
    rep.metric("postcritical_spread", s)
        .metric("postcritical_rows", post.len() as f64)
        .metric("precritical_spread", spread(&pre))
        .metric("precritical_rows", pre.len() as f64)
}

/// Every check on one table; `refined` is the same flow on the bisected grid.
pub fn run_checks(flow: &FlowTable, refined: Option<&FlowTable>, tol: &Tolerances) -> Vec<CheckReport> {
    let [pa, pb] = check_pair_inequalities(flow, tol);
    vec![
        check_khat_monotone(flow, refined, tol),
        check_bergman_concavity(flow, tol),
        check_norm_ratio_monotone(flow, tol),
        check_derivative_identity(flow, tol),
        check_weighted_norm_monotone(flow, tol),
        check_h_derivative_bound(flow, tol),
        check_saitoh_chain(flow, tol),
        pa,
        pb,
        check_hhat_concavity(flow, tol),
        check_postcritical_constancy(flow, tol),
    ]
}

/// Checks on the coarse table plus a report that every verdict survives grid refinement.
pub fn run_checks_with_refinement(flow: &FlowTable, refined: &FlowTable, tol: &Tolerances) -> Vec<CheckReport> {
    let mut coarse = run_checks(flow, Some(refined), tol);
    let fine = run_checks(refined, None, tol);
    let mut rep = CheckReport::new("grid_stability", 0.0);
    let flipped: Vec<&str> = coarse
        .iter()
        .zip(&fine)
        .filter(|(c, f)| c.name != "khat_monotone" && c.passed != f.passed)
        .map(|(c, _)| c.name.as_str())
        .collect();
    rep.samples = fine.len();
    if !flipped.is_empty() {
        rep.passed = false;
        rep.worst_violation = flipped.len() as f64;
        rep.detail = format!("verdict changed on refinement: {}", flipped.join(", "));
    }
    coarse.push(rep);
    coarse
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_annulus, make_disk};
    use crate::green::build_green;
    use num_complex::Complex64;

    fn disk_flow(steps: usize) -> FlowTable {
        let d = make_disk(1.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        let g = build_green(&d, 256).unwrap();
        build_flow(&g, &flow_grid(0.0, 2.0, steps), &FlowOptions::default()).unwrap()
    }

    #[test]
    fn segment_integral_is_exact_for_linear_data() {
        let (a, b) = (0.3, 1.1);
        let f = |s: f64| 2.0 + 0.5 * s;
        // int (2 + s/2) e^{-s} = [-(2 + s/2) e^{-s} - e^{-s}/2]
        let prim = |s: f64| -(f(s) + 0.5) * (-s).exp();
        let got = segment_integral(a, b, f(a), f(b), &[]);
        assert!((got - (prim(b) - prim(a))).abs() < 1e-15);
    }

    #[test]
    fn grids() {
        let g = flow_grid(0.0, 2.0, 5);
        assert_eq!(g, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(refine_grid(&g).len(), 9);
        assert_eq!(refine_grid(&g)[1], 0.25);
    }

    #[test]
    fn disk_flow_matches_closed_forms() {
        let flow = disk_flow(17);
        for r in flow.valid_rows() {
            let e = r.t.exp();
            assert!((r.b - e / PI).abs() < 1e-10 * r.b);
            assert!((r.khat - e).abs() < 1e-10 * r.khat);
            assert!((r.hnorm_b - e / (PI * PI)).abs() < 1e-9 * r.hnorm_b);
            assert!((r.hhat - PI * (-r.t).exp()).abs() < 1e-10);
        }
        assert!(flow.tail().unwrap().exact);
        for rep in run_checks(&flow, None, &Tolerances::default()) {
            assert!(rep.passed, "{rep:?}");
        }
        let conc = check_bergman_concavity(&flow, &Tolerances::default());
        assert!(conc.worst_violation.abs() < 1e-8);
    }

    #[test]
    fn detectors_fire_on_perturbed_tables() {
        let flow = disk_flow(17);
        let tol = Tolerances::default();
        let bumped = flow.with_row(8, |r| r.khat *= 1.01);
        let rep = check_khat_monotone(&bumped, None, &tol);
        assert!(!rep.passed);
        assert_eq!(rep.location, Some(flow.rows()[8].t));

        let bumped = flow.with_row(8, |r| r.inv_b *= 0.99);
        assert!(!check_bergman_concavity(&bumped, &tol).passed);
        let bumped = flow.with_row(8, |r| r.hhat *= 0.99);
        assert!(!check_hhat_concavity(&bumped, &tol).passed);

        let flipped = flow.with_row(3, |r| r.hhat *= 1.1);
        assert!(!check_pair_inequalities(&flipped, &tol)[0].passed);
    }

    #[test]
    fn grid_through_a_critical_time_is_rejected_without_exclusion() {
        let d = make_annulus(0.5, Complex64::new(0.7, 0.0)).unwrap();
        let g = build_green(&d, 256).unwrap();
        let tc = g.critical_times()[0];
        let opts = FlowOptions {
            exclude_critical: false,
            ..FlowOptions::default()
        };
        let err = build_flow(&g, &[0.0, tc, 0.5], &opts).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
        let flow = build_flow(&g, &[0.0, tc, 0.5], &FlowOptions::default()).unwrap();
        assert_eq!(flow.rows().iter().filter(|r| r.gap).count(), 1);
        assert!(flow.failures().is_empty());
    }

    #[test]
    fn csv_layout() {
        let flow = disk_flow(9);
        let csv = flow.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 8);
        assert_eq!(first[0], "0.0");
        assert_eq!(first[7], "0");
    }
}
