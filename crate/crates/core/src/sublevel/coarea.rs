//! Area integrals over `D_t` as iterated integrals over level curves.
//!
//! Between critical times the inner integral is analytic in t and Gauss-Legendre
//! panels converge quickly. Near a critical time it has a logarithmic singularity, so
//! panels are graded geometrically toward it and the last stretch is bridged with the
//! model `alpha + beta log e + gamma e`. Beyond `t_max` the remaining star-shaped set is
//! integrated directly in polar form about z0.

use num_complex::Complex64;
use rayon::prelude::*;

use super::trace::{trace_level_with, TraceOptions};
use super::LevelCurveSet;
use crate::error::{Error, Result};
use crate::green::GreenSolver;
use crate::spectral::gauss_legendre_on;

/// Largest offset from a critical time that is bridged by the model.
const E_MIN_CAP: f64 = 1e-5;
/// Bridged offset relative to the critical time itself.
const E_MIN_REL: f64 = 1e-1;
const GRADING: f64 = 4.0;
const SMOOTH_PANEL: f64 = 1.0;
const SMOOTH_ORDER: usize = 12;
const GRADED_ORDER: usize = 8;
const TAIL_ORDER: usize = 24;
const ECCENTRICITY: f64 = 1e-3;
const MAX_TAIL_SEARCH: f64 = 40.0;
/// Critical times this far below `t_from` still shape the first panels.
const SINGULAR_REACH: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
struct Bridge {
    /// Bridged offsets from the singularity; the near end may be 0.
    span: (f64, f64),
    /// Offsets from the singularity and indices of the three closest levels.
    fit: [(f64, usize); 3],
}

#[derive(Debug, Clone)]
pub struct CoareaQuadrature {
    t_from: f64,
    t_max: f64,
    conformal_radius: f64,
    nodes: Vec<(f64, f64)>,
    levels: Vec<LevelCurveSet>,
    bridges: Vec<Bridge>,
    tail: LevelCurveSet,
    base_point: Complex64,
}

#[derive(Default)]
struct Rule {
    nodes: Vec<(f64, f64)>,
    bridges: Vec<Bridge>,
}

impl Rule {
    fn smooth(&mut self, a: f64, b: f64) {
        let panels = ((b - a) / SMOOTH_PANEL).ceil().max(1.0) as usize;
        let w = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + w * p as f64;
            self.nodes.extend(gauss_legendre_on(SMOOTH_ORDER, lo, lo + w));
        }
    }

    /// Panels on an interval of length `len` whose near end lies at distance `d` from a
    /// singular time `tau`; `sign` is +1 when the interval lies above `tau`.
    fn graded(&mut self, tau: f64, e_min: f64, d: f64, len: f64, sign: f64) {
        let map = |e: f64| tau + sign * e;
        let lo = d.max(e_min);
        if lo >= d + len {
            for (e, w) in gauss_legendre_on(GRADED_ORDER / 2, d, d + len) {
                self.nodes.push((map(e), w));
            }
            return;
        }
        let first = self.nodes.len();
        let mut a = lo;
        while a < d + len {
            let b = (a * GRADING).min(d + len);
            let b = if d + len - b < 0.5 * (b - a) { d + len } else { b };
            for (e, w) in gauss_legendre_on(GRADED_ORDER, a, b) {
                self.nodes.push((map(e), w));
            }
            a = b;
        }
        if lo > d {
            let panel = gauss_legendre_on(GRADED_ORDER, lo, (lo * GRADING).min(d + len));
            self.bridges.push(Bridge {
                span: (d, lo),
                fit: [0, 1, 2].map(|k| (panel[k].0, first + k)),
            });
        }
    }
}

/// `crit` holds (critical time, smallest resolved offset), ascending in time.
fn build_rule(t_from: f64, t_max: f64, crit: &[(f64, f64)]) -> Rule {
    let mut rule = Rule::default();
    let mut breaks = vec![(t_from, None)];
    breaks.extend(
        crit.iter()
            .filter(|&&(c, _)| c > t_from && c < t_max)
            .map(|&(c, e)| (c, Some((c, e)))),
    );
    breaks.push((t_max, None));
    let below = crit
        .iter()
        .copied()
        .rfind(|&(c, _)| c <= t_from && t_from - c < SINGULAR_REACH);
    for (i, pair) in breaks.windows(2).enumerate() {
        let ((a, sa), (b, sb)) = (pair[0], pair[1]);
        let left = if i == 0 { below } else { sa };
        match (left, sb) {
            (None, None) => rule.smooth(a, b),
            (Some((tau, e)), None) => {
                let split = (a + SINGULAR_REACH).min(b);
                rule.graded(tau, e, a - tau, split - a, 1.0);
                if split < b {
                    rule.smooth(split, b);
                }
            }
            (None, Some((tau, e))) => {
                let split = (b - SINGULAR_REACH).max(a);
                if split > a {
                    rule.smooth(a, split);
                }
                rule.graded(tau, e, 0.0, b - split, -1.0);
            }
            (Some((ta, ea)), Some((tb, eb))) => {
                let m = 0.5 * (a + b);
                rule.graded(ta, ea, a - ta, m - a, 1.0);
                rule.graded(tb, eb, 0.0, b - m, -1.0);
            }
        }
    }
    rule
}

fn eccentricity(level: &LevelCurveSet, z0: Complex64) -> f64 {
    let (lo, hi) = level
        .outer()
        .nodes
        .iter()
        .map(|z| (z - z0).norm())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    (hi - lo) / (hi + lo)
}

fn star_shaped(level: &LevelCurveSet, z0: Complex64) -> bool {
    let c = level.outer();
    level.components().len() == 1
        && c.nodes
            .iter()
            .zip(c.dz())
            .all(|(z, dz)| ((z - z0).conj() * dz).im > 0.0)
}

/// Polar rule about z0 for the star-shaped set bounded by `level`.
fn polar_rule(level: &LevelCurveSet, z0: Complex64, out: &mut Vec<(Complex64, f64)>) {
    let radial = gauss_legendre_on(TAIL_ORDER, 0.0, 1.0);
    let c = level.outer();
    for (z, dz) in c.nodes.iter().zip(c.dz()) {
        let r = z - z0;
        let jac = (r.conj() * dz).im;
        out.extend(radial.iter().map(|&(l, w)| (z0 + l * r, l * w * jac)));
    }
}

pub fn build_coarea(solver: &GreenSolver, t_from: f64) -> Result<CoareaQuadrature> {
    if !(t_from.is_finite() && t_from >= 0.0) {
        return Err(Error::Configuration(format!(
            "t_from = {t_from} must be finite and >= 0"
        )));
    }
    let z0 = solver.domain().base_point();
    // a tiny critical time means G is tiny near the saddle, and the density varies on
    // the scale of that time rather than of the domain
    let crit: Vec<(f64, f64)> = solver
        .critical_times()
        .into_iter()
        .map(|c| (c, (E_MIN_REL * c).min(E_MIN_CAP)))
        .collect();
    let opts = TraceOptions {
        critical_margin: 0.0,
        ..TraceOptions::default()
    };
    let mut t_max = crit.iter().map(|c| c.0).fold(t_from, f64::max) + 1.0;
    let tail = loop {
        let level = trace_level_with(solver, t_max, &opts)?;
        let star = star_shaped(&level, z0);
        if star && (eccentricity(&level, z0) < ECCENTRICITY || t_max >= t_from + MAX_TAIL_SEARCH) {
            break level;
        }
        if t_max >= t_from + MAX_TAIL_SEARCH {
            return Err(Error::TracingFailure {
                t: t_max,
                detail: "no star-shaped sublevel set found for the tail".into(),
            });
        }
        t_max += 1.0;
    };
    let rule = build_rule(t_from, t_max, &crit);
    let levels = rule
        .nodes
        .par_iter()
        .map(|&(t, _)| trace_level_with(solver, t, &opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoareaQuadrature {
        t_from,
        t_max,
        conformal_radius: solver.conformal_radius(),
        nodes: rule.nodes,
        levels,
        bridges: rule.bridges,
        tail,
        base_point: z0,
    })
}

impl CoareaQuadrature {
    pub fn t_from(&self) -> f64 {
        self.t_from
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn conformal_radius(&self) -> f64 {
        self.conformal_radius
    }

    /// Quadrature times in `(t_from, t_max)`.
    pub fn t_grid(&self) -> Vec<f64> {
        self.nodes.iter().map(|&(t, _)| t).collect()
    }

    pub fn levels(&self) -> &[LevelCurveSet] {
        &self.levels
    }

    pub fn tail_level(&self) -> &LevelCurveSet {
        &self.tail
    }

    /// Weights on each traced level that reproduce the level quadrature in t,
    /// including the bridges.
    fn level_weights(&self) -> Vec<f64> {
        let mut weights: Vec<f64> = self.nodes.iter().map(|&(_, w)| w).collect();
        for b in &self.bridges {
            // fit alpha + beta ln e + gamma e through the three closest levels and
            // integrate the model over the span
            let rows = b.fit.map(|(e, _)| [1.0, e.ln(), e]);
            let m = nalgebra::Matrix3::from_fn(|i, j| rows[i][j]);
            let Some(inv) = m.try_inverse() else {
                continue;
            };
            let primitive = |e: f64| {
                let l = if e > 0.0 { e * (e.ln() - 1.0) } else { 0.0 };
                nalgebra::RowVector3::new(e, l, 0.5 * e * e)
            };
            let coef = (primitive(b.span.1) - primitive(b.span.0)) * inv;
            for k in 0..3 {
                weights[b.fit[k].1] += coef[k];
            }
        }
        weights
    }

    /// Points and area weights of the full rule over `D_{t_from}`.
    pub fn area_rule(&self) -> Vec<(Complex64, f64)> {
        let mut out = Vec::new();
        for (level, w) in self.levels.iter().zip(self.level_weights()) {
            for c in level.components() {
                for ((&z, dw), g) in c.nodes.iter().zip(&c.weights).zip(&c.grad_norm) {
                    out.push((z, w * dw / (2.0 * g)));
                }
            }
        }
        polar_rule(&self.tail, self.base_point, &mut out);
        out
    }

    /// Integral of `f` over `D_{t_from}` with respect to area measure.
    pub fn integrate<F: Fn(Complex64) -> Complex64 + Sync>(&self, f: F) -> Complex64 {
        let terms: Vec<Complex64> = self.area_rule().par_iter().map(|&(z, w)| f(z) * w).collect();
        terms.iter().sum()
    }
}

/// Area integral of `f` over `D_{t_from}`.
pub fn coarea_integrate<F: Fn(Complex64) -> Complex64 + Sync>(
    solver: &GreenSolver,
    f: F,
    t_from: f64,
) -> Result<Complex64> {
    Ok(build_coarea(solver, t_from)?.integrate(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_annulus, make_disk};
    use crate::green::build_green;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disk_area_and_moment() {
        let d = make_disk(1.0, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let g = build_green(&d, 256).unwrap();
        let q = build_coarea(&g, 0.0).unwrap();
        assert!((q.integrate(|_| c(1.0, 0.0)) - PI).norm() < 1e-6);
        assert!((q.integrate(|z| c(z.norm_sqr(), 0.0)) - PI / 2.0).norm() < 1e-6);
    }

    #[test]
    fn annulus_area_across_its_critical_time() {
        let d = make_annulus(0.5, c(0.7, 0.0)).unwrap();
        let g = build_green(&d, 256).unwrap();
        let area = coarea_integrate(&g, |_| c(1.0, 0.0), 0.0).unwrap();
        assert!((area.re - 0.75 * PI).abs() < 1e-4, "{area}");
    }
}
