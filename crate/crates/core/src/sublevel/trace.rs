use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{LevelComponent, LevelCurveSet, DELTA_CRIT, LEVEL_TOL};
use crate::error::{Error, Result};
use crate::green::GreenSolver;
use crate::spectral::{differentiate, fourier_coefficients, gauss_legendre_on, TrigInterpolant};

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// Initial node count per component; doubled until the spectral tail is negligible.
    pub nodes: usize,
    pub max_nodes: usize,
    /// Minimal distance in t from every critical time.
    pub critical_margin: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            nodes: 256,
            max_nodes: 8192,
            critical_margin: DELTA_CRIT,
        }
    }
}

const MARCH_DIVISIONS: f64 = 512.0;
const MAX_MARCH_STEPS: usize = 200_000;
const REPARAM_ROUNDS: usize = 3;
const SPECTRAL_TAIL: f64 = 1e-11;

pub fn trace_level(solver: &GreenSolver, t: f64) -> Result<LevelCurveSet> {
    trace_level_with(solver, t, &TraceOptions::default())
}

pub fn trace_level_with(solver: &GreenSolver, t: f64, opts: &TraceOptions) -> Result<LevelCurveSet> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Configuration(format!(
            "level time t = {t} must be finite and >= 0"
        )));
    }
    if t == 0.0 {
        return boundary_level(solver);
    }
    if let Some(tc) = solver
        .critical_times()
        .into_iter()
        .find(|tc| (t - tc).abs() < opts.critical_margin)
    {
        return Err(Error::NearCritical {
            t,
            detail: format!("critical time {tc} is closer than {}", opts.critical_margin),
        });
    }
    let level = -0.5 * t;
    let seeds = find_seeds(solver, level);
    if seeds.is_empty() {
        return Err(Error::TracingFailure {
            t,
            detail: "no level crossings found along probe rays".into(),
        });
    }
    let mut polylines: Vec<Polyline> = Vec::new();
    for seed in seeds {
        if polylines.iter().any(|p| p.passes_near(seed)) {
            continue;
        }
        polylines.push(march(solver, seed, level, t)?);
    }
    let components = polylines
        .par_iter()
        .map(|p| resample(solver, p, level, t, opts))
        .collect::<Result<Vec<_>>>()?;
    let set = LevelCurveSet::from_components(t, components)?;
    let w = set.winding_number(solver.domain().base_point());
    if w != 1 {
        return Err(Error::Integrity(format!("level t = {t} winds {w} times around z0")));
    }
    Ok(set)
}

/// The level t = 0 is the boundary of the domain itself.
fn boundary_level(solver: &GreenSolver) -> Result<LevelCurveSet> {
    let components = solver
        .domain()
        .curves()
        .enumerate()
        .map(|(i, curve)| {
            let phi = solver.boundary_phi(i);
            let grad_norm: Vec<f64> = phi.iter().map(|p| p.norm()).collect();
            if grad_norm.iter().any(|&g| g < solver.tol_crit()) {
                return Err(Error::NearCritical {
                    t: 0.0,
                    detail: "vanishing normal derivative on the boundary".into(),
                });
            }
            Ok(LevelComponent {
                nodes: curve.points().to_vec(),
                weights: curve.weights(),
                normals: curve.right_normals(),
                grad_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LevelCurveSet::from_components(0.0, components)
}

/// Root of `G - level` on the segment between `a` and `b`, where the signs differ.
fn bracketed_root(solver: &GreenSolver, a: (Complex64, f64), b: (Complex64, f64), level: f64) -> Complex64 {
    let dir = b.0 - a.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut flo = a.1 - level;
    let mut x = flo / (flo - (b.1 - level));
    for _ in 0..100 {
        let z = a.0 + dir * x;
        let f = solver.value_raw(z) - level;
        if f == 0.0 {
            return z;
        }
        if f.signum() == flo.signum() {
            lo = x;
            flo = f;
        } else {
            hi = x;
        }
        let df = (solver.phi_raw(z) * dir).re;
        let newton = x - f / df;
        x = if df != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) * dir.norm() < 1e-15 || (f.abs() < 1e-16 * (1.0 + level.abs())) {
            break;
        }
    }
    a.0 + dir * x
}

fn find_seeds(solver: &GreenSolver, level: f64) -> Vec<Complex64> {
    solver
        .probe_segments()
        .par_iter()
        .flat_map_iter(|seg| {
            seg.samples
                .windows(2)
                .filter(|w| (w[0].1 - level).signum() != (w[1].1 - level).signum())
                .map(|w| bracketed_root(solver, w[0], w[1], level))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Newton projection onto `{G = level}` along the gradient.
fn project(solver: &GreenSolver, mut z: Complex64, level: f64, t: f64) -> Result<Complex64> {
    let tol = solver.tol_crit();
    for _ in 0..30 {
        let f = solver.value_raw(z) - level;
        let phi = solver.phi_raw(z);
        let g2 = phi.norm_sqr();
        if g2.sqrt() < tol {
            return Err(Error::NearCritical {
                t,
                detail: format!("|grad G| = {:e} at ({}, {})", g2.sqrt(), z.re, z.im),
            });
        }
        let dz = f * phi.conj() / g2;
        z -= dz;
        if f.abs() <= 4.0 * f64::EPSILON * (1.0 + level.abs()) || dz.norm() < 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    Ok(z)
}

/// Unit tangent keeping `D_t` on the left.
fn tangent(solver: &GreenSolver, z: Complex64) -> Complex64 {
    let phi = solver.phi_raw(z);
    Complex64::i() * phi.conj() / phi.norm()
}

#[derive(Debug)]
struct Polyline {
    points: Vec<Complex64>,
    step: f64,
}

impl Polyline {
    /// Whether `p` lies on one of the chords, up to the chord sagitta.
    fn passes_near(&self, p: Complex64) -> bool {
        let n = self.points.len();
        let tol = 0.25 * self.step;
        (0..n).any(|i| {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            let ab = b - a;
            let s = ((p - a) * ab.conj()).re / ab.norm_sqr().max(f64::MIN_POSITIVE);
            let q = a + ab * s.clamp(0.0, 1.0);
            (p - q).norm() < tol
        })
    }
}

fn march(solver: &GreenSolver, seed: Complex64, level: f64, t: f64) -> Result<Polyline> {
    let diam = solver.domain().diameter();
    let start = project(solver, seed, level, t)?;
    let scale = (1.0 / solver.phi_raw(start).norm()).min(0.5 * diam);
    let h0 = 2.0 * PI * scale / MARCH_DIVISIONS;
    let h_max = (2.0 * PI * 0.5 * diam / MARCH_DIVISIONS).min(8.0 * h0);
    let h_min = 1e-9 * h0;
    let mut h = h0;
    let mut points = vec![start];
    let mut z = start;
    let mut travelled = 0.0;
    for _ in 0..MAX_MARCH_STEPS {
        let k1 = tangent(solver, z);
        let k2 = tangent(solver, z + h * k1);
        let predicted = z + 0.5 * h * (k1 + k2);
        let corrected = project(solver, predicted, level, t)?;
        let correction = (corrected - predicted).norm();
        let advance = (corrected - z).norm();
        if correction > 0.05 * h || advance < 0.5 * h {
            h *= 0.5;
            if h < h_min {
                return Err(Error::TracingFailure {
                    t,
                    detail: format!("step size collapsed near ({}, {})", z.re, z.im),
                });
            }
            continue;
        }
        travelled += advance;
        z = corrected;
        let gap = (z - start).norm();
        if travelled > 4.0 * h && gap < 0.75 * h {
            // keep the last point only if it has not overshot the start
            let ahead = ((start - z) * tangent(solver, z).conj()).re;
            if ahead > 0.1 * h {
                points.push(z);
            }
            return Ok(Polyline {
                points,
                step: h0.max(h),
            });
        }
        points.push(z);
        if correction < 0.01 * h {
            h = (1.5 * h).min(h_max);
        }
    }
    Err(Error::TracingFailure {
        t,
        detail: format!("component through ({}, {}) did not close", seed.re, seed.im),
    })
}

/// Closed cubic Hermite spline through the polyline with unit tangents from the level
/// set, resampled at equal arclength.
fn hermite_resample(solver: &GreenSolver, poly: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = poly.len();
    let tangents: Vec<Complex64> = poly.iter().map(|&z| tangent(solver, z)).collect();
    let rule = gauss_legendre_on(8, 0.0, 1.0);
    let segment = |i: usize| {
        let c = (poly[(i + 1) % m] - poly[i]).norm();
        (poly[i], poly[(i + 1) % m], tangents[i] * c, tangents[(i + 1) % m] * c)
    };
    let point = |(p0, p1, t0, t1): (Complex64, Complex64, Complex64, Complex64), u: f64| {
        let u2 = u * u;
        let u3 = u2 * u;
        p0 * (2.0 * u3 - 3.0 * u2 + 1.0) + t0 * (u3 - 2.0 * u2 + u) + p1 * (-2.0 * u3 + 3.0 * u2) + t1 * (u3 - u2)
    };
    let speed = |(p0, p1, t0, t1): (Complex64, Complex64, Complex64, Complex64), u: f64| {
        let u2 = u * u;
        (p0 * (6.0 * u2 - 6.0 * u)
            + t0 * (3.0 * u2 - 4.0 * u + 1.0)
            + p1 * (-6.0 * u2 + 6.0 * u)
            + t1 * (3.0 * u2 - 2.0 * u))
            .norm()
    };
    let partial = |seg, u: f64| -> f64 { rule.iter().map(|&(x, w)| speed(seg, u * x) * w * u).sum() };
    let lengths: Vec<f64> = (0..m).map(|i| partial(segment(i), 1.0)).collect();
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(n);
    let (mut i, mut acc) = (0usize, 0.0);
    for j in 0..n {
        let target = total * j as f64 / n as f64;
        while i + 1 < m && acc + lengths[i] < target {
            acc += lengths[i];
            i += 1;
        }
        let seg = segment(i);
        let want = target - acc;
        let mut u = (want / lengths[i]).clamp(0.0, 1.0);
        for _ in 0..10 {
            let step = (partial(seg, u) - want) / speed(seg, u);
            u = (u - step).clamp(0.0, 1.0);
            if step.abs() < 1e-15 {
                break;
            }
        }
        out.push(point(seg, u));
    }
    out
}

/// Move samples to equal arclength spacing of their trigonometric interpolant.
fn reparametrize(z: &[Complex64]) -> Vec<Complex64> {
    let n = z.len();
    let interp = TrigInterpolant::new(z);
    let speed: Vec<Complex64> = differentiate(z)
        .into_iter()
        .map(|d| Complex64::new(d.norm(), 0.0))
        .collect();
    let sp = TrigInterpolant::new(&speed);
    let mean = sp.mean().re;
    let length = 2.0 * PI * mean;
    let thetas = (0..n)
        .map(|j| {
            let target = length * j as f64 / n as f64;
            let mut theta = 2.0 * PI * j as f64 / n as f64;
            for _ in 0..8 {
                let s = mean * theta + sp.eval_periodic_integral(theta).re;
                let ds = sp.eval(theta).re;
                let step = (s - target) / ds;
                theta -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            theta
        })
        .collect::<Vec<f64>>();
    interp.eval_many(&thetas)
}

/// Largest Fourier coefficient in the upper quarter of the spectrum, relative to the
/// radius-like size `length / 2pi`.
fn spectral_tail(z: &[Complex64], length: f64) -> f64 {
    let n = z.len();
    let c = fourier_coefficients(z);
    let tail = (n / 4..=3 * n / 4).map(|j| c[j].norm()).fold(0.0, f64::max);
    tail / (length / (2.0 * PI))
}

fn resample(solver: &GreenSolver, poly: &Polyline, level: f64, t: f64, opts: &TraceOptions) -> Result<LevelComponent> {
    let mut n = opts.nodes;
    loop {
        let mut z: Vec<Complex64> = hermite_resample(solver, &poly.points, n)
            .into_iter()
            .map(|p| project(solver, p, level, t))
            .collect::<Result<_>>()?;
        for _ in 0..REPARAM_ROUNDS {
            z = reparametrize(&z)
                .into_iter()
                .map(|p| project(solver, p, level, t))
                .collect::<Result<_>>()?;
        }
        let h = 2.0 * PI / n as f64;
        let dz = differentiate(&z);
        let weights: Vec<f64> = dz.iter().map(|d| d.norm() * h).collect();
        let length: f64 = weights.iter().sum();
        if spectral_tail(&z, length) > SPECTRAL_TAIL && 2 * n <= opts.max_nodes {
            n *= 2;
            continue;
        }
        let phi: Vec<Complex64> = z.iter().map(|&p| solver.phi_raw(p)).collect();
        let grad_norm = solver.normal_derivative_on_level(&z).map_err(|e| match e {
            Error::NearCritical { detail, .. } => Error::NearCritical { t, detail },
            other => other,
        })?;
        let normals = phi.iter().map(|p| p.conj() / p.norm()).collect();
        let residual = z
            .iter()
            .map(|&p| (2.0 * solver.value_raw(p) + t).abs())
            .fold(0.0, f64::max);
        if residual > LEVEL_TOL {
            return Err(Error::TracingFailure {
                t,
                detail: format!("level residual {residual:e} after projection"),
            });
        }
        return Ok(LevelComponent {
            nodes: z,
            weights,
            normals,
            grad_norm,
        });
    }
}
