use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::GreenSolver;

/// Zeros of the gradient of G in `D \ {z0}` and the corresponding values.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalSet {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub expected: usize,
    pub warning: Option<String>,
}

impl CriticalSet {
    pub fn complex_points(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    /// Flow times `-2 G(p)` at which level curves pinch, ascending and deduplicated.
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.values.iter().map(|v| -2.0 * v).collect();
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        t
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

const DEDUP_DISTANCE: f64 = 1e-6;
const NEWTON_ITERS: usize = 60;

fn newton(solver: &GreenSolver, seed: Complex64, tol: f64, max_step: f64) -> Option<Complex64> {
    let mut z = seed;
    for _ in 0..NEWTON_ITERS {
        let f = solver.phi_raw(z);
        if f.norm() < tol * 1e-3 {
            break;
        }
        let fp = solver.phi_prime_raw(z);
        if fp.norm() == 0.0 || !fp.re.is_finite() {
            return None;
        }
        let mut step = f / fp;
        if step.norm() > max_step {
            step *= max_step / step.norm();
        }
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    Some(z)
}

pub(super) fn find(solver: &GreenSolver, grid_density: usize) -> CriticalSet {
    let domain = solver.domain();
    let diam = domain.diameter();
    let z0 = domain.base_point();
    let tol = solver.tol_crit();
    let expected = domain.connectivity() - 1;
    let (lo, hi) = domain.outer().bounding_box();
    let m = grid_density.max(2);
    let seeds: Vec<Complex64> = (0..m * m)
        .map(|idx| {
            let (i, j) = (idx % m, idx / m);
            let x = lo.re + (hi.re - lo.re) * (i as f64 + 0.5) / m as f64;
            let y = lo.im + (hi.im - lo.im) * (j as f64 + 0.5) / m as f64;
            Complex64::new(x, y)
        })
        .filter(|&p| (p - z0).norm() > 0.05 * diam && domain.classify(p))
        .collect();

    let margin = 1e-6 * diam;
    let mut found: Vec<Complex64> = seeds
        .par_iter()
        .filter_map(|&s| newton(solver, s, tol, 0.1 * diam))
        .filter(|&z| {
            (z - z0).norm() > margin
                && domain.boundary_distance(z) > margin
                && domain.classify(z)
                && solver.phi_raw(z).norm() < tol
        })
        .collect();
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut points: Vec<Complex64> = Vec::new();
    for z in found {
        if points.iter().all(|p| (p - z).norm() > DEDUP_DISTANCE) {
            points.push(z);
        }
    }
    let values: Vec<f64> = points.iter().map(|&p| solver.value_raw(p)).collect();
    let warning = (points.len() != expected).then(|| {
        format!(
            "found {} critical points, expected {} for connectivity {}",
            points.len(),
            expected,
            domain.connectivity()
        )
    });
    CriticalSet {
        points: points.iter().map(|p| [p.re, p.im]).collect(),
        values,
        expected,
        warning,
    }
}
