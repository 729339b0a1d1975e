//! Samples of G along rays from the base point and from each hole marker.
//!
//! Level-set seeds for any t are sign changes of `G - level` along these samples, so
//! the rays are computed once per solver.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::GreenSolver;

pub const PROBE_RAYS: usize = 64;
pub const PROBE_STEPS: usize = 512;
const POLE_REFINEMENT: usize = 48;

/// A run of consecutive samples inside the domain. Boundary crossings at either end
/// are included as samples with `G = 0`.
#[derive(Debug, Clone)]
pub struct ProbeSegment {
    pub samples: Vec<(Complex64, f64)>,
}

fn boundary_crossing(solver: &GreenSolver, inside: Complex64, outside: Complex64) -> Complex64 {
    let d = solver.domain();
    let (mut a, mut b) = (inside, outside);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if d.classify(m) {
            a = m;
        } else {
            b = m;
        }
        if (b - a).norm() < 1e-15 * d.diameter() {
            break;
        }
    }
    0.5 * (a + b)
}

fn ray_segments(
    solver: &GreenSolver,
    origin: Complex64,
    dir: Complex64,
    reach: f64,
    at_pole: bool,
) -> Vec<ProbeSegment> {
    let d = solver.domain();
    let step = reach / PROBE_STEPS as f64;
    let mut radii: Vec<f64> = Vec::new();
    if at_pole {
        radii.extend((1..=POLE_REFINEMENT).rev().map(|m| step * 0.5f64.powi(m as i32)));
    }
    radii.extend((1..=PROBE_STEPS).map(|s| step * s as f64));

    let mut segments = Vec::new();
    let mut current: Vec<(Complex64, f64)> = Vec::new();
    let mut last: Option<(Complex64, bool)> = at_pole.then_some((origin, true));
    for r in radii {
        let p = origin + dir * r;
        let inside = d.classify(p);
        if let Some((q, was_inside)) = last {
            if inside != was_inside {
                let (i, o) = if inside { (p, q) } else { (q, p) };
                let b = boundary_crossing(solver, i, o);
                current.push((b, 0.0));
                if !inside {
                    segments.push(ProbeSegment {
                        samples: std::mem::take(&mut current),
                    });
                }
            }
        }
        if inside {
            current.push((p, solver.value_raw(p)));
        }
        last = Some((p, inside));
    }
    if current.len() > 1 {
        segments.push(ProbeSegment { samples: current });
    }
    segments
}

pub(super) fn probe(solver: &GreenSolver) -> Vec<ProbeSegment> {
    let d = solver.domain();
    let z0 = d.base_point();
    let (lo, hi) = d.outer().bounding_box();
    let mut origins = vec![(z0, true)];
    origins.extend(d.hole_markers().iter().map(|&c| (c, false)));
    let jobs: Vec<(Complex64, bool, Complex64, f64)> = origins
        .iter()
        .flat_map(|&(o, pole)| {
            let reach = [lo, hi, Complex64::new(lo.re, hi.im), Complex64::new(hi.re, lo.im)]
                .iter()
                .map(|c| (c - o).norm())
                .fold(0.0, f64::max);
            (0..PROBE_RAYS).map(move |k| {
                // offset by half a step so symmetric domains are not probed along axes only
                let a = 2.0 * PI * (k as f64 + 0.5) / PROBE_RAYS as f64;
                (o, pole, Complex64::from_polar(1.0, a), reach)
            })
        })
        .collect();
    jobs.par_iter()
        .flat_map_iter(|&(o, pole, dir, reach)| ray_segments(solver, o, dir, reach, pole))
        .collect()
}
