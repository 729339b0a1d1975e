//! Level curves `{2G = -t}` bounding the sublevel sets `D_t`, and area integrals over
//! `D_t` by the coarea formula.

mod coarea;
mod trace;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::GreenSolver;

pub use coarea::{build_coarea, coarea_integrate, CoareaQuadrature};
pub use trace::{trace_level, trace_level_with, TraceOptions};

/// Exclusion half-width around each critical time.
pub const DELTA_CRIT: f64 = 1e-2;

/// Required accuracy of `|2G + t|` at level nodes.
pub const LEVEL_TOL: f64 = 1e-9;

/// One closed component of a level set, positively oriented with respect to `D_t`.
#[derive(Debug, Clone)]
pub struct LevelComponent {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    /// Unit normal pointing out of `D_t`.
    pub normals: Vec<Complex64>,
    pub grad_norm: Vec<f64>,
}

impl LevelComponent {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature version of `dz` along the positive orientation: `i * normal * ds`.
    pub fn dz(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.normals
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| Complex64::i() * n * w)
    }

    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .nodes
            .iter()
            .zip(self.dz())
            .map(|(z, dz)| (z.conj() * dz).im)
            .sum::<f64>()
    }

    /// Winding number of the node polygon about `p`.
    pub fn winding_number(&self, p: Complex64) -> i32 {
        let n = self.nodes.len();
        let total: f64 = (0..n)
            .map(|j| ((self.nodes[(j + 1) % n] - p) / (self.nodes[j] - p)).arg())
            .sum();
        (total / (2.0 * std::f64::consts::PI)).round() as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Topology {
    pub components: usize,
    pub holes: usize,
}

/// Quadrature data on `{2G = -t}`; the component bounding the unbounded complement of
/// `D_t` comes first.
#[derive(Debug, Clone)]
pub struct LevelCurveSet {
    t: f64,
    components: Vec<LevelComponent>,
}

impl LevelCurveSet {
    /// Assemble from components, reordering so the positively oriented one is first.
    pub fn from_components(t: f64, mut components: Vec<LevelComponent>) -> Result<Self> {
        let outer: Vec<usize> = components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.signed_area() > 0.0)
            .map(|(i, _)| i)
            .collect();
        if outer.len() != 1 {
            return Err(Error::Integrity(format!(
                "level t = {t} has {} positively oriented components",
                outer.len()
            )));
        }
        components.swap(0, outer[0]);
        Ok(Self { t, components })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn components(&self) -> &[LevelComponent] {
        &self.components
    }

    pub fn outer(&self) -> &LevelComponent {
        &self.components[0]
    }

    /// `D_t` is connected, so every component other than the outer one bounds a hole.
    pub fn topology(&self) -> Topology {
        Topology {
            components: self.components.len(),
            holes: self.components.len() - 1,
        }
    }

    pub fn hole_count(&self) -> usize {
        self.components.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.components.iter().map(|c| c.len()).sum()
    }

    /// `sum over components of the integral of |grad G| ds`; equals 2 pi.
    pub fn flux(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.grad_norm.iter().zip(&c.weights))
            .map(|(g, w)| g * w)
            .sum()
    }

    /// Area of `D_t` by the shoelace formula on the components.
    pub fn area(&self) -> f64 {
        self.components.iter().map(|c| c.signed_area()).sum()
    }

    pub fn winding_number(&self, p: Complex64) -> i32 {
        self.components.iter().map(|c| c.winding_number(p)).sum()
    }

    /// Largest `|2G + t|` over all nodes.
    pub fn max_residual(&self, solver: &GreenSolver) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.nodes.iter())
            .map(|&z| (2.0 * solver.value_raw(z) + self.t).abs())
            .fold(0.0, f64::max)
    }

    /// Integral of `f / |grad(2G)|` over the level, the inner integrand of the coarea
    /// formula.
    pub fn coarea_density<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Complex64 {
        self.components
            .iter()
            .flat_map(|c| c.nodes.iter().zip(&c.weights).zip(&c.grad_norm))
            .map(|((&z, w), g)| f(z) * (w / (2.0 * g)))
            .sum()
    }
}

/// Topology of `D_t` at each grid time. Changes are only allowed across critical times.
pub fn topology_profile(solver: &GreenSolver, t_grid: &[f64]) -> Result<Vec<(f64, Topology)>> {
    let crit = solver.critical_times();
    let mut out: Vec<(f64, Topology)> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let topo = trace_level(solver, t)?.topology();
        if let Some(&(tp, prev)) = out.last() {
            let crossed = crit.iter().any(|&c| c > tp && c <= t);
            if prev != topo && !crossed {
                return Err(Error::Integrity(format!(
                    "topology changed between t = {tp} and t = {t} without a critical value"
                )));
            }
        }
        out.push((t, topo));
    }
    Ok(out)
}
