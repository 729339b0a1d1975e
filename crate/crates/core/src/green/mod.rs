//! Green function `G(., z0)` with pole at the base point, zero on the boundary.
//!
//! Derivatives are carried through the holomorphic function `Phi = G_x - i G_y`, so
//! `grad G = conj(Phi)` and `|grad G| = |Phi|`.

mod closed_form;
mod critical;
mod nystrom;
mod probe;

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainShape, PlanarDomain};
use crate::error::{Error, Result};

pub use closed_form::{AnnulusGreen, DiskGreen};
pub use critical::CriticalSet;
pub use nystrom::NystromGreen;
pub use probe::ProbeSegment;

/// Seeds per axis for the default critical point search.
pub const CRITICAL_GRID: usize = 64;

/// Distance from z0 below which evaluation is refused.
pub const POLE_EXCLUSION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreenMethod {
    /// Closed forms for disks and annuli, boundary integral solver otherwise.
    #[default]
    Auto,
    Nystrom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    ClosedFormDisk,
    ClosedFormAnnulus,
    Nystrom,
}

#[derive(Debug, Clone)]
enum Repr {
    Disk(DiskGreen),
    Annulus(AnnulusGreen),
    Nystrom(Box<NystromGreen>),
}

#[derive(Debug)]
pub struct GreenSolver {
    domain: PlanarDomain,
    repr: Repr,
    critical: OnceLock<CriticalSet>,
    probes: OnceLock<Vec<ProbeSegment>>,
}

pub fn build_green(domain: &PlanarDomain, nodes_per_curve: usize) -> Result<GreenSolver> {
    GreenSolver::new(domain, nodes_per_curve, GreenMethod::Auto)
}

impl GreenSolver {
    pub fn new(domain: &PlanarDomain, nodes_per_curve: usize, method: GreenMethod) -> Result<Self> {
        let domain = if nodes_per_curve == domain.nodes_per_curve() {
            domain.clone()
        } else {
            domain.with_nodes(nodes_per_curve)?
        };
        let z0 = domain.base_point();
        let repr = match (method, domain.shape()) {
            (GreenMethod::Auto, DomainShape::Disk { center, radius }) => Repr::Disk(DiskGreen::new(center, radius, z0)),
            (
                GreenMethod::Auto,
                DomainShape::Annulus {
                    center,
                    outer_radius,
                    inner_radius,
                },
            ) => Repr::Annulus(AnnulusGreen::new(center, outer_radius, inner_radius, z0)),
            _ => Repr::Nystrom(Box::new(NystromGreen::build(&domain)?)),
        };
        Ok(Self {
            domain,
            repr,
            critical: OnceLock::new(),
            probes: OnceLock::new(),
        })
    }

    pub fn domain(&self) -> &PlanarDomain {
        &self.domain
    }

    pub fn method(&self) -> MethodTag {
        match self.repr {
            Repr::Disk(_) => MethodTag::ClosedFormDisk,
            Repr::Annulus(_) => MethodTag::ClosedFormAnnulus,
            Repr::Nystrom(_) => MethodTag::Nystrom,
        }
    }

    pub fn nystrom(&self) -> Option<&NystromGreen> {
        match &self.repr {
            Repr::Nystrom(n) => Some(n),
            _ => None,
        }
    }

    /// Gradient magnitude below which a point counts as critical.
    pub fn tol_crit(&self) -> f64 {
        1e-8 / self.domain.diameter()
    }

    fn check_point(&self, z: Complex64) -> Result<()> {
        if !self.domain.contains(z)? {
            return Err(Error::OutsideDomain { re: z.re, im: z.im });
        }
        let d = (z - self.domain.base_point()).norm();
        if d < POLE_EXCLUSION {
            return Err(Error::Singularity(d));
        }
        Ok(())
    }

    pub fn value(&self, z: Complex64) -> Result<f64> {
        self.check_point(z)?;
        Ok(self.value_raw(z))
    }

    /// `(G_x, G_y)` at `z`.
    pub fn gradient(&self, z: Complex64) -> Result<(f64, f64)> {
        self.check_point(z)?;
        let p = self.phi_raw(z);
        Ok((p.re, -p.im))
    }

    /// G without membership checks; meaningful only inside the domain.
    pub fn value_raw(&self, z: Complex64) -> f64 {
        match &self.repr {
            Repr::Disk(g) => g.value(z),
            Repr::Annulus(g) => g.value(z),
            Repr::Nystrom(g) => g.value(z),
        }
    }

    /// `Phi = G_x - i G_y` without membership checks.
    pub fn phi_raw(&self, z: Complex64) -> Complex64 {
        match &self.repr {
            Repr::Disk(g) => g.phi(z),
            Repr::Annulus(g) => g.phi(z),
            Repr::Nystrom(g) => g.phi(z),
        }
    }

    pub fn phi_prime_raw(&self, z: Complex64) -> Complex64 {
        match &self.repr {
            Repr::Disk(g) => g.phi_prime(z),
            Repr::Annulus(g) => g.phi_prime(z),
            Repr::Nystrom(g) => g.phi_prime(z),
        }
    }

    /// Phi at the discretization nodes of boundary curve `curve` (outer first).
    pub fn boundary_phi(&self, curve: usize) -> Vec<Complex64> {
        match &self.repr {
            Repr::Nystrom(g) => g.boundary_phi(curve),
            _ => {
                let c = self.domain.curves().nth(curve).expect("curve index");
                c.points().iter().map(|&p| self.phi_raw(p)).collect()
            }
        }
    }

    /// `lim_{z -> z0} G(z) - log|z - z0|`.
    pub fn harmonic_part_at_pole(&self) -> f64 {
        match &self.repr {
            Repr::Disk(g) => g.harmonic_part_at_pole(),
            Repr::Annulus(g) => g.harmonic_part_at_pole(),
            Repr::Nystrom(g) => g.harmonic_part_at_pole(),
        }
    }

    /// `gamma` with conformal radius `e^gamma`; deep sublevel sets approach the disks
    /// `|z - z0| < e^gamma e^{-t/2}`.
    pub fn robin_constant(&self) -> f64 {
        -self.harmonic_part_at_pole()
    }

    pub fn conformal_radius(&self) -> f64 {
        self.robin_constant().exp()
    }

    /// `|grad G|` at points of a level curve, which equals the outward normal derivative.
    pub fn normal_derivative_on_level(&self, nodes: &[Complex64]) -> Result<Vec<f64>> {
        let tol = self.tol_crit();
        nodes
            .iter()
            .map(|&z| {
                let g = self.phi_raw(z).norm();
                if g < tol {
                    Err(Error::NearCritical {
                        t: -2.0 * self.value_raw(z),
                        detail: format!("|grad G| = {g:e} at ({}, {})", z.re, z.im),
                    })
                } else {
                    Ok(g)
                }
            })
            .collect()
    }

    /// Critical set from the default seed grid, computed on first use.
    pub fn critical_set(&self) -> &CriticalSet {
        self.critical.get_or_init(|| critical::find(self, CRITICAL_GRID))
    }

    pub fn compute_critical_set(&self, grid_density: usize) -> CriticalSet {
        critical::find(self, grid_density)
    }

    /// Interior samples of G along rays from z0 and the hole markers, computed on first use.
    pub fn probe_segments(&self) -> &[ProbeSegment] {
        self.probes.get_or_init(|| probe::probe(self))
    }

    /// Ascending flow times `-2N` where the topology of the sublevel sets changes.
    pub fn critical_times(&self) -> Vec<f64> {
        self.critical_set().times()
    }
}
