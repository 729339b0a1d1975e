//! Finitely connected planar domains bounded by analytic Jordan curves.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::{Mode, SmoothClosedCurve};
use crate::error::{Error, Result};

pub type ComplexPoint = Complex64;

pub const DEFAULT_NODES: usize = 256;

/// Relative boundary-ambiguity distance (times the domain diameter).
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Largest inner/outer radius ratio served by the annulus series.
pub const ANNULUS_MAX_Q: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainShape {
    Disk {
        center: Complex64,
        radius: f64,
    },
    Annulus {
        center: Complex64,
        outer_radius: f64,
        inner_radius: f64,
    },
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Serializable description of a domain, as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    Disk {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
        z0: [f64; 2],
    },
    Annulus {
        q: f64,
        z0: [f64; 2],
    },
    Circles {
        outer: CircleSpec,
        #[serde(default)]
        holes: Vec<CircleSpec>,
        z0: [f64; 2],
    },
    Curves {
        outer: Vec<Mode>,
        #[serde(default)]
        holes: Vec<Vec<Mode>>,
        #[serde(default)]
        hole_markers: Vec<[f64; 2]>,
        z0: [f64; 2],
    },
}

fn pt(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

impl DomainSpec {
    pub fn build(&self, nodes: usize) -> Result<PlanarDomain> {
        let mut d = match self {
            DomainSpec::Disk { radius, center, z0 } => make_disk_with_nodes(*radius, pt(*center), pt(*z0), nodes),
            DomainSpec::Annulus { q, z0 } => make_annulus_with_nodes(*q, pt(*z0), nodes),
            DomainSpec::Circles { outer, holes, z0 } => {
                let holes: Vec<(Complex64, f64)> = holes.iter().map(|h| (pt(h.center), h.radius)).collect();
                make_circle_domain_with_nodes((pt(outer.center), outer.radius), &holes, pt(*z0), nodes)
            }
            DomainSpec::Curves {
                outer,
                holes,
                hole_markers,
                z0,
            } => {
                let outer = SmoothClosedCurve::from_modes(outer, nodes)?;
                let holes = holes
                    .iter()
                    .map(|h| SmoothClosedCurve::from_modes(h, nodes))
                    .collect::<Result<Vec<_>>>()?;
                let markers: Vec<Complex64> = hole_markers.iter().map(|&m| pt(m)).collect();
                PlanarDomain::from_curves(outer, holes, markers, pt(*z0))
            }
        }?;
        d.spec = Some(self.clone());
        Ok(d)
    }
}

/// A bounded domain: one positively oriented outer curve and clockwise hole curves,
/// a marker strictly inside each hole and the base point z0.
#[derive(Debug, Clone)]
pub struct PlanarDomain {
    outer: SmoothClosedCurve,
    holes: Vec<SmoothClosedCurve>,
    hole_markers: Vec<Complex64>,
    base_point: Complex64,
    shape: DomainShape,
    diameter: f64,
    spec: Option<DomainSpec>,
}

fn check_finite(p: Complex64, what: &str) -> Result<()> {
    if p.re.is_finite() && p.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGeometry(format!("{what} is not finite")))
    }
}

/// Reverse the traversal direction: gamma(theta) -> gamma(-theta).
fn reversed(c: &SmoothClosedCurve) -> Result<SmoothClosedCurve> {
    let modes: Vec<Mode> = c.modes().into_iter().map(|m| Mode { k: -m.k, ..m }).collect();
    SmoothClosedCurve::from_modes(&modes, c.node_count())
}

pub fn make_disk(radius: f64, center: ComplexPoint, z0: ComplexPoint) -> Result<PlanarDomain> {
    make_disk_with_nodes(radius, center, z0, DEFAULT_NODES)
}

pub fn make_disk_with_nodes(radius: f64, center: ComplexPoint, z0: ComplexPoint, nodes: usize) -> Result<PlanarDomain> {
    check_finite(center, "disk center")?;
    check_finite(z0, "base point")?;
    if (z0 - center).norm() >= radius {
        return Err(Error::InvalidGeometry(format!(
            "base point {z0} is not inside the disk of radius {radius} about {center}"
        )));
    }
    let outer = SmoothClosedCurve::circle(center, radius, true, nodes)?;
    let mut d = PlanarDomain::from_curves(outer, vec![], vec![], z0)?;
    d.shape = DomainShape::Disk { center, radius };
    d.spec = Some(DomainSpec::Disk {
        radius,
        center: [center.re, center.im],
        z0: [z0.re, z0.im],
    });
    Ok(d)
}

/// The annulus {q < |z| < 1} with hole marker 0.
pub fn make_annulus(q: f64, z0: ComplexPoint) -> Result<PlanarDomain> {
    make_annulus_with_nodes(q, z0, DEFAULT_NODES)
}

pub fn make_annulus_with_nodes(q: f64, z0: ComplexPoint, nodes: usize) -> Result<PlanarDomain> {
    check_finite(z0, "base point")?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidGeometry(format!(
            "annulus ratio q = {q} must lie in (0,1)"
        )));
    }
    let r = z0.norm();
    if !(r > q && r < 1.0) {
        return Err(Error::InvalidGeometry(format!(
            "base point modulus {r} is outside ({q}, 1)"
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let outer = SmoothClosedCurve::circle(zero, 1.0, true, nodes)?;
    let hole = SmoothClosedCurve::circle(zero, q, false, nodes)?;
    let mut d = PlanarDomain::from_curves(outer, vec![hole], vec![zero], z0)?;
    if q <= ANNULUS_MAX_Q {
        d.shape = DomainShape::Annulus {
            center: zero,
            outer_radius: 1.0,
            inner_radius: q,
        };
    }
    d.spec = Some(DomainSpec::Annulus { q, z0: [z0.re, z0.im] });
    Ok(d)
}

/// Outer disk minus closed hole disks; the hole centers are the markers.
pub fn make_circle_domain(
    outer: (ComplexPoint, f64),
    holes: &[(ComplexPoint, f64)],
    z0: ComplexPoint,
) -> Result<PlanarDomain> {
    make_circle_domain_with_nodes(outer, holes, z0, DEFAULT_NODES)
}

pub fn make_circle_domain_with_nodes(
    outer: (ComplexPoint, f64),
    holes: &[(ComplexPoint, f64)],
    z0: ComplexPoint,
    nodes: usize,
) -> Result<PlanarDomain> {
    let (oc, or) = outer;
    check_finite(oc, "outer center")?;
    check_finite(z0, "base point")?;
    for (i, &(c, r)) in holes.iter().enumerate() {
        check_finite(c, "hole center")?;
        if r.is_nan() || r <= 0.0 {
            return Err(Error::InvalidGeometry(format!("hole {i} has non-positive radius")));
        }
        if (c - oc).norm() + r >= or {
            return Err(Error::InvalidGeometry(format!("hole {i} is not inside the outer disk")));
        }
        for (j, &(c2, r2)) in holes.iter().enumerate().skip(i + 1) {
            if (c - c2).norm() <= r + r2 {
                return Err(Error::InvalidGeometry(format!("holes {i} and {j} overlap")));
            }
        }
        if (z0 - c).norm() <= r {
            return Err(Error::InvalidGeometry(format!("base point lies in hole {i}")));
        }
    }
    if (z0 - oc).norm() >= or {
        return Err(Error::InvalidGeometry("base point lies outside the outer disk".into()));
    }
    let spec = DomainSpec::Circles {
        outer: CircleSpec {
            center: [oc.re, oc.im],
            radius: or,
        },
        holes: holes
            .iter()
            .map(|&(c, r)| CircleSpec {
                center: [c.re, c.im],
                radius: r,
            })
            .collect(),
        z0: [z0.re, z0.im],
    };
    let mut d = if holes.is_empty() {
        make_disk_with_nodes(or, oc, z0, nodes)?
    } else {
        let outer_curve = SmoothClosedCurve::circle(oc, or, true, nodes)?;
        let hole_curves = holes
            .iter()
            .map(|&(c, r)| SmoothClosedCurve::circle(c, r, false, nodes))
            .collect::<Result<Vec<_>>>()?;
        let markers = holes.iter().map(|&(c, _)| c).collect();
        let mut d = PlanarDomain::from_curves(outer_curve, hole_curves, markers, z0)?;
        if holes.len() == 1 {
            let (hc, hr) = holes[0];
            if (hc - oc).norm() <= 1e-14 * or && hr / or <= ANNULUS_MAX_Q {
                d.shape = DomainShape::Annulus {
                    center: oc,
                    outer_radius: or,
                    inner_radius: hr,
                };
            }
        }
        d
    };
    d.spec = Some(spec);
    Ok(d)
}

impl PlanarDomain {
    /// Generic constructor. Curves are re-oriented as needed (outer counter-clockwise,
    /// holes clockwise).
    pub fn from_curves(
        outer: SmoothClosedCurve,
        holes: Vec<SmoothClosedCurve>,
        hole_markers: Vec<Complex64>,
        base_point: Complex64,
    ) -> Result<Self> {
        check_finite(base_point, "base point")?;
        if holes.len() != hole_markers.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} holes but {} hole markers",
                holes.len(),
                hole_markers.len()
            )));
        }
        let outer = if outer.is_ccw() { outer } else { reversed(&outer)? };
        let holes = holes
            .into_iter()
            .map(|h| if h.is_ccw() { reversed(&h) } else { Ok(h) })
            .collect::<Result<Vec<_>>>()?;
        let pts = outer.points();
        let mut diameter: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                diameter = diameter.max((a - b).norm());
            }
        }
        for (i, h) in holes.iter().enumerate() {
            if h.points().iter().any(|&p| outer.winding_number(p) != 1) {
                return Err(Error::InvalidGeometry(format!(
                    "hole {i} is not inside the outer curve"
                )));
            }
            for (j, other) in holes.iter().enumerate() {
                if i != j && h.points().iter().any(|&p| other.winding_number(p) != 0) {
                    return Err(Error::InvalidGeometry(format!("holes {i} and {j} intersect")));
                }
            }
            check_finite(hole_markers[i], "hole marker")?;
            if h.winding_number(hole_markers[i]) == 0 {
                return Err(Error::InvalidGeometry(format!("marker {i} is not inside its hole")));
            }
        }
        let domain = Self {
            outer,
            holes,
            hole_markers,
            base_point,
            shape: DomainShape::General,
            diameter,
            spec: None,
        };
        if !domain.contains(base_point)? {
            return Err(Error::InvalidGeometry("base point is not in the domain".into()));
        }
        Ok(domain)
    }

    pub fn outer(&self) -> &SmoothClosedCurve {
        &self.outer
    }

    pub fn holes(&self) -> &[SmoothClosedCurve] {
        &self.holes
    }

    /// Outer curve first, then holes.
    pub fn curves(&self) -> impl Iterator<Item = &SmoothClosedCurve> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn hole_markers(&self) -> &[Complex64] {
        &self.hole_markers
    }

    pub fn base_point(&self) -> Complex64 {
        self.base_point
    }

    pub fn shape(&self) -> DomainShape {
        self.shape
    }

    pub fn spec(&self) -> Option<&DomainSpec> {
        self.spec.as_ref()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Connectivity k+1 for k holes.
    pub fn connectivity(&self) -> usize {
        self.holes.len() + 1
    }

    pub fn is_simply_connected(&self) -> bool {
        self.holes.is_empty()
    }

    pub fn nodes_per_curve(&self) -> usize {
        self.outer.node_count()
    }

    pub fn boundary_tolerance(&self) -> f64 {
        BOUNDARY_EPS * self.diameter
    }

    /// Same geometry resampled with `nodes` per curve.
    pub fn with_nodes(&self, nodes: usize) -> Result<Self> {
        Ok(Self {
            outer: self.outer.with_nodes(nodes)?,
            holes: self
                .holes
                .iter()
                .map(|h| h.with_nodes(nodes))
                .collect::<Result<Vec<_>>>()?,
            ..self.clone()
        })
    }

    /// Distance from `p` to the nearest boundary curve.
    pub fn boundary_distance(&self, p: Complex64) -> f64 {
        self.curves().map(|c| c.distance(p).0).fold(f64::INFINITY, f64::min)
    }

    /// Membership by winding numbers, without the ambiguity check.
    pub fn classify(&self, p: Complex64) -> bool {
        self.outer.winding_number(p) == 1 && self.holes.iter().all(|h| h.winding_number(p) == 0)
    }

    /// Membership test; points within the boundary tolerance are rejected as ambiguous.
    pub fn contains(&self, p: Complex64) -> Result<bool> {
        let tol = self.boundary_tolerance();
        if self.boundary_distance(p) < tol {
            return Err(Error::BoundaryAmbiguous {
                re: p.re,
                im: p.im,
                tol,
            });
        }
        Ok(self.classify(p))
    }

    /// Stable identifier of geometry and discretization, used for cache keys.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for c in self.curves() {
            for m in c.modes() {
                h.update(m.k.to_le_bytes());
                h.update(m.re.to_bits().to_le_bytes());
                h.update(m.im.to_bits().to_le_bytes());
            }
            h.update((c.node_count() as u64).to_le_bytes());
        }
        for m in &self.hole_markers {
            h.update(m.re.to_bits().to_le_bytes());
            h.update(m.im.to_bits().to_le_bytes());
        }
        h.update(self.base_point.re.to_bits().to_le_bytes());
        h.update(self.base_point.im.to_bits().to_le_bytes());
        hex::encode(&h.finalize()[..12])
    }
}
