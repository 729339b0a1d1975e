//! Closed analytic curves stored as truncated trigonometric series.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::uniform_angles;

pub const MIN_NODES: usize = 32;

/// One Fourier mode `coeff * exp(i k theta)` of a parametrization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: i32,
    pub re: f64,
    pub im: f64,
}

/// A 2pi-periodic parametrization `gamma(theta) = sum_k c_k exp(i k theta)` sampled at
/// `N` equispaced nodes.
#[derive(Debug, Clone)]
pub struct SmoothClosedCurve {
    modes: Vec<(i32, Complex64)>,
    points: Vec<Complex64>,
    derivs: Vec<Complex64>,
    second: Vec<Complex64>,
}

impl SmoothClosedCurve {
    pub fn from_modes(modes: &[Mode], nodes: usize) -> Result<Self> {
        let modes: Vec<(i32, Complex64)> = modes.iter().map(|m| (m.k, Complex64::new(m.re, m.im))).collect();
        Self::build(modes, nodes)
    }

    /// Circle of the given radius; `ccw` selects the orientation.
    pub fn circle(center: Complex64, radius: f64, ccw: bool, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "circle radius {radius} must be positive"
            )));
        }
        let k = if ccw { 1 } else { -1 };
        Self::build(vec![(0, center), (k, Complex64::new(radius, 0.0))], nodes)
    }

    fn build(modes: Vec<(i32, Complex64)>, nodes: usize) -> Result<Self> {
        if nodes < MIN_NODES || !nodes.is_power_of_two() {
            return Err(Error::InvalidGeometry(format!(
                "node count {nodes} must be a power of two >= {MIN_NODES}"
            )));
        }
        if modes.iter().any(|(_, c)| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite curve coefficient".into()));
        }
        let mut curve = Self {
            modes,
            points: Vec::with_capacity(nodes),
            derivs: Vec::with_capacity(nodes),
            second: Vec::with_capacity(nodes),
        };
        for theta in uniform_angles(nodes) {
            curve.points.push(curve.eval(theta));
            curve.derivs.push(curve.deriv(theta));
            curve.second.push(curve.deriv2(theta));
        }
        let scale = curve.derivs.iter().map(|d| d.norm()).fold(0.0, f64::max);
        if curve.derivs.iter().any(|d| d.norm() <= 1e-12 * scale) || scale == 0.0 {
            return Err(Error::InvalidGeometry("curve has a vanishing tangent".into()));
        }
        if !curve.is_simple() {
            return Err(Error::InvalidGeometry("curve self-intersects".into()));
        }
        Ok(curve)
    }

    pub fn with_nodes(&self, nodes: usize) -> Result<Self> {
        Self::build(self.modes.clone(), nodes)
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.modes
            .iter()
            .map(|&(k, c)| Mode { k, re: c.re, im: c.im })
            .collect()
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|&(k, c)| c * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    pub fn deriv(&self, theta: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|&(k, c)| c * Complex64::new(0.0, k as f64) * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    pub fn deriv2(&self, theta: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|&(k, c)| -c * (k * k) as f64 * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// gamma'(theta_j) at the nodes.
    pub fn tangents(&self) -> &[Complex64] {
        &self.derivs
    }

    pub fn second_derivatives(&self) -> &[Complex64] {
        &self.second
    }

    /// Trapezoid step in theta.
    pub fn step(&self) -> f64 {
        2.0 * PI / self.points.len() as f64
    }

    /// Arclength weights |gamma'| * 2pi / N.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        self.derivs.iter().map(|d| d.norm() * h).collect()
    }

    /// Unit normal pointing to the right of the direction of travel. For a boundary
    /// oriented positively with respect to its domain this is the outward normal.
    pub fn right_normals(&self) -> Vec<Complex64> {
        self.derivs.iter().map(|d| -Complex64::i() * d / d.norm()).collect()
    }

    pub fn length(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// Signed enclosed area, positive for counter-clockwise curves.
    pub fn signed_area(&self) -> f64 {
        let h = self.step();
        0.5 * h
            * self
                .points
                .iter()
                .zip(&self.derivs)
                .map(|(p, d)| (p.conj() * d).im)
                .sum::<f64>()
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > 0.0
    }

    /// Closest point on the curve: (distance, parameter).
    pub fn distance(&self, p: Complex64) -> (f64, f64) {
        let n = self.points.len();
        let (j, _) = self
            .points
            .iter()
            .enumerate()
            .map(|(j, q)| (j, (q - p).norm_sqr()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let mut theta = 2.0 * PI * j as f64 / n as f64;
        // Newton on d/dtheta |gamma - p|^2 / 2 = Re(conj(gamma - p) gamma')
        let h = self.step();
        for _ in 0..30 {
            let g = self.eval(theta) - p;
            let d1 = self.deriv(theta);
            let d2 = self.deriv2(theta);
            let f = (g.conj() * d1).re;
            let fp = d1.norm_sqr() + (g.conj() * d2).re;
            if fp <= 0.0 {
                break;
            }
            let step = (f / fp).clamp(-h, h);
            theta -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let d = (self.eval(theta) - p).norm();
        let d_node = (self.points[j] - p).norm();
        if d <= d_node {
            (d, theta.rem_euclid(2.0 * PI))
        } else {
            (d_node, 2.0 * PI * j as f64 / n as f64)
        }
    }

    /// Winding number of the curve about `p` (p must not lie on the curve).
    pub fn winding_number(&self, p: Complex64) -> i32 {
        let n = self.points.len();
        let max_seg = (0..n)
            .map(|j| (self.points[(j + 1) % n] - self.points[j]).norm())
            .fold(0.0, f64::max);
        let (dist, theta) = self.distance(p);
        if dist < 2.0 * max_seg {
            // near the curve the polygon may cut corners: decide by side of the local tangent
            let q = self.eval(theta);
            let t = self.deriv(theta);
            let left = (t.conj() * (p - q)).im > 0.0;
            let ccw = self.is_ccw();
            return match (ccw, left) {
                (true, true) => 1,
                (false, false) => -1,
                _ => 0,
            };
        }
        let mut total = 0.0;
        for j in 0..n {
            let a = self.points[j] - p;
            let b = self.points[(j + 1) % n] - p;
            total += (b / a).arg();
        }
        (total / (2.0 * PI)).round() as i32
    }

    /// Segment-intersection test at sample resolution.
    pub fn is_simple(&self) -> bool {
        let n = self.points.len();
        let pts = &self.points;
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = (pts[j], pts[(j + 1) % n]);
                if segments_cross(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    pub fn bounding_box(&self) -> (Complex64, Complex64) {
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo.re = lo.re.min(p.re);
            lo.im = lo.im.min(p.im);
            hi.re = hi.re.max(p.re);
            hi.im = hi.im.max(p.im);
        }
        (lo, hi)
    }
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}
