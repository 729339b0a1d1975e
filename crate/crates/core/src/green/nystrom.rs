//! Boundary integral solver for the Dirichlet problem on a general domain.
//!
//! The harmonic correction is `u = Re F + sum_l a_l log|z - c_l|` where `Re F` is the
//! double-layer potential of a density `mu` and `c_l` are the hole markers. One
//! zero-mean condition on `mu` per hole closes the system.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::domain::PlanarDomain;
use crate::error::{Error, Result};
use crate::spectral::{differentiate, differentiate_real};

pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct NystromGreen {
    z0: Complex64,
    markers: Vec<Complex64>,
    charges: Vec<f64>,
    density: Vec<f64>,
    nodes: Vec<Complex64>,
    /// gamma'(theta_j) times the trapezoid step.
    dz: Vec<Complex64>,
    offsets: Vec<usize>,
    /// Interior boundary values of F, F', F''.
    f: Vec<Complex64>,
    fp: Vec<Complex64>,
    fpp: Vec<Complex64>,
    residual: f64,
    condition: f64,
    harmonic_at_pole: f64,
}

/// Hager-Higham estimate of the 1-norm of the inverse.
fn inverse_norm1_estimate(a: &DMatrix<f64>) -> Option<f64> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let lut = a.transpose().lu();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        let norm = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = lut.solve(&xi)?;
        let (j, zmax) = z.iter().enumerate().fold(
            (0, 0.0f64),
            |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
        );
        if norm <= est || zmax <= z.dot(&x) {
            est = est.max(norm);
            break;
        }
        est = norm;
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    Some(est)
}

impl NystromGreen {
    pub fn build(domain: &PlanarDomain) -> Result<Self> {
        let z0 = domain.base_point();
        let markers = domain.hole_markers().to_vec();
        let mut nodes = Vec::new();
        let mut dz = Vec::new();
        let mut curvature_term = Vec::new();
        let mut offsets = vec![0];
        for curve in domain.curves() {
            let h = curve.step();
            for ((p, d1), d2) in curve
                .points()
                .iter()
                .zip(curve.tangents())
                .zip(curve.second_derivatives())
            {
                nodes.push(*p);
                dz.push(d1 * h);
                curvature_term.push((d2 / d1).im * h / (4.0 * PI));
            }
            offsets.push(nodes.len());
        }
        let n = nodes.len();
        let k = markers.len();
        let size = n + k;
        let mut a = DMatrix::<f64>::zeros(size, size);
        for i in 0..n {
            let zi = nodes[i];
            for j in 0..n {
                a[(i, j)] = if i == j {
                    0.5 + curvature_term[i]
                } else {
                    (dz[j] / (nodes[j] - zi)).im / (2.0 * PI)
                };
            }
            for (l, c) in markers.iter().enumerate() {
                a[(i, n + l)] = (zi - c).norm().ln();
            }
        }
        for l in 0..k {
            for j in offsets[l + 1]..offsets[l + 2] {
                a[(n + l, j)] = dz[j].norm();
            }
        }
        let mut b = DVector::<f64>::zeros(size);
        for i in 0..n {
            b[i] = -(nodes[i] - z0).norm().ln();
        }

        let norm1 = (0..size)
            .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let inv =
            inverse_norm1_estimate(&a).ok_or_else(|| Error::SolverFailure("boundary system is singular".into()))?;
        let condition = norm1 * inv;
        if condition.is_nan() || condition > MAX_CONDITION {
            return Err(Error::SolverFailure(format!(
                "boundary system condition estimate {condition:e} exceeds {MAX_CONDITION:e}"
            )));
        }
        let x = a
            .clone()
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SolverFailure("boundary system is singular".into()))?;
        let residual = (&a * &x - &b).amax();
        let density: Vec<f64> = x.iter().take(n).copied().collect();
        let charges: Vec<f64> = x.iter().skip(n).copied().collect();

        let mut solver = Self {
            z0,
            markers,
            charges,
            density,
            nodes,
            dz,
            offsets,
            f: Vec::new(),
            fp: Vec::new(),
            fpp: Vec::new(),
            residual,
            condition,
            harmonic_at_pole: 0.0,
        };
        solver.boundary_values();
        let (f0, _, _) = solver.eval_f(z0);
        solver.harmonic_at_pole = f0.re + solver.charge_potential(z0);
        Ok(solver)
    }

    /// Limits of F and its first two derivatives from inside the domain.
    fn boundary_values(&mut self) {
        let n = self.nodes.len();
        let mut f = vec![Complex64::new(0.0, 0.0); n];
        let mut fp = vec![Complex64::new(0.0, 0.0); n];
        let mut fpp = vec![Complex64::new(0.0, 0.0); n];
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        for c in 0..self.offsets.len() - 1 {
            let (lo, hi) = (self.offsets[c], self.offsets[c + 1]);
            let mu_theta = differentiate_real(&self.density[lo..hi]);
            let h = 2.0 * PI / (hi - lo) as f64;
            for i in lo..hi {
                let zi = self.nodes[i];
                let mi = self.density[i];
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    if j != i {
                        s += (self.density[j] - mi) * self.dz[j] / (self.nodes[j] - zi);
                    }
                }
                f[i] = mi + (s + mu_theta[i - lo] * h) / two_pi_i;
            }
            let tangents: Vec<Complex64> = self.dz[lo..hi].iter().map(|d| d / h).collect();
            let d1 = differentiate(&f[lo..hi]);
            for (m, i) in (lo..hi).enumerate() {
                fp[i] = d1[m] / tangents[m];
            }
            let d2 = differentiate(&fp[lo..hi]);
            for (m, i) in (lo..hi).enumerate() {
                fpp[i] = d2[m] / tangents[m];
            }
        }
        self.f = f;
        self.fp = fp;
        self.fpp = fpp;
    }

    /// Barycentric Cauchy interpolation of F, F', F'' at an interior point.
    fn eval_f(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut den, mut n0, mut n1, mut n2) = (zero, zero, zero, zero);
        for j in 0..self.nodes.len() {
            let d = self.nodes[j] - z;
            if d.norm() < 1e-14 {
                return (self.f[j], self.fp[j], self.fpp[j]);
            }
            let w = self.dz[j] / d;
            den += w;
            n0 += w * self.f[j];
            n1 += w * self.fp[j];
            n2 += w * self.fpp[j];
        }
        (n0 / den, n1 / den, n2 / den)
    }

    fn charge_potential(&self, z: Complex64) -> f64 {
        self.markers
            .iter()
            .zip(&self.charges)
            .map(|(c, a)| a * (z - c).norm().ln())
            .sum()
    }

    pub fn value(&self, z: Complex64) -> f64 {
        let (f, _, _) = self.eval_f(z);
        (z - self.z0).norm().ln() + f.re + self.charge_potential(z)
    }

    pub fn phi(&self, z: Complex64) -> Complex64 {
        let (_, fp, _) = self.eval_f(z);
        let charges: Complex64 = self.markers.iter().zip(&self.charges).map(|(c, a)| a / (z - c)).sum();
        1.0 / (z - self.z0) + fp + charges
    }

    pub fn phi_prime(&self, z: Complex64) -> Complex64 {
        let (_, _, fpp) = self.eval_f(z);
        let charges: Complex64 = self
            .markers
            .iter()
            .zip(&self.charges)
            .map(|(c, a)| {
                let d = z - c;
                -a / (d * d)
            })
            .sum();
        let d0 = z - self.z0;
        -1.0 / (d0 * d0) + fpp + charges
    }

    /// Phi at the nodes of boundary curve `curve` (outer first), as an interior limit.
    pub fn boundary_phi(&self, curve: usize) -> Vec<Complex64> {
        (self.offsets[curve]..self.offsets[curve + 1])
            .map(|i| {
                let z = self.nodes[i];
                let charges: Complex64 = self.markers.iter().zip(&self.charges).map(|(c, a)| a / (z - c)).sum();
                1.0 / (z - self.z0) + self.fp[i] + charges
            })
            .collect()
    }

    pub fn harmonic_part_at_pole(&self) -> f64 {
        self.harmonic_at_pole
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_annulus_with_nodes, make_disk_with_nodes};
    use crate::green::closed_form::{AnnulusGreen, DiskGreen};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disk_matches_closed_form() {
        let z0 = c(0.3, -0.2);
        let d = make_disk_with_nodes(1.0, c(0.0, 0.0), z0, 128).unwrap();
        let ny = NystromGreen::build(&d).unwrap();
        let exact = DiskGreen::new(c(0.0, 0.0), 1.0, z0);
        for z in [c(0.1, 0.5), c(-0.7, 0.2), c(0.0, -0.999), c(0.95, 0.0)] {
            assert!((ny.value(z) - exact.value(z)).abs() < 1e-11, "{z}");
            assert!((ny.phi(z) - exact.phi(z)).norm() < 1e-9, "{z}");
        }
        assert!((ny.harmonic_part_at_pole() - exact.harmonic_part_at_pole()).abs() < 1e-12);
        assert!(ny.residual() < 1e-12);
    }

    #[test]
    fn annulus_matches_series() {
        let z0 = c(0.7, 0.0);
        let d = make_annulus_with_nodes(0.5, z0, 256).unwrap();
        let ny = NystromGreen::build(&d).unwrap();
        let exact = AnnulusGreen::new(c(0.0, 0.0), 1.0, 0.5, z0);
        for z in [c(0.6, 0.1), c(-0.75, 0.0), c(0.0, 0.501), c(0.0, -0.999)] {
            assert!((ny.value(z) - exact.value(z)).abs() < 1e-10, "{z}");
            assert!((ny.phi(z) - exact.phi(z)).norm() < 1e-8, "{z}");
            assert!((ny.phi_prime(z) - exact.phi_prime(z)).norm() < 1e-5, "{z}");
        }
        let bphi = ny.boundary_phi(1);
        let hole = d.holes()[0].points();
        for (p, v) in hole.iter().zip(&bphi).step_by(17) {
            assert!((v - exact.phi(*p)).norm() < 1e-8);
        }
        assert!((ny.harmonic_part_at_pole() - exact.harmonic_part_at_pole()).abs() < 1e-10);
    }
}
