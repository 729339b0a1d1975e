//! Point-evaluation extremal problems on `D_t` over a truncated rational basis.
//!
//! The Bergman value is `B = 1 / inf { int_{D_t} |f|^2 dA : f(z0) = 1 }` and the
//! Hardy-type value is `Khat = 1 / inf { (1/2pi) int |f|^2 / |grad G| ds : f(z0) = 1 }`,
//! the boundary integral running over the level curves of `D_t`. Functions and Lebesgue
//! area measure are used throughout; no differential forms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::domain::{DomainShape, PlanarDomain};
use crate::error::{Error, Result};
use crate::green::GreenSolver;
use crate::spectral::{differentiate, upsample};
use crate::sublevel::{trace_level, CoareaQuadrature, LevelCurveSet};

/// Basis degree used unless configured otherwise.
pub const DEFAULT_DEGREE: usize = 24;

/// Relative eigenvalue cutoff of the Gram pseudo-inverse.
pub const EIG_CUTOFF: f64 = 1e-12;

/// Inner/outer radius ratio above which annuli get twice the default degree.
const THIN_ANNULUS: f64 = 0.8;

pub fn default_degree(domain: &PlanarDomain) -> usize {
    match domain.shape() {
        DomainShape::Annulus {
            outer_radius,
            inner_radius,
            ..
        } if inner_radius / outer_radius > THIN_ANNULUS => 2 * DEFAULT_DEGREE,
        _ => DEFAULT_DEGREE,
    }
}

/// A pole group `(s / (z - c))^k`, `k = 1..=K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleGroup {
    pub center: Complex64,
    pub scale: f64,
}

/// Powers `((z - a) / R)^k` for `k = 0..=K` followed by `(s_j / (z - c_j))^k`,
/// `k = 1..=K`, for every pole group. Element 0 is the constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HoloBasis {
    center: Complex64,
    scale: f64,
    degree: usize,
    poles: Vec<PoleGroup>,
}

impl HoloBasis {
    pub fn new(center: Complex64, scale: f64, degree: usize, poles: Vec<PoleGroup>) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) || poles.iter().any(|p| !(p.scale.is_finite() && p.scale > 0.0)) {
            return Err(Error::Configuration("basis scales must be positive".into()));
        }
        if degree == 0 {
            return Err(Error::Configuration("basis degree must be at least 1".into()));
        }
        Ok(Self {
            center,
            scale,
            degree,
            poles,
        })
    }

    /// Basis adapted to a traced level: powers centered and scaled to the outer
    /// component, one pole group per hole marker of the original domain.
    pub fn for_level(domain: &PlanarDomain, level: &LevelCurveSet, degree: usize) -> Result<Self> {
        let outer = level.outer();
        let center = outer
            .nodes
            .iter()
            .zip(&outer.weights)
            .map(|(z, w)| z * w)
            .sum::<Complex64>()
            / outer.length();
        let scale = outer.nodes.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
        let all_nodes = || level.components().iter().flat_map(|c| c.nodes.iter());
        let poles = domain
            .hole_markers()
            .iter()
            .map(|&c| PoleGroup {
                center: c,
                scale: all_nodes().map(|z| (z - c).norm()).fold(f64::INFINITY, f64::min),
            })
            .collect();
        Self::new(center, scale, degree, poles)
    }

    pub fn len(&self) -> usize {
        self.degree + 1 + self.degree * self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn poles(&self) -> &[PoleGroup] {
        &self.poles
    }

    /// All basis elements at `z`.
    pub fn eval(&self, z: Complex64) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        let u = (z - self.center) / self.scale;
        let mut p = Complex64::new(1.0, 0.0);
        for _ in 0..=self.degree {
            out.push(p);
            p *= u;
        }
        for g in &self.poles {
            let u = g.scale / (z - g.center);
            let mut p = u;
            for _ in 0..self.degree {
                out.push(p);
                p *= u;
            }
        }
        out
    }

    /// Functions `Q_i` with `dQ_i / dzbar = conj(b_i)`, single valued off the poles.
    pub fn conj_primitives(&self, z: Complex64) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        let u = (z - self.center) / self.scale;
        let mut p = u;
        for k in 0..=self.degree {
            out.push((p * (self.scale / (k + 1) as f64)).conj());
            p *= u;
        }
        for g in &self.poles {
            let u = g.scale / (z - g.center);
            out.push(Complex64::new(2.0 * g.scale * (z - g.center).norm().ln(), 0.0));
            let mut p = u;
            for k in 2..=self.degree {
                out.push((p * (g.scale / (1.0 - k as f64))).conj());
                p *= u;
            }
        }
        out
    }

    /// `sum_i c_i b_i(z)`.
    pub fn combine(&self, coefficients: &DVector<Complex64>, z: Complex64) -> Complex64 {
        self.eval(z).iter().zip(coefficients.iter()).map(|(b, c)| b * c).sum()
    }
}

/// Hermitian Gram matrix `M_ij = <b_j, b_i>` and evaluation vector `v_i = b_i(z0)`, so that
/// `||sum c_i b_i||^2 = c* M c` and `f(z0) = v^T c`.
#[derive(Debug, Clone)]
pub struct GramSystem {
    pub matrix: DMatrix<Complex64>,
    pub evaluation: DVector<Complex64>,
}

impl GramSystem {
    fn new(matrix: DMatrix<Complex64>, basis: &HoloBasis, z0: Complex64) -> Self {
        let sym = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        Self {
            matrix: sym,
            evaluation: DVector::from_vec(basis.eval(z0)),
        }
    }

    pub fn quadratic_form(&self, c: &DVector<Complex64>) -> f64 {
        (c.adjoint() * &self.matrix * c)[(0, 0)].re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }
}

fn basis_matrix(
    basis: &HoloBasis,
    nodes: &[Complex64],
    f: impl Fn(&HoloBasis, Complex64) -> Vec<Complex64> + Sync,
) -> DMatrix<Complex64> {
    let rows: Vec<Vec<Complex64>> = nodes.par_iter().map(|&z| f(basis, z)).collect();
    DMatrix::from_fn(nodes.len(), basis.len(), |i, j| rows[i][j])
}

/// Level quadrature refined until the narrowest basis feature, of width about
/// `scale / sqrt(K)` near the closest boundary point, spans several nodes, and until
/// there are several nodes per basis function.
struct BoundaryRule {
    nodes: Vec<Complex64>,
    dz: Vec<Complex64>,
    grad: Vec<f64>,
}

const NODES_PER_FEATURE: f64 = 2.0;
const NODES_PER_FUNCTION: usize = 4;
const MAX_REFINEMENT: usize = 16;

impl BoundaryRule {
    fn new(basis: &HoloBasis, level: &LevelCurveSet) -> Self {
        let narrowest = basis.poles.iter().map(|p| p.scale).fold(basis.scale, f64::min) / (basis.degree as f64).sqrt();
        let by_count = (NODES_PER_FUNCTION * basis.len()).div_ceil(level.node_count());
        let mut rule = Self {
            nodes: Vec::new(),
            dz: Vec::new(),
            grad: Vec::new(),
        };
        for c in level.components() {
            let n = c.len();
            let spacing = c.length() / n as f64;
            let factor = ((NODES_PER_FEATURE * spacing / narrowest).ceil() as usize)
                .max(by_count)
                .clamp(1, MAX_REFINEMENT)
                .next_power_of_two();
            if factor == 1 {
                rule.nodes.extend_from_slice(&c.nodes);
                rule.dz.extend(c.dz());
                rule.grad.extend_from_slice(&c.grad_norm);
                continue;
            }
            let m = n * factor;
            let z = upsample(&c.nodes, m);
            let dtheta = 2.0 * PI / m as f64;
            rule.dz.extend(differentiate(&z).into_iter().map(|d| d * dtheta));
            rule.nodes.extend(z);
            let g: Vec<Complex64> = c.grad_norm.iter().map(|&g| Complex64::new(g, 0.0)).collect();
            rule.grad.extend(upsample(&g, m).into_iter().map(|g| g.re));
        }
        rule
    }
}

/// Bergman Gram matrix on `D_t` from the boundary form of the area integral,
/// `int conj(b_i) b_j dA = (1/2i) oint Q_i b_j dz` over the positively oriented level.
pub fn bergman_gram(basis: &HoloBasis, level: &LevelCurveSet, z0: Complex64) -> GramSystem {
    let rule = BoundaryRule::new(basis, level);
    let q = basis_matrix(basis, &rule.nodes, HoloBasis::conj_primitives);
    let mut b = basis_matrix(basis, &rule.nodes, HoloBasis::eval);
    for (mut row, d) in b.row_iter_mut().zip(&rule.dz) {
        row *= *d / Complex64::new(0.0, 2.0);
    }
    GramSystem::new(q.transpose() * b, basis, z0)
}

/// Bergman Gram matrix by direct area quadrature.
pub fn bergman_gram_coarea(basis: &HoloBasis, coarea: &CoareaQuadrature, z0: Complex64) -> GramSystem {
    let rule = coarea.area_rule();
    let nodes: Vec<Complex64> = rule.iter().map(|&(z, _)| z).collect();
    let b = basis_matrix(basis, &nodes, HoloBasis::eval);
    let mut bw = b.clone();
    for (mut row, &(_, w)) in bw.row_iter_mut().zip(&rule) {
        row *= Complex64::new(w, 0.0);
    }
    GramSystem::new(b.adjoint() * bw, basis, z0)
}

/// Hardy-type Gram matrix `(1/2pi) sum over components oint conj(b_i) b_j / |grad G| ds`.
pub fn hardy_gram(basis: &HoloBasis, level: &LevelCurveSet, z0: Complex64) -> GramSystem {
    let rule = BoundaryRule::new(basis, level);
    let b = basis_matrix(basis, &rule.nodes, HoloBasis::eval);
    let mut bw = b.clone();
    for ((mut row, d), g) in bw.row_iter_mut().zip(&rule.dz).zip(&rule.grad) {
        row *= Complex64::new(d.norm() / (2.0 * PI * g), 0.0);
    }
    GramSystem::new(b.adjoint() * bw, basis, z0)
}

#[derive(Debug, Clone)]
pub struct ExtremalSolution {
    /// Coefficients of the minimizer, normalized to `f(z0) = 1`.
    pub coefficients: DVector<Complex64>,
    pub min_value: f64,
    pub kernel_value: f64,
    /// Eigenvalues kept by the cutoff.
    pub retained: usize,
}

/// Minimize `c* M c` subject to `v^T c = 1` using the eigen-cutoff pseudo-inverse of M.
pub fn minimize_point_evaluation(gram: &GramSystem) -> Result<ExtremalSolution> {
    let eig = SymmetricEigen::new(gram.matrix.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(lmax.is_finite() && lmax > 0.0) {
        return Err(Error::Degenerate(format!("largest Gram eigenvalue is {lmax}")));
    }
    let vbar = gram.evaluation.map(|x| x.conj());
    let mut pinv_v = DVector::zeros(vbar.len());
    let mut s = 0.0;
    let mut retained = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= EIG_CUTOFF * lmax {
            continue;
        }
        retained += 1;
        let u = eig.eigenvectors.column(k);
        let proj = u.dotc(&vbar);
        s += proj.norm_sqr() / l;
        pinv_v += u * (proj / l);
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Degenerate(format!("v* M+ v = {s}")));
    }
    Ok(ExtremalSolution {
        coefficients: pinv_v / Complex64::new(s, 0.0),
        min_value: 1.0 / s,
        kernel_value: s,
        retained,
    })
}

/// Relative singular-value cutoff for the Hardy-type problem.
pub const HARDY_CUTOFF: f64 = 1e-13;

/// Relative singular-value cutoff of the Hardy-orthonormal frame in which the Bergman
/// problem is solved.
pub const FRAME_CUTOFF: f64 = 1e-12;

/// Bergman value, Hardy-type value and Hardy-type norm of `B(., z0)` for one basis.
///
/// The Hardy-type problem is solved from an SVD of the weighted boundary values rather
/// than from its Gram matrix, whose condition number is the square. The same SVD gives a
/// Hardy-orthonormal frame in which the Bergman Gram matrix is well scaled.
pub fn factored_kernels(basis: &HoloBasis, level: &LevelCurveSet, z0: Complex64) -> Result<(f64, f64, f64)> {
    let rule = BoundaryRule::new(basis, level);
    let b = basis_matrix(basis, &rule.nodes, HoloBasis::eval);
    let mut a = b.clone();
    for ((mut row, d), g) in a.row_iter_mut().zip(&rule.dz).zip(&rule.grad) {
        row *= Complex64::new((d.norm() / (2.0 * PI * g)).sqrt(), 0.0);
    }
    let svd = a.qr().r().svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD of the boundary values failed".into()))?;
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    if !(smax.is_finite() && smax > 0.0) {
        return Err(Error::Degenerate(format!("largest singular value is {smax}")));
    }
    // values at z0 of the orthonormal functions psi_k = sum_i b_i V_ik / sigma_k
    let v = DVector::from_vec(basis.eval(z0));
    let at_z0: Vec<Complex64> = (0..sigma.len())
        .map(|k| {
            vt.row(k)
                .iter()
                .zip(v.iter())
                .map(|(x, e)| x.conj() * e)
                .sum::<Complex64>()
                / sigma[k]
        })
        .collect();
    let khat: f64 = (0..sigma.len())
        .filter(|&k| sigma[k] > HARDY_CUTOFF * smax)
        .map(|k| at_z0[k].norm_sqr())
        .sum();
    if !(khat.is_finite() && khat > 0.0) {
        return Err(Error::Degenerate(format!("Hardy-type value {khat}")));
    }

    let keep: Vec<usize> = (0..sigma.len()).filter(|&k| sigma[k] > FRAME_CUTOFF * smax).collect();
    let frame = DMatrix::from_fn(basis.len(), keep.len(), |i, j| vt[(keep[j], i)].conj() / sigma[keep[j]]);
    let psi = &b * &frame;
    let mut q = basis_matrix(basis, &rule.nodes, HoloBasis::conj_primitives) * frame.map(|x| x.conj());
    for (mut row, d) in q.row_iter_mut().zip(&rule.dz) {
        row *= *d / Complex64::new(0.0, 2.0);
    }
    let m = q.transpose() * psi;
    let gram = GramSystem {
        matrix: (&m + m.adjoint()) * Complex64::new(0.5, 0.0),
        evaluation: DVector::from_iterator(keep.len(), keep.iter().map(|&k| at_z0[k])),
    };
    let bergman = minimize_point_evaluation(&gram)?;
    let bv = bergman.kernel_value;
    // the frame is orthonormal, so the Hardy-type norm is the coefficient norm
    Ok((bv, khat, bv * bv * bergman.coefficients.norm_squared()))
}

/// `c* M c` for the Hardy-type Gram matrix on `level`.
pub fn hardy_norm_of(
    coefficients: &DVector<Complex64>,
    basis: &HoloBasis,
    level: &LevelCurveSet,
    z0: Complex64,
) -> Result<f64> {
    if coefficients.len() != basis.len() || coefficients.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::Configuration(
            "coefficients must be finite and match the basis".into(),
        ));
    }
    Ok(hardy_gram(basis, level, z0).quadratic_form(coefficients))
}

/// Both kernels on one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelKernels {
    pub t: f64,
    /// `B_{D_t}(z0, z0)`.
    pub bergman: f64,
    /// `Khat_{D_t}(z0)`.
    pub khat: f64,
    /// Hardy-type norm of `B_{D_t}(., z0)`.
    pub hnorm_bergman: f64,
    /// Accepted basis degree.
    pub degree: usize,
    /// Largest relative change of the kernels between the last two degrees.
    pub degree_change: f64,
}

impl LevelKernels {
    pub fn degree_converged(&self) -> bool {
        self.degree_change < DEGREE_TOL
    }
}

/// Relative change between degrees K and 2K at which the basis is accepted.
pub const DEGREE_TOL: f64 = 1e-6;

/// Degree beyond which doubling stops.
pub const MAX_DEGREE: usize = 96;

fn kernels_at_degree(solver: &GreenSolver, level: &LevelCurveSet, degree: usize) -> Result<(f64, f64, f64)> {
    let basis = HoloBasis::for_level(solver.domain(), level, degree)?;
    factored_kernels(&basis, level, solver.domain().base_point())
}

/// Kernels on `level`, doubling the degree from `degree` until both change by less than
/// [`DEGREE_TOL`] or [`MAX_DEGREE`] is reached.
pub fn kernels_at_level(solver: &GreenSolver, level: &LevelCurveSet, degree: usize) -> Result<LevelKernels> {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let mut k = degree.max(1);
    let mut prev = kernels_at_degree(solver, level, k)?;
    loop {
        let next = kernels_at_degree(solver, level, 2 * k)?;
        let change = rel(prev.0, next.0).max(rel(prev.1, next.1));
        k *= 2;
        if change < DEGREE_TOL || 2 * k > MAX_DEGREE {
            return Ok(LevelKernels {
                t: level.t(),
                bergman: next.0,
                khat: next.1,
                hnorm_bergman: next.2,
                degree: k,
                degree_change: change,
            });
        }
        prev = next;
    }
}

/// `B_{D_t}(z0, z0)`.
pub fn bergman_diag(solver: &GreenSolver, t: f64, degree: usize) -> Result<f64> {
    let level = trace_level(solver, t)?;
    Ok(kernels_at_degree(solver, &level, degree)?.0)
}

/// `Khat_{D_t}(z0)`.
pub fn hardy_kernel(solver: &GreenSolver, t: f64, degree: usize) -> Result<f64> {
    let level = trace_level(solver, t)?;
    Ok(kernels_at_degree(solver, &level, degree)?.1)
}
