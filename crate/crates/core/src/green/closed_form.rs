//! Closed-form Green functions of disks and concentric annuli.

use num_complex::Complex64;

/// `G(z) = log|w - w0| - log|1 - conj(w0) w|` with `w = (z - center) / radius`.
#[derive(Debug, Clone)]
pub struct DiskGreen {
    center: Complex64,
    radius: f64,
    w0: Complex64,
}

impl DiskGreen {
    pub fn new(center: Complex64, radius: f64, z0: Complex64) -> Self {
        Self {
            center,
            radius,
            w0: (z0 - center) / radius,
        }
    }

    fn w(&self, z: Complex64) -> Complex64 {
        (z - self.center) / self.radius
    }

    pub fn value(&self, z: Complex64) -> f64 {
        let w = self.w(z);
        (w - self.w0).norm().ln() - (1.0 - self.w0.conj() * w).norm().ln()
    }

    pub fn phi(&self, z: Complex64) -> Complex64 {
        let w = self.w(z);
        let b = self.w0.conj();
        (1.0 / (w - self.w0) + b / (1.0 - b * w)) / self.radius
    }

    pub fn phi_prime(&self, z: Complex64) -> Complex64 {
        let w = self.w(z);
        let b = self.w0.conj();
        let d1 = w - self.w0;
        let d2 = 1.0 - b * w;
        (-1.0 / (d1 * d1) + b * b / (d2 * d2)) / (self.radius * self.radius)
    }

    /// `lim_{z -> z0} G(z) - log|z - z0|`.
    pub fn harmonic_part_at_pole(&self) -> f64 {
        -self.radius.ln() - (1.0 - self.w0.norm_sqr()).ln()
    }
}

/// Green function of `{q R < |z - c| < R}` via the product
/// `P(x) = (1 - x) prod_k (1 - q^{2k} x)(1 - q^{2k} / x)`:
///
/// `G = log|P(w/w0)| - log|P(w conj(w0))| - kappa log|w| + log|w0|`,
/// `kappa = log|w0| / log q`.
#[derive(Debug, Clone)]
pub struct AnnulusGreen {
    center: Complex64,
    radius: f64,
    q: f64,
    w0: Complex64,
    kappa: f64,
}

const SERIES_CUTOFF: f64 = 1e-17;
const MAX_TERMS: usize = 100_000;

impl AnnulusGreen {
    pub fn new(center: Complex64, outer_radius: f64, inner_radius: f64, z0: Complex64) -> Self {
        let q = inner_radius / outer_radius;
        let w0 = (z0 - center) / outer_radius;
        Self {
            center,
            radius: outer_radius,
            q,
            w0,
            kappa: w0.norm().ln() / q.ln(),
        }
    }

    fn w(&self, z: Complex64) -> Complex64 {
        (z - self.center) / self.radius
    }

    /// Iterate `a = q^{2k}` for k = 1, 2, ... until terms drop below the cutoff at `x`.
    fn factors(&self, x: Complex64) -> impl Iterator<Item = f64> {
        let q2 = self.q * self.q;
        let reach = x.norm().max(1.0 / x.norm());
        let mut a = 1.0;
        (0..MAX_TERMS).map_while(move |_| {
            a *= q2;
            (a * reach > SERIES_CUTOFF).then_some(a)
        })
    }

    /// log|P(x)| without the (1 - x) factor.
    fn log_abs_p_reduced(&self, x: Complex64) -> f64 {
        self.factors(x)
            .map(|a| (1.0 - a * x).norm().ln() + (1.0 - a / x).norm().ln())
            .sum()
    }

    fn log_abs_p(&self, x: Complex64) -> f64 {
        (1.0 - x).norm().ln() + self.log_abs_p_reduced(x)
    }

    /// `x d/dx log P(x)`.
    fn l(&self, x: Complex64) -> Complex64 {
        -x / (1.0 - x)
            + self
                .factors(x)
                .map(|a| -a * x / (1.0 - a * x) + a / (x - a))
                .sum::<Complex64>()
    }

    fn l_prime(&self, x: Complex64) -> Complex64 {
        let d = 1.0 - x;
        -1.0 / (d * d)
            + self
                .factors(x)
                .map(|a| {
                    let u = 1.0 - a * x;
                    let v = x - a;
                    -a / (u * u) - a / (v * v)
                })
                .sum::<Complex64>()
    }

    pub fn value(&self, z: Complex64) -> f64 {
        let w = self.w(z);
        self.log_abs_p(w / self.w0) - self.log_abs_p(w * self.w0.conj()) - self.kappa * w.norm().ln()
            + self.w0.norm().ln()
    }

    pub fn phi(&self, z: Complex64) -> Complex64 {
        let w = self.w(z);
        (self.l(w / self.w0) - self.l(w * self.w0.conj()) - self.kappa) / (w * self.radius)
    }

    pub fn phi_prime(&self, z: Complex64) -> Complex64 {
        let w = self.w(z);
        let x = w / self.w0;
        let y = w * self.w0.conj();
        let num = self.l(x) - self.l(y) - self.kappa;
        let dnum = self.l_prime(x) / self.w0 - self.l_prime(y) * self.w0.conj();
        (dnum / w - num / (w * w)) / (self.radius * self.radius)
    }

    pub fn harmonic_part_at_pole(&self) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        let r0 = self.w0.norm();
        self.log_abs_p_reduced(one)
            - self.log_abs_p(Complex64::new(r0 * r0, 0.0))
            - self.kappa * r0.ln()
            - self.radius.ln()
    }
}
