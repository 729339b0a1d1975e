//! Periodic spectral helpers: FFT coefficients, differentiation, trigonometric
//! interpolation, plus Gauss-Legendre rules for the non-periodic integrals.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Signed wavenumber of FFT bin `j` for a length-`n` transform.
fn wavenumber(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

/// Fourier coefficients `c_k` with `x_j = sum_k c_k exp(i k theta_j)`, bins in FFT order.
pub fn fourier_coefficients(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

fn synthesize(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut buf = coeffs.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Derivative with respect to the uniform parameter theta in [0, 2pi).
pub fn differentiate(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut c = fourier_coefficients(samples);
    for (j, cj) in c.iter_mut().enumerate() {
        if n.is_multiple_of(2) && j == n / 2 {
            *cj = Complex64::new(0.0, 0.0);
        } else {
            *cj *= Complex64::new(0.0, wavenumber(j, n));
        }
    }
    synthesize(&c)
}

/// Band-limited resampling of `n` equispaced periodic samples onto `m >= n` points.
pub fn upsample(samples: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = samples.len();
    assert!(m >= n, "upsample needs m >= n");
    if m == n {
        return samples.to_vec();
    }
    let c = fourier_coefficients(samples);
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    for (j, &cj) in c.iter().enumerate() {
        if n.is_multiple_of(2) && j == n / 2 {
            padded[j] += 0.5 * cj;
            padded[m - j] += 0.5 * cj;
        } else if j <= n / 2 {
            padded[j] = cj;
        } else {
            padded[m - (n - j)] = cj;
        }
    }
    synthesize(&padded)
}

pub fn differentiate_real(samples: &[f64]) -> Vec<f64> {
    let c: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    differentiate(&c).into_iter().map(|z| z.re).collect()
}

/// Band-limited interpolant of equispaced periodic samples.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    coeffs: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(samples: &[Complex64]) -> Self {
        let n = samples.len();
        let mut coeffs = fourier_coefficients(samples);
        if n.is_multiple_of(2) {
            // split the Nyquist mode symmetrically so the interpolant is real for real data
            coeffs[n / 2] *= 0.5;
        }
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn modes(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        let n = self.coeffs.len();
        let nyq = n.is_multiple_of(2).then_some(n / 2);
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(j, &c)| (wavenumber(j, n), c))
            .chain(nyq.map(|j| (-(j as f64), self.coeffs[j])))
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        self.modes()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k * theta))
            .sum()
    }

    /// Values at many points, with the exponentials built by recurrence.
    pub fn eval_many(&self, thetas: &[f64]) -> Vec<Complex64> {
        let n = self.coeffs.len();
        let half = n / 2;
        thetas
            .iter()
            .map(|&theta| {
                let w = Complex64::from_polar(1.0, theta);
                let mut acc = self.coeffs[0];
                let (mut up, mut down) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
                for k in 1..=half {
                    up *= w;
                    down *= w.conj();
                    if n.is_multiple_of(2) && k == half {
                        acc += self.coeffs[half] * (up + down);
                    } else {
                        acc += self.coeffs[k] * up + self.coeffs[n - k] * down;
                    }
                }
                acc
            })
            .collect()
    }

    pub fn eval_derivative(&self, theta: f64) -> Complex64 {
        self.modes()
            .map(|(k, c)| c * Complex64::new(0.0, k) * Complex64::from_polar(1.0, k * theta))
            .sum()
    }

    /// Mean value (zeroth coefficient).
    pub fn mean(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Antiderivative minus its linear part: `int_0^theta (f - mean)`.
    pub fn eval_periodic_integral(&self, theta: f64) -> Complex64 {
        self.modes()
            .filter(|(k, _)| *k != 0.0)
            .map(|(k, c)| c * (Complex64::from_polar(1.0, k * theta) - 1.0) / Complex64::new(0.0, k))
            .sum()
    }
}

/// Equispaced parameter values on [0, 2pi).
pub fn uniform_angles(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| 2.0 * PI * j as f64 / n as f64)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(w.iter())
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_is_exact_for_band_limited_data() {
        let f = |t: f64| Complex64::new((3.0 * t).cos(), (2.0 * t).sin()) + Complex64::from_polar(0.5, -3.0 * t);
        let n = 8;
        let samples: Vec<Complex64> = uniform_angles(n).map(f).collect();
        let up = upsample(&samples, 40);
        for (t, u) in uniform_angles(40).zip(&up) {
            assert!((f(t) - u).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_trig_polynomial_is_exact() {
        let n = 32;
        let samples: Vec<Complex64> = uniform_angles(n)
            .map(|t| Complex64::new((3.0 * t).cos(), (2.0 * t).sin()))
            .collect();
        let d = differentiate(&samples);
        for (j, t) in uniform_angles(n).enumerate() {
            let want = Complex64::new(-3.0 * (3.0 * t).sin(), 2.0 * (2.0 * t).cos());
            assert!((d[j] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolant_reproduces_off_grid() {
        let n = 64;
        let f = |t: f64| Complex64::new((t).exp().cos(), (t.sin()).exp());
        let samples: Vec<Complex64> = uniform_angles(n).map(|t| f(t.sin() + t)).collect();
        let interp = TrigInterpolant::new(&samples);
        for (j, s) in samples.iter().enumerate() {
            let t = 2.0 * PI * j as f64 / n as f64;
            assert!((interp.eval(t) - s).norm() < 1e-12);
        }
        let g = |t: f64| Complex64::new(t.cos().exp(), 0.0);
        let s2: Vec<Complex64> = uniform_angles(n).map(g).collect();
        let i2 = TrigInterpolant::new(&s2);
        assert!((i2.eval(0.123) - g(0.123)).norm() < 1e-13);
        let many = interp.eval_many(&[0.3, 1.7]);
        assert!((many[0] - interp.eval(0.3)).norm() < 1e-12 && (many[1] - interp.eval(1.7)).norm() < 1e-12);
        assert!((i2.eval_derivative(0.123).re + 0.123f64.sin() * 0.123f64.cos().exp()).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1usize, 2, 5, 8, 16] {
            let rule = gauss_legendre_on(n, 0.0, 2.0);
            let deg = 2 * n - 1;
            let approx: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((approx - exact).abs() < 1e-12 * exact, "n={n}");
        }
    }
}
