//! Even interaction kernels and the truncated convolution over the box.
//!
//! `(J * phi)(x_j) = sum_i J(x_j - x_i) phi_i prod(h)` with the sum running
//! over cells of the domain only; there is no periodic wrap-around. The sum
//! is evaluated with a zero-padded FFT of length `>= 2n - 1` per axis.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Field};
use crate::error::{Error, Hypothesis, Result};
use crate::potential::PotentialSpec;

/// Analytic kernel families, all functions of `|z|` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum KernelShape {
    /// `J(z) = amplitude * exp(-|z|^2 / (2 width^2))`
    Gaussian { amplitude: f64, width: f64 },
    /// `J(z) = amplitude` for `|z| <= radius`, zero outside.
    TopHat { amplitude: f64, radius: f64 },
}

impl KernelShape {
    pub fn eval(&self, z: [f64; 2]) -> f64 {
        let r2 = z[0] * z[0] + z[1] * z[1];
        match *self {
            KernelShape::Gaussian { amplitude, width } => {
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            KernelShape::TopHat { amplitude, radius } => {
                if r2.sqrt() <= radius {
                    amplitude
                } else {
                    0.0
                }
            }
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            KernelShape::Gaussian { amplitude, .. } | KernelShape::TopHat { amplitude, .. } => {
                amplitude
            }
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> KernelShape {
        match *self {
            KernelShape::Gaussian { width, .. } => KernelShape::Gaussian { amplitude, width },
            KernelShape::TopHat { radius, .. } => KernelShape::TopHat { amplitude, radius },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, s) = match *self {
            KernelShape::Gaussian { amplitude, width } => (amplitude, width),
            KernelShape::TopHat { amplitude, radius } => (amplitude, radius),
        };
        if !a.is_finite() || !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("invalid kernel parameters {self:?}")));
        }
        Ok(())
    }
}

/// A lattice of samples `w(d h)` for offsets `d_i in -(n_i-1)..=(n_i-1)`,
/// together with the padded spectrum used for fast truncated convolution.
#[derive(Clone)]
struct Stencil {
    n: [usize; 2],
    values: Vec<f64>,
    pad: [usize; 2],
    spectrum: Vec<Complex<f64>>,
    forward: [Arc<dyn Fft<f64>>; 2],
    backward: [Arc<dyn Fft<f64>>; 2],
}

impl Stencil {
    fn new(domain: &Domain, sample: impl Fn([f64; 2]) -> f64) -> Stencil {
        let n = domain.shape2();
        let h = domain.spacing2();
        let width = [2 * n[0] - 1, 2 * n[1] - 1];
        let mut values = Vec::with_capacity(width[0] * width[1]);
        for i0 in 0..width[0] {
            for i1 in 0..width[1] {
                let d0 = i0 as f64 - (n[0] - 1) as f64;
                let d1 = i1 as f64 - (n[1] - 1) as f64;
                values.push(sample([d0 * h[0], d1 * h[1]]));
            }
        }
        let pad = [
            (2 * n[0] - 1).next_power_of_two(),
            (2 * n[1] - 1).next_power_of_two(),
        ];
        let mut planner = FftPlanner::new();
        let forward = [planner.plan_fft_forward(pad[0]), planner.plan_fft_forward(pad[1])];
        let backward = [planner.plan_fft_inverse(pad[0]), planner.plan_fft_inverse(pad[1])];

        let mut stencil = Stencil {
            n,
            values,
            pad,
            spectrum: Vec::new(),
            forward,
            backward,
        };
        // offset d lives at index d mod P; P >= 2n-1 keeps the supports disjoint
        let mut buf = vec![Complex::new(0.0, 0.0); pad[0] * pad[1]];
        let scale = domain.quad_weight() / (pad[0] * pad[1]) as f64;
        for i0 in 0..width[0] {
            for i1 in 0..width[1] {
                let d0 = i0 as isize - (n[0] as isize - 1);
                let d1 = i1 as isize - (n[1] as isize - 1);
                let p0 = d0.rem_euclid(pad[0] as isize) as usize;
                let p1 = d1.rem_euclid(pad[1] as isize) as usize;
                buf[p0 * pad[1] + p1] = Complex::new(stencil.values[i0 * width[1] + i1] * scale, 0.0);
            }
        }
        stencil.fft2(&mut buf, true);
        stencil.spectrum = buf;
        stencil
    }

    fn width(&self) -> [usize; 2] {
        [2 * self.n[0] - 1, 2 * self.n[1] - 1]
    }

    fn at(&self, d0: isize, d1: isize) -> f64 {
        let w = self.width();
        let i0 = (d0 + self.n[0] as isize - 1) as usize;
        let i1 = (d1 + self.n[1] as isize - 1) as usize;
        self.values[i0 * w[1] + i1]
    }

    fn fft2(&self, buf: &mut [Complex<f64>], forward: bool) {
        let plans = if forward { &self.forward } else { &self.backward };
        let [p0, p1] = self.pad;
        if p1 > 1 {
            for row in buf.chunks_exact_mut(p1) {
                plans[1].process(row);
            }
        }
        if p0 > 1 {
            let mut col = vec![Complex::new(0.0, 0.0); p0];
            for c in 0..p1 {
                for r in 0..p0 {
                    col[r] = buf[r * p1 + c];
                }
                plans[0].process(&mut col);
                for r in 0..p0 {
                    buf[r * p1 + c] = col[r];
                }
            }
        }
    }

    /// Truncated convolution of the raw values (no reference shift).
    fn convolve_raw(&self, phi: &[f64]) -> Vec<f64> {
        let [n0, n1] = self.n;
        let [p0, p1] = self.pad;
        let mut buf = vec![Complex::new(0.0, 0.0); p0 * p1];
        for r in 0..n0 {
            for c in 0..n1 {
                buf[r * p1 + c] = Complex::new(phi[r * n1 + c], 0.0);
            }
        }
        self.fft2(&mut buf, true);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.fft2(&mut buf, false);
        let mut out = Vec::with_capacity(n0 * n1);
        for r in 0..n0 {
            for c in 0..n1 {
                out.push(buf[r * p1 + c].re);
            }
        }
        out
    }
}

/// Discretized kernel with the derived coefficient field `a = J * 1` and the
/// constants used by the hypothesis checks.
#[derive(Clone)]
pub struct KernelData {
    domain: Domain,
    shape: KernelShape,
    stencil: Stencil,
    a_field: Field,
    c_j: f64,
    d_j: f64,
    a_star: f64,
    a_min: f64,
    a_0: f64,
}

impl fmt::Debug for KernelData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelData")
            .field("domain", &self.domain)
            .field("shape", &self.shape)
            .field("c_j", &self.c_j)
            .field("d_j", &self.d_j)
            .field("a_star", &self.a_star)
            .field("a_0", &self.a_0)
            .finish()
    }
}

impl KernelData {
    /// Sample `shape` on the offset lattice and derive `a`, `c_J`, `d_J`,
    /// `a*` and `a_0`. Fails with an (H1) violation if `a(x) <= 0` anywhere.
    pub fn build(domain: &Domain, shape: KernelShape) -> Result<KernelData> {
        shape.validate()?;
        let stencil = Stencil::new(domain, |z| shape.eval(z));
        let ones = vec![1.0; domain.n_cells()];
        let a_field = Field::new(stencil.convolve_raw(&ones));

        if let Some((j, &a)) = a_field
            .values()
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a > 0.0))
        {
            let x = domain.cell_center(j);
            return Err(Error::Hypothesis {
                hypothesis: Hypothesis::H1,
                detail: format!(
                    "a(x) = J*1 must be positive, found a = {a:e} at x = {:?}",
                    &x[..domain.dim()]
                ),
                witness: Some(x[0]),
            });
        }

        let a_star = a_field.values().iter().cloned().fold(f64::MIN, f64::max);
        let a_min = a_field.values().iter().cloned().fold(f64::MAX, f64::min);

        // sup_x int_Omega |J(x - y)| dy: the Schur constant bounding ||J * .||
        let abs_stencil = Stencil::new(domain, |z| shape.eval(z).abs());
        let c_j = abs_stencil
            .convolve_raw(&ones)
            .into_iter()
            .fold(0.0_f64, f64::max);

        let grad_stencil = Stencil::new(domain, |z| gradient_magnitude(&shape, z, domain));
        let d_j = grad_stencil
            .convolve_raw(&ones)
            .into_iter()
            .fold(0.0_f64, f64::max);

        Ok(KernelData {
            domain: domain.clone(),
            shape,
            stencil,
            a_field,
            c_j,
            d_j,
            a_star,
            a_min,
            a_0: 0.999 * a_min,
        })
    }

    /// Build with the amplitude rescaled so that `c_J == target_cj`.
    pub fn build_scaled(domain: &Domain, shape: KernelShape, target_cj: f64) -> Result<KernelData> {
        let probe = KernelData::build(domain, shape.with_amplitude(1.0))?;
        KernelData::build(domain, shape.with_amplitude(target_cj / probe.c_j))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn a_field(&self) -> &Field {
        &self.a_field
    }

    pub fn c_j(&self) -> f64 {
        self.c_j
    }

    pub fn d_j(&self) -> f64 {
        self.d_j
    }

    pub fn a_star(&self) -> f64 {
        self.a_star
    }

    /// `min_x a(x)` over the grid.
    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    /// Strict lower bound `0 < a_0 < min a`.
    pub fn a_0(&self) -> f64 {
        self.a_0
    }

    /// Stencil sample `J(d h)` for integer offsets `d` (second entry ignored in 1D).
    pub fn stencil_value(&self, d0: isize, d1: isize) -> f64 {
        self.stencil.at(d0, d1)
    }

    /// `J * phi`. The convolution is applied to `phi - phi_0` and the
    /// constant part is added back through `a`, so constants map to
    /// `c * a` exactly.
    pub fn convolve(&self, phi: &Field) -> Result<Field> {
        self.domain.check(phi)?;
        let c = phi.values()[0];
        let shifted: Vec<f64> = phi.values().iter().map(|v| v - c).collect();
        let mut out = self.stencil.convolve_raw(&shifted);
        for (o, a) in out.iter_mut().zip(self.a_field.values()) {
            *o += c * a;
        }
        Ok(Field::new(out))
    }

    /// `a phi - J * phi`.
    pub fn nonlocal_operator(&self, phi: &Field) -> Result<Field> {
        let conv = self.convolve(phi)?;
        Ok(Field::new(
            phi.values()
                .iter()
                .zip(self.a_field.values())
                .zip(conv.values())
                .map(|((p, a), j)| a * p - j)
                .collect(),
        ))
    }

    /// `(1/4) int int J(x-y) (phi(x) - phi(y))^2 dx dy`, evaluated through
    /// `(1/2) [(a phi, phi) - (J * phi, phi)]`.
    pub fn interaction_energy(&self, phi: &Field) -> Result<f64> {
        let b = self.nonlocal_operator(phi)?;
        Ok(0.5 * self.domain.inner(&b, phi))
    }

    /// `int_Omega J(y) dy` with `y` ranging over the cell centres.
    pub fn integral_over_domain(&self) -> f64 {
        (0..self.domain.n_cells())
            .map(|j| self.shape.eval(self.domain.cell_center(j)))
            .sum::<f64>()
            * self.domain.quad_weight()
    }
}

fn gradient_magnitude(shape: &KernelShape, z: [f64; 2], domain: &Domain) -> f64 {
    match *shape {
        KernelShape::Gaussian { amplitude, width } => {
            let r2 = z[0] * z[0] + z[1] * z[1];
            amplitude.abs() * r2.sqrt() / (width * width) * (-r2 / (2.0 * width * width)).exp()
        }
        KernelShape::TopHat { .. } => {
            // jump discontinuity; report the forward-difference total variation density
            let h = domain.spacing2();
            let base = shape.eval(z);
            let mut g2 = 0.0;
            for axis in 0..domain.dim() {
                let mut zz = z;
                zz[axis] += h[axis];
                let d = (shape.eval(zz) - base) / h[axis];
                g2 += d * d;
            }
            g2.sqrt()
        }
    }
}

/// Outcome of the kernel/potential compatibility check `c_0 > c_J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H6Report {
    pub c_0: f64,
    pub c_j: f64,
    pub pass: bool,
    /// `inf_x int (J(y - x) - J(y)) dy + (c_0 - a*)`, the quasiconvexity margin.
    pub quasiconvexity_margin: f64,
}

pub fn check_h6(kernel: &KernelData, potential: &PotentialSpec) -> H6Report {
    let c_0 = potential.c0(kernel);
    let margin = kernel.a_min() - kernel.integral_over_domain() + (c_0 - kernel.a_star());
    H6Report {
        c_0,
        c_j: kernel.c_j(),
        pass: c_0 > kernel.c_j(),
        quasiconvexity_margin: margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_kernel_gives_constant_coefficient() {
        let d = Domain::interval(1.0, 16).unwrap();
        let k = KernelData::build(&d, KernelShape::TopHat { amplitude: 2.0, radius: 5.0 }).unwrap();
        for &a in k.a_field().values() {
            assert_relative_eq!(a, 2.0, epsilon = 1e-13);
        }
        assert_relative_eq!(k.c_j(), 2.0, epsilon = 1e-13);
        let phi = d.field_from_fn(|x| x[0] * x[0]);
        let conv = k.convolve(&phi).unwrap();
        let expected = 2.0 * d.volume() * d.mean(&phi);
        for &v in conv.values() {
            assert_relative_eq!(v, expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn narrow_top_hat_is_a_multiple_of_identity() {
        let d = Domain::interval(1.0, 10).unwrap();
        let k = KernelData::build(&d, KernelShape::TopHat { amplitude: 3.0, radius: 0.05 }).unwrap();
        assert_eq!(k.stencil_value(0, 0), 3.0);
        assert_eq!(k.stencil_value(1, 0), 0.0);
        assert_eq!(k.stencil_value(-1, 0), 0.0);
        let phi = d.field_from_fn(|x| (5.0 * x[0]).sin());
        let conv = k.convolve(&phi).unwrap();
        let w = 3.0 * d.quad_weight();
        for (c, p) in conv.values().iter().zip(phi.values()) {
            assert!((c - w * p).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_coefficient_halves_at_the_boundary() {
        let d = Domain::interval(1.0, 400).unwrap();
        let sigma = 0.02;
        let k = KernelData::build(&d, KernelShape::Gaussian { amplitude: 1.0, width: sigma }).unwrap();
        let mass = sigma * (2.0 * std::f64::consts::PI).sqrt();
        let centre = k.a_field().values()[200];
        assert_relative_eq!(centre, mass, max_relative = 1e-6);
        // boundary cell centre sits h/2 inside: a = (M/2)(1 + erf(h / (2 sqrt2 sigma)))
        let h = d.quad_weight();
        let expected = 0.5 * mass * (1.0 + erf(h / (2.0 * 2f64.sqrt() * sigma)));
        let boundary = k.a_field().values()[0];
        assert_relative_eq!(boundary, expected, max_relative = 2e-3);
    }

    // Maclaurin series, only used for small arguments
    fn erf(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for n in 1..60 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn ones_map_to_a_exactly() {
        let d = Domain::rectangle([1.0, 1.0], [9, 7]).unwrap();
        let k = KernelData::build(&d, KernelShape::Gaussian { amplitude: 1.0, width: 0.3 }).unwrap();
        let conv = k.convolve(&d.constant(1.0)).unwrap();
        assert_eq!(conv.values(), k.a_field().values());
        assert!(k.a_0() < k.a_min() && k.a_min() <= k.a_star());
        assert!(k.a_0() > 0.0);
    }

    #[test]
    fn stencil_is_even() {
        let d = Domain::rectangle([1.0, 2.0], [6, 5]).unwrap();
        let k = KernelData::build(&d, KernelShape::Gaussian { amplitude: 1.0, width: 0.4 }).unwrap();
        for d0 in -5..=5isize {
            for d1 in -4..=4isize {
                assert_eq!(k.stencil_value(d0, d1), k.stencil_value(-d0, -d1));
            }
        }
    }

    #[test]
    fn zero_amplitude_violates_h1() {
        let d = Domain::interval(1.0, 8).unwrap();
        let err = KernelData::build(&d, KernelShape::Gaussian { amplitude: 0.0, width: 0.3 }).unwrap_err();
        assert!(matches!(err, Error::Hypothesis { hypothesis: Hypothesis::H1, .. }));
    }

    #[test]
    fn invalid_width_is_a_config_error() {
        let d = Domain::interval(1.0, 8).unwrap();
        assert!(matches!(
            KernelData::build(&d, KernelShape::Gaussian { amplitude: 1.0, width: 0.0 }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn scaled_build_hits_target() {
        let d = Domain::interval(1.0, 32).unwrap();
        let k = KernelData::build_scaled(&d, KernelShape::Gaussian { amplitude: 7.0, width: 0.7 }, 1.0)
            .unwrap();
        assert_relative_eq!(k.c_j(), 1.0, epsilon = 1e-12);
        // nonnegative kernel: the Schur constant is max a
        assert_relative_eq!(k.c_j(), k.a_star(), epsilon = 1e-12);
        assert!(k.d_j() > 0.0);
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let d = Domain::interval(1.0, 8).unwrap();
        let k = KernelData::build(&d, KernelShape::Gaussian { amplitude: 1.0, width: 0.3 }).unwrap();
        assert!(matches!(k.convolve(&Field::zeros(9)), Err(Error::DomainMismatch { .. })));
    }
}
