//! Independent reference implementations: dense finite-difference matrices,
//! direct-sum convolution and double-sum energies, and an RK4 integrator of
//! the semi-discrete equations built only from those.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use nonlocal_ch::{Domain, Field, KernelData, PotentialSpec};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn neumann_1d(n: usize, h: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        if j > 0 {
            m[(j, j - 1)] = -1.0 / (h * h);
            m[(j, j)] += 1.0 / (h * h);
        }
        if j + 1 < n {
            m[(j, j + 1)] = -1.0 / (h * h);
            m[(j, j)] += 1.0 / (h * h);
        }
    }
    m
}

/// Cell-centred Neumann `-Laplacian` as a dense matrix (row-major cell order).
pub fn dense_laplacian(d: &Domain) -> DMatrix<f64> {
    let n = d.n();
    let h = d.spacing();
    if d.dim() == 1 {
        return neumann_1d(n[0], h[0]);
    }
    let a0 = neumann_1d(n[0], h[0]);
    let a1 = neumann_1d(n[1], h[1]);
    a0.kronecker(&DMatrix::identity(n[1], n[1])) + DMatrix::identity(n[0], n[0]).kronecker(&a1)
}

pub fn to_vec(f: &Field) -> DVector<f64> {
    DVector::from_column_slice(f.values())
}

pub fn to_field(v: &DVector<f64>) -> Field {
    Field::new(v.iter().copied().collect())
}

pub fn dense_mean(d: &Domain, v: &DVector<f64>) -> f64 {
    v.sum() / d.n_cells() as f64
}

/// `||psi||_{V'}^2 = (A^+ psi^, psi^) + <psi>^2` via the regularized matrix
/// `A + (1/N) 11^T`, which maps mean-free vectors to mean-free vectors.
pub fn dense_vprime_sq(d: &Domain, f: &Field) -> f64 {
    let a = dense_laplacian(d);
    let n = d.n_cells();
    let b = &a + DMatrix::from_element(n, n, 1.0 / n as f64);
    let v = to_vec(f);
    let m = dense_mean(d, &v);
    let hat = v.map(|x| x - m);
    let u = b.lu().solve(&hat).expect("regularized Laplacian is invertible");
    d.quad_weight() * u.dot(&hat) + m * m
}

/// `(c0 I + c1 A)^{-1} f` by dense LU.
pub fn dense_helmholtz(d: &Domain, c0: f64, c1: f64, f: &Field) -> Field {
    let a = dense_laplacian(d);
    let n = d.n_cells();
    let m = DMatrix::identity(n, n) * c0 + a * c1;
    to_field(&m.lu().solve(&to_vec(f)).expect("invertible"))
}

pub fn direct_convolution(k: &KernelData, f: &Field) -> Field {
    let d = k.domain();
    let shape = k.shape();
    let w = d.quad_weight();
    let n = d.n_cells();
    Field::new(
        (0..n)
            .map(|i| {
                let xi = d.cell_center(i);
                (0..n)
                    .map(|j| {
                        let xj = d.cell_center(j);
                        shape.eval([xi[0] - xj[0], xi[1] - xj[1]]) * f.values()[j]
                    })
                    .sum::<f64>()
                    * w
            })
            .collect(),
    )
}

/// `1/4 sum_i sum_j J(x_i - x_j) (phi_i - phi_j)^2 w^2`.
pub fn double_sum_energy(k: &KernelData, f: &Field) -> f64 {
    let d = k.domain();
    let shape = k.shape();
    let w = d.quad_weight();
    let n = d.n_cells();
    let mut s = 0.0;
    for i in 0..n {
        let xi = d.cell_center(i);
        for j in 0..n {
            let xj = d.cell_center(j);
            let diff = f.values()[i] - f.values()[j];
            s += shape.eval([xi[0] - xj[0], xi[1] - xj[1]]) * diff * diff;
        }
    }
    0.25 * s * w * w
}

/// `a phi - J * phi + F'(phi)` assembled from the direct-sum oracle.
pub fn dense_potential(k: &KernelData, p: &PotentialSpec, f: &Field) -> DVector<f64> {
    let ones = Field::new(vec![1.0; f.len()]);
    let a = direct_convolution(k, &ones);
    let jf = direct_convolution(k, f);
    DVector::from_iterator(
        f.len(),
        (0..f.len()).map(|i| a.values()[i] * f.values()[i] - jf.values()[i] + p.df(f.values()[i])),
    )
}

/// Semi-discrete relaxation system
/// `(I + alpha A) phi_t = -A (r(phi) - delta theta)`,
/// `eps theta_t = -A theta - delta phi_t`, integrated with classical RK4.
pub struct Rk4Oracle<'a> {
    pub kernel: &'a KernelData,
    pub potential: &'a PotentialSpec,
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    a: DMatrix<f64>,
    visc: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> Rk4Oracle<'a> {
    pub fn new(kernel: &'a KernelData, potential: &'a PotentialSpec, alpha: f64, epsilon: f64, delta: f64) -> Self {
        let d = kernel.domain();
        let a = dense_laplacian(d);
        let n = d.n_cells();
        let visc = (DMatrix::identity(n, n) + &a * alpha).lu();
        Rk4Oracle { kernel, potential, alpha, epsilon, delta, a, visc }
    }

    fn rhs(&self, phi: &DVector<f64>, theta: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let r = dense_potential(self.kernel, self.potential, &to_field(phi));
        let phi_t = self.visc.solve(&(-(&self.a * (r - theta * self.delta)))).expect("invertible");
        let theta_t = (-(&self.a * theta) - &phi_t * self.delta) / self.epsilon;
        (phi_t, theta_t)
    }

    pub fn integrate(&self, phi: &Field, theta: &Field, dt: f64, steps: usize) -> (Field, Field) {
        let mut p = to_vec(phi);
        let mut t = to_vec(theta);
        for _ in 0..steps {
            let (k1p, k1t) = self.rhs(&p, &t);
            let (k2p, k2t) = self.rhs(&(&p + &k1p * (0.5 * dt)), &(&t + &k1t * (0.5 * dt)));
            let (k3p, k3t) = self.rhs(&(&p + &k2p * (0.5 * dt)), &(&t + &k2t * (0.5 * dt)));
            let (k4p, k4t) = self.rhs(&(&p + &k3p * dt), &(&t + &k3t * dt));
            p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
            t += (k1t + k2t * 2.0 + k3t * 2.0 + k4t) * (dt / 6.0);
        }
        (to_field(&p), to_field(&t))
    }
}

pub fn sup_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
