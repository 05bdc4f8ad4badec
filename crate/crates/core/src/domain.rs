//! Uniform cell-centred grids on a box with Neumann boundary conditions.
//!
//! Every spectral operation goes through the orthonormal cosine basis
//! `e_k(x) = prod_i c_{k_i} cos(pi k_i x_i / L_i)` sampled at the cell
//! centres. The eigenvalues attached to the modes are those of the standard
//! second-order finite-difference Neumann Laplacian,
//! `lambda_k = sum_i (2 / h_i^2) (1 - cos(pi k_i / n_i))`, so the spectral
//! operator coincides with the dense FD matrix up to rounding.
//!
//! Internally a 1D domain is stored as an `n x 1` grid with a virtual unit
//! length on the second axis; only `dim` axes are reported publicly.

use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};

/// Real grid function, one value per cell in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Field { values }
    }

    pub fn zeros(len: usize) -> Self {
        Field::new(vec![0.0; len])
    }

    pub fn constant(len: usize, c: f64) -> Self {
        Field::new(vec![c; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields of equal length.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.len(), other.len(), "zip_map on fields of different length");
        Field::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Box `prod_i (0, L_i)` split into `n_i` equal cells per axis.
#[derive(Clone)]
pub struct Domain {
    dim: usize,
    lengths: [f64; 2],
    n: [usize; 2],
    h: [f64; 2],
    eigenvalues: Vec<f64>,
    lambda_min_pos: f64,
    plans: [Arc<dyn TransformType2And3<f64>>; 2],
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("dim", &self.dim)
            .field("lengths", &self.lengths())
            .field("n", &self.n())
            .finish()
    }
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.lengths == other.lengths && self.n == other.n
    }
}

impl Domain {
    pub fn new(lengths: &[f64], n: &[usize]) -> Result<Self> {
        let dim = lengths.len();
        if !(1..=2).contains(&dim) || n.len() != dim {
            return Err(Error::Config(format!(
                "domain must be 1D or 2D with one cell count per axis (lengths {lengths:?}, n {n:?})"
            )));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) || n.iter().any(|&k| k < 2) {
            return Err(Error::Config(format!(
                "domain lengths must be positive and every axis needs at least 2 cells (lengths {lengths:?}, n {n:?})"
            )));
        }
        let mut ls = [1.0; 2];
        let mut ns = [1usize; 2];
        ls[..dim].copy_from_slice(lengths);
        ns[..dim].copy_from_slice(n);
        let h = [ls[0] / ns[0] as f64, ls[1] / ns[1] as f64];

        let axis_eig = |axis: usize, k: usize| -> f64 {
            if ns[axis] == 1 {
                return 0.0;
            }
            let hh = h[axis];
            2.0 / (hh * hh) * (1.0 - (std::f64::consts::PI * k as f64 / ns[axis] as f64).cos())
        };
        let mut eigenvalues = Vec::with_capacity(ns[0] * ns[1]);
        for k0 in 0..ns[0] {
            for k1 in 0..ns[1] {
                eigenvalues.push(axis_eig(0, k0) + axis_eig(1, k1));
            }
        }
        let lambda_min_pos = (0..dim)
            .map(|axis| axis_eig(axis, 1))
            .fold(f64::INFINITY, f64::min);

        let mut planner = DctPlanner::new();
        let plans = [planner.plan_dct2(ns[0]), planner.plan_dct2(ns[1])];
        Ok(Domain {
            dim,
            lengths: ls,
            n: ns,
            h,
            eigenvalues,
            lambda_min_pos,
            plans,
        })
    }

    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Domain::new(&[length], &[n])
    }

    pub fn rectangle(lengths: [f64; 2], n: [usize; 2]) -> Result<Self> {
        Domain::new(&lengths, &n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn n(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    /// Internal `[n0, n1]` shape; `n1 == 1` for 1D domains.
    pub(crate) fn shape2(&self) -> [usize; 2] {
        self.n
    }

    pub(crate) fn spacing2(&self) -> [f64; 2] {
        self.h
    }

    pub fn n_cells(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Cell measure `prod_i h_i`.
    pub fn quad_weight(&self) -> f64 {
        self.h[0] * self.h[1]
    }

    /// `|Omega|`.
    pub fn volume(&self) -> f64 {
        self.lengths[0] * self.lengths[1]
    }

    /// Eigenvalues of the discrete Neumann Laplacian, indexed like the cells.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest nonzero eigenvalue.
    pub fn lambda_min_positive(&self) -> f64 {
        self.lambda_min_pos
    }

    /// Discrete Poincaré-Wirtinger constant `1 / lambda_min_positive`.
    pub fn poincare_const(&self) -> f64 {
        1.0 / self.lambda_min_pos
    }

    /// Constant of the embedding `H -> V'`: `max(1, sqrt(poincare_const))`.
    pub fn embedding_const(&self) -> f64 {
        self.poincare_const().sqrt().max(1.0)
    }

    pub fn cell_center(&self, index: usize) -> [f64; 2] {
        let (i0, i1) = (index / self.n[1], index % self.n[1]);
        [
            (i0 as f64 + 0.5) * self.h[0],
            (i1 as f64 + 0.5) * self.h[1],
        ]
    }

    /// Sample `f` at the cell centres; `f` receives `dim` coordinates.
    pub fn field_from_fn(&self, f: impl Fn(&[f64]) -> f64) -> Field {
        Field::new(
            (0..self.n_cells())
                .map(|j| {
                    let x = self.cell_center(j);
                    f(&x[..self.dim])
                })
                .collect(),
        )
    }

    pub fn constant(&self, c: f64) -> Field {
        Field::constant(self.n_cells(), c)
    }

    /// Unnormalized cosine mode `prod_i cos(pi k_i (j_i + 1/2) / n_i)`.
    pub fn cosine_mode(&self, k: &[usize]) -> Field {
        assert_eq!(k.len(), self.dim, "one wavenumber per axis");
        let mut kk = [0usize; 2];
        kk[..self.dim].copy_from_slice(k);
        let n = self.n;
        Field::new(
            (0..self.n_cells())
                .map(|idx| {
                    let j = [idx / n[1], idx % n[1]];
                    (0..2)
                        .map(|a| {
                            (std::f64::consts::PI * kk[a] as f64 * (j[a] as f64 + 0.5)
                                / n[a] as f64)
                                .cos()
                        })
                        .product::<f64>()
                })
                .collect(),
        )
    }

    /// Eigenvalue of the mode with wavenumbers `k`.
    pub fn eigenvalue(&self, k: &[usize]) -> f64 {
        let idx = if self.dim == 1 { k[0] } else { k[0] * self.n[1] + k[1] };
        self.eigenvalues[idx]
    }

    pub fn check(&self, f: &Field) -> Result<()> {
        if f.len() == self.n_cells() {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                expected: self.n_cells(),
                got: f.len(),
            })
        }
    }

    fn assert_on_grid(&self, f: &Field) {
        assert_eq!(
            f.len(),
            self.n_cells(),
            "field has {} values but the domain has {} cells",
            f.len(),
            self.n_cells()
        );
    }

    // ---------------------------------------------------------------
    // transforms

    /// Per-axis normalization turning raw DCT-II sums into coefficients
    /// against the L2(Omega)-orthonormal cosine basis.
    fn forward_weights(&self, axis: usize) -> (f64, f64) {
        let (h, l) = (self.h[axis], self.lengths[axis]);
        (h / l.sqrt(), h * (2.0 / l).sqrt())
    }

    fn for_each_line(&self, data: &mut [f64], axis: usize, mut op: impl FnMut(&mut [f64])) {
        let [n0, n1] = self.n;
        if axis == 1 {
            for row in data.chunks_exact_mut(n1) {
                op(row);
            }
        } else {
            let mut line = vec![0.0; n0];
            for c in 0..n1 {
                for r in 0..n0 {
                    line[r] = data[r * n1 + c];
                }
                op(&mut line);
                for r in 0..n0 {
                    data[r * n1 + c] = line[r];
                }
            }
        }
    }

    /// Coefficients of `f` in the orthonormal cosine basis (Parseval:
    /// `sum c_k^2 == l2_norm(f)^2`).
    pub fn forward(&self, f: &Field) -> Vec<f64> {
        self.assert_on_grid(f);
        let mut data = f.values().to_vec();
        for axis in 0..self.dim {
            let plan = Arc::clone(&self.plans[axis]);
            let (w0, wk) = self.forward_weights(axis);
            let mut scratch = vec![0.0; plan.get_scratch_len()];
            self.for_each_line(&mut data, axis, |line| {
                plan.process_dct2_with_scratch(line, &mut scratch);
                line[0] *= w0;
                for v in &mut line[1..] {
                    *v *= wk;
                }
            });
        }
        data
    }

    /// Inverse of [`Domain::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Field {
        assert_eq!(coeffs.len(), self.n_cells());
        let mut data = coeffs.to_vec();
        for axis in 0..self.dim {
            let plan = Arc::clone(&self.plans[axis]);
            let l = self.lengths[axis];
            let (y0, yk) = (2.0 / l.sqrt(), (2.0 / l).sqrt());
            let mut scratch = vec![0.0; plan.get_scratch_len()];
            self.for_each_line(&mut data, axis, |line| {
                line[0] *= y0;
                for v in &mut line[1..] {
                    *v *= yk;
                }
                plan.process_dct3_with_scratch(line, &mut scratch);
            });
        }
        Field::new(data)
    }

    /// Multiply every cosine coefficient by `symbol(lambda_k, k)`.
    pub fn apply_symbol(&self, f: &Field, symbol: impl Fn(f64, usize) -> f64) -> Field {
        let mut c = self.forward(f);
        for (k, (ck, &lam)) in c.iter_mut().zip(&self.eigenvalues).enumerate() {
            *ck *= symbol(lam, k);
        }
        self.inverse(&c)
    }

    // ---------------------------------------------------------------
    // operators and norms

    /// `<psi>`, the average over Omega.
    pub fn mean(&self, f: &Field) -> f64 {
        self.assert_on_grid(f);
        f.values().iter().sum::<f64>() / f.len() as f64
    }

    /// `psi - <psi>`.
    pub fn mean_free(&self, f: &Field) -> Field {
        let m = self.mean(f);
        f.map(|v| v - m)
    }

    pub fn inner(&self, a: &Field, b: &Field) -> f64 {
        self.assert_on_grid(a);
        self.assert_on_grid(b);
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x * y)
            .sum::<f64>()
            * self.quad_weight()
    }

    pub fn l2_norm(&self, f: &Field) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// `A_N psi = -Laplace psi` with homogeneous Neumann conditions.
    pub fn apply_laplacian(&self, f: &Field) -> Field {
        self.apply_symbol(f, |lam, _| lam)
    }

    /// Solve `(c0 I + c1 A_N) u = f` mode by mode.
    ///
    /// With `c0 == 0` the right-hand side must be mean-free and the
    /// returned solution is mean-free.
    pub fn solve_helmholtz(&self, c0: f64, c1: f64, f: &Field) -> Result<Field> {
        if c0 < 0.0 || c1 < 0.0 || !(c0 > 0.0 || c1 > 0.0) {
            return Err(Error::Singular(format!(
                "helmholtz coefficients must be nonnegative and not both zero (c0 = {c0}, c1 = {c1})"
            )));
        }
        let mut c = self.forward(f);
        if c0 == 0.0 {
            let mean = self.mean(f);
            let tol = 1e-12 * (1.0 + f.max_abs());
            if mean.abs() > tol {
                return Err(Error::Singular(format!(
                    "c0 = 0 requires a mean-free right-hand side, got <f> = {mean:e}"
                )));
            }
        }
        for (ck, &lam) in c.iter_mut().zip(&self.eigenvalues) {
            let d = c0 + c1 * lam;
            *ck = if d == 0.0 { 0.0 } else { *ck / d };
        }
        Ok(self.inverse(&c))
    }

    /// `A_N^{-1}` on mean-free fields (zero mode dropped).
    pub fn inverse_laplacian(&self, f: &Field) -> Field {
        self.apply_symbol(f, |lam, k| if k == 0 { 0.0 } else { 1.0 / lam })
    }

    /// Squared V' norm `||A_N^{-1/2}(psi - <psi>)||^2 + <psi>^2`.
    pub fn vprime_norm_sq(&self, f: &Field) -> f64 {
        let c = self.forward(f);
        let mean = c[0] / self.volume().sqrt();
        c.iter()
            .zip(&self.eigenvalues)
            .skip(1)
            .map(|(ck, lam)| ck * ck / lam)
            .sum::<f64>()
            + mean * mean
    }

    pub fn vprime_norm(&self, f: &Field) -> f64 {
        self.vprime_norm_sq(f).sqrt()
    }

    /// `||grad psi||^2` as the quadratic form of `A_N`.
    pub fn grad_norm_sq(&self, f: &Field) -> f64 {
        let c = self.forward(f);
        c.iter()
            .zip(&self.eigenvalues)
            .skip(1)
            .map(|(ck, lam)| lam * ck * ck)
            .sum()
    }

    /// Squared V norm `||grad psi||^2 + <psi>^2`.
    pub fn v_norm_sq(&self, f: &Field) -> f64 {
        let m = self.mean(f);
        self.grad_norm_sq(f) + m * m
    }

    pub fn v_norm(&self, f: &Field) -> f64 {
        self.v_norm_sq(f).sqrt()
    }
}
