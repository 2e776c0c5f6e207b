//! Truncated-Fock integration of the cavity-mode master equation.
//!
//! The generator is
//!
//! ```text
//! dρ/dt = ε/2 (ρa² − a²ρ + a†²ρ − ρa†²)
//!       + R (2a†ρa − aa†ρ − ρaa†)
//!       + S (2aρa† − a†aρ − ρa†a)
//!       + U (a†ρa† + aρa − ρa†² − a²ρ)
//!       + V (a†ρa† + aρa − ρa² − a†²ρ)
//! ```
//!
//! with `a`, `a†` the ladder operators truncated to `dim` levels. Every
//! operator product is taken between truncated matrices, so the top level
//! behaves exactly as a literal `dim × dim` matrix implementation would.
//!
//! This module is the brute-force reference. It never uses the Gaussian
//! structure of the state. Strongly squeezed states can be stored in a
//! squeezed number basis (see [`SqueezedFrame`]), which is an exact change of
//! basis before truncation.

mod frame;
mod generator;
mod steady;

use faer::{c64, Mat};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use frame::{FrameState, SqueezedFrame};
pub use generator::{
    apply_generator, apply_generator_in_frame, evolve, evolve_in_frame, evolve_observed, max_step, relax,
    Evolution,
};
pub use steady::{steady_state, steady_state_adaptive, steady_state_in_frame};

/// Population allowed in the last Fock level before the truncation is rejected.
pub const BOUNDARY_TOL: f64 = 1e-6;
/// Trace drift tolerated during time stepping.
pub const TRACE_TOL: f64 = 1e-4;
/// Relative residual `‖dρ/dt‖₁ / ‖ρ‖₁` required of a steady state.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    /// Row-major `ρ[m][n] = ⟨m|ρ|n⟩`.
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        DensityMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut rho = Self::zeros(dim);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        rho
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut rho = Self::zeros(diag.len());
        for (n, &p) in diag.iter().enumerate() {
            rho[(n, n)] = Complex64::new(p, 0.0);
        }
        rho
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for dim {dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(DensityMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|n| self[(n, n)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|n| self[(n, n)].re).collect()
    }

    /// Entrywise 1-norm.
    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }

    /// Largest `|ρ − ρ†|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..self.dim {
            for n in m..self.dim {
                worst = worst.max((self[(m, n)] - self[(n, m)].conj()).norm());
            }
        }
        worst
    }

    /// Replaces `ρ` with `(ρ + ρ†)/2`.
    pub fn hermitize(&mut self) {
        let d = self.dim;
        for m in 0..d {
            let diag = self.data[m * d + m];
            self.data[m * d + m] = Complex64::new(diag.re, 0.0);
            for n in (m + 1)..d {
                let avg = 0.5 * (self.data[m * d + n] + self.data[n * d + m].conj());
                self.data[m * d + n] = avg;
                self.data[n * d + m] = avg.conj();
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for z in &mut self.data {
            *z *= k;
        }
    }

    /// `self = x + k y`.
    pub(crate) fn assign_axpy(&mut self, x: &DensityMatrix, k: f64, y: &DensityMatrix) {
        for ((z, a), b) in self.data.iter_mut().zip(&x.data).zip(&y.data) {
            *z = a + b * k;
        }
    }

    /// `Tr(X ρ)` for a dense row-major operator `X`.
    fn expect_dense(&self, op: &[Complex64]) -> Complex64 {
        let d = self.dim;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += op[i * d + j] * self.data[j * d + i];
            }
        }
        acc
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim;
        let m = Mat::<c64>::from_fn(d, d, |i, j| {
            let z = 0.5 * (self[(i, j)] + self[(j, i)].conj());
            c64::new(z.re, z.im)
        });
        let eig = m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

impl std::ops::Index<(usize, usize)> for DensityMatrix {
    type Output = Complex64;
    fn index(&self, (m, n): (usize, usize)) -> &Complex64 {
        &self.data[m * self.dim + n]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DensityMatrix {
    fn index_mut(&mut self, (m, n): (usize, usize)) -> &mut Complex64 {
        &mut self.data[m * self.dim + n]
    }
}

/// Moments and quadrature statistics of a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleObservables {
    pub mean_a: Complex64,
    pub mean_a_sq: Complex64,
    pub mean_n: f64,
    /// Variance of `a† + a` (vacuum = 1).
    pub var_plus: f64,
    /// Variance of `i(a† − a)` (vacuum = 1).
    pub var_minus: f64,
    /// Diagonal `P(n)`.
    pub pnd: Vec<f64>,
    pub trace_err: f64,
    /// Filled by [`observables_with_positivity`].
    pub min_eig: Option<f64>,
}

pub fn observables(rho: &DensityMatrix) -> OracleObservables {
    let d = rho.dim;
    let mut mean_a = Complex64::new(0.0, 0.0);
    let mut mean_a_sq = Complex64::new(0.0, 0.0);
    let mut mean_n = 0.0;
    for n in 0..d {
        let nf = n as f64;
        // Tr(a ρ) = Σ √n ρ[n][n-1]
        if n >= 1 {
            mean_a += rho[(n, n - 1)] * nf.sqrt();
        }
        if n >= 2 {
            mean_a_sq += rho[(n, n - 2)] * (nf * (nf - 1.0)).sqrt();
        }
        mean_n += nf * rho[(n, n)].re;
    }
    let x = 2.0 * mean_a.re; // ⟨a + a†⟩
    let y = 2.0 * mean_a.im; // ⟨i(a† − a)⟩
    let tr = rho.trace().re;
    OracleObservables {
        mean_a,
        mean_a_sq,
        mean_n,
        var_plus: tr + 2.0 * mean_n + 2.0 * mean_a_sq.re - x * x,
        var_minus: tr + 2.0 * mean_n - 2.0 * mean_a_sq.re - y * y,
        pnd: rho.diagonal(),
        trace_err: (tr - 1.0).abs(),
        min_eig: None,
    }
}

/// [`observables`] plus the smallest eigenvalue of `ρ`.
pub fn observables_with_positivity(rho: &DensityMatrix) -> Result<OracleObservables> {
    let mut obs = observables(rho);
    obs.min_eig = Some(rho.min_eigenvalue()?);
    Ok(obs)
}

/// Husimi function `⟨α|ρ|α⟩/π` using the first `dim` coherent-state amplitudes.
pub fn husimi(rho: &DensityMatrix, alpha: Complex64) -> f64 {
    let d = rho.dim;
    let coh = coherent_amplitudes(alpha, d);
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..d {
        let mut row = Complex64::new(0.0, 0.0);
        for n in 0..d {
            row += rho[(m, n)] * coh[n];
        }
        acc += coh[m].conj() * row;
    }
    acc.re / std::f64::consts::PI
}

/// `⟨n|α⟩` for `n < len`.
pub(crate) fn coherent_amplitudes(alpha: Complex64, len: usize) -> Vec<Complex64> {
    let mut coh = Vec::with_capacity(len);
    let mut amp = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..len {
        if n > 0 {
            amp = amp * alpha / (n as f64).sqrt();
        }
        coh.push(amp);
    }
    coh
}

/// Dense ladder operators, used to evaluate operator expectations literally.
pub mod ladder {
    use num_complex::Complex64;

    /// Row-major truncated annihilation operator.
    pub fn annihilation(dim: usize) -> Vec<Complex64> {
        let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
        for n in 1..dim {
            a[(n - 1) * dim + n] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn dagger(x: &[Complex64], dim: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                out[j * dim + i] = x[i * dim + j].conj();
            }
        }
        out
    }

    pub fn matmul(x: &[Complex64], y: &[Complex64], dim: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                let xik = x[i * dim + k];
                if xik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..dim {
                    out[i * dim + j] += xik * y[k * dim + j];
                }
            }
        }
        out
    }
}

/// `Tr(X ρ)` for a dense row-major operator.
pub fn expectation(rho: &DensityMatrix, op: &[Complex64]) -> Complex64 {
    rho.expect_dense(op)
}

#[cfg(test)]
mod tests;
