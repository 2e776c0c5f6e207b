//! Stationary states of the truncated generator by sparse direct solve.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use super::frame::{FrameState, SqueezedFrame};
use super::generator::{apply_generator_in_frame, stencil, suggested_dim, GeneratorTerms};
use super::{DensityMatrix, BOUNDARY_TOL, STEADY_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Index map for the real symmetric, even-offset block the steady state lives in.
///
/// The generator has real coefficients and only couples `(m, n)` to entries
/// with the same parity of `m − n`. The vacuum-connected stationary state
/// therefore only needs `m ≥ n` with `m − n` even.
struct EvenSymmetricIndex {
    dim: usize,
    /// Row-major over the lower triangle; `usize::MAX` marks unused slots.
    slot: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl EvenSymmetricIndex {
    fn new(dim: usize) -> Self {
        let mut slot = vec![usize::MAX; dim * dim];
        let mut pairs = Vec::new();
        for m in 0..dim {
            for n in (0..=m).rev().step_by(2) {
                slot[m * dim + n] = pairs.len();
                pairs.push((m, n));
            }
        }
        EvenSymmetricIndex { dim, slot, pairs }
    }

    fn get(&self, m: usize, n: usize) -> usize {
        let (hi, lo) = if m >= n { (m, n) } else { (n, m) };
        self.slot[hi * self.dim + lo]
    }
}

/// Solves `L ρ = 0` with the `⟨0|ρ|0⟩` equation replaced by `ρ₀₀ = 1`, then
/// normalises the trace. No acceptance checks.
fn solve_raw(p: &SystemParams, dim: usize, frame: SqueezedFrame) -> Result<DensityMatrix> {
    let terms = GeneratorTerms::in_frame(&p.coefficients(), frame);
    let idx = EvenSymmetricIndex::new(dim);
    let n_unknowns = idx.pairs.len();

    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(9 * n_unknowns);
    for (row, &(m, n)) in idx.pairs.iter().enumerate() {
        if row == 0 {
            triplets.push(Triplet::new(0, 0, 1.0));
            continue;
        }
        let (st, len) = stencil(&terms, dim, m, n);
        for e in &st[..len] {
            if e.weight == 0.0 {
                continue;
            }
            let mm = (m as isize + e.dm) as usize;
            let nn = (n as isize + e.dn) as usize;
            triplets.push(Triplet::new(row, idx.get(mm, nn), e.weight));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n_unknowns, n_unknowns, &triplets)
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    drop(triplets);
    let lu = mat.sp_lu().map_err(|e| Error::Solver(format!("{e:?}")))?;
    let mut rhs = Mat::<f64>::zeros(n_unknowns, 1);
    rhs[(0, 0)] = 1.0;
    let x = lu.solve(&rhs);

    let mut rho = DensityMatrix::zeros(dim);
    for (k, &(m, n)) in idx.pairs.iter().enumerate() {
        let z = Complex64::new(x[(k, 0)], 0.0);
        rho[(m, n)] = z;
        rho[(n, m)] = z;
    }
    let tr = rho.trace().re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Solver(format!("steady state has trace {tr}")));
    }
    rho.scale(1.0 / tr);
    Ok(rho)
}

fn check(p: &SystemParams, rho: &DensityMatrix, frame: SqueezedFrame) -> Result<()> {
    let dim = rho.dim();
    let boundary = rho[(dim - 1, dim - 1)].re;
    if boundary > BOUNDARY_TOL {
        return Err(Error::TruncationTooSmall {
            dim,
            boundary,
            suggested: suggested_dim(dim),
        });
    }
    let residual = apply_generator_in_frame(rho, &p.coefficients(), frame).norm_l1() / rho.norm_l1();
    if !(residual < STEADY_RESIDUAL_TOL) {
        return Err(Error::NotConverged { residual });
    }
    Ok(())
}

fn validate(p: &SystemParams, dim: usize) -> Result<()> {
    p.validate()?;
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("dim must be >= 2, got {dim}")));
    }
    p.require_stable()?;
    Ok(())
}

/// Stationary state in the ordinary Fock basis.
///
/// Solves `L ρ = 0` directly with a sparse LU factorisation, then checks the
/// residual `‖dρ/dt‖₁ < 1e-10 ‖ρ‖₁` and the boundary-population guard.
pub fn steady_state(p: &SystemParams, dim: usize) -> Result<DensityMatrix> {
    Ok(steady_state_in_frame(p, dim, SqueezedFrame::IDENTITY)?.rho)
}

/// Stationary state truncated in the given squeezed basis.
pub fn steady_state_in_frame(p: &SystemParams, dim: usize, frame: SqueezedFrame) -> Result<FrameState> {
    validate(p, dim)?;
    let rho = solve_raw(p, dim, frame)?;
    check(p, &rho, frame)?;
    Ok(FrameState { rho, frame })
}

/// Stationary state in a squeezed basis chosen self-consistently.
///
/// Starting from the Fock basis, the frame is moved to the one that balances
/// the quadrature variances of the current solution until it stops changing.
pub fn steady_state_adaptive(p: &SystemParams, dim: usize) -> Result<FrameState> {
    validate(p, dim)?;
    let mut frame = SqueezedFrame::IDENTITY;
    for _ in 0..20 {
        let rho = solve_raw(p, dim, frame)?;
        let obs = FrameState { rho, frame }.observables();
        let next = match SqueezedFrame::balancing(obs.var_plus, obs.var_minus) {
            Ok(f) => f,
            Err(_) => break,
        };
        let moved = (next.r() - frame.r()).abs();
        frame = next;
        if moved < 1e-4 {
            break;
        }
    }
    steady_state_in_frame(p, dim, frame)
}
