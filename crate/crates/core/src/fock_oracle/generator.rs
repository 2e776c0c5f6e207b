//! The master-equation generator as a nine-point stencil on `ρ[m][n]`, and
//! fixed-step integration.

use num_complex::Complex64;

use super::frame::SqueezedFrame;
use super::{DensityMatrix, BOUNDARY_TOL, TRACE_TOL};
use crate::error::{Error, Result};
use crate::params::{Coefficients, SystemParams};

/// Weights of every quadratic superoperator term in the truncated basis.
///
/// `left_*` act as `X ρ`, `right_*` as `ρ X`, the rest are sandwiches
/// named `x_rho_y` for `X ρ Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GeneratorTerms {
    left_a2: f64,
    left_ad2: f64,
    left_aad: f64,
    left_ada: f64,
    right_a2: f64,
    right_ad2: f64,
    right_aad: f64,
    right_ada: f64,
    ad_rho_a: f64,
    a_rho_ad: f64,
    ad_rho_ad: f64,
    a_rho_a: f64,
}

impl GeneratorTerms {
    /// The master equation written directly in the ladder operators.
    pub(crate) fn literal(c: &Coefficients) -> Self {
        let e = c.epsilon;
        GeneratorTerms {
            left_a2: -0.5 * e - c.u,
            left_ad2: 0.5 * e - c.v,
            left_aad: -c.r,
            left_ada: -c.s,
            right_a2: 0.5 * e - c.v,
            right_ad2: -0.5 * e - c.u,
            right_aad: -c.r,
            right_ada: -c.s,
            ad_rho_a: 2.0 * c.r,
            a_rho_ad: 2.0 * c.s,
            ad_rho_ad: c.u + c.v,
            a_rho_a: c.u + c.v,
        }
    }

    /// The same generator acting on `S† ρ S`, i.e. with `a` replaced by
    /// `a cosh r − a† sinh r` before truncation.
    pub(crate) fn in_frame(c: &Coefficients, frame: SqueezedFrame) -> Self {
        let lit = Self::literal(c);
        if frame.r() == 0.0 {
            return lit;
        }
        let (mu, nu) = frame.mu_nu();
        let (mm, nn, mn) = (mu * mu, nu * nu, mu * nu);
        let mut t = GeneratorTerms::zero();

        // One-sided products: [a², a†², aa†, a†a] expansions of b², b†², bb†, b†b.
        let expand = |w: [f64; 4]| -> [f64; 4] {
            let [b2, bd2, bbd, bdb] = w;
            [
                mm * b2 + nn * bd2 - mn * (bbd + bdb),
                nn * b2 + mm * bd2 - mn * (bbd + bdb),
                -mn * (b2 + bd2) + mm * bbd + nn * bdb,
                -mn * (b2 + bd2) + nn * bbd + mm * bdb,
            ]
        };
        let l = expand([lit.left_a2, lit.left_ad2, lit.left_aad, lit.left_ada]);
        let r = expand([lit.right_a2, lit.right_ad2, lit.right_aad, lit.right_ada]);
        t.left_a2 = l[0];
        t.left_ad2 = l[1];
        t.left_aad = l[2];
        t.left_ada = l[3];
        t.right_a2 = r[0];
        t.right_ad2 = r[1];
        t.right_aad = r[2];
        t.right_ada = r[3];

        // Sandwiches b†ρb, bρb†, b†ρb†, bρb.
        let (w1, w2, w3, w4) = (lit.ad_rho_a, lit.a_rho_ad, lit.ad_rho_ad, lit.a_rho_a);
        t.ad_rho_a = mm * w1 + nn * w2 - mn * (w3 + w4);
        t.a_rho_ad = nn * w1 + mm * w2 - mn * (w3 + w4);
        t.ad_rho_ad = -mn * (w1 + w2) + mm * w3 + nn * w4;
        t.a_rho_a = -mn * (w1 + w2) + nn * w3 + mm * w4;
        t
    }

    fn zero() -> Self {
        GeneratorTerms {
            left_a2: 0.0,
            left_ad2: 0.0,
            left_aad: 0.0,
            left_ada: 0.0,
            right_a2: 0.0,
            right_ad2: 0.0,
            right_aad: 0.0,
            right_ada: 0.0,
            ad_rho_a: 0.0,
            a_rho_ad: 0.0,
            ad_rho_ad: 0.0,
            a_rho_a: 0.0,
        }
    }
}

/// One term of the generator: `out[m][n] += weight * ρ[m + dm][n + dn]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StencilEntry {
    pub dm: isize,
    pub dn: isize,
    pub weight: f64,
}

/// Generator stencil at `(m, n)` for a `dim`-level truncation.
///
/// Returns at most nine entries; out-of-range neighbours are already dropped.
pub(crate) fn stencil(t: &GeneratorTerms, dim: usize, m: usize, n: usize) -> ([StencilEntry; 9], usize) {
    let (mf, nf) = (m as f64, n as f64);
    let sq = f64::sqrt;
    let top = |k: usize| k + 1 < dim;
    let mut out = [StencilEntry {
        dm: 0,
        dn: 0,
        weight: 0.0,
    }; 9];
    let mut len = 0;
    let mut push = |dm: isize, dn: isize, w: f64| {
        out[len] = StencilEntry { dm, dn, weight: w };
        len += 1;
    };

    // aa† is diag(k + 1) except on the last level, where it vanishes.
    let aad = |k: usize, kf: f64| if top(k) { kf + 1.0 } else { 0.0 };
    let diag = t.left_aad * aad(m, mf) + t.left_ada * mf + t.right_aad * aad(n, nf) + t.right_ada * nf;
    push(0, 0, diag);

    if m >= 1 && n >= 1 {
        push(-1, -1, t.ad_rho_a * sq(mf * nf));
    }
    if top(m) && top(n) {
        push(1, 1, t.a_rho_ad * sq((mf + 1.0) * (nf + 1.0)));
    }
    if m >= 1 && top(n) {
        push(-1, 1, t.ad_rho_ad * sq(mf * (nf + 1.0)));
    }
    if top(m) && n >= 1 {
        push(1, -1, t.a_rho_a * sq((mf + 1.0) * nf));
    }
    if m + 2 < dim {
        push(2, 0, t.left_a2 * sq((mf + 1.0) * (mf + 2.0)));
    }
    if m >= 2 {
        push(-2, 0, t.left_ad2 * sq(mf * (mf - 1.0)));
    }
    if n >= 2 {
        push(0, -2, t.right_a2 * sq(nf * (nf - 1.0)));
    }
    if n + 2 < dim {
        push(0, 2, t.right_ad2 * sq((nf + 1.0) * (nf + 2.0)));
    }
    (out, len)
}

/// Right-hand side of the master equation.
pub fn apply_generator(rho: &DensityMatrix, c: &Coefficients) -> DensityMatrix {
    apply_generator_in_frame(rho, c, SqueezedFrame::IDENTITY)
}

/// Right-hand side of the master equation for a state stored in `frame`.
pub fn apply_generator_in_frame(rho: &DensityMatrix, c: &Coefficients, frame: SqueezedFrame) -> DensityMatrix {
    let mut out = DensityMatrix::zeros(rho.dim());
    apply_terms_into(rho, &GeneratorTerms::in_frame(c, frame), &mut out);
    out
}

pub(crate) fn apply_terms_into(rho: &DensityMatrix, t: &GeneratorTerms, out: &mut DensityMatrix) {
    let d = rho.dim();
    let src = rho.as_slice();
    let dst = out.as_mut_slice();
    for m in 0..d {
        for n in 0..d {
            let (st, len) = stencil(t, d, m, n);
            let mut acc = Complex64::new(0.0, 0.0);
            for e in &st[..len] {
                let mm = (m as isize + e.dm) as usize;
                let nn = (n as isize + e.dn) as usize;
                acc += src[mm * d + nn] * e.weight;
            }
            dst[m * d + n] = acc;
        }
    }
}

/// Final state and bookkeeping of a time integration.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub rho: DensityMatrix,
    pub t: f64,
    pub steps: usize,
    /// Largest `|Tr ρ − 1|` seen along the way.
    pub trace_err: f64,
    /// Largest `ρ[N-1][N-1]` seen along the way.
    pub boundary_population: f64,
}

pub(crate) fn suggested_dim(dim: usize) -> usize {
    2 * dim
}

/// Maximum step allowed by [`evolve`].
pub fn max_step(p: &SystemParams) -> f64 {
    let c = p.coefficients();
    0.01 / c.lambda_plus.max(p.kappa).max(p.a)
}

/// Classical RK4 propagation of `rho0` to `t_end` with fixed step `dt`.
///
/// The state is hermitized after every step.
pub fn evolve(rho0: &DensityMatrix, p: &SystemParams, t_end: f64, dt: f64) -> Result<Evolution> {
    evolve_observed(rho0, p, SqueezedFrame::IDENTITY, t_end, dt, |_, _| {})
}

/// [`evolve`] for a state stored in `frame`.
pub fn evolve_in_frame(
    rho0: &DensityMatrix,
    p: &SystemParams,
    frame: SqueezedFrame,
    t_end: f64,
    dt: f64,
) -> Result<Evolution> {
    evolve_observed(rho0, p, frame, t_end, dt, |_, _| {})
}

/// [`evolve_in_frame`] with a callback `observe(t, ρ)` invoked at `t = 0` and after every step.
pub fn evolve_observed<F>(
    rho0: &DensityMatrix,
    p: &SystemParams,
    frame: SqueezedFrame,
    t_end: f64,
    dt: f64,
    mut observe: F,
) -> Result<Evolution>
where
    F: FnMut(f64, &DensityMatrix),
{
    p.validate()?;
    let d = rho0.dim();
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dim must be >= 2, got {d}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
    }
    if !(dt > 0.0) || dt > max_step(p) * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "dt must lie in (0, {}], got {dt}",
            max_step(p)
        )));
    }
    let terms = GeneratorTerms::in_frame(&p.coefficients(), frame);
    let steps = (t_end / dt).round() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };

    let mut rho = rho0.clone();
    let mut k1 = DensityMatrix::zeros(d);
    let mut k2 = DensityMatrix::zeros(d);
    let mut k3 = DensityMatrix::zeros(d);
    let mut k4 = DensityMatrix::zeros(d);
    let mut tmp = DensityMatrix::zeros(d);
    let mut trace_err = (rho.trace().re - 1.0).abs();
    let mut boundary = rho[(d - 1, d - 1)].re;
    observe(0.0, &rho);

    for step in 1..=steps {
        apply_terms_into(&rho, &terms, &mut k1);
        tmp.assign_axpy(&rho, 0.5 * h, &k1);
        apply_terms_into(&tmp, &terms, &mut k2);
        tmp.assign_axpy(&rho, 0.5 * h, &k2);
        apply_terms_into(&tmp, &terms, &mut k3);
        tmp.assign_axpy(&rho, h, &k3);
        apply_terms_into(&tmp, &terms, &mut k4);
        {
            let (r, a, b, c, e) = (
                rho.as_mut_slice(),
                k1.as_slice(),
                k2.as_slice(),
                k3.as_slice(),
                k4.as_slice(),
            );
            for i in 0..r.len() {
                r[i] += (a[i] + 2.0 * b[i] + 2.0 * c[i] + e[i]) * (h / 6.0);
            }
        }
        rho.hermitize();

        let t = step as f64 * h;
        trace_err = trace_err.max((rho.trace().re - 1.0).abs());
        boundary = boundary.max(rho[(d - 1, d - 1)].re);
        if !trace_err.is_finite() || trace_err > TRACE_TOL {
            return Err(Error::StepTooLarge { trace_err, t });
        }
        if boundary > BOUNDARY_TOL {
            return Err(Error::TruncationTooSmall {
                dim: d,
                boundary,
                suggested: suggested_dim(d),
            });
        }
        observe(t, &rho);
    }
    Ok(Evolution {
        rho,
        t: t_end,
        steps,
        trace_err,
        boundary_population: boundary,
    })
}

/// Integrates from `rho0` until `‖dρ/dt‖₁ < tol · ‖ρ‖₁`, or fails after `max_time`.
pub fn relax(rho0: &DensityMatrix, p: &SystemParams, dt: f64, max_time: f64, tol: f64) -> Result<Evolution> {
    let c = p.coefficients();
    let chunk = (1.0 / p.kappa).max(dt);
    let mut state = Evolution {
        rho: rho0.clone(),
        t: 0.0,
        steps: 0,
        trace_err: 0.0,
        boundary_population: 0.0,
    };
    loop {
        let residual = apply_generator(&state.rho, &c).norm_l1() / state.rho.norm_l1();
        if residual < tol {
            return Ok(state);
        }
        if state.t >= max_time {
            return Err(Error::NotConverged { residual });
        }
        let next = evolve(&state.rho, p, chunk, dt)?;
        state = Evolution {
            t: state.t + next.t,
            steps: state.steps + next.steps,
            trace_err: state.trace_err.max(next.trace_err),
            boundary_population: state.boundary_population.max(next.boundary_population),
            rho: next.rho,
        };
    }
}
