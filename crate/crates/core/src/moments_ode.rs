//! Deterministic propagation of the closed first- and second-moment equations.
//!
//! The mean `⟨α⟩`, `⟨α²⟩` and `⟨α*α⟩` obey a linear system; the quadrature
//! combinations `⟨α±²⟩` obey their own decoupled equations and are carried
//! along as an independent consistency channel.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{Coefficients, Stability, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub t: f64,
    pub mean_alpha: Complex64,
    pub alpha_sq: Complex64,
    pub n_cl: f64,
    /// `⟨α₊²⟩`, integrated from its own rate equation.
    pub var_flow_plus: f64,
    /// `⟨α₋²⟩`, integrated from its own rate equation.
    pub var_flow_minus: f64,
}

impl MomentState {
    pub fn vacuum() -> Self {
        MomentState::from_initial(&InitialMoments::default())
    }

    pub fn from_initial(init: &InitialMoments) -> Self {
        MomentState {
            t: 0.0,
            mean_alpha: init.mean_alpha,
            alpha_sq: init.alpha_sq,
            n_cl: init.n_cl,
            var_flow_plus: 2.0 * init.alpha_sq.re + 2.0 * init.n_cl,
            var_flow_minus: 2.0 * init.alpha_sq.re - 2.0 * init.n_cl,
        }
    }

    /// `⟨α±²⟩ = 2 Re⟨α²⟩ ± 2⟨α*α⟩` from the main channel.
    pub fn reconstructed(&self) -> (f64, f64) {
        let re = 2.0 * self.alpha_sq.re;
        (re + 2.0 * self.n_cl, re - 2.0 * self.n_cl)
    }

    /// Largest gap between the two channels.
    pub fn channel_gap(&self) -> f64 {
        let (p, m) = self.reconstructed();
        (p - self.var_flow_plus).abs().max((m - self.var_flow_minus).abs())
    }

    fn to_vec(self) -> [f64; 7] {
        [
            self.mean_alpha.re,
            self.mean_alpha.im,
            self.alpha_sq.re,
            self.alpha_sq.im,
            self.n_cl,
            self.var_flow_plus,
            self.var_flow_minus,
        ]
    }

    fn from_vec(t: f64, y: &[f64; 7]) -> Self {
        MomentState {
            t,
            mean_alpha: Complex64::new(y[0], y[1]),
            alpha_sq: Complex64::new(y[2], y[3]),
            n_cl: y[4],
            var_flow_plus: y[5],
            var_flow_minus: y[6],
        }
    }
}

/// Gaussian initial moments; the default is the vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitialMoments {
    pub mean_alpha: Complex64,
    pub alpha_sq: Complex64,
    pub n_cl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions {
    pub initial: InitialMoments,
    /// Record every `stride`-th step (the final state is always recorded).
    pub stride: usize,
    /// Per-step tolerance on the step-halving error estimate and on the channel gap,
    /// relative to `1 + |state|`.
    pub tol: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            initial: InitialMoments::default(),
            stride: 1,
            tol: 1e-9,
        }
    }
}

/// Largest recommended step, `0.01 / max(λ₊, |λ₋|, 1)`.
pub fn max_step(p: &SystemParams) -> f64 {
    let c = p.coefficients();
    0.01 / c.lambda_plus.max(c.lambda_minus.abs()).max(1.0)
}

fn rhs(c: &Coefficients, y: &[f64; 7]) -> [f64; 7] {
    let g = c.relaxation();
    let k = c.coupling();
    let e2v = c.epsilon - 2.0 * c.v;
    [
        -g * y[0] + k * y[0],
        -g * y[1] - k * y[1],
        -2.0 * g * y[2] + 2.0 * k * y[4] + e2v,
        -2.0 * g * y[3],
        -2.0 * g * y[4] + 2.0 * k * y[2] + 2.0 * c.r,
        -2.0 * c.lambda_minus * y[5] + 2.0 * c.diffusion_plus(),
        -2.0 * c.lambda_plus * y[6] + 2.0 * c.diffusion_minus(),
    ]
}

fn rk4(c: &Coefficients, y: &[f64; 7], h: f64) -> [f64; 7] {
    let add = |a: &[f64; 7], b: &[f64; 7], s: f64| -> [f64; 7] { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = rhs(c, y);
    let k2 = rhs(c, &add(y, &k1, 0.5 * h));
    let k3 = rhs(c, &add(y, &k2, 0.5 * h));
    let k4 = rhs(c, &add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// RK4 from the vacuum to `t_end`, recording every step.
pub fn propagate(p: &SystemParams, t_end: f64, dt: f64) -> Result<Vec<MomentState>> {
    propagate_with(p, t_end, dt, &PropagateOptions::default())
}

pub fn propagate_with(p: &SystemParams, t_end: f64, dt: f64, opts: &PropagateOptions) -> Result<Vec<MomentState>> {
    p.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if opts.stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    let c = p.coefficients();
    let steps = (t_end / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };

    let start = MomentState::from_initial(&opts.initial);
    let mut out = vec![start];
    let mut y = start.to_vec();
    for i in 1..=steps {
        let full = rk4(&c, &y, h);
        let halves = rk4(&c, &rk4(&c, &y, 0.5 * h), 0.5 * h);
        let scale = 1.0 + full.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let estimate = full.iter().zip(&halves).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / 15.0;
        let t = i as f64 * h;
        if !(estimate <= opts.tol * scale) {
            return Err(Error::Accuracy { estimate, t });
        }
        y = full;
        let state = MomentState::from_vec(t, &y);
        let gap = state.channel_gap();
        if !(gap <= opts.tol * scale * (i as f64).sqrt().max(1.0)) {
            return Err(Error::Accuracy { estimate: gap, t });
        }
        if i % opts.stride == 0 || i == steps {
            out.push(state);
        }
    }
    Ok(out)
}

/// Stationary moments from the linear system with the time derivatives set to zero.
pub fn steady_from_linear_solve(p: &SystemParams) -> Result<MomentState> {
    p.validate()?;
    let c = p.coefficients();
    if p.stability() != Stability::Stable {
        return Err(Error::NotStable {
            lambda_minus: c.lambda_minus,
        });
    }
    let g = c.relaxation();
    let k = c.coupling();
    // Unknowns (Re⟨α²⟩, Im⟨α²⟩, ⟨α*α⟩).
    let m = Mat::<f64>::from_fn(3, 3, |i, j| match (i, j) {
        (0, 0) | (1, 1) | (2, 2) => -2.0 * g,
        (0, 2) | (2, 0) => 2.0 * k,
        _ => 0.0,
    });
    let mut b = Mat::<f64>::zeros(3, 1);
    b[(0, 0)] = -(c.epsilon - 2.0 * c.v);
    b[(2, 0)] = -2.0 * c.r;
    let x = m.partial_piv_lu().solve(&b);
    let (re, im, n) = (x[(0, 0)], x[(1, 0)], x[(2, 0)]);
    if !(re.is_finite() && n.is_finite()) {
        return Err(Error::NotStable {
            lambda_minus: c.lambda_minus,
        });
    }
    Ok(MomentState {
        t: f64::INFINITY,
        mean_alpha: Complex64::new(0.0, 0.0),
        alpha_sq: Complex64::new(re, im),
        n_cl: n,
        var_flow_plus: c.diffusion_plus() / c.lambda_minus,
        var_flow_minus: c.diffusion_minus() / c.lambda_plus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sp(a: f64, kappa: f64, beta: f64, epsilon: f64) -> SystemParams {
        SystemParams::new(a, kappa, beta, epsilon).unwrap()
    }

    #[test]
    fn vacuum_stays_vacuum() {
        let s = propagate(&sp(0.0, 0.8, 0.0, 0.0), 5.0, 0.01).unwrap();
        assert_eq!(s.len(), 501);
        for m in &s {
            assert_eq!(m.alpha_sq, Complex64::new(0.0, 0.0));
            assert_eq!(m.n_cl, 0.0);
            assert_eq!(m.var_flow_plus, 0.0);
            assert_eq!(m.var_flow_minus, 0.0);
        }
        let st = steady_from_linear_solve(&sp(0.0, 0.8, 0.0, 0.0)).unwrap();
        assert_eq!(st.n_cl, 0.0);
    }

    #[test]
    fn pure_dpa_steady() {
        let p = sp(0.0, 0.8, 0.0, 0.2);
        let st = steady_from_linear_solve(&p).unwrap();
        assert_relative_eq!(st.n_cl, 1.0 / 6.0, max_relative = 1e-14);
        let s = propagate_with(&p, 60.0, max_step(&p), &PropagateOptions { stride: 1000, ..Default::default() }).unwrap();
        assert_relative_eq!(s.last().unwrap().n_cl, 1.0 / 6.0, max_relative = 1e-9);
    }

    #[test]
    fn mean_stays_zero_from_vacuum() {
        let p = sp(25.0, 0.8, 0.1, 0.3);
        let s = propagate(&p, 2.0, max_step(&p)).unwrap();
        assert!(s.iter().all(|m| m.mean_alpha == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn mean_follows_quadrature_rates() {
        let p = sp(25.0, 0.8, 0.1, 0.3);
        let c = p.coefficients();
        let init = InitialMoments {
            mean_alpha: Complex64::new(1.0, 0.5),
            ..Default::default()
        };
        let t = 1.5;
        let s = propagate_with(&p, t, max_step(&p), &PropagateOptions { initial: init, ..Default::default() }).unwrap();
        let m = s.last().unwrap().mean_alpha;
        assert_relative_eq!(m.re, (-c.lambda_minus * t).exp(), max_relative = 1e-10);
        assert_relative_eq!(m.im, 0.5 * (-c.lambda_plus * t).exp(), max_relative = 1e-8);
    }

    #[test]
    fn transient_matches_closed_form() {
        let p = sp(25.0, 0.8, 0.1, 0.0).at_threshold_fraction(0.9).unwrap();
        let c = p.coefficients();
        let t_end = 5.0 / c.lambda_minus;
        let s = propagate_with(&p, t_end, max_step(&p), &PropagateOptions { stride: 500, ..Default::default() }).unwrap();
        for m in &s {
            let r = analytic::transient_moments(&p, m.t).unwrap();
            assert!((m.n_cl - r.n_cl).abs() <= 1e-8 * r.n_cl.max(1.0), "t {} {} {}", m.t, m.n_cl, r.n_cl);
            assert!((m.alpha_sq.re - r.alpha_sq).abs() <= 1e-8 * r.n_cl.max(1.0));
            assert!(m.channel_gap() <= 1e-8 * r.n_cl.max(1.0));
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let p = sp(25.0, 0.8, 0.1, 0.3);
        let r = propagate(&p, 10.0, 0.5);
        assert!(matches!(r, Err(Error::Accuracy { .. })), "{r:?}");
    }

    #[test]
    fn unstable_has_no_steady_state_but_propagates() {
        let p = sp(0.0, 0.8, 0.0, 0.6);
        assert!(matches!(steady_from_linear_solve(&p), Err(Error::NotStable { .. })));
        let s = propagate(&p, 1.0, max_step(&p)).unwrap();
        assert!(s.last().unwrap().n_cl > 0.0);
        let at = sp(0.0, 0.8, 0.0, 0.4);
        assert!(steady_from_linear_solve(&at).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn linear_solve_matches_long_time_limit(
            a in 0.0..100.0f64, k in 0.2..2.0f64, b in 0.0..1.0f64, f in 0.0..0.6f64
        ) {
            let p = sp(a, k, b, 0.0).at_threshold_fraction(f).unwrap();
            let c = p.coefficients();
            let st = steady_from_linear_solve(&p).unwrap();
            let t_end = 40.0 / c.lambda_minus;
            let dt = max_step(&p).max(t_end / 2e5);
            let s = propagate_with(&p, t_end, dt, &PropagateOptions { stride: usize::MAX, ..Default::default() }).unwrap();
            let last = s.last().unwrap();
            let scale = st.n_cl.abs().max(1e-3);
            prop_assert!((last.n_cl - st.n_cl).abs() <= 1e-10 * scale.max(1.0), "{} {}", last.n_cl, st.n_cl);
            prop_assert!((last.alpha_sq.re - st.alpha_sq.re).abs() <= 1e-10 * scale.max(1.0));
            let (vp, vm) = analytic::steady_alpha_sq(&c).unwrap();
            prop_assert!((last.var_flow_plus - vp).abs() <= 1e-8 * vp.abs().max(1.0));
            prop_assert!((last.var_flow_minus - vm).abs() <= 1e-8 * vm.abs().max(1.0));
        }
    }
}
