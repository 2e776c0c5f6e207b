use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;

fn sp(a: f64, kappa: f64, beta: f64, epsilon: f64) -> SystemParams {
    SystemParams::new(a, kappa, beta, epsilon).unwrap()
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-300)
}

#[test]
fn steady_alpha_sq_pure_dpa() {
    let (p, m) = steady_alpha_sq(&sp(0.0, 0.8, 0.0, 0.0).coefficients()).unwrap();
    assert_eq!((p, m), (0.0, 0.0));
    let (p, m) = steady_alpha_sq(&sp(0.0, 0.8, 0.0, 0.2).coefficients()).unwrap();
    assert_relative_eq!(p, 1.0, max_relative = 1e-14);
    assert_relative_eq!(m, 1.0 / 3.0, max_relative = 1e-14);
}

#[test]
fn steady_alpha_sq_rejects_unstable() {
    let p = sp(0.0, 0.8, 0.0, 0.5);
    assert!(matches!(steady_alpha_sq(&p.coefficients()), Err(Error::NotStable { .. })));
}

#[test]
fn laser_only_variances() {
    let v = variance_steady(&sp(100.0, 0.8, 0.0, 0.0)).unwrap();
    assert_relative_eq!(v.plus.value(), 251.0, max_relative = 1e-12);
    assert_eq!(v.minus, 1.0);
}

#[test]
fn dpa_variances_and_threshold() {
    let v = variance_dpa(0.8, 0.3).unwrap();
    assert_relative_eq!(v.plus.value(), 0.8 / 0.2, max_relative = 1e-12);
    assert_relative_eq!(v.minus, 0.8 / 1.4, max_relative = 1e-12);
    let v = variance_dpa(0.8, 0.4).unwrap();
    assert!(v.plus.is_infinite());
    assert_relative_eq!(v.minus, 0.5, max_relative = 1e-12);
    assert!(matches!(variance_dpa(0.8, 0.41), Err(Error::NotStable { .. })));
}

#[test]
fn threshold_minus_examples() {
    for a in [0.0, 1.0, 100.0] {
        assert_relative_eq!(variance_threshold(&sp(a, 0.8, 0.0, 0.0)).unwrap().minus, 0.5, max_relative = 1e-14);
    }
    for beta in [0.0, 0.3, 1.7] {
        assert_relative_eq!(variance_threshold(&sp(0.0, 0.8, beta, 0.0)).unwrap().minus, 0.5, max_relative = 1e-14);
    }
    let v = variance_threshold(&sp(100.0, 0.8, 0.067, 0.0)).unwrap();
    assert!((v.minus - 0.068).abs() < 0.002, "{}", v.minus);
}

#[test]
fn variance_steady_at_threshold_reports_infinite_plus() {
    let p = sp(25.0, 0.8, 0.1, 0.0);
    let p = p.with_epsilon(p.threshold_epsilon());
    let v = variance_steady(&p).unwrap();
    assert!(v.plus.is_infinite());
    assert_eq!(v.minus, variance_threshold(&p).unwrap().minus);
    let above = p.with_epsilon(p.threshold_epsilon() * 1.01);
    assert!(matches!(variance_steady(&above), Err(Error::NotStable { .. })));
}

#[test]
fn no_crystal_limits() {
    let v = variance_no_crystal(&sp(100.0, 0.8, 0.0, 0.7)).unwrap();
    assert_relative_eq!(v.plus.value(), 251.0, max_relative = 1e-12);
    assert_eq!(v.minus, 1.0);

    let v = variance_no_crystal(&sp(100.0, 0.8, 1000.0, 0.0)).unwrap();
    let lim = variance_strong_pump(100.0, 0.8, 1000.0).unwrap();
    assert_relative_eq!(lim.plus.value(), 0.8 / 0.6, max_relative = 1e-12);
    assert_relative_eq!(lim.minus, 0.8 / 1.0, max_relative = 1e-12);
    assert!(rel(v.plus.value(), lim.plus.value()) < 0.01);
    assert!(rel(v.minus, lim.minus) < 0.01);
    assert!(variance_no_crystal(&sp(100.0, 0.8, 100.0, 0.0)).is_err());
    assert!(variance_strong_pump(100.0, 0.8, 100.0).is_err());
    for beta in [300.0, 1000.0, 3000.0] {
        let v = variance_no_crystal(&sp(100.0, 0.8, beta, 0.0)).unwrap();
        let lim = variance_strong_pump(100.0, 0.8, beta).unwrap();
        assert!(rel(v.plus.value(), lim.plus.value()) < 0.05);
        assert!(rel(v.minus, lim.minus) < 0.05);
    }
}

#[test]
fn no_crystal_strong_drive_is_unstable() {
    // 2kB + A(2b - b^3) < 0 for b = 1.5 at large A.
    assert!(matches!(variance_no_crystal(&sp(100.0, 0.8, 1.5, 0.0)), Err(Error::NotStable { .. })));
}

#[test]
fn headline_minimum() {
    let m = minimize_minus_variance(100.0, 0.8, MinimizeMode::Threshold).unwrap();
    assert!((m.beta - 0.067).abs() < 0.005, "{m:?}");
    assert!((m.minus - 0.068).abs() < 0.002, "{m:?}");
    // No grid point does better.
    for i in 0..=2000 {
        let beta = i as f64 * 1e-3;
        let v = variance_threshold(&sp(100.0, 0.8, beta, 0.0)).unwrap().minus;
        assert!(v >= m.minus - 1e-15);
    }
}

#[test]
fn flat_minimum_ties_to_zero() {
    let m = minimize_minus_variance(0.0, 0.8, MinimizeMode::Threshold).unwrap();
    assert_eq!(m.beta, 0.0);
    assert_relative_eq!(m.minus, 0.5, max_relative = 1e-14);
}

#[test]
fn larger_gain_squeezes_more() {
    let m100 = minimize_minus_variance(100.0, 0.8, MinimizeMode::Threshold).unwrap();
    let m1000 = minimize_minus_variance(1000.0, 0.8, MinimizeMode::Threshold).unwrap();
    assert!(m1000.minus < m100.minus);
    let nc = minimize_minus_variance(100.0, 0.8, MinimizeMode::NoCrystal).unwrap();
    assert!(nc.beta > 0.0 && nc.beta < 0.2, "{nc:?}");
    assert!(nc.minus > m100.minus);
}

#[test]
fn threshold_spectrum_examples() {
    for a in [1.0, 25.0, 100.0] {
        for k in [0.4, 0.8, 1.6] {
            let p = sp(a, k, 0.0, 0.0);
            let p = p.with_epsilon(p.threshold_epsilon());
            assert!(spectrum_minus(&p, 0.0).unwrap().abs() < 1e-12);
            assert!(spectrum_minus_threshold(&p, 0.0).abs() < 1e-12);
            assert_relative_eq!(spectrum_minus(&p, k).unwrap(), 0.5, max_relative = 1e-12);
            assert!(spectrum_plus(&p, 0.0).unwrap().is_infinite());
        }
    }
}

#[test]
fn threshold_spectrum_is_limit_of_general_form() {
    let p = sp(25.0, 0.8, 0.3, 0.0);
    let eth = p.threshold_epsilon();
    let near = p.with_epsilon(eth * (1.0 - 1e-9));
    let at = p.with_epsilon(eth);
    for w in [0.1, 0.4, 2.0] {
        let c = near.coefficients();
        let general_minus = 1.0 - 2.0 * 0.8 * c.diffusion_minus() / (c.lambda_plus.powi(2) + w * w);
        assert_relative_eq!(general_minus, spectrum_minus_threshold(&at, w), max_relative = 1e-6);
        let general_plus = 1.0 + 2.0 * 0.8 * c.diffusion_plus() / (c.lambda_minus.powi(2) + w * w);
        assert_relative_eq!(general_plus, spectrum_plus_threshold(&at, w).value(), max_relative = 1e-6);
    }
}

#[test]
fn spectrum_tends_to_vacuum() {
    let p = sp(25.0, 0.8, 0.1, 0.2);
    let s = spectrum(&p, &[1e8, -1e8]).unwrap();
    for (sp_, sm) in s.s_plus.iter().zip(&s.s_minus) {
        assert!((sp_.value() - 1.0).abs() < 1e-9);
        assert!((sm - 1.0).abs() < 1e-9);
    }
}

#[test]
fn spectrum_errors() {
    let p = sp(0.0, 0.8, 0.0, 0.6);
    assert!(matches!(spectrum_plus(&p, 0.0), Err(Error::NotStable { .. })));
    // The minus channel still relaxes.
    assert!(spectrum_minus(&p, 0.0).is_ok());
    assert!(spectrum(&p, &[0.0]).is_err());
}

#[test]
fn vacuum_record() {
    let r = transient_moments(&sp(25.0, 0.8, 0.1, 0.2), 0.0).unwrap();
    assert_eq!(r, GaussianRecord::vacuum());
    assert_eq!(mean_photon_number(&sp(25.0, 0.8, 0.1, 0.2), 0.0).unwrap(), 0.0);
    let pi = std::f64::consts::PI;
    assert_relative_eq!(q_function(&r, Complex64::new(0.0, 0.0)).unwrap(), 1.0 / pi, max_relative = 1e-15);
    let pd = photon_distribution(&r, 20).unwrap();
    assert_eq!(pd.probs[0], 1.0);
    assert!(pd.probs[1..].iter().all(|&x| x == 0.0));
}

#[test]
fn pure_dpa_steady_photon_number() {
    let p = sp(0.0, 0.8, 0.0, 0.2);
    let r = steady_record(&p).unwrap();
    let expect = 2.0 * 0.04 / (0.64 - 0.16);
    assert_relative_eq!(r.n_cl, expect, max_relative = 1e-13);
    assert_relative_eq!(mean_photon_number(&p, f64::INFINITY).unwrap(), expect, max_relative = 1e-13);
}

#[test]
fn steady_record_requires_stability() {
    let p = sp(0.0, 0.8, 0.0, 0.5);
    assert!(matches!(steady_record(&p), Err(Error::NotStable { .. })));
    assert!(transient_moments(&p, 3.0).is_ok());
    assert!(transient_moments(&p, -1.0).is_err());
}

#[test]
fn transient_at_threshold_uses_linear_growth() {
    let p = sp(25.0, 0.8, 0.1, 0.0);
    let p = p.with_epsilon(p.threshold_epsilon());
    let r = transient_moments(&p, 2.0).unwrap();
    let n = mean_photon_number(&p, 2.0).unwrap();
    assert!(r.n_cl.is_finite() && n.is_finite());
    assert_relative_eq!(r.n_cl, n, max_relative = 1e-9);
    // Slightly below threshold gives nearly the same values.
    let below = p.with_epsilon(p.threshold_epsilon() * (1.0 - 1e-12));
    assert_relative_eq!(transient_moments(&below, 2.0).unwrap().n_cl, r.n_cl, max_relative = 1e-8);
}

#[test]
fn transient_satisfies_its_rate_equations() {
    // d<a+^2>/dt = -2 l- <a+^2> + 2 D+, d<a-^2>/dt = -2 l+ <a-^2> + 2 D-.
    let p = sp(25.0, 0.8, 0.1, 0.3);
    let c = p.coefficients();
    let h = 1e-5;
    for t in [0.01, 0.3, 2.0, 7.0] {
        let r = transient_moments(&p, t).unwrap();
        let rp = transient_moments(&p, t + h).unwrap();
        let rm = transient_moments(&p, t - h).unwrap();
        let d_plus = (rp.alpha_plus_sq() - rm.alpha_plus_sq()) / (2.0 * h);
        let d_minus = (rp.alpha_minus_sq() - rm.alpha_minus_sq()) / (2.0 * h);
        let rhs_plus = -2.0 * c.lambda_minus * r.alpha_plus_sq() + 2.0 * c.diffusion_plus();
        let rhs_minus = -2.0 * c.lambda_plus * r.alpha_minus_sq() + 2.0 * c.diffusion_minus();
        assert!((d_plus - rhs_plus).abs() < 1e-5 * (1.0 + rhs_plus.abs()), "{d_plus} {rhs_plus}");
        assert!((d_minus - rhs_minus).abs() < 1e-5 * (1.0 + rhs_minus.abs()), "{d_minus} {rhs_minus}");
    }
}

#[test]
fn propagator_determinant() {
    let p = sp(25.0, 0.8, 0.1, 0.3);
    let c = p.coefficients();
    for t in [0.0, 0.5, 3.0] {
        let (a, b) = propagator(&c, t);
        assert_relative_eq!(a * a - b * b, (-2.0 * c.relaxation() * t).exp(), max_relative = 1e-12);
    }
    assert_eq!(propagator(&c, 0.0), (1.0, 0.0));
}

#[test]
fn q_function_rejects_bad_record() {
    assert!(matches!(GaussianRecord::from_moments(0.0, 2.0, 0.5), Err(Error::QFunctionUndefined { .. })));
    let mut r = GaussianRecord::vacuum();
    r.d = 2.0;
    assert!(q_function(&r, Complex64::new(0.0, 0.0)).is_err());
    assert!(photon_distribution(&r, 4).is_err());
}

#[test]
fn q_function_normalised_and_oriented() {
    let p = sp(25.0, 0.8, 0.1, 0.3);
    let r = steady_record(&p).unwrap();
    // Squeezed along the imaginary axis since <a^2> > 0.
    assert!(r.b > 0.0);
    let on_re = q_function(&r, Complex64::new(1.0, 0.0)).unwrap();
    let on_im = q_function(&r, Complex64::new(0.0, 1.0)).unwrap();
    assert!(on_re > on_im);

    let (lx, ly) = (14.0 / (r.c - r.d).sqrt(), 14.0 / (r.c + r.d).sqrt());
    let (nx, ny) = (1200, 1200);
    let (hx, hy) = (2.0 * lx / nx as f64, 2.0 * ly / ny as f64);
    let mut total = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let x = -lx + (i as f64 + 0.5) * hx;
            let y = -ly + (j as f64 + 0.5) * hy;
            total += q_function(&r, Complex64::new(x, y)).unwrap();
        }
    }
    assert!((total * hx * hy - 1.0).abs() < 1e-6, "{}", total * hx * hy);
}

#[test]
fn thermal_distribution() {
    let r = GaussianRecord::from_moments(0.0, 0.0, 3.5).unwrap();
    let pd = photon_distribution(&r, 60).unwrap();
    for (n, &x) in pd.probs.iter().enumerate() {
        let expect = 3.5f64.powi(n as i32) / 4.5f64.powi(n as i32 + 1);
        assert_relative_eq!(x, expect, max_relative = 1e-12);
    }
}

#[test]
fn squeezed_vacuum_distribution() {
    let s: f64 = 0.9;
    let (ch, sh) = (s.cosh(), s.sinh());
    let r = GaussianRecord::from_moments(0.0, -ch * sh, sh * sh).unwrap();
    let pd = photon_distribution(&r, 80).unwrap();
    let mut even = 1.0 / ch;
    for k in 0..=40 {
        assert_relative_eq!(pd.probs[2 * k], even, max_relative = 1e-11);
        if 2 * k + 1 <= 80 {
            assert!(pd.probs[2 * k + 1].abs() < 1e-14);
        }
        let kf = k as f64;
        even *= s.tanh().powi(2) * (2.0 * kf + 1.0) * (2.0 * kf + 2.0) / (4.0 * (kf + 1.0) * (kf + 1.0));
    }
}

#[test]
fn distribution_survives_large_n() {
    let p = sp(25.0, 0.8, 0.1, 0.0);
    let p = p.at_threshold_fraction(0.9).unwrap();
    let r = steady_record(&p).unwrap();
    let pd = photon_distribution(&r, 3000).unwrap();
    assert!(pd.probs.iter().all(|x| x.is_finite() && *x >= 0.0));
    assert!((pd.total() - 1.0).abs() < 1e-6);
    assert_relative_eq!(pd.mean(), r.n_cl, max_relative = 1e-6);
}

#[test]
fn even_photon_numbers_favoured() {
    for eps in [0.0, 0.3] {
        let r = steady_record(&sp(100.0, 0.8, 0.067, eps)).unwrap();
        let pd = photon_distribution(&r, 40).unwrap();
        for n in (0..=10).step_by(2) {
            assert!(pd.probs[n] >= pd.probs[n + 1], "eps {eps} n {n}");
        }
    }
}

fn stable_point() -> impl Strategy<Value = SystemParams> {
    (0.0..300.0f64, 0.05..5.0f64, 0.0..1.2f64, 0.0..0.999f64).prop_map(|(a, k, b, f)| {
        sp(a, k, b, 0.0).at_threshold_fraction(f).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn variances_match_alpha_moments(p in stable_point()) {
        let v = variance_steady(&p).unwrap();
        let (ap, am) = steady_alpha_sq(&p.coefficients()).unwrap();
        prop_assert!(rel(v.plus.value(), 1.0 + ap) < 1e-9);
        prop_assert!(rel(v.minus, 1.0 - am) < 1e-9);
        prop_assert!(v.minus > 0.0);
        prop_assert!(v.plus.value() >= 1.0 - 1e-12);
        prop_assert!(v.plus.value() * v.minus >= 1.0 - 1e-9);
    }

    #[test]
    fn threshold_is_limit_of_steady(a in 0.0..300.0f64, k in 0.05..5.0f64, b in 0.0..1.2f64) {
        let p = sp(a, k, b, 0.0);
        let at = p.with_epsilon(p.threshold_epsilon());
        let bf = p.b_factor();
        let e = at.epsilon;
        let closed = (2.0 * k * bf + 3.0 * a * b * b) / ((2.0 * k + 4.0 * e) * bf + a * (4.0 * b + b.powi(3)));
        prop_assert!(rel(closed, variance_threshold(&p).unwrap().minus) < 1e-12);
    }

    #[test]
    fn record_identities(p in stable_point(), t in prop_oneof![0.0..50.0f64, Just(f64::INFINITY)]) {
        let r = transient_moments(&p, t).unwrap();
        prop_assert!((r.a - 1.0 - r.n_cl).abs() <= 1e-12 * r.a);
        prop_assert_eq!(r.b, r.alpha_sq);
        let lhs = r.c * r.c - r.d * r.d;
        let rhs = 1.0 / (r.a * r.a - r.b * r.b);
        prop_assert!(rel(lhs, rhs) < 1e-9);
        let n = mean_photon_number(&p, t).unwrap();
        prop_assert!((n - r.n_cl).abs() <= 1e-9 * r.n_cl.abs().max(1e-12), "{} {}", n, r.n_cl);
    }

    #[test]
    fn spectrum_sum_rule(p in stable_point()) {
        let c = p.coefficients();
        let (ap, am) = steady_alpha_sq(&c).unwrap();
        // Integrate over u = atan(w / lambda), which maps the Lorentzian to a constant.
        let n = 64;
        let mut ip = 0.0;
        let mut im = 0.0;
        for i in 0..n {
            let u = -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * std::f64::consts::PI / n as f64;
            let wp = c.lambda_minus * u.tan();
            let wm = c.lambda_plus * u.tan();
            let jp = c.lambda_minus / u.cos().powi(2);
            let jm = c.lambda_plus / u.cos().powi(2);
            ip += (spectrum_plus(&p, wp).unwrap().value() - 1.0) * jp;
            im += (spectrum_minus(&p, wm).unwrap() - 1.0) * jm;
        }
        let h = std::f64::consts::PI / n as f64;
        let norm = 2.0 * std::f64::consts::PI * p.kappa;
        prop_assert!((ip * h / norm - ap).abs() <= 1e-9 * ap.abs().max(1e-12));
        prop_assert!((im * h / norm + am).abs() <= 1e-9 * am.abs().max(1e-12));
    }

    #[test]
    fn spectrum_minus_nonnegative(p in stable_point(), w in 0.0..20.0f64) {
        prop_assert!(spectrum_minus(&p, w).unwrap() >= -1e-12);
    }
}
