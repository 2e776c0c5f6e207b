use super::ladder::*;
use super::*;
use crate::params::{Coefficients, SystemParams};
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Literal dense evaluation of the master equation with matrix products.
fn generator_dense(rho: &DensityMatrix, c: &Coefficients) -> DensityMatrix {
    generator_dense_with(rho, c, &annihilation(rho.dim()))
}

/// The master equation with `a` replaced by an arbitrary dense matrix.
fn generator_dense_with(rho: &DensityMatrix, c: &Coefficients, a: &[Complex64]) -> DensityMatrix {
    let d = rho.dim();
    let a = a.to_vec();
    let ad = dagger(&a, d);
    let r = rho.as_slice();
    let mm = |x: &[Complex64], y: &[Complex64]| matmul(x, y, d);
    let a2 = mm(&a, &a);
    let ad2 = mm(&ad, &ad);
    let aad = mm(&a, &ad);
    let ada = mm(&ad, &a);
    let mut out = vec![c0(); d * d];
    let mut add = |k: f64, x: Vec<Complex64>| {
        for (o, v) in out.iter_mut().zip(x) {
            *o += v * k;
        }
    };
    let e = c.epsilon;
    add(0.5 * e, mm(r, &a2));
    add(-0.5 * e, mm(&a2, r));
    add(0.5 * e, mm(&ad2, r));
    add(-0.5 * e, mm(r, &ad2));
    add(2.0 * c.r, mm(&mm(&ad, r), &a));
    add(-c.r, mm(&aad, r));
    add(-c.r, mm(r, &aad));
    add(2.0 * c.s, mm(&mm(&a, r), &ad));
    add(-c.s, mm(&ada, r));
    add(-c.s, mm(r, &ada));
    add(c.u, mm(&mm(&ad, r), &ad));
    add(c.u, mm(&mm(&a, r), &a));
    add(-c.u, mm(r, &ad2));
    add(-c.u, mm(&a2, r));
    add(c.v, mm(&mm(&ad, r), &ad));
    add(c.v, mm(&mm(&a, r), &a));
    add(-c.v, mm(r, &a2));
    add(-c.v, mm(&ad2, r));
    DensityMatrix::from_row_major(d, out).unwrap()
}

fn random_hermitian(dim: usize, support: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rho = DensityMatrix::zeros(dim);
    for m in 0..support {
        for n in 0..=m {
            let z = if m == n {
                Complex64::new(rng.random::<f64>(), 0.0)
            } else {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            };
            rho[(m, n)] = z;
            rho[(n, m)] = z.conj();
        }
    }
    let tr = rho.trace().re;
    rho.scale(1.0 / tr);
    rho
}

fn sample_coeffs() -> Coefficients {
    SystemParams::new(25.0, 0.8, 0.1, 0.7).unwrap().coefficients()
}

#[test]
fn stencil_matches_literal_matrix_products() {
    let c = sample_coeffs();
    // Full support, including the truncation boundary.
    let rho = random_hermitian(9, 9, 7);
    let fast = apply_generator(&rho, &c);
    let slow = generator_dense(&rho, &c);
    for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
        assert!((x - y).norm() < 1e-12, "{x} vs {y}");
    }
}

#[test]
fn vacuum_is_fixed_point_of_pure_decay() {
    let c = SystemParams::new(0.0, 0.8, 0.0, 0.0).unwrap().coefficients();
    let out = apply_generator(&DensityMatrix::vacuum(6), &c);
    assert_eq!(out.norm_l1(), 0.0);
}

#[test]
fn trace_preserved_away_from_boundary() {
    let c = sample_coeffs();
    for seed in 0..5 {
        let rho = random_hermitian(20, 12, seed);
        let tr = apply_generator(&rho, &c).trace();
        assert!(tr.norm() < 1e-12, "trace {tr}");
    }
}

#[test]
fn photon_number_rate_matches_moment_equation() {
    let c = sample_coeffs();
    let d = 20;
    let rho = random_hermitian(d, 12, 3);
    let drho = apply_generator(&rho, &c);
    let a = annihilation(d);
    let ad = dagger(&a, d);
    let num = matmul(&ad, &a, d);
    let lhs = expectation(&drho, &num);
    let n = expectation(&rho, &num).re;
    let a2 = expectation(&rho, &matmul(&a, &a, d));
    let ad2 = expectation(&rho, &matmul(&ad, &ad, d));
    let rhs = 2.0 * (c.r - c.s) * n + c.coupling() * (ad2 + a2).re + 2.0 * c.r;
    assert!((lhs.re - rhs).abs() < 1e-10, "{} vs {rhs}", lhs.re);
    assert!(lhs.im.abs() < 1e-12);

    // d⟨a²⟩/dt likewise.
    let lhs2 = expectation(&drho, &matmul(&a, &a, d));
    let rhs2 = a2 * (2.0 * (c.r - c.s)) + 2.0 * c.coupling() * n + c.epsilon - 2.0 * c.v;
    assert!((lhs2 - rhs2).norm() < 1e-10);
}

#[test]
fn vacuum_stays_vacuum_without_drive() {
    let p = SystemParams::new(0.0, 0.8, 0.0, 0.0).unwrap();
    let ev = evolve(&DensityMatrix::vacuum(8), &p, 3.0, 0.01).unwrap();
    assert_eq!(ev.rho, DensityMatrix::vacuum(8));
}

#[test]
fn pure_dpa_relaxes_to_known_photon_number() {
    let p = SystemParams::new(0.0, 0.8, 0.0, 0.2).unwrap();
    let dt = max_step(&p);
    let ev = evolve(&DensityMatrix::vacuum(40), &p, 50.0 / 0.8, dt).unwrap();
    let obs = observables(&ev.rho);
    assert!((obs.mean_n - 1.0 / 6.0).abs() < 1e-4, "{}", obs.mean_n);
    assert!(ev.trace_err < 1e-10);
}

#[test]
fn oversized_step_rejected() {
    let p = SystemParams::new(25.0, 0.8, 0.0, 0.0).unwrap();
    assert!(matches!(
        evolve(&DensityMatrix::vacuum(10), &p, 1.0, 1.0),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn small_truncation_is_reported() {
    let p = SystemParams::new(25.0, 0.8, 0.1, 0.0).unwrap();
    let p = p.at_threshold_fraction(0.9).unwrap();
    match evolve(&DensityMatrix::vacuum(12), &p, 5.0, max_step(&p)) {
        Err(Error::TruncationTooSmall { dim, suggested, .. }) => {
            assert_eq!(dim, 12);
            assert!(suggested > dim);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        steady_state(&p, 40),
        Err(Error::TruncationTooSmall { .. })
    ));
}

#[test]
fn steady_state_without_drive_is_vacuum() {
    let p = SystemParams::new(0.0, 0.8, 0.0, 0.0).unwrap();
    let rho = steady_state(&p, 10).unwrap();
    for (k, z) in rho.as_slice().iter().enumerate() {
        let expect = if k == 0 { 1.0 } else { 0.0 };
        assert!((z - expect).norm() < 1e-14);
    }
}

#[test]
fn pure_dpa_keeps_odd_offsets_empty() {
    let p = SystemParams::new(0.0, 0.8, 0.0, 0.3).unwrap();
    let ev = evolve(&DensityMatrix::vacuum(60), &p, 5.0, max_step(&p)).unwrap();
    for m in 0..60 {
        for n in 0..60 {
            if (m + n) % 2 == 1 {
                assert_eq!(ev.rho[(m, n)], c0());
            }
        }
    }
    // Pairs dominate, but single-photon loss feeds the odd levels.
    let diag = steady_state(&p, 120).unwrap().diagonal();
    assert!(diag[2] > diag[3] && diag[1] > 0.0);
}

#[test]
fn solver_and_relaxation_agree() {
    let p = SystemParams::new(2.0, 0.8, 0.2, 0.0).unwrap();
    let p = p.at_threshold_fraction(0.5).unwrap();
    let direct = steady_state(&p, 60).unwrap();
    let relaxed = relax(&DensityMatrix::vacuum(60), &p, max_step(&p), 200.0, 1e-9).unwrap();
    let diff: f64 = direct
        .as_slice()
        .iter()
        .zip(relaxed.rho.as_slice())
        .map(|(x, y)| (x - y).norm())
        .sum();
    assert!(diff < 1e-7, "diff {diff}");
}

#[test]
fn vacuum_observables() {
    let obs = observables(&DensityMatrix::vacuum(5));
    assert_eq!(obs.mean_n, 0.0);
    assert_eq!(obs.var_plus, 1.0);
    assert_eq!(obs.var_minus, 1.0);
}

#[test]
fn phase_symmetric_state_has_equal_quadratures() {
    let diag = [0.4, 0.3, 0.2, 0.1];
    let obs = observables(&DensityMatrix::from_diagonal(&diag));
    let n: f64 = diag.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    assert_relative_eq!(obs.var_plus, 1.0 + 2.0 * n, epsilon = 1e-14);
    assert_relative_eq!(obs.var_minus, 1.0 + 2.0 * n, epsilon = 1e-14);
}

#[test]
fn observables_match_dense_operators() {
    let d = 15;
    let rho = random_hermitian(d, 10, 11);
    let obs = observables(&rho);
    let a = annihilation(d);
    let ad = dagger(&a, d);
    let xp: Vec<Complex64> = a.iter().zip(&ad).map(|(x, y)| x + y).collect();
    let xm: Vec<Complex64> = a
        .iter()
        .zip(&ad)
        .map(|(x, y)| Complex64::new(0.0, 1.0) * (y - x))
        .collect();
    let var = |op: &[Complex64]| {
        let m1 = expectation(&rho, op).re;
        expectation(&rho, &matmul(op, op, d)).re - m1 * m1
    };
    assert!((obs.var_plus - var(&xp)).abs() < 1e-12);
    assert!((obs.var_minus - var(&xm)).abs() < 1e-12);
    assert!((obs.mean_a - expectation(&rho, &a)).norm() < 1e-13);
}

#[test]
fn husimi_of_vacuum() {
    let rho = DensityMatrix::vacuum(30);
    let pi = std::f64::consts::PI;
    assert_relative_eq!(husimi(&rho, Complex64::new(0.0, 0.0)), 1.0 / pi, epsilon = 1e-15);
    let q = husimi(&rho, Complex64::from_polar(1.0, 0.7));
    assert_relative_eq!(q, (-1.0f64).exp() / pi, epsilon = 1e-15);
}

#[test]
fn min_eigenvalue_of_mixture() {
    let rho = DensityMatrix::from_diagonal(&[0.7, 0.2, 0.1]);
    assert_relative_eq!(rho.min_eigenvalue().unwrap(), 0.1, epsilon = 1e-14);
}

#[test]
fn hermitize_symmetrises() {
    let mut rho = random_hermitian(6, 6, 1);
    rho[(1, 2)] += Complex64::new(0.1, 0.0);
    assert!(rho.hermiticity_error() > 0.05);
    rho.hermitize();
    assert_eq!(rho.hermiticity_error(), 0.0);
}


fn frame_lowering(dim: usize, frame: SqueezedFrame) -> Vec<Complex64> {
    let (mu, nu) = frame.mu_nu();
    let a = annihilation(dim);
    let ad = dagger(&a, dim);
    a.iter().zip(&ad).map(|(x, y)| x * mu - y * nu).collect()
}

#[test]
fn frame_stencil_matches_substituted_operators() {
    let c = sample_coeffs();
    let frame = SqueezedFrame::new(-0.7).unwrap();
    let rho = random_hermitian(9, 9, 5);
    let fast = apply_generator_in_frame(&rho, &c, frame);
    let slow = generator_dense_with(&rho, &c, &frame_lowering(9, frame));
    for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
        assert!((x - y).norm() < 1e-11, "{x} vs {y}");
    }
}

#[test]
fn squeeze_matrix_is_orthogonal_and_matches_exponential() {
    let frame = SqueezedFrame::new(-1.8).unwrap();
    let (rows, cols) = (6000, 60);
    let s = frame.matrix(rows, cols);
    for j in 0..cols {
        for k in 0..cols {
            let dot: f64 = (0..rows).map(|m| s[m * cols + j] * s[m * cols + k]).sum();
            let expect = if j == k { 1.0 } else { 0.0 };
            assert!((dot - expect).abs() < 1e-10, "({j},{k}) {dot}");
        }
    }

    // Taylor series of exp[r (a² − a†²)/2] in a large truncated space.
    let r = 0.4;
    let d = 160;
    let a = annihilation(d);
    let ad = dagger(&a, d);
    let g: Vec<Complex64> = matmul(&a, &a, d)
        .iter()
        .zip(matmul(&ad, &ad, d))
        .map(|(x, y)| (x - y) * (0.5 * r))
        .collect();
    let mut term: Vec<Complex64> = (0..d * d)
        .map(|i| if i % (d + 1) == 0 { Complex64::new(1.0, 0.0) } else { c0() })
        .collect();
    let mut sum = term.clone();
    for k in 1..80 {
        term = matmul(&term, &g, d);
        for z in &mut term {
            *z /= k as f64;
        }
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
    }
    let small = SqueezedFrame::new(r).unwrap().matrix(20, 20);
    for m in 0..20 {
        for j in 0..20 {
            assert!((sum[m * d + j].re - small[m * 20 + j]).abs() < 1e-12, "({m},{j}) {} {}", sum[m * d + j].re, small[m * 20 + j]);
        }
    }
}

#[test]
fn identity_frame_is_the_fock_basis() {
    let s = SqueezedFrame::IDENTITY.matrix(5, 5);
    for m in 0..5 {
        for j in 0..5 {
            assert_eq!(s[m * 5 + j], if m == j { 1.0 } else { 0.0 });
        }
    }
    assert_eq!(SqueezedFrame::IDENTITY.vacuum(4), DensityMatrix::vacuum(4));
}

#[test]
fn steady_state_is_frame_independent() {
    let p = SystemParams::new(2.0, 0.8, 0.2, 0.0).unwrap();
    let p = p.at_threshold_fraction(0.5).unwrap();
    let plain = FrameState {
        rho: steady_state(&p, 160).unwrap(),
        frame: SqueezedFrame::IDENTITY,
    };
    let framed = steady_state_in_frame(&p, 160, SqueezedFrame::new(-0.3).unwrap()).unwrap();
    let (a, b) = (plain.observables(), framed.observables());
    assert!((a.mean_n - b.mean_n).abs() < 1e-10, "{} {}", a.mean_n, b.mean_n);
    assert!((a.var_plus - b.var_plus).abs() < 1e-10);
    assert!((a.var_minus - b.var_minus).abs() < 1e-10);
    assert!((a.mean_a_sq - b.mean_a_sq).norm() < 1e-10);
    let pa = plain.photon_distribution(30);
    let pb = framed.photon_distribution(30);
    for n in 0..30 {
        assert!((pa[n] - pb[n]).abs() < 1e-12, "P({n})");
    }
    for alpha in [Complex64::new(0.0, 0.0), Complex64::new(0.8, -0.3), Complex64::new(-1.5, 0.4)] {
        assert!((plain.husimi(alpha) - framed.husimi(alpha)).abs() < 1e-12);
    }
}

#[test]
fn adaptive_frame_balances_variances() {
    let p = SystemParams::new(25.0, 0.8, 0.1, 0.0).unwrap();
    let p = p.at_threshold_fraction(0.5).unwrap();
    let st = steady_state_adaptive(&p, 60).unwrap();
    let obs = st.observables();
    let want = SqueezedFrame::balancing(obs.var_plus, obs.var_minus).unwrap();
    assert!((want.r() - st.frame.r()).abs() < 1e-3);
    assert!(st.frame.r() < 0.0);
}

#[test]
fn evolution_is_frame_independent() {
    let p = SystemParams::new(2.0, 0.8, 0.2, 0.3).unwrap();
    let dt = max_step(&p);
    let frame = SqueezedFrame::new(-0.25).unwrap();
    let plain = evolve(&DensityMatrix::vacuum(70), &p, 2.0, dt).unwrap();
    let framed = evolve_in_frame(&frame.vacuum(70), &p, frame, 2.0, dt).unwrap();
    let a = observables(&plain.rho);
    let b = FrameState {
        rho: framed.rho,
        frame,
    }
    .observables();
    // Agreement up to the RK4 step error, which differs between bases.
    assert!((a.mean_n - b.mean_n).abs() < 1e-7, "{} {}", a.mean_n, b.mean_n);
    assert!((a.var_minus - b.var_minus).abs() < 1e-7, "{} {}", a.var_minus, b.var_minus);
}
