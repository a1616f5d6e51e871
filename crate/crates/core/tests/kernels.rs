use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use vortonlab::kernels::{kernel_directional_derivative, kernel_matrix};
use vortonlab::specfun::mean_over_ball_quadrature;
use vortonlab::*;

// K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt, by the trapezoid rule, which
// converges geometrically for this integrand.
fn bessel_k_trapezoid(nu: f64, x: f64) -> f64 {
    let h: f64 = 1e-3;
    let mut sum = 0.5 * (-x).exp();
    let mut t = h;
    loop {
        let term = (-x * t.cosh()).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-300 || t > 40.0 {
            break;
        }
        t += h;
    }
    sum * h
}

#[test]
fn bessel_k_matches_integral_representation() {
    for &nu in &[0.0, 1.0 / 3.0, 0.5, 1.0, 1.7, 2.0, 2.5, 4.2] {
        for &x in &[0.05, 0.3, 1.0, 1.99, 2.01, 5.0, 20.0] {
            let oracle = bessel_k_trapezoid(nu, x);
            let got = bessel_k(nu, x).unwrap().value;
            assert_relative_eq!(got, oracle, max_relative = 1e-11);
        }
    }
}

#[test]
fn bessel_k_zero_at_one() {
    assert_relative_eq!(bessel_k(0.0, 1.0).unwrap().value, 0.421_024_438_240_708_3, max_relative = 1e-14);
}

#[test]
fn bessel_k_saturates_instead_of_overflowing() {
    let k = bessel_k(200.0, 1e-3).unwrap();
    assert!(k.saturated);
    assert_eq!(k.value, f64::MAX);
}

#[test]
fn yukawa_three_dimensions_is_screened_coulomb() {
    for i in 0..10 {
        let eps = 0.1 + 4.9 * i as f64 / 9.0;
        let profile = GreensProfile::yukawa(3, eps).unwrap();
        for j in 0..10 {
            let r = 0.1 + 4.9 * j as f64 / 9.0;
            let exact = (-eps * r).exp() / (4.0 * PI * r);
            assert_relative_eq!(green_eval(&profile, r).unwrap(), exact, max_relative = 1e-12);
        }
    }
}

#[test]
fn matern_profile_inverts_its_symbol() {
    let profile = GreensProfile::matern(3, 0.8, 3, Normalization::Operator).unwrap();
    for &r in &[0.2, 0.7, 1.5, 3.0] {
        let back = radial_fourier_inverse(|k| profile.symbol(k), 3, r).unwrap();
        assert_relative_eq!(back, green_eval(&profile, r).unwrap(), max_relative = 1e-8);
    }
}

#[test]
fn unit_peak_p3_kernel_fixtures() {
    let kernel = radial_pair(&KernelSpec::unit_peak_p3(1.0)).unwrap();
    assert_eq!(kernel.kappa(), Some(2.0 / 3.0));
    // least squares K(ρ) − κ ≈ aρ² + bρ³ + cρ⁴ on (0, 0.05]; the odd cubic
    // term is present in both eigenvalues and biases a pure quadratic fit
    let fit = |f: &dyn Fn(f64) -> f64| {
        let mut m = nalgebra::Matrix3::<f64>::zeros();
        let mut rhs = nalgebra::Vector3::<f64>::zeros();
        for i in 1..=50 {
            let r = 0.05 * i as f64 / 50.0;
            let row = nalgebra::Vector3::new(r * r, r * r * r, r * r * r * r);
            m += row * row.transpose();
            rhs += row * (f(r) - 2.0 / 3.0);
        }
        m.lu().solve(&rhs).unwrap()[0]
    };
    assert!((fit(&|r| kernel.k1(r)) + 0.2).abs() < 1e-4);
    assert!((fit(&|r| kernel.k2(r)) + 0.4).abs() < 1e-4);
}

#[test]
fn ball_mean_closed_form_matches_quadrature() {
    let profile = GreensProfile::unit_peak_p3(1.0).unwrap();
    for i in 0..40 {
        let r = 0.05 * (400.0f64).powf(i as f64 / 39.0);
        let closed = mean_over_ball(&profile, r).unwrap();
        let quad = mean_over_ball_quadrature(&profile, r).unwrap();
        assert_relative_eq!(closed, quad, max_relative = 1e-10);
    }
}

#[test]
fn directional_derivative_matches_finite_differences() {
    for spec in [KernelSpec::unit_peak_p3(1.3), KernelSpec::smoothed(2, 0.7, 3, Normalization::UnitMass)] {
        let kernel = radial_pair(&spec).unwrap();
        let x = Vec3::new(0.4, -0.9, if spec.n == 3 { 0.3 } else { 0.0 });
        let dir = Vec3::new(0.6, 0.8, 0.0);
        let h = 1e-5;
        let fd = (kernel_matrix(&kernel, &(x + dir * h)).unwrap() - kernel_matrix(&kernel, &(x - dir * h)).unwrap())
            / (2.0 * h);
        let d = kernel_directional_derivative(&kernel, &x, &dir).unwrap();
        assert!((fd - d).norm() < 1e-8, "{fd} vs {d}");
    }
}

#[test]
fn leray_kernel_is_singular_and_refused_by_dynamics() {
    let spec =
        KernelSpec { n: 2, eps: 0.0, eta: 0.0, p: 3, normalization: Normalization::Operator, gaussian_limit: false };
    assert_eq!(spec.class(), KernelClass::Euler);
    assert!(!spec.is_c1());
    let r = VortonSystem::new(&spec, vec![Vec3::zeros()], vec![Vec3::x()]);
    assert!(matches!(r, Err(Error::Capability(_))));
}

fn rotation(axis: [f64; 3], angle: f64) -> Mat3 {
    *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vec3::from(axis)), angle).matrix()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_rotation_equivariant(
        x in prop::array::uniform3(-3.0..3.0f64),
        axis in prop::array::uniform3(-1.0..1.0f64),
        angle in 0.0..6.28f64,
    ) {
        prop_assume!(Vec3::from(axis).norm() > 0.1);
        let kernel = radial_pair(&KernelSpec::unit_peak_p3(1.0)).unwrap();
        let r = rotation(axis, angle);
        let x = Vec3::from(x);
        let lhs = kernel_matrix(&kernel, &(r * x)).unwrap();
        let rhs = r * kernel_matrix(&kernel, &x).unwrap() * r.transpose();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn gram_matrix_is_positive_semidefinite(
        pts in prop::collection::vec(prop::array::uniform3(-2.0..2.0f64), 2..6),
        eps in 0.0..2.0f64,
        eta in 0.3..2.0f64,
    ) {
        let spec = KernelSpec { n: 3, eps, eta, p: 3, normalization: Normalization::Operator, gaussian_limit: false };
        let kernel = radial_pair(&spec).unwrap();
        let n = pts.len();
        let mut g = nalgebra::DMatrix::<f64>::zeros(3 * n, 3 * n);
        for a in 0..n {
            for b in 0..n {
                let k = kernel_matrix(&kernel, &(Vec3::from(pts[a]) - Vec3::from(pts[b]))).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        g[(3 * a + i, 3 * b + j)] = k[(i, j)];
                    }
                }
            }
        }
        let scale = g.norm();
        let eig = nalgebra::SymmetricEigen::new(g).eigenvalues;
        prop_assert!(eig.iter().all(|&l| l > -1e-9 * scale));
    }
}
