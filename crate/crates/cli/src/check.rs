//! The invariant suite behind `vorton-lab check`: quick versions of the
//! library's identities, each reduced to one number against a tolerance.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vortonlab::fields::collapse_dipole_field;
use vortonlab::spectral::{
    fourier_symbol, inverse_symbol, leray_symbol, project_div_free, GridField, GridPreset, Solver,
};
use vortonlab::twovorton::{reduced_rhs, REDUCED_ENERGY_FACTOR};
use vortonlab::vortons::{integrate, system_energy, vorton_rhs};
use vortonlab::*;

use crate::config::CheckConfig;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn result(name: &str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult { name: name.to_string(), value, tolerance, pass: value <= tolerance }
}

/// A check whose computation errored counts as failed with value NaN.
fn guarded(name: &str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> CheckResult {
    match f() {
        Ok(v) => result(name, v, tolerance),
        Err(_) => CheckResult { name: name.to_string(), value: f64::NAN, tolerance, pass: false },
    }
}

pub fn run_suite(cfg: &CheckConfig) -> Vec<CheckResult> {
    let samples = cfg.samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit_peak = KernelSpec::unit_peak_p3(1.0);
    let mut out = Vec::new();

    out.push(guarded("kappa_unit_peak", 0.0, || {
        let k = radial_pair(&unit_peak)?;
        Ok((k.kappa().unwrap_or(f64::NAN) - 2.0 / 3.0).abs())
    }));

    out.push(guarded("bessel_half_integer", 1e-12, || {
        let mut worst: f64 = 0.0;
        for i in 0..50 {
            let x = 0.05 + 0.6 * i as f64;
            let base = (PI / (2.0 * x)).sqrt() * (-x).exp();
            let exact = [base, base * (1.0 + 1.0 / x), base * (1.0 + 3.0 / x + 3.0 / (x * x))];
            for (k, e) in exact.iter().enumerate() {
                let got = bessel_k(0.5 + k as f64, x)?.value;
                worst = worst.max((got - e).abs() / e);
            }
        }
        Ok(worst)
    }));

    out.push(guarded("yukawa_three_dimensions", 1e-9, || {
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            let eps = 0.1 + 4.9 * i as f64 / 9.0;
            let profile = GreensProfile::yukawa(3, eps)?;
            for j in 0..10 {
                let r = 0.1 + 4.9 * j as f64 / 9.0;
                let exact = (-eps * r).exp() / (4.0 * PI * r);
                worst = worst.max((green_eval(&profile, r)? - exact).abs() / exact);
            }
        }
        Ok(worst)
    }));

    let (mut inverse, mut leray): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let n = if rng.gen_bool(0.5) { 2 } else { 3 };
        let spec = KernelSpec {
            n,
            eps: rng.gen_range(0.5..5.0),
            eta: rng.gen_range(0.0..2.0),
            p: rng.gen_range(1..6),
            normalization: Normalization::Operator,
            gaussian_limit: false,
        };
        let mut xi = Vec3::from_fn(|_, _| rng.gen_range(-3.0..3.0));
        let mut id = Mat3::identity();
        if n == 2 {
            xi[2] = 0.0;
            id[(2, 2)] = 0.0;
        }
        match inverse_symbol(&spec, &xi) {
            Ok(l) => inverse = inverse.max((fourier_symbol(&spec, &xi) * l - id).norm()),
            Err(_) => inverse = f64::NAN,
        }
        let p = leray_symbol(n, &xi);
        leray = leray.max((p * p - p).norm()).max((p - p.transpose()).norm());
    }
    out.push(result("symbol_inverse_identity", inverse, 1e-13));
    out.push(result("leray_idempotent_symmetric", leray, 1e-13));

    out.push(guarded("full_vs_reduced_rhs", 1e-12, || {
        let kernel = radial_pair(&unit_peak)?;
        let mut worst: f64 = 0.0;
        for _ in 0..samples.min(200) {
            let mut draw = |s: f64| Vec3::from_fn(|_, _| rng.gen_range(-s..s));
            let (dp, dm, mbar) = (draw(4.0), draw(2.0), draw(2.0));
            let reduced = ReducedTwoVortonState::with_kernel(kernel.clone(), dp, dm, mbar)?;
            let full = reduced.reconstruct()?;
            let (fp, fm) = vorton_rhs(&full);
            let (rp, rm) = reduced_rhs(&reduced);
            worst = worst.max((rp - (fp[1] - fp[0])).norm()).max((rm - (fm[1] - fm[0])).norm());
            let e = vortonlab::twovorton::reduced_energy(&reduced);
            worst = worst.max((e - REDUCED_ENERGY_FACTOR * system_energy(&full)).abs() / e.abs().max(1.0));
        }
        Ok(worst)
    }));

    out.push(guarded("momentum_derivatives_sum", 1e-13, || {
        let kernel = radial_pair(&unit_peak)?;
        let mut worst: f64 = 0.0;
        for _ in 0..samples.min(100) {
            let p: Vec<Vec3> = (0..5).map(|_| Vec3::from_fn(|_, _| rng.gen_range(-3.0..3.0))).collect();
            let m: Vec<Vec3> = (0..5).map(|_| Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect();
            let (_, dm) = vorton_rhs(&VortonSystem::with_kernel(kernel.clone(), p, m)?);
            let scale: f64 = dm.iter().map(|d| d.norm()).sum::<f64>().max(1.0);
            worst = worst.max(dm.iter().fold(Vec3::zeros(), |a, d| a + d).norm() / scale);
        }
        Ok(worst)
    }));

    out.push(guarded("three_vorton_energy_drift", 1e-8, || {
        let s = VortonSystem::new(
            &unit_peak,
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.5, 0.3, -0.2), Vec3::new(-0.4, 1.1, 0.7)],
            vec![Vec3::new(0.3, -0.5, 0.1), Vec3::new(-0.2, 0.4, 0.3), Vec3::new(0.1, 0.2, -0.6)],
        )?;
        let d = integrate(&s, 5.0, Method::Adaptive { tol: 1e-11 }, 10)?.meta.drift;
        Ok(d.energy.max(d.linear_momentum).max(d.angular_momentum))
    }));

    out.push(guarded("collapse_field_origin", 1e-10, || {
        let field = collapse_dipole_field(&radial_pair(&unit_peak)?, -1.0, -2.0)?;
        let v0 = field.eval(&Vec3::zeros()).norm();
        Ok(v0.max(field.jacobian(&Vec3::zeros(), 1e-7).trace().abs()))
    }));

    out.push(guarded("projection_idempotent", 1e-13, || {
        let mut g = GridField::zeros(16, 2.0 * PI)?;
        for c in 0..2 {
            for v in g.values[c].iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let p = project_div_free(&g)?;
        Ok(project_div_free(&p)?.sub(&p).max_abs())
    }));

    out.push(guarded("euler_grid_energy_drift", 1e-8, || {
        let spec = KernelSpec {
            n: 2,
            eps: 0.0,
            eta: 0.0,
            p: 3,
            normalization: Normalization::Operator,
            gaussian_limit: false,
        };
        let solver = Solver::new(&spec, 32, 2.0 * PI)?;
        let mut s = solver.momentum_from_velocity(&GridPreset::vortex_pair().sample(32, 2.0 * PI)?)?;
        let e0 = solver.kinetic_energy(&s);
        solver.advance(&mut s, 0.2, 0.02, |_| {})?;
        Ok((solver.kinetic_energy(&s) - e0).abs() / e0)
    }));

    out
}
