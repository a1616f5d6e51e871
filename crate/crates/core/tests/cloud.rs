use vortonlab::cloud::*;
use vortonlab::fields::velocity_field;
use vortonlab::spectral::{GridField, GridPreset, Solver};
use vortonlab::vortons::system_energy;
use vortonlab::*;

fn spec() -> KernelSpec {
    KernelSpec::smoothed(2, 0.5, 3, Normalization::Operator)
}

fn recipe(per_axis: usize) -> CloudRecipe {
    CloudRecipe {
        target: CloudTarget::Preset { preset: GridPreset::single_blob(), length: 20.0 },
        per_axis,
        rule: QuadratureRule::MidpointLattice,
        support: [[5.8, 5.8], [14.2, 14.2]],
        seed: 1,
        drop_below: 1e-13,
    }
}

#[test]
fn zero_field_gives_zero_energy() {
    let zero = GridField::zeros(16, 20.0).unwrap();
    let r = CloudRecipe { target: CloudTarget::Grid(zero), ..recipe(4) };
    let cloud = sample_cloud(&r, &spec()).unwrap();
    assert_eq!(system_energy(&cloud.system), 0.0);
}

#[test]
fn blob_cloud_has_zero_total_momentum() {
    for rule in [QuadratureRule::MidpointLattice, QuadratureRule::RandomStratified] {
        let cloud = sample_cloud(&CloudRecipe { rule, ..recipe(24) }, &spec()).unwrap();
        let total = cloud.system.momenta.iter().fold(Vec3::zeros(), |a, m| a + m);
        let scale: f64 = cloud.system.momenta.iter().map(|m| m.norm()).sum();
        let tol = if rule == QuadratureRule::MidpointLattice { 1e-14 } else { 1e-1 };
        assert!(total.norm() < tol * scale, "{rule:?}: {total}");
    }
}

#[test]
fn stratified_sampling_is_seeded() {
    let r = CloudRecipe { rule: QuadratureRule::RandomStratified, ..recipe(8) };
    let a = sample_cloud(&r, &spec()).unwrap();
    let b = sample_cloud(&r, &spec()).unwrap();
    assert_eq!(a.system.positions, b.system.positions);
    let c = sample_cloud(&CloudRecipe { seed: 2, ..r }, &spec()).unwrap();
    assert_ne!(a.system.positions, c.system.positions);
}

#[test]
fn coarse_lattice_sets_warning() {
    assert!(sample_cloud(&recipe(8), &spec()).unwrap().warning.is_some());
    assert!(sample_cloud(&recipe(24), &spec()).unwrap().warning.is_none());
}

// At t = 0 the cloud velocity converges to the exact convolution, here the
// spectral velocity of the finely sampled field.
#[test]
fn initial_velocity_converges_under_refinement() {
    let solver = Solver::new(&spec(), 256, 20.0).unwrap();
    let grid_m = recipe(1).target.to_grid(256).unwrap();
    let exact = solver.velocity(&solver.state(&grid_m).unwrap());
    let probes: Vec<(usize, usize)> =
        (96..=160).step_by(16).flat_map(|j| (96..=160).step_by(16).map(move |i| (i, j))).collect();
    let h = 20.0 / 256.0;
    let errors: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let cloud = sample_cloud(&recipe(n), &spec()).unwrap();
            probes
                .iter()
                .map(|&(i, j)| {
                    let v = velocity_field(&cloud.system, &Vec3::new(i as f64 * h, j as f64 * h, 0.0));
                    let e = exact.at(i, j);
                    (v[0] - e[0]).hypot(v[1] - e[1])
                })
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(errors[1] < 0.25 * errors[0], "{errors:?}");
    assert!(errors[2] < 0.25 * errors[1], "{errors:?}");
}

#[test]
fn comparison_refuses_rough_or_penalized_kernels_and_small_boxes() {
    let opts = CompareOptions {
        horizon: 0.1,
        levels: vec![8],
        grid_resolution: 64,
        grid_dt: 0.05,
        tol: 1e-8,
        probe_stride: 8,
        image_check: false,
    };
    let pen = KernelSpec { eps: 1.0, ..spec() };
    assert!(matches!(particle_vs_grid(&recipe(8), &pen, &opts), Err(Error::Capability(_))));
    let small = CloudRecipe {
        target: CloudTarget::Preset { preset: GridPreset::single_blob(), length: 10.0 },
        support: [[1.0, 1.0], [9.0, 9.0]],
        ..recipe(8)
    };
    assert!(matches!(particle_vs_grid(&small, &spec(), &opts), Err(Error::Resolution(_))));
}

#[test]
fn short_comparison_conserves_momentum_on_both_sides() {
    let opts = CompareOptions {
        horizon: 0.2,
        levels: vec![12, 24],
        grid_resolution: 128,
        grid_dt: 0.05,
        tol: 1e-9,
        probe_stride: 8,
        image_check: false,
    };
    let report = particle_vs_grid(&recipe(12), &spec(), &opts).unwrap();
    assert_eq!(report.probe_times, vec![0.05, 0.1, 0.2]);
    assert!(report.momentum_gap() < 1e-6);
    assert!(report.monotone(), "{report:?}");
    assert!(report.grid_energy_drift < 1e-8);
}
