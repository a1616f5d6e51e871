//! One function per subcommand, taking its parsed config and writing its
//! artifacts.

use std::io::Write as _;

use serde_json::{json, Value};
use vortonlab::cloud::particle_vs_grid;
use vortonlab::fields::{
    collapse_dipole_field, default_past_horizon, eigenvalues3, euler_dipole_2d, flow_map, flow_map_from_past,
    velocity_field,
};
use vortonlab::ode::Control;
use vortonlab::spectral::{convergence_experiment, GridField};
use vortonlab::twovorton::{capture_threshold, energy_contours, integrate_reduced, reduced_energy};
use vortonlab::vortons::integrate;
use vortonlab::{radial_pair, Error, ReducedTwoVortonState, Vec3, VortonSystem};

use crate::artifacts::Artifacts;
use crate::config::*;
use crate::{core_failure, Failure};

/// What a command reports back for the manifest.
#[derive(Debug, Default)]
pub struct Run {
    pub config: Value,
    pub seed: Option<u64>,
    pub drift: Value,
    pub summary: Value,
}

pub(crate) fn resolved<T: serde::Serialize>(cfg: &T) -> Value {
    serde_json::to_value(cfg).expect("configs serialize")
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

pub fn simulate(cfg: SimulateConfig, out: &mut Artifacts, run: &mut Run) -> Result<(), Failure> {
    let state = VortonSystem::from_data(&cfg.kernel, &cfg.vortons).map_err(core_failure)?;
    let traj = match integrate(&state, cfg.duration, cfg.method, cfg.samples) {
        Ok(traj) => traj,
        Err(Error::NearCollision { t, partial }) => {
            out.write_with("trajectory.csv", |w| partial.write_csv(w))?;
            out.write_json("conserved.json", &partial.meta)?;
            run.drift = resolved(&partial.meta.drift);
            return Err(Failure::Numerical(format!("near collision at t = {t}; trajectory is partial")));
        }
        Err(e) => return Err(core_failure(e)),
    };
    out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
    out.write_json("conserved.json", &traj.meta)?;
    run.drift = resolved(&traj.meta.drift);
    run.summary = json!({
        "termination": traj.meta.termination,
        "frames": traj.frames.len(),
        "accepted_steps": traj.meta.accepted_steps,
        "max_momentum": traj.meta.max_momentum,
    });
    Ok(())
}

pub fn reduce2(cfg: Reduce2Config, out: &mut Artifacts, run: &mut Run) -> Result<(), Failure> {
    if cfg.mbar.is_empty() {
        return Err(Failure::Config("at `mbar`: need at least one total momentum".into()));
    }
    if !(cfg.duration > 0.0) || cfg.samples == 0 {
        return Err(Failure::Config("duration and samples must be positive".into()));
    }
    cfg.method.validate().map_err(core_failure)?;
    let kernel = radial_pair(&cfg.kernel).map_err(core_failure)?;
    let times: Vec<f64> = (1..=cfg.samples).map(|i| cfg.duration * i as f64 / cfg.samples as f64).collect();
    let width = (cfg.mbar.len() - 1).to_string().len().max(2);
    let mut runs = Vec::new();
    let mut worst_drift: f64 = 0.0;
    for (i, mbar) in cfg.mbar.iter().enumerate() {
        let state =
            ReducedTwoVortonState::with_kernel(kernel.clone(), vec3(cfg.delta_p), vec3(cfg.delta_m), vec3(*mbar))
                .map_err(core_failure)?;
        let mut min_rho = state.delta_p.norm();
        let mut captured = false;
        let traj = integrate_reduced(&state, &times, cfg.method, |_, dp, _| {
            min_rho = min_rho.min(dp.norm());
            if dp.norm() < cfg.capture_radius {
                captured = true;
                Control::Stop
            } else {
                Control::Continue
            }
        });
        let e0 = reduced_energy(&traj.state(0));
        let drift = (0..traj.len())
            .map(|k| (reduced_energy(&traj.state(k)) - e0).abs() / e0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        worst_drift = worst_drift.max(drift);
        let name = format!("reduced_{i:0width$}.csv");
        out.write_with(&name, |w| traj.write_csv(w))?;
        runs.push(json!({
            "file": name,
            "mbar": mbar,
            "termination": traj.termination,
            "captured": captured,
            "min_rho": min_rho,
            "final_rho": traj.delta_p.last().map(|p| p.norm()),
            "energy": e0,
            "energy_drift": drift,
        }));
    }
    out.write_json("reduce2.json", &runs)?;
    run.drift = json!({ "reduced_energy": worst_drift });
    run.summary = json!({ "runs": runs.len() });
    Ok(())
}

pub fn contours(cfg: ContoursConfig, out: &mut Artifacts, run: &mut Run) -> Result<(), Failure> {
    let kernel = radial_pair(&cfg.kernel).map_err(core_failure)?;
    let grid = energy_contours(
        &kernel,
        cfg.omega,
        (cfg.rho[0], cfg.rho[1]),
        (cfg.dm_norm[0], cfg.dm_norm[1]),
        (cfg.shape[0], cfg.shape[1]),
    )
    .map_err(core_failure)?;
    out.write_with("contours.csv", |w| grid.write_csv(w))?;
    out.write_with("boundary.csv", |w| {
        writeln!(w, "rho,dm_norm,dm_norm_half")?;
        for (b, h) in grid.boundary.iter().zip(&grid.boundary_half) {
            writeln!(w, "{},{},{}", b[0], b[1], h[1])?;
        }
        Ok(())
    })?;
    run.summary = json!({ "capture_threshold": capture_threshold(&cfg.kernel, cfg.omega.abs()).ok() });
    Ok(())
}

pub fn field(cfg: FieldConfig, out: &mut Artifacts, run: &mut Run) -> Result<(), Failure> {
    let dims = cfg.kernel.n;
    let points = cfg.grid.points();
    let values: Vec<Vec3> = match &cfg.source {
        FieldSource::Vortons { positions, momenta } => {
            let state = VortonSystem::new(
                &cfg.kernel,
                positions.iter().copied().map(vec3).collect(),
                momenta.iter().copied().map(vec3).collect(),
            )
            .map_err(core_failure)?;
            points.iter().map(|x| velocity_field(&state, x)).collect()
        }
        FieldSource::Collapse { c, omega } => {
            let kernel = radial_pair(&cfg.kernel).map_err(core_failure)?;
            let field = collapse_dipole_field(&kernel, *c, *omega).map_err(core_failure)?;
            // K carries |x|³ terms, so a small step keeps central differences accurate
            let jac = field.jacobian(&Vec3::zeros(), 1e-7);
            let eig = eigenvalues3(&jac);
            let origin = json!({
                "v0": field.eval(&Vec3::zeros()).as_slice(),
                "jacobian": [jac.row(0).iter().collect::<Vec<_>>(), jac.row(1).iter().collect::<Vec<_>>(), jac.row(2).iter().collect::<Vec<_>>()],
                "trace": jac.trace(),
                "eigenvalues": eig.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            });
            out.write_json("collapse.json", &origin)?;
            run.summary = origin;
            points.iter().map(|x| field.eval(x)).collect()
        }
        FieldSource::EulerDipole => {
            if dims != 2 {
                return Err(Failure::Config("at `source`: the Euler dipole is planar; set kernel.n = 2".into()));
            }
            points
                .iter()
                .map(|x| match euler_dipole_2d(&[x[0], x[1]]) {
                    Ok(v) => Vec3::new(v[0], v[1], 0.0),
                    Err(_) => Vec3::repeat(f64::NAN),
                })
                .collect()
        }
    };
    out.write_with("field.csv", |w| {
        let axes = ["x", "y", "z"];
        let mut header: Vec<String> = axes[..dims].iter().map(|s| s.to_string()).collect();
        header.extend((1..=dims).map(|i| format!("v{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (x, v) in points.iter().zip(&values) {
            let row: Vec<String> =
                (0..dims).map(|k| x[k].to_string()).chain((0..dims).map(|k| v[k].to_string())).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    Ok(())
}

pub fn flowmap(cfg: FlowmapConfig, out: &mut Artifacts, run: &mut Run) -> Result<(), Failure> {
    let state = VortonSystem::from_data(&cfg.kernel, &cfg.vortons).map_err(core_failure)?;
    let map = if cfg.from_past {
        let t_star = cfg.t1.unwrap_or_else(|| default_past_horizon(&state));
        flow_map_from_past(&state, &cfg.grid, t_star, cfg.tol)
    } else {
        let t1 = cfg.t1.ok_or_else(|| Failure::Config("at `t1`: required unless from_past is set".into()))?;
        flow_map(&state, &cfg.grid, t1, cfg.tol)
    }
    .map_err(core_failure)?;
    out.write_with("flowmap.csv", |w| map.write_csv(w))?;
    run.summary = json!({
        "t0": map.t0,
        "t1": map.t1,
        "seeds": map.seeds.len(),
        "failed": map.failed.iter().filter(|f| **f).count(),
    });
    Ok(())
}

fn initial_grid(input: &GridInput) -> Result<GridField, Failure> {
    let grid = match (&input.preset, &input.file) {
        (Some(preset), None) => preset.sample(input.resolution, input.length).map_err(core_failure)?,
        (None, Some(path)) => {
            let file = std::fs::File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            GridField::read_binary(std::io::BufReader::new(file)).map_err(core_failure)?
        }
        _ => return Err(Failure::Config("at `initial`: give exactly one of `preset` and `file`".into())),
    };
    if grid.resolution != input.resolution || grid.length != input.length {
        return Err(Failure::Config(format!(
            "at `initial`: grid file holds {}² on length {}, config says {}² on {}",
            grid.resolution, grid.length, input.resolution, input.length
        )));
    }
    Ok(grid)
}

pub fn converge(cfg: ConvergeConfig, out: &mut Artifacts, run: &mut Run) -> Result<(), Failure> {
    let velocity = initial_grid(&cfg.initial)?;
    let report = convergence_experiment(&velocity, &cfg.study).map_err(core_failure)?;
    out.write_with("converge.csv", |w| report.write_csv(w))?;
    out.write_json("converge.json", &report)?;
    run.drift = json!({ "reference_energy": report.reference_energy_drift });
    run.summary = json!({ "order_l2": report.order_l2, "order_hk": report.order_hk, "spread_l2": report.spread_l2 });
    Ok(())
}

pub fn cloudcompare(cfg: CloudcompareConfig, out: &mut Artifacts, run: &mut Run) -> Result<(), Failure> {
    run.seed = Some(cfg.recipe.seed);
    let report = particle_vs_grid(&cfg.recipe, &cfg.kernel, &cfg.options).map_err(core_failure)?;
    out.write_json("cloudcompare.json", &report)?;
    out.write_with("cloudcompare.csv", |w| {
        writeln!(w, "per_axis,vortons,t,rms,max")?;
        for level in &report.levels {
            for (k, t) in report.probe_times.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", level.per_axis, level.vortons, t, level.rms[k], level.max[k])?;
            }
        }
        Ok(())
    })?;
    run.drift = json!({
        "grid_energy": report.grid_energy_drift,
        "cloud_energy": report.levels.iter().map(|l| l.energy_drift).collect::<Vec<_>>(),
        "momentum_gap": report.momentum_gap(),
    });
    run.summary = json!({ "monotone": report.monotone(), "image_tail": report.image_tail });
    Ok(())
}

pub fn check(cfg: CheckConfig, out: &mut Artifacts, run: &mut Run) -> Result<(), Failure> {
    run.seed = Some(cfg.seed);
    let results = crate::check::run_suite(&cfg);
    out.write_with("check.csv", |w| {
        writeln!(w, "name,value,tolerance,pass")?;
        for r in &results {
            writeln!(w, "{},{},{},{}", r.name, r.value, r.tolerance, r.pass)?;
        }
        Ok(())
    })?;
    out.write_json("check.json", &results)?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    run.summary = json!({ "checks": results.len(), "failed": failed });
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}
