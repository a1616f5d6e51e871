//! Vorton clouds: quadrature discretizations of smooth momentum fields, and
//! a comparison of cloud dynamics against the periodic spectral solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::velocity_at;
use crate::kernels::{KernelSpec, Vec3};
use crate::ode::Method;
use crate::specfun::green_eval;
use crate::spectral::{blob_momentum, GridField, GridPreset, Solver};
use crate::vortons::{self, VortonSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// One node at the centre of each lattice cell.
    MidpointLattice,
    /// One uniformly random node in each lattice cell.
    RandomStratified,
}

/// Momentum field to discretize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudTarget {
    /// An analytic preset placed in the periodic box [0, length)².
    Preset { preset: GridPreset, length: f64 },
    /// A sampled grid, interpolated bilinearly.
    #[serde(skip)]
    Grid(GridField),
}

impl CloudTarget {
    pub fn momentum(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        match self {
            CloudTarget::Preset { preset: GridPreset::SingleBlob { a, b, amplitude }, length } => {
                let c = 0.5 * length;
                Ok(blob_momentum(x - c, y - c, *a, *b, *amplitude))
            }
            CloudTarget::Preset { preset: GridPreset::VortexPair { .. }, .. } => Err(Error::Capability(
                "the vortex-pair preset is a velocity field; sample it to a grid and use a grid target".into(),
            )),
            CloudTarget::Grid(g) => Ok(g.interpolate(x, y)),
        }
    }

    /// The target sampled on an N×N grid of the box, when the box is known.
    pub fn to_grid(&self, resolution: usize) -> Result<GridField> {
        match self {
            CloudTarget::Preset { preset, length } => match preset {
                GridPreset::SingleBlob { .. } => preset.sample(resolution, *length),
                GridPreset::VortexPair { .. } => Err(Error::Capability("vortex-pair is not a momentum preset".into())),
            },
            CloudTarget::Grid(g) if g.resolution == resolution => Ok(g.clone()),
            CloudTarget::Grid(_) => Err(Error::Invalid("grid target resolution does not match".into())),
        }
    }
}

/// How to turn a momentum field into vortons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudRecipe {
    pub target: CloudTarget,
    /// Lattice cells per axis.
    pub per_axis: usize,
    pub rule: QuadratureRule,
    /// Support box as [[x0, y0], [x1, y1]].
    pub support: [[f64; 2]; 2],
    #[serde(default)]
    pub seed: u64,
    /// Nodes with |m| below this fraction of the largest are dropped.
    #[serde(default = "default_drop")]
    pub drop_below: f64,
}

fn default_drop() -> f64 {
    1e-13
}

#[derive(Debug, Clone)]
pub struct SampledCloud {
    pub system: VortonSystem,
    pub spacing: [f64; 2],
    /// Set when the lattice is too coarse for the smoothing length.
    pub warning: Option<String>,
}

/// Places vortons at quadrature nodes with momenta weight·m(node).
pub fn sample_cloud(recipe: &CloudRecipe, spec: &KernelSpec) -> Result<SampledCloud> {
    if spec.n != 2 {
        return Err(Error::Capability("clouds are planar".into()));
    }
    if recipe.per_axis == 0 {
        return Err(Error::Invalid("per_axis must be positive".into()));
    }
    let [[x0, y0], [x1, y1]] = recipe.support;
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::Invalid(format!("empty support box {:?}", recipe.support)));
    }
    let n = recipe.per_axis;
    let hx = (x1 - x0) / n as f64;
    let hy = (y1 - y0) / n as f64;
    let weight = hx * hy;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let mut nodes = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (tx, ty) = match recipe.rule {
                QuadratureRule::MidpointLattice => (0.5, 0.5),
                QuadratureRule::RandomStratified => (rng.gen::<f64>(), rng.gen::<f64>()),
            };
            let x = x0 + (i as f64 + tx) * hx;
            let y = y0 + (j as f64 + ty) * hy;
            let m = recipe.target.momentum(x, y)?;
            nodes.push((x, y, m));
        }
    }
    let largest = nodes.iter().map(|(_, _, m)| m[0].hypot(m[1])).fold(0.0, f64::max);
    let cut = largest * recipe.drop_below;
    let (mut positions, mut momenta) = (Vec::new(), Vec::new());
    for &(x, y, m) in &nodes {
        if largest == 0.0 || m[0].hypot(m[1]) > cut {
            positions.push(Vec3::new(x, y, 0.0));
            momenta.push(Vec3::new(weight * m[0], weight * m[1], 0.0));
        }
    }
    let warning = (spec.eta > 0.0 && hx.max(hy) > spec.eta)
        .then(|| format!("lattice spacing {} exceeds the smoothing scale η = {}", hx.max(hy), spec.eta));
    Ok(SampledCloud { system: VortonSystem::new(spec, positions, momenta)?, spacing: [hx, hy], warning })
}

/// Settings of a particle-vs-grid comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareOptions {
    pub horizon: f64,
    /// Cloud lattice sizes per axis, coarse to fine.
    pub levels: Vec<usize>,
    pub grid_resolution: usize,
    /// Upper bound on the grid time step; lowered to stay under the CFL limit.
    pub grid_dt: f64,
    pub tol: f64,
    /// Probe at every `probe_stride`-th grid node inside the support box.
    pub probe_stride: usize,
    /// Also rerun the grid solver on a doubled box to bound periodic images.
    #[serde(default)]
    pub image_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub per_axis: usize,
    pub vortons: usize,
    pub spacing: f64,
    pub warning: Option<String>,
    /// RMS velocity discrepancy over the probes at each probe time.
    pub rms: Vec<f64>,
    pub max: Vec<f64>,
    /// Σ m_a at the horizon.
    pub momentum: [f64; 2],
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub spec: KernelSpec,
    pub probe_times: Vec<f64>,
    pub probes: usize,
    pub grid_resolution: usize,
    pub length: f64,
    pub grid_dt: f64,
    /// ∫ m of the grid solution at the horizon.
    pub grid_momentum: [f64; 2],
    pub grid_energy_drift: f64,
    /// Relative size of the smoothing kernel at the distance between the
    /// support and its nearest periodic image.
    pub image_tail: f64,
    /// Largest probe change when the box is doubled, if requested.
    pub image_change: Option<f64>,
    pub levels: Vec<LevelReport>,
}

impl ComparisonReport {
    /// Whether the discrepancy at the horizon shrinks at every refinement.
    pub fn monotone(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].rms.last() < w[0].rms.last())
    }

    /// Largest |Σm_cloud − ∫m_grid| over the levels.
    pub fn momentum_gap(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| (l.momentum[0] - self.grid_momentum[0]).hypot(l.momentum[1] - self.grid_momentum[1]))
            .fold(0.0, f64::max)
    }
}

/// Evolves clouds of increasing resolution with the vorton equations and
/// the sampled field with the spectral solver, and compares velocities on
/// probe nodes at T/4, T/2 and T.
pub fn particle_vs_grid(recipe: &CloudRecipe, spec: &KernelSpec, opts: &CompareOptions) -> Result<ComparisonReport> {
    if spec.eps != 0.0 || !spec.is_c1() || spec.n != 2 {
        return Err(Error::Capability("the comparison needs a smooth planar kernel with ε = 0".into()));
    }
    if opts.levels.is_empty() || !(opts.horizon > 0.0) || opts.probe_stride == 0 {
        return Err(Error::Invalid("comparison needs levels, a positive horizon and a probe stride".into()));
    }
    let length = match &recipe.target {
        CloudTarget::Preset { length, .. } => *length,
        CloudTarget::Grid(g) => g.length,
    };
    let [[x0, y0], [x1, y1]] = recipe.support;
    if x0 < 0.0 || y0 < 0.0 || x1 > length || y1 > length {
        return Err(Error::Invalid("the support box must lie inside the periodic box".into()));
    }
    // With divergence-free momentum only the smoothing factor reaches the
    // far field, so images matter through G_η at the image distance.
    let profile = spec.smoothing_profile().expect("smooth kernels have a profile");
    let margin = (length - (x1 - x0)).min(length - (y1 - y0));
    let scale = profile.length();
    let image_tail = (green_eval(&profile, margin)? / green_eval(&profile, scale)?).abs();
    if image_tail > 1e-10 {
        return Err(Error::Resolution(format!(
            "periodic images are not negligible: kernel ratio {image_tail:.2e} at image distance {margin}"
        )));
    }

    let probe_times = vec![opts.horizon / 4.0, opts.horizon / 2.0, opts.horizon];
    let res = opts.grid_resolution;
    let h = length / res as f64;
    let probe_idx: Vec<(usize, usize)> = (0..res)
        .step_by(opts.probe_stride)
        .flat_map(|j| (0..res).step_by(opts.probe_stride).map(move |i| (i, j)))
        .filter(|&(i, j)| {
            let (x, y) = (i as f64 * h, j as f64 * h);
            x >= x0 && x <= x1 && y >= y0 && y <= y1
        })
        .collect();
    let probes: Vec<Vec3> = probe_idx.iter().map(|&(i, j)| Vec3::new(i as f64 * h, j as f64 * h, 0.0)).collect();

    let run_grid =
        |resolution: usize, box_length: f64, offset: f64| -> Result<(Vec<Vec<[f64; 2]>>, [f64; 2], f64, f64)> {
            let base = recipe.target.to_grid(res)?;
            let m0 = if resolution == res {
                base
            } else {
                let k = (offset / h).round() as usize;
                let mut g = GridField::zeros(resolution, box_length)?;
                for j in 0..res {
                    for i in 0..res {
                        let v = base.at(i, j);
                        g.values[0][(j + k) * resolution + i + k] = v[0];
                        g.values[1][(j + k) * resolution + i + k] = v[1];
                    }
                }
                g
            };
            let solver = Solver::new(spec, resolution, box_length)?;
            let mut s = solver.state(&m0)?;
            let dt = opts.grid_dt.min(0.8 * solver.stable_dt(&s));
            let e0 = solver.energy(&s);
            let mut drift: f64 = 0.0;
            let mut samples = Vec::new();
            let k = (offset / h).round() as usize;
            for &t in &probe_times {
                solver.advance(&mut s, t, dt, |st| {
                    drift = drift.max((solver.energy(st) - e0).abs() / e0.abs());
                })?;
                let v = solver.velocity(&s);
                samples.push(probe_idx.iter().map(|&(i, j)| v.at(i + k, j + k)).collect());
            }
            Ok((samples, solver.total_momentum(&s), drift, dt))
        };

    let run_clouds = || -> Result<Vec<(LevelReport, Vec<Vec<Vec3>>)>> {
        let mut out = Vec::with_capacity(opts.levels.len());
        for &per_axis in &opts.levels {
            let cloud = sample_cloud(&CloudRecipe { per_axis, ..recipe.clone() }, spec)?;
            let traj = vortons::integrate_at(&cloud.system, &probe_times, Method::Adaptive { tol: opts.tol })?;
            let samples: Vec<Vec<Vec3>> = traj.frames[1..]
                .iter()
                .map(|f| probes.par_iter().map(|x| velocity_at(traj.kernel(), &f.positions, &f.momenta, x)).collect())
                .collect();
            let total = traj.last().momenta.iter().fold(Vec3::zeros(), |a, m| a + m);
            let level = LevelReport {
                per_axis,
                vortons: cloud.system.len(),
                spacing: cloud.spacing[0].max(cloud.spacing[1]),
                warning: cloud.warning,
                rms: Vec::new(),
                max: Vec::new(),
                momentum: [total[0], total[1]],
                energy_drift: traj.meta.drift.energy,
            };
            out.push((level, samples));
        }
        Ok(out)
    };

    let (grid, clouds) = rayon::join(|| run_grid(res, length, 0.0), run_clouds);
    let (grid_samples, grid_momentum, grid_energy_drift, grid_dt) = grid?;
    let mut levels = Vec::new();
    for (mut level, samples) in clouds? {
        for (cloud_t, grid_t) in samples.iter().zip(&grid_samples) {
            let d: Vec<f64> = cloud_t.iter().zip(grid_t).map(|(c, g)| (c[0] - g[0]).hypot(c[1] - g[1])).collect();
            level.rms.push((d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt());
            level.max.push(d.iter().cloned().fold(0.0, f64::max));
        }
        levels.push(level);
    }
    let np = probes.len();

    let image_change = if opts.image_check {
        let (big, _, _, _) = run_grid(2 * res, 2.0 * length, 0.5 * length)?;
        let last = probe_times.len() - 1;
        Some(
            big[last]
                .iter()
                .zip(&grid_samples[last])
                .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
                .fold(0.0, f64::max),
        )
    } else {
        None
    };

    Ok(ComparisonReport {
        spec: *spec,
        probe_times,
        probes: np,
        grid_resolution: res,
        length,
        grid_dt,
        grid_momentum,
        grid_energy_drift,
        image_tail,
        image_change,
        levels,
    })
}
