//! Velocity fields carried by vorton states, Lagrangian flow maps, and two
//! reference fields: the harmonic dipole of the Euler kernel in the plane
//! and the linearized field around a collapsing vorton pair.

use std::io::Write;

use nalgebra::{Complex, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Mat3, RadialKernel, Vec3};
use crate::ode::{self, Control, Method, Options, Termination};
use crate::vortons::{self, VortonSystem};

/// v(x) = Σ_b K(x − P_b) m_b.
pub fn velocity_field(state: &VortonSystem, x: &Vec3) -> Vec3 {
    velocity_at(state.kernel(), &state.positions, &state.momenta, x)
}

pub(crate) fn velocity_at(kernel: &RadialKernel, p: &[Vec3], m: &[Vec3], x: &Vec3) -> Vec3 {
    let kappa = kernel.kappa().unwrap_or(f64::NAN);
    let mut v = Vec3::zeros();
    for (pb, mb) in p.iter().zip(m) {
        let d = x - pb;
        let rho = d.norm();
        if rho == 0.0 {
            v += mb * kappa;
            continue;
        }
        let k = kernel.eval(rho);
        let u = d / rho;
        v += mb * k.k2 + u * (k.gap * u.dot(mb));
    }
    v
}

/// The planar field ((x² − y²)/|x|⁴, 2xy/|x|⁴): the Leray projection of a
/// unit momentum (1, 0) at the origin, up to normalization.
pub fn euler_dipole_2d(x: &[f64; 2]) -> Result<[f64; 2]> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 {
        return Err(Error::Pole("harmonic dipole at the origin".into()));
    }
    let r4 = r2 * r2;
    Ok([(x[0] * x[0] - x[1] * x[1]) / r4, 2.0 * x[0] * x[1] / r4])
}

/// The field x ↦ −∂_{x₁}(K(x)·(C, ω, 0)) describing two vortons in the last
/// stage of collapse along the x₁-axis.
#[derive(Debug, Clone)]
pub struct CollapseField {
    kernel: RadialKernel,
    coeffs: Vec3,
}

pub fn collapse_dipole_field(kernel: &RadialKernel, c: f64, omega: f64) -> Result<CollapseField> {
    if kernel.spec().n != 3 {
        return Err(Error::Capability("the collapse field lives in three dimensions".into()));
    }
    if !kernel.spec().is_c1() {
        return Err(Error::Capability("the collapse field needs a C¹ kernel".into()));
    }
    Ok(CollapseField { kernel: kernel.clone(), coeffs: Vec3::new(c, omega, 0.0) })
}

impl CollapseField {
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        let d = self.kernel.directional_derivative(x, &Vec3::x()).expect("C¹ kernel");
        -(d * self.coeffs)
    }

    /// Central-difference Jacobian with step h.
    pub fn jacobian(&self, x: &Vec3, h: f64) -> Mat3 {
        let mut j = Mat3::zeros();
        for k in 0..3 {
            let e = Vec3::ith(k, h);
            let col = (self.eval(&(x + e)) - self.eval(&(x - e))) / (2.0 * h);
            j.set_column(k, &col);
        }
        j
    }
}

/// Eigenvalues of a real 3×3 matrix, real ones first in decreasing order.
pub fn eigenvalues3(m: &Mat3) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| {
        let ra = a.im.abs() > 1e-12 * (1.0 + a.re.abs());
        let rb = b.im.abs() > 1e-12 * (1.0 + b.re.abs());
        ra.cmp(&rb).then(b.re.total_cmp(&a.re)).then(a.im.total_cmp(&b.im))
    });
    ev
}

/// Eigenvalues of a real 2×2 matrix.
pub fn eigenvalues2(m: &Matrix2<f64>) -> [Complex<f64>; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [Complex::new(tr / 2.0 + s, 0.0), Complex::new(tr / 2.0 - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex::new(tr / 2.0, s), Complex::new(tr / 2.0, -s)]
    }
}

/// Regular grid of seed points, x fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedGrid {
    pub origin: [f64; 3],
    pub spacing: f64,
    /// Points per axis; the third entry is 1 for planar grids.
    pub shape: [usize; 3],
}

impl SeedGrid {
    pub fn planar(origin: [f64; 2], spacing: f64, nx: usize, ny: usize) -> Self {
        Self { origin: [origin[0], origin[1], 0.0], spacing, shape: [nx, ny, 1] }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.shape[0] * (j + self.shape[1] * k)
    }

    pub fn points(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.shape[2] {
            for j in 0..self.shape[1] {
                for i in 0..self.shape[0] {
                    out.push(Vec3::new(
                        self.origin[0] + i as f64 * self.spacing,
                        self.origin[1] + j as f64 * self.spacing,
                        self.origin[2] + k as f64 * self.spacing,
                    ));
                }
            }
        }
        out
    }
}

/// Images φ(x, t₁) of seeds x placed at time t₀, with det Dφ estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFlowMap {
    pub grid: SeedGrid,
    pub t0: f64,
    pub t1: f64,
    pub seeds: Vec<Vec3>,
    pub mapped: Vec<Vec3>,
    /// Seeds whose integration aborted (typically by passing through a
    /// vorton's path); their images are the last valid positions.
    pub failed: Vec<bool>,
    /// NaN where a needed neighbor failed or the axis has one point.
    pub jacobian_det: Vec<f64>,
    dims: usize,
}

impl SampledFlowMap {
    /// CSV `x,y[,z],phi1..,det,failed`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let axes = ["x", "y", "z"];
        let mut header: Vec<String> = axes[..self.dims].iter().map(|s| s.to_string()).collect();
        header.extend((1..=self.dims).map(|i| format!("phi{i}")));
        header.push("det".into());
        header.push("failed".into());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.seeds.len() {
            let mut row: Vec<String> = (0..self.dims).map(|k| self.seeds[i][k].to_string()).collect();
            row.extend((0..self.dims).map(|k| self.mapped[i][k].to_string()));
            row.push(self.jacobian_det[i].to_string());
            row.push((self.failed[i] as u8).to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Advects the seeds from `state.t` to `t1` through the velocity field of
/// the evolving vortons. Each seed is integrated together with the vortons
/// as one system, so no interpolation in time is involved.
pub fn flow_map(state: &VortonSystem, grid: &SeedGrid, t1: f64, tol: f64) -> Result<SampledFlowMap> {
    Method::Adaptive { tol }.validate()?;
    let dims = state.spec().n;
    if dims == 2 && (grid.shape[2] != 1 || grid.origin[2] != 0.0) {
        return Err(Error::Invalid("planar kernel needs a planar seed grid".into()));
    }
    let seeds = grid.points();
    let kernel = state.kernel().clone();
    let n = state.len();
    let y_vortons = state.pack();
    let t0 = state.t;

    let results: Vec<(Vec3, bool)> = seeds
        .par_iter()
        .map(|seed| {
            let mut y0 = y_vortons.clone();
            y0.extend_from_slice(seed.as_slice());
            let sol = ode::solve(
                |_, y, dy| {
                    vortons::packed_rhs(&kernel, n, &y[..6 * n], &mut dy[..6 * n]);
                    let (p, m) = split(&y[..6 * n], n);
                    let x = Vec3::new(y[6 * n], y[6 * n + 1], y[6 * n + 2]);
                    dy[6 * n..].copy_from_slice(velocity_at(&kernel, &p, &m, &x).as_slice());
                },
                t0,
                &y0,
                &[t1],
                &Options::new(Method::Adaptive { tol }),
                |_, _| Control::Continue,
            );
            let y = &sol.last_state;
            let x = Vec3::new(y[6 * n], y[6 * n + 1], y[6 * n + 2]);
            (x, !matches!(sol.termination, Termination::Completed))
        })
        .collect();
    let (mapped, failed): (Vec<Vec3>, Vec<bool>) = results.into_iter().unzip();
    let jacobian_det = jacobian_determinants(grid, &mapped, &failed, dims);
    Ok(SampledFlowMap { grid: *grid, t0, t1, seeds, mapped, failed, jacobian_det, dims })
}

fn split(y: &[f64], n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
    let at = |i: usize| Vec3::new(y[3 * i], y[3 * i + 1], y[3 * i + 2]);
    ((0..n).map(at).collect(), (n..2 * n).map(at).collect())
}

/// Moves the vortons back by `t_star` and then maps seeds forward to the
/// original time: a finite truncation of the flow from t = −∞.
pub fn flow_map_from_past(state: &VortonSystem, grid: &SeedGrid, t_star: f64, tol: f64) -> Result<SampledFlowMap> {
    let back = vortons::integrate_at(state, &[state.t - t_star], Method::Adaptive { tol })?;
    let past = back.state(back.frames.len() - 1);
    flow_map(&past, grid, state.t, tol)
}

/// Default truncation of an infinite past for a single vorton: the time it
/// takes to travel 40 kernel lengths.
pub fn default_past_horizon(state: &VortonSystem) -> f64 {
    let eta = state.spec().eta;
    let speed = state.kappa() * state.momenta.iter().map(|m| m.norm()).fold(0.0, f64::max);
    40.0 * eta / speed.max(f64::MIN_POSITIVE)
}

fn jacobian_determinants(grid: &SeedGrid, mapped: &[Vec3], failed: &[bool], dims: usize) -> Vec<f64> {
    let [nx, ny, nz] = grid.shape;
    let h = grid.spacing;
    let mut out = vec![f64::NAN; mapped.len()];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = grid.index(i, j, k);
                let coords = [i, j, k];
                let mut jac = Mat3::identity();
                let mut ok = !failed[idx];
                for axis in 0..dims {
                    let len = grid.shape[axis];
                    if len < 2 {
                        ok = false;
                        break;
                    }
                    let mut lo = coords;
                    let mut hi = coords;
                    lo[axis] = coords[axis].saturating_sub(1);
                    hi[axis] = (coords[axis] + 1).min(len - 1);
                    let a = grid.index(lo[0], lo[1], lo[2]);
                    let b = grid.index(hi[0], hi[1], hi[2]);
                    if failed[a] || failed[b] {
                        ok = false;
                        break;
                    }
                    let span = (hi[axis] - lo[axis]) as f64 * h;
                    jac.set_column(axis, &((mapped[b] - mapped[a]) / span));
                }
                if ok {
                    out[idx] = if dims == 2 {
                        jac[(0, 0)] * jac[(1, 1)] - jac[(0, 1)] * jac[(1, 0)]
                    } else {
                        jac.determinant()
                    };
                }
            }
        }
    }
    out
}
