//! N-vorton dynamics: geodesics whose momentum is a finite sum of point
//! momenta m_a at positions P_a,
//!
//! ```text
//! dP_a/dt = Σ_b K(P_a − P_b) m_b
//! dm_a/dt = −Σ_b ∇_x ⟨m_a, K(P_a − P_b) m_b⟩
//! E       = Σ_{a,b} ⟨m_a, K(P_a − P_b) m_b⟩
//! ```
//!
//! E as written is twice the Hamiltonian generating these equations; it is
//! reported as-is.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Mat3, RadialKernel, Vec3};
use crate::ode::{self, Control, Method, Options, Termination};

/// Phase-space state of N vortons together with their kernel.
#[derive(Debug, Clone)]
pub struct VortonSystem {
    kernel: RadialKernel,
    pub positions: Vec<Vec3>,
    pub momenta: Vec<Vec3>,
    pub t: f64,
}

/// Serializable form of a vorton state, as found in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortonData {
    pub positions: Vec<[f64; 3]>,
    pub momenta: Vec<[f64; 3]>,
    #[serde(default)]
    pub t: f64,
}

/// Energy, total momentum Σ m_a and angular momentum Σ P_a ∧ m_a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedSnapshot {
    pub energy: f64,
    pub linear_momentum: [f64; 3],
    /// Antisymmetric matrix with entries P_i m_j − P_j m_i summed over
    /// vortons, row-major.
    pub angular_momentum: [[f64; 3]; 3],
}

impl ConservedSnapshot {
    /// Angular momentum as an axial vector (n = 3) or the scalar in its
    /// third component (n = 2).
    pub fn angular_axial(&self) -> [f64; 3] {
        let w = &self.angular_momentum;
        [w[1][2], w[2][0], w[0][1]]
    }
}

impl VortonSystem {
    /// Builds a state; the kernel must be at least C¹.
    pub fn new(spec: &KernelSpec, positions: Vec<Vec3>, momenta: Vec<Vec3>) -> Result<Self> {
        let kernel = RadialKernel::new(spec)?;
        Self::with_kernel(kernel, positions, momenta)
    }

    /// Builds a state reusing an already tabulated kernel.
    pub fn with_kernel(kernel: RadialKernel, positions: Vec<Vec3>, momenta: Vec<Vec3>) -> Result<Self> {
        let spec = kernel.spec();
        if !spec.is_c1() {
            return Err(Error::Capability(format!(
                "vorton dynamics need a C¹ kernel (η > 0, p ≥ (n+3)/2); got η = {}, p = {}, n = {}",
                spec.eta, spec.p, spec.n
            )));
        }
        if positions.len() != momenta.len() {
            return Err(Error::Invalid(format!("{} positions but {} momenta", positions.len(), momenta.len())));
        }
        if positions.is_empty() {
            return Err(Error::Invalid("at least one vorton is required".into()));
        }
        if spec.n == 2 && positions.iter().chain(&momenta).any(|v| v.z != 0.0) {
            return Err(Error::Invalid("two-dimensional state with nonzero third component".into()));
        }
        if positions.iter().chain(&momenta).any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Invalid("non-finite position or momentum".into()));
        }
        Ok(Self { kernel, positions, momenta, t: 0.0 })
    }

    pub fn from_data(spec: &KernelSpec, data: &VortonData) -> Result<Self> {
        let mut s = Self::new(spec, to_vecs(&data.positions), to_vecs(&data.momenta))?;
        s.t = data.t;
        Ok(s)
    }

    pub fn to_data(&self) -> VortonData {
        VortonData {
            positions: self.positions.iter().map(|v| [v.x, v.y, v.z]).collect(),
            momenta: self.momenta.iter().map(|v| [v.x, v.y, v.z]).collect(),
            t: self.t,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spec(&self) -> &KernelSpec {
        self.kernel.spec()
    }

    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    pub fn kappa(&self) -> f64 {
        self.kernel.kappa().expect("C¹ kernels are finite at the origin")
    }

    /// Flattens to [P_0, …, P_{N−1}, m_0, …, m_{N−1}], three slots each.
    pub fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(6 * self.len());
        for v in self.positions.iter().chain(&self.momenta) {
            y.extend_from_slice(v.as_slice());
        }
        y
    }

    /// Copy of this state with phase-space coordinates taken from `y`.
    pub fn unpack(&self, t: f64, y: &[f64]) -> Self {
        let (p, m) = unpack_slices(y, self.len());
        Self { kernel: self.kernel.clone(), positions: p, momenta: m, t }
    }

    /// Negates all momenta: the time-reversed initial condition.
    pub fn reversed(&self) -> Self {
        let mut s = self.clone();
        for m in &mut s.momenta {
            *m = -*m;
        }
        s
    }
}

fn to_vecs(v: &[[f64; 3]]) -> Vec<Vec3> {
    v.iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect()
}

fn unpack_slices(y: &[f64], n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
    let at = |i: usize| Vec3::new(y[3 * i], y[3 * i + 1], y[3 * i + 2]);
    ((0..n).map(at).collect(), (n..2 * n).map(at).collect())
}

/// E = Σ_{a,b} ⟨m_a, K(P_a − P_b) m_b⟩, diagonal terms κ|m_a|² included.
pub fn system_energy(state: &VortonSystem) -> f64 {
    energy_of(&state.kernel, &state.positions, &state.momenta)
}

fn energy_of(kernel: &RadialKernel, p: &[Vec3], m: &[Vec3]) -> f64 {
    let kappa = kernel.kappa().unwrap_or(f64::NAN);
    let rows: Vec<f64> = (0..p.len())
        .into_par_iter()
        .map(|a| {
            let mut row = kappa * m[a].norm_squared();
            for b in (a + 1)..p.len() {
                row += 2.0 * pair_form(kernel, &(p[a] - p[b]), &m[a], &m[b]);
            }
            row
        })
        .collect();
    rows.iter().sum()
}

/// ⟨a, K(x) b⟩ for x ≠ 0.
fn pair_form(kernel: &RadialKernel, x: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let rho = x.norm();
    if rho == 0.0 {
        return kernel.kappa().unwrap_or(f64::NAN) * a.dot(b);
    }
    let v = kernel.eval(rho);
    let u = x / rho;
    v.k2 * a.dot(b) + v.gap * u.dot(a) * u.dot(b)
}

pub fn conserved_quantities(state: &VortonSystem) -> ConservedSnapshot {
    conserved_of(&state.kernel, &state.positions, &state.momenta)
}

fn conserved_of(kernel: &RadialKernel, p: &[Vec3], m: &[Vec3]) -> ConservedSnapshot {
    let mut lin = Vec3::zeros();
    let mut ang = Mat3::zeros();
    for (pa, ma) in p.iter().zip(m) {
        lin += ma;
        ang += pa * ma.transpose() - ma * pa.transpose();
    }
    let mut angular = [[0.0; 3]; 3];
    for (i, row) in angular.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = ang[(i, j)];
        }
    }
    ConservedSnapshot {
        energy: energy_of(kernel, p, m),
        linear_momentum: [lin.x, lin.y, lin.z],
        angular_momentum: angular,
    }
}

/// Which evaluation path [`vorton_rhs_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsPath {
    /// Scalar K₁/K₂/κ form; the production path.
    Geometric,
    /// Full matrices K(x) and D_{e_i}K(x).
    Matrix,
}

/// (dP_a/dt, dm_a/dt) for every vorton.
pub fn vorton_rhs(state: &VortonSystem) -> (Vec<Vec3>, Vec<Vec3>) {
    vorton_rhs_with(state, RhsPath::Geometric)
}

pub fn vorton_rhs_with(state: &VortonSystem, path: RhsPath) -> (Vec<Vec3>, Vec<Vec3>) {
    rhs_of(&state.kernel, &state.positions, &state.momenta, path)
}

const PARALLEL_MIN: usize = 32;

fn rhs_of(kernel: &RadialKernel, p: &[Vec3], m: &[Vec3], path: RhsPath) -> (Vec<Vec3>, Vec<Vec3>) {
    let kappa = kernel.kappa().unwrap_or(f64::NAN);
    let dims = kernel.spec().n;
    // each vorton accumulates over its partners in index order, so the
    // result does not depend on how rayon splits the outer loop
    let one = |a: usize| {
        let mut dp = m[a] * kappa;
        let mut dm = Vec3::zeros();
        for b in 0..p.len() {
            if b == a {
                continue;
            }
            let x = p[a] - p[b];
            let (v, f) = match path {
                RhsPath::Geometric => pair_geometric(kernel, &x, &m[a], &m[b]),
                RhsPath::Matrix => pair_matrix(kernel, &x, &m[a], &m[b], dims),
            };
            dp += v;
            dm -= f;
        }
        (dp, dm)
    };
    // thread dispatch costs more than a few pair sums
    let per: Vec<(Vec3, Vec3)> = if p.len() < PARALLEL_MIN {
        (0..p.len()).map(one).collect()
    } else {
        (0..p.len()).into_par_iter().map(one).collect()
    };
    per.into_iter().unzip()
}

/// K(x) b and ∇_x ⟨a, K(x) b⟩.
fn pair_geometric(kernel: &RadialKernel, x: &Vec3, a: &Vec3, b: &Vec3) -> (Vec3, Vec3) {
    let rho = x.norm();
    if rho == 0.0 {
        return (b * kernel.kappa().unwrap_or(f64::NAN), Vec3::zeros());
    }
    let v = kernel.eval(rho);
    let u = x / rho;
    let ua = u.dot(a);
    let ub = u.dot(b);
    let vel = b * v.k2 + u * (v.gap * ub);
    let a_perp = a - u * ua;
    let b_perp = b - u * ub;
    let grad = u * (v.dk2 * a.dot(b) + (v.dk1 - v.dk2) * ua * ub) + (a_perp * ub + b_perp * ua) * (v.gap / rho);
    (vel, grad)
}

fn pair_matrix(kernel: &RadialKernel, x: &Vec3, a: &Vec3, b: &Vec3, dims: usize) -> (Vec3, Vec3) {
    let k = kernel.matrix(x).expect("C¹ kernel");
    let mut grad = Vec3::zeros();
    for i in 0..dims {
        let d = kernel.directional_derivative(x, &Vec3::ith(i, 1.0)).expect("C¹ kernel");
        grad[i] = a.dot(&(d * b));
    }
    (k * b, grad)
}

/// Right-hand side on the packed state vector.
pub(crate) fn packed_rhs(kernel: &RadialKernel, n: usize, y: &[f64], dy: &mut [f64]) {
    let (p, m) = unpack_slices(y, n);
    let (dp, dm) = rhs_of(kernel, &p, &m, RhsPath::Geometric);
    for (i, v) in dp.iter().chain(&dm).enumerate() {
        dy[3 * i..3 * i + 3].copy_from_slice(v.as_slice());
    }
}

/// One sampled state of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub positions: Vec<Vec3>,
    pub momenta: Vec<Vec3>,
}

/// Largest deviation of each conserved quantity from its initial value.
///
/// Energy drift is relative to |E₀|. Momentum drifts are relative to the
/// sums of magnitudes Σ|m_a| and Σ|P_a||m_a| at t₀, which stay meaningful
/// when the totals themselves vanish.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Drift {
    pub energy: f64,
    pub linear_momentum: f64,
    pub angular_momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub spec: KernelSpec,
    pub method: Method,
    pub initial: ConservedSnapshot,
    pub drift: Drift,
    pub termination: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// max_a |m_a| over the samples, a growth diagnostic for capture orbits.
    pub max_momentum: f64,
}

/// Timestamped vorton states plus run metadata.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub meta: TrajectoryMeta,
    kernel: RadialKernel,
}

impl Trajectory {
    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    pub fn last(&self) -> &Frame {
        self.frames.last().expect("trajectories hold the initial frame")
    }

    /// The state at frame `i`.
    pub fn state(&self, i: usize) -> VortonSystem {
        let f = &self.frames[i];
        VortonSystem { kernel: self.kernel.clone(), positions: f.positions.clone(), momenta: f.momenta.clone(), t: f.t }
    }

    /// CSV with columns `t,a,P1..Pn,m1..mn`, one row per vorton per frame.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.meta.spec.n;
        let mut header = vec!["t".to_string(), "a".to_string()];
        header.extend((1..=n).map(|i| format!("P{i}")));
        header.extend((1..=n).map(|i| format!("m{i}")));
        writeln!(w, "{}", header.join(","))?;
        for f in &self.frames {
            for (a, (p, m)) in f.positions.iter().zip(&f.momenta).enumerate() {
                write!(w, "{},{}", f.t, a)?;
                for i in 0..n {
                    write!(w, ",{}", p[i])?;
                }
                for i in 0..n {
                    write!(w, ",{}", m[i])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Integrates to `state.t + duration`, sampling `samples` equally spaced
/// frames after the initial one.
pub fn integrate(state: &VortonSystem, duration: f64, method: Method, samples: usize) -> Result<Trajectory> {
    if !(duration > 0.0) {
        return Err(Error::Invalid(format!("duration must be positive, got {duration}")));
    }
    let samples = samples.max(1);
    let times: Vec<f64> = (1..=samples).map(|i| state.t + duration * i as f64 / samples as f64).collect();
    integrate_at(state, &times, method)
}

/// Integrates through the given absolute output times.
pub fn integrate_at(state: &VortonSystem, times: &[f64], method: Method) -> Result<Trajectory> {
    integrate_observed(state, times, method, |_| Control::Continue)
}

/// Like [`integrate_at`], calling `observer` after every accepted step.
/// A `Stop` ends the run normally with the stopping state as last frame.
pub fn integrate_observed<O>(state: &VortonSystem, times: &[f64], method: Method, mut observer: O) -> Result<Trajectory>
where
    O: FnMut(&Frame) -> Control,
{
    method.validate()?;
    let n = state.len();
    let kernel = state.kernel.clone();
    let y0 = state.pack();
    let opts = Options::new(method);
    let sol = ode::solve(
        |_, y, dy| packed_rhs(&kernel, n, y, dy),
        state.t,
        &y0,
        times,
        &opts,
        |t, y| {
            let (positions, momenta) = unpack_slices(y, n);
            observer(&Frame { t, positions, momenta })
        },
    );

    let mut frames = Vec::with_capacity(sol.times.len() + 2);
    frames.push(Frame { t: state.t, positions: state.positions.clone(), momenta: state.momenta.clone() });
    for (t, y) in sol.times.iter().zip(&sol.states) {
        let (positions, momenta) = unpack_slices(y, n);
        frames.push(Frame { t: *t, positions, momenta });
    }
    let ended_between = !sol.termination.is_completed() && sol.times.last() != Some(&sol.last_t);
    if ended_between {
        let (positions, momenta) = unpack_slices(&sol.last_state, n);
        frames.push(Frame { t: sol.last_t, positions, momenta });
    }

    let initial = conserved_of(&kernel, &state.positions, &state.momenta);
    let mut drift = Drift::default();
    let mut max_momentum: f64 = 0.0;
    let m_scale: f64 = state.momenta.iter().map(|m| m.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let l_scale: f64 = state
        .positions
        .iter()
        .zip(&state.momenta)
        .map(|(p, m)| p.norm() * m.norm())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    for f in &frames[1..] {
        let c = conserved_of(&kernel, &f.positions, &f.momenta);
        drift.energy =
            drift.energy.max((c.energy - initial.energy).abs() / initial.energy.abs().max(f64::MIN_POSITIVE));
        let dl: f64 = (0..3).map(|i| (c.linear_momentum[i] - initial.linear_momentum[i]).powi(2)).sum::<f64>().sqrt();
        drift.linear_momentum = drift.linear_momentum.max(dl / m_scale);
        let mut da = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                da += (c.angular_momentum[i][j] - initial.angular_momentum[i][j]).powi(2);
            }
        }
        drift.angular_momentum = drift.angular_momentum.max((0.5 * da).sqrt() / l_scale);
    }
    for f in &frames {
        for m in &f.momenta {
            max_momentum = max_momentum.max(m.norm());
        }
    }

    let traj = Trajectory {
        frames,
        meta: TrajectoryMeta {
            spec: *kernel.spec(),
            method,
            initial,
            drift,
            termination: sol.termination,
            accepted_steps: sol.accepted,
            rejected_steps: sol.rejected,
            max_momentum,
        },
        kernel,
    };
    match sol.termination {
        Termination::StepUnderflow { t } | Termination::NonFinite { t } => {
            Err(Error::NearCollision { t, partial: Box::new(traj) })
        }
        Termination::StepLimit { t } => Err(Error::Divergence(format!("step budget exhausted at t = {t}"))),
        Termination::Completed | Termination::Stopped { .. } => Ok(traj),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> KernelSpec {
        KernelSpec::unit_peak_p3(1.0)
    }

    #[test]
    fn single_vorton_energy_and_velocity() {
        let s = VortonSystem::new(&spec(), vec![Vec3::zeros()], vec![Vec3::x()]).unwrap();
        assert!((system_energy(&s) - 2.0 / 3.0).abs() < 1e-15);
        let (dp, dm) = vorton_rhs(&s);
        assert!((dp[0] - Vec3::x() * (2.0 / 3.0)).norm() < 1e-15);
        assert_eq!(dm[0], Vec3::zeros());
    }

    #[test]
    fn rejects_rough_kernels() {
        let rough = KernelSpec::smoothed(3, 1.0, 2, crate::Normalization::UnitPeak);
        assert!(matches!(VortonSystem::new(&rough, vec![Vec3::zeros()], vec![Vec3::x()]), Err(Error::Capability(_))));
    }

    #[test]
    fn geometric_and_matrix_paths_agree() {
        let s = VortonSystem::new(
            &spec(),
            vec![Vec3::new(0.1, -0.3, 0.2), Vec3::new(1.2, 0.4, -0.5), Vec3::new(-0.7, 0.9, 0.3)],
            vec![Vec3::new(0.5, 1.0, -0.2), Vec3::new(-0.3, 0.1, 0.8), Vec3::new(0.2, -0.6, 0.4)],
        )
        .unwrap();
        let (p1, m1) = vorton_rhs_with(&s, RhsPath::Geometric);
        let (p2, m2) = vorton_rhs_with(&s, RhsPath::Matrix);
        for a in 0..3 {
            assert!((p1[a] - p2[a]).norm() < 1e-13);
            assert!((m1[a] - m2[a]).norm() < 1e-13);
        }
        let total: Vec3 = m1.iter().sum();
        assert!(total.norm() < 1e-15);
    }
}
