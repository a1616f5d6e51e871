//! The two-vorton problem reduced by translations and by the conserved
//! total momentum m̄ = m₁ + m₂, in the relative variables δP = P₂ − P₁,
//! δm = m₂ − m₁:
//!
//! ```text
//! dδP/dt = (κ − K(δP)) δm
//! dδm/dt = −½ ∇ₓ(⟨m̄, K(x) m̄⟩ − ⟨δm, K(x) δm⟩) at x = δP
//! ```
//!
//! With m̄ = 0 the motion is planar and reduces further to the hyperboloid
//! 4|ω|² + ⟨δP,δm⟩² = ρ²|δm|², where ω = ½ δP ∧ δm is the conserved angular
//! momentum, ρ = |δP|.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, RadialKernel, Vec3};
use crate::ode::{self, Control, Method, Options, Termination};
use crate::vortons::VortonSystem;

/// Ratio between the reduced energy and the full two-vorton energy.
pub const REDUCED_ENERGY_FACTOR: f64 = 2.0;

/// Relative state (δP, δm) and the conserved total momentum m̄.
#[derive(Debug, Clone)]
pub struct ReducedTwoVortonState {
    kernel: RadialKernel,
    pub delta_p: Vec3,
    pub delta_m: Vec3,
    pub mbar: Vec3,
    pub t: f64,
}

/// Position of an m̄ = 0 state on the hyperboloid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperboloidPoint {
    pub rho: f64,
    /// ⟨δP, δm⟩
    pub c2: f64,
    pub dm_norm: f64,
    /// Sign of ⟨δP, δm⟩: −1 while approaching, +1 while separating.
    pub sheet_sign: f64,
    /// |ω| with ω = ½ δP ∧ δm.
    pub omega_norm: f64,
}

impl HyperboloidPoint {
    /// ρ²|δm|² − ⟨δP,δm⟩² − 4|ω|² relative to ρ²|δm|²; zero on the surface.
    pub fn constraint_residual(&self) -> f64 {
        let lhs = self.rho * self.rho * self.dm_norm * self.dm_norm;
        let rhs = self.c2 * self.c2 + 4.0 * self.omega_norm * self.omega_norm;
        (lhs - rhs) / lhs.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    Scatter,
    Capture,
}

/// Splits a two-vorton state into relative variables and total momentum.
pub fn reduce(state: &VortonSystem) -> Result<ReducedTwoVortonState> {
    if state.len() != 2 {
        return Err(Error::Arity { expected: 2, got: state.len() });
    }
    Ok(ReducedTwoVortonState {
        kernel: state.kernel().clone(),
        delta_p: state.positions[1] - state.positions[0],
        delta_m: state.momenta[1] - state.momenta[0],
        mbar: state.momenta[0] + state.momenta[1],
        t: state.t,
    })
}

impl ReducedTwoVortonState {
    pub fn new(spec: &KernelSpec, delta_p: Vec3, delta_m: Vec3, mbar: Vec3) -> Result<Self> {
        Self::with_kernel(RadialKernel::new(spec)?, delta_p, delta_m, mbar)
    }

    pub fn with_kernel(kernel: RadialKernel, delta_p: Vec3, delta_m: Vec3, mbar: Vec3) -> Result<Self> {
        if !kernel.spec().is_c1() {
            return Err(Error::Capability("two-vorton reduction needs a C¹ kernel".into()));
        }
        if kernel.spec().n == 2 && (delta_p.z != 0.0 || delta_m.z != 0.0 || mbar.z != 0.0) {
            return Err(Error::Invalid("two-dimensional state with nonzero third component".into()));
        }
        Ok(Self { kernel, delta_p, delta_m, mbar, t: 0.0 })
    }

    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    /// The m̄ = 0 state with ⟨δP,δm⟩ = `c2` and |½ δP ∧ δm| = `omega`,
    /// placed in the x-y plane with δP along the x-axis.
    pub fn planar(kernel: RadialKernel, rho: f64, c2: f64, omega: f64) -> Result<Self> {
        let delta_p = Vec3::new(rho, 0.0, 0.0);
        let delta_m = Vec3::new(c2 / rho, 2.0 * omega / rho, 0.0);
        Self::with_kernel(kernel, delta_p, delta_m, Vec3::zeros())
    }

    /// Two-vorton state with its center of position at `center`.
    pub fn reconstruct_at(&self, center: Vec3) -> Result<VortonSystem> {
        let half_p = self.delta_p * 0.5;
        let mut s = VortonSystem::with_kernel(
            self.kernel.clone(),
            vec![center - half_p, center + half_p],
            vec![(self.mbar - self.delta_m) * 0.5, (self.mbar + self.delta_m) * 0.5],
        )?;
        s.t = self.t;
        Ok(s)
    }

    /// Canonical reconstruction: center of position at the origin.
    pub fn reconstruct(&self) -> Result<VortonSystem> {
        self.reconstruct_at(Vec3::zeros())
    }

    /// ω = ½ δP ∧ δm as an axial vector (m̄ = 0 part of the angular momentum).
    pub fn omega(&self) -> Vec3 {
        self.delta_p.cross(&self.delta_m) * 0.5
    }

    pub fn hyperboloid(&self) -> HyperboloidPoint {
        let c2 = self.delta_p.dot(&self.delta_m);
        HyperboloidPoint {
            rho: self.delta_p.norm(),
            c2,
            dm_norm: self.delta_m.norm(),
            sheet_sign: if c2 < 0.0 { -1.0 } else { 1.0 },
            omega_norm: self.omega().norm(),
        }
    }

    fn pack(&self) -> [f64; 6] {
        let (p, m) = (&self.delta_p, &self.delta_m);
        [p.x, p.y, p.z, m.x, m.y, m.z]
    }

    fn unpack(&self, t: f64, y: &[f64]) -> Self {
        let mut s = self.clone();
        s.delta_p = Vec3::new(y[0], y[1], y[2]);
        s.delta_m = Vec3::new(y[3], y[4], y[5]);
        s.t = t;
        s
    }
}

/// Which form of the reduced equations to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedForm {
    /// Index form with ∂_{x_i}K_{jk} from the full matrix derivative.
    Coordinate,
    /// K₁/K₂ with the projections P_u, P_{u⊥}.
    Geometric,
}

/// (dδP/dt, dδm/dt) in the geometric form.
pub fn reduced_rhs(state: &ReducedTwoVortonState) -> (Vec3, Vec3) {
    reduced_rhs_with(state, ReducedForm::Geometric)
}

pub fn reduced_rhs_with(state: &ReducedTwoVortonState, form: ReducedForm) -> (Vec3, Vec3) {
    rhs_parts(&state.kernel, &state.delta_p, &state.delta_m, &state.mbar, form)
}

fn rhs_parts(kernel: &RadialKernel, dp: &Vec3, dm: &Vec3, mbar: &Vec3, form: ReducedForm) -> (Vec3, Vec3) {
    let kappa = kernel.kappa().unwrap_or(f64::NAN);
    let rho = dp.norm();
    if rho == 0.0 {
        // K(0) = κI and ∂K(0) = 0
        return (Vec3::zeros(), Vec3::zeros());
    }
    match form {
        ReducedForm::Coordinate => {
            let k = kernel.matrix(dp).expect("C¹ kernel");
            let mut ddm = Vec3::zeros();
            for i in 0..kernel.spec().n {
                let d = kernel.directional_derivative(dp, &Vec3::ith(i, 1.0)).expect("C¹ kernel");
                ddm[i] = -0.5 * (mbar.dot(&(d * mbar)) - dm.dot(&(d * dm)));
            }
            (dm * kappa - k * dm, ddm)
        }
        ReducedForm::Geometric => {
            let v = kernel.eval(rho);
            let u = dp / rho;
            let (mu, du) = (mbar.dot(&u), dm.dot(&u));
            let m_perp = mbar - u * mu;
            let d_perp = dm - u * du;
            let ddp = u * ((kappa - v.k1) * du) + d_perp * (kappa - v.k2);
            let radial = v.dk1 * (mu * mu - du * du) + v.dk2 * (m_perp.norm_squared() - d_perp.norm_squared());
            let ddm = -u * (0.5 * radial) - (m_perp * mu - d_perp * du) * (v.gap / rho);
            (ddp, ddm)
        }
    }
}

/// κ(|δm|² + |m̄|²) + K₁(|P_u m̄|² − |P_u δm|²) + K₂(|P_{u⊥} m̄|² − |P_{u⊥} δm|²),
/// which is [`REDUCED_ENERGY_FACTOR`] times the full two-vorton energy.
pub fn reduced_energy(state: &ReducedTwoVortonState) -> f64 {
    let kappa = state.kernel.kappa().unwrap_or(f64::NAN);
    let (dp, dm, mbar) = (&state.delta_p, &state.delta_m, &state.mbar);
    let base = kappa * (dm.norm_squared() + mbar.norm_squared());
    let rho = dp.norm();
    if rho == 0.0 {
        return base + kappa * (mbar.norm_squared() - dm.norm_squared());
    }
    let v = state.kernel.eval(rho);
    let u = dp / rho;
    let (mu, du) = (mbar.dot(&u), dm.dot(&u));
    let par = mu * mu - du * du;
    let perp = (mbar.norm_squared() - mu * mu) - (dm.norm_squared() - du * du);
    base + v.k1 * par + v.k2 * perp
}

/// m̄ = 0 energy in hyperboloid coordinates:
/// (κ − K₁)/ρ² ⟨δP,δm⟩² + 4(κ − K₂)/ρ² |ω|².
pub fn hyperboloid_energy(kernel: &RadialKernel, rho: f64, c2: f64, omega: f64) -> f64 {
    let (a, b) = hyperboloid_coefficients(kernel, rho);
    a * c2 * c2 + 4.0 * b * omega * omega
}

/// ((κ − K₁)/ρ², (κ − K₂)/ρ²), with their limits at ρ = 0.
pub fn hyperboloid_coefficients(kernel: &RadialKernel, rho: f64) -> (f64, f64) {
    let kappa = kernel.kappa().unwrap_or(f64::NAN);
    if let Some((a0, b0)) = small_rho_coefficients(kernel) {
        if rho < 1e-4 * characteristic_length(kernel) {
            return (a0, b0);
        }
    }
    let v = kernel.eval(rho);
    ((kappa - v.k1) / (rho * rho), (kappa - v.k2) / (rho * rho))
}

fn characteristic_length(kernel: &RadialKernel) -> f64 {
    kernel.spec().smoothing_profile().map(|p| p.length()).unwrap_or(1.0)
}

/// Peak amplitude and decay length of the (1 + s)e^{−s} profile, when the
/// kernel is built on it (p = 3, n = 3).
fn p3_shape(kernel: &RadialKernel) -> Option<(f64, f64)> {
    let spec = kernel.spec();
    if spec.n != 3 || spec.p != 3 || spec.gaussian_limit || spec.eps != 0.0 || !(spec.eta > 0.0) {
        return None;
    }
    let profile = spec.smoothing_profile()?;
    Some((profile.peak()?, profile.length()))
}

fn small_rho_coefficients(kernel: &RadialKernel) -> Option<(f64, f64)> {
    // K₁ = κ − (A/5)s², K₂ = κ − (2A/5)s² + O(s³), s = ρ/ℓ
    p3_shape(kernel).map(|(amp, ell)| (amp / (5.0 * ell * ell), 2.0 * amp / (5.0 * ell * ell)))
}

/// Energy at which m̄ = 0 orbits with angular momentum |ω| switch from
/// scattering to capture: (8/5)|ω|² for G = (1 + |x|)e^{−|x|}, rescaled by
/// A/ℓ² for amplitude A and decay length ℓ of the same shape.
pub fn capture_threshold(spec: &KernelSpec, omega_norm: f64) -> Result<f64> {
    let calibrated = spec.n == 3 && spec.p == 3 && !spec.gaussian_limit && spec.eps == 0.0 && spec.eta > 0.0;
    if !calibrated {
        return Err(Error::Capability(
            "the capture threshold is calibrated only for the p = 3, n = 3 smoothed kernel".into(),
        ));
    }
    let profile = spec.smoothing_profile().expect("eta > 0");
    let amp = profile.peak().expect("bounded profile");
    let ell = profile.length();
    Ok(1.6 * amp / (ell * ell) * omega_norm * omega_norm)
}

/// Capture iff E ≥ threshold (boundary counts as capture).
pub fn classify_orbit(energy: f64, omega_norm: f64, spec: &KernelSpec) -> Result<OrbitClass> {
    let threshold = capture_threshold(spec, omega_norm)?;
    Ok(if energy >= threshold { OrbitClass::Capture } else { OrbitClass::Scatter })
}

/// Sampled reduced trajectory.
#[derive(Debug, Clone)]
pub struct ReducedTrajectory {
    pub mbar: Vec3,
    pub times: Vec<f64>,
    pub delta_p: Vec<Vec3>,
    pub delta_m: Vec<Vec3>,
    pub termination: Termination,
    kernel: RadialKernel,
}

impl ReducedTrajectory {
    pub fn state(&self, i: usize) -> ReducedTwoVortonState {
        ReducedTwoVortonState {
            kernel: self.kernel.clone(),
            delta_p: self.delta_p[i],
            delta_m: self.delta_m[i],
            mbar: self.mbar,
            t: self.times[i],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV `t,dP1..,dm1..,rho,c2,dm_norm,E` with n components per vector.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.kernel.spec().n;
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("dP{i}")));
        header.extend((1..=n).map(|i| format!("dm{i}")));
        header.extend(["rho", "c2", "dm_norm", "E"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let s = self.state(i);
            let h = s.hyperboloid();
            write!(w, "{}", s.t)?;
            for k in 0..n {
                write!(w, ",{}", s.delta_p[k])?;
            }
            for k in 0..n {
                write!(w, ",{}", s.delta_m[k])?;
            }
            writeln!(w, ",{},{},{},{}", h.rho, h.c2, h.dm_norm, reduced_energy(&s))?;
        }
        Ok(())
    }
}

/// Integrates the reduced equations through the absolute times `times`.
/// `observer` sees every accepted step and may stop the run early; the
/// stopping state is appended as the last sample.
pub fn integrate_reduced<O>(
    state: &ReducedTwoVortonState,
    times: &[f64],
    method: Method,
    mut observer: O,
) -> ReducedTrajectory
where
    O: FnMut(f64, &Vec3, &Vec3) -> Control,
{
    let kernel = state.kernel.clone();
    let mbar = state.mbar;
    let sol = ode::solve(
        |_, y, dy| {
            let dp = Vec3::new(y[0], y[1], y[2]);
            let dm = Vec3::new(y[3], y[4], y[5]);
            let (a, b) = rhs_parts(&kernel, &dp, &dm, &mbar, ReducedForm::Geometric);
            dy[..3].copy_from_slice(a.as_slice());
            dy[3..].copy_from_slice(b.as_slice());
        },
        state.t,
        &state.pack(),
        times,
        &Options::new(method),
        |t, y| observer(t, &Vec3::new(y[0], y[1], y[2]), &Vec3::new(y[3], y[4], y[5])),
    );
    let mut out = ReducedTrajectory {
        mbar,
        times: vec![state.t],
        delta_p: vec![state.delta_p],
        delta_m: vec![state.delta_m],
        termination: sol.termination,
        kernel: state.kernel.clone(),
    };
    let mut push = |t: f64, y: &[f64]| {
        let s = state.unpack(t, y);
        out.times.push(t);
        out.delta_p.push(s.delta_p);
        out.delta_m.push(s.delta_m);
    };
    for (t, y) in sol.times.iter().zip(&sol.states) {
        push(*t, y);
    }
    if !sol.termination.is_completed() && sol.times.last() != Some(&sol.last_t) {
        push(sol.last_t, &sol.last_state);
    }
    out
}

/// Energy of the m̄ = 0 system on a (ρ, |δm|) grid at fixed |ω|.
///
/// Points with ρ|δm| < 2|ω| are off the hyperboloid and hold NaN. The
/// energy depends on ⟨δP,δm⟩ only through its square, so both sheets share
/// the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyContours {
    pub omega: f64,
    pub rho: Vec<f64>,
    pub dm_norm: Vec<f64>,
    /// energy[i][j] at (rho[i], dm_norm[j]).
    pub energy: Vec<Vec<f64>>,
    /// Samples of the sheet boundary ρ|δm| = 2|ω|, where ⟨δP,δm⟩ = 0.
    pub boundary: Vec<[f64; 2]>,
    /// Samples of ρ|δm| = |ω|, the curve as drawn with the factor 2
    /// absorbed into ω.
    pub boundary_half: Vec<[f64; 2]>,
}

pub fn energy_contours(
    kernel: &RadialKernel,
    omega: f64,
    rho_range: (f64, f64),
    dm_range: (f64, f64),
    shape: (usize, usize),
) -> Result<EnergyContours> {
    let (nr, nd) = shape;
    if nr < 2 || nd < 2 || !(rho_range.0 > 0.0) || rho_range.1 <= rho_range.0 || dm_range.1 <= dm_range.0 {
        return Err(Error::Invalid("contour grid needs ≥ 2 points per axis and increasing positive ranges".into()));
    }
    let lin = |r: (f64, f64), k: usize, n: usize| r.0 + (r.1 - r.0) * k as f64 / (n - 1) as f64;
    let rho: Vec<f64> = (0..nr).map(|i| lin(rho_range, i, nr)).collect();
    let dm_norm: Vec<f64> = (0..nd).map(|j| lin(dm_range, j, nd)).collect();
    let energy = rho
        .iter()
        .map(|&r| {
            let (a, b) = hyperboloid_coefficients(kernel, r);
            dm_norm
                .iter()
                .map(|&d| {
                    let c_sq = r * r * d * d - 4.0 * omega * omega;
                    if c_sq < 0.0 {
                        f64::NAN
                    } else {
                        a * c_sq + 4.0 * b * omega * omega
                    }
                })
                .collect()
        })
        .collect();
    let boundary = rho.iter().map(|&r| [r, 2.0 * omega / r]).collect();
    let boundary_half = rho.iter().map(|&r| [r, omega / r]).collect();
    Ok(EnergyContours { omega, rho, dm_norm, energy, boundary, boundary_half })
}

impl EnergyContours {
    /// CSV rows `rho,dm_norm,E`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rho,dm_norm,E")?;
        for (i, r) in self.rho.iter().enumerate() {
            for (j, d) in self.dm_norm.iter().enumerate() {
                writeln!(w, "{},{},{}", r, d, self.energy[i][j])?;
            }
        }
        Ok(())
    }
}

/// Outcome of classifying an m̄ = 0 orbit by integrating it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratedOrbit {
    pub class: OrbitClass,
    pub min_rho: f64,
    pub t_end: f64,
}

/// Settings for [`classify_by_integration`].
#[derive(Debug, Clone, Copy)]
pub struct OrbitProbe {
    /// Starting separation, in units of the kernel length.
    pub start: f64,
    /// Separation below which the orbit counts as captured, same units.
    pub capture_radius: f64,
    pub tol: f64,
    /// Integration horizon, extended in doublings up to `max_horizon`.
    pub horizon: f64,
    pub max_horizon: f64,
}

impl Default for OrbitProbe {
    fn default() -> Self {
        Self { start: 30.0, capture_radius: 1e-3, tol: 1e-10, horizon: 200.0, max_horizon: 1e5 }
    }
}

/// Sends the pair in from far away with energy `energy` and angular
/// momentum `omega` and watches what happens: the orbit scatters if
/// ⟨δP,δm⟩ turns positive (ρ passes a minimum), and is captured if ρ falls
/// below the capture radius. The horizon doubles until one of the two
/// happens.
pub fn classify_by_integration(
    kernel: &RadialKernel,
    energy: f64,
    omega: f64,
    probe: &OrbitProbe,
) -> Result<IntegratedOrbit> {
    let ell = characteristic_length(kernel);
    let rho0 = probe.start * ell;
    let (a, b) = hyperboloid_coefficients(kernel, rho0);
    let c_sq = (energy - 4.0 * b * omega * omega) / a;
    if !(c_sq > 0.0) {
        return Err(Error::Invalid(format!(
            "energy {energy} is below the centrifugal barrier at the starting separation"
        )));
    }
    let mut state = ReducedTwoVortonState::planar(kernel.clone(), rho0, -c_sq.sqrt(), omega)?;
    let capture = probe.capture_radius * ell;
    let mut min_rho = rho0;
    let mut horizon = probe.horizon;
    loop {
        let mut outcome = None;
        let traj = integrate_reduced(&state, &[state.t + horizon], Method::Adaptive { tol: probe.tol }, |t, dp, dm| {
            let rho = dp.norm();
            min_rho = min_rho.min(rho);
            if rho < capture {
                outcome = Some((OrbitClass::Capture, t));
                Control::Stop
            } else if dp.dot(dm) > 0.0 {
                outcome = Some((OrbitClass::Scatter, t));
                Control::Stop
            } else {
                Control::Continue
            }
        });
        if let Some((class, t_end)) = outcome {
            return Ok(IntegratedOrbit { class, min_rho, t_end });
        }
        match traj.termination {
            // momenta blow up as the pair spirals in
            Termination::StepUnderflow { t } | Termination::NonFinite { t } => {
                return Ok(IntegratedOrbit { class: OrbitClass::Capture, min_rho, t_end: t })
            }
            _ => {}
        }
        let last = traj.len() - 1;
        state = traj.state(last);
        horizon *= 2.0;
        if state.t > probe.max_horizon {
            return Err(Error::Divergence(format!(
                "orbit (E = {energy}, ω = {omega}) undecided after t = {}",
                state.t
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel() -> RadialKernel {
        RadialKernel::new(&KernelSpec::unit_peak_p3(1.0)).unwrap()
    }

    #[test]
    fn reduce_of_symmetric_pair() {
        let s = VortonSystem::with_kernel(
            kernel(),
            vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)],
            vec![Vec3::new(-0.5, -1.0, 0.0), Vec3::new(0.5, 1.0, 0.0)],
        )
        .unwrap();
        let r = reduce(&s).unwrap();
        assert_eq!(r.delta_p, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(r.delta_m, Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(r.mbar, Vec3::zeros());
        let back = r.reconstruct_at(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(back.positions, s.positions);
        assert_eq!(back.momenta, s.momenta);
    }

    #[test]
    fn forms_agree() {
        let s = ReducedTwoVortonState::with_kernel(
            kernel(),
            Vec3::new(0.8, -0.4, 0.3),
            Vec3::new(-1.0, 0.5, 0.2),
            Vec3::new(0.1, 0.7, -0.3),
        )
        .unwrap();
        let (a1, b1) = reduced_rhs_with(&s, ReducedForm::Geometric);
        let (a2, b2) = reduced_rhs_with(&s, ReducedForm::Coordinate);
        assert!((a1 - a2).norm() < 1e-14 && (b1 - b2).norm() < 1e-14);
    }

    #[test]
    fn threshold_and_classes() {
        let spec = KernelSpec::unit_peak_p3(1.0);
        assert_eq!(classify_orbit(2.0, 1.0, &spec).unwrap(), OrbitClass::Capture);
        assert_eq!(classify_orbit(1.0, 1.0, &spec).unwrap(), OrbitClass::Scatter);
        assert_eq!(classify_orbit(1.6, 1.0, &spec).unwrap(), OrbitClass::Capture);
        let other = KernelSpec::smoothed(3, 1.0, 4, crate::Normalization::UnitPeak);
        assert!(matches!(classify_orbit(1.0, 1.0, &other), Err(Error::Capability(_))));
    }

    #[test]
    fn contour_boundary_is_the_sheet_edge() {
        let c = energy_contours(&kernel(), 1.0, (0.5, 10.0), (0.1, 5.0), (20, 20)).unwrap();
        for [r, d] in &c.boundary {
            assert!((r * r * d * d - 4.0).abs() < 1e-12);
        }
        assert!(c.energy[0][0].is_nan());
    }
}
