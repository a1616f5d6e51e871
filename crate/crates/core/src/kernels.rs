//! Matrix-valued kernels K_{ε,η} of the metric `(I − (η²/p)Δ)^p (I − ε⁻²∇div)`.
//!
//! Every kernel in the family is radial in the sense that at each x ≠ 0 it
//! has the eigenspaces ℝx and (ℝx)^⊥:
//!
//! ```text
//! K(x) = K₁(|x|) P_u + K₂(|x|) P_{u⊥},   u = x/|x|,      K(0) = κ I.
//! ```
//!
//! [`RadialKernel`] stores the scalar pair (K₁, K₂) and κ. The four rows of
//! the family are represented as follows:
//!
//! | ε   | η   | representation |
//! |-----|-----|----------------|
//! | 0   | 0   | rejected; served matrix-free by [`crate::spectral`] |
//! | 0   | > 0 | ball-mean formula, closed form for p = 3, n = 3 |
//! | > 0 | 0   | singular, ∂∂H_ε off the origin only |
//! | > 0 | > 0 | radial Fourier inversion of the product symbol, tabulated |
//!
//! Points live in ℝ³; two-dimensional problems use the x-y plane and the
//! kernel matrix then has a zero third row and column.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::FixedRule;
use crate::specfun::{self, GreensKind, GreensProfile, Normalization, RadialWeight};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Parameters selecting one kernel of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub n: usize,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub gaussian_limit: bool,
}

fn default_p() -> u32 {
    3
}

/// Which row of the kernel table a spec falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelClass {
    /// K_{0,0}: the Leray projection.
    Euler,
    /// K_{0,η} = G_η ∗ P_{div=0}.
    Smoothed,
    /// K_{ε,0} = δ I + ∂∂H_ε.
    Penalized,
    /// K_{ε,η} = G_η ∗ K_ε.
    Composite,
}

impl KernelSpec {
    /// K_{0,η} with the given smoothing order.
    pub fn smoothed(n: usize, eta: f64, p: u32, normalization: Normalization) -> Self {
        Self { n, eps: 0.0, eta, p, normalization, gaussian_limit: false }
    }

    /// K_{0,η}, p = 3, n = 3 with G(0) = 1, i.e. G(x) = (1 + |x|/η) e^{−|x|/η}.
    pub fn unit_peak_p3(eta: f64) -> Self {
        Self::smoothed(3, eta, 3, Normalization::UnitPeak)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 2 && self.n != 3 {
            return Err(Error::Capability(format!("dimension {} (only 2 and 3)", self.n)));
        }
        if !(self.eps >= 0.0) || !(self.eta >= 0.0) || !self.eps.is_finite() || !self.eta.is_finite() {
            return Err(Error::Invalid(format!("eps = {}, eta = {} must be finite and >= 0", self.eps, self.eta)));
        }
        if self.p == 0 && !self.gaussian_limit {
            return Err(Error::Invalid("p must be a positive integer".into()));
        }
        if let Some(profile) = self.smoothing_profile() {
            profile.validate()?;
        }
        Ok(())
    }

    pub fn class(&self) -> KernelClass {
        match (self.eps > 0.0, self.eta > 0.0) {
            (false, false) => KernelClass::Euler,
            (false, true) => KernelClass::Smoothed,
            (true, false) => KernelClass::Penalized,
            (true, true) => KernelClass::Composite,
        }
    }

    /// True when the kernel is at least C¹, which vorton dynamics require:
    /// η > 0 and p ≥ (n + 3)/2 (any p in the Gaussian limit).
    pub fn is_c1(&self) -> bool {
        self.eta > 0.0 && (self.gaussian_limit || 2 * self.p as usize >= self.n + 3)
    }

    /// The scalar smoothing profile G_η^(p), if η > 0.
    pub fn smoothing_profile(&self) -> Option<GreensProfile> {
        if !(self.eta > 0.0) {
            return None;
        }
        let kind = if self.gaussian_limit { GreensKind::GaussianLimit } else { GreensKind::Matern };
        Some(GreensProfile {
            kind,
            n: self.n,
            eps: 0.0,
            eta: self.eta,
            p: if self.gaussian_limit { 0 } else { self.p },
            normalization: self.normalization,
        })
    }

    /// Fourier multiplier of the smoothing factor, (1 + η²|ξ|²/p)^{-p} or
    /// e^{-η²|ξ|²}, scaled by the profile's mass.
    pub fn smoothing_symbol(&self, k: f64) -> f64 {
        match self.smoothing_profile() {
            Some(profile) => profile.symbol(k),
            None => 1.0,
        }
    }
}

/// K₁, K₂ and their radial derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialValues {
    pub k1: f64,
    pub k2: f64,
    pub dk1: f64,
    pub dk2: f64,
    /// K₁ − K₂, evaluated without cancellation near the origin.
    pub gap: f64,
}

/// The scalar description (K₁, K₂, κ) of a radial matrix kernel.
#[derive(Debug, Clone)]
pub struct RadialKernel {
    spec: KernelSpec,
    kappa: Option<f64>,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    /// (1+s)e^{-s} profile in ℝ³, everything analytic.
    ClosedP3 {
        amp: f64,
        ell: f64,
    },
    Smoothed(Arc<SmoothedTable>),
    Composite(Arc<CompositeTable>),
    Penalized(GreensProfile),
}

/// Builds the radial description of `spec`.
pub fn radial_pair(spec: &KernelSpec) -> Result<RadialKernel> {
    RadialKernel::new(spec)
}

impl RadialKernel {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        match spec.class() {
            KernelClass::Euler => {
                Err(Error::Capability("K_{0,0} has no finite radial form; use the spectral projection".into()))
            }
            KernelClass::Smoothed => {
                let profile = spec.smoothing_profile().expect("eta > 0");
                let peak = profile.peak().ok_or_else(|| {
                    Error::Capability(format!(
                        "smoothing profile with p = {} in n = {} is unbounded at 0",
                        spec.p, spec.n
                    ))
                })?;
                let kappa = Some(((spec.n - 1) as f64 / spec.n as f64) * peak);
                let repr = if spec.n == 3 && spec.p == 3 && !spec.gaussian_limit {
                    Repr::ClosedP3 { amp: peak, ell: profile.length() }
                } else {
                    Repr::Smoothed(Arc::new(SmoothedTable::build(profile)?))
                };
                Ok(Self { spec: *spec, kappa, repr })
            }
            KernelClass::Penalized => {
                let h = GreensProfile::yukawa(spec.n, spec.eps)?;
                Ok(Self { spec: *spec, kappa: None, repr: Repr::Penalized(h) })
            }
            KernelClass::Composite => {
                let table = CompositeTable::build(spec)?;
                let kappa = Some(table.kappa);
                Ok(Self { spec: *spec, kappa, repr: Repr::Composite(Arc::new(table)) })
            }
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Value of the kernel at the origin as a multiple of the identity;
    /// `None` for the singular rows.
    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn is_singular(&self) -> bool {
        self.kappa.is_none()
    }

    pub fn k1(&self, rho: f64) -> f64 {
        self.eval(rho).k1
    }

    pub fn k2(&self, rho: f64) -> f64 {
        self.eval(rho).k2
    }

    /// K₁, K₂, K₁', K₂' at radius ρ ≥ 0.
    pub fn eval(&self, rho: f64) -> RadialValues {
        let rho = rho.abs();
        match &self.repr {
            Repr::ClosedP3 { amp, ell } => closed_p3(*amp, *ell, rho),
            Repr::Smoothed(table) => table.eval(rho),
            Repr::Composite(table) => {
                let (k1, k2) = table.pair(rho);
                let (dk1, dk2) = if rho == 0.0 { (0.0, 0.0) } else { five_point(|r| table.pair(r), rho) };
                RadialValues { k1, k2, dk1, dk2, gap: k1 - k2 }
            }
            Repr::Penalized(h) => {
                let pair = |r: f64| -> (f64, f64) {
                    match h.derivatives(r) {
                        Ok([_, d1, d2]) => (d2, d1 / r),
                        Err(_) => (f64::NAN, f64::NAN),
                    }
                };
                let (k1, k2) = pair(rho);
                let (dk1, dk2) = five_point(pair, rho);
                RadialValues { k1, k2, dk1, dk2, gap: k1 - k2 }
            }
        }
    }

    /// K(x) = K₁ P_u + K₂ P_{u⊥}, or κ I at the origin.
    pub fn matrix(&self, x: &Vec3) -> Result<Mat3> {
        let rho = x.norm();
        let mut m = if rho == 0.0 {
            let kappa = self.kappa.ok_or_else(|| Error::Pole("singular kernel at x = 0".into()))?;
            Mat3::identity() * kappa
        } else {
            let v = self.eval(rho);
            let u = x / rho;
            Mat3::identity() * v.k2 + (u * u.transpose()) * v.gap
        };
        self.restrict(&mut m);
        Ok(m)
    }

    /// Directional derivative D_v K(x).
    pub fn directional_derivative(&self, x: &Vec3, v: &Vec3) -> Result<Mat3> {
        let rho = x.norm();
        if rho == 0.0 {
            if self.is_singular() {
                return Err(Error::Pole("singular kernel at x = 0".into()));
            }
            // K is even and C¹, so its derivative vanishes at the origin
            return Ok(Mat3::zeros());
        }
        let vals = self.eval(rho);
        let mut m = derivative_from_values(&vals, x, v);
        self.restrict(&mut m);
        Ok(m)
    }

    fn restrict(&self, m: &mut Mat3) {
        if self.spec.n == 2 {
            for i in 0..3 {
                m[(2, i)] = 0.0;
                m[(i, 2)] = 0.0;
            }
        }
    }
}

/// The rank-structured derivative formula, given K₁, K₂, K₁', K₂' at |x|.
pub(crate) fn derivative_from_values(vals: &RadialValues, x: &Vec3, v: &Vec3) -> Mat3 {
    let rho = x.norm();
    let u = x / rho;
    let along = v.dot(&u);
    let v_perp = v - u * along;
    let uu = u * u.transpose();
    uu * (vals.dk1 * along)
        + (Mat3::identity() - uu) * (vals.dk2 * along)
        + (v_perp * u.transpose() + u * v_perp.transpose()) * (vals.gap / rho)
}

pub fn kernel_matrix(kernel: &RadialKernel, x: &Vec3) -> Result<Mat3> {
    kernel.matrix(x)
}

pub fn kernel_directional_derivative(kernel: &RadialKernel, x: &Vec3, v: &Vec3) -> Result<Mat3> {
    kernel.directional_derivative(x, v)
}

fn five_point<F: Fn(f64) -> (f64, f64)>(f: F, rho: f64) -> (f64, f64) {
    let h = 1e-5 * rho.max(1.0);
    // K₁, K₂ are even in ρ; evaluate through |ρ| near the origin
    let at = |r: f64| f(r.abs());
    let (a1, a2) = at(rho - 2.0 * h);
    let (b1, b2) = at(rho - h);
    let (c1, c2) = at(rho + h);
    let (d1, d2) = at(rho + 2.0 * h);
    let denom = 12.0 * h;
    ((a1 - 8.0 * b1 + 8.0 * c1 - d1) / denom, (a2 - 8.0 * b2 + 8.0 * c2 - d2) / denom)
}

fn closed_p3(amp: f64, ell: f64, rho: f64) -> RadialValues {
    let s = rho / ell;
    let e = (-s).exp();
    let g = amp * (1.0 + s) * e;
    let dg = -amp * s * e / ell;
    let mean = amp * specfun::p3_ball_mean(s);
    if rho == 0.0 {
        let kappa = 2.0 / 3.0 * amp;
        return RadialValues { k1: kappa, k2: kappa, dk1: 0.0, dk2: 0.0, gap: 0.0 };
    }
    let value_minus_mean = amp * specfun::p3_value_minus_mean(s);
    // Mean' = (3/ρ)(G − Mean)
    let dmean = 3.0 / rho * value_minus_mean;
    RadialValues {
        gap: -value_minus_mean,
        k1: 2.0 / 3.0 * mean,
        k2: g - mean / 3.0,
        dk1: 2.0 / 3.0 * dmean,
        dk2: dg - dmean / 3.0,
    }
}

/// K₀,η for a general smoothing profile. Stores exact values and radial
/// derivatives of the ball mean and the profile on a uniform grid and
/// interpolates with cubic Hermite polynomials.
#[derive(Debug)]
struct SmoothedTable {
    profile: GreensProfile,
    n: f64,
    h: f64,
    rho_max: f64,
    /// Per node: [K₁, K₁', K₁'', K₂, K₂', K₂''].
    nodes: Vec<[f64; 6]>,
    /// ∫₀^∞ G(s) s^{n-1} ds
    radial_mass: f64,
    rule: FixedRule,
}

const SMOOTHED_NODES_PER_LENGTH: f64 = 64.0;

impl SmoothedTable {
    fn build(profile: GreensProfile) -> Result<Self> {
        let n = profile.n as f64;
        let ell = profile.length();
        let h = ell / SMOOTHED_NODES_PER_LENGTH;
        let peak = profile.peak().unwrap_or(1.0);
        // extend until the profile is negligible
        let mut rho_max = 10.0 * ell;
        while specfun::green_eval(&profile, rho_max)?.abs() > 1e-18 * peak {
            rho_max *= 1.25;
        }
        let count = (rho_max / h).ceil() as usize + 1;
        let rule = FixedRule::new(12);
        let ni = profile.n as i32;
        let segment: Vec<f64> = (0..count - 1)
            .into_par_iter()
            .map(|k| {
                let a = k as f64 * h;
                rule.integrate(|s| specfun::green_eval(&profile, s).unwrap_or(0.0) * s.powi(ni - 1), a, a + h)
            })
            .collect();
        let mut cumulative = Vec::with_capacity(count);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for s in &segment {
            acc += s;
            cumulative.push(acc);
        }
        let mut table =
            Self { profile, n, h, rho_max: (count - 1) as f64 * h, nodes: Vec::new(), radial_mass: acc, rule };
        let nodes: Vec<[f64; 6]> =
            (0..count).into_par_iter().map(|k| table.exact_node(k as f64 * h, cumulative[k])).collect();
        table.nodes = nodes;
        Ok(table)
    }

    fn mean_small(&self, rho: f64) -> (f64, f64) {
        // Mean = n ∫₀¹ G(ρt) t^{n-1} dt,  Mean' = n ∫₀¹ G'(ρt) t^n dt
        let ni = self.profile.n as i32;
        let profile = self.profile;
        let mean = self.n
            * self.rule.integrate(|t| specfun::green_eval(&profile, rho * t).unwrap_or(0.0) * t.powi(ni - 1), 0.0, 1.0);
        let dmean = self.n
            * self.rule.integrate(|t| profile.derivatives(rho * t).map(|d| d[1]).unwrap_or(0.0) * t.powi(ni), 0.0, 1.0);
        (mean, dmean)
    }

    fn exact_node(&self, rho: f64, cumulative: f64) -> [f64; 6] {
        let n = self.n;
        let [g, dg, ddg] = self.profile.derivatives(rho).unwrap_or([f64::NAN; 3]);
        if rho == 0.0 {
            let kappa = ((n - 1.0) / n) * g;
            // Mean''(0) = n/(n+2) G''(0)
            let ddmean = n / (n + 2.0) * ddg;
            return [kappa, 0.0, ((n - 1.0) / n) * ddmean, kappa, 0.0, ddg - ddmean / n];
        }
        let (mean, dmean) = if rho <= self.h {
            self.mean_small(rho)
        } else {
            let mean = n * cumulative / rho.powf(n);
            (mean, n / rho * (g - mean))
        };
        let ddmean = -n / (rho * rho) * (g - mean) + n / rho * (dg - dmean);
        [
            ((n - 1.0) / n) * mean,
            ((n - 1.0) / n) * dmean,
            ((n - 1.0) / n) * ddmean,
            g - mean / n,
            dg - dmean / n,
            ddg - ddmean / n,
        ]
    }

    fn eval(&self, rho: f64) -> RadialValues {
        let n = self.n;
        if rho >= self.rho_max {
            // profile negligible: pure far-field tail of the projection
            let mean = n * self.radial_mass / rho.powf(n);
            let dmean = -n * mean / rho;
            return RadialValues {
                gap: mean,
                k1: ((n - 1.0) / n) * mean,
                k2: -mean / n,
                dk1: ((n - 1.0) / n) * dmean,
                dk2: -dmean / n,
            };
        }
        if rho < self.h {
            if rho == 0.0 {
                let k = self.nodes[0][0];
                return RadialValues { k1: k, k2: k, dk1: 0.0, dk2: 0.0, gap: 0.0 };
            }
            let [g, dg, _] = self.profile.derivatives(rho).unwrap_or([f64::NAN; 3]);
            let (mean, dmean) = self.mean_small(rho);
            // Mean − G = −(ρ/n) Mean'
            return RadialValues {
                gap: -rho / n * dmean,
                k1: ((n - 1.0) / n) * mean,
                k2: g - mean / n,
                dk1: ((n - 1.0) / n) * dmean,
                dk2: dg - dmean / n,
            };
        }
        let k = ((rho / self.h) as usize).min(self.nodes.len() - 2);
        let t = (rho - k as f64 * self.h) / self.h;
        let a = &self.nodes[k];
        let b = &self.nodes[k + 1];
        let (k1, dk1) = quintic(&a[0..3], &b[0..3], self.h, t);
        let (k2, dk2) = quintic(&a[3..6], &b[3..6], self.h, t);
        RadialValues { k1, k2, dk1, dk2, gap: k1 - k2 }
    }
}

/// Quintic Hermite interpolant from (f, f', f'') at both ends of a cell of
/// width h; returns the value and first derivative at fraction t.
fn quintic(a: &[f64], b: &[f64], h: f64, t: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
    let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let d2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let d3 = -d0;
    let d4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let d5 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let hh = h * h;
    let value = h0 * a[0] + h * h1 * a[1] + hh * h2 * a[2] + h3 * b[0] + h * h4 * b[1] + hh * h5 * b[2];
    let slope = (d0 * a[0] + h * d1 * a[1] + hh * d2 * a[2] + d3 * b[0] + h * d4 * b[1] + hh * d5 * b[2]) / h;
    (value, slope)
}

/// K_{ε,η} with ε, η > 0, tabulated on a logarithmic radius grid from
/// radial Fourier inversion of the product symbol Ĝ(k)/(ε² + k²).
#[derive(Debug)]
struct CompositeTable {
    spec: KernelSpec,
    profile: GreensProfile,
    kappa: f64,
    log_lo: f64,
    log_step: f64,
    k1: Vec<f64>,
    k2: Vec<f64>,
}

const COMPOSITE_NODES: usize = 480;

impl CompositeTable {
    fn build(spec: &KernelSpec) -> Result<Self> {
        let profile = spec.smoothing_profile().expect("eta > 0");
        let g0 = profile
            .peak()
            .ok_or_else(|| Error::Capability("composite kernel needs a bounded smoothing profile".into()))?;
        let scale = profile.length().max(1.0 / spec.eps);
        let lo = 1e-4 * scale;
        let hi = 50.0 * scale;
        let log_lo = lo.ln();
        let log_step = (hi.ln() - log_lo) / (COMPOSITE_NODES - 1) as f64;
        let n = spec.n as f64;
        let eps2 = spec.eps * spec.eps;

        let g2_at_zero = composite_g2(spec, &profile, 0.0)?;
        let kappa = ((n - 1.0) * g0 + eps2 * g2_at_zero) / n;

        let values: Vec<Result<(f64, f64)>> = (0..COMPOSITE_NODES)
            .into_par_iter()
            .map(|i| composite_pair_direct(spec, &profile, (log_lo + i as f64 * log_step).exp()))
            .collect();
        let mut k1 = Vec::with_capacity(COMPOSITE_NODES);
        let mut k2 = Vec::with_capacity(COMPOSITE_NODES);
        for v in values {
            let (a, b) = v?;
            k1.push(a);
            k2.push(b);
        }
        Ok(Self { spec: *spec, profile, kappa, log_lo, log_step, k1, k2 })
    }

    fn pair(&self, rho: f64) -> (f64, f64) {
        if rho == 0.0 {
            return (self.kappa, self.kappa);
        }
        let t = (rho.ln() - self.log_lo) / self.log_step;
        if t < 0.0 {
            // even function: K_i(ρ) ≈ κ + c_i ρ² below the first node
            let rho0 = self.log_lo.exp();
            let w = (rho / rho0).powi(2);
            return (self.kappa + (self.k1[0] - self.kappa) * w, self.kappa + (self.k2[0] - self.kappa) * w);
        }
        let last = self.k1.len() - 1;
        if t > last as f64 {
            return composite_pair_direct(&self.spec, &self.profile, rho).unwrap_or((f64::NAN, f64::NAN));
        }
        let i = (t.floor() as usize).clamp(1, last - 2);
        let x = t - i as f64;
        (lagrange4(&self.k1[i - 1..i + 3], x), lagrange4(&self.k2[i - 1..i + 3], x))
    }
}

// cubic through nodes at -1, 0, 1, 2
fn lagrange4(y: &[f64], x: f64) -> f64 {
    let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
    let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
    let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
    let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
    l0 * y[0] + l1 * y[1] + l2 * y[2] + l3 * y[3]
}

fn composite_g2(spec: &KernelSpec, profile: &GreensProfile, rho: f64) -> Result<f64> {
    let eps2 = spec.eps * spec.eps;
    let symbol = |k: f64| profile.symbol(k) / (eps2 + k * k);
    specfun::radial_transform(&symbol, spec.n, rho, RadialWeight::Value)
}

/// Direct (untabulated) K₁, K₂ of K_{ε,η} at ρ > 0.
///
/// With g₂ = G ∗ H_ε, K = G I + ∂∂g₂; then K₂ = G + g₂'/ρ and, from the
/// trace identity G + Δg₂ = ε² g₂, K₁ = ε² g₂ − (n − 1) g₂'/ρ.
fn composite_pair_direct(spec: &KernelSpec, profile: &GreensProfile, rho: f64) -> Result<(f64, f64)> {
    let eps2 = spec.eps * spec.eps;
    let n = spec.n as f64;
    let symbol = |k: f64| profile.symbol(k) / (eps2 + k * k);
    let g2 = specfun::radial_transform(&symbol, spec.n, rho, RadialWeight::Value)?;
    let a = specfun::radial_transform(&symbol, spec.n, rho, RadialWeight::DerivativeOverRadius)?;
    let g = specfun::green_eval(profile, rho)?;
    Ok((eps2 * g2 - (n - 1.0) * a, g + a))
}

/// Direct quadrature oracle for K_{ε,η}: (K₁, K₂) at ρ > 0 without the table.
pub fn composite_pair_quadrature(spec: &KernelSpec, rho: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    if spec.class() != KernelClass::Composite {
        return Err(Error::Capability("composite quadrature needs eps > 0 and eta > 0".into()));
    }
    let profile = spec.smoothing_profile().expect("eta > 0");
    composite_pair_direct(spec, &profile, rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_kernel_is_rejected() {
        let spec = KernelSpec {
            n: 3,
            eps: 0.0,
            eta: 0.0,
            p: 3,
            normalization: Normalization::Operator,
            gaussian_limit: false,
        };
        assert!(matches!(radial_pair(&spec), Err(Error::Capability(_))));
    }

    #[test]
    fn smoothness_predicate() {
        assert!(KernelSpec::unit_peak_p3(1.0).is_c1());
        assert!(!KernelSpec::smoothed(3, 1.0, 2, Normalization::Operator).is_c1());
        assert!(KernelSpec::smoothed(2, 1.0, 3, Normalization::Operator).is_c1());
        assert!(!KernelSpec::smoothed(2, 1.0, 2, Normalization::Operator).is_c1());
        let penalized = KernelSpec { eps: 1.0, eta: 0.0, ..KernelSpec::unit_peak_p3(1.0) };
        assert!(!penalized.is_c1());
    }

    #[test]
    fn kernel_matrix_on_axis_is_diagonal() {
        let k = radial_pair(&KernelSpec::unit_peak_p3(1.0)).unwrap();
        let rho = 0.7;
        let m = k.matrix(&Vec3::new(rho, 0.0, 0.0)).unwrap();
        let v = k.eval(rho);
        let expected = Mat3::from_diagonal(&Vec3::new(v.k1, v.k2, v.k2));
        assert!((m - expected).norm() < 1e-15);
        let at_zero = k.matrix(&Vec3::zeros()).unwrap();
        assert!((at_zero - Mat3::identity() * (2.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn derivative_at_origin_is_zero() {
        let k = radial_pair(&KernelSpec::unit_peak_p3(1.0)).unwrap();
        let d = k.directional_derivative(&Vec3::zeros(), &Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(d, Mat3::zeros());
    }

    #[test]
    fn two_dimensional_matrix_has_no_third_axis() {
        let k = radial_pair(&KernelSpec::smoothed(2, 1.0, 3, Normalization::UnitPeak)).unwrap();
        let m = k.matrix(&Vec3::new(0.3, -0.4, 0.0)).unwrap();
        assert_eq!(m[(2, 2)], 0.0);
        assert_eq!(m[(0, 2)], 0.0);
    }

    #[test]
    fn smoothed_table_matches_closed_form() {
        // same p = 3, n = 3 kernel through the generic table
        let spec = KernelSpec::unit_peak_p3(1.0);
        let closed = radial_pair(&spec).unwrap();
        let table = SmoothedTable::build(spec.smoothing_profile().unwrap()).unwrap();
        for &rho in &[1e-3, 0.01, 0.013, 0.3, 1.0, 2.71, 7.5, 20.0, 60.0] {
            let a = closed.eval(rho);
            let b = table.eval(rho);
            let scale = 1.0;
            assert!((a.k1 - b.k1).abs() < 1e-10 * scale, "k1 at {rho}: {} vs {}", a.k1, b.k1);
            assert!((a.k2 - b.k2).abs() < 1e-10 * scale, "k2 at {rho}");
            assert!((a.dk1 - b.dk1).abs() < 1e-9 * scale, "dk1 at {rho}: {} vs {}", a.dk1, b.dk1);
            assert!((a.dk2 - b.dk2).abs() < 1e-9 * scale, "dk2 at {rho}: {} vs {}", a.dk2, b.dk2);
        }
    }
}
