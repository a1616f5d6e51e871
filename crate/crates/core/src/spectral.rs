//! Pseudo-spectral solver on the periodic square for the momentum form of
//! the geodesic equations,
//!
//! ```text
//! ∂_t m = −(v·∇)m − (div v) m − (Dv)ᵀ m,    v̂ = K̂_{ε,η}(ξ) m̂,
//! ```
//!
//! with the kernel applied exactly through its Fourier symbol. The torus
//! stands in for ℝ²; everything here is two-dimensional.
//!
//! Grids are N×N with N a power of two, stored row-major with x fastest.
//! Nonlinear terms are dealiased by the 2/3 rule and time stepping is
//! classical RK4.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelClass, KernelSpec, Mat3, Vec3};

/// A sampled planar vector field on the periodic square [0, L)².
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub resolution: usize,
    pub length: f64,
    /// Component-major; each component is row-major with x fastest.
    pub values: [Vec<f64>; 2],
}

impl GridField {
    pub fn zeros(resolution: usize, length: f64) -> Result<Self> {
        check_grid(resolution, length)?;
        let n2 = resolution * resolution;
        Ok(Self { resolution, length, values: [vec![0.0; n2], vec![0.0; n2]] })
    }

    /// Samples `f(x, y)` at the grid nodes (i·h, j·h).
    pub fn from_fn<F: Fn(f64, f64) -> [f64; 2]>(resolution: usize, length: f64, f: F) -> Result<Self> {
        let mut g = Self::zeros(resolution, length)?;
        let h = g.spacing();
        for j in 0..resolution {
            for i in 0..resolution {
                let v = f(i as f64 * h, j as f64 * h);
                g.values[0][j * resolution + i] = v[0];
                g.values[1][j * resolution + i] = v[1];
            }
        }
        Ok(g)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.resolution as f64
    }

    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        let k = j * self.resolution + i;
        [self.values[0][k], self.values[1][k]]
    }

    /// ∫ over the square of each component.
    pub fn integral(&self) -> [f64; 2] {
        let a = self.spacing().powi(2);
        [self.values[0].iter().sum::<f64>() * a, self.values[1].iter().sum::<f64>() * a]
    }

    /// ∫ u·w over the square.
    pub fn dot(&self, other: &GridField) -> f64 {
        let a = self.spacing().powi(2);
        let s: f64 = (0..2).map(|c| self.values[c].iter().zip(&other.values[c]).map(|(x, y)| x * y).sum::<f64>()).sum();
        s * a
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let n2 = self.resolution * self.resolution;
        (0..n2).map(|k| self.values[0][k].hypot(self.values[1][k])).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        let mut out = self.clone();
        for c in 0..2 {
            for (a, b) in out.values[c].iter_mut().zip(&other.values[c]) {
                *a -= b;
            }
        }
        out
    }

    /// Bilinear interpolation at an arbitrary point, periodically wrapped.
    pub fn interpolate(&self, x: f64, y: f64) -> [f64; 2] {
        let n = self.resolution;
        let h = self.spacing();
        let fx = (x / h).rem_euclid(n as f64);
        let fy = (y / h).rem_euclid(n as f64);
        let (i0, j0) = (fx.floor() as usize % n, fy.floor() as usize % n);
        let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
        let (tx, ty) = (fx - fx.floor(), fy - fy.floor());
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let v = &self.values[c];
            *o = (1.0 - ty) * ((1.0 - tx) * v[j0 * n + i0] + tx * v[j0 * n + i1])
                + ty * ((1.0 - tx) * v[j1 * n + i0] + tx * v[j1 * n + i1]);
        }
        out
    }

    /// Writes the binary grid format: magic `VLGRID01`, then little-endian
    /// u32 component count, u32 nx, u32 ny, f64 L, u8 dtype (1 = f64) and
    /// 7 padding bytes, then the f64 payload component-major, each
    /// component row-major with x fastest.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(GRID_MAGIC)?;
        let n = self.resolution as u32;
        w.write_all(&2u32.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&self.length.to_le_bytes())?;
        w.write_all(&[1u8, 0, 0, 0, 0, 0, 0, 0])?;
        for c in &self.values {
            for v in c {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Invalid(format!("grid file: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != GRID_MAGIC {
            return Err(Error::Invalid("grid file: bad magic".into()));
        }
        let mut u = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut u).map_err(io)?;
            Ok(u32::from_le_bytes(u))
        };
        let ncomp = read_u32(&mut r)?;
        let nx = read_u32(&mut r)? as usize;
        let ny = read_u32(&mut r)? as usize;
        let mut f = [0u8; 8];
        r.read_exact(&mut f).map_err(io)?;
        let length = f64::from_le_bytes(f);
        let mut tail = [0u8; 8];
        r.read_exact(&mut tail).map_err(io)?;
        if ncomp != 2 || nx != ny || tail[0] != 1 {
            return Err(Error::Invalid(format!(
                "grid file: expected 2 f64 components on a square grid, got {ncomp} components, {nx}×{ny}, dtype {}",
                tail[0]
            )));
        }
        let mut g = Self::zeros(nx, length)?;
        for c in 0..2 {
            for v in g.values[c].iter_mut() {
                r.read_exact(&mut f).map_err(io)?;
                *v = f64::from_le_bytes(f);
            }
        }
        Ok(g)
    }
}

const GRID_MAGIC: &[u8; 8] = b"VLGRID01";

fn check_grid(resolution: usize, length: f64) -> Result<()> {
    if resolution < 8 || !resolution.is_power_of_two() {
        return Err(Error::Invalid(format!("grid resolution must be a power of two ≥ 8, got {resolution}")));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Invalid(format!("box length must be positive, got {length}")));
    }
    Ok(())
}

/// K̂_{ε,η}(ξ) = Ĝ_η(|ξ|) (I − ξξᵀ/(ε² + |ξ|²)), with K̂ = I at ξ = 0 when ε = 0.
pub fn fourier_symbol(spec: &KernelSpec, xi: &Vec3) -> Mat3 {
    let k2 = xi.norm_squared();
    let smooth = spec.smoothing_symbol(k2.sqrt());
    let denom = spec.eps * spec.eps + k2;
    let mut m = Mat3::identity();
    if denom > 0.0 {
        m -= xi * xi.transpose() / denom;
    }
    m *= smooth;
    restrict(spec.n, &mut m);
    m
}

/// L̂_{ε,η}(ξ) = Ĝ_η(|ξ|)⁻¹ (I + ξξᵀ/ε²), the inverse of [`fourier_symbol`]; ε must be positive.
pub fn inverse_symbol(spec: &KernelSpec, xi: &Vec3) -> Result<Mat3> {
    if !(spec.eps > 0.0) {
        return Err(Error::Capability("the operator symbol is unbounded on gradients when ε = 0".into()));
    }
    let smooth = spec.smoothing_symbol(xi.norm());
    let mut m = (Mat3::identity() + xi * xi.transpose() / (spec.eps * spec.eps)) / smooth;
    restrict(spec.n, &mut m);
    Ok(m)
}

/// I − ξξᵀ/|ξ|², identity at ξ = 0.
pub fn leray_symbol(n: usize, xi: &Vec3) -> Mat3 {
    let k2 = xi.norm_squared();
    let mut m = Mat3::identity();
    if k2 > 0.0 {
        m -= xi * xi.transpose() / k2;
    }
    restrict(n, &mut m);
    m
}

fn restrict(n: usize, m: &mut Mat3) {
    if n == 2 {
        for i in 0..3 {
            m[(2, i)] = 0.0;
            m[(i, 2)] = 0.0;
        }
    }
}

/// Removes the gradient part of a field: applies I − ξξᵀ/|ξ|² per mode.
pub fn project_div_free(field: &GridField) -> Result<GridField> {
    let fft = Fft2::new(field.resolution);
    let waves = Wavenumbers::new(field.resolution, field.length);
    let (mut a, mut b) = fft.forward_pair(&field.values[0], &field.values[1]);
    for k in 0..a.len() {
        // Nyquist wavenumbers count as zero so the result stays real
        let (kx, ky) = waves.deriv(k);
        let k2 = kx * kx + ky * ky;
        if k2 > 0.0 {
            let dot = (a[k] * kx + b[k] * ky) / k2;
            a[k] -= dot * kx;
            b[k] -= dot * ky;
        }
    }
    let (x, y) = fft.inverse_pair(&a, &b);
    Ok(GridField { resolution: field.resolution, length: field.length, values: [x, y] })
}

/// Spectral divergence, sampled on the grid.
pub fn divergence(field: &GridField) -> Vec<f64> {
    let fft = Fft2::new(field.resolution);
    let waves = Wavenumbers::new(field.resolution, field.length);
    let (mut a, b) = fft.forward_pair(&field.values[0], &field.values[1]);
    for k in 0..a.len() {
        let (kx, ky) = waves.deriv(k);
        a[k] = I * (a[k] * kx + b[k] * ky);
    }
    fft.inverse_pair(&a, &vec![Complex64::new(0.0, 0.0); a.len()]).0
}

/// Spectral scalar curl ∂ₓu₂ − ∂ᵧu₁, sampled on the grid.
pub fn curl(field: &GridField) -> Vec<f64> {
    let fft = Fft2::new(field.resolution);
    let waves = Wavenumbers::new(field.resolution, field.length);
    let (mut a, b) = fft.forward_pair(&field.values[0], &field.values[1]);
    for k in 0..a.len() {
        let (kx, ky) = waves.deriv(k);
        a[k] = I * (b[k] * kx - a[k] * ky);
    }
    fft.inverse_pair(&a, &vec![Complex64::new(0.0, 0.0); a.len()]).0
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// 2D FFT on N×N complex arrays built from 1D transforms along rows.
#[derive(Clone)]
struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        plan.process(buf);
        transpose(buf, self.n);
        plan.process(buf);
        transpose(buf, self.n);
        if inverse {
            let scale = 1.0 / (self.n * self.n) as f64;
            for z in buf.iter_mut() {
                *z *= scale;
            }
        }
    }

    /// Spectra of two real fields from one complex transform.
    fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.transform(&mut z, false);
        let mut fa = vec![Complex64::new(0.0, 0.0); n * n];
        let mut fb = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let jm = (n - j) % n;
            for i in 0..n {
                let im = (n - i) % n;
                let zk = z[j * n + i];
                let zc = z[jm * n + im].conj();
                fa[j * n + i] = (zk + zc) * 0.5;
                fb[j * n + i] = (zk - zc) * Complex64::new(0.0, -0.5);
            }
        }
        (fa, fb)
    }

    /// Two real fields from Hermitian spectra with one complex transform.
    fn inverse_pair(&self, fa: &[Complex64], fb: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<Complex64> = fa.iter().zip(fb).map(|(&x, &y)| x + I * y).collect();
        self.transform(&mut z, true);
        (z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for j in 0..n {
        for i in (j + 1)..n {
            buf.swap(j * n + i, i * n + j);
        }
    }
}

/// Angular wavenumbers of the N×N grid.
#[derive(Debug, Clone)]
struct Wavenumbers {
    n: usize,
    k: Vec<f64>,
    /// Same as `k` with the Nyquist entry zeroed, for odd derivatives.
    kd: Vec<f64>,
    /// 2/3-rule mask.
    keep: Vec<bool>,
}

impl Wavenumbers {
    fn new(n: usize, length: f64) -> Self {
        let base = 2.0 * PI / length;
        let signed = |i: usize| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        let k: Vec<f64> = (0..n).map(|i| base * signed(i)).collect();
        let kd: Vec<f64> = (0..n).map(|i| if i == n / 2 { 0.0 } else { base * signed(i) }).collect();
        let cut = n / 3;
        let keep: Vec<bool> = (0..n).map(|i| signed(i).abs() <= cut as f64 && i != n / 2).collect();
        Self { n, k, kd, keep }
    }

    fn at(&self, idx: usize) -> (f64, f64) {
        (self.k[idx % self.n], self.k[idx / self.n])
    }

    fn deriv(&self, idx: usize) -> (f64, f64) {
        (self.kd[idx % self.n], self.kd[idx / self.n])
    }

    fn kept(&self, idx: usize) -> bool {
        self.keep[idx % self.n] && self.keep[idx / self.n]
    }

    /// Largest retained |ξ| along an axis.
    fn max_kept(&self) -> f64 {
        self.k.iter().zip(&self.keep).filter(|(_, &k)| k).map(|(v, _)| v.abs()).fold(0.0, f64::max)
    }
}

/// Momentum field held in Fourier space.
#[derive(Debug, Clone)]
pub struct SpectralState {
    pub t: f64,
    m_hat: [Vec<Complex64>; 2],
}

/// Time stepper for one kernel on one grid.
#[derive(Clone)]
pub struct Solver {
    spec: KernelSpec,
    resolution: usize,
    length: f64,
    fft: Fft2,
    waves: Wavenumbers,
    /// Per mode: the symbol entries (K₁₁, K₁₂, K₂₂).
    symbol: Vec<[f64; 3]>,
    pub cfl: f64,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver")
            .field("spec", &self.spec)
            .field("resolution", &self.resolution)
            .field("length", &self.length)
            .finish()
    }
}

impl Solver {
    pub fn new(spec: &KernelSpec, resolution: usize, length: f64) -> Result<Self> {
        spec.validate()?;
        if spec.n != 2 {
            return Err(Error::Capability("the spectral solver is two-dimensional".into()));
        }
        check_grid(resolution, length)?;
        let waves = Wavenumbers::new(resolution, length);
        let symbol = (0..resolution * resolution)
            .map(|idx| {
                let (kx, ky) = waves.at(idx);
                let m = fourier_symbol(spec, &Vec3::new(kx, ky, 0.0));
                [m[(0, 0)], m[(0, 1)], m[(1, 1)]]
            })
            .collect();
        Ok(Self { spec: *spec, resolution, length, fft: Fft2::new(resolution), waves, symbol, cfl: 0.5 })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn check_field(&self, f: &GridField) -> Result<()> {
        if f.resolution != self.resolution || (f.length - self.length).abs() > 1e-12 * self.length {
            return Err(Error::Invalid(format!(
                "field grid {}² on L = {} does not match solver grid {}² on L = {}",
                f.resolution, f.length, self.resolution, self.length
            )));
        }
        Ok(())
    }

    /// Dealiased spectral state of a momentum field.
    pub fn state(&self, m: &GridField) -> Result<SpectralState> {
        self.check_field(m)?;
        let (mut a, mut b) = self.fft.forward_pair(&m.values[0], &m.values[1]);
        self.dealias(&mut a, &mut b);
        Ok(SpectralState { t: 0.0, m_hat: [a, b] })
    }

    /// Momentum m = L v for a divergence-free velocity. With ε = 0 the
    /// operator acts on divergence-free fields as the smoothing factor alone.
    pub fn momentum_from_velocity(&self, v: &GridField) -> Result<SpectralState> {
        self.check_field(v)?;
        let (mut a, mut b) = self.fft.forward_pair(&v.values[0], &v.values[1]);
        for idx in 0..a.len() {
            let (kx, ky) = self.waves.at(idx);
            let xi = Vec3::new(kx, ky, 0.0);
            let s = self.spec.smoothing_symbol(xi.norm());
            if self.spec.eps > 0.0 {
                let l = inverse_symbol(&self.spec, &xi)?;
                let (x, y) = (a[idx], b[idx]);
                a[idx] = x * l[(0, 0)] + y * l[(0, 1)];
                b[idx] = x * l[(1, 0)] + y * l[(1, 1)];
            } else {
                a[idx] /= s;
                b[idx] /= s;
            }
        }
        self.dealias(&mut a, &mut b);
        Ok(SpectralState { t: 0.0, m_hat: [a, b] })
    }

    fn dealias(&self, a: &mut [Complex64], b: &mut [Complex64]) {
        for idx in 0..a.len() {
            if !self.waves.kept(idx) {
                a[idx] = Complex64::new(0.0, 0.0);
                b[idx] = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn apply_symbol(&self, m_hat: &[Vec<Complex64>; 2]) -> [Vec<Complex64>; 2] {
        let mut a = m_hat[0].clone();
        let mut b = m_hat[1].clone();
        for (idx, s) in self.symbol.iter().enumerate() {
            let (x, y) = (m_hat[0][idx], m_hat[1][idx]);
            a[idx] = x * s[0] + y * s[1];
            b[idx] = x * s[1] + y * s[2];
        }
        [a, b]
    }

    fn to_grid(&self, pair: &[Vec<Complex64>; 2]) -> GridField {
        let (x, y) = self.fft.inverse_pair(&pair[0], &pair[1]);
        GridField { resolution: self.resolution, length: self.length, values: [x, y] }
    }

    pub fn momentum(&self, s: &SpectralState) -> GridField {
        self.to_grid(&s.m_hat)
    }

    pub fn velocity(&self, s: &SpectralState) -> GridField {
        self.to_grid(&self.apply_symbol(&s.m_hat))
    }

    /// Energy ∫ v·m, conserved by the exact flow.
    pub fn energy(&self, s: &SpectralState) -> f64 {
        let v = self.apply_symbol(&s.m_hat);
        let mut sum = 0.0;
        for c in 0..2 {
            for (a, b) in v[c].iter().zip(&s.m_hat[c]) {
                sum += (a.conj() * b).re;
            }
        }
        sum * self.parseval()
    }

    /// ∫ |v|².
    pub fn kinetic_energy(&self, s: &SpectralState) -> f64 {
        let v = self.apply_symbol(&s.m_hat);
        let sum: f64 = v.iter().flat_map(|c| c.iter().map(|z| z.norm_sqr())).sum();
        sum * self.parseval()
    }

    /// ∫ m, the total linear momentum.
    pub fn total_momentum(&self, s: &SpectralState) -> [f64; 2] {
        let a = self.length * self.length / (self.resolution * self.resolution) as f64;
        [s.m_hat[0][0].re * a, s.m_hat[1][0].re * a]
    }

    // ∫|u|² = L²/N⁴ Σ|û|² for the unnormalized forward transform
    fn parseval(&self) -> f64 {
        let n2 = (self.resolution * self.resolution) as f64;
        self.length * self.length / (n2 * n2)
    }

    /// Largest stable step for the current velocity.
    pub fn stable_dt(&self, s: &SpectralState) -> f64 {
        let vmax = self.velocity(s).max_abs();
        self.cfl * self.length / self.resolution as f64 / vmax.max(f64::MIN_POSITIVE)
    }

    /// dm̂/dt; also returns max |v| on the grid.
    fn rhs(&self, m_hat: &[Vec<Complex64>; 2]) -> ([Vec<Complex64>; 2], f64) {
        let n2 = self.resolution * self.resolution;
        let v_hat = self.apply_symbol(m_hat);
        let (v1, v2) = self.fft.inverse_pair(&v_hat[0], &v_hat[1]);
        let (m1, m2) = self.fft.inverse_pair(&m_hat[0], &m_hat[1]);
        let deriv = |f: &[Complex64], axis: usize| -> Vec<Complex64> {
            f.iter()
                .enumerate()
                .map(|(idx, z)| {
                    let (kx, ky) = self.waves.deriv(idx);
                    z * I * if axis == 0 { kx } else { ky }
                })
                .collect()
        };
        let (d1x, d1y) = self.fft.inverse_pair(&deriv(&v_hat[0], 0), &deriv(&v_hat[0], 1));
        let (d2x, d2y) = self.fft.inverse_pair(&deriv(&v_hat[1], 0), &deriv(&v_hat[1], 1));

        // flux F_ij = v_j m_i, so −(v·∇)m − (div v)m = −div(F)
        let mut f11 = vec![0.0; n2];
        let mut f12 = vec![0.0; n2];
        let mut f21 = vec![0.0; n2];
        let mut f22 = vec![0.0; n2];
        let mut g1 = vec![0.0; n2];
        let mut g2 = vec![0.0; n2];
        let mut vmax: f64 = 0.0;
        for k in 0..n2 {
            f11[k] = v1[k] * m1[k];
            f12[k] = v2[k] * m1[k];
            f21[k] = v1[k] * m2[k];
            f22[k] = v2[k] * m2[k];
            // (Dv)ᵀ m
            g1[k] = m1[k] * d1x[k] + m2[k] * d2x[k];
            g2[k] = m1[k] * d1y[k] + m2[k] * d2y[k];
            vmax = vmax.max(v1[k].hypot(v2[k]));
        }
        let (h11, h12) = self.fft.forward_pair(&f11, &f12);
        let (h21, h22) = self.fft.forward_pair(&f21, &f22);
        let (hg1, hg2) = self.fft.forward_pair(&g1, &g2);
        let mut out1 = vec![Complex64::new(0.0, 0.0); n2];
        let mut out2 = vec![Complex64::new(0.0, 0.0); n2];
        for idx in 0..n2 {
            if !self.waves.kept(idx) {
                continue;
            }
            let (kx, ky) = self.waves.deriv(idx);
            out1[idx] = -I * (h11[idx] * kx + h12[idx] * ky) - hg1[idx];
            out2[idx] = -I * (h21[idx] * kx + h22[idx] * ky) - hg2[idx];
        }
        ([out1, out2], vmax)
    }

    /// One RK4 step. Rejected with a suggested step when dt exceeds the
    /// CFL bound of the current velocity.
    pub fn step(&self, s: &mut SpectralState, dt: f64) -> Result<()> {
        let (k1, vmax) = self.rhs(&s.m_hat);
        let limit = self.cfl * self.length / self.resolution as f64 / vmax.max(f64::MIN_POSITIVE);
        if dt > limit {
            return Err(Error::Cfl { dt, suggested: limit });
        }
        let shifted = |k: &[Vec<Complex64>; 2], f: f64| -> [Vec<Complex64>; 2] {
            let mut out = s.m_hat.clone();
            for c in 0..2 {
                for (o, d) in out[c].iter_mut().zip(&k[c]) {
                    *o += d * f;
                }
            }
            out
        };
        let (k2, _) = self.rhs(&shifted(&k1, 0.5 * dt));
        let (k3, _) = self.rhs(&shifted(&k2, 0.5 * dt));
        let (k4, _) = self.rhs(&shifted(&k3, dt));
        for c in 0..2 {
            for idx in 0..s.m_hat[c].len() {
                s.m_hat[c][idx] += (k1[c][idx] + 2.0 * k2[c][idx] + 2.0 * k3[c][idx] + k4[c][idx]) * (dt / 6.0);
            }
        }
        s.t += dt;
        Ok(())
    }

    /// Advances to `t_end` in equal steps no longer than `dt`, calling
    /// `observe` after each step.
    pub fn advance<O: FnMut(&SpectralState)>(
        &self,
        s: &mut SpectralState,
        t_end: f64,
        dt: f64,
        mut observe: O,
    ) -> Result<()> {
        let span = t_end - s.t;
        if span <= 0.0 {
            return Ok(());
        }
        let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for i in 0..steps {
            self.step(s, h)?;
            if i + 1 == steps {
                s.t = t_end;
            }
            observe(s);
        }
        Ok(())
    }

    /// Discrete Hᵏ norm (∫ Σ(1 + |ξ|²)ᵏ |û|²)^{1/2} of a grid field.
    pub fn hk_norm(&self, f: &GridField, k: i32) -> f64 {
        let (a, b) = self.fft.forward_pair(&f.values[0], &f.values[1]);
        let mut sum = 0.0;
        for idx in 0..a.len() {
            let (kx, ky) = self.waves.at(idx);
            sum += (1.0 + kx * kx + ky * ky).powi(k) * (a[idx].norm_sqr() + b[idx].norm_sqr());
        }
        (sum * self.parseval()).sqrt()
    }
}

/// One explicit RK4 step of the momentum equation from a physical-space
/// momentum field.
pub fn momentum_step(m: &GridField, spec: &KernelSpec, dt: f64) -> Result<GridField> {
    let solver = Solver::new(spec, m.resolution, m.length)?;
    let mut s = solver.state(m)?;
    solver.step(&mut s, dt)?;
    Ok(solver.momentum(&s))
}

/// Named initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridPreset {
    /// Two Gaussian vortices of opposite sign, given as a velocity field.
    VortexPair {
        #[serde(default = "default_pair_sigma")]
        sigma: f64,
        #[serde(default = "default_pair_separation")]
        separation: f64,
        #[serde(default = "default_pair_strength")]
        strength: f64,
    },
    /// Elliptical shielded vortex: the momentum ∇⊥ψ of a Gaussian stream
    /// function ψ centred in the box.
    SingleBlob {
        #[serde(default = "default_blob_a")]
        a: f64,
        #[serde(default = "default_blob_b")]
        b: f64,
        #[serde(default = "default_blob_amplitude")]
        amplitude: f64,
    },
}

fn default_pair_sigma() -> f64 {
    0.35
}
fn default_pair_separation() -> f64 {
    1.2
}
fn default_pair_strength() -> f64 {
    5.0
}
fn default_blob_a() -> f64 {
    0.6
}
fn default_blob_b() -> f64 {
    0.4
}
fn default_blob_amplitude() -> f64 {
    1.0
}

impl GridPreset {
    pub fn vortex_pair() -> Self {
        GridPreset::VortexPair {
            sigma: default_pair_sigma(),
            separation: default_pair_separation(),
            strength: default_pair_strength(),
        }
    }

    pub fn single_blob() -> Self {
        GridPreset::SingleBlob { a: default_blob_a(), b: default_blob_b(), amplitude: default_blob_amplitude() }
    }

    /// Samples the preset. The vortex pair yields a divergence-free
    /// velocity; the blob yields a momentum field, which is also
    /// divergence-free.
    pub fn sample(&self, resolution: usize, length: f64) -> Result<GridField> {
        match *self {
            GridPreset::VortexPair { sigma, separation, strength } => {
                vortex_pair_velocity(resolution, length, sigma, separation, strength)
            }
            GridPreset::SingleBlob { a, b, amplitude } => {
                let c = 0.5 * length;
                GridField::from_fn(resolution, length, |x, y| blob_momentum(x - c, y - c, a, b, amplitude))
            }
        }
    }
}

/// Momentum ∇⊥ψ = (∂ᵧψ, −∂ₓψ) of ψ = A exp(−(x²/a² + y²/b²)/2).
pub fn blob_momentum(x: f64, y: f64, a: f64, b: f64, amplitude: f64) -> [f64; 2] {
    let psi = amplitude * (-0.5 * (x * x / (a * a) + y * y / (b * b))).exp();
    [-y / (b * b) * psi, x / (a * a) * psi]
}

fn vortex_pair_velocity(
    resolution: usize,
    length: f64,
    sigma: f64,
    separation: f64,
    strength: f64,
) -> Result<GridField> {
    let c = 0.5 * length;
    let centers = [(c - 0.5 * separation, c, strength), (c + 0.5 * separation, c, -strength)];
    // periodized Gaussian vorticity
    let w = GridField::from_fn(resolution, length, |x, y| {
        let mut s = 0.0;
        for &(cx, cy, a) in &centers {
            for di in -1..=1 {
                for dj in -1..=1 {
                    let dx = x - cx + di as f64 * length;
                    let dy = y - cy + dj as f64 * length;
                    s += a * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                }
            }
        }
        [s, 0.0]
    })?;
    let fft = Fft2::new(resolution);
    let waves = Wavenumbers::new(resolution, length);
    let (w_hat, _) = fft.forward_pair(&w.values[0], &w.values[1]);
    let mut a = vec![Complex64::new(0.0, 0.0); w_hat.len()];
    let mut b = a.clone();
    for idx in 0..w_hat.len() {
        let (kx, ky) = waves.at(idx);
        let (dx, dy) = waves.deriv(idx);
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            continue;
        }
        let psi = w_hat[idx] / k2;
        a[idx] = I * dy * psi;
        b[idx] = -I * dx * psi;
    }
    let (u, v) = fft.inverse_pair(&a, &b);
    Ok(GridField { resolution, length, values: [u, v] })
}

/// Which parameter a convergence study varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyParameter {
    /// Vary ε at fixed η against the ε = 0 run.
    Eps,
    /// Vary η at fixed ε against the η = 0 run.
    Eta,
}

/// Setup of one convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceStudy {
    pub parameter: StudyParameter,
    /// The value of the parameter that is held fixed.
    pub fixed: f64,
    /// Values of the varied parameter, typically x, x/2, x/4.
    pub values: Vec<f64>,
    #[serde(default = "default_p3")]
    pub p: u32,
    pub horizon: f64,
    pub dt: f64,
    /// Sobolev index of the discrete Hᵏ norm.
    #[serde(default = "default_hk")]
    pub k: i32,
}

fn default_p3() -> u32 {
    3
}
fn default_hk() -> i32 {
    2
}

impl ConvergenceStudy {
    fn spec(&self, value: f64) -> KernelSpec {
        let (eps, eta) = match self.parameter {
            StudyParameter::Eps => (value, self.fixed),
            StudyParameter::Eta => (self.fixed, value),
        };
        KernelSpec { n: 2, eps, eta, p: self.p, normalization: Default::default(), gaussian_limit: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub value: f64,
    pub error_l2: f64,
    pub error_hk: f64,
    /// Order from this row and the previous one, log(e₀/e₁)/log(x₀/x₁).
    pub order_l2: Option<f64>,
    pub order_hk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub study: ConvergenceStudy,
    pub resolution: usize,
    pub length: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log error against log parameter.
    pub order_l2: f64,
    pub order_hk: f64,
    /// Max − min of the successive-pair orders (L² norm).
    pub spread_l2: f64,
    /// Relative energy drift of the reference run.
    pub reference_energy_drift: f64,
}

impl ConvergenceReport {
    /// CSV `value,error_l2,error_hk,order_estimate` (order from the L² errors).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let name = match self.study.parameter {
            StudyParameter::Eps => "eps",
            StudyParameter::Eta => "eta",
        };
        writeln!(w, "{name},error_l2,error_hk,order_estimate")?;
        for r in &self.rows {
            let order = r.order_l2.map(|o| o.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.value, r.error_l2, r.error_hk, order)?;
        }
        Ok(())
    }
}

/// Evolves the same initial velocity under each kernel of the schedule and
/// under the reference kernel (varied parameter = 0), and measures how the
/// velocity difference at the horizon shrinks with the parameter.
pub fn convergence_experiment(initial_velocity: &GridField, study: &ConvergenceStudy) -> Result<ConvergenceReport> {
    if study.values.len() < 2 {
        return Err(Error::Invalid("a convergence study needs at least two parameter values".into()));
    }
    if study.values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Invalid("study parameter values must be positive".into()));
    }
    if !(study.horizon > 0.0) || !(study.dt > 0.0) {
        return Err(Error::Invalid("horizon and dt must be positive".into()));
    }
    let n = initial_velocity.resolution;
    let length = initial_velocity.length;
    let waves = Wavenumbers::new(n, length);
    let k_min = 2.0 * PI / length;
    let k_max = waves.max_kept() * std::f64::consts::SQRT_2;
    for &value in &study.values {
        let spec = study.spec(value);
        // the varied factor must differ from the reference somewhere on the grid
        let effect = match study.parameter {
            StudyParameter::Eps => value * value / (value * value + k_min * k_min),
            StudyParameter::Eta => {
                1.0 - spec.smoothing_symbol(k_max) / spec.smoothing_profile().map(|p| p.symbol(0.0)).unwrap_or(1.0)
            }
        };
        if effect < 1e-8 {
            return Err(Error::Resolution(format!(
                "{:?} = {value} changes the symbol by only {effect:.1e} on a {n}² grid of period {length}",
                study.parameter
            )));
        }
        if study.parameter == StudyParameter::Eta
            && spec.smoothing_profile().map(|p| p.length()).unwrap_or(0.0) * k_max > 1e6
        {
            return Err(Error::Resolution(format!("η = {value} is far below the grid scale")));
        }
    }
    let reference_spec = study.spec(0.0);
    if reference_spec.class() == KernelClass::Euler && study.parameter == StudyParameter::Eta {
        // fine: Euler reference for the smoothing study at ε = 0
    }
    let run = |spec: &KernelSpec| -> Result<(GridField, f64)> {
        let solver = Solver::new(spec, n, length)?;
        let mut s = solver.momentum_from_velocity(initial_velocity)?;
        let e0 = solver.energy(&s);
        let mut drift: f64 = 0.0;
        solver.advance(&mut s, study.horizon, study.dt, |st| {
            drift = drift.max((solver.energy(st) - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
        })?;
        Ok((solver.velocity(&s), drift))
    };
    let (reference, reference_energy_drift) = run(&reference_spec)?;
    let norm_solver = Solver::new(&reference_spec, n, length)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(study.values.len());
    for &value in &study.values {
        let (v, _) = run(&study.spec(value))?;
        let diff = v.sub(&reference);
        let error_l2 = diff.l2_norm();
        let error_hk = norm_solver.hk_norm(&diff, study.k);
        let (order_l2, order_hk) = match rows.last() {
            Some(prev) => {
                let r = (prev.value / value).ln();
                (Some((prev.error_l2 / error_l2).ln() / r), Some((prev.error_hk / error_hk).ln() / r))
            }
            None => (None, None),
        };
        rows.push(ConvergenceRow { value, error_l2, error_hk, order_l2, order_hk });
    }
    let fit = |pick: fn(&ConvergenceRow) -> f64| {
        let xs: Vec<f64> = rows.iter().map(|r| r.value.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| pick(r).ln()).collect();
        least_squares_slope(&xs, &ys)
    };
    let pair_orders: Vec<f64> = rows.iter().filter_map(|r| r.order_l2).collect();
    let spread_l2 = pair_orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - pair_orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ConvergenceReport {
        study: study.clone(),
        resolution: n,
        length,
        order_l2: fit(|r| r.error_l2),
        order_hk: fit(|r| r.error_hk),
        rows,
        spread_l2,
        reference_energy_drift,
    })
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
