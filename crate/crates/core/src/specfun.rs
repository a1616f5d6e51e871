//! Modified Bessel functions of the second kind and the radial Green's
//! functions built from them: the Yukawa potential H_ε of `ε² − Δ`, the
//! Matérn family G_η^(p) of `(I − (η²/p)Δ)^p`, and its Gaussian limit.
//!
//! All profiles are radial. Ball means and radial Fourier inversion are
//! provided both as production paths and as oracles for the kernel tables.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Value of K_ν(x). `saturated` is set when the true value exceeds the
/// representable range and `value` has been clamped to `f64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselK {
    pub value: f64,
    pub saturated: bool,
}

// Taylor coefficients of 1/Γ(1+z) about z = 0.
const RGAMMA1P: [f64; 27] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_9,
    -0.042_002_635_034_095_24,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_34,
    -0.009_621_971_527_876_974,
    0.007_218_943_246_663_1,
    -0.001_165_167_591_859_065,
    -0.000_215_241_674_114_951,
    0.000_128_050_282_388_116_2,
    -2.013_485_478_078_824e-5,
    -1.250_493_482_142_671e-6,
    1.133_027_231_981_696e-6,
    -2.056_338_416_977_607e-7,
    6.116_095_104_481_416e-9,
    5.002_007_644_469_223e-9,
    -1.181_274_570_487_02e-9,
    1.043_426_711_691_1e-10,
    7.782_263_439_905_071e-12,
    -3.696_805_618_642_206e-12,
    5.100_370_287_454_476e-13,
    -2.058_326_053_566_507e-14,
    -5.348_122_539_423_018e-15,
    1.226_778_628_238_261e-15,
    -1.181_259_301_697_459e-16,
    1.186_692_254_751_6e-18,
];

/// K_ν(x) for real ν (the sign of ν is irrelevant) and x > 0.
///
/// Half-integer orders use the exact closed form and upward recurrence.
/// Other orders reduce to |μ| ≤ 1/2 and evaluate K_μ, K_{μ+1} by Temme's
/// series for x ≤ 2 or Steed's continued fraction for x > 2, then recur.
pub fn bessel_k(nu: f64, x: f64) -> Result<BesselK> {
    if !(x > 0.0) || !x.is_finite() {
        if x == f64::INFINITY {
            return Ok(BesselK { value: 0.0, saturated: false });
        }
        return Err(Error::Domain(format!("bessel_k requires x > 0, got {x}")));
    }
    if !nu.is_finite() {
        return Err(Error::Domain(format!("bessel_k order must be finite, got {nu}")));
    }
    let nu = nu.abs();
    let value = if is_half_integer(nu) { bessel_k_half_integer(nu, x) } else { bessel_k_general(nu, x) };
    if value.is_finite() {
        Ok(BesselK { value, saturated: false })
    } else {
        Ok(BesselK { value: f64::MAX, saturated: true })
    }
}

/// Convenience wrapper for callers that already validated x > 0.
pub(crate) fn kv(nu: f64, x: f64) -> f64 {
    bessel_k(nu, x).map(|b| b.value).unwrap_or(f64::NAN)
}

fn is_half_integer(nu: f64) -> bool {
    let twice = 2.0 * nu;
    twice.fract() == 0.0 && (twice as i64) % 2 == 1
}

fn bessel_k_half_integer(nu: f64, x: f64) -> f64 {
    let k_half = (FRAC_PI_2 / x).sqrt() * (-x).exp();
    let steps = (nu - 0.5).round() as usize;
    if steps == 0 {
        return k_half;
    }
    let mut lo = k_half;
    let mut hi = k_half * (1.0 + 1.0 / x);
    let mut order = 1.5;
    for _ in 1..steps {
        let next = lo + 2.0 * order / x * hi;
        lo = hi;
        hi = next;
        order += 1.0;
    }
    hi
}

fn bessel_k_general(nu: f64, x: f64) -> f64 {
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut k_mu, mut k_mu1) = if x <= 2.0 { temme_series(mu, x) } else { steed_cf2(mu, x) };
    let two_over_x = 2.0 / x;
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * two_over_x * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    k_mu
}

fn rgamma_parts(mu: f64) -> (f64, f64, f64, f64) {
    // gam1 = (1/Γ(1-μ) - 1/Γ(1+μ)) / (2μ), gam2 = (1/Γ(1-μ) + 1/Γ(1+μ)) / 2
    let mu2 = mu * mu;
    let mut even = 0.0;
    let mut odd = 0.0;
    let mut pow = 1.0;
    for pair in RGAMMA1P.chunks(2) {
        even += pair[0] * pow;
        if let Some(c) = pair.get(1) {
            odd += c * pow;
        }
        pow *= mu2;
    }
    let gampl = even + mu * odd;
    let gammi = even - mu * odd;
    (-odd, even, gampl, gammi)
}

fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < 1e-15 { 1.0 } else { pimu / pimu.sin() };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < 1e-15 { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = rgamma_parts(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    for i in 1..500 {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k_mu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}

/// Which scalar Green's function a profile describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreensKind {
    /// Green's function of ε² − Δ.
    Yukawa,
    /// Green's function of (I − (η²/p)Δ)^p.
    Matern,
    /// p → ∞ limit of the Matérn family.
    GaussianLimit,
    /// The closed form (1 + r/η) e^{−r/η} (Matérn, p = 3, n = 3).
    UnitPeakP3,
}

/// Normalization of a radial profile.
///
/// * `Operator`: the profile is the exact inverse of its operator, i.e. its
///   Fourier transform equals `(1 + η²|ξ|²/p)^{-p}` (decay length η/√p).
/// * `UnitPeak`: decay length η and value 1 at the origin.
/// * `UnitMass`: decay length η and unit integral over ℝⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Operator,
    UnitPeak,
    UnitMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreensProfile {
    pub kind: GreensKind,
    pub n: usize,
    pub eps: f64,
    pub eta: f64,
    pub p: u32,
    pub normalization: Normalization,
}

/// Surface area of the unit sphere in ℝⁿ (V₂ = 2π, V₃ = 4π).
pub fn sphere_area(n: usize) -> f64 {
    match n {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Radial scaling: G(r) = amplitude · shape(r / length).
#[derive(Debug, Clone, Copy)]
enum Shape {
    /// s^ν K_ν(s)
    Matern { nu: f64 },
    /// (1 + s) e^{-s}
    P3,
    /// e^{-s²/4}
    Gauss,
    /// Yukawa potential in closed form for the dimension.
    Yukawa,
}

impl GreensProfile {
    pub fn yukawa(n: usize, eps: f64) -> Result<Self> {
        Self::new(GreensKind::Yukawa, n, eps, 0.0, 1, Normalization::Operator)
    }

    pub fn matern(n: usize, eta: f64, p: u32, normalization: Normalization) -> Result<Self> {
        Self::new(GreensKind::Matern, n, 0.0, eta, p, normalization)
    }

    pub fn gaussian(n: usize, eta: f64, normalization: Normalization) -> Result<Self> {
        Self::new(GreensKind::GaussianLimit, n, 0.0, eta, 0, normalization)
    }

    pub fn unit_peak_p3(eta: f64) -> Result<Self> {
        Self::new(GreensKind::UnitPeakP3, 3, 0.0, eta, 3, Normalization::UnitPeak)
    }

    pub fn new(kind: GreensKind, n: usize, eps: f64, eta: f64, p: u32, normalization: Normalization) -> Result<Self> {
        let profile = Self { kind, n, eps, eta, p, normalization };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 2 && self.n != 3 {
            return Err(Error::Capability(format!("dimension {} (only 2 and 3)", self.n)));
        }
        match self.kind {
            GreensKind::Yukawa => {
                if !(self.eps > 0.0) {
                    return Err(Error::Domain("yukawa profile requires eps > 0".into()));
                }
                if self.normalization == Normalization::UnitPeak {
                    return Err(Error::Capability("yukawa profile has no finite peak".into()));
                }
            }
            GreensKind::Matern | GreensKind::GaussianLimit | GreensKind::UnitPeakP3 => {
                if !(self.eta > 0.0) {
                    return Err(Error::Domain(format!("{:?} profile requires eta > 0", self.kind)));
                }
            }
        }
        match self.kind {
            GreensKind::Matern => {
                if self.p == 0 {
                    return Err(Error::Domain("matern order p must be positive".into()));
                }
                if self.normalization == Normalization::UnitPeak && self.nu() <= 0.0 {
                    return Err(Error::Capability(format!(
                        "matern p = {} in n = {} is unbounded at the origin",
                        self.p, self.n
                    )));
                }
            }
            GreensKind::UnitPeakP3 => {
                if self.n != 3 || self.p != 3 {
                    return Err(Error::Capability("unit_peak_p3 is defined for n = 3, p = 3".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Bessel order ν = p − n/2 of the Matérn profile.
    pub fn nu(&self) -> f64 {
        self.p as f64 - self.n as f64 / 2.0
    }

    /// Decay length of the profile.
    pub fn length(&self) -> f64 {
        match self.kind {
            GreensKind::Yukawa => 1.0 / self.eps,
            GreensKind::Matern | GreensKind::UnitPeakP3 => match self.normalization {
                Normalization::Operator => self.eta / (self.p as f64).sqrt(),
                _ => self.eta,
            },
            GreensKind::GaussianLimit => self.eta,
        }
    }

    fn shape(&self) -> Shape {
        match self.kind {
            GreensKind::Yukawa => Shape::Yukawa,
            GreensKind::UnitPeakP3 => Shape::P3,
            GreensKind::Matern if self.n == 3 && self.p == 3 => Shape::P3,
            GreensKind::Matern => Shape::Matern { nu: self.nu() },
            GreensKind::GaussianLimit => Shape::Gauss,
        }
    }

    fn amplitude(&self) -> f64 {
        let n = self.n as i32;
        let ell = self.length();
        match (self.shape(), self.normalization) {
            (Shape::Yukawa, Normalization::UnitMass) => self.eps * self.eps,
            (Shape::Yukawa, _) => 1.0,
            (Shape::P3, Normalization::UnitPeak) => 1.0,
            // ∫_{ℝ³} (1+s)e^{-s} dV = 32π
            (Shape::P3, _) => 1.0 / (32.0 * PI * ell.powi(3)),
            (Shape::Gauss, Normalization::UnitPeak) => 1.0,
            (Shape::Gauss, _) => (2.0 * PI.sqrt() * ell).powi(-n),
            (Shape::Matern { nu }, Normalization::UnitPeak) => 1.0 / (2f64.powf(nu - 1.0) * gamma(nu)),
            (Shape::Matern { .. }, _) => {
                let p = self.p as f64;
                2f64.powf(1.0 - p) / gamma(p) * (2.0 * PI).powf(-(n as f64) / 2.0) * ell.powi(-n)
            }
        }
    }

    /// Value at the origin, when finite.
    pub fn peak(&self) -> Option<f64> {
        match self.shape() {
            Shape::Yukawa => None,
            Shape::P3 | Shape::Gauss => Some(self.amplitude()),
            Shape::Matern { nu } if nu > 0.0 => Some(self.amplitude() * 2f64.powf(nu - 1.0) * gamma(nu)),
            Shape::Matern { .. } => None,
        }
    }

    /// Total integral over ℝⁿ.
    pub fn mass(&self) -> f64 {
        match (self.kind, self.normalization) {
            (GreensKind::Yukawa, Normalization::UnitMass) => 1.0,
            (GreensKind::Yukawa, _) => 1.0 / (self.eps * self.eps),
            (_, Normalization::Operator) | (_, Normalization::UnitMass) => 1.0,
            (_, Normalization::UnitPeak) => {
                let unit = match self.shape() {
                    Shape::P3 => 32.0 * PI,
                    Shape::Gauss => (2.0 * PI.sqrt()).powi(self.n as i32),
                    Shape::Matern { nu } => {
                        let p = self.p as f64;
                        gamma(p) * 2f64.powf(p - 1.0) * (2.0 * PI).powf(self.n as f64 / 2.0)
                            / (2f64.powf(nu - 1.0) * gamma(nu))
                    }
                    Shape::Yukawa => unreachable!(),
                };
                unit * self.length().powi(self.n as i32)
            }
        }
    }

    /// Fourier transform of the profile at |ξ| = k.
    pub fn symbol(&self, k: f64) -> f64 {
        let scale = self.mass();
        match self.kind {
            GreensKind::Yukawa => scale * self.eps * self.eps / (self.eps * self.eps + k * k),
            GreensKind::GaussianLimit => scale * (-(self.length() * k).powi(2)).exp(),
            GreensKind::Matern | GreensKind::UnitPeakP3 => {
                let ell = self.length();
                let p = self.p as f64;
                scale * (1.0 + ell * ell * k * k).powf(-p)
            }
        }
    }

    /// G, G', G'' at radius r.
    pub fn derivatives(&self, r: f64) -> Result<[f64; 3]> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("radius must be non-negative, got {r}")));
        }
        let ell = self.length();
        let amp = self.amplitude();
        let s = r / ell;
        let [f, df, ddf] = match self.shape() {
            Shape::P3 => {
                let e = (-s).exp();
                [(1.0 + s) * e, -s * e, (s - 1.0) * e]
            }
            Shape::Gauss => {
                let e = (-0.25 * s * s).exp();
                [e, -0.5 * s * e, (0.25 * s * s - 0.5) * e]
            }
            Shape::Matern { nu } => matern_shape(nu, s)?,
            Shape::Yukawa => return self.yukawa_derivatives(r),
        };
        Ok([amp * f, amp * df / ell, amp * ddf / (ell * ell)])
    }

    fn yukawa_derivatives(&self, r: f64) -> Result<[f64; 3]> {
        if r == 0.0 {
            return Err(Error::Pole("yukawa Green's function is singular at r = 0".into()));
        }
        let amp = self.amplitude();
        let eps = self.eps;
        let z = eps * r;
        let vals = match self.n {
            3 => {
                let e = (-z).exp() / (4.0 * PI);
                [e / r, -e * (1.0 + z) / (r * r), e * (2.0 + 2.0 * z + z * z) / (r * r * r)]
            }
            _ => {
                let k0 = kv(0.0, z);
                let k1 = kv(1.0, z);
                let c = 1.0 / (2.0 * PI);
                [c * k0, -c * eps * k1, c * eps * eps * (k0 + k1 / z)]
            }
        };
        Ok([amp * vals[0], amp * vals[1], amp * vals[2]])
    }
}

/// φ(s) = s^ν K_ν(s) and its first two derivatives.
fn matern_shape(nu: f64, s: f64) -> Result<[f64; 3]> {
    if s == 0.0 || (s < 1e-8 && nu > 1.0) {
        if nu <= 0.0 {
            return Err(Error::Pole(format!("matern profile with nu = {nu} is singular at 0")));
        }
        let f0 = 2f64.powf(nu - 1.0) * gamma(nu);
        if nu > 1.0 {
            let dd0 = -2f64.powf(nu - 2.0) * gamma(nu - 1.0);
            return Ok([f0 + 0.5 * dd0 * s * s, dd0 * s, dd0]);
        }
        // cusp (ν = 1/2) or logarithmic (ν = 1) behaviour at the origin
        let df0 = if (nu - 0.5).abs() < 1e-12 { -FRAC_PI_2.sqrt() } else { 0.0 };
        return Ok([f0, df0, f64::NEG_INFINITY]);
    }
    let spow = s.powf(nu);
    let k_nu = kv(nu, s);
    let k_nu1 = kv(nu - 1.0, s);
    let k_nu2 = kv(nu - 2.0, s);
    Ok([spow * k_nu, -spow * k_nu1, spow * k_nu2 - s.powf(nu - 1.0) * k_nu1])
}

/// Radial Green's function value at radius r under the profile's
/// normalization.
pub fn green_eval(profile: &GreensProfile, r: f64) -> Result<f64> {
    Ok(profile.derivatives(r)?[0])
}

/// Mean of (1 + s) e^{-s} over the ball of radius s in ℝ³.
pub(crate) fn p3_ball_mean(s: f64) -> f64 {
    if s < 2.0 {
        // e^{-s}(1 + Σ_{k≥4} 24 s^{k-3}/k!)
        let mut term = 24.0 / 24.0;
        let mut sum = 1.0;
        let mut k = 4.0;
        loop {
            // term = 24 s^{k-3} / k!
            term *= if k == 4.0 { s } else { s / k };
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        (-s).exp() * sum
    } else {
        24.0 / (s * s * s) * (1.0 - (-s).exp() * (1.0 + s + 0.5 * s * s + s * s * s / 8.0))
    }
}

/// (1 + s) e^{-s} minus its ball mean, without cancellation at small s.
pub(crate) fn p3_value_minus_mean(s: f64) -> f64 {
    if s < 2.0 {
        // -e^{-s} Σ_{k≥5} 24 s^{k-3}/k!
        let mut term = 24.0 * s * s / 120.0;
        let mut sum = term;
        let mut k = 6.0;
        loop {
            term *= s / k;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        -(-s).exp() * sum
    } else {
        (1.0 + s) * (-s).exp() - p3_ball_mean(s)
    }
}

/// Average of the profile over the ball of radius r centred at the origin.
pub fn mean_over_ball(profile: &GreensProfile, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {r}")));
    }
    if matches!(profile.shape(), Shape::P3) {
        let ell = profile.length();
        return Ok(profile.amplitude() * p3_ball_mean(r / ell));
    }
    mean_over_ball_quadrature(profile, r)
}

/// Adaptive radial quadrature for the ball mean, regardless of closed forms.
pub fn mean_over_ball_quadrature(profile: &GreensProfile, r: f64) -> Result<f64> {
    profile.validate()?;
    let n = profile.n as i32;
    let ell = profile.length();
    if r <= 4.0 * ell {
        // Mean = n ∫₀¹ G(r t) t^{n-1} dt
        let est = quadrature::integrate(
            |t| green_eval(profile, r * t).unwrap_or(0.0) * t.powi(n - 1),
            0.0,
            1.0,
            1e-15,
            1e-13,
        );
        return Ok(n as f64 * est.value);
    }
    let mut total = 0.0;
    let mut lo = 0.0;
    let step = 2.0 * ell;
    while lo < r {
        let hi = (lo + step).min(r);
        let est =
            quadrature::integrate(|s| green_eval(profile, s).unwrap_or(0.0) * s.powi(n - 1), lo, hi, 1e-300, 1e-13);
        total += est.value;
        lo = hi;
    }
    Ok(n as f64 * total / r.powi(n))
}

/// Oscillatory weight appearing in a radial Fourier integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RadialWeight {
    /// f(r) itself.
    Value,
    /// f'(r)/r.
    DerivativeOverRadius,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

// j1(x)/x = (sin x − x cos x)/x³
fn j1_over_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45360.0
    } else {
        (x.sin() - x * x.cos()) / (x * x * x)
    }
}

fn bessel_j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        0.5 - x * x / 16.0
    } else {
        libm::j1(x) / x
    }
}

/// Inverse Fourier transform of a radial symbol f̂(|ξ|) in ℝⁿ at radius r.
///
/// n = 3 uses `(1/2π² r) ∫₀^∞ f̂(k) k sin(kr) dk`, n = 2 the Hankel form
/// `(1/2π) ∫₀^∞ f̂(k) J₀(kr) k dk`. The oscillatory tail is summed
/// half-period by half-period and accelerated with Wynn's epsilon algorithm.
pub fn radial_fourier_inverse<F: Fn(f64) -> f64>(symbol: F, n: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    radial_transform(&symbol, n, r, RadialWeight::Value)
}

pub(crate) fn radial_transform<F: Fn(f64) -> f64>(symbol: &F, n: usize, r: f64, weight: RadialWeight) -> Result<f64> {
    let (prefactor, power, phase): (f64, i32, f64) = match (n, weight) {
        (3, RadialWeight::Value) => (1.0 / (2.0 * PI * PI), 2, 0.0),
        (2, RadialWeight::Value) => (1.0 / (2.0 * PI), 1, 0.75 * PI),
        (3, RadialWeight::DerivativeOverRadius) => (-1.0 / (2.0 * PI * PI), 4, 0.5 * PI),
        (2, RadialWeight::DerivativeOverRadius) => (-1.0 / (2.0 * PI), 3, 1.25 * PI),
        _ => return Err(Error::Capability(format!("radial transform in dimension {n}"))),
    };
    let w = move |x: f64| -> f64 {
        match (n, weight) {
            (3, RadialWeight::Value) => sinc(x),
            (2, RadialWeight::Value) => libm::j0(x),
            (3, RadialWeight::DerivativeOverRadius) => j1_over_x(x),
            _ => bessel_j1_over_x(x),
        }
    };
    let integrand = |k: f64| symbol(k) * k.powi(power) * w(k * r);

    if r == 0.0 {
        return Ok(prefactor * monotone_tail_integral(&integrand)?);
    }

    let half_period = PI / r;
    let mut sums: Vec<f64> = Vec::new();
    let mut total: f64 = 0.0;
    let mut lo = 0.0;
    let mut last_estimate = f64::NAN;
    let mut stable = 0;
    let mut small_terms = 0;
    // cancellation limits the attainable accuracy to a multiple of the
    // largest partial sum
    let mut peak: f64 = 0.0;
    let max_terms = 6000;
    for j in 0..max_terms {
        let hi = if j == 0 { (phase + PI) / r } else { lo + half_period };
        let abs_tol = if j == 0 { 0.0 } else { 1e-16 * total.abs() };
        let est = quadrature::integrate_limited(&mut |k| integrand(k), lo, hi, abs_tol, 1e-13, 4000);
        if !est.value.is_finite() {
            return Err(Error::Divergence("non-finite integrand".into()));
        }
        total += est.value;
        peak = peak.max(total.abs());
        sums.push(total);
        lo = hi;

        if est.value.abs() <= 1e-16 * total.abs() || (est.value == 0.0 && total == 0.0) {
            small_terms += 1;
            if small_terms >= 3 {
                return Ok(prefactor * total);
            }
        } else {
            small_terms = 0;
        }
        if j >= 6 {
            let window = &sums[sums.len().saturating_sub(24)..];
            let (estimate, _) = quadrature::wynn_epsilon(window);
            if (estimate - last_estimate).abs() <= 1e-12 * estimate.abs() + 1e-15 * peak {
                stable += 1;
                if stable >= 3 {
                    return Ok(prefactor * estimate);
                }
            } else {
                stable = 0;
            }
            last_estimate = estimate;
        }
    }
    Err(Error::Divergence(format!("radial Fourier integral at r = {r} did not settle after {max_terms} half-periods")))
}

// ∫₀^∞ of a non-oscillating integrand, on doubling intervals.
fn monotone_tail_integral<F: Fn(f64) -> f64>(integrand: &F) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut width = 1.0;
    for _ in 0..200 {
        let est = quadrature::integrate(integrand, lo, lo + width, 0.0, 1e-13);
        total += est.value;
        if est.value.abs() <= 1e-16 * total.abs() && lo > 1.0 {
            return Ok(total);
        }
        lo += width;
        width *= 2.0;
        if !total.is_finite() {
            break;
        }
    }
    Err(Error::Divergence("radial integral at the origin does not converge".into()))
}
