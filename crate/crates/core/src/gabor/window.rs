use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::centered_forward;
use crate::quadrature;

/// Relative level below which window tails and spectra are treated as zero.
pub const WINDOW_EPS: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WindowKind {
    /// `e^{-π|y|²/σ²}`
    Gaussian { sigma: f64 },
    /// `exp(1 − 1/(1 − |y|²/ρ²))` on `|y| < ρ`.
    Bump { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    kind: WindowKind,
    dim: usize,
    l1: f64,
    support: f64,
    bandwidth: f64,
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

fn bump_profile(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl Window {
    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Parameter(format!("window width must be positive, got {sigma}")));
        }
        let reach = (-(WINDOW_EPS.ln()) / PI).sqrt();
        Ok(Self {
            kind: WindowKind::Gaussian { sigma },
            dim,
            l1: sigma.powi(dim as i32),
            support: reach * sigma,
            bandwidth: reach / sigma,
        })
    }

    pub fn bump(dim: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("window radius must be positive, got {radius}")));
        }
        let area = sphere_area(dim);
        let l1 = area
            * radius.powi(dim as i32)
            * quadrature::integrate(|s| s.powi(dim as i32 - 1) * bump_profile(s), 0.0, 1.0, 1e-15, 2000)?;
        Ok(Self { kind: WindowKind::Bump { radius }, dim, l1, support: radius, bandwidth: bump_bandwidth() / radius })
    }

    pub fn from_kind(dim: usize, kind: WindowKind) -> Result<Self> {
        match kind {
            WindowKind::Gaussian { sigma } => Self::gaussian(dim, sigma),
            WindowKind::Bump { radius } => Self::bump(dim, radius),
        }
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        match self.kind {
            WindowKind::Gaussian { sigma } => (-PI * r2 / (sigma * sigma)).exp(),
            WindowKind::Bump { radius } => bump_profile(r2.sqrt() / radius),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1
    }

    /// Radius outside which the window is below `WINDOW_EPS` (exactly zero for bumps).
    pub fn support_radius(&self) -> f64 {
        self.support
    }

    /// Frequency radius outside which `|ĝ| ≤ WINDOW_EPS·‖g‖_{L¹}` (per axis).
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `‖g‖_{L²}` in closed form for Gaussians, by radial quadrature for bumps.
    pub fn l2_norm(&self) -> f64 {
        match self.kind {
            WindowKind::Gaussian { sigma } => (sigma / 2f64.sqrt()).powf(self.dim as f64 / 2.0),
            WindowKind::Bump { radius } => {
                let d = self.dim as i32;
                let v = quadrature::integrate(|s| s.powi(d - 1) * bump_profile(s).powi(2), 0.0, 1.0, 1e-15, 2000)
                    .expect("smooth integrand");
                (sphere_area(self.dim) * radius.powi(d) * v).sqrt()
            }
        }
    }
}

/// Frequency beyond which the unit bump's one-dimensional transform stays
/// below `1e-14` of its mass (the roundoff floor of the sampled transform).
fn bump_bandwidth() -> f64 {
    use std::sync::OnceLock;
    static BW: OnceLock<f64> = OnceLock::new();
    *BW.get_or_init(|| {
        let n = 1 << 14;
        let h = 4.0 / n as f64;
        let mut v: Vec<Complex64> =
            (0..n).map(|j| Complex64::new(bump_profile(((j as f64) - (n / 2) as f64) * h), 0.0)).collect();
        let mass: f64 = v.iter().map(|c| c.re).sum::<f64>() * h;
        centered_forward(&mut v, n, 1, h);
        let dxi = 1.0 / (n as f64 * h);
        let mut last = 0usize;
        for (k, c) in v.iter().enumerate().skip(n / 2) {
            if c.norm() > 1e-14 * mass {
                last = k;
            }
        }
        (last - n / 2 + 1) as f64 * dxi
    })
}
