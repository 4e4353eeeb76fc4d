//! Measure-type and rough potentials, represented through their Fourier
//! transforms, and the product `V u`.

use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{fft_friendly, grid_norms, strided_centers, NormRequest, Window};
use crate::grid::{forward_fourier, inverse_fourier, Domain, GridSpec, SampledField};
use crate::quadrature;
use crate::symbols::Vec3;

/// Bounded time profile `a(t)` of a separable potential `a(t) V(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Envelope {
    Const {
        #[serde(default = "one")]
        value: f64,
    },
    /// `offset + amplitude · sin(2π frequency t + phase)`
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for Envelope {
    fn default() -> Self {
        Self::Const { value: 1.0 }
    }
}

impl Envelope {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::Const { value } => value,
            Self::Sinusoid { amplitude, frequency, phase, offset } => offset + amplitude * (2.0 * PI * frequency * t + phase).sin(),
        }
    }

    /// `sup_t |a(t)|`
    pub fn sup(&self) -> f64 {
        match *self {
            Self::Const { value } => value.abs(),
            Self::Sinusoid { amplitude, offset, .. } => offset.abs() + amplitude.abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    DiracComb { points: Vec<Vec3>, weights: Vec<Complex64> },
    /// Uniform measure of total mass `mass` on the sphere `|x| = radius`.
    SphereShell { radius: f64, mass: f64 },
    /// `|x|^{−α} 1_{|x| < radius}`
    CroppedCoulomb { alpha: f64, radius: f64 },
    DensityField(SampledField),
}

/// `∫_0^ρmax` samples of a radial transform on a uniform grid, read back by
/// four-point Lagrange interpolation.
#[derive(Debug)]
struct RadialTable {
    step: f64,
    values: Vec<f64>,
}

impl RadialTable {
    fn eval(&self, rho: f64) -> f64 {
        let s = rho / self.step;
        let i = s.floor() as isize;
        let frac = s - i as f64;
        let at = |k: isize| self.values[k.unsigned_abs().min(self.values.len() - 1)];
        let (a, b, c, d) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let u = frac;
        -u * (u - 1.0) * (u - 2.0) / 6.0 * a + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * b - (u + 1.0) * u * (u - 2.0) / 2.0 * c
            + (u + 1.0) * u * (u - 1.0) / 6.0 * d
    }

    fn max_rho(&self) -> f64 {
        (self.values.len() as f64 - 3.0) * self.step
    }
}

#[derive(Debug, Clone)]
pub struct Potential {
    dim: usize,
    kind: PotentialKind,
    envelope: Envelope,
    table: Arc<RwLock<Option<Arc<RadialTable>>>>,
}

/// Area of the unit sphere in `ℝ^d`.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// Even radial kernel `K_d(s)` with `∫_{S^{d−1}} e^{−2πi ρ r ω_1} dω = |S^{d−1}| K_d(2πρr)`.
fn radial_kernel(d: usize, s: f64) -> f64 {
    match d {
        1 => s.cos(),
        2 => libm::j0(s),
        _ => {
            if s.abs() < 1e-4 {
                1.0 - s * s / 6.0
            } else {
                s.sin() / s
            }
        }
    }
}

impl Potential {
    fn build(dim: usize, kind: PotentialKind) -> Self {
        Self { dim, kind, envelope: Envelope::default(), table: Arc::new(RwLock::new(None)) }
    }

    pub fn dirac_comb(dim: usize, points: Vec<Vec3>, weights: Vec<Complex64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Parameter(format!("dimension {dim} outside 1..=3")));
        }
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::Structural("Dirac comb needs one weight per point".into()));
        }
        Ok(Self::build(dim, PotentialKind::DiracComb { points, weights }))
    }

    pub fn sphere_shell(dim: usize, radius: f64, mass: f64) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::Parameter(format!("sphere shells are supported for d = 2, 3, got {dim}")));
        }
        if !(radius > 0.0) {
            return Err(Error::Parameter(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(Self::build(dim, PotentialKind::SphereShell { radius, mass }))
    }

    pub fn cropped_coulomb(dim: usize, alpha: f64, radius: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Parameter(format!("dimension {dim} outside 1..=3")));
        }
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(Error::Parameter(format!("Coulomb exponent must lie in (0, {dim}) to be integrable, got {alpha}")));
        }
        if !(radius > 0.0) {
            return Err(Error::Parameter(format!("cut-off radius must be positive, got {radius}")));
        }
        Ok(Self::build(dim, PotentialKind::CroppedCoulomb { alpha, radius }))
    }

    pub fn density(field: SampledField) -> Result<Self> {
        if field.domain() != Domain::Space {
            return Err(Error::Structural("density potentials are given in space".into()));
        }
        Ok(Self::build(field.grid().dim(), PotentialKind::DensityField(field)))
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn envelope(&self) -> Envelope {
        self.envelope
    }

    /// Radius of a ball containing the support.
    pub fn support_radius(&self) -> f64 {
        match &self.kind {
            PotentialKind::DiracComb { points, .. } => {
                points.iter().map(|p| p[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
            }
            PotentialKind::SphereShell { radius, .. } | PotentialKind::CroppedCoulomb { radius, .. } => *radius,
            PotentialKind::DensityField(f) => 0.5 * f.grid().extent() * (self.dim as f64).sqrt(),
        }
    }

    fn coulomb_exact(&self, alpha: f64, radius: f64, rho: f64) -> Result<f64> {
        let d = self.dim;
        let df = d as f64;
        let beta = 1.0 / (df - alpha);
        let scale = sphere_area(d) * radius.powf(df - alpha) * beta;
        if rho == 0.0 {
            return Ok(scale);
        }
        let c = 2.0 * PI * rho * radius;
        let intervals = 64 + 8 * c.ceil() as usize;
        let v = quadrature::integrate(|u| radial_kernel(d, c * u.powf(beta)), 0.0, 1.0, 1e-13, intervals * 4)?;
        Ok(scale * v)
    }

    fn coulomb_table(&self, alpha: f64, radius: f64, rho_max: f64) -> Result<Arc<RadialTable>> {
        if let Some(t) = self.table.read().expect("table lock").as_ref() {
            if t.max_rho() >= rho_max {
                return Ok(Arc::clone(t));
            }
        }
        let step = 1.0 / (128.0 * radius);
        let n = (rho_max / step).ceil() as usize + 4;
        let values: Vec<f64> =
            (0..n).into_par_iter().map(|k| self.coulomb_exact(alpha, radius, k as f64 * step)).collect::<Result<_>>()?;
        let table = Arc::new(RadialTable { step, values });
        *self.table.write().expect("table lock") = Some(Arc::clone(&table));
        Ok(table)
    }

    /// Exact `V̂(ξ)` (before the time envelope). Coulomb values come from a
    /// direct radial quadrature; [`Potential::to_frequency`] uses a cached table.
    pub fn transform_at(&self, xi: &[f64]) -> Result<Complex64> {
        let d = self.dim;
        let rho = xi[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.kind {
            PotentialKind::DiracComb { points, weights } => Ok(points
                .iter()
                .zip(weights)
                .map(|(p, w)| {
                    let phase: f64 = (0..d).map(|a| xi[a] * p[a]).sum();
                    w * Complex64::from_polar(1.0, -2.0 * PI * phase)
                })
                .sum()),
            PotentialKind::SphereShell { radius, mass } => Ok(Complex64::new(mass * radial_kernel(d, 2.0 * PI * radius * rho), 0.0)),
            PotentialKind::CroppedCoulomb { alpha, radius } => Ok(Complex64::new(self.coulomb_exact(*alpha, *radius, rho)?, 0.0)),
            PotentialKind::DensityField(_) => {
                Err(Error::Structural("a sampled density has no transform off its own grid; use to_frequency".into()))
            }
        }
    }

    /// `V̂` sampled on the frequency grid.
    pub fn to_frequency(&self, grid: &GridSpec) -> Result<SampledField> {
        if grid.dim() != self.dim {
            return Err(Error::Structural("potential and grid dimensions differ".into()));
        }
        let d = self.dim;
        match &self.kind {
            PotentialKind::DensityField(f) => {
                if f.grid() != grid {
                    return Err(Error::Structural("density lives on a different grid".into()));
                }
                forward_fourier(f)
            }
            PotentialKind::CroppedCoulomb { alpha, radius } => {
                let rho_max = grid.nyquist() * (d as f64).sqrt() * 1.01;
                let table = self.coulomb_table(*alpha, *radius, rho_max)?;
                let values = (0..grid.len())
                    .into_par_iter()
                    .map(|k| {
                        let xi = grid.frequency_point(k);
                        Complex64::new(table.eval(xi[..d].iter().map(|v| v * v).sum::<f64>().sqrt()), 0.0)
                    })
                    .collect();
                SampledField::new(*grid, values, Domain::Frequency)
            }
            _ => {
                let values = (0..grid.len())
                    .into_par_iter()
                    .map(|k| self.transform_at(&grid.frequency_point(k)[..d]))
                    .collect::<Result<_>>()?;
                SampledField::new(*grid, values, Domain::Frequency)
            }
        }
    }

    /// Band-limited space sampling: the inverse transform of `V̂` on the grid.
    pub fn to_space(&self, grid: &GridSpec) -> Result<SampledField> {
        if let PotentialKind::DensityField(f) = &self.kind {
            if f.grid() != grid {
                return Err(Error::Structural("density lives on a different grid".into()));
            }
            return Ok(f.clone());
        }
        inverse_fourier(&self.to_frequency(grid)?)
    }

    /// Precomputes what [`PotentialOperator::apply_spectrum`] needs on `grid`.
    pub fn operator(&self, grid: &GridSpec) -> Result<PotentialOperator> {
        if grid.dim() != self.dim {
            return Err(Error::Structural("potential and grid dimensions differ".into()));
        }
        let d = self.dim;
        let action = match &self.kind {
            PotentialKind::DiracComb { points, weights } => {
                let phases = points
                    .iter()
                    .map(|p| {
                        (0..grid.len())
                            .map(|k| {
                                let xi = grid.frequency_point(k);
                                let phase: f64 = (0..d).map(|a| xi[a] * p[a]).sum();
                                Complex64::from_polar(1.0, -2.0 * PI * phase)
                            })
                            .collect()
                    })
                    .collect();
                let off_grid = points.iter().any(|p| {
                    (0..d).any(|a| {
                        let s = p[a] / grid.spacing();
                        (s - s.round()).abs() > 1e-12
                    })
                });
                Action::Comb { phases, weights: weights.clone(), off_grid }
            }
            _ => Action::Pointwise(self.to_space(grid)?.into_values()),
        };
        Ok(PotentialOperator { grid: *grid, envelope: self.envelope, action })
    }

    /// `a(t) V u` for a space-domain field.
    pub fn multiply(&self, t: f64, field: &SampledField) -> Result<SampledField> {
        if field.domain() != Domain::Space {
            return Err(Error::Structural("multiply expects a space-domain field".into()));
        }
        let op = self.operator(field.grid())?;
        let spec = forward_fourier(field)?;
        let out = op.apply_spectrum(t, spec.values())?;
        inverse_fourier(&SampledField::new(*field.grid(), out, Domain::Frequency)?)
    }

    /// The `p` at which `W^{p,1}` membership switches, and whether larger `p` are members.
    pub fn membership_threshold(&self) -> Option<f64> {
        let d = self.dim as f64;
        match &self.kind {
            // 1/p' > α/d  ⇔  p > d/(d − α)
            PotentialKind::CroppedCoulomb { alpha, .. } => Some(d / (d - alpha)),
            // 1/p' > (d+1)/(2d)  ⇔  p > 2d/(d − 1)
            PotentialKind::SphereShell { .. } => Some(2.0 * d / (d - 1.0)),
            PotentialKind::DiracComb { .. } => Some(f64::INFINITY),
            PotentialKind::DensityField(_) => None,
        }
    }

    /// Whether the potential lies in `W^{p,1}`, when known in closed form.
    pub fn is_member(&self, p: f64) -> Option<bool> {
        let th = self.membership_threshold()?;
        Some(if th.is_infinite() { p.is_infinite() } else { p > th })
    }
}

#[derive(Debug, Clone)]
enum Action {
    Comb { phases: Vec<Vec<Complex64>>, weights: Vec<Complex64>, off_grid: bool },
    Pointwise(Vec<Complex64>),
}

/// A potential prepared for repeated products on one grid.
#[derive(Debug, Clone)]
pub struct PotentialOperator {
    grid: GridSpec,
    envelope: Envelope,
    action: Action,
}

impl PotentialOperator {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Transform of `a(t) V u` given `û` on the frequency grid.
    ///
    /// Dirac masses use `Σ_j w_j u(x_j) e^{−2πiξ·x_j}` with `u(x_j)` from the
    /// trigonometric interpolant; other potentials multiply in space.
    pub fn apply_spectrum(&self, t: f64, u_hat: &[Complex64]) -> Result<Vec<Complex64>> {
        if u_hat.len() != self.grid.len() {
            return Err(Error::Structural("spectrum length differs from the operator grid".into()));
        }
        let a = self.envelope.at(t);
        match &self.action {
            Action::Comb { phases, weights, .. } => {
                let dxi = self.grid.frequency_cell_volume();
                let mut out = vec![Complex64::new(0.0, 0.0); u_hat.len()];
                for (ph, w) in phases.iter().zip(weights) {
                    let ux: Complex64 = u_hat.iter().zip(ph).map(|(u, e)| u * e.conj()).sum::<Complex64>() * dxi;
                    let c = w * ux * a;
                    out.iter_mut().zip(ph).for_each(|(o, e)| *o += c * e);
                }
                Ok(out)
            }
            Action::Pointwise(v) => {
                let mut u = inverse_fourier(&SampledField::new(self.grid, u_hat.to_vec(), Domain::Frequency)?)?.into_values();
                u.iter_mut().zip(v).for_each(|(x, y)| *x *= y * a);
                Ok(forward_fourier(&SampledField::new(self.grid, u, Domain::Space)?)?.into_values())
            }
        }
    }

    /// Rough error of interpolating `u` between grid points: the `FL¹` mass of
    /// `û` in the outer tenth of the band. Zero when every mass sits on the grid.
    pub fn interpolation_error(&self, u_hat: &[Complex64]) -> f64 {
        match &self.action {
            Action::Comb { off_grid: true, .. } => {
                let g = &self.grid;
                let edge = 0.9 * g.nyquist();
                let d = g.dim();
                u_hat
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| g.frequency_point(*k)[..d].iter().any(|v| v.abs() > edge))
                    .map(|(_, v)| v.norm())
                    .sum::<f64>()
                    * g.frequency_cell_volume()
            }
            _ => 0.0,
        }
    }
}

// ---------------------------------------------------------------------------
// W^{p,1} membership by band doubling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Drift below 5%.
    Stable,
    /// Drift above 20%.
    Growing,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipEstimate {
    pub p: f64,
    pub norm_coarse: f64,
    pub norm_fine: f64,
    pub drift: f64,
    pub verdict: Verdict,
    /// `p` within 0.05 of the membership threshold.
    pub borderline: bool,
    pub expected_member: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct MembershipOptions {
    /// Half-width of the analysis patch around each `x`.
    pub reach: f64,
    pub x_step: f64,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        Self { reach: 2.5, x_step: 0.5 }
    }
}

/// Discrete `W^{p,1}` norms of the potential sampled on `grid`, one per `p`.
pub fn w_p1_norms(potential: &Potential, grid: &GridSpec, window: &Window, ps: &[f64], opts: &MembershipOptions) -> Result<Vec<f64>> {
    let v = potential.to_space(grid)?;
    let (n, d, h) = (grid.points_per_axis(), grid.dim(), grid.spacing());
    let stride = ((opts.x_step / h).round() as usize).max(1);
    let r = potential.support_radius() + opts.reach;
    let centers: Vec<[usize; 3]> = strided_centers(n, d, stride)
        .into_iter()
        .filter(|c| (0..d).map(|a| grid.coordinate(c[a]).powi(2)).sum::<f64>() <= r * r)
        .collect();
    let patch = fft_friendly(2 * (opts.reach / h).ceil() as usize + 2).min(n);
    let request = NormRequest { modulation: Vec::new(), amalgam: ps.iter().map(|&p| (p, 1.0)).collect() };
    let rep = grid_norms(&v, window, &centers, patch, request)?;
    Ok(rep.amalgam.iter().map(|r| r.1).collect())
}

/// Discrete `W^{p,1}` norms on `grid` and on the grid with twice the band
/// (same period, twice the points), with the relative drift between them.
pub fn amalgam_w_p1_estimate(
    potential: &Potential,
    grid: &GridSpec,
    window: &Window,
    ps: &[f64],
    opts: &MembershipOptions,
) -> Result<Vec<MembershipEstimate>> {
    if ps.iter().any(|p| p.is_nan() || *p < 1.0) {
        return Err(Error::Parameter("Lebesgue exponents must lie in [1, inf]".into()));
    }
    let fine = GridSpec::new(grid.dim(), 2 * grid.points_per_axis(), grid.extent())?;
    let coarse = w_p1_norms(potential, grid, window, ps, opts)?;
    let refined = w_p1_norms(potential, &fine, window, ps, opts)?;
    let threshold = potential.membership_threshold();
    Ok(ps
        .iter()
        .zip(coarse.iter().zip(&refined))
        .map(|(&p, (&a, &b))| {
            let drift = (b - a).abs() / a;
            let verdict = if drift < 0.05 {
                Verdict::Stable
            } else if drift > 0.2 {
                Verdict::Growing
            } else {
                Verdict::Inconclusive
            };
            let borderline = threshold.map(|th| th.is_finite() && (p - th).abs() < 0.05).unwrap_or(false);
            MembershipEstimate {
                p,
                norm_coarse: a,
                norm_fine: b,
                drift,
                verdict: if borderline { Verdict::Inconclusive } else { verdict },
                borderline,
                expected_member: potential.is_member(p),
            }
        })
        .collect())
}

/// `max |V̂(ξ) − 2|ξ|^{−(d−1)/2} cos(2π(|ξ| − (d−1)/8))| · |ξ|^{(d+1)/2}` style
/// table over the given radii, for a sphere of unit radius.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticCheck {
    pub radii: Vec<f64>,
    /// `|V̂ − leading| · |ξ|^{(d+1)/2}`, floored at `1e−12`.
    pub scaled_residuals: Vec<f64>,
    pub max_error: f64,
    /// Max over min of the scaled residuals.
    pub spread: f64,
}

pub fn sphere_ft_asymptotic_check(potential: &Potential, radii: &[f64]) -> Result<AsymptoticCheck> {
    let PotentialKind::SphereShell { radius, .. } = potential.kind() else {
        return Err(Error::Structural("asymptotic check applies to sphere shells".into()));
    };
    if (*radius - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter("the leading term is stated for the unit sphere".into()));
    }
    if radii.is_empty() {
        return Err(Error::Parameter("no radii given".into()));
    }
    let d = potential.dim();
    let df = d as f64;
    let mut xi = [0.0; 3];
    let mut scaled = Vec::with_capacity(radii.len());
    let mut max_error: f64 = 0.0;
    for &r in radii {
        xi[0] = r;
        let v = potential.transform_at(&xi[..d])?.re;
        let lead = 2.0 * r.powf(-(df - 1.0) / 2.0) * (2.0 * PI * (r - (df - 1.0) / 8.0)).cos();
        let res = (v - lead).abs();
        max_error = max_error.max(res);
        scaled.push((res * r.powf((df + 1.0) / 2.0)).max(1e-12));
    }
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AsymptoticCheck { radii: radii.to_vec(), scaled_residuals: scaled, max_error, spread: hi / lo })
}
