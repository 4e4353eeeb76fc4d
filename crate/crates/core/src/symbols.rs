//! Homogeneous dispersion symbols `μ`, their near-origin smoothing `μ̃`, and
//! the derived objects used elsewhere: Fresnel fields `e^{2πi t μ}`, the
//! Euler / gradient / cone diagnostics and the `A^m` seminorms.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledField};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub type Profile = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Anything that can act as a phase: value, gradient and Hessian everywhere.
pub trait Dispersion: Send + Sync {
    fn dim(&self) -> usize;
    fn degree(&self) -> f64;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec3;
    fn hessian(&self, x: &[f64]) -> Mat3;
    /// `μ(Rx) = μ(x)` for every rotation `R`.
    fn is_radial(&self) -> bool {
        false
    }
}

#[derive(Clone)]
pub enum SymbolKind {
    RadialPower,
    /// `½ Qx·x`, `Q` row-major `d×d`.
    QuadraticForm { q: Vec<f64> },
    /// `Σ ε_j |x_j|^m`.
    AnisotropicPower { signs: Vec<f64> },
    /// `|x|^m p(x/|x|)` with `p` a profile on the unit sphere.
    Custom { profile: Profile },
}

impl fmt::Debug for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RadialPower => write!(f, "RadialPower"),
            Self::QuadraticForm { q } => write!(f, "QuadraticForm({q:?})"),
            Self::AnisotropicPower { signs } => write!(f, "AnisotropicPower({signs:?})"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HomogeneousSymbol {
    dim: usize,
    m: f64,
    kind: SymbolKind,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("dimension {d} outside 1..=3")))
    }
}

fn det(h: &Mat3, d: usize) -> f64 {
    match d {
        1 => h[0][0],
        2 => h[0][0] * h[1][1] - h[0][1] * h[1][0],
        _ => {
            h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
                + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0])
        }
    }
}

impl HomogeneousSymbol {
    pub fn radial_power(dim: usize, m: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(m >= 2.0 && m.is_finite()) {
            return Err(Error::Parameter(format!("degree must be >= 2, got {m}")));
        }
        Ok(Self { dim, m, kind: SymbolKind::RadialPower })
    }

    /// `|x|^m` with `1 < m < 2`. Only meaningful for diagnostics: the cone
    /// inequality fails for these degrees and they are rejected by the solver.
    pub fn radial_power_subquadratic(dim: usize, m: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(m > 1.0 && m < 2.0) {
            return Err(Error::Parameter(format!("sub-quadratic degree must lie in (1,2), got {m}")));
        }
        Ok(Self { dim, m, kind: SymbolKind::RadialPower })
    }

    pub fn quadratic_form(dim: usize, q: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if q.len() != dim * dim {
            return Err(Error::Structural(format!("Q needs {} entries, got {}", dim * dim, q.len())));
        }
        let mut h = [[0.0; 3]; 3];
        for i in 0..dim {
            for j in 0..dim {
                if (q[i * dim + j] - q[j * dim + i]).abs() > 1e-14 * (1.0 + q[i * dim + j].abs()) {
                    return Err(Error::Parameter("Q must be symmetric".into()));
                }
                h[i][j] = q[i * dim + j];
            }
        }
        if det(&h, dim).abs() < 1e-12 {
            return Err(Error::Parameter("Q must be invertible".into()));
        }
        Ok(Self { dim, m: 2.0, kind: SymbolKind::QuadraticForm { q } })
    }

    pub fn anisotropic_power(m: f64, signs: Vec<f64>) -> Result<Self> {
        let dim = signs.len();
        check_dim(dim)?;
        if !(m >= 2.0 && m.fract() == 0.0 && (m as i64) % 2 == 0) {
            return Err(Error::Parameter(format!("anisotropic degree must be an even integer, got {m}")));
        }
        if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(Error::Parameter("anisotropic signs must be +1 or -1".into()));
        }
        Ok(Self { dim, m, kind: SymbolKind::AnisotropicPower { signs } })
    }

    pub fn custom(dim: usize, m: f64, profile: Profile) -> Result<Self> {
        check_dim(dim)?;
        if !(m >= 2.0 && m.is_finite()) {
            return Err(Error::Parameter(format!("degree must be >= 2, got {m}")));
        }
        Ok(Self { dim, m, kind: SymbolKind::Custom { profile } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> f64 {
        self.m
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    /// True when `μ` is a polynomial, hence smooth through the origin.
    pub fn is_polynomial(&self) -> bool {
        match &self.kind {
            SymbolKind::QuadraticForm { .. } | SymbolKind::AnisotropicPower { .. } => true,
            SymbolKind::RadialPower => self.m.fract() == 0.0 && (self.m as i64) % 2 == 0,
            SymbolKind::Custom { .. } => false,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Structural(format!("point has {} coordinates, symbol is {}-dimensional", x.len(), self.dim)));
        }
        if norm(x) == 0.0 {
            return Err(Error::Domain("homogeneous symbol evaluated at the origin".into()));
        }
        Ok(())
    }

    pub fn eval_mu(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.raw_value(x))
    }

    pub fn eval_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.raw_gradient(x)[..self.dim].to_vec())
    }

    pub fn eval_hess(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_point(x)?;
        let h = self.raw_hessian(x);
        Ok((0..self.dim).map(|i| h[i][..self.dim].to_vec()).collect())
    }

    fn raw_value(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        match &self.kind {
            SymbolKind::RadialPower => norm(&x[..d]).powf(self.m),
            SymbolKind::QuadraticForm { q } => {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += x[i] * q[i * d + j] * x[j];
                    }
                }
                0.5 * s
            }
            SymbolKind::AnisotropicPower { signs } => (0..d).map(|j| signs[j] * x[j].abs().powf(self.m)).sum(),
            SymbolKind::Custom { profile } => {
                let r = norm(&x[..d]);
                if r == 0.0 {
                    return 0.0;
                }
                let mut u = [0.0; 3];
                for j in 0..d {
                    u[j] = x[j] / r;
                }
                r.powf(self.m) * profile(&u[..d])
            }
        }
    }

    fn raw_gradient(&self, x: &[f64]) -> Vec3 {
        let d = self.dim;
        let mut g = [0.0; 3];
        match &self.kind {
            SymbolKind::RadialPower => {
                let r = norm(&x[..d]);
                if r == 0.0 {
                    return g;
                }
                let c = self.m * r.powf(self.m - 2.0);
                for j in 0..d {
                    g[j] = c * x[j];
                }
            }
            SymbolKind::QuadraticForm { q } => {
                for i in 0..d {
                    g[i] = (0..d).map(|j| q[i * d + j] * x[j]).sum();
                }
            }
            SymbolKind::AnisotropicPower { signs } => {
                for j in 0..d {
                    g[j] = signs[j] * self.m * x[j].powi(self.m as i32 - 1);
                }
            }
            SymbolKind::Custom { .. } => {
                if norm(&x[..d]) == 0.0 {
                    return g;
                }
                return fd_gradient(|y| self.raw_value(y), &x[..d]);
            }
        }
        g
    }

    fn raw_hessian(&self, x: &[f64]) -> Mat3 {
        let d = self.dim;
        let mut h = [[0.0; 3]; 3];
        match &self.kind {
            SymbolKind::RadialPower => {
                let r = norm(&x[..d]);
                let m = self.m;
                if r == 0.0 {
                    if m == 2.0 {
                        for (j, row) in h.iter_mut().enumerate().take(d) {
                            row[j] = 2.0;
                        }
                    } else if m < 2.0 {
                        for (j, row) in h.iter_mut().enumerate().take(d) {
                            row[j] = f64::INFINITY;
                        }
                    }
                    return h;
                }
                let a = m * r.powf(m - 2.0);
                let b = m * (m - 2.0) * r.powf(m - 4.0);
                for i in 0..d {
                    for j in 0..d {
                        h[i][j] = b * x[i] * x[j] + if i == j { a } else { 0.0 };
                    }
                }
            }
            SymbolKind::QuadraticForm { q } => {
                for i in 0..d {
                    for j in 0..d {
                        h[i][j] = q[i * d + j];
                    }
                }
            }
            SymbolKind::AnisotropicPower { signs } => {
                let m = self.m;
                for j in 0..d {
                    h[j][j] = signs[j] * m * (m - 1.0) * x[j].powi(m as i32 - 2);
                }
            }
            SymbolKind::Custom { .. } => {
                if norm(&x[..d]) == 0.0 {
                    return h;
                }
                return fd_hessian(|y| self.raw_value(y), &x[..d]);
            }
        }
        h
    }

    /// Smallest `|det ∇²μ|` over the given unit-sphere samples.
    pub fn nondegeneracy(&self, directions: &[Vec<f64>]) -> Result<f64> {
        if directions.is_empty() {
            return Err(Error::Parameter("no sample directions".into()));
        }
        let mut min = f64::INFINITY;
        for u in directions {
            self.check_point(u)?;
            min = min.min(det(&self.raw_hessian(u), self.dim).abs());
        }
        Ok(min)
    }
}

impl Dispersion for HomogeneousSymbol {
    fn is_radial(&self) -> bool {
        matches!(self.kind, SymbolKind::RadialPower)
    }

    fn dim(&self) -> usize {
        self.dim
    }
    fn degree(&self) -> f64 {
        self.m
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.raw_value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec3 {
        self.raw_gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> Mat3 {
        self.raw_hessian(x)
    }
}

fn fd_step(x: &[f64]) -> f64 {
    1e-3 * norm(x).max(1.0)
}

/// Central differences with one Richardson step (fourth order).
fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec3 {
    let d = x.len();
    let h = fd_step(x);
    let mut g = [0.0; 3];
    let mut y = [0.0; 3];
    y[..d].copy_from_slice(x);
    for j in 0..d {
        let mut diff = |s: f64| {
            y[j] = x[j] + s;
            let a = f(&y[..d]);
            y[j] = x[j] - s;
            let b = f(&y[..d]);
            y[j] = x[j];
            (a - b) / (2.0 * s)
        };
        let coarse = diff(h);
        let fine = diff(h / 2.0);
        g[j] = (4.0 * fine - coarse) / 3.0;
    }
    g
}

fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Mat3 {
    let d = x.len();
    let h0 = 10.0 * fd_step(x);
    let mut out = [[0.0; 3]; 3];
    let mut y = [0.0; 3];
    for i in 0..d {
        for j in i..d {
            let mut second = |s: f64| {
                let mut eval = |a: f64, b: f64| {
                    y[..d].copy_from_slice(x);
                    y[i] += a;
                    y[j] += b;
                    f(&y[..d])
                };
                if i == j {
                    (eval(s, 0.0) - 2.0 * f(x) + eval(-s, 0.0)) / (s * s)
                } else {
                    (eval(s, s) - eval(s, -s) - eval(-s, s) + eval(-s, -s)) / (4.0 * s * s)
                }
            };
            let coarse = second(h0);
            let fine = second(h0 / 2.0);
            let v = (4.0 * fine - coarse) / 3.0;
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Smoothing near the origin
// ---------------------------------------------------------------------------

fn bump_core(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn bump_core_d1(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        bump_core(t) / (t * t)
    }
}

fn bump_core_d2(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        bump_core(t) * (1.0 - 2.0 * t) / t.powi(4)
    }
}

/// Smooth step in `u`: 1 for `u ≤ 0`, 0 for `u ≥ 1`, with first and second
/// derivatives.
pub fn smooth_step(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let (a, a1, a2) = (bump_core(1.0 - u), -bump_core_d1(1.0 - u), bump_core_d2(1.0 - u));
    let (b, b1, b2) = (bump_core(u), bump_core_d1(u), bump_core_d2(u));
    let s = a + b;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    (a / s, num / (s * s), num1 / (s * s) - 2.0 * num * (a1 + b1) / (s * s * s))
}

/// Radial cutoff `χ(|x|)`: 1 for `|x| ≤ 1`, 0 for `|x| ≥ 2`.
pub fn cutoff(r: f64) -> f64 {
    smooth_step(r - 1.0).0
}

/// `μ̃ = χ_ρ q + (1 − χ_ρ) μ` where `χ_ρ(x) = χ(2|x|/ρ)` and `q` is the mean
/// of `μ` over the unit sphere. Agrees with `μ` for `|x| ≥ ρ`.
#[derive(Debug, Clone)]
pub struct SmoothedSymbol {
    base: HomogeneousSymbol,
    radius: f64,
    plateau: f64,
    identity: bool,
}

impl SmoothedSymbol {
    pub fn new(base: HomogeneousSymbol, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(Error::Parameter(format!("cutoff radius must lie in (0,1], got {radius}")));
        }
        let plateau = sphere_mean(&base);
        Ok(Self { base, radius, plateau, identity: false })
    }

    /// Uses `μ̃ = μ` when `μ` is already a polynomial, otherwise smooths with radius 1.
    pub fn auto(base: HomogeneousSymbol) -> Self {
        let identity = base.is_polynomial();
        let plateau = if identity { 0.0 } else { sphere_mean(&base) };
        Self { base, radius: 1.0, plateau, identity }
    }

    pub fn base(&self) -> &HomogeneousSymbol {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    fn chi(&self, x: &[f64]) -> (f64, f64, f64, f64) {
        let r = norm(x);
        let scale = 2.0 / self.radius;
        let (s, s1, s2) = smooth_step(scale * r - 1.0);
        (r, s, s1 * scale, s2 * scale * scale)
    }
}

fn sphere_mean(base: &HomogeneousSymbol) -> f64 {
    let dirs = fibonacci_sphere(base.dim(), 512);
    dirs.iter().map(|u| base.raw_value(u)).sum::<f64>() / dirs.len() as f64
}

impl Dispersion for SmoothedSymbol {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn degree(&self) -> f64 {
        self.base.m
    }

    fn value(&self, x: &[f64]) -> f64 {
        if self.identity {
            return self.base.raw_value(x);
        }
        let (_, c, _, _) = self.chi(x);
        if c == 0.0 {
            return self.base.raw_value(x);
        }
        c * self.plateau + (1.0 - c) * self.base.raw_value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec3 {
        if self.identity {
            return self.base.raw_gradient(x);
        }
        let (r, c, c1, _) = self.chi(x);
        if c == 0.0 {
            return self.base.raw_gradient(x);
        }
        if c == 1.0 {
            return [0.0; 3];
        }
        let d = self.base.dim;
        let mu = self.base.raw_value(x);
        let gm = self.base.raw_gradient(x);
        let mut g = [0.0; 3];
        for j in 0..d {
            g[j] = c1 * x[j] / r * (self.plateau - mu) + (1.0 - c) * gm[j];
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Mat3 {
        if self.identity {
            return self.base.raw_hessian(x);
        }
        let (r, c, c1, c2) = self.chi(x);
        if c == 0.0 {
            return self.base.raw_hessian(x);
        }
        if c == 1.0 {
            return [[0.0; 3]; 3];
        }
        let d = self.base.dim;
        let diff = self.plateau - self.base.raw_value(x);
        let gm = self.base.raw_gradient(x);
        let hm = self.base.raw_hessian(x);
        let mut u = [0.0; 3];
        for j in 0..d {
            u[j] = x[j] / r;
        }
        let mut h = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                let chi_ij = c2 * u[i] * u[j] + c1 / r * (delta - u[i] * u[j]);
                h[i][j] = chi_ij * diff - c1 * (u[i] * gm[j] + u[j] * gm[i]) + (1.0 - c) * hm[i][j];
            }
        }
        h
    }
}

// ---------------------------------------------------------------------------
// Sampling helpers
// ---------------------------------------------------------------------------

/// Deterministic, nearly uniform unit vectors.
pub fn fibonacci_sphere(dim: usize, n: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![rho * a.cos(), rho * a.sin(), z]
                })
                .collect()
        }
    }
}

pub fn random_directions(dim: usize, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            let r = norm(&v);
            if r > 1e-3 && r <= 1.0 {
                break v.iter().map(|c| c / r).collect();
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// `max ‖∇²μ(x)x − (m−1)∇μ(x)‖ / ‖∇μ(x)‖` over the samples.
pub fn check_euler_identity(symbol: &HomogeneousSymbol, samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Parameter("empty sample set".into()));
    }
    let d = symbol.dim;
    let mut worst: f64 = 0.0;
    for x in samples {
        symbol.check_point(x)?;
        let g = symbol.raw_gradient(x);
        let h = symbol.raw_hessian(x);
        let mut res = 0.0;
        for i in 0..d {
            let hx: f64 = (0..d).map(|j| h[i][j] * x[j]).sum();
            res += (hx - (symbol.m - 1.0) * g[i]).powi(2);
        }
        worst = worst.max(res.sqrt() / norm(&g[..d]));
    }
    Ok(worst)
}

/// `min |∇μ(x)| / |x|^{m−1}` over the samples.
pub fn check_gradient_lower_bound(symbol: &HomogeneousSymbol, samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Parameter("empty sample set".into()));
    }
    let mut min = f64::INFINITY;
    for x in samples {
        symbol.check_point(x)?;
        let g = symbol.raw_gradient(x);
        min = min.min(norm(&g[..symbol.dim]) / norm(x).powf(symbol.m - 1.0));
    }
    Ok(min)
}

#[derive(Debug, Clone)]
pub struct ConeSampling {
    pub axis: Vec<f64>,
    pub half_angle: f64,
    pub pairs: usize,
    pub radius_range: (f64, f64),
    /// Also draw points from the opposite cone `−Γ`.
    pub symmetric: bool,
    pub seed: u64,
}

impl ConeSampling {
    pub fn new(axis: Vec<f64>, half_angle: f64, pairs: usize) -> Self {
        Self { axis, half_angle, pairs, radius_range: (1e-2, 1e2), symmetric: false, seed: 0 }
    }
}

fn sample_cone_direction(axis: &[f64], half_angle: f64, rng: &mut impl Rng) -> Vec<f64> {
    match axis.len() {
        1 => axis.to_vec(),
        2 => {
            let base = axis[1].atan2(axis[0]);
            let a = base + half_angle * (2.0 * rng.gen::<f64>() - 1.0);
            vec![a.cos(), a.sin()]
        }
        _ => {
            let cz = 1.0 - rng.gen::<f64>() * (1.0 - half_angle.cos());
            let sz = (1.0 - cz * cz).max(0.0).sqrt();
            let phi = 2.0 * PI * rng.gen::<f64>();
            let local = [sz * phi.cos(), sz * phi.sin(), cz];
            // Orthonormal frame (e1, e2, axis).
            let a = [axis[0], axis[1], axis[2]];
            let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let dot: f64 = (0..3).map(|i| helper[i] * a[i]).sum();
            let mut e1 = [helper[0] - dot * a[0], helper[1] - dot * a[1], helper[2] - dot * a[2]];
            let n1 = norm(&e1);
            e1.iter_mut().for_each(|v| *v /= n1);
            let e2 = [a[1] * e1[2] - a[2] * e1[1], a[2] * e1[0] - a[0] * e1[2], a[0] * e1[1] - a[1] * e1[0]];
            (0..3).map(|i| local[0] * e1[i] + local[1] * e2[i] + local[2] * a[i]).collect()
        }
    }
}

/// Sampled infimum of `|∇μ(x)−∇μ(y)| / (|x−y|(|x|^{m−2}+|y|^{m−2}))` over
/// pairs in the cone with log-uniform radii.
pub fn cone_separation_ratio(symbol: &HomogeneousSymbol, sampling: &ConeSampling) -> Result<f64> {
    let d = symbol.dim;
    if sampling.axis.len() != d {
        return Err(Error::Structural("cone axis dimension does not match the symbol".into()));
    }
    let an = norm(&sampling.axis);
    if an == 0.0 {
        return Err(Error::Parameter("cone axis must be nonzero".into()));
    }
    let (rmin, rmax) = sampling.radius_range;
    if !(rmin > 0.0 && rmax > rmin) {
        return Err(Error::Parameter("invalid radius range".into()));
    }
    if !(sampling.half_angle >= 0.0 && sampling.half_angle < PI / 2.0) {
        return Err(Error::Parameter("half angle must lie in [0, π/2)".into()));
    }
    let axis: Vec<f64> = sampling.axis.iter().map(|v| v / an).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let (lmin, lmax) = (rmin.ln(), rmax.ln());
    let point = |rng: &mut ChaCha8Rng| {
        let mut u = sample_cone_direction(&axis, sampling.half_angle, rng);
        if sampling.symmetric && rng.gen::<bool>() {
            u.iter_mut().for_each(|v| *v = -*v);
        }
        let r = (lmin + (lmax - lmin) * rng.gen::<f64>()).exp();
        u.into_iter().map(|v| v * r).collect::<Vec<f64>>()
    };
    let m = symbol.m;
    let mut best = f64::INFINITY;
    for _ in 0..sampling.pairs {
        let x = point(&mut rng);
        let y = point(&mut rng);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dist = norm(&diff);
        if dist <= 1e-14 * norm(&x).max(norm(&y)) {
            continue;
        }
        let gx = symbol.raw_gradient(&x);
        let gy = symbol.raw_gradient(&y);
        let gd: Vec<f64> = (0..d).map(|j| gx[j] - gy[j]).collect();
        let denom = dist * (norm(&x).powf(m - 2.0) + norm(&y).powf(m - 2.0));
        best = best.min(norm(&gd) / denom);
    }
    if best.is_infinite() {
        return Err(Error::Parameter("all sampled pairs were degenerate".into()));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AliasingReport {
    pub fraction: f64,
    pub nyquist: f64,
    pub max_frequency: f64,
    pub flagged: bool,
}

impl AliasingReport {
    pub fn into_result(self) -> Result<()> {
        if self.flagged {
            Err(Error::Aliasing { fraction: self.fraction, nyquist: self.nyquist, max_frequency: self.max_frequency })
        } else {
            Ok(())
        }
    }
}

/// Fraction of grid points (space or frequency, depending on `on_frequencies`)
/// where the largest component of the local frequency `t∇μ` exceeds `limit`.
pub fn local_frequency_report<S: Dispersion + ?Sized>(symbol: &S, grid: &GridSpec, t: f64, limit: f64, on_frequencies: bool) -> AliasingReport {
    let d = grid.dim();
    let mut over = 0usize;
    let mut max_f: f64 = 0.0;
    for i in 0..grid.len() {
        let p = if on_frequencies { grid.frequency_point(i) } else { grid.point(i) };
        let g = symbol.gradient(&p[..d]);
        let local = (0..d).map(|j| (t * g[j]).abs()).fold(0.0, f64::max);
        max_f = max_f.max(local);
        if local > limit {
            over += 1;
        }
    }
    let fraction = over as f64 / grid.len() as f64;
    AliasingReport { fraction, nyquist: limit, max_frequency: max_f, flagged: fraction > 0.01 }
}

/// Samples `e^{2πi t μ(x)}` and reports whether the local frequency outruns the grid.
pub fn fresnel_field<S: Dispersion + ?Sized>(symbol: &S, grid: &GridSpec, t: f64) -> Result<(SampledField, AliasingReport)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Parameter(format!("time must be positive, got {t}")));
    }
    if symbol.dim() != grid.dim() {
        return Err(Error::Structural("symbol and grid dimensions differ".into()));
    }
    let field = SampledField::from_fn(*grid, |x| Complex64::from_polar(1.0, 2.0 * PI * t * symbol.value(x)));
    let report = local_frequency_report(symbol, grid, t, grid.nyquist(), false);
    Ok((field, report))
}

/// Sampled `sup ⟨x⟩^{|α|−m} |∂^α μ̃(x)|` for `|α| ≤ 2`.
pub fn a_m_seminorm<S: Dispersion + ?Sized>(symbol: &S, alpha: &[usize], samples: &[Vec<f64>]) -> Result<f64> {
    let d = symbol.dim();
    if alpha.len() != d {
        return Err(Error::Structural("multi-index length differs from dimension".into()));
    }
    let order: usize = alpha.iter().sum();
    if order > 2 {
        return Err(Error::Parameter("only |α| ≤ 2 is supported".into()));
    }
    if samples.is_empty() {
        return Err(Error::Parameter("empty sample set".into()));
    }
    let idx: Vec<usize> = alpha.iter().enumerate().flat_map(|(j, &k)| std::iter::repeat(j).take(k)).collect();
    let m = symbol.degree();
    let mut sup: f64 = 0.0;
    for x in samples {
        let v = match order {
            0 => symbol.value(x),
            1 => symbol.gradient(x)[idx[0]],
            _ => symbol.hessian(x)[idx[0]][idx[1]],
        };
        let bracket = (1.0 + x.iter().map(|c| c * c).sum::<f64>()).sqrt();
        sup = sup.max(bracket.powf(order as f64 - m) * v.abs());
    }
    Ok(sup)
}
