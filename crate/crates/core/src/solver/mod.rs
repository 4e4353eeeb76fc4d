//! Duhamel–Picard solvers for `i∂_t u + μ(D)u`-type Cauchy problems with a
//! potential, `u = U(t)f + 2πi ∫₀ᵗ U(t−s)[V G(u(s))] ds`.

mod duhamel;
mod nonlinearity;
mod norm;
mod picard;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::Window;
use crate::grid::{GridSpec, SampledField};
use crate::potentials::{w_p1_norms, MembershipOptions, Potential, PotentialKind};
use crate::propagator::{kernel_amalgam_norm, DecayScanOptions, Probe};
use crate::regression::logspace;
use crate::symbols::Dispersion;

pub use duhamel::graded_mesh;
pub use nonlinearity::{calibrate_algebra_constant, Nonlinearity, SeriesTerm};
pub use norm::{fourier_l1, SolutionNorm, NORM_X_STEP};
pub use picard::{global_solve, low_regularity_solve, picard_solve, SolutionTrajectory, StepConstants, WindowReport, WindowSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// Data in `FL¹`, solution in `C⁰W^{1,∞}`; needs `m > 2d`.
    Standard,
    /// Potential in `W^{p,1}`, data in `FL^q`, solution in `C⁰W^{q,∞}`.
    LowRegularity { p: f64, q: f64 },
}

impl Mode {
    /// Exponent of the solution norm `W^{q,∞}`.
    pub fn q(&self) -> f64 {
        match *self {
            Self::Standard => 1.0,
            Self::LowRegularity { q, .. } => q,
        }
    }

    /// `p` with `V ∈ W^{p,1}`.
    pub fn p(&self) -> f64 {
        match *self {
            Self::Standard => f64::INFINITY,
            Self::LowRegularity { p, .. } => p,
        }
    }

    /// Checks the exponent conditions and returns the kernel singularity
    /// `β = 2d/(m p′)` of `∫₀ᵀ s^{−β} ds`.
    pub fn singularity(&self, m: f64, d: usize) -> Result<f64> {
        let df = d as f64;
        match *self {
            Self::Standard => {
                if m <= 2.0 * df {
                    return Err(Error::Mode(format!(
                        "standard mode needs m > 2d, got m = {m}, d = {d}; use low_regularity with a finite p"
                    )));
                }
                Ok(2.0 * df / m)
            }
            Self::LowRegularity { p, q } => {
                if !(p >= 1.0) {
                    return Err(Error::Mode(format!("p must lie in [1, inf], got {p}")));
                }
                let pp = conjugate(p);
                if !(m > 2.0 * df / pp) {
                    return Err(Error::Mode(format!("m > 2d/p' fails: m = {m}, 2d/p' = {}", 2.0 * df / pp)));
                }
                if !(q >= 1.0 && q <= pp) {
                    return Err(Error::Mode(format!("1 <= q <= p' fails: q = {q}, p' = {pp}")));
                }
                Ok(2.0 * df / (m * pp))
            }
        }
    }
}

/// Hölder conjugate.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

#[derive(Clone)]
pub struct SolverConfig {
    pub grid: GridSpec,
    pub symbol: Arc<dyn Dispersion>,
    pub potential: Option<Potential>,
    pub nonlinearity: Nonlinearity,
    /// Initial datum in space.
    pub datum: SampledField,
    /// Ball radius `R`; the datum must lie in `B_{R/2}` in `FL¹`. Defaults to `2‖f‖_{FL¹}`.
    pub radius: Option<f64>,
    pub mode: Mode,
    /// Time intervals per window (even).
    pub nodes: usize,
    pub tolerance: f64,
    /// Largest accepted time-quadrature self-estimate.
    pub quadrature_tolerance: f64,
    pub max_iterations: usize,
    pub t_max: f64,
    pub window: Window,
    /// Spacing of the `x` lattice of the solution norm.
    pub norm_x_step: f64,
    /// Fixed window length; disables the automatic halving.
    pub step: Option<f64>,
    /// Skips the calibration of the propagator constant.
    pub c_prime: Option<f64>,
    /// Times used by the calibration.
    pub calibration_times: Vec<f64>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(grid: GridSpec, symbol: Arc<dyn Dispersion>, datum: SampledField, t_max: f64) -> Result<Self> {
        Ok(Self {
            window: Window::gaussian(grid.dim(), 1.0)?,
            grid,
            symbol,
            potential: None,
            nonlinearity: Nonlinearity::Linear,
            datum,
            radius: None,
            mode: Mode::Standard,
            nodes: 64,
            tolerance: 1e-10,
            quadrature_tolerance: 1e-11,
            max_iterations: 50,
            t_max,
            norm_x_step: NORM_X_STEP,
            step: None,
            c_prime: None,
            calibration_times: logspace(1e-2, 1.0, 7),
            seed: 0,
        })
    }

    pub fn with_potential(mut self, v: Potential) -> Self {
        self.potential = Some(v);
        self
    }
}

/// `min{((m − 2d)/(2m C′ C_R ‖V‖))^{m/(m−2d)}, 1}`
pub fn local_step_t(m: f64, d: usize, c_prime: f64, c_r: f64, v_bound: f64) -> Result<f64> {
    let df = d as f64;
    if m <= 2.0 * df {
        return Err(Error::Mode(format!("the step formula needs m > 2d, got m = {m}, d = {d}; use low_regularity")));
    }
    if !(c_prime > 0.0 && c_r > 0.0 && v_bound >= 0.0) {
        return Err(Error::Parameter("step constants must be positive".into()));
    }
    if v_bound == 0.0 {
        return Ok(1.0);
    }
    let base = (m - 2.0 * df) / (2.0 * m * c_prime * c_r * v_bound);
    Ok(base.powf(m / (m - 2.0 * df)).min(1.0))
}

/// `2 max_t t^{2d/m} ‖E(t,·)‖_{W^{1,∞}}` over `t_list`.
pub fn estimate_c_prime(symbol: &dyn Dispersion, window: &Window, t_list: &[f64]) -> Result<f64> {
    if t_list.is_empty() {
        return Err(Error::Parameter("empty calibration time list".into()));
    }
    let mut opts = DecayScanOptions::new(symbol.dim())?;
    opts.window = window.clone();
    let beta = 2.0 * symbol.dim() as f64 / symbol.degree();
    let mut best: f64 = 0.0;
    for &t in t_list {
        let row = kernel_amalgam_norm(symbol, t, &opts, &Probe::Kernel)?;
        best = best.max(row.norm * t.powf(beta));
    }
    Ok(2.0 * best)
}

/// `2 max_t t^{2d/(m p′)} ‖E(t,·)‖_{W^{p′,∞}}`; for `p′ = 1` this is [`estimate_c_prime`].
pub fn estimate_c_double_prime(symbol: &dyn Dispersion, window: &Window, p: f64, t_list: &[f64]) -> Result<f64> {
    let pp = conjugate(p);
    if pp == 1.0 {
        return estimate_c_prime(symbol, window, t_list);
    }
    if t_list.is_empty() {
        return Err(Error::Parameter("empty calibration time list".into()));
    }
    let mut opts = DecayScanOptions::new(symbol.dim())?;
    opts.window = window.clone();
    opts.inner = pp;
    let beta = 2.0 * symbol.dim() as f64 / (symbol.degree() * pp);
    let mut best: f64 = 0.0;
    for &t in t_list {
        best = best.max(kernel_amalgam_norm(symbol, t, &opts, &Probe::Kernel)?.norm * t.powf(beta));
    }
    Ok(2.0 * best)
}

/// `sup_t |a(t)| ‖V‖_{W^{p,1}}`. Dirac combs at `p = ∞` use `Σ|w_j| ‖g‖_{L¹}`.
pub fn potential_bound(potential: &Potential, grid: &GridSpec, window: &Window, p: f64) -> Result<f64> {
    let env = potential.envelope().sup();
    if let (PotentialKind::DiracComb { weights, .. }, true) = (potential.kind(), p.is_infinite()) {
        return Ok(env * weights.iter().map(|w| w.norm()).sum::<f64>() * window.l1_norm());
    }
    Ok(env * w_p1_norms(potential, grid, window, &[p], &MembershipOptions::default())?[0])
}
