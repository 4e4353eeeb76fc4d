use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{forward_fourier, inverse_fourier, Domain, GridSpec, SampledField};
use crate::potentials::PotentialOperator;

use super::duhamel::{graded_mesh, symbol_values, DuhamelOperator};
use super::nonlinearity::calibrate_algebra_constant;
use super::norm::{fourier_l1, SolutionNorm};
use super::{estimate_c_double_prime, local_step_t, potential_bound, Mode, SolverConfig};

/// Ratio above which the window is shortened.
const RATIO_LIMIT: f64 = 0.6;
/// Two consecutive ratios above this abort a fixed-length window.
const DIVERGENCE_RATIO: f64 = 0.9;
const MAX_HALVINGS: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct StepConstants {
    /// Propagator constant (`C′`, or its `M^{p′,∞}` analogue).
    pub c_prime: f64,
    pub c_r: f64,
    /// Product constant of the solution norm (1 when not needed).
    pub algebra: f64,
    pub v_bound: f64,
    /// Kernel singularity `β` and mesh grading `2/(1 − β)`.
    pub beta: f64,
    pub grading: f64,
    /// Step from the contraction formula.
    pub formula_step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    pub t_start: f64,
    pub step: f64,
    pub halvings: usize,
    pub iterations: usize,
    /// `‖u_n − u_{n−1}‖` in the discrete `C⁰W^{q,∞}` norm.
    pub increments: Vec<f64>,
    /// `increments[n] / increments[n−1]`.
    pub ratios: Vec<f64>,
    pub node_norms: Vec<f64>,
    pub max_norm: f64,
    /// `max_i ‖U(s_i)u(t_start)‖`.
    pub free_max_norm: f64,
    /// `‖u − (u₀ + A G(u))‖` after convergence.
    pub residual: f64,
    pub quadrature_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct WindowSolution {
    pub report: WindowReport,
    /// Absolute times of the nodes.
    pub times: Vec<f64>,
    pub spectra: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct SolutionTrajectory {
    pub grid: GridSpec,
    pub mode: Mode,
    pub constants: StepConstants,
    pub windows: Vec<WindowSolution>,
    /// `‖u_k(end) − u_{k+1}(start)‖` between consecutive windows.
    pub continuity_gaps: Vec<f64>,
}

impl SolutionTrajectory {
    pub fn final_time(&self) -> f64 {
        *self.windows.last().and_then(|w| w.times.last()).unwrap_or(&0.0)
    }

    pub fn final_spectrum(&self) -> &[Complex64] {
        self.windows.last().and_then(|w| w.spectra.last()).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn field(&self, window: usize, node: usize) -> Result<SampledField> {
        let w = self.windows.get(window).ok_or_else(|| Error::Parameter(format!("no window {window}")))?;
        let s = w.spectra.get(node).ok_or_else(|| Error::Parameter(format!("no node {node}")))?;
        inverse_fourier(&SampledField::new(self.grid, s.clone(), Domain::Frequency)?)
    }

    pub fn final_field(&self) -> Result<SampledField> {
        let w = self.windows.len() - 1;
        self.field(w, self.windows[w].spectra.len() - 1)
    }

    /// All `(t, û(t))` with the duplicated window joins removed.
    pub fn samples(&self) -> Vec<(f64, &[Complex64])> {
        let mut out: Vec<(f64, &[Complex64])> = Vec::new();
        for (k, w) in self.windows.iter().enumerate() {
            let skip = usize::from(k > 0);
            out.extend(w.times.iter().zip(&w.spectra).skip(skip).map(|(t, s)| (*t, s.as_slice())));
        }
        out
    }

    pub fn max_ratio(&self) -> f64 {
        self.windows.iter().flat_map(|w| w.report.ratios.iter().copied()).fold(0.0, f64::max)
    }
}

struct Prepared {
    mu: Vec<f64>,
    potential: Option<PotentialOperator>,
    norm: SolutionNorm,
    constants: StepConstants,
}

fn prepare(cfg: &SolverConfig) -> Result<Prepared> {
    let d = cfg.grid.dim();
    let m = cfg.symbol.degree();
    if cfg.symbol.dim() != d || cfg.datum.grid() != &cfg.grid {
        return Err(Error::Structural("symbol, datum and grid dimensions must agree".into()));
    }
    if cfg.datum.domain() != Domain::Space {
        return Err(Error::Structural("the initial datum is given in space".into()));
    }
    if cfg.nodes < 4 || cfg.nodes % 2 != 0 {
        return Err(Error::Parameter(format!("nodes per window must be even and at least 4, got {}", cfg.nodes)));
    }
    if !(cfg.tolerance > 0.0) || cfg.max_iterations == 0 {
        return Err(Error::Parameter("tolerance and iteration limit must be positive".into()));
    }
    if !(cfg.t_max > 0.0 && cfg.t_max.is_finite()) {
        return Err(Error::Parameter(format!("t_max must be positive, got {}", cfg.t_max)));
    }
    cfg.nonlinearity.validate()?;
    let beta = cfg.mode.singularity(m, d)?;
    let q = cfg.mode.q();
    let norm = SolutionNorm::with_x_step(&cfg.grid, &cfg.window, q, cfg.norm_x_step)?;

    let f_l1 = fourier_l1(&cfg.grid, forward_fourier(&cfg.datum)?.values());
    let radius = cfg.radius.unwrap_or(2.0 * f_l1);
    if f_l1 > 0.5 * radius * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!("datum has FL1 norm {f_l1:.6e}, outside the ball of radius R/2 = {:.6e}", 0.5 * radius)));
    }

    let (potential, v_bound) = match &cfg.potential {
        Some(v) => {
            if v.dim() != d {
                return Err(Error::Structural("potential and grid dimensions differ".into()));
            }
            (Some(v.operator(&cfg.grid)?), potential_bound(v, &cfg.grid, &cfg.window, cfg.mode.p())?)
        }
        None => (None, 0.0),
    };
    let algebra = if cfg.nonlinearity.is_linear() {
        1.0
    } else {
        calibrate_algebra_constant(&cfg.grid, &cfg.window, q, 100, cfg.seed)?
    };
    let c_r = cfg.nonlinearity.lipschitz_constant(radius.max(f64::MIN_POSITIVE), algebra)?;
    let (c_prime, formula_step) = if potential.is_none() {
        (cfg.c_prime.unwrap_or(f64::NAN), 1.0)
    } else {
        let c = match cfg.c_prime {
            Some(c) => c,
            None => estimate_c_double_prime(cfg.symbol.as_ref(), &cfg.window, cfg.mode.p(), &cfg.calibration_times)?,
        };
        // β = 2d/m_eff turns the step formula into the window bound ∫₀ᵀ s^{−β} ds · C ‖V‖ ≤ 1/2.
        let m_eff = 2.0 * d as f64 / beta;
        (c, local_step_t(m_eff, d, c, c_r, v_bound)?)
    };
    Ok(Prepared {
        mu: symbol_values(cfg.symbol.as_ref(), &cfg.grid),
        potential,
        norm,
        constants: StepConstants { c_prime, c_r, algebra, v_bound, beta, grading: 2.0 / (1.0 - beta), formula_step },
    })
}

enum Attempt {
    Done(WindowSolution),
    Shorten(Vec<f64>),
}

fn attempt(cfg: &SolverConfig, prep: &Prepared, f_hat: &[Complex64], t_start: f64, step: f64, halving: bool) -> Result<Attempt> {
    let op = DuhamelOperator {
        grid: cfg.grid,
        mu: &prep.mu,
        potential: prep.potential.as_ref(),
        nonlinearity: &cfg.nonlinearity,
        t_start,
        nodes: graded_mesh(step, cfg.nodes, prep.constants.grading),
    };
    let u0 = op.free(f_hat);
    let mut u = u0.clone();
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    loop {
        if increments.len() >= cfg.max_iterations {
            return Err(Error::NotConverged {
                iterations: increments.len(),
                tolerance: cfg.tolerance,
                last: *increments.last().unwrap_or(&f64::NAN),
            });
        }
        let next = op.apply(&u0, &u)?;
        let d = prep.norm.max_difference(&next, &u)?;
        u = next;
        if let Some(&prev) = increments.last() {
            if prev > 0.0 {
                let r = d / prev;
                ratios.push(r);
                if r > RATIO_LIMIT && d > cfg.tolerance && halving {
                    return Ok(Attempt::Shorten(ratios));
                }
                let n = ratios.len();
                if n >= 2 && ratios[n - 1] > DIVERGENCE_RATIO && ratios[n - 2] > DIVERGENCE_RATIO {
                    return Err(Error::NonContraction { ratios });
                }
            }
        }
        increments.push(d);
        if d <= cfg.tolerance {
            break;
        }
    }
    let check = op.apply(&u0, &u)?;
    let residual = prep.norm.max_difference(&check, &u)?;
    if residual > 2.0 * cfg.tolerance {
        return Err(Error::Invariant(format!("fixed-point residual {residual:.3e} exceeds twice the tolerance")));
    }
    let quadrature_estimate = op.quadrature_estimate(&u)?;
    if quadrature_estimate > cfg.quadrature_tolerance {
        return Err(Error::Quadrature { estimate: quadrature_estimate, limit: cfg.quadrature_tolerance });
    }
    let node_norms = prep.norm.per_node(&u)?;
    let free_max_norm = prep.norm.per_node(&u0)?.into_iter().fold(0.0, f64::max);
    let report = WindowReport {
        t_start,
        step,
        halvings: 0,
        iterations: increments.len(),
        increments,
        ratios,
        max_norm: node_norms.iter().copied().fold(0.0, f64::max),
        node_norms,
        free_max_norm,
        residual,
        quadrature_estimate,
    };
    let times = op.nodes.iter().map(|s| t_start + s).collect();
    Ok(Attempt::Done(WindowSolution { report, times, spectra: u }))
}

/// One window, shortened by halving while the measured contraction exceeds the limit.
fn solve_window(cfg: &SolverConfig, prep: &Prepared, f_hat: &[Complex64], t_start: f64, step: f64) -> Result<WindowSolution> {
    let halving = cfg.step.is_none();
    let mut step = step;
    for k in 0..=MAX_HALVINGS {
        match attempt(cfg, prep, f_hat, t_start, step, halving)? {
            Attempt::Done(mut w) => {
                w.report.halvings = k;
                return Ok(w);
            }
            Attempt::Shorten(ratios) => {
                if k == MAX_HALVINGS {
                    return Err(Error::NonContraction { ratios });
                }
                step *= 0.5;
            }
        }
    }
    unreachable!()
}

fn initial_step(cfg: &SolverConfig, prep: &Prepared) -> f64 {
    cfg.step.unwrap_or(prep.constants.formula_step)
}

/// Fixed point of the Duhamel map on `[0, min(T, t_max)]`.
pub fn picard_solve(cfg: &SolverConfig) -> Result<SolutionTrajectory> {
    let prep = prepare(cfg)?;
    let f_hat = forward_fourier(&cfg.datum)?.into_values();
    let step = initial_step(cfg, &prep).min(cfg.t_max);
    let w = solve_window(cfg, &prep, &f_hat, 0.0, step)?;
    Ok(SolutionTrajectory { grid: cfg.grid, mode: cfg.mode, constants: prep.constants, windows: vec![w], continuity_gaps: Vec::new() })
}

fn continue_to_t_max(cfg: &SolverConfig) -> Result<SolutionTrajectory> {
    if !cfg.nonlinearity.is_linear() {
        return Err(Error::Mode("global continuation is only available for the linear nonlinearity G(u) = u".into()));
    }
    let prep = prepare(cfg)?;
    let mut f_hat = forward_fourier(&cfg.datum)?.into_values();
    let mut step = initial_step(cfg, &prep);
    let mut t = 0.0;
    let mut windows: Vec<WindowSolution> = Vec::new();
    let mut gaps = Vec::new();
    while t < cfg.t_max * (1.0 - 1e-14) {
        let len = step.min(cfg.t_max - t);
        let w = solve_window(cfg, &prep, &f_hat, t, len)?;
        if w.report.halvings > 0 {
            step = w.report.step;
        }
        if let Some(prev) = windows.last() {
            let a = prev.spectra.last().expect("window has nodes");
            gaps.push(prep.norm.max_difference(std::slice::from_ref(a), &w.spectra[..1])?);
        }
        f_hat = w.spectra.last().expect("window has nodes").clone();
        t = *w.times.last().expect("window has nodes");
        windows.push(w);
    }
    Ok(SolutionTrajectory { grid: cfg.grid, mode: cfg.mode, constants: prep.constants, windows, continuity_gaps: gaps })
}

/// Linear problem on `[0, t_max]` by restarting on consecutive windows.
pub fn global_solve(cfg: &SolverConfig) -> Result<SolutionTrajectory> {
    if !matches!(cfg.mode, Mode::Standard) {
        return Err(Error::Mode("global_solve runs the standard mode; use low_regularity_solve".into()));
    }
    continue_to_t_max(cfg)
}

/// Linear problem in `C⁰W^{q,∞}` with `V ∈ W^{p,1}`, on `[0, t_max]`.
pub fn low_regularity_solve(cfg: &SolverConfig) -> Result<SolutionTrajectory> {
    if !matches!(cfg.mode, Mode::LowRegularity { .. }) {
        return Err(Error::Mode("low_regularity_solve needs a low_regularity mode".into()));
    }
    continue_to_t_max(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;
    use crate::propagator::MultiplierPropagator;
    use crate::symbols::{Dispersion, HomogeneousSymbol};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(potential: bool) -> SolverConfig {
        // Band |ξ| ≤ 4: no mode travels half a period within one window.
        let grid = GridSpec::new(1, 128, 16.0).unwrap();
        let mu: Arc<dyn Dispersion> = Arc::new(HomogeneousSymbol::radial_power(1, 4.0).unwrap());
        let f = SampledField::from_fn(grid, |x| Complex64::new((-PI * x[0] * x[0]).exp(), 0.0));
        let mut cfg = SolverConfig::new(grid, mu, f, 1.0).unwrap();
        cfg.nodes = 16;
        cfg.quadrature_tolerance = 1e-4;
        if potential {
            cfg.potential = Some(Potential::dirac_comb(1, vec![[0.0; 3]], vec![Complex64::new(1.0, 0.0)]).unwrap());
        }
        cfg
    }

    #[test]
    fn zero_potential_is_free_evolution() {
        let cfg = setup(false);
        let sol = picard_solve(&cfg).unwrap();
        assert_eq!(sol.windows[0].report.iterations, 1);
        let prop = MultiplierPropagator::new(Arc::clone(&cfg.symbol), cfg.grid).unwrap();
        let mut expect = forward_fourier(&cfg.datum).unwrap().into_values();
        prop.apply_spectrum(sol.final_time(), &mut expect);
        let err = sol.final_spectrum().iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        let u0 = sol.field(0, 0).unwrap();
        assert!(u0.values().iter().zip(cfg.datum.values()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn delta_potential_contracts() {
        let cfg = setup(true);
        let sol = picard_solve(&cfg).unwrap();
        let r = &sol.windows[0].report;
        assert!(r.ratios.iter().all(|&x| x <= 0.6), "{r:?}");
        assert!(r.residual <= 2e-10);
        assert!(r.max_norm <= 2.0 * r.free_max_norm + cfg.tolerance);
    }

    #[test]
    fn nonlinear_global_run_is_refused() {
        let mut cfg = setup(true);
        cfg.nonlinearity = crate::solver::Nonlinearity::Power { lambda: Complex64::new(1.0, 0.0), k: 2 };
        assert!(matches!(global_solve(&cfg), Err(Error::Mode(_))));
    }

    #[test]
    fn datum_outside_ball_is_rejected() {
        let mut cfg = setup(true);
        cfg.radius = Some(0.1);
        assert!(matches!(picard_solve(&cfg), Err(Error::Parameter(_))));
    }
}
