//! The free propagator `U(t) = e^{2πi t μ(D)}`, its kernels `E(t,·)` and the
//! dispersive decay of `‖E(t,·)‖_{W^{1,∞}}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gabor::{fft_friendly, grid_norms, local_patch_size, strided_centers, NormRequest, Window, WindowKind, XLattice};
use crate::gabor::FresnelStft;
use crate::grid::{inverse_fourier, Domain, GridSpec, SampledField};
use crate::regression::{fit_loglog, LinearFit};
use crate::symbols::{smooth_step, AliasingReport, Dispersion, HomogeneousSymbol, SymbolKind};

const CACHE_LIMIT: usize = 64;

/// `e^{2πi t μ(D)}` on a periodic grid.
pub struct MultiplierPropagator {
    symbol: Arc<dyn Dispersion>,
    grid: GridSpec,
    /// `max_j |∂_j μ(ξ)|` per mode: how far mode `ξ` travels per unit time.
    speeds: Vec<f64>,
    cache: RwLock<HashMap<u64, Arc<Vec<Complex64>>>>,
}

impl MultiplierPropagator {
    pub fn new(symbol: Arc<dyn Dispersion>, grid: GridSpec) -> Result<Self> {
        if symbol.dim() != grid.dim() {
            return Err(Error::Structural("symbol and grid dimensions differ".into()));
        }
        let d = grid.dim();
        let speeds = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let g = symbol.gradient(&grid.frequency_point(k)[..d]);
                g[..d].iter().fold(0.0, |a: f64, v| a.max(v.abs()))
            })
            .collect();
        Ok(Self { symbol, grid, speeds, cache: RwLock::new(HashMap::new()) })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn symbol(&self) -> &dyn Dispersion {
        self.symbol.as_ref()
    }

    /// Samples of `e^{2πi t μ(ξ)}` on the frequency grid, cached by `t`.
    pub fn multiplier(&self, t: f64) -> Arc<Vec<Complex64>> {
        let key = t.to_bits();
        if let Some(m) = self.cache.read().expect("multiplier cache poisoned").get(&key) {
            return Arc::clone(m);
        }
        let d = self.grid.dim();
        let values: Vec<Complex64> = (0..self.grid.len())
            .into_par_iter()
            .map(|k| {
                let xi = self.grid.frequency_point(k);
                Complex64::from_polar(1.0, 2.0 * PI * (t * self.symbol.value(&xi[..d])).rem_euclid(1.0))
            })
            .collect();
        let values = Arc::new(values);
        let mut cache = self.cache.write().expect("multiplier cache poisoned");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&values));
        values
    }

    /// Share of the spectral energy of `spectrum` sitting on modes that
    /// travel further than half a period in time `t`.
    pub fn aliasing(&self, t: f64, spectrum: &[Complex64]) -> AliasingReport {
        let limit = 0.5 * self.grid.extent();
        let (mut over, mut total, mut max_f) = (0.0, 0.0, 0.0f64);
        for (v, s) in spectrum.iter().zip(&self.speeds) {
            let e = v.norm_sqr();
            let reach = t.abs() * s;
            total += e;
            if e > 0.0 {
                max_f = max_f.max(reach);
            }
            if reach > limit {
                over += e;
            }
        }
        let fraction = if total > 0.0 { over / total } else { 0.0 };
        AliasingReport { fraction, nyquist: limit, max_frequency: max_f, flagged: fraction > 0.01 }
    }

    /// Multiplies a spectrum in place by `e^{2πi t μ(ξ)}`.
    pub fn apply_spectrum(&self, t: f64, spectrum: &mut [Complex64]) {
        let m = self.multiplier(t);
        spectrum.iter_mut().zip(m.iter()).for_each(|(v, w)| *v *= w);
    }

    /// `U(t) f`, refusing when the result would wrap around the period.
    pub fn apply(&self, t: f64, field: &SampledField) -> Result<SampledField> {
        if field.domain() != Domain::Space {
            return Err(Error::Structural("propagator expects a space-domain field".into()));
        }
        if *field.grid() != self.grid {
            return Err(Error::Structural("field grid differs from propagator grid".into()));
        }
        if t == 0.0 {
            return Ok(field.clone());
        }
        let mut spec = crate::grid::forward_fourier(field)?;
        self.aliasing(t, spec.values()).into_result()?;
        self.apply_spectrum(t, spec.values_mut());
        inverse_fourier(&spec)
    }
}

/// Inverse transform of `e^{2πi t μ(ξ)} τ(|ξ|)` where the optional taper `τ`
/// is 1 below `band.0` and 0 above `band.1`.
pub fn banded_kernel(symbol: &dyn Dispersion, t: f64, grid: &GridSpec, band: Option<(f64, f64)>) -> Result<SampledField> {
    if symbol.dim() != grid.dim() {
        return Err(Error::Structural("symbol and grid dimensions differ".into()));
    }
    let d = grid.dim();
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let xi = grid.frequency_point(k);
            let w = match band {
                Some((lo, hi)) => {
                    let r = xi[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
                    smooth_step((r - lo) / (hi - lo)).0
                }
                None => 1.0,
            };
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::from_polar(w, 2.0 * PI * (t * symbol.value(&xi[..d])).rem_euclid(1.0))
        })
        .collect();
    inverse_fourier(&SampledField::new(*grid, values, Domain::Frequency)?)
}

/// `E(t,·)`, the inverse transform of the sampled multiplier. Refuses when
/// more than 1% of the modes travel beyond half a period.
pub fn fundamental_solution(symbol: &dyn Dispersion, t: f64, grid: &GridSpec) -> Result<SampledField> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Parameter(format!("time must be positive, got {t}")));
    }
    if symbol.dim() != grid.dim() {
        return Err(Error::Structural("symbol and grid dimensions differ".into()));
    }
    crate::symbols::local_frequency_report(symbol, grid, t, 0.5 * grid.extent(), true).into_result()?;
    banded_kernel(symbol, t, grid, None)
}

// ---------------------------------------------------------------------------
// Dispersive decay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DecayScanOptions {
    pub window: Window,
    /// Largest grid side per dimension (index `d − 1`).
    pub max_points: [usize; 3],
    /// Spacing of the `y` lattice over which the supremum is taken.
    pub y_step: f64,
    /// Factor the `d = 2` norm of a separable symbol into one-dimensional ones.
    pub factor_separable: bool,
    /// Inner exponent `p` of the measured `W^{p,∞}` norm.
    pub inner: f64,
    /// Multiplies the period at fixed spacing; 2 gives the domain-doubling check.
    pub domain_scale: f64,
}

impl DecayScanOptions {
    pub fn new(dim: usize) -> Result<Self> {
        Ok(Self { window: Window::gaussian(dim, 1.0)?, max_points: [1 << 16, 1024, 128], y_step: 0.25, factor_separable: true, inner: 1.0, domain_scale: 1.0 })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub t: f64,
    pub norm: f64,
    pub points_per_axis: usize,
    pub extent: f64,
    /// Frequency radius where the multiplier taper starts.
    pub band: f64,
    /// False when the grid cap forced a narrower band than the region needs.
    pub resolved: bool,
}

/// Extra datum applied before measuring: `U(t)f` instead of `E(t,·)`.
pub enum Probe<'a> {
    Kernel,
    /// `f̂` and the radius containing the bulk of `f`.
    Spectrum(&'a (dyn Fn(&[f64]) -> Complex64 + Sync), f64),
}

fn radial_speed(symbol: &dyn Dispersion, r: f64) -> f64 {
    let mut x = [0.0; 3];
    x[0] = r;
    symbol.gradient(&x[..symbol.dim()])[0].abs()
}

fn radial_curvature(symbol: &dyn Dispersion, r: f64) -> f64 {
    let d = symbol.dim();
    let mut x = [0.0; 3];
    x[0] = r;
    let h = symbol.hessian(&x[..d]);
    (0..d).map(|j| h[j][j].abs()).fold(f64::INFINITY, f64::min)
}

/// Smallest `r` with `t |μ'(r)| ≥ target` along the first axis.
fn reach_radius(symbol: &dyn Dispersion, t: f64, target: f64) -> f64 {
    let mut hi = 1.0;
    while t * radial_speed(symbol, hi) < target && hi < 1e12 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if t * radial_speed(symbol, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Discrete `sup_{|y| ≤ Y} ∫ |V_g u(y, ξ)| dξ` for `u = U(t)f`, on a grid built
/// for this `t`: frequencies that leave the window region by time `t` are
/// tapered off, the period is long enough that nothing wraps back into it,
/// and the grid resolves the remaining band.
pub fn kernel_amalgam_norm(symbol: &dyn Dispersion, t: f64, opts: &DecayScanOptions, probe: &Probe) -> Result<DecayRow> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Parameter(format!("time must be positive, got {t}")));
    }
    let d = symbol.dim();
    if opts.window.dim() != d {
        return Err(Error::Structural("window and symbol dimensions differ".into()));
    }
    let m = symbol.degree();
    let spread = match probe {
        Probe::Kernel => 0.0,
        Probe::Spectrum(_, r) => *r,
    };
    let reach = opts.window.support_radius().min(2.5);
    let y_max = 1.0 + 3.0 * t.powf(1.0 / m) + spread;
    let x_max = y_max + reach;
    let nu = reach_radius(symbol, t, x_max);
    let mut lo = nu + 6.0 / (t * radial_curvature(symbol, nu)).sqrt();
    let mut hi = 1.5 * lo;
    let extent_for = |band: f64| t * radial_speed(symbol, band) + x_max + spread + 6.0;
    let mut extent = extent_for(hi);
    let need = fft_friendly((2.0 * extent * hi * 1.1).ceil() as usize);
    let cap = opts.max_points[d - 1];
    let (n, resolved) = if need > cap { (cap - cap % 2, false) } else { (need, true) };
    if !resolved {
        // Largest band whose own extent still fits the capped grid.
        let fits = |band: f64| 2.0 * extent_for(band) * band * 1.1 <= n as f64;
        let (mut a, mut b) = (0.0, hi);
        for _ in 0..60 {
            let c = 0.5 * (a + b);
            if fits(c) {
                a = c;
            } else {
                b = c;
            }
        }
        hi = a;
        lo = hi / 1.5;
        extent = extent_for(hi);
    }
    let (n, extent) = if opts.domain_scale > 1.0 {
        let h = extent / n as f64;
        let n2 = fft_friendly((n as f64 * opts.domain_scale).ceil() as usize);
        (n2, h * n2 as f64)
    } else {
        (n, extent)
    };
    let grid = GridSpec::new(d, n, extent)?;
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let xi = grid.frequency_point(k);
            let r = xi[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            let w = smooth_step((r - lo) / (hi - lo)).0;
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let base = Complex64::from_polar(w, 2.0 * PI * (t * symbol.value(&xi[..d])).rem_euclid(1.0));
            match probe {
                Probe::Kernel => base,
                Probe::Spectrum(f, _) => base * f(&xi[..d]),
            }
        })
        .collect();
    let u = inverse_fourier(&SampledField::new(grid, values, Domain::Frequency)?)?;
    let h = grid.spacing();
    let stride = ((opts.y_step / h).round() as usize).max(1);
    let inside = |c: &[usize; 3]| (0..d).map(|a| grid.coordinate(c[a]).powi(2)).sum::<f64>() <= y_max * y_max * (1.0 + 1e-12);
    let centers: Vec<[usize; 3]> = if symbol.is_radial() && d > 1 && matches!(probe, Probe::Kernel) {
        // A radial kernel and a radial window: the slice norm only depends on |y|.
        (n / 2..n).step_by(stride).map(|j| [j, n / 2, if d == 3 { n / 2 } else { 0 }]).filter(|c| inside(c)).collect()
    } else {
        strided_centers(n, d, stride).into_iter().filter(|c| inside(c)).collect()
    };
    let patch = local_patch_size(n, h, &opts.window);
    let rep = grid_norms(&u, &opts.window, &centers, patch, NormRequest::amalgam(opts.inner, f64::INFINITY))?;
    Ok(DecayRow { t, norm: rep.amalgam[0].1, points_per_axis: n, extent, band: lo, resolved })
}

/// One-dimensional factors of a symbol that splits as `Σ_j μ_j(ξ_j)`.
fn separable_factors(symbol: &HomogeneousSymbol) -> Option<Vec<HomogeneousSymbol>> {
    let d = symbol.dim();
    if d == 1 {
        return None;
    }
    match symbol.kind() {
        SymbolKind::RadialPower if symbol.degree() == 2.0 => {
            Some((0..d).map(|_| HomogeneousSymbol::radial_power(1, 2.0).expect("valid")).collect())
        }
        SymbolKind::AnisotropicPower { signs } => Some(
            signs.iter().map(|s| HomogeneousSymbol::anisotropic_power(symbol.degree(), vec![*s]).expect("valid")).collect(),
        ),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayScan {
    pub rows: Vec<DecayRow>,
    pub factored: bool,
    pub flagged: bool,
}

impl DecayScan {
    /// Log–log slope of the norms over `t ∈ [lo, hi]`.
    pub fn slope(&self, lo: f64, hi: f64) -> Result<LinearFit> {
        let (ts, ns): (Vec<f64>, Vec<f64>) =
            self.rows.iter().filter(|r| r.t >= lo * (1.0 - 1e-12) && r.t <= hi * (1.0 + 1e-12)).map(|r| (r.t, r.norm)).unzip();
        fit_loglog(&ts, &ns)
    }
}

/// `‖E(t,·)‖_{W^{1,∞}}` for each `t`.
///
/// With a Gaussian window the kernel and the window both factor over the axes
/// for `|ξ|²` and `Σ ±|ξ_j|^m`, and so does the norm (taking the supremum over
/// a box of `y`); this is used when allowed.
pub fn dispersive_decay_scan(symbol: &HomogeneousSymbol, t_list: &[f64], opts: &DecayScanOptions) -> Result<DecayScan> {
    if t_list.is_empty() {
        return Err(Error::Parameter("empty time list".into()));
    }
    let gaussian = matches!(opts.window.kind(), WindowKind::Gaussian { .. });
    let factors = if opts.factor_separable && gaussian { separable_factors(symbol) } else { None };
    let rows: Vec<DecayRow> = match &factors {
        Some(parts) => {
            let WindowKind::Gaussian { sigma } = opts.window.kind() else { unreachable!() };
            let sub = DecayScanOptions { window: Window::gaussian(1, sigma)?, ..opts.clone() };
            t_list
                .iter()
                .map(|&t| {
                    let mut row: Option<DecayRow> = None;
                    for p in parts {
                        let r = kernel_amalgam_norm(p, t, &sub, &Probe::Kernel)?;
                        row = Some(match row {
                            None => r,
                            Some(acc) => DecayRow { norm: acc.norm * r.norm, resolved: acc.resolved && r.resolved, ..acc },
                        });
                    }
                    Ok(row.expect("at least one factor"))
                })
                .collect::<Result<_>>()?
        }
        None => t_list.iter().map(|&t| kernel_amalgam_norm(symbol, t, opts, &Probe::Kernel)).collect::<Result<_>>()?,
    };
    let flagged = rows.iter().any(|r| !r.resolved);
    Ok(DecayScan { rows, factored: factors.is_some(), flagged })
}

/// `max{t^{−d/m}, t^{−2d/m}}`
pub fn decay_envelope(dim: usize, m: f64, t: f64) -> f64 {
    let d = dim as f64;
    t.powf(-d / m).max(t.powf(-2.0 * d / m))
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorRow {
    pub t: f64,
    pub probe: usize,
    pub output_norm: f64,
    pub input_norm: f64,
    /// `‖U(t)f‖_{W^{1,∞}} / (max{t^{−d/m}, t^{−2d/m}} ‖f‖_{W^{∞,1}})`
    pub ratio: f64,
}

/// Data with a known `W^{∞,1}` norm for the operator-norm check.
#[derive(Debug, Clone)]
pub enum DatumProbe {
    Gaussian { sigma: f64 },
    /// Weighted Dirac masses.
    DiracComb { points: Vec<[f64; 3]>, weights: Vec<Complex64> },
}

impl DatumProbe {
    fn spectrum(&self, dim: usize) -> Box<dyn Fn(&[f64]) -> Complex64 + Sync + '_> {
        match self {
            Self::Gaussian { sigma } => {
                let s = *sigma;
                Box::new(move |xi: &[f64]| {
                    let r2: f64 = xi.iter().map(|v| v * v).sum();
                    Complex64::new(s.powi(dim as i32) * (-PI * s * s * r2).exp(), 0.0)
                })
            }
            Self::DiracComb { points, weights } => Box::new(move |xi: &[f64]| {
                points
                    .iter()
                    .zip(weights)
                    .map(|(p, w)| {
                        let phase: f64 = (0..dim).map(|a| xi[a] * p[a]).sum();
                        w * Complex64::from_polar(1.0, -2.0 * PI * phase)
                    })
                    .sum()
            }),
        }
    }

    fn radius(&self) -> f64 {
        match self {
            Self::Gaussian { sigma } => 2.0 * sigma,
            Self::DiracComb { points, .. } => {
                points.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
            }
        }
    }

    /// `‖f‖_{W^{∞,1}} = ∫ sup_ξ |V_g f(x, ξ)| dx`.
    ///
    /// For a comb the supremum is replaced by its upper bound `Σ_j |w_j| g(x − x_j)`,
    /// which is attained for one or two masses.
    pub fn w_inf_1_norm(&self, window: &Window) -> Result<f64> {
        let d = window.dim();
        match self {
            Self::DiracComb { weights, .. } => Ok(weights.iter().map(|w| w.norm()).sum::<f64>() * window.l1_norm()),
            Self::Gaussian { sigma } => {
                let extent = (16.0f64).max(12.0 * sigma + 2.0 * window.support_radius());
                let n = fft_friendly((extent * 16.0) as usize);
                let grid = GridSpec::new(d, n, extent)?;
                let s = *sigma;
                let f = SampledField::from_fn(grid, |x| Complex64::new((-PI * x.iter().map(|v| v * v).sum::<f64>() / (s * s)).exp(), 0.0));
                crate::gabor::field_norm(&f, window, 1, f64::INFINITY, 1.0, true)
            }
        }
    }
}

/// Ratios of `‖U(t)f‖_{W^{1,∞}}` to the dispersive bound for each probe and `t`.
pub fn operator_norm_check(symbol: &HomogeneousSymbol, t_list: &[f64], probes: &[DatumProbe], opts: &DecayScanOptions) -> Result<Vec<OperatorRow>> {
    let d = symbol.dim();
    let mut out = Vec::new();
    for (k, probe) in probes.iter().enumerate() {
        let input_norm = probe.w_inf_1_norm(&opts.window)?;
        let spec = probe.spectrum(d);
        for &t in t_list {
            let row = kernel_amalgam_norm(symbol, t, opts, &Probe::Spectrum(spec.as_ref(), probe.radius()))?;
            let ratio = row.norm / (decay_envelope(d, symbol.degree(), t) * input_norm);
            out.push(OperatorRow { t, probe: k, output_norm: row.norm, input_norm, ratio });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplierNormScan {
    pub p: f64,
    pub rows: Vec<(f64, f64)>,
    pub fit: Option<LinearFit>,
}

/// Discrete `‖e^{2πi t μ}‖_{M^{p,∞}}` from analytic portraits over an `x`-cube
/// that holds every point whose local frequency `t∇μ(x)` stays within twice
/// the window bandwidth of the origin.
pub fn multiplier_norm(symbol: &dyn Dispersion, window: &Window, t: f64, p: f64) -> Result<f64> {
    let x_far = reach_radius(symbol, t, 2.0 * window.bandwidth());
    let extent = 2.0 * x_far + 4.0 * window.support_radius();
    let step = 0.25 * (window.support_radius() / 3.5).min(1.0);
    let lattice = XLattice::cube(symbol.dim(), extent, step)?;
    let st = FresnelStft::new(symbol, t, window);
    let rep = st.norms(&lattice, NormRequest::modulation(p, f64::INFINITY))?;
    Ok(rep.modulation[0].1)
}

/// `‖e^{2πi t μ}‖_{M^{p,∞}}` over `t_list` with the log–log slope.
pub fn interpolated_multiplier_bound_check(symbol: &dyn Dispersion, window: &Window, p: f64, t_list: &[f64]) -> Result<MultiplierNormScan> {
    if t_list.is_empty() {
        return Err(Error::Parameter("empty time list".into()));
    }
    let rows: Vec<(f64, f64)> = t_list.iter().map(|&t| Ok((t, multiplier_norm(symbol, window, t, p)?))).collect::<Result<_>>()?;
    let fit = if rows.len() >= 2 {
        let (ts, ns): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
        Some(fit_loglog(&ts, &ns)?)
    } else {
        None
    };
    Ok(MultiplierNormScan { p, rows, fit })
}
