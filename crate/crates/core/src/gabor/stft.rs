use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::portrait::{NormAccumulator, NormReport, NormRequest, PhaseSpacePortrait, PortraitSlice};
use super::window::{Window, WINDOW_EPS};
use crate::error::{Error, Result};
use crate::grid::{centered_forward, Domain, SampledField};
use crate::symbols::{Dispersion, Vec3};

const CHUNK: usize = 64;
const MAX_SLICE_CELLS: usize = 1 << 24;

/// Analysis points `x` together with the lattice step used as quadrature weight.
#[derive(Debug, Clone)]
pub struct XLattice {
    dim: usize,
    step: f64,
    points: Vec<Vec3>,
}

impl XLattice {
    /// Points `(j − n/2)·step`, `n = extent/step`, on every axis.
    pub fn cube(dim: usize, extent: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && extent >= step) {
            return Err(Error::Parameter(format!("bad lattice: extent {extent}, step {step}")));
        }
        let n = (extent / step).round() as usize;
        let coords: Vec<f64> = (0..n).map(|j| (j as f64 - (n / 2) as f64) * step).collect();
        let total = n.pow(dim as u32);
        let points = (0..total)
            .map(|flat| {
                let mut p = [0.0; 3];
                let mut rem = flat;
                for a in (0..dim).rev() {
                    p[a] = coords[rem % n];
                    rem /= n;
                }
                p
            })
            .collect();
        Ok(Self { dim, step, points })
    }

    /// Cube lattice points with `|x| ≤ radius`.
    pub fn ball(dim: usize, radius: f64, step: f64) -> Result<Self> {
        let mut cube = Self::cube(dim, 2.0 * radius + 2.0 * step, step)?;
        cube.points.retain(|p| p[..dim].iter().map(|v| v * v).sum::<f64>() <= radius * radius * (1.0 + 1e-12));
        Ok(cube)
    }

    pub fn from_points(dim: usize, step: f64, points: Vec<Vec3>) -> Self {
        Self { dim, step, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Smallest even `m ≥ n` of the form `2^a 3^b 5^c`.
pub fn fft_friendly(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m % 2 == 0 {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Patch length (points per axis) that holds the window on this grid.
pub fn local_patch_size(n: usize, h: f64, window: &Window) -> usize {
    let need = 2 * (window.support_radius() / h).ceil() as usize + 2;
    let p = fft_friendly(need);
    if p >= n {
        n
    } else {
        p
    }
}

fn unravel(flat: usize, n: usize, dim: usize) -> [usize; 3] {
    let mut idx = [0usize; 3];
    let mut rem = flat;
    for a in (0..dim).rev() {
        idx[a] = rem % n;
        rem /= n;
    }
    idx
}

/// Lattice of grid indices `≡ N/2 (mod stride)` on every axis.
pub fn strided_centers(n: usize, dim: usize, stride: usize) -> Vec<[usize; 3]> {
    let first = (n / 2) % stride;
    let axis: Vec<usize> = (first..n).step_by(stride).collect();
    let m = axis.len();
    (0..m.pow(dim as u32))
        .map(|flat| {
            let k = unravel(flat, m, dim);
            let mut idx = [0usize; 3];
            for a in 0..dim {
                idx[a] = axis[k[a]];
            }
            idx
        })
        .collect()
}

struct GridStft<'a> {
    field: &'a SampledField,
    patch: usize,
    weights: Vec<f64>,
}

impl<'a> GridStft<'a> {
    fn new(field: &'a SampledField, window: &Window, patch: usize) -> Result<Self> {
        let g = field.grid();
        if field.domain() != Domain::Space {
            return Err(Error::Structural("STFT expects a space-domain field".into()));
        }
        if window.dim() != g.dim() {
            return Err(Error::Structural("window and grid dimensions differ".into()));
        }
        let d = g.dim();
        let h = g.spacing();
        let total = patch.pow(d as u32);
        if total > MAX_SLICE_CELLS {
            return Err(Error::Parameter(format!("STFT patch of {total} points is too large")));
        }
        let weights: Vec<f64> = (0..total)
            .map(|flat| {
                let o = unravel(flat, patch, d);
                let mut y = [0.0; 3];
                for a in 0..d {
                    y[a] = (o[a] as f64 - (patch / 2) as f64) * h;
                }
                window.eval(&y[..d])
            })
            .collect();
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::Parameter("window vanishes on the analysis grid".into()));
        }
        Ok(Self { field, patch, weights })
    }

    /// `V_g f(x, ξ_k) e^{2πiξ_k·x}` for `ξ_k = (k − P/2)/(P h)`.
    fn raw(&self, center: &[usize; 3]) -> Vec<Complex64> {
        let g = self.field.grid();
        let (n, d, p) = (g.points_per_axis(), g.dim(), self.patch);
        let vals = self.field.values();
        let mut buf: Vec<Complex64> = Vec::with_capacity(self.weights.len());
        for (flat, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                buf.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let o = unravel(flat, p, d);
            let mut src = 0usize;
            for a in 0..d {
                let j = (center[a] + n + o[a] - p / 2) % n;
                src = src * n + j;
            }
            buf.push(vals[src] * w);
        }
        centered_forward(&mut buf, p, d, g.spacing());
        buf
    }

    fn slice(&self, center: &[usize; 3], floor: f64) -> PortraitSlice {
        let g = self.field.grid();
        let d = g.dim();
        let mut x = [0.0; 3];
        for a in 0..d {
            x[a] = g.coordinate(center[a]);
        }
        let mut shape = [1usize; 3];
        let mut origin = [0i64; 3];
        for a in 0..d {
            shape[a] = self.patch;
            origin[a] = -((self.patch / 2) as i64);
        }
        let magnitudes = self.raw(center).into_iter().map(|v| v.norm()).collect();
        PortraitSlice { x, origin, shape, magnitudes }.trimmed(d, floor)
    }
}

fn drive<T: Sync, F>(items: &[T], make: F, sink: &mut dyn FnMut(PortraitSlice) -> Result<()>) -> Result<()>
where
    F: Fn(&T) -> Result<PortraitSlice> + Sync,
{
    for chunk in items.chunks(CHUNK * rayon::current_num_threads().max(1)) {
        let slices: Result<Vec<PortraitSlice>> = chunk.par_iter().map(&make).collect();
        for s in slices? {
            sink(s)?;
        }
    }
    Ok(())
}

/// Streams `|V_g f|` slices of a sampled field at the given grid indices,
/// using an FFT patch of `patch` points per axis.
pub fn stft_grid_stream(
    field: &SampledField,
    window: &Window,
    centers: &[[usize; 3]],
    patch: usize,
    floor: f64,
    sink: &mut dyn FnMut(PortraitSlice) -> Result<()>,
) -> Result<()> {
    let n = field.grid().points_per_axis();
    if patch > n || patch % 2 != 0 || patch < 2 {
        return Err(Error::Parameter(format!("patch {patch} must be even and at most N = {n}")));
    }
    let engine = GridStft::new(field, window, patch)?;
    drive(centers, |c| Ok(engine.slice(c, floor)), sink)
}

fn grid_portrait(field: &SampledField, window: &Window, x_stride: usize, patch: usize) -> Result<PhaseSpacePortrait> {
    if x_stride == 0 {
        return Err(Error::Parameter("x_stride must be at least 1".into()));
    }
    let g = field.grid();
    let centers = strided_centers(g.points_per_axis(), g.dim(), x_stride);
    let mut slices = Vec::with_capacity(centers.len());
    stft_grid_stream(field, window, &centers, patch, 0.0, &mut |s| {
        slices.push(s);
        Ok(())
    })?;
    let xi_step = 1.0 / (patch as f64 * g.spacing());
    Ok(PhaseSpacePortrait::new(g.dim(), x_stride as f64 * g.spacing(), xi_step, window.l1_norm(), slices))
}

/// Full-grid STFT: every `x_stride`-th grid point, all `N^d` frequencies
/// with spacing `1/L`.
pub fn stft(field: &SampledField, window: &Window, x_stride: usize) -> Result<PhaseSpacePortrait> {
    grid_portrait(field, window, x_stride, field.grid().points_per_axis())
}

/// Like [`stft`] but transforms only a patch around each `x` that holds the
/// window, so the frequency spacing is `1/(P h)` instead of `1/L`.
pub fn stft_local(field: &SampledField, window: &Window, x_stride: usize) -> Result<PhaseSpacePortrait> {
    let g = field.grid();
    let patch = local_patch_size(g.points_per_axis(), g.spacing(), window);
    grid_portrait(field, window, x_stride, patch)
}

/// Complex `V_g f(x, ξ_k)` at the grid point `center` for all `N^d` grid frequencies.
pub fn stft_values_at(field: &SampledField, window: &Window, center: &[usize]) -> Result<Vec<Complex64>> {
    let g = field.grid();
    let d = g.dim();
    let engine = GridStft::new(field, window, g.points_per_axis())?;
    let mut c = [0usize; 3];
    c[..d].copy_from_slice(&center[..d]);
    let mut vals = engine.raw(&c);
    for (flat, v) in vals.iter_mut().enumerate() {
        let xi = g.frequency_point(flat);
        let phase: f64 = (0..d).map(|a| xi[a] * g.coordinate(c[a])).sum();
        *v *= Complex64::from_polar(1.0, -2.0 * PI * phase);
    }
    Ok(vals)
}

/// Streaming mixed norms of a sampled field.
pub fn grid_norms(field: &SampledField, window: &Window, centers: &[[usize; 3]], patch: usize, request: NormRequest) -> Result<NormReport> {
    let g = field.grid();
    let xi_step = 1.0 / (patch as f64 * g.spacing());
    let x_step = if centers.len() > 1 {
        let mut s = f64::INFINITY;
        for a in 0..g.dim() {
            let diff = (centers[1][a] as f64 - centers[0][a] as f64).abs();
            if diff > 0.0 {
                s = s.min(diff);
            }
        }
        s * g.spacing()
    } else {
        g.spacing()
    };
    let mut acc = NormAccumulator::new(g.dim(), x_step, xi_step, request)?;
    stft_grid_stream(field, window, centers, patch, 0.0, &mut |s| acc.push(&s))?;
    Ok(acc.finish())
}

/// STFT of `e^{2πi t μ(y)}` sampled analytically around each `x`.
///
/// Each slice is demodulated by the local frequency `t∇μ(x)` (rounded to the
/// `ξ` lattice), sampled finely enough for the remaining bandwidth, and
/// transformed over a patch of length `1/Δξ`, so all slices share the lattice
/// `Δξ·ℤ^d` no matter how large `t∇μ` becomes.
#[derive(Clone, Copy)]
pub struct FresnelStft<'a> {
    pub symbol: &'a dyn Dispersion,
    pub t: f64,
    pub window: &'a Window,
    pub xi_step: f64,
    /// Entries at or below this level are dropped from stored slices.
    pub floor: f64,
}

impl<'a> FresnelStft<'a> {
    pub fn new(symbol: &'a dyn Dispersion, t: f64, window: &'a Window) -> Self {
        let xi_step = 1.0 / (2.0 * window.support_radius());
        Self { symbol, t, window, xi_step, floor: 1e-15 * window.l1_norm() }
    }

    pub fn with_xi_step(mut self, xi_step: f64) -> Self {
        self.xi_step = xi_step;
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.symbol.dim() != self.window.dim() {
            return Err(Error::Structural("symbol and window dimensions differ".into()));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::Parameter(format!("time must be positive, got {}", self.t)));
        }
        let patch_len = 1.0 / self.xi_step;
        if patch_len < 2.0 * self.window.support_radius() * (1.0 - 1e-12) {
            return Err(Error::Parameter(format!(
                "frequency step {} too coarse: the patch 1/Δξ must hold the window (radius {})",
                self.xi_step,
                self.window.support_radius()
            )));
        }
        Ok(())
    }

    /// Points per axis needed for the slice at `x0`, and the demodulation index.
    fn plan(&self, x0: &Vec3) -> (usize, [i64; 3]) {
        let d = self.symbol.dim();
        let g0 = self.symbol.gradient(&x0[..d]);
        let mut nu = [0i64; 3];
        for a in 0..d {
            nu[a] = (self.t * g0[a] / self.xi_step).round() as i64;
        }
        let r = self.window.support_radius();
        let probes = 17usize;
        let mut spread: f64 = 0.0;
        for flat in 0..probes.pow(d as u32) {
            let k = unravel(flat, probes, d);
            let mut y = [0.0; 3];
            for a in 0..d {
                y[a] = x0[a] - r + 2.0 * r * k[a] as f64 / (probes - 1) as f64;
            }
            let gy = self.symbol.gradient(&y[..d]);
            for a in 0..d {
                spread = spread.max((self.t * gy[a] - nu[a] as f64 * self.xi_step).abs());
            }
        }
        let band = 1.1 * spread + self.window.bandwidth() + 2.0 * self.xi_step;
        let p = fft_friendly(((2.0 * band / self.xi_step).ceil() as usize).max(16));
        (p, nu)
    }

    /// Complex slice values (up to a unimodular factor) and its lattice origin.
    fn raw(&self, x0: &Vec3) -> Result<(Vec<Complex64>, usize, [i64; 3])> {
        let d = self.symbol.dim();
        let (p, nu) = self.plan(x0);
        let total = p.checked_pow(d as u32).unwrap_or(usize::MAX);
        if total > MAX_SLICE_CELLS {
            return Err(Error::Parameter(format!(
                "phase-space slice at x = {:?} needs {p} samples per axis; reduce t or the domain",
                &x0[..d]
            )));
        }
        let hp = 1.0 / (self.xi_step * p as f64);
        let mu0 = self.symbol.value(&x0[..d]);
        let mut buf = Vec::with_capacity(total);
        for flat in 0..total {
            let o = unravel(flat, p, d);
            let mut u = [0.0; 3];
            let mut y = [0.0; 3];
            for a in 0..d {
                u[a] = (o[a] as f64 - (p / 2) as f64) * hp;
                y[a] = x0[a] + u[a];
            }
            let w = self.window.eval(&u[..d]);
            if w < WINDOW_EPS * 1e-3 {
                buf.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let lin: f64 = (0..d).map(|a| nu[a] as f64 * self.xi_step * u[a]).sum();
            let phase = self.t * (self.symbol.value(&y[..d]) - mu0) - lin;
            buf.push(Complex64::from_polar(w, 2.0 * PI * phase.rem_euclid(1.0)));
        }
        centered_forward(&mut buf, p, d, hp);
        let mut origin = [0i64; 3];
        for a in 0..d {
            origin[a] = nu[a] - (p / 2) as i64;
        }
        Ok((buf, p, origin))
    }

    pub fn slice(&self, x0: &Vec3) -> Result<PortraitSlice> {
        let d = self.symbol.dim();
        let (vals, p, origin) = self.raw(x0)?;
        let mut shape = [1usize; 3];
        for s in shape.iter_mut().take(d) {
            *s = p;
        }
        let magnitudes = vals.into_iter().map(|v| v.norm()).collect();
        Ok(PortraitSlice { x: *x0, origin, shape, magnitudes }.trimmed(d, self.floor))
    }

    pub fn stream(&self, lattice: &XLattice, sink: &mut dyn FnMut(PortraitSlice) -> Result<()>) -> Result<()> {
        self.validate()?;
        if lattice.dim() != self.symbol.dim() {
            return Err(Error::Structural("lattice and symbol dimensions differ".into()));
        }
        drive(lattice.points(), |x| self.slice(x), sink)
    }

    pub fn portrait(&self, lattice: &XLattice) -> Result<PhaseSpacePortrait> {
        let mut slices = Vec::with_capacity(lattice.len());
        self.stream(lattice, &mut |s| {
            slices.push(s);
            Ok(())
        })?;
        Ok(PhaseSpacePortrait::new(lattice.dim(), lattice.step(), self.xi_step, self.window.l1_norm(), slices))
    }

    pub fn norms(&self, lattice: &XLattice, request: NormRequest) -> Result<NormReport> {
        let mut acc = NormAccumulator::new(lattice.dim(), lattice.step(), self.xi_step, request)?;
        self.stream(lattice, &mut |s| acc.push(&s))?;
        Ok(acc.finish())
    }
}
