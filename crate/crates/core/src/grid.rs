//! Uniform periodic grids, sampled complex fields and the centered discrete
//! Fourier transform.
//!
//! The transform is scaled so that it approximates the continuum convention
//! `f̂(ξ) = ∫ e^{-2πi ξ·x} f(x) dx`: the forward sum carries the quadrature
//! weight `h^d` and the inverse sum carries `(1/L)^d`. Space samples sit at
//! `x_j = (j - N/2) h` and frequency samples at `ξ_k = (k - N/2) / L`, so the
//! origin is always a grid point.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIMENSION: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    extent: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Self> {
        if !(1..=MAX_DIMENSION).contains(&dim) {
            return Err(Error::Parameter(format!("dimension {dim} outside 1..=3")));
        }
        if n < 2 || n % 2 != 0 {
            return Err(Error::Parameter(format!("points per axis must be even and >= 2, got {n}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Parameter(format!("extent must be positive, got {extent}")));
        }
        let total = n.checked_pow(dim as u32).ok_or_else(|| Error::Parameter("grid too large".into()))?;
        if total > 1 << 27 {
            return Err(Error::Parameter(format!("grid with {total} points exceeds the supported size")));
        }
        Ok(Self { dim, n, extent })
    }

    /// Grid with a prescribed spacing `h` and `n` points per axis.
    pub fn with_spacing(dim: usize, n: usize, h: f64) -> Result<Self> {
        Self::new(dim, n, h * n as f64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn frequency_spacing(&self) -> f64 {
        1.0 / self.extent
    }

    /// Largest representable frequency magnitude per axis, `N / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (2.0 * self.extent)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn frequency_cell_volume(&self) -> f64 {
        self.frequency_spacing().powi(self.dim as i32)
    }

    /// Coordinate of index `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.spacing()
    }

    pub fn frequency(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.frequency_spacing()
    }

    /// Index of the grid point nearest to coordinate `x` (wrapped periodically).
    pub fn nearest_index(&self, x: f64) -> usize {
        let j = (x / self.spacing()).round() as i64 + (self.n / 2) as i64;
        j.rem_euclid(self.n as i64) as usize
    }

    pub fn unravel(&self, flat: usize) -> [usize; MAX_DIMENSION] {
        let mut idx = [0usize; MAX_DIMENSION];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Space coordinates of the flat sample index.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIMENSION] {
        let idx = self.unravel(flat);
        let mut p = [0.0; MAX_DIMENSION];
        for a in 0..self.dim {
            p[a] = self.coordinate(idx[a]);
        }
        p
    }

    pub fn frequency_point(&self, flat: usize) -> [f64; MAX_DIMENSION] {
        let idx = self.unravel(flat);
        let mut p = [0.0; MAX_DIMENSION];
        for a in 0..self.dim {
            p[a] = self.frequency(idx[a]);
        }
        p
    }

    /// Same spacing, doubled extent.
    pub fn doubled(&self) -> Result<Self> {
        Self::new(self.dim, self.n * 2, self.extent * 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Space,
    Frequency,
}

/// Complex samples on a [`GridSpec`], row-major over axes (axis 0 slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<Complex64>,
    domain: Domain,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Structural(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, domain })
    }

    pub fn zeros(grid: GridSpec, domain: Domain) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()], domain }
    }

    /// Samples `f` at the space grid points.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..grid.dim()])).collect();
        Self { grid, values, domain: Domain::Space }
    }

    /// Samples `f` at the frequency grid points.
    pub fn from_frequency_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let values = (0..grid.len()).map(|i| f(&grid.frequency_point(i)[..grid.dim()])).collect();
        Self { grid, values, domain: Domain::Frequency }
    }

    /// Unit-variance complex Gaussian noise, reproducible from `seed`.
    pub fn random(grid: GridSpec, domain: Domain, rng: &mut impl Rng) -> Self {
        let values = (0..grid.len())
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                Complex64::new(a, b)
            })
            .collect();
        Self { grid, values, domain }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Quadrature weight of one sample in this field's domain.
    pub fn cell_volume(&self) -> f64 {
        match self.domain {
            Domain::Space => self.grid.cell_volume(),
            Domain::Frequency => self.grid.frequency_cell_volume(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, values, domain: self.domain })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values, domain: self.domain })
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.domain != other.domain {
            return Err(Error::Structural("fields live on different grids or domains".into()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Value at the sample nearest to `x` (space domain).
    pub fn value_near(&self, x: &[f64]) -> Complex64 {
        let mut idx = [0usize; MAX_DIMENSION];
        for a in 0..self.grid.dim() {
            idx[a] = self.grid.nearest_index(x[a]);
        }
        self.values[self.grid.ravel(&idx)]
    }
}

// ---------------------------------------------------------------------------
// FFT plumbing
// ---------------------------------------------------------------------------

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<(FftPlanner<f64>, PlanCache)>> = OnceLock::new();
    let cell = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cell.lock().expect("fft plan cache poisoned");
    let key = (n, direction == FftDirection::Forward);
    if let Some(p) = guard.1.get(&key) {
        return Arc::clone(p);
    }
    let p = guard.0.plan_fft(n, direction);
    guard.1.insert(key, Arc::clone(&p));
    p
}

/// In-place unnormalized FFT along every axis of a row-major cube of side `n`.
pub(crate) fn fft_nd(data: &mut [Complex64], n: usize, dim: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // Last axis is contiguous.
    for row in data.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    if dim == 1 {
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[start + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, l) in line.iter().enumerate() {
                    data[start + i * stride] = *l;
                }
            }
        }
    }
}

/// Multiplies by `(-1)^{Σ_a i_a}`, which moves the DFT origin to index `N/2`.
pub(crate) fn checkerboard(data: &mut [Complex64], n: usize, dim: usize) {
    let grid_like = |flat: usize| {
        let mut rem = flat;
        let mut parity = 0usize;
        for _ in 0..dim {
            parity += rem % n;
            rem /= n;
        }
        parity % 2 == 1
    };
    for (i, v) in data.iter_mut().enumerate() {
        if grid_like(i) {
            *v = -*v;
        }
    }
}

/// Centered forward transform of raw samples with spacing `h`.
pub(crate) fn centered_forward(data: &mut [Complex64], n: usize, dim: usize, h: f64) {
    checkerboard(data, n, dim);
    fft_nd(data, n, dim, FftDirection::Forward);
    checkerboard(data, n, dim);
    let mut scale = h.powi(dim as i32);
    if (dim * n / 2) % 2 == 1 {
        scale = -scale;
    }
    data.iter_mut().for_each(|v| *v *= scale);
}

/// Centered inverse transform of raw frequency samples with spacing `dxi`.
pub(crate) fn centered_inverse(data: &mut [Complex64], n: usize, dim: usize, dxi: f64) {
    checkerboard(data, n, dim);
    fft_nd(data, n, dim, FftDirection::Inverse);
    checkerboard(data, n, dim);
    let mut scale = dxi.powi(dim as i32);
    if (dim * n / 2) % 2 == 1 {
        scale = -scale;
    }
    data.iter_mut().for_each(|v| *v *= scale);
}

pub fn forward_fourier(field: &SampledField) -> Result<SampledField> {
    if field.domain != Domain::Space {
        return Err(Error::Structural("forward_fourier expects a space-domain field".into()));
    }
    let g = field.grid;
    let mut values = field.values.clone();
    centered_forward(&mut values, g.n, g.dim, g.spacing());
    Ok(SampledField { grid: g, values, domain: Domain::Frequency })
}

pub fn inverse_fourier(field: &SampledField) -> Result<SampledField> {
    if field.domain != Domain::Frequency {
        return Err(Error::Structural("inverse_fourier expects a frequency-domain field".into()));
    }
    let g = field.grid;
    let mut values = field.values.clone();
    centered_inverse(&mut values, g.n, g.dim, g.frequency_spacing());
    Ok(SampledField { grid: g, values, domain: Domain::Space })
}

/// Riemann-sum Lebesgue norm `(w Σ |v|^p)^{1/p}` with the domain's cell weight `w`;
/// `p = f64::INFINITY` gives the maximum modulus.
pub fn lp_norm(field: &SampledField, p: f64) -> Result<f64> {
    lp_norm_weighted(field.values(), field.cell_volume(), p)
}

pub(crate) fn lp_norm_weighted(values: &[Complex64], weight: f64, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Parameter(format!("Lebesgue exponent must lie in [1, inf], got {p}")));
    }
    if p.is_infinite() {
        return Ok(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    if p == 1.0 {
        return Ok(weight * values.iter().map(|v| v.norm()).sum::<f64>());
    }
    if p == 2.0 {
        return Ok((weight * values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt());
    }
    Ok((weight * values.iter().map(|v| v.norm().powf(p)).sum::<f64>()).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn gaussian(x: &[f64]) -> Complex64 {
        Complex64::new((-PI * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
    }

    #[test]
    fn rejects_odd_or_empty_grids() {
        assert!(GridSpec::new(1, 7, 1.0).is_err());
        assert!(GridSpec::new(4, 8, 1.0).is_err());
        assert!(GridSpec::new(1, 8, 0.0).is_err());
        let g = GridSpec::new(2, 8, 4.0).unwrap();
        assert_eq!(g.len(), 64);
        assert!((g.spacing() * 8.0 - 4.0).abs() < 1e-15);
        assert!((g.frequency(0) + g.nyquist()).abs() < 1e-15);
    }

    #[test]
    fn point_mass_transforms_to_constant() {
        let g = GridSpec::new(1, 64, 8.0).unwrap();
        let mut f = SampledField::zeros(g, Domain::Space);
        f.values_mut()[32] = Complex64::new(1.0 / g.spacing(), 0.0);
        let fh = forward_fourier(&f).unwrap();
        for v in fh.values() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
        let back = inverse_fourier(&SampledField::from_frequency_fn(g, |_| Complex64::new(1.0, 0.0))).unwrap();
        assert!((back.values()[32].re - 1.0 / g.spacing()).abs() < 1e-11);
        assert!(back.values()[5].norm() < 1e-11);
    }

    #[test]
    fn gaussian_is_a_fixed_point() {
        let g = GridSpec::new(1, 1024, 32.0).unwrap();
        let f = SampledField::from_fn(g, gaussian);
        let fh = forward_fourier(&f).unwrap();
        let expected = SampledField::from_frequency_fn(g, gaussian);
        let err = fh.sub(&expected).unwrap().max_abs();
        assert!(err < 1e-10, "err {err}");
        let back = inverse_fourier(&expected).unwrap();
        assert!(back.sub(&f).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn gaussian_in_two_and_three_dimensions() {
        for (d, n, l) in [(2, 64, 8.0), (3, 64, 8.0)] {
            let g = GridSpec::new(d, n, l).unwrap();
            let fh = forward_fourier(&SampledField::from_fn(g, gaussian)).unwrap();
            let err = fh.sub(&SampledField::from_frequency_fn(g, gaussian)).unwrap().max_abs();
            assert!(err < 1e-10, "d={d} err {err}");
        }
    }

    #[test]
    fn parseval_and_round_trip_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let d = 1 + trial % 3;
            let n = [16, 32, 64][trial % 3];
            let g = GridSpec::new(d, if d == 3 { 8 } else { n }, 3.0 + trial as f64 * 0.1).unwrap();
            let f = SampledField::random(g, Domain::Space, &mut rng);
            let fh = forward_fourier(&f).unwrap();
            let a = lp_norm(&f, 2.0).unwrap();
            let b = lp_norm(&fh, 2.0).unwrap();
            assert!((a - b).abs() <= 1e-12 * a, "parseval {a} {b}");
            let back = inverse_fourier(&fh).unwrap();
            let rel = back.sub(&f).unwrap().max_abs() / f.max_abs();
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn translation_becomes_modulation() {
        let g = GridSpec::new(1, 128, 16.0).unwrap();
        let a = 5.0 * g.spacing();
        let f = SampledField::from_fn(g, gaussian);
        let shifted = SampledField::from_fn(g, |x| gaussian(&[x[0] - a]));
        let fh = forward_fourier(&f).unwrap();
        let sh = forward_fourier(&shifted).unwrap();
        for k in 0..g.points_per_axis() {
            let xi = g.frequency(k);
            let expected = fh.values()[k] * Complex64::from_polar(1.0, -2.0 * PI * xi * a);
            assert!((sh.values()[k] - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn lp_norms() {
        let g = GridSpec::new(1, 1024, 32.0).unwrap();
        let ind = SampledField::from_fn(g, |x| Complex64::new(if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 }, 0.0));
        assert!((lp_norm(&ind, 1.0).unwrap() - 1.0).abs() <= g.spacing());
        let f = SampledField::from_fn(g, gaussian);
        assert!((lp_norm(&f, 2.0).unwrap() - 2f64.powf(-0.25)).abs() < 1e-10);
        assert!((lp_norm(&f, f64::INFINITY).unwrap() - 1.0).abs() < 1e-15);
        assert!(lp_norm(&f, 0.5).is_err());
    }

    #[test]
    fn domain_mismatch_is_structural() {
        let g = GridSpec::new(1, 16, 4.0).unwrap();
        let f = SampledField::zeros(g, Domain::Frequency);
        assert!(matches!(forward_fourier(&f), Err(Error::Structural(_))));
        assert!(SampledField::new(g, vec![Complex64::new(0.0, 0.0); 3], Domain::Space).is_err());
    }
}
