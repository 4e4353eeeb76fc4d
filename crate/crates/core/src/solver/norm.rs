use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::gabor::{grid_norms, local_patch_size, strided_centers, NormRequest, Window};
use crate::grid::{inverse_fourier, Domain, GridSpec, SampledField};

/// Default spacing of the `x` lattice on which solution norms take their supremum.
pub const NORM_X_STEP: f64 = 0.25;

/// Discrete `W^{q,∞}` norm on one grid.
#[derive(Debug, Clone)]
pub struct SolutionNorm {
    grid: GridSpec,
    window: Window,
    centers: Vec<[usize; 3]>,
    patch: usize,
    q: f64,
}

impl SolutionNorm {
    pub fn new(grid: &GridSpec, window: &Window, q: f64) -> Result<Self> {
        Self::with_x_step(grid, window, q, NORM_X_STEP)
    }

    pub fn with_x_step(grid: &GridSpec, window: &Window, q: f64, x_step: f64) -> Result<Self> {
        let stride = ((x_step / grid.spacing()).round() as usize).max(1);
        Ok(Self {
            grid: *grid,
            window: window.clone(),
            centers: strided_centers(grid.points_per_axis(), grid.dim(), stride),
            patch: local_patch_size(grid.points_per_axis(), grid.spacing(), window),
            q,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn of_space(&self, field: &SampledField) -> Result<f64> {
        let rep = grid_norms(field, &self.window, &self.centers, self.patch, NormRequest::amalgam(self.q, f64::INFINITY))?;
        Ok(rep.amalgam[0].1)
    }

    pub fn of_spectrum(&self, spectrum: &[Complex64]) -> Result<f64> {
        let f = inverse_fourier(&SampledField::new(self.grid, spectrum.to_vec(), Domain::Frequency)?)?;
        self.of_space(&f)
    }

    /// `max_i ‖a_i − b_i‖` over time nodes.
    pub fn max_difference(&self, a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Result<f64> {
        let norms: Vec<f64> = a
            .par_iter()
            .zip(b)
            .map(|(x, y)| {
                let diff: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
                if diff.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
                    Ok(0.0)
                } else {
                    self.of_spectrum(&diff)
                }
            })
            .collect::<Result<_>>()?;
        Ok(norms.into_iter().fold(0.0, f64::max))
    }

    pub fn per_node(&self, a: &[Vec<Complex64>]) -> Result<Vec<f64>> {
        a.par_iter().map(|x| self.of_spectrum(x)).collect()
    }
}

/// `Δξ^d Σ |û|`
pub fn fourier_l1(grid: &GridSpec, spectrum: &[Complex64]) -> f64 {
    grid.frequency_cell_volume() * spectrum.iter().map(|v| v.norm()).sum::<f64>()
}
