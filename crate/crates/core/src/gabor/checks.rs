use num_complex::Complex64;
use serde::Serialize;

use super::portrait::NormRequest;
use super::stft::{grid_norms, local_patch_size, strided_centers};
use super::window::Window;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledField};

/// Discrete `M^{p,q}` (or `W^{p,q}` with `amalgam`) of a sampled field with
/// `x` on every `x_stride`-th grid point.
pub fn field_norm(field: &SampledField, window: &Window, x_stride: usize, p: f64, q: f64, amalgam: bool) -> Result<f64> {
    if x_stride == 0 {
        return Err(Error::Parameter("x_stride must be at least 1".into()));
    }
    let g = field.grid();
    let centers = strided_centers(g.points_per_axis(), g.dim(), x_stride);
    let patch = local_patch_size(g.points_per_axis(), g.spacing(), window);
    let request = if amalgam { NormRequest::amalgam(p, q) } else { NormRequest::modulation(p, q) };
    let rep = grid_norms(field, window, &centers, patch, request)?;
    Ok(if amalgam { rep.amalgam[0].1 } else { rep.modulation[0].1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct DilationRow {
    pub lambda: f64,
    pub norm: f64,
    /// `|λ|^{−d(1/p−1/q+1)} (1+λ²)^{d/2}`
    pub bound_factor: f64,
    /// `‖f_λ‖ / (C · bound_factor · ‖f‖)` with `C` set so the `λ = 1` row is `1/2`.
    pub ratio: f64,
}

pub fn dilation_factor(dim: usize, lambda: f64, p: f64, q: f64) -> f64 {
    let d = dim as f64;
    lambda.abs().powf(-d * (1.0 / p - 1.0 / q + 1.0)) * (1.0 + lambda * lambda).powf(d / 2.0)
}

/// `M^{p,q}` norms of `f_λ(x) = f(λx)` against the dilation bound.
pub fn dilation_scaling_check<F>(f: F, grid: &GridSpec, window: &Window, lambdas: &[f64], p: f64, q: f64) -> Result<Vec<DilationRow>>
where
    F: Fn(&[f64]) -> Complex64,
{
    let d = grid.dim();
    let norm_at = |lambda: f64| -> Result<f64> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::Parameter(format!("dilation must be finite and non-zero, got {lambda}")));
        }
        let field = SampledField::from_fn(*grid, |x| {
            let mut y = [0.0; 3];
            for a in 0..d {
                y[a] = lambda * x[a];
            }
            f(&y[..d])
        });
        field_norm(&field, window, 1, p, q, false)
    };
    let base = norm_at(1.0)?;
    let c = 2.0 / dilation_factor(d, 1.0, p, q);
    lambdas
        .iter()
        .map(|&lambda| {
            let norm = norm_at(lambda)?;
            let bound_factor = dilation_factor(d, lambda, p, q);
            Ok(DilationRow { lambda, norm, bound_factor, ratio: norm / (c * bound_factor * base) })
        })
        .collect()
}

/// `‖f‖_{M^{p,q}}` with window `g1` divided by the same with `g2`.
pub fn window_swap_equivalence(field: &SampledField, g1: &Window, g2: &Window, p: f64, q: f64) -> Result<f64> {
    let a = field_norm(field, g1, 1, p, q, false)?;
    let b = field_norm(field, g2, 1, p, q, false)?;
    if b == 0.0 {
        return Err(Error::Diagnostic("reference norm vanished".into()));
    }
    Ok(a / b)
}
