//! The Duhamel map `u ↦ U(t)f + 2πi ∫₀ᵗ U(t−s)[a(s) V G(u(s))] ds` on a set of
//! time nodes, evaluated mode by mode on the Fourier side.
//!
//! On each mesh interval the source is replaced by its quadratic interpolant
//! and integrated exactly against the phase `e^{2πi(t−s)μ(ξ)}`, so the
//! oscillation of high modes costs nothing.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{forward_fourier, inverse_fourier, Domain, GridSpec, SampledField};
use crate::potentials::PotentialOperator;
use crate::symbols::Dispersion;

use super::nonlinearity::Nonlinearity;
use super::norm::fourier_l1;

/// `s_i = T (i/n)^γ`, `i = 0..=n`.
pub fn graded_mesh(step: f64, n: usize, gamma: f64) -> Vec<f64> {
    (0..=n).map(|i| step * (i as f64 / n as f64).powf(gamma)).collect()
}

/// `∫_0^1 e^{zθ} θ^k dθ` for `k = 0, 1, 2`, with `e^z`.
fn moments(z: Complex64, ez: Complex64) -> [Complex64; 3] {
    if z.norm() <= 1.0 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..24 {
            for (k, o) in out.iter_mut().enumerate() {
                *o += term / (n + k + 1) as f64;
            }
            term *= z / (n + 1) as f64;
        }
        out
    } else {
        let i0 = (ez - 1.0) / z;
        let i1 = (ez - i0) / z;
        let i2 = (ez - 2.0 * i1) / z;
        [i0, i1, i2]
    }
}

pub(crate) struct DuhamelOperator<'a> {
    pub grid: GridSpec,
    /// `μ(ξ)` per mode.
    pub mu: &'a [f64],
    pub potential: Option<&'a PotentialOperator>,
    pub nonlinearity: &'a Nonlinearity,
    pub t_start: f64,
    pub nodes: Vec<f64>,
}

fn phase(mu: f64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (mu * t).rem_euclid(1.0))
}

impl DuhamelOperator<'_> {
    pub fn free(&self, f_hat: &[Complex64]) -> Vec<Vec<Complex64>> {
        self.nodes
            .par_iter()
            .map(|&s| f_hat.iter().zip(self.mu).map(|(f, &m)| f * phase(m, s)).collect())
            .collect()
    }

    pub fn has_source(&self) -> bool {
        self.potential.is_some()
    }

    /// `2πi · FT(a(s_i) V G(u(s_i)))` per node.
    pub fn sources(&self, u: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        let Some(op) = self.potential else {
            return Ok(vec![vec![Complex64::new(0.0, 0.0); self.grid.len()]; u.len()]);
        };
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        u.par_iter()
            .zip(&self.nodes)
            .map(|(uh, &s)| {
                let g = if self.nonlinearity.is_linear() {
                    uh.clone()
                } else {
                    let mut x = inverse_fourier(&SampledField::new(self.grid, uh.clone(), Domain::Frequency)?)?;
                    x.values_mut().iter_mut().for_each(|v| *v = self.nonlinearity.eval(*v));
                    forward_fourier(&x)?.into_values()
                };
                let mut w = op.apply_spectrum(self.t_start + s, &g)?;
                w.iter_mut().for_each(|v| *v *= two_pi_i);
                Ok(w)
            })
            .collect()
    }

    /// `∫_0^{s_j} e^{2πi(s_j−s)μ} w(s) ds` at the nodes `idx` (indices into
    /// `self.nodes`), using only the sources at those nodes.
    fn integrate(&self, w: &[Vec<Complex64>], idx: &[usize]) -> Result<Vec<Vec<Complex64>>> {
        let k = idx.len();
        if k < 3 {
            return Err(Error::Parameter("the time quadrature needs at least two intervals".into()));
        }
        let n = self.grid.len();
        let s: Vec<f64> = idx.iter().map(|&i| self.nodes[i]).collect();
        let mut flat = vec![Complex64::new(0.0, 0.0); n * k];
        flat.par_chunks_mut(k).enumerate().for_each(|(mode, out)| {
            let mu = self.mu[mode];
            let mut q = Complex64::new(0.0, 0.0);
            for j in 1..k {
                let h = s[j] - s[j - 1];
                let third = if j >= 2 { j - 2 } else { 2 };
                let a = (s[j] - s[third]) / h;
                let w0 = w[idx[j]][mode];
                let w1 = w[idx[j - 1]][mode];
                let wa = w[idx[third]][mode];
                let c2 = ((wa - w0) - (w1 - w0) * a) / (a * (a - 1.0));
                let c1 = (w1 - w0) - c2;
                let ez = phase(mu, h);
                let z = Complex64::new(0.0, 2.0 * PI * mu * h);
                let [i0, i1, i2] = moments(z, ez);
                q = ez * q + (w0 * i0 + c1 * i1 + c2 * i2) * h;
                out[j] = q;
            }
        });
        Ok((0..k).map(|j| (0..n).map(|mode| flat[mode * k + j]).collect()).collect())
    }

    /// `u₀ + A G(u)` at every node.
    pub fn apply(&self, u0: &[Vec<Complex64>], u: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        if !self.has_source() {
            return Ok(u0.to_vec());
        }
        let w = self.sources(u)?;
        let all: Vec<usize> = (0..self.nodes.len()).collect();
        let q = self.integrate(&w, &all)?;
        Ok(u0.iter().zip(q).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect())
    }

    /// Difference at the last node between the integral on all nodes and on
    /// every second node, in `FL¹`, divided by `2³ − 1`.
    pub fn quadrature_estimate(&self, u: &[Vec<Complex64>]) -> Result<f64> {
        if !self.has_source() {
            return Ok(0.0);
        }
        let n = self.nodes.len() - 1;
        if n % 2 != 0 || n < 4 {
            return Err(Error::Parameter("the self-estimate needs an even number of at least 4 intervals".into()));
        }
        let w = self.sources(u)?;
        let all: Vec<usize> = (0..=n).collect();
        let even: Vec<usize> = (0..=n).step_by(2).collect();
        let fine = self.integrate(&w, &all)?;
        let coarse = self.integrate(&w, &even)?;
        let diff: Vec<Complex64> = fine[n].iter().zip(&coarse[n / 2]).map(|(a, b)| a - b).collect();
        Ok(fourier_l1(&self.grid, &diff) / 7.0)
    }
}

/// `μ(ξ)` on the frequency grid.
pub(crate) fn symbol_values(symbol: &dyn Dispersion, grid: &GridSpec) -> Vec<f64> {
    let d = grid.dim();
    (0..grid.len()).into_par_iter().map(|k| symbol.value(&grid.frequency_point(k)[..d])).collect()
}
