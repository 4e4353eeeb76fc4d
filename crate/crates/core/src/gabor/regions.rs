//! The split of phase space into the part near the graph of `∇μ̃`
//! (`|ξ − ∇μ̃(x)| ≤ A|x|^{m−2}`) and its complement, where `|V_g F_μ|` decays
//! rapidly in `⟨ξ − ∇μ̃(x)⟩`.

use crate::error::{Error, Result};
use crate::regression::{fit_line, LinearFit};
use crate::symbols::{fibonacci_sphere, Dispersion, Mat3, Vec3};

use super::portrait::PhaseSpacePortrait;

/// Level below which portrait entries are ignored by the decay fit.
pub const NOISE_FLOOR: f64 = 1e-12;
const MIN_FIT_POINTS: usize = 50;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Largest `|eigenvalue|` of the leading `d×d` block of a symmetric matrix.
pub fn operator_norm(h: &Mat3, d: usize) -> f64 {
    match d {
        1 => h[0][0].abs(),
        2 => {
            let mean = 0.5 * (h[0][0] + h[1][1]);
            let rad = (0.25 * (h[0][0] - h[1][1]).powi(2) + h[0][1] * h[1][0]).max(0.0).sqrt();
            (mean + rad).abs().max((mean - rad).abs())
        }
        _ => {
            // Power iteration on h² from a few starts; converges to the top |eigenvalue|.
            let mut best: f64 = 0.0;
            for start in [[1.0, 0.3, 0.1], [0.1, 1.0, 0.3], [0.3, 0.1, 1.0]] {
                let mut v = start;
                for _ in 0..200 {
                    let mut w = [0.0; 3];
                    for i in 0..3 {
                        w[i] = (0..3).map(|j| h[i][j] * v[j]).sum();
                    }
                    let mut u = [0.0; 3];
                    for i in 0..3 {
                        u[i] = (0..3).map(|j| h[i][j] * w[j]).sum();
                    }
                    let n = norm(&u);
                    if n == 0.0 {
                        break;
                    }
                    v = [u[0] / n, u[1] / n, u[2] / n];
                }
                let mut w = [0.0; 3];
                for i in 0..3 {
                    w[i] = (0..3).map(|j| h[i][j] * v[j]).sum();
                }
                best = best.max(norm(&w));
            }
            best
        }
    }
}

/// `A = 2C` with `C = max ‖∇²μ̃(x+z)‖ / |x|^{m−2}` over `1 ≤ |x| ≤ 4`, `|z| ≤ 1`,
/// estimated on a deterministic sample.
pub fn calibrate_a(symbol: &dyn Dispersion) -> f64 {
    let d = symbol.dim();
    let m = symbol.degree();
    let dirs = fibonacci_sphere(d, if d == 1 { 2 } else { 64 });
    let shifts = {
        let mut s = vec![vec![0.0; d]];
        for r in [0.5, 1.0] {
            for u in &dirs {
                s.push(u.iter().map(|v| r * v).collect());
            }
        }
        s
    };
    let mut c: f64 = 0.0;
    for k in 0..=30 {
        let radius = 1.0 + 3.0 * k as f64 / 30.0;
        for u in &dirs {
            for z in &shifts {
                let mut y = [0.0; 3];
                for a in 0..d {
                    y[a] = radius * u[a] + z[a];
                }
                let h = symbol.hessian(&y[..d]);
                c = c.max(operator_norm(&h, d) / radius.powf(m - 2.0));
            }
        }
    }
    2.0 * c
}

fn far_from_graph(symbol: &dyn Dispersion, a: f64, x: &[f64], xi: &[f64]) -> bool {
    let d = symbol.dim();
    let g = symbol.gradient(x);
    let dist = norm(&(0..d).map(|k| xi[k] - g[k]).collect::<Vec<_>>());
    dist > a * norm(x).powf(symbol.degree() - 2.0)
}

/// Per slice, per stored entry: `true` where `(x, ξ)` lies in the far region.
pub fn region_partition(portrait: &PhaseSpacePortrait, symbol: &dyn Dispersion, a: f64) -> Result<Vec<Vec<bool>>> {
    let d = portrait.dim();
    if symbol.dim() != d {
        return Err(Error::Structural(format!("symbol is {}-dimensional, portrait is {d}-dimensional", symbol.dim())));
    }
    if !(a > 0.0) {
        return Err(Error::Parameter(format!("region constant must be positive, got {a}")));
    }
    let dxi = portrait.xi_step();
    Ok(portrait
        .slices()
        .iter()
        .map(|s| {
            (0..s.len())
                .map(|flat| {
                    let idx = s.index(flat, d);
                    let mut xi = [0.0; 3];
                    for k in 0..d {
                        xi[k] = idx[k] as f64 * dxi;
                    }
                    far_from_graph(symbol, a, &s.x[..d], &xi[..d])
                })
                .collect()
        })
        .collect())
}

/// `|{x ∈ lattice : |ξ − ∇μ̃(x)| ≤ A|x|^{m−2}}|` for one `ξ`.
pub fn near_region_measure(symbol: &dyn Dispersion, a: f64, xi: &[f64], points: &[Vec3], step: f64) -> f64 {
    let d = symbol.dim();
    let count = points.iter().filter(|x| !far_from_graph(symbol, a, &x[..d], xi)).count();
    count as f64 * step.powi(d as i32)
}

/// `sup_ξ` of [`near_region_measure`] over lattice `x`.
///
/// In one dimension each `x` is near exactly the `ξ` in
/// `[μ̃'(x) − A|x|^{m−2}, μ̃'(x) + A|x|^{m−2}]`, so the supremum is the largest
/// overlap of these intervals, found by a sweep. In higher dimensions the
/// supremum is taken over the candidate set `{∇μ̃(x)}`, which contains the
/// centre of every near ball.
pub fn near_region_sup(symbol: &dyn Dispersion, a: f64, points: &[Vec3], step: f64) -> f64 {
    let d = symbol.dim();
    let m = symbol.degree();
    let cell = step.powi(d as i32);
    if d == 1 {
        let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * points.len());
        for x in points {
            let g = symbol.gradient(&x[..1])[0];
            let r = a * x[0].abs().powf(m - 2.0);
            events.push((g - r, 1));
            events.push((g + r, -1));
        }
        // Closed intervals: at equal positions starts come before ends.
        events.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.1.cmp(&p.1)));
        let (mut cur, mut best) = (0i32, 0i32);
        for (_, e) in events {
            cur += e;
            best = best.max(cur);
        }
        return best as f64 * cell;
    }
    use rayon::prelude::*;
    let grads: Vec<Vec3> = points.iter().map(|x| symbol.gradient(&x[..d])).collect();
    let radii: Vec<f64> = points.iter().map(|x| a * norm(&x[..d]).powf(m - 2.0)).collect();
    let best = grads
        .par_iter()
        .map(|xi| {
            grads
                .iter()
                .zip(&radii)
                .filter(|(g, r)| norm(&(0..d).map(|k| xi[k] - g[k]).collect::<Vec<_>>()) <= **r)
                .count()
        })
        .max()
        .unwrap_or(0);
    best as f64 * cell
}

/// Least-squares slope of `ln|V_g F|` against `ln⟨ξ − ∇μ̃(x)⟩` over far-region
/// entries above [`NOISE_FLOOR`].
pub fn decay_exponent_fit(portrait: &PhaseSpacePortrait, symbol: &dyn Dispersion, a: f64) -> Result<LinearFit> {
    let d = portrait.dim();
    let mask = region_partition(portrait, symbol, a)?;
    let dxi = portrait.xi_step();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (s, far) in portrait.slices().iter().zip(&mask) {
        let g = symbol.gradient(&s.x[..d]);
        for (flat, &v) in s.magnitudes.iter().enumerate() {
            if !far[flat] || v <= NOISE_FLOOR {
                continue;
            }
            let idx = s.index(flat, d);
            let dist2: f64 = (0..d).map(|k| (idx[k] as f64 * dxi - g[k]).powi(2)).sum();
            xs.push(0.5 * (1.0 + dist2).ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::Diagnostic(format!(
            "only {} far-region entries above the noise floor; need {MIN_FIT_POINTS}",
            xs.len()
        )));
    }
    fit_line(&xs, &ys)
}
