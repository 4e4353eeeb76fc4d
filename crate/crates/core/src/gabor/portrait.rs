use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbols::Vec3;

/// One `x` of a phase-space portrait: `|V_g f(x, ξ)|` on a box of the
/// `ξ` lattice. Entries are row-major over the `ξ` axes, starting at lattice
/// index `origin` (so `ξ_a = (origin_a + k_a)·Δξ`).
#[derive(Debug, Clone, PartialEq)]
pub struct PortraitSlice {
    pub x: Vec3,
    pub origin: [i64; 3],
    pub shape: [usize; 3],
    pub magnitudes: Vec<f64>,
}

impl PortraitSlice {
    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    /// Lattice index of entry `flat`.
    pub fn index(&self, flat: usize, dim: usize) -> [i64; 3] {
        let mut idx = [0i64; 3];
        let mut rem = flat;
        for a in (0..dim).rev() {
            idx[a] = self.origin[a] + (rem % self.shape[a]) as i64;
            rem /= self.shape[a];
        }
        idx
    }

    /// Shrinks the box to the entries above `floor`.
    pub fn trimmed(self, dim: usize, floor: f64) -> Self {
        if floor <= 0.0 {
            return self;
        }
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (flat, v) in self.magnitudes.iter().enumerate() {
            if *v > floor {
                any = true;
                let mut rem = flat;
                for a in (0..dim).rev() {
                    let i = rem % self.shape[a];
                    rem /= self.shape[a];
                    lo[a] = lo[a].min(i);
                    hi[a] = hi[a].max(i);
                }
            }
        }
        if !any {
            return Self { x: self.x, origin: self.origin, shape: [0, 1, 1], magnitudes: Vec::new() };
        }
        let mut shape = [1usize; 3];
        let mut origin = self.origin;
        for a in 0..dim {
            shape[a] = hi[a] - lo[a] + 1;
            origin[a] += lo[a] as i64;
        }
        if shape[..dim] == self.shape[..dim] {
            return self;
        }
        let total: usize = shape[..dim].iter().product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut src = 0usize;
            let mut stride = 1usize;
            let mut idx = [0usize; 3];
            for a in (0..dim).rev() {
                idx[a] = rem % shape[a] + lo[a];
                rem /= shape[a];
            }
            for a in (0..dim).rev() {
                src += idx[a] * stride;
                stride *= self.shape[a];
            }
            out.push(self.magnitudes[src]);
        }
        Self { x: self.x, origin, shape, magnitudes: out }
    }
}

/// `|V_g f|` sampled on an `(x, ξ)` lattice with steps `Δx`, `Δξ`.
#[derive(Debug, Clone)]
pub struct PhaseSpacePortrait {
    dim: usize,
    x_step: f64,
    xi_step: f64,
    window_l1: f64,
    slices: Vec<PortraitSlice>,
}

impl PhaseSpacePortrait {
    pub fn new(dim: usize, x_step: f64, xi_step: f64, window_l1: f64, slices: Vec<PortraitSlice>) -> Self {
        Self { dim, x_step, xi_step, window_l1, slices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_step(&self) -> f64 {
        self.x_step
    }

    pub fn xi_step(&self) -> f64 {
        self.xi_step
    }

    pub fn window_l1(&self) -> f64 {
        self.window_l1
    }

    pub fn slices(&self) -> &[PortraitSlice] {
        &self.slices
    }

    pub fn max_magnitude(&self) -> f64 {
        self.slices.iter().flat_map(|s| s.magnitudes.iter()).fold(0.0, |a, &b| a.max(b))
    }

    fn report(&self, request: NormRequest) -> Result<NormReport> {
        let mut acc = NormAccumulator::new(self.dim, self.x_step, self.xi_step, request)?;
        for s in &self.slices {
            acc.push(s)?;
        }
        Ok(acc.finish())
    }

    /// Discrete `M^{p,q}`: inner `L^p` over `x`, outer `L^q` over `ξ`.
    pub fn modulation_norm(&self, p: f64, q: f64) -> Result<f64> {
        Ok(self.report(NormRequest::modulation(p, q))?.modulation[0].1)
    }

    /// Discrete `W^{p,q}`: inner `L^p` over `ξ`, outer `L^q` over `x`.
    pub fn amalgam_norm(&self, p: f64, q: f64) -> Result<f64> {
        Ok(self.report(NormRequest::amalgam(p, q))?.amalgam[0].1)
    }

    /// `(x, ‖V_g f(x, ·)‖_{L^p})` for every slice.
    pub fn slice_norms(&self, p: f64) -> Result<Vec<(Vec3, f64)>> {
        let rep = self.report(NormRequest::amalgam(p, f64::INFINITY))?;
        Ok(rep.slices.into_iter().next().map(|s| s.1).unwrap_or_default())
    }

    /// Rows `x_1..x_d, xi_1..xi_d, magnitude`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dim;
        let head: Vec<String> = (1..=d).map(|a| format!("x{a}")).chain((1..=d).map(|a| format!("xi{a}"))).collect();
        writeln!(w, "{},magnitude", head.join(","))?;
        for s in &self.slices {
            for (flat, v) in s.magnitudes.iter().enumerate() {
                let idx = s.index(flat, d);
                let mut row = String::new();
                for a in 0..d {
                    row.push_str(&format!("{:.9e},", s.x[a]));
                }
                for a in 0..d {
                    row.push_str(&format!("{:.9e},", idx[a] as f64 * self.xi_step));
                }
                writeln!(w, "{row}{v:.9e}")?;
            }
        }
        Ok(())
    }
}

/// Which mixed norms to accumulate while slices stream past.
#[derive(Debug, Clone, Default)]
pub struct NormRequest {
    pub modulation: Vec<(f64, f64)>,
    pub amalgam: Vec<(f64, f64)>,
}

impl NormRequest {
    pub fn modulation(p: f64, q: f64) -> Self {
        Self { modulation: vec![(p, q)], amalgam: Vec::new() }
    }

    pub fn amalgam(p: f64, q: f64) -> Self {
        Self { modulation: Vec::new(), amalgam: vec![(p, q)] }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub modulation: Vec<((f64, f64), f64)>,
    pub amalgam: Vec<((f64, f64), f64)>,
    /// Per inner exponent `p`, the slice norms `‖V_g f(x,·)‖_{L^p}`.
    pub slices: Vec<(f64, Vec<(Vec3, f64)>)>,
    pub max_magnitude: f64,
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Parameter(format!("Lebesgue exponent must lie in [1, inf], got {p}")));
    }
    Ok(())
}

fn pow_acc(acc: &mut f64, v: f64, p: f64) {
    if p.is_infinite() {
        *acc = acc.max(v);
    } else if p == 1.0 {
        *acc += v;
    } else if p == 2.0 {
        *acc += v * v;
    } else {
        *acc += v.powf(p);
    }
}

fn finish_norm(sum: f64, weight: f64, p: f64) -> f64 {
    if p.is_infinite() {
        sum
    } else {
        (weight * sum).powf(1.0 / p)
    }
}

const MAX_XI_CELLS: usize = 1 << 26;

/// Dense per-`ξ` accumulators over a growing lattice box.
#[derive(Debug, Clone)]
struct XiBox {
    lo: [i64; 3],
    shape: [usize; 3],
    data: Vec<Vec<f64>>,
}

impl XiBox {
    fn ensure(&mut self, dim: usize, origin: [i64; 3], shape: [usize; 3]) -> Result<()> {
        let inside = (0..dim).all(|a| {
            self.shape[a] > 0 && origin[a] >= self.lo[a] && origin[a] + shape[a] as i64 <= self.lo[a] + self.shape[a] as i64
        });
        if inside {
            return Ok(());
        }
        let mut lo = [0i64; 3];
        let mut new_shape = [1usize; 3];
        for a in 0..dim {
            let (mut a_lo, mut a_hi) = (origin[a], origin[a] + shape[a] as i64);
            if self.shape[a] > 0 {
                a_lo = a_lo.min(self.lo[a]);
                a_hi = a_hi.max(self.lo[a] + self.shape[a] as i64);
                let span = a_hi - a_lo;
                // Grow with slack so that repeated extension stays cheap.
                if a_lo < self.lo[a] {
                    a_lo -= span / 2;
                }
                if a_hi > self.lo[a] + self.shape[a] as i64 {
                    a_hi += span / 2;
                }
            }
            lo[a] = a_lo;
            new_shape[a] = (a_hi - a_lo) as usize;
        }
        let total: usize = new_shape[..dim].iter().product();
        if total > MAX_XI_CELLS {
            return Err(Error::Parameter(format!("frequency lattice of {total} cells is too large")));
        }
        let mut data = vec![vec![0.0; total]; self.data.len()];
        if self.shape[0] > 0 {
            let old_total: usize = self.shape[..dim].iter().product();
            for flat in 0..old_total {
                let mut rem = flat;
                let mut dst = 0usize;
                let mut idx = [0i64; 3];
                for a in (0..dim).rev() {
                    idx[a] = self.lo[a] + (rem % self.shape[a]) as i64;
                    rem /= self.shape[a];
                }
                for a in 0..dim {
                    dst = dst * new_shape[a] + (idx[a] - lo[a]) as usize;
                }
                for (k, d) in data.iter_mut().enumerate() {
                    d[dst] = self.data[k][flat];
                }
            }
        }
        self.lo = lo;
        self.shape = new_shape;
        self.data = data;
        Ok(())
    }
}

/// Streams slices into mixed-norm sums without keeping them.
#[derive(Debug, Clone)]
pub struct NormAccumulator {
    dim: usize,
    x_step: f64,
    xi_step: f64,
    request: NormRequest,
    mod_ps: Vec<f64>,
    am_ps: Vec<f64>,
    xi: XiBox,
    slices: Vec<Vec<(Vec3, f64)>>,
    max_magnitude: f64,
}

fn distinct(ps: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for p in ps {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

impl NormAccumulator {
    pub fn new(dim: usize, x_step: f64, xi_step: f64, request: NormRequest) -> Result<Self> {
        for &(p, q) in request.modulation.iter().chain(&request.amalgam) {
            check_exponent(p)?;
            check_exponent(q)?;
        }
        let mod_ps = distinct(request.modulation.iter().map(|r| r.0));
        let am_ps = distinct(request.amalgam.iter().map(|r| r.0));
        let xi = XiBox { lo: [0; 3], shape: [0; 3], data: vec![Vec::new(); mod_ps.len()] };
        let slices = vec![Vec::new(); am_ps.len()];
        Ok(Self { dim, x_step, xi_step, request, mod_ps, am_ps, xi, slices, max_magnitude: 0.0 })
    }

    pub fn push(&mut self, slice: &PortraitSlice) -> Result<()> {
        let d = self.dim;
        self.max_magnitude = slice.magnitudes.iter().fold(self.max_magnitude, |a, &b| a.max(b));
        let wxi = self.xi_step.powi(d as i32);
        for (k, &p) in self.am_ps.iter().enumerate() {
            let mut s = 0.0;
            for &v in &slice.magnitudes {
                pow_acc(&mut s, v, p);
            }
            self.slices[k].push((slice.x, finish_norm(s, wxi, p)));
        }
        if self.mod_ps.is_empty() || slice.magnitudes.is_empty() {
            return Ok(());
        }
        self.xi.ensure(d, slice.origin, slice.shape)?;
        let (lo, shape) = (self.xi.lo, self.xi.shape);
        let inner = slice.shape[d - 1];
        let rows = slice.magnitudes.len() / inner;
        for row in 0..rows {
            let mut rem = row;
            let mut idx = [0i64; 3];
            for a in (0..d - 1).rev() {
                idx[a] = slice.origin[a] + (rem % slice.shape[a]) as i64;
                rem /= slice.shape[a];
            }
            idx[d - 1] = slice.origin[d - 1];
            let mut dst = 0usize;
            for a in 0..d {
                dst = dst * shape[a] + (idx[a] - lo[a]) as usize;
            }
            let src = &slice.magnitudes[row * inner..(row + 1) * inner];
            for (k, &p) in self.mod_ps.iter().enumerate() {
                let acc = &mut self.xi.data[k][dst..dst + inner];
                for (a, &v) in acc.iter_mut().zip(src) {
                    pow_acc(a, v, p);
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> NormReport {
        let d = self.dim;
        let wx = self.x_step.powi(d as i32);
        let wxi = self.xi_step.powi(d as i32);
        let modulation = self
            .request
            .modulation
            .iter()
            .map(|&(p, q)| {
                let k = self.mod_ps.iter().position(|&v| v == p).expect("registered");
                let mut outer = 0.0;
                for &s in &self.xi.data[k] {
                    pow_acc(&mut outer, finish_norm(s, wx, p), q);
                }
                ((p, q), finish_norm(outer, wxi, q))
            })
            .collect();
        let amalgam = self
            .request
            .amalgam
            .iter()
            .map(|&(p, q)| {
                let k = self.am_ps.iter().position(|&v| v == p).expect("registered");
                let mut outer = 0.0;
                for &(_, s) in &self.slices[k] {
                    pow_acc(&mut outer, s, q);
                }
                ((p, q), finish_norm(outer, wx, q))
            })
            .collect();
        let slices = self.am_ps.iter().copied().zip(self.slices).collect();
        NormReport { modulation, amalgam, slices, max_magnitude: self.max_magnitude }
    }
}
