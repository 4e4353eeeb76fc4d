use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::Window;
use crate::grid::{GridSpec, SampledField};

use super::norm::SolutionNorm;

/// One term `c u^j ū^l` of a polynomial nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub j: u32,
    pub l: u32,
    pub c: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Linear,
    /// `λ|u|^{2k} u`
    PowerAbs { lambda: Complex64, k: u32 },
    /// `λ u^k`
    Power { lambda: Complex64, k: u32 },
    Series { terms: Vec<SeriesTerm> },
}

impl Nonlinearity {
    /// Checks `G(0) = 0`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Linear => Ok(()),
            Self::PowerAbs { k, .. } | Self::Power { k, .. } if *k == 0 => {
                Err(Error::Parameter("the power in a power nonlinearity must be at least 1".into()))
            }
            Self::Series { terms } if terms.iter().any(|t| t.j == 0 && t.l == 0 && t.c != Complex64::new(0.0, 0.0)) => {
                Err(Error::Invariant("series nonlinearity has a constant term, so G(0) != 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Self::Linear => z,
            Self::PowerAbs { lambda, k } => lambda * z.norm_sqr().powi(*k as i32) * z,
            Self::Power { lambda, k } => lambda * z.powu(*k),
            Self::Series { terms } => terms.iter().map(|t| t.c * z.powu(t.j) * z.conj().powu(t.l)).sum(),
        }
    }

    /// Lipschitz constant of `u ↦ G(u)` on the ball of radius `r` of a Banach
    /// algebra whose product constant is `algebra`.
    pub fn lipschitz_constant(&self, r: f64, algebra: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Parameter(format!("ball radius must be positive, got {r}")));
        }
        self.validate()?;
        let a = algebra;
        Ok(match self {
            Self::Linear => 1.0,
            Self::PowerAbs { lambda, k } => {
                let k2 = 2 * *k as i32;
                lambda.norm() * (k2 + 1) as f64 * a.powi(k2) * r.powi(k2)
            }
            Self::Power { lambda, k } => {
                let k = *k as i32;
                lambda.norm() * k as f64 * a.powi(k - 1) * r.powi(k - 1)
            }
            Self::Series { terms } => terms
                .iter()
                .map(|t| {
                    let n = (t.j + t.l) as i32;
                    if n == 0 {
                        0.0
                    } else {
                        t.c.norm() * n as f64 * a.powi(n - 1) * r.powi(n - 1)
                    }
                })
                .sum(),
        })
    }
}

fn random_smooth(grid: &GridSpec, rng: &mut ChaCha8Rng) -> SampledField {
    let d = grid.dim();
    let quarter = 0.25 * grid.extent();
    let bumps: Vec<(Complex64, [f64; 3], [f64; 3], f64)> = (0..3)
        .map(|_| {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            for k in 0..d {
                a[k] = rng.gen_range(-quarter..quarter);
                b[k] = rng.gen_range(-2.0..2.0);
            }
            (c, a, b, rng.gen_range(0.5..2.0))
        })
        .collect();
    SampledField::from_fn(*grid, |x| {
        bumps
            .iter()
            .map(|(c, a, b, s)| {
                let r2: f64 = (0..d).map(|k| (x[k] - a[k]).powi(2)).sum();
                let ph: f64 = (0..d).map(|k| b[k] * x[k]).sum();
                c * Complex64::from_polar((-std::f64::consts::PI * r2 / (s * s)).exp(), 2.0 * std::f64::consts::PI * ph)
            })
            .sum()
    })
}

/// `max ‖uv‖ / (‖u‖ ‖v‖)` in the discrete `W^{q,∞}` norm over random smooth pairs.
pub fn calibrate_algebra_constant(grid: &GridSpec, window: &Window, q: f64, pairs: usize, seed: u64) -> Result<f64> {
    if pairs == 0 {
        return Err(Error::Parameter("need at least one pair".into()));
    }
    let norm = SolutionNorm::new(grid, window, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let u = random_smooth(grid, &mut rng);
        let v = random_smooth(grid, &mut rng);
        let uv: Vec<Complex64> = u.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
        let uv = SampledField::new(*grid, uv, crate::grid::Domain::Space)?;
        let r = norm.of_space(&uv)? / (norm.of_space(&u)? * norm.of_space(&v)?);
        best = best.max(r);
    }
    Ok(best)
}
