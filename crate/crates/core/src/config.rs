//! JSON descriptors for grids, symbols, potentials, data and solver runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{Window, WindowKind};
use crate::grid::{GridSpec, SampledField};
use crate::potentials::{Envelope, Potential};
use crate::regression::logspace;
use crate::solver::{Mode, Nonlinearity, SolverConfig};
use crate::symbols::{Dispersion, HomogeneousSymbol};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub points: usize,
    pub extent: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.points, self.extent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolConfig {
    /// `|x|^m`
    RadialPower { dim: usize, m: f64 },
    /// `½ Qx·x`, row-major.
    QuadraticForm { dim: usize, q: Vec<f64> },
    /// `Σ ε_j |x_j|^m`
    AnisotropicPower { m: f64, signs: Vec<f64> },
}

impl SymbolConfig {
    pub fn build(&self) -> Result<HomogeneousSymbol> {
        match self {
            Self::RadialPower { dim, m } => HomogeneousSymbol::radial_power(*dim, *m),
            Self::QuadraticForm { dim, q } => HomogeneousSymbol::quadratic_form(*dim, q.clone()),
            Self::AnisotropicPower { m, signs } => HomogeneousSymbol::anisotropic_power(*m, signs.clone()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::RadialPower { dim, .. } | Self::QuadraticForm { dim, .. } => *dim,
            Self::AnisotropicPower { signs, .. } => signs.len(),
        }
    }
}

pub fn default_window() -> WindowKind {
    WindowKind::Gaussian { sigma: 1.0 }
}

pub fn build_window(dim: usize, kind: WindowKind) -> Result<Window> {
    Window::from_kind(dim, kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialShape {
    DiracComb {
        dim: usize,
        points: Vec<Vec<f64>>,
        /// `[re, im]` per point.
        weights: Vec<[f64; 2]>,
    },
    SphereShell {
        dim: usize,
        radius: f64,
        mass: f64,
    },
    CroppedCoulomb {
        dim: usize,
        alpha: f64,
        radius: f64,
    },
    /// A field written by `io::write_field`.
    Density { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    #[serde(flatten)]
    pub shape: PotentialShape,
    #[serde(default)]
    pub envelope: Envelope,
}

fn point3(p: &[f64], dim: usize) -> Result<[f64; 3]> {
    if p.len() != dim {
        return Err(Error::Structural(format!("point {p:?} does not have {dim} coordinates")));
    }
    let mut out = [0.0; 3];
    out[..dim].copy_from_slice(p);
    Ok(out)
}

impl PotentialConfig {
    /// `base` resolves relative file paths.
    pub fn build(&self, base: &Path) -> Result<Potential> {
        let v = match &self.shape {
            PotentialShape::DiracComb { dim, points, weights } => {
                let pts = points.iter().map(|p| point3(p, *dim)).collect::<Result<_>>()?;
                Potential::dirac_comb(*dim, pts, weights.iter().map(|w| Complex64::new(w[0], w[1])).collect())?
            }
            PotentialShape::SphereShell { dim, radius, mass } => Potential::sphere_shell(*dim, *radius, *mass)?,
            PotentialShape::CroppedCoulomb { dim, alpha, radius } => Potential::cropped_coulomb(*dim, *alpha, *radius)?,
            PotentialShape::Density { path } => {
                let file = std::fs::File::open(base.join(path))?;
                Potential::density(crate::io::read_field(std::io::BufReader::new(file))?)?
            }
        };
        Ok(v.with_envelope(self.envelope))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumConfig {
    /// `amplitude · e^{−π|x − center|²/σ²} e^{2πi frequency·x}`
    Gaussian {
        #[serde(default = "unit")]
        sigma: f64,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        frequency: Vec<f64>,
    },
    /// Unit-modulus random phases on the frequency grid, restricted to `|ξ| ≤ band`.
    RandomPhase { band: f64 },
    File { path: PathBuf },
}

fn unit() -> f64 {
    1.0
}

impl DatumConfig {
    pub fn build(&self, grid: &GridSpec, seed: u64, base: &Path) -> Result<SampledField> {
        let d = grid.dim();
        match self {
            Self::Gaussian { sigma, amplitude, center, frequency } => {
                let pad = |v: &Vec<f64>| -> Result<[f64; 3]> { if v.is_empty() { Ok([0.0; 3]) } else { point3(v, d) } };
                let (c, k) = (pad(center)?, pad(frequency)?);
                let (s, a) = (*sigma, *amplitude);
                if !(s > 0.0) {
                    return Err(Error::Parameter(format!("datum width must be positive, got {s}")));
                }
                Ok(SampledField::from_fn(*grid, |x| {
                    let r2: f64 = (0..d).map(|j| (x[j] - c[j]).powi(2)).sum();
                    let ph: f64 = (0..d).map(|j| k[j] * x[j]).sum();
                    Complex64::from_polar(a * (-std::f64::consts::PI * r2 / (s * s)).exp(), 2.0 * std::f64::consts::PI * ph)
                }))
            }
            Self::RandomPhase { band } => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let values = (0..grid.len())
                    .map(|k| {
                        let xi = grid.frequency_point(k);
                        let theta: f64 = rng.gen::<f64>();
                        if xi[..d].iter().map(|v| v * v).sum::<f64>() <= band * band {
                            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * theta)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                crate::grid::inverse_fourier(&SampledField::new(*grid, values, crate::grid::Domain::Frequency)?)
            }
            Self::File { path } => {
                let file = std::fs::File::open(base.join(path))?;
                let f = crate::io::read_field(std::io::BufReader::new(file))?;
                if f.grid() != grid {
                    return Err(Error::Structural("datum file lives on a different grid".into()));
                }
                Ok(f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_picard")]
    pub picard: f64,
    /// Defaults to a tenth of `picard`.
    #[serde(default)]
    pub quadrature: Option<f64>,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_picard() -> f64 {
    1e-10
}
fn default_iterations() -> usize {
    50
}
fn default_nodes() -> usize {
    64
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { picard: default_picard(), quadrature: None, max_iterations: default_iterations(), nodes: default_nodes() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub grid: GridConfig,
    pub symbol: SymbolConfig,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default = "linear")]
    pub nonlinearity: Nonlinearity,
    #[serde(default = "standard")]
    pub mode: Mode,
    pub f: DatumConfig,
    pub t_max: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_window")]
    pub window: WindowKind,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub c_prime: Option<f64>,
    #[serde(default)]
    pub calibration_times: Option<Vec<f64>>,
    /// Spacing of the `x` lattice of the solution norm.
    #[serde(default)]
    pub norm_x_step: Option<f64>,
    /// Continue over `[0, t_max]` instead of one window.
    #[serde(default)]
    pub global: bool,
}

fn linear() -> Nonlinearity {
    Nonlinearity::Linear
}
fn standard() -> Mode {
    Mode::Standard
}

impl SolveConfig {
    pub fn build(&self, seed: u64, base: &Path) -> Result<SolverConfig> {
        let grid = self.grid.build()?;
        let symbol = self.symbol.build()?;
        if symbol.dim() != grid.dim() {
            return Err(Error::Structural("symbol and grid dimensions differ".into()));
        }
        let datum = self.f.build(&grid, seed, base)?;
        let symbol: Arc<dyn Dispersion> = Arc::new(symbol);
        let mut cfg = SolverConfig::new(grid, symbol, datum, self.t_max)?;
        cfg.window = build_window(grid.dim(), self.window)?;
        cfg.potential = self.potential.as_ref().map(|p| p.build(base)).transpose()?;
        cfg.nonlinearity = self.nonlinearity.clone();
        cfg.mode = self.mode;
        cfg.nodes = self.tolerances.nodes;
        cfg.tolerance = self.tolerances.picard;
        cfg.quadrature_tolerance = self.tolerances.quadrature.unwrap_or(self.tolerances.picard / 10.0);
        cfg.max_iterations = self.tolerances.max_iterations;
        cfg.radius = self.radius;
        cfg.step = self.step;
        cfg.c_prime = self.c_prime;
        cfg.calibration_times = self.calibration_times.clone().unwrap_or_else(|| logspace(1e-2, 1.0, 7));
        if let Some(h) = self.norm_x_step {
            cfg.norm_x_step = h;
        }
        cfg.seed = seed;
        Ok(cfg)
    }
}

/// Parses JSON, keeping serde's line and column in the error.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_config_round_trip() {
        let text = r#"{
            "grid": {"dim": 1, "points": 128, "extent": 16.0},
            "symbol": {"kind": "radial_power", "dim": 1, "m": 4.0},
            "potential": {"variant": "dirac_comb", "dim": 1, "points": [[0.0]], "weights": [[1.0, 0.0]],
                          "envelope": {"kind": "sinusoid", "amplitude": 0.5, "frequency": 1.0}},
            "nonlinearity": {"kind": "power_abs", "lambda": [1.0, 0.0], "k": 1},
            "f": {"kind": "gaussian"},
            "t_max": 0.5
        }"#;
        let c: SolveConfig = parse(text).unwrap();
        let back: SolveConfig = parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
        let s = c.build(0, Path::new(".")).unwrap();
        assert!((s.quadrature_tolerance - 1e-11).abs() < 1e-25);
        assert!(s.potential.is_some());
    }

    #[test]
    fn schema_errors_carry_a_line() {
        let text = "{\n  \"grid\": {\"dim\": 1, \"points\": 128, \"extent\": 16.0},\n  \"symbol\": {\"kind\": \"radial_power\", \"dim\": 1, \"m\": 4.0, \"oops\": 1},\n  \"f\": {\"kind\": \"gaussian\"}, \"t_max\": 1.0\n}";
        let err = parse::<SolveConfig>(text).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
