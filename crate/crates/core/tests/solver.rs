use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use phaselab::potentials::Potential;
use phaselab::propagator::MultiplierPropagator;
use phaselab::solver::{
    fourier_l1, global_solve, low_regularity_solve, picard_solve, Mode, Nonlinearity, SolutionNorm, SolutionTrajectory, SolverConfig,
};
use phaselab::symbols::{Dispersion, HomogeneousSymbol};
use phaselab::{forward_fourier, Error, GridSpec, SampledField};
use proptest::prelude::*;

fn gaussian(grid: GridSpec, center: [f64; 3], amplitude: f64) -> SampledField {
    let d = grid.dim();
    SampledField::from_fn(grid, |x| {
        let r2: f64 = (0..d).map(|a| (x[a] - center[a]).powi(2)).sum();
        Complex64::new(amplitude * (-PI * r2).exp(), 0.0)
    })
}

/// Low-regularity run over a few formula steps, reusing the calibrated constant.
fn low_regularity_run(mut cfg: SolverConfig, windows: f64) -> SolutionTrajectory {
    let first = picard_solve(&cfg).unwrap();
    cfg.c_prime = Some(first.constants.c_prime);
    cfg.t_max = windows * first.constants.formula_step;
    low_regularity_solve(&cfg).unwrap()
}

fn check_low_regularity(sol: &SolutionTrajectory, tol: f64) {
    assert!(sol.windows.len() >= 2);
    assert!(sol.max_ratio() <= 0.6, "ratio {}", sol.max_ratio());
    for w in &sol.windows {
        assert!(w.report.residual <= 2.0 * tol, "{:?}", w.report);
        assert!(w.report.max_norm.is_finite());
    }
    assert!(sol.continuity_gaps.iter().all(|g| *g <= 10.0 * tol), "{:?}", sol.continuity_gaps);
}

#[test]
fn coulomb_low_regularity() {
    let grid = GridSpec::new(2, 32, 16.0).unwrap();
    let mu: Arc<dyn Dispersion> = Arc::new(HomogeneousSymbol::radial_power(2, 4.0).unwrap());
    let mut cfg = SolverConfig::new(grid, mu, gaussian(grid, [0.0; 3], 1.0), 1.0).unwrap();
    cfg.potential = Some(Potential::cropped_coulomb(2, 1.0, 1.0).unwrap());
    cfg.mode = Mode::LowRegularity { p: 3.0, q: 1.5 };
    cfg.nodes = 16;
    cfg.quadrature_tolerance = 1e-6;
    cfg.norm_x_step = 1.0;
    let sol = low_regularity_run(cfg.clone(), 2.5);
    assert!((sol.constants.beta - 2.0 / 3.0).abs() < 1e-12);
    assert!((sol.constants.grading - 6.0).abs() < 1e-12);
    check_low_regularity(&sol, cfg.tolerance);
}

#[test]
fn sphere_low_regularity() {
    let grid = GridSpec::new(3, 16, 8.0).unwrap();
    let mu: Arc<dyn Dispersion> = Arc::new(HomogeneousSymbol::radial_power(3, 6.0).unwrap());
    let mut cfg = SolverConfig::new(grid, mu, gaussian(grid, [0.0; 3], 1.0), 1.0).unwrap();
    cfg.potential = Some(Potential::sphere_shell(3, 1.0, 4.0 * PI).unwrap());
    cfg.mode = Mode::LowRegularity { p: 4.0, q: 4.0 / 3.0 };
    cfg.nodes = 16;
    cfg.quadrature_tolerance = 1e-6;
    cfg.norm_x_step = 1.0;
    let sol = low_regularity_run(cfg.clone(), 2.5);
    assert!((sol.constants.beta - 0.75).abs() < 1e-12);
    check_low_regularity(&sol, cfg.tolerance);
}

#[test]
fn low_regularity_exponents_are_checked() {
    let grid = GridSpec::new(2, 16, 8.0).unwrap();
    let mu: Arc<dyn Dispersion> = Arc::new(HomogeneousSymbol::radial_power(2, 3.0).unwrap());
    let mut cfg = SolverConfig::new(grid, mu, gaussian(grid, [0.0; 3], 1.0), 0.1).unwrap();
    cfg.potential = Some(Potential::cropped_coulomb(2, 1.0, 1.0).unwrap());
    // q above p′ = 3/2.
    cfg.mode = Mode::LowRegularity { p: 3.0, q: 3.0 };
    assert!(matches!(low_regularity_solve(&cfg), Err(Error::Mode(_))));
    // Standard mode needs m > 2d.
    cfg.mode = Mode::Standard;
    assert!(matches!(global_solve(&cfg), Err(Error::Mode(_))));
    assert!(matches!(low_regularity_solve(&cfg), Err(Error::Mode(_))));
}

fn line_setup(weight: f64) -> SolverConfig {
    let grid = GridSpec::new(1, 128, 16.0).unwrap();
    let mu: Arc<dyn Dispersion> = Arc::new(HomogeneousSymbol::radial_power(1, 4.0).unwrap());
    let mut cfg = SolverConfig::new(grid, mu, gaussian(grid, [0.0; 3], 1.0), 0.02).unwrap();
    cfg.potential = Some(Potential::dirac_comb(1, vec![[0.5, 0.0, 0.0]], vec![Complex64::new(weight, 0.0)]).unwrap());
    cfg.nodes = 32;
    cfg.quadrature_tolerance = 1e-4;
    cfg.radius = Some(4.0);
    cfg.c_prime = Some(2.0);
    cfg
}

#[test]
fn too_few_nodes_are_refused() {
    let mut cfg = line_setup(1.0);
    cfg.nodes = 4;
    cfg.quadrature_tolerance = 1e-14;
    let r = picard_solve(&cfg);
    assert!(matches!(r, Err(Error::Quadrature { .. })), "{:?}", r.map(|s| s.windows[0].report.clone()));
}

#[test]
fn oversized_fixed_step_does_not_contract() {
    let mut cfg = line_setup(20.0);
    cfg.step = Some(0.5);
    cfg.t_max = 0.5;
    cfg.quadrature_tolerance = 1.0;
    assert!(matches!(picard_solve(&cfg), Err(Error::NonContraction { .. })));
}

#[test]
fn zero_datum_stays_zero() {
    let mut cfg = line_setup(1.0);
    cfg.datum = SampledField::zeros(cfg.grid, phaselab::Domain::Space);
    let sol = global_solve(&cfg).unwrap();
    assert!(sol.final_spectrum().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn solution_norm_controls_fourier_l1() {
    // sup_x ‖u φ_x‖_{FL¹} ≤ ‖u‖_{FL¹} ‖g‖_{FL¹} pointwise in time.
    let cfg = line_setup(1.0);
    let sol = global_solve(&cfg).unwrap();
    let norm = SolutionNorm::new(&cfg.grid, &cfg.window, 1.0).unwrap();
    let g = forward_fourier(&gaussian(cfg.grid, [0.0; 3], 1.0)).unwrap();
    let g_l1 = fourier_l1(&cfg.grid, g.values());
    for (_, s) in sol.samples() {
        assert!(norm.of_spectrum(s).unwrap() <= fourier_l1(&cfg.grid, s) * g_l1 * (1.0 + 1e-9));
    }
}

#[test]
fn nonlinear_window_contracts() {
    let mut cfg = line_setup(1.0);
    cfg.nonlinearity = Nonlinearity::PowerAbs { lambda: Complex64::new(0.5, 0.0), k: 1 };
    cfg.datum = gaussian(cfg.grid, [0.0; 3], 0.3);
    let sol = picard_solve(&cfg).unwrap();
    assert!(sol.max_ratio() <= 0.6);
    assert!(sol.windows[0].report.residual <= 2.0 * cfg.tolerance);
}

fn final_spectrum(cfg: &SolverConfig) -> Vec<Complex64> {
    global_solve(cfg).unwrap().final_spectrum().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn linear_solution_is_linear_in_the_datum(a in -1.0f64..1.0, b in -1.0f64..1.0, shift in -2.0f64..2.0) {
        let mut cfg = line_setup(1.0);
        cfg.step = Some(0.01);
        let f = gaussian(cfg.grid, [0.0; 3], 1.0);
        let g = gaussian(cfg.grid, [shift, 0.0, 0.0], 1.0);
        let combo = f.scale(Complex64::new(a, 0.0)).add(&g.scale(Complex64::new(b, 0.0))).unwrap();
        cfg.datum = f;
        let uf = final_spectrum(&cfg);
        cfg.datum = g;
        let ug = final_spectrum(&cfg);
        cfg.datum = combo;
        let uc = final_spectrum(&cfg);
        let err = uc.iter().zip(uf.iter().zip(&ug)).map(|(c, (x, y))| (c - (x * a + y * b)).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8, "{}", err);
    }

    #[test]
    fn free_solve_is_the_propagator(t in 0.001f64..0.05, center in -3.0f64..3.0) {
        let mut cfg = line_setup(1.0);
        cfg.potential = None;
        cfg.t_max = t;
        cfg.datum = gaussian(cfg.grid, [center, 0.0, 0.0], 1.0);
        let got = final_spectrum(&cfg);
        let prop = MultiplierPropagator::new(Arc::clone(&cfg.symbol), cfg.grid).unwrap();
        let mut want = forward_fourier(&cfg.datum).unwrap().into_values();
        prop.apply_spectrum(t, &mut want);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12, "{}", err);
    }
}
