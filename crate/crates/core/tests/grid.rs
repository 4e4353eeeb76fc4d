use std::f64::consts::PI;

use num_complex::Complex64;
use phaselab::{forward_fourier, inverse_fourier, lp_norm, Domain, GridSpec, SampledField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    (1usize..=3, 0.5f64..40.0).prop_flat_map(|(d, l)| {
        let sizes: Vec<usize> = match d {
            1 => vec![8, 30, 64, 100, 256],
            2 => vec![8, 16, 24, 32],
            _ => vec![4, 8, 12],
        };
        prop::sample::select(sizes).prop_map(move |n| GridSpec::new(d, n, l).unwrap())
    })
}

fn random_field(grid: GridSpec, seed: u64) -> SampledField {
    SampledField::random(grid, Domain::Space, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parseval(grid in grid_strategy(), seed in any::<u64>()) {
        let f = random_field(grid, seed);
        let a = lp_norm(&f, 2.0).unwrap();
        let b = lp_norm(&forward_fourier(&f).unwrap(), 2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a, "{} vs {}", a, b);
    }

    #[test]
    fn round_trip(grid in grid_strategy(), seed in any::<u64>()) {
        let f = random_field(grid, seed);
        let back = inverse_fourier(&forward_fourier(&f).unwrap()).unwrap();
        let scale = f.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(max_diff(f.values(), back.values()) <= 1e-12 * scale);
    }

    #[test]
    fn shift_becomes_modulation(grid in grid_strategy(), seed in any::<u64>(), shift in 0usize..8) {
        let f = random_field(grid, seed);
        let (n, d) = (grid.points_per_axis(), grid.dim());
        let s = shift % n;
        // g(x) = f(x − a) with a = s·h along the first axis.
        let moved: Vec<Complex64> = (0..grid.len())
            .map(|flat| {
                let mut idx = grid.unravel(flat);
                idx[0] = (idx[0] + n - s) % n;
                f.values()[grid.ravel(&idx[..d])]
            })
            .collect();
        let g = SampledField::new(grid, moved, Domain::Space).unwrap();
        let (fh, gh) = (forward_fourier(&f).unwrap(), forward_fourier(&g).unwrap());
        let a = s as f64 * grid.spacing();
        let expect: Vec<Complex64> = fh
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * PI * grid.frequency_point(k)[0] * a))
            .collect();
        let scale = fh.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(max_diff(gh.values(), &expect) <= 1e-10 * scale);
    }

    #[test]
    fn transform_is_linear(grid in grid_strategy(), s1 in any::<u64>(), s2 in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let (f, g) = (random_field(grid, s1), random_field(grid, s2));
        let c = Complex64::new(re, im);
        let lhs = forward_fourier(&f.scale(c).add(&g).unwrap()).unwrap();
        let rhs = forward_fourier(&f).unwrap().scale(c).add(&forward_fourier(&g).unwrap()).unwrap();
        let scale = rhs.values().iter().map(|v| v.norm()).fold(1.0, f64::max);
        prop_assert!(max_diff(lhs.values(), rhs.values()) <= 1e-12 * scale);
    }

    #[test]
    fn lattices_are_consistent(grid in grid_strategy()) {
        let (n, l) = (grid.points_per_axis(), grid.extent());
        prop_assert_eq!(n % 2, 0);
        prop_assert!((grid.spacing() * n as f64 - l).abs() <= 1e-12 * l);
        prop_assert!((grid.frequency(0) + n as f64 / (2.0 * l)).abs() <= 1e-12 * n as f64 / l);
        prop_assert!((grid.frequency(1) - grid.frequency(0) - 1.0 / l).abs() <= 1e-12 / l);
        prop_assert!(grid.frequency(n - 1) < n as f64 / (2.0 * l));
        prop_assert_eq!(grid.coordinate(n / 2), 0.0);
    }
}

#[test]
fn gaussian_is_its_own_transform() {
    for (d, n, l) in [(1, 256, 16.0), (2, 96, 12.0), (3, 48, 8.0)] {
        let grid = GridSpec::new(d, n, l).unwrap();
        let f = SampledField::from_fn(grid, |x| Complex64::new((-PI * (0..d).map(|a| x[a] * x[a]).sum::<f64>()).exp(), 0.0));
        let fh = forward_fourier(&f).unwrap();
        let err = fh
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let xi = grid.frequency_point(k);
                (v - (-PI * (0..d).map(|a| xi[a] * xi[a]).sum::<f64>()).exp()).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "d = {d}: {err}");
    }
}

#[test]
fn odd_sizes_are_rejected() {
    assert!(GridSpec::new(1, 31, 4.0).is_err());
    assert!(GridSpec::new(4, 8, 4.0).is_err());
    assert!(GridSpec::new(1, 8, -1.0).is_err());
}
