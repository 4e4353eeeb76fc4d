use std::f64::consts::PI;

use phaselab::symbols::{
    a_m_seminorm, check_euler_identity, cone_separation_ratio, fresnel_field, ConeSampling, Dispersion, HomogeneousSymbol,
    SmoothedSymbol,
};
use phaselab::GridSpec;
use proptest::prelude::*;

fn symbol_strategy() -> impl Strategy<Value = HomogeneousSymbol> {
    prop_oneof![
        (1usize..=3, 2.0f64..6.0).prop_map(|(d, m)| HomogeneousSymbol::radial_power(d, m).unwrap()),
        (prop::sample::select(vec![2.0, 4.0, 6.0]), prop::collection::vec(prop::sample::select(vec![-1.0, 1.0]), 1..=3))
            .prop_map(|(m, s)| HomogeneousSymbol::anisotropic_power(m, s).unwrap()),
        (0.5f64..3.0, -0.4f64..0.4, 0.5f64..3.0).prop_map(|(a, b, c)| HomogeneousSymbol::quadratic_form(2, vec![a, b, b, c]).unwrap()),
    ]
}

fn direction(d: usize, raw: &[f64]) -> Vec<f64> {
    let n = raw[..d].iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    raw[..d].iter().map(|v| v / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn value_is_homogeneous(mu in symbol_strategy(), raw in prop::array::uniform3(-1.0f64..1.0), r in 0.1f64..5.0, lambda in prop::sample::select(vec![0.5, 2.0, 10.0])) {
        let x: Vec<f64> = direction(mu.dim(), &raw).iter().map(|v| v * r).collect();
        let y: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let m = mu.degree();
        let lhs = mu.value(&y);
        let rhs = lambda.powf(m) * mu.value(&x);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lambda.powf(m) * (1.0 + mu.value(&x).abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn gradient_is_homogeneous(mu in symbol_strategy(), raw in prop::array::uniform3(-1.0f64..1.0), lambda in prop::sample::select(vec![0.5, 2.0, 10.0])) {
        let d = mu.dim();
        let x = direction(d, &raw);
        let y: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let (g1, g2) = (mu.gradient(&x), mu.gradient(&y));
        let scale = lambda.powf(mu.degree() - 1.0);
        let norm = (0..d).map(|a| g1[a] * g1[a]).sum::<f64>().sqrt();
        for a in 0..d {
            prop_assert!((g2[a] - scale * g1[a]).abs() <= 1e-8 * scale * norm.max(1e-12), "{:?} vs {:?}", g2, g1);
        }
    }

    #[test]
    fn smoothing_leaves_the_outside_alone(m in 2.0f64..5.0, d in 1usize..=3, raw in prop::array::uniform3(-1.0f64..1.0), r in 1.0f64..10.0) {
        let base = HomogeneousSymbol::radial_power(d, m).unwrap();
        let smooth = SmoothedSymbol::new(base.clone(), 1.0).unwrap();
        let x: Vec<f64> = direction(d, &raw).iter().map(|v| v * r).collect();
        prop_assert_eq!(smooth.value(&x), base.value(&x));
    }

    #[test]
    fn fresnel_fields_are_unimodular(mu in symbol_strategy(), t in 0.01f64..2.0) {
        let grid = GridSpec::new(mu.dim(), 16, 4.0).unwrap();
        let (f, _) = fresnel_field(&mu, &grid, t).unwrap();
        prop_assert!(f.values().iter().all(|v| (v.norm() - 1.0).abs() <= 1e-15));
    }
}

#[test]
fn euler_identity_for_analytic_kinds() {
    let dirs: Vec<Vec<f64>> = (0..100).map(|k| {
        let a = 2.0 * PI * k as f64 / 100.0;
        vec![a.cos(), a.sin()]
    }).collect();
    for mu in [
        HomogeneousSymbol::radial_power(2, 2.0).unwrap(),
        HomogeneousSymbol::radial_power(2, 3.0).unwrap(),
        HomogeneousSymbol::radial_power(2, 4.5).unwrap(),
        HomogeneousSymbol::anisotropic_power(4.0, vec![1.0, -1.0]).unwrap(),
        HomogeneousSymbol::quadratic_form(2, vec![2.0, 0.3, 0.3, -1.0]).unwrap(),
    ] {
        let scaled: Vec<Vec<f64>> = dirs.iter().map(|x| x.iter().map(|v| v * 1.7).collect()).collect();
        let r = check_euler_identity(&mu, &scaled).unwrap();
        assert!(r <= 1e-10, "{mu:?}: {r}");
    }
}

#[test]
fn fresnel_value_at_a_point() {
    // N = 4, L = 2 puts x = 1/2 on the grid.
    let grid = GridSpec::new(2, 4, 2.0).unwrap();
    let mu = HomogeneousSymbol::radial_power(2, 2.0).unwrap();
    let (f, _) = fresnel_field(&mu, &grid, 1.0).unwrap();
    let k = grid.ravel(&[3, 2]);
    assert_eq!(grid.point(k)[..2], [0.5, 0.0]);
    assert!((f.values()[k] - num_complex::Complex64::new(0.0, 1.0)).norm() < 1e-15);
}

#[test]
fn cone_ratio_is_positive_and_shrinks_with_the_angle() {
    for m in [2.0, 3.0, 4.0] {
        let mu = HomogeneousSymbol::radial_power(2, m).unwrap();
        let rs: Vec<f64> = [0.1, 0.2, 0.3]
            .iter()
            .map(|&a| cone_separation_ratio(&mu, &ConeSampling::new(vec![1.0, 0.0], a, 4000)).unwrap())
            .collect();
        assert!(rs.iter().all(|r| *r > 0.0), "{m}: {rs:?}");
        assert!(rs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{m}: {rs:?}");
    }
}

#[test]
fn quadratic_cone_ratio_is_one() {
    let mu = HomogeneousSymbol::radial_power(1, 2.0).unwrap();
    let r = cone_separation_ratio(&mu, &ConeSampling::new(vec![1.0], 0.0, 2000)).unwrap();
    assert!((r - 1.0).abs() < 1e-12, "{r}");
}

#[test]
fn subquadratic_cone_ratio_degenerates() {
    let mu = HomogeneousSymbol::radial_power_subquadratic(1, 1.5).unwrap();
    let ratio = |rmax: f64| {
        let mut s = ConeSampling::new(vec![1.0], 0.0, 20000);
        s.radius_range = (1e-2, rmax);
        cone_separation_ratio(&mu, &s).unwrap()
    };
    let rs: Vec<f64> = [1e1, 1e3, 1e5].iter().map(|&r| ratio(r)).collect();
    assert!(rs.windows(2).all(|w| w[1] < w[0]), "{rs:?}");
    assert!(rs[2] < 0.05, "{rs:?}");
}

#[test]
fn seminorm_examples() {
    let far: Vec<Vec<f64>> = (0..4000).map(|k| vec![1.0 + k as f64 * 0.25]).collect();
    let q = SmoothedSymbol::auto(HomogeneousSymbol::radial_power(1, 2.0).unwrap());
    assert!((a_m_seminorm(&q, &[2], &far).unwrap() - 2.0).abs() < 1e-6);
    let c = SmoothedSymbol::auto(HomogeneousSymbol::radial_power(1, 3.0).unwrap());
    let s = a_m_seminorm(&c, &[1], &far).unwrap();
    assert!(s < 3.0 && s > 3.0 - 1e-5, "{s}");
    let z = a_m_seminorm(&c, &[0], &far).unwrap();
    assert!(z < 1.0 && z > 0.999, "{z}");
}
