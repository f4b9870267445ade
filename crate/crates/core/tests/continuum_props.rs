//! Excursion sampling and the level sweep.

use bgw_core::continuum::{
    components_above, psi_level_sweep, psi_level_sweep_naive, sample_excursion, Excursion,
};
use bgw_core::functionals::TollFunction;
use bgw_core::rng;
use bgw_core::stats::Summary;
use bgw_core::theory::max_excursion_moment;
use rayon::prelude::*;

#[test]
fn components_are_nested() {
    for j in 0..50 {
        let e = sample_excursion(2000, &mut rng::stream(31, 0, j));
        let levels: Vec<f64> = (0..20).map(|i| e.max() * i as f64 / 20.0).collect();
        let mut last_total = f64::INFINITY;
        for w in levels.windows(2) {
            let (lo, hi) = (components_above(&e, w[0]), components_above(&e, w[1]));
            for c in &hi {
                let parents = lo.iter().filter(|p| p.start <= c.start && c.end <= p.end).count();
                assert_eq!(parents, 1);
            }
            let total: f64 = lo.iter().map(|c| c.duration).sum();
            assert!(total <= last_total + 1e-12);
            last_total = total;
        }
        for c in components_above(&e, 0.0) {
            assert!((c.duration - e.duration()).abs() < 1e-12 && (c.height - e.max()).abs() < 1e-12);
        }
    }
}

#[test]
fn unit_toll_sweep_is_the_area() {
    let one = TollFunction::power(0.0, 0.0);
    for j in 0..100 {
        let e = sample_excursion(5000, &mut rng::stream(32, 0, j));
        let psi = psi_level_sweep(&e, &one, 1000).unwrap();
        let area = e.area();
        assert!(((psi - area) / area).abs() <= 0.005, "{psi} vs {area}");
    }
}

#[test]
fn crossing_sweep_matches_naive_sweep() {
    let tolls = [
        TollFunction::power(0.0, 0.0),
        TollFunction::power(1.0, 0.0),
        TollFunction::power(0.0, 1.0),
        TollFunction::power(-0.3, 0.5),
        TollFunction::InverseHeight,
    ];
    for j in 0..20 {
        let e = sample_excursion(3000, &mut rng::stream(33, 0, j));
        for t in &tolls {
            let fast = psi_level_sweep(&e, t, 300).unwrap();
            let slow = psi_level_sweep_naive(&e, t, 300).unwrap();
            assert!(((fast - slow) / slow).abs() <= 1e-9, "{t:?}: {fast} vs {slow}");
        }
    }
}

#[test]
fn triangle_closed_forms() {
    let tri = Excursion::triangular(1000, 1.0);
    let one = psi_level_sweep(&tri, &TollFunction::power(0.0, 0.0), 1000).unwrap();
    assert!((one - 0.25).abs() <= 1e-3);
    let x = psi_level_sweep(&tri, &TollFunction::power(1.0, 0.0), 1000).unwrap();
    assert!((x - 1.0 / 6.0).abs() <= 1e-3);
    assert!(components_above(&tri, 0.5).is_empty());
}

#[test]
fn excursions_are_nonnegative_bridges() {
    for j in 0..200 {
        let e = sample_excursion(1000, &mut rng::stream(34, 0, j));
        let v = e.values();
        assert_eq!(v.len(), 1001);
        assert_eq!((v[0], v[1000]), (0.0, 0.0));
        assert!(v.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn mean_maximum_of_excursions() {
    let m = 10_000;
    let maxima: Vec<f64> =
        (0..100_000u64).into_par_iter().map(|j| sample_excursion(m, &mut rng::stream(35, 0, j)).max()).collect();
    let s = Summary::of(&maxima);
    let want = max_excursion_moment(1.0);
    let rel = (s.mean - want) / want;
    assert!(rel.abs() <= 0.02, "E[max] = {} ± {} vs {want}", s.mean, s.stderr);
    // the grid can only miss the true maximum
    assert!(s.mean < want + 3.0 * s.stderr);
}
