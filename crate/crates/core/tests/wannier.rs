use std::f64::consts::PI;

use bichroma::lattice::compute_band_structure;
use bichroma::wannier::{
    fix_gauge, linear_potential_table, potential_matrix_element, WannierFunction,
};
use bichroma::{LatticeParams, PlaneWaveBasis, SpatialGrid, PERIOD};
use num_complex::Complex64;

fn wannier_set(v1: f64, v2: f64, phi: f64, bands: &[usize], sites: &[i64]) -> Vec<WannierFunction> {
    let p = LatticeParams::new(v1, v2, phi).unwrap();
    let bs = compute_band_structure(&p, 257, 4, &PlaneWaveBasis::default()).unwrap();
    let grid = SpatialGrid::lattice(256, 64).unwrap();
    let mut out = Vec::new();
    for &a in bands {
        let g = fix_gauge(&bs, a).unwrap();
        let table = g.sample_table(64);
        for &n in sites {
            out.push(bichroma::wannier::wannier_from_table(&table, n, &grid).unwrap());
        }
    }
    out
}

#[test]
fn orthonormal_over_bands_and_sites() {
    let sites: Vec<i64> = (-3..=3).collect();
    let set = wannier_set(5.0, 1.56, 0.0, &[0, 1, 2], &sites);
    let mut worst = 0.0f64;
    for a in &set {
        for b in &set {
            let o = a.overlap(b).unwrap();
            let want = if a.band == b.band && a.site == b.site { 1.0 } else { 0.0 };
            worst = worst.max((o - Complex64::new(want, 0.0)).norm());
        }
    }
    assert!(worst < 1e-6, "orthonormality deviation {worst:e}");
    for w in &set {
        assert!((w.norm() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn band_one_is_localized() {
    let w = &wannier_set(5.0, 1.56, 0.0, &[1], &[0])[0];
    assert!(w.variance() < PERIOD * PERIOD, "variance {}", w.variance());
}

#[test]
fn ground_band_decays_three_decades_within_three_periods() {
    let w = &wannier_set(5.0, 1.56, 0.0, &[0], &[0])[0];
    assert!(w.decay_decades(3.0) >= 3.0, "{}", w.decay_decades(3.0));
    assert!(w.tail_ratio(5.0) < 1e-3);
}

#[test]
fn tail_slope_steepens_with_depth() {
    let mut last = 0.0;
    for v1 in [4.0, 6.0, 8.0, 10.0] {
        let w = &wannier_set(v1, v1 * 1.56 / 5.0, 0.0, &[1], &[0])[0];
        let slope = w.tail_slope(2.0, 6.0);
        assert!(slope < 0.0);
        assert!(slope < last, "V1 = {v1}: slope {slope} not below {last}");
        last = slope;
    }
}

#[test]
fn position_operator_returns_site_positions() {
    let set = wannier_set(5.0, 1.56, 0.0, &[0, 1], &[-2, 0, 3]);
    for w in &set {
        let one = potential_matrix_element(w, |_| 1.0, w).unwrap();
        assert!((one.re - 1.0).abs() < 1e-6);
        let x = potential_matrix_element(w, |x| x, w).unwrap();
        assert!((x.re - w.center).abs() < 1e-6, "band {} site {}: {} vs {}", w.band, w.site, x.re, w.center);
        assert!((w.center - w.site as f64 * PERIOD - PI / 2.0).abs() < 1e-9);
    }
}

#[test]
fn bloch_functions_are_recovered_from_wannier_sum() {
    let p = LatticeParams::new(5.0, 1.56, 0.0).unwrap();
    let bs = compute_band_structure(&p, 129, 3, &PlaneWaveBasis::default()).unwrap();
    let g = fix_gauge(&bs, 1).unwrap();
    let table = g.sample_table(64);
    let grid = SpatialGrid::lattice(128, 64).unwrap();
    let sites: Vec<WannierFunction> = (-64..64)
        .map(|n| bichroma::wannier::wannier_from_table(&table, n, &grid).unwrap_or_else(|_| {
            // sites near the box edge lose norm; keep their samples anyway
            WannierFunction {
                band: 1,
                site: n,
                grid,
                samples: table.sample(n, &grid).unwrap(),
                center: n as f64 * PERIOD + table.center,
            }
        }))
        .collect();
    for j in [0usize, 17, 64, 100] {
        let k = g.kappas[j];
        let mut worst = 0.0f64;
        for i in (0..grid.len()).step_by(7) {
            let x = grid.x(i);
            if x.abs() > 20.0 * PERIOD {
                continue;
            }
            let sum: Complex64 = sites
                .iter()
                .map(|w| Complex64::from_polar(1.0, k * w.site as f64 * PERIOD) * w.samples[i])
                .sum();
            worst = worst.max((sum - g.bloch_value(j, x)).norm());
        }
        assert!(worst < 1e-6, "kappa {k}: {worst:e}");
    }
}

#[test]
fn linear_table_structure() {
    let t = linear_potential_table(&LatticeParams::new(5.0, 1.56, 0.0).unwrap(), 2).unwrap();
    assert!(t.hermiticity_residual() < 1e-8, "{:e}", t.hermiticity_residual());
    for a in [1, 2] {
        assert!(t.get(a, a, 0).unwrap().norm() < 1e-8);
    }
    let s1 = t.get(2, 1, 1).unwrap().norm();
    let s2 = t.get(2, 1, 2).unwrap().norm();
    assert!(s2 < s1);
    let deep = linear_potential_table(&LatticeParams::new(10.0, 3.12, 0.0).unwrap(), 2).unwrap();
    for s in [1, 2] {
        assert!(deep.get(2, 1, s).unwrap().norm() < t.get(2, 1, s).unwrap().norm());
    }
    assert!(deep.get(2, 1, 0).unwrap().norm() < t.get(2, 1, 0).unwrap().norm());
}

#[test]
fn table_refused_at_dirac_point() {
    assert!(linear_potential_table(&LatticeParams::new(5.0, 1.56, PI).unwrap(), 1).is_err());
}
