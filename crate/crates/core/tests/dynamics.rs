use std::f64::consts::{FRAC_1_SQRT_2, PI};

use bichroma::dirac::DiracParams;
use bichroma::dynamics::*;
use bichroma::lattice::{compute_band_structure, solve_bloch};
use bichroma::wannier::{fix_gauge, WannierTable};
use bichroma::{LatticeParams, PlaneWaveBasis, SpatialGrid, PERIOD};
use num_complex::Complex64;

fn reference_lattice(phi: f64) -> LatticeParams {
    LatticeParams::new(5.0, 1.56, phi).unwrap()
}

fn basis() -> PlaneWaveBasis {
    PlaneWaveBasis::default()
}

fn tables(phi: f64, bands: &[usize], ppp: usize) -> Vec<WannierTable> {
    let bs = compute_band_structure(&reference_lattice(phi), 257, 4, &basis()).unwrap();
    bands
        .iter()
        .map(|&a| fix_gauge(&bs, a).unwrap().sample_table(ppp))
        .collect()
}

fn group_velocity(params: &LatticeParams, band: usize, k: f64) -> f64 {
    let h = 1e-4;
    let e = |k: f64| solve_bloch(params, k, &basis(), band + 1).unwrap()[band].energy;
    (e(k + h) - e(k - h)) / (2.0 * h)
}

#[test]
fn lattice_packet_moves_at_group_velocity() {
    let p = reference_lattice(0.0);
    let grid = SpatialGrid::lattice(512, 16).unwrap();
    let spec = WavePacketSpec::new(1, 0.3, 20.0, -150.0).unwrap();
    let psi = bloch_packet(&spec, &p, &basis(), &grid).unwrap();
    let opts = PropagationOptions { dt: 2e-3, n_steps: 25_000, stride: 5_000, ..Default::default() };
    let t = propagate_schrodinger(psi, &p, &SlowPotential::Zero, &opts).unwrap();
    let (first, last) = (&t.snapshots[0], t.snapshots.last().unwrap());
    let v = (last.center - first.center) / (last.time - first.time);
    let vg = group_velocity(&p, 1, 0.3);
    assert!(((v - vg) / vg).abs() < 0.02, "measured {v}, band slope {vg}");
}

#[test]
fn massive_dirac_packet_group_velocity() {
    let d = DiracParams::new(0.5, 2.0, 0.0).unwrap();
    let grid = SpatialGrid::lattice(512, 8).unwrap();
    let spec = WavePacketSpec::new(2, 0.3, 20.0, -100.0).unwrap();
    let st = prepare_dirac_packet(&spec, &d, &grid).unwrap();
    let opts = PropagationOptions { dt: 1e-2, n_steps: 3_000, stride: 1_000, ..Default::default() };
    let t = propagate_dirac(st, &d, &SlowPotential::Zero, &opts).unwrap();
    let (first, last) = (&t.snapshots[0], t.snapshots.last().unwrap());
    let v = (last.center - first.center) / (last.time - first.time);
    let want = d.group_velocity(0.3);
    assert!(((v - want) / want).abs() < 0.01, "measured {v}, expected {want}");
}

#[test]
fn massless_components_stay_decoupled() {
    let d = DiracParams::new(0.0, 1.5, 0.0).unwrap();
    let grid = SpatialGrid::lattice(256, 8).unwrap();
    let g: Vec<Complex64> = grid
        .points()
        .iter()
        .map(|&x| Complex64::from_polar((-(x * x) / 400.0).exp(), 0.2 * x))
        .collect();
    let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
    let st = WaveState::spinor(grid, g, zero).unwrap();
    let opts = PropagationOptions { dt: 1e-2, n_steps: 2_000, stride: 500, ..Default::default() };
    let t = propagate_dirac(st, &d, &SlowPotential::Zero, &opts).unwrap();
    let cross: f64 = t.final_state.components[1].iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx();
    assert!(cross < 1e-10, "{cross:e}");
}

#[test]
fn purity_grows_with_envelope_width() {
    let p = reference_lattice(PI);
    let grid = SpatialGrid::lattice(1024, 16).unwrap();
    let mut last = 0.0;
    for sigma in [5.0, 17.0, 100.0] {
        let spec = WavePacketSpec::new(2, 0.95, sigma, 0.0).unwrap();
        let st = bloch_packet(&spec, &p, &basis(), &grid).unwrap();
        let purity = band_populations(&st, &p, &basis(), 4).unwrap()[2];
        assert!(purity > last, "sigma {sigma}: {purity} <= {last}");
        last = purity;
    }
    assert!(last > 0.99);
}

#[test]
fn narrow_packet_is_refused() {
    let bs = compute_band_structure(&reference_lattice(PI), 129, 4, &basis()).unwrap();
    let grid = SpatialGrid::lattice(256, 16).unwrap();
    let spec = WavePacketSpec::new(2, 0.95, 3.0, 0.0).unwrap();
    assert!(matches!(
        prepare_bloch_packet(&spec, &bs, &grid),
        Err(bichroma::Error::LowBandPurity { .. })
    ));
}

#[test]
fn coarse_graining_a_wannier_function() {
    let ts = tables(0.0, &[0, 1, 2], 32);
    let grid = SpatialGrid::lattice(256, 32).unwrap();
    let single = WaveState::scalar(grid, ts[1].sample(5, &grid).unwrap()).unwrap();
    let cg = coarse_grain(&single, &ts).unwrap();
    for band in &cg {
        for (&n, c) in band.sites.iter().zip(&band.coeffs) {
            let want = if band.band == 1 && n == 5 { 1.0 } else { 0.0 };
            assert!((c - Complex64::new(want, 0.0)).norm() < 1e-6, "band {} site {n}: {c}", band.band);
        }
    }

    let pair: Vec<Complex64> = ts[1]
        .sample(0, &grid)
        .unwrap()
        .iter()
        .zip(ts[2].sample(0, &grid).unwrap())
        .map(|(a, b)| (a + b) * FRAC_1_SQRT_2)
        .collect();
    let cg = coarse_grain(&WaveState::scalar(grid, pair).unwrap(), &ts).unwrap();
    for (band, want) in [(1usize, FRAC_1_SQRT_2), (2, FRAC_1_SQRT_2), (0, 0.0)] {
        let c = cg[band].coeff(0).unwrap();
        assert!((c - Complex64::new(want, 0.0)).norm() < 1e-6);
    }
}

#[test]
fn coarse_grained_packet_has_gaussian_envelope() {
    let ts = tables(0.0, &[0, 1, 2], 32);
    let bs = compute_band_structure(&reference_lattice(0.0), 129, 4, &basis()).unwrap();
    let grid = SpatialGrid::lattice(512, 32).unwrap();
    let spec = WavePacketSpec::new(2, 0.5, 17.0, 10.0).unwrap();
    let st = bloch_packet(&spec, bs.params(), bs.basis(), &grid).unwrap();
    let cg = coarse_grain(&st, &ts).unwrap();
    let total: f64 = cg.iter().map(|b| b.weight()).sum();
    assert!(total <= st.norm_sqr() + 1e-9);
    let b2 = &cg[2];
    assert!(b2.weight() > 0.9, "band-2 weight {}", b2.weight());
    let w = b2.weight();
    let mean: f64 = b2.positions.iter().zip(&b2.coeffs).map(|(x, c)| x * c.norm_sqr()).sum::<f64>() / w;
    let var: f64 = b2
        .positions
        .iter()
        .zip(&b2.coeffs)
        .map(|(x, c)| (x - mean).powi(2) * c.norm_sqr())
        .sum::<f64>()
        / w;
    assert!((var.sqrt() - 17.0).abs() < 0.05 * 17.0, "width {}", var.sqrt());
    assert!((mean - 10.0).abs() < PERIOD);
}

/// Mid-depth reference configuration for the propagator properties.
fn reference_run(dt: f64, time: f64) -> (WaveState, LatticeParams, SlowPotential, PropagationOptions) {
    let p = LatticeParams::new(5.0, 1.56, 0.8 * PI).unwrap();
    let grid = SpatialGrid::lattice(256, 32).unwrap();
    let spec = WavePacketSpec::new(2, 0.5, 17.0, 0.0).unwrap();
    let st = bloch_packet(&spec, &p, &basis(), &grid).unwrap();
    let slow = SlowPotential::DipoleTilt { v0: 19.77, w0: 157.0, f: 0.076 };
    let n = (time / dt).round() as usize;
    (st, p, slow, PropagationOptions { dt, n_steps: n, stride: n, ..Default::default() })
}

#[test]
fn schrodinger_is_unitary_and_reversible() {
    let (st, p, slow, opts) = reference_run(1e-3, 2.0);
    let fwd = propagate_schrodinger(st.clone(), &p, &slow, &opts).unwrap();
    assert!(fwd.norm_drift() < 1e-8);
    let back = PropagationOptions { dt: -opts.dt, ..opts };
    let rev = propagate_schrodinger(fwd.final_state.clone(), &p, &slow, &back).unwrap();
    assert!(rev.final_state.sup_distance(&st) < 1e-7);
    let e0 = schrodinger_energy(&st, &p, &slow).unwrap();
    let e1 = schrodinger_energy(&fwd.final_state, &p, &slow).unwrap();
    assert!(((e1 - e0) / e0).abs() < 1e-6, "energy {e0} -> {e1}");
}

#[test]
fn schrodinger_time_step_converges() {
    let (st, p, slow, opts) = reference_run(1e-3, 1.0);
    let half = PropagationOptions { dt: 5e-4, n_steps: 2 * opts.n_steps, stride: 2 * opts.n_steps, ..opts };
    let a = propagate_schrodinger(st.clone(), &p, &slow, &opts).unwrap();
    let b = propagate_schrodinger(st, &p, &slow, &half).unwrap();
    let d = a.final_state.sup_distance(&b.final_state);
    assert!(d < 1e-6, "{d:e}");
}

#[test]
fn dirac_is_unitary_reversible_and_converged() {
    let d = DiracParams::new(0.24, 3.0, 0.0).unwrap();
    let grid = SpatialGrid::lattice(256, 32).unwrap();
    let spec = WavePacketSpec::new(2, 0.5, 17.0, 0.0).unwrap();
    let st = prepare_dirac_packet(&spec, &d, &grid).unwrap();
    let slow = SlowPotential::DipoleTilt { v0: 19.77, w0: 157.0, f: 0.076 };
    let opts = PropagationOptions { dt: 1e-3, n_steps: 2_000, stride: 500, ..Default::default() };
    let fwd = propagate_dirac(st.clone(), &d, &slow, &opts).unwrap();
    assert!(fwd.norm_drift() < 1e-8);
    let back = PropagationOptions { dt: -1e-3, ..opts };
    let rev = propagate_dirac(fwd.final_state.clone(), &d, &slow, &back).unwrap();
    assert!(rev.final_state.sup_distance(&st) < 1e-7);
    let half = PropagationOptions { dt: 5e-4, n_steps: 4_000, ..opts };
    let fine = propagate_dirac(st, &d, &slow, &half).unwrap();
    assert!(fwd.final_state.sup_distance(&fine.final_state) < 1e-6);
}

#[test]
fn slater_band_energy_improves_with_width() {
    let p = reference_lattice(0.0);
    let mut last = f64::INFINITY;
    for sigma in [8.0, 17.0, 34.0] {
        let r = slater_oracle(&BandOperator::BandEnergy { band: 0 }, &[Envelope::gaussian(sigma, 0.0, 0.0)], &p, &basis(), 512)
            .unwrap();
        assert!(r.discrepancy < last, "sigma {sigma}: {:e}", r.discrepancy);
        if sigma == 17.0 {
            assert!(r.discrepancy < 1e-4, "{:e}", r.discrepancy);
        }
        last = r.discrepancy;
    }
}

#[test]
fn slater_rotated_pair_near_dirac_point() {
    let env = [
        Envelope::gaussian(17.0, 0.0, 0.0),
        Envelope { amplitude: Complex64::new(0.0, 0.5), ..Envelope::gaussian(17.0, 5.0, 0.0) },
    ];
    let r = slater_oracle(&BandOperator::RotatedPair, &env, &reference_lattice(PI), &basis(), 512).unwrap();
    assert!(r.discrepancy < 1e-3, "{:e}", r.discrepancy);
}

#[test]
fn trajectory_files_have_fixed_layout() {
    let grid = SpatialGrid::lattice(64, 8).unwrap();
    let psi = grid
        .points()
        .iter()
        .map(|&x| Complex64::new((-(x * x) / 100.0).exp(), 0.0))
        .collect();
    let st = WaveState::scalar(grid, psi).unwrap();
    let opts = PropagationOptions { dt: 1e-2, n_steps: 20, stride: 10, density_bin: 8, x_cut: 0.0, ..Default::default() };
    let t = propagate_schrodinger(st, &LatticeParams::free(), &SlowPotential::Zero, &opts).unwrap();
    let dir = std::env::temp_dir().join(format!("bichroma-traj-{}", std::process::id()));
    write_trajectory(&dir, "run", &t, &["phi=0".to_string()]).unwrap();
    let manifest = std::fs::read_to_string(dir.join("run_manifest.csv")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines[0], "# phi=0");
    assert_eq!(lines[1], "time,file,norm,center,transmitted_fraction");
    assert_eq!(lines.len(), 2 + 3);
    let snap = std::fs::read_to_string(dir.join("run_00002.csv")).unwrap();
    assert!(snap.lines().any(|l| l == "x,density"));
    assert_eq!(snap.lines().filter(|l| !l.starts_with('#')).count(), 1 + 64);
    std::fs::remove_dir_all(dir).unwrap();
}
