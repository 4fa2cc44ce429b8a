use rayon::prelude::*;

use crate::dirac::{fit_dirac, DiracParams, DEFAULT_FIT_WINDOW};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::lattice::{compute_band_structure, LatticeParams, PlaneWaveBasis};

use super::packet::{band_populations, prepare_bloch_packet, prepare_dirac_packet, WavePacketSpec};
use super::propagate::{propagate_dirac, propagate_schrodinger, PropagationOptions, Trajectory};
use super::state::SlowPotential;

/// Escape out of a tilted dipole trap, run in the lattice and in the Dirac picture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KleinScenario {
    /// Tilt `F`.
    pub f: f64,
    /// Trap depth `V0`.
    pub v0: f64,
    /// Trap waist `W0`.
    pub w0: f64,
    pub sigma: f64,
    pub kappa0: f64,
    pub band: usize,
    pub x0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
    pub n_periods: usize,
    pub points_per_period: usize,
    pub basis: PlaneWaveBasis,
    pub n_kappas: usize,
    pub fit_window: f64,
}

impl Default for KleinScenario {
    fn default() -> Self {
        Self {
            f: 0.076,
            v0: 19.77,
            w0: 157.0,
            sigma: 17.0,
            kappa0: 0.95,
            band: 2,
            x0: 30.0,
            t_final: 70.0,
            dt: 1e-3,
            stride: 100,
            n_periods: 1024,
            points_per_period: 32,
            basis: PlaneWaveBasis::default(),
            n_kappas: 257,
            fit_window: DEFAULT_FIT_WINDOW,
        }
    }
}

impl KleinScenario {
    pub fn slow_potential(&self) -> SlowPotential {
        SlowPotential::DipoleTilt { v0: self.v0, w0: self.w0, f: self.f }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt.abs()).round() as usize
    }
}

/// Position of the barrier top of `-v0 exp(-2x^2/w0^2) - f x` on the `x > 0` side.
pub fn barrier_top(v0: f64, w0: f64, f: f64) -> Result<f64> {
    // V'(x) = (4 v0 x / w0^2) exp(-2x^2/w0^2) - f, largest at x = w0/2
    let slope = |x: f64| 4.0 * v0 * x / (w0 * w0) * (-2.0 * x * x / (w0 * w0)).exp() - f;
    let (mut lo, mut hi) = (0.5 * w0, 0.5 * w0);
    if !(v0 > 0.0 && w0 > 0.0 && f > 0.0) || slope(lo) <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "no barrier for v0 = {v0}, w0 = {w0}, f = {f}"
        )));
    }
    while slope(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KleinMetrics {
    pub schrodinger_transmitted: f64,
    pub dirac_transmitted: f64,
    pub schrodinger_norm_drift: f64,
    pub dirac_norm_drift: f64,
    /// Largest centre-of-mass speed of the Dirac packet between snapshots.
    pub max_dirac_speed: f64,
    /// Mean centre-of-mass speed of the Schrodinger packet over the last tenth of the run.
    pub late_schrodinger_speed: f64,
    /// RMS difference of the two centres while the Schrodinger transmission is below 0.1.
    pub center_rms: f64,
    pub purity: f64,
}

#[derive(Debug, Clone)]
pub struct KleinRun {
    pub lattice: LatticeParams,
    pub scenario: KleinScenario,
    pub dirac: DiracParams,
    pub x_cut: f64,
    pub schrodinger: Trajectory,
    pub dirac_run: Trajectory,
    pub metrics: KleinMetrics,
}

pub fn run_klein_scenario(lattice: &LatticeParams, scenario: &KleinScenario) -> Result<KleinRun> {
    let sc = scenario;
    let bands = compute_band_structure(lattice, sc.n_kappas, sc.band.max(2) + 2, &sc.basis)?;
    let dirac = fit_dirac(&bands, sc.fit_window)?;
    let grid = SpatialGrid::lattice(sc.n_periods, sc.points_per_period)?;
    let spec = WavePacketSpec::new(sc.band, sc.kappa0, sc.sigma, sc.x0)?;
    let psi = prepare_bloch_packet(&spec, &bands, &grid)?;
    let purity = band_populations(&psi, lattice, &sc.basis, sc.band + 1)?[sc.band];
    let spinor = prepare_dirac_packet(&spec, &dirac, &grid)?;
    let slow = sc.slow_potential();
    let x_cut = barrier_top(sc.v0, sc.w0, sc.f)?;
    let opts = PropagationOptions {
        dt: sc.dt,
        n_steps: sc.n_steps(),
        stride: sc.stride,
        x_cut,
        density_bin: sc.points_per_period,
        edge_guard: true,
    };
    let (s, d) = rayon::join(
        || propagate_schrodinger(psi, lattice, &slow, &opts),
        || propagate_dirac(spinor, &dirac, &slow, &opts),
    );
    let (schrodinger, dirac_run) = (s?, d?);
    let metrics = metrics(&schrodinger, &dirac_run, purity);
    Ok(KleinRun {
        lattice: *lattice,
        scenario: *sc,
        dirac,
        x_cut,
        schrodinger,
        dirac_run,
        metrics,
    })
}

fn metrics(s: &Trajectory, d: &Trajectory, purity: f64) -> KleinMetrics {
    let last = |t: &Trajectory| t.snapshots.last().map(|x| x.transmitted_fraction).unwrap_or(0.0);
    let max_dirac_speed = d
        .center_velocities()
        .iter()
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    let n = s.snapshots.len();
    let tail = &s.snapshots[(n - 1) - (n - 1) / 10..];
    let (a, b) = (&tail[0], &tail[tail.len() - 1]);
    let late_schrodinger_speed = if b.time > a.time { (b.center - a.center) / (b.time - a.time) } else { 0.0 };
    let diffs: Vec<f64> = s
        .snapshots
        .iter()
        .zip(&d.snapshots)
        .take_while(|(x, _)| x.transmitted_fraction < 0.1)
        .map(|(x, y)| x.center - y.center)
        .collect();
    let center_rms = if diffs.is_empty() {
        0.0
    } else {
        (diffs.iter().map(|v| v * v).sum::<f64>() / diffs.len() as f64).sqrt()
    };
    KleinMetrics {
        schrodinger_transmitted: last(s),
        dirac_transmitted: last(d),
        schrodinger_norm_drift: s.norm_drift(),
        dirac_norm_drift: d.norm_drift(),
        max_dirac_speed,
        late_schrodinger_speed,
        center_rms,
        purity,
    }
}

/// Runs the scenario for several phases concurrently.
pub fn run_klein_sweep(v1: f64, v2: f64, phis: &[f64], scenario: &KleinScenario) -> Vec<Result<KleinRun>> {
    phis.par_iter()
        .map(|&phi| run_klein_scenario(&LatticeParams::new(v1, v2, phi)?, scenario))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_top_is_a_maximum() {
        let x = barrier_top(19.77, 157.0, 0.076).unwrap();
        let v = SlowPotential::DipoleTilt { v0: 19.77, w0: 157.0, f: 0.076 };
        let at = |x: f64| v.value(x).unwrap();
        assert!(at(x) > at(x - 1.0) && at(x) > at(x + 1.0));
        assert!((x - 151.12).abs() < 0.05, "{x}");
        assert!(barrier_top(0.1, 157.0, 0.076).is_err());
    }
}
