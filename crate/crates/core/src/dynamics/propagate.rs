use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::dirac::DiracParams;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::lattice::{fmt_sig, LatticeParams};

use super::state::{SlowPotential, WaveState};

/// Norm drift allowed per block of this many steps.
const DRIFT_BLOCK: usize = 1000;
const MAX_BLOCK_DRIFT: f64 = 1e-6;

/// Edge guard: density within this many periods of the box edge ...
const EDGE_PERIODS: f64 = 5.0;
/// ... may not exceed this fraction of the peak.
const EDGE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    /// Time step; negative values propagate backwards.
    pub dt: f64,
    pub n_steps: usize,
    /// Steps between snapshots.
    pub stride: usize,
    /// Transmission threshold for the snapshot records.
    pub x_cut: f64,
    /// Grid points averaged into each snapshot density bin; 0 stores no density.
    pub density_bin: usize,
    /// Abort when density reaches the box edge.
    pub edge_guard: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_steps: 1000,
            stride: 100,
            x_cut: f64::INFINITY,
            density_bin: 0,
            edge_guard: true,
        }
    }
}

/// Record of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
    pub center: f64,
    pub width: f64,
    pub transmitted_fraction: f64,
    /// Bin-averaged `sum |psi|^2`, empty unless requested.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// Centres of the density bins.
    pub bin_centers: Vec<f64>,
    pub final_state: WaveState,
}

impl Trajectory {
    /// `max_t |norm(t) - norm(0)|`
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.snapshots[0].norm;
        self.snapshots.iter().map(|s| (s.norm - n0).abs()).fold(0.0, f64::max)
    }

    /// Centre-of-mass velocities between consecutive snapshots, as `(mid time, velocity)`.
    pub fn center_velocities(&self) -> Vec<(f64, f64)> {
        self.snapshots
            .windows(2)
            .map(|w| {
                let dt = w[1].time - w[0].time;
                (0.5 * (w[0].time + w[1].time), (w[1].center - w[0].center) / dt)
            })
            .collect()
    }
}

struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn forward(&mut self, v: &mut [Complex64]) {
        self.forward.process_with_scratch(v, &mut self.scratch);
    }

    fn inverse(&mut self, v: &mut [Complex64]) {
        self.inverse.process_with_scratch(v, &mut self.scratch);
    }
}

fn check_options(opts: &PropagationOptions) -> Result<()> {
    if !opts.dt.is_finite() || opts.dt == 0.0 {
        return Err(Error::InvalidParameter(format!("time step {} must be finite and nonzero", opts.dt)));
    }
    if opts.stride == 0 {
        return Err(Error::InvalidParameter("snapshot stride must be positive".into()));
    }
    Ok(())
}

fn snapshot(state: &WaveState, step: usize, opts: &PropagationOptions) -> Snapshot {
    let density = if opts.density_bin > 0 {
        state.binned_density(opts.density_bin).1
    } else {
        Vec::new()
    };
    Snapshot {
        step,
        time: state.time,
        norm: state.norm(),
        center: state.center(),
        width: state.width(),
        transmitted_fraction: state.transmitted_fraction(opts.x_cut),
        density,
    }
}

/// Shared stepping loop: snapshots, drift and edge checks.
fn run(
    mut state: WaveState,
    opts: &PropagationOptions,
    mut step: impl FnMut(&mut WaveState),
) -> Result<Trajectory> {
    check_options(opts)?;
    let start_time = state.time;
    let mut snapshots = vec![snapshot(&state, 0, opts)];
    let mut block_norm = state.norm();
    for s in 1..=opts.n_steps {
        step(&mut state);
        state.time = start_time + s as f64 * opts.dt;
        if s % DRIFT_BLOCK == 0 {
            let n = state.norm();
            let drift = (n - block_norm).abs();
            if drift > MAX_BLOCK_DRIFT || !n.is_finite() {
                return Err(Error::NormDrift { step: s, drift });
            }
            block_norm = n;
        }
        if s % opts.stride == 0 || s == opts.n_steps {
            if opts.edge_guard {
                let ratio = state.edge_ratio(EDGE_PERIODS);
                if ratio > EDGE_LIMIT {
                    return Err(Error::EdgeDensity { time: state.time, ratio });
                }
            }
            snapshots.push(snapshot(&state, s, opts));
        }
    }
    let bin_centers = if opts.density_bin > 0 {
        state.binned_density(opts.density_bin).0
    } else {
        Vec::new()
    };
    Ok(Trajectory { snapshots, bin_centers, final_state: state })
}

fn total_potential(grid: &SpatialGrid, lattice: &LatticeParams, slow: &SlowPotential) -> Result<Vec<f64>> {
    let v = slow.sample(grid)?;
    Ok(v.iter().enumerate().map(|(i, s)| s + lattice.potential(grid.x(i))).collect())
}

/// Strang-split spectral propagation of `i dpsi/dt = (-d^2/dx^2 + V_lattice + V_slow) psi`
/// with periodic boundaries.
pub fn propagate_schrodinger(
    state: WaveState,
    lattice: &LatticeParams,
    slow: &SlowPotential,
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    if state.is_spinor() {
        return Err(Error::InvalidParameter("Schrodinger propagation needs a scalar state".into()));
    }
    let grid = state.grid;
    let n = grid.len();
    let dt = opts.dt;
    let half: Vec<Complex64> = total_potential(&grid, lattice, slow)?
        .iter()
        .map(|v| Complex64::from_polar(1.0, -0.5 * v * dt))
        .collect();
    let kinetic: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|k| Complex64::from_polar(1.0 / n as f64, -k * k * dt))
        .collect();
    let mut fft = Spectral::new(n);
    run(state, opts, |s| {
        let psi = &mut s.components[0];
        psi.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
        fft.forward(psi);
        psi.iter_mut().zip(&kinetic).for_each(|(z, k)| *z *= k);
        fft.inverse(psi);
        psi.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
    })
}

/// Split-step propagation of `i d/dt (psi1, psi2) = [[V + c p, m c^2], [m c^2, V - c p]] (psi1, psi2)`.
///
/// The position half-steps apply `exp(-i dt/2 (V + m c^2 sigma_x))` exactly;
/// the momentum step multiplies the components by `exp(-+ i c k dt)`.
pub fn propagate_dirac(
    state: WaveState,
    dirac: &DiracParams,
    slow: &SlowPotential,
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    if !state.is_spinor() {
        return Err(Error::InvalidParameter("Dirac propagation needs a two-component state".into()));
    }
    let grid = state.grid;
    let n = grid.len();
    let dt = opts.dt;
    let phase: Vec<Complex64> = slow
        .sample(&grid)?
        .iter()
        .map(|v| Complex64::from_polar(1.0, -0.5 * v * dt))
        .collect();
    let a = 0.5 * dt * dirac.mass_energy;
    let (cos_a, isin_a) = (Complex64::new(a.cos(), 0.0), Complex64::new(0.0, -a.sin()));
    let (up, down): (Vec<Complex64>, Vec<Complex64>) = grid
        .wavenumbers()
        .iter()
        .map(|k| {
            let w = dirac.speed * k * dt;
            (
                Complex64::from_polar(1.0 / n as f64, -w),
                Complex64::from_polar(1.0 / n as f64, w),
            )
        })
        .unzip();
    let mut fft = Spectral::new(n);
    let position = move |s: &mut WaveState| {
        let (first, second) = s.components.split_at_mut(1);
        for ((p, q), ph) in first[0].iter_mut().zip(second[0].iter_mut()).zip(&phase) {
            let (x, y) = (*p, *q);
            *p = ph * (cos_a * x + isin_a * y);
            *q = ph * (isin_a * x + cos_a * y);
        }
    };
    run(state, opts, |s| {
        position(s);
        fft.forward(&mut s.components[0]);
        fft.forward(&mut s.components[1]);
        s.components[0].iter_mut().zip(&up).for_each(|(z, f)| *z *= f);
        s.components[1].iter_mut().zip(&down).for_each(|(z, f)| *z *= f);
        fft.inverse(&mut s.components[0]);
        fft.inverse(&mut s.components[1]);
        position(s);
    })
}

/// `<psi| -d^2/dx^2 + V |psi> / <psi|psi>` evaluated spectrally.
pub fn schrodinger_energy(state: &WaveState, lattice: &LatticeParams, slow: &SlowPotential) -> Result<f64> {
    let grid = state.grid;
    let psi = &state.components[0];
    let mut f = psi.clone();
    Spectral::new(grid.len()).forward(&mut f);
    let kinetic: f64 = f
        .iter()
        .zip(grid.wavenumbers())
        .map(|(a, k)| k * k * a.norm_sqr())
        .sum::<f64>()
        / grid.len() as f64;
    let v = total_potential(&grid, lattice, slow)?;
    let potential: f64 = psi.iter().zip(&v).map(|(z, v)| v * z.norm_sqr()).sum();
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    Ok((kinetic + potential) / norm)
}

/// Writes `{prefix}_NNNNN.csv` (`x,density`) per snapshot and
/// `{prefix}_manifest.csv` (`time,file,norm,center,transmitted_fraction`).
/// `header` lines are prefixed with `# ` in every file.
pub fn write_trajectory(dir: &Path, prefix: &str, traj: &Trajectory, header: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let write_header = |w: &mut dyn Write| -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        Ok(())
    };
    let manifest_path = dir.join(format!("{prefix}_manifest.csv"));
    let mut manifest = BufWriter::new(File::create(manifest_path)?);
    write_header(&mut manifest)?;
    writeln!(manifest, "time,file,norm,center,transmitted_fraction")?;
    for (i, s) in traj.snapshots.iter().enumerate() {
        let name = format!("{prefix}_{i:05}.csv");
        if !traj.bin_centers.is_empty() {
            let mut w = BufWriter::new(File::create(dir.join(&name))?);
            write_header(&mut w)?;
            writeln!(w, "# time={}", fmt_sig(s.time))?;
            writeln!(w, "x,density")?;
            for (x, d) in traj.bin_centers.iter().zip(&s.density) {
                writeln!(w, "{},{}", fmt_sig(*x), fmt_sig(*d))?;
            }
            w.flush()?;
        }
        writeln!(
            manifest,
            "{},{},{},{},{}",
            fmt_sig(s.time),
            name,
            fmt_sig(s.norm),
            fmt_sig(s.center),
            fmt_sig(s.transmitted_fraction)
        )?;
    }
    manifest.flush()?;
    Ok(())
}
