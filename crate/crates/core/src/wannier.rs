//! Gauge-fixed Wannier functions and potential matrix elements in the Wannier basis.
//!
//! For a band on the quasimomentum grid `kappa_j = -1 + 2j/N` the Wannier
//! function of site `n` is the discrete Fourier sum
//!
//! ```text
//! w_n(x) = (1/N) sum_j exp(-i kappa_j n d) psi_{kappa_j}(x)
//! ```
//!
//! with cell-normalized Bloch functions `psi`. It lives on a ring of `N` cells
//! and is sampled on the `N/2` cells either side of its site.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::lattice::{compute_band_structure, fmt_sig, BandStructure, LatticeParams, PlaneWaveBasis, PERIOD};

/// Smallest acceptable gap between a band and its neighbours.
pub const MIN_GAP: f64 = 1e-6;

/// Parallel-transport overlaps below this mean the band swaps character
/// between neighbouring grid points: a crossing the grid does not resolve.
pub const MIN_TRANSPORT_OVERLAP: f64 = 0.85;

/// Quasimomentum grid must be at least this dense.
pub const MIN_KAPPAS: usize = 129;

/// Samples per lattice period used for Wannier quadrature.
pub const DEFAULT_POINTS_PER_PERIOD: usize = 64;

/// One band in a smooth, zone-periodic gauge.
#[derive(Debug, Clone)]
pub struct GaugeFixedBand {
    pub band: usize,
    /// `N` periodic grid points `-1 + 2j/N`, `j = 0..N`.
    pub kappas: Vec<f64>,
    /// Plane-wave coefficients per grid point in the fixed gauge.
    pub coeffs: Vec<Vec<Complex64>>,
    /// Wannier centre of the home site (site 0), from the Berry phase.
    pub center: f64,
    /// Smallest parallel-transport overlap encountered.
    pub min_overlap: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Coefficients of the same Bloch function relabelled from `kappa` to `kappa + 2`.
fn shift_to_next_zone(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    out[..v.len() - 1].copy_from_slice(&v[1..]);
    out
}

fn scale(v: &mut [Complex64], phase: f64) {
    let p = Complex64::from_polar(1.0, phase);
    v.iter_mut().for_each(|c| *c *= p);
}

/// Parallel-transport gauge for band `alpha` with the residual winding spread
/// uniformly over the zone, shifted so the Wannier centre lies in `[-d/4, 3d/4)`.
pub fn fix_gauge(bands: &BandStructure, alpha: usize) -> Result<GaugeFixedBand> {
    let nk = bands.n_kappas();
    if nk < MIN_KAPPAS {
        return Err(Error::InvalidParameter(format!(
            "Wannier construction needs at least {MIN_KAPPAS} quasimomenta, got {nk}"
        )));
    }
    if alpha + 1 >= bands.n_bands() {
        return Err(Error::InvalidParameter(format!(
            "band {alpha} needs its upper neighbour in the band structure"
        )));
    }
    let kappas = bands.kappas();
    let neighbour_gap = |i: usize| {
        let up = bands.energy(alpha + 1, i) - bands.energy(alpha, i);
        if alpha > 0 {
            up.min(bands.energy(alpha, i) - bands.energy(alpha - 1, i))
        } else {
            up
        }
    };
    for i in 0..nk {
        if neighbour_gap(i) <= MIN_GAP {
            return Err(Error::Degenerate { band: alpha, kappa: kappas[i] });
        }
    }

    let n = nk - 1;
    let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(nk);
    v.push(bands.state(alpha, 0).coeffs.clone());
    let mut min_overlap = 1.0f64;
    for j in 1..nk {
        let mut next = bands.state(alpha, j).coeffs.clone();
        let o = dot(&v[j - 1], &next);
        if o.norm() < MIN_TRANSPORT_OVERLAP {
            let at = if neighbour_gap(j) < neighbour_gap(j - 1) { j } else { j - 1 };
            return Err(Error::Degenerate { band: alpha, kappa: kappas[at] });
        }
        min_overlap = min_overlap.min(o.norm());
        scale(&mut next, -o.arg());
        v.push(next);
    }
    let closure = dot(&shift_to_next_zone(&v[0]), &v[n]).arg();
    for (j, c) in v.iter_mut().enumerate() {
        scale(c, -closure * j as f64 / n as f64);
    }
    v.truncate(n);
    let periodic: Vec<f64> = kappas[..n].to_vec();

    let mut gauge = GaugeFixedBand {
        band: alpha,
        kappas: periodic,
        coeffs: v,
        center: 0.0,
        min_overlap,
    };
    let center = gauge.berry_center();
    let shift = -((center + 0.25 * PERIOD) / PERIOD).floor();
    if shift != 0.0 {
        for (c, &k) in gauge.coeffs.iter_mut().zip(&gauge.kappas) {
            scale(c, -k * shift * PERIOD);
        }
    }
    gauge.center = gauge.berry_center();
    Ok(gauge)
}

impl GaugeFixedBand {
    pub fn n_kappas(&self) -> usize {
        self.kappas.len()
    }

    /// Wannier centre `(d / 2 pi) * Berry phase`, summed link by link so the
    /// result is unwrapped.
    fn berry_center(&self) -> f64 {
        let n = self.n_kappas();
        let mut phase = 0.0;
        for j in 0..n {
            let next = if j + 1 < n {
                self.coeffs[j + 1].clone()
            } else {
                shift_to_next_zone(&self.coeffs[0])
            };
            phase -= dot(&self.coeffs[j], &next).arg();
        }
        PERIOD * phase / (2.0 * PI)
    }

    /// Gauge-fixed Bloch function at grid point `j`, normalized to one per cell.
    pub fn bloch_value(&self, j: usize, x: f64) -> Complex64 {
        crate::lattice::evaluate_plane_waves(&self.coeffs[j], self.kappas[j], x) / PERIOD.sqrt()
    }

    /// Samples `w_0(m d + r d / ppp)` for cell offsets `m in [-N/2, N/2)` and
    /// `r in 0..ppp`.
    pub fn sample_table(&self, points_per_period: usize) -> WannierTable {
        let n = self.n_kappas();
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        let mut data = vec![Complex64::new(0.0, 0.0); points_per_period * n];
        for r in 0..points_per_period {
            let y = r as f64 * PERIOD / points_per_period as f64;
            let row = &mut data[r * n..(r + 1) * n];
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = self.bloch_value(j, y);
            }
            // exp(i kappa_j m d) = (-1)^m exp(2 pi i j m / N) for d = pi
            fft.process(row);
            for (m, z) in row.iter_mut().enumerate() {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                *z *= sign / n as f64;
            }
        }
        WannierTable { band: self.band, points_per_period, n_cells: n, data, center: self.center }
    }
}

/// Home-site Wannier function tabulated on its ring of cells.
#[derive(Debug, Clone)]
pub struct WannierTable {
    pub band: usize,
    pub points_per_period: usize,
    pub n_cells: usize,
    data: Vec<Complex64>,
    pub center: f64,
}

impl WannierTable {
    /// `w_0` at cell offset `m` and intra-cell sample `r`, zero outside the ring's half-width.
    pub fn value(&self, m: i64, r: usize) -> Complex64 {
        let half = (self.n_cells / 2) as i64;
        if m < -half || m >= half {
            return Complex64::new(0.0, 0.0);
        }
        let idx = m.rem_euclid(self.n_cells as i64) as usize;
        self.data[r * self.n_cells + idx]
    }

    /// Samples `w_site` on an aligned grid.
    pub fn sample(&self, site: i64, grid: &SpatialGrid) -> Result<Vec<Complex64>> {
        let ppp = grid.points_per_period().ok_or_else(|| {
            Error::GridMismatch("grid spacing does not divide the lattice period".into())
        })?;
        if ppp != self.points_per_period {
            return Err(Error::GridMismatch(format!(
                "table has {} points per period, grid has {ppp}",
                self.points_per_period
            )));
        }
        let origin = grid.aligned_origin().ok_or_else(|| {
            Error::GridMismatch("grid points are not aligned with the lattice".into())
        })?;
        let p = ppp as i64;
        Ok((0..grid.len() as i64)
            .map(|i| {
                let g = origin + i;
                self.value(g.div_euclid(p) - site, g.rem_euclid(p) as usize)
            })
            .collect())
    }
}

/// Real-space Wannier function of one band and site.
#[derive(Debug, Clone)]
pub struct WannierFunction {
    pub band: usize,
    pub site: i64,
    pub grid: SpatialGrid,
    pub samples: Vec<Complex64>,
    /// Site position `n d + home centre`.
    pub center: f64,
}

/// Minimum span of a Wannier sampling grid, in periods.
pub const MIN_GRID_PERIODS: f64 = 20.0;

/// Evaluates the Wannier function of `site` on `grid`.
pub fn build_wannier(gauge: &GaugeFixedBand, site: i64, grid: &SpatialGrid) -> Result<WannierFunction> {
    let ppp = grid.points_per_period().ok_or_else(|| {
        Error::GridMismatch("grid spacing does not divide the lattice period".into())
    })?;
    let table = gauge.sample_table(ppp);
    wannier_from_table(&table, site, grid)
}

pub fn wannier_from_table(table: &WannierTable, site: i64, grid: &SpatialGrid) -> Result<WannierFunction> {
    let samples = table.sample(site, grid)?;
    let captured: f64 = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx();
    if grid.length() < MIN_GRID_PERIODS * PERIOD || captured < 1.0 - 1e-6 {
        return Err(Error::InsufficientExtent { captured });
    }
    Ok(WannierFunction {
        band: table.band,
        site,
        grid: *grid,
        samples,
        center: site as f64 * PERIOD + table.center,
    })
}

impl WannierFunction {
    pub fn norm(&self) -> f64 {
        (self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }

    /// Position expectation of `|w|^2`.
    pub fn mean_position(&self) -> f64 {
        self.weighted(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean_position();
        self.weighted(|x| (x - m) * (x - m))
    }

    fn weighted(&self, f: impl Fn(f64) -> f64) -> f64 {
        let dx = self.grid.dx();
        self.samples
            .iter()
            .enumerate()
            .map(|(i, z)| f(self.grid.x(i)) * z.norm_sqr())
            .sum::<f64>()
            * dx
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |w|` beyond `periods` lattice periods from the centre, relative to the peak.
    pub fn tail_ratio(&self, periods: f64) -> f64 {
        let cut = periods * PERIOD;
        let tail = self
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| (self.grid.x(*i) - self.center).abs() > cut)
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        tail / self.peak()
    }

    /// Orders of magnitude by which `|w|^2` falls from its peak to its
    /// largest value beyond `periods` periods.
    pub fn decay_decades(&self, periods: f64) -> f64 {
        -2.0 * self.tail_ratio(periods).log10()
    }

    /// Slope of `ln max_cell |w|` against distance from the centre over
    /// `from..to` periods (per-cell maxima skip the nodes).
    pub fn tail_slope(&self, from: f64, to: f64) -> f64 {
        let mut cells: BTreeMap<i64, f64> = BTreeMap::new();
        for (i, z) in self.samples.iter().enumerate() {
            let r = (self.grid.x(i) - self.center).abs() / PERIOD;
            if r > from && r < to {
                let e = cells.entry(r.floor() as i64).or_insert(0.0);
                *e = e.max(z.norm());
            }
        }
        let pts: Vec<(f64, f64)> = cells
            .iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|(&c, &v)| ((c as f64 + 0.5) * PERIOD, v.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    /// Largest imaginary part after removing the phase of the peak sample.
    pub fn imaginary_residual(&self) -> f64 {
        let peak = self
            .samples
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_default();
        let rot = Complex64::from_polar(1.0, -peak.arg());
        self.samples.iter().map(|z| (z * rot).im.abs()).fold(0.0, f64::max)
    }

    /// `<self|other>` on the common grid.
    pub fn overlap(&self, other: &WannierFunction) -> Result<Complex64> {
        potential_matrix_element(self, |_| 1.0, other)
    }

    /// CSV `x,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,re,im")?;
        for (i, z) in self.samples.iter().enumerate() {
            writeln!(w, "{},{},{}", fmt_sig(self.grid.x(i)), fmt_sig(z.re), fmt_sig(z.im))?;
        }
        Ok(())
    }
}

/// `int dx w_left^*(x) V(x) w_right(x)` by the periodic trapezoidal rule.
pub fn potential_matrix_element(
    w_left: &WannierFunction,
    potential: impl Fn(f64) -> f64,
    w_right: &WannierFunction,
) -> Result<Complex64> {
    if !w_left.grid.same_as(&w_right.grid) {
        return Err(Error::GridMismatch("Wannier functions live on different grids".into()));
    }
    let g = &w_left.grid;
    let sum: Complex64 = w_left
        .samples
        .iter()
        .zip(&w_right.samples)
        .enumerate()
        .map(|(i, (a, b))| a.conj() * b * potential(g.x(i)))
        .sum();
    Ok(sum * g.dx())
}

/// Numerical settings for Wannier-based tables.
#[derive(Debug, Clone, Copy)]
pub struct WannierSettings {
    pub n_kappas: usize,
    pub basis: PlaneWaveBasis,
    pub points_per_period: usize,
}

impl Default for WannierSettings {
    fn default() -> Self {
        Self {
            n_kappas: 513,
            basis: PlaneWaveBasis::default(),
            points_per_period: DEFAULT_POINTS_PER_PERIOD,
        }
    }
}

/// Matrix elements of `V(x) = F x` per unit `F`, relative to the diagonal
/// term `F x_n`: `int w_{beta,s}^*(x) (x - x_alpha) w_{alpha,0}(x) dx`.
#[derive(Debug, Clone)]
pub struct PotentialMatrixTable {
    /// `(beta, alpha, s)` -> element
    pub entries: BTreeMap<(usize, usize, i64), Complex64>,
    /// Home-site centres `x_alpha`; the diagonal term is `F (n d + x_alpha)`.
    pub centers: BTreeMap<usize, f64>,
    pub params: LatticeParams,
    pub descriptor: String,
}

impl PotentialMatrixTable {
    pub fn get(&self, beta: usize, alpha: usize, offset: i64) -> Option<Complex64> {
        self.entries.get(&(beta, alpha, offset)).copied()
    }

    /// Diagonal (local) term `n d + x_alpha` per unit `F`.
    pub fn diagonal_term(&self, alpha: usize, site: i64) -> Option<f64> {
        self.centers.get(&alpha).map(|c| site as f64 * PERIOD + c)
    }

    /// `max |V(beta,alpha,s) - conj(V(alpha,beta,-s))|`
    pub fn hermiticity_residual(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|(&(b, a, s), v)| self.get(a, b, -s).map(|w| (v - w.conj()).norm()))
            .fold(0.0, f64::max)
    }

    /// CSV rows `alpha,beta,offset,re,im,V1` (no header).
    pub fn write_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (&(beta, alpha, s), v) in &self.entries {
            writeln!(
                w,
                "{alpha},{beta},{s},{},{},{}",
                fmt_sig(v.re),
                fmt_sig(v.im),
                fmt_sig(self.params.v1())
            )?;
        }
        Ok(())
    }
}

pub const MATRIX_TABLE_HEADER: &str = "alpha,beta,offset,re,im,V1";

/// Linear-potential table for bands 1 and 2 with `|s| <= max_offset`.
pub fn linear_potential_table(params: &LatticeParams, max_offset: i64) -> Result<PotentialMatrixTable> {
    linear_potential_table_with(params, max_offset, &WannierSettings::default())
}

pub fn linear_potential_table_with(
    params: &LatticeParams,
    max_offset: i64,
    settings: &WannierSettings,
) -> Result<PotentialMatrixTable> {
    let bands = compute_band_structure(params, settings.n_kappas, 4, &settings.basis)?;
    let pair = [1usize, 2];
    let gauges = pair
        .iter()
        .map(|&a| fix_gauge(&bands, a))
        .collect::<Result<Vec<_>>>()?;
    let n_cells = settings.n_kappas - 1;
    let grid = SpatialGrid::lattice(n_cells, settings.points_per_period)?;
    let tables: Vec<WannierTable> = gauges
        .iter()
        .map(|g| g.sample_table(settings.points_per_period))
        .collect();

    let mut entries = BTreeMap::new();
    let mut centers = BTreeMap::new();
    for (ia, &alpha) in pair.iter().enumerate() {
        let home = wannier_from_table(&tables[ia], 0, &grid)?;
        let x_alpha = tables[ia].center;
        centers.insert(alpha, x_alpha);
        for (ib, &beta) in pair.iter().enumerate() {
            for s in -max_offset..=max_offset {
                let left = wannier_from_table(&tables[ib], s, &grid)?;
                let v = potential_matrix_element(&left, |x| x - x_alpha, &home)?;
                entries.insert((beta, alpha, s), v);
            }
        }
    }
    Ok(PotentialMatrixTable {
        entries,
        centers,
        params: *params,
        descriptor: "linear V(x) = F x, per unit F".into(),
    })
}
