//! Effective Dirac description of the first and second excited bands near the
//! zone centre.
//!
//! Near `kappa = 0` the two bands follow
//!
//! ```text
//! E_{1,2}(kappa) = E_D -+ sqrt(m^2 c^4 + c^2 kappa^2)
//! ```
//!
//! with the gap `2 m c^2`. Rotating the band pair by the mixing angle
//! `tan theta = m c^2 / (c kappa + sqrt(m^2 c^4 + c^2 kappa^2))` turns the
//! lattice Hamiltonian into `[[E_D + c kappa, m c^2], [m c^2, E_D - c kappa]]`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{Matrix2, Owned, Vector3, DVector, DMatrix, U3, Dyn, Matrix3xX};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{fmt_sig, BandStructure, BlochState};

/// Default half-width of the fit window around `kappa = 0`.
pub const DEFAULT_FIT_WINDOW: f64 = 0.3;

/// Fits whose RMS misfit exceeds this are flagged.
pub const RESIDUAL_FLAG: f64 = 0.05;

/// Below this half-gap the mass is fixed to zero and the fit is linear.
const MASSLESS_HALF_GAP: f64 = 1e-6;

/// Effective mass energy `m c^2`, speed of light `c` and offset `E_D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracParams {
    pub mass_energy: f64,
    pub speed: f64,
    pub offset: f64,
    pub fit_window: f64,
    pub fit_residual: f64,
}

impl DiracParams {
    /// Parameters given directly rather than fitted.
    pub fn new(mass_energy: f64, speed: f64, offset: f64) -> Result<Self> {
        if !(mass_energy.is_finite() && speed.is_finite() && offset.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Dirac parameters".into()));
        }
        if mass_energy < 0.0 || speed <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need mc^2 >= 0 and c > 0 (got mc^2 = {mass_energy}, c = {speed})"
            )));
        }
        Ok(Self {
            mass_energy,
            speed,
            offset,
            fit_window: 0.0,
            fit_residual: 0.0,
        })
    }

    /// Local expansion at `kappa = 0`: `E_D` and `m c^2` from the zone-centre
    /// levels, `c` from the curvature of the squared half-gap (Richardson
    /// extrapolated over the first two grid points).
    pub fn from_zone_center(bands: &BandStructure) -> Result<Self> {
        require_pair(bands)?;
        let i0 = bands.center_index();
        let half = |i: usize| 0.5 * (bands.energy(2, i) - bands.energy(1, i));
        let h0 = half(i0);
        let k1 = bands.kappas()[i0 + 1];
        let k2 = bands.kappas()[i0 + 2];
        let f = |i: usize, k: f64| (half(i).powi(2) - h0 * h0) / (k * k);
        let c2 = (4.0 * f(i0 + 1, k1) - f(i0 + 2, k2)) / 3.0;
        let offset = 0.5 * (bands.energy(2, i0) + bands.energy(1, i0));
        Self::new(h0, c2.max(0.0).sqrt(), offset)
    }

    /// `sqrt(m^2 c^4 + c^2 kappa^2)`
    pub fn half_splitting(&self, kappa: f64) -> f64 {
        self.mass_energy.hypot(self.speed * kappa)
    }

    /// `(E_lower, E_upper)` of the relativistic dispersion.
    pub fn dispersion(&self, kappa: f64) -> (f64, f64) {
        let s = self.half_splitting(kappa);
        (self.offset - s, self.offset + s)
    }

    /// Group velocity of the upper branch, `c^2 kappa / sqrt(m^2 c^4 + c^2 kappa^2)`.
    pub fn group_velocity(&self, kappa: f64) -> f64 {
        let s = self.half_splitting(kappa);
        if s == 0.0 {
            0.0
        } else {
            self.speed * self.speed * kappa / s
        }
    }

    pub fn is_flagged(&self) -> bool {
        self.fit_residual > RESIDUAL_FLAG
    }

    /// Key-value block `phi`, `mc2`, `c`, `E_D`, `residual`, `window`.
    pub fn write_report<W: Write>(&self, mut w: W, phi: f64) -> std::io::Result<()> {
        writeln!(w, "phi={}", fmt_sig(phi))?;
        writeln!(w, "mc2={}", fmt_sig(self.mass_energy))?;
        writeln!(w, "c={}", fmt_sig(self.speed))?;
        writeln!(w, "E_D={}", fmt_sig(self.offset))?;
        writeln!(w, "residual={}", fmt_sig(self.fit_residual))?;
        writeln!(w, "window={}", fmt_sig(self.fit_window))
    }
}

fn require_pair(bands: &BandStructure) -> Result<()> {
    if bands.n_bands() < 3 {
        return Err(Error::InvalidParameter(format!(
            "band structure holds {} bands; bands 1 and 2 are required",
            bands.n_bands()
        )));
    }
    Ok(())
}

struct DispersionFit<'a> {
    kappas: &'a [f64],
    lower: &'a [f64],
    upper: &'a [f64],
    /// (E_D, m c^2, c)
    p: Vector3<f64>,
}

impl DispersionFit<'_> {
    fn n(&self) -> usize {
        self.kappas.len()
    }
}

impl LeastSquaresProblem<f64, Dyn, U3> for DispersionFit<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, p: &Vector3<f64>) {
        self.p.copy_from(p);
    }

    fn params(&self) -> Vector3<f64> {
        self.p
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let (ed, m, c) = (self.p[0], self.p[1], self.p[2]);
        let n = self.n();
        let mut r = DVector::zeros(2 * n);
        for (i, &k) in self.kappas.iter().enumerate() {
            let s = m.hypot(c * k);
            r[i] = ed - s - self.lower[i];
            r[n + i] = ed + s - self.upper[i];
        }
        Some(r)
    }

    fn jacobian(&self) -> Option<nalgebra::OMatrix<f64, Dyn, U3>> {
        let (m, c) = (self.p[1], self.p[2]);
        let n = self.n();
        let mut cols = Matrix3xX::zeros(2 * n);
        for (i, &k) in self.kappas.iter().enumerate() {
            let s = m.hypot(c * k);
            let (dm, dc) = if s > 0.0 { (m / s, c * k * k / s) } else { (0.0, 0.0) };
            cols.set_column(i, &Vector3::new(1.0, -dm, -dc));
            cols.set_column(n + i, &Vector3::new(1.0, dm, dc));
        }
        Some(cols.transpose())
    }
}

/// Least-squares fit of the relativistic dispersion to bands 1 and 2 over
/// `|kappa| <= window`, using both bands at once.
pub fn fit_dirac(bands: &BandStructure, window: f64) -> Result<DiracParams> {
    require_pair(bands)?;
    if !(window > 0.0 && window <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "fit window {window} must lie in (0, 0.5]"
        )));
    }
    let idx: Vec<usize> = (0..bands.n_kappas())
        .filter(|&i| bands.kappas()[i].abs() <= window + 1e-12)
        .collect();
    if idx.len() < 5 {
        return Err(Error::TooFewFitPoints { found: idx.len(), window });
    }
    let kappas: Vec<f64> = idx.iter().map(|&i| bands.kappas()[i]).collect();
    let lower: Vec<f64> = idx.iter().map(|&i| bands.energy(1, i)).collect();
    let upper: Vec<f64> = idx.iter().map(|&i| bands.energy(2, i)).collect();
    fit_dispersion(&kappas, &lower, &upper, window)
}

/// Fits the relativistic dispersion to explicit band samples.
pub fn fit_dispersion(
    kappas: &[f64],
    lower: &[f64],
    upper: &[f64],
    window: f64,
) -> Result<DiracParams> {
    let n = kappas.len();
    if n < 5 || lower.len() != n || upper.len() != n {
        return Err(Error::TooFewFitPoints { found: n, window });
    }
    let i0 = (0..n)
        .min_by(|&a, &b| kappas[a].abs().total_cmp(&kappas[b].abs()))
        .unwrap_or(0);
    let offset0 = 0.5 * (lower[i0] + upper[i0]);
    let half0 = 0.5 * (upper[i0] - lower[i0]);

    let (offset, mass, speed) = if half0 < MASSLESS_HALF_GAP {
        linear_massless_fit(kappas, lower, upper)?
    } else {
        // slope of the half-gap at the outermost in-window point
        let (imax, inext) = outermost_pair(kappas);
        let h = |i: usize| 0.5 * (upper[i] - lower[i]);
        let dk = (kappas[imax].abs() - kappas[inext].abs()).abs();
        let slope = if dk > 0.0 { ((h(imax) - h(inext)) / dk).abs() } else { 1.0 };
        let problem = DispersionFit {
            kappas,
            lower,
            upper,
            p: Vector3::new(offset0, half0, slope.max(1e-3)),
        };
        let (solved, report) = LevenbergMarquardt::new()
            .with_ftol(1e-15)
            .with_xtol(1e-15)
            .with_gtol(1e-15)
            .with_patience(500)
            .minimize(problem);
        if !report.termination.was_successful() {
            return Err(Error::FitFailed(format!("{:?}", report.termination)));
        }
        let p = solved.params();
        (p[0], p[1].abs(), p[2].abs())
    };
    if !(offset.is_finite() && mass.is_finite() && speed.is_finite()) || speed <= 0.0 {
        return Err(Error::FitFailed(format!(
            "non-physical fit E_D = {offset}, mc^2 = {mass}, c = {speed}"
        )));
    }
    let mut sq = 0.0;
    for i in 0..n {
        let s = mass.hypot(speed * kappas[i]);
        sq += (offset - s - lower[i]).powi(2) + (offset + s - upper[i]).powi(2);
    }
    Ok(DiracParams {
        mass_energy: mass,
        speed,
        offset,
        fit_window: window,
        fit_residual: (sq / (2 * n) as f64).sqrt(),
    })
}

fn outermost_pair(kappas: &[f64]) -> (usize, usize) {
    let mut order: Vec<usize> = (0..kappas.len()).collect();
    order.sort_by(|&a, &b| kappas[b].abs().total_cmp(&kappas[a].abs()));
    let first = order[0];
    let next = order
        .iter()
        .copied()
        .find(|&i| kappas[i].abs() < kappas[first].abs())
        .unwrap_or(first);
    (first, next)
}

/// `E = E_D -+ c |kappa|` by ordinary least squares in `(E_D, c)`.
fn linear_massless_fit(kappas: &[f64], lower: &[f64], upper: &[f64]) -> Result<(f64, f64, f64)> {
    let n = kappas.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 2);
    let mut b = DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        let k = kappas[i].abs();
        a[(i, 0)] = 1.0;
        a[(i, 1)] = -k;
        b[i] = lower[i];
        a[(n + i, 0)] = 1.0;
        a[(n + i, 1)] = k;
        b[n + i] = upper[i];
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::FitFailed(e.to_string()))?;
    Ok((sol[0], 0.0, sol[1].abs()))
}

/// `|(E_2(0) - E_1(0)) - 2 m c^2|`
pub fn gap_consistency(params: &DiracParams, bands: &BandStructure) -> f64 {
    let i0 = bands.center_index();
    ((bands.energy(2, i0) - bands.energy(1, i0)) - 2.0 * params.mass_energy).abs()
}

/// Mixing angle `theta(kappa)` with `tan theta = m c^2 / (c kappa + sqrt(m^2 c^4 + c^2 kappa^2))`.
///
/// For `m = 0` the angle is `0` for `kappa > 0` and `pi/2` for `kappa < 0`
/// (the limits from either side differ); at `m = 0, kappa = 0` it is undefined.
pub fn mixing_angle(params: &DiracParams, kappa: f64) -> Result<f64> {
    let mc2 = params.mass_energy;
    let ck = params.speed * kappa;
    if mc2 == 0.0 && kappa == 0.0 {
        return Err(Error::DiracPointUndefined);
    }
    let s = mc2.hypot(ck);
    // the kappa < 0 branch uses the rationalized form to avoid cancellation
    Ok(if ck >= 0.0 {
        mc2.atan2(ck + s)
    } else {
        (s - ck).atan2(mc2)
    })
}

/// Band pair rotated by a mixing angle.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedPair {
    pub kappa: f64,
    pub theta: f64,
    pub first: Vec<Complex64>,
    pub second: Vec<Complex64>,
}

impl RotatedPair {
    /// Applies the inverse rotation and returns the original coefficient vectors.
    pub fn unrotate(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        rotate_coeffs(&self.first, &self.second, -self.theta)
    }
}

fn rotate_coeffs(a: &[Complex64], b: &[Complex64], theta: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let (s, c) = theta.sin_cos();
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x * c + y * s, -x * s + y * c))
        .unzip()
}

/// `u~1 = cos(theta) u1 + sin(theta) u2`, `u~2 = -sin(theta) u1 + cos(theta) u2`.
pub fn rotate_band_pair(u1: &BlochState, u2: &BlochState, theta: f64) -> Result<RotatedPair> {
    if (u1.kappa - u2.kappa).abs() > 1e-12 {
        return Err(Error::MismatchedKappa { a: u1.kappa, b: u2.kappa });
    }
    if u1.band == u2.band || u1.coeffs.len() != u2.coeffs.len() {
        return Err(Error::InvalidParameter(
            "rotation needs two distinct bands in the same basis".into(),
        ));
    }
    let (first, second) = rotate_coeffs(&u1.coeffs, &u2.coeffs, theta);
    Ok(RotatedPair { kappa: u1.kappa, theta, first, second })
}

/// `[[E_D + c kappa, m c^2], [m c^2, E_D - c kappa]]`
pub fn h0_matrix(params: &DiracParams, kappa: f64) -> Matrix2<f64> {
    let ck = params.speed * kappa;
    let m = params.mass_energy;
    Matrix2::new(params.offset + ck, m, m, params.offset - ck)
}

/// `U = (1/sqrt 2) [[1, -1], [1, 1]]`
pub fn spinor_rotation_matrix() -> Matrix2<f64> {
    Matrix2::new(1.0, -1.0, 1.0, 1.0) * FRAC_1_SQRT_2
}

/// Applies `U` to a two-component spinor.
pub fn spinor_rotation(spinor: [Complex64; 2]) -> [Complex64; 2] {
    let [a, b] = spinor;
    [(a - b) * FRAC_1_SQRT_2, (a + b) * FRAC_1_SQRT_2]
}

/// Applies `U^dagger`.
pub fn inverse_spinor_rotation(spinor: [Complex64; 2]) -> [Complex64; 2] {
    let [a, b] = spinor;
    [(a + b) * FRAC_1_SQRT_2, (b - a) * FRAC_1_SQRT_2]
}

/// `U [[V + c kappa, m c^2], [m c^2, V - c kappa]] U^T` for a scalar potential value `v`.
pub fn rotated_dirac_matrix(v: f64, mass_energy: f64, c_kappa: f64) -> Matrix2<f64> {
    let u = spinor_rotation_matrix();
    let h = Matrix2::new(v + c_kappa, mass_energy, mass_energy, v - c_kappa);
    u * h * u.transpose()
}
