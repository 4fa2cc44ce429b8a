use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::PERIOD;
use crate::wannier::WannierTable;

use super::state::WaveState;

/// Wannier coefficients `psi_{alpha,n} = <w_{alpha,n}|Psi>` of one band.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseBand {
    pub band: usize,
    pub sites: Vec<i64>,
    pub coeffs: Vec<Complex64>,
    /// Site positions `n d + x_alpha`.
    pub positions: Vec<f64>,
}

impl CoarseBand {
    pub fn weight(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn coeff(&self, site: i64) -> Option<Complex64> {
        self.sites.iter().position(|&s| s == site).map(|i| self.coeffs[i])
    }
}

/// Projects a scalar state onto the Wannier functions of every site in the box.
pub fn coarse_grain(state: &WaveState, tables: &[WannierTable]) -> Result<Vec<CoarseBand>> {
    if state.is_spinor() {
        return Err(Error::InvalidParameter("coarse graining needs a scalar state".into()));
    }
    let grid = &state.grid;
    let (ppp, periods, origin) = match (grid.points_per_period(), grid.periods(), grid.aligned_origin()) {
        (Some(p), Some(n), Some(o)) if o.rem_euclid(p as i64) == 0 => (p, n, o),
        _ => {
            return Err(Error::GridMismatch(
                "coarse graining needs a grid of whole periods aligned with the sites".into(),
            ))
        }
    };
    let psi = &state.components[0];
    let first_cell = origin / ppp as i64;
    let last_cell = first_cell + periods as i64;
    let dx = grid.dx();
    tables
        .iter()
        .map(|t| {
            if t.points_per_period != ppp {
                return Err(Error::GridMismatch(format!(
                    "Wannier table has {} points per period, state grid has {ppp}",
                    t.points_per_period
                )));
            }
            let half = (t.n_cells / 2) as i64;
            let sites: Vec<i64> = (first_cell..last_cell).collect();
            let coeffs = sites
                .par_iter()
                .map(|&n| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let lo = (n - half).max(first_cell);
                    let hi = (n + half).min(last_cell);
                    for cell in lo..hi {
                        let base = ((cell - first_cell) as usize) * ppp;
                        for r in 0..ppp {
                            acc += t.value(cell - n, r).conj() * psi[base + r];
                        }
                    }
                    acc * dx
                })
                .collect();
            let positions = sites.iter().map(|&n| n as f64 * PERIOD + t.center).collect();
            Ok(CoarseBand { band: t.band, sites, coeffs, positions })
        })
        .collect()
}
