use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quasimomentum {kappa} lies outside the Brillouin zone [-1, 1]")]
    OutOfZone { kappa: f64 },

    #[error("eigensolver failed to converge at kappa = {kappa} (V1 = {v1}, V2 = {v2}, phi = {phi})")]
    Eigensolver { kappa: f64, v1: f64, v2: f64, phi: f64 },

    #[error("grid spacing {dx} does not resolve the basis (need dx < {required})")]
    GridTooCoarse { dx: f64, required: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("only {found} quasimomenta inside the fit window |kappa| <= {window} (need at least 5)")]
    TooFewFitPoints { found: usize, window: f64 },

    #[error("dispersion fit failed: {0}")]
    FitFailed(String),

    #[error("band {band} is degenerate with a neighbour near kappa = {kappa}")]
    Degenerate { band: usize, kappa: f64 },

    #[error("mixing angle undefined at a massless Dirac point (m = 0, kappa = 0)")]
    DiracPointUndefined,

    #[error("states live at different quasimomenta ({a} vs {b})")]
    MismatchedKappa { a: f64, b: f64 },

    #[error("grid captures only {captured} of the Wannier norm")]
    InsufficientExtent { captured: f64 },

    #[error("wave packet touches the box edge (edge amplitude {tail:e})")]
    PacketAtEdge { tail: f64 },

    #[error("band projection {purity} is below 0.95; envelope too narrow")]
    LowBandPurity { purity: f64 },

    #[error("norm drift {drift:e} after {step} steps")]
    NormDrift { step: usize, drift: f64 },

    #[error("density reached the box edge at t = {time} (ratio to peak {ratio:e})")]
    EdgeDensity { time: f64, ratio: f64 },

    #[error("envelope is not band-limited: spectral weight {fraction:e} outside the first zone")]
    Aliasing { fraction: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method (convergence, drift, degeneracy)
    /// rather than of the inputs or the file system.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Eigensolver { .. }
                | Error::FitFailed(_)
                | Error::Degenerate { .. }
                | Error::NormDrift { .. }
                | Error::EdgeDensity { .. }
                | Error::LowBandPurity { .. }
                | Error::InsufficientExtent { .. }
                | Error::Aliasing { .. }
                | Error::DiracPointUndefined
        )
    }
}
