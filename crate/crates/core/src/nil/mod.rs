//! Spectrum of the magnetic horizontal Laplacian on the Heisenberg
//! quotient of scale k: Fourier-sector reduction to 2D magnetic
//! Schrödinger operators, a direct 3D discretization used as an
//! independent oracle, calibration of the Landau constant, the closed
//! eigenvalue formula, and the sharp upper bound.

mod bounds;
mod calibrate;
mod grid3d;
mod sector;

pub use bounds::{upper_bound_report, BoundReport};
pub use calibrate::{
    cache_path, calibrate_landau, load_calibration, store_calibration, CalibrationCache,
    CalibrationSample, LandauCalibration,
};
pub use grid3d::{assemble_heisenberg_3d, nil_lambda1_3d, Lambda3d};
pub use sector::{
    assemble_sector, nil_lambda1_closed, nil_lambda1_sector, SectorEigen, SectorScan, SectorSpec,
};

use crate::field::EvalError;
use crate::geometry::GeometryError;
use crate::rumin::RuminError;
use std::fmt;

#[derive(Clone, Debug)]
pub enum NilError {
    BadScale,
    GridTooCoarse { nx: u32, ny: u32 },
    Grid3dTooCoarse { nx: u32, ny: u32, nz: u32 },
    /// Magnetic flux through one plaquette exceeds a half turn; the grid
    /// cannot represent the field faithfully.
    PlaquetteFluxTooLarge { argument: f64 },
    /// Sector solvers need z-free coefficients; the 3D solver handles the
    /// rest.
    ZDependent { which: &'static str },
    /// A coefficient that is not invariant under the lattice
    /// identifications defines no function on the quotient.
    NotDescending { which: &'static str, defect: f64 },
    /// Grid list for calibration must be ascending and doubling, with at
    /// least two entries of at least 8.
    CalibrationGrids,
    MissingUnitSector,
    Geometry(GeometryError),
    Reduction(RuminError),
    Eval(EvalError),
}

impl fmt::Display for NilError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NilError::BadScale => write!(f, "scale k must be a positive integer"),
            NilError::GridTooCoarse { nx, ny } => {
                write!(f, "sector grid {nx}x{ny} too coarse; need at least 8 per direction")
            }
            NilError::Grid3dTooCoarse { nx, ny, nz } => {
                write!(f, "3d grid {nx}x{ny}x{nz} too coarse; need at least 8 per direction")
            }
            NilError::PlaquetteFluxTooLarge { argument } => write!(
                f,
                "flux per plaquette has argument {argument:.3} > pi; refine the grid for this sector"
            ),
            NilError::ZDependent { which } => write!(
                f,
                "coefficient {which} depends on z; sector reduction needs basic potentials, use the 3d solver"
            ),
            NilError::NotDescending { which, defect } => write!(
                f,
                "coefficient {which} is not invariant under the lattice identifications (defect {defect:.2e})"
            ),
            NilError::CalibrationGrids => write!(
                f,
                "calibration grids must be at least two sizes >= 8 in doubling order"
            ),
            NilError::MissingUnitSector => {
                write!(f, "calibration needs m = 1 or m = -1 in the sector list")
            }
            NilError::Geometry(e) => write!(f, "{e}"),
            NilError::Reduction(e) => write!(f, "{e}"),
            NilError::Eval(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for NilError {}

impl From<GeometryError> for NilError {
    fn from(e: GeometryError) -> Self {
        NilError::Geometry(e)
    }
}

impl From<RuminError> for NilError {
    fn from(e: RuminError) -> Self {
        NilError::Reduction(e)
    }
}

impl From<EvalError> for NilError {
    fn from(e: EvalError) -> Self {
        NilError::Eval(e)
    }
}
