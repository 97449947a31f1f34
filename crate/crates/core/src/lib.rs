//! Exact harmonic analysis on the level-`k` Sierpiński gaskets `SG_k`: harmonic structure,
//! Kusuoka measure, energy Laplacian estimators, self-similar matrix identities and mixing.

pub mod error;
pub mod exact;
pub mod harmonic;
pub mod laplacian;
pub mod linalg;
pub mod measures;
pub mod mixing;
pub mod selfsim;
pub mod topology;
pub mod verify;
pub mod walk;
pub mod word;

pub use error::{Error, Result};
pub use exact::{Mat3, QSqrt3, Rational};
pub use harmonic::{HarmonicStructure, RenormMethod};
pub use laplacian::{GridFunction, LaplacianSequence};
pub use measures::{EnergyCoordinates, MeasureVector};
pub use mixing::SymOperator;
pub use selfsim::MMatrixFamily;
pub use topology::{gasket_params, GasketParams, LevelGraph, Point, VertexAddress};
pub use walk::{WalkStats, WalkTarget};
pub use word::Word;
