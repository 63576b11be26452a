pub mod error;
pub mod kernel;
pub mod measure;
pub mod opuc;
pub mod poly;
pub mod roots;
pub mod runner;
pub mod sample;
pub mod schur_cohn;
pub mod subspace;

pub use error::{Error, Result};
pub use poly::{DegreePair, Exponent, LaurentPoly, PolyJson, SupportBox, C64};
pub use measure::{check_stability, inner_product, BernsteinSzego, MomentTable, SlicedMoments, StabilityReport};
pub use schur_cohn::{build_tm, DeterminantProfile, LaurentMatrixPoly, PositivityReport};
pub use kernel::{ab_decomposition, kernel_divided_difference, kernel_from_tm, CdKernelSet};
