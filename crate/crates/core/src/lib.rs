//! Large and moderate deviations for Euclidean norms of random projections
//! of `ℓ_p^n` balls: samplers, rate functions, Legendre transforms, a
//! rare-event Monte-Carlo engine and the KLS decision checks.

pub mod error;
pub mod legendre;
pub mod mc;
pub mod optim;
pub mod probe;
pub mod quad;
pub mod rates;
pub mod sampling;
pub mod serde_ext;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use legendre::{CgfTable, ContractionProblem};
pub use mc::{Direction, Estimator, Statistic, TailEstimate, TailQuery, Tilt};
pub use probe::{KlsVerdict, SpeedClass, Verdict};
pub use rates::{Rate, RateFunction, Regime, RegimeSpec, Speed};
pub use sampling::{ProjectionConfig, RngStream, WLaw};
pub use specfun::{BivariateCov, PggParams};
