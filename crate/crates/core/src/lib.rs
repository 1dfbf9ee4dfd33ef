//! 2D ARMA random-field modeling.
//!
//! The crate covers the full pipeline: synthesizing quarter-plane ARMA
//! fields from known parameters, estimating parameters from data with the
//! two-stage Yule-Walker least-squares procedure (a long-AR Yule-Walker fit
//! whitens the field into a noise proxy, then a linear regression recovers
//! the AR and MA coefficients jointly), and segmenting images into texture
//! classes by clustering per-block coefficient vectors with k-means.
//!
//! ```
//! use std::collections::BTreeMap;
//! use armafield_core::{estimate, synthesize, zero_mean, ArmaParams, ModelOrder, SynthesisConfig};
//!
//! let order = ModelOrder::with_default_approx(1, 1, 0, 0);
//! let a: BTreeMap<_, _> = [((0, 1), -0.5), ((1, 0), -0.5), ((1, 1), 0.25)]
//!     .into_iter()
//!     .collect();
//! let params = ArmaParams::new(&order, a, BTreeMap::new(), 1.0)?;
//! let config = SynthesisConfig::new(order, params, 128, 128, 64, 7)?;
//! let (field, _mean) = zero_mean(&synthesize(&config)?);
//!
//! let fit = estimate(&field, &order)?;
//! assert!((fit.theta[0] - -0.5).abs() < 0.1); // a(0,1)
//! # Ok::<(), armafield_core::Error>(())
//! ```

pub mod ar_yw;
pub mod autocorr;
pub mod composite;
pub mod error;
pub mod field;
pub mod imaging;
mod linalg;
pub mod segmenter;
pub mod synthesis;
pub mod ywls;

pub use error::{Error, Result};
pub use field::{lag_order, theta_pack, theta_unpack, zero_mean, ArmaParams, Field, ModelOrder};
pub use synthesis::{stability_check, synthesize, SynthesisConfig};
pub use ywls::{estimate, ArmaFit};
